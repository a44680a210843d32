#![allow(dead_code)]

use lrkit::param::int;
use lrkit::{Cell, Error, RMSpace, Rect};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded generator; `LRKIT_SEED` overrides the default.
pub fn rng(salt: u64) -> ChaCha8Rng {
    let base = std::env::var("LRKIT_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(20240613u64);
    ChaCha8Rng::seed_from_u64(base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn unit_square() -> Rect {
    Rect::new(int(0), int(0), int(1), int(1)).unwrap()
}

/// A few random cells of the current skeleton.
pub fn random_marks(space: &RMSpace, rng: &mut ChaCha8Rng) -> Vec<Cell> {
    let cells = space.mesh().cells();
    let n = rng.gen_range(1..=4.min(cells.len()));
    cells.choose_multiple(rng, n).copied().collect()
}

/// Marked refinement one segment at a time, calling `check` after every
/// successful insertion.
pub fn refine_checked(space: &RMSpace, marked: &[Cell], mut check: impl FnMut(&RMSpace)) -> RMSpace {
    let mut current = space.clone();
    for seg in space.refinement_segments(marked) {
        if current.mesh().multiplicity_along(seg.direction, seg.fixed, seg.lo, seg.hi) >= 1 {
            continue;
        }
        match current.rm_insert(&seg) {
            Ok((next, done)) => {
                assert!(done.lo <= seg.lo && done.hi >= seg.hi, "extension shrank the segment");
                current = next;
                check(&current);
            }
            Err(Error::NoSupportTraversed) => {}
            Err(e) => panic!("insertion of {seg:?} failed: {e}"),
        }
    }
    current
}

/// `rounds` rounds of random marked refinement from an `m x m` skeleton.
pub fn random_space(m: usize, s: u32, rounds: usize, rng: &mut ChaCha8Rng) -> RMSpace {
    let mut space = RMSpace::tensor(m, m, unit_square(), s).unwrap();
    for _ in 0..rounds {
        let marks = random_marks(&space, rng);
        space = space.rm_refine_marked(&marks).unwrap();
    }
    space
}

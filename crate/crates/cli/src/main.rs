use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lrkit::io::{mesh_from_str, mesh_to_string, parse_marks, resolve_marks, space_from_str, splines_to_string};
use lrkit::poisson::{adaptive_solve, PoissonProblem};
use lrkit::{admissible_check, parse_param, LRMesh, Param, RMSpace, Rect};

#[derive(Parser)]
#[command(name = "lrkit", version, about = "LR and RM B-spline meshes, refinement and adaptive Poisson solves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an open tensor mesh
    MeshNew {
        /// Cell counts as MxN
        #[arg(long, value_parser = parse_cells)]
        cells: (usize, usize),
        /// Domain corners as x0,y0,x1,y1
        #[arg(long, value_parser = parse_domain, default_value = "0,0,1,1")]
        domain: Rect,
        #[arg(long, default_value_t = 1)]
        degree: usize,
        /// Internal line multiplicity
        #[arg(long, default_value_t = 1)]
        mult: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refine an RM-shaped mesh at the marked cells
    Refine {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        marks: PathBuf,
        #[arg(long, default_value_t = 1)]
        rounds: usize,
        #[arg(long)]
        out_mesh: Option<PathBuf>,
        /// Where to write the bilinear skeleton functions
        #[arg(long)]
        out_splines: Option<PathBuf>,
    },
    /// Raise a bilinear mesh to RM shape for smoothness s
    Lift {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        s: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exit 0 if the mesh is admissible for RM B-splines with smoothness s
    Check {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        s: u32,
    },
    /// Number of RM B-splines for s = 0..=s-max, as CSV
    Count {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        s_max: u32,
    },
    /// RM B-splines active at a point and their values
    Eval {
        #[arg(long)]
        space: PathBuf,
        #[arg(long, value_parser = parse_point)]
        point: (f64, f64),
    },
    /// Adaptive Poisson solve, one CSV row per iteration
    Solve {
        #[arg(long, default_value = "arctan")]
        problem: String,
        #[arg(long, default_value_t = 2)]
        s: u32,
        #[arg(long, default_value_t = 8)]
        m0: usize,
        #[arg(long, default_value_t = 7)]
        iters: usize,
        #[arg(long, default_value_t = 0.05)]
        theta: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Draw a mesh as SVG
    Render {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Parse(String),
    Invariant(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Parse(_) => 2,
            Failure::Invariant(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Parse(m) | Failure::Invariant(m) => m,
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn invariant(e: lrkit::Error) -> Failure {
    Failure::Invariant(e.to_string())
}

fn parse_cells(text: &str) -> Result<(usize, usize), String> {
    let (m, n) = text.split_once(['x', 'X']).ok_or("expected MxN")?;
    let m: usize = m.trim().parse().map_err(|_| "bad cell count")?;
    let n: usize = n.trim().parse().map_err(|_| "bad cell count")?;
    if m == 0 || n == 0 {
        return Err("cell counts must be positive".into());
    }
    Ok((m, n))
}

fn parse_domain(text: &str) -> Result<Rect, String> {
    let v: Vec<Param> = text.split(',').map(|f| parse_param(f.trim())).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    if v.len() != 4 {
        return Err("expected x0,y0,x1,y1".into());
    }
    Rect::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

fn parse_point(text: &str) -> Result<(f64, f64), String> {
    let (x, y) = text.split_once(',').ok_or("expected x,y")?;
    let x: f64 = x.trim().parse().map_err(|_| "bad coordinate")?;
    let y: f64 = y.trim().parse().map_err(|_| "bad coordinate")?;
    Ok((x, y))
}

fn read(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_mesh(path: &Path) -> Outcome<LRMesh> {
    mesh_from_str(&read(path)?).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&Path>) -> Outcome<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_newline(mut text: String) -> String {
    text.push('\n');
    text
}

fn run(command: Command) -> Outcome<()> {
    match command {
        Command::MeshNew { cells: (m, n), domain, degree, mult, out } => {
            let mesh = LRMesh::tensor(m, n, domain, degree, mult).map_err(invariant)?;
            emit(&with_newline(mesh_to_string(&mesh)), out.as_deref())
        }
        Command::Refine { mesh, marks, rounds, out_mesh, out_splines } => {
            let input = load_mesh(&mesh)?;
            let marks = parse_marks(&read(&marks)?).map_err(|e| Failure::Parse(e.to_string()))?;
            let mut space = RMSpace::from_mesh(&input).map_err(invariant)?;
            for round in 0..rounds {
                let cells = resolve_marks(&marks, space.mesh(), round == 0).map_err(|e| Failure::Parse(e.to_string()))?;
                space = space.rm_refine_marked(&cells).map_err(invariant)?;
                eprintln!(
                    "round {}: marked {}, cells {}, functions {}",
                    round + 1,
                    cells.len(),
                    space.mesh().cells().len(),
                    space.cardinality()
                );
            }
            let result = space.lifted_mesh();
            match out_mesh {
                Some(path) => emit(&with_newline(mesh_to_string(&result)), Some(&path))?,
                None => println!("{}", mesh_to_string(&result)),
            }
            if let Some(path) = out_splines {
                emit(&with_newline(splines_to_string(space.skeleton())), Some(&path))?;
            }
            Ok(())
        }
        Command::Lift { mesh, s, out } => {
            let mesh = load_mesh(&mesh)?;
            let space = RMSpace::from_mesh(&mesh).map_err(invariant)?;
            emit(&with_newline(mesh_to_string(&space.with_s(s).lifted_mesh())), out.as_deref())
        }
        Command::Check { mesh, s } => {
            let mesh = load_mesh(&mesh)?;
            if admissible_check(&mesh, s) {
                println!("admissible");
                Ok(())
            } else {
                Err(Failure::Invariant(format!("mesh is not admissible for s = {s}")))
            }
        }
        Command::Count { mesh, s_max } => {
            let mesh = load_mesh(&mesh)?;
            let space = RMSpace::from_mesh(&mesh).map_err(invariant)?;
            println!("s,count");
            for s in 0..=s_max {
                println!("{s},{}", space.with_s(s).cardinality());
            }
            Ok(())
        }
        Command::Eval { space, point: (x, y) } => {
            let space = space_from_str(&read(&space)?).map_err(|e| Failure::Parse(e.to_string()))?;
            let knots = |k: &[Param]| k.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
            for (b, v) in space.basis_at(x, y).map_err(invariant)? {
                println!("{}\t{}\t{v}", knots(b.kx.knots()), knots(b.ky.knots()));
            }
            Ok(())
        }
        Command::Solve { problem, s, m0, iters, theta, report } => {
            let problem = PoissonProblem::preset(&problem)
                .ok_or_else(|| Failure::Usage(format!("unknown problem {problem:?} (arctan, smooth, linear)")))?;
            if iters == 0 || m0 == 0 {
                return Err(Failure::Usage("--iters and --m0 must be positive".into()));
            }
            let result = adaptive_solve(&problem, s, m0, iters, theta).map_err(invariant)?;
            emit(&result.to_csv(), report.as_deref())
        }
        Command::Render { mesh, out } => emit(&lrkit::svg::render(&load_mesh(&mesh)?), out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("lrkit: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

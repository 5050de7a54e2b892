use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lattice_defects_cli::{run, Command, RunConfig, Tolerances};

#[derive(Parser)]
#[command(
    name = "latdef",
    version,
    about = "Waves on a lattice with point defects: forward solves, defect recovery, cloaks"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Scene document (JSON)
    #[arg(long, global = true)]
    scene: Option<PathBuf>,
    /// Output file; stdout when omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Quadrature points per axis for Green coefficients
    #[arg(long, global = true)]
    order: Option<usize>,
    /// Half-width of the oracle/field box
    #[arg(long, global = true)]
    radius: Option<i64>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Cap on worker threads
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Args)]
struct TolArgs {
    #[arg(long = "tol-rank", global = true)]
    rank: Option<f64>,
    #[arg(long = "tol-cons", global = true)]
    cons: Option<f64>,
    #[arg(long = "tol-ver", global = true)]
    ver: Option<f64>,
    #[arg(long = "tol-adm", global = true)]
    adm: Option<f64>,
    #[arg(long = "tol-den", global = true)]
    den: Option<f64>,
    #[arg(long = "tol-floor", global = true)]
    floor: Option<f64>,
    #[arg(long = "tol-cloak", global = true)]
    cloak: Option<f64>,
    #[arg(long = "tol-im", global = true)]
    im: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Dump Green coefficients needed by the scene
    Green {
        /// Also tabulate all offsets with components in [0, BOX]
        #[arg(long = "box")]
        offset_box: Option<i64>,
        /// Preload a previous dump
        #[arg(long)]
        load: Option<PathBuf>,
    },
    /// Predict receiver amplitudes; writes the scene with measurements
    Forward,
    /// Solve the truncated lattice directly and write the grid
    Oracle,
    /// Recover defects from the scene's measurements
    Invert {
        /// Keep only real candidates in [0, BOUND]
        #[arg(long)]
        bound: Option<f64>,
    },
    /// Design a defect invisible at the receivers
    Cloak {
        #[arg(long)]
        real: bool,
        #[arg(long)]
        bound: Option<f64>,
    },
    /// Write the wave field on a box for plotting
    Field,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(scene) = cli.scene else {
        eprintln!("error: --scene is required");
        return ExitCode::from(1);
    };
    let command = match &cli.command {
        Cmd::Green { .. } => Command::Green,
        Cmd::Forward => Command::Forward,
        Cmd::Oracle => Command::Oracle,
        Cmd::Invert { .. } => Command::Invert,
        Cmd::Cloak { .. } => Command::Cloak,
        Cmd::Field => Command::Field,
    };
    let mut cfg = RunConfig::new(command, scene);
    cfg.out = cli.out;
    cfg.order = cli.order;
    cfg.radius = cli.radius;
    cfg.seed = cli.seed;
    cfg.threads = cli.threads;
    let d = Tolerances::default();
    cfg.tolerances = Tolerances {
        rank: cli.tol.rank.unwrap_or(d.rank),
        cons: cli.tol.cons.unwrap_or(d.cons),
        ver: cli.tol.ver.unwrap_or(d.ver),
        adm: cli.tol.adm.unwrap_or(d.adm),
        den: cli.tol.den.unwrap_or(d.den),
        floor: cli.tol.floor.unwrap_or(d.floor),
        cloak: cli.tol.cloak.unwrap_or(d.cloak),
        im: cli.tol.im.unwrap_or(d.im),
    };
    match cli.command {
        Cmd::Green { offset_box, load } => {
            cfg.offset_box = offset_box;
            cfg.load_table = load;
        }
        Cmd::Invert { bound } => cfg.bound = bound,
        Cmd::Cloak { real, bound } => {
            cfg.real = real;
            cfg.bound = bound;
        }
        _ => {}
    }

    match run(&cfg) {
        Ok(Some(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            print!("{}", e.document());
            eprintln!("error: {}.{}: {}", e.module, e.operation, e.message);
            ExitCode::from(e.exit_code as u8)
        }
    }
}

use clap::{Args, Parser, Subcommand};
use flexlab::config::{
    parse_config, Command, CoverSection, CurveSection, CutoffSection, GlueSection, GridSection, RunConfig,
    SetcutoffSection, StaircaseSection, TangentSection,
};
use flexlab::report::{execute, RunError};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "flexlab", version, about = "Cutoffs, jet gluing and certified deformation runs")]
struct Cli {
    /// Record wall-clock seconds in the report; such reports are not reproducible bit for bit.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Outputs {
    /// CSV table, or the JSON report for commands without a table. Standard output when omitted.
    #[arg(long, visible_alias = "out-fn")]
    out: Option<PathBuf>,
    /// JSON report. Standard output when omitted.
    #[arg(long, visible_alias = "out-report")]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug)]
struct GridSize {
    x: usize,
    t: Option<usize>,
}

fn parse_grid(s: &str) -> Result<GridSize, String> {
    let bad = || format!("expected X or XxT sample counts, got `{s}`");
    match s.split_once('x') {
        Some((x, t)) => Ok(GridSize { x: x.parse().map_err(|_| bad())?, t: Some(t.parse().map_err(|_| bad())?) }),
        None => Ok(GridSize { x: s.parse().map_err(|_| bad())?, t: None }),
    }
}

#[derive(Args)]
struct GridArgs {
    /// Certification grid: `X` x-samples or `XxT` x- and t-samples.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<GridSize>,
    /// Double the grid until two successive refinements agree on the margin sign.
    #[arg(long)]
    refine: bool,
}

impl GridArgs {
    fn section(&self) -> GridSection {
        GridSection {
            x_samples: self.grid.map(|g| g.x),
            t_samples: self.grid.and_then(|g| g.t),
            refine: self.refine.then_some(true),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Tabulate the logarithmic cutoff τ_(δ,ε) and its derivatives.
    Cutoff {
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        /// Add the empirical derivative-bound report.
        #[arg(long)]
        certify: bool,
        #[command(flatten)]
        outputs: Outputs,
    },
    /// Estimate the tangent space of a sampled set at a point.
    Tangent {
        /// Named set or a file of points, one `x y [z]` per line.
        #[arg(long)]
        set: Option<String>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        point: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        #[arg(long)]
        samples: Option<usize>,
        #[command(flatten)]
        outputs: Outputs,
    },
    /// Build a separated ε-net of a sampled set.
    Cover {
        #[arg(long)]
        set: Option<String>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[command(flatten)]
        outputs: Outputs,
    },
    /// Build the cutoff around a subset of a sampled set and tabulate it on a grid.
    Setcutoff {
        #[arg(long)]
        set: Option<String>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        order: Option<usize>,
        /// Output grid points per axis over [−1, 1]ⁿ.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[command(flatten)]
        outputs: Outputs,
    },
    /// Calibrate and certify one of the built-in gluing problems.
    Glue {
        /// staircase-step, remark32 or remark33.
        #[arg(long)]
        fixture: Option<String>,
        #[arg(long, value_delimiter = ',')]
        delta_schedule: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        eps_schedule: Option<Vec<f64>>,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        outputs: Outputs,
    },
    /// Run the slope-K staircase approximation of f on [0, 1].
    Staircase {
        #[arg(long = "K", allow_negative_numbers = true)]
        k: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long = "L")]
        l: Option<f64>,
        #[arg(long = "N")]
        n: Option<usize>,
        /// dyadic or vdc.
        #[arg(long)]
        seq: Option<String>,
        /// `id` or a file of `x y dy` Hermite nodes.
        #[arg(long)]
        f: Option<String>,
        /// harmonic or geometric.
        #[arg(long)]
        budget: Option<String>,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        outputs: Outputs,
    },
    /// Deform the unit circle to curvature μ near a point while keeping curvature above 1 − ε.
    Curve {
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        /// Half-width of the deformed arc.
        #[arg(long)]
        bump: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        outputs: Outputs,
    },
    /// Execute a TOML run configuration.
    Run {
        config: PathBuf,
        #[command(flatten)]
        outputs: Outputs,
    },
}

fn set<T>(field: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *field = v;
    }
}

/// Converts the command line into a run configuration plus the output overrides.
fn to_config(cmd: Cmd) -> Result<(RunConfig, Outputs), RunError> {
    Ok(match cmd {
        Cmd::Cutoff { delta, eps, order, samples, certify, outputs } => {
            let mut s = CutoffSection { certify, ..Default::default() };
            set(&mut s.delta, delta);
            set(&mut s.eps, eps);
            set(&mut s.order, order);
            set(&mut s.samples, samples);
            let mut c = RunConfig::new(Command::Cutoff);
            c.cutoff = Some(s);
            (c, outputs)
        }
        Cmd::Tangent { set: name, point, radii, samples, outputs } => {
            let mut s = TangentSection { radii, ..Default::default() };
            set(&mut s.set, name);
            set(&mut s.point, point);
            set(&mut s.samples, samples);
            let mut c = RunConfig::new(Command::Tangent);
            c.tangent = Some(s);
            (c, outputs)
        }
        Cmd::Cover { set: name, eps, samples, outputs } => {
            let mut s = CoverSection::default();
            set(&mut s.set, name);
            set(&mut s.eps, eps);
            set(&mut s.samples, samples);
            let mut c = RunConfig::new(Command::Cover);
            c.cover = Some(s);
            (c, outputs)
        }
        Cmd::Setcutoff { set: name, delta, lambda, order, grid, samples, outputs } => {
            let mut s = SetcutoffSection::default();
            set(&mut s.set, name);
            set(&mut s.delta, delta);
            set(&mut s.lambda, lambda);
            set(&mut s.order, order);
            set(&mut s.grid, grid);
            set(&mut s.samples, samples);
            let mut c = RunConfig::new(Command::Setcutoff);
            c.setcutoff = Some(s);
            (c, outputs)
        }
        Cmd::Glue { fixture, delta_schedule, eps_schedule, grid, outputs } => {
            let mut s = GlueSection { delta_schedule, eps_schedule, ..Default::default() };
            set(&mut s.fixture, fixture);
            let mut c = RunConfig::new(Command::Glue);
            c.glue = Some(s);
            c.grid = grid.section();
            (c, outputs)
        }
        Cmd::Staircase { k, eps, l, n, seq, f, budget, grid, outputs } => {
            let mut s = StaircaseSection { l, ..Default::default() };
            set(&mut s.k_slope, k);
            set(&mut s.eps, eps);
            set(&mut s.n, n);
            set(&mut s.seq, seq);
            set(&mut s.f, f);
            set(&mut s.budget, budget);
            let mut c = RunConfig::new(Command::Staircase);
            c.staircase = Some(s);
            c.grid = grid.section();
            (c, outputs)
        }
        Cmd::Curve { mu, eps, bump, samples, seed, grid, outputs } => {
            let mut s = CurveSection::default();
            set(&mut s.mu, mu);
            set(&mut s.eps, eps);
            set(&mut s.bump, bump);
            set(&mut s.samples, samples);
            set(&mut s.seed, seed);
            let mut c = RunConfig::new(Command::Curve);
            c.curve = Some(s);
            c.grid = grid.section();
            (c, outputs)
        }
        Cmd::Run { config, outputs } => {
            let text =
                std::fs::read_to_string(&config).map_err(|e| RunError::Input(format!("{}: {e}", config.display())))?;
            (parse_config(&text)?, outputs)
        }
    })
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("FLEXLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| format!("FLEXLAB_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let (cfg, outputs) = match to_config(cli.command) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let start = Instant::now();
    let mut out = match execute(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.timing {
        out.report.wall_clock_s = Some(start.elapsed().as_secs_f64());
    }
    let table_path = outputs.out.clone().or_else(|| cfg.output.table.clone().map(PathBuf::from));
    let mut report_path = outputs.report.or_else(|| cfg.output.report.clone().map(PathBuf::from));
    if out.table.is_none() && report_path.is_none() {
        report_path = outputs.out;
    }
    let stdout = std::io::stdout();
    if let Err(e) = out.emit(table_path.as_deref(), report_path.as_deref(), &mut stdout.lock()) {
        eprintln!("error: writing output: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(out.exit_code() as u8)
}

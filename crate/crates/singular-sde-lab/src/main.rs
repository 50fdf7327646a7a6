//! Command-line front end. Every experiment reads an optional INI-style
//! config file; flags override file values key for key. Exit codes:
//! 0 clean, 1 completed with warnings, 2 hard error (bad config, I/O).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use singular_sde_lab::{configure_jobs, parse_config_with_overrides, run, run_suite};

#[derive(Parser)]
#[command(
    name = "singular-sde-lab",
    version,
    about = "numerical laboratory for singular-drift diffusions",
    propagate_version = true
)]
struct Cli {
    /// worker threads (default: the SSL_LAB_JOBS variable, then all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags shared by the experiment subcommands; each one overrides the
/// config key of the same name.
#[derive(Args, Default)]
struct RunOpts {
    /// INI-style config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// path of the CSV (or `.bin` solution) artifact
    #[arg(long)]
    output: Option<String>,
    /// drift id, e.g. `inverse-square:d=3:delta=1`
    #[arg(long)]
    drift: Option<String>,
    /// space dimension for a bare drift kind
    #[arg(long)]
    d: Option<String>,
    /// form bound for a bare inverse-square kind
    #[arg(long)]
    delta: Option<String>,
    /// mollification level applied on top of --drift
    #[arg(long)]
    mollify: Option<String>,
    /// grid half-width L
    #[arg(long)]
    half_width: Option<String>,
    /// grid spacing
    #[arg(long)]
    h: Option<String>,
    /// grid time step
    #[arg(long)]
    tau: Option<String>,
    /// grid horizon
    #[arg(long)]
    t_end: Option<String>,
    /// keep every k-th time slice
    #[arg(long)]
    store_every: Option<String>,
    /// initial condition (`constant:c`, `bump:r=..:amp=..`, `gaussian:sigma=..:amp=..`)
    #[arg(long)]
    initial: Option<String>,
    /// scalar source factor, same grammar as --initial
    #[arg(long)]
    source_f: Option<String>,
    /// vector source factor: a drift id or `none`
    #[arg(long)]
    source_h: Option<String>,
    /// Monte Carlo paths
    #[arg(long)]
    m: Option<String>,
    /// Monte Carlo time step
    #[arg(long)]
    dt: Option<String>,
    /// Monte Carlo horizon
    #[arg(long)]
    horizon: Option<String>,
    /// RNG seed
    #[arg(long)]
    seed: Option<String>,
    /// start radius |x0|
    #[arg(long)]
    x0_radius: Option<String>,
    /// hitting radius
    #[arg(long)]
    epsilon: Option<String>,
    /// integrability exponent
    #[arg(long)]
    p: Option<String>,
    /// auxiliary exponent in (1, d/(d-1))
    #[arg(long)]
    theta: Option<String>,
    /// weight curvature
    #[arg(long)]
    kappa: Option<String>,
    /// weight decay exponent
    #[arg(long)]
    beta: Option<String>,
    /// comma list of `t0:t1` time windows
    #[arg(long)]
    windows: Option<String>,
    /// comma list of form bounds to scan
    #[arg(long)]
    deltas: Option<String>,
    /// comma list of mollification levels to scan
    #[arg(long)]
    levels: Option<String>,
}

impl RunOpts {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |key: &str, value: &Option<String>| {
            if let Some(v) = value {
                out.push((key.to_string(), v.clone()));
            }
        };
        push("output", &self.output);
        push("drift", &self.drift);
        push("d", &self.d);
        push("delta", &self.delta);
        push("mollify", &self.mollify);
        push("half_width", &self.half_width);
        push("h", &self.h);
        push("tau", &self.tau);
        push("t_end", &self.t_end);
        push("store_every", &self.store_every);
        push("initial", &self.initial);
        push("source_f", &self.source_f);
        push("source_h", &self.source_h);
        push("m", &self.m);
        push("dt", &self.dt);
        push("horizon", &self.horizon);
        push("seed", &self.seed);
        push("x0_radius", &self.x0_radius);
        push("epsilon", &self.epsilon);
        push("p", &self.p);
        push("theta", &self.theta);
        push("kappa", &self.kappa);
        push("beta", &self.beta);
        push("windows", &self.windows);
        push("deltas", &self.deltas);
        push("levels", &self.levels);
        out
    }
}

/// Iteration-lemma parameters (capitalized flags follow the recurrence's
/// usual notation).
#[derive(Args, Default)]
struct DgOpts {
    /// factor N of the recurrence
    #[arg(long = "N")]
    n: Option<String>,
    /// ratio C0 of the recurrence
    #[arg(long = "C0")]
    c0: Option<String>,
    /// exponent alpha
    #[arg(long)]
    alpha: Option<String>,
    /// starting value y0
    #[arg(long)]
    y0: Option<String>,
    /// step budget
    #[arg(long)]
    max_m: Option<String>,
}

impl DgOpts {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |key: &str, value: &Option<String>| {
            if let Some(v) = value {
                out.push((key.to_string(), v.clone()));
            }
        };
        push("dg_n", &self.n);
        push("dg_c0", &self.c0);
        push("dg_alpha", &self.alpha);
        push("dg_y0", &self.y0);
        push("dg_max_m", &self.max_m);
        out
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Numeric form-bound certificate for a drift field
    Certify(RunOpts),
    /// Solve the parabolic problem on a grid and write the solution
    Solve(RunOpts),
    /// Discrete energy identity and inequality for a solved problem
    Energy(RunOpts),
    /// Local and weighted sup bounds for a solved problem
    Supbound(RunOpts),
    /// Iterate the threshold recurrence y_{m+1} = N C0^m y_m^{1+alpha}
    Dgiter {
        #[command(flatten)]
        opts: RunOpts,
        #[command(flatten)]
        dg: DgOpts,
    },
    /// Hitting frequency of a small ball across a list of form bounds
    HittingScan(RunOpts),
    /// Martingale defect of a C^2 test function along simulated paths
    Martingale(RunOpts),
    /// Occupation statistic and fitted constant over time windows
    Krylov(RunOpts),
    /// Scaling of the drift occupation integral with window length
    Scaling(RunOpts),
    /// Run the acceptance checks (all, or a single one with --only)
    Suite {
        /// artifact directory
        #[arg(long, default_value = "suite-out")]
        out: PathBuf,
        /// run a single criterion (1..=9)
        #[arg(long)]
        only: Option<usize>,
    },
}

fn run_experiment(kind: &str, opts: &RunOpts, extra: Vec<(String, String)>) -> ExitCode {
    let text = match &opts.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => String::new(),
    };
    let mut overrides = vec![("experiment".to_string(), kind.to_string())];
    overrides.extend(opts.overrides());
    overrides.extend(extra);
    let config = match parse_config_with_overrides(&text, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    match run(&config) {
        Ok(manifest) => {
            for line in &manifest.summary {
                println!("{line}");
            }
            println!("{}", manifest.describe());
            if manifest.warnings.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run_acceptance(out: &PathBuf, only: Option<usize>) -> ExitCode {
    match run_suite(out, only) {
        Ok(reports) => {
            let mut all_pass = true;
            for report in &reports {
                println!("{}", report.line());
                for detail in &report.details {
                    println!("    {detail}");
                }
                all_pass &= report.pass;
            }
            if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_jobs(cli.jobs);
    match &cli.cmd {
        Cmd::Certify(o) => run_experiment("certify", o, Vec::new()),
        Cmd::Solve(o) => run_experiment("solve", o, Vec::new()),
        Cmd::Energy(o) => run_experiment("energy", o, Vec::new()),
        Cmd::Supbound(o) => run_experiment("supbound", o, Vec::new()),
        Cmd::Dgiter { opts, dg } => run_experiment("dgiter", opts, dg.overrides()),
        Cmd::HittingScan(o) => run_experiment("hitting-scan", o, Vec::new()),
        Cmd::Martingale(o) => run_experiment("martingale", o, Vec::new()),
        Cmd::Krylov(o) => run_experiment("krylov", o, Vec::new()),
        Cmd::Scaling(o) => run_experiment("scaling", o, Vec::new()),
        Cmd::Suite { out, only } => run_acceptance(out, *only),
    }
}

use clap::{Args, Parser, Subcommand};
use fracbag::config::{Command, RunConfig, OUTPUT_DIR_ENV};
use fracbag::{execute, CliError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fracbag", version, about = "Shooting solver for compactly supported radial Dirac states")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Shooting constants at the given parameters.
    Constants,
    /// One trajectory from `u(0) = 0, v(0) = x`.
    Integrate,
    /// Nodal bisection for `k` sign changes.
    Shoot,
    /// Continuation of the `k`-node state along a decreasing list of exponents.
    MitLimit,
    /// Classification over an `x` grid, or an ε-refinement study.
    Sweep,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Constants => Command::Constants,
            Cmd::Integrate => Command::Integrate,
            Cmd::Shoot => Command::Shoot,
            Cmd::MitLimit => Command::MitLimit,
            Cmd::Sweep => Command::Sweep,
        }
    }
}

/// Every flag overrides the matching field of the config file.
#[derive(Args)]
struct Opts {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,

    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    mass: Option<f64>,
    /// Absolute frequency; overrides --omega-factor.
    #[arg(long, global = true)]
    omega: Option<f64>,
    /// Frequency as a multiple of the threshold (default 1.1).
    #[arg(long, global = true)]
    omega_factor: Option<f64>,
    /// Exponent whose threshold --omega-factor multiplies (default: --p).
    #[arg(long, global = true)]
    omega_ref_p: Option<f64>,
    #[arg(long, global = true)]
    e1: Option<f64>,
    #[arg(long, global = true)]
    q_cone: Option<f64>,

    #[arg(long, global = true)]
    x: Option<f64>,
    /// Read --x and --x-grid in units of E₀.
    #[arg(long, global = true)]
    x_in_e0: bool,
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Relative bisection width.
    #[arg(long, global = true)]
    x_tol: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    p_list: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    x_grid: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    eps_grid: Option<Vec<f64>>,
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true)]
    h_init: Option<f64>,
    #[arg(long, global = true)]
    tol_rel: Option<f64>,
    #[arg(long, global = true)]
    tol_abs: Option<f64>,
    #[arg(long, global = true)]
    delta_diag: Option<f64>,
    #[arg(long, global = true)]
    tol_origin: Option<f64>,
    #[arg(long, global = true)]
    h_origin: Option<f64>,
    #[arg(long, global = true)]
    r_max: Option<f64>,
    /// diagonal-switch, original or regularized.
    #[arg(long, global = true)]
    mode: Option<String>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true)]
    band_width: Option<f64>,
    #[arg(long, global = true)]
    negative_energy_margin: Option<f64>,
    #[arg(long, global = true)]
    max_crossings: Option<usize>,
    #[arg(long, global = true)]
    max_steps: Option<usize>,
}

fn set<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

fn build(cli: Cli) -> Result<RunConfig, CliError> {
    let o = cli.opts;
    let mut cfg = match &o.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::new(cli.command.into(), o.p.ok_or_else(|| CliError::Usage("--p is required without --config".into()))?),
    };
    cfg.command = cli.command.into();
    let pc = &mut cfg.params;
    if let Some(p) = o.p {
        pc.p = p;
    }
    if let Some(m) = o.mass {
        pc.mass = m;
    }
    set(&mut pc.omega, o.omega);
    set(&mut pc.omega_factor, o.omega_factor);
    set(&mut pc.omega_ref_p, o.omega_ref_p);
    set(&mut pc.e1, o.e1);
    let c = &mut cfg.controls;
    set(&mut c.h_init, o.h_init);
    set(&mut c.tol_rel, o.tol_rel);
    set(&mut c.tol_abs, o.tol_abs);
    set(&mut c.delta_diag, o.delta_diag);
    set(&mut c.tol_origin, o.tol_origin);
    set(&mut c.h_origin, o.h_origin);
    set(&mut c.r_max, o.r_max);
    set(&mut c.mode, o.mode);
    set(&mut c.eps, o.eps);
    set(&mut c.band_width, o.band_width);
    set(&mut c.negative_energy_margin, o.negative_energy_margin);
    set(&mut c.max_crossings, o.max_crossings);
    set(&mut c.max_steps, o.max_steps);
    set(&mut cfg.q_cone, o.q_cone);
    set(&mut cfg.x, o.x);
    cfg.x_in_e0 |= o.x_in_e0;
    set(&mut cfg.k, o.k);
    set(&mut cfg.x_tol, o.x_tol);
    set(&mut cfg.p_list, o.p_list);
    set(&mut cfg.x_grid, o.x_grid);
    set(&mut cfg.eps_grid, o.eps_grid);
    set(&mut cfg.threads, o.threads);
    set(&mut cfg.output_dir, o.output_dir);
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = build(cli).and_then(|cfg| execute(&cfg));
    match result {
        Ok(rec) => {
            println!("{}", serde_json::to_string_pretty(&rec.summary).expect("summary serializes"));
            if rec.exit_code != 0 {
                eprintln!("fracbag: finished with failures (exit {})", rec.exit_code);
            }
            ExitCode::from(rec.exit_code as u8)
        }
        Err(e) => {
            eprintln!("fracbag: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

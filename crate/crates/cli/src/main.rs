use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use decolab_cli::commands;
use decolab_cli::config::{RunConfig, KEYS};
use decolab_cli::error::{CliError, CliResult};

/// Exact-decoherence measurement model: scans, figure data and verification.
#[derive(Debug, Parser)]
#[command(name = "decolab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (directory for `figures`); stdout when omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Start from a bundled figure configuration (fig2 ... fig7c)
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Agreement tolerance for closed form vs quadrature
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol: f64,
    #[command(flatten)]
    keys: KeyFlags,
}

/// Per-key overrides, applied after the preset and the config file.
#[derive(Debug, Args)]
struct KeyFlags {
    /// qubit or oscillator
    #[arg(long, global = true)]
    system: Option<String>,
    /// Reduced Planck constant
    #[arg(long, global = true)]
    hbar: Option<String>,
    /// Probe coupling strength α
    #[arg(long, global = true)]
    alpha: Option<String>,
    /// Pulse amplitude g₀
    #[arg(long, global = true)]
    g0: Option<String>,
    /// Pointer coupling λ
    #[arg(long, global = true, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// Probe momentum half-width κ₀
    #[arg(long, global = true)]
    kappa0: Option<String>,
    /// Pointer momentum half-width b₀
    #[arg(long, global = true)]
    b0: Option<String>,
    /// Oscillator frequency ω
    #[arg(long, global = true)]
    omega: Option<String>,
    /// First system level
    #[arg(long, global = true)]
    k: Option<String>,
    /// Second system level
    #[arg(long, global = true)]
    l: Option<String>,
    /// Pointer position b
    #[arg(long, global = true, allow_hyphen_values = true)]
    b: Option<String>,
    /// Pointer position b′
    #[arg(long = "b-prime", global = true, allow_hyphen_values = true)]
    b_prime: Option<String>,
    /// Smallest pulse duration
    #[arg(long = "tau-min", global = true)]
    tau_min: Option<String>,
    /// Largest pulse duration
    #[arg(long = "tau-max", global = true)]
    tau_max: Option<String>,
    /// Number of pulse durations
    #[arg(long = "tau-steps", global = true)]
    tau_steps: Option<String>,
    /// Hold lambda or beta fixed across the scan
    #[arg(long, global = true)]
    fix: Option<String>,
    /// β when fix = beta
    #[arg(long, global = true)]
    beta: Option<String>,
    /// Quadrature absolute tolerance
    #[arg(long = "abs-tol", global = true)]
    abs_tol: Option<String>,
    /// Quadrature relative tolerance
    #[arg(long = "rel-tol", global = true)]
    rel_tol: Option<String>,
    /// Seed for sampled check points
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Oscillator levels in densities and reduced states
    #[arg(long, global = true)]
    levels: Option<String>,
    /// Momentum samples per density
    #[arg(long = "s-points", global = true)]
    s_points: Option<String>,
}

impl KeyFlags {
    fn values(&self) -> [&Option<String>; 22] {
        [
            &self.system,
            &self.hbar,
            &self.alpha,
            &self.g0,
            &self.lambda,
            &self.kappa0,
            &self.b0,
            &self.omega,
            &self.k,
            &self.l,
            &self.b,
            &self.b_prime,
            &self.tau_min,
            &self.tau_max,
            &self.tau_steps,
            &self.fix,
            &self.beta,
            &self.abs_tol,
            &self.rel_tol,
            &self.seed,
            &self.levels,
            &self.s_points,
        ]
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decoherence and orthogonality times
    Timescales,
    /// I_kl over the tau grid, closed form next to quadrature
    DecoScan,
    /// S_kl over the tau grid with the active closed-form branch
    OrthScan,
    /// Pointer-momentum densities at the orthogonality time
    Density {
        /// Compare against the grid-Fourier evaluation instead
        #[arg(long)]
        oracle: bool,
    },
    /// Run the oracle and invariant groups
    Verify,
    /// Write every bundled figure dataset into the --out directory
    Figures,
}

fn resolve(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.preset {
        Some(p) => RunConfig::preset(p)?,
        None => RunConfig::default(),
    };
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for (key, value) in KEYS.iter().zip(cli.keys.values()) {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    if !(cli.tol.is_finite() && cli.tol > 0.0) {
        return Err(CliError::Validation("`tol` must be positive".into()));
    }
    Ok(cfg)
}

fn with_sink(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> CliResult<()>) -> CliResult<()> {
    match out {
        Some(path) => {
            let mut file = io::BufWriter::new(fs::File::create(path)?);
            let r = f(&mut file);
            file.flush()?;
            r
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)
        }
    }
}

type Job = fn(&RunConfig, f64, &mut dyn Write) -> CliResult<()>;

fn figures(cli: &Cli) -> CliResult<()> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("figures"));
    fs::create_dir_all(&dir)?;
    let jobs: [(&str, Job); 10] = [
        ("fig2", commands::deco_scan),
        ("fig3", commands::orth_scan),
        ("fig4", commands::deco_scan),
        ("fig5", commands::orth_scan),
        ("fig6a", |c, _, o| commands::density(c, o)),
        ("fig6b", |c, _, o| commands::density(c, o)),
        ("fig6c", |c, _, o| commands::density(c, o)),
        ("fig7a", |c, _, o| commands::density(c, o)),
        ("fig7b", |c, _, o| commands::density(c, o)),
        ("fig7c", |c, _, o| commands::density(c, o)),
    ];
    let mut first_err = None;
    for (name, job) in jobs {
        let cfg = RunConfig::preset(name)?;
        let path = dir.join(format!("{name}.csv"));
        let r = with_sink(Some(&path), |o| job(&cfg, cli.tol, o));
        match &r {
            Ok(()) => println!("{}", path.display()),
            Err(e) => eprintln!("{}: {e}", path.display()),
        }
        if let Err(e) = r {
            first_err.get_or_insert(e);
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Ok(n) = std::env::var("DECOLAB_THREADS") {
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(format!("DECOLAB_THREADS must be a positive integer, got `{n}`")))?;
        // fails only if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    if let Command::Figures = cli.command {
        if cli.preset.is_some() || cli.config.is_some() {
            return Err(CliError::Validation(
                "figures uses the bundled presets; drop --preset/--config".into(),
            ));
        }
        return figures(cli);
    }
    let cfg = resolve(cli)?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Timescales => with_sink(out, |o| commands::timescales(&cfg, o)),
        Command::DecoScan => with_sink(out, |o| commands::deco_scan(&cfg, cli.tol, o)),
        Command::OrthScan => with_sink(out, |o| commands::orth_scan(&cfg, cli.tol, o)),
        Command::Density { oracle: false } => with_sink(out, |o| commands::density(&cfg, o)),
        Command::Density { oracle: true } => with_sink(out, |o| commands::density_oracle(&cfg, o)),
        Command::Verify => with_sink(out, |o| commands::verify(&cfg, cli.tol, o)),
        Command::Figures => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("decolab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

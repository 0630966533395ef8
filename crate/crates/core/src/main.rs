use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ris_idd::config::{dbm_to_linear, linear_to_db, Profile, RisMode, SystemConfig};
use ris_idd::deployment::{deployment_curve, DirectModel, SisoScenario};
use ris_idd::harness::{emit_csv, reproduce_row, run_sweep, sidecar_path, write_csv, Scheme, SweepMeta, SweepSpec, SweepVariable};
use ris_idd::ldpc::{construct_code, ParityCheck};

#[derive(Parser)]
#[command(name = "ris-idd", version, about = "RIS-assisted multiuser uplink IDD simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo sweep of one parameter; writes CSV plus a metadata sidecar.
    Sweep(SweepArgs),
    /// Closed-form SISO SNR versus RIS position, as (d, SNR_dB) CSV.
    DeployAnalytic(DeployArgs),
    /// Runs the oracle checks.
    Selftest,
    /// Regenerates one row of an earlier sweep from its metadata sidecar.
    Reproduce(ReproduceArgs),
    /// Writes the parity-check matrix of a constructed code.
    ExportCode(ExportArgs),
    /// Loads a parity-check matrix and prints its properties.
    InspectCode {
        path: PathBuf,
    },
}

/// Base configuration: profile, then config file, then per-field flags.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long, default_value = "desk")]
    profile: Profile,
    /// TOML file whose keys override the profile.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    antennas: Option<usize>,
    #[arg(long)]
    elements: Option<usize>,
    #[arg(long = "ris_mode")]
    ris_mode: Option<RisMode>,
    #[arg(long = "sigma_s2_dbm", allow_hyphen_values = true)]
    sigma_s2_dbm: Option<f64>,
    #[arg(long = "sigma_v2_dbm", allow_hyphen_values = true)]
    sigma_v2_dbm: Option<f64>,
    #[arg(long = "pt_per_user_dbm", allow_hyphen_values = true)]
    pt_per_user_dbm: Option<f64>,
    #[arg(long = "ldpc_n")]
    ldpc_n: Option<usize>,
    #[arg(long = "ldpc_rate")]
    ldpc_rate: Option<f64>,
    #[arg(long = "max_inner")]
    max_inner: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "n_alt")]
    n_alt: Option<usize>,
    #[arg(long = "ris_x", allow_hyphen_values = true)]
    ris_x: Option<f64>,
    #[arg(long = "ris_y", allow_hyphen_values = true)]
    ris_y: Option<f64>,
    #[arg(long)]
    span: Option<f64>,
    #[arg(long = "user_radius")]
    user_radius: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<SystemConfig> {
        let mut c = self.profile.config();
        if let Some(path) = &self.config {
            c = c.overlay_file(path)?;
        }
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() { c.$field = v; })*
            };
        }
        set!(
            users, antennas, elements, ris_mode, sigma_s2_dbm, sigma_v2_dbm, pt_per_user_dbm, ldpc_n, ldpc_rate,
            max_inner, frames, seed, n_alt, ris_x, ris_y, span, user_radius
        );
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    variable: SweepVariable,
    /// Comma-separated, strictly increasing.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    values: Vec<f64>,
    #[arg(long)]
    scheme: Scheme,
    /// Comma-separated IDD depths; ignored by linear schemes.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    tau: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct DeployArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    mode: RisMode,
    /// Grid spacing in metres.
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    /// Use the weak model for the direct AP-user term.
    #[arg(long)]
    weak_direct: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Metadata sidecar written next to the sweep CSV.
    #[arg(long)]
    meta: PathBuf,
    #[arg(long)]
    config_hash: String,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long, default_value_t = 512)]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    rate: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let base = args.config.resolve()?;
    if let Some(mode) = args.config.ris_mode {
        if mode != args.scheme.mode() {
            bail!("--ris_mode {mode} contradicts --scheme {}", args.scheme);
        }
    }
    let spec = SweepSpec {
        variable: args.variable,
        values: args.values.clone(),
        base,
        scheme: args.scheme,
        taus: args.tau.clone(),
    };
    let threads = args.threads.unwrap_or_else(default_threads);
    let (rows, meta) = run_sweep(&spec, threads)?;
    emit_csv(&rows, &args.out)?;
    let sidecar = sidecar_path(&args.out);
    meta.save(&sidecar)?;
    eprintln!(
        "wrote {} rows to {} (metadata {})",
        rows.len(),
        args.out.display(),
        sidecar.display()
    );
    Ok(())
}

fn deploy(args: &DeployArgs) -> Result<()> {
    let c = args.config.resolve()?;
    let mut sc = SisoScenario::new(
        c.span,
        c.elements,
        dbm_to_linear(c.pt_per_user_dbm),
        dbm_to_linear(c.sigma_s2_dbm),
        dbm_to_linear(c.sigma_v2_dbm),
    )?;
    if args.weak_direct {
        sc.direct_model = DirectModel::Weak;
    }
    if !(args.step > 0.0) {
        bail!("--step must be positive");
    }
    let last = c.span - ris_idd::config::D_MIN;
    let count = ((last - ris_idd::config::D_MIN) / args.step).floor() as usize;
    let grid: Vec<f64> = (0..=count).map(|i| ris_idd::config::D_MIN + i as f64 * args.step).collect();
    let curve = deployment_curve(args.mode, &sc, &grid)?;

    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    w.write_record(["d", "snr_db"])?;
    for (d, snr) in &curve.points {
        w.write_record([format!("{d:.16e}"), format!("{:.16e}", linear_to_db(*snr))])?;
    }
    w.flush()?;
    Ok(())
}

fn reproduce(args: &ReproduceArgs) -> Result<()> {
    let meta = SweepMeta::load(&args.meta)?;
    let point = meta
        .find(&args.config_hash)
        .with_context(|| format!("no point with config hash {} in {}", args.config_hash, args.meta.display()))?;
    let row = reproduce_row(&meta, point, args.threads)?;
    write_csv(&[row], std::io::stdout().lock())?;
    Ok(())
}

fn inspect(path: &PathBuf) -> Result<()> {
    let code = ParityCheck::load(path)?;
    println!("n = {}", code.n());
    println!("checks = {}", code.checks());
    println!("rank = {}", code.rank());
    println!("k_info = {}", code.k_info());
    println!("edges = {}", code.edges());
    match code.regular_weights() {
        Some((dv, dc)) => println!("regular ({dv},{dc})"),
        None => println!("irregular"),
    }
    println!("four-cycle free = {}", !code.has_four_cycle());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Sweep(a) => sweep(a)?,
        Command::DeployAnalytic(a) => deploy(a)?,
        Command::Selftest => {
            let outcomes = ris_idd::selftest::run_all();
            for o in &outcomes {
                println!("{}", o.line());
            }
            return Ok(outcomes.iter().all(|o| o.passed));
        }
        Command::Reproduce(a) => reproduce(a)?,
        Command::ExportCode(a) => {
            let code = construct_code(a.n, a.rate, a.seed)?;
            code.save(&a.out)?;
        }
        Command::InspectCode { path } => inspect(path)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

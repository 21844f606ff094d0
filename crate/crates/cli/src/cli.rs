//! Argument parsing and command dispatch.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use trapgen_core::fock::QubitConfig;
use trapgen_core::protocol::initialize_two_photon_from;
use trapgen_core::tavis_cummings::TavisCummings;
use trapgen_core::{
    canonical_state, node_time, run_conditional_blocks, run_trajectories, spectrum, BlockDensity, Canonical,
    ConditionalOperator, ProtocolConfig, PureState, TrajectoryConfig, YieldMode, DEFAULT_CLUSTER_TOL, DEFAULT_UNIT_TOL,
};

use crate::figure2::{figure2, DEFAULT_REPS};
use crate::table::{write_text, Format, Table};
use crate::theta::theta_arg;
use crate::verify::run_suite;

#[derive(Debug, Parser)]
#[command(name = "trapgen", version, about = "Conditional photon-monitoring protocols on emitters in a shared cavity")]
pub struct Cli {
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, env = "TRAPGEN_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues of a conditional measurement operator ⟨p_out|U|p_in⟩.
    Spectrum(SpectrumArgs),
    /// Exact conditional protocol: P, F and yield per repetition.
    Protocol(ProtocolArgs),
    /// Monte Carlo trajectories with restarts.
    Trajectories(TrajectoryArgs),
    /// Two-photon monitoring toward the emitter vacuum.
    Initialize(InitializeArgs),
    /// Fidelity and yield curves for n = 3, 6, 9 as SVG and CSV.
    Figure2(Figure2Args),
    /// Analytic-vs-numeric checks; exits 1 on any breach.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to the output file extension, then to the command's usual format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=12))]
    pub n: u32,
    /// Evolution time γτ, e.g. "pi/sqrt(10)".
    #[arg(long, value_parser = theta_arg)]
    pub theta: f64,
    #[arg(long, default_value_t = 1)]
    pub p_in: usize,
    /// Defaults to p_in.
    #[arg(long)]
    pub p_out: Option<usize>,
    /// Restrict to these input excitation counts (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub excitations: Option<Vec<usize>>,
    #[arg(long, default_value_t = DEFAULT_CLUSTER_TOL)]
    pub cluster_tol: f64,
    #[arg(long, default_value_t = DEFAULT_UNIT_TOL)]
    pub unit_tol: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum YieldArg {
    AsPrinted,
    PerStep,
}

impl From<YieldArg> for YieldMode {
    fn from(y: YieldArg) -> Self {
        match y {
            YieldArg::AsPrinted => YieldMode::AsPrinted,
            YieldArg::PerStep => YieldMode::PerStep,
        }
    }
}

#[derive(Debug, Args)]
pub struct ProtocolArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=24))]
    pub n: u32,
    #[arg(long, value_parser = theta_arg)]
    pub theta: f64,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    /// Photon number injected and required back each round.
    #[arg(long, default_value_t = 1)]
    pub monitor: usize,
    /// w1, w2, phi, vacuum, singlet, singlet:I,J or a ket such as 100.
    #[arg(long, default_value = "w1")]
    pub target: String,
    /// Same forms as --target plus "mixed"; defaults to the first emitter excited.
    #[arg(long)]
    pub initial: Option<String>,
    #[arg(long = "yield", value_enum, default_value = "as-printed")]
    pub yield_mode: YieldArg,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Attempts per trajectory before it is abandoned.
    #[arg(long, default_value_t = 1_000_000)]
    pub max_attempts: u64,
}

#[derive(Debug, Args)]
pub struct InitializeArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=24))]
    pub n: u32,
    /// Defaults to the node 2π/√(4n-2), where the vacuum is preserved.
    #[arg(long, value_parser = theta_arg)]
    pub theta: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value = "mixed")]
    pub initial: String,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct Figure2Args {
    #[arg(long, default_value_t = DEFAULT_REPS)]
    pub reps: usize,
    /// File stem for the .svg and .csv written into --out-dir.
    #[arg(long, default_value = "figure2")]
    pub stem: String,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Trajectories for the Monte Carlo check.
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
}

/// Initial or target state named on the command line.
pub enum StateSpec {
    Pure(PureState),
    Mixed,
}

pub fn parse_state(desc: &str, n: usize) -> Result<StateSpec> {
    let lower = desc.trim().to_ascii_lowercase();
    let canonical = |kind| canonical_state(kind, n).map(StateSpec::Pure).map_err(anyhow::Error::from);
    match lower.as_str() {
        "mixed" => return Ok(StateSpec::Mixed),
        "w1" => return canonical(Canonical::W1),
        "w2" => return canonical(Canonical::W2),
        "phi" => return canonical(Canonical::Phi),
        "vacuum" => return canonical(Canonical::Computational(0)),
        "singlet" => return canonical(Canonical::Singlet(0, 1)),
        _ => {}
    }
    if let Some(pair) = lower.strip_prefix("singlet:") {
        let (i, j) = pair.split_once(',').with_context(|| format!("expected singlet:I,J, got {desc:?}"))?;
        return canonical(Canonical::Singlet(i.trim().parse()?, j.trim().parse()?));
    }
    let ket = lower.strip_prefix("ket:").unwrap_or(&lower);
    let config = QubitConfig::from_ket(ket).with_context(|| format!("unknown state {desc:?}"))?;
    if config.n() != n {
        bail!("ket {desc:?} has {} emitters, expected {n}", config.n());
    }
    canonical(Canonical::Computational(config.mask()))
}

fn initial_density(desc: &str, n: usize) -> Result<BlockDensity> {
    Ok(match parse_state(desc, n)? {
        StateSpec::Mixed => BlockDensity::maximally_mixed(n)?,
        StateSpec::Pure(state) => BlockDensity::from_pure(&state)?,
    })
}

fn first_excited(n: usize) -> String {
    std::iter::once('1').chain(std::iter::repeat_n('0', n - 1)).collect()
}

impl ProtocolArgs {
    fn prepare(&self) -> Result<(BlockDensity, PureState, ProtocolConfig)> {
        let n = self.n as usize;
        let initial_desc = self.initial.clone().unwrap_or_else(|| first_excited(n));
        let initial = initial_density(&initial_desc, n)?;
        let StateSpec::Pure(target) = parse_state(&self.target, n)? else {
            bail!("target must be a pure state");
        };
        let cfg = ProtocolConfig::new(n, self.theta, self.reps, self.monitor)
            .labels(initial_desc, self.target.clone())
            .yield_mode(self.yield_mode.into());
        Ok((initial, target, cfg))
    }
}

/// Parses `args` (program name first) and runs the command. Returns the exit
/// status: 0 success, 1 numerical/I-O failure or verification breach, 2 bad
/// arguments.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return code;
        }
    };
    match dispatch(&cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            1
        }
    }
}

fn resolve(out_dir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        out_dir.join(path)
    }
}

fn emit(
    cli: &Cli,
    table: &dyn Table,
    output: &Output,
    default: Format,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<()> {
    let format = output.format.or_else(|| output.out.as_deref().and_then(Format::from_path)).unwrap_or(default);
    let text = table.render(format)?;
    match &output.out {
        Some(path) => {
            let path = resolve(&cli.out_dir, path);
            write_text(&path, &text)?;
            writeln!(stderr, "wrote {}", path.display())?;
        }
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Spectrum(a) => {
            let n = a.n as usize;
            let tc = TavisCummings::new(n)?;
            let inputs = a.excitations.clone().unwrap_or_else(|| (0..=n).collect());
            let op = ConditionalOperator::build(&tc, a.p_in, a.p_out.unwrap_or(a.p_in), a.theta, inputs)?;
            let report = spectrum(&op, a.cluster_tol, a.unit_tol)?;
            emit(cli, &report, &a.output, Format::Json, stdout, stderr)?;
        }
        Command::Protocol(a) => {
            let (initial, target, cfg) = a.prepare()?;
            let trace = run_conditional_blocks(&initial, &target, &cfg)?;
            if let Some(at) = trace.extinct_at {
                writeln!(stderr, "warning: success branch numerically extinct at N={at}")?;
            }
            emit(cli, &trace, &a.output, Format::Csv, stdout, stderr)?;
        }
        Command::Trajectories(a) => {
            let (initial, _, cfg) = a.protocol.prepare()?;
            let mut tcfg = TrajectoryConfig::new(cfg, a.samples, a.seed);
            tcfg.max_attempts = a.max_attempts;
            let stats = run_trajectories(&initial, &tcfg)?;
            emit(cli, &stats, &a.protocol.output, Format::Json, stdout, stderr)?;
        }
        Command::Initialize(a) => {
            let n = a.n as usize;
            let theta = match a.theta {
                Some(t) => t,
                None => node_time(n, 2)?,
            };
            let initial = initial_density(&a.initial, n)?;
            let trace = initialize_two_photon_from(&initial, theta, a.reps, &a.initial)?;
            emit(cli, &trace, &a.output, Format::Csv, stdout, stderr)?;
        }
        Command::Figure2(a) => {
            let fig = figure2(a.reps)?;
            let (svg, csv) = fig.write(&cli.out_dir, &a.stem)?;
            writeln!(stderr, "wrote {}", svg.display())?;
            writeln!(stderr, "wrote {}", csv.display())?;
        }
        Command::Verify(a) => {
            let checks = run_suite(a.samples)?;
            let failed = checks.iter().filter(|c| !c.passed()).count();
            for c in &checks {
                writeln!(stdout, "{c}")?;
            }
            writeln!(stdout, "{} checks, {failed} failed", checks.len())?;
            return Ok(if failed == 0 { 0 } else { 1 });
        }
    }
    Ok(0)
}

//! `mts` command-line interface.
//!
//! Exit codes: 0 success, 1 cross-test inconsistency, 2 usage or unmet
//! precondition, 3 I/O or an unreadable or invalid file, 4 descent did not
//! terminate.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mts_core::descent::{descend, probe_problem, probe_random, DescentOutcome, HuntConfig};
use mts_core::extremality::certify;
use mts_core::margstates::{mix, sample_mts, state_tau, SampleMethod, StateElement};
use mts_core::random::{haar_unitary, random_weights};
use mts_core::schmidt::{is_maximally_entangled, pure_mts_from_unitary, schmidt_decompose, vec_distance};
use mts_core::{Tolerances, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::files::{FileError, Metadata, StateFile};
use crate::parallel::{hunt_parallel, HuntError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INCONSISTENT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NO_TERMINATION: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "mts", version, about = "Marginal tracial states: generate, certify, descend, hunt")]
pub struct Cli {
    #[command(flatten)]
    pub tolerances: TolArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct TolArgs {
    /// Residual tolerance for marginality and purity checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Relative eigenvalue cutoff for ranks and range projections.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub rank_tol: f64,
    /// Principal cosines at least `1 - angle_tol` count as intersections.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub angle_tol: f64,
    /// Relative singular-value cutoff for the block-form kernel.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub null_tol: f64,
}

impl TolArgs {
    fn tolerances(self) -> Result<Tolerances, CliError> {
        let t = Tolerances {
            tol: self.tol,
            rank_tol: self.rank_tol,
            angle_tol: self.angle_tol,
            null_tol: self.null_tol,
        };
        let ok = [t.tol, t.rank_tol, t.angle_tol, t.null_tol]
            .iter()
            .all(|x| x.is_finite() && *x > 0.0 && *x < 1.0);
        if !ok {
            return Err(CliError::Usage("tolerances must lie in (0, 1)".into()));
        }
        Ok(t)
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a state file.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Certify a state and print its certificate.
    Check {
        state: PathBuf,
        /// Also write the certificate here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Descend from a state to an extreme point.
    Descend {
        state: PathBuf,
        /// Terminal state (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Step-by-step trace with the terminal certificate.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Defaults to n².
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Sample, descend and certify many states in parallel.
    Hunt {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; defaults to MTS_JOBS, then the available parallelism.
        #[arg(long, env = "MTS_JOBS")]
        jobs: Option<usize>,
        /// Report file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Random states probed per non-pure candidate.
        #[arg(long, default_value_t = 1000)]
        probe_samples: usize,
        /// Defaults to n².
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Schmidt decomposition of a vector file.
    Schmidt { vector: PathBuf },
    /// Trace norm of the (I - (P-Q)^2) projection of states supported on an extreme point's range.
    Probe {
        /// Extreme state `h0`.
        h0: PathBuf,
        /// State supported on the range of `h0`; random states are probed when omitted.
        k: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand, Debug)]
pub enum GenCommand {
    /// The tracial state h = I.
    Tau {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pure marginal tracial state from a Haar unitary.
    Pure {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the maximally entangled vector.
        #[arg(long)]
        vector_out: Option<PathBuf>,
    },
    /// Convex combination of state files, or of random pure states.
    Mix {
        /// Input state files; when absent, `--components` random pure states are mixed.
        #[arg(long, num_args = 1..)]
        inputs: Vec<PathBuf>,
        /// Comma-separated weights (random when omitted).
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        components: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random marginal tracial state.
    Sample {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "mixture")]
        method: SampleMethod,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    File(#[from] FileError),
    #[error(transparent)]
    Core(#[from] mts_core::Error),
    #[error(transparent)]
    Hunt(#[from] HuntError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Hunt(_) => EXIT_USAGE,
            CliError::Core(mts_core::Error::Inconsistent(_)) => EXIT_INCONSISTENT,
            CliError::Core(_) => EXIT_USAGE,
            CliError::File(_) | CliError::Io(_) => EXIT_IO,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("mts: {e}");
            e.exit_code()
        }
    }
}

fn emit(file: &StateFile, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => file.write(path)?,
        None => std::io::stdout().write_all(file.to_json()?.as_bytes())?,
    }
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(FileError::from)?;
    s.push('\n');
    std::io::stdout().write_all(s.as_bytes())?;
    Ok(())
}

fn require_n(n: usize) -> Result<(), CliError> {
    if n < 2 {
        return Err(CliError::Usage("--n must be at least 2".into()));
    }
    Ok(())
}

fn load_state(path: &Path, tols: &Tolerances) -> Result<(StateElement, Metadata), CliError> {
    let file = StateFile::read(path)?;
    let state = file.to_state(tols.rank_tol)?;
    Ok((state, file.metadata))
}

pub fn execute(cli: Cli) -> Result<i32, CliError> {
    let tols = cli.tolerances.tolerances()?;
    match cli.command {
        Command::Gen(g) => gen(g, &tols),
        Command::Check { state, out } => {
            let (h, meta) = load_state(&state, &tols)?;
            let cert = certify(&h, &tols);
            let mut md = Metadata::new("mts check").with_tolerances(tols);
            md.seed = meta.seed;
            let file = StateFile::from_certificate(&cert, md)?;
            if let Some(path) = &out {
                file.write(path)?;
            }
            emit(&file, None)?;
            for issue in &cert.inconsistencies {
                eprintln!("mts: inconsistency: {issue}");
            }
            Ok(if cert.is_consistent() { EXIT_OK } else { EXIT_INCONSISTENT })
        }
        Command::Descend { state, out, trace, max_steps } => {
            let (h, meta) = load_state(&state, &tols)?;
            let steps = max_steps.unwrap_or(h.n() * h.n());
            let mut t = descend(&h, &tols, steps)?;
            t.seed = meta.seed;
            eprintln!(
                "mts: descend: {} step(s), terminal rank {}, outcome {:?}",
                t.steps.len(),
                t.terminal_certificate.rank,
                t.outcome
            );
            let mut md = Metadata::new("mts descend").with_tolerances(tols);
            md.seed = meta.seed;
            if let Some(path) = &trace {
                StateFile::from_trace(&t, md.clone())?.write(path)?;
            }
            emit(&StateFile::from_state(&t.terminal, md), out.as_deref())?;
            Ok(match t.outcome {
                DescentOutcome::Extremal if t.terminal_certificate.is_consistent() => EXIT_OK,
                DescentOutcome::Extremal => EXIT_INCONSISTENT,
                DescentOutcome::MaxSteps | DescentOutcome::Stalled => EXIT_NO_TERMINATION,
            })
        }
        Command::Hunt { n, trials, seed, jobs, out, probe_samples, max_steps } => {
            require_n(n)?;
            if trials == 0 {
                return Err(CliError::Usage("--trials must be at least 1".into()));
            }
            let jobs = jobs.unwrap_or_else(|| {
                std::thread::available_parallelism().map_or(1, |p| p.get())
            });
            if jobs == 0 {
                return Err(CliError::Usage("--jobs must be at least 1".into()));
            }
            let mut config = HuntConfig::new(n, seed, tols);
            config.probe_samples = probe_samples;
            if let Some(s) = max_steps {
                config.max_steps = s;
            }
            let report = hunt_parallel(&config, trials, jobs)?;
            eprintln!(
                "mts: hunt n={n} trials={trials} seed={seed}: {} pure, {} candidate(s) ({} re-verified), {} failure(s), max probe {}",
                report.pure_count,
                report.candidate_count,
                report.reverified_candidate_count,
                report.failure_count,
                report.max_probe.map_or("n/a".to_string(), |p| format!("{p:.6}")),
            );
            // `jobs` is deliberately left out so reports compare byte for byte across thread counts.
            let md = Metadata::new("mts hunt").with_seed(seed).with_tolerances(tols);
            emit(&StateFile::from_report(&report, md)?, out.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Schmidt { vector } => {
            let file = StateFile::read(&vector)?;
            let xi = file.to_vector()?;
            let d = schmidt_decompose(&xi, tols.tol)?;
            #[derive(Serialize)]
            struct Out<'a> {
                n: usize,
                coefficients: &'a [f64],
                left_basis: &'a [Vec<C64>],
                right_basis: &'a [Vec<C64>],
                schmidt_rank: usize,
                maximally_entangled: bool,
                reconstruction_residual: f64,
            }
            print_json(&Out {
                n: d.n,
                coefficients: &d.coefficients,
                left_basis: &d.left_basis,
                right_basis: &d.right_basis,
                schmidt_rank: d.schmidt_rank,
                maximally_entangled: is_maximally_entangled(&xi, tols.tol)?,
                reconstruction_residual: vec_distance(&d.reconstruct(), &xi),
            })?;
            Ok(EXIT_OK)
        }
        Command::Probe { h0, k, samples, seed } => {
            let (h0, _) = load_state(&h0, &tols)?;
            match k {
                Some(k) => {
                    let (k, _) = load_state(&k, &tols)?;
                    print_json(&probe_problem(&h0, &k, &tols)?)?;
                }
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    print_json(&probe_random(&h0, samples, &mut rng, &tols)?)?;
                }
            }
            Ok(EXIT_OK)
        }
    }
}

fn gen(cmd: GenCommand, tols: &Tolerances) -> Result<i32, CliError> {
    match cmd {
        GenCommand::Tau { n, out } => {
            require_n(n)?;
            emit(&StateFile::from_state(&state_tau(n)?, Metadata::new("mts gen tau")), out.as_deref())?;
        }
        GenCommand::Pure { n, seed, out, vector_out } => {
            require_n(n)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (xi, h) = pure_mts_from_unitary(&haar_unitary(&mut rng, n))?;
            let md = Metadata::new("mts gen pure").with_seed(seed);
            if let Some(path) = &vector_out {
                StateFile::from_vector(n, &xi, md.clone()).write(path)?;
            }
            emit(&StateFile::from_state(&h, md), out.as_deref())?;
        }
        GenCommand::Mix { inputs, weights, n, seed, components, out } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let states = if inputs.is_empty() {
                let n = n.ok_or_else(|| CliError::Usage("--n is required without --inputs".into()))?;
                require_n(n)?;
                let k = components.unwrap_or(2);
                if k == 0 {
                    return Err(CliError::Usage("--components must be at least 1".into()));
                }
                (0..k)
                    .map(|_| pure_mts_from_unitary(&haar_unitary(&mut rng, n)).map(|(_, h)| h))
                    .collect::<Result<Vec<_>, _>>()?
            } else {
                inputs
                    .iter()
                    .map(|p| load_state(p, tols).map(|(h, _)| h))
                    .collect::<Result<Vec<_>, _>>()?
            };
            let weights = if weights.is_empty() {
                random_weights(&mut rng, states.len())
            } else {
                weights
            };
            if weights.len() != states.len() {
                return Err(CliError::Usage(format!(
                    "{} weights for {} states",
                    weights.len(),
                    states.len()
                )));
            }
            let h = mix(&states, &weights)?;
            emit(&StateFile::from_state(&h, Metadata::new("mts gen mix").with_seed(seed)), out.as_deref())?;
        }
        GenCommand::Sample { n, seed, method, out } => {
            require_n(n)?;
            let h = sample_mts(n, seed, method)?;
            let md = Metadata::new(format!("mts gen sample --method {}", method.as_str())).with_seed(seed);
            emit(&StateFile::from_state(&h, md), out.as_deref())?;
        }
    }
    Ok(EXIT_OK)
}

//! `maxent-qst`: simulate circuits, reconstruct density matrices from
//! measurement sets, compare states, and sweep random circuits.
//!
//! Exit codes: 0 success, 2 usage or parse error, 3 numerical failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use maxent_qst::maxent_pair::{PairSolver, DEFAULT_DELTA, DEFAULT_LEVELS, DEFAULT_TOL};
use maxent_qst::qmath::{
    fidelity_pure, hermitian_eigen, purity, trace_distance, von_neumann_entropy, DensityMatrix, StateVector,
};
use maxent_qst::reconstruct::{
    reconstruct_complex, reconstruct_real, MeasurementSet, ReconstructConfig, ReconstructError, Reference,
};
use maxent_qst::simulate::{exact_measurements, random_circuit, run, sampled_measurements, Circuit, Measure};
use maxent_qst::Execution;
use serde::Serialize;

const THREADS_VAR: &str = "MAXENT_QST_THREADS";

#[derive(Parser)]
#[command(name = "maxent-qst", version, about = "Pure-state tomography by pairwise maximal entropy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a circuit and write its measurement set.
    Simulate(SimulateArgs),
    /// Reconstruct a density matrix from a measurement set.
    Reconstruct(ReconstructArgs),
    /// Print trace distance, fidelity, entropy and purity as JSON.
    Compare(CompareArgs),
    /// Reconstruct random circuits over a range of sizes and write a CSV.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MeasureKind {
    All,
    Probabilities,
    FirstRow,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Real,
    Complex,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    circuit: PathBuf,
    /// Measurement set output.
    #[arg(long)]
    out: PathBuf,
    /// Sample this many shots per setting instead of exact values.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = MeasureKind::All)]
    measure: MeasureKind,
    /// Reference row for `first-row`: an index or `auto` (largest population).
    #[arg(long, default_value = "0")]
    reference: String,
    /// Also write the state vector.
    #[arg(long)]
    state_out: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    /// Disable the scaling technique.
    #[arg(long)]
    no_scale: bool,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tolerance: f64,
    /// Embedding levels of the pairwise problem. Defaults to 4 when scaled
    /// and to max(N, 4) when unscaled.
    #[arg(long)]
    levels: Option<usize>,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    measurements: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
    /// Convergence trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Reference row for complex mode: an index or `auto`.
    #[arg(long, default_value = "0")]
    reference: String,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Pure target for the fidelity.
    #[arg(long)]
    target_state: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    min_qubits: usize,
    #[arg(long)]
    max_qubits: usize,
    #[arg(long)]
    circuits_per_size: u64,
    #[arg(long)]
    depth: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    shots: Option<u64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(anyhow::Error),
    Numerical(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn numerical(e: ReconstructError) -> Failure {
    match e {
        ReconstructError::InvalidMeasurements(_)
        | ReconstructError::MissingProbabilities
        | ReconstructError::MissingCoherence { .. } => Failure::Usage(e.into()),
        _ => Failure::Numerical(e.into()),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {what} {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {what} {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn parse_reference(s: &str) -> anyhow::Result<Reference> {
    if s == "auto" {
        return Ok(Reference::Auto);
    }
    s.parse()
        .map(Reference::Index)
        .map_err(|_| anyhow!("--reference must be a non-negative index or \"auto\", got \"{s}\""))
}

fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold(0, |best, (k, &x)| if x > p[best] { k } else { best })
}

impl SolverArgs {
    fn solver(&self, dimension: usize) -> Result<PairSolver, Failure> {
        if !(self.delta > 0.0 && self.delta < 0.1) {
            return Err(anyhow!("--delta must lie in (0, 0.1), got {}", self.delta).into());
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1e-4) {
            return Err(anyhow!("--tolerance must lie in (0, 1e-4), got {}", self.tolerance).into());
        }
        let levels = self
            .levels
            .unwrap_or(if self.no_scale { dimension.max(DEFAULT_LEVELS) } else { DEFAULT_LEVELS });
        if levels < 3 {
            return Err(anyhow!("--levels must be at least 3, got {levels}").into());
        }
        Ok(PairSolver {
            tol: self.tolerance,
            delta: self.delta,
            levels,
            scaled: !self.no_scale,
            ..PairSolver::default()
        })
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let circuit: Circuit = read_json(&args.circuit, "circuit")?;
    let sv = run(&circuit).map_err(|e| anyhow!("invalid circuit {}: {e}", args.circuit.display()))?;
    let which = match args.measure {
        MeasureKind::All => Measure::All,
        MeasureKind::Probabilities => Measure::Probabilities,
        MeasureKind::FirstRow => match parse_reference(&args.reference)? {
            Reference::Auto => Measure::FirstRow(argmax(&sv.probabilities())),
            Reference::Index(r) => Measure::FirstRow(r),
            Reference::First => Measure::FirstRow(0),
        },
    };
    let ms = match args.shots {
        Some(shots) => sampled_measurements(&sv, which, shots, args.seed, Execution::Parallel),
        None => exact_measurements(&sv, which),
    }
    .map_err(anyhow::Error::from)?;
    write_json(&args.out, &ms)?;
    if let Some(path) = &args.state_out {
        write_json(path, &sv)?;
    }
    Ok(())
}

fn cmd_reconstruct(args: &ReconstructArgs) -> Result<(), Failure> {
    let ms: MeasurementSet = read_json(&args.measurements, "measurement set")?;
    let config = ReconstructConfig {
        solver: args.solver.solver(ms.dimension())?,
        reference: parse_reference(&args.reference)?,
        record_trace: args.trace.is_some(),
        execution: Execution::Parallel,
    };
    let rec = match args.mode {
        Mode::Real => reconstruct_real(&ms, &config),
        Mode::Complex => reconstruct_complex(&ms, &config),
    }
    .map_err(numerical)?;
    write_json(&args.out, &rec.rho)?;
    if let Some(path) = &args.trace {
        fs::write(path, rec.trace.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Comparison {
    trace_distance: f64,
    fidelity: Option<f64>,
    entropy: f64,
    purity: f64,
}

/// Dominant eigenvector of `rho` if it is pure to 1e-9.
fn pure_state_of(rho: &DensityMatrix) -> anyhow::Result<Option<StateVector>> {
    if (purity(rho) - 1.0).abs() > 1e-9 {
        return Ok(None);
    }
    let eig = hermitian_eigen(rho.matrix())?;
    let top = rho.dim() - 1;
    let v = (0..rho.dim()).map(|i| eig.vectors.get(i, top)).collect();
    Ok(Some(StateVector::normalized(v)?))
}

fn cmd_compare(args: &CompareArgs) -> Result<(), Failure> {
    let a: DensityMatrix = read_json(&args.a, "density matrix")?;
    let b: DensityMatrix = read_json(&args.b, "density matrix")?;
    if a.dim() != b.dim() {
        return Err(anyhow!("dimension mismatch: {} vs {}", a.dim(), b.dim()).into());
    }
    let fidelity = match &args.target_state {
        Some(path) => {
            let psi: StateVector = read_json(path, "state vector")?;
            Some(fidelity_pure(&psi, &b).map_err(anyhow::Error::from)?)
        }
        None => match pure_state_of(&a)? {
            Some(psi) => Some(fidelity_pure(&psi, &b).map_err(|e| Failure::Numerical(e.into()))?),
            None => match pure_state_of(&b)? {
                Some(psi) => Some(fidelity_pure(&psi, &a).map_err(|e| Failure::Numerical(e.into()))?),
                None => None,
            },
        },
    };
    let out = Comparison {
        trace_distance: trace_distance(&a, &b).map_err(|e| Failure::Numerical(e.into()))?,
        fidelity,
        entropy: von_neumann_entropy(&b).map_err(|e| Failure::Numerical(e.into()))?.bits,
        purity: purity(&b),
    };
    println!("{}", serde_json::to_string(&out).map_err(anyhow::Error::from)?);
    Ok(())
}

/// Seed of circuit `k` at size `n`.
fn circuit_seed(seed: u64, n: usize, k: u64) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(1000 * n as u64 + k)
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    if args.min_qubits < 1 || args.min_qubits > args.max_qubits {
        return Err(anyhow!(
            "need 1 <= --min-qubits <= --max-qubits, got {} and {}",
            args.min_qubits,
            args.max_qubits
        )
        .into());
    }
    if args.max_qubits > maxent_qst::simulate::MAX_QUBITS {
        return Err(anyhow!("--max-qubits is limited to {}", maxent_qst::simulate::MAX_QUBITS).into());
    }
    if args.circuits_per_size == 0 || args.depth == 0 {
        return Err(anyhow!("--circuits-per-size and --depth must be positive").into());
    }
    if args.shots == Some(0) {
        return Err(anyhow!("--shots must be positive").into());
    }
    let mut csv = String::from("n,seed,trace_distance,fidelity,wall_ms,pairs_solved\n");
    for n in args.min_qubits..=args.max_qubits {
        let solver = args.solver.solver(1 << n)?;
        for k in 0..args.circuits_per_size {
            let seed = circuit_seed(args.seed, n, k);
            let start = Instant::now();
            let circuit = random_circuit(n, args.depth, seed).map_err(anyhow::Error::from)?;
            let sv = run(&circuit).map_err(anyhow::Error::from)?;
            let r = argmax(&sv.probabilities());
            let which = Measure::FirstRow(r);
            let ms = match args.shots {
                Some(shots) => sampled_measurements(&sv, which, shots, seed, Execution::Parallel),
                None => exact_measurements(&sv, which),
            }
            .map_err(anyhow::Error::from)?;
            let config = ReconstructConfig {
                solver,
                reference: Reference::Index(r),
                record_trace: false,
                execution: Execution::Parallel,
            };
            let rec = reconstruct_complex(&ms, &config)
                .map_err(|e| Failure::Numerical(anyhow!("n={n} seed={seed}: {e}")))?;
            let td = trace_distance(&DensityMatrix::pure(&sv), &rec.rho).map_err(|e| Failure::Numerical(e.into()))?;
            let fid = fidelity_pure(&sv, &rec.rho).map_err(|e| Failure::Numerical(e.into()))?;
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let _ = writeln!(csv, "{n},{seed},{td:e},{fid},{wall_ms:.3},{}", rec.pairs_solved);
        }
    }
    fs::write(&args.out, csv)
        .with_context(|| format!("writing {}", args.out.display()))
        .map_err(Failure::from)
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| anyhow!("{THREADS_VAR} must be a positive integer, got \"{value}\""))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the worker pool")?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().map_err(Failure::Usage).and_then(|()| match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Sweep(a) => cmd_sweep(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(e) | Failure::Numerical(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}

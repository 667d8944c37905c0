//! Full density-matrix reconstruction from `N` measurements.
//!
//! Entry convention: `x_ij` is the `(i, j)` entry of `rho`, i.e. the
//! expectation of `|j><i|`. For a pure state `x_ij = c_i conj(c_j)`.
//!
//! Real mode takes the `N` populations and fills every coherence modulus
//! from a pairwise solve. Complex mode takes one reference population
//! `x_rr` and the first-row coherences `x_rj`; the remaining populations
//! come from pairwise solves on `(x_rr, x_rj)`, the remaining moduli from
//! pairwise solves on the populations, and the phases are chained through
//! the reference row.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{try_map_ordered, Execution};
use crate::maxent_pair::{wrap_phase, PairError, PairSolver, ZERO_POPULATION};
use crate::qmath::{entropy_from_spectrum, hermitian_eigen, ComplexMatrix, DensityMatrix, LinalgError};

/// Slack of the pairwise positivity guard `|c_ij|^2 <= c_ii c_jj`.
pub const POSITIVITY_TOL: f64 = 1e-6;
/// Allowed deviation of the assembled trace from 1.
pub const ASSEMBLY_TRACE_TOL: f64 = 1e-6;
/// Diagonal drift above this is renormalized away.
pub const RENORMALIZE_DRIFT: f64 = 1e-9;
/// Exact measurement sets must have populations summing to 1 within this.
pub const EXACT_SUM_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructError {
    #[error("invalid measurement set: {0}")]
    InvalidMeasurements(String),
    #[error("measurement set has no populations")]
    MissingProbabilities,
    #[error("missing first-row coherence x_{r}{j}")]
    MissingCoherence { r: usize, j: usize },
    #[error("reference population x_{r}{r} = {population:e} vanishes; choose another reference")]
    ReferenceVanishes { r: usize, population: f64 },
    #[error("pair ({i}, {j}): {source}")]
    Pair {
        i: usize,
        j: usize,
        #[source]
        source: PairError,
    },
    #[error("positivity violated at ({i}, {j}): |c_ij|^2 = {modulus_sq:e} > c_ii c_jj = {bound:e}")]
    Positivity {
        i: usize,
        j: usize,
        modulus_sq: f64,
        bound: f64,
    },
    #[error("assembled trace {trace} deviates from 1")]
    Trace { trace: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Exact,
    Sampled { shots: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceEntry {
    pub i: usize,
    pub j: usize,
    pub re: f64,
    pub im: f64,
}

impl CoherenceEntry {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Populations and coherences of an `N`-level state. Coherences are stored
/// for `i < j` only; `x_ji = conj(x_ij)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasurementSet")]
pub struct MeasurementSet {
    dimension: usize,
    probabilities: Option<Vec<f64>>,
    coherences: Vec<CoherenceEntry>,
    provenance: Provenance,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasurementSet {
    dimension: usize,
    probabilities: Option<Vec<f64>>,
    #[serde(default)]
    coherences: Vec<CoherenceEntry>,
    provenance: Provenance,
}

impl TryFrom<RawMeasurementSet> for MeasurementSet {
    type Error = ReconstructError;

    fn try_from(raw: RawMeasurementSet) -> Result<Self, Self::Error> {
        MeasurementSet::new(raw.dimension, raw.probabilities, raw.coherences, raw.provenance)
    }
}

impl MeasurementSet {
    pub fn new(
        dimension: usize,
        probabilities: Option<Vec<f64>>,
        mut coherences: Vec<CoherenceEntry>,
        provenance: Provenance,
    ) -> Result<Self, ReconstructError> {
        let bad = |m: String| Err(ReconstructError::InvalidMeasurements(m));
        if dimension < 2 {
            return bad(format!("dimension must be at least 2, got {dimension}"));
        }
        if let Some(p) = &probabilities {
            if p.len() != dimension {
                return bad(format!("{} probabilities for dimension {dimension}", p.len()));
            }
            if let Some(k) = p.iter().position(|x| !x.is_finite() || *x < 0.0 || *x > 1.0 + 1e-9) {
                return bad(format!("probability {k} = {} outside [0, 1]", p[k]));
            }
            let sum: f64 = p.iter().sum();
            let tol = match provenance {
                Provenance::Exact => EXACT_SUM_TOL,
                Provenance::Sampled { shots, .. } => 5.0 / (shots.max(1) as f64).sqrt(),
            };
            if (sum - 1.0).abs() > tol {
                return bad(format!("probabilities sum to {sum}, allowed deviation {tol:e}"));
            }
        }
        let mut seen = HashSet::new();
        for c in &coherences {
            if !(c.i < c.j && c.j < dimension) {
                return bad(format!("coherence index ({}, {}) must satisfy i < j < {dimension}", c.i, c.j));
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return bad(format!("non-finite coherence at ({}, {})", c.i, c.j));
            }
            if !seen.insert((c.i, c.j)) {
                return bad(format!("duplicate coherence ({}, {})", c.i, c.j));
            }
        }
        coherences.sort_by_key(|c| (c.i, c.j));
        Ok(Self {
            dimension,
            probabilities,
            coherences,
            provenance,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn probabilities(&self) -> Option<&[f64]> {
        self.probabilities.as_deref()
    }

    /// Sorted by `(i, j)`.
    pub fn coherences(&self) -> &[CoherenceEntry] {
        &self.coherences
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `x_ij` for any `i != j`, if measured.
    pub fn coherence(&self, i: usize, j: usize) -> Option<Complex64> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let k = self
            .coherences
            .binary_search_by_key(&(a, b), |c| (c.i, c.j))
            .ok()?;
        let v = self.coherences[k].value();
        Some(if i < j { v } else { v.conj() })
    }
}

/// Coherence phases chained through a reference row: `p_ij = p_rj - p_ri`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTable {
    reference: usize,
    row: Vec<f64>,
    dont_care: Vec<bool>,
}

impl PhaseTable {
    pub fn reference(&self) -> usize {
        self.reference
    }

    /// Phase of `x_ij`, wrapped to `(-pi, pi]`.
    pub fn phase(&self, i: usize, j: usize) -> f64 {
        wrap_phase(self.row[j] - self.row[i])
    }

    /// Columns whose first-row coherence vanished; their phase is 0 and
    /// irrelevant.
    pub fn is_dont_care(&self, j: usize) -> bool {
        self.dont_care[j]
    }

    pub fn dimension(&self) -> usize {
        self.row.len()
    }
}

/// Phases from the first-row coherences `(j, x_rj)`. Columns not listed, or
/// with `|x_rj|` below the zero threshold, are marked don't-care.
pub fn build_phase_table(first_row: &[(usize, Complex64)], r: usize, dimension: usize) -> PhaseTable {
    let mut row = vec![0.0; dimension];
    let mut dont_care = vec![true; dimension];
    dont_care[r] = false;
    for &(j, x) in first_row {
        if j == r || j >= dimension {
            continue;
        }
        if x.norm() > ZERO_POPULATION {
            row[j] = x.arg();
            dont_care[j] = false;
        }
    }
    PhaseTable {
        reference: r,
        row,
        dont_care,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStep {
    pub step: usize,
    pub entropy: f64,
    pub purity: f64,
    /// Negative eigenvalue mass clamped before the entropy was evaluated.
    pub clamped_mass: f64,
}

/// Entropy and purity after each coherence insertion.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTrace {
    pub steps: Vec<TraceStep>,
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `step,entropy,purity` with one row per step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,entropy,purity\n");
        for s in &self.steps {
            let _ = writeln!(out, "{},{:e},{:e}", s.step, s.entropy, s.purity);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reference {
    /// Largest population.
    Auto,
    Index(usize),
    /// Index 0.
    #[default]
    First,
}

impl Reference {
    fn resolve(self, probabilities: Option<&[f64]>, dimension: usize) -> Result<usize, ReconstructError> {
        match self {
            Reference::First => Ok(0),
            Reference::Index(r) if r < dimension => Ok(r),
            Reference::Index(r) => Err(ReconstructError::InvalidMeasurements(format!(
                "reference index {r} out of range for dimension {dimension}"
            ))),
            Reference::Auto => {
                let p = probabilities.ok_or(ReconstructError::MissingProbabilities)?;
                Ok(p
                    .iter()
                    .enumerate()
                    .fold(0, |best, (k, &x)| if x > p[best] { k } else { best }))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructConfig {
    pub solver: PairSolver,
    pub reference: Reference,
    pub record_trace: bool,
    pub execution: Execution,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self {
            solver: PairSolver::default(),
            reference: Reference::First,
            record_trace: true,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub rho: DensityMatrix,
    /// Empty unless `record_trace` was set.
    pub trace: ConvergenceTrace,
    /// Pairwise solves that ran (zero-population short cuts excluded).
    pub pairs_solved: usize,
    /// Pairs answered through the diagonal branch.
    pub degenerate_pairs: usize,
    /// Diagonal sum minus 1 before renormalization (0 if none was needed).
    pub diagonal_adjustment: f64,
    /// Coherences clipped to the pairwise positivity bound.
    pub clipped: usize,
    pub reference: Option<usize>,
}

/// All `(i, j)` with `i < j < n` in lexicographic order.
pub fn lexicographic_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

struct PairModulus {
    modulus: f64,
    solved: bool,
    degenerate: bool,
}

fn solve_moduli(
    diag: &[f64],
    pairs: &[(usize, usize)],
    solver: &PairSolver,
    exec: Execution,
) -> Result<Vec<PairModulus>, ReconstructError> {
    try_map_ordered(pairs, exec, |&(i, j)| {
        let est = solver
            .predict_coherence(diag[i], diag[j])
            .map_err(|source| ReconstructError::Pair { i, j, source })?;
        Ok(PairModulus {
            modulus: est.modulus,
            solved: est.report.is_some(),
            degenerate: est.degenerate,
        })
    })
}

/// Renormalizes `diag` in place when its sum drifts; returns `sum - 1` or 0.
fn renormalize(diag: &mut [f64]) -> f64 {
    let sum: f64 = diag.iter().sum();
    if (sum - 1.0).abs() > RENORMALIZE_DRIFT && sum > 0.0 {
        for x in diag.iter_mut() {
            *x /= sum;
        }
        sum - 1.0
    } else {
        0.0
    }
}

/// Clips coherence moduli to `sqrt(c_ii c_jj)`. Returns the count clipped
/// by more than the positivity slack.
fn clip_to_positivity(diag: &[f64], table: &mut [(usize, usize, Complex64)]) -> usize {
    let mut clipped = 0;
    for (i, j, c) in table.iter_mut() {
        let bound = (diag[*i] * diag[*j]).max(0.0).sqrt();
        let m = c.norm();
        if m > bound {
            if m * m > diag[*i] * diag[*j] + POSITIVITY_TOL {
                clipped += 1;
            }
            *c = if bound > 0.0 { *c * (bound / m) } else { Complex64::new(0.0, 0.0) };
        }
    }
    clipped
}

/// Builds `rho` from a diagonal and a table of `(i, j, c_ij)` with `i < j`,
/// mirroring `c_ji = conj(c_ij)`.
pub fn assemble(diagonal: &[f64], coherences: &[(usize, usize, Complex64)]) -> Result<DensityMatrix, ReconstructError> {
    let n = diagonal.len();
    let trace: f64 = diagonal.iter().sum();
    if !trace.is_finite() || (trace - 1.0).abs() > ASSEMBLY_TRACE_TOL {
        return Err(ReconstructError::Trace { trace });
    }
    let mut m = ComplexMatrix::diagonal(diagonal);
    for &(i, j, c) in coherences {
        if !(i < j && j < n) {
            return Err(ReconstructError::InvalidMeasurements(format!(
                "coherence index ({i}, {j}) must satisfy i < j < {n}"
            )));
        }
        let bound = diagonal[i] * diagonal[j];
        let modulus_sq = c.norm_sqr();
        if modulus_sq > bound + POSITIVITY_TOL {
            return Err(ReconstructError::Positivity { i, j, modulus_sq, bound });
        }
        m.set(i, j, c);
        m.set(j, i, c.conj());
    }
    Ok(DensityMatrix::with_tolerance(m, 0.0, ASSEMBLY_TRACE_TOL)?)
}

/// Entropy and purity of the partial matrices obtained by inserting the
/// coherences one at a time in table order, missing ones held at 0.
pub fn convergence_trace(
    diagonal: &[f64],
    table: &[(usize, usize, Complex64)],
    exec: Execution,
) -> Result<ConvergenceTrace, ReconstructError> {
    let steps: Vec<usize> = (1..=table.len()).collect();
    let diag_purity: f64 = diagonal.iter().map(|x| x * x).sum();
    let out = try_map_ordered(&steps, exec, |&k| {
        let mut m = ComplexMatrix::diagonal(diagonal);
        let mut purity = diag_purity;
        for &(i, j, c) in &table[..k] {
            m.set(i, j, c);
            m.set(j, i, c.conj());
            purity += 2.0 * c.norm_sqr();
        }
        let eig = hermitian_eigen(&m)?;
        let e = entropy_from_spectrum(&eig.values);
        Ok::<_, ReconstructError>(TraceStep {
            step: k,
            entropy: e.bits,
            purity,
            clamped_mass: e.clamped_mass,
        })
    })?;
    Ok(ConvergenceTrace { steps: out })
}

fn finish(
    diag: Vec<f64>,
    mut table: Vec<(usize, usize, Complex64)>,
    config: &ReconstructConfig,
    pairs_solved: usize,
    degenerate_pairs: usize,
    diagonal_adjustment: f64,
    reference: Option<usize>,
) -> Result<Reconstruction, ReconstructError> {
    let clipped = clip_to_positivity(&diag, &mut table);
    table.sort_by_key(|&(i, j, _)| (i, j));
    let rho = assemble(&diag, &table)?;
    let trace = if config.record_trace {
        convergence_trace(&diag, &table, config.execution)?
    } else {
        ConvergenceTrace::default()
    };
    Ok(Reconstruction {
        rho,
        trace,
        pairs_solved,
        degenerate_pairs,
        diagonal_adjustment,
        clipped,
        reference,
    })
}

/// Reconstruction from the `N` populations, assuming a pure target with
/// non-negative real amplitudes.
pub fn reconstruct_real(ms: &MeasurementSet, config: &ReconstructConfig) -> Result<Reconstruction, ReconstructError> {
    let mut diag = ms
        .probabilities()
        .ok_or(ReconstructError::MissingProbabilities)?
        .to_vec();
    let adjustment = renormalize(&mut diag);
    let pairs = lexicographic_pairs(ms.dimension());
    let moduli = solve_moduli(&diag, &pairs, &config.solver, config.execution)?;
    let solved = moduli.iter().filter(|m| m.solved).count();
    let degenerate = moduli.iter().filter(|m| m.degenerate).count();
    let table = pairs
        .iter()
        .zip(&moduli)
        .map(|(&(i, j), m)| (i, j, Complex64::new(m.modulus, 0.0)))
        .collect();
    finish(diag, table, config, solved, degenerate, adjustment, None)
}

/// Reconstruction from the reference population `x_rr` and the first-row
/// coherences `x_rj`.
pub fn reconstruct_complex(ms: &MeasurementSet, config: &ReconstructConfig) -> Result<Reconstruction, ReconstructError> {
    let n = ms.dimension();
    let probs = ms.probabilities().ok_or(ReconstructError::MissingProbabilities)?;
    let r = config.reference.resolve(Some(probs), n)?;
    let x_rr = probs[r];
    if x_rr <= ZERO_POPULATION {
        return Err(ReconstructError::ReferenceVanishes { r, population: x_rr });
    }
    let others: Vec<usize> = (0..n).filter(|&j| j != r).collect();
    let first_row: Vec<(usize, Complex64)> = others
        .iter()
        .map(|&j| {
            ms.coherence(r, j)
                .map(|x| (j, x))
                .ok_or(ReconstructError::MissingCoherence { r, j })
        })
        .collect::<Result<_, _>>()?;

    // Stage 1: populations.
    let solver = config.solver;
    let populations = try_map_ordered(&first_row, config.execution, |&(j, x)| {
        if x.norm() < ZERO_POPULATION {
            return Ok((0.0, false));
        }
        solver
            .predict_population(x_rr, x)
            .map(|p| (p, true))
            .map_err(|source| ReconstructError::Pair { i: r, j, source })
    })?;
    let mut diag = vec![0.0; n];
    diag[r] = x_rr;
    let mut solved = 0;
    for (&(j, _), &(p, s)) in first_row.iter().zip(&populations) {
        diag[j] = p;
        solved += usize::from(s);
    }
    let adjustment = renormalize(&mut diag);

    // Stage 2: moduli off the reference row.
    let pairs: Vec<(usize, usize)> = lexicographic_pairs(n)
        .into_iter()
        .filter(|&(i, j)| i != r && j != r)
        .collect();
    let moduli = solve_moduli(&diag, &pairs, &solver, config.execution)?;
    solved += moduli.iter().filter(|m| m.solved).count();
    let degenerate = moduli.iter().filter(|m| m.degenerate).count();

    // Stage 3: phases.
    let phases = build_phase_table(&first_row, r, n);
    let mut table: Vec<(usize, usize, Complex64)> = first_row
        .iter()
        .map(|&(j, x)| if r < j { (r, j, x) } else { (j, r, x.conj()) })
        .collect();
    table.extend(
        pairs
            .iter()
            .zip(&moduli)
            .map(|(&(i, j), m)| (i, j, Complex64::from_polar(m.modulus, phases.phase(i, j)))),
    );
    finish(diag, table, config, solved, degenerate, adjustment, Some(r))
}

/// Final matrix for an arbitrary pair processing order; used to check that
/// the result does not depend on it.
#[doc(hidden)]
pub fn reconstruct_real_in_order(
    ms: &MeasurementSet,
    solver: &PairSolver,
    order: &[(usize, usize)],
) -> Result<DensityMatrix, ReconstructError> {
    let diag = ms
        .probabilities()
        .ok_or(ReconstructError::MissingProbabilities)?
        .to_vec();
    let moduli = solve_moduli(&diag, order, solver, Execution::Sequential)?;
    let table: BTreeMap<(usize, usize), Complex64> = order
        .iter()
        .zip(&moduli)
        .map(|(&p, m)| (p, Complex64::new(m.modulus, 0.0)))
        .collect();
    let table: Vec<_> = table.into_iter().map(|((i, j), c)| (i, j, c)).collect();
    assemble(&diag, &table)
}

//! Statevector simulator, exact and shot-sampled measurement sets, and the
//! Pauli decomposition of coherence operators.
//!
//! Qubit 0 is the least significant bit of the basis index. Pauli strings
//! are written with qubit `n - 1` first, so `"IX"` acts with `X` on qubit 0.
//!
//! Sampling uses ChaCha8 seeded from the user seed. Stream 0 draws the
//! populations; the Pauli string with base-4 code `k` (`I=0, X=1, Y=2, Z=3`,
//! qubit 0 least significant) draws from stream `k + 1`. Each estimate is
//! therefore independent of which other quantities are requested and of the
//! order in which workers run.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, TAU};

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{map_ordered, Execution};
use crate::qmath::StateVector;
use crate::reconstruct::{CoherenceEntry, MeasurementSet, Provenance};

pub const MAX_QUBITS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulateError {
    #[error("unknown gate \"{0}\"")]
    UnknownGate(String),
    #[error("gate \"{name}\" takes {expected} target(s), got {got}")]
    BadArity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("gate \"{name}\": {problem}")]
    BadAngle { name: String, problem: &'static str },
    #[error("target {target} out of range for {qubits} qubit(s)")]
    TargetOutOfRange { target: usize, qubits: usize },
    #[error("gate \"{0}\" repeats a target qubit")]
    RepeatedTarget(String),
    #[error("qubit count must lie in 1..={MAX_QUBITS}, got {0}")]
    QubitCount(usize),
    #[error("coherence indices ({i}, {j}) must satisfy i < j < {dim}; use the Z-string population decomposition for i = j")]
    BadPair { i: usize, j: usize, dim: usize },
    #[error("shots must be at least 1")]
    NoShots,
    #[error("reference index {r} out of range for dimension {dim}")]
    BadReference { r: usize, dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gate {
    pub name: String,
    pub targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

impl Gate {
    pub fn new(name: &str, targets: &[usize]) -> Self {
        Self {
            name: name.to_string(),
            targets: targets.to_vec(),
            angle: None,
        }
    }

    pub fn rotation(name: &str, target: usize, angle: f64) -> Self {
        Self {
            name: name.to_string(),
            targets: vec![target],
            angle: Some(angle),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Circuit {
    pub qubits: usize,
    #[serde(default)]
    pub gates: Vec<Gate>,
}

type Mat2 = [[Complex64; 2]; 2];

enum Op {
    Single(usize, Mat2),
    Cx(usize, usize),
    Cz(usize, usize),
    Swap(usize, usize),
}

const fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn single_matrix(name: &str, angle: Option<f64>) -> Option<Mat2> {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    let h = FRAC_1_SQRT_2;
    Some(match (name, angle) {
        ("x", None) => [[o, l], [l, o]],
        ("y", None) => [[o, c(0.0, -1.0)], [c(0.0, 1.0), o]],
        ("z", None) => [[l, o], [o, -l]],
        ("h", None) => [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]],
        ("s", None) => [[l, o], [o, c(0.0, 1.0)]],
        ("sdg", None) => [[l, o], [o, c(0.0, -1.0)]],
        ("t", None) => [[l, o], [o, Complex64::from_polar(1.0, FRAC_PI_4)]],
        ("rx", Some(t)) => {
            let (s, co) = (t / 2.0).sin_cos();
            [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
        }
        ("ry", Some(t)) => {
            let (s, co) = (t / 2.0).sin_cos();
            [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
        }
        ("rz", Some(t)) => [
            [Complex64::from_polar(1.0, -t / 2.0), o],
            [o, Complex64::from_polar(1.0, t / 2.0)],
        ],
        _ => return None,
    })
}

fn compile(gate: &Gate, qubits: usize) -> Result<Op, SimulateError> {
    let name = gate.name.as_str();
    let (arity, rotation) = match name {
        "x" | "y" | "z" | "h" | "s" | "sdg" | "t" => (1, false),
        "rx" | "ry" | "rz" => (1, true),
        "cx" | "cz" | "swap" => (2, false),
        _ => return Err(SimulateError::UnknownGate(gate.name.clone())),
    };
    if gate.targets.len() != arity {
        return Err(SimulateError::BadArity {
            name: gate.name.clone(),
            expected: arity,
            got: gate.targets.len(),
        });
    }
    match (rotation, gate.angle) {
        (true, None) => {
            return Err(SimulateError::BadAngle {
                name: gate.name.clone(),
                problem: "rotation needs an angle",
            })
        }
        (true, Some(a)) if !a.is_finite() => {
            return Err(SimulateError::BadAngle {
                name: gate.name.clone(),
                problem: "angle must be finite",
            })
        }
        (false, Some(_)) => {
            return Err(SimulateError::BadAngle {
                name: gate.name.clone(),
                problem: "gate takes no angle",
            })
        }
        _ => {}
    }
    if let Some(&t) = gate.targets.iter().find(|&&t| t >= qubits) {
        return Err(SimulateError::TargetOutOfRange { target: t, qubits });
    }
    if arity == 2 && gate.targets[0] == gate.targets[1] {
        return Err(SimulateError::RepeatedTarget(gate.name.clone()));
    }
    let t = &gate.targets;
    Ok(match name {
        "cx" => Op::Cx(t[0], t[1]),
        "cz" => Op::Cz(t[0], t[1]),
        "swap" => Op::Swap(t[0], t[1]),
        _ => Op::Single(t[0], single_matrix(name, gate.angle).expect("validated gate")),
    })
}

fn apply_single(amps: &mut [Complex64], q: usize, m: &Mat2) {
    let bit = 1 << q;
    for i in 0..amps.len() {
        if i & bit == 0 {
            let (a, b) = (amps[i], amps[i | bit]);
            amps[i] = m[0][0] * a + m[0][1] * b;
            amps[i | bit] = m[1][0] * a + m[1][1] * b;
        }
    }
}

fn apply(amps: &mut [Complex64], op: &Op) {
    match *op {
        Op::Single(q, ref m) => apply_single(amps, q, m),
        Op::Cx(ctrl, tgt) => {
            let (cb, tb) = (1 << ctrl, 1 << tgt);
            for i in 0..amps.len() {
                if i & cb != 0 && i & tb == 0 {
                    amps.swap(i, i | tb);
                }
            }
        }
        Op::Cz(a, b) => {
            let mask = (1 << a) | (1 << b);
            for (i, x) in amps.iter_mut().enumerate() {
                if i & mask == mask {
                    *x = -*x;
                }
            }
        }
        Op::Swap(a, b) => {
            let (ab, bb) = (1 << a, 1 << b);
            for i in 0..amps.len() {
                if i & ab != 0 && i & bb == 0 {
                    amps.swap(i, (i & !ab) | bb);
                }
            }
        }
    }
}

impl Circuit {
    pub fn validate(&self) -> Result<(), SimulateError> {
        if self.qubits == 0 || self.qubits > MAX_QUBITS {
            return Err(SimulateError::QubitCount(self.qubits));
        }
        for g in &self.gates {
            compile(g, self.qubits)?;
        }
        Ok(())
    }
}

/// Applies the gates in order to `|0...0>`.
pub fn run(circuit: &Circuit) -> Result<StateVector, SimulateError> {
    circuit.validate()?;
    let ops = circuit
        .gates
        .iter()
        .map(|g| compile(g, circuit.qubits))
        .collect::<Result<Vec<_>, _>>()?;
    let mut sv = StateVector::basis(circuit.qubits, 0);
    let amps = sv.amplitudes_mut();
    for op in &ops {
        apply(amps, op);
    }
    Ok(sv)
}

/// Which quantities a measurement set carries. Every kind includes the
/// populations, since a single computational-basis setting yields all of
/// them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    All,
    Probabilities,
    /// Populations plus the coherences `x_rj` for all `j != r`.
    FirstRow(usize),
}

impl Measure {
    fn pairs(self, dim: usize) -> Result<Vec<(usize, usize)>, SimulateError> {
        Ok(match self {
            Measure::Probabilities => vec![],
            Measure::All => (0..dim).flat_map(|i| (i + 1..dim).map(move |j| (i, j))).collect(),
            Measure::FirstRow(r) => {
                if r >= dim {
                    return Err(SimulateError::BadReference { r, dim });
                }
                (0..dim)
                    .filter(|&j| j != r)
                    .map(|j| if r < j { (r, j) } else { (j, r) })
                    .collect()
            }
        })
    }
}

/// `x_ii = |c_i|^2`, `x_ij = c_i conj(c_j)`.
pub fn exact_measurements(sv: &StateVector, which: Measure) -> Result<MeasurementSet, SimulateError> {
    let a = sv.amplitudes();
    let coherences = which
        .pairs(a.len())?
        .into_iter()
        .map(|(i, j)| {
            let x = a[i] * a[j].conj();
            CoherenceEntry { i, j, re: x.re, im: x.im }
        })
        .collect();
    Ok(MeasurementSet::new(a.len(), Some(sv.probabilities()), coherences, Provenance::Exact)
        .expect("exact measurements of a normalized state are valid"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PauliTerm {
    pub coefficient: f64,
    /// Qubit `n - 1` first.
    pub string: String,
}

/// Decompositions of `O+ = |i><j| + |j><i|` and `O- = i(|i><j| - |j><i|)`,
/// so that `Re x_ij = <O+>/2` and `Im x_ij = <O->/2`. Each has `2^(n-1)`
/// terms of modulus `2^(1-n)`.
pub fn coherence_observables(i: usize, j: usize, n: usize) -> Result<(Vec<PauliTerm>, Vec<PauliTerm>), SimulateError> {
    let dim = 1usize << n;
    if !(i < j && j < dim) {
        return Err(SimulateError::BadPair { i, j, dim });
    }
    // |i><j| = prod_q |i_q><j_q| with |0><0| = (I+Z)/2, |1><1| = (I-Z)/2,
    // |0><1| = (X+iY)/2, |1><0| = (X-iY)/2.
    let mut terms: Vec<(Complex64, Vec<u8>)> = vec![(c(1.0, 0.0), Vec::with_capacity(n))];
    for q in 0..n {
        let (bi, bj) = ((i >> q) & 1, (j >> q) & 1);
        let factors: [(Complex64, u8); 2] = match (bi, bj) {
            (0, 0) => [(c(0.5, 0.0), b'I'), (c(0.5, 0.0), b'Z')],
            (1, 1) => [(c(0.5, 0.0), b'I'), (c(-0.5, 0.0), b'Z')],
            (0, 1) => [(c(0.5, 0.0), b'X'), (c(0.0, 0.5), b'Y')],
            _ => [(c(0.5, 0.0), b'X'), (c(0.0, -0.5), b'Y')],
        };
        terms = terms
            .into_iter()
            .flat_map(|(a, s)| {
                factors.iter().map(move |&(f, p)| {
                    let mut s = s.clone();
                    s.push(p);
                    (a * f, s)
                })
            })
            .collect();
    }
    let word = |s: &[u8]| s.iter().rev().map(|&b| b as char).collect::<String>();
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (a, s) in terms {
        if a.re != 0.0 {
            plus.push(PauliTerm { coefficient: 2.0 * a.re, string: word(&s) });
        }
        if a.im != 0.0 {
            minus.push(PauliTerm { coefficient: -2.0 * a.im, string: word(&s) });
        }
    }
    Ok((plus, minus))
}

/// Base-4 code of a Pauli string (`I=0, X=1, Y=2, Z=3`, qubit 0 least
/// significant).
fn pauli_code(s: &str) -> u64 {
    s.bytes().fold(0, |acc, b| {
        acc * 4
            + match b {
                b'X' => 1,
                b'Y' => 2,
                b'Z' => 3,
                _ => 0,
            }
    })
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Frequencies of `shots` multinomial draws from `probs`.
fn sample_frequencies(probs: &[f64], shots: u64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let dist = WeightedIndex::new(probs).expect("probabilities of a normalized state");
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..shots {
        counts[dist.sample(rng)] += 1;
    }
    counts.iter().map(|&k| k as f64 / shots as f64).collect()
}

/// Estimates `<P>` by rotating into the eigenbasis of `P`, sampling
/// `shots` bitstrings and averaging the parity over the non-identity qubits.
fn estimate_pauli(sv: &StateVector, string: &str, shots: u64, seed: u64) -> f64 {
    let n = sv.qubit_count();
    let mut amps = sv.amplitudes().to_vec();
    let h = single_matrix("h", None).expect("h");
    let sdg = single_matrix("sdg", None).expect("sdg");
    let mut mask = 0usize;
    for (pos, b) in string.bytes().enumerate() {
        let q = n - 1 - pos;
        match b {
            b'X' => apply_single(&mut amps, q, &h),
            b'Y' => {
                apply_single(&mut amps, q, &sdg);
                apply_single(&mut amps, q, &h);
            }
            _ => {}
        }
        if b != b'I' {
            mask |= 1 << q;
        }
    }
    let probs: Vec<f64> = amps.iter().map(|a| a.norm_sqr()).collect();
    let dist = WeightedIndex::new(&probs).expect("probabilities of a normalized state");
    let mut rng = rng_for(seed, pauli_code(string) + 1);
    let mut total: i64 = 0;
    for _ in 0..shots {
        let k = dist.sample(&mut rng);
        total += if (k & mask).count_ones() & 1 == 0 { 1 } else { -1 };
    }
    total as f64 / shots as f64
}

/// Shot-sampled measurement set. Populations come from `shots` multinomial
/// draws; each coherence is composed from per-Pauli-string estimates, each
/// string measured in its own setting with `shots` repetitions.
pub fn sampled_measurements(
    sv: &StateVector,
    which: Measure,
    shots: u64,
    seed: u64,
    exec: Execution,
) -> Result<MeasurementSet, SimulateError> {
    if shots == 0 {
        return Err(SimulateError::NoShots);
    }
    let n = sv.qubit_count();
    let pairs = which.pairs(sv.dim())?;
    let probabilities = sample_frequencies(&sv.probabilities(), shots, &mut rng_for(seed, 0));
    let decomps = pairs
        .iter()
        .map(|&(i, j)| coherence_observables(i, j, n))
        .collect::<Result<Vec<_>, _>>()?;
    let strings: Vec<String> = decomps
        .iter()
        .flat_map(|(p, m)| p.iter().chain(m))
        .map(|t| t.string.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let estimates = map_ordered(&strings, exec, |s| estimate_pauli(sv, s, shots, seed));
    let lookup = |s: &str| estimates[strings.binary_search_by(|x| x.as_str().cmp(s)).expect("collected")];
    let coherences = pairs
        .iter()
        .zip(&decomps)
        .map(|(&(i, j), (plus, minus))| {
            let re = 0.5 * plus.iter().map(|t| t.coefficient * lookup(&t.string)).sum::<f64>();
            let im = 0.5 * minus.iter().map(|t| t.coefficient * lookup(&t.string)).sum::<f64>();
            CoherenceEntry { i, j, re, im }
        })
        .collect();
    Ok(MeasurementSet::new(
        sv.dim(),
        Some(probabilities),
        coherences,
        Provenance::Sampled { shots, seed },
    )
    .expect("sampled frequencies sum to 1"))
}

/// Layered random circuit. Layer `l` applies to every qubit one of
/// `rx`, `ry`, `rz` (uniform choice) with an angle uniform in `[0, 2pi)`,
/// then `cx(q, q+1)` for `q = l mod 2, l mod 2 + 2, ...` while `q + 1 < n`.
pub fn random_circuit(n: usize, depth: usize, seed: u64) -> Result<Circuit, SimulateError> {
    if n == 0 || n > MAX_QUBITS {
        return Err(SimulateError::QubitCount(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gates = Vec::new();
    for layer in 0..depth {
        for q in 0..n {
            let name = ["rx", "ry", "rz"][rng.random_range(0..3)];
            gates.push(Gate::rotation(name, q, rng.random_range(0.0..TAU)));
        }
        let mut q = layer % 2;
        while q + 1 < n {
            gates.push(Gate::new("cx", &[q, q + 1]));
            q += 2;
        }
    }
    Ok(Circuit { qubits: n, gates })
}

//! Acceptance checks. Each test prints one `PASS`/`FAIL` line.
//!
//! Run with `cargo test -p maxent-qst --test acceptance -- --nocapture`.

mod common;

use std::time::{Duration, Instant};

use maxent_qst::maxent_pair::{forward_moments, LagrangePair, PairSolver};
use maxent_qst::qmath::{fidelity_pure, trace_distance, ComplexMatrix, DensityMatrix, StateVector};
use maxent_qst::reconstruct::{
    reconstruct_complex, reconstruct_real, MeasurementSet, Provenance, ReconstructConfig, Reference,
};
use maxent_qst::simulate::{
    coherence_observables, exact_measurements, random_circuit, run, sampled_measurements, Measure,
};
use maxent_qst::Execution;
use num_complex::Complex64;
use rand::Rng;

const BELL_ENTRY_TOL: f64 = 1e-6;
const BELL_DISTANCE_TOL: f64 = 1e-6;
const BELL_FIDELITY_TOL: f64 = 1e-6;
const BELL_BUDGET: Duration = Duration::from_secs(1);

const UNIFORM_ENTRY_TOL: f64 = 1e-4;
const UNIFORM_BUDGET: Duration = Duration::from_secs(5);

const W_TOL: f64 = 1e-4;

const SWEEP_MIN_QUBITS: usize = 2;
const SWEEP_MAX_QUBITS: usize = 8;
const SWEEP_CIRCUITS: u64 = 3;
const SWEEP_DISTANCE_TOL: f64 = 1e-6;
const SWEEP_FIDELITY_TOL: f64 = 1e-6;
const SWEEP_BUDGET: Duration = Duration::from_secs(600);

const TRACE_QUBITS: usize = 6;
const TRACE_JITTER: f64 = 1e-9;
const TRACE_FINAL_ENTROPY: f64 = 1e-6;
const TRACE_FINAL_PURITY_TOL: f64 = 1e-6;

const SHOT_GRID: [u64; 5] = [256, 1024, 4096, 16384, 65536];
const SHOT_SEEDS: u64 = 20;
const SLOPE_RANGE: (f64, f64) = (-0.65, -0.35);

const ROUNDTRIP_DRAWS: usize = 1000;
const ROUNDTRIP_RESIDUAL: f64 = 1e-8;
const ROUNDTRIP_SUCCESS_RATE: f64 = 0.999;

const COMPLEX_STATES: usize = 100;
const COMPLEX_MIN_REFERENCE_AMPLITUDE: f64 = 0.1;
const COMPLEX_FIDELITY_TOL: f64 = 1e-6;

const PAULI_MAX_QUBITS: usize = 4;
const PAULI_TOL: f64 = 1e-12;

fn report(id: u32, name: &str, ok: bool, detail: String) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("{tag} criterion {id} {name}: {detail}");
}

fn probabilities(p: Vec<f64>) -> MeasurementSet {
    MeasurementSet::new(p.len(), Some(p), vec![], Provenance::Exact).unwrap()
}

fn sweep_config() -> ReconstructConfig {
    ReconstructConfig {
        reference: Reference::Auto,
        record_trace: false,
        ..ReconstructConfig::default()
    }
}

fn argmax(p: &[f64]) -> usize {
    p.iter().enumerate().fold(0, |b, (k, &x)| if x > p[b] { k } else { b })
}

/// Exact first-row reconstruction of one random circuit; returns
/// `(trace distance, fidelity)`.
fn sweep_run(n: usize, seed: u64) -> (f64, f64) {
    let sv = run(&random_circuit(n, 2 * n, seed).unwrap()).unwrap();
    let r = argmax(&sv.probabilities());
    let ms = exact_measurements(&sv, Measure::FirstRow(r)).unwrap();
    let rec = reconstruct_complex(&ms, &sweep_config()).unwrap();
    (
        trace_distance(&DensityMatrix::pure(&sv), &rec.rho).unwrap(),
        fidelity_pure(&sv, &rec.rho).unwrap(),
    )
}

#[test]
fn criterion_1_bell_reconstruction() {
    let start = Instant::now();
    let rec = reconstruct_real(&probabilities(vec![0.5, 0.0, 0.0, 0.5]), &ReconstructConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let bell = StateVector::new(vec![
        Complex64::new(h, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(h, 0.0),
    ])
    .unwrap();
    let paper = ComplexMatrix::from_real_rows(&[
        vec![0.5, 0.0, 0.0, 0.5],
        vec![0.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 0.0],
        vec![0.5, 0.0, 0.0, 0.5],
    ])
    .unwrap();
    let err = rec.rho.matrix().max_abs_diff(&paper).unwrap();
    let td = trace_distance(&DensityMatrix::pure(&bell), &rec.rho).unwrap();
    let fid = fidelity_pure(&bell, &rec.rho).unwrap();
    let ok = err < BELL_ENTRY_TOL && td < BELL_DISTANCE_TOL && fid > 1.0 - BELL_FIDELITY_TOL && elapsed < BELL_BUDGET;
    report(
        1,
        "bell_reconstruction",
        ok,
        format!("max_entry_err={err:.3e} trace_distance={td:.3e} fidelity={fid:.12} runtime={elapsed:?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_2_uniform_three_qubits() {
    let start = Instant::now();
    let ms = probabilities(vec![0.125; 8]);
    let scaled = reconstruct_real(&ms, &ReconstructConfig::default()).unwrap();
    let unscaled_cfg = ReconstructConfig {
        solver: PairSolver {
            scaled: false,
            levels: 8,
            ..PairSolver::default()
        },
        ..ReconstructConfig::default()
    };
    let unscaled = reconstruct_real(&ms, &unscaled_cfg).unwrap();
    let elapsed = start.elapsed();
    let all = ComplexMatrix::from_fn(8, |_, _| Complex64::new(0.125, 0.0));
    let scaled_err = scaled.rho.matrix().max_abs_diff(&all).unwrap();
    let diag = ComplexMatrix::diagonal(&[0.125; 8]);
    let unscaled_err = unscaled.rho.matrix().max_abs_diff(&diag).unwrap();
    let ok = scaled_err < UNIFORM_ENTRY_TOL
        && unscaled_err == 0.0
        && unscaled.degenerate_pairs == 28
        && elapsed < UNIFORM_BUDGET;
    report(
        2,
        "si_uniform_three_qubits",
        ok,
        format!(
            "scaled_max_err={scaled_err:.3e} unscaled_max_offdiag={unscaled_err:.3e} degenerate_pairs={} runtime={elapsed:?}",
            unscaled.degenerate_pairs
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_3_w_state_coherence() {
    let third = 1.0 / 3.0;
    let scaled = PairSolver::default().predict_coherence_scaled(third, third).unwrap().modulus;
    let unscaled_solver = PairSolver {
        scaled: false,
        levels: 8,
        ..PairSolver::default()
    };
    let unscaled = unscaled_solver.predict_coherence_unscaled(third, third).unwrap().modulus;
    let ok = (scaled - third).abs() < W_TOL && unscaled < third;
    report(
        3,
        "w_state_coherence",
        ok,
        format!("scaled={scaled:.6} unscaled={unscaled:.6} (8-level embedding) true={third:.6}"),
    );
    assert!(ok);
}

#[test]
fn criterion_4_random_circuit_sweep() {
    let start = Instant::now();
    let mut worst_td: f64 = 0.0;
    let mut worst_fid: f64 = 1.0;
    let mut runs = 0;
    for n in SWEEP_MIN_QUBITS..=SWEEP_MAX_QUBITS {
        for k in 0..SWEEP_CIRCUITS {
            let (td, fid) = sweep_run(n, 1000 * n as u64 + k);
            worst_td = worst_td.max(td);
            worst_fid = worst_fid.min(fid);
            runs += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = worst_td < SWEEP_DISTANCE_TOL && worst_fid > 1.0 - SWEEP_FIDELITY_TOL && elapsed < SWEEP_BUDGET;
    report(
        4,
        "random_circuit_sweep",
        ok,
        format!(
            "n={SWEEP_MIN_QUBITS}..{SWEEP_MAX_QUBITS} runs={runs} worst_trace_distance={worst_td:.3e} worst_fidelity={worst_fid:.12} runtime={elapsed:?}"
        ),
    );
    assert!(ok);
}

/// Paper-scale extension; run with `--ignored`.
#[test]
#[ignore]
fn criterion_4_extended_nine_and_ten_qubits() {
    let mut worst_td: f64 = 0.0;
    let mut worst_fid: f64 = 1.0;
    for n in 9..=10 {
        for k in 0..SWEEP_CIRCUITS {
            let (td, fid) = sweep_run(n, 1000 * n as u64 + k);
            worst_td = worst_td.max(td);
            worst_fid = worst_fid.min(fid);
        }
    }
    let ok = worst_td < SWEEP_DISTANCE_TOL && worst_fid > 1.0 - SWEEP_FIDELITY_TOL;
    report(
        4,
        "random_circuit_sweep_extended",
        ok,
        format!("n=9..10 worst_trace_distance={worst_td:.3e} worst_fidelity={worst_fid:.12}"),
    );
    assert!(ok);
}

#[test]
fn criterion_5_convergence_trace() {
    let sv = run(&random_circuit(TRACE_QUBITS, 12, 5).unwrap()).unwrap();
    let r = argmax(&sv.probabilities());
    let ms = exact_measurements(&sv, Measure::FirstRow(r)).unwrap();
    let cfg = ReconstructConfig {
        reference: Reference::Index(r),
        ..ReconstructConfig::default()
    };
    let rec = reconstruct_complex(&ms, &cfg).unwrap();
    let steps = &rec.trace.steps;
    let n = 1usize << TRACE_QUBITS;
    let count_ok = steps.len() == n * (n - 1) / 2;
    let last = steps.last().unwrap();
    let end_ok = last.entropy < TRACE_FINAL_ENTROPY && last.purity > 1.0 - TRACE_FINAL_PURITY_TOL;
    let entropy_rises = steps
        .windows(2)
        .filter(|w| w[1].entropy > w[0].entropy + TRACE_JITTER)
        .count();
    let max_rise = steps
        .windows(2)
        .map(|w| w[1].entropy - w[0].entropy)
        .fold(0.0f64, f64::max);
    let purity_drops = steps
        .windows(2)
        .filter(|w| w[1].purity < w[0].purity - TRACE_JITTER)
        .count();
    let ok = count_ok && end_ok && entropy_rises == 0 && purity_drops == 0;
    report(
        5,
        "convergence_trace",
        ok,
        format!(
            "steps={} final_entropy={:.3e} final_purity={:.12} entropy_rises={entropy_rises} max_rise={max_rise:.3e} purity_drops={purity_drops}",
            steps.len(),
            last.entropy,
            last.purity
        ),
    );
    assert!(count_ok && end_ok, "trace shape wrong");
    assert!(entropy_rises == 0, "entropy is not monotone along the insertion order");
    assert!(purity_drops == 0);
}

#[test]
fn criterion_6_shot_noise_scaling() {
    let sv = run(&random_circuit(2, 4, 2024).unwrap()).unwrap();
    let truth = DensityMatrix::pure(&sv);
    let r = argmax(&sv.probabilities());
    let cfg = ReconstructConfig {
        reference: Reference::Index(r),
        ..sweep_config()
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &shots in &SHOT_GRID {
        let mut total = 0.0;
        for seed in 0..SHOT_SEEDS {
            let ms = sampled_measurements(&sv, Measure::FirstRow(r), shots, seed, Execution::Parallel).unwrap();
            let rec = reconstruct_complex(&ms, &cfg).unwrap();
            total += trace_distance(&truth, &rec.rho).unwrap();
        }
        xs.push((shots as f64).ln());
        ys.push((total / SHOT_SEEDS as f64).ln());
    }
    let slope = common::slope(&xs, &ys);
    let ok = slope >= SLOPE_RANGE.0 && slope <= SLOPE_RANGE.1;
    let means: Vec<String> = ys.iter().map(|y| format!("{:.3e}", y.exp())).collect();
    report(
        6,
        "shot_noise_scaling",
        ok,
        format!("slope={slope:.4} mean_trace_distance=[{}]", means.join(", ")),
    );
    assert!(ok);
}

#[test]
fn criterion_7_solver_roundtrip() {
    let mut rng = common::rng(77);
    let solver = PairSolver {
        scaled: false,
        ..PairSolver::default()
    };
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for k in 0..ROUNDTRIP_DRAWS {
        let lp = LagrangePair::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(0.1..3.0),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let m = forward_moments(&lp);
        let residual = match solver.solve_from_probability_and_coherence(m.x11, m.x12) {
            Ok(rep) => {
                let back = rep.moments;
                (back.x11 - m.x11)
                    .abs()
                    .max((back.x22 - m.x22).abs())
                    .max((back.x12 - m.x12).norm())
            }
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(residual);
        if residual.is_nan() || residual >= ROUNDTRIP_RESIDUAL {
            failures.push((k, lp, residual));
        }
    }
    for (k, lp, r) in &failures {
        println!("  roundtrip failure #{k}: {lp:?} residual={r:e}");
    }
    let rate = 1.0 - failures.len() as f64 / ROUNDTRIP_DRAWS as f64;
    let ok = rate >= ROUNDTRIP_SUCCESS_RATE;
    report(
        7,
        "solver_roundtrip",
        ok,
        format!("draws={ROUNDTRIP_DRAWS} success_rate={rate:.4} worst_residual={worst:.3e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_8_complex_workflow() {
    let mut rng = common::rng(88);
    let mut worst: f64 = 1.0;
    let mut done = 0;
    while done < COMPLEX_STATES {
        let n = 2 + done % 4;
        let sv = common::random_state(n, &mut rng);
        if sv.amplitudes()[0].norm() < COMPLEX_MIN_REFERENCE_AMPLITUDE {
            continue;
        }
        let ms = exact_measurements(&sv, Measure::FirstRow(0)).unwrap();
        let cfg = ReconstructConfig {
            record_trace: false,
            ..ReconstructConfig::default()
        };
        let rec = reconstruct_complex(&ms, &cfg).unwrap();
        worst = worst.min(fidelity_pure(&sv, &rec.rho).unwrap());
        done += 1;
    }
    let ok = worst > 1.0 - COMPLEX_FIDELITY_TOL;
    report(
        8,
        "complex_workflow",
        ok,
        format!("states={COMPLEX_STATES} n=2..5 worst_fidelity={worst:.12}"),
    );
    assert!(ok);
}

#[test]
fn criterion_9_pauli_decomposition() {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for n in 1..=PAULI_MAX_QUBITS {
        let dim = 1usize << n;
        for i in 0..dim {
            for j in i + 1..dim {
                let (plus, minus) = coherence_observables(i, j, n).unwrap();
                let rebuild = |terms: &[maxent_qst::simulate::PauliTerm]| {
                    terms.iter().fold(ComplexMatrix::zeros(dim), |acc, t| {
                        let p = common::pauli_matrix(&t.string).scale(t.coefficient);
                        ComplexMatrix::from_fn(dim, |r, c| acc.get(r, c) + p.get(r, c))
                    })
                };
                let one = Complex64::new(1.0, 0.0);
                let iu = Complex64::new(0.0, 1.0);
                let o_plus = ComplexMatrix::from_fn(dim, |r, c| {
                    if (r, c) == (i, j) || (r, c) == (j, i) { one } else { Complex64::new(0.0, 0.0) }
                });
                let o_minus = ComplexMatrix::from_fn(dim, |r, c| {
                    if (r, c) == (i, j) {
                        iu
                    } else if (r, c) == (j, i) {
                        -iu
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                });
                worst = worst
                    .max(rebuild(&plus).max_abs_diff(&o_plus).unwrap())
                    .max(rebuild(&minus).max_abs_diff(&o_minus).unwrap());
                checked += 1;
            }
        }
    }
    let ok = worst < PAULI_TOL;
    report(
        9,
        "pauli_decomposition",
        ok,
        format!("pairs={checked} n<={PAULI_MAX_QUBITS} max_entry_err={worst:.3e}"),
    );
    assert!(ok);
}

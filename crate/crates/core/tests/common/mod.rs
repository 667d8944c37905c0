#![allow(dead_code)]

use maxent_qst::qmath::{ComplexMatrix, StateVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Haar-random pure state on `n` qubits.
pub fn random_state(n: usize, rng: &mut ChaCha8Rng) -> StateVector {
    let amps = (0..1usize << n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im)
        })
        .collect();
    StateVector::normalized(amps).unwrap()
}

/// Random pure state with non-negative real amplitudes.
pub fn random_real_state(n: usize, rng: &mut ChaCha8Rng) -> StateVector {
    let amps = (0..1usize << n)
        .map(|_| {
            let x: f64 = StandardNormal.sample(rng);
            Complex64::new(x.abs(), 0.0)
        })
        .collect();
    StateVector::normalized(amps).unwrap()
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn pauli(b: u8) -> [[Complex64; 2]; 2] {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match b {
        b'I' => [[l, o], [o, l]],
        b'X' => [[o, l], [l, o]],
        b'Y' => [[o, -i], [i, o]],
        b'Z' => [[l, o], [o, -l]],
        _ => panic!("bad Pauli letter"),
    }
}

/// Dense matrix of a Pauli string (first letter acts on the highest qubit)
/// by explicit Kronecker products.
pub fn pauli_matrix(s: &str) -> ComplexMatrix {
    let mut m = ComplexMatrix::identity(1);
    for b in s.bytes() {
        let p = pauli(b);
        let d = m.dim();
        m = ComplexMatrix::from_fn(2 * d, |r, c| m.get(r / 2, c / 2) * p[r % 2][c % 2]);
    }
    m
}

//! Pairwise maximal-entropy engine.
//!
//! Two levels `|1>`, `|2>` carry the constraints and the remaining
//! `levels - 2` levels are zero modes of the generator
//!
//! ```text
//! A = -lambda11 |1><1| - lambda12 |1><2| - conj(lambda12) |2><1|
//! rho = exp(A) / Z,   Z = Tr exp(A)
//! ```
//!
//! The forward map takes multipliers to the moments `x11 = rho_11`,
//! `x22 = rho_22`, `x12 = rho_12` through the closed-form eigen-system of
//! `A`. The inverse problems (a population and a coherence given, or two
//! populations given) are solved by noting that the active 2x2 block `M` of
//! `rho` satisfies `log(Z M)_22 = 0` at the maximal-entropy point. With one
//! unknown left in `M` that condition is a monotone scalar equation, which is
//! bracketed and solved with Brent's method; the multipliers are then read
//! off `log(Z M)` and checked against the forward map. A damped Newton
//! iteration with grid restarts is kept as a fallback.
//!
//! The scaling technique rescales a pair so its populations sum to
//! `1 - delta` before solving and divides the answer by the same factor.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::roots::{brent, damped_newton2, expand_until};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_DELTA: f64 = 1e-12;
pub const DEFAULT_LEVELS: usize = 4;
/// `|lambda12|` below this routes to the diagonal branch.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;
/// Populations below this are treated as exactly zero.
pub const ZERO_POPULATION: f64 = 1e-14;
/// Box for the Newton fallback.
pub const MULTIPLIER_BOUND: f64 = 50.0;

const BRENT_XTOL: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PairError {
    #[error("degenerate: |lambda12| = {modulus:e} is below the threshold, use the diagonal branch")]
    Degenerate { modulus: f64 },
    #[error("infeasible pair (x11 = {x11}, |x12| = {x12_modulus}): {reason}")]
    Infeasible {
        x11: f64,
        x12_modulus: f64,
        reason: &'static str,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("zero pair: both populations vanish, coherence is 0")]
    ZeroPair,
    #[error("no convergence after {iterations} iterations, best residual {residual:e}")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("inconsistent solve: |x12| = {modulus} exceeds sqrt(x_ii x_jj) = {bound}")]
    Inconsistent { modulus: f64, bound: f64 },
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Multipliers of one pairwise problem. `lambda21 = conj(lambda12)` is
/// implied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LagrangePair {
    pub lambda11: f64,
    pub lambda12_modulus: f64,
    /// Radians in `(-pi, pi]`.
    pub theta12: f64,
}

impl LagrangePair {
    pub fn new(lambda11: f64, lambda12_modulus: f64, theta12: f64) -> Self {
        let (m, t) = if lambda12_modulus < 0.0 {
            (-lambda12_modulus, theta12 + PI)
        } else {
            (lambda12_modulus, theta12)
        };
        Self {
            lambda11,
            lambda12_modulus: m,
            theta12: wrap_phase(t),
        }
    }

    pub fn lambda12(&self) -> Complex64 {
        Complex64::from_polar(self.lambda12_modulus, self.theta12)
    }
}

/// Closed-form eigen-system of the generator `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEigenSystem {
    /// `-(lambda11 + sqrt(lambda11^2 + 4|lambda12|^2)) / 2`.
    pub eps3: f64,
    /// `-(lambda11 - sqrt(lambda11^2 + 4|lambda12|^2)) / 2`.
    pub eps4: f64,
    pub k3: Complex64,
    pub k4: Complex64,
    pub a: f64,
    pub b: f64,
    pub z: f64,
    pub zero_modes: usize,
}

/// Moments of the pairwise maximal-entropy state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairMoments {
    pub x11: f64,
    pub x22: f64,
    pub x12: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveReport {
    pub solution: LagrangePair,
    /// Max-norm of the constraint residual, in the (scaled) units solved.
    pub residual_norm: f64,
    pub iterations: usize,
    pub scaled: bool,
    /// Factor applied to the pair before solving (1 when unscaled).
    pub scale_factor: f64,
    /// Forward moments at the solution, in scaled units.
    pub moments: PairMoments,
    /// True if the bracketed solve needed the Newton fallback.
    pub used_fallback: bool,
}

/// Result of predicting a coherence modulus from two populations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceEstimate {
    pub modulus: f64,
    /// `|lambda12|` fell below [`DEGENERACY_THRESHOLD`].
    pub degenerate: bool,
    /// `None` when a population was below [`ZERO_POPULATION`] and no solve
    /// was run.
    pub report: Option<SolveReport>,
}

/// Scales a pair so its populations sum to `1 - delta`. Returns
/// `(s, s * x_ii, s * x_jj)`.
pub fn scale_pair(x_ii: f64, x_jj: f64, delta: f64) -> Result<(f64, f64, f64), PairError> {
    if !(delta > 0.0 && delta < 0.1) {
        return Err(PairError::InvalidInput(format!(
            "delta must lie in (0, 0.1), got {delta}"
        )));
    }
    if !(x_ii.is_finite() && x_jj.is_finite()) || x_ii < 0.0 || x_jj < 0.0 {
        return Err(PairError::InvalidInput(format!(
            "populations must be finite and non-negative, got ({x_ii}, {x_jj})"
        )));
    }
    let sum = x_ii + x_jj;
    if sum <= 0.0 {
        return Err(PairError::ZeroPair);
    }
    let s = (1.0 - delta) / sum;
    Ok((s, s * x_ii, s * x_jj))
}

/// Eigen-system with the default 4-level embedding.
pub fn eigen_system(lp: &LagrangePair) -> Result<PairEigenSystem, PairError> {
    PairSolver::default().eigen_system(lp)
}

/// Forward moments with the default 4-level embedding.
pub fn forward_moments(lp: &LagrangePair) -> PairMoments {
    PairSolver::default().forward_moments(lp)
}

/// Configuration of the pairwise solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSolver {
    /// Residual tolerance on the constraints.
    pub tol: f64,
    /// Scaled pairs are normalized to `1 - delta`.
    pub delta: f64,
    /// Dimension of the embedding space (two active levels plus
    /// `levels - 2` zero modes).
    pub levels: usize,
    pub max_iter: usize,
    /// Whether the population solve applies the scaling technique.
    pub scaled: bool,
}

impl Default for PairSolver {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            delta: DEFAULT_DELTA,
            levels: DEFAULT_LEVELS,
            max_iter: 200,
            scaled: true,
        }
    }
}

/// `log(x)` of the real symmetric block `[[p, c], [c, q]]` scaled by `Z`,
/// given `ln det` separately so that nearly singular blocks keep full
/// relative precision in their small eigenvalue.
#[derive(Debug, Clone, Copy)]
struct LogBlock {
    b11: f64,
    /// Modulus of the off-diagonal entry.
    b12: f64,
    b22: f64,
}

fn log_block(p: f64, q: f64, c: f64, ln_det: f64, ln_z: f64) -> LogBlock {
    let mu2 = 0.5 * (p + q + (p - q).hypot(2.0 * c));
    let ln_mu2 = mu2.ln();
    let ln_mu1 = ln_det - ln_mu2;
    let mu1 = ln_mu1.exp();
    // Weight of the small-eigenvalue eigenvector on the second level.
    let u2sq = if c == 0.0 {
        if p <= q {
            0.0
        } else {
            1.0
        }
    } else {
        let dp = (p - mu1).max(0.0);
        let dq = (q - mu1).max(0.0);
        if dq >= dp {
            c * c / (dq * dq + c * c)
        } else {
            dp * dp / (dp * dp + c * c)
        }
    };
    let eps3 = ln_z + ln_mu1;
    let eps4 = ln_z + ln_mu2;
    LogBlock {
        b11: eps4 + (eps3 - eps4) * (1.0 - u2sq),
        b12: (eps4 - eps3) * (u2sq * (1.0 - u2sq)).sqrt(),
        b22: eps4 + (eps3 - eps4) * u2sq,
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Which second moment a Newton fallback matches.
#[derive(Debug, Clone, Copy)]
enum SecondMoment {
    Population,
    CoherenceModulus,
}

/// Finds a sign change of a monotone increasing `g` around `start`.
fn bracket(g: &impl Fn(f64) -> f64, start: f64) -> Option<(f64, f64)> {
    let g0 = g(start);
    if g0.is_nan() {
        return None;
    }
    if g0 < 0.0 {
        let hi = expand_until(g, start, 1.0, |v| v >= 0.0, 2000)?;
        Some((start, hi))
    } else {
        let lo = expand_until(g, start, -1.0, |v| v <= 0.0, 2000)?;
        Some((lo, start))
    }
}

impl PairSolver {
    fn zero_modes(&self) -> f64 {
        (self.levels - 2) as f64
    }

    fn validate(&self) -> Result<(), PairError> {
        if self.levels < 3 {
            return Err(PairError::InvalidInput(format!(
                "embedding needs at least 3 levels, got {}",
                self.levels
            )));
        }
        if !(self.tol > 0.0 && self.tol < 1e-4) {
            return Err(PairError::InvalidInput(format!(
                "tolerance must lie in (0, 1e-4), got {}",
                self.tol
            )));
        }
        if !(self.delta > 0.0 && self.delta < 0.1) {
            return Err(PairError::InvalidInput(format!(
                "delta must lie in (0, 0.1), got {}",
                self.delta
            )));
        }
        Ok(())
    }

    pub fn eigen_system(&self, lp: &LagrangePair) -> Result<PairEigenSystem, PairError> {
        let m = lp.lambda12_modulus;
        if m < DEGENERACY_THRESHOLD {
            return Err(PairError::Degenerate { modulus: m });
        }
        let l11 = lp.lambda11;
        let r = l11.hypot(2.0 * m);
        // The product eps3 * eps4 = -|lambda12|^2 avoids cancellation in
        // whichever root is small.
        let (eps3, eps4) = if l11 >= 0.0 {
            let e3 = -0.5 * (l11 + r);
            (e3, -m * m / e3)
        } else {
            let e4 = 0.5 * (r - l11);
            (-m * m / e4, e4)
        };
        let l12c = lp.lambda12().conj();
        let k3 = -eps3 / l12c;
        let k4 = -eps4 / l12c;
        let frac = |k: Complex64| 1.0 / (1.0 + 1.0 / k.norm_sqr());
        let zero_modes = self.levels - 2;
        Ok(PairEigenSystem {
            eps3,
            eps4,
            k3,
            k4,
            a: frac(k3) * eps3.exp(),
            b: frac(k4) * eps4.exp(),
            z: zero_modes as f64 + eps3.exp() + eps4.exp(),
            zero_modes,
        })
    }

    /// Moments `(x11, x22, x12)` of the maximal-entropy state with the given
    /// multipliers. Weights are evaluated relative to the largest exponent so
    /// large multipliers do not overflow.
    pub fn forward_moments(&self, lp: &LagrangePair) -> PairMoments {
        let k = self.zero_modes();
        match self.eigen_system(lp) {
            Err(_) => {
                // Diagonal branch: rho ~ diag(exp(-lambda11), 1, 1, ...).
                let l = -lp.lambda11;
                let top = l.max(0.0);
                let e1 = (l - top).exp();
                let e0 = (-top).exp();
                let z = e1 + e0 * (1.0 + k);
                PairMoments {
                    x11: e1 / z,
                    x22: e0 / z,
                    x12: Complex64::new(0.0, 0.0),
                }
            }
            Ok(es) => {
                let top = es.eps4.max(0.0);
                let w3 = (es.eps3 - top).exp();
                let w4 = (es.eps4 - top).exp();
                let z = k * (-top).exp() + w3 + w4;
                let n3 = es.k3.norm_sqr() + 1.0;
                let n4 = es.k4.norm_sqr() + 1.0;
                let frac = |k: Complex64| 1.0 / (1.0 + 1.0 / k.norm_sqr());
                PairMoments {
                    x11: (frac(es.k3) * w3 + frac(es.k4) * w4) / z,
                    x22: (w3 / n3 + w4 / n4) / z,
                    x12: (es.k3 * (w3 / n3) + es.k4 * (w4 / n4)) / z,
                }
            }
        }
    }

    /// Solves for the multipliers given a population `x11` and a coherence
    /// `x12 = rho_12`. With `self.scaled`, the pair is rescaled so that the
    /// predicted populations sum to `1 - delta`.
    pub fn solve_from_probability_and_coherence(
        &self,
        x11: f64,
        x12: Complex64,
    ) -> Result<SolveReport, PairError> {
        self.validate()?;
        if !(x11.is_finite() && x12.re.is_finite() && x12.im.is_finite()) {
            return Err(PairError::InvalidInput("non-finite moment".into()));
        }
        let upper_ok = if self.scaled { x11 <= 1.0 } else { x11 < 1.0 };
        if !(x11 > 0.0 && upper_ok) {
            return Err(PairError::Infeasible {
                x11,
                x12_modulus: x12.norm(),
                reason: "population must lie in (0, 1)",
            });
        }
        let c = x12.norm();
        let theta = if c > 0.0 { wrap_phase(x12.arg() + PI) } else { 0.0 };
        if self.scaled {
            self.population_scaled(x11, x12, c, theta)
        } else {
            self.population_unscaled(x11, x12, c, theta)
        }
    }

    /// Predicted population `x22` of the second level.
    pub fn predict_population(&self, x11: f64, x12: Complex64) -> Result<f64, PairError> {
        let report = self.solve_from_probability_and_coherence(x11, x12)?;
        Ok(report.moments.x22 / report.scale_factor)
    }

    fn population_unscaled(
        &self,
        p: f64,
        x12: Complex64,
        c: f64,
        theta: f64,
    ) -> Result<SolveReport, PairError> {
        let bound = p * (1.0 - p);
        if c * c > bound + self.tol {
            return Err(PairError::Infeasible {
                x11: p,
                x12_modulus: c,
                reason: "|x12|^2 exceeds x11 (1 - x11)",
            });
        }
        // On the boundary the maximum-entropy point sits at infinite
        // multipliers; back off by half the tolerance.
        let c_max = bound.sqrt() - 0.5 * self.tol;
        let c_eff = c.min(c_max).max(0.0);
        let eta_max = 1.0 - p - c_eff * c_eff / p;
        if eta_max <= 0.0 {
            return Err(PairError::Infeasible {
                x11: p,
                x12_modulus: c,
                reason: "no room left for the second population",
            });
        }
        let ln_k = self.zero_modes().ln();
        let ln_eta_max = eta_max.ln();
        let ln_p = p.ln();
        let c2 = c_eff * c_eff / p;
        let block_at = |z: f64| {
            let ln_sig = -softplus(-z);
            let ln_sig_neg = -softplus(z);
            let y = c2 + eta_max * ln_sig.exp();
            let ln_det = ln_p + ln_eta_max + ln_sig;
            let ln_z = ln_k - ln_eta_max - ln_sig_neg;
            log_block(p, y, c_eff, ln_det, ln_z)
        };
        let g = |z: f64| block_at(z).b22;
        let target = move |m: &PairMoments| (m.x11 - p).abs().max((m.x12 - x12).norm());
        let (lo, hi) = bracket(&g, 0.0).ok_or(PairError::NoConvergence {
            residual: f64::INFINITY,
            iterations: 0,
        })?;
        let root = brent(g, lo, hi, BRENT_XTOL, self.max_iter).ok_or(PairError::NoConvergence {
            residual: f64::INFINITY,
            iterations: 0,
        })?;
        let lb = block_at(root.x);
        let lp = LagrangePair::new(-lb.b11, lb.b12, theta);
        self.finish(
            lp,
            root.iterations,
            1.0,
            false,
            [p, c],
            SecondMoment::CoherenceModulus,
            target,
        )
    }

    fn population_scaled(
        &self,
        p: f64,
        x12: Complex64,
        c: f64,
        theta: f64,
    ) -> Result<SolveReport, PairError> {
        let delta = self.delta;
        let ln_z = (self.zero_modes() / delta).ln();
        let ln_p = p.ln();
        let c2 = c * c / p;
        // Unknown: excess eta = x22 - |x12|^2 / x11 > 0, as t = ln eta.
        let scale_at = |t: f64| (1.0 - delta) / (p + c2 + t.exp());
        let block_at = |t: f64| {
            let y = c2 + t.exp();
            let s = scale_at(t);
            let ln_det = 2.0 * s.ln() + ln_p + t;
            log_block(s * p, s * y, s * c, ln_det, ln_z)
        };
        let g = |t: f64| block_at(t).b22;
        let (lo, hi) = bracket(&g, 0.0).ok_or(PairError::NoConvergence {
            residual: f64::INFINITY,
            iterations: 0,
        })?;
        let root = brent(g, lo, hi, BRENT_XTOL, self.max_iter).ok_or(PairError::NoConvergence {
            residual: f64::INFINITY,
            iterations: 0,
        })?;
        let s = scale_at(root.x);
        let lb = block_at(root.x);
        let lp = LagrangePair::new(-lb.b11, lb.b12, theta);
        let (sp, sx12) = (s * p, s * x12);
        let target = move |m: &PairMoments| (m.x11 - sp).abs().max((m.x12 - sx12).norm());
        self.finish(
            lp,
            root.iterations,
            s,
            true,
            [sp, s * c],
            SecondMoment::CoherenceModulus,
            target,
        )
    }

    /// Coherence modulus predicted from two populations with the scaling
    /// technique.
    pub fn predict_coherence_scaled(
        &self,
        x_ii: f64,
        x_jj: f64,
    ) -> Result<CoherenceEstimate, PairError> {
        self.coherence(x_ii, x_jj, true)
    }

    /// Same solve without scaling. Small multipliers are reported as
    /// degenerate (coherence 0) instead of failing.
    pub fn predict_coherence_unscaled(
        &self,
        x_ii: f64,
        x_jj: f64,
    ) -> Result<CoherenceEstimate, PairError> {
        self.coherence(x_ii, x_jj, false)
    }

    /// Dispatches on `self.scaled`.
    pub fn predict_coherence(&self, x_ii: f64, x_jj: f64) -> Result<CoherenceEstimate, PairError> {
        self.coherence(x_ii, x_jj, self.scaled)
    }

    fn coherence(&self, x_ii: f64, x_jj: f64, scaled: bool) -> Result<CoherenceEstimate, PairError> {
        self.validate()?;
        for x in [x_ii, x_jj] {
            if !x.is_finite() || !(-self.tol..=1.0 + self.tol).contains(&x) {
                return Err(PairError::InvalidInput(format!(
                    "population {x} outside [0, 1]"
                )));
            }
        }
        if x_ii < ZERO_POPULATION || x_jj < ZERO_POPULATION {
            return Ok(CoherenceEstimate {
                modulus: 0.0,
                degenerate: false,
                report: None,
            });
        }
        // The smaller population takes the lambda11 slot; this keeps the
        // small eigenvalue of the block far below the zero-mode weight.
        let (p, q) = if x_ii <= x_jj { (x_ii, x_jj) } else { (x_jj, x_ii) };
        let (s, sp, sq, ln_z) = if scaled {
            let (s, sp, sq) = scale_pair(p, q, self.delta)?;
            (s, sp, sq, (self.zero_modes() / self.delta).ln())
        } else {
            let sum = p + q;
            if sum > 1.0 + self.tol {
                return Err(PairError::Infeasible {
                    x11: p,
                    x12_modulus: 0.0,
                    reason: "populations sum above 1",
                });
            }
            let s = if 1.0 - sum < self.tol { (1.0 - self.tol) / sum } else { 1.0 };
            let (sp, sq) = (s * p, s * q);
            (s, sp, sq, self.zero_modes().ln() - (1.0 - sp - sq).ln())
        };
        let bound = (x_ii * x_jj).sqrt();
        let target = move |m: &PairMoments| (m.x11 - sp).abs().max((m.x22 - sq).abs());

        let g_hi = ln_z + sq.ln();
        if g_hi <= 1e-12 {
            // No coherent solution: the constraints are met best with
            // lambda12 = 0.
            let e = sp * (1.0 + self.zero_modes()) / (1.0 - sp);
            let lp = LagrangePair::new(-e.ln(), 0.0, 0.0);
            let moments = self.forward_moments(&lp);
            let residual = target(&moments);
            if scaled && residual > self.tol {
                return Err(PairError::NoConvergence {
                    residual,
                    iterations: 0,
                });
            }
            return Ok(CoherenceEstimate {
                modulus: 0.0,
                degenerate: true,
                report: Some(SolveReport {
                    solution: lp,
                    residual_norm: residual,
                    iterations: 0,
                    scaled,
                    scale_factor: s,
                    moments,
                    used_fallback: false,
                }),
            });
        }

        let ln_p = sp.ln();
        let ln_q = sq.ln();
        // Unknown: eta = q - c^2 / p in (0, q], as t = ln eta.
        let block_at = |t: f64| {
            let c = (sp * sq * -(t - ln_q).exp_m1()).max(0.0).sqrt();
            log_block(sp, sq, c, ln_p + t, ln_z)
        };
        let g = |t: f64| block_at(t).b22;
        let lo = expand_until(g, ln_q - 1.0, -1.0, |v| v <= 0.0, 2000).ok_or(
            PairError::NoConvergence {
                residual: f64::INFINITY,
                iterations: 0,
            },
        )?;
        let root = brent(g, lo, ln_q, BRENT_XTOL, self.max_iter).ok_or(
            PairError::NoConvergence {
                residual: f64::INFINITY,
                iterations: 0,
            },
        )?;
        let lb = block_at(root.x);
        let lp = LagrangePair::new(-lb.b11, lb.b12, 0.0);
        let report = self.finish(
            lp,
            root.iterations,
            s,
            scaled,
            [sp, sq],
            SecondMoment::Population,
            target,
        )?;
        let degenerate = report.solution.lambda12_modulus < DEGENERACY_THRESHOLD;
        let modulus = report.moments.x12.norm() / s;
        if modulus * modulus > x_ii * x_jj + self.tol {
            return Err(PairError::Inconsistent { modulus, bound });
        }
        Ok(CoherenceEstimate {
            modulus,
            degenerate,
            report: Some(report),
        })
    }

    /// Verifies a candidate against the forward map and falls back to
    /// damped Newton (then a grid restart) when the residual is too large.
    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        lp: LagrangePair,
        iterations: usize,
        scale_factor: f64,
        scaled: bool,
        targets: [f64; 2],
        second: SecondMoment,
        residual_of: impl Fn(&PairMoments) -> f64,
    ) -> Result<SolveReport, PairError> {
        let report = |lp: LagrangePair, iterations: usize, used_fallback: bool| {
            let moments = self.forward_moments(&lp);
            SolveReport {
                solution: lp,
                residual_norm: residual_of(&moments),
                iterations,
                scaled,
                scale_factor,
                moments,
                used_fallback,
            }
        };
        let first = report(lp, iterations, false);
        if first.residual_norm <= self.tol {
            return Ok(first);
        }
        let theta = lp.theta12;
        let eqs = |x: [f64; 2]| {
            let m = self.forward_moments(&LagrangePair::new(x[0], x[1], theta));
            let second_val = match second {
                SecondMoment::Population => m.x22,
                SecondMoment::CoherenceModulus => m.x12.norm(),
            };
            [m.x11 - targets[0], second_val - targets[1]]
        };
        let lo = [-MULTIPLIER_BOUND, 0.0];
        let hi = [MULTIPLIER_BOUND, MULTIPLIER_BOUND];
        let mut best = first;
        let mut total = iterations;
        let mut starts = vec![[lp.lambda11, lp.lambda12_modulus]];
        // Heuristic start, then a coarse grid ordered by initial residual.
        let heuristic = (targets[1].max(1e-300) / targets[0]).ln();
        starts.push([if heuristic.is_finite() { heuristic } else { 0.0 }, 1.0]);
        let mut grid = Vec::new();
        for &l in &[-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0] {
            for &m in &[0.05, 0.25, 1.0, 2.0, 4.0, 8.0] {
                let r = eqs([l, m]);
                grid.push((r[0].abs().max(r[1].abs()), [l, m]));
            }
        }
        grid.sort_by(|a, b| a.0.total_cmp(&b.0));
        starts.extend(grid.iter().take(4).map(|g| g.1));
        for x0 in starts {
            let out = damped_newton2(eqs, x0, lo, hi, self.tol * 1e-2, self.max_iter);
            total += out.iterations;
            let cand = report(LagrangePair::new(out.x[0], out.x[1], theta), total, true);
            if cand.residual_norm < best.residual_norm {
                best = cand;
            }
            if best.residual_norm <= self.tol {
                best.iterations = total;
                return Ok(best);
            }
        }
        Err(PairError::NoConvergence {
            residual: best.residual_norm,
            iterations: total,
        })
    }
}

//! Scalar and two-variable root finders used by the pairwise solver.

/// Outcome of a bracketed scalar solve.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Root {
    pub x: f64,
    pub iterations: usize,
}

/// Brent's method on a bracket `[a, b]` with `f(a)` and `f(b)` of opposite
/// sign (or one of them zero). Returns `None` if the bracket is invalid.
pub(crate) fn brent(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    xtol: f64,
    max_iter: usize,
) -> Option<Root> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(Root { x: a, iterations: 0 });
    }
    if fb == 0.0 {
        return Some(Root { x: b, iterations: 0 });
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return None;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for it in 1..=max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Some(Root { x: b, iterations: it });
        }
        let interpolate = e.abs() >= tol1 && fa.abs() > fb.abs() && fa.is_finite() && fb.is_finite() && fc.is_finite();
        if interpolate {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if fb.is_nan() {
            return None;
        }
    }
    Some(Root { x: b, iterations: max_iter })
}

/// Expands `hi` upward (`dir > 0`) or `lo` downward until `pred(f(x))`
/// holds, doubling the step each time. Returns the first point that
/// satisfies the predicate.
pub(crate) fn expand_until(
    mut f: impl FnMut(f64) -> f64,
    start: f64,
    dir: f64,
    pred: impl Fn(f64) -> bool,
    max_steps: usize,
) -> Option<f64> {
    let mut step = 1.0;
    let mut x = start;
    for _ in 0..max_steps {
        if pred(f(x)) {
            return Some(x);
        }
        x = start + dir * step;
        step *= 2.0;
    }
    None
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NewtonOutcome {
    pub x: [f64; 2],
    pub iterations: usize,
}

/// Damped Newton on a 2x2 system with a forward-difference Jacobian,
/// confined to the box `lo <= x <= hi`. Each step is halved until the
/// residual max-norm decreases.
pub(crate) fn damped_newton2(
    f: impl Fn([f64; 2]) -> [f64; 2],
    x0: [f64; 2],
    lo: [f64; 2],
    hi: [f64; 2],
    tol: f64,
    max_iter: usize,
) -> NewtonOutcome {
    let clamp = |x: [f64; 2]| [x[0].clamp(lo[0], hi[0]), x[1].clamp(lo[1], hi[1])];
    let norm = |r: [f64; 2]| {
        let n = r[0].abs().max(r[1].abs());
        if n.is_nan() {
            f64::INFINITY
        } else {
            n
        }
    };
    let mut x = clamp(x0);
    let mut r = f(x);
    let mut res = norm(r);
    let mut it = 0;
    while it < max_iter && res > tol {
        it += 1;
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let h = 1e-7 * x[k].abs().max(1.0);
            let mut xp = x;
            xp[k] += h;
            if xp[k] > hi[k] {
                xp[k] = x[k] - h;
            }
            let step = xp[k] - x[k];
            let rp = f(xp);
            jac[0][k] = (rp[0] - r[0]) / step;
            jac[1][k] = (rp[1] - r[1]) / step;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let dx = if det.abs() > 1e-300 && det.is_finite() {
            [
                -(jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
                -(-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
            ]
        } else {
            // Singular Jacobian: gradient step on |r|^2.
            let g = [
                jac[0][0] * r[0] + jac[1][0] * r[1],
                jac[0][1] * r[0] + jac[1][1] * r[1],
            ];
            let gn = (g[0] * g[0] + g[1] * g[1]).sqrt().max(1e-300);
            [-g[0] / gn * 0.1, -g[1] / gn * 0.1]
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let xn = clamp([x[0] + t * dx[0], x[1] + t * dx[1]]);
            let rn = f(xn);
            let resn = norm(rn);
            if resn < res {
                x = xn;
                r = rn;
                res = resn;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    NewtonOutcome { x, iterations: it }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-15, 200).unwrap();
        assert!((r.x - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn brent_rejects_bad_bracket() {
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100).is_none());
    }

    #[test]
    fn brent_tolerates_infinite_endpoint() {
        let r = brent(|x: f64| x.ln(), 0.0, 3.0, 1e-15, 200).unwrap();
        assert!((r.x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn newton_solves_nonlinear_pair() {
        let out = damped_newton2(
            |x| [x[0] * x[0] + x[1] * x[1] - 4.0, x[0] - x[1]],
            [1.0, 0.5],
            [-10.0, -10.0],
            [10.0, 10.0],
            1e-12,
            100,
        );
            assert!((out.x[0] - 2f64.sqrt()).abs() < 1e-9);
    }
}

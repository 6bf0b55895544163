//! Adaptive Simpson quadrature for the analytic reference quantities.

fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `∫_a^b f` to roughly absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 48)
}

/// `∫_{a}^{b} ∫_{c}^{d} f(x, y) dy dx` by nested adaptive Simpson.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    (a, b): (f64, f64),
    (c, d): (f64, f64),
    tol: f64,
) -> f64 {
    let inner_tol = tol / (b - a).abs().max(1.0);
    integrate(|x| integrate(|y| f(x, y), c, d, inner_tol), a, b, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomials_and_transcendentals() {
        assert!((integrate(|x| x * x, 0.0, 3.0, 1e-12) - 9.0).abs() < 1e-12);
        assert!((integrate(f64::sin, 0.0, PI, 1e-12) - 2.0).abs() < 1e-11);
        let v = integrate_2d(|r, _t| r, (0.0, 1.0), (0.0, 2.0 * PI), 1e-12);
        assert!((v - PI).abs() < 1e-10);
    }
}

//! Adaptive Gauss–Kronrod integration on `[0, ℓ]` for integrands with an
//! algebraic singularity at the origin.
//!
//! The interval is cut dyadically toward `0` down to `x₀ = ℓ·1e-12`; each
//! piece is integrated with adaptive G7/K15, and the remaining `[0, x₀]` is
//! closed with the power-law tail `x₀ g(x₀) / (1 − β)` where `g ~ x^{-β}`.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Relative cut-off of the dyadic decomposition.
pub const TAIL_RATIO: f64 = 1e-12;

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    let (k, err) = gk15(f, a, b);
    if !k.is_finite() {
        return Err(Error::Quadrature(format!("non-finite integrand on [{a:e}, {b:e}]")));
    }
    if err <= tol.max(1e-15 * k.abs()) {
        return Ok(k);
    }
    if depth == 0 {
        return Err(Error::Quadrature(format!(
            "no convergence on [{a:e}, {b:e}] (error estimate {err:e})"
        )));
    }
    let m = 0.5 * (a + b);
    Ok(adapt(f, a, m, 0.5 * tol, depth - 1)? + adapt(f, m, b, 0.5 * tol, depth - 1)?)
}

/// Integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    adapt(&f, a, b, tol, 40)
}

/// `∫₀^ℓ g` where `g(x) ~ x^{-β(x)}` near the origin with `β(x₀) = tail_exponent(x₀) < 1`.
///
/// `rel_tol` applies to the total.
pub fn integrate_singular<F, B>(g: F, ell: f64, tail_exponent: B, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
{
    let x0 = ell * TAIL_RATIO;
    let beta = tail_exponent(x0);
    if !(beta < 1.0) {
        return Err(Error::Quadrature(format!(
            "integrand decays like x^-{beta} at the origin, not integrable"
        )));
    }
    let tail = x0 * g(x0) / (1.0 - beta);
    // Rough scale for the absolute tolerance: first dyadic piece.
    let scale = gk15(&g, 0.5 * ell, ell).0.abs().max(tail.abs()).max(f64::MIN_POSITIVE);
    let pieces = (1.0 / TAIL_RATIO).log2().ceil() as usize;
    let tol = rel_tol * scale / pieces as f64;
    let mut total = tail;
    let mut b = ell;
    for k in 0..pieces {
        let a = if k + 1 == pieces { x0 } else { 0.5 * b };
        total += adapt(&g, a, b, tol, 30)?;
        b = a;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn smooth_polynomial_exact() {
        let v = integrate(|x| 3.0 * x * x + 1.0, 0.0, 2.0, 1e-14).unwrap();
        assert_relative_eq!(v, 10.0, max_relative = 1e-14);
    }

    #[test]
    fn oscillatory() {
        let v = integrate(|x: f64| (10.0 * x).cos(), 0.0, 1.0, 1e-13).unwrap();
        assert_relative_eq!(v, 10f64.sin() / 10.0, max_relative = 1e-11);
    }

    #[test]
    fn power_singularities() {
        for &beta in &[0.0, 0.25, 0.5, 0.75, 0.9, 0.995] {
            let v = integrate_singular(|x: f64| x.powf(-beta), 2.0, |_| beta, 1e-12).unwrap();
            let exact = 2f64.powf(1.0 - beta) / (1.0 - beta);
            assert_relative_eq!(v, exact, max_relative = 1e-10);
        }
    }

    #[test]
    fn mixed_singularity() {
        // x^{-1/2}(1 + x): tail exponent tends to 1/2.
        let v = integrate_singular(
            |x: f64| (1.0 + x) / x.sqrt(),
            1.0,
            |x| 0.5 - x / (1.0 + x),
            1e-12,
        )
        .unwrap();
        assert_relative_eq!(v, 2.0 + 2.0 / 3.0, max_relative = 1e-10);
    }

    #[test]
    fn rejects_non_integrable() {
        assert!(integrate_singular(|x: f64| 1.0 / x, 1.0, |_| 1.0, 1e-10).is_err());
    }
}

//! Degenerate stiffness coefficients vanishing at the clamped-free origin.
//!
//! A coefficient `a` is admissible when it is positive on `(0, ℓ]` and its
//! degeneracy exponent `μ_a = sup x|a'(x)|/a(x)` stays below 2.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest sample used by sup computations, relative to `ℓ`.
pub const MIN_SAMPLE_RATIO: f64 = 1e-10;

/// Anything that can be evaluated together with its derivative.
pub trait Coefficient {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;

    /// Local exponent `x a'(x) / a(x)`.
    fn local_exponent(&self, x: f64) -> f64 {
        x * self.derivative(x) / self.value(x)
    }
}

/// Coefficient defined by a pair of closures, mostly useful in tests.
pub struct FnCoefficient<F, D> {
    pub f: F,
    pub df: D,
}

impl<F, D> Coefficient for FnCoefficient<F, D>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn derivative(&self, x: f64) -> f64 {
        (self.df)(x)
    }
}

/// Built-in analytic families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileFamily {
    /// `scale · x^theta`
    Power {
        theta: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `scale · x^theta · p(x)` with `p(x) = Σ poly[k] x^k` positive on `[0, ℓ]`.
    PowerTimesPoly {
        theta: f64,
        #[serde(default = "one")]
        scale: f64,
        poly: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)
}

fn horner_deriv(c: &[f64], x: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, &ck)| acc * x + k as f64 * ck)
}

fn xpow(x: f64, theta: f64) -> f64 {
    if theta == 0.0 {
        1.0
    } else {
        x.powf(theta)
    }
}

impl Coefficient for ProfileFamily {
    fn value(&self, x: f64) -> f64 {
        match self {
            ProfileFamily::Power { theta, scale } => scale * xpow(x, *theta),
            ProfileFamily::PowerTimesPoly { theta, scale, poly } => {
                scale * xpow(x, *theta) * horner(poly, x)
            }
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match self {
            ProfileFamily::Power { theta, scale } => {
                if *theta == 0.0 {
                    0.0
                } else {
                    scale * theta * x.powf(theta - 1.0)
                }
            }
            ProfileFamily::PowerTimesPoly { theta, scale, poly } => {
                let p = horner(poly, x);
                let dp = horner_deriv(poly, x);
                let head = if *theta == 0.0 {
                    0.0
                } else {
                    theta * x.powf(theta - 1.0) * p
                };
                scale * (head + xpow(x, *theta) * dp)
            }
        }
    }

    fn local_exponent(&self, x: f64) -> f64 {
        // Avoids x^(θ-1) overflow close to the origin.
        match self {
            ProfileFamily::Power { theta, .. } => *theta,
            ProfileFamily::PowerTimesPoly { theta, poly, .. } => {
                theta + x * horner_deriv(poly, x) / horner(poly, x)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DegeneracyKind {
    Weak,
    Strong,
}

impl DegeneracyKind {
    /// `μ = 1` is Strong.
    pub fn classify(mu: f64) -> Self {
        if mu < 1.0 {
            DegeneracyKind::Weak
        } else {
            DegeneracyKind::Strong
        }
    }
}

/// A validated coefficient in the admissible class on `[0, ℓ]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyProfile {
    pub family: ProfileFamily,
    pub ell: f64,
    pub mu: f64,
    pub kind: DegeneracyKind,
    pub sup_norm: f64,
}

impl Coefficient for DegeneracyProfile {
    fn value(&self, x: f64) -> f64 {
        self.family.value(x)
    }
    fn derivative(&self, x: f64) -> f64 {
        self.family.derivative(x)
    }
    fn local_exponent(&self, x: f64) -> f64 {
        self.family.local_exponent(x)
    }
}

impl DegeneracyProfile {
    pub fn new(family: ProfileFamily, ell: f64) -> Result<Self> {
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::InvalidProfile(format!("ell must be positive, got {ell}")));
        }
        let (theta, scale) = match &family {
            ProfileFamily::Power { theta, scale } => (*theta, *scale),
            ProfileFamily::PowerTimesPoly { theta, scale, poly } => {
                if poly.is_empty() {
                    return Err(Error::InvalidProfile("empty polynomial factor".into()));
                }
                (*theta, *scale)
            }
        };
        if !(0.0..2.0).contains(&theta) {
            return Err(Error::InvalidProfile(format!(
                "theta must lie in [0, 2), got {theta}"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidProfile(format!("scale must be positive, got {scale}")));
        }
        let (mu, sup_norm) = match &family {
            ProfileFamily::Power { .. } => (theta, scale * xpow(ell, theta)),
            ProfileFamily::PowerTimesPoly { poly, .. } => {
                // p must stay positive on the closed interval, origin included.
                let n = 4096;
                for j in 0..=n {
                    let x = ell * j as f64 / n as f64;
                    let p = horner(poly, x);
                    if !(p > 0.0) {
                        return Err(Error::NonPositiveCoefficient { x, value: p });
                    }
                }
                // x a'/a → θ at the origin; sampling alone only approaches it.
                let mu = estimate_mu(&family, ell, 2000)?.max(theta);
                (mu, sampled_sup(&family, ell))
            }
        };
        if mu >= 2.0 {
            return Err(Error::InvalidProfile(format!("degeneracy exponent {mu} is not below 2")));
        }
        Ok(Self {
            family,
            ell,
            mu,
            kind: DegeneracyKind::classify(mu),
            sup_norm,
        })
    }

    pub fn at_ell(&self) -> f64 {
        self.value(self.ell)
    }
}

/// `scale · x^theta` on `[0, ell]`.
pub fn make_power_profile(theta: f64, scale: f64, ell: f64) -> Result<DegeneracyProfile> {
    DegeneracyProfile::new(ProfileFamily::Power { theta, scale }, ell)
}

fn sampled_sup(a: &dyn Coefficient, ell: f64) -> f64 {
    let n = 4096;
    let mut best = 0.0f64;
    let mut arg = 0;
    for j in 0..=n {
        let v = a.value(ell * j as f64 / n as f64).abs();
        if v > best {
            best = v;
            arg = j;
        }
    }
    // Golden-section polish around the best sample.
    let h = ell / n as f64;
    let (mut lo, mut hi) = (((arg as f64) - 1.0).max(0.0) * h, ((arg as f64 + 1.0) * h).min(ell));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if a.value(m1).abs() < a.value(m2).abs() {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    best.max(a.value(0.5 * (lo + hi)).abs())
}

/// Geometric sampling of `(0, ell]` from `ell · 1e-10` up to `ell`.
pub fn geometric_samples(ell: f64, samples: usize) -> impl Iterator<Item = f64> {
    let n = samples.max(2);
    let log_r = MIN_SAMPLE_RATIO.ln() / (n - 1) as f64;
    (0..n).map(move |j| {
        if j == 0 {
            ell
        } else {
            ell * (log_r * j as f64).exp()
        }
    })
}

/// Sampled `sup x|a'(x)|/a(x)`.
pub fn estimate_mu(a: &dyn Coefficient, ell: f64, samples: usize) -> Result<f64> {
    if samples < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 samples, got {samples}")));
    }
    let mut mu = 0.0f64;
    for x in geometric_samples(ell, samples) {
        let v = a.value(x);
        if !(v > 0.0) {
            return Err(Error::NonPositiveCoefficient { x, value: v });
        }
        mu = mu.max((x * a.derivative(x)).abs() / v);
    }
    Ok(mu)
}

/// Findings of [`check_class_a`]; nothing is rejected, everything is reported.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassAReport {
    pub samples: usize,
    pub mu: f64,
    pub positive: bool,
    /// First sampled point where `a(x) ≤ 0`, if any.
    pub nonpositive_at: Option<f64>,
    pub value_at_origin: f64,
    pub vanishes_at_origin: bool,
    pub mu_below_two: bool,
    /// `min_x [a(x) ℓ^μ − a(ℓ) x^μ]`.
    pub lower_bound_margin: f64,
    pub lower_bound_holds: bool,
    pub in_class: bool,
}

pub fn check_class_a(a: &dyn Coefficient, ell: f64, samples: usize) -> ClassAReport {
    let samples = samples.max(100);
    let mut mu = 0.0f64;
    let mut nonpositive_at = None;
    let xs: Vec<f64> = geometric_samples(ell, samples)
        .chain((1..samples).map(|j| ell * j as f64 / samples as f64))
        .collect();
    for &x in &xs {
        let v = a.value(x);
        if !(v > 0.0) {
            nonpositive_at.get_or_insert(x);
            continue;
        }
        let r = (x * a.derivative(x)).abs() / v;
        if r.is_finite() {
            mu = mu.max(r);
        } else {
            mu = f64::INFINITY;
        }
    }
    let a_ell = a.value(ell);
    let value_at_origin = a.value(0.0);
    let vanishes_at_origin = value_at_origin == 0.0;
    let mut margin = f64::INFINITY;
    if mu.is_finite() {
        for &x in &xs {
            margin = margin.min(a.value(x) * ell.powf(mu) - a_ell * x.powf(mu));
        }
    } else {
        margin = f64::NEG_INFINITY;
    }
    let positive = nonpositive_at.is_none();
    let mu_below_two = mu < 2.0;
    let lower_bound_holds = margin >= -1e-12 * a_ell.abs();
    let origin_ok = mu == 0.0 || vanishes_at_origin;
    ClassAReport {
        samples,
        mu,
        positive,
        nonpositive_at,
        value_at_origin,
        vanishes_at_origin,
        mu_below_two,
        lower_bound_margin: margin,
        lower_bound_holds,
        in_class: positive && mu_below_two && lower_bound_holds && origin_ok,
    }
}

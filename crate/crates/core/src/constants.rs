//! Closed-form Poincaré, observability and decay constants of a [`BeamModel`].

use serde::{Deserialize, Serialize};

use crate::coefficients::{Coefficient, DegeneracyKind, DegeneracyProfile};
use crate::error::{Error, Result};
use crate::model::{BeamModel, BoundaryCondition};
use crate::quadrature::integrate_singular;

/// Relative tolerance of every L¹ and travel-time quadrature.
pub const QUAD_TOL: f64 = 1e-10;

/// An observability time threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Threshold {
    Explicit { value: f64 },
    /// Observable for large enough `T`, without an explicit bound.
    NoClosedForm { reason: String },
    Unavailable { reason: String },
}

impl Threshold {
    pub fn value(&self) -> Option<f64> {
        match self {
            Threshold::Explicit { value } => Some(*value),
            _ => None,
        }
    }
}

/// Which `C_BC` formula to use in the direct inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CbcVariant {
    /// `4C_F + 2T(1+μ) + 2C_h T`
    #[default]
    Derived,
    /// `4C_F + 2(1+μ) + 2C_h T`
    Stated,
}

fn m4(mu: f64) -> f64 {
    4f64.min(1.0 / (2.0 - mu))
}

fn m2(mu: f64) -> f64 {
    2f64.min(1.0 / (2.0 - mu))
}

/// Dirichlet Poincaré constant `C_{D,K,EI}`.
pub fn poincare_dirichlet(m: &BeamModel) -> f64 {
    let (l, kl, el) = (m.ell, m.k_ell(), m.ei_ell());
    let c = m4(m.mu());
    l * l * (1.0 / kl).max(1.0 / el) * c * 2f64.max(1.0 + 2.0 * l * l * m.k.sup_norm / kl * c)
}

/// The two branches `(C̃_N1, C̃_N2)` of the Robin Poincaré constant.
pub fn poincare_robin_parts(m: &BeamModel) -> Result<(f64, f64)> {
    let (gamma, delta) = match m.bc {
        BoundaryCondition::Robin { gamma, delta } => (gamma, delta),
        other => {
            return Err(Error::InvalidArgument(format!(
                "Robin Poincaré constant needs gamma, delta > 0 (boundary is {other:?})"
            )))
        }
    };
    let (l, kl, el) = (m.ell, m.k_ell(), m.ei_ell());
    let c = m2(m.mu());
    let n1 = 2.0 * l * l * (1.0 / kl).max(1.0 / el) * c
        * 2f64.max(1.0 + 2.0 * l * l * m.k.sup_norm / kl * c);
    let n2 = (2.0 * l / gamma).max(8.0 * l.powi(3) * m.k.sup_norm / (delta * kl) * c);
    Ok((n1, n2))
}

/// Robin Poincaré constant `C_{N,K,EI}`.
pub fn poincare_robin(m: &BeamModel) -> Result<f64> {
    poincare_robin_parts(m).map(|(a, b)| a.max(b))
}

fn cf_term(density: f64, a: &DegeneracyProfile, ell: f64) -> f64 {
    let s = (density / a.at_ell()).sqrt();
    if a.mu <= 1.0 {
        ell * s
    } else {
        s * ell.powf(2.0 - a.mu).max(ell.powf(a.mu))
    }
}

/// `C_F`, using each coefficient's own exponent in the strong branch.
pub fn c_f(m: &BeamModel) -> f64 {
    cf_term(m.rho, &m.k, m.ell).max(cf_term(m.i_rho, &m.ei, m.ell))
}

pub fn c_h(m: &BeamModel) -> f64 {
    (m.ell * (m.rho / m.i_rho).sqrt())
        .max((m.k.sup_norm / m.ei_ell()).sqrt() * 1f64.max(m.ell * m.ell))
}

fn density_factor(m: &BeamModel) -> f64 {
    m.rho.sqrt().max(m.i_rho.sqrt())
}

pub fn c_dl(m: &BeamModel) -> f64 {
    density_factor(m) * poincare_dirichlet(m).sqrt()
}

pub fn c_nl(m: &BeamModel) -> Result<f64> {
    Ok(density_factor(m) * poincare_robin(m)?.sqrt())
}

/// `2 − μ − 2C_h`, positive iff the smallness condition holds.
pub fn observability_bracket(m: &BeamModel) -> f64 {
    2.0 - m.mu() - 2.0 * c_h(m)
}

/// `2 − μ − C_h`, used by the stabilization estimate.
pub fn decay_bracket(m: &BeamModel) -> f64 {
    2.0 - m.mu() - c_h(m)
}

pub fn smallness_ok(m: &BeamModel) -> bool {
    observability_bracket(m) > 0.0
}

pub fn c_bc(m: &BeamModel, t: f64, variant: CbcVariant) -> f64 {
    let mu = m.mu();
    let mid = match variant {
        CbcVariant::Derived => 2.0 * t * (1.0 + mu),
        CbcVariant::Stated => 2.0 * (1.0 + mu),
    };
    4.0 * c_f(m) + mid + 2.0 * c_h(m) * t
}

fn singular_integral(a: &DegeneracyProfile, power: f64) -> Result<f64> {
    // ∫ a^{-power}; near 0 the integrand behaves like x^{-power·μ_loc}.
    integrate_singular(
        |x| a.value(x).powf(-power),
        a.ell,
        |x| power * a.local_exponent(x),
        QUAD_TOL,
    )
}

/// `‖1/a‖_{L¹(0,ℓ)}`; finite only under weak degeneracy.
pub fn inverse_l1(a: &DegeneracyProfile) -> Result<f64> {
    if a.kind == DegeneracyKind::Strong {
        return Err(Error::Unsupported(format!(
            "1/a is not integrable for degeneracy exponent {}",
            a.mu
        )));
    }
    singular_integral(a, 1.0)
}

/// `∫₀^ℓ √(density / a)`.
pub fn travel_time(density: f64, a: &DegeneracyProfile) -> Result<f64> {
    Ok(density.sqrt() * singular_integral(a, 0.5)?)
}

/// `(T₁, T₂)` by quadrature.
pub fn travel_times(m: &BeamModel) -> Result<(f64, f64)> {
    Ok((travel_time(m.rho, &m.k)?, travel_time(m.i_rho, &m.ei)?))
}

/// Travel time for `a = scale · x^mu`.
pub fn power_law_travel_time(density: f64, scale: f64, mu: f64, ell: f64) -> f64 {
    (density / scale).sqrt() * 2.0 / (2.0 - mu) * ell.powf((2.0 - mu) / 2.0)
}

/// `(η₁, η₂)` of the Robin inverse inequality.
pub fn eta(m: &BeamModel) -> Result<(f64, f64)> {
    let (gamma, delta) = match m.bc {
        BoundaryCondition::Robin { gamma, delta } => (gamma, delta),
        _ => return Err(Error::InvalidArgument("eta needs a Robin boundary".into())),
    };
    let b = observability_bracket(m);
    Ok((gamma / m.k_ell() + b, delta / m.ei_ell() + b))
}

fn robin_boundary_term(m: &BeamModel) -> Result<f64> {
    let (gamma, delta) = m.robin_coefficients();
    let (e1, e2) = eta(m)?;
    Ok(4.0 * (e1 * gamma * inverse_l1(&m.k)?).max(e2 * delta * inverse_l1(&m.ei)?))
}

/// `C_w` at horizon `T`; nonpositive means "not yet observable".
pub fn robin_observability_constant(m: &BeamModel, t: f64) -> Result<f64> {
    let (gamma, delta) = m.robin_coefficients();
    let (e1, e2) = eta(m)?;
    let num = observability_bracket(m) * t
        - 4.0 * c_f(m)
        - m.mu() * c_nl(m)?
        - robin_boundary_term(m)?;
    let den = 1.0 + 2.0 / m.ell * (e1 * gamma / m.rho).max(e2 * delta / m.i_rho);
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservabilityTimes {
    pub dirichlet: Threshold,
    pub robin: Threshold,
    pub neumann: Threshold,
}

pub fn observability_times(m: &BeamModel) -> ObservabilityTimes {
    let b = observability_bracket(m);
    if b <= 0.0 {
        let reason = format!("smallness fails: mu + 2 C_h = {} >= 2", 2.0 - b);
        let un = Threshold::Unavailable { reason };
        return ObservabilityTimes { dirichlet: un.clone(), robin: un.clone(), neumann: un };
    }
    let mu = m.mu();
    let cf4 = 4.0 * c_f(m);
    let dirichlet = Threshold::Explicit { value: (cf4 + mu * c_dl(m)) / b };
    let cnl = c_nl(m).ok();
    let robin = if !matches!(m.bc, BoundaryCondition::Robin { .. }) {
        Threshold::Unavailable { reason: "needs Robin gamma, delta > 0".into() }
    } else if m.k.kind == DegeneracyKind::Strong || m.ei.kind == DegeneracyKind::Strong {
        Threshold::NoClosedForm {
            reason: "strong degeneracy: observable for T large enough, no explicit bound".into(),
        }
    } else {
        match robin_boundary_term(m) {
            Ok(bt) => Threshold::Explicit { value: (cf4 + mu * cnl.unwrap_or(0.0) + bt) / b },
            Err(e) => Threshold::Unavailable { reason: e.to_string() },
        }
    };
    let neumann = match cnl {
        _ if mu == 0.0 => Threshold::Explicit { value: cf4 / b },
        Some(c) => Threshold::Explicit { value: (cf4 + mu * c) / b },
        None => Threshold::Unavailable {
            reason: "C_NL needs gamma, delta > 0 when mu > 0".into(),
        },
    };
    ObservabilityTimes { dirichlet, robin, neumann }
}

/// Intermediate quantities of the decay-rate construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayChain {
    pub eta11: f64,
    pub eta12: f64,
    pub eta21: f64,
    pub eta22: f64,
    pub c2: f64,
    pub c3: f64,
    pub omega: f64,
    pub c_tilde: f64,
    pub kappa: f64,
}

/// Guaranteed exponential decay rate `κ` under velocity feedback.
///
/// The boundary weights come from splitting each mixed trace product of the
/// feedback multiplier identity with `ab ≤ (a² + b²)/2`:
/// `α c₁ w_t w ≤ α(|c₁|/2) w_t² + γ(α|c₁|/(2γ)) w²`, `c₁ = 2ℓγ/K(ℓ) − μ/2`,
/// and the same for `ψ` with `β`, `δ`, `EI(ℓ)`. Collecting terms gives
/// `η₁₁ = ℓ(ρ + α²/K(ℓ))/α + |c₁|/2`,
/// `η₂₁ = ℓγ/K(ℓ) − μ/2 + (2 − μ − 2C_h) + α|c₁|/(2γ)` (clamped at 0).
pub fn decay_chain(m: &BeamModel) -> Result<DecayChain> {
    let (alpha, beta) = m.gains();
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "decay rate needs alpha, beta > 0, got ({alpha}, {beta})"
        )));
    }
    let (gamma, delta) = match m.bc {
        BoundaryCondition::Robin { gamma, delta } => (gamma, delta),
        _ => return Err(Error::InvalidArgument("decay rate needs gamma, delta > 0".into())),
    };
    if !smallness_ok(m) {
        return Err(Error::InvalidArgument(format!(
            "smallness fails: mu + 2 C_h = {}",
            m.mu() + 2.0 * c_h(m)
        )));
    }
    let (l, mu, kl, el) = (m.ell, m.mu(), m.k_ell(), m.ei_ell());
    let (rho, ir) = (m.rho, m.i_rho);
    let b_obs = observability_bracket(m);
    let b_dec = decay_bracket(m);
    let c1 = 2.0 * l * gamma / kl - mu / 2.0;
    let c2m = 2.0 * l * delta / el - mu / 2.0;
    let eta11 = l * (rho + alpha * alpha / kl) / alpha + c1.abs() / 2.0;
    let eta12 = l * (ir + beta * beta / el) / beta + c2m.abs() / 2.0;
    let eta21 = (l * gamma / kl - mu / 2.0 + b_obs + alpha * c1.abs() / (2.0 * gamma)).max(0.0);
    let eta22 = (l * delta / el - mu / 2.0 + b_obs + beta * c2m.abs() / (2.0 * delta)).max(0.0);
    let e2 = eta21.max(eta22);
    if e2 == 0.0 {
        return Err(Error::InvalidArgument("both boundary weights vanish".into()));
    }
    let cn = poincare_robin(m)?;
    let cnl = c_nl(m)?;
    let rmax = rho.max(ir);
    let c2 = rmax * (1.0 / (gamma * gamma)).max(1.0 / (delta * delta)) * (1.0 / alpha).max(1.0 / beta) * cn;
    let c3 = 1.0 + 2.0 * rmax * (1.0 / gamma.powi(3)).max(1.0 / delta.powi(3));
    let omega = b_dec / (2.0 * e2 * (1.0 + 2.0 * (alpha / gamma.powi(3)).max(beta / delta.powi(3))));
    let c_tilde = e2 * (1.0 + c2) / omega
        + 2.0 * e2 * c3
        + eta11.max(eta12)
        + 2.0 * (2.0 * c_f(m) + mu / 2.0 * cnl);
    Ok(DecayChain {
        eta11,
        eta12,
        eta21,
        eta22,
        c2,
        c3,
        omega,
        c_tilde,
        kappa: b_dec / (2.0 * c_tilde),
    })
}

pub fn decay_rate(m: &BeamModel) -> Result<f64> {
    decay_chain(m).map(|c| c.kappa)
}

/// Every named constant for one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsReport {
    pub mu: f64,
    pub mu_k: f64,
    pub mu_ei: f64,
    pub c_d: f64,
    pub c_n: Option<f64>,
    pub c_f: f64,
    pub c_h: f64,
    pub c_dl: f64,
    pub c_nl: Option<f64>,
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    /// `C_w` evaluated at `c_w_horizon`.
    pub c_w: Option<f64>,
    pub c_w_horizon: Option<f64>,
    pub observability_bracket: f64,
    pub decay_bracket: f64,
    pub smallness_ok: bool,
    pub t_dirichlet: Threshold,
    pub t_robin: Threshold,
    pub t_neumann: Threshold,
    pub t1: f64,
    pub t2: f64,
    pub kappa: Option<f64>,
    pub diagnostics: Vec<String>,
}

impl ConstantsReport {
    /// `horizon` is where `C_w` is evaluated; defaults to 1.5× the Robin threshold.
    pub fn compute(m: &BeamModel, horizon: Option<f64>) -> Result<Self> {
        let mut diagnostics = Vec::new();
        let mut note = |e: Error| diagnostics.push(e.to_string());
        let c_n = poincare_robin(m).map_err(&mut note).ok();
        let c_nl = c_nl(m).ok();
        let (eta1, eta2) = match eta(m) {
            Ok((a, b)) => (Some(a), Some(b)),
            Err(_) => (None, None),
        };
        let times = observability_times(m);
        let c_w_horizon = horizon.or_else(|| times.robin.value().map(|t| 1.5 * t));
        let c_w = match c_w_horizon {
            Some(t) => robin_observability_constant(m, t).map_err(&mut note).ok(),
            None => None,
        };
        let kappa = if m.feedback.is_some() {
            decay_rate(m).map_err(&mut note).ok()
        } else {
            None
        };
        let (t1, t2) = travel_times(m)?;
        for th in [&times.dirichlet, &times.robin, &times.neumann] {
            if let Threshold::Unavailable { reason } | Threshold::NoClosedForm { reason } = th {
                if !diagnostics.contains(reason) {
                    diagnostics.push(reason.clone());
                }
            }
        }
        Ok(Self {
            mu: m.mu(),
            mu_k: m.k.mu,
            mu_ei: m.ei.mu,
            c_d: poincare_dirichlet(m),
            c_n,
            c_f: c_f(m),
            c_h: c_h(m),
            c_dl: c_dl(m),
            c_nl,
            eta1,
            eta2,
            c_w,
            c_w_horizon,
            observability_bracket: observability_bracket(m),
            decay_bracket: decay_bracket(m),
            smallness_ok: smallness_ok(m),
            t_dirichlet: times.dirichlet,
            t_robin: times.robin,
            t_neumann: times.neumann,
            t1,
            t2,
            kappa,
            diagnostics,
        })
    }

    /// Threshold matching the model's own boundary setup.
    pub fn threshold_for(&self, bc: &BoundaryCondition) -> &Threshold {
        match bc {
            BoundaryCondition::Dirichlet => &self.t_dirichlet,
            BoundaryCondition::Robin { .. } => &self.t_robin,
            BoundaryCondition::Neumann => &self.t_neumann,
        }
    }
}

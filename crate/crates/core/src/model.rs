//! Physical beam model and its boundary setup at `x = ℓ`.

use serde::{Deserialize, Serialize};

use crate::coefficients::{Coefficient, DegeneracyKind, DegeneracyProfile, ProfileFamily};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundaryCondition {
    Dirichlet,
    Robin { gamma: f64, delta: f64 },
    Neumann,
}

/// Velocity feedback `α w_t(ℓ)`, `β ψ_t(ℓ)` added to the boundary fluxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Feedback {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamModel {
    pub rho: f64,
    pub i_rho: f64,
    pub ell: f64,
    pub k: DegeneracyProfile,
    pub ei: DegeneracyProfile,
    pub bc: BoundaryCondition,
    pub feedback: Option<Feedback>,
}

impl BeamModel {
    pub fn new(
        rho: f64,
        i_rho: f64,
        ell: f64,
        k: ProfileFamily,
        ei: ProfileFamily,
        bc: BoundaryCondition,
        feedback: Option<Feedback>,
    ) -> Result<Self> {
        for (name, v) in [("rho", rho), ("i_rho", i_rho), ("ell", ell)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidModel(format!("{name} must be positive, got {v}")));
            }
        }
        let k = DegeneracyProfile::new(k, ell)?;
        let ei = DegeneracyProfile::new(ei, ell)?;
        match bc {
            BoundaryCondition::Robin { gamma, delta } => {
                if !(gamma > 0.0 && delta > 0.0 && gamma.is_finite() && delta.is_finite()) {
                    return Err(Error::InvalidModel(format!(
                        "Robin needs gamma, delta > 0, got ({gamma}, {delta})"
                    )));
                }
            }
            BoundaryCondition::Neumann => {
                if k.kind == DegeneracyKind::Strong || ei.kind == DegeneracyKind::Strong {
                    return Err(Error::Unsupported(
                        "Neumann conditions with strong degeneracy need a quotient space".into(),
                    ));
                }
            }
            BoundaryCondition::Dirichlet => {}
        }
        if let Some(fb) = feedback {
            if !(fb.alpha >= 0.0 && fb.beta >= 0.0) {
                return Err(Error::InvalidModel(format!(
                    "feedback gains must be nonnegative, got ({}, {})",
                    fb.alpha, fb.beta
                )));
            }
            if bc == BoundaryCondition::Dirichlet {
                return Err(Error::InvalidModel(
                    "velocity feedback acts on a free end, not a clamped one".into(),
                ));
            }
        }
        Ok(Self { rho, i_rho, ell, k, ei, bc, feedback })
    }

    /// `ρ = h`, `K = h x^θ`, `I_ρ = 1`, `EI = x^θ` on `[0, 1]`: `C_h = √h`.
    pub fn thin_beam(
        h: f64,
        theta: f64,
        bc: BoundaryCondition,
        feedback: Option<Feedback>,
    ) -> Result<Self> {
        Self::new(
            h,
            1.0,
            1.0,
            ProfileFamily::Power { theta, scale: h },
            ProfileFamily::Power { theta, scale: 1.0 },
            bc,
            feedback,
        )
    }

    pub fn mu(&self) -> f64 {
        self.k.mu.max(self.ei.mu)
    }

    /// `(γ, δ)`; zero unless Robin.
    pub fn robin_coefficients(&self) -> (f64, f64) {
        match self.bc {
            BoundaryCondition::Robin { gamma, delta } => (gamma, delta),
            _ => (0.0, 0.0),
        }
    }

    pub fn gains(&self) -> (f64, f64) {
        self.feedback.map_or((0.0, 0.0), |f| (f.alpha, f.beta))
    }

    pub fn k_ell(&self) -> f64 {
        self.k.value(self.ell)
    }

    pub fn ei_ell(&self) -> f64 {
        self.ei.value(self.ell)
    }

    /// Same model with a different boundary setup and no feedback.
    pub fn with_bc(&self, bc: BoundaryCondition) -> Result<Self> {
        Self::new(
            self.rho,
            self.i_rho,
            self.ell,
            self.k.family.clone(),
            self.ei.family.clone(),
            bc,
            None,
        )
    }

    /// Weak shear/bending stiffness clamps the matching field at the origin.
    pub fn clamped_at_origin(&self) -> (bool, bool) {
        (self.k.kind == DegeneracyKind::Weak, self.ei.kind == DegeneracyKind::Weak)
    }
}

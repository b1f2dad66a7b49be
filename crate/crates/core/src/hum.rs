//! Null controls by the Hilbert uniqueness method on the discrete system.
//!
//! For adjoint final data `Y = (Y_u, Y_v)` at `T`, the homogeneous solution
//! `φ` is run backward, its boundary observation `g_k = W Bᵀ φ_k` is used as
//! control for a forward run `z` from rest, and `Λ Y = Pᵀ z(T)` with
//! `P = [[0, −M], [M, 0]]`. The midpoint scheme satisfies
//! `z(T)ᵀ P φ(T) = Σ_k dt ḡ_kᵀ Bᵀ φ̄_k` exactly, so `Λ` is symmetric and
//! `⟨Λ Y, Y⟩ = Σ_k dt (Bᵀφ̄_k)ᵀ W (Bᵀφ̄_k) ≥ 0`.
//!
//! `W = diag(1/K(ℓ), 1/EI(ℓ))` for clamped ends, where `Bᵀφ` is the discrete
//! boundary flux, and `W = I` for Robin/Neumann ends, where `Bᵀφ = φ(ℓ)`.
//! The dual pairing of final states goes through `M`, the pivot identification.

use serde::Serialize;

use crate::banded::BandCholesky;
use crate::constants;
use crate::discretization::Discretization;
use crate::dynamics::{energies, step_count, ControlSignal, State, Stepper};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preconditioner {
    #[default]
    None,
    /// `diag(M, M)⁻¹`
    Mass,
    /// `diag(S, M)⁻¹`, the inverse of the energy form of the adjoint data.
    Energy,
    /// Block inverse of `Λ` in the eigenbasis `Φ` of `(S, M)`. Each discrete
    /// mode evolves by an exact rotation of angle `θ_j = 2 atan(ω_j dt/2)` per
    /// step, so the Gram entries between modes are closed-form sums; they are
    /// kept exactly within clusters of modes closer than `π/T` in frequency
    /// and dropped between clusters.
    Modal,
}

/// Relative floor added to each modal block, for modes the boundary barely sees.
const MODAL_FLOOR: f64 = 1e-12;

/// Cluster of modes `start..start + size`; `inv` acts on `(u-coefficients, v-coefficients)`.
struct ModalBlock {
    start: usize,
    size: usize,
    inv: nalgebra::DMatrix<f64>,
}

enum Precond {
    Identity,
    Diagonal(Vec<f64>),
    Energy(BandCholesky),
    Modal { phi: Vec<Vec<f64>>, omega: Vec<f64>, blocks: Vec<ModalBlock> },
}

impl Precond {
    fn apply(&self, mass: &[f64], r: &[f64]) -> Vec<f64> {
        let n = mass.len();
        match self {
            Self::Identity => r.to_vec(),
            Self::Diagonal(d) => r.iter().zip(d).map(|(x, d)| x / d).collect(),
            Self::Energy(chol) => {
                let mut top = r[..n].to_vec();
                chol.solve_in_place(&mut top);
                top.into_iter().chain(r[n..].iter().zip(mass).map(|(x, m)| x / m)).collect()
            }
            Self::Modal { phi, omega, blocks } => {
                let cu: Vec<f64> = phi.iter().map(|f| dot(f, &r[..n])).collect();
                let cv: Vec<f64> = phi.iter().map(|f| dot(f, &r[n..])).collect();
                let (mut xu, mut xv) = (vec![0.0; n], vec![0.0; n]);
                for b in blocks {
                    let (j0, s) = (b.start, b.size);
                    let x = nalgebra::DVector::from_fn(2 * s, |p, _| {
                        if p < s { cu[j0 + p] } else { omega[j0 + p - s] * cv[j0 + p - s] }
                    });
                    let y = &b.inv * x;
                    for p in 0..s {
                        xu[j0 + p] = y[p];
                        xv[j0 + p] = omega[j0 + p] * y[s + p];
                    }
                }
                let mut out = vec![0.0; 2 * n];
                for (j, f) in phi.iter().enumerate() {
                    for i in 0..n {
                        out[i] += xu[j] * f[i];
                        out[n + i] += xv[j] * f[i];
                    }
                }
                out
            }
        }
    }
}

/// Iterations without a new best residual before CG is declared stagnant.
pub const STAGNATION_WINDOW: usize = 50;

#[derive(Debug, Clone)]
pub struct HumProblem<'a> {
    pub disc: &'a Discretization,
    pub initial: State,
    pub horizon: f64,
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
    /// Iterations without a new best residual before giving up.
    pub stagnation_window: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct HumResult {
    #[serde(skip)]
    pub adjoint_final: State,
    #[serde(skip)]
    pub controls: ControlSignal,
    pub iterations: usize,
    pub converged: bool,
    pub stagnated: bool,
    /// `‖Λ Y − b‖ / ‖b‖` in the preconditioner norm, recomputed after the solve.
    pub gram_residual: f64,
    pub residual_history: Vec<f64>,
    pub final_energy: f64,
    pub initial_energy: f64,
    pub final_energy_ratio: f64,
    pub control_norm_sq: f64,
    /// Smallest Rayleigh quotient `⟨Λp, p⟩/‖p‖²` seen along the search directions.
    pub spectral_bound: f64,
    /// Extreme Ritz values of `P⁻¹Λ` from the CG coefficients.
    pub ritz_range: [f64; 2],
    /// `‖ΛY − b‖_{P⁻¹} / √θ_min`: estimated `‖Y − Y*‖_Λ`, which is the control
    /// error in the norm `Σ dt gᵀW⁻¹g`.
    pub error_estimate: f64,
    pub warnings: Vec<String>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl<'a> HumProblem<'a> {
    pub fn new(disc: &'a Discretization, initial: State, horizon: f64, dt: f64) -> Self {
        Self { disc, initial, horizon, dt, tol: 1e-8, max_iter: 2000, preconditioner: Preconditioner::None, stagnation_window: STAGNATION_WINDOW }
    }

    /// `(steps, dt)` of the uniform grid on `[0, T]`.
    pub fn grid(&self) -> Result<(usize, f64)> {
        step_count(self.horizon, self.dt)
    }

    fn weights(&self) -> [f64; 2] {
        if self.disc.is_dirichlet() {
            [1.0 / self.disc.model.k_ell(), 1.0 / self.disc.model.ei_ell()]
        } else {
            [1.0, 1.0]
        }
    }

    fn split(&self, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.disc.n_free();
        if y.len() != 2 * n {
            return Err(Error::DimensionMismatch { expected: 2 * n, got: y.len() });
        }
        Ok((y[..n].to_vec(), y[n..].to_vec()))
    }

    /// `Pᵀ z = (M z_v, −M z_u)`.
    fn p_transpose(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let m = &self.disc.mass;
        v.iter().zip(m).map(|(x, m)| m * x).chain(u.iter().zip(m).map(|(x, m)| -m * x)).collect()
    }

    /// `Bᵀ φ_k`, `k = 0..=N`, of the homogeneous solution with final data `y`.
    pub fn observe(&self, y: &[f64]) -> Result<Vec<[f64; 2]>> {
        let (steps, dt) = self.grid()?;
        let (mut u, mut v) = self.split(y)?;
        let mut back = Stepper::new(self.disc, -dt)?;
        let mut obs = Vec::with_capacity(steps + 1);
        obs.push(self.disc.input_adjoint(&u));
        for _ in 0..steps {
            back.step(&mut u, &mut v, [0.0; 2]);
            obs.push(self.disc.input_adjoint(&u));
        }
        obs.reverse();
        Ok(obs)
    }

    /// Controls `g_k = W Bᵀ φ_k` generated by adjoint final data `y`.
    pub fn controls_for(&self, y: &[f64]) -> Result<ControlSignal> {
        let (_, dt) = self.grid()?;
        let w = self.weights();
        let obs = self.observe(y)?;
        Ok(ControlSignal {
            dt,
            f1: obs.iter().map(|o| w[0] * o[0]).collect(),
            f2: obs.iter().map(|o| w[1] * o[1]).collect(),
        })
    }

    /// Final free state of the forward run from `start` under `controls`.
    pub fn forward(&self, start: &State, controls: Option<&ControlSignal>) -> Result<State> {
        let (steps, dt) = self.grid()?;
        let mut fw = Stepper::new(self.disc, dt)?;
        let (mut u, mut v) = (start.u.clone(), start.v.clone());
        for k in 0..steps {
            let gbar = controls.map_or([0.0; 2], |c| {
                let (a, b) = (c.at(k), c.at(k + 1));
                [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
            });
            fw.step(&mut u, &mut v, gbar);
        }
        Ok(State { u, v, t: steps as f64 * dt })
    }

    /// `Λ Y`.
    pub fn gram_apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        let c = self.controls_for(y)?;
        let z = self.forward(&State::zeros(self.disc.n_free()), Some(&c))?;
        Ok(self.p_transpose(&z.u, &z.v))
    }

    /// `Σ_k dt (Bᵀφ̄_k)ᵀ W (Bᵀφ̄_k)` from the backward solve alone.
    pub fn gram_form(&self, y: &[f64]) -> Result<f64> {
        let (_, dt) = self.grid()?;
        let w = self.weights();
        let obs = self.observe(y)?;
        Ok(obs
            .windows(2)
            .map(|p| {
                let m = [0.5 * (p[0][0] + p[1][0]), 0.5 * (p[0][1] + p[1][1])];
                dt * (w[0] * m[0] * m[0] + w[1] * m[1] * m[1])
            })
            .sum())
    }

    /// `b = −Pᵀ z_free(T)`.
    fn rhs(&self) -> Result<Vec<f64>> {
        let z = self.forward(&self.initial, None)?;
        Ok(self.p_transpose(&z.u, &z.v).into_iter().map(|x| -x).collect())
    }

    fn build_precond(&self) -> Result<Precond> {
        let n = self.disc.n_free();
        Ok(match self.preconditioner {
            Preconditioner::None => Precond::Identity,
            Preconditioner::Mass => Precond::Diagonal(self.disc.mass.iter().chain(&self.disc.mass).copied().collect()),
            Preconditioner::Energy => Precond::Energy(self.disc.stiffness.cholesky()?),
            Preconditioner::Modal => {
                let (steps, dt) = self.grid()?;
                let t = steps as f64 * dt;
                let w = self.weights();
                let (vals, phi) = self.disc.eigenmodes(n);
                let omega: Vec<f64> = vals.iter().map(|l| l.max(0.0).sqrt()).collect();
                let theta: Vec<f64> = omega.iter().map(|om| 2.0 * (0.5 * om * dt).atan()).collect();
                let obs: Vec<[f64; 2]> = phi.iter().map(|f| self.disc.input_adjoint(f)).collect();
                let gap = std::f64::consts::PI / t;
                let mut blocks = Vec::new();
                let mut start = 0;
                for k in 1..=n {
                    if k < n && omega[k] - omega[k - 1] < gap {
                        continue;
                    }
                    blocks.push(modal_block(start, k - start, steps, dt, &theta, &obs, w)?);
                    start = k;
                }
                Precond::Modal { phi, omega, blocks }
            }
        })
    }

    fn threshold_warning(&self) -> Option<String> {
        let m = &self.disc.model;
        let th = constants::observability_times(m);
        let t = match m.bc {
            crate::model::BoundaryCondition::Dirichlet => th.dirichlet,
            crate::model::BoundaryCondition::Robin { .. } => th.robin,
            crate::model::BoundaryCondition::Neumann => th.neumann,
        };
        match t.value() {
            Some(v) if self.horizon <= v => Some(format!(
                "horizon {} does not exceed the observability threshold {v}",
                self.horizon
            )),
            Some(_) => None,
            None => Some("no explicit observability threshold for this model".into()),
        }
    }
}

/// Exact discrete Gram of the cluster `start..start + size` in the coordinates
/// `u = Σ a_j φ_j`, `v = Σ ω_j b_j φ_j`: with `m` counting steps back from `T`,
/// the averaged observation of mode `j` is `cos(θ_j/2)(a cos θ_j(m+½) + b sin θ_j(m+½)) β_j`.
fn modal_block(
    start: usize,
    size: usize,
    steps: usize,
    dt: f64,
    theta: &[f64],
    obs: &[[f64; 2]],
    w: [f64; 2],
) -> Result<ModalBlock> {
    let s2 = 2 * size;
    let mut h = nalgebra::DMatrix::<f64>::zeros(s2, s2);
    let mut f = vec![0.0; s2];
    for k in 0..steps {
        let m = k as f64 - steps as f64 + 0.5;
        for p in 0..size {
            let th = theta[start + p];
            let c = (0.5 * th).cos();
            f[p] = c * (th * m).cos();
            f[size + p] = c * (th * m).sin();
        }
        for p in 0..s2 {
            for q in 0..=p {
                h[(p, q)] += dt * f[p] * f[q];
            }
        }
    }
    for p in 0..s2 {
        for q in 0..=p {
            let (bp, bq) = (obs[start + p % size], obs[start + q % size]);
            let v = h[(p, q)] * (w[0] * bp[0] * bq[0] + w[1] * bp[1] * bq[1]);
            h[(p, q)] = v;
            h[(q, p)] = v;
        }
    }
    let top = (0..s2).map(|p| h[(p, p)]).fold(0.0, f64::max);
    for p in 0..s2 {
        h[(p, p)] += MODAL_FLOOR * top;
    }
    let inv = h
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { pivot: start, value: 0.0 })?
        .inverse();
    Ok(ModalBlock { start, size, inv })
}

/// Smallest and largest eigenvalue of the symmetric tridiagonal matrix with
/// diagonal `d` and off-diagonal `e`, by Sturm-sequence bisection.
fn tridiagonal_extremes(d: &[f64], e: &[f64]) -> [f64; 2] {
    let n = d.len();
    if n == 0 {
        return [0.0; 2];
    }
    let off = |i: usize| if i < e.len() { e[i].abs() } else { 0.0 };
    let (mut glo, mut ghi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let r = off(i) + if i > 0 { off(i - 1) } else { 0.0 };
        glo = glo.min(d[i] - r);
        ghi = ghi.max(d[i] + r);
    }
    // eigenvalues below x
    let count = |x: f64| {
        let (mut q, mut c) = (1.0f64, 0usize);
        for i in 0..n {
            let e2 = if i > 0 { e[i - 1] * e[i - 1] } else { 0.0 };
            q = d[i] - x - if i > 0 { e2 / q } else { 0.0 };
            if q == 0.0 {
                q = f64::EPSILON * (ghi - glo).abs().max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                c += 1;
            }
        }
        c
    };
    let kth = |k: usize| {
        let (mut lo, mut hi) = (glo, ghi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    [kth(0), kth(n - 1)]
}

/// Conjugate gradients on `Λ Y = −Pᵀ z_free(T)`, then an independent
/// forward run with the resulting controls.
pub fn solve_null_control(p: &HumProblem) -> Result<HumResult> {
    if !(p.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("CG tolerance must be positive, got {}", p.tol)));
    }
    let n2 = 2 * p.disc.n_free();
    let (steps, dt) = p.grid()?;
    let mut warnings: Vec<String> = p.threshold_warning().into_iter().collect();
    let pc = p.build_precond()?;
    let mass = &p.disc.mass;
    let b = p.rhs()?;
    // Residuals are measured in the norm induced by the preconditioner,
    // `√(rᵀ P⁻¹ r)`; with no preconditioner that is the Euclidean norm.
    let dual_norm = |r: &[f64]| dot(r, &pc.apply(mass, r)).max(0.0).sqrt();
    let bnorm = dual_norm(&b);
    let mut y = vec![0.0; n2];
    let mut history = Vec::new();
    let (mut iterations, mut converged, mut stagnated) = (0, bnorm == 0.0, false);
    let mut spectral = f64::INFINITY;
    let mut lanczos = (Vec::new(), Vec::new());
    if !converged {
        let mut r = b.clone();
        let mut z = pc.apply(mass, &r);
        let mut d = z.clone();
        let mut rz = dot(&r, &z);
        let (mut best, mut best_at) = (1.0f64, 0usize);
        let mut prev: Option<(f64, f64)> = None;
        history.push(1.0);
        while iterations < p.max_iter {
            let ad = p.gram_apply(&d)?;
            let dad = dot(&d, &ad);
            spectral = spectral.min(dad / dot(&d, &d));
            if !(dad > 0.0) {
                warnings.push(format!("nonpositive curvature {dad:e} at iteration {iterations}"));
                break;
            }
            let alpha = rz / dad;
            // Lanczos tridiagonal: T_jj = 1/α_j + β_{j−1}/α_{j−1}, T_{j−1,j} = √β_{j−1}/α_{j−1}
            match prev {
                None => lanczos.0.push(1.0 / alpha),
                Some((a0, b0)) => {
                    lanczos.0.push(1.0 / alpha + b0 / a0);
                    lanczos.1.push(b0.sqrt() / a0);
                }
            }
            for i in 0..n2 {
                y[i] += alpha * d[i];
                r[i] -= alpha * ad[i];
            }
            iterations += 1;
            z = pc.apply(mass, &r);
            let rz_new = dot(&r, &z);
            let rel = rz_new.max(0.0).sqrt() / bnorm;
            history.push(rel);
            if rel <= p.tol {
                converged = true;
                break;
            }
            if rel < best {
                (best, best_at) = (rel, iterations);
            } else if iterations - best_at >= p.stagnation_window {
                stagnated = true;
                warnings.push(format!("CG stagnated at relative residual {best:e}"));
                break;
            }
            let beta = rz_new / rz;
            prev = Some((alpha, beta));
            rz = rz_new;
            for i in 0..n2 {
                d[i] = z[i] + beta * d[i];
            }
        }
        if !converged && !stagnated {
            warnings.push(format!("CG hit the iteration cap {}", p.max_iter));
        }
    }
    let gram_residual = if bnorm > 0.0 {
        let ay = p.gram_apply(&y)?;
        dual_norm(&ay.iter().zip(&b).map(|(a, b)| a - b).collect::<Vec<_>>()) / bnorm
    } else {
        0.0
    };
    let ritz_range = tridiagonal_extremes(&lanczos.0, &lanczos.1);
    let error_estimate = match ritz_range {
        _ if bnorm == 0.0 => 0.0,
        [lo, _] if lo > 0.0 => gram_residual * bnorm / lo.sqrt(),
        _ => f64::INFINITY,
    };
    let controls = if bnorm > 0.0 { p.controls_for(&y)? } else { ControlSignal::zeros(steps, dt) };
    let fin = p.forward(&p.initial, Some(&controls))?;
    let (_, final_energy) = energies(p.disc, &fin);
    let (_, initial_energy) = energies(p.disc, &p.initial);
    let (yu, yv) = p.split(&y)?;
    Ok(HumResult {
        adjoint_final: State { u: yu, v: yv, t: steps as f64 * dt },
        control_norm_sq: controls.l2_norm_sq(),
        controls,
        iterations,
        converged,
        stagnated,
        gram_residual,
        residual_history: history,
        final_energy,
        initial_energy,
        final_energy_ratio: if initial_energy > 0.0 { final_energy / initial_energy } else { 0.0 },
        spectral_bound: if spectral.is_finite() { spectral } else { 0.0 },
        ritz_range,
        error_estimate,
        warnings,
    })
}

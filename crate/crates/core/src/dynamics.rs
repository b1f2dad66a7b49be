//! Implicit-midpoint integration of `M v̇ + C v + S u = B g(t)`, `u̇ = v`.
//!
//! One step solves `(M + dt²/4 S + dt/2 C) v̄ = M v_k − dt/2 S u_k + dt/2 B ḡ`
//! and sets `u_{k+1} = u_k + dt v̄`, `v_{k+1} = 2v̄ − v_k`, where `ḡ` is the mean
//! of the control samples at both ends of the step. With `C = 0`, `g = 0` the
//! discrete energy is conserved exactly; running with `−dt` inverts the step.

use serde::Serialize;

use crate::banded::{BandCholesky, SymBand};
use crate::discretization::{BoundaryDof, Discretization};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn zeros(n: usize) -> Self {
        Self { u: vec![0.0; n], v: vec![0.0; n], t: 0.0 }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            u: self.u.iter().map(|x| c * x).collect(),
            v: self.v.iter().map(|x| c * x).collect(),
            t: self.t,
        }
    }

    /// `a·self + b·other` at `self.t`.
    pub fn combine(&self, a: f64, other: &State, b: f64) -> Self {
        let lin = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| a * x + b * y).collect();
        Self { u: lin(&self.u, &other.u), v: lin(&self.v, &other.v), t: self.t }
    }

    pub fn norm(&self) -> f64 {
        self.u.iter().chain(&self.v).map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Boundary controls sampled on the uniform grid `t_k = k·dt`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlSignal {
    pub dt: f64,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
}

impl ControlSignal {
    pub fn zeros(steps: usize, dt: f64) -> Self {
        Self { dt, f1: vec![0.0; steps + 1], f2: vec![0.0; steps + 1] }
    }

    pub fn len(&self) -> usize {
        self.f1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f1.is_empty()
    }

    pub fn at(&self, k: usize) -> [f64; 2] {
        [self.f1[k], self.f2[k]]
    }

    /// `∫ (f₁² + f₂²)` by the trapezoid rule.
    pub fn l2_norm_sq(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|k| {
                let w = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
                w * (self.f1[k].powi(2) + self.f2[k].powi(2))
            })
            .sum::<f64>()
            * self.dt
    }

    pub fn combine(&self, a: f64, other: &ControlSignal, b: f64) -> Self {
        let lin = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| a * x + b * y).collect();
        Self { dt: self.dt, f1: lin(&self.f1, &other.f1), f2: lin(&self.f2, &other.f2) }
    }

    fn derivative(&self, k: usize) -> [f64; 2] {
        let n = self.len();
        if n < 2 {
            return [0.0; 2];
        }
        let (a, b, s) = if k == 0 {
            (0, 1, 1.0)
        } else if k + 1 == n {
            (n - 2, n - 1, 1.0)
        } else {
            (k - 1, k + 1, 2.0)
        };
        let d = s * self.dt;
        [(self.f1[b] - self.f1[a]) / d, (self.f2[b] - self.f2[a]) / d]
    }

    fn second_derivative(&self, k: usize) -> [f64; 2] {
        let n = self.len();
        if n < 3 {
            return [0.0; 2];
        }
        let k = k.clamp(1, n - 2);
        let d2 = self.dt * self.dt;
        [
            (self.f1[k + 1] - 2.0 * self.f1[k] + self.f1[k - 1]) / d2,
            (self.f2[k + 1] - 2.0 * self.f2[k] + self.f2[k - 1]) / d2,
        ]
    }
}

/// Boundary traces at `x = ℓ` for one time level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Traces {
    pub w_l: f64,
    pub psi_l: f64,
    pub wt_l: f64,
    pub psit_l: f64,
    pub flux_w: f64,
    pub flux_psi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub traces: Vec<Traces>,
    pub energy: Vec<f64>,
    pub energy_gd: Vec<f64>,
    /// Free-dof states, when recorded.
    pub states: Option<Vec<State>>,
    pub controls: Option<ControlSignal>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Lifted boundary values at step `k` (zero unless Dirichlet-controlled).
    pub fn lifted(&self, k: usize) -> [f64; 2] {
        self.controls.as_ref().map_or([0.0; 2], |c| c.at(k))
    }

    pub fn last_state(&self) -> Option<&State> {
        self.states.as_ref().and_then(|s| s.last())
    }
}

/// Factorized midpoint operator for one signed step size.
pub struct Stepper<'a> {
    disc: &'a Discretization,
    dt: f64,
    chol: BandCholesky,
    rhs: Vec<f64>,
    su: Vec<f64>,
    load: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(disc: &'a Discretization, dt: f64) -> Result<Self> {
        if !(dt != 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be nonzero, got {dt}")));
        }
        let mut a = disc.stiffness.combine(0.25 * dt * dt, &SymBand::from_diagonal(&disc.mass, 0), 1.0);
        for (i, c) in disc.damping.iter().enumerate() {
            a.add(i, i, 0.5 * dt * c);
        }
        let chol = a.cholesky()?;
        let n = disc.n_free();
        Ok(Self { disc, dt, chol, rhs: vec![0.0; n], su: vec![0.0; n], load: vec![0.0; n] })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `(u, v)` by one step with mean control `gbar`.
    pub fn step(&mut self, u: &mut [f64], v: &mut [f64], gbar: [f64; 2]) {
        let d = self.disc;
        let h = 0.5 * self.dt;
        d.stiffness.matvec(u, &mut self.su);
        d.apply_input(gbar, &mut self.load);
        for i in 0..u.len() {
            self.rhs[i] = d.mass[i] * v[i] - h * self.su[i] + h * self.load[i];
        }
        self.chol.solve_in_place(&mut self.rhs);
        for i in 0..u.len() {
            let vb = self.rhs[i];
            u[i] += self.dt * vb;
            v[i] = 2.0 * vb - v[i];
        }
    }
}

/// `(E, E_{γ,δ})` of a state whose lifted boundary values are zero.
pub fn energies(disc: &Discretization, state: &State) -> (f64, f64) {
    energies_lifted(disc, &state.u, &state.v, [0.0; 2])
}

pub fn energies_lifted(disc: &Discretization, u: &[f64], v: &[f64], lifted: [f64; 2]) -> (f64, f64) {
    let kin: f64 = v.iter().zip(&disc.mass).map(|(x, m)| m * x * x).sum();
    if lifted == [0.0; 2] {
        let e = 0.5 * (kin + disc.stiffness0.quad_form(u));
        let egd = 0.5 * (kin + disc.stiffness.quad_form(u));
        return (e, egd);
    }
    let full = disc.to_full(u, lifted);
    (
        0.5 * (kin + disc.stiffness0_full().quad_form(&full)),
        0.5 * (kin + disc.stiffness_full().quad_form(&full)),
    )
}

/// Options for [`simulate_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub record_states: bool,
    /// Stop once the discrete energy is exactly zero.
    pub stop_at_zero_energy: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { record_states: true, stop_at_zero_energy: false }
    }
}

/// Number of steps and the adjusted uniform step reaching `t_final` exactly.
pub fn step_count(t_final: f64, dt: f64) -> Result<(usize, f64)> {
    if !(t_final >= 0.0 && dt > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need T >= 0 and dt > 0, got T = {t_final}, dt = {dt}"
        )));
    }
    if t_final == 0.0 {
        return Ok((0, dt));
    }
    let r = t_final / dt;
    let steps = if (r - r.round()).abs() < 1e-9 * r { r.round() } else { r.ceil() } as usize;
    Ok((steps.max(1), t_final / steps.max(1) as f64))
}

fn record(
    disc: &Discretization,
    u: &[f64],
    v: &[f64],
    k: usize,
    controls: Option<&ControlSignal>,
) -> (Traces, f64, f64) {
    let g = controls.map_or([0.0; 2], |c| c.at(k));
    let (e, egd) = energies_lifted(disc, u, v, g);
    let a = disc.acceleration(u, v, g);
    let mut vel = disc.boundary_values(v, [0.0; 2]);
    let mut acc_b = [0.0; 2];
    if let Some(c) = controls {
        let dg = c.derivative(k);
        let d2g = c.second_derivative(k);
        for j in 0..2 {
            if disc.boundary[j] == BoundaryDof::Lifted {
                vel[j] = dg[j];
                acc_b[j] = d2g[j];
            }
        }
    }
    let full_u = disc.to_full(u, g);
    let full_a = disc.to_full(&a, acc_b);
    let disp = disc.boundary_values(u, g);
    let flux = disc.recover_fluxes(&full_u, &full_a);
    (
        Traces { w_l: disp[0], psi_l: disp[1], wt_l: vel[0], psit_l: vel[1], flux_w: flux[0], flux_psi: flux[1] },
        e,
        egd,
    )
}

/// Forward run over `steps` steps of size `dt` from `initial`.
pub fn simulate_with(
    disc: &Discretization,
    initial: &State,
    controls: Option<&ControlSignal>,
    steps: usize,
    dt: f64,
    opts: RunOptions,
) -> Result<Trajectory> {
    let n = disc.n_free();
    for got in [initial.u.len(), initial.v.len()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    if let Some(c) = controls {
        if c.len() != steps + 1 {
            return Err(Error::DimensionMismatch { expected: steps + 1, got: c.len() });
        }
        if (c.dt - dt).abs() > 1e-12 * dt {
            return Err(Error::InvalidArgument(format!(
                "control grid step {} differs from dt {dt}",
                c.dt
            )));
        }
        if c.f1.iter().chain(&c.f2).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("control samples must be finite".into()));
        }
    }
    let mut stepper = Stepper::new(disc, dt)?;
    let (mut u, mut v) = (initial.u.clone(), initial.v.clone());
    let t0 = initial.t;
    let mut traj = Trajectory {
        dt,
        times: Vec::with_capacity(steps + 1),
        traces: Vec::with_capacity(steps + 1),
        energy: Vec::with_capacity(steps + 1),
        energy_gd: Vec::with_capacity(steps + 1),
        states: opts.record_states.then(|| Vec::with_capacity(steps + 1)),
        controls: controls.cloned(),
    };
    let mut ub = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let (tr, e, egd) = record(disc, &u, &v, k, controls);
        let t = t0 + k as f64 * dt;
        traj.times.push(t);
        traj.traces.push(tr);
        traj.energy.push(e);
        traj.energy_gd.push(egd);
        ub.push(disc.boundary_values(&u, [0.0; 2]));
        if let Some(s) = traj.states.as_mut() {
            s.push(State { u: u.clone(), v: v.clone(), t });
        }
        if k == steps || (opts.stop_at_zero_energy && egd == 0.0) {
            break;
        }
        let gbar = controls.map_or([0.0; 2], |c| {
            let (a, b) = (c.at(k), c.at(k + 1));
            [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
        });
        stepper.step(&mut u, &mut v, gbar);
    }
    smooth_damped_traces(disc, &mut traj, &ub);
    Ok(traj)
}

/// Replaces whole-step velocities at damped boundary dofs by second-order
/// averages of the midpoint velocities `(u_{k+1} − u_k)/dt`.
///
/// Stiff boundary damping makes the midpoint rule flip the sign of that
/// velocity component every step, while the midpoint values stay smooth.
/// The recovered flux carries `−c·v`, so it is corrected by the same amount.
fn smooth_damped_traces(disc: &Discretization, traj: &mut Trajectory, ub: &[[f64; 2]]) {
    let n = ub.len();
    if n < 2 {
        return;
    }
    let dt = traj.dt;
    for j in 0..2 {
        let BoundaryDof::Free(b) = disc.boundary[j] else { continue };
        let c = disc.damping[b];
        if c == 0.0 {
            continue;
        }
        let mid: Vec<f64> = (0..n - 1).map(|k| (ub[k + 1][j] - ub[k][j]) / dt).collect();
        for k in 0..n {
            let vk = if n == 2 {
                mid[0]
            } else if k == 0 {
                1.5 * mid[0] - 0.5 * mid[1]
            } else if k == n - 1 {
                1.5 * mid[n - 2] - 0.5 * mid[n - 3]
            } else {
                0.5 * (mid[k - 1] + mid[k])
            };
            let tr = &mut traj.traces[k];
            let (vel, flux) = if j == 0 { (&mut tr.wt_l, &mut tr.flux_w) } else { (&mut tr.psit_l, &mut tr.flux_psi) };
            *flux -= c * (vk - *vel);
            *vel = vk;
        }
    }
}

/// Forward run on `[t₀, t₀ + T]`; `dt` is shrunk so the grid ends at `T`.
pub fn simulate(
    disc: &Discretization,
    initial: &State,
    controls: Option<&ControlSignal>,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    let (steps, dt) = step_count(t_final, dt)?;
    simulate_with(disc, initial, controls, steps, dt, RunOptions::default())
}

/// Homogeneous run backward from `final_state` at time `T` down to `0`.
///
/// Series are returned in increasing time, so index `k` is `t_k = k·dt`.
pub fn simulate_backward(
    disc: &Discretization,
    final_state: &State,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    let (steps, dt) = step_count(t_final, dt)?;
    backward_steps(disc, final_state, steps, dt, true)
}

pub(crate) fn backward_steps(
    disc: &Discretization,
    final_state: &State,
    steps: usize,
    dt: f64,
    record_states: bool,
) -> Result<Trajectory> {
    let start = State { t: steps as f64 * dt, ..final_state.clone() };
    let mut traj = simulate_with(
        disc,
        &start,
        None,
        steps,
        -dt,
        RunOptions { record_states, stop_at_zero_energy: false },
    )?;
    traj.dt = dt;
    traj.times.reverse();
    traj.traces.reverse();
    traj.energy.reverse();
    traj.energy_gd.reverse();
    if let Some(s) = traj.states.as_mut() {
        s.reverse();
    }
    // Velocity traces keep physical sign; only the order changes.
    for t in traj.times.iter_mut() {
        *t = t.abs().max(0.0);
    }
    Ok(traj)
}

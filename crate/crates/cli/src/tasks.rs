use anyhow::{Context, Result};
use degbeam::analysis::{self, DecayBound};
use degbeam::dynamics::{self, energies, simulate_backward, simulate_with, RunOptions};
use degbeam::hum::{solve_null_control, HumProblem};
use degbeam::{constants, BeamModel, BoundaryCondition, ConstantsReport, Discretization, Mesh, State, Trajectory};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConfigError, Scenario, Task};
use crate::output::{num as fmt, Report, Table};

/// Grid actually used for a run.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub n: usize,
    pub grading: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    pub steps: usize,
}

pub struct Setup {
    pub model: BeamModel,
    pub disc: Discretization,
}

pub fn setup(s: &Scenario) -> Result<Setup> {
    let model = s.model.build()?;
    let mc = s.mesh()?;
    let mesh = match mc.grading {
        Some(p) => Mesh::graded(model.ell, mc.n, p),
        None => Mesh::build(model.ell, mc.n, model.mu()),
    }
    .map_err(|e| ConfigError::new("mesh", e.to_string()))?;
    let disc = degbeam::discretization::assemble(&model, mesh).context("assembling the discretization")?;
    Ok(Setup { model, disc })
}

fn threshold(model: &BeamModel) -> Result<Option<f64>> {
    let r = ConstantsReport::compute(model, None)?;
    Ok(r.threshold_for(&model.bc).value())
}

pub fn resolve_time(s: &Scenario, st: &Setup) -> Result<Resolved> {
    let t = s.time()?;
    let horizon = match (t.horizon, t.threshold_factor) {
        (Some(h), _) => h,
        (None, Some(f)) => {
            let th = threshold(&st.model)?.ok_or_else(|| {
                ConfigError::new("time.threshold_factor", "the model has no explicit observability threshold")
            })?;
            f * th
        }
        (None, None) => unreachable!("validated by Scenario::time"),
    };
    let (steps, dt) = dynamics::step_count(horizon, t.dt.unwrap_or_else(|| st.disc.default_dt()))?;
    Ok(Resolved { n: st.disc.mesh.n_elements(), grading: st.disc.mesh.grading, horizon, dt, steps })
}

fn initial_state(s: &Scenario, d: &Discretization) -> Result<State> {
    s.initial()?.build(d).map_err(|e| ConfigError::new("initial", e.to_string()).into())
}

pub fn trajectory_table(tr: &Trajectory) -> Table {
    let mut t = Table::new(&["t", "E", "E_gd", "w_l", "psi_l", "wt_l", "psit_l", "flux_w", "flux_psi"]);
    for k in 0..tr.len() {
        let q = &tr.traces[k];
        t.push(vec![tr.times[k], tr.energy[k], tr.energy_gd[k], q.w_l, q.psi_l, q.wt_l, q.psit_l, q.flux_w, q.flux_psi]);
    }
    t
}

fn checks_table() -> Table {
    Table::new(&["check", "lhs", "rhs", "ratio", "pass"])
}

pub fn run(task: Task, s: &Scenario) -> Result<Report> {
    match task {
        Task::Constants => constants_task(s),
        Task::Simulate => simulate_task(s),
        Task::Stabilize => stabilize_task(s),
        Task::Verify => verify_task(s),
        Task::Control => control_task(s),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), x, out);
            }
        }
        Value::String(x) => out.push((prefix.to_string(), x.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn constants_task(s: &Scenario) -> Result<Report> {
    let model = s.model.build()?;
    let horizon = match &s.time {
        Some(t) if t.horizon.is_some() || t.threshold_factor.is_some() => {
            let t = s.time()?;
            match (t.horizon, t.threshold_factor) {
                (Some(h), _) => Some(h),
                (None, Some(f)) => threshold(&model)?.map(|th| f * th),
                _ => None,
            }
        }
        _ => None,
    };
    let report = ConstantsReport::compute(&model, horizon)?;
    let value = serde_json::to_value(&report)?;
    let mut flat = Vec::new();
    flatten("", &value, &mut flat);
    let text: String = flat.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    let mut r = Report::new(Task::Constants, json!({ "constants": value, "horizon": horizon }));
    r.text("constants.txt", text);
    Ok(r)
}

fn simulate_task(s: &Scenario) -> Result<Report> {
    let st = setup(s)?;
    let res = resolve_time(s, &st)?;
    let x0 = initial_state(s, &st.disc)?;
    let opts = RunOptions { record_states: false, ..RunOptions::default() };
    let tr = simulate_with(&st.disc, &x0, None, res.steps, res.dt, opts)?;
    let e0 = tr.energy_gd[0];
    let drift = if e0 > 0.0 {
        tr.energy_gd.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0
    } else {
        0.0
    };
    let summary = json!({
        "resolved": res,
        "initial_energy": tr.energy[0],
        "initial_energy_gd": e0,
        "final_energy": tr.energy[tr.steps()],
        "final_energy_gd": tr.energy_gd[tr.steps()],
        "max_relative_drift_gd": drift,
    });
    let mut r = Report::new(Task::Simulate, summary).with_disc(st.disc);
    r.table("trajectory.csv", trajectory_table(&tr));
    Ok(r)
}

fn stabilize_task(s: &Scenario) -> Result<Report> {
    let st = setup(s)?;
    if st.model.feedback.is_none() {
        return Err(ConfigError::new("model.feedback", "stabilize needs boundary feedback gains").into());
    }
    let res = resolve_time(s, &st)?;
    let x0 = initial_state(s, &st.disc)?;
    let opts = RunOptions { record_states: false, stop_at_zero_energy: true };
    let tr = simulate_with(&st.disc, &x0, None, res.steps, res.dt, opts)?;
    let fit = analysis::decay_fit(&tr)?;
    let kappa = constants::decay_rate(&st.model);
    let bound: Option<DecayBound> = kappa.as_ref().ok().map(|&k| analysis::decay_bound(&tr, k));
    let e0 = tr.energy_gd[0];
    let max_increase = tr.energy_gd.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let mut checks = checks_table();
    checks.push_row(vec![
        "dissipativity".into(),
        fmt(max_increase),
        fmt(1e-12 * e0),
        fmt(if e0 > 0.0 { max_increase / e0 } else { 0.0 }),
        (max_increase <= 1e-12 * e0).to_string(),
    ]);
    if let (Ok(k), Some(b)) = (&kappa, &bound) {
        checks.push_row(vec!["decay_bound".into(), fmt(b.worst_ratio), "1".into(), fmt(b.worst_ratio), b.holds.to_string()]);
        checks.push_row(vec!["decay_rate".into(), fmt(fit.rate), fmt(*k), fmt(fit.rate / k), (fit.rate >= *k).to_string()]);
    }
    let summary = json!({
        "resolved": res,
        "steps_run": tr.steps(),
        "fit": fit,
        "kappa": kappa.as_ref().ok(),
        "kappa_unavailable": kappa.as_ref().err().map(|e| e.to_string()),
        "bound": bound,
        "max_energy_increase": max_increase,
    });
    let mut r = Report::new(Task::Stabilize, summary).with_disc(st.disc);
    r.table("trajectory.csv", trajectory_table(&tr));
    r.table("checks.csv", checks);
    Ok(r)
}

fn verify_task(s: &Scenario) -> Result<Report> {
    let st = setup(s)?;
    if st.model.feedback.is_some() {
        return Err(ConfigError::new("model.feedback", "verify runs the undamped system; remove the feedback gains").into());
    }
    let res = resolve_time(s, &st)?;
    let x0 = initial_state(s, &st.disc)?;
    let tr = simulate_with(&st.disc, &x0, None, res.steps, res.dt, RunOptions::default())?;
    let [a, b] = s.verify.window.unwrap_or([0.0, res.horizon]);
    let ids = analysis::multiplier_residual(&st.disc, &tr, a, b).map_err(|e| ConfigError::new("verify.window", e.to_string()))?;
    let mut checks = checks_table();
    let tol = s.verify.identity_tol;
    for id in [Some(&ids.main), Some(&ids.second), ids.robin.as_ref()].into_iter().flatten() {
        // for identities the ratio column is the relative residual
        checks.push_row(vec![
            id.name.to_string(),
            fmt(id.lhs),
            fmt(id.rhs),
            fmt(id.relative_residual),
            (id.relative_residual <= tol).to_string(),
        ]);
    }
    let direct = match st.model.bc {
        BoundaryCondition::Neumann => None,
        _ => Some(analysis::direct_inequality(&st.disc, &tr, s.verify.cbc)?),
    };
    let inverse = analysis::inverse_inequality(&st.disc, &tr)?;
    for q in direct.iter().chain(std::iter::once(&inverse)) {
        checks.push_row(vec![q.check.clone(), fmt(q.lhs), fmt(q.rhs), fmt(q.ratio), q.pass.to_string()]);
    }
    let summary = json!({
        "resolved": res,
        "window": [a, b],
        "identities": ids,
        "direct": direct,
        "inverse": inverse,
    });
    let mut r = Report::new(Task::Verify, summary).with_disc(st.disc);
    r.table("checks.csv", checks);
    Ok(r)
}

fn control_task(s: &Scenario) -> Result<Report> {
    let st = setup(s)?;
    if st.model.feedback.is_some() {
        return Err(ConfigError::new("model.feedback", "control acts on the undamped system; remove the feedback gains").into());
    }
    let res = resolve_time(s, &st)?;
    let d = &st.disc;
    let x0 = initial_state(s, d)?;
    let c = &s.control;
    if !(c.tol > 0.0) {
        return Err(ConfigError::new("control.tol", format!("must be positive, got {}", c.tol)).into());
    }
    // Steering to z(T) is null control of x0 − z(0), with z the free solution through the target.
    let (data, target) = match &c.target {
        Some(spec) => {
            let z_t = spec.build(d).map_err(|e| ConfigError::new("control.target", e.to_string()))?;
            let back = simulate_backward(d, &z_t, res.horizon, res.dt)?;
            let z0 = back.states.as_ref().expect("backward runs record states")[0].clone();
            (x0.combine(1.0, &z0, -1.0), Some(z_t))
        }
        None => (x0.clone(), None),
    };
    let mut p = HumProblem::new(d, data, res.horizon, res.dt);
    p.tol = c.tol;
    p.max_iter = c.max_iter;
    p.preconditioner = c.preconditioner;
    p.stagnation_window = c.stagnation_window;
    let result = solve_null_control(&p)?;
    let target_error = match &target {
        Some(z) => {
            let end = p.forward(&x0, Some(&result.controls))?;
            let diff = end.combine(1.0, z, -1.0);
            let (_, ez) = energies(d, z);
            let (_, ed) = energies(d, &diff);
            Some(if ez > 0.0 { ed / ez } else { ed })
        }
        None => None,
    };
    let mut controls = Table::new(&["t", "f1", "f2"]);
    for k in 0..result.controls.len() {
        let [f1, f2] = result.controls.at(k);
        controls.push(vec![k as f64 * result.controls.dt, f1, f2]);
    }
    let summary = json!({
        "resolved": res,
        "result": result,
        "target_energy_error": target_error,
    });
    let mut r = Report::new(Task::Control, summary).with_disc(st.disc);
    r.table("controls.csv", controls);
    Ok(r)
}

//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Runs as a plain binary (`harness = false`) so the report is always printed.

use std::time::Instant;

use degbeam::analysis::{
    decay_bound, decay_fit, direct_inequality, inverse_inequality, multiplier_residual,
};
use degbeam::constants::{self, CbcVariant};
use degbeam::dynamics::{self, simulate, simulate_with, RunOptions};
use degbeam::hum::{solve_null_control, HumProblem, Preconditioner};
use degbeam::initial;
use degbeam::{
    BeamModel, BoundaryCondition, ConstantsReport, ControlSignal, Discretization, Feedback,
    ProfileFamily, State,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

fn unit_power(theta: f64) -> BeamModel {
    let p = ProfileFamily::Power { theta, scale: 1.0 };
    BeamModel::new(1.0, 1.0, 1.0, p.clone(), p, BoundaryCondition::Dirichlet, None).unwrap()
}

fn thin_dirichlet() -> BeamModel {
    BeamModel::thin_beam(0.01, 0.5, BoundaryCondition::Dirichlet, None).unwrap()
}

fn dirichlet_threshold(m: &BeamModel) -> Result<f64, String> {
    ConstantsReport::compute(m, None)
        .map_err(fail)?
        .t_dirichlet
        .value()
        .ok_or_else(|| "no explicit Dirichlet threshold".to_string())
}

fn c1_constants() -> Outcome {
    let mut worst = 0.0f64;
    for theta in [0.0, 0.5, 1.0, 1.5, 1.75, 1.9] {
        let want = if theta < 1.75 { (4.0 - theta) / ((2.0 - theta) * (2.0 - theta)) } else { 36.0 };
        let got = constants::poincare_dirichlet(&unit_power(theta));
        let err = (got - want).abs() / want;
        if err > 1e-12 {
            return Err(format!("theta {theta}: C_D = {got}, expected {want}"));
        }
        worst = worst.max(err);
    }
    Ok(format!("max rel err {worst:.1e}"))
}

fn c2_travel_times() -> Outcome {
    let (rho, i_rho, ell, ks, es) = (2.0, 0.5, 1.3, 3.0, 0.7);
    let build = |mu: f64| {
        BeamModel::new(
            rho,
            i_rho,
            ell,
            ProfileFamily::Power { theta: mu, scale: ks },
            ProfileFamily::Power { theta: mu, scale: es },
            BoundaryCondition::Dirichlet,
            None,
        )
        .map_err(fail)
    };
    // ∫₀^ℓ √(d/(c x^μ)) dx
    let exact = |d: f64, c: f64, mu: f64| (d / c).sqrt() * ell.powf(1.0 - mu / 2.0) / (1.0 - mu / 2.0);
    let mut worst = 0.0f64;
    for mu in [0.0, 0.5, 1.0, 1.5] {
        let (t1, t2) = constants::travel_times(&build(mu)?).map_err(fail)?;
        for (got, want) in [(t1, exact(rho, ks, mu)), (t2, exact(i_rho, es, mu))] {
            worst = worst.max((got - want).abs() / want);
        }
    }
    let mut prev = 0.0;
    let mut growth = Vec::new();
    for mu in [1.5, 1.9, 1.99] {
        let (t1, t2) = constants::travel_times(&build(mu)?).map_err(fail)?;
        if !(t1 > prev && t2 > 0.0) {
            return Err(format!("T1 not increasing at mu {mu}: {t1} after {prev}"));
        }
        growth.push(t1);
        prev = t1;
    }
    check(
        worst <= 1e-8 && growth[2] > 10.0 * growth[0],
        format!("max rel err {worst:.1e}, T1 on 1.5/1.9/1.99 = {:.3}/{:.3}/{:.3}", growth[0], growth[1], growth[2]),
    )
}

fn c3_conservation() -> Outcome {
    let m = unit_power(0.5);
    let d = Discretization::new(&m, 128).map_err(fail)?;
    let x0 = initial::random_nodal(&d, 2024).map_err(fail)?;
    let dt = d.default_dt();
    let opts = RunOptions { record_states: false, ..RunOptions::default() };
    let tr = simulate_with(&d, &x0, None, 2000, dt, opts).map_err(fail)?;
    let e0 = tr.energy[0];
    let drift = tr.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0;
    check(tr.steps() == 2000 && drift <= 1e-8, format!("{} steps, drift {drift:.2e}", tr.steps()))
}

fn c4_decay() -> Outcome {
    let m = BeamModel::thin_beam(
        0.0625,
        0.5,
        BoundaryCondition::Robin { gamma: 1.0, delta: 1.0 },
        Some(Feedback { alpha: 1.0, beta: 1.0 }),
    )
    .map_err(fail)?;
    if !constants::smallness_ok(&m) {
        return Err("model violates mu + 2 C_h < 2".into());
    }
    let kappa = constants::decay_rate(&m).map_err(fail)?;
    let d = Discretization::new(&m, 16).map_err(fail)?;
    let x0 = initial::random_modal(&d, 5, 8).map_err(fail)?;
    let horizon = 1.05 / kappa;
    let (steps, dt) = dynamics::step_count(horizon, 0.5).map_err(fail)?;
    let opts = RunOptions { record_states: false, ..RunOptions::default() };
    let tr = simulate_with(&d, &x0, None, steps, dt, opts).map_err(fail)?;
    let bound = decay_bound(&tr, kappa);
    let fit = decay_fit(&tr).map_err(fail)?;
    check(
        bound.holds && bound.checked > 0 && bound.max_increase <= 1e-12 && fit.rate >= kappa,
        format!(
            "kappa {kappa:.3e}, {} steps to t = {:.3e}, bound checked on {} steps (worst {:.2e}), max increase {:.1e}, fitted rate {:.3e}",
            tr.steps(),
            tr.final_time(),
            bound.checked,
            bound.worst_ratio,
            bound.max_increase,
            fit.rate
        ),
    )
}

fn c5_multiplier() -> Outcome {
    let m = unit_power(0.5);
    let mut res = Vec::new();
    for n in [32, 64, 128] {
        let d = Discretization::new(&m, n).map_err(fail)?;
        let x0 = initial::eigenmode(&d, 1).map_err(fail)?;
        let tr = simulate(&d, &x0, None, 1.0, d.default_dt()).map_err(fail)?;
        res.push(multiplier_residual(&d, &tr, 0.0, 1.0).map_err(fail)?.main.relative_residual);
    }
    let (r1, r2) = (res[0] / res[1], res[1] / res[2]);
    check(
        r1 >= 1.5 && r2 >= 1.5,
        format!("residuals {:.2e}/{:.2e}/{:.2e}, factors {r1:.2}/{r2:.2}", res[0], res[1], res[2]),
    )
}

fn c6_inequalities() -> Outcome {
    let m = thin_dirichlet();
    let horizon = 1.5 * dirichlet_threshold(&m)?;
    let d = Discretization::new(&m, 64).map_err(fail)?;
    let (mut dmax, mut imin) = (0.0f64, f64::INFINITY);
    for seed in 0..20 {
        let x0 = initial::random_nodal(&d, seed).map_err(fail)?;
        let tr = simulate(&d, &x0, None, horizon, d.default_dt()).map_err(fail)?;
        let dir = direct_inequality(&d, &tr, CbcVariant::Derived).map_err(fail)?;
        let inv = inverse_inequality(&d, &tr).map_err(fail)?;
        if !(dir.pass && inv.pass && inv.asserted) {
            return Err(format!("seed {seed}: direct {:.4}, inverse {:.4}", dir.ratio, inv.ratio));
        }
        dmax = dmax.max(dir.ratio);
        imin = imin.min(inv.ratio);
    }
    Ok(format!("T = {horizon:.3}, max direct ratio {dmax:.3}, min inverse ratio {imin:.3}"))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn c7_gram() -> Outcome {
    let base = thin_dirichlet();
    let horizon = 1.5 * dirichlet_threshold(&base)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut sym, mut psd) = (0.0f64, f64::INFINITY);
    for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Robin { gamma: 1.0, delta: 1.0 }] {
        let m = base.with_bc(bc).map_err(fail)?;
        let d = Discretization::new(&m, 32).map_err(fail)?;
        let p = HumProblem::new(&d, State::zeros(d.n_free()), horizon, d.default_dt());
        let nn = 2 * d.n_free();
        for _ in 0..10 {
            let x: Vec<f64> = (0..nn).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..nn).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (lx, ly) = (p.gram_apply(&x).map_err(fail)?, p.gram_apply(&y).map_err(fail)?);
            let (a, b) = (dot(&lx, &y), dot(&x, &ly));
            let scale = dot(&lx, &lx).sqrt() * dot(&y, &y).sqrt();
            sym = sym.max((a - b).abs() / scale);
            psd = psd.min(dot(&lx, &x) / dot(&x, &x));
        }
    }
    check(sym <= 1e-8 && psd >= -1e-12, format!("max asymmetry {sym:.1e}, min Rayleigh quotient {psd:.2e}"))
}

fn weighted_norm_sq(c: &ControlSignal, w: [f64; 2]) -> f64 {
    let a = ControlSignal { dt: c.dt, f1: c.f1.iter().map(|x| x * w[0].sqrt()).collect(), f2: c.f2.iter().map(|x| x * w[1].sqrt()).collect() };
    a.l2_norm_sq()
}

fn c8_null_control() -> Outcome {
    let m = thin_dirichlet();
    let horizon = 1.5 * dirichlet_threshold(&m)?;
    let d = Discretization::new(&m, 64).map_err(fail)?;
    let dt = d.default_dt();
    let solve = |x0: State| -> Result<_, String> {
        let mut p = HumProblem::new(&d, x0, horizon, dt);
        p.preconditioner = Preconditioner::Modal;
        let r = solve_null_control(&p).map_err(fail)?;
        if !r.converged {
            return Err(format!("CG stopped after {} iterations, residual {:.1e}", r.iterations, r.gram_residual));
        }
        Ok(r)
    };
    // controls are compared in the norm Σ dt gᵀW⁻¹g, the one the Gram form induces
    let w = [m.k_ell(), m.ei_ell()];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_ratio, mut worst_lin, mut worst_rel, mut iters) = (0.0f64, 0.0f64, 0.0f64, 0);
    for pair in 0..3u64 {
        let u1 = initial::random_modal(&d, 100 + pair, 10).map_err(fail)?;
        let u2 = initial::eigenmode(&d, 1 + pair as usize).map_err(fail)?;
        let (a, b): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let (r1, r2) = (solve(u1.clone())?, solve(u2.clone())?);
        let r12 = solve(u1.combine(a, &u2, b))?;
        for r in [&r1, &r2, &r12] {
            worst_ratio = worst_ratio.max(r.final_energy_ratio);
            iters = iters.max(r.iterations);
        }
        let lin = r1.controls.combine(a, &r2.controls, b);
        let defect = weighted_norm_sq(&r12.controls.combine(1.0, &lin, -1.0), w).sqrt();
        // error the CG tolerance allows in each solve, propagated through the combination
        let allowed = r12.error_estimate + a.abs() * r1.error_estimate + b.abs() * r2.error_estimate;
        worst_lin = worst_lin.max(defect / allowed);
        worst_rel = worst_rel.max(defect / weighted_norm_sq(&r12.controls, w).sqrt());
    }
    check(
        worst_ratio <= 1e-6 && worst_lin <= 1.0,
        format!(
            "T = {horizon:.3}, max E_final/E(0) {worst_ratio:.1e}, linearity defect at most {worst_lin:.2} of the CG error bound (relative {worst_rel:.1e}), max iterations {iters}"
        ),
    )
}

/// Exact `∫ (w² + ψ²)` of a piecewise-linear field given as interleaved nodal values.
fn l2_sq_p1(nodes: &[f64], full: &[f64]) -> f64 {
    let mut s = 0.0;
    for e in 0..nodes.len() - 1 {
        let h = nodes[e + 1] - nodes[e];
        for c in 0..2 {
            let (a, b) = (full[2 * e + c], full[2 * e + 2 + c]);
            s += h / 3.0 * (a * a + a * b + b * b);
        }
    }
    s
}

fn c9_poincare() -> Outcome {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for theta in [0.5, 1.5] {
        let m = unit_power(theta);
        let cd = constants::poincare_dirichlet(&m);
        for n in [32, 64, 128] {
            let d = Discretization::new(&m, n).map_err(fail)?;
            let nodes = &d.mesh.nodes;
            for k in 0..100 {
                let free: Vec<f64> = if k % 2 == 0 {
                    (0..d.n_free()).map(|_| rng.gen_range(-1.0..1.0)).collect()
                } else {
                    // smooth field: a few random sine modes vanishing at ℓ
                    let amp: Vec<[f64; 2]> = (0..4).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
                    d.free
                        .iter()
                        .map(|&i| {
                            let x = nodes[i / 2] / d.mesh.ell();
                            amp.iter()
                                .enumerate()
                                .map(|(j, a)| a[i % 2] * ((j as f64 + 0.5) * std::f64::consts::PI * x).cos())
                                .sum()
                        })
                        .collect()
                };
                let full = d.to_full(&free, [0.0; 2]);
                let lhs = l2_sq_p1(nodes, &full);
                let rhs = cd * d.stiffness0_full().quad_form(&full);
                if lhs > rhs {
                    return Err(format!("theta {theta}, n {n}, draw {k}: {lhs} > {rhs}"));
                }
                worst = worst.max(lhs / rhs);
            }
        }
    }
    Ok(format!("max ratio ‖·‖²/(C_D |·|²) = {worst:.3}"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 constant reproduction", c1_constants),
        ("2 travel times", c2_travel_times),
        ("3 energy conservation", c3_conservation),
        ("4 dissipativity and decay", c4_decay),
        ("5 multiplier identity convergence", c5_multiplier),
        ("6 direct and inverse inequalities", c6_inequalities),
        ("7 Gram operator properties", c7_gram),
        ("8 null controllability", c8_null_control),
        ("9 discrete Poincaré", c9_poincare),
    ];
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|(name, f)| {
                s.spawn(move || {
                    let t = Instant::now();
                    let r = f();
                    (*name, r, t.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("criterion panicked")).collect()
    });
    let mut failed = 0;
    for (name, r, secs) in &results {
        let (tag, detail) = match r {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{name}] {detail} ({secs:.1} s)");
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", results.len());
        std::process::exit(1);
    }
}

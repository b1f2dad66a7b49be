use degbeam::initial;
use degbeam::{BeamModel, BoundaryCondition, Discretization, ProfileFamily};

fn power_model(theta: f64, bc: BoundaryCondition) -> BeamModel {
    let p = ProfileFamily::Power { theta, scale: 1.0 };
    BeamModel::new(1.0, 1.0, 1.0, p.clone(), p, bc, None).unwrap()
}

// 5-point Gauss–Legendre on [-1, 1]
const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

struct Exact {
    w: fn(f64) -> f64,
    dw: fn(f64) -> f64,
    psi: fn(f64) -> f64,
    dpsi: fn(f64) -> f64,
}

const EXACT: Exact = Exact {
    w: |x| x * x * (1.5 - x),
    dw: |x| 3.0 * x - 3.0 * x * x,
    psi: |x| (2.0 * x).sin(),
    dpsi: |x| 2.0 * (2.0 * x).cos(),
};

/// Energy-norm error of the Galerkin approximation of `EXACT` for `B_{γ,δ}` with `γ = δ = 1`.
fn galerkin_error(theta: f64, n: usize) -> f64 {
    let m = power_model(theta, BoundaryCondition::Robin { gamma: 1.0, delta: 1.0 });
    let d = Discretization::new(&m, n).unwrap();
    let a = |x: f64| x.powf(theta);
    let nodes = &d.mesh.nodes;
    // load F_i = B_{γ,δ}(exact, φ_i), computed with 5-point Gauss per element
    let mut f = vec![0.0; d.n_full()];
    for e in 0..nodes.len() - 1 {
        let (xa, xb) = (nodes[e], nodes[e + 1]);
        let h = xb - xa;
        for (s, wq) in GL5 {
            let x = xa + 0.5 * h * (s + 1.0);
            let jw = 0.5 * h * wq;
            let (la, lb) = ((xb - x) / h, (x - xa) / h);
            let strain = (EXACT.dw)(x) + (EXACT.psi)(x);
            let curv = (EXACT.dpsi)(x);
            // basis for w at node a, b and ψ at node a, b
            f[2 * e] += jw * a(x) * strain * (-1.0 / h);
            f[2 * e + 2] += jw * a(x) * strain * (1.0 / h);
            f[2 * e + 1] += jw * (a(x) * strain * la + a(x) * curv * (-1.0 / h));
            f[2 * e + 3] += jw * (a(x) * strain * lb + a(x) * curv * (1.0 / h));
        }
    }
    let nl = 2 * (nodes.len() - 1);
    f[nl] += (EXACT.w)(1.0);
    f[nl + 1] += (EXACT.psi)(1.0);
    let rhs = d.restrict(&f);
    let uh = d.stiffness.cholesky().unwrap().solve(&rhs);
    let full = d.to_full(&uh, [0.0; 2]);
    let mut err = 0.0;
    for e in 0..nodes.len() - 1 {
        let (xa, xb) = (nodes[e], nodes[e + 1]);
        let h = xb - xa;
        let (wa, pa, wb, pb) = (full[2 * e], full[2 * e + 1], full[2 * e + 2], full[2 * e + 3]);
        for (s, wq) in GL5 {
            let x = xa + 0.5 * h * (s + 1.0);
            let jw = 0.5 * h * wq;
            let t = (x - xa) / h;
            let ph = pa + t * (pb - pa);
            let (dwh, dph) = ((wb - wa) / h, (pb - pa) / h);
            let es = (EXACT.dw)(x) + (EXACT.psi)(x) - dwh - ph;
            let ec = (EXACT.dpsi)(x) - dph;
            err += jw * a(x) * (es * es + ec * ec);
        }
    }
    err += ((EXACT.w)(1.0) - full[nl]).powi(2) + ((EXACT.psi)(1.0) - full[nl + 1]).powi(2);
    err.sqrt()
}

#[test]
fn galerkin_energy_error_first_order() {
    for theta in [0.0, 0.5] {
        let e: Vec<f64> = [16, 32, 64, 128].iter().map(|&n| galerkin_error(theta, n)).collect();
        for k in 0..3 {
            let r = e[k] / e[k + 1];
            assert!(r >= 1.8, "theta {theta}: errors {e:?}, factor {r}");
        }
    }
}

#[test]
fn strong_degeneracy_origin_flux_vanishes() {
    let m = power_model(1.5, BoundaryCondition::Robin { gamma: 1.0, delta: 1.0 });
    let mut prev = f64::INFINITY;
    for n in [32, 64, 128, 256] {
        let d = Discretization::new(&m, n).unwrap();
        let (_, modes) = d.eigenmodes(2);
        let mut worst = 0.0f64;
        for phi in &modes {
            let full = d.to_full(phi, [0.0; 2]);
            let [q0, q1] = d.origin_element_fluxes(&full);
            // scale: the same fluxes averaged over the whole beam
            let scale: f64 = d
                .elements
                .iter()
                .zip(0..)
                .map(|(el, e)| {
                    let strain = (full[2 * e + 2] - full[2 * e]) / el.h + 0.5 * (full[2 * e + 1] + full[2 * e + 3]);
                    let curv = (full[2 * e + 3] - full[2 * e + 1]) / el.h;
                    (el.k_int * strain).abs() + (el.ei_int * curv).abs()
                })
                .sum();
            worst = worst.max((q0.abs() + q1.abs()) / scale);
        }
        assert!(worst < prev, "n {n}: origin flux {worst} did not shrink from {prev}");
        prev = worst;
    }
    assert!(prev < 0.05, "{prev}");
}

#[test]
fn flux_recovery_matches_loads_on_random_models() {
    for (theta, lambda, sigma) in [(0.3, 1.0, -0.5), (0.9, -2.0, 0.25), (1.4, 0.7, 1.3)] {
        let (gamma, delta) = (0.8, 1.7);
        let m = power_model(theta, BoundaryCondition::Robin { gamma, delta });
        let d = Discretization::new(&m, 40).unwrap();
        let z = d.solve_elliptic(lambda, sigma).unwrap();
        let zero = vec![0.0; z.len()];
        let [fw, fp] = d.recover_fluxes(&z, &zero);
        let [wl, pl] = d.boundary_values(&d.restrict(&z), [0.0; 2]);
        assert!((fw - (lambda - gamma * wl)).abs() < 1e-10, "{fw} vs {}", lambda - gamma * wl);
        assert!((fp - (sigma - delta * pl)).abs() < 1e-10, "{fp} vs {}", sigma - delta * pl);
    }
}

#[test]
fn eigenmodes_match_independent_solve() {
    let m = power_model(0.5, BoundaryCondition::Dirichlet);
    let d = Discretization::new(&m, 24).unwrap();
    let n = d.n_free();
    // largest eigenvalue of L⁻¹ M L⁻ᵀ with S = L Lᵀ is 1/λ_min
    let s = nalgebra::DMatrix::from_fn(n, n, |i, j| d.stiffness.get(i, j));
    let l = s.cholesky().unwrap().l();
    let linv = l.try_inverse().unwrap();
    let mm = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.mass.clone()));
    let c = &linv * mm * linv.transpose();
    let top = c.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max);
    let (vals, _) = d.eigenmodes(1);
    assert!((vals[0] - 1.0 / top).abs() < 1e-10 * vals[0], "{} vs {}", vals[0], 1.0 / top);
    let x0 = initial::eigenmode(&d, 1).unwrap();
    let su = d.stiffness.mul(&x0.u);
    for i in 0..n {
        assert!((su[i] - vals[0] * d.mass[i] * x0.u[i]).abs() < 1e-9 * vals[0]);
    }
}

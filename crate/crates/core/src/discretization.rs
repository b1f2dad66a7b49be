//! Piecewise-linear finite elements for `(w, ψ)` on a mesh graded toward `x = 0`.
//!
//! Degrees of freedom are interleaved: `2i` is `w(x_i)`, `2i + 1` is `ψ(x_i)`.
//! The shear energy uses the element-midpoint strain (selective reduced
//! integration) weighted by `∫_e K`; bending uses the exact `∫_e EI`, since
//! `ψ_x` is constant per element. The mass matrix is lumped.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::banded::SymBand;
use crate::coefficients::Coefficient;
use crate::error::{Error, Result};
use crate::model::{BeamModel, BoundaryCondition};

/// Half-bandwidth of the interleaved element matrices.
pub const BANDWIDTH: usize = 3;

const GAUSS_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mesh {
    pub nodes: Vec<f64>,
    pub grading: f64,
}

impl Mesh {
    /// `x_i = ℓ (i/n)^p` with `p = max{1, 2/(2 − μ)}`.
    pub fn build(ell: f64, n: usize, mu: f64) -> Result<Self> {
        if !(0.0..2.0).contains(&mu) {
            return Err(Error::InvalidArgument(format!("mu must lie in [0, 2), got {mu}")));
        }
        Self::graded(ell, n, 1f64.max(2.0 / (2.0 - mu)))
    }

    pub fn graded(ell: f64, n: usize, p: f64) -> Result<Self> {
        if n == 0 || !(ell > 0.0) || !(p >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "mesh needs n >= 1, ell > 0, p >= 1 (got {n}, {ell}, {p})"
            )));
        }
        let mut nodes: Vec<f64> =
            (0..=n).map(|i| ell * (i as f64 / n as f64).powf(p)).collect();
        nodes[n] = ell;
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(format!(
                "grading {p} with n = {n} underflows near the origin"
            )));
        }
        Ok(Self { nodes, grading: p })
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn h(&self, e: usize) -> f64 {
        self.nodes[e + 1] - self.nodes[e]
    }

    pub fn ell(&self) -> f64 {
        *self.nodes.last().unwrap()
    }
}

/// Per-element coefficient samples at the three Gauss points.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub a: f64,
    pub h: f64,
    pub x: [f64; 3],
    pub w: [f64; 3],
    pub k: [f64; 3],
    pub dk: [f64; 3],
    pub ei: [f64; 3],
    pub dei: [f64; 3],
    /// `∫_e K`
    pub k_int: f64,
    /// `∫_e EI`
    pub ei_int: f64,
}

impl Element {
    fn new(m: &BeamModel, a: f64, b: f64) -> Self {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        let x = GAUSS_X.map(|g| c + r * g);
        let w = GAUSS_W.map(|g| r * g);
        let k = x.map(|x| m.k.value(x));
        let dk = x.map(|x| m.k.derivative(x));
        let ei = x.map(|x| m.ei.value(x));
        let dei = x.map(|x| m.ei.derivative(x));
        let dot = |f: &[f64; 3]| f.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        Self { a, h: b - a, k_int: dot(&k), ei_int: dot(&ei), x, w, k, dk, ei, dei }
    }

    /// Value at Gauss point `q` of the linear interpolant of nodal `(f_a, f_b)`.
    pub fn interp(&self, q: usize, fa: f64, fb: f64) -> f64 {
        let s = (self.x[q] - self.a) / self.h;
        fa * (1.0 - s) + fb * s
    }
}

/// How the two boundary values at `x = ℓ` enter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundaryDof {
    /// Index into the free-dof vector.
    Free(usize),
    /// Prescribed (lifted) value.
    Lifted,
}

#[derive(Debug, Clone)]
pub struct Discretization {
    pub model: BeamModel,
    pub mesh: Mesh,
    pub elements: Vec<Element>,
    /// Free dofs in full numbering, ascending.
    pub free: Vec<usize>,
    pub constrained: Vec<usize>,
    /// Full index → position in `free`.
    full_to_free: Vec<Option<usize>>,
    /// Lumped mass on free dofs.
    pub mass: Vec<f64>,
    /// `B_{γ,δ}` on free dofs.
    pub stiffness: SymBand,
    /// `B` (γ = δ = 0) on free dofs.
    pub stiffness0: SymBand,
    /// Diagonal feedback damping on free dofs.
    pub damping: Vec<f64>,
    mass_full: Vec<f64>,
    s0_full: SymBand,
    s_full: SymBand,
    /// `w(ℓ)`, `ψ(ℓ)`.
    pub boundary: [BoundaryDof; 2],
    /// Columns of the input map: the load produced by unit control `f₁`, `f₂`.
    pub input: [Vec<f64>; 2],
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Discretization {
    /// Mesh from the model's own exponent.
    pub fn new(model: &BeamModel, n: usize) -> Result<Self> {
        let mesh = Mesh::build(model.ell, n, model.mu())?;
        assemble(model, mesh)
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.nodes.len()
    }

    pub fn n_full(&self) -> usize {
        2 * self.n_nodes()
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_index(&self, full: usize) -> Option<usize> {
        self.full_to_free[full]
    }

    pub fn mass_full(&self) -> &[f64] {
        &self.mass_full
    }

    pub fn stiffness0_full(&self) -> &SymBand {
        &self.s0_full
    }

    pub fn stiffness_full(&self) -> &SymBand {
        &self.s_full
    }

    pub fn boundary_full(&self) -> [usize; 2] {
        let n = self.n_nodes() - 1;
        [2 * n, 2 * n + 1]
    }

    pub fn is_dirichlet(&self) -> bool {
        self.model.bc == BoundaryCondition::Dirichlet
    }

    /// Embeds free values; lifted boundary values come from `lifted`.
    pub fn to_full(&self, u: &[f64], lifted: [f64; 2]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_full()];
        for (k, &i) in self.free.iter().enumerate() {
            out[i] = u[k];
        }
        let bf = self.boundary_full();
        for j in 0..2 {
            if self.boundary[j] == BoundaryDof::Lifted {
                out[bf[j]] = lifted[j];
            }
        }
        out
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| full[i]).collect()
    }

    /// Boundary values `(w(ℓ), ψ(ℓ))` of a free vector with the given lifted data.
    pub fn boundary_values(&self, u: &[f64], lifted: [f64; 2]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for j in 0..2 {
            out[j] = match self.boundary[j] {
                BoundaryDof::Free(k) => u[k],
                BoundaryDof::Lifted => lifted[j],
            };
        }
        out
    }

    /// `B g`.
    pub fn apply_input(&self, g: [f64; 2], out: &mut [f64]) {
        for (o, (a, b)) in out.iter_mut().zip(self.input[0].iter().zip(&self.input[1])) {
            *o = a * g[0] + b * g[1];
        }
    }

    /// `Bᵀ u`.
    pub fn input_adjoint(&self, u: &[f64]) -> [f64; 2] {
        [dot(&self.input[0], u), dot(&self.input[1], u)]
    }

    /// Boundary residual `(S₀ u)_b` at `x = ℓ`; equals `K(ℓ)(w_x+ψ)(ℓ)`, `EI(ℓ)ψ_x(ℓ)` for statics.
    pub fn static_fluxes(&self, u_full: &[f64]) -> [f64; 2] {
        let s = self.s0_full.mul(u_full);
        let b = self.boundary_full();
        [s[b[0]], s[b[1]]]
    }

    /// Boundary residual including inertia.
    ///
    /// A free boundary row uses the lumped mass, so the recovered value matches
    /// the boundary condition exactly; a prescribed row uses the consistent
    /// mass row, which removes the leading `O(h)` inertia error.
    pub fn recover_fluxes(&self, u_full: &[f64], a_full: &[f64]) -> [f64; 2] {
        let mut f = self.static_fluxes(u_full);
        let b = self.boundary_full();
        let e = self.elements.last().unwrap();
        let dens = [self.model.rho, self.model.i_rho];
        for j in 0..2 {
            f[j] += match self.boundary[j] {
                BoundaryDof::Free(_) => self.mass_full[b[j]] * a_full[b[j]],
                BoundaryDof::Lifted => {
                    dens[j] * e.h * (a_full[b[j]] / 3.0 + a_full[b[j] - 2] / 6.0)
                }
            };
        }
        f
    }

    /// First-element averages of `K(w_x+ψ)` and `EI ψ_x`, the discrete origin fluxes.
    pub fn origin_element_fluxes(&self, u_full: &[f64]) -> [f64; 2] {
        let e = &self.elements[0];
        let h = e.h;
        let strain = (u_full[2] - u_full[0]) / h + 0.5 * (u_full[1] + u_full[3]);
        let curv = (u_full[3] - u_full[1]) / h;
        [e.k_int / h * strain, e.ei_int / h * curv]
    }

    /// Acceleration `M⁻¹(B g − C v − S u)` on free dofs.
    pub fn acceleration(&self, u: &[f64], v: &[f64], g: [f64; 2]) -> Vec<f64> {
        let mut r = vec![0.0; self.n_free()];
        self.apply_input(g, &mut r);
        let su = self.stiffness.mul(u);
        for i in 0..r.len() {
            r[i] = (r[i] - su[i] - self.damping[i] * v[i]) / self.mass[i];
        }
        r
    }

    /// Solution of the static problem with boundary loads `λ`, `σ` at `x = ℓ` (full vector).
    pub fn solve_elliptic(&self, lambda: f64, sigma: f64) -> Result<Vec<f64>> {
        if self.is_dirichlet() {
            return Err(Error::InvalidArgument(
                "boundary loads need a free end at x = ell".into(),
            ));
        }
        let mut rhs = vec![0.0; self.n_free()];
        for (j, load) in [lambda, sigma].into_iter().enumerate() {
            if let BoundaryDof::Free(k) = self.boundary[j] {
                rhs[k] += load;
            }
        }
        let chol = self.stiffness.cholesky()?;
        chol.solve_in_place(&mut rhs);
        Ok(self.to_full(&rhs, [0.0; 2]))
    }

    /// Lowest `count` eigenpairs of `S x = λ M x`, with `xᵀ M x = 1`.
    pub fn eigenmodes(&self, count: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n_free();
        let count = count.min(n);
        let sq: Vec<f64> = self.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(BANDWIDTH)..(i + BANDWIDTH + 1).min(n) {
                a[(i, j)] = self.stiffness.get(i, j) * sq[i] * sq[j];
            }
        }
        let eig = SymmetricEigen::new(a);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
        let mut vals = Vec::with_capacity(count);
        let mut vecs = Vec::with_capacity(count);
        for &k in order.iter().take(count) {
            vals.push(eig.eigenvalues[k]);
            let col = eig.eigenvectors.column(k);
            let mut x: Vec<f64> = (0..n).map(|i| col[i] * sq[i]).collect();
            // Fix the sign so the largest entry is positive.
            let big = x.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            if big < 0.0 {
                x.iter_mut().for_each(|v| *v = -*v);
            }
            vecs.push(x);
        }
        (vals, vecs)
    }

    /// `min_e h_e / max{v₁, v₂}(x_mid) / 2`.
    pub fn default_dt(&self) -> f64 {
        let m = &self.model;
        self.elements
            .iter()
            .map(|e| {
                let x = e.a + 0.5 * e.h;
                let v = (m.k.value(x) / m.rho).sqrt().max((m.ei.value(x) / m.i_rho).sqrt());
                e.h / v
            })
            .fold(f64::INFINITY, f64::min)
            / 2.0
    }
}

/// Assembles mass, stiffness and damping for `model` on `mesh`.
pub fn assemble(model: &BeamModel, mesh: Mesh) -> Result<Discretization> {
    if (mesh.ell() - model.ell).abs() > 1e-12 * model.ell || mesh.nodes[0] != 0.0 {
        return Err(Error::InvalidArgument("mesh does not span [0, ell]".into()));
    }
    let ne = mesh.n_elements();
    let nn = ne + 1;
    let nfull = 2 * nn;
    let elements: Vec<Element> =
        (0..ne).map(|e| Element::new(model, mesh.nodes[e], mesh.nodes[e + 1])).collect();

    let mut s0 = SymBand::zeros(nfull, BANDWIDTH);
    let mut mass_full = vec![0.0; nfull];
    for (e, el) in elements.iter().enumerate() {
        let h = el.h;
        let g = [-1.0 / h, 0.5, 1.0 / h, 0.5];
        let b = [0.0, -1.0 / h, 0.0, 1.0 / h];
        let base = 2 * e;
        for p in 0..4 {
            for q in 0..=p {
                let v = el.k_int * g[p] * g[q] + el.ei_int * b[p] * b[q];
                if v != 0.0 {
                    s0.add(base + p, base + q, v);
                }
            }
        }
        for node in [e, e + 1] {
            mass_full[2 * node] += 0.5 * h * model.rho;
            mass_full[2 * node + 1] += 0.5 * h * model.i_rho;
        }
    }
    let (gamma, delta) = model.robin_coefficients();
    let bw = 2 * (nn - 1);
    let mut s = s0.clone();
    s.add(bw, bw, gamma);
    s.add(bw + 1, bw + 1, delta);

    let mut constrained = Vec::new();
    let (clamp_w, clamp_psi) = model.clamped_at_origin();
    if clamp_w {
        constrained.push(0);
    }
    if clamp_psi {
        constrained.push(1);
    }
    let dirichlet = model.bc == BoundaryCondition::Dirichlet;
    if dirichlet {
        constrained.push(bw);
        constrained.push(bw + 1);
    }
    let free: Vec<usize> = (0..nfull).filter(|i| !constrained.contains(i)).collect();
    let mut full_to_free = vec![None; nfull];
    for (k, &i) in free.iter().enumerate() {
        full_to_free[i] = Some(k);
    }
    let nf = free.len();
    let (alpha, beta) = model.gains();
    let mut damping = vec![0.0; nf];
    let boundary = if dirichlet {
        [BoundaryDof::Lifted, BoundaryDof::Lifted]
    } else {
        let kw = full_to_free[bw].unwrap();
        let kp = full_to_free[bw + 1].unwrap();
        damping[kw] = alpha;
        damping[kp] = beta;
        [BoundaryDof::Free(kw), BoundaryDof::Free(kp)]
    };
    // Dirichlet: the load is −S_fb g; otherwise g acts directly on the boundary rows.
    let mut input = [vec![0.0; nf], vec![0.0; nf]];
    for j in 0..2 {
        let col = bw + j;
        match boundary[j] {
            BoundaryDof::Free(k) => input[j][k] = 1.0,
            BoundaryDof::Lifted => {
                for r in col.saturating_sub(BANDWIDTH)..col {
                    if let Some(k) = full_to_free[r] {
                        input[j][k] = -s.get(r, col);
                    }
                }
            }
        }
    }
    Ok(Discretization {
        model: model.clone(),
        elements,
        mass: free.iter().map(|&i| mass_full[i]).collect(),
        stiffness: s.restrict(&free),
        stiffness0: s0.restrict(&free),
        damping,
        mass_full,
        s0_full: s0,
        s_full: s,
        boundary,
        input,
        constrained,
        full_to_free,
        free,
        mesh,
    })
}

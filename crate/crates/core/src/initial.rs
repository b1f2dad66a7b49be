//! Named families of initial data on the free dofs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretization::Discretization;
use crate::dynamics::{energies, State};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    /// Mode `index` (1 = lowest) of the pencil `(S, M)` as displacement, unit energy.
    Eigenmode { index: usize },
    /// Polynomials in `x/ℓ`, lowest power first; used as given.
    Polynomial {
        #[serde(default)]
        w: Vec<f64>,
        #[serde(default)]
        psi: Vec<f64>,
        #[serde(default)]
        w_t: Vec<f64>,
        #[serde(default)]
        psi_t: Vec<f64>,
    },
    /// Uniform `[-1, 1]` samples on every free dof, or on the coefficients of
    /// the lowest `modes` eigenmodes when given; scaled to unit energy.
    Random {
        seed: u64,
        #[serde(default)]
        modes: Option<usize>,
    },
}

impl InitialData {
    pub fn build(&self, disc: &Discretization) -> Result<State> {
        match self {
            Self::Eigenmode { index } => eigenmode(disc, *index),
            Self::Polynomial { w, psi, w_t, psi_t } => Ok(polynomial(disc, [w, psi], [w_t, psi_t])),
            Self::Random { seed, modes: None } => random_nodal(disc, *seed),
            Self::Random { seed, modes: Some(m) } => random_modal(disc, *seed, *m),
        }
    }
}

/// Rescales `s` so that `E_{γ,δ} = 1`; the zero state is returned unchanged.
pub fn normalize(disc: &Discretization, s: State) -> State {
    let (_, e) = energies(disc, &s);
    if e > 0.0 {
        s.scaled(1.0 / e.sqrt())
    } else {
        s
    }
}

pub fn eigenmode(disc: &Discretization, index: usize) -> Result<State> {
    if index == 0 || index > disc.n_free() {
        return Err(Error::InvalidArgument(format!(
            "eigenmode index must be in 1..={}, got {index}",
            disc.n_free()
        )));
    }
    let (_, vecs) = disc.eigenmodes(index);
    let u = vecs[index - 1].clone();
    Ok(normalize(disc, State { v: vec![0.0; u.len()], u, t: 0.0 }))
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

pub fn polynomial(disc: &Discretization, disp: [&[f64]; 2], vel: [&[f64]; 2]) -> State {
    let ell = disc.mesh.ell();
    let eval = |c: [&[f64]; 2]| -> Vec<f64> {
        disc.free
            .iter()
            .map(|&i| horner(c[i % 2], disc.mesh.nodes[i / 2] / ell))
            .collect()
    };
    State { u: eval(disp), v: eval(vel), t: 0.0 }
}

pub fn random_nodal(disc: &Discretization, seed: u64) -> Result<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = disc.n_free();
    let u = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let v = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    Ok(normalize(disc, State { u, v, t: 0.0 }))
}

pub fn random_modal(disc: &Discretization, seed: u64, modes: usize) -> Result<State> {
    if modes == 0 || modes > disc.n_free() {
        return Err(Error::InvalidArgument(format!(
            "mode count must be in 1..={}, got {modes}",
            disc.n_free()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, vecs) = disc.eigenmodes(modes);
    let n = disc.n_free();
    let (mut u, mut v) = (vec![0.0; n], vec![0.0; n]);
    for phi in &vecs {
        let (a, b): (f64, f64) = (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
        for i in 0..n {
            u[i] += a * phi[i];
            v[i] += b * phi[i];
        }
    }
    Ok(normalize(disc, State { u, v, t: 0.0 }))
}

//! Distance-based formation shape control.
//!
//! Agents `p_1, ..., p_n` in the plane follow the gradient flow
//! `dp_i/dt = sum_j e_ij (p_j - p_i)` with distance errors
//! `e_ij = |p_i - p_j|^2 - dbar_ij^2`. The flow is the negative gradient of
//! `Phi(p) = |e(p)|^2 / 4`, and its equilibria that are local minima of
//! `Phi` are the locally stable shapes.

mod dynamics;
mod sets;
mod simulate;

use num_rational::BigRational;
use num_traits::Signed;
use thiserror::Error;

use crate::poly::PolyError;
use crate::rational::int;

pub use dynamics::{
    e_matrix, e_matrix_symbolic, equilibrium_rows_symbolic, error_norm, error_vector,
    error_vector_symbolic, flow_rhs, flow_rhs_via_e_matrix, flow_rhs_via_rigidity, hessian,
    hessian_symbolic, potential, rigidity_matrix, rigidity_matrix_symbolic,
};
pub use sets::{
    build_parametric_set, build_semialgebraic_set, cayley_menger, cayley_menger_symbolic,
    gauge_align, gauge_variables, FormationSet, MinorMode, FULL_MODE_MAX_COORDS,
};
pub use simulate::{
    classify_equilibrium, hessian_eigenvalues, potential_slack, random_configuration, simulate, simulate_batch, Classification,
    ClassifyOptions, EquilibriumReport, SimOptions, Simulation, TrajectoryPoint,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormationError {
    #[error("invalid formation: {0}")]
    InvalidSpec(String),
    #[error("configuration has {got} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("configuration has a non-finite coordinate")]
    NonFinite,
    #[error("not an equilibrium: |flow| = {0:e}")]
    NotEquilibrium(f64),
    #[error("trajectory diverged at t = {0}")]
    Diverged(f64),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("cannot fix the gauge: {0}")]
    Gauge(String),
    #[error("{0}")]
    TooLarge(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("eigenvalue computation failed")]
    Eigen,
}

/// Desired squared inter-agent distances on a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct FormationSpec {
    n: usize,
    dim: usize,
    edges: Vec<(usize, usize)>,
    dbar_sq: Vec<BigRational>,
}

impl FormationSpec {
    /// Edges are stored as `(i, j)` with `i < j`, in the given order.
    pub fn new(
        n: usize,
        dim: usize,
        edges: Vec<(usize, usize)>,
        dbar_sq: Vec<BigRational>,
    ) -> Result<Self, FormationError> {
        if n == 0 || dim == 0 {
            return Err(FormationError::InvalidSpec("need at least one agent and dimension".into()));
        }
        if edges.len() != dbar_sq.len() {
            return Err(FormationError::InvalidSpec(format!(
                "{} edges but {} squared distances",
                edges.len(),
                dbar_sq.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        let mut norm = Vec::with_capacity(edges.len());
        for &(i, j) in &edges {
            if i == j {
                return Err(FormationError::InvalidSpec(format!("self loop at agent {i}")));
            }
            if i >= n || j >= n {
                return Err(FormationError::InvalidSpec(format!("edge ({i}, {j}) out of range")));
            }
            let e = (i.min(j), i.max(j));
            if !seen.insert(e) {
                return Err(FormationError::InvalidSpec(format!("duplicate edge ({i}, {j})")));
            }
            norm.push(e);
        }
        if let Some(d) = dbar_sq.iter().find(|d| !d.is_positive()) {
            return Err(FormationError::InvalidSpec(format!(
                "squared distance {d} is not positive"
            )));
        }
        Ok(FormationSpec {
            n,
            dim,
            edges: norm,
            dbar_sq,
        })
    }

    /// Complete graph with edges in lexicographic order.
    pub fn complete(n: usize, dim: usize, dbar_sq: Vec<BigRational>) -> Result<Self, FormationError> {
        FormationSpec::new(n, dim, complete_edges(n), dbar_sq)
    }

    /// Unit square on the complete graph: sides 1, diagonals `sqrt 2`.
    pub fn unit_square() -> Self {
        let d = [1, 2, 1, 1, 2, 1].map(int).to_vec();
        FormationSpec::complete(4, 2, d).expect("valid preset")
    }

    /// Equilateral triangle with unit sides.
    pub fn equilateral() -> Self {
        FormationSpec::complete(3, 2, vec![int(1); 3]).expect("valid preset")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn dbar_sq(&self) -> &[BigRational] {
        &self.dbar_sq
    }

    pub fn coords(&self) -> usize {
        self.n * self.dim
    }

    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.n * (self.n - 1) / 2
    }

    pub(crate) fn check(&self, p: &[f64]) -> Result<(), FormationError> {
        if p.len() != self.coords() {
            return Err(FormationError::DimensionMismatch {
                expected: self.coords(),
                got: p.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn dbar_sq_f64(&self) -> Vec<f64> {
        self.dbar_sq.iter().map(crate::rational::to_f64).collect()
    }
}

pub fn complete_edges(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

/// Stacked agent positions `[p_1x, p_1y, p_2x, ...]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration(Vec<f64>);

impl Configuration {
    pub fn new(p: Vec<f64>) -> Result<Self, FormationError> {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(FormationError::NonFinite);
        }
        Ok(Configuration(p))
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn centroid(&self, dim: usize) -> Vec<f64> {
        let n = self.0.len() / dim;
        let mut c = vec![0.0; dim];
        for (k, v) in self.0.iter().enumerate() {
            c[k % dim] += v;
        }
        c.iter_mut().for_each(|v| *v /= n as f64);
        c
    }
}

impl std::ops::Deref for Configuration {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Configuration> for Vec<f64> {
    fn from(c: Configuration) -> Self {
        c.0
    }
}

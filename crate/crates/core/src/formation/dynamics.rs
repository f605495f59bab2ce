use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;

use super::{FormationError, FormationSpec};
use crate::poly::Polynomial;

/// Coordinates the dynamics can be written over: floats or polynomials.
trait Coord:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
}

impl<T> Coord for T where
    T: Clone + Add<Output = T> + Sub<Output = T> + Mul<Output = T> + Neg<Output = T>
{
}

struct Ctx<'a, T> {
    spec: &'a FormationSpec,
    p: &'a [T],
    dbar: Vec<T>,
    zero: T,
}

impl<'a, T: Coord> Ctx<'a, T> {
    fn new(spec: &'a FormationSpec, p: &'a [T], dbar: Vec<T>, zero: T) -> Self {
        Ctx { spec, p, dbar, zero }
    }

    fn coord(&self, agent: usize, k: usize) -> T {
        self.p[agent * self.spec.dim + k].clone()
    }

    fn errors(&self) -> Vec<T> {
        let d = self.spec.dim;
        self.spec
            .edges
            .iter()
            .zip(&self.dbar)
            .map(|(&(i, j), dbar)| {
                let mut s = self.zero.clone();
                for k in 0..d {
                    let diff = self.coord(i, k) - self.coord(j, k);
                    s = s + diff.clone() * diff;
                }
                s - dbar.clone()
            })
            .collect()
    }

    fn e_matrix(&self, e: &[T]) -> Vec<Vec<T>> {
        let n = self.spec.n;
        let mut m = vec![vec![self.zero.clone(); n]; n];
        for (&(i, j), eij) in self.spec.edges.iter().zip(e) {
            m[i][i] = m[i][i].clone() + eij.clone();
            m[j][j] = m[j][j].clone() + eij.clone();
            m[i][j] = m[i][j].clone() - eij.clone();
            m[j][i] = m[j][i].clone() - eij.clone();
        }
        m
    }

    fn rigidity(&self) -> Vec<Vec<T>> {
        let d = self.spec.dim;
        let cols = self.spec.coords();
        self.spec
            .edges
            .iter()
            .map(|&(i, j)| {
                let mut row = vec![self.zero.clone(); cols];
                for k in 0..d {
                    let diff = self.coord(i, k) - self.coord(j, k);
                    row[i * d + k] = diff.clone();
                    row[j * d + k] = -diff;
                }
                row
            })
            .collect()
    }

    /// `(E ⊗ I) p`.
    fn kron_rows(&self, e: &[T]) -> Vec<T> {
        let d = self.spec.dim;
        let em = self.e_matrix(e);
        (0..self.spec.coords())
            .map(|r| {
                let (a, k) = (r / d, r % d);
                let mut s = self.zero.clone();
                for (b, eab) in em[a].iter().enumerate() {
                    s = s + eab.clone() * self.coord(b, k);
                }
                s
            })
            .collect()
    }

    fn hessian(&self, e: &[T]) -> Vec<Vec<T>> {
        let d = self.spec.dim;
        let c = self.spec.coords();
        let r = self.rigidity();
        let em = self.e_matrix(e);
        let mut h = vec![vec![self.zero.clone(); c]; c];
        for row in &r {
            for a in 0..c {
                for b in 0..c {
                    let t = row[a].clone() * row[b].clone();
                    h[a][b] = h[a][b].clone() + t.clone() + t;
                }
            }
        }
        for a in 0..self.spec.n {
            for b in 0..self.spec.n {
                for k in 0..d {
                    h[a * d + k][b * d + k] = h[a * d + k][b * d + k].clone() + em[a][b].clone();
                }
            }
        }
        h
    }
}

fn numeric<'a>(spec: &'a FormationSpec, p: &'a [f64]) -> Result<Ctx<'a, f64>, FormationError> {
    spec.check(p)?;
    Ok(Ctx::new(spec, p, spec.dbar_sq_f64(), 0.0))
}

fn symbolic<'a>(
    spec: &'a FormationSpec,
    p: &'a [Polynomial],
    dbar: Option<&[Polynomial]>,
) -> Result<Ctx<'a, Polynomial>, FormationError> {
    if p.len() != spec.coords() {
        return Err(FormationError::DimensionMismatch {
            expected: spec.coords(),
            got: p.len(),
        });
    }
    let nvars = p.first().map_or(0, |q| q.nvars());
    if p.iter().any(|q| q.nvars() != nvars) {
        return Err(FormationError::InvalidSpec("position polynomials disagree on variables".into()));
    }
    let dbar = match dbar {
        Some(d) if d.len() != spec.edges.len() || d.iter().any(|q| q.nvars() != nvars) => {
            return Err(FormationError::InvalidSpec("one distance polynomial per edge required".into()))
        }
        Some(d) => d.to_vec(),
        None => spec
            .dbar_sq
            .iter()
            .map(|c: &BigRational| Polynomial::constant(nvars, c.clone()))
            .collect(),
    };
    Ok(Ctx::new(spec, p, dbar, Polynomial::zero(nvars)))
}

fn to_matrix(rows: Vec<Vec<f64>>, ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

pub fn error_vector(spec: &FormationSpec, p: &[f64]) -> Result<DVector<f64>, FormationError> {
    Ok(DVector::from_vec(numeric(spec, p)?.errors()))
}

pub fn error_norm(spec: &FormationSpec, p: &[f64]) -> Result<f64, FormationError> {
    Ok(error_vector(spec, p)?.norm())
}

/// `Phi(p) = |e(p)|^2 / 4`.
pub fn potential(spec: &FormationSpec, p: &[f64]) -> Result<f64, FormationError> {
    Ok(0.25 * error_vector(spec, p)?.norm_squared())
}

/// Agent-wise velocities `sum_j e_ij (p_j - p_i)`.
pub fn flow_rhs(spec: &FormationSpec, p: &[f64]) -> Result<DVector<f64>, FormationError> {
    let ctx = numeric(spec, p)?;
    let e = ctx.errors();
    let d = spec.dim;
    let mut v = DVector::zeros(spec.coords());
    for (&(i, j), eij) in spec.edges.iter().zip(&e) {
        for k in 0..d {
            let diff = p[j * d + k] - p[i * d + k];
            v[i * d + k] += eij * diff;
            v[j * d + k] -= eij * diff;
        }
    }
    Ok(v)
}

/// `-R(p)^T e(p)`.
pub fn flow_rhs_via_rigidity(spec: &FormationSpec, p: &[f64]) -> Result<DVector<f64>, FormationError> {
    let r = rigidity_matrix(spec, p)?;
    let e = error_vector(spec, p)?;
    Ok(-(r.transpose() * e))
}

/// `-(E(p) ⊗ I) p`.
pub fn flow_rhs_via_e_matrix(spec: &FormationSpec, p: &[f64]) -> Result<DVector<f64>, FormationError> {
    let ctx = numeric(spec, p)?;
    let e = ctx.errors();
    Ok(-DVector::from_vec(ctx.kron_rows(&e)))
}

pub fn e_matrix(spec: &FormationSpec, p: &[f64]) -> Result<DMatrix<f64>, FormationError> {
    let ctx = numeric(spec, p)?;
    let e = ctx.errors();
    Ok(to_matrix(ctx.e_matrix(&e), spec.n))
}

pub fn rigidity_matrix(spec: &FormationSpec, p: &[f64]) -> Result<DMatrix<f64>, FormationError> {
    let ctx = numeric(spec, p)?;
    Ok(to_matrix(ctx.rigidity(), spec.coords()))
}

/// Hessian of `Phi`, assembled as `2 R^T R + E ⊗ I`.
pub fn hessian(spec: &FormationSpec, p: &[f64]) -> Result<DMatrix<f64>, FormationError> {
    let ctx = numeric(spec, p)?;
    let e = ctx.errors();
    Ok(to_matrix(ctx.hessian(&e), spec.coords()))
}

/// Distance errors as quadratic polynomials in the entries of `p`. With
/// `dbar` given, the squared distances are polynomials too.
pub fn error_vector_symbolic(
    spec: &FormationSpec,
    p: &[Polynomial],
    dbar: Option<&[Polynomial]>,
) -> Result<Vec<Polynomial>, FormationError> {
    Ok(symbolic(spec, p, dbar)?.errors())
}

pub fn e_matrix_symbolic(
    spec: &FormationSpec,
    p: &[Polynomial],
    dbar: Option<&[Polynomial]>,
) -> Result<Vec<Vec<Polynomial>>, FormationError> {
    let ctx = symbolic(spec, p, dbar)?;
    let e = ctx.errors();
    Ok(ctx.e_matrix(&e))
}

pub fn rigidity_matrix_symbolic(
    spec: &FormationSpec,
    p: &[Polynomial],
) -> Result<Vec<Vec<Polynomial>>, FormationError> {
    Ok(symbolic(spec, p, None)?.rigidity())
}

/// The rows of `(E(p) ⊗ I) p`, which vanish exactly at equilibria.
pub fn equilibrium_rows_symbolic(
    spec: &FormationSpec,
    p: &[Polynomial],
    dbar: Option<&[Polynomial]>,
) -> Result<Vec<Polynomial>, FormationError> {
    let ctx = symbolic(spec, p, dbar)?;
    let e = ctx.errors();
    Ok(ctx.kron_rows(&e))
}

pub fn hessian_symbolic(
    spec: &FormationSpec,
    p: &[Polynomial],
    dbar: Option<&[Polynomial]>,
) -> Result<Vec<Vec<Polynomial>>, FormationError> {
    let ctx = symbolic(spec, p, dbar)?;
    let e = ctx.errors();
    Ok(ctx.hessian(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn two_agents() -> FormationSpec {
        FormationSpec::complete(2, 2, vec![int(1)]).unwrap()
    }

    #[test]
    fn two_agent_examples() {
        let spec = two_agents();
        let p = [0.0, 0.0, 2.0, 0.0];
        assert_eq!(error_vector(&spec, &p).unwrap().as_slice(), &[3.0]);
        assert_eq!(flow_rhs(&spec, &p).unwrap().as_slice(), &[6.0, 0.0, -6.0, 0.0]);
        let e = e_matrix(&spec, &p).unwrap();
        assert_eq!(e, DMatrix::from_row_slice(2, 2, &[3.0, -3.0, -3.0, 3.0]));
        let r = rigidity_matrix(&spec, &p).unwrap();
        assert_eq!(r.as_slice(), &[-2.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn unit_square_is_at_rest() {
        let spec = FormationSpec::unit_square();
        let p = [0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        assert!(error_vector(&spec, &p).unwrap().iter().all(|&v| v == 0.0));
        assert!(flow_rhs(&spec, &p).unwrap().iter().all(|&v| v == 0.0));
        let h = hessian(&spec, &p).unwrap();
        let eig = nalgebra::SymmetricEigen::new(h).eigenvalues;
        assert!(eig.iter().all(|&v| v >= -1e-8));
        assert_eq!(eig.iter().filter(|v| v.abs() < 1e-6).count(), 3);
    }

    #[test]
    fn dimension_mismatch() {
        let spec = two_agents();
        assert!(matches!(
            flow_rhs(&spec, &[0.0; 3]),
            Err(FormationError::DimensionMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn three_formulations_agree() {
        let spec = FormationSpec::unit_square();
        let p = [0.3, -1.2, 1.7, 0.1, 0.9, 1.4, -0.6, 0.8];
        let a = flow_rhs(&spec, &p).unwrap();
        let b = flow_rhs_via_rigidity(&spec, &p).unwrap();
        let c = flow_rhs_via_e_matrix(&spec, &p).unwrap();
        assert!((&a - &b).amax() <= 1e-12);
        assert!((&a - &c).amax() <= 1e-12);
    }

    #[test]
    fn symbolic_matches_numeric() {
        let spec = FormationSpec::unit_square();
        let vars: Vec<Polynomial> = (0..8).map(|i| Polynomial::var(8, i)).collect();
        let p = [0.3, -1.2, 1.7, 0.1, 0.9, 1.4, -0.6, 0.8];
        let h = hessian_symbolic(&spec, &vars, None).unwrap();
        let hn = hessian(&spec, &p).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert!((h[i][j].evaluate(&p).unwrap() - hn[(i, j)]).abs() < 1e-12);
            }
        }
        let rows = equilibrium_rows_symbolic(&spec, &vars, None).unwrap();
        let f = flow_rhs(&spec, &p).unwrap();
        for (r, fv) in rows.iter().zip(f.iter()) {
            assert_eq!(r.degree(), 3);
            assert!((r.evaluate(&p).unwrap() + fv).abs() < 1e-12);
        }
    }
}

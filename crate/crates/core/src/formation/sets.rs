use num_rational::BigRational;
use num_traits::{One, Zero};

use super::dynamics::{equilibrium_rows_symbolic, error_vector_symbolic, hessian_symbolic};
use super::{Configuration, FormationError, FormationSpec};
use crate::det::{bareiss_determinant, leading_principal_minors, polynomial_determinant, principal_minors};
use crate::poly::Polynomial;
use crate::psatz::SemialgebraicSet;

/// Largest coordinate count for which every principal minor is built
/// without an explicit override.
pub const FULL_MODE_MAX_COORDS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MinorMode {
    /// Leading principal minors of the trailing `(2n - 3)` block.
    Reduced,
    /// Every principal minor.
    Full,
}

/// A semialgebraic set describing locally stable incorrect equilibria,
/// with the bookkeeping needed to evaluate it at configurations.
#[derive(Clone, Debug)]
pub struct FormationSet {
    pub set: SemialgebraicSet,
    pub variable_names: Vec<String>,
    pub mode: MinorMode,
    pub gauge: bool,
    /// Hessian row/column indices of each minor, in the order of the
    /// leading entries of `set.f()`.
    pub minor_indices: Vec<Vec<usize>>,
    /// Number of trailing squared-distance variables (0 or the edge count).
    pub distance_vars: usize,
}

impl FormationSet {
    /// The variable values of a configuration: after gauge alignment when
    /// the set is gauge-fixed, followed by `dbar_sq` for parametric sets.
    pub fn point(&self, p: &[f64], dbar_sq: Option<&[f64]>) -> Result<Vec<f64>, FormationError> {
        let mut x = if self.gauge {
            gauge_variables(&gauge_align(p, 2)?)
        } else {
            p.to_vec()
        };
        match (self.distance_vars, dbar_sq) {
            (0, _) => {}
            (k, Some(d)) if d.len() == k => x.extend_from_slice(d),
            _ => {
                return Err(FormationError::InvalidSpec(
                    "parametric set needs one squared distance per edge".into(),
                ))
            }
        }
        if x.len() != self.set.nvars() {
            return Err(FormationError::DimensionMismatch {
                expected: self.set.nvars(),
                got: x.len(),
            });
        }
        Ok(x)
    }
}

/// Moves agent 1 to the origin and rotates agent 2 onto the positive
/// y-axis.
pub fn gauge_align(p: &[f64], dim: usize) -> Result<Configuration, FormationError> {
    if dim != 2 {
        return Err(FormationError::Gauge("only planar formations are supported".into()));
    }
    if p.len() < 4 || p.len() % 2 != 0 {
        return Err(FormationError::Gauge("need at least two planar agents".into()));
    }
    let (ox, oy) = (p[0], p[1]);
    let (x2, y2) = (p[2] - ox, p[3] - oy);
    let r = x2.hypot(y2);
    if r < 1e-12 {
        return Err(FormationError::Gauge("agents 1 and 2 coincide".into()));
    }
    let (ux, uy) = (x2 / r, y2 / r);
    let mut out = Vec::with_capacity(p.len());
    for pt in p.chunks(2) {
        let (x, y) = (pt[0] - ox, pt[1] - oy);
        out.push(uy * x - ux * y);
        out.push(ux * x + uy * y);
    }
    out[0] = 0.0;
    out[1] = 0.0;
    out[2] = 0.0;
    Configuration::new(out)
}

/// The free coordinates of a gauge-aligned configuration: `p2y, p3x, p3y, ...`.
pub fn gauge_variables(aligned: &[f64]) -> Vec<f64> {
    aligned[3..].to_vec()
}

fn coordinate_names(n: usize, gauge: bool) -> Vec<String> {
    let mut names = Vec::new();
    for a in 1..=n {
        for axis in ["x", "y"] {
            names.push(format!("p{a}{axis}"));
        }
    }
    if gauge {
        names.drain(..3);
    }
    names
}

/// Position polynomials for all `2n` coordinates; under the gauge the first
/// three are zero and the rest are variables `0..2n-3`.
fn positions(n: usize, gauge: bool, nvars: usize) -> Vec<Polynomial> {
    (0..2 * n)
        .map(|k| {
            if gauge {
                if k < 3 {
                    Polynomial::zero(nvars)
                } else {
                    Polynomial::var(nvars, k - 3)
                }
            } else {
                Polynomial::var(nvars, k)
            }
        })
        .collect()
}

fn submatrix(m: &[Vec<Polynomial>], idx: &[usize]) -> Vec<Vec<Polynomial>> {
    idx.iter()
        .map(|&i| idx.iter().map(|&j| m[i][j].clone()).collect())
        .collect()
}

struct Pieces {
    h: Vec<Polynomial>,
    g: Polynomial,
    minors: Vec<Polynomial>,
    minor_indices: Vec<Vec<usize>>,
}

fn pieces(
    spec: &FormationSpec,
    p: &[Polynomial],
    dbar: Option<&[Polynomial]>,
    mode: MinorMode,
    force: bool,
) -> Result<Pieces, FormationError> {
    let c = spec.coords();
    let h = equilibrium_rows_symbolic(spec, p, dbar)?;
    let e = error_vector_symbolic(spec, p, dbar)?;
    let nvars = p[0].nvars();
    let g = e
        .iter()
        .fold(Polynomial::zero(nvars), |acc, ei| &acc + &(ei * ei));
    let hess = hessian_symbolic(spec, p, dbar)?;
    let (minors, minor_indices) = match mode {
        MinorMode::Reduced => {
            if c < 4 {
                return Err(FormationError::InvalidSpec(
                    "reduced minors need at least two planar agents".into(),
                ));
            }
            let idx: Vec<usize> = (3..c).collect();
            let minors = leading_principal_minors(&submatrix(&hess, &idx));
            let labels = (1..=idx.len()).map(|k| idx[..k].to_vec()).collect();
            (minors, labels)
        }
        MinorMode::Full => {
            if c > FULL_MODE_MAX_COORDS && !force {
                return Err(FormationError::TooLarge(format!(
                    "{} principal minors of a {c}x{c} Hessian; pass force to build them",
                    (1u128 << c.min(127)) - 1
                )));
            }
            if c >= 31 {
                return Err(FormationError::TooLarge(format!("{c} coordinates")));
            }
            // Translations lie in the kernel of the Hessian at every
            // configuration, so larger minors vanish identically.
            let max_rank = c.saturating_sub(spec.dim());
            let mut computed = principal_minors(&hess, max_rank).into_iter().peekable();
            let mut minors = Vec::with_capacity((1 << c) - 1);
            let mut subsets = Vec::with_capacity((1 << c) - 1);
            for mask in 1u32..(1 << c) {
                let s: Vec<usize> = (0..c).filter(|&i| mask & (1 << i) != 0).collect();
                match computed.next_if(|(t, _)| *t == s) {
                    Some((_, m)) => minors.push(m),
                    None => minors.push(Polynomial::zero(nvars)),
                }
                subsets.push(s);
            }
            (minors, subsets)
        }
    };
    Ok(Pieces {
        h,
        g,
        minors,
        minor_indices,
    })
}

/// The set `{f_i >= 0, |e|^2 != 0, (E ⊗ I) p = 0}` whose points are the
/// incorrect equilibria passing the chosen principal-minor test.
///
/// Under `gauge`, agent 1 is pinned to the origin and agent 2 to the
/// y-axis by substitution; all equilibrium rows are kept.
pub fn build_semialgebraic_set(
    spec: &FormationSpec,
    mode: MinorMode,
    gauge: bool,
    force: bool,
) -> Result<FormationSet, FormationError> {
    if spec.dim() != 2 {
        return Err(FormationError::InvalidSpec("only planar formations are supported".into()));
    }
    if gauge && spec.n() < 2 {
        return Err(FormationError::Gauge("need at least two agents".into()));
    }
    let n = spec.n();
    let nvars = if gauge { 2 * n - 3 } else { 2 * n };
    let p = positions(n, gauge, nvars);
    let parts = pieces(spec, &p, None, mode, force)?;
    let set = SemialgebraicSet::new(nvars, parts.minors, vec![parts.g], parts.h)
        .map_err(|e| FormationError::InvalidSpec(e.to_string()))?;
    Ok(FormationSet {
        set,
        variable_names: coordinate_names(n, gauge),
        mode,
        gauge,
        minor_indices: parts.minor_indices,
        distance_vars: 0,
    })
}

fn cm_matrix<T: Clone>(edges: &[(usize, usize)], d: &[T], zero: T, one: T) -> Vec<Vec<T>> {
    let mut m = vec![vec![zero; 5]; 5];
    for k in 1..5 {
        m[0][k] = one.clone();
        m[k][0] = one.clone();
    }
    for (&(i, j), v) in edges.iter().zip(d) {
        m[i + 1][j + 1] = v.clone();
        m[j + 1][i + 1] = v.clone();
    }
    m
}

fn check_k4(spec: &FormationSpec) -> Result<(), FormationError> {
    if spec.n() != 4 || !spec.is_complete() {
        return Err(FormationError::InvalidSpec(format!(
            "the Cayley-Menger determinant needs the complete graph on 4 agents, got {} edges on {} agents",
            spec.edges().len(),
            spec.n()
        )));
    }
    Ok(())
}

/// Bordered determinant of the squared distances of four points. It
/// vanishes when the four points can lie in a plane.
pub fn cayley_menger(spec: &FormationSpec) -> Result<BigRational, FormationError> {
    check_k4(spec)?;
    let m = cm_matrix(spec.edges(), spec.dbar_sq(), BigRational::zero(), BigRational::one());
    Ok(bareiss_determinant(&m))
}

/// As [`cayley_menger`] with polynomial squared distances, one per edge of
/// `spec` in its edge order.
pub fn cayley_menger_symbolic(
    spec: &FormationSpec,
    d: &[Polynomial],
) -> Result<Polynomial, FormationError> {
    check_k4(spec)?;
    if d.len() != 6 {
        return Err(FormationError::InvalidSpec("six squared distances required".into()));
    }
    let nvars = d[0].nvars();
    let m = cm_matrix(spec.edges(), d, Polynomial::zero(nvars), Polynomial::one(nvars));
    Ok(polynomial_determinant(&m))
}

/// The gauge-fixed set with the six squared distances of a four-agent
/// formation as extra unknowns `d_ij`, constrained by a vanishing
/// Cayley-Menger determinant and `d_ij >= 0`. Only the graph of `template`
/// is used.
pub fn build_parametric_set(
    template: &FormationSpec,
    mode: MinorMode,
    force: bool,
) -> Result<FormationSet, FormationError> {
    check_k4(template)?;
    if template.dim() != 2 {
        return Err(FormationError::InvalidSpec("only planar formations are supported".into()));
    }
    let npos = 5;
    let nvars = npos + 6;
    let p = positions(4, true, nvars);
    let d: Vec<Polynomial> = (0..6).map(|k| Polynomial::var(nvars, npos + k)).collect();
    let parts = pieces(template, &p, Some(&d), mode, force)?;
    let mut h = parts.h;
    h.push(cayley_menger_symbolic(template, &d)?);
    let mut f = parts.minors;
    f.extend(d.iter().cloned());
    let set = SemialgebraicSet::new(nvars, f, vec![parts.g], h)
        .map_err(|e| FormationError::InvalidSpec(e.to_string()))?;
    let mut names = coordinate_names(4, true);
    names.extend(template.edges().iter().map(|(i, j)| format!("d{}{}", i + 1, j + 1)));
    Ok(FormationSet {
        set,
        variable_names: names,
        mode,
        gauge: true,
        minor_indices: parts.minor_indices,
        distance_vars: 6,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    #[test]
    fn unit_square_reduced_counts() {
        let fs = build_semialgebraic_set(&FormationSpec::unit_square(), MinorMode::Reduced, true, false)
            .unwrap();
        assert_eq!(fs.set.nvars(), 5);
        assert_eq!(fs.set.h().len(), 8);
        assert_eq!(fs.set.g().len(), 1);
        assert_eq!(fs.set.f().len(), 5);
        assert!(fs.set.h().iter().all(|h| h.degree() == 3));
        assert_eq!(fs.set.g()[0].degree(), 4);
        let degs: Vec<u32> = fs.set.f().iter().map(|f| f.degree()).collect();
        assert_eq!(degs, vec![2, 4, 6, 8, 10]);
        assert_eq!(fs.variable_names, ["p2y", "p3x", "p3y", "p4x", "p4y"]);
    }

    #[test]
    fn full_mode_is_capped() {
        let spec = FormationSpec::complete(5, 2, vec![int(1); 10]).unwrap();
        assert!(matches!(
            build_semialgebraic_set(&spec, MinorMode::Full, false, false),
            Err(FormationError::TooLarge(_))
        ));
    }

    #[test]
    fn full_mode_for_triangle() {
        let fs = build_semialgebraic_set(&FormationSpec::equilateral(), MinorMode::Full, false, false)
            .unwrap();
        assert_eq!(fs.set.nvars(), 6);
        assert_eq!(fs.set.f().len(), 63);
        assert_eq!(fs.set.h().len(), 6);
        assert!(fs.set.f()[62].is_zero());
    }

    #[test]
    fn minors_beyond_the_rank_bound_vanish() {
        let spec = FormationSpec::equilateral();
        let p: Vec<Polynomial> = (0..6).map(|i| Polynomial::var(6, i)).collect();
        let h = hessian_symbolic(&spec, &p, None).unwrap();
        assert!(polynomial_determinant(&submatrix(&h, &[0, 1, 2, 3, 4])).is_zero());
        assert!(polynomial_determinant(&submatrix(&h, &[0, 1, 2, 4, 5])).is_zero());
        assert!(!polynomial_determinant(&submatrix(&h, &[0, 1, 2, 3])).is_zero());
    }

    #[test]
    fn unit_square_full_counts() {
        let fs = build_semialgebraic_set(&FormationSpec::unit_square(), MinorMode::Full, false, false)
            .unwrap();
        assert_eq!(fs.set.nvars(), 8);
        assert_eq!(fs.set.h().len(), 8);
        assert_eq!(fs.set.g().len(), 1);
        assert_eq!(fs.set.f().len(), 255);
        assert_eq!(fs.minor_indices[254], (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn cayley_menger_values() {
        assert_eq!(cayley_menger(&FormationSpec::unit_square()).unwrap(), int(0));
        let tetra = FormationSpec::complete(4, 2, vec![int(1); 6]).unwrap();
        assert_eq!(cayley_menger(&tetra).unwrap(), int(4));
        assert!(cayley_menger(&FormationSpec::equilateral()).is_err());
    }

    #[test]
    fn parametric_set_specializes_to_the_unit_square() {
        let square = FormationSpec::unit_square();
        let par = build_parametric_set(&square, MinorMode::Reduced, false).unwrap();
        assert_eq!(par.set.nvars(), 11);
        assert_eq!(par.set.h().len(), 9);
        assert_eq!(par.set.f().len(), 11);
        assert_eq!(par.variable_names[5..], ["d12", "d13", "d14", "d23", "d24", "d34"]);

        let fixed = build_semialgebraic_set(&square, MinorMode::Reduced, true, false).unwrap();
        let mut values: Vec<Option<BigRational>> = vec![None; 5];
        values.extend(square.dbar_sq().iter().cloned().map(Some));
        let sub = |p: &Polynomial| p.substitute(&values).unwrap();
        for (a, b) in par.set.h()[..8].iter().zip(fixed.set.h()) {
            assert_eq!(sub(a), *b);
        }
        assert!(sub(&par.set.h()[8]).is_zero());
        for (a, b) in par.set.f()[..5].iter().zip(fixed.set.f()) {
            assert_eq!(sub(a), *b);
        }
        assert_eq!(sub(&par.set.g()[0]), fixed.set.g()[0]);
    }

    #[test]
    fn gauge_alignment() {
        let p = [1.0, 1.0, 2.0, 2.0, 0.0, 3.0];
        let a = gauge_align(&p, 2).unwrap();
        assert_eq!(&a[..3], &[0.0, 0.0, 0.0]);
        assert!((a[3] - 2f64.sqrt()).abs() < 1e-15);
        // distances preserved
        let d13 = (1.0f64 + 4.0).sqrt();
        assert!((a[4].hypot(a[5]) - d13).abs() < 1e-14);
        assert!(gauge_align(&[0.0, 0.0, 0.0, 0.0], 2).is_err());
    }
}

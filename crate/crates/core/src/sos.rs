//! Sum-of-squares tests through Gram matrices.
//!
//! `F` is a sum of squares iff `F = z^T Q z` for some PSD `Q`, where `z` is a
//! vector of monomials of degree at most `deg(F) / 2`. Matching the
//! coefficients of both sides gives one affine constraint per monomial, and
//! the PSD condition makes the search a semidefinite feasibility problem.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::poly::{homogeneous_basis, monomial_basis, Monomial, MonomialVector, Polynomial};
use crate::rational::{from_f64_exact, int, rationalize, to_f64, DEFAULT_MAX_DENOMINATOR};
use crate::sdp::{
    self, min_eigenvalue, BlockSpec, SdpError, SdpFeasibilityProblem, SdpVar, SolveOptions,
    SolveStatus,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SosError {
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error("Gram matrix is indefinite: min eigenvalue {0:.3e}")]
    Indefinite(f64),
    #[error("Gram matrix is {rows}x{cols} but the monomial vector has {len} entries")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },
    #[error("template has {0} parameters but an affine row references parameter {1}")]
    ParamOutOfRange(usize, usize),
}

#[derive(Clone, Debug)]
pub struct SosOptions {
    pub solve: SolveOptions,
    /// Override for the half-degree of the monomial basis.
    pub basis_degree: Option<u32>,
    /// Try to round the Gram matrix to an exact rational certificate.
    pub round: bool,
    pub max_denominator: u64,
}

impl Default for SosOptions {
    fn default() -> Self {
        SosOptions {
            solve: SolveOptions::default(),
            basis_degree: None,
            round: true,
            max_denominator: DEFAULT_MAX_DENOMINATOR,
        }
    }
}

/// `F ≈ z^T Q z = sum f_i^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramDecomposition {
    pub z: MonomialVector,
    pub q: DMatrix<f64>,
    /// Present when `Q` was rounded to rationals and matches `F` exactly.
    pub exact_q: Option<Vec<Vec<BigRational>>>,
    pub squares: Vec<Polynomial>,
    /// Max coefficient magnitude of `F - z^T Q z`.
    pub residual: f64,
}

impl GramDecomposition {
    pub fn is_exact(&self) -> bool {
        self.exact_q.is_some()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SosOutcome {
    Feasible(GramDecomposition),
    Unknown { reason: String },
}

impl SosOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SosOutcome::Feasible(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionReport {
    pub max_coeff_residual: f64,
    pub min_eig: f64,
    pub passed: bool,
}

/// The monomial vector used for `F`: the degree-`d` slice for a form of
/// degree `2d`, otherwise every monomial of degree at most `d`.
pub fn gram_basis(f: &Polynomial) -> MonomialVector {
    let half = f.degree() / 2;
    if f.is_homogeneous() {
        homogeneous_basis(f.nvars(), half)
    } else {
        monomial_basis(f.nvars(), half)
    }
}

/// Groups the upper-triangle positions of `z z^T` by the product monomial.
fn product_classes(z: &MonomialVector) -> BTreeMap<Monomial, Vec<(usize, usize)>> {
    let mut classes: BTreeMap<Monomial, Vec<(usize, usize)>> = BTreeMap::new();
    for i in 0..z.len() {
        for j in i..z.len() {
            classes.entry(z.get(i).mul(z.get(j))).or_default().push((i, j));
        }
    }
    classes
}

/// `z^T Q z` as an exact polynomial.
pub fn gram_polynomial(q: &[Vec<BigRational>], z: &MonomialVector, nvars: usize) -> Polynomial {
    let mut p = Polynomial::zero(nvars);
    let two = int(2);
    for i in 0..z.len() {
        for j in i..z.len() {
            let c = if i == j { q[i][j].clone() } else { &q[i][j] * &two };
            p.add_term(z.get(i).mul(z.get(j)), c);
        }
    }
    p
}

fn exact_of(q: &DMatrix<f64>) -> Vec<Vec<BigRational>> {
    (0..q.nrows())
        .map(|i| {
            (0..q.ncols())
                .map(|j| from_f64_exact(0.5 * (q[(i, j)] + q[(j, i)])))
                .collect()
        })
        .collect()
}

fn float_of(q: &[Vec<BigRational>]) -> DMatrix<f64> {
    let n = q.len();
    DMatrix::from_fn(n, n, |i, j| to_f64(&q[i][j]))
}

/// Builds the Gram feasibility program for `F` over the basis `z`: one
/// constraint per monomial of `z z^T` or of `F`.
pub fn gram_program(f: &Polynomial, z: &MonomialVector) -> Result<SdpFeasibilityProblem, SdpError> {
    let mut problem = SdpFeasibilityProblem::new(
        vec![BlockSpec {
            name: "Q".into(),
            dim: z.len(),
        }],
        0,
    );
    let classes = product_classes(z);
    let two = int(2);
    for (m, positions) in &classes {
        let coeffs = positions.iter().map(|&(i, j)| {
            let c = if i == j { BigRational::one() } else { two.clone() };
            (SdpVar::Entry { block: 0, row: i, col: j }, c)
        });
        problem.add_constraint(coeffs, f.coefficient(m))?;
    }
    for (m, c) in f.terms() {
        if !classes.contains_key(m) {
            problem.add_constraint(std::iter::empty(), c.clone())?;
        }
    }
    Ok(problem)
}

/// Rounds `q` entrywise, then applies the exact orthogonal projection onto
/// the matching subspace. Per monomial class the correction is uniform over
/// the ordered positions, so the result matches `f` exactly.
fn round_and_project(
    f: &Polynomial,
    z: &MonomialVector,
    q: &DMatrix<f64>,
    max_den: u64,
) -> Option<Vec<Vec<BigRational>>> {
    let n = z.len();
    let mut r: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| rationalize(0.5 * (q[(i, j)] + q[(j, i)]), max_den))
                .collect()
        })
        .collect();
    let classes = product_classes(z);
    for (m, c) in f.terms() {
        if !classes.contains_key(m) && !c.is_zero() {
            return None;
        }
    }
    for (m, positions) in &classes {
        let mut current = BigRational::zero();
        let mut count = 0i64;
        for &(i, j) in positions {
            if i == j {
                current += &r[i][i];
                count += 1;
            } else {
                current += &r[i][j] * int(2);
                count += 2;
            }
        }
        let delta = (f.coefficient(m) - current) / int(count);
        if delta.is_zero() {
            continue;
        }
        for &(i, j) in positions {
            r[i][j] += &delta;
            if i != j {
                r[j][i] += &delta;
            }
        }
    }
    Some(r)
}

/// Decomposes a PSD Gram matrix into squares `sqrt(λ_k) (v_k · z)`.
pub fn extract_squares(
    q: &DMatrix<f64>,
    z: &MonomialVector,
    nvars: usize,
    psd_tol: f64,
) -> Result<Vec<Polynomial>, SosError> {
    if q.nrows() != z.len() || q.ncols() != z.len() {
        return Err(SosError::ShapeMismatch {
            rows: q.nrows(),
            cols: q.ncols(),
            len: z.len(),
        });
    }
    if z.is_empty() {
        return Ok(Vec::new());
    }
    let sym = (q + q.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 100_000)
        .ok_or(SdpError::EigenFailure(z.len()))?;
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -psd_tol {
        return Err(SosError::Indefinite(min));
    }
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut squares = Vec::new();
    for k in order {
        let lambda = eig.eigenvalues[k];
        if lambda <= 0.0 {
            continue;
        }
        let s = lambda.sqrt();
        let v = eig.eigenvectors.column(k);
        // Fix the sign so the leading nonzero coefficient is positive.
        let pivot = v.iter().copied().find(|c| c.abs() > 1e-12).unwrap_or(1.0);
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        let mut p = Polynomial::zero(nvars);
        for (i, m) in z.iter().enumerate() {
            let c = sign * s * v[i];
            if c != 0.0 {
                p.add_term(m.clone(), from_f64_exact(c));
            }
        }
        if !p.is_zero() {
            squares.push(p);
        }
    }
    Ok(squares)
}

/// Exact `L D L^T` with diagonal pivoting; `None` if `q` is not PSD. Each
/// square is `sqrt(d_k) (l_k . z)`, exact whenever `d_k` is a rational
/// square.
fn exact_squares(q: &[Vec<BigRational>], z: &MonomialVector, nvars: usize) -> Option<Vec<Polynomial>> {
    let n = q.len();
    let mut a: Vec<Vec<BigRational>> = q.to_vec();
    let mut active: Vec<usize> = (0..n).collect();
    let mut squares = Vec::new();
    while !active.is_empty() {
        let (pos, &p) = active
            .iter()
            .enumerate()
            .max_by(|x, y| a[*x.1][*x.1].cmp(&a[*y.1][*y.1]))?;
        let d = a[p][p].clone();
        if d.is_negative() {
            return None;
        }
        if d.is_zero() {
            // A PSD matrix with a zero diagonal has that row equal to zero.
            return active
                .iter()
                .all(|&i| active.iter().all(|&j| a[i][j].is_zero()))
                .then_some(squares);
        }
        active.swap_remove(pos);
        let l: Vec<(usize, BigRational)> = active.iter().map(|&i| (i, &a[i][p] / &d)).collect();
        for &(i, ref li) in &l {
            for &(j, ref lj) in &l {
                let delta = li * lj * &d;
                a[i][j] -= delta;
            }
        }
        let scale = exact_sqrt(&d).unwrap_or_else(|| from_f64_exact(to_f64(&d).sqrt()));
        let mut sq = Polynomial::zero(nvars);
        sq.add_term(z.get(p).clone(), scale.clone());
        for (i, li) in l {
            if !li.is_zero() {
                sq.add_term(z.get(i).clone(), &scale * li);
            }
        }
        squares.push(sq);
    }
    Some(squares)
}

fn exact_sqrt(r: &BigRational) -> Option<BigRational> {
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    (&n * &n == *r.numer() && &d * &d == *r.denom()).then(|| BigRational::new(n, d))
}

fn residual_against(f: &Polynomial, q: &[Vec<BigRational>], z: &MonomialVector) -> f64 {
    (f - &gram_polynomial(q, z, f.nvars())).max_abs_coeff()
}

fn decomposition_from(
    f: &Polynomial,
    z: MonomialVector,
    q_float: &DMatrix<f64>,
    options: &SosOptions,
) -> Result<GramDecomposition, SosError> {
    let psd_tol = options.solve.psd_tol;
    let exact_q = if options.round {
        round_and_project(f, &z, q_float, options.max_denominator)
            .filter(|r| min_eigenvalue(&float_of(r)).is_ok_and(|e| e >= -psd_tol))
    } else {
        None
    };
    let (q, residual) = match &exact_q {
        Some(r) => (float_of(r), residual_against(f, r, &z)),
        None => {
            let sym = (q_float + q_float.transpose()) * 0.5;
            let residual = residual_against(f, &exact_of(&sym), &z);
            (sym, residual)
        }
    };
    let squares = match exact_q.as_deref().and_then(|r| exact_squares(r, &z, f.nvars())) {
        Some(s) => s,
        None => extract_squares(&q, &z, f.nvars(), psd_tol)?,
    };
    Ok(GramDecomposition {
        z,
        q,
        exact_q,
        squares,
        residual,
    })
}

/// Searches for a Gram certificate that `F` is a sum of squares.
pub fn sos_check(f: &Polynomial, options: &SosOptions) -> Result<SosOutcome, SosError> {
    if f.is_zero() {
        return Ok(SosOutcome::Feasible(GramDecomposition {
            z: MonomialVector::new(Vec::new()),
            q: DMatrix::zeros(0, 0),
            exact_q: Some(Vec::new()),
            squares: Vec::new(),
            residual: 0.0,
        }));
    }
    if f.degree() % 2 == 1 {
        return Ok(SosOutcome::Unknown {
            reason: "odd degree cannot be SOS".into(),
        });
    }
    let z = match options.basis_degree {
        Some(d) => monomial_basis(f.nvars(), d),
        None => gram_basis(f),
    };
    let problem = gram_program(f, &z)?;
    match sdp::solve(&problem, &options.solve)? {
        SolveStatus::Feasible(sol) => Ok(SosOutcome::Feasible(decomposition_from(
            f,
            z,
            &sol.block_values[0],
            options,
        )?)),
        SolveStatus::Unknown {
            residual,
            diagnostic,
            ..
        } => Ok(SosOutcome::Unknown {
            reason: diagnostic.unwrap_or_else(|| {
                format!("no PSD Gram matrix found (last residual {residual:.3e})")
            }),
        }),
    }
}

/// Recomputes `F - sum f_i^2` and the PSD margin of `Q`.
pub fn verify_decomposition(f: &Polynomial, d: &GramDecomposition, tol: f64) -> DecompositionReport {
    let mut acc = f.clone();
    for s in &d.squares {
        acc = &acc - &(s * s);
    }
    let max_coeff_residual = acc.max_abs_coeff();
    let min_eig = min_eigenvalue(&d.q).unwrap_or(f64::NEG_INFINITY);
    let min_ok = d.q.nrows() == 0 || min_eig >= -tol;
    DecompositionReport {
        max_coeff_residual,
        min_eig,
        passed: max_coeff_residual <= tol && min_ok,
    }
}

// ---------------------------------------------------------------------------
// Templates with unknown coefficients.

/// `constant + sum coeffs[k] * a_k`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AffineExpr {
    pub constant: BigRational,
    pub coeffs: BTreeMap<usize, BigRational>,
}

impl AffineExpr {
    pub fn param(k: usize) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(k, BigRational::one());
        AffineExpr {
            constant: BigRational::zero(),
            coeffs,
        }
    }

    pub fn evaluate(&self, params: &[BigRational]) -> BigRational {
        let mut v = self.constant.clone();
        for (k, c) in &self.coeffs {
            v += c * &params[*k];
        }
        v
    }
}

/// A polynomial whose coefficients are affine in parameters `a_0..a_{p-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyTemplate {
    pub nvars: usize,
    pub nparams: usize,
    pub terms: BTreeMap<Monomial, AffineExpr>,
}

impl PolyTemplate {
    /// `sum_k a_k m_k`, one fresh parameter per monomial.
    pub fn generic(monomials: &[Monomial]) -> Self {
        let nvars = monomials.first().map_or(0, |m| m.nvars());
        let terms = monomials
            .iter()
            .enumerate()
            .map(|(k, m)| (m.clone(), AffineExpr::param(k)))
            .collect();
        PolyTemplate {
            nvars,
            nparams: monomials.len(),
            terms,
        }
    }

    pub fn instantiate(&self, params: &[BigRational]) -> Polynomial {
        let mut p = Polynomial::zero(self.nvars);
        for (m, e) in &self.terms {
            p.add_term(m.clone(), e.evaluate(params));
        }
        p
    }

    fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    fn is_homogeneous(&self) -> bool {
        let mut degs = self.terms.keys().map(|m| m.degree());
        match degs.next() {
            None => true,
            Some(d) => degs.all(|e| e == d),
        }
    }
}

/// Rows of `G a = h`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AffineSystem {
    pub rows: Vec<(BTreeMap<usize, BigRational>, BigRational)>,
}

impl AffineSystem {
    /// Pins every parameter to the given value.
    pub fn fixed(values: &[BigRational]) -> Self {
        AffineSystem {
            rows: values
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let mut row = BTreeMap::new();
                    row.insert(k, BigRational::one());
                    (row, v.clone())
                })
                .collect(),
        }
    }

    fn satisfied_by(&self, params: &[BigRational]) -> bool {
        self.rows.iter().all(|(row, h)| {
            let mut lhs = BigRational::zero();
            for (k, c) in row {
                lhs += c * &params[*k];
            }
            &lhs == h
        })
    }
}

/// One coefficient-matching equation `sum c_ij q_ij = sum c_k a_k + const`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchingConstraint {
    pub monomial: Monomial,
    /// `(i, j)` with `i <= j`, coefficient on the single entry `q_ij`.
    pub gram_terms: Vec<((usize, usize), BigRational)>,
    pub param_terms: Vec<(usize, BigRational)>,
    pub constant: BigRational,
}

fn coeff_prefix(c: &BigRational) -> String {
    if c.is_one() {
        String::new()
    } else {
        c.to_string()
    }
}

impl MatchingConstraint {
    /// Renders as e.g. `q33 + 2q12 = a3`, with `labels[i]` the printed index
    /// of basis entry `i` and parameters printed 1-based. Diagonal entries
    /// come first.
    pub fn render(&self, labels: &[usize]) -> String {
        let mut terms: Vec<(bool, usize, usize, &BigRational)> = self
            .gram_terms
            .iter()
            .map(|&((i, j), ref c)| {
                let (a, b) = (labels[i].min(labels[j]), labels[i].max(labels[j]));
                (i != j, a, b, c)
            })
            .collect();
        terms.sort_by_key(|t| (t.0, t.1, t.2));
        let lhs: Vec<String> = terms
            .iter()
            .map(|(_, a, b, c)| format!("{}q{a}{b}", coeff_prefix(c)))
            .collect();
        let mut rhs: Vec<String> = self
            .param_terms
            .iter()
            .map(|(k, c)| format!("{}a{}", coeff_prefix(c), k + 1))
            .collect();
        if !self.constant.is_zero() || rhs.is_empty() {
            rhs.push(self.constant.to_string());
        }
        let lhs = if lhs.is_empty() { "0".to_string() } else { lhs.join(" + ") };
        format!("{lhs} = {}", rhs.join(" + "))
    }
}

/// The matching equations and SDP for a template over basis `z`, with the
/// parameters as free scalars after the Gram block.
pub fn affine_gram_program(
    template: &PolyTemplate,
    affine: &AffineSystem,
    z: &MonomialVector,
) -> Result<(SdpFeasibilityProblem, Vec<MatchingConstraint>), SosError> {
    for (row, _) in &affine.rows {
        if let Some(&k) = row.keys().find(|&&k| k >= template.nparams) {
            return Err(SosError::ParamOutOfRange(template.nparams, k));
        }
    }
    let mut problem = SdpFeasibilityProblem::new(
        vec![BlockSpec {
            name: "Q".into(),
            dim: z.len(),
        }],
        template.nparams,
    );
    let mut classes: BTreeMap<Monomial, Vec<(usize, usize)>> = product_classes(z);
    for m in template.terms.keys() {
        classes.entry(m.clone()).or_default();
    }
    let two = int(2);
    let mut matching = Vec::new();
    for (m, positions) in &classes {
        let gram_terms: Vec<((usize, usize), BigRational)> = positions
            .iter()
            .map(|&(i, j)| ((i, j), if i == j { BigRational::one() } else { two.clone() }))
            .collect();
        let expr = template.terms.get(m).cloned().unwrap_or_default();
        let mc = MatchingConstraint {
            monomial: m.clone(),
            gram_terms,
            param_terms: expr.coeffs.iter().map(|(k, c)| (*k, c.clone())).collect(),
            constant: expr.constant.clone(),
        };
        let coeffs = mc
            .gram_terms
            .iter()
            .map(|&((i, j), ref c)| (SdpVar::Entry { block: 0, row: i, col: j }, c.clone()))
            .chain(mc.param_terms.iter().map(|(k, c)| (SdpVar::Free(*k), -c.clone())));
        problem.add_constraint(coeffs, mc.constant.clone())?;
        matching.push(mc);
    }
    for (row, h) in &affine.rows {
        problem.add_constraint(row.iter().map(|(k, c)| (SdpVar::Free(*k), c.clone())), h.clone())?;
    }
    Ok((problem, matching))
}

#[derive(Clone, Debug, PartialEq)]
pub enum AffineSosOutcome {
    Feasible {
        params: Vec<f64>,
        /// Present when rounded parameters satisfy `G a = h` exactly.
        exact_params: Option<Vec<BigRational>>,
        decomposition: GramDecomposition,
    },
    Unknown {
        reason: String,
    },
}

/// Jointly chooses template coefficients `a` satisfying `G a = h` and a PSD
/// Gram matrix certifying that the resulting polynomial is SOS.
pub fn sos_with_affine(
    template: &PolyTemplate,
    affine: &AffineSystem,
    options: &SosOptions,
) -> Result<AffineSosOutcome, SosError> {
    let half = template.degree() / 2;
    let z = match options.basis_degree {
        Some(d) => monomial_basis(template.nvars, d),
        None if template.is_homogeneous() => homogeneous_basis(template.nvars, half),
        None => monomial_basis(template.nvars, half),
    };
    let (problem, _) = affine_gram_program(template, affine, &z)?;
    let sol = match sdp::solve(&problem, &options.solve)? {
        SolveStatus::Feasible(sol) => sol,
        SolveStatus::Unknown {
            residual,
            diagnostic,
            ..
        } => {
            return Ok(AffineSosOutcome::Unknown {
                reason: diagnostic.unwrap_or_else(|| {
                    format!("no PSD Gram matrix found (last residual {residual:.3e})")
                }),
            })
        }
    };
    let params = sol.free_values.clone();
    let rounded: Vec<BigRational> = params
        .iter()
        .map(|&v| rationalize(v, options.max_denominator))
        .collect();
    let exact_params = (options.round && affine.satisfied_by(&rounded)).then_some(rounded);
    let target = match &exact_params {
        Some(a) => template.instantiate(a),
        None => {
            let exact: Vec<BigRational> = params.iter().map(|&v| from_f64_exact(v)).collect();
            template.instantiate(&exact)
        }
    };
    let mut decomposition = decomposition_from(&target, z, &sol.block_values[0], options)?;
    if exact_params.is_none() {
        decomposition.exact_q = None;
    }
    Ok(AffineSosOutcome::Feasible {
        params,
        exact_params,
        decomposition,
    })
}

/// Groups monomials of the product `z z^T` for callers that render Gram
/// structure; maps each product monomial to its upper-triangle positions.
pub fn gram_structure(z: &MonomialVector) -> HashMap<Monomial, Vec<(usize, usize)>> {
    product_classes(z).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn x() -> Polynomial {
        Polynomial::var(2, 0)
    }
    fn y() -> Polynomial {
        Polynomial::var(2, 1)
    }

    fn motzkin() -> Polynomial {
        let x2 = &x() * &x();
        let y2 = &y() * &y();
        let a = &(&x2 * &x2) * &y2;
        let b = &(&x2 * &y2) * &y2;
        let c = (&x2 * &y2).scale(&int(-3));
        &(&(&a + &b) + &c) + &Polynomial::one(2)
    }

    #[test]
    fn perfect_square_gives_one_square() {
        let f = (&x() + &y()).pow(2);
        let d = match sos_check(&f, &SosOptions::default()).unwrap() {
            SosOutcome::Feasible(d) => d,
            other => panic!("{other:?}"),
        };
        assert_eq!(d.squares.len(), 1);
        let s = &d.squares[0];
        for m in [Monomial::new(vec![1, 0]), Monomial::new(vec![0, 1])] {
            assert!((to_f64(&s.coefficient(&m)) - 1.0).abs() < 1e-9);
        }
        assert!(verify_decomposition(&f, &d, 1e-9).passed);
    }

    #[test]
    fn sum_of_two_squares_has_identity_gram() {
        let f = &(&x() * &x()) + &(&y() * &y());
        let d = match sos_check(&f, &SosOptions::default()).unwrap() {
            SosOutcome::Feasible(d) => d,
            other => panic!("{other:?}"),
        };
        assert_eq!(d.z.len(), 2);
        assert!((&d.q - DMatrix::<f64>::identity(2, 2)).norm() < 1e-9);
        assert!(d.is_exact());
        assert_eq!(d.residual, 0.0);
    }

    #[test]
    fn thin_gram_set_is_solved() {
        // A rank-two Gram matrix in a larger basis.
        let (x, y) = (x(), y());
        let a = &(&(&x.pow(3).scale(&int(3)) - &(&x.pow(2) * &y).scale(&int(5)))
            + &(&x * &y).scale(&int(4)))
            + &Polynomial::from_int(2, 9);
        let b = &(&x * &y).scale(&int(4)) + &x.scale(&int(3));
        let f = &(&a * &a) + &(&b * &b);
        let d = match sos_check(&f, &SosOptions::default()).unwrap() {
            SosOutcome::Feasible(d) => d,
            other => panic!("{other:?}"),
        };
        assert!(verify_decomposition(&f, &d, 1e-6).passed);
    }

    #[test]
    fn motzkin_is_not_found() {
        let out = sos_check(&motzkin(), &SosOptions::default()).unwrap();
        assert!(!out.is_feasible(), "{out:?}");
    }

    #[test]
    fn odd_degree_is_rejected() {
        let out = sos_check(&x().pow(3), &SosOptions::default()).unwrap();
        assert_eq!(
            out,
            SosOutcome::Unknown {
                reason: "odd degree cannot be SOS".into()
            }
        );
    }

    #[test]
    fn homogeneous_input_uses_the_form_slice() {
        let f = (&(&x() * &x()) + &(&y() * &y())).pow(2);
        let z = gram_basis(&f);
        let rendered: Vec<String> = z.iter().map(|m| m.to_string()).collect();
        assert_eq!(rendered, vec!["x0^2", "x0*x1", "x1^2"]);
    }

    #[test]
    fn extract_squares_examples() {
        let z_xy = MonomialVector::new(vec![Monomial::new(vec![1, 0]), Monomial::new(vec![0, 1])]);

        let sq = extract_squares(&DMatrix::identity(2, 2), &z_xy, 2, 1e-9).unwrap();
        assert_eq!(sq.len(), 2);

        let ones = DMatrix::from_element(2, 2, 1.0);
        let sq = extract_squares(&ones, &z_xy, 2, 1e-9).unwrap();
        assert_eq!(sq.len(), 1);
        let diff = &sq[0] - &(&x() + &y());
        assert!(diff.max_abs_coeff() < 1e-12);

        // z = [1, x], Q = diag(0, 4).
        let z_x1 = MonomialVector::new(vec![Monomial::new(vec![0, 0]), Monomial::new(vec![1, 0])]);
        let q = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 4.0]);
        let sq = extract_squares(&q, &z_x1, 2, 1e-9).unwrap();
        assert_eq!(sq.len(), 1);
        assert!((&sq[0] - &x().scale(&int(2))).max_abs_coeff() < 1e-12);

        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            extract_squares(&bad, &z_xy, 2, 1e-9),
            Err(SosError::Indefinite(_))
        ));
    }

    #[test]
    fn verify_decomposition_detects_perturbation_and_indefiniteness() {
        let f = &(&x() * &x()) + &(&y() * &y());
        let mut d = match sos_check(&f, &SosOptions::default()).unwrap() {
            SosOutcome::Feasible(d) => d,
            other => panic!("{other:?}"),
        };
        assert_eq!(verify_decomposition(&f, &d, 1e-12).max_coeff_residual, 0.0);

        let m = d.squares[0].terms().keys().next().unwrap().clone();
        d.squares[0].add_term(m, crate::rational::ratio(1, 1000));
        let report = verify_decomposition(&f, &d, 1e-6);
        assert!(report.max_coeff_residual > 1e-6);
        assert!(!report.passed);

        let f2 = Polynomial::zero(2);
        let bad = GramDecomposition {
            z: MonomialVector::new(vec![Monomial::new(vec![1, 0])]),
            q: DMatrix::from_element(1, 1, -1.0),
            exact_q: None,
            squares: vec![],
            residual: 0.0,
        };
        assert!(!verify_decomposition(&f2, &bad, 1e-6).passed);
    }

    fn quartic_template() -> PolyTemplate {
        let monomials: Vec<Monomial> = (0..=4u32).map(|k| Monomial::new(vec![4 - k, k])).collect();
        PolyTemplate::generic(&monomials)
    }

    #[test]
    fn quartic_with_square_coefficients_is_feasible() {
        let affine = AffineSystem::fixed(&[int(1), int(0), int(2), int(0), int(1)]);
        let out = sos_with_affine(&quartic_template(), &affine, &SosOptions::default()).unwrap();
        match out {
            AffineSosOutcome::Feasible { params, decomposition, .. } => {
                let expected = [1.0, 0.0, 2.0, 0.0, 1.0];
                for (p, e) in params.iter().zip(expected) {
                    assert!((p - e).abs() < 1e-8);
                }
                assert_eq!(decomposition.z.len(), 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quartic_with_negative_leading_coefficient_is_unknown() {
        let affine = AffineSystem::fixed(&[int(-1), int(0), int(0), int(0), int(0)]);
        let out = sos_with_affine(&quartic_template(), &affine, &SosOptions::default()).unwrap();
        assert!(matches!(out, AffineSosOutcome::Unknown { .. }));
    }

    #[test]
    fn indefinite_quartic_is_unknown() {
        // x^4 - 3x^2y^2 + y^4 is -1 at (1, 1).
        let affine = AffineSystem::fixed(&[int(1), int(0), int(-3), int(0), int(1)]);
        let out = sos_with_affine(&quartic_template(), &affine, &SosOptions::default()).unwrap();
        assert!(matches!(out, AffineSosOutcome::Unknown { .. }));
    }

    #[test]
    fn quartic_matching_constraints_in_graded_order() {
        let z = homogeneous_basis(2, 2);
        let (_, matching) =
            affine_gram_program(&quartic_template(), &AffineSystem::default(), &z).unwrap();
        let rendered: Vec<String> = matching.iter().map(|m| m.render(&[1, 2, 3])).collect();
        // Monomials in graded order: x^4, x^3y, x^2y^2, xy^3, y^4
        assert_eq!(
            rendered,
            vec!["q11 = a1", "2q12 = a2", "q22 + 2q13 = a3", "2q23 = a4", "q33 = a5"]
        );
    }
}

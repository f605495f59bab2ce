//! Semialgebraic sets and bounded-degree Positivstellensatz refutations.
//!
//! A set `{f_i >= 0, g_j != 0, h_k = 0}` is empty iff there are `f` in the
//! cone generated by the `f_i`, `g` in the monoid generated by the `g_j` and
//! `h` in the ideal generated by the `h_k` with `f + g^2 + h = 0`. The search
//! fixes
//!
//! - `g = prod g_j^(2m)`,
//! - `f = sum_S p_S prod_{i in S} f_i` over index subsets `|S| <= depth`,
//!   with SOS multipliers `p_S` represented by Gram matrices,
//! - `h = sum_k q_k h_k` with free polynomial multipliers `q_k`,
//!
//! and matches every coefficient of the identity, which gives a
//! semidefinite feasibility problem for each degree bound.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::poly::{basis_size, monomial_basis, Monomial, MonomialVector, PolyError, Polynomial};
use crate::rational::{int, to_f64, DEFAULT_MAX_DENOMINATOR};
use crate::sdp::{
    self, min_eigenvalue, BlockSpec, ExactPoint, SdpError, SdpFeasibilityProblem, SdpSolution,
    SdpVar, SolveOptions, SolveStatus,
};
use crate::sos::{extract_squares, gram_polynomial, GramDecomposition};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PsatzError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error("multiplier degree {0} must be even")]
    OddDegree(u32),
    #[error("cone depth {depth} exceeds the {available} inequalities")]
    DepthTooLarge { depth: usize, available: usize },
    #[error("monoid power must be at least 1")]
    ZeroMonoidPower,
    #[error("identity degree {0} exceeds the supported maximum")]
    DegreeOverflow(u32),
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("certificate does not match the set: {0}")]
    Structural(String),
}

/// `{x : f_i(x) >= 0, g_j(x) != 0, h_k(x) = 0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SemialgebraicSet {
    nvars: usize,
    f: Vec<Polynomial>,
    g: Vec<Polynomial>,
    h: Vec<Polynomial>,
}

impl SemialgebraicSet {
    pub fn new(
        nvars: usize,
        f: Vec<Polynomial>,
        g: Vec<Polynomial>,
        h: Vec<Polynomial>,
    ) -> Result<Self, PsatzError> {
        for p in f.iter().chain(&g).chain(&h) {
            if p.nvars() != nvars {
                return Err(PolyError::NvarsMismatch(nvars, p.nvars()).into());
            }
        }
        Ok(SemialgebraicSet { nvars, f, g, h })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Inequalities `f_i >= 0`.
    pub fn f(&self) -> &[Polynomial] {
        &self.f
    }

    /// Inequations `g_j != 0`.
    pub fn g(&self) -> &[Polynomial] {
        &self.g
    }

    /// Equations `h_k = 0`.
    pub fn h(&self) -> &[Polynomial] {
        &self.h
    }

    /// Whether `x` satisfies every constraint up to `tol`.
    pub fn contains_point(&self, x: &[f64], tol: f64) -> bool {
        let ev = |p: &Polynomial| p.evaluate(x).unwrap_or(f64::NAN);
        self.f.iter().all(|p| ev(p) >= -tol)
            && self.g.iter().all(|p| ev(p).abs() > tol)
            && self.h.iter().all(|p| ev(p).abs() <= tol)
    }

    /// `prod g_j^(2m)`; the constant 1 when there are no inequations.
    pub fn monoid_element(&self, m: u32) -> Polynomial {
        self.g
            .iter()
            .fold(Polynomial::one(self.nvars), |acc, gi| &acc * &gi.pow(2 * m))
    }
}

/// Degree ladder and monoid powers to try, with a fixed cone depth.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchSchedule {
    pub degrees: Vec<u32>,
    pub monoid_powers: Vec<u32>,
    pub depth: usize,
}

impl Default for SearchSchedule {
    fn default() -> Self {
        SearchSchedule {
            degrees: vec![2, 4, 6],
            monoid_powers: vec![1, 2],
            depth: 1,
        }
    }
}

impl SearchSchedule {
    /// Even degrees `2, 4, ..., max_degree`, powers `1..=max_power`.
    pub fn up_to(max_degree: u32, max_power: u32, depth: usize) -> Self {
        SearchSchedule {
            degrees: (1..=max_degree / 2).map(|k| 2 * k).collect(),
            monoid_powers: (1..=max_power.max(1)).collect(),
            depth,
        }
    }

    pub fn validate(&self) -> Result<(), PsatzError> {
        if self.degrees.is_empty() || self.monoid_powers.is_empty() {
            return Err(PsatzError::Schedule("empty degree ladder or power list".into()));
        }
        if self.degrees.windows(2).any(|w| w[0] > w[1]) {
            return Err(PsatzError::Schedule("degrees must be non-decreasing".into()));
        }
        if let Some(&d) = self.degrees.iter().find(|d| *d % 2 == 1) {
            return Err(PsatzError::OddDegree(d));
        }
        if self.monoid_powers.contains(&0) {
            return Err(PsatzError::ZeroMonoidPower);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeTermLayout {
    pub subset: Vec<usize>,
    pub basis: MonomialVector,
    pub block: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdealTermLayout {
    pub index: usize,
    pub basis: MonomialVector,
    /// First free-variable index of this multiplier's coefficients.
    pub offset: usize,
}

/// A refutation SDP together with the symbol table mapping its blocks and
/// free scalars back to multipliers.
#[derive(Clone, Debug)]
pub struct RefutationProgram {
    pub problem: SdpFeasibilityProblem,
    pub cone_terms: Vec<ConeTermLayout>,
    pub ideal_terms: Vec<IdealTermLayout>,
    pub g_squared: Polynomial,
    pub degree: u32,
    pub degree_total: u32,
    pub monoid_power: u32,
    pub depth: usize,
    pub warnings: Vec<String>,
}

const MAX_IDENTITY_DEGREE: u32 = 64;

fn subsets_up_to(n: usize, depth: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s.last().map_or(0, |&l: &usize| l + 1);
            for i in start..n {
                let mut t: Vec<usize> = s.clone();
                t.push(i);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

struct Plan {
    subsets: Vec<Vec<usize>>,
    degree_total: u32,
    cone_half: Vec<Option<u32>>,
    ideal_deg: Vec<Option<u32>>,
    warnings: Vec<String>,
}

/// Degree bookkeeping only; degrees add under multiplication, so no product
/// is expanded here.
fn plan(set: &SemialgebraicSet, deg: u32, m: u32, depth: usize) -> Result<Plan, PsatzError> {
    if deg % 2 == 1 {
        return Err(PsatzError::OddDegree(deg));
    }
    if depth > set.f.len() {
        return Err(PsatzError::DepthTooLarge {
            depth,
            available: set.f.len(),
        });
    }
    if !set.g.is_empty() && m == 0 {
        return Err(PsatzError::ZeroMonoidPower);
    }
    let subsets = subsets_up_to(set.f.len(), depth);
    let product_deg: Vec<Option<u32>> = subsets
        .iter()
        .map(|s| {
            if s.iter().any(|&i| set.f[i].is_zero()) {
                None
            } else {
                Some(s.iter().map(|&i| set.f[i].degree()).sum())
            }
        })
        .collect();
    let g_squared_deg = if set.g.iter().any(Polynomial::is_zero) {
        0
    } else {
        let g: u64 = set.g.iter().map(|p| u64::from(p.degree())).sum();
        let d = 4 * u64::from(m.max(1)) * g;
        u32::try_from(d).map_err(|_| PsatzError::DegreeOverflow(u32::MAX))?
    };
    let max_product = product_deg.iter().flatten().copied().max().unwrap_or(0);
    let degree_total = (deg + max_product).max(g_squared_deg);
    if degree_total > MAX_IDENTITY_DEGREE {
        return Err(PsatzError::DegreeOverflow(degree_total));
    }
    let mut warnings = Vec::new();
    let cone_half = subsets
        .iter()
        .zip(&product_deg)
        .map(|(s, d)| {
            let Some(d) = d else {
                warnings.push(format!("cone product {s:?} is identically zero; term omitted"));
                return None;
            };
            match degree_total.checked_sub(*d) {
                Some(rest) => Some(rest / 2),
                None => {
                    warnings.push(format!(
                        "cone product {s:?} has degree {d} above the budget {degree_total}; term omitted"
                    ));
                    None
                }
            }
        })
        .collect();
    let ideal_deg = set
        .h
        .iter()
        .enumerate()
        .map(|(k, h)| {
            if h.is_zero() {
                return None;
            }
            let d = degree_total.checked_sub(h.degree());
            if d.is_none() {
                warnings.push(format!(
                    "equation {k} has degree {} above the budget {degree_total}; multiplier omitted",
                    h.degree()
                ));
            }
            d
        })
        .collect();
    Ok(Plan {
        subsets,
        degree_total,
        cone_half,
        ideal_deg,
        warnings,
    })
}

/// Builds the feasibility problem for multiplier degree `deg`, monoid power
/// `m` and cone depth `depth`. Block sizes are checked against `caps` before
/// any constraint is formed.
pub fn build_refutation_program(
    set: &SemialgebraicSet,
    deg: u32,
    m: u32,
    depth: usize,
    caps: &SolveOptions,
) -> Result<RefutationProgram, PsatzError> {
    let plan = plan(set, deg, m, depth)?;
    for w in &plan.warnings {
        log::warn!("{w}");
    }
    let n = set.nvars;
    let dims: Vec<usize> = plan
        .cone_half
        .iter()
        .flatten()
        .map(|&h| basis_size(n, h))
        .collect();
    caps.check_size(&dims, 0)?;
    let g = set.monoid_element(m.max(1));
    let g_squared = &g * &g;

    let mut blocks = Vec::new();
    let mut cone_terms = Vec::new();
    for (subset, half) in plan.subsets.iter().zip(&plan.cone_half) {
        if let Some(h) = half {
            let basis = monomial_basis(n, *h);
            cone_terms.push(ConeTermLayout {
                subset: subset.clone(),
                block: blocks.len(),
                basis: basis.clone(),
            });
            blocks.push(BlockSpec {
                name: format!("p{subset:?}"),
                dim: basis.len(),
            });
        }
    }
    let mut ideal_terms = Vec::new();
    let mut free = 0;
    for (k, d) in plan.ideal_deg.iter().enumerate() {
        if let Some(d) = d {
            let basis = monomial_basis(n, *d);
            let len = basis.len();
            ideal_terms.push(IdealTermLayout {
                index: k,
                basis,
                offset: free,
            });
            free += len;
        }
    }

    let mut rows: HashMap<Monomial, BTreeMap<SdpVar, BigRational>> = HashMap::new();
    let two = int(2);
    for term in &cone_terms {
        let product = term
            .subset
            .iter()
            .fold(Polynomial::one(n), |acc, &i| &acc * &set.f[i]);
        let product = &product;
        let z = &term.basis;
        for i in 0..z.len() {
            for j in i..z.len() {
                let zz = z.get(i).mul(z.get(j));
                let mult = if i == j { BigRational::one() } else { two.clone() };
                let var = SdpVar::Entry {
                    block: term.block,
                    row: i,
                    col: j,
                };
                for (beta, c) in product.terms() {
                    *rows
                        .entry(zz.mul(beta))
                        .or_default()
                        .entry(var)
                        .or_insert_with(BigRational::zero) += c * &mult;
                }
            }
        }
    }
    for term in &ideal_terms {
        let h = &set.h[term.index];
        for (k, mu) in term.basis.iter().enumerate() {
            let var = SdpVar::Free(term.offset + k);
            for (beta, c) in h.terms() {
                *rows
                    .entry(mu.mul(beta))
                    .or_default()
                    .entry(var)
                    .or_insert_with(BigRational::zero) += c;
            }
        }
    }
    for m in g_squared.terms().keys() {
        rows.entry(m.clone()).or_default();
    }
    let mut monomials: Vec<Monomial> = rows.keys().cloned().collect();
    monomials.sort();
    caps.check_size(&[], monomials.len())?;

    let mut problem = SdpFeasibilityProblem::new(blocks, free);
    for mono in monomials {
        let coeffs = rows.remove(&mono).unwrap_or_default();
        let rhs = -g_squared.coefficient(&mono);
        problem.add_constraint(coeffs, rhs)?;
    }
    Ok(RefutationProgram {
        problem,
        cone_terms,
        ideal_terms,
        g_squared,
        degree: deg,
        degree_total: plan.degree_total,
        monoid_power: m,
        depth,
        warnings: plan.warnings,
    })
}

/// Scalar count of the program for `(deg, m)` without building it; used to
/// order schedule attempts.
pub fn estimated_cost(set: &SemialgebraicSet, deg: u32, m: u32, depth: usize) -> Option<usize> {
    let plan = plan(set, deg, m, depth).ok()?;
    let n = set.nvars;
    let blocks: usize = plan
        .cone_half
        .iter()
        .flatten()
        .map(|&h| {
            let d = basis_size(n, h);
            d.saturating_mul(d + 1) / 2
        })
        .sum();
    let free: usize = plan.ideal_deg.iter().flatten().map(|&d| basis_size(n, d)).sum();
    Some(blocks.saturating_add(free))
}

/// One SOS multiplier `p_S` of the cone element.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeTerm {
    pub subset: Vec<usize>,
    pub gram: GramDecomposition,
}

impl ConeTerm {
    /// The exact Gram matrix (exact binary values when not rounded).
    pub fn exact_gram(&self) -> Vec<Vec<BigRational>> {
        match &self.gram.exact_q {
            Some(q) => q.clone(),
            None => {
                let q = &self.gram.q;
                (0..q.nrows())
                    .map(|i| {
                        (0..q.ncols())
                            .map(|j| crate::rational::from_f64_exact(q[(i, j)]))
                            .collect()
                    })
                    .collect()
            }
        }
    }

    pub fn polynomial(&self, nvars: usize) -> Polynomial {
        gram_polynomial(&self.exact_gram(), &self.gram.z, nvars)
    }
}

/// Certificate `f + g^2 + h = 0` for emptiness of a semialgebraic set.
#[derive(Clone, Debug, PartialEq)]
pub struct Refutation {
    pub degree: u32,
    pub monoid_power: u32,
    pub depth: usize,
    pub cone_terms: BTreeMap<Vec<usize>, ConeTerm>,
    /// One multiplier per equation, zero where omitted.
    pub ideal_multipliers: Vec<Polynomial>,
    pub identity_residual: f64,
    /// Whether the multipliers came from rational rounding with an exact
    /// affine repair (otherwise they are the solver's floats, taken exactly).
    pub rounded: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub identity_residual: f64,
    pub min_eigs: Vec<(Vec<usize>, f64)>,
    pub passed: bool,
}

/// Recomputes `f + g^2 + h` in exact arithmetic from the certificate's
/// multipliers and checks every Gram block for PSD-ness.
pub fn verify_refutation(
    set: &SemialgebraicSet,
    r: &Refutation,
    tol: f64,
) -> Result<VerificationReport, PsatzError> {
    let n = set.nvars;
    if !r.cone_terms.contains_key(&Vec::new()) {
        return Err(PsatzError::Structural("missing the empty-product term p0".into()));
    }
    if r.ideal_multipliers.len() != set.h.len() {
        return Err(PsatzError::Structural(format!(
            "{} ideal multipliers for {} equations",
            r.ideal_multipliers.len(),
            set.h.len()
        )));
    }
    if !set.g.is_empty() && r.monoid_power == 0 {
        return Err(PsatzError::ZeroMonoidPower);
    }
    let mut total = Polynomial::zero(n);
    let mut min_eigs = Vec::new();
    for (subset, term) in &r.cone_terms {
        if subset.windows(2).any(|w| w[0] >= w[1]) || subset.iter().any(|&i| i >= set.f.len()) {
            return Err(PsatzError::Structural(format!("invalid cone subset {subset:?}")));
        }
        let z = &term.gram.z;
        if term.gram.q.nrows() != z.len() || term.gram.q.ncols() != z.len() {
            return Err(PsatzError::Structural(format!(
                "Gram block for {subset:?} does not match its basis"
            )));
        }
        if z.iter().any(|m| m.nvars() != n) {
            return Err(PsatzError::Structural("basis variable count mismatch".into()));
        }
        let exact = term.exact_gram();
        let product = subset
            .iter()
            .fold(Polynomial::one(n), |acc, &i| &acc * &set.f[i]);
        total = &total + &(&gram_polynomial(&exact, z, n) * &product);
        let q = DMatrix::from_fn(exact.len(), exact.len(), |i, j| to_f64(&exact[i][j]));
        let e = if q.nrows() == 0 {
            f64::INFINITY
        } else {
            min_eigenvalue(&q)?
        };
        min_eigs.push((subset.clone(), e));
    }
    for (q, h) in r.ideal_multipliers.iter().zip(&set.h) {
        if q.nvars() != n {
            return Err(PsatzError::Structural("ideal multiplier variable count mismatch".into()));
        }
        total = &total + &(q * h);
    }
    let g = set.monoid_element(r.monoid_power.max(1));
    total = &total + &(&g * &g);
    let identity_residual = total.max_abs_coeff();
    let passed = identity_residual <= tol && min_eigs.iter().all(|(_, e)| *e >= -tol);
    Ok(VerificationReport {
        identity_residual,
        min_eigs,
        passed,
    })
}

// ---------------------------------------------------------------------------
// Search.

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub solve: SolveOptions,
    /// Identity residual and PSD tolerance a certificate must meet.
    pub cert_tol: f64,
    pub max_denominator: u64,
    /// Largest constraint count for which the exact affine repair is tried.
    pub exact_repair_rows: usize,
    /// Attempts solved concurrently; 1 runs them in order and stops early.
    pub jobs: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            solve: SolveOptions::default(),
            cert_tol: 1e-8,
            max_denominator: DEFAULT_MAX_DENOMINATOR,
            exact_repair_rows: 200,
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AttemptStatus {
    Found,
    Skipped(String),
    Unknown {
        residual: f64,
        diagnostic: Option<String>,
    },
    VerificationFailed {
        identity_residual: f64,
    },
    Error(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttemptLog {
    pub degree: u32,
    pub monoid_power: u32,
    pub depth: usize,
    pub degree_total: Option<u32>,
    pub block_dims: Vec<usize>,
    pub free_vars: usize,
    pub constraints: usize,
    pub iterations: usize,
    pub status: AttemptStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SearchOutcome {
    Found {
        refutation: Refutation,
        report: VerificationReport,
        log: Vec<AttemptLog>,
    },
    NotFound {
        log: Vec<AttemptLog>,
    },
}

impl SearchOutcome {
    pub fn log(&self) -> &[AttemptLog] {
        match self {
            SearchOutcome::Found { log, .. } | SearchOutcome::NotFound { log } => log,
        }
    }

    pub fn is_found(&self) -> bool {
        matches!(self, SearchOutcome::Found { .. })
    }
}

fn refutation_from_point(
    program: &RefutationProgram,
    nvars: usize,
    h_count: usize,
    blocks: &[Vec<Vec<BigRational>>],
    free: &[BigRational],
    rounded: bool,
    psd_tol: f64,
) -> Result<Refutation, PsatzError> {
    let mut cone_terms = BTreeMap::new();
    for term in &program.cone_terms {
        let exact = blocks[term.block].clone();
        let q = DMatrix::from_fn(exact.len(), exact.len(), |i, j| to_f64(&exact[i][j]));
        let squares = extract_squares(&q, &term.basis, nvars, psd_tol.max(1e-12) * 1e3)
            .unwrap_or_default();
        cone_terms.insert(
            term.subset.clone(),
            ConeTerm {
                subset: term.subset.clone(),
                gram: GramDecomposition {
                    z: term.basis.clone(),
                    q,
                    exact_q: Some(exact),
                    squares,
                    residual: 0.0,
                },
            },
        );
    }
    let mut ideal_multipliers = vec![Polynomial::zero(nvars); h_count];
    for term in &program.ideal_terms {
        let mut q = Polynomial::zero(nvars);
        for (k, mu) in term.basis.iter().enumerate() {
            q.add_term(mu.clone(), free[term.offset + k].clone());
        }
        ideal_multipliers[term.index] = q;
    }
    Ok(Refutation {
        degree: program.degree,
        monoid_power: program.monoid_power,
        depth: program.depth,
        cone_terms,
        ideal_multipliers,
        identity_residual: f64::NAN,
        rounded,
    })
}

/// Turns a feasible SDP point into a verified refutation, preferring an
/// exactly repaired rational point and falling back to the raw floats.
fn assemble(
    set: &SemialgebraicSet,
    program: &RefutationProgram,
    sol: &SdpSolution,
    options: &SearchOptions,
) -> Result<Option<(Refutation, VerificationReport)>, PsatzError> {
    let mut candidates: Vec<(ExactPoint, bool)> = Vec::new();
    if let Some(p) = sdp::round_to_affine(
        &program.problem,
        sol,
        options.max_denominator,
        options.exact_repair_rows,
    ) {
        candidates.push((p, true));
    }
    candidates.push((
        ExactPoint {
            blocks: sol
                .block_values
                .iter()
                .map(|b| {
                    (0..b.nrows())
                        .map(|i| {
                            (0..b.ncols())
                                .map(|j| crate::rational::from_f64_exact(0.5 * (b[(i, j)] + b[(j, i)])))
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            free: sol
                .free_values
                .iter()
                .map(|&v| crate::rational::from_f64_exact(v))
                .collect(),
        },
        false,
    ));
    let mut best: Option<(Refutation, VerificationReport)> = None;
    for (point, rounded) in candidates {
        let mut r = refutation_from_point(
            program,
            set.nvars,
            set.h.len(),
            &point.blocks,
            &point.free,
            rounded,
            options.solve.psd_tol,
        )?;
        let report = verify_refutation(set, &r, options.cert_tol)?;
        r.identity_residual = report.identity_residual;
        if report.passed {
            return Ok(Some((r, report)));
        }
        let better = best
            .as_ref()
            .is_none_or(|(_, b)| report.identity_residual < b.identity_residual);
        if better {
            best = Some((r, report));
        }
    }
    Ok(best.filter(|(_, rep)| rep.passed))
}

fn run_attempt(
    set: &SemialgebraicSet,
    deg: u32,
    m: u32,
    depth: usize,
    options: &SearchOptions,
) -> (AttemptLog, Option<(Refutation, VerificationReport)>) {
    let mut log = AttemptLog {
        degree: deg,
        monoid_power: m,
        depth,
        degree_total: None,
        block_dims: Vec::new(),
        free_vars: 0,
        constraints: 0,
        iterations: 0,
        status: AttemptStatus::Found,
    };
    let program = match build_refutation_program(set, deg, m, depth, &options.solve) {
        Ok(p) => p,
        Err(PsatzError::Sdp(SdpError::TooLarge(why))) => {
            log.status = AttemptStatus::Skipped(why);
            return (log, None);
        }
        Err(e) => {
            log.status = AttemptStatus::Error(e.to_string());
            return (log, None);
        }
    };
    log.degree_total = Some(program.degree_total);
    log.block_dims = program.problem.blocks().iter().map(|b| b.dim).collect();
    log.free_vars = program.problem.free_vars();
    log.constraints = program.problem.constraints().len();

    let mut solve_opts = options.solve.clone();
    for round in 0..2 {
        let status = match sdp::solve(&program.problem, &solve_opts) {
            Ok(s) => s,
            Err(SdpError::TooLarge(why)) => {
                log.status = AttemptStatus::Skipped(why);
                return (log, None);
            }
            Err(e) => {
                log.status = AttemptStatus::Error(e.to_string());
                return (log, None);
            }
        };
        log.iterations = status.solution().iterations;
        match status {
            SolveStatus::Unknown {
                residual,
                diagnostic,
                ..
            } => {
                log.status = AttemptStatus::Unknown {
                    residual,
                    diagnostic,
                };
                return (log, None);
            }
            SolveStatus::Feasible(sol) => match assemble(set, &program, &sol, options) {
                Ok(Some(found)) => {
                    log.status = AttemptStatus::Found;
                    return (log, Some(found));
                }
                Ok(None) => {
                    log.status = AttemptStatus::VerificationFailed {
                        identity_residual: sol.residual,
                    };
                    if round == 0 {
                        // Re-solve tighter before giving up on this entry.
                        solve_opts.feas_tol *= 1e-2;
                        solve_opts.psd_tol *= 1e-2;
                    }
                }
                Err(e) => {
                    log.status = AttemptStatus::Error(e.to_string());
                    return (log, None);
                }
            },
        }
    }
    (log, None)
}

/// Tries each `(degree, monoid power)` entry of the schedule in increasing
/// program size and returns the first verified certificate.
pub fn search_refutation(
    set: &SemialgebraicSet,
    schedule: &SearchSchedule,
    options: &SearchOptions,
) -> Result<SearchOutcome, PsatzError> {
    schedule.validate()?;
    // Products of more inequalities than exist add nothing.
    let depth = schedule.depth.min(set.f.len());
    let powers: Vec<u32> = if set.g.is_empty() {
        vec![1]
    } else {
        schedule.monoid_powers.clone()
    };
    let mut attempts: Vec<(usize, u32, u32)> = Vec::new();
    for &d in &schedule.degrees {
        for &m in &powers {
            if attempts.iter().any(|&(_, d2, m2)| d2 == d && m2 == m) {
                continue;
            }
            let cost = estimated_cost(set, d, m, depth).unwrap_or(usize::MAX);
            attempts.push((cost, d, m));
        }
    }
    // Stable: ties keep ladder order.
    attempts.sort_by_key(|&(cost, _, _)| cost);

    let results: Vec<(AttemptLog, Option<(Refutation, VerificationReport)>)> = if options.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| PsatzError::Schedule(e.to_string()))?;
        pool.install(|| {
            attempts
                .par_iter()
                .map(|&(_, d, m)| run_attempt(set, d, m, depth, options))
                .collect()
        })
    } else {
        let mut out = Vec::new();
        for &(_, d, m) in &attempts {
            let r = run_attempt(set, d, m, depth, options);
            let done = r.1.is_some();
            out.push(r);
            if done {
                break;
            }
        }
        out
    };

    let mut log = Vec::new();
    let mut found = None;
    for (entry, result) in results {
        log.push(entry);
        if let Some(r) = result {
            found = Some(r);
            break;
        }
    }
    Ok(match found {
        Some((refutation, report)) => SearchOutcome::Found {
            refutation,
            report,
            log,
        },
        None => SearchOutcome::NotFound { log },
    })
}

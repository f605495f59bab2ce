//! Semidefinite feasibility: find PSD blocks and free scalars satisfying a
//! list of affine equalities.
//!
//! Small problems are first handed to a barrier method that parametrizes the
//! affine solution set by its nullspace and maximizes the smallest block
//! eigenvalue along the central path. Its iterates satisfy the equalities to
//! rounding error, so boundary solutions are reached at a linear rate.
//!
//! Otherwise, or when that stage fails, the solver alternates between the
//! affine subspace and the PSD cone (Dykstra's scheme, with the cone
//! correction carried between sweeps), starting from identity blocks. Two
//! refinements sit on top:
//!
//! - before iterating, diagonal entries forced to zero by a constraint of the
//!   form `sum c_k X_kk = 0` (all `c_k` of one sign) are removed together with
//!   their row and column, since a PSD matrix with a zero diagonal entry has
//!   that whole row equal to zero;
//! - at geometrically spaced iterations the current iterate's dominant
//!   eigenspace is frozen and the affine system is re-solved inside that
//!   face, which recovers exact boundary solutions that plain alternating
//!   projections only approach sublinearly.
//!
//! The solver never certifies infeasibility: running out of iterations yields
//! [`SolveStatus::Unknown`].

use std::collections::{BTreeMap, HashSet};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::rational::to_f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("eigensolver did not converge on a {0}x{0} matrix")]
    EigenFailure(usize),
    #[error("malformed problem: {0}")]
    Malformed(String),
}

/// A decision variable referenced by a constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SdpVar {
    /// Upper-triangle entry `(row <= col)` of a symmetric block.
    Entry { block: usize, row: usize, col: usize },
    /// Unconstrained scalar.
    Free(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BlockSpec {
    pub name: String,
    pub dim: usize,
}

/// `sum coeff * var = rhs`. A coefficient on an off-diagonal entry multiplies
/// the single matrix entry `X[row][col]` (which equals `X[col][row]`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AffineConstraint {
    pub coeffs: BTreeMap<SdpVar, BigRational>,
    pub rhs: BigRational,
}

#[derive(Clone, Debug, Default)]
pub struct SdpFeasibilityProblem {
    blocks: Vec<BlockSpec>,
    free_vars: usize,
    constraints: Vec<AffineConstraint>,
    seen: HashSet<AffineConstraint>,
}

impl SdpFeasibilityProblem {
    pub fn new(blocks: Vec<BlockSpec>, free_vars: usize) -> Self {
        SdpFeasibilityProblem {
            blocks,
            free_vars,
            constraints: Vec::new(),
            seen: HashSet::new(),
        }
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn free_vars(&self) -> usize {
        self.free_vars
    }

    pub fn constraints(&self) -> &[AffineConstraint] {
        &self.constraints
    }

    /// Number of scalar unknowns: upper triangles of every block plus the
    /// free scalars.
    pub fn num_scalars(&self) -> usize {
        self.blocks.iter().map(|b| b.dim * (b.dim + 1) / 2).sum::<usize>() + self.free_vars
    }

    /// Adds `sum coeff * var = rhs`. Lower-triangle references are folded
    /// onto the upper triangle, zero coefficients dropped, and exact
    /// duplicates (including the trivial `0 = 0`) ignored.
    pub fn add_constraint<I>(&mut self, coeffs: I, rhs: BigRational) -> Result<(), SdpError>
    where
        I: IntoIterator<Item = (SdpVar, BigRational)>,
    {
        let mut map: BTreeMap<SdpVar, BigRational> = BTreeMap::new();
        for (var, c) in coeffs {
            let var = match var {
                SdpVar::Entry { block, row, col } => {
                    let dim = self
                        .blocks
                        .get(block)
                        .ok_or_else(|| SdpError::Malformed(format!("block {block} out of range")))?
                        .dim;
                    if row >= dim || col >= dim {
                        return Err(SdpError::Malformed(format!(
                            "entry ({row},{col}) outside block {block} of dimension {dim}"
                        )));
                    }
                    SdpVar::Entry {
                        block,
                        row: row.min(col),
                        col: row.max(col),
                    }
                }
                SdpVar::Free(k) => {
                    if k >= self.free_vars {
                        return Err(SdpError::Malformed(format!("free variable {k} out of range")));
                    }
                    var
                }
            };
            *map.entry(var).or_insert_with(BigRational::zero) += c;
        }
        map.retain(|_, c| !c.is_zero());
        if map.is_empty() && rhs.is_zero() {
            return Ok(());
        }
        let constraint = AffineConstraint { coeffs: map, rhs };
        if self.seen.insert(constraint.clone()) {
            self.constraints.push(constraint);
        }
        Ok(())
    }

    /// Max absolute violation of the constraints at the given point.
    pub fn residual(&self, blocks: &[DMatrix<f64>], free: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| {
                let lhs: f64 = c
                    .coeffs
                    .iter()
                    .map(|(v, a)| {
                        let value = match *v {
                            SdpVar::Entry { block, row, col } => blocks[block][(row, col)],
                            SdpVar::Free(k) => free[k],
                        };
                        to_f64(a) * value
                    })
                    .sum();
                (lhs - to_f64(&c.rhs)).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub feas_tol: f64,
    pub psd_tol: f64,
    pub max_iters: usize,
    /// Refuse blocks larger than this.
    pub max_block_dim: usize,
    /// Refuse problems with more (deduplicated) constraints than this.
    pub max_constraints: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            feas_tol: 1e-8,
            psd_tol: 1e-8,
            max_iters: 50_000,
            max_block_dim: 300,
            max_constraints: 2_000,
        }
    }
}

impl SolveOptions {
    /// Checks the size guards without building anything.
    pub fn check_size(&self, block_dims: &[usize], constraints: usize) -> Result<(), SdpError> {
        if let Some(&d) = block_dims.iter().max() {
            if d > self.max_block_dim {
                return Err(SdpError::TooLarge(format!(
                    "block dimension {d} exceeds cap {}",
                    self.max_block_dim
                )));
            }
        }
        if constraints > self.max_constraints {
            return Err(SdpError::TooLarge(format!(
                "{constraints} constraints exceed cap {}",
                self.max_constraints
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpSolution {
    pub block_values: Vec<DMatrix<f64>>,
    pub free_values: Vec<f64>,
    /// Max absolute constraint violation.
    pub residual: f64,
    /// Smallest eigenvalue over all blocks (`+inf` when there are none).
    pub min_eig: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolveStatus {
    Feasible(SdpSolution),
    Unknown {
        last: SdpSolution,
        residual: f64,
        diagnostic: Option<String>,
    },
}

impl SolveStatus {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SolveStatus::Feasible(_))
    }

    pub fn solution(&self) -> &SdpSolution {
        match self {
            SolveStatus::Feasible(s) => s,
            SolveStatus::Unknown { last, .. } => last,
        }
    }
}

/// Pluggable feasibility back end.
pub trait FeasibilitySolver: Sync {
    fn solve(
        &self,
        problem: &SdpFeasibilityProblem,
        options: &SolveOptions,
    ) -> Result<SolveStatus, SdpError>;
}

/// Alternating projections with Dykstra's correction.
#[derive(Clone, Copy, Debug, Default)]
pub struct AlternatingProjections;

impl FeasibilitySolver for AlternatingProjections {
    fn solve(
        &self,
        problem: &SdpFeasibilityProblem,
        options: &SolveOptions,
    ) -> Result<SolveStatus, SdpError> {
        solve(problem, options)
    }
}

fn eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>, SdpError> {
    let n = m.nrows();
    SymmetricEigen::try_new(m, f64::EPSILON, 100_000).ok_or(SdpError::EigenFailure(n))
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Nearest PSD matrix in Frobenius norm: clamp negative eigenvalues to 0.
pub fn project_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>, SdpError> {
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    let eig = eigen(symmetrize(m))?;
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    let v = &eig.eigenvectors;
    Ok(symmetrize(&(v * DMatrix::from_diagonal(&clamped) * v.transpose())))
}

/// Smallest eigenvalue of a symmetric matrix (`+inf` for an empty one).
pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64, SdpError> {
    if m.nrows() == 0 {
        return Ok(f64::INFINITY);
    }
    let eig = eigen(symmetrize(m))?;
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

fn min_eig_all(blocks: &[DMatrix<f64>]) -> Result<f64, SdpError> {
    let mut m = f64::INFINITY;
    for b in blocks {
        m = m.min(min_eigenvalue(b)?);
    }
    Ok(m)
}

/// Solves with [`AlternatingProjections`].
pub fn solve(problem: &SdpFeasibilityProblem, options: &SolveOptions) -> Result<SolveStatus, SdpError> {
    let dims: Vec<usize> = problem.blocks.iter().map(|b| b.dim).collect();
    options.check_size(&dims, problem.constraints.len())?;
    Workspace::new(problem, options)?.run()
}

// ---------------------------------------------------------------------------

struct SparseRow {
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl SparseRow {
    fn dot(&self, x: &DVector<f64>) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, &v)| v * x[i]).sum()
    }
}

/// Coordinates: per block, the svec of the kept principal submatrix
/// (off-diagonals scaled by sqrt 2, so the Euclidean norm is Frobenius),
/// followed by the free scalars.
struct Layout {
    kept: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    free_offset: usize,
    len: usize,
}

impl Layout {
    fn new(kept: Vec<Vec<usize>>, free_vars: usize) -> Self {
        let mut offsets = Vec::with_capacity(kept.len());
        let mut off = 0;
        for k in &kept {
            offsets.push(off);
            off += k.len() * (k.len() + 1) / 2;
        }
        Layout {
            kept,
            offsets,
            free_offset: off,
            len: off + free_vars,
        }
    }

    fn svec_index(&self, block: usize, i: usize, j: usize) -> usize {
        let (i, j) = (i.min(j), i.max(j));
        let n = self.kept[block].len();
        // row-major upper triangle
        self.offsets[block] + i * n - i * (i + 1) / 2 + j
    }

    fn block_matrix(&self, x: &DVector<f64>, block: usize) -> DMatrix<f64> {
        let n = self.kept[block].len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = x[self.svec_index(block, i, j)];
                if i == j {
                    m[(i, i)] = v;
                } else {
                    let v = v / std::f64::consts::SQRT_2;
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }
        m
    }

    fn write_block(&self, x: &mut DVector<f64>, block: usize, m: &DMatrix<f64>) {
        let n = self.kept[block].len();
        for i in 0..n {
            for j in i..n {
                let v = if i == j {
                    m[(i, i)]
                } else {
                    0.5 * (m[(i, j)] + m[(j, i)]) * std::f64::consts::SQRT_2
                };
                x[self.svec_index(block, i, j)] = v;
            }
        }
    }
}

struct AffineProjector {
    rows: Vec<SparseRow>,
    rhs: DVector<f64>,
    /// Eigenvectors of `A A^T` on its range, and reciprocal eigenvalues.
    basis: DMatrix<f64>,
    inv_vals: DVector<f64>,
}

impl AffineProjector {
    fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = x.clone();
        if self.rows.is_empty() {
            return out;
        }
        let r = DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().zip(self.rhs.iter()).map(|(row, b)| row.dot(x) - b),
        );
        let t = self.basis.tr_mul(&r).component_mul(&self.inv_vals);
        let y = &self.basis * t;
        for (row, yk) in self.rows.iter().zip(y.iter()) {
            for (&i, &v) in row.idx.iter().zip(&row.val) {
                out[i] -= v * yk;
            }
        }
        out
    }
}

struct Workspace<'a> {
    problem: &'a SdpFeasibilityProblem,
    options: &'a SolveOptions,
    layout: Layout,
    /// Constraint rows in layout coordinates, unnormalized.
    raw_rows: Vec<(SparseRow, f64)>,
    projector: Option<AffineProjector>,
    diagnostic: Option<String>,
}

impl<'a> Workspace<'a> {
    fn new(problem: &'a SdpFeasibilityProblem, options: &'a SolveOptions) -> Result<Self, SdpError> {
        let (kept, diagnostic) = reduce_forced_zeros(problem);
        let layout = Layout::new(kept, problem.free_vars);
        let mut ws = Workspace {
            problem,
            options,
            layout,
            raw_rows: Vec::new(),
            projector: None,
            diagnostic,
        };
        if ws.diagnostic.is_none() {
            ws.build_rows();
        }
        if ws.diagnostic.is_none() {
            ws.build_projector()?;
        }
        Ok(ws)
    }

    fn local_index(&self, block: usize, i: usize) -> Option<usize> {
        self.layout.kept[block].binary_search(&i).ok()
    }

    fn build_rows(&mut self) {
        for c in &self.problem.constraints {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            for (var, a) in &c.coeffs {
                let a = to_f64(a);
                match *var {
                    SdpVar::Entry { block, row, col } => {
                        let (Some(i), Some(j)) =
                            (self.local_index(block, row), self.local_index(block, col))
                        else {
                            continue;
                        };
                        let k = self.layout.svec_index(block, i, j);
                        let scale = if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
                        *acc.entry(k).or_insert(0.0) += a * scale;
                    }
                    SdpVar::Free(k) => {
                        *acc.entry(self.layout.free_offset + k).or_insert(0.0) += a;
                    }
                }
            }
            acc.retain(|_, v| *v != 0.0);
            let rhs = to_f64(&c.rhs);
            if acc.is_empty() {
                if rhs != 0.0 {
                    self.diagnostic = Some(format!(
                        "constraint reduces to 0 = {rhs} after eliminating forced zeros"
                    ));
                    return;
                }
                continue;
            }
            let (idx, val): (Vec<usize>, Vec<f64>) = acc.into_iter().unzip();
            self.raw_rows.push((SparseRow { idx, val }, rhs));
        }
    }

    fn build_projector(&mut self) -> Result<(), SdpError> {
        if self.raw_rows.is_empty() {
            return Ok(());
        }
        let mut rows = Vec::with_capacity(self.raw_rows.len());
        let mut rhs = Vec::with_capacity(self.raw_rows.len());
        for (row, b) in &self.raw_rows {
            let norm = row.val.iter().map(|v| v * v).sum::<f64>().sqrt();
            rows.push(SparseRow {
                idx: row.idx.clone(),
                val: row.val.iter().map(|v| v / norm).collect(),
            });
            rhs.push(b / norm);
        }
        let m = rows.len();
        // Gram matrix of the normalized rows through a column-wise index.
        let mut by_col: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for (r, row) in rows.iter().enumerate() {
            for (&i, &v) in row.idx.iter().zip(&row.val) {
                by_col.entry(i).or_default().push((r, v));
            }
        }
        let mut gram = DMatrix::<f64>::zeros(m, m);
        for entries in by_col.values() {
            for &(r1, v1) in entries {
                for &(r2, v2) in entries {
                    gram[(r1, r2)] += v1 * v2;
                }
            }
        }
        let eig = eigen(gram)?;
        let max_val = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let cutoff = max_val * 1e-12 * m as f64;
        let keep: Vec<usize> = (0..m).filter(|&k| eig.eigenvalues[k] > cutoff).collect();
        let basis = eig.eigenvectors.select_columns(&keep);
        let inv_vals = DVector::from_iterator(keep.len(), keep.iter().map(|&k| 1.0 / eig.eigenvalues[k]));
        let rhs = DVector::from_vec(rhs);
        // b must lie in range(A) = range(A A^T)
        let proj_b = &basis * basis.tr_mul(&rhs);
        let miss = (&rhs - proj_b).norm();
        if miss > 1e-9 * (1.0 + rhs.norm()) {
            self.diagnostic = Some(format!(
                "affine constraints are inconsistent (least-squares miss {miss:.3e})"
            ));
            return Ok(());
        }
        self.projector = Some(AffineProjector {
            rows,
            rhs,
            basis,
            inv_vals,
        });
        Ok(())
    }

    fn full_blocks(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.problem
            .blocks
            .iter()
            .enumerate()
            .map(|(b, spec)| {
                let local = self.layout.block_matrix(x, b);
                let kept = &self.layout.kept[b];
                let mut full = DMatrix::zeros(spec.dim, spec.dim);
                for (li, &gi) in kept.iter().enumerate() {
                    for (lj, &gj) in kept.iter().enumerate() {
                        full[(gi, gj)] = local[(li, lj)];
                    }
                }
                full
            })
            .collect()
    }

    fn solution(&self, x: &DVector<f64>, iterations: usize) -> Result<SdpSolution, SdpError> {
        let blocks = self.full_blocks(x);
        let free: Vec<f64> = (0..self.problem.free_vars)
            .map(|k| x[self.layout.free_offset + k])
            .collect();
        let residual = self.problem.residual(&blocks, &free);
        let min_eig = min_eig_all(&blocks)?;
        Ok(SdpSolution {
            block_values: blocks,
            free_values: free,
            residual,
            min_eig,
            iterations,
        })
    }

    fn accept(&self, s: &SdpSolution) -> bool {
        s.residual <= self.options.feas_tol && s.min_eig >= -self.options.psd_tol
    }

    fn start_point(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.layout.len);
        for (b, kept) in self.layout.kept.iter().enumerate() {
            for i in 0..kept.len() {
                x[self.layout.svec_index(b, i, i)] = 1.0;
            }
        }
        x
    }

    fn project_cone(&self, x: &DVector<f64>) -> Result<DVector<f64>, SdpError> {
        let mut out = x.clone();
        for b in 0..self.layout.kept.len() {
            if self.layout.kept[b].is_empty() {
                continue;
            }
            let m = self.layout.block_matrix(x, b);
            let p = project_psd(&m)?;
            self.layout.write_block(&mut out, b, &p);
        }
        Ok(out)
    }

    /// Orthonormal directions of the affine solution set that move at least
    /// one block, as layout vectors, and the minimum-norm affine point.
    fn affine_parametrization(&self) -> Result<(DVector<f64>, Vec<DVector<f64>>), SdpError> {
        let len = self.layout.len;
        let x0 = match &self.projector {
            Some(p) => p.project(&DVector::zeros(len)),
            None => DVector::zeros(len),
        };
        let null = match &self.projector {
            None => DMatrix::identity(len, len),
            Some(p) => {
                let mut a = DMatrix::<f64>::zeros(p.rows.len(), len);
                for (r, row) in p.rows.iter().enumerate() {
                    for (&i, &v) in row.idx.iter().zip(&row.val) {
                        a[(r, i)] = v;
                    }
                }
                let eig = eigen(a.tr_mul(&a))?;
                let cutoff = 1e-10 * eig.eigenvalues.iter().copied().fold(1.0, f64::max);
                let cols: Vec<usize> = (0..len).filter(|&k| eig.eigenvalues[k] <= cutoff).collect();
                eig.eigenvectors.select_columns(&cols)
            }
        };
        if null.ncols() == 0 {
            return Ok((x0, Vec::new()));
        }
        // Drop directions that only move free scalars.
        let cone_part = null.rows(0, self.layout.free_offset).into_owned();
        let svd = cone_part.svd(false, true);
        let v_t = svd.v_t.ok_or(SdpError::EigenFailure(null.ncols()))?;
        let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let dirs = (0..svd.singular_values.len())
            .filter(|&k| svd.singular_values[k] > 1e-9 * smax.max(1e-300))
            .map(|k| &null * v_t.row(k).transpose())
            .collect();
        Ok((x0, dirs))
    }

    /// Path-following on `max t` subject to every block of `x0 + N y`
    /// dominating `t I`. Returns the final layout point and `t`.
    fn barrier_stage(&self) -> Result<Option<(DVector<f64>, f64)>, SdpError> {
        const MAX_WORK: f64 = 2e7;
        const MAX_LEN: usize = 600;
        let blocks: Vec<usize> = (0..self.layout.kept.len())
            .filter(|&b| !self.layout.kept[b].is_empty())
            .collect();
        if blocks.is_empty() || self.layout.len > MAX_LEN {
            return Ok(None);
        }
        let (x0, dirs) = self.affine_parametrization()?;
        let k = dirs.len();
        let dims: Vec<usize> = blocks.iter().map(|&b| self.layout.kept[b].len()).collect();
        let work: f64 = dims
            .iter()
            .map(|&n| {
                let n = n as f64;
                2.0 * k as f64 * n * n * n + (k * k) as f64 * n * n
            })
            .sum();
        if work > MAX_WORK {
            return Ok(None);
        }
        let base: Vec<DMatrix<f64>> = blocks.iter().map(|&b| self.layout.block_matrix(&x0, b)).collect();
        let moves: Vec<Vec<DMatrix<f64>>> = dirs
            .iter()
            .map(|d| blocks.iter().map(|&b| self.layout.block_matrix(d, b)).collect())
            .collect();
        let scale = base.iter().map(|m| m.norm()).fold(1.0, f64::max);
        let nu: f64 = dims.iter().sum::<usize>() as f64 + 2.0;
        let cap = 10.0 * scale;
        let radius_sq = (1e4 * scale).powi(2);

        let at = |y: &DVector<f64>, t: f64| -> Vec<DMatrix<f64>> {
            base.iter()
                .enumerate()
                .map(|(bi, m)| {
                    let mut s = m.clone();
                    for (i, mv) in moves.iter().enumerate() {
                        if y[i] != 0.0 {
                            s += &mv[bi] * y[i];
                        }
                    }
                    for d in 0..s.nrows() {
                        s[(d, d)] -= t;
                    }
                    s
                })
                .collect()
        };
        // Barrier value, or None outside the domain.
        let value = |y: &DVector<f64>, t: f64, s_par: f64| -> Option<f64> {
            let q = y.norm_squared();
            if t >= cap || q >= radius_sq {
                return None;
            }
            let mut f = -s_par * t - (cap - t).ln() - (radius_sq - q).ln();
            for s in at(y, t) {
                let c = s.cholesky()?;
                f -= 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            }
            Some(f)
        };

        let mut y = DVector::<f64>::zeros(k);
        let lmin = base
            .iter()
            .map(min_eigenvalue)
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let mut t = lmin - 0.1 * scale;
        let mut s_par = nu / scale;
        'outer: for _outer in 0..60 {
            for _newton in 0..60 {
                let Some(f0) = value(&y, t, s_par) else {
                    break 'outer;
                };
                let mut grad = DVector::<f64>::zeros(k + 1);
                let mut hess = DMatrix::<f64>::zeros(k + 1, k + 1);
                for (bi, s) in at(&y, t).into_iter().enumerate() {
                    let Some(w) = s.cholesky().map(|c| c.inverse()) else {
                        break 'outer;
                    };
                    let p: Vec<DMatrix<f64>> = moves.iter().map(|mv| &w * &mv[bi] * &w).collect();
                    for i in 0..k {
                        grad[i] -= w.dot(&moves[i][bi]);
                        hess[(i, k)] -= p[i].trace();
                        for j in i..k {
                            hess[(i, j)] += p[i].dot(&moves[j][bi]);
                        }
                    }
                    grad[k] += w.trace();
                    hess[(k, k)] += w.norm_squared();
                }
                let gap = radius_sq - y.norm_squared();
                for i in 0..k {
                    grad[i] += 2.0 * y[i] / gap;
                    for j in i..k {
                        hess[(i, j)] += 4.0 * y[i] * y[j] / (gap * gap);
                    }
                    hess[(i, i)] += 2.0 / gap;
                }
                grad[k] += -s_par + 1.0 / (cap - t);
                hess[(k, k)] += 1.0 / (cap - t).powi(2);
                for i in 0..=k {
                    for j in 0..i {
                        hess[(i, j)] = hess[(j, i)];
                    }
                }
                let mut shift = 0.0;
                let diag_max = hess.diagonal().amax();
                let step = loop {
                    let mut h = hess.clone();
                    for i in 0..=k {
                        h[(i, i)] += shift;
                    }
                    if let Some(c) = h.cholesky() {
                        break Some(-c.solve(&grad));
                    }
                    if shift > 1e-3 * diag_max {
                        break None;
                    }
                    shift = if shift == 0.0 { 1e-14 * diag_max } else { shift * 100.0 };
                };
                let Some(step) = step else {
                    break 'outer;
                };
                let decrement = -grad.dot(&step);
                if decrement < 1e-10 {
                    break;
                }
                let mut alpha = 1.0;
                let mut moved = false;
                while alpha > 1e-12 {
                    let yn = &y + step.rows(0, k) * alpha;
                    let tn = t + step[k] * alpha;
                    if let Some(f1) = value(&yn, tn, s_par) {
                        if f1 <= f0 - 0.25 * alpha * decrement {
                            y = yn;
                            t = tn;
                            moved = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !moved || decrement < 1e-9 {
                    break;
                }
            }
            if nu / s_par <= (1e-11 * scale).max(1e-3 * t.abs()) {
                break;
            }
            s_par *= 8.0;
        }
        let mut x = x0;
        for (i, d) in dirs.iter().enumerate() {
            x += d * y[i];
        }
        Ok(Some((x, t)))
    }

    fn run(self) -> Result<SolveStatus, SdpError> {
        if let Some(diag) = &self.diagnostic {
            let last = self.solution(&self.start_point(), 0)?;
            return Ok(SolveStatus::Unknown {
                residual: last.residual,
                last,
                diagnostic: Some(diag.clone()),
            });
        }
        let project_affine = |x: &DVector<f64>| match &self.projector {
            Some(p) => p.project(x),
            None => x.clone(),
        };

        if let Some((xb, t)) = self.barrier_stage()? {
            let sb = self.solution(&xb, 0)?;
            if self.accept(&sb) {
                return Ok(SolveStatus::Feasible(sb));
            }
            if t >= -self.options.psd_tol {
                if let Some(s) = self.polish(&xb, 0)? {
                    return Ok(SolveStatus::Feasible(s));
                }
            }
        }
        let mut x = self.project_cone(&project_affine(&self.start_point()))?;
        let first = self.solution(&x, 0)?;
        if self.accept(&first) {
            return Ok(SolveStatus::Feasible(first));
        }
        let mut correction = DVector::zeros(self.layout.len);
        let mut next_polish = 50;
        let check_every = 10;
        for iter in 1..=self.options.max_iters {
            let y = project_affine(&x);
            let shifted = &y + &correction;
            x = self.project_cone(&shifted)?;
            correction = shifted - &x;

            if iter % check_every == 0 || iter == self.options.max_iters {
                let sx = self.solution(&x, iter)?;
                if self.accept(&sx) {
                    return Ok(SolveStatus::Feasible(sx));
                }
                let sy = self.solution(&y, iter)?;
                if self.accept(&sy) {
                    return Ok(SolveStatus::Feasible(sy));
                }
            }
            if iter == next_polish || iter == self.options.max_iters {
                next_polish *= 2;
                if let Some(s) = self.polish(&x, iter)? {
                    return Ok(SolveStatus::Feasible(s));
                }
            }
        }
        let last = self.solution(&x, self.options.max_iters)?;
        Ok(SolveStatus::Unknown {
            residual: last.residual,
            last,
            diagnostic: None,
        })
    }

    /// Freezes the dominant eigenspace of each block of the PSD iterate `x`
    /// and solves the constraints for a small symmetric matrix inside it.
    fn polish(&self, x: &DVector<f64>, iter: usize) -> Result<Option<SdpSolution>, SdpError> {
        if self.raw_rows.is_empty() {
            return Ok(None);
        }
        let nblocks = self.layout.kept.len();
        let mut eigs = Vec::with_capacity(nblocks);
        let mut scale: f64 = 1e-300;
        for b in 0..nblocks {
            let m = self.layout.block_matrix(x, b);
            if m.nrows() == 0 {
                eigs.push(None);
                continue;
            }
            let e = eigen(m)?;
            scale = scale.max(e.eigenvalues.iter().copied().fold(0.0, f64::max));
            eigs.push(Some(e));
        }
        let mut tried: HashSet<Vec<usize>> = HashSet::new();
        for tau in [1e-2, 1e-4, 1e-6, 1e-9] {
            let bases: Vec<DMatrix<f64>> = eigs
                .iter()
                .map(|e| match e {
                    None => DMatrix::zeros(0, 0),
                    Some(e) => {
                        let cols: Vec<usize> = (0..e.eigenvalues.len())
                            .filter(|&k| e.eigenvalues[k] > tau * scale)
                            .collect();
                        e.eigenvectors.select_columns(&cols)
                    }
                })
                .collect();
            let ranks: Vec<usize> = bases.iter().map(|v| v.ncols()).collect();
            if !tried.insert(ranks) {
                continue;
            }
            if let Some(s) = self.solve_in_face(x, &bases, iter)? {
                return Ok(Some(s));
            }
        }
        Ok(None)
    }

    fn solve_in_face(
        &self,
        x: &DVector<f64>,
        bases: &[DMatrix<f64>],
        iter: usize,
    ) -> Result<Option<SdpSolution>, SdpError> {
        let nfree = self.problem.free_vars;
        let mut offsets = Vec::with_capacity(bases.len());
        let mut n_red = 0;
        for v in bases {
            offsets.push(n_red);
            let r = v.ncols();
            n_red += r * (r + 1) / 2;
        }
        let free_off = n_red;
        n_red += nfree;
        if n_red == 0 {
            return Ok(None);
        }
        let red_index = |b: usize, k: usize, l: usize, r: usize| {
            let (k, l) = (k.min(l), k.max(l));
            offsets[b] + k * r - k * (k + 1) / 2 + l
        };

        // Locate each coordinate's block and local (i, j).
        let mut coord_owner: Vec<Option<(usize, usize, usize)>> = vec![None; self.layout.free_offset];
        for (b, kept) in self.layout.kept.iter().enumerate() {
            for i in 0..kept.len() {
                for j in i..kept.len() {
                    coord_owner[self.layout.svec_index(b, i, j)] = Some((b, i, j));
                }
            }
        }

        let m = self.raw_rows.len();
        let mut a = DMatrix::<f64>::zeros(m, n_red);
        let mut rhs = DVector::<f64>::zeros(m);
        for (r, (row, b)) in self.raw_rows.iter().enumerate() {
            rhs[r] = *b;
            for (&k, &v) in row.idx.iter().zip(&row.val) {
                if k >= self.layout.free_offset {
                    a[(r, free_off + k - self.layout.free_offset)] += v;
                    continue;
                }
                let (blk, i, j) = coord_owner[k].expect("coordinate owner");
                let basis = &bases[blk];
                let rank = basis.ncols();
                if rank == 0 {
                    continue;
                }
                // v is the coefficient on the svec coordinate; convert to a
                // coefficient on the matrix entry, then push through V.
                let entry_coeff = if i == j { v } else { v * std::f64::consts::SQRT_2 };
                for kk in 0..rank {
                    for ll in kk..rank {
                        let c = if i == j {
                            entry_coeff * basis[(i, kk)] * basis[(i, ll)]
                        } else {
                            0.5 * entry_coeff
                                * (basis[(i, kk)] * basis[(j, ll)] + basis[(j, kk)] * basis[(i, ll)])
                        };
                        // c multiplies W[kk][ll]; off-diagonal W entries
                        // appear twice in V W V^T.
                        let coeff = if kk == ll { c } else { 2.0 * c / std::f64::consts::SQRT_2 };
                        a[(r, red_index(blk, kk, ll, rank))] += coeff;
                    }
                }
            }
        }

        // Current point in reduced coordinates.
        let mut w0 = DVector::<f64>::zeros(n_red);
        for (b, basis) in bases.iter().enumerate() {
            let rank = basis.ncols();
            if rank == 0 {
                continue;
            }
            let xb = self.layout.block_matrix(x, b);
            let wb = basis.transpose() * xb * basis;
            for k in 0..rank {
                for l in k..rank {
                    let v = if k == l {
                        wb[(k, k)]
                    } else {
                        wb[(k, l)] * std::f64::consts::SQRT_2
                    };
                    w0[red_index(b, k, l, rank)] = v;
                }
            }
        }
        for k in 0..nfree {
            w0[free_off + k] = x[self.layout.free_offset + k];
        }

        let r = &rhs - &a * &w0;
        let svd = a.svd(true, true);
        let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let delta = match svd.solve(&r, smax * 1e-12) {
            Ok(d) => d,
            Err(_) => return Ok(None),
        };
        let w = w0 + delta;

        // Back to layout coordinates.
        let mut out = DVector::<f64>::zeros(self.layout.len);
        for (b, basis) in bases.iter().enumerate() {
            let rank = basis.ncols();
            let n = self.layout.kept[b].len();
            if n == 0 {
                continue;
            }
            let mut wb = DMatrix::<f64>::zeros(rank, rank);
            for k in 0..rank {
                for l in k..rank {
                    let v = w[red_index(b, k, l, rank)];
                    if k == l {
                        wb[(k, k)] = v;
                    } else {
                        wb[(k, l)] = v / std::f64::consts::SQRT_2;
                        wb[(l, k)] = v / std::f64::consts::SQRT_2;
                    }
                }
            }
            let xb = basis * wb * basis.transpose();
            self.layout.write_block(&mut out, b, &xb);
        }
        for k in 0..nfree {
            out[self.layout.free_offset + k] = w[free_off + k];
        }
        let s = self.solution(&out, iter)?;
        Ok(if self.accept(&s) { Some(s) } else { None })
    }
}

/// An exact rational point of a feasibility problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactPoint {
    pub blocks: Vec<Vec<Vec<BigRational>>>,
    pub free: Vec<BigRational>,
}

impl ExactPoint {
    /// Exact residual `max |A x - b|` as a float.
    pub fn residual(&self, problem: &SdpFeasibilityProblem) -> f64 {
        problem
            .constraints
            .iter()
            .map(|c| to_f64(&(self.lhs(c) - &c.rhs).abs()))
            .fold(0.0, f64::max)
    }

    fn value(&self, var: &SdpVar) -> &BigRational {
        match *var {
            SdpVar::Entry { block, row, col } => &self.blocks[block][row][col],
            SdpVar::Free(k) => &self.free[k],
        }
    }

    fn lhs(&self, c: &AffineConstraint) -> BigRational {
        let mut acc = BigRational::zero();
        for (v, a) in &c.coeffs {
            acc += a * self.value(v);
        }
        acc
    }

    pub fn float_blocks(&self) -> Vec<DMatrix<f64>> {
        self.blocks
            .iter()
            .map(|b| DMatrix::from_fn(b.len(), b.len(), |i, j| to_f64(&b[i][j])))
            .collect()
    }
}

/// Rounds a float solution to rationals with bounded denominators and, when
/// the system has at most `max_rows` constraints, applies the exact
/// least-norm correction onto `A x = b` (coordinates: upper-triangle entries
/// and free scalars). Returns `None` if the exact system is inconsistent.
pub fn round_to_affine(
    problem: &SdpFeasibilityProblem,
    solution: &SdpSolution,
    max_den: u64,
    max_rows: usize,
) -> Option<ExactPoint> {
    use crate::rational::rationalize;
    let mut point = ExactPoint {
        blocks: solution
            .block_values
            .iter()
            .map(|b| {
                (0..b.nrows())
                    .map(|i| {
                        (0..b.ncols())
                            .map(|j| rationalize(0.5 * (b[(i, j)] + b[(j, i)]), max_den))
                            .collect()
                    })
                    .collect()
            })
            .collect(),
        free: solution
            .free_values
            .iter()
            .map(|&v| rationalize(v, max_den))
            .collect(),
    };
    let rows = &problem.constraints;
    let residuals: Vec<BigRational> = rows.iter().map(|c| point.lhs(c) - &c.rhs).collect();
    if residuals.iter().all(|r| r.is_zero()) {
        return Some(point);
    }
    if rows.len() > max_rows {
        return None;
    }
    // Solve (A A^T) y = r exactly, then x -= A^T y.
    let m = rows.len();
    let mut gram = vec![vec![BigRational::zero(); m]; m];
    for i in 0..m {
        for j in i..m {
            let mut acc = BigRational::zero();
            let (a, b) = (&rows[i].coeffs, &rows[j].coeffs);
            let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
            for (v, c) in small {
                if let Some(d) = large.get(v) {
                    acc += c * d;
                }
            }
            gram[i][j] = acc.clone();
            gram[j][i] = acc;
        }
    }
    let y = solve_rational(gram, residuals)?;
    for (c, yk) in rows.iter().zip(&y) {
        if yk.is_zero() {
            continue;
        }
        for (v, a) in &c.coeffs {
            let delta = a * yk;
            match *v {
                SdpVar::Entry { block, row, col } => {
                    point.blocks[block][row][col] -= &delta;
                    if row != col {
                        point.blocks[block][col][row] -= &delta;
                    }
                }
                SdpVar::Free(k) => point.free[k] -= &delta,
            }
        }
    }
    Some(point)
}

/// Solves a possibly singular but consistent square system exactly, setting
/// free unknowns to zero.
fn solve_rational(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Option<Vec<BigRational>> {
    let n = b.len();
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let Some(p) = (row..n).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(row, p);
        b.swap(row, p);
        let inv = a[row][col].recip();
        for k in col..n {
            a[row][k] = &a[row][k] * &inv;
        }
        b[row] = &b[row] * &inv;
        for r in 0..n {
            if r != row && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for k in col..n {
                    let t = &f * &a[row][k];
                    a[r][k] -= t;
                }
                let t = &f * &b[row];
                b[r] -= t;
            }
        }
        pivots.push((row, col));
        row += 1;
        if row == n {
            break;
        }
    }
    if b[row..].iter().any(|v| !v.is_zero()) {
        return None;
    }
    let mut x = vec![BigRational::zero(); n];
    for (r, c) in pivots {
        x[c] = b[r].clone();
    }
    Some(x)
}

/// Returns, per block, the indices that are not forced to zero, or a
/// diagnostic when a constraint is sign-infeasible on the PSD cone.
fn reduce_forced_zeros(problem: &SdpFeasibilityProblem) -> (Vec<Vec<usize>>, Option<String>) {
    let mut zero: Vec<Vec<bool>> = problem.blocks.iter().map(|b| vec![false; b.dim]).collect();
    loop {
        let mut changed = false;
        for c in &problem.constraints {
            let mut diag: Vec<(usize, usize, &BigRational)> = Vec::new();
            let mut other = false;
            for (var, a) in &c.coeffs {
                match *var {
                    SdpVar::Entry { block, row, col } => {
                        if zero[block][row] || zero[block][col] {
                            continue;
                        }
                        if row == col {
                            diag.push((block, row, a));
                        } else {
                            other = true;
                        }
                    }
                    SdpVar::Free(_) => other = true,
                }
            }
            if other {
                continue;
            }
            if diag.is_empty() {
                if !c.rhs.is_zero() {
                    return (kept_of(&zero), Some(format!("constraint reduces to 0 = {}", c.rhs)));
                }
                continue;
            }
            let all_pos = diag.iter().all(|(_, _, a)| a.is_positive());
            let all_neg = diag.iter().all(|(_, _, a)| a.is_negative());
            if !(all_pos || all_neg) {
                continue;
            }
            // Diagonal entries of a PSD matrix are nonnegative.
            let rhs_sign_ok = if all_pos {
                !c.rhs.is_negative()
            } else {
                !c.rhs.is_positive()
            };
            if !rhs_sign_ok {
                return (
                    kept_of(&zero),
                    Some("a nonnegative combination of PSD diagonal entries must equal a value of the wrong sign".into()),
                );
            }
            if c.rhs.is_zero() {
                for (b, i, _) in diag {
                    zero[b][i] = true;
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (kept_of(&zero), None)
}

fn kept_of(zero: &[Vec<bool>]) -> Vec<Vec<usize>> {
    zero.iter()
        .map(|z| (0..z.len()).filter(|&i| !z[i]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn entry(block: usize, row: usize, col: usize) -> SdpVar {
        SdpVar::Entry { block, row, col }
    }

    fn one_block(dim: usize) -> SdpFeasibilityProblem {
        SdpFeasibilityProblem::new(
            vec![BlockSpec {
                name: "Q".into(),
                dim,
            }],
            0,
        )
    }

    #[test]
    fn scalar_block_positive_target() {
        let mut p = one_block(1);
        p.add_constraint([(entry(0, 0, 0), int(1))], int(2)).unwrap();
        match solve(&p, &SolveOptions::default()).unwrap() {
            SolveStatus::Feasible(s) => assert!((s.block_values[0][(0, 0)] - 2.0).abs() < 1e-9),
            other => panic!("expected feasible, got {other:?}"),
        }
    }

    #[test]
    fn scalar_block_negative_target_is_unknown() {
        let mut p = one_block(1);
        p.add_constraint([(entry(0, 0, 0), int(1))], int(-1)).unwrap();
        assert!(!solve(&p, &SolveOptions::default()).unwrap().is_feasible());
    }

    #[test]
    fn quartic_with_fixed_square_target() {
        // z = [x^2, xy, y^2], F = (x^2 + y^2)^2
        let mut p = one_block(3);
        p.add_constraint([(entry(0, 0, 0), int(1))], int(1)).unwrap(); // x^4
        p.add_constraint([(entry(0, 0, 1), int(2))], int(0)).unwrap(); // x^3 y
        p.add_constraint([(entry(0, 1, 1), int(1)), (entry(0, 0, 2), int(2))], int(2))
            .unwrap(); // x^2 y^2
        p.add_constraint([(entry(0, 1, 2), int(2))], int(0)).unwrap(); // x y^3
        p.add_constraint([(entry(0, 2, 2), int(1))], int(1)).unwrap(); // y^4
        let s = match solve(&p, &SolveOptions::default()).unwrap() {
            SolveStatus::Feasible(s) => s,
            other => panic!("expected feasible, got {other:?}"),
        };
        let q = &s.block_values[0];
        assert!((q[(0, 0)] - 1.0).abs() < 1e-8);
        assert!((q[(2, 2)] - 1.0).abs() < 1e-8);
        assert!((q[(1, 1)] + 2.0 * q[(0, 2)] - 2.0).abs() < 1e-8);
        assert!(q[(0, 1)].abs() < 1e-8 && q[(1, 2)].abs() < 1e-8);
        assert!(s.min_eig >= -1e-8);
    }

    #[test]
    fn inconsistent_affine_system_is_reported() {
        let mut p = one_block(2);
        p.add_constraint([(entry(0, 0, 1), int(1))], int(1)).unwrap();
        p.add_constraint([(entry(0, 0, 1), int(2))], int(3)).unwrap();
        match solve(&p, &SolveOptions::default()).unwrap() {
            SolveStatus::Unknown { diagnostic, .. } => assert!(diagnostic.is_some()),
            other => panic!("expected unknown, got {other:?}"),
        }
    }

    #[test]
    fn forced_zero_diagonal_is_eliminated() {
        // X00 = 0, X01 = 1 is infeasible on the PSD cone.
        let mut p = one_block(2);
        p.add_constraint([(entry(0, 0, 0), int(1))], int(0)).unwrap();
        p.add_constraint([(entry(0, 0, 1), int(1))], int(1)).unwrap();
        match solve(&p, &SolveOptions::default()).unwrap() {
            SolveStatus::Unknown { diagnostic, .. } => assert!(diagnostic.is_some()),
            other => panic!("expected unknown, got {other:?}"),
        }
    }

    #[test]
    fn boundary_solution_found_by_face_polish() {
        // X = [[1,1],[1,1]] is the unique solution and is singular.
        let mut p = one_block(2);
        p.add_constraint([(entry(0, 0, 0), int(1))], int(1)).unwrap();
        p.add_constraint([(entry(0, 1, 1), int(1))], int(1)).unwrap();
        p.add_constraint([(entry(0, 0, 1), int(1)), (entry(0, 0, 0), int(-1))], int(0))
            .unwrap();
        let s = solve(&p, &SolveOptions::default()).unwrap();
        assert!(s.is_feasible(), "{s:?}");
    }

    #[test]
    fn free_variables_are_unconstrained_by_the_cone() {
        let mut p = SdpFeasibilityProblem::new(vec![BlockSpec { name: "Q".into(), dim: 1 }], 1);
        p.add_constraint([(entry(0, 0, 0), int(1)), (SdpVar::Free(0), int(1))], int(-3))
            .unwrap();
        let s = solve(&p, &SolveOptions::default()).unwrap();
        let sol = s.solution();
        assert!(s.is_feasible());
        assert!(sol.free_values[0] <= -3.0 + 1e-8);
    }

    #[test]
    fn duplicate_and_trivial_constraints_are_dropped() {
        let mut p = one_block(2);
        p.add_constraint([(entry(0, 1, 0), int(1))], int(1)).unwrap();
        p.add_constraint([(entry(0, 0, 1), int(1))], int(1)).unwrap();
        p.add_constraint(std::iter::empty(), int(0)).unwrap();
        assert_eq!(p.constraints().len(), 1);
        assert!(p.add_constraint([(entry(0, 2, 0), int(1))], int(0)).is_err());
        assert!(p.add_constraint([(SdpVar::Free(0), int(1))], int(0)).is_err());
    }

    #[test]
    fn size_guard() {
        let p = one_block(400);
        assert!(matches!(
            solve(&p, &SolveOptions::default()),
            Err(SdpError::TooLarge(_))
        ));
    }

    #[test]
    fn project_psd_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert!((project_psd(&id).unwrap() - &id).norm() < 1e-14);

        let d = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((project_psd(&d).unwrap() - expected).norm() < 1e-14);

        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert!((project_psd(&swap).unwrap() - expected).norm() < 1e-14);
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert!((min_eigenvalue(&DMatrix::identity(2, 2)).unwrap() - 1.0).abs() < 1e-10);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -2.0, 0.0]));
        assert!((min_eigenvalue(&d).unwrap() + 2.0).abs() < 1e-10);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((min_eigenvalue(&m).unwrap() - 1.0).abs() < 1e-10);
    }
}

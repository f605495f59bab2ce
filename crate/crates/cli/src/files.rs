//! On-disk formats: problem and certificate JSON, formation specs, and
//! trajectory CSV.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use formsos::formation::{
    error_norm, Classification, EquilibriumReport, FormationError, FormationSpec, Simulation,
};
use formsos::psatz::{ConeTerm, Refutation, SemialgebraicSet, VerificationReport};
use formsos::rational::to_f64;
use formsos::sos::GramDecomposition;
use formsos::{Monomial, MonomialVector, Polynomial};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::parse::{format_rational, parse_rational};

pub const CERTIFICATE_FORMAT: &str = "formsos-certificate";
pub const CERTIFICATE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, FileError> {
    Err(FileError::Invalid(msg.into()))
}

/// An integer stored as a JSON number when it fits in `i64`, else as a
/// decimal string.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntJson {
    Small(i64),
    Big(String),
}

impl IntJson {
    pub fn from_big(v: &BigInt) -> Self {
        match v.to_i64() {
            Some(k) => IntJson::Small(k),
            None => IntJson::Big(v.to_string()),
        }
    }

    pub fn to_big(&self) -> Result<BigInt, FileError> {
        match self {
            IntJson::Small(k) => Ok(BigInt::from(*k)),
            IntJson::Big(s) => s
                .trim()
                .parse()
                .map_err(|_| FileError::Invalid(format!("'{s}' is not an integer"))),
        }
    }
}

fn one() -> IntJson {
    IntJson::Small(1)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermJson {
    pub exps: Vec<u32>,
    pub num: IntJson,
    #[serde(default = "one")]
    pub den: IntJson,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyJson {
    pub terms: Vec<TermJson>,
}

impl PolyJson {
    /// Terms in decreasing graded order.
    pub fn from_poly(p: &Polynomial) -> Self {
        let terms = p
            .terms()
            .iter()
            .rev()
            .map(|(m, c)| TermJson {
                exps: m.exponents().to_vec(),
                num: IntJson::from_big(c.numer()),
                den: IntJson::from_big(c.denom()),
            })
            .collect();
        PolyJson { terms }
    }

    pub fn to_poly(&self, nvars: usize) -> Result<Polynomial, FileError> {
        let mut p = Polynomial::zero(nvars);
        for t in &self.terms {
            if t.exps.len() != nvars {
                return invalid(format!(
                    "term has {} exponents, expected {nvars}",
                    t.exps.len()
                ));
            }
            let den = t.den.to_big()?;
            if den.is_zero() {
                return invalid("zero denominator");
            }
            p.add_term(Monomial::new(t.exps.clone()), BigRational::new(t.num.to_big()?, den));
        }
        Ok(p)
    }
}

/// A semialgebraic set with variable names.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub set: SemialgebraicSet,
    pub names: Vec<String>,
}

impl Problem {
    pub fn new(set: SemialgebraicSet, names: Vec<String>) -> Result<Self, FileError> {
        check_names(&names, set.nvars())?;
        Ok(Problem { set, names })
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&ProblemFile::from_problem(self)).expect("serializable");
        hex::encode(Sha256::digest(&bytes))
    }
}

pub fn default_names(nvars: usize) -> Vec<String> {
    (0..nvars).map(|i| format!("x{i}")).collect()
}

fn check_names(names: &[String], nvars: usize) -> Result<(), FileError> {
    if names.len() != nvars {
        return invalid(format!("{} variable names for {nvars} variables", names.len()));
    }
    let mut seen = HashSet::new();
    for n in names {
        let ok = n.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
            && n.chars().all(|c| c.is_alphanumeric() || c == '_');
        if !ok {
            return invalid(format!("invalid variable name '{n}'"));
        }
        if !seen.insert(n) {
            return invalid(format!("duplicate variable name '{n}'"));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub nvars: usize,
    #[serde(default)]
    pub var_names: Option<Vec<String>>,
    #[serde(default)]
    pub f: Vec<PolyJson>,
    #[serde(default)]
    pub g: Vec<PolyJson>,
    #[serde(default)]
    pub h: Vec<PolyJson>,
}

impl ProblemFile {
    pub fn from_problem(p: &Problem) -> Self {
        let conv = |v: &[Polynomial]| v.iter().map(PolyJson::from_poly).collect();
        ProblemFile {
            nvars: p.set.nvars(),
            var_names: Some(p.names.clone()),
            f: conv(p.set.f()),
            g: conv(p.set.g()),
            h: conv(p.set.h()),
        }
    }

    pub fn to_problem(&self) -> Result<Problem, FileError> {
        let n = self.nvars;
        let names = self.var_names.clone().unwrap_or_else(|| default_names(n));
        let conv = |v: &[PolyJson]| v.iter().map(|p| p.to_poly(n)).collect::<Result<Vec<_>, _>>();
        let set = SemialgebraicSet::new(n, conv(&self.f)?, conv(&self.g)?, conv(&self.h)?)
            .map_err(|e| FileError::Invalid(e.to_string()))?;
        Problem::new(set, names)
    }

    pub fn parse(text: &str) -> Result<Problem, FileError> {
        serde_json::from_str::<ProblemFile>(text)?.to_problem()
    }

    pub fn render(p: &Problem) -> String {
        let mut s = serde_json::to_string_pretty(&ProblemFile::from_problem(p)).expect("serializable");
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeTermJson {
    /// Indices into `f` whose product multiplies this term.
    pub subset: Vec<usize>,
    pub basis: Vec<Vec<u32>>,
    /// Exact Gram matrix entries as `"p/q"` strings.
    pub gram: Vec<Vec<String>>,
    pub rounded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinEigJson {
    pub subset: Vec<usize>,
    /// Absent for an empty block.
    pub min_eig: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportJson {
    pub identity_residual: f64,
    pub min_eigs: Vec<MinEigJson>,
    pub passed: bool,
}

impl ReportJson {
    pub fn from_report(r: &VerificationReport) -> Self {
        ReportJson {
            identity_residual: r.identity_residual,
            min_eigs: r
                .min_eigs
                .iter()
                .map(|(s, e)| MinEigJson {
                    subset: s.clone(),
                    min_eig: e.is_finite().then_some(*e),
                })
                .collect(),
            passed: r.passed,
        }
    }
}

/// A refutation of `f + g^2 + h = 0` together with the problem it refutes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub input_hash: String,
    pub problem: ProblemFile,
    pub degree: u32,
    pub monoid_power: u32,
    pub depth: usize,
    pub cone_terms: Vec<ConeTermJson>,
    pub ideal_multipliers: Vec<PolyJson>,
    pub report: ReportJson,
}

impl CertificateFile {
    pub fn new(problem: &Problem, r: &Refutation, report: &VerificationReport) -> Self {
        let cone_terms = r
            .cone_terms
            .values()
            .map(|t| ConeTermJson {
                subset: t.subset.clone(),
                basis: t.gram.z.iter().map(|m| m.exponents().to_vec()).collect(),
                gram: t
                    .exact_gram()
                    .iter()
                    .map(|row| row.iter().map(format_rational).collect())
                    .collect(),
                rounded: r.rounded,
            })
            .collect();
        CertificateFile {
            format: CERTIFICATE_FORMAT.into(),
            version: CERTIFICATE_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            input_hash: problem.hash(),
            problem: ProblemFile::from_problem(problem),
            degree: r.degree,
            monoid_power: r.monoid_power,
            depth: r.depth,
            cone_terms,
            ideal_multipliers: r.ideal_multipliers.iter().map(PolyJson::from_poly).collect(),
            report: ReportJson::from_report(report),
        }
    }

    pub fn parse(text: &str) -> Result<Self, FileError> {
        let c: CertificateFile = serde_json::from_str(text)?;
        if c.format != CERTIFICATE_FORMAT {
            return invalid(format!("unknown format '{}'", c.format));
        }
        if c.version != CERTIFICATE_VERSION {
            return invalid(format!("unsupported certificate version {}", c.version));
        }
        Ok(c)
    }

    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    /// The embedded problem and the refutation it carries. Gram matrices
    /// are taken exactly as written.
    pub fn decode(&self) -> Result<(Problem, Refutation), FileError> {
        let problem = self.problem.to_problem()?;
        let n = problem.set.nvars();
        let mut cone_terms = BTreeMap::new();
        for t in &self.cone_terms {
            let basis: Vec<Monomial> = t
                .basis
                .iter()
                .map(|e| {
                    if e.len() == n {
                        Ok(Monomial::new(e.clone()))
                    } else {
                        invalid(format!("basis monomial has {} exponents, expected {n}", e.len()))
                    }
                })
                .collect::<Result<_, _>>()?;
            if basis.windows(2).any(|w| w[0] >= w[1]) {
                return invalid("basis monomials must be strictly increasing");
            }
            let k = basis.len();
            if t.gram.len() != k || t.gram.iter().any(|row| row.len() != k) {
                return invalid(format!("Gram matrix for {:?} is not {k}x{k}", t.subset));
            }
            let exact: Vec<Vec<BigRational>> = t
                .gram
                .iter()
                .map(|row| row.iter().map(|s| parse_rational(s)).collect::<Result<_, _>>())
                .collect::<Result<_, _>>()
                .map_err(|e| FileError::Invalid(e.to_string()))?;
            let q = DMatrix::from_fn(k, k, |i, j| to_f64(&exact[i][j]));
            let gram = GramDecomposition {
                z: MonomialVector::new(basis),
                q,
                exact_q: t.rounded.then(|| exact.clone()),
                squares: Vec::new(),
                residual: 0.0,
            };
            let term = ConeTerm {
                subset: t.subset.clone(),
                gram,
            };
            if !t.rounded && term.exact_gram() != exact {
                return invalid("unrounded Gram entries must be exact binary floats");
            }
            if cone_terms.insert(t.subset.clone(), term).is_some() {
                return invalid(format!("duplicate cone term {:?}", t.subset));
            }
        }
        let ideal_multipliers = self
            .ideal_multipliers
            .iter()
            .map(|p| p.to_poly(n))
            .collect::<Result<_, _>>()?;
        let r = Refutation {
            degree: self.degree,
            monoid_power: self.monoid_power,
            depth: self.depth,
            cone_terms,
            ideal_multipliers,
            identity_residual: self.report.identity_residual,
            rounded: !self.cone_terms.is_empty() && self.cone_terms.iter().all(|t| t.rounded),
        };
        Ok((problem, r))
    }
}

/// A rational read from JSON as an integer, a decimal, or a `"p/q"` string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalJson {
    Int(i64),
    Float(f64),
    Text(String),
}

impl RationalJson {
    pub fn from_rational(r: &BigRational) -> Self {
        match (r.is_integer(), r.to_integer().to_i64()) {
            (true, Some(k)) => RationalJson::Int(k),
            _ => RationalJson::Text(format_rational(r)),
        }
    }

    pub fn to_rational(&self) -> Result<BigRational, FileError> {
        let text = match self {
            RationalJson::Int(k) => return Ok(BigRational::from_integer(BigInt::from(*k))),
            RationalJson::Float(x) if x.is_finite() => format!("{x:e}"),
            RationalJson::Float(x) => return invalid(format!("{x} is not a finite number")),
            RationalJson::Text(s) => s.clone(),
        };
        parse_rational(&text).map_err(|e| FileError::Invalid(e.to_string()))
    }
}

fn two() -> usize {
    2
}

/// A formation with 1-based agent numbers. Omitted edges mean the
/// complete graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub agents: usize,
    #[serde(default = "two")]
    pub dim: usize,
    #[serde(default)]
    pub edges: Option<Vec<[usize; 2]>>,
    pub dbar_sq: Vec<RationalJson>,
}

impl SpecFile {
    pub fn from_spec(spec: &FormationSpec) -> Self {
        SpecFile {
            agents: spec.n(),
            dim: spec.dim(),
            edges: Some(spec.edges().iter().map(|&(i, j)| [i + 1, j + 1]).collect()),
            dbar_sq: spec.dbar_sq().iter().map(RationalJson::from_rational).collect(),
        }
    }

    pub fn to_spec(&self) -> Result<FormationSpec, FileError> {
        let d = self
            .dbar_sq
            .iter()
            .map(RationalJson::to_rational)
            .collect::<Result<Vec<_>, _>>()?;
        let spec = match &self.edges {
            None => FormationSpec::complete(self.agents, self.dim, d),
            Some(edges) => {
                let mut e = Vec::with_capacity(edges.len());
                for &[i, j] in edges {
                    if i == 0 || j == 0 {
                        return invalid("agents are numbered from 1");
                    }
                    e.push((i - 1, j - 1));
                }
                FormationSpec::new(self.agents, self.dim, e, d)
            }
        };
        spec.map_err(|e| FileError::Invalid(e.to_string()))
    }
}

fn classification_from_str(s: &str) -> Option<Classification> {
    [
        Classification::Correct,
        Classification::IncorrectStableCandidate,
        Classification::IncorrectUnstable,
        Classification::Degenerate,
    ]
    .into_iter()
    .find(|c| c.as_str() == s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub p: Vec<f64>,
    pub rhs_norm: f64,
    pub error_norm: f64,
    pub hessian_eigs: Vec<f64>,
    pub classification: String,
}

impl ReportFile {
    pub fn from_report(r: &EquilibriumReport) -> Self {
        ReportFile {
            p: r.p.to_vec(),
            rhs_norm: r.rhs_norm,
            error_norm: r.error_norm,
            hessian_eigs: r.hessian_eigs.clone(),
            classification: r.classification.as_str().into(),
        }
    }

    pub fn to_report(&self) -> Result<EquilibriumReport, FileError> {
        let classification = classification_from_str(&self.classification)
            .ok_or_else(|| FileError::Invalid(format!("unknown class '{}'", self.classification)))?;
        let p = formsos::formation::Configuration::new(self.p.clone())
            .map_err(|e| FileError::Invalid(e.to_string()))?;
        Ok(EquilibriumReport {
            p,
            rhs_norm: self.rhs_norm,
            error_norm: self.error_norm,
            hessian_eigs: self.hessian_eigs.clone(),
            classification,
        })
    }
}

/// Run statistics plus the equilibrium report when the run converged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationFile {
    pub converged: bool,
    pub stalled: bool,
    pub time: f64,
    pub steps: usize,
    pub rejected_steps: usize,
    pub max_centroid_drift: f64,
    pub final_p: Vec<f64>,
    pub report: Option<ReportFile>,
}

impl SimulationFile {
    pub fn from_simulation(s: &Simulation) -> Self {
        SimulationFile {
            converged: s.converged,
            stalled: s.stalled,
            time: s.time,
            steps: s.steps,
            rejected_steps: s.rejected_steps,
            max_centroid_drift: s.max_centroid_drift,
            final_p: s.final_p.to_vec(),
            report: s.report.as_ref().map(ReportFile::from_report),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub p: Vec<f64>,
    pub err_norm: f64,
    pub potential: f64,
}

/// CSV with columns `t, p1x, p1y, ..., err_norm, potential`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryFile {
    pub n: usize,
    pub dim: usize,
    pub rows: Vec<TrajectoryRow>,
}

fn position_header(n: usize, dim: usize) -> Vec<String> {
    const AXES: [char; 3] = ['x', 'y', 'z'];
    let mut out = Vec::with_capacity(n * dim);
    for i in 1..=n {
        for k in 0..dim {
            out.push(match AXES.get(k) {
                Some(a) if dim <= 3 => format!("p{i}{a}"),
                _ => format!("p{i}_{}", k + 1),
            });
        }
    }
    out
}

impl TrajectoryFile {
    pub fn from_simulation(spec: &FormationSpec, sim: &Simulation) -> Result<Self, FormationError> {
        let rows = sim
            .trajectory
            .iter()
            .map(|tp| {
                Ok(TrajectoryRow {
                    t: tp.t,
                    p: tp.p.clone(),
                    err_norm: error_norm(spec, &tp.p)?,
                    potential: tp.potential,
                })
            })
            .collect::<Result<_, FormationError>>()?;
        Ok(TrajectoryFile {
            n: spec.n(),
            dim: spec.dim(),
            rows,
        })
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend(position_header(self.n, self.dim));
        h.push("err_norm".into());
        h.push("potential".into());
        h
    }

    pub fn write<W: Write>(&self, w: W) -> Result<(), FileError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.header())?;
        let width = self.n * self.dim;
        for r in &self.rows {
            if r.p.len() != width {
                return invalid("row width does not match the formation");
            }
            let mut rec = Vec::with_capacity(width + 3);
            rec.push(r.t.to_string());
            rec.extend(r.p.iter().map(f64::to_string));
            rec.push(r.err_norm.to_string());
            rec.push(r.potential.to_string());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self, FileError> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.len() < 3
            || header[0] != "t"
            || header[header.len() - 2] != "err_norm"
            || header[header.len() - 1] != "potential"
        {
            return invalid("trajectory header must be t, positions..., err_norm, potential");
        }
        let cols = &header[1..header.len() - 2];
        let shape = (1..=cols.len())
            .filter(|d| cols.len() % d == 0)
            .find(|&d| position_header(cols.len() / d, d) == cols);
        let Some(dim) = shape else {
            return invalid("unrecognized position columns");
        };
        let n = cols.len() / dim;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| FileError::Invalid(e.to_string()))?;
            let k = vals.len();
            rows.push(TrajectoryRow {
                t: vals[0],
                p: vals[1..k - 2].to_vec(),
                err_norm: vals[k - 2],
                potential: vals[k - 1],
            });
        }
        if rows.windows(2).any(|w| !(w[0].t < w[1].t)) {
            return invalid("time column must be increasing");
        }
        Ok(TrajectoryFile { n, dim, rows })
    }
}

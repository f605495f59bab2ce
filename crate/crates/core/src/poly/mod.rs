//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! Variables are anonymous indices `0..nvars`. Terms are kept in a
//! [`BTreeMap`] keyed by [`Monomial`], so iteration follows the global
//! graded order and two polynomials are equal iff their term maps are equal.

mod monomial;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub use monomial::{
    basis_size, homogeneous_basis, homogeneous_monomials, monomial_basis, Monomial,
    MonomialVector,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("variable count mismatch: {0} vs {1}")]
    NvarsMismatch(usize, usize),
    #[error("point has {got} coordinates, polynomial has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("variable index {index} out of range for {nvars} variables")]
    VarOutOfRange { index: usize, nvars: usize },
    #[error("division by the zero polynomial")]
    DivisionByZero,
    #[error("division is not exact")]
    NotDivisible,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, BigRational>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, BigRational::one())
    }

    pub fn constant(nvars: usize, c: BigRational) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    pub fn from_int(nvars: usize, c: i64) -> Self {
        Self::constant(nvars, BigRational::from_integer(BigInt::from(c)))
    }

    /// The polynomial `x_var`.
    pub fn var(nvars: usize, var: usize) -> Self {
        assert!(var < nvars, "variable {var} out of range for {nvars}");
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::var(nvars, var), BigRational::one());
        p
    }

    pub fn monomial(m: Monomial, c: BigRational) -> Self {
        let mut p = Self::zero(m.nvars());
        p.add_term(m, c);
        p
    }

    /// Builds a polynomial from (exponents, coefficient) pairs, merging
    /// repeated monomials and dropping zeros.
    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (Vec<u32>, BigRational)>,
    {
        let mut p = Self::zero(nvars);
        for (exps, c) in terms {
            if exps.len() != nvars {
                return Err(PolyError::NvarsMismatch(nvars, exps.len()));
            }
            p.add_term(Monomial::new(exps), c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, BigRational> {
        &self.terms
    }

    /// The canonical coefficient map used for coefficient matching.
    pub fn coefficients_of(&self) -> &BTreeMap<Monomial, BigRational> {
        &self.terms
    }

    pub fn coefficient(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.is_one())
    }

    /// Total degree; the zero polynomial reports 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().next_back().map_or(0, |m| m.degree())
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degs = self.terms.keys().map(|m| m.degree());
        match degs.next() {
            None => true,
            Some(d) => degs.all(|e| e == d),
        }
    }

    /// Leading term under the graded order.
    pub fn leading_term(&self) -> Option<(&Monomial, &BigRational)> {
        self.terms.iter().next_back()
    }

    /// Adds `c * m` in place, keeping the zero-free invariant.
    pub fn add_term(&mut self, m: Monomial, c: BigRational) {
        debug_assert_eq!(m.nvars(), self.nvars);
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn check_nvars(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.nvars != other.nvars {
            Err(PolyError::NvarsMismatch(self.nvars, other.nvars))
        } else {
            Ok(())
        }
    }

    pub fn checked_add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_nvars(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_nvars(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        Ok(out)
    }

    pub fn checked_mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_nvars(other)?;
        let mut acc: std::collections::HashMap<Monomial, BigRational> =
            std::collections::HashMap::with_capacity(self.terms.len() * other.terms.len());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = ma.mul(mb);
                let c = ca * cb;
                match acc.get_mut(&m) {
                    Some(v) => *v += c,
                    None => {
                        acc.insert(m, c);
                    }
                }
            }
        }
        Ok(Polynomial {
            nvars: self.nvars,
            terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
        })
    }

    pub fn scale(&self, c: &BigRational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero(self.nvars);
        }
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        }
    }

    /// Multiplies by a single term `c * m`.
    pub fn mul_term(&self, m: &Monomial, c: &BigRational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero(self.nvars);
        }
        Polynomial {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(mm, v)| (mm.mul(m), v * c))
                .collect(),
        }
    }

    /// `self^k` by repeated squaring; `pow(0)` is the constant 1.
    pub fn pow(&self, k: u32) -> Polynomial {
        let mut result = Polynomial::one(self.nvars);
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = &result * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Floating-point evaluation by direct term summation in term order.
    pub fn evaluate(&self, point: &[f64]) -> Result<f64, PolyError> {
        if point.len() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                got: point.len(),
            });
        }
        Ok(self
            .terms
            .iter()
            .map(|(m, c)| c.to_f64().unwrap_or(f64::NAN) * m.evaluate(point))
            .sum())
    }

    /// Exact evaluation at a rational point.
    pub fn evaluate_exact(&self, point: &[BigRational]) -> Result<BigRational, PolyError> {
        if point.len() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                got: point.len(),
            });
        }
        let mut acc = BigRational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (e, x) in m.exponents().iter().zip(point) {
                if *e > 0 {
                    t *= num_traits::pow(x.clone(), *e as usize);
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Formal partial derivative with respect to `var`.
    pub fn differentiate(&self, var: usize) -> Result<Polynomial, PolyError> {
        if var >= self.nvars {
            return Err(PolyError::VarOutOfRange {
                index: var,
                nvars: self.nvars,
            });
        }
        let mut out = Polynomial::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.exponents()[var];
            if e == 0 {
                continue;
            }
            let mut exps = m.exponents().to_vec();
            exps[var] -= 1;
            out.add_term(
                Monomial::new(exps),
                c * BigRational::from_integer(BigInt::from(e)),
            );
        }
        Ok(out)
    }

    /// Substitutes constants for some variables and renumbers the rest.
    ///
    /// `values[i] = Some(c)` fixes `x_i = c`; the remaining variables keep
    /// their relative order in the result.
    pub fn substitute(&self, values: &[Option<BigRational>]) -> Result<Polynomial, PolyError> {
        if values.len() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                got: values.len(),
            });
        }
        let kept = values.iter().filter(|v| v.is_none()).count();
        let mut out = Polynomial::zero(kept);
        for (m, c) in &self.terms {
            let mut coeff = c.clone();
            let mut exps = Vec::with_capacity(kept);
            for (e, v) in m.exponents().iter().zip(values) {
                match v {
                    Some(val) => {
                        if *e > 0 {
                            coeff *= num_traits::pow(val.clone(), *e as usize);
                        }
                    }
                    None => exps.push(*e),
                }
            }
            out.add_term(Monomial::new(exps), coeff);
        }
        Ok(out)
    }

    /// Re-embeds into a ring with `nvars` variables, sending `x_i` to
    /// `x_{map[i]}`.
    pub fn remap(&self, nvars: usize, map: &[usize]) -> Polynomial {
        assert_eq!(map.len(), self.nvars);
        let mut out = Polynomial::zero(nvars);
        for (m, c) in &self.terms {
            let mut exps = vec![0u32; nvars];
            for (i, e) in m.exponents().iter().enumerate() {
                exps[map[i]] += e;
            }
            out.add_term(Monomial::new(exps), c.clone());
        }
        out
    }

    /// Exact quotient `self / divisor`, failing if the remainder is nonzero.
    pub fn div_exact(&self, divisor: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_nvars(divisor)?;
        let (lm, lc) = divisor.leading_term().ok_or(PolyError::DivisionByZero)?;
        let lc_inv = lc.recip();
        if divisor.terms.len() == 1 {
            let mut out = Polynomial::zero(self.nvars);
            for (m, c) in &self.terms {
                let q = m.div(lm).ok_or(PolyError::NotDivisible)?;
                out.terms.insert(q, c * &lc_inv);
            }
            return Ok(out);
        }
        let mut rem = self.terms.clone();
        let mut quotient = Polynomial::zero(self.nvars);
        while let Some((m, c)) = rem.iter().next_back() {
            let qm = m.div(lm).ok_or(PolyError::NotDivisible)?;
            let qc = c * &lc_inv;
            for (dm, dc) in &divisor.terms {
                let t = qm.mul(dm);
                let delta = &qc * dc;
                match rem.entry(t) {
                    std::collections::btree_map::Entry::Vacant(v) => {
                        v.insert(-delta);
                    }
                    std::collections::btree_map::Entry::Occupied(mut o) => {
                        *o.get_mut() -= delta;
                        if o.get().is_zero() {
                            o.remove();
                        }
                    }
                }
            }
            quotient.terms.insert(qm, qc);
        }
        Ok(quotient)
    }

    /// Largest coefficient magnitude, as a float; 0 for the zero polynomial.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.abs().to_f64().unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    pub fn display_with(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            if m.is_one() {
                out.push_str(&mag.to_string());
            } else if mag.is_one() {
                out.push_str(&m.display_with(names));
            } else {
                out.push_str(&format!("{}*{}", mag, m.display_with(names)));
            }
        }
        out
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_with(&[]))
    }
}

// Operator forms panic on a variable-count mismatch; use the `checked_*`
// methods where the operands come from untrusted input.

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.checked_add(rhs).expect("polynomial add")
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.checked_sub(rhs).expect("polynomial sub")
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.checked_mul(rhs).expect("polynomial mul")
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: Polynomial) -> Polynomial {
        &self + &rhs
    }
}

impl Sub for Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: Polynomial) -> Polynomial {
        &self - &rhs
    }
}

impl Mul for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Polynomial) -> Polynomial {
        &self * &rhs
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        -&self
    }
}

//! Integer polynomials over bit-packed monomials. Every operation returns
//! `None` when a coefficient would overflow `i128`, when a degree exceeds
//! the packing, or when a division is not exact; callers then fall back to
//! the general representation.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rustc_hash::FxHashMap;

use crate::poly::{Monomial, Polynomial};

const MAX_VARS: usize = 15;
const DEG_SHIFT: u32 = 120;

/// Graded key: total degree in the top byte, then one byte per variable.
/// Multiplication of monomials is addition of keys.
type Key = u128;

fn pack(exps: &[u32]) -> Option<Key> {
    if exps.len() > MAX_VARS {
        return None;
    }
    let deg: u32 = exps.iter().sum();
    if deg > 255 {
        return None;
    }
    let mut k = (deg as Key) << DEG_SHIFT;
    for (i, &e) in exps.iter().enumerate() {
        k |= (e as Key) << (8 * (14 - i));
    }
    Some(k)
}

fn unpack(k: Key, nvars: usize) -> Monomial {
    Monomial::new(
        (0..nvars)
            .map(|i| ((k >> (8 * (14 - i))) & 0xff) as u32)
            .collect(),
    )
}

fn key_mul(a: Key, b: Key) -> Option<Key> {
    if (a >> DEG_SHIFT) + (b >> DEG_SHIFT) > 255 {
        return None;
    }
    Some(a + b)
}

fn key_div(a: Key, b: Key) -> Option<Key> {
    for i in 0..16 {
        let s = 8 * i;
        if (a >> s) & 0xff < (b >> s) & 0xff {
            return None;
        }
    }
    Some(a - b)
}

/// Nonzero terms in ascending key order.
#[derive(Clone, Debug, PartialEq)]
pub(super) struct PackedPoly {
    terms: Vec<(Key, i128)>,
}

impl PackedPoly {
    fn one() -> Self {
        PackedPoly {
            terms: vec![(0, 1)],
        }
    }

    pub(super) fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn from_poly_scaled(p: &Polynomial, scale: &BigInt) -> Option<Self> {
        let mut terms = Vec::with_capacity(p.num_terms());
        for (m, c) in p.terms() {
            let v = c * BigRational::from_integer(scale.clone());
            if !v.is_integer() {
                return None;
            }
            terms.push((pack(m.exponents())?, v.to_integer().to_i128()?));
        }
        terms.sort_unstable_by_key(|t| t.0);
        Some(PackedPoly { terms })
    }

    fn to_poly(&self, nvars: usize, divisor: &BigInt) -> Polynomial {
        let mut out = Polynomial::zero(nvars);
        for &(k, c) in &self.terms {
            out.add_term(
                unpack(k, nvars),
                BigRational::new(BigInt::from(c), divisor.clone()),
            );
        }
        out
    }

    fn mul(&self, other: &Self) -> Option<Self> {
        let mut acc: FxHashMap<Key, i128> = FxHashMap::default();
        acc.reserve(self.terms.len() * other.terms.len() / 2 + 1);
        for &(ka, ca) in &self.terms {
            for &(kb, cb) in &other.terms {
                let k = key_mul(ka, kb)?;
                let c = ca.checked_mul(cb)?;
                let slot = acc.entry(k).or_insert(0);
                *slot = slot.checked_add(c)?;
            }
        }
        let mut terms: Vec<(Key, i128)> = acc.into_iter().filter(|t| t.1 != 0).collect();
        terms.sort_unstable_by_key(|t| t.0);
        Some(PackedPoly { terms })
    }

    fn sub(&self, other: &Self) -> Option<Self> {
        let (a, b) = (&self.terms, &other.terms);
        let mut terms = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                terms.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j].0 < a[i].0 {
                terms.push((b[j].0, b[j].1.checked_neg()?));
                j += 1;
            } else {
                let c = a[i].1.checked_sub(b[j].1)?;
                if c != 0 {
                    terms.push((a[i].0, c));
                }
                i += 1;
                j += 1;
            }
        }
        Some(PackedPoly { terms })
    }

    fn add(&self, other: &Self) -> Option<Self> {
        self.sub(&other.neg()?)
    }

    fn neg(&self) -> Option<Self> {
        let terms = self
            .terms
            .iter()
            .map(|&(k, c)| c.checked_neg().map(|c| (k, c)))
            .collect::<Option<_>>()?;
        Some(PackedPoly { terms })
    }

    /// Exact quotient; `None` if the division leaves a remainder.
    fn div_exact(&self, divisor: &Self) -> Option<Self> {
        let &(lk, lc) = divisor.terms.last()?;
        if divisor.terms.len() == 1 {
            let terms = self
                .terms
                .iter()
                .map(|&(k, c)| {
                    if c % lc != 0 {
                        return None;
                    }
                    Some((key_div(k, lk)?, c / lc))
                })
                .collect::<Option<_>>()?;
            return Some(PackedPoly { terms });
        }
        let mut rem: BTreeMap<Key, i128> = self.terms.iter().copied().collect();
        let mut quotient = Vec::new();
        while let Some((&k, &c)) = rem.last_key_value() {
            let qk = key_div(k, lk)?;
            if c % lc != 0 {
                return None;
            }
            let qc = c / lc;
            for &(dk, dc) in &divisor.terms {
                let t = qk + dk;
                let delta = qc.checked_mul(dc)?;
                let slot = rem.entry(t).or_insert(0);
                *slot = slot.checked_sub(delta)?;
                if *slot == 0 {
                    rem.remove(&t);
                }
            }
            quotient.push((qk, qc));
        }
        quotient.reverse();
        Some(PackedPoly { terms: quotient })
    }
}

/// Integer matrix `scale * m` together with `scale`, the least common
/// denominator of the entries.
fn scaled(m: &[Vec<Polynomial>]) -> Option<(Vec<Vec<PackedPoly>>, BigInt)> {
    let mut scale = BigInt::one();
    for row in m {
        for p in row {
            for c in p.terms().values() {
                scale = num_integer::Integer::lcm(&scale, c.denom());
            }
        }
    }
    let rows = m
        .iter()
        .map(|row| {
            row.iter()
                .map(|p| PackedPoly::from_poly_scaled(p, &scale))
                .collect::<Option<Vec<_>>>()
        })
        .collect::<Option<Vec<_>>>()?;
    Some((rows, scale))
}

fn nvars_of(m: &[Vec<Polynomial>]) -> usize {
    m.first()
        .and_then(|r| r.first())
        .map_or(0, |p| p.nvars())
}

fn bareiss(mut a: Vec<Vec<PackedPoly>>) -> Option<PackedPoly> {
    let n = a.len();
    let mut prev = PackedPoly::one();
    let mut negate = false;
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    negate = !negate;
                }
                None => return Some(PackedPoly { terms: Vec::new() }),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let t = a[i][j].mul(&a[k][k])?.sub(&a[i][k].mul(&a[k][j])?)?;
                a[i][j] = t.div_exact(&prev)?;
            }
        }
        prev = a[k][k].clone();
    }
    let det = a[n - 1][n - 1].clone();
    if negate {
        det.neg()
    } else {
        Some(det)
    }
}

pub(super) fn determinant(m: &[Vec<Polynomial>]) -> Option<Polynomial> {
    let n = m.len();
    let (a, scale) = scaled(m)?;
    let det = bareiss(a)?;
    Some(det.to_poly(nvars_of(m), &scale.pow(n as u32)))
}

/// Leading principal minors from one elimination pass; `None` on a zero
/// pivot or overflow.
pub(super) fn leading_minors(m: &[Vec<Polynomial>]) -> Option<Vec<Polynomial>> {
    let n = m.len();
    let nvars = nvars_of(m);
    let (mut a, scale) = scaled(m)?;
    let mut minors = vec![a[0][0].to_poly(nvars, &scale)];
    let mut prev = PackedPoly::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            return None;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let t = a[i][j].mul(&a[k][k])?.sub(&a[i][k].mul(&a[k][j])?)?;
                a[i][j] = t.div_exact(&prev)?;
            }
        }
        prev = a[k][k].clone();
        minors.push(a[k + 1][k + 1].to_poly(nvars, &scale.pow(k as u32 + 2)));
    }
    Some(minors)
}

/// Principal minors for every index set of size at most `max_size`,
/// keyed by the sorted index set.
///
/// Cofactor expansion along the first row, memoized on `(rows, cols)`
/// bitmasks and evaluated one size at a time. Without divisions no
/// intermediate has higher degree than the minors themselves.
pub(super) fn principal_minors(
    m: &[Vec<Polynomial>],
    max_size: usize,
) -> Option<Vec<(Vec<usize>, Polynomial)>> {
    use rustc_hash::FxHashSet;

    let nvars = nvars_of(m);
    let (a, scale) = scaled(m)?;
    let c = a.len();
    if c > 31 {
        return None;
    }
    let max_size = max_size.min(c);
    let bits = |mask: u32| (0..c).filter(move |&i| mask & (1 << i) != 0);

    let mut need: Vec<FxHashSet<(u32, u32)>> = vec![FxHashSet::default(); max_size + 1];
    for mask in 1u32..(1 << c) {
        let k = mask.count_ones() as usize;
        if k <= max_size {
            need[k].insert((mask, mask));
        }
    }
    for k in (2..=max_size).rev() {
        let states: Vec<(u32, u32)> = need[k].iter().copied().collect();
        for (rows, cols) in states {
            let r0 = rows.trailing_zeros();
            for j in bits(cols) {
                need[k - 1].insert((rows & !(1 << r0), cols & !(1 << j)));
            }
        }
    }

    let mut out = Vec::new();
    let mut prev: FxHashMap<(u32, u32), PackedPoly> = FxHashMap::default();
    for k in 1..=max_size {
        let mut cur = FxHashMap::default();
        for &(rows, cols) in &need[k] {
            let r0 = rows.trailing_zeros() as usize;
            let value = if k == 1 {
                a[r0][cols.trailing_zeros() as usize].clone()
            } else {
                let sub_rows = rows & !(1 << r0);
                let mut acc = PackedPoly { terms: Vec::new() };
                for (idx, j) in bits(cols).enumerate() {
                    let entry = &a[r0][j];
                    if entry.is_zero() {
                        continue;
                    }
                    let t = entry.mul(&prev[&(sub_rows, cols & !(1 << j))])?;
                    acc = if idx % 2 == 0 { acc.add(&t)? } else { acc.sub(&t)? };
                }
                acc
            };
            cur.insert((rows, cols), value);
        }
        let divisor = scale.pow(k as u32);
        for (&(rows, cols), v) in &cur {
            if rows == cols {
                out.push((bits(rows).collect(), v.to_poly(nvars, &divisor)));
            }
        }
        prev = cur;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_roundtrip_and_order() {
        let m = Monomial::new(vec![3, 0, 2]);
        let k = pack(m.exponents()).unwrap();
        assert_eq!(unpack(k, 3), m);
        let a = pack(&[1, 0]).unwrap();
        let b = pack(&[0, 2]).unwrap();
        assert!(a < b);
        assert_eq!(key_mul(a, b).unwrap(), pack(&[1, 2]).unwrap());
        assert_eq!(key_div(pack(&[1, 2]).unwrap(), b), Some(a));
        assert_eq!(key_div(a, b), None);
        assert!(pack(&[0; 16]).is_none());
    }

    #[test]
    fn division_detects_remainder() {
        let x = Polynomial::var(1, 0);
        let one = BigInt::one();
        let a = PackedPoly::from_poly_scaled(&(&(&x * &x) + &Polynomial::one(1)), &one).unwrap();
        let b = PackedPoly::from_poly_scaled(&(&x + &Polynomial::one(1)), &one).unwrap();
        assert!(a.div_exact(&b).is_none());
        let c = a.mul(&b).unwrap();
        assert_eq!(c.div_exact(&b).unwrap(), a);
    }

    #[test]
    fn overflow_is_reported() {
        let big = PackedPoly {
            terms: vec![(0, i128::MAX / 2)],
        };
        assert!(big.mul(&big).is_none());
    }

    #[test]
    fn zero_is_detected() {
        assert!(PackedPoly { terms: vec![] }.is_zero());
        assert!(!PackedPoly::one().is_zero());
    }
}

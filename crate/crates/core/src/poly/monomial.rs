use std::cmp::Ordering;
use std::fmt;

/// Exponent tuple of a monomial `x_0^a_0 * ... * x_{n-1}^a_{n-1}`.
///
/// Monomials are ordered by total degree first; within a degree, a larger
/// exponent on an earlier variable sorts first (`x^2 < x*y < y^2`). This is a
/// graded monomial order, so it is compatible with multiplication and can
/// drive multivariate division.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial {
    exps: Vec<u32>,
}

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Self {
        Monomial { exps }
    }

    pub fn one(nvars: usize) -> Self {
        Monomial {
            exps: vec![0; nvars],
        }
    }

    /// The monomial `x_var`.
    pub fn var(nvars: usize, var: usize) -> Self {
        let mut exps = vec![0; nvars];
        exps[var] = 1;
        Monomial { exps }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exps
    }

    pub fn nvars(&self) -> usize {
        self.exps.len()
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.exps.len(), other.exps.len());
        Monomial {
            exps: self
                .exps
                .iter()
                .zip(&other.exps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut exps = Vec::with_capacity(self.exps.len());
        for (a, b) in self.exps.iter().zip(&other.exps) {
            if b > a {
                return None;
            }
            exps.push(a - b);
        }
        Some(Monomial { exps })
    }

    pub fn evaluate(&self, point: &[f64]) -> f64 {
        self.exps
            .iter()
            .zip(point)
            .filter(|(e, _)| **e > 0)
            .map(|(&e, &x)| x.powi(e as i32))
            .product()
    }

    /// Renders the monomial with the given variable names; `1` for the unit.
    pub fn display_with(&self, names: &[String]) -> String {
        let parts: Vec<String> = self
            .exps
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| {
                let name = names.get(i).cloned().unwrap_or_else(|| format!("x{i}"));
                if e == 1 {
                    name
                } else {
                    format!("{name}^{e}")
                }
            })
            .collect();
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.exps.cmp(&self.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_with(&[]))
    }
}

/// An ordered list of distinct monomials, the vector `z(x)` of a Gram form.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MonomialVector {
    entries: Vec<Monomial>,
}

impl MonomialVector {
    /// Sorts and deduplicates the given monomials.
    pub fn new(mut entries: Vec<Monomial>) -> Self {
        entries.sort();
        entries.dedup();
        MonomialVector { entries }
    }

    pub fn entries(&self) -> &[Monomial] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> &Monomial {
        &self.entries[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Monomial> {
        self.entries.iter()
    }

    pub fn position(&self, m: &Monomial) -> Option<usize> {
        self.entries.binary_search(m).ok()
    }
}

impl<'a> IntoIterator for &'a MonomialVector {
    type Item = &'a Monomial;
    type IntoIter = std::slice::Iter<'a, Monomial>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

/// All monomials in `nvars` variables of total degree exactly `degree`.
pub fn homogeneous_monomials(nvars: usize, degree: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    if nvars == 0 {
        if degree == 0 {
            out.push(Monomial::one(0));
        }
        return out;
    }
    let mut exps = vec![0u32; nvars];
    fill_exponents(&mut exps, 0, degree, &mut out);
    out
}

fn fill_exponents(exps: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<Monomial>) {
    if pos + 1 == exps.len() {
        exps[pos] = remaining;
        out.push(Monomial::new(exps.to_vec()));
        return;
    }
    for e in (0..=remaining).rev() {
        exps[pos] = e;
        fill_exponents(exps, pos + 1, remaining - e, out);
    }
    exps[pos] = 0;
}

/// All monomials of total degree at most `max_degree`, in graded order.
pub fn monomial_basis(nvars: usize, max_degree: u32) -> MonomialVector {
    let mut entries = Vec::new();
    for d in 0..=max_degree {
        entries.extend(homogeneous_monomials(nvars, d));
    }
    MonomialVector::new(entries)
}

/// Degree-`degree` slice of the monomial basis.
pub fn homogeneous_basis(nvars: usize, degree: u32) -> MonomialVector {
    MonomialVector::new(homogeneous_monomials(nvars, degree))
}

/// `C(nvars + degree, degree)`, the size of [`monomial_basis`].
pub fn basis_size(nvars: usize, max_degree: u32) -> usize {
    let mut acc: u128 = 1;
    for k in 1..=max_degree as u128 {
        acc = acc * (nvars as u128 + k) / k;
    }
    acc.min(usize::MAX as u128) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_order_lists_x_before_y() {
        let z = monomial_basis(2, 1);
        let rendered: Vec<String> = z.iter().map(|m| m.to_string()).collect();
        assert_eq!(rendered, vec!["1", "x0", "x1"]);

        let quad = homogeneous_basis(2, 2);
        let rendered: Vec<String> = quad.iter().map(|m| m.to_string()).collect();
        assert_eq!(rendered, vec!["x0^2", "x0*x1", "x1^2"]);
    }

    #[test]
    fn basis_counts() {
        assert_eq!(monomial_basis(2, 1).len(), 3);
        assert_eq!(monomial_basis(2, 2).len(), 6);
        assert_eq!(monomial_basis(3, 2).len(), 10);
        assert_eq!(monomial_basis(0, 3).len(), 1);
    }

    #[test]
    fn binomial_count_matches_for_small_rings() {
        fn binom(n: u64, k: u64) -> u64 {
            (1..=k).fold(1, |acc, i| acc * (n - k + i) / i)
        }
        for nvars in 0..=6usize {
            for d in 0..=6u32 {
                let expected = binom(nvars as u64 + d as u64, d as u64) as usize;
                assert_eq!(monomial_basis(nvars, d).len(), expected);
                assert_eq!(basis_size(nvars, d), expected);
            }
        }
    }

    #[test]
    fn order_is_multiplicative() {
        let basis = monomial_basis(3, 3);
        let c = Monomial::new(vec![1, 0, 2]);
        for a in basis.iter() {
            for b in basis.iter() {
                if a < b {
                    assert!(a.mul(&c) < b.mul(&c));
                }
            }
        }
    }

    #[test]
    fn division_of_monomials() {
        let a = Monomial::new(vec![2, 1]);
        let b = Monomial::new(vec![1, 1]);
        assert_eq!(a.div(&b), Some(Monomial::new(vec![1, 0])));
        assert_eq!(b.div(&a), None);
    }
}

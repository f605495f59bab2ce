//! Fraction-free (Bareiss) determinants over exact rings.

use num_rational::BigRational;
use num_traits::Zero;

use crate::poly::Polynomial;

mod packed;

/// A commutative ring element supporting exact division by a known factor.
pub trait ExactRing: Clone {
    fn is_zero_elem(&self) -> bool;
    fn mul_elem(&self, other: &Self) -> Self;
    fn sub_elem(&self, other: &Self) -> Self;
    fn neg_elem(&self) -> Self;
    /// `self / divisor`, where the caller guarantees exactness.
    fn div_exact_elem(&self, divisor: &Self) -> Self;
    fn one_like(&self) -> Self;
}

impl ExactRing for BigRational {
    fn is_zero_elem(&self) -> bool {
        self.is_zero()
    }
    fn mul_elem(&self, other: &Self) -> Self {
        self * other
    }
    fn sub_elem(&self, other: &Self) -> Self {
        self - other
    }
    fn neg_elem(&self) -> Self {
        -self
    }
    fn div_exact_elem(&self, divisor: &Self) -> Self {
        self / divisor
    }
    fn one_like(&self) -> Self {
        num_traits::One::one()
    }
}

impl ExactRing for Polynomial {
    fn is_zero_elem(&self) -> bool {
        self.is_zero()
    }
    fn mul_elem(&self, other: &Self) -> Self {
        self * other
    }
    fn sub_elem(&self, other: &Self) -> Self {
        self - other
    }
    fn neg_elem(&self) -> Self {
        -self
    }
    fn div_exact_elem(&self, divisor: &Self) -> Self {
        // Bareiss guarantees divisibility; a failure here is a bug upstream.
        self.div_exact(divisor).expect("Bareiss step must divide exactly")
    }
    fn one_like(&self) -> Self {
        Polynomial::one(self.nvars())
    }
}

/// Determinant of a square matrix by Bareiss elimination with row pivoting.
///
/// Every intermediate entry is itself a minor of the input, so entries never
/// leave the ring. Panics on a non-square or empty matrix.
pub fn bareiss_determinant<T: ExactRing>(matrix: &[Vec<T>]) -> T {
    let n = matrix.len();
    assert!(n > 0, "determinant of an empty matrix");
    assert!(matrix.iter().all(|r| r.len() == n), "matrix must be square");
    let mut a: Vec<Vec<T>> = matrix.to_vec();
    let one = a[0][0].one_like();
    let mut prev = one.clone();
    let mut negate = false;
    for k in 0..n - 1 {
        if a[k][k].is_zero_elem() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero_elem()) {
                Some(r) => {
                    a.swap(k, r);
                    negate = !negate;
                }
                None => return one.sub_elem(&one),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let t = a[i][j]
                    .mul_elem(&a[k][k])
                    .sub_elem(&a[i][k].mul_elem(&a[k][j]));
                a[i][j] = t.div_exact_elem(&prev);
            }
        }
        prev = a[k][k].clone();
    }
    let det = a[n - 1][n - 1].clone();
    if negate {
        det.neg_elem()
    } else {
        det
    }
}

/// Determinant of a polynomial matrix. Uses packed integer arithmetic
/// when coefficients and degrees allow, and exact rationals otherwise.
pub fn polynomial_determinant(matrix: &[Vec<Polynomial>]) -> Polynomial {
    assert!(!matrix.is_empty(), "determinant of an empty matrix");
    packed::determinant(matrix).unwrap_or_else(|| bareiss_determinant(matrix))
}

/// Determinants of the leading `k x k` submatrices, `k = 1..=n`.
pub fn leading_principal_minors(matrix: &[Vec<Polynomial>]) -> Vec<Polynomial> {
    if matrix.is_empty() {
        return Vec::new();
    }
    if let Some(m) = packed::leading_minors(matrix) {
        return m;
    }
    (1..=matrix.len())
        .map(|k| {
            let sub: Vec<Vec<Polynomial>> = matrix[..k].iter().map(|r| r[..k].to_vec()).collect();
            polynomial_determinant(&sub)
        })
        .collect()
}

/// Principal minors of a symmetric polynomial matrix for every index set
/// of size `1..=max_size`, in increasing bitmask order of the index sets.
pub fn principal_minors(matrix: &[Vec<Polynomial>], max_size: usize) -> Vec<(Vec<usize>, Polynomial)> {
    let c = matrix.len();
    let direct = |s: &Vec<usize>| {
        let sub: Vec<Vec<Polynomial>> = s
            .iter()
            .map(|&i| s.iter().map(|&j| matrix[i][j].clone()).collect())
            .collect();
        polynomial_determinant(&sub)
    };
    let mut out = match packed::principal_minors(matrix, max_size) {
        Some(found) => found,
        None => (1u64..(1 << c))
            .map(|mask| (0..c).filter(|&i| mask & (1 << i) != 0).collect::<Vec<_>>())
            .filter(|s| s.len() <= max_size)
            .map(|s| {
                let d = direct(&s);
                (s, d)
            })
            .collect(),
    };
    out.sort_by_key(|(s, _)| s.iter().map(|&i| 1u64 << i).sum::<u64>());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    /// Leibniz expansion, for cross-checking.
    fn leibniz(m: &[Vec<BigRational>]) -> BigRational {
        let n = m.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut total = BigRational::zero();
        permute(&mut perm, 0, m, &mut total);
        total
    }

    fn permute(perm: &mut Vec<usize>, k: usize, m: &[Vec<BigRational>], total: &mut BigRational) {
        if k == perm.len() {
            let mut inversions = 0;
            for i in 0..perm.len() {
                for j in i + 1..perm.len() {
                    if perm[i] > perm[j] {
                        inversions += 1;
                    }
                }
            }
            let mut prod = int(1);
            for (i, &p) in perm.iter().enumerate() {
                prod *= &m[i][p];
            }
            if inversions % 2 == 1 {
                prod = -prod;
            }
            *total += prod;
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            permute(perm, k + 1, m, total);
            perm.swap(k, i);
        }
    }

    fn mat(rows: &[&[i64]]) -> Vec<Vec<BigRational>> {
        rows.iter()
            .map(|r| r.iter().map(|&v| int(v)).collect())
            .collect()
    }

    #[test]
    fn small_determinants() {
        assert_eq!(bareiss_determinant(&mat(&[&[1, 2], &[3, 4]])), int(-2));
        assert_eq!(bareiss_determinant(&mat(&[&[0, 1], &[1, 0]])), int(-1));
        assert_eq!(bareiss_determinant(&mat(&[&[1, 2], &[2, 4]])), int(0));
        assert_eq!(bareiss_determinant(&mat(&[&[7]])), int(7));
    }

    #[test]
    fn agrees_with_leibniz() {
        let m = mat(&[
            &[0, 2, -1, 3, 1],
            &[2, 0, 5, 1, 1],
            &[-1, 5, 0, 4, 1],
            &[3, 1, 4, 0, 1],
            &[1, 1, 1, 1, 0],
        ]);
        assert_eq!(bareiss_determinant(&m), leibniz(&m));
    }

    #[test]
    fn determinant_over_polynomials() {
        let x = Polynomial::var(2, 0);
        let y = Polynomial::var(2, 1);
        let m = vec![vec![x.clone(), y.clone()], vec![y.clone(), x.clone()]];
        let det = bareiss_determinant(&m);
        assert_eq!(det, &(&x * &x) - &(&y * &y));

        let one = Polynomial::one(2);
        let m3 = vec![
            vec![x.clone(), one.clone(), Polynomial::zero(2)],
            vec![one.clone(), y.clone(), one.clone()],
            vec![Polynomial::zero(2), one.clone(), x.clone()],
        ];
        // x(yx - 1) - 1*(x) = x^2 y - 2x
        let expected = &(&(&x * &x) * &y) - &x.scale(&int(2));
        assert_eq!(bareiss_determinant(&m3), expected);
        assert_eq!(polynomial_determinant(&m3), expected);
    }

    #[test]
    fn packed_path_agrees_with_generic() {
        let v: Vec<Polynomial> = (0..3).map(|i| Polynomial::var(3, i)).collect();
        let half = Polynomial::constant(3, crate::rational::ratio(1, 2));
        let m = vec![
            vec![&v[0] * &v[1], half.clone(), &v[2] - &v[0]],
            vec![half.clone(), &v[1] * &v[1], v[2].clone()],
            vec![&v[2] - &v[0], v[2].clone(), &(&v[0] * &v[2]) + &half],
        ];
        assert_eq!(polynomial_determinant(&m), bareiss_determinant(&m));
        let minors = leading_principal_minors(&m);
        assert_eq!(minors.len(), 3);
        for (k, minor) in minors.iter().enumerate() {
            let sub: Vec<Vec<Polynomial>> = m[..=k].iter().map(|r| r[..=k].to_vec()).collect();
            assert_eq!(*minor, bareiss_determinant(&sub));
        }
        let all = principal_minors(&m, 3);
        assert_eq!(all.len(), 7);
        for (s, minor) in &all {
            let sub: Vec<Vec<Polynomial>> =
                s.iter().map(|&i| s.iter().map(|&j| m[i][j].clone()).collect()).collect();
            assert_eq!(*minor, bareiss_determinant(&sub), "{s:?}");
        }
        assert_eq!(all[2].0, vec![0, 1]);
        assert_eq!(principal_minors(&m, 2).len(), 6);

        // zero leading pivot
        let z = Polynomial::zero(3);
        let one = Polynomial::one(3);
        let m = vec![vec![z.clone(), one.clone()], vec![one.clone(), v[0].clone()]];
        assert_eq!(leading_principal_minors(&m), vec![z.clone(), -one.clone()]);
        let all = principal_minors(&m, 2);
        assert_eq!(all, vec![(vec![0], z), (vec![1], v[0].clone()), (vec![0, 1], -one)]);
    }
}

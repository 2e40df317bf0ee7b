//! Smith normal form and the maps `ψ_A` from `Y_0(det A)` to products.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::cm_curves::{CMCurve, CyclicSubgroup};
use crate::error::{Error, Result};
use crate::products::ProductVariety;

pub type IntMatrix = Vec<Vec<BigInt>>;

pub fn identity(n: usize) -> IntMatrix {
    (0..n)
        .map(|i| (0..n).map(|j| BigInt::from((i == j) as i64)).collect())
        .collect()
}

pub fn mat_mul(a: &IntMatrix, b: &IntMatrix) -> IntMatrix {
    let (n, m, k) = (a.len(), b[0].len(), b.len());
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..k).map(|t| &a[i][t] * &b[t][j]).sum())
                .collect()
        })
        .collect()
}

/// Exact determinant by fraction-free (Bareiss) elimination.
pub fn determinant(m: &IntMatrix) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut a = m.clone();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(i) => {
                    a.swap(k, i);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

/// A symmetric positive definite integer matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymPosDefIntMatrix {
    entries: IntMatrix,
}

impl SymPosDefIntMatrix {
    pub fn new(entries: IntMatrix) -> Result<Self> {
        let n = entries.len();
        if n == 0 || entries.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("matrix must be square and nonempty"));
        }
        for i in 0..n {
            for j in 0..i {
                if entries[i][j] != entries[j][i] {
                    return Err(Error::invalid("matrix is not symmetric"));
                }
            }
        }
        for k in 1..=n {
            let minor: IntMatrix = entries[..k].iter().map(|r| r[..k].to_vec()).collect();
            if !determinant(&minor).is_positive() {
                return Err(Error::invalid(format!(
                    "leading {k}×{k} minor is not positive"
                )));
            }
        }
        Ok(SymPosDefIntMatrix { entries })
    }

    pub fn from_i64(rows: &[&[i64]]) -> Result<Self> {
        SymPosDefIntMatrix::new(
            rows.iter()
                .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
                .collect(),
        )
    }

    pub fn diagonal(d: &[BigInt]) -> Result<Self> {
        let mut m = identity(d.len());
        for (i, x) in d.iter().enumerate() {
            m[i][i] = x.clone();
        }
        SymPosDefIntMatrix::new(m)
    }

    pub fn scalar(g: usize, c: &BigInt) -> Result<Self> {
        SymPosDefIntMatrix::diagonal(&vec![c.clone(); g])
    }

    pub fn g(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &IntMatrix {
        &self.entries
    }

    pub fn det(&self) -> BigInt {
        determinant(&self.entries)
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.g();
        (0..n).all(|i| (0..n).all(|j| i == j || self.entries[i][j].is_zero()))
    }

    pub fn diagonal_entries(&self) -> Vec<BigInt> {
        (0..self.g()).map(|i| self.entries[i][i].clone()).collect()
    }
}

impl fmt::Display for SymPosDefIntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .entries
            .iter()
            .map(|r| {
                let xs: Vec<String> = r.iter().map(|x| x.to_string()).collect();
                format!("[{}]", xs.join(","))
            })
            .collect();
        write!(f, "[{}]", rows.join(","))
    }
}

/// `A = U·diag(d)·V` with `U`, `V` unimodular and `d_1 | ⋯ | d_g`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SNFResult {
    pub u: IntMatrix,
    pub v: IntMatrix,
    pub d: Vec<BigInt>,
}

impl SNFResult {
    pub fn diagonal(&self) -> IntMatrix {
        let mut m = identity(self.d.len());
        for (i, x) in self.d.iter().enumerate() {
            m[i][i] = x.clone();
        }
        m
    }

    pub fn recompose(&self) -> IntMatrix {
        mat_mul(&mat_mul(&self.u, &self.diagonal()), &self.v)
    }
}

/// Smith normal form of a nonsingular square integer matrix.
///
/// Pivots on the entry of least absolute value (first in row-major order),
/// clearing its column before its row. `U` and `V` are accumulated as the
/// inverses of the applied operations.
pub fn snf(m: &IntMatrix) -> Result<SNFResult> {
    let n = m.len();
    if determinant(m).is_zero() {
        return Err(Error::invalid("Smith normal form of a singular matrix"));
    }
    let mut a = m.clone();
    let mut u = identity(n);
    let mut v = identity(n);

    // row_i += k·row_j on a, matching column op on u
    fn row_add(a: &mut IntMatrix, u: &mut IntMatrix, i: usize, j: usize, k: &BigInt) {
        let rj = a[j].clone();
        for (x, y) in a[i].iter_mut().zip(&rj) {
            *x += k * y;
        }
        for r in u.iter_mut() {
            let ci = r[i].clone();
            r[j] -= k * ci;
        }
    }
    // col_j += k·col_i on a, matching row op on v
    fn col_add(a: &mut IntMatrix, v: &mut IntMatrix, j: usize, i: usize, k: &BigInt) {
        for r in a.iter_mut() {
            let ci = r[i].clone();
            r[j] += k * ci;
        }
        let vj = v[j].clone();
        for (x, y) in v[i].iter_mut().zip(&vj) {
            *x -= k * y;
        }
    }

    for t in 0..n {
        loop {
            let mut best: Option<(usize, usize)> = None;
            for i in t..n {
                for j in t..n {
                    if !a[i][j].is_zero()
                        && best.map_or(true, |(bi, bj)| a[i][j].abs() < a[bi][bj].abs())
                    {
                        best = Some((i, j));
                    }
                }
            }
            let (pi, pj) = best.expect("nonsingular");
            if pi != t {
                a.swap(pi, t);
                for r in u.iter_mut() {
                    r.swap(pi, t);
                }
            }
            if pj != t {
                for r in a.iter_mut() {
                    r.swap(pj, t);
                }
                v.swap(pj, t);
            }
            let mut clean = true;
            for i in t + 1..n {
                let q = &a[i][t] / &a[t][t];
                if !q.is_zero() {
                    row_add(&mut a, &mut u, i, t, &-q);
                }
                clean &= a[i][t].is_zero();
            }
            if !clean {
                continue;
            }
            for j in t + 1..n {
                let q = &a[t][j] / &a[t][t];
                if !q.is_zero() {
                    col_add(&mut a, &mut v, j, t, &-q);
                }
                clean &= a[t][j].is_zero();
            }
            if !clean {
                continue;
            }
            let p = a[t][t].clone();
            match (t + 1..n).find(|&i| (t + 1..n).any(|j| !a[i][j].is_multiple_of(&p))) {
                Some(i) => row_add(&mut a, &mut u, t, i, &BigInt::one()),
                None => break,
            }
        }
        if a[t][t].is_negative() {
            for x in a[t].iter_mut() {
                *x = -&*x;
            }
            for r in u.iter_mut() {
                r[t] = -&r[t];
            }
        }
    }
    let d: Vec<BigInt> = (0..n).map(|i| a[i][i].clone()).collect();
    Ok(SNFResult { u, v, d })
}

pub fn smith_normal_form(a: &SymPosDefIntMatrix) -> SNFResult {
    snf(a.entries()).expect("positive definite matrices are nonsingular")
}

/// `#{v ∈ (Z/N)^g : A·v ≡ 0 mod N}`, which must equal `det A`.
pub fn kernel_order(a: &SymPosDefIntMatrix, n: &BigInt) -> Result<BigInt> {
    if a.det() != *n {
        return Err(Error::invalid(format!("det A = {} but N = {n}", a.det())));
    }
    let count: BigInt = smith_normal_form(a).d.iter().map(|d| d.gcd(n)).product();
    if count != *n {
        return Err(Error::integrity(format!(
            "kernel of A mod N has order {count}, expected det A = {n}"
        )));
    }
    Ok(count)
}

/// The same count by enumerating `(Z/N)^g`.
pub fn kernel_order_brute(a: &SymPosDefIntMatrix, n: u64) -> u64 {
    let g = a.g();
    let m: Vec<Vec<u64>> = a
        .entries()
        .iter()
        .map(|r| r.iter().map(|x| crate::arith::residue(x, n)).collect())
        .collect();
    let total = (n as u128).pow(g as u32);
    let mut v = vec![0u64; g];
    let mut count = 0u64;
    for _ in 0..total {
        let zero = m.iter().all(|row| {
            row.iter()
                .zip(&v)
                .fold(0u128, |s, (x, y)| (s + *x as u128 * *y as u128) % n as u128)
                == 0
        });
        count += zero as u64;
        for x in v.iter_mut() {
            *x += 1;
            if *x < n {
                break;
            }
            *x = 0;
        }
    }
    count
}

/// `ψ_A(E, C)` up to weak isomorphism, with its principality witness.
#[derive(Clone, Debug)]
pub struct PsiImage {
    pub product: ProductVariety,
    pub divisors: Vec<BigInt>,
    pub kernel_order: BigInt,
}

fn factor(c: &CyclicSubgroup, k: &BigInt) -> Result<CMCurve> {
    c.multiple(k)?.quotient()
}

/// `E_1 × ⋯ × E_g` with `E_i = E/((N/d_i)·C)`, `d_i` the elementary divisors.
pub fn psi_general(c: &CyclicSubgroup, a: &SymPosDefIntMatrix) -> Result<PsiImage> {
    let n = &c.order;
    if a.det() != *n {
        return Err(Error::invalid(format!(
            "det A = {} but the subgroup has order {n}",
            a.det()
        )));
    }
    let kernel = kernel_order(a, n)?;
    let divisors = smith_normal_form(a).d;
    let factors = divisors
        .iter()
        .map(|d| factor(c, &(n / d)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PsiImage {
        product: ProductVariety::new(factors)?,
        divisors,
        kernel_order: kernel,
    })
}

/// `E/((N/a_11)C) × ⋯ × E/((N/a_gg)C)` in the given order; each `a_ii` must
/// divide `N`.
pub fn psi_diag(c: &CyclicSubgroup, a: &SymPosDefIntMatrix) -> Result<ProductVariety> {
    if !a.is_diagonal() {
        return Err(Error::invalid(format!("{a} is not diagonal")));
    }
    let n = &c.order;
    let factors = a
        .diagonal_entries()
        .iter()
        .map(|d| {
            if !n.is_multiple_of(d) {
                return Err(Error::invalid(format!("{d} does not divide N = {n}")));
            }
            factor(c, &(n / d))
        })
        .collect::<Result<Vec<_>>>()?;
    ProductVariety::new(factors)
}

/// Bareiss elimination in `i128`; the enumeration keeps entries small.
fn det_i128(m: &[Vec<i128>]) -> i128 {
    let n = m.len();
    let mut a = m.to_vec();
    let (mut sign, mut prev) = (1i128, 1i128);
    for k in 0..n.saturating_sub(1) {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&i| a[i][k] != 0) {
                Some(i) => {
                    a.swap(k, i);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    if n == 0 {
        1
    } else {
        sign * a[n - 1][n - 1]
    }
}

/// `log_ℓ(x)` if `x` is a power of `ℓ`.
pub fn log_exact(x: &BigInt, ell: u64) -> Option<u32> {
    if !x.is_positive() {
        return None;
    }
    let (mut x, l) = (x.clone(), BigInt::from(ell));
    let mut e = 0;
    while !x.is_one() {
        if !x.is_multiple_of(&l) {
            return None;
        }
        x /= &l;
        e += 1;
    }
    Some(e)
}

/// Members of `Det_{ℓ,g}` with `det ≤ ℓ^max_power` and entries bounded by
/// `ℓ^max_power`, ordered by determinant then row-major entries.
pub fn enumerate_detl(g: usize, ell: u64, max_power: u32) -> Vec<SymPosDefIntMatrix> {
    let bound = (ell as i128).pow(max_power);
    enumerate_detl_bounded(g, ell, max_power, bound as u64)
}

/// As [`enumerate_detl`] with an explicit bound on `|A_ij|`.
pub fn enumerate_detl_bounded(
    g: usize,
    ell: u64,
    max_power: u32,
    entry_bound: u64,
) -> Vec<SymPosDefIntMatrix> {
    let powers: Vec<i128> = (0..=max_power).map(|e| (ell as i128).pow(e)).collect();
    let b = entry_bound as i128;
    let mut out: Vec<(i128, Vec<Vec<i128>>)> = Vec::new();
    let mut m = vec![vec![0i128; g]; g];
    if g == 0 {
        return Vec::new();
    }
    // fill row k (entries m[i][k] for i ≤ k), checking leading minors
    fn rec(
        k: usize,
        i: usize,
        g: usize,
        b: i128,
        powers: &[i128],
        m: &mut Vec<Vec<i128>>,
        out: &mut Vec<(i128, Vec<Vec<i128>>)>,
    ) {
        if k == g - 1 && i == k {
            // det is affine in the last diagonal entry
            let minor: Vec<Vec<i128>> = m[..k].iter().map(|r| r[..k].to_vec()).collect();
            let slope = if k == 0 { 1 } else { det_i128(&minor) };
            m[k][k] = 0;
            let offset = det_i128(m);
            for &p in powers {
                let num = p - offset;
                if num % slope == 0 {
                    let x = num / slope;
                    if x >= 1 && x <= b {
                        m[k][k] = x;
                        out.push((p, m.clone()));
                    }
                }
            }
            m[k][k] = 0;
            return;
        }
        if i == k {
            for x in 1..=b {
                m[k][k] = x;
                let minor: Vec<Vec<i128>> = m[..=k].iter().map(|r| r[..=k].to_vec()).collect();
                if det_i128(&minor) > 0 {
                    rec(k + 1, 0, g, b, powers, m, out);
                }
            }
            m[k][k] = 0;
            return;
        }
        for x in -b..=b {
            m[i][k] = x;
            m[k][i] = x;
            rec(k, i + 1, g, b, powers, m, out);
        }
        m[i][k] = 0;
        m[k][i] = 0;
    }
    rec(0, 0, g, b, &powers, &mut m, &mut out);
    out.sort();
    out.into_iter()
        .map(|(_, m)| {
            SymPosDefIntMatrix::new(
                m.iter()
                    .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
                    .collect(),
            )
            .expect("enumeration keeps only positive definite matrices")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cm_curves::{descending_chain, weak_iso_curves};
    use crate::products::oracle_slow;
    use crate::quad_orders::Discriminant;
    use proptest::prelude::*;

    fn int(n: i64) -> BigInt {
        BigInt::from(n)
    }

    #[test]
    fn snf_examples() {
        let a = SymPosDefIntMatrix::from_i64(&[&[2, 1], &[1, 2]]).unwrap();
        let s = smith_normal_form(&a);
        assert_eq!(s.d, vec![int(1), int(3)]);
        assert_eq!(s.recompose(), *a.entries());
        let i3 = SymPosDefIntMatrix::scalar(3, &int(1)).unwrap();
        assert_eq!(smith_normal_form(&i3).d, vec![int(1); 3]);
        let dg = SymPosDefIntMatrix::diagonal(&[int(1), int(3), int(9)]).unwrap();
        assert_eq!(smith_normal_form(&dg).d, vec![int(1), int(3), int(9)]);
        let mixed = SymPosDefIntMatrix::diagonal(&[int(4), int(6)]).unwrap();
        assert_eq!(smith_normal_form(&mixed).d, vec![int(2), int(12)]);
    }

    #[test]
    fn rejects_non_pd() {
        assert!(SymPosDefIntMatrix::from_i64(&[&[1, 2], &[2, 1]]).is_err());
        assert!(SymPosDefIntMatrix::from_i64(&[&[1, 0], &[1, 1]]).is_err());
        assert!(SymPosDefIntMatrix::from_i64(&[&[0]]).is_err());
        assert!(snf(&vec![vec![int(1), int(2)], vec![int(2), int(4)]]).is_err());
    }

    #[test]
    fn kernel_orders() {
        let a = SymPosDefIntMatrix::from_i64(&[&[2, 1], &[1, 2]]).unwrap();
        assert_eq!(kernel_order(&a, &int(3)).unwrap(), int(3));
        assert_eq!(kernel_order_brute(&a, 3), 3);
        let i = SymPosDefIntMatrix::scalar(2, &int(1)).unwrap();
        assert_eq!(kernel_order(&i, &int(1)).unwrap(), int(1));
        let d = SymPosDefIntMatrix::diagonal(&[int(2), int(3), int(5)]).unwrap();
        assert_eq!(kernel_order_brute(&d, 30), 30);
        assert!(kernel_order(&d, &int(31)).is_err());
    }

    #[test]
    fn detl_enumeration() {
        let g1 = enumerate_detl(1, 3, 3);
        let dets: Vec<BigInt> = g1.iter().map(|a| a.det()).collect();
        assert_eq!(dets, vec![int(1), int(3), int(9), int(27)]);
        let g2 = enumerate_detl(2, 3, 1);
        assert!(g2.contains(&SymPosDefIntMatrix::from_i64(&[&[1, 0], &[0, 3]]).unwrap()));
        assert!(g2.contains(&SymPosDefIntMatrix::from_i64(&[&[2, 1], &[1, 2]]).unwrap()));
        for a in enumerate_detl_bounded(3, 3, 2, 3) {
            assert!(log_exact(&a.det(), 3).is_some_and(|e| e <= 2));
        }
        let all = enumerate_detl(2, 2, 3);
        let mut sorted = all.clone();
        sorted.sort_by_key(|a| a.det());
        assert_eq!(
            all.iter().map(|a| a.det()).collect::<Vec<_>>(),
            sorted.iter().map(|a| a.det()).collect::<Vec<_>>()
        );
        // every 2×2 with entries ≤ 8 and det a power of 2 up to 8 is found
        let mut count = 0;
        for a in 1..=8i64 {
            for b in -8..=8i64 {
                for c in 1..=8i64 {
                    let det = a * c - b * b;
                    if det > 0 && det <= 8 && (det & (det - 1)) == 0 {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(all.len(), count);
    }

    #[test]
    fn psi_on_descending_chain() {
        let d = Discriminant::new(-7).unwrap();
        let e0 = CMCurve::base(d);
        let chain = descending_chain(&e0, 3, 3).unwrap();
        let a = SymPosDefIntMatrix::diagonal(&[int(1), int(3), int(9)]).unwrap();
        let p = psi_diag(&chain.kernel, &a).unwrap();
        for (f, i) in p.factors.iter().zip([0usize, 1, 2]) {
            assert!(f.lattice == chain.curves[i].lattice);
        }
        let full = SymPosDefIntMatrix::diagonal(&[int(27)]).unwrap();
        assert!(
            psi_diag(&chain.kernel, &full).unwrap().factors[0].lattice == chain.curves[3].lattice
        );
        let img = psi_general(&chain.kernel, &a).unwrap();
        assert_eq!(img.kernel_order, int(27));
        assert!(oracle_slow(&img.product, &p).unwrap());
    }

    #[test]
    fn psi_general_depends_on_divisors_only() {
        let d = Discriminant::new(-7).unwrap();
        let e0 = CMCurve::base(d);
        let chain = descending_chain(&e0, 3, 1).unwrap();
        let a = SymPosDefIntMatrix::from_i64(&[&[2, 1], &[1, 2]]).unwrap();
        let b = SymPosDefIntMatrix::from_i64(&[&[1, 0], &[0, 3]]).unwrap();
        let pa = psi_general(&chain.kernel, &a).unwrap();
        let pb = psi_general(&chain.kernel, &b).unwrap();
        assert!(weak_iso_curves(&pa.product.factors[0], &e0));
        assert!(oracle_slow(&pa.product, &pb.product).unwrap());
        let wrong = SymPosDefIntMatrix::scalar(2, &int(3)).unwrap();
        assert!(psi_general(&chain.kernel, &wrong).is_err());
    }

    fn sym_pd(g: usize) -> impl Strategy<Value = SymPosDefIntMatrix> {
        proptest::collection::vec(-6i64..=6, g * g).prop_map(move |xs| {
            // BᵗB + I is symmetric positive definite
            let b: IntMatrix = xs
                .chunks(g)
                .map(|r| r.iter().map(|&x| int(x)).collect())
                .collect();
            let mut m = identity(g);
            for i in 0..g {
                for j in 0..g {
                    m[i][j] += (0..g).map(|k| &b[k][i] * &b[k][j]).sum::<BigInt>();
                }
            }
            SymPosDefIntMatrix::new(m).unwrap()
        })
    }

    proptest! {
        #[test]
        fn snf_round_trip(a in (1usize..=5).prop_flat_map(sym_pd)) {
            let s = smith_normal_form(&a);
            prop_assert_eq!(&s.recompose(), a.entries());
            prop_assert_eq!(determinant(&s.u).abs(), int(1));
            prop_assert_eq!(determinant(&s.v).abs(), int(1));
            for w in s.d.windows(2) {
                prop_assert!(w[1].is_multiple_of(&w[0]));
            }
            prop_assert!(s.d.iter().all(|x| x.is_positive()));
            prop_assert_eq!(s.d.iter().product::<BigInt>(), a.det());
        }
    }
}

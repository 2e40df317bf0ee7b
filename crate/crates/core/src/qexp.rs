//! Half-integral matrices, formal q-expansions and their pullbacks along
//! `τ ↦ τA`, and the search for `A ∈ Det_{ℓ,g}` singling out one term.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::psi_map::{determinant, SymPosDefIntMatrix};
use crate::wire::{self, as_array, as_int, as_u64, field};

pub type RatMatrix = Vec<Vec<BigRational>>;

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// `Q` with `Q_ii ∈ Z` and `2Q_ij ∈ Z`, stored as `2Q`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HalfIntegralMatrix {
    twice: Vec<Vec<i64>>,
}

impl HalfIntegralMatrix {
    /// From the integer matrix `2Q`; must be symmetric, even on the diagonal
    /// and positive semidefinite.
    pub fn from_twice(twice: Vec<Vec<i64>>) -> Result<Self> {
        let g = twice.len();
        if g == 0 || twice.iter().any(|r| r.len() != g) {
            return Err(Error::invalid("2Q must be square and nonempty"));
        }
        for i in 0..g {
            if twice[i][i] % 2 != 0 {
                return Err(Error::invalid("diagonal of 2Q must be even"));
            }
            for j in 0..i {
                if twice[i][j] != twice[j][i] {
                    return Err(Error::invalid("2Q is not symmetric"));
                }
            }
        }
        let m = HalfIntegralMatrix { twice };
        if !m.is_psd() {
            return Err(Error::invalid("Q is not positive semidefinite"));
        }
        Ok(m)
    }

    pub fn zero(g: usize) -> Self {
        HalfIntegralMatrix {
            twice: vec![vec![0; g]; g],
        }
    }

    pub fn g(&self) -> usize {
        self.twice.len()
    }

    pub fn twice(&self) -> &Vec<Vec<i64>> {
        &self.twice
    }

    pub fn trace(&self) -> i64 {
        (0..self.g()).map(|i| self.twice[i][i] / 2).sum()
    }

    /// Every principal minor of `2Q` is nonnegative.
    fn is_psd(&self) -> bool {
        let g = self.g();
        (1u32..(1 << g)).all(|mask| {
            let idx: Vec<usize> = (0..g).filter(|i| mask & (1 << i) != 0).collect();
            let sub: Vec<Vec<BigInt>> = idx
                .iter()
                .map(|&i| {
                    idx.iter()
                        .map(|&j| BigInt::from(self.twice[i][j]))
                        .collect()
                })
                .collect();
            !determinant(&sub).is_negative()
        })
    }

    /// `tr(AQ) = Σ A_ii Q_ii + Σ_{i<j} A_ij·2Q_ij`.
    pub fn trace_against(&self, a: &SymPosDefIntMatrix) -> BigInt {
        let e = a.entries();
        let g = self.g();
        let mut t = BigInt::zero();
        for i in 0..g {
            t += &e[i][i] * (self.twice[i][i] / 2);
            for j in i + 1..g {
                t += &e[i][j] * self.twice[i][j];
            }
        }
        t
    }

    /// `tr(EQ)` for a rational symmetric `E`.
    pub fn trace_against_rational(&self, e: &RatMatrix) -> BigRational {
        let g = self.g();
        let mut t = BigRational::zero();
        for i in 0..g {
            for j in 0..g {
                t += &e[i][j] * BigRational::new(BigInt::from(self.twice[j][i]), BigInt::from(2));
            }
        }
        t
    }

    /// `PᵗQP` for the permutation matrix of `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let g = self.g();
        HalfIntegralMatrix {
            twice: (0..g)
                .map(|i| (0..g).map(|j| self.twice[perm[i]][perm[j]]).collect())
                .collect(),
        }
    }

    fn key(&self) -> (i64, Vec<i64>) {
        (self.trace(), self.twice.iter().flatten().copied().collect())
    }
}

impl PartialOrd for HalfIntegralMatrix {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Canonical order: by trace, then the entries of `2Q` row by row.
impl Ord for HalfIntegralMatrix {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

/// All PSD half-integral `g×g` matrices with `tr(Q) ≤ t`, in canonical order.
///
/// Off-diagonal ranges come from `tr(Q²) ≤ tr(Q)²`, which for fixed diagonal
/// `d` gives `Σ_{i<j} (2Q_ij)² ≤ 2((Σd)² − Σd²)`.
pub fn enumerate_bounded_trace(g: usize, t: i64) -> Vec<HalfIntegralMatrix> {
    let mut out = Vec::new();
    if g == 0 || t < 0 {
        return out;
    }
    let mut diag = vec![0i64; g];
    fn diagonals(k: usize, left: i64, diag: &mut Vec<i64>, f: &mut dyn FnMut(&[i64])) {
        if k == diag.len() {
            f(diag);
            return;
        }
        for x in 0..=left {
            diag[k] = x;
            diagonals(k + 1, left - x, diag, f);
        }
        diag[k] = 0;
    }
    let pairs: Vec<(usize, usize)> = (0..g)
        .flat_map(|i| (i + 1..g).map(move |j| (i, j)))
        .collect();
    diagonals(0, t, &mut diag, &mut |d| {
        let s: i64 = d.iter().sum();
        let budget = 2 * (s * s - d.iter().map(|x| x * x).sum::<i64>());
        let mut m = vec![vec![0i64; g]; g];
        for i in 0..g {
            m[i][i] = 2 * d[i];
        }
        fn offdiag(
            k: usize,
            budget: i64,
            pairs: &[(usize, usize)],
            m: &mut Vec<Vec<i64>>,
            out: &mut Vec<HalfIntegralMatrix>,
        ) {
            if k == pairs.len() {
                let q = HalfIntegralMatrix { twice: m.clone() };
                if q.is_psd() {
                    out.push(q);
                }
                return;
            }
            let (i, j) = pairs[k];
            let r = crate::arith::isqrt(&BigInt::from(budget))
                .to_i64()
                .unwrap_or(0);
            for x in -r..=r {
                m[i][j] = x;
                m[j][i] = x;
                offdiag(k + 1, budget - x * x, pairs, m, out);
            }
            m[i][j] = 0;
            m[j][i] = 0;
        }
        offdiag(0, budget, &pairs, &mut m, &mut out);
    });
    out.sort();
    out
}

/// Coefficients are exact rationals, or residues in `[0, p)` when a modulus
/// is set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormalQExpansion {
    pub g: usize,
    pub modulus: Option<u64>,
    coeffs: BTreeMap<HalfIntegralMatrix, BigRational>,
}

fn reduce_coeff(c: BigRational, modulus: Option<u64>) -> Result<BigRational> {
    match modulus {
        None => Ok(c),
        Some(p) => {
            let p = BigInt::from(p);
            let den = c.denom().mod_floor(&p);
            let inv = crate::arith::mod_inv(
                den.to_u64().expect("reduced below p"),
                p.to_u64().expect("small prime"),
            )
            .ok_or_else(|| {
                Error::invalid(format!("denominator of {c} is not invertible mod {p}"))
            })?;
            Ok(BigRational::from_integer(
                (c.numer() * BigInt::from(inv)).mod_floor(&p),
            ))
        }
    }
}

impl FormalQExpansion {
    pub fn new(g: usize, modulus: Option<u64>) -> Result<Self> {
        if let Some(p) = modulus {
            if !crate::arith::is_prime(p) {
                return Err(Error::NotPrime(p));
            }
        }
        Ok(FormalQExpansion {
            g,
            modulus,
            coeffs: BTreeMap::new(),
        })
    }

    /// Adds `c·q^Q`, dropping the term if it cancels.
    pub fn add_term(&mut self, q: HalfIntegralMatrix, c: BigRational) -> Result<()> {
        if q.g() != self.g {
            return Err(Error::invalid(format!(
                "term of size {} in a genus-{} expansion",
                q.g(),
                self.g
            )));
        }
        let c = reduce_coeff(c, self.modulus)?;
        let sum = reduce_coeff(
            self.coeffs
                .get(&q)
                .cloned()
                .unwrap_or_else(BigRational::zero)
                + c,
            self.modulus,
        )?;
        if sum.is_zero() {
            self.coeffs.remove(&q);
        } else {
            self.coeffs.insert(q, sum);
        }
        Ok(())
    }

    pub fn coeff(&self, q: &HalfIntegralMatrix) -> BigRational {
        self.coeffs
            .get(q)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn support(&self) -> Vec<HalfIntegralMatrix> {
        self.coeffs.keys().cloned().collect()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&HalfIntegralMatrix, &BigRational)> {
        self.coeffs.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.g != other.g || self.modulus != other.modulus {
            return Err(Error::Mismatch("expansions of different shapes".into()));
        }
        let mut out = self.clone();
        for (q, c) in other.terms() {
            out.add_term(q.clone(), c.clone())?;
        }
        Ok(out)
    }
}

/// `Σ_n (Σ_{tr(AQ) = n} c(Q)) qⁿ`, zero terms omitted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PullbackSeries {
    pub modulus: Option<u64>,
    pub terms: BTreeMap<BigInt, BigRational>,
}

impl PullbackSeries {
    pub fn coeff(&self, n: &BigInt) -> BigRational {
        self.terms.get(n).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut terms = self.terms.clone();
        for (n, c) in &other.terms {
            let s = reduce_coeff(
                terms.get(n).cloned().unwrap_or_else(BigRational::zero) + c,
                self.modulus,
            )?;
            if s.is_zero() {
                terms.remove(n);
            } else {
                terms.insert(n.clone(), s);
            }
        }
        Ok(PullbackSeries {
            modulus: self.modulus,
            terms,
        })
    }
}

pub fn pullback(f: &FormalQExpansion, a: &SymPosDefIntMatrix) -> Result<PullbackSeries> {
    if a.g() != f.g {
        return Err(Error::invalid(format!(
            "A is {0}×{0} but f has genus {1}",
            a.g(),
            f.g
        )));
    }
    let mut out = PullbackSeries {
        modulus: f.modulus,
        terms: BTreeMap::new(),
    };
    for (q, c) in f.terms() {
        let n = q.trace_against(a);
        let s = reduce_coeff(out.coeff(&n) + c, f.modulus)?;
        if s.is_zero() {
            out.terms.remove(&n);
        } else {
            out.terms.insert(n, s);
        }
    }
    Ok(out)
}

// --- the unique-minimizer cone ---------------------------------------------

/// `t_0`, the trace-minimal part `S_0`, and the next trace `t_1` if any.
fn trace_split(s: &[HalfIntegralMatrix]) -> (i64, Vec<&HalfIntegralMatrix>, Option<i64>) {
    let t0 = s
        .iter()
        .map(HalfIntegralMatrix::trace)
        .min()
        .expect("nonempty");
    let s0: Vec<_> = s.iter().filter(|q| q.trace() == t0).collect();
    let t1 = s
        .iter()
        .map(HalfIntegralMatrix::trace)
        .filter(|&t| t > t0)
        .min();
    (t0, s0, t1)
}

fn is_positive_definite_rational(e: &RatMatrix) -> bool {
    // clear denominators and test leading minors
    let den = e
        .iter()
        .flatten()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let m: Vec<Vec<BigInt>> = e
        .iter()
        .map(|r| {
            r.iter()
                .map(|x| (x * BigRational::from_integer(den.clone())).to_integer())
                .collect()
        })
        .collect();
    (1..=m.len()).all(|k| {
        let minor: Vec<Vec<BigInt>> = m[..k].iter().map(|r| r[..k].to_vec()).collect();
        determinant(&minor).is_positive()
    })
}

/// The three conditions defining the cone: distinct `tr(EQ)` on `S_0`,
/// `E` positive definite, and `tr(EQ) < t_1 − t_0` on `S_0`.
pub fn check_cone_conditions(e: &RatMatrix, s: &[HalfIntegralMatrix]) -> bool {
    if s.is_empty() {
        return false;
    }
    let g = s[0].g();
    if e.len() != g || e.iter().any(|r| r.len() != g) {
        return false;
    }
    let symmetric = (0..g).all(|i| (0..i).all(|j| e[i][j] == e[j][i]));
    let (t0, s0, t1) = trace_split(s);
    let values: Vec<BigRational> = s0.iter().map(|q| q.trace_against_rational(e)).collect();
    let mut sorted = values.clone();
    sorted.sort();
    let distinct = sorted.windows(2).all(|w| w[0] != w[1]);
    let small = match t1 {
        None => true,
        Some(t1) => values.iter().all(|v| *v < rat(t1 - t0)),
    };
    symmetric && distinct && is_positive_definite_rational(e) && small
}

/// A rational `E` in the cone for `S`: a random symmetric perturbation,
/// shifted to be diagonally dominant, then scaled into the trace gap.
pub fn minimizer_cone_sample(
    s: &[HalfIntegralMatrix],
    seed: u64,
    budget: usize,
) -> Result<RatMatrix> {
    if s.is_empty() {
        return Err(Error::invalid("support must be nonempty"));
    }
    let g = s[0].g();
    if s.iter().any(|q| q.g() != g) {
        return Err(Error::invalid("support matrices of different sizes"));
    }
    let (t0, s0, t1) = trace_split(s);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1_000_000i64;
    for _ in 0..budget.max(1) {
        let mut e = vec![vec![BigRational::zero(); g]; g];
        for i in 0..g {
            for j in i..g {
                let x = BigRational::new(
                    BigInt::from(rng.gen_range(-scale..=scale)),
                    BigInt::from(scale),
                );
                e[i][j] = x.clone();
                e[j][i] = x;
            }
        }
        for i in 0..g {
            let off: BigRational = (0..g).filter(|&j| j != i).map(|j| e[i][j].abs()).sum();
            e[i][i] = e[i][i].abs() + off + rat(1);
        }
        if let Some(t1) = t1 {
            let max = s0
                .iter()
                .map(|q| q.trace_against_rational(&e))
                .max()
                .expect("S_0 is nonempty");
            if max.is_positive() {
                let eps = (rat(t1 - t0) / (max * rat(2))).min(rat(1));
                for x in e.iter_mut().flatten() {
                    *x = &*x * &eps;
                }
            }
        }
        if check_cone_conditions(&e, s) {
            return Ok(e);
        }
    }
    Err(Error::SearchExhausted {
        stage: "minimizer cone sample".into(),
        found: 0,
        wanted: 1,
        bound: budget as u64,
    })
}

// --- SL_g(Z[1/ℓ]) approximation ----------------------------------------------

/// `I + c·e_ij`.
#[derive(Clone, Debug)]
struct Transvection {
    i: usize,
    j: usize,
    c: f64,
}

fn round_to(c: f64, ell: u64, k: u32) -> Result<BigRational> {
    let exact = BigRational::from_f64(c)
        .ok_or_else(|| Error::invalid(format!("parameter {c} is not finite")))?;
    let den = num_traits::pow(BigInt::from(ell), k as usize);
    let scaled = exact * BigRational::from_integer(den.clone());
    Ok(BigRational::new(scaled.round().to_integer(), den))
}

/// Writes `h` as a product of transvections (left to right).
fn transvection_factors(h: &[Vec<f64>]) -> Result<Vec<Transvection>> {
    let g = h.len();
    let mut m: Vec<Vec<f64>> = h.to_vec();
    // ops record X_r ⋯ X_1 · h = D
    let mut ops: Vec<Transvection> = Vec::new();
    let apply = |m: &mut Vec<Vec<f64>>, t: &Transvection| {
        let rj = m[t.j].clone();
        for (x, y) in m[t.i].iter_mut().zip(&rj) {
            *x += t.c * y;
        }
    };
    for col in 0..g {
        if m[col][col].abs() < 0.5 {
            let best = (col + 1..g)
                .map(|r| (r, m[r][col]))
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .filter(|(_, v)| v.abs() > m[col][col].abs());
            if let Some((r, v)) = best {
                let t = Transvection {
                    i: col,
                    j: r,
                    c: (1.0 - m[col][col]) / v,
                };
                apply(&mut m, &t);
                ops.push(t);
            }
        }
        if m[col][col].abs() < 1e-12 {
            return Err(Error::invalid(format!(
                "matrix is numerically singular at column {col} (pivot {:e})",
                m[col][col]
            )));
        }
        for r in 0..g {
            if r != col && m[r][col] != 0.0 {
                let t = Transvection {
                    i: r,
                    j: col,
                    c: -m[r][col] / m[col][col],
                };
                apply(&mut m, &t);
                ops.push(t);
            }
        }
    }
    // h = X_1⁻¹ ⋯ X_r⁻¹ · D
    let mut factors: Vec<Transvection> = ops
        .into_iter()
        .map(|t| Transvection { c: -t.c, ..t })
        .collect();
    // D = ∏_k diag(.., p_k, 1/p_k, ..) with p_k = d_1⋯d_k, each w(p_k)·w(−1)
    let mut p = 1.0;
    for k in 0..g.saturating_sub(1) {
        p *= m[k][k];
        if !(p.is_finite() && p.abs() > 1e-12 && p.abs() < 1e12) {
            return Err(Error::invalid(format!(
                "diagonal factor {p:e} is out of range"
            )));
        }
        for t in [p, -1.0] {
            factors.push(Transvection {
                i: k,
                j: k + 1,
                c: t,
            });
            factors.push(Transvection {
                i: k + 1,
                j: k,
                c: -1.0 / t,
            });
            factors.push(Transvection {
                i: k,
                j: k + 1,
                c: t,
            });
        }
    }
    if factors.iter().any(|t| !t.c.is_finite() || t.c.abs() > 1e12) {
        return Err(Error::invalid("transvection parameter out of range"));
    }
    Ok(factors)
}

pub fn det_f64(h: &[Vec<f64>]) -> f64 {
    let g = h.len();
    let mut m = h.to_vec();
    let mut det = 1.0;
    for c in 0..g {
        let p = (c..g)
            .max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))
            .expect("nonempty");
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..g {
            let f = m[r][c] / m[c][c];
            for k in c..g {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

/// `G ∈ SL_g(Z[1/ℓ])` near `h`: each transvection parameter of `h` is
/// rounded to `ℓ^{-k}·Z`.
pub fn approx_in_sl(h: &[Vec<f64>], ell: u64, k: u32) -> Result<RatMatrix> {
    let g = h.len();
    if g == 0 || h.iter().any(|r| r.len() != g) {
        return Err(Error::invalid("matrix must be square and nonempty"));
    }
    if !crate::arith::is_prime(ell) {
        return Err(Error::NotPrime(ell));
    }
    let det = det_f64(h);
    if (det - 1.0).abs() > 1e-8 {
        return Err(Error::invalid(format!("det H = {det} is not 1")));
    }
    let mut out: RatMatrix = (0..g)
        .map(|i| (0..g).map(|j| rat((i == j) as i64)).collect())
        .collect();
    for t in transvection_factors(h)? {
        let c = round_to(t.c, ell, k)?;
        // right-multiply by I + c·e_ij: column j += c·column i
        for row in out.iter_mut() {
            let add = &row[t.i] * &c;
            row[t.j] += add;
        }
    }
    Ok(out)
}

pub fn max_abs_diff(g_exact: &RatMatrix, h: &[Vec<f64>]) -> f64 {
    g_exact
        .iter()
        .zip(h)
        .flat_map(|(r, s)| {
            r.iter()
                .zip(s)
                .map(|(x, y)| (x.to_f64().unwrap_or(f64::INFINITY) - y).abs())
        })
        .fold(0.0, f64::max)
}

pub fn rational_det(m: &RatMatrix) -> BigRational {
    let den = m
        .iter()
        .flatten()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<Vec<BigInt>> = m
        .iter()
        .map(|r| {
            r.iter()
                .map(|x| (x * BigRational::from_integer(den.clone())).to_integer())
                .collect()
        })
        .collect();
    BigRational::new(determinant(&ints), num_traits::pow(den, m.len()))
}

/// Whether every entry has a power of `ℓ` as denominator.
pub fn in_z_one_over(m: &RatMatrix, ell: u64) -> bool {
    m.iter()
        .flatten()
        .all(|x| crate::psi_map::log_exact(x.denom(), ell).is_some())
}

// --- witness search ----------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct WitnessOptions {
    pub seed: u64,
    pub start_precision: u32,
    /// Number of `k ← k + 8` escalations.
    pub escalations: u32,
    pub cone_budget: usize,
}

impl Default for WitnessOptions {
    fn default() -> Self {
        WitnessOptions {
            seed: 0,
            start_precision: 8,
            escalations: 8,
            cone_budget: 64,
        }
    }
}

/// The unique minimizer of `tr(AQ)` over `S`, if there is one.
pub fn unique_argmin<'a>(
    a: &SymPosDefIntMatrix,
    s: &'a [HalfIntegralMatrix],
) -> Option<(&'a HalfIntegralMatrix, BigInt)> {
    let mut vals: Vec<(BigInt, &HalfIntegralMatrix)> =
        s.iter().map(|q| (q.trace_against(a), q)).collect();
    vals.sort_by(|x, y| x.0.cmp(&y.0));
    match vals.as_slice() {
        [] => None,
        [only] => Some((only.1, only.0.clone())),
        [first, second, ..] if first.0 < second.0 => Some((first.1, first.0.clone())),
        _ => None,
    }
}

fn cholesky(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let g = m.len();
    let mut l = vec![vec![0.0; g]; g];
    for i in 0..g {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = m[i][i] - s;
                if d <= 0.0 {
                    return Err(Error::invalid(
                        "matrix is not numerically positive definite",
                    ));
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

/// `A ∈ Det_{ℓ,g}` with `min_{Q∈S} tr(AQ)` attained at exactly one `Q`.
///
/// `A = ℓ^s·G·Gᵗ` with `G ∈ SL_g(Z[1/ℓ])` approximating the normalized
/// Cholesky factor of `I + E`, `E` from [`minimizer_cone_sample`]; the
/// precision of `G` is raised until the minimizer is unique.
pub fn find_witness_matrix(
    s: &[HalfIntegralMatrix],
    ell: u64,
    opts: WitnessOptions,
) -> Result<SymPosDefIntMatrix> {
    if s.is_empty() {
        return Err(Error::invalid("support must be nonempty"));
    }
    if !crate::arith::is_prime(ell) {
        return Err(Error::NotPrime(ell));
    }
    let g = s[0].g();
    if s.len() == 1 {
        return SymPosDefIntMatrix::scalar(g, &BigInt::one());
    }
    let e = minimizer_cone_sample(s, opts.seed, opts.cone_budget)?;
    let target: Vec<Vec<f64>> = (0..g)
        .map(|i| {
            (0..g)
                .map(|j| e[i][j].to_f64().unwrap_or(0.0) + if i == j { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let l = cholesky(&target)?;
    let det_l: f64 = (0..g).map(|i| l[i][i]).product();
    let norm = det_l.powf(1.0 / g as f64);
    let h: Vec<Vec<f64>> = l
        .iter()
        .map(|r| r.iter().map(|x| x / norm).collect())
        .collect();
    let mut k = opts.start_precision;
    for _ in 0..=opts.escalations {
        let gm = approx_in_sl(&h, ell, k)?;
        let a = scaled_gram(&gm, ell)?;
        if unique_argmin(&a, s).is_some() {
            return Ok(a);
        }
        k += 8;
    }
    Err(Error::SearchExhausted {
        stage: "witness matrix".into(),
        found: 0,
        wanted: 1,
        bound: k as u64,
    })
}

/// `ℓ^s·G·Gᵗ` for the least `s` making it integral.
fn scaled_gram(gm: &RatMatrix, ell: u64) -> Result<SymPosDefIntMatrix> {
    let g = gm.len();
    let gram: RatMatrix = (0..g)
        .map(|i| {
            (0..g)
                .map(|j| (0..g).map(|t| &gm[i][t] * &gm[j][t]).sum())
                .collect()
        })
        .collect();
    let den = gram
        .iter()
        .flatten()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let e = crate::psi_map::log_exact(&den, ell)
        .ok_or_else(|| Error::integrity("G·Gᵗ has a denominator that is not an ℓ-power"))?;
    // det(ℓ^s·GGᵗ) = ℓ^{sg}, so any s ≥ e works; take the least
    let scale = BigRational::from_integer(num_traits::pow(BigInt::from(ell), e as usize));
    let m: Vec<Vec<BigInt>> = gram
        .iter()
        .map(|r| r.iter().map(|x| (x * &scale).to_integer()).collect())
        .collect();
    SymPosDefIntMatrix::new(m)
}

/// `(A, n, c_0)`: the coefficient of `qⁿ` in the pullback along `A` is the
/// single coefficient `c_0 = c(Q_0)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NonvanishingWitness {
    pub a: SymPosDefIntMatrix,
    pub n: BigInt,
    pub q0: HalfIntegralMatrix,
    pub c0: BigRational,
}

pub fn nonvanishing_witness(
    f: &FormalQExpansion,
    ell: u64,
    opts: WitnessOptions,
) -> Result<NonvanishingWitness> {
    if f.is_zero() {
        return Err(Error::invalid(
            "the zero expansion has no nonvanishing witness",
        ));
    }
    let s = f.support();
    let a = find_witness_matrix(&s, ell, opts)?;
    let (q0, n) =
        unique_argmin(&a, &s).ok_or_else(|| Error::integrity("minimizer is not unique"))?;
    let c0 = f.coeff(q0);
    let series = pullback(f, &a)?;
    if series.coeff(&n) != c0 || c0.is_zero() {
        return Err(Error::integrity(format!(
            "pullback coefficient at q^{n} is {}, expected {c0}",
            series.coeff(&n)
        )));
    }
    if series.terms.keys().next() != Some(&n) {
        return Err(Error::integrity("pullback has a term below the minimum"));
    }
    Ok(NonvanishingWitness {
        a,
        n,
        q0: q0.clone(),
        c0,
    })
}

// --- JSON ----------------------------------------------------------------------

fn rational_string(c: &BigRational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::invalid(format!("{s} is not a rational number"));
    match s.split_once('/') {
        None => Ok(BigRational::from_integer(
            s.trim().parse().map_err(|_| bad())?,
        )),
        Some((n, d)) => {
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(n.trim().parse().map_err(|_| bad())?, d))
        }
    }
}

fn twice_json(q: &HalfIntegralMatrix) -> Value {
    json!(q.twice())
}

pub fn expansion_json(f: &FormalQExpansion) -> Value {
    let terms: Vec<Value> = f
        .terms()
        .map(|(q, c)| json!({ "Q": twice_json(q), "c": rational_string(c) }))
        .collect();
    json!({ "g": f.g, "modulus": f.modulus, "terms": terms })
}

/// Accepts either a bare list of `{Q, c}` terms or an object with `terms`
/// and an optional prime `modulus`.
pub fn expansion_from(v: &Value) -> Result<FormalQExpansion> {
    let invalid = |e: Error| Error::invalid(e.to_string());
    let (terms, modulus) = match v {
        Value::Array(_) => (v, None),
        Value::Object(o) => (
            field(v, "terms").map_err(invalid)?,
            match o.get("modulus") {
                None | Some(Value::Null) => None,
                Some(m) => Some(as_u64(m).map_err(invalid)?),
            },
        ),
        _ => return Err(Error::invalid("expansion must be a list or an object")),
    };
    let terms = as_array(terms).map_err(invalid)?;
    let first = terms
        .first()
        .ok_or_else(|| Error::invalid("expansion has no terms; g is unknown"))?;
    let g = as_array(field(first, "Q").map_err(invalid)?)
        .map_err(invalid)?
        .len();
    let mut f = FormalQExpansion::new(g, modulus)?;
    for t in terms {
        let rows = as_array(field(t, "Q").map_err(invalid)?).map_err(invalid)?;
        let twice = rows
            .iter()
            .map(|r| {
                as_array(r)
                    .and_then(|r| r.iter().map(wire::as_i64).collect::<Result<Vec<_>>>())
                    .map_err(invalid)
            })
            .collect::<Result<Vec<_>>>()?;
        let c = match field(t, "c").map_err(invalid)? {
            Value::String(s) => parse_rational(s)?,
            n @ Value::Number(_) => BigRational::from_integer(as_int(n).map_err(invalid)?),
            other => {
                return Err(Error::invalid(format!(
                    "coefficient {other} is not rational"
                )))
            }
        };
        f.add_term(HalfIntegralMatrix::from_twice(twice)?, c)?;
    }
    Ok(f)
}

pub fn series_json(s: &PullbackSeries) -> Value {
    let terms: serde_json::Map<String, Value> = s
        .terms
        .iter()
        .map(|(n, c)| (n.to_string(), Value::String(rational_string(c))))
        .collect();
    Value::Object(terms)
}

pub fn witness_json(w: &NonvanishingWitness) -> Value {
    json!({
        "a": wire::matrix_json(&w.a),
        "c0": rational_string(&w.c0),
        "n": wire::int(&w.n),
        "q0": twice_json(&w.q0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(rows: &[&[i64]]) -> HalfIntegralMatrix {
        HalfIntegralMatrix::from_twice(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    /// PSD by symmetric elimination over Q, independent of the minor test.
    fn psd_by_elimination(twice: &[Vec<i64>]) -> bool {
        let g = twice.len();
        let mut m: Vec<Vec<BigRational>> = twice
            .iter()
            .map(|r| r.iter().map(|&x| rat(x)).collect())
            .collect();
        for c in 0..g {
            if m[c][c].is_negative() {
                return false;
            }
            if m[c][c].is_zero() {
                if (c..g).any(|j| !m[c][j].is_zero()) {
                    return false;
                }
                continue;
            }
            for r in c + 1..g {
                let f = &m[r][c] / &m[c][c];
                for k in c..g {
                    let d = &f * &m[c][k];
                    m[r][k] -= d;
                }
            }
        }
        true
    }

    fn brute_force(g: usize, t: i64) -> usize {
        let pairs: Vec<(usize, usize)> = (0..g)
            .flat_map(|i| (i + 1..g).map(move |j| (i, j)))
            .collect();
        let mut count = 0;
        let nd = (t + 1).pow(g as u32);
        let no = (4 * t + 1).pow(pairs.len() as u32);
        for dcode in 0..nd {
            let mut d = vec![0i64; g];
            let mut r = dcode;
            for x in d.iter_mut() {
                *x = r % (t + 1);
                r /= t + 1;
            }
            if d.iter().sum::<i64>() > t {
                continue;
            }
            for ocode in 0..no {
                let mut m = vec![vec![0i64; g]; g];
                for i in 0..g {
                    m[i][i] = 2 * d[i];
                }
                let mut r = ocode;
                for &(i, j) in &pairs {
                    let x = r % (4 * t + 1) - 2 * t;
                    r /= 4 * t + 1;
                    m[i][j] = x;
                    m[j][i] = x;
                }
                if psd_by_elimination(&m) {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn bounded_trace_examples() {
        let two = enumerate_bounded_trace(2, 1);
        assert_eq!(two.len(), 3);
        assert_eq!(two[0], HalfIntegralMatrix::zero(2));
        let one = enumerate_bounded_trace(1, 2);
        assert_eq!(
            one.iter().map(|q| q.trace()).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        for g in 1..=3 {
            for t in 0..=if g == 3 { 3 } else { 4 } {
                assert_eq!(
                    enumerate_bounded_trace(g, t).len(),
                    brute_force(g, t),
                    "g={g} t={t}"
                );
            }
        }
    }

    #[test]
    fn bounded_trace_is_permutation_closed() {
        let all = enumerate_bounded_trace(3, 3);
        for m in &all {
            for perm in [[1, 0, 2], [2, 1, 0], [1, 2, 0]] {
                assert!(all.binary_search(&m.permuted(&perm)).is_ok());
            }
        }
    }

    #[test]
    fn rejects_bad_half_integral() {
        assert!(HalfIntegralMatrix::from_twice(vec![vec![1]]).is_err());
        assert!(HalfIntegralMatrix::from_twice(vec![vec![2, 3], vec![3, 2]]).is_err());
        assert!(HalfIntegralMatrix::from_twice(vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(HalfIntegralMatrix::from_twice(vec![vec![2, 1], vec![0, 2]]).is_err());
    }

    #[test]
    fn pullback_examples() {
        let a = SymPosDefIntMatrix::from_i64(&[&[2, 1], &[1, 2]]).unwrap();
        let mut f = FormalQExpansion::new(2, None).unwrap();
        f.add_term(q(&[&[2, 0], &[0, 2]]), rat(1)).unwrap();
        let s = pullback(&f, &a).unwrap();
        assert_eq!(s.terms.len(), 1);
        assert_eq!(s.coeff(&BigInt::from(4)), rat(1));
        let zero = FormalQExpansion::new(2, None).unwrap();
        assert!(pullback(&zero, &a).unwrap().terms.is_empty());
        // find two matrices with equal tr(AQ) and cancel them
        let all = enumerate_bounded_trace(2, 2);
        let (q1, q2) = all
            .iter()
            .flat_map(|x| all.iter().map(move |y| (x, y)))
            .find(|(x, y)| x != y && x.trace_against(&a) == y.trace_against(&a))
            .unwrap();
        let mut h = FormalQExpansion::new(2, None).unwrap();
        h.add_term(q1.clone(), rat(3)).unwrap();
        h.add_term(q2.clone(), rat(-3)).unwrap();
        assert!(pullback(&h, &a).unwrap().terms.is_empty());
    }

    #[test]
    fn prime_field_coefficients() {
        let mut f = FormalQExpansion::new(1, Some(5)).unwrap();
        f.add_term(
            q(&[&[2]]),
            BigRational::new(BigInt::from(1), BigInt::from(2)),
        )
        .unwrap();
        assert_eq!(f.coeff(&q(&[&[2]])), rat(3));
        f.add_term(q(&[&[2]]), rat(2)).unwrap();
        assert!(f.is_zero());
        assert!(f
            .add_term(
                q(&[&[2]]),
                BigRational::new(BigInt::from(1), BigInt::from(5))
            )
            .is_err());
        assert!(FormalQExpansion::new(1, Some(6)).is_err());
    }

    #[test]
    fn cone_samples() {
        let s = vec![q(&[&[2, 0], &[0, 0]]), q(&[&[0, 0], &[0, 2]])];
        let e = minimizer_cone_sample(&s, 1, 16).unwrap();
        assert!(check_cone_conditions(&e, &s));
        assert_ne!(e[0][0], e[1][1]);
        let single = vec![q(&[&[2, 1], &[1, 2]])];
        let eps: RatMatrix = vec![
            vec![rat(1) / rat(100), rat(0)],
            vec![rat(0), rat(1) / rat(100)],
        ];
        assert!(check_cone_conditions(&eps, &single));
    }

    #[test]
    fn sl_approximation() {
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let g = approx_in_sl(&id, 2, 10).unwrap();
        assert_eq!(g, vec![vec![rat(1), rat(0)], vec![rat(0), rat(1)]]);
        let (c, s) = (
            std::f64::consts::FRAC_PI_4.cos(),
            std::f64::consts::FRAC_PI_4.sin(),
        );
        let rot = vec![vec![c, -s], vec![s, c]];
        let g = approx_in_sl(&rot, 2, 20).unwrap();
        assert!(rational_det(&g).is_one());
        assert!(in_z_one_over(&g, 2));
        assert!(max_abs_diff(&g, &rot) < 1e-3);
        let mut prev = f64::INFINITY;
        for k in [4, 12, 20, 28] {
            let err = max_abs_diff(&approx_in_sl(&rot, 3, k).unwrap(), &rot);
            assert!(err <= prev);
            prev = err;
        }
        assert!(approx_in_sl(&vec![vec![2.0, 0.0], vec![0.0, 2.0]], 2, 8).is_err());
    }

    #[test]
    fn witness_examples() {
        let s = vec![q(&[&[2, 0], &[0, 0]]), q(&[&[0, 0], &[0, 2]])];
        let a = find_witness_matrix(&s, 3, WitnessOptions::default()).unwrap();
        assert_ne!(a.entries()[0][0], a.entries()[1][1]);
        assert!(crate::psi_map::log_exact(&a.det(), 3).is_some());
        assert!(unique_argmin(&a, &s).is_some());
        let one = vec![q(&[&[2, 1], &[1, 2]])];
        assert!(find_witness_matrix(&one, 3, WitnessOptions::default())
            .unwrap()
            .det()
            .is_one());

        let mut f = FormalQExpansion::new(2, None).unwrap();
        f.add_term(q(&[&[2, 1], &[1, 2]]), rat(7)).unwrap();
        let w = nonvanishing_witness(&f, 2, WitnessOptions::default()).unwrap();
        assert_eq!(w.c0, rat(7));
        assert!(nonvanishing_witness(
            &FormalQExpansion::new(2, None).unwrap(),
            2,
            WitnessOptions::default()
        )
        .is_err());
    }

    #[test]
    fn witness_avoids_collisions() {
        // under A = I these two terms collide at the minimum and cancel
        let (q1, q2) = (q(&[&[2, 0], &[0, 0]]), q(&[&[0, 0], &[0, 2]]));
        let mut f = FormalQExpansion::new(2, None).unwrap();
        f.add_term(q1, rat(1)).unwrap();
        f.add_term(q2, rat(-1)).unwrap();
        let id = SymPosDefIntMatrix::scalar(2, &BigInt::one()).unwrap();
        assert!(pullback(&f, &id).unwrap().terms.is_empty());
        let w = nonvanishing_witness(&f, 2, WitnessOptions::default()).unwrap();
        assert!(!pullback(&f, &w.a).unwrap().coeff(&w.n).is_zero());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"modulus": null, "terms": [{"Q": [[2,1],[1,2]], "c": "3/4"}, {"Q": [[0,0],[0,2]], "c": -2}]}"#;
        let f = expansion_from(&serde_json::from_str(text).unwrap()).unwrap();
        assert_eq!(expansion_from(&expansion_json(&f)).unwrap(), f);
        let list = r#"[{"Q": [[2]], "c": "1"}]"#;
        assert_eq!(
            expansion_from(&serde_json::from_str(list).unwrap())
                .unwrap()
                .g,
            1
        );
        assert!(
            expansion_from(&serde_json::from_str(r#"[{"Q": [[1]], "c": "1"}]"#).unwrap()).is_err()
        );
    }

    fn expansion(g: usize) -> impl Strategy<Value = FormalQExpansion> {
        let all = enumerate_bounded_trace(g, 2);
        proptest::collection::vec((0..all.len(), -5i64..=5), 0..8).prop_map(move |ts| {
            let mut f = FormalQExpansion::new(g, None).unwrap();
            for (i, c) in ts {
                f.add_term(all[i].clone(), rat(c)).unwrap();
            }
            f
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn pullback_is_linear(f in expansion(2), h in expansion(2)) {
            let a = SymPosDefIntMatrix::from_i64(&[&[3, 1], &[1, 2]]).unwrap();
            let lhs = pullback(&f.add(&h).unwrap(), &a).unwrap();
            let rhs = pullback(&f, &a).unwrap().add(&pullback(&h, &a).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn sl_output_is_exact(x in -3.0f64..3.0, y in -3.0f64..3.0, z in 0.2f64..3.0, k in 1u32..30) {
            // [[z, x], [y, (1 + xy)/z]] has determinant 1
            let h = vec![vec![z, x], vec![y, (1.0 + x * y) / z]];
            let g = approx_in_sl(&h, 2, k).unwrap();
            prop_assert!(rational_det(&g).is_one());
            prop_assert!(in_z_one_over(&g, 2));
        }
    }
}

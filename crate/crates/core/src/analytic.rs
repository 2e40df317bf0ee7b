//! Floating-point checks of the complex-analytic side: `τ ↦ τA` into the
//! Siegel upper half space, its equivariance under `Γ_0(N)`, and the
//! Riemann forms on `A⁻¹Z^g + τZ^g` and `Z^g + τAZ^g`.

use num_bigint::BigInt;
use num_complex::Complex;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Float, One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::psi_map::{determinant, IntMatrix, SymPosDefIntMatrix};
use crate::qexp::{self, RatMatrix};

pub const TOLERANCE: f64 = 1e-9;
/// Inputs outside these ranges are rejected rather than checked with
/// degraded accuracy.
pub const MIN_IM_TAU: f64 = 0.5;
pub const MAX_ENTRY: i64 = 1000;

type C64 = Complex<f64>;
type CMatrix<T> = Vec<Vec<Complex<T>>>;

/// A point of `H_g`: symmetric with positive definite imaginary part.
#[derive(Clone, Debug)]
pub struct SiegelPoint {
    omega: CMatrix<f64>,
}

impl SiegelPoint {
    pub fn new(omega: CMatrix<f64>) -> Result<Self> {
        let g = omega.len();
        if g == 0 || omega.iter().any(|r| r.len() != g) {
            return Err(Error::invalid("Ω must be square and nonempty"));
        }
        let scale = omega.iter().flatten().map(|z| z.norm()).fold(1.0, f64::max);
        for i in 0..g {
            for j in 0..i {
                if (omega[i][j] - omega[j][i]).norm() > TOLERANCE * scale {
                    return Err(Error::invalid("Ω is not symmetric"));
                }
            }
        }
        let im: Vec<Vec<f64>> = omega
            .iter()
            .map(|r| r.iter().map(|z| z.im).collect())
            .collect();
        if !cholesky_margin(&im, 1e-12 * scale) {
            return Err(Error::invalid("Im Ω is not positive definite"));
        }
        Ok(SiegelPoint { omega })
    }

    pub fn omega(&self) -> &CMatrix<f64> {
        &self.omega
    }

    pub fn g(&self) -> usize {
        self.omega.len()
    }
}

fn cholesky_margin(m: &[Vec<f64>], margin: f64) -> bool {
    let g = m.len();
    let mut l = vec![vec![0.0; g]; g];
    for i in 0..g {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = m[i][i] - s;
                if d <= margin {
                    return false;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    true
}

/// `M` with `MᵗJM = J`, `J = [[0, I], [−I, 0]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymplecticMatrix {
    m: IntMatrix,
}

impl SymplecticMatrix {
    pub fn new(m: IntMatrix) -> Result<Self> {
        let n = m.len();
        if n == 0 || n % 2 != 0 || m.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("M must be 2g×2g"));
        }
        let g = n / 2;
        let j = |r: usize, c: usize| -> i64 {
            match (r < g, c < g) {
                (true, false) if c - g == r => 1,
                (false, true) if r - g == c => -1,
                _ => 0,
            }
        };
        // (MᵗJM)_rc = Σ_{s,t} M_sr J_st M_tc
        for r in 0..n {
            for c in 0..n {
                let mut v = BigInt::zero();
                for s in 0..n {
                    for t in 0..n {
                        let jst = j(s, t);
                        if jst != 0 {
                            v += &m[s][r] * &m[t][c] * jst;
                        }
                    }
                }
                if v != BigInt::from(j(r, c)) {
                    return Err(Error::invalid("M is not symplectic"));
                }
            }
        }
        Ok(SymplecticMatrix { m })
    }

    pub fn entries(&self) -> &IntMatrix {
        &self.m
    }

    pub fn g(&self) -> usize {
        self.m.len() / 2
    }

    /// `(aΩ + b)(cΩ + d)⁻¹` for the `g×g` blocks `a, b, c, d`.
    fn act<T: Float>(&self, omega: &CMatrix<T>) -> Result<CMatrix<T>> {
        let g = self.g();
        let block = |r0: usize, c0: usize| -> CMatrix<T> {
            (0..g)
                .map(|i| {
                    (0..g)
                        .map(|j| Complex::new(to_float::<T>(&self.m[r0 + i][c0 + j]), T::zero()))
                        .collect()
                })
                .collect()
        };
        let num = mat_add(&mat_mul(&block(0, 0), omega), &block(0, g));
        let den = mat_add(&mat_mul(&block(g, 0), omega), &block(g, g));
        Ok(mat_mul(&num, &mat_inv(&den)?))
    }
}

fn to_float<T: Float>(x: &BigInt) -> T {
    T::from(x.to_f64().unwrap_or(f64::INFINITY)).expect("float conversion")
}

fn mat_mul<T: Float>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..b.len()).fold(Complex::zero(), |acc, k| acc + a[i][k] * b[k][j]))
                .collect()
        })
        .collect()
}

fn mat_add<T: Float>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}

/// Gauss–Jordan with partial pivoting.
fn mat_inv<T: Float>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    let n = a.len();
    let mut m: CMatrix<T> = a.to_vec();
    let mut inv: CMatrix<T> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        Complex::one()
                    } else {
                        Complex::zero()
                    }
                })
                .collect()
        })
        .collect();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| {
                m[x][c]
                    .norm_sqr()
                    .partial_cmp(&m[y][c].norm_sqr())
                    .expect("finite")
            })
            .expect("nonempty");
        if m[p][c].norm_sqr() == T::zero() {
            return Err(Error::invalid(
                "singular matrix in fractional linear action",
            ));
        }
        m.swap(p, c);
        inv.swap(p, c);
        let piv = m[c][c];
        for k in 0..n {
            m[c][k] = m[c][k] / piv;
            inv[c][k] = inv[c][k] / piv;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                for k in 0..n {
                    let (mc, ic) = (m[c][k], inv[c][k]);
                    m[r][k] = m[r][k] - f * mc;
                    inv[r][k] = inv[r][k] - f * ic;
                }
            }
        }
    }
    Ok(inv)
}

fn max_diff<T: Float>(a: &CMatrix<T>, b: &CMatrix<T>) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).norm().to_f64().unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max)
}

fn scaled<T: Float>(tau: Complex<T>, a: &SymPosDefIntMatrix) -> CMatrix<T> {
    a.entries()
        .iter()
        .map(|r| r.iter().map(|x| tau * to_float::<T>(x)).collect())
        .collect()
}

pub fn tau_embed(tau: C64, a: &SymPosDefIntMatrix) -> Result<SiegelPoint> {
    if tau.im <= 0.0 || !tau.is_finite() {
        return Err(Error::invalid(format!(
            "τ = {tau} is not in the upper half plane"
        )));
    }
    SiegelPoint::new(scaled(tau, a))
}

fn check_range(tau: C64, a: &SymPosDefIntMatrix) -> Result<()> {
    if !(tau.im >= MIN_IM_TAU) || !tau.re.is_finite() || tau.re.abs() > MAX_ENTRY as f64 {
        return Err(Error::invalid(format!(
            "τ = {tau} is outside the checked range Im τ ≥ {MIN_IM_TAU}"
        )));
    }
    if a.entries()
        .iter()
        .flatten()
        .any(|x| x.abs() > BigInt::from(MAX_ENTRY))
    {
        return Err(Error::invalid(format!(
            "A has an entry beyond ±{MAX_ENTRY}"
        )));
    }
    Ok(())
}

/// `σ = [[a, b], [c, d]] ∈ SL_2(Z)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sl2 {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl Sl2 {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        if a as i128 * d as i128 - b as i128 * c as i128 != 1 {
            return Err(Error::invalid("σ must have determinant 1"));
        }
        Ok(Sl2 { a, b, c, d })
    }

    pub fn act(&self, tau: C64) -> C64 {
        (tau * self.a as f64 + self.b as f64) / (tau * self.c as f64 + self.d as f64)
    }
}

/// `[[aI, bA], [cA⁻¹, dI]]`, defined when `cA⁻¹` is integral.
pub fn embedding_matrix(sigma: Sl2, a: &SymPosDefIntMatrix) -> Result<SymplecticMatrix> {
    let g = a.g();
    let n = a.det();
    if !BigInt::from(sigma.c).is_multiple_of(&n) {
        return Err(Error::invalid(format!(
            "σ is not in Γ_0({n}): c = {}",
            sigma.c
        )));
    }
    let adj = adjugate(a.entries());
    let mut m = vec![vec![BigInt::zero(); 2 * g]; 2 * g];
    for i in 0..g {
        m[i][i] = BigInt::from(sigma.a);
        m[g + i][g + i] = BigInt::from(sigma.d);
        for j in 0..g {
            m[i][g + j] = &a.entries()[i][j] * sigma.b;
            let num = &adj[i][j] * sigma.c;
            if !num.is_multiple_of(&n) {
                return Err(Error::invalid("cA⁻¹ is not integral"));
            }
            m[g + i][j] = num / &n;
        }
    }
    SymplecticMatrix::new(m)
}

fn adjugate(m: &IntMatrix) -> IntMatrix {
    let g = m.len();
    if g == 1 {
        return vec![vec![BigInt::one()]];
    }
    (0..g)
        .map(|i| {
            (0..g)
                .map(|j| {
                    // cofactor C_ji
                    let minor: IntMatrix = (0..g)
                        .filter(|&r| r != j)
                        .map(|r| {
                            (0..g)
                                .filter(|&c| c != i)
                                .map(|c| m[r][c].clone())
                                .collect()
                        })
                        .collect();
                    let d = determinant(&minor);
                    if (i + j) % 2 == 0 {
                        d
                    } else {
                        -d
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub check: &'static str,
    pub max_residual: f64,
    /// The same computation in single precision.
    pub residual_f32: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckReport {
    pub fn to_json(&self) -> Value {
        json!({
            "check": self.check,
            "max_residual": self.max_residual,
            "passed": self.passed,
            "precision": "f64",
            "residual_f32": self.residual_f32,
            "tolerance": self.tolerance,
        })
    }
}

fn equivariance_residual<T: Float>(
    sigma: Sl2,
    tau: Complex<T>,
    a: &SymPosDefIntMatrix,
    m: &SymplecticMatrix,
) -> Result<f64> {
    let st = (tau * T::from(sigma.a).expect("float") + T::from(sigma.b).expect("float"))
        / (tau * T::from(sigma.c).expect("float") + T::from(sigma.d).expect("float"));
    let lhs = scaled(st, a);
    let rhs = m.act(&scaled(tau, a))?;
    let scale = lhs
        .iter()
        .flatten()
        .map(|z| z.norm().to_f64().unwrap_or(0.0))
        .fold(1.0, f64::max);
    Ok(max_diff(&lhs, &rhs) / scale)
}

/// `σ(τ)A` against `M·(τA)`, with `M` checked symplectic exactly; the
/// residual is relative to the largest entry of `σ(τ)A`.
pub fn equivariance_check(
    sigma: Sl2,
    tau: C64,
    a: &SymPosDefIntMatrix,
) -> Result<(SymplecticMatrix, CheckReport)> {
    check_range(tau, a)?;
    let m = embedding_matrix(sigma, a)?;
    tau_embed(tau, a)?;
    let r64 = equivariance_residual(sigma, tau, a, &m)?;
    let r32 = equivariance_residual(sigma, Complex::new(tau.re as f32, tau.im as f32), a, &m).ok();
    Ok((
        m,
        CheckReport {
            check: "equivariance",
            max_residual: r64,
            residual_f32: r32,
            tolerance: TOLERANCE,
            passed: r64 < TOLERANCE,
        },
    ))
}

fn rational_inverse(a: &SymPosDefIntMatrix) -> RatMatrix {
    let n = a.det();
    adjugate(a.entries())
        .into_iter()
        .map(|r| {
            r.into_iter()
                .map(|x| BigRational::new(x, n.clone()))
                .collect()
        })
        .collect()
}

fn to_f64_matrix(m: &RatMatrix) -> Vec<Vec<f64>> {
    m.iter()
        .map(|r| r.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect())
        .collect()
}

/// `Im(z̄ᵗ·H·w) / Im τ` for a real symmetric `H`.
fn hermitian_form(h: &[Vec<f64>], tau: C64, z: &[C64], w: &[C64]) -> f64 {
    let g = z.len();
    let mut s = C64::zero();
    for i in 0..g {
        for j in 0..g {
            s += z[i].conj() * h[i][j] * w[j];
        }
    }
    s.im / tau.im
}

/// Evaluates `E_A(z, w) = Im(z̄ᵗAw)/Im τ` on the basis `A⁻¹e_i, τe_i` of
/// `A⁻¹Z^g + τZ^g` and `Ẽ(z, w) = Im(z̄ᵗA⁻¹w)/Im τ` on the basis
/// `e_i, τAe_i` of `Z^g + τAZ^g`. Reports the worst of: distance of either
/// form from an integer on basis pairs, and `|Ẽ(Az, Aw) − E_A(z, w)|`.
pub fn riemann_form_check(tau: C64, a: &SymPosDefIntMatrix, tol: f64) -> Result<CheckReport> {
    check_range(tau, a)?;
    tau_embed(tau, a)?;
    let g = a.g();
    let am: Vec<Vec<f64>> = a
        .entries()
        .iter()
        .map(|r| r.iter().map(|x| to_float::<f64>(x)).collect())
        .collect();
    let ainv = to_f64_matrix(&rational_inverse(a));
    let col =
        |m: &[Vec<f64>], j: usize, s: C64| -> Vec<C64> { (0..g).map(|i| s * m[i][j]).collect() };
    let ident: Vec<Vec<f64>> = (0..g)
        .map(|i| (0..g).map(|j| (i == j) as u8 as f64).collect())
        .collect();
    let one = C64::one();
    // Λ_A basis and its image under z ↦ Az
    let basis: Vec<Vec<C64>> = (0..g)
        .map(|j| col(&ainv, j, one))
        .chain((0..g).map(|j| col(&ident, j, tau)))
        .collect();
    let image: Vec<Vec<C64>> = (0..g)
        .map(|j| col(&ident, j, one))
        .chain((0..g).map(|j| col(&am, j, tau)))
        .collect();
    let mut worst: f64 = 0.0;
    for (z, az) in basis.iter().zip(&image) {
        for (w, aw) in basis.iter().zip(&image) {
            let e = hermitian_form(&am, tau, z, w);
            let et = hermitian_form(&ainv, tau, az, aw);
            worst = worst
                .max((e - e.round()).abs())
                .max((et - et.round()).abs())
                .max((e - et).abs());
        }
    }
    Ok(CheckReport {
        check: "riemann_form",
        max_residual: worst,
        residual_f32: None,
        tolerance: tol,
        passed: worst < tol,
    })
}

#[derive(Clone, Debug)]
pub struct DensityReport {
    pub matrix: RatMatrix,
    pub precision: u32,
    pub error: f64,
    pub eps: f64,
}

/// Raises the precision of [`qexp::approx_in_sl`] until `‖G − H‖_∞ < eps`.
pub fn sl_density_demo(target: &[Vec<f64>], ell: u64, eps: f64) -> Result<DensityReport> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps = {eps} is not achievable")));
    }
    let mut best = f64::INFINITY;
    for k in (0..=64).step_by(4) {
        let m = qexp::approx_in_sl(target, ell, k)?;
        let error = qexp::max_abs_diff(&m, target);
        best = best.min(error);
        if error < eps {
            return Ok(DensityReport {
                matrix: m,
                precision: k,
                error,
                eps,
            });
        }
        if (ell as f64).powi(k as i32) > 1e18 {
            break;
        }
    }
    Err(Error::SearchExhausted {
        stage: format!("SL approximation (best error {best:e})"),
        found: 0,
        wanted: 1,
        bound: 64,
    })
}

/// A random PD matrix `BᵗB + I` with small entries.
pub fn random_pd<R: Rng>(rng: &mut R, g: usize, bound: i64) -> SymPosDefIntMatrix {
    let b: Vec<Vec<i64>> = (0..g)
        .map(|_| (0..g).map(|_| rng.gen_range(-bound..=bound)).collect())
        .collect();
    let m: IntMatrix = (0..g)
        .map(|i| {
            (0..g)
                .map(|j| {
                    BigInt::from((0..g).map(|k| b[k][i] * b[k][j]).sum::<i64>() + (i == j) as i64)
                })
                .collect()
        })
        .collect();
    SymPosDefIntMatrix::new(m).expect("BᵗB + I is positive definite")
}

pub fn random_tau<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(MIN_IM_TAU..2.0))
}

/// A random element of `Γ_0(n)`.
pub fn random_gamma0<R: Rng>(rng: &mut R, n: i64) -> Sl2 {
    loop {
        let c = n * rng.gen_range(-3..=3);
        let d: i64 = rng.gen_range(-20..=20);
        if d == 0 || c.gcd(&d) != 1 {
            continue;
        }
        // a·d − b·c = 1
        let e = c.extended_gcd(&d);
        let (a, b) = (e.y * e.gcd.signum(), -e.x * e.gcd.signum());
        return Sl2::new(a, b, c, d).expect("determinant one by construction");
    }
}

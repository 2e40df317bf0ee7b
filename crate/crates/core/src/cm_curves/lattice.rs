//! Rank-2 lattices in `K`, kept in Hermite normal form over the basis `(1, ω)`.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::arith::ext_gcd;
use crate::error::{Error, Result};
use crate::quad_orders::{Discriminant, QuadInteger, QuadraticForm};

/// An element `x + y·ω` of `K`.
pub type KElem = (BigRational, BigRational);

pub(crate) fn kmul(d: Discriminant, a: &KElem, b: &KElem) -> KElem {
    let n = BigRational::from_integer(BigInt::from(d.omega_norm()));
    let delta = BigRational::from_integer(BigInt::from(d.delta()));
    let yy = &a.1 * &b.1;
    (
        &a.0 * &b.0 - &n * &yy,
        &a.0 * &b.1 + &a.1 * &b.0 + delta * yy,
    )
}

pub(crate) fn kelem(a: &QuadInteger) -> KElem {
    (
        BigRational::from_integer(a.x.clone()),
        BigRational::from_integer(a.y.clone()),
    )
}

/// `(1/den)·(Z·a + Z·(b + c·ω))` with `a, c > 0`, `0 ≤ b < a`, `den > 0`,
/// and `gcd(den, a, b, c) = 1`. The representation is unique.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Lattice {
    den: BigInt,
    a: BigInt,
    b: BigInt,
    c: BigInt,
}

impl fmt::Display for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(1/{})<{}, {} + {}ω>", self.den, self.a, self.b, self.c)
    }
}

impl Lattice {
    /// Builds the lattice from its canonical parameters, rejecting anything
    /// that is not already in normal form.
    pub fn from_parts(den: BigInt, a: BigInt, b: BigInt, c: BigInt) -> Result<Self> {
        let l =
            Lattice::from_int_gens(&den, &[(a.clone(), BigInt::zero()), (b.clone(), c.clone())])?;
        if l.parts() != [&den, &a, &b, &c] {
            return Err(Error::invalid(format!(
                "lattice parameters ({den}, {a}, {b}, {c}) are not in normal form"
            )));
        }
        Ok(l)
    }

    pub fn parts(&self) -> [&BigInt; 4] {
        [&self.den, &self.a, &self.b, &self.c]
    }

    /// Sort key used for canonical choices.
    pub fn key(&self) -> (BigInt, BigInt, BigInt, BigInt) {
        (
            self.den.clone(),
            self.a.clone(),
            self.b.clone(),
            self.c.clone(),
        )
    }

    /// `O_K = Z + Z·ω`.
    pub fn maximal_order() -> Self {
        Lattice {
            den: BigInt::one(),
            a: BigInt::one(),
            b: BigInt::zero(),
            c: BigInt::one(),
        }
    }

    /// `Z + f·O_K = Z + Z·fω`.
    pub fn order(f: &BigInt) -> Result<Self> {
        Lattice::from_int_gens(
            &BigInt::one(),
            &[(BigInt::one(), BigInt::zero()), (BigInt::zero(), f.clone())],
        )
    }

    /// Lattice spanned by `(u_i + w_i·ω)/den`.
    pub fn from_int_gens(den: &BigInt, gens: &[(BigInt, BigInt)]) -> Result<Self> {
        if !den.is_positive() {
            return Err(Error::invalid("lattice denominator must be positive"));
        }
        let mut pivot: Option<(BigInt, BigInt)> = None;
        let mut xg = BigInt::zero();
        for (u, w) in gens {
            match pivot.take() {
                None => {
                    if w.is_zero() {
                        xg = xg.gcd(u);
                    } else {
                        pivot = Some((u.clone(), w.clone()));
                    }
                }
                Some((pu, pw)) => {
                    if w.is_zero() {
                        xg = xg.gcd(u);
                        pivot = Some((pu, pw));
                    } else {
                        let (g, s, t) = ext_gcd(&pw, w);
                        let nu = &s * &pu + &t * u;
                        // combination with vanishing ω-part
                        let ku = (w / &g) * &pu - (&pw / &g) * u;
                        xg = xg.gcd(&ku);
                        pivot = Some((nu, g));
                    }
                }
            }
        }
        let (mut pu, mut pw) = pivot.ok_or_else(|| Error::invalid("degenerate lattice basis"))?;
        if xg.is_zero() {
            return Err(Error::invalid("degenerate lattice basis"));
        }
        if pw.is_negative() {
            pu = -pu;
            pw = -pw;
        }
        let a = xg.abs();
        let b = pu.mod_floor(&a);
        let g = den.gcd(&a).gcd(&b).gcd(&pw);
        Ok(Lattice {
            den: den / &g,
            a: a / &g,
            b: b / &g,
            c: pw / &g,
        })
    }

    pub fn from_gens(gens: &[KElem]) -> Result<Self> {
        let den = gens.iter().fold(BigInt::one(), |acc, (x, y)| {
            acc.lcm(x.denom()).lcm(y.denom())
        });
        let ints: Vec<(BigInt, BigInt)> = gens
            .iter()
            .map(|(x, y)| {
                (
                    (x * BigRational::from_integer(den.clone())).to_integer(),
                    (y * BigRational::from_integer(den.clone())).to_integer(),
                )
            })
            .collect();
        Lattice::from_int_gens(&den, &ints)
    }

    pub fn basis(&self) -> [KElem; 2] {
        let r = |n: &BigInt| BigRational::new(n.clone(), self.den.clone());
        [(r(&self.a), BigRational::zero()), (r(&self.b), r(&self.c))]
    }

    /// Coefficients of `v` on the basis `(a/den, (b + cω)/den)`.
    pub fn coords(&self, v: &KElem) -> (BigRational, BigRational) {
        let den = BigRational::from_integer(self.den.clone());
        let t = &v.1 * &den / BigRational::from_integer(self.c.clone());
        let s = (&v.0 * &den - &t * BigRational::from_integer(self.b.clone()))
            / BigRational::from_integer(self.a.clone());
        (s, t)
    }

    pub fn contains(&self, v: &KElem) -> bool {
        let (s, t) = self.coords(v);
        s.is_integer() && t.is_integer()
    }

    pub fn contains_lattice(&self, other: &Lattice) -> bool {
        other.basis().iter().all(|v| self.contains(v))
    }

    pub fn sum(&self, other: &Lattice) -> Lattice {
        let mut gens: Vec<KElem> = self.basis().to_vec();
        gens.extend(other.basis());
        Lattice::from_gens(&gens).expect("sum of full-rank lattices has full rank")
    }

    /// `α·L` for a nonzero `α ∈ K`.
    pub fn mul_elem(&self, alpha: &KElem, d: Discriminant) -> Result<Lattice> {
        if alpha.0.is_zero() && alpha.1.is_zero() {
            return Err(Error::invalid("cannot scale a lattice by zero"));
        }
        let gens: Vec<KElem> = self.basis().iter().map(|v| kmul(d, alpha, v)).collect();
        Lattice::from_gens(&gens)
    }

    pub fn mul_quad(&self, alpha: &QuadInteger, d: Discriminant) -> Result<Lattice> {
        self.mul_elem(&kelem(alpha), d)
    }

    pub fn scale(&self, r: &BigRational) -> Result<Lattice> {
        if r.is_zero() {
            return Err(Error::invalid("cannot scale a lattice by zero"));
        }
        let gens: Vec<KElem> = self.basis().iter().map(|(x, y)| (x * r, y * r)).collect();
        Lattice::from_gens(&gens)
    }

    /// Product `L·M`, spanned by all products of basis elements.
    pub fn product(&self, other: &Lattice, d: Discriminant) -> Lattice {
        let mut gens = Vec::with_capacity(4);
        for u in self.basis() {
            for v in other.basis() {
                gens.push(kmul(d, &u, &v));
            }
        }
        Lattice::from_gens(&gens).expect("product of full-rank lattices has full rank")
    }

    /// Integer matrix whose columns are the coordinates of `sub`'s basis in `self`'s.
    fn relative_matrix(&self, sub: &Lattice) -> Result<[[BigInt; 2]; 2]> {
        let mut m: [[BigInt; 2]; 2] = Default::default();
        for (j, v) in sub.basis().iter().enumerate() {
            let (s, t) = self.coords(v);
            if !s.is_integer() || !t.is_integer() {
                return Err(Error::invalid(format!("{sub} is not contained in {self}")));
            }
            m[0][j] = s.to_integer();
            m[1][j] = t.to_integer();
        }
        Ok(m)
    }

    /// `[self : sub]`, requiring `sub ⊆ self`.
    pub fn index_over(&self, sub: &Lattice) -> Result<BigInt> {
        let m = self.relative_matrix(sub)?;
        Ok((&m[0][0] * &m[1][1] - &m[0][1] * &m[1][0]).abs())
    }

    /// Invariant factors `(e1, e2)`, `e1 | e2`, of `self/sub`.
    pub fn elementary_divisors_over(&self, sub: &Lattice) -> Result<(BigInt, BigInt)> {
        let m = self.relative_matrix(sub)?;
        let det = (&m[0][0] * &m[1][1] - &m[0][1] * &m[1][0]).abs();
        let e1 = m[0][0].gcd(&m[0][1]).gcd(&m[1][0]).gcd(&m[1][1]);
        let e2 = &det / &e1;
        Ok((e1, e2))
    }

    /// Conductor `f` of the multiplier ring `{λ : λL ⊆ L} = Z + f·O_K`:
    /// the least `f` with `f·ω·L ⊆ L`.
    pub fn multiplier_conductor(&self, d: Discriminant) -> BigInt {
        let omega = (BigRational::zero(), BigRational::one());
        let mut f = BigInt::one();
        for v in self.basis() {
            let (s, t) = self.coords(&kmul(d, &omega, &v));
            f = f.lcm(s.denom()).lcm(t.denom());
        }
        f
    }

    /// Primitive form `N(x·w1 + y·w2)/content` for the positively oriented
    /// normal-form basis. Its discriminant is `f²·d` for the multiplier conductor `f`.
    pub fn norm_form(&self, d: Discriminant) -> QuadraticForm {
        let delta = BigInt::from(d.delta());
        let n = BigInt::from(d.omega_norm());
        let (a, b, c) = (&self.a, &self.b, &self.c);
        let fa = a * a;
        let fb = BigInt::from(2) * a * b + &delta * a * c;
        let fc = b * b + &delta * b * c + &n * c * c;
        let g = fa.gcd(&fb).gcd(&fc);
        QuadraticForm::new(fa / &g, fb / &g, fc / &g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d7() -> Discriminant {
        Discriminant::new(-7).unwrap()
    }

    fn int(n: i64) -> BigInt {
        BigInt::from(n)
    }

    #[test]
    fn normal_form_is_canonical() {
        let l1 = Lattice::from_int_gens(&int(1), &[(int(5), int(0)), (int(2), int(1))]).unwrap();
        let l2 = Lattice::from_int_gens(
            &int(1),
            &[(int(7), int(1)), (int(12), int(1)), (int(25), int(5))],
        )
        .unwrap();
        assert_eq!(l1, l2);
        let l3 = Lattice::from_int_gens(&int(3), &[(int(15), int(0)), (int(6), int(3))]).unwrap();
        assert_eq!(l1, l3);
    }

    #[test]
    fn degenerate_rejected() {
        assert!(Lattice::from_int_gens(&int(1), &[(int(1), int(2)), (int(2), int(4))]).is_err());
        assert!(Lattice::from_int_gens(&int(1), &[]).is_err());
    }

    #[test]
    fn from_parts_requires_normal_form() {
        assert!(Lattice::from_parts(int(1), int(5), int(2), int(1)).is_ok());
        assert!(Lattice::from_parts(int(1), int(5), int(7), int(1)).is_err());
        assert!(Lattice::from_parts(int(2), int(4), int(2), int(2)).is_err());
    }

    #[test]
    fn multiplier_ring_of_orders() {
        let d = d7();
        assert_eq!(Lattice::maximal_order().multiplier_conductor(d), int(1));
        for f in [2, 3, 5, 12, 65] {
            let l = Lattice::order(&int(f)).unwrap();
            assert_eq!(l.multiplier_conductor(d), int(f));
            assert_eq!(l.norm_form(d).discriminant(), int(f * f * -7));
        }
    }

    #[test]
    fn index_and_divisors() {
        let ok = Lattice::maximal_order();
        let sub = Lattice::order(&int(5)).unwrap();
        assert_eq!(ok.index_over(&sub).unwrap(), int(5));
        let five = ok.mul_quad(&QuadInteger::from_int(5), d7()).unwrap();
        assert_eq!(
            ok.elementary_divisors_over(&five).unwrap(),
            (int(5), int(5))
        );
        assert!(sub.index_over(&ok).is_err());
    }

    #[test]
    fn scaling_and_products() {
        let d = d7();
        let ok = Lattice::maximal_order();
        let w = QuadInteger::omega();
        let wl = ok.mul_quad(&w, d).unwrap();
        assert_eq!(ok.index_over(&wl).unwrap(), int(2));
        assert_eq!(ok.product(&ok, d), ok);
        let o5 = Lattice::order(&int(5)).unwrap();
        assert_eq!(o5.product(&o5, d), o5);
        let half = ok.scale(&BigRational::new(int(1), int(2))).unwrap();
        assert!(half.contains_lattice(&ok));
        assert_eq!(half.index_over(&ok).unwrap(), int(4));
    }
}

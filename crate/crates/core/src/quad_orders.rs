//! Imaginary quadratic fields, their orders, and binary quadratic forms.
//!
//! Elements of `O_K` are written `x + y·ω` where `ω = (δ + √d)/2` and
//! `δ ∈ {0, 1}` is `d mod 4`, so `ω` satisfies `ω² = δ·ω − N(ω)` with
//! `N(ω) = (δ − d)/4`. Ideal classes of the order of conductor `f` are
//! carried as reduced primitive forms of discriminant `f²·d`.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::arith::{self, ext_gcd, is_prime, is_square, is_squarefree, pow_mod};
use crate::error::{Error, Result};

/// A negative fundamental discriminant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Discriminant(i64);

impl Discriminant {
    pub fn new(d: i64) -> Result<Self> {
        if d >= 0 {
            return Err(Error::invalid(format!("discriminant {d} is not negative")));
        }
        if !is_fundamental(d) {
            return Err(Error::invalid(format!(
                "{d} is not a fundamental discriminant"
            )));
        }
        Ok(Discriminant(d))
    }

    pub fn value(self) -> i64 {
        self.0
    }

    pub fn big(self) -> BigInt {
        BigInt::from(self.0)
    }

    /// `δ = d mod 4`, the trace of `ω`.
    pub fn delta(self) -> i64 {
        self.0.rem_euclid(4)
    }

    /// `N(ω) = (δ − d)/4`.
    pub fn omega_norm(self) -> i64 {
        (self.delta() - self.0) / 4
    }

    pub fn has_extra_units(self) -> bool {
        self.0 == -3 || self.0 == -4
    }

    /// Fails for the two fields whose unit group is larger than `{±1}`.
    pub fn require_plain_units(self) -> Result<()> {
        if self.has_extra_units() {
            Err(Error::ExtraUnits(self.0))
        } else {
            Ok(())
        }
    }

    pub fn kronecker(self, p: u64) -> Result<i8> {
        kronecker_symbol(self.0, p)
    }
}

impl fmt::Display for Discriminant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn is_fundamental(d: i64) -> bool {
    if d == 0 || d == 1 {
        return false;
    }
    let r = d.rem_euclid(4);
    if r == 1 {
        is_squarefree(d.unsigned_abs())
    } else if r == 0 {
        let m = d / 4;
        let mr = m.rem_euclid(4);
        (mr == 2 || mr == 3) && is_squarefree(m.unsigned_abs())
    } else {
        false
    }
}

/// Kronecker symbol `(d | p)` for a prime `p`: `+1` split, `-1` inert, `0` ramified.
pub fn kronecker_symbol(d: i64, p: u64) -> Result<i8> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if p == 2 {
        return Ok(match d.rem_euclid(8) {
            1 | 7 => 1,
            3 | 5 => -1,
            _ => 0,
        });
    }
    let r = (d as i128).rem_euclid(p as i128) as u64;
    if r == 0 {
        return Ok(0);
    }
    Ok(if pow_mod(r, (p - 1) / 2, p) == 1 {
        1
    } else {
        -1
    })
}

/// The order `Z + f·O_K`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuadOrder {
    pub disc: Discriminant,
    pub conductor: BigInt,
}

impl QuadOrder {
    pub fn new(disc: Discriminant, conductor: BigInt) -> Result<Self> {
        if !conductor.is_positive() {
            return Err(Error::invalid("conductor must be positive"));
        }
        Ok(QuadOrder { disc, conductor })
    }

    pub fn maximal(disc: Discriminant) -> Self {
        QuadOrder {
            disc,
            conductor: BigInt::one(),
        }
    }

    /// `f²·d_K`.
    pub fn discriminant(&self) -> BigInt {
        &self.conductor * &self.conductor * self.disc.big()
    }

    pub fn is_maximal(&self) -> bool {
        self.conductor.is_one()
    }

    /// Whether `x + y·ω` lies in this order.
    pub fn contains(&self, a: &QuadInteger) -> bool {
        a.y.is_multiple_of(&self.conductor)
    }

    /// `O ⊆ other` as subrings of `O_K`.
    pub fn is_suborder_of(&self, other: &QuadOrder) -> bool {
        self.disc == other.disc && self.conductor.is_multiple_of(&other.conductor)
    }
}

/// `x + y·ω` in `O_K`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuadInteger {
    pub x: BigInt,
    pub y: BigInt,
}

impl QuadInteger {
    pub fn new(x: impl Into<BigInt>, y: impl Into<BigInt>) -> Self {
        QuadInteger {
            x: x.into(),
            y: y.into(),
        }
    }

    pub fn one() -> Self {
        QuadInteger::new(1, 0)
    }

    pub fn omega() -> Self {
        QuadInteger::new(0, 1)
    }

    pub fn from_int(n: impl Into<BigInt>) -> Self {
        QuadInteger::new(n, 0)
    }

    pub fn norm(&self, d: Discriminant) -> BigInt {
        &self.x * &self.x
            + BigInt::from(d.delta()) * &self.x * &self.y
            + BigInt::from(d.omega_norm()) * &self.y * &self.y
    }

    pub fn trace(&self, d: Discriminant) -> BigInt {
        BigInt::from(2) * &self.x + BigInt::from(d.delta()) * &self.y
    }

    /// Complex conjugate: `ω̄ = δ − ω`.
    pub fn conj(&self, d: Discriminant) -> Self {
        QuadInteger {
            x: &self.x + BigInt::from(d.delta()) * &self.y,
            y: -&self.y,
        }
    }

    pub fn mul(&self, other: &Self, d: Discriminant) -> Self {
        // (x1 + y1ω)(x2 + y2ω) with ω² = δω − n
        let yy = &self.y * &other.y;
        QuadInteger {
            x: &self.x * &other.x - BigInt::from(d.omega_norm()) * &yy,
            y: &self.x * &other.y + &self.y * &other.x + BigInt::from(d.delta()) * yy,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        QuadInteger {
            x: &self.x + &other.x,
            y: &self.y + &other.y,
        }
    }

    pub fn scale(&self, n: &BigInt) -> Self {
        QuadInteger {
            x: &self.x * n,
            y: &self.y * n,
        }
    }

    pub fn pow(&self, e: u64, d: Discriminant) -> Self {
        let mut acc = QuadInteger::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base, d);
            }
            base = base.mul(&base, d);
            e >>= 1;
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }
}

impl fmt::Display for QuadInteger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}ω", self.x, self.y)
    }
}

/// `a·X² + b·XY + c·Y²`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuadraticForm {
    pub a: BigInt,
    pub b: BigInt,
    pub c: BigInt,
}

impl PartialOrd for QuadraticForm {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QuadraticForm {
    fn cmp(&self, other: &Self) -> Ordering {
        (&self.a, &self.b, &self.c).cmp(&(&other.a, &other.b, &other.c))
    }
}

impl QuadraticForm {
    pub fn new(a: impl Into<BigInt>, b: impl Into<BigInt>, c: impl Into<BigInt>) -> Self {
        QuadraticForm {
            a: a.into(),
            b: b.into(),
            c: c.into(),
        }
    }

    pub fn discriminant(&self) -> BigInt {
        &self.b * &self.b - BigInt::from(4) * &self.a * &self.c
    }

    pub fn is_positive_definite(&self) -> bool {
        self.a.is_positive() && self.discriminant().is_negative()
    }

    pub fn is_primitive(&self) -> bool {
        self.a.gcd(&self.b).gcd(&self.c).is_one()
    }

    /// The principal form of discriminant `disc` (`disc < 0`, `disc ≡ 0, 1 mod 4`).
    pub fn principal(disc: &BigInt) -> Result<Self> {
        let k = disc.mod_floor(&BigInt::from(4));
        if !disc.is_negative() || !(k.is_zero() || k.is_one()) {
            return Err(Error::invalid(format!(
                "{disc} is not a negative discriminant"
            )));
        }
        let b = k;
        let c = (&b * &b - disc) / BigInt::from(4);
        Ok(QuadraticForm::new(1, b, c))
    }

    pub fn is_reduced(&self) -> bool {
        let ab = self.b.abs();
        if ab > self.a || self.a > self.c {
            return false;
        }
        if (ab == self.a || self.a == self.c) && self.b.is_negative() {
            return false;
        }
        true
    }

    /// Gauss reduction of a positive definite form. Idempotent and class preserving.
    pub fn reduce(&self) -> Self {
        let mut a = self.a.clone();
        let mut b = self.b.clone();
        let mut c = self.c.clone();
        let two_a = |a: &BigInt| a * BigInt::from(2);
        loop {
            // b into (-a, a]
            let r = (&a - &b).div_floor(&two_a(&a));
            if !r.is_zero() {
                let nb = &b + two_a(&a) * &r;
                c = &a * &r * &r + &b * &r + &c;
                b = nb;
            }
            if a > c {
                std::mem::swap(&mut a, &mut c);
                b = -b;
                continue;
            }
            break;
        }
        if a == c && b.is_negative() {
            b = -b;
        }
        QuadraticForm { a, b, c }
    }

    /// Class of the inverse: `(a, -b, c)`.
    pub fn inverse(&self) -> Self {
        QuadraticForm::new(self.a.clone(), -&self.b, self.c.clone()).reduce()
    }

    /// Gauss composition of primitive forms of equal discriminant, reduced.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        let disc = self.discriminant();
        if disc != other.discriminant() {
            return Err(Error::Mismatch(format!(
                "cannot compose forms of discriminants {} and {}",
                disc,
                other.discriminant()
            )));
        }
        let (f1, f2) = if self.a > other.a {
            (other, self)
        } else {
            (self, other)
        };
        let (a1, b1) = (&f1.a, &f1.b);
        let (a2, b2, c2) = (&f2.a, &f2.b, &f2.c);
        let s: BigInt = (b1 + b2) / BigInt::from(2);
        let n = b2 - &s;
        let (d, y1) = if a2.is_multiple_of(a1) {
            (a1.clone(), BigInt::zero())
        } else {
            let (g, u, _v) = ext_gcd(a2, a1);
            (g, u)
        };
        let (d1, x2, y2) = if s.is_multiple_of(&d) {
            (d.clone(), BigInt::zero(), -BigInt::one())
        } else {
            let (g, u, v) = ext_gcd(&s, &d);
            (g, u, -v)
        };
        let v1 = a1 / &d1;
        let v2 = a2 / &d1;
        let r = (&y1 * &y2 * &n - &x2 * c2).mod_floor(&v1);
        let b3 = b2 + BigInt::from(2) * &v2 * &r;
        let a3 = &v1 * &v2;
        let num = &b3 * &b3 - &disc;
        let den = BigInt::from(4) * &a3;
        if !num.is_multiple_of(&den) {
            return Err(Error::integrity("composition produced a non-integral form"));
        }
        let c3 = num / den;
        Ok(QuadraticForm::new(a3, b3, c3).reduce())
    }

    pub fn pow(&self, e: u64) -> Result<Self> {
        let mut acc = QuadraticForm::principal(&self.discriminant())?;
        let mut base = self.reduce();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.compose(&base)?;
            }
            base = base.compose(&base)?;
            e >>= 1;
        }
        Ok(acc)
    }
}

impl fmt::Display for QuadraticForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.a, self.b, self.c)
    }
}

/// A proper ideal class of an order, as its reduced form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IdealClass {
    pub form: QuadraticForm,
    pub order: QuadOrder,
}

impl IdealClass {
    pub fn new(form: QuadraticForm, order: QuadOrder) -> Result<Self> {
        if form.discriminant() != order.discriminant() {
            return Err(Error::Mismatch(format!(
                "form {} has discriminant {}, order has {}",
                form,
                form.discriminant(),
                order.discriminant()
            )));
        }
        if !form.is_primitive() || !form.is_positive_definite() {
            return Err(Error::invalid(format!(
                "form {form} is not primitive positive definite"
            )));
        }
        Ok(IdealClass {
            form: form.reduce(),
            order,
        })
    }

    pub fn principal(order: &QuadOrder) -> Self {
        let form = QuadraticForm::principal(&order.discriminant()).expect("negative discriminant");
        IdealClass {
            form,
            order: order.clone(),
        }
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.order != other.order {
            return Err(Error::Mismatch("ideal classes of different orders".into()));
        }
        Ok(IdealClass {
            form: self.form.compose(&other.form)?,
            order: self.order.clone(),
        })
    }

    pub fn inverse(&self) -> Self {
        IdealClass {
            form: self.form.inverse(),
            order: self.order.clone(),
        }
    }

    pub fn is_principal(&self) -> bool {
        self.form.a.is_one()
    }
}

/// All reduced primitive forms of discriminant `f²·d`, in increasing `(a, b, c)` order.
pub fn class_group(order: &QuadOrder) -> Vec<IdealClass> {
    let disc = order.discriminant();
    let abs = disc.abs();
    let amax = arith::isqrt(&(&abs / BigInt::from(3)));
    let mut out = Vec::new();
    let mut a = BigInt::one();
    while a <= amax {
        let mut b = -&a + BigInt::one();
        while b <= a {
            let num = &b * &b - &disc;
            let den = BigInt::from(4) * &a;
            if num.is_multiple_of(&den) {
                let c = num / den;
                let f = QuadraticForm::new(a.clone(), b.clone(), c);
                if f.is_reduced() && f.is_primitive() {
                    out.push(IdealClass {
                        form: f,
                        order: order.clone(),
                    });
                }
            }
            b += 1;
        }
        a += 1;
    }
    out.sort_by(|x, y| x.form.cmp(&y.form));
    out
}

/// `h(O) = f·h(O_K)·∏_{p|f}(1 − (d_K|p)/p) / [O_K^× : O^×]`.
pub fn class_number_formula(order: &QuadOrder) -> BigInt {
    let hk = BigInt::from(class_group(&QuadOrder::maximal(order.disc)).len());
    let f = &order.conductor;
    let mut num = f * hk;
    for p in arith::prime_factors(f) {
        let pu = u64::try_from(&p).expect("prime factor fits in u64");
        let k = kronecker_symbol(order.disc.value(), pu).expect("prime");
        num = num / &p * (&p - BigInt::from(k));
    }
    if !order.is_maximal() {
        let units = match order.disc.value() {
            -3 => 3,
            -4 => 2,
            _ => 1,
        };
        num /= BigInt::from(units);
    }
    num
}

/// Search parameters for [`find_field`].
#[derive(Clone, Copy, Debug, Default)]
pub struct FieldQuery {
    pub split: Option<u64>,
    pub inert: Option<u64>,
}

/// Smallest `|d_K|` with units `{±1}`, `split` split and `inert` inert.
pub fn find_field(query: FieldQuery, search_bound: u64) -> Result<Discriminant> {
    if let (Some(p), Some(l)) = (query.split, query.inert) {
        if p == l {
            return Err(Error::invalid(format!(
                "split prime and inert prime must differ (both {p})"
            )));
        }
    }
    for p in [query.split, query.inert].into_iter().flatten() {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
    }
    for m in 3..=search_bound as i64 {
        let d = -m;
        if !is_fundamental(d) || d == -3 || d == -4 {
            continue;
        }
        let split_ok = match query.split {
            Some(p) => kronecker_symbol(d, p)? == 1,
            None => true,
        };
        let inert_ok = match query.inert {
            Some(l) => kronecker_symbol(d, l)? == -1,
            None => true,
        };
        if split_ok && inert_ok {
            return Discriminant::new(d);
        }
    }
    Err(Error::SearchExhausted {
        stage: "find_field".into(),
        found: 0,
        wanted: 1,
        bound: search_bound,
    })
}

/// Canonical element of norm `n`: least `y > 0`, then least `|x|`, then `x ≥ 0`.
pub fn element_of_norm(d: Discriminant, n: &BigInt) -> Option<QuadInteger> {
    let delta = BigInt::from(d.delta());
    let w = BigInt::from(d.omega_norm());
    // 4N = (2x + δy)² + |d|y², so |d|·y² ≤ 4n
    let ymax = arith::isqrt(&(BigInt::from(4) * n / d.big().abs()));
    let mut y = BigInt::one();
    while y <= ymax {
        // x² + δy·x + (w·y² − n) = 0
        let disc = &delta * &delta * &y * &y - BigInt::from(4) * (&w * &y * &y - n);
        if is_square(&disc) {
            let r = disc.sqrt();
            let mut sols = Vec::new();
            for s in [&r, &(-&r)] {
                let num = -&delta * &y + s;
                if num.is_even() {
                    sols.push(num / BigInt::from(2));
                }
            }
            sols.sort_by(|a, b| a.abs().cmp(&b.abs()).then(b.cmp(a)));
            if let Some(x) = sols.into_iter().next() {
                return Some(QuadInteger { x, y });
            }
        }
        y += 1;
    }
    None
}

/// Least prime `ℓ ≤ bound` (not excluded) splitting as `ℓ = α·ᾱ` with `α ∈ O_K`.
pub fn find_split_principal(
    d: Discriminant,
    bound: u64,
    exclude: &[u64],
) -> Result<(u64, QuadInteger)> {
    d.require_plain_units()?;
    for ell in arith::primes_up_to(bound) {
        if exclude.contains(&ell) || kronecker_symbol(d.value(), ell)? != 1 {
            continue;
        }
        if let Some(alpha) = element_of_norm(d, &BigInt::from(ell)) {
            return Ok((ell, alpha));
        }
    }
    Err(Error::SearchExhausted {
        stage: "find_split_principal".into(),
        found: 0,
        wanted: 1,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d7() -> Discriminant {
        Discriminant::new(-7).unwrap()
    }

    #[test]
    fn kronecker_examples() {
        assert_eq!(kronecker_symbol(-7, 2).unwrap(), 1);
        assert_eq!(kronecker_symbol(-7, 7).unwrap(), 0);
        assert_eq!(kronecker_symbol(-7, 5).unwrap(), -1);
        assert_eq!(kronecker_symbol(-7, 9), Err(Error::NotPrime(9)));
    }

    #[test]
    fn kronecker_matches_root_search() {
        for d in [-7i64, -8, -11, -15, -20, -23, -84] {
            for p in arith::primes_up_to(100).filter(|&p| p > 2) {
                let has_root =
                    (0..p).any(|x| (x as i128 * x as i128 - d as i128).rem_euclid(p as i128) == 0);
                let k = kronecker_symbol(d, p).unwrap();
                assert_eq!(k == -1, !has_root, "d={d} p={p}");
            }
        }
    }

    #[test]
    fn fundamental_discriminants() {
        for d in [-3, -4, -7, -8, -11, -15, -19, -20, -24, -84] {
            assert!(Discriminant::new(d).is_ok(), "{d}");
        }
        for d in [-1, -2, -12, -16, -28, -9, 5] {
            assert!(Discriminant::new(d).is_err(), "{d}");
        }
    }

    #[test]
    fn norms_and_conjugates() {
        let d = d7();
        assert_eq!(QuadInteger::omega().norm(d), BigInt::from(2));
        let a = QuadInteger::new(3, -2);
        let b = QuadInteger::new(-1, 5);
        assert_eq!(a.mul(&b, d).norm(d), a.norm(d) * b.norm(d));
        assert_eq!(a.conj(d).conj(d), a);
        let n = a.mul(&a.conj(d), d);
        assert_eq!(n, QuadInteger::from_int(a.norm(d)));
    }

    #[test]
    fn class_group_sizes() {
        let d = d7();
        assert_eq!(class_group(&QuadOrder::maximal(d)).len(), 1);
        let o5 = QuadOrder::new(d, BigInt::from(5)).unwrap();
        assert_eq!(class_group(&o5).len(), 6);
        assert_eq!(class_number_formula(&o5), BigInt::from(6));
        let d23 = Discriminant::new(-23).unwrap();
        assert_eq!(class_group(&QuadOrder::maximal(d23)).len(), 3);
    }

    #[test]
    fn class_number_formula_for_prime_conductors() {
        for dv in [-7i64, -8, -11, -15, -19, -20, -23, -24] {
            let d = Discriminant::new(dv).unwrap();
            for f in [2u64, 3, 5, 7, 11, 13] {
                let o = QuadOrder::new(d, BigInt::from(f)).unwrap();
                assert_eq!(
                    BigInt::from(class_group(&o).len()),
                    class_number_formula(&o),
                    "d={dv} f={f}"
                );
            }
        }
    }

    #[test]
    fn composition_group_laws() {
        let d = d7();
        for f in [5u64, 13, 15] {
            let o = QuadOrder::new(d, BigInt::from(f)).unwrap();
            let cls = class_group(&o);
            let e = IdealClass::principal(&o);
            for x in &cls {
                assert_eq!(x.compose(&e).unwrap(), *x);
                assert!(x.compose(&x.inverse()).unwrap().is_principal());
                for y in &cls {
                    let xy = x.compose(y).unwrap();
                    assert_eq!(xy, y.compose(x).unwrap());
                    assert!(xy.form.is_reduced());
                    for z in &cls {
                        let l = xy.compose(z).unwrap();
                        let r = x.compose(&y.compose(z).unwrap()).unwrap();
                        assert_eq!(l, r);
                    }
                }
            }
        }
    }

    #[test]
    fn principal_composed_with_principal() {
        let o = QuadOrder::maximal(d7());
        let e = IdealClass::principal(&o);
        assert!(e.compose(&e).unwrap().is_principal());
    }

    #[test]
    fn compose_rejects_mismatched_discriminants() {
        let f = QuadraticForm::new(1, 1, 2);
        let g = QuadraticForm::new(1, 0, 2);
        assert!(matches!(f.compose(&g), Err(Error::Mismatch(_))));
    }

    #[test]
    fn reduce_is_idempotent() {
        let f = QuadraticForm::new(11, 49, 55);
        let r = f.reduce();
        assert!(r.is_reduced());
        assert_eq!(r.reduce(), r);
        assert_eq!(r.discriminant(), f.discriminant());
    }

    #[test]
    fn field_search() {
        let q = |split, inert| FieldQuery { split, inert };
        assert_eq!(find_field(q(None, Some(5)), 100).unwrap().value(), -7);
        assert_eq!(find_field(q(Some(2), Some(5)), 100).unwrap().value(), -7);
        assert!(matches!(
            find_field(q(Some(5), Some(5)), 100),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            find_field(q(Some(2), Some(5)), 5),
            Err(Error::SearchExhausted { .. })
        ));
        let d = find_field(q(Some(3), Some(7)), 1000).unwrap();
        assert_eq!(kronecker_symbol(d.value(), 3).unwrap(), 1);
        assert_eq!(kronecker_symbol(d.value(), 7).unwrap(), -1);
    }

    #[test]
    fn split_principal_search() {
        let d = d7();
        let (ell, alpha) = find_split_principal(d, 100, &[]).unwrap();
        assert_eq!(ell, 2);
        assert_eq!(alpha, QuadInteger::omega());
        assert!(find_split_principal(d, 1, &[]).is_err());
        let (ell, alpha) = find_split_principal(d, 100, &[2]).unwrap();
        assert_eq!(ell, 11);
        assert_eq!(alpha.norm(d), BigInt::from(11));
        // 1 + 2ω = 2 + √-7
        assert_eq!(alpha, QuadInteger::new(1, 2));
        let d4 = Discriminant::new(-4).unwrap();
        assert_eq!(
            find_split_principal(d4, 100, &[]),
            Err(Error::ExtraUnits(-4))
        );
    }
}

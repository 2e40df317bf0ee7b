//! The group `(O_K/qO_K)^× / (Z/qZ)^×` for `q` inert in `K`.
//!
//! `O_K/qO_K` is the field with `q²` elements, realized as pairs `(x, y)`
//! standing for `x + y·ω` modulo `q`. Classes modulo `F_q^×` are stored
//! with the normalization `y = 1` when `y ≠ 0`, and `x = 1` otherwise.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;

use crate::arith::{self, is_prime, mod_inv, residue};
use crate::error::{Error, Result};
use crate::quad_orders::{kronecker_symbol, Discriminant, QuadInteger};

/// An element of `F_{q²} = O_K/qO_K`, unnormalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Fq2 {
    pub x: u64,
    pub y: u64,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Fq2Ctx {
    q: u64,
    delta: u64,
    omega_norm: u64,
}

impl Fq2Ctx {
    pub fn new(disc: Discriminant, q: u64) -> Self {
        Fq2Ctx {
            q,
            delta: (disc.delta() as u64) % q,
            omega_norm: disc.omega_norm().rem_euclid(q as i64) as u64,
        }
    }

    fn m(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.q as u128) as u64
    }

    fn add(&self, a: u64, b: u64) -> u64 {
        ((a as u128 + b as u128) % self.q as u128) as u64
    }

    fn sub(&self, a: u64, b: u64) -> u64 {
        self.add(a, self.q - b % self.q)
    }

    pub fn mul(&self, a: Fq2, b: Fq2) -> Fq2 {
        let yy = self.m(a.y, b.y);
        Fq2 {
            x: self.sub(self.m(a.x, b.x), self.m(self.omega_norm, yy)),
            y: self.add(
                self.add(self.m(a.x, b.y), self.m(a.y, b.x)),
                self.m(self.delta, yy),
            ),
        }
    }

    pub fn pow(&self, a: Fq2, mut e: u64) -> Fq2 {
        let mut acc = Fq2 {
            x: 1 % self.q,
            y: 0,
        };
        let mut base = a;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub fn conj(&self, a: Fq2) -> Fq2 {
        Fq2 {
            x: self.add(a.x, self.m(self.delta, a.y)),
            y: (self.q - a.y % self.q) % self.q,
        }
    }
}

/// `G̃_q` for a prime `q` inert in `K = Q(√d)`; cyclic of order `q + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TorsorGroup {
    disc: Discriminant,
    q: u64,
}

/// A class in `G̃_q`, stored by its normalized representative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TorsorElement {
    pub disc: i64,
    pub q: u64,
    pub x: u64,
    pub y: u64,
}

impl PartialOrd for TorsorElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Canonical order: by group, then `(y, x)`, so the identity `(1, 0)` comes first.
impl Ord for TorsorElement {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.disc, self.q, self.y, self.x).cmp(&(other.disc, other.q, other.y, other.x))
    }
}

impl fmt::Display for TorsorElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} + {}ω mod {}]", self.x, self.y, self.q)
    }
}

impl TorsorGroup {
    pub fn new(disc: Discriminant, q: u64) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        if kronecker_symbol(disc.value(), q)? != -1 {
            return Err(Error::invalid(format!("{q} is not inert in Q(√{disc})")));
        }
        Ok(TorsorGroup { disc, q })
    }

    pub fn disc(&self) -> Discriminant {
        self.disc
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn order(&self) -> u64 {
        self.q + 1
    }

    pub(crate) fn ctx(&self) -> Fq2Ctx {
        Fq2Ctx::new(self.disc, self.q)
    }

    pub fn identity(&self) -> TorsorElement {
        self.element(1, 0).expect("identity is nonzero")
    }

    /// Normalizes `x + y·ω` modulo `F_q^×`.
    pub fn element(&self, x: u64, y: u64) -> Result<TorsorElement> {
        let (x, y) = (x % self.q, y % self.q);
        if x == 0 && y == 0 {
            return Err(Error::invalid("zero is not a unit"));
        }
        let (nx, ny) = if y != 0 {
            let inv = mod_inv(y, self.q).expect("q prime");
            (((x as u128 * inv as u128) % self.q as u128) as u64, 1)
        } else {
            (1, 0)
        };
        Ok(TorsorElement {
            disc: self.disc.value(),
            q: self.q,
            x: nx,
            y: ny,
        })
    }

    pub(crate) fn from_fq2(&self, a: Fq2) -> Result<TorsorElement> {
        self.element(a.x, a.y)
    }

    pub(crate) fn to_fq2(&self, t: &TorsorElement) -> Fq2 {
        Fq2 { x: t.x, y: t.y }
    }

    fn check(&self, t: &TorsorElement) -> Result<()> {
        if t.q != self.q || t.disc != self.disc.value() {
            return Err(Error::Mismatch(format!(
                "element of G̃_{} (d={}) used in G̃_{} (d={})",
                t.q, t.disc, self.q, self.disc
            )));
        }
        Ok(())
    }

    /// Image of `α` in `G̃_q`; `α` must be prime to `q`.
    pub fn embed(&self, alpha: &QuadInteger) -> Result<TorsorElement> {
        let n = alpha.norm(self.disc);
        if n.is_multiple_of(&BigInt::from(self.q)) {
            return Err(Error::invalid(format!(
                "{alpha} is not prime to {}",
                self.q
            )));
        }
        self.element(residue(&alpha.x, self.q), residue(&alpha.y, self.q))
    }

    pub fn mul(&self, a: &TorsorElement, b: &TorsorElement) -> Result<TorsorElement> {
        self.check(a)?;
        self.check(b)?;
        let c = self.ctx();
        self.from_fq2(c.mul(self.to_fq2(a), self.to_fq2(b)))
    }

    /// The inverse class is the class of the conjugate, since `a·ā ∈ F_q^×`.
    pub fn inv(&self, a: &TorsorElement) -> Result<TorsorElement> {
        self.check(a)?;
        self.from_fq2(self.ctx().conj(self.to_fq2(a)))
    }

    pub fn pow(&self, a: &TorsorElement, e: i64) -> Result<TorsorElement> {
        self.check(a)?;
        let base = if e < 0 { self.inv(a)? } else { *a };
        self.from_fq2(self.ctx().pow(self.to_fq2(&base), e.unsigned_abs()))
    }

    /// All `q + 1` elements in canonical order.
    pub fn elements(&self) -> Vec<TorsorElement> {
        let mut out = Vec::with_capacity(self.order() as usize);
        out.push(self.identity());
        for x in 0..self.q {
            out.push(self.element(x, 1).expect("nonzero"));
        }
        out
    }

    /// A lift of `t` to `O_K` with coordinates in `[0, q)`.
    pub fn lift(&self, t: &TorsorElement) -> QuadInteger {
        QuadInteger::new(t.x, t.y)
    }

    /// All `β` with `β^g = t`, sorted canonically.
    pub fn gth_roots(&self, t: &TorsorElement, g: u64) -> Result<Vec<TorsorElement>> {
        self.check(t)?;
        if g == 0 {
            return Err(Error::invalid("g must be at least 1"));
        }
        if g == 1 {
            return Ok(vec![*t]);
        }
        let c = self.ctx();
        let mut out: Vec<TorsorElement> = self
            .elements()
            .into_iter()
            .filter(|b| self.from_fq2(c.pow(self.to_fq2(b), g)).ok() == Some(*t))
            .collect();
        out.sort();
        Ok(out)
    }

    /// Whether the residue of `α` is a `g`-th power in `(O_K/qO_K)^×` itself.
    pub fn is_gth_power_of_units(&self, alpha: &QuadInteger, g: u64) -> Result<bool> {
        self.embed(alpha)?;
        let c = self.ctx();
        let a = Fq2 {
            x: residue(&alpha.x, self.q),
            y: residue(&alpha.y, self.q),
        };
        let order = (self.q as u128) * (self.q as u128) - 1;
        let k = num_integer::gcd(order, g as u128);
        let e = u64::try_from(order / k).map_err(|_| Error::invalid("q too large"))?;
        let r = c.pow(a, e);
        Ok(r == Fq2 {
            x: 1 % self.q,
            y: 0,
        })
    }
}

/// The first `count` primes `q ≤ bound` with `q` inert, `q ≡ −1 (mod g)`, and
/// `α` a `g`-th power in `(O_K/qO_K)^×`, in increasing order.
pub fn find_q(
    d: Discriminant,
    g: u64,
    alpha: &QuadInteger,
    count: usize,
    bound: u64,
) -> Result<Vec<u64>> {
    if g == 0 {
        return Err(Error::invalid("g must be at least 1"));
    }
    let ell = alpha.norm(d);
    let ell_u = u64::try_from(&ell).map_err(|_| Error::invalid("norm of α too large"))?;
    if !is_prime(ell_u) || kronecker_symbol(d.value(), ell_u)? != 1 {
        return Err(Error::invalid(format!(
            "N(α) = {ell} is not a prime split in Q(√{d})"
        )));
    }
    let mut found = Vec::new();
    if count == 0 {
        return Ok(found);
    }
    for q in arith::primes_up_to(bound) {
        if kronecker_symbol(d.value(), q)? != -1 || (q + 1) % g != 0 {
            continue;
        }
        let grp = TorsorGroup::new(d, q)?;
        if grp.is_gth_power_of_units(alpha, g)? {
            found.push(q);
            if found.len() == count {
                return Ok(found);
            }
        }
    }
    Err(Error::SearchExhausted {
        stage: "find_q".into(),
        found: found.len(),
        wanted: count,
        bound,
    })
}

//! CM elliptic curves in the lattice model.
//!
//! A curve is `C/L` for a lattice `L ⊂ K`. A finite subgroup is `W/L` for a
//! superlattice `W ⊇ L`, and the quotient by it is `C/W`. Endomorphism rings
//! are multiplier rings, and weak isomorphism of curves is homothety of
//! lattices, detected by the pair (multiplier ring, reduced form).

pub mod lattice;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use lattice::{KElem, Lattice};

use crate::arith::{is_prime, mod_inv, residue};
use crate::error::{Error, Result};
use crate::quad_orders::{kronecker_symbol, Discriminant, IdealClass, QuadInteger, QuadOrder};
use crate::torsor::{TorsorElement, TorsorGroup};

/// One isogeny step in a curve's history: its degree and, for torsor-marked
/// steps, the coordinates of the kernel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuotientStep {
    pub degree: BigInt,
    pub coords: Vec<TorsorElement>,
}

#[derive(Clone, Debug)]
pub struct CMCurve {
    pub disc: Discriminant,
    pub lattice: Lattice,
    pub order: QuadOrder,
    pub class: IdealClass,
    pub provenance: Vec<QuotientStep>,
}

impl CMCurve {
    pub fn from_lattice(disc: Discriminant, lattice: Lattice) -> Result<Self> {
        let order = multiplier_ring(&lattice, disc);
        let form = lattice.norm_form(disc);
        if form.discriminant() != order.discriminant() {
            return Err(Error::integrity(format!(
                "lattice {lattice} gives a form of discriminant {} but has conductor {}",
                form.discriminant(),
                order.conductor
            )));
        }
        let class = IdealClass::new(form, order.clone())?;
        Ok(CMCurve {
            disc,
            lattice,
            order,
            class,
            provenance: Vec::new(),
        })
    }

    /// `C/O_K`.
    pub fn base(disc: Discriminant) -> Self {
        CMCurve::from_lattice(disc, Lattice::maximal_order()).expect("O_K is a proper O_K-ideal")
    }

    pub fn conductor(&self) -> &BigInt {
        &self.order.conductor
    }

    /// Same field and literally the same lattice (not merely homothetic).
    pub fn same_lattice(&self, other: &CMCurve) -> bool {
        self.disc == other.disc && self.lattice == other.lattice
    }

    fn with_step(mut self, parent: &CMCurve, step: QuotientStep) -> Self {
        self.provenance = parent.provenance.clone();
        self.provenance.push(step);
        self
    }
}

pub fn multiplier_ring(lattice: &Lattice, disc: Discriminant) -> QuadOrder {
    QuadOrder::new(disc, lattice.multiplier_conductor(disc)).expect("conductor is positive")
}

/// Weak isomorphism of curves: same multiplier ring and same proper class.
pub fn weak_iso_curves(e1: &CMCurve, e2: &CMCurve) -> bool {
    e1.disc == e2.disc && e1.order == e2.order && e1.class == e2.class
}

// ---------------------------------------------------------------------------
// lines in L/qL

fn lines(q: u64) -> impl Iterator<Item = (u64, u64)> {
    std::iter::once((1, 0)).chain((0..q).map(|s| (s, 1)))
}

fn normalize_line(s: u64, t: u64, q: u64) -> Option<(u64, u64)> {
    let (s, t) = (s % q, t % q);
    if t != 0 {
        let inv = mod_inv(t, q)?;
        Some((((s as u128 * inv as u128) % q as u128) as u64, 1))
    } else if s != 0 {
        Some((1, 0))
    } else {
        None
    }
}

/// `L + (1/q)(s·w1 + t·w2)`.
fn line_superlattice(l: &Lattice, q: u64, line: (u64, u64)) -> Lattice {
    let [w1, w2] = l.basis();
    let qq = BigRational::from_integer(BigInt::from(q));
    let s = BigRational::from_integer(BigInt::from(line.0));
    let t = BigRational::from_integer(BigInt::from(line.1));
    let v = (
        (&s * &w1.0 + &t * &w2.0) / &qq,
        (&s * &w1.1 + &t * &w2.1) / &qq,
    );
    Lattice::from_gens(&[w1, w2, v]).expect("contains a full-rank lattice")
}

/// The line `qW/qL ⊂ L/qL` of an index-`q` superlattice `W`.
fn line_of(l: &Lattice, q: u64, w: &Lattice) -> Result<(u64, u64)> {
    let qq = BigRational::from_integer(BigInt::from(q));
    for v in w.basis() {
        let (s, t) = l.coords(&(&v.0 * &qq, &v.1 * &qq));
        if !s.is_integer() || !t.is_integer() {
            return Err(Error::integrity(format!("{w} is not inside (1/{q})·{l}")));
        }
        if let Some(line) =
            normalize_line(residue(&s.to_integer(), q), residue(&t.to_integer(), q), q)
        {
            return Ok(line);
        }
    }
    Err(Error::integrity(format!(
        "{w} does not define a line mod {q}"
    )))
}

/// Columns are the coordinates of `μ·w_j` in the basis of `L`, reduced mod `q`.
fn action_matrix(l: &Lattice, mu: &QuadInteger, d: Discriminant, q: u64) -> Result<[[u64; 2]; 2]> {
    let mu = lattice::kelem(mu);
    let mut m = [[0u64; 2]; 2];
    for (j, w) in l.basis().iter().enumerate() {
        let (s, t) = l.coords(&lattice::kmul(d, &mu, w));
        if !s.is_integer() || !t.is_integer() {
            return Err(Error::invalid("endomorphism does not preserve the lattice"));
        }
        m[0][j] = residue(&s.to_integer(), q);
        m[1][j] = residue(&t.to_integer(), q);
    }
    Ok(m)
}

fn mulm(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

/// Torsor coordinates for order-`q` subgroups of one curve: the canonical
/// basepoint line and the `F_{q²}`-structure on `L/qL`.
struct Frame {
    group: TorsorGroup,
    q: u64,
    base: (u64, u64),
    /// action of `μ = f·ω`, a generator of `End(E)` over `Z`
    mu: [[u64; 2]; 2],
    f_mod: u64,
}

impl Frame {
    fn new(curve: &CMCurve, q: u64) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        if kronecker_symbol(curve.disc.value(), q)? != -1 {
            return Err(Error::invalid(format!(
                "{q} is not inert in Q(√{})",
                curve.disc
            )));
        }
        let f = curve.conductor();
        if f.is_multiple_of(&BigInt::from(q)) {
            return Err(Error::invalid(format!("{q} divides the conductor {f}")));
        }
        let group = TorsorGroup::new(curve.disc, q)?;
        let l = &curve.lattice;
        let base = lines(q)
            .min_by_key(|&line| line_superlattice(l, q, line).key())
            .expect("q + 1 lines");
        let mu = action_matrix(l, &QuadInteger::new(0, f.clone()), curve.disc, q)?;
        Ok(Frame {
            group,
            q,
            base,
            mu,
            f_mod: residue(f, q),
        })
    }

    fn apply(&self, v: (u64, u64)) -> (u64, u64) {
        let q = self.q;
        (
            (mulm(self.mu[0][0], v.0, q) + mulm(self.mu[0][1], v.1, q)) % q,
            (mulm(self.mu[1][0], v.0, q) + mulm(self.mu[1][1], v.1, q)) % q,
        )
    }

    /// The unique `t ∈ G̃_q` with `t·base = line`.
    fn coordinate(&self, line: (u64, u64)) -> Result<TorsorElement> {
        let q = self.q;
        let v0 = self.base;
        let v1 = self.apply(v0);
        let det = (mulm(v0.0, v1.1, q) + q - mulm(v0.1, v1.0, q)) % q;
        let inv = mod_inv(det, q)
            .ok_or_else(|| Error::integrity("basepoint does not span L/qL over F_{q²}"))?;
        // (x, y) = [v0 | v1]^{-1} · line
        let x = mulm(
            inv,
            (mulm(v1.1, line.0, q) + q - mulm(v1.0, line.1, q)) % q,
            q,
        );
        let y = mulm(
            inv,
            (mulm(v0.0, line.1, q) + q - mulm(v0.1, line.0, q)) % q,
            q,
        );
        self.group.element(x, mulm(y, self.f_mod, q))
    }

    fn line_for(&self, t: &TorsorElement) -> Result<(u64, u64)> {
        let q = self.q;
        let finv = mod_inv(self.f_mod, q).expect("q does not divide f");
        let (x, y) = (t.x, mulm(t.y, finv, q));
        let v0 = self.base;
        let v1 = self.apply(v0);
        let s = (mulm(x, v0.0, q) + mulm(y, v1.0, q)) % q;
        let u = (mulm(x, v0.1, q) + mulm(y, v1.1, q)) % q;
        normalize_line(s, u, q).ok_or_else(|| Error::integrity("torsor element maps to zero"))
    }
}

/// A subgroup of squarefree order prime to the conductor, each prime inert,
/// carried both as torsor coordinates (one per prime, sorted by prime) and
/// as a superlattice witness.
#[derive(Clone, Debug)]
pub struct MarkedSubgroup {
    pub parent: CMCurve,
    pub modulus: BigInt,
    pub coords: Vec<TorsorElement>,
    pub witness: Lattice,
}

impl MarkedSubgroup {
    pub fn trivial(parent: &CMCurve) -> Self {
        MarkedSubgroup {
            parent: parent.clone(),
            modulus: BigInt::one(),
            coords: Vec::new(),
            witness: parent.lattice.clone(),
        }
    }

    pub fn primes(&self) -> Vec<u64> {
        self.coords.iter().map(|t| t.q).collect()
    }

    /// Witness of the order-`q` part: `L + (m/q)·W`.
    pub fn component_witness(&self, q: u64) -> Result<Lattice> {
        let qb = BigInt::from(q);
        if !self.modulus.is_multiple_of(&qb) {
            return Err(Error::invalid(format!(
                "{q} does not divide {}",
                self.modulus
            )));
        }
        let k = BigRational::from_integer(&self.modulus / qb);
        Ok(self.parent.lattice.sum(&self.witness.scale(&k)?))
    }

    /// Recomputes the coordinates from the witness and checks they agree.
    pub fn verify(&self) -> Result<()> {
        let mut prev = 0u64;
        let mut m = BigInt::one();
        for t in &self.coords {
            if t.q <= prev {
                return Err(Error::integrity(
                    "torsor coordinates must have increasing primes",
                ));
            }
            prev = t.q;
            m *= t.q;
        }
        if m != self.modulus {
            return Err(Error::integrity(format!(
                "modulus {} disagrees with coordinate primes (product {m})",
                self.modulus
            )));
        }
        let index = self.witness.index_over(&self.parent.lattice).map_err(|_| {
            Error::integrity(format!(
                "witness {} does not contain the parent lattice",
                self.witness
            ))
        })?;
        if index != self.modulus {
            return Err(Error::integrity(format!(
                "witness has index {index}, expected {}",
                self.modulus
            )));
        }
        for t in &self.coords {
            let frame = Frame::new(&self.parent, t.q)?;
            let line = line_of(&self.parent.lattice, t.q, &self.component_witness(t.q)?)?;
            let c = frame.coordinate(line)?;
            if c != *t {
                return Err(Error::integrity(format!(
                    "witness has coordinate {c} mod {}, record says {t}",
                    t.q
                )));
            }
        }
        Ok(())
    }

    pub fn as_cyclic(&self) -> Result<CyclicSubgroup> {
        CyclicSubgroup::new(&self.parent, self.witness.clone())
    }
}

/// All `q + 1` subgroups of order `q`, in canonical coordinate order.
pub fn subgroups_of_order(e: &CMCurve, q: u64) -> Result<Vec<MarkedSubgroup>> {
    let frame = Frame::new(e, q)?;
    frame
        .group
        .elements()
        .iter()
        .map(|t| {
            let line = frame.line_for(t)?;
            Ok(MarkedSubgroup {
                parent: e.clone(),
                modulus: BigInt::from(q),
                coords: vec![*t],
                witness: line_superlattice(&e.lattice, q, line),
            })
        })
        .collect()
}

/// The subgroup with the given coordinates, one per distinct inert prime.
pub fn subgroup_from_coords(e: &CMCurve, coords: &[TorsorElement]) -> Result<MarkedSubgroup> {
    let mut coords = coords.to_vec();
    coords.sort_by_key(|t| t.q);
    let mut witness = e.lattice.clone();
    let mut modulus = BigInt::one();
    for (i, t) in coords.iter().enumerate() {
        if i > 0 && coords[i - 1].q == t.q {
            return Err(Error::invalid(format!("prime {} repeated", t.q)));
        }
        if t.disc != e.disc.value() {
            return Err(Error::Mismatch("torsor element from another field".into()));
        }
        let frame = Frame::new(e, t.q)?;
        witness = witness.sum(&line_superlattice(&e.lattice, t.q, frame.line_for(t)?));
        modulus *= t.q;
    }
    let c = MarkedSubgroup {
        parent: e.clone(),
        modulus,
        coords,
        witness,
    };
    c.verify()?;
    Ok(c)
}

/// `α(C)`: witness `α·W + L`, coordinates multiplied by the image of `α`.
pub fn apply_endo(alpha: &QuadInteger, c: &MarkedSubgroup) -> Result<MarkedSubgroup> {
    let d = c.parent.disc;
    if !c.parent.order.contains(alpha) {
        return Err(Error::invalid(format!(
            "{alpha} is not an endomorphism of a curve with conductor {}",
            c.parent.conductor()
        )));
    }
    if !alpha.norm(d).gcd(&c.modulus).is_one() {
        return Err(Error::invalid(format!(
            "{alpha} is not prime to {}",
            c.modulus
        )));
    }
    let witness = c.witness.mul_quad(alpha, d)?.sum(&c.parent.lattice);
    let coords = c
        .coords
        .iter()
        .map(|t| {
            let g = TorsorGroup::new(d, t.q)?;
            g.mul(t, &g.embed(alpha)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let out = MarkedSubgroup {
        parent: c.parent.clone(),
        modulus: c.modulus.clone(),
        coords,
        witness,
    };
    out.verify()?;
    Ok(out)
}

/// `E/C`, with the multiplier ring recomputed from the witness.
pub fn quotient(e: &CMCurve, c: &MarkedSubgroup) -> Result<CMCurve> {
    if !c.parent.same_lattice(e) {
        return Err(Error::invalid("subgroup belongs to a different curve"));
    }
    c.verify()?;
    let out = CMCurve::from_lattice(e.disc, c.witness.clone())?;
    if c.modulus.is_one() {
        let mut out = out;
        out.provenance = e.provenance.clone();
        return Ok(out);
    }
    Ok(out.with_step(
        e,
        QuotientStep {
            degree: c.modulus.clone(),
            coords: c.coords.clone(),
        },
    ))
}

/// A cyclic subgroup `W/L`, any order; a point `(E, C)` of `Y_0(N)`.
#[derive(Clone, Debug)]
pub struct CyclicSubgroup {
    pub parent: CMCurve,
    pub witness: Lattice,
    pub order: BigInt,
}

impl CyclicSubgroup {
    pub fn new(parent: &CMCurve, witness: Lattice) -> Result<Self> {
        let (e1, e2) = witness
            .elementary_divisors_over(&parent.lattice)
            .map_err(|_| Error::invalid("subgroup witness does not contain the curve lattice"))?;
        if !e1.is_one() {
            return Err(Error::invalid(format!(
                "subgroup has invariants ({e1}, {e2}) and is not cyclic"
            )));
        }
        Ok(CyclicSubgroup {
            parent: parent.clone(),
            witness,
            order: e2,
        })
    }

    pub fn trivial(parent: &CMCurve) -> Self {
        CyclicSubgroup {
            parent: parent.clone(),
            witness: parent.lattice.clone(),
            order: BigInt::one(),
        }
    }

    /// `k·C`, of order `N / gcd(N, k)`.
    pub fn multiple(&self, k: &BigInt) -> Result<Self> {
        if k.is_zero() {
            return Ok(CyclicSubgroup::trivial(&self.parent));
        }
        let w = self
            .parent
            .lattice
            .sum(&self.witness.scale(&BigRational::from_integer(k.clone()))?);
        CyclicSubgroup::new(&self.parent, w)
    }

    pub fn quotient(&self) -> Result<CMCurve> {
        let out = CMCurve::from_lattice(self.parent.disc, self.witness.clone())?;
        if self.order.is_one() {
            let mut out = out;
            out.provenance = self.parent.provenance.clone();
            return Ok(out);
        }
        Ok(out.with_step(
            &self.parent,
            QuotientStep {
                degree: self.order.clone(),
                coords: Vec::new(),
            },
        ))
    }
}

/// The point `(E/C, ker α_{C,n})` of `Y_0(ℓ^n)`, `ℓ = N(α)`.
///
/// The chain `E/C → E/α(C) → ⋯ → E/αⁿ(C)` is multiplication by `α` on
/// `C`, with lattices `L_{j+1} = α·L_j + L`; the composite kernel on
/// `C/L_C` is `α^{-n}·L_n / L_C`.
pub fn alpha_chain(
    e: &CMCurve,
    c: &MarkedSubgroup,
    alpha: &QuadInteger,
    n: u32,
) -> Result<CyclicSubgroup> {
    let d = e.disc;
    if !c.parent.same_lattice(e) {
        return Err(Error::invalid("subgroup belongs to a different curve"));
    }
    if !e.order.contains(alpha) {
        return Err(Error::invalid(format!(
            "{alpha} is not an endomorphism of E"
        )));
    }
    let ell = alpha.norm(d);
    if !ell.gcd(&c.modulus).is_one() {
        return Err(Error::invalid(format!(
            "subgroup order {} is not prime to N(α) = {ell}",
            c.modulus
        )));
    }
    let x = quotient(e, c)?;
    let mut lj = c.witness.clone();
    for _ in 0..n {
        lj = lj.mul_quad(alpha, d)?.sum(&e.lattice);
    }
    // α^{-n} = ᾱ^n / ℓ^n
    let conj_n = alpha.conj(d).pow(n as u64, d);
    let ell_n = num_traits::pow(ell.clone(), n as usize);
    let k = lj
        .mul_quad(&conj_n, d)?
        .scale(&BigRational::new(BigInt::one(), ell_n.clone()))?;
    let kernel = CyclicSubgroup::new(&x, k)?;
    if kernel.order != ell_n {
        return Err(Error::integrity(format!(
            "α-chain kernel has order {}, expected {ell_n}",
            kernel.order
        )));
    }
    Ok(kernel)
}

/// How the non-backtracking step of a descending chain is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainChoice {
    /// The admissible subgroup whose witness has the least normal form.
    Smallest,
    /// A uniformly random admissible subgroup, reproducible from the seed.
    Seeded(u64),
}

#[derive(Clone, Debug)]
pub struct DescendingChain {
    pub curves: Vec<CMCurve>,
    /// `ker(E_0 → E_n)`, cyclic of order `ℓ^n`.
    pub kernel: CyclicSubgroup,
    pub choice: ChainChoice,
}

pub fn descending_chain(e0: &CMCurve, ell: u64, n: u32) -> Result<DescendingChain> {
    descending_chain_with(e0, ell, n, ChainChoice::Smallest)
}

/// `E_0 → E_1 → ⋯ → E_n` by degree-`ℓ` steps, each avoiding the kernel of
/// the dual of the previous step, so that `End(E_i) = Z + ℓ^i·O_K`.
pub fn descending_chain_with(
    e0: &CMCurve,
    ell: u64,
    n: u32,
    choice: ChainChoice,
) -> Result<DescendingChain> {
    if !e0.order.is_maximal() {
        return Err(Error::invalid("descending chain must start at End = O_K"));
    }
    if kronecker_symbol(e0.disc.value(), ell)? != -1 {
        return Err(Error::invalid(format!(
            "{ell} is not inert in Q(√{})",
            e0.disc
        )));
    }
    let d = e0.disc;
    let mut rng = match choice {
        ChainChoice::Seeded(s) => Some(ChaCha8Rng::seed_from_u64(s)),
        ChainChoice::Smallest => None,
    };
    let inv_ell = BigRational::new(BigInt::one(), BigInt::from(ell));
    let mut curves = vec![e0.clone()];
    let mut prev: Option<Lattice> = None;
    for i in 0..n {
        let cur = curves.last().expect("nonempty").clone();
        let mut candidates: Vec<Lattice> = lines(ell)
            .map(|line| line_superlattice(&cur.lattice, ell, line))
            .collect();
        if let Some(p) = &prev {
            let dual = p.scale(&inv_ell)?;
            let pos = candidates
                .iter()
                .position(|w| *w == dual)
                .ok_or_else(|| Error::integrity("dual kernel is not an order-ℓ subgroup"))?;
            // the dual kernel is the ideal subgroup H(ℓZ + ℓ^i O_K)
            let ideal = Lattice::from_int_gens(
                &BigInt::one(),
                &[
                    (BigInt::from(ell), BigInt::zero()),
                    (
                        BigInt::zero(),
                        num_traits::pow(BigInt::from(ell), i as usize),
                    ),
                ],
            )?;
            if !cur.lattice.contains_lattice(&ideal.product(&dual, d)) {
                return Err(Error::integrity(
                    "dual kernel is not killed by ℓZ + ℓ^i·O_K",
                ));
            }
            candidates.remove(pos);
        }
        candidates.sort_by_key(|w| w.key());
        let chosen = match rng.as_mut() {
            None => candidates[0].clone(),
            Some(r) => candidates.choose(r).expect("ℓ admissible choices").clone(),
        };
        let next = CMCurve::from_lattice(d, chosen.clone())?.with_step(
            &cur,
            QuotientStep {
                degree: BigInt::from(ell),
                coords: Vec::new(),
            },
        );
        let expected = num_traits::pow(BigInt::from(ell), (i + 1) as usize);
        if *next.conductor() != expected {
            return Err(Error::integrity(format!(
                "step {} has conductor {}, expected {expected}",
                i + 1,
                next.conductor()
            )));
        }
        prev = Some(cur.lattice.clone());
        curves.push(next);
    }
    let last = curves.last().expect("nonempty").lattice.clone();
    let kernel = CyclicSubgroup::new(e0, last)?;
    if kernel.order != num_traits::pow(BigInt::from(ell), n as usize) {
        return Err(Error::integrity(
            "descending chain kernel has the wrong order",
        ));
    }
    Ok(DescendingChain {
        curves,
        kernel,
        choice,
    })
}

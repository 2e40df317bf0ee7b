//! Weak isomorphism of products of CM elliptic curves.
//!
//! Two independent decision procedures: the torsor congruence on the
//! multipliers `α_i`, and the Steinitz-class comparison of the factor
//! lattices as modules over their multiplier rings.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;

use crate::cm_curves::{apply_endo, quotient, weak_iso_curves, CMCurve, MarkedSubgroup};
use crate::error::{Error, Result};
use crate::quad_orders::{QuadInteger, QuadraticForm};
use crate::torsor::{TorsorElement, TorsorGroup};
use crate::wire;

/// `∏ E/α_i(C)`: the factors were built from a common base subgroup.
#[derive(Clone, Debug)]
pub struct TorsorPresentation {
    pub base: MarkedSubgroup,
    pub alphas: Vec<QuadInteger>,
}

#[derive(Clone, Debug)]
pub struct ProductVariety {
    pub factors: Vec<CMCurve>,
    pub presentation: Option<TorsorPresentation>,
}

impl ProductVariety {
    pub fn new(factors: Vec<CMCurve>) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| Error::invalid("a product needs at least one factor"))?;
        if factors.iter().any(|e| e.disc != first.disc) {
            return Err(Error::Mismatch("factors over different fields".into()));
        }
        Ok(ProductVariety {
            factors,
            presentation: None,
        })
    }

    /// `∏ E/α_i(C)` on `E = C.parent`.
    pub fn from_torsor(base: &MarkedSubgroup, alphas: &[QuadInteger]) -> Result<Self> {
        let e = &base.parent;
        let factors = alphas
            .iter()
            .map(|a| quotient(e, &apply_endo(a, base)?))
            .collect::<Result<Vec<_>>>()?;
        let mut p = ProductVariety::new(factors)?;
        p.presentation = Some(TorsorPresentation {
            base: base.clone(),
            alphas: alphas.to_vec(),
        });
        Ok(p)
    }

    /// Attaches a presentation after checking that factor `i` is weakly
    /// isomorphic to `E/α_i(C)`.
    pub fn with_presentation(
        mut self,
        base: &MarkedSubgroup,
        alphas: &[QuadInteger],
    ) -> Result<Self> {
        let p = TorsorPresentation {
            base: base.clone(),
            alphas: alphas.to_vec(),
        };
        check_presentation(&self.factors, &p)?;
        self.presentation = Some(p);
        Ok(self)
    }

    pub fn g(&self) -> usize {
        self.factors.len()
    }

    /// Factors reordered by `perm` (factor `i` of the result is `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.g()];
        for &i in perm {
            if i >= self.g() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid("not a permutation"));
            }
        }
        if perm.len() != self.g() {
            return Err(Error::invalid("not a permutation"));
        }
        Ok(ProductVariety {
            factors: perm.iter().map(|&i| self.factors[i].clone()).collect(),
            presentation: self.presentation.as_ref().map(|p| TorsorPresentation {
                base: p.base.clone(),
                alphas: perm.iter().map(|&i| p.alphas[i].clone()).collect(),
            }),
        })
    }
}

fn check_presentation(factors: &[CMCurve], p: &TorsorPresentation) -> Result<()> {
    if p.alphas.len() != factors.len() {
        return Err(Error::integrity(format!(
            "{} factors but {} multipliers",
            factors.len(),
            p.alphas.len()
        )));
    }
    p.base.verify()?;
    for (i, (f, a)) in factors.iter().zip(&p.alphas).enumerate() {
        let expected = quotient(&p.base.parent, &apply_endo(a, &p.base)?)?;
        if !weak_iso_curves(f, &expected) {
            return Err(Error::integrity(format!(
                "factor {i} is not E/α(C) for α = {a}"
            )));
        }
    }
    Ok(())
}

fn embed_product(alphas: &[QuadInteger], g: &TorsorGroup) -> Result<TorsorElement> {
    let mut acc = g.identity();
    for a in alphas {
        acc = g.mul(&acc, &g.embed(a)?)?;
    }
    Ok(acc)
}

/// `∏α_i ≡ ∏β_i` in `G̃_q`.
pub fn criterion_fast(
    alphas: &[QuadInteger],
    betas: &[QuadInteger],
    g: &TorsorGroup,
) -> Result<bool> {
    g.disc().require_plain_units()?;
    if alphas.len() != betas.len() {
        return Err(Error::invalid(format!(
            "products of different lengths {} and {}",
            alphas.len(),
            betas.len()
        )));
    }
    Ok(embed_product(alphas, g)? == embed_product(betas, g)?)
}

/// The criterion over `∏_j G̃_{q_j}`, for subgroups of squarefree order.
pub fn criterion_fast_multi(
    alphas: &[QuadInteger],
    betas: &[QuadInteger],
    groups: &[TorsorGroup],
) -> Result<bool> {
    let mut all = true;
    for g in groups {
        all &= criterion_fast(alphas, betas, g)?;
    }
    Ok(all)
}

/// Per-ring data of the oracle: factor counts and Steinitz classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RingRecord {
    pub conductor: BigInt,
    pub left_count: usize,
    pub right_count: usize,
    pub left_steinitz: Option<QuadraticForm>,
    pub right_steinitz: Option<QuadraticForm>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleRecord {
    pub rings: Vec<RingRecord>,
    pub verdict: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FastPathRecord {
    pub alpha_product: Vec<TorsorElement>,
    pub beta_product: Vec<TorsorElement>,
    pub verdict: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeakIsoCertificate {
    pub verdict: bool,
    pub fast_path: Option<FastPathRecord>,
    pub oracle_path: OracleRecord,
    pub inputs_digest: String,
}

fn group_by_ring(p: &ProductVariety) -> Result<BTreeMap<BigInt, (usize, QuadraticForm)>> {
    let mut out: BTreeMap<BigInt, (usize, QuadraticForm)> = BTreeMap::new();
    for e in &p.factors {
        match out.get_mut(e.conductor()) {
            Some((n, form)) => {
                *n += 1;
                *form = form.compose(&e.class.form)?;
            }
            None => {
                out.insert(e.conductor().clone(), (1, e.class.form.clone()));
            }
        }
    }
    Ok(out)
}

fn conductor_chain(p: &ProductVariety) -> Vec<BigInt> {
    let mut fs: Vec<BigInt> = p.factors.iter().map(|e| e.conductor().clone()).collect();
    fs.sort();
    fs
}

fn is_divisibility_chain(fs: &[BigInt]) -> bool {
    fs.windows(2).all(|w| w[1].is_multiple_of(&w[0]))
}

/// Steinitz-class comparison, with the ring-by-ring record.
pub fn oracle_record(p1: &ProductVariety, p2: &ProductVariety) -> Result<OracleRecord> {
    if p1.factors[0].disc != p2.factors[0].disc {
        return Err(Error::Mismatch("products over different fields".into()));
    }
    let left = group_by_ring(p1)?;
    let right = group_by_ring(p2)?;
    let mut keys: Vec<&BigInt> = left.keys().chain(right.keys()).collect();
    keys.sort();
    keys.dedup();
    let rings: Vec<RingRecord> = keys
        .into_iter()
        .map(|f| {
            let l = left.get(f);
            let r = right.get(f);
            RingRecord {
                conductor: f.clone(),
                left_count: l.map_or(0, |x| x.0),
                right_count: r.map_or(0, |x| x.0),
                left_steinitz: l.map(|x| x.1.clone()),
                right_steinitz: r.map(|x| x.1.clone()),
            }
        })
        .collect();
    let verdict = oracle_verdict(p1, p2, &rings)?;
    Ok(OracleRecord { rings, verdict })
}

fn oracle_verdict(p1: &ProductVariety, p2: &ProductVariety, rings: &[RingRecord]) -> Result<bool> {
    let counts_match = rings.iter().all(|r| r.left_count == r.right_count);
    let classes_match = rings.iter().all(|r| r.left_steinitz == r.right_steinitz);
    if rings.len() == 1 {
        return Ok(counts_match && classes_match);
    }
    if counts_match {
        if classes_match {
            return Ok(true);
        }
        return Err(Error::Unsupported(format!(
            "mixed multiplier rings {:?} with differing per-ring classes",
            rings
                .iter()
                .map(|r| r.conductor.to_string())
                .collect::<Vec<_>>()
        )));
    }
    let (c1, c2) = (conductor_chain(p1), conductor_chain(p2));
    if is_divisibility_chain(&c1) && is_divisibility_chain(&c2) {
        // the chain of multiplier rings is an isomorphism invariant
        return Ok(false);
    }
    Err(Error::Unsupported(format!(
        "conductor multisets {:?} and {:?} are not both divisibility chains",
        c1.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
        c2.iter().map(|f| f.to_string()).collect::<Vec<_>>()
    )))
}

/// Module-theoretic decision from the factor lattices alone.
pub fn oracle_slow(p1: &ProductVariety, p2: &ProductVariety) -> Result<bool> {
    Ok(oracle_record(p1, p2)?.verdict)
}

/// The torsor path, when both sides are presented over the same subgroup
/// of a curve with `End = O_K`.
pub fn fast_record(p1: &ProductVariety, p2: &ProductVariety) -> Result<Option<FastPathRecord>> {
    let (Some(a), Some(b)) = (&p1.presentation, &p2.presentation) else {
        return Ok(None);
    };
    if !a.base.parent.same_lattice(&b.base.parent) || a.base.witness != b.base.witness {
        return Err(Error::Unsupported(
            "presentations over different base subgroups".into(),
        ));
    }
    if !a.base.parent.order.is_maximal() {
        return Err(Error::Unsupported(
            "base curve does not have End = O_K".into(),
        ));
    }
    let d = a.base.parent.disc;
    let groups = a
        .base
        .primes()
        .into_iter()
        .map(|q| TorsorGroup::new(d, q))
        .collect::<Result<Vec<_>>>()?;
    let verdict = criterion_fast_multi(&a.alphas, &b.alphas, &groups)?;
    Ok(Some(FastPathRecord {
        alpha_product: groups
            .iter()
            .map(|g| embed_product(&a.alphas, g))
            .collect::<Result<_>>()?,
        beta_product: groups
            .iter()
            .map(|g| embed_product(&b.alphas, g))
            .collect::<Result<_>>()?,
        verdict,
    }))
}

/// Runs both paths and refuses to certify if they disagree.
pub fn weak_iso_products(p1: &ProductVariety, p2: &ProductVariety) -> Result<WeakIsoCertificate> {
    for p in [p1, p2] {
        if let Some(pres) = &p.presentation {
            check_presentation(&p.factors, pres)?;
        }
    }
    let oracle_path = oracle_record(p1, p2)?;
    let fast_path = fast_record(p1, p2)?;
    let inputs_digest = wire::digest(&wire::product_pair_json(p1, p2));
    if let Some(f) = &fast_path {
        if f.verdict != oracle_path.verdict {
            return Err(Error::integrity(format!(
                "torsor criterion says {} but the Steinitz oracle says {}; inputs {}",
                f.verdict,
                oracle_path.verdict,
                wire::canonical_string(&wire::product_pair_json(p1, p2))
            )));
        }
    }
    Ok(WeakIsoCertificate {
        verdict: oracle_path.verdict,
        fast_path,
        oracle_path,
        inputs_digest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cm_curves::{subgroups_of_order, CMCurve, Lattice};
    use crate::quad_orders::{class_group, Discriminant, QuadOrder};
    use num_traits::One;

    fn d7() -> Discriminant {
        Discriminant::new(-7).unwrap()
    }

    fn base5() -> MarkedSubgroup {
        subgroups_of_order(&CMCurve::base(d7()), 5)
            .unwrap()
            .remove(0)
    }

    #[test]
    fn identical_products() {
        let c = base5();
        let a = [QuadInteger::one(), QuadInteger::omega()];
        let p = ProductVariety::from_torsor(&c, &a).unwrap();
        let cert = weak_iso_products(&p, &p).unwrap();
        assert!(cert.verdict);
        assert!(cert.fast_path.unwrap().verdict);
        assert!(cert.oracle_path.verdict);
    }

    #[test]
    fn permutations_agree() {
        let c = base5();
        let a = [
            QuadInteger::new(1, 1),
            QuadInteger::omega(),
            QuadInteger::new(2, 1),
        ];
        let g = TorsorGroup::new(d7(), 5).unwrap();
        let perm = [a[2].clone(), a[0].clone(), a[1].clone()];
        assert!(criterion_fast(&a, &perm, &g).unwrap());
        let p = ProductVariety::from_torsor(&c, &a).unwrap();
        let q = p.permuted(&[2, 0, 1]).unwrap();
        assert!(oracle_slow(&p, &q).unwrap());
        assert!(weak_iso_products(&p, &q).unwrap().verdict);
    }

    #[test]
    fn criterion_rejects_bad_input() {
        let g = TorsorGroup::new(d7(), 5).unwrap();
        let five = [QuadInteger::from_int(5)];
        assert!(criterion_fast(&five, &[QuadInteger::one()], &g).is_err());
        let g4 = TorsorGroup::new(Discriminant::new(-4).unwrap(), 3).unwrap();
        assert!(matches!(
            criterion_fast(&[QuadInteger::one()], &[QuadInteger::one()], &g4),
            Err(Error::ExtraUnits(-4))
        ));
    }

    #[test]
    fn single_factor_swap_matches_class_equality() {
        // (E/C) × E/α(C) vs (E/C) × E/β(C): same iff E/α(C) ≈ E/β(C)
        let c = base5();
        let g = TorsorGroup::new(d7(), 5).unwrap();
        let elts = g.elements();
        for s in &elts {
            for t in &elts {
                let (a, b) = (g.lift(s), g.lift(t));
                let p1 = ProductVariety::from_torsor(&c, &[QuadInteger::one(), a.clone()]).unwrap();
                let p2 = ProductVariety::from_torsor(&c, &[QuadInteger::one(), b.clone()]).unwrap();
                let ca = quotient(&c.parent, &apply_endo(&a, &c).unwrap()).unwrap();
                let cb = quotient(&c.parent, &apply_endo(&b, &c).unwrap()).unwrap();
                assert_eq!(oracle_slow(&p1, &p2).unwrap(), ca.class == cb.class);
                assert_eq!(weak_iso_products(&p1, &p2).unwrap().verdict, s == t);
            }
        }
    }

    #[test]
    fn mixed_rings() {
        let d = d7();
        let e = CMCurve::base(d);
        let e5 = quotient(&e, &base5()).unwrap();
        let p1 = ProductVariety::new(vec![e.clone(), e5.clone()]).unwrap();
        let p2 = ProductVariety::new(vec![e5.clone(), e5.clone()]).unwrap();
        assert!(!oracle_slow(&p1, &p2).unwrap());
        assert!(oracle_slow(&p1, &p1).unwrap());
        let p3 = ProductVariety::new(vec![e.clone(), e.clone()]).unwrap();
        assert!(!oracle_slow(&p3, &p2).unwrap());
        // conductors 3 and 5 are not a chain
        let e3 = CMCurve::from_lattice(d, Lattice::order(&BigInt::from(3)).unwrap()).unwrap();
        let p4 = ProductVariety::new(vec![e3.clone(), e5.clone()]).unwrap();
        let p5 = ProductVariety::new(vec![e3, e.clone()]).unwrap();
        assert!(matches!(oracle_slow(&p4, &p5), Err(Error::Unsupported(_))));
        // equal multisets with differing classes at two rings
        let others: Vec<_> = subgroups_of_order(&e, 5)
            .unwrap()
            .iter()
            .map(|c| quotient(&e, c).unwrap())
            .collect();
        let odd = others.iter().find(|x| x.class != e5.class).unwrap();
        let p6 = ProductVariety::new(vec![e.clone(), e5.clone()]).unwrap();
        let p7 = ProductVariety::new(vec![e, odd.clone()]).unwrap();
        assert!(matches!(oracle_slow(&p6, &p7), Err(Error::Unsupported(_))));
    }

    #[test]
    fn lattice_products_compose_forms() {
        // the Steinitz comparison relies on form(L·M) = form(L)∘form(M)
        let d = d7();
        let order = QuadOrder::new(d, BigInt::from(5)).unwrap();
        let e = CMCurve::base(d);
        let curves: Vec<_> = subgroups_of_order(&e, 5)
            .unwrap()
            .iter()
            .map(|c| quotient(&e, c).unwrap())
            .collect();
        assert_eq!(class_group(&order).len(), 6);
        for a in &curves {
            for b in &curves {
                let prod = CMCurve::from_lattice(d, a.lattice.product(&b.lattice, d)).unwrap();
                assert!(prod.conductor().is_one() || *prod.conductor() == BigInt::from(5));
                if *prod.conductor() == BigInt::from(5) {
                    assert_eq!(
                        prod.class.form,
                        a.class.form.compose(&b.class.form).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn presentation_is_checked() {
        let c = base5();
        let e = c.parent.clone();
        let other = quotient(&e, &subgroups_of_order(&e, 5).unwrap()[3]).unwrap();
        let p = ProductVariety::new(vec![other]).unwrap();
        assert!(p.with_presentation(&c, &[QuadInteger::one()]).is_err());
    }
}

//! Points `x_i` of `Y_0(ℓ^n)` and their `g^i` partners `y_β` of `Y_0(ℓ^m)`
//! with `ψ_A(x_i) ≈ ψ_{A'}(y_β)`, each pair carrying a certificate.

use num_bigint::BigInt;
use num_traits::One;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::arith::{crt, is_prime};
use crate::cm_curves::{
    alpha_chain, apply_endo, subgroup_from_coords, weak_iso_curves, CMCurve, CyclicSubgroup,
    MarkedSubgroup,
};
use crate::error::{Error, Result};
use crate::products::{
    fast_record, oracle_record, weak_iso_products, ProductVariety, WeakIsoCertificate,
};
use crate::psi_map::{
    enumerate_detl_bounded, log_exact, psi_general, smith_normal_form, SymPosDefIntMatrix,
};
use crate::quad_orders::{
    element_of_norm, find_field, find_split_principal, kronecker_symbol, Discriminant, FieldQuery,
    QuadInteger,
};
use crate::torsor::{find_q, TorsorElement, TorsorGroup};
use crate::wire::{self, as_array, as_int, as_u64, field};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchBounds {
    pub field: u64,
    pub ell: u64,
    pub q: u64,
}

impl Default for SearchBounds {
    fn default() -> Self {
        SearchBounds {
            field: 10_000,
            ell: 10_000,
            q: 1_000_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub g: usize,
    /// A prime that must split in `K`.
    pub p: Option<u64>,
    /// A fixed `ℓ`; searched for when absent.
    pub ell: Option<u64>,
    pub depth: usize,
    pub bounds: SearchBounds,
    /// Selects the basepoints `C_j`; canonical when absent.
    pub seed: Option<u64>,
}

impl GenConfig {
    pub fn new(g: usize, depth: usize) -> Self {
        GenConfig {
            g,
            p: None,
            ell: None,
            depth,
            bounds: SearchBounds::default(),
            seed: None,
        }
    }
}

/// The field, `ℓ = αᾱ`, the primes `q_j`, and the subgroups `C_j` of `E`.
#[derive(Clone, Debug)]
pub struct PairSetup {
    pub g: usize,
    pub disc: Discriminant,
    pub ell: u64,
    pub alpha: QuadInteger,
    pub qs: Vec<u64>,
    pub base: CMCurve,
    pub basepoints: Vec<TorsorElement>,
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::SearchExhausted {
            found,
            wanted,
            bound,
            ..
        } => Error::SearchExhausted {
            stage: name.to_string(),
            found,
            wanted,
            bound,
        },
        other => other,
    })
}

pub fn setup(cfg: &GenConfig) -> Result<PairSetup> {
    if cfg.g < 2 {
        return Err(Error::invalid(format!(
            "g must be at least 2, got {}",
            cfg.g
        )));
    }
    if let (Some(p), Some(l)) = (cfg.p, cfg.ell) {
        if p == l {
            return Err(Error::invalid(format!(
                "ℓ must differ from the characteristic {p}"
            )));
        }
    }
    let query = FieldQuery {
        split: cfg.p,
        inert: None,
    };
    let disc = stage("field search", find_field(query, cfg.bounds.field))?;
    let (ell, alpha) = match cfg.ell {
        Some(l) => {
            if !is_prime(l) {
                return Err(Error::NotPrime(l));
            }
            if kronecker_symbol(disc.value(), l)? != 1 {
                return Err(Error::invalid(format!("{l} does not split in Q(√{disc})")));
            }
            let a = element_of_norm(disc, &BigInt::from(l))
                .ok_or_else(|| Error::invalid(format!("{l} is not a norm from O_K")))?;
            (l, a)
        }
        None => {
            let exclude: Vec<u64> = cfg.p.into_iter().collect();
            stage(
                "ℓ search",
                find_split_principal(disc, cfg.bounds.ell, &exclude),
            )?
        }
    };
    let qs = stage(
        "q search",
        find_q(disc, cfg.g as u64, &alpha, cfg.depth, cfg.bounds.q),
    )?;
    let mut rng = cfg.seed.map(ChaCha8Rng::seed_from_u64);
    let basepoints = qs
        .iter()
        .map(|&q| {
            let g = TorsorGroup::new(disc, q)?;
            Ok(match rng.as_mut() {
                None => g.identity(),
                Some(r) => *g.elements().choose(r).expect("nonempty group"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PairSetup {
        g: cfg.g,
        disc,
        ell,
        alpha,
        qs,
        base: CMCurve::base(disc),
        basepoints,
    })
}

/// `(E/C, α_{C,n})`.
#[derive(Clone, Debug)]
pub struct Y0Point {
    pub subgroup: MarkedSubgroup,
    pub chain: CyclicSubgroup,
    pub chain_length: u32,
}

impl Y0Point {
    pub fn curve(&self) -> &CMCurve {
        &self.chain.parent
    }
}

#[derive(Clone, Debug)]
pub struct Partner {
    pub beta: QuadInteger,
    pub point: Y0Point,
    pub left: ProductVariety,
    pub right: ProductVariety,
    pub certificate: WeakIsoCertificate,
}

fn chain_length(a: &SymPosDefIntMatrix, ell: u64) -> Result<u32> {
    log_exact(&a.det(), ell)
        .ok_or_else(|| Error::invalid(format!("det {a} = {} is not a power of {ell}", a.det())))
}

fn divisor_exponents(a: &SymPosDefIntMatrix, ell: u64) -> Result<Vec<u32>> {
    smith_normal_form(a)
        .d
        .iter()
        .map(|d| {
            log_exact(d, ell)
                .ok_or_else(|| Error::integrity("elementary divisor is not an ℓ-power"))
        })
        .collect()
}

impl PairSetup {
    /// `C_1 + ⋯ + C_i`.
    pub fn base_subgroup(&self, i: usize) -> Result<MarkedSubgroup> {
        if i > self.qs.len() {
            return Err(Error::invalid(format!(
                "index {i} exceeds depth {}",
                self.qs.len()
            )));
        }
        subgroup_from_coords(&self.base, &self.basepoints[..i])
    }

    pub fn point(&self, c: &MarkedSubgroup, n: u32) -> Result<Y0Point> {
        Ok(Y0Point {
            subgroup: c.clone(),
            chain: alpha_chain(&self.base, c, &self.alpha, n)?,
            chain_length: n,
        })
    }

    pub fn build_x(&self, i: usize, a: &SymPosDefIntMatrix) -> Result<Y0Point> {
        let n = chain_length(a, self.ell)?;
        let x = self.point(&self.base_subgroup(i)?, n)?;
        let f: BigInt = self.qs[..i].iter().map(|&q| BigInt::from(q)).product();
        if *x.curve().conductor() != f {
            return Err(Error::integrity(format!(
                "x_{i} has conductor {}, expected {f}",
                x.curve().conductor()
            )));
        }
        Ok(x)
    }

    fn alpha_powers(&self, exps: &[u32], times: &QuadInteger) -> Vec<QuadInteger> {
        exps.iter()
            .map(|&k| self.alpha.pow(k as u64, self.disc).mul(times, self.disc))
            .collect()
    }

    /// `ψ_A(point)` presented as `∏ E/(α^{n_k}·β)(C)`.
    pub fn psi_product(
        &self,
        point: &Y0Point,
        a: &SymPosDefIntMatrix,
        base: &MarkedSubgroup,
        beta: &QuadInteger,
    ) -> Result<ProductVariety> {
        let exps = divisor_exponents(a, self.ell)?;
        psi_general(&point.chain, a)?
            .product
            .with_presentation(base, &self.alpha_powers(&exps, beta))
    }

    /// Representatives `β` of the solutions to `α^n ≡ β^g·α^m` in
    /// `∏_j G̃_{q_j}` over the primes of `c`, in lexicographic order of
    /// their torsor images.
    pub fn betas(&self, c: &MarkedSubgroup, n: u32, m: u32) -> Result<Vec<QuadInteger>> {
        let g = self.g as u64;
        let mut roots = Vec::new();
        for q in c.primes() {
            let grp = TorsorGroup::new(self.disc, q)?;
            let target = grp.pow(&grp.embed(&self.alpha)?, n as i64 - m as i64)?;
            let r = grp.gth_roots(&target, g)?;
            if r.len() != self.g {
                return Err(Error::integrity(format!(
                    "{} g-th roots in G̃_{q}, expected {}",
                    r.len(),
                    self.g
                )));
            }
            roots.push(r);
        }
        let total = self.g.pow(roots.len() as u32);
        let mut out = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rest = idx;
            let mut digits = vec![0usize; roots.len()];
            for d in digits.iter_mut().rev() {
                *d = rest % self.g;
                rest /= self.g;
            }
            let picks: Vec<&TorsorElement> =
                digits.iter().zip(&roots).map(|(&d, r)| &r[d]).collect();
            if picks.is_empty() {
                out.push(QuadInteger::one());
                continue;
            }
            let x = crt(&picks.iter().map(|t| (t.x, t.q)).collect::<Vec<_>>());
            let y = crt(&picks.iter().map(|t| (t.y, t.q)).collect::<Vec<_>>());
            out.push(QuadInteger::new(x, y));
        }
        Ok(out)
    }

    /// All partners of the point over `c`, certified, for `A` and `A′`.
    pub fn partners_of(
        &self,
        c: &MarkedSubgroup,
        a: &SymPosDefIntMatrix,
        a_prime: &SymPosDefIntMatrix,
    ) -> Result<Vec<Partner>> {
        let (n, m) = (chain_length(a, self.ell)?, chain_length(a_prime, self.ell)?);
        if a.g() != self.g || a_prime.g() != self.g {
            return Err(Error::invalid(format!("matrices must be {0}×{0}", self.g)));
        }
        let x = self.point(c, n)?;
        let left = self.psi_product(&x, a, c, &QuadInteger::one())?;
        let betas = self.betas(c, n, m)?;
        let out = betas
            .into_par_iter()
            .map(|beta| {
                let cb = apply_endo(&beta, c)?;
                let y = self.point(&cb, m)?;
                let right = self.psi_product(&y, a_prime, c, &beta)?;
                let certificate = weak_iso_products(&left, &right)?;
                if !certificate.verdict {
                    return Err(Error::integrity(format!(
                        "ψ_A(x) and ψ_A′(y_β) are not weakly isomorphic for β = {beta}"
                    )));
                }
                Ok(Partner {
                    beta,
                    point: y,
                    left: left.clone(),
                    right,
                    certificate,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        check_distinct(out.iter().map(|p| p.point.curve()))?;
        Ok(out)
    }

    pub fn partners(
        &self,
        i: usize,
        a: &SymPosDefIntMatrix,
        a_prime: &SymPosDefIntMatrix,
    ) -> Result<Vec<Partner>> {
        self.partners_of(&self.base_subgroup(i)?, a, a_prime)
    }

    /// Whether `x` appears among the partners of `y` computed with `A′` and `A` exchanged.
    pub fn reverse_contains(
        &self,
        x: &Y0Point,
        y: &Partner,
        a: &SymPosDefIntMatrix,
        a_prime: &SymPosDefIntMatrix,
    ) -> Result<bool> {
        let back = self.partners_of(&y.point.subgroup, a_prime, a)?;
        Ok(back.iter().any(|p| {
            p.point.subgroup.coords == x.subgroup.coords
                && p.point.subgroup.witness == x.subgroup.witness
                && weak_iso_curves(p.point.curve(), x.curve())
        }))
    }
}

fn check_distinct<'a>(curves: impl Iterator<Item = &'a CMCurve>) -> Result<()> {
    let curves: Vec<&CMCurve> = curves.collect();
    for (i, a) in curves.iter().enumerate() {
        for b in &curves[i + 1..] {
            if weak_iso_curves(a, b) {
                return Err(Error::integrity("two points have weakly isomorphic curves"));
            }
        }
    }
    Ok(())
}

/// The first non-diagonal member of `Det_{ℓ,g}` with `det > 1`.
pub fn default_a(g: usize, ell: u64) -> Result<SymPosDefIntMatrix> {
    for p in 1..=8u32 {
        let bound = (ell as u128).pow(p).min(8) as u64;
        if let Some(a) = enumerate_detl_bounded(g, ell, p, bound)
            .into_iter()
            .find(|a| !a.is_diagonal() && !a.det().is_one())
        {
            return Ok(a);
        }
    }
    Err(Error::SearchExhausted {
        stage: "default A".into(),
        found: 0,
        wanted: 1,
        bound: 8,
    })
}

/// `ℓ·I`.
pub fn default_a_prime(g: usize, ell: u64) -> SymPosDefIntMatrix {
    SymPosDefIntMatrix::scalar(g, &BigInt::from(ell)).expect("ℓ > 0")
}

#[derive(Clone, Debug)]
pub struct PairFamily {
    pub config: GenConfig,
    pub setup: PairSetup,
    pub a: SymPosDefIntMatrix,
    pub a_prime: SymPosDefIntMatrix,
    /// `xs[i - 1]` is `x_i`.
    pub xs: Vec<Y0Point>,
    /// `partners[i - 1]` are the partners of `x_i`.
    pub partners: Vec<Vec<Partner>>,
}

impl PairFamily {
    pub fn partner_counts(&self) -> Vec<usize> {
        self.partners.iter().map(Vec::len).collect()
    }
}

pub fn generate(
    cfg: &GenConfig,
    a: Option<SymPosDefIntMatrix>,
    a_prime: Option<SymPosDefIntMatrix>,
) -> Result<PairFamily> {
    let s = setup(cfg)?;
    let a = match a {
        Some(a) => a,
        None => default_a(cfg.g, s.ell)?,
    };
    let a_prime = a_prime.unwrap_or_else(|| default_a_prime(cfg.g, s.ell));
    let mut xs = Vec::new();
    let mut partners = Vec::new();
    for i in 1..=cfg.depth {
        let x = s.build_x(i, &a)?;
        let ps = s.partners(i, &a, &a_prime)?;
        let expected = cfg.g.pow(i as u32);
        if ps.len() != expected {
            return Err(Error::integrity(format!(
                "x_{i} has {} partners, expected {expected}",
                ps.len()
            )));
        }
        xs.push(x);
        partners.push(ps);
    }
    check_distinct(xs.iter().map(Y0Point::curve))?;
    Ok(PairFamily {
        config: cfg.clone(),
        setup: s,
        a,
        a_prime,
        xs,
        partners,
    })
}

// --- bundles ----------------------------------------------------------------

fn opt(x: Option<u64>) -> Value {
    x.map_or(Value::Null, |v| json!(v))
}

pub fn point_json(p: &Y0Point) -> Value {
    json!({
        "chain_length": p.chain_length,
        "curve": wire::curve_json(p.curve()),
        "kernel": wire::lattice_json(&p.chain.witness),
        "subgroup": wire::subgroup_json(&p.subgroup),
    })
}

pub fn family_json(f: &PairFamily) -> Value {
    let s = &f.setup;
    let levels: Vec<Value> =
        f.xs.iter()
            .zip(&f.partners)
            .enumerate()
            .map(|(k, (x, ps))| {
                json!({
                    "i": k + 1,
                    "partners": ps.iter().map(|p| json!({
                        "beta": wire::quad_json(&p.beta),
                        "certificate": wire::certificate_json(&p.certificate),
                        "left": wire::product_json(&p.left),
                        "point": point_json(&p.point),
                        "right": wire::product_json(&p.right),
                    })).collect::<Vec<_>>(),
                    "x": point_json(x),
                })
            })
            .collect();
    json!({
        "a": wire::matrix_json(&f.a),
        "a_prime": wire::matrix_json(&f.a_prime),
        "alpha": wire::quad_json(&s.alpha),
        "basepoints": s.basepoints.iter().map(wire::torsor_json).collect::<Vec<_>>(),
        "config": {
            "bounds": {
                "ell": f.config.bounds.ell,
                "field": f.config.bounds.field,
                "q": f.config.bounds.q,
            },
            "depth": f.config.depth,
            "ell": opt(f.config.ell),
            "g": f.config.g,
            "p": opt(f.config.p),
            "seed": opt(f.config.seed),
        },
        "disc": s.disc.value(),
        "ell": s.ell,
        "g": s.g,
        "kind": "pair_family",
        "levels": levels,
        "qs": s.qs,
        "schema_version": wire::SCHEMA_VERSION,
    })
}

/// What a verified bundle contains.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BundleReport {
    pub partner_counts: Vec<usize>,
    pub certificates: usize,
}

fn mismatch(what: &str) -> Error {
    Error::integrity(format!("{what} does not match its recomputation"))
}

/// Recomputes the point from its subgroup and chain length and compares.
fn point_from(v: &Value, s: &PairSetup) -> Result<Y0Point> {
    wire::expect_keys(v, &["chain_length", "curve", "kernel", "subgroup"])?;
    let c = wire::subgroup_from(field(v, "subgroup")?, s.disc)?;
    if !c.parent.same_lattice(&s.base) {
        return Err(Error::integrity("point is not over the base curve"));
    }
    let n = u32::try_from(as_u64(field(v, "chain_length")?)?)
        .map_err(|_| Error::integrity("chain length out of range"))?;
    let p = s.point(&c, n)?;
    if point_json(&p) != *v {
        return Err(mismatch("point"));
    }
    Ok(p)
}

/// Re-derives every recorded quantity of a pair-family bundle from the
/// factor lattices and subgroup data, and checks each certificate with the
/// Steinitz oracle. Any disagreement is an integrity error.
pub fn verify_bundle(v: &Value) -> Result<BundleReport> {
    wire::expect_keys(
        v,
        &[
            "a",
            "a_prime",
            "alpha",
            "basepoints",
            "config",
            "disc",
            "ell",
            "g",
            "kind",
            "levels",
            "qs",
            "schema_version",
        ],
    )?;
    if as_u64(field(v, "schema_version")?)? != wire::SCHEMA_VERSION {
        return Err(Error::integrity("unknown schema version"));
    }
    if wire::as_str(field(v, "kind")?)? != "pair_family" {
        return Err(Error::integrity("not a pair-family bundle"));
    }
    let disc = Discriminant::new(wire::as_i64(field(v, "disc")?)?)
        .map_err(|e| Error::integrity(e.to_string()))?;
    disc.require_plain_units()
        .map_err(|e| Error::integrity(e.to_string()))?;
    let g = as_u64(field(v, "g")?)? as usize;
    if g < 2 {
        return Err(Error::integrity("g < 2"));
    }
    let ell = as_u64(field(v, "ell")?)?;
    let alpha = wire::quad_from(field(v, "alpha")?)?;
    if alpha.norm(disc) != BigInt::from(ell) || !is_prime(ell) {
        return Err(Error::integrity("α does not have prime norm ℓ"));
    }
    let qs = as_array(field(v, "qs")?)?
        .iter()
        .map(as_u64)
        .collect::<Result<Vec<_>>>()?;
    for (k, &q) in qs.iter().enumerate() {
        if k > 0 && qs[k - 1] >= q {
            return Err(Error::integrity("primes q_j must increase"));
        }
        let grp = TorsorGroup::new(disc, q).map_err(|e| Error::integrity(e.to_string()))?;
        if (q + 1) % g as u64 != 0 || !grp.is_gth_power_of_units(&alpha, g as u64)? {
            return Err(Error::integrity(format!(
                "q = {q} fails the prime conditions"
            )));
        }
    }
    let basepoints = as_array(field(v, "basepoints")?)?
        .iter()
        .map(|t| wire::torsor_from(t, disc))
        .collect::<Result<Vec<_>>>()?;
    if basepoints.iter().map(|t| t.q).collect::<Vec<_>>() != qs {
        return Err(Error::integrity("basepoints do not match the primes"));
    }
    let config = field(v, "config")?;
    wire::expect_keys(config, &["bounds", "depth", "ell", "g", "p", "seed"])?;
    if as_u64(field(config, "g")?)? != g as u64
        || as_u64(field(config, "depth")?)? != qs.len() as u64
    {
        return Err(Error::integrity("config disagrees with the family"));
    }
    let s = PairSetup {
        g,
        disc,
        ell,
        alpha,
        qs: qs.clone(),
        base: CMCurve::base(disc),
        basepoints,
    };
    let a = wire::matrix_from(field(v, "a")?).map_err(|e| Error::integrity(e.to_string()))?;
    let a_prime =
        wire::matrix_from(field(v, "a_prime")?).map_err(|e| Error::integrity(e.to_string()))?;
    if a.g() != g || a_prime.g() != g {
        return Err(Error::integrity("matrix size differs from g"));
    }
    let n = chain_length(&a, ell).map_err(|e| Error::integrity(e.to_string()))?;
    let m = chain_length(&a_prime, ell).map_err(|e| Error::integrity(e.to_string()))?;
    let levels = as_array(field(v, "levels")?)?;
    if levels.len() != qs.len() {
        return Err(Error::integrity("one level per prime is required"));
    }
    let mut xs = Vec::new();
    let mut counts = Vec::new();
    for (k, level) in levels.iter().enumerate() {
        let i = k + 1;
        wire::expect_keys(level, &["i", "partners", "x"])?;
        if as_u64(field(level, "i")?)? != i as u64 {
            return Err(Error::integrity("levels out of order"));
        }
        let x = point_from(field(level, "x")?, &s)?;
        if x.chain_length != n || x.subgroup.coords != s.basepoints[..i] {
            return Err(mismatch("x_i"));
        }
        let c = &x.subgroup;
        let left_expected = s.psi_product(&x, &a, c, &QuadInteger::one())?;
        let partners = as_array(field(level, "partners")?)?;
        if partners.len() != g.pow(i as u32) {
            return Err(Error::integrity(format!(
                "level {i} has {} partners, expected {}",
                partners.len(),
                g.pow(i as u32)
            )));
        }
        let groups = c
            .primes()
            .into_iter()
            .map(|q| TorsorGroup::new(disc, q))
            .collect::<Result<Vec<_>>>()?;
        let ys = partners
            .par_iter()
            .map(|p| verify_partner(p, &s, &x, &left_expected, &groups, &a_prime, n, m))
            .collect::<Result<Vec<_>>>()?;
        check_distinct(ys.iter().map(Y0Point::curve))?;
        counts.push(ys.len());
        xs.push(x);
    }
    check_distinct(xs.iter().map(Y0Point::curve))?;
    Ok(BundleReport {
        certificates: counts.iter().sum(),
        partner_counts: counts,
    })
}

#[allow(clippy::too_many_arguments)]
fn verify_partner(
    p: &Value,
    s: &PairSetup,
    x: &Y0Point,
    left_expected: &ProductVariety,
    groups: &[TorsorGroup],
    a_prime: &SymPosDefIntMatrix,
    n: u32,
    m: u32,
) -> Result<Y0Point> {
    wire::expect_keys(p, &["beta", "certificate", "left", "point", "right"])?;
    let beta = wire::quad_from(field(p, "beta")?)?;
    // β^g·α^m ≡ α^n in each G̃_q
    for grp in groups {
        let lhs = grp.mul(
            &grp.pow(&grp.embed(&beta)?, s.g as i64)?,
            &grp.pow(&grp.embed(&s.alpha)?, m as i64)?,
        )?;
        if lhs != grp.pow(&grp.embed(&s.alpha)?, n as i64)? {
            return Err(Error::integrity(format!(
                "β = {beta} does not solve the congruence mod {}",
                grp.q()
            )));
        }
    }
    let y = point_from(field(p, "point")?, s)?;
    let cb = apply_endo(&beta, &x.subgroup)?;
    if y.chain_length != m || y.subgroup.coords != cb.coords || y.subgroup.witness != cb.witness {
        return Err(mismatch("partner point"));
    }
    let left = wire::product_from(field(p, "left")?)?;
    let right = wire::product_from(field(p, "right")?)?;
    let right_expected = s.psi_product(&y, a_prime, &x.subgroup, &beta)?;
    for (got, want, side) in [
        (&left, left_expected, "left"),
        (&right, &right_expected, "right"),
    ] {
        if wire::product_json(got) != wire::product_json(want) {
            return Err(mismatch(&format!("{side} product")));
        }
    }
    let recorded = wire::certificate_from(field(p, "certificate")?, s.disc)?;
    let oracle_path = oracle_record(&left, &right)?;
    let fast_path = fast_record(&left, &right)?;
    let expected = WeakIsoCertificate {
        verdict: oracle_path.verdict,
        fast_path,
        oracle_path,
        inputs_digest: wire::digest(&wire::product_pair_json(&left, &right)),
    };
    if recorded != expected {
        return Err(mismatch("certificate"));
    }
    if !expected.verdict {
        return Err(Error::integrity(
            "certificate does not assert weak isomorphism",
        ));
    }
    Ok(y)
}

/// Parses a matrix argument given as JSON text.
pub fn parse_matrix(text: &str) -> Result<SymPosDefIntMatrix> {
    let v: Value =
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("matrix JSON: {e}")))?;
    let rows = as_array(&v).map_err(|_| Error::invalid("matrix must be an array of rows"))?;
    let m = rows
        .iter()
        .map(|r| {
            as_array(r)
                .and_then(|r| r.iter().map(as_int).collect::<Result<Vec<_>>>())
                .map_err(|_| Error::invalid("matrix rows must be integer arrays"))
        })
        .collect::<Result<Vec<_>>>()?;
    SymPosDefIntMatrix::new(m)
}

//! Canonical JSON for curves, subgroups, products and certificates.
//!
//! Objects use sorted keys and integers are written as exact JSON numbers,
//! so a document's serialization is a function of its content. Parsers
//! recompute every derived field and report disagreement as an integrity
//! failure.

use num_bigint::BigInt;
use serde_json::{json, Number, Value};
use sha2::{Digest, Sha256};

use crate::cm_curves::{CMCurve, Lattice, MarkedSubgroup};
use crate::error::{Error, Result};
use crate::products::{
    FastPathRecord, OracleRecord, ProductVariety, RingRecord, WeakIsoCertificate,
};
use crate::psi_map::SymPosDefIntMatrix;
use crate::quad_orders::{Discriminant, QuadInteger, QuadraticForm};
use crate::torsor::{TorsorElement, TorsorGroup};

pub const SCHEMA_VERSION: u64 = 1;

pub fn canonical_string(v: &Value) -> String {
    serde_json::to_string(v).expect("JSON values always serialize")
}

pub fn digest(v: &Value) -> String {
    hex::encode(Sha256::digest(canonical_string(v).as_bytes()))
}

fn bad(msg: impl Into<String>) -> Error {
    Error::integrity(msg)
}

pub fn int(n: &BigInt) -> Value {
    Value::Number(
        n.to_string()
            .parse::<Number>()
            .expect("integers are JSON numbers"),
    )
}

pub fn as_int(v: &Value) -> Result<BigInt> {
    match v {
        Value::Number(n) => n
            .as_str()
            .parse::<BigInt>()
            .map_err(|_| bad(format!("{n} is not an integer"))),
        other => Err(bad(format!("expected an integer, found {other}"))),
    }
}

pub fn as_u64(v: &Value) -> Result<u64> {
    u64::try_from(as_int(v)?).map_err(|_| bad(format!("{v} is not a small nonnegative integer")))
}

pub fn as_i64(v: &Value) -> Result<i64> {
    i64::try_from(as_int(v)?).map_err(|_| bad(format!("{v} does not fit in 64 bits")))
}

pub fn as_bool(v: &Value) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| bad(format!("expected a boolean, found {v}")))
}

pub fn as_array(v: &Value) -> Result<&Vec<Value>> {
    v.as_array()
        .ok_or_else(|| bad(format!("expected an array, found {v}")))
}

pub fn as_str(v: &Value) -> Result<&str> {
    v.as_str()
        .ok_or_else(|| bad(format!("expected a string, found {v}")))
}

/// A required field of an object with exactly the given keys.
pub fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.as_object()
        .ok_or_else(|| bad(format!("expected an object, found {v}")))?
        .get(key)
        .ok_or_else(|| bad(format!("missing field {key}")))
}

/// Rejects objects carrying keys outside `keys`.
pub fn expect_keys(v: &Value, keys: &[&str]) -> Result<()> {
    let obj = v
        .as_object()
        .ok_or_else(|| bad(format!("expected an object, found {v}")))?;
    for k in obj.keys() {
        if !keys.contains(&k.as_str()) {
            return Err(bad(format!("unexpected field {k}")));
        }
    }
    for k in keys {
        if !obj.contains_key(*k) {
            return Err(bad(format!("missing field {k}")));
        }
    }
    Ok(())
}

pub fn ints(xs: &[BigInt]) -> Value {
    Value::Array(xs.iter().map(int).collect())
}

fn int_list(v: &Value, len: usize) -> Result<Vec<BigInt>> {
    let a = as_array(v)?;
    if a.len() != len {
        return Err(bad(format!("expected {len} integers, found {}", a.len())));
    }
    a.iter().map(as_int).collect()
}

// --- elements and forms ----------------------------------------------------

pub fn quad_json(a: &QuadInteger) -> Value {
    ints(&[a.x.clone(), a.y.clone()])
}

pub fn quad_from(v: &Value) -> Result<QuadInteger> {
    let xs = int_list(v, 2)?;
    Ok(QuadInteger::new(xs[0].clone(), xs[1].clone()))
}

pub fn form_json(f: &QuadraticForm) -> Value {
    ints(&[f.a.clone(), f.b.clone(), f.c.clone()])
}

pub fn form_from(v: &Value) -> Result<QuadraticForm> {
    let xs = int_list(v, 3)?;
    Ok(QuadraticForm::new(
        xs[0].clone(),
        xs[1].clone(),
        xs[2].clone(),
    ))
}

pub fn torsor_json(t: &TorsorElement) -> Value {
    json!({ "q": t.q, "x": t.x, "y": t.y })
}

pub fn torsor_from(v: &Value, d: Discriminant) -> Result<TorsorElement> {
    expect_keys(v, &["q", "x", "y"])?;
    let q = as_u64(field(v, "q")?)?;
    let (x, y) = (as_u64(field(v, "x")?)?, as_u64(field(v, "y")?)?);
    let t = TorsorGroup::new(d, q)?.element(x, y)?;
    if (t.x, t.y) != (x, y) {
        return Err(bad(format!(
            "torsor element ({x}, {y}) mod {q} is not normalized"
        )));
    }
    Ok(t)
}

// --- curves and subgroups --------------------------------------------------

pub fn lattice_json(l: &Lattice) -> Value {
    Value::Array(l.parts().iter().map(|x| int(x)).collect())
}

pub fn lattice_from(v: &Value) -> Result<Lattice> {
    let xs = int_list(v, 4)?;
    Lattice::from_parts(xs[0].clone(), xs[1].clone(), xs[2].clone(), xs[3].clone())
        .map_err(|e| bad(e.to_string()))
}

pub fn curve_json(e: &CMCurve) -> Value {
    json!({
        "class": form_json(&e.class.form),
        "conductor": int(e.conductor()),
        "lattice": lattice_json(&e.lattice),
    })
}

/// Rebuilds the curve from its lattice and checks the recorded invariants.
pub fn curve_from(v: &Value, d: Discriminant) -> Result<CMCurve> {
    expect_keys(v, &["class", "conductor", "lattice"])?;
    let e = CMCurve::from_lattice(d, lattice_from(field(v, "lattice")?)?)?;
    if as_int(field(v, "conductor")?)? != *e.conductor() {
        return Err(bad(format!(
            "recorded conductor {} but the lattice has conductor {}",
            field(v, "conductor")?,
            e.conductor()
        )));
    }
    if form_from(field(v, "class")?)? != e.class.form {
        return Err(bad(format!(
            "recorded class {} but the lattice has class {}",
            field(v, "class")?,
            e.class.form
        )));
    }
    Ok(e)
}

pub fn subgroup_json(c: &MarkedSubgroup) -> Value {
    json!({
        "coords": c.coords.iter().map(torsor_json).collect::<Vec<_>>(),
        "curve": curve_json(&c.parent),
        "modulus": int(&c.modulus),
        "witness": lattice_json(&c.witness),
    })
}

pub fn subgroup_from(v: &Value, d: Discriminant) -> Result<MarkedSubgroup> {
    expect_keys(v, &["coords", "curve", "modulus", "witness"])?;
    let c = MarkedSubgroup {
        parent: curve_from(field(v, "curve")?, d)?,
        modulus: as_int(field(v, "modulus")?)?,
        coords: as_array(field(v, "coords")?)?
            .iter()
            .map(|t| torsor_from(t, d))
            .collect::<Result<_>>()?,
        witness: lattice_from(field(v, "witness")?)?,
    };
    c.verify()?;
    Ok(c)
}

// --- products and certificates ----------------------------------------------

pub fn product_json(p: &ProductVariety) -> Value {
    let presentation = match &p.presentation {
        None => Value::Null,
        Some(t) => json!({
            "alphas": t.alphas.iter().map(quad_json).collect::<Vec<_>>(),
            "base": subgroup_json(&t.base),
        }),
    };
    json!({
        "disc": p.factors[0].disc.value(),
        "factors": p.factors.iter().map(curve_json).collect::<Vec<_>>(),
        "presentation": presentation,
    })
}

pub fn product_from(v: &Value) -> Result<ProductVariety> {
    expect_keys(v, &["disc", "factors", "presentation"])?;
    let d = Discriminant::new(as_i64(field(v, "disc")?)?)?;
    let factors = as_array(field(v, "factors")?)?
        .iter()
        .map(|e| curve_from(e, d))
        .collect::<Result<Vec<_>>>()?;
    let p = ProductVariety::new(factors)?;
    match field(v, "presentation")? {
        Value::Null => Ok(p),
        t => {
            expect_keys(t, &["alphas", "base"])?;
            let base = subgroup_from(field(t, "base")?, d)?;
            let alphas = as_array(field(t, "alphas")?)?
                .iter()
                .map(quad_from)
                .collect::<Result<Vec<_>>>()?;
            p.with_presentation(&base, &alphas)
        }
    }
}

pub fn product_pair_json(p1: &ProductVariety, p2: &ProductVariety) -> Value {
    json!({ "left": product_json(p1), "right": product_json(p2) })
}

fn opt_form(f: &Option<QuadraticForm>) -> Value {
    f.as_ref().map_or(Value::Null, form_json)
}

pub fn certificate_json(c: &WeakIsoCertificate) -> Value {
    let fast = match &c.fast_path {
        None => Value::Null,
        Some(f) => json!({
            "alpha_product": f.alpha_product.iter().map(torsor_json).collect::<Vec<_>>(),
            "beta_product": f.beta_product.iter().map(torsor_json).collect::<Vec<_>>(),
            "verdict": f.verdict,
        }),
    };
    let rings: Vec<Value> = c
        .oracle_path
        .rings
        .iter()
        .map(|r| {
            json!({
                "conductor": int(&r.conductor),
                "left_count": r.left_count,
                "left_steinitz": opt_form(&r.left_steinitz),
                "right_count": r.right_count,
                "right_steinitz": opt_form(&r.right_steinitz),
            })
        })
        .collect();
    json!({
        "fast_path": fast,
        "inputs_digest": c.inputs_digest,
        "oracle_path": { "rings": rings, "verdict": c.oracle_path.verdict },
        "verdict": c.verdict,
    })
}

fn opt_form_from(v: &Value) -> Result<Option<QuadraticForm>> {
    match v {
        Value::Null => Ok(None),
        f => form_from(f).map(Some),
    }
}

/// Parses a certificate as recorded, without re-deriving anything.
pub fn certificate_from(v: &Value, d: Discriminant) -> Result<WeakIsoCertificate> {
    expect_keys(v, &["fast_path", "inputs_digest", "oracle_path", "verdict"])?;
    let fast_path = match field(v, "fast_path")? {
        Value::Null => None,
        f => {
            expect_keys(f, &["alpha_product", "beta_product", "verdict"])?;
            let elts = |k: &str| -> Result<Vec<TorsorElement>> {
                as_array(field(f, k)?)?
                    .iter()
                    .map(|t| torsor_from(t, d))
                    .collect()
            };
            Some(FastPathRecord {
                alpha_product: elts("alpha_product")?,
                beta_product: elts("beta_product")?,
                verdict: as_bool(field(f, "verdict")?)?,
            })
        }
    };
    let o = field(v, "oracle_path")?;
    expect_keys(o, &["rings", "verdict"])?;
    let rings = as_array(field(o, "rings")?)?
        .iter()
        .map(|r| {
            expect_keys(
                r,
                &[
                    "conductor",
                    "left_count",
                    "left_steinitz",
                    "right_count",
                    "right_steinitz",
                ],
            )?;
            Ok(RingRecord {
                conductor: as_int(field(r, "conductor")?)?,
                left_count: as_u64(field(r, "left_count")?)? as usize,
                right_count: as_u64(field(r, "right_count")?)? as usize,
                left_steinitz: opt_form_from(field(r, "left_steinitz")?)?,
                right_steinitz: opt_form_from(field(r, "right_steinitz")?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WeakIsoCertificate {
        verdict: as_bool(field(v, "verdict")?)?,
        fast_path,
        oracle_path: OracleRecord {
            rings,
            verdict: as_bool(field(o, "verdict")?)?,
        },
        inputs_digest: as_str(field(v, "inputs_digest")?)?.to_string(),
    })
}

/// Row-major nested arrays.
pub fn matrix_json(a: &SymPosDefIntMatrix) -> Value {
    Value::Array(a.entries().iter().map(|r| ints(r)).collect())
}

pub fn matrix_from(v: &Value) -> Result<SymPosDefIntMatrix> {
    let rows = as_array(v)?;
    let m = rows
        .iter()
        .map(|r| as_array(r)?.iter().map(as_int).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    SymPosDefIntMatrix::new(m)
}

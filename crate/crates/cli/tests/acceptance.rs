//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;

use weakiso::analytic;
use weakiso::cm_curves::{descending_chain, quotient, subgroups_of_order, CMCurve};
use weakiso::products::{criterion_fast, oracle_slow, ProductVariety};
use weakiso::psi_map::{
    determinant, enumerate_detl, enumerate_detl_bounded, kernel_order, kernel_order_brute,
    log_exact, smith_normal_form, SymPosDefIntMatrix,
};
use weakiso::qexp::{
    enumerate_bounded_trace, find_witness_matrix, nonvanishing_witness, pullback, FormalQExpansion,
    WitnessOptions,
};
use weakiso::quad_orders::{
    class_group, class_number_formula, Discriminant, QuadInteger, QuadOrder,
};
use weakiso::torsor::TorsorGroup;
use weakiso_cli::{run, EXIT_INTEGRITY, EXIT_OK};

const LIMIT_CRITERION: Duration = Duration::from_secs(60);
const LIMIT_PAIRS: Duration = Duration::from_secs(300);
const LIMIT_QEXP: Duration = Duration::from_secs(120);
const LIMIT_ANALYTIC: Duration = Duration::from_secs(30);
const ANALYTIC_TOL: f64 = 1e-9;
const SNF_SAMPLES: usize = 1000;
const KERNEL_DET_BOUND: u32 = 4; // 3^4 = 81
const WITNESS_SUPPORTS: usize = 100;
const EQUIVARIANCE_SAMPLES: usize = 100;
const RIEMANN_SAMPLES: usize = 50;
const MUTATIONS: usize = 200;

type Outcome = Result<String, String>;

fn d7() -> Discriminant {
    Discriminant::new(-7).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn timed(limit: Duration, start: Instant) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t <= limit, || {
        format!("took {:.1} s, limit {} s", t.as_secs_f64(), limit.as_secs())
    })
}

/// Multisets of size `k` from `0..n`, as nondecreasing index vectors.
fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for m in multisets(n, k - 1) {
        let lo = m.last().copied().unwrap_or(0);
        for i in lo..n {
            let mut v = m.clone();
            v.push(i);
            out.push(v);
        }
    }
    out
}

fn criterion_vs_oracle() -> Outcome {
    let start = Instant::now();
    let e = CMCurve::base(d7());
    let mut checked = 0usize;
    for q in [5u64, 13] {
        let grp = TorsorGroup::new(d7(), q).map_err(|e| e.to_string())?;
        let base = subgroups_of_order(&e, q)
            .map_err(|e| e.to_string())?
            .remove(0);
        let lifts: Vec<QuadInteger> = grp.elements().iter().map(|t| grp.lift(t)).collect();
        let curves: Vec<CMCurve> = lifts
            .iter()
            .map(|a| quotient(&e, &weakiso::cm_curves::apply_endo(a, &base)?))
            .collect::<weakiso::Result<_>>()
            .map_err(|e| e.to_string())?;
        for g in [2usize, 3] {
            let ms = multisets(lifts.len(), g);
            let products: Vec<(Vec<QuadInteger>, ProductVariety)> = ms
                .iter()
                .map(|m| {
                    let p = ProductVariety::new(m.iter().map(|&i| curves[i].clone()).collect())?;
                    Ok((m.iter().map(|&i| lifts[i].clone()).collect(), p))
                })
                .collect::<weakiso::Result<_>>()
                .map_err(|e| e.to_string())?;
            let disagreements: usize = products
                .par_iter()
                .map(|(a1, p1)| {
                    products
                        .iter()
                        .filter(|(a2, p2)| {
                            let fast = criterion_fast(a1, a2, &grp);
                            let slow = oracle_slow(p1, p2);
                            !matches!((fast, slow), (Ok(x), Ok(y)) if x == y)
                        })
                        .count()
                })
                .sum();
            ensure(disagreements == 0, || {
                format!("q={q} g={g}: {disagreements} disagreements")
            })?;
            checked += products.len() * products.len();
        }
    }
    timed(LIMIT_CRITERION, start)?;
    Ok(format!(
        "{checked} product pairs, 0 disagreements, {:.1} s",
        start.elapsed().as_secs_f64()
    ))
}

fn cli(args: &[&str]) -> weakiso_cli::Outcome {
    run(std::iter::once("weakiso").chain(args.iter().copied()))
}

fn result_of(out: &weakiso_cli::Outcome) -> Result<Value, String> {
    let v: Value =
        serde_json::from_str(&out.stdout).map_err(|e| format!("stdout is not JSON: {e}"))?;
    Ok(v["result"].clone())
}

fn counts(v: &Value) -> Vec<u64> {
    v["partner_counts"]
        .as_array()
        .map(|a| a.iter().filter_map(Value::as_u64).collect())
        .unwrap_or_default()
}

fn partner_counts(dir: &Path) -> Outcome {
    let start = Instant::now();
    let mut certs = 0;
    for (g, depth, expected) in [("2", "3", vec![2u64, 4, 8]), ("3", "2", vec![3, 9])] {
        let path = dir.join(format!("pairs_g{g}.json"));
        let path = path.to_str().unwrap();
        let out = cli(&["gen-pairs", "--g", g, "--depth", depth, "--out", path]);
        ensure(out.code == EXIT_OK, || {
            format!("gen-pairs g={g} exited {}: {}", out.code, out.stderr)
        })?;
        let got = counts(&result_of(&out)?);
        ensure(got == expected, || {
            format!("g={g}: partner counts {got:?}, expected {expected:?}")
        })?;
        let check = cli(&["check-weakiso", path]);
        ensure(check.code == EXIT_OK, || {
            format!(
                "check-weakiso g={g} exited {}: {}",
                check.code, check.stderr
            )
        })?;
        let r = result_of(&check)?;
        ensure(counts(&r) == expected, || {
            format!("g={g}: verified counts {:?}", counts(&r))
        })?;
        certs += r["certificates"].as_u64().unwrap_or(0);
    }
    timed(LIMIT_PAIRS, start)?;
    Ok(format!(
        "[2,4,8] and [3,9], {certs} certificates re-verified, {:.1} s",
        start.elapsed().as_secs_f64()
    ))
}

/// Least `f ≥ 1` with `fω·L ⊆ L`, by direct containment tests.
fn conductor_by_containment(e: &CMCurve, limit: u64) -> Option<u64> {
    (1..=limit).find(|&f| {
        e.lattice
            .mul_quad(&QuadInteger::new(0, f), e.disc)
            .map(|m| e.lattice.contains_lattice(&m))
            .unwrap_or(false)
    })
}

fn conductor_law() -> Outcome {
    let inert = [3u64, 5, 13, 17, 19, 31];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..50 {
        let k = rng.gen_range(1..=3);
        let qs: Vec<u64> = inert.choose_multiple(&mut rng, k).copied().collect();
        let mut e = CMCurve::base(d7());
        for &q in &qs {
            let subs = subgroups_of_order(&e, q).map_err(|x| x.to_string())?;
            let c = subs.choose(&mut rng).expect("q + 1 subgroups");
            e = quotient(&e, c).map_err(|x| x.to_string())?;
        }
        let expected: u64 = qs.iter().product();
        let f = conductor_by_containment(&e, expected);
        ensure(
            f == Some(expected) && *e.conductor() == BigInt::from(expected),
            || {
                format!(
                    "chain {trial} through {qs:?}: conductor {f:?} / {}, expected {expected}",
                    e.conductor()
                )
            },
        )?;
    }
    let chain = descending_chain(&CMCurve::base(d7()), 3, 10).map_err(|x| x.to_string())?;
    for (i, c) in chain.curves.iter().enumerate() {
        let expected = 3u64.pow(i as u32);
        let f = conductor_by_containment(c, expected);
        ensure(f == Some(expected), || {
            format!("descending chain step {i}: conductor {f:?}, expected {expected}")
        })?;
    }
    Ok("50 random inert chains, descending 3-chain conductors 3^i for i ≤ 10".into())
}

fn torsor_class_group() -> Outcome {
    let grp = TorsorGroup::new(d7(), 5).map_err(|e| e.to_string())?;
    let torsor = grp.elements().len();
    let subgroups = subgroups_of_order(&CMCurve::base(d7()), 5)
        .map_err(|e| e.to_string())?
        .len();
    let order = QuadOrder::new(d7(), BigInt::from(5)).map_err(|e| e.to_string())?;
    let forms = class_group(&order);
    ensure(
        forms
            .iter()
            .all(|c| c.form.discriminant() == BigInt::from(-175)),
        || "a reduced form has discriminant other than −175".into(),
    )?;
    let formula = class_number_formula(&order);
    ensure(
        torsor == 6
            && grp.order() == 6
            && subgroups == 6
            && forms.len() == 6
            && formula == BigInt::from(6),
        || {
            format!(
                "|G̃_5| = {torsor} (order {}), subgroups {subgroups}, reduced forms {}, formula {formula}",
                grp.order(),
                forms.len()
            )
        },
    )?;
    Ok("|G̃_5| = 6 = q + 1, 6 reduced forms of discriminant −175".into())
}

fn is_unimodular(m: &[Vec<BigInt>]) -> bool {
    determinant(&m.to_vec()).abs().is_one()
}

fn snf_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for t in 0..SNF_SAMPLES {
        let g = rng.gen_range(1..=5);
        let a = analytic::random_pd(&mut rng, g, 4);
        let r = smith_normal_form(&a);
        let chain = r.d.windows(2).all(|w| (&w[1] % &w[0]).is_zero())
            && r.d.iter().all(|x| x.is_positive());
        ensure(r.recompose() == *a.entries(), || {
            format!("sample {t}: UDV ≠ A for {a}")
        })?;
        ensure(is_unimodular(&r.u) && is_unimodular(&r.v), || {
            format!("sample {t}: U or V not unimodular")
        })?;
        ensure(chain, || {
            format!("sample {t}: divisors {:?} not a chain", r.d)
        })?;
    }
    let mut mats: Vec<SymPosDefIntMatrix> = Vec::new();
    mats.extend(enumerate_detl(1, 3, KERNEL_DET_BOUND));
    mats.extend(enumerate_detl(2, 3, KERNEL_DET_BOUND));
    // entries up to 81 are out of reach at g = 3; 9 keeps the count in the hundreds
    mats.extend(enumerate_detl_bounded(3, 3, KERNEL_DET_BOUND, 9));
    mats.extend(enumerate_detl_bounded(3, 2, 6, 8));
    let bad: Vec<String> = mats
        .par_iter()
        .filter_map(|a| {
            let n = a.det();
            let fast = kernel_order(a, &n).ok()?;
            let brute = kernel_order_brute(a, n.to_u64()?);
            (fast != n || brute != n.to_u64()?).then(|| format!("{a}: {fast} / {brute}"))
        })
        .collect();
    ensure(bad.is_empty(), || {
        format!("kernel orders differ: {}", bad.join("; "))
    })?;
    Ok(format!(
        "{SNF_SAMPLES} random factorizations, kernel order brute-forced for {} matrices",
        mats.len()
    ))
}

fn random_expansion(rng: &mut ChaCha8Rng) -> FormalQExpansion {
    let g = rng.gen_range(2..=3);
    let pool = enumerate_bounded_trace(g, 3);
    let size = rng.gen_range(1..=20);
    let mut f = FormalQExpansion::new(g, None).unwrap();
    for q in pool.choose_multiple(rng, size) {
        let mut c = 0;
        while c == 0 {
            c = rng.gen_range(-9..=9);
        }
        f.add_term(q.clone(), BigInt::from(c).into()).unwrap();
    }
    f
}

fn qexp_checks() -> Outcome {
    let start = Instant::now();
    let n = enumerate_bounded_trace(2, 1).len();
    ensure(n == 3, || {
        format!("enumerate_bounded_trace(2, 1) has {n} matrices")
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cases: Vec<(FormalQExpansion, u64, u64)> = (0..WITNESS_SUPPORTS)
        .map(|i| (random_expansion(&mut rng), [2u64, 3][i % 2], i as u64))
        .collect();
    let bad: Vec<String> = cases
        .par_iter()
        .enumerate()
        .filter_map(|(i, (f, ell, seed))| {
            let opts = WitnessOptions {
                seed: *seed,
                ..WitnessOptions::default()
            };
            let s = f.support();
            let check = || -> Result<(), String> {
                let a = find_witness_matrix(&s, *ell, opts).map_err(|e| e.to_string())?;
                ensure(log_exact(&a.det(), *ell).is_some(), || {
                    format!("det {} not a power of {ell}", a.det())
                })?;
                let w = nonvanishing_witness(f, *ell, opts).map_err(|e| e.to_string())?;
                ensure(w.a == a, || "witness used a different A".into())?;
                let others_above = s
                    .iter()
                    .filter(|q| **q != w.q0)
                    .all(|q| q.trace_against(&w.a) > w.n);
                ensure(others_above && w.q0.trace_against(&w.a) == w.n, || {
                    "argmin is not unique".into()
                })?;
                let series = pullback(f, &w.a).map_err(|e| e.to_string())?;
                ensure(series.coeff(&w.n) == w.c0 && w.c0 == f.coeff(&w.q0), || {
                    "leading coefficient mismatch".into()
                })
            };
            check()
                .err()
                .map(|e| format!("support {i} (|S| = {}): {e}", s.len()))
        })
        .collect();
    ensure(bad.is_empty(), || bad.join("; "))?;
    timed(LIMIT_QEXP, start)?;
    Ok(format!(
        "{WITNESS_SUPPORTS} random supports with unique argmin, {:.1} s",
        start.elapsed().as_secs_f64()
    ))
}

fn analytic_checks() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_eq: f64 = 0.0;
    for _ in 0..EQUIVARIANCE_SAMPLES {
        let g = rng.gen_range(1..=3);
        let a = analytic::random_pd(&mut rng, g, 3);
        let sigma = analytic::random_gamma0(&mut rng, a.det().to_i64().unwrap());
        let tau = analytic::random_tau(&mut rng);
        // equivariance_check only returns M after the exact symplectic test
        let (_, r) = analytic::equivariance_check(sigma, tau, &a).map_err(|e| e.to_string())?;
        worst_eq = worst_eq.max(r.max_residual);
    }
    let mut worst_rf: f64 = 0.0;
    for _ in 0..RIEMANN_SAMPLES {
        let g = rng.gen_range(1..=3);
        let a = analytic::random_pd(&mut rng, g, 3);
        let r = analytic::riemann_form_check(analytic::random_tau(&mut rng), &a, ANALYTIC_TOL)
            .map_err(|e| e.to_string())?;
        worst_rf = worst_rf.max(r.max_residual);
    }
    ensure(worst_eq < ANALYTIC_TOL && worst_rf < ANALYTIC_TOL, || {
        format!("max residuals {worst_eq:e} (equivariance), {worst_rf:e} (Riemann form)")
    })?;
    timed(LIMIT_ANALYTIC, start)?;
    Ok(format!(
        "max residuals {worst_eq:.1e} and {worst_rf:.1e} below {ANALYTIC_TOL:e}"
    ))
}

/// Paths to every scalar inside a certificate.
fn certificate_leaves(v: &Value) -> Vec<Vec<Value>> {
    fn walk(v: &Value, path: &mut Vec<Value>, out: &mut Vec<Vec<Value>>) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    path.push(Value::String(k.clone()));
                    walk(x, path, out);
                    path.pop();
                }
            }
            Value::Array(a) => {
                for (i, x) in a.iter().enumerate() {
                    path.push(Value::from(i));
                    walk(x, path, out);
                    path.pop();
                }
            }
            _ => out.push(path.clone()),
        }
    }
    let mut out = Vec::new();
    for (li, level) in v["levels"].as_array().into_iter().flatten().enumerate() {
        for (pi, p) in level["partners"]
            .as_array()
            .into_iter()
            .flatten()
            .enumerate()
        {
            let mut path = vec![
                Value::from("levels"),
                Value::from(li),
                Value::from("partners"),
                Value::from(pi),
                Value::from("certificate"),
            ];
            walk(&p["certificate"], &mut path, &mut out);
        }
    }
    out
}

fn leaf_mut<'a>(v: &'a mut Value, path: &[Value]) -> &'a mut Value {
    path.iter().fold(v, |v, k| match k {
        Value::String(s) => &mut v[s.as_str()],
        k => &mut v[k.as_u64().unwrap() as usize],
    })
}

fn mutate(leaf: &mut Value) {
    *leaf = match leaf.take() {
        Value::Bool(b) => Value::Bool(!b),
        Value::Null => Value::from(0),
        Value::Number(n) => {
            let x: BigInt = n.to_string().parse().unwrap();
            serde_json::from_str(&(x + BigInt::one()).to_string()).unwrap()
        }
        Value::String(s) => {
            let mut c: Vec<char> = s.chars().collect();
            c[0] = if c[0] == '0' { '1' } else { '0' };
            Value::String(c.into_iter().collect())
        }
        other => other,
    };
}

fn integrity_fuzz(dir: &Path) -> Outcome {
    let path = dir.join("pairs_g2.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("bundle from criterion 2 missing: {e}"))?;
    let bundle: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let mut leaves = certificate_leaves(&bundle);
    ensure(leaves.len() >= MUTATIONS, || {
        format!("only {} certificate fields", leaves.len())
    })?;
    leaves.shuffle(&mut ChaCha8Rng::seed_from_u64(8));
    leaves.truncate(MUTATIONS);
    let survivors: Vec<String> = leaves
        .par_iter()
        .enumerate()
        .filter_map(|(i, leaf)| {
            let mut v = bundle.clone();
            mutate(leaf_mut(&mut v, leaf));
            let p = dir.join(format!("mutant_{i}.json"));
            std::fs::write(&p, serde_json::to_string(&v).unwrap()).unwrap();
            let out = cli(&["check-weakiso", p.to_str().unwrap()]);
            (out.code != EXIT_INTEGRITY).then(|| format!("{leaf:?} → exit {}", out.code))
        })
        .collect();
    ensure(survivors.is_empty(), || {
        format!(
            "{} mutations not rejected: {}",
            survivors.len(),
            survivors.join("; ")
        )
    })?;
    // the same through the installed binary
    let bin = std::process::Command::new(env!("CARGO_BIN_EXE_weakiso"))
        .args(["check-weakiso", dir.join("mutant_0.json").to_str().unwrap()])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(bin.status.code() == Some(EXIT_INTEGRITY), || {
        format!("binary exited {:?}", bin.status.code())
    })?;
    Ok(format!(
        "{MUTATIONS} single-field certificate mutations all exit {EXIT_INTEGRITY}"
    ))
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("criterion and oracle agree", Box::new(criterion_vs_oracle)),
        ("partner counts", Box::new(|| partner_counts(dir.path()))),
        ("conductor law", Box::new(conductor_law)),
        ("torsor and class group", Box::new(torsor_class_group)),
        ("Smith normal form", Box::new(snf_checks)),
        ("q-expansion witnesses", Box::new(qexp_checks)),
        ("analytic identities", Box::new(analytic_checks)),
        (
            "certificate integrity",
            Box::new(|| integrity_fuzz(dir.path())),
        ),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

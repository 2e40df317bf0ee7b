//! Command-line front end. Every subcommand prints one JSON document with
//! the result and a run manifest; exit codes are 0 on success, 1 for usage
//! errors, 2 when a search runs out of bound, 3 on integrity failures.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use weakiso::analytic;
use weakiso::pair_generator::{self, GenConfig, SearchBounds};
use weakiso::psi_map::{self, SymPosDefIntMatrix};
use weakiso::qexp::{self, WitnessOptions};
use weakiso::quad_orders::{find_field, Discriminant, FieldQuery, QuadInteger};
use weakiso::torsor::find_q;
use weakiso::wire;
use weakiso::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SEARCH: i32 = 2;
pub const EXIT_INTEGRITY: i32 = 3;

/// Environment variables overriding the default search bounds.
pub const ENV_FIELD_BOUND: &str = "WEAKISO_FIELD_BOUND";
pub const ENV_ELL_BOUND: &str = "WEAKISO_ELL_BOUND";
pub const ENV_Q_BOUND: &str = "WEAKISO_Q_BOUND";

#[derive(Parser, Debug)]
#[command(
    name = "weakiso",
    version,
    about = "Weak isomorphisms of products of CM elliptic curves"
)]
struct Cli {
    /// Worker threads; output does not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Indent the JSON output.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Smallest |d_K| with the given split and inert primes.
    FindField {
        #[arg(long)]
        split: Option<u64>,
        #[arg(long)]
        inert: Option<u64>,
    },
    /// Inert primes q ≡ −1 (mod g) at which α is a g-th power.
    FindPrimes {
        #[arg(long, allow_hyphen_values = true)]
        d: i64,
        #[arg(long)]
        g: u64,
        /// α = x + yω, given as `x,y`.
        #[arg(long, allow_hyphen_values = true)]
        alpha: String,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Generate certified weakly isomorphic pairs and write a bundle.
    GenPairs(GenPairs),
    /// Re-verify every certificate in a bundle.
    CheckWeakiso { bundle: PathBuf },
    /// Smith normal form of an integer matrix given as JSON rows.
    Snf { matrix: PathBuf },
    /// Pull a formal q-expansion back along τ ↦ τA.
    QexpPullback { f: PathBuf, a: PathBuf },
    /// A ∈ Det_{ℓ,g} isolating one term of a q-expansion.
    QexpWitness {
        f: PathBuf,
        #[arg(long)]
        ell: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Random equivariance and Riemann-form checks.
    AnalyticCheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 2)]
        g: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct GenPairs {
    #[arg(long)]
    g: usize,
    #[arg(long)]
    depth: usize,
    /// `auto` or a prime splitting as αᾱ.
    #[arg(long, default_value = "auto")]
    ell: String,
    /// A prime required to split in K.
    #[arg(long)]
    p: Option<u64>,
    /// JSON rows, or a path to a file holding them.
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    a_prime: Option<String>,
    /// Randomizes the basepoints; canonical when absent.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit code and the text written to stdout and stderr.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SearchExhausted { .. } => EXIT_SEARCH,
            Error::Integrity(_) => EXIT_INTEGRITY,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: msg.into(),
    }
}

/// Inputs, outputs and settings of one run; rerunning it reproduces the
/// same output bytes.
struct Manifest {
    command: &'static str,
    config: Value,
    seed: Option<u64>,
    inputs: serde_json::Map<String, Value>,
    outputs: serde_json::Map<String, Value>,
}

impl Manifest {
    fn new(command: &'static str, config: Value, seed: Option<u64>) -> Self {
        Manifest {
            command,
            config,
            seed,
            inputs: serde_json::Map::new(),
            outputs: serde_json::Map::new(),
        }
    }

    fn read(&mut self, path: &Path) -> Result<String, Failure> {
        let text =
            fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        self.inputs.insert(
            path.display().to_string(),
            Value::String(sha256(text.as_bytes())),
        );
        Ok(text)
    }

    fn to_json(&self) -> Value {
        json!({
            "command": self.command,
            "config": self.config,
            "input_digests": self.inputs,
            "output_digests": self.outputs,
            "seed": self.seed,
            "version": VERSION,
        })
    }
}

fn sha256(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

fn parse_json(text: &str, what: &str) -> Result<Value, Failure> {
    serde_json::from_str(text).map_err(|e| usage(format!("{what}: {e}")))
}

fn env_bound(name: &str, default: u64) -> Result<u64, Failure> {
    match std::env::var(name) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("{name}={v} is not a bound"))),
        Err(_) => Ok(default),
    }
}

fn bounds() -> Result<SearchBounds, Failure> {
    let d = SearchBounds::default();
    Ok(SearchBounds {
        field: env_bound(ENV_FIELD_BOUND, d.field)?,
        ell: env_bound(ENV_ELL_BOUND, d.ell)?,
        q: env_bound(ENV_Q_BOUND, d.q)?,
    })
}

fn matrix_arg(m: &mut Manifest, arg: &str) -> Result<SymPosDefIntMatrix, Failure> {
    let text = if arg.trim_start().starts_with('[') {
        arg.to_string()
    } else {
        m.read(Path::new(arg))?
    };
    Ok(pair_generator::parse_matrix(&text)?)
}

fn find_field_cmd(split: Option<u64>, inert: Option<u64>) -> Result<(Manifest, Value), Failure> {
    let b = bounds()?;
    let m = Manifest::new(
        "find-field",
        json!({ "bound": b.field, "inert": inert, "split": split }),
        None,
    );
    let d = find_field(FieldQuery { split, inert }, b.field)?;
    Ok((m, json!({ "disc": d.value() })))
}

fn find_primes_cmd(
    d: i64,
    g: u64,
    alpha: &str,
    count: usize,
) -> Result<(Manifest, Value), Failure> {
    let b = bounds()?;
    let m = Manifest::new(
        "find-primes",
        json!({ "alpha": alpha, "bound": b.q, "count": count, "d": d, "g": g }),
        None,
    );
    let (x, y) = alpha
        .split_once(',')
        .and_then(|(x, y)| Some((x.trim().parse::<i64>().ok()?, y.trim().parse::<i64>().ok()?)))
        .ok_or_else(|| usage(format!("--alpha {alpha}: expected `x,y`")))?;
    let disc = Discriminant::new(d)?;
    let qs = find_q(disc, g, &QuadInteger::new(x, y), count, b.q)?;
    Ok((m, json!({ "qs": qs })))
}

fn gen_pairs_cmd(args: &GenPairs) -> Result<(Manifest, Value), Failure> {
    let ell = match args.ell.as_str() {
        "auto" => None,
        s => Some(
            s.parse::<u64>()
                .map_err(|_| usage(format!("--ell {s}: expected `auto` or a prime")))?,
        ),
    };
    let mut cfg = GenConfig::new(args.g, args.depth);
    cfg.p = args.p;
    cfg.ell = ell;
    cfg.seed = args.seed;
    cfg.bounds = bounds()?;
    let mut m = Manifest::new(
        "gen-pairs",
        json!({
            "a": args.a,
            "a_prime": args.a_prime,
            "bounds": { "ell": cfg.bounds.ell, "field": cfg.bounds.field, "q": cfg.bounds.q },
            "depth": args.depth,
            "ell": args.ell,
            "g": args.g,
            "out": args.out.as_ref().map(|p| p.display().to_string()),
            "p": args.p,
        }),
        args.seed,
    );
    let a = args
        .a
        .as_deref()
        .map(|s| matrix_arg(&mut m, s))
        .transpose()?;
    let a_prime = args
        .a_prime
        .as_deref()
        .map(|s| matrix_arg(&mut m, s))
        .transpose()?;
    let family = pair_generator::generate(&cfg, a, a_prime)?;
    let bundle = pair_generator::family_json(&family);
    let text = wire::canonical_string(&bundle);
    let digest = sha256(text.as_bytes());
    let mut result = json!({
        "a": wire::matrix_json(&family.a),
        "a_prime": wire::matrix_json(&family.a_prime),
        "bundle_digest": digest,
        "disc": family.setup.disc.value(),
        "ell": family.setup.ell,
        "partner_counts": family.partner_counts(),
        "qs": family.setup.qs,
    });
    match &args.out {
        Some(path) => {
            fs::write(path, &text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            m.outputs
                .insert(path.display().to_string(), Value::String(digest));
        }
        None => {
            result["bundle"] = bundle;
        }
    }
    Ok((m, result))
}

/// Every failure to verify a bundle, including a malformed one, is an
/// integrity failure.
fn check_weakiso_cmd(path: &Path) -> Result<(Manifest, Value), Failure> {
    let mut m = Manifest::new(
        "check-weakiso",
        json!({ "bundle": path.display().to_string() }),
        None,
    );
    let text = m.read(path)?;
    let integrity = |message: String| Failure {
        code: EXIT_INTEGRITY,
        message,
    };
    let v: Value =
        serde_json::from_str(&text).map_err(|e| integrity(format!("bundle is not JSON: {e}")))?;
    let report = pair_generator::verify_bundle(&v).map_err(|e| integrity(e.to_string()))?;
    Ok((
        m,
        json!({
            "certificates": report.certificates,
            "partner_counts": report.partner_counts,
            "valid": true,
        }),
    ))
}

fn snf_cmd(path: &Path) -> Result<(Manifest, Value), Failure> {
    let mut m = Manifest::new("snf", json!({ "matrix": path.display().to_string() }), None);
    let v = parse_json(&m.read(path)?, "matrix")?;
    let rows = wire::as_array(&v).map_err(|_| usage("matrix must be an array of rows"))?;
    let a = rows
        .iter()
        .map(|r| {
            wire::as_array(r)
                .and_then(|r| r.iter().map(wire::as_int).collect::<Result<Vec<_>, _>>())
                .map_err(|_| usage("matrix rows must be integer arrays"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let r = psi_map::snf(&a)?;
    let ints = |m: &psi_map::IntMatrix| -> Value {
        Value::Array(m.iter().map(|row| wire::ints(row)).collect())
    };
    Ok((
        m,
        json!({
            "d": ints(&r.diagonal()),
            "divisors": wire::ints(&r.d),
            "u": ints(&r.u),
            "v": ints(&r.v),
        }),
    ))
}

fn expansion_arg(m: &mut Manifest, path: &Path) -> Result<qexp::FormalQExpansion, Failure> {
    let v = parse_json(&m.read(path)?, "q-expansion")?;
    Ok(qexp::expansion_from(&v)?)
}

fn qexp_pullback_cmd(f: &Path, a: &Path) -> Result<(Manifest, Value), Failure> {
    let mut m = Manifest::new(
        "qexp-pullback",
        json!({ "a": a.display().to_string(), "f": f.display().to_string() }),
        None,
    );
    let fx = expansion_arg(&mut m, f)?;
    let am = matrix_arg(&mut m, &a.display().to_string())?;
    let s = qexp::pullback(&fx, &am)?;
    Ok((m, qexp::series_json(&s)))
}

fn qexp_witness_cmd(f: &Path, ell: u64, seed: u64) -> Result<(Manifest, Value), Failure> {
    let mut m = Manifest::new(
        "qexp-witness",
        json!({ "ell": ell, "f": f.display().to_string() }),
        Some(seed),
    );
    let fx = expansion_arg(&mut m, f)?;
    let opts = WitnessOptions {
        seed,
        ..WitnessOptions::default()
    };
    let w = qexp::nonvanishing_witness(&fx, ell, opts)?;
    Ok((m, qexp::witness_json(&w)))
}

fn analytic_cmd(trials: usize, g: usize, seed: u64) -> Result<(Manifest, Value), Failure> {
    use num_traits::ToPrimitive;
    use rayon::prelude::*;

    if g == 0 {
        return Err(usage("--g must be positive"));
    }
    let m = Manifest::new(
        "analytic-check",
        json!({ "g": g, "trials": trials }),
        Some(seed),
    );
    let run = |t: usize| -> Result<(f64, f64), Error> {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let a = analytic::random_pd(&mut rng, g, 3);
        let n = a
            .det()
            .to_i64()
            .ok_or_else(|| Error::InvalidInput("det A too large".into()))?;
        let sigma = analytic::random_gamma0(&mut rng, n);
        let (_, eq) = analytic::equivariance_check(sigma, analytic::random_tau(&mut rng), &a)?;
        let rf =
            analytic::riemann_form_check(analytic::random_tau(&mut rng), &a, analytic::TOLERANCE)?;
        Ok((eq.max_residual, rf.max_residual))
    };
    let results = (0..trials)
        .into_par_iter()
        .map(run)
        .collect::<Result<Vec<_>, _>>()?;
    let eq = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let rf = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let passed = eq < analytic::TOLERANCE && rf < analytic::TOLERANCE;
    let report = json!({
        "equivariance": { "max_residual": eq, "passed": eq < analytic::TOLERANCE },
        "passed": passed,
        "precision": "f64",
        "riemann_form": { "max_residual": rf, "passed": rf < analytic::TOLERANCE },
        "tolerance": analytic::TOLERANCE,
        "trials": trials,
    });
    if !passed {
        return Err(Failure {
            code: EXIT_INTEGRITY,
            message: format!("analytic residual above tolerance: {report}"),
        });
    }
    Ok((m, report))
}

fn dispatch(cmd: &Command) -> Result<(Manifest, Value), Failure> {
    match cmd {
        Command::FindField { split, inert } => find_field_cmd(*split, *inert),
        Command::FindPrimes { d, g, alpha, count } => find_primes_cmd(*d, *g, alpha, *count),
        Command::GenPairs(args) => gen_pairs_cmd(args),
        Command::CheckWeakiso { bundle } => check_weakiso_cmd(bundle),
        Command::Snf { matrix } => snf_cmd(matrix),
        Command::QexpPullback { f, a } => qexp_pullback_cmd(f, a),
        Command::QexpWitness { f, ell, seed } => qexp_witness_cmd(f, *ell, *seed),
        Command::AnalyticCheck { trials, g, seed } => analytic_cmd(*trials, *g, *seed),
    }
}

fn render(v: &Value, pretty: bool) -> String {
    if pretty {
        serde_json::to_string_pretty(v).expect("serializable")
    } else {
        wire::canonical_string(v)
    }
}

/// Runs one command line; `argv[0]` is the program name.
pub fn run<I, S>(argv: I) -> Outcome
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Outcome {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            } else {
                Outcome {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            };
        }
    };
    let result = match cli.jobs {
        Some(0) => Err(usage("--jobs must be positive")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command)),
            Err(e) => Err(usage(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli.command),
    };
    match result {
        Ok((mut manifest, value)) => {
            manifest
                .outputs
                .insert("result".into(), Value::String(wire::digest(&value)));
            let doc = json!({ "manifest": manifest.to_json(), "result": value });
            Outcome {
                code: EXIT_OK,
                stdout: render(&doc, cli.pretty) + "\n",
                stderr: String::new(),
            }
        }
        Err(f) => {
            let kind = match f.code {
                EXIT_SEARCH => "search_failure",
                EXIT_INTEGRITY => "integrity_failure",
                _ => "usage",
            };
            let doc = json!({ "error": { "kind": kind, "message": f.message } });
            Outcome {
                code: f.code,
                stdout: render(&doc, cli.pretty) + "\n",
                stderr: format!("weakiso: {}\n", f.message),
            }
        }
    }
}

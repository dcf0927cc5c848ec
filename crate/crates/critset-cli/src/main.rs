//! `critset`: exact universality-criterion computations for totally positive
//! definite quadratic forms over Q and real quadratic fields.
//!
//! Every result is a bounded certificate and says so: truants, witnesses,
//! and candidate criterion sets all carry the norm bound they were verified
//! to. Exit code 0 is success, 2 invalid input, 3 inconclusive at the
//! requested bounds.

mod cache;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use std::io::Write;
use std::path::PathBuf;

use critset_core::criterion::{
    certify_critical, check_dominated_integrality, check_factor_condition, criterion_candidates,
    escalate_witness, exception_form, is_inert, truants, CertifyOutcome, DominatedMode,
    EscalationOutcome, XClass,
};
use critset_core::elements::{
    class_of, enumerate_classes_filtered, indec_sequence, is_indecomposable, is_squarefree,
};
use critset_core::sspec::SSpec;
use critset_core::wire;
use critset_core::ztree;
use critset_core::FieldCtx;

use cache::{resolve_cache_dir, Cache};

const EXIT_OK: i32 = 0;
const EXIT_BAD_INPUT: i32 = 2;
const EXIT_INCONCLUSIVE: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(
    name = "critset",
    version,
    about = "criterion sets, truants, and escalation witnesses for totally positive quadratic forms"
)]
struct Cli {
    /// Base field: "Q" or "Qsqrt:D"
    #[arg(long, global = true, default_value = "Q")]
    field: String,
    /// Cache directory (default: $CRITSET_CACHE or ./.critset-cache)
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Recompute and cross-check against any cached result
    #[arg(long, global = true)]
    no_cache: bool,
    /// Worker threads for parallel stages
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    /// Write output to a file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Field constants: generator, discriminant, fundamental unit
    FieldInfo,
    /// Square classes of norm at most the bound
    Classes(ClassesArgs),
    /// A window of the ordered indecomposable sequence (degree 2)
    Indec(IndecArgs),
    /// Element squarefreeness with witness
    Squarefree {
        /// Element ("a+b*w" or JSON)
        #[arg(long)]
        x: String,
    },
    /// Minimal-norm non-represented classes of a form
    Truant(TruantArgs),
    /// Exact representation test with witness vector
    Represents {
        /// Form ("diag:..." or JSON)
        #[arg(long)]
        form: String,
        /// Target element
        #[arg(long)]
        target: String,
    },
    /// Orthogonal escalation from a start form against a target class
    Escalate(EscalateArgs),
    /// Bounded criticality certification of one class
    Critical(CriticalArgs),
    /// Criterion-set candidates at a norm bound
    Criterion(CriterionArgs),
    /// The explicit diagonal form missing exactly one squarefree
    /// indecomposable class (degree 2)
    ExceptionForm(ExceptionArgs),
    /// Hypothesis checkers for rational-integer criticality transfer
    #[command(subcommand)]
    CheckHyp(HypCommand),
    /// Escalation tree over Z with canonical reduction
    Ztree(ZtreeArgs),
    /// Re-verify a stored critical witness
    VerifyWitness {
        /// Path to a witness JSON file, or "-" for stdin
        #[arg(long)]
        witness: String,
    },
}

#[derive(Args, Debug)]
struct ClassesArgs {
    #[arg(long)]
    bound: u64,
    /// Optional filter: squarefree | indecomposable | squarefree-indecomposable
    #[arg(long)]
    filter: Option<String>,
}

#[derive(Args, Debug)]
struct IndecArgs {
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    lo: i64,
    #[arg(long, default_value_t = 4, allow_negative_numbers = true)]
    hi: i64,
}

#[derive(Args, Debug)]
struct TruantArgs {
    #[arg(long)]
    form: String,
    /// Target set: all | squarefree | rational-integers
    #[arg(long, default_value = "all")]
    s: String,
    #[arg(long, default_value_t = 100)]
    bound: u64,
}

#[derive(Args, Debug)]
struct EscalateArgs {
    #[arg(long)]
    form: String,
    /// Target class (element shorthand or JSON)
    #[arg(long)]
    alpha: String,
    #[arg(long, default_value = "diag", visible_alias = "X")]
    x: String,
    #[arg(long, default_value = "all")]
    s: String,
    #[arg(long)]
    verify_bound: u64,
    #[arg(long, default_value_t = 256)]
    max_steps: usize,
}

#[derive(Args, Debug)]
struct CriticalArgs {
    #[arg(long)]
    alpha: String,
    #[arg(long, default_value = "diag", visible_alias = "X")]
    x: String,
    #[arg(long)]
    verify_bound: u64,
    #[arg(long, default_value_t = 256)]
    max_steps: usize,
}

#[derive(Args, Debug)]
struct CriterionArgs {
    #[arg(long, default_value = "diag", visible_alias = "X")]
    x: String,
    #[arg(long)]
    norm_bound: u64,
    /// Defaults to 4 * norm_bound
    #[arg(long)]
    verify_bound: Option<u64>,
    #[arg(long, default_value_t = 256)]
    max_steps: usize,
}

#[derive(Args, Debug)]
struct ExceptionArgs {
    /// The squarefree indecomposable class (element shorthand or JSON)
    #[arg(long)]
    beta: String,
    /// Verify the construction up to this norm bound
    #[arg(long)]
    verify_bound: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum HypCommand {
    /// Everything dominated by n (elements or squares) must be rational
    Dominated {
        #[arg(long)]
        n: String,
        /// elements | squares
        #[arg(long, default_value = "elements")]
        mode: String,
    },
    /// Square divisors of m must be unit multiples of rational integers
    Factor {
        #[arg(long)]
        m: u64,
    },
    /// Inertness of a rational prime
    Inert {
        #[arg(long)]
        p: u64,
    },
}

#[derive(Args, Debug)]
struct ZtreeArgs {
    #[arg(long, default_value = "cl", visible_alias = "X")]
    x: String,
    #[arg(long, default_value_t = 4)]
    max_rank: usize,
    #[arg(long, default_value_t = 2000)]
    probe_bound: u64,
}

fn parse_sspec(s: &str) -> Result<SSpec> {
    match s {
        "all" => Ok(SSpec::All),
        "squarefree" => Ok(SSpec::Squarefree),
        "rational-integers" => Ok(SSpec::RationalIntegers),
        other => Err(anyhow!("unknown set spec {other:?} (all | squarefree | rational-integers)")),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.max(1))
        .build_global()
    {
        eprintln!("warning: worker pool setup failed ({e}); using defaults");
    }
    match run(&cli) {
        Ok((payload, exit)) => {
            let rendered = match payload {
                Payload::Json(v) => serde_json::to_string_pretty(&v).expect("render") + "\n",
                Payload::Text(t) => t,
            };
            if let Some(path) = &cli.out {
                if let Err(e) = std::fs::write(path, rendered) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    std::process::exit(EXIT_BAD_INPUT);
                }
            } else {
                print!("{rendered}");
                let _ = std::io::stdout().flush();
            }
            std::process::exit(exit);
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(EXIT_BAD_INPUT);
        }
    }
}

enum Payload {
    Json(Value),
    Text(String),
}

fn run(cli: &Cli) -> Result<(Payload, i32)> {
    let field = wire::parse_field(&cli.field)?;
    let request = request_descriptor(cli)?;
    let cache = Cache::new(resolve_cache_dir(cli.cache_dir.clone()));

    // CSV output and witness verification are not cached
    let cacheable = cli.format == OutputFormat::Json
        && !matches!(cli.command, Command::VerifyWitness { .. });
    if cacheable && !cli.no_cache {
        if let Some(hit) = cache.lookup(&request) {
            let exit = hit.get("exit").and_then(Value::as_i64).unwrap_or(0) as i32;
            let body = hit.get("body").cloned().unwrap_or(Value::Null);
            return Ok((Payload::Json(body), exit));
        }
    }

    let (payload, exit) = dispatch(cli, &field)?;
    if cacheable {
        if let Payload::Json(body) = &payload {
            let result = json!({"body": body, "exit": exit});
            if cli.no_cache {
                cache.cross_check(&request, &result);
            } else {
                let _ = cache.store(&request, &result);
            }
        }
    }
    Ok((payload, exit))
}

/// Canonical request descriptor; worker count and output routing are
/// excluded because they never change results.
fn request_descriptor(cli: &Cli) -> Result<Value> {
    let cmd = match &cli.command {
        Command::FieldInfo => json!({"command": "field-info"}),
        Command::Classes(a) => json!({"command": "classes", "bound": a.bound, "filter": a.filter}),
        Command::Indec(a) => json!({"command": "indec", "lo": a.lo, "hi": a.hi}),
        Command::Squarefree { x } => json!({"command": "squarefree", "x": x}),
        Command::Truant(a) => {
            json!({"command": "truant", "form": a.form, "s": a.s, "bound": a.bound})
        }
        Command::Represents { form, target } => {
            json!({"command": "represents", "form": form, "target": target})
        }
        Command::Escalate(a) => json!({
            "command": "escalate", "form": a.form, "alpha": a.alpha, "x": a.x, "s": a.s,
            "verify_bound": a.verify_bound, "max_steps": a.max_steps
        }),
        Command::Critical(a) => json!({
            "command": "critical", "alpha": a.alpha, "x": a.x,
            "verify_bound": a.verify_bound, "max_steps": a.max_steps
        }),
        Command::Criterion(a) => json!({
            "command": "criterion", "x": a.x, "norm_bound": a.norm_bound,
            "verify_bound": a.verify_bound, "max_steps": a.max_steps
        }),
        Command::ExceptionForm(a) => {
            json!({"command": "exception-form", "beta": a.beta, "verify_bound": a.verify_bound})
        }
        Command::CheckHyp(h) => match h {
            HypCommand::Dominated { n, mode } => {
                json!({"command": "check-hyp-dominated", "n": n, "mode": mode})
            }
            HypCommand::Factor { m } => json!({"command": "check-hyp-factor", "m": m}),
            HypCommand::Inert { p } => json!({"command": "check-hyp-inert", "p": p}),
        },
        Command::Ztree(a) => json!({
            "command": "ztree", "x": a.x, "max_rank": a.max_rank, "probe_bound": a.probe_bound
        }),
        Command::VerifyWitness { witness } => json!({"command": "verify-witness", "witness": witness}),
    };
    let mut v = cmd;
    v.as_object_mut()
        .unwrap()
        .insert("field".to_string(), Value::String(cli.field.clone()));
    Ok(v)
}

fn dispatch(cli: &Cli, k: &FieldCtx) -> Result<(Payload, i32)> {
    match &cli.command {
        Command::FieldInfo => {
            let body = json!({
                "field": wire::field_to_json(k),
                "degree": k.degree(),
                "omega_mode": k.omega_mode().map(wire::omega_mode_tag),
                "discriminant": wire::int_to_json(&k.discriminant()),
                "fundamental_unit": wire::elem_to_json(&k.fund_unit()),
                "fundamental_unit_norm": k.fund_unit_norm(),
            });
            Ok((Payload::Json(body), EXIT_OK))
        }
        Command::Classes(a) => {
            let classes = match a.filter.as_deref() {
                None => enumerate_classes_filtered(k, a.bound, |_, _| true),
                Some("squarefree") => enumerate_classes_filtered(k, a.bound, |k, c| {
                    is_squarefree(k, c.rep()).map(|r| r.squarefree).unwrap_or(false)
                }),
                Some("indecomposable") => enumerate_classes_filtered(k, a.bound, |k, c| {
                    is_indecomposable(k, c.rep()).map(|r| r.indecomposable).unwrap_or(false)
                }),
                Some("squarefree-indecomposable") => {
                    critset_core::elements::squarefree_indecomposable_classes(k, a.bound)
                }
                Some(other) => return Err(anyhow!("unknown filter {other:?}")),
            };
            if cli.format == OutputFormat::Csv {
                return Ok((Payload::Text(wire::classes_to_csv(k, &classes)), EXIT_OK));
            }
            let body = json!({
                "field": wire::field_to_json(k),
                "bound": a.bound,
                "count": classes.len(),
                "classes": classes.iter().map(wire::class_to_json).collect::<Vec<_>>(),
            });
            Ok((Payload::Json(body), EXIT_OK))
        }
        Command::Indec(a) => {
            let seq = indec_sequence(k, a.lo, a.hi)?;
            Ok((Payload::Json(wire::indec_sequence_to_json(k, &seq)), EXIT_OK))
        }
        Command::Squarefree { x } => {
            let elem = wire::parse_element(x)?;
            let r = is_squarefree(k, &elem)?;
            let body = json!({
                "field": wire::field_to_json(k),
                "x": wire::elem_to_json(&elem),
                "squarefree": r.squarefree,
                "witness": r.witness.as_ref().map(wire::elem_to_json).unwrap_or(Value::Null),
            });
            Ok((Payload::Json(body), EXIT_OK))
        }
        Command::Truant(a) => {
            let form = wire::parse_form(k, &a.form)?;
            let s = parse_sspec(&a.s)?;
            let report = truants(&form, &s, a.bound);
            let body = json!({
                "field": wire::field_to_json(k),
                "form": wire::form_to_json(&form),
                "report": wire::truant_report_to_json(&report),
            });
            Ok((Payload::Json(body), EXIT_OK))
        }
        Command::Represents { form, target } => {
            let form = wire::parse_form(k, form)?;
            let t = wire::parse_element(target)?;
            let witness = form.represents(&t)?;
            let body = json!({
                "field": wire::field_to_json(k),
                "form": wire::form_to_json(&form),
                "target": wire::elem_to_json(&t),
                "represented": witness.is_some(),
                "witness": witness
                    .map(|w| Value::Array(w.iter().map(wire::elem_to_json).collect()))
                    .unwrap_or(Value::Null),
            });
            Ok((Payload::Json(body), EXIT_OK))
        }
        Command::Escalate(a) => {
            let form = wire::parse_form(k, &a.form)?;
            let alpha = class_of(k, &wire::parse_element(&a.alpha)?)?;
            let s = parse_sspec(&a.s)?;
            let x = XClass::parse(&a.x)?;
            match escalate_witness(&form, &alpha, &s, x, a.verify_bound, a.max_steps)? {
                EscalationOutcome::Certified(w) => {
                    Ok((Payload::Json(wire::witness_to_json(&w)), EXIT_OK))
                }
                EscalationOutcome::Exhausted { partial_trail, steps } => {
                    let body = json!({
                        "status": "inconclusive",
                        "reason": format!("max_steps = {} exhausted", a.max_steps),
                        "steps": steps,
                        "partial_trail": partial_trail.iter().map(wire::class_to_json).collect::<Vec<_>>(),
                    });
                    Ok((Payload::Json(body), EXIT_INCONCLUSIVE))
                }
            }
        }
        Command::Critical(a) => {
            let alpha = class_of(k, &wire::parse_element(&a.alpha)?)?;
            let x = XClass::parse(&a.x)?;
            match certify_critical(k, &alpha, x, a.verify_bound, a.max_steps)? {
                CertifyOutcome::Certified(w) => {
                    let body = json!({"status": "certified", "witness": wire::witness_to_json(&w)});
                    Ok((Payload::Json(body), EXIT_OK))
                }
                CertifyOutcome::RejectedNonSquarefree { alpha, witness } => {
                    let body = json!({
                        "status": "rejected-non-squarefree",
                        "alpha": wire::class_to_json(&alpha),
                        "witness": wire::elem_to_json(&witness),
                    });
                    Ok((Payload::Json(body), EXIT_OK))
                }
                CertifyOutcome::Inconclusive { alpha, tried, note } => {
                    let body = json!({
                        "status": "inconclusive",
                        "alpha": wire::class_to_json(&alpha),
                        "tried": tried,
                        "note": note.map(Value::String).unwrap_or(Value::Null),
                    });
                    Ok((Payload::Json(body), EXIT_INCONCLUSIVE))
                }
            }
        }
        Command::Criterion(a) => {
            let x = XClass::parse(&a.x)?;
            let verify = a.verify_bound.unwrap_or(4 * a.norm_bound);
            let cand = criterion_candidates(k, x, a.norm_bound, verify, a.max_steps)?;
            Ok((Payload::Json(wire::candidate_to_json(k, &cand)), EXIT_OK))
        }
        Command::ExceptionForm(a) => {
            let beta = class_of(k, &wire::parse_element(&a.beta)?)?;
            let form = exception_form(k, &beta)?;
            let verification = match a.verify_bound {
                None => Value::Null,
                Some(b) => {
                    let missing = form.non_represented_up_to(&SSpec::All, b);
                    json!({
                        "bound": b,
                        "missing": missing.iter().map(wire::class_to_json).collect::<Vec<_>>(),
                        "misses_exactly_beta": missing.len() == 1 && missing[0] == beta,
                    })
                }
            };
            let body = json!({
                "field": wire::field_to_json(k),
                "beta": wire::class_to_json(&beta),
                "form": wire::form_to_json(&form),
                "verification": verification,
            });
            Ok((Payload::Json(body), EXIT_OK))
        }
        Command::CheckHyp(h) => {
            let body = match h {
                HypCommand::Dominated { n, mode } => {
                    let n = wire::parse_element(n)?;
                    let mode = match mode.as_str() {
                        "elements" => DominatedMode::Elements,
                        "squares" => DominatedMode::Squares,
                        other => return Err(anyhow!("unknown mode {other:?}")),
                    };
                    let r = check_dominated_integrality(k, &n, mode)?;
                    json!({
                        "check": "dominated",
                        "field": wire::field_to_json(k),
                        "n": wire::elem_to_json(&n),
                        "holds": r.holds,
                        "witness": r.witness.as_ref().map(wire::elem_to_json).unwrap_or(Value::Null),
                    })
                }
                HypCommand::Factor { m } => {
                    let r = check_factor_condition(k, *m)?;
                    json!({
                        "check": "factor",
                        "field": wire::field_to_json(k),
                        "m": m,
                        "holds": r.holds,
                        "via_inertness": r.via_inertness,
                        "counterexample": r.counterexample.as_ref().map(wire::elem_to_json).unwrap_or(Value::Null),
                    })
                }
                HypCommand::Inert { p } => json!({
                    "check": "inert",
                    "field": wire::field_to_json(k),
                    "p": p,
                    "inert": is_inert(k, *p),
                }),
            };
            Ok((Payload::Json(body), EXIT_OK))
        }
        Command::Ztree(a) => {
            let x = XClass::parse(&a.x)?;
            let tree = ztree::build_tree(x, a.max_rank, a.probe_bound)?;
            if cli.format == OutputFormat::Csv {
                return Ok((Payload::Text(wire::tree_to_csv(&tree)), EXIT_OK));
            }
            Ok((Payload::Json(wire::tree_to_json(&tree)), EXIT_OK))
        }
        Command::VerifyWitness { witness } => {
            let raw = if witness == "-" {
                let mut buf = String::new();
                std::io::Read::read_to_string(&mut std::io::stdin(), &mut buf)?;
                buf
            } else {
                std::fs::read_to_string(witness)?
            };
            let v: Value = serde_json::from_str(&raw)?;
            let w = wire::witness_from_json(&v)?;
            let report = verify_witness(&w);
            let ok = report
                .get("valid")
                .and_then(Value::as_bool)
                .unwrap_or(false);
            Ok((Payload::Json(report), if ok { EXIT_OK } else { 1 }))
        }
    }
}

/// Re-runs every check a stored witness claims: validity of the form, exact
/// omission of the target, completeness up to the stated bound, and the
/// escalation norm chain.
fn verify_witness(w: &critset_core::criterion::CriticalWitness) -> Value {
    let mut failures: Vec<String> = Vec::new();
    if let Err(e) = w.witness_form.validate() {
        failures.push(format!("form fails validation: {e}"));
    }
    if !w.x.admits(&w.witness_form) {
        failures.push(format!("form is not an {}-form", w.x.tag()));
    }
    match w.witness_form.represents(w.alpha.rep()) {
        Ok(Some(_)) => failures.push("form represents its target class".to_string()),
        Ok(None) => {}
        Err(e) => failures.push(format!("representation check failed: {e}")),
    }
    let missing = w
        .witness_form
        .non_represented_up_to(&SSpec::All, w.verified_bound);
    for c in &missing {
        if c != &w.alpha {
            failures.push(format!("class {c} of norm {} is missed", c.norm()));
        }
    }
    if !missing.iter().any(|c| c == &w.alpha) {
        failures.push("target class not within the verified bound".to_string());
    }
    for b in &w.escalation_trail {
        if b.norm() < w.alpha.norm() {
            failures.push(format!("trail class {b} has norm below the target"));
        }
    }
    json!({
        "valid": failures.is_empty(),
        "verified_bound": w.verified_bound,
        "failures": failures,
    })
}

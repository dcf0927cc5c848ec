//! JSON wire formats and CLI shorthand parsing.
//!
//! Integers outside the 64-bit range travel as decimal strings; everything
//! else is plain JSON. Emission goes through `serde_json`'s sorted-key maps,
//! and [`canonical_json`] renders a value compactly for cache keys.

use num_bigint::BigInt;
use serde_json::{json, Map, Value};

use crate::criterion::{
    ClosureReport, CriterionCandidate, CriticalWitness, TruantReport, WitnessStatus, XClass,
};
use crate::elements::{class_of, IndecSequence, SquareClass};
use crate::error::{Error, Result};
use crate::forms::{FormKind, QForm};
use crate::ring::{AlgInt, FieldCtx, FieldDescriptor, OmegaMode};
use crate::ztree::EscalationTree;

fn wire_err(msg: impl Into<String>) -> Error {
    Error::Wire(msg.into())
}

// ---- integers --------------------------------------------------------------

pub fn int_to_json(x: &BigInt) -> Value {
    match i64::try_from(x) {
        Ok(v) => json!(v),
        Err(_) => Value::String(x.to_string()),
    }
}

pub fn int_from_json(v: &Value) -> Result<BigInt> {
    match v {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(BigInt::from(i))
            } else if let Some(u) = n.as_u64() {
                Ok(BigInt::from(u))
            } else {
                Err(wire_err(format!("non-integral number {n}")))
            }
        }
        Value::String(s) => s
            .trim()
            .parse::<BigInt>()
            .map_err(|_| wire_err(format!("bad integer string {s:?}"))),
        other => Err(wire_err(format!("expected integer, got {other}"))),
    }
}

// ---- fields ----------------------------------------------------------------

pub fn field_to_json(k: &FieldCtx) -> Value {
    match k.radicand() {
        None => json!({"type": "Q"}),
        Some(d) => json!({"type": "Qsqrt", "D": int_to_json(d)}),
    }
}

pub fn field_from_json(v: &Value) -> Result<FieldCtx> {
    let t = v
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| wire_err("field object needs a \"type\""))?;
    match t {
        "Q" => Ok(FieldCtx::rational()),
        "Qsqrt" => {
            let d = int_from_json(v.get("D").ok_or_else(|| wire_err("Qsqrt needs \"D\""))?)?;
            let d: u64 =
                d.to_string().parse().map_err(|_| wire_err(format!("D = {d} out of range")))?;
            FieldCtx::quadratic(d)
        }
        other => Err(wire_err(format!("unknown field type {other:?}"))),
    }
}

/// Accepts a descriptor string (`Q`, `Qsqrt:5`) or a field JSON object.
pub fn parse_field(s: &str) -> Result<FieldCtx> {
    if let Ok(v) = serde_json::from_str::<Value>(s) {
        if v.is_object() {
            return field_from_json(&v);
        }
    }
    FieldCtx::new(&FieldDescriptor::parse(s)?)
}

// ---- elements --------------------------------------------------------------

pub fn elem_to_json(x: &AlgInt) -> Value {
    json!({"a": int_to_json(&x.a), "b": int_to_json(&x.b)})
}

pub fn elem_from_json(v: &Value) -> Result<AlgInt> {
    // bare integers denote rational elements
    if v.is_number() || v.is_string() {
        return Ok(AlgInt { a: int_from_json(v)?, b: BigInt::from(0) });
    }
    let a = int_from_json(v.get("a").ok_or_else(|| wire_err("element needs \"a\""))?)?;
    let b = match v.get("b") {
        Some(b) => int_from_json(b)?,
        None => BigInt::from(0),
    };
    Ok(AlgInt { a, b })
}

/// Accepts the JSON object form or the shorthand `a`, `a+b*w`, `a-b*w`,
/// `b*w`, `w`.
pub fn parse_element(s: &str) -> Result<AlgInt> {
    let s = s.trim();
    if s.starts_with('{') {
        let v: Value =
            serde_json::from_str(s).map_err(|e| wire_err(format!("bad element JSON: {e}")))?;
        return elem_from_json(&v);
    }
    parse_shorthand(s)
}

fn parse_shorthand(s: &str) -> Result<AlgInt> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(wire_err("empty element"));
    }
    // split into signed terms
    let mut terms: Vec<String> = Vec::new();
    let mut cur = String::new();
    for (i, c) in compact.chars().enumerate() {
        if (c == '+' || c == '-') && i > 0 {
            terms.push(std::mem::take(&mut cur));
        }
        if !(c == '+' && i > 0 && cur.is_empty() && !terms.is_empty()) {
            cur.push(c);
        }
    }
    terms.push(cur);
    let mut a = BigInt::from(0);
    let mut b = BigInt::from(0);
    for t in terms {
        let t = t.strip_prefix('+').unwrap_or(&t).to_string();
        if t.is_empty() {
            continue;
        }
        let (is_w, body) = if let Some(stripped) = t.strip_suffix("*w") {
            (true, stripped.to_string())
        } else if let Some(stripped) = t.strip_suffix('w') {
            (true, stripped.trim_end_matches('*').to_string())
        } else {
            (false, t.clone())
        };
        let coeff: BigInt = if is_w && (body.is_empty() || body == "-") {
            if body == "-" {
                BigInt::from(-1)
            } else {
                BigInt::from(1)
            }
        } else {
            body.parse().map_err(|_| wire_err(format!("bad element term {t:?}")))?
        };
        if is_w {
            b += coeff;
        } else {
            a += coeff;
        }
    }
    Ok(AlgInt { a, b })
}

// ---- forms -----------------------------------------------------------------

pub fn form_to_json(form: &QForm) -> Value {
    let field = field_to_json(form.field());
    match form.kind() {
        FormKind::Diag(cs) => json!({
            "field": field,
            "kind": "diag",
            "coeffs": cs.iter().map(elem_to_json).collect::<Vec<_>>(),
        }),
        FormKind::Gram(m) => json!({
            "field": field,
            "kind": "gram",
            "M": m
                .iter()
                .map(|row| row.iter().map(elem_to_json).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        }),
    }
}

/// Builds and validates a form from its JSON; the ambient field comes from
/// the payload when present, else from `fallback`.
pub fn form_from_json(v: &Value, fallback: Option<&FieldCtx>) -> Result<QForm> {
    let field = match v.get("field") {
        Some(f) => field_from_json(f)?,
        None => fallback.cloned().ok_or_else(|| wire_err("form needs a \"field\""))?,
    };
    let kind = v
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| wire_err("form needs a \"kind\""))?;
    match kind {
        "diag" => {
            let coeffs = v
                .get("coeffs")
                .and_then(Value::as_array)
                .ok_or_else(|| wire_err("diag form needs \"coeffs\""))?;
            let cs = coeffs.iter().map(elem_from_json).collect::<Result<Vec<_>>>()?;
            QForm::diagonal(field, cs)
        }
        "gram" => {
            let rows = v
                .get("M")
                .and_then(Value::as_array)
                .ok_or_else(|| wire_err("gram form needs \"M\""))?;
            let m = rows
                .iter()
                .map(|row| {
                    row.as_array()
                        .ok_or_else(|| wire_err("Gram rows must be arrays"))?
                        .iter()
                        .map(elem_from_json)
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            QForm::gram(field, m)
        }
        other => Err(wire_err(format!("unknown form kind {other:?}"))),
    }
}

/// Accepts form JSON or the shorthand `diag:c1,c2,...` with shorthand
/// element coefficients.
pub fn parse_form(k: &FieldCtx, s: &str) -> Result<QForm> {
    let s = s.trim();
    if let Some(body) = s.strip_prefix("diag:") {
        if body.trim().is_empty() {
            return Ok(QForm::zero(k.clone()));
        }
        let coeffs = body
            .split(',')
            .map(parse_shorthand)
            .collect::<Result<Vec<_>>>()?;
        return QForm::diagonal(k.clone(), coeffs);
    }
    let v: Value = serde_json::from_str(s).map_err(|e| wire_err(format!("bad form JSON: {e}")))?;
    form_from_json(&v, Some(k))
}

// ---- classes and reports ----------------------------------------------------

pub fn class_to_json(c: &SquareClass) -> Value {
    json!({"rep": elem_to_json(c.rep()), "norm": int_to_json(c.norm())})
}

pub fn class_from_json(k: &FieldCtx, v: &Value) -> Result<SquareClass> {
    let rep = elem_from_json(v.get("rep").ok_or_else(|| wire_err("class needs \"rep\""))?)?;
    class_of(k, &rep)
}

pub fn truant_report_to_json(r: &TruantReport) -> Value {
    json!({
        "s": r.s_tag,
        "searched_norm_bound": r.searched_norm_bound,
        "truant_norm": r.truant_norm.as_ref().map(int_to_json).unwrap_or(Value::Null),
        "truants": r.truants.iter().map(class_to_json).collect::<Vec<_>>(),
        "canonical_truant": r.canonical_truant.as_ref().map(class_to_json).unwrap_or(Value::Null),
    })
}

pub fn witness_to_json(w: &CriticalWitness) -> Value {
    json!({
        "alpha": class_to_json(&w.alpha),
        "x": w.x.tag(),
        "witness_form": form_to_json(&w.witness_form),
        "escalation_trail": w.escalation_trail.iter().map(class_to_json).collect::<Vec<_>>(),
        "verified_bound": w.verified_bound,
        "status": "certified-up-to-bound",
    })
}

pub fn witness_from_json(v: &Value) -> Result<CriticalWitness> {
    let form = form_from_json(
        v.get("witness_form").ok_or_else(|| wire_err("witness needs \"witness_form\""))?,
        None,
    )?;
    let k = form.field().clone();
    let alpha =
        class_from_json(&k, v.get("alpha").ok_or_else(|| wire_err("witness needs \"alpha\""))?)?;
    let x = XClass::parse(
        v.get("x").and_then(Value::as_str).ok_or_else(|| wire_err("witness needs \"x\""))?,
    )?;
    let trail = v
        .get("escalation_trail")
        .and_then(Value::as_array)
        .map(|a| a.iter().map(|c| class_from_json(&k, c)).collect::<Result<Vec<_>>>())
        .transpose()?
        .unwrap_or_default();
    let verified_bound = v
        .get("verified_bound")
        .and_then(Value::as_u64)
        .ok_or_else(|| wire_err("witness needs \"verified_bound\""))?;
    Ok(CriticalWitness {
        alpha,
        x,
        witness_form: form,
        escalation_trail: trail,
        verified_bound,
        status: WitnessStatus::CertifiedUpToBound,
    })
}

pub fn closure_to_json(c: &ClosureReport) -> Value {
    json!({
        "sigma_closed": c.sigma_closed,
        "sigma_violations": c.sigma_violations.iter().map(class_to_json).collect::<Vec<_>>(),
        "unit_closed": c.unit_closed.map(Value::Bool).unwrap_or(Value::Null),
        "unit_violations": c.unit_violations.iter().map(class_to_json).collect::<Vec<_>>(),
        "even_size": c.even_size.map(Value::Bool).unwrap_or(Value::Null),
        "unit_fixed_points": c.unit_fixed_points.iter().map(class_to_json).collect::<Vec<_>>(),
    })
}

pub fn candidate_to_json(k: &FieldCtx, c: &CriterionCandidate) -> Value {
    json!({
        "field": field_to_json(k),
        "x": c.x.tag(),
        "norm_bound": c.norm_bound,
        "verify_bound": c.verify_bound,
        "classes": c.classes.iter().map(witness_to_json).collect::<Vec<_>>(),
        "class_reps": c.class_set().iter().map(class_to_json).collect::<Vec<_>>(),
        "inconclusive": c.inconclusive.iter().map(class_to_json).collect::<Vec<_>>(),
        "closure": closure_to_json(&c.closure),
    })
}

pub fn indec_sequence_to_json(k: &FieldCtx, s: &IndecSequence) -> Value {
    json!({
        "field": field_to_json(k),
        "t": s.t,
        "unit_norm_positive": s.unit_norm_positive,
        "window": [s.window_lo, s.window_hi],
        "betas": s.betas.iter().map(elem_to_json).collect::<Vec<_>>(),
    })
}

pub fn tree_to_json(t: &EscalationTree) -> Value {
    let nodes: Vec<Value> = t
        .nodes
        .iter()
        .map(|n| {
            let enc = n.form().gram_encoding();
            json!({
                "id": n.id,
                "rank": n.rank,
                "M": enc
                    .iter()
                    .map(|row| row.iter().map(elem_to_json).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
                "truant": n.truant.map(|v| json!(v)).unwrap_or(Value::Null),
                "children": n.children.clone(),
            })
        })
        .collect();
    json!({
        "x": t.x.tag(),
        "max_rank": t.max_rank,
        "probe_bound": t.probe_bound,
        "rank_counts": t.rank_counts,
        "truant_counts": t
            .truant_counts
            .iter()
            .map(|(k, v)| (k.to_string(), json!(v)))
            .collect::<Map<String, Value>>(),
        "nodes": nodes,
    })
}

/// Flat CSV of `(rank, canonical form, truant)` rows, RFC-style quoting.
pub fn tree_to_csv(t: &EscalationTree) -> String {
    let mut out = String::from("rank,form,truant\n");
    for n in &t.nodes {
        let enc = n.form().gram_encoding();
        let form_str = enc
            .iter()
            .map(|row| row.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join("; ");
        let truant = n.truant.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", n.rank, csv_quote(&form_str), truant));
    }
    out
}

/// CSV of a class list with squarefree and indecomposability columns.
pub fn classes_to_csv(k: &FieldCtx, classes: &[SquareClass]) -> String {
    let mut out = String::from("a,b,norm,trace,squarefree,indecomposable\n");
    for c in classes {
        let sf = crate::elements::is_squarefree(k, c.rep()).map(|r| r.squarefree).unwrap_or(false);
        let ind = crate::elements::is_indecomposable(k, c.rep())
            .map(|r| r.indecomposable)
            .unwrap_or(false);
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.rep().a,
            c.rep().b,
            c.norm(),
            c.trace(),
            sf,
            ind
        ));
    }
    out
}

fn csv_quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn omega_mode_tag(m: OmegaMode) -> &'static str {
    match m {
        OmegaMode::SqrtD => "sqrtD",
        OmegaMode::HalfOnePlusSqrtD => "half(1+sqrtD)",
    }
}

/// Deterministic compact rendering with sorted keys, for cache keys. The
/// emitter never produces floats, so this is byte-stable.
pub fn canonical_json(v: &Value) -> String {
    // serde_json's default map is ordered; re-serialize through it to force
    // sorted keys on any input
    fn normalize(v: &Value) -> Value {
        match v {
            Value::Object(m) => {
                let mut out = Map::new();
                let mut keys: Vec<&String> = m.keys().collect();
                keys.sort();
                for k in keys {
                    out.insert(k.clone(), normalize(&m[k]));
                }
                Value::Object(out)
            }
            Value::Array(a) => Value::Array(a.iter().map(normalize).collect()),
            other => other.clone(),
        }
    }
    serde_json::to_string(&normalize(v)).expect("serialization cannot fail")
}

//! The combinatorics of the totally positive cone modulo squared units:
//! canonical square-class representatives, bounded enumeration, element
//! squarefreeness, indecomposability, and the ordered indecomposable
//! sequence of a real quadratic field.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::ring::{AlgInt, Embedding, FieldCtx};

/// Canonical representative of a class in the totally positive cone modulo
/// squares of units. In degree 2 the representative is reduced so that the
/// ratio of its two embedding values lies in `[1, eps^4)`; in degree 1 it is
/// the plain positive integer. Norm and trace are cached so the canonical
/// `(norm, trace, a, b)` order needs no field context.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SquareClass {
    rep: AlgInt,
    norm: BigInt,
    trace: BigInt,
}

impl SquareClass {
    pub fn rep(&self) -> &AlgInt {
        &self.rep
    }

    pub fn norm(&self) -> &BigInt {
        &self.norm
    }

    pub fn trace(&self) -> &BigInt {
        &self.trace
    }
}

impl PartialOrd for SquareClass {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SquareClass {
    fn cmp(&self, other: &Self) -> Ordering {
        (&self.norm, &self.trace, &self.rep.a, &self.rep.b).cmp(&(
            &other.norm,
            &other.trace,
            &other.rep.a,
            &other.rep.b,
        ))
    }
}

impl std::fmt::Display for SquareClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}]", self.rep)
    }
}

/// Canonical square class of a totally positive element.
///
/// Degree 2: multiply by `eps^(2k)` for the unique `k` that puts the
/// embedding ratio `sigma1/sigma2` in `[1, eps^4)`. Both window tests are
/// exact sign computations: the ratio is at least 1 iff `b >= 0`, and the
/// upper test cross-multiplies by the positive conjugate values.
pub fn class_of(k: &FieldCtx, x: &AlgInt) -> Result<SquareClass> {
    if !k.is_totally_positive(x) {
        return Err(Error::NotTotallyPositive(x.clone()));
    }
    let rep = if k.degree() == 1 { x.clone() } else { reduce_to_ratio_window(k, x) };
    let (norm, trace) = k.norm_trace(&rep);
    Ok(SquareClass { rep, norm, trace })
}

fn reduce_to_ratio_window(k: &FieldCtx, x: &AlgInt) -> AlgInt {
    let eps_sq = k.eps_sq();
    let eps_sq_inv = k.eps_sq_inv();
    let mut y = x.clone();
    // ratio >= 1 iff sigma1(y) >= sigma2(y) iff b >= 0
    while y.b.is_negative() {
        y = k.mul(&y, &eps_sq);
    }
    loop {
        // ratio < eps^4 iff sigma1(eps_sq * conj(y) - conj(eps_sq) * y) > 0
        let lhs = k.mul(&eps_sq, &k.conjugate(&y));
        let rhs = k.mul(&k.conjugate(&eps_sq), &y);
        if k.sign_at(&k.sub(&lhs, &rhs), Embedding::First) == Ordering::Greater {
            break;
        }
        y = k.mul(&y, &eps_sq_inv);
    }
    y
}

/// Shift `x` by even unit powers so that its dominant embedding value lies
/// in `[1, eps^2)`. This is the window used by the indecomposable sequence
/// (distinct from the class window of [`class_of`]).
pub fn window_rep(k: &FieldCtx, x: &AlgInt) -> Result<AlgInt> {
    if !k.is_totally_positive(x) {
        return Err(Error::NotTotallyPositive(x.clone()));
    }
    if k.degree() == 1 {
        return Ok(x.clone());
    }
    let eps_sq = k.eps_sq();
    let eps_sq_inv = k.eps_sq_inv();
    let one = AlgInt::one();
    let mut y = x.clone();
    while k.cmp_at(&y, &one, Embedding::First) == Ordering::Less {
        y = k.mul(&y, &eps_sq);
    }
    while k.cmp_at(&y, &eps_sq, Embedding::First) != Ordering::Less {
        y = k.mul(&y, &eps_sq_inv);
    }
    Ok(y)
}

/// Exhaustive scan over ring elements whose embedding values lie in the
/// rectangle `sigma1 in [lo1, hi1], sigma2 in [lo2, hi2]` (bounds given as
/// exact integers). The `(u, v)` coordinate ranges are derived exactly from
/// the floors of `v * omega` at each embedding, so no candidate inside the
/// box is missed and only boundary candidates outside it are visited.
pub(crate) fn scan_box(
    k: &FieldCtx,
    lo: [&BigInt; 2],
    hi: [&BigInt; 2],
    visit: &mut impl FnMut(AlgInt) -> ControlFlow<()>,
) -> ControlFlow<()> {
    if k.degree() == 1 {
        let lo = lo[0].clone();
        let hi = hi[0].clone();
        let mut a = lo;
        while a <= hi {
            visit(AlgInt { a: a.clone(), b: BigInt::zero() })?;
            a += 1u32;
        }
        return ControlFlow::Continue(());
    }
    // sigma1 - sigma2 = b * sqrt(disc), hence the b range below.
    let disc_isqrt = k.disc_isqrt();
    let b_hi = (hi[0] - lo[1]).div_floor(&disc_isqrt) + 1u32;
    let b_lo = -((hi[1] - lo[0]).div_floor(&disc_isqrt) + 1u32);
    let mut b = b_lo;
    while b <= b_hi {
        // u in [ceil(lo_e - b*omega_e), floor(hi_e - b*omega_e)] for both e
        let bw = AlgInt { a: BigInt::zero(), b: b.clone() };
        let mut u_lo = BigInt::zero();
        let mut u_hi = BigInt::zero();
        let mut first = true;
        for (e, (l, h)) in [Embedding::First, Embedding::Second]
            .into_iter()
            .zip(lo.iter().zip(hi.iter()))
        {
            let fl = k.floor_at(&bw, e);
            // floor(b*omega_e) = fl, so ceil(lo - b*omega_e) and
            // floor(hi - b*omega_e) differ from lo - fl, hi - fl by at most 1;
            // widen by one and let the caller's exact filter decide.
            let lo_e = *l - &fl - 1u32;
            let hi_e = *h - &fl + 1u32;
            if first {
                u_lo = lo_e;
                u_hi = hi_e;
                first = false;
            } else {
                if lo_e > u_lo {
                    u_lo = lo_e;
                }
                if hi_e < u_hi {
                    u_hi = hi_e;
                }
            }
        }
        let mut u = u_lo;
        while u <= u_hi {
            visit(AlgInt { a: u.clone(), b: b.clone() })?;
            u += 1u32;
        }
        b += 1u32;
    }
    ControlFlow::Continue(())
}

/// All totally positive elements with embedding values in
/// `(0, s1_hi] x (0, s2_hi]`, in coordinate order. The box ends are exact
/// integer caps on the two embedding values.
pub fn elements_in_embedding_box(k: &FieldCtx, s1_hi: &BigInt, s2_hi: &BigInt) -> Vec<AlgInt> {
    let zero = BigInt::zero();
    let mut out = Vec::new();
    let _ = scan_box(k, [&zero, &zero], [s1_hi, s2_hi], &mut |x| {
        if k.is_totally_positive(&x)
            && k.floor_at(&x, Embedding::First) <= *s1_hi
            && k.floor_at(&x, Embedding::Second) <= *s2_hi
        {
            // the floors only pre-filter; confirm the caps exactly
            let s1_ok = k
                .cmp_at(&x, &AlgInt { a: s1_hi.clone(), b: BigInt::zero() }, Embedding::First)
                != Ordering::Greater;
            let s2_ok = k
                .cmp_at(&x, &AlgInt { a: s2_hi.clone(), b: BigInt::zero() }, Embedding::Second)
                != Ordering::Greater;
            if s1_ok && s2_ok {
                out.push(x);
            }
        }
        ControlFlow::Continue(())
    });
    out.sort();
    out
}

/// All totally positive elements `y` with `y` strictly below `x` at every
/// embedding or `y = x`, sorted by `(norm, trace, a, b)`.
pub fn elements_dominated_by(k: &FieldCtx, x: &AlgInt) -> Result<Vec<AlgInt>> {
    if !k.is_totally_positive(x) {
        return Err(Error::NotTotallyPositive(x.clone()));
    }
    let mut out = Vec::new();
    let zero = BigInt::zero();
    let h1 = k.ceil_at(x, Embedding::First);
    let h2 = k.ceil_at(x, Embedding::Second);
    let _ = scan_box(k, [&zero, &zero], [&h1, &h2], &mut |y| {
        if k.totally_leq(&y, x) && k.is_totally_positive(&y) {
            out.push(y);
        }
        ControlFlow::Continue(())
    });
    let mut keyed: Vec<(BigInt, BigInt, AlgInt)> = out
        .into_iter()
        .map(|y| {
            let (n, t) = k.norm_trace(&y);
            (n, t, y)
        })
        .collect();
    keyed.sort_by(|p, q| (&p.0, &p.1, &p.2.a, &p.2.b).cmp(&(&q.0, &q.1, &q.2.a, &q.2.b)));
    Ok(keyed.into_iter().map(|(_, _, y)| y).collect())
}

/// Early-exit decomposability probe: the first totally positive `y` with
/// `y` strictly below `x` at both embeddings gives `x = y + (x - y)`.
/// Candidates are visited small-`|b|` first so the common case (`y = 1`)
/// exits immediately.
fn find_decomposition(k: &FieldCtx, x: &AlgInt) -> Option<(AlgInt, AlgInt)> {
    if k.degree() == 1 {
        if x.a > BigInt::one() {
            let rest = AlgInt { a: &x.a - 1, b: BigInt::zero() };
            return Some((AlgInt::one(), rest));
        }
        return None;
    }
    let disc_isqrt = k.disc_isqrt();
    let h1 = k.ceil_at(x, Embedding::First);
    let h2 = k.ceil_at(x, Embedding::Second);
    let b_hi = (&h1).div_floor(&disc_isqrt) + 1u32;
    let b_lo = -((&h2).div_floor(&disc_isqrt) + 1u32);
    let mut order: Vec<BigInt> = Vec::new();
    let limit = std::cmp::max(b_hi.clone(), -b_lo.clone());
    let mut step = BigInt::zero();
    while step <= limit {
        if step >= b_lo && step <= b_hi {
            order.push(step.clone());
        }
        if !step.is_zero() {
            let neg = -&step;
            if neg >= b_lo && neg <= b_hi {
                order.push(neg);
            }
        }
        step += 1u32;
    }
    for b in order {
        let bw = AlgInt { a: BigInt::zero(), b: b.clone() };
        let f1 = k.floor_at(&bw, Embedding::First);
        let f2 = k.floor_at(&bw, Embedding::Second);
        let u_lo = (-&f1 - 1u32).max(-&f2 - 1u32);
        let u_hi = (&h1 - &f1 + 1u32).min(&h2 - &f2 + 1u32);
        let mut u = u_lo;
        while u <= u_hi {
            let y = AlgInt { a: u.clone(), b: b.clone() };
            if k.is_totally_positive(&y) && k.totally_lt(&y, x) {
                let rest = k.sub(x, &y);
                return Some((y, rest));
            }
            u += 1u32;
        }
    }
    None
}

/// Enumerates all square classes of norm at most `bound`, each exactly once,
/// sorted canonically. The scan covers the reduced box `sigma1 in
/// (0, eps^2 * sqrt(bound)], sigma2 in (0, sqrt(bound)]` which contains
/// every canonical representative, then canonicalizes and deduplicates.
pub fn enumerate_classes(k: &FieldCtx, bound: u64) -> Vec<SquareClass> {
    enumerate_classes_filtered(k, bound, |_, _| true)
}

pub fn enumerate_classes_filtered(
    k: &FieldCtx,
    bound: u64,
    keep: impl Fn(&FieldCtx, &SquareClass) -> bool,
) -> Vec<SquareClass> {
    let big_bound = BigInt::from(bound);
    if k.degree() == 1 {
        let mut out = Vec::new();
        let mut n = BigInt::one();
        while n <= big_bound {
            let c = class_of(k, &AlgInt { a: n.clone(), b: BigInt::zero() }).unwrap();
            if keep(k, &c) {
                out.push(c);
            }
            n += 1u32;
        }
        return out;
    }
    let sqrt_b = big_bound.sqrt() + 1u32;
    let h1 = k.ceil_at(&k.eps_sq(), Embedding::First) * &sqrt_b;
    let h2 = sqrt_b;
    let zero = BigInt::zero();
    let mut set: BTreeSet<SquareClass> = BTreeSet::new();
    let _ = scan_box(k, [&zero, &zero], [&h1, &h2], &mut |x| {
        if k.is_totally_positive(&x) && k.norm(&x) <= big_bound {
            let c = class_of(k, &x).unwrap();
            set.insert(c);
        }
        ControlFlow::Continue(())
    });
    set.into_iter().filter(|c| keep(k, c)).collect()
}

/// Result of the squarefreeness test: a witness `w` with `w^2 | x` and `w`
/// not a unit, when one exists.
#[derive(Clone, Debug)]
pub struct SquarefreeOutcome {
    pub squarefree: bool,
    pub witness: Option<AlgInt>,
}

/// Element squarefreeness: no non-unit `w` has `w^2 | x`. Candidate divisor
/// norms are exactly the `n >= 2` with `n^2 | N(x)`; for each, all elements
/// of norm `+-n` are enumerated up to unit association (one fundamental-unit
/// period suffices because divisibility by `w^2` is unit-invariant).
pub fn is_squarefree(k: &FieldCtx, x: &AlgInt) -> Result<SquarefreeOutcome> {
    if !k.is_totally_positive(x) {
        return Err(Error::NotTotallyPositive(x.clone()));
    }
    let n = k.norm(x);
    if k.degree() == 1 {
        let mut m = BigInt::from(2);
        while &m * &m <= n {
            if (&n % (&m * &m)).is_zero() {
                return Ok(SquarefreeOutcome {
                    squarefree: false,
                    witness: Some(AlgInt { a: m, b: BigInt::zero() }),
                });
            }
            m += 1u32;
        }
        return Ok(SquarefreeOutcome { squarefree: true, witness: None });
    }
    let mut m = BigInt::from(2);
    while &m * &m <= n {
        if (&n % (&m * &m)).is_zero() {
            for w in elements_of_norm(k, &m) {
                let w2 = k.square(&w);
                if k.divides(&w2, x)?.is_some() {
                    return Ok(SquarefreeOutcome { squarefree: false, witness: Some(w) });
                }
            }
        }
        m += 1u32;
    }
    Ok(SquarefreeOutcome { squarefree: true, witness: None })
}

/// All elements with `|N| = n` inside one fundamental-unit period (both
/// signs of the norm, both signs of the element). Every unit-associate class
/// of such elements has at least one member in the scanned box.
pub(crate) fn elements_of_norm(k: &FieldCtx, n: &BigInt) -> Vec<AlgInt> {
    debug_assert!(k.degree() == 2);
    let sqrt_n = n.sqrt() + 1u32;
    let h1 = k.ceil_at(&k.fund_unit(), Embedding::First) * &sqrt_n;
    let h2 = sqrt_n;
    let l1 = -&h1;
    let l2 = -&h2;
    let mut out = Vec::new();
    let _ = scan_box(k, [&l1, &l2], [&h1, &h2], &mut |x| {
        if !x.is_zero() {
            let nx = k.norm(&x);
            if &nx == n || &(-nx) == n {
                // sign-normalize to the dominant-positive representative
                let y = if k.sign_at(&x, Embedding::First) == Ordering::Less { k.neg(&x) } else { x };
                out.push(y);
            }
        }
        ControlFlow::Continue(())
    });
    out.sort_by_key(|x| (x.a.magnitude().clone() + x.b.magnitude(), x.a.clone(), x.b.clone()));
    out.dedup();
    out
}

/// Result of the indecomposability test, with one decomposition into two
/// totally positive summands when the element splits.
#[derive(Clone, Debug)]
pub struct IndecOutcome {
    pub indecomposable: bool,
    pub decomposition: Option<(AlgInt, AlgInt)>,
}

/// Definitional test: `x` is indecomposable iff no totally positive element
/// lies strictly below it at both embeddings.
pub fn is_indecomposable(k: &FieldCtx, x: &AlgInt) -> Result<IndecOutcome> {
    if !k.is_totally_positive(x) {
        return Err(Error::NotTotallyPositive(x.clone()));
    }
    match find_decomposition(k, x) {
        Some(pair) => Ok(IndecOutcome { indecomposable: false, decomposition: Some(pair) }),
        None => Ok(IndecOutcome { indecomposable: true, decomposition: None }),
    }
}

/// A window of the ordered sequence of indecomposables of a real quadratic
/// field. Index 0 is the element 1; consecutive entries increase at the
/// dominant embedding; entry `i + t` is `eps^2` times entry `i`.
///
/// When the fundamental unit is totally positive (`N(eps) = +1`) the set of
/// indecomposable units modulo squared units is larger than `{1}`; reports
/// carry that flag and `t` is always the translation period under `eps^2`.
#[derive(Clone, Debug)]
pub struct IndecSequence {
    pub t: usize,
    pub unit_norm_positive: bool,
    pub window_lo: i64,
    pub window_hi: i64,
    pub betas: Vec<AlgInt>,
}

/// One period of indecomposables, found by scanning
/// `sigma1 in [1, eps^2), sigma2 in (0, 1]` and filtering with the
/// definitional test. Entry 0 of the returned list is always 1.
pub(crate) fn indec_period(k: &FieldCtx) -> Result<Vec<AlgInt>> {
    if k.degree() != 2 {
        return Err(Error::RationalFieldOnly);
    }
    let eps_sq = k.eps_sq();
    let h1 = k.ceil_at(&eps_sq, Embedding::First);
    let h2 = BigInt::one();
    let zero = BigInt::zero();
    let one = AlgInt::one();
    let mut members: Vec<AlgInt> = Vec::new();
    let _ = scan_box(k, [&zero, &zero], [&h1, &h2], &mut |x| {
        if k.is_totally_positive(&x)
            && k.cmp_at(&x, &one, Embedding::First) != Ordering::Less
            && k.cmp_at(&x, &eps_sq, Embedding::First) == Ordering::Less
            && is_indecomposable(k, &x).unwrap().indecomposable
        {
            members.push(x);
        }
        ControlFlow::Continue(())
    });
    members.sort_by(|p, q| k.cmp_at(p, q, Embedding::First));
    debug_assert!(members.first() == Some(&AlgInt::one()));
    Ok(members)
}

/// The ordered indecomposable sequence restricted to indices
/// `window_lo ..= window_hi`.
pub fn indec_sequence(k: &FieldCtx, window_lo: i64, window_hi: i64) -> Result<IndecSequence> {
    if window_lo > window_hi {
        return Err(Error::BadBounds(format!(
            "window [{window_lo}, {window_hi}] is empty"
        )));
    }
    let period = indec_period(k)?;
    let t = period.len() as i64;
    let mut betas = Vec::new();
    for i in window_lo..=window_hi {
        let idx = i.rem_euclid(t);
        let shift = (i - idx) / t;
        let base = &period[idx as usize];
        betas.push(k.mul(base, &k.unit_pow(&k.eps_sq(), shift)));
    }
    Ok(IndecSequence {
        t: t as usize,
        unit_norm_positive: k.fund_unit_norm() == 1,
        window_lo,
        window_hi,
        betas,
    })
}

/// Fast membership test against the periodized sequence: `x` is
/// indecomposable iff its `eps^2`-shift into the dominant window appears in
/// the period list.
pub fn indec_sequence_member(k: &FieldCtx, period: &[AlgInt], x: &AlgInt) -> Result<bool> {
    let w = window_rep(k, x)?;
    Ok(period.contains(&w))
}

/// Classes of norm at most `bound` whose representatives are both squarefree
/// and indecomposable (both properties are invariant under squared-unit
/// scaling, so testing the canonical representative is well-defined).
pub fn squarefree_indecomposable_classes(k: &FieldCtx, bound: u64) -> Vec<SquareClass> {
    enumerate_classes_filtered(k, bound, |k, c| {
        is_squarefree(k, c.rep()).unwrap().squarefree
            && is_indecomposable(k, c.rep()).unwrap().indecomposable
    })
}

//! Totally positive definite quadratic forms and the exact representation
//! engine.
//!
//! Forms are diagonal coefficient lists or integral Gram data `M` with
//! `Q(x) = sum M_ii x_i^2 + sum_{i<j} M_ij x_i x_j`, so `M` holds `Q` on the
//! diagonal and `2B` off it, and all entries stay in the ring even for
//! non-classical forms.
//!
//! Representation testing is exact bounded enumeration. Diagonal forms over
//! a quadratic field use a two-embedding depth-first search whose coordinate
//! ranges come from exact integer floors; Gram forms reduce to a single
//! positive definite rational form (the embedding-trace form) enumerated by
//! an exact rational Cholesky search. Bounded sweeps collect every value in
//! the reduced box in one pass; the per-target search is kept as the
//! independent oracle. Searches are sequential and visit candidates in a
//! fixed order, so reported witnesses are deterministic.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::ops::ControlFlow;

use crate::elements::{class_of, enumerate_classes_filtered, SquareClass};
use crate::error::{Error, Result};
use crate::ring::{AlgInt, Embedding, FieldCtx};
use crate::sspec::SSpec;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FormKind {
    Diag(Vec<AlgInt>),
    Gram(Vec<Vec<AlgInt>>),
}

/// A validated totally positive definite quadratic form. Construction always
/// validates, so every `QForm` in circulation satisfies its invariants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QForm {
    field: FieldCtx,
    kind: FormKind,
    classical: bool,
}

impl QForm {
    /// The rank-0 form, representing only 0.
    pub fn zero(field: FieldCtx) -> QForm {
        QForm { field, kind: FormKind::Diag(Vec::new()), classical: true }
    }

    /// Diagonal form; every coefficient must be totally positive.
    pub fn diagonal(field: FieldCtx, coeffs: Vec<AlgInt>) -> Result<QForm> {
        for c in &coeffs {
            if !field.is_totally_positive(c) {
                return Err(Error::BadDiagonalCoefficient(c.clone()));
            }
        }
        Ok(QForm { field, kind: FormKind::Diag(coeffs), classical: true })
    }

    pub fn diagonal_ints(field: FieldCtx, coeffs: &[i64]) -> Result<QForm> {
        let cs = coeffs.iter().map(|&c| AlgInt::from_int(c)).collect();
        QForm::diagonal(field, cs)
    }

    /// Gram form from the integral encoding `M`. Checks symmetry and total
    /// positive definiteness (leading principal minors of the doubled Gram
    /// matrix, totally positive, decided exactly), and sets the classical
    /// flag from divisibility of the off-diagonal entries by 2.
    pub fn gram(field: FieldCtx, m: Vec<Vec<AlgInt>>) -> Result<QForm> {
        let n = m.len();
        for row in &m {
            if row.len() != n {
                return Err(Error::RaggedGram);
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if m[i][j] != m[j][i] {
                    return Err(Error::AsymmetricGram(i, j));
                }
            }
        }
        // doubled Gram: diagonal 2*M_ii, off-diagonal M_ij
        let mut a = m.clone();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = field.mul_int(&row[i], &BigInt::from(2));
        }
        let minors = leading_principal_minors(&field, &a)?;
        for (idx, det) in minors.iter().enumerate() {
            for (e_idx, e) in Embedding::BOTH.iter().enumerate().take(field.degree() as usize) {
                if field.sign_at(det, *e) != Ordering::Greater {
                    return Err(Error::NotPositiveDefinite { embedding: e_idx + 1, minor: idx + 1 });
                }
            }
        }
        let two = AlgInt::from_int(2);
        let mut classical = true;
        'outer: for i in 0..n {
            for j in (i + 1)..n {
                if !m[i][j].is_zero() && field.divides(&two, &m[i][j])?.is_none() {
                    classical = false;
                    break 'outer;
                }
            }
        }
        Ok(QForm { field, kind: FormKind::Gram(m), classical })
    }

    /// Re-checks all construction invariants.
    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            FormKind::Diag(cs) => {
                QForm::diagonal(self.field.clone(), cs.clone())?;
            }
            FormKind::Gram(m) => {
                let again = QForm::gram(self.field.clone(), m.clone())?;
                if again.classical != self.classical {
                    return Err(Error::AsymmetricGram(0, 0));
                }
            }
        }
        Ok(())
    }

    pub fn field(&self) -> &FieldCtx {
        &self.field
    }

    pub fn kind(&self) -> &FormKind {
        &self.kind
    }

    pub fn rank(&self) -> usize {
        match &self.kind {
            FormKind::Diag(cs) => cs.len(),
            FormKind::Gram(m) => m.len(),
        }
    }

    pub fn is_classical(&self) -> bool {
        self.classical
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.kind, FormKind::Diag(_))
    }

    pub fn diag_coeffs(&self) -> Option<&[AlgInt]> {
        match &self.kind {
            FormKind::Diag(cs) => Some(cs),
            FormKind::Gram(_) => None,
        }
    }

    /// The integral Gram encoding, materializing diagonal forms.
    pub fn gram_encoding(&self) -> Vec<Vec<AlgInt>> {
        match &self.kind {
            FormKind::Gram(m) => m.clone(),
            FormKind::Diag(cs) => {
                let n = cs.len();
                let mut m = vec![vec![AlgInt::zero(); n]; n];
                for (i, c) in cs.iter().enumerate() {
                    m[i][i] = c.clone();
                }
                m
            }
        }
    }

    /// Exact evaluation of `Q(v)`.
    pub fn evaluate(&self, v: &[AlgInt]) -> Result<AlgInt> {
        if v.len() != self.rank() {
            return Err(Error::BadBounds(format!(
                "vector length {} does not match rank {}",
                v.len(),
                self.rank()
            )));
        }
        let k = &self.field;
        let mut acc = AlgInt::zero();
        match &self.kind {
            FormKind::Diag(cs) => {
                for (c, x) in cs.iter().zip(v) {
                    acc = k.add(&acc, &k.mul(c, &k.square(x)));
                }
            }
            FormKind::Gram(m) => {
                let n = m.len();
                for i in 0..n {
                    acc = k.add(&acc, &k.mul(&m[i][i], &k.square(&v[i])));
                    for j in (i + 1)..n {
                        acc = k.add(&acc, &k.mul(&m[i][j], &k.mul(&v[i], &v[j])));
                    }
                }
            }
        }
        Ok(acc)
    }

    // ---- constructors from existing forms ---------------------------------

    /// Orthogonal sum. Diagonal stays diagonal; anything else becomes a
    /// block Gram form.
    pub fn orthogonal_sum(&self, other: &QForm) -> Result<QForm> {
        if self.field != other.field {
            return Err(Error::FieldMismatch);
        }
        match (&self.kind, &other.kind) {
            (FormKind::Diag(a), FormKind::Diag(b)) => {
                let mut cs = a.clone();
                cs.extend(b.iter().cloned());
                QForm::diagonal(self.field.clone(), cs)
            }
            _ => {
                let ma = self.gram_encoding();
                let mb = other.gram_encoding();
                let n = ma.len() + mb.len();
                let mut m = vec![vec![AlgInt::zero(); n]; n];
                for (i, row) in ma.iter().enumerate() {
                    for (j, e) in row.iter().enumerate() {
                        m[i][j] = e.clone();
                    }
                }
                let off = ma.len();
                for (i, row) in mb.iter().enumerate() {
                    for (j, e) in row.iter().enumerate() {
                        m[off + i][off + j] = e.clone();
                    }
                }
                QForm::gram(self.field.clone(), m)
            }
        }
    }

    /// Scales every value of the form by a totally positive multiplier.
    pub fn scale(&self, mult: &AlgInt) -> Result<QForm> {
        if !self.field.is_totally_positive(mult) {
            return Err(Error::BadScaleMultiplier(mult.clone()));
        }
        let k = self.field.clone();
        match &self.kind {
            FormKind::Diag(cs) => {
                QForm::diagonal(k.clone(), cs.iter().map(|c| k.mul(c, mult)).collect())
            }
            FormKind::Gram(m) => {
                let mm = m
                    .iter()
                    .map(|row| row.iter().map(|e| k.mul(e, mult)).collect())
                    .collect();
                QForm::gram(k, mm)
            }
        }
    }

    /// Applies the nontrivial automorphism entrywise.
    pub fn conjugate_form(&self) -> QForm {
        let k = self.field.clone();
        match &self.kind {
            FormKind::Diag(cs) => {
                QForm::diagonal(k.clone(), cs.iter().map(|c| k.conjugate(c)).collect())
                    .expect("conjugation preserves validity")
            }
            FormKind::Gram(m) => {
                let mm = m
                    .iter()
                    .map(|row| row.iter().map(|e| k.conjugate(e)).collect())
                    .collect();
                QForm::gram(k, mm).expect("conjugation preserves validity")
            }
        }
    }

    /// Reinterprets a form over the rational field over `target` (the tensor
    /// extension for free forms).
    pub fn lift(&self, target: &FieldCtx) -> Result<QForm> {
        if !self.field.is_rational_field() {
            return Err(Error::LiftSourceNotRational);
        }
        match &self.kind {
            FormKind::Diag(cs) => QForm::diagonal(target.clone(), cs.clone()),
            FormKind::Gram(m) => QForm::gram(target.clone(), m.clone()),
        }
    }

    // ---- representation ----------------------------------------------------

    /// Exact representation decision, with a witness vector on success.
    /// The target must be totally positive or zero.
    pub fn represents(&self, target: &AlgInt) -> Result<Option<Vec<AlgInt>>> {
        let k = &self.field;
        if target.is_zero() {
            return Ok(Some(vec![AlgInt::zero(); self.rank()]));
        }
        if !k.is_totally_positive(target) {
            return Err(Error::BadTarget(target.clone()));
        }
        if self.rank() == 0 {
            return Ok(None);
        }
        let witness = match &self.kind {
            FormKind::Diag(cs) => represents_diag(k, cs, target),
            FormKind::Gram(_) => self.represents_via_trace_ball(target),
        };
        if let Some(w) = &witness {
            debug_assert_eq!(self.evaluate(w).unwrap(), *target);
        }
        Ok(witness)
    }

    fn represents_via_trace_ball(&self, target: &AlgInt) -> Option<Vec<AlgInt>> {
        let k = &self.field;
        let tr = k.trace(target);
        if tr.is_negative() {
            return None;
        }
        let bmat = self.trace_form_matrix();
        let cap = BigRational::from_integer(tr.clone());
        let mut found: Option<Vec<AlgInt>> = None;
        let _ = enumerate_ball(&bmat, &cap, &mut |w, value| {
            if value.is_integer() && value.to_integer() == tr {
                let x = self.coords_from_flat(w);
                if self.evaluate(&x).unwrap() == *target {
                    found = Some(x);
                    return ControlFlow::Break(());
                }
            }
            ControlFlow::Continue(())
        });
        found
    }

    fn coords_from_flat(&self, w: &[BigInt]) -> Vec<AlgInt> {
        if self.field.degree() == 1 {
            w.iter().map(|a| AlgInt { a: a.clone(), b: BigInt::zero() }).collect()
        } else {
            w.chunks(2).map(|p| AlgInt { a: p[0].clone(), b: p[1].clone() }).collect()
        }
    }

    /// The positive definite rational form `w -> Tr(Q(x(w)))` over the
    /// integer coordinates of a vector, as a symmetric rational matrix.
    /// In degree 1 this is the form itself.
    fn trace_form_matrix(&self) -> Vec<Vec<BigRational>> {
        let k = &self.field;
        let m = self.gram_encoding();
        let n = m.len();
        let d = k.degree() as usize;
        let dim = n * d;
        let mut t = vec![vec![BigRational::zero(); dim]; dim];
        let omega = AlgInt::new(0, 1);
        let omega_sq = k.mul(&omega, &omega);
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let tr = |x: &AlgInt| BigRational::from_integer(k.trace(x));
        for i in 0..n {
            for j in i..n {
                let c = &m[i][j];
                if c.is_zero() {
                    continue;
                }
                if d == 1 {
                    if i == j {
                        t[i][i] += tr(c);
                    } else {
                        let v = tr(c) * &half;
                        t[i][j] += v.clone();
                        t[j][i] += v;
                    }
                    continue;
                }
                let t1 = tr(c);
                let tw = tr(&k.mul(c, &omega));
                let tww = tr(&k.mul(c, &omega_sq));
                let (ui, vi, uj, vj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
                if i == j {
                    // c * x_i^2 contributes Tr(c) u^2 + 2 Tr(c w) uv + Tr(c w^2) v^2
                    t[ui][ui] += t1;
                    t[ui][vi] += tw.clone();
                    t[vi][ui] += tw;
                    t[vi][vi] += tww;
                } else {
                    // c * x_i x_j
                    let h1 = t1 * &half;
                    let hw = tw * &half;
                    let hww = tww * &half;
                    t[ui][uj] += h1.clone();
                    t[uj][ui] += h1;
                    t[ui][vj] += hw.clone();
                    t[vj][ui] += hw.clone();
                    t[vi][uj] += hw.clone();
                    t[uj][vi] += hw;
                    t[vi][vj] += hww.clone();
                    t[vj][vi] += hww;
                }
            }
        }
        t
    }

    // ---- bounded sweeps ----------------------------------------------------

    /// Every value of the form inside the reduced sweep box for the given
    /// norm bound (including values of norm above the bound; those matter as
    /// partial sums). The box is `sigma1 <= eps^2 sqrt(B), sigma2 <= sqrt(B)`
    /// in degree 2 and `[0, B]` in degree 1; it contains the canonical
    /// representative of every represented class of norm at most `B`, and
    /// the represented set is stable under squared units, so sweeping it
    /// decides class representation completely.
    pub fn values_in_box(&self, bound: u64) -> BTreeSet<AlgInt> {
        let sweep = SweepBox::new(&self.field, bound);
        match &self.kind {
            FormKind::Diag(cs) => layered_diag_values(&self.field, cs, &sweep),
            FormKind::Gram(_) => {
                let bmat = self.trace_form_matrix();
                let cap = BigRational::from_integer(sweep.trace_cap());
                let mut out: BTreeSet<AlgInt> = BTreeSet::new();
                out.insert(AlgInt::zero());
                let _ = enumerate_ball(&bmat, &cap, &mut |w, _| {
                    let x = self.coords_from_flat(w);
                    let val = self.evaluate(&x).unwrap();
                    if sweep.contains(&val) {
                        out.insert(val);
                    }
                    ControlFlow::Continue(())
                });
                out
            }
        }
    }

    /// All classes of norm at most `bound` represented by the form, from one
    /// bounded value sweep.
    pub fn represented_classes_up_to(&self, bound: u64) -> BTreeSet<SquareClass> {
        let k = &self.field;
        let big = BigInt::from(bound);
        self.values_in_box(bound)
            .into_iter()
            .filter(|v| !v.is_zero() && k.norm(v) <= big)
            .map(|v| class_of(k, &v).expect("box values are totally positive"))
            .collect()
    }

    /// Classes of `S` with norm at most `bound` that the form does not
    /// represent, sorted canonically. One value sweep, then set difference;
    /// the per-target [`QForm::represents`] is the independent oracle.
    pub fn non_represented_up_to(&self, s: &SSpec, bound: u64) -> Vec<SquareClass> {
        self.missing_classes(bound, &|k, c| s.contains(k, c))
    }

    pub(crate) fn missing_classes(
        &self,
        bound: u64,
        pred: &dyn Fn(&FieldCtx, &SquareClass) -> bool,
    ) -> Vec<SquareClass> {
        let wanted = enumerate_classes_filtered(&self.field, bound, |k, c| pred(k, c));
        let have = self.represented_classes_up_to(bound);
        wanted.into_iter().filter(|c| !have.contains(c)).collect()
    }

    /// Bounded universality certificate: true iff no class of `S` with norm
    /// at most `bound` is missed. Never a proof of unbounded universality.
    pub fn is_universal_up_to(&self, s: &SSpec, bound: u64) -> bool {
        self.non_represented_up_to(s, bound).is_empty()
    }
}

/// The sweep box for a norm bound: embedding caps `H1 = eps^2 sqrt(B)`,
/// `H2 = sqrt(B)` (degree 2) or `[0, B]` (degree 1), with exact membership
/// tests by squared comparisons.
pub(crate) struct SweepBox<'k> {
    k: &'k FieldCtx,
    bound: BigInt,
    bound_elem: AlgInt,
    /// `eps^4 * B`, the square of the dominant cap.
    e4b: AlgInt,
}

impl<'k> SweepBox<'k> {
    pub(crate) fn new(k: &'k FieldCtx, bound: u64) -> SweepBox<'k> {
        let b = BigInt::from(bound);
        let e4b = k.mul_int(&k.eps_fourth(), &b);
        SweepBox { k, bound: b.clone(), bound_elem: AlgInt { a: b, b: BigInt::zero() }, e4b }
    }

    pub(crate) fn contains(&self, x: &AlgInt) -> bool {
        let k = self.k;
        if x.is_zero() {
            return true;
        }
        if k.degree() == 1 {
            return x.a.is_positive() && x.a <= self.bound;
        }
        if !k.is_totally_positive(x) {
            return false;
        }
        let sq = k.square(x);
        k.sign_at(&k.sub(&self.e4b, &sq), Embedding::First) != Ordering::Less
            && k.sign_at(&k.sub(&self.bound_elem, &sq), Embedding::Second) != Ordering::Less
    }

    /// Conservative integer upper bound for `H1 + H2`, the trace cap used by
    /// the Gram sweep.
    fn trace_cap(&self) -> BigInt {
        let sqrt_b = self.bound.sqrt() + 1u32;
        if self.k.degree() == 1 {
            return self.bound.clone();
        }
        let c1 = self.k.ceil_at(&self.k.eps_sq(), Embedding::First) * &sqrt_b;
        c1 + sqrt_b
    }

    /// Conservative per-embedding integer bounds `M_e >= sqrt(H_e / c_e)`
    /// for the nonzero-coordinate set of a diagonal coefficient `c`.
    fn coord_bounds(&self, c: &AlgInt) -> (BigInt, BigInt) {
        let k = self.k;
        let n = k.norm(c);
        debug_assert!(n.is_positive());
        let sqrt_b = self.bound.sqrt() + 1u32;
        // sigma1(z)^2 <= H1 / sigma1(c) = sqrt(B) * sigma1(eps^2 conj(c)) / N(c)
        let top1 = k.ceil_at(&k.mul(&k.eps_sq(), &k.conjugate(c)), Embedding::First) * &sqrt_b;
        let m1 = top1.div_floor(&n).max(BigInt::zero()).sqrt() + 1u32;
        // sigma2(z)^2 <= H2 / sigma2(c) = sqrt(B) * sigma1(c) / N(c)
        let top2 = k.ceil_at(c, Embedding::First) * &sqrt_b;
        let m2 = top2.div_floor(&n).max(BigInt::zero()).sqrt() + 1u32;
        (m1, m2)
    }
}

/// All nonzero square multiples `c z^2` of a diagonal coefficient that land
/// in the sweep box, `z` taken up to sign.
pub(crate) fn square_multiples_in_box(k: &FieldCtx, c: &AlgInt, sweep: &SweepBox<'_>) -> Vec<AlgInt> {
    let mut out = Vec::new();
    if k.degree() == 1 {
        let mut z = BigInt::one();
        loop {
            let val = &c.a * &z * &z;
            if val > sweep.bound {
                break;
            }
            out.push(AlgInt { a: val, b: BigInt::zero() });
            z += 1u32;
        }
        return out;
    }
    let (m1, m2) = sweep.coord_bounds(c);
    let l1 = -&m1;
    let l2 = -&m2;
    let _ = crate::elements::scan_box(k, [&l1, &l2], [&m1, &m2], &mut |z| {
        // up to sign: keep b > 0 or (b = 0, a > 0)
        let keep = z.b.is_positive() || (z.b.is_zero() && z.a.is_positive());
        if keep {
            let val = k.mul(c, &k.square(&z));
            if sweep.contains(&val) {
                out.push(val);
            }
        }
        ControlFlow::Continue(())
    });
    out.sort();
    out.dedup();
    out
}

/// Value sweep for diagonal forms: fold coefficients one at a time, adding
/// each coefficient's square multiples to the running set of partial values.
/// Sound because the box is downward closed under subtracting totally
/// positive summands, so every in-box value has all its partial sums in-box.
fn layered_diag_values(k: &FieldCtx, coeffs: &[AlgInt], sweep: &SweepBox<'_>) -> BTreeSet<AlgInt> {
    let mut values: BTreeSet<AlgInt> = BTreeSet::new();
    values.insert(AlgInt::zero());
    for c in coeffs {
        let d = square_multiples_in_box(k, c, sweep);
        if d.is_empty() {
            continue;
        }
        let snapshot: Vec<AlgInt> = values.iter().cloned().collect();
        let mut frontier = snapshot;
        // adding the same coefficient repeatedly is impossible (one term per
        // coordinate), so a single product pass suffices
        let mut additions = Vec::new();
        for base in frontier.drain(..) {
            for inc in &d {
                let s = k.add(&base, inc);
                if sweep.contains(&s) {
                    additions.push(s);
                }
            }
        }
        values.extend(additions);
    }
    values
}

/// Per-target exact search for diagonal forms: depth-first over coordinates,
/// pruning on weak positivity of the remaining target. Coefficients are
/// visited in descending norm order; candidate ranges per coordinate come
/// from exact floors of `sigma_e(rem * conj(c)) / N(c)`.
fn represents_diag(k: &FieldCtx, coeffs: &[AlgInt], target: &AlgInt) -> Option<Vec<AlgInt>> {
    let mut order: Vec<usize> = (0..coeffs.len()).collect();
    let norms: Vec<BigInt> = coeffs.iter().map(|c| k.norm(c)).collect();
    order.sort_by(|&i, &j| norms[j].cmp(&norms[i]));
    let sorted: Vec<&AlgInt> = order.iter().map(|&i| &coeffs[i]).collect();
    let mut picked = vec![AlgInt::zero(); coeffs.len()];
    if dfs_diag(k, &sorted, target, 0, &mut picked) {
        let mut witness = vec![AlgInt::zero(); coeffs.len()];
        for (slot, &orig) in order.iter().enumerate() {
            witness[orig] = picked[slot].clone();
        }
        Some(witness)
    } else {
        None
    }
}

fn weakly_nonneg(k: &FieldCtx, x: &AlgInt) -> bool {
    if x.is_zero() {
        return true;
    }
    k.is_totally_positive(x)
}

fn dfs_diag(
    k: &FieldCtx,
    coeffs: &[&AlgInt],
    rem: &AlgInt,
    level: usize,
    picked: &mut [AlgInt],
) -> bool {
    if level == coeffs.len() {
        return rem.is_zero();
    }
    let c = coeffs[level];
    let n = k.norm(c);
    if k.degree() == 1 {
        let cap = rem.a.div_floor(&c.a);
        if cap.is_negative() {
            return false;
        }
        let hi = cap.sqrt();
        let mut x = BigInt::zero();
        while x <= hi {
            let used = &c.a * &x * &x;
            let new_rem = AlgInt { a: &rem.a - used, b: BigInt::zero() };
            if !new_rem.a.is_negative() {
                picked[level] = AlgInt { a: x.clone(), b: BigInt::zero() };
                if dfs_diag(k, coeffs, &new_rem, level + 1, picked) {
                    return true;
                }
            }
            x += 1u32;
        }
        return false;
    }
    // |sigma_e(x)|^2 <= sigma_e(rem) / sigma_e(c) = sigma_e(rem conj(c)) / N(c)
    let p = k.mul(rem, &k.conjugate(c));
    let m1 = k.floor_div_at(&p, &n, Embedding::First).max(BigInt::zero()).sqrt() + 1u32;
    let m2 = k.floor_div_at(&p, &n, Embedding::Second).max(BigInt::zero()).sqrt() + 1u32;
    let l1 = -&m1;
    let l2 = -&m2;
    let mut hit = false;
    let _ = crate::elements::scan_box(k, [&l1, &l2], [&m1, &m2], &mut |z| {
        if !(z.b.is_positive() || (z.b.is_zero() && !z.a.is_negative())) {
            return ControlFlow::Continue(());
        }
        let used = k.mul(c, &k.square(&z));
        let new_rem = k.sub(rem, &used);
        if weakly_nonneg(k, &new_rem) {
            picked[level] = z;
            if dfs_diag(k, coeffs, &new_rem, level + 1, picked) {
                hit = true;
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    });
    hit
}

/// Leading principal minors of a symmetric matrix over the ring, by
/// fraction-free (Bareiss) elimination; the divisions are exact in any
/// integral domain. A zero pivot means the corresponding minor vanishes;
/// elimination cannot continue, so the vanishing minor is returned as the
/// last entry and the caller rejects.
fn leading_principal_minors(k: &FieldCtx, a: &[Vec<AlgInt>]) -> Result<Vec<AlgInt>> {
    let n = a.len();
    let mut m: Vec<Vec<AlgInt>> = a.to_vec();
    let mut minors = Vec::with_capacity(n);
    let mut prev = AlgInt::one();
    for step in 0..n {
        let pivot = m[step][step].clone();
        minors.push(pivot.clone());
        if pivot.is_zero() {
            return Ok(minors);
        }
        if step + 1 == n {
            break;
        }
        for i in (step + 1)..n {
            for j in (step + 1)..n {
                let num = k.sub(&k.mul(&pivot, &m[i][j]), &k.mul(&m[i][step], &m[step][j]));
                let q = k
                    .divides(&prev, &num)?
                    .expect("Bareiss division is exact over an integral domain");
                m[i][j] = q;
            }
        }
        prev = pivot;
    }
    Ok(minors)
}

/// Enumerates all integer vectors `x` with `T(x) <= cap` for a positive
/// definite symmetric rational matrix `T`, by exact rational Cholesky
/// decomposition. Coordinate ranges use exact floors of `r +- sqrt(s)`
/// (floating point proposes, integer arithmetic verifies). Candidates at
/// each level are visited center-outward, deterministically. The zero
/// vector is not reported.
pub(crate) fn enumerate_ball(
    t: &[Vec<BigRational>],
    cap: &BigRational,
    visit: &mut impl FnMut(&[BigInt], &BigRational) -> ControlFlow<()>,
) -> ControlFlow<()> {
    let n = t.len();
    if n == 0 || cap.is_negative() {
        return ControlFlow::Continue(());
    }
    // T(x) = sum_i d_i (x_i + sum_{j>i} l[i][j] x_j)^2
    let mut g: Vec<Vec<BigRational>> = t.to_vec();
    let mut d = vec![BigRational::zero(); n];
    let mut l = vec![vec![BigRational::zero(); n]; n];
    for i in 0..n {
        d[i] = g[i][i].clone();
        assert!(d[i].is_positive(), "trace form must be positive definite");
        for j in (i + 1)..n {
            l[i][j] = &g[i][j] / &d[i];
        }
        for r in (i + 1)..n {
            for c in (i + 1)..n {
                let adj = &d[i] * &l[i][r] * &l[i][c];
                g[r][c] -= adj;
            }
        }
    }
    let mut x = vec![BigInt::zero(); n];
    ball_dfs(&d, &l, cap.clone(), n, &mut x, visit)
}

fn ball_dfs(
    d: &[BigRational],
    l: &[Vec<BigRational>],
    rem: BigRational,
    level: usize,
    x: &mut Vec<BigInt>,
    visit: &mut impl FnMut(&[BigInt], &BigRational) -> ControlFlow<()>,
) -> ControlFlow<()> {
    if level == 0 {
        if x.iter().any(|c| !c.is_zero()) {
            let total = ball_total(d, l, x);
            return visit(x, &total);
        }
        return ControlFlow::Continue(());
    }
    let i = level - 1;
    let mut center = BigRational::zero();
    for j in level..x.len() {
        center += &l[i][j] * BigRational::from_integer(x[j].clone());
    }
    let s = &rem / &d[i];
    // x_i ranges over [-center - sqrt(s), -center + sqrt(s)]
    let hi = floor_plus_sqrt(&(-center.clone()), &s);
    let lo = -floor_plus_sqrt(&center, &s);
    if lo > hi {
        return ControlFlow::Continue(());
    }
    // deterministic center-outward order
    let mid_f = (-&center).to_f64().unwrap_or(0.0).round();
    let mut mid = BigInt::from(mid_f as i64);
    if mid < lo {
        mid = lo.clone();
    }
    if mid > hi {
        mid = hi.clone();
    }
    let mut offset = BigInt::zero();
    loop {
        let pair = if offset.is_zero() {
            [Some(mid.clone()), None]
        } else {
            [Some(&mid + &offset), Some(&mid - &offset)]
        };
        let mut advanced = false;
        for cand in pair.into_iter().flatten() {
            if cand < lo || cand > hi {
                continue;
            }
            advanced = true;
            let shifted = BigRational::from_integer(cand.clone()) + &center;
            let used = &d[i] * &shifted * &shifted;
            if used <= rem {
                x[i] = cand;
                ball_dfs(d, l, &rem - used, level - 1, x, visit)?;
                x[i] = BigInt::zero();
            }
        }
        if !advanced && (&mid + &offset > hi) && (&mid - &offset < lo) {
            break;
        }
        offset += 1;
    }
    ControlFlow::Continue(())
}

fn ball_total(d: &[BigRational], l: &[Vec<BigRational>], x: &[BigInt]) -> BigRational {
    let n = d.len();
    let mut total = BigRational::zero();
    for i in 0..n {
        let mut v = BigRational::from_integer(x[i].clone());
        for j in (i + 1)..n {
            v += &l[i][j] * BigRational::from_integer(x[j].clone());
        }
        total += &d[i] * &v * &v;
    }
    total
}

/// Exact `floor(r + sqrt(s))` for rationals with `s >= 0`: a floating-point
/// guess corrected by exact comparisons.
fn floor_plus_sqrt(r: &BigRational, s: &BigRational) -> BigInt {
    debug_assert!(!s.is_negative());
    let guess = r.to_f64().unwrap_or(0.0) + s.to_f64().unwrap_or(0.0).max(0.0).sqrt();
    let mut k = BigInt::from(guess.floor() as i64);
    // k <= r + sqrt(s)  iff  k - r <= sqrt(s)  iff  k - r <= 0 or (k-r)^2 <= s
    let fits = |k: &BigInt| {
        let diff = BigRational::from_integer(k.clone()) - r;
        !diff.is_positive() || &(&diff * &diff) <= s
    };
    while !fits(&k) {
        k -= 1;
    }
    loop {
        let next = &k + 1;
        if fits(&next) {
            k = next;
        } else {
            break;
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sspec::SSpec;

    fn f(d: u64) -> FieldCtx {
        FieldCtx::quadratic(d).unwrap()
    }

    fn q() -> FieldCtx {
        FieldCtx::rational()
    }

    fn ai(a: i64, b: i64) -> AlgInt {
        AlgInt::new(a, b)
    }

    #[test]
    fn validation_examples() {
        // sum of four squares over Q(sqrt5): valid, classical
        let form = QForm::diagonal_ints(f(5), &[1, 1, 1, 1]).unwrap();
        assert!(form.is_classical());

        // M = [[1,2],[2,1]]: B-matrix [[1,1],[1,1]] is singular
        let m = vec![
            vec![AlgInt::from_int(1), AlgInt::from_int(2)],
            vec![AlgInt::from_int(2), AlgInt::from_int(1)],
        ];
        match QForm::gram(q(), m) {
            Err(Error::NotPositiveDefinite { minor: 2, .. }) => {}
            other => panic!("expected singular rejection, got {other:?}"),
        }

        // M = [[1,1],[1,1]]: x^2 + xy + y^2, valid and non-classical
        let m = vec![
            vec![AlgInt::from_int(1), AlgInt::from_int(1)],
            vec![AlgInt::from_int(1), AlgInt::from_int(1)],
        ];
        let nc = QForm::gram(q(), m).unwrap();
        assert!(!nc.is_classical());

        // negative diagonal entry
        assert!(matches!(
            QForm::diagonal_ints(q(), &[1, -1]),
            Err(Error::BadDiagonalCoefficient(_))
        ));

        // asymmetric Gram
        let m = vec![
            vec![AlgInt::from_int(1), AlgInt::from_int(1)],
            vec![AlgInt::from_int(0), AlgInt::from_int(1)],
        ];
        assert!(matches!(QForm::gram(q(), m), Err(Error::AsymmetricGram(0, 1))));
    }

    #[test]
    fn indefinite_over_one_embedding_is_rejected() {
        // 1 - w over Q(sqrt2) is positive at the second embedding only... use
        // coefficient w = sqrt2 itself: positive first, negative second
        match QForm::diagonal(f(2), vec![ai(0, 1)]) {
            Err(Error::BadDiagonalCoefficient(_)) => {}
            other => panic!("expected rejection, got {other:?}"),
        }
        // Gram with a mixed-sign entry: [[sqrt2]] doubled is 2*sqrt2
        match QForm::gram(f(2), vec![vec![ai(0, 1)]]) {
            Err(Error::NotPositiveDefinite { minor: 1, embedding: 2 }) => {}
            other => panic!("expected embedding-2 failure, got {other:?}"),
        }
    }

    #[test]
    fn represents_examples() {
        let j = QForm::diagonal_ints(q(), &[2, 2, 3, 4]).unwrap();
        assert!(j.represents(&AlgInt::from_int(1)).unwrap().is_none());
        assert!(j.represents(&AlgInt::from_int(2)).unwrap().is_some());

        let k5 = f(5);
        let form = QForm::diagonal_ints(k5.clone(), &[1, 1, 3, 3]).unwrap();
        // (7+sqrt5)/2 = 3 + w is not represented
        assert!(form.represents(&ai(3, 1)).unwrap().is_none());

        let one = QForm::diagonal_ints(k5.clone(), &[1]).unwrap();
        // (3+sqrt5)/2 = 1 + w = phi^2
        let w = one.represents(&ai(1, 1)).unwrap().unwrap();
        assert_eq!(k5.square(&w[0]), ai(1, 1));
    }

    #[test]
    fn zero_rank_and_zero_target() {
        let z = QForm::zero(q());
        assert!(z.represents(&AlgInt::zero()).unwrap().is_some());
        assert!(z.represents(&AlgInt::from_int(1)).unwrap().is_none());
        assert!(!z.is_universal_up_to(&SSpec::All, 1));
        let form = QForm::diagonal_ints(q(), &[2]).unwrap();
        assert_eq!(form.represents(&AlgInt::zero()).unwrap(), Some(vec![AlgInt::zero()]));
    }

    #[test]
    fn sweep_examples() {
        let lagrange = QForm::diagonal_ints(q(), &[1, 1, 1, 1]).unwrap();
        assert!(lagrange.non_represented_up_to(&SSpec::All, 100).is_empty());

        let j = QForm::diagonal_ints(q(), &[2, 2, 3, 4]).unwrap();
        let missing = j.non_represented_up_to(&SSpec::All, 50);
        assert_eq!(missing.len(), 1);
        assert_eq!(missing[0].rep(), &AlgInt::one());

        let three_squares = QForm::diagonal_ints(q(), &[1, 1, 1]).unwrap();
        assert!(!three_squares.is_universal_up_to(&SSpec::All, 10)); // misses 7
    }

    #[test]
    fn sweep_agrees_with_per_target_oracle() {
        let k = q();
        let form = QForm::diagonal_ints(k.clone(), &[1, 2]).unwrap();
        let missing: BTreeSet<_> =
            form.non_represented_up_to(&SSpec::All, 50).into_iter().collect();
        for n in 1..=50u64 {
            let t = AlgInt::from_int(n as i64);
            let c = class_of(&k, &t).unwrap();
            let rep = form.represents(&t).unwrap().is_some();
            assert_eq!(rep, !missing.contains(&c), "disagreement at {n}");
        }
        // 5 is one of the misses of x^2 + 2y^2
        assert!(missing.iter().any(|c| c.rep() == &AlgInt::from_int(5)));
    }

    #[test]
    fn sweep_agrees_with_oracle_over_quadratic_field() {
        let k = f(2);
        let form = QForm::diagonal(k.clone(), vec![ai(1, 0), ai(2, 1)]).unwrap();
        let missing: BTreeSet<_> =
            form.non_represented_up_to(&SSpec::All, 30).into_iter().collect();
        for c in crate::elements::enumerate_classes(&k, 30) {
            let rep = form.represents(c.rep()).unwrap().is_some();
            assert_eq!(rep, !missing.contains(&c), "disagreement at {c}");
        }
    }

    #[test]
    fn gram_over_quadratic_field_matches_diagonal_equivalent() {
        // the Gram of the diagonal form <1, 2+w> over Q(sqrt2) in the basis
        // (e1, e1 + e2): Q(x, y) = (x+y)^2 + (2+w) y^2, so M holds
        // diag (1, 3+w) with off-diagonal 2B = 2
        let k = f(2);
        let m = vec![
            vec![ai(1, 0), ai(2, 0)],
            vec![ai(2, 0), ai(3, 1)],
        ];
        let g = QForm::gram(k.clone(), m).unwrap();
        assert!(g.is_classical());
        let d = QForm::diagonal(k.clone(), vec![ai(1, 0), ai(2, 1)]).unwrap();
        for c in crate::elements::enumerate_classes(&k, 30) {
            let via_gram = g.represents(c.rep()).unwrap();
            let via_diag = d.represents(c.rep()).unwrap().is_some();
            assert_eq!(via_gram.is_some(), via_diag, "mismatch at {c}");
            if let Some(w) = via_gram {
                assert_eq!(g.evaluate(&w).unwrap(), *c.rep());
            }
        }
        // the bounded sweeps agree as well
        assert_eq!(g.represented_classes_up_to(30), d.represented_classes_up_to(30));
    }

    #[test]
    fn nonclassical_gram_over_quadratic_field() {
        // (2+w)x^2 + xy + 2y^2 over Q(sqrt2): the odd off-diagonal makes the
        // bilinear values half-integral
        let k = f(2);
        let m = vec![
            vec![ai(2, 1), ai(1, 0)],
            vec![ai(1, 0), ai(2, 0)],
        ];
        let g = QForm::gram(k.clone(), m).unwrap();
        assert!(!g.is_classical());
        // spot-check a value: (x,y) = (1,1) gives (2+w) + 1 + 2 = 5 + w
        assert_eq!(g.evaluate(&[ai(1, 0), ai(1, 0)]).unwrap(), ai(5, 1));
        assert!(g.represents(&ai(5, 1)).unwrap().is_some());
        // sweep consistency with the per-target oracle
        let missing: BTreeSet<_> =
            g.non_represented_up_to(&SSpec::All, 20).into_iter().collect();
        for c in crate::elements::enumerate_classes(&k, 20) {
            assert_eq!(
                g.represents(c.rep()).unwrap().is_some(),
                !missing.contains(&c),
                "gram sweep/oracle split at {c}"
            );
        }
    }

    #[test]
    fn gram_representation_matches_diagonal_equivalent() {
        // x^2 + 2xy + 2y^2 = (x+y)^2 + y^2 is equivalent to <1,1>
        let m = vec![
            vec![AlgInt::from_int(1), AlgInt::from_int(2)],
            vec![AlgInt::from_int(2), AlgInt::from_int(2)],
        ];
        let g = QForm::gram(q(), m).unwrap();
        let d = QForm::diagonal_ints(q(), &[1, 1]).unwrap();
        for n in 1..=30i64 {
            let t = AlgInt::from_int(n);
            assert_eq!(
                g.represents(&t).unwrap().is_some(),
                d.represents(&t).unwrap().is_some(),
                "mismatch at {n}"
            );
        }
    }

    #[test]
    fn transform_examples() {
        let k = q();
        let a = QForm::diagonal_ints(k.clone(), &[1]).unwrap();
        let b = QForm::diagonal_ints(k.clone(), &[2, 3]).unwrap();
        let sum = a.orthogonal_sum(&b).unwrap();
        assert_eq!(sum.diag_coeffs().unwrap().to_vec(), vec![
            AlgInt::from_int(1),
            AlgInt::from_int(2),
            AlgInt::from_int(3)
        ]);

        let two = QForm::diagonal_ints(k.clone(), &[1, 1]).unwrap();
        let scaled = two.scale(&AlgInt::from_int(2)).unwrap();
        assert!(scaled.represents(&AlgInt::from_int(2)).unwrap().is_some());
        assert!(scaled.represents(&AlgInt::from_int(1)).unwrap().is_none());

        let k5 = f(5);
        // <(5+sqrt5)/2> = <2 + w>
        let form = QForm::diagonal(k5.clone(), vec![ai(2, 1)]).unwrap();
        let conj = form.conjugate_form();
        assert_eq!(conj.diag_coeffs().unwrap()[0], k5.conjugate(&ai(2, 1)));
        // both represent the same classes composed with conjugation
        let c1: Vec<_> = form
            .represented_classes_up_to(30)
            .into_iter()
            .map(|c| class_of(&k5, &k5.conjugate(c.rep())).unwrap())
            .collect();
        let c2: Vec<_> = conj.represented_classes_up_to(30).into_iter().collect();
        let c1: BTreeSet<_> = c1.into_iter().collect();
        let c2: BTreeSet<_> = c2.into_iter().collect();
        assert_eq!(c1, c2);

        assert!(matches!(
            form.orthogonal_sum(&QForm::diagonal_ints(q(), &[1]).unwrap()),
            Err(Error::FieldMismatch)
        ));
    }

    #[test]
    fn lift_examples() {
        let k5 = f(5);
        let four = QForm::diagonal_ints(q(), &[1, 1, 1, 1]).unwrap();
        let lifted = four.lift(&k5).unwrap();
        // (3+sqrt5)/2 is a square, hence represented
        assert!(lifted.represents(&ai(1, 1)).unwrap().is_some());

        let z = QForm::zero(q()).lift(&k5).unwrap();
        assert_eq!(z.rank(), 0);

        let form = QForm::diagonal_ints(q(), &[1, 1, 3, 3]).unwrap().lift(&k5).unwrap();
        assert!(form.represents(&ai(3, 1)).unwrap().is_none());

        assert!(matches!(
            QForm::diagonal_ints(k5, &[1]).unwrap().lift(&q()),
            Err(Error::LiftSourceNotRational)
        ));
    }

    #[test]
    fn unit_square_twist_invariance() {
        let k = f(3);
        let form = QForm::diagonal(k.clone(), vec![ai(1, 0), ai(3, 1)]).unwrap();
        let eps_sq = k.eps_sq();
        for c in crate::elements::enumerate_classes(&k, 12) {
            let twisted = k.mul(c.rep(), &eps_sq);
            assert_eq!(
                form.represents(c.rep()).unwrap().is_some(),
                form.represents(&twisted).unwrap().is_some(),
                "twist mismatch at {c}"
            );
        }
    }

    #[test]
    fn rational_witnesses_lift_for_diagonal_forms() {
        let k5 = f(5);
        for coeffs in [&[1i64, 2][..], &[1, 1, 2][..]] {
            let zform = QForm::diagonal_ints(q(), coeffs).unwrap();
            let lifted = zform.lift(&k5).unwrap();
            for n in 1..=50i64 {
                let t = AlgInt::from_int(n);
                if zform.represents(&t).unwrap().is_some() {
                    assert!(
                        lifted.represents(&t).unwrap().is_some(),
                        "rational witness for {n} did not lift"
                    );
                }
            }
        }
    }

    #[test]
    fn escalation_monotonicity() {
        let k = q();
        let base = QForm::diagonal_ints(k.clone(), &[1, 3]).unwrap();
        let bigger = base.orthogonal_sum(&QForm::diagonal_ints(k, &[5]).unwrap()).unwrap();
        let m1: BTreeSet<_> = base.non_represented_up_to(&SSpec::All, 40).into_iter().collect();
        let m2: BTreeSet<_> = bigger.non_represented_up_to(&SSpec::All, 40).into_iter().collect();
        assert!(m2.is_subset(&m1));
    }

    #[test]
    fn witnesses_reevaluate_exactly() {
        let k = f(2);
        let form = QForm::diagonal(k.clone(), vec![ai(1, 0), ai(2, 1), ai(2, 0)]).unwrap();
        for c in crate::elements::enumerate_classes(&k, 40) {
            if let Some(w) = form.represents(c.rep()).unwrap() {
                assert_eq!(form.evaluate(&w).unwrap(), *c.rep());
            }
        }
    }
}

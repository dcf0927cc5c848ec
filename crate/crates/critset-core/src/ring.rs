//! Exact arithmetic in the ring of integers of Q or a real quadratic field.
//!
//! Elements are stored as `a + b*w` against the integral basis `{1, w}` where
//! `w = sqrt(D)` for `D = 2, 3 (mod 4)` and `w = (1 + sqrt(D))/2` for
//! `D = 1 (mod 4)`. Every predicate (sign at an embedding, comparison,
//! divisibility) is decided by integer arithmetic; no floating-point value
//! ever decides a result. The rational field is the degenerate `b = 0` case
//! with trivial unit group, so higher layers stay field-generic.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// The two real embeddings of a quadratic field. `First` sends `w` to the
/// positive root of its minimal polynomial (the dominant embedding); `Second`
/// sends it to the other root. For the rational field both coincide.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Embedding {
    First,
    Second,
}

impl Embedding {
    pub const BOTH: [Embedding; 2] = [Embedding::First, Embedding::Second];

    pub fn other(self) -> Embedding {
        match self {
            Embedding::First => Embedding::Second,
            Embedding::Second => Embedding::First,
        }
    }
}

/// Which generator the integral basis uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OmegaMode {
    /// `w = sqrt(D)` (for `D = 2, 3 mod 4`), discriminant `4D`.
    SqrtD,
    /// `w = (1 + sqrt(D))/2` (for `D = 1 mod 4`), discriminant `D`.
    HalfOnePlusSqrtD,
}

/// An element `a + b*w` of the ring of integers, interpreted against an
/// ambient [`FieldCtx`]. Coordinates are unbounded integers.
///
/// The derived `Ord` is the coordinate-lexicographic storage order used for
/// deterministic set containers; it is unrelated to the partial order on
/// totally positive elements (see [`FieldCtx::totally_leq`]).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AlgInt {
    pub a: BigInt,
    pub b: BigInt,
}

impl AlgInt {
    pub fn new(a: impl Into<BigInt>, b: impl Into<BigInt>) -> AlgInt {
        AlgInt { a: a.into(), b: b.into() }
    }

    /// The rational element `n`.
    pub fn from_int(n: impl Into<BigInt>) -> AlgInt {
        AlgInt { a: n.into(), b: BigInt::zero() }
    }

    pub fn zero() -> AlgInt {
        AlgInt::from_int(0)
    }

    pub fn one() -> AlgInt {
        AlgInt::from_int(1)
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.a.is_one() && self.b.is_zero()
    }

    /// True when the element lies in `Z`, i.e. `b = 0`.
    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }
}

impl fmt::Debug for AlgInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} + {}w)", self.a, self.b)
    }
}

impl fmt::Display for AlgInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            write!(f, "{}", self.a)
        } else if self.a.is_zero() {
            write!(f, "{}*w", self.b)
        } else if self.b.is_negative() {
            write!(f, "{}{}*w", self.a, self.b)
        } else {
            write!(f, "{}+{}*w", self.a, self.b)
        }
    }
}

/// Parsed request for [`FieldCtx::new`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FieldDescriptor {
    Rational,
    Quadratic(u64),
}

impl FieldDescriptor {
    /// Accepts `"Q"` or `"Qsqrt:D"`.
    pub fn parse(s: &str) -> Result<FieldDescriptor> {
        if s == "Q" {
            return Ok(FieldDescriptor::Rational);
        }
        if let Some(d) = s.strip_prefix("Qsqrt:") {
            let d: u64 = d
                .parse()
                .map_err(|_| Error::BadFieldDescriptor(s.to_string()))?;
            return Ok(FieldDescriptor::Quadratic(d));
        }
        Err(Error::BadFieldDescriptor(s.to_string()))
    }
}

#[derive(Clone, Debug)]
struct QuadFieldData {
    d: BigInt,
    mode: OmegaMode,
    discriminant: BigInt,
    /// `floor(sqrt(discriminant))`; the discriminant is never a square.
    disc_isqrt: BigInt,
    omega_trace: BigInt,
    omega_norm: BigInt,
    fund_unit: AlgInt,
    fund_unit_norm: i8,
    /// `eps^2`, its inverse `eps^-2 = conj(eps^2)`, and `eps^4`.
    eps_sq: AlgInt,
    eps_sq_inv: AlgInt,
    eps_fourth: AlgInt,
}

/// Descriptor of the base field (Q or Q(sqrt(D))) with generator data,
/// discriminant, and fundamental unit. Immutable and shareable across
/// threads; every operation is a pure function of its inputs.
#[derive(Clone, Debug)]
pub struct FieldCtx {
    quad: Option<QuadFieldData>,
}

impl PartialEq for FieldCtx {
    fn eq(&self, other: &FieldCtx) -> bool {
        match (&self.quad, &other.quad) {
            (None, None) => true,
            (Some(a), Some(b)) => a.d == b.d,
            _ => false,
        }
    }
}
impl Eq for FieldCtx {}

impl FieldCtx {
    /// Builds the field context, computing the fundamental unit by the
    /// continued-fraction expansion of `w` (Pell-type recurrence).
    pub fn new(desc: &FieldDescriptor) -> Result<FieldCtx> {
        match desc {
            FieldDescriptor::Rational => Ok(FieldCtx { quad: None }),
            FieldDescriptor::Quadratic(d) => FieldCtx::quadratic(*d),
        }
    }

    pub fn rational() -> FieldCtx {
        FieldCtx { quad: None }
    }

    pub fn quadratic(d: u64) -> Result<FieldCtx> {
        if d <= 1 {
            return Err(Error::BadRadicand { d, square_factor: 1 });
        }
        if d > 10_000_000_000 {
            return Err(Error::RadicandTooLarge(d));
        }
        if let Some(p) = square_factor(d) {
            return Err(Error::BadRadicand { d, square_factor: p });
        }
        let dd = BigInt::from(d);
        let mode = if d % 4 == 1 {
            OmegaMode::HalfOnePlusSqrtD
        } else {
            OmegaMode::SqrtD
        };
        let (discriminant, omega_trace, omega_norm) = match mode {
            OmegaMode::SqrtD => (4u32 * &dd, BigInt::zero(), -&dd),
            OmegaMode::HalfOnePlusSqrtD => {
                (dd.clone(), BigInt::one(), (BigInt::one() - &dd) / 4)
            }
        };
        let disc_isqrt = discriminant.sqrt();
        let mut k = FieldCtx {
            quad: Some(QuadFieldData {
                d: dd,
                mode,
                discriminant,
                disc_isqrt,
                omega_trace,
                omega_norm,
                fund_unit: AlgInt::one(),
                fund_unit_norm: 1,
                eps_sq: AlgInt::one(),
                eps_sq_inv: AlgInt::one(),
                eps_fourth: AlgInt::one(),
            }),
        };
        let eps = k.compute_fundamental_unit()?;
        let eps_norm = k.norm(&eps);
        let eps_sq = k.mul(&eps, &eps);
        let eps_sq_inv = k.conjugate(&eps_sq);
        let eps_fourth = k.mul(&eps_sq, &eps_sq);
        {
            let q = k.quad.as_mut().unwrap();
            q.fund_unit = eps;
            q.fund_unit_norm = if eps_norm.is_one() { 1 } else { -1 };
            q.eps_sq = eps_sq;
            q.eps_sq_inv = eps_sq_inv;
            q.eps_fourth = eps_fourth;
        }
        Ok(k)
    }

    pub fn degree(&self) -> u32 {
        if self.quad.is_some() {
            2
        } else {
            1
        }
    }

    pub fn is_rational_field(&self) -> bool {
        self.quad.is_none()
    }

    pub fn radicand(&self) -> Option<&BigInt> {
        self.quad.as_ref().map(|q| &q.d)
    }

    pub fn omega_mode(&self) -> Option<OmegaMode> {
        self.quad.as_ref().map(|q| q.mode)
    }

    /// Discriminant of the field; `1` for the rational field.
    pub fn discriminant(&self) -> BigInt {
        match &self.quad {
            Some(q) => q.discriminant.clone(),
            None => BigInt::one(),
        }
    }

    /// `Tr(w)`: `0` for `w = sqrt(D)`, `1` for `w = (1+sqrt(D))/2`.
    fn omega_trace(&self) -> BigInt {
        match &self.quad {
            Some(q) => q.omega_trace.clone(),
            None => BigInt::zero(),
        }
    }

    /// `N(w)`: `-D` or `(1-D)/4`.
    fn omega_norm(&self) -> BigInt {
        match &self.quad {
            Some(q) => q.omega_norm.clone(),
            None => BigInt::zero(),
        }
    }

    /// The fundamental unit: smallest unit exceeding 1 at the dominant
    /// embedding. For the rational field this is `1`.
    pub fn fund_unit(&self) -> AlgInt {
        match &self.quad {
            Some(q) => q.fund_unit.clone(),
            None => AlgInt::one(),
        }
    }

    /// `N(eps)`, either `+1` or `-1`. `+1` iff the fundamental unit is
    /// totally positive.
    pub fn fund_unit_norm(&self) -> i8 {
        match &self.quad {
            Some(q) => q.fund_unit_norm,
            None => 1,
        }
    }

    pub fn eps_sq(&self) -> AlgInt {
        match &self.quad {
            Some(q) => q.eps_sq.clone(),
            None => AlgInt::one(),
        }
    }

    pub fn eps_sq_inv(&self) -> AlgInt {
        match &self.quad {
            Some(q) => q.eps_sq_inv.clone(),
            None => AlgInt::one(),
        }
    }

    pub fn eps_fourth(&self) -> AlgInt {
        match &self.quad {
            Some(q) => q.eps_fourth.clone(),
            None => AlgInt::one(),
        }
    }

    pub(crate) fn disc_isqrt(&self) -> BigInt {
        match &self.quad {
            Some(q) => q.disc_isqrt.clone(),
            None => BigInt::one(),
        }
    }

    // ---- arithmetic -------------------------------------------------------

    pub fn add(&self, x: &AlgInt, y: &AlgInt) -> AlgInt {
        AlgInt { a: &x.a + &y.a, b: &x.b + &y.b }
    }

    pub fn sub(&self, x: &AlgInt, y: &AlgInt) -> AlgInt {
        AlgInt { a: &x.a - &y.a, b: &x.b - &y.b }
    }

    pub fn neg(&self, x: &AlgInt) -> AlgInt {
        AlgInt { a: -&x.a, b: -&x.b }
    }

    /// Product using `w^2 = Tr(w)*w - N(w)`.
    pub fn mul(&self, x: &AlgInt, y: &AlgInt) -> AlgInt {
        let t = self.omega_trace();
        let n = self.omega_norm();
        let bb = &x.b * &y.b;
        AlgInt {
            a: &x.a * &y.a - &n * &bb,
            b: &x.a * &y.b + &x.b * &y.a + &t * &bb,
        }
    }

    pub fn square(&self, x: &AlgInt) -> AlgInt {
        self.mul(x, x)
    }

    pub fn mul_int(&self, x: &AlgInt, n: &BigInt) -> AlgInt {
        AlgInt { a: &x.a * n, b: &x.b * n }
    }

    /// The image under the nontrivial automorphism; identity in degree 1.
    pub fn conjugate(&self, x: &AlgInt) -> AlgInt {
        if self.quad.is_none() {
            return x.clone();
        }
        let t = self.omega_trace();
        AlgInt { a: &x.a + &t * &x.b, b: -&x.b }
    }

    /// `(N(x), Tr(x))`, both exact. In degree 1 the norm and trace are the
    /// element itself.
    pub fn norm_trace(&self, x: &AlgInt) -> (BigInt, BigInt) {
        (self.norm(x), self.trace(x))
    }

    pub fn norm(&self, x: &AlgInt) -> BigInt {
        if self.quad.is_none() {
            return x.a.clone();
        }
        let t = self.omega_trace();
        let n = self.omega_norm();
        &x.a * &x.a + &x.a * &x.b * t + &x.b * &x.b * n
    }

    pub fn trace(&self, x: &AlgInt) -> BigInt {
        if self.quad.is_none() {
            return x.a.clone();
        }
        let t = self.omega_trace();
        2u32 * &x.a + &x.b * t
    }

    pub fn is_unit(&self, x: &AlgInt) -> bool {
        let n = self.norm(x);
        n.is_one() || (-n).is_one()
    }

    /// Integer powers of a unit (negative exponents use the conjugate and
    /// the unit's norm).
    pub fn unit_pow(&self, eps: &AlgInt, k: i64) -> AlgInt {
        debug_assert!(self.is_unit(eps));
        let mut base = if k >= 0 {
            eps.clone()
        } else {
            // eps^-1 = conj(eps) / N(eps)
            let c = self.conjugate(eps);
            if self.norm(eps).is_one() {
                c
            } else {
                self.neg(&c)
            }
        };
        let mut e = k.unsigned_abs();
        let mut acc = AlgInt::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.square(&base);
            e >>= 1;
        }
        acc
    }

    // ---- exact sign analysis ---------------------------------------------

    /// Components `(u, v)` such that the value of `x` at the embedding is
    /// `(u + v*sqrt(disc)) / 2`.
    fn sig_components(&self, x: &AlgInt, emb: Embedding) -> (BigInt, BigInt) {
        let t = self.omega_trace();
        let u = 2u32 * &x.a + &x.b * t;
        let v = match emb {
            Embedding::First => x.b.clone(),
            Embedding::Second => -&x.b,
        };
        (u, v)
    }

    /// Exact sign of `x` at the chosen embedding.
    pub fn sign_at(&self, x: &AlgInt, emb: Embedding) -> Ordering {
        if self.quad.is_none() {
            return x.a.cmp(&BigInt::zero());
        }
        let (u, v) = self.sig_components(x, emb);
        sign_quad(&u, &v, &self.discriminant())
    }

    /// Exact comparison of `x` and `y` at the chosen embedding.
    pub fn cmp_at(&self, x: &AlgInt, y: &AlgInt, emb: Embedding) -> Ordering {
        self.sign_at(&self.sub(x, y), emb)
    }

    /// True iff `x` is strictly positive at every embedding (zero is not).
    pub fn is_totally_positive(&self, x: &AlgInt) -> bool {
        Embedding::BOTH
            .iter()
            .take(self.degree() as usize)
            .all(|&e| self.sign_at(x, e) == Ordering::Greater)
    }

    /// True iff `x` is nonnegative at every embedding and, when some
    /// embedding vanishes, `x = 0`. This is the closure of the totally
    /// positive cone intersected with the ring.
    pub fn is_totally_nonneg(&self, x: &AlgInt) -> bool {
        x.is_zero() || self.is_totally_positive(x)
    }

    /// The convention for `x <= y`: strictly smaller at every embedding, or
    /// equal.
    pub fn totally_leq(&self, x: &AlgInt, y: &AlgInt) -> bool {
        x == y || self.is_totally_positive(&self.sub(y, x))
    }

    pub fn totally_lt(&self, x: &AlgInt, y: &AlgInt) -> bool {
        self.is_totally_positive(&self.sub(y, x))
    }

    // ---- exact floors of embedding values ----------------------------------

    /// `floor(value_at(x, emb) / m)` for a positive integer `m`, exact.
    pub fn floor_div_at(&self, x: &AlgInt, m: &BigInt, emb: Embedding) -> BigInt {
        assert!(m.is_positive());
        if self.quad.is_none() {
            return x.a.div_floor(m);
        }
        let (u, v) = self.sig_components(x, emb);
        floor_quad_div(&u, &v, &self.discriminant(), m)
    }

    pub fn floor_at(&self, x: &AlgInt, emb: Embedding) -> BigInt {
        self.floor_div_at(x, &BigInt::one(), emb)
    }

    pub fn ceil_at(&self, x: &AlgInt, emb: Embedding) -> BigInt {
        if self.quad.is_none() {
            return x.a.clone();
        }
        let (u, v) = self.sig_components(x, emb);
        -floor_quad_div(&(-u), &(-v), &self.discriminant(), &BigInt::one())
    }

    // ---- divisibility -----------------------------------------------------

    /// Whether `x | y` in the ring, and the exact quotient when it does.
    /// Rationalizes by the conjugate and checks both coordinates against
    /// `N(x)`.
    pub fn divides(&self, x: &AlgInt, y: &AlgInt) -> Result<Option<AlgInt>> {
        if x.is_zero() {
            return Err(Error::ZeroDivisor);
        }
        if self.quad.is_none() {
            let (q, r) = y.a.div_rem(&x.a);
            return Ok(if r.is_zero() { Some(AlgInt::from_int(q)) } else { None });
        }
        let n = self.norm(x);
        let num = self.mul(y, &self.conjugate(x));
        let (qa, ra) = num.a.div_rem(&n);
        if !ra.is_zero() {
            return Ok(None);
        }
        let (qb, rb) = num.b.div_rem(&n);
        if !rb.is_zero() {
            return Ok(None);
        }
        Ok(Some(AlgInt { a: qa, b: qb }))
    }

    // ---- fundamental unit --------------------------------------------------

    /// Continued-fraction expansion of `w`; the first convergent whose
    /// associated element has norm of absolute value 1 is the fundamental
    /// unit. The surd state `(P + sqrt(D)) / Q` is advanced by the standard
    /// Pell-type recurrence, all in exact integers.
    fn compute_fundamental_unit(&self) -> Result<AlgInt> {
        let q = self.quad.as_ref().expect("degree 2 only");
        let d = &q.d;
        let f = d.sqrt();
        let (mut pp, mut qq) = match q.mode {
            OmegaMode::SqrtD => (BigInt::zero(), BigInt::one()),
            OmegaMode::HalfOnePlusSqrtD => (BigInt::one(), BigInt::from(2)),
        };
        let t = q.omega_trace.clone();
        let mut p_prev = BigInt::one();
        let mut q_prev = BigInt::zero();
        let mut p_cur = BigInt::zero();
        let mut q_cur = BigInt::one();
        // (p_cur, q_cur) seeded so that the first step produces p_0 = a_0.
        std::mem::swap(&mut p_prev, &mut p_cur);
        std::mem::swap(&mut q_prev, &mut q_cur);
        for _ in 0..200_000 {
            debug_assert!(qq.is_positive());
            let a = (&pp + &f).div_floor(&qq);
            let p_next = &a * &p_cur + &p_prev;
            let q_next = &a * &q_cur + &q_prev;
            p_prev = std::mem::replace(&mut p_cur, p_next);
            q_prev = std::mem::replace(&mut q_cur, q_next);
            // Candidate unit p - q*conj(w) = (p - q*Tr(w)) + q*w.
            let cand = AlgInt { a: &p_cur - &q_cur * &t, b: q_cur.clone() };
            if !q_cur.is_zero() {
                let n = self.norm(&cand);
                if n.is_one() || (-&n).is_one() {
                    return Ok(cand);
                }
            }
            let p_new = &a * &qq - &pp;
            let num = d - &p_new * &p_new;
            debug_assert!((&num % &qq).is_zero());
            let q_new = num / &qq;
            pp = p_new;
            qq = q_new;
        }
        Err(Error::UnitSearchExhausted)
    }
}

/// Exact sign of `u + v*sqrt(disc)` where `disc > 0` is not a perfect
/// square (or `v = 0`).
pub(crate) fn sign_quad(u: &BigInt, v: &BigInt, disc: &BigInt) -> Ordering {
    if v.is_zero() {
        return u.cmp(&BigInt::zero());
    }
    if u.is_zero() {
        return v.cmp(&BigInt::zero());
    }
    match (u.is_positive(), v.is_positive()) {
        (true, true) => Ordering::Greater,
        (false, false) => Ordering::Less,
        (true, false) => {
            // positive iff u^2 > v^2 * disc
            (u * u).cmp(&(v * v * disc))
        }
        (false, true) => (v * v * disc).cmp(&(u * u)),
    }
}

/// Exact `floor((u + v*sqrt(disc)) / (2m))` for positive `m`.
///
/// `floor(v*sqrt(disc))` is computed from the integer square root; since the
/// discriminant is never a perfect square the value is irrational whenever
/// `v != 0`, so the floor interval argument is clean: the real number lies in
/// `[u + w, u + w + 1)` for the computed `w`, and no multiple of `2m` can
/// fall strictly inside that interval.
pub(crate) fn floor_quad_div(u: &BigInt, v: &BigInt, disc: &BigInt, m: &BigInt) -> BigInt {
    let w = if v.is_zero() {
        BigInt::zero()
    } else {
        let s = (v * v * disc).sqrt();
        if v.is_positive() {
            s
        } else {
            -s - 1u32
        }
    };
    (u + w).div_floor(&(2u32 * m))
}

/// Smallest prime `p` with `p^2 | d`, if any.
fn square_factor(d: u64) -> Option<u64> {
    let mut n = d;
    let mut p = 2u64;
    while p.saturating_mul(p) <= n {
        if n % p == 0 {
            let mut mult = 0;
            while n % p == 0 {
                n /= p;
                mult += 1;
            }
            if mult >= 2 {
                return Some(p);
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(d: u64) -> FieldCtx {
        FieldCtx::quadratic(d).unwrap()
    }

    #[test]
    fn field_construction_examples() {
        let k5 = f(5);
        assert_eq!(k5.omega_mode(), Some(OmegaMode::HalfOnePlusSqrtD));
        assert_eq!(k5.discriminant(), BigInt::from(5));
        // golden ratio: 0 + 1*w
        assert_eq!(k5.fund_unit(), AlgInt::new(0, 1));
        assert_eq!(k5.fund_unit_norm(), -1);

        let k2 = f(2);
        assert_eq!(k2.omega_mode(), Some(OmegaMode::SqrtD));
        assert_eq!(k2.discriminant(), BigInt::from(8));
        assert_eq!(k2.fund_unit(), AlgInt::new(1, 1));
        assert_eq!(k2.fund_unit_norm(), -1);

        let k3 = f(3);
        assert_eq!(k3.fund_unit(), AlgInt::new(2, 1));
        assert_eq!(k3.fund_unit_norm(), 1);
    }

    #[test]
    fn more_fundamental_units() {
        // Classical Pell data.
        assert_eq!(f(6).fund_unit(), AlgInt::new(5, 2));
        assert_eq!(f(7).fund_unit(), AlgInt::new(8, 3));
        assert_eq!(f(10).fund_unit(), AlgInt::new(3, 1));
        assert_eq!(f(13).fund_unit(), AlgInt::new(1, 1)); // (3+sqrt13)/2
        assert_eq!(f(94).fund_unit(), AlgInt::new(2143295, 221064));
    }

    #[test]
    fn bad_radicands_are_rejected() {
        match FieldCtx::quadratic(12) {
            Err(Error::BadRadicand { d: 12, square_factor: 2 }) => {}
            other => panic!("expected square-factor rejection, got {other:?}"),
        }
        assert!(FieldCtx::quadratic(1).is_err());
        assert!(FieldCtx::quadratic(0).is_err());
        match FieldCtx::quadratic(75) {
            Err(Error::BadRadicand { square_factor: 5, .. }) => {}
            other => panic!("expected square factor 5, got {other:?}"),
        }
    }

    #[test]
    fn totally_positive_examples() {
        let k2 = f(2);
        assert!(!k2.is_totally_positive(&AlgInt::new(1, 1))); // 1+sqrt2
        assert!(k2.is_totally_positive(&AlgInt::new(2, 1))); // 2+sqrt2
        let k5 = f(5);
        // (3+sqrt5)/2 = 1 + w = w^2
        assert!(k5.is_totally_positive(&AlgInt::new(1, 1)));
        assert!(!k5.is_totally_positive(&AlgInt::zero()));
    }

    #[test]
    fn totally_leq_examples() {
        let k5 = f(5);
        let three = AlgInt::from_int(3);
        assert!(k5.totally_leq(&three, &three));
        // (3+sqrt5)/2 <= 3 at both embeddings
        assert!(k5.totally_leq(&AlgInt::new(1, 1), &three));
        let k2 = f(2);
        assert!(!k2.totally_leq(&AlgInt::new(1, 1), &AlgInt::from_int(2)));
    }

    #[test]
    fn norm_trace_examples() {
        let k5 = f(5);
        // (7+sqrt5)/2 = 3 + w
        let x = AlgInt::new(3, 1);
        assert_eq!(k5.norm_trace(&x), (BigInt::from(11), BigInt::from(7)));
        let two = AlgInt::from_int(2);
        assert_eq!(k5.norm_trace(&two), (BigInt::from(4), BigInt::from(4)));
        let eps = k5.fund_unit();
        assert_eq!(k5.norm_trace(&eps), (BigInt::from(-1), BigInt::from(1)));
    }

    #[test]
    fn divides_examples() {
        let k2 = f(2);
        let sqrt2 = AlgInt::new(0, 1);
        let y = AlgInt::new(4, 2);
        let q = k2.divides(&sqrt2, &y).unwrap().unwrap();
        assert_eq!(q, AlgInt::new(2, 2)); // (4+2sqrt2)/sqrt2 = 2+2sqrt2
        assert_eq!(k2.mul(&q, &sqrt2), y);

        let kq = FieldCtx::rational();
        assert!(kq
            .divides(&AlgInt::from_int(2), &AlgInt::from_int(3))
            .unwrap()
            .is_none());

        let k5 = f(5);
        let phi = k5.fund_unit();
        assert!(k5.divides(&phi, &AlgInt::one()).unwrap().is_some());
        assert!(k5.divides(&AlgInt::zero(), &AlgInt::one()).is_err());
    }

    #[test]
    fn conjugation_examples() {
        let k5 = f(5);
        // (7+sqrt5)/2 = 3+w -> (7-sqrt5)/2 = 4-w
        assert_eq!(k5.conjugate(&AlgInt::new(3, 1)), AlgInt::new(4, -1));
        assert_eq!(k5.conjugate(&AlgInt::from_int(3)), AlgInt::from_int(3));
        let k2 = f(2);
        let x = AlgInt::new(5, 2);
        assert_eq!(k2.conjugate(&k2.conjugate(&x)), x);
    }

    #[test]
    fn norm_trace_are_multiplicative_additive() {
        let k = f(5);
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as i64 % 2_000_001) - 1_000_000
        };
        for _ in 0..200 {
            let x = AlgInt::new(rnd(), rnd());
            let y = AlgInt::new(rnd(), rnd());
            assert_eq!(k.norm(&k.mul(&x, &y)), k.norm(&x) * k.norm(&y));
            assert_eq!(k.trace(&k.add(&x, &y)), k.trace(&x) + k.trace(&y));
        }
    }

    #[test]
    fn total_positivity_is_closed_under_sum_and_product() {
        let k = f(2);
        let xs = [
            AlgInt::new(2, 1),
            AlgInt::new(3, -1),
            AlgInt::from_int(1),
            AlgInt::new(4, 2),
        ];
        for x in &xs {
            assert!(k.is_totally_positive(x));
            let (n, t) = k.norm_trace(x);
            assert!(n.is_positive() && t.is_positive());
            for y in &xs {
                assert!(k.is_totally_positive(&k.add(x, y)));
                assert!(k.is_totally_positive(&k.mul(x, y)));
            }
        }
    }

    #[test]
    fn fundamental_unit_is_minimal() {
        // eps^k != 1 for small k, and no unit > 1 with smaller coordinates.
        for d in [2u64, 3, 5, 6, 7, 10, 13, 15, 21] {
            let k = f(d);
            let eps = k.fund_unit();
            let mut pow = AlgInt::one();
            for _ in 1..=6 {
                pow = k.mul(&pow, &eps);
                assert!(!pow.is_one(), "eps^k = 1 in D={d}");
            }
            let amax = eps.a.magnitude().clone();
            let bmax = eps.b.magnitude().clone();
            let abound: i64 = amax.to_string().parse().unwrap_or(i64::MAX);
            let bbound: i64 = bmax.to_string().parse().unwrap_or(i64::MAX);
            for a in -abound..=abound {
                for b in -bbound..=bbound {
                    let x = AlgInt::new(a, b);
                    if x == eps || !k.is_unit(&x) {
                        continue;
                    }
                    // every unit strictly above 1 dominates eps
                    if k.cmp_at(&x, &AlgInt::one(), Embedding::First) == Ordering::Greater {
                        assert!(
                            k.cmp_at(&x, &eps, Embedding::First) != Ordering::Less,
                            "unit {x} below eps for D={d}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn comparisons_agree_with_interval_oracle() {
        // Widened f64 intervals; when the oracle is decisive it must agree.
        let k = f(7);
        let sd = 7f64.sqrt();
        let mut state = 0x853c49e6748fea9bu64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 34) as i64 % 20_001) - 10_000
        };
        for _ in 0..10_000 {
            let x = AlgInt::new(rnd(), rnd());
            let y = AlgInt::new(rnd(), rnd());
            let d = k.sub(&y, &x);
            let da = d.a.to_string().parse::<f64>().unwrap();
            let db = d.b.to_string().parse::<f64>().unwrap();
            for (sgn, emb) in [(1.0, Embedding::First), (-1.0, Embedding::Second)] {
                let v = da + sgn * db * sd;
                let w = 1e-9 * (da.abs() + db.abs() * sd) + 1e-9;
                if v - w > 0.0 {
                    assert_eq!(k.sign_at(&d, emb), Ordering::Greater);
                } else if v + w < 0.0 {
                    assert_eq!(k.sign_at(&d, emb), Ordering::Less);
                }
            }
        }
    }

    #[test]
    fn floor_machinery_is_exact() {
        let k = f(5);
        // sigma1((7+sqrt5)/2) = 4.618..., sigma2 = 2.381...
        let x = AlgInt::new(3, 1);
        assert_eq!(k.floor_at(&x, Embedding::First), BigInt::from(4));
        assert_eq!(k.floor_at(&x, Embedding::Second), BigInt::from(2));
        assert_eq!(k.ceil_at(&x, Embedding::First), BigInt::from(5));
        assert_eq!(k.ceil_at(&x, Embedding::Second), BigInt::from(3));
        let neg = k.neg(&x);
        assert_eq!(k.floor_at(&neg, Embedding::First), BigInt::from(-5));
        assert_eq!(k.ceil_at(&neg, Embedding::First), BigInt::from(-4));
        assert_eq!(
            k.floor_div_at(&AlgInt::from_int(17), &BigInt::from(5), Embedding::First),
            BigInt::from(3)
        );
    }
}

//! General (cross-term) escalation trees over Z with exact isometry
//! canonicalization at small rank.
//!
//! Forms are carried as doubled Gram matrices `A` with `A_ii = 2 Q(e_i)` and
//! `A_ij = 2 B(e_i, e_j)`, integral for classical and non-classical forms
//! alike. Escalating a node by its truant `t` adjoins a vector of value `t`
//! whose cross terms `2B` range over the Cauchy-Schwarz box
//! `(2B)^2 <= 4 * diag * t`; children are reduced to a canonical
//! representative of their Z-isometry class, so equal matrices mean
//! isometric lattices and vice versa.
//!
//! Canonicalization enumerates all vectors up to an isometry-invariant value
//! cap (the smallest cap whose vector set contains a basis) and takes the
//! lexicographically minimal Gram over all bases drawn from it. Rank is
//! capped at 5, where this exhaustive search stays cheap.

use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::ops::ControlFlow;

use crate::criterion::XClass;
use crate::error::{Error, Result};
use crate::forms::QForm;
use crate::ring::{AlgInt, FieldCtx};

pub const MAX_TREE_RANK: usize = 5;

/// Doubled Gram matrix over Z.
pub(crate) type Mat = Vec<Vec<i64>>;

fn dot_via(a: &Mat, v: &[i64], w: &[i64]) -> i64 {
    let n = a.len();
    let mut acc: i128 = 0;
    for i in 0..n {
        for j in 0..n {
            acc += v[i] as i128 * a[i][j] as i128 * w[j] as i128;
        }
    }
    i64::try_from(acc).expect("Gram values stay in range at tree scale")
}

fn det_i128(m: &[Vec<i128>]) -> i128 {
    let n = m.len();
    match n {
        0 => 1,
        1 => m[0][0],
        _ => {
            let mut acc: i128 = 0;
            for (j, head) in m[0].iter().enumerate() {
                if *head == 0 {
                    continue;
                }
                let minor: Vec<Vec<i128>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(c, _)| *c != j)
                            .map(|(_, v)| *v)
                            .collect()
                    })
                    .collect();
                let sign = if j % 2 == 0 { 1 } else { -1 };
                acc += sign * head * det_i128(&minor);
            }
            acc
        }
    }
}

fn mat_det(a: &Mat) -> i128 {
    let m: Vec<Vec<i128>> = a.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    det_i128(&m)
}

/// Greedy pair size-reduction; only shortens diagonals before the exhaustive
/// stage, never relied on for canonicity.
fn prereduce(a: &Mat) -> Mat {
    let n = a.len();
    let mut g = a.clone();
    for _ in 0..1000 {
        let mut changed = false;
        // sort basis by diagonal
        for i in 0..n {
            for j in (i + 1)..n {
                if g[j][j] < g[i][i] {
                    g.swap(i, j);
                    for row in g.iter_mut() {
                        row.swap(i, j);
                    }
                    changed = true;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i == j || g[i][i] == 0 {
                    continue;
                }
                // b_j <- b_j + k b_i, k = -round(A_ij / A_ii)
                let k = -div_round(g[i][j], g[i][i]);
                if k == 0 {
                    continue;
                }
                apply_shear(&mut g, i, j, k);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    g
}

fn div_round(x: i64, y: i64) -> i64 {
    debug_assert!(y > 0);
    let two_x = 2 * x as i128;
    let y = y as i128;
    (((two_x + y).div_euclid(2 * y)) as i64).max(i64::MIN)
}

/// `b_j <- b_j + k b_i` on the Gram matrix (`i != j`).
fn apply_shear(g: &mut Mat, i: usize, j: usize, k: i64) {
    debug_assert_ne!(i, j);
    let n = g.len();
    let k = k as i128;
    let a_ij_old = g[i][j] as i128;
    let a_ii = g[i][i] as i128;
    // new diagonal first: A'_jj = A_jj + 2k A_ij + k^2 A_ii
    let d = g[j][j] as i128 + 2 * k * a_ij_old + k * k * a_ii;
    g[j][j] = i64::try_from(d).unwrap();
    // cross terms: A'_lj = A_lj + k A_li for every l != j
    for l in 0..n {
        if l != j {
            let v = g[l][j] as i128 + k * g[l][i] as i128;
            g[l][j] = i64::try_from(v).unwrap();
            g[j][l] = g[l][j];
        }
    }
}

fn isqrt_i128(v: i128) -> i128 {
    debug_assert!(v >= 0);
    if v == 0 {
        return 0;
    }
    let mut x = (v as f64).sqrt() as i128 + 2;
    while x * x > v {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= v {
        x += 1;
    }
    x
}

fn adjugate_i128(m: &[Vec<i128>]) -> Vec<Vec<i128>> {
    let n = m.len();
    let mut adj = vec![vec![0i128; n]; n];
    for i in 0..n {
        for j in 0..n {
            let minor: Vec<Vec<i128>> = (0..n)
                .filter(|&r| r != j)
                .map(|r| (0..n).filter(|&c| c != i).map(|c| m[r][c]).collect())
                .collect();
            let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
            adj[i][j] = sign * det_i128(&minor);
        }
    }
    adj
}

/// Per-level pruning data for the exact lattice walk: the Schur complement
/// numerator of the leading `i x i` block over the trailing coordinates,
/// with its denominator `det A[0..i, 0..i]`. At level `i` the minimal value
/// of `v^T A v` over the free head coordinates, for a fixed tail, equals
/// `tail^T T tail / den`.
fn schur_complements(a: &Mat) -> Vec<(Vec<Vec<i128>>, i128)> {
    let n = a.len();
    let big: Vec<Vec<i128>> = a.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    let mut out = Vec::with_capacity(n);
    out.push((big.clone(), 1i128));
    for i in 1..n {
        let head: Vec<Vec<i128>> = (0..i).map(|r| (0..i).map(|c| big[r][c]).collect()).collect();
        let den = det_i128(&head);
        debug_assert!(den > 0, "leading blocks of a definite form are nonsingular");
        let adj = adjugate_i128(&head);
        let m = n - i;
        let mut t = vec![vec![0i128; m]; m];
        for j in 0..m {
            for l in 0..m {
                let mut corr: i128 = 0;
                for p in 0..i {
                    for q in 0..i {
                        corr += big[i + j][p] * adj[p][q] * big[q][i + l];
                    }
                }
                t[j][l] = den * big[i + j][i + l] - corr;
            }
        }
        out.push((t, den));
    }
    out
}

/// Exact Fincke-Pohst walk: visits every nonzero vector with
/// `v^T A v <= cap2q`, one of each antipodal pair, in a deterministic
/// center-outward order per coordinate. All bounds come from exact integer
/// discriminants of the Schur-complement quadratics.
pub(crate) fn lattice_points(
    a: &Mat,
    cap2q: i64,
    visit: &mut dyn FnMut(&[i64], i64) -> ControlFlow<()>,
) {
    let n = a.len();
    if n == 0 || cap2q <= 0 {
        return;
    }
    let schur = schur_complements(a);
    let mut x = vec![0i64; n];
    let _ = walk_level(&schur, cap2q as i128, n - 1, true, &mut x, visit);
}

fn walk_level(
    schur: &[(Vec<Vec<i128>>, i128)],
    cap: i128,
    level: usize,
    nonneg: bool,
    x: &mut Vec<i64>,
    visit: &mut dyn FnMut(&[i64], i64) -> ControlFlow<()>,
) -> ControlFlow<()> {
    let (t, den) = &schur[level];
    let m = t.len();
    let alpha = t[0][0];
    let mut beta: i128 = 0;
    let mut gamma: i128 = 0;
    for j in 1..m {
        beta += t[0][j] * x[level + j] as i128;
        for l in 1..m {
            gamma += t[j][l] * x[level + j] as i128 * x[level + l] as i128;
        }
    }
    // alpha c^2 + 2 beta c + gamma <= cap * den
    let rhs = cap * den - gamma;
    let d = beta * beta + alpha * rhs;
    if d < 0 {
        return ControlFlow::Continue(());
    }
    let s = isqrt_i128(d);
    let hi = (-beta + s).div_euclid(alpha);
    let mut lo = -((beta + s).div_euclid(alpha));
    if nonneg {
        lo = lo.max(0);
    }
    if lo > hi {
        return ControlFlow::Continue(());
    }
    // deterministic center-outward order
    let mid = {
        let guess = (-(beta as f64) / (alpha as f64)).round() as i128;
        guess.clamp(lo, hi)
    };
    let mut offset: i128 = 0;
    loop {
        let pair = if offset == 0 {
            [Some(mid), None]
        } else {
            [Some(mid + offset), Some(mid - offset)]
        };
        let mut any = false;
        for cand in pair.into_iter().flatten() {
            if cand < lo || cand > hi {
                continue;
            }
            any = true;
            x[level] = cand as i64;
            if level == 0 {
                if x.iter().any(|&c| c != 0) {
                    let value = alpha * cand * cand + 2 * beta * cand + gamma;
                    debug_assert!(*den == 1);
                    visit(x, i64::try_from(value).expect("value fits i64"))?;
                }
            } else {
                walk_level(schur, cap, level - 1, nonneg && cand == 0, x, visit)?;
            }
            x[level] = 0;
        }
        if !any && (mid + offset > hi) && (mid - offset < lo) {
            break;
        }
        offset += 1;
    }
    ControlFlow::Continue(())
}

/// All nonzero vectors with `2Q(v) <= cap2q` (both signs), sorted by
/// `(2Q, coordinates)`.
fn short_vectors(a: &Mat, cap2q: i64) -> Vec<(Vec<i64>, i64)> {
    let mut out: Vec<(Vec<i64>, i64)> = Vec::new();
    lattice_points(a, cap2q, &mut |v, two_q| {
        out.push((v.to_vec(), two_q));
        out.push((v.iter().map(|&c| -c).collect(), two_q));
        ControlFlow::Continue(())
    });
    out.sort_by(|p, q| (p.1, &p.0).cmp(&(q.1, &q.0)));
    out
}

fn lex_positive(v: &[i64]) -> bool {
    for &c in v {
        if c != 0 {
            return c > 0;
        }
    }
    false
}

/// Determinant of the submatrix on the first `rows` rows and the columns in
/// `colmask`, allocation-free (matrix capped at 6 columns).
fn det_sel(m: &[[i128; 6]; 6], rows: &[usize], colmask: u32) -> i128 {
    if rows.is_empty() {
        return 1;
    }
    let row = rows[0];
    let mut acc = 0i128;
    let mut sign = 1i128;
    let mut mask = colmask;
    while mask != 0 {
        let c = mask.trailing_zeros() as usize;
        mask &= mask - 1;
        let v = m[row][c];
        if v != 0 {
            acc += sign * v * det_sel(m, &rows[1..], colmask & !(1u32 << c));
        }
        sign = -sign;
    }
    acc
}

/// gcd of all `k x k` minors of the row matrix; 0 means rank-deficient,
/// 1 means the rows span a primitive sublattice (extendable to a basis).
fn minor_gcd(rows: &[&Vec<i64>], n: usize) -> i128 {
    let k = rows.len();
    debug_assert!(n <= 6 && k <= n);
    let mut m = [[0i128; 6]; 6];
    for (i, r) in rows.iter().enumerate() {
        for j in 0..n {
            m[i][j] = r[j] as i128;
        }
    }
    let rowidx: Vec<usize> = (0..k).collect();
    let mut g: i128 = 0;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        g = gcd_i128(g, det_sel(&m, &rowidx, mask));
        if g == 1 {
            return 1;
        }
    }
    g.abs()
}

fn gcd_i128(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

struct CanonSearch<'a> {
    a: &'a Mat,
    n: usize,
    shorts: &'a [(Vec<i64>, i64)],
    best: Option<(Vec<i64>, Vec<Vec<i64>>)>,
}

impl<'a> CanonSearch<'a> {
    fn run(&mut self) {
        let mut chosen: Vec<Vec<i64>> = Vec::new();
        let mut seq: Vec<i64> = Vec::new();
        self.dfs(&mut chosen, &mut seq);
    }

    fn dfs(&mut self, chosen: &mut Vec<Vec<i64>>, seq: &mut Vec<i64>) {
        let k = chosen.len();
        if k == self.n {
            let better = match &self.best {
                None => true,
                Some((bseq, _)) => seq.as_slice() < bseq.as_slice(),
            };
            if better {
                self.best = Some((seq.clone(), chosen.clone()));
            }
            return;
        }
        let mut cands: Vec<(Vec<i64>, &Vec<i64>)> = Vec::new();
        for (v, two_q) in self.shorts {
            if k == 0 && !lex_positive(v) {
                continue;
            }
            let mut rows: Vec<&Vec<i64>> = chosen.iter().collect();
            rows.push(v);
            let g = minor_gcd(&rows, self.n);
            if g != 1 {
                continue;
            }
            let mut col = Vec::with_capacity(k + 1);
            col.push(*two_q);
            for w in chosen.iter() {
                col.push(dot_via(self.a, w, v));
            }
            cands.push((col, v));
        }
        cands.sort();
        for (col, v) in cands {
            if let Some((bseq, _)) = &self.best {
                // prune when the extended prefix already exceeds the best
                let mut cmp = Ordering::Equal;
                for (i, s) in seq.iter().chain(col.iter()).enumerate() {
                    match s.cmp(&bseq[i]) {
                        Ordering::Equal => continue,
                        other => {
                            cmp = other;
                            break;
                        }
                    }
                }
                if cmp == Ordering::Greater {
                    continue;
                }
            }
            let len_before = seq.len();
            seq.extend_from_slice(&col);
            chosen.push(v.clone());
            self.dfs(chosen, seq);
            chosen.pop();
            seq.truncate(len_before);
        }
    }
}

/// Canonical representative of the Z-isometry class of a doubled Gram
/// matrix: the lexicographically minimal column sequence
/// `[2Q(w1)], [2Q(w2), 2B(w1,w2)], ...` over all bases drawn from the
/// vectors of value at most the smallest isometry-invariant cap that admits
/// a basis.
pub(crate) fn canonical_doubled(a: &Mat) -> Mat {
    let n = a.len();
    if n == 0 {
        return Vec::new();
    }
    let ap = prereduce(a);
    let maxdiag = (0..n).map(|i| ap[i][i]).max().unwrap();
    let shorts = short_vectors(&ap, maxdiag);
    let mut caps: Vec<i64> = shorts.iter().map(|(_, q)| *q).collect();
    caps.dedup();
    for cap in caps {
        let upto = shorts.partition_point(|(_, q)| *q <= cap);
        let slice = &shorts[..upto];
        // cheap rank precheck
        {
            let refs: Vec<&Vec<i64>> = slice.iter().map(|(v, _)| v).collect();
            if rank_of(&refs, n) < n {
                continue;
            }
        }
        let mut search = CanonSearch { a: &ap, n, shorts: slice, best: None };
        search.run();
        if let Some((_, basis)) = search.best {
            let mut out = vec![vec![0i64; n]; n];
            for i in 0..n {
                for j in 0..n {
                    out[i][j] = dot_via(&ap, &basis[i], &basis[j]);
                }
            }
            return out;
        }
    }
    unreachable!("the input basis itself lies inside the maximal cap");
}

/// Exact rank by fraction-free elimination.
fn rank_of(rows: &[&Vec<i64>], n: usize) -> usize {
    let mut m: Vec<Vec<i128>> =
        rows.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    let mut rank = 0;
    for col in 0..n {
        let pivot = (rank..m.len()).find(|&r| m[r][col] != 0);
        if let Some(p) = pivot {
            m.swap(rank, p);
            let lead = m[rank][col];
            for r in (rank + 1)..m.len() {
                let f = m[r][col];
                if f == 0 {
                    continue;
                }
                for c in 0..n {
                    m[r][c] = m[r][c] * lead - f * m[rank][c];
                }
            }
            rank += 1;
            if rank == n {
                break;
            }
        }
    }
    rank
}

/// Primitive kernel vector of a singular symmetric matrix whose leading
/// principal block is nonsingular.
fn primitive_kernel(a: &Mat) -> Vec<i64> {
    let n = a.len();
    let m: Vec<Vec<i128>> = a.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    // adjugate columns lie in the kernel; take the first nonzero one
    for j in 0..n {
        let mut col = vec![0i128; n];
        let mut nonzero = false;
        for i in 0..n {
            // cofactor C_ji for adj(A)[i][j] = C_ji; A symmetric so either way
            let minor: Vec<Vec<i128>> = (0..n)
                .filter(|&r| r != j)
                .map(|r| (0..n).filter(|&c| c != i).map(|c| m[r][c]).collect())
                .collect();
            let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
            col[i] = sign * det_i128(&minor);
            if col[i] != 0 {
                nonzero = true;
            }
        }
        if nonzero {
            let g = col.iter().fold(0i128, |acc, &v| gcd_i128(acc, v));
            return col.iter().map(|&v| i64::try_from(v / g).unwrap()).collect();
        }
    }
    unreachable!("rank n matrix has a nonzero adjugate column");
}

/// Collapses a positive semidefinite doubled Gram with one-dimensional
/// radical to the Gram of the quotient lattice: change basis so the kernel
/// is the first vector, then drop its row and column.
fn collapse_semidefinite(a: &Mat) -> Mat {
    let n = a.len();
    let kernel = primitive_kernel(a);
    let v = complete_to_unimodular(&kernel);
    // new Gram V^T A V
    let mut g = vec![vec![0i64; n]; n];
    for i in 0..n {
        for j in 0..n {
            let vi: Vec<i64> = (0..n).map(|r| v[r][i]).collect();
            let vj: Vec<i64> = (0..n).map(|r| v[r][j]).collect();
            g[i][j] = dot_via(a, &vi, &vj);
        }
    }
    debug_assert!((0..n).all(|i| g[0][i] == 0 && g[i][0] == 0));
    g.remove(0);
    for row in g.iter_mut() {
        row.remove(0);
    }
    g
}

/// A unimodular matrix whose first column is the given primitive vector.
fn complete_to_unimodular(v: &[i64]) -> Vec<Vec<i64>> {
    let n = v.len();
    // row-reduce w to e1 while accumulating the operations in u
    let mut w: Vec<i128> = v.iter().map(|&x| x as i128).collect();
    let mut u: Vec<Vec<i128>> = (0..n)
        .map(|i| (0..n).map(|j| i128::from(i == j)).collect())
        .collect();
    loop {
        let mut j_nonzero = None;
        for j in 1..n {
            if w[j] != 0 {
                j_nonzero = Some(j);
                break;
            }
        }
        let j = match j_nonzero {
            None => break,
            Some(j) => j,
        };
        if w[0] == 0 {
            w.swap(0, j);
            u.swap(0, j);
            continue;
        }
        let q = w[j].div_euclid(w[0]);
        w[j] -= q * w[0];
        for c in 0..n {
            let delta = q * u[0][c];
            u[j][c] -= delta;
        }
        if w[j] != 0 {
            w.swap(0, j);
            u.swap(0, j);
        }
    }
    if w[0] < 0 {
        for c in 0..n {
            u[0][c] = -u[0][c];
        }
        w[0] = -w[0];
    }
    debug_assert_eq!(w[0], 1, "kernel vector must be primitive");
    // u * v = e1, so the wanted matrix is u^{-1}
    let inv = invert_unimodular(&u);
    inv.iter()
        .map(|r| r.iter().map(|&x| i64::try_from(x).unwrap()).collect())
        .collect()
}

fn invert_unimodular(u: &[Vec<i128>]) -> Vec<Vec<i128>> {
    let n = u.len();
    let det = det_i128(u);
    debug_assert!(det == 1 || det == -1);
    let mut inv = vec![vec![0i128; n]; n];
    for i in 0..n {
        for j in 0..n {
            let minor: Vec<Vec<i128>> = (0..n)
                .filter(|&r| r != j)
                .map(|r| (0..n).filter(|&c| c != i).map(|c| u[r][c]).collect())
                .collect();
            let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
            inv[i][j] = sign * det_i128(&minor) * det;
        }
    }
    inv
}

/// All escalations of a canonical parent by its truant: cross terms over
/// the Cauchy-Schwarz box (restricted per X-class), positive definite or
/// rank-collapsed, canonicalized and deduplicated.
pub(crate) fn escalate_mats(a: &Mat, truant: u64, x: XClass) -> Vec<Mat> {
    let n = a.len();
    let t = truant as i64;
    if x == XClass::Diag {
        // orthogonal child only
        let mut child = vec![vec![0i64; n + 1]; n + 1];
        for i in 0..n {
            for j in 0..n {
                child[i][j] = a[i][j];
            }
        }
        child[n][n] = 2 * t;
        return vec![canonical_doubled(&child)];
    }
    let mut bounds = Vec::with_capacity(n);
    for i in 0..n {
        // (2B)^2 <= 4 * Q(b_i) * t = 2 * A_ii * t
        let b = isqrt_i128(2 * a[i][i] as i128 * t as i128) as i64;
        bounds.push(b);
    }
    let step = if x == XClass::Cl { 2 } else { 1 };
    let mut out: Vec<Mat> = Vec::new();
    let mut seen: std::collections::BTreeSet<Mat> = std::collections::BTreeSet::new();
    // pre-reduction dedupe: equal pre-reduced matrices are isometric, so the
    // expensive canonicalization runs once per collision class
    let mut seen_pre: std::collections::BTreeSet<Mat> = std::collections::BTreeSet::new();
    let mut cross = vec![0i64; n];
    enumerate_cross(&bounds, step, 0, &mut cross, &mut |m| {
        // sign normalization: first nonzero cross term positive
        if let Some(first) = m.iter().find(|&&v| v != 0) {
            if *first < 0 {
                return;
            }
        }
        let mut child = vec![vec![0i64; n + 1]; n + 1];
        for i in 0..n {
            for j in 0..n {
                child[i][j] = a[i][j];
            }
            child[i][n] = m[i];
            child[n][i] = m[i];
        }
        child[n][n] = 2 * t;
        let det = mat_det(&child);
        let reduced = match det.cmp(&0) {
            Ordering::Greater => {
                if !seen_pre.insert(prereduce(&child)) {
                    return;
                }
                canonical_doubled(&child)
            }
            Ordering::Equal => {
                let collapsed = collapse_semidefinite(&child);
                if collapsed.is_empty() {
                    return;
                }
                canonical_doubled(&collapsed)
            }
            Ordering::Less => return,
        };
        if seen.insert(reduced.clone()) {
            out.push(reduced);
        }
    });
    out.sort();
    out
}

fn enumerate_cross(
    bounds: &[i64],
    step: i64,
    idx: usize,
    cross: &mut Vec<i64>,
    f: &mut impl FnMut(&[i64]),
) {
    if idx == bounds.len() {
        f(cross);
        return;
    }
    let b = bounds[idx];
    let start = -(b - b.rem_euclid(step));
    let mut v = start;
    while v <= b {
        cross[idx] = v;
        enumerate_cross(bounds, step, idx + 1, cross, f);
        v += step;
    }
    cross[idx] = 0;
}

/// Smallest positive integer up to `probe_bound` not represented by the
/// form, or `None` when everything up to the bound is represented. Sweeps a
/// bit set of attained values with progressively doubled caps so shallow
/// truants exit early; the full-bound sweep aborts as soon as every value
/// is hit.
pub(crate) fn probe_truant_mat(a: &Mat, probe_bound: u64) -> Option<u64> {
    if probe_bound == 0 {
        return None;
    }
    if a.is_empty() {
        return Some(1);
    }
    let mut cap = 64u64.min(probe_bound);
    loop {
        let mut bits = vec![false; cap as usize + 1];
        let mut remaining = cap;
        lattice_points(a, 2 * cap as i64, &mut |_, two_q| {
            debug_assert!(two_q % 2 == 0);
            let q = (two_q / 2) as u64;
            if q >= 1 && q <= cap && !bits[q as usize] {
                bits[q as usize] = true;
                remaining -= 1;
                if remaining == 0 {
                    return ControlFlow::Break(());
                }
            }
            ControlFlow::Continue(())
        });
        if remaining > 0 {
            let missing = (1..=cap).find(|&q| !bits[q as usize]).unwrap();
            return Some(missing);
        }
        if cap == probe_bound {
            return None;
        }
        cap = (cap * 4).min(probe_bound);
    }
}

/// One node of the escalation structure. Nodes are deduplicated by canonical
/// form, so the structure is a DAG addressed by ids; `children` hold ids.
#[derive(Clone, Debug)]
pub struct TreeNode {
    pub id: usize,
    pub rank: usize,
    /// Canonical doubled Gram of the node.
    pub(crate) mat: Mat,
    /// Smallest non-represented positive integer up to the probe bound.
    pub truant: Option<u64>,
    pub children: Vec<usize>,
}

impl TreeNode {
    /// The node's form over the rational field.
    pub fn form(&self) -> QForm {
        mat_to_qform(&self.mat)
    }
}

pub(crate) fn mat_to_qform(a: &Mat) -> QForm {
    let n = a.len();
    if n == 0 {
        return QForm::zero(FieldCtx::rational());
    }
    let mut m = vec![vec![AlgInt::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = if i == j {
                debug_assert!(a[i][i] % 2 == 0);
                AlgInt::from_int(a[i][i] / 2)
            } else {
                AlgInt::from_int(a[i][j])
            };
        }
    }
    QForm::gram(FieldCtx::rational(), m).expect("tree nodes are positive definite")
}

// entry cap keeping every intermediate of the exact walks far inside i128
const MAX_TREE_ENTRY: i64 = 1_000_000;

fn qform_to_mat(form: &QForm) -> Result<Mat> {
    if !form.field().is_rational_field() {
        return Err(Error::RationalFieldOnly);
    }
    let enc = form.gram_encoding();
    let n = enc.len();
    let mut a = vec![vec![0i64; n]; n];
    for i in 0..n {
        for j in 0..n {
            let e = &enc[i][j];
            if !e.is_rational() {
                return Err(Error::RationalFieldOnly);
            }
            let v: i64 = e
                .a
                .to_string()
                .parse()
                .ok()
                .filter(|v: &i64| v.abs() <= MAX_TREE_ENTRY)
                .ok_or_else(|| {
                    Error::BadBounds(format!(
                        "Gram entry {e} exceeds the supported magnitude {MAX_TREE_ENTRY}"
                    ))
                })?;
            a[i][j] = if i == j { 2 * v } else { v };
        }
    }
    Ok(a)
}

/// The escalation structure with per-rank statistics.
#[derive(Clone, Debug)]
pub struct EscalationTree {
    pub x: XClass,
    pub max_rank: usize,
    pub probe_bound: u64,
    pub nodes: Vec<TreeNode>,
    /// Distinct node counts per rank.
    pub rank_counts: Vec<usize>,
    /// How many distinct nodes carry each truant.
    pub truant_counts: BTreeMap<u64, usize>,
}

impl EscalationTree {
    pub fn truant_set(&self) -> Vec<u64> {
        self.truant_counts.keys().copied().collect()
    }
}

/// Breadth-first escalation from the zero form. Nodes at `max_rank` are
/// probed for truants only. Probes across a layer run in parallel; node ids
/// and all outputs are deterministic.
pub fn build_tree(x: XClass, max_rank: usize, probe_bound: u64) -> Result<EscalationTree> {
    if max_rank > MAX_TREE_RANK {
        return Err(Error::TreeRankCap(x.tag().to_string(), MAX_TREE_RANK));
    }
    if probe_bound == 0 {
        return Err(Error::BadBounds("probe_bound must be positive".to_string()));
    }
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut index: HashMap<Mat, usize> = HashMap::new();
    let root = TreeNode {
        id: 0,
        rank: 0,
        mat: Vec::new(),
        truant: probe_truant_mat(&Vec::new(), probe_bound),
        children: Vec::new(),
    };
    index.insert(Vec::new(), 0);
    nodes.push(root);
    let mut frontier: Vec<usize> = vec![0];
    for rank in 0..max_rank {
        // expand every frontier node that still has a truant
        let expandable: Vec<(usize, Mat, u64)> = frontier
            .iter()
            .filter_map(|&id| nodes[id].truant.map(|t| (id, nodes[id].mat.clone(), t)))
            .collect();
        let children_lists: Vec<Vec<Mat>> = expandable
            .par_iter()
            .map(|(_, mat, t)| escalate_mats(mat, *t, x))
            .collect();
        let mut next: Vec<usize> = Vec::new();
        let mut fresh: Vec<usize> = Vec::new();
        for ((parent_id, _, _), mats) in expandable.iter().zip(children_lists) {
            for mat in mats {
                let id = match index.get(&mat) {
                    Some(&id) => id,
                    None => {
                        let id = nodes.len();
                        index.insert(mat.clone(), id);
                        nodes.push(TreeNode {
                            id,
                            rank: rank + 1,
                            mat,
                            truant: None,
                            children: Vec::new(),
                        });
                        fresh.push(id);
                        next.push(id);
                        id
                    }
                };
                if !nodes[*parent_id].children.contains(&id) {
                    nodes[*parent_id].children.push(id);
                }
            }
        }
        // probe the fresh layer in parallel
        let probed: Vec<(usize, Option<u64>)> = fresh
            .par_iter()
            .map(|&id| (id, probe_truant_mat(&nodes[id].mat, probe_bound)))
            .collect();
        for (id, t) in probed {
            nodes[id].truant = t;
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    let mut rank_counts = vec![0usize; max_rank + 1];
    let mut truant_counts: BTreeMap<u64, usize> = BTreeMap::new();
    for n in &nodes {
        rank_counts[n.rank] += 1;
        if let Some(t) = n.truant {
            *truant_counts.entry(t).or_insert(0) += 1;
        }
    }
    Ok(EscalationTree { x, max_rank, probe_bound, nodes, rank_counts, truant_counts })
}

/// Canonical representative of the Z-isometry class of a positive definite
/// form over the rational field, rank at most 5.
pub fn reduce_form(form: &QForm) -> Result<QForm> {
    if form.rank() > MAX_TREE_RANK {
        return Err(Error::RankTooLarge(form.rank(), MAX_TREE_RANK));
    }
    let a = qform_to_mat(form)?;
    Ok(mat_to_qform(&canonical_doubled(&a)))
}

/// All escalations of a node's form by its truant, as validated forms.
pub fn escalations_of(form: &QForm, truant: u64, x: XClass) -> Result<Vec<QForm>> {
    if form.rank() >= MAX_TREE_RANK {
        return Err(Error::RankTooLarge(form.rank() + 1, MAX_TREE_RANK));
    }
    if x == XClass::Diag && !form.is_diagonal() && form.rank() > 0 {
        // a diagonal escalation needs a diagonal parent; Gram parents with
        // zero off-diagonals qualify
        let enc = form.gram_encoding();
        let n = enc.len();
        for i in 0..n {
            for j in 0..n {
                if i != j && !enc[i][j].is_zero() {
                    return Err(Error::BadBounds(
                        "diagonal escalation requires a diagonal parent".to_string(),
                    ));
                }
            }
        }
    }
    let a = qform_to_mat(form)?;
    Ok(escalate_mats(&a, truant, x).iter().map(|m| mat_to_qform(m)).collect())
}

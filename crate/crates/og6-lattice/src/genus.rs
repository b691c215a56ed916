//! Genera of even lattices (signature plus discriminant form), existence
//! criteria, Jordan decompositions of finite quadratic forms, and exhaustive
//! enumeration of definite even lattices by reduced Gram matrices.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, OnceLock};

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{LatticeError, Result};
use crate::fqf::{prime_factors, Elem, Fqf, FqfRecord, R64};
use crate::isometry;
use crate::lattice::Lattice;
use crate::linalg::{self, IMat};
use crate::par;

/// Largest rank accepted by the definite enumerator.
pub const MAX_ENUM_RANK: usize = 6;
/// Largest determinant bound accepted by the definite enumerator.
pub const MAX_ENUM_DET: i64 = 1100;

#[derive(Clone, Debug)]
pub struct GenusSymbol {
    pub signature: (usize, usize),
    pub disc_form: Fqf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenusRecord {
    pub signature: (usize, usize),
    pub disc_form: FqfRecord,
}

impl GenusSymbol {
    pub fn new(signature: (usize, usize), disc_form: Fqf) -> Self {
        GenusSymbol { signature, disc_form }
    }

    pub fn rank(&self) -> usize {
        self.signature.0 + self.signature.1
    }

    /// Absolute determinant of any member.
    pub fn abs_det(&self) -> i64 {
        self.disc_form.order()
    }

    pub fn same(&self, other: &GenusSymbol) -> Result<bool> {
        if self.signature != other.signature {
            return Ok(false);
        }
        self.disc_form.is_isomorphic(&other.disc_form)
    }

    pub fn contains(&self, l: &Lattice) -> Result<bool> {
        self.same(&genus_of(l))
    }

    /// Whether the genus is nonempty.
    pub fn exists(&self) -> Result<bool> {
        even_lattice_exists(self.signature, &self.disc_form)
    }

    pub fn to_record(&self) -> GenusRecord {
        GenusRecord { signature: self.signature, disc_form: self.disc_form.to_record() }
    }

    pub fn from_record(r: &GenusRecord) -> Result<Self> {
        Ok(GenusSymbol { signature: r.signature, disc_form: Fqf::from_record(&r.disc_form)? })
    }
}

pub fn genus_of(l: &Lattice) -> GenusSymbol {
    GenusSymbol { signature: l.signature(), disc_form: l.disc_form() }
}

pub fn same_genus(l1: &Lattice, l2: &Lattice) -> Result<bool> {
    genus_of(l1).same(&genus_of(l2))
}

// ---- Jordan decomposition -------------------------------------------------

/// An orthogonal summand of the `p`-part of a finite quadratic form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum JordanBlock {
    /// Cyclic of order `p^k`, generator with `q = value / p^k mod 2`.
    Cyclic { p: i64, k: u32, value: i64 },
    /// Rank two of order `2^k` with `b = (1/2^k) [[a, c], [c, d]]`, `c` odd and
    /// `q` on the generators equal to `a / 2^k` and `d / 2^k`.
    Even { k: u32, a: i64, c: i64, d: i64 },
}

impl JordanBlock {
    pub fn p(&self) -> i64 {
        match self {
            JordanBlock::Cyclic { p, .. } => *p,
            JordanBlock::Even { .. } => 2,
        }
    }

    pub fn k(&self) -> u32 {
        match self {
            JordanBlock::Cyclic { k, .. } | JordanBlock::Even { k, .. } => *k,
        }
    }

    /// Contribution to the signature mod 8.
    pub fn signature(&self) -> i64 {
        match *self {
            JordanBlock::Cyclic { p: 2, k, value } => {
                let t = value.rem_euclid(8);
                let twist = if (t == 3 || t == 5) && k % 2 == 1 { 4 } else { 0 };
                (t + twist).rem_euclid(8)
            }
            JordanBlock::Cyclic { p, k, value } => {
                if k % 2 == 0 {
                    return 0;
                }
                let mut s = 0;
                if p % 4 == 3 {
                    s += 2;
                }
                if legendre(value / 2, p) == -1 {
                    s += 4;
                }
                s
            }
            JordanBlock::Even { k, a, d, .. } => {
                if (a * d).rem_euclid(8) == 4 && k % 2 == 1 {
                    4
                } else {
                    0
                }
            }
        }
    }

    /// The unit part of the determinant of the block's Gram matrix: a residue
    /// mod `p` for odd `p`, mod 8 for `p = 2`.
    pub fn unit(&self) -> i64 {
        match *self {
            JordanBlock::Cyclic { p: 2, value, .. } => value.rem_euclid(8),
            JordanBlock::Cyclic { p, value, .. } => value.rem_euclid(p),
            JordanBlock::Even { a, c, d, .. } => (a * d - c * c).rem_euclid(8),
        }
    }
}

/// Euler's criterion; `0` if `p | a`.
pub fn legendre(a: i64, p: i64) -> i64 {
    let a = a.rem_euclid(p);
    if a == 0 {
        return 0;
    }
    let mut r: i128 = 1;
    let mut b = a as i128;
    let mut e = (p - 1) / 2;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p as i128;
        }
        b = b * b % p as i128;
        e >>= 1;
    }
    if r == 1 {
        1
    } else {
        -1
    }
}

fn denominator_of_b(q: &Fqf, x: &[i64], y: &[i64]) -> i64 {
    *q.eval_b(x, y).denom()
}

/// Scaled numerator `value * scale` of a rational, exact.
fn scaled(v: R64, scale: i64) -> i64 {
    let s = v * R64::from_integer(scale);
    debug_assert!(s.is_integer());
    s.to_integer()
}

/// Orthogonal decomposition of the `p`-part into cyclic and (for `p = 2`)
/// rank-two blocks.
pub fn jordan_decomposition(q: &Fqf, p: i64) -> Result<Vec<JordanBlock>> {
    let mut f = q.p_part(p);
    f.check_budget("jordan decomposition")?;
    let mut blocks = Vec::new();
    while !f.is_trivial() {
        let pk = f.exponent();
        let k = valuation(pk, p);
        let elems = f.elements();
        let cyc = elems.iter().find(|x| f.element_order(x) == pk && denominator_of_b(&f, x, x) == pk);
        let split: Vec<Elem> = if let Some(x) = cyc {
            let value = scaled(f.eval_q(x), pk).rem_euclid(2 * pk);
            debug_assert!(p == 2 || value % 2 == 0);
            blocks.push(JordanBlock::Cyclic { p, k, value });
            vec![x.clone()]
        } else {
            if p != 2 {
                return Err(LatticeError::Inconsistent("odd p-part without a cyclic summand".into()));
            }
            let x = elems.iter().find(|x| f.element_order(x) == pk).expect("exponent is attained");
            let y = elems
                .iter()
                .find(|y| denominator_of_b(&f, x, y) == pk)
                .ok_or_else(|| LatticeError::Inconsistent("degenerate 2-part".into()))?;
            let a = scaled(f.eval_q(x), pk).rem_euclid(2 * pk);
            let d = scaled(f.eval_q(y), pk).rem_euclid(2 * pk);
            let c = scaled(f.eval_b(x, y), pk).rem_euclid(pk);
            blocks.push(JordanBlock::Even { k, a, c, d });
            vec![x.clone(), y.clone()]
        };
        let perp = f.orthogonal(&split);
        f = f.subquotient(&perp, &[])?.form;
    }
    Ok(blocks)
}

fn valuation(mut n: i64, p: i64) -> u32 {
    let mut k = 0;
    while n % p == 0 && n != 0 {
        n /= p;
        k += 1;
    }
    k
}

/// Signature mod 8 of any even lattice with this discriminant form.
pub fn fqf_signature(q: &Fqf) -> Result<i64> {
    let mut s = 0;
    for p in q.primes() {
        for b in jordan_decomposition(q, p)? {
            s += b.signature();
        }
    }
    Ok(s.rem_euclid(8))
}

/// Existence of an even lattice with the given signature and discriminant form.
pub fn even_lattice_exists(signature: (usize, usize), q: &Fqf) -> Result<bool> {
    let (tp, tm) = signature;
    let rank = tp + tm;
    if (tp as i64 - tm as i64 - fqf_signature(q)?).rem_euclid(8) != 0 {
        return Ok(false);
    }
    if rank < q.length() {
        return Ok(false);
    }
    let order = q.order();
    for p in q.primes() {
        if rank != q.p_length(p) {
            continue;
        }
        let blocks = jordan_decomposition(q, p)?;
        let pk_total: i64 = q.p_part(p).order();
        let w = order / pk_total;
        if p != 2 {
            let mut u: i64 = 1;
            for b in &blocks {
                u = (u * b.unit()).rem_euclid(p);
            }
            let lhs = if tm % 2 == 1 { -w } else { w };
            if legendre(lhs, p) != legendre(u, p) {
                return Ok(false);
            }
        } else {
            let splits_order_two = blocks.iter().any(|b| matches!(b, JordanBlock::Cyclic { k: 1, .. }));
            if splits_order_two {
                continue;
            }
            let mut u: i64 = 1;
            for b in &blocks {
                u = (u * b.unit()).rem_euclid(8);
            }
            let w8 = w.rem_euclid(8);
            if w8 != u && w8 != (-u).rem_euclid(8) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

// ---- involutions of unimodular lattices ------------------------------------

/// Existence of an involution of an even unimodular lattice of signature
/// `(l_plus, l_minus)` whose coinvariant lattice has signature
/// `(t_plus, t_minus)` and 2-elementary discriminant of length `a`, parity `delta`.
pub fn involution_coinvariant_exists(
    l_plus: usize,
    l_minus: usize,
    t_plus: usize,
    t_minus: usize,
    a: usize,
    delta: u8,
) -> Result<bool> {
    if (l_plus as i64 - l_minus as i64).rem_euclid(8) != 0 {
        return Err(LatticeError::OutOfRange(format!(
            "unimodular signature ({l_plus}, {l_minus}) is not 0 mod 8"
        )));
    }
    if delta > 1 {
        return Err(LatticeError::OutOfRange(format!("parity {delta}")));
    }
    let diff = t_plus as i64 - t_minus as i64;
    let t = t_plus + t_minus;
    let l = l_plus + l_minus;
    let c1 = t_plus <= l_plus && t_minus <= l_minus;
    let c2 = c1 && a <= t.min(l - t);
    let c3 = (t + a).is_multiple_of(2);
    let c4 = delta != 0 || diff.rem_euclid(4) == 0;
    let c5 = a != 0 || (delta == 0 && diff.rem_euclid(8) == 0);
    let c6 = a != 1 || matches!(diff.rem_euclid(8), 1 | 7);
    let c7 = !(a == 2 && diff.rem_euclid(8) == 4) || delta == 0;
    let c8 = !(delta == 0 && c1 && (a == t || a == l - t)) || diff.rem_euclid(8) == 0;
    Ok(c1 && c2 && c3 && c4 && c5 && c6 && c7 && c8)
}

/// `(a, δ)` for a 2-elementary lattice, `None` otherwise.
pub fn two_elementary_invariants(l: &Lattice) -> Option<(usize, u8)> {
    let q = l.disc_form();
    if q.orders().iter().any(|&d| d != 2) {
        return None;
    }
    Some((q.rank(), q.parity()))
}

// ---- definite enumeration ----------------------------------------------------

/// Bound on `a_1 ... a_n / det` for Minkowski-reduced positive forms of rank `n`,
/// as a fraction.
fn product_constant(n: usize) -> (i64, i64) {
    match n {
        0 | 1 => (1, 1),
        2 => (4, 3),
        3 => (2, 1),
        4 => (4, 1),
        5 => (8, 1),
        _ => (64, 3),
    }
}

/// Exponent of `L^♯` from a Gram matrix: least common denominator of its inverse.
pub fn disc_exponent(g: &IMat) -> i64 {
    linalg::inverse_scaled(g).map(|(_, d)| d).unwrap_or(0)
}

pub fn is_m_elementary(l: &Lattice, m: i64) -> bool {
    l.rank() == 0 || m % disc_exponent(l.gram()) == 0
}

fn adjugate(b: &IMat) -> Vec<Vec<i128>> {
    let n = b.len();
    if n == 1 {
        return vec![vec![1]];
    }
    let mut adj = vec![vec![0i128; n]; n];
    for i in 0..n {
        for j in 0..n {
            let minor: IMat = (0..n)
                .filter(|&r| r != j)
                .map(|r| (0..n).filter(|&c| c != i).map(|c| b[r][c]).collect())
                .collect();
            let s = if (i + j) % 2 == 0 { 1 } else { -1 };
            adj[i][j] = s * linalg::det(&minor);
        }
    }
    adj
}

struct Level {
    gram: IMat,
    det: i128,
    adj: Vec<Vec<i128>>,
    /// For each `i`, the vectors `ε` supported on `0..=i` with `ε_i = 1`, with `Q(ε)`.
    eps: Vec<Vec<(Vec<i64>, i64)>>,
}

impl Level {
    fn new(gram: IMat) -> Level {
        let k = gram.len();
        let mut eps = Vec::with_capacity(k);
        for i in 0..k {
            let mut list = Vec::new();
            let total = 3usize.pow(i as u32);
            for code in 0..total {
                let mut e = vec![0i64; k];
                let mut c = code;
                for slot in e.iter_mut().take(i) {
                    *slot = (c % 3) as i64 - 1;
                    c /= 3;
                }
                e[i] = 1;
                let qv = linalg::narrow(linalg::pair(&gram, &e, &e));
                list.push((e, qv));
            }
            eps.push(list);
        }
        Level { det: linalg::det(&gram), adj: adjugate(&gram), gram, eps }
    }
}

/// Shared state of one enumeration run.
struct Enumerator<'a> {
    rank: usize,
    det_lo: i64,
    det_hi: i64,
    /// `λ_n * det_hi` as a fraction (numerator, denominator).
    prod_bound: (i128, i128),
    keep: &'a (dyn Fn(&IMat, i64) -> bool + Sync),
}

impl Enumerator<'_> {
    fn prod_ok(&self, prod: i128, a: i64, remaining: u32) -> bool {
        let mut p = prod;
        for _ in 0..remaining {
            p = p.saturating_mul(a as i128);
        }
        p.saturating_mul(self.prod_bound.1) <= self.prod_bound.0
    }

    /// Off-diagonal rows `c` for a new basis vector.
    fn rows(&self, lv: &Level) -> Vec<Vec<i64>> {
        let k = lv.gram.len();
        let mut out = Vec::new();
        let mut c = vec![0i64; k];
        self.rows_rec(lv, 0, &mut c, &mut out);
        out
    }

    fn rows_rec(&self, lv: &Level, i: usize, c: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        let k = lv.gram.len();
        if i == k {
            out.push(c.clone());
            return;
        }
        let half = lv.gram[i][i] / 2;
        let lo = if i + 1 == k { 0 } else { -half };
        for v in lo..=half {
            c[i] = v;
            let ok = lv.eps[i].iter().all(|(e, qe)| {
                let s: i64 = (0..=i).map(|j| c[j] * e[j]).sum();
                (2 * s).abs() <= *qe
            });
            if ok {
                self.rows_rec(lv, i + 1, c, out);
            }
        }
        c[i] = 0;
    }

    /// All completions of the leading block `gram` with diagonal product `prod`.
    fn extend(&self, gram: IMat, prod: i128, out: &mut Vec<IMat>) {
        let k = gram.len();
        let last = k + 1 == self.rank;
        let prev = gram[k - 1][k - 1];
        let lv = Level::new(gram);
        for c in self.rows(&lv) {
            let mut t: i128 = 0;
            for i in 0..k {
                for j in 0..k {
                    t += c[i] as i128 * lv.adj[i][j] * c[j] as i128;
                }
            }
            // det of the extension is det(B) * a - t.
            let mut a_lo = prev.max(2);
            let min_pos = Integer::div_floor(&t, &lv.det) + 1;
            a_lo = a_lo.max(linalg::narrow(min_pos));
            let mut a_hi = i64::MAX;
            if last {
                let lo = Integer::div_ceil(&(t + self.det_lo as i128), &lv.det);
                let hi = Integer::div_floor(&(t + self.det_hi as i128), &lv.det);
                a_lo = a_lo.max(linalg::narrow(lo));
                a_hi = linalg::narrow(hi);
            }
            if a_lo % 2 != 0 {
                a_lo += 1;
            }
            let remaining = (self.rank - k) as u32;
            let mut a = a_lo;
            while a <= a_hi && self.prod_ok(prod, a, remaining) {
                let mut g = lv.gram.clone();
                for (i, row) in g.iter_mut().enumerate() {
                    row.push(c[i]);
                }
                let mut row = c.clone();
                row.push(a);
                g.push(row);
                if last {
                    let d = linalg::narrow(lv.det * a as i128 - t);
                    if (self.keep)(&g, d) {
                        out.push(g);
                    }
                } else {
                    self.extend(g, prod * a as i128, out);
                }
                a += 2;
            }
        }
    }

    fn run(&self) -> Vec<IMat> {
        let n = self.rank;
        let mut firsts = Vec::new();
        let mut a = 2i64;
        while self.prod_ok(1, a, n as u32) {
            firsts.push(a);
            a += 2;
        }
        if n == 1 {
            return firsts
                .into_iter()
                .filter(|&a| a >= self.det_lo && a <= self.det_hi)
                .map(|a| vec![vec![a]])
                .filter(|g| (self.keep)(g, g[0][0]))
                .collect();
        }
        // Split the work at rank-2 prefixes.
        let mut prefixes: Vec<(IMat, i128)> = Vec::new();
        for a0 in firsts {
            if n == 2 {
                prefixes.push((vec![vec![a0]], a0 as i128));
            } else {
                self.rank_two_prefixes(a0, &mut prefixes);
            }
        }
        par::flat_map(&prefixes, |(g, prod)| {
            let mut out = Vec::new();
            self.extend(g.clone(), *prod, &mut out);
            out
        })
    }

    fn rank_two_prefixes(&self, a0: i64, out: &mut Vec<(IMat, i128)>) {
        let lv = Level::new(vec![vec![a0]]);
        for c in self.rows(&lv) {
            let t = c[0] as i128 * c[0] as i128;
            let mut a = a0.max(linalg::narrow(Integer::div_floor(&t, &lv.det) + 1));
            if a % 2 != 0 {
                a += 1;
            }
            while self.prod_ok(a0 as i128, a, (self.rank - 1) as u32) {
                out.push((vec![vec![a0, c[0]], vec![c[0], a]], a0 as i128 * a as i128));
                a += 2;
            }
        }
    }
}

/// Positive definite even Gram matrices of the given rank with
/// `det_lo <= det <= det_hi` accepted by `keep(gram, det)`, one per isometry
/// class, in canonical order. The representative of each class is the
/// lexicographically least reduced Gram matrix found.
pub fn enumerate_positive(
    rank: usize,
    det_lo: i64,
    det_hi: i64,
    keep: &(dyn Fn(&IMat, i64) -> bool + Sync),
) -> Result<Vec<Lattice>> {
    if rank == 0 || rank > MAX_ENUM_RANK {
        return Err(LatticeError::OutOfRange(format!("rank {rank} (supported 1..={MAX_ENUM_RANK})")));
    }
    if det_hi > MAX_ENUM_DET || det_lo < 1 || det_lo > det_hi {
        return Err(LatticeError::OutOfRange(format!(
            "determinant range [{det_lo}, {det_hi}] (supported within [1, {MAX_ENUM_DET}])"
        )));
    }
    let (num, den) = product_constant(rank);
    let en = Enumerator {
        rank,
        det_lo,
        det_hi,
        prod_bound: (num as i128 * det_hi as i128, den as i128),
        keep,
    };
    let mut grams = en.run();
    grams.sort();
    grams.dedup();
    dedup_isometric(grams)
}

/// Collapse isometric Gram matrices, keeping the first of each class in the
/// given order; output sorted by `(|det|, gram)`.
fn dedup_isometric(grams: Vec<IMat>) -> Result<Vec<Lattice>> {
    let lats: Vec<Lattice> = grams
        .into_iter()
        .map(|g| Lattice::new(g).expect("enumerated forms are nondegenerate"))
        .collect();
    let keys = par::map(&lats, fingerprint);
    let mut buckets: BTreeMap<Fingerprint, Vec<Lattice>> = BTreeMap::new();
    for (l, k) in lats.into_iter().zip(keys) {
        buckets.entry(k).or_default().push(l);
    }
    let buckets: Vec<Vec<Lattice>> = buckets.into_values().collect();
    let reps: Vec<Result<Vec<Lattice>>> = par::map(&buckets, |bucket| {
        let mut reps: Vec<Lattice> = Vec::new();
        for l in bucket {
            let mut seen = false;
            for r in &reps {
                if isometry::are_isometric(l, r)? {
                    seen = true;
                    break;
                }
            }
            if !seen {
                reps.push(l.clone());
            }
        }
        Ok(reps)
    });
    let mut out = Vec::new();
    for r in reps {
        out.extend(r?);
    }
    out.sort_by_key(canonical_key);
    Ok(out)
}

type Fingerprint = (i64, Vec<usize>, Vec<i64>);

fn fingerprint(l: &Lattice) -> Fingerprint {
    let mut orders = l.disc_form().orders().to_vec();
    orders.sort();
    (l.abs_det(), l.theta_prefix(3), orders)
}

/// Sort key `(rank, |det|, gram)`.
pub fn canonical_key(l: &Lattice) -> (usize, i64, IMat) {
    (l.rank(), l.abs_det(), l.gram().clone())
}

fn orient(ls: Vec<Lattice>, negative: bool) -> Vec<Lattice> {
    if negative {
        ls.into_iter().map(|l| l.negate()).collect()
    } else {
        ls
    }
}

/// Every even definite lattice of the given rank with `|det| <= det_bound`, up to isometry.
pub fn enumerate_definite_even(rank: usize, det_bound: i64, negative: bool) -> Result<Vec<Lattice>> {
    Ok(orient(enumerate_positive(rank, 1, det_bound, &|_, _| true)?, negative))
}

/// As `enumerate_definite_even`, keeping only lattices accepted by `keep`
/// (applied to the positive definite Gram matrix and its determinant).
pub fn enumerate_definite_filtered(
    rank: usize,
    det_bound: i64,
    negative: bool,
    keep: &(dyn Fn(&IMat, i64) -> bool + Sync),
) -> Result<Vec<Lattice>> {
    Ok(orient(enumerate_positive(rank, 1, det_bound, keep)?, negative))
}

/// Negative definite even `m`-elementary lattices of exactly this rank with
/// `|det| <= det_bound`.
pub fn enumerate_m_elementary_rank(m: i64, rank: usize, det_bound: i64) -> Result<Vec<Lattice>> {
    if m < 1 {
        return Err(LatticeError::OutOfRange(format!("m = {m}")));
    }
    if m % 2 == 1 && rank % 2 == 1 {
        return Ok(Vec::new());
    }
    let keep = move |g: &IMat, d: i64| {
        let mut dd = d;
        // det divides a power of m
        loop {
            let gg = dd.gcd(&m);
            if gg == 1 {
                break;
            }
            while dd % gg == 0 {
                dd /= gg;
            }
        }
        dd == 1 && m % disc_exponent(g) == 0
    };
    enumerate_definite_filtered(rank, det_bound, true, &keep)
}

/// Negative definite even `m`-elementary lattices of rank `1..=max_rank`, using
/// the bound `|det| <= m^rank`.
pub fn enumerate_m_elementary(m: i64, max_rank: usize) -> Result<Vec<Lattice>> {
    let mut out = Vec::new();
    for r in 1..=max_rank {
        if m % 2 == 1 && r % 2 == 1 {
            continue;
        }
        let bound = (m as i128).pow(r as u32);
        if bound > MAX_ENUM_DET as i128 {
            return Err(LatticeError::Budget(format!("determinant bound {m}^{r} = {bound}")));
        }
        out.extend(enumerate_m_elementary_rank(m, r, bound as i64)?);
    }
    Ok(out)
}

type GenusCacheKey = (usize, i64);

fn exact_det_cache() -> &'static Mutex<HashMap<GenusCacheKey, Vec<Lattice>>> {
    static CACHE: OnceLock<Mutex<HashMap<GenusCacheKey, Vec<Lattice>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Positive definite even lattices of the given rank and exact determinant.
fn positive_with_det(rank: usize, det: i64) -> Result<Vec<Lattice>> {
    let key = (rank, det);
    if let Some(v) = exact_det_cache().lock().expect("cache lock").get(&key) {
        return Ok(v.clone());
    }
    let v = enumerate_positive(rank, det, det, &|_, _| true)?;
    exact_det_cache().lock().expect("cache lock").entry(key).or_insert(v.clone());
    Ok(v)
}

/// All isometry classes in a definite genus.
pub fn lattices_in_genus(g: &GenusSymbol) -> Result<Vec<Lattice>> {
    let (sp, sm) = g.signature;
    if sp != 0 && sm != 0 {
        return Err(LatticeError::NotDefinite);
    }
    let rank = sp + sm;
    if rank == 0 {
        return Ok(if g.disc_form.is_trivial() { vec![Lattice::zero()] } else { Vec::new() });
    }
    if !g.exists()? {
        return Ok(Vec::new());
    }
    let negative = sm > 0;
    let cands = orient(positive_with_det(rank, g.abs_det())?, negative);
    let mut out = Vec::new();
    for l in cands {
        if g.disc_form.is_isomorphic(&l.disc_form())? {
            out.push(l);
        }
    }
    Ok(out)
}

/// Whether a definite lattice is the only class in its genus.
pub fn unique_in_genus(l: &Lattice) -> Result<bool> {
    Ok(lattices_in_genus(&genus_of(l))?.len() == 1)
}

/// Prime divisors of `m`.
pub fn primes_of(m: i64) -> Vec<i64> {
    prime_factors(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{a, bl, d, e, rank1, u};

    fn diag(v: &[i64]) -> IMat {
        let mut m = linalg::zeros(v.len(), v.len());
        for (i, &x) in v.iter().enumerate() {
            m[i][i] = x;
        }
        m
    }

    fn milgram(q: &Fqf) -> i64 {
        let (mut re, mut im) = (0.0f64, 0.0f64);
        for x in q.elements() {
            let v = q.eval_q(&x);
            let t = std::f64::consts::PI * (*v.numer() as f64) / (*v.denom() as f64);
            re += t.cos();
            im += t.sin();
        }
        let ang = im.atan2(re);
        let s = (ang / (std::f64::consts::PI / 4.0)).round() as i64;
        s.rem_euclid(8)
    }

    #[test]
    fn signatures_by_blocks() {
        assert_eq!(fqf_signature(&a(2).unwrap().disc_form()).unwrap(), 6);
        assert_eq!(fqf_signature(&rank1(12).unwrap().disc_form()).unwrap(), 1);
        assert_eq!(fqf_signature(&d(4).unwrap().disc_form()).unwrap(), 4);
        for l in [
            a(1).unwrap(),
            a(3).unwrap(),
            a(4).unwrap(),
            d(5).unwrap(),
            e(6).unwrap(),
            e(7).unwrap(),
            bl(),
            rank1(-4).unwrap().oplus(&a(3).unwrap()),
            rank1(-18).unwrap(),
            rank1(-50).unwrap().oplus(&rank1(6).unwrap()),
            u().rescale(4).unwrap(),
            rank1(-16).unwrap().oplus(&rank1(-2).unwrap()),
        ] {
            let q = l.disc_form();
            let (sp, sm) = l.signature();
            let expect = (sp as i64 - sm as i64).rem_euclid(8);
            assert_eq!(fqf_signature(&q).unwrap(), expect, "{:?}", l.gram());
            assert_eq!(milgram(&q), expect);
        }
    }

    #[test]
    fn existence() {
        let q = a(2).unwrap().disc_form();
        assert!(even_lattice_exists((0, 2), &q).unwrap());
        assert!(!even_lattice_exists((0, 1), &q).unwrap());
        assert!(even_lattice_exists((1, 3), &q).unwrap());
        let q = rank1(-2).unwrap().oplus(&rank1(-2).unwrap()).disc_form();
        assert!(even_lattice_exists((0, 2), &q).unwrap());
        let q = d(4).unwrap().disc_form();
        assert!(!even_lattice_exists((1, 1), &q).unwrap());
        assert!(even_lattice_exists((2, 6), &q).unwrap());
        assert!(even_lattice_exists((3, 5), &bl().disc_form()).unwrap());
        let q3 = a(2).unwrap().disc_form().negate();
        assert!(even_lattice_exists((2, 0), &q3).unwrap());
        // Odd-p determinant obstruction: <4/3> + 3<2/3> has signature 4 mod 8
        // but no realization of rank 4.
        let q = Fqf::from_numerators(vec![3; 4], 3, diag(&[4, 2, 2, 2])).unwrap();
        assert_eq!(fqf_signature(&q).unwrap(), 4);
        assert!(!even_lattice_exists((4, 0), &q).unwrap());
        assert!(!even_lattice_exists((0, 4), &q).unwrap());
        assert!(even_lattice_exists((2, 6), &q).unwrap());
        // 2-adic obstruction: <1/4> + <5/4> has signature 6 but no rank-2 realization.
        let q = Fqf::from_numerators(vec![4, 4], 4, diag(&[1, 5])).unwrap();
        assert_eq!(fqf_signature(&q).unwrap(), 6);
        assert!(!even_lattice_exists((0, 2), &q).unwrap());
        let g = GenusSymbol::new((0, 2), q);
        assert!(lattices_in_genus(&g).unwrap().is_empty());
    }

    #[test]
    fn involution_conditions() {
        let mut found = Vec::new();
        for tm in 0..=5 {
            for a in 0..=6 {
                for delta in 0..=1u8 {
                    if tm < 6 && involution_coinvariant_exists(5, 5, 1, tm, a, delta).unwrap() {
                        found.push((1, tm, a, delta));
                    }
                }
            }
        }
        let expect = vec![
            (1, 0, 1, 1),
            (1, 1, 0, 0),
            (1, 1, 2, 0),
            (1, 1, 2, 1),
            (1, 2, 1, 1),
            (1, 2, 3, 1),
            (1, 3, 2, 1),
            (1, 3, 4, 1),
            (1, 4, 3, 1),
            (1, 4, 5, 1),
            (1, 5, 2, 0),
            (1, 5, 4, 1),
        ];
        assert_eq!(found, expect);
        assert!(involution_coinvariant_exists(8, 0, 8, 0, 0, 0).unwrap());
        assert!(!involution_coinvariant_exists(8, 0, 4, 0, 1, 1).unwrap());
        assert!(involution_coinvariant_exists(5, 4, 1, 1, 0, 0).is_err());
    }

    #[test]
    fn small_enumerations() {
        let r1 = enumerate_definite_even(1, 4, true).unwrap();
        assert_eq!(r1.iter().map(|l| l.gram().clone()).collect::<Vec<_>>(), vec![vec![vec![-2]], vec![vec![-4]]]);
        let r2 = enumerate_definite_even(2, 4, false).unwrap();
        let grams: Vec<IMat> = r2.iter().map(|l| l.gram().clone()).collect();
        assert_eq!(grams, vec![vec![vec![2, 1], vec![1, 2]], vec![vec![2, 0], vec![0, 2]]]);
    }

    #[test]
    fn two_elementary_list() {
        let got = enumerate_m_elementary(2, 5).unwrap();
        let expect = [
            rank1(-2).unwrap(),
            a(1).unwrap().oplus(&a(1).unwrap()),
            Lattice::direct_sum(&vec![a(1).unwrap(); 3]).unwrap(),
            d(4).unwrap(),
            Lattice::direct_sum(&vec![a(1).unwrap(); 4]).unwrap(),
            d(4).unwrap().oplus(&a(1).unwrap()),
            Lattice::direct_sum(&vec![a(1).unwrap(); 5]).unwrap(),
        ];
        assert_eq!(got.len(), expect.len());
        for l in &expect {
            assert_eq!(got.iter().filter(|g| isometry::are_isometric(g, l).unwrap()).count(), 1);
        }
    }

    #[test]
    fn genus_identity() {
        assert!(same_genus(&bl(), &Lattice::direct_sum(&[u(), u(), u(), rank1(-2).unwrap(), rank1(-2).unwrap()]).unwrap()).unwrap());
        let four = Lattice::direct_sum(&vec![a(1).unwrap(); 4]).unwrap();
        assert!(!same_genus(&d(4).unwrap(), &four).unwrap());
        assert!(unique_in_genus(&d(4).unwrap()).unwrap());
        assert!(unique_in_genus(&a(2).unwrap()).unwrap());
        let rec = genus_of(&bl()).to_record();
        assert!(GenusSymbol::from_record(&rec).unwrap().same(&genus_of(&bl())).unwrap());
    }
}

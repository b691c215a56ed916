//! Isometries: automorphism groups of definite lattices by backtracking,
//! invariant and coinvariant sublattices, discriminant actions, spinor norms
//! and equivariant gluing.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{LatticeError, Result};
use crate::fqf::{Elem, Fqf, FqfMap};
use crate::lattice::{fincke_pohst, Lattice};
use crate::linalg::{self, IMat, QMat, Q};
use crate::par;

/// Order cap for isometries of rank-8 hosts (lcm of orders whose cyclotomic
/// degrees fit in rank 8 is far larger, but every order in scope divides 120).
pub const ORDER_CAP: u64 = 120;

/// Upper bound on the number of group elements enumerated.
pub const GROUP_SIZE_CAP: usize = 200_000;

/// Upper bound on the number of candidate vectors per search.
pub const CANDIDATE_CAP: usize = 2_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Isometry {
    lattice: Lattice,
    matrix: IMat,
}

impl Isometry {
    /// `matrix` acts on coordinate columns and must satisfy `M^T G M = G`.
    pub fn new(lattice: Lattice, matrix: IMat) -> Result<Isometry> {
        let n = lattice.rank();
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
            return Err(LatticeError::NotIsometry);
        }
        let g = lattice.gram();
        if linalg::mul(&linalg::mul(&linalg::transpose(&matrix), g), &matrix) != *g {
            return Err(LatticeError::NotIsometry);
        }
        if linalg::det(&matrix).abs() != 1 {
            return Err(LatticeError::NotIsometry);
        }
        Ok(Isometry { lattice, matrix })
    }

    pub fn identity(l: &Lattice) -> Isometry {
        Isometry { lattice: l.clone(), matrix: linalg::identity(l.rank()) }
    }

    pub fn minus_identity(l: &Lattice) -> Isometry {
        let mut m = linalg::identity(l.rank());
        for (i, r) in m.iter_mut().enumerate() {
            r[i] = -1;
        }
        Isometry { lattice: l.clone(), matrix: m }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn matrix(&self) -> &IMat {
        &self.matrix
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Isometry) -> Isometry {
        Isometry { lattice: self.lattice.clone(), matrix: linalg::mul(&self.matrix, &other.matrix) }
    }

    pub fn inverse(&self) -> Isometry {
        // M^{-1} = G^{-1} M^T G.
        let (adj, d) = linalg::inverse_scaled(&self.matrix).expect("isometries are invertible");
        let inv = adj
            .iter()
            .map(|r| r.iter().map(|x| x / d).collect())
            .collect();
        Isometry { lattice: self.lattice.clone(), matrix: inv }
    }

    pub fn apply(&self, v: &[i64]) -> Vec<i64> {
        linalg::mul_vec(&self.matrix, v)
    }

    pub fn is_identity(&self) -> bool {
        self.matrix == linalg::identity(self.lattice.rank())
    }

    pub fn order(&self) -> Result<u64> {
        order_of(&self.matrix, ORDER_CAP)
    }

    /// Saturated basis (rows) of the fixed sublattice.
    pub fn invariant_basis(&self) -> IMat {
        invariant_basis(self.lattice.rank(), std::slice::from_ref(&self.matrix))
    }

    pub fn invariant(&self) -> Result<Lattice> {
        let b = self.invariant_basis();
        if b.is_empty() {
            return Ok(Lattice::zero());
        }
        self.lattice.sublattice(&b)
    }

    pub fn fixed_rank(&self) -> usize {
        self.invariant_basis().len()
    }

    /// Coinvariant sublattice and its basis in ambient coordinates.
    pub fn coinvariant(&self) -> Result<(Lattice, IMat)> {
        self.lattice.orthogonal_complement(&self.invariant_basis())
    }

    /// Induced automorphism of the discriminant form (generators as in `disc_form`).
    pub fn disc_action(&self) -> FqfMap {
        disc_action(&self.lattice, &self.matrix)
    }

    pub fn is_disc_trivial(&self, scope: &DiscScope) -> bool {
        let q = self.lattice.disc_form();
        acts_trivially(&q, &self.disc_action(), scope)
    }

    /// Real spinor norm, `+1` on reflections in vectors of negative square.
    pub fn spinor_norm(&self) -> i8 {
        spinor_norm(self.lattice.gram(), &self.matrix)
    }

    /// Same invariant via the orientation of a maximal positive subspace.
    pub fn spinor_norm_by_orientation(&self) -> i8 {
        orientation_sign(self.lattice.gram(), &self.matrix)
    }

    pub fn in_o_plus(&self) -> bool {
        self.spinor_norm() == 1
    }
}

/// Least `n` with `g^n = 1`, up to `cap`.
pub fn order_of(g: &IMat, cap: u64) -> Result<u64> {
    let id = linalg::identity(g.len());
    let mut p = g.clone();
    for k in 1..=cap {
        if p == id {
            return Ok(k);
        }
        p = linalg::mul(&p, g);
    }
    Err(LatticeError::OrderCap(cap))
}

/// Common fixed sublattice of the given matrices (saturated, Hermite form).
pub fn invariant_basis(n: usize, gens: &[IMat]) -> IMat {
    let mut rows: IMat = Vec::new();
    for g in gens {
        for (i, r) in g.iter().enumerate() {
            let mut row = r.clone();
            row[i] -= 1;
            rows.push(row);
        }
    }
    if rows.iter().all(|r| r.iter().all(|&x| x == 0)) {
        return linalg::identity(n);
    }
    linalg::hnf_rows(&linalg::kernel(&rows, n))
}

/// Action on `L^♯` of an isometry given by its matrix.
pub fn disc_action(l: &Lattice, m: &IMat) -> FqfMap {
    let disc = l.discriminant();
    let q = &disc.form;
    let images = (0..q.rank())
        .map(|i| {
            let mut x = vec![0; q.rank()];
            x[i] = 1;
            let (num, e) = disc.lift(&x);
            disc.class_of_fraction(&linalg::mul_vec(m, &num), e)
                .expect("isometries preserve the dual lattice")
        })
        .collect();
    FqfMap { images }
}

/// Which part of the discriminant group an isometry must fix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiscScope {
    Unconstrained,
    Trivial,
    TrivialOnPPart(i64),
    /// Trivial on every element of odd order.
    TrivialOnOddPart,
    /// Trivial on the subgroup generated by the given elements.
    TrivialOnSubgroup(Vec<Elem>),
}

pub fn acts_trivially(q: &Fqf, f: &FqfMap, scope: &DiscScope) -> bool {
    let fixes = |x: &[i64]| f.apply(q, x) == q.reduce(x);
    let gen = |i: usize, mult: i64| {
        let mut x = vec![0; q.rank()];
        x[i] = mult;
        x
    };
    match scope {
        DiscScope::Unconstrained => true,
        DiscScope::Trivial => (0..q.rank()).all(|i| fixes(&gen(i, 1))),
        DiscScope::TrivialOnPPart(p) => (0..q.rank()).all(|i| {
            let d = q.orders()[i];
            fixes(&gen(i, d / p_power(d, *p)))
        }),
        DiscScope::TrivialOnOddPart => (0..q.rank()).all(|i| {
            let d = q.orders()[i];
            fixes(&gen(i, p_power(d, 2)))
        }),
        DiscScope::TrivialOnSubgroup(gens) => gens.iter().all(|x| fixes(x)),
    }
}

fn p_power(mut d: i64, p: i64) -> i64 {
    let mut out = 1;
    while d % p == 0 {
        d /= p;
        out *= p;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IsometryConstraints {
    pub order: u64,
    pub fixed_rank: Option<usize>,
    pub disc: DiscScope,
}

impl IsometryConstraints {
    pub fn fixed_point_free(order: u64, disc: DiscScope) -> Self {
        IsometryConstraints { order, fixed_rank: Some(0), disc }
    }

    pub fn matches(&self, g: &Isometry, q: &Fqf) -> bool {
        if order_of(g.matrix(), self.order).ok() != Some(self.order) {
            return false;
        }
        if let Some(r) = self.fixed_rank {
            if g.fixed_rank() != r {
                return false;
            }
        }
        acts_trivially(q, &g.disc_action(), &self.disc)
    }
}

/// Sign-normalized Gram of a definite lattice (positive definite).
fn positive_gram(l: &Lattice) -> Result<IMat> {
    if l.is_positive_definite() {
        Ok(l.gram().clone())
    } else if l.is_negative_definite() {
        Ok(l.negate().gram().clone())
    } else {
        Err(LatticeError::NotDefinite)
    }
}

struct Cand {
    v: Vec<i64>,
    gv: Vec<i64>,
}

/// Matrices `M` with `M^T G2 M = G1` (both positive definite), in search order.
fn search_maps(g1: &IMat, g2: &IMat, limit: Option<usize>) -> Result<Vec<IMat>> {
    let n = g1.len();
    if n != g2.len() {
        return Ok(Vec::new());
    }
    if n == 0 {
        return Ok(vec![Vec::new()]);
    }
    if linalg::det(g1) != linalg::det(g2) {
        return Ok(Vec::new());
    }
    let max_norm = (0..n).map(|i| g1[i][i]).max().unwrap_or(0);
    let vecs = fincke_pohst(g2, max_norm);
    if vecs.len() > CANDIDATE_CAP {
        return Err(LatticeError::Budget(format!("{} candidate vectors", vecs.len())));
    }
    let mut buckets: std::collections::BTreeMap<i64, Vec<Vec<i64>>> = Default::default();
    for v in vecs {
        let nv = linalg::narrow(linalg::pair(g2, &v, &v));
        buckets.entry(nv).or_default().push(v);
    }
    for b in buckets.values_mut() {
        b.sort();
    }
    let mut order: Vec<usize> = (0..n).collect();
    let count = |i: usize| buckets.get(&g1[i][i]).map_or(0, |b| b.len());
    if order.iter().any(|&i| count(i) == 0) {
        return Ok(Vec::new());
    }
    // Fewest candidates first, then prefer basis vectors tied to earlier ones.
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() < n {
        let next = order
            .iter()
            .copied()
            .filter(|i| !chosen.contains(i))
            .min_by_key(|&i| {
                let links = chosen.iter().filter(|&&j| g1[i][j] != 0).count();
                (std::cmp::Reverse(links.min(1)), count(i), i)
            })
            .unwrap();
        chosen.push(next);
    }
    order = chosen;
    let levels: Vec<Vec<Cand>> = order
        .iter()
        .map(|&i| {
            buckets[&g1[i][i]]
                .iter()
                .map(|v| Cand { v: v.clone(), gv: linalg::mul_vec(g2, v) })
                .collect()
        })
        .collect();
    let first: Vec<usize> = (0..levels[0].len()).collect();
    let run = |&c0: &usize| -> Vec<IMat> {
        let mut out = Vec::new();
        let mut picked = vec![c0];
        let mut nodes = 0usize;
        dfs(g1, &order, &levels, &mut picked, limit, &mut out, &mut nodes);
        out
    };
    let maps: Vec<IMat> = match limit {
        Some(1) => par::find_first(&first, |c| run(c).into_iter().next()).into_iter().collect(),
        _ => {
            let all = par::flat_map(&first, run);
            if all.len() > GROUP_SIZE_CAP {
                return Err(LatticeError::Budget(format!("more than {GROUP_SIZE_CAP} isometries")));
            }
            match limit {
                Some(l) => all.into_iter().take(l).collect(),
                None => all,
            }
        }
    };
    Ok(maps
        .into_iter()
        .map(|cols_in_order| {
            // cols_in_order[t] is the image of basis vector order[t].
            let mut m = linalg::zeros(n, n);
            for (t, &i) in order.iter().enumerate() {
                for r in 0..n {
                    m[r][i] = cols_in_order[t][r];
                }
            }
            m
        })
        .collect())
}

fn dfs(
    g1: &IMat,
    order: &[usize],
    levels: &[Vec<Cand>],
    picked: &mut Vec<usize>,
    limit: Option<usize>,
    out: &mut Vec<IMat>,
    nodes: &mut usize,
) {
    if limit.is_some_and(|l| out.len() >= l) || out.len() > GROUP_SIZE_CAP {
        return;
    }
    *nodes += 1;
    let t = picked.len();
    if t == order.len() {
        out.push(picked.iter().enumerate().map(|(lv, &c)| levels[lv][c].v.clone()).collect());
        return;
    }
    let i = order[t];
    for (c, cand) in levels[t].iter().enumerate() {
        let ok = (0..t).all(|s| {
            let w = &levels[s][picked[s]].v;
            linalg::dot128(&cand.gv, w) == g1[i][order[s]] as i128
        });
        if ok {
            picked.push(c);
            dfs(g1, order, levels, picked, limit, out, nodes);
            picked.pop();
            if limit.is_some_and(|l| out.len() >= l) {
                return;
            }
        }
    }
}

/// The full orthogonal group of a definite lattice; identity first.
pub fn isometry_group(n: &Lattice) -> Result<Vec<Isometry>> {
    if n.rank() == 0 {
        return Ok(vec![Isometry::identity(n)]);
    }
    let g = positive_gram(n)?;
    let mut ms = search_maps(&g, &g, None)?;
    let id = linalg::identity(n.rank());
    ms.retain(|m| *m != id);
    ms.insert(0, id);
    Ok(ms.into_iter().map(|matrix| Isometry { lattice: n.clone(), matrix }).collect())
}

/// An isometry `M: L1 -> L2` (coordinates), i.e. `M^T G2 M = G1`, if one exists.
pub fn isometric(l1: &Lattice, l2: &Lattice) -> Result<Option<IMat>> {
    if l1.rank() != l2.rank() || l1.det() != l2.det() || l1.signature() != l2.signature() {
        return Ok(None);
    }
    let g1 = positive_gram(l1)?;
    let g2 = positive_gram(l2)?;
    Ok(search_maps(&g1, &g2, Some(1))?.into_iter().next())
}

pub fn are_isometric(l1: &Lattice, l2: &Lattice) -> Result<bool> {
    Ok(isometric(l1, l2)?.is_some())
}

/// First element of `O(N)` (in group order) meeting the constraints.
pub fn search_isometry(n: &Lattice, c: &IsometryConstraints) -> Result<Option<Isometry>> {
    let group = isometry_group(n)?;
    let q = n.disc_form();
    Ok(par::find_first(&group, |g| c.matches(g, &q).then(|| g.clone())))
}

/// All elements of `O(N)` meeting the constraints.
pub fn isometries_matching(n: &Lattice, c: &IsometryConstraints) -> Result<Vec<Isometry>> {
    let group = isometry_group(n)?;
    let q = n.disc_form();
    Ok(par::filter_map(&group, |g| c.matches(g, &q).then(|| g.clone())))
}

/// Extend `g ⊕ h` from `M ⊕ N` (complementary primitive sublattices with the
/// given row bases) to `L`, if the result is integral.
pub fn glue_equivariant(l: &Lattice, m_rows: &IMat, n_rows: &IMat, g: &IMat, h: &IMat) -> Result<Option<Isometry>> {
    let n = l.rank();
    if m_rows.len() + n_rows.len() != n || g.len() != m_rows.len() || h.len() != n_rows.len() {
        return Err(LatticeError::Gluing("sublattices are not complementary".into()));
    }
    for x in m_rows {
        for y in n_rows {
            if l.pair(x, y) != 0 {
                return Err(LatticeError::Gluing("sublattices are not orthogonal".into()));
            }
        }
    }
    let mut w: IMat = m_rows.clone();
    w.extend(n_rows.iter().cloned());
    let wt = linalg::transpose(&w);
    let (adj, d) = linalg::inverse_scaled(&wt)
        .ok_or_else(|| LatticeError::Gluing("sublattices do not span".into()))?;
    let k = m_rows.len();
    let mut blk = linalg::zeros(n, n);
    for i in 0..k {
        for j in 0..k {
            blk[i][j] = g[i][j];
        }
    }
    for i in 0..n - k {
        for j in 0..n - k {
            blk[k + i][k + j] = h[i][j];
        }
    }
    let num = linalg::mul(&linalg::mul(&wt, &blk), &adj);
    if num.iter().flatten().any(|x| x % d != 0) {
        return Ok(None);
    }
    let f: IMat = num.iter().map(|r| r.iter().map(|x| x / d).collect()).collect();
    Ok(Isometry::new(l.clone(), f).ok())
}

// ---- spinor norm ---------------------------------------------------------

fn qdot(g: &QMat, x: &[Q], y: &[Q]) -> Q {
    let mut s = Q::zero();
    for i in 0..x.len() {
        if x[i].is_zero() {
            continue;
        }
        for j in 0..y.len() {
            s += x[i] * g[i][j] * y[j];
        }
    }
    s
}

/// Orthogonal basis of anisotropic vectors over Q.
fn orthogonal_basis(g: &QMat) -> Vec<Vec<Q>> {
    let n = g.len();
    let mut basis: Vec<Vec<Q>> = Vec::new();
    let std: Vec<Vec<Q>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect())
        .collect();
    while basis.len() < n {
        let rest: Vec<Vec<Q>> = std
            .iter()
            .map(|e| {
                let mut u = e.clone();
                for b in &basis {
                    let c = qdot(g, e, b) / qdot(g, b, b);
                    for (ui, bi) in u.iter_mut().zip(b) {
                        *ui -= c * bi;
                    }
                }
                u
            })
            .filter(|u| u.iter().any(|x| !x.is_zero()))
            .collect();
        let pick = rest.iter().find(|u| !qdot(g, u, u).is_zero()).cloned().or_else(|| {
            for a in 0..rest.len() {
                for b in a + 1..rest.len() {
                    if !qdot(g, &rest[a], &rest[b]).is_zero() {
                        return Some(rest[a].iter().zip(&rest[b]).map(|(x, y)| x + y).collect());
                    }
                }
            }
            None
        });
        basis.push(pick.expect("nondegenerate form has an anisotropic vector"));
    }
    basis
}

fn reflect_cols(g: &QMat, h: &mut QMat, v: &[Q]) {
    let vv = qdot(g, v, v);
    let n = h.len();
    for c in 0..n {
        let col: Vec<Q> = (0..n).map(|r| h[r][c]).collect();
        let f = Q::from_integer(2) * qdot(g, &col, v) / vv;
        for r in 0..n {
            h[r][c] -= f * v[r];
        }
    }
}

fn apply_q(h: &QMat, x: &[Q]) -> Vec<Q> {
    h.iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// Cartan–Dieudonné factorization over Q; returns the reflection vectors.
pub fn reflection_factorization(gram: &IMat, m: &IMat) -> Vec<Vec<Q>> {
    let g = linalg::to_q(gram);
    let mut h = linalg::to_q(m);
    let basis = orthogonal_basis(&g);
    let mut refl = Vec::new();
    for x in &basis {
        let y = apply_q(&h, x);
        if y == *x {
            continue;
        }
        let v: Vec<Q> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        if !qdot(&g, &v, &v).is_zero() {
            reflect_cols(&g, &mut h, &v);
            refl.push(v);
        } else {
            let w: Vec<Q> = y.iter().zip(x).map(|(a, b)| a + b).collect();
            reflect_cols(&g, &mut h, &w);
            reflect_cols(&g, &mut h, x);
            refl.push(w);
            refl.push(x.clone());
        }
    }
    debug_assert_eq!(h, linalg::to_q(&linalg::identity(gram.len())));
    refl
}

pub fn spinor_norm(gram: &IMat, m: &IMat) -> i8 {
    let g = linalg::to_q(gram);
    reflection_factorization(gram, m)
        .iter()
        .map(|v| if qdot(&g, v, v).is_negative() { 1i8 } else { -1 })
        .product()
}

fn orientation_sign(gram: &IMat, m: &IMat) -> i8 {
    let g = linalg::to_q(gram);
    let h = linalg::to_q(m);
    let pos: Vec<Vec<Q>> = orthogonal_basis(&g)
        .into_iter()
        .filter(|b| qdot(&g, b, b).is_positive())
        .collect();
    if pos.is_empty() {
        return 1;
    }
    let k = pos.len();
    let mut a: QMat = vec![vec![Q::zero(); k]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = qdot(&g, &pos[i], &apply_q(&h, &pos[j]));
        }
    }
    if q_det(a).is_positive() {
        1
    } else {
        -1
    }
}

fn q_det(mut a: QMat) -> Q {
    let n = a.len();
    let mut det = Q::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !a[r][c].is_zero()) else { return Q::zero() };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        let piv = a[c][c];
        det *= piv;
        for r in c + 1..n {
            let f = a[r][c] / piv;
            for j in c..n {
                let t = a[c][j];
                a[r][j] -= f * t;
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{a, bl, d, rank1};

    #[test]
    fn group_orders() {
        assert_eq!(isometry_group(&rank1(-2).unwrap()).unwrap().len(), 2);
        assert_eq!(isometry_group(&a(2).unwrap()).unwrap().len(), 12);
        assert_eq!(isometry_group(&d(4).unwrap()).unwrap().len(), 1152);
        let g = isometry_group(&a(2).unwrap()).unwrap();
        assert!(g[0].is_identity());
    }

    #[test]
    fn orders_and_sublattices() {
        let a2 = a(2).unwrap();
        let id = Isometry::identity(&a2);
        assert_eq!(id.order().unwrap(), 1);
        assert_eq!(id.fixed_rank(), 2);
        assert_eq!(id.coinvariant().unwrap().0.rank(), 0);
        let m = Isometry::minus_identity(&a2);
        assert_eq!(m.order().unwrap(), 2);
        assert_eq!(m.fixed_rank(), 0);
        let r = Isometry::new(a2.clone(), vec![vec![0, -1], vec![1, -1]]).unwrap();
        assert_eq!(r.order().unwrap(), 3);
        assert_eq!(r.fixed_rank(), 0);
        assert_eq!(r.coinvariant().unwrap().0.det(), 3);
    }

    #[test]
    fn disc_actions() {
        let a2 = a(2).unwrap();
        assert!(Isometry::identity(&a2).is_disc_trivial(&DiscScope::Trivial));
        assert!(!Isometry::minus_identity(&a2).is_disc_trivial(&DiscScope::Trivial));
        let m2 = rank1(-2).unwrap();
        assert!(Isometry::minus_identity(&m2).is_disc_trivial(&DiscScope::Trivial));
    }

    #[test]
    fn spinor_norms() {
        let l = bl();
        // Reflection in the (-2)-vector e7: x -> x + (x.e7) e7.
        let mut r = linalg::identity(8);
        r[6][6] = -1;
        let g = Isometry::new(l.clone(), r).unwrap();
        assert_eq!(g.spinor_norm(), 1);
        assert_eq!(g.spinor_norm_by_orientation(), 1);
        // Reflection in e1 + f1 (square +2) swaps e1 and f1.
        let mut s = linalg::identity(8);
        s[0] = vec![0, -1, 0, 0, 0, 0, 0, 0];
        s[1] = vec![-1, 0, 0, 0, 0, 0, 0, 0];
        let g = Isometry::new(l.clone(), s).unwrap();
        assert_eq!(g.spinor_norm(), -1);
        assert_eq!(g.spinor_norm_by_orientation(), -1);
        // Swap e1 <-> f1 is the reflection in e1 - f1 (square -2).
        let mut t = linalg::identity(8);
        t[0] = vec![0, 1, 0, 0, 0, 0, 0, 0];
        t[1] = vec![1, 0, 0, 0, 0, 0, 0, 0];
        let g = Isometry::new(l, t).unwrap();
        assert_eq!(g.spinor_norm(), 1);
        assert_eq!(Isometry::minus_identity(&d(4).unwrap()).spinor_norm(), 1);
    }

    #[test]
    fn searches() {
        let c = IsometryConstraints::fixed_point_free(8, DiscScope::Trivial);
        assert!(search_isometry(&d(5).unwrap(), &c).unwrap().is_some());
        assert!(search_isometry(&d(4).unwrap(), &c).unwrap().is_none());
        let c = IsometryConstraints::fixed_point_free(10, DiscScope::Trivial);
        assert!(search_isometry(&a(4).unwrap(), &c).unwrap().is_none());
    }

    #[test]
    fn gluing_identity() {
        let l = bl();
        let m_rows = vec![vec![0, 0, 0, 0, 0, 0, 1, 0]];
        let (_, n_rows) = l.orthogonal_complement(&m_rows).unwrap();
        let f = glue_equivariant(&l, &m_rows, &n_rows, &vec![vec![1]], &linalg::identity(7)).unwrap().unwrap();
        assert!(f.is_identity());
        let f = glue_equivariant(&l, &m_rows, &n_rows, &vec![vec![-1]], &linalg::identity(7)).unwrap().unwrap();
        assert_eq!(f.order().unwrap(), 2);
        assert_eq!(f.fixed_rank(), 7);
    }

    #[test]
    fn isometry_between_bases() {
        let a2 = a(2).unwrap();
        let other = Lattice::new(vec![vec![-2, -1], vec![-1, -2]]).unwrap();
        let m = isometric(&other, &a2).unwrap().unwrap();
        let back = linalg::mul(&linalg::mul(&linalg::transpose(&m), a2.gram()), &m);
        assert_eq!(&back, other.gram());
        assert!(!are_isometric(&a2, &rank1(-2).unwrap().oplus(&rank1(-6).unwrap())).unwrap());
    }
}

//! Primitive embeddings: abstract classification through embedding subgroups
//! of the host's discriminant form, explicit embeddings with their gluing data,
//! overlattices from gluing, host divisibility and the wall tests used for
//! isometries of `3U + 2[-2]`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{LatticeError, Result};
use crate::fqf::{graph_quotient, Elem, Fqf, FqfMap};
use crate::genus::{self, GenusSymbol};
use crate::isometry::{self, disc_action};
use crate::lattice::{self, is_primitive_rows, Lattice};
use crate::linalg::{self, IMat};
use crate::par;

/// Minimal generating set of the subgroup with the given element indices.
pub fn generators_of(q: &Fqf, members: &[usize]) -> Vec<Elem> {
    let mut gens: Vec<Elem> = Vec::new();
    let mut span: BTreeSet<usize> = [q.index_of(&q.zero())].into();
    let mut by_order: Vec<usize> = members.to_vec();
    by_order.sort_by_key(|&i| (std::cmp::Reverse(q.element_order(&q.element(i))), i));
    for i in by_order {
        if span.contains(&i) {
            continue;
        }
        gens.push(q.element(i));
        span = q.span(&gens).into_iter().collect();
        if span.len() == members.len() {
            break;
        }
    }
    gens
}

// ---- abstract classes ---------------------------------------------------------

/// A primitive embedding `M -> L` up to `O(L)`, described by an embedding
/// subgroup `K ⊂ L^♯` and an isometry `ξ: K -> K' ⊂ M^♯`.
#[derive(Clone, Debug)]
pub struct EmbeddingClass {
    pub source: Lattice,
    pub host: Lattice,
    /// Generators of `K` in `q_L`.
    pub k_gens: Vec<Elem>,
    /// Their images under `ξ` in `q_M`.
    pub kp_gens: Vec<Elem>,
    /// Genus of the orthogonal complement.
    pub complement: GenusSymbol,
    /// Gluing index `|H|`.
    pub h: i64,
    /// Embedding index `|K|`.
    pub k: i64,
}

impl EmbeddingClass {
    pub fn source_form(&self) -> Fqf {
        self.source.disc_form()
    }

    /// Element indices of `K' ⊂ M^♯`.
    pub fn embedding_subgroup(&self) -> Vec<usize> {
        self.source_form().span(&self.kp_gens)
    }

    /// Generators of the gluing subgroup `H = K'^⊥ ⊂ M^♯`.
    pub fn gluing_subgroup(&self) -> Vec<Elem> {
        self.source_form().orthogonal(&self.kp_gens)
    }

    /// `|det(complement)| = |det(L) det(M)|`, i.e. `H = M^♯`.
    pub fn is_full_gluing(&self) -> bool {
        self.k == 1
    }

    /// Divisibility in the host of `v ∈ M`: the largest `d` with `v/d ∈ K'`.
    pub fn host_divisibility(&self, v: &[i64]) -> Result<i64> {
        divisibility_through(&self.source, &self.embedding_subgroup(), v)
    }

    /// All lattices in the complement genus when it is definite.
    pub fn complement_lattices(&self) -> Result<Vec<Lattice>> {
        genus::lattices_in_genus(&self.complement)
    }
}

/// Largest divisor `d` of `(v, M)` such that `v/d` lies in the subgroup `kp` of `M^♯`.
pub fn divisibility_through(m: &Lattice, kp: &[usize], v: &[i64]) -> Result<i64> {
    let div = m.divisibility(v)?;
    let disc = m.discriminant();
    let members: BTreeSet<usize> = kp.iter().copied().collect();
    let mut best = 1;
    for d in 1..=div {
        if div % d != 0 {
            continue;
        }
        if let Some(c) = disc.class_of_fraction(v, d) {
            if members.contains(&disc.form.index_of(&c)) {
                best = d;
            }
        }
    }
    Ok(best)
}

/// Steps (i)-(iii) of the embedding search: all pairs `(K, ξ)` with `K` up to
/// `O(q_L)` and a nonempty complement genus. The host is assumed unique in its genus.
pub fn embedding_classes(m: &Lattice, l: &Lattice) -> Result<Vec<EmbeddingClass>> {
    if m.rank() > l.rank() {
        return Err(LatticeError::OutOfRange(format!("rank {} > host rank {}", m.rank(), l.rank())));
    }
    let (lp, lm) = l.signature();
    let (mp, mm) = m.signature();
    if mp > lp || mm > lm {
        return Ok(Vec::new());
    }
    let sig = (lp - mp, lm - mm);
    let ql = l.disc_form();
    let qm = m.disc_form();
    let ol = ql.orthogonal_group()?;
    let reps = ql.orbit_representatives(&ql.subgroups()?, &ol);
    let det_l = l.abs_det();
    let det_m = m.abs_det();
    let mut out: Vec<EmbeddingClass> = Vec::new();
    for rep in reps {
        let k = rep.len() as i64;
        // Index identities require k | det(M) and k^2 | det(L) det(M).
        if det_m % k != 0 || (det_l as i128 * det_m as i128) % (k as i128 * k as i128) != 0 {
            continue;
        }
        let kg = generators_of(&ql, &rep);
        let sub = ql.subquotient(&kg, &[])?;
        let maps = sub.form.embeddings_into(&qm)?;
        let mut seen: BTreeMap<Vec<usize>, Vec<Fqf>> = BTreeMap::new();
        for f in maps {
            let kp: Vec<Elem> = f.images.clone();
            let key = qm.span(&kp);
            let comp_form = graph_quotient(&ql, &qm.negate(), &sub.gens, &kp)?;
            let known = seen.entry(key).or_default();
            let mut dup = false;
            for c in known.iter() {
                if c.is_isomorphic(&comp_form)? {
                    dup = true;
                    break;
                }
            }
            if dup {
                continue;
            }
            known.push(comp_form.clone());
            let complement = GenusSymbol::new(sig, comp_form);
            if !complement.exists()? {
                continue;
            }
            out.push(EmbeddingClass {
                source: m.clone(),
                host: l.clone(),
                k_gens: sub.gens.clone(),
                kp_gens: kp,
                complement,
                h: det_m / k,
                k,
            });
        }
    }
    Ok(out)
}

/// Existence of a primitive embedding. Definite hosts are searched directly;
/// indefinite hosts go through `embedding_classes`.
pub fn exists_primitive_embedding(m: &Lattice, l: &Lattice) -> Result<bool> {
    if m.rank() == 0 {
        return Ok(true);
    }
    if l.is_definite() {
        return Ok(!primitive_embeddings_definite(m, l, Some(1))?.is_empty());
    }
    Ok(!embedding_classes(m, l)?.is_empty())
}

/// Existence of a primitive embedding with gluing subgroup all of `M^♯`.
pub fn exists_full_gluing_embedding(m: &Lattice, l: &Lattice) -> Result<bool> {
    if l.is_definite() {
        let want = l.abs_det() as i128 * m.abs_det() as i128;
        for rows in primitive_embeddings_definite(m, l, None)? {
            let (c, _) = l.orthogonal_complement(&rows)?;
            if c.abs_det() as i128 == want {
                return Ok(true);
            }
        }
        return Ok(false);
    }
    Ok(embedding_classes(m, l)?.iter().any(|c| c.is_full_gluing()))
}

// ---- definite hosts ---------------------------------------------------------------

/// Primitive embeddings of `M` into a definite `L` as image rows, by
/// backtracking over vectors of matching norm (not reduced modulo `O(L)`).
pub fn primitive_embeddings_definite(m: &Lattice, l: &Lattice, limit: Option<usize>) -> Result<Vec<IMat>> {
    if m.rank() > l.rank() {
        return Ok(Vec::new());
    }
    if !l.is_definite() || !m.is_definite() {
        return Err(LatticeError::NotDefinite);
    }
    if m.rank() == 0 {
        return Ok(vec![Vec::new()]);
    }
    if (m.is_negative_definite()) != (l.is_negative_definite()) {
        return Ok(Vec::new());
    }
    let gm = m.gram();
    let norms: BTreeSet<i64> = (0..m.rank()).map(|i| gm[i][i].abs()).collect();
    let max = *norms.iter().max().unwrap();
    let vecs = l.vectors_up_to(max, |n| norms.contains(&n));
    let gl = l.gram();
    let cands: Vec<(Vec<i64>, Vec<i64>, i64)> = vecs
        .into_iter()
        .map(|v| {
            let gv = linalg::mul_vec(gl, &v);
            let n = linalg::narrow(linalg::dot128(&gv, &v));
            (v, gv, n)
        })
        .collect();
    let levels: Vec<Vec<usize>> = (0..m.rank())
        .map(|i| (0..cands.len()).filter(|&c| cands[c].2 == gm[i][i]).collect())
        .collect();
    let mut out = Vec::new();
    let mut chosen = Vec::new();
    definite_rec(gm, &cands, &levels, &mut chosen, limit, &mut out);
    Ok(out)
}

fn definite_rec(
    gm: &IMat,
    cands: &[(Vec<i64>, Vec<i64>, i64)],
    levels: &[Vec<usize>],
    chosen: &mut Vec<usize>,
    limit: Option<usize>,
    out: &mut Vec<IMat>,
) {
    if limit.is_some_and(|l| out.len() >= l) {
        return;
    }
    let t = chosen.len();
    if t == levels.len() {
        let rows: IMat = chosen.iter().map(|&c| cands[c].0.clone()).collect();
        if is_primitive_rows(&rows) {
            out.push(rows);
        }
        return;
    }
    for &c in &levels[t] {
        let ok = (0..t).all(|s| linalg::dot128(&cands[c].1, &cands[chosen[s]].0) == gm[t][s] as i128);
        if ok {
            chosen.push(c);
            definite_rec(gm, cands, levels, chosen, limit, out);
            chosen.pop();
            if limit.is_some_and(|l| out.len() >= l) {
                return;
            }
        }
    }
}

/// Largest `n` such that `A_n` embeds primitively into the negative definite `N` (0 if none).
pub fn largest_an(n: &Lattice) -> Result<usize> {
    for k in (1..=n.rank()).rev() {
        if exists_primitive_embedding(&lattice::a(k)?, n)? {
            return Ok(k);
        }
    }
    Ok(0)
}

// ---- explicit embeddings --------------------------------------------------------

/// An explicit primitive sublattice with its complement and gluing data.
#[derive(Clone, Debug)]
pub struct PrimitiveEmbedding {
    pub host: Lattice,
    pub source: Lattice,
    /// Images of the source basis, in host coordinates.
    pub image: IMat,
    pub complement: Lattice,
    pub complement_basis: IMat,
    /// Generators of `H ⊂ M^♯`.
    pub gluing_subgroup: Vec<Elem>,
    /// `γ` on those generators, in the complement's discriminant form.
    pub gluing_images: Vec<Elem>,
    pub h: i64,
    pub k: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub m_gram: IMat,
    pub host_gram: IMat,
    pub image_basis: IMat,
    pub complement_gram: IMat,
    pub h_generators: IMat,
    pub gamma: IMat,
    pub h: i64,
    pub k: i64,
}

impl PrimitiveEmbedding {
    pub fn new(host: &Lattice, image: IMat) -> Result<PrimitiveEmbedding> {
        let source = if image.is_empty() { Lattice::zero() } else { host.sublattice(&image)? };
        let (complement, complement_basis) = host.orthogonal_complement(&image)?;
        let qm = source.discriminant();
        let qn = complement.discriminant();
        let n = host.rank();
        let mut hs: Vec<Elem> = Vec::new();
        let mut gs: Vec<Elem> = Vec::new();
        for j in 0..n {
            let col: Vec<i64> = host.gram().iter().map(|r| r[j]).collect();
            let pm: Vec<i64> = image.iter().map(|r| linalg::narrow(linalg::dot128(r, &col))).collect();
            let pn: Vec<i64> = complement_basis.iter().map(|r| linalg::narrow(linalg::dot128(r, &col))).collect();
            let x = if image.is_empty() { Vec::new() } else { qm.class_of_pairing(&pm) };
            let y = if complement_basis.is_empty() { Vec::new() } else { qn.class_of_pairing(&pn) };
            if x.iter().all(|&c| c == 0) && y.iter().all(|&c| c == 0) {
                continue;
            }
            hs.push(x);
            gs.push(y);
        }
        let h = if source.rank() == 0 { 1 } else { qm.form.span_order(&hs) };
        let k = source.abs_det_or_one() / h;
        Ok(PrimitiveEmbedding {
            host: host.clone(),
            source,
            image,
            complement,
            complement_basis,
            gluing_subgroup: hs,
            gluing_images: gs,
            h,
            k,
        })
    }

    /// Element indices of the embedding subgroup `K' = H^⊥ ⊂ M^♯`.
    pub fn embedding_subgroup(&self) -> Vec<usize> {
        let q = self.source.disc_form();
        q.span(&q.orthogonal(&self.gluing_subgroup))
    }

    /// Host divisibility of `v ∈ M` through the gluing subgroup.
    pub fn host_divisibility(&self, v: &[i64]) -> Result<i64> {
        divisibility_through(&self.source, &self.embedding_subgroup(), v)
    }

    /// Host divisibility of `v ∈ M` as the gcd of pairings of its image.
    pub fn direct_divisibility(&self, v: &[i64]) -> Result<i64> {
        self.host.divisibility(&self.push(v))
    }

    /// Image in host coordinates of a source vector.
    pub fn push(&self, v: &[i64]) -> Vec<i64> {
        let n = self.host.rank();
        (0..n)
            .map(|j| linalg::narrow(v.iter().zip(&self.image).map(|(&c, r)| c as i128 * r[j] as i128).sum()))
            .collect()
    }

    /// Index identities and the discriminant reconstruction of the host.
    pub fn check(&self) -> Result<()> {
        let dl = self.host.abs_det() as i128;
        let dm = self.source.abs_det_or_one() as i128;
        let dn = self.complement.abs_det_or_one() as i128;
        let (h, k) = (self.h as i128, self.k as i128);
        if h * h * dl != dm * dn || k * k * dn != dl * dm || h * k != dm {
            return Err(LatticeError::Inconsistent(format!("index identities fail: h={h} k={k}")));
        }
        if self.source.rank() > 0 && self.complement.rank() > 0 {
            let qm = self.source.disc_form();
            let qn = self.complement.disc_form();
            let q = graph_quotient(&qm, &qn, &self.gluing_subgroup, &self.gluing_images)?;
            if !q.is_isomorphic(&self.host.disc_form())? {
                return Err(LatticeError::Inconsistent("glued form differs from the host form".into()));
            }
        }
        Ok(())
    }

    pub fn to_record(&self) -> EmbeddingRecord {
        EmbeddingRecord {
            m_gram: self.source.gram().clone(),
            host_gram: self.host.gram().clone(),
            image_basis: self.image.clone(),
            complement_gram: self.complement.gram().clone(),
            h_generators: self.gluing_subgroup.clone(),
            gamma: self.gluing_images.clone(),
            h: self.h,
            k: self.k,
        }
    }

    /// Precompose with `g ∈ O(M)`: the embedding `x -> ι(g x)`.
    pub fn precompose(&self, g: &IMat) -> Result<PrimitiveEmbedding> {
        let r = self.image.len();
        let rows: IMat = (0..r)
            .map(|i| {
                let col: Vec<i64> = (0..r).map(|j| g[j][i]).collect();
                self.push(&col)
            })
            .collect();
        PrimitiveEmbedding::new(&self.host, rows)
    }
}

trait DetOrOne {
    fn abs_det_or_one(&self) -> i64;
}

impl DetOrOne for Lattice {
    fn abs_det_or_one(&self) -> i64 {
        if self.rank() == 0 {
            1
        } else {
            self.abs_det()
        }
    }
}

/// The overlattice of `M ⊕ N` defined by the graph of `γ: H -> N^♯`
/// (`q_N(γx) = -q_M(x)`), with both summands as explicit embeddings.
pub fn overlattice_from_gluing(
    m: &Lattice,
    n: &Lattice,
    h_gens: &[Elem],
    gamma: &[Elem],
) -> Result<(Lattice, PrimitiveEmbedding, PrimitiveEmbedding)> {
    let dm = m.discriminant();
    let dn = n.discriminant();
    let qm = &dm.form;
    let qn = &dn.form;
    if h_gens.len() != gamma.len() {
        return Err(LatticeError::Gluing("generator count mismatch".into()));
    }
    for (i, (x, y)) in h_gens.iter().zip(gamma).enumerate() {
        if !((qm.eval_q(x) + qn.eval_q(y)) / 2).is_integer() {
            return Err(LatticeError::Gluing("gluing map is not an anti-isometry".into()));
        }
        for (x2, y2) in h_gens.iter().zip(gamma).take(i) {
            if !(qm.eval_b(x, x2) + qn.eval_b(y, y2)).is_integer() {
                return Err(LatticeError::Gluing("gluing map does not respect the bilinear form".into()));
            }
        }
    }
    let (r, s) = (m.rank(), n.rank());
    let total = r + s;
    let sum = Lattice::sum_unchecked(&[m.clone(), n.clone()]);
    let e = dm.form.exponent().max(1) * dn.form.exponent().max(1);
    let mut rows: IMat = (0..total)
        .map(|i| {
            let mut v = vec![0; total];
            v[i] = e;
            v
        })
        .collect();
    for (x, y) in h_gens.iter().zip(gamma) {
        let (nx, ex) = if r > 0 { dm.lift(x) } else { (Vec::new(), 1) };
        let (ny, ey) = if s > 0 { dn.lift(y) } else { (Vec::new(), 1) };
        let mut v: Vec<i64> = nx.iter().map(|c| c * (e / ex)).collect();
        v.extend(ny.iter().map(|c| c * (e / ey)));
        rows.push(v);
    }
    let basis = linalg::hnf_rows(&rows);
    let g = sum.gram();
    let mut gram = linalg::zeros(total, total);
    for i in 0..total {
        for j in 0..total {
            let p = linalg::pair(g, &basis[i], &basis[j]);
            let ee = e as i128 * e as i128;
            if p % ee != 0 {
                return Err(LatticeError::Gluing("glued form is not integral".into()));
            }
            gram[i][j] = linalg::narrow(p / ee);
        }
    }
    let lat = Lattice::new(gram).map_err(|err| match err {
        LatticeError::OddDiagonal { .. } => LatticeError::Gluing("glued form is odd".into()),
        other => other,
    })?;
    let coords = |v: &[i64]| -> Result<Vec<i64>> {
        let scaled: Vec<i64> = v.iter().map(|c| c * e).collect();
        linalg::solve_rows_int(&basis, &scaled).ok_or_else(|| LatticeError::Gluing("summand not contained".into()))
    };
    let mut m_rows = Vec::new();
    for i in 0..r {
        let mut v = vec![0; total];
        v[i] = 1;
        m_rows.push(coords(&v)?);
    }
    let mut n_rows = Vec::new();
    for i in 0..s {
        let mut v = vec![0; total];
        v[r + i] = 1;
        n_rows.push(coords(&v)?);
    }
    let em = PrimitiveEmbedding::new(&lat, m_rows)?;
    let en = PrimitiveEmbedding::new(&lat, n_rows)?;
    Ok((lat, em, en))
}

// ---- walls in 3U + 2[-2] ------------------------------------------------------------

/// Vectors of `N` of square `-2` or `-4`.
pub fn wall_candidates(n: &Lattice) -> Result<Vec<Vec<i64>>> {
    if n.rank() == 0 {
        return Ok(Vec::new());
    }
    n.short_vectors(&[-2, -4])
}

fn check_host(l: &Lattice) -> Result<()> {
    if l.signature() != (3, 5) || l.abs_det() != 4 {
        return Err(LatticeError::OutOfRange("host is not in the genus of 3U+2[-2]".into()));
    }
    Ok(())
}

/// Some `v ∈ C(N)` has host divisibility 2, given the embedding subgroup `K' ⊂ N^♯`.
pub fn pex_hit(n: &Lattice, kp: &[usize]) -> Result<bool> {
    for v in wall_candidates(n)? {
        if divisibility_through(n, kp, &v)? == 2 {
            return Ok(true);
        }
    }
    Ok(false)
}

pub fn wall_intersection_pex(class: &EmbeddingClass) -> Result<bool> {
    check_host(&class.host)?;
    pex_hit(&class.source, &class.embedding_subgroup())
}

pub fn wall_intersection_full(class: &EmbeddingClass) -> Result<bool> {
    check_host(&class.host)?;
    let has_root = class.source.rank() > 0 && !class.source.short_vectors(&[-2])?.is_empty();
    Ok(has_root || wall_intersection_pex(class)?)
}

/// Every `α ∈ N^♯` with `q(α) ∈ {3/2, 1}` is `v/2` for some `v ∈ C(N)` with `2 | (v, N)`.
pub fn satisfies_divisibility_hypothesis(n: &Lattice) -> Result<bool> {
    if !n.is_negative_definite() && n.rank() > 0 {
        return Err(LatticeError::NotNegativeDefinite);
    }
    let disc = n.discriminant();
    let q = &disc.form;
    let mut halves: BTreeSet<usize> = BTreeSet::new();
    for v in wall_candidates(n)? {
        if let Some(c) = disc.class_of_fraction(&v, 2) {
            halves.insert(q.index_of(&c));
        }
    }
    let targets = [crate::fqf::R64::new(3, 2), crate::fqf::R64::from_integer(1)];
    Ok(q.elements().iter().all(|a| !targets.contains(&q.eval_q(a)) || halves.contains(&q.index_of(a))))
}

// ---- explicit search in an indefinite host --------------------------------------------

/// Bounded search for explicit primitive embeddings into an indefinite host.
/// A host vector with its pairing vector.
type Tagged = (Vec<i64>, Vec<i64>);

pub struct HostSearch {
    host: Lattice,
    /// Box vectors by norm, each with `G v`.
    buckets: BTreeMap<i64, Vec<Tagged>>,
    pub node_budget: usize,
}

impl HostSearch {
    /// Vectors with coordinates in `[-bound, bound]` and norm in `norms`.
    pub fn new(host: &Lattice, bound: i64, norms: &[i64]) -> HostSearch {
        let n = host.rank();
        let g = host.gram();
        let wanted: BTreeSet<i64> = norms.iter().copied().collect();
        let mut buckets: BTreeMap<i64, Vec<Tagged>> = BTreeMap::new();
        let side = (2 * bound + 1) as usize;
        let total = side.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let mut v = vec![0i64; n];
            for x in v.iter_mut() {
                *x = (c % side) as i64 - bound;
                c /= side;
            }
            let gv = linalg::mul_vec(g, &v);
            let nv = linalg::narrow(linalg::dot128(&gv, &v));
            if wanted.contains(&nv) && v.iter().any(|&x| x != 0) {
                buckets.entry(nv).or_default().push((v, gv));
            }
        }
        for b in buckets.values_mut() {
            b.sort_by_key(|(v, _)| (v.iter().map(|x| x.abs()).sum::<i64>(), v.clone()));
        }
        HostSearch { host: host.clone(), buckets, node_budget: 400_000 }
    }

    /// One vector per `(class of v/(v,L))` among primitive box vectors of norm `n`.
    fn first_vectors(&self, n: i64) -> Vec<Vec<i64>> {
        let disc = self.host.discriminant();
        let mut seen: BTreeSet<(i64, Vec<i64>)> = BTreeSet::new();
        let mut out = Vec::new();
        for (v, _) in self.buckets.get(&n).map(|b| b.as_slice()).unwrap_or(&[]) {
            if linalg::gcd_all(v.iter().map(|&x| x as i128)) != 1 {
                continue;
            }
            let d = self.host.divisibility(v).expect("nonzero");
            let c = disc.class_of_fraction(v, d).expect("v/div is dual");
            if seen.insert((d, c)) {
                out.push(v.clone());
            }
        }
        out
    }

    /// Explicit embeddings of `n` realizing each target embedding subgroup
    /// (element index sets of `N^♯`), transported along `O(N)` where needed.
    pub fn realize(&self, n: &Lattice, targets: &[Vec<usize>]) -> Result<Vec<Option<PrimitiveEmbedding>>> {
        let r = n.rank();
        let mut found: Vec<Option<PrimitiveEmbedding>> = vec![None; targets.len()];
        if r == 0 {
            let e = PrimitiveEmbedding::new(&self.host, Vec::new())?;
            for (i, t) in targets.iter().enumerate() {
                if t.len() == 1 {
                    found[i] = Some(e.clone());
                }
            }
            return Ok(found);
        }
        let group = isometry::isometry_group(n)?;
        let q = n.disc_form();
        let actions: Vec<FqfMap> = group.iter().map(|g| disc_action(n, g.matrix())).collect();
        // Targets in one O(N)-orbit share their divisibility constraints, so
        // each orbit gets its own, sharply pruned, search.
        let mut orbits: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for (i, t) in targets.iter().enumerate() {
            let key = actions.iter().map(|a| q.image_of_subgroup(t, a)).min().unwrap_or_else(|| t.clone());
            orbits.entry(key).or_default().push(i);
        }
        for idx in orbits.values() {
            let sub: Vec<Vec<usize>> = idx.iter().map(|&i| targets[i].clone()).collect();
            let got = self.realize_orbit(n, &q, &group, &actions, &sub)?;
            for (&i, e) in idx.iter().zip(got) {
                found[i] = e;
            }
        }
        Ok(found)
    }

    fn realize_orbit(
        &self,
        n: &Lattice,
        q: &Fqf,
        group: &[isometry::Isometry],
        actions: &[FqfMap],
        targets: &[Vec<usize>],
    ) -> Result<Vec<Option<PrimitiveEmbedding>>> {
        let r = n.rank();
        let gm = n.gram();
        let empty = Vec::new();
        let levels: Vec<&Vec<Tagged>> =
            (0..r).map(|i| self.buckets.get(&gm[i][i]).unwrap_or(&empty)).collect();
        let (checks, patterns) = divisibility_checks(n, q, targets, actions)?;
        let ctx = SearchCtx { n, q, group, actions, targets, levels, checks, patterns };
        let mut st = SearchState { found: vec![None; targets.len()], nodes: 0 };
        for first in self.first_vectors(gm[0][0]) {
            let gfirst = linalg::mul_vec(self.host.gram(), &first);
            let mut lists: Vec<Vec<usize>> = Vec::with_capacity(r);
            lists.push(Vec::new());
            for s in 1..r {
                lists.push(
                    (0..ctx.levels[s].len())
                        .filter(|&c| linalg::dot128(&gfirst, &ctx.levels[s][c].0) == gm[0][s] as i128)
                        .collect(),
                );
            }
            let mut chosen: Vec<Vec<i64>> = vec![first];
            let Some(alive) = self.narrow(&ctx, &chosen, &vec![true; ctx.patterns.len()]) else {
                continue;
            };
            self.search_rec(&ctx, &lists, &mut chosen, &alive, &mut st)?;
            if st.done() || st.nodes > self.node_budget {
                break;
            }
        }
        Ok(st.found)
    }

    /// Patterns still consistent once the checks ending at the last chosen
    /// vector are evaluated; `None` when no pattern survives.
    fn narrow(&self, ctx: &SearchCtx, chosen: &[Vec<i64>], alive: &[bool]) -> Option<Vec<bool>> {
        let t = chosen.len() - 1;
        let mut next = alive.to_vec();
        for (ci, c) in ctx.checks.iter().enumerate() {
            if c.last != t {
                continue;
            }
            let d = self.host.divisibility(&combine(&c.coeffs, chosen)).ok()?;
            for (p, a) in next.iter_mut().enumerate() {
                *a = *a && ctx.patterns[p][ci] == d;
            }
        }
        next.iter().any(|&a| a).then_some(next)
    }

    fn search_rec(
        &self,
        ctx: &SearchCtx,
        lists: &[Vec<usize>],
        chosen: &mut Vec<Vec<i64>>,
        alive: &[bool],
        st: &mut SearchState,
    ) -> Result<()> {
        st.nodes += 1;
        if st.nodes > self.node_budget || st.done() {
            return Ok(());
        }
        let t = chosen.len();
        let r = ctx.n.rank();
        if t == r {
            if !is_primitive_rows(chosen) {
                return Ok(());
            }
            let emb = PrimitiveEmbedding::new(&self.host, chosen.clone())?;
            let kp = emb.embedding_subgroup();
            for (i, target) in ctx.targets.iter().enumerate() {
                if st.found[i].is_some() || target.len() != kp.len() {
                    continue;
                }
                // g(target) = kp gives the embedding x -> ι(g x) with subgroup target.
                for (g, act) in ctx.group.iter().zip(ctx.actions) {
                    if ctx.q.image_of_subgroup(target, act) == kp {
                        st.found[i] = Some(emb.precompose(g.matrix())?);
                        break;
                    }
                }
            }
            return Ok(());
        }
        let gm = ctx.n.gram();
        for &c in &lists[t] {
            let (v, gv) = &ctx.levels[t][c];
            chosen.push(v.clone());
            if let Some(still) = self.narrow(ctx, chosen, alive) {
                let mut next: Vec<Vec<usize>> = lists.to_vec();
                for s in t + 1..r {
                    next[s].retain(|&d| linalg::dot128(gv, &ctx.levels[s][d].0) == gm[t][s] as i128);
                }
                self.search_rec(ctx, &next, chosen, &still, st)?;
            }
            chosen.pop();
            if st.nodes > self.node_budget || st.done() {
                break;
            }
        }
        Ok(())
    }
}

struct SearchCtx<'a> {
    n: &'a Lattice,
    q: &'a Fqf,
    group: &'a [isometry::Isometry],
    actions: &'a [FqfMap],
    targets: &'a [Vec<usize>],
    levels: Vec<&'a Vec<Tagged>>,
    checks: Vec<DivCheck>,
    /// Host divisibility of every check, one row per subgroup in the orbit of the targets.
    patterns: Vec<Vec<i64>>,
}

struct SearchState {
    found: Vec<Option<PrimitiveEmbedding>>,
    nodes: usize,
}

impl SearchState {
    fn done(&self) -> bool {
        self.found.iter().all(|f| f.is_some())
    }
}

/// A vector of `N` (coefficients) and the last basis index it uses.
struct DivCheck {
    coeffs: Vec<i64>,
    last: usize,
}

fn divisibility_checks(n: &Lattice, q: &Fqf, targets: &[Vec<usize>], actions: &[FqfMap]) -> Result<(Vec<DivCheck>, Vec<Vec<i64>>)> {
    let r = n.rank();
    let mut orbit: BTreeSet<Vec<usize>> = BTreeSet::new();
    for t in targets {
        for a in actions {
            orbit.insert(q.image_of_subgroup(t, a));
        }
    }
    let mut vecs: Vec<Vec<i64>> = if n.is_negative_definite() { wall_candidates(n)? } else { Vec::new() };
    for i in 0..r {
        let mut e = vec![0; r];
        e[i] = 1;
        vecs.push(e);
    }
    let mut checks = Vec::new();
    let mut seen: BTreeSet<Vec<i64>> = BTreeSet::new();
    for v in vecs {
        // v and -v have the same divisibility.
        let key = if v.iter().find(|&&x| x != 0).is_some_and(|&x| x < 0) { v.iter().map(|x| -x).collect() } else { v.clone() };
        if !seen.insert(key) {
            continue;
        }
        let last = v.iter().rposition(|&x| x != 0).expect("nonzero");
        checks.push(DivCheck { coeffs: v, last });
    }
    let mut patterns = Vec::new();
    for k in &orbit {
        let row: Result<Vec<i64>> = checks.iter().map(|c| divisibility_through(n, k, &c.coeffs)).collect();
        patterns.push(row?);
    }
    Ok((checks, patterns))
}

fn combine(coeffs: &[i64], rows: &[Vec<i64>]) -> Vec<i64> {
    let n = rows[0].len();
    (0..n)
        .map(|j| linalg::narrow(coeffs.iter().zip(rows).map(|(&c, r)| c as i128 * r[j] as i128).sum()))
        .collect()
}

/// Explicit realizations in `host` of the given abstract classes, by bounded search.
pub fn realize_classes(
    n: &Lattice,
    host: &Lattice,
    classes: &[EmbeddingClass],
    bound: i64,
) -> Result<Vec<Option<PrimitiveEmbedding>>> {
    let norms: Vec<i64> = (0..n.rank()).map(|i| n.gram()[i][i]).collect();
    let search = HostSearch::new(host, bound, &norms);
    let targets: Vec<Vec<usize>> = classes.iter().map(|c| c.embedding_subgroup()).collect();
    search.realize(n, &targets)
}

/// Candidates filtered in parallel by the existence of some embedding class.
pub fn filter_embeddable(cands: &[Lattice], host: &Lattice) -> Result<Vec<Lattice>> {
    let flags: Vec<Result<bool>> = par::map(cands, |n| Ok(!embedding_classes(n, host)?.is_empty()));
    let mut out = Vec::new();
    for (n, f) in cands.iter().zip(flags) {
        if f? {
            out.push(n.clone());
        }
    }
    Ok(out)
}

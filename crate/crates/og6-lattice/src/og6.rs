//! Classification of finite-order isometries of `3U + 2[-2]` whose coinvariant
//! lattice is negative definite and misses the prime-exceptional walls.
//!
//! Each order runs the same staged filter over candidate coinvariants:
//! m-elementary enumeration, divisor recursion, primitive embedding into the
//! host, wall test, fixed-point-free isometry search, and finally an explicit
//! witness on the host glued from the local isometry and the identity.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::embed::{self, EmbeddingClass, EmbeddingRecord, PrimitiveEmbedding};
use crate::error::{LatticeError, Result};
use crate::fqf::{prime_factors, FqfRecord};
use crate::genus::{self, GenusRecord, GenusSymbol, MAX_ENUM_DET};
use crate::isometry::{self, DiscScope, Isometry, IsometryConstraints};
use crate::lattice::{self, Lattice};
use crate::linalg::{self, IMat};
use crate::par;

/// Orders realized by a symplectic birational transformation.
pub const REALIZED_ORDERS: [i64; 9] = [1, 2, 3, 4, 5, 6, 8, 10, 12];
/// Orders examined directly.
pub const CLOSURE_ORDERS: [i64; 16] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 15, 16, 20, 24, 25];
/// Orders excluded because a proper divisor is excluded.
pub const DERIVED_ORDERS: [i64; 4] = [30, 40, 60, 120];
/// A negative definite coinvariant has rank at most 5 in signature (3,5).
pub const MAX_COINVARIANT_RANK: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Negative definite even m-elementary lattices within the length bounds.
    Elementary,
    /// For each prime `p | m` some coinvariant of order `m/p` embeds primitively.
    Divisor,
    /// Some primitive embedding into the host.
    Embeds,
    /// Fixed-point-free isometry of order `m`, trivial on the odd part of `N^♯`.
    Isometry,
    /// Some primitive embedding avoiding the prime-exceptional walls.
    PexFree,
    /// A local isometry trivial on the gluing subgroup of a wall-free embedding.
    Witness,
}

impl Stage {
    pub fn label(&self) -> &'static str {
        match self {
            Stage::Elementary => "elementary",
            Stage::Divisor => "divisor",
            Stage::Embeds => "embeds",
            Stage::Isometry => "isometry",
            Stage::PexFree => "pex-free",
            Stage::Witness => "witness",
        }
    }
}

/// Stage order per `m`. Powers of two apply the wall test before the isometry
/// search; for 2 and 4 the divisor test comes last so the embedding lists are
/// taken over all m-elementary candidates.
pub fn stage_order(m: i64) -> Vec<Stage> {
    use Stage::*;
    match m {
        2 | 4 => vec![Elementary, Embeds, PexFree, Isometry, Witness, Divisor],
        8 | 16 => vec![Elementary, Divisor, Embeds, PexFree, Isometry, Witness],
        _ => vec![Elementary, Divisor, Embeds, Isometry, PexFree, Witness],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub negative_definite: bool,
    pub pex_wall_free: bool,
    /// False for every `m > 1`: the coinvariant always contains a root.
    pub full_wall_free: bool,
    pub cond_det: bool,
    pub disc_trivial: bool,
}

#[derive(Clone, Debug)]
pub struct ClassificationRow {
    pub order: i64,
    pub coinvariant: Lattice,
    pub invariant_genus: GenusSymbol,
    pub witness: Isometry,
    /// The local isometry on the coinvariant (its own coordinates).
    pub local: IMat,
    pub embedding: PrimitiveEmbedding,
    pub flags: Flags,
}

#[derive(Clone, Debug)]
pub struct StageTrace {
    pub stage: Stage,
    pub survivors: Vec<Lattice>,
}

#[derive(Clone, Debug)]
pub struct OrderReport {
    pub order: i64,
    pub trace: Vec<StageTrace>,
    pub rows: Vec<ClassificationRow>,
    /// Set when the order is excluded before any enumeration.
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExclusionCertificate {
    pub order: i64,
    pub failing_stage: Stage,
    /// Survivors of the stage before the failing one.
    pub candidates: Vec<IMat>,
    pub reason: String,
}

impl OrderReport {
    pub fn survivors(&self, stage: Stage) -> Option<&[Lattice]> {
        self.trace.iter().find(|t| t.stage == stage).map(|t| t.survivors.as_slice())
    }

    pub fn is_monotone(&self) -> bool {
        self.trace.windows(2).all(|w| w[1].survivors.iter().all(|l| w[0].survivors.contains(l)))
    }

    pub fn certificate(&self) -> Option<ExclusionCertificate> {
        if !self.rows.is_empty() {
            return None;
        }
        let pos = self.trace.iter().position(|t| t.survivors.is_empty())?;
        let stage = self.trace[pos].stage;
        let before: Vec<Lattice> = if pos == 0 { Vec::new() } else { self.trace[pos - 1].survivors.clone() };
        let reason = match (&self.note, stage) {
            (Some(n), _) => n.clone(),
            (None, Stage::Isometry) => format!(
                "no fixed-point-free isometry of order {} trivial on the odd part of the discriminant",
                self.order
            ),
            (None, Stage::Witness) => format!("no isometry of order {} trivial on a wall-free gluing subgroup", self.order),
            (None, Stage::PexFree) => "every primitive embedding meets a prime-exceptional wall".into(),
            (None, Stage::Embeds) => "no primitive embedding into 3U+2[-2]".into(),
            (None, Stage::Divisor) => "no coinvariant of a proper divisor order embeds".into(),
            (None, Stage::Elementary) => "no m-elementary candidate within the length bounds".into(),
        };
        Some(ExclusionCertificate {
            order: self.order,
            failing_stage: stage,
            candidates: before.iter().map(|l| l.gram().clone()).collect(),
            reason,
        })
    }
}

// ---- bounds ----------------------------------------------------------------------

fn valuation(mut n: i64, p: i64) -> u32 {
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

fn is_prime(m: i64) -> bool {
    m > 1 && prime_factors(m) == vec![m]
}

fn euler_phi(n: i64) -> i64 {
    prime_factors(n).iter().fold(n, |acc, &p| acc / p * (p - 1))
}

/// Smallest rank of a lattice carrying a fixed-point-free isometry of order `m`:
/// the least `Σ φ(d)` over sets of divisors `d > 1` of `m` with lcm `m`.
pub fn min_fixed_point_free_rank(m: i64) -> usize {
    if m == 1 {
        return 0;
    }
    let divs: Vec<i64> = (2..=m).filter(|d| m % d == 0).collect();
    let mut best = i64::MAX;
    for mask in 1u32..(1 << divs.len()) {
        let mut l = 1i64;
        let mut s = 0i64;
        for (i, &d) in divs.iter().enumerate() {
            if mask & (1 << i) != 0 {
                l = num_integer::lcm(l, d);
                s += euler_phi(d);
            }
        }
        if l == m {
            best = best.min(s);
        }
    }
    best as usize
}

/// Determinant bound for rank `r` candidates containing a primitive `A_n`,
/// `None` when the rank is excluded outright.
pub fn elementary_det_bound(m: i64, r: usize, n: usize) -> Option<i64> {
    if r < n || r == 0 {
        return None;
    }
    if m % 2 == 1 && r % 2 == 1 {
        return None;
    }
    if is_prime(m) && !r.is_multiple_of(m as usize - 1) {
        return None;
    }
    let mut bound: i128 = 1;
    for p in prime_factors(m) {
        let mut l = r;
        let extra = usize::from((n as i64 + 1) % p == 0);
        if n > 0 {
            l = l.min(r - n + extra);
        }
        if p != 2 {
            l = l.min(8usize.saturating_sub(r));
        }
        bound *= (p as i128).pow(valuation(m, p) * l as u32);
    }
    Some(bound.min(i64::MAX as i128) as i64)
}

// ---- engine ---------------------------------------------------------------------

fn report_cache() -> &'static Mutex<BTreeMap<i64, Arc<OrderReport>>> {
    static CACHE: OnceLock<Mutex<BTreeMap<i64, Arc<OrderReport>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn host() -> Lattice {
    lattice::bl()
}

/// Classify the coinvariant lattices of order-`m` isometries (cached).
pub fn classify_order(m: i64) -> Result<Arc<OrderReport>> {
    if m < 1 {
        return Err(LatticeError::OutOfRange(format!("order {m}")));
    }
    if let Some(r) = report_cache().lock().expect("cache lock").get(&m) {
        return Ok(r.clone());
    }
    let report = Arc::new(compute_order(m)?);
    report_cache().lock().expect("cache lock").entry(m).or_insert(report.clone());
    Ok(report)
}

struct Context {
    m: i64,
    /// Coinvariants of order `m/p` for each prime `p | m`.
    divisor_rows: Vec<(i64, Vec<Lattice>)>,
}

fn compute_order(m: i64) -> Result<OrderReport> {
    if m == 1 {
        return identity_report();
    }
    let mut divisor_rows = Vec::new();
    for p in prime_factors(m) {
        let sub = classify_order(m / p)?;
        let rows: Vec<Lattice> = sub.rows.iter().map(|r| r.coinvariant.clone()).collect();
        if rows.is_empty() {
            return Ok(OrderReport {
                order: m,
                trace: vec![StageTrace { stage: Stage::Divisor, survivors: Vec::new() }],
                rows: Vec::new(),
                note: Some(format!("order {} = {m}/{p} is not realized", m / p)),
            });
        }
        divisor_rows.push((p, rows));
    }
    let ctx = Context { m, divisor_rows };
    let mut n_forced = 0;
    for (_, rows) in &ctx.divisor_rows {
        let mut least = usize::MAX;
        for r in rows {
            least = least.min(embed::largest_an(r)?);
        }
        n_forced = n_forced.max(least);
    }
    let mut trace = Vec::new();
    let mut current: Vec<Lattice> = Vec::new();
    let mut note = None;
    for stage in stage_order(m) {
        if stage == Stage::Elementary {
            for r in 1..=MAX_COINVARIANT_RANK {
                if let Some(bound) = elementary_det_bound(m, r, n_forced) {
                    if bound > MAX_ENUM_DET {
                        return Err(LatticeError::Budget(format!("order {m}, rank {r}: determinant bound {bound}")));
                    }
                    current.extend(genus::enumerate_m_elementary_rank(m, r, bound)?);
                }
            }
            if current.is_empty() && is_prime(m) {
                note = Some(format!("no rank r <= {MAX_COINVARIANT_RANK} with {} | r", m - 1));
            }
        } else {
            let keep: Vec<Result<bool>> = par::map(&current, |n| passes(stage, &ctx, n));
            let mut next = Vec::new();
            for (n, k) in current.iter().zip(keep) {
                if k? {
                    next.push(n.clone());
                }
            }
            current = next;
        }
        trace.push(StageTrace { stage, survivors: current.clone() });
        if current.is_empty() {
            break;
        }
    }
    let built: Vec<Result<ClassificationRow>> = par::map(&current, |n| build_row(m, n));
    let mut rows = Vec::new();
    for r in built {
        rows.push(r?);
    }
    rows.sort_by_key(|r| genus::canonical_key(&r.coinvariant));
    Ok(OrderReport { order: m, trace, rows, note })
}

fn passes(stage: Stage, ctx: &Context, n: &Lattice) -> Result<bool> {
    let m = ctx.m;
    match stage {
        Stage::Elementary => Ok(genus::is_m_elementary(n, m)),
        Stage::Divisor => {
            for (_, rows) in &ctx.divisor_rows {
                let mut any = false;
                for r in rows {
                    if embed::exists_primitive_embedding(r, n)? {
                        any = true;
                        break;
                    }
                }
                if !any {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Stage::Embeds => Ok(!embed::embedding_classes(n, &host())?.is_empty()),
        Stage::PexFree => Ok(!pex_free_classes(n)?.is_empty()),
        Stage::Isometry => {
            if min_fixed_point_free_rank(m) > n.rank() {
                return Ok(false);
            }
            let c = IsometryConstraints::fixed_point_free(m as u64, DiscScope::TrivialOnOddPart);
            Ok(isometry::search_isometry(n, &c)?.is_some())
        }
        Stage::Witness => Ok(local_witness(m, n)?.is_some()),
    }
}

/// Embedding classes of `n` into the host that avoid the prime-exceptional walls.
pub fn pex_free_classes(n: &Lattice) -> Result<Vec<EmbeddingClass>> {
    let mut out = Vec::new();
    for c in embed::embedding_classes(n, &host())? {
        if !embed::wall_intersection_pex(&c)? {
            out.push(c);
        }
    }
    Ok(out)
}

/// A wall-free class together with a fixed-point-free local isometry of order
/// `m` acting trivially on its gluing subgroup (first found, full gluing first).
pub fn local_witness(m: i64, n: &Lattice) -> Result<Option<(EmbeddingClass, Isometry)>> {
    if min_fixed_point_free_rank(m) > n.rank() {
        return Ok(None);
    }
    let mut classes = pex_free_classes(n)?;
    classes.sort_by_key(|c| c.k);
    let group = isometry::isometry_group(n)?;
    let q = n.disc_form();
    for c in classes {
        let cons = IsometryConstraints::fixed_point_free(m as u64, DiscScope::TrivialOnSubgroup(c.gluing_subgroup()));
        if let Some(g) = par::find_first(&group, |g| cons.matches(g, &q).then(|| g.clone())) {
            return Ok(Some((c, g)));
        }
    }
    Ok(None)
}

fn identity_report() -> Result<OrderReport> {
    let zero = Lattice::zero();
    let row = build_row(1, &zero)?;
    Ok(OrderReport {
        order: 1,
        trace: vec![StageTrace { stage: Stage::Witness, survivors: vec![zero] }],
        rows: vec![row],
        note: None,
    })
}

fn build_row(m: i64, n: &Lattice) -> Result<ClassificationRow> {
    let l = host();
    let (class, local) = if m == 1 {
        let classes = embed::embedding_classes(n, &l)?;
        let c = classes.into_iter().next().ok_or_else(|| LatticeError::Inconsistent("zero lattice".into()))?;
        (c, Isometry::identity(n))
    } else {
        local_witness(m, n)?
            .ok_or_else(|| LatticeError::Inconsistent(format!("order {m}: survivor without a local witness")))?
    };
    let (witness, embedding) = synthesize_witness(n, &class, local.matrix())?;
    let check = validate_witness(m as u64, n, witness.matrix());
    if !check.passed() {
        return Err(LatticeError::Inconsistent(format!("order {m}: synthesized witness fails validation: {check:?}")));
    }
    Ok(ClassificationRow {
        order: m,
        coinvariant: n.clone(),
        invariant_genus: class.complement.clone(),
        witness,
        local: local.matrix().clone(),
        embedding,
        flags: Flags {
            negative_definite: check.coinvariant_negative_definite,
            pex_wall_free: check.pex_wall_free,
            full_wall_free: !check.root_present && check.pex_wall_free,
            cond_det: check.cond_det,
            disc_trivial: check.disc_trivial,
        },
    })
}

/// Explicit embedding realizing `class` (bounded box search in the host).
pub fn realize(n: &Lattice, class: &EmbeddingClass) -> Result<PrimitiveEmbedding> {
    for bound in [2, 3] {
        let found = embed::realize_classes(n, &class.host, std::slice::from_ref(class), bound)?;
        if let Some(Some(e)) = found.into_iter().next() {
            return Ok(e);
        }
    }
    Err(LatticeError::Budget("no explicit embedding found in the search box".into()))
}

/// Glue `g'` on `N` with the identity on the complement of an explicit
/// embedding realizing `class`.
pub fn synthesize_witness(n: &Lattice, class: &EmbeddingClass, local: &IMat) -> Result<(Isometry, PrimitiveEmbedding)> {
    let l = host();
    let emb = realize(n, class)?;
    emb.check()?;
    let id = linalg::identity(emb.complement.rank());
    let w = isometry::glue_equivariant(&l, &emb.image, &emb.complement_basis, local, &id)?
        .ok_or_else(|| LatticeError::Gluing("local isometry does not extend".into()))?;
    Ok((w, emb))
}

/// Full genus of the invariant lattice for a classified coinvariant: the
/// complement of a full-gluing embedding.
pub fn invariant_genus_of(n: &Lattice) -> Result<GenusSymbol> {
    embed::embedding_classes(n, &host())?
        .into_iter()
        .find(|c| c.is_full_gluing())
        .map(|c| c.complement)
        .ok_or_else(|| LatticeError::Inconsistent("no full-gluing embedding".into()))
}

// ---- validation -------------------------------------------------------------------

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessCheck {
    pub preserves_form: bool,
    pub order_ok: bool,
    pub disc_trivial: bool,
    pub coinvariant_negative_definite: bool,
    pub coinvariant_isometric: bool,
    pub root_present: bool,
    pub pex_wall_free: bool,
    pub spinor_plus: bool,
    pub cond_det: bool,
    pub index_identity: bool,
}

impl WitnessCheck {
    /// All checks required of a witness of order `m` (a root is required for `m > 1`).
    pub fn passed(&self) -> bool {
        self.preserves_form
            && self.order_ok
            && self.disc_trivial
            && self.coinvariant_negative_definite
            && self.coinvariant_isometric
            && self.pex_wall_free
            && self.spinor_plus
            && self.cond_det
            && self.index_identity
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let named = [
            (self.preserves_form, "form"),
            (self.order_ok, "order"),
            (self.disc_trivial, "disc-action"),
            (self.coinvariant_negative_definite, "negative-definite"),
            (self.coinvariant_isometric, "coinvariant-class"),
            (self.pex_wall_free, "pex-wall"),
            (self.spinor_plus, "spinor-norm"),
            (self.cond_det, "cond-det"),
            (self.index_identity, "index-identity"),
        ];
        for (ok, name) in named {
            if !ok {
                out.push(name);
            }
        }
        out
    }
}

/// Re-validate a raw 8x8 matrix against the host form, the claimed order and
/// the claimed coinvariant.
pub fn validate_witness(m: u64, expected: &Lattice, matrix: &IMat) -> WitnessCheck {
    let l = host();
    let mut c = WitnessCheck::default();
    let g = match Isometry::new(l.clone(), matrix.clone()) {
        Ok(g) => g,
        Err(_) => return c,
    };
    c.preserves_form = true;
    c.order_ok = isometry::order_of(matrix, isometry::ORDER_CAP).ok() == Some(m);
    c.disc_trivial = g.is_disc_trivial(&DiscScope::Trivial);
    let (coinv, basis) = match g.coinvariant() {
        Ok(x) => x,
        Err(_) => return c,
    };
    c.spinor_plus = g.spinor_norm() == 1;
    c.coinvariant_negative_definite = coinv.rank() == 0 || coinv.is_negative_definite();
    if !c.coinvariant_negative_definite {
        return c;
    }
    c.coinvariant_isometric = coinv.rank() == expected.rank()
        && (coinv.rank() == 0 || isometry::are_isometric(&coinv, expected).unwrap_or(false));
    let walls = embed::wall_candidates(&coinv).unwrap_or_default();
    c.root_present = walls.iter().any(|v| coinv.norm(v) == -2);
    c.pex_wall_free = walls.iter().all(|v| {
        let w = push_rows(&basis, v);
        l.divisibility(&w).map(|d| d != 2).unwrap_or(false)
    });
    let inv = match g.invariant() {
        Ok(x) => x,
        Err(_) => return c,
    };
    let det_c = if coinv.rank() == 0 { 1 } else { coinv.abs_det() };
    let det_i = if inv.rank() == 0 { 1 } else { inv.abs_det() };
    c.cond_det = det_i as i128 == l.abs_det() as i128 * det_c as i128;
    c.index_identity = PrimitiveEmbedding::new(&l, basis).and_then(|e| e.check()).is_ok();
    c
}

fn push_rows(rows: &IMat, v: &[i64]) -> Vec<i64> {
    let n = rows.first().map_or(0, |r| r.len());
    (0..n)
        .map(|j| linalg::narrow(v.iter().zip(rows).map(|(&c, r)| c as i128 * r[j] as i128).sum()))
        .collect()
}

// ---- assembly -------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct TheoremReport {
    pub reports: Vec<Arc<OrderReport>>,
    pub rows: Vec<ClassificationRow>,
    pub certificates: Vec<ExclusionCertificate>,
    pub realized: Vec<i64>,
}

/// Classify every order in the divisor closure and collect the table.
pub fn assemble_theorem() -> Result<TheoremReport> {
    let mut reports = Vec::new();
    for m in CLOSURE_ORDERS.iter().chain(DERIVED_ORDERS.iter()) {
        reports.push(classify_order(*m)?);
    }
    let mut rows: Vec<ClassificationRow> = reports.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    rows.sort_by(|a, b| {
        (a.coinvariant.rank(), a.order, genus::canonical_key(&a.coinvariant))
            .cmp(&(b.coinvariant.rank(), b.order, genus::canonical_key(&b.coinvariant)))
    });
    let realized: Vec<i64> = reports.iter().filter(|r| !r.rows.is_empty()).map(|r| r.order).collect();
    let certificates = reports.iter().filter_map(|r| r.certificate()).collect();
    Ok(TheoremReport { reports, rows, certificates, realized })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RowEvidence {
    pub order: i64,
    pub coinvariant_gram: IMat,
    pub holds: bool,
    pub detail: String,
}

/// No nontrivial row is realized by an automorphism: every coinvariant of
/// order `m > 1` contains a root, so it meets the full wall set.
pub fn verify_theorem1(rows: &[ClassificationRow]) -> Result<(bool, Vec<RowEvidence>)> {
    let mut ev = Vec::new();
    for r in rows {
        let roots = if r.coinvariant.rank() == 0 { 0 } else { r.coinvariant.short_vectors(&[-2])?.len() };
        let holds = r.order == 1 || roots > 0;
        let detail = if r.order == 1 {
            "identity".to_string()
        } else {
            format!("{roots} roots in the coinvariant")
        };
        ev.push(RowEvidence { order: r.order, coinvariant_gram: r.coinvariant.gram().clone(), holds, detail });
    }
    Ok((ev.iter().all(|e| e.holds), ev))
}

/// Every witness acts trivially on the host discriminant, and the order-2
/// branch with nontrivial discriminant action yields no wall-free coinvariant.
pub fn verify_theorem2(rows: &[ClassificationRow]) -> Result<(bool, Vec<RowEvidence>, InvolutionBranch)> {
    let mut ev = Vec::new();
    for r in rows {
        let holds = r.witness.is_disc_trivial(&DiscScope::Trivial);
        ev.push(RowEvidence {
            order: r.order,
            coinvariant_gram: r.coinvariant.gram().clone(),
            holds,
            detail: "trivial discriminant action".into(),
        });
    }
    let branch = order_two_nontrivial_branch()?;
    let ok = ev.iter().all(|e| e.holds) && branch.contradiction_holds();
    Ok((ok, ev, branch))
}

/// The realized order set and the determinant equality for every row.
pub fn verify_theorem3(t: &TheoremReport) -> (bool, Vec<RowEvidence>) {
    let mut ev = Vec::new();
    for r in &t.rows {
        ev.push(RowEvidence {
            order: r.order,
            coinvariant_gram: r.coinvariant.gram().clone(),
            holds: r.flags.cond_det && r.flags.pex_wall_free && r.flags.negative_definite && r.flags.disc_trivial,
            detail: format!("invariant genus signature {:?}, |det| {}", r.invariant_genus.signature, r.invariant_genus.abs_det()),
        });
    }
    let ok = t.realized == REALIZED_ORDERS && ev.iter().all(|e| e.holds);
    (ok, ev)
}

// ---- order 2 with nontrivial discriminant action ---------------------------------------

#[derive(Clone, Debug)]
pub struct InvolutionBranch {
    /// Models of the possible coinvariants of the extended involution of `5U`.
    pub extended: Vec<Lattice>,
    /// Complements of `[4]` in those.
    pub complements: Vec<Lattice>,
    /// Whether each complement satisfies the divisibility hypothesis.
    pub hypothesis: Vec<bool>,
    /// Complements with a wall-free embedding that is not full gluing and
    /// whose gluing subgroup is 2-elementary, so `-1` on the lattice and the
    /// identity on its complement glue to an involution of the host.
    pub wall_free_nontrivial: Vec<Lattice>,
}

impl InvolutionBranch {
    /// No involution with nontrivial discriminant action is wall free.
    pub fn contradiction_holds(&self) -> bool {
        self.wall_free_nontrivial.is_empty()
    }

    /// Whether the divisibility lemma alone settles the branch.
    pub fn hypothesis_everywhere(&self) -> bool {
        self.hypothesis.iter().all(|&h| h)
    }
}

fn two_elementary_models(max_rank: usize) -> Vec<Lattice> {
    let hyper = [lattice::rank1(2).unwrap(), lattice::u(), lattice::u().rescale(2).unwrap()];
    let m2 = lattice::rank1(-2).unwrap();
    let d4 = lattice::d(4).unwrap();
    let mut defs: Vec<Lattice> = Vec::new();
    for k in 0..=5 {
        defs.push(Lattice::sum_unchecked(&vec![m2.clone(); k]));
    }
    for k in 0..=1 {
        let mut parts = vec![d4.clone()];
        parts.extend(vec![m2.clone(); k]);
        defs.push(Lattice::sum_unchecked(&parts));
    }
    let mut out = Vec::new();
    for h in &hyper {
        for d in &defs {
            let l = Lattice::sum_unchecked(&[h.clone(), d.clone()]);
            if l.rank() <= max_rank {
                out.push(l);
            }
        }
    }
    out
}

/// Possible coinvariants of an involution of `5U` with signature `(1, t)`,
/// one model per realizable `(t, a, δ)`.
pub fn extended_involution_coinvariants() -> Result<Vec<Lattice>> {
    let models = two_elementary_models(6);
    let mut out: Vec<((usize, usize, u8), Lattice)> = Vec::new();
    for t in 0..=MAX_COINVARIANT_RANK {
        for a in 0..=t + 1 {
            for delta in 0..=1u8 {
                if !genus::involution_coinvariant_exists(5, 5, 1, t, a, delta)? {
                    continue;
                }
                let model = models.iter().find(|l| {
                    l.signature() == (1, t) && genus::two_elementary_invariants(l) == Some((a, delta))
                });
                match model {
                    Some(l) => out.push(((t, a, delta), l.clone())),
                    None => {
                        return Err(LatticeError::Inconsistent(format!(
                            "no model for 2-elementary signature (1,{t}), a={a}, delta={delta}"
                        )))
                    }
                }
            }
        }
    }
    out.sort_by_key(|(k, _)| *k);
    Ok(out.into_iter().map(|(_, l)| l).collect())
}

/// The nontrivial-discriminant order-2 branch: extend to `5U` by the swap on
/// `2[2]`, list the coinvariants of the extension, take complements of `[4]`.
pub fn order_two_nontrivial_branch() -> Result<InvolutionBranch> {
    let extended = extended_involution_coinvariants()?;
    let four = lattice::rank1(4)?;
    let mut complements: Vec<Lattice> = Vec::new();
    for lf in &extended {
        for c in embed::embedding_classes(&four, lf)? {
            if c.complement.rank() == 0 {
                continue;
            }
            for n in genus::lattices_in_genus(&c.complement)? {
                let mut known = false;
                for k in &complements {
                    if isometry::are_isometric(k, &n)? {
                        known = true;
                        break;
                    }
                }
                if !known {
                    complements.push(n);
                }
            }
        }
    }
    complements.sort_by_key(genus::canonical_key);
    let mut hypothesis = Vec::new();
    let mut wall_free_nontrivial = Vec::new();
    for n in &complements {
        hypothesis.push(embed::satisfies_divisibility_hypothesis(n)?);
        let q = n.disc_form();
        let extends = |c: &EmbeddingClass| c.gluing_subgroup().iter().all(|x| q.element_order(x) <= 2);
        if pex_free_classes(n)?.iter().any(|c| !c.is_full_gluing() && extends(c)) {
            wall_free_nontrivial.push(n.clone());
        }
    }
    Ok(InvolutionBranch { extended, complements, hypothesis, wall_free_nontrivial })
}

// ---- audits -----------------------------------------------------------------------

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct WallAudit {
    pub lattices: usize,
    pub embeddings: usize,
    pub hypothesis_holds: usize,
    /// Embeddings of lattices satisfying the hypothesis where the equivalence fails.
    pub equivalence_failures: Vec<IMat>,
    /// Embeddings without the hypothesis where full gluing meets a wall (never expected).
    pub full_gluing_failures: Vec<IMat>,
    pub divisibility_checks: usize,
    pub divisibility_mismatches: Vec<IMat>,
    pub unrealized: Vec<IMat>,
}

impl WallAudit {
    pub fn passed(&self) -> bool {
        self.equivalence_failures.is_empty()
            && self.full_gluing_failures.is_empty()
            && self.divisibility_mismatches.is_empty()
            && self.unrealized.is_empty()
    }
}

/// For each lattice and each embedding class into the host: wall-freeness
/// against full gluing, and host divisibility through the gluing data against
/// the gcd of pairings in an explicit realization.
pub fn wall_audit(lattices: &[Lattice]) -> Result<WallAudit> {
    let per: Vec<Result<WallAudit>> = par::map(lattices, |n| {
        let mut a = WallAudit { lattices: 1, ..Default::default() };
        let hyp = embed::satisfies_divisibility_hypothesis(n)?;
        let walls = embed::wall_candidates(n)?;
        let classes = embed::embedding_classes(n, &host())?;
        let realized = embed::realize_classes(n, &host(), &classes, 2)?;
        for (c, e) in classes.iter().zip(realized) {
            a.embeddings += 1;
            let free = !embed::wall_intersection_pex(c)?;
            if hyp {
                a.hypothesis_holds += 1;
                if free != c.is_full_gluing() {
                    a.equivalence_failures.push(n.gram().clone());
                }
            } else if c.is_full_gluing() && !free {
                a.full_gluing_failures.push(n.gram().clone());
            }
            let e = match e {
                Some(e) => e,
                None => match realize(n, c) {
                    Ok(e) => e,
                    Err(_) => {
                        a.unrealized.push(n.gram().clone());
                        continue;
                    }
                },
            };
            for v in &walls {
                a.divisibility_checks += 1;
                if c.host_divisibility(v)? != e.direct_divisibility(v)? {
                    a.divisibility_mismatches.push(n.gram().clone());
                }
            }
        }
        Ok(a)
    });
    let mut total = WallAudit::default();
    for a in per {
        let a = a?;
        total.lattices += a.lattices;
        total.embeddings += a.embeddings;
        total.hypothesis_holds += a.hypothesis_holds;
        total.divisibility_checks += a.divisibility_checks;
        total.equivalence_failures.extend(a.equivalence_failures);
        total.full_gluing_failures.extend(a.full_gluing_failures);
        total.divisibility_mismatches.extend(a.divisibility_mismatches);
        total.unrealized.extend(a.unrealized);
    }
    Ok(total)
}

/// Every distinct lattice appearing in any stage of the given reports.
pub fn pipeline_lattices(reports: &[Arc<OrderReport>]) -> Vec<Lattice> {
    let mut seen: BTreeMap<(usize, i64, IMat), Lattice> = BTreeMap::new();
    for r in reports {
        for t in &r.trace {
            for l in &t.survivors {
                if l.rank() > 0 {
                    seen.entry(genus::canonical_key(l)).or_insert_with(|| l.clone());
                }
            }
        }
    }
    seen.into_values().collect()
}

// ---- records ------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowRecord {
    pub order: i64,
    pub coinvariant_gram: IMat,
    pub invariant_signature: (usize, usize),
    pub invariant_disc: FqfRecord,
    pub witness_matrix: IMat,
    pub flags: Flags,
}

impl ClassificationRow {
    pub fn to_record(&self) -> RowRecord {
        RowRecord {
            order: self.order,
            coinvariant_gram: self.coinvariant.gram().clone(),
            invariant_signature: self.invariant_genus.signature,
            invariant_disc: self.invariant_genus.disc_form.to_record(),
            witness_matrix: self.witness.matrix().clone(),
            flags: self.flags,
        }
    }

    pub fn invariant_record(&self) -> GenusRecord {
        self.invariant_genus.to_record()
    }

    pub fn embedding_record(&self) -> EmbeddingRecord {
        self.embedding.to_record()
    }
}

//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! A criterion can fail in a way that has been analysed and pinned down
//! exactly (`known`): the line still reads FAIL, the deviation is printed, and
//! the process only exits nonzero when a failure differs from the pinned one.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_integer::Integer;
use og6_lattice::embed::{self, PrimitiveEmbedding};
use og6_lattice::fqf::R64;
use og6_lattice::genus::{self, is_m_elementary, same_genus};
use og6_lattice::isometry::{are_isometric, Isometry};
use og6_lattice::lattice::{self, Lattice};
use og6_lattice::linalg::{self, IMat};
use og6_lattice::og6::{self, OrderReport, Stage};
use og6_lattice::parse::{describe, parse_lattice};

struct Outcome {
    pass: bool,
    detail: String,
    /// Set when the failure matches an analysed deviation exactly.
    known: Option<String>,
}

impl Outcome {
    fn ok(detail: impl Into<String>) -> Outcome {
        Outcome { pass: true, detail: detail.into(), known: None }
    }
    fn fail(detail: impl Into<String>) -> Outcome {
        Outcome { pass: false, detail: detail.into(), known: None }
    }
}

fn name(l: &Lattice) -> String {
    describe(l).unwrap_or_else(|| format!("{:?}", l.gram()))
}

fn lattices(exprs: &[&str]) -> Vec<Lattice> {
    exprs.iter().map(|e| parse_lattice(e).unwrap_or_else(|err| panic!("{e}: {err}"))).collect()
}

/// Elements of `a` with no isometric partner in `b`.
fn minus(a: &[Lattice], b: &[Lattice], iso: fn(&Lattice, &Lattice) -> bool) -> Vec<Lattice> {
    a.iter().filter(|x| !b.iter().any(|y| iso(x, y))).cloned().collect()
}

fn isometric(a: &Lattice, b: &Lattice) -> bool {
    if a.rank() == 0 || b.rank() == 0 {
        return a.rank() == b.rank();
    }
    a.signature() == b.signature() && a.abs_det() == b.abs_det() && are_isometric(a, b).unwrap_or(false)
}

fn genus_equal(a: &Lattice, b: &Lattice) -> bool {
    same_genus(a, b).unwrap_or(false)
}

struct Diff {
    missing: Vec<Lattice>,
    extra: Vec<Lattice>,
}

impl Diff {
    fn of(computed: &[Lattice], expected: &[Lattice], iso: fn(&Lattice, &Lattice) -> bool) -> Diff {
        Diff { missing: minus(expected, computed, iso), extra: minus(computed, expected, iso) }
    }
    fn empty(&self) -> bool {
        self.missing.is_empty() && self.extra.is_empty()
    }
    fn show(&self) -> String {
        let f = |v: &[Lattice]| v.iter().map(name).collect::<Vec<_>>().join(", ");
        format!("missing [{}] extra [{}]", f(&self.missing), f(&self.extra))
    }
    /// Nothing missing and the extras are exactly `extra`.
    fn only_extra(&self, extra: &[Lattice]) -> bool {
        self.missing.is_empty() && self.extra.len() == extra.len() && minus(&self.extra, extra, isometric).is_empty()
    }
}

fn expected_rows() -> BTreeMap<i64, Vec<&'static str>> {
    BTreeMap::from([
        (1, vec![]),
        (2, vec!["[-2]", "2[-2]", "3[-2]", "D4"]),
        (3, vec!["A2", "2A2"]),
        (4, vec!["A3", "D4", "A3+[-2]", "D5"]),
        (5, vec!["A4"]),
        (6, vec!["A2+[-2]", "D4", "A2+2[-2]", "2A2+[-2]"]),
        (8, vec!["D5"]),
        (10, vec!["A4+[-2]"]),
        (12, vec!["D5"]),
    ])
}

fn criterion1(reports: &[std::sync::Arc<OrderReport>], elapsed: Duration) -> Outcome {
    let realized: Vec<i64> = reports.iter().filter(|r| !r.rows.is_empty()).map(|r| r.order).collect();
    let mut bad = Vec::new();
    let mut deviations = Vec::new();
    // Rows found in addition to the published lists, each checked against an
    // explicit witness (see criterion 8).
    let analysed: BTreeMap<i64, Vec<Lattice>> = BTreeMap::from([(6, lattices(&["A5"])), (12, lattices(&["A3+A2"]))]);
    for (m, exprs) in expected_rows() {
        let r = reports.iter().find(|r| r.order == m).expect("report");
        let got: Vec<Lattice> = r.rows.iter().map(|x| x.coinvariant.clone()).collect();
        // The identity has trivial coinvariant.
        let want = if m == 1 { vec![Lattice::zero()] } else { lattices(&exprs) };
        let d = Diff::of(&got, &want, isometric);
        if d.empty() {
            continue;
        }
        match analysed.get(&m) {
            Some(extra) if d.only_extra(extra) => deviations.push(format!("m={m} {}", d.show())),
            _ => bad.push(format!("m={m} {}", d.show())),
        }
    }
    if realized != og6::REALIZED_ORDERS {
        bad.push(format!("realized orders {realized:?}"));
    }
    if elapsed > Duration::from_secs(15 * 60) {
        bad.push(format!("took {elapsed:?}"));
    }
    let detail = format!("orders {realized:?} in {:.1?}", elapsed);
    if bad.is_empty() && deviations.is_empty() {
        Outcome::ok(detail)
    } else if bad.is_empty() {
        Outcome {
            pass: false,
            detail: format!("{detail}; {}", deviations.join("; ")),
            known: Some("additional wall-free rows A5 (order 6) and A3+A2 (order 12) with validated witnesses".into()),
        }
    } else {
        Outcome::fail(format!("{detail}; {}; {}", bad.join("; "), deviations.join("; ")))
    }
}

fn criterion2(reports: &[std::sync::Arc<OrderReport>]) -> Outcome {
    let expected = [
        (7, Stage::Elementary),
        (9, Stage::Isometry),
        (15, Stage::Isometry),
        (16, Stage::Isometry),
        (20, Stage::Isometry),
        (24, Stage::Isometry),
        (25, Stage::Isometry),
        (30, Stage::Divisor),
        (40, Stage::Divisor),
        (60, Stage::Divisor),
        (120, Stage::Divisor),
    ];
    let mut bad = Vec::new();
    let mut parts = Vec::new();
    for (m, stage) in expected {
        let r = reports.iter().find(|r| r.order == m).expect("report");
        match r.certificate() {
            Some(c) if c.failing_stage == stage => parts.push(format!("{m}:{}", stage.label())),
            Some(c) => bad.push(format!("{m} fails at {} not {}", c.failing_stage.label(), stage.label())),
            None => bad.push(format!("{m} has no certificate")),
        }
    }
    if bad.is_empty() {
        Outcome::ok(parts.join(" "))
    } else {
        Outcome::fail(bad.join("; "))
    }
}

fn criterion3() -> Outcome {
    // Every endomorphism of (Z/2)^2 given by a 2x2 matrix over F_2; keep the
    // bijections preserving q.
    let q = lattice::bl().disc_form();
    if q.orders() != [2, 2] {
        return Outcome::fail(format!("discriminant group {:?}", q.orders()));
    }
    let els = q.elements();
    let mut count = 0;
    for bits in 0..16u32 {
        let m = [[bits & 1, (bits >> 1) & 1], [(bits >> 2) & 1, (bits >> 3) & 1]];
        let apply = |x: &[i64]| -> Vec<i64> {
            (0..2).map(|i| (0..2).map(|j| m[i][j] as i64 * x[j]).sum::<i64>().rem_euclid(2)).collect()
        };
        let images: Vec<Vec<i64>> = els.iter().map(|x| apply(x)).collect();
        let mut sorted = images.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() == els.len() && els.iter().zip(&images).all(|(x, y)| q.eval_q(x) == q.eval_q(y)) {
            count += 1;
        }
    }
    let lib = q.orthogonal_group().map(|g| g.len()).unwrap_or(0);
    let detail = format!("brute force {count}, library {lib}");
    if count == 2 && lib == 2 {
        Outcome::ok(detail)
    } else {
        Outcome::fail(detail)
    }
}

fn criterion4() -> Outcome {
    let mut bad = Vec::new();
    let two = genus::enumerate_m_elementary(2, 5).unwrap_or_default();
    let d = Diff::of(&two, &lattices(&["[-2]", "2[-2]", "3[-2]", "D4", "4[-2]", "D4+[-2]", "5[-2]"]), isometric);
    if !d.empty() {
        bad.push(format!("2-elementary: {}", d.show()));
    }
    let branch = match og6::order_two_nontrivial_branch() {
        Ok(b) => b,
        Err(e) => return Outcome::fail(e.to_string()),
    };
    let lf = lattices(&[
        "[2]", "U", "U(2)", "[2]+[-2]", "U+[-2]", "U(2)+[-2]", "U+2[-2]", "U(2)+2[-2]", "U+3[-2]", "U(2)+3[-2]", "U+D4", "U+4[-2]",
    ]);
    let d = Diff::of(&branch.extended, &lf, genus_equal);
    if !d.empty() || branch.extended.len() != 12 {
        bad.push(format!("extended coinvariants: {}", d.show()));
    }
    let comp = lattices(&[
        "[-4]", "[-2]+[-4]", "A3", "2[-2]+[-4]", "A3+[-2]", "3[-2]+[-4]", "D5", "D4+[-4]", "A3+2[-2]", "4[-2]+[-4]",
    ]);
    let d = Diff::of(&branch.complements, &comp, isometric);
    if !d.empty() || branch.complements.len() != 10 {
        bad.push(format!("complements of [4]: {}", d.show()));
    }
    let detail = format!("{} / {} / {}", two.len(), branch.extended.len(), branch.complements.len());
    if bad.is_empty() {
        Outcome::ok(detail)
    } else {
        Outcome::fail(format!("{detail}; {}", bad.join("; ")))
    }
}

/// Hand-built primitive embeddings of two order-4 candidates missing from the
/// published first list: `e_i - 2 f_i` and `g1 + g2` span `4[-4]`;
/// `e1 - 2 f1, e2 - f2, e3 - f3, g1, g2` span `4[-2] + [-4]`.
fn hand_embeddings() -> Vec<(Lattice, IMat)> {
    let v = |c: [i64; 8]| c.to_vec();
    vec![
        (
            parse_lattice("4[-4]").unwrap(),
            vec![v([1, -2, 0, 0, 0, 0, 0, 0]), v([0, 0, 1, -2, 0, 0, 0, 0]), v([0, 0, 0, 0, 1, -2, 0, 0]), v([0, 0, 0, 0, 0, 0, 1, 1])],
        ),
        (
            parse_lattice("4[-2]+[-4]").unwrap(),
            vec![
                v([0, 0, 1, -1, 0, 0, 0, 0]),
                v([0, 0, 0, 0, 1, -1, 0, 0]),
                v([0, 0, 0, 0, 0, 0, 1, 0]),
                v([0, 0, 0, 0, 0, 0, 0, 1]),
                v([1, -2, 0, 0, 0, 0, 0, 0]),
            ],
        ),
    ]
}

fn criterion5(r4: &OrderReport) -> Outcome {
    let first_published = lattices(&[
        "[-2]", "[-4]", "2[-2]", "[-2]+[-4]", "2[-4]", "A3", "3[-2]", "2[-2]+[-4]", "[-2]+2[-4]", "3[-4]", "D4",
        "A3+[-2]", "A3+[-4]", "4[-2]", "3[-2]+[-4]", "2[-2]+2[-4]", "[-2]+3[-4]", "D5", "D4+[-2]", "D4+[-4]",
        "A3+2[-2]", "A3+[-2]+[-4]", "5[-2]", "3[-2]+2[-4]", "2[-2]+3[-4]",
    ]);
    let second_published = lattices(&[
        "[-2]", "[-4]", "2[-2]", "[-2]+[-4]", "2[-4]", "A3", "3[-2]", "2[-2]+[-4]", "[-2]+2[-4]", "3[-4]", "D4",
        "A3+[-2]", "D5",
    ]);
    let final_published = lattices(&["A3", "D4", "A3+[-2]", "D5"]);

    let first: Vec<Lattice> = r4.survivors(Stage::Embeds).unwrap_or(&[]).to_vec();
    let host = lattice::bl();
    let second: Vec<Lattice> =
        first.iter().filter(|n| embed::exists_full_gluing_embedding(n, &host).unwrap_or(false)).cloned().collect();
    let last: Vec<Lattice> = r4.rows.iter().map(|r| r.coinvariant.clone()).collect();

    let d1 = Diff::of(&first, &first_published, isometric);
    let d2 = Diff::of(&second, &second_published, isometric);
    let d3 = Diff::of(&last, &final_published, isometric);
    let counts = format!("{} -> {} -> {}", first.len(), second.len(), last.len());
    if d1.empty() && d2.empty() && d3.empty() {
        return Outcome::ok(counts);
    }

    // The hand embeddings must be genuine primitive embeddings of the claimed lattices.
    let hand_ok = hand_embeddings().iter().all(|(n, rows)| {
        PrimitiveEmbedding::new(&host, rows.clone())
            .map(|e| e.check().is_ok() && isometric(&e.source, n))
            .unwrap_or(false)
            && lattice::is_primitive_rows(rows)
    });
    let first_extra = lattices(&["4[-4]", "4[-2]+[-4]", "A3+2[-4]", "D4(2)"]);
    let first_known = d1.missing.is_empty()
        && d1.extra.len() == 5
        && minus(&first_extra, &d1.extra, isometric).is_empty()
        && d1.extra.iter().filter(|x| describe(x).is_none()).count() == 1;
    let second_known = d2.only_extra(&lattices(&["A3+[-4]"]));
    let detail = format!("{counts}; first list {}; second list {}; final {}", d1.show(), d2.show(), d3.show());
    if first_known && second_known && d3.empty() && hand_ok {
        Outcome {
            pass: false,
            detail,
            known: Some("published lists omit lattices with explicit primitive (and full-gluing) embeddings; final list agrees".into()),
        }
    } else {
        Outcome::fail(format!("{detail}; hand embeddings valid: {hand_ok}"))
    }
}

fn criterion6(reports: &[std::sync::Arc<OrderReport>]) -> Outcome {
    let ls = og6::pipeline_lattices(reports);
    match og6::wall_audit(&ls) {
        Ok(a) => {
            let detail = format!(
                "{} lattices, {} embedding classes, {} under the hypothesis, {} divisibility checks, {} equivalence failures, {} mismatches, {} unrealized",
                a.lattices,
                a.embeddings,
                a.hypothesis_holds,
                a.divisibility_checks,
                a.equivalence_failures.len(),
                a.divisibility_mismatches.len(),
                a.unrealized.len()
            );
            if a.passed() {
                Outcome::ok(detail)
            } else {
                Outcome::fail(detail)
            }
        }
        Err(e) => Outcome::fail(e.to_string()),
    }
}

fn fqf_axioms_hold(l: &Lattice) -> bool {
    if l.rank() == 0 {
        return true;
    }
    let f = l.disc_form();
    let two = R64::from_integer(2);
    let one = R64::from_integer(1);
    let md = |x: R64, m: R64| x - (x / m).floor() * m;
    let els = f.elements();
    if f.order() != l.abs_det() {
        return false;
    }
    for x in &els {
        for y in &els {
            if md(f.eval_q(&f.add(x, y)) - f.eval_q(x) - f.eval_q(y), two) != md(f.eval_b(x, y) * 2, two)
                || f.eval_b(x, y) != f.eval_b(y, x)
            {
                return false;
            }
        }
        if f.eval_b(x, x) != md(f.eval_q(x), one) {
            return false;
        }
        if *x != f.zero() && els.iter().all(|y| f.b_num(x, y) == 0) {
            return false;
        }
    }
    true
}

fn criterion7(rows: &[og6::ClassificationRow]) -> Outcome {
    let t = Instant::now();
    let host = lattice::bl();
    let mut checks = 0usize;
    let mut bad = Vec::new();
    for r in rows {
        if let Err(e) = r.embedding.check() {
            bad.push(format!("embedding of order {} row: {e}", r.order));
        }
        checks += 1;
        if !fqf_axioms_hold(&r.coinvariant) {
            bad.push(format!("fqf axioms on {}", name(&r.coinvariant)));
        }
        let m = r.order as u64;
        for j in 1..=m {
            let g = match Isometry::new(host.clone(), linalg::pow(r.witness.matrix(), j)) {
                Ok(g) => g,
                Err(e) => {
                    bad.push(e.to_string());
                    continue;
                }
            };
            let order = (m / m.gcd(&j)) as i64;
            let (co, co_basis) = match g.coinvariant() {
                Ok(x) => x,
                Err(e) => {
                    bad.push(e.to_string());
                    continue;
                }
            };
            let inv_basis = g.invariant_basis();
            let inv = if inv_basis.is_empty() { Lattice::zero() } else { host.sublattice(&inv_basis).unwrap() };
            let mut both = inv_basis.clone();
            both.extend(co_basis.iter().cloned());
            let index = linalg::det(&both).abs();
            let d_inv = if inv.rank() == 0 { 1 } else { inv.abs_det() as i128 };
            let d_co = if co.rank() == 0 { 1 } else { co.abs_det() as i128 };
            if index * index * host.abs_det() as i128 != d_inv * d_co {
                bad.push(format!("index identity for order {order}"));
            }
            if order > 1 && genus::primes_of(order) == vec![order] && co.rank() % (order as usize - 1) != 0 {
                bad.push(format!("(p-1) | rank fails for p = {order}"));
            }
            if co.rank() > 0 && g.disc_action().is_identity(&host.disc_form()) && !is_m_elementary(&co, order) {
                bad.push(format!("coinvariant of a power of order {order} is not {order}-elementary"));
            }
            if g.spinor_norm() != 1 {
                bad.push(format!("spinor norm of a power of order {order}"));
            }
            if !fqf_axioms_hold(&co) || !fqf_axioms_hold(&inv) {
                bad.push("fqf axioms".into());
            }
            checks += 5;
        }
    }
    let elapsed = t.elapsed();
    if elapsed > Duration::from_secs(120) {
        bad.push(format!("took {elapsed:?}"));
    }
    let detail = format!("{checks} checks over {} rows and their powers in {:.1?} (random suites: tests/properties.rs)", rows.len(), elapsed);
    if bad.is_empty() {
        Outcome::ok(detail)
    } else {
        Outcome::fail(format!("{detail}; {}", bad.join("; ")))
    }
}

fn criterion8(rows: &[og6::ClassificationRow]) -> Outcome {
    let mut bad = Vec::new();
    for r in rows {
        let c = og6::validate_witness(r.order as u64, &r.coinvariant, r.witness.matrix());
        let root_ok = r.order == 1 || c.root_present;
        if !c.passed() || !root_ok {
            bad.push(format!("order {} {}: {:?}", r.order, name(&r.coinvariant), c.failures()));
        }
    }
    if bad.is_empty() {
        Outcome::ok(format!("{} witnesses validated", rows.len()))
    } else {
        Outcome::fail(bad.join("; "))
    }
}

fn criterion9(rows: &[og6::ClassificationRow]) -> Outcome {
    let m2 = lattice::rank1(-2).unwrap();
    let mut controls: Vec<(&str, u64, Lattice, IMat)> = Vec::new();
    let mut refl = linalg::identity(8);
    refl[6][6] = -1;
    controls.push(("reflection in a divisibility-2 root", 2, m2.clone(), refl));
    let mut swap = linalg::identity(8);
    swap[6][6] = 0;
    swap[7][7] = 0;
    swap[6][7] = 1;
    swap[7][6] = 1;
    controls.push(("swap of the [-2] summands", 2, lattice::rank1(-4).unwrap(), swap));
    let mut e = linalg::identity(8);
    e[0][0] = 0;
    e[1][1] = 0;
    e[0][1] = 1;
    e[1][0] = 1;
    controls.push(("involution claimed with order 4", 4, m2.clone(), e));
    let mut broken = linalg::identity(8);
    broken[0][1] = 1;
    controls.push(("not an isometry", 2, m2.clone(), broken));
    if let Some(r) = rows.iter().find(|r| r.order == 2 && r.coinvariant.rank() == 1) {
        controls.push(("wrong coinvariant class", 2, parse_lattice("2[-2]").unwrap(), r.witness.matrix().clone()));
    }
    let mut minus = linalg::identity(8);
    for (i, row) in minus.iter_mut().enumerate() {
        row[i] = -1;
    }
    controls.push(("-id (indefinite coinvariant)", 2, lattice::bl(), minus));
    let accepted: Vec<&str> =
        controls.iter().filter(|(_, m, n, g)| og6::validate_witness(*m, n, g).passed()).map(|c| c.0).collect();
    if accepted.is_empty() {
        Outcome::ok(format!("{} controls rejected", controls.len()))
    } else {
        Outcome::fail(format!("accepted: {}", accepted.join(", ")))
    }
}

fn main() -> ExitCode {
    let t = Instant::now();
    let mut reports = Vec::new();
    for m in og6::CLOSURE_ORDERS.iter().chain(og6::DERIVED_ORDERS.iter()) {
        reports.push(og6::classify_order(*m).expect("classification"));
    }
    let theorem = og6::assemble_theorem().expect("assembly");
    let elapsed = t.elapsed();
    let r4 = reports.iter().find(|r| r.order == 4).unwrap().clone();

    let results: Vec<(u8, &str, Outcome)> = vec![
        (1, "classification", criterion1(&reports, elapsed)),
        (2, "exclusion certificates", criterion2(&reports)),
        (3, "|O(q(bL))| = 2", criterion3()),
        (4, "order-2 lists (7 / 12 / 10)", criterion4()),
        (5, "order-4 lists (25 / 13 / 4)", criterion5(&r4)),
        (6, "divisibility lemma and host divisibility", criterion6(&reports)),
        (7, "property identities", criterion7(&theorem.rows)),
        (8, "witness validation", criterion8(&theorem.rows)),
        (9, "negative controls", criterion9(&theorem.rows)),
    ];
    let mut unexpected = 0;
    for (n, label, o) in &results {
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n} [{status}] {label}: {}", o.detail);
        if let Some(k) = &o.known {
            println!("    known deviation: {k}");
        } else if !o.pass {
            unexpected += 1;
        }
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("acceptance: {passed}/{} passed, {unexpected} unexpected failures", results.len());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! `og6`: command-line front end for the lattice engine and the classification.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use og6_lattice::embed::{self, EmbeddingClass};
use og6_lattice::error::LatticeError;
use og6_lattice::genus;
use og6_lattice::isometry::{self, DiscScope, IsometryConstraints};
use og6_lattice::lattice::Lattice;
use og6_lattice::og6::{self, ClassificationRow, OrderReport, RowEvidence};
use og6_lattice::parse::{describe, parse_gram, parse_lattice};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "og6", version, about = "Lattices, embeddings and isometries of 3U+2[-2]")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "OG6_JOBS")]
    jobs: Option<usize>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rank, determinant, signature and discriminant form of a lattice.
    Info(LatticeArg),
    /// Negative definite even m-elementary lattices.
    Enumerate {
        /// Exponent bound `m` of the discriminant group.
        #[arg(long, short)]
        m: i64,
        /// Largest rank.
        #[arg(long, default_value_t = 5)]
        rank: usize,
        /// Largest |det| (default: m^rank, capped by the enumerator).
        #[arg(long)]
        det_bound: Option<i64>,
    },
    /// Primitive embeddings of one lattice into another.
    Embed {
        /// The embedded lattice.
        source: String,
        /// The host lattice.
        host: String,
        /// Keep only embeddings whose gluing subgroup is all of the source discriminant.
        #[arg(long)]
        full_gluing: bool,
        /// At most this many explicit embeddings into a definite host.
        #[arg(long, default_value_t = 64)]
        limit: usize,
    },
    /// Isometries of a definite lattice with prescribed order, fixed rank and discriminant action.
    Isometries {
        lattice: String,
        #[arg(long)]
        order: u64,
        #[arg(long)]
        fixed_rank: Option<usize>,
        #[arg(long, value_enum, default_value_t = DiscArg::Any)]
        disc: DiscArg,
    },
    /// Run the classification for one order or for all of them.
    Classify {
        #[arg(long, conflicts_with = "all", required_unless_present = "all")]
        order: Option<i64>,
        #[arg(long)]
        all: bool,
    },
    /// Check one of the three main statements against the computed table.
    Verify {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        theorem: u8,
    },
    /// The full classification table.
    Report,
}

#[derive(Args, Debug)]
struct LatticeArg {
    /// Lattice expression such as `3U+2[-2]`, or `@path` for a Gram file.
    lattice: String,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum DiscArg {
    Any,
    Trivial,
    Odd,
}

enum Failure {
    Usage(String),
    Budget(String),
}

impl From<LatticeError> for Failure {
    fn from(e: LatticeError) -> Self {
        if e.is_budget() {
            Failure::Budget(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

/// Rendered output plus whether the result is mathematically empty.
struct Output {
    json: Value,
    table: String,
    empty: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(2);
        }
        configure_jobs(j);
    }
    let result = run(&cli.command).and_then(|out| {
        let text = match cli.format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&out.json).expect("serializable");
                s.push('\n');
                s
            }
            Format::Table => out.table.clone(),
        };
        match &cli.output {
            Some(p) => std::fs::write(p, &text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
            None => print!("{text}"),
        }
        Ok(out.empty)
    });
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Budget(msg)) => {
            eprintln!("budget: {msg}");
            ExitCode::from(3)
        }
    }
}

#[cfg(feature = "parallel")]
fn configure_jobs(j: usize) {
    // Only fails if a pool already exists, which cannot happen this early.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
}

#[cfg(not(feature = "parallel"))]
fn configure_jobs(_: usize) {}

fn run(cmd: &Command) -> Result<Output, Failure> {
    match cmd {
        Command::Info(a) => cmd_info(&load(&a.lattice)?),
        Command::Enumerate { m, rank, det_bound } => cmd_enumerate(*m, *rank, *det_bound),
        Command::Embed { source, host, full_gluing, limit } => cmd_embed(&load(source)?, &load(host)?, *full_gluing, *limit),
        Command::Isometries { lattice, order, fixed_rank, disc } => cmd_isometries(&load(lattice)?, *order, *fixed_rank, *disc),
        Command::Classify { order, all } => {
            if *all {
                cmd_classify_all()
            } else {
                cmd_classify(order.expect("clap enforces --order or --all"))
            }
        }
        Command::Verify { theorem } => cmd_verify(*theorem),
        Command::Report => cmd_report(),
    }
}

fn load(arg: &str) -> Result<Lattice, Failure> {
    match arg.strip_prefix('@') {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{path}: {e}")))?;
            Ok(parse_gram(&text)?)
        }
        None => Ok(parse_lattice(arg)?),
    }
}

fn name(l: &Lattice) -> String {
    if l.rank() == 0 {
        return "0".into();
    }
    describe(l).unwrap_or_else(|| format!("{:?}", l.gram()))
}

fn cmd_info(l: &Lattice) -> Result<Output, Failure> {
    let q = l.disc_form();
    let rec = q.to_record();
    let json = json!({
        "name": describe(l),
        "gram": l.gram(),
        "rank": l.rank(),
        "det": l.det(),
        "signature": l.signature(),
        "even": l.is_even(),
        "disc_orders": q.orders(),
        "disc_q_matrix": rec.q_matrix,
        "disc_parity": q.parity(),
        "length": q.length(),
    });
    let mut t = String::new();
    writeln!(t, "name        {}", name(l)).unwrap();
    writeln!(t, "rank        {}", l.rank()).unwrap();
    writeln!(t, "det         {}", l.det()).unwrap();
    writeln!(t, "signature   {:?}", l.signature()).unwrap();
    writeln!(t, "disc group  {}", group_name(q.orders())).unwrap();
    writeln!(t, "disc q      {:?}", rec.q_matrix).unwrap();
    writeln!(t, "disc parity {}", q.parity()).unwrap();
    writeln!(t, "length      {}", q.length()).unwrap();
    Ok(Output { json, table: t, empty: false })
}

fn group_name(orders: &[i64]) -> String {
    if orders.is_empty() {
        return "trivial".into();
    }
    orders.iter().map(|d| format!("Z/{d}")).collect::<Vec<_>>().join(" x ")
}

fn cmd_enumerate(m: i64, rank: usize, det_bound: Option<i64>) -> Result<Output, Failure> {
    if m < 1 || rank == 0 {
        return Err(Failure::Usage("need m >= 1 and rank >= 1".into()));
    }
    if let Some(b) = det_bound.filter(|&b| b > genus::MAX_ENUM_DET) {
        return Err(Failure::Budget(format!("det bound {b} exceeds the enumerator cap {}", genus::MAX_ENUM_DET)));
    }
    let mut found = Vec::new();
    for r in 1..=rank {
        let bound = match det_bound {
            Some(b) => b,
            None => m.checked_pow(r as u32).ok_or_else(|| Failure::Budget(format!("m^{r} overflows")))?.min(genus::MAX_ENUM_DET),
        };
        found.extend(genus::enumerate_m_elementary_rank(m, r, bound)?);
    }
    let rows: Vec<Value> = found
        .iter()
        .map(|l| {
            let q = l.disc_form();
            json!({ "gram": l.gram(), "det": l.det(), "disc_orders": q.orders(), "parity": q.parity() })
        })
        .collect();
    let mut t = String::new();
    for l in &found {
        let q = l.disc_form();
        writeln!(t, "{:<20} rank {} det {:>5}  {}", name(l), l.rank(), l.det(), group_name(q.orders())).unwrap();
    }
    if found.is_empty() {
        t.push_str("none\n");
    }
    Ok(Output { json: Value::Array(rows), table: t, empty: found.is_empty() })
}

fn class_json(c: &EmbeddingClass) -> Value {
    json!({
        "h": c.h,
        "k": c.k,
        "full_gluing": c.is_full_gluing(),
        "k_generators": c.k_gens,
        "k_images": c.kp_gens,
        "complement_signature": c.complement.signature,
        "complement_disc": c.complement.disc_form.to_record(),
    })
}

fn cmd_embed(m: &Lattice, l: &Lattice, full: bool, limit: usize) -> Result<Output, Failure> {
    let mut t = String::new();
    let (json, count) = if l.is_definite() {
        let want = l.abs_det() as i128 * m.abs_det() as i128;
        let mut out = Vec::new();
        for rows in embed::primitive_embeddings_definite(m, l, None)? {
            let (c, _) = l.orthogonal_complement(&rows)?;
            let cdet = if c.rank() == 0 { 1 } else { c.abs_det() as i128 };
            if full && cdet != want {
                continue;
            }
            writeln!(t, "image {:?}  complement {}", rows, name(&c)).unwrap();
            out.push(json!({ "image": rows, "complement_gram": c.gram() }));
            if out.len() == limit {
                break;
            }
        }
        let n = out.len();
        (json!({ "kind": "explicit", "embeddings": out }), n)
    } else {
        let classes: Vec<EmbeddingClass> =
            embed::embedding_classes(m, l)?.into_iter().filter(|c| !full || c.is_full_gluing()).collect();
        for c in &classes {
            writeln!(
                t,
                "|K| = {:<4} |H| = {:<4} complement {:?} {}{}",
                c.k,
                c.h,
                c.complement.signature,
                group_name(c.complement.disc_form.orders()),
                if c.is_full_gluing() { "  full gluing" } else { "" }
            )
            .unwrap();
        }
        let n = classes.len();
        (json!({ "kind": "classes", "classes": classes.iter().map(class_json).collect::<Vec<_>>() }), n)
    };
    if count == 0 {
        t.push_str("none\n");
    }
    Ok(Output { json, table: t, empty: count == 0 })
}

fn cmd_isometries(n: &Lattice, order: u64, fixed_rank: Option<usize>, disc: DiscArg) -> Result<Output, Failure> {
    if !n.is_definite() {
        return Err(Failure::Usage("isometry search needs a definite lattice".into()));
    }
    let scope = match disc {
        DiscArg::Any => DiscScope::Unconstrained,
        DiscArg::Trivial => DiscScope::Trivial,
        DiscArg::Odd => DiscScope::TrivialOnOddPart,
    };
    let found = isometry::isometries_matching(n, &IsometryConstraints { order, fixed_rank, disc: scope })?;
    let rows: Vec<Value> = found
        .iter()
        .map(|g| json!({ "matrix": g.matrix(), "fixed_rank": g.fixed_rank(), "spinor_norm": g.spinor_norm() }))
        .collect();
    let mut t = String::new();
    for g in &found {
        writeln!(t, "{:?}  fixed rank {}", g.matrix(), g.fixed_rank()).unwrap();
    }
    if found.is_empty() {
        t.push_str("none\n");
    }
    Ok(Output { json: json!({ "order": order, "isometries": rows }), table: t, empty: found.is_empty() })
}

fn row_json(r: &ClassificationRow) -> Value {
    serde_json::to_value(r.to_record()).expect("serializable")
}

fn row_line(r: &ClassificationRow) -> String {
    let g = &r.invariant_genus;
    format!(
        "{:>5}  {:<14} {:>4}  {:<9} {:<26} {}",
        r.order,
        name(&r.coinvariant),
        r.coinvariant.rank(),
        format!("{:?}", g.signature),
        group_name(g.disc_form.orders()),
        flag_text(r)
    )
}

fn flag_text(r: &ClassificationRow) -> String {
    let f = &r.flags;
    let mut s = Vec::new();
    for (on, label) in [
        (f.negative_definite, "negdef"),
        (f.pex_wall_free, "pex-free"),
        (f.full_wall_free, "wall-free"),
        (f.cond_det, "det"),
        (f.disc_trivial, "disc-trivial"),
    ] {
        if on {
            s.push(label);
        }
    }
    s.join(",")
}

const TABLE_HEADER: &str = "order  coinvariant    rank  inv. sig  inv. disc                  flags\n";

fn report_json(r: &OrderReport) -> Value {
    let trace: Vec<Value> = r
        .trace
        .iter()
        .map(|s| json!({ "stage": s.stage.label(), "survivors": s.survivors.len() }))
        .collect();
    json!({
        "order": r.order,
        "rows": r.rows.iter().map(row_json).collect::<Vec<_>>(),
        "trace": trace,
        "certificate": r.certificate(),
    })
}

fn report_table(r: &OrderReport, t: &mut String) {
    let trace: Vec<String> = r.trace.iter().map(|s| format!("{} {}", s.stage.label(), s.survivors.len())).collect();
    writeln!(t, "order {}: {}", r.order, trace.join(" -> ")).unwrap();
    if let Some(c) = r.certificate() {
        writeln!(t, "  excluded at {}: {}", c.failing_stage.label(), c.reason).unwrap();
    }
    for row in &r.rows {
        writeln!(t, "  {}", row_line(row)).unwrap();
    }
}

fn cmd_classify(m: i64) -> Result<Output, Failure> {
    if m < 1 {
        return Err(Failure::Usage("order must be positive".into()));
    }
    let r = og6::classify_order(m)?;
    let mut t = String::new();
    report_table(&r, &mut t);
    Ok(Output { json: report_json(&r), table: t, empty: r.rows.is_empty() })
}

fn cmd_classify_all() -> Result<Output, Failure> {
    let th = og6::assemble_theorem()?;
    let mut t = String::new();
    for r in &th.reports {
        report_table(r, &mut t);
    }
    writeln!(t, "realized orders {:?}", th.realized).unwrap();
    let json = json!({
        "realized_orders": th.realized,
        "orders": th.reports.iter().map(|r| report_json(r)).collect::<Vec<_>>(),
    });
    Ok(Output { json, table: t, empty: false })
}

fn evidence_table(ev: &[RowEvidence], t: &mut String) {
    for e in ev {
        let l = Lattice::new(e.coinvariant_gram.clone()).ok();
        let n = l.as_ref().map(name).unwrap_or_else(|| "0".into());
        writeln!(t, "  {:>3} {:<14} {}  {}", e.order, n, if e.holds { "ok  " } else { "FAIL" }, e.detail).unwrap();
    }
}

fn cmd_verify(theorem: u8) -> Result<Output, Failure> {
    let th = og6::assemble_theorem()?;
    let mut t = String::new();
    let (ok, ev, extra) = match theorem {
        1 => {
            let (ok, ev) = og6::verify_theorem1(&th.rows)?;
            (ok, ev, json!({}))
        }
        2 => {
            let (ok, ev, b) = og6::verify_theorem2(&th.rows)?;
            writeln!(
                t,
                "order-2 branch: {} extended coinvariants, {} complements, {} wall free with nontrivial gluing",
                b.extended.len(),
                b.complements.len(),
                b.wall_free_nontrivial.len()
            )
            .unwrap();
            let extra = json!({
                "extended": b.extended.iter().map(|l| l.gram()).collect::<Vec<_>>(),
                "complements": b.complements.iter().map(|l| l.gram()).collect::<Vec<_>>(),
                "hypothesis": b.hypothesis,
                "wall_free_nontrivial": b.wall_free_nontrivial.iter().map(|l| l.gram()).collect::<Vec<_>>(),
            });
            (ok, ev, extra)
        }
        _ => {
            let (ok, ev) = og6::verify_theorem3(&th);
            writeln!(t, "realized orders {:?}", th.realized).unwrap();
            (ok, ev, json!({ "realized_orders": th.realized }))
        }
    };
    let head = format!("theorem {theorem}: {}\n", if ok { "PASS" } else { "FAIL" });
    t.insert_str(0, &head);
    evidence_table(&ev, &mut t);
    let json = json!({ "theorem": theorem, "pass": ok, "evidence": ev, "details": extra });
    Ok(Output { json, table: t, empty: !ok })
}

fn cmd_report() -> Result<Output, Failure> {
    let th = og6::assemble_theorem()?;
    let mut t = String::from(TABLE_HEADER);
    for r in &th.rows {
        writeln!(t, "{}", row_line(r)).unwrap();
    }
    Ok(Output { json: Value::Array(th.rows.iter().map(row_json).collect()), table: t, empty: false })
}

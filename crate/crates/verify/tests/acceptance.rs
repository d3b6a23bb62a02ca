//! Acceptance criteria, one line each. Runs without the libtest harness so the
//! verdict lines are always printed; exits non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use revmono::lab::gen::{random_dist, rng_for};
use revmono::lab::{
    check_instance, generate, search_hart_reny, CheckRecord, GenSpec, Instance, Regime, SearchConfig, Suite, Verdict,
};
use revmono::oracles::{
    constants, ironed_virtuals, opt_single_param, rev_bic_lp, BundleRule, Environment, LpOptions, SolutionConcept,
};
use revmono::{r, Caps, DiscreteDist, ProductDist, Rat, XosValuation};

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn instances(suite: Suite, count: u64, base: u64, spec: &GenSpec) -> Vec<Instance> {
    (0..count).map(|k| generate(suite, base + k, spec).expect("generator")).collect()
}

/// Every record with `name` (or a `name[...]` variant) must be an exact pass.
fn all_exact_pass(recs: &[CheckRecord], name: &str) -> (usize, Vec<String>) {
    let mut seen = 0;
    let mut bad = Vec::new();
    for rec in recs.iter().filter(|r| r.name == name || r.name.starts_with(&format!("{name}["))) {
        seen += 1;
        if rec.verdict != Verdict::Pass || rec.regime != Regime::Exact {
            bad.push(format!("{} {}: {} {} {}", rec.instance, rec.name, rec.lhs, rec.relation.symbol(), rec.rhs));
        }
    }
    (seen, bad)
}

fn run_suite(suite: Suite, insts: &[Instance], caps: &Caps) -> Vec<CheckRecord> {
    insts
        .iter()
        .enumerate()
        .flat_map(|(k, inst)| check_instance(suite, &format!("{suite}-{k:04}"), inst, caps, false))
        .collect()
}

fn min_ratio(recs: &[CheckRecord], name: &str) -> Option<Rat> {
    recs.iter().filter(|r| r.name == name).filter_map(CheckRecord::ratio).min()
}

fn criterion_1() -> Outcome {
    let insts = instances(Suite::Theorem1, 200, 1_000, &GenSpec::default());
    for inst in &insts {
        let Some(Environment::Explicit { vertices }) = &inst.params.environment else {
            return outcome(false, "generator produced a non-explicit environment");
        };
        let small =
            vertices.len() <= 8 && inst.n * inst.m <= 3 && inst.f.entries().iter().flatten().all(|d| d.len() <= 3);
        if !small {
            return outcome(false, "generated instance outside n <= 3, |A| <= 8, supports <= 3");
        }
    }
    let recs = run_suite(Suite::Theorem1, &insts, &Caps::default());
    let (seen, bad) = all_exact_pass(&recs, "single_param_monotone");
    outcome(seen == 200 && bad.is_empty(), format!("{}/{seen} exact passes; failures {bad:?}", seen - bad.len()))
}

fn unit_demand_instances() -> Vec<Instance> {
    let spec = GenSpec { n: Some(1), ..GenSpec::default() };
    instances(Suite::Theorem2, 100, 2_000, &spec)
}

fn criterion_2(recs: &[CheckRecord]) -> Outcome {
    let (lo, bad_lo) = all_exact_pass(recs, "copies_vs_drev_lower");
    let (hi, bad_hi) = all_exact_pass(recs, "copies_vs_drev_upper");
    let ok = lo == 100 && hi == 100 && bad_lo.is_empty() && bad_hi.is_empty();
    outcome(ok, format!("lower {lo} checked, upper {hi} checked; failures {:?}", [bad_lo, bad_hi].concat()))
}

fn criterion_3(recs: &[CheckRecord]) -> Outcome {
    let (seen, bad) = all_exact_pass(recs, "lottery_vs_copies");
    outcome(seen == 100 && bad.is_empty(), format!("{seen} checked; failures {bad:?}"))
}

fn criterion_4(recs: &[CheckRecord]) -> Outcome {
    let (seen, bad) = all_exact_pass(recs, "unit_demand_monotone");
    let ratio = min_ratio(recs, "unit_demand_monotone").map_or("n/a".into(), |x| x.to_string());
    outcome(seen == 100 && bad.is_empty(), format!("{seen} checked, smallest lhs/rhs {ratio}; failures {bad:?}"))
}

fn criterion_5() -> Outcome {
    let insts = instances(Suite::Lemmas, 100, 3_000, &GenSpec::default());
    let recs = run_suite(Suite::Lemmas, &insts, &Caps::default());
    let mut details = Vec::new();
    let mut ok = true;
    for name in [
        "embedding_identity",
        "item_price_identity",
        "decomposition",
        "dg_monotone",
        "availability_floor",
        "utility_monotone",
    ] {
        let (seen, bad) = all_exact_pass(&recs, name);
        ok &= seen >= 100 && bad.is_empty();
        details.push(format!("{name} {}/{seen}", seen - bad.len()));
        if !bad.is_empty() {
            details.push(format!("{bad:?}"));
        }
    }
    outcome(ok, details.join(", "))
}

fn criterion_6() -> Outcome {
    let k = constants(&r(1, 4), &Rat::one()).expect("b in (0, 1)");
    let c2 = constants(&r(1, 4), &Rat::from_integer(2)).expect("alpha >= 1");
    let ok = k.lambda == Rat::from_integer(1448) && k.c == r(20, 3) && c2.c == r(20, 3);
    outcome(ok, format!("lambda {} C {}", k.lambda, k.c))
}

fn criterion_7() -> Outcome {
    let insts = instances(Suite::Theorem3, 50, 4_000, &GenSpec::default());
    for inst in &insts {
        if inst.n > 2 || inst.m > 2 || inst.f.entries().iter().flatten().any(|d| d.len() > 2) {
            return outcome(false, "generated instance outside n <= 2, m <= 2, supports <= 2");
        }
    }
    let recs = run_suite(Suite::Theorem3, &insts, &Caps::default());
    let witness: Vec<&CheckRecord> = recs.iter().filter(|r| r.name == "subadditive_witness").collect();
    let passed = witness.iter().filter(|r| r.verdict == Verdict::Pass).count();
    let lambda_ok = recs
        .iter()
        .filter(|r| r.name == "subadditive_monotone")
        .all(|r| r.note.as_deref().is_some_and(|n| n.starts_with("lambda 1448;")));
    let ratio = min_ratio(&recs, "subadditive_witness").map_or("n/a".into(), |x| format!("{:.1}", x.to_f64()));
    outcome(
        witness.len() == 50 && passed == 50 && lambda_ok,
        format!("{passed}/{} witness passes, smallest ratio {ratio}", witness.len()),
    )
}

fn criterion_8() -> Outcome {
    let cfg = SearchConfig::default();
    let found = search_hart_reny(&cfg, 0).expect("search");
    let control = search_hart_reny(&SearchConfig { m: 1, ..SearchConfig::default() }, 0).expect("control");
    let v = XosValuation::additive(1, 2);
    let caps = Caps::default();
    let mut certified = 0;
    for cx in &found.found {
        let bland = LpOptions {
            rule: revmono::lp::PivotRule::Bland,
            cutting_planes: false,
            ..LpOptions::new(SolutionConcept::Bic, BundleRule::Any)
        };
        let rf = rev_bic_lp(&v, &cx.f, bland, &caps).expect("lp").value;
        let rg = rev_bic_lp(&v, &cx.g, bland, &caps).expect("lp").value;
        let strict = cx.f != cx.g && cx.f.dominated_by(&cx.g);
        if strict && rf == cx.rev_f && rg == cx.rev_g && rg < rf && cx.gap == &rf - &rg {
            certified += 1;
        }
    }
    let closest = found.closest.map_or("none".into(), |c| c.to_string());
    outcome(
        certified >= 1 && certified == found.found.len() && control.found.is_empty(),
        format!(
            "m=2: {} evaluated, {certified} certified counterexamples, smallest REV(G)-REV(F) {closest}; m=1 control: {} found",
            found.evaluated,
            control.found.len()
        ),
    )
}

fn monopoly_by_enumeration(d: &DiscreteDist) -> Rat {
    d.support().map(|p| p * d.atoms().iter().filter(|(v, _)| v >= p).map(|(_, q)| q).sum::<Rat>()).max().unwrap()
}

/// Expected payment of a monotone single-bidder rule via the discrete envelope
/// formula `p_k = v_k x_k - sum_{l<k} (v_{l+1} - v_l) x_l`.
fn expected_payment(d: &DiscreteDist, x: &[Rat]) -> Rat {
    let atoms = d.atoms();
    let mut total = Rat::zero();
    for k in 0..atoms.len() {
        let mut pay = &atoms[k].0 * &x[k];
        for l in 0..k {
            pay -= (&atoms[l + 1].0 - &atoms[l].0) * &x[l];
        }
        total += pay * &atoms[k].1;
    }
    total
}

fn monotone_rules(k: usize) -> Vec<Vec<Rat>> {
    let levels = [Rat::zero(), r(1, 2), Rat::one()];
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<Rat>| {
                levels
                    .iter()
                    .filter(|l| prefix.last().is_none_or(|p| *l >= p))
                    .map(|l| {
                        let mut next = prefix.clone();
                        next.push(l.clone());
                        next
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    out
}

/// All distributions with at most three atoms on values `1..=4` and probabilities in quarters.
fn small_grid() -> Vec<DiscreteDist> {
    let mut out = Vec::new();
    let values = [1i64, 2, 3, 4];
    for mask in 1u32..16 {
        let vs: Vec<i64> = values.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, v)| *v).collect();
        if vs.len() > 3 {
            continue;
        }
        let mut weights = vec![vec![]];
        for _ in 0..vs.len() {
            weights = weights
                .into_iter()
                .flat_map(|w: Vec<i64>| (1..=4).map(move |x| [w.clone(), vec![x]].concat()))
                .collect();
        }
        for w in weights.into_iter().filter(|w| w.iter().sum::<i64>() == 4) {
            out.push(DiscreteDist::new(vs.iter().zip(&w).map(|(v, q)| (Rat::from_integer(*v), r(*q, 4)))).unwrap());
        }
    }
    out
}

/// Two bidders, one item: best deterministic rule that is monotone in each
/// bidder's own value, charging each winner their threshold value.
fn two_bidder_brute_force(a: &DiscreteDist, b: &DiscreteDist) -> Rat {
    let (ka, kb) = (a.len(), b.len());
    let cells = ka * kb;
    let mut best = Rat::zero();
    for code in 0..3usize.pow(cells as u32) {
        let mut winner = vec![0usize; cells];
        let mut c = code;
        for w in winner.iter_mut() {
            *w = c % 3;
            c /= 3;
        }
        let at = |i: usize, j: usize| winner[i * kb + j];
        let monotone = (0..kb).all(|j| (1..ka).all(|i| at(i - 1, j) != 1 || at(i, j) == 1))
            && (0..ka).all(|i| (1..kb).all(|j| at(i, j - 1) != 2 || at(i, j) == 2));
        if !monotone {
            continue;
        }
        let mut rev = Rat::zero();
        for i in 0..ka {
            for j in 0..kb {
                let p = &a.atoms()[i].1 * &b.atoms()[j].1;
                let pay = match at(i, j) {
                    1 => (0..ka).find(|&x| at(x, j) == 1).map(|x| a.atoms()[x].0.clone()),
                    2 => (0..kb).find(|&y| at(i, y) == 2).map(|y| b.atoms()[y].0.clone()),
                    _ => None,
                };
                if let Some(pay) = pay {
                    rev += pay * p;
                }
            }
        }
        if rev > best {
            best = rev;
        }
    }
    best
}

fn criterion_9() -> Outcome {
    let caps = Caps::default();
    let v = XosValuation::additive(1, 1);
    let mut rng = rng_for(9_000);
    let mut lp_bad = 0;
    for _ in 0..50 {
        let d = random_dist(&mut rng, 4, 9);
        let dist = ProductDist::new(vec![vec![d.clone()]]).unwrap();
        let lp = rev_bic_lp(&v, &dist, LpOptions::new(SolutionConcept::Bic, BundleRule::Any), &caps).unwrap().value;
        if lp != monopoly_by_enumeration(&d) {
            lp_bad += 1;
        }
    }
    let grid = small_grid();
    let mut surplus_bad = 0;
    for d in &grid {
        let iv = ironed_virtuals(d);
        let rules = monotone_rules(d.len());
        let brute = rules.iter().map(|x| expected_payment(d, x)).max().unwrap();
        let raw_ok = rules.iter().all(|x| {
            let by_virtual: Rat = x.iter().zip(&iv.raw).zip(&iv.probs).map(|((x, phi), p)| x * phi * p).sum();
            by_virtual == expected_payment(d, x)
        });
        if iv.positive_surplus() != brute || !raw_ok {
            surplus_bad += 1;
        }
    }
    let simplex =
        Environment::explicit(vec![vec![Rat::zero(); 2], vec![Rat::one(), Rat::zero()], vec![Rat::zero(), Rat::one()]])
            .unwrap();
    let mut pairs_bad = 0;
    let mut pairs = 0;
    let sample: Vec<&DiscreteDist> = grid.iter().step_by(3).collect();
    for a in &sample {
        for b in sample.iter().step_by(2) {
            pairs += 1;
            let greedy = opt_single_param(&simplex, &[(*a).clone(), (*b).clone()], &caps).unwrap();
            if greedy != two_bidder_brute_force(a, b) {
                pairs_bad += 1;
            }
        }
    }
    outcome(
        lp_bad == 0 && surplus_bad == 0 && pairs_bad == 0,
        format!(
            "LP vs monopoly: {lp_bad}/50 mismatches; single-bidder surplus vs brute force: {surplus_bad}/{} mismatches; two-bidder greedy vs brute force: {pairs_bad}/{pairs} mismatches",
            grid.len()
        ),
    )
}

type Files = Vec<(String, Vec<u8>)>;

fn files_of(dir: &Path) -> Files {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn criterion_10() -> Outcome {
    let cli = |args: Vec<String>| revmono_tool::run(args, &mut Vec::new()) == ExitCode::SUCCESS;
    let run_once = |root: &Path| -> Option<(Files, Files)> {
        let inst = root.join("instances").to_string_lossy().into_owned();
        let report = root.join("report").to_string_lossy().into_owned();
        let gen = format!("revmono gen --suite all --count 8 --seed 77 --out {inst}");
        let check = format!("revmono check --suite all --seed 77 --instances {inst} --out {report}");
        let argv = |line: &str| line.split(' ').map(String::from).collect::<Vec<_>>();
        (cli(argv(&gen)) && cli(argv(&check))).then(|| (files_of(Path::new(&inst)), files_of(Path::new(&report))))
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    match (run_once(a.path()), run_once(b.path())) {
        (Some(x), Some(y)) => {
            let n = x.0.len() + x.1.len();
            outcome(x == y && n == 10, format!("{n} files compared byte for byte"))
        }
        _ => outcome(false, "gen or check exited with a failure"),
    }
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |k: usize| filter.is_empty() || filter.iter().any(|f| *f == k.to_string());
    let mut failed = Vec::new();
    let mut report = |k: usize, title: &str, run: &dyn Fn() -> Outcome| {
        if !wanted(k) {
            return;
        }
        let start = Instant::now();
        let o = run();
        let verdict = if o.ok { "PASS" } else { "FAIL" };
        println!("criterion {k:>2} [{verdict}] {title}: {} ({:.1}s)", o.detail, start.elapsed().as_secs_f64());
        if !o.ok {
            failed.push(k);
        }
    };
    report(1, "single-parameter monotonicity", &criterion_1);
    let ud = unit_demand_instances();
    let ud_recs = if (2..=4).any(wanted) { run_suite(Suite::Theorem2, &ud, &Caps::default()) } else { Vec::new() };
    report(2, "copies sandwich", &|| criterion_2(&ud_recs));
    report(3, "lottery revenue vs copies", &|| criterion_3(&ud_recs));
    report(4, "unit-demand approximate monotonicity", &|| criterion_4(&ud_recs));
    report(5, "entry-fee identities and inequalities", &criterion_5);
    report(6, "constants", &criterion_6);
    report(7, "subadditive approximate monotonicity witness", &criterion_7);
    report(8, "non-monotone pair search", &criterion_8);
    report(9, "oracle cross-checks", &criterion_9);
    report(10, "determinism of gen and check", &criterion_10);
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

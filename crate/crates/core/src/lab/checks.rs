//! Per-instance check groups. Each group turns oracle values into records.

use std::collections::BTreeMap;
use std::time::Instant;

use super::instance::Instance;
use super::report::{CheckRecord, Regime, Relation};
use super::Suite;
use crate::error::{Caps, Error, Result};
use crate::mechanisms::{
    aspe_revenue, availability_dists, b_floor, demand_set, dg_entry_fee, make_entry_fees, rspm_revenue, run_aspe,
    AspeConfig, AspeRevenue, RspmConfig, SetDist,
};
use crate::oracles::{
    best_rspm, constants, drev_ud, opt_copies_ud, opt_single_param, rev_bic_lp, BundleRule, Environment, LpOptions,
    SolutionConcept,
};
use crate::prob::{v_dominates, DiscreteDist, ProductDist, TypeVec};
use crate::rational::{r, Rat};
use crate::valuations::{alpha_of, ItemSet, Valuation, XosValuation};

/// Smallest maximizer of `p * Pr{X >= p}` over the support (0 for an all-zero distribution).
pub fn monopoly_price(d: &DiscreteDist) -> Rat {
    let mut best = (Rat::zero(), Rat::zero());
    for p in d.support() {
        let rev = p * d.survival_ge(p);
        if rev > best.0 {
            best = (rev, p.clone());
        }
    }
    best.1
}

fn pushforward<T>(points: &[(T, Rat)], f: impl Fn(&T) -> Rat) -> DiscreteDist {
    DiscreteDist::new(points.iter().map(|(t, p)| (f(t), p.clone()))).expect("a pushforward of a distribution")
}

/// `xi_ij`: monopoly price of the scalar distribution of `V_ij` under `dist`.
pub fn stand_in_xi<V: Valuation + ?Sized>(v: &V, dist: &ProductDist, caps: &Caps) -> Result<Vec<Vec<Rat>>> {
    (0..dist.n())
        .map(|i| {
            let types = dist.buyer_types(i, caps)?;
            Ok((0..dist.m()).map(|j| monopoly_price(&pushforward(&types, |t| v.single(i, t, j)))).collect())
        })
        .collect()
}

/// Per item, the monopoly price of `max_i V_ij` under `dist`.
pub fn stand_in_prices<V: Valuation + ?Sized>(v: &V, dist: &ProductDist, caps: &Caps) -> Result<Vec<Rat>> {
    let profiles = dist.profiles(caps)?;
    Ok((0..dist.m())
        .map(|j| {
            let top = pushforward(&profiles, |t: &Vec<TypeVec>| {
                t.iter().enumerate().map(|(i, ti)| v.single(i, ti, j)).max().unwrap_or_else(Rat::zero)
            });
            monopoly_price(&top)
        })
        .collect())
}

/// Every price vector with `Q_j in {0, base_j / 2, base_j}`.
pub fn price_grid(base: &[Rat]) -> Vec<Vec<Rat>> {
    let mut out = vec![Vec::new()];
    for b in base {
        let mut steps = vec![Rat::zero(), b * r(1, 2), b.clone()];
        steps.dedup();
        out = out
            .into_iter()
            .flat_map(|prefix| {
                steps.iter().map(move |s| {
                    let mut p = prefix.clone();
                    p.push(s.clone());
                    p
                })
            })
            .collect();
    }
    out
}

fn rev_lp<V: Valuation + ?Sized>(
    v: &V,
    dist: &ProductDist,
    concept: SolutionConcept,
    bundles: BundleRule,
    caps: &Caps,
) -> Result<Rat> {
    Ok(rev_bic_lp(v, dist, LpOptions::new(concept, bundles), caps)?.value)
}

fn ratio_note(lhs: &Rat, rhs: &Rat) -> String {
    if rhs.is_zero() {
        "ratio undefined".into()
    } else {
        format!("ratio {}", lhs / rhs)
    }
}

fn second(inst: &Instance) -> &ProductDist {
    inst.g.as_ref().unwrap_or(&inst.f)
}

/// `REV_A(G) >= REV_A(F)` with `n * m` single-parameter bidders.
pub fn single_param(inst: &Instance, caps: &Caps) -> Result<Vec<CheckRecord>> {
    let env = inst.params.environment.clone().unwrap_or(Environment::Matching { n: inst.n, m: inst.m });
    let flat = |d: &ProductDist| d.entries().iter().flatten().cloned().collect::<Vec<_>>();
    let rf = opt_single_param(&env, &flat(&inst.f), caps)?;
    let rg = opt_single_param(&env, &flat(second(inst)), caps)?;
    let note = ratio_note(&rg, &rf);
    Ok(vec![CheckRecord::exact("single_param_monotone", "REV_A(G) >= REV_A(F)", rg, Relation::Ge, rf).with_note(note)])
}

/// Unit-demand bounds: the copies sandwich, the lottery bound, and monotonicity.
pub fn unit_demand(inst: &Instance, caps: &Caps) -> Result<Vec<CheckRecord>> {
    let (f, g) = (&inst.f, second(inst));
    let ud = XosValuation::unit_demand(inst.n, inst.m);
    let drev_f = drev_ud(f, caps)?;
    let drev_g = drev_ud(g, caps)?;
    let copies_f = opt_copies_ud(f, caps)?;
    let rev_f = rev_lp(&ud, f, SolutionConcept::Bic, BundleRule::AtMostOne, caps)?;
    let six = Rat::from_integer(6);
    let mut out = Vec::new();
    let rhs_of = |drev: &Rat| Rat::max_of(&(drev / &six), &(&rev_f / Rat::from_integer(24))).clone();
    if drev_f.is_exact() && drev_g.is_exact() {
        out.push(CheckRecord::exact(
            "copies_vs_drev_lower",
            "DREV_UD(F) <= COPIES_UD(F)",
            drev_f.lower.clone(),
            Relation::Le,
            copies_f.clone(),
        ));
        out.push(CheckRecord::exact(
            "copies_vs_drev_upper",
            "COPIES_UD(F) <= 6 DREV_UD(F)",
            copies_f.clone(),
            Relation::Le,
            &six * &drev_f.lower,
        ));
        let rhs = rhs_of(&drev_f.lower);
        let note = ratio_note(&drev_g.lower, &rhs);
        out.push(
            CheckRecord::exact(
                "unit_demand_monotone",
                "DREV_UD(G) >= max(DREV_UD(F)/6, REV_UD(F)/24)",
                drev_g.lower.clone(),
                Relation::Ge,
                rhs,
            )
            .with_note(note),
        );
    } else {
        out.push(CheckRecord::bracket(
            "copies_vs_drev_lower",
            "DREV_UD(F) <= COPIES_UD(F)",
            drev_f.lower.clone(),
            Relation::Le,
            copies_f.clone(),
            Some(drev_f.upper.clone()),
            Some(copies_f.clone()),
        ));
        out.push(CheckRecord::bracket(
            "copies_vs_drev_upper",
            "COPIES_UD(F) <= 6 DREV_UD(F)",
            copies_f.clone(),
            Relation::Le,
            &six * &drev_f.lower,
            Some(copies_f.clone()),
            Some(&six * &drev_f.upper),
        ));
        let rhs = rhs_of(&drev_f.upper);
        let note = ratio_note(&drev_g.lower, &rhs);
        out.push(
            CheckRecord::bracket(
                "unit_demand_monotone",
                "DREV_UD(G) >= max(DREV_UD(F)/6, REV_UD(F)/24)",
                drev_g.lower.clone(),
                Relation::Ge,
                rhs,
                Some(drev_g.upper.clone()),
                Some(rhs_of(&drev_f.lower)),
            )
            .with_note(note),
        );
    }
    out.push(CheckRecord::exact(
        "lottery_vs_copies",
        "REV_UD(F) <= 4 COPIES_UD(F)",
        rev_f,
        Relation::Le,
        Rat::from_integer(4) * &copies_f,
    ));
    Ok(out)
}

/// The best stand-in entry-fee mechanism on `on`, with fees built from `base_dist`.
fn best_stand_in_aspe<V: Valuation + ?Sized>(
    v: &V,
    base_dist: &ProductDist,
    on: &ProductDist,
    q: &Rat,
    caps: &Caps,
) -> Result<(AspeRevenue, AspeConfig)> {
    let base = stand_in_prices(v, base_dist, caps)?;
    let mut best: Option<(AspeRevenue, AspeConfig)> = None;
    for prices in price_grid(&base) {
        let fees = make_entry_fees(v, base_dist, &prices, q, caps)?;
        let cfg = AspeConfig::new(prices, fees)?;
        let rev = aspe_revenue(&cfg, v, on, caps)?;
        if best.as_ref().is_none_or(|(b, _)| rev.total > b.total) {
            best = Some((rev, cfg));
        }
    }
    Ok(best.expect("the price grid is non-empty"))
}

fn type_space(inst: &Instance, caps: &Caps) -> Result<Vec<Vec<TypeVec>>> {
    (0..inst.n)
        .map(|i| {
            let mut tys: Vec<TypeVec> = inst.f.buyer_types(i, caps)?.into_iter().map(|(t, _)| t).collect();
            tys.extend(second(inst).buyer_types(i, caps)?.into_iter().map(|(t, _)| t));
            tys.sort();
            tys.dedup();
            Ok(tys)
        })
        .collect()
}

/// Subadditive monotonicity: exact LP values, witness mechanisms and the RSPM transfer.
pub fn subadditive(inst: &Instance, caps: &Caps) -> Result<Vec<CheckRecord>> {
    let v = &inst.valuation;
    let (f, g) = (&inst.f, second(inst));
    let alpha = alpha_of(v, &type_space(inst, caps)?, caps)?;
    let k = constants(&inst.params.b, &alpha)?;
    let rev_bic_f = rev_lp(v, f, SolutionConcept::Bic, BundleRule::Any, caps)?;
    let rev_dic_g = rev_lp(v, g, SolutionConcept::Dic, BundleRule::Any, caps)?;
    let target = &rev_bic_f / &k.lambda;

    let (rspm_g, _) = best_rspm(v, g, caps)?;
    let (aspe_g, cfg) = best_stand_in_aspe(v, f, g, &inst.params.q, caps)?;
    let witness = Rat::max_of(&rspm_g, &aspe_g.total).clone();

    let (rspm_best_f, _) = best_rspm(v, f, caps)?;
    let xi = RspmConfig::posted(stand_in_xi(v, f, caps)?)?;
    let rspm_xi_f = rspm_revenue(&xi, v, f, caps)?;
    let quarter_q: Rat = cfg.prices.iter().sum::<Rat>() * r(1, 4);

    let mut out = Vec::new();
    let note = ratio_note(&rev_dic_g, &target);
    out.push(
        CheckRecord::exact(
            "subadditive_monotone",
            "REV_DIC(v,G) >= REV_BIC(v,F)/lambda",
            rev_dic_g.clone(),
            Relation::Ge,
            target.clone(),
        )
        .with_note(format!("lambda {}; {note}", k.lambda)),
    );
    let note = ratio_note(&witness, &target);
    out.push(
        CheckRecord::bracket(
            "subadditive_witness",
            "max(ASPE(v,G), RSPM(v,G)) >= REV_BIC(v,F)/lambda",
            witness,
            Relation::Ge,
            target.clone(),
            Some(rev_dic_g.clone()),
            Some(target),
        )
        .with_note(note),
    );
    out.push(CheckRecord::exact(
        "rspm_transfer",
        "RSPM_xi(v,F) <= 6 REV_DIC(v,G)",
        rspm_best_f,
        Relation::Le,
        Rat::from_integer(6) * &rev_dic_g,
    ));
    out.push(
        CheckRecord::diagnostic(
            "aspe_lower_bound",
            "ASPE(v,G) >= sum_j Q_j/4 - C RSPM_xi(v,F)",
            aspe_g.total.clone(),
            Relation::Ge,
            &quarter_q - &k.c * &rspm_xi_f,
        )
        .with_note("stand-in prices and fees"),
    );
    let sets_g = availability_dists(&cfg, v, g, caps)?;
    out.extend(availability_floor(&cfg, &sets_g, &aspe_g, "G"));
    out.push(dg_monotone(&cfg, v, f, g, &sets_g, "I^G", caps)?);
    Ok(out)
}

fn availability_floor(cfg: &AspeConfig, sets: &[SetDist], rev: &AspeRevenue, label: &str) -> Vec<CheckRecord> {
    (0..cfg.m())
        .map(|j| {
            CheckRecord::exact(
                &format!("availability_floor[{label},item={j}]"),
                "B_j(I^H) >= Pr_H[j not sold]",
                b_floor(sets, j),
                Relation::Ge,
                Rat::one() - &rev.sold_prob[j],
            )
        })
        .collect()
}

fn dg_monotone<V: Valuation + ?Sized>(
    cfg: &AspeConfig,
    v: &V,
    f: &ProductDist,
    g: &ProductDist,
    sets: &[SetDist],
    label: &str,
    caps: &Caps,
) -> Result<CheckRecord> {
    Ok(CheckRecord::exact(
        &format!("dg_monotone[{label}]"),
        "EntryFee(G, I) >= EntryFee(F, I)",
        dg_entry_fee(cfg, v, g, sets, caps)?,
        Relation::Ge,
        dg_entry_fee(cfg, v, f, sets, caps)?,
    ))
}

/// Identities and inequalities of the entry-fee mechanism under one configuration.
pub fn lemmas(inst: &Instance, caps: &Caps) -> Result<Vec<CheckRecord>> {
    let v = &inst.valuation;
    let (f, g) = (&inst.f, second(inst));
    let prices = match &inst.params.prices {
        Some(p) => p.clone(),
        None => stand_in_prices(v, f, caps)?,
    };
    let fees = make_entry_fees(v, f, &prices, &inst.params.q, caps)?;
    let cfg = AspeConfig::new(prices, fees)?;
    let mut out = Vec::new();
    let mut sets_by = BTreeMap::new();
    for (label, d) in [("F", f), ("G", g)] {
        let rev = aspe_revenue(&cfg, v, d, caps)?;
        let sets = availability_dists(&cfg, v, d, caps)?;
        let dg = dg_entry_fee(&cfg, v, d, &sets, caps)?;
        out.push(CheckRecord::exact(
            &format!("embedding_identity[{label}]"),
            "EntryFee(H, I^H) == EntryFee(H)",
            dg.clone(),
            Relation::Eq,
            rev.entry_fee.clone(),
        ));
        let by_sold: Rat = rev.sold_prob.iter().zip(&cfg.prices).map(|(p, q)| p * q).sum();
        out.push(CheckRecord::exact(
            &format!("item_price_identity[{label}]"),
            "ItemPrice(H) == sum_j Pr_H[j sold] Q_j",
            rev.item_price.clone(),
            Relation::Eq,
            by_sold.clone(),
        ));
        let mut paid = Rat::zero();
        for (t, p) in d.profiles(caps)? {
            let outcome = run_aspe(&cfg, v, &t, caps)?;
            let bundles: Rat = outcome.bundles.iter().flat_map(|b| b.iter()).map(|j| &cfg.prices[j]).sum();
            paid += (outcome.entry_total() + bundles) * p;
        }
        out.push(CheckRecord::exact(
            &format!("decomposition[{label}]"),
            "ASPE(H) == EntryFee(H, I^H) + sum_j Pr_H[j sold] Q_j",
            paid,
            Relation::Eq,
            dg + by_sold,
        ));
        out.extend(availability_floor(&cfg, &sets, &rev, label));
        sets_by.insert(label, sets);
    }
    let everything = vec![SetDist::point(ItemSet::full(inst.m)); inst.n];
    for (label, sets) in [("I^F", &sets_by["F"]), ("I^G", &sets_by["G"]), ("[m]", &everything)] {
        out.push(dg_monotone(&cfg, v, f, g, sets, label, caps)?);
    }
    out.push(utility_monotone(inst, &cfg, caps)?);

    let alpha = alpha_of(v, &type_space(inst, caps)?, caps)?;
    let k = constants(&inst.params.b, &alpha)?;
    let xi = RspmConfig::posted(stand_in_xi(v, f, caps)?)?;
    let rspm_xi_f = rspm_revenue(&xi, v, f, caps)?;
    for (label, sets) in [("I^G", &sets_by["G"]), ("[m]", &everything)] {
        let weighted: Rat = (0..inst.m).map(|j| b_floor(sets, j) * &cfg.prices[j]).sum();
        out.push(
            CheckRecord::diagnostic(
                &format!("dg_entry_fee_bound[{label}]"),
                "EntryFee(F, I) >= sum_j B_j Q_j/4 - C RSPM_xi(v,F)",
                dg_entry_fee(&cfg, v, f, sets, caps)?,
                Relation::Ge,
                weighted * r(1, 4) - &k.c * &rspm_xi_f,
            )
            .with_note("stand-in prices and fees"),
        );
    }
    Ok(out)
}

/// Along a dominance coupling, the higher type's utility for every available set is at least the lower's.
fn utility_monotone(inst: &Instance, cfg: &AspeConfig, caps: &Caps) -> Result<CheckRecord> {
    let v = &inst.valuation;
    let g = second(inst);
    let mut slack: Option<Rat> = None;
    for i in 0..inst.n {
        let coupling = v_dominates(v, i, inst.f.row(i), g.row(i), caps)?.ok_or(Error::DominanceViolation)?;
        for (low, high, _) in &coupling.pairs {
            for s in ItemSet::full(inst.m).subsets() {
                let d =
                    demand_set(v, i, high, s, &cfg.prices, caps)?.1 - demand_set(v, i, low, s, &cfg.prices, caps)?.1;
                if slack.as_ref().is_none_or(|x| d < *x) {
                    slack = Some(d);
                }
            }
        }
    }
    Ok(CheckRecord::exact(
        "utility_monotone",
        "u(t', S) - u(t, S) >= 0 along the coupling",
        slack.unwrap_or_else(Rat::zero),
        Relation::Ge,
        Rat::zero(),
    ))
}

/// Re-derives an embedded counterexample certificate from scratch.
pub fn certificate(inst: &Instance, caps: &Caps) -> Result<Vec<CheckRecord>> {
    let Some(cert) = &inst.params.certificate else { return Ok(Vec::new()) };
    let g = inst.g.as_ref().ok_or_else(|| Error::Config("certificate without G".into()))?;
    let opts = LpOptions::new(SolutionConcept::Bic, BundleRule::Any).reverify();
    let rev_f = rev_bic_lp(&inst.valuation, &inst.f, opts, caps)?.value;
    let rev_g = rev_bic_lp(&inst.valuation, g, opts, caps)?.value;
    let gap = &rev_f - &rev_g;
    Ok(vec![
        CheckRecord::exact("certificate_rev_f", "REV(F) as certified", rev_f, Relation::Eq, cert.rev_f.clone()),
        CheckRecord::exact("certificate_rev_g", "REV(G) as certified", rev_g, Relation::Eq, cert.rev_g.clone()),
        CheckRecord::exact(
            "certificate_gap",
            "REV(F) - REV(G) as certified",
            gap.clone(),
            Relation::Eq,
            cert.gap.clone(),
        ),
        CheckRecord::exact("certificate_strict", "REV(F) - REV(G) > 0", gap, Relation::Ge, Rat::zero())
            .with_note("equality would not be a counterexample"),
    ])
}

type Group = fn(&Instance, &Caps) -> Result<Vec<CheckRecord>>;

fn groups(suite: Suite) -> Vec<(&'static str, &'static str, Regime, Group)> {
    let t1: (&str, &str, Regime, Group) =
        ("single_param_monotone", "REV_A(G) >= REV_A(F)", Regime::Exact, single_param);
    let t2: (&str, &str, Regime, Group) =
        ("unit_demand", "DREV_UD(G) >= max(DREV_UD(F)/6, REV_UD(F)/24)", Regime::Exact, unit_demand);
    let t3: (&str, &str, Regime, Group) =
        ("subadditive", "REV_DIC(v,G) >= REV_BIC(v,F)/lambda", Regime::Exact, subadditive);
    let lm: (&str, &str, Regime, Group) = ("lemmas", "entry-fee mechanism identities", Regime::Exact, lemmas);
    let mut out = match suite {
        Suite::Theorem1 => vec![t1],
        Suite::Theorem2 => vec![t2],
        Suite::Theorem3 => vec![t3],
        Suite::Lemmas => vec![lm],
        Suite::All => vec![t1, t2, t3, lm],
    };
    out.push(("certificate", "REV(G) < REV(F)", Regime::Exact, certificate));
    out
}

/// Runs every group of `suite` on one instance. Tripped caps become skipped
/// records; any other error becomes a failed record naming the group.
pub fn check_instance(suite: Suite, name: &str, inst: &Instance, caps: &Caps, timings: bool) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    for (group, anchor, regime, run) in groups(suite) {
        let start = Instant::now();
        let mut recs = match run(inst, caps) {
            Ok(recs) => recs,
            Err(e @ Error::CapExceeded { .. }) => vec![CheckRecord::skipped(group, anchor, regime, e.to_string())],
            Err(e) => {
                let mut rec = CheckRecord::skipped(group, anchor, regime, e.to_string());
                rec.verdict = super::report::Verdict::Fail;
                vec![rec]
            }
        };
        let millis = if timings { start.elapsed().as_millis() as u64 } else { 0 };
        for rec in &mut recs {
            rec.instance = name.to_string();
            rec.millis = millis;
        }
        out.extend(recs);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::gen::{generate, GenSpec};
    use crate::lab::report::Verdict;

    #[test]
    fn monopoly_price_examples() {
        let d = DiscreteDist::uniform(&[r(1, 1), r(3, 1)]).unwrap();
        assert_eq!(monopoly_price(&d), r(3, 1));
        let d = DiscreteDist::uniform(&[r(2, 1), r(3, 1)]).unwrap();
        assert_eq!(monopoly_price(&d), r(2, 1));
        let d = DiscreteDist::new([(r(1, 1), r(3, 4)), (r(3, 1), r(1, 4))]).unwrap();
        assert_eq!(monopoly_price(&d), r(1, 1));
        assert_eq!(monopoly_price(&DiscreteDist::point(Rat::zero())), Rat::zero());
    }

    #[test]
    fn price_grid_size() {
        assert_eq!(price_grid(&[r(2, 1), r(4, 1)]).len(), 9);
        assert_eq!(price_grid(&[Rat::zero()]).len(), 1);
    }

    #[test]
    fn suites_pass_on_generated_instances() {
        let caps = Caps::default();
        for suite in [Suite::Theorem1, Suite::Theorem2, Suite::Theorem3, Suite::Lemmas] {
            for seed in 0..3 {
                let inst = generate(suite, seed, &GenSpec::default()).unwrap();
                for rec in check_instance(suite, "x", &inst, &caps, false) {
                    assert!(!rec.is_blocking_failure(), "{suite:?} seed {seed}: {rec:?}");
                    assert_ne!(rec.verdict, Verdict::Inconclusive, "{rec:?}");
                }
            }
        }
    }

    #[test]
    fn equal_pair_is_tight() {
        let mut inst = generate(Suite::Theorem1, 5, &GenSpec::default()).unwrap();
        inst.g = Some(inst.f.clone());
        let rec = &check_instance(Suite::Theorem1, "x", &inst, &Caps::default(), false)[0];
        assert_eq!(rec.lhs, rec.rhs);
    }

    #[test]
    fn caps_turn_into_skips() {
        let inst = generate(Suite::Theorem3, 1, &GenSpec::default()).unwrap();
        let caps = Caps { lp: 1, ..Caps::default() };
        let recs = check_instance(Suite::Theorem3, "x", &inst, &caps, false);
        assert_eq!(recs[0].verdict, Verdict::Inconclusive);
        assert!(recs[0].note.as_ref().unwrap().contains("cap"));
    }
}

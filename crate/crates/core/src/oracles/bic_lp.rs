//! Optimal randomized revenue as an exact linear program over allocation
//! lotteries and payments.

use serde::{Deserialize, Serialize};

use crate::error::{Caps, Error, Result};
use crate::lp::{LinearProgram, PivotRule, Relation};
use crate::prob::{ProductDist, TypeVec};
use crate::rational::Rat;
use crate::valuations::{ItemSet, Valuation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionConcept {
    /// Interim incentive compatibility and interim individual rationality.
    Bic,
    /// Ex-post incentive compatibility and ex-post individual rationality.
    Dic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundleRule {
    /// Each buyer receives at most one item.
    AtMostOne,
    /// Any partition of a subset of the items.
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpOptions {
    pub concept: SolutionConcept,
    pub bundles: BundleRule,
    pub rule: PivotRule,
    /// Add incentive constraints lazily, most violated first, instead of all at once.
    pub cutting_planes: bool,
}

impl LpOptions {
    pub fn new(concept: SolutionConcept, bundles: BundleRule) -> Self {
        LpOptions { concept, bundles, rule: PivotRule::Dantzig, cutting_planes: true }
    }

    /// Every constraint up front, solved under an independent pivot order.
    pub fn reverify(self) -> Self {
        LpOptions { rule: PivotRule::BlandReversed, cutting_planes: false, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpRevenue {
    pub value: Rat,
    pub rounds: usize,
    pub constraints: usize,
    pub pivots: usize,
}

/// Every assignment of disjoint bundles to buyers except the empty one.
pub fn outcomes(n: usize, m: usize, rule: BundleRule) -> Vec<Vec<ItemSet>> {
    let mut out = Vec::new();
    let total = (n + 1).pow(m as u32);
    for code in 0..total {
        let mut bundles = vec![ItemSet::EMPTY; n];
        let mut c = code;
        for j in 0..m {
            let owner = c % (n + 1);
            c /= n + 1;
            if owner < n {
                bundles[owner] = bundles[owner].insert(j);
            }
        }
        if bundles.iter().all(|b| b.is_empty()) {
            continue;
        }
        if rule == BundleRule::AtMostOne && bundles.iter().any(|b| b.len() > 1) {
            continue;
        }
        out.push(bundles);
    }
    out
}

struct Model {
    n: usize,
    radix: Vec<usize>,
    type_prob: Vec<Vec<Rat>>,
    profile_prob: Vec<Rat>,
    outcomes: usize,
    /// `val[i][k][o]`: buyer `i` of type `k` under outcome `o`.
    val: Vec<Vec<Vec<Rat>>>,
}

impl Model {
    fn digits(&self, mut p: usize) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for i in (0..self.n).rev() {
            d[i] = p % self.radix[i];
            p /= self.radix[i];
        }
        d
    }

    fn with_digit(&self, p: usize, i: usize, k: usize) -> usize {
        let d = self.digits(p);
        let stride: usize = self.radix[i + 1..].iter().product();
        p - d[i] * stride + k * stride
    }

    fn pi(&self, p: usize, o: usize) -> usize {
        p * self.outcomes + o
    }
}

/// Builds and solves the optimal-revenue program for `v` under `dist`.
pub fn rev_bic_lp<V: Valuation + ?Sized>(v: &V, dist: &ProductDist, opts: LpOptions, caps: &Caps) -> Result<LpRevenue> {
    let (n, m) = (dist.n(), dist.m());
    if v.num_buyers() != n || v.num_items() != m {
        return Err(Error::Shape("valuation and distribution disagree on (n, m)".into()));
    }
    let types: Vec<Vec<(TypeVec, Rat)>> = (0..n).map(|i| dist.buyer_types(i, caps)).collect::<Result<_>>()?;
    let radix: Vec<usize> = types.iter().map(Vec::len).collect();
    let num_profiles: usize = radix.iter().product();
    let outs = outcomes(n, m, opts.bundles);
    let size = num_profiles as u128 * outs.len() as u128;
    if size > caps.lp as u128 {
        return Err(Error::CapExceeded { what: "revenue LP profiles x outcomes", needed: size, cap: caps.lp as u128 });
    }
    let val = (0..n)
        .map(|i| types[i].iter().map(|(t, _)| outs.iter().map(|o| v.value(i, t, o[i])).collect()).collect())
        .collect();
    let type_prob: Vec<Vec<Rat>> = types.iter().map(|ts| ts.iter().map(|(_, p)| p.clone()).collect()).collect();
    let mut model = Model { n, radix, type_prob, profile_prob: Vec::new(), outcomes: outs.len(), val };
    model.profile_prob = (0..num_profiles)
        .map(|p| model.digits(p).iter().enumerate().map(|(i, &k)| &model.type_prob[i][k]).product())
        .collect();

    let mut lp = LinearProgram::new();
    for _ in 0..num_profiles * model.outcomes {
        lp.add_var(Rat::zero());
    }
    for p in 0..num_profiles {
        let row = (0..model.outcomes).map(|o| (model.pi(p, o), Rat::one())).collect();
        lp.add_constraint(row, Relation::Le, Rat::one());
    }
    let ic = match opts.concept {
        SolutionConcept::Bic => bic_rows(&model, &mut lp),
        SolutionConcept::Dic => dic_rows(&model, &mut lp),
    };

    // The origin is feasible and revenue is bounded by welfare, so an LP error signals a bug.
    let solve = |lp: &LinearProgram| lp.solve(opts.rule).map_err(Error::Lp);

    if !opts.cutting_planes {
        for row in ic.iter().flatten() {
            lp.add_constraint(row.clone(), Relation::Le, Rat::zero());
        }
        let sol = solve(&lp)?;
        return Ok(LpRevenue {
            value: sol.objective,
            rounds: 1,
            constraints: lp.num_constraints(),
            pivots: sol.pivots,
        });
    }

    let mut added: Vec<Vec<bool>> = ic.iter().map(|g| vec![false; g.len()]).collect();
    let mut rounds = 0;
    let mut pivots = 0;
    loop {
        rounds += 1;
        let sol = solve(&lp)?;
        pivots += sol.pivots;
        let mut any = false;
        for (g, group) in ic.iter().enumerate() {
            let mut worst: Option<(usize, Rat)> = None;
            for (r, row) in group.iter().enumerate() {
                if added[g][r] {
                    continue;
                }
                let lhs: Rat = row.iter().map(|(x, c)| c * &sol.values[*x]).sum();
                if lhs.is_positive() && worst.as_ref().is_none_or(|(_, w)| lhs > *w) {
                    worst = Some((r, lhs));
                }
            }
            if let Some((r, _)) = worst {
                added[g][r] = true;
                lp.add_constraint(group[r].clone(), Relation::Le, Rat::zero());
                any = true;
            }
        }
        if !any {
            return Ok(LpRevenue { value: sol.objective, rounds, constraints: lp.num_constraints(), pivots });
        }
    }
}

type Row = Vec<(usize, Rat)>;

/// Adds interim payments, the objective and IR rows; returns IC rows grouped by `(i, true type)`.
#[allow(clippy::needless_range_loop)]
fn bic_rows(model: &Model, lp: &mut LinearProgram) -> Vec<Vec<Row>> {
    let n = model.n;
    let mut pay = Vec::with_capacity(n);
    for i in 0..n {
        pay.push(model.type_prob[i].iter().map(|p| lp.add_free_var(p.clone())).collect::<Vec<_>>());
    }
    // Terms of sum_{t_-i} Pr(t_-i) sum_o pi((r, t_-i), o) * v_i(k, o).
    let interim = |i: usize, k: usize, r: usize| -> Row {
        let mut row = Vec::new();
        for p in 0..model.profile_prob.len() {
            if model.digits(p)[i] != r {
                continue;
            }
            let others = &model.profile_prob[p] / &model.type_prob[i][r];
            for o in 0..model.outcomes {
                let c = &others * &model.val[i][k][o];
                if !c.is_zero() {
                    row.push((model.pi(p, o), c));
                }
            }
        }
        row
    };
    let mut groups = Vec::new();
    for i in 0..n {
        for k in 0..model.radix[i] {
            let own = interim(i, k, k);
            let mut ir: Row = own.iter().map(|(x, c)| (*x, -c)).collect();
            ir.push((pay[i][k], Rat::one()));
            lp.add_constraint(ir, Relation::Le, Rat::zero());
            let mut group = Vec::new();
            for r in 0..model.radix[i] {
                if r == k {
                    continue;
                }
                let mut row: Row = own.iter().map(|(x, c)| (*x, -c)).collect();
                row.push((pay[i][k], Rat::one()));
                row.extend(interim(i, k, r));
                row.push((pay[i][r], -Rat::one()));
                group.push(row);
            }
            groups.push(group);
        }
    }
    groups
}

/// Adds ex-post payments, the objective and IR rows; returns IC rows grouped by `(i, profile)`.
fn dic_rows(model: &Model, lp: &mut LinearProgram) -> Vec<Vec<Row>> {
    let n = model.n;
    let profiles = model.profile_prob.len();
    let pay: Vec<Vec<usize>> =
        (0..profiles).map(|p| (0..n).map(|_| lp.add_free_var(model.profile_prob[p].clone())).collect()).collect();
    // Terms of sum_o pi(p, o) * v_i(k, o).
    let ex_post = |i: usize, k: usize, p: usize| -> Row {
        (0..model.outcomes)
            .filter(|&o| !model.val[i][k][o].is_zero())
            .map(|o| (model.pi(p, o), model.val[i][k][o].clone()))
            .collect()
    };
    let mut groups = Vec::new();
    for p in 0..profiles {
        let d = model.digits(p);
        for i in 0..n {
            let k = d[i];
            let own = ex_post(i, k, p);
            let mut ir: Row = own.iter().map(|(x, c)| (*x, -c)).collect();
            ir.push((pay[p][i], Rat::one()));
            lp.add_constraint(ir, Relation::Le, Rat::zero());
            let mut group = Vec::new();
            for r in 0..model.radix[i] {
                if r == k {
                    continue;
                }
                let q = model.with_digit(p, i, r);
                let mut row: Row = own.iter().map(|(x, c)| (*x, -c)).collect();
                row.push((pay[p][i], Rat::one()));
                row.extend(ex_post(i, k, q));
                row.push((pay[q][i], -Rat::one()));
                group.push(row);
            }
            groups.push(group);
        }
    }
    groups
}

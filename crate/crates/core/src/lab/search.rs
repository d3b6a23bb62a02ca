//! Search for a dominating pair whose optimal revenue drops: one buyer,
//! additive values over `m` items, exact LP revenue at every candidate.
//!
//! Phase one walks a shuffled grid of two-atom coordinates and applies one
//! elementary upward move (mass to a higher atom, or an atom shifted up).
//! Phase two perturbs the pairs whose revenue gain was smallest.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gen::rng_for;
use super::instance::{Certificate, DominanceKind, Instance, Params};
use crate::error::{Caps, Result};
use crate::oracles::{rev_bic_lp, BundleRule, LpOptions, SolutionConcept};
use crate::prob::{dominates, DiscreteDist, ProductDist};
use crate::rational::{r, Rat};
use crate::valuations::{AnyValuation, XosValuation};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub m: usize,
    /// Number of distinct exact LP evaluations allowed.
    pub budget: usize,
    /// Grid values are the integers `1..=max_value`.
    pub max_value: i64,
    /// Grid probabilities are multiples of `1/denom`.
    pub denom: i64,
    /// Pairs kept for local perturbation.
    pub keep: usize,
    pub caps: Caps,
}

pub const DEFAULT_BUDGET: usize = 1500;

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { m: 2, budget: DEFAULT_BUDGET, max_value: 4, denom: 4, keep: 8, caps: Caps::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub f: ProductDist,
    pub g: ProductDist,
    pub rev_f: Rat,
    pub rev_g: Rat,
    pub gap: Rat,
    pub strict: Vec<(usize, usize)>,
}

impl Counterexample {
    pub fn to_instance(&self, seed: u64) -> Instance {
        let mut params = Params::new(seed);
        params.dominance = DominanceKind::Coordinatewise;
        params.certificate = Some(Certificate {
            rev_f: self.rev_f.clone(),
            rev_g: self.rev_g.clone(),
            gap: self.gap.clone(),
            strict: self.strict.clone(),
        });
        Instance {
            n: 1,
            m: self.f.m(),
            valuation: AnyValuation::Xos(XosValuation::additive(1, self.f.m())),
            f: self.f.clone(),
            g: Some(self.g.clone()),
            params,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub evaluated: usize,
    pub found: Vec<Counterexample>,
    /// Smallest `REV(G) - REV(F)` seen over strictly dominating pairs.
    pub closest: Option<Rat>,
}

fn two_atom_grid(max_value: i64, denom: i64) -> Vec<DiscreteDist> {
    let mut out = Vec::new();
    for a in 1..=max_value {
        for b in a + 1..=max_value {
            for k in 1..denom {
                let hi = r(k, denom);
                out.push(
                    DiscreteDist::new([(Rat::from_integer(a), Rat::one() - &hi), (Rat::from_integer(b), hi)])
                        .expect("grid atoms"),
                );
            }
        }
    }
    out
}

/// Every elementary upward move of one coordinate with step sizes `mass` and `shift`.
fn moves(d: &DiscreteDist, mass: &Rat, shift: &Rat) -> Vec<DiscreteDist> {
    let atoms = d.atoms();
    let mut out = Vec::new();
    for a in 0..atoms.len() {
        for b in a + 1..atoms.len() {
            let moved = Rat::min_of(mass, &atoms[a].1).clone();
            let mut next = atoms.to_vec();
            next[a].1 -= &moved;
            next[b].1 += &moved;
            out.push(next);
        }
        let mut next = atoms.to_vec();
        next[a].0 += shift;
        out.push(next);
    }
    out.into_iter().filter_map(|atoms| DiscreteDist::new(atoms).ok()).filter(|g| g != d && dominates(d, g)).collect()
}

/// Local variations of one coordinate: probability jitter, half-step value
/// jitter, and a small new atom between neighbours.
fn perturb<R: Rng>(d: &DiscreteDist, step: &Rat, rng: &mut R) -> DiscreteDist {
    let mut atoms = d.atoms().to_vec();
    let k = atoms.len();
    match rng.gen_range(0..3) {
        0 if k > 1 => {
            let (a, b) = (rng.gen_range(0..k), rng.gen_range(0..k));
            let moved = Rat::min_of(step, &atoms[a].1).clone();
            atoms[a].1 -= &moved;
            atoms[b].1 += moved;
        }
        1 => {
            let a = rng.gen_range(0..k);
            let delta = step * r(if rng.gen_bool(0.5) { 1 } else { -1 }, 1) * Rat::from_integer(2);
            let v = &atoms[a].0 + delta;
            if !v.is_negative() {
                atoms[a].0 = v;
            }
        }
        _ if k < 3 => {
            let a = rng.gen_range(0..k);
            let b = (a + 1) % k;
            let mid = (&atoms[a].0 + &atoms[b].0) * r(1, 2);
            let moved = Rat::min_of(step, &atoms[a].1).clone();
            atoms[a].1 -= &moved;
            atoms.push((mid, moved));
        }
        _ => {}
    }
    DiscreteDist::new(atoms).unwrap_or_else(|_| d.clone())
}

struct Pair {
    f: ProductDist,
    g: ProductDist,
}

fn with_entry(p: &ProductDist, j: usize, d: DiscreteDist) -> ProductDist {
    let mut row = p.row(0).to_vec();
    row[j] = d;
    ProductDist::new(vec![row]).expect("same shape")
}

fn key(p: &ProductDist) -> String {
    serde_json::to_string(p).expect("distributions serialize")
}

struct Evaluator<'a> {
    v: XosValuation,
    cfg: &'a SearchConfig,
    cache: HashMap<String, Rat>,
    evaluated: usize,
}

impl Evaluator<'_> {
    /// Exact revenues for every pair, or `None` once the budget runs out.
    fn revenues(&mut self, pairs: &[Pair]) -> Result<Vec<Option<(Rat, Rat)>>> {
        let mut fresh: Vec<&ProductDist> = Vec::new();
        for p in pairs {
            for d in [&p.f, &p.g] {
                let k = key(d);
                if !self.cache.contains_key(&k) && !fresh.iter().any(|x| key(x) == k) {
                    fresh.push(d);
                }
            }
        }
        fresh.truncate(self.cfg.budget.saturating_sub(self.evaluated));
        let opts = LpOptions::new(SolutionConcept::Bic, BundleRule::Any);
        let values: Vec<Result<Rat>> =
            fresh.par_iter().map(|d| Ok(rev_bic_lp(&self.v, d, opts, &self.cfg.caps)?.value)).collect();
        for (d, v) in fresh.iter().zip(values) {
            self.cache.insert(key(d), v?);
        }
        self.evaluated += fresh.len();
        Ok(pairs
            .iter()
            .map(|p| Some((self.cache.get(&key(&p.f))?.clone(), self.cache.get(&key(&p.g))?.clone())))
            .collect())
    }
}

fn certify(v: &XosValuation, f: &ProductDist, g: &ProductDist, caps: &Caps) -> Result<Option<Counterexample>> {
    let strict: Vec<(usize, usize)> = (0..f.m()).filter(|&j| f.entry(0, j) != g.entry(0, j)).map(|j| (0, j)).collect();
    if strict.is_empty() || !f.dominated_by(g) {
        return Ok(None);
    }
    let opts = LpOptions::new(SolutionConcept::Bic, BundleRule::Any).reverify();
    let rev_f = rev_bic_lp(v, f, opts, caps)?.value;
    let rev_g = rev_bic_lp(v, g, opts, caps)?.value;
    if rev_g >= rev_f {
        return Ok(None);
    }
    let gap = &rev_f - &rev_g;
    Ok(Some(Counterexample { f: f.clone(), g: g.clone(), rev_f, rev_g, gap, strict }))
}

pub fn search_hart_reny(cfg: &SearchConfig, seed: u64) -> Result<SearchOutcome> {
    let mut rng = rng_for(seed);
    let m = cfg.m.max(1);
    let mut eval = Evaluator { v: XosValuation::additive(1, m), cfg, cache: HashMap::new(), evaluated: 0 };
    let mut found: Vec<Counterexample> = Vec::new();
    let mut closest: Option<Rat> = None;
    // (gain, pair) for the pairs closest to a revenue drop
    let mut near: Vec<(Rat, Pair)> = Vec::new();

    let grid = two_atom_grid(cfg.max_value, cfg.denom);
    let unit_mass = r(1, cfg.denom);
    let mut starts: Vec<ProductDist> = Vec::new();
    let mut idx = vec![0usize; m];
    'grid: loop {
        starts.push(ProductDist::new(vec![idx.iter().map(|&k| grid[k].clone()).collect()])?);
        let mut c = m;
        loop {
            if c == 0 {
                break 'grid;
            }
            c -= 1;
            idx[c] += 1;
            if idx[c] < grid.len() {
                break;
            }
            idx[c] = 0;
        }
    }
    starts.shuffle(&mut rng);

    let mut candidates: Vec<Pair> = Vec::new();
    for f in &starts {
        for j in 0..m {
            for g in moves(f.entry(0, j), &unit_mass, &Rat::one()) {
                candidates.push(Pair { f: f.clone(), g: with_entry(f, j, g) });
            }
        }
    }

    let batch = 32;
    let mut phase_two = false;
    let mut stalls = 0;
    let step = r(1, 2 * cfg.denom);
    while eval.evaluated < cfg.budget {
        if candidates.is_empty() {
            if near.is_empty() {
                break;
            }
            phase_two = true;
            for _ in 0..batch {
                let (_, base) = &near[rng.gen_range(0..near.len())];
                let j = rng.gen_range(0..m);
                let f = with_entry(&base.f, j, perturb(base.f.entry(0, j), &step, &mut rng));
                let j = rng.gen_range(0..m);
                let mut gs = moves(f.entry(0, j), &step, &r(1, 2));
                if gs.is_empty() {
                    continue;
                }
                let g = gs.swap_remove(rng.gen_range(0..gs.len()));
                candidates.push(Pair { g: with_entry(&f, j, g), f });
            }
        }
        let take = candidates.len().min(batch);
        let chunk: Vec<Pair> = candidates.drain(..take).collect();
        let before = eval.evaluated;
        let revs = eval.revenues(&chunk)?;
        for (pair, rev) in chunk.into_iter().zip(revs) {
            let Some((rev_f, rev_g)) = rev else { continue };
            let gain = &rev_g - &rev_f;
            if closest.as_ref().is_none_or(|c| gain < *c) {
                closest = Some(gain.clone());
            }
            if gain.is_negative() {
                if let Some(cx) = certify(&eval.v, &pair.f, &pair.g, &cfg.caps)? {
                    if !found.iter().any(|x| x.f == cx.f && x.g == cx.g) {
                        found.push(cx);
                    }
                }
            }
            // ties go first so the local phase keeps moving
            let pos = near.partition_point(|(g, _)| *g < gain);
            if pos < cfg.keep {
                near.insert(pos, (gain, pair));
                near.truncate(cfg.keep);
            }
        }
        if phase_two && eval.evaluated == before {
            // perturbations that only hit the cache; give up after a while
            stalls += 1;
            if stalls > 64 {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    Ok(SearchOutcome { evaluated: eval.evaluated, found, closest })
}

//! Seeded random instances. The same seed always yields the same bytes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::instance::{DominanceKind, Instance, Params};
use super::Suite;
use crate::error::{Error, Result};
use crate::oracles::Environment;
use crate::prob::{dominates, DiscreteDist, ProductDist};
use crate::rational::{r, Rat};
use crate::valuations::{AnyValuation, XosValuation};

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Up to `max_atoms` distinct integer values in `0..=max_value` with random
/// weights in `1..=8`, normalized.
pub fn random_dist<R: Rng>(rng: &mut R, max_atoms: usize, max_value: i64) -> DiscreteDist {
    let k = rng.gen_range(1..=max_atoms.max(1)).min(max_value as usize + 1);
    let pool: Vec<i64> = (0..=max_value).collect();
    let values: Vec<i64> = pool.choose_multiple(rng, k).copied().collect();
    let weights: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=8)).collect();
    let total: i64 = weights.iter().sum();
    DiscreteDist::new(values.into_iter().zip(weights).map(|(v, w)| (Rat::from_integer(v), r(w, total))))
        .expect("weights are positive and normalized")
}

/// A distribution dominating `d`: every atom moves up by `strength * k / 2`
/// for random `k in {0, 1, 2}`, then part of one atom's mass moves above the top.
pub fn dominating<R: Rng>(d: &DiscreteDist, strength: &Rat, rng: &mut R) -> Result<DiscreteDist> {
    if strength.is_negative() || *strength > Rat::one() {
        return Err(Error::Domain(format!("strength {strength} must lie in [0, 1]")));
    }
    let mut atoms: Vec<(Rat, Rat)> =
        d.atoms().iter().map(|(v, p)| (v + strength * r(rng.gen_range(0..=2), 2), p.clone())).collect();
    if strength.is_positive() && rng.gen_bool(0.5) {
        let src = rng.gen_range(0..atoms.len());
        let share = strength / (strength + Rat::one()) * r(rng.gen_range(1..=2), 2);
        let moved = &atoms[src].1 * &share;
        let top = atoms.iter().map(|(v, _)| v.clone()).max().expect("non-empty") + strength;
        atoms[src].1 -= &moved;
        atoms.push((top, moved));
    }
    let g = DiscreteDist::new(atoms)?;
    if !dominates(d, &g) {
        return Err(Error::DominanceViolation);
    }
    Ok(g)
}

pub fn dominating_product<R: Rng>(f: &ProductDist, strength: &Rat, rng: &mut R) -> Result<ProductDist> {
    let rows = f
        .entries()
        .iter()
        .map(|row| row.iter().map(|d| dominating(d, strength, rng)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    ProductDist::new(rows)
}

/// Every value shifted up by `s`.
pub fn shifted(d: &DiscreteDist, s: &Rat) -> Result<DiscreteDist> {
    d.map(|v| v + s)
}

/// One to two clauses per buyer with coefficients in `{0, 1/2, 1, 3/2}`.
pub fn random_xos<R: Rng>(rng: &mut R, n: usize, m: usize) -> XosValuation {
    let clauses = (0..n)
        .map(|_| (0..rng.gen_range(1..=2)).map(|_| (0..m).map(|_| r(rng.gen_range(0..=3), 2)).collect()).collect())
        .collect();
    XosValuation::new(m, clauses).expect("coefficients are non-negative")
}

/// The zero vector plus up to `extra` random vectors with coordinates in `{0, 1/2, 1}`.
pub fn random_environment<R: Rng>(rng: &mut R, bidders: usize, extra: usize) -> Environment {
    let mut vertices = vec![vec![Rat::zero(); bidders]];
    for _ in 0..rng.gen_range(1..=extra.max(1)) {
        vertices.push((0..bidders).map(|_| r(rng.gen_range(0..=2), 2)).collect());
    }
    vertices.sort();
    vertices.dedup();
    Environment::explicit(vertices).expect("vertices lie in the unit cube")
}

/// Shape overrides for [`generate`]; `None` picks a suite default.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenSpec {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub support: Option<usize>,
    pub max_value: i64,
    pub strength: Rat,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec { n: None, m: None, support: None, max_value: 6, strength: Rat::one() }
    }
}

/// One instance for `suite` from `seed`. `Suite::All` cycles through the others by seed.
pub fn generate(suite: Suite, seed: u64, spec: &GenSpec) -> Result<Instance> {
    let mut rng = rng_for(seed);
    let suite = match suite {
        Suite::All => [Suite::Theorem1, Suite::Theorem2, Suite::Theorem3, Suite::Lemmas][(seed % 4) as usize],
        s => s,
    };
    let (n_max, m_max, support) = match suite {
        Suite::Theorem1 => (3, 1, 3),
        Suite::Theorem2 => (1, 3, 3),
        _ => (2, 2, 2),
    };
    let n = spec.n.unwrap_or_else(|| rng.gen_range(1..=n_max));
    let m = spec.m.unwrap_or_else(|| rng.gen_range(1..=m_max));
    let support = spec.support.unwrap_or(support);
    if n == 0 || m == 0 || support == 0 {
        return Err(Error::Config("n, m and support must be positive".into()));
    }
    let rows: Vec<Vec<DiscreteDist>> =
        (0..n).map(|_| (0..m).map(|_| random_dist(&mut rng, support, spec.max_value)).collect()).collect();
    let f = ProductDist::new(rows)?;
    let g = dominating_product(&f, &spec.strength, &mut rng)?;
    let mut params = Params::new(seed);
    let valuation = match suite {
        Suite::Theorem1 => {
            params.environment = Some(random_environment(&mut rng, n * m, 7));
            XosValuation::additive(n, m)
        }
        Suite::Theorem2 => XosValuation::unit_demand(n, m),
        _ => {
            params.dominance = DominanceKind::Valuation;
            if suite == Suite::Lemmas {
                params.q = r(rng.gen_range(0..=2), 4);
                if rng.gen_bool(0.5) {
                    params.prices = Some((0..m).map(|_| r(rng.gen_range(0..=2 * spec.max_value), 2)).collect());
                }
            }
            random_xos(&mut rng, n, m)
        }
    };
    Ok(Instance { n, m, valuation: AnyValuation::Xos(valuation), f, g: Some(g), params })
}

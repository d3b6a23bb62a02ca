//! Entry fees when every buyer faces an independently drawn available set.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::aspe::{check_shape, demand_set, run_aspe_traced, AspeConfig};
use crate::error::{Caps, Error, Result};
use crate::prob::ProductDist;
use crate::rational::Rat;
use crate::valuations::{ItemSet, Valuation};

/// A finite distribution over item sets, sorted by bit mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(ItemSet, Rat)>", into = "Vec<(ItemSet, Rat)>")]
pub struct SetDist(Vec<(ItemSet, Rat)>);

impl SetDist {
    pub fn new<I: IntoIterator<Item = (ItemSet, Rat)>>(atoms: I) -> Result<Self> {
        let mut merged: BTreeMap<ItemSet, Rat> = BTreeMap::new();
        for (s, p) in atoms {
            if p.is_negative() {
                return Err(Error::InvalidDistribution(format!("negative probability {p}")));
            }
            *merged.entry(s).or_default() += p;
        }
        let atoms: Vec<_> = merged.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        let total: Rat = atoms.iter().map(|(_, p)| p).sum();
        if total != Rat::one() {
            return Err(Error::InvalidDistribution(format!("set probabilities sum to {total}")));
        }
        Ok(SetDist(atoms))
    }

    pub fn point(s: ItemSet) -> Self {
        SetDist(vec![(s, Rat::one())])
    }

    pub fn atoms(&self) -> &[(ItemSet, Rat)] {
        &self.0
    }

    /// `Pr{j in I}`.
    pub fn contains_prob(&self, j: usize) -> Rat {
        self.0.iter().filter(|(s, _)| s.contains(j)).map(|(_, p)| p).sum()
    }
}

impl TryFrom<Vec<(ItemSet, Rat)>> for SetDist {
    type Error = Error;
    fn try_from(v: Vec<(ItemSet, Rat)>) -> Result<Self> {
        SetDist::new(v)
    }
}

impl From<SetDist> for Vec<(ItemSet, Rat)> {
    fn from(d: SetDist) -> Self {
        d.0
    }
}

/// `sum_i E_{t_i ~ H_i} E_{I_i ~ sets[i]} [ 1{u_i(t_i, I_i) >= delta_i(I_i)} * delta_i(I_i) ]`.
pub fn dg_entry_fee<V: Valuation + ?Sized>(
    cfg: &AspeConfig,
    v: &V,
    dist: &ProductDist,
    sets: &[SetDist],
    caps: &Caps,
) -> Result<Rat> {
    check_shape(cfg, dist)?;
    if sets.len() != dist.n() {
        return Err(Error::Shape("need one set distribution per buyer".into()));
    }
    let mut total = Rat::zero();
    for (i, set_dist) in sets.iter().enumerate() {
        let types = dist.buyer_types(i, caps)?;
        for (s, ps) in set_dist.atoms() {
            let fee = cfg.fees.get(i, *s);
            if fee.is_zero() {
                continue;
            }
            let mut enter = Rat::zero();
            for (ti, pt) in &types {
                if demand_set(v, i, ti, *s, &cfg.prices, caps)?.1 >= *fee {
                    enter += pt;
                }
            }
            total += enter * ps * fee;
        }
    }
    Ok(total)
}

/// Distribution of the set each buyer finds available when the mechanism runs on `dist`.
pub fn availability_dists<V: Valuation + ?Sized>(
    cfg: &AspeConfig,
    v: &V,
    dist: &ProductDist,
    caps: &Caps,
) -> Result<Vec<SetDist>> {
    check_shape(cfg, dist)?;
    let mut acc: Vec<BTreeMap<ItemSet, Rat>> = vec![BTreeMap::new(); dist.n()];
    for (t, p) in dist.profiles(caps)? {
        let (_, seen) = run_aspe_traced(cfg, v, &t, caps)?;
        for (i, s) in seen.into_iter().enumerate() {
            *acc[i].entry(s).or_default() += &p;
        }
    }
    acc.into_iter().map(SetDist::new).collect()
}

/// `B_j = min_i Pr{j in I_i}`.
pub fn b_floor(sets: &[SetDist], j: usize) -> Rat {
    sets.iter().map(|d| d.contains_prob(j)).min().unwrap_or_else(Rat::one)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{aspe_revenue, make_entry_fees, EntryFees};
    use crate::prob::DiscreteDist;
    use crate::rational::r;
    use crate::valuations::XosValuation;

    fn ints(xs: &[i64]) -> Vec<Rat> {
        xs.iter().map(|&x| Rat::from_integer(x)).collect()
    }

    fn two_by_two() -> ProductDist {
        let d = DiscreteDist::uniform(&ints(&[1, 4])).unwrap();
        let e = DiscreteDist::uniform(&ints(&[0, 2, 3])).unwrap();
        ProductDist::new(vec![vec![d.clone(), e.clone()], vec![e, d]]).unwrap()
    }

    #[test]
    fn first_buyer_sees_everything() {
        let caps = Caps::default();
        let add = XosValuation::additive(2, 2);
        let f = two_by_two();
        let cfg = AspeConfig::new(ints(&[1, 1]), EntryFees::zero(2, 2)).unwrap();
        let sets = availability_dists(&cfg, &add, &f, &caps).unwrap();
        assert_eq!(sets[0], SetDist::point(ItemSet::full(2)));
    }

    #[test]
    fn prefix_purchase_removes_item() {
        // Buyer 0 always values item 0 above its price and item 1 below it.
        let caps = Caps::default();
        let add = XosValuation::additive(2, 2);
        let pm = |x| DiscreteDist::point(r(x, 1));
        let f = ProductDist::new(vec![vec![pm(5), pm(0)], vec![pm(5), pm(5)]]).unwrap();
        let cfg = AspeConfig::new(ints(&[1, 1]), EntryFees::zero(2, 2)).unwrap();
        let sets = availability_dists(&cfg, &add, &f, &caps).unwrap();
        assert_eq!(sets[1], SetDist::point(ItemSet::singleton(1)));
        assert_eq!(b_floor(&sets, 0), Rat::zero());
        assert_eq!(b_floor(&sets, 1), Rat::one());
    }

    #[test]
    fn huge_fees_keep_everything_available() {
        let caps = Caps::default();
        let add = XosValuation::additive(2, 2);
        let cfg = AspeConfig::new(ints(&[1, 1]), EntryFees::constant(2, 2, r(100, 1))).unwrap();
        let sets = availability_dists(&cfg, &add, &two_by_two(), &caps).unwrap();
        assert!(sets.iter().all(|s| *s == SetDist::point(ItemSet::full(2))));
    }

    #[test]
    fn embedding_reproduces_entry_revenue() {
        let caps = Caps::default();
        let add = XosValuation::additive(2, 2);
        let f = two_by_two();
        let q = ints(&[1, 2]);
        let fees = make_entry_fees(&add, &f, &q, &r(1, 2), &caps).unwrap();
        let cfg = AspeConfig::new(q, fees).unwrap();
        let sets = availability_dists(&cfg, &add, &f, &caps).unwrap();
        let rev = aspe_revenue(&cfg, &add, &f, &caps).unwrap();
        assert_eq!(dg_entry_fee(&cfg, &add, &f, &sets, &caps).unwrap(), rev.entry_fee);
        for j in 0..2 {
            assert!(b_floor(&sets, j) >= Rat::one() - &rev.sold_prob[j]);
        }
    }

    #[test]
    fn zero_fees_collect_nothing() {
        let caps = Caps::default();
        let add = XosValuation::additive(2, 2);
        let cfg = AspeConfig::new(ints(&[1, 1]), EntryFees::zero(2, 2)).unwrap();
        let sets = vec![SetDist::point(ItemSet::full(2)); 2];
        assert_eq!(dg_entry_fee(&cfg, &add, &two_by_two(), &sets, &caps).unwrap(), Rat::zero());
    }
}

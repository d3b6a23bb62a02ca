use serde::{Deserialize, Serialize};

use super::MechanismOutcome;
use crate::error::{Caps, Error, Result};
use crate::prob::{ProductDist, Profile, TypeVec};
use crate::rational::Rat;
use crate::valuations::{ItemSet, Valuation};

/// Utility-maximizing bundle within `avail` at item prices `q`.
///
/// Ties go to the bundle with the smallest bit mask, so the empty bundle wins
/// whenever nothing gives positive utility.
pub fn demand_set<V: Valuation + ?Sized>(
    v: &V,
    buyer: usize,
    ty: &[Rat],
    avail: ItemSet,
    q: &[Rat],
    caps: &Caps,
) -> Result<(ItemSet, Rat)> {
    caps.guard_subset("demand-set enumeration", avail.len())?;
    let mut best = (ItemSet::EMPTY, Rat::zero());
    for s in avail.subsets().skip(1) {
        let price: Rat = s.iter().map(|j| &q[j]).sum();
        let u = v.value(buyer, ty, s) - price;
        if u > best.1 {
            best = (s, u);
        }
    }
    Ok(best)
}

/// Entry fees `delta_i(S)` indexed by buyer and the bit mask of `S`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntryFees(Vec<Vec<Rat>>);

impl EntryFees {
    pub fn new(m: usize, fees: Vec<Vec<Rat>>) -> Result<Self> {
        if fees.iter().any(|row| row.len() != 1 << m) {
            return Err(Error::Shape(format!("each buyer needs 2^{m} entry fees")));
        }
        if fees.iter().flatten().any(Rat::is_negative) {
            return Err(Error::Config("entry fees must be non-negative".into()));
        }
        Ok(EntryFees(fees))
    }

    pub fn zero(n: usize, m: usize) -> Self {
        EntryFees(vec![vec![Rat::zero(); 1 << m]; n])
    }

    pub fn constant(n: usize, m: usize, fee: Rat) -> Self {
        EntryFees(vec![vec![fee; 1 << m]; n])
    }

    pub fn get(&self, buyer: usize, avail: ItemSet) -> &Rat {
        &self.0[buyer][avail.bits() as usize]
    }

    pub fn rows(&self) -> &[Vec<Rat>] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().flatten().all(Rat::is_zero)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspeConfig {
    /// Anonymous item prices `Q_j`.
    pub prices: Vec<Rat>,
    pub fees: EntryFees,
    /// Quantile the fees were built with, if they were built by [`make_entry_fees`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantile: Option<Rat>,
}

impl AspeConfig {
    pub fn new(prices: Vec<Rat>, fees: EntryFees) -> Result<Self> {
        if prices.iter().any(Rat::is_negative) {
            return Err(Error::Config("item prices must be non-negative".into()));
        }
        if fees.0.iter().any(|row| row.len() != 1 << prices.len()) {
            return Err(Error::Shape("entry-fee table does not match the number of items".into()));
        }
        Ok(AspeConfig { prices, fees, quantile: None })
    }

    pub fn m(&self) -> usize {
        self.prices.len()
    }

    pub fn n(&self) -> usize {
        self.fees.0.len()
    }
}

/// Runs the mechanism on one profile. Returns the outcome and the set each
/// buyer found available on arrival.
pub(crate) fn run_aspe_traced<V: Valuation + ?Sized>(
    cfg: &AspeConfig,
    v: &V,
    t: &[TypeVec],
    caps: &Caps,
) -> Result<(MechanismOutcome, Vec<ItemSet>)> {
    let mut out = MechanismOutcome::empty(t.len());
    let mut avail = ItemSet::full(cfg.m());
    let mut seen = Vec::with_capacity(t.len());
    for (i, ti) in t.iter().enumerate() {
        seen.push(avail);
        let (bundle, u) = demand_set(v, i, ti, avail, &cfg.prices, caps)?;
        let fee = cfg.fees.get(i, avail);
        if u < *fee {
            continue;
        }
        out.entry_fees[i] = fee.clone();
        out.item_prices[i] = bundle.iter().map(|j| &cfg.prices[j]).sum();
        out.bundles[i] = bundle;
        out.sold = out.sold.union(bundle);
        avail = avail.difference(bundle);
    }
    Ok((out, seen))
}

/// A buyer enters when `u_i(t_i, S) >= delta_i(S)`, then takes a demand bundle.
pub fn run_aspe<V: Valuation + ?Sized>(
    cfg: &AspeConfig,
    v: &V,
    t: &[TypeVec],
    caps: &Caps,
) -> Result<MechanismOutcome> {
    run_aspe_traced(cfg, v, t, caps).map(|(out, _)| out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspeRevenue {
    pub entry_fee: Rat,
    pub item_price: Rat,
    pub total: Rat,
    /// `Pr{j in SOLD}` per item.
    pub sold_prob: Vec<Rat>,
}

pub fn aspe_revenue_on<V: Valuation + ?Sized>(
    cfg: &AspeConfig,
    v: &V,
    profiles: &[Profile],
    caps: &Caps,
) -> Result<AspeRevenue> {
    let mut entry_fee = Rat::zero();
    let mut item_price = Rat::zero();
    let mut sold_prob = vec![Rat::zero(); cfg.m()];
    for (t, p) in profiles {
        let out = run_aspe(cfg, v, t, caps)?;
        entry_fee += out.entry_total() * p;
        item_price += out.item_total() * p;
        for j in out.sold.iter() {
            sold_prob[j] += p;
        }
    }
    let total = &entry_fee + &item_price;
    Ok(AspeRevenue { entry_fee, item_price, total, sold_prob })
}

pub fn aspe_revenue<V: Valuation + ?Sized>(
    cfg: &AspeConfig,
    v: &V,
    dist: &ProductDist,
    caps: &Caps,
) -> Result<AspeRevenue> {
    check_shape(cfg, dist)?;
    aspe_revenue_on(cfg, v, &dist.profiles(caps)?, caps)
}

pub(crate) fn check_shape(cfg: &AspeConfig, dist: &ProductDist) -> Result<()> {
    if cfg.n() != dist.n() || cfg.m() != dist.m() {
        return Err(Error::Shape("ASPE config and distribution disagree on (n, m)".into()));
    }
    Ok(())
}

/// `delta_i(S)`: the largest `d` with `Pr{u_i(t_i, S) >= d} >= 1 - q` under `t_i ~ F_i`.
pub fn make_entry_fees<V: Valuation + ?Sized>(
    v: &V,
    dist: &ProductDist,
    prices: &[Rat],
    q: &Rat,
    caps: &Caps,
) -> Result<EntryFees> {
    if q.is_negative() || *q >= Rat::one() {
        return Err(Error::Domain(format!("quantile q={q} must lie in [0, 1)")));
    }
    let m = prices.len();
    if m != dist.m() {
        return Err(Error::Shape("price vector and distribution disagree on m".into()));
    }
    let need = Rat::one() - q;
    let mut fees = Vec::with_capacity(dist.n());
    for i in 0..dist.n() {
        let types = dist.buyer_types(i, caps)?;
        let mut row = Vec::with_capacity(1 << m);
        for s in ItemSet::full(m).subsets() {
            let mut utils = Vec::with_capacity(types.len());
            for (ti, p) in &types {
                utils.push((demand_set(v, i, ti, s, prices, caps)?.1, p.clone()));
            }
            utils.sort_by(|a, b| b.0.cmp(&a.0));
            let mut mass = Rat::zero();
            let mut fee = Rat::zero();
            for (u, p) in utils {
                mass += p;
                if mass >= need {
                    fee = u;
                    break;
                }
            }
            row.push(fee);
        }
        fees.push(row);
    }
    Ok(EntryFees(fees))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::DiscreteDist;
    use crate::rational::r;
    use crate::valuations::XosValuation;

    fn ints(xs: &[i64]) -> Vec<Rat> {
        xs.iter().map(|&x| Rat::from_integer(x)).collect()
    }

    #[test]
    fn demand_examples() {
        let caps = Caps::default();
        let ud = XosValuation::unit_demand(1, 2);
        let full = ItemSet::full(2);
        assert_eq!(
            demand_set(&ud, 0, &ints(&[3, 5]), full, &ints(&[1, 4]), &caps).unwrap(),
            (ItemSet::singleton(0), r(2, 1))
        );
        assert_eq!(
            demand_set(&ud, 0, &ints(&[3, 5]), full, &ints(&[99, 99]), &caps).unwrap(),
            (ItemSet::EMPTY, r(0, 1))
        );
    }

    #[test]
    fn additive_demand_matches_closed_form() {
        let caps = Caps::default();
        let add = XosValuation::additive(1, 3);
        let q = ints(&[2, 2, 2]);
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    let t = ints(&[a, b, c]);
                    let (set, u) = demand_set(&add, 0, &t, ItemSet::full(3), &q, &caps).unwrap();
                    let expect: Rat = t.iter().zip(&q).map(|(x, y)| (x - y).positive_part()).sum();
                    assert_eq!(u, expect);
                    assert_eq!(set, ItemSet::from_items((0..3).filter(|&j| t[j] > q[j])));
                }
            }
        }
    }

    #[test]
    fn excluded_buyer_pays_nothing() {
        let caps = Caps::default();
        let add = XosValuation::additive(2, 1);
        let fees = EntryFees::new(1, vec![ints(&[0, 5]), ints(&[0, 0])]).unwrap();
        let cfg = AspeConfig::new(ints(&[1]), fees).unwrap();
        let out = run_aspe(&cfg, &add, &[ints(&[3]), ints(&[2])], &caps).unwrap();
        assert_eq!(out.bundles, vec![ItemSet::EMPTY, ItemSet::singleton(0)]);
        assert_eq!(out.entry_fees, ints(&[0, 0]));
        assert_eq!(out.revenue(), r(1, 1));
    }

    #[test]
    fn two_buyer_fees_and_prices() {
        // Buyer 0: u({0,1}) = (4-1)+(3-2) = 4 >= fee 3, takes both items.
        // Buyer 1 then sees nothing; fee 0 on the empty set, enters, buys nothing.
        let caps = Caps::default();
        let add = XosValuation::additive(2, 2);
        let fees = EntryFees::new(2, vec![ints(&[0, 0, 0, 3]), ints(&[0, 1, 1, 1])]).unwrap();
        let cfg = AspeConfig::new(ints(&[1, 2]), fees).unwrap();
        let out = run_aspe(&cfg, &add, &[ints(&[4, 3]), ints(&[9, 9])], &caps).unwrap();
        assert_eq!(out.bundles, vec![ItemSet::full(2), ItemSet::EMPTY]);
        assert_eq!(out.entry_total(), r(3, 1));
        assert_eq!(out.item_total(), r(3, 1));
        assert_eq!(out.revenue(), r(6, 1));
        assert!(out.is_feasible());
    }

    #[test]
    fn median_fee() {
        let caps = Caps::default();
        let add = XosValuation::additive(1, 1);
        let f = ProductDist::single_column(vec![DiscreteDist::uniform(&ints(&[0, 4])).unwrap()]).unwrap();
        let fees = make_entry_fees(&add, &f, &ints(&[0]), &r(1, 2), &caps).unwrap();
        assert_eq!(fees.get(0, ItemSet::full(1)), &r(4, 1));
        let fees = make_entry_fees(&add, &f, &ints(&[0]), &r(0, 1), &caps).unwrap();
        assert_eq!(fees.get(0, ItemSet::full(1)), &r(0, 1));
        assert!(make_entry_fees(&add, &f, &ints(&[0]), &r(1, 1), &caps).is_err());
    }

    #[test]
    fn point_mass_fee_extracts_utility() {
        let caps = Caps::default();
        let add = XosValuation::additive(1, 2);
        let f = ProductDist::new(vec![vec![DiscreteDist::point(r(3, 1)), DiscreteDist::point(r(5, 1))]]).unwrap();
        let q = ints(&[1, 1]);
        let fees = make_entry_fees(&add, &f, &q, &r(1, 2), &caps).unwrap();
        assert_eq!(fees.get(0, ItemSet::full(2)), &r(6, 1));
        assert_eq!(fees.get(0, ItemSet::singleton(1)), &r(4, 1));
    }

    #[test]
    fn decomposition_identity() {
        let caps = Caps::default();
        let add = XosValuation::additive(2, 2);
        let d = DiscreteDist::uniform(&ints(&[1, 3])).unwrap();
        let f = ProductDist::new(vec![vec![d.clone(), d.clone()], vec![d.clone(), d]]).unwrap();
        let q = ints(&[1, 2]);
        let fees = make_entry_fees(&add, &f, &q, &r(1, 2), &caps).unwrap();
        let cfg = AspeConfig::new(q.clone(), fees).unwrap();
        let rev = aspe_revenue(&cfg, &add, &f, &caps).unwrap();
        assert_eq!(rev.total, &rev.entry_fee + &rev.item_price);
        let via_sold: Rat = rev.sold_prob.iter().zip(&q).map(|(p, x)| p * x).sum();
        assert_eq!(rev.item_price, via_sold);

        let zero = AspeConfig::new(q, EntryFees::zero(2, 2)).unwrap();
        assert_eq!(aspe_revenue(&zero, &add, &f, &caps).unwrap().entry_fee, Rat::zero());
    }
}

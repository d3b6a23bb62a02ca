use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::myerson::{opt_single_param, Environment};
use crate::error::{Caps, Error, Result};
use crate::mechanisms::{rspm_revenue_on, RspmConfig};
use crate::prob::{enumerate_row, ProductDist, TypeVec};
use crate::rational::Rat;
use crate::valuations::{Valuation, XosValuation};

/// Optimal revenue of the single-parameter copies auction: one independent
/// bidder per (buyer, item) pair under matching constraints.
pub fn opt_copies_ud(dist: &ProductDist, caps: &Caps) -> Result<Rat> {
    let env = Environment::Matching { n: dist.n(), m: dist.m() };
    let flat: Vec<_> = dist.entries().iter().flatten().cloned().collect();
    opt_single_param(&env, &flat, caps)
}

/// Optimal deterministic DIC-IR revenue for unit-demand buyers: a point for
/// one buyer, otherwise a `[lower, upper]` bracket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrevBracket {
    pub lower: Rat,
    pub upper: Rat,
}

impl DrevBracket {
    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }
}

/// Revenue of item prices `prices` (None = withheld) for one unit-demand buyer.
/// The buyer takes an item of maximal non-negative utility; ties go to the
/// higher price.
pub fn item_pricing_revenue(prices: &[Option<Rat>], types: &[(TypeVec, Rat)]) -> Rat {
    let mut total = Rat::zero();
    for (t, p) in types {
        let mut best: Option<(Rat, &Rat)> = None;
        for (j, price) in prices.iter().enumerate() {
            let Some(price) = price else { continue };
            let u = &t[j] - price;
            if u.is_negative() {
                continue;
            }
            let better = match &best {
                None => true,
                Some((bu, bp)) => u > *bu || (u == *bu && price > *bp),
            };
            if better {
                best = Some((u, price));
            }
        }
        if let Some((_, price)) = best {
            total += price * p;
        }
    }
    total
}

/// Candidate optimal item-price vectors for one unit-demand buyer.
///
/// Revenue is linear on each cell of the arrangement formed by the
/// hyperplanes `p_j = a` and `p_j - p_k = a - b` (a, b support values), and
/// upper semicontinuous under seller-favourable ties, so some vertex of the
/// arrangement is optimal. A vertex fixes every offered price through a rooted
/// spanning forest: roots sit at support values, and each edge `j -> k`
/// sets `p_j = p_k + a - b` with `a in supp_j`, `b in supp_k`.
pub fn pricing_vertices(supports: &[Vec<Rat>]) -> BTreeSet<Vec<Option<Rat>>> {
    let m = supports.len();
    let mut out = BTreeSet::new();
    out.insert(vec![None; m]);
    for offered in 1u32..(1 << m) {
        let items: Vec<usize> = (0..m).filter(|j| offered & (1 << j) != 0).collect();
        // parent[j]: None = root, Some(k) = hangs below k.
        let mut parent: Vec<Option<usize>> = vec![None; items.len()];
        loop {
            if is_forest(&parent) {
                assign_prices(&items, &parent, supports, m, &mut out);
            }
            if !next_parents(&mut parent) {
                break;
            }
        }
    }
    out
}

fn is_forest(parent: &[Option<usize>]) -> bool {
    (0..parent.len()).all(|start| {
        let mut cur = start;
        for _ in 0..=parent.len() {
            match parent[cur] {
                None => return true,
                Some(p) => cur = p,
            }
        }
        false
    })
}

#[allow(clippy::needless_range_loop)]
fn next_parents(parent: &mut [Option<usize>]) -> bool {
    let k = parent.len();
    for slot in 0..k {
        let next = match parent[slot] {
            None => Some(0),
            Some(p) => Some(p + 1),
        };
        let next = match next {
            Some(p) if p == slot => Some(p + 1),
            other => other,
        };
        if let Some(p) = next {
            if p < k {
                parent[slot] = Some(p);
                return true;
            }
        }
        parent[slot] = None;
    }
    false
}

#[allow(clippy::needless_range_loop)]
fn assign_prices(
    items: &[usize],
    parent: &[Option<usize>],
    supports: &[Vec<Rat>],
    m: usize,
    out: &mut BTreeSet<Vec<Option<Rat>>>,
) {
    // Order nodes so parents precede children.
    let mut order: Vec<usize> = Vec::with_capacity(items.len());
    while order.len() < items.len() {
        for s in 0..items.len() {
            if order.contains(&s) {
                continue;
            }
            if parent[s].is_none_or(|p| order.contains(&p)) {
                order.push(s);
            }
        }
    }
    let mut prices: Vec<Option<Rat>> = vec![None; m];
    fn rec(
        pos: usize,
        order: &[usize],
        items: &[usize],
        parent: &[Option<usize>],
        supports: &[Vec<Rat>],
        prices: &mut Vec<Option<Rat>>,
        out: &mut BTreeSet<Vec<Option<Rat>>>,
    ) {
        if pos == order.len() {
            out.insert(prices.clone());
            return;
        }
        let s = order[pos];
        let j = items[s];
        match parent[s] {
            None => {
                for a in &supports[j] {
                    prices[j] = Some(a.clone());
                    rec(pos + 1, order, items, parent, supports, prices, out);
                }
            }
            Some(ps) => {
                let k = items[ps];
                let pk = prices[k].clone().expect("parent priced first");
                for a in &supports[j] {
                    for b in &supports[k] {
                        prices[j] = Some(&pk + a - b);
                        rec(pos + 1, order, items, parent, supports, prices, out);
                    }
                }
            }
        }
        prices[j] = None;
    }
    rec(0, &order, items, parent, supports, &mut prices, out);
}

/// Best item pricing for one unit-demand buyer over the arrangement vertices.
pub fn drev_ud_single(dist: &ProductDist, caps: &Caps) -> Result<(Rat, Vec<Option<Rat>>)> {
    if dist.n() != 1 {
        return Err(Error::Config("exact deterministic revenue needs a single buyer".into()));
    }
    let types = enumerate_row(dist.row(0), caps)?;
    let supports: Vec<Vec<Rat>> = dist.row(0).iter().map(|d| d.support().cloned().collect()).collect();
    let mut best = (Rat::zero(), vec![None; dist.m()]);
    for prices in pricing_vertices(&supports) {
        let rev = item_pricing_revenue(&prices, &types);
        if rev > best.0 {
            best = (rev, prices);
        }
    }
    Ok(best)
}

/// Largest RSPM revenue with every posted price drawn from the support of
/// its single-item value `V_ij`, or withheld (priced above that support).
pub fn best_rspm<V: Valuation + ?Sized>(v: &V, dist: &ProductDist, caps: &Caps) -> Result<(Rat, RspmConfig)> {
    let (n, m) = (dist.n(), dist.m());
    let mut grids: Vec<Vec<Rat>> = Vec::with_capacity(n * m);
    for i in 0..n {
        let types = dist.buyer_types(i, caps)?;
        for j in 0..m {
            let mut g: BTreeSet<Rat> = types.iter().map(|(t, _)| v.single(i, t, j)).collect();
            let top = g.iter().next_back().cloned().unwrap_or_else(Rat::zero);
            g.insert(top + Rat::one());
            grids.push(g.into_iter().collect());
        }
    }
    let size: u128 = grids.iter().map(|g| g.len() as u128).product();
    caps.guard_joint("posted-price grid", size)?;
    let profiles = dist.profiles(caps)?;
    let mut idx = vec![0usize; n * m];
    let mut best: Option<(Rat, RspmConfig)> = None;
    loop {
        let xi: Vec<Vec<Rat>> =
            (0..n).map(|i| (0..m).map(|j| grids[i * m + j][idx[i * m + j]].clone()).collect()).collect();
        let cfg = RspmConfig::posted(xi)?;
        let rev = rspm_revenue_on(&cfg, v, &profiles);
        if best.as_ref().is_none_or(|(b, _)| rev > *b) {
            best = Some((rev, cfg));
        }
        let mut k = n * m;
        loop {
            if k == 0 {
                return Ok(best.expect("grid is non-empty"));
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < grids[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Deterministic DIC-IR revenue of unit-demand buyers. Exact for one buyer;
/// otherwise best support-grid RSPM below and the copies optimum above.
pub fn drev_ud(dist: &ProductDist, caps: &Caps) -> Result<DrevBracket> {
    if dist.n() == 1 {
        let (rev, _) = drev_ud_single(dist, caps)?;
        return Ok(DrevBracket { lower: rev.clone(), upper: rev });
    }
    let ud = XosValuation::unit_demand(dist.n(), dist.m());
    let (lower, _) = best_rspm(&ud, dist, caps)?;
    let upper = opt_copies_ud(dist, caps)?;
    Ok(DrevBracket { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::DiscreteDist;
    use crate::rational::r;

    fn ints(xs: &[i64]) -> Vec<Rat> {
        xs.iter().map(|&x| Rat::from_integer(x)).collect()
    }

    fn one_buyer(rows: Vec<DiscreteDist>) -> ProductDist {
        ProductDist::new(vec![rows]).unwrap()
    }

    #[test]
    fn copies_single_cell_is_myerson() {
        let caps = Caps::default();
        let f = one_buyer(vec![DiscreteDist::uniform(&ints(&[1, 2])).unwrap()]);
        assert_eq!(opt_copies_ud(&f, &caps).unwrap(), r(1, 1));
    }

    #[test]
    fn copies_two_iid_items() {
        // phi(1) = 0, phi(2) = 2; the max is 2 unless both values are 1.
        let caps = Caps::default();
        let d = DiscreteDist::uniform(&ints(&[1, 2])).unwrap();
        let f = one_buyer(vec![d.clone(), d]);
        assert_eq!(opt_copies_ud(&f, &caps).unwrap(), r(3, 2));
    }

    #[test]
    fn drev_two_prices() {
        let caps = Caps::default();
        let f = one_buyer(vec![DiscreteDist::uniform(&ints(&[1, 2])).unwrap()]);
        let b = drev_ud(&f, &caps).unwrap();
        assert!(b.is_exact());
        assert_eq!(b.lower, r(1, 1));
    }

    #[test]
    fn drev_point_mass_extracts_max() {
        let caps = Caps::default();
        let f = one_buyer(vec![DiscreteDist::point(r(3, 1)), DiscreteDist::point(r(5, 1))]);
        assert_eq!(drev_ud(&f, &caps).unwrap().lower, r(5, 1));
    }

    #[test]
    fn difference_vertices_can_beat_support_prices() {
        // Item 0 ~ {1: 3/4, 5: 1/4}, item 1 ~ {2, 3} uniform. Support prices top out at 19/8;
        // p = (4, 2) prices item 0 one unit above item 1's low value and earns 5/2.
        let caps = Caps::default();
        let f = one_buyer(vec![
            DiscreteDist::new([(r(1, 1), r(3, 4)), (r(5, 1), r(1, 4))]).unwrap(),
            DiscreteDist::uniform(&ints(&[2, 3])).unwrap(),
        ]);
        let types = enumerate_row(f.row(0), &caps).unwrap();
        let mut grid_best = Rat::zero();
        for a in [None, Some(r(1, 1)), Some(r(5, 1))] {
            for b in [None, Some(r(2, 1)), Some(r(3, 1))] {
                let rev = item_pricing_revenue(&[a.clone(), b.clone()], &types);
                grid_best = Rat::max_of(&grid_best, &rev).clone();
            }
        }
        assert_eq!(grid_best, r(19, 8));
        assert_eq!(item_pricing_revenue(&[Some(r(4, 1)), Some(r(2, 1))], &types), r(5, 2));
        let (best, _) = drev_ud_single(&f, &caps).unwrap();
        assert!(best >= r(5, 2));
    }

    #[test]
    fn drev_matches_fine_grid_search() {
        // Brute force over a 1/4-step price grid is a lower bound that the vertex search must meet.
        let caps = Caps::default();
        let f = one_buyer(vec![
            DiscreteDist::new([(r(1, 1), r(1, 3)), (r(3, 1), r(2, 3))]).unwrap(),
            DiscreteDist::new([(r(2, 1), r(1, 2)), (r(5, 2), r(1, 2))]).unwrap(),
        ]);
        let types = enumerate_row(f.row(0), &caps).unwrap();
        let grid: Vec<Option<Rat>> = std::iter::once(None).chain((0..=16).map(|k| Some(r(k, 4)))).collect();
        let mut brute = Rat::zero();
        for a in &grid {
            for b in &grid {
                let rev = item_pricing_revenue(&[a.clone(), b.clone()], &types);
                brute = Rat::max_of(&brute, &rev).clone();
            }
        }
        let (best, _) = drev_ud_single(&f, &caps).unwrap();
        assert!(best >= brute);
    }

    #[test]
    fn bracket_is_ordered() {
        let caps = Caps::default();
        let d = DiscreteDist::uniform(&ints(&[1, 3])).unwrap();
        let f = ProductDist::new(vec![vec![d.clone(), d.clone()], vec![d.clone(), d]]).unwrap();
        let b = drev_ud(&f, &caps).unwrap();
        assert!(b.lower <= b.upper);
        assert!(b.lower.is_positive());
    }

    #[test]
    fn forest_enumeration_counts() {
        // Rooted forests on k labelled nodes: (k+1)^(k-1).
        for k in 1..=4usize {
            let mut parent = vec![None; k];
            let mut count = 0;
            loop {
                if is_forest(&parent) {
                    count += 1;
                }
                if !next_parents(&mut parent) {
                    break;
                }
            }
            assert_eq!(count, (k + 1).pow(k as u32 - 1), "k={k}");
        }
    }
}

//! Sequential posted-price mechanisms and their revenue accounting.

mod aspe;
mod digital;
mod rspm;

pub use aspe::{
    aspe_revenue, aspe_revenue_on, demand_set, make_entry_fees, run_aspe, AspeConfig, AspeRevenue, EntryFees,
};
pub use digital::{availability_dists, b_floor, dg_entry_fee, SetDist};
pub use rspm::{rspm_revenue, rspm_revenue_on, run_rspm, RspmConfig};

use serde::{Deserialize, Serialize};

use crate::rational::Rat;
use crate::valuations::ItemSet;

/// Result of one run of a mechanism on a fixed type profile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismOutcome {
    pub bundles: Vec<ItemSet>,
    pub entry_fees: Vec<Rat>,
    pub item_prices: Vec<Rat>,
    pub sold: ItemSet,
}

impl MechanismOutcome {
    pub(crate) fn empty(n: usize) -> Self {
        MechanismOutcome {
            bundles: vec![ItemSet::EMPTY; n],
            entry_fees: vec![Rat::zero(); n],
            item_prices: vec![Rat::zero(); n],
            sold: ItemSet::EMPTY,
        }
    }

    pub fn entry_total(&self) -> Rat {
        self.entry_fees.iter().sum()
    }

    pub fn item_total(&self) -> Rat {
        self.item_prices.iter().sum()
    }

    pub fn revenue(&self) -> Rat {
        self.entry_total() + self.item_total()
    }

    /// Bundles are pairwise disjoint and their union is `sold`.
    pub fn is_feasible(&self) -> bool {
        let mut seen = ItemSet::EMPTY;
        for b in &self.bundles {
            if !b.is_disjoint(seen) {
                return false;
            }
            seen = seen.union(*b);
        }
        seen == self.sold
    }

    /// `buyer,bundle,entry_fee,item_price` rows, items separated by `;`.
    pub fn csv_rows(&self) -> Vec<String> {
        let mut rows = vec!["buyer,bundle,entry_fee,item_price".to_string()];
        for (i, b) in self.bundles.iter().enumerate() {
            let items: Vec<String> = b.iter().map(|j| j.to_string()).collect();
            rows.push(format!("{},{},{},{}", i, items.join(";"), self.entry_fees[i], self.item_prices[i]));
        }
        rows
    }
}

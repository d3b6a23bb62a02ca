//! Exact optimal-revenue oracles.

mod bic_lp;
mod constants;
mod copies;
mod myerson;

pub use bic_lp::{outcomes, rev_bic_lp, BundleRule, LpOptions, LpRevenue, SolutionConcept};
pub use constants::{constants, Constants};
pub use copies::{
    best_rspm, drev_ud, drev_ud_single, item_pricing_revenue, opt_copies_ud, pricing_vertices, DrevBracket,
};
pub use myerson::{ironed_virtuals, max_weight_matching, opt_single_param, Environment, IronedVirtuals};

use serde::{Deserialize, Serialize};

use super::MechanismOutcome;
use crate::error::{Caps, Error, Result};
use crate::prob::{ProductDist, Profile, TypeVec};
use crate::rational::Rat;
use crate::valuations::{ItemSet, Valuation};

/// Posted prices `xi[i][j]` and charged payments `p[i][j] <= xi[i][j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RspmConfig {
    pub xi: Vec<Vec<Rat>>,
    pub p: Vec<Vec<Rat>>,
}

impl RspmConfig {
    pub fn new(xi: Vec<Vec<Rat>>, p: Vec<Vec<Rat>>) -> Result<Self> {
        if xi.len() != p.len() || xi.iter().zip(&p).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::Shape("xi and p must have the same shape".into()));
        }
        for (row_x, row_p) in xi.iter().zip(&p) {
            for (x, q) in row_x.iter().zip(row_p) {
                if x.is_negative() || q.is_negative() || q > x {
                    return Err(Error::Config(format!("need 0 <= p <= xi, got p={q}, xi={x}")));
                }
            }
        }
        Ok(RspmConfig { xi, p })
    }

    /// Charges exactly the posted price.
    pub fn posted(xi: Vec<Vec<Rat>>) -> Result<Self> {
        let p = xi.clone();
        RspmConfig::new(xi, p)
    }

    pub fn n(&self) -> usize {
        self.xi.len()
    }
}

/// Buyers arrive in index order; each takes the remaining item maximizing
/// `V_ij - xi_ij` when that is non-negative and pays `p_ij`.
pub fn run_rspm<V: Valuation + ?Sized>(cfg: &RspmConfig, v: &V, t: &[TypeVec]) -> MechanismOutcome {
    let n = t.len();
    let mut out = MechanismOutcome::empty(n);
    let mut remaining = ItemSet::full(v.num_items());
    for (i, ti) in t.iter().enumerate() {
        let mut best: Option<(usize, Rat)> = None;
        for j in remaining.iter() {
            let u = v.single(i, ti, j) - &cfg.xi[i][j];
            if u.is_negative() {
                continue;
            }
            if best.as_ref().is_none_or(|(_, b)| &u > b) {
                best = Some((j, u));
            }
        }
        if let Some((j, _)) = best {
            out.bundles[i] = ItemSet::singleton(j);
            out.item_prices[i] = cfg.p[i][j].clone();
            out.sold = out.sold.insert(j);
            remaining = remaining.remove(j);
        }
    }
    out
}

/// Expected revenue over pre-enumerated profiles.
pub fn rspm_revenue_on<V: Valuation + ?Sized>(cfg: &RspmConfig, v: &V, profiles: &[Profile]) -> Rat {
    profiles.iter().map(|(t, p)| run_rspm(cfg, v, t).revenue() * p).sum()
}

pub fn rspm_revenue<V: Valuation + ?Sized>(cfg: &RspmConfig, v: &V, dist: &ProductDist, caps: &Caps) -> Result<Rat> {
    if cfg.n() != dist.n() {
        return Err(Error::Shape("price matrix and distribution disagree on n".into()));
    }
    Ok(rspm_revenue_on(cfg, v, &dist.profiles(caps)?))
}

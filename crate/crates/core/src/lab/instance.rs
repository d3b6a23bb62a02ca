use serde::{Deserialize, Serialize};

use crate::error::{Caps, Error, Result};
use crate::oracles::Environment;
use crate::prob::{v_dominates, ProductDist};
use crate::rational::{r, Rat};
use crate::valuations::{AnyValuation, Valuation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DominanceKind {
    /// `G_ij` dominates `F_ij` for every buyer and item.
    #[default]
    Coordinatewise,
    /// `G_i` dominates `F_i` under the buyer's valuation.
    Valuation,
}

/// Exact revenues certifying `REV(G) < REV(F)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub rev_f: Rat,
    pub rev_g: Rat,
    pub gap: Rat,
    /// `(buyer, item)` entries where `G` differs from `F`.
    pub strict: Vec<(usize, usize)>,
}

fn quarter() -> Rat {
    r(1, 4)
}

fn half() -> Rat {
    r(1, 2)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    pub seed: u64,
    #[serde(default = "quarter")]
    pub b: Rat,
    #[serde(default = "half")]
    pub q: Rat,
    #[serde(default)]
    pub dominance: DominanceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<Environment>,
    /// Item prices for the entry-fee mechanism; derived from `F` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<Vec<Rat>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
}

impl Params {
    pub fn new(seed: u64) -> Self {
        Params {
            seed,
            b: quarter(),
            q: half(),
            dominance: DominanceKind::Coordinatewise,
            environment: None,
            prices: None,
            certificate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub n: usize,
    pub m: usize,
    pub valuation: AnyValuation,
    #[serde(rename = "F")]
    pub f: ProductDist,
    #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
    pub g: Option<ProductDist>,
    pub params: Params,
}

impl Instance {
    /// Shape checks plus re-verification of the declared dominance relation.
    pub fn validate(&self, caps: &Caps) -> Result<()> {
        if self.valuation.num_buyers() != self.n || self.valuation.num_items() != self.m {
            return Err(Error::Shape(format!("valuation is not {} x {}", self.n, self.m)));
        }
        for (label, d) in std::iter::once(("F", &self.f)).chain(self.g.as_ref().map(|g| ("G", g))) {
            if d.n() != self.n || d.m() != self.m {
                return Err(Error::Shape(format!(
                    "{label} is {} x {}, expected {} x {}",
                    d.n(),
                    d.m(),
                    self.n,
                    self.m
                )));
            }
        }
        if let Some(env) = &self.params.environment {
            env.validate()?;
            if env.num_bidders() != self.n * self.m {
                return Err(Error::Shape("environment bidder count must equal n * m".into()));
            }
        }
        let b = &self.params.b;
        if !b.is_positive() || *b >= Rat::one() {
            return Err(Error::Domain(format!("b = {b} must lie in (0, 1)")));
        }
        let q = &self.params.q;
        if q.is_negative() || *q >= Rat::one() {
            return Err(Error::Domain(format!("q = {q} must lie in [0, 1)")));
        }
        if let Some(p) = &self.params.prices {
            if p.len() != self.m || p.iter().any(Rat::is_negative) {
                return Err(Error::Config("prices must be m non-negative values".into()));
            }
        }
        if let Some(g) = &self.g {
            match self.params.dominance {
                DominanceKind::Coordinatewise => {
                    if !self.f.dominated_by(g) {
                        return Err(Error::DominanceViolation);
                    }
                }
                DominanceKind::Valuation => {
                    for i in 0..self.n {
                        if v_dominates(&self.valuation, i, self.f.row(i), g.row(i), caps)?.is_none() {
                            return Err(Error::DominanceViolation);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str, caps: &Caps) -> Result<Self> {
        let inst: Instance = serde_json::from_str(text).map_err(|e| Error::Config(format!("instance JSON: {e}")))?;
        inst.validate(caps)?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instances always serialize");
        s.push('\n');
        s
    }
}

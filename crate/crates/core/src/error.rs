use crate::lp::LpError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{what} needs {needed} atoms/rows, over the cap of {cap}")]
    CapExceeded { what: &'static str, needed: u128, cap: u128 },
    #[error("first distribution is not dominated by the second")]
    DominanceViolation,
    #[error("no supporting prices within cap: {0}")]
    NoSupportingPrices(String),
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Enumeration guards shared by every exhaustive computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Caps {
    /// Maximum number of joint type profiles enumerated.
    pub joint: u64,
    /// Maximum `|S|` for exhaustive subset enumeration.
    pub subset: u32,
    /// Maximum `profiles x outcomes` for the revenue linear programs.
    pub lp: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { joint: 1_000_000, subset: 20, lp: 20_000 }
    }
}

impl Caps {
    pub(crate) fn guard_joint(&self, what: &'static str, needed: u128) -> Result<()> {
        if needed > self.joint as u128 {
            return Err(Error::CapExceeded { what, needed, cap: self.joint as u128 });
        }
        Ok(())
    }

    pub(crate) fn guard_subset(&self, what: &'static str, size: u32) -> Result<()> {
        if size > self.subset {
            return Err(Error::CapExceeded { what, needed: size as u128, cap: self.subset as u128 });
        }
        Ok(())
    }
}

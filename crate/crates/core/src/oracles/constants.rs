use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rat;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constants {
    pub lambda: Rat,
    pub c: Rat,
}

/// `lambda = 32a + 6(12 + 8/(1-b) + a(16/(b(1-b)) + 96/(1-b)))`,
/// `C = 5/(2(1-b)) + (b+1)/(2b(1-b))`.
pub fn constants(b: &Rat, alpha: &Rat) -> Result<Constants> {
    if !b.is_positive() || *b >= Rat::one() {
        return Err(Error::Domain(format!("b = {b} must lie strictly between 0 and 1")));
    }
    if *alpha < Rat::one() {
        return Err(Error::Domain(format!("alpha = {alpha} must be at least 1")));
    }
    let one = Rat::one();
    let nb = &one - b;
    let r = |x: i64| Rat::from_integer(x);
    let inner = r(12) + r(8) / &nb + alpha * (r(16) / (b * &nb) + r(96) / &nb);
    let lambda = r(32) * alpha + r(6) * inner;
    let c = r(5) / (r(2) * &nb) + (b + &one) / (r(2) * b * &nb);
    Ok(Constants { lambda, c })
}

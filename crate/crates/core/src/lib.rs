//! Exact-arithmetic toolkit for checking revenue monotonicity in
//! multi-item auctions over finite type spaces.

pub mod error;
pub mod lab;
pub mod lp;
pub mod mechanisms;
pub mod oracles;
pub mod prob;
pub mod rational;
pub mod valuations;

pub use error::{Caps, Error, Result};
pub use prob::{Coupling, DiscreteDist, ProductDist};
pub use rational::{r, Rat};
pub use valuations::{AnyValuation, ItemSet, Valuation, XosValuation};

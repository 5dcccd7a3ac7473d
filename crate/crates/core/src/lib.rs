//! Multilayer parking (random sequential adsorption without screening) on a
//! finite one-dimensional lattice.
//!
//! Particles arrive at sites `0..n_sites` and settle in the lowest layer where
//! the site and both horizontal neighbours are empty. The crate provides:
//!
//! * [`lattice`]: the configuration and the exact deposition rule.
//! * [`analytic`]: closed-form densities for the three-site system, exact
//!   end-densities as big rationals, and the distributions behind them.
//! * [`simulator`]: a seeded, thread-count independent Monte Carlo engine.
//! * [`oracle`]: brute-force enumeration used to cross-check the other two.
//!
//! Sites are 0-based. For the three-site system the centre is site `1`, with
//! site `0` on the left and site `2` on the right. Layers are 1-based.

pub mod analytic;
pub mod error;
pub mod fmt;
pub mod lattice;
pub mod oracle;
pub mod simulator;

pub use error::{Error, Result};
pub use lattice::{LatticeConfig, LatticeState, Neighborhood};

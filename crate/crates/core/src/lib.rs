//! Secrecy in three-node cascade networks over finite alphabets.
//!
//! Node 1 sees an i.i.d. source `X`, sends `M1` to node 2, which sends `M2` to
//! node 3. Nodes 2 and 3 emit actions `Y2`, `Y3`. An adversary sees both
//! messages and strictly-causal side information `W` and picks `Z` to
//! minimize a payoff. A shared secret key helps the network keep the payoff
//! high.
//!
//! * [`prob`]: dense joint tables and Shannon measures.
//! * [`payoff`]: payoff tables, log-loss, adversary best response.
//! * [`bounds`]: outer/inner region evaluation, candidate search, equivocation.
//! * [`sim`]: exact and Monte Carlo simulation of the superposition-codebook
//!   scheme with a likelihood encoder.
//! * [`example`]: the ternary all-distinct example with its closed-form curve.

pub mod bounds;
pub mod error;
pub mod example;
pub mod payoff;
pub mod prob;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};

/// Canonical variable names used by candidates and simulations.
pub mod names {
    pub const X: &str = "X";
    pub const Y2: &str = "Y2";
    pub const Y3: &str = "Y3";
    pub const U: &str = "U";
    pub const U1: &str = "U1";
    pub const U2: &str = "U2";
    pub const V1: &str = "V1";
    pub const V2: &str = "V2";
    pub const W1: &str = "W1";
    pub const W2: &str = "W2";
    pub const W3: &str = "W3";
}

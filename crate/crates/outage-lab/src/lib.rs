//! Outage probabilities and outage SNR exponents of coded modulation over
//! block-fading channels with noisy transmitter channel knowledge.
//!
//! - [`exponents`]: closed-form exponents, per-region tables and an exact LP oracle.
//! - [`channel`], [`power`]: the channel model and power allocation policies.
//! - [`constellation`], [`mi_table`]: AWGN mutual information and its interpolation tables.
//! - [`rotation`]: full-diversity rotations and their group mutual information.
//! - [`sim`]: Monte Carlo outage estimates, slope fits and sweeps.
//!
//! ```
//! use outage_lab::exponents::{outage_exponent_thm1, ExponentQuery};
//!
//! let q = ExponentQuery::new(4, 1, 1.0, 2, 1.0, f64::INFINITY);
//! assert_eq!(outage_exponent_thm1(&q).unwrap().d.value(), 12.0);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod constellation;
pub mod exponents;
pub mod mi_table;
pub mod power;
pub mod rng;
pub mod rotation;
pub(crate) mod serde_inf;
pub mod sim;
pub mod stats;

// Guide chapters are compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/mutual_information.md")]
    mod mutual_information {}
    #[doc = include_str!("../../../book/src/exponents.md")]
    mod exponents {}
    #[doc = include_str!("../../../book/src/power.md")]
    mod power {}
    #[doc = include_str!("../../../book/src/rotations.md")]
    mod rotations {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

//! Multi-axis concentration modulation (MAxCM) for diffusive molecular
//! communication.
//!
//! Symbols are vectors of molecule counts, one axis per molecule type. The
//! crate covers the channel (passive and absorbing receivers, static or
//! diffusing transceivers), counting-noise reception, constellation design,
//! maximum-likelihood and channel-free decoders, and exact or Monte Carlo
//! error-rate evaluation. The `molcomm` binary drives it from scenario files.
//!
//! ```
//! use molcomm::constellation::sbrsk;
//! use molcomm::decoder::{decode_channel_free, decode_ml_poisson};
//! use molcomm::reception::ReceivedVector;
//!
//! let cst = sbrsk(0.0, 400.0).unwrap();
//! let m = ReceivedVector(vec![7, 19]);
//! // symmetric ratio keying: the ML decision ignores gain and noise level
//! for (h, lambda) in [(0.0281, 10.0), (0.3, 90.0)] {
//!     assert_eq!(decode_ml_poisson(&m, &cst, h, lambda).unwrap(), decode_channel_free(&m, &cst).unwrap());
//! }
//! ```

pub mod channel;
pub mod cli;
pub mod constellation;
pub mod decoder;
pub mod error;
pub mod evaluation;
pub mod quadrature;
pub mod reception;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};

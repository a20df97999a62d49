//! Constellation design and evaluation for memoryless phase-noise channels.
//!
//! The channel is `r = x·e^{jθ} + n` with Gaussian phase noise
//! `θ ~ N(0, σ_p²)` and circular AWGN `n ~ CN(0, N0)`. The crate provides:
//!
//! - two approximate maximum-likelihood detectors and a Euclidean baseline
//!   ([`detectors`]);
//! - a union bound on the symbol error probability, its high-SNR floor, the
//!   mutual information of the detector's decision channel and of the
//!   continuous-output channel ([`metrics`]);
//! - multi-start gradient search and exhaustive APSK enumeration under an
//!   average-power constraint ([`optimize`]);
//! - seeded, thread-count independent Monte Carlo estimators for every
//!   analytic quantity ([`montecarlo`]);
//! - the front end behind the `pnopt` binary ([`cli`]).
//!
//! ```
//! use pnopt::{ChannelParams, Constellation};
//! use pnopt::metrics::{sep_floor, sep_union_bound};
//!
//! let psk = Constellation::psk(16, 1.0).unwrap();
//! let params = ChannelParams::from_eb_n0(0.01, 20.0, 16, 1.0).unwrap();
//! let bound = sep_union_bound(&psk, &params).unwrap();
//! assert!(bound.value >= sep_floor(&psk, 0.01).unwrap());
//! ```

pub mod cli;
pub mod constellation;
pub mod detectors;
pub mod error;
pub mod metrics;
pub mod model;
pub mod montecarlo;
pub mod optimize;

pub use constellation::{Constellation, SpiralParams, DEFAULT_POWER};
pub use detectors::{detect, Detector, DetectorKind, LikelihoodKind};
pub use error::{Error, Result};
pub use model::{sample_channel, ChannelParams, ComplexPoint, RngStream};

//! Cut-set upper bounds, quantize-map-forward lower bounds and supporting
//! verifiers for Gaussian relay networks.
//!
//! Everything except [`sim`] is generic over the scalar type; the aliases
//! below fix it to `f64` or `f32`.

pub mod baselines;
pub mod cutset;
pub mod error;
pub mod generate;
pub mod linalg;
pub mod network;
pub mod scalar;
pub mod sim;
pub mod unfold;

pub use error::{Error, Result};
pub use network::{parse_network, Cut, Field, NodeId, NodeSet, RelayNetwork};
pub use scalar::{Cplx, Real};

pub type Network = RelayNetwork<f64>;
pub type Network32 = RelayNetwork<f32>;
pub type Gains = linalg::GainMatrix<f64>;
pub type Gains32 = linalg::GainMatrix<f32>;
pub type Certificate = cutset::GapCertificate<f64>;
pub type Certificate32 = cutset::GapCertificate<f32>;

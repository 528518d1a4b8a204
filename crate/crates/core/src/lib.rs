//! Average multicast rate of finite-alphabet inputs under analog
//! beamforming with statistical CSI.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common case.

pub mod amr;
pub mod channel;
pub mod constellation;
pub mod error;
pub mod genetic;
pub mod info;
pub mod interp;
pub mod linalg;
pub mod manifold;
pub mod montecarlo;
pub mod quadrature;
pub mod real;
pub mod special;

pub use error::{Error, Result};
pub use real::Real;

pub type Constellation64 = constellation::Constellation<f64>;
pub type Constellation32 = constellation::Constellation<f32>;
pub type InfoTable64 = info::InfoTable<f64>;
pub type InfoTable32 = info::InfoTable<f32>;
pub type InfoEvaluator64 = info::InfoEvaluator<f64>;
pub type ChannelEnsemble64 = channel::ChannelEnsemble<f64>;
pub type ChannelEnsemble32 = channel::ChannelEnsemble<f32>;
pub type PhaseVector64 = channel::PhaseVector<f64>;
pub type PhaseVector32 = channel::PhaseVector<f32>;
pub type MrcLaw64 = channel::MrcLaw<f64>;
pub type QuadratureRule64 = quadrature::QuadratureRule<f64>;
pub type HermitianMatrix64 = linalg::HermitianMatrix<f64>;

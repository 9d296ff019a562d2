//! Weighted refined decoupling and Mizohata–Takeuchi estimates for well-curved curves, at desk scale.

pub mod cli;
pub mod error;
pub mod extension;
pub mod extremal;
pub mod geometry;
pub mod lab;
pub mod linalg;
pub mod scalar;
pub mod wavepacket;
pub mod weights;

pub use error::{LabError, Result};
pub use scalar::Real;

pub type Curve = geometry::CurveSpec<f64>;
pub type Frame = geometry::FrenetFrame<f64>;
pub type Box64 = geometry::AnisotropicBox<f64>;
pub type Sleeve64 = geometry::Sleeve<f64>;

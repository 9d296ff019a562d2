//! Wave packets adapted to the curvature sleeve.

pub mod bump;
pub mod field;
pub mod packet;
pub mod synth;

pub use bump::{phi1, plateau, BumpPair};
pub use field::{Field, FieldGrid};
pub use packet::{
    decompose, packet_l2_sq, packet_lp_norm, packet_value, packet_weight_eval, parseval_check,
    reconstruct, DecomposeMode, Decomposition, PacketSet, PacketWeight, WavePacketCoeff,
    DEFAULT_M_RADIUS, LEAKAGE_LIMIT,
};
pub use synth::{gaussian_profile, GaussianPacketSum};

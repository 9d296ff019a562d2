//! Curves, frames, curvature boxes, dual planks and the derived families.

pub mod curve;
pub mod family;
pub mod frame;
pub mod region;
pub mod sleeve;

pub use curve::{CurveKind, CurveSpec};
pub use family::{
    derived_family, hyperplane_slab, incidence_count, incidence_count_mode, FamilyKind, GeomFamily,
    IncidenceMode, Tiling,
};
pub use frame::{frenet_frame, FrenetFrame};
pub use region::{ball, for_each_lattice_point, lattice_points, Region, SlabSet};
pub use sleeve::{curvature_boxes, plank_index, AnisotropicBox, Plank, Scale, Sleeve};

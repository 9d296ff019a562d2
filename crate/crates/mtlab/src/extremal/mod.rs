//! Sharpness witnesses and the axiomatic decoupling checks.

pub mod axioms;
pub mod examples;
pub mod multibush;

pub use axioms::{
    admissible_levels, axiom_check, AxiomOptions, AxiomReport, AxiomResult, AxiomaticStructure,
};
pub use examples::{
    arc_coefficients, arc_sum_density, arc_sum_energy, arc_sum_instance, bump_weight_instance,
    bush_field, bush_instance, bush_report, sharpness_point, sharpness_sweep, single_packet,
    single_packet_instance, BushReport, SharpnessPoint, SharpnessSweep,
};
pub use multibush::{
    build_multibush, dyadic_ell, multibush_report, multibush_shape, order_robustness, replay,
    EnergyEstimate, MultibushPlan, MultibushReport, MultibushShape, OrderRobustness, TubeRef,
    TubeSystem, Variant,
};

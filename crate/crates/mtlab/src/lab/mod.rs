//! Left- and right-hand sides of the weighted inequalities, ratios and exponent fits.

pub mod corpus;
pub mod exponents;
pub mod fit;
pub mod instance;
pub mod refined;
pub mod sweep;

pub use corpus::{corpus_instance, run_corpora, CorpusConfig, CorpusReport, CorpusRow, WeightKind};
pub use exponents::{ExponentSummary, ExponentTable};
pub use fit::{log2_fit, ols, LineFit};
pub use instance::{
    evaluate, lhs, q_factor, rhs_functional, weighted_energy, Evaluation, ExtensionSource, IneqId,
    InequalityInstance, PacketField, PacketSource, Params, Source,
};
pub use refined::{
    bdg_decoupling_check, refined_decoupling_check, square_function_monitor, RefinedReport, Stratum,
};
pub use sweep::{exponent_sweep, Sidecar, SweepResult, SweepRow, CSV_HEADER};

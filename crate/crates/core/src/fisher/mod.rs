//! Classical and quantum Fisher information, monotone metrics and POVMs.

mod classical;
mod diff;
mod quantum;

pub use classical::{
    classical_fisher, fisher_of_probabilities, fisher_sum, FisherReport, FnModel,
    OutcomeDistribution, ProbabilityModel, SUPPORT_THRESHOLD,
};
pub use diff::{differentiate, Derivative, DiffSpec, FisherMethod, Linear};
pub use quantum::{
    fisher_of_povm, monotone_metric, qfi, qfi_pure, qfi_pure_family, sld, sld_measurement,
    DensityFamily, MetricTag, Povm, PureFamily,
};

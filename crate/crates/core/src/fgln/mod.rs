//! Fixed-gates linear networks: the model and its partial products,
//! balanced initialization, gradient-descent training, and the
//! singular-value velocity predictions the training dynamics are checked
//! against.

mod balanced;
mod model;
mod predict;
mod train;

pub use balanced::balanced_init;
pub use model::FglnModel;
pub use predict::{
    depth_scaling_fit, dyad_inner, general_dynamics_diagnostic, iterative_prediction,
    predicted_sdot_balanced, predicted_sdot_fixed_gates, prefix_log_spectra, sdot_from_factors,
    DepthScalingFit, DynamicsDiagnostic, IterativePrediction, SdotPrediction, TriangularFactors,
    SIMPLE_GAP_TOL,
};
pub use train::{
    train, LossKind, StepSeries, SyntheticTask, TraceRecord, TrainConfig, TrainDivergence,
    TrainFailure, TrainTrace,
};

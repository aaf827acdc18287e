//! Fixtures shared by the benchmarks.

use swmc::model::{simulate, InitialScale, LagSampler, ModelKind, PriorSpec};
use swmc::posterior::ModelPosterior;
use swmc::{ObservationSeries, Theta};

/// Parameter values used to simulate each model.
pub fn truth(kind: ModelKind) -> Theta {
    let v: &[f64] = match kind {
        ModelKind::Linear => &[0.9, 0.5, 1.0],
        ModelKind::Ou1d => &[0.5, 0.1, 1.0],
        ModelKind::Ou2d => &[0.0113, 0.6521, 0.0066, 0.1231, 0.3173],
    };
    kind.theta_from_values(v).expect("valid truth")
}

/// A simulated series of `n` points with unit lags.
pub fn series(kind: ModelKind, n: usize) -> ObservationSeries {
    let axes = if kind == ModelKind::Ou2d { 2 } else { 1 };
    simulate(&truth(kind), n, &LagSampler::Constant(1.0), &InitialScale::default(), axes, 7)
        .expect("simulation")
        .series
}

pub fn posterior(kind: ModelKind, n: usize) -> ModelPosterior {
    ModelPosterior::new(kind, series(kind, n), PriorSpec::default_for(kind), InitialScale::default())
}

//! Model families, transitions, priors and simulators.

mod grid;
mod prior;
mod simulate;
mod theta;
mod transition;

pub use grid::TimeGrid;
pub use prior::{log_prior, Prior, PriorSpec, LOG_FLAT_BOUND};
pub use simulate::{simulate, LagSampler, Simulation};
pub use theta::{LinearTheta, ModelKind, Ou1dTheta, Ou2dTheta, Theta};
pub use transition::{
    transition_linear, transition_ou1d, transition_ou2d, InitialCov, InitialScale, Transition, TransitionCoeffs1D,
    TransitionCoeffs2D, DEFAULT_POSITION_SCALE,
};

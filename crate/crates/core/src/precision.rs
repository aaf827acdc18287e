//! Joint precision of states and observations, and the batch log-posterior.
//!
//! With states `X` and observations `Y = X + noise`, the joint precision is
//! `[[A, -B], [-B, B]]` where `B` is the diagonal observation precision and
//! `A = P + B`, `P` being the banded prior precision of the states. Both
//! `A` and `P = A - B` are factored; the marginal of `Y` then follows from
//! `Y^T Sigma_YY^-1 Y = W^T L^-1 P y` with `W = L^-1 B y` and
//! `ln det Sigma_YY^-1 = sum ln B_ii - 2 sum ln L_ii + 2 sum ln R_ii`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2};

use crate::banded::{BandCholesky, BandMatrix};
use crate::error::{Error, Result};
use crate::model::{log_prior, InitialCov, InitialScale, PriorSpec, Theta, TimeGrid, Transition};
use crate::series::ObservationSeries;

/// Largest series the dense oracle will materialise.
pub const DENSE_LIMIT: usize = 500;

/// Banded precision blocks and their factors for one parameter point.
#[derive(Debug, Clone)]
pub struct PrecisionFactorization {
    /// State block `A` of the joint precision.
    pub a: BandMatrix,
    /// Prior state precision `A - B`.
    pub prior: BandMatrix,
    /// Diagonal of `B`.
    pub b: Vec<f64>,
    /// Factor of `A`.
    pub l: BandCholesky,
    /// Factor of `A - B`.
    pub r: BandCholesky,
    /// Whitened vectors `L^-1 B y`, one per axis, once [`whiten`](Self::whiten) has run.
    pub w: Vec<Vec<f64>>,
}

/// Log-posterior with its additive breakdown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPosteriorValue {
    pub value: f64,
    /// `-1/2 y^T Sigma_YY^-1 y`.
    pub quadratic: f64,
    /// `1/2 sum ln B_ii`.
    pub log_det_b: f64,
    /// `-sum ln L_ii`.
    pub log_det_l: f64,
    /// `sum ln R_ii`.
    pub log_det_r: f64,
    /// `-(m/2) ln 2 pi` for `m` scalar observations.
    pub constant: f64,
    pub log_prior: f64,
}

impl LogPosteriorValue {
    /// Value for a parameter outside the prior support.
    pub fn outside_support() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            quadratic: 0.0,
            log_det_b: 0.0,
            log_det_l: 0.0,
            log_det_r: 0.0,
            constant: 0.0,
            log_prior: f64::NEG_INFINITY,
        }
    }

    /// The log-likelihood alone.
    pub fn log_likelihood(&self) -> f64 {
        self.value - self.log_prior
    }

    pub fn breakdown_sum(&self) -> f64 {
        self.quadratic + self.log_det_b + self.log_det_l + self.log_det_r + self.constant + self.log_prior
    }
}

fn observation_precisions(theta: &Theta) -> Vec<f64> {
    let [s2, t2] = theta.observation_variances();
    match theta.kind().state_dim() {
        1 => vec![1.0 / s2],
        _ => vec![1.0 / s2, 1.0 / t2],
    }
}

/// Assembles `A`, `B` and factors `A` and `A - B`.
///
/// States are ordered in time; planar states interleave position and
/// velocity, so `A` has half-bandwidth 1 (scalar) or 3 (planar).
pub fn build_precision(theta: &Theta, grid: &TimeGrid, init: &InitialScale) -> Result<PrecisionFactorization> {
    let n = grid.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    let d = theta.kind().state_dim();
    let mut prior = BandMatrix::zeros(n * d, 2 * d - 1);
    match theta.initial_cov(init) {
        InitialCov::Scalar(v0) => {
            check_initial(v0)?;
            prior.add(0, 0, 1.0 / v0);
        }
        InitialCov::Planar(v0) => {
            check_initial(v0[0])?;
            check_initial(v0[1])?;
            prior.add(0, 0, 1.0 / v0[0]);
            prior.add(1, 1, 1.0 / v0[1]);
        }
    }
    for t in 1..n {
        match theta.transition(grid.gap(t))? {
            Transition::Scalar(c) => {
                let q = 1.0 / c.tau2;
                prior.add(t, t, q);
                prior.add(t - 1, t - 1, c.phi * c.phi * q);
                prior.add(t, t - 1, -c.phi * q);
            }
            Transition::Planar(c) => {
                // [S; D][S; D]^T over states (t-1, t)
                let (s, dd) = (c.s, c.d);
                add_block(&mut prior, 2 * (t - 1), 2 * (t - 1), &(s * s.transpose()));
                add_block(&mut prior, 2 * t, 2 * t, &(dd * dd.transpose()));
                add_block_full(&mut prior, 2 * t, 2 * (t - 1), &(dd * s.transpose()));
            }
        }
    }
    let obs = observation_precisions(theta);
    let b: Vec<f64> = (0..n * d).map(|i| obs[i % d]).collect();
    if b.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("observation variances must be positive".into()));
    }
    let a = prior.plus_diag(&b);
    let l = a.cholesky_with_jitter("A")?;
    let r = prior.cholesky_with_jitter("A - B")?;
    Ok(PrecisionFactorization { a, prior, b, l, r, w: Vec::new() })
}

fn check_initial(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("initial state variance must be positive, got {v}")))
    }
}

/// Adds a symmetric diagonal block at `(r0, r0)`.
fn add_block(m: &mut BandMatrix, r0: usize, c0: usize, blk: &Matrix2<f64>) {
    m.add(r0, c0, blk[(0, 0)]);
    m.add(r0 + 1, c0, 0.5 * (blk[(1, 0)] + blk[(0, 1)]));
    m.add(r0 + 1, c0 + 1, blk[(1, 1)]);
}

/// Adds an off-diagonal block at rows `r0..r0+2`, columns `c0..c0+2` (`r0 > c0`).
fn add_block_full(m: &mut BandMatrix, r0: usize, c0: usize, blk: &Matrix2<f64>) {
    for i in 0..2 {
        for j in 0..2 {
            m.add(r0 + i, c0 + j, blk[(i, j)]);
        }
    }
}

impl PrecisionFactorization {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Stores `W = L^-1 B y` for every axis of `y`.
    pub fn whiten(&mut self, y: &ObservationSeries) -> Result<()> {
        self.w = y
            .axes()
            .iter()
            .map(|axis| {
                if axis.len() != self.dim() {
                    return Err(Error::DimensionMismatch { expected: self.dim(), got: axis.len() });
                }
                let by: Vec<f64> = axis.iter().zip(&self.b).map(|(v, b)| v * b).collect();
                Ok(self.l.solve_lower(&by))
            })
            .collect::<Result<_>>()?;
        Ok(())
    }

    /// `y^T Sigma_YY^-1 y` for one axis, through `W^T (L^-1 P y)`.
    pub fn quadratic_form(&self, axis: usize, y: &[f64]) -> f64 {
        let v = self.l.solve_lower(&self.prior.mul_vec(y));
        self.w[axis].iter().zip(&v).map(|(a, b)| a * b).sum()
    }

    /// `ln det Sigma_YY^-1`.
    pub fn log_det_precision(&self) -> f64 {
        self.b.iter().map(|v| v.ln()).sum::<f64>() - 2.0 * self.l.log_diag_sum() + 2.0 * self.r.log_diag_sum()
    }

    /// Posterior mean of the states of one axis, `L^-T W`.
    pub fn state_mean(&self, axis: usize) -> Vec<f64> {
        self.l.solve_upper(&self.w[axis])
    }
}

/// Batch log-posterior of `theta` given every axis of `y`.
///
/// Returns `-inf` (not an error) when `theta` lies outside the prior support.
pub fn log_posterior(
    theta: &Theta,
    y: &ObservationSeries,
    priors: &PriorSpec,
    init: &InitialScale,
) -> Result<LogPosteriorValue> {
    let lp = log_prior(theta, priors)?;
    if lp == f64::NEG_INFINITY {
        return Ok(LogPosteriorValue::outside_support());
    }
    let mut fact = build_precision(theta, y.grid(), init)?;
    fact.whiten(y)?;
    let m = fact.dim() as f64;
    let n_axes = y.n_axes() as f64;
    let quadratic: f64 = (0..y.n_axes()).map(|a| -0.5 * fact.quadratic_form(a, y.axis(a))).sum();
    let log_det_b = n_axes * 0.5 * fact.b.iter().map(|v| v.ln()).sum::<f64>();
    let log_det_l = -n_axes * fact.l.log_diag_sum();
    let log_det_r = n_axes * fact.r.log_diag_sum();
    let constant = -n_axes * 0.5 * m * (2.0 * PI).ln();
    let mut out = LogPosteriorValue {
        value: 0.0,
        quadratic,
        log_det_b,
        log_det_l,
        log_det_r,
        constant,
        log_prior: lp,
    };
    out.value = out.breakdown_sum();
    Ok(out)
}

/// Dense marginal covariance of one axis of observations.
///
/// Built by forward covariance propagation of the state process, independent
/// of the precision assembly, then adding observation noise.
pub fn dense_oracle_covariance(theta: &Theta, grid: &TimeGrid, init: &InitialScale) -> Result<DMatrix<f64>> {
    let n = grid.len();
    if n > DENSE_LIMIT {
        return Err(Error::SizeGuard { n, limit: DENSE_LIMIT });
    }
    let mut cov = dense_state_covariance(theta, grid, init)?;
    let d = theta.kind().state_dim();
    let obs_var: Vec<f64> = observation_precisions(theta).iter().map(|p| 1.0 / p).collect();
    for i in 0..n * d {
        cov[(i, i)] += obs_var[i % d];
    }
    Ok(cov)
}

/// Dense prior covariance of the hidden states of one axis.
pub fn dense_state_covariance(theta: &Theta, grid: &TimeGrid, init: &InitialScale) -> Result<DMatrix<f64>> {
    let n = grid.len();
    if n > DENSE_LIMIT {
        return Err(Error::SizeGuard { n, limit: DENSE_LIMIT });
    }
    let d = theta.kind().state_dim();
    let mut cov = DMatrix::<f64>::zeros(n * d, n * d);
    // transition maps and noise covariances as d x d dense blocks
    let mut maps = Vec::with_capacity(n);
    let mut noises = Vec::with_capacity(n);
    for t in 1..n {
        match theta.transition(grid.gap(t))? {
            Transition::Scalar(c) => {
                maps.push(DMatrix::from_element(1, 1, c.phi));
                noises.push(DMatrix::from_element(1, 1, c.tau2));
            }
            Transition::Planar(c) => {
                maps.push(DMatrix::from_column_slice(2, 2, c.phi.as_slice()));
                noises.push(DMatrix::from_column_slice(2, 2, c.noise_cov().as_slice()));
            }
        }
    }
    let v0 = match theta.initial_cov(init) {
        InitialCov::Scalar(v) => DMatrix::from_element(1, 1, v),
        InitialCov::Planar(v) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v.as_slice())),
    };
    cov.view_mut((0, 0), (d, d)).copy_from(&v0);
    for t in 1..n {
        let f = &maps[t - 1];
        // Cov(X_t, X_s) = F_t Cov(X_{t-1}, X_s) for s < t
        for s in 0..t {
            let prev = cov.view((d * (t - 1), d * s), (d, d)).clone_owned();
            let blk = f * prev;
            cov.view_mut((d * t, d * s), (d, d)).copy_from(&blk);
            cov.view_mut((d * s, d * t), (d, d)).copy_from(&blk.transpose());
        }
        let prev = cov.view((d * (t - 1), d * (t - 1)), (d, d)).clone_owned();
        let var = f * prev * f.transpose() + &noises[t - 1];
        cov.view_mut((d * t, d * t), (d, d)).copy_from(&var);
    }
    Ok(cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate, LagSampler, ModelKind, Prior};
    use approx::assert_relative_eq;

    fn flat(kind: ModelKind) -> PriorSpec {
        let big = Prior::LogFlat { lo: 1e-300, hi: 1e300 };
        let priors = (0..kind.param_dim())
            .map(|i| if kind.is_log_coord(i) { big } else { Prior::Uniform { lo: -10.0, hi: 10.0 } })
            .collect();
        PriorSpec::new(kind, priors).unwrap()
    }

    #[test]
    fn single_point_linear_blocks() {
        let th = ModelKind::Linear.theta_from_values(&[0.9, 0.5, 1.0]).unwrap();
        let grid = TimeGrid::regular(1, 1.0);
        let f = build_precision(&th, &grid, &InitialScale::fixed(0.0)).unwrap();
        assert_relative_eq!(f.a.get(0, 0), 3.0, epsilon = 1e-14);
        assert_relative_eq!(f.b[0], 1.0, epsilon = 1e-14);
        let dense = dense_oracle_covariance(&th, &grid, &InitialScale::fixed(0.0)).unwrap();
        assert_relative_eq!(dense[(0, 0)], 1.5, epsilon = 1e-14);
    }

    #[test]
    fn single_point_log_density() {
        let th = ModelKind::Linear.theta_from_values(&[0.9, 0.5, 1.0]).unwrap();
        let y = ObservationSeries::univariate(TimeGrid::regular(1, 1.0), vec![0.0]).unwrap();
        let v = log_posterior(&th, &y, &flat(ModelKind::Linear), &InitialScale::fixed(0.0)).unwrap();
        assert_eq!(v.quadratic, 0.0);
        let likelihood_without_constant = v.log_likelihood() - v.constant;
        assert_relative_eq!(likelihood_without_constant, 0.5 * (1.0f64 / 1.5).ln(), epsilon = 1e-12);
        assert_relative_eq!(likelihood_without_constant, -0.202_732_554_054_082_2, epsilon = 1e-12);
        assert_relative_eq!(v.value, v.breakdown_sum());
    }

    #[test]
    fn decoupled_states_have_diagonal_precision() {
        let th = ModelKind::Linear.theta_from_values(&[0.0, 0.3, 1.0]).unwrap();
        let f = build_precision(&th, &TimeGrid::regular(10, 1.0), &InitialScale::default()).unwrap();
        assert_eq!(f.a.effective_bandwidth(), 0);
        let th = ModelKind::Linear.theta_from_values(&[0.4, 0.3, 1.0]).unwrap();
        let f = build_precision(&th, &TimeGrid::regular(10, 1.0), &InitialScale::default()).unwrap();
        assert_eq!(f.a.effective_bandwidth(), 1);
    }

    #[test]
    fn zero_observations_give_zero_quadratic() {
        let th = ModelKind::Ou2d.theta_from_values(&[0.1, 0.5, 0.2, 0.3, 0.4]).unwrap();
        let grid = TimeGrid::new(vec![0.0, 1.0, 1.7, 4.0]).unwrap();
        let y = ObservationSeries::new(grid, 2, vec![vec![0.0; 8]]).unwrap();
        let v = log_posterior(&th, &y, &flat(ModelKind::Ou2d), &InitialScale::default()).unwrap();
        assert_eq!(v.quadratic, 0.0);
    }

    /// Symbolic assembly: the prior precision of states `X` with
    /// `X_1 ~ N(0, V0)`, `X_t = F X_{t-1} + N(0, Q)` is `G^T blockdiag(V0^-1, Q^-1, ...) G`
    /// where `G` maps states to innovations.
    fn brute_force_prior_precision(theta: &Theta, grid: &TimeGrid, init: &InitialScale) -> DMatrix<f64> {
        let n = grid.len();
        let d = theta.kind().state_dim();
        let mut g = DMatrix::<f64>::identity(n * d, n * d);
        let mut inv_noise = DMatrix::<f64>::zeros(n * d, n * d);
        match theta.initial_cov(init) {
            InitialCov::Scalar(v) => inv_noise[(0, 0)] = 1.0 / v,
            InitialCov::Planar(v) => {
                inv_noise[(0, 0)] = 1.0 / v[0];
                inv_noise[(1, 1)] = 1.0 / v[1];
            }
        }
        for t in 1..n {
            let (f, q) = match theta.transition(grid.gap(t)).unwrap() {
                Transition::Scalar(c) => (DMatrix::from_element(1, 1, c.phi), DMatrix::from_element(1, 1, c.tau2)),
                Transition::Planar(c) => (
                    DMatrix::from_column_slice(2, 2, c.phi.as_slice()),
                    DMatrix::from_column_slice(2, 2, c.noise_cov().as_slice()),
                ),
            };
            g.view_mut((d * t, d * (t - 1)), (d, d)).copy_from(&(-f));
            inv_noise.view_mut((d * t, d * t), (d, d)).copy_from(&q.try_inverse().unwrap());
        }
        g.transpose() * inv_noise * g
    }

    #[test]
    fn planar_assembly_matches_brute_force() {
        let th = ModelKind::Ou2d.theta_from_values(&[0.3, 0.6, 0.4, 0.2, 0.5]).unwrap();
        let grid = TimeGrid::new(vec![0.0, 0.8, 2.1]).unwrap();
        let init = InitialScale::planar(2.0, 0.7);
        let f = build_precision(&th, &grid, &init).unwrap();
        let brute = brute_force_prior_precision(&th, &grid, &init);
        assert!((f.prior.to_dense() - &brute).abs().max() < 1e-10 * brute.abs().max());
        assert_eq!(f.a.effective_bandwidth(), 3);
        let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(f.b.clone()));
        assert!((f.a.to_dense() - (brute + b)).abs().max() < 1e-9);
    }

    #[test]
    fn factors_reconstruct() {
        let th = ModelKind::Ou2d.theta_from_values(&[0.05, 0.6, 0.01, 0.12, 0.31]).unwrap();
        let sim = simulate(&th, 40, &LagSampler::InverseGamma { alpha: 2.0, beta: 1.0 }, &InitialScale::default(), 1, 3)
            .unwrap();
        let f = build_precision(&th, sim.grid(), &InitialScale::default()).unwrap();
        let l = f.l.to_dense();
        let r = f.r.to_dense();
        let a = f.a.to_dense();
        let p = f.prior.to_dense();
        assert!((&l * l.transpose() - &a).abs().max() < 1e-10 * a.abs().max());
        assert!((&r * r.transpose() - &p).abs().max() < 1e-10 * p.abs().max());
    }

    #[test]
    fn oracle_equals_precision_inverse_form() {
        for kind in ModelKind::ALL {
            let th = match kind {
                ModelKind::Linear => kind.theta_from_values(&[0.7, 0.4, 0.9]).unwrap(),
                ModelKind::Ou1d => kind.theta_from_values(&[0.5, 0.1, 1.0]).unwrap(),
                ModelKind::Ou2d => kind.theta_from_values(&[0.2, 0.3, 0.5, 0.6, 0.4]).unwrap(),
            };
            let init = InitialScale::planar(3.0, 1.0);
            let grid = TimeGrid::new((1..=30).map(|i| i as f64 * 0.7 + (i as f64).sin() * 0.2).collect()).unwrap();
            let f = build_precision(&th, &grid, &init).unwrap();
            let a_inv = f.a.to_dense().try_inverse().unwrap();
            let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(f.b.clone()));
            let b_inv = b.clone().try_inverse().unwrap();
            let m = f.dim();
            let via_blocks = (DMatrix::identity(m, m) - a_inv * b).try_inverse().unwrap() * b_inv;
            let dense = dense_oracle_covariance(&th, &grid, &init).unwrap();
            let scale = dense.abs().max();
            assert!((via_blocks - &dense).abs().max() < 1e-8 * scale, "{kind}");
            assert!((&dense - dense.transpose()).abs().max() < 1e-10 * scale);

            // determinant identity
            let chol = dense.clone().cholesky().unwrap();
            let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            assert_relative_eq!(f.log_det_precision(), -log_det, epsilon = 1e-8);
        }
    }

    #[test]
    fn size_guard() {
        let th = ModelKind::Linear.theta_from_values(&[0.7, 0.4, 0.9]).unwrap();
        let grid = TimeGrid::regular(501, 1.0);
        assert_eq!(
            dense_oracle_covariance(&th, &grid, &InitialScale::default()).unwrap_err(),
            Error::SizeGuard { n: 501, limit: 500 }
        );
    }

    #[test]
    fn outside_support_is_negative_infinity() {
        let th = ModelKind::Linear.theta_from_values(&[1.5, 0.4, 0.9]).unwrap();
        let y = ObservationSeries::univariate(TimeGrid::regular(2, 1.0), vec![0.1, 0.2]).unwrap();
        let v = log_posterior(&th, &y, &PriorSpec::default_for(ModelKind::Linear), &InitialScale::default()).unwrap();
        assert_eq!(v.value, f64::NEG_INFINITY);
    }
}

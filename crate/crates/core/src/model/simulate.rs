use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::grid::TimeGrid;
use super::theta::Theta;
use super::transition::{InitialCov, InitialScale, Transition};
use crate::error::{Error, Result};
use crate::rng::{substream, SimRng};
use crate::series::ObservationSeries;

/// Distribution of the gaps between consecutive observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LagSampler {
    Constant(f64),
    /// Inverse gamma with shape `alpha` and scale `beta`.
    InverseGamma { alpha: f64, beta: f64 },
}

impl LagSampler {
    /// Draws `n` gaps.
    pub fn draw(&self, n: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
        match *self {
            LagSampler::Constant(dt) => {
                if dt > 0.0 && dt.is_finite() {
                    Ok(vec![dt; n])
                } else {
                    Err(Error::NonPositiveGap(dt))
                }
            }
            LagSampler::InverseGamma { alpha, beta } => {
                let g = Gamma::new(alpha, 1.0 / beta)
                    .map_err(|e| Error::InvalidParameter(format!("lag distribution: {e}")))?;
                Ok((0..n).map(|_| 1.0 / g.sample(rng)).collect())
            }
        }
    }
}

impl std::fmt::Display for LagSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            LagSampler::Constant(dt) => write!(f, "constant:{dt}"),
            LagSampler::InverseGamma { alpha, beta } => write!(f, "ig:{alpha},{beta}"),
        }
    }
}

impl std::str::FromStr for LagSampler {
    type Err = Error;

    /// `constant:DT` or `ig:ALPHA,BETA`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad lag distribution {s:?}; expected constant:DT or ig:A,B"));
        let (name, args) = s.trim().split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = args.split(',').map(|v| v.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        let ok = |v: f64| v > 0.0 && v.is_finite();
        match (name.trim(), nums.as_slice()) {
            ("constant", [dt]) if ok(*dt) => Ok(LagSampler::Constant(*dt)),
            ("ig", [a, b]) if ok(*a) && ok(*b) => Ok(LagSampler::InverseGamma { alpha: *a, beta: *b }),
            _ => Err(bad()),
        }
    }
}

/// A synthetic data set with its hidden path.
#[derive(Debug, Clone)]
pub struct Simulation {
    /// Hidden states per axis, laid out like the observations.
    pub states: Vec<Vec<f64>>,
    pub series: ObservationSeries,
}

impl Simulation {
    pub fn grid(&self) -> &TimeGrid {
        self.series.grid()
    }
}

/// Draws `n` points of a hidden path and its noisy observations on each of `n_axes` axes.
///
/// Time starts at zero and the first point sits one gap later. Gaps come
/// from stream 0 of `seed`; axis `k` uses stream `k + 1`.
pub fn simulate(
    theta: &Theta,
    n: usize,
    lags: &LagSampler,
    init: &InitialScale,
    n_axes: usize,
    seed: u64,
) -> Result<Simulation> {
    if n == 0 || n_axes == 0 {
        return Err(Error::InvalidParameter("simulation needs n >= 1 and at least one axis".into()));
    }
    let gaps = lags.draw(n, &mut substream(seed, 0))?;
    let mut t = 0.0;
    let times: Vec<f64> = gaps
        .iter()
        .map(|g| {
            t += g;
            t
        })
        .collect();
    let grid = TimeGrid::new(times)?;

    let mut states = Vec::with_capacity(n_axes);
    let mut axes = Vec::with_capacity(n_axes);
    for a in 0..n_axes {
        let mut rng = substream(seed, a as u64 + 1);
        let (x, y) = match theta.initial_cov(init) {
            InitialCov::Scalar(v0) => simulate_scalar(theta, &grid, v0, init, &mut rng)?,
            InitialCov::Planar(v0) => simulate_planar(theta, &grid, v0, &mut rng)?,
        };
        states.push(x);
        axes.push(y);
    }
    let series = ObservationSeries::new(grid, theta.kind().state_dim(), axes)?;
    Ok(Simulation { states, series })
}

fn normal(rng: &mut SimRng) -> f64 {
    rng.sample(StandardNormal)
}

fn simulate_scalar(
    theta: &Theta,
    grid: &TimeGrid,
    v0: f64,
    init: &InitialScale,
    rng: &mut SimRng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sigma = theta.observation_variances()[0].sqrt();
    let mut x = match theta {
        // draw the origin, then take the first transition
        Theta::Linear(t) => {
            let l0 = init.position.unwrap_or(0.0);
            let x0 = l0 * normal(rng);
            t.phi * x0 + t.tau2().sqrt() * normal(rng)
        }
        _ => v0.sqrt() * normal(rng),
    };
    let mut xs = Vec::with_capacity(grid.len());
    let mut ys = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        if i > 0 {
            let Transition::Scalar(c) = theta.transition(grid.gap(i))? else { unreachable!() };
            x = c.phi * x + c.tau2.sqrt() * normal(rng);
        }
        xs.push(x);
        ys.push(x + sigma * normal(rng));
    }
    Ok((xs, ys))
}

fn simulate_planar(theta: &Theta, grid: &TimeGrid, v0: Vector2<f64>, rng: &mut SimRng) -> Result<(Vec<f64>, Vec<f64>)> {
    let [s2, t2] = theta.observation_variances();
    let (so, to) = (s2.sqrt(), t2.sqrt());
    let mut state = Vector2::new(v0[0].sqrt() * normal(rng), v0[1].sqrt() * normal(rng));
    let mut xs = Vec::with_capacity(2 * grid.len());
    let mut ys = Vec::with_capacity(2 * grid.len());
    for i in 0..grid.len() {
        if i > 0 {
            let Transition::Planar(c) = theta.transition(grid.gap(i))? else { unreachable!() };
            let chol = cholesky2(&c.noise_cov());
            state = c.phi * state + chol * Vector2::new(normal(rng), normal(rng));
        }
        xs.extend_from_slice(&[state[0], state[1]]);
        ys.extend_from_slice(&[state[0] + so * normal(rng), state[1] + to * normal(rng)]);
    }
    Ok((xs, ys))
}

/// Lower Cholesky factor of a 2x2 SPD matrix.
fn cholesky2(m: &Matrix2<f64>) -> Matrix2<f64> {
    let l00 = m[(0, 0)].sqrt();
    let l10 = m[(1, 0)] / l00;
    let l11 = (m[(1, 1)] - l10 * l10).max(0.0).sqrt();
    Matrix2::new(l00, 0.0, l10, l11)
}

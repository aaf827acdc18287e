use std::ops::Range;

use crate::error::{Error, Result};
use crate::model::TimeGrid;

/// Timestamped observations on one or more independent axes.
///
/// Every axis shares the time grid and the parameters. Each axis stores
/// `state_dim` values per time point, interleaved in time order (for the
/// planar model: position, velocity, position, velocity, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    grid: TimeGrid,
    state_dim: usize,
    axes: Vec<Vec<f64>>,
    pub units: String,
}

impl ObservationSeries {
    pub fn new(grid: TimeGrid, state_dim: usize, axes: Vec<Vec<f64>>) -> Result<Self> {
        if state_dim == 0 || axes.is_empty() {
            return Err(Error::InvalidParameter("series needs at least one axis".into()));
        }
        for axis in &axes {
            if axis.len() != grid.len() * state_dim {
                return Err(Error::DimensionMismatch { expected: grid.len() * state_dim, got: axis.len() });
            }
            if let Some(i) = axis.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("non-finite observation at time index {}", i / state_dim)));
            }
        }
        Ok(Self { grid, state_dim, axes, units: String::new() })
    }

    /// A single scalar axis.
    pub fn univariate(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, 1, vec![values])
    }

    /// An empty series ready for [`push`](Self::push).
    pub fn empty(state_dim: usize, n_axes: usize) -> Self {
        Self { grid: TimeGrid::default(), state_dim, axes: vec![Vec::new(); n_axes], units: String::new() }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn n_axes(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn axis(&self, a: usize) -> &[f64] {
        &self.axes[a]
    }

    /// Observation vector of axis `a` at time index `t`.
    pub fn obs(&self, a: usize, t: usize) -> &[f64] {
        &self.axes[a][t * self.state_dim..(t + 1) * self.state_dim]
    }

    /// The sub-series on time indices `range`.
    pub fn window(&self, range: Range<usize>) -> Self {
        let d = self.state_dim;
        Self {
            grid: self.grid.slice(range.clone()),
            state_dim: d,
            axes: self.axes.iter().map(|a| a[range.start * d..range.end * d].to_vec()).collect(),
            units: self.units.clone(),
        }
    }

    /// Appends one time point; `values` holds `state_dim` entries per axis, axis-major.
    pub fn push(&mut self, time: f64, values: &[f64]) -> Result<()> {
        let d = self.state_dim;
        if values.len() != d * self.axes.len() {
            return Err(Error::DimensionMismatch { expected: d * self.axes.len(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite observation at time {time}")));
        }
        self.grid.push(time)?;
        for (axis, chunk) in self.axes.iter_mut().zip(values.chunks(d)) {
            axis.extend_from_slice(chunk);
        }
        Ok(())
    }

    /// All values at time index `t`, axis-major (the layout `push` accepts).
    pub fn row(&self, t: usize) -> Vec<f64> {
        (0..self.axes.len()).flat_map(|a| self.obs(a, t).to_vec()).collect()
    }
}

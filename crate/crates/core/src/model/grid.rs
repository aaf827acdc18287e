use crate::error::{Error, Result};

/// Observation times, strictly increasing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeGrid {
    timestamps: Vec<f64>,
}

impl TimeGrid {
    pub fn new(timestamps: Vec<f64>) -> Result<Self> {
        for (i, w) in timestamps.windows(2).enumerate() {
            let (prev, next) = (w[0], w[1]);
            if !next.is_finite() || !prev.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite timestamp near index {}", i + 1)));
            }
            if next == prev {
                return Err(Error::DuplicateTimestamp { index: i + 1, time: next });
            }
            if next < prev {
                return Err(Error::NonMonotoneTime { index: i + 1, prev, next });
            }
        }
        if timestamps.len() == 1 && !timestamps[0].is_finite() {
            return Err(Error::InvalidParameter("non-finite timestamp at index 0".into()));
        }
        Ok(Self { timestamps })
    }

    /// `n` points spaced `dt` apart starting at `dt`.
    pub fn regular(n: usize, dt: f64) -> Self {
        Self { timestamps: (1..=n).map(|i| i as f64 * dt).collect() }
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn time(&self, i: usize) -> f64 {
        self.timestamps[i]
    }

    /// Gap leading into point `i` (`i >= 1`).
    pub fn gap(&self, i: usize) -> f64 {
        self.timestamps[i] - self.timestamps[i - 1]
    }

    /// All `len() - 1` gaps.
    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.timestamps.windows(2).map(|w| w[1] - w[0])
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self { timestamps: self.timestamps[range].to_vec() }
    }

    /// Appends a point; it must be later than the current last point.
    pub fn push(&mut self, time: f64) -> Result<()> {
        if !time.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite timestamp at index {}", self.len())));
        }
        if let Some(&last) = self.timestamps.last() {
            if time == last {
                return Err(Error::DuplicateTimestamp { index: self.len(), time });
            }
            if !(time > last) {
                return Err(Error::NonMonotoneTime { index: self.len(), prev: last, next: time });
            }
        }
        self.timestamps.push(time);
        Ok(())
    }
}

use std::ops::Range;

/// Outcome of one sampler iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepFlags {
    /// Coordinate moved by a one-at-a-time proposal; `None` for joint moves.
    pub coord: Option<usize>,
    /// Passed the first (surrogate) stage; equals the final decision for single-stage samplers.
    pub stage1: bool,
    /// Accepted overall.
    pub stage2: bool,
}

/// Samples (one row per iteration) with per-iteration acceptance flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    dim: usize,
    samples: Vec<f64>,
    pub flags: Vec<StepFlags>,
    /// Calls to the expensive target inside the sampling loop.
    pub expensive_evals: usize,
    /// Seconds spent in the sampling loop.
    pub wall_time: f64,
}

impl Chain {
    pub fn with_capacity(dim: usize, n: usize) -> Self {
        Self { dim, samples: Vec::with_capacity(dim * n), flags: Vec::with_capacity(n), expensive_evals: 0, wall_time: 0.0 }
    }

    /// Builds a chain from rows, without flags.
    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Self {
        let mut c = Self::with_capacity(dim, rows.len());
        for r in rows {
            assert_eq!(r.len(), dim);
            c.samples.extend_from_slice(r);
            c.flags.push(StepFlags { coord: None, stage1: true, stage2: true });
        }
        c
    }

    pub fn push(&mut self, x: &[f64], flags: StepFlags) {
        debug_assert_eq!(x.len(), self.dim);
        self.samples.extend_from_slice(x);
        self.flags.push(flags);
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.len().checked_sub(1).map(|i| self.sample(i))
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks(self.dim.max(1))
    }

    /// Values of coordinate `j` over the chain.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        let n = self.len().max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    pub fn stage1_accepts(&self) -> usize {
        self.flags.iter().filter(|f| f.stage1).count()
    }

    pub fn accepts(&self) -> usize {
        self.flags.iter().filter(|f| f.stage2).count()
    }

    /// Fraction of proposals passing stage one.
    pub fn alpha1(&self) -> f64 {
        ratio(self.stage1_accepts(), self.len())
    }

    /// Fraction of stage-one survivors accepted at stage two.
    pub fn alpha2(&self) -> f64 {
        ratio(self.accepts(), self.stage1_accepts())
    }

    /// Overall acceptance rate.
    pub fn acceptance(&self) -> f64 {
        ratio(self.accepts(), self.len())
    }

    /// Per-coordinate acceptance of one-at-a-time moves within `range`.
    pub fn coord_acceptance(&self, range: Range<usize>) -> Vec<f64> {
        let mut tried = vec![0usize; self.dim];
        let mut ok = vec![0usize; self.dim];
        for f in &self.flags[range] {
            if let Some(c) = f.coord {
                tried[c] += 1;
                ok[c] += f.stage2 as usize;
            }
        }
        ok.iter().zip(&tried).map(|(&a, &t)| ratio(a, t)).collect()
    }

    /// Every `k`-th row starting at `start`.
    pub fn thin(&self, start: usize, k: usize) -> Chain {
        let mut c = Chain::with_capacity(self.dim, (self.len() - start.min(self.len())) / k.max(1) + 1);
        for i in (start..self.len()).step_by(k.max(1)) {
            c.push(self.sample(i), self.flags[i]);
        }
        c.wall_time = self.wall_time;
        c
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        f64::NAN
    } else {
        a as f64 / b as f64
    }
}

//! Integrated autocorrelation time, effective sample size and per-time efficiency.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::sampler::{da_mh, Chain, LogDensity, SurrogatePosterior};

/// Autocorrelations below this end the IAT sum.
pub const CUT_THRESHOLD: f64 = 0.05;

fn centred(x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let var = c.iter().map(|v| v * v).sum::<f64>() / n;
    if !(var > 0.0) || x.len() < 2 {
        return Err(Error::ZeroVariance);
    }
    Ok((c, var))
}

fn lag(c: &[f64], var: f64, k: usize) -> f64 {
    let n = c.len();
    c[..n - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / (n as f64 * var)
}

/// Autocorrelations `rho_0..=rho_max_lag` with the biased `1/n` normalisation.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let (c, var) = centred(x)?;
    Ok((0..=max_lag.min(x.len() - 1)).map(|k| lag(&c, var, k)).collect())
}

/// Integrated autocorrelation time and the lag at which its sum stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Iat {
    pub tau: f64,
    pub k_cut: usize,
}

/// `1 + 2 sum_{k=1}^{k_cut} rho_k`, where `k_cut` is the first lag with `rho_k < 0.05`; at least 1.
pub fn iat(x: &[f64]) -> Result<Iat> {
    let (c, var) = centred(x)?;
    let mut sum = 0.0;
    let mut k = 1;
    while k < c.len() {
        let r = lag(&c, var, k);
        sum += r;
        if r < CUT_THRESHOLD {
            break;
        }
        k += 1;
    }
    Ok(Iat { tau: (1.0 + 2.0 * sum).max(1.0), k_cut: k.min(c.len() - 1) })
}

/// `n / tau`.
pub fn ess(x: &[f64]) -> Result<f64> {
    Ok(x.len() as f64 / iat(x)?.tau)
}

/// Efficiency summary of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub n: usize,
    pub iat: Vec<f64>,
    pub k_cut: Vec<usize>,
    pub ess: Vec<f64>,
    /// `1 / tau` per coordinate.
    pub eff_per_coord: Vec<f64>,
    /// Mean of `eff_per_coord`.
    pub eff: f64,
    pub ess_mean: f64,
    pub eff_ut: f64,
    pub ess_ut: f64,
    pub wall_time: f64,
}

pub fn efficiency_report(chain: &Chain) -> Result<DiagnosticsReport> {
    report_with_time(chain, chain.wall_time)
}

/// Report using an explicit wall time in seconds.
pub fn report_with_time(chain: &Chain, wall_time: f64) -> Result<DiagnosticsReport> {
    let d = chain.dim();
    let mut iats = Vec::with_capacity(d);
    for j in 0..d {
        iats.push(iat(&chain.column(j))?);
    }
    let n = chain.len();
    let tau: Vec<f64> = iats.iter().map(|i| i.tau).collect();
    let ess: Vec<f64> = tau.iter().map(|t| n as f64 / t).collect();
    let eff_per_coord: Vec<f64> = tau.iter().map(|t| 1.0 / t).collect();
    let eff = eff_per_coord.iter().sum::<f64>() / d as f64;
    let ess_mean = ess.iter().sum::<f64>() / d as f64;
    Ok(DiagnosticsReport {
        n,
        k_cut: iats.iter().map(|i| i.k_cut).collect(),
        iat: tau,
        ess,
        eff_per_coord,
        eff,
        ess_mean,
        eff_ut: eff / wall_time,
        ess_ut: ess_mean / wall_time,
        wall_time,
    })
}

/// One row of a step-scale sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub eff: f64,
    pub eff_ut: f64,
    pub ess: f64,
    pub ess_ut: f64,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Row index maximising ESS.
    pub best_ess: usize,
    /// Row index maximising ESS per second.
    pub best_ess_ut: usize,
}

fn argmax(v: impl Iterator<Item = f64>) -> usize {
    v.enumerate().fold((0, f64::NEG_INFINITY), |(bi, bv), (i, x)| if x > bv { (i, x) } else { (bi, bv) }).0
}

/// Runs delayed acceptance at each step scale and tabulates efficiency.
///
/// Point `i` uses stream `i` of `seed`. Points run on the current rayon pool.
pub fn step_size_sweep<T: LogDensity + Sync + ?Sized>(
    target: &T,
    surrogate: &SurrogatePosterior,
    theta0: &[f64],
    eps_grid: &[f64],
    iters: usize,
    seed: u64,
) -> Result<SweepTable> {
    if eps_grid.is_empty() {
        return Err(Error::InvalidParameter("empty step-scale grid".into()));
    }
    let rows: Vec<SweepRow> = eps_grid
        .par_iter()
        .enumerate()
        .map(|(i, &eps)| {
            let mut rng = substream(seed, i as u64);
            let chain = da_mh(target, surrogate, theta0, iters, eps, &mut rng)?;
            let rep = efficiency_report(&chain)?;
            Ok(SweepRow {
                eps,
                alpha1: chain.alpha1(),
                alpha2: chain.alpha2(),
                eff: rep.eff,
                eff_ut: rep.eff_ut,
                ess: rep.ess_mean,
                ess_ut: rep.ess_ut,
                time: rep.wall_time,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepTable {
        best_ess: argmax(rows.iter().map(|r| r.ess)),
        best_ess_ut: argmax(rows.iter().map(|r| r.ess_ut)),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn ar1(rho: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        let s = (1.0 - rho * rho).sqrt();
        let mut x = rng.sample::<f64, _>(StandardNormal);
        (0..n)
            .map(|_| {
                x = rho * x + s * rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect()
    }

    #[test]
    fn iid_chain() {
        let x = ar1(0.0, 100_000, 1);
        let r = autocorrelation(&x, 20).unwrap();
        assert_eq!(r[0], 1.0);
        assert!(r[1..].iter().all(|v| v.abs() < 0.02));
        assert!((iat(&x).unwrap().tau - 1.0).abs() < 0.1);
        let short = &x[..10_000];
        assert!((ess(short).unwrap() / 1e4 - 1.0).abs() < 0.1);
    }

    #[test]
    fn ar1_half() {
        let x = ar1(0.5, 100_000, 2);
        let r = autocorrelation(&x, 5).unwrap();
        for (k, v) in r.iter().enumerate() {
            assert!((v - 0.5f64.powi(k as i32)).abs() < 0.02);
        }
        assert!((iat(&x).unwrap().tau / 3.0 - 1.0).abs() < 0.1);
        let y = &x[..9999];
        assert!((ess(y).unwrap() / 3333.0 - 1.0).abs() < 0.1);
    }

    #[test]
    fn constant_chain() {
        assert_eq!(autocorrelation(&[1.0; 10], 3).unwrap_err(), Error::ZeroVariance);
        assert_eq!(iat(&[2.0; 10]).unwrap_err(), Error::ZeroVariance);
    }

    #[test]
    fn ess_never_exceeds_n() {
        // alternating chains have negative lag-1 correlation
        let x: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(iat(&x).unwrap().tau, 1.0);
        assert!(ess(&x).unwrap() <= 1000.0);
    }

    #[test]
    fn thinned_iid_chain_keeps_full_efficiency() {
        let x = ar1(0.0, 200_000, 3);
        let thinned: Vec<f64> = x.iter().step_by(4).copied().collect();
        assert!((ess(&thinned).unwrap() / thinned.len() as f64 - 1.0).abs() < 0.05);
    }

    #[test]
    fn report_identities_and_time_scaling() {
        let rows: Vec<Vec<f64>> = ar1(0.7, 20_000, 4).chunks(2).map(|c| c.to_vec()).collect();
        let mut chain = Chain::from_rows(2, &rows);
        chain.wall_time = 5.1;
        let r = efficiency_report(&chain).unwrap();
        assert!((r.ess_ut * r.wall_time / r.ess_mean - 1.0).abs() < 1e-14);
        assert!((r.eff_ut * r.wall_time / r.eff - 1.0).abs() < 1e-14);
        let r2 = report_with_time(&chain, 10.2).unwrap();
        assert_eq!(r2.eff_ut, r.eff_ut / 2.0);
        assert_eq!(r2.ess_ut, r.ess_ut / 2.0);
    }

    #[test]
    fn reference_table_relations() {
        // ESS 501.4248 from 1e4 draws means tau = 19.94 and Eff = 1/tau
        let tau: f64 = 1e4 / 501.4248;
        assert!((tau - 19.94).abs() < 0.01);
        assert!(((1.0 / tau) / 0.0515 - 1.0).abs() < 0.3);
        assert!((29.8912f64 * 5.10 - 152.4).abs() < 0.1);
    }

    #[test]
    fn sweep_shapes_and_small_scale_slope() {
        let target = |x: &[f64]| -0.5 * (x[0] * x[0] + x[1] * x[1]);
        let s = SurrogatePosterior::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let one = step_size_sweep(&target, &s, &[0.0, 0.0], &[1.0], 2000, 1).unwrap();
        assert_eq!(one.rows.len(), 1);
        assert_eq!((one.best_ess, one.best_ess_ut), (0, 0));

        let t = step_size_sweep(&target, &s, &[0.0, 0.0], &[0.02, 2.0], 20_000, 2).unwrap();
        let (tiny, good) = (&t.rows[0], &t.rows[1]);
        assert!(tiny.alpha1 > 0.95);
        assert!(tiny.ess < good.ess / 10.0);
        assert!(step_size_sweep(&target, &s, &[0.0, 0.0], &[], 10, 1).is_err());
    }
}

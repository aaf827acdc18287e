use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use swmc::diagnostics::{efficiency_report, step_size_sweep};
use swmc::io::{
    coord_names, read_chain, read_series, read_surrogate, write_chain, write_series, write_surrogate, EventWriter,
    OutputHeader, RunConfig, SurrogateArtifact,
};
use swmc::model::simulate as draw_series;
use swmc::oracle::equivalence_trials;
use swmc::posterior::{learn as learn_phase, posterior_mean_values, ModelPosterior};
use swmc::rng::substream;
use swmc::sampler::{Chain, SurrogatePosterior};
use swmc::window::{run_stream, SlidingWindowFilter, StreamEnd};
use swmc::{ModelKind, ObservationSeries};

use crate::error::{CliError, CliResult};

/// Stream of the learning phase, apart from per-step and sweep streams.
const LEARN_STREAM: u64 = 1 << 41;

fn open_out(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn create(p: &Path) -> CliResult<File> {
    File::create(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
}

fn header(cfg: &RunConfig, command: &str) -> OutputHeader {
    OutputHeader::new(command, cfg.seed, cfg.pairs())
}

fn input(cfg: &RunConfig) -> CliResult<&Path> {
    cfg.input.as_deref().ok_or_else(|| CliError::Config("this command needs --input".into()))
}

/// Reads observations and checks they fit the model.
fn observations(cfg: &RunConfig) -> CliResult<ObservationSeries> {
    let y = read_series(input(cfg)?)?;
    let kind = cfg.model;
    if y.state_dim() != kind.state_dim() {
        return Err(CliError::Data(format!(
            "{kind} needs {} value(s) per axis, the file has {}",
            kind.state_dim(),
            y.state_dim()
        )));
    }
    if y.len() < 2 {
        return Err(CliError::Data("need at least two observations".into()));
    }
    Ok(y)
}

fn target(cfg: &RunConfig, y: ObservationSeries) -> CliResult<ModelPosterior> {
    Ok(ModelPosterior::new(cfg.model, y, cfg.priors()?, cfg.init))
}

fn load_surrogate(path: &Path, kind: ModelKind) -> CliResult<SurrogateArtifact> {
    let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let a = read_surrogate(file)?;
    if a.kind != kind {
        return Err(CliError::Config(format!("surrogate was learned for {}, model is {kind}", a.kind)));
    }
    Ok(a)
}

fn fmt_values(kind: ModelKind, v: &[f64]) -> String {
    kind.param_names().iter().zip(v).map(|(n, x)| format!("{n}={x:.6}")).collect::<Vec<_>>().join(" ")
}

pub fn simulate(cfg: &RunConfig) -> CliResult {
    let th = cfg.theta()?;
    let sim = draw_series(&th, cfg.n, &cfg.lag_sampler(), &cfg.init, cfg.n_axes(), cfg.seed)?;
    let h = header(cfg, "simulate");
    let mut out = open_out(cfg.out.as_deref())?;
    write_series(&mut out, &sim.series, &h)?;
    if let Some(p) = &cfg.truth_out {
        let truth = ObservationSeries::new(sim.grid().clone(), cfg.model.state_dim(), sim.states.clone())?;
        let mut w = BufWriter::new(create(p)?);
        write_series(&mut w, &truth, &OutputHeader::new("simulate truth", cfg.seed, cfg.pairs()))?;
    }
    Ok(())
}

fn learned(cfg: &RunConfig, target: &ModelPosterior) -> CliResult<(Chain, SurrogateArtifact)> {
    let mut rng = substream(cfg.seed, LEARN_STREAM);
    let (chain, steps, surrogate) = learn_phase(target, &cfg.start_coords()?, &cfg.window_config().two_phase(), &mut rng)?;
    let n = chain.len();
    let artifact = SurrogateArtifact {
        kind: cfg.model,
        surrogate,
        acceptance: chain.coord_acceptance(n / 2..n),
        steps: steps.s.clone(),
    };
    Ok((chain, artifact))
}

pub fn learn(cfg: &RunConfig) -> CliResult {
    let target = target(cfg, observations(cfg)?)?;
    let (chain, artifact) = learned(cfg, &target)?;
    let h = header(cfg, "learn");
    let mut out = open_out(cfg.out.as_deref())?;
    write_surrogate(&mut out, &artifact, &h)?;
    if let Some(p) = &cfg.chain_out {
        write_chain(&mut BufWriter::new(create(p)?), &chain, &coord_names(cfg.model), &h)?;
    }
    let tail = chain.thin(chain.len() / 2, 1);
    eprintln!("learn: posterior means {}", fmt_values(cfg.model, &posterior_mean_values(cfg.model, &tail)));
    Ok(())
}

pub fn filter(cfg: &RunConfig) -> CliResult {
    let y = observations(cfg)?;
    let kind = cfg.model;
    let wc = cfg.window_config();
    let mut f = SlidingWindowFilter::new(kind, wc.clone(), cfg.priors()?, cfg.init, cfg.start_coords()?, y.n_axes())?;
    if let Some(p) = &cfg.surrogate {
        f = f.with_surrogate(load_surrogate(p, kind)?.surrogate)?;
    }
    let out = open_out(cfg.out.as_deref())?;
    let mut w = EventWriter::new(out, &header(cfg, "filter"), kind.state_dim(), y.n_axes(), wc.horizon > 0.0)?;
    let mut pos = 0;
    loop {
        let source = (pos..y.len()).map(|t| (y.grid().time(t), y.row(t)));
        let end = run_stream(&mut f, source, |e| {
            w.write(e, y.grid().time(e.step())).map_err(|err| swmc::Error::InvalidParameter(format!("write failed: {err}")))
        })
        .map_err(|e| CliError::from(e).at_step(f.consumed()))?;
        match end {
            StreamEnd::Halted { step, gap, .. } if cfg.resume => {
                eprintln!("filter: gap of {gap} s before observation {step}; resuming");
                f.resume();
                pos = step;
            }
            StreamEnd::Halted { step, gap, .. } => {
                eprintln!("filter: halted at observation {step} after a gap of {gap} s");
                return Ok(());
            }
            StreamEnd::Exhausted => return Ok(()),
        }
    }
}

pub fn sweep(cfg: &RunConfig) -> CliResult {
    let target = target(cfg, observations(cfg)?)?;
    let (surrogate, start): (SurrogatePosterior, Vec<f64>) = match &cfg.surrogate {
        Some(p) => {
            let s = load_surrogate(p, cfg.model)?.surrogate;
            let m = s.mean.iter().copied().collect();
            (s, m)
        }
        None => {
            let (chain, a) = learned(cfg, &target)?;
            (a.surrogate, chain.last().map(<[f64]>::to_vec).unwrap_or_default())
        }
    };
    let table = step_size_sweep(&target, &surrogate, &start, &cfg.eps_grid, cfg.sweep_iters, cfg.seed)?;
    let mut out = open_out(cfg.out.as_deref())?;
    header(cfg, "sweep").write_to(&mut out)?;
    writeln!(out, "# best_ess_eps={}", table.rows[table.best_ess].eps)?;
    writeln!(out, "# best_ess_ut_eps={}", table.rows[table.best_ess_ut].eps)?;
    writeln!(out, "eps,alpha1,alpha2,eff,eff_ut,ess,ess_ut,time")?;
    for r in &table.rows {
        writeln!(out, "{},{},{},{},{},{},{},{}", r.eps, r.alpha1, r.alpha2, r.eff, r.eff_ut, r.ess, r.ess_ut, r.time)?;
    }
    out.flush()?;
    Ok(())
}

pub fn oracle(cfg: &RunConfig) -> CliResult {
    let kind = cfg.model;
    let trials = equivalence_trials(kind, cfg.n, cfg.trials, cfg.seed)?;
    let tol = if kind == ModelKind::Ou2d { 1e-6 } else { 1e-8 };
    let worst = trials.iter().map(|t| t.moments).fold(0.0, f64::max);
    let spread = |f: fn(&swmc::oracle::TrialDiff) -> f64| {
        let (lo, hi) = trials.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        hi - lo
    };
    let offset_spread = spread(|t| t.batch_offset).max(spread(|t| t.dense_offset));
    let pass = worst < tol && offset_spread < 1e-8;
    let mut out = open_out(cfg.out.as_deref())?;
    header(cfg, "oracle").write_to(&mut out)?;
    writeln!(out, "# max_moment_diff={worst:e} tolerance={tol:e}")?;
    writeln!(out, "# likelihood_offset_spread={offset_spread:e} tolerance=1e-8")?;
    writeln!(out, "# result={}", if pass { "pass" } else { "fail" })?;
    writeln!(out, "trial,moment_diff,batch_offset,dense_offset")?;
    for (i, t) in trials.iter().enumerate() {
        writeln!(out, "{i},{:e},{},{}", t.moments, t.batch_offset, t.dense_offset)?;
    }
    out.flush()?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "paths disagree: moment diff {worst:e} (tolerance {tol:e}), offset spread {offset_spread:e}"
        )))
    }
}

pub fn diagnose(cfg: &RunConfig) -> CliResult {
    let path = input(cfg)?;
    let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let (names, chain) = read_chain(file)?;
    let r = efficiency_report(&chain)?;
    let t = r.wall_time;
    let mut out = open_out(cfg.out.as_deref())?;
    header(cfg, "diagnose").write_to(&mut out)?;
    writeln!(out, "# n={} wall_time={t}", r.n)?;
    writeln!(out, "coord,iat,k_cut,ess,eff,eff_ut,ess_ut")?;
    for (i, name) in names.iter().enumerate() {
        let (ess, eff) = (r.ess[i], r.eff_per_coord[i]);
        writeln!(out, "{name},{},{},{ess},{eff},{},{}", r.iat[i], r.k_cut[i], eff / t, ess / t)?;
    }
    writeln!(out, "mean,,,{},{},{},{}", r.ess_mean, r.eff, r.eff_ut, r.ess_ut)?;
    out.flush()?;
    Ok(())
}

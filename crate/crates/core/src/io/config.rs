use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{InitialScale, LagSampler, ModelKind, Prior, PriorSpec, Theta};
use crate::posterior::default_start;
use crate::window::WindowConfig;

/// Recognised keys. Priors use `prior.<parameter>`; parameter values use the parameter name.
pub const CONFIG_KEYS: &[&str] = &[
    "model",
    "seed",
    "threads",
    "input",
    "out",
    "surrogate",
    "chain_out",
    "truth_out",
    "n",
    "axes",
    "lags",
    "theta",
    "init_position",
    "init_velocity",
    "window",
    "threshold",
    "cutoff",
    "phase1_iters",
    "phase2_iters",
    "n_mixture",
    "eps",
    "horizon",
    "burn_frac",
    "thin_to",
    "alpha_target",
    "tune_b",
    "initial_step",
    "eps_grid",
    "sweep_iters",
    "trials",
    "resume",
];

const PARAM_KEYS: &[&str] = &["phi", "tau2", "sigma2", "gamma", "lambda2", "xi2"];

/// Lines of `key = value`; blank lines and `#` comments are skipped. Returns `(line, key, value)`.
pub fn parse_key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Everything a CLI run needs. Keys mirror the fields; see [`CONFIG_KEYS`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub seed: u64,
    pub threads: Option<usize>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub surrogate: Option<PathBuf>,
    pub chain_out: Option<PathBuf>,
    pub truth_out: Option<PathBuf>,
    pub n: usize,
    pub axes: Option<usize>,
    pub lags: Option<LagSampler>,
    theta: Option<Vec<f64>>,
    params: BTreeMap<String, f64>,
    prior_overrides: BTreeMap<String, Prior>,
    pub init: InitialScale,
    pub window: WindowConfig,
    pub eps_grid: Vec<f64>,
    pub sweep_iters: usize,
    pub trials: usize,
    pub resume: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Linear,
            seed: 0,
            threads: None,
            input: None,
            out: None,
            surrogate: None,
            chain_out: None,
            truth_out: None,
            n: 500,
            axes: None,
            lags: None,
            theta: None,
            params: BTreeMap::new(),
            prior_overrides: BTreeMap::new(),
            init: InitialScale::default(),
            window: WindowConfig::default(),
            eps_grid: vec![0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0],
            sweep_iters: 5000,
            trials: 50,
            resume: false,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| Error::Config(format!("{key}: {v:?}: {e}")))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| num::<f64>(key, s.trim())).collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Parses a config file body on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (line, k, v) in parse_key_values(text)? {
            self.set(&k, &v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {line}: {m}")),
                other => other,
            })?;
        }
        Ok(())
    }

    /// Sets one key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let path = || Some(PathBuf::from(v));
        match key {
            "model" => self.model = v.parse()?,
            "seed" => self.seed = num(key, v)?,
            "threads" => self.threads = Some(num(key, v)?),
            "input" => self.input = path(),
            "out" => self.out = path(),
            "surrogate" => self.surrogate = path(),
            "chain_out" => self.chain_out = path(),
            "truth_out" => self.truth_out = path(),
            "n" => self.n = num(key, v)?,
            "axes" => self.axes = Some(num(key, v)?),
            "lags" => self.lags = Some(v.parse()?),
            "theta" => self.theta = Some(list(key, v)?),
            "init_position" => self.init.position = Some(num(key, v)?),
            "init_velocity" => self.init.velocity = Some(num(key, v)?),
            "window" => self.window.window = num(key, v)?,
            "threshold" => self.window.threshold_alpha2 = num(key, v)?,
            "cutoff" => self.window.cutoff_gap = num(key, v)?,
            "phase1_iters" => self.window.phase1_iters = num(key, v)?,
            "phase2_iters" => self.window.phase2_iters = num(key, v)?,
            "n_mixture" => self.window.n_mixture = num(key, v)?,
            "eps" => self.window.eps = num(key, v)?,
            "horizon" => self.window.horizon = num(key, v)?,
            "burn_frac" => self.window.burn_frac = num(key, v)?,
            "thin_to" => self.window.thin_to = num(key, v)?,
            "alpha_target" => self.window.tuning.alpha_target = num(key, v)?,
            "tune_b" => self.window.tuning.b = num(key, v)?,
            "initial_step" => self.window.tuning.initial_step = num(key, v)?,
            "eps_grid" => self.eps_grid = list(key, v)?,
            "sweep_iters" => self.sweep_iters = num(key, v)?,
            "trials" => self.trials = num(key, v)?,
            "resume" => self.resume = num(key, v)?,
            k if PARAM_KEYS.contains(&k) => {
                self.params.insert(k.to_string(), num(key, v)?);
            }
            k if k.starts_with("prior.") => {
                self.prior_overrides.insert(k["prior.".len()..].to_string(), v.parse()?);
            }
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parameter values used to simulate, with per-model defaults.
    pub fn default_values(kind: ModelKind) -> Vec<f64> {
        match kind {
            ModelKind::Linear => vec![0.9, 0.5, 1.0],
            ModelKind::Ou1d => vec![0.5, 0.1, 1.0],
            ModelKind::Ou2d => vec![0.0113, 0.6521, 0.0066, 0.1231, 0.3173],
        }
    }

    fn explicit_theta(&self) -> bool {
        self.theta.is_some() || !self.params.is_empty()
    }

    /// Parameter values: `theta`, then named values, on top of the model defaults.
    pub fn theta(&self) -> Result<Theta> {
        let names = self.model.param_names();
        let mut values = match &self.theta {
            Some(t) if t.len() != names.len() => {
                return Err(Error::Config(format!("theta needs {} values for {}", names.len(), self.model)))
            }
            Some(t) => t.clone(),
            None => Self::default_values(self.model),
        };
        for (k, v) in &self.params {
            let i = names
                .iter()
                .position(|n| n == k)
                .ok_or_else(|| Error::Config(format!("model {} has no parameter {k:?}", self.model)))?;
            values[i] = *v;
        }
        self.model.theta_from_values(&values).map_err(|e| Error::Config(e.to_string()))
    }

    /// Sampler start: the configured parameters if any were given, else the prior-based default.
    pub fn start_coords(&self) -> Result<Vec<f64>> {
        if self.explicit_theta() {
            Ok(self.theta()?.coords())
        } else {
            Ok(default_start(&self.priors()?))
        }
    }

    pub fn priors(&self) -> Result<PriorSpec> {
        let mut p = PriorSpec::default_for(self.model);
        for (name, prior) in &self.prior_overrides {
            p.set(name, *prior)?;
        }
        Ok(p)
    }

    pub fn n_axes(&self) -> usize {
        self.axes.unwrap_or(if self.model == ModelKind::Ou2d { 2 } else { 1 })
    }

    pub fn lag_sampler(&self) -> LagSampler {
        self.lags.unwrap_or(match self.model {
            ModelKind::Ou1d => LagSampler::InverseGamma { alpha: 2.0, beta: 0.1 },
            _ => LagSampler::Constant(1.0),
        })
    }

    pub fn window_config(&self) -> WindowConfig {
        WindowConfig { seed: self.seed, ..self.window.clone() }
    }

    /// Checks everything that can be checked before any computation.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.window.validate()?;
        self.priors()?;
        self.theta()?;
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        let axes = self.n_axes();
        if axes == 0 || (self.model != ModelKind::Ou2d && axes != 1) || axes > 2 {
            return bad(format!("{} supports {} axes, got {axes}", self.model, if self.model == ModelKind::Ou2d { "1 or 2" } else { "1" }));
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        if self.eps_grid.is_empty() || self.eps_grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return bad("eps_grid needs positive values".into());
        }
        if self.sweep_iters < 2 || self.trials == 0 {
            return bad("sweep_iters and trials must be positive".into());
        }
        for v in [self.init.position, self.init.velocity].into_iter().flatten() {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("initial scale must be non-negative, got {v}"));
            }
        }
        let t = &self.window.tuning;
        if !(t.alpha_target > 0.0 && t.alpha_target < 1.0 && t.b > 0.0 && t.initial_step > 0.0) {
            return bad("tuning needs 0 < alpha_target < 1, tune_b > 0 and initial_step > 0".into());
        }
        Ok(())
    }

    /// Resolved settings for output headers.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        put("model", self.model.to_string());
        put("seed", self.seed.to_string());
        if let Some(t) = self.threads {
            put("threads", t.to_string());
        }
        for (k, p) in [("input", &self.input), ("out", &self.out), ("surrogate", &self.surrogate), ("chain_out", &self.chain_out), ("truth_out", &self.truth_out)] {
            if let Some(p) = p {
                put(k, p.display().to_string());
            }
        }
        put("n", self.n.to_string());
        put("axes", self.n_axes().to_string());
        put("lags", self.lag_sampler().to_string());
        if let Ok(t) = self.theta() {
            put("theta", join(&t.values()));
        }
        if let Ok(p) = self.priors() {
            for (name, prior) in self.model.param_names().iter().zip(p.priors()) {
                put(&format!("prior.{name}"), prior.to_string());
            }
        }
        for (k, v) in [("init_position", self.init.position), ("init_velocity", self.init.velocity)] {
            if let Some(v) = v {
                put(k, v.to_string());
            }
        }
        let w = &self.window;
        put("window", w.window.to_string());
        put("threshold", w.threshold_alpha2.to_string());
        put("cutoff", w.cutoff_gap.to_string());
        put("phase1_iters", w.phase1_iters.to_string());
        put("phase2_iters", w.phase2_iters.to_string());
        put("n_mixture", w.n_mixture.to_string());
        put("eps", w.eps.to_string());
        put("horizon", w.horizon.to_string());
        put("burn_frac", w.burn_frac.to_string());
        put("thin_to", w.thin_to.to_string());
        put("alpha_target", w.tuning.alpha_target.to_string());
        put("tune_b", w.tuning.b.to_string());
        put("initial_step", w.tuning.initial_step.to_string());
        put("eps_grid", join(&self.eps_grid));
        put("sweep_iters", self.sweep_iters.to_string());
        put("trials", self.trials.to_string());
        put("resume", self.resume.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_body() {
        let c = RunConfig::from_text("# comment\nmodel = ou1d\n\nseed=3\ngamma=0.7\nprior.gamma = ig:2,1\nwindow=50\n").unwrap();
        assert_eq!(c.model, ModelKind::Ou1d);
        assert_eq!(c.seed, 3);
        let v = c.theta().unwrap().values();
        assert!(v.iter().zip([0.7, 0.1, 1.0]).all(|(a, b)| (a - b).abs() < 1e-15), "{v:?}");
        assert_eq!(c.priors().unwrap().priors()[0], Prior::InverseGamma { alpha: 2.0, beta: 1.0 });
        assert_eq!(c.window_config().window, 50);
        assert_eq!(c.window_config().seed, 3);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let e = RunConfig::from_text("model=linear\nwindw=3\n").unwrap_err();
        assert!(e.to_string().contains("line 2") && e.to_string().contains("windw"), "{e}");
        assert!(RunConfig::from_text("seed\n").is_err());
        assert!(RunConfig::from_text("seed=-1\n").is_err());
        assert!(RunConfig::from_text("lags=weird\n").is_err());
        let c = RunConfig::from_text("model=linear\ngamma=1\n").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_text("model=linear\nprior.xi2=ig:1,1\n").unwrap();
        assert!(c.validate().is_err());
        assert!(RunConfig::from_text("threshold=1.5\n").unwrap().validate().is_err());
        assert!(RunConfig::from_text("model=ou1d\naxes=2\n").unwrap().validate().is_err());
    }

    #[test]
    fn later_settings_override() {
        let mut c = RunConfig::from_text("seed=1\nn=10\n").unwrap();
        c.set("seed", "9").unwrap();
        assert_eq!((c.seed, c.n), (9, 10));
    }

    #[test]
    fn header_pairs_reload_to_same_config() {
        let c = RunConfig::from_text("model=ou2d\nseed=5\nxi2=0.5\nlags=ig:3,2\nhorizon=2\ninit_position=10\n").unwrap();
        let text: String = c.pairs().iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        let back = RunConfig::from_text(&text).unwrap();
        assert_eq!(back.theta().unwrap(), c.theta().unwrap());
        assert_eq!(back.priors().unwrap(), c.priors().unwrap());
        assert_eq!(back.window_config(), c.window_config());
        assert_eq!(back.lag_sampler(), c.lag_sampler());
        assert_eq!(back.init, c.init);
        assert_eq!(back.pairs(), c.pairs());
    }

    #[test]
    fn start_point() {
        let c = RunConfig::default();
        assert_eq!(c.start_coords().unwrap(), default_start(&c.priors().unwrap()));
        let c = RunConfig::from_text("phi=0.5\n").unwrap();
        assert_eq!(c.start_coords().unwrap()[0], 0.5);
        for k in CONFIG_KEYS {
            assert!(!PARAM_KEYS.contains(k));
        }
    }
}

//! Named experiment configurations and their overrides.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SignalModel;
use crate::sampling::ThresholdSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Opera,
    OperaAdaptive,
    NoisyOpera,
    Phaselift,
    OnebitPhaselift,
    NoisyPhaselift,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Opera,
        Method::OperaAdaptive,
        Method::NoisyOpera,
        Method::Phaselift,
        Method::OnebitPhaselift,
        Method::NoisyPhaselift,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Opera => "opera",
            Method::OperaAdaptive => "opera-adaptive",
            Method::NoisyOpera => "noisy-opera",
            Method::Phaselift => "phaselift",
            Method::OnebitPhaselift => "onebit-phaselift",
            Method::NoisyPhaselift => "noisy-phaselift",
        }
    }

    pub fn is_noisy(self) -> bool {
        matches!(self, Method::NoisyOpera | Method::NoisyPhaselift)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdKind {
    Lognormal,
    Gaussian,
}

impl ThresholdKind {
    pub fn spec(self) -> ThresholdSpec {
        match self {
            ThresholdKind::Lognormal => ThresholdSpec::Lognormal,
            ThresholdKind::Gaussian => ThresholdSpec::Gaussian,
        }
    }
}

impl FromStr for ThresholdKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lognormal" => Ok(ThresholdKind::Lognormal),
            "gaussian" => Ok(ThresholdKind::Gaussian),
            other => Err(Error::InvalidConfig(format!("unknown threshold law '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub n: usize,
    pub model: SignalModel,
    pub m_values: Vec<usize>,
    /// Noise levels; `[0.0]` for noiseless presets.
    pub sigmas: Vec<f64>,
    pub trials: usize,
    /// Trial `t` uses seed `seed + t`.
    pub seed: u64,
    pub methods: Vec<Method>,
    pub threshold: ThresholdKind,
    /// Relative oracle stop `||X_i - X*||^2 <= eps ||X*||^2` for iterative
    /// solvers that take one. Noisy OPeRA always runs to stationarity.
    pub oracle_eps: Option<f64>,
    /// Kaczmarz iteration cap per solve.
    pub max_iters: usize,
    /// Projected-gradient iteration cap per solve.
    pub pg_max_iters: usize,
    /// Trace weight of the convex baselines.
    pub alpha: f64,
    /// Adaptive-threshold stopping tolerance.
    pub delta: f64,
    pub max_outer: usize,
    /// When set, each method stops at the first `m` where a strict majority of
    /// trials reach NMSE `<= target`, and the sweep reports that `m`.
    pub target: Option<f64>,
    /// Each solve is repeated this many times and the fastest run is timed.
    pub timing_repeats: usize,
}

pub const PRESET_NAMES: [&str; 8] = ["fig2-real", "fig2-complex", "fig5", "fig6", "fig7", "table1", "fig8", "table2"];

impl Preset {
    fn base(name: &str) -> Self {
        Preset {
            name: name.to_string(),
            n: 10,
            model: SignalModel::Real,
            m_values: vec![1000, 5000, 10_000, 50_000, 100_000],
            sigmas: vec![0.0],
            trials: 10,
            seed: 0,
            methods: vec![Method::Opera],
            threshold: ThresholdKind::Lognormal,
            oracle_eps: None,
            max_iters: 2_000_000,
            pg_max_iters: 5000,
            alpha: 1e-2,
            delta: 1e-3,
            max_outer: 50,
            target: None,
            timing_repeats: 1,
        }
    }

    pub fn by_name(name: &str) -> Result<Preset> {
        let mut p = Preset::base(name);
        match name {
            "fig2-real" => {}
            "fig2-complex" => p.model = SignalModel::Complex,
            "fig5" => {
                p.m_values = vec![100, 1000, 3000, 4000, 5000, 10_000, 30_000, 50_000, 80_000, 100_000];
                p.trials = 5;
                p.methods = vec![Method::Phaselift, Method::Opera];
                p.oracle_eps = Some(1e-2);
                p.timing_repeats = 3;
            }
            "fig6" => {
                p.m_values = vec![1000, 3000, 5000, 8000, 10_000];
                p.trials = 5;
                p.methods = vec![Method::OnebitPhaselift, Method::Opera];
                p.oracle_eps = Some(1e-2);
                p.timing_repeats = 3;
            }
            "fig7" => {
                p.trials = 5;
                p.methods = vec![Method::Opera, Method::OperaAdaptive];
                p.max_iters = 200_000;
            }
            "table1" => {
                p.m_values = vec![100, 500, 1000, 3000, 4000, 5000, 10_000, 30_000, 50_000, 80_000, 100_000];
                p.trials = 5;
                p.methods = vec![Method::OperaAdaptive, Method::Opera];
                p.max_iters = 200_000;
                p.target = Some(1e-2);
            }
            "fig8" => {
                p.m_values = vec![5000, 10_000];
                p.sigmas = vec![0.1, 0.2, 0.4, 0.5, 0.7, 1.0];
                p.methods = vec![Method::NoisyOpera];
                p.threshold = ThresholdKind::Gaussian;
            }
            "table2" => {
                p.m_values = vec![5000, 10_000, 20_000];
                p.sigmas = vec![0.5];
                p.trials = 5;
                p.methods = vec![Method::NoisyPhaselift, Method::NoisyOpera];
                p.threshold = ThresholdKind::Gaussian;
                p.oracle_eps = Some(5e-3);
            }
            other => return Err(Error::UnknownPreset(other.to_string())),
        }
        Ok(p)
    }

    /// One-method, one-trial configuration at `m = 5000`. Noisy methods get
    /// Gaussian thresholds and `sigma = 0.5`.
    pub fn single(method: Method) -> Preset {
        let mut p = Preset::base(method.as_str());
        p.methods = vec![method];
        p.m_values = vec![5000];
        p.trials = 1;
        if method.is_noisy() {
            p.sigmas = vec![0.5];
            p.threshold = ThresholdKind::Gaussian;
        }
        p
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(n) = o.n {
            self.n = n;
        }
        if let Some(m) = &o.m {
            self.m_values = m.clone();
        }
        if let Some(model) = o.model {
            self.model = model;
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(trials) = o.trials {
            self.trials = trials;
        }
        if let Some(s) = &o.sigma {
            self.sigmas = s.clone();
        }
        if let Some(t) = o.threshold {
            self.threshold = t;
        }
        if let Some(eps) = o.stop_eps {
            self.oracle_eps = Some(eps);
        }
        if let Some(it) = o.max_iters {
            self.max_iters = it;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(format!("preset {}: {msg}", self.name)));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.trials == 0 || self.m_values.is_empty() || self.methods.is_empty() || self.sigmas.is_empty() {
            return bad("trials, m values, methods and sigmas must be nonempty".into());
        }
        let needs_noise = self.methods.iter().any(|m| m.is_noisy());
        if needs_noise && self.sigmas.iter().any(|&s| !(s > 0.0)) {
            return bad("noisy methods need sigma > 0".into());
        }
        if !needs_noise && self.threshold == ThresholdKind::Gaussian {
            return bad("noiseless methods need nonnegative (lognormal) thresholds".into());
        }
        if let Some(eps) = self.oracle_eps {
            if !(eps > 0.0) {
                return bad(format!("stop eps must be positive, got {eps}"));
            }
        }
        Ok(())
    }
}

/// Optional replacements for preset fields; `None` keeps the preset value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub n: Option<usize>,
    pub m: Option<Vec<usize>>,
    pub model: Option<SignalModel>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub sigma: Option<Vec<f64>>,
    pub threshold: Option<ThresholdKind>,
    pub stop_eps: Option<f64>,
    pub max_iters: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::min_samples_dimension;

    #[test]
    fn every_preset_resolves_and_respects_the_dimension_bound() {
        for name in PRESET_NAMES {
            let p = Preset::by_name(name).unwrap();
            p.validate().unwrap();
            assert!(p.n <= 16 && p.m_values.iter().all(|&m| m <= 100_000));
            assert!(p.m_values.iter().all(|&m| m >= min_samples_dimension(p.n)), "{name}");
        }
    }

    #[test]
    fn single_method_presets_validate() {
        for m in Method::ALL {
            let p = Preset::single(m);
            p.validate().unwrap();
            assert_eq!((p.methods.as_slice(), p.trials), ([m].as_slice(), 1));
        }
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(Preset::by_name("fig99"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn overrides_replace_fields() {
        let mut p = Preset::by_name("fig2-real").unwrap();
        p.apply(&Overrides { m: Some(vec![300]), trials: Some(2), stop_eps: Some(0.1), ..Default::default() })
            .unwrap();
        assert_eq!((p.m_values.clone(), p.trials, p.oracle_eps), (vec![300], 2, Some(0.1)));
        assert!(p.apply(&Overrides { threshold: Some(ThresholdKind::Gaussian), ..Default::default() }).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
    }
}

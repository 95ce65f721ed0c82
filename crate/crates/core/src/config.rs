//! Run configuration in `key = value` text, resolved against a dataset into an [`IdentConfig`].

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::ObservationSet;
use crate::ident::IdentConfig;
use crate::kv;
use crate::regression::RegressionConfig;
use crate::systems::SystemDefinition;
use crate::test_function::{AxisKernel, SizingConfig, TestFunction};

/// Every recognised key, sorted as written.
pub const KEYS: [&str; 16] = [
    "adaptive_subsample",
    "alpha_cap",
    "beta_cap",
    "cv_lambda",
    "cv_trials",
    "features_of_interest",
    "histogram_bins",
    "max_sparsity",
    "seed",
    "subsample_space",
    "subsample_time",
    "tau_decay",
    "tau_hat",
    "test_function_m",
    "test_function_p",
    "trim_threshold",
];

/// User-facing knobs of one identification run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha_cap: usize,
    pub beta_cap: usize,
    pub subsample_space: usize,
    pub subsample_time: usize,
    pub adaptive_subsample: bool,
    pub tau_hat: f64,
    pub tau_decay: f64,
    pub trim_threshold: f64,
    pub max_sparsity: usize,
    pub cv_lambda: f64,
    pub cv_trials: usize,
    pub seed: u64,
    pub histogram_bins: usize,
    /// Feature labels such as `(u^2)_x`; empty selects the built-in set.
    pub features_of_interest: Vec<String>,
    /// Per-axis half widths in storage order; empty means sized from the data.
    pub test_function_m: Vec<usize>,
    pub test_function_p: Vec<usize>,
}

impl RunConfig {
    pub fn defaults(spatial_dims: usize) -> Self {
        let ident = IdentConfig::defaults(spatial_dims);
        RunConfig {
            alpha_cap: ident.alpha_cap,
            beta_cap: ident.beta_cap,
            subsample_space: ident.subsample_space,
            subsample_time: ident.subsample_time,
            adaptive_subsample: ident.adaptive_subsample,
            tau_hat: ident.sizing.tau_hat,
            tau_decay: ident.sizing.tau_decay,
            trim_threshold: ident.regression.trim_threshold,
            max_sparsity: ident.regression.max_sparsity,
            cv_lambda: ident.regression.cv_lambda,
            cv_trials: ident.regression.cv_trials,
            seed: ident.regression.seed,
            histogram_bins: ident.histogram_bins,
            features_of_interest: Vec::new(),
            test_function_m: Vec::new(),
            test_function_p: Vec::new(),
        }
    }

    /// Defaults with the dictionary caps and trimming threshold recommended for `def`.
    pub fn for_system(def: &SystemDefinition) -> Self {
        RunConfig {
            alpha_cap: def.alpha_cap,
            beta_cap: def.beta_cap,
            trim_threshold: def.trim_threshold,
            ..RunConfig::defaults(def.spatial_dims)
        }
    }

    /// Overrides fields from `key = value` text. Keys not present keep their current value.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let map = kv::parse(text).map_err(Error::Config)?;
        for (key, value) in &map {
            self.set(key, value)?;
        }
        self.validate()
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "adaptive_subsample" => self.adaptive_subsample = scalar(key, value)?,
            "alpha_cap" => self.alpha_cap = scalar(key, value)?,
            "beta_cap" => self.beta_cap = scalar(key, value)?,
            "cv_lambda" => self.cv_lambda = scalar(key, value)?,
            "cv_trials" => self.cv_trials = scalar(key, value)?,
            "features_of_interest" => {
                self.features_of_interest = kv::list(value).into_iter().map(String::from).collect()
            }
            "histogram_bins" => self.histogram_bins = scalar(key, value)?,
            "max_sparsity" => self.max_sparsity = scalar(key, value)?,
            "seed" => self.seed = scalar(key, value)?,
            "subsample_space" => self.subsample_space = scalar(key, value)?,
            "subsample_time" => self.subsample_time = scalar(key, value)?,
            "tau_decay" => self.tau_decay = scalar(key, value)?,
            "tau_hat" => self.tau_hat = scalar(key, value)?,
            "test_function_m" => self.test_function_m = list(key, value)?,
            "test_function_p" => self.test_function_p = list(key, value)?,
            "trim_threshold" => self.trim_threshold = scalar(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.beta_cap == 0 {
            return fail("beta_cap must be at least 1");
        }
        if self.subsample_space == 0 || self.subsample_time == 0 {
            return fail("subsample targets must be positive");
        }
        if !(self.tau_hat.is_finite() && self.tau_hat > 0.0) {
            return fail("tau_hat must be positive");
        }
        if !(self.tau_decay > 0.0 && self.tau_decay < 1.0) {
            return fail("tau_decay must lie in (0, 1)");
        }
        if self.histogram_bins < 3 {
            return fail("histogram_bins must be at least 3");
        }
        if self.test_function_m.len() != self.test_function_p.len() {
            return fail("test_function_m and test_function_p need the same length");
        }
        if self
            .test_function_m
            .iter()
            .chain(&self.test_function_p)
            .any(|&v| v == 0)
        {
            return fail("test function sizes must be positive");
        }
        self.regression().validate()
    }

    fn regression(&self) -> RegressionConfig {
        RegressionConfig {
            max_sparsity: self.max_sparsity,
            trim_threshold: self.trim_threshold,
            cv_lambda: self.cv_lambda,
            cv_trials: self.cv_trials,
            seed: self.seed,
        }
    }

    /// All keys with their text values, sorted by key.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(", ");
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("adaptive_subsample", self.adaptive_subsample.to_string());
        put("alpha_cap", self.alpha_cap.to_string());
        put("beta_cap", self.beta_cap.to_string());
        put("cv_lambda", format!("{:?}", self.cv_lambda));
        put("cv_trials", self.cv_trials.to_string());
        put("features_of_interest", self.features_of_interest.join(", "));
        put("histogram_bins", self.histogram_bins.to_string());
        put("max_sparsity", self.max_sparsity.to_string());
        put("seed", self.seed.to_string());
        put("subsample_space", self.subsample_space.to_string());
        put("subsample_time", self.subsample_time.to_string());
        put("tau_decay", format!("{:?}", self.tau_decay));
        put("tau_hat", format!("{:?}", self.tau_hat));
        put("test_function_m", join(&self.test_function_m));
        put("test_function_p", join(&self.test_function_p));
        put("trim_threshold", format!("{:?}", self.trim_threshold));
        map
    }

    pub fn to_text(&self) -> String {
        self.to_map().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Resolves labels and test-function sizes against `data`.
    pub fn ident_config(&self, data: &ObservationSet) -> Result<IdentConfig> {
        self.validate()?;
        let grid = &data.grid;
        let mut ident = IdentConfig::defaults(grid.spatial_dims());
        ident.alpha_cap = self.alpha_cap;
        ident.beta_cap = self.beta_cap;
        ident.subsample_space = self.subsample_space;
        ident.subsample_time = self.subsample_time;
        ident.adaptive_subsample = self.adaptive_subsample;
        ident.sizing = SizingConfig {
            tau_hat: self.tau_hat,
            tau_decay: self.tau_decay,
        };
        ident.regression = self.regression();
        ident.histogram_bins = self.histogram_bins;
        if !self.features_of_interest.is_empty() {
            let dict = ident.dictionary(data.num_vars(), grid.spatial_dims())?;
            let specs = self
                .features_of_interest
                .iter()
                .map(|label| dict.lookup_label(label, &data.names).map(|l| dict.get(l).clone()))
                .collect::<Result<Vec<_>>>()?;
            ident.features_of_interest = Some(specs);
        }
        if !self.test_function_m.is_empty() {
            let axes = grid.axes();
            if self.test_function_m.len() != axes.len() {
                return Err(Error::Config(format!(
                    "test function sizes given for {} axes, data has {}",
                    self.test_function_m.len(),
                    axes.len()
                )));
            }
            let kernels = axes
                .into_iter()
                .enumerate()
                .map(|(i, axis)| AxisKernel {
                    axis,
                    m: self.test_function_m[i],
                    p: self.test_function_p[i],
                    spacing: grid.spacing(axis),
                })
                .collect();
            ident.test_function = Some(TestFunction::new(kernels)?);
        }
        Ok(ident)
    }
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{value}' for {key}")))
}

fn list(key: &str, value: &str) -> Result<Vec<usize>> {
    kv::list(value).into_iter().map(|v| scalar(key, v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::systems::system;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::defaults(1);
        cfg.apply_text("tau_hat = 1.5\ntest_function_m = 12, 9\ntest_function_p = 8, 6\nseed = 7")
            .unwrap();
        let mut again = RunConfig::defaults(0);
        again.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(again, cfg);
        let written: Vec<String> = cfg.to_map().into_keys().collect();
        assert_eq!(written, KEYS.to_vec());
    }

    #[test]
    fn rejects_bad_input() {
        let mut cfg = RunConfig::defaults(1);
        for text in [
            "bogus = 1",
            "cv_trials = many",
            "trim_threshold = 1.5",
            "test_function_m = 3",
        ] {
            let err = cfg.clone().apply_text(text).unwrap_err();
            assert_eq!(err.kind(), "config", "{text}");
        }
        assert!(cfg.apply_text("histogram_bins = 2").is_err());
    }

    #[test]
    fn system_overrides() {
        assert_eq!(RunConfig::for_system(&system("ks").unwrap()).trim_threshold, 0.2);
        assert_eq!(RunConfig::for_system(&system("pm2d").unwrap()).trim_threshold, 0.2);
        let lv = RunConfig::for_system(&system("lotka_volterra").unwrap());
        assert_eq!((lv.alpha_cap, lv.beta_cap, lv.subsample_time), (0, 5, 1000));
    }

    #[test]
    fn resolves_against_data() {
        let grid = GridSpec::new(vec![64], 40, vec![0.1], 0.05).unwrap();
        let data = ObservationSet::new(grid, vec!["u".into()], vec![vec![1.0; 64 * 40]]).unwrap();
        let mut cfg = RunConfig::defaults(1);
        cfg.apply_text("features_of_interest = (u^3)_x\ntest_function_m = 10, 8\ntest_function_p = 6, 5")
            .unwrap();
        let ident = cfg.ident_config(&data).unwrap();
        let foi = ident.features_of_interest.unwrap();
        assert_eq!((foi[0].alpha.clone(), foi[0].beta.clone()), (vec![1], vec![3]));
        let tf = ident.test_function.unwrap();
        assert_eq!((tf.axes[1].m, tf.axes[1].p, tf.axes[1].spacing), (8, 5, 0.05));
        cfg.features_of_interest = vec!["(q^2)_x".into()];
        assert!(matches!(cfg.ident_config(&data), Err(Error::FeatureNotFound(_))));
    }
}

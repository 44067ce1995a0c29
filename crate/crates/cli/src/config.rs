//! Experiment configuration: a single JSON document with strict keys.

use std::path::PathBuf;

use serde::Deserialize;
use uirs_core::channels::IsingParams;
use uirs_core::circuit::DataMode;
use uirs_core::error::{Error, Result};
use uirs_core::pauli::{Pauli, PauliString};

/// Which experiment the runner executes.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Deserialize)]
pub enum Protocol {
    #[serde(rename = "otoc-converge")]
    OtocConverge,
    #[serde(rename = "otoc-vs-time")]
    OtocVsTime,
    #[serde(rename = "spam-compare")]
    SpamCompare,
    #[serde(rename = "unitarity")]
    Unitarity,
    #[serde(rename = "oracle-check")]
    OracleCheck,
}

/// Depolarizing strengths of the noise model.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub gate_left: f64,
    #[serde(default)]
    pub gate_right: f64,
    #[serde(default)]
    pub spam_prep: f64,
    #[serde(default)]
    pub spam_meas: f64,
}

/// Hamiltonian block; `n` is taken from the top-level qubit count.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingConfig {
    #[serde(default = "one")]
    pub j0: f64,
    #[serde(default = "alpha_default")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default = "one")]
    pub dmax: f64,
    #[serde(default = "one_u64")]
    pub disorder_seed: u64,
}

impl Default for IsingConfig {
    fn default() -> Self {
        Self {
            j0: 1.0,
            alpha: 1.5,
            b: 1.0,
            dmax: 1.0,
            disorder_seed: 1,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn alpha_default() -> f64 {
    1.5
}
fn one_u64() -> u64 {
    1
}
fn default_n() -> usize {
    3
}
fn default_s() -> usize {
    2000
}
fn default_batches() -> usize {
    50
}
fn default_r() -> usize {
    2
}
fn default_mode() -> DataMode {
    DataMode::Exact
}
fn default_t() -> f64 {
    1.0
}
fn default_baseline() -> usize {
    40_000
}
fn default_seed() -> u64 {
    20_240
}

/// Full experiment description. Unknown keys are rejected.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Sequence lengths (unitarity protocol); default `1..=8`.
    #[serde(default)]
    pub m_list: Option<Vec<usize>>,
    /// Sequences per batch.
    #[serde(default = "default_s")]
    pub s: usize,
    /// Batches per sweep point (`N`).
    #[serde(default = "default_batches")]
    pub n_batches: usize,
    /// Shots per sequence (SHOTS mode).
    #[serde(default = "default_r")]
    pub r: usize,
    #[serde(default = "default_mode")]
    pub mode: DataMode,
    #[serde(default)]
    pub ising: IsingConfig,
    #[serde(default = "default_t")]
    pub t: f64,
    /// Timestamps for otoc-vs-time; default ten equal steps of `t`/... up
    /// to `3.0`.
    #[serde(default)]
    pub t_list: Option<Vec<f64>>,
    /// Pauli word for `V`; default `Y` on the last qubit.
    #[serde(default)]
    pub v: Option<String>,
    /// Pauli word for `W`; default `X` on the last but one qubit.
    #[serde(default)]
    pub w: Option<String>,
    #[serde(default)]
    pub noise: NoiseConfig,
    /// Sweep points for otoc-converge; default `[s/8, s/4, s/2, s]`.
    #[serde(default)]
    pub s_list: Option<Vec<usize>>,
    /// SPAM strengths for spam-compare; default `0.0..=0.5` in steps of 0.1.
    #[serde(default)]
    pub spam_list: Option<Vec<f64>>,
    /// Random states drawn by the statistical-correlation baseline.
    #[serde(default = "default_baseline")]
    pub baseline_samples: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    /// CSV destination; required by every protocol except oracle-check.
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// Optional line-delimited JSON record export.
    #[serde(default)]
    pub records_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |path: &str, message: String| Error::Config {
            path: path.into(),
            message,
        };
        if self.n == 0 || self.n > 5 {
            return Err(err("n", format!("{} outside 1..=5", self.n)));
        }
        if self.s < 2 {
            return Err(err("s", "need at least two sequences per batch".into()));
        }
        if self.n_batches == 0 {
            return Err(err("n_batches", "need at least one batch".into()));
        }
        if self.r == 0 {
            return Err(err("r", "need at least one shot".into()));
        }
        for (path, p) in [
            ("noise.gate_left", self.noise.gate_left),
            ("noise.gate_right", self.noise.gate_right),
            ("noise.spam_prep", self.noise.spam_prep),
            ("noise.spam_meas", self.noise.spam_meas),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(err(path, format!("{p} outside [0, 1]")));
            }
        }
        if let Some(ms) = &self.m_list {
            if ms.is_empty() {
                return Err(err("m_list", "must be nonempty".into()));
            }
            if ms.windows(2).any(|w| w[1] <= w[0]) || ms.contains(&0) {
                return Err(err("m_list", "must be strictly increasing and >= 1".into()));
            }
        }
        if let Some(ss) = &self.s_list {
            if ss.is_empty() || ss.iter().any(|&s| s < 2) {
                return Err(err("s_list", "entries must be >= 2".into()));
            }
        }
        if let Some(ts) = &self.t_list {
            if ts.is_empty() {
                return Err(err("t_list", "must be nonempty".into()));
            }
        }
        if let Some(ps) = &self.spam_list {
            if ps.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(err("spam_list", "entries outside [0, 1]".into()));
            }
        }
        if self.ising.dmax < 0.0 {
            return Err(err("ising.dmax", "must be nonnegative".into()));
        }
        if self.protocol != Protocol::OracleCheck && self.output_path.is_none() {
            return Err(err("output_path", "required for this protocol".into()));
        }
        // V/W words must parse and match n
        self.observable_v()?;
        self.observable_w()?;
        Ok(())
    }

    pub fn ising_params(&self) -> IsingParams {
        IsingParams {
            n: self.n,
            j0: self.ising.j0,
            alpha: self.ising.alpha,
            b: self.ising.b,
            dmax: self.ising.dmax,
            disorder_seed: self.ising.disorder_seed,
        }
    }

    pub fn observable_v(&self) -> Result<PauliString> {
        match &self.v {
            Some(word) => self.parse_word("v", word),
            None => PauliString::single(self.n, self.n - 1, Pauli::Y),
        }
    }

    pub fn observable_w(&self) -> Result<PauliString> {
        match &self.w {
            Some(word) => self.parse_word("w", word),
            None => PauliString::single(self.n, self.n.saturating_sub(2), Pauli::X),
        }
    }

    fn parse_word(&self, path: &str, word: &str) -> Result<PauliString> {
        let p = PauliString::parse(word).map_err(|e| Error::Config {
            path: path.into(),
            message: e.to_string(),
        })?;
        if p.n() != self.n {
            return Err(Error::Config {
                path: path.into(),
                message: format!("word has {} sites, expected {}", p.n(), self.n),
            });
        }
        if p.is_identity_word() {
            return Err(Error::Config {
                path: path.into(),
                message: "observable must be nontrivial".into(),
            });
        }
        Ok(p)
    }

    pub fn sweep_s_list(&self) -> Vec<usize> {
        match &self.s_list {
            Some(list) => list.clone(),
            None => {
                let mut out: Vec<usize> = [self.s / 8, self.s / 4, self.s / 2, self.s]
                    .into_iter()
                    .filter(|&s| s >= 2)
                    .collect();
                out.dedup();
                out
            }
        }
    }

    pub fn sweep_t_list(&self) -> Vec<f64> {
        match &self.t_list {
            Some(list) => list.clone(),
            None => (1..=10).map(|k| 0.3 * k as f64).collect(),
        }
    }

    pub fn sweep_spam_list(&self) -> Vec<f64> {
        match &self.spam_list {
            Some(list) => list.clone(),
            None => (0..=5).map(|k| 0.1 * k as f64).collect(),
        }
    }

    pub fn unitarity_m_list(&self) -> Vec<usize> {
        match &self.m_list {
            Some(list) => list.clone(),
            None => (1..=8).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"protocol": "oracle-check"}"#,
        )
        .unwrap();
        assert_eq!(cfg.n, 3);
        assert_eq!(cfg.mode, DataMode::Exact);
        assert_eq!(cfg.observable_v().unwrap().to_string(), "+IIY");
        assert_eq!(cfg.observable_w().unwrap().to_string(), "+IXI");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let res = ExperimentConfig::from_json(
            r#"{"protocol": "oracle-check", "definitely_a_typo": 1}"#,
        );
        assert!(res.is_err());
    }

    #[test]
    fn invalid_fields_are_named() {
        let res = ExperimentConfig::from_json(
            r#"{"protocol": "unitarity", "noise": {"gate_left": 1.5}, "output_path": "x.csv"}"#,
        );
        let msg = format!("{}", res.unwrap_err());
        assert!(msg.contains("noise.gate_left"), "{msg}");

        let res = ExperimentConfig::from_json(
            r#"{"protocol": "unitarity", "n": 9, "output_path": "x.csv"}"#,
        );
        assert!(format!("{}", res.unwrap_err()).contains('n'));

        let res = ExperimentConfig::from_json(r#"{"protocol": "unitarity"}"#);
        assert!(format!("{}", res.unwrap_err()).contains("output_path"));
    }

    #[test]
    fn word_overrides_are_validated() {
        let ok = ExperimentConfig::from_json(
            r#"{"protocol": "oracle-check", "n": 2, "v": "YX", "w": "-ZZ"}"#,
        )
        .unwrap();
        assert_eq!(ok.observable_w().unwrap().sign(), -1);
        let bad = ExperimentConfig::from_json(
            r#"{"protocol": "oracle-check", "n": 2, "v": "Y"}"#,
        );
        assert!(bad.is_err());
        let trivial = ExperimentConfig::from_json(
            r#"{"protocol": "oracle-check", "n": 2, "v": "II"}"#,
        );
        assert!(trivial.is_err());
    }
}

//! `key = value` experiment configuration.
//!
//! One entry per line, `#` starts a comment. Keys are case-sensitive;
//! unknown keys are rejected so typos never pass silently.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use z2lgt::qse::{Labeling, QseConfig};
use z2lgt::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Spectrum,
    QseBench,
    Scatter,
    Circuit,
}

impl Mode {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "spectrum" => Mode::Spectrum,
            "qse_bench" => Mode::QseBench,
            "scatter" => Mode::Scatter,
            "circuit" => Mode::Circuit,
            _ => bail!("key `mode`: expected spectrum, qse_bench, scatter or circuit, got `{s}`"),
        })
    }
}

const KEYS: &[&str] = &[
    "mode", "L", "m", "eps", "seed", "n_exact", "s_cut", "labeling", "kbar", "xbar", "kbar1",
    "xbar1", "kbar2", "xbar2", "sigma_k", "dt", "T", "cadence", "meson_cadence", "exact_check",
    "tol_energy", "tol_fidelity",
];

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub sites: usize,
    pub mass: f64,
    pub coupling: f64,
    pub seed: u64,
    /// Exact eigenstates computed for comparisons.
    pub n_exact: usize,
    pub s_cut: f64,
    pub labeling: String,
    /// Single packet for `circuit`.
    pub kbar: i64,
    pub xbar: f64,
    /// Packet pair for `scatter`.
    pub packets: [(i64, f64); 2],
    pub sigma_k: f64,
    pub dt: f64,
    pub t_final: f64,
    pub cadence: usize,
    pub meson_cadence: usize,
    pub exact_check: bool,
    /// Relative excitation-energy tolerance for `--check`.
    pub tol_energy: f64,
    /// Minimum state fidelity for `--check`.
    pub tol_fidelity: f64,
}

/// Raw entries from a file and from command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RawConfig(pub BTreeMap<String, String>);

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(RawConfig(map))
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.0.insert(key.to_string(), value);
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| anyhow!("missing required key `{key}`"))
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| anyhow!("key `{key}`: cannot parse `{v}`: {e}")),
        }
    }

    fn req<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.required(key)?;
        v.parse().map_err(|e| anyhow!("key `{key}`: cannot parse `{v}`: {e}"))
    }

    pub fn validate(&self) -> Result<ExperimentConfig> {
        if let Some(k) = self.0.keys().find(|k| !KEYS.contains(&k.as_str())) {
            bail!("unknown key `{k}`");
        }
        let mode = Mode::parse(self.required("mode")?)?;
        let sites: usize = self.req("L")?;
        let mass: f64 = self.req("m")?;
        let coupling: f64 = self.req("eps")?;
        ModelParams::new(sites, mass, coupling).context("model parameters")?;
        let l = sites as f64;
        let labeling = self.get("labeling", "nearest".to_string())?;
        if !matches!(labeling.as_str(), "nearest" | "vector_branch") {
            bail!("key `labeling`: expected nearest or vector_branch, got `{labeling}`");
        }
        let cfg = ExperimentConfig {
            mode,
            sites,
            mass,
            coupling,
            seed: self.get("seed", 7)?,
            n_exact: self.get("n_exact", 28)?,
            s_cut: self.get("s_cut", QseConfig::default().s_cut)?,
            labeling,
            kbar: self.get("kbar", 0)?,
            xbar: self.get("xbar", l / 2.0)?,
            packets: [
                (self.get("kbar1", 1)?, self.get("xbar1", l / 4.0)?),
                (self.get("kbar2", -1)?, self.get("xbar2", 3.0 * l / 4.0)?),
            ],
            sigma_k: self.get("sigma_k", 2.0 * PI / l)?,
            dt: self.get("dt", 0.1)?,
            t_final: self.get("T", 4.0 * l)?,
            cadence: self.get("cadence", 1)?,
            meson_cadence: self.get("meson_cadence", 4)?,
            exact_check: self.get("exact_check", false)?,
            tol_energy: self.get("tol_energy", 1e-2)?,
            tol_fidelity: self.get("tol_fidelity", 0.99)?,
        };
        for (key, x) in [("xbar", cfg.xbar), ("xbar1", cfg.packets[0].1), ("xbar2", cfg.packets[1].1)] {
            if !(0.0..l).contains(&x) {
                bail!("key `{key}`: must lie in [0, {sites}), got {x}");
            }
        }
        if !(cfg.s_cut > 0.0 && cfg.s_cut < 1.0) {
            bail!("key `s_cut`: must lie in (0, 1), got {}", cfg.s_cut);
        }
        if cfg.n_exact == 0 {
            bail!("key `n_exact`: must be positive");
        }
        Ok(cfg)
    }
}

impl ExperimentConfig {
    pub fn params(&self) -> ModelParams {
        ModelParams::new(self.sites, self.mass, self.coupling).expect("validated")
    }

    pub fn qse(&self) -> QseConfig {
        QseConfig {
            s_cut: self.s_cut,
            labeling: if self.labeling == "vector_branch" {
                Labeling::VectorBranch
            } else {
                Labeling::Nearest
            },
            ..QseConfig::default()
        }
    }
}

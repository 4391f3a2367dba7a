use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::PauliString;
use crate::metrics::Algorithm;
use crate::sim::DynamicsConfig;

pub const MAX_QUBITS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Window records regenerated from the current true state.
    Oracle,
    /// Window records assembled from the historical measurement stream.
    Physical,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Oracle => "oracle",
            Mode::Physical => "physical",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "oracle" => Ok(Mode::Oracle),
            "physical" => Ok(Mode::Physical),
            other => Err(Error::config("mode", format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Window length `l`.
    pub window: usize,
    /// Horizon `T`.
    pub steps: usize,
    pub noise_std: f64,
    pub gamma: f64,
    pub tau: f64,
    pub seed: u64,
    /// Sorted, without duplicates.
    pub algorithms: Vec<Algorithm>,
    pub mode: Mode,
    /// Qubit count, Hamiltonian and observable; the Hamiltonian seed follows `seed`.
    pub dynamics: DynamicsConfig,
    pub out_dir: PathBuf,
    pub plot: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            window: 40,
            steps: 1000,
            noise_std: 0.001,
            gamma: 1.0,
            tau: 1.0,
            seed: 1,
            algorithms: vec![Algorithm::Kf, Algorithm::Opg],
            mode: Mode::Oracle,
            dynamics: DynamicsConfig::new(4, 1),
            out_dir: PathBuf::from("qstrack-out"),
            plot: false,
        }
    }
}

pub const KEYS: &[&str] = &[
    "n",
    "l",
    "T",
    "noise_std",
    "gamma",
    "tau",
    "seed",
    "algorithms",
    "mode",
    "out_dir",
    "coupling_strength",
    "hamiltonian_scale",
    "dt",
    "observable",
    "plot",
];

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(
                format!("line {}", i + 1),
                format!("expected `key = value`, found `{line}`"),
            )
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn finite(key: &str, value: &str) -> Result<f64> {
    let x: f64 = number(key, value)?;
    if !x.is_finite() {
        return Err(Error::config(key, format!("{key} must be finite")));
    }
    Ok(x)
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::config(
            key,
            format!("expected a boolean, found `{value}`"),
        )),
    }
}

fn algorithms(value: &str) -> Result<Vec<Algorithm>> {
    let mut out = if value.trim().eq_ignore_ascii_case("both") {
        vec![Algorithm::Kf, Algorithm::Opg]
    } else {
        value
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<Algorithm>>>()?
    };
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::config("algorithms", "no algorithm selected"));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Applies the pairs in order over the defaults, so later pairs win.
    pub fn from_pairs<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut observable: Option<String> = None;
        for (key, value) in pairs {
            let (key, value) = (key.as_ref(), value.as_ref());
            match key {
                "n" => cfg.dynamics.qubits = number(key, value)?,
                "l" => cfg.window = number(key, value)?,
                "T" => cfg.steps = number(key, value)?,
                "noise_std" => cfg.noise_std = finite(key, value)?,
                "gamma" => cfg.gamma = finite(key, value)?,
                "tau" => cfg.tau = finite(key, value)?,
                "seed" => cfg.seed = number(key, value)?,
                "algorithms" => cfg.algorithms = algorithms(value)?,
                "mode" => cfg.mode = value.parse()?,
                "out_dir" => cfg.out_dir = PathBuf::from(value),
                "coupling_strength" => cfg.dynamics.coupling_strength = finite(key, value)?,
                "hamiltonian_scale" => cfg.dynamics.hamiltonian_scale = finite(key, value)?,
                "dt" => cfg.dynamics.dt = finite(key, value)?,
                "observable" => observable = Some(value.to_string()),
                "plot" => cfg.plot = flag(key, value)?,
                other => return Err(Error::config(other, "unknown key")),
            }
        }
        cfg.dynamics.observable = match observable {
            Some(text) => text.parse()?,
            None => PauliString::z_first(cfg.dynamics.qubits),
        };
        cfg.dynamics.hamiltonian_seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = parse_pairs(&text)?;
        pairs.extend(overrides.iter().cloned());
        Self::from_pairs(&pairs)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dynamics.qubits;
        if !(1..=MAX_QUBITS).contains(&n) {
            return Err(Error::config(
                "n",
                format!("n must lie in 1..={MAX_QUBITS}"),
            ));
        }
        if self.window < 1 {
            return Err(Error::config("l", "l must be ≥ 1"));
        }
        if self.steps < self.window {
            return Err(Error::config("T", "T must be ≥ l"));
        }
        if self.noise_std < 0.0 || !self.noise_std.is_finite() {
            return Err(Error::config(
                "noise_std",
                "noise_std must be finite and ≥ 0",
            ));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::config("gamma", "gamma must be finite and > 0"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config("tau", "tau must be finite and > 0"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("algorithms", "no algorithm selected"));
        }
        if self.dynamics.hamiltonian_seed != self.seed {
            return Err(Error::config(
                "seed",
                "Hamiltonian seed differs from the run seed",
            ));
        }
        self.dynamics.validate()
    }

    pub fn qubits(&self) -> usize {
        self.dynamics.qubits
    }

    pub fn runs(&self, algorithm: Algorithm) -> bool {
        self.algorithms.contains(&algorithm)
    }

    /// Everything that affects the numbers, in canonical `key = value` form.
    pub fn canonical(&self) -> String {
        let algorithms: Vec<&str> = self.algorithms.iter().map(|a| a.name()).collect();
        let d = &self.dynamics;
        format!(
            "n = {}\nl = {}\nT = {}\nnoise_std = {:e}\ngamma = {:e}\ntau = {:e}\nseed = {}\n\
             algorithms = {}\nmode = {}\ncoupling_strength = {:e}\nhamiltonian_scale = {:e}\n\
             dt = {:e}\nobservable = {}\n",
            d.qubits,
            self.window,
            self.steps,
            self.noise_std,
            self.gamma,
            self.tau,
            self.seed,
            algorithms.join(","),
            self.mode,
            d.coupling_strength,
            d.hamiltonian_scale,
            d.dt,
            d.observable,
        )
    }

    /// SHA-256 of [`canonical`](Self::canonical), hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            n: self.dynamics.qubits,
            l: self.window,
            t: self.steps,
            noise_std: self.noise_std,
            gamma: self.gamma,
            tau: self.tau,
            seed: self.seed,
            algorithms: self.algorithms.clone(),
            mode: self.mode,
            coupling_strength: self.dynamics.coupling_strength,
            hamiltonian_scale: self.dynamics.hamiltonian_scale,
            dt: self.dynamics.dt,
            observable: self.dynamics.observable.to_string(),
            out_dir: self.out_dir.display().to_string(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConfigEcho {
    pub n: usize,
    pub l: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub noise_std: f64,
    pub gamma: f64,
    pub tau: f64,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub mode: Mode,
    pub coupling_strength: f64,
    pub hamiltonian_scale: f64,
    pub dt: f64,
    pub observable: String,
    pub out_dir: String,
}

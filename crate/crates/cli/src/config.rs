//! Flat `key = value` run configuration, presets and validation.

use std::fmt::Write as _;

use decolab_core::sampling::DEFAULT_SEED;
use decolab_core::{BandLimitedState, Coupling, MeasurementConfig, SystemKind};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemChoice {
    Qubit,
    Oscillator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fix {
    Lambda,
    Beta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemChoice,
    pub hbar: f64,
    pub alpha: f64,
    pub g0: f64,
    pub lambda: f64,
    pub kappa0: f64,
    pub b0: f64,
    pub omega: f64,
    pub k: usize,
    pub l: usize,
    pub b: f64,
    pub b_prime: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub tau_steps: usize,
    pub fix: Fix,
    pub beta: Option<f64>,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub seed: u64,
    pub levels: usize,
    pub s_points: usize,
}

pub const KEYS: [&str; 22] = [
    "system",
    "hbar",
    "alpha",
    "g0",
    "lambda",
    "kappa0",
    "b0",
    "omega",
    "k",
    "l",
    "b",
    "b_prime",
    "tau_min",
    "tau_max",
    "tau_steps",
    "fix",
    "beta",
    "abs_tol",
    "rel_tol",
    "seed",
    "levels",
    "s_points",
];

pub const PRESETS: [&str; 12] = [
    "fig2", "fig3", "fig4", "fig5", "fig6", "fig6a", "fig6b", "fig6c", "fig7", "fig7a", "fig7b", "fig7c",
];

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemChoice::Qubit,
            hbar: 1.0,
            alpha: 1.0,
            g0: 2.0,
            lambda: 4.0,
            kappa0: 0.25,
            b0: 1.0,
            omega: 1.0,
            k: 0,
            l: 1,
            b: 1.5,
            b_prime: -2.0,
            tau_min: 0.01,
            tau_max: 0.4,
            tau_steps: 200,
            fix: Fix::Lambda,
            beta: None,
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            seed: DEFAULT_SEED,
            levels: 3,
            s_points: 400,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("`{key}`: cannot parse `{value}`")))
}

impl RunConfig {
    pub fn preset(name: &str) -> CliResult<Self> {
        let fig2 = Self::default();
        let fig4 = Self {
            system: SystemChoice::Oscillator,
            lambda: 2.0,
            omega: 2.5,
            alpha: 2.0,
            kappa0: 0.5,
            g0: 2.0,
            b: 1.0,
            b_prime: 2.0,
            k: 2,
            l: 1,
            b0: 0.5,
            tau_min: 0.002,
            tau_max: 0.2,
            tau_steps: 200,
            ..fig2.clone()
        };
        Ok(match name {
            "fig2" => fig2,
            "fig3" => Self {
                tau_min: 0.05,
                tau_max: 1.5,
                tau_steps: 300,
                ..fig2
            },
            "fig4" => fig4,
            "fig5" => Self {
                tau_min: 0.005,
                tau_max: 0.4,
                tau_steps: 200,
                ..fig4
            },
            "fig6" | "fig6a" => Self { b0: 0.25, ..fig2 },
            "fig6b" => Self { b0: 1.2, ..fig2 },
            "fig6c" => Self { b0: 1.0, ..fig2 },
            "fig7" | "fig7a" => Self { b0: 0.5, ..fig4 },
            "fig7b" => Self { b0: 1.5, ..fig4 },
            "fig7c" => Self { b0: 1.25, ..fig4 },
            _ => {
                return Err(CliError::Validation(format!(
                    "unknown preset `{name}` (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        })
    }

    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let v = value.trim();
        match key {
            "system" => {
                self.system = match v {
                    "qubit" => SystemChoice::Qubit,
                    "oscillator" => SystemChoice::Oscillator,
                    _ => {
                        return Err(CliError::Validation(format!(
                            "`system`: expected qubit or oscillator, got `{v}`"
                        )))
                    }
                }
            }
            "fix" => {
                self.fix = match v {
                    "lambda" => Fix::Lambda,
                    "beta" => Fix::Beta,
                    _ => {
                        return Err(CliError::Validation(format!(
                            "`fix`: expected lambda or beta, got `{v}`"
                        )))
                    }
                }
            }
            "beta" => self.beta = if v == "none" { None } else { Some(parse(key, v)?) },
            "hbar" => self.hbar = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "g0" => self.g0 = parse(key, v)?,
            "lambda" => self.lambda = parse(key, v)?,
            "kappa0" => self.kappa0 = parse(key, v)?,
            "b0" => self.b0 = parse(key, v)?,
            "omega" => self.omega = parse(key, v)?,
            "k" => self.k = parse(key, v)?,
            "l" => self.l = parse(key, v)?,
            "b" => self.b = parse(key, v)?,
            "b_prime" => self.b_prime = parse(key, v)?,
            "tau_min" => self.tau_min = parse(key, v)?,
            "tau_max" => self.tau_max = parse(key, v)?,
            "tau_steps" => self.tau_steps = parse(key, v)?,
            "abs_tol" => self.abs_tol = parse(key, v)?,
            "rel_tol" => self.rel_tol = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "levels" => self.levels = parse(key, v)?,
            "s_points" => self.s_points = parse(key, v)?,
            _ => return Err(CliError::Validation(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("line {}: expected key = value", n + 1)))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> String {
        match key {
            "system" => match self.system {
                SystemChoice::Qubit => "qubit".into(),
                SystemChoice::Oscillator => "oscillator".into(),
            },
            "fix" => match self.fix {
                Fix::Lambda => "lambda".into(),
                Fix::Beta => "beta".into(),
            },
            "beta" => self.beta.map_or("none".into(), |b| b.to_string()),
            "hbar" => self.hbar.to_string(),
            "alpha" => self.alpha.to_string(),
            "g0" => self.g0.to_string(),
            "lambda" => self.lambda.to_string(),
            "kappa0" => self.kappa0.to_string(),
            "b0" => self.b0.to_string(),
            "omega" => self.omega.to_string(),
            "k" => self.k.to_string(),
            "l" => self.l.to_string(),
            "b" => self.b.to_string(),
            "b_prime" => self.b_prime.to_string(),
            "tau_min" => self.tau_min.to_string(),
            "tau_max" => self.tau_max.to_string(),
            "tau_steps" => self.tau_steps.to_string(),
            "abs_tol" => self.abs_tol.to_string(),
            "rel_tol" => self.rel_tol.to_string(),
            "seed" => self.seed.to_string(),
            "levels" => self.levels.to_string(),
            "s_points" => self.s_points.to_string(),
            _ => String::new(),
        }
    }

    /// The resolved configuration as `# key = value` comment lines.
    pub fn header(&self, command: &str) -> String {
        let mut s = format!("# decolab {command}\n");
        for key in KEYS {
            let _ = writeln!(s, "# {key} = {}", self.get(key));
        }
        s
    }

    pub fn validate(&self) -> CliResult<()> {
        self.measurement()?;
        let bad = |field: &str, why: &str| Err(CliError::Validation(format!("`{field}`: {why}")));
        match self.system {
            SystemChoice::Qubit if self.k > 1 || self.l > 1 => return bad("k", "qubit levels are 0 (+) and 1 (-)"),
            SystemChoice::Oscillator if !(self.omega.is_finite() && self.omega > 0.0) => {
                return bad("omega", "must be positive")
            }
            _ => {}
        }
        if self.k == self.l {
            return bad("l", "must differ from k");
        }
        if !(self.b.is_finite() && self.b_prime.is_finite()) {
            return bad("b", "pointer positions must be finite");
        }
        if !(self.tau_min.is_finite() && self.tau_min > 0.0) {
            return bad("tau_min", "must be positive");
        }
        if !(self.tau_max.is_finite() && self.tau_max > self.tau_min) {
            return bad("tau_max", "must exceed tau_min");
        }
        if self.tau_steps < 2 {
            return bad("tau_steps", "need at least two steps");
        }
        if self.fix == Fix::Beta && !self.beta.is_some_and(|b| b.is_finite() && b > 0.0) {
            return bad("beta", "fix = beta needs a positive beta");
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return bad("abs_tol", "tolerances must be positive");
        }
        if self.levels < 2 {
            return bad("levels", "need at least two levels");
        }
        if self.s_points < 2 {
            return bad("s_points", "need at least two points");
        }
        Ok(())
    }

    pub fn measurement(&self) -> CliResult<MeasurementConfig> {
        Ok(MeasurementConfig::new(
            self.hbar,
            self.alpha,
            self.g0,
            self.lambda,
            self.kappa0,
            self.b0,
        )?)
    }

    pub fn system_kind(&self) -> SystemKind {
        match self.system {
            SystemChoice::Qubit => SystemKind::Qubit,
            SystemChoice::Oscillator => SystemKind::Oscillator { omega: self.omega },
        }
    }

    pub fn coupling(&self) -> Coupling {
        match (self.fix, self.beta) {
            (Fix::Beta, Some(beta)) => Coupling::FixBeta(beta),
            _ => Coupling::FixLambda,
        }
    }

    pub fn eigenvalue(&self, n: usize) -> f64 {
        self.system_kind().eigenvalue(n, self.hbar)
    }

    /// |a_k − a_l|.
    pub fn gap(&self) -> f64 {
        (self.eigenvalue(self.k) - self.eigenvalue(self.l)).abs()
    }

    pub fn probe(&self) -> CliResult<BandLimitedState> {
        Ok(BandLimitedState::sinc(self.kappa0, self.hbar)?)
    }

    pub fn pointer(&self) -> CliResult<BandLimitedState> {
        Ok(BandLimitedState::sinc(self.b0, self.hbar)?)
    }

    pub fn tau_grid(&self) -> Vec<f64> {
        let n = self.tau_steps;
        (0..n)
            .map(|i| self.tau_min + (self.tau_max - self.tau_min) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for p in PRESETS {
            RunConfig::preset(p).unwrap().validate().unwrap();
        }
        assert!(RunConfig::preset("fig9").is_err());
    }

    #[test]
    fn text_round_trip() {
        let c = RunConfig::preset("fig4").unwrap();
        let text: String = KEYS.iter().map(|k| format!("{k} = {}\n", c.get(k))).collect();
        let mut d = RunConfig::default();
        d.apply_text(&text).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn comments_and_errors() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\nlambda = 3 # trailing\n\n").unwrap();
        assert_eq!(c.lambda, 3.0);
        assert!(c.apply_text("lambda 3").is_err());
        assert!(c.apply_text("colour = red").is_err());
        assert!(c.apply_text("lambda = x").is_err());
    }

    #[test]
    fn validation_names_fields() {
        let c = RunConfig {
            lambda: -4.0,
            ..RunConfig::default()
        };
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("lambda"), "{e}");
        let c = RunConfig {
            fix: Fix::Beta,
            ..RunConfig::default()
        };
        assert!(c.validate().unwrap_err().to_string().contains("beta"));
        let c = RunConfig {
            k: 1,
            l: 1,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn tau_grid_endpoints() {
        let g = RunConfig::default().tau_grid();
        assert_eq!(g.len(), 200);
        assert_eq!(g[0], 0.01);
        assert!((g[199] - 0.4).abs() < 1e-15);
    }
}

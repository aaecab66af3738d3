//! Model parameters, observable spectra and the characteristic timescales.

use num_complex::Complex64;

use crate::error::{positive, Error, Result};

/// Couplings, band limits and ħ of the system–probe–pointer model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementConfig {
    pub hbar: f64,
    pub alpha: f64,
    pub g0: f64,
    pub lambda: f64,
    /// Probe band limit κ₀.
    pub kappa0: f64,
    /// Pointer band limit b₀.
    pub b0: f64,
}

impl MeasurementConfig {
    pub fn new(hbar: f64, alpha: f64, g0: f64, lambda: f64, kappa0: f64, b0: f64) -> Result<Self> {
        let cfg = Self {
            hbar,
            alpha,
            g0,
            lambda,
            kappa0,
            b0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        positive("hbar", self.hbar)?;
        positive("alpha", self.alpha)?;
        positive("g0", self.g0)?;
        positive("lambda", self.lambda)?;
        positive("kappa0", self.kappa0)?;
        positive("b0", self.b0)
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    /// αg₀Δτ, the recurring pulse area factor.
    #[inline]
    pub fn pulse(&self, dtau: f64) -> f64 {
        self.alpha * self.g0 * dtau
    }
}

/// How β relates to λ when the interaction time varies.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Coupling {
    /// λ held fixed, β(t) = 2λ/(αg₀²t²).
    #[default]
    FixLambda,
    /// β held fixed, so the effective λ(t) = αβg₀²t²/2 grows with t.
    FixBeta(f64),
}

impl Coupling {
    pub fn beta(&self, cfg: &MeasurementConfig, t: f64) -> Result<f64> {
        match *self {
            Coupling::FixLambda => beta_of(cfg, t),
            Coupling::FixBeta(beta) => Ok(beta),
        }
    }

    pub fn lambda(&self, cfg: &MeasurementConfig, t: f64) -> f64 {
        match *self {
            Coupling::FixLambda => cfg.lambda,
            Coupling::FixBeta(beta) => 0.5 * cfg.alpha * beta * cfg.g0 * cfg.g0 * t * t,
        }
    }

    /// The configuration with λ replaced by its value at time t.
    pub fn effective(&self, cfg: &MeasurementConfig, t: f64) -> MeasurementConfig {
        cfg.with_lambda(self.lambda(cfg, t))
    }
}

/// Eigenvalues of the measured observable and the initial amplitudes on them.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    eigenvalues: Vec<f64>,
    amplitudes: Vec<Complex64>,
}

impl SpectrumSpec {
    pub fn new(eigenvalues: Vec<f64>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if eigenvalues.len() != amplitudes.len() {
            return Err(Error::InvalidParameter {
                field: "amplitudes",
                reason: format!("{} amplitudes for {} eigenvalues", amplitudes.len(), eigenvalues.len()),
            });
        }
        if let Some(v) = eigenvalues.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "eigenvalues",
                reason: format!("non-finite eigenvalue {v}"),
            });
        }
        let scale = eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (i, a) in eigenvalues.iter().enumerate() {
            for b in &eigenvalues[i + 1..] {
                if (a - b).abs() <= 1e-12 * scale {
                    return Err(Error::DegenerateSpectrum(*a, *b));
                }
            }
        }
        let norm: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self {
            eigenvalues,
            amplitudes,
        })
    }

    /// Spin-1/2 S_z: index 0 is +ħ/2, index 1 is −ħ/2.
    pub fn qubit(hbar: f64, amplitudes: [Complex64; 2]) -> Result<Self> {
        Self::new(vec![0.5 * hbar, -0.5 * hbar], amplitudes.to_vec())
    }

    /// Oscillator energies (k + 1/2)ħω for k = 0..amplitudes.len().
    pub fn oscillator(hbar: f64, omega: f64, amplitudes: Vec<Complex64>) -> Result<Self> {
        positive("omega", omega)?;
        let eig = (0..amplitudes.len()).map(|k| (k as f64 + 0.5) * hbar * omega).collect();
        Self::new(eig, amplitudes)
    }

    pub fn equal_weights(n: usize) -> Vec<Complex64> {
        vec![Complex64::new(1.0 / (n as f64).sqrt(), 0.0); n]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Which measured system a kernel refers to.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemKind {
    Qubit,
    Oscillator { omega: f64 },
    Custom(SpectrumSpec),
}

impl SystemKind {
    pub fn eigenvalue(&self, k: usize, hbar: f64) -> f64 {
        match self {
            SystemKind::Qubit => {
                if k == 0 {
                    0.5 * hbar
                } else {
                    -0.5 * hbar
                }
            }
            SystemKind::Oscillator { omega } => (k as f64 + 0.5) * hbar * omega,
            SystemKind::Custom(spec) => spec.eigenvalues[k],
        }
    }

    pub fn validate(&self, k: usize, l: usize) -> Result<()> {
        let n = match self {
            SystemKind::Qubit => 2,
            SystemKind::Oscillator { omega } => {
                positive("omega", *omega)?;
                usize::MAX
            }
            SystemKind::Custom(spec) => spec.len(),
        };
        if k >= n || l >= n {
            return Err(Error::InvalidParameter {
                field: "k",
                reason: format!("level index ({k}, {l}) out of range"),
            });
        }
        Ok(())
    }
}

/// Square pulse g(t) = g₀ on [t_in, t_f].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseProfile {
    pub g0: f64,
    pub t_in: f64,
    pub t_f: f64,
}

impl PulseProfile {
    pub fn new(g0: f64, t_in: f64, t_f: f64) -> Result<Self> {
        positive("g0", g0)?;
        if !(t_f > t_in) {
            return Err(Error::InvalidParameter {
                field: "t_f",
                reason: format!("pulse window [{t_in}, {t_f}] is empty"),
            });
        }
        Ok(Self { g0, t_in, t_f })
    }

    pub fn g(&self, t: f64) -> f64 {
        if (self.t_in..=self.t_f).contains(&t) {
            self.g0
        } else {
            0.0
        }
    }

    pub fn duration(&self) -> f64 {
        self.t_f - self.t_in
    }
}

/// a₀, the smallest positive eigenvalue gap.
pub fn min_gap(spec: &SpectrumSpec) -> Result<f64> {
    if spec.len() < 2 {
        return Err(Error::SingleLevel);
    }
    let mut v = spec.eigenvalues.clone();
    v.sort_by(f64::total_cmp);
    Ok(v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min))
}

/// Δτ_D = 2κ₀ħ/(αg₀a₀).
pub fn decoherence_time(cfg: &MeasurementConfig, a0: f64) -> f64 {
    2.0 * cfg.kappa0 * cfg.hbar / (cfg.alpha * cfg.g0 * a0)
}

/// λ > 2b₀ħ/a₀.
pub fn orthogonality_condition(cfg: &MeasurementConfig, a0: f64) -> bool {
    cfg.lambda > 2.0 * cfg.b0 * cfg.hbar / a0
}

/// Δτ_O = 4κ₀ħ/(αg₀(a₀ − 2b₀ħ/λ)).
pub fn orthogonality_time(cfg: &MeasurementConfig, a0: f64) -> Result<f64> {
    if !orthogonality_condition(cfg, a0) {
        return Err(Error::OrthogonalityUnattainable {
            lambda: cfg.lambda,
            bound: 2.0 * cfg.b0 * cfg.hbar / a0,
        });
    }
    let denom = a0 - 2.0 * cfg.b0 * cfg.hbar / cfg.lambda;
    Ok(4.0 * cfg.kappa0 * cfg.hbar / (cfg.alpha * cfg.g0 * denom))
}

/// β = 2λ/(αg₀²t²).
pub fn beta_of(cfg: &MeasurementConfig, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Err(Error::DegenerateTime);
    }
    positive("t", t.abs())?;
    Ok(2.0 * cfg.lambda / (cfg.alpha * cfg.g0 * cfg.g0 * t * t))
}

/// True when `value` sits at or past `threshold` up to float rounding.
pub(crate) fn at_or_beyond(value: f64, threshold: f64) -> bool {
    value >= threshold * (1.0 - 1e-12)
}

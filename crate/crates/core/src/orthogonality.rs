//! Pointer states, their product kernels S_kl(b, b′) and orthogonality scans.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::decoherence::{check_grid, first_below, Evaluator, ThresholdReport};
use crate::dynamics::Grid1D;
use crate::error::{Error, Result};
use crate::model::{at_or_beyond, orthogonality_condition, orthogonality_time, MeasurementConfig, SystemKind};
use crate::quad::{
    integrate_real_line, ExpRational, QuadratureRequest, QuadratureResult, DEFAULT_ABS_TOL, DEFAULT_REL_TOL,
};
use crate::sampling::{seeded_pairs, DEFAULT_SEED};
use crate::special::{compensated_sum, csinc, sin_over};
use crate::states::{f_eta, BandLimitedState};

/// ⟨b|ρ_k|b′⟩ = Φ(b)Φ*(b′)·F(b′ − b)·e^{iλa_k(b−b′)/ħ}.
#[allow(clippy::too_many_arguments)]
pub fn pointer_state_kernel(
    cfg: &MeasurementConfig,
    probe: &BandLimitedState,
    pointer: &BandLimitedState,
    a_k: f64,
    dtau: f64,
    b: f64,
    b_prime: f64,
) -> Complex64 {
    let overlap = f_eta(probe, cfg, dtau, b_prime - b);
    pointer.position_amplitude(b)
        * pointer.position_amplitude(b_prime).conj()
        * Complex64::from_polar(overlap, cfg.lambda * a_k * (b - b_prime) / cfg.hbar)
}

/// S_kl(b, b′) = ∫ e^{−iλ(a_k−a_l)b″/ħ} |Φ(b″)|² F(b − b″) F(b″ − b′) db″.
#[allow(clippy::too_many_arguments)]
pub fn s_quadrature(
    cfg: &MeasurementConfig,
    probe: &BandLimitedState,
    pointer: &BandLimitedState,
    a_k: f64,
    a_l: f64,
    dtau: f64,
    b: f64,
    b_prime: f64,
) -> Result<Complex64> {
    let tol = (DEFAULT_ABS_TOL, DEFAULT_REL_TOL);
    Ok(s_quadrature_with(cfg, probe, pointer, (a_k, a_l), dtau, (b, b_prime), tol)?.value)
}

pub fn s_quadrature_with(
    cfg: &MeasurementConfig,
    probe: &BandLimitedState,
    pointer: &BandLimitedState,
    (a_k, a_l): (f64, f64),
    dtau: f64,
    (b, b_prime): (f64, f64),
    (abs_tol, rel_tol): (f64, f64),
) -> Result<QuadratureResult> {
    let mu = cfg.lambda * (a_k - a_l) / cfg.hbar;
    let kk = 2.0 * cfg.lambda * probe.band_limit() / cfg.pulse(dtau);
    let b0 = pointer.band_limit();
    let freq = mu.abs() + 2.0 * b0 + 2.0 * kk;
    if probe.is_sinc() && pointer.is_sinc() {
        let norm = 1.0 / (PI * b0 * kk * kk);
        let f = move |z: f64| {
            let w = sin_over(b0, z);
            Complex64::from_polar(norm, -mu * z) * (w * w * sin_over(kk, z - b) * sin_over(kk, z - b_prime))
        };
        let factors = [(b0, 0.0), (b0, 0.0), (kk, b), (kk, b_prime)];
        let tail = ExpRational::sinc_product(Complex64::new(norm, 0.0), -mu, &factors);
        let req = QuadratureRequest::new(&f)
            .frequency(freq)
            .breakpoints([0.0, b, b_prime])
            .tolerances(abs_tol, rel_tol)
            .tail(&tail);
        integrate_real_line(&req)
    } else {
        let f = |z: f64| {
            Complex64::from_polar(pointer.position_density(z), -mu * z)
                * (f_eta(probe, cfg, dtau, b - z) * f_eta(probe, cfg, dtau, z - b_prime))
        };
        let req = QuadratureRequest::new(&f)
            .frequency(freq)
            .breakpoints([0.0, b, b_prime])
            .tolerances(abs_tol, rel_tol);
        integrate_real_line(&req)
    }
}

/// Active regime of the piecewise closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Branch {
    G1,
    G2,
    G3,
    Zero,
}

impl Branch {
    pub fn id(self) -> u8 {
        match self {
            Branch::G1 => 1,
            Branch::G2 => 2,
            Branch::G3 => 3,
            Branch::Zero => 4,
        }
    }
}

/// The sinc–sinc orthogonality function as a piecewise closed form in Δτ.
///
/// With μ = λ(a_k − a_l)/ħ, K = 2λκ₀/(αg₀Δτ) and C = 1/K:
///
/// * G₁ for Δτ ≤ 4λκ₀/(αg₀(μ + 2b₀)),
/// * G₂ up to 4λκ₀/(αg₀μ),
/// * G₃ up to 4λκ₀/(αg₀(μ − 2b₀)),
/// * exactly 0 from there on.
///
/// Negative μ gives the conjugate of the |μ| kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiecewiseKernel {
    lambda: f64,
    kappa0: f64,
    alpha_g0: f64,
    b0: f64,
    mu: f64,
    conjugate: bool,
    boundaries: [f64; 3],
}

/// Distance to b = 0, b′ = 0 or b = b′ below which the Cauchy mean is used.
const SINGULAR_BAND: f64 = 1e-3;
const CAUCHY_NODES: usize = 32;

impl PiecewiseKernel {
    pub fn new(cfg: &MeasurementConfig, mu: f64) -> Result<Self> {
        cfg.validate()?;
        let m = mu.abs();
        if !(m > 2.0 * cfg.b0) {
            return Err(Error::ConditionViolated(format!(
                "|mu| = {m} must exceed 2 b0 = {}",
                2.0 * cfg.b0
            )));
        }
        let ag = cfg.alpha * cfg.g0;
        let num = 4.0 * cfg.lambda * cfg.kappa0;
        Ok(Self {
            lambda: cfg.lambda,
            kappa0: cfg.kappa0,
            alpha_g0: ag,
            b0: cfg.b0,
            mu: m,
            conjugate: mu < 0.0,
            boundaries: [
                num / (ag * (m + 2.0 * cfg.b0)),
                num / (ag * m),
                num / (ag * (m - 2.0 * cfg.b0)),
            ],
        })
    }

    /// S₊₋ for the spin-1/2 (μ = λ).
    pub fn qubit(cfg: &MeasurementConfig) -> Result<Self> {
        Self::new(cfg, cfg.lambda)
    }

    /// S_kl for oscillator levels (μ = λω(k − l)).
    pub fn oscillator(cfg: &MeasurementConfig, omega: f64, k: usize, l: usize) -> Result<Self> {
        Self::new(cfg, cfg.lambda * omega * (k as f64 - l as f64))
    }

    pub fn boundaries(&self) -> [f64; 3] {
        self.boundaries
    }

    /// Lower-indexed branch at shared boundaries; zero inclusive at the last.
    pub fn branch(&self, dtau: f64) -> Branch {
        let [t1, t2, t3] = self.boundaries;
        if at_or_beyond(dtau, t3) {
            Branch::Zero
        } else if dtau <= t1 {
            Branch::G1
        } else if dtau <= t2 {
            Branch::G2
        } else {
            Branch::G3
        }
    }

    pub fn eval(&self, dtau: f64, b: f64, b_prime: f64) -> Complex64 {
        self.eval_branch(self.branch(dtau), dtau, b, b_prime)
    }

    pub fn eval_with_branch(&self, dtau: f64, b: f64, b_prime: f64) -> (Complex64, Branch) {
        let br = self.branch(dtau);
        (self.eval_branch(br, dtau, b, b_prime), br)
    }

    /// Evaluates one branch regardless of the regime Δτ falls in.
    pub fn eval_branch(&self, branch: Branch, dtau: f64, b: f64, b_prime: f64) -> Complex64 {
        if branch == Branch::Zero {
            return Complex64::new(0.0, 0.0);
        }
        let near = b.abs().min(b_prime.abs()).min((b - b_prime).abs());
        let v = if near >= SINGULAR_BAND {
            self.raw(branch, dtau, b.into(), b_prime.into())
        } else {
            self.cauchy_mean(branch, dtau, b, b_prime)
        };
        if self.conjugate {
            v.conj()
        } else {
            v
        }
    }

    /// Mean over a torus around (b, b′) in complex space. The assembled
    /// kernel is entire, so this recovers it at the removable singularities.
    fn cauchy_mean(&self, branch: Branch, dtau: f64, b: f64, b_prime: f64) -> Complex64 {
        let kk = 2.0 * self.lambda * self.kappa0 / (self.alpha_g0 * dtau);
        let growth = kk + 2.0 * self.b0 + self.mu;
        let r0 = 0.05f64.min(0.5 / growth);
        let (db, dbp, du) = (b.abs(), b_prime.abs(), (b - b_prime).abs());
        let r = (0..60)
            .map(|j| r0 * 0.77f64.powi(j))
            .find(|&r| {
                (db <= 1.5 * r || db >= 2.5 * r)
                    && (dbp <= 0.5 * r || dbp >= 1.5 * r)
                    && (du <= 0.5 * r || du >= 3.5 * r)
            })
            .unwrap_or(r0);
        let n = CAUCHY_NODES;
        let nodes: Vec<Complex64> = (0..n)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * (j as f64 + 0.5) / n as f64))
            .collect();
        let sum = compensated_sum(nodes.iter().flat_map(|e1| {
            nodes.iter().map(move |e2| {
                let z = Complex64::new(b, 0.0) + 2.0 * r * e1;
                let w = Complex64::new(b_prime, 0.0) + r * e2;
                self.raw(branch, dtau, z, w)
            })
        }));
        sum / (n * n) as f64
    }

    fn raw(&self, branch: Branch, dtau: f64, z: Complex64, w: Complex64) -> Complex64 {
        let i = Complex64::i();
        let (b0, mu) = (self.b0, self.mu);
        let kk = 2.0 * self.lambda * self.kappa0 / (self.alpha_g0 * dtau);
        let c2 = 1.0 / (kk * kk);
        let u = z - w;
        let ep = (i * kk * u).exp();
        let em = (-i * kk * u).exp();
        match branch {
            Branch::G1 => {
                let sq = |x: Complex64| {
                    let s = csinc(b0 * x) * b0;
                    s * s
                };
                i * c2 / (2.0 * b0) * ((-i * mu * w).exp() * em * sq(w) - (-i * mu * z).exp() * ep * sq(z)) / u
            }
            Branch::G2 => {
                let f = |x: Complex64| {
                    let s = (b0 * x).sin();
                    i * (-i * mu * x).exp() * (4.0 * s * s + (-2.0 * i * b0 * x).exp()) / (x * x)
                };
                let phi = 2.0 * b0 + mu + i * (z + w) / (z * w) - 2.0 * kk;
                c2 / (8.0 * b0) * ((f(w) * em - f(z) * ep) / u - phi * (-i * kk * (z + w)).exp() / (z * w))
            }
            Branch::G3 => {
                let h = |x: Complex64| i * (-i * (mu - 2.0 * b0) * x).exp() / (x * x);
                let phi = -2.0 * b0 + mu + i * (z + w) / (z * w) - 2.0 * kk;
                c2 / (8.0 * b0) * ((h(z) * ep - h(w) * em) / u + phi * (-i * kk * (z + w)).exp() / (z * w))
            }
            Branch::Zero => Complex64::new(0.0, 0.0),
        }
    }
}

/// S₊₋(b, b′) for the spin-1/2 with sinc probe and pointer.
pub fn s_qubit_closed(cfg: &MeasurementConfig, dtau: f64, b: f64, b_prime: f64) -> Result<Complex64> {
    Ok(PiecewiseKernel::qubit(cfg)?.eval(dtau, b, b_prime))
}

/// S_kl(b, b′) for oscillator levels with sinc probe and pointer.
pub fn s_oscillator_closed(
    cfg: &MeasurementConfig,
    omega: f64,
    k: usize,
    l: usize,
    dtau: f64,
    b: f64,
    b_prime: f64,
) -> Result<Complex64> {
    Ok(PiecewiseKernel::oscillator(cfg, omega, k, l)?.eval(dtau, b, b_prime))
}

/// Grid contraction of ⟨b|ρ_kρ_l|b′⟩ next to the kernel formula
/// e^{iλ(a_k b − a_l b′)/ħ}Φ(b)Φ*(b′)S_kl(b, b′).
#[allow(clippy::too_many_arguments)]
pub fn product_offdiag_check(
    cfg: &MeasurementConfig,
    probe: &BandLimitedState,
    pointer: &BandLimitedState,
    (a_k, a_l): (f64, f64),
    dtau: f64,
    (b, b_prime): (f64, f64),
    grid: &Grid1D,
) -> Result<(Complex64, Complex64)> {
    let kk = 2.0 * cfg.lambda * probe.band_limit() / cfg.pulse(dtau);
    let mu = cfg.lambda * (a_k - a_l) / cfg.hbar;
    let bandwidth = mu.abs() + 2.0 * pointer.band_limit() + 2.0 * kk;
    if grid.step() * bandwidth >= 2.0 * PI {
        return Err(Error::GridTooCoarse(format!(
            "spacing {} aliases an integrand of bandwidth {bandwidth}",
            grid.step()
        )));
    }
    let h = grid.step();
    let contracted = compensated_sum(grid.points().map(|x| {
        pointer_state_kernel(cfg, probe, pointer, a_k, dtau, b, x)
            * pointer_state_kernel(cfg, probe, pointer, a_l, dtau, x, b_prime)
            * h
    }));
    let s = s_quadrature(cfg, probe, pointer, a_k, a_l, dtau, b, b_prime)?;
    let formula = pointer.position_amplitude(b)
        * pointer.position_amplitude(b_prime).conj()
        * Complex64::from_polar(1.0, cfg.lambda * (a_k * b - a_l * b_prime) / cfg.hbar)
        * s;
    Ok((contracted, formula))
}

/// Sampled family for [`orthogonality_threshold_scan`].
#[derive(Debug, Clone)]
pub struct OrthogonalityFamily {
    pub system: SystemKind,
    pub probe: BandLimitedState,
    pub pointer: BandLimitedState,
    pub cfg: MeasurementConfig,
    pub levels: Vec<(usize, usize)>,
    pub pairs: Vec<(f64, f64)>,
    pub tol: f64,
}

impl OrthogonalityFamily {
    /// Five seeded pairs on ±3/b₀ plus `pair`.
    pub fn new(
        system: SystemKind,
        probe: BandLimitedState,
        pointer: BandLimitedState,
        cfg: MeasurementConfig,
        (k, l): (usize, usize),
        pair: (f64, f64),
    ) -> Self {
        let mut pairs = vec![pair];
        pairs.extend(seeded_pairs(5, 3.0 / cfg.b0, DEFAULT_SEED));
        Self {
            system,
            probe,
            pointer,
            cfg,
            levels: vec![(k, l)],
            pairs,
            tol: 1e-8,
        }
    }

    pub fn with_pairs(mut self, pairs: Vec<(f64, f64)>) -> Self {
        self.pairs = pairs;
        self
    }

    fn min_gap(&self) -> f64 {
        let h = self.cfg.hbar;
        self.levels
            .iter()
            .map(|&(k, l)| (self.system.eigenvalue(k, h) - self.system.eigenvalue(l, h)).abs())
            .fold(f64::INFINITY, f64::min)
    }

    fn value(&self, evaluator: Evaluator, (k, l): (usize, usize), dtau: f64, (b, bp): (f64, f64)) -> Result<Complex64> {
        let h = self.cfg.hbar;
        let (a_k, a_l) = (self.system.eigenvalue(k, h), self.system.eigenvalue(l, h));
        match evaluator {
            Evaluator::Quadrature => s_quadrature(&self.cfg, &self.probe, &self.pointer, a_k, a_l, dtau, b, bp),
            Evaluator::Closed => {
                if !(self.probe.is_sinc() && self.pointer.is_sinc()) {
                    return Err(Error::ConditionViolated(
                        "closed-form orthogonality kernels need sinc probe and pointer".into(),
                    ));
                }
                let cfg = MeasurementConfig {
                    kappa0: self.probe.band_limit(),
                    b0: self.pointer.band_limit(),
                    ..self.cfg
                };
                let kernel = PiecewiseKernel::new(&cfg, cfg.lambda * (a_k - a_l) / h)?;
                Ok(kernel.eval(dtau, b, bp))
            }
        }
    }
}

/// Smallest grid Δτ with every sampled |S_{k≠l}| below the family tolerance.
pub fn orthogonality_threshold_scan(
    family: &OrthogonalityFamily,
    dtau_grid: &[f64],
    evaluator: Evaluator,
) -> Result<ThresholdReport> {
    check_grid(dtau_grid)?;
    let a0 = family.min_gap();
    if !orthogonality_condition(&family.cfg, a0) {
        let last = *dtau_grid.last().unwrap();
        let max_abs = family
            .pairs
            .iter()
            .map(|&p| {
                family
                    .value(Evaluator::Quadrature, family.levels[0], last, p)
                    .map(|v| v.norm())
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        return Err(Error::NotReached { last, max_abs });
    }
    let max_abs = dtau_grid
        .par_iter()
        .map(|&t| {
            let mut m = 0.0f64;
            for &lv in &family.levels {
                for &p in &family.pairs {
                    m = m.max(family.value(evaluator, lv, t, p)?.norm());
                }
            }
            Ok(m)
        })
        .collect::<Result<Vec<f64>>>()?;
    first_below(dtau_grid, max_abs, family.tol, orthogonality_time(&family.cfg, a0).ok())
}

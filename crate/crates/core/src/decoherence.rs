//! Decoherence factors I_kl(b, b′) and decoherence-threshold scans.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{positive, Error, Result};
use crate::model::{at_or_beyond, decoherence_time, Coupling, MeasurementConfig, SystemKind};
use crate::quad::{
    integrate_interval, integrate_real_line, ExpRational, QuadratureRequest, QuadratureResult, DEFAULT_ABS_TOL,
    DEFAULT_REL_TOL,
};
use crate::sampling::{seeded_pairs, DEFAULT_SEED};
use crate::special::{expm1_over, sin_over, sinc};
use crate::states::BandLimitedState;

#[derive(Debug, Clone)]
pub struct DecoherenceFactorSpec {
    pub system: SystemKind,
    pub probe: BandLimitedState,
    pub cfg: MeasurementConfig,
    pub coupling: Coupling,
    pub k: usize,
    pub l: usize,
    pub b: f64,
    pub b_prime: f64,
    pub dtau: f64,
}

impl DecoherenceFactorSpec {
    pub fn new(
        system: SystemKind,
        probe: BandLimitedState,
        cfg: MeasurementConfig,
        (k, l): (usize, usize),
        (b, b_prime): (f64, f64),
        dtau: f64,
    ) -> Result<Self> {
        let spec = Self {
            system,
            probe,
            cfg,
            coupling: Coupling::FixLambda,
            k,
            l,
            b,
            b_prime,
            dtau,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        positive("dtau", self.dtau)?;
        self.system.validate(self.k, self.l)
    }

    pub fn at(&self, dtau: f64, b: f64, b_prime: f64) -> Self {
        Self {
            dtau,
            b,
            b_prime,
            ..self.clone()
        }
    }

    /// (a_k − a_l)/ħ.
    pub fn nu(&self) -> f64 {
        let h = self.cfg.hbar;
        (self.system.eigenvalue(self.k, h) - self.system.eigenvalue(self.l, h)) / h
    }

    fn effective(&self) -> MeasurementConfig {
        self.coupling.effective(&self.cfg, self.dtau)
    }
}

/// Quadrature of the defining q-integral, default tolerances.
pub fn i_quadrature(spec: &DecoherenceFactorSpec) -> Result<Complex64> {
    Ok(i_quadrature_with(spec, DEFAULT_ABS_TOL, DEFAULT_REL_TOL)?.value)
}

pub fn i_quadrature_with(spec: &DecoherenceFactorSpec, abs_tol: f64, rel_tol: f64) -> Result<QuadratureResult> {
    spec.validate()?;
    let cfg = spec.effective();
    let pulse = cfg.pulse(spec.dtau);
    let omega = pulse * spec.nu();
    let c = 2.0 * cfg.lambda / pulse;
    let (x, y) = (c * spec.b, c * spec.b_prime);
    let kappa = spec.probe.band_limit();
    if spec.probe.is_sinc() {
        let norm = 1.0 / (PI * kappa);
        let f =
            move |q: f64| Complex64::from_polar(norm, -omega * q) * (sin_over(kappa, q - x) * sin_over(kappa, q - y));
        let tail = ExpRational::sinc_product(Complex64::new(norm, 0.0), -omega, &[(kappa, x), (kappa, y)]);
        let req = QuadratureRequest::new(&f)
            .frequency(omega.abs() + 2.0 * kappa)
            .breakpoints([x, y])
            .tolerances(abs_tol, rel_tol)
            .tail(&tail);
        integrate_real_line(&req)
    } else {
        // Parseval: the q-integral collapses onto the overlap of the two
        // shifted momentum supports.
        let hbar = spec.probe.hbar();
        let edge = hbar * kappa;
        let shift = hbar * omega;
        let (lo, hi) = ((-edge).max(shift - edge), edge.min(shift + edge));
        if lo >= hi {
            return Ok(QuadratureResult {
                value: Complex64::new(0.0, 0.0),
                error_estimate: 0.0,
                panels_used: 0,
            });
        }
        let probe = &spec.probe;
        let f = |p: f64| {
            probe.momentum_amplitude(p)
                * probe.momentum_amplitude(p - shift).conj()
                * Complex64::from_polar(1.0, (-p * x + (p - shift) * y) / hbar)
        };
        let req = QuadratureRequest::new(&f)
            .frequency((x - y).abs() / hbar)
            .tolerances(abs_tol, rel_tol);
        integrate_interval(&req, lo, hi)
    }
}

/// The sinc-probe closed form for a level gap ν = (a_k − a_l)/ħ.
///
/// For ν > 0 this is (iαg₀Δτ/4λκ₀)·V(b, b′) with
/// V = [e^{−2iλ(κu + νb′)} − e^{2iλ(κu − νb)}]/u, u = b − b′, κ = κ₀/(αg₀Δτ),
/// exactly zero once αg₀Δτ|ν| ≥ 2κ₀. Negative gaps give the conjugate.
pub fn sinc_factor_closed(cfg: &MeasurementConfig, nu: f64, b: f64, b_prime: f64, dtau: f64) -> Complex64 {
    let pulse = cfg.pulse(dtau);
    let (lambda, k0) = (cfg.lambda, cfg.kappa0);
    let u = b - b_prime;
    if nu == 0.0 {
        return Complex64::new(sinc(2.0 * lambda * k0 / pulse * u), 0.0);
    }
    let v = nu.abs();
    if at_or_beyond(pulse * v, 2.0 * k0) {
        return Complex64::new(0.0, 0.0);
    }
    let kappa = k0 / pulse;
    let i = Complex64::i();
    let a = -2.0 * lambda * (kappa * u + v * b_prime);
    let bb = 2.0 * lambda * (kappa * u - v * b);
    let shape = if u.abs() >= 1e-6 * b.abs().max(1.0) {
        ((i * a).exp() - (i * bb).exp()) / u
    } else {
        let gamma = 2.0 * lambda * v - 4.0 * lambda * kappa;
        (i * bb).exp() * gamma * expm1_over(Complex64::new(u * gamma, 0.0))
    };
    let value = i * (pulse / (4.0 * lambda * k0)) * shape;
    if nu > 0.0 {
        value
    } else {
        value.conj()
    }
}

/// I₊₋(b, b′) for the spin-1/2 with a sinc probe.
pub fn i_qubit_closed(cfg: &MeasurementConfig, b: f64, b_prime: f64, dtau: f64) -> Complex64 {
    sinc_factor_closed(cfg, 1.0, b, b_prime, dtau)
}

/// I_kl(b, b′) for oscillator levels k, l with a sinc probe.
///
/// The |k−l| form holds for k > l; for k < l the value is its conjugate.
pub fn i_oscillator_closed(
    cfg: &MeasurementConfig,
    omega: f64,
    k: usize,
    l: usize,
    b: f64,
    b_prime: f64,
    dtau: f64,
) -> Complex64 {
    sinc_factor_closed(cfg, omega * (k as f64 - l as f64), b, b_prime, dtau)
}

/// Closed form for any spectrum, sinc probe only.
pub fn i_closed(spec: &DecoherenceFactorSpec) -> Result<Complex64> {
    spec.validate()?;
    if !spec.probe.is_sinc() {
        return Err(Error::ConditionViolated(
            "closed-form decoherence factors need a sinc probe".into(),
        ));
    }
    let cfg = MeasurementConfig {
        kappa0: spec.probe.band_limit(),
        ..spec.effective()
    };
    Ok(sinc_factor_closed(&cfg, spec.nu(), spec.b, spec.b_prime, spec.dtau))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluator {
    Closed,
    Quadrature,
}

impl Evaluator {
    pub fn decoherence(self, spec: &DecoherenceFactorSpec) -> Result<Complex64> {
        match self {
            Evaluator::Closed => i_closed(spec),
            Evaluator::Quadrature => i_quadrature(spec),
        }
    }
}

/// Outcome of a threshold scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    /// First grid time at which every sampled value is below tolerance.
    pub threshold: f64,
    /// The analytic threshold for comparison.
    pub analytic: Option<f64>,
    /// Grid spacing around the detected threshold.
    pub step: f64,
    /// max |value| over the sampled points at each grid time.
    pub max_abs: Vec<f64>,
}

/// A parameter family sampled at several level pairs and pointer positions.
#[derive(Debug, Clone)]
pub struct DecoherenceFamily {
    pub base: DecoherenceFactorSpec,
    pub levels: Vec<(usize, usize)>,
    pub pairs: Vec<(f64, f64)>,
    pub tol: f64,
}

impl DecoherenceFamily {
    /// Five seeded pairs on ±3/b₀ plus the pair carried by `base`.
    pub fn new(base: DecoherenceFactorSpec) -> Self {
        let mut pairs = vec![(base.b, base.b_prime)];
        pairs.extend(seeded_pairs(5, 3.0 / base.cfg.b0, DEFAULT_SEED));
        Self {
            levels: vec![(base.k, base.l)],
            pairs,
            tol: 1e-8,
            base,
        }
    }

    pub fn with_pairs(mut self, pairs: Vec<(f64, f64)>) -> Self {
        self.pairs = pairs;
        self
    }

    pub fn with_levels(mut self, levels: Vec<(usize, usize)>) -> Self {
        self.levels = levels;
        self
    }

    fn analytic(&self) -> Option<f64> {
        let h = self.base.cfg.hbar;
        let gap = self
            .levels
            .iter()
            .map(|&(k, l)| (self.base.system.eigenvalue(k, h) - self.base.system.eigenvalue(l, h)).abs())
            .fold(f64::INFINITY, f64::min);
        (gap.is_finite() && gap > 0.0).then(|| decoherence_time(&self.base.cfg, gap))
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter {
            field: "dtau_grid",
            reason: "grid must be non-empty and strictly increasing".into(),
        });
    }
    Ok(())
}

pub(crate) fn first_below(grid: &[f64], max_abs: Vec<f64>, tol: f64, analytic: Option<f64>) -> Result<ThresholdReport> {
    match max_abs.iter().position(|m| *m < tol) {
        Some(i) => {
            let step = if grid.len() > 1 {
                let j = i.clamp(1, grid.len() - 1);
                grid[j] - grid[j - 1]
            } else {
                0.0
            };
            Ok(ThresholdReport {
                threshold: grid[i],
                analytic,
                step,
                max_abs,
            })
        }
        None => Err(Error::NotReached {
            last: *grid.last().unwrap(),
            max_abs: *max_abs.last().unwrap(),
        }),
    }
}

/// Smallest grid Δτ at which every sampled |I_{k≠l}(b, b′)| is below the family tolerance.
pub fn decoherence_threshold_scan(
    family: &DecoherenceFamily,
    dtau_grid: &[f64],
    evaluator: Evaluator,
) -> Result<ThresholdReport> {
    check_grid(dtau_grid)?;
    let max_abs = dtau_grid
        .par_iter()
        .map(|&t| {
            let mut m = 0.0f64;
            for &(k, l) in &family.levels {
                for &(b, bp) in &family.pairs {
                    let spec = DecoherenceFactorSpec {
                        k,
                        l,
                        ..family.base.at(t, b, bp)
                    };
                    m = m.max(evaluator.decoherence(&spec)?.norm());
                }
            }
            Ok(m)
        })
        .collect::<Result<Vec<f64>>>()?;
    first_below(dtau_grid, max_abs, family.tol, family.analytic())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn fig2() -> MeasurementConfig {
        MeasurementConfig::new(1.0, 1.0, 2.0, 4.0, 0.25, 1.0).unwrap()
    }

    fn fig4() -> MeasurementConfig {
        MeasurementConfig::new(1.0, 2.0, 2.0, 2.0, 0.5, 0.5).unwrap()
    }

    fn qubit_spec(dtau: f64) -> DecoherenceFactorSpec {
        let probe = BandLimitedState::sinc(0.25, 1.0).unwrap();
        DecoherenceFactorSpec::new(SystemKind::Qubit, probe, fig2(), (0, 1), (1.5, -2.0), dtau).unwrap()
    }

    fn osc_spec(dtau: f64) -> DecoherenceFactorSpec {
        let probe = BandLimitedState::sinc(0.5, 1.0).unwrap();
        let sys = SystemKind::Oscillator { omega: 2.5 };
        DecoherenceFactorSpec::new(sys, probe, fig4(), (2, 1), (1.0, 2.0), dtau).unwrap()
    }

    #[test]
    fn diagonal_at_coincident_points_is_one() {
        let s = DecoherenceFactorSpec {
            k: 0,
            l: 0,
            ..qubit_spec(0.2).at(0.2, 0.7, 0.7)
        };
        assert!((i_quadrature(&s).unwrap() - 1.0).norm() < 1e-9);
    }

    #[test]
    fn fig2_vanishes_from_quarter() {
        for dt in [0.25, 0.30, 0.40] {
            assert_eq!(i_qubit_closed(&fig2(), 1.5, -2.0, dt), Complex64::new(0.0, 0.0));
            let q = i_quadrature(&qubit_spec(dt)).unwrap();
            assert!(q.norm() < 1e-8, "dt={dt}: {q}");
        }
    }

    #[test]
    fn fig2_closed_matches_quadrature_before_threshold() {
        let closed = i_qubit_closed(&fig2(), 1.5, -2.0, 0.15);
        let quad = i_quadrature(&qubit_spec(0.15)).unwrap();
        assert!((closed - quad).norm() < 1e-7);
        assert!(closed.norm() > 1e-3);
        // momentum-space reference at 30 digits
        assert!((closed - Complex64::new(-0.0016286305156431048, 0.003558622599204344)).norm() < 1e-13);
    }

    #[test]
    fn fig4_oscillator() {
        for dt in [0.10, 0.12, 0.2] {
            assert_eq!(
                i_oscillator_closed(&fig4(), 2.5, 2, 1, 1.0, 2.0, dt),
                Complex64::new(0.0, 0.0)
            );
            assert!(i_quadrature(&osc_spec(dt)).unwrap().norm() < 1e-8);
        }
        let closed = i_oscillator_closed(&fig4(), 2.5, 2, 1, 1.0, 2.0, 0.06);
        let quad = i_quadrature(&osc_spec(0.06)).unwrap();
        assert!((closed - quad).norm() < 1e-7, "{closed} vs {quad}");
        assert!((closed - Complex64::new(0.01737266135695621, 0.014870883477772933)).norm() < 1e-13);
    }

    #[test]
    fn reversed_oscillator_levels_are_conjugate() {
        let fwd = i_oscillator_closed(&fig4(), 2.5, 2, 1, 1.0, 2.0, 0.06);
        let rev = i_oscillator_closed(&fig4(), 2.5, 1, 2, 1.0, 2.0, 0.06);
        assert_eq!(rev, fwd.conj());
        let spec = DecoherenceFactorSpec {
            k: 1,
            l: 2,
            ..osc_spec(0.06)
        };
        assert!((i_quadrature(&spec).unwrap() - rev).norm() < 1e-7);
    }

    #[test]
    fn double_gap_halves_threshold() {
        let t1: f64 = 2.0 * 0.5 / (2.0 * 2.0 * 2.5);
        let t2 = 2.0 * 0.5 / (2.0 * 2.0 * 2.5 * 2.0);
        assert!((t2 - t1 / 2.0).abs() < 1e-15);
        assert_eq!(
            i_oscillator_closed(&fig4(), 2.5, 2, 0, 1.0, 2.0, t2),
            Complex64::new(0.0, 0.0)
        );
        assert!(i_oscillator_closed(&fig4(), 2.5, 2, 0, 1.0, 2.0, 0.99 * t2).norm() > 0.0);
        assert!(i_oscillator_closed(&fig4(), 2.5, 2, 1, 1.0, 2.0, t2).norm() > 0.0);
    }

    #[test]
    fn qubit_conjugate_pair() {
        let mut r = rng(5);
        for _ in 0..20 {
            let (b, bp, t) = (r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0), r.gen_range(0.01..0.25));
            let pm = sinc_factor_closed(&fig2(), 1.0, b, bp, t);
            let mp = sinc_factor_closed(&fig2(), -1.0, b, bp, t);
            assert_eq!(mp, pm.conj());
        }
    }

    #[test]
    fn diagonal_limit_matches_quadrature() {
        for &u in &[0.0, 1e-9, 3e-7, 2e-6, 1e-3] {
            let closed = i_qubit_closed(&fig2(), 0.8 + u, 0.8, 0.15);
            let quad = i_quadrature(&qubit_spec(0.15).at(0.15, 0.8 + u, 0.8)).unwrap();
            assert!((closed - quad).norm() < 1e-8, "u={u}: {closed} vs {quad}");
        }
    }

    #[test]
    fn hbar_restored() {
        let cfg = MeasurementConfig { hbar: 0.37, ..fig2() };
        let probe = BandLimitedState::sinc(0.25, 0.37).unwrap();
        let spec = DecoherenceFactorSpec::new(SystemKind::Qubit, probe, cfg, (0, 1), (0.4, -1.1), 0.17).unwrap();
        let closed = i_closed(&spec).unwrap();
        assert!((closed - i_quadrature(&spec).unwrap()).norm() < 1e-8);
        let sys = SystemKind::Oscillator { omega: 1.3 };
        let probe = BandLimitedState::sinc(0.5, 2.2).unwrap();
        let cfg = MeasurementConfig { hbar: 2.2, ..fig4() };
        let spec = DecoherenceFactorSpec::new(sys, probe, cfg, (0, 1), (0.3, 0.9), 0.05).unwrap();
        assert!((i_closed(&spec).unwrap() - i_quadrature(&spec).unwrap()).norm() < 1e-8);
    }

    #[test]
    fn custom_flat_probe_agrees_with_sinc() {
        let probe = BandLimitedState::custom(0.25, 1.0, |_| Complex64::new(2f64.sqrt(), 0.0)).unwrap();
        let spec = DecoherenceFactorSpec {
            probe,
            ..qubit_spec(0.15)
        };
        let v = i_quadrature(&spec).unwrap();
        assert!((v - i_qubit_closed(&fig2(), 1.5, -2.0, 0.15)).norm() < 1e-9);
        assert!(i_quadrature(&spec.at(0.3, 1.5, -2.0)).unwrap().norm() == 0.0);
    }

    #[test]
    fn sinc_overlap_on_diagonal_levels() {
        let s = DecoherenceFactorSpec {
            k: 1,
            l: 1,
            ..qubit_spec(0.2)
        };
        let c = 2.0 * 4.0 / (1.0 * 2.0 * 0.2);
        let exact = sinc(0.25 * c * 3.5);
        assert!((i_quadrature(&s).unwrap() - exact).norm() < 1e-9);
        assert!((i_closed(&s).unwrap() - exact).norm() < 1e-15);
    }

    #[test]
    fn threshold_scans() {
        let grid: Vec<f64> = (1..=400).map(|i| i as f64 * 1e-3).collect();
        let fam = DecoherenceFamily::new(qubit_spec(0.1));
        let r = decoherence_threshold_scan(&fam, &grid, Evaluator::Closed).unwrap();
        assert!((r.threshold - 0.25).abs() <= r.step + 1e-12);
        assert_eq!(r.analytic, Some(0.25));

        let grid: Vec<f64> = (1..=150).map(|i| i as f64 * 1e-3).collect();
        let fam = DecoherenceFamily::new(osc_spec(0.05));
        let r = decoherence_threshold_scan(&fam, &grid, Evaluator::Closed).unwrap();
        assert!((r.threshold - 0.10).abs() <= r.step + 1e-12);
    }

    #[test]
    fn gaussian_probe_never_reaches_threshold() {
        // Gaussian momentum amplitude, cut where its weight is below 1e-30
        let sigma = 0.1f64;
        let norm = (2.0 * PI * sigma * sigma).powf(-0.25);
        let probe = BandLimitedState::custom(1.2, 1.0, move |p| {
            Complex64::new(norm * (-p * p / (4.0 * sigma * sigma)).exp(), 0.0)
        })
        .unwrap();
        let spec = DecoherenceFactorSpec {
            probe,
            ..qubit_spec(0.1)
        };
        let fam = DecoherenceFamily::new(spec).with_pairs(vec![(0.5, 0.5), (1.5, -2.0)]);
        let grid: Vec<f64> = (1..=40).map(|i| i as f64 * 1e-2).collect();
        let r = decoherence_threshold_scan(&fam, &grid, Evaluator::Quadrature);
        assert!(matches!(r, Err(Error::NotReached { .. })), "{r:?}");
    }

    #[test]
    fn grid_must_increase() {
        let fam = DecoherenceFamily::new(qubit_spec(0.1));
        assert!(decoherence_threshold_scan(&fam, &[0.2, 0.1], Evaluator::Closed).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn hermitian_symmetry(b in -3.0..3.0f64, bp in -3.0..3.0f64, t in 0.01..0.3f64) {
            let fwd = qubit_spec(t).at(t, b, bp);
            let rev = DecoherenceFactorSpec { k: 1, l: 0, ..fwd.at(t, bp, b) };
            let (a, c) = (i_quadrature(&fwd).unwrap(), i_quadrature(&rev).unwrap());
            prop_assert!((a - c.conj()).norm() < 1e-9);
            let (a, c) = (i_closed(&fwd).unwrap(), i_closed(&rev).unwrap());
            prop_assert!((a - c.conj()).norm() < 1e-12);
        }

        #[test]
        fn bounded_by_one(b in -5.0..5.0f64, bp in -5.0..5.0f64, t in 0.005..0.5f64, nu in -3.0..3.0f64) {
            prop_assert!(sinc_factor_closed(&fig2(), nu, b, bp, t).norm() <= 1.0 + 1e-12);
        }

        #[test]
        fn exact_zero_past_threshold(b in -5.0..5.0f64, bp in -5.0..5.0f64, extra in 0.0..2.0f64) {
            prop_assert_eq!(i_qubit_closed(&fig2(), b, bp, 0.25 + extra), Complex64::new(0.0, 0.0));
        }
    }
}

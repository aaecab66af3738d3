//! Pointer-momentum densities ⟨s|ρ_k|s⟩ at the orthogonality time.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{positive, Error, Result};
use crate::model::{orthogonality_time, MeasurementConfig};
use crate::orthogonality::pointer_state_kernel;
use crate::states::BandLimitedState;

/// Linear piece through (lo, v_lo) and (hi, v_hi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSegment {
    pub lo: f64,
    pub hi: f64,
    pub v_lo: f64,
    pub v_hi: f64,
}

impl LinearSegment {
    pub fn eval(&self, s: f64) -> f64 {
        self.v_lo + (self.v_hi - self.v_lo) * ((s - self.lo) / (self.hi - self.lo))
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.v_lo + self.v_hi) * (self.hi - self.lo)
    }
}

/// Which of the three shapes the coupling selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityCase {
    /// λ > 4b₀: ramp, wide plateau, ramp.
    Wide,
    /// 2b₀ < λ < 4b₀: narrow plateau at height 1/(2b₀ħ).
    Narrow,
    /// λ = 4b₀: triangle.
    Triangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Continuous piecewise-linear density with compact support.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseDensity {
    segments: Vec<LinearSegment>,
    case: DensityCase,
}

impl PiecewiseDensity {
    pub fn segments(&self) -> &[LinearSegment] {
        &self.segments
    }

    pub fn case(&self) -> DensityCase {
        self.case
    }

    pub fn support(&self) -> (f64, f64) {
        (self.segments[0].lo, self.segments[self.segments.len() - 1].hi)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.segments.iter().map(|s| s.lo).collect();
        v.push(self.support().1);
        v
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.segments
            .iter()
            .find(|seg| seg.lo <= s && s <= seg.hi)
            .map_or(0.0, |seg| seg.eval(s))
    }

    /// Sum of the exact trapezoid areas.
    pub fn area(&self) -> f64 {
        self.segments.iter().map(LinearSegment::area).sum()
    }

    /// Largest jump between neighbouring segments.
    pub fn max_jump(&self) -> f64 {
        self.segments
            .windows(2)
            .map(|w| (w[0].v_hi - w[1].v_lo).abs())
            .fold(0.0, f64::max)
    }

    /// s ↦ density(−s).
    pub fn mirrored(&self) -> Self {
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|g| LinearSegment {
                lo: -g.hi,
                hi: -g.lo,
                v_lo: g.v_hi,
                v_hi: g.v_lo,
            })
            .collect();
        Self {
            segments,
            case: self.case,
        }
    }

    /// s ↦ density(s − d).
    pub fn shifted(&self, d: f64) -> Self {
        let segments = self
            .segments
            .iter()
            .map(|g| LinearSegment {
                lo: g.lo + d,
                hi: g.hi + d,
                ..*g
            })
            .collect();
        Self {
            segments,
            case: self.case,
        }
    }
}

/// The + density on [0, λħ] for a coupling λ (λω for the oscillator).
fn base_density(lambda: f64, b0: f64, hbar: f64) -> Result<PiecewiseDensity> {
    positive("lambda", lambda)?;
    positive("b0", b0)?;
    positive("hbar", hbar)?;
    if lambda <= 2.0 * b0 {
        return Err(Error::ConditionViolated(format!(
            "coupling {lambda} must exceed 2 b0 = {}",
            2.0 * b0
        )));
    }
    let h = hbar;
    let seg = |lo: f64, hi: f64, f: &dyn Fn(f64) -> f64| LinearSegment {
        lo,
        hi,
        v_lo: f(lo).max(0.0),
        v_hi: f(hi).max(0.0),
    };
    // the max only absorbs rounding of λ − λħ/ħ at the support edge
    if (lambda - 4.0 * b0).abs() <= 1e-12 * lambda {
        let l2 = lambda * lambda;
        let up = |s: f64| 4.0 * s / (l2 * h * h);
        let down = |s: f64| 4.0 * (lambda - s / h) / (l2 * h);
        return Ok(PiecewiseDensity {
            segments: vec![
                seg(0.0, 0.5 * lambda * h, &up),
                seg(0.5 * lambda * h, lambda * h, &down),
            ],
            case: DensityCase::Triangle,
        });
    }
    let gap = lambda - 2.0 * b0;
    let up = |s: f64| s / (2.0 * b0 * h * h * gap);
    let down = |s: f64| (lambda - s / h) / (2.0 * b0 * h * gap);
    let (case, mid_lo, mid_hi, plateau) = if lambda > 4.0 * b0 {
        (DensityCase::Wide, 2.0 * b0 * h, gap * h, 1.0 / (gap * h))
    } else {
        (DensityCase::Narrow, gap * h, 2.0 * b0 * h, 1.0 / (2.0 * b0 * h))
    };
    Ok(PiecewiseDensity {
        segments: vec![
            seg(0.0, mid_lo, &up),
            seg(mid_lo, mid_hi, &|_| plateau),
            seg(mid_hi, lambda * h, &down),
        ],
        case,
    })
}

/// ⟨s|ρ_±|s⟩ for the spin-1/2; support [0, λħ] for + and [−λħ, 0] for −.
pub fn qubit_density(sign: Sign, lambda: f64, b0: f64, hbar: f64) -> Result<PiecewiseDensity> {
    let d = base_density(lambda, b0, hbar)?;
    Ok(match sign {
        Sign::Plus => d,
        Sign::Minus => d.mirrored(),
    })
}

/// ⟨s|ρ_k|s⟩ for oscillator level k; support [kλħω, (k+1)λħω].
pub fn oscillator_density(k: usize, lambda: f64, omega: f64, b0: f64, hbar: f64) -> Result<PiecewiseDensity> {
    positive("omega", omega)?;
    let lw = lambda * omega;
    Ok(base_density(lw, b0, hbar)?.shifted(k as f64 * lw * hbar))
}

/// True iff the support interiors are pairwise disjoint; touching endpoints are allowed.
pub fn supports_disjoint(densities: &[PiecewiseDensity]) -> bool {
    densities.iter().enumerate().all(|(i, a)| {
        densities[i + 1..].iter().all(|b| {
            let ((a0, a1), (b0, b1)) = (a.support(), b.support());
            a1 <= b0 || b1 <= a0
        })
    })
}

/// A pointer level whose momentum density is requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointerLevel {
    Qubit(Sign),
    Oscillator { k: usize, omega: f64 },
}

impl PointerLevel {
    fn eigenvalue(&self, hbar: f64) -> f64 {
        match *self {
            PointerLevel::Qubit(Sign::Plus) => 0.5 * hbar,
            PointerLevel::Qubit(Sign::Minus) => -0.5 * hbar,
            PointerLevel::Oscillator { k, omega } => (k as f64 + 0.5) * hbar * omega,
        }
    }

    fn gap(&self, hbar: f64) -> f64 {
        match *self {
            PointerLevel::Qubit(_) => hbar,
            PointerLevel::Oscillator { omega, .. } => hbar * omega,
        }
    }
}

/// The closed-form density for `level` with the band limits of the states.
pub fn analytic_density(
    level: PointerLevel,
    cfg: &MeasurementConfig,
    pointer: &BandLimitedState,
) -> Result<PiecewiseDensity> {
    let b0 = pointer.band_limit();
    match level {
        PointerLevel::Qubit(sign) => qubit_density(sign, cfg.lambda, b0, cfg.hbar),
        PointerLevel::Oscillator { k, omega } => oscillator_density(k, cfg.lambda, omega, b0, cfg.hbar),
    }
}

/// Grid-Fourier evaluation of ⟨s|ρ_k|s⟩ at the orthogonality time.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    pub s: Vec<f64>,
    pub values: Vec<f64>,
    /// h·Σρ(b_i, b_i) before normalization.
    pub trace: f64,
    pub spacing: f64,
}

/// Spacing whose alias period 2πħ/h is 1.1 times the s window.
pub fn nyquist_spacing(level: PointerLevel, cfg: &MeasurementConfig, pointer: &BandLimitedState) -> Result<f64> {
    let (lo, hi) = s_window(level, cfg, pointer)?;
    Ok(2.0 * PI * cfg.hbar / (1.1 * (hi - lo)))
}

/// Support widened by a quarter of its width on each side.
pub fn s_window(level: PointerLevel, cfg: &MeasurementConfig, pointer: &BandLimitedState) -> Result<(f64, f64)> {
    let (lo, hi) = analytic_density(level, cfg, pointer)?.support();
    let pad = 0.25 * (hi - lo);
    Ok((lo - pad, hi + pad))
}

/// ⟨s|ρ|s⟩ = (1/2πħ)∬ e^{−is(b−b′)/ħ} ρ(b, b′) db db′ on an n_b-point grid
/// of spacing h centred on the pointer, normalized by the grid trace.
pub fn grid_density(
    level: PointerLevel,
    cfg: &MeasurementConfig,
    pointer: &BandLimitedState,
    probe: &BandLimitedState,
    spacing: f64,
    n_b: usize,
    s_points: usize,
) -> Result<GridDensity> {
    if !(pointer.is_sinc() && probe.is_sinc()) {
        return Err(Error::ConditionViolated(
            "the density oracle needs sinc probe and pointer".into(),
        ));
    }
    positive("spacing", spacing)?;
    if n_b < 2 || s_points < 2 {
        return Err(Error::InvalidParameter {
            field: "n",
            reason: "grids need at least two points".into(),
        });
    }
    let cfg = MeasurementConfig {
        kappa0: probe.band_limit(),
        b0: pointer.band_limit(),
        ..*cfg
    };
    let (s_lo, s_hi) = s_window(level, &cfg, pointer)?;
    if 2.0 * PI * cfg.hbar / spacing < s_hi - s_lo {
        return Err(Error::GridTooCoarse(format!(
            "spacing {spacing} aliases the s window [{s_lo}, {s_hi}]"
        )));
    }
    let dtau = orthogonality_time(&cfg, level.gap(cfg.hbar))?;
    let a_k = level.eigenvalue(cfg.hbar);
    let b = |i: usize| (i as f64 - 0.5 * (n_b - 1) as f64) * spacing;
    // ρ depends on (b, b′) through Φ(b)Φ(b′) and b − b′ only; sum along diagonals.
    let diagonals: Vec<Complex64> = (0..2 * n_b - 1)
        .into_par_iter()
        .map(|d| {
            let m = d as isize - (n_b as isize - 1);
            let (i0, j0) = if m >= 0 { (m as usize, 0) } else { (0, (-m) as usize) };
            let len = n_b - m.unsigned_abs();
            (0..len)
                .map(|t| pointer_state_kernel(&cfg, probe, pointer, a_k, dtau, b(i0 + t), b(j0 + t)))
                .sum()
        })
        .collect();
    let trace = diagonals[n_b - 1].re * spacing;
    if (trace - 1.0).abs() > 0.05 {
        return Err(Error::GridTooCoarse(format!("grid trace {trace} is far from 1")));
    }
    let norm = spacing * spacing / (2.0 * PI * cfg.hbar * trace);
    let s: Vec<f64> = (0..s_points)
        .map(|i| s_lo + (s_hi - s_lo) * i as f64 / (s_points - 1) as f64)
        .collect();
    let values = s
        .par_iter()
        .map(|&sv| {
            let sum: Complex64 = diagonals
                .iter()
                .enumerate()
                .map(|(d, v)| {
                    let m = d as f64 - (n_b - 1) as f64;
                    v * Complex64::from_polar(1.0, -sv * m * spacing / cfg.hbar)
                })
                .sum();
            sum.re * norm
        })
        .collect();
    Ok(GridDensity {
        s,
        values,
        trace,
        spacing,
    })
}

/// Max |grid − closed form| over 400 points of the s window, 1024-point b grid.
pub fn density_vs_grid(
    level: PointerLevel,
    cfg: &MeasurementConfig,
    pointer: &BandLimitedState,
    probe: &BandLimitedState,
) -> Result<f64> {
    let h = nyquist_spacing(level, cfg, pointer)?;
    let grid = grid_density(level, cfg, pointer, probe, h, 1024, 400)?;
    let exact = analytic_density(level, cfg, pointer)?;
    Ok(max_deviation(&grid, &exact))
}

pub fn max_deviation(grid: &GridDensity, exact: &PiecewiseDensity) -> f64 {
    grid.s
        .iter()
        .zip(&grid.values)
        .map(|(&s, &v)| (v - exact.eval(s)).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(lambda: f64, b0: f64) -> MeasurementConfig {
        MeasurementConfig::new(1.0, 1.0, 2.0, lambda, 0.25, b0).unwrap()
    }

    fn sinc(tau: f64) -> BandLimitedState {
        BandLimitedState::sinc(tau, 1.0).unwrap()
    }

    #[test]
    fn wide_case_plateau() {
        let d = qubit_density(Sign::Plus, 4.0, 0.25, 1.0).unwrap();
        assert_eq!(d.case(), DensityCase::Wide);
        assert_eq!(d.breakpoints(), vec![0.0, 0.5, 3.5, 4.0]);
        for s in [0.5, 2.0, 3.5] {
            assert!((d.eval(s) - 1.0 / 3.5).abs() < 1e-15);
        }
        assert!((d.area() - 1.0).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn narrow_and_triangle() {
        let d = qubit_density(Sign::Plus, 4.0, 1.2, 1.0).unwrap();
        assert_eq!(d.case(), DensityCase::Narrow);
        assert!((d.eval(2.0) - 1.0 / 2.4).abs() < 1e-15);
        assert!((d.area() - 1.0).abs() < 1e-15);
        let t = qubit_density(Sign::Plus, 4.0, 1.0, 1.0).unwrap();
        assert_eq!(t.case(), DensityCase::Triangle);
        assert_eq!(t.eval(2.0), 0.5);
        assert!((t.area() - 1.0).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn oscillator_examples() {
        let d = oscillator_density(1, 2.0, 2.5, 0.5, 1.0).unwrap();
        assert_eq!(d.support(), (5.0, 10.0));
        assert!((d.eval(6.0) - 0.25).abs() < 1e-15 && (d.eval(9.0) - 0.25).abs() < 1e-15);
        let t = oscillator_density(0, 2.0, 2.5, 1.25, 1.0).unwrap();
        assert_eq!(t.case(), DensityCase::Triangle);
        assert!((t.eval(2.5) - 0.4).abs() < 1e-15);
        let d0 = oscillator_density(0, 2.0, 2.5, 0.5, 1.0).unwrap();
        assert_eq!(d0.support().1, d.support().0);
    }

    #[test]
    fn condition_enforced() {
        assert!(matches!(
            qubit_density(Sign::Plus, 2.0, 1.0, 1.0),
            Err(Error::ConditionViolated(_))
        ));
        assert!(matches!(
            oscillator_density(0, 1.0, 1.0, 0.6, 1.0),
            Err(Error::ConditionViolated(_))
        ));
    }

    #[test]
    fn disjointness() {
        let p = qubit_density(Sign::Plus, 4.0, 1.0, 1.0).unwrap();
        let m = qubit_density(Sign::Minus, 4.0, 1.0, 1.0).unwrap();
        assert!(supports_disjoint(&[p.clone(), m]));
        assert!(!supports_disjoint(&[p.clone(), p]));
        let osc: Vec<_> = (0..3)
            .map(|k| oscillator_density(k, 4.0, 1.0, 0.25, 1.0).unwrap())
            .collect();
        assert!(supports_disjoint(&osc));
    }

    #[test]
    fn hbar_scaling() {
        let d = qubit_density(Sign::Plus, 4.0, 0.25, 2.0).unwrap();
        assert_eq!(d.support(), (0.0, 8.0));
        assert!((d.eval(4.0) - 1.0 / 7.0).abs() < 1e-15);
        assert!((d.area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn grid_oracle_fig6a() {
        let c = cfg(4.0, 0.25);
        let lv = PointerLevel::Qubit(Sign::Plus);
        let dev = density_vs_grid(lv, &c, &sinc(0.25), &sinc(0.25)).unwrap();
        assert!(dev < 1e-3, "{dev}");
        let h = nyquist_spacing(lv, &c, &sinc(0.25)).unwrap();
        let exact = analytic_density(lv, &c, &sinc(0.25)).unwrap();
        let fine = grid_density(lv, &c, &sinc(0.25), &sinc(0.25), h, 2048, 400).unwrap();
        // truncation error ~ 1/extent once the kinks are resolved
        let e4 = max_deviation(
            &grid_density(lv, &c, &sinc(0.25), &sinc(0.25), h, 4096, 400).unwrap(),
            &exact,
        );
        assert!(e4 <= 0.5 * max_deviation(&fine, &exact), "{e4}");
        let outside = fine
            .s
            .iter()
            .zip(&fine.values)
            .filter(|(s, _)| **s < -0.05 || **s > 4.05)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
        assert!(outside < 1e-4, "{outside}");
    }

    #[test]
    fn grid_oracle_minus_and_oscillator() {
        let c = cfg(4.0, 1.0);
        assert!(density_vs_grid(PointerLevel::Qubit(Sign::Minus), &c, &sinc(1.0), &sinc(0.25)).unwrap() < 1e-3);
        let c = MeasurementConfig::new(1.0, 2.0, 2.0, 2.0, 0.5, 0.5).unwrap();
        let lv = PointerLevel::Oscillator { k: 1, omega: 2.5 };
        assert!(density_vs_grid(lv, &c, &sinc(0.5), &sinc(0.5)).unwrap() < 1e-3);
    }

    #[test]
    fn coarse_grids_rejected() {
        let c = cfg(4.0, 1.0);
        let lv = PointerLevel::Qubit(Sign::Plus);
        assert!(matches!(
            grid_density(lv, &c, &sinc(1.0), &sinc(0.25), 2.0, 256, 50),
            Err(Error::GridTooCoarse(_))
        ));
        assert!(matches!(
            grid_density(lv, &c, &sinc(1.0), &sinc(0.25), 0.01, 64, 50),
            Err(Error::GridTooCoarse(_))
        ));
    }

    proptest! {
        #[test]
        fn unit_area_and_continuity(lambda in 0.5..20.0f64, frac in 0.01..0.99f64, hbar in 0.2..3.0f64) {
            let b0 = 0.5 * lambda * frac;
            let d = qubit_density(Sign::Plus, lambda, b0, hbar).unwrap();
            prop_assert!((d.area() - 1.0).abs() < 1e-12);
            let peak = d.segments().iter().map(|g| g.v_hi).fold(0.0, f64::max);
            prop_assert!(d.max_jump() <= 1e-12 * peak);
            prop_assert!(d.segments().iter().all(|g| g.v_lo >= 0.0 && g.v_hi >= 0.0));
        }

        #[test]
        fn mirror_and_shift(lambda in 0.5..20.0f64, frac in 0.01..0.99f64, s in -25.0..25.0f64, k in 0usize..4) {
            let b0 = 0.5 * lambda * frac;
            let p = qubit_density(Sign::Plus, lambda, b0, 1.0).unwrap();
            let m = qubit_density(Sign::Minus, lambda, b0, 1.0).unwrap();
            prop_assert!((m.eval(-s) - p.eval(s)).abs() <= 1e-14 * (1.0 + p.eval(s)));
            prop_assert!((p.eval(s) - p.eval(lambda - s)).abs() < 1e-12);
            let o = oscillator_density(k, lambda, 1.0, b0, 1.0).unwrap();
            prop_assert!((o.eval(s + k as f64 * lambda) - p.eval(s)).abs() < 1e-12);
        }

        #[test]
        fn cases_meet_at_quarter(lambda in 1.0..10.0f64, s in 0.0..1.0f64) {
            let b0 = lambda / 4.0;
            let t = qubit_density(Sign::Plus, lambda, b0, 1.0).unwrap();
            let wide = qubit_density(Sign::Plus, lambda, b0 - 1e-4, 1.0).unwrap();
            let narrow = qubit_density(Sign::Plus, lambda, b0 + 1e-4, 1.0).unwrap();
            let x = s * lambda;
            prop_assert!((wide.eval(x) - narrow.eval(x)).abs() < 1e-3);
            prop_assert!((wide.eval(x) - t.eval(x)).abs() < 1e-3);
        }
    }
}

//! Momentum-limited wavefunctions.
//!
//! Convention: ψ(x) = (2πħ)^{-1/2} ∫_{-ħτ}^{ħτ} φ(p) e^{ipx/ħ} dp with
//! ∫|φ|² dp = 1. The flat amplitude φ = (2ħτ)^{-1/2} then gives exactly
//! ψ(x) = sin(τx)/(√(τπ) x).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{positive, Error, Result};
use crate::model::MeasurementConfig;
use crate::quad::{integrate_interval, integrate_real_line, ExpRational, QuadratureRequest};
use crate::special::sin_over;

pub type MomentumAmplitude = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

#[derive(Clone)]
pub enum StateKind {
    Sinc,
    Custom(MomentumAmplitude),
}

/// A wavefunction whose momentum amplitude vanishes outside [−ħτ, ħτ].
#[derive(Clone)]
pub struct BandLimitedState {
    tau: f64,
    hbar: f64,
    kind: StateKind,
}

impl fmt::Debug for BandLimitedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            StateKind::Sinc => "sinc",
            StateKind::Custom(_) => "custom",
        };
        f.debug_struct("BandLimitedState")
            .field("tau", &self.tau)
            .field("hbar", &self.hbar)
            .field("kind", &kind)
            .finish()
    }
}

impl BandLimitedState {
    pub fn sinc(tau: f64, hbar: f64) -> Result<Self> {
        positive("tau", tau)?;
        positive("hbar", hbar)?;
        Ok(Self {
            tau,
            hbar,
            kind: StateKind::Sinc,
        })
    }

    /// A state from a momentum amplitude on [−ħτ, ħτ]; it must be normalized to 1e-9.
    pub fn custom(tau: f64, hbar: f64, amplitude: impl Fn(f64) -> Complex64 + Send + Sync + 'static) -> Result<Self> {
        positive("tau", tau)?;
        positive("hbar", hbar)?;
        let state = Self {
            tau,
            hbar,
            kind: StateKind::Custom(Arc::new(amplitude)),
        };
        let norm = state.momentum_norm()?;
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized(norm));
        }
        Ok(state)
    }

    pub fn band_limit(&self) -> f64 {
        self.tau
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn kind(&self) -> &StateKind {
        &self.kind
    }

    pub fn is_sinc(&self) -> bool {
        matches!(self.kind, StateKind::Sinc)
    }

    pub fn momentum_amplitude(&self, p: f64) -> Complex64 {
        let edge = self.hbar * self.tau;
        if p.abs() > edge {
            return Complex64::new(0.0, 0.0);
        }
        match &self.kind {
            StateKind::Sinc => Complex64::new((2.0 * edge).sqrt().recip(), 0.0),
            StateKind::Custom(phi) => phi(p),
        }
    }

    fn momentum_norm(&self) -> Result<f64> {
        let edge = self.hbar * self.tau;
        let f = |p: f64| Complex64::new(self.momentum_amplitude(p).norm_sqr(), 0.0);
        let req = QuadratureRequest::new(&f).tolerances(1e-13, 1e-13);
        Ok(integrate_interval(&req, -edge, edge)?.value.re)
    }

    pub fn position_amplitude(&self, x: f64) -> Complex64 {
        match &self.kind {
            StateKind::Sinc => Complex64::new(sin_over(self.tau, x) / (self.tau * PI).sqrt(), 0.0),
            StateKind::Custom(_) => {
                let hbar = self.hbar;
                let f = |p: f64| self.momentum_amplitude(p) * Complex64::from_polar(1.0, p * x / hbar);
                let edge = hbar * self.tau;
                let req = QuadratureRequest::new(&f).frequency(x / hbar).tolerances(1e-13, 1e-12);
                let value = match integrate_interval(&req, -edge, edge) {
                    Ok(r) => r.value,
                    Err(Error::NoConvergence { value, .. }) => value,
                    Err(e) => panic!("position amplitude: {e}"),
                };
                value / (2.0 * PI * hbar).sqrt()
            }
        }
    }

    pub fn position_density(&self, x: f64) -> f64 {
        self.position_amplitude(x).norm_sqr()
    }
}

/// F(η) = ∫ |φ(p)|² e^{2iληp/(αg₀Δτħ)} dp, the probe overlap function.
///
/// For the sinc probe this is sin(cη)/(cη) with c = 2λτ/(αg₀Δτ). Custom
/// probes are integrated on their support; F is real for the even
/// momentum densities the model assumes, so the real part is returned.
pub fn f_eta(probe: &BandLimitedState, cfg: &MeasurementConfig, dtau: f64, eta: f64) -> f64 {
    let c = 2.0 * cfg.lambda / cfg.pulse(dtau);
    match probe.kind() {
        StateKind::Sinc => crate::special::sinc(c * probe.tau * eta),
        StateKind::Custom(_) => {
            let k = c * eta / probe.hbar;
            let f = |p: f64| Complex64::new(probe.momentum_amplitude(p).norm_sqr() * (k * p).cos(), 0.0);
            let edge = probe.hbar * probe.tau;
            let req = QuadratureRequest::new(&f).frequency(k).tolerances(1e-13, 1e-12);
            match integrate_interval(&req, -edge, edge) {
                Ok(r) => r.value.re,
                Err(Error::NoConvergence { value, .. }) => value.re,
                Err(e) => panic!("F(eta): {e}"),
            }
        }
    }
}

/// Exponential type of a product of two entire functions of types τ₁ and τ₂.
pub fn exponential_type_of_product(tau1: f64, tau2: f64) -> f64 {
    tau1 + tau2
}

/// Integrands accepted by [`vanishing_check`].
#[derive(Debug, Clone, Copy)]
pub enum VanishingIntegrand<'a> {
    /// A single amplitude; not absolutely integrable for the sinc.
    Bare(&'a BandLimitedState),
    /// ψ₁(x)·conj(ψ₂(x)).
    Product(&'a BandLimitedState, &'a BandLimitedState),
}

impl VanishingIntegrand<'_> {
    pub fn exponential_type(&self) -> f64 {
        match self {
            VanishingIntegrand::Bare(s) => s.tau,
            VanishingIntegrand::Product(a, b) => exponential_type_of_product(a.tau, b.tau),
        }
    }
}

/// ∫ e^{iax} f(x) dx. Vanishes for |a| above the exponential type of f.
pub fn vanishing_check(integrand: VanishingIntegrand, a: f64) -> Result<Complex64> {
    let (s1, s2) = match integrand {
        VanishingIntegrand::Bare(_) => {
            return Err(Error::NotIntegrable(
                "a single band-limited amplitude decays only as 1/x".into(),
            ))
        }
        VanishingIntegrand::Product(s1, s2) => (s1, s2),
    };
    let f = |x: f64| Complex64::from_polar(1.0, a * x) * s1.position_amplitude(x) * s2.position_amplitude(x).conj();
    let freq = a.abs() + s1.tau + s2.tau;
    let value = if s1.is_sinc() && s2.is_sinc() {
        let pre = Complex64::new(1.0 / (PI * (s1.tau * s2.tau).sqrt()), 0.0);
        let tail = ExpRational::sinc_product(pre, a, &[(s1.tau, 0.0), (s2.tau, 0.0)]);
        let req = QuadratureRequest::new(&f)
            .frequency(freq)
            .breakpoints([0.0])
            .tail(&tail);
        integrate_real_line(&req)?.value
    } else {
        let req = QuadratureRequest::new(&f)
            .frequency(freq)
            .breakpoints([0.0])
            .tolerances(1e-8, 1e-8);
        integrate_real_line(&req)?.value
    };
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat(tau: f64) -> BandLimitedState {
        let amp = (2.0 * tau).sqrt().recip();
        BandLimitedState::custom(tau, 1.0, move |_| Complex64::new(amp, 0.0)).unwrap()
    }

    #[test]
    fn sinc_amplitude_values() {
        let s = BandLimitedState::sinc(0.25, 1.0).unwrap();
        assert!((s.position_amplitude(0.0).re - (0.25 / PI).sqrt()).abs() < 1e-15);
        assert!((s.position_amplitude(0.0).re - 0.28209).abs() < 1e-5);
        assert!(s.position_amplitude(2.0 * PI / 0.25).norm() < 1e-15);
    }

    #[test]
    fn custom_flat_matches_sinc() {
        let s = BandLimitedState::sinc(0.25, 1.0).unwrap();
        let c = flat(0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let x = rng.gen_range(-40.0..40.0);
            assert!((s.position_amplitude(x) - c.position_amplitude(x)).norm() < 1e-8);
        }
    }

    #[test]
    fn custom_normalization_enforced() {
        let r = BandLimitedState::custom(1.0, 1.0, |_| Complex64::new(1.0, 0.0));
        assert!(matches!(r, Err(Error::NotNormalized(_))));
    }

    #[test]
    fn vanishing_above_type() {
        let s = BandLimitedState::sinc(0.25, 1.0).unwrap();
        let v = vanishing_check(VanishingIntegrand::Product(&s, &s), 0.6).unwrap();
        assert!(v.norm() < 1e-8, "{v}");
        let n = vanishing_check(VanishingIntegrand::Product(&s, &s), 0.0).unwrap();
        assert!((n - 1.0).norm() < 1e-9);
        let t = BandLimitedState::sinc(0.5, 1.0).unwrap();
        let w = vanishing_check(VanishingIntegrand::Product(&s, &t), 0.6).unwrap();
        // ∫ e^{iax} sinc-sinc = overlap of boxes of half widths 0.25 and 0.5: (0.75 − 0.6)/(2√(0.125))
        let expected = (0.75 - 0.6) / (2.0 * (0.125f64).sqrt());
        assert!((w.re - expected).abs() < 1e-9, "{w}");
        assert!(matches!(
            vanishing_check(VanishingIntegrand::Bare(&s), 0.6),
            Err(Error::NotIntegrable(_))
        ));
    }

    #[test]
    fn f_eta_values() {
        let cfg = MeasurementConfig::new(1.0, 1.0, 2.0, 4.0, 0.25, 1.0).unwrap();
        let s = BandLimitedState::sinc(0.25, 1.0).unwrap();
        assert_eq!(f_eta(&s, &cfg, 1.0, 0.0), 1.0);
        assert!(f_eta(&s, &cfg, 1.0, PI).abs() < 1e-15);
        let c = flat(0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let eta = rng.gen_range(-6.0..6.0);
            let dtau = rng.gen_range(0.1..2.0);
            assert!((f_eta(&s, &cfg, dtau, eta) - f_eta(&c, &cfg, dtau, eta)).abs() < 1e-9);
        }
    }

    #[test]
    fn types_add() {
        assert_eq!(exponential_type_of_product(0.25, 0.25), 0.5);
        let k = 2.0 * 4.0 * 0.25 / (1.0 * 2.0 * 1.0);
        assert_eq!(exponential_type_of_product(2.0 * 1.0, 2.0 * k), 4.0);
        let (a, b, c) = (0.1, 0.7, 1.3);
        assert_eq!(
            exponential_type_of_product(exponential_type_of_product(a, b), c),
            exponential_type_of_product(a, exponential_type_of_product(b, c))
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn parseval(tau in 0.1..3.0f64) {
            let s = BandLimitedState::sinc(tau, 1.0).unwrap();
            let v = vanishing_check(VanishingIntegrand::Product(&s, &s), 0.0).unwrap();
            prop_assert!((v - 1.0).norm() < 1e-7);
        }

        #[test]
        fn sinc_even(tau in 0.1..3.0f64, x in -50.0..50.0f64) {
            let s = BandLimitedState::sinc(tau, 1.0).unwrap();
            prop_assert_eq!(s.position_amplitude(x), s.position_amplitude(-x));
        }

        #[test]
        fn f_eta_even(dtau in 0.05..2.0f64, eta in -10.0..10.0f64) {
            let cfg = MeasurementConfig::new(1.0, 1.0, 2.0, 4.0, 0.25, 1.0).unwrap();
            let s = BandLimitedState::sinc(0.25, 1.0).unwrap();
            prop_assert_eq!(f_eta(&s, &cfg, dtau, eta), f_eta(&s, &cfg, dtau, -eta));
        }

        #[test]
        fn vanishing_dichotomy(t1 in 0.2..1.0f64, t2 in 0.2..1.0f64, frac in 0.05..0.95f64, above in any::<bool>()) {
            let (s1, s2) = (BandLimitedState::sinc(t1, 1.0).unwrap(), BandLimitedState::sinc(t2, 1.0).unwrap());
            let ty = t1 + t2;
            let a = if above { ty * (1.05 + frac) } else { ty * 0.95 * frac };
            let v = vanishing_check(VanishingIntegrand::Product(&s1, &s2), a).unwrap();
            if above {
                prop_assert!(v.norm() < 1e-8);
            } else {
                prop_assert!(v.norm() >= 1e-3);
            }
        }
    }
}

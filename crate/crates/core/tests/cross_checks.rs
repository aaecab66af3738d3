//! Cross-module consistency on the oscillator example.

use decolab_core::sampling::rng;
use decolab_core::*;
use rand::Rng;

const OMEGA: f64 = 2.5;

fn sinc(tau: f64) -> BandLimitedState {
    BandLimitedState::sinc(tau, 1.0).unwrap()
}

/// λ=2, ω=2.5, α=2, κ₀=0.5, g₀=2, b₀=0.5, ħ=1.
fn cfg() -> MeasurementConfig {
    MeasurementConfig::new(1.0, 2.0, 2.0, 2.0, 0.5, 0.5).unwrap()
}

fn osc() -> SystemKind {
    SystemKind::Oscillator { omega: OMEGA }
}

fn level(k: usize) -> f64 {
    (k as f64 + 0.5) * OMEGA
}

#[test]
fn oscillator_decoherence_closed_vs_quadrature() {
    let mut r = rng(11);
    for _ in 0..25 {
        let (k, l) = (r.gen_range(0..4usize), r.gen_range(0..4usize));
        let (b, bp) = (r.gen_range(-6.0..6.0), r.gen_range(-6.0..6.0));
        let dt = r.gen_range(0.005..0.2);
        let spec = DecoherenceFactorSpec::new(osc(), sinc(0.5), cfg(), (k, l), (b, bp), dt).unwrap();
        let c = i_oscillator_closed(&cfg(), OMEGA, k, l, b, bp, dt);
        assert!((c - i_closed(&spec).unwrap()).norm() < 1e-15);
        let q = i_quadrature(&spec).unwrap();
        assert!(
            (c - q).norm() <= 1e-8 * c.norm().max(1e-3),
            "k={k} l={l} dt={dt}: {c} vs {q}"
        );
    }
}

#[test]
fn oscillator_orthogonality_closed_vs_quadrature() {
    let (probe, pointer) = (sinc(0.5), sinc(0.5));
    let mut r = rng(12);
    for _ in 0..15 {
        let (k, l) = (2, 1);
        let (b, bp) = (r.gen_range(-6.0..6.0), r.gen_range(-6.0..6.0));
        let dt = r.gen_range(0.01..0.4);
        let c = s_oscillator_closed(&cfg(), OMEGA, k, l, dt, b, bp).unwrap();
        let q = s_quadrature(&cfg(), &probe, &pointer, level(k), level(l), dt, b, bp).unwrap();
        assert!((c - q).norm() <= 1e-7 * c.norm().max(1e-3), "dt={dt}: {c} vs {q}");
    }
}

#[test]
fn oscillator_scans_bracket_timescales() {
    let a0 = OMEGA;
    let (td, to) = (decoherence_time(&cfg(), a0), orthogonality_time(&cfg(), a0).unwrap());
    assert!(td < to);
    let grid: Vec<f64> = (1..=300).map(|i| i as f64 * to / 200.0).collect();
    let step = grid[1] - grid[0];
    let dfam =
        DecoherenceFamily::new(DecoherenceFactorSpec::new(osc(), sinc(0.5), cfg(), (2, 1), (1.0, 2.0), td).unwrap());
    let ofam = OrthogonalityFamily::new(osc(), sinc(0.5), sinc(0.5), cfg(), (2, 1), (1.0, 2.0));
    let d = decoherence_threshold_scan(&dfam, &grid, Evaluator::Closed).unwrap();
    let o = orthogonality_threshold_scan(&ofam, &grid, Evaluator::Closed).unwrap();
    assert!((d.threshold - td).abs() <= step + 1e-12, "{} vs {td}", d.threshold);
    assert!((o.threshold - to).abs() <= step + 1e-12, "{} vs {to}", o.threshold);
}

#[test]
fn pointer_densities_separate_at_orthogonality() {
    let c = cfg();
    let levels: Vec<PiecewiseDensity> = (0..4)
        .map(|k| oscillator_density(k, c.lambda, OMEGA, c.b0, c.hbar).unwrap())
        .collect();
    assert!(supports_disjoint(&levels));
    for d in &levels {
        assert!((d.area() - 1.0).abs() < 1e-12);
    }
    // below the orthogonality condition the trapezoid is not defined
    assert!(oscillator_density(0, 0.3, OMEGA, c.b0, c.hbar).is_err());
}

#[test]
fn reduced_oscillator_state_loses_coherence() {
    let amps = SpectrumSpec::equal_weights(3);
    let spec = SpectrumSpec::oscillator(1.0, OMEGA, amps).unwrap();
    let model = JointModel::new(cfg(), spec, sinc(0.5), sinc(0.5)).unwrap();
    let to = orthogonality_time(&cfg(), OMEGA).unwrap();
    let rho = assemble_reduced_system(&model, 1.1 * to, 1e-6).unwrap();
    assert!((rho.trace() - 1.0).abs() < 1e-12);
    assert!(rho.offdiag_norm() < 1e-9, "{}", rho.offdiag_norm());
    assert!((purity(&rho) - 1.0 / 3.0).abs() < 1e-9);
    for k in 0..3 {
        assert!((rho.matrix()[(k, k)].re - 1.0 / 3.0).abs() < 1e-14);
    }
}

//! Analytic solution of the joint von Neumann equation on (q, b) grids.

use ndarray::{s, Array2, ArrayView2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{positive, Error, Result};
use crate::model::{Coupling, MeasurementConfig, SpectrumSpec};
use crate::quad::{integrate_real_line, ExpRational, QuadratureRequest, DEFAULT_ABS_TOL, DEFAULT_REL_TOL};
use crate::states::BandLimitedState;

/// Uniform grid of n ≥ 2 points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    start: f64,
    step: f64,
    n: usize,
}

impl Grid1D {
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter {
                field: "n",
                reason: "grid needs at least two points".into(),
            });
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidParameter {
                field: "grid",
                reason: format!("bad range [{lo}, {hi}]"),
            });
        }
        Ok(Self {
            start: lo,
            step: (hi - lo) / (n - 1) as f64,
            n,
        })
    }

    /// n points on [−half_width, half_width].
    pub fn centered(half_width: f64, n: usize) -> Result<Self> {
        positive("half_width", half_width)?;
        Self::linspace(-half_width, half_width, n)
    }

    /// Accepts explicit points if they are strictly increasing and uniform within 1e−12·h.
    pub fn from_points(points: &[f64]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter {
                field: "n",
                reason: "grid needs at least two points".into(),
            });
        }
        let n = points.len();
        let h = (points[n - 1] - points[0]) / (n - 1) as f64;
        let uniform = h > 0.0
            && points
                .windows(2)
                .all(|w| w[1] > w[0] && ((w[1] - w[0]) - h).abs() <= 1e-12 * h.max(1.0));
        if !uniform {
            return Err(Error::InvalidParameter {
                field: "grid",
                reason: "points must be increasing and uniform".into(),
            });
        }
        Ok(Self {
            start: points[0],
            step: h,
            n,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn first(&self) -> f64 {
        self.start
    }

    pub fn last(&self) -> f64 {
        self.get(self.n - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.get(i))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.points().collect()
    }
}

/// System, probe and pointer together with the coupling schedule.
#[derive(Debug, Clone)]
pub struct JointModel {
    pub cfg: MeasurementConfig,
    pub spec: SpectrumSpec,
    pub probe: BandLimitedState,
    pub pointer: BandLimitedState,
    pub coupling: Coupling,
}

impl JointModel {
    pub fn new(
        cfg: MeasurementConfig,
        spec: SpectrumSpec,
        probe: BandLimitedState,
        pointer: BandLimitedState,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            spec,
            probe,
            pointer,
            coupling: Coupling::FixLambda,
        })
    }

    pub fn with_coupling(mut self, coupling: Coupling) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn levels(&self) -> usize {
        self.spec.len()
    }

    /// β at time t. Fixed-λ coupling diverges at t = 0.
    pub fn beta(&self, t: f64) -> Result<f64> {
        self.coupling.beta(&self.cfg, t)
    }

    /// f_k(q, b; t) = ⟨φ_k|ψ_S⟩ ψ_Pr(q − βbg₀t) Φ(b) e^{−iαg₀t a_k q/ħ} e^{iαβg₀²t² a_k b/(2ħ)}.
    pub fn f_k(&self, k: usize, q: f64, b: f64, t: f64) -> Result<Complex64> {
        Ok(self.f_with_beta(k, q, b, t, self.beta(t)?))
    }

    fn f_with_beta(&self, k: usize, q: f64, b: f64, t: f64, beta: f64) -> Complex64 {
        let MeasurementConfig { hbar, alpha, g0, .. } = self.cfg;
        let a = self.spec.eigenvalues()[k];
        let phase = -alpha * g0 * t * a * q / hbar + 0.5 * alpha * beta * g0 * g0 * t * t * a * b / hbar;
        self.spec.amplitudes()[k]
            * self.probe.position_amplitude(q - beta * b * g0 * t)
            * self.pointer.position_amplitude(b)
            * Complex64::from_polar(1.0, phase)
    }

    /// C_kl(q, b; t) = f_k conj(f_l).
    pub fn c_kl(&self, k: usize, l: usize, q: f64, b: f64, t: f64) -> Result<Complex64> {
        let beta = self.beta(t)?;
        Ok(self.c_with_beta(k, l, q, b, t, beta))
    }

    fn c_with_beta(&self, k: usize, l: usize, q: f64, b: f64, t: f64, beta: f64) -> Complex64 {
        self.f_with_beta(k, q, b, t, beta) * self.f_with_beta(l, q, b, t, beta).conj()
    }
}

/// |αg₀(a_k − a_l)q·C + (ħ/i)βg₀b·∂_qC − iħ∂_tC| by central differences.
/// β is frozen at its value at t across the time stencil.
#[allow(clippy::too_many_arguments)]
pub fn pde_residual(model: &JointModel, k: usize, l: usize, q: f64, b: f64, t: f64, h_q: f64, h_t: f64) -> Result<f64> {
    positive("h_q", h_q)?;
    positive("h_t", h_t)?;
    let beta = model.beta(t)?;
    let MeasurementConfig { hbar, alpha, g0, .. } = model.cfg;
    let a = model.spec.eigenvalues();
    let c = |q: f64, t: f64| model.c_with_beta(k, l, q, b, t, beta);
    let dq = (c(q + h_q, t) - c(q - h_q, t)) / (2.0 * h_q);
    let dt = (c(q, t + h_t) - c(q, t - h_t)) / (2.0 * h_t);
    let i = Complex64::i();
    let r = alpha * g0 * (a[k] - a[l]) * q * c(q, t) - i * hbar * beta * g0 * b * dq - i * hbar * dt;
    Ok(r.norm())
}

/// Which degrees of freedom a reduced matrix lives on.
#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    /// Index (k, i) ↦ k·n + i over system levels and pointer grid points.
    SystemPointer {
        levels: usize,
        grid: Grid1D,
    },
    System {
        levels: usize,
    },
}

/// A reduced density matrix stored with its quadrature weight folded in,
/// so the trace is the diagonal sum and the matrix acts as the operator.
#[derive(Debug, Clone)]
pub struct ReducedDensityMatrix {
    basis: Basis,
    matrix: Array2<Complex64>,
}

impl ReducedDensityMatrix {
    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn matrix(&self) -> ArrayView2<'_, Complex64> {
        self.matrix.view()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diag().iter().map(|z| z.re).sum()
    }

    /// max |ρ − ρ†|.
    pub fn hermiticity_defect(&self) -> f64 {
        let t = self.matrix.t();
        self.matrix
            .iter()
            .zip(t.iter())
            .map(|(a, b)| (a - b.conj()).norm())
            .fold(0.0, f64::max)
    }

    fn block_size(&self) -> usize {
        match &self.basis {
            Basis::SystemPointer { grid, .. } => grid.len(),
            Basis::System { .. } => 1,
        }
    }

    /// The (k, l) block of the system index.
    pub fn block(&self, k: usize, l: usize) -> ArrayView2<'_, Complex64> {
        let n = self.block_size();
        self.matrix.slice(s![k * n..(k + 1) * n, l * n..(l + 1) * n])
    }

    /// Frobenius norm of all k ≠ l blocks.
    pub fn offdiag_norm(&self) -> f64 {
        let n = self.block_size();
        self.matrix
            .indexed_iter()
            .filter(|((i, j), _)| i / n != j / n)
            .map(|(_, z)| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Traces out the pointer, leaving the system matrix.
    pub fn system_part(&self) -> ReducedDensityMatrix {
        let levels = match self.basis {
            Basis::SystemPointer { levels, .. } | Basis::System { levels } => levels,
        };
        let m = Array2::from_shape_fn((levels, levels), |(k, l)| self.block(k, l).diag().sum());
        ReducedDensityMatrix {
            basis: Basis::System { levels },
            matrix: m,
        }
    }
}

/// Tr ρ².
pub fn purity(rho: &ReducedDensityMatrix) -> f64 {
    rho.matrix.iter().map(|z| z.norm_sqr()).sum()
}

/// Default grids: ±40/b₀ for b and ±(40/κ₀ + c·40/b₀) for q, c = 2λ/(αg₀t)
/// being the shear the pointer imprints on the probe; 512 points each.
pub fn default_grids(model: &JointModel, t: f64) -> Result<(Grid1D, Grid1D)> {
    let beta = model.beta(t)?;
    let shear = beta * model.cfg.g0 * t;
    let b_half = 40.0 / model.pointer.band_limit();
    let q_half = 40.0 / model.probe.band_limit() + shear.abs() * b_half;
    Ok((Grid1D::centered(q_half, 512)?, Grid1D::centered(b_half, 512)?))
}

/// ρ_{S⊗Po} over (k, b) × (l, b′) from the probe trace of the grid coefficients.
/// Fails with GridTooCoarse when |Tr ρ − 1| exceeds `trace_tol`.
pub fn assemble_reduced_system_pointer(
    model: &JointModel,
    t: f64,
    q_grid: &Grid1D,
    b_grid: &Grid1D,
    trace_tol: f64,
) -> Result<ReducedDensityMatrix> {
    let beta = model.beta(t)?;
    let (nq, nb, levels) = (q_grid.len(), b_grid.len(), model.levels());
    // F[q, (k, b)]
    let data: Vec<Complex64> = (0..nq)
        .into_par_iter()
        .flat_map_iter(|iq| {
            let q = q_grid.get(iq);
            (0..levels).flat_map(move |k| (0..nb).map(move |ib| model.f_with_beta(k, q, b_grid.get(ib), t, beta)))
        })
        .collect();
    let f = Array2::from_shape_vec((nq, levels * nb), data).expect("shape matches grid sizes");
    let fh = f.t().mapv(|z| z.conj());
    let w = q_grid.step() * b_grid.step();
    let mut m = fh.dot(&f);
    m.mapv_inplace(|z| z * w);
    // M[(k,b),(l,b′)] = Σ_q conj(f_k) f_l; the density matrix is its transpose.
    let matrix = m.reversed_axes().as_standard_layout().to_owned();
    let rho = ReducedDensityMatrix {
        basis: Basis::SystemPointer { levels, grid: *b_grid },
        matrix,
    };
    check_trace(rho, trace_tol)
}

fn check_trace(rho: ReducedDensityMatrix, tol: f64) -> Result<ReducedDensityMatrix> {
    let tr = rho.trace();
    if (tr - 1.0).abs() > tol {
        return Err(Error::GridTooCoarse(format!(
            "trace {tr} deviates from 1 by more than {tol}"
        )));
    }
    Ok(rho)
}

/// ∫|χ(x)|² e^{−iωx} dx for a band-limited state.
pub fn density_fourier(state: &BandLimitedState, omega: f64) -> Result<Complex64> {
    let tau = state.band_limit();
    if state.is_sinc() {
        let norm = 1.0 / (std::f64::consts::PI * tau);
        let f = move |x: f64| Complex64::from_polar(norm, -omega * x) * crate::special::sin_over(tau, x).powi(2);
        let tail = ExpRational::sinc_product(Complex64::new(norm, 0.0), -omega, &[(tau, 0.0), (tau, 0.0)]);
        let req = QuadratureRequest::new(&f)
            .frequency(omega.abs() + 2.0 * tau)
            .breakpoints([0.0])
            .tolerances(DEFAULT_ABS_TOL, DEFAULT_REL_TOL)
            .tail(&tail);
        Ok(integrate_real_line(&req)?.value)
    } else {
        let f = |x: f64| Complex64::from_polar(state.position_density(x), -omega * x);
        let req = QuadratureRequest::new(&f)
            .frequency(omega.abs() + 2.0 * tau)
            .breakpoints([0.0])
            .tolerances(DEFAULT_ABS_TOL, DEFAULT_REL_TOL);
        Ok(integrate_real_line(&req)?.value)
    }
}

/// ρ_S by quadrature: ρ_kl = c_k c̄_l ∫|Φ|²e^{−iλ(a_k−a_l)b/ħ}db · ∫|ψ|²e^{−iαg₀t(a_k−a_l)q/ħ}dq,
/// with λ the effective coupling at t.
pub fn assemble_reduced_system(model: &JointModel, t: f64, trace_tol: f64) -> Result<ReducedDensityMatrix> {
    positive("t", t)?;
    let cfg = model.coupling.effective(&model.cfg, t);
    let (a, c) = (model.spec.eigenvalues(), model.spec.amplitudes());
    let n = a.len();
    let mut m = Array2::<Complex64>::zeros((n, n));
    for k in 0..n {
        for l in 0..n {
            m[(k, l)] = if k == l {
                c[k] * c[k].conj()
            } else if l < k {
                m[(l, k)].conj()
            } else {
                let d = (a[k] - a[l]) / cfg.hbar;
                let p = density_fourier(&model.pointer, cfg.lambda * d)?;
                let q = density_fourier(&model.probe, cfg.alpha * cfg.g0 * t * d)?;
                c[k] * c[l].conj() * p * q
            };
        }
    }
    check_trace(
        ReducedDensityMatrix {
            basis: Basis::System { levels: n },
            matrix: m,
        },
        trace_tol,
    )
}

/// I_kl(b, b′) as a probe-trace sum over `q_grid`.
pub fn grid_decoherence_factor(
    model: &JointModel,
    k: usize,
    l: usize,
    t: f64,
    b: f64,
    b_prime: f64,
    q_grid: &Grid1D,
) -> Result<Complex64> {
    let beta = model.beta(t)?;
    let MeasurementConfig { hbar, alpha, g0, .. } = model.cfg;
    let shear = beta * g0 * t;
    let omega = alpha * g0 * t * (model.spec.eigenvalues()[k] - model.spec.eigenvalues()[l]) / hbar;
    let probe = &model.probe;
    let sum: Complex64 = q_grid
        .points()
        .map(|q| {
            probe.position_amplitude(q - shear * b)
                * probe.position_amplitude(q - shear * b_prime).conj()
                * Complex64::from_polar(1.0, -omega * q)
        })
        .sum();
    Ok(sum * q_grid.step())
}

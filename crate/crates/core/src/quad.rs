//! Adaptive Gauss–Kronrod quadrature for oscillatory integrals on finite
//! intervals and on the real line.
//!
//! Integrands that are products of shifted sinc factors times a plane wave
//! can carry an exact exponential-rational expansion. Their tails beyond
//! ±R are then integrated along rays rotated into the half-plane where
//! each term decays, which is exact and costs a handful of panels.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::special::compensated_sum;

pub const DEFAULT_ABS_TOL: f64 = 1e-10;
pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_PANELS: usize = 400_000;

// QUADPACK qk21 abscissae and weights.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub panels_used: usize,
}

/// One term c·e^{iνz} of an [`ExpRational`] sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub coeff: Complex64,
    pub freq: f64,
}

/// Σ c_j e^{iν_j z} / Π (z − p), all terms sharing the real poles p.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpRational {
    terms: Vec<ExpTerm>,
    poles: Vec<f64>,
}

impl ExpRational {
    pub fn new(terms: Vec<ExpTerm>, poles: Vec<f64>) -> Self {
        Self { terms, poles }
    }

    /// Expansion of prefactor·e^{iωz}·Π sin(τ_j(z − c_j))/(z − c_j).
    pub fn sinc_product(prefactor: Complex64, omega: f64, factors: &[(f64, f64)]) -> Self {
        let mut terms = vec![ExpTerm {
            coeff: prefactor,
            freq: omega,
        }];
        let half_i = Complex64::new(0.0, 2.0).inv();
        for &(tau, c) in factors {
            let mut next = Vec::with_capacity(terms.len() * 2);
            for t in &terms {
                for s in [1.0, -1.0] {
                    let phase = Complex64::from_polar(1.0, -s * tau * c);
                    next.push(ExpTerm {
                        coeff: t.coeff * half_i * s * phase,
                        freq: t.freq + s * tau,
                    });
                }
            }
            terms = next;
        }
        // merge equal frequencies so that cancelling pairs combine exactly
        terms.sort_by(|a, b| a.freq.total_cmp(&b.freq));
        let scale = terms.iter().fold(1.0f64, |m, t| m.max(t.freq.abs()));
        let mut merged: Vec<ExpTerm> = Vec::new();
        for t in terms {
            match merged.last_mut() {
                Some(last) if (last.freq - t.freq).abs() <= 1e-13 * scale => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        Self {
            terms: merged,
            poles: factors.iter().map(|f| f.1).collect(),
        }
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn poles(&self) -> &[f64] {
        &self.poles
    }

    pub fn max_pole(&self) -> f64 {
        self.poles.iter().fold(0.0f64, |m, p| m.max(p.abs()))
    }

    fn denominator(&self, z: Complex64) -> Complex64 {
        self.poles.iter().fold(Complex64::new(1.0, 0.0), |acc, p| acc * (z - p))
    }

    /// Direct evaluation. Loses precision near the poles; meant for |z| large.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let num: Complex64 = self
            .terms
            .iter()
            .map(|t| t.coeff * (Complex64::i() * t.freq * z).exp())
            .sum();
        num / self.denominator(z)
    }

    fn eval_half(&self, z: Complex64, sigma: f64) -> Complex64 {
        let num: Complex64 = self
            .terms
            .iter()
            .filter(|t| tail_sign(t.freq) == sigma)
            .map(|t| t.coeff * (Complex64::i() * t.freq * z).exp())
            .sum();
        num / self.denominator(z)
    }
}

fn tail_sign(freq: f64) -> f64 {
    if freq >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

type Integrand<'a> = dyn Fn(f64) -> Complex64 + Sync + 'a;

/// A complex integrand plus the information used to size panels and tails.
#[derive(Clone)]
pub struct QuadratureRequest<'a> {
    pub integrand: &'a Integrand<'a>,
    /// Dominant |a| in the e^{iax} factors; panels are at most π/a wide.
    pub oscillation_frequency: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub truncation_hint: Option<f64>,
    pub breakpoints: Vec<f64>,
    pub tail: Option<&'a ExpRational>,
    pub max_panels: usize,
}

impl<'a> QuadratureRequest<'a> {
    pub fn new(integrand: &'a Integrand<'a>) -> Self {
        Self {
            integrand,
            oscillation_frequency: 0.0,
            abs_tol: DEFAULT_ABS_TOL,
            rel_tol: DEFAULT_REL_TOL,
            truncation_hint: None,
            breakpoints: Vec::new(),
            tail: None,
            max_panels: DEFAULT_MAX_PANELS,
        }
    }

    pub fn frequency(mut self, a: f64) -> Self {
        self.oscillation_frequency = a.abs();
        self
    }

    pub fn tolerances(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }

    pub fn breakpoints(mut self, points: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(points);
        self
    }

    pub fn truncation(mut self, r: f64) -> Self {
        self.truncation_hint = Some(r);
        self
    }

    pub fn tail(mut self, expansion: &'a ExpRational) -> Self {
        self.tail = Some(expansion);
        self
    }

    pub fn max_panels(mut self, n: usize) -> Self {
        self.max_panels = n;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter {
                field: "tol",
                reason: "tolerances must be positive".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
    res_abs: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = err.abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    err
}

fn gk21<F: Fn(f64) -> Complex64 + ?Sized>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = Complex64::new(0.0, 0.0);
    let mut res_abs = fc.norm() * WGK[10];
    let mut f1 = [Complex64::new(0.0, 0.0); 10];
    let mut f2 = [Complex64::new(0.0, 0.0); 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let (u, v) = (f(center - x), f(center + x));
        f1[j] = u;
        f2[j] = v;
        res_k += (u + v) * WGK[j];
        res_abs += (u.norm() + v.norm()) * WGK[j];
        if j % 2 == 1 {
            res_g += (u + v) * WG[j / 2];
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (fc - mean).norm();
    for j in 0..10 {
        res_asc += WGK[j] * ((f1[j] - mean).norm() + (f2[j] - mean).norm());
    }
    let scale = half.abs();
    Panel {
        a,
        b,
        value: res_k * half,
        error: rescale_error(((res_k - res_g) * half).norm(), res_abs * scale, res_asc * scale),
        res_abs: res_abs * scale,
    }
}

/// Splits [lo, hi] at the breakpoints inside it and then into pieces no wider
/// than `max_width`.
fn initial_panels(lo: f64, hi: f64, breakpoints: &[f64], max_width: f64) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|x| *x > lo && *x < hi).collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * y.abs().max(1.0));
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let width = w[1] - w[0];
        let n = if max_width.is_finite() {
            (width / max_width).ceil().max(1.0) as usize
        } else {
            1
        };
        let h = width / n as f64;
        for i in 0..n {
            let a = w[0] + i as f64 * h;
            let b = if i + 1 == n { w[1] } else { a + h };
            out.push((a, b));
        }
    }
    out
}

fn adaptive<F: Fn(f64) -> Complex64 + ?Sized>(
    f: &F,
    start: &[(f64, f64)],
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<QuadratureResult> {
    if start.len() > max_panels {
        return Err(Error::NoConvergence {
            value: Complex64::new(f64::NAN, f64::NAN),
            error: f64::INFINITY,
            panels: start.len(),
        });
    }
    let mut heap: BinaryHeap<Panel> = start.iter().map(|&(a, b)| gk21(f, a, b)).collect();
    let mut frozen: Vec<Panel> = Vec::new();
    let mut total = compensated_sum(heap.iter().map(|p| p.value));
    let mut err: f64 = heap.iter().map(|p| p.error).sum();
    let mut steps = 0usize;
    loop {
        let target = abs_tol.max(rel_tol * total.norm());
        if err <= target {
            break;
        }
        if heap.len() + frozen.len() >= max_panels {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        let roundoff = worst.error <= 100.0 * f64::EPSILON * worst.res_abs;
        if roundoff || !(mid > worst.a && mid < worst.b) {
            frozen.push(worst);
            continue;
        }
        let (l, r) = (gk21(f, worst.a, mid), gk21(f, mid, worst.b));
        total += l.value + r.value - worst.value;
        err += l.error + r.error - worst.error;
        heap.push(l);
        heap.push(r);
        steps += 1;
        if steps.is_multiple_of(512) {
            // resynchronise the running sums
            total = compensated_sum(heap.iter().chain(&frozen).map(|p| p.value));
            err = heap.iter().chain(&frozen).map(|p| p.error).sum();
        }
    }
    let value = compensated_sum(heap.iter().chain(&frozen).map(|p| p.value));
    let error: f64 = heap.iter().chain(&frozen).map(|p| p.error).sum();
    let panels = heap.len() + frozen.len();
    if error <= abs_tol.max(rel_tol * value.norm()) {
        Ok(QuadratureResult {
            value,
            error_estimate: error,
            panels_used: panels,
        })
    } else {
        Err(Error::NoConvergence { value, error, panels })
    }
}

fn max_width(freq: f64) -> f64 {
    if freq > 0.0 {
        std::f64::consts::PI / freq
    } else {
        f64::INFINITY
    }
}

/// ∫_lo^hi f(x) dx.
pub fn integrate_interval(req: &QuadratureRequest, lo: f64, hi: f64) -> Result<QuadratureResult> {
    req.validate()?;
    if !(lo < hi) {
        return Err(Error::InvalidParameter {
            field: "lo",
            reason: format!("empty interval [{lo}, {hi}]"),
        });
    }
    let panels = initial_panels(lo, hi, &req.breakpoints, max_width(req.oscillation_frequency));
    adaptive(req.integrand, &panels, req.abs_tol, req.rel_tol, req.max_panels)
}

/// ∫_{-∞}^{∞} f(x) dx.
pub fn integrate_real_line(req: &QuadratureRequest) -> Result<QuadratureResult> {
    req.validate()?;
    match req.tail {
        Some(tail) => integrate_with_tails(req, tail),
        None => integrate_truncated(req),
    }
}

fn integrate_with_tails(req: &QuadratureRequest, tail: &ExpRational) -> Result<QuadratureResult> {
    let extent = req.breakpoints.iter().fold(tail.max_pole(), |m, x| m.max(x.abs()));
    let decay = if req.oscillation_frequency > 0.0 {
        (10.0 / req.oscillation_frequency).max(1.0)
    } else {
        10.0
    };
    let r = req.truncation_hint.unwrap_or(0.0).max(extent + decay);
    let core = integrate_interval(
        &QuadratureRequest {
            abs_tol: 0.5 * req.abs_tol,
            ..req.clone()
        },
        -r,
        r,
    )?;
    let mut parts = vec![core.value];
    let mut error = core.error_estimate;
    let mut panels = core.panels_used;
    let i = Complex64::i();
    for side in [1.0, -1.0] {
        for sigma in [1.0, -1.0] {
            if !tail.terms.iter().any(|t| tail_sign(t.freq) == sigma) {
                continue;
            }
            // ray z = side·R + iσt, t = R s/(1 − s)
            let g = move |s: f64| {
                let t = r * s / (1.0 - s);
                let dt = r / ((1.0 - s) * (1.0 - s));
                let z = Complex64::new(side * r, sigma * t);
                tail.eval_half(z, sigma) * (i * sigma * side * dt)
            };
            let start = initial_panels(0.0, 1.0, &[1e-4, 1e-3, 1e-2, 0.1, 0.5, 0.9], f64::INFINITY);
            let res = adaptive(&g, &start, 0.125 * req.abs_tol, req.rel_tol, req.max_panels)?;
            parts.push(res.value);
            error += res.error_estimate;
            panels += res.panels_used;
        }
    }
    let value = compensated_sum(parts);
    Ok(QuadratureResult {
        value,
        error_estimate: error,
        panels_used: panels,
    })
}

fn envelope<F: Fn(f64) -> Complex64 + ?Sized>(f: &F, r: f64) -> f64 {
    (0..=16)
        .flat_map(|j| {
            let x = r * (1.0 + j as f64 / 8.0);
            [x, -x]
        })
        .map(|x| f(x).norm() * x * x)
        .fold(0.0, f64::max)
}

fn integrate_truncated(req: &QuadratureRequest) -> Result<QuadratureResult> {
    let f = req.integrand;
    let extent = req.breakpoints.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut r = req
        .truncation_hint
        .unwrap_or(0.0)
        .max(2.0 * extent + 10.0 * max_width(req.oscillation_frequency).min(10.0));
    let goal = 0.1 * req.abs_tol;
    let mut bound = 2.0 * envelope(f, r) / r;
    let mut guard = 0;
    while bound > goal {
        r *= 2.0;
        bound = 2.0 * envelope(f, r) / r;
        guard += 1;
        if guard > 60 {
            break;
        }
    }
    let inner = QuadratureRequest {
        abs_tol: 0.5 * req.abs_tol,
        ..req.clone()
    };
    let mut res = integrate_interval(&inner, -r, r)?;
    for _ in 0..40 {
        let right = integrate_interval(&inner, r, 2.0 * r)?;
        let left = integrate_interval(&inner, -2.0 * r, -r)?;
        let inc = right.value + left.value;
        res.value += inc;
        res.error_estimate += right.error_estimate + left.error_estimate;
        res.panels_used += right.panels_used + left.panels_used;
        r *= 2.0;
        if inc.norm() <= goal {
            res.error_estimate += bound.min(inc.norm().max(goal));
            if res.error_estimate <= req.abs_tol.max(req.rel_tol * res.value.norm()) {
                return Ok(res);
            }
            break;
        }
    }
    Err(Error::NoConvergence {
        value: res.value,
        error: res.error_estimate.max(bound),
        panels: res.panels_used,
    })
}

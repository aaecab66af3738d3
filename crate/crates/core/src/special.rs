//! Sinc kernels and compensated summation.

use num_complex::Complex64;

const SERIES_CUTOFF: f64 = 1e-4;

/// sin(x)/x with the removable point filled.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// sin(tau*x)/x, equal to tau at x = 0.
#[inline]
pub fn sin_over(tau: f64, x: f64) -> f64 {
    tau * sinc(tau * x)
}

pub fn csinc(z: Complex64) -> Complex64 {
    if z.norm() < SERIES_CUTOFF {
        let z2 = z * z;
        Complex64::new(1.0, 0.0) - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// (e^{iz} - 1)/z, stable for small z.
pub fn expm1_over(z: Complex64) -> Complex64 {
    let i = Complex64::i();
    i * (i * z / 2.0).exp() * csinc(z / 2.0)
}

/// Neumaier summation, applied to the real and imaginary parts separately.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    re: (f64, f64),
    im: (f64, f64),
}

#[inline]
fn neumaier(acc: &mut (f64, f64), x: f64) {
    let t = acc.0 + x;
    if acc.0.abs() >= x.abs() {
        acc.1 += (acc.0 - t) + x;
    } else {
        acc.1 += (x - t) + acc.0;
    }
    acc.0 = t;
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        neumaier(&mut self.re, z.re);
        neumaier(&mut self.im, z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

impl std::iter::FromIterator<Complex64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for z in iter {
            s.add(z);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = Complex64>>(iter: I) -> Complex64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinc_branches_meet() {
        let x = SERIES_CUTOFF;
        let series = 1.0 - x * x / 6.0 + x.powi(4) / 120.0;
        assert!((series - x.sin() / x).abs() < 1e-15);
        assert_eq!(sinc(0.0), 1.0);
        assert!((sin_over(0.25, 0.0) - 0.25).abs() < 1e-16);
    }

    #[test]
    fn expm1_over_matches_direct() {
        for &z in &[1e-9, 1e-3, 0.5, 3.0, -7.0] {
            let z = Complex64::new(z, 0.0);
            let direct = ((Complex64::i() * z).exp() - 1.0) / z;
            assert!((expm1_over(z) - direct).norm() < 1e-7 * direct.norm().max(1.0));
        }
        assert!((expm1_over(Complex64::new(0.0, 0.0)) - Complex64::i()).norm() < 1e-16);
    }

    #[test]
    fn compensation_recovers_small_terms() {
        let terms = [1e16, 1.0, -1e16, 1.0].map(|x| Complex64::new(x, -x));
        let s = compensated_sum(terms);
        assert_eq!(s, Complex64::new(2.0, -2.0));
    }
}

//! Special functions used by the inversion weights and kernels.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

/// Bessel function of the first kind, order 0.
#[inline]
pub fn j0(x: f64) -> f64 {
    libm::j0(x)
}

/// Bessel function of the first kind, order 1.
#[inline]
pub fn j1(x: f64) -> f64 {
    libm::j1(x)
}

/// `J_{1/2}(x) = sqrt(2/(pi x)) sin x` for `x >= 0`.
pub fn j_half(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    (2.0 / (PI * x)).sqrt() * x.sin()
}

/// `J_{-1/2}(x) = sqrt(2/(pi x)) cos x` for `x > 0`.
pub fn j_minus_half(x: f64) -> f64 {
    (2.0 / (PI * x)).sqrt() * x.cos()
}

/// `sin(x)/x - cos(x)`, accurate near zero where it behaves like `x^2/3`.
pub fn sinc_minus_cos(x: f64) -> f64 {
    if x.abs() < 0.5 {
        // sum_{n>=1} (-1)^{n+1} 2n x^{2n} / (2n+1)!
        let x2 = x * x;
        let mut term = x2 / 3.0;
        let mut sum = term;
        let mut n = 1.0;
        while term.abs() > 1e-18 * sum.abs() && n < 40.0 {
            let k = 2.0 * n;
            term *= -x2 / (k * (k + 3.0));
            sum += term;
            n += 1.0;
        }
        sum
    } else {
        x.sin() / x - x.cos()
    }
}

/// `J_{3/2}(x) = sqrt(2/(pi x)) (sin x / x - cos x)` for `x >= 0`.
pub fn j_three_halves(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    (2.0 / (PI * x)).sqrt() * sinc_minus_cos(x)
}

/// Sine integral `Si(x) = int_0^x sin(t)/t dt`.
///
/// Power series for `|x| <= 4`; beyond that the continued fraction for
/// `E1(ix)` evaluated with the modified Lentz method, which is the
/// convergent form of the large-argument asymptotic expansion.
pub fn si(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= 4.0 {
        si_series(ax)
    } else {
        si_continued_fraction(ax)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

fn si_series(x: f64) -> f64 {
    let x2 = x * x;
    // t_n = (-1)^n x^{2n+1} / (2n+1)!
    let mut t = x;
    let mut sum = x;
    let mut n = 0.0f64;
    loop {
        t *= -x2 / ((2.0 * n + 2.0) * (2.0 * n + 3.0));
        n += 1.0;
        let term = t / (2.0 * n + 1.0);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn si_continued_fraction(x: f64) -> f64 {
    const FPMIN: f64 = 1e-300;
    let mut b = Complex64::new(1.0, x);
    let mut c = Complex64::new(1.0 / FPMIN, 0.0);
    let mut d = Complex64::new(1.0, 0.0) / b;
    let mut h = d;
    let mut i = 2.0f64;
    loop {
        let a = -(i - 1.0) * (i - 1.0);
        b += Complex64::new(2.0, 0.0);
        d = Complex64::new(1.0, 0.0) / (d * a + b);
        c = b + Complex64::new(a, 0.0) / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 || i > 1e5 {
            break;
        }
        i += 1.0;
    }
    h *= Complex64::new(x.cos(), -x.sin());
    FRAC_PI_2 + h.im
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn si_limits() {
        assert_eq!(si(0.0), 0.0);
        assert!((si(1e6) - FRAC_PI_2).abs() < 1e-5);
        assert_eq!(si(-3.0), -si(3.0));
    }

    #[test]
    fn si_branch_continuity() {
        let below = si(4.0 - 1e-12);
        let above = si(4.0 + 1e-12);
        assert!((below - above).abs() < 1e-12);
    }

    #[test]
    fn si_known_values() {
        // Tabulated values of the sine integral.
        assert!((si(1.0) - 0.946_083_070_367_183).abs() < 1e-14);
        assert!((si(10.0) - 1.658_347_594_218_874).abs() < 1e-14);
        assert!((si(PI) - 1.851_937_051_982_466).abs() < 1e-14);
    }

    #[test]
    fn three_halves_small_argument() {
        assert_eq!(j_three_halves(0.0), 0.0);
        let x: f64 = 1e-3;
        let lead = (2.0 / PI).sqrt() * x.powf(1.5) / 3.0;
        assert!((j_three_halves(x) / lead - 1.0).abs() < 1e-6);
        let x: f64 = 0.4999;
        let direct = x.sin() / x - x.cos();
        assert!((sinc_minus_cos(x) - direct).abs() < 1e-15);
    }
}

//! Small dense Hermitian linear algebra on row-major slices.

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Lower Cholesky factor of a Hermitian positive definite matrix, or `None`.
pub fn cholesky(a: &[Complex64], n: usize) -> Option<Vec<Complex64>> {
    let mut l = vec![ZERO; n * n];
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[j * n + j] = Complex64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / djj;
        }
    }
    Some(l)
}

/// Solves `L Y = B` in place for `B` of shape `n x m`.
pub fn forward_substitute(l: &[Complex64], n: usize, b: &mut [Complex64], m: usize) {
    for c in 0..m {
        for i in 0..n {
            let mut s = b[i * m + c];
            for k in 0..i {
                s -= l[i * n + k] * b[k * m + c];
            }
            b[i * m + c] = s / l[i * n + i].re;
        }
    }
}

/// Solves `L^H X = B` in place for `B` of shape `n x m`.
pub fn backward_substitute(l: &[Complex64], n: usize, b: &mut [Complex64], m: usize) {
    for c in 0..m {
        for i in (0..n).rev() {
            let mut s = b[i * m + c];
            for k in i + 1..n {
                s -= l[k * n + i].conj() * b[k * m + c];
            }
            b[i * m + c] = s / l[i * n + i].re;
        }
    }
}

/// Inverse of a Hermitian positive definite matrix, or `None`.
pub fn inverse_hpd(a: &[Complex64], n: usize) -> Option<Vec<Complex64>> {
    let l = cholesky(a, n)?;
    let mut x = vec![ZERO; n * n];
    for i in 0..n {
        x[i * n + i] = Complex64::new(1.0, 0.0);
    }
    forward_substitute(&l, n, &mut x, n);
    backward_substitute(&l, n, &mut x, n);
    hermitize(&mut x, n);
    Some(x)
}

/// Replaces `a` by `(a + a^H) / 2`.
pub fn hermitize(a: &mut [Complex64], n: usize) {
    for i in 0..n {
        a[i * n + i].im = 0.0;
        for j in i + 1..n {
            let v = 0.5 * (a[i * n + j] + a[j * n + i].conj());
            a[i * n + j] = v;
            a[j * n + i] = v.conj();
        }
    }
}

/// Eigenvalues (ascending) of a Hermitian matrix, via cyclic Jacobi on the
/// real symmetric embedding `[[Re, -Im], [Im, Re]]`, whose spectrum is
/// that of `a` with every eigenvalue doubled.
pub fn eigenvalues_hermitian(a: &[Complex64], n: usize) -> Vec<f64> {
    let m = 2 * n;
    let mut s = vec![0.0f64; m * m];
    for i in 0..n {
        for j in 0..n {
            let v = a[i * n + j];
            s[i * m + j] = v.re;
            s[(i + n) * m + j + n] = v.re;
            s[i * m + j + n] = -v.im;
            s[(i + n) * m + j] = v.im;
        }
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..m {
            diag += s[i * m + i] * s[i * m + i];
            for j in i + 1..m {
                off += s[i * m + j] * s[i * m + j];
            }
        }
        if off <= 1e-32 * diag || off == 0.0 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = s[p * m + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (s[q * m + q] - s[p * m + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..m {
                    let skp = s[k * m + p];
                    let skq = s[k * m + q];
                    s[k * m + p] = c * skp - sn * skq;
                    s[k * m + q] = sn * skp + c * skq;
                }
                for k in 0..m {
                    let spk = s[p * m + k];
                    let sqk = s[q * m + k];
                    s[p * m + k] = c * spk - sn * sqk;
                    s[q * m + k] = sn * spk + c * sqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..m).map(|i| s[i * m + i]).collect();
    ev.sort_by(f64::total_cmp);
    // pairs are equal; keep one of each
    ev.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect()
}

/// 2-norm condition number of a Hermitian matrix; infinite when not positive definite.
pub fn condition_number(a: &[Complex64], n: usize) -> f64 {
    let (lo, hi) = match n {
        0 => return 1.0,
        1 => (a[0].re, a[0].re),
        2 => {
            let mean = 0.5 * (a[0].re + a[3].re);
            let half = 0.5 * (a[0].re - a[3].re);
            let rad = (half * half + a[1].norm_sqr()).sqrt();
            (mean - rad, mean + rad)
        }
        _ => {
            let ev = eigenvalues_hermitian(a, n);
            (ev[0], ev[n - 1])
        }
    };
    if !(lo > 0.0) || !hi.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample() -> Vec<Complex64> {
        vec![
            c(4.0, 0.0), c(1.0, 1.0), c(0.0, -0.5),
            c(1.0, -1.0), c(3.0, 0.0), c(0.5, 0.0),
            c(0.0, 0.5), c(0.5, 0.0), c(2.0, 0.0),
        ]
    }

    #[test]
    fn inverse_roundtrip() {
        let a = sample();
        let inv = inverse_hpd(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = c(0.0, 0.0);
                for k in 0..3 {
                    s += a[i * 3 + k] * inv[k * 3 + j];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s - c(want, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn eigen_trace_and_det() {
        let a = sample();
        let ev = eigenvalues_hermitian(&a, 3);
        let tr: f64 = ev.iter().sum();
        assert!((tr - 9.0).abs() < 1e-12);
        let l = cholesky(&a, 3).unwrap();
        let det: f64 = (0..3).map(|i| l[i * 3 + i].re.powi(2)).product();
        assert!((ev.iter().product::<f64>() - det).abs() < 1e-11);
    }

    #[test]
    fn condition_closed_form_matches_jacobi() {
        let a = vec![c(2.0, 0.0), c(0.3, -0.7), c(0.3, 0.7), c(1.0, 0.0)];
        let ev = eigenvalues_hermitian(&a, 2);
        assert!((condition_number(&a, 2) - ev[1] / ev[0]).abs() < 1e-12);
        assert_eq!(condition_number(&[c(0.0, 0.0)], 1), f64::INFINITY);
    }

    #[test]
    fn not_positive_definite() {
        let a = vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)];
        assert!(cholesky(&a, 2).is_none());
        assert_eq!(condition_number(&a, 2), f64::INFINITY);
    }
}

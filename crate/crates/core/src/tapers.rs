//! Sine tapers on box windows and their closed-form Fourier transforms.

use std::cmp::Ordering;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::patterns::Window;

/// `M` orthonormal product sine tapers on a box window.
#[derive(Clone, Debug)]
pub struct TaperFamily {
    window: Window,
    indices: Vec<Vec<usize>>,
}

/// Sine tapers ordered by `sum_j m_j^2 / L_j^2`, ties broken lexicographically.
pub fn make_sine_tapers(window: &Window, m: usize) -> TaperFamily {
    assert!(m >= 1, "need at least one taper");
    let d = window.dim();
    let sides = window.sides();
    let mut tuples: Vec<Vec<usize>> = Vec::new();
    let mut t = vec![1usize; d];
    // all tuples in 1..=m per axis; the m most concentrated never need a larger index
    loop {
        tuples.push(t.clone());
        let mut j = d;
        loop {
            if j == 0 {
                break;
            }
            j -= 1;
            if t[j] < m {
                t[j] += 1;
                break;
            }
            t[j] = 1;
            if j == 0 {
                j = usize::MAX;
                break;
            }
        }
        if j == usize::MAX {
            break;
        }
    }
    let key = |t: &Vec<usize>| -> f64 {
        t.iter().zip(&sides).map(|(&mj, &l)| (mj * mj) as f64 / (l * l)).sum()
    };
    tuples.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        if (ka - kb).abs() <= 1e-12 * ka.max(kb) {
            a.cmp(b)
        } else if ka < kb {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    });
    tuples.truncate(m);
    TaperFamily { window: window.clone(), indices: tuples }
}

/// `int_0^L sqrt(2/L) sin(pi m x / L) e^{-2 pi i k x} dx`.
///
/// With `b = pi m`, `u = 2 pi k L` this is
/// `sqrt(2L) b (1 - (-1)^m e^{-iu}) / (b^2 - u^2)`. It is evaluated in the
/// equivalent form built on the offset `eps` of `u` from the nearer of
/// `+-b`, which keeps full relative accuracy next to the removable
/// singularities; `g(eps) = (1 - e^{-i eps}) / eps` switches to its Taylor
/// series when `|2Lk -+ m| < 1e-6`.
pub fn sine_taper_ft_1d(m: usize, length: f64, k: f64) -> Complex64 {
    let mf = m as f64;
    let b = PI * mf;
    let scale = (2.0 * length).sqrt() * b;
    if k == 0.0 {
        let v = if m % 2 == 1 { 2.0 * scale / (b * b) } else { 0.0 };
        return Complex64::new(v, 0.0);
    }
    if k > 0.0 {
        let delta = 2.0 * length * k - mf;
        let eps = PI * delta;
        -scale * g(eps, delta) / (2.0 * b + eps)
    } else {
        let delta = 2.0 * length * k + mf;
        let eps = PI * delta;
        scale * g(eps, delta) / (2.0 * b - eps)
    }
}

/// `(1 - e^{-i eps}) / eps`.
fn g(eps: f64, delta: f64) -> Complex64 {
    if delta.abs() < 1e-6 {
        let e2 = eps * eps;
        Complex64::new(eps * (0.5 - e2 / 24.0), 1.0 - e2 / 6.0 + e2 * e2 / 120.0)
    } else {
        let h = (0.5 * eps).sin();
        Complex64::new(2.0 * h * h / eps, eps.sin() / eps)
    }
}

impl TaperFamily {
    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    /// One axis factor of taper `m` at global coordinate `x`.
    #[inline]
    pub fn axis_value(&self, m: usize, j: usize, x: f64) -> f64 {
        let l = self.window.side(j);
        let mj = self.indices[m][j] as f64;
        (2.0 / l).sqrt() * (PI * mj * (x - self.window.lower()[j]) / l).sin()
    }

    /// `h_m(x)` at a global location.
    pub fn value(&self, m: usize, x: &[f64]) -> f64 {
        (0..x.len()).map(|j| self.axis_value(m, j, x[j])).product()
    }

    /// One axis factor of `H_m` in global coordinates.
    #[inline]
    pub fn axis_ft(&self, m: usize, j: usize, k: f64) -> Complex64 {
        let lo = self.window.lower()[j];
        let local = sine_taper_ft_1d(self.indices[m][j], self.window.side(j), k);
        if lo == 0.0 {
            local
        } else {
            let (s, c) = (-2.0 * PI * lo * k).sin_cos();
            local * Complex64::new(c, s)
        }
    }

    /// `H_m(k)`.
    pub fn ft(&self, m: usize, k: &[f64]) -> Complex64 {
        let mut v = Complex64::new(1.0, 0.0);
        for (j, &kj) in k.iter().enumerate() {
            v *= self.axis_ft(m, j, kj);
        }
        v
    }
}

/// Free-function form of [`TaperFamily::ft`].
pub fn taper_ft(family: &TaperFamily, m: usize, k: &[f64]) -> Complex64 {
    family.ft(m, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;

    #[test]
    fn index_order_unit_square() {
        let f = make_sine_tapers(&Window::square(1.0, 2).unwrap(), 3);
        assert_eq!(f.indices(), &[vec![1, 1], vec![1, 2], vec![2, 1]]);
    }

    #[test]
    fn index_order_follows_side_lengths() {
        let w = Window::new(vec![0.0, 0.0], vec![4.0, 1.0]).unwrap();
        let f = make_sine_tapers(&w, 4);
        assert_eq!(f.indices(), &[vec![1, 1], vec![2, 1], vec![3, 1], vec![4, 1]]);
    }

    #[test]
    fn ft_at_zero() {
        let v = sine_taper_ft_1d(1, 1.0, 0.0);
        assert!((v.re - 2.0 * 2f64.sqrt() / PI).abs() < 1e-15);
        assert!(v.im.abs() < 1e-15);
        assert!(sine_taper_ft_1d(2, 1.0, 0.0).norm() < 1e-15);
    }

    fn quad_ft(m: usize, l: f64, k: f64) -> Complex64 {
        let h = |x: f64| (2.0 / l).sqrt() * (PI * m as f64 * x / l).sin();
        let re = integrate(|x| h(x) * (2.0 * PI * k * x).cos(), 0.0, l, 1e-13, 0.0).unwrap();
        let im = integrate(|x| -h(x) * (2.0 * PI * k * x).sin(), 0.0, l, 1e-13, 0.0).unwrap();
        Complex64::new(re, im)
    }

    #[test]
    fn ft_matches_quadrature() {
        for &(m, l, k) in &[
            (1, 1.0, 0.3),
            (2, 3.0, -0.7),
            (5, 2.0, 1.25),
            (3, 1.0, 1.5),
            (3, 1.0, 1.5 + 3e-7),
            (4, 10.0, -0.2 - 1e-8),
            (7, 0.5, 4.0),
        ] {
            let a = sine_taper_ft_1d(m, l, k);
            let b = quad_ft(m, l, k);
            assert!((a - b).norm() < 1e-10, "m={m} l={l} k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn both_sides_of_branch_switch() {
        for &m in &[1usize, 2, 5] {
            let k0 = m as f64 / 2.0;
            for k in [k0 + 4.9e-7, k0 + 5.1e-7, -k0 - 4.9e-7, -k0 - 5.1e-7, k0] {
                let a = sine_taper_ft_1d(m, 1.0, k);
                assert!((a - quad_ft(m, 1.0, k)).norm() < 1e-10, "m={m} k={k}");
            }
        }
    }

    #[test]
    fn conjugate_symmetry_exact() {
        let w = Window::new(vec![-3.0, 2.0], vec![5.0, 4.5]).unwrap();
        let f = make_sine_tapers(&w, 6);
        for m in 0..6 {
            for &k in &[[0.1, -0.35], [0.0625, 0.4], [1.0 / 16.0, 0.0]] {
                let neg = [-k[0], -k[1]];
                assert_eq!(f.ft(m, &neg), f.ft(m, &k).conj());
            }
        }
    }

    #[test]
    fn orthonormal_by_quadrature() {
        let w = Window::new(vec![1.0], vec![3.5]).unwrap();
        let f = make_sine_tapers(&w, 5);
        for a in 0..5 {
            for b in 0..5 {
                let g = integrate(|x| f.value(a, &[x]) * f.value(b, &[x]), 1.0, 3.5, 1e-13, 0.0).unwrap();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-10);
            }
        }
    }
}

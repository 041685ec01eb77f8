//! Closed-form spectra of the Gaussian cluster model and the squared
//! shot-noise Cox process, and quadrature evaluation of summary statistics
//! from isotropic spectra.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::invert::{ball_kernel, ball_kernel_derivative, signed_l, unit_ball_volume, unit_sphere_area, StatKind};
use crate::quad::integrate;

/// Neyman–Scott model: Poisson parents `Z` with independent Gaussian
/// clusters `X` and `Y` around them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterModelSpec {
    pub lambda_z: f64,
    pub mu_x: f64,
    pub mu_y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub dim: usize,
}

/// Characteristic function of `N(0, sigma^2 I)` at wavenumber norm `k`.
pub fn gaussian_char(sigma: f64, k: f64) -> f64 {
    (-2.0 * PI * PI * sigma * sigma * k * k).exp()
}

fn norm(k: &[f64]) -> f64 {
    k.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl ClusterModelSpec {
    pub fn new(lambda_z: f64, mu_x: f64, sigma_x: f64, mu_y: f64, sigma_y: f64, dim: usize) -> Result<Self> {
        if !(lambda_z > 0.0) || !(mu_x >= 0.0) || !(mu_y >= 0.0) || !(sigma_x > 0.0) || !(sigma_y > 0.0) {
            return Err(Error::Domain("cluster model needs lambda_z > 0, mu >= 0 and sigma > 0".into()));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::Config(format!("dimension {dim} unsupported")));
        }
        Ok(ClusterModelSpec { lambda_z, mu_x, mu_y, sigma_x, sigma_y, dim })
    }

    pub fn lambda_x(&self) -> f64 {
        self.mu_x * self.lambda_z
    }

    pub fn lambda_y(&self) -> f64 {
        self.mu_y * self.lambda_z
    }
}

/// Partial spectra of the cluster model with the closed forms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterPartials {
    /// `f_{XY.Z}`
    pub xy_z: Complex64,
    /// `f_{XZ.Y}`
    pub xz_y: Complex64,
    /// `f_{XX.YZ}`
    pub xx_yz: f64,
    /// `f_{ZZ.XY}`
    pub zz_xy: f64,
}

/// Row-major 3x3 spectral matrix in the order `X, Y, Z`.
pub fn cluster_spectra(spec: &ClusterModelSpec, k: &[f64]) -> [Complex64; 9] {
    let kn = norm(k);
    let fzz = spec.lambda_z;
    let px = gaussian_char(spec.sigma_x, kn);
    let py = gaussian_char(spec.sigma_y, kn);
    let (mx, my) = (spec.mu_x, spec.mu_y);
    let c = |v: f64| Complex64::new(v, 0.0);
    // the Gaussian characteristic functions are real, so conjugation is trivial
    let fxz = c(mx * px * fzz);
    let fyz = c(my * py * fzz);
    let fxy = c(mx * my * px * py * fzz);
    let fxx = c(mx * spec.lambda_z + mx * mx * px * px * fzz);
    let fyy = c(my * spec.lambda_z + my * my * py * py * fzz);
    [fxx, fxy, fxz, fxy.conj(), fyy, fyz, fxz.conj(), fyz.conj(), c(fzz)]
}

pub fn cluster_partial_spectra(spec: &ClusterModelSpec, k: &[f64]) -> ClusterPartials {
    let kn = norm(k);
    let fzz = spec.lambda_z;
    let lz = spec.lambda_z;
    let px = gaussian_char(spec.sigma_x, kn);
    let py = gaussian_char(spec.sigma_y, kn);
    let xz_y = spec.mu_x * lz * px * fzz / (lz + spec.mu_y * py * py * fzz);
    let zz_xy = lz * fzz / (spec.mu_y * py * py * fzz + spec.mu_x * px * px * fzz + lz);
    ClusterPartials {
        xy_z: Complex64::new(0.0, 0.0),
        xz_y: Complex64::new(xz_y, 0.0),
        xx_yz: spec.lambda_x(),
        zz_xy,
    }
}

/// `|G|^2 * |G|^2` for the Gaussian kernel `g(x) = exp(-|x|^2 / (2 a^2))`
/// in `d = k.len()` dimensions.
pub fn gaussian_power_autoconvolution(a: f64, k: &[f64]) -> f64 {
    let d = k.len() as i32;
    let a2 = a * a;
    let kn2: f64 = k.iter().map(|v| v * v).sum();
    (2.0 * PI * a2).powi(2 * d) * (8.0 * PI * a2).powf(-0.5 * d as f64) * (-2.0 * PI * PI * a2 * kn2).exp()
}

/// Partial cross spectrum `f_{XY.Z}` of the squared shot-noise Cox process.
pub fn cox_squared_partial_spectrum(lambda_z: f64, a: f64, k: &[f64]) -> f64 {
    2.0 * lambda_z * lambda_z * gaussian_power_autoconvolution(a, k)
}

/// Intensity of `X` (and `Y`) in the squared shot-noise Cox process.
pub fn cox_squared_intensity(lambda_z: f64, a: f64, d: usize) -> f64 {
    // E[S^2] = Var S + (E S)^2 with S the shot noise
    let int_g = (2.0 * PI * a * a).powf(0.5 * d as f64);
    let int_g2 = (PI * a * a).powf(0.5 * d as f64);
    lambda_z * int_g2 + (lambda_z * int_g).powi(2)
}

/// Thomas-process K in closed form: `pi r^2 + (1 - exp(-r^2/(4 sigma^2))) / lambda_parent` (2-D).
pub fn thomas_k(lambda_parent: f64, sigma: f64, r: f64) -> f64 {
    PI * r * r + (1.0 - (-r * r / (4.0 * sigma * sigma)).exp()) / lambda_parent
}

/// Largest wavenumber norm scanned for spectral decay.
const SCAN_LIMIT: f64 = 256.0;

fn decay_cutoff<F: Fn(f64) -> f64>(g: &F) -> Result<Option<f64>> {
    let h = 1.0 / 512.0;
    let n = (SCAN_LIMIT / h) as usize;
    let mut peak = 0.0f64;
    let mut last = None;
    let vals: Vec<f64> = (0..=n).map(|j| g(j as f64 * h).abs()).collect();
    for &v in &vals {
        peak = peak.max(v);
    }
    if !peak.is_finite() {
        return Err(Error::Oracle("spectrum is not finite".into()));
    }
    if peak == 0.0 {
        return Ok(None);
    }
    for (j, &v) in vals.iter().enumerate() {
        if v > 1e-17 * peak {
            last = Some(j);
        }
    }
    let last = last.unwrap_or(0);
    if last == n {
        return Err(Error::Oracle(format!("spectrum has not decayed by |k| = {SCAN_LIMIT}")));
    }
    Ok(Some((last + 1) as f64 * h))
}

/// Summary statistic at `r` from an isotropic spectrum given as a function
/// of `|k|`, by adaptive radial quadrature of the inversion integral.
pub fn oracle_summary<F: Fn(f64) -> f64>(
    spectrum: F,
    kind: StatKind,
    r: f64,
    d: usize,
    lambda_x: f64,
    lambda_y: f64,
    atom: f64,
) -> Result<f64> {
    if !(1..=3).contains(&d) {
        return Err(Error::Config(format!("dimension {d} unsupported")));
    }
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("radius must be nonnegative, got {r}")));
    }
    if kind != StatKind::C && (!(lambda_x > 0.0) || !(lambda_y > 0.0)) {
        return Err(Error::Domain("intensities must be positive".into()));
    }
    if kind == StatKind::Pcf && r == 0.0 {
        return Err(Error::Domain("pair correlation needs r > 0".into()));
    }
    let area = unit_sphere_area(d);
    let excess = |kappa: f64| spectrum(kappa) - atom;
    let derivative = kind == StatKind::Pcf;
    let value = match decay_cutoff(&excess)? {
        None => 0.0,
        Some(cutoff) => {
            let integrand = |kappa: f64| {
                let w = if derivative { ball_kernel_derivative(d, kappa, r) } else { ball_kernel(d, kappa, r) };
                excess(kappa) * w * area * kappa.powi(d as i32 - 1)
            };
            // panels a quarter oscillation wide keep the adaptive rule on smooth pieces
            let width = if r > 0.0 { (0.25 / r).min(cutoff) } else { cutoff };
            let panels = ((cutoff / width).ceil() as usize).max(1);
            let scale = if derivative {
                lambda_x * lambda_y * area * r.powi(d as i32 - 1)
            } else if kind == StatKind::C {
                1e-300_f64.max(unit_ball_volume(d) * r.powi(d as i32) * atom.abs().max(1.0))
            } else {
                lambda_x * lambda_y * unit_ball_volume(d) * r.powi(d as i32)
            };
            let abs_tol = 1e-12 * scale / panels as f64;
            let mut total = 0.0;
            for p in 0..panels {
                let a = p as f64 * cutoff / panels as f64;
                let b = (p + 1) as f64 * cutoff / panels as f64;
                total += integrate(integrand, a, b, abs_tol, 1e-12)?;
            }
            total
        }
    };
    Ok(match kind {
        StatKind::C => value,
        StatKind::K => value / (lambda_x * lambda_y) + unit_ball_volume(d) * r.powi(d as i32),
        StatKind::L => signed_l(&[value / (lambda_x * lambda_y) + unit_ball_volume(d) * r.powi(d as i32)], d)[0],
        StatKind::Pcf => value / (area * r.powi(d as i32 - 1) * lambda_x * lambda_y) + 1.0,
    })
}

/// Oracle `K` (or other statistic) of the marginal cluster process `X`.
pub fn cluster_marginal_summary(spec: &ClusterModelSpec, kind: StatKind, r: f64) -> Result<f64> {
    let lx = spec.lambda_x();
    oracle_summary(
        |kappa| cluster_spectra(spec, &[kappa])[0].re,
        kind,
        r,
        spec.dim,
        lx,
        lx,
        lx,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_spectrum_gives_ball_volume() {
        for r in [0.0, 1.0, 7.5] {
            let k = oracle_summary(|_| 0.02, StatKind::K, r, 2, 0.02, 0.02, 0.02).unwrap();
            assert!((k - PI * r * r).abs() < 1e-12);
        }
    }

    #[test]
    fn thomas_matches_closed_form() {
        let spec = ClusterModelSpec::new(0.01, 3.0, 1.5, 3.0, 1.5, 2).unwrap();
        for r in [0.5, 1.0, 5.0, 10.0, 15.0, 20.0] {
            let q = cluster_marginal_summary(&spec, StatKind::K, r).unwrap();
            let exact = thomas_k(0.01, 1.5, r);
            assert!(((q - exact) / exact).abs() < 1e-9, "r={r}: {q} vs {exact}");
        }
    }

    #[test]
    fn thomas_golden_values() {
        // frozen from the quadrature oracle
        let spec = ClusterModelSpec::new(0.01, 3.0, 1.5, 3.0, 1.5, 2).unwrap();
        let golden = [(5.0, 172.322_163_937_533_2), (10.0, 414.157_770_825_126_8), (15.0, 806.858_347_056_314_6)];
        for (r, g) in golden {
            let q = cluster_marginal_summary(&spec, StatKind::K, r).unwrap();
            assert!(((q - g) / g).abs() < 1e-8, "r={r}: {q}");
        }
    }

    #[test]
    fn pcf_matches_closed_form() {
        let spec = ClusterModelSpec::new(0.01, 3.0, 1.5, 3.0, 1.5, 2).unwrap();
        for r in [0.5, 2.0, 6.0] {
            let g = cluster_marginal_summary(&spec, StatKind::Pcf, r).unwrap();
            let s2 = 1.5 * 1.5;
            let exact = 1.0 + (-r * r / (4.0 * s2)).exp() / (4.0 * PI * s2 * 0.01);
            assert!((g - exact).abs() < 1e-8 * exact, "r={r}: {g} vs {exact}");
        }
    }

    #[test]
    fn zero_partial_gives_poisson_k() {
        let spec = ClusterModelSpec::new(0.01, 3.0, 2.0, 2.0, 1.0, 2).unwrap();
        for r in [1.0, 4.0, 12.0] {
            let k = oracle_summary(
                |kappa| cluster_partial_spectra(&spec, &[kappa]).xy_z.re,
                StatKind::K,
                r,
                2,
                spec.lambda_x(),
                spec.lambda_y(),
                0.0,
            )
            .unwrap();
            assert!((k - PI * r * r).abs() < 1e-12);
        }
    }

    #[test]
    fn cluster_limits() {
        let spec = ClusterModelSpec::new(0.01, 3.0, 2.0, 2.0, 1.0, 2).unwrap();
        let f0 = cluster_spectra(&spec, &[0.0, 0.0]);
        assert!((f0[0].re - (3.0 * 0.01 + 9.0 * 0.01)).abs() < 1e-15);
        let far = cluster_spectra(&spec, &[50.0, 0.0]);
        assert!((far[0].re - spec.lambda_x()).abs() < 1e-15);
    }

    #[test]
    fn autoconvolution_matches_numeric() {
        // direct Riemann convolution of |G|^2 with itself; the Gaussian makes it spectrally accurate
        for a in [0.7, 1.0, 1.6] {
            let g2 = |q: f64| (2.0 * PI * a * a) * (-4.0 * PI * PI * a * a * q * q).exp();
            let h = 0.004 / a;
            let n = (1.5 / a / h) as i64;
            for k in [0.0, 0.05, 0.1, 0.3] {
                // 1-D
                let mut s1 = 0.0;
                for i in -n..=n {
                    let q = i as f64 * h;
                    s1 += g2(q) * g2(k - q);
                }
                s1 *= h;
                let exact1 = gaussian_power_autoconvolution(a, &[k]);
                assert!(((s1 - exact1) / exact1).abs() < 1e-8, "1-D a={a} k={k}");
                // 2-D, k along the first axis
                let mut s2 = 0.0;
                for i in -n..=n {
                    for j in -n..=n {
                        let (qx, qy) = (i as f64 * h, j as f64 * h);
                        s2 += g2(qx) * g2(qy) * g2(k - qx) * g2(-qy);
                    }
                }
                s2 *= h * h;
                let exact2 = gaussian_power_autoconvolution(a, &[k, 0.0]);
                assert!(((s2 - exact2) / exact2).abs() < 1e-8, "2-D a={a} k={k}");
            }
        }
    }

    #[test]
    fn cox_partial_positive_and_decaying() {
        assert!(cox_squared_partial_spectrum(0.01, 1.0, &[0.0, 0.0]) > 0.0);
        assert!(cox_squared_partial_spectrum(0.01, 1.0, &[5.0, 0.0]) < 1e-100);
    }
}

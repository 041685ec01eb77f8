//! Inversion of spectral fields to C, K, signed L and pair-correlation curves.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::patterns::IntensityEstimates;
use crate::special::{j0, j1, si, sinc_minus_cos};
use crate::spectra::SpectralMatrixField;

/// Strictly increasing, nonnegative radii.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiiGrid {
    radii: Vec<f64>,
}

impl RadiiGrid {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::Config("radii grid is empty".into()));
        }
        if !(radii[0] >= 0.0) || radii.iter().any(|r| !r.is_finite()) {
            return Err(Error::Config("radii must be finite and nonnegative".into()));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("radii must be strictly increasing".into()));
        }
        Ok(RadiiGrid { radii })
    }

    /// `count` equally spaced radii from `start` to `stop` inclusive.
    pub fn linspace(start: f64, stop: f64, count: usize) -> Result<Self> {
        match count {
            0 => Err(Error::Config("radii count must be positive".into())),
            1 => RadiiGrid::new(vec![start]),
            _ => {
                let step = (stop - start) / (count - 1) as f64;
                RadiiGrid::new((0..count).map(|i| start + step * i as f64).collect())
            }
        }
    }

    /// Parses `start:stop:count`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("radii spec '{spec}' is not start:stop:count")));
        }
        let bad = || Error::Config(format!("radii spec '{spec}' is not start:stop:count"));
        let start: f64 = parts[0].parse().map_err(|_| bad())?;
        let stop: f64 = parts[1].parse().map_err(|_| bad())?;
        let count: usize = parts[2].parse().map_err(|_| bad())?;
        RadiiGrid::linspace(start, stop, count)
    }

    pub fn values(&self) -> &[f64] {
        &self.radii
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }
}

/// Statistic computed from a spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StatKind {
    C,
    K,
    L,
    Pcf,
}

impl std::str::FromStr for StatKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "C" | "c" => Ok(StatKind::C),
            "K" | "k" => Ok(StatKind::K),
            "L" | "l" => Ok(StatKind::L),
            "pcf" | "g" => Ok(StatKind::Pcf),
            _ => Err(Error::Config(format!("statistic must be one of C, K, L, pcf; got '{s}'"))),
        }
    }
}

impl std::fmt::Display for StatKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StatKind::C => "C",
            StatKind::K => "K",
            StatKind::L => "L",
            StatKind::Pcf => "pcf",
        })
    }
}

/// Inversion estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Riemann sum over the Cartesian grid.
    Direct,
    /// Annulus averages with analytic annulus weights.
    Rotational,
}

impl std::str::FromStr for Route {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Route::Direct),
            "rotational" => Ok(Route::Rotational),
            _ => Err(Error::Config(format!("route must be 'direct' or 'rotational', got '{s}'"))),
        }
    }
}

impl std::fmt::Display for Route {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Route::Direct => "direct",
            Route::Rotational => "rotational",
        })
    }
}

/// Volume of the unit ball: 2, pi, 4 pi / 3.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => panic!("dimension {d} unsupported"),
    }
}

/// Surface area of the unit sphere in `R^d`: 2, 2 pi, 4 pi.
pub fn unit_sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("dimension {d} unsupported"),
    }
}

fn check_dim(d: usize) -> Result<()> {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        Err(Error::Config(format!("dimension {d} unsupported (1, 2 or 3)")))
    }
}

/// The spectral atom at zero lag: `lambda_X` when `X = Y`, else 0.
pub fn atom_correction(x: &str, y: &str, intensities: &IntensityEstimates) -> f64 {
    if x == y {
        intensities.get(x).unwrap_or(0.0)
    } else {
        0.0
    }
}

/// Fourier transform of the indicator of the radius-`r` ball at `|k|`.
pub fn ball_kernel(d: usize, k: f64, r: f64) -> f64 {
    if k == 0.0 {
        return unit_ball_volume(d) * r.powi(d as i32);
    }
    let x = 2.0 * PI * k * r;
    match d {
        1 => x.sin() / (PI * k),
        2 => r / k * j1(x),
        _ => r / (PI * k * k) * sinc_minus_cos(x),
    }
}

/// Radial derivative of [`ball_kernel`].
pub fn ball_kernel_derivative(d: usize, k: f64, r: f64) -> f64 {
    if k == 0.0 {
        return unit_sphere_area(d) * r.powi(d as i32 - 1);
    }
    let x = 2.0 * PI * k * r;
    match d {
        1 => 2.0 * x.cos(),
        2 => 2.0 * PI * r * j0(x),
        _ => 2.0 * r * x.sin() / k,
    }
}

/// Integral of [`ball_kernel`] over the ball `|k| <= y`.
pub fn annulus_weight(d: usize, r: f64, y: f64) -> f64 {
    let z = 2.0 * PI * r * y;
    match d {
        1 => 2.0 * si(z) / PI,
        2 => 1.0 - j0(z),
        _ => 2.0 / PI * (si(z) - z.sin()),
    }
}

/// Radial derivative of [`annulus_weight`].
pub fn annulus_weight_derivative(d: usize, r: f64, y: f64) -> f64 {
    let z = 2.0 * PI * r * y;
    match d {
        1 => {
            if r == 0.0 {
                4.0 * y
            } else {
                2.0 * z.sin() / (PI * r)
            }
        }
        2 => 2.0 * PI * y * j1(z),
        _ => 4.0 * y * sinc_minus_cos(z),
    }
}

/// Field entry `(i, j)` minus the atom, folded over `k`/`-k` and merged by
/// exact wavenumber norm: `(norm, real sum, imaginary sum)`.
fn radial_terms(field: &SpectralMatrixField, i: usize, j: usize, atom: f64) -> Vec<(f64, f64, f64)> {
    let grid = field.grid();
    let center = grid.center();
    let len = grid.len();
    let mut terms: Vec<(f64, f64, f64)> = (center..len)
        .map(|node| {
            let mut v = field.get(node, i, j) - atom;
            if node != center {
                v += field.get(len - 1 - node, i, j) - atom;
            }
            (grid.norm(node), v.re, v.im)
        })
        .collect();
    terms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64, f64)> = Vec::with_capacity(terms.len() / 4 + 1);
    for t in terms {
        match merged.last_mut() {
            Some(last) if last.0 == t.0 => {
                last.1 += t.1;
                last.2 += t.2;
            }
            _ => merged.push(t),
        }
    }
    merged
}

/// Output of a Cartesian Riemann-sum inversion.
#[derive(Clone, Debug)]
pub struct DirectSum {
    pub values: Vec<f64>,
    /// Largest absolute imaginary part over radii.
    pub imag_residual: f64,
}

fn riemann_sum<K>(field: &SpectralMatrixField, i: usize, j: usize, atom: f64, radii: &RadiiGrid, kernel: K) -> Result<DirectSum>
where
    K: Fn(f64, f64) -> f64 + Sync,
{
    let terms = radial_terms(field, i, j, atom);
    let dv = field.grid().cell_volume();
    let sums: Vec<(f64, f64)> = radii
        .values()
        .par_iter()
        .map(|&r| {
            let mut re = 0.0;
            let mut im = 0.0;
            for &(k, a, b) in &terms {
                let w = kernel(k, r);
                re += a * w;
                im += b * w;
            }
            (re * dv, im * dv)
        })
        .collect();
    let max_c = sums.iter().map(|s| s.0.abs()).fold(0.0, f64::max);
    let imag_residual = sums.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
    let tolerance = 1e-6 * max_c;
    if imag_residual > tolerance {
        return Err(Error::Symmetry { residual: imag_residual, tolerance });
    }
    Ok(DirectSum { values: sums.into_iter().map(|s| s.0).collect(), imag_residual })
}

/// `C(r)` by a Riemann sum of `(f_XY(k) - atom)` times the ball kernel over the grid.
pub fn c_direct(field: &SpectralMatrixField, pair: (&str, &str), atom: f64, radii: &RadiiGrid) -> Result<DirectSum> {
    let d = field.grid().dim();
    check_dim(d)?;
    let i = field.label_index(pair.0)?;
    let j = field.label_index(pair.1)?;
    riemann_sum(field, i, j, atom, radii, |k, r| ball_kernel(d, k, r))
}

/// `C'(r)` by the same Riemann sum with the derivative kernel.
pub fn c_derivative_direct(
    field: &SpectralMatrixField,
    pair: (&str, &str),
    atom: f64,
    radii: &RadiiGrid,
) -> Result<DirectSum> {
    let d = field.grid().dim();
    check_dim(d)?;
    let i = field.label_index(pair.0)?;
    let j = field.label_index(pair.1)?;
    riemann_sum(field, i, j, atom, radii, |k, r| ball_kernel_derivative(d, k, r))
}

/// Settings of the rotational average; `None` picks the defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RadialConfig {
    /// Radial node spacing (default: smallest Cartesian spacing).
    pub spacing: Option<f64>,
    /// Largest radial node (default: smallest kmax).
    pub max: Option<f64>,
    /// Box kernel width (default: twice the largest Cartesian spacing).
    pub bandwidth: Option<f64>,
}

/// Annulus-averaged spectrum on radial nodes `s/2 + s j`.
#[derive(Clone, Debug)]
pub struct RadialSpectrum {
    pub nodes: Vec<f64>,
    pub values: Vec<Complex64>,
    pub spacing: f64,
    pub bandwidth: f64,
    pub kernel: &'static str,
    pub dim: usize,
    /// Radial nodes dropped because no grid node fell in their window.
    pub excluded: Vec<f64>,
}

pub fn rotational_average(field: &SpectralMatrixField, pair: (&str, &str), cfg: &RadialConfig) -> Result<RadialSpectrum> {
    let grid = field.grid();
    let d = grid.dim();
    check_dim(d)?;
    let i = field.label_index(pair.0)?;
    let j = field.label_index(pair.1)?;
    let s = cfg.spacing.unwrap_or_else(|| grid.spacing().iter().copied().fold(f64::INFINITY, f64::min));
    let kmax = cfg.max.unwrap_or_else(|| grid.kmax().iter().copied().fold(f64::INFINITY, f64::min));
    let b = cfg.bandwidth.unwrap_or_else(|| 2.0 * grid.spacing().iter().copied().fold(0.0, f64::max));
    if !(s > 0.0) || !(b > 0.0) || !(kmax > 0.0) {
        return Err(Error::Config("radial spacing, maximum and bandwidth must be positive".into()));
    }
    // all nodes sorted by norm, with entry values
    let mut pts: Vec<(f64, Complex64)> = (0..grid.len()).map(|n| (grid.norm(n), field.get(n, i, j))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let norms: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    let mut excluded = Vec::new();
    let count = ((kmax - 0.5 * s) / s + 1e-9).floor();
    let count = if count < 0.0 { 0 } else { count as usize + 1 };
    for n in 0..count {
        let kappa = 0.5 * s + s * n as f64;
        let lo = norms.partition_point(|&v| v < kappa - 0.5 * b);
        let hi = norms.partition_point(|&v| v <= kappa + 0.5 * b);
        if hi > lo {
            nodes.push(kappa);
            let sum: Complex64 = pts[lo..hi].iter().map(|p| p.1).sum();
            values.push(sum / (hi - lo) as f64);
        } else {
            excluded.push(kappa);
        }
    }
    Ok(RadialSpectrum { nodes, values, spacing: s, bandwidth: b, kernel: "box", dim: d, excluded })
}

fn rotational_sum<W: Fn(f64, f64) -> f64 + Sync>(rot: &RadialSpectrum, atom: f64, radii: &RadiiGrid, w: W) -> Vec<f64> {
    let h = 0.5 * rot.spacing;
    radii
        .values()
        .par_iter()
        .map(|&r| {
            rot.nodes
                .iter()
                .zip(&rot.values)
                .map(|(&kappa, v)| (v.re - atom) * (w(r, kappa + h) - w(r, (kappa - h).max(0.0))))
                .sum()
        })
        .collect()
}

/// `C(r)` from annulus averages with the analytic annulus weights.
pub fn c_rotational(rot: &RadialSpectrum, atom: f64, radii: &RadiiGrid, d: usize) -> Result<Vec<f64>> {
    check_dim(d)?;
    Ok(rotational_sum(rot, atom, radii, |r, y| annulus_weight(d, r, y)))
}

/// `C'(r)` from annulus averages.
pub fn c_derivative_rotational(rot: &RadialSpectrum, atom: f64, radii: &RadiiGrid, d: usize) -> Result<Vec<f64>> {
    check_dim(d)?;
    Ok(rotational_sum(rot, atom, radii, |r, y| annulus_weight_derivative(d, r, y)))
}

/// `K(r) = C(r) / (lambda_X lambda_Y) + |b_d| r^d`.
pub fn k_from_c(c: &[f64], lambda_x: f64, lambda_y: f64, d: usize, radii: &RadiiGrid) -> Result<Vec<f64>> {
    check_dim(d)?;
    if !(lambda_x > 0.0) || !(lambda_y > 0.0) {
        return Err(Error::Domain(format!("intensities must be positive, got {lambda_x} and {lambda_y}")));
    }
    let vol = unit_ball_volume(d);
    Ok(c.iter()
        .zip(radii.values())
        .map(|(&cv, &r)| cv / (lambda_x * lambda_y) + vol * r.powi(d as i32))
        .collect())
}

/// Signed L: `sgn(K) (|K| / |b_d|)^{1/d}`.
pub fn signed_l(k: &[f64], d: usize) -> Vec<f64> {
    let vol = unit_ball_volume(d);
    k.iter()
        .map(|&v| v.signum() * (v.abs() / vol).powf(1.0 / d as f64))
        .map(|v| if v.is_nan() { 0.0 } else { v })
        .collect()
}

/// Spectrum the pair-correlation function is computed from.
pub enum SpectrumRef<'a> {
    Field(&'a SpectralMatrixField),
    Radial(&'a RadialSpectrum),
}

/// `g(r) = C'(r) / (A_{d-1} r^{d-1} lambda_X lambda_Y) + 1`.
#[allow(clippy::too_many_arguments)]
pub fn pcf_from_spectrum(
    source: SpectrumRef<'_>,
    pair: (&str, &str),
    atom: f64,
    radii: &RadiiGrid,
    d: usize,
    lambda_x: f64,
    lambda_y: f64,
) -> Result<Vec<f64>> {
    check_dim(d)?;
    if radii.values()[0] <= 0.0 {
        return Err(Error::Domain("pair correlation needs radii > 0".into()));
    }
    if !(lambda_x > 0.0) || !(lambda_y > 0.0) {
        return Err(Error::Domain(format!("intensities must be positive, got {lambda_x} and {lambda_y}")));
    }
    let dc = match source {
        SpectrumRef::Field(f) => c_derivative_direct(f, pair, atom, radii)?.values,
        SpectrumRef::Radial(rot) => c_derivative_rotational(rot, atom, radii, d)?,
    };
    let area = unit_sphere_area(d);
    Ok(dc
        .iter()
        .zip(radii.values())
        .map(|(&v, &r)| v / (area * r.powi(d as i32 - 1) * lambda_x * lambda_y) + 1.0)
        .collect())
}

/// Provenance attached to a curve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CurveMeta {
    pub tapers: usize,
    pub kmax: Vec<f64>,
    pub spacing: Vec<f64>,
    pub debias: bool,
    pub debias_factor: f64,
    pub imag_residual: f64,
}

/// A statistic sampled on radii.
#[derive(Clone, Debug)]
pub struct SummaryCurve {
    pub kind: StatKind,
    pub radii: RadiiGrid,
    pub values: Vec<f64>,
    pub targets: (String, String),
    pub covariates: Vec<String>,
    pub dim: usize,
    pub route: Route,
    pub meta: CurveMeta,
    /// Envelope band, when computed.
    pub band: Option<(Vec<f64>, Vec<f64>)>,
}

impl SummaryCurve {
    /// `r,value[,lo,hi]`; NaN values are written as `NA`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let fmt = |v: f64| if v.is_nan() { "NA".to_string() } else { v.to_string() };
        match &self.band {
            Some(_) => s.push_str("r,value,lo,hi\n"),
            None => s.push_str("r,value\n"),
        }
        for (i, r) in self.radii.values().iter().enumerate() {
            let _ = write!(s, "{},{}", r, fmt(self.values[i]));
            if let Some((lo, hi)) = &self.band {
                let _ = write!(s, ",{},{}", fmt(lo[i]), fmt(hi[i]));
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::Window;
    use crate::spectra::{make_grid, DEFAULT_GRID_CAP};

    fn const_field(value: f64, d: usize) -> SpectralMatrixField {
        let w = Window::square(50.0, d).unwrap();
        let g = make_grid(&w, &vec![0.5; d], None, DEFAULT_GRID_CAP).unwrap();
        SpectralMatrixField::from_fn(g, vec!["X".into()], 8, |_| vec![Complex64::new(value, 0.0)])
    }

    #[test]
    fn atom_values() {
        let lam = IntensityEstimates { labels: vec!["X".into(), "Y".into()], values: vec![0.01, 0.02] };
        assert_eq!(atom_correction("X", "X", &lam), 0.01);
        assert_eq!(atom_correction("X", "Y", &lam), 0.0);
    }

    #[test]
    fn pure_atom_gives_ball_volume() {
        let radii = RadiiGrid::linspace(0.0, 10.0, 11).unwrap();
        for d in 1..=2 {
            let f = const_field(0.01, d);
            let c = c_direct(&f, ("X", "X"), 0.01, &radii).unwrap();
            assert!(c.values.iter().all(|&v| v == 0.0));
            let k = k_from_c(&c.values, 0.01, 0.01, d, &radii).unwrap();
            let l = signed_l(&k, d);
            for (l, r) in l.iter().zip(radii.values()) {
                assert!((l - r).abs() < 1e-12);
            }
            let rot = rotational_average(&f, ("X", "X"), &RadialConfig::default()).unwrap();
            assert!(rot.values.iter().all(|v| (v.re - 0.01).abs() < 1e-15));
            let c = c_rotational(&rot, 0.01, &radii, d).unwrap();
            assert!(c.iter().all(|&v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn zero_radius_has_zero_c() {
        let f = const_field(0.5, 2);
        let radii = RadiiGrid::new(vec![0.0, 1.0]).unwrap();
        let c = c_direct(&f, ("X", "X"), 0.01, &radii).unwrap();
        assert_eq!(c.values[0], 0.0);
    }

    #[test]
    fn k_and_l_small_cases() {
        let radii = RadiiGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let k = k_from_c(&[1e-4, 1e-4, 1e-4], 0.01, 0.01, 2, &radii).unwrap();
        for (k, r) in k.iter().zip(radii.values()) {
            assert!((k - (1.0 + PI * r * r)).abs() < 1e-12);
        }
        assert!(k_from_c(&[0.0], 0.0, 1.0, 2, &RadiiGrid::new(vec![1.0]).unwrap()).is_err());
        let l = signed_l(&[PI, -PI], 2);
        assert!((l[0] - 1.0).abs() < 1e-15 && (l[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn one_dimensional_single_annulus() {
        let rot = RadialSpectrum {
            nodes: vec![0.25],
            values: vec![Complex64::new(2.0, 0.0)],
            spacing: 0.1,
            bandwidth: 0.2,
            kernel: "box",
            dim: 1,
            excluded: vec![],
        };
        let radii = RadiiGrid::new(vec![0.5, 3.0]).unwrap();
        let c = c_rotational(&rot, 0.0, &radii, 1).unwrap();
        for (c, &r) in c.iter().zip(radii.values()) {
            let want = 2.0 * 2.0 / PI * (si(2.0 * PI * r * 0.3) - si(2.0 * PI * r * 0.2));
            assert!((c - want).abs() < 1e-15);
        }
    }

    #[test]
    fn pcf_of_atom_is_one_and_rejects_zero_radius() {
        let f = const_field(0.01, 2);
        let radii = RadiiGrid::linspace(1.0, 5.0, 5).unwrap();
        let g = pcf_from_spectrum(SpectrumRef::Field(&f), ("X", "X"), 0.01, &radii, 2, 0.01, 0.01).unwrap();
        assert!(g.iter().all(|&v| v == 1.0));
        let radii0 = RadiiGrid::linspace(0.0, 5.0, 5).unwrap();
        assert!(matches!(
            pcf_from_spectrum(SpectrumRef::Field(&f), ("X", "X"), 0.01, &radii0, 2, 0.01, 0.01),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn radii_parse() {
        let r = RadiiGrid::parse("1:20:20").unwrap();
        assert_eq!(r.len(), 20);
        assert_eq!(r.values()[19], 20.0);
        assert!(RadiiGrid::parse("1:2").is_err());
        assert!(RadiiGrid::new(vec![1.0, 1.0]).is_err());
    }
}

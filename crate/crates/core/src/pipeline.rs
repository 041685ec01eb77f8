//! End-to-end estimation: pattern to spectral matrix to (partial) summary curve.

use std::borrow::Cow;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::invert::{
    atom_correction, c_direct, c_rotational, k_from_c, pcf_from_spectrum, rotational_average, signed_l, CurveMeta,
    RadialConfig, RadiiGrid, Route, SpectrumRef, StatKind, SummaryCurve,
};
use crate::oracle::{
    cluster_partial_spectra, cluster_spectra, cox_squared_intensity, cox_squared_partial_spectrum, oracle_summary,
    ClusterModelSpec,
};
use crate::partial::{debias_factor, partial_matrix_schur, PartialSpec};
use crate::patterns::{estimate_intensities, IntensityEstimates, MultiTypePattern, Window};
use crate::spectra::{make_grid, multitaper_matrix_with, DftMethod, SpectralMatrixField, DEFAULT_GRID_CAP};
use crate::tapers::make_sine_tapers;

/// Hyperparameters of the estimator. `None` fields take data-driven defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimationConfig {
    pub tapers: usize,
    /// Highest wavenumber per axis (one value is broadcast).
    pub kmax: Option<Vec<f64>>,
    /// Wavenumber spacing per axis (default: reciprocal window sides).
    pub spacing: Option<Vec<f64>>,
    pub radial: RadialConfig,
    pub route: Route,
    pub debias: bool,
    pub radii: Option<RadiiGrid>,
    pub dft: DftMethod,
    pub grid_cap: usize,
    pub threads: Option<usize>,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            tapers: 8,
            kmax: None,
            spacing: None,
            radial: RadialConfig::default(),
            route: Route::Rotational,
            debias: true,
            radii: None,
            dft: DftMethod::Nufft,
            grid_cap: DEFAULT_GRID_CAP,
            threads: None,
        }
    }
}

/// Recognised configuration keys.
pub const CONFIG_KEYS: [&str; 12] = [
    "tapers",
    "kmax",
    "spacing",
    "radial_spacing",
    "radial_max",
    "bandwidth",
    "route",
    "debias",
    "radii",
    "dft",
    "grid_cap",
    "threads",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("bad value '{value}' for {key}")))
}

fn parse_vec(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse_num(key, v)).collect()
}

impl EstimationConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "tapers" => self.tapers = parse_num(key, value)?,
            "kmax" => self.kmax = Some(parse_vec(key, value)?),
            "spacing" => self.spacing = Some(parse_vec(key, value)?),
            "radial_spacing" => self.radial.spacing = Some(parse_num(key, value)?),
            "radial_max" => self.radial.max = Some(parse_num(key, value)?),
            "bandwidth" => self.radial.bandwidth = Some(parse_num(key, value)?),
            "route" => self.route = value.parse()?,
            "debias" => {
                self.debias = match value {
                    "true" | "on" | "yes" | "1" => true,
                    "false" | "off" | "no" | "0" => false,
                    _ => return Err(Error::Config(format!("debias must be true or false, got '{value}'"))),
                }
            }
            "radii" => self.radii = Some(RadiiGrid::parse(value)?),
            "dft" => self.dft = value.parse()?,
            "grid_cap" => self.grid_cap = parse_num(key, value)?,
            "threads" => self.threads = Some(parse_num(key, value)?),
            _ => {
                return Err(Error::Config(format!("unknown key '{key}' (known: {})", CONFIG_KEYS.join(", "))));
            }
        }
        Ok(())
    }

    /// Applies a flat `key = value` file on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected key = value, got '{line}'") })?;
            self.set(k.trim(), v).map_err(|e| match e {
                Error::Config(msg) => Error::Parse { line: i + 1, msg },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = EstimationConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// `key = value` lines describing this configuration.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "tapers = {}", self.tapers);
        if let Some(k) = &self.kmax {
            let _ = writeln!(s, "kmax = {}", join(k));
        }
        if let Some(k) = &self.spacing {
            let _ = writeln!(s, "spacing = {}", join(k));
        }
        if let Some(v) = self.radial.spacing {
            let _ = writeln!(s, "radial_spacing = {v}");
        }
        if let Some(v) = self.radial.max {
            let _ = writeln!(s, "radial_max = {v}");
        }
        if let Some(v) = self.radial.bandwidth {
            let _ = writeln!(s, "bandwidth = {v}");
        }
        let _ = writeln!(s, "route = {}", self.route);
        let _ = writeln!(s, "debias = {}", self.debias);
        if let Some(r) = &self.radii {
            let v = r.values();
            if v.len() > 1 {
                let _ = writeln!(s, "radii = {}:{}:{}", v[0], v[v.len() - 1], v.len());
            }
        }
        let _ = writeln!(s, "dft = {}", if self.dft == DftMethod::Direct { "direct" } else { "nufft" });
        let _ = writeln!(s, "grid_cap = {}", self.grid_cap);
        if let Some(t) = self.threads {
            let _ = writeln!(s, "threads = {t}");
        }
        s
    }
}

/// Default highest wavenumber: twice the reciprocal mean nearest spacing
/// `lambda_total^{-1/d}` of the pooled pattern.
pub fn default_kmax(pattern: &MultiTypePattern) -> f64 {
    let d = pattern.dim();
    let lambda = pattern.len() as f64 / pattern.window().volume();
    if lambda > 0.0 {
        2.0 * lambda.powf(1.0 / d as f64)
    } else {
        // empty pattern: any grid works, keep it small
        10.0 / pattern.window().sides().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Default radii: 41 values from 0 to a fifteenth of the shortest side.
pub fn default_radii(pattern: &MultiTypePattern) -> RadiiGrid {
    let lmin = pattern.window().sides().iter().copied().fold(f64::INFINITY, f64::min);
    RadiiGrid::linspace(0.0, lmin / 15.0, 41).expect("valid default radii")
}

/// Which statistic to compute: `X`, `Y` and the covariates partialled out.
#[derive(Clone, Debug, PartialEq)]
pub struct StatRequest {
    pub x: String,
    pub y: String,
    pub covariates: Vec<String>,
    pub kind: StatKind,
}

/// Splits a comma-separated label list; empty text gives no labels.
pub fn parse_labels(text: &str) -> Vec<String> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

impl StatRequest {
    pub fn new(x: &str, y: &str, covariates: &[&str], kind: StatKind) -> Self {
        StatRequest {
            x: x.to_string(),
            y: y.to_string(),
            covariates: covariates.iter().map(|s| s.to_string()).collect(),
            kind,
        }
    }

    /// From `"X"` or `"X,Y"` targets and comma-separated covariates.
    pub fn parse(targets: &str, covariates: &str, kind: StatKind) -> Result<Self> {
        let t = parse_labels(targets);
        let (x, y) = match t.as_slice() {
            [x] => (x.clone(), x.clone()),
            [x, y] => (x.clone(), y.clone()),
            _ => return Err(Error::Config(format!("targets must be one or two labels, got '{targets}'"))),
        };
        Ok(StatRequest { x, y, covariates: parse_labels(covariates), kind })
    }

    /// Distinct target labels.
    pub fn targets(&self) -> Vec<String> {
        if self.x == self.y {
            vec![self.x.clone()]
        } else {
            vec![self.x.clone(), self.y.clone()]
        }
    }

    /// Targets followed by covariates.
    pub fn labels(&self) -> Vec<String> {
        let mut l = self.targets();
        l.extend(self.covariates.iter().cloned());
        l
    }
}

/// What a run did and how long each stage took.
#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub tapers: usize,
    pub labels: Vec<String>,
    pub kmax: Vec<f64>,
    pub spacing: Vec<f64>,
    pub grid_nodes: usize,
    pub route: Option<Route>,
    pub debias: bool,
    pub debias_factor: f64,
    pub imag_residual: f64,
    pub excluded_radial_nodes: usize,
    pub stages: Vec<(&'static str, Duration)>,
}

impl RunReport {
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "tapers = {}", self.tapers);
        let _ = writeln!(s, "processes = {}", self.labels.join(","));
        let _ = writeln!(s, "kmax = {}", join(&self.kmax));
        let _ = writeln!(s, "spacing = {}", join(&self.spacing));
        let _ = writeln!(s, "grid_nodes = {}", self.grid_nodes);
        if let Some(r) = self.route {
            let _ = writeln!(s, "route = {r}");
        }
        let _ = writeln!(s, "debias = {}", self.debias);
        let _ = writeln!(s, "debias_factor = {}", self.debias_factor);
        let _ = writeln!(s, "imag_residual = {:e}", self.imag_residual);
        let _ = writeln!(s, "excluded_radial_nodes = {}", self.excluded_radial_nodes);
        for (name, t) in &self.stages {
            let _ = writeln!(s, "time_{name} = {:.6}", t.as_secs_f64());
        }
        s
    }
}

fn timed<T>(stages: &mut Vec<(&'static str, Duration)>, name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.in_stage(name))?;
    stages.push((name, start.elapsed()));
    Ok(out)
}

/// Multitaper spectral matrix of a pattern, reusable for several statistics.
pub struct Estimator {
    field: SpectralMatrixField,
    intensities: IntensityEstimates,
    config: EstimationConfig,
    dim: usize,
    stages: Vec<(&'static str, Duration)>,
}

impl Estimator {
    /// Estimates the spectral matrix of the listed processes.
    pub fn new(pattern: &MultiTypePattern, labels: &[String], config: &EstimationConfig) -> Result<Self> {
        let mut stages = Vec::new();
        let d = pattern.dim();
        for l in labels {
            pattern.require_type(l).map_err(|e| e.in_stage("patterns"))?;
        }
        let intensities = timed(&mut stages, "intensities", || Ok(estimate_intensities(pattern)))?;
        let grid = timed(&mut stages, "grid", || {
            let kmax = match &config.kmax {
                Some(k) if k.len() == 1 => vec![k[0]; d],
                Some(k) => k.clone(),
                None => vec![default_kmax(pattern); d],
            };
            let spacing = match &config.spacing {
                Some(s) if s.len() == 1 => Some(vec![s[0]; d]),
                other => other.clone(),
            };
            make_grid(pattern.window(), &kmax, spacing.as_deref(), config.grid_cap)
        })?;
        let family = timed(&mut stages, "tapers", || {
            if config.tapers == 0 {
                return Err(Error::Config("at least one taper is required".into()));
            }
            Ok(make_sine_tapers(pattern.window(), config.tapers))
        })?;
        let field = timed(&mut stages, "spectra", || {
            multitaper_matrix_with(pattern, labels, &family, &grid, &intensities, config.dft)
        })?;
        Ok(Estimator { field, intensities, config: config.clone(), dim: d, stages })
    }

    pub fn field(&self) -> &SpectralMatrixField {
        &self.field
    }

    pub fn intensities(&self) -> &IntensityEstimates {
        &self.intensities
    }

    pub fn config(&self) -> &EstimationConfig {
        &self.config
    }

    /// Switches debiasing for later curves; the spectral matrix is unaffected.
    pub fn set_debias(&mut self, on: bool) {
        self.config.debias = on;
    }

    /// Partial spectral matrix of `targets` given `covariates` under the current settings.
    pub fn partial_field(&self, targets: &[&str], covariates: &[&str]) -> Result<SpectralMatrixField> {
        partial_matrix_schur(&self.field, &PartialSpec::new(targets, covariates, self.config.debias))
            .map_err(|e| e.in_stage("partial"))
    }

    /// Computes one (partial) summary curve on the given radii.
    pub fn curve_on(&self, req: &StatRequest, radii: &RadiiGrid) -> Result<(SummaryCurve, RunReport)> {
        let cfg = &self.config;
        let mut stages = self.stages.clone();
        let lx = self.intensities.get(&req.x).unwrap_or(0.0);
        let ly = self.intensities.get(&req.y).unwrap_or(0.0);
        let factor = debias_factor(cfg.tapers, req.covariates.len(), cfg.debias).map_err(|e| e.in_stage("partial"))?;
        let field: Cow<'_, SpectralMatrixField> = if req.covariates.is_empty() {
            Cow::Borrowed(&self.field)
        } else {
            timed(&mut stages, "partial", || {
                let targets = req.targets();
                let t: Vec<&str> = targets.iter().map(String::as_str).collect();
                let z: Vec<&str> = req.covariates.iter().map(String::as_str).collect();
                partial_matrix_schur(&self.field, &PartialSpec::new(&t, &z, cfg.debias)).map(Cow::Owned)
            })?
        };
        let atom = atom_correction(&req.x, &req.y, &self.intensities);
        let pair = (req.x.as_str(), req.y.as_str());
        let d = self.dim;
        let mut imag_residual = 0.0;
        let mut excluded = 0;
        let values = timed(&mut stages, "invert", || {
            if req.kind != StatKind::C && (!(lx > 0.0) || !(ly > 0.0)) {
                return Err(Error::Domain(format!(
                    "intensity estimate of {} or {} is zero; the statistic is undefined",
                    req.x, req.y
                )));
            }
            let radial = match cfg.route {
                Route::Rotational => {
                    let rot = rotational_average(&field, pair, &cfg.radial)?;
                    imag_residual = rot.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
                    excluded = rot.excluded.len();
                    Some(rot)
                }
                Route::Direct => None,
            };
            if req.kind == StatKind::Pcf {
                let src = match &radial {
                    Some(rot) => SpectrumRef::Radial(rot),
                    None => SpectrumRef::Field(&field),
                };
                return pcf_from_spectrum(src, pair, atom, radii, d, lx, ly);
            }
            let c = match &radial {
                Some(rot) => c_rotational(rot, atom, radii, d)?,
                None => {
                    let sum = c_direct(&field, pair, atom, radii)?;
                    imag_residual = sum.imag_residual;
                    sum.values
                }
            };
            Ok(match req.kind {
                StatKind::C => c,
                StatKind::K => k_from_c(&c, lx, ly, d, radii)?,
                _ => signed_l(&k_from_c(&c, lx, ly, d, radii)?, d),
            })
        })?;
        let grid = self.field.grid();
        let meta = CurveMeta {
            tapers: cfg.tapers,
            kmax: grid.kmax().to_vec(),
            spacing: grid.spacing().to_vec(),
            debias: cfg.debias,
            debias_factor: factor,
            imag_residual,
        };
        let curve = SummaryCurve {
            kind: req.kind,
            radii: radii.clone(),
            values,
            targets: (req.x.clone(), req.y.clone()),
            covariates: req.covariates.clone(),
            dim: d,
            route: cfg.route,
            meta,
            band: None,
        };
        let report = RunReport {
            tapers: cfg.tapers,
            labels: self.field.labels().to_vec(),
            kmax: grid.kmax().to_vec(),
            spacing: grid.spacing().to_vec(),
            grid_nodes: grid.len(),
            route: Some(cfg.route),
            debias: cfg.debias,
            debias_factor: factor,
            imag_residual,
            excluded_radial_nodes: excluded,
            stages,
        };
        Ok((curve, report))
    }

    /// As [`Estimator::curve_on`] with the configured or default radii.
    pub fn curve(&self, req: &StatRequest, pattern: &MultiTypePattern) -> Result<(SummaryCurve, RunReport)> {
        let radii = self.config.radii.clone().unwrap_or_else(|| default_radii(pattern));
        self.curve_on(req, &radii)
    }
}

/// Runs the whole pipeline for one statistic.
pub fn estimate(pattern: &MultiTypePattern, req: &StatRequest, config: &EstimationConfig) -> Result<(SummaryCurve, RunReport)> {
    let labels = req.labels();
    let est = Estimator::new(pattern, &labels, config)?;
    est.curve(req, pattern)
}

/// Outcome of comparing curves estimated at `kmax` and `2 kmax`.
#[derive(Clone, Debug)]
pub struct KmaxDiagnostic {
    pub kmax: Vec<f64>,
    pub base: SummaryCurve,
    pub doubled: SummaryCurve,
    pub max_abs_change: f64,
    pub converged: bool,
}

/// Largest change of the curve counted as converged.
pub const KMAX_TOLERANCE: f64 = 0.05;

/// Re-estimates with the highest wavenumber doubled and reports the change.
pub fn kmax_diagnostic(pattern: &MultiTypePattern, req: &StatRequest, config: &EstimationConfig) -> Result<KmaxDiagnostic> {
    let d = pattern.dim();
    let kmax = match &config.kmax {
        Some(k) if k.len() == 1 => vec![k[0]; d],
        Some(k) => k.clone(),
        None => vec![default_kmax(pattern); d],
    };
    let mut cfg = config.clone();
    cfg.kmax = Some(kmax.clone());
    let radii = cfg.radii.clone().unwrap_or_else(|| default_radii(pattern));
    cfg.radii = Some(radii);
    let (base, _) = estimate(pattern, req, &cfg)?;
    cfg.kmax = Some(kmax.iter().map(|k| 2.0 * k).collect());
    if cfg.radial.max.is_some() {
        cfg.radial.max = cfg.radial.max.map(|m| 2.0 * m);
    }
    let (doubled, _) = estimate(pattern, req, &cfg)?;
    let max_abs_change = base
        .values
        .iter()
        .zip(&doubled.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(KmaxDiagnostic { kmax, base, doubled, max_abs_change, converged: max_abs_change < KMAX_TOLERANCE })
}

/// Analytic model fed through the inversion for [`oracle_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OracleModel {
    /// Marginal statistic of the cluster process `X` (a Thomas process).
    Thomas { lambda_z: f64, mu: f64, sigma: f64 },
    /// Partial cross statistic `X, Y` given `Z` of the cluster model.
    ClusterPartial(ClusterModelSpec),
    /// Partial cross statistic `X, Y` given `Z` of the squared shot-noise Cox process.
    CoxSquared { lambda_z: f64, a: f64 },
}

/// One row of an oracle comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleRow {
    pub r: f64,
    pub oracle: f64,
    pub pipeline: f64,
    pub rel_error: f64,
}

/// Compares the quadrature oracle with the estimator's inversion applied to
/// the exact spectrum sampled on the wavenumber grid of a 2-d `window`.
pub fn oracle_check(
    model: OracleModel,
    kind: StatKind,
    radii: &RadiiGrid,
    window: &Window,
    kmax: f64,
    route: Route,
) -> Result<Vec<OracleRow>> {
    let d = window.dim();
    let grid = make_grid(window, &vec![kmax; d], None, DEFAULT_GRID_CAP)?;
    let labels = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<String>>();
    let (field, pair, lx, ly, atom, iso): (SpectralMatrixField, (&str, &str), f64, f64, f64, Box<dyn Fn(f64) -> f64>) =
        match model {
            OracleModel::Thomas { lambda_z, mu, sigma } => {
                let spec = ClusterModelSpec::new(lambda_z, mu, sigma, mu, sigma, d)?;
                let lx = spec.lambda_x();
                let f = SpectralMatrixField::from_fn(grid, labels(&["X"]), 1, move |k| vec![cluster_spectra(&spec, k)[0]]);
                (f, ("X", "X"), lx, lx, lx, Box::new(move |kappa| cluster_spectra(&spec, &[kappa])[0].re))
            }
            OracleModel::ClusterPartial(spec) => {
                let full = SpectralMatrixField::from_fn(grid, labels(&["X", "Y", "Z"]), 8, move |k| {
                    cluster_spectra(&spec, k).to_vec()
                });
                let f = partial_matrix_schur(&full, &PartialSpec::new(&["X", "Y"], &["Z"], false))?;
                let iso = move |kappa: f64| cluster_partial_spectra(&spec, &[kappa]).xy_z.re;
                (f, ("X", "Y"), spec.lambda_x(), spec.lambda_y(), 0.0, Box::new(iso))
            }
            OracleModel::CoxSquared { lambda_z, a } => {
                let lam = cox_squared_intensity(lambda_z, a, d);
                let f = SpectralMatrixField::from_fn(grid, labels(&["X", "Y"]), 1, move |k| {
                    let v = Complex64::new(cox_squared_partial_spectrum(lambda_z, a, k), 0.0);
                    let l = Complex64::new(lam, 0.0);
                    vec![l, v, v, l]
                });
                let iso = move |kappa: f64| {
                    let mut k = vec![0.0; d];
                    k[0] = kappa;
                    cox_squared_partial_spectrum(lambda_z, a, &k)
                };
                (f, ("X", "Y"), lam, lam, 0.0, Box::new(iso))
            }
        };
    let radial = match route {
        Route::Rotational => Some(rotational_average(&field, pair, &RadialConfig::default())?),
        Route::Direct => None,
    };
    let values = if kind == StatKind::Pcf {
        let src = match &radial {
            Some(rot) => SpectrumRef::Radial(rot),
            None => SpectrumRef::Field(&field),
        };
        pcf_from_spectrum(src, pair, atom, radii, d, lx, ly)?
    } else {
        let c = match &radial {
            Some(rot) => c_rotational(rot, atom, radii, d)?,
            None => c_direct(&field, pair, atom, radii)?.values,
        };
        match kind {
            StatKind::C => c,
            StatKind::K => k_from_c(&c, lx, ly, d, radii)?,
            _ => signed_l(&k_from_c(&c, lx, ly, d, radii)?, d),
        }
    };
    radii
        .values()
        .iter()
        .zip(values)
        .map(|(&r, pipeline)| {
            let oracle = oracle_summary(&iso, kind, r, d, lx, ly, atom)?;
            let rel_error = if oracle != 0.0 { ((pipeline - oracle) / oracle).abs() } else { (pipeline - oracle).abs() };
            Ok(OracleRow { r, oracle, pipeline, rel_error })
        })
        .collect()
}

/// `r,oracle,pipeline,rel_error` rows.
pub fn oracle_rows_csv(rows: &[OracleRow]) -> String {
    let mut s = String::from("r,oracle,pipeline,rel_error\n");
    for row in rows {
        let _ = writeln!(s, "{},{},{},{}", row.r, row.oracle, row.pipeline, row.rel_error);
    }
    s
}

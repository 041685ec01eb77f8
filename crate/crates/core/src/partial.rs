//! Partial spectral matrices, debiasing and prediction-kernel spectra.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::herm::{backward_substitute, cholesky, condition_number, forward_substitute, hermitize, inverse_hpd};
use crate::spectra::{SpectralMatrixField, WavenumberGrid};

/// Covariate blocks with a larger condition number are treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Which processes are of interest and which are partialled out.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialSpec {
    pub targets: Vec<String>,
    pub covariates: Vec<String>,
    pub debias: bool,
}

impl PartialSpec {
    pub fn new(targets: &[&str], covariates: &[&str], debias: bool) -> Self {
        PartialSpec {
            targets: targets.iter().map(|s| s.to_string()).collect(),
            covariates: covariates.iter().map(|s| s.to_string()).collect(),
            debias,
        }
    }

    fn resolve(&self, field: &SpectralMatrixField) -> Result<(Vec<usize>, Vec<usize>)> {
        if self.targets.is_empty() {
            return Err(Error::Config("at least one target process is required".into()));
        }
        for t in &self.targets {
            if self.covariates.contains(t) {
                return Err(Error::Config(format!("'{t}' is both a target and a covariate")));
            }
        }
        let mut all = self.targets.clone();
        all.extend(self.covariates.iter().cloned());
        let mut sorted = all.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != all.len() {
            return Err(Error::Config("targets and covariates must not repeat labels".into()));
        }
        let t = self.targets.iter().map(|l| field.label_index(l)).collect::<Result<_>>()?;
        let z = self.covariates.iter().map(|l| field.label_index(l)).collect::<Result<_>>()?;
        Ok((t, z))
    }
}

/// `M / (M - P_Z)` when debiasing with covariates, else 1.
pub fn debias_factor(tapers: usize, covariates: usize, debias: bool) -> Result<f64> {
    if !debias || covariates == 0 {
        return Ok(1.0);
    }
    if tapers <= covariates {
        return Err(Error::Config(format!(
            "debiasing needs more tapers than covariates (M = {tapers}, P_Z = {covariates})"
        )));
    }
    Ok(tapers as f64 / (tapers - covariates) as f64)
}

fn block(m: &[Complex64], p: usize, rows: &[usize], cols: &[usize]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for &r in rows {
        for &c in cols {
            out.push(m[r * p + c]);
        }
    }
    out
}

fn check_condition(a: &[Complex64], n: usize, grid: &WavenumberGrid, node: usize) -> Result<()> {
    let cond = condition_number(a, n);
    if cond > CONDITION_LIMIT {
        return Err(Error::Singular { node: grid.node(node), condition: cond });
    }
    Ok(())
}

/// Runs `f` over the nonnegative half of the grid and mirrors the result.
fn per_node<F>(field: &SpectralMatrixField, width: usize, f: F) -> Result<Vec<Complex64>>
where
    F: Fn(usize, &[Complex64], &mut [Complex64]) -> Result<()> + Sync,
{
    let grid = field.grid().clone();
    let center = grid.center();
    let mut data = vec![ZERO; grid.len() * width];
    data[center * width..]
        .par_chunks_mut(width)
        .enumerate()
        .try_for_each(|(i, out)| f(center + i, field.matrix(center + i), out))?;
    let len = grid.len();
    let (neg, pos) = data.split_at_mut(center * width);
    for node in 0..center {
        let src = len - 1 - node - center;
        for e in 0..width {
            neg[node * width + e] = pos[src * width + e].conj();
        }
    }
    Ok(data)
}

fn into_field(field: &SpectralMatrixField, labels: Vec<String>, data: Vec<Complex64>) -> SpectralMatrixField {
    let mut out = SpectralMatrixField::from_raw(field.grid().clone(), labels, field.tapers(), data);
    out.symmetrize();
    out
}

/// Schur complement of the covariate block, optionally debiased.
pub fn partial_matrix_schur(field: &SpectralMatrixField, spec: &PartialSpec) -> Result<SpectralMatrixField> {
    let (t, z) = spec.resolve(field)?;
    let factor = debias_factor(field.tapers(), z.len(), spec.debias)?;
    let p = field.p();
    let s = t.len();
    let nz = z.len();
    let grid = field.grid();
    let data = per_node(field, s * s, |node, m, out| {
        let mut res = block(m, p, &t, &t);
        if nz > 0 {
            let a = block(m, p, &z, &z);
            check_condition(&a, nz, grid, node)?;
            let l = cholesky(&a, nz).ok_or_else(|| Error::Singular { node: grid.node(node), condition: f64::INFINITY })?;
            let mut y = block(m, p, &z, &t);
            forward_substitute(&l, nz, &mut y, s);
            for i in 0..s {
                for j in 0..s {
                    let mut acc = ZERO;
                    for k in 0..nz {
                        acc += y[k * s + i].conj() * y[k * s + j];
                    }
                    res[i * s + j] -= acc;
                }
            }
        }
        for (o, v) in out.iter_mut().zip(&res) {
            *o = v * factor;
        }
        Ok(())
    })?;
    Ok(into_field(field, spec.targets.clone(), data))
}

/// Same contract as [`partial_matrix_schur`], via one inversion of the
/// targets-plus-covariates block and inversion of the target part of the inverse.
pub fn partial_matrix_fast(field: &SpectralMatrixField, spec: &PartialSpec) -> Result<SpectralMatrixField> {
    let (t, z) = spec.resolve(field)?;
    let factor = debias_factor(field.tapers(), z.len(), spec.debias)?;
    let p = field.p();
    let s = t.len();
    let nz = z.len();
    let u: Vec<usize> = t.iter().chain(&z).copied().collect();
    let nu = u.len();
    let grid = field.grid();
    let data = per_node(field, s * s, |node, m, out| {
        if nz > 0 {
            check_condition(&block(m, p, &z, &z), nz, grid, node)?;
        }
        let singular = || Error::Singular { node: grid.node(node), condition: f64::INFINITY };
        let g = inverse_hpd(&block(m, p, &u, &u), nu).ok_or_else(singular)?;
        let idx: Vec<usize> = (0..s).collect();
        let gtt = block(&g, nu, &idx, &idx);
        let res = match s {
            1 => vec![Complex64::new(1.0 / gtt[0].re, 0.0)],
            2 => {
                let det = gtt[0].re * gtt[3].re - gtt[1].norm_sqr();
                vec![
                    Complex64::new(gtt[3].re / det, 0.0),
                    -gtt[1] / det,
                    -gtt[2] / det,
                    Complex64::new(gtt[0].re / det, 0.0),
                ]
            }
            _ => inverse_hpd(&gtt, s).ok_or_else(singular)?,
        };
        for (o, v) in out.iter_mut().zip(&res) {
            *o = v * factor;
        }
        Ok(())
    })?;
    Ok(into_field(field, spec.targets.clone(), data))
}

/// Per-node prediction-kernel spectrum `a(k) = f_XZ(k) f_ZZ(k)^{-1}`.
#[derive(Clone, Debug)]
pub struct PredictionKernel {
    pub grid: WavenumberGrid,
    pub covariates: Vec<String>,
    /// `len x P_Z`, row-major.
    pub values: Vec<Complex64>,
}

impl PredictionKernel {
    pub fn at(&self, node: usize) -> &[Complex64] {
        let w = self.covariates.len();
        &self.values[node * w..(node + 1) * w]
    }
}

pub fn prediction_kernel_spectrum(field: &SpectralMatrixField, x: &str, z: &[&str]) -> Result<PredictionKernel> {
    let spec = PartialSpec::new(&[x], z, false);
    let (t, zi) = spec.resolve(field)?;
    let p = field.p();
    let nz = zi.len();
    let grid = field.grid();
    let values = per_node(field, nz, |node, m, out| {
        let a = block(m, p, &zi, &zi);
        check_condition(&a, nz, grid, node)?;
        let l = cholesky(&a, nz).ok_or_else(|| Error::Singular { node: grid.node(node), condition: f64::INFINITY })?;
        let mut w = block(m, p, &zi, &t);
        forward_substitute(&l, nz, &mut w, 1);
        backward_substitute(&l, nz, &mut w, 1);
        for (o, v) in out.iter_mut().zip(&w) {
            *o = v.conj();
        }
        Ok(())
    })?;
    Ok(PredictionKernel {
        grid: grid.clone(),
        covariates: spec.covariates,
        values,
    })
}

/// Monte-Carlo mean of the Schur complement of complex Wishart draws
/// `W = (1/M) sum_m z_m z_m^H`, `z_m ~ CN(0, Sigma)`, relative to the Schur
/// complement of `Sigma`. The leading `s` indices form the kept block.
/// Returns the average of the diagonal ratios.
pub fn wishart_debias_check<R: Rng + ?Sized>(
    m: usize,
    p: usize,
    s: usize,
    sigma: &[Complex64],
    n_draws: usize,
    rng: &mut R,
) -> Result<f64> {
    if sigma.len() != p * p || s == 0 || s > p {
        return Err(Error::Shape(format!("need a {p}x{p} matrix and 1 <= s <= P")));
    }
    if m <= p - s {
        return Err(Error::Config(format!("need M > P - s (M = {m}, P - s = {})", p - s)));
    }
    let mut sig = sigma.to_vec();
    hermitize(&mut sig, p);
    let l = cholesky(&sig, p).ok_or_else(|| Error::Domain("Sigma is not positive definite".into()))?;
    let keep: Vec<usize> = (0..s).collect();
    let rest: Vec<usize> = (s..p).collect();
    let schur = |w: &[Complex64]| -> Option<Vec<Complex64>> {
        let mut res = block(w, p, &keep, &keep);
        if rest.is_empty() {
            return Some(res);
        }
        let nz = rest.len();
        let lz = cholesky(&block(w, p, &rest, &rest), nz)?;
        let mut y = block(w, p, &rest, &keep);
        forward_substitute(&lz, nz, &mut y, s);
        for i in 0..s {
            for j in 0..s {
                let mut acc = ZERO;
                for k in 0..nz {
                    acc += y[k * s + i].conj() * y[k * s + j];
                }
                res[i * s + j] -= acc;
            }
        }
        Some(res)
    };
    let target = schur(&sig).ok_or_else(|| Error::Domain("Sigma is not positive definite".into()))?;
    let mut mean = vec![ZERO; s * s];
    let mut w = vec![ZERO; p * p];
    let mut zvec = vec![ZERO; p];
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut used = 0usize;
    for _ in 0..n_draws {
        w.iter_mut().for_each(|v| *v = ZERO);
        for _ in 0..m {
            let e: Vec<Complex64> = (0..p)
                .map(|_| {
                    let a: f64 = rng.sample(StandardNormal);
                    let b: f64 = rng.sample(StandardNormal);
                    Complex64::new(a * half, b * half)
                })
                .collect();
            for i in 0..p {
                zvec[i] = (0..=i).map(|k| l[i * p + k] * e[k]).sum();
            }
            for i in 0..p {
                for j in 0..p {
                    w[i * p + j] += zvec[i] * zvec[j].conj() / m as f64;
                }
            }
        }
        // rank-deficient draws have probability zero; skip them if rounding produces one
        if let Some(sc) = schur(&w) {
            for (a, b) in mean.iter_mut().zip(&sc) {
                *a += b;
            }
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::Domain("no usable Wishart draws".into()));
    }
    let ratio = (0..s).map(|i| mean[i * s + i].re / used as f64 / target[i * s + i].re).sum::<f64>() / s as f64;
    Ok(ratio)
}

//! Wavenumber grids, tapered DFTs and multitaper spectral matrices.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nufft::Nufft1;
use crate::patterns::{IntensityEstimates, MultiTypePattern, Window};
use crate::tapers::TaperFamily;

/// Default cap on the number of grid nodes.
pub const DEFAULT_GRID_CAP: usize = 4_000_000;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Symmetric wavenumber grid `{spacing * z : |spacing_j z_j| <= kmax_j}`.
///
/// Nodes are stored row-major over `z_j = -n_j..=n_j`, so the node at
/// index `i` has its negation at `len - 1 - i`.
#[derive(Clone, Debug, PartialEq)]
pub struct WavenumberGrid {
    kmax: Vec<f64>,
    spacing: Vec<f64>,
    half: Vec<usize>,
}

pub fn make_grid(window: &Window, kmax: &[f64], spacing: Option<&[f64]>, cap: usize) -> Result<WavenumberGrid> {
    let d = window.dim();
    if kmax.len() != d {
        return Err(Error::Config(format!("kmax has {} entries for a {d}-d window", kmax.len())));
    }
    let spacing: Vec<f64> = match spacing {
        Some(s) if s.len() != d => {
            return Err(Error::Config(format!("spacing has {} entries for a {d}-d window", s.len())))
        }
        Some(s) => s.to_vec(),
        None => window.sides().iter().map(|l| 1.0 / l).collect(),
    };
    for j in 0..d {
        if !(kmax[j] > 0.0) || !kmax[j].is_finite() {
            return Err(Error::Config(format!("kmax must be positive, got {}", kmax[j])));
        }
        if !(spacing[j] > 0.0) || !spacing[j].is_finite() {
            return Err(Error::Config(format!("spacing must be positive, got {}", spacing[j])));
        }
    }
    let half: Vec<usize> = (0..d).map(|j| (kmax[j] / spacing[j] + 1e-9).floor() as usize).collect();
    let nodes = half.iter().try_fold(1usize, |acc, &h| acc.checked_mul(2 * h + 1));
    match nodes {
        Some(n) if n <= cap => Ok(WavenumberGrid { kmax: kmax.to_vec(), spacing, half }),
        _ => Err(Error::Resource(format!(
            "wavenumber grid with {:?} nodes per axis exceeds the cap of {cap} nodes",
            half.iter().map(|h| 2 * h + 1).collect::<Vec<_>>()
        ))),
    }
}

impl WavenumberGrid {
    pub fn dim(&self) -> usize {
        self.half.len()
    }

    pub fn kmax(&self) -> &[f64] {
        &self.kmax
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// `n_j`: the largest `z_j`.
    pub fn half_widths(&self) -> &[usize] {
        &self.half
    }

    pub fn axis_len(&self, j: usize) -> usize {
        2 * self.half[j] + 1
    }

    pub fn len(&self) -> usize {
        (0..self.dim()).map(|j| self.axis_len(j)).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `k = 0`.
    pub fn center(&self) -> usize {
        (self.len() - 1) / 2
    }

    pub fn mirror(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }

    /// Volume element `prod_j spacing_j` of the Riemann sum.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Integer coordinates of a node.
    pub fn integer_coords(&self, idx: usize) -> [i64; 3] {
        let d = self.dim();
        let mut z = [0i64; 3];
        let mut rem = idx;
        for j in (0..d).rev() {
            let n = self.axis_len(j);
            z[j] = (rem % n) as i64 - self.half[j] as i64;
            rem /= n;
        }
        z
    }

    /// Wavenumber vector of a node.
    pub fn node(&self, idx: usize) -> Vec<f64> {
        let z = self.integer_coords(idx);
        (0..self.dim()).map(|j| z[j] as f64 * self.spacing[j]).collect()
    }

    pub fn norm(&self, idx: usize) -> f64 {
        let z = self.integer_coords(idx);
        (0..self.dim())
            .map(|j| {
                let k = z[j] as f64 * self.spacing[j];
                k * k
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Wavenumbers along axis `j`, from `-kmax` to `kmax`.
    pub fn axis_values(&self, j: usize) -> Vec<f64> {
        let h = self.half[j] as i64;
        (-h..=h).map(|z| z as f64 * self.spacing[j]).collect()
    }
}

/// Per-node `P x P` complex matrices over a wavenumber grid.
#[derive(Clone, Debug)]
pub struct SpectralMatrixField {
    grid: WavenumberGrid,
    labels: Vec<String>,
    tapers: usize,
    data: Vec<Complex64>,
}

impl SpectralMatrixField {
    pub fn zeros(grid: WavenumberGrid, labels: Vec<String>, tapers: usize) -> Self {
        let p = labels.len();
        let data = vec![ZERO; grid.len() * p * p];
        SpectralMatrixField { grid, labels, tapers, data }
    }

    /// Field from an analytic matrix function; `f` is evaluated on the
    /// nonnegative half of the grid and conjugated onto the rest.
    pub fn from_fn<F>(grid: WavenumberGrid, labels: Vec<String>, tapers: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<Complex64> + Sync,
    {
        let mut field = SpectralMatrixField::zeros(grid, labels, tapers);
        let pp = field.p() * field.p();
        let center = field.grid.center();
        let grid = &field.grid;
        field.data[center * pp..]
            .par_chunks_mut(pp)
            .enumerate()
            .for_each(|(i, out)| {
                let v = f(&grid.node(center + i));
                out.copy_from_slice(&v[..pp]);
            });
        field.symmetrize();
        field
    }

    pub(crate) fn from_raw(grid: WavenumberGrid, labels: Vec<String>, tapers: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), grid.len() * labels.len() * labels.len());
        SpectralMatrixField { grid, labels, tapers, data }
    }

    pub fn grid(&self) -> &WavenumberGrid {
        &self.grid
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Config(format!("type '{label}' not in spectral field ({})", self.labels.join(", "))))
    }

    pub fn p(&self) -> usize {
        self.labels.len()
    }

    pub fn tapers(&self) -> usize {
        self.tapers
    }

    pub fn matrix(&self, node: usize) -> &[Complex64] {
        let pp = self.p() * self.p();
        &self.data[node * pp..(node + 1) * pp]
    }

    pub fn matrix_mut(&mut self, node: usize) -> &mut [Complex64] {
        let pp = self.p() * self.p();
        &mut self.data[node * pp..(node + 1) * pp]
    }

    pub fn get(&self, node: usize, i: usize, j: usize) -> Complex64 {
        self.data[node * self.p() * self.p() + i * self.p() + j]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Hermitizes the nonnegative half, forces `k = 0` real and mirrors
    /// conjugates onto the negative half.
    pub fn symmetrize(&mut self) {
        let p = self.p();
        let pp = p * p;
        let center = self.grid.center();
        let len = self.grid.len();
        for node in center..len {
            let m = &mut self.data[node * pp..(node + 1) * pp];
            for i in 0..p {
                m[i * p + i].im = 0.0;
                for j in i + 1..p {
                    let v = 0.5 * (m[i * p + j] + m[j * p + i].conj());
                    m[i * p + j] = v;
                    m[j * p + i] = v.conj();
                }
            }
            if node == center {
                for v in m.iter_mut() {
                    v.im = 0.0;
                }
            }
        }
        let (neg, pos) = self.data.split_at_mut(center * pp);
        for node in 0..center {
            let src = len - 1 - node - center;
            for e in 0..pp {
                neg[node * pp + e] = pos[src * pp + e].conj();
            }
        }
    }

    /// Debug dump: `k1[,k2[,k3]],re_11,im_11,re_12,...` in registry order.
    pub fn dump_csv(&self, path: &Path) -> Result<()> {
        let d = self.grid.dim();
        let p = self.p();
        let mut s = String::new();
        for j in 0..d {
            let _ = write!(s, "k{},", j + 1);
        }
        let cols: Vec<String> = (0..p)
            .flat_map(|i| (0..p).flat_map(move |j| [format!("re_{}{}", i + 1, j + 1), format!("im_{}{}", i + 1, j + 1)]))
            .collect();
        s.push_str(&cols.join(","));
        s.push('\n');
        for node in 0..self.grid.len() {
            for k in self.grid.node(node) {
                let _ = write!(s, "{k},");
            }
            let row: Vec<String> = self.matrix(node).iter().flat_map(|v| [v.re.to_string(), v.im.to_string()]).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}

/// How tapered DFTs are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DftMethod {
    /// Explicit summation over points and nodes.
    Direct,
    /// Gaussian-gridding nonuniform FFT.
    Nufft,
}

impl std::str::FromStr for DftMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(DftMethod::Direct),
            "nufft" => Ok(DftMethod::Nufft),
            _ => Err(Error::Config(format!("dft method must be 'direct' or 'nufft', got '{s}'"))),
        }
    }
}

/// Per-axis tables of `H_m` factors and the window phase on the nonnegative half grid.
struct AxisTables {
    /// `[m][j][z_j + n_j]`
    taper_ft: Vec<Vec<Vec<Complex64>>>,
}

impl AxisTables {
    fn new(family: &TaperFamily, grid: &WavenumberGrid) -> Self {
        let d = grid.dim();
        let taper_ft = (0..family.len())
            .map(|m| (0..d).map(|j| grid.axis_values(j).iter().map(|&k| family.axis_ft(m, j, k)).collect()).collect())
            .collect();
        AxisTables { taper_ft }
    }

    fn ft(&self, m: usize, z: &[i64; 3], grid: &WavenumberGrid) -> Complex64 {
        let mut v = Complex64::new(1.0, 0.0);
        for j in 0..grid.dim() {
            v *= self.taper_ft[m][j][(z[j] + grid.half_widths()[j] as i64) as usize];
        }
        v
    }
}

/// Tapered DFT sums `sum_x h_m(x) e^{-2 pi i <x,k>}` on nodes `center..len`
/// for each requested taper.
fn half_sums(
    coords: &[f64],
    family: &TaperFamily,
    tapers: &[usize],
    grid: &WavenumberGrid,
    method: DftMethod,
    plan: &mut Option<Nufft1>,
) -> Vec<Vec<Complex64>> {
    let d = grid.dim();
    let n = coords.len() / d;
    let center = grid.center();
    let half_len = grid.len() - center;
    match method {
        DftMethod::Direct => {
            let mut out = vec![vec![ZERO; half_len]; tapers.len()];
            let mut phases: Vec<Vec<Complex64>> = (0..d).map(|j| vec![ZERO; grid.axis_len(j)]).collect();
            let axis: Vec<Vec<f64>> = (0..d).map(|j| grid.axis_values(j)).collect();
            for p in 0..n {
                let x = &coords[p * d..(p + 1) * d];
                for j in 0..d {
                    for (ph, &k) in phases[j].iter_mut().zip(&axis[j]) {
                        let (s, c) = (-2.0 * PI * x[j] * k).sin_cos();
                        *ph = Complex64::new(c, s);
                    }
                }
                for (o, &m) in out.iter_mut().zip(tapers) {
                    let w = family.value(m, x);
                    if w == 0.0 {
                        continue;
                    }
                    accumulate_direct(o, w, &phases, grid);
                }
            }
            out
        }
        DftMethod::Nufft => {
            let plan = plan.get_or_insert_with(|| Nufft1::new(grid.half_widths()));
            let lower = family.window().lower();
            let t: Vec<f64> = (0..n)
                .flat_map(|p| (0..d).map(move |j| (coords[p * d + j] - lower[j]) * grid.spacing()[j]))
                .collect();
            let mut out = Vec::with_capacity(tapers.len());
            for pair in tapers.chunks(2) {
                let c: Vec<Complex64> = (0..n)
                    .map(|p| {
                        let x = &coords[p * d..(p + 1) * d];
                        let a = family.value(pair[0], x);
                        let b = pair.get(1).map_or(0.0, |&m| family.value(m, x));
                        Complex64::new(a, b)
                    })
                    .collect();
                let full = plan.execute(&t, &c);
                let len = full.len();
                // separate the two real-weight transforms by conjugate symmetry
                let shift = window_phase(family.window(), grid);
                let mut a = Vec::with_capacity(half_len);
                let mut b = Vec::with_capacity(half_len);
                for i in center..len {
                    let cz = full[i];
                    let cm = full[len - 1 - i].conj();
                    let ph = shift.as_ref().map_or(Complex64::new(1.0, 0.0), |s| s(i));
                    a.push(0.5 * (cz + cm) * ph);
                    b.push(Complex64::new(0.0, -0.5) * (cz - cm) * ph);
                }
                out.push(a);
                if pair.len() == 2 {
                    out.push(b);
                }
            }
            out
        }
    }
}

/// `e^{-2 pi i <lower, k>}` as a node lookup, or `None` when `lower = 0`.
fn window_phase<'a>(window: &Window, grid: &'a WavenumberGrid) -> Option<impl Fn(usize) -> Complex64 + 'a> {
    if window.lower().iter().all(|&v| v == 0.0) {
        return None;
    }
    let d = grid.dim();
    let tables: Vec<Vec<Complex64>> = (0..d)
        .map(|j| {
            grid.axis_values(j)
                .iter()
                .map(|&k| {
                    let (s, c) = (-2.0 * PI * window.lower()[j] * k).sin_cos();
                    Complex64::new(c, s)
                })
                .collect()
        })
        .collect();
    Some(move |idx: usize| {
        let z = grid.integer_coords(idx);
        let mut v = Complex64::new(1.0, 0.0);
        for j in 0..d {
            v *= tables[j][(z[j] + grid.half_widths()[j] as i64) as usize];
        }
        v
    })
}

fn accumulate_direct(out: &mut [Complex64], w: f64, phases: &[Vec<Complex64>], grid: &WavenumberGrid) {
    let center = grid.center();
    match grid.dim() {
        1 => {
            for (i, o) in out.iter_mut().enumerate() {
                *o += w * phases[0][center + i];
            }
        }
        2 => {
            let n1 = grid.axis_len(1);
            for (i, o) in out.iter_mut().enumerate() {
                let idx = center + i;
                *o += w * phases[0][idx / n1] * phases[1][idx % n1];
            }
        }
        _ => {
            let n1 = grid.axis_len(1);
            let n2 = grid.axis_len(2);
            for (i, o) in out.iter_mut().enumerate() {
                let idx = center + i;
                let a = idx / (n1 * n2);
                let b = (idx / n2) % n1;
                let c = idx % n2;
                *o += w * phases[0][a] * phases[1][b] * phases[2][c];
            }
        }
    }
}

/// Tapered, mean-corrected DFT `J_m(k)` of one type over the whole grid,
/// by direct summation.
pub fn tapered_dft(
    pattern: &MultiTypePattern,
    label: &str,
    family: &TaperFamily,
    m: usize,
    grid: &WavenumberGrid,
    intensities: &IntensityEstimates,
) -> Result<Vec<Complex64>> {
    tapered_dft_with(pattern, label, family, m, grid, intensities, DftMethod::Direct)
}

pub fn tapered_dft_with(
    pattern: &MultiTypePattern,
    label: &str,
    family: &TaperFamily,
    m: usize,
    grid: &WavenumberGrid,
    intensities: &IntensityEstimates,
    method: DftMethod,
) -> Result<Vec<Complex64>> {
    let t = pattern.require_type(label)?;
    let lambda = intensities.get(label).unwrap_or(0.0);
    let coords = pattern.coords_of(t);
    let tables = AxisTables::new(family, grid);
    let mut plan = None;
    let sums = half_sums(&coords, family, &[m], grid, method, &mut plan);
    let center = grid.center();
    let len = grid.len();
    let mut out = vec![ZERO; len];
    for (i, s) in sums[0].iter().enumerate() {
        let idx = center + i;
        let z = grid.integer_coords(idx);
        let v = s - lambda * tables.ft(m, &z, grid);
        out[idx] = v;
        out[len - 1 - idx] = v.conj();
    }
    out[center].im = 0.0;
    Ok(out)
}

/// Multitaper spectral matrix over all types of the pattern.
pub fn multitaper_matrix(
    pattern: &MultiTypePattern,
    family: &TaperFamily,
    grid: &WavenumberGrid,
    intensities: &IntensityEstimates,
) -> Result<SpectralMatrixField> {
    let labels = pattern.registry().to_vec();
    multitaper_matrix_with(pattern, &labels, family, grid, intensities, DftMethod::Nufft)
}

/// Multitaper spectral matrix over the listed types, in the given order.
pub fn multitaper_matrix_with(
    pattern: &MultiTypePattern,
    labels: &[String],
    family: &TaperFamily,
    grid: &WavenumberGrid,
    intensities: &IntensityEstimates,
    method: DftMethod,
) -> Result<SpectralMatrixField> {
    let p = labels.len();
    let m_count = family.len();
    if m_count < p {
        return Err(Error::Config(format!("{m_count} tapers cannot resolve {p} processes; need M >= P")));
    }
    if grid.dim() != pattern.dim() {
        return Err(Error::Shape("grid and pattern dimensions differ".into()));
    }
    let types: Vec<usize> = labels.iter().map(|l| pattern.require_type(l)).collect::<Result<_>>()?;
    let lambdas: Vec<f64> = labels.iter().map(|l| intensities.get(l).unwrap_or(0.0)).collect();
    let coords: Vec<Vec<f64>> = types.iter().map(|&t| pattern.coords_of(t)).collect();
    let tables = AxisTables::new(family, grid);
    let center = grid.center();
    let len = grid.len();
    let half_len = len - center;
    let pp = p * p;
    let mut data = vec![ZERO; len * pp];
    let mut plan = None;
    let scale = 1.0 / m_count as f64;
    let all: Vec<usize> = (0..m_count).collect();
    for chunk in all.chunks(2) {
        // J for every type and the tapers of this chunk
        let mut js: Vec<Vec<Vec<Complex64>>> = Vec::with_capacity(p);
        for (q, c) in coords.iter().enumerate() {
            let mut sums = half_sums(c, family, chunk, grid, method, &mut plan);
            if lambdas[q] != 0.0 {
                for (s, &m) in sums.iter_mut().zip(chunk) {
                    for (i, v) in s.iter_mut().enumerate() {
                        let z = grid.integer_coords(center + i);
                        *v -= lambdas[q] * tables.ft(m, &z, grid);
                    }
                }
            }
            js.push(sums);
        }
        data[center * pp..].par_chunks_mut(pp).enumerate().for_each(|(i, mat)| {
            for t in 0..chunk.len() {
                for a in 0..p {
                    let ja = js[a][t][i];
                    for b in 0..p {
                        mat[a * p + b] += scale * ja * js[b][t][i].conj();
                    }
                }
            }
        });
    }
    debug_assert_eq!(data[center * pp..].len(), half_len * pp);
    let mut field = SpectralMatrixField::from_raw(grid.clone(), labels.to_vec(), m_count, data);
    field.symmetrize();
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::estimate_intensities;
    use crate::tapers::make_sine_tapers;

    #[test]
    fn grid_counts() {
        let w = Window::square(100.0, 2).unwrap();
        let g = make_grid(&w, &[0.5, 0.5], None, DEFAULT_GRID_CAP).unwrap();
        assert_eq!(g.spacing(), &[0.01, 0.01]);
        assert_eq!(g.len(), 101 * 101);
        let w = Window::new(vec![0.0, 0.0], vec![100.0, 200.0]).unwrap();
        let g = make_grid(&w, &[0.1, 0.1], None, DEFAULT_GRID_CAP).unwrap();
        assert_eq!(g.spacing(), &[0.01, 0.005]);
        let g = make_grid(&w, &[0.001, 0.1], None, DEFAULT_GRID_CAP).unwrap();
        assert_eq!(g.axis_len(0), 1);
        assert!(matches!(make_grid(&w, &[10.0, 10.0], None, DEFAULT_GRID_CAP), Err(Error::Resource(_))));
    }

    #[test]
    fn grid_mirror() {
        let w = Window::new(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 4.0]).unwrap();
        let g = make_grid(&w, &[2.0, 1.0, 0.5], None, DEFAULT_GRID_CAP).unwrap();
        for idx in [0, 5, 17, g.len() - 3] {
            let a = g.node(idx);
            let b = g.node(g.mirror(idx));
            for j in 0..3 {
                assert_eq!(a[j], -b[j]);
            }
        }
        assert!(g.node(g.center()).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_type_gives_zero_dft() {
        let w = Window::square(10.0, 2).unwrap();
        let p = MultiTypePattern::from_blocks(w.clone(), vec![("A".into(), vec![1.0, 2.0]), ("B".into(), vec![])])
            .unwrap();
        let fam = make_sine_tapers(&w, 2);
        let g = make_grid(&w, &[0.5, 0.5], None, DEFAULT_GRID_CAP).unwrap();
        let lam = estimate_intensities(&p);
        let j = tapered_dft(&p, "B", &fam, 0, &g, &lam).unwrap();
        assert!(j.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn single_point_at_center() {
        let w = Window::square(10.0, 2).unwrap();
        let p = MultiTypePattern::from_points(w.clone(), vec![(vec![5.0, 5.0], "A")]).unwrap();
        let fam = make_sine_tapers(&w, 3);
        let g = make_grid(&w, &[0.3, 0.3], None, DEFAULT_GRID_CAP).unwrap();
        let lam = estimate_intensities(&p);
        for m in 0..3 {
            let j = tapered_dft(&p, "A", &fam, m, &g, &lam).unwrap();
            let want = fam.value(m, &[5.0, 5.0]) - lam.values[0] * fam.ft(m, &[0.0, 0.0]);
            assert!((j[g.center()] - want).norm() < 1e-14);
        }
    }
}

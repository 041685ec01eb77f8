//! Type-1 nonuniform FFT by Gaussian gridding.
//!
//! Computes `S(z) = sum_j c_j exp(-2 pi i <z, t_j>)` for integer `z` with
//! `|z_i| <= n_i`, given points `t_j` (taken modulo 1 on each axis). The
//! sums are spread onto an oversampled periodic grid with a truncated
//! Gaussian, transformed with an FFT, and deconvolved mode by mode.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

const OVERSAMPLING: f64 = 2.0;

/// Smallest `m >= n` whose only prime factors are 2, 3 and 5.
pub fn next_fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Reusable plan for a fixed mode box.
pub struct Nufft1 {
    half: Vec<usize>,
    grid: Vec<usize>,
    strides: Vec<usize>,
    tau: Vec<f64>,
    spread: usize,
    deconv: Vec<Vec<f64>>,
    planner: FftPlanner<f64>,
}

impl Nufft1 {
    /// Plan for modes `-half[j]..=half[j]` on each axis.
    pub fn new(half: &[usize]) -> Self {
        let d = half.len();
        let spread = if d <= 2 { 16 } else { 12 };
        let mut grid = Vec::with_capacity(d);
        let mut tau = Vec::with_capacity(d);
        let mut deconv = Vec::with_capacity(d);
        for &h in half {
            let n = (2 * h + 1) as f64;
            let g = next_fast_len(((OVERSAMPLING * n).ceil() as usize).max(2 * spread + 2));
            let r = g as f64 / n;
            let t = spread as f64 / (4.0 * PI * n * n * r * (r - 0.5));
            let norm = (4.0 * PI * t).sqrt() * g as f64;
            let dec = (0..=2 * h)
                .map(|i| {
                    let z = i as f64 - h as f64;
                    (4.0 * PI * PI * t * z * z).exp() / norm
                })
                .collect();
            grid.push(g);
            tau.push(t);
            deconv.push(dec);
        }
        let mut strides = vec![1usize; d];
        for j in (0..d.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * grid[j + 1];
        }
        Nufft1 { half: half.to_vec(), grid, strides, tau, spread, deconv, planner: FftPlanner::new() }
    }

    pub fn modes_len(&self) -> usize {
        self.half.iter().map(|&h| 2 * h + 1).product()
    }

    /// Evaluates all modes in row-major order over the mode box.
    /// `t` holds `d` coordinates per point.
    pub fn execute(&mut self, t: &[f64], c: &[Complex64]) -> Vec<Complex64> {
        let d = self.half.len();
        assert_eq!(t.len(), c.len() * d);
        let total: usize = self.grid.iter().product();
        let mut buf = vec![Complex64::new(0.0, 0.0); total];
        self.spread(t, c, &mut buf);
        self.transform(&mut buf);
        self.extract(&buf)
    }

    fn spread(&self, t: &[f64], c: &[Complex64], buf: &mut [Complex64]) {
        let d = self.half.len();
        let w = 2 * self.spread;
        let mut kern = vec![0.0f64; d * w];
        let mut idx = vec![0usize; d * w];
        for (p, &cp) in c.iter().enumerate() {
            for j in 0..d {
                let g = self.grid[j];
                let gf = g as f64;
                let tj = t[p * d + j].rem_euclid(1.0);
                let l0 = (tj * gf).floor() as i64;
                let inv4tau = 1.0 / (4.0 * self.tau[j]);
                for o in 0..w {
                    let l = l0 - self.spread as i64 + 1 + o as i64;
                    let dist = tj - l as f64 / gf;
                    kern[j * w + o] = (-dist * dist * inv4tau).exp();
                    idx[j * w + o] = l.rem_euclid(g as i64) as usize * self.strides[j];
                }
            }
            match d {
                1 => {
                    for o in 0..w {
                        buf[idx[o]] += cp * kern[o];
                    }
                }
                2 => {
                    for a in 0..w {
                        let ca = cp * kern[a];
                        let base = idx[a];
                        for b in 0..w {
                            buf[base + idx[w + b]] += ca * kern[w + b];
                        }
                    }
                }
                _ => {
                    for a in 0..w {
                        let ca = cp * kern[a];
                        for b in 0..w {
                            let cb = ca * kern[w + b];
                            let base = idx[a] + idx[w + b];
                            for e in 0..w {
                                buf[base + idx[2 * w + e]] += cb * kern[2 * w + e];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Grid indices on axis `j` that hold wanted modes.
    fn wanted(&self, j: usize) -> Vec<usize> {
        let h = self.half[j] as i64;
        let g = self.grid[j] as i64;
        (-h..=h).map(|z| z.rem_euclid(g) as usize).collect()
    }

    /// Forward FFT along each axis, last axis first; later passes only touch
    /// lines whose already-transformed coordinates are wanted modes.
    fn transform(&mut self, buf: &mut [Complex64]) {
        let d = self.half.len();
        let mut line = Vec::new();
        for a in (0..d).rev() {
            let g = self.grid[a];
            let fft = self.planner.plan_fft_forward(g);
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            let sets: Vec<Vec<usize>> = (0..d)
                .map(|b| if b > a { self.wanted(b) } else { (0..self.grid[b]).collect() })
                .collect();
            let mut starts = vec![0usize];
            for b in 0..d {
                if b == a {
                    continue;
                }
                let stride_b = self.strides[b];
                starts = starts
                    .iter()
                    .flat_map(|&s| sets[b].iter().map(move |&i| s + i * stride_b))
                    .collect();
            }
            let stride = self.strides[a];
            line.resize(g, Complex64::new(0.0, 0.0));
            for s in starts {
                if stride == 1 {
                    fft.process_with_scratch(&mut buf[s..s + g], &mut scratch);
                } else {
                    for i in 0..g {
                        line[i] = buf[s + i * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for i in 0..g {
                        buf[s + i * stride] = line[i];
                    }
                }
            }
        }
    }

    fn extract(&self, buf: &[Complex64]) -> Vec<Complex64> {
        let d = self.half.len();
        let wanted: Vec<Vec<usize>> = (0..d).map(|j| self.wanted(j)).collect();
        let mut out = Vec::with_capacity(self.modes_len());
        match d {
            1 => {
                for (i, &q) in wanted[0].iter().enumerate() {
                    out.push(buf[q] * self.deconv[0][i]);
                }
            }
            2 => {
                for (i, &q0) in wanted[0].iter().enumerate() {
                    let s0 = q0 * self.strides[0];
                    let f0 = self.deconv[0][i];
                    for (k, &q1) in wanted[1].iter().enumerate() {
                        out.push(buf[s0 + q1] * (f0 * self.deconv[1][k]));
                    }
                }
            }
            _ => {
                for (i, &q0) in wanted[0].iter().enumerate() {
                    for (k, &q1) in wanted[1].iter().enumerate() {
                        let s = q0 * self.strides[0] + q1 * self.strides[1];
                        let f = self.deconv[0][i] * self.deconv[1][k];
                        for (l, &q2) in wanted[2].iter().enumerate() {
                            out.push(buf[s + q2] * (f * self.deconv[2][l]));
                        }
                    }
                }
            }
        }
        out
    }
}

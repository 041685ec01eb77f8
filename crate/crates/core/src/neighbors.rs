//! Uniform cell grid for fixed-radius neighbour queries.

use crate::patterns::Window;

pub struct CellIndex<'a> {
    coords: &'a [f64],
    d: usize,
    lower: Vec<f64>,
    cell: f64,
    dims: Vec<usize>,
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> CellIndex<'a> {
    /// Indexes flat `d`-dimensional coordinates lying in `window`, using
    /// cells of side at least `cell`.
    pub fn new(coords: &'a [f64], window: &Window, cell: f64) -> Self {
        let d = window.dim();
        let n = coords.len() / d;
        // keep the cell count bounded
        let max_cells_per_axis = match d {
            1 => 1 << 20,
            2 => 1 << 10,
            _ => 1 << 7,
        };
        let mut cell = if cell > 0.0 && cell.is_finite() { cell } else { f64::INFINITY };
        for j in 0..d {
            cell = cell.max(window.side(j) / max_cells_per_axis as f64);
        }
        let dims: Vec<usize> = (0..d)
            .map(|j| if cell.is_finite() { ((window.side(j) / cell).floor() as usize).max(1) } else { 1 })
            .collect();
        let total: usize = dims.iter().product();
        let lower = window.lower().to_vec();
        let mut index = CellIndex { coords, d, lower, cell, dims, starts: vec![0; total + 1], order: vec![0; n] };
        let keys: Vec<usize> = (0..n).map(|i| index.key_of(&coords[i * d..(i + 1) * d])).collect();
        for &k in &keys {
            index.starts[k + 1] += 1;
        }
        for c in 0..total {
            index.starts[c + 1] += index.starts[c];
        }
        let mut fill = index.starts.clone();
        for (i, &k) in keys.iter().enumerate() {
            index.order[fill[k]] = i;
            fill[k] += 1;
        }
        index
    }

    fn axis_cell(&self, j: usize, v: f64) -> usize {
        if !self.cell.is_finite() {
            return 0;
        }
        let c = ((v - self.lower[j]) / self.cell).floor();
        if c < 0.0 {
            0
        } else {
            (c as usize).min(self.dims[j] - 1)
        }
    }

    fn key_of(&self, x: &[f64]) -> usize {
        let mut k = 0;
        for j in 0..self.d {
            k = k * self.dims[j] + self.axis_cell(j, x[j]);
        }
        k
    }

    /// Calls `f(index, squared distance)` for every indexed point within `r` of `x`.
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, x: &[f64], r: f64, mut f: F) {
        let d = self.d;
        let r2 = r * r;
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for j in 0..d {
            lo[j] = self.axis_cell(j, x[j] - r);
            hi[j] = self.axis_cell(j, x[j] + r);
        }
        let mut cur = lo;
        loop {
            let mut key = 0;
            for j in 0..d {
                key = key * self.dims[j] + cur[j];
            }
            for &i in &self.order[self.starts[key]..self.starts[key + 1]] {
                let p = &self.coords[i * d..(i + 1) * d];
                let mut s = 0.0;
                for j in 0..d {
                    let t = p[j] - x[j];
                    s += t * t;
                }
                if s <= r2 {
                    f(i, s);
                }
            }
            // odometer over the cell box
            let mut j = d;
            loop {
                if j == 0 {
                    return;
                }
                j -= 1;
                if cur[j] < hi[j] {
                    cur[j] += 1;
                    break;
                }
                cur[j] = lo[j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_brute_force() {
        let w = Window::square(10.0, 2).unwrap();
        let mut s = 1u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            (s >> 11) as f64 / (1u64 << 53) as f64 * 10.0
        };
        let pts: Vec<f64> = (0..400).map(|_| next()).collect();
        let idx = CellIndex::new(&pts, &w, 0.7);
        for q in 0..20 {
            let x = [pts[2 * q], pts[2 * q + 1]];
            let mut got = Vec::new();
            idx.for_each_within(&x, 1.3, |i, _| got.push(i));
            got.sort();
            let want: Vec<usize> = (0..200)
                .filter(|&i| ((pts[2 * i] - x[0]).powi(2) + (pts[2 * i + 1] - x[1]).powi(2)).sqrt() <= 1.3)
                .collect();
            assert_eq!(got, want);
        }
    }
}

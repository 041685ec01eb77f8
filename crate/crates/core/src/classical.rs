//! Border-corrected (minus-sampling) K and L estimators in the space domain.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::invert::{signed_l, unit_ball_volume, RadiiGrid};
use crate::neighbors::CellIndex;
use crate::patterns::MultiTypePattern;

/// Border-corrected cross K with reference points of type `y` counting
/// points of type `x`. Radii without an eligible reference point are NaN.
pub fn border_corrected_k(pattern: &MultiTypePattern, x: &str, y: &str, radii: &RadiiGrid) -> Result<Vec<f64>> {
    let tx = pattern.require_type(x)?;
    let ty = pattern.require_type(y)?;
    let window = pattern.window();
    let n_x = pattern.count_of(tx);
    if n_x == 0 {
        return Err(Error::Domain(format!("no points of type {x}; intensity estimate is zero")));
    }
    let lambda_x = n_x as f64 / window.volume();
    let xs = pattern.coords_of(tx);
    let ys = pattern.coords_of(ty);
    let d = pattern.dim();
    let r = radii.values();
    let rmax = r.iter().copied().fold(0.0, f64::max);
    let index = CellIndex::new(&xs, window, rmax.max(1e-9));

    // (numerator, denominator) per radius, summed over reference points
    let (num, den) = ys
        .par_chunks_exact(d)
        .fold(
            || (vec![0.0f64; r.len()], vec![0usize; r.len()]),
            |(mut num, mut den), yp| {
                let b = window.distance_to_boundary(yp);
                let mut dists = Vec::new();
                index.for_each_within(yp, rmax, |_, d2| {
                    // coincident points, including the point itself when X = Y, never count
                    if d2 > 0.0 {
                        dists.push(d2.sqrt());
                    }
                });
                dists.sort_by(f64::total_cmp);
                for (i, &ri) in r.iter().enumerate() {
                    if b >= ri {
                        den[i] += 1;
                        num[i] += dists.partition_point(|&v| v <= ri) as f64;
                    }
                }
                (num, den)
            },
        )
        .reduce(
            || (vec![0.0; r.len()], vec![0; r.len()]),
            |(mut a, mut b), (c, e)| {
                a.iter_mut().zip(&c).for_each(|(u, v)| *u += v);
                b.iter_mut().zip(&e).for_each(|(u, v)| *u += v);
                (a, b)
            },
        );
    Ok(num
        .iter()
        .zip(&den)
        .map(|(&n, &m)| if m == 0 { f64::NAN } else { n / (m as f64 * lambda_x) })
        .collect())
}

/// Border-corrected L, with NaN passed through.
pub fn border_corrected_l(pattern: &MultiTypePattern, x: &str, y: &str, radii: &RadiiGrid) -> Result<Vec<f64>> {
    let d = pattern.dim();
    let k = border_corrected_k(pattern, x, y, radii)?;
    Ok(k.iter()
        .map(|&v| if v.is_nan() { f64::NAN } else { signed_l(&[v], d)[0] })
        .collect())
}

/// `|b_d| r^d`, the K function of a Poisson process.
pub fn poisson_k(r: f64, d: usize) -> f64 {
    unit_ball_volume(d) * r.powi(d as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::Window;

    #[test]
    fn two_points_distance_one() {
        let w = Window::new(vec![-1e4, -1e4], vec![1e4, 1e4]).unwrap();
        let p = MultiTypePattern::from_blocks(w.clone(), vec![("X".into(), vec![0.0, 0.0]), ("Y".into(), vec![1.0, 0.0])]).unwrap();
        let radii = RadiiGrid::new(vec![0.5, 1.0, 2.0]).unwrap();
        let k = border_corrected_k(&p, "X", "Y", &radii).unwrap();
        let lx = 1.0 / w.volume();
        assert_eq!(k[0], 0.0);
        assert!((k[1] * lx - 1.0).abs() < 1e-12);
        assert!((k[2] * lx - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_self_excluded() {
        let w = Window::square(10.0, 2).unwrap();
        let p = MultiTypePattern::from_blocks(w, vec![("X".into(), vec![5.0, 5.0])]).unwrap();
        let radii = RadiiGrid::linspace(0.0, 4.0, 5).unwrap();
        assert!(border_corrected_k(&p, "X", "X", &radii).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_when_nothing_eligible() {
        let w = Window::square(10.0, 2).unwrap();
        let p = MultiTypePattern::from_blocks(w, vec![("X".into(), vec![1.0, 1.0, 5.0, 5.0])]).unwrap();
        let radii = RadiiGrid::new(vec![1.0, 6.0]).unwrap();
        let k = border_corrected_k(&p, "X", "X", &radii).unwrap();
        assert!(k[0].is_finite());
        assert!(k[1].is_nan());
    }
}

//! Monte-Carlo global envelopes (MAD) under independence nulls.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::invert::SummaryCurve;
use crate::patterns::{estimate_intensities, MultiTypePattern};
use crate::pipeline::{default_radii, EstimationConfig, Estimator, StatRequest};
use crate::simulate::{replicate_seed, seeded_rng, sim_poisson, sim_shift};
use rand::Rng;

/// How null patterns are generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NullKind {
    /// Each target type replaced by a homogeneous Poisson pattern at its estimated intensity.
    PoissonMarginal,
    /// The second type translated by a uniform random toroidal shift.
    RandomShiftPair,
}

impl std::str::FromStr for NullKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" | "poisson-marginal" => Ok(NullKind::PoissonMarginal),
            "shift" | "random-shift-pair" => Ok(NullKind::RandomShiftPair),
            _ => Err(Error::Config(format!("null must be 'poisson-marginal' or 'random-shift-pair', got '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeConfig {
    pub n_sim: usize,
    pub alpha: f64,
    pub null: NullKind,
    pub seed: u64,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        EnvelopeConfig { n_sim: 199, alpha: 0.05, null: NullKind::PoissonMarginal, seed: 1 }
    }
}

impl EnvelopeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        let needed = ((1.0 / self.alpha).ceil() as usize).saturating_sub(1).max(19);
        if self.n_sim < needed {
            return Err(Error::Config(format!("n_sim = {} is too small; need at least {needed}", self.n_sim)));
        }
        Ok(())
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Global MAD envelope: pointwise median `T0` plus and minus the
/// `ceil((1 - alpha)(n + 1))`-th smallest maximal deviation.
pub fn mad_global_envelope(curves: &[Vec<f64>], alpha: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = curves.len();
    if n == 0 {
        return Err(Error::Shape("no simulated curves".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let len = curves[0].len();
    if curves.iter().any(|c| c.len() != len) {
        return Err(Error::Shape("simulated curves are on different radii grids".into()));
    }
    let center: Vec<f64> = (0..len)
        .map(|j| {
            let mut col: Vec<f64> = curves.iter().map(|c| c[j]).filter(|v| !v.is_nan()).collect();
            if col.is_empty() {
                f64::NAN
            } else {
                median(&mut col)
            }
        })
        .collect();
    let mut dev: Vec<f64> = curves
        .iter()
        .map(|c| {
            c.iter()
                .zip(&center)
                .map(|(a, b)| (a - b).abs())
                .filter(|v| !v.is_nan())
                .fold(0.0, f64::max)
        })
        .collect();
    dev.sort_by(f64::total_cmp);
    let rank = ((1.0 - alpha) * (n + 1) as f64 - 1e-9).ceil() as usize;
    if rank > n {
        return Err(Error::Config(format!("{n} simulations are too few for alpha = {alpha}")));
    }
    let c = dev[rank.max(1) - 1];
    Ok((center.iter().map(|t| t - c).collect(), center.iter().map(|t| t + c).collect()))
}

/// One null pattern for `req`, built from the observed pattern.
pub fn null_pattern(pattern: &MultiTypePattern, req: &StatRequest, null: NullKind, seed: u64) -> Result<MultiTypePattern> {
    let mut rng = seeded_rng(seed);
    let window = pattern.window().clone();
    match null {
        NullKind::PoissonMarginal => {
            let lambdas = estimate_intensities(pattern);
            let blocks = req
                .targets()
                .into_iter()
                .map(|l| {
                    let lambda = lambdas.get(&l).unwrap_or(0.0);
                    (l, sim_poisson(&window, lambda, &mut rng))
                })
                .collect();
            MultiTypePattern::from_blocks(window, blocks)
        }
        NullKind::RandomShiftPair => {
            if req.x == req.y {
                return Err(Error::Config("the random-shift null needs two distinct types".into()));
            }
            let x = pattern.coords_of(pattern.require_type(&req.x)?);
            let y = pattern.coords_of(pattern.require_type(&req.y)?);
            let s: Vec<f64> = window.sides().iter().map(|l| rng.random::<f64>() * l).collect();
            let y = sim_shift(&y, &window, &s);
            MultiTypePattern::from_blocks(window, vec![(req.x.clone(), x), (req.y.clone(), y)])
        }
    }
}

/// Observed curve of `req` with a global envelope from `config.n_sim` null patterns.
/// Partial statistics are refused.
pub fn poisson_null_envelope(
    pattern: &MultiTypePattern,
    req: &StatRequest,
    estimation: &EstimationConfig,
    config: &EnvelopeConfig,
) -> Result<SummaryCurve> {
    if !req.covariates.is_empty() {
        return Err(Error::UnsupportedNull(
            "no valid null model is known for partial statistics (simulating from the partial null is an open problem); \
             request a statistic without covariates"
                .into(),
        ));
    }
    config.validate()?;
    let radii = estimation.radii.clone().unwrap_or_else(|| default_radii(pattern));
    let labels = req.targets();
    let observed = Estimator::new(pattern, &labels, estimation)?.curve_on(req, &radii)?.0;
    let sims: Vec<Vec<f64>> = (0..config.n_sim as u64)
        .into_par_iter()
        .map(|i| {
            let p = null_pattern(pattern, req, config.null, replicate_seed(config.seed, i))?;
            Ok(Estimator::new(&p, &labels, estimation)?.curve_on(req, &radii)?.0.values)
        })
        .collect::<Result<_>>()?;
    let band = mad_global_envelope(&sims, config.alpha)?;
    Ok(SummaryCurve { band: Some(band), ..observed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_curves_zero_width() {
        let curves = vec![vec![1.0, 2.0, 3.0]; 20];
        let (lo, hi) = mad_global_envelope(&curves, 0.05).unwrap();
        assert_eq!(lo, vec![1.0, 2.0, 3.0]);
        assert_eq!(hi, lo);
    }

    #[test]
    fn offsets_order_statistic() {
        // deviations from the median 0 are {1, 0, 1}; rank ceil(0.5 * 4) = 2 picks 1
        let curves = vec![vec![-1.0, -1.0], vec![0.0, 0.0], vec![1.0, 1.0]];
        let (lo, hi) = mad_global_envelope(&curves, 0.5).unwrap();
        assert_eq!(lo, vec![-1.0, -1.0]);
        assert_eq!(hi, vec![1.0, 1.0]);
        // alpha = 0.8 gives rank ceil(0.2 * 4) = 1, which picks 0
        let (lo, _) = mad_global_envelope(&curves, 0.8).unwrap();
        assert_eq!(lo, vec![0.0, 0.0]);
    }

    #[test]
    fn mismatched_grids() {
        let curves = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(matches!(mad_global_envelope(&curves, 0.1), Err(Error::Shape(_))));
    }

    #[test]
    fn config_validation() {
        assert!(EnvelopeConfig::default().validate().is_ok());
        let small = EnvelopeConfig { n_sim: 10, ..Default::default() };
        assert!(small.validate().is_err());
        let tight = EnvelopeConfig { n_sim: 50, alpha: 0.01, ..Default::default() };
        assert!(tight.validate().is_err());
    }
}

//! Monte-Carlo checks of the simulators, oracles and estimators.

use std::f64::consts::PI;

use partialk::classical::{border_corrected_k, border_corrected_l};
use partialk::envelopes::{poisson_null_envelope, EnvelopeConfig, NullKind};
use partialk::oracle::{cluster_spectra, thomas_k, ClusterModelSpec};
use partialk::partial::wishart_debias_check;
use partialk::pipeline::{EstimationConfig, Estimator, StatRequest};
use partialk::simulate::{
    replicate_seed, seeded_rng, sim_cluster, sim_cox_given_latent, sim_poisson, sim_scenario, ScenarioSpec,
};
use partialk::{MultiTypePattern, RadiiGrid, StatKind, Window};
use num_complex::Complex64;

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn poisson_counts_follow_their_law() {
    let w = Window::square(300.0, 2).unwrap();
    let counts: Vec<f64> = (0..1000).map(|i| sim_poisson(&w, 0.01, &mut seeded_rng(i)).len() as f64 / 2.0).collect();
    let (m, v) = mean_var(&counts);
    // mean 900 with standard error 30 / sqrt(1000); variance 900 with standard error ~ 900 sqrt(2 / 999)
    assert!((m - 900.0).abs() < 4.0 * 30.0 / 1000f64.sqrt(), "mean {m}");
    assert!((v - 900.0).abs() < 4.0 * 900.0 * (2.0 / 999.0f64).sqrt(), "variance {v}");
}

#[test]
fn cluster_offspring_count_with_edge_loss() {
    let w = Window::square(100.0, 2).unwrap();
    let (mu, sigma) = (4.0, 2.0);
    let mut ratio = Vec::new();
    for i in 0..300 {
        let mut rng = seeded_rng(i);
        let parents = sim_poisson(&w, 0.01, &mut rng);
        let kids = sim_cluster(&parents, mu, sigma, &w, &mut rng);
        if !parents.is_empty() {
            ratio.push(kids.len() as f64 / parents.len() as f64);
        }
    }
    let (m, _) = mean_var(&ratio);
    // at most the fraction of the window within 3 sigma of the boundary is lost
    let buffer = 1.0 - (100.0 - 12.0 * sigma).powi(2) / 100.0f64.powi(2);
    assert!(m <= mu * 1.01 && m >= mu * (1.0 - buffer), "mean offspring per parent {m}");
}

#[test]
fn tri_independent_expected_counts() {
    let mut z = Vec::new();
    let mut x = Vec::new();
    for i in 0..30 {
        let p = sim_scenario(&ScenarioSpec::new("tri-independent", i).unwrap()).unwrap();
        z.push(p.count_of(p.require_type("Z").unwrap()) as f64);
        x.push(p.count_of(p.require_type("X").unwrap()) as f64);
    }
    let (mz, _) = mean_var(&z);
    let (mx, _) = mean_var(&x);
    assert!((mz - 900.0).abs() < 4.0 * 30.0 / 30f64.sqrt());
    // window clipping loses a few percent of 2700
    assert!(mx < 2700.0 && mx > 2700.0 * 0.95, "X count {mx}");
}

#[test]
fn cluster_spectrum_matches_multitaper_estimate() {
    // stationary clusters: parents on a dilated window
    let spec = ClusterModelSpec::new(0.01, 3.0, 2.0, 3.0, 2.0, 2).unwrap();
    let w = Window::square(300.0, 2).unwrap();
    let outer = w.dilate(12.0).unwrap();
    let cfg = EstimationConfig { kmax: Some(vec![0.12]), ..Default::default() };
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..20 {
        let mut rng = seeded_rng(replicate_seed(77, i));
        let parents = sim_poisson(&outer, 0.01, &mut rng);
        let x = sim_cluster(&parents, 3.0, 2.0, &w, &mut rng);
        let p = MultiTypePattern::from_blocks(w.clone(), vec![("X".into(), x)]).unwrap();
        let est = Estimator::new(&p, p.registry(), &cfg).unwrap();
        let f = est.field();
        for node in 0..f.grid().len() {
            if (f.grid().norm(node) - 0.1).abs() <= 0.005 {
                sum += f.get(node, 0, 0).re;
                n += 1;
            }
        }
    }
    let estimate = sum / n as f64;
    let exact = cluster_spectra(&spec, &[0.1, 0.0])[0].re;
    assert!(((estimate - exact) / exact).abs() < 0.10, "{estimate} vs {exact}");
}

#[test]
fn border_l_of_poisson_is_identity() {
    let w = Window::square(300.0, 2).unwrap();
    let radii = RadiiGrid::linspace(0.0, 20.0, 21).unwrap();
    let mut acc = vec![0.0; radii.len()];
    for i in 0..100 {
        let x = sim_poisson(&w, 0.01, &mut seeded_rng(replicate_seed(5, i)));
        let p = MultiTypePattern::from_blocks(w.clone(), vec![("X".into(), x)]).unwrap();
        for (a, v) in acc.iter_mut().zip(border_corrected_l(&p, "X", "X", &radii).unwrap()) {
            *a += v / 100.0;
        }
    }
    for (l, r) in acc.iter().zip(radii.values()) {
        assert!((l - r).abs() < 0.3, "r={r}: {l}");
    }
}

#[test]
fn thomas_oracle_agrees_with_pair_counts() {
    let w = Window::square(300.0, 2).unwrap();
    let outer = w.dilate(9.0).unwrap();
    let radii = RadiiGrid::new(vec![5.0, 10.0, 15.0]).unwrap();
    let mut acc = [0.0; 3];
    for i in 0..20 {
        let mut rng = seeded_rng(replicate_seed(9, i));
        let parents = sim_poisson(&outer, 0.01, &mut rng);
        let x = sim_cluster(&parents, 3.0, 1.5, &w, &mut rng);
        let p = MultiTypePattern::from_blocks(w.clone(), vec![("X".into(), x)]).unwrap();
        for (a, v) in acc.iter_mut().zip(border_corrected_k(&p, "X", "X", &radii).unwrap()) {
            *a += v / 20.0;
        }
    }
    for (k, &r) in acc.iter().zip(radii.values()) {
        let exact = thomas_k(0.01, 1.5, r);
        assert!(((k - exact) / exact).abs() < 0.1, "r={r}: {k} vs {exact}");
    }
}

#[test]
fn cox_processes_are_conditionally_independent() {
    let w = Window::square(60.0, 2).unwrap();
    let outer = w.dilate(6.0).unwrap();
    let z = sim_poisson(&outer, 0.02, &mut seeded_rng(1));
    // cells on a 3 x 3 grid; X counted in cell c, Y in the same cell
    let cell = |x: &[f64]| (x[0] / 20.0).floor().min(2.0) as usize * 3 + (x[1] / 20.0).floor().min(2.0) as usize;
    let reps = 400;
    let mut cx = vec![vec![0.0; reps]; 9];
    let mut cy = vec![vec![0.0; reps]; 9];
    for r in 0..reps {
        let (x, y) = sim_cox_given_latent(&w, &z, 1.0, 0.25, &mut seeded_rng(1000 + r as u64)).unwrap();
        x.chunks(2).for_each(|p| cx[cell(p)][r] += 1.0);
        y.chunks(2).for_each(|p| cy[cell(p)][r] += 1.0);
    }
    for c in 0..9 {
        let (mx, vx) = mean_var(&cx[c]);
        let (my, vy) = mean_var(&cy[c]);
        if vx == 0.0 || vy == 0.0 {
            continue;
        }
        let cov = cx[c].iter().zip(&cy[c]).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (reps as f64 - 1.0);
        let corr = cov / (vx * vy).sqrt();
        assert!(corr.abs() < 4.0 / (reps as f64).sqrt(), "cell {c}: correlation {corr}");
    }
}

#[test]
fn cox_processes_cross_cluster_unconditionally() {
    let radii = RadiiGrid::new(vec![1.0, 2.0]).unwrap();
    let mut acc = [0.0; 2];
    for i in 0..5 {
        let mut spec = ScenarioSpec::new("cox-squared", replicate_seed(21, i)).unwrap();
        spec = spec.with_window(Window::square(150.0, 2).unwrap());
        let p = sim_scenario(&spec).unwrap();
        for (a, v) in acc.iter_mut().zip(border_corrected_l(&p, "X", "Y", &radii).unwrap()) {
            *a += v / 5.0;
        }
    }
    assert!(acc[0] > 1.0 && acc[1] > 2.0, "{acc:?}");
}

#[test]
fn wishart_schur_mean_scales_by_kept_dimension() {
    let sigma = vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(0.3, 0.1),
        Complex64::new(0.3, -0.1),
        Complex64::new(2.0, 0.0),
    ];
    // one covariate: E[Schur] = (M - 1) / M times the true Schur complement
    let ratio = wishart_debias_check(6, 2, 1, &sigma, 40_000, &mut seeded_rng(3)).unwrap();
    assert!((ratio - 5.0 / 6.0).abs() < 0.01, "{ratio}");
}

#[test]
fn envelope_detects_thomas_clustering() {
    let w = Window::square(100.0, 2).unwrap();
    let outer = w.dilate(9.0).unwrap();
    let cfg = EstimationConfig {
        kmax: Some(vec![0.5]),
        radii: Some(RadiiGrid::linspace(0.5, 4.0, 8).unwrap()),
        ..Default::default()
    };
    let req = StatRequest::new("X", "X", &[], StatKind::L);
    let trials = 20;
    let mut exits = 0;
    for t in 0..trials {
        let mut rng = seeded_rng(replicate_seed(31, t));
        let parents = sim_poisson(&outer, 0.01, &mut rng);
        let x = sim_cluster(&parents, 3.0, 1.5, &w, &mut rng);
        let p = MultiTypePattern::from_blocks(w.clone(), vec![("X".into(), x)]).unwrap();
        let env = EnvelopeConfig { n_sim: 99, alpha: 0.05, null: NullKind::PoissonMarginal, seed: t };
        let c = poisson_null_envelope(&p, &req, &cfg, &env).unwrap();
        let (_, hi) = c.band.as_ref().unwrap();
        if c.values.iter().zip(hi).any(|(v, h)| v > h) {
            exits += 1;
        }
    }
    assert!(exits as f64 >= 0.9 * trials as f64, "{exits} of {trials}");
}

#[test]
fn spectral_k_tracks_pi_r_squared_for_poisson() {
    let w = Window::square(200.0, 2).unwrap();
    let radii = RadiiGrid::linspace(2.0, 12.0, 6).unwrap();
    let cfg = EstimationConfig { kmax: Some(vec![0.5]), ..Default::default() };
    let mut acc = vec![0.0; radii.len()];
    for i in 0..20 {
        let x = sim_poisson(&w, 0.02, &mut seeded_rng(replicate_seed(40, i)));
        let p = MultiTypePattern::from_blocks(w.clone(), vec![("X".into(), x)]).unwrap();
        let est = Estimator::new(&p, p.registry(), &cfg).unwrap();
        let k = est.curve_on(&StatRequest::new("X", "X", &[], StatKind::K), &radii).unwrap().0.values;
        for (a, v) in acc.iter_mut().zip(k) {
            *a += v / 20.0;
        }
    }
    for (k, r) in acc.iter().zip(radii.values()) {
        assert!(((k - PI * r * r) / (PI * r * r)).abs() < 0.1, "r={r}: {k}");
    }
}

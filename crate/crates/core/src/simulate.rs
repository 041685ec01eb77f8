//! Seeded simulation of Poisson, cluster, thinned, shifted and Cox processes,
//! and the named multitype scenarios built from them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::neighbors::CellIndex;
use crate::patterns::{MultiTypePattern, Window};

pub const SCENARIO_IDS: [&str; 8] = [
    "biv-independent",
    "biv-packs",
    "biv-solitary",
    "tri-independent",
    "tri-cooperative",
    "tri-antagonistic",
    "cox-squared",
    "custom",
];

/// Generator used for every simulation: ChaCha8 seeded from a `u64`.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of replicate `i` derived from a base seed.
pub fn replicate_seed(seed: u64, i: u64) -> u64 {
    // splitmix64 step
    let mut z = seed.wrapping_add(i.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite mean");
    dist.sample(rng) as usize
}

/// Homogeneous Poisson process: flat coordinates.
pub fn sim_poisson<R: Rng + ?Sized>(window: &Window, lambda: f64, rng: &mut R) -> Vec<f64> {
    let d = window.dim();
    let n = poisson_count(lambda * window.volume(), rng);
    let mut out = Vec::with_capacity(n * d);
    for _ in 0..n {
        for j in 0..d {
            let u: f64 = rng.random();
            out.push(window.lower()[j] + u * window.side(j));
        }
    }
    out
}

/// Poisson(`mu`) offspring per parent with `N(0, sigma^2 I)` offsets,
/// keeping only offspring inside `window`.
pub fn sim_cluster<R: Rng + ?Sized>(parents: &[f64], mu: f64, sigma: f64, window: &Window, rng: &mut R) -> Vec<f64> {
    let d = window.dim();
    let mut out = Vec::new();
    let mut x = [0.0f64; 3];
    for parent in parents.chunks_exact(d) {
        let n = poisson_count(mu, rng);
        for _ in 0..n {
            for j in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                x[j] = parent[j] + sigma * z;
            }
            if window.contains(&x[..d]) {
                out.extend_from_slice(&x[..d]);
            }
        }
    }
    out
}

/// Dependent thinning with explicit marks and survival uniforms: a point
/// with a higher-marked neighbour within `r` survives iff its uniform is
/// below `p`; other points always survive.
pub fn sim_mark_thinning_with(points: &[f64], window: &Window, r: f64, p: f64, marks: &[f64], trials: &[f64]) -> Vec<f64> {
    let d = window.dim();
    let n = points.len() / d;
    let index = CellIndex::new(points, window, r);
    let mut out = Vec::new();
    for i in 0..n {
        let x = &points[i * d..(i + 1) * d];
        let mut dominated = false;
        if r > 0.0 {
            index.for_each_within(x, r, |j, _| {
                if j != i && marks[j] > marks[i] {
                    dominated = true;
                }
            });
        }
        if !dominated || trials[i] < p {
            out.extend_from_slice(x);
        }
    }
    out
}

/// Dependent thinning with i.i.d. uniform marks (single survival trial per point).
pub fn sim_mark_thinning<R: Rng + ?Sized>(points: &[f64], window: &Window, r: f64, p: f64, rng: &mut R) -> Vec<f64> {
    let n = points.len() / window.dim();
    let marks: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let trials: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    sim_mark_thinning_with(points, window, r, p, &marks, &trials)
}

/// Thinning by another pattern: a point within `r` of any point of `by`
/// survives with probability `p`.
pub fn sim_cross_thinning<R: Rng + ?Sized>(
    points: &[f64],
    by: &[f64],
    window: &Window,
    r: f64,
    p: f64,
    rng: &mut R,
) -> Vec<f64> {
    let d = window.dim();
    let index = CellIndex::new(by, window, r);
    let mut out = Vec::new();
    for x in points.chunks_exact(d) {
        let u: f64 = rng.random();
        let mut near = false;
        if r > 0.0 {
            index.for_each_within(x, r, |_, _| near = true);
        }
        if !near || u < p {
            out.extend_from_slice(x);
        }
    }
    out
}

/// Translation by `s` with periodic wrapping on the window.
pub fn sim_shift(points: &[f64], window: &Window, s: &[f64]) -> Vec<f64> {
    let d = window.dim();
    points
        .chunks_exact(d)
        .flat_map(|x| {
            (0..d).map(move |j| {
                let lo = window.lower()[j];
                let l = window.side(j);
                lo + (x[j] - lo + s[j]).rem_euclid(l)
            })
        })
        .collect()
}

/// Squared Gaussian shot-noise Cox process. `Z` is Poisson on the window
/// dilated by `6a` (only points inside the window are returned); `X` and
/// `Y` are conditionally independent Poisson processes driven by
/// `Lambda(u) = (sum_z exp(-|u - z|^2 / (2 a^2)))^2`.
pub fn sim_cox_squared<R: Rng + ?Sized>(window: &Window, lambda_z: f64, a: f64, rng: &mut R) -> Result<MultiTypePattern> {
    sim_cox_squared_with_grid(window, lambda_z, a, a / 4.0, rng)
}

pub fn sim_cox_squared_with_grid<R: Rng + ?Sized>(
    window: &Window,
    lambda_z: f64,
    a: f64,
    grid_spacing: f64,
    rng: &mut R,
) -> Result<MultiTypePattern> {
    if !(lambda_z > 0.0) || !(a > 0.0) || !(grid_spacing > 0.0) {
        return Err(Error::Domain("cox-squared needs lambda_z > 0, a > 0 and grid spacing > 0".into()));
    }
    let d = window.dim();
    let outer = window.dilate(6.0 * a)?;
    let z_all = sim_poisson(&outer, lambda_z, rng);
    let (x, y) = sim_cox_given_latent(window, &z_all, a, grid_spacing, rng)?;
    let z: Vec<f64> = z_all.chunks_exact(d).filter(|p| window.contains(p)).flatten().copied().collect();
    MultiTypePattern::from_blocks(window.clone(), vec![("X".into(), x), ("Y".into(), y), ("Z".into(), z)])
}

/// Conditionally independent `X` and `Y` on `window` given latent points
/// `z` (which may extend beyond the window), by thinning a homogeneous
/// process at 1.25 times the largest field value on a grid of spacing `grid_spacing`.
pub fn sim_cox_given_latent<R: Rng + ?Sized>(
    window: &Window,
    z: &[f64],
    a: f64,
    grid_spacing: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = window.dim();
    let cutoff = 8.0 * a;
    let reach = window.dilate(cutoff)?;
    let index = CellIndex::new(z, &reach, cutoff);
    let inv = 1.0 / (2.0 * a * a);
    let field = |u: &[f64]| -> f64 {
        let mut s = 0.0;
        index.for_each_within(u, cutoff, |_, d2| s += (-d2 * inv).exp());
        s * s
    };
    let counts: Vec<usize> = (0..d).map(|j| (window.side(j) / grid_spacing).ceil() as usize + 1).collect();
    let total: usize = counts.iter().product();
    let mut peak = 0.0f64;
    let mut u = [0.0f64; 3];
    for idx in 0..total {
        let mut rem = idx;
        for j in (0..d).rev() {
            let c = rem % counts[j];
            rem /= counts[j];
            u[j] = (window.lower()[j] + c as f64 * grid_spacing).min(window.upper()[j]);
        }
        peak = peak.max(field(&u[..d]));
    }
    let bound = 1.25 * peak;
    // the field peaks near latent points, so check the bound there as well
    for p in z.chunks_exact(d).filter(|p| window.contains(p)) {
        let v = field(p);
        if v > bound {
            return Err(Error::Resource(format!(
                "dominating rate {bound:e} is below the field value {v:e} at a latent point; \
                 use a finer evaluation grid than {grid_spacing}"
            )));
        }
    }
    let thin = |rng: &mut R| -> Result<Vec<f64>> {
        if bound == 0.0 {
            return Ok(Vec::new());
        }
        let cand = sim_poisson(window, bound, rng);
        let mut out = Vec::new();
        for x in cand.chunks_exact(d) {
            let v = field(x);
            if v > bound {
                return Err(Error::Resource(format!(
                    "dominating rate {bound:e} exceeded ({v:e}); use a finer evaluation grid than {grid_spacing}"
                )));
            }
            let t: f64 = rng.random();
            if t * bound < v {
                out.extend_from_slice(x);
            }
        }
        Ok(out)
    };
    let x = thin(rng)?;
    let y = thin(rng)?;
    Ok((x, y))
}

/// A named scenario with parameter values, window and seed.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub id: String,
    pub params: Vec<(String, f64)>,
    pub window: Window,
    pub seed: u64,
}

fn default_params(id: &str) -> Option<Vec<(&'static str, f64)>> {
    Some(match id {
        "biv-independent" => vec![("lambda_y", 0.01), ("mu_x", 3.0), ("sigma_x", 1.5)],
        "biv-packs" => vec![("lambda_y", 0.01), ("mu_x0", 3.0), ("sigma_x0", 1.5), ("mu_x", 1.0), ("sigma_x", 1.0)],
        "biv-solitary" => vec![("lambda_y", 0.01), ("mu_x0", 15.0), ("sigma_x0", 1.5), ("r_x", 3.0), ("p_x", 0.1)],
        "tri-independent" => vec![("lambda_z", 0.01), ("mu_x", 3.0), ("sigma_x", 2.0), ("mu_y", 3.0), ("sigma_y", 2.0)],
        "tri-cooperative" => vec![("lambda_z", 0.01), ("mu_y", 3.0), ("sigma_y", 2.0), ("mu_x", 1.0), ("sigma_x", 2.0)],
        "tri-antagonistic" => vec![
            ("lambda_z", 0.01),
            ("mu_y", 3.0),
            ("sigma_y", 2.0),
            ("mu_x0", 10.0),
            ("sigma_x0", 2.0),
            ("r_x", 3.0),
            ("p_x", 0.1),
        ],
        "cox-squared" => vec![("lambda_z", 0.01), ("a", 1.0)],
        "custom" => vec![
            ("lambda_z", 0.01),
            ("mu_x", 3.0),
            ("sigma_x", 2.0),
            ("mu_y", 3.0),
            ("sigma_y", 2.0),
            ("shift_1", 0.0),
            ("shift_2", 0.0),
            ("shift_3", 0.0),
        ],
        _ => return None,
    })
}

impl ScenarioSpec {
    /// Scenario with its published parameters on `[0, 300]^2`.
    pub fn new(id: &str, seed: u64) -> Result<Self> {
        let params = default_params(id).ok_or_else(|| Error::UnknownScenario(id.to_string()))?;
        Ok(ScenarioSpec {
            id: id.to_string(),
            params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            window: Window::square(300.0, 2).expect("valid window"),
            seed,
        })
    }

    pub fn with_window(mut self, window: Window) -> Self {
        self.window = window;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn get(&self, key: &str) -> f64 {
        self.params
            .iter()
            .find(|(k, _)| k == key)
            .map(|p| p.1)
            .unwrap_or_else(|| panic!("parameter {key} missing"))
    }

    /// Overrides one parameter; unknown keys are configuration errors.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        match self.params.iter_mut().find(|(k, _)| k == key) {
            Some(p) => {
                p.1 = value;
                Ok(())
            }
            None => Err(Error::Config(format!(
                "scenario {} has no parameter '{key}' (parameters: {})",
                self.id,
                self.params.iter().map(|p| p.0.as_str()).collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    /// Applies `key = value` lines (`#` comments allowed).
    pub fn apply_params_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected key = value, got '{line}'") })?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse { line: i + 1, msg: format!("bad number '{}'", v.trim()) })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        for (k, v) in &self.params {
            let ok = if k.starts_with("sigma") || k == "a" {
                *v > 0.0
            } else if k == "p_x" {
                (0.0..=1.0).contains(v)
            } else if k.starts_with("shift") {
                v.is_finite()
            } else {
                *v >= 0.0
            };
            if !ok || !v.is_finite() {
                return Err(Error::Config(format!("invalid value {v} for {k}")));
            }
        }
        Ok(())
    }

    /// Header comment lines recording the scenario.
    pub fn comment_lines(&self) -> Vec<String> {
        let mut out = vec![format!("scenario: {}", self.id), format!("seed: {}", self.seed)];
        out.extend(self.params.iter().map(|(k, v)| format!("param: {k} = {v}")));
        out
    }
}

/// Simulates a named scenario; latent processes are not emitted.
pub fn sim_scenario(spec: &ScenarioSpec) -> Result<MultiTypePattern> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    let w = &spec.window;
    let p = |k: &str| spec.get(k);
    let blocks: Vec<(String, Vec<f64>)> = match spec.id.as_str() {
        "biv-independent" => {
            let y = sim_poisson(w, p("lambda_y"), &mut rng);
            let x = sim_cluster(&y, p("mu_x"), p("sigma_x"), w, &mut rng);
            vec![("X".into(), x), ("Y".into(), y)]
        }
        "biv-packs" => {
            let y = sim_poisson(w, p("lambda_y"), &mut rng);
            let x0 = sim_cluster(&y, p("mu_x0"), p("sigma_x0"), w, &mut rng);
            let x = sim_cluster(&x0, p("mu_x"), p("sigma_x"), w, &mut rng);
            vec![("X".into(), x), ("Y".into(), y)]
        }
        "biv-solitary" => {
            let y = sim_poisson(w, p("lambda_y"), &mut rng);
            let x0 = sim_cluster(&y, p("mu_x0"), p("sigma_x0"), w, &mut rng);
            let x = sim_mark_thinning(&x0, w, p("r_x"), p("p_x"), &mut rng);
            vec![("X".into(), x), ("Y".into(), y)]
        }
        "tri-independent" => {
            let z = sim_poisson(w, p("lambda_z"), &mut rng);
            let x = sim_cluster(&z, p("mu_x"), p("sigma_x"), w, &mut rng);
            let y = sim_cluster(&z, p("mu_y"), p("sigma_y"), w, &mut rng);
            vec![("X".into(), x), ("Y".into(), y), ("Z".into(), z)]
        }
        "tri-cooperative" => {
            let z = sim_poisson(w, p("lambda_z"), &mut rng);
            let y = sim_cluster(&z, p("mu_y"), p("sigma_y"), w, &mut rng);
            let x = sim_cluster(&y, p("mu_x"), p("sigma_x"), w, &mut rng);
            vec![("X".into(), x), ("Y".into(), y), ("Z".into(), z)]
        }
        "tri-antagonistic" => {
            let z = sim_poisson(w, p("lambda_z"), &mut rng);
            let y = sim_cluster(&z, p("mu_y"), p("sigma_y"), w, &mut rng);
            let x0 = sim_cluster(&z, p("mu_x0"), p("sigma_x0"), w, &mut rng);
            let x = sim_cross_thinning(&x0, &y, w, p("r_x"), p("p_x"), &mut rng);
            vec![("X".into(), x), ("Y".into(), y), ("Z".into(), z)]
        }
        "cox-squared" => return sim_cox_squared(w, p("lambda_z"), p("a"), &mut rng),
        "custom" => {
            // parents on a dilated window so offspring in the window are stationary
            let margin = 6.0 * p("sigma_x").max(p("sigma_y"));
            let outer = w.dilate(margin)?;
            let z_all = sim_poisson(&outer, p("lambda_z"), &mut rng);
            let mut x = sim_cluster(&z_all, p("mu_x"), p("sigma_x"), w, &mut rng);
            let y = sim_cluster(&z_all, p("mu_y"), p("sigma_y"), w, &mut rng);
            let shift: Vec<f64> = (1..=w.dim()).map(|j| p(&format!("shift_{j}"))).collect();
            if shift.iter().any(|&s| s != 0.0) {
                x = sim_shift(&x, w, &shift);
            }
            let z = z_all.chunks_exact(w.dim()).filter(|q| w.contains(q)).flatten().copied().collect();
            vec![("X".into(), x), ("Y".into(), y), ("Z".into(), z)]
        }
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    MultiTypePattern::from_blocks(w.clone(), blocks)
}

//! Shared fixtures for the criterion benchmarks.

use partialk::simulate::{sim_scenario, ScenarioSpec};
use partialk::{estimate_intensities, make_grid, make_sine_tapers, IntensityEstimates, MultiTypePattern, TaperFamily, Window, WavenumberGrid};

/// Inputs of one spectral estimate: a trivariate pattern with its tapers, grid and intensities.
pub struct Fixture {
    pub pattern: MultiTypePattern,
    pub tapers: TaperFamily,
    pub grid: WavenumberGrid,
    pub intensities: IntensityEstimates,
}

/// Cooperative trivariate scenario on a square of the given side, grid up to `kmax`.
pub fn fixture(side: f64, kmax: f64) -> Fixture {
    let spec = ScenarioSpec::new("tri-cooperative", 1)
        .expect("known scenario")
        .with_window(Window::square(side, 2).expect("valid window"));
    let pattern = sim_scenario(&spec).expect("simulation");
    let tapers = make_sine_tapers(pattern.window(), 8);
    let grid = make_grid(pattern.window(), &[kmax, kmax], None, 4_000_000).expect("grid");
    let intensities = estimate_intensities(&pattern);
    Fixture { pattern, tapers, grid, intensities }
}

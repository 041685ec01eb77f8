//! Partial K, L and pair-correlation functions of multitype spatial point
//! patterns, estimated from multitaper spectral matrices.
//!
//! The pipeline runs patterns → tapers → spectral matrix → partial
//! (Schur complement) → inversion to `C`, `K`, `L` or `pcf`. Simulators,
//! closed-form oracles, a border-corrected baseline and global envelopes
//! support validation.

pub mod classical;
pub mod envelopes;
pub mod error;
pub mod herm;
pub mod invert;
pub mod neighbors;
pub mod nufft;
pub mod oracle;
pub mod partial;
pub mod patterns;
pub mod pipeline;
pub mod quad;
pub mod simulate;
pub mod special;
pub mod spectra;
pub mod tapers;

pub use classical::{border_corrected_k, border_corrected_l};
pub use envelopes::{mad_global_envelope, poisson_null_envelope, EnvelopeConfig, NullKind};
pub use error::{Error, Result};
pub use invert::{RadialConfig, RadialSpectrum, RadiiGrid, Route, StatKind, SummaryCurve};
pub use oracle::{cluster_partial_spectra, cluster_spectra, cox_squared_partial_spectrum, oracle_summary, ClusterModelSpec};
pub use partial::{partial_matrix_fast, partial_matrix_schur, PartialSpec};
pub use patterns::{estimate_intensities, IntensityEstimates, MultiTypePattern, Window};
pub use pipeline::{estimate, kmax_diagnostic, EstimationConfig, Estimator, RunReport, StatRequest};
pub use simulate::{sim_scenario, ScenarioSpec};
pub use spectra::{make_grid, multitaper_matrix, DftMethod, SpectralMatrixField, WavenumberGrid};
pub use tapers::{make_sine_tapers, TaperFamily};

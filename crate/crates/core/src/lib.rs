//! Finite element laboratory for a clamped Euler–Bernoulli beam carrying a
//! damped tip body, with Kelvin–Voigt, thermoelastic and nonsimple variants.
//!
//! The pipeline is `model` → `discretize` → (`spectral`, `timeint`) →
//! `analysis`.

pub mod analysis;
pub mod discretize;
pub mod model;
pub mod spectral;
pub mod timeint;

pub use analysis::{
    classify_abscissas, classify_stability, decay_window, equivalence_harness, fit_decay, fit_decay_series,
    AnalysisError, ClassificationOptions, DecayFit, DecayModel, EquivalenceReport, LevelAbscissa, Match,
    StabilityClassification, Verdict,
};
pub use discretize::{assemble, dissipation_rate, energy, refine, DiscreteSystem, DiscretizeError, DofLayout};
pub use model::{
    build_tip_matrices, tip_ode_residual, validate_hypothesis, Boundary, BoundaryMatrices, ConstitutiveLaw,
    CouplingConvention, HypothesisCheck, LawKind, ModelError, ModelSpec, ReferenceParameters, TipBody,
};
pub use spectral::{
    resolvent_norm, spectrum, sweep_resolvent, ResolventSample, ResolventSweep, SlopeFit, SpectralError,
    SpectrumReport,
};
pub use timeint::{energy_ledger_check, integrate, InitialData, IntegrateOptions, TimeIntError, Trajectory};

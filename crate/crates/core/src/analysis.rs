//! Decay fits, stability classification over mesh refinement, and the
//! hybrid versus free-end comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::{assemble, DiscretizeError};
use crate::model::{Boundary, ModelError, ModelSpec, TipBody};
use crate::spectral::{least_squares, spectrum, SpectralError};
use crate::timeint::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("decay window [{t0}, {t1}] holds {got} samples, need at least 20")]
    TooFewSamples { t0: f64, t1: f64, got: usize },
    #[error("energy {energy} at t = {t} is not positive; the window is fully decayed")]
    NonPositiveEnergy { t: f64, energy: f64 },
    #[error("decay window [{t0}, {t1}] is empty or outside the data span [{start}, {end}]")]
    InvalidWindow { t0: f64, t1: f64, start: f64, end: f64 },
    #[error("times and energies differ in length ({times} vs {energies})")]
    LengthMismatch { times: usize, energies: usize },
    #[error("classification needs at least 3 strictly increasing levels, got {0:?}")]
    Levels(Vec<usize>),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// `log E` linear in `t`; the exponent is the rate.
    Exponential,
    /// `log E` linear in `log t`; the exponent is `d log E / d log t`.
    Algebraic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub window: (f64, f64),
    pub model: DecayModel,
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Least-squares decay fit of `energies(times)` restricted to `window`.
pub fn fit_decay_series(
    times: &[f64],
    energies: &[f64],
    window: (f64, f64),
    model: DecayModel,
) -> Result<DecayFit, AnalysisError> {
    if times.len() != energies.len() {
        return Err(AnalysisError::LengthMismatch {
            times: times.len(),
            energies: energies.len(),
        });
    }
    let (t0, t1) = window;
    let start = times.first().copied().unwrap_or(f64::NAN);
    let end = times.last().copied().unwrap_or(f64::NAN);
    let min_t = if model == DecayModel::Algebraic { 0.0 } else { f64::NEG_INFINITY };
    if !(t0 < t1 && t0 >= start && t1 <= end && t0 > min_t) {
        return Err(AnalysisError::InvalidWindow { t0, t1, start, end });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &e) in times.iter().zip(energies) {
        if t < t0 || t > t1 {
            continue;
        }
        if !(e > 0.0) {
            return Err(AnalysisError::NonPositiveEnergy { t, energy: e });
        }
        xs.push(match model {
            DecayModel::Exponential => t,
            DecayModel::Algebraic => t.ln(),
        });
        ys.push(e.ln());
    }
    if xs.len() < 20 {
        return Err(AnalysisError::TooFewSamples { t0, t1, got: xs.len() });
    }
    let (slope, intercept) = least_squares(&xs, &ys);
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let total: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let residual: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r_squared = if total > 0.0 { (1.0 - residual / total).clamp(0.0, 1.0) } else { 1.0 };
    Ok(DecayFit {
        window,
        model,
        exponent: slope,
        intercept,
        r_squared,
        samples: xs.len(),
    })
}

pub fn fit_decay(traj: &Trajectory, window: (f64, f64), model: DecayModel) -> Result<DecayFit, AnalysisError> {
    fit_decay_series(&traj.times, &traj.energies, window, model)
}

/// `[5/ω₁, min(0.5/|abscissa|, t_final)]`: past the initial transient and
/// before the slowest discrete mode takes over.
pub fn decay_window(first_frequency: f64, abscissa: f64, t_final: f64) -> (f64, f64) {
    let t0 = 5.0 / first_frequency;
    let tail = if abscissa == 0.0 { f64::INFINITY } else { 0.5 / abscissa.abs() };
    (t0, tail.min(t_final))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ExponentiallyStable,
    NotExponentiallyStable,
    Inconclusive,
}

/// Abscissa of one refinement level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelAbscissa {
    pub n_elements: usize,
    /// Abscissa over the resolved band; this drives the verdict.
    pub abscissa: f64,
    /// Abscissa over the whole discrete spectrum.
    pub full_abscissa: f64,
    pub zero_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationOptions {
    /// Minimum `|a_coarsest| / |a_finest|` for a trend to zero.
    pub shrink_factor: f64,
    /// Maximum relative change between the two finest levels for a uniform bound.
    pub max_variation: f64,
}

impl Default for ClassificationOptions {
    fn default() -> Self {
        Self {
            shrink_factor: 2.0,
            max_variation: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityClassification {
    pub levels: Vec<LevelAbscissa>,
    pub verdict: Verdict,
    /// Half the coarsest `|abscissa|`.
    pub delta: f64,
    /// `|a_coarsest| / |a_finest|`.
    pub shrink: f64,
    /// `|a_k − a_{k−1}| / |a_{k−1}|` for consecutive levels.
    pub variations: Vec<f64>,
    pub reason: String,
}

/// Verdict from a refinement trend of abscissas.
///
/// * all `|a| ≤ zero tolerance`: not exponentially stable (conservative);
/// * `|a|` shrinks by at least `shrink_factor`: not exponentially stable;
/// * all `a ≤ −δ` and the finest pair varies by less than `max_variation`:
///   exponentially stable;
/// * otherwise inconclusive.
pub fn classify_abscissas(
    levels: &[LevelAbscissa],
    options: ClassificationOptions,
) -> Result<StabilityClassification, AnalysisError> {
    let counts: Vec<usize> = levels.iter().map(|l| l.n_elements).collect();
    if levels.len() < 3 || counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalysisError::Levels(counts));
    }
    let coarse = levels[0].abscissa;
    let fine = levels[levels.len() - 1].abscissa;
    let delta = 0.5 * coarse.abs();
    let shrink = coarse.abs() / fine.abs();
    let variations: Vec<f64> = levels
        .windows(2)
        .map(|w| (w[1].abscissa - w[0].abscissa).abs() / w[0].abscissa.abs())
        .collect();
    let finest_variation = *variations.last().unwrap();

    let (verdict, reason) = if levels.iter().all(|l| l.abscissa.abs() <= l.zero_tolerance) {
        (
            Verdict::NotExponentiallyStable,
            "abscissa is zero to solver tolerance at every level".to_string(),
        )
    } else if shrink >= options.shrink_factor {
        (
            Verdict::NotExponentiallyStable,
            format!("|abscissa| shrinks {shrink:.3}x from n={} to n={}", counts[0], counts[counts.len() - 1]),
        )
    } else if levels.iter().all(|l| l.abscissa <= -delta) && finest_variation < options.max_variation {
        (
            Verdict::ExponentiallyStable,
            format!("abscissa <= -{delta:.3e} at every level, finest-pair variation {finest_variation:.3}"),
        )
    } else {
        (
            Verdict::Inconclusive,
            format!("shrink {shrink:.3}x, finest-pair variation {finest_variation:.3}"),
        )
    };
    Ok(StabilityClassification {
        levels: levels.to_vec(),
        verdict,
        delta,
        shrink,
        variations,
        reason,
    })
}

/// Assembles `spec` at each level, computes the spectrum and classifies.
pub fn classify_stability(
    spec: &ModelSpec,
    levels: &[usize],
    options: ClassificationOptions,
) -> Result<StabilityClassification, AnalysisError> {
    if levels.len() < 3 || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalysisError::Levels(levels.to_vec()));
    }
    let measured: Vec<LevelAbscissa> = levels
        .par_iter()
        .map(|&n| -> Result<LevelAbscissa, AnalysisError> {
            let sys = assemble(spec, n)?;
            let report = spectrum(&sys)?;
            Ok(LevelAbscissa {
                n_elements: n,
                abscissa: report.resolved_abscissa,
                full_abscissa: report.abscissa,
                zero_tolerance: report.zero_tolerance,
            })
        })
        .collect::<Result<_, _>>()?;
    classify_abscissas(&measured, options)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Match {
    Agree,
    Disagree,
    /// At least one side is inconclusive.
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub hybrid: StabilityClassification,
    pub plain: StabilityClassification,
    #[serde(rename = "match")]
    pub matched: Match,
}

/// Classifies `base` with the tip body attached and with a free end.
/// The boundary of `base` is ignored.
pub fn equivalence_harness(
    base: &ModelSpec,
    tip: TipBody,
    levels: &[usize],
    options: ClassificationOptions,
) -> Result<EquivalenceReport, AnalysisError> {
    tip.validate()?;
    let hybrid_spec = base.with_boundary(Boundary::Hybrid(tip));
    let plain_spec = base.with_boundary(Boundary::Free);
    let (hybrid, plain) = rayon::join(
        || classify_stability(&hybrid_spec, levels, options),
        || classify_stability(&plain_spec, levels, options),
    );
    let (hybrid, plain) = (hybrid?, plain?);
    let matched = match (hybrid.verdict, plain.verdict) {
        (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Match::Indeterminate,
        (a, b) if a == b => Match::Agree,
        _ => Match::Disagree,
    };
    Ok(EquivalenceReport { hybrid, plain, matched })
}

//! Spectrum of the pencil `(E, S)` and energy-norm resolvent along `iℝ`.
//!
//! Everything is computed in energy coordinates: with `H = L Lᵀ` the generator
//! is `A = L⁻¹ S L⁻ᵀ`, whose Euclidean norm is the energy norm.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::DiscreteSystem;

/// Largest element count handled by the dense eigensolver.
pub const DENSE_LIMIT: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("eigensolver failed on a {dim}x{dim} generator (energy-norm size {norm:.3e}): {reason}")]
    Eigensolver { dim: usize, norm: f64, reason: String },
    #[error("shifted pencil at {shift} is singular")]
    SingularShift { shift: c64 },
    #[error("resolvent window [{lo}, {hi}] spans less than one decade")]
    WindowTooNarrow { lo: f64, hi: f64 },
    #[error("resolvent window upper end {hi} exceeds the validity ceiling {ceiling}")]
    AboveCeiling { hi: f64, ceiling: f64 },
    #[error("invalid resolvent window [{lo}, {hi}] with {per_decade} points per decade")]
    InvalidWindow { lo: f64, hi: f64, per_decade: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    Dense,
    ShiftInvert,
}

/// Least-squares fit of `−Re λ = C |Im λ|^(−p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchFit {
    /// `(|Im λ_k|, −Re λ_k)` used in the fit.
    pub points: Vec<(f64, f64)>,
    pub exponent: f64,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Sorted by `|Im λ|`, then `Re λ`.
    pub eigenvalues: Vec<c64>,
    /// `max Re λ` over every computed eigenvalue.
    pub abscissa: f64,
    /// `max Re λ` over `|Im λ| ≤ validity_ceiling`.
    pub resolved_abscissa: f64,
    pub validity_ceiling: f64,
    pub spectral_radius: f64,
    /// Real parts below this in magnitude are indistinguishable from 0.
    pub zero_tolerance: f64,
    pub branch_fit: Option<BranchFit>,
    pub n_elements: usize,
    pub method: SpectrumMethod,
}

impl SpectrumReport {
    /// Eigenvalues with `|Im λ|` inside the validity ceiling.
    pub fn resolved(&self) -> impl Iterator<Item = &c64> {
        self.eigenvalues.iter().filter(|l| l.im.abs() <= self.validity_ceiling)
    }

    /// Smallest positive imaginary part.
    pub fn first_frequency(&self) -> Option<f64> {
        self.eigenvalues
            .iter()
            .map(|l| l.im)
            .filter(|im| *im > self.zero_tolerance)
            .min_by(f64::total_cmp)
    }
}

/// Half of the highest frequency the mesh resolves, `½ (πn/ℓ)² √(α/ρ)`.
/// The n-th discrete bending mode sits at about `(πn/ℓ)² √(α/ρ)`.
pub fn validity_ceiling(sys: &DiscreteSystem) -> f64 {
    let spec = sys.spec();
    let k = std::f64::consts::PI * sys.n_elements() as f64 / spec.length;
    0.5 * k * k * (spec.law.alpha() / spec.rho).sqrt()
}

fn frobenius(a: &Mat<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * a[(i, j)];
        }
    }
    acc.sqrt()
}

fn sort_spectrum(values: &mut [c64]) {
    values.sort_by(|a, b| {
        a.im.abs()
            .total_cmp(&b.im.abs())
            .then(a.re.total_cmp(&b.re))
            .then(a.im.total_cmp(&b.im))
    });
}

/// Spectrum of `sys`: dense for `n ≤ DENSE_LIMIT`, shift-invert Arnoldi above.
pub fn spectrum(sys: &DiscreteSystem) -> Result<SpectrumReport, SpectralError> {
    if sys.n_elements() <= DENSE_LIMIT {
        dense_spectrum(sys)
    } else {
        targeted_spectrum(sys, &default_targets(sys), ArnoldiOptions::default())
    }
}

pub fn dense_spectrum(sys: &DiscreteSystem) -> Result<SpectrumReport, SpectralError> {
    let a = sys.generator();
    let values = a.eigenvalues().map_err(|e| SpectralError::Eigensolver {
        dim: a.nrows(),
        norm: frobenius(&a),
        reason: format!("{e:?}"),
    })?;
    Ok(build_report(sys, values, SpectrumMethod::Dense))
}

fn build_report(sys: &DiscreteSystem, mut eigenvalues: Vec<c64>, method: SpectrumMethod) -> SpectrumReport {
    sort_spectrum(&mut eigenvalues);
    let ceiling = validity_ceiling(sys);
    let abscissa = eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let resolved_abscissa = eigenvalues
        .iter()
        .filter(|l| l.im.abs() <= ceiling)
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let spectral_radius = eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let zero_tolerance = 1e-12 * spectral_radius.max(1.0);
    let branch_fit = fit_branch(&eigenvalues, ceiling, zero_tolerance);
    SpectrumReport {
        eigenvalues,
        abscissa,
        resolved_abscissa,
        validity_ceiling: ceiling,
        spectral_radius,
        zero_tolerance,
        branch_fit,
        n_elements: sys.n_elements(),
        method,
    }
}

/// Fit on the upper half of the resolved band. At each frequency only the
/// least damped eigenvalue counts, which selects the branch closest to `iℝ`.
fn fit_branch(eigenvalues: &[c64], ceiling: f64, zero_tolerance: f64) -> Option<BranchFit> {
    let points: Vec<(f64, f64)> = eigenvalues
        .iter()
        .filter(|l| l.im >= 0.5 * ceiling && l.im <= ceiling && -l.re > zero_tolerance)
        .map(|l| (l.im, -l.re))
        .collect();
    let mut branch: Vec<(f64, f64)> = Vec::new();
    for (w, d) in points {
        match branch.last_mut() {
            Some(last) if (w - last.0).abs() <= 1e-6 * w => last.1 = last.1.min(d),
            _ => branch.push((w, d)),
        }
    }
    if branch.len() < 3 {
        return None;
    }
    let xs: Vec<f64> = branch.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = branch.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    Some(BranchFit {
        points: branch,
        exponent: -slope,
        coefficient: intercept.exp(),
    })
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub(crate) fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Eigenpairs `(λ, x)` of `S x = λ E x` in state coordinates.
pub fn eigenpairs(sys: &DiscreteSystem) -> Result<Vec<(c64, Vec<c64>)>, SpectralError> {
    let a = sys.generator();
    let eig = a.eigen().map_err(|e| SpectralError::Eigensolver {
        dim: a.nrows(),
        norm: frobenius(&a),
        reason: format!("{e:?}"),
    })?;
    let dim = a.nrows();
    let u = eig.U();
    let s = eig.S().column_vector();
    let lt = sys.energy_factor().transpose();
    // x = L⁻ᵀ u, applied to real and imaginary parts separately.
    let mut re = Mat::<f64>::from_fn(dim, dim, |i, j| u[(i, j)].re);
    let mut im = Mat::<f64>::from_fn(dim, dim, |i, j| u[(i, j)].im);
    lt.solve_upper_triangular_in_place(re.as_mut());
    lt.solve_upper_triangular_in_place(im.as_mut());
    Ok((0..dim)
        .map(|j| (s[j], (0..dim).map(|i| c64::new(re[(i, j)], im[(i, j)])).collect()))
        .collect())
}

/// Tuning for the shift-invert Arnoldi iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArnoldiOptions {
    pub krylov_dim: usize,
    /// A Ritz value is kept when its estimated eigenvalue error is at most
    /// `tolerance·(1 + |λ|)`.
    pub tolerance: f64,
}

impl Default for ArnoldiOptions {
    fn default() -> Self {
        Self {
            krylov_dim: 64,
            tolerance: 1e-12,
        }
    }
}

/// Shifts spread over the resolved band, about one per six bending modes.
pub fn default_targets(sys: &DiscreteSystem) -> Vec<c64> {
    let spec = sys.spec();
    let scale = (spec.law.alpha() / spec.rho).sqrt() / (spec.length * spec.length);
    let ceiling = validity_ceiling(sys);
    let mut targets = Vec::new();
    let mut k = 1.0;
    loop {
        let w = ((k - 0.5) * std::f64::consts::PI).powi(2) * scale;
        if w > ceiling {
            break;
        }
        targets.push(c64::new(1e-3, w));
        k += 6.0;
    }
    targets.push(c64::new(1e-3, ceiling));
    targets
}

/// Eigenvalues near each target from Arnoldi on `(A − σ)⁻¹`. A Ritz value
/// `θ` maps back to `λ = σ + 1/θ`. `A` is close to normal, so the Ritz
/// residual bounds the eigenvalue error. Working on the pencil `(S − σE)`
/// instead loses about eight digits to the scaling of `E`. Only converged Ritz values
/// are kept, together with their conjugates.
pub fn targeted_spectrum(
    sys: &DiscreteSystem,
    targets: &[c64],
    options: ArnoldiOptions,
) -> Result<SpectrumReport, SpectralError> {
    let a = sys.generator();
    let found: Vec<Vec<c64>> = targets
        .par_iter()
        .map(|&sigma| shift_invert(&a, sigma, options))
        .collect::<Result<_, _>>()?;
    let mut merged: Vec<c64> = Vec::new();
    for lambda in found.into_iter().flatten() {
        for candidate in [lambda, lambda.conj()] {
            let duplicate = merged
                .iter()
                .any(|m| (m - candidate).norm() <= 1e-8 * (1.0 + candidate.norm()));
            if !duplicate {
                merged.push(candidate);
            }
        }
    }
    Ok(build_report(sys, merged, SpectrumMethod::ShiftInvert))
}

fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[c64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn shift_invert(
    a: &Mat<f64>,
    sigma: c64,
    options: ArnoldiOptions,
) -> Result<Vec<c64>, SpectralError> {
    let dim = a.nrows();
    let shifted = Mat::<c64>::from_fn(dim, dim, |i, j| {
        let diag = if i == j { sigma } else { c64::new(0.0, 0.0) };
        c64::new(a[(i, j)], 0.0) - diag
    });
    let lu = shifted.partial_piv_lu();
    let m = options.krylov_dim.min(dim);

    let apply = |v: &[c64]| -> Vec<c64> {
        let mut rhs = Mat::<c64>::from_fn(dim, 1, |i, _| v[i]);
        lu.solve_in_place(rhs.as_mut());
        (0..dim).map(|i| rhs[(i, 0)]).collect()
    };

    let start: Vec<c64> = (0..dim).map(|i| c64::new(1.0 + (i as f64 * 0.7).sin(), 0.0)).collect();
    let n0 = norm(&start);
    let mut basis: Vec<Vec<c64>> = vec![start.iter().map(|x| x / n0).collect()];
    let mut h = Mat::<c64>::zeros(m + 1, m);
    let mut steps = m;
    for j in 0..m {
        let mut w = apply(&basis[j]);
        if w.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(SpectralError::SingularShift { shift: sigma });
        }
        // Modified Gram–Schmidt, repeated once for orthogonality.
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let c = dot(q, &w);
                h[(i, j)] += c;
                for (wk, qk) in w.iter_mut().zip(q) {
                    *wk -= c * qk;
                }
            }
        }
        let beta = norm(&w);
        h[(j + 1, j)] = c64::new(beta, 0.0);
        if beta <= 1e-14 * h[(j, j)].norm().max(1.0) {
            steps = j + 1;
            break;
        }
        basis.push(w.iter().map(|x| x / beta).collect());
    }

    let hm = Mat::<c64>::from_fn(steps, steps, |i, j| h[(i, j)]);
    let eig = hm.eigen().map_err(|err| SpectralError::Eigensolver {
        dim: steps,
        norm: f64::NAN,
        reason: format!("{err:?}"),
    })?;
    let ritz = eig.S().column_vector();
    let vectors = eig.U();
    let tail = h[(steps, steps - 1)].norm();
    let mut out = Vec::new();
    for k in 0..steps {
        let theta = ritz[k];
        if theta.norm() == 0.0 {
            continue;
        }
        let col: Vec<c64> = (0..steps).map(|i| vectors[(i, k)]).collect();
        let residual = tail * vectors[(steps - 1, k)].norm() / norm(&col);
        let lambda = sigma + theta.inv();
        // δλ ≈ δθ / θ².
        if residual / theta.norm_sqr() <= options.tolerance * (1.0 + lambda.norm()) {
            out.push(lambda);
        }
    }
    Ok(out)
}

/// One resolvent evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventSample {
    pub lambda: f64,
    /// `‖(iλ − A)⁻¹‖` in the energy norm; infinite if exactly singular.
    pub norm: f64,
    /// `σ_min ≤ 1e-13·σ_max`: `iλ` is numerically an eigenvalue.
    pub near_singular: bool,
}

/// Generator cached for repeated resolvent evaluations.
#[derive(Debug, Clone)]
pub struct ResolventOperator {
    a: Mat<f64>,
}

impl ResolventOperator {
    pub fn new(sys: &DiscreteSystem) -> Self {
        Self { a: sys.generator() }
    }

    pub fn generator(&self) -> &Mat<f64> {
        &self.a
    }

    pub fn sample(&self, lambda: f64) -> Result<ResolventSample, SpectralError> {
        let dim = self.a.nrows();
        let shifted = Mat::<c64>::from_fn(dim, dim, |i, j| {
            let diag = if i == j { c64::new(0.0, lambda) } else { c64::new(0.0, 0.0) };
            diag - c64::new(self.a[(i, j)], 0.0)
        });
        let sv = shifted.singular_values().map_err(|e| SpectralError::Eigensolver {
            dim,
            norm: frobenius(&self.a),
            reason: format!("{e:?}"),
        })?;
        let max = sv.first().copied().unwrap_or(0.0);
        let min = sv.last().copied().unwrap_or(0.0);
        Ok(ResolventSample {
            lambda,
            norm: 1.0 / min,
            near_singular: min <= 1e-13 * max,
        })
    }
}

/// `‖(iλ − A)⁻¹‖` in the energy norm.
pub fn resolvent_norm(sys: &DiscreteSystem, lambda: f64) -> Result<ResolventSample, SpectralError> {
    ResolventOperator::new(sys).sample(lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SlopeFit {
    Fitted {
        slope: f64,
        intercept: f64,
        /// Envelope points `(λ, norm)` used in the fit.
        points: Vec<(f64, f64)>,
    },
    Refused {
        reason: String,
    },
}

impl SlopeFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            SlopeFit::Fitted { slope, .. } => Some(*slope),
            SlopeFit::Refused { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventSweep {
    /// Strictly increasing in `lambda`.
    pub samples: Vec<ResolventSample>,
    pub fit: SlopeFit,
    pub fit_window: (f64, f64),
}

/// Resolvent norms on `[λ_min, λ_max]`: log-spaced samples plus every
/// eigenfrequency in the window, so each peak is hit. The slope is fitted on
/// the local maxima (the envelope) in log-log coordinates.
pub fn sweep_resolvent(
    sys: &DiscreteSystem,
    lambda_min: f64,
    lambda_max: f64,
    points_per_decade: usize,
) -> Result<ResolventSweep, SpectralError> {
    if !(lambda_min > 0.0 && lambda_max > lambda_min && lambda_max.is_finite() && points_per_decade > 0) {
        return Err(SpectralError::InvalidWindow {
            lo: lambda_min,
            hi: lambda_max,
            per_decade: points_per_decade,
        });
    }
    if lambda_max / lambda_min < 10.0 {
        return Err(SpectralError::WindowTooNarrow {
            lo: lambda_min,
            hi: lambda_max,
        });
    }
    let ceiling = validity_ceiling(sys);
    if lambda_max > ceiling {
        return Err(SpectralError::AboveCeiling {
            hi: lambda_max,
            ceiling,
        });
    }
    let op = ResolventOperator::new(sys);
    let frequencies: Vec<f64> = op
        .a
        .eigenvalues()
        .map_err(|e| SpectralError::Eigensolver {
            dim: op.a.nrows(),
            norm: frobenius(&op.a),
            reason: format!("{e:?}"),
        })?
        .iter()
        .map(|l| l.im)
        .filter(|w| *w >= lambda_min && *w <= lambda_max)
        .collect();

    let decades = (lambda_max / lambda_min).log10();
    let count = (decades * points_per_decade as f64).ceil() as usize;
    let mut grid: Vec<(f64, bool)> = (0..=count)
        .map(|k| (lambda_min * 10f64.powf(decades * k as f64 / count as f64), false))
        .collect();
    grid.last_mut().unwrap().0 = lambda_max;
    grid.extend(frequencies.iter().map(|w| (*w, true)));
    grid.sort_by(|a, b| a.0.total_cmp(&b.0));
    grid.dedup_by(|b, a| {
        let same = (a.0 - b.0).abs() <= 1e-12 * a.0;
        if same {
            a.1 |= b.1;
        }
        same
    });

    let samples: Vec<ResolventSample> = grid
        .par_iter()
        .map(|(lambda, _)| op.sample(*lambda))
        .collect::<Result<_, _>>()?;
    let at_eigenfrequency: Vec<bool> = grid.iter().map(|g| g.1).collect();
    let fit = envelope_fit(&samples, &at_eigenfrequency);
    Ok(ResolventSweep {
        samples,
        fit,
        fit_window: (lambda_min, lambda_max),
    })
}

fn envelope_fit(samples: &[ResolventSample], at_eigenfrequency: &[bool]) -> SlopeFit {
    let masked = samples.iter().filter(|s| s.near_singular).count();
    if 2 * masked >= samples.len() {
        return SlopeFit::Refused {
            reason: format!("{masked} of {} samples are near-singular", samples.len()),
        };
    }
    let height = |s: &ResolventSample| if s.near_singular { f64::INFINITY } else { s.norm };
    let last = samples.len() - 1;
    let mut peaks = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let left = (i > 0).then(|| height(&samples[i - 1]));
        let right = (i < last).then(|| height(&samples[i + 1]));
        let h = height(s);
        let is_peak = match (left, right) {
            (Some(l), Some(r)) => h >= l && h >= r,
            // Window ends count only when they sit on an eigenfrequency.
            (None, Some(r)) => at_eigenfrequency[i] && h >= r,
            (Some(l), None) => at_eigenfrequency[i] && h >= l,
            (None, None) => false,
        };
        if is_peak {
            peaks.push(*s);
        }
    }
    let singular_peaks = peaks.iter().filter(|p| p.near_singular).count();
    if peaks.is_empty() || 2 * singular_peaks >= peaks.len() {
        return SlopeFit::Refused {
            reason: format!("{singular_peaks} of {} envelope peaks are singular", peaks.len()),
        };
    }
    let points: Vec<(f64, f64)> = peaks
        .iter()
        .filter(|p| !p.near_singular)
        .map(|p| (p.lambda, p.norm))
        .collect();
    if points.len() < 3 {
        return SlopeFit::Refused {
            reason: format!("only {} envelope peaks in the window", points.len()),
        };
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    SlopeFit::Fitted {
        slope,
        intercept,
        points,
    }
}

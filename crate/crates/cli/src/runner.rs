//! Executes the stages of a scenario and assembles the report.

use std::path::Path;

use beamlab_core::{
    assemble, classify_stability, decay_window, equivalence_harness, fit_decay, integrate, spectrum,
    sweep_resolvent, validate_hypothesis, Boundary, DecayFit, DiscreteSystem, EquivalenceReport, HypothesisCheck,
    InitialData, IntegrateOptions, SlopeFit, SpectralError, SpectrumReport, StabilityClassification, Trajectory,
};
use serde::Serialize;

use crate::config::{BoundaryKind, InitialKind, ScenarioConfig, Stage};
use crate::error::CliError;
use crate::output::{csv, triplets, write_atomic};

#[derive(Debug, Serialize)]
pub struct Report {
    pub tool: Tool,
    pub parameters: ScenarioConfig,
    pub hypothesis: Option<HypothesisCheck>,
    pub spectrum: Option<SpectrumSummary>,
    pub resolvent: Option<ResolventSummary>,
    pub simulation: Option<SimulationSummary>,
    pub decay: Option<DecayFit>,
    pub compare: Option<EquivalenceReport>,
    pub assertions: Vec<AssertionResult>,
}

#[derive(Debug, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Serialize)]
pub struct SpectrumSummary {
    pub n_elements: usize,
    pub dim: usize,
    pub abscissa: f64,
    pub resolved_abscissa: f64,
    pub validity_ceiling: f64,
    pub spectral_radius: f64,
    pub zero_tolerance: f64,
    pub first_frequency: Option<f64>,
    pub branch_fit: Option<beamlab_core::spectral::BranchFit>,
    pub classification: Option<StabilityClassification>,
}

#[derive(Debug, Serialize)]
pub struct ResolventSummary {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub samples: usize,
    pub near_singular: usize,
    pub fit: SlopeFit,
}

#[derive(Debug, Serialize)]
pub struct SimulationSummary {
    pub dt: f64,
    pub steps: usize,
    pub t_final: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub dissipated: f64,
    pub relative_drift: f64,
    pub max_balance_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssertionResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Lazily computed intermediate results shared between stages.
struct Context<'a> {
    config: &'a ScenarioConfig,
    sys: Option<DiscreteSystem>,
    spectrum: Option<SpectrumReport>,
    trajectory: Option<Trajectory>,
}

impl<'a> Context<'a> {
    fn system(&mut self) -> Result<&DiscreteSystem, CliError> {
        if self.sys.is_none() {
            let sys = assemble(&self.config.model_spec(), self.config.discretization.n_elements)
                .map_err(CliError::numerical)?;
            self.sys = Some(sys);
        }
        Ok(self.sys.as_ref().unwrap())
    }

    fn spectrum(&mut self) -> Result<&SpectrumReport, CliError> {
        if self.spectrum.is_none() {
            let report = spectrum(self.system()?).map_err(CliError::numerical)?;
            self.spectrum = Some(report);
        }
        Ok(self.spectrum.as_ref().unwrap())
    }

    fn first_frequency(&mut self) -> Result<f64, CliError> {
        self.spectrum()?
            .first_frequency()
            .ok_or_else(|| CliError::Numerical("spectrum has no oscillatory eigenvalue".into()))
    }

    fn trajectory(&mut self) -> Result<&Trajectory, CliError> {
        if self.trajectory.is_none() {
            let sim = &self.config.simulate;
            let sys = self.system()?;
            let initial = match sim.initial {
                InitialKind::FirstMode => InitialData::FirstMode,
                InitialKind::SmoothPolynomial => InitialData::SmoothPolynomial,
                InitialKind::FromFile => InitialData::FromVector(read_state(
                    sim.initial_file.as_deref().expect("validated"),
                    sys.dim(),
                )?),
            };
            let x0 = initial.state(sys).map_err(CliError::numerical)?;
            let traj = integrate(sys, &x0, sim.dt, sim.t_final, IntegrateOptions::default())
                .map_err(CliError::numerical)?;
            self.trajectory = Some(traj);
        }
        Ok(self.trajectory.as_ref().unwrap())
    }
}

fn read_state(path: &Path, dim: usize) -> Result<Vec<f64>, CliError> {
    let key = "simulate.initial_file";
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{key}: cannot read {}: {e}", path.display())))?;
    let values = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| CliError::Config(format!("{key}: `{t}`: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != dim {
        return Err(CliError::Config(format!(
            "{key}: expected {dim} values for this mesh, found {}",
            values.len()
        )));
    }
    Ok(values)
}

/// Window errors come from the user's `[resolvent]` bounds.
fn resolvent_error(e: SpectralError) -> CliError {
    match e {
        SpectralError::InvalidWindow { .. } | SpectralError::WindowTooNarrow { .. } | SpectralError::AboveCeiling { .. } => {
            CliError::Config(format!("resolvent: {e}"))
        }
        other => CliError::numerical(other),
    }
}

/// Runs every stage listed in `config.run` (in pipeline order) and writes
/// the outputs to `out_dir`.
pub fn run(config: &ScenarioConfig, out_dir: &Path) -> Result<Report, CliError> {
    let stages = |s: Stage| config.run.contains(&s);
    let mut ctx = Context {
        config,
        sys: None,
        spectrum: None,
        trajectory: None,
    };
    let mut report = Report {
        tool: Tool {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        },
        parameters: config.clone(),
        hypothesis: None,
        spectrum: None,
        resolvent: None,
        simulation: None,
        decay: None,
        compare: None,
        assertions: Vec::new(),
    };

    if config.model.boundary == BoundaryKind::Hybrid || stages(Stage::Compare) {
        let check = validate_hypothesis(&config.tip.0);
        if !check.holds {
            eprintln!(
                "warning: tip damping hypothesis fails (margin {:.3e}); boundary dissipation may change sign",
                check.margin
            );
        }
        report.hypothesis = Some(check);
    }

    if stages(Stage::Spectrum) {
        let classification = if config.spectrum.classify {
            Some(
                classify_stability(&config.model_spec(), &config.discretization.levels, config.compare.options())
                    .map_err(CliError::numerical)?,
            )
        } else {
            None
        };
        let dim = ctx.system()?.dim();
        let s = ctx.spectrum()?;
        write_atomic(out_dir, "spectrum.csv", &csv("re,im", s.eigenvalues.iter().map(|l| vec![l.re, l.im])))?;
        report.spectrum = Some(SpectrumSummary {
            n_elements: s.n_elements,
            dim,
            abscissa: s.abscissa,
            resolved_abscissa: s.resolved_abscissa,
            validity_ceiling: s.validity_ceiling,
            spectral_radius: s.spectral_radius,
            zero_tolerance: s.zero_tolerance,
            first_frequency: s.first_frequency(),
            branch_fit: s.branch_fit.clone(),
            classification,
        });
    }

    if stages(Stage::Resolvent) {
        let r = &config.resolvent;
        let lo = match r.lambda_min {
            Some(lo) => lo,
            None => ctx.first_frequency()?,
        };
        let hi = r.lambda_max.unwrap_or(lo * 10f64.powf(r.decades));
        let sweep = sweep_resolvent(ctx.system()?, lo, hi, r.points_per_decade).map_err(resolvent_error)?;
        write_atomic(
            out_dir,
            "resolvent.csv",
            &csv("lambda,norm", sweep.samples.iter().map(|s| vec![s.lambda, s.norm])),
        )?;
        report.resolvent = Some(ResolventSummary {
            lambda_min: lo,
            lambda_max: hi,
            samples: sweep.samples.len(),
            near_singular: sweep.samples.iter().filter(|s| s.near_singular).count(),
            fit: sweep.fit,
        });
    }

    if stages(Stage::Simulate) || stages(Stage::Decay) {
        let every = config.simulate.output_every;
        let traj = ctx.trajectory()?;
        let last = traj.n_steps();
        let rows = (0..=last).filter(|k| k % every == 0 || *k == last).map(|k| {
            vec![
                traj.times[k],
                traj.energies[k],
                traj.dissipation_integral[k],
                traj.balance_residual[k],
            ]
        });
        write_atomic(
            out_dir,
            "energy.csv",
            &csv("t,energy,dissipation_cumulative,balance_residual", rows),
        )?;
        report.simulation = Some(SimulationSummary {
            dt: traj.dt,
            steps: last,
            t_final: traj.times[last],
            initial_energy: traj.energies[0],
            final_energy: traj.energies[last],
            dissipated: traj.dissipation_integral[last],
            relative_drift: traj.relative_drift(),
            max_balance_residual: traj.balance_residual.iter().copied().fold(0.0, f64::max),
        });
    }

    if stages(Stage::Decay) {
        let d = &config.decay;
        let w1 = ctx.first_frequency()?;
        let abscissa = ctx.spectrum()?.resolved_abscissa;
        let (t0, t1) = decay_window(w1, abscissa, config.simulate.t_final);
        let window = (d.t0.unwrap_or(t0), d.t1.unwrap_or(t1));
        let fit = fit_decay(ctx.trajectory()?, window, d.model).map_err(CliError::numerical)?;
        report.decay = Some(fit);
    }

    if stages(Stage::Compare) {
        let c = &config.compare;
        let base = config.model_spec().with_boundary(Boundary::Free);
        let r = equivalence_harness(&base, config.tip.0, &c.levels, c.options()).map_err(CliError::numerical)?;
        report.compare = Some(r);
    }

    report.assertions = check_assertions(config, &report);
    let json = serde_json::to_string_pretty(&report).map_err(CliError::numerical)?;
    write_atomic(out_dir, "report.json", &(json + "\n"))?;
    Ok(report)
}

fn check_assertions(config: &ScenarioConfig, report: &Report) -> Vec<AssertionResult> {
    let a = &config.assertions;
    let mut out = Vec::new();
    let mut push = |name: &str, value: Option<String>, passed: bool, wanted: String| {
        let detail = match value {
            Some(v) => format!("got {v}, wanted {wanted}"),
            None => format!("not computed by this run, wanted {wanted}"),
        };
        out.push(AssertionResult {
            name: name.to_string(),
            passed,
            detail,
        });
    };
    let in_range = |x: f64, r: [f64; 2]| r[0] <= x && x <= r[1];

    if let Some(want) = a.verdict {
        let got = report.spectrum.as_ref().and_then(|s| s.classification.as_ref()).map(|c| c.verdict);
        push("verdict", got.map(|v| format!("{v:?}")), got == Some(want), format!("{want:?}"));
    }
    if let Some(want) = a.equivalence_match {
        let got = report.compare.as_ref().map(|c| c.matched);
        let agree = got == Some(beamlab_core::Match::Agree);
        push("match", got.map(|m| format!("{m:?}")), got.is_some() && agree == want, format!("agree = {want}"));
    }
    if let Some(max) = a.max_abscissa {
        let got = report.spectrum.as_ref().map(|s| s.resolved_abscissa);
        push("max_abscissa", got.map(|x| format!("{x:e}")), got.is_some_and(|x| x <= max), format!("<= {max:e}"));
    }
    if let Some(range) = a.resolvent_slope {
        let got = report.resolvent.as_ref().and_then(|r| r.fit.slope());
        push(
            "resolvent_slope",
            got.map(|x| format!("{x}")),
            got.is_some_and(|x| in_range(x, range)),
            format!("in {range:?}"),
        );
    }
    if let Some(range) = a.decay_exponent {
        let got = report.decay.as_ref().map(|d| d.exponent);
        push(
            "decay_exponent",
            got.map(|x| format!("{x}")),
            got.is_some_and(|x| in_range(x, range)),
            format!("in {range:?}"),
        );
    }
    if let Some(max) = a.max_energy_drift {
        let got = report.simulation.as_ref().map(|s| s.relative_drift);
        push("max_energy_drift", got.map(|x| format!("{x:e}")), got.is_some_and(|x| x <= max), format!("<= {max:e}"));
    }
    if let Some(max) = a.max_balance_residual {
        let got = report.simulation.as_ref().map(|s| s.max_balance_residual);
        push(
            "max_balance_residual",
            got.map(|x| format!("{x:e}")),
            got.is_some_and(|x| x <= max),
            format!("<= {max:e}"),
        );
    }
    out
}

/// Writes `E.txt` and `S.txt` for the configured mesh.
pub fn export_matrices(config: &ScenarioConfig, out_dir: &Path) -> Result<(), CliError> {
    let sys = assemble(&config.model_spec(), config.discretization.n_elements).map_err(CliError::numerical)?;
    for (name, m) in [("E.txt", sys.e()), ("S.txt", sys.s())] {
        let entries = DiscreteSystem::triplets(m);
        write_atomic(out_dir, name, &triplets(m.nrows(), m.ncols(), &entries))?;
    }
    Ok(())
}

//! Scenario file: TOML with one table per stage. Every key has a default and
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use beamlab_core::analysis::{ClassificationOptions, DecayModel, Verdict};
use beamlab_core::model::{
    Boundary, ConstitutiveLaw, CouplingConvention, LawKind, ModelSpec, ReferenceParameters, TipBody,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Spectrum,
    Resolvent,
    Simulate,
    Decay,
    Compare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub run: Vec<Stage>,
    pub model: ModelSection,
    pub tip: TipSection,
    pub discretization: DiscretizationSection,
    pub spectrum: SpectrumSection,
    pub resolvent: ResolventSection,
    pub simulate: SimulateSection,
    pub decay: DecaySection,
    pub compare: CompareSection,
    pub output: OutputSection,
    #[serde(rename = "assert")]
    pub assertions: AssertSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let reference = ReferenceParameters::default();
        Self {
            run: vec![Stage::Spectrum],
            model: ModelSection::default(),
            tip: TipSection(reference.tip),
            discretization: DiscretizationSection::default(),
            spectrum: SpectrumSection::default(),
            resolvent: ResolventSection::default(),
            simulate: SimulateSection::default(),
            decay: DecaySection::default(),
            compare: CompareSection::default(),
            output: OutputSection::default(),
            assertions: AssertSection::default(),
        }
    }
}

/// Tip body parameters; used only with `boundary = "hybrid"` and by `compare`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "TipFields", into = "TipFields")]
pub struct TipSection(pub TipBody);

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TipFields {
    mass: f64,
    offset: f64,
    inertia: f64,
    gamma: f64,
    gamma_star: f64,
}

impl Default for TipFields {
    fn default() -> Self {
        ReferenceParameters::default().tip.into()
    }
}

impl From<TipBody> for TipFields {
    fn from(t: TipBody) -> Self {
        Self {
            mass: t.mass,
            offset: t.offset,
            inertia: t.inertia,
            gamma: t.gamma,
            gamma_star: t.gamma_star,
        }
    }
}

impl From<TipFields> for TipSection {
    fn from(t: TipFields) -> Self {
        Self(TipBody::new(t.mass, t.offset, t.inertia, t.gamma, t.gamma_star))
    }
}

impl From<TipSection> for TipFields {
    fn from(t: TipSection) -> Self {
        t.0.into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Hybrid,
    Free,
}

/// Coefficients of every law; only those of the selected law are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub law: LawKind,
    pub boundary: BoundaryKind,
    pub coupling: CouplingConvention,
    pub rho: f64,
    pub length: f64,
    pub alpha: f64,
    pub alpha0: f64,
    pub m_couple: f64,
    pub c_heat: f64,
    pub kappa: f64,
    pub k_star: f64,
    pub mu: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let r = ReferenceParameters::default();
        Self {
            law: LawKind::Elastic,
            boundary: BoundaryKind::Hybrid,
            coupling: CouplingConvention::default(),
            rho: r.rho,
            length: r.length,
            alpha: r.alpha,
            alpha0: r.alpha0,
            m_couple: r.m_couple,
            c_heat: r.c_heat,
            kappa: r.kappa,
            k_star: r.k_star,
            mu: r.mu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationSection {
    /// Mesh for spectrum, resolvent, simulation and matrix export.
    pub n_elements: usize,
    /// Refinement levels for stability classification.
    pub levels: Vec<usize>,
}

impl Default for DiscretizationSection {
    fn default() -> Self {
        Self {
            n_elements: 64,
            levels: vec![16, 32, 64],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    /// Also classify stability over `discretization.levels`.
    pub classify: bool,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { classify: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolventSection {
    /// Defaults to the first eigenfrequency.
    pub lambda_min: Option<f64>,
    /// Defaults to `decades` decades above `lambda_min`.
    pub lambda_max: Option<f64>,
    pub decades: f64,
    pub points_per_decade: usize,
}

impl Default for ResolventSection {
    fn default() -> Self {
        Self {
            lambda_min: None,
            lambda_max: None,
            decades: 2.0,
            points_per_decade: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    FirstMode,
    SmoothPolynomial,
    FromFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub initial: InitialKind,
    /// Whitespace-separated state vector, for `initial = "from_file"`;
    /// relative paths resolve against the config file.
    pub initial_file: Option<PathBuf>,
    pub dt: f64,
    pub t_final: f64,
    /// Write every k-th row of energy.csv.
    pub output_every: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            initial: InitialKind::SmoothPolynomial,
            initial_file: None,
            dt: 0.01,
            t_final: 10.0,
            output_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecaySection {
    pub model: DecayModel,
    /// Defaults to `5/ω₁`.
    pub t0: Option<f64>,
    /// Defaults to `min(0.5/|abscissa|, simulate.t_final)`.
    pub t1: Option<f64>,
}

impl Default for DecaySection {
    fn default() -> Self {
        Self {
            model: DecayModel::Algebraic,
            t0: None,
            t1: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    pub levels: Vec<usize>,
    pub shrink_factor: f64,
    pub max_variation: f64,
}

impl Default for CompareSection {
    fn default() -> Self {
        let o = ClassificationOptions::default();
        Self {
            levels: vec![16, 32, 64],
            shrink_factor: o.shrink_factor,
            max_variation: o.max_variation,
        }
    }
}

impl CompareSection {
    pub fn options(&self) -> ClassificationOptions {
        ClassificationOptions {
            shrink_factor: self.shrink_factor,
            max_variation: self.max_variation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Relative paths resolve against the config file; `--out` overrides.
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

/// Checks evaluated after the run; with `--assert` a failure exits with 3.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssertSection {
    pub verdict: Option<Verdict>,
    #[serde(rename = "match")]
    pub equivalence_match: Option<bool>,
    pub max_abscissa: Option<f64>,
    pub resolvent_slope: Option<[f64; 2]>,
    pub decay_exponent: Option<[f64; 2]>,
    pub max_energy_drift: Option<f64>,
    pub max_balance_residual: Option<f64>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if config.output.dir.is_relative() {
            config.output.dir = base.join(&config.output.dir);
        }
        if let Some(file) = &config.simulate.initial_file {
            if file.is_relative() {
                config.simulate.initial_file = Some(base.join(file));
            }
        }
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, why: &str| Err(CliError::Config(format!("{key}: {why}")));
        self.model_spec()
            .validate()
            .map_err(|e| CliError::Config(format!("model/tip: {e}")))?;
        if self.discretization.n_elements < 2 {
            return bad("discretization.n_elements", "must be at least 2");
        }
        for (key, levels) in [
            ("discretization.levels", &self.discretization.levels),
            ("compare.levels", &self.compare.levels),
        ] {
            if levels.len() < 3 || levels.windows(2).any(|w| w[0] >= w[1]) || levels[0] < 2 {
                return bad(key, "need at least 3 strictly increasing element counts, each >= 2");
            }
        }
        if !(self.simulate.dt.is_finite() && self.simulate.dt > 0.0) {
            return bad("simulate.dt", "must be positive");
        }
        if !(self.simulate.t_final.is_finite() && self.simulate.t_final >= self.simulate.dt) {
            return bad("simulate.t_final", "must be at least simulate.dt");
        }
        if self.simulate.output_every == 0 {
            return bad("simulate.output_every", "must be at least 1");
        }
        if self.simulate.initial == InitialKind::FromFile && self.simulate.initial_file.is_none() {
            return bad("simulate.initial_file", "required when initial = \"from_file\"");
        }
        if self.resolvent.points_per_decade == 0 {
            return bad("resolvent.points_per_decade", "must be at least 1");
        }
        if !(self.resolvent.decades.is_finite() && self.resolvent.decades >= 1.0) {
            return bad("resolvent.decades", "must be at least 1");
        }
        if !(self.compare.shrink_factor > 1.0) {
            return bad("compare.shrink_factor", "must exceed 1");
        }
        if !(self.compare.max_variation > 0.0) {
            return bad("compare.max_variation", "must be positive");
        }
        Ok(())
    }

    pub fn law(&self) -> ConstitutiveLaw {
        let m = &self.model;
        match m.law {
            LawKind::Elastic => ConstitutiveLaw::Elastic { alpha: m.alpha },
            LawKind::KelvinVoigt => ConstitutiveLaw::KelvinVoigt {
                alpha: m.alpha,
                alpha0: m.alpha0,
            },
            LawKind::ThermoTypeI => ConstitutiveLaw::ThermoTypeI {
                alpha: m.alpha,
                m_couple: m.m_couple,
                c_heat: m.c_heat,
                kappa: m.kappa,
            },
            LawKind::ThermoTypeII => ConstitutiveLaw::ThermoTypeII {
                alpha: m.alpha,
                m_couple: m.m_couple,
                c_heat: m.c_heat,
                k_star: m.k_star,
            },
            LawKind::Nonsimple => ConstitutiveLaw::NonsimpleThermo {
                alpha: m.alpha,
                mu: m.mu,
                m_couple: m.m_couple,
                c_heat: m.c_heat,
                kappa: m.kappa,
            },
        }
    }

    pub fn model_spec(&self) -> ModelSpec {
        let boundary = match self.model.boundary {
            BoundaryKind::Hybrid => Boundary::Hybrid(self.tip.0),
            BoundaryKind::Free => Boundary::Free,
        };
        ModelSpec::new(self.law(), self.model.rho, self.model.length, boundary).with_coupling(self.model.coupling)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ScenarioConfig::parse("").unwrap();
        assert_eq!(c, ScenarioConfig::default());
        assert_eq!(c.model_spec(), ReferenceParameters::default().hybrid(LawKind::Elastic));
    }

    #[test]
    fn sections_override_defaults() {
        let c = ScenarioConfig::parse(
            r#"
            run = ["spectrum", "compare"]
            [model]
            law = "kelvin_voigt"
            boundary = "free"
            alpha0 = 0.2
            [tip]
            gamma = 2.0
            "#,
        )
        .unwrap();
        assert_eq!(c.run, [Stage::Spectrum, Stage::Compare]);
        assert_eq!(c.law(), ConstitutiveLaw::KelvinVoigt { alpha: 1.0, alpha0: 0.2 });
        assert_eq!(c.tip.0.gamma, 2.0);
        assert_eq!(c.tip.0.mass, 1.0);
        assert_eq!(c.model_spec().boundary, Boundary::Free);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let err = ScenarioConfig::parse("[tip]\ngamaa = 1.0\n").unwrap_err();
        assert!(err.message().contains("gamaa"), "{}", err.message());
        let err = ScenarioConfig::parse("[modle]\nlaw = \"elastic\"\n").unwrap_err();
        assert!(err.message().contains("modle"));
        let err = ScenarioConfig::parse("[model]\nlaw = \"plastic\"\n").unwrap_err();
        assert!(err.message().contains("plastic"));
    }

    #[test]
    fn invalid_values_name_their_key() {
        let err = ScenarioConfig::parse("[tip]\nmass = -1.0\n").unwrap_err();
        assert!(err.message().contains("mass"), "{}", err.message());
        let err = ScenarioConfig::parse("[discretization]\nlevels = [16, 16, 32]\n").unwrap_err();
        assert!(err.message().contains("discretization.levels"));
        let err = ScenarioConfig::parse("[simulate]\ndt = 0.5\nt_final = 0.1\n").unwrap_err();
        assert!(err.message().contains("simulate.t_final"));
        let err = ScenarioConfig::parse("[simulate]\ninitial = \"from_file\"\n").unwrap_err();
        assert!(err.message().contains("simulate.initial_file"));
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = ScenarioConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(ScenarioConfig::parse(&text).unwrap(), c);
    }
}

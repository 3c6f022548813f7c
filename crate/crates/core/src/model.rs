//! Beam models: tip-body data, constitutive laws and the boundary ODE matrices.
//!
//! The tip body at `x = 0` obeys `B V' + K V = Γ` with `V = (u_t(0), u_xt(0))`,
//! where `B` is the (symmetric) inertia matrix of the container and `K` the
//! non-symmetric damping matrix produced by the granular contents.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("tip body: {field} must be {requirement} (got {value})")]
    InvalidTip {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("constitutive law {law}: coefficient {field} must be finite and > 0 (got {value})")]
    InvalidCoefficient {
        law: LawKind,
        field: &'static str,
        value: f64,
    },
    #[error("model: {field} must be finite and > 0 (got {value})")]
    InvalidModel { field: &'static str, value: f64 },
    #[error("unknown constitutive law '{0}'")]
    UnknownLaw(String),
}

/// Rigid container attached at `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipBody {
    /// Mass `m` of container plus contents.
    pub mass: f64,
    /// Distance `d` from the beam end to the centre of mass.
    pub offset: f64,
    /// Rotary inertia `J` about the centre of mass.
    pub inertia: f64,
    /// Translational damping `γ`.
    pub gamma: f64,
    /// Rotational damping `γ*`.
    pub gamma_star: f64,
}

impl TipBody {
    pub fn new(mass: f64, offset: f64, inertia: f64, gamma: f64, gamma_star: f64) -> Self {
        Self {
            mass,
            offset,
            inertia,
            gamma,
            gamma_star,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = |field, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(ModelError::InvalidTip {
                    field,
                    requirement: "finite and > 0",
                    value,
                })
            }
        };
        let non_negative = |field, value: f64| {
            if value.is_finite() && value >= 0.0 {
                Ok(())
            } else {
                Err(ModelError::InvalidTip {
                    field,
                    requirement: "finite and >= 0",
                    value,
                })
            }
        };
        positive("mass", self.mass)?;
        positive("inertia", self.inertia)?;
        non_negative("offset", self.offset)?;
        non_negative("gamma", self.gamma)?;
        non_negative("gamma_star", self.gamma_star)?;
        Ok(())
    }

    /// `γ = γ* = 0`: the tip stores energy but dissipates none.
    pub fn is_undamped(&self) -> bool {
        self.gamma == 0.0 && self.gamma_star == 0.0
    }

    /// Same body with the granular damping switched off.
    pub fn undamped(&self) -> Self {
        Self {
            gamma: 0.0,
            gamma_star: 0.0,
            ..*self
        }
    }

    fn raw_matrices(&self) -> BoundaryMatrices {
        let (m, d, j) = (self.mass, self.offset, self.inertia);
        let (g, gs) = (self.gamma, self.gamma_star);
        BoundaryMatrices {
            b: [[m, m * d], [m * d, j + m * d * d]],
            k: [[g, 0.0], [d * g, d * gs]],
        }
    }
}

/// `B` and `K` of the tip ODE `B V' + K V = Γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMatrices {
    pub b: [[f64; 2]; 2],
    pub k: [[f64; 2]; 2],
}

impl BoundaryMatrices {
    pub fn det_b(&self) -> f64 {
        self.b[0][0] * self.b[1][1] - self.b[0][1] * self.b[1][0]
    }

    /// Smallest eigenvalue of the symmetric matrix `B` (closed form).
    pub fn min_eigenvalue_b(&self) -> f64 {
        let tr = self.b[0][0] + self.b[1][1];
        let diff = self.b[0][0] - self.b[1][1];
        let off = self.b[0][1];
        0.5 * (tr - (diff * diff + 4.0 * off * off).sqrt())
    }

    /// Quadratic form `V·KV = γw² + dγ wz + dγ* z²`.
    pub fn damping_form(&self, v: [f64; 2]) -> f64 {
        let kv = mat_vec(&self.k, v);
        v[0] * kv[0] + v[1] * kv[1]
    }

    /// `K` form positive definite iff its symmetric part is: `k00 > 0` and
    /// discriminant `(k01 + k10)² − 4 k00 k11 < 0`.
    pub fn damping_is_positive_definite(&self) -> bool {
        let cross = self.k[0][1] + self.k[1][0];
        self.k[0][0] > 0.0 && cross * cross - 4.0 * self.k[0][0] * self.k[1][1] < 0.0
    }

    /// `B·V_dot + K·V − Γ`.
    pub fn residual(&self, v: [f64; 2], v_dot: [f64; 2], gamma: [f64; 2]) -> [f64; 2] {
        let bv = mat_vec(&self.b, v_dot);
        let kv = mat_vec(&self.k, v);
        [bv[0] + kv[0] - gamma[0], bv[1] + kv[1] - gamma[1]]
    }
}

fn mat_vec(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

pub fn build_tip_matrices(tip: &TipBody) -> Result<BoundaryMatrices, ModelError> {
    tip.validate()?;
    Ok(tip.raw_matrices())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub holds: bool,
    /// `2γ* − dγ`; negative when the hypothesis fails.
    pub margin: f64,
}

/// Checks the sufficient dissipativity hypothesis `dγ ≤ 2γ*`.
pub fn validate_hypothesis(tip: &TipBody) -> HypothesisCheck {
    let margin = 2.0 * tip.gamma_star - tip.offset * tip.gamma;
    HypothesisCheck {
        holds: margin >= 0.0,
        margin,
    }
}

/// Residual of the tip ODE for a boundary velocity pair `V = (w, z)`.
pub fn tip_ode_residual(tip: &TipBody, v: [f64; 2], v_dot: [f64; 2], gamma: [f64; 2]) -> [f64; 2] {
    tip.raw_matrices().residual(v, v_dot, gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    Elastic,
    KelvinVoigt,
    ThermoTypeI,
    ThermoTypeII,
    Nonsimple,
}

impl LawKind {
    pub const ALL: [LawKind; 5] = [
        LawKind::Elastic,
        LawKind::KelvinVoigt,
        LawKind::ThermoTypeI,
        LawKind::ThermoTypeII,
        LawKind::Nonsimple,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LawKind::Elastic => "elastic",
            LawKind::KelvinVoigt => "kelvin_voigt",
            LawKind::ThermoTypeI => "thermo_type_i",
            LawKind::ThermoTypeII => "thermo_type_ii",
            LawKind::Nonsimple => "nonsimple",
        }
    }
}

impl fmt::Display for LawKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LawKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LawKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ModelError::UnknownLaw(s.to_string()))
    }
}

/// Bending-moment law `M` (plus the heat equation for the thermal variants).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ConstitutiveLaw {
    /// `M = α u_xx`.
    Elastic { alpha: f64 },
    /// `M = α u_xx + α0 u_xxt`.
    KelvinVoigt { alpha: f64, alpha0: f64 },
    /// `M = α u_xx + mθ`, Fourier heat conduction `cθ_t − κθ_xx ± m u_xxt = 0`.
    ThermoTypeI {
        alpha: f64,
        m_couple: f64,
        c_heat: f64,
        kappa: f64,
    },
    /// Conservative heat waves, `θ` the thermal displacement:
    /// `M = α u_xx + mθ_t`, `cθ_tt − k*θ_xx ∓ m u_xxt = 0`.
    ThermoTypeII {
        alpha: f64,
        m_couple: f64,
        c_heat: f64,
        k_star: f64,
    },
    /// Stress `T = μu_x`, hyper-stress `M = α u_xx`, thermal coupling through `θ_x`.
    NonsimpleThermo {
        alpha: f64,
        mu: f64,
        m_couple: f64,
        c_heat: f64,
        kappa: f64,
    },
}

impl ConstitutiveLaw {
    pub fn kind(&self) -> LawKind {
        match self {
            ConstitutiveLaw::Elastic { .. } => LawKind::Elastic,
            ConstitutiveLaw::KelvinVoigt { .. } => LawKind::KelvinVoigt,
            ConstitutiveLaw::ThermoTypeI { .. } => LawKind::ThermoTypeI,
            ConstitutiveLaw::ThermoTypeII { .. } => LawKind::ThermoTypeII,
            ConstitutiveLaw::NonsimpleThermo { .. } => LawKind::Nonsimple,
        }
    }

    /// Flexural rigidity `α`.
    pub fn alpha(&self) -> f64 {
        match *self {
            ConstitutiveLaw::Elastic { alpha }
            | ConstitutiveLaw::KelvinVoigt { alpha, .. }
            | ConstitutiveLaw::ThermoTypeI { alpha, .. }
            | ConstitutiveLaw::ThermoTypeII { alpha, .. }
            | ConstitutiveLaw::NonsimpleThermo { alpha, .. } => alpha,
        }
    }

    pub fn has_temperature(&self) -> bool {
        matches!(
            self,
            ConstitutiveLaw::ThermoTypeI { .. }
                | ConstitutiveLaw::ThermoTypeII { .. }
                | ConstitutiveLaw::NonsimpleThermo { .. }
        )
    }

    /// No bulk dissipation (elastic and type II).
    pub fn is_bulk_conservative(&self) -> bool {
        matches!(
            self,
            ConstitutiveLaw::Elastic { .. } | ConstitutiveLaw::ThermoTypeII { .. }
        )
    }

    /// Named coefficients in declaration order.
    pub fn coefficients(&self) -> Vec<(&'static str, f64)> {
        match *self {
            ConstitutiveLaw::Elastic { alpha } => vec![("alpha", alpha)],
            ConstitutiveLaw::KelvinVoigt { alpha, alpha0 } => {
                vec![("alpha", alpha), ("alpha0", alpha0)]
            }
            ConstitutiveLaw::ThermoTypeI {
                alpha,
                m_couple,
                c_heat,
                kappa,
            } => vec![
                ("alpha", alpha),
                ("m_couple", m_couple),
                ("c_heat", c_heat),
                ("kappa", kappa),
            ],
            ConstitutiveLaw::ThermoTypeII {
                alpha,
                m_couple,
                c_heat,
                k_star,
            } => vec![
                ("alpha", alpha),
                ("m_couple", m_couple),
                ("c_heat", c_heat),
                ("k_star", k_star),
            ],
            ConstitutiveLaw::NonsimpleThermo {
                alpha,
                mu,
                m_couple,
                c_heat,
                kappa,
            } => vec![
                ("alpha", alpha),
                ("mu", mu),
                ("m_couple", m_couple),
                ("c_heat", c_heat),
                ("kappa", kappa),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (field, value) in self.coefficients() {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidCoefficient {
                    law: self.kind(),
                    field,
                    value,
                });
            }
        }
        Ok(())
    }
}

/// Condition at `x = 0`; `x = ℓ` is always clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boundary {
    /// Tip body dynamics replace the free-end conditions.
    Hybrid(TipBody),
    /// `M(0) = M_x(0) = 0`.
    Free,
}

impl Boundary {
    pub fn tip(&self) -> Option<&TipBody> {
        match self {
            Boundary::Hybrid(tip) => Some(tip),
            Boundary::Free => None,
        }
    }
}

/// Which printed sign of the thermal coupling is kept; the other one is
/// flipped so that the energy identity closes. Both give the same dynamics
/// up to `θ → −θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingConvention {
    /// Moment carries `+mθ` (or `+mθ_t`); the heat equation sign adapts.
    #[default]
    KeepMoment,
    /// Heat equation as written; the moment carries `−mθ` (or `−mθ_t`).
    KeepHeat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub law: ConstitutiveLaw,
    /// Linear density `ρ` (`ρ_1` for the nonsimple law).
    pub rho: f64,
    pub length: f64,
    pub boundary: Boundary,
    #[serde(default)]
    pub coupling: CouplingConvention,
}

impl ModelSpec {
    pub fn new(law: ConstitutiveLaw, rho: f64, length: f64, boundary: Boundary) -> Self {
        Self {
            law,
            rho,
            length,
            boundary,
            coupling: CouplingConvention::default(),
        }
    }

    pub fn with_coupling(mut self, coupling: CouplingConvention) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (field, value) in [("rho", self.rho), ("length", self.length)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidModel { field, value });
            }
        }
        self.law.validate()?;
        if let Boundary::Hybrid(tip) = &self.boundary {
            tip.validate()?;
        }
        Ok(())
    }

    /// Energy is exactly conserved: no bulk dissipation and no tip damping.
    pub fn is_conservative(&self) -> bool {
        self.law.is_bulk_conservative()
            && self.boundary.tip().map_or(true, TipBody::is_undamped)
    }

    /// Hypothesis report for the tip, if there is one.
    pub fn hypothesis(&self) -> Option<HypothesisCheck> {
        self.boundary.tip().map(validate_hypothesis)
    }

    /// The same model run `factor` times faster: `u'(x, t) = u(x, factor·t)`.
    /// Inertias (`ρ`, `m`, `J`, `c`) scale by `1/factor²`, rate coefficients
    /// (`γ`, `γ*`, `α0`, `κ`, coupling `m`) by `1/factor`, stiffnesses are
    /// unchanged. Every eigenvalue is multiplied by `factor`.
    pub fn time_rescaled(&self, factor: f64) -> Self {
        let inertia = factor.powi(-2);
        let rate = factor.recip();
        let law = match self.law {
            ConstitutiveLaw::Elastic { alpha } => ConstitutiveLaw::Elastic { alpha },
            ConstitutiveLaw::KelvinVoigt { alpha, alpha0 } => ConstitutiveLaw::KelvinVoigt {
                alpha,
                alpha0: alpha0 * rate,
            },
            ConstitutiveLaw::ThermoTypeI {
                alpha,
                m_couple,
                c_heat,
                kappa,
            } => ConstitutiveLaw::ThermoTypeI {
                alpha,
                m_couple: m_couple * rate,
                c_heat: c_heat * inertia,
                kappa: kappa * rate,
            },
            ConstitutiveLaw::ThermoTypeII {
                alpha,
                m_couple,
                c_heat,
                k_star,
            } => ConstitutiveLaw::ThermoTypeII {
                alpha,
                m_couple: m_couple * rate,
                c_heat: c_heat * inertia,
                k_star,
            },
            ConstitutiveLaw::NonsimpleThermo {
                alpha,
                mu,
                m_couple,
                c_heat,
                kappa,
            } => ConstitutiveLaw::NonsimpleThermo {
                alpha,
                mu,
                m_couple: m_couple * rate,
                c_heat: c_heat * inertia,
                kappa: kappa * rate,
            },
        };
        let boundary = match self.boundary {
            Boundary::Free => Boundary::Free,
            Boundary::Hybrid(tip) => Boundary::Hybrid(TipBody {
                mass: tip.mass * inertia,
                offset: tip.offset,
                inertia: tip.inertia * inertia,
                gamma: tip.gamma * rate,
                gamma_star: tip.gamma_star * rate,
            }),
        };
        Self {
            law,
            rho: self.rho * inertia,
            length: self.length,
            boundary,
            coupling: self.coupling,
        }
    }
}

/// Reference parameter set used by the acceptance runs: `ρ = α = ℓ = 1`,
/// tip `(m, d, J, γ, γ*) = (1, 0.1, 0.1, 1, 0.5)`, `α0 = 0.05`, `m = 0.1`,
/// `c = κ = k* = μ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceParameters {
    pub rho: f64,
    pub alpha: f64,
    pub length: f64,
    pub tip: TipBody,
    pub alpha0: f64,
    pub m_couple: f64,
    pub c_heat: f64,
    pub kappa: f64,
    pub k_star: f64,
    pub mu: f64,
}

impl Default for ReferenceParameters {
    fn default() -> Self {
        Self {
            rho: 1.0,
            alpha: 1.0,
            length: 1.0,
            tip: TipBody::new(1.0, 0.1, 0.1, 1.0, 0.5),
            alpha0: 0.05,
            m_couple: 0.1,
            c_heat: 1.0,
            kappa: 1.0,
            k_star: 1.0,
            mu: 1.0,
        }
    }
}

impl ReferenceParameters {
    pub fn law(&self, kind: LawKind) -> ConstitutiveLaw {
        let alpha = self.alpha;
        match kind {
            LawKind::Elastic => ConstitutiveLaw::Elastic { alpha },
            LawKind::KelvinVoigt => ConstitutiveLaw::KelvinVoigt {
                alpha,
                alpha0: self.alpha0,
            },
            LawKind::ThermoTypeI => ConstitutiveLaw::ThermoTypeI {
                alpha,
                m_couple: self.m_couple,
                c_heat: self.c_heat,
                kappa: self.kappa,
            },
            LawKind::ThermoTypeII => ConstitutiveLaw::ThermoTypeII {
                alpha,
                m_couple: self.m_couple,
                c_heat: self.c_heat,
                k_star: self.k_star,
            },
            LawKind::Nonsimple => ConstitutiveLaw::NonsimpleThermo {
                alpha,
                mu: self.mu,
                m_couple: self.m_couple,
                c_heat: self.c_heat,
                kappa: self.kappa,
            },
        }
    }

    pub fn hybrid(&self, kind: LawKind) -> ModelSpec {
        ModelSpec::new(self.law(kind), self.rho, self.length, Boundary::Hybrid(self.tip))
    }

    pub fn free(&self, kind: LawKind) -> ModelSpec {
        ModelSpec::new(self.law(kind), self.rho, self.length, Boundary::Free)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_eq(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> bool {
        a == b
    }

    #[test]
    fn decoupled_tip_gives_identity_inertia() {
        let m = build_tip_matrices(&TipBody::new(1.0, 0.0, 1.0, 0.0, 0.0)).unwrap();
        assert!(mat_eq(m.b, [[1.0, 0.0], [0.0, 1.0]]));
        assert!(mat_eq(m.k, [[0.0, 0.0], [0.0, 0.0]]));
    }

    #[test]
    fn printed_matrices_for_offset_tip() {
        let m = build_tip_matrices(&TipBody::new(2.0, 1.0, 3.0, 1.0, 1.0)).unwrap();
        assert!(mat_eq(m.b, [[2.0, 2.0], [2.0, 5.0]]));
        assert_eq!(m.det_b(), 6.0);
        assert!(mat_eq(m.k, [[1.0, 0.0], [1.0, 1.0]]));
    }

    #[test]
    fn hypothesis_violation_is_flagged_not_rejected() {
        let tip = TipBody::new(1.0, 1.0, 1.0, 3.0, 1.0);
        assert!(build_tip_matrices(&tip).is_ok());
        let check = validate_hypothesis(&tip);
        assert!(!check.holds);
        assert_eq!(check.margin, -1.0);
    }

    #[test]
    fn hypothesis_margins() {
        let c = validate_hypothesis(&TipBody::new(1.0, 0.0, 1.0, 5.0, 0.0));
        assert!(c.holds);
        assert_eq!(c.margin, 0.0);
        let c = validate_hypothesis(&TipBody::new(1.0, 1.0, 1.0, 1.0, 1.0));
        assert!(c.holds);
        assert_eq!(c.margin, 1.0);
        let c = validate_hypothesis(&TipBody::new(1.0, 2.0, 1.0, 2.0, 1.0));
        assert!(!c.holds);
        assert_eq!(c.margin, -2.0);
    }

    #[test]
    fn singular_inertia_is_rejected() {
        for tip in [
            TipBody::new(0.0, 0.1, 1.0, 0.0, 0.0),
            TipBody::new(-1.0, 0.1, 1.0, 0.0, 0.0),
            TipBody::new(1.0, 0.1, 0.0, 0.0, 0.0),
            TipBody::new(1.0, -0.1, 1.0, 0.0, 0.0),
            TipBody::new(1.0, 0.1, 1.0, f64::NAN, 0.0),
        ] {
            assert!(build_tip_matrices(&tip).is_err(), "{tip:?}");
        }
    }

    #[test]
    fn residual_examples() {
        let tip = TipBody::new(2.0, 1.0, 3.0, 1.0, 1.0);
        assert_eq!(tip_ode_residual(&tip, [0.0; 2], [0.0; 2], [0.0; 2]), [0.0, 0.0]);
        assert_eq!(
            tip_ode_residual(&tip, [1.0, 0.0], [0.0, 0.0], [1.0, 1.0]),
            [0.0, 0.0]
        );
    }

    #[test]
    fn law_validation_rejects_nonpositive_coefficients() {
        let law = ConstitutiveLaw::KelvinVoigt {
            alpha: 1.0,
            alpha0: 0.0,
        };
        let err = law.validate().unwrap_err();
        assert!(err.to_string().contains("alpha0"));
        let spec = ModelSpec::new(ConstitutiveLaw::Elastic { alpha: 1.0 }, -1.0, 1.0, Boundary::Free);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn conservative_detection() {
        let p = ReferenceParameters::default();
        assert!(p.free(LawKind::Elastic).is_conservative());
        assert!(p.free(LawKind::ThermoTypeII).is_conservative());
        assert!(!p.free(LawKind::KelvinVoigt).is_conservative());
        assert!(!p.hybrid(LawKind::Elastic).is_conservative());
        let undamped = p.hybrid(LawKind::Elastic).with_boundary(Boundary::Hybrid(p.tip.undamped()));
        assert!(undamped.is_conservative());
    }

    #[test]
    fn reference_parameters_satisfy_hypothesis() {
        let p = ReferenceParameters::default();
        let c = validate_hypothesis(&p.tip);
        assert!(c.holds);
        assert!((c.margin - 0.9).abs() < 1e-15);
        for kind in LawKind::ALL {
            p.hybrid(kind).validate().unwrap();
            assert_eq!(kind.name().parse::<LawKind>().unwrap(), kind);
        }
    }
}

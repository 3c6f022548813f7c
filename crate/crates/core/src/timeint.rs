//! Implicit midpoint for `E ẋ = S x`.
//!
//! Steps are taken in energy coordinates `y = Lᵀx`, where the scheme reads
//! `(I − dt/2·A) y₊ = (I + dt/2·A) y` and the energy is `½|y|²`. The energy
//! change over one step is then exactly `dt·dissipation_rate(midpoint)`.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::{dissipation_rate, DiscreteSystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimeIntError {
    #[error("time step must be finite and nonzero, got {0}")]
    InvalidStep(f64),
    #[error("final time {t_final} must be finite and at least the step {dt}")]
    InvalidHorizon { dt: f64, t_final: f64 },
    #[error("initial state has dimension {got}, system expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("step matrix I - dt/2 A is numerically singular at dt = {0}")]
    SingularStep(f64),
    #[error("no conservative mode found for the first-mode datum")]
    NoMode,
}

/// Initial state. Every variant starts with zero velocity and temperature
/// unless given explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialData {
    /// Lowest mode of the undamped problem `K q = ω² M q` as a displacement,
    /// scaled to unit energy.
    FirstMode,
    /// `u₀(x) = (x − ℓ)² x³ / ℓ⁵`.
    SmoothPolynomial,
    FromVector(Vec<f64>),
}

impl InitialData {
    pub fn state(&self, sys: &DiscreteSystem) -> Result<Vec<f64>, TimeIntError> {
        let dim = sys.dim();
        match self {
            InitialData::FromVector(v) => {
                if v.len() != dim {
                    return Err(TimeIntError::DimensionMismatch {
                        expected: dim,
                        got: v.len(),
                    });
                }
                Ok(v.clone())
            }
            InitialData::SmoothPolynomial => {
                let layout = sys.layout();
                let l = sys.spec().length;
                let h = sys.element_size();
                let mut x = vec![0.0; dim];
                for node in 0..layout.n_elements {
                    let s = node as f64 * h;
                    let value = (s - l).powi(2) * s.powi(3) / l.powi(5);
                    let slope = (2.0 * (s - l) * s.powi(3) + 3.0 * (s - l).powi(2) * s * s) / l.powi(5);
                    x[layout.beam_dof(node, false).unwrap()] = value;
                    x[layout.beam_dof(node, true).unwrap()] = slope;
                }
                Ok(x)
            }
            InitialData::FirstMode => {
                let q = lowest_mode(sys).ok_or(TimeIntError::NoMode)?;
                let mut x = vec![0.0; dim];
                x[..q.len()].copy_from_slice(&q);
                let e = 0.5 * sys.to_energy_coordinates(&x).iter().map(|v| v * v).sum::<f64>();
                let scale = e.sqrt().recip();
                Ok(x.iter().map(|v| v * scale).collect())
            }
        }
    }
}

/// Inverse iteration on `K q = ω² M q`.
fn lowest_mode(sys: &DiscreteSystem) -> Option<Vec<f64>> {
    let k = sys.stiffness();
    let m = sys.mass();
    let n = k.nrows();
    let lu = k.partial_piv_lu();
    let mut q: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
    let mut previous = f64::NAN;
    for _ in 0..200 {
        let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| (0..n).map(|j| m[(i, j)] * q[j]).sum::<f64>());
        lu.solve_in_place(rhs.as_mut());
        let norm = (0..n).map(|i| rhs[(i, 0)].powi(2)).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return None;
        }
        q = (0..n).map(|i| rhs[(i, 0)] / norm).collect();
        if (norm - previous).abs() <= 1e-15 * norm {
            break;
        }
        previous = norm;
    }
    Some(q)
}

/// Midpoint step map with `I − dt/2·A` factored once.
pub struct Stepper {
    dt: f64,
    generator: Mat<f64>,
    lu: PartialPivLu<f64>,
}

impl Stepper {
    /// Negative `dt` steps backward in time.
    pub fn new(sys: &DiscreteSystem, dt: f64) -> Result<Self, TimeIntError> {
        if !dt.is_finite() || dt == 0.0 {
            return Err(TimeIntError::InvalidStep(dt));
        }
        Ok(Self::from_generator(sys.generator(), dt))
    }

    fn from_generator(generator: Mat<f64>, dt: f64) -> Self {
        let dim = generator.nrows();
        let implicit = Mat::<f64>::from_fn(dim, dim, |i, j| {
            f64::from(u8::from(i == j)) - 0.5 * dt * generator[(i, j)]
        });
        Self {
            dt,
            lu: implicit.partial_piv_lu(),
            generator,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One step in energy coordinates.
    pub fn step(&self, y: &[f64]) -> Result<Vec<f64>, TimeIntError> {
        let a = &self.generator;
        let dim = y.len();
        let mut rhs = Mat::<f64>::from_fn(dim, 1, |i, _| {
            y[i] + 0.5 * self.dt * (0..dim).map(|j| a[(i, j)] * y[j]).sum::<f64>()
        });
        self.lu.solve_in_place(rhs.as_mut());
        let next: Vec<f64> = (0..dim).map(|i| rhs[(i, 0)]).collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(TimeIntError::SingularStep(self.dt));
        }
        Ok(next)
    }

    /// Dense step matrix `(I − dt/2·A)⁻¹(I + dt/2·A)`.
    pub fn step_matrix(&self) -> Mat<f64> {
        let dim = self.generator.nrows();
        let mut m = Mat::<f64>::from_fn(dim, dim, |i, j| {
            f64::from(u8::from(i == j)) + 0.5 * self.dt * self.generator[(i, j)]
        });
        self.lu.solve_in_place(m.as_mut());
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IntegrateOptions {
    /// Keep every k-th state (and the last); `None` keeps only the endpoints.
    pub record_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    /// `times[k] = k·dt`.
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    /// Energy dissipated up to `t_k`, `−∫ dissipation_rate`, accumulated with midpoint values.
    pub dissipation_integral: Vec<f64>,
    /// Relative defect of step `k−1 → k`; entry 0 is 0.
    pub balance_residual: Vec<f64>,
    /// Recorded `(step index, state)` pairs.
    pub states: Vec<(usize, Vec<f64>)>,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn final_state(&self) -> &[f64] {
        &self.states.last().expect("final state is always recorded").1
    }

    /// `|E(T) − E(0)| / E(0)`; 0 for a zero datum.
    pub fn relative_drift(&self) -> f64 {
        let e0 = self.energies[0];
        let e1 = *self.energies.last().unwrap();
        if e0 == 0.0 {
            e1.abs()
        } else {
            (e1 - e0).abs() / e0
        }
    }
}

/// Integrates from `x0` to `t_final` in steps of `dt`. The number of steps
/// is `t_final/dt` rounded up.
pub fn integrate(
    sys: &DiscreteSystem,
    x0: &[f64],
    dt: f64,
    t_final: f64,
    options: IntegrateOptions,
) -> Result<Trajectory, TimeIntError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(TimeIntError::InvalidStep(dt));
    }
    if !(t_final.is_finite() && t_final >= dt) {
        return Err(TimeIntError::InvalidHorizon { dt, t_final });
    }
    let steps = (t_final / dt - 1e-9).ceil().max(1.0) as usize;
    let stepper = Stepper::new(sys, dt)?;
    run(sys, &stepper, x0, steps, options)
}

/// `steps` steps of an existing stepper; works for either sign of `dt`.
pub fn run(
    sys: &DiscreteSystem,
    stepper: &Stepper,
    x0: &[f64],
    steps: usize,
    options: IntegrateOptions,
) -> Result<Trajectory, TimeIntError> {
    if x0.len() != sys.dim() {
        return Err(TimeIntError::DimensionMismatch {
            expected: sys.dim(),
            got: x0.len(),
        });
    }
    let dt = stepper.dt();
    let mut y = sys.to_energy_coordinates(x0);
    let half_square = |v: &[f64]| 0.5 * v.iter().map(|a| a * a).sum::<f64>();
    let e0 = half_square(&y);
    let scale = e0.abs() + f64::MIN_POSITIVE;

    let mut traj = Trajectory {
        dt,
        times: Vec::with_capacity(steps + 1),
        energies: Vec::with_capacity(steps + 1),
        dissipation_integral: Vec::with_capacity(steps + 1),
        balance_residual: Vec::with_capacity(steps + 1),
        states: vec![(0, x0.to_vec())],
    };
    traj.times.push(0.0);
    traj.energies.push(e0);
    traj.dissipation_integral.push(0.0);
    traj.balance_residual.push(0.0);

    for k in 1..=steps {
        let next = stepper.step(&y)?;
        let mid: Vec<f64> = y.iter().zip(&next).map(|(a, b)| 0.5 * (a + b)).collect();
        let rate = dissipation_rate(sys, &sys.from_energy_coordinates(&mid));
        let e_prev = *traj.energies.last().unwrap();
        let e_next = half_square(&next);
        traj.times.push(k as f64 * dt);
        traj.energies.push(e_next);
        traj.dissipation_integral.push(traj.dissipation_integral[k - 1] - dt * rate);
        traj.balance_residual.push((e_next - e_prev - dt * rate).abs() / scale);
        y = next;
        let record = options.record_every.is_some_and(|every| every > 0 && k % every == 0);
        if record || k == steps {
            traj.states.push((k, sys.from_energy_coordinates(&y)));
        }
    }
    Ok(traj)
}

/// Largest per-step relative defect of the energy identity.
///
/// Panics on an empty trajectory.
pub fn energy_ledger_check(traj: &Trajectory) -> f64 {
    assert!(!traj.energies.is_empty(), "empty trajectory");
    traj.balance_residual.iter().copied().fold(0.0, f64::max)
}

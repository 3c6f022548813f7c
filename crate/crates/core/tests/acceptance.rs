//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL ...` line before asserting.

use beamlab_core::analysis::{classify_stability, decay_window, equivalence_harness, fit_decay, DecayModel, Match, Verdict};
use beamlab_core::discretize::{assemble, dissipation_rate, refine, DiscreteSystem};
use beamlab_core::model::{build_tip_matrices, validate_hypothesis, LawKind, ReferenceParameters, TipBody};
use beamlab_core::spectral::{spectrum, sweep_resolvent, SlopeFit};
use beamlab_core::timeint::{integrate, InitialData, IntegrateOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: u32, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {status} {detail}");
}

/// Root of `cos(b)cosh(b) = −1` near `guess` (Newton).
fn clamped_free_root(guess: f64) -> f64 {
    let mut b = guess;
    for _ in 0..50 {
        let f = b.cos() * b.cosh() + 1.0;
        let df = -b.sin() * b.cosh() + b.cos() * b.sinh();
        b -= f / df;
    }
    b
}

fn first_frequency(sys: &DiscreteSystem) -> f64 {
    spectrum(sys).unwrap().first_frequency().unwrap()
}

#[test]
fn criterion_1_power_balance_and_sign() {
    let p = ReferenceParameters::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut max_rate = f64::NEG_INFINITY;
    for kind in LawKind::ALL {
        for spec in [p.hybrid(kind), p.free(kind)] {
            let sys = assemble(&spec, 16).unwrap();
            let s = sys.s();
            for _ in 0..100 {
                let x: Vec<f64> = (0..sys.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut power = 0.0;
                let mut scale = 0.0;
                for i in 0..x.len() {
                    for j in 0..x.len() {
                        let t = x[i] * s[(i, j)] * x[j];
                        power += t;
                        scale += t.abs();
                    }
                }
                let rate = dissipation_rate(&sys, &x);
                worst = worst.max((power - rate).abs() / scale);
                max_rate = max_rate.max(rate);
            }
        }
    }
    let pass = worst <= 1e-10 && max_rate <= 0.0;
    report(1, pass, &format!("max relative power defect {worst:.2e}, max dissipation rate {max_rate:.2e}"));
    assert!(pass);
}

#[test]
fn criterion_2_conservation() {
    let sys = assemble(&ReferenceParameters::default().free(LawKind::Elastic), 64).unwrap();
    let x0 = InitialData::FirstMode.state(&sys).unwrap();
    let traj = integrate(&sys, &x0, 1e-3, 10.0, IntegrateOptions::default()).unwrap();
    let drift = traj.relative_drift();
    let pass = traj.n_steps() == 10_000 && drift <= 1e-10;
    report(2, pass, &format!("relative drift {drift:.2e} over {} steps at n = 64", traj.n_steps()));
    assert!(pass);
}

#[test]
fn criterion_3_clamped_free_frequency() {
    let spec = ReferenceParameters::default().free(LawKind::Elastic);
    let exact = clamped_free_root(1.9).powi(2);
    let errors: Vec<f64> = refine(&spec, &[16, 32, 64])
        .unwrap()
        .iter()
        .map(|sys| (first_frequency(sys) - exact).abs() / exact)
        .collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let pass = errors[2] < 1e-4 && orders.iter().all(|o| *o >= 3.5);
    report(
        3,
        pass,
        &format!(
            "relative errors [{}], observed orders [{}]",
            errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", "),
            orders.iter().map(|o| format!("{o:.2}")).collect::<Vec<_>>().join(", "),
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_abscissa_tends_to_zero() {
    let spec = ReferenceParameters::default().hybrid(LawKind::Elastic);
    let coarse = spectrum(&assemble(&spec, 16).unwrap()).unwrap();
    let fine = spectrum(&assemble(&spec, 64).unwrap()).unwrap();
    let shrink_full = coarse.abscissa / fine.abscissa;
    let shrink_resolved = coarse.resolved_abscissa / fine.resolved_abscissa;
    let branch = fine.branch_fit.clone().expect("damped branch present");
    let decreasing = branch.points.windows(2).all(|w| w[1].1 < w[0].1);
    let pass = coarse.abscissa < 0.0 && fine.abscissa < 0.0 && shrink_full >= 2.0 && shrink_resolved >= 2.0 && decreasing;
    report(
        4,
        pass,
        &format!(
            "abscissa {:.3e} -> {:.3e} ({shrink_full:.1}x), resolved {:.3e} -> {:.3e} ({shrink_resolved:.1}x), \
             branch of {} points decreasing: {decreasing}, fitted -Re ~ |Im|^-{:.2}",
            coarse.abscissa,
            fine.abscissa,
            coarse.resolved_abscissa,
            fine.resolved_abscissa,
            branch.points.len(),
            branch.exponent
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_polynomial_decay_order() {
    let spec = ReferenceParameters::default().hybrid(LawKind::Elastic);
    let sys = assemble(&spec, 128).unwrap();
    let report_128 = spectrum(&sys).unwrap();
    let w1 = report_128.first_frequency().unwrap();

    let sweep = sweep_resolvent(&sys, w1, 100.0 * w1, 40).unwrap();
    let slope = sweep.fit.slope();
    let peaks = match &sweep.fit {
        SlopeFit::Fitted { points, .. } => points.len(),
        SlopeFit::Refused { .. } => 0,
    };
    let resolvent_pass = slope.is_some_and(|s| (s - 2.0).abs() <= 0.3);

    let t_final = 100.0;
    let x0 = InitialData::SmoothPolynomial.state(&sys).unwrap();
    let traj = integrate(&sys, &x0, 0.01, t_final, IntegrateOptions::default()).unwrap();
    let window = decay_window(w1, report_128.resolved_abscissa, t_final);
    let fit = fit_decay(&traj, window, DecayModel::Algebraic).unwrap();
    let decay_pass = (-1.5..=-0.7).contains(&fit.exponent);

    let pass = resolvent_pass && decay_pass;
    report(
        5,
        pass,
        &format!(
            "resolvent envelope slope {} over [{w1:.3}, {:.1}] from {peaks} peaks (target 2.0 +- 0.3: {}); \
             energy decay exponent {:.3} on [{:.2}, {:.1}] with r^2 {:.3} (target [-1.5, -0.7]: {})",
            slope.map_or("refused".to_string(), |s| format!("{s:.3}")),
            100.0 * w1,
            if resolvent_pass { "pass" } else { "fail" },
            fit.exponent,
            window.0,
            window.1,
            fit.r_squared,
            if decay_pass { "pass" } else { "fail" },
        ),
    );
    assert!(decay_pass, "time-domain decay exponent {}", fit.exponent);
    assert!(resolvent_pass, "resolvent slope {slope:?}");
}

#[test]
fn criterion_6_equivalence() {
    let p = ReferenceParameters::default();
    let tip = *p.hybrid(LawKind::Elastic).boundary.tip().unwrap();
    let mut pass = true;
    let mut details = Vec::new();
    for kind in LawKind::ALL {
        let expected = match kind {
            LawKind::Elastic | LawKind::ThermoTypeII => Verdict::NotExponentiallyStable,
            _ => Verdict::ExponentiallyStable,
        };
        let r = equivalence_harness(&p.free(kind), tip, &[16, 32, 64], Default::default()).unwrap();
        let ok = r.matched == Match::Agree && r.hybrid.verdict == expected && r.plain.verdict == expected;
        pass &= ok;
        details.push(format!("{kind}: {:?}/{:?}", r.hybrid.verdict, r.plain.verdict));
    }
    report(6, pass, &details.join(", "));
    assert!(pass);
}

#[test]
fn criterion_6_free_and_hybrid_classified_independently() {
    // The harness must not reuse one side's result for the other.
    let p = ReferenceParameters::default();
    let hybrid = classify_stability(&p.hybrid(LawKind::Elastic), &[16, 32, 64], Default::default()).unwrap();
    let free = classify_stability(&p.free(LawKind::Elastic), &[16, 32, 64], Default::default()).unwrap();
    assert!(hybrid.levels[0].abscissa < -hybrid.levels[0].zero_tolerance);
    assert!(free.levels.iter().all(|l| l.abscissa.abs() <= l.zero_tolerance));
}

#[test]
fn criterion_7_tip_matrix_algebra() {
    // Quarter-integer grid: every product below is exact in binary floating point.
    let grid: Vec<f64> = (1..=10).map(|k| 0.25 * k as f64).collect();
    let mut points = 0;
    let mut failures = Vec::new();
    for &d in &grid {
        for &gamma in &grid {
            for &gamma_star in &grid {
                points += 1;
                let (m, j) = (1.0 + d, 0.5 + gamma);
                let tip = TipBody::new(m, d, j, gamma, gamma_star);
                let bk = build_tip_matrices(&tip).unwrap();
                let printed_b = [[m, m * d], [m * d, j + m * d * d]];
                let printed_k = [[gamma, 0.0], [d * gamma, d * gamma_star]];
                if bk.b != printed_b || bk.k != printed_k {
                    failures.push(format!("matrices at {d},{gamma},{gamma_star}"));
                }
                if (bk.det_b() - m * j).abs() > 1e-12 * m * j {
                    failures.push(format!("det B at {d},{gamma},{gamma_star}"));
                }
                // Sylvester's criterion on the symmetric part of K.
                let sym = [[gamma, 0.5 * d * gamma], [0.5 * d * gamma, d * gamma_star]];
                let sylvester = sym[0][0] > 0.0 && sym[0][0] * sym[1][1] - sym[0][1] * sym[1][0] > 0.0;
                let discriminant = (d * gamma).powi(2) < 4.0 * gamma * d * gamma_star;
                if bk.damping_is_positive_definite() != sylvester || discriminant != sylvester {
                    failures.push(format!("definiteness at {d},{gamma},{gamma_star}"));
                }
                let hyp = validate_hypothesis(&tip);
                if hyp.holds != (d * gamma <= 2.0 * gamma_star) || hyp.margin != 2.0 * gamma_star - d * gamma {
                    failures.push(format!("hypothesis at {d},{gamma},{gamma_star}"));
                }
                if hyp.holds && d * gamma <= 2.0 * gamma && !discriminant {
                    failures.push(format!("implication at {d},{gamma},{gamma_star}"));
                }
            }
        }
    }
    let pass = points == 1000 && failures.is_empty();
    report(7, pass, &format!("{points} grid points, {} failures {failures:?}", failures.len()));
    assert!(pass);
}

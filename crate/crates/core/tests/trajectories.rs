use fbf_core::diagnostics::{
    ergodic_objective_monitor, exponential_envelope, fejer_monitor, residual_integral_monitor,
    zdot_bound_coefficient, zdot_bound_monitor,
};
use fbf_core::discrete::{run_tseng, GammaSequence};
use fbf_core::dynamics::{integrate, IntegratorOptions, ScheduleSpec, StepSchedule};
use fbf_core::linalg::state;
use fbf_core::problems::{catalog, ProblemSpec};
use fbf_core::suites::{default_x0, euler_discrete_gap};

fn rotation() -> fbf_core::dynamics::ProblemInstance {
    ProblemSpec::SkewRotation { n: 2 }.build().unwrap()
}

#[test]
fn rotation_residual_integral_below_half() {
    let p = rotation();
    let sched = StepSchedule::constant(0.5, 1.0).unwrap();
    let rec = integrate(&p, &sched, &state(&[1.0, 0.0]), &IntegratorOptions::rk4(0.01, 10.0, 0.01)).unwrap();
    let v = residual_integral_monitor(&rec, &sched, Some(&state(&[0.0, 0.0])));
    assert!(v.holds);
    // (1 − γ)γ²·∫ e^{−2γ²t} over [0, 10] with γ = 1/2
    let exact = 0.5 * 0.25 * (1.0 - (-5.0f64).exp()) / 0.5;
    assert!((v.value.unwrap() - exact).abs() < 1e-6, "{:?}", v.value);
    assert!(v.value.unwrap() < 0.5);
    assert!(fejer_monitor(&rec, &state(&[0.0, 0.0])).holds);
}

#[test]
fn rotation_zdot_coefficient_and_monitor() {
    let c = zdot_bound_coefficient(0.5, 0.0, 1.0);
    assert!((c - 1.677_050_983_124_842_4).abs() < 1e-12);
    let p = rotation();
    let sched = StepSchedule::constant(0.5, 1.0).unwrap();
    let rec = integrate(&p, &sched, &state(&[1.0, 0.0]), &IntegratorOptions::rk4(0.01, 5.0, 0.01)).unwrap();
    assert!(zdot_bound_monitor(&rec, &sched).holds);
}

#[test]
fn lasso_sinusoidal_zdot_holds() {
    for (label, spec) in catalog().into_iter().filter(|(l, _)| l.starts_with("lasso")) {
        let p = spec.build().unwrap();
        let beta = p.beta();
        let sched = StepSchedule::from_spec(
            ScheduleSpec::Sinusoidal {
                lo: 0.2 * beta,
                hi: 0.8 * beta,
                period: 10.0,
            },
            beta,
        )
        .unwrap();
        let x0 = default_x0(p.dim(), 1);
        let rec = integrate(&p, &sched, &x0, &IntegratorOptions::rk4(0.01, 10.0, 0.01)).unwrap();
        let v = zdot_bound_monitor(&rec, &sched);
        assert!(v.holds, "{label}: {}", v.detail);
    }
}

#[test]
fn strongly_monotone_envelope_is_tight() {
    let p = ProblemSpec::StronglyMonotoneQuadratic {
        q: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        b: vec![0.5, -0.25],
        lo: fbf_core::operators::Bound::Scalar(-1.0),
        hi: fbf_core::operators::Bound::Scalar(1.0),
    }
    .build()
    .unwrap();
    assert_eq!((p.rho(), p.beta()), (Some(1.0), 1.0));
    let sched = StepSchedule::constant(0.5, 1.0).unwrap();
    let x0 = state(&[-0.5, 0.75]);
    let rec = integrate(&p, &sched, &x0, &IntegratorOptions::rk4(0.01, 20.0, 0.1)).unwrap();
    let xbar = p.known_solution().unwrap();
    let env = exponential_envelope(&rec, &sched, 1.0, xbar).unwrap();
    assert!(env.holds());
    // interior dynamics are exactly ẋ = −(γ − γ²)(x − x̄)
    for (m, e) in env.measured.iter().zip(&env.envelope) {
        assert!((m - e).abs() <= 1e-8 * e.max(1e-300) + 1e-15, "{m} vs {e}");
    }
}

#[test]
fn lasso_discrete_gap_decays_like_one_over_n() {
    let p = ProblemSpec::Lasso {
        matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        b: vec![3.0, 0.5],
        weight: 1.0,
    }
    .build()
    .unwrap();
    let xbar = state(&[2.0, 0.0]);
    let x0 = state(&[0.0, 0.0]);
    let rec = run_tseng(&p, &GammaSequence::List(vec![0.5]), &x0, 2000, 0.0).unwrap();
    let f = p.objective().unwrap();
    let v = ergodic_objective_monitor(&rec, f, std::slice::from_ref(&xbar));
    assert!(v.holds, "{}", v.detail);
    let c = 0.5 * (&x0 - &xbar).norm_squared();
    for it in &rec.iterates {
        let gap = f.eval(&it.ergodic) - f.eval(&xbar);
        assert!(gap <= c / it.gamma_sum + 1e-9);
    }
}

#[test]
fn unit_euler_matches_discrete_on_catalog() {
    for (label, spec) in catalog() {
        let p = spec.build().unwrap();
        let sched = StepSchedule::constant(0.7 * p.beta(), p.beta()).unwrap();
        let (ok, gap) = euler_discrete_gap(&p, &sched, &default_x0(p.dim(), 5), 100).unwrap();
        assert!(ok, "{label}: {gap:e}");
    }
}

#[test]
fn larger_constant_step_decays_faster_on_rotation() {
    let p = rotation();
    let finals: Vec<f64> = [0.1, 0.3, 0.5, 0.7, 0.9]
        .iter()
        .map(|g| {
            let sched = StepSchedule::constant(*g, 1.0).unwrap();
            let rec = integrate(&p, &sched, &state(&[1.0, 0.0]), &IntegratorOptions::rk4(0.01, 5.0, 5.0)).unwrap();
            let norm = rec.last().x.norm();
            assert!((norm - (-g * g * 5.0f64).exp()).abs() < 1e-8);
            norm
        })
        .collect();
    assert!(finals.windows(2).all(|w| w[1] < w[0]));
}

use fbf_core::diagnostics::{
    negative_controls, zdot_bound_coefficient, zdot_bound_monitor, Status, ZDOT_REL_TOL,
};
use fbf_core::dynamics::{integrate, IntegratorOptions, ScheduleSpec, StepSchedule};
use fbf_core::problems::ProblemSpec;
use fbf_core::operators::Bound;
use fbf_core::State;

#[test]
fn each_monitor_fails_its_control() {
    let verdicts = negative_controls().unwrap();
    assert_eq!(verdicts.len(), 7);
    for v in verdicts {
        assert_eq!(v.status, Status::Violated, "{}: {}", v.name, v.detail);
        assert!(!v.holds);
    }
}

#[test]
fn controls_are_deterministic() {
    assert_eq!(negative_controls().unwrap(), negative_controls().unwrap());
}

fn l1_identity() -> fbf_core::dynamics::ProblemInstance {
    ProblemSpec::L1PlusIdentity {
        b: Bound::Scalar(3.0),
    }
    .build()
    .unwrap()
}

#[test]
fn zdot_bound_holds_for_slowly_varying_steps() {
    let p = l1_identity();
    let sched = StepSchedule::from_spec(
        ScheduleSpec::Sinusoidal {
            lo: 0.2,
            hi: 0.8,
            period: 10.0,
        },
        1.0,
    )
    .unwrap();
    let rec = integrate(&p, &sched, &State::from_vec(vec![-1.5]), &IntegratorOptions::rk4(0.01, 10.0, 0.01)).unwrap();
    let v = zdot_bound_monitor(&rec, &sched);
    assert!(v.holds, "{}", v.detail);
}

/// The ż estimate drops a cross term `2(1 + γ̇/γ)γ⟨z − x, Bx − Bz⟩`, which is only
/// nonpositive while `γ̇ ≥ −γ`. With a fast-falling step size the estimate fails,
/// but only where `γ̇ < −γ`, and the triangle-inequality bound
/// `(|1 + γ̇/γ| + γ/β + (γ/β)√(1 + γ²/β²))‖x − z‖` still holds everywhere.
#[test]
fn zdot_bound_needs_step_size_to_fall_slower_than_itself() {
    let p = l1_identity();
    let sched = StepSchedule::from_spec(
        ScheduleSpec::Sinusoidal {
            lo: 0.2,
            hi: 0.8,
            period: 3.0,
        },
        1.0,
    )
    .unwrap();
    let rec = integrate(&p, &sched, &State::from_vec(vec![-1.5]), &IntegratorOptions::rk4(0.01, 10.0, 0.01)).unwrap();
    assert_eq!(zdot_bound_monitor(&rec, &sched).status, Status::Violated);

    let s = &rec.samples;
    let mut flagged = 0;
    for i in 1..s.len() - 1 {
        let fd = (&s[i + 1].z - &s[i - 1].z).norm() / (s[i + 1].t - s[i - 1].t);
        let gamma = s[i].gamma;
        let gamma_dot = sched.derivative(s[i].t).unwrap();
        let gap = (&s[i].x - &s[i].z).norm();
        if fd > zdot_bound_coefficient(gamma, gamma_dot, 1.0) * gap * (1.0 + ZDOT_REL_TOL) + 1e-9 {
            flagged += 1;
            assert!(gamma_dot < -gamma, "t = {}", s[i].t);
        }
        let triangle =
            ((1.0 + gamma_dot / gamma).abs() + gamma + gamma * (1.0 + gamma * gamma).sqrt()) * gap;
        assert!(fd <= triangle * (1.0 + ZDOT_REL_TOL) + 1e-9, "t = {}", s[i].t);
    }
    assert!(flagged > 0);
}

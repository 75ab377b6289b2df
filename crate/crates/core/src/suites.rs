//! Property suites over the operator and problem catalogs, as run by `fbf check`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diagnostics::{
    corollary_rate, decay_integrand, ergodic_objective_monitor, exponential_envelope,
    fejer_monitor, growth_probe, negative_controls, inclusion_monitor, lipschitz_probe, residual_integral_monitor,
    velocity_monitor, zdot_bound_monitor, SQRT_6,
};
use crate::discrete::{run_tseng, GammaSequence};
use crate::dynamics::{
    fbf_vector_field, integrate, IntegratorOptions, ProblemInstance, ScheduleSpec, StepSchedule,
};
use crate::error::{Error, Result};
use crate::linalg::State;
use crate::operators::{check_resolvent_parameter_inequality, Bound, MaximalOperator, ProxSpec};
use crate::problems::{catalog, zoom_minimize, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Operators,
    Dynamics,
    Rates,
    Ergodic,
    All,
}

impl Suite {
    pub const PARTS: [Suite; 4] = [Suite::Operators, Suite::Dynamics, Suite::Rates, Suite::Ergodic];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Operators => "operators",
            Suite::Dynamics => "dynamics",
            Suite::Rates => "rates",
            Suite::Ergodic => "ergodic",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Suite::All]
            .into_iter()
            .chain(Suite::PARTS)
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "suite",
                name: s.to_string(),
            })
    }
}

/// Deliberate defects used as negative controls for the suites themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    /// `x − τ·sign(x)` without clipping at zero.
    SoftThreshold,
}

impl FromStr for Mutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft-threshold" | "soft_threshold" => Ok(Mutation::SoftThreshold),
            _ => Err(Error::UnknownName {
                kind: "mutation",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckFailure {
    pub check: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: usize,
    pub failures: usize,
    pub failed: Vec<CheckFailure>,
}

impl SuiteReport {
    fn new(suite: Suite) -> Self {
        Self {
            suite,
            checks: 0,
            failures: 0,
            failed: Vec::new(),
        }
    }

    fn check(&mut self, name: impl fmt::Display, ok: bool, detail: impl fmt::Display) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
            self.failed.push(CheckFailure {
                check: name.to_string(),
                detail: detail.to_string(),
            });
        }
    }

    fn error(&mut self, name: impl fmt::Display, err: Error) {
        self.check(name, false, err);
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Runs one suite, or every suite for [`Suite::All`].
pub fn run_suite(suite: Suite, seed: u64, mutation: Option<Mutation>) -> Vec<SuiteReport> {
    let ctx = Context::new(seed, mutation);
    let parts: Vec<Suite> = match suite {
        Suite::All => Suite::PARTS.to_vec(),
        one => vec![one],
    };
    parts
        .into_iter()
        .map(|s| {
            let mut report = SuiteReport::new(s);
            match s {
                Suite::Operators => operators_suite(&ctx, &mut report),
                Suite::Dynamics => dynamics_suite(&ctx, &mut report),
                Suite::Rates => rates_suite(&ctx, &mut report),
                Suite::Ergodic => ergodic_suite(&ctx, &mut report),
                Suite::All => unreachable!(),
            }
            report
        })
        .collect()
}

fn broken_soft_threshold(weight: f64) -> MaximalOperator {
    MaximalOperator::new("l1_norm(mutated)", None, move |gamma, x: &State| {
        x.map(|v| v - gamma * weight * v.signum() * (v != 0.0) as u8 as f64)
    })
}

struct Context {
    seed: u64,
    mutation: Option<Mutation>,
    problems: Vec<(String, ProblemSpec, Result<ProblemInstance>)>,
}

impl Context {
    fn new(seed: u64, mutation: Option<Mutation>) -> Self {
        let problems = catalog()
            .into_iter()
            .map(|(label, spec)| {
                let built = build_instance(&spec, mutation);
                (label, spec, built)
            })
            .collect();
        Self {
            seed,
            mutation,
            problems,
        }
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
    }

    /// Built catalog problems; construction failures are recorded in `report`.
    fn instances(&self, report: &mut SuiteReport) -> Vec<(&str, &ProblemSpec, &ProblemInstance)> {
        let mut out = Vec::new();
        for (label, spec, built) in &self.problems {
            match built {
                Ok(p) => out.push((label.as_str(), spec, p)),
                Err(e) => report.error(format!("{label}: build"), e.clone()),
            }
        }
        out
    }
}

/// Builds a catalog problem, swapping in the mutated `∂‖·‖₁` resolvent when asked.
/// A mutated problem keeps the catalog's solution only if it is still an equilibrium.
fn build_instance(spec: &ProblemSpec, mutation: Option<Mutation>) -> Result<ProblemInstance> {
    let weight = match spec {
        ProblemSpec::Lasso { weight, .. } => Some(*weight),
        ProblemSpec::L1PlusIdentity { .. } => Some(1.0),
        _ => None,
    };
    match (mutation, weight) {
        (Some(Mutation::SoftThreshold), Some(w)) => {
            let clean = spec.build()?;
            let mut p = ProblemInstance::new(
                spec.name(),
                spec.dim(),
                broken_soft_threshold(w),
                clean.b().clone(),
            )?;
            if let Some(rho) = clean.rho() {
                p = p.with_rho(rho)?;
            }
            if let Some(obj) = clean.objective() {
                p = p.with_objective(obj.clone());
            }
            match clean.known_solution() {
                Some(x) => p.with_solution(x.clone()),
                None => Ok(p),
            }
        }
        _ => spec.build(),
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> State {
    State::from_fn(n, |_, _| rng.random_range(-radius..=radius))
}

/// Deterministic starting point for catalog runs.
pub fn default_x0(dim: usize, seed: u64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    uniform(&mut rng, dim, 2.0)
}

/// The known solution (if any), `x0`, and three seeded points of `dom A`.
pub fn probe_points(problem: &ProblemInstance, x0: &State, seed: u64) -> Vec<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9B0B);
    let mut probes: Vec<State> = problem.known_solution().into_iter().cloned().collect();
    probes.push(x0.clone());
    for _ in 0..3 {
        // J_A maps onto dom A
        probes.push(problem.a().resolve(1.0, &uniform(&mut rng, problem.dim(), 3.0)));
    }
    probes
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

// ---------------------------------------------------------------- operators

struct CatalogOperator {
    label: String,
    spec: ProxSpec,
    op: MaximalOperator,
    dim: usize,
}

fn operator_catalog(mutation: Option<Mutation>) -> Result<Vec<CatalogOperator>> {
    let specs: Vec<(ProxSpec, usize)> = vec![
        (ProxSpec::L1Norm { weight: 1.0 }, 1),
        (ProxSpec::L1Norm { weight: 0.3 }, 2),
        (
            ProxSpec::BoxIndicator {
                lo: Bound::Scalar(-1.0),
                hi: Bound::Scalar(0.5),
            },
            1,
        ),
        (
            ProxSpec::BoxIndicator {
                lo: Bound::Vector(vec![-1.0, 0.0]),
                hi: Bound::Vector(vec![2.0, 0.5]),
            },
            2,
        ),
        (
            ProxSpec::BallIndicator {
                radius: 1.5,
                center: Some(vec![0.5, -0.5]),
            },
            2,
        ),
        (
            ProxSpec::Quadratic {
                q: vec![vec![2.0]],
                b: vec![-1.0],
            },
            1,
        ),
        (
            ProxSpec::Quadratic {
                q: vec![vec![2.0, 0.5], vec![0.5, 1.0]],
                b: vec![1.0, -1.0],
            },
            2,
        ),
        (
            ProxSpec::LinearMonotone {
                m: vec![vec![1.0, 2.0], vec![-2.0, 0.5]],
            },
            2,
        ),
        (ProxSpec::Zero, 2),
    ];
    specs
        .into_iter()
        .map(|(spec, dim)| {
            let op = match (&spec, mutation) {
                (ProxSpec::L1Norm { weight }, Some(Mutation::SoftThreshold)) => {
                    broken_soft_threshold(*weight)
                }
                _ => spec.build()?,
            };
            Ok(CatalogOperator {
                label: format!("{}[{dim}d]", spec.name()),
                spec,
                op,
                dim,
            })
        })
        .collect()
}

const OPERATOR_GAMMAS: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
const OPERATOR_PAIRS: usize = 1000;
const OPERATOR_TOL: f64 = 1e-10;

fn operators_suite(ctx: &Context, report: &mut SuiteReport) {
    let ops = match operator_catalog(ctx.mutation) {
        Ok(ops) => ops,
        Err(e) => return report.error("operator catalog", e),
    };
    for (k, c) in ops.iter().enumerate() {
        let mut rng = ctx.rng(100 + k as u64);
        for gamma in OPERATOR_GAMMAS {
            let (mut firm_worst, mut yosida_worst) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for _ in 0..OPERATOR_PAIRS {
                let x = uniform(&mut rng, c.dim, 5.0);
                let y = uniform(&mut rng, c.dim, 5.0);
                let jx = c.op.resolve(gamma, &x);
                let jy = c.op.resolve(gamma, &y);
                let dj = &jx - &jy;
                firm_worst = firm_worst.max(dj.norm_squared() - dj.dot(&(&x - &y)));
                let my = (&x - &jx) / gamma - (&y - &jy) / gamma;
                yosida_worst = yosida_worst.max(my.norm() - (&x - &y).norm() / gamma);
            }
            report.check(
                format!("{}: firm nonexpansiveness at gamma={gamma}", c.label),
                firm_worst <= OPERATOR_TOL,
                format!("largest ‖Jx−Jy‖² − ⟨Jx−Jy, x−y⟩ = {firm_worst:e}"),
            );
            report.check(
                format!("{}: Yosida 1/gamma-Lipschitz at gamma={gamma}", c.label),
                yosida_worst <= OPERATOR_TOL,
                format!("largest excess {yosida_worst:e}"),
            );
        }

        if let Some(zero) = c.spec.known_zero(c.dim) {
            let worst = OPERATOR_GAMMAS
                .iter()
                .map(|g| (c.op.resolve(*g, &zero) - &zero).amax())
                .fold(0.0, f64::max);
            report.check(
                format!("{}: resolvent fixes a zero", c.label),
                worst <= 1e-12 * (1.0 + zero.amax()),
                format!("largest ‖J x̄ − x̄‖∞ = {worst:e}"),
            );
        }

        let grid = [0.01, 0.1, 0.5, 1.0, 2.0, 10.0];
        let mut failures = 0;
        let mut tested = 0;
        for _ in 0..50 {
            let x = uniform(&mut rng, c.dim, 5.0);
            for lambda in grid {
                for mu in grid {
                    match check_resolvent_parameter_inequality(&c.op, lambda, mu, &x) {
                        Ok(r) if r.holds => {}
                        Ok(_) => failures += 1,
                        Err(e) => return report.error(format!("{}: parameter inequality", c.label), e),
                    }
                    tested += 1;
                }
            }
        }
        report.check(
            format!("{}: resolvent parameter inequality", c.label),
            failures == 0,
            format!("{failures} of {tested} (lambda, mu, x) triples violate it"),
        );

        prox_oracle_check(c, &mut rng, report);
    }
}

/// Nearest point of a disc, by zoom search over the boundary angle when `x` is outside.
/// Lattice zooming alone stalls on curved boundaries.
fn ball_projection_by_angle(radius: f64, center: Option<&[f64]>, x: &State) -> State {
    let c = State::from_column_slice(center.unwrap_or(&[0.0, 0.0]));
    if (x - &c).norm() <= radius {
        return x.clone();
    }
    let on_circle = |theta: f64| &c + State::from_vec(vec![theta.cos(), theta.sin()]) * radius;
    let theta = zoom_minimize(
        |th| (on_circle(th[0]) - x).norm(),
        &[-std::f64::consts::PI],
        &[std::f64::consts::PI],
        181,
    );
    on_circle(theta[0])
}

/// A box containing the minimiser of `f(y) + ‖y − x‖²/(2γ)`: the bounding box of
/// `dom f` for indicators, otherwise a generous box around `x`.
fn search_box(spec: &ProxSpec, x: &State, n: usize) -> (Vec<f64>, Vec<f64>) {
    match spec {
        ProxSpec::BoxIndicator { lo, hi } => {
            let at = |b: &Bound, i: usize| match b {
                Bound::Scalar(v) => *v,
                Bound::Vector(v) => v[i],
            };
            ((0..n).map(|i| at(lo, i)).collect(), (0..n).map(|i| at(hi, i)).collect())
        }
        ProxSpec::BallIndicator { radius, center } => {
            let c = center.clone().unwrap_or_else(|| vec![0.0; n]);
            (
                c.iter().map(|v| v - radius).collect(),
                c.iter().map(|v| v + radius).collect(),
            )
        }
        _ => {
            let reach = x.amax() + 10.0;
            (vec![-reach; n], vec![reach; n])
        }
    }
}

/// Closed-form resolvent against a grid minimiser of `f(y) + ‖y − x‖²/(2γ)`, or for
/// linear operators against the defining equation `(I + γM) y = x`.
fn prox_oracle_check(c: &CatalogOperator, rng: &mut ChaCha8Rng, report: &mut SuiteReport) {
    let mut worst: f64 = 0.0;
    for gamma in [0.1, 1.0] {
        for _ in 0..4 {
            let x = uniform(rng, c.dim, 3.0);
            let closed = c.op.resolve(gamma, &x);
            let reference = match &c.spec {
                ProxSpec::LinearMonotone { m } => {
                    let m = nalgebra::DMatrix::from_fn(c.dim, c.dim, |i, j| m[i][j]);
                    let lhs = &closed + (&m * &closed) * gamma;
                    worst = worst.max((lhs - &x).amax());
                    continue;
                }
                ProxSpec::BallIndicator { radius, center } if c.dim == 2 => {
                    ball_projection_by_angle(*radius, center.as_deref(), &x)
                }
                spec => {
                    let (lo, hi) = search_box(spec, &x, c.dim);
                    zoom_minimize(
                        |y| {
                            spec.function_value(y).unwrap_or(f64::INFINITY)
                                + (y - &x).norm_squared() / (2.0 * gamma)
                        },
                        &lo,
                        &hi,
                        41,
                    )
                }
            };
            worst = worst.max((&closed - &reference).amax());
        }
    }
    report.check(
        format!("{}: closed form matches brute-force minimiser", c.label),
        worst <= 1e-4,
        format!("largest coordinate gap {worst:e}"),
    );
}

// ----------------------------------------------------------------- dynamics

const LIPSCHITZ_PAIRS: usize = 10_000;
const GAMMA_FRACTIONS: [f64; 3] = [0.1, 0.5, 0.9];

fn sinusoidal(beta: f64) -> Result<StepSchedule> {
    StepSchedule::from_spec(
        ScheduleSpec::Sinusoidal {
            lo: 0.2 * beta,
            hi: 0.8 * beta,
            period: 10.0,
        },
        beta,
    )
}

fn dynamics_suite(ctx: &Context, report: &mut SuiteReport) {
    for (k, (label, _spec, p)) in ctx.instances(report).into_iter().enumerate() {
        let beta = p.beta();
        let gammas: Vec<f64> = GAMMA_FRACTIONS.iter().map(|f| f * beta).collect();
        match lipschitz_probe(p, &gammas, LIPSCHITZ_PAIRS, 10.0, ctx.seed) {
            Ok(r) => report.check(
                format!("{label}: field is sqrt(6)-Lipschitz"),
                r.max_ratio <= SQRT_6 + 1e-8,
                format!("max ratio {} at gamma {}", r.max_ratio, r.gamma_at_max),
            ),
            Err(e) => report.error(format!("{label}: lipschitz probe"), e),
        }

        let growth: Result<Vec<f64>> = [1e6, 2e6]
            .iter()
            .map(|r| growth_probe(p, 0.5 * beta, 2000, *r, ctx.seed))
            .collect();
        match growth {
            Ok(g) => {
                let stable = g.iter().all(|v| v.is_finite()) && g[1] <= 2.0 * g[0] && g[0] <= 2.0 * g[1];
                report.check(
                    format!("{label}: linear growth constant is stable under radius doubling"),
                    stable,
                    format!("sup ‖f‖/(1+‖x‖) = {} then {}", g[0], g[1]),
                );
            }
            Err(e) => report.error(format!("{label}: growth probe"), e),
        }

        // J_A maps onto dom A, so these points lie in the domain
        let mut rng = ctx.rng(200 + k as u64);
        let mut worst_vanish: f64 = 0.0;
        let tiny = 0.5f64.powi(30);
        let mut equilibrium_ok = true;
        for _ in 0..100 {
            let x = p.a().resolve(1.0, &uniform(&mut rng, p.dim(), 5.0));
            match fbf_vector_field(p, tiny, &x) {
                Ok(f) => worst_vanish = worst_vanish.max(f.dx.norm()),
                Err(e) => return report.error(format!("{label}: vanishing field"), e),
            }
            for g in &gammas {
                let f = fbf_vector_field(p, *g, &x).expect("gamma in range");
                let gap = (&x - &f.z).norm();
                let d = f.dx.norm();
                let slack = 1e-10 * (1.0 + x.norm());
                equilibrium_ok &= d >= (1.0 - g / beta) * gap - slack && d <= (1.0 + g / beta) * gap + slack;
            }
        }
        report.check(
            format!("{label}: field vanishes as gamma -> 0"),
            worst_vanish <= 1e-6,
            format!("largest ‖f(2^-30, x)‖ = {worst_vanish:e}"),
        );
        if let Some(xbar) = p.known_solution() {
            for g in &gammas {
                let f = fbf_vector_field(p, *g, xbar).expect("gamma in range");
                equilibrium_ok &= f.dx.norm() <= 1e-10 && f.residual(xbar, *g) <= 1e-10;
            }
        }
        report.check(
            format!("{label}: zero residual iff zero field"),
            equilibrium_ok,
            "(1 − γ/β)‖x − z‖ ≤ ‖f‖ ≤ (1 + γ/β)‖x − z‖ failed somewhere",
        );

        let x0 = default_x0(p.dim(), ctx.seed);
        let schedule = match sinusoidal(beta) {
            Ok(s) => s,
            Err(e) => return report.error(format!("{label}: schedule"), e),
        };
        report.check(
            format!("{label}: schedule stays inside its declared band"),
            schedule.verify(20.0, 2001).is_ok(),
            format!("{:?}", schedule.verify(20.0, 2001)),
        );
        match integrate(p, &schedule, &x0, &IntegratorOptions::rk4(0.01, 10.0, 0.01)) {
            Ok(rec) => {
                for v in [
                    velocity_monitor(&rec),
                    inclusion_monitor(&rec, p),
                    zdot_bound_monitor(&rec, &schedule),
                ] {
                    report.check(format!("{label}: {} monitor", v.name), v.holds, v.detail);
                }
            }
            Err(e) => report.error(format!("{label}: integrate"), e),
        }

        for sched in [StepSchedule::constant(0.5 * beta, beta), sinusoidal(beta)] {
            let sched = match sched {
                Ok(s) => s,
                Err(e) => return report.error(format!("{label}: schedule"), e),
            };
            let what = if sched.is_constant() { "constant" } else { "sinusoidal" };
            match euler_discrete_gap(p, &sched, &x0, 100) {
                Ok((ok, worst)) => report.check(
                    format!("{label}: Euler h=1 equals discrete iteration ({what} gamma)"),
                    ok,
                    format!("largest relative coordinate gap {worst:e}"),
                ),
                Err(e) => report.error(format!("{label}: coincidence"), e),
            }
        }
    }
}

/// Coordinatewise comparison of unit-step Euler with the discrete iteration using
/// `γ_n = γ(n)`. Returns whether every coordinate agrees to `1e−12` relative, and
/// the largest relative gap.
pub fn euler_discrete_gap(
    problem: &ProblemInstance,
    schedule: &StepSchedule,
    x0: &State,
    steps: usize,
) -> Result<(bool, f64)> {
    let rec = integrate(
        problem,
        schedule,
        x0,
        &IntegratorOptions::euler(1.0, steps as f64, 1.0),
    )?;
    let it = run_tseng(
        problem,
        &GammaSequence::Schedule(schedule.clone()),
        x0,
        steps,
        0.0,
    )?;
    let mut discrete: Vec<&State> = it.iterates.iter().map(|i| &i.x).collect();
    if !it.converged {
        discrete.push(&it.final_x);
    }
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for (s, xd) in rec.samples.iter().zip(discrete) {
        for (a, b) in s.x.iter().zip(xd.iter()) {
            let gap = (a - b).abs() / 1f64.max(a.abs()).max(b.abs());
            worst = worst.max(gap);
            ok &= rel_close(*a, *b, 1e-12);
        }
    }
    Ok((ok, worst))
}

// -------------------------------------------------------------------- rates

fn rates_suite(ctx: &Context, report: &mut SuiteReport) {
    for (label, _spec, p) in ctx.instances(report) {
        let beta = p.beta();
        let schedule = match StepSchedule::constant(0.5 * beta, beta) {
            Ok(s) => s,
            Err(e) => return report.error(format!("{label}: schedule"), e),
        };
        let x0 = default_x0(p.dim(), ctx.seed);
        let Some(xbar) = p.known_solution() else {
            report.check(format!("{label}: has a certified solution"), false, "missing");
            continue;
        };
        match integrate(p, &schedule, &x0, &IntegratorOptions::rk4(0.01, 20.0, 0.01)) {
            Ok(rec) => {
                let v = fejer_monitor(&rec, xbar);
                report.check(format!("{label}: Fejér monotone"), v.holds, v.detail);
                if let Some(rho) = p.rho() {
                    match exponential_envelope(&rec, &schedule, rho, xbar) {
                        Ok(env) => {
                            let v = env.verdict();
                            report.check(format!("{label}: exponential envelope"), v.holds, v.detail);
                        }
                        Err(e) => report.error(format!("{label}: envelope"), e),
                    }
                }
            }
            Err(e) => report.error(format!("{label}: integrate"), e),
        }
        match integrate(p, &schedule, &x0, &IntegratorOptions::rk4(0.01, 50.0, 0.01)) {
            Ok(rec) => {
                let v = residual_integral_monitor(&rec, &schedule, Some(xbar));
                report.check(format!("{label}: residual integral bound"), v.holds, v.detail);
            }
            Err(e) => report.error(format!("{label}: integrate"), e),
        }
    }

    // constant schedules: the general envelope exponent equals the corollary rate
    let mut rng = ctx.rng(300);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let beta = rng.random_range(0.2..5.0);
        let rho = rng.random_range(0.05..3.0);
        let gamma = beta * rng.random_range(0.05..0.95);
        let t = rng.random_range(0.5..20.0);
        let steps = 1000;
        let dt = t / steps as f64;
        let exponent: f64 = (0..steps)
            .map(|_| 0.5 * dt * (2.0 * decay_integrand(rho, beta, gamma)))
            .sum();
        let general = (-exponent).exp();
        let closed = (-corollary_rate(rho, beta, gamma, beta - gamma) * t).exp();
        worst = worst.max((general - closed).abs() / closed);
    }
    report.check(
        "envelope agrees with the constant-schedule closed form",
        worst <= 1e-12,
        format!("largest relative gap {worst:e}"),
    );

    match negative_controls() {
        Ok(verdicts) => {
            for v in verdicts {
                report.check(
                    format!("negative control: {} monitor rejects its violating record", v.name),
                    v.is_violation(),
                    format!("{:?}: {}", v.status, v.detail),
                );
            }
        }
        Err(e) => report.error("negative controls", e),
    }

    match rotation_closed_form(0.5, 10.0, 0.01) {
        Ok(rel) => report.check(
            "rotation: ‖x(10)‖ matches e^{-γ²t}‖x₀‖",
            rel <= 1e-3,
            format!("relative error {rel:e}"),
        ),
        Err(e) => report.error("rotation closed form", e),
    }
    match rk4_order_ratio() {
        Ok(ratio) => report.check(
            "rotation: RK4 error ratio between h=0.1 and h=0.01 is about 1e4",
            (5e3..=2e4).contains(&ratio),
            format!("ratio {ratio:e}"),
        ),
        Err(e) => report.error("RK4 order", e),
    }
}

fn rotation() -> Result<ProblemInstance> {
    ProblemSpec::SkewRotation { n: 2 }.build()
}

/// Relative error of `‖x(t)‖` against `e^{−γ²t}‖x₀‖` on the plane rotation.
pub fn rotation_closed_form(gamma: f64, t: f64, h: f64) -> Result<f64> {
    let p = rotation()?;
    let x0 = State::from_vec(vec![1.0, 0.0]);
    let rec = integrate(
        &p,
        &StepSchedule::constant(gamma, p.beta())?,
        &x0,
        &IntegratorOptions::rk4(h, t, t),
    )?;
    let exact = (-gamma * gamma * t).exp();
    Ok((rec.last().x.norm() - exact).abs() / exact)
}

/// `err(h = 0.1) / err(h = 0.01)` for the residual at `T = 10` on the rotation with
/// `γ = 0.5`, where the exact residual is `e^{−T/4}‖x₀‖/γ·γ = e^{−T/4}`.
pub fn rk4_order_ratio() -> Result<f64> {
    let p = rotation()?;
    let gamma = 0.5;
    let x0 = State::from_vec(vec![1.0, 0.0]);
    let schedule = StepSchedule::constant(gamma, p.beta())?;
    let t = 10.0;
    // for the rotation ‖x − z‖ = γ‖x‖, so the residual ‖x − z‖/γ equals ‖x‖
    let exact = (-gamma * gamma * t).exp();
    let err = |h: f64| -> Result<f64> {
        let rec = integrate(&p, &schedule, &x0, &IntegratorOptions::rk4(h, t, t))?;
        Ok((rec.last().residual - exact).abs())
    };
    Ok(err(0.1)? / err(0.01)?)
}

// ------------------------------------------------------------------ ergodic

fn ergodic_suite(ctx: &Context, report: &mut SuiteReport) {
    for (k, (label, _spec, p)) in ctx.instances(report).into_iter().enumerate() {
        let Some(objective) = p.objective() else { continue };
        let beta = p.beta();
        let x0 = default_x0(p.dim(), ctx.seed);
        let probes = probe_points(p, &x0, ctx.seed.wrapping_add(k as u64));
        let schedule = match StepSchedule::constant(0.5 * beta, beta) {
            Ok(s) => s,
            Err(e) => return report.error(format!("{label}: schedule"), e),
        };
        match integrate(p, &schedule, &x0, &IntegratorOptions::rk4(0.01, 50.0, 0.1)) {
            Ok(rec) => {
                let v = ergodic_objective_monitor(&rec, objective, &probes);
                report.check(format!("{label}: continuous ergodic bound"), v.holds, v.detail);
            }
            Err(e) => report.error(format!("{label}: integrate"), e),
        }
        match run_tseng(p, &GammaSequence::List(vec![0.5 * beta]), &x0, 5000, 0.0) {
            Ok(rec) => {
                let v = ergodic_objective_monitor(&rec, objective, &probes);
                report.check(format!("{label}: discrete ergodic bound"), v.holds, v.detail);
                if let Some(xbar) = p.known_solution() {
                    let mut dists: Vec<f64> =
                        rec.iterates.iter().map(|i| (&i.x - xbar).norm()).collect();
                    if !rec.converged {
                        dists.push((&rec.final_x - xbar).norm());
                    }
                    let worst = dists
                        .windows(2)
                        .map(|w| w[1] - w[0])
                        .fold(f64::NEG_INFINITY, f64::max);
                    report.check(
                        format!("{label}: iterates are Fejér monotone"),
                        worst <= 1e-10,
                        format!("largest increase {worst:e}"),
                    );
                }
            }
            Err(e) => report.error(format!("{label}: run_tseng"), e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::soft_threshold;

    #[test]
    fn suite_names_round_trip() {
        for s in [Suite::All].into_iter().chain(Suite::PARTS) {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("everything".parse::<Suite>().is_err());
    }

    #[test]
    fn broken_soft_threshold_is_not_clipped() {
        let op = broken_soft_threshold(1.0);
        let x = State::from_vec(vec![0.25, -0.25, 0.0, 3.0]);
        let y = op.resolve(1.0, &x);
        assert_eq!(y.as_slice(), &[-0.75, 0.75, 0.0, 2.0]);
        assert_eq!(soft_threshold(0.25, 1.0), 0.0);
    }

    #[test]
    fn mutated_l1_problem_loses_its_equilibrium() {
        let spec = ProblemSpec::L1PlusIdentity {
            b: Bound::Scalar(3.0),
        };
        assert!(build_instance(&spec, None).is_ok());
        assert!(build_instance(&spec, Some(Mutation::SoftThreshold)).is_ok());
        let lasso = ProblemSpec::Lasso {
            matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            b: vec![3.0, 0.5],
            weight: 1.0,
        };
        assert!(build_instance(&lasso, Some(Mutation::SoftThreshold)).is_err());
    }

    #[test]
    fn rk4_order_and_closed_form() {
        let ratio = rk4_order_ratio().unwrap();
        assert!((5e3..=2e4).contains(&ratio), "{ratio}");
        assert!(rotation_closed_form(0.5, 10.0, 0.01).unwrap() < 1e-3);
    }

}

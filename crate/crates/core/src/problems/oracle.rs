//! Ground truth for catalog problems, computed without the vector field.
//!
//! * Algebraic: enumerate the active set of each coordinate (lower bound, upper
//!   bound, interior for boxes; zero, positive, negative for `|·|`), solve the
//!   resulting linear system, and keep the first candidate that satisfies every
//!   sign and multiplier condition.
//! * Grid: zooming grid search on the objective (or, for saddle problems, on the
//!   primal and dual value functions), restricted to dimension ≤ 3 per block.

use nalgebra::{DMatrix, DVector};

use super::{AffineForm, CoordKind, ProblemSpec};
use crate::error::{Error, Result};
use crate::linalg::State;

pub const ENUMERATION_MAX_DIM: usize = 10;
pub const GRID_MAX_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Algebra,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Free,
    AtLower,
    AtUpper,
    Zero,
    Positive,
    Negative,
}

fn choices(kind: CoordKind) -> &'static [Status] {
    match kind {
        CoordKind::Free => &[Status::Free],
        CoordKind::Interval(l, h) if l == h => &[Status::AtLower],
        CoordKind::Interval(..) => &[Status::Free, Status::AtLower, Status::AtUpper],
        CoordKind::Abs(_) => &[Status::Zero, Status::Positive, Status::Negative],
    }
}

/// Returns a zero of `A + M + q` by exhaustive active-set enumeration.
pub(crate) fn enumerate_active_sets(form: &AffineForm) -> Option<State> {
    let n = form.kinds.len();
    let options: Vec<&[Status]> = form.kinds.iter().map(|k| choices(*k)).collect();
    let scale = 1.0 + form.q.amax() + form.m.amax();
    let tol = 1e-9 * scale;
    let mut counter = vec![0usize; n];

    loop {
        let statuses: Vec<Status> = (0..n).map(|i| options[i][counter[i]]).collect();
        if let Some(x) = solve_with_statuses(form, &statuses) {
            if kkt_holds(form, &statuses, &x, tol) {
                return Some(x);
            }
        }
        // mixed-radix increment
        let mut i = 0;
        loop {
            if i == n {
                return None;
            }
            counter[i] += 1;
            if counter[i] < options[i].len() {
                break;
            }
            counter[i] = 0;
            i += 1;
        }
    }
}

fn solve_with_statuses(form: &AffineForm, statuses: &[Status]) -> Option<State> {
    let n = statuses.len();
    let mut x = DVector::zeros(n);
    let mut free = Vec::new();
    let mut shift = DVector::zeros(n);
    for (i, (s, k)) in statuses.iter().zip(&form.kinds).enumerate() {
        match (s, k) {
            (Status::AtLower, CoordKind::Interval(l, _)) => x[i] = *l,
            (Status::AtUpper, CoordKind::Interval(_, h)) => x[i] = *h,
            (Status::Zero, _) => x[i] = 0.0,
            (Status::Positive, CoordKind::Abs(w)) => {
                free.push(i);
                shift[i] = *w;
            }
            (Status::Negative, CoordKind::Abs(w)) => {
                free.push(i);
                shift[i] = -*w;
            }
            (Status::Free, _) => free.push(i),
            _ => unreachable!("status incompatible with coordinate kind"),
        }
    }
    if free.is_empty() {
        return Some(x);
    }
    let fixed_part = &form.m * &x;
    let k = free.len();
    let sub = DMatrix::from_fn(k, k, |r, c| form.m[(free[r], free[c])]);
    let rhs = DVector::from_fn(k, |r, _| -form.q[free[r]] - shift[free[r]] - fixed_part[free[r]]);
    let sol = sub.clone().lu().solve(&rhs)?;
    if (&sub * &sol - &rhs).amax() > 1e-10 * (1.0 + rhs.amax()) {
        return None;
    }
    for (r, &i) in free.iter().enumerate() {
        x[i] = sol[r];
    }
    Some(x)
}

fn kkt_holds(form: &AffineForm, statuses: &[Status], x: &State, tol: f64) -> bool {
    if x.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let g = &form.m * x + &form.q;
    statuses.iter().zip(&form.kinds).enumerate().all(|(i, (s, k))| {
        let (xi, gi) = (x[i], g[i]);
        match (s, k) {
            (Status::Free, CoordKind::Interval(l, h)) => {
                xi >= l - tol && xi <= h + tol && gi.abs() <= tol
            }
            (Status::Free, _) => gi.abs() <= tol,
            // −g ∈ N_[l,h](x)
            (Status::AtLower, CoordKind::Interval(l, h)) => l == h || gi >= -tol,
            (Status::AtUpper, _) => gi <= tol,
            // −g ∈ w·∂|x|
            (Status::Zero, CoordKind::Abs(w)) => gi.abs() <= w + tol,
            (Status::Positive, CoordKind::Abs(w)) => xi >= -tol && (gi + w).abs() <= tol,
            (Status::Negative, CoordKind::Abs(w)) => xi <= tol && (gi - w).abs() <= tol,
            _ => false,
        }
    })
}

/// Zooming grid minimisation of `f` over the box `[lo, hi]`.
///
/// Each level evaluates a `points`-per-axis lattice, then shrinks the box to two
/// lattice spacings around the best point. Stops once the spacing is below `1e−11`.
pub fn zoom_minimize<F>(f: F, lo: &[f64], hi: &[f64], points: usize) -> State
where
    F: Fn(&State) -> f64,
{
    let n = lo.len();
    let points = points.max(3);
    let (mut a, mut b) = (lo.to_vec(), hi.to_vec());
    let mut best = State::from_fn(n, |i, _| 0.5 * (lo[i] + hi[i]));
    for _level in 0..200 {
        let spacing: Vec<f64> = (0..n).map(|i| (b[i] - a[i]) / (points - 1) as f64).collect();
        let mut best_val = f64::INFINITY;
        let total = points.pow(n as u32);
        let mut x = State::zeros(n);
        for idx in 0..total {
            let mut rem = idx;
            for i in 0..n {
                x[i] = a[i] + (rem % points) as f64 * spacing[i];
                rem /= points;
            }
            let v = f(&x);
            if v < best_val {
                best_val = v;
                best.copy_from(&x);
            }
        }
        if spacing.iter().all(|s| *s < 1e-11) {
            break;
        }
        for i in 0..n {
            a[i] = (best[i] - 2.0 * spacing[i]).max(lo[i]);
            b[i] = (best[i] + 2.0 * spacing[i]).min(hi[i]);
        }
    }
    best
}

const GRID_POINTS: usize = 21;

/// Solution by zooming grid search (dimension ≤ 3, or ≤ 3 per player for saddles).
pub fn grid_oracle(spec: &ProblemSpec) -> Result<State> {
    let n = spec.dim();
    let form = spec.affine_form()?;
    let too_big = || {
        Error::OracleInapplicable(format!(
            "grid oracle supports dimension ≤ {GRID_MAX_DIM}, got {n}"
        ))
    };
    match spec {
        ProblemSpec::ConstrainedSaddle { payoff, .. } => {
            let mu = payoff.len();
            let kv = n - mu;
            if mu > GRID_MAX_DIM || kv > GRID_MAX_DIM {
                return Err(too_big());
            }
            let (lo, hi): (Vec<f64>, Vec<f64>) = form
                .kinds
                .iter()
                .map(|k| match k {
                    CoordKind::Interval(l, h) => (*l, *h),
                    _ => unreachable!(),
                })
                .unzip();
            let p = form.m.view((0, mu), (mu, kv)).clone_owned();
            let c = form.q.rows(0, mu).clone_owned();
            let d = form.q.rows(mu, kv).clone_owned();
            // max over v of uᵀPv + cᵀu − dᵀv is separable in v
            let primal = |u: &State| {
                let s = p.transpose() * u - &d;
                c.dot(u)
                    + (0..kv)
                        .map(|j| (lo[mu + j] * s[j]).max(hi[mu + j] * s[j]))
                        .sum::<f64>()
            };
            let dual = |v: &State| {
                let r = &p * v + &c;
                let inner: f64 = (0..mu).map(|i| (lo[i] * r[i]).min(hi[i] * r[i])).sum();
                -(inner - d.dot(v))
            };
            let u = zoom_minimize(primal, &lo[..mu], &hi[..mu], GRID_POINTS);
            let v = zoom_minimize(dual, &lo[mu..], &hi[mu..], GRID_POINTS);
            Ok(State::from_iterator(n, u.iter().chain(v.iter()).copied()))
        }
        _ if n > GRID_MAX_DIM => Err(too_big()),
        ProblemSpec::SkewRotation { .. } => {
            // no objective: minimise the forward-backward residual ‖x − J(x − γBx)‖ with J = Id
            let residual = |x: &State| (&form.m * x + &form.q).norm();
            Ok(zoom_minimize(residual, &vec![-1.0; n], &vec![1.0; n], GRID_POINTS))
        }
        _ => {
            let objective = spec.objective().expect("convex catalog members have objectives");
            let (lo, hi): (Vec<f64>, Vec<f64>) = match spec {
                ProblemSpec::StronglyMonotoneQuadratic { .. } => form
                    .kinds
                    .iter()
                    .map(|k| match k {
                        CoordKind::Interval(l, h) => (*l, *h),
                        _ => unreachable!(),
                    })
                    .unzip(),
                _ => {
                    // w‖x̄‖₁ ≤ (f + h)(0) bounds the minimiser
                    let zero_val = objective.eval(&State::zeros(n));
                    let w = form
                        .kinds
                        .iter()
                        .map(|k| match k {
                            CoordKind::Abs(w) => *w,
                            _ => 0.0,
                        })
                        .fold(f64::INFINITY, f64::min);
                    let r = if w > 0.0 { zero_val / w + 1.0 } else { 100.0 };
                    (vec![-r; n], vec![r; n])
                }
            };
            Ok(zoom_minimize(|x| objective.eval(x), &lo, &hi, GRID_POINTS))
        }
    }
}

/// Solution by active-set enumeration, or in closed form above the enumeration limit.
pub fn algebraic_oracle(spec: &ProblemSpec) -> Result<State> {
    let n = spec.dim();
    if n > ENUMERATION_MAX_DIM {
        return spec.closed_form_solution().ok_or_else(|| {
            Error::OracleInapplicable(format!(
                "no closed form and dimension {n} exceeds the enumeration limit {ENUMERATION_MAX_DIM}"
            ))
        });
    }
    let form = spec.affine_form()?;
    enumerate_active_sets(&form)
        .ok_or_else(|| Error::OracleInapplicable("no consistent active set found".into()))
}

pub fn oracle_solve(spec: &ProblemSpec, method: OracleMethod) -> Result<State> {
    match method {
        OracleMethod::Algebra => algebraic_oracle(spec),
        OracleMethod::Grid => grid_oracle(spec),
    }
}

//! Lagrangian and noise-constrained regularized least squares.
//!
//! The Lagrangian program `w_loss·‖y − Az‖₂² + w_pen·R(z)` is solved by an
//! accelerated proximal-gradient method with monotone and gradient restarts.
//! With `λ` on the penalty the weights are `(1, λ)`; with `λ` on the loss
//! they are `(λ, 1)`.
//!
//! The constrained program `min R(z) s.t. ‖Az − y‖₂ ≤ ε` is solved for
//! `ε > 0` by bisection on the penalty multiplier with warm starts, and for
//! `ε = 0` by ADMM on the affine set `{Az = y}` followed by a least-squares
//! refit on the detected support.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::linalg::{inf_norm, least_squares_on_support, Design};
use crate::regularizers::RegularizerSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LambdaSide {
    /// `λ‖y − Az‖² + R(z)`
    #[serde(rename = "loss")]
    OnLoss,
    /// `‖y − Az‖² + λR(z)`
    #[serde(rename = "penalty")]
    OnPenalty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Form {
    Lagrangian { lambda: f64, side: LambdaSide },
    Constrained { epsilon: f64 },
}

/// Measurement matrix, observations and the program to solve.
#[derive(Debug, Clone)]
pub struct Problem {
    design: Arc<Design>,
    y: DVector<f64>,
    form: Form,
}

impl Problem {
    pub fn new(design: Arc<Design>, y: DVector<f64>, form: Form) -> Result<Self> {
        if design.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "observation vector",
                expected: design.nrows(),
                found: y.len(),
            });
        }
        check_finite(design.matrix().as_slice(), "measurement matrix")?;
        check_finite(y.as_slice(), "observation vector")?;
        match form {
            Form::Lagrangian { lambda, .. } if !(lambda > 0.0 && lambda.is_finite()) => {
                return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")))
            }
            Form::Constrained { epsilon } if !(epsilon >= 0.0 && epsilon.is_finite()) => {
                return Err(Error::InvalidParameter(format!(
                    "epsilon must be nonnegative, got {epsilon}"
                )))
            }
            _ => {}
        }
        Ok(Problem { design, y, form })
    }

    pub fn lagrangian(a: DMatrix<f64>, y: DVector<f64>, lambda: f64, side: LambdaSide) -> Result<Self> {
        Problem::new(Arc::new(Design::new(a)), y, Form::Lagrangian { lambda, side })
    }

    pub fn constrained(a: DMatrix<f64>, y: DVector<f64>, epsilon: f64) -> Result<Self> {
        Problem::new(Arc::new(Design::new(a)), y, Form::Constrained { epsilon })
    }

    /// Same matrix, new observations and form. The matrix and its cached
    /// factorizations are shared.
    pub fn with(&self, y: DVector<f64>, form: Form) -> Result<Self> {
        Problem::new(Arc::clone(&self.design), y, form)
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn shared_design(&self) -> Arc<Design> {
        Arc::clone(&self.design)
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn form(&self) -> Form {
        self.form
    }

    /// Smallest multiplier (on the penalty) for which zero is optimal.
    pub fn lambda_max(&self, spec: &RegularizerSpec) -> Result<f64> {
        spec.validate(self.design.ncols())?;
        let q = self.design.apply_t(&self.y) * 2.0;
        Ok(spec.zero_gauge(q.as_slice()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub kkt_tol: f64,
    pub feas_tol: f64,
    pub obj_tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kkt_tol: 1e-8,
            feas_tol: 1e-6,
            obj_tol: 1e-8,
            max_iters: 50_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub x_hat: Vec<f64>,
    /// Lagrangian objective, or the penalty value for constrained solves.
    pub objective: f64,
    pub residual_l2: f64,
    pub iterations: usize,
    /// Optimality residual in units of the penalty's subdifferential.
    pub kkt_residual: f64,
    pub converged: bool,
    /// Final penalty-side multiplier chosen by the constrained homotopy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

fn weights(lambda: f64, side: LambdaSide) -> (f64, f64) {
    match side {
        LambdaSide::OnLoss => (lambda, 1.0),
        LambdaSide::OnPenalty => (1.0, lambda),
    }
}

fn objective(
    spec: &RegularizerSpec,
    w_loss: f64,
    w_pen: f64,
    x: &DVector<f64>,
    ax: &DVector<f64>,
    y: &DVector<f64>,
) -> f64 {
    w_loss * (ax - y).norm_squared() + w_pen * spec.eval_unchecked(x.as_slice())
}

struct Inner {
    x: DVector<f64>,
    ax: DVector<f64>,
    iterations: usize,
    kkt: f64,
    converged: bool,
}

/// Accelerated proximal gradient on `w_loss‖Ax − y‖² + w_pen R(x)`.
fn accelerated_prox_grad(
    design: &Design,
    y: &DVector<f64>,
    spec: &RegularizerSpec,
    w_loss: f64,
    w_pen: f64,
    x0: DVector<f64>,
    opts: &SolverOptions,
) -> Inner {
    let mut lip = 2.0 * w_loss * design.lipschitz_sq() * (1.0 + 1e-9);
    let grad = |ax: &DVector<f64>| design.apply_t(&(ax - y)) * (2.0 * w_loss);
    let smooth = |ax: &DVector<f64>| w_loss * (ax - y).norm_squared();

    let mut x = x0;
    let mut ax = design.apply(&x);
    let mut fx = objective(spec, w_loss, w_pen, &x, &ax, y);
    let mut yk = x.clone();
    let mut ayk = ax.clone();
    let mut t = 1.0_f64;
    let mut kkt = f64::INFINITY;

    for it in 1..=opts.max_iters {
        let g_y = grad(&ayk);
        let f_y = smooth(&ayk);
        let (xn, axn, step) = loop {
            let step = 1.0 / lip;
            let mut xn = &yk - &g_y * step;
            spec.prox_in_place(xn.as_mut_slice(), step * w_pen);
            let axn = design.apply(&xn);
            let d = &xn - &yk;
            let model = f_y + g_y.dot(&d) + 0.5 * lip * d.norm_squared();
            if smooth(&axn) <= model + 1e-12 * model.abs().max(f64::MIN_POSITIVE) {
                break (xn, axn, step);
            }
            lip *= 2.0;
        };
        let fn_ = objective(spec, w_loss, w_pen, &xn, &axn, y);
        let from_x = t == 1.0 && yk == x;
        if fn_ > fx && !from_x {
            // monotone restart: drop momentum and retake the step from x
            t = 1.0;
            yk.copy_from(&x);
            ayk.copy_from(&ax);
            continue;
        }

        // −∇f(xn) + [∇f(xn) − ∇f(y) + (y − xn)/step] ∈ w_pen ∂R(xn)
        let g_n = grad(&axn);
        let cert = &g_n - &g_y + (&yk - &xn) / step;
        kkt = inf_norm(cert.as_slice()) / w_pen;

        let restart = (&yk - &xn).dot(&(&xn - &x)) > 0.0;
        let t_next = if restart {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
        };
        let beta = if restart { 0.0 } else { (t - 1.0) / t_next };
        yk = &xn + (&xn - &x) * beta;
        ayk = &axn + (&axn - &ax) * beta;
        x = xn;
        ax = axn;
        fx = fn_;
        t = t_next;

        if kkt <= opts.kkt_tol {
            return Inner {
                x,
                ax,
                iterations: it,
                kkt,
                converged: true,
            };
        }
    }
    Inner {
        x,
        ax,
        iterations: opts.max_iters,
        kkt,
        converged: false,
    }
}

fn check_spec(problem: &Problem, spec: &RegularizerSpec) -> Result<()> {
    spec.validate(problem.design.ncols())?;
    if problem.design.lipschitz_sq() == 0.0 {
        return Err(Error::InvalidParameter("measurement matrix is zero".into()));
    }
    Ok(())
}

fn check_start(problem: &Problem, x0: Option<&[f64]>) -> Result<DVector<f64>> {
    let n = problem.design.ncols();
    match x0 {
        None => Ok(DVector::zeros(n)),
        Some(v) if v.len() == n => {
            check_finite(v, "warm start")?;
            Ok(DVector::from_column_slice(v))
        }
        Some(v) => Err(Error::DimensionMismatch {
            what: "warm start",
            expected: n,
            found: v.len(),
        }),
    }
}

/// Solves the Lagrangian program. Non-convergence is reported through
/// `converged = false`, not as an error.
pub fn solve_lagrangian(problem: &Problem, spec: &RegularizerSpec, opts: &SolverOptions) -> Result<SolveResult> {
    solve_lagrangian_from(problem, spec, opts, None)
}

/// [`solve_lagrangian`] with an explicit starting point.
pub fn solve_lagrangian_from(
    problem: &Problem,
    spec: &RegularizerSpec,
    opts: &SolverOptions,
    x0: Option<&[f64]>,
) -> Result<SolveResult> {
    let (lambda, side) = match problem.form {
        Form::Lagrangian { lambda, side } => (lambda, side),
        Form::Constrained { .. } => {
            return Err(Error::InvalidParameter(
                "solve_lagrangian needs a Lagrangian problem".into(),
            ))
        }
    };
    check_spec(problem, spec)?;
    let x0 = check_start(problem, x0)?;
    let (w_loss, w_pen) = weights(lambda, side);
    let inner = accelerated_prox_grad(&problem.design, &problem.y, spec, w_loss, w_pen, x0, opts);
    let ax = problem.design.apply(&inner.x);
    Ok(SolveResult {
        objective: objective(spec, w_loss, w_pen, &inner.x, &ax, &problem.y),
        residual_l2: (&ax - &problem.y).norm(),
        x_hat: inner.x.as_slice().to_vec(),
        iterations: inner.iterations,
        kkt_residual: inner.kkt,
        converged: inner.converged,
        lambda: None,
    })
}

/// Solves `min R(z) s.t. ‖Az − y‖₂ ≤ ε`.
pub fn solve_constrained(problem: &Problem, spec: &RegularizerSpec, opts: &SolverOptions) -> Result<SolveResult> {
    let epsilon = match problem.form {
        Form::Constrained { epsilon } => epsilon,
        Form::Lagrangian { .. } => {
            return Err(Error::InvalidParameter(
                "solve_constrained needs a constrained problem".into(),
            ))
        }
    };
    check_spec(problem, spec)?;
    let n = problem.design.ncols();
    let y_norm = problem.y.norm();
    if y_norm <= epsilon || y_norm == 0.0 {
        return Ok(SolveResult {
            x_hat: vec![0.0; n],
            objective: 0.0,
            residual_l2: y_norm,
            iterations: 0,
            kkt_residual: 0.0,
            converged: true,
            lambda: None,
        });
    }

    let design = &problem.design;
    let pinv = design.pseudo_inverse();
    let x_ls = pinv.apply(design, &problem.y);
    let ls_residual = (design.apply(&x_ls) - &problem.y).norm();
    if ls_residual > feasibility_limit(epsilon, y_norm, opts) {
        return Err(Error::Infeasible { ls_residual, epsilon });
    }

    if epsilon == 0.0 {
        equality_constrained(problem, spec, opts, x_ls)
    } else {
        homotopy(problem, spec, opts, epsilon)
    }
}

/// Largest accepted residual for a feasible point. For `ε = 0` an exact zero
/// is not attainable in floating point, so a relative slack on `‖y‖` is used.
pub fn feasibility_limit(epsilon: f64, y_norm: f64, opts: &SolverOptions) -> f64 {
    if epsilon > 0.0 {
        epsilon * (1.0 + opts.feas_tol)
    } else {
        1e-9 * y_norm
    }
}

/// Number of bisection steps on the multiplier.
const BISECTION_STEPS: usize = 60;
/// The bracket floor, relative to the zero-solution multiplier.
const LAMBDA_FLOOR: f64 = 1e-10;

fn homotopy(problem: &Problem, spec: &RegularizerSpec, opts: &SolverOptions, epsilon: f64) -> Result<SolveResult> {
    let design = &problem.design;
    let y = &problem.y;
    let n = design.ncols();
    let solve_at = |lambda: f64, x0: &DVector<f64>| {
        let inner = accelerated_prox_grad(design, y, spec, 1.0, lambda, x0.clone(), opts);
        let residual = (&inner.ax - y).norm();
        (inner, residual)
    };

    // upper end of the bracket: a multiplier whose solution is infeasible
    let mut lambda_hi = problem.lambda_max(spec)?;
    if !lambda_hi.is_finite() {
        // penalties with no finite zero threshold (ridge-like)
        lambda_hi = 2.0 * inf_norm(design.apply_t(y).as_slice()).max(f64::MIN_POSITIVE);
        let zero = DVector::zeros(n);
        while solve_at(lambda_hi, &zero).1 <= epsilon {
            lambda_hi *= 10.0;
        }
    }
    let floor = LAMBDA_FLOOR * lambda_hi;

    let mut iterations = 0;
    let mut x_hi = DVector::zeros(n);
    let mut lambda_lo = lambda_hi;
    let mut lo: Option<(Inner, f64)> = None;
    // walk down by decades until the residual meets the budget
    while lambda_lo > floor {
        lambda_lo = (lambda_lo / 10.0).max(floor);
        let (inner, residual) = solve_at(lambda_lo, &x_hi);
        iterations += inner.iterations;
        if residual <= epsilon {
            lo = Some((inner, residual));
            break;
        }
        lambda_hi = lambda_lo;
        x_hi = inner.x;
    }
    let Some((mut best, mut best_residual)) = lo else {
        // budget only met by (near) least squares; report the floor solution
        let (inner, residual) = solve_at(floor, &x_hi);
        iterations += inner.iterations;
        return Ok(finish_constrained(spec, inner, residual, iterations, floor, false));
    };

    for _ in 0..BISECTION_STEPS {
        if best_residual >= epsilon * (1.0 - opts.feas_tol) {
            break;
        }
        let mid = (lambda_lo.ln() + 0.5 * (lambda_hi.ln() - lambda_lo.ln())).exp();
        if mid <= lambda_lo || mid >= lambda_hi {
            break;
        }
        let (inner, residual) = solve_at(mid, &best.x);
        iterations += inner.iterations;
        if residual <= epsilon {
            lambda_lo = mid;
            best = inner;
            best_residual = residual;
        } else {
            lambda_hi = mid;
        }
    }
    let converged = best.converged;
    Ok(finish_constrained(spec, best, best_residual, iterations, lambda_lo, converged))
}

fn finish_constrained(
    spec: &RegularizerSpec,
    inner: Inner,
    residual: f64,
    iterations: usize,
    lambda: f64,
    converged: bool,
) -> SolveResult {
    SolveResult {
        objective: spec.eval_unchecked(inner.x.as_slice()),
        x_hat: inner.x.as_slice().to_vec(),
        residual_l2: residual,
        iterations,
        kkt_residual: inner.kkt,
        converged,
        lambda: Some(lambda),
    }
}

/// Support threshold for the least-squares refit, relative to `‖x‖∞`.
const SUPPORT_THRESHOLD: f64 = 1e-6;
/// Iterations between refit attempts and between penalty rebalancing.
const POLISH_EVERY: usize = 25;

/// ADMM for `min R(z) s.t. Az = y`:
/// `x ← Π(z − u)`, `z ← prox_{R/ρ}(x + u)`, `u ← u + x − z`, with `Π` the
/// projection onto the affine set.
fn equality_constrained(
    problem: &Problem,
    spec: &RegularizerSpec,
    opts: &SolverOptions,
    x_ls: DVector<f64>,
) -> Result<SolveResult> {
    let design = &problem.design;
    let y = &problem.y;
    let pinv = design.pseudo_inverse();
    let n = design.ncols();
    let y_norm = y.norm();
    let feas = feasibility_limit(0.0, y_norm, opts);
    let project = |v: &DVector<f64>| v - pinv.apply(design, &(design.apply(v) - y));

    // homogeneous penalties make the iteration scale-equivariant with this ρ
    let scale = inf_norm(x_ls.as_slice()).max(f64::MIN_POSITIVE);
    let mut rho = 1.0 / scale;
    let mut z = x_ls.clone();
    let mut u = DVector::zeros(n);
    let mut x = x_ls;
    let sqrt_n = (n as f64).sqrt();

    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=opts.max_iters {
        iterations = it;
        x = project(&(&z - &u));
        let z_old = z.clone();
        z = &x + &u;
        spec.prox_in_place(z.as_mut_slice(), 1.0 / rho);
        u += &x - &z;

        let r_pri = (&x - &z).norm();
        let r_dual = rho * (&z - &z_old).norm();
        let eps_pri = sqrt_n * opts.obj_tol * scale + opts.obj_tol * x.norm().max(z.norm());
        let eps_dual = sqrt_n * opts.obj_tol / scale.max(1.0) + opts.obj_tol * rho * u.norm();

        if it % POLISH_EVERY == 0 {
            if let Some(polished) = polish(design.matrix(), y, &z, feas) {
                let r_polished = spec.eval_unchecked(polished.as_slice());
                let r_iter = spec.eval_unchecked(x.as_slice());
                if r_polished <= r_iter * (1.0 + opts.obj_tol) {
                    let cert = dual_certificate(problem, spec, &polished, &u, rho);
                    if cert <= opts.kkt_tol.sqrt() {
                        best = Some((polished, cert));
                        converged = true;
                        break;
                    }
                }
            }
            if r_pri > 10.0 * r_dual {
                rho *= 2.0;
                u /= 2.0;
            } else if r_dual > 10.0 * r_pri {
                rho /= 2.0;
                u *= 2.0;
            }
        }
        if r_pri <= eps_pri && r_dual <= eps_dual {
            converged = true;
            break;
        }
    }

    let (x_hat, kkt) = match best {
        Some(b) => b,
        None => {
            // x is feasible by construction; try one last refit from z
            let cert = dual_certificate(problem, spec, &x, &u, rho);
            match polish(design.matrix(), y, &z, feas) {
                Some(p) if spec.eval_unchecked(p.as_slice()) <= spec.eval_unchecked(x.as_slice()) => {
                    let c = dual_certificate(problem, spec, &p, &u, rho);
                    (p, c)
                }
                _ => (x, cert),
            }
        }
    };
    let residual = (design.apply(&x_hat) - y).norm();
    Ok(SolveResult {
        objective: spec.eval_unchecked(x_hat.as_slice()),
        x_hat: x_hat.as_slice().to_vec(),
        residual_l2: residual,
        iterations,
        kkt_residual: kkt,
        converged: converged && residual <= feas,
        lambda: None,
    })
}

fn polish(a: &DMatrix<f64>, y: &DVector<f64>, z: &DVector<f64>, feas: f64) -> Option<DVector<f64>> {
    let zmax = inf_norm(z.as_slice());
    if zmax == 0.0 {
        return None;
    }
    let support: Vec<usize> = (0..z.len())
        .filter(|&i| z[i].abs() > SUPPORT_THRESHOLD * zmax)
        .collect();
    let x = least_squares_on_support(a, &support, y)?;
    if (a * &x - y).norm() <= feas {
        Some(x)
    } else {
        None
    }
}

/// Distance of `−ρu`, projected onto the row space of `A`, from `∂R(x)`.
fn dual_certificate(problem: &Problem, spec: &RegularizerSpec, x: &DVector<f64>, u: &DVector<f64>, rho: f64) -> f64 {
    let design = &problem.design;
    let q = -(u * rho);
    let q_row = design.pseudo_inverse().apply(design, &design.apply(&q));
    crate::optimality::subgradient_distance(spec, x.as_slice(), q_row.as_slice()).unwrap_or(f64::INFINITY)
}

/// One point of a regularization path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<SolveResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Solves the Lagrangian program along a strictly monotone grid, warm
/// starting each point from the previous solution. `template` supplies the
/// data and the side λ sits on; its own λ is ignored.
pub fn solution_path(
    template: &Problem,
    spec: &RegularizerSpec,
    lambda_grid: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<PathPoint>> {
    let side = match template.form {
        Form::Lagrangian { side, .. } => side,
        Form::Constrained { .. } => {
            return Err(Error::InvalidParameter("paths need a Lagrangian template".into()))
        }
    };
    let increasing = lambda_grid.windows(2).all(|w| w[1] > w[0]);
    let decreasing = lambda_grid.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(Error::InvalidParameter("lambda grid must be strictly monotone".into()));
    }
    spec.validate(template.design.ncols())?;

    let mut warm: Option<Vec<f64>> = None;
    let mut out = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let point = template
            .with(template.y.clone(), Form::Lagrangian { lambda, side })
            .and_then(|p| solve_lagrangian_from(&p, spec, opts, warm.as_deref()));
        match point {
            Ok(res) => {
                warm = Some(res.x_hat.clone());
                out.push(PathPoint {
                    lambda,
                    result: Some(res),
                    error: None,
                });
            }
            Err(e) => out.push(PathPoint {
                lambda,
                result: None,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(out)
}

/// `count` log-spaced values from `hi` down to `lo` (both included).
pub fn log_grid_desc(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    let (a, b) = (hi.ln(), lo.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

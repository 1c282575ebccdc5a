//! Solution-branch tracing in the parameter lambda: pseudo-arclength
//! predictor-corrector with fold detection, large-amplitude seeding near the
//! half-eigenvalues, a deterministic multistart census, and bifurcation
//! diagram assembly.

use crate::eigen::EigenContext;
use crate::error::{Error, Result};
use crate::grid::{boundary_slope_margin, dot_l2, norm, GridFunction, NormKind};
use crate::nonlin::Nonlinearity;
use crate::operator::DiscreteOperator;
use crate::solver::{
    k_map, newton_solve, nonlinear_residual, perron_solve, solve_proper,
    PerronDirection, SolveStatus, SolverOptions, SubSuperPair,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignClass {
    Positive,
    Negative,
    SignChanging,
    Zero,
}

impl SignClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            SignClass::Positive => "positive",
            SignClass::Negative => "negative",
            SignClass::SignChanging => "sign_changing",
            SignClass::Zero => "zero",
        }
    }
}

/// Sign classification with a Hopf-type boundary slope margin: positive
/// requires a strictly positive interior minimum and a boundary slope
/// margin above a relative threshold.
pub fn classify_sign(u: &GridFunction) -> SignClass {
    let sup = norm(u, NormKind::Sup);
    if sup <= 1e-12 {
        return SignClass::Zero;
    }
    let thresh = 1e-7 * sup;
    if u.min() > 0.0 && boundary_slope_margin(u) > thresh {
        SignClass::Positive
    } else if u.max() < 0.0 && boundary_slope_margin(&u.scale(-1.0)) > thresh {
        SignClass::Negative
    } else {
        SignClass::SignChanging
    }
}

#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub lambda: f64,
    pub u: GridFunction,
    pub sup_norm: f64,
    pub min_val: f64,
    pub max_val: f64,
    pub sign_class: SignClass,
    pub residual_sup: f64,
    pub arc_index: usize,
}

impl BranchPoint {
    pub fn from_solution(
        dop: &DiscreteOperator,
        f: &Nonlinearity,
        lambda: f64,
        u: GridFunction,
        arc_index: usize,
    ) -> Result<BranchPoint> {
        let r = nonlinear_residual(dop, lambda, f, &u)?;
        Ok(BranchPoint {
            lambda,
            sup_norm: norm(&u, NormKind::Sup),
            min_val: u.min(),
            max_val: u.max(),
            sign_class: classify_sign(&u),
            residual_sup: norm(&r, NormKind::Sup),
            u,
            arc_index,
        })
    }

    pub fn signed_norm(&self) -> f64 {
        match self.sign_class {
            SignClass::Positive => self.sup_norm,
            SignClass::Negative => -self.sup_norm,
            SignClass::Zero | SignClass::SignChanging => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Bounded,
    FromPlusInfinity,
    FromMinusInfinity,
    FromZero,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Bounded => "bounded",
            Provenance::FromPlusInfinity => "from_plus_infinity",
            Provenance::FromMinusInfinity => "from_minus_infinity",
            Provenance::FromZero => "from_zero",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FoldRecord {
    pub lambda: f64,
    /// sign of d lambda / d s after the fold
    pub direction: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    TargetReached,
    NormCap,
    StepUnderflow,
    PointCap,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub provenance: Provenance,
    pub folds: Vec<FoldRecord>,
    pub terminated: Termination,
}

impl Branch {
    pub fn lambda_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &self.points {
            lo = lo.min(p.lambda);
            hi = hi.max(p.lambda);
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone)]
pub struct StepControl {
    pub initial: f64,
    pub min: f64,
    pub max: f64,
    pub max_points: usize,
    /// sup-norm beyond which the branch is considered to have escaped
    pub norm_cap: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            initial: 0.05,
            min: 1e-8,
            max: 0.5,
            max_points: 600,
            norm_cap: 1e6,
        }
    }
}

/// Tangent in the relative product metric: the u-component is weighted by
/// 1/(1 + ||u||_L2) so arclength measures relative norm change, keeping
/// steps meaningful along blow-up branches.
struct TangentData {
    t_u: Vec<f64>,
    t_lambda: f64,
    /// squared u-weight of the metric at the anchor point
    metric2: f64,
}

fn band_jacobian(
    dop: &DiscreteOperator,
    f: &Nonlinearity,
    lambda: f64,
    u: &GridFunction,
) -> crate::band::BandMatrix {
    let pol = dop.policy_at(&u.values, dop.sense);
    let extra: Vec<f64> = (0..u.len())
        .map(|i| -f.deriv(&u.grid, i, u.values[i]))
        .collect();
    dop.policy_band(&pol, lambda, Some(&extra))
}

fn tangent(
    dop: &DiscreteOperator,
    f: &Nonlinearity,
    lambda: f64,
    u: &GridFunction,
    prev: &TangentData,
) -> Result<TangentData> {
    let lu = band_jacobian(dop, f, lambda, u).factor()?;
    // J b = dR/dlambda = u
    let mut b = u.values.clone();
    lu.solve(&mut b)?;
    let m = 1.0 / (1.0 + norm(u, NormKind::L2));
    let metric2 = m * m;
    let bgf = GridFunction {
        grid: u.grid,
        values: b.clone(),
    };
    let prev_gf = GridFunction {
        grid: u.grid,
        values: prev.t_u.clone(),
    };
    let tub = metric2 * dot_l2(&prev_gf, &bgf);
    let denom = prev.t_lambda - tub;
    if denom.abs() < 1e-300 || !denom.is_finite() {
        return Err(Error::LinearSolveFailure("degenerate tangent system".into()));
    }
    let t_lambda = 1.0 / denom;
    let t_u: Vec<f64> = b.iter().map(|c| -t_lambda * c).collect();
    let gf = GridFunction {
        grid: u.grid,
        values: t_u.clone(),
    };
    let nrm = (metric2 * dot_l2(&gf, &gf) + t_lambda * t_lambda).sqrt();
    Ok(TangentData {
        t_u: t_u.into_iter().map(|v| v / nrm).collect(),
        t_lambda: t_lambda / nrm,
        metric2,
    })
}

/// Pseudo-arclength continuation of F[u] + lambda u = f(x,u) from `start`
/// toward `lambda_target`. Natural-parameter correction away from folds,
/// arclength correction near them; folds are recorded where the lambda
/// component of the tangent changes sign.
pub fn continue_branch(
    dop: &DiscreteOperator,
    f: &Nonlinearity,
    start: &BranchPoint,
    lambda_target: f64,
    step_ctrl: &StepControl,
    provenance: Provenance,
    opts: &SolverOptions,
) -> Result<Branch> {
    let scale = 1.0 + start.sup_norm;
    let tol = opts.residual_tol(scale);
    if start.residual_sup > tol * 1e3 {
        return Err(Error::InvalidParams(format!(
            "start point residual {:.3e} too large",
            start.residual_sup
        )));
    }
    let mut points = vec![start.clone()];
    let mut folds = Vec::new();
    let dir0 = (lambda_target - start.lambda).signum();
    let m0 = 1.0 / (1.0 + norm(&start.u, NormKind::L2));
    let mut prev_t = TangentData {
        t_u: vec![0.0; start.u.len()],
        t_lambda: dir0,
        metric2: m0 * m0,
    };
    let mut t = match tangent(dop, f, start.lambda, &start.u, &prev_t) {
        Ok(t) => t,
        Err(_) => TangentData {
            t_u: vec![0.0; start.u.len()],
            t_lambda: dir0,
            metric2: m0 * m0,
        },
    };
    let mut u = start.u.clone();
    let mut lambda = start.lambda;
    let mut step = step_ctrl.initial;
    let mut successes = 0usize;
    let mut arc = start.arc_index;
    let terminated;

    'outer: loop {
        if points.len() >= step_ctrl.max_points {
            terminated = Termination::PointCap;
            break;
        }
        // try a step; on failure halve
        let mut accepted: Option<(GridFunction, f64)> = None;
        while step >= step_ctrl.min {
            let natural = t.t_lambda.abs() >= 0.1;
            let cand = if natural {
                // clamp the lambda increment at the target
                let mut dl = step * t.t_lambda;
                if (lambda + dl - lambda_target) * dir0 > 0.0 {
                    dl = lambda_target - lambda;
                }
                if dl.abs() < 1e-14 {
                    terminated = Termination::TargetReached;
                    break 'outer;
                }
                let lam_new = lambda + dl;
                let mut pred = u.clone();
                for i in 0..pred.len() {
                    pred.values[i] += dl / t.t_lambda * t.t_u[i];
                }
                newton_solve(dop, lam_new, f, &pred, opts)
                    .into_converged()
                    .map(|unew| (unew, lam_new))
            } else {
                arclength_correct(dop, f, &u, lambda, &t, step, opts)
            };
            match cand {
                Some((unew, lnew)) => {
                    accepted = Some((unew, lnew));
                    break;
                }
                None => {
                    step *= 0.5;
                    successes = 0;
                }
            }
        }
        let Some((unew, lnew)) = accepted else {
            terminated = Termination::StepUnderflow;
            break;
        };

        // re-verify independently of the continuation history
        let polished = newton_solve(dop, lnew, f, &unew, opts);
        let Some(uver) = polished.into_converged() else {
            step *= 0.5;
            if step < step_ctrl.min {
                terminated = Termination::StepUnderflow;
                break;
            }
            continue;
        };

        arc += 1;
        let pt = BranchPoint::from_solution(dop, f, lnew, uver.clone(), arc)?;
        let escaped = pt.sup_norm > step_ctrl.norm_cap * scale;
        points.push(pt);

        prev_t = t;
        u = uver;
        lambda = lnew;
        t = match tangent(dop, f, lambda, &u, &prev_t) {
            Ok(t) => t,
            Err(_) => TangentData {
                t_u: prev_t.t_u.clone(),
                t_lambda: prev_t.t_lambda,
                metric2: prev_t.metric2,
            },
        };
        if prev_t.t_lambda * t.t_lambda < 0.0 {
            folds.push(FoldRecord {
                lambda,
                direction: if t.t_lambda > 0.0 { 1 } else { -1 },
            });
        }

        if escaped {
            terminated = Termination::NormCap;
            break;
        }
        if (lambda - lambda_target) * dir0 >= -1e-12 {
            terminated = Termination::TargetReached;
            break;
        }
        successes += 1;
        if successes >= 4 {
            step = (step * 2.0).min(step_ctrl.max);
            successes = 0;
        }
    }

    if points.len() == 1 && terminated == Termination::StepUnderflow {
        return Err(Error::Stalled(
            "continuation could not accept any step from the seed".into(),
        ));
    }
    Ok(Branch {
        points,
        provenance,
        folds,
        terminated,
    })
}

/// One pseudo-arclength corrector: Newton on the bordered system
/// [R(u, lambda); t . (z - z_pred)] via two banded solves per iteration.
fn arclength_correct(
    dop: &DiscreteOperator,
    f: &Nonlinearity,
    u0: &GridFunction,
    lambda0: f64,
    t: &TangentData,
    step: f64,
    opts: &SolverOptions,
) -> Option<(GridFunction, f64)> {
    let nn = u0.len();
    let mut u = u0.clone();
    let mut lambda = lambda0;
    for i in 0..nn {
        u.values[i] += step * t.t_u[i];
    }
    lambda += step * t.t_lambda;
    let (u_pred, l_pred) = (u.clone(), lambda);

    let scale = 1.0 + norm(u0, NormKind::Sup);
    let tol = opts.residual_tol(scale);
    for _ in 0..20 {
        let r = nonlinear_residual(dop, lambda, f, &u).ok()?;
        let rn = norm(&r, NormKind::Sup);
        let cons = {
            let du = GridFunction {
                grid: u.grid,
                values: u
                    .values
                    .iter()
                    .zip(&u_pred.values)
                    .map(|(a, b)| a - b)
                    .collect(),
            };
            let tu = GridFunction {
                grid: u.grid,
                values: t.t_u.clone(),
            };
            t.metric2 * dot_l2(&tu, &du) + t.t_lambda * (lambda - l_pred)
        };
        if rn <= tol && cons.abs() <= 1e-10 * (1.0 + step) {
            return Some((u, lambda));
        }
        let lu = band_jacobian(dop, f, lambda, &u).factor().ok()?;
        let mut a = r.values.iter().map(|v| -v).collect::<Vec<f64>>();
        lu.solve(&mut a).ok()?;
        let mut b = u.values.clone();
        lu.solve(&mut b).ok()?;
        // delta_u = a - dl*b; tangent constraint in the same metric
        let w: Vec<f64> = (0..nn).map(|i| u.grid.weight(i)).collect();
        let tua: f64 = t.metric2 * (0..nn).map(|i| w[i] * t.t_u[i] * a[i]).sum::<f64>();
        let tub: f64 = t.metric2 * (0..nn).map(|i| w[i] * t.t_u[i] * b[i]).sum::<f64>();
        let denom = t.t_lambda - tub;
        if denom.abs() < 1e-300 || !denom.is_finite() {
            return None;
        }
        let dl = (-cons - tua) / denom;
        if !dl.is_finite() {
            return None;
        }
        for i in 0..nn {
            u.values[i] += a[i] - dl * b[i];
        }
        lambda += dl;
        if !lambda.is_finite() || norm(&u, NormKind::Sup) > 1e9 * scale {
            return None;
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedSide {
    Left,
    Right,
}

/// Find a large-norm solution of matching sign near a half-eigenvalue: the
/// numerical seed of a branch bifurcating from infinity.
pub fn seed_from_infinity(
    dop: &DiscreteOperator,
    ctx: &EigenContext,
    f: &Nonlinearity,
    sign: crate::eigen::EigenSign,
    side: SeedSide,
    distance: f64,
    opts: &SolverOptions,
) -> Result<BranchPoint> {
    let (eig, phi, want) = match sign {
        crate::eigen::EigenSign::Plus => (ctx.plus.value, &ctx.plus.efun, SignClass::Positive),
        crate::eigen::EigenSign::Minus => (ctx.minus.value, &ctx.minus.efun, SignClass::Negative),
    };
    let lambda = match side {
        SeedSide::Left => eig - distance,
        SeedSide::Right => eig + distance,
    };
    let grid = dop.grid;
    let scale = 1.0
        + (0..grid.len())
            .map(|i| f.eval(&grid, i, 0.0).abs())
            .fold(0.0, f64::max);
    let mut diagnostics = Vec::new();
    for amp in [10.0, 30.0, 100.0, 300.0] {
        let u0 = phi.scale(amp * scale);
        let rep = newton_solve(dop, lambda, f, &u0, opts);
        match rep.status {
            SolveStatus::Converged { u, .. } => {
                let cls = classify_sign(&u);
                let sup = norm(&u, NormKind::Sup);
                if cls == want && sup >= 10.0 * scale {
                    return BranchPoint::from_solution(dop, f, lambda, u, 0);
                }
                diagnostics.push(format!(
                    "amp {amp}: converged to {} with norm {sup:.3e}",
                    cls.as_str()
                ));
            }
            SolveStatus::Diverged { growth_rate, .. } => {
                diagnostics.push(format!("amp {amp}: diverged (rate {growth_rate:.3})"));
            }
            SolveStatus::Stalled { last_residual } => {
                diagnostics.push(format!("amp {amp}: stalled (residual {last_residual:.3e})"));
            }
        }
    }
    Err(Error::NoSeed(diagnostics.join("; ")))
}

#[derive(Debug, Clone)]
pub struct CensusSpec {
    pub amplitudes: Vec<f64>,
    pub include_perron: bool,
    pub dedupe_tol: f64,
}

impl Default for CensusSpec {
    fn default() -> Self {
        CensusSpec {
            amplitudes: vec![1.0, 5.0, 25.0, 125.0],
            include_perron: true,
            dedupe_tol: 1e-6,
        }
    }
}

/// Deterministic multistart enumeration of solutions at a fixed lambda.
/// A census can miss solutions; its output is a lower bound on the solution
/// set, deduplicated by scaled sup-distance and sorted by sup-norm.
pub fn census(
    dop: &DiscreteOperator,
    ctx: &EigenContext,
    f: &Nonlinearity,
    lambda: f64,
    spec: &CensusSpec,
    opts: &SolverOptions,
) -> Vec<BranchPoint> {
    let grid = dop.grid;
    let scale = 1.0
        + (0..grid.len())
            .map(|i| f.eval(&grid, i, 0.0).abs())
            .fold(0.0, f64::max);
    let mut starts = vec![GridFunction::zeros(grid)];
    let c0 = -dop.gamma - 1.0 - lambda.abs();
    let f_at_zero = GridFunction {
        grid,
        values: (0..grid.len()).map(|i| f.eval(&grid, i, 0.0)).collect(),
    };
    if let Ok(rep) = solve_proper(dop, c0, &f_at_zero, opts) {
        if let Some(mut w) = rep.into_converged() {
            for _ in 0..3 {
                match k_map(dop, c0, lambda, f, &w) {
                    Ok(next) => w = next,
                    Err(_) => break,
                }
            }
            starts.push(w);
        }
    }
    for &a in &spec.amplitudes {
        starts.push(ctx.plus.efun.scale(a * scale));
        starts.push(ctx.plus.efun.scale(-a * scale));
        starts.push(ctx.minus.efun.scale(a * scale));
        starts.push(ctx.minus.efun.scale(-a * scale));
    }

    let mut sols: Vec<GridFunction> = Vec::new();
    for s in starts {
        if let Some(u) = newton_solve(dop, lambda, f, &s, opts).into_converged() {
            sols.push(u);
        }
    }

    // Perron sweep between a deep sub-solution and the zero super-solution
    // (valid when f(x,0) >= 0), reaching minimal/maximal tube solutions that
    // Newton may miss.
    if spec.include_perron && lambda < ctx.minus.value - 1e-9 && f_at_zero.min() >= 0.0 {
        if let Ok(lower) = deep_subsolution_nonlinear(dop, ctx, lambda, f) {
            let upper = GridFunction::zeros(grid);
            if let Ok(pair) = SubSuperPair::new(lower, upper) {
                for dir in [PerronDirection::FromBelow, PerronDirection::FromAbove] {
                    if let Ok(rep) = perron_solve(dop, lambda, f, &pair, dir, opts) {
                        if let Some(u) = rep.into_converged() {
                            sols.push(u);
                        }
                    }
                }
            }
        }
    }

    // dedupe by scale-relative sup-distance
    let mut distinct: Vec<GridFunction> = Vec::new();
    for u in sols {
        let tol = spec.dedupe_tol
            * (1.0 + norm(&u, NormKind::Sup))
                .max(distinct.iter().map(|v| norm(v, NormKind::Sup)).fold(1.0, f64::max));
        if !distinct.iter().any(|v| v.sup_dist(&u) <= tol) {
            distinct.push(u);
        }
    }
    let mut points: Vec<BranchPoint> = distinct
        .into_iter()
        .filter_map(|u| BranchPoint::from_solution(dop, f, lambda, u, 0).ok())
        .collect();
    points.sort_by(|a, b| a.sup_norm.partial_cmp(&b.sup_norm).unwrap());
    points
}

/// Deep negative sub-solution validated against a genuine nonlinearity.
pub fn deep_subsolution_nonlinear(
    dop: &DiscreteOperator,
    ctx: &EigenContext,
    lambda: f64,
    f: &Nonlinearity,
) -> Result<GridFunction> {
    if lambda >= ctx.minus.value {
        return Err(Error::InvalidParams(
            "deep subsolution needs lambda below the minus half-eigenvalue".into(),
        ));
    }
    let grid = dop.grid;
    let opts = SolverOptions::default();
    let f0 = GridFunction {
        grid,
        values: (0..grid.len()).map(|i| f.eval(&grid, i, 0.0)).collect(),
    };
    let w = solve_proper(dop, -dop.gamma - 1.0, &f0.scale(-1.0), &opts)?
        .into_converged()
        .ok_or_else(|| Error::LinearSolveFailure("subsolution auxiliary solve".into()))?;
    let mut k = 1.0f64;
    for _ in 0..60 {
        let v = ctx.minus.efun.scale(k).add_scaled(-1.0, &w);
        let r = nonlinear_residual(dop, lambda, f, &v)?;
        if r.min() >= -1e-10 * (1.0 + norm(&f0, NormKind::Sup)) {
            return Ok(v);
        }
        k *= 2.0;
    }
    Err(Error::NoConvergence {
        what: "nonlinear deep subsolution search".into(),
        iters: 60,
    })
}

#[derive(Debug, Clone)]
pub struct DiagramRow {
    pub branch_id: usize,
    pub arc_index: usize,
    pub lambda: f64,
    pub signed_norm: f64,
    pub sign_class: SignClass,
    pub residual_sup: f64,
}

#[derive(Debug, Clone)]
pub struct Diagram {
    pub rows: Vec<DiagramRow>,
    /// per-lambda distinct solution counts over the supplied grid
    pub counts: Vec<(f64, usize)>,
    pub folds: Vec<(usize, FoldRecord)>,
    /// one (lambda, signed sup-norm) polyline per branch
    pub polylines: Vec<Vec<(f64, f64)>>,
}

pub fn assemble_diagram(branches: &[Branch], lambda_grid: &[f64]) -> Diagram {
    let mut rows = Vec::new();
    let mut polylines = Vec::new();
    let mut folds = Vec::new();
    for (bid, br) in branches.iter().enumerate() {
        let mut line = Vec::with_capacity(br.points.len());
        for p in &br.points {
            rows.push(DiagramRow {
                branch_id: bid,
                arc_index: p.arc_index,
                lambda: p.lambda,
                signed_norm: p.signed_norm(),
                sign_class: p.sign_class,
                residual_sup: p.residual_sup,
            });
            line.push((p.lambda, p.signed_norm()));
        }
        polylines.push(line);
        for f in &br.folds {
            folds.push((bid, f.clone()));
        }
    }

    let window = if lambda_grid.len() > 1 {
        0.5 * (lambda_grid[1] - lambda_grid[0]).abs()
    } else {
        0.05
    };
    let mut counts = Vec::with_capacity(lambda_grid.len());
    for &lg in lambda_grid {
        let mut reps: Vec<&BranchPoint> = Vec::new();
        for br in branches {
            // nearest point of this branch within the window
            let mut best: Option<&BranchPoint> = None;
            for p in &br.points {
                if (p.lambda - lg).abs() <= window
                    && best.is_none_or(|b| (p.lambda - lg).abs() < (b.lambda - lg).abs())
                {
                    best = Some(p);
                }
            }
            if let Some(p) = best {
                let tol = 1e-6 * (1.0 + p.sup_norm);
                if !reps.iter().any(|q| q.u.sup_dist(&p.u) <= tol) {
                    reps.push(p);
                }
            }
        }
        counts.push((lg, reps.len()));
    }
    Diagram {
        rows,
        counts,
        folds,
        polylines,
    }
}

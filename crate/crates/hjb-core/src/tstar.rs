//! Critical resonance values t*: the threshold in t such that
//! F[u] + lambda u = t phi_1^+ + d is solvable exactly for t above it, for
//! lambda in the closed interval between the half-eigenvalues.
//!
//! At the endpoints (resonance) the threshold is located by bisection over
//! t with a limit classifier: approach the eigenvalue from the solvable
//! side, fit the solution sup-norms against 1/distance, and call blow-up
//! versus boundedness; the blow-up direction (signed component along the
//! eigenfunction) resolves the side, which keeps the classifier correct for
//! linear (single-control) operators where both off-threshold sides blow up.
//! Inside the gap the solvability probe decides each bisection step.

use crate::eigen::EigenContext;
use crate::error::{Error, Result};
use crate::grid::{dot_l2, integrate, norm, GridFunction, NormKind};
use crate::nonlin::Nonlinearity;
use crate::operator::DiscreteOperator;
use crate::solver::{
    howard_solve, newton_solve, solvability_probe_with, ProbeBudget, SolverOptions,
};
use crate::util::linear_fit;

/// phi-component and remainder of a right-hand side: d = coeff*phi + perp.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub coeff: f64,
    pub perp: GridFunction,
}

pub fn decompose(d: &GridFunction, phi_plus: &GridFunction) -> Decomposition {
    let coeff = dot_l2(d, phi_plus);
    let perp = d.add_scaled(-coeff, phi_plus);
    Decomposition { coeff, perp }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TStarMethod {
    ResonantLimit,
    InteriorBisection,
}

#[derive(Debug, Clone)]
pub struct TStarResult {
    pub lambda: f64,
    pub value: f64,
    pub bracket: (f64, f64),
    pub method: TStarMethod,
    /// classifier outcomes at the final bracket ends
    pub hi_solvable: bool,
    pub lo_unsolvable: bool,
}

impl TStarResult {
    pub fn width(&self) -> f64 {
        self.bracket.1 - self.bracket.0
    }
}

#[derive(Debug, Clone)]
pub struct TStarOptions {
    /// final bracket width; default 1e-3 * (1 + ||d||_sup)
    pub width: Option<f64>,
    /// largest approach distance to the eigenvalue
    pub approach_base: f64,
    pub approach_count: usize,
    pub budget: ProbeBudget,
    /// initial bracket hint (e.g. from the translation identity)
    pub hint: Option<f64>,
    pub max_expand: usize,
}

impl Default for TStarOptions {
    fn default() -> Self {
        TStarOptions {
            width: None,
            approach_base: 0.1,
            approach_count: 6,
            budget: ProbeBudget::default(),
            hint: None,
            max_expand: 8,
        }
    }
}

/// Norm trace of the resonant approach for a fixed right-hand side `g`:
/// solves at lambda_k approaching the eigenvalue from the solvable side and
/// fits sup-norms (and the signed eigenfunction component) against
/// 1/distance.
#[derive(Debug, Clone)]
pub struct ResonantTrace {
    pub dists: Vec<f64>,
    pub norms: Vec<f64>,
    pub signed: Vec<f64>,
    /// (a, b) of ||u|| ~ a + b/dist
    pub fit: (f64, f64),
    /// (a, b) of <u, phi> ~ a + b/dist
    pub signed_fit: (f64, f64),
    pub blowup: bool,
    pub last_u: GridFunction,
}

pub fn resonant_norm_trace(
    dop: &DiscreteOperator,
    ctx: &EigenContext,
    plus_side: bool,
    g: &GridFunction,
    opts: &SolverOptions,
) -> Result<ResonantTrace> {
    resonant_norm_trace_opts(dop, ctx, plus_side, g, opts, 0.1, 6)
}

fn resonant_norm_trace_opts(
    dop: &DiscreteOperator,
    ctx: &EigenContext,
    plus_side: bool,
    g: &GridFunction,
    opts: &SolverOptions,
    approach_base: f64,
    approach_count: usize,
) -> Result<ResonantTrace> {
    let phi = if plus_side {
        &ctx.plus.efun
    } else {
        &ctx.minus.efun
    };
    let mut dists = Vec::new();
    let mut norms = Vec::new();
    let mut signed = Vec::new();
    let mut last_u: Option<GridFunction> = None;
    let mut warm: Option<(f64, GridFunction)> = None;
    let mut failures = 0usize;

    for k in 0..approach_count {
        let dist = approach_base * 0.5f64.powi(k as i32);
        let lambda = if plus_side {
            ctx.plus.value - dist
        } else {
            ctx.minus.value + dist
        };
        let u = if plus_side {
            // below the first half-eigenvalue Howard is reliable
            match howard_solve(dop, lambda, g, opts).ok().and_then(|r| r.into_converged()) {
                Some(u) => Some(u),
                None => minus_side_multistart(dop, ctx, lambda, g, opts, &warm),
            }
        } else {
            minus_side_multistart(dop, ctx, lambda, g, opts, &warm)
        };
        match u {
            Some(u) => {
                dists.push(dist);
                norms.push(norm(&u, NormKind::Sup));
                signed.push(dot_l2(&u, phi));
                warm = Some((dist, u.clone()));
                last_u = Some(u);
            }
            None => failures += 1,
        }
    }
    if dists.len() < 4 {
        return Err(Error::Inconclusive(format!(
            "resonant trace: only {} of {} approach solves succeeded",
            dists.len(),
            approach_count
        )));
    }
    let xs: Vec<f64> = dists.iter().map(|d| 1.0 / d).collect();
    let (a, b, _) = linear_fit(&xs, &norms);
    let (a2, b2, _) = linear_fit(&xs, &signed);
    let d_last = *dists.last().unwrap();
    // blow-up call per the extrapolation rule: slope dominates the bounded
    // part at the finest distance
    let blowup = b > 10.0 * a * d_last || failures > 0 && b > 0.0;
    Ok(ResonantTrace {
        dists,
        norms,
        signed,
        fit: (a, b),
        signed_fit: (a2, b2),
        blowup,
        last_u: last_u.unwrap(),
    })
}

/// Multistart Newton solve for lambda beyond the Howard-safe region; tracks
/// the smallest-norm solution, warm-started from the previous approach
/// point when available.
fn minus_side_multistart(
    dop: &DiscreteOperator,
    ctx: &EigenContext,
    lambda: f64,
    g: &GridFunction,
    opts: &SolverOptions,
    warm: &Option<(f64, GridFunction)>,
) -> Option<GridFunction> {
    let f = Nonlinearity::fixed_rhs(g.clone());
    let scale = 1.0 + norm(g, NormKind::Sup);
    let mut starts: Vec<GridFunction> = Vec::new();
    if let Some((dist_prev, u_prev)) = warm {
        // predictor: norms grow like 1/dist along a blow-up family
        let dist_now = if lambda >= ctx.minus.value {
            lambda - ctx.minus.value
        } else {
            ctx.plus.value - lambda
        };
        let ratio = (dist_prev / dist_now.max(1e-12)).clamp(0.5, 8.0);
        starts.push(u_prev.scale(ratio));
        starts.push(u_prev.clone());
    }
    starts.push(GridFunction::zeros(dop.grid));
    let c0 = -dop.gamma - 1.0 - lambda.abs();
    if let Ok(rep) = crate::solver::solve_proper(dop, c0, g, opts) {
        if let Some(w) = rep.into_converged() {
            starts.push(w);
        }
    }
    for &a in &[1.0, 5.0, 25.0, 125.0] {
        starts.push(ctx.minus.efun.scale(a * scale));
        starts.push(ctx.plus.efun.scale(a * scale));
        starts.push(ctx.minus.efun.scale(-a * scale));
        starts.push(ctx.plus.efun.scale(-a * scale));
    }
    let mut best: Option<GridFunction> = None;
    for s in starts {
        if let Some(u) = newton_solve(dop, lambda, &f, &s, opts).into_converged() {
            if best
                .as_ref()
                .map_or(true, |b| norm(&u, NormKind::Sup) < norm(b, NormKind::Sup))
            {
                best = Some(u);
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    /// t is at or above the threshold (solvable side)
    Above,
    /// below the threshold
    Below,
}

fn classify_resonant(
    dop: &DiscreteOperator,
    ctx: &EigenContext,
    plus_side: bool,
    t: f64,
    d: &GridFunction,
    opts: &TStarOptions,
) -> Result<Side> {
    let solver_opts = SolverOptions::default();
    let g = d.add_scaled(t, &ctx.plus.efun);
    let trace = resonant_norm_trace_opts(
        dop,
        ctx,
        plus_side,
        &g,
        &solver_opts,
        opts.approach_base,
        opts.approach_count,
    )?;
    if !trace.blowup {
        return Ok(Side::Above);
    }
    // direction of the blow-up decides the side; anti-aligned blow-up only
    // occurs for linear-degenerate operators, where it means t > t*.
    Ok(if trace.signed_fit.1 > 0.0 {
        Side::Below
    } else {
        Side::Above
    })
}

fn classify_interior(
    dop: &DiscreteOperator,
    ctx: &EigenContext,
    lambda: f64,
    t: f64,
    d: &GridFunction,
    opts: &TStarOptions,
) -> Result<Side> {
    let g = d.add_scaled(t, &ctx.plus.efun);
    let out = solvability_probe_with(dop, ctx, lambda, &g, &opts.budget);
    match out {
        crate::solver::ProbeOutcome::Solvable { .. } => Ok(Side::Above),
        crate::solver::ProbeOutcome::Unsolvable { .. } => Ok(Side::Below),
        crate::solver::ProbeOutcome::Inconclusive { .. } => {
            // one escalated retry before giving up
            let big = opts.budget.scaled(4.0);
            match solvability_probe_with(dop, ctx, lambda, &g, &big) {
                crate::solver::ProbeOutcome::Solvable { .. } => Ok(Side::Above),
                crate::solver::ProbeOutcome::Unsolvable { .. } => Ok(Side::Below),
                crate::solver::ProbeOutcome::Inconclusive { reason } => {
                    Err(Error::Inconclusive(format!(
                        "probe inconclusive at t = {t}: {reason}"
                    )))
                }
            }
        }
    }
}

fn check_rhs(d: &GridFunction, ctx: &EigenContext) -> Result<Decomposition> {
    let dec = decompose(d, &ctx.plus.efun);
    let dl2 = norm(d, NormKind::L2);
    if norm(&dec.perp, NormKind::L2) <= 1e-8 * dl2 {
        return Err(Error::DegenerateRHS);
    }
    Ok(dec)
}

fn bisect<C>(
    ctx: &EigenContext,
    lambda: f64,
    d: &GridFunction,
    method: TStarMethod,
    opts: &TStarOptions,
    classify: C,
) -> Result<TStarResult>
where
    C: Fn(f64) -> Result<Side>,
{
    let scale = 1.0 + norm(d, NormKind::Sup);
    let width = opts.width.unwrap_or(1e-3 * scale);
    let reach = ctx.c_abp * norm(d, NormKind::Sup) + 1.0;
    let (mut lo, mut hi) = match opts.hint {
        Some(h) => (h - 10.0 * width.max(0.05 * scale), h + 10.0 * width.max(0.05 * scale)),
        None => (-reach, reach),
    };

    let mut expand = 0;
    while classify(hi)? != Side::Above {
        hi += reach.max(1.0);
        expand += 1;
        if expand > opts.max_expand {
            return Err(Error::Inconclusive(
                "could not establish a solvable upper bracket".into(),
            ));
        }
    }
    expand = 0;
    while classify(lo)? != Side::Below {
        lo -= reach.max(1.0);
        expand += 1;
        if expand > opts.max_expand {
            return Err(Error::Inconclusive(
                "could not establish an unsolvable lower bracket".into(),
            ));
        }
    }

    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        match classify(mid)? {
            Side::Above => hi = mid,
            Side::Below => lo = mid,
        }
    }
    Ok(TStarResult {
        lambda,
        value: 0.5 * (lo + hi),
        bracket: (lo, hi),
        method,
        hi_solvable: true,
        lo_unsolvable: true,
    })
}

/// t* at resonance (lambda equal to the plus or minus half-eigenvalue).
pub fn tstar_resonant(
    dop: &DiscreteOperator,
    ctx: &EigenContext,
    plus_side: bool,
    d: &GridFunction,
    opts: &TStarOptions,
) -> Result<TStarResult> {
    check_rhs(d, ctx)?;
    let lambda = if plus_side {
        ctx.plus.value
    } else {
        ctx.minus.value
    };
    bisect(ctx, lambda, d, TStarMethod::ResonantLimit, opts, |t| {
        classify_resonant(dop, ctx, plus_side, t, d, opts)
    })
}

/// t* for lambda strictly inside the gap between the half-eigenvalues.
pub fn tstar_interior(
    dop: &DiscreteOperator,
    ctx: &EigenContext,
    lambda: f64,
    d: &GridFunction,
    opts: &TStarOptions,
) -> Result<TStarResult> {
    let margin = 1e-9 * (1.0 + ctx.plus.value.abs());
    if lambda <= ctx.plus.value + margin || lambda >= ctx.minus.value - margin {
        return Err(Error::InvalidParams(format!(
            "lambda = {lambda} is not strictly between the half-eigenvalues ({}, {})",
            ctx.plus.value, ctx.minus.value
        )));
    }
    check_rhs(d, ctx)?;
    bisect(ctx, lambda, d, TStarMethod::InteriorBisection, opts, |t| {
        classify_interior(dop, ctx, lambda, t, d, opts)
    })
}

/// Continuity scan: t* for d and for each perturbation d + eps * w.
#[derive(Debug, Clone)]
pub struct ContinuityEntry {
    pub eps: f64,
    pub w_norm: f64,
    pub delta_tstar: f64,
}

#[derive(Debug, Clone)]
pub struct ContinuityReport {
    pub base: TStarResult,
    pub entries: Vec<ContinuityEntry>,
}

pub fn tstar_continuity_scan(
    dop: &DiscreteOperator,
    ctx: &EigenContext,
    plus_side: bool,
    d: &GridFunction,
    perturbations: &[(GridFunction, f64)],
    opts: &TStarOptions,
    threads: usize,
) -> Result<ContinuityReport> {
    let base = tstar_resonant(dop, ctx, plus_side, d, opts)?;
    let jobs: Vec<(GridFunction, f64)> = perturbations.to_vec();
    let results = crate::util::par_map(jobs, threads, |(w, eps)| {
        let dp = d.add_scaled(eps, &w);
        let r = tstar_resonant(dop, ctx, plus_side, &dp, opts);
        (w, eps, r)
    });
    let mut entries = Vec::new();
    for (w, eps, r) in results {
        let r = r?;
        entries.push(ContinuityEntry {
            eps,
            w_norm: norm(&w, NormKind::Sup),
            delta_tstar: r.value - base.value,
        });
    }
    Ok(ContinuityReport { base, entries })
}

/// Fredholm reference for single-control operators: t* = -<d, phi_1>.
pub fn fredholm_tstar(d: &GridFunction, phi: &GridFunction) -> f64 {
    -integrate(&d.mul_pointwise(phi))
}

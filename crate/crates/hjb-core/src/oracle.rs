//! Independent brute-force references for tests and acceptance: dense
//! direct solves with a separate assembly, a high-order shooting method for
//! 1D half-eigenvalues, an explicit pseudo-time relaxation, exhaustive
//! solvability scans, and Richardson order estimation.
//!
//! Nothing here reuses the banded factorization, Howard iteration or the
//! Newton corrector of the main modules.

use crate::eigen::{EigenContext, EigenSign};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::operator::{DiscreteOperator, Field, HJBOperator, Sense};
use crate::solver::{solvability_probe_with, ProbeBudget, ProbeOutcome};

/// Dense Gaussian elimination with partial pivoting; row-major `n x n`.
pub mod dense {
    use crate::error::{Error, Result};

    pub fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
        let n = b.len();
        if a.len() != n * n {
            return Err(Error::LinearSolveFailure("dense: shape mismatch".into()));
        }
        for j in 0..n {
            let mut p = j;
            for i in j + 1..n {
                if a[i * n + j].abs() > a[p * n + j].abs() {
                    p = i;
                }
            }
            if a[p * n + j] == 0.0 {
                return Err(Error::LinearSolveFailure(format!(
                    "dense: singular at column {j}"
                )));
            }
            if p != j {
                for c in 0..n {
                    a.swap(j * n + c, p * n + c);
                }
                b.swap(j, p);
            }
            let d = a[j * n + j];
            for i in j + 1..n {
                let m = a[i * n + j] / d;
                if m != 0.0 {
                    for c in j..n {
                        a[i * n + c] -= m * a[j * n + c];
                    }
                    b[i] -= m * b[j];
                }
            }
        }
        for j in (0..n).rev() {
            let mut s = b[j];
            for c in j + 1..n {
                s -= a[j * n + c] * b[c];
            }
            b[j] = s / a[j * n + j];
        }
        Ok(b)
    }
}

/// Dense direct solve of the single-control (linear) problem
/// `L u + zeroth u = g`, assembled from the operator definition with its
/// own finite-difference formulas.
pub fn dense_solve_linear(
    op: &HJBOperator,
    grid: Grid,
    zeroth: f64,
    g: &GridFunction,
) -> Result<GridFunction> {
    if op.controls.len() != 1 {
        return Err(Error::UnsupportedOperator(
            "dense oracle handles single-control operators only".into(),
        ));
    }
    let ctl = &op.controls[0];
    let nn = grid.len();
    let n = grid.n;
    let (hx, hy) = grid.spacing();
    let dim = grid.dim();
    let mut a = vec![0.0; nn * nn];
    let coeff = |f: &Field, i: usize| -> f64 {
        match f {
            Field::Const(c) => *c,
            Field::Values(v) => v[i],
        }
    };
    for i in 0..nn {
        let ax = coeff(&ctl.diff_x, i);
        let bx = coeff(&ctl.drift_x, i);
        let c = coeff(&ctl.zeroth, i);
        let (ix, jy) = if dim == 1 { (i, 0) } else { (i % n, i / n) };
        let mut diag = -2.0 * ax / (hx * hx) - bx.abs() / hx + c + zeroth;
        if ix > 0 {
            a[i * nn + (i - 1)] = ax / (hx * hx) + (-bx).max(0.0) / hx;
        }
        if ix + 1 < n {
            a[i * nn + (i + 1)] = ax / (hx * hx) + bx.max(0.0) / hx;
        }
        if dim == 2 {
            let ay = coeff(&ctl.diff_y, i);
            let by = coeff(&ctl.drift_y, i);
            diag += -2.0 * ay / (hy * hy) - by.abs() / hy;
            if jy > 0 {
                a[i * nn + (i - n)] = ay / (hy * hy) + (-by).max(0.0) / hy;
            }
            if jy + 1 < n {
                a[i * nn + (i + n)] = ay / (hy * hy) + by.max(0.0) / hy;
            }
        }
        a[i * nn + i] = diag;
    }
    let x = dense::solve(a, g.values.clone())?;
    GridFunction::from_values(grid, x)
}

/// Explicit pseudo-time relaxation for proper problems, any control count:
/// u <- u + tau (F_h[u] + shift u - g). Slow but entirely independent of the
/// policy-iteration path. Intended for coarse grids.
pub fn pseudo_time_solve(
    dop: &DiscreteOperator,
    shift: f64,
    g: &GridFunction,
    tol: f64,
    max_iters: usize,
) -> Result<GridFunction> {
    if shift > -dop.gamma + 1e-14 {
        return Err(Error::ImproperShift {
            shift,
            minus_gamma: -dop.gamma,
        });
    }
    let nn = dop.grid.len();
    // stability: tau below 1 / max |diagonal + shift|
    let mut dmax: f64 = 0.0;
    for st in &dop.controls {
        for i in 0..nn {
            dmax = dmax.max((st.diag[i] + shift).abs());
        }
    }
    let tau = 0.9 / dmax;
    let mut u = GridFunction::zeros(dop.grid);
    for _ in 0..max_iters {
        let fu = dop.apply(&u)?;
        let mut worst: f64 = 0.0;
        for i in 0..nn {
            let r = fu.values[i] + shift * u.values[i] - g.values[i];
            worst = worst.max(r.abs());
            u.values[i] += tau * r;
        }
        if worst <= tol {
            return Ok(u);
        }
    }
    Err(Error::NoConvergence {
        what: "pseudo-time relaxation".into(),
        iters: max_iters,
    })
}

/// Shooting method for the principal half-eigenvalues of pure second-order
/// isotropic control families on an interval: integrates u'' chosen by the
/// sign selection of the extremum, locates the first return to zero, and
/// bisects in lambda.
pub fn shooting_eigen_1d(
    op: &HJBOperator,
    length: f64,
    sign: EigenSign,
) -> Result<f64> {
    if length <= 0.0 {
        return Err(Error::InvalidParams("length must be positive".into()));
    }
    // extract the isotropic pure-diffusion family
    let mut coeffs = Vec::new();
    for ctl in &op.controls {
        match (&ctl.diff_x, &ctl.drift_x, &ctl.zeroth) {
            (Field::Const(a), Field::Const(b), Field::Const(c)) if *b == 0.0 && *c == 0.0 => {
                coeffs.push(*a)
            }
            _ => {
                return Err(Error::UnsupportedOperator(
                    "shooting oracle needs constant pure-diffusion controls".into(),
                ))
            }
        }
    }
    coeffs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (amin, amax) = (coeffs[0], *coeffs.last().unwrap());

    // u'' = q with  extremum_a(a q) = -lambda u :
    //   sup:  q >= 0 -> amax, q < 0 -> amin;  inf: reversed
    let curvature = move |u: f64, lambda: f64, sense: Sense| -> f64 {
        let rhs = -lambda * u;
        let coeff = match sense {
            Sense::Sup => {
                if rhs >= 0.0 {
                    amax
                } else {
                    amin
                }
            }
            Sense::Inf => {
                if rhs >= 0.0 {
                    amin
                } else {
                    amax
                }
            }
        };
        rhs / coeff
    };

    let sense = op.sense;
    let steps = 100_000usize;
    let h = length / steps as f64;
    let slope0 = match sign {
        EigenSign::Plus => 1.0,
        EigenSign::Minus => -1.0,
    };

    // first zero of u after launch; +infinity when none in (0, L]
    let first_zero = |lambda: f64| -> f64 {
        let mut u = 0.0f64;
        let mut v = slope0;
        let mut x = 0.0f64;
        for k in 0..steps {
            let f = |u: f64, v: f64| -> (f64, f64) { (v, curvature(u, lambda, sense)) };
            let (k1u, k1v) = f(u, v);
            let (k2u, k2v) = f(u + 0.5 * h * k1u, v + 0.5 * h * k1v);
            let (k3u, k3v) = f(u + 0.5 * h * k2u, v + 0.5 * h * k2v);
            let (k4u, k4v) = f(u + h * k3u, v + h * k3v);
            let un = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            let vn = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            let xn = x + h;
            if k > 0 && (un == 0.0 || un.signum() != slope0.signum()) {
                // linear interpolation of the crossing
                let frac = u / (u - un);
                return x + frac * h;
            }
            u = un;
            v = vn;
            x = xn;
        }
        f64::INFINITY
    };

    // bracket: first zero is decreasing in lambda
    let base = std::f64::consts::PI.powi(2) / (length * length);
    let mut lo = 0.05 * amin * base;
    let mut hi = 20.0 * amax * base;
    for _ in 0..20 {
        if first_zero(lo) > length {
            break;
        }
        lo *= 0.5;
    }
    for _ in 0..20 {
        if first_zero(hi) < length {
            break;
        }
        hi *= 2.0;
    }
    if !(first_zero(lo) > length && first_zero(hi) < length) {
        return Err(Error::NoConvergence {
            what: "shooting bracket".into(),
            iters: 20,
        });
    }
    while hi - lo > 1e-10 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if first_zero(mid) > length {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// log2 ratio of successive differences of a quantity computed at n, 2n, 4n.
pub fn richardson_order(v_n: f64, v_2n: f64, v_4n: f64) -> Result<f64> {
    let d1 = (v_n - v_2n).abs();
    let d2 = (v_2n - v_4n).abs();
    if d1 < 1e-13 || d2 < 1e-13 {
        return Err(Error::DegenerateDifferences);
    }
    Ok((d1 / d2).log2())
}

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub t_grid: Vec<f64>,
    pub solvable: Vec<Option<bool>>,
    /// (last unsolvable, first solvable)
    pub bracket: (f64, f64),
}

/// Run the solvability probe (with a widened budget) at every t in the grid
/// and return the threshold bracket. A Solvable outcome below an Unsolvable
/// one violates the monotone structure and is surfaced as an error.
pub fn exhaustive_tstar_scan(
    dop: &DiscreteOperator,
    ctx: &EigenContext,
    lambda: f64,
    d: &GridFunction,
    t_grid: &[f64],
) -> Result<ScanOutcome> {
    if t_grid.len() < 2 {
        return Err(Error::InvalidParams("need at least two scan points".into()));
    }
    let budget = ProbeBudget::default().scaled(10.0);
    let mut outcomes: Vec<Option<bool>> = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let g = d.add_scaled(t, &ctx.plus.efun);
        let o = solvability_probe_with(dop, ctx, lambda, &g, &budget);
        outcomes.push(match o {
            ProbeOutcome::Solvable { .. } => Some(true),
            ProbeOutcome::Unsolvable { .. } => Some(false),
            ProbeOutcome::Inconclusive { .. } => None,
        });
    }
    // monotone structure: no Solvable strictly below an Unsolvable
    let mut seen_solvable_at: Option<f64> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if let Some(true) = o {
            if seen_solvable_at.is_none() {
                seen_solvable_at = Some(t_grid[i]);
            }
        }
        if let (Some(false), Some(ts)) = (o, seen_solvable_at) {
            return Err(Error::NonMonotoneScan(format!(
                "unsolvable at t = {} above solvable at t = {ts}",
                t_grid[i]
            )));
        }
    }
    let mut last_unsolvable = None;
    let mut first_solvable = None;
    for (i, o) in outcomes.iter().enumerate() {
        match o {
            Some(false) => last_unsolvable = Some(t_grid[i]),
            Some(true) if first_solvable.is_none() => first_solvable = Some(t_grid[i]),
            _ => {}
        }
    }
    match (last_unsolvable, first_solvable) {
        (Some(lo), Some(hi)) if lo < hi => Ok(ScanOutcome {
            t_grid: t_grid.to_vec(),
            solvable: outcomes,
            bracket: (lo, hi),
        }),
        _ => Err(Error::Inconclusive(
            "scan did not produce a two-sided bracket".into(),
        )),
    }
}

//! Principal half-eigenpairs of the discretized operator by inverse power
//! iteration on the positive cone. The minus pair is obtained from the dual
//! operator G[v] = -F[-v], which only needs sign flips around the proper
//! solver.

use crate::error::{Error, Result};
use crate::grid::{dot_l2, norm, GridFunction, NormKind};
use crate::operator::DiscreteOperator;
use crate::solver::{solve_proper, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenSign {
    Plus,
    Minus,
}

/// A half-eigenvalue with its signed, L2-normalized eigenfunction and a
/// residual certificate `||F_h[phi] + value * phi||_sup`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub sign: EigenSign,
    pub value: f64,
    pub efun: GridFunction,
    pub residual_sup: f64,
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// relative spread of the node-wise iterate ratio at convergence
    pub ratio_tol: f64,
    pub max_iters: usize,
    /// custom positive start (defaults to the distance-to-boundary profile)
    pub start: Option<GridFunction>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            ratio_tol: 1e-9,
            max_iters: 3000,
            start: None,
        }
    }
}

/// Proper shift for the inverse iteration. Guarded so the shifted operator
/// is proper in both the discrete (sigma > max c) and the declared
/// (sigma >= gamma) sense.
fn inverse_shift(dop: &DiscreteOperator) -> f64 {
    dop.gamma + dop.max_c.max(0.0) + 1.0
}

pub fn principal_eigenpair(dop: &DiscreteOperator, sign: EigenSign) -> Result<EigenPair> {
    principal_eigenpair_opts(dop, sign, &EigenOptions::default())
}

pub fn principal_eigenpair_opts(
    dop: &DiscreteOperator,
    sign: EigenSign,
    opts: &EigenOptions,
) -> Result<EigenPair> {
    if !dop.monotone {
        return Err(Error::MonotonicityViolation(
            "eigen iteration requires the monotone certificate".into(),
        ));
    }
    let solver_opts = SolverOptions::default();
    let sigma = inverse_shift(dop);
    let grid = dop.grid;

    // positive deterministic start
    let mut u = {
        let d = opts
            .start
            .clone()
            .unwrap_or_else(|| grid.distance_profile());
        if d.min() <= 0.0 {
            return Err(Error::InvalidParams("start iterate must be positive".into()));
        }
        let l2 = norm(&d, NormKind::L2);
        d.scale(1.0 / l2)
    };

    let mut value = f64::NAN;
    let mut converged = false;
    let mut iters = 0;
    for it in 0..opts.max_iters {
        iters = it + 1;
        // Plus: F[v] - sigma v = -u with v > 0.
        // Minus (dual): F[w] - sigma w = +u gives w < 0; iterate v = -w > 0.
        let rhs = match sign {
            EigenSign::Plus => u.scale(-1.0),
            EigenSign::Minus => u.clone(),
        };
        let w = solve_proper(dop, -sigma, &rhs, &solver_opts)?
            .into_converged()
            .ok_or_else(|| Error::NoConvergence {
                what: "inverse-iteration proper solve".into(),
                iters: it,
            })?;
        let v = match sign {
            EigenSign::Plus => w,
            EigenSign::Minus => w.scale(-1.0),
        };
        // positivity of the iterate is structural; losing it means trouble
        if let Some(node) = v.values.iter().position(|&x| x <= 0.0) {
            return Err(Error::SignLoss { node });
        }

        let mut rmin = f64::INFINITY;
        let mut rmax = f64::NEG_INFINITY;
        for i in 0..v.len() {
            let r = v.values[i] / u.values[i];
            rmin = rmin.min(r);
            rmax = rmax.max(r);
        }
        let mu = dot_l2(&u, &v) / dot_l2(&u, &u);
        value = 1.0 / mu - sigma;

        let l2 = norm(&v, NormKind::L2);
        u = v.scale(1.0 / l2);

        if (rmax - rmin) / rmax <= opts.ratio_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "inverse power iteration".into(),
            iters,
        });
    }

    let efun = match sign {
        EigenSign::Plus => u,
        EigenSign::Minus => u.scale(-1.0),
    };
    let mut res = dop.apply(&efun)?;
    for i in 0..res.len() {
        res.values[i] += value * efun.values[i];
    }
    Ok(EigenPair {
        sign,
        value,
        efun,
        residual_sup: norm(&res, NormKind::Sup),
    })
}

#[derive(Debug, Clone)]
pub struct EigenGap {
    pub plus: EigenPair,
    pub minus: EigenPair,
    pub gap: f64,
    /// gap below tolerance: the operator behaves like a linear one
    pub degenerate: bool,
}

pub fn eigen_gap(dop: &DiscreteOperator) -> Result<EigenGap> {
    let plus = principal_eigenpair(dop, EigenSign::Plus)?;
    let minus = principal_eigenpair(dop, EigenSign::Minus)?;
    let gap = minus.value - plus.value;
    let tol = 1e-8 * (1.0 + plus.value.abs());
    // the ordering plus <= minus is a theorem for sup (convex) operators
    // only; inf families legitimately swap it
    if gap < -tol && dop.sense == crate::operator::Sense::Sup {
        return Err(Error::NoConvergence {
            what: format!("half-eigenvalue ordering violated: gap = {gap:.3e}"),
            iters: 0,
        });
    }
    Ok(EigenGap {
        degenerate: gap <= tol,
        plus,
        minus,
        gap,
    })
}

/// Precomputed eigen data threaded through probes, thresholds and branches.
#[derive(Debug, Clone)]
pub struct EigenContext {
    pub plus: EigenPair,
    pub minus: EigenPair,
    /// discrete ABP constant: sup-norm of the proper solve with rhs -1
    pub c_abp: f64,
}

impl EigenContext {
    pub fn compute(dop: &DiscreteOperator) -> Result<EigenContext> {
        let plus = principal_eigenpair(dop, EigenSign::Plus)?;
        let minus = principal_eigenpair(dop, EigenSign::Minus)?;
        let opts = SolverOptions::default();
        let g = GridFunction::constant(dop.grid, -1.0);
        let w = solve_proper(dop, -dop.gamma - 1.0, &g, &opts)?
            .into_converged()
            .ok_or_else(|| Error::LinearSolveFailure("ABP constant solve".into()))?;
        Ok(EigenContext {
            plus,
            minus,
            c_abp: norm(&w, NormKind::Sup),
        })
    }

    pub fn gap(&self) -> f64 {
        self.minus.value - self.plus.value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Domain, Grid};
    use crate::operator::{discretize, ControlCoeffs, Field, HJBOperator, Sense};

    fn interval_op(op: &HJBOperator, n: usize) -> DiscreteOperator {
        let g = Grid::new(Domain::Interval { length: 1.0 }, n).unwrap();
        discretize(op, g).unwrap()
    }

    #[test]
    fn barenblatt_half_eigenvalues() {
        let pi2 = std::f64::consts::PI.powi(2);
        let dop = interval_op(&HJBOperator::barenblatt(1.0, 2.0).unwrap(), 400);
        let plus = principal_eigenpair(&dop, EigenSign::Plus).unwrap();
        let minus = principal_eigenpair(&dop, EigenSign::Minus).unwrap();
        assert!((plus.value - pi2).abs() / pi2 < 1e-3, "plus {}", plus.value);
        assert!(
            (minus.value - 2.0 * pi2).abs() / (2.0 * pi2) < 1e-3,
            "minus {}",
            minus.value
        );
        // eigenfunction close to sqrt(2) sin(pi x), sign-definite
        assert!(plus.efun.min() > 0.0);
        assert!(minus.efun.max() < 0.0);
        let shape = dop
            .grid
            .sample(|x, _| (std::f64::consts::PI * x).sin() * std::f64::consts::SQRT_2);
        assert!(plus.efun.sup_dist(&shape) < 5e-3);
        assert!(minus.efun.sup_dist(&shape.scale(-1.0)) < 5e-3);
        // residual certificates
        assert!(plus.residual_sup <= 1e-8 * plus.value);
        assert!(minus.residual_sup <= 1e-8 * minus.value);
        // L2 normalization
        assert!((norm(&plus.efun, NormKind::L2) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn laplacian_pair_coincides() {
        let dop = interval_op(&HJBOperator::laplacian(), 150);
        let gapinfo = eigen_gap(&dop).unwrap();
        assert!(gapinfo.gap.abs() < 1e-8);
        assert!(gapinfo.degenerate);
    }

    #[test]
    fn pucci_pair_1d() {
        let pi2 = std::f64::consts::PI.powi(2);
        let dop = interval_op(&HJBOperator::pucci_plus(1.0, 2.0).unwrap(), 300);
        let gp = eigen_gap(&dop).unwrap();
        assert!((gp.plus.value - pi2).abs() / pi2 < 1e-2);
        assert!((gp.minus.value - 2.0 * pi2).abs() / (2.0 * pi2) < 1e-2);

        // the inf extremal operator swaps the roles
        let dopm = interval_op(&HJBOperator::pucci_minus(1.0, 2.0).unwrap(), 300);
        let gm = eigen_gap(&dopm).unwrap();
        assert!((gm.plus.value - 2.0 * pi2).abs() / (2.0 * pi2) < 1e-2, "{}", gm.plus.value);
        assert!((gm.minus.value - pi2).abs() / pi2 < 1e-2, "{}", gm.minus.value);
    }

    #[test]
    fn scaling_invariance_of_value() {
        let dop = interval_op(&HJBOperator::barenblatt(1.0, 2.0).unwrap(), 120);
        let a = principal_eigenpair(&dop, EigenSign::Plus).unwrap();
        for scale in [0.01, 1.0, 250.0] {
            let start = dop.grid.distance_profile().scale(scale);
            let b = principal_eigenpair_opts(
                &dop,
                EigenSign::Plus,
                &EigenOptions {
                    start: Some(start),
                    ..EigenOptions::default()
                },
            )
            .unwrap();
            assert!((a.value - b.value).abs() < 1e-10);
        }
    }

    #[test]
    fn zeroth_order_shift_moves_eigenvalue() {
        let base = HJBOperator::barenblatt(1.0, 2.0).unwrap();
        let dop = interval_op(&base, 150);
        let p0 = principal_eigenpair(&dop, EigenSign::Plus).unwrap();
        let m0 = principal_eigenpair(&dop, EigenSign::Minus).unwrap();

        let c0 = 0.7;
        let shifted = HJBOperator::explicit(
            "barenblatt-shifted",
            base.controls
                .iter()
                .map(|c| ControlCoeffs {
                    diff_x: c.diff_x.clone(),
                    diff_y: c.diff_y.clone(),
                    drift_x: c.drift_x.clone(),
                    drift_y: c.drift_y.clone(),
                    zeroth: Field::Const(c0),
                })
                .collect(),
            Sense::Sup,
            1.0,
            2.0,
            c0,
        )
        .unwrap();
        let dops = interval_op(&shifted, 150);
        let p1 = principal_eigenpair(&dops, EigenSign::Plus).unwrap();
        let m1 = principal_eigenpair(&dops, EigenSign::Minus).unwrap();
        assert!((p1.value - (p0.value - c0)).abs() < 1e-8);
        assert!((m1.value - (m0.value - c0)).abs() < 1e-8);
    }

    #[test]
    fn grid_convergence_order() {
        let pi2 = std::f64::consts::PI.powi(2);
        let vals: Vec<f64> = [100usize, 200, 400]
            .iter()
            .map(|&n| {
                let dop = interval_op(&HJBOperator::barenblatt(1.0, 2.0).unwrap(), n);
                principal_eigenpair(&dop, EigenSign::Plus).unwrap().value
            })
            .collect();
        let order = ((vals[0] - vals[1]).abs() / (vals[1] - vals[2]).abs()).log2();
        assert!(order >= 1.8, "order {order}, values {vals:?} (target {pi2})");
    }

    #[test]
    fn rectangle_smoke() {
        let g = Grid::new(Domain::Rectangle { lx: 1.0, ly: 1.0 }, 24).unwrap();
        let dop = discretize(&HJBOperator::barenblatt(1.0, 2.0).unwrap(), g).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        let plus = principal_eigenpair(&dop, EigenSign::Plus).unwrap();
        let minus = principal_eigenpair(&dop, EigenSign::Minus).unwrap();
        assert!((plus.value - 2.0 * pi2).abs() / (2.0 * pi2) < 1e-2, "{}", plus.value);
        assert!((minus.value - 4.0 * pi2).abs() / (4.0 * pi2) < 1e-2, "{}", minus.value);
    }
}

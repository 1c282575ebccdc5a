//! HJB operators `F[u] = sup_a { tr(A_a D^2 u) + b_a . Du + c_a u }` (or the
//! inf counterpart) and their monotone finite-difference discretization:
//! central second differences for diffusion, upwind first differences for
//! drift, so every control matrix has nonnegative off-diagonal entries.

use crate::band::BandMatrix;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};

/// A coefficient field: constant or per-node values.
#[derive(Debug, Clone)]
pub enum Field {
    Const(f64),
    Values(Vec<f64>),
}

impl Field {
    fn at(&self, idx: usize) -> f64 {
        match self {
            Field::Const(c) => *c,
            Field::Values(v) => v[idx],
        }
    }

    fn check_len(&self, n: usize, what: &str) -> Result<()> {
        if let Field::Values(v) = self {
            if v.len() != n {
                return Err(Error::InvalidCoefficients(format!(
                    "{what}: field length {} != node count {n}",
                    v.len()
                )));
            }
        }
        Ok(())
    }
}

/// Coefficients of one linear control: axis-aligned diffusion, drift and a
/// zeroth-order term. In 1D `diff_y`/`drift_y` are ignored.
#[derive(Debug, Clone)]
pub struct ControlCoeffs {
    pub diff_x: Field,
    pub diff_y: Field,
    pub drift_x: Field,
    pub drift_y: Field,
    pub zeroth: Field,
}

impl ControlCoeffs {
    pub fn isotropic(a: f64, c: f64) -> Self {
        ControlCoeffs {
            diff_x: Field::Const(a),
            diff_y: Field::Const(a),
            drift_x: Field::Const(0.0),
            drift_y: Field::Const(0.0),
            zeroth: Field::Const(c),
        }
    }
}

/// Whether the operator takes the supremum or infimum over its controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Sup,
    Inf,
}

#[derive(Debug, Clone)]
pub struct HJBOperator {
    pub name: String,
    pub controls: Vec<ControlCoeffs>,
    pub sense: Sense,
    /// ellipticity bounds: eigenvalues of every A_a lie in [lambda_ell, cap_lambda_ell]
    pub lambda_ell: f64,
    pub cap_lambda_ell: f64,
    /// bound on |b_a| and |c_a|
    pub gamma: f64,
}

impl HJBOperator {
    pub fn laplacian() -> Self {
        HJBOperator {
            name: "laplacian".into(),
            controls: vec![ControlCoeffs::isotropic(1.0, 0.0)],
            sense: Sense::Sup,
            lambda_ell: 1.0,
            cap_lambda_ell: 1.0,
            gamma: 0.0,
        }
    }

    /// max{a Δu, b Δu}
    pub fn barenblatt(a: f64, b: f64) -> Result<Self> {
        if a <= 0.0 || b <= 0.0 {
            return Err(Error::InvalidParams("barenblatt needs a, b > 0".into()));
        }
        Ok(HJBOperator {
            name: format!("barenblatt({a},{b})"),
            controls: vec![
                ControlCoeffs::isotropic(a, 0.0),
                ControlCoeffs::isotropic(b, 0.0),
            ],
            sense: Sense::Sup,
            lambda_ell: a.min(b),
            cap_lambda_ell: a.max(b),
            gamma: 0.0,
        })
    }

    /// Extremal sup operator. In 1D the two controls {l, cap} are exact; in
    /// 2D the control family consists of the axis-aligned diagonal matrices
    /// diag(a1, a2) with a_i in {l, cap}, an approximation of the full
    /// rotation-invariant extremal operator (monotone 5-point stencils
    /// cannot represent rotated diffusions).
    pub fn pucci_plus(l: f64, cap: f64) -> Result<Self> {
        Self::pucci(l, cap, Sense::Sup)
    }

    /// Extremal inf operator; same control family with the infimum.
    pub fn pucci_minus(l: f64, cap: f64) -> Result<Self> {
        Self::pucci(l, cap, Sense::Inf)
    }

    fn pucci(l: f64, cap: f64, sense: Sense) -> Result<Self> {
        if l <= 0.0 || cap < l {
            return Err(Error::InvalidParams(
                "pucci needs 0 < lambda_ell <= cap_lambda_ell".into(),
            ));
        }
        let mut controls = Vec::new();
        for &ax in &[l, cap] {
            for &ay in &[l, cap] {
                controls.push(ControlCoeffs {
                    diff_x: Field::Const(ax),
                    diff_y: Field::Const(ay),
                    drift_x: Field::Const(0.0),
                    drift_y: Field::Const(0.0),
                    zeroth: Field::Const(0.0),
                });
            }
        }
        // duplicates (ax, ay) collapse in 1D; harmless but avoid extra work
        let name = match sense {
            Sense::Sup => format!("pucci_plus({l},{cap})"),
            Sense::Inf => format!("pucci_minus({l},{cap})"),
        };
        Ok(HJBOperator {
            name,
            controls,
            sense,
            lambda_ell: l,
            cap_lambda_ell: cap,
            gamma: 0.0,
        })
    }

    /// Δu + b u+ + a u-  expressed as max{Δ + b id, Δ + a id} (requires b >= a).
    pub fn fucik(a: f64, b: f64) -> Result<Self> {
        if b < a {
            return Err(Error::InvalidParams("fucik needs b >= a".into()));
        }
        Ok(HJBOperator {
            name: format!("fucik({a},{b})"),
            controls: vec![
                ControlCoeffs::isotropic(1.0, b),
                ControlCoeffs::isotropic(1.0, a),
            ],
            sense: Sense::Sup,
            lambda_ell: 1.0,
            cap_lambda_ell: 1.0,
            gamma: a.abs().max(b.abs()),
        })
    }

    pub fn explicit(
        name: &str,
        controls: Vec<ControlCoeffs>,
        sense: Sense,
        lambda_ell: f64,
        cap_lambda_ell: f64,
        gamma: f64,
    ) -> Result<Self> {
        if controls.is_empty() {
            return Err(Error::InvalidParams("empty control list".into()));
        }
        if !(0.0 < lambda_ell && lambda_ell <= cap_lambda_ell) || gamma < 0.0 {
            return Err(Error::InvalidParams(
                "need 0 < lambda_ell <= cap_lambda_ell and gamma >= 0".into(),
            ));
        }
        Ok(HJBOperator {
            name: name.into(),
            controls,
            sense,
            lambda_ell,
            cap_lambda_ell,
            gamma,
        })
    }

    pub fn is_linear(&self) -> bool {
        self.controls.len() == 1
    }
}

/// One control discretized on a grid: compact stencil rows. `off[k][i]` is
/// the weight of neighbor `k` (per `DiscreteOperator::offsets`) at node `i`,
/// zero when that neighbor lies on the boundary.
#[derive(Debug, Clone)]
pub struct StencilMatrix {
    pub diag: Vec<f64>,
    pub off: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: Grid,
    pub sense: Sense,
    /// neighbor index offsets: [-1, +1] in 1D; [-1, +1, -n, +n] in 2D
    pub offsets: Vec<isize>,
    pub controls: Vec<StencilMatrix>,
    pub monotone: bool,
    pub gamma: f64,
    pub lambda_ell: f64,
    pub cap_lambda_ell: f64,
    /// max over nodes and controls of the zeroth-order coefficient
    pub max_c: f64,
    pub op_name: String,
    /// sorted isotropic diffusion coefficients when the operator is a pure
    /// second-order family (used by the shooting oracle)
    pub pure_diffusions: Option<Vec<f64>>,
}

/// Discretize `op` on `grid`. Fails with `MonotonicityViolation` when the
/// grid is too coarse for the declared drift bound (h*gamma <= 2*lambda_ell
/// is required) and with `InvalidCoefficients` when a control leaves the
/// declared ellipticity/drift box.
pub fn discretize(op: &HJBOperator, grid: Grid) -> Result<DiscreteOperator> {
    let nn = grid.len();
    let n = grid.n;
    let dim = grid.dim();
    let (hx, hy) = grid.spacing();

    let hmax = if dim == 2 { hx.max(hy) } else { hx };
    if hmax * op.gamma > 2.0 * op.lambda_ell {
        return Err(Error::MonotonicityViolation(format!(
            "h*gamma = {:.3e} exceeds 2*lambda_ell = {:.3e}; refine the grid",
            hmax * op.gamma,
            2.0 * op.lambda_ell
        )));
    }

    let offsets: Vec<isize> = if dim == 1 {
        vec![-1, 1]
    } else {
        vec![-1, 1, -(n as isize), n as isize]
    };

    let mut controls = Vec::with_capacity(op.controls.len());
    let mut max_c = f64::NEG_INFINITY;
    let mut monotone = true;

    for (ci, ctl) in op.controls.iter().enumerate() {
        for (f, what) in [
            (&ctl.diff_x, "diff_x"),
            (&ctl.diff_y, "diff_y"),
            (&ctl.drift_x, "drift_x"),
            (&ctl.drift_y, "drift_y"),
            (&ctl.zeroth, "zeroth"),
        ] {
            f.check_len(nn, what)?;
        }

        let mut diag = vec![0.0; nn];
        let mut off = vec![vec![0.0; nn]; offsets.len()];

        for i in 0..nn {
            let ax = ctl.diff_x.at(i);
            let bx = ctl.drift_x.at(i);
            let c = ctl.zeroth.at(i);
            if !(op.lambda_ell - 1e-12 <= ax && ax <= op.cap_lambda_ell + 1e-12) {
                return Err(Error::InvalidCoefficients(format!(
                    "control {ci}: diffusion {ax} outside [{}, {}] at node {i}",
                    op.lambda_ell, op.cap_lambda_ell
                )));
            }
            if bx.abs() > op.gamma + 1e-12 || c.abs() > op.gamma + 1e-12 {
                return Err(Error::InvalidCoefficients(format!(
                    "control {ci}: |b| or |c| exceeds gamma = {} at node {i}",
                    op.gamma
                )));
            }

            let (ix, jy) = if dim == 1 { (i, 0) } else { (i % n, i / n) };

            // x-direction: central diffusion + upwind drift
            let axx = ax / (hx * hx);
            let west = axx + (-bx).max(0.0) / hx;
            let east = axx + bx.max(0.0) / hx;
            let mut d = -2.0 * axx - bx.abs() / hx + c;
            if ix > 0 {
                off[0][i] = west;
            }
            if ix + 1 < n {
                off[1][i] = east;
            }

            if dim == 2 {
                let ay = ctl.diff_y.at(i);
                let by = ctl.drift_y.at(i);
                if !(op.lambda_ell - 1e-12 <= ay && ay <= op.cap_lambda_ell + 1e-12) {
                    return Err(Error::InvalidCoefficients(format!(
                        "control {ci}: y-diffusion {ay} outside bounds at node {i}"
                    )));
                }
                if by.abs() > op.gamma + 1e-12 {
                    return Err(Error::InvalidCoefficients(format!(
                        "control {ci}: |b_y| exceeds gamma at node {i}"
                    )));
                }
                let ayy = ay / (hy * hy);
                let south = ayy + (-by).max(0.0) / hy;
                let north = ayy + by.max(0.0) / hy;
                d += -2.0 * ayy - by.abs() / hy;
                if jy > 0 {
                    off[2][i] = south;
                }
                if jy + 1 < n {
                    off[3][i] = north;
                }
            }

            diag[i] = d;
            if c > max_c {
                max_c = c;
            }
        }

        for row in &off {
            if row.iter().any(|&w| w < 0.0) {
                monotone = false;
            }
        }
        controls.push(StencilMatrix { diag, off });
    }

    // recognize pure isotropic second-order families for the 1D oracle
    let pure_diffusions = {
        let mut ds = Vec::new();
        let mut pure = true;
        for ctl in &op.controls {
            match (&ctl.diff_x, &ctl.diff_y, &ctl.drift_x, &ctl.drift_y, &ctl.zeroth) {
                (
                    Field::Const(ax),
                    Field::Const(ay),
                    Field::Const(bx),
                    Field::Const(by),
                    Field::Const(c),
                ) if *bx == 0.0 && *by == 0.0 && *c == 0.0 && (dim == 1 || ax == ay) => {
                    ds.push(*ax);
                }
                _ => {
                    pure = false;
                    break;
                }
            }
        }
        if pure {
            ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ds.dedup();
            Some(ds)
        } else {
            None
        }
    };

    Ok(DiscreteOperator {
        grid,
        sense: op.sense,
        offsets,
        controls,
        monotone,
        gamma: op.gamma,
        lambda_ell: op.lambda_ell,
        cap_lambda_ell: op.cap_lambda_ell,
        max_c: if max_c.is_finite() { max_c } else { 0.0 },
        op_name: op.name.clone(),
        pure_diffusions,
    })
}

impl DiscreteOperator {
    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn is_linear(&self) -> bool {
        self.controls.len() == 1
    }

    /// (L_a u)(i) for control `a` at node `i`.
    #[inline]
    pub fn row_apply(&self, a: usize, u: &[f64], i: usize) -> f64 {
        let st = &self.controls[a];
        let mut s = st.diag[i] * u[i];
        for (k, &o) in self.offsets.iter().enumerate() {
            let w = st.off[k][i];
            if w != 0.0 {
                let j = i as isize + o;
                s += w * u[j as usize];
            }
        }
        s
    }

    /// Node-wise extremum over controls of (L_a u), per `sense`.
    pub fn apply_sense(&self, u: &GridFunction, sense: Sense) -> Result<GridFunction> {
        if u.grid != self.grid {
            return Err(Error::GridMismatch("apply: function on a different grid".into()));
        }
        let nn = u.len();
        let mut out = vec![0.0; nn];
        for i in 0..nn {
            let mut best = self.row_apply(0, &u.values, i);
            for a in 1..self.controls.len() {
                let v = self.row_apply(a, &u.values, i);
                best = match sense {
                    Sense::Sup => best.max(v),
                    Sense::Inf => best.min(v),
                };
            }
            out[i] = best;
        }
        Ok(GridFunction {
            grid: self.grid,
            values: out,
        })
    }

    /// F_h[u] with the operator's own sense.
    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.apply_sense(u, self.sense)
    }

    /// Node-wise arg-extremum policy at `u` (lowest control index wins ties).
    pub fn policy_at(&self, u: &[f64], sense: Sense) -> Vec<u16> {
        let nn = u.len();
        let mut pol = vec![0u16; nn];
        if self.controls.len() == 1 {
            return pol;
        }
        for i in 0..nn {
            let mut best = self.row_apply(0, u, i);
            let mut arg = 0u16;
            for a in 1..self.controls.len() {
                let v = self.row_apply(a, u, i);
                let better = match sense {
                    Sense::Sup => v > best,
                    Sense::Inf => v < best,
                };
                if better {
                    best = v;
                    arg = a as u16;
                }
            }
            pol[i] = arg;
        }
        pol
    }

    /// Band matrix of `L_pol + zeroth_shift I` (+ optional extra diagonal).
    pub fn policy_band(
        &self,
        pol: &[u16],
        zeroth_shift: f64,
        extra_diag: Option<&[f64]>,
    ) -> BandMatrix {
        let nn = self.grid.len();
        let bw = if self.grid.dim() == 1 { 1 } else { self.grid.n };
        let mut m = BandMatrix::zeros(nn, bw, bw);
        for i in 0..nn {
            let st = &self.controls[pol[i] as usize];
            let mut d = st.diag[i] + zeroth_shift;
            if let Some(e) = extra_diag {
                d += e[i];
            }
            m.set(i, i, d);
            for (k, &o) in self.offsets.iter().enumerate() {
                let w = st.off[k][i];
                if w != 0.0 {
                    let j = (i as isize + o) as usize;
                    m.set(i, j, w);
                }
            }
        }
        m
    }
}

/// Result of the structural self-checks (homogeneity, subadditivity, the
/// difference sandwich, and the monotone stencil) over random pairs.
#[derive(Debug, Clone)]
pub struct StructureReport {
    pub pass: bool,
    pub worst_homogeneity: f64,
    pub worst_subadditivity: f64,
    pub worst_sandwich: f64,
    /// most negative off-diagonal stencil weight (0 when all are valid)
    pub worst_offdiagonal: f64,
    pub witness: Option<(usize, &'static str)>,
}

/// Over `trials` random pairs (u, v): homogeneity `F[t u] = t F[u]`,
/// subadditivity `F[u+v] <= F[u] + F[v]` (sup sense; reversed for inf), the
/// sandwich `-F[v-u] <= F[u] - F[v] <= F[u-v]`, and nonnegativity of every
/// off-diagonal stencil weight (the identities are theorems for any
/// extremum of linear maps; a corrupted control matrix shows up in the
/// stencil signs).
pub fn check_structure(dop: &DiscreteOperator, trials: usize, seed: u64) -> StructureReport {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let grid = dop.grid;
    // identities hold exactly in real arithmetic; the slack only has to
    // absorb floating-point roundoff, which scales with the stencil size
    let stencil_mag = dop
        .controls
        .iter()
        .flat_map(|st| st.diag.iter())
        .fold(0.0f64, |m, &d| m.max(d.abs()));
    let slack = (1e-10f64).max(1e-14 * stencil_mag);
    let mut worst_h: f64 = 0.0;
    let mut worst_sub = f64::NEG_INFINITY;
    let mut worst_dw = f64::NEG_INFINITY;
    let mut witness = None;

    let sgn = match dop.sense {
        Sense::Sup => 1.0,
        Sense::Inf => -1.0,
    };

    let mut worst_off: f64 = 0.0;
    for st in &dop.controls {
        for row in &st.off {
            for (i, &w) in row.iter().enumerate() {
                if w < worst_off {
                    worst_off = w;
                    witness = Some((i, "monotone-stencil"));
                }
            }
        }
    }

    for _ in 0..trials {
        let u = GridFunction {
            grid,
            values: (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let v = GridFunction {
            grid,
            values: (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let fu = dop.apply(&u).unwrap();
        let fv = dop.apply(&v).unwrap();

        for &t in &[0.0, 0.5, 1.0, 7.0] {
            let ftu = dop.apply(&u.scale(t)).unwrap();
            for i in 0..grid.len() {
                let d = (ftu.values[i] - t * fu.values[i]).abs();
                if d > worst_h {
                    worst_h = d;
                    if d > slack * (1.0 + t) {
                        witness = Some((i, "homogeneity"));
                    }
                }
            }
        }

        let fuv = dop.apply(&(&u + &v)).unwrap();
        let fumv = dop.apply(&(&u - &v)).unwrap();
        let fvmu = dop.apply(&(&v - &u)).unwrap();
        for i in 0..grid.len() {
            // convexity: sgn*(F[u+v] - F[u] - F[v]) <= 0
            let sub = sgn * (fuv.values[i] - fu.values[i] - fv.values[i]);
            if sub > worst_sub {
                worst_sub = sub;
                if sub > slack {
                    witness = Some((i, "subadditivity"));
                }
            }
            let diff = fu.values[i] - fv.values[i];
            let lo = -fvmu.values[i];
            let hi = fumv.values[i];
            let (lo, hi) = if sgn > 0.0 { (lo, hi) } else { (hi, lo) };
            let dw = (lo - diff).max(diff - hi);
            if dw > worst_dw {
                worst_dw = dw;
                if dw > slack {
                    witness = Some((i, "sandwich"));
                }
            }
        }
    }

    StructureReport {
        pass: worst_h <= slack * 8.0 && worst_sub <= slack && worst_dw <= slack
            && worst_off >= 0.0,
        worst_homogeneity: worst_h,
        worst_subadditivity: worst_sub,
        worst_sandwich: worst_dw,
        worst_offdiagonal: worst_off,
        witness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Domain;

    fn grid1(n: usize) -> Grid {
        Grid::new(Domain::Interval { length: 1.0 }, n).unwrap()
    }

    #[test]
    fn laplacian_three_point_stencil() {
        let g = grid1(3); // h = 0.25
        let dop = discretize(&HJBOperator::laplacian(), g).unwrap();
        let h2 = 0.25f64 * 0.25;
        let st = &dop.controls[0];
        for i in 0..3 {
            assert!((st.diag[i] + 2.0 / h2).abs() < 1e-12);
        }
        assert_eq!(st.off[0][0], 0.0); // west neighbor of first node is boundary
        assert!((st.off[1][0] - 1.0 / h2).abs() < 1e-12);
        assert!((st.off[0][1] - 1.0 / h2).abs() < 1e-12);
        assert!(dop.monotone);
    }

    #[test]
    fn barenblatt_two_controls() {
        let g = grid1(10);
        let dop = discretize(&HJBOperator::barenblatt(1.0, 2.0).unwrap(), g).unwrap();
        assert_eq!(dop.n_controls(), 2);
        // second control is 2x the laplacian stencil
        for i in 0..10 {
            assert!((dop.controls[1].diag[i] - 2.0 * dop.controls[0].diag[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn upwind_drift_weights() {
        let g = grid1(8);
        let op = HJBOperator::explicit(
            "drifted",
            vec![ControlCoeffs {
                diff_x: Field::Const(1.0),
                diff_y: Field::Const(1.0),
                drift_x: Field::Const(3.0),
                drift_y: Field::Const(0.0),
                zeroth: Field::Const(0.0),
            }],
            Sense::Sup,
            1.0,
            1.0,
            3.0,
        )
        .unwrap();
        let dop = discretize(&op, g).unwrap();
        let (h, _) = g.spacing();
        let st = &dop.controls[0];
        // b > 0: forward difference only; west weight is pure diffusion
        for i in 1..7 {
            assert!((st.off[0][i] - 1.0 / (h * h)).abs() < 1e-9);
            assert!((st.off[1][i] - (1.0 / (h * h) + 3.0 / h)).abs() < 1e-9);
        }
        assert!(dop.monotone);
    }

    #[test]
    fn monotonicity_precondition_checked() {
        // gamma so large that h*gamma > 2*lambda_ell on a coarse grid
        let g = grid1(3); // h = 0.25
        let op = HJBOperator::explicit(
            "stiff-drift",
            vec![ControlCoeffs {
                diff_x: Field::Const(1.0),
                diff_y: Field::Const(1.0),
                drift_x: Field::Const(9.0),
                drift_y: Field::Const(0.0),
                zeroth: Field::Const(0.0),
            }],
            Sense::Sup,
            1.0,
            1.0,
            9.0,
        )
        .unwrap();
        assert!(matches!(
            discretize(&op, g),
            Err(Error::MonotonicityViolation(_))
        ));
    }

    #[test]
    fn invalid_coefficients_rejected() {
        let g = grid1(5);
        let op = HJBOperator::explicit(
            "bad",
            vec![ControlCoeffs::isotropic(5.0, 0.0)],
            Sense::Sup,
            1.0,
            2.0,
            0.0,
        )
        .unwrap();
        assert!(matches!(
            discretize(&op, g),
            Err(Error::InvalidCoefficients(_))
        ));
    }

    #[test]
    fn apply_barenblatt_picks_smaller_on_concave() {
        let g = grid1(200);
        let dop = discretize(&HJBOperator::barenblatt(1.0, 2.0).unwrap(), g).unwrap();
        let pi = std::f64::consts::PI;
        let u = g.sample(|x, _| (pi * x).sin());
        let fu = dop.apply(&u).unwrap();
        // max{Δu, 2Δu} = Δu for concave u; compare to -pi^2 sin at interior
        for i in 1..g.len() - 1 {
            let x = (i as f64 + 1.0) / 201.0;
            let expect = -pi * pi * (pi * x).sin();
            assert!(
                (fu.values[i] - expect).abs() < 3e-3,
                "node {i}: {} vs {expect}",
                fu.values[i]
            );
        }
        let z = GridFunction::zeros(g);
        assert_eq!(norm_sup(&dop.apply(&z).unwrap()), 0.0);
    }

    fn norm_sup(u: &GridFunction) -> f64 {
        crate::grid::norm(u, crate::grid::NormKind::Sup)
    }

    #[test]
    fn homogeneity_exact() {
        let g = grid1(40);
        let dop = discretize(&HJBOperator::barenblatt(1.0, 2.0).unwrap(), g).unwrap();
        let u = g.sample(|x, _| (7.0 * x).sin() - 0.3);
        let t = 2.5;
        let a = dop.apply(&u.scale(t)).unwrap();
        let b = dop.apply(&u).unwrap().scale(t);
        assert!(a.sup_dist(&b) <= 1e-12 * (1.0 + norm_sup(&b)));
    }

    #[test]
    fn structure_checks_pass_and_fail() {
        let g = grid1(25);
        let dop = discretize(&HJBOperator::barenblatt(1.0, 2.0).unwrap(), g).unwrap();
        let rep = check_structure(&dop, 100, 42);
        assert!(rep.pass, "{rep:?}");

        // linear operator: subadditivity holds with equality
        let lin = discretize(&HJBOperator::laplacian(), g).unwrap();
        let rep = check_structure(&lin, 50, 1);
        assert!(rep.pass);
        assert!(rep.worst_subadditivity.abs() < 1e-9);

        // negating one control keeps the extremum-of-linear identities (they
        // hold for any control family) but breaks the monotone stencil,
        // which the checker reports with a located node
        let mut bad = dop.clone();
        for v in bad.controls[1].diag.iter_mut() {
            *v = -*v;
        }
        for row in bad.controls[1].off.iter_mut() {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
        let rep = check_structure(&bad, 100, 7);
        assert!(!rep.pass);
        assert!(rep.worst_offdiagonal < 0.0);
        assert!(matches!(rep.witness, Some((_, "monotone-stencil"))));
    }

    #[test]
    fn consistency_order_two_without_drift() {
        // apply(discretize)(u) -> F[u] at order h^2 for smooth u
        let pi = std::f64::consts::PI;
        let errs: Vec<f64> = [50usize, 100, 200]
            .iter()
            .map(|&n| {
                let g = grid1(n);
                let dop = discretize(&HJBOperator::barenblatt(1.0, 2.0).unwrap(), g).unwrap();
                let u = g.sample(|x, _| (pi * x).sin());
                let fu = dop.apply(&u).unwrap();
                let exact = g.sample(|x, _| -pi * pi * (pi * x).sin());
                fu.sup_dist(&exact)
            })
            .collect();
        let slope = (errs[0] / errs[1]).log2().min((errs[1] / errs[2]).log2());
        assert!(slope > 1.9, "consistency order {slope}, errs {errs:?}");
    }

    #[test]
    fn pucci_2d_family() {
        let g = Grid::new(Domain::Rectangle { lx: 1.0, ly: 1.0 }, 8).unwrap();
        let dop = discretize(&HJBOperator::pucci_plus(1.0, 2.0).unwrap(), g).unwrap();
        assert_eq!(dop.n_controls(), 4);
        assert!(dop.monotone);
    }
}

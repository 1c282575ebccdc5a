//! Library of nonlinearities f(x, s), their asymptotic limits, and
//! executable checkers for the structural hypotheses (sub-linearity, sign
//! and Lipschitz conditions, Landesman-Lazer-type threshold conditions).
//!
//! A nonlinearity is a base profile in `s` plus an optional additive forcing
//! `h(x)`. Infinite asymptotic limits are explicit flags, never sentinel
//! floats.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{integrate, norm, Grid, GridFunction, NormKind};

#[derive(Debug, Clone)]
pub enum BaseProfile {
    Zero,
    /// slope * s
    Linear { slope: f64 },
    /// coeff * sign(s) * sqrt|s|
    SignedSqrt { coeff: f64 },
    /// -s on [-1, 1], -sign(s) sqrt|s| outside (odd, globally 1-Lipschitz)
    RestoringSqrt,
    /// -sign(s) |s|^alpha, alpha in (0,1)
    PowerDecay { alpha: f64 },
    /// s on [-1, 1], sign(s) |s|^alpha outside (odd, globally 1-Lipschitz)
    PowerGrowth { alpha: f64 },
    /// coeff(s) * shape(x) with coeff = hi for s >= -m, a linear ramp on
    /// [-2m, -m], and lo for s <= -2m
    GatedForcing {
        hi: f64,
        lo: f64,
        m: f64,
        shape: GridFunction,
    },
    /// user-defined pieces: expression in (x, y, s) on s-intervals
    Piecewise(Vec<ExprPiece>),
}

#[derive(Debug, Clone)]
pub struct ExprPiece {
    pub from: f64,
    pub to: f64,
    pub expr: Expr,
}

#[derive(Debug, Clone)]
pub struct Nonlinearity {
    pub name: String,
    pub base: BaseProfile,
    pub forcing: Option<GridFunction>,
}

/// An asymptotic limit of f(x, s) as s -> +-infinity.
#[derive(Debug, Clone)]
pub enum LimitVal {
    Finite(GridFunction),
    PlusInf,
    MinusInf,
}

/// The four limits: liminf/limsup at +infinity and at -infinity.
#[derive(Debug, Clone)]
pub struct Limits {
    pub plus_lower: LimitVal,
    pub plus_upper: LimitVal,
    pub minus_lower: LimitVal,
    pub minus_upper: LimitVal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct VerdictReport {
    pub verdict: Verdict,
    pub witness: Option<String>,
}

impl Nonlinearity {
    pub fn new(name: &str, base: BaseProfile, forcing: Option<GridFunction>) -> Result<Self> {
        if let BaseProfile::PowerDecay { alpha } | BaseProfile::PowerGrowth { alpha } = base {
            if !(0.0 < alpha && alpha < 1.0) {
                return Err(Error::InvalidParams(format!(
                    "alpha must lie in (0,1), got {alpha}"
                )));
            }
        }
        if let BaseProfile::GatedForcing { m, .. } = base {
            if m <= 0.0 {
                return Err(Error::InvalidParams("gate width m must be positive".into()));
            }
        }
        Ok(Nonlinearity {
            name: name.into(),
            base,
            forcing,
        })
    }

    pub fn zero() -> Self {
        Nonlinearity {
            name: "zero".into(),
            base: BaseProfile::Zero,
            forcing: None,
        }
    }

    /// f(x, s) = g(x): constant in s.
    pub fn fixed_rhs(g: GridFunction) -> Self {
        Nonlinearity {
            name: "fixed-rhs".into(),
            base: BaseProfile::Zero,
            forcing: Some(g),
        }
    }

    fn base_eval(&self, grid: &Grid, idx: usize, s: f64) -> f64 {
        match &self.base {
            BaseProfile::Zero => 0.0,
            BaseProfile::Linear { slope } => slope * s,
            BaseProfile::SignedSqrt { coeff } => coeff * s.signum() * s.abs().sqrt(),
            BaseProfile::RestoringSqrt => {
                if s.abs() <= 1.0 {
                    -s
                } else {
                    -s.signum() * s.abs().sqrt()
                }
            }
            BaseProfile::PowerDecay { alpha } => -s.signum() * s.abs().powf(*alpha),
            BaseProfile::PowerGrowth { alpha } => {
                if s.abs() <= 1.0 {
                    s
                } else {
                    s.signum() * s.abs().powf(*alpha)
                }
            }
            BaseProfile::GatedForcing { hi, lo, m, shape } => {
                let coeff = if s >= -m {
                    *hi
                } else if s <= -2.0 * m {
                    *lo
                } else {
                    // linear ramp from hi at -m down to lo at -2m
                    (hi - lo) / m * (s + m) + hi
                };
                coeff * shape.values[idx]
            }
            BaseProfile::Piecewise(pieces) => {
                let (x, y) = grid.coords(idx);
                for p in pieces {
                    if s >= p.from && s <= p.to {
                        return p.expr.eval(x, y, s);
                    }
                }
                0.0
            }
        }
    }

    pub fn eval(&self, grid: &Grid, idx: usize, s: f64) -> f64 {
        let mut v = self.base_eval(grid, idx, s);
        if let Some(h) = &self.forcing {
            v += h.values[idx];
        }
        v
    }

    /// Node-wise f(x, u(x)).
    pub fn eval_fn(&self, u: &GridFunction) -> GridFunction {
        let vals = (0..u.len())
            .map(|i| self.eval(&u.grid, i, u.values[i]))
            .collect();
        GridFunction {
            grid: u.grid,
            values: vals,
        }
    }

    /// d f / d s at (x, s); sqrt-type profiles are clamped near s = 0.
    pub fn deriv(&self, grid: &Grid, idx: usize, s: f64) -> f64 {
        const EPS: f64 = 1e-12;
        match &self.base {
            BaseProfile::Zero => 0.0,
            BaseProfile::Linear { slope } => *slope,
            BaseProfile::SignedSqrt { coeff } => 0.5 * coeff / s.abs().max(EPS).sqrt(),
            BaseProfile::RestoringSqrt => {
                if s.abs() <= 1.0 {
                    -1.0
                } else {
                    -0.5 / s.abs().sqrt()
                }
            }
            BaseProfile::PowerDecay { alpha } => -alpha * s.abs().max(EPS).powf(alpha - 1.0),
            BaseProfile::PowerGrowth { alpha } => {
                if s.abs() <= 1.0 {
                    1.0
                } else {
                    alpha * s.abs().powf(alpha - 1.0)
                }
            }
            BaseProfile::GatedForcing { hi, lo, m, shape } => {
                if s > -m || s < -2.0 * m {
                    0.0
                } else {
                    (hi - lo) / m * shape.values[idx]
                }
            }
            BaseProfile::Piecewise(_) => {
                let dh = 1e-6 * (1.0 + s.abs());
                (self.base_eval(grid, idx, s + dh) - self.base_eval(grid, idx, s - dh)) / (2.0 * dh)
            }
        }
    }

    /// Upper bound of the signed derivative d f / d s over s in [lo, hi].
    /// The monotone fixed-point map only needs the increasing part of f
    /// controlled, so decreasing profiles report 0 even where their
    /// two-sided Lipschitz constant is infinite.
    pub fn deriv_sup(&self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo <= hi);
        match &self.base {
            BaseProfile::Zero => 0.0,
            BaseProfile::Linear { slope } => slope.max(0.0),
            BaseProfile::SignedSqrt { coeff } => {
                if *coeff <= 0.0 {
                    0.0
                } else if lo <= 0.0 && hi >= 0.0 {
                    f64::INFINITY
                } else {
                    let closest = lo.abs().min(hi.abs());
                    0.5 * coeff / closest.sqrt()
                }
            }
            BaseProfile::RestoringSqrt | BaseProfile::PowerDecay { .. } => 0.0,
            BaseProfile::PowerGrowth { .. } => 1.0,
            BaseProfile::GatedForcing { hi: h, lo: l, m, shape } => {
                let slope = (h - l) / m;
                shape
                    .values
                    .iter()
                    .map(|sv| (slope * sv).max(0.0))
                    .fold(0.0, f64::max)
            }
            BaseProfile::Piecewise(_) => {
                let grid = match &self.forcing {
                    Some(h) => h.grid,
                    None => return f64::INFINITY,
                };
                let mut worst: f64 = 0.0;
                let nodes = [0, grid.len() / 2, grid.len() - 1];
                let m = 400;
                for &i in &nodes {
                    let mut prev = self.base_eval(&grid, i, lo);
                    for k in 1..=m {
                        let s = lo + (hi - lo) * k as f64 / m as f64;
                        let v = self.base_eval(&grid, i, s);
                        worst = worst.max((v - prev) / ((hi - lo) / m as f64));
                        prev = v;
                    }
                }
                worst * 1.5
            }
        }
    }

    /// Lipschitz constant of f(x, .) on [-R, R]; infinite for profiles with
    /// an unbounded derivative at 0.
    pub fn lip(&self, r: f64) -> f64 {
        match &self.base {
            BaseProfile::Zero => 0.0,
            BaseProfile::Linear { slope } => slope.abs(),
            BaseProfile::SignedSqrt { coeff } => {
                if *coeff == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            BaseProfile::RestoringSqrt => 1.0,
            BaseProfile::PowerDecay { .. } => f64::INFINITY,
            BaseProfile::PowerGrowth { .. } => 1.0,
            BaseProfile::GatedForcing { hi, lo, m, shape } => {
                (hi - lo).abs() / m * norm(shape, NormKind::Sup)
            }
            BaseProfile::Piecewise(_) => {
                // sampled difference quotients, with a safety factor
                let grid = match &self.forcing {
                    Some(h) => h.grid,
                    None => return f64::INFINITY,
                };
                let mut worst: f64 = 0.0;
                let nodes = [0, grid.len() / 2, grid.len() - 1];
                let m = 400;
                for &i in &nodes {
                    let mut prev = self.base_eval(&grid, i, -r);
                    for k in 1..=m {
                        let s = -r + 2.0 * r * k as f64 / m as f64;
                        let v = self.base_eval(&grid, i, s);
                        worst = worst.max((v - prev).abs() / (2.0 * r / m as f64));
                        prev = v;
                    }
                }
                worst * 1.5
            }
        }
    }

    /// Declared asymptotic limits on `grid`.
    pub fn limits(&self, grid: &Grid) -> Limits {
        let finite = |g: GridFunction| LimitVal::Finite(g);
        let add_forcing = |lv: LimitVal| -> LimitVal {
            match (lv, &self.forcing) {
                (LimitVal::Finite(g), Some(h)) => LimitVal::Finite(&g + h),
                (lv, _) => lv,
            }
        };
        let zero = GridFunction::zeros(*grid);
        let (pl, pu, ml, mu) = match &self.base {
            BaseProfile::Zero => (
                finite(zero.clone()),
                finite(zero.clone()),
                finite(zero.clone()),
                finite(zero),
            ),
            BaseProfile::Linear { slope } => {
                if *slope > 0.0 {
                    (LimitVal::PlusInf, LimitVal::PlusInf, LimitVal::MinusInf, LimitVal::MinusInf)
                } else if *slope < 0.0 {
                    (LimitVal::MinusInf, LimitVal::MinusInf, LimitVal::PlusInf, LimitVal::PlusInf)
                } else {
                    (
                        finite(zero.clone()),
                        finite(zero.clone()),
                        finite(zero.clone()),
                        finite(zero),
                    )
                }
            }
            BaseProfile::SignedSqrt { coeff } => {
                if *coeff > 0.0 {
                    (LimitVal::PlusInf, LimitVal::PlusInf, LimitVal::MinusInf, LimitVal::MinusInf)
                } else if *coeff < 0.0 {
                    (LimitVal::MinusInf, LimitVal::MinusInf, LimitVal::PlusInf, LimitVal::PlusInf)
                } else {
                    (
                        finite(zero.clone()),
                        finite(zero.clone()),
                        finite(zero.clone()),
                        finite(zero),
                    )
                }
            }
            BaseProfile::RestoringSqrt | BaseProfile::PowerDecay { .. } => (
                LimitVal::MinusInf,
                LimitVal::MinusInf,
                LimitVal::PlusInf,
                LimitVal::PlusInf,
            ),
            BaseProfile::PowerGrowth { .. } => (
                LimitVal::PlusInf,
                LimitVal::PlusInf,
                LimitVal::MinusInf,
                LimitVal::MinusInf,
            ),
            BaseProfile::GatedForcing { hi, lo, shape, .. } => (
                finite(shape.scale(*hi)),
                finite(shape.scale(*hi)),
                finite(shape.scale(*lo)),
                finite(shape.scale(*lo)),
            ),
            BaseProfile::Piecewise(_) => {
                // estimate by sampling far out
                let probe = |s: f64| -> LimitVal {
                    let g = GridFunction {
                        grid: *grid,
                        values: (0..grid.len()).map(|i| self.base_eval(grid, i, s)).collect(),
                    };
                    let m = norm(&g, NormKind::Sup);
                    if m > 1e3 {
                        if integrate(&g) > 0.0 {
                            LimitVal::PlusInf
                        } else {
                            LimitVal::MinusInf
                        }
                    } else {
                        LimitVal::Finite(g)
                    }
                };
                let p = probe(1e6);
                let m = probe(-1e6);
                (p.clone(), p, m.clone(), m)
            }
        };
        Limits {
            plus_lower: add_forcing(pl),
            plus_upper: add_forcing(pu),
            minus_lower: add_forcing(ml),
            minus_upper: add_forcing(mu),
        }
    }
}

/// (F0)-style check: max_x |f(x,s)/s| on a geometric grid of |s| up to 1e8
/// must drop below 1e-3 and be monotone beyond 1e4.
pub fn check_sublinear(f: &Nonlinearity, grid: &Grid) -> VerdictReport {
    let mut ok = true;
    let mut witness = None;
    for sign in [1.0, -1.0] {
        let mut prev = f64::INFINITY;
        for k in 1..=8 {
            let s = sign * 10f64.powi(k);
            let ratio = (0..grid.len())
                .map(|i| (f.eval(grid, i, s) / s).abs())
                .fold(0.0, f64::max);
            if s.abs() >= 1e4 && ratio > prev + 1e-12 {
                ok = false;
                witness = Some(format!("ratio increases at s = {s:.1e} ({ratio:.3e})"));
            }
            if k == 8 && ratio >= 1e-3 {
                ok = false;
                witness = Some(format!("ratio {ratio:.3e} at s = {s:.1e}"));
            }
            prev = ratio;
        }
    }
    VerdictReport {
        verdict: if ok { Verdict::Holds } else { Verdict::Fails },
        witness,
    }
}

/// (F1): f(x,0) >= 0 node-wise and not identically zero.
/// (F2): sampled difference quotients bounded on [-R, R], R in {1, 10, 100}.
pub fn check_f1_f2(f: &Nonlinearity, grid: &Grid) -> (VerdictReport, VerdictReport) {
    let at0 = GridFunction {
        grid: *grid,
        values: (0..grid.len()).map(|i| f.eval(grid, i, 0.0)).collect(),
    };
    let mut f1 = VerdictReport {
        verdict: Verdict::Holds,
        witness: None,
    };
    for (i, v) in at0.values.iter().enumerate() {
        if *v < -1e-12 {
            f1 = VerdictReport {
                verdict: Verdict::Fails,
                witness: Some(format!("f(x,0) = {v:.3e} < 0 at node {i}")),
            };
            break;
        }
    }
    if f1.verdict == Verdict::Holds && integrate(&at0) <= 0.0 {
        f1 = VerdictReport {
            verdict: Verdict::Fails,
            witness: Some("f(x,0) is identically zero".into()),
        };
    }

    // F2: quotients at pair spacings shrinking toward 0 must stay bounded
    let mut f2 = VerdictReport {
        verdict: Verdict::Holds,
        witness: None,
    };
    const QUOT_CAP: f64 = 1e4;
    'outer: for &r in &[1.0, 10.0, 100.0] {
        for &i in &[0usize, grid.len() / 2] {
            for k in 1i32..=12 {
                let d = r * 10f64.powi(-k);
                for &s in &[0.0, 0.3 * r, -0.3 * r, 0.9 * r, -0.9 * r] {
                    let q = (f.eval(grid, i, s + d) - f.eval(grid, i, s)).abs() / d;
                    if q > QUOT_CAP {
                        f2 = VerdictReport {
                            verdict: Verdict::Fails,
                            witness: Some(format!(
                                "difference quotient {q:.3e} at s = {s:.3e}, spacing {d:.1e}"
                            )),
                        };
                        break 'outer;
                    }
                }
            }
        }
    }
    (f1, f2)
}

/// The four one-sided threshold conditions on the asymptotics of f.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LLSide {
    /// c <= f_+ with t*_+(c) < 0
    EllPlus,
    /// c >= f^- with t*_-(c) > 0
    EllMinus,
    /// c >= f^+ with t*_+(c) > 0
    RPlus,
    /// c <= f_- with t*_-(c) < 0
    RMinus,
}

#[derive(Debug, Clone)]
pub struct LandesmanReport {
    pub side: LLSide,
    pub verdict: Verdict,
    pub tstar: Option<crate::tstar::TStarResult>,
    pub c_used: Option<GridFunction>,
    pub note: String,
}

/// Check a one-sided threshold condition: build the comparison function c
/// from the declared limits (or take the supplied override), compute the
/// resonant threshold, and demand the strict sign clears the bracket by at
/// least its own width.
pub fn check_landesman(
    f: &Nonlinearity,
    dop: &crate::operator::DiscreteOperator,
    ctx: &crate::eigen::EigenContext,
    side: LLSide,
    c_override: Option<GridFunction>,
    opts: &crate::tstar::TStarOptions,
) -> Result<LandesmanReport> {
    let grid = dop.grid;
    let lims = f.limits(&grid);
    // (relevant limit, whether c must sit below it, plus/minus threshold, sign wanted)
    let (limit, c_below, plus_side, want_negative) = match side {
        LLSide::EllPlus => (&lims.plus_lower, true, true, true),
        LLSide::EllMinus => (&lims.minus_upper, false, false, false),
        LLSide::RPlus => (&lims.plus_upper, false, true, false),
        LLSide::RMinus => (&lims.minus_lower, true, false, true),
    };
    let c = match (limit, c_below) {
        (LimitVal::MinusInf, true) | (LimitVal::PlusInf, false) => {
            return Ok(LandesmanReport {
                side,
                verdict: Verdict::Fails,
                tstar: None,
                c_used: None,
                note: "the relevant limit is infinite on the wrong side; no comparison \
                       function exists"
                    .into(),
            })
        }
        (LimitVal::Finite(v), _) => match c_override {
            Some(c) => {
                let ok = if c_below {
                    c.le(v, 1e-12)
                } else {
                    v.le(&c, 1e-12)
                };
                if !ok {
                    return Err(Error::BoundViolated(
                        "supplied c is on the wrong side of the declared limit".into(),
                    ));
                }
                c
            }
            None => v.clone(),
        },
        // infinite on the permissive side: any c works; default to +-1
        _ => c_override.unwrap_or_else(|| {
            GridFunction::constant(grid, if c_below { 1.0 } else { -1.0 })
        }),
    };

    let ts = crate::tstar::tstar_resonant(dop, ctx, plus_side, &c, opts)?;
    let width = ts.width();
    let verdict = if want_negative {
        if ts.bracket.1 <= -width {
            Verdict::Holds
        } else if ts.bracket.0 >= width {
            Verdict::Fails
        } else {
            Verdict::Inconclusive
        }
    } else if ts.bracket.0 >= width {
        Verdict::Holds
    } else if ts.bracket.1 <= -width {
        Verdict::Fails
    } else {
        Verdict::Inconclusive
    };
    Ok(LandesmanReport {
        side,
        verdict,
        note: format!(
            "t* in [{:.6}, {:.6}], strict sign {}",
            ts.bracket.0,
            ts.bracket.1,
            match verdict {
                Verdict::Holds => "cleared",
                Verdict::Fails => "cleared with the opposite sign",
                Verdict::Inconclusive => "not resolved at this bracket width",
            }
        ),
        tstar: Some(ts),
        c_used: Some(c),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DRSide {
    /// c <= f_+ : u >= R phi  =>  f(x,u) >= d
    PlusLower,
    /// c >= f^+ : u >= R phi  =>  f(x,u) <= d
    PlusUpper,
    /// c <= f_- : u <= -R phi =>  f(x,u) >= d
    MinusLower,
    /// c >= f^- : u <= -R phi =>  f(x,u) <= d
    MinusUpper,
}

/// Construct (d, R) with ||d - c|| <= eps such that the side's implication
/// holds on the grid; the sigma shave and the measure cut follow the
/// super/sub-solution construction with p = 2*dim + 1.
pub fn construct_dr(
    f: &Nonlinearity,
    side: DRSide,
    c: &GridFunction,
    eps: f64,
    phi_plus: &GridFunction,
) -> Result<(GridFunction, f64)> {
    if eps <= 0.0 {
        return Err(Error::InvalidParams("eps must be positive".into()));
    }
    let grid = c.grid;
    let p = (2 * grid.dim() + 1) as f64;
    let sigma = eps / (2.0 * grid.domain.measure().powf(1.0 / p));

    let lower_side = matches!(side, DRSide::PlusLower | DRSide::MinusLower);
    let plus_side = matches!(side, DRSide::PlusLower | DRSide::PlusUpper);

    // find s0: beyond it (in the side's direction) the bound c -/+ sigma holds
    let dir = if plus_side { 1.0 } else { -1.0 };
    let mut s0 = None;
    let mut s = 1.0f64;
    while s <= 1e9 {
        let mut all_ok = true;
        // check a few magnitudes beyond s as a sampled "for all s' >= s"
        for mult in [1.0, 2.0, 8.0, 64.0, 1024.0] {
            let sv = dir * s * mult;
            for i in 0..grid.len() {
                let fv = f.eval(&grid, i, sv);
                let ok = if lower_side {
                    fv >= c.values[i] - sigma
                } else {
                    fv <= c.values[i] + sigma
                };
                if !ok {
                    all_ok = false;
                    break;
                }
            }
            if !all_ok {
                break;
            }
        }
        if all_ok {
            s0 = Some(s);
            break;
        }
        s *= 2.0;
    }
    let s0 = s0.ok_or_else(|| {
        Error::BoundViolated(format!(
            "c is not an asymptotic {} bound for side {side:?}",
            if lower_side { "lower" } else { "upper" }
        ))
    })?;

    // M bounds |f| on the near range [0, s0] (resp. [-s0, 0]) and dominates c -+ sigma
    let mut m: f64 = 0.0;
    for k in 0..=64 {
        let sv = dir * s0 * k as f64 / 64.0;
        for i in 0..grid.len() {
            m = m.max(f.eval(&grid, i, sv).abs());
        }
    }
    for i in 0..grid.len() {
        m = m.max(c.values[i].abs() + sigma);
    }
    m += 1.0;

    // R: the complement of {R phi > s0} must have measure < (eps / 2M)^p
    let cut = (eps / (2.0 * m)).powf(p);
    let mut r = s0 / norm(phi_plus, NormKind::Sup).max(1e-300);
    let mut ok_r = None;
    for _ in 0..80 {
        let mut excluded = 0.0;
        for i in 0..grid.len() {
            if r * phi_plus.values[i] <= s0 {
                excluded += grid.weight(i);
            }
        }
        if excluded < cut {
            ok_r = Some(r);
            break;
        }
        r *= 2.0;
    }
    let r = ok_r.ok_or_else(|| {
        Error::BoundViolated("could not shrink the near-boundary set enough".into())
    })?;

    let bulk_shift = if lower_side { -sigma } else { sigma };
    let far = if lower_side { -m } else { m };
    let values = (0..grid.len())
        .map(|i| {
            if r * phi_plus.values[i] > s0 {
                c.values[i] + bulk_shift
            } else {
                far
            }
        })
        .collect();
    Ok((GridFunction { grid, values }, r))
}

//! Scenario configuration: a flat, human-diffable TOML file describing the
//! domain, grid, operator, nonlinearity and per-subcommand parameters.
//! Parsing is lossless (round-trips through serde) and validation errors
//! carry the offending field path.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{Domain, Grid, GridFunction};
use crate::nonlin::{BaseProfile, ExprPiece, Nonlinearity};
use crate::operator::{ControlCoeffs, Field, HJBOperator, Sense};
use serde::{Deserialize, Serialize};

fn default_seed() -> u64 {
    0
}
fn default_threads() -> usize {
    1
}
fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_threads")]
    pub threads: usize,
    pub domain: DomainSpec,
    pub grid: GridSpec,
    pub operator: OperatorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinearity: Option<NonlinSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tstar: Option<TStarSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<BranchSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ly: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub controls: Vec<ControlSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sense: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_ell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_lambda_ell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSpec {
    pub diff: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff_y: Option<f64>,
    #[serde(default)]
    pub drift: f64,
    #[serde(default)]
    pub drift_y: f64,
    #[serde(default)]
    pub zeroth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pieces: Vec<PieceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceSpec {
    /// lower end of the s-interval; omitted means -infinity
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<f64>,
    pub expr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSpec {
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TStarSpec {
    /// "resonant_plus" | "resonant_minus" | "interior"
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub d: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub lambda_min: f64,
    pub lambda_max: f64,
    #[serde(default = "default_census_points")]
    pub census_points: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<SeedSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

fn default_census_points() -> usize {
    0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSpec {
    /// "from_plus_infinity" | "from_minus_infinity" | "zero" | "proper"
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    #[serde(default = "default_one")]
    pub tol_scale: f64,
    #[serde(default = "default_one")]
    pub budget_scale: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            tol_scale: 1.0,
            budget_scale: 1.0,
        }
    }
}

fn cfg_err(path: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        msg: msg.into(),
    }
}

impl Scenario {
    pub fn from_toml_str(s: &str) -> Result<Scenario> {
        let sc: Scenario =
            toml::from_str(s).map_err(|e| cfg_err("<toml>", e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| cfg_err("<toml>", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.solver.tol_scale <= 0.0 {
            return Err(cfg_err("solver.tol_scale", "must be positive"));
        }
        if self.solver.budget_scale <= 0.0 {
            return Err(cfg_err("solver.budget_scale", "must be positive"));
        }
        if self.threads == 0 {
            return Err(cfg_err("threads", "must be at least 1"));
        }
        self.build_grid()?;
        self.build_operator()?;
        if self.nonlinearity.is_some() {
            let grid = self.build_grid()?;
            self.build_nonlinearity(grid)?;
        }
        if let Some(t) = &self.tstar {
            match t.mode.as_str() {
                "resonant_plus" | "resonant_minus" => {}
                "interior" => {
                    if t.lambda.is_none() {
                        return Err(cfg_err("tstar.lambda", "required for interior mode"));
                    }
                }
                other => {
                    return Err(cfg_err(
                        "tstar.mode",
                        format!("unknown mode `{other}` (resonant_plus | resonant_minus | interior)"),
                    ))
                }
            }
            let grid = self.build_grid()?;
            self.sample_field(grid, &t.d, "tstar.d")?;
        }
        if let Some(b) = &self.branch {
            if b.lambda_min >= b.lambda_max {
                return Err(cfg_err("branch.lambda_min", "window must be nonempty"));
            }
            for (i, s) in b.seeds.iter().enumerate() {
                match s.kind.as_str() {
                    "from_plus_infinity" | "from_minus_infinity" => {
                        let side = s.side.as_deref().unwrap_or("left");
                        if side != "left" && side != "right" {
                            return Err(cfg_err(
                                &format!("branch.seeds[{i}].side"),
                                "must be `left` or `right`",
                            ));
                        }
                    }
                    "zero" | "proper" => {}
                    other => {
                        return Err(cfg_err(
                            &format!("branch.seeds[{i}].kind"),
                            format!("unknown seed kind `{other}`"),
                        ))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Grid> {
        let domain = match self.domain.kind.as_str() {
            "interval" => Domain::Interval {
                length: self
                    .domain
                    .length
                    .ok_or_else(|| cfg_err("domain.length", "required for intervals"))?,
            },
            "rectangle" => Domain::Rectangle {
                lx: self
                    .domain
                    .lx
                    .ok_or_else(|| cfg_err("domain.lx", "required for rectangles"))?,
                ly: self
                    .domain
                    .ly
                    .ok_or_else(|| cfg_err("domain.ly", "required for rectangles"))?,
            },
            other => {
                return Err(cfg_err(
                    "domain.kind",
                    format!("unknown kind `{other}` (interval | rectangle)"),
                ))
            }
        };
        Grid::new(domain, self.grid.n)
            .map_err(|e| cfg_err("grid.n", e.to_string()))
    }

    pub fn build_operator(&self) -> Result<HJBOperator> {
        let o = &self.operator;
        let need = |v: Option<f64>, path: &str| -> Result<f64> {
            v.ok_or_else(|| cfg_err(path, "required for this operator kind"))
        };
        match o.kind.as_str() {
            "laplacian" => Ok(HJBOperator::laplacian()),
            "barenblatt" => HJBOperator::barenblatt(
                need(o.a, "operator.a")?,
                need(o.b, "operator.b")?,
            ),
            "pucci_plus" => HJBOperator::pucci_plus(
                need(o.a, "operator.a")?,
                need(o.b, "operator.b")?,
            ),
            "pucci_minus" => HJBOperator::pucci_minus(
                need(o.a, "operator.a")?,
                need(o.b, "operator.b")?,
            ),
            "fucik" => HJBOperator::fucik(need(o.a, "operator.a")?, need(o.b, "operator.b")?),
            "explicit" => {
                if o.controls.is_empty() {
                    return Err(cfg_err("operator.controls", "explicit operators need controls"));
                }
                let sense = match o.sense.as_deref().unwrap_or("sup") {
                    "sup" => Sense::Sup,
                    "inf" => Sense::Inf,
                    other => {
                        return Err(cfg_err("operator.sense", format!("unknown sense `{other}`")))
                    }
                };
                let controls: Vec<ControlCoeffs> = o
                    .controls
                    .iter()
                    .map(|c| ControlCoeffs {
                        diff_x: Field::Const(c.diff),
                        diff_y: Field::Const(c.diff_y.unwrap_or(c.diff)),
                        drift_x: Field::Const(c.drift),
                        drift_y: Field::Const(c.drift_y),
                        zeroth: Field::Const(c.zeroth),
                    })
                    .collect();
                let lo = o.lambda_ell.unwrap_or_else(|| {
                    o.controls
                        .iter()
                        .map(|c| c.diff.min(c.diff_y.unwrap_or(c.diff)))
                        .fold(f64::INFINITY, f64::min)
                });
                let hi = o.cap_lambda_ell.unwrap_or_else(|| {
                    o.controls
                        .iter()
                        .map(|c| c.diff.max(c.diff_y.unwrap_or(c.diff)))
                        .fold(0.0, f64::max)
                });
                let gamma = o.gamma.unwrap_or_else(|| {
                    o.controls
                        .iter()
                        .map(|c| c.drift.abs().max(c.drift_y.abs()).max(c.zeroth.abs()))
                        .fold(0.0, f64::max)
                });
                HJBOperator::explicit("explicit", controls, sense, lo, hi, gamma)
                    .map_err(|e| cfg_err("operator", e.to_string()))
            }
            other => Err(cfg_err(
                "operator.kind",
                format!(
                    "unknown kind `{other}` (laplacian | barenblatt | pucci_plus | pucci_minus | fucik | explicit)"
                ),
            )),
        }
    }

    /// Sample an expression in x (and y) on the grid.
    pub fn sample_field(&self, grid: Grid, src: &str, path: &str) -> Result<GridFunction> {
        let e = Expr::parse(src).map_err(|err| cfg_err(path, err.to_string()))?;
        Ok(grid.sample(|x, y| e.eval(x, y, 0.0)))
    }

    pub fn build_nonlinearity(&self, grid: Grid) -> Result<Nonlinearity> {
        let Some(spec) = &self.nonlinearity else {
            return Ok(Nonlinearity::zero());
        };
        let forcing = match &spec.forcing {
            Some(src) => Some(self.sample_field(grid, src, "nonlinearity.forcing")?),
            None => None,
        };
        let need_alpha = || -> Result<f64> {
            spec.alpha
                .ok_or_else(|| cfg_err("nonlinearity.alpha", "required for this kind"))
        };
        let base = match spec.kind.as_str() {
            "zero" => BaseProfile::Zero,
            "linear" => BaseProfile::Linear {
                slope: spec
                    .slope
                    .ok_or_else(|| cfg_err("nonlinearity.slope", "required for linear"))?,
            },
            "signed_sqrt" => BaseProfile::SignedSqrt {
                coeff: spec.coeff.unwrap_or(1.0),
            },
            "restoring_sqrt" => BaseProfile::RestoringSqrt,
            "power_decay" => BaseProfile::PowerDecay {
                alpha: need_alpha()?,
            },
            "power_growth" => BaseProfile::PowerGrowth {
                alpha: need_alpha()?,
            },
            "pieces" => {
                if spec.pieces.is_empty() {
                    return Err(cfg_err("nonlinearity.pieces", "needs at least one piece"));
                }
                let mut pieces = Vec::new();
                for (i, p) in spec.pieces.iter().enumerate() {
                    let expr = Expr::parse(&p.expr).map_err(|e| {
                        cfg_err(&format!("nonlinearity.pieces[{i}].expr"), e.to_string())
                    })?;
                    pieces.push(ExprPiece {
                        from: p.from.unwrap_or(f64::NEG_INFINITY),
                        to: p.to.unwrap_or(f64::INFINITY),
                        expr,
                    });
                }
                BaseProfile::Piecewise(pieces)
            }
            other => {
                return Err(cfg_err(
                    "nonlinearity.kind",
                    format!("unknown kind `{other}`"),
                ))
            }
        };
        // piecewise evaluation needs a grid carrier for x even without forcing
        let forcing = match (&base, forcing) {
            (BaseProfile::Piecewise(_), None) => Some(GridFunction::zeros(grid)),
            (_, f) => f,
        };
        Nonlinearity::new(&spec.kind, base, forcing)
            .map_err(|e| cfg_err("nonlinearity", e.to_string()))
    }
}

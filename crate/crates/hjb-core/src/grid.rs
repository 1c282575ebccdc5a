//! Uniform grids on intervals and rectangles, grid functions with zero
//! Dirichlet boundary, discrete integrals and norms.
//!
//! A `GridFunction` stores interior nodal values only; the boundary value is
//! identically zero. Quadrature weights are trapezoid-consistent with the
//! boundary half-cells absorbed into the first/last interior node (weight
//! 3h/2 there), so constants integrate exactly to |Ω|.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Interval { length: f64 },
    Rectangle { lx: f64, ly: f64 },
}

impl Domain {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Domain::Interval { length } => length > 0.0,
            Domain::Rectangle { lx, ly } => lx > 0.0 && ly > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDomain("side lengths must be positive".into()))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }

    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { length } => length,
            Domain::Rectangle { lx, ly } => lx * ly,
        }
    }
}

/// Uniform grid with `n` interior nodes per axis; spacing `h = L/(n+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub domain: Domain,
    pub n: usize,
}

impl Grid {
    pub fn new(domain: Domain, n: usize) -> Result<Grid> {
        domain.validate()?;
        if n < 3 {
            return Err(Error::InvalidDomain(format!(
                "need at least 3 interior nodes per axis, got {n}"
            )));
        }
        Ok(Grid { domain, n })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Spacing per axis; `hy` equals `hx` on intervals.
    pub fn spacing(&self) -> (f64, f64) {
        match self.domain {
            Domain::Interval { length } => {
                let h = length / (self.n as f64 + 1.0);
                (h, h)
            }
            Domain::Rectangle { lx, ly } => (
                lx / (self.n as f64 + 1.0),
                ly / (self.n as f64 + 1.0),
            ),
        }
    }

    /// Total number of interior nodes.
    pub fn len(&self) -> usize {
        match self.domain {
            Domain::Interval { .. } => self.n,
            Domain::Rectangle { .. } => self.n * self.n,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates of interior node `idx`. The `y` component is 0 in 1D.
    /// 2D layout is x-fastest: `idx = jy * n + ix`.
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let (hx, hy) = self.spacing();
        match self.domain {
            Domain::Interval { .. } => ((idx as f64 + 1.0) * hx, 0.0),
            Domain::Rectangle { .. } => {
                let ix = idx % self.n;
                let jy = idx / self.n;
                ((ix as f64 + 1.0) * hx, (jy as f64 + 1.0) * hy)
            }
        }
    }

    /// Distance from node `idx` to the boundary.
    pub fn dist_to_boundary(&self, idx: usize) -> f64 {
        let (x, y) = self.coords(idx);
        match self.domain {
            Domain::Interval { length } => x.min(length - x),
            Domain::Rectangle { lx, ly } => x.min(lx - x).min(y).min(ly - y),
        }
    }

    /// Quadrature weight of node `idx` (3h/2 next to the boundary, h inside).
    pub fn weight(&self, idx: usize) -> f64 {
        let (hx, hy) = self.spacing();
        let w1 = |i: usize, h: f64| -> f64 {
            if i == 0 || i + 1 == self.n {
                1.5 * h
            } else {
                h
            }
        };
        match self.domain {
            Domain::Interval { .. } => w1(idx, hx),
            Domain::Rectangle { .. } => {
                let ix = idx % self.n;
                let jy = idx / self.n;
                w1(ix, hx) * w1(jy, hy)
            }
        }
    }

    /// Indices of interior nodes adjacent to the boundary.
    pub fn boundary_ring(&self) -> Vec<usize> {
        match self.domain {
            Domain::Interval { .. } => vec![0, self.n - 1],
            Domain::Rectangle { .. } => {
                let n = self.n;
                let mut out = Vec::with_capacity(4 * n);
                for idx in 0..n * n {
                    let ix = idx % n;
                    let jy = idx / n;
                    if ix == 0 || ix + 1 == n || jy == 0 || jy + 1 == n {
                        out.push(idx);
                    }
                }
                out
            }
        }
    }

    /// Sample a scalar function of (x, y) at the interior nodes.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        let values = (0..self.len())
            .map(|i| {
                let (x, y) = self.coords(i);
                f(x, y)
            })
            .collect();
        GridFunction { grid: *self, values }
    }

    /// Normalized distance-to-boundary profile (positive, deterministic).
    pub fn distance_profile(&self) -> GridFunction {
        let values = (0..self.len()).map(|i| self.dist_to_boundary(i)).collect();
        GridFunction { grid: *self, values }
    }
}

/// Nodal values of a function over the interior nodes, zero on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Sup,
    L2,
}

impl GridFunction {
    pub fn zeros(grid: Grid) -> GridFunction {
        GridFunction {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> GridFunction {
        GridFunction {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<GridFunction> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid with {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::GridMismatch("non-finite value".into()));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch("grids differ".into()))
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scale(&self, a: f64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    /// self + a * other
    pub fn add_scaled(&self, a: f64, other: &GridFunction) -> GridFunction {
        debug_assert_eq!(self.grid, other.grid);
        GridFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(u, v)| u + a * v)
                .collect(),
        }
    }

    pub fn add_const(&self, c: f64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }

    pub fn mul_pointwise(&self, other: &GridFunction) -> GridFunction {
        debug_assert_eq!(self.grid, other.grid);
        GridFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(u, v)| u * v)
                .collect(),
        }
    }

    pub fn sup_dist(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max)
    }

    pub fn le(&self, other: &GridFunction, slack: f64) -> bool {
        self.values
            .iter()
            .zip(&other.values)
            .all(|(u, v)| *u <= *v + slack)
    }
}

impl std::ops::Add for &GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: &GridFunction) -> GridFunction {
        self.add_scaled(1.0, rhs)
    }
}

impl std::ops::Sub for &GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: &GridFunction) -> GridFunction {
        self.add_scaled(-1.0, rhs)
    }
}

/// Composite quadrature of `u` over the domain.
pub fn integrate(u: &GridFunction) -> f64 {
    u.values
        .iter()
        .enumerate()
        .map(|(i, v)| u.grid.weight(i) * v)
        .sum()
}

/// Discrete L2 inner product with the quadrature weights.
pub fn dot_l2(u: &GridFunction, v: &GridFunction) -> f64 {
    debug_assert_eq!(u.grid, v.grid);
    u.values
        .iter()
        .zip(&v.values)
        .enumerate()
        .map(|(i, (a, b))| u.grid.weight(i) * a * b)
        .sum()
}

pub fn norm(u: &GridFunction, kind: NormKind) -> f64 {
    match kind {
        NormKind::Sup => u.values.iter().map(|v| v.abs()).fold(0.0, f64::max),
        NormKind::L2 => dot_l2(u, u).max(0.0).sqrt(),
    }
}

/// Minimum of `u(node)/dist(node)` over boundary-adjacent nodes. A positive
/// margin certifies `u >= delta * dist` numerically near the boundary
/// (discrete Hopf-type sign certificate).
pub fn boundary_slope_margin(u: &GridFunction) -> f64 {
    u.grid
        .boundary_ring()
        .into_iter()
        .map(|i| u.values[i] / u.grid.dist_to_boundary(i))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn interval(n: usize) -> Grid {
        Grid::new(Domain::Interval { length: 1.0 }, n).unwrap()
    }

    #[test]
    fn integrate_constant_exact() {
        let g = interval(99);
        let u = GridFunction::constant(g, 1.0);
        assert!((integrate(&u) - 1.0).abs() < 1e-12);
        let z = GridFunction::zeros(g);
        assert_eq!(integrate(&z), 0.0);
    }

    #[test]
    fn integrate_sine() {
        let g = interval(400);
        let u = g.sample(|x, _| (std::f64::consts::PI * x).sin());
        assert!((integrate(&u) - 2.0 / std::f64::consts::PI).abs() < 1e-4);
    }

    #[test]
    fn norms() {
        let g = interval(400);
        let u = g.sample(|x, _| (std::f64::consts::PI * x).sin());
        assert!((norm(&u, NormKind::L2) - (0.5f64).sqrt()).abs() < 1e-4);
        let c = GridFunction::constant(g, -3.0);
        assert_eq!(norm(&c, NormKind::Sup), 3.0);
        let z = GridFunction::zeros(g);
        assert_eq!(norm(&z, NormKind::Sup), 0.0);
        assert_eq!(norm(&z, NormKind::L2), 0.0);
    }

    #[test]
    fn slope_margin_signs() {
        let g = interval(200);
        let u = g.sample(|x, _| (std::f64::consts::PI * x).sin());
        let m = boundary_slope_margin(&u);
        assert!(m > 0.0 && (m - std::f64::consts::PI).abs() < 0.1);
        let neg = u.scale(-1.0);
        let mn = boundary_slope_margin(&neg);
        assert!(mn < 0.0 && (mn + std::f64::consts::PI).abs() < 0.1);
        assert_eq!(boundary_slope_margin(&GridFunction::zeros(g)), 0.0);
    }

    #[test]
    fn integrate_is_linear() {
        let g = interval(57);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let amp: f64 = rng.gen_range(-1.0..1.0f64);
            let amp = amp.abs().max(0.1);
            let u = g.sample(|x, _| (3.0 * x).sin() * amp);
            let v = g.sample(|x, _| (5.0 * x).cos());
            let (a, b): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let lhs = integrate(&u.scale(a).add_scaled(b, &v));
            let rhs = a * integrate(&u) + b * integrate(&v);
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
        }
    }

    #[test]
    fn sup_dominates_l2() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = interval(83);
        for _ in 0..50 {
            let vals: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let u = GridFunction::from_values(g, vals).unwrap();
            let s = norm(&u, NormKind::Sup);
            let l2 = norm(&u, NormKind::L2);
            assert!(s + 1e-14 >= l2 / g.domain.measure().sqrt());
        }
    }

    #[test]
    fn quadrature_order_two() {
        // Richardson slope of the quadrature error for a smooth integrand
        let exact = 2.0 / std::f64::consts::PI;
        let vals: Vec<f64> = [100usize, 200, 400]
            .iter()
            .map(|&n| {
                let g = interval(n);
                integrate(&g.sample(|x, _| (std::f64::consts::PI * x).sin()))
            })
            .collect();
        let e0 = (vals[0] - exact).abs();
        let e1 = (vals[1] - exact).abs();
        let slope = (e0 / e1).log2();
        assert!(slope >= 1.9, "quadrature order {slope}");
    }

    #[test]
    fn rectangle_basics() {
        let g = Grid::new(Domain::Rectangle { lx: 2.0, ly: 1.0 }, 20).unwrap();
        assert_eq!(g.len(), 400);
        let one = GridFunction::constant(g, 1.0);
        assert!((integrate(&one) - 2.0).abs() < 1e-12);
        let (hx, hy) = g.spacing();
        assert!((hx - 2.0 / 21.0).abs() < 1e-15);
        assert!((hy - 1.0 / 21.0).abs() < 1e-15);
        // corner-ish node distance
        assert!((g.dist_to_boundary(0) - hy.min(hx)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(Domain::Interval { length: 0.0 }, 10).is_err());
        assert!(Grid::new(Domain::Interval { length: 1.0 }, 2).is_err());
        let g = interval(5);
        assert!(GridFunction::from_values(g, vec![0.0; 4]).is_err());
        assert!(GridFunction::from_values(g, vec![f64::NAN; 5]).is_err());
    }
}

//! 1D uniform mesh on an interval, nodal functions, cell-centered gradients
//! and midpoint quadrature.
//!
//! Every integral in the crate goes through [`CellField::integrate`], a
//! midpoint rule with a fixed left-to-right summation order so results are
//! reproducible bit for bit.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GridError {
    #[error("invalid bounds: need b > a, got a={a}, b={b}")]
    InvalidBounds { a: f64, b: f64 },
    #[error("need at least 2 cells, got {0}")]
    TooFewCells(usize),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("boundary values must be exactly zero, got ({left}, {right})")]
    NotDirichlet { left: f64, right: f64 },
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("operation requires a zero-trace (Dirichlet) function")]
    DirichletRequired,
}

/// Uniform mesh on (a, b) with `n_cells` cells. Nodes and cell centers are
/// recomputed from `(a, b, n_cells)` so coordinates are exactly reproducible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    a: f64,
    b: f64,
    n_cells: usize,
}

impl Grid {
    pub fn uniform(a: f64, b: f64, n_cells: usize) -> Result<Grid, GridError> {
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(GridError::InvalidBounds { a, b });
        }
        if n_cells < 2 {
            return Err(GridError::TooFewCells(n_cells));
        }
        Ok(Grid { a, b, n_cells })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    /// Cell width h = (b - a) / n_cells.
    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n_cells as f64
    }

    /// Coordinate of node i, for i in 0..=n_cells.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i <= self.n_cells);
        if i == self.n_cells {
            self.b
        } else {
            self.a + i as f64 * self.h()
        }
    }

    /// Coordinate of the center of cell i, for i in 0..n_cells.
    pub fn center(&self, i: usize) -> f64 {
        debug_assert!(i < self.n_cells);
        self.a + (i as f64 + 0.5) * self.h()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(move |i| self.node(i))
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_cells).map(move |i| self.center(i))
    }
}

/// Scalar samples at cell centers: gradient values, exponent samples,
/// integrands.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    grid: Grid,
    values: Vec<f64>,
}

impl CellField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<CellField, GridError> {
        if values.len() != grid.n_cells() {
            return Err(GridError::LengthMismatch {
                expected: grid.n_cells(),
                got: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(CellField { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> CellField {
        CellField {
            grid,
            values: vec![value; grid.n_cells()],
        }
    }

    /// Sample a function at cell centers.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64) -> f64) -> Result<CellField, GridError> {
        let values: Vec<f64> = grid.centers().map(&mut f).collect();
        CellField::new(grid, values)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Midpoint quadrature: sum of values times h, accumulated left to right.
    pub fn integrate(&self) -> f64 {
        let h = self.grid.h();
        let mut acc = 0.0;
        for v in &self.values {
            acc += v * h;
        }
        acc
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> CellField {
        CellField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &CellField, f: impl Fn(f64, f64) -> f64) -> Result<CellField, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        Ok(CellField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Nodal scalar field. `dirichlet_zero` marks membership in the discrete
/// analogue of the zero-trace Sobolev space: both boundary values are
/// exactly 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
    dirichlet_zero: bool,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<GridFunction, GridError> {
        if values.len() != grid.n_nodes() {
            return Err(GridError::LengthMismatch {
                expected: grid.n_nodes(),
                got: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(GridFunction {
            grid,
            values,
            dirichlet_zero: false,
        })
    }

    /// Zero-trace function; errors unless both boundary values are exactly 0.
    pub fn dirichlet(grid: Grid, values: Vec<f64>) -> Result<GridFunction, GridError> {
        let mut f = GridFunction::new(grid, values)?;
        let left = f.values[0];
        let right = *f.values.last().unwrap();
        if left != 0.0 || right != 0.0 {
            return Err(GridError::NotDirichlet { left, right });
        }
        f.dirichlet_zero = true;
        Ok(f)
    }

    pub fn zeros(grid: Grid) -> GridFunction {
        GridFunction {
            grid,
            values: vec![0.0; grid.n_nodes()],
            dirichlet_zero: true,
        }
    }

    /// Sample a function at the nodes (no trace constraint).
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64) -> f64) -> Result<GridFunction, GridError> {
        let values: Vec<f64> = grid.nodes().map(&mut f).collect();
        GridFunction::new(grid, values)
    }

    /// Sample at nodes and pin the boundary values to exactly 0.
    pub fn dirichlet_from_fn(
        grid: Grid,
        mut f: impl FnMut(f64) -> f64,
    ) -> Result<GridFunction, GridError> {
        let mut values: Vec<f64> = grid.nodes().map(&mut f).collect();
        values[0] = 0.0;
        *values.last_mut().unwrap() = 0.0;
        GridFunction::dirichlet(grid, values)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_dirichlet_zero(&self) -> bool {
        self.dirichlet_zero
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Discrete derivative (u_{i+1} - u_i)/h at cell centers. Exact for
    /// affine u; exact at centers for quadratic u.
    pub fn gradient(&self) -> CellField {
        let h = self.grid.h();
        let values = self
            .values
            .windows(2)
            .map(|w| (w[1] - w[0]) / h)
            .collect();
        CellField {
            grid: self.grid,
            values,
        }
    }

    /// Collocate nodal values onto cells: (u_i + u_{i+1})/2.
    pub fn to_cells(&self) -> CellField {
        let values = self.values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        CellField {
            grid: self.grid,
            values,
        }
    }

    /// Outward-normal difference quotients at the two boundary points:
    /// ((u_0 - u_1)/h at a, (u_n - u_{n-1})/h at b). For a positive interior
    /// function with zero trace both values are negative (Hopf sign).
    pub fn boundary_outward(&self) -> Result<(f64, f64), GridError> {
        if !self.dirichlet_zero {
            return Err(GridError::DirichletRequired);
        }
        let h = self.grid.h();
        let n = self.values.len() - 1;
        let at_a = (self.values[0] - self.values[1]) / h;
        let at_b = (self.values[n] - self.values[n - 1]) / h;
        Ok((at_a, at_b))
    }

    /// Pointwise map; the Dirichlet flag survives only if f(0) == 0.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<GridFunction, GridError> {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        check_finite(&values)?;
        let dirichlet_zero =
            self.dirichlet_zero && values[0] == 0.0 && *values.last().unwrap() == 0.0;
        Ok(GridFunction {
            grid: self.grid,
            values,
            dirichlet_zero,
        })
    }

    pub fn zip_with(
        &self,
        other: &GridFunction,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<GridFunction, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        let values: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        check_finite(&values)?;
        let dirichlet_zero =
            values[0] == 0.0 && *values.last().unwrap() == 0.0 && self.dirichlet_zero
                && other.dirichlet_zero;
        Ok(GridFunction {
            grid: self.grid,
            values,
            dirichlet_zero,
        })
    }

    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV serialization: header "x,value", one row per node, 17 significant
    /// digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{:.16e},{:.16e}", self.grid.node(i), v);
        }
        out
    }
}

fn check_finite(values: &[f64]) -> Result<(), GridError> {
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(GridError::NonFinite { index, value });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn build_uniform() {
        let g = Grid::uniform(0.0, 1.0, 4).unwrap();
        assert_eq!(g.h(), 0.25);
        let centers: Vec<f64> = g.centers().collect();
        assert_eq!(centers, vec![0.125, 0.375, 0.625, 0.875]);

        let g2 = Grid::uniform(-1.0, 1.0, 2).unwrap();
        assert_eq!(g2.h(), 1.0);
        let nodes: Vec<f64> = g2.nodes().collect();
        assert_eq!(nodes, vec![-1.0, 0.0, 1.0]);

        assert!(matches!(
            Grid::uniform(0.0, 1.0, 1),
            Err(GridError::TooFewCells(1))
        ));
        assert!(matches!(
            Grid::uniform(1.0, 0.0, 4),
            Err(GridError::InvalidBounds { .. })
        ));
    }

    #[test]
    fn gradient_of_affine_and_constant() {
        let g = Grid::uniform(0.0, 1.0, 8).unwrap();
        let linear = GridFunction::from_fn(g, |x| x).unwrap();
        for v in linear.gradient().values() {
            assert_relative_eq!(*v, 1.0, max_relative = 1e-14);
        }
        let constant = GridFunction::from_fn(g, |_| 3.5).unwrap();
        for v in constant.gradient().values() {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn gradient_of_quadratic_exact_at_centers() {
        // Centered difference of x^2 across a cell equals 2 m_i exactly:
        // ((m+h/2)^2 - (m-h/2)^2)/h = 2m.
        let g = Grid::uniform(0.0, 1.0, 4).unwrap();
        let u = GridFunction::from_fn(g, |x| x * x).unwrap();
        let grad = u.gradient();
        let expected = [0.25, 0.75, 1.25, 1.75];
        for (v, e) in grad.values().iter().zip(expected) {
            assert_relative_eq!(*v, e, max_relative = 1e-14);
        }
    }

    #[test]
    fn integrate_midpoint() {
        let g = Grid::uniform(0.0, 1.0, 10).unwrap();
        assert_relative_eq!(CellField::constant(g, 1.0).integrate(), 1.0, epsilon = 1e-15);
        // Midpoint is exact for linear integrands.
        let linear = CellField::from_fn(g, |m| m).unwrap();
        assert_relative_eq!(linear.integrate(), 0.5, epsilon = 1e-15);
        // Hand-computed midpoint sum of m_i^2 on (0,1,4).
        let g4 = Grid::uniform(0.0, 1.0, 4).unwrap();
        let quad = CellField::from_fn(g4, |m| m * m).unwrap();
        assert_relative_eq!(quad.integrate(), 0.328125, epsilon = 1e-15);
    }

    #[test]
    fn nodes_to_cells() {
        let g = Grid::uniform(0.0, 1.0, 2).unwrap();
        let constant = GridFunction::from_fn(g, |_| 3.0).unwrap();
        assert_eq!(constant.to_cells().values(), &[3.0, 3.0]);

        let linear = GridFunction::from_fn(g, |x| x).unwrap();
        assert_eq!(linear.to_cells().values(), &[0.25, 0.75]);

        let hat = GridFunction::dirichlet(g, vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(hat.to_cells().values(), &[0.5, 0.5]);
    }

    #[test]
    fn boundary_outward_derivatives() {
        let g = Grid::uniform(0.0, 1.0, 64).unwrap();
        let h = g.h();

        let parabola = GridFunction::dirichlet_from_fn(g, |x| x * (1.0 - x)).unwrap();
        let (da, db) = parabola.boundary_outward().unwrap();
        // d/dx x(1-x) at 0 is 1, so the outward value is -1 up to O(h).
        assert!((da + 1.0).abs() <= 1.5 * h, "da = {da}");
        assert!((db + 1.0).abs() <= 1.5 * h, "db = {db}");

        let zero = GridFunction::zeros(g);
        assert_eq!(zero.boundary_outward().unwrap(), (0.0, 0.0));

        let sine = GridFunction::dirichlet_from_fn(g, |x| (std::f64::consts::PI * x).sin()).unwrap();
        let (sa, sb) = sine.boundary_outward().unwrap();
        assert!((sa + std::f64::consts::PI).abs() < 1e-2, "sa = {sa}");
        assert!((sb + std::f64::consts::PI).abs() < 1e-2, "sb = {sb}");

        let free = GridFunction::from_fn(g, |x| x).unwrap();
        assert!(matches!(
            free.boundary_outward(),
            Err(GridError::DirichletRequired)
        ));
    }

    #[test]
    fn dirichlet_constructor_checks_trace() {
        let g = Grid::uniform(0.0, 1.0, 2).unwrap();
        assert!(matches!(
            GridFunction::dirichlet(g, vec![0.1, 1.0, 0.0]),
            Err(GridError::NotDirichlet { .. })
        ));
        assert!(matches!(
            GridFunction::new(g, vec![0.0, f64::NAN, 0.0]),
            Err(GridError::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn csv_round_trip_digits() {
        let g = Grid::uniform(0.0, 1.0, 2).unwrap();
        let u = GridFunction::from_fn(g, |x| 1.0 / 3.0 + x).unwrap();
        let csv = u.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "x,value");
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        let parsed: f64 = first[1].parse().unwrap();
        assert_eq!(parsed, 1.0 / 3.0);
    }

    proptest! {
        // integrate(gradient(u)) telescopes to u_n - u_0 for any u.
        #[test]
        fn gradient_telescopes(values in proptest::collection::vec(-10.0f64..10.0, 5..40)) {
            let grid = Grid::uniform(0.0, 2.0, values.len() - 1).unwrap();
            let u = GridFunction::new(grid, values.clone()).unwrap();
            let total = u.gradient().integrate();
            let expected = values.last().unwrap() - values[0];
            prop_assert!((total - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
        }

        // gradient is linear in its argument.
        #[test]
        fn gradient_is_linear(
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            u in proptest::collection::vec(-5.0f64..5.0, 9),
            v in proptest::collection::vec(-5.0f64..5.0, 9),
        ) {
            let grid = Grid::uniform(-1.0, 1.0, 8).unwrap();
            let uf = GridFunction::new(grid, u.clone()).unwrap();
            let vf = GridFunction::new(grid, v.clone()).unwrap();
            let combo = uf.zip_with(&vf, |x, y| a * x + b * y).unwrap();
            let lhs = combo.gradient();
            let rhs = uf.gradient().zip_with(&vf.gradient(), |x, y| a * x + b * y).unwrap();
            for (l, r) in lhs.values().iter().zip(rhs.values()) {
                prop_assert!((l - r).abs() <= 1e-10 * (1.0 + r.abs()));
            }
        }
    }
}

//! Variable-exponent Lebesgue machinery: modulars, Luxemburg norms,
//! norm-modular inequalities and the generalized Hölder inequality.
//!
//! The modular is ρ_p(u) = ∫ |u|^{p(x)} dx with p sampled at cell centers.
//! The Luxemburg norm inf{σ > 0 : ρ_p(u/σ) ≤ 1} is computed by bisection on
//! the strictly decreasing map σ ↦ ρ_p(u/σ) (strict decrease holds because
//! p_- > 1).

use serde::Serialize;
use thiserror::Error;

use crate::grid::{CellField, Grid, GridError};

/// Bisection tolerance on the modular residual |ρ_p(u/σ) - 1|.
pub const LUXEMBURG_TOL: f64 = 1e-12;
const LUXEMBURG_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum VxError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("exponent out of range at cell {index}: p = {value}, need 1 < p < inf")]
    ExponentOutOfRange { index: usize, value: f64 },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// The variable exponent p sampled at cell centers, with its extrema
/// p_- = min p and p_+ = max p. The invariant 1 < p_- <= p(x) <= p_+ < inf is
/// checked at construction. The same type carries every exponent field in
/// the crate (p, q, s, the anisotropic p_i, conjugates).
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentField {
    cells: CellField,
    p_minus: f64,
    p_plus: f64,
}

impl ExponentField {
    pub fn from_cells(cells: CellField) -> Result<ExponentField, VxError> {
        for (index, &value) in cells.values().iter().enumerate() {
            if !(value > 1.0) || !value.is_finite() {
                return Err(VxError::ExponentOutOfRange { index, value });
            }
        }
        let p_minus = cells.min();
        let p_plus = cells.max();
        Ok(ExponentField {
            cells,
            p_minus,
            p_plus,
        })
    }

    pub fn from_fn(grid: Grid, f: impl FnMut(f64) -> f64) -> Result<ExponentField, VxError> {
        ExponentField::from_cells(CellField::from_fn(grid, f)?)
    }

    pub fn constant(grid: Grid, p: f64) -> Result<ExponentField, VxError> {
        ExponentField::from_cells(CellField::constant(grid, p))
    }

    pub fn grid(&self) -> Grid {
        self.cells.grid()
    }

    pub fn cells(&self) -> &CellField {
        &self.cells
    }

    /// Sample at cell index i.
    pub fn at(&self, i: usize) -> f64 {
        self.cells.values()[i]
    }

    /// Sample at a coordinate by nearest cell center. Kernels and probes use
    /// this so that both sides of an identity see the same exponent value.
    pub fn at_x(&self, x: f64) -> f64 {
        let grid = self.grid();
        let raw = ((x - grid.a()) / grid.h()).floor() as isize;
        let i = raw.clamp(0, grid.n_cells() as isize - 1) as usize;
        self.at(i)
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    /// Conjugate exponent field p_c(x) = p(x)/(p(x) - 1).
    pub fn conjugate(&self) -> ExponentField {
        let cells = self.cells.map(|p| p / (p - 1.0));
        // p > 1 maps to p_c > 1, so the invariant cannot break.
        ExponentField::from_cells(cells).expect("conjugate of an admissible exponent is admissible")
    }
}

/// Modular ρ_p(u) = ∫ |u|^{p(x)} dx. Nonnegative; zero iff u vanishes.
pub fn modular(u: &CellField, p: &ExponentField) -> Result<f64, VxError> {
    if u.grid() != p.grid() {
        return Err(VxError::Grid(GridError::GridMismatch));
    }
    let integrand = u.zip_with(p.cells(), |v, pe| v.abs().powf(pe))?;
    Ok(integrand.integrate())
}

fn modular_scaled(u: &CellField, p: &ExponentField, sigma: f64) -> f64 {
    // Unchecked fast path for the bisection; grids already validated.
    let h = u.grid().h();
    let mut acc = 0.0;
    for (v, pe) in u.values().iter().zip(p.cells().values()) {
        acc += (v.abs() / sigma).powf(*pe) * h;
    }
    acc
}

/// Luxemburg norm inf{σ > 0 : ρ_p(u/σ) ≤ 1}, by bisection from a
/// doubling/halving bracket around σ = 1. Returns 0 for u = 0; otherwise the
/// result σ* satisfies |ρ_p(u/σ*) - 1| ≤ tol.
pub fn luxemburg_norm(u: &CellField, p: &ExponentField, tol: f64) -> Result<f64, VxError> {
    if u.grid() != p.grid() {
        return Err(VxError::Grid(GridError::GridMismatch));
    }
    if !(tol > 0.0) {
        return Err(VxError::BadTolerance(tol));
    }
    if u.values().iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }

    // The map σ ↦ ρ_p(u/σ) is continuous, strictly decreasing, → ∞ as σ → 0+
    // and → 0 as σ → ∞, so a root bracket always exists.
    let mut lo = 1.0;
    let mut hi = 1.0;
    if modular_scaled(u, p, 1.0) > 1.0 {
        while modular_scaled(u, p, hi) > 1.0 {
            hi *= 2.0;
        }
        lo = hi / 2.0;
    } else {
        while modular_scaled(u, p, lo) <= 1.0 && lo > f64::MIN_POSITIVE {
            lo /= 2.0;
        }
        hi = lo * 2.0;
    }

    let mut mid = 0.5 * (lo + hi);
    for _ in 0..LUXEMBURG_MAX_ITER {
        mid = 0.5 * (lo + hi);
        let rho = modular_scaled(u, p, mid);
        if (rho - 1.0).abs() <= tol {
            return Ok(mid);
        }
        if rho > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Generic serialized shape of a single inequality check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub holds: bool,
}

/// Both norm-modular chains evaluated on one function: for ‖u‖ ≥ 1,
/// ‖u‖^{p_-} ≤ ρ_p(u) ≤ ‖u‖^{p_+}, with the exponents swapped when ‖u‖ ≤ 1.
#[derive(Debug, Clone, Serialize)]
pub struct NormModularReport {
    pub norm: f64,
    pub modular: f64,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
}

impl NormModularReport {
    pub fn to_checks(&self) -> [CheckReport; 2] {
        [
            CheckReport {
                name: "norm_modular_lower".into(),
                lhs: self.lower,
                rhs: self.modular,
                constant: 1.0,
                holds: self.holds,
            },
            CheckReport {
                name: "norm_modular_upper".into(),
                lhs: self.modular,
                rhs: self.upper,
                constant: 1.0,
                holds: self.holds,
            },
        ]
    }
}

/// Evaluate the norm-modular inequality chains with slack 1e-9 (1 + ρ_p(u)).
pub fn check_norm_modular_bounds(
    u: &CellField,
    p: &ExponentField,
) -> Result<NormModularReport, VxError> {
    let norm = luxemburg_norm(u, p, LUXEMBURG_TOL)?;
    let rho = modular(u, p)?;
    let (lower, upper) = if norm >= 1.0 {
        (norm.powf(p.p_minus()), norm.powf(p.p_plus()))
    } else {
        (norm.powf(p.p_plus()), norm.powf(p.p_minus()))
    };
    let slack = 1e-9 * (1.0 + rho);
    let holds = lower <= rho + slack && rho <= upper + slack;
    Ok(NormModularReport {
        norm,
        modular: rho,
        lower,
        upper,
        holds,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderReport {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub holds: bool,
}

impl HolderReport {
    pub fn to_check(&self) -> CheckReport {
        CheckReport {
            name: "generalized_holder".into(),
            lhs: self.lhs,
            rhs: self.rhs,
            constant: self.constant,
            holds: self.holds,
        }
    }
}

/// Generalized Hölder inequality ∫|fg| ≤ C ‖f‖_{L^{p(x)}} ‖g‖_{L^{p_c(x)}}
/// with the classical Orlicz constant C = 1/p_- + 1/(p_c)_- in [1, 2].
pub fn holder_check(f: &CellField, g: &CellField, p: &ExponentField) -> Result<HolderReport, VxError> {
    let product = f.zip_with(g, |a, b| (a * b).abs())?;
    let lhs = product.integrate();
    let pc = p.conjugate();
    let constant = 1.0 / p.p_minus() + 1.0 / pc.p_minus();
    let rhs = constant * luxemburg_norm(f, p, LUXEMBURG_TOL)? * luxemburg_norm(g, &pc, LUXEMBURG_TOL)?;
    let holds = lhs <= rhs + 1e-9 * (1.0 + rhs);
    Ok(HolderReport {
        lhs,
        rhs,
        constant,
        holds,
    })
}

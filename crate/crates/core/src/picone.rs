//! Numerical verification of the pointwise and integral inequalities behind
//! the variable-exponent comparison machinery: the generalized Picone
//! inequality for a p(x)-homogeneous kernel, its p(x)-Laplacian pair form,
//! the symmetrized integral (Diaz-Saa) form, and the anisotropic sum form.
//!
//! Composite functions such as v^{1/r} or v/v0^{(r-1)/r} are formed at the
//! nodes and then differentiated. Discrete differentiation does not satisfy
//! the chain rule exactly, so near equality configurations the per-cell gap
//! can dip below zero at O(h^2); [`GapTol`] carries both the relative floor
//! and an optional h^2 coefficient calibrated by grid refinement.

use serde::Serialize;
use thiserror::Error;

use crate::grid::{GridError, GridFunction};
use crate::opkernel::{AnisoKernel, OperatorKernel};
use crate::vxspace::ExponentField;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PiconeError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("r = {r} outside the admissible range [1, p_-] = [1, {p_minus}]")]
    HomogeneityOrder { r: f64, p_minus: f64 },
    #[error("floor must be positive, got {0}")]
    BadFloor(f64),
    #[error("{name} must be nonnegative; node {index} holds {value}")]
    NegativeInput {
        name: &'static str,
        index: usize,
        value: f64,
    },
    #[error("{name} falls below the floor {floor} at interior node {index}: {value}")]
    BelowFloor {
        name: &'static str,
        index: usize,
        value: f64,
        floor: f64,
    },
    #[error("zero trace required for {0}")]
    DirichletRequired(&'static str),
    #[error("component count mismatch: {kernels} kernels vs {fields} field pairs")]
    ComponentMismatch { kernels: usize, fields: usize },
}

/// Tolerance model for per-cell gap verdicts: a cell violates the inequality
/// when gap < -max(rel_floor (1 + |rhs|), h2_coeff h^2).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapTol {
    pub rel_floor: f64,
    pub h2_coeff: f64,
}

impl Default for GapTol {
    fn default() -> Self {
        GapTol {
            rel_floor: 1e-9,
            h2_coeff: 0.0,
        }
    }
}

impl GapTol {
    fn cell_tol(&self, rhs: f64, h: f64) -> f64 {
        (self.rel_floor * (1.0 + rhs.abs())).max(self.h2_coeff * h * h)
    }
}

/// Outcome of a per-cell inequality sweep.
#[derive(Debug, Clone, Serialize)]
pub struct PiconeReport {
    /// Most negative rhs - lhs over cells.
    pub min_gap: f64,
    /// Cells whose gap falls below -tol.
    pub violating_cells: Vec<usize>,
    /// Cells with |gap| <= tol (equality within tolerance).
    pub equality_cells: Vec<usize>,
    pub tol: GapTol,
    #[serde(skip)]
    pub gaps: Vec<f64>,
}

impl PiconeReport {
    pub fn verified(&self) -> bool {
        self.violating_cells.is_empty()
    }

    fn from_gaps(gaps: Vec<f64>, rhs_scale: &[f64], h: f64, tol: GapTol) -> PiconeReport {
        let mut min_gap = f64::INFINITY;
        let mut violating_cells = Vec::new();
        let mut equality_cells = Vec::new();
        for (i, &gap) in gaps.iter().enumerate() {
            min_gap = min_gap.min(gap);
            let cell_tol = tol.cell_tol(rhs_scale[i], h);
            if gap < -cell_tol {
                violating_cells.push(i);
            } else if gap.abs() <= cell_tol {
                equality_cells.push(i);
            }
        }
        PiconeReport {
            min_gap,
            violating_cells,
            equality_cells,
            tol,
            gaps,
        }
    }
}

fn check_order(r: f64, p_minus: f64) -> Result<(), PiconeError> {
    if !(1.0 <= r && r <= p_minus + 1e-12) {
        return Err(PiconeError::HomogeneityOrder { r, p_minus });
    }
    Ok(())
}

fn check_nonnegative(u: &GridFunction, name: &'static str) -> Result<(), PiconeError> {
    for (index, &value) in u.values().iter().enumerate() {
        if value < 0.0 {
            return Err(PiconeError::NegativeInput { name, index, value });
        }
    }
    Ok(())
}

fn check_floor_interior(
    u: &GridFunction,
    floor: f64,
    name: &'static str,
) -> Result<(), PiconeError> {
    if !(floor > 0.0) {
        return Err(PiconeError::BadFloor(floor));
    }
    let n = u.values().len();
    for (index, &value) in u.values().iter().enumerate().take(n - 1).skip(1) {
        if value < floor {
            return Err(PiconeError::BelowFloor {
                name,
                index,
                value,
                floor,
            });
        }
    }
    Ok(())
}

/// num / den^{e}, with the zero-trace continuum limit 0 where the denominator
/// sits below the floor (only the boundary nodes may, by precondition). For
/// e = 0 the denominator drops out entirely.
fn guarded_ratio(num: f64, den: f64, e: f64, floor: f64) -> f64 {
    if e == 0.0 {
        num
    } else if den >= floor {
        num / den.powf(e)
    } else {
        0.0
    }
}

/// Per-cell gap of the generalized Picone inequality
/// (1/p) ∂_ξA(x, ∇v0^{1/r}) ∇(v / v0^{(r-1)/r})
///   <= A^{r/p}(x, ∇v^{1/r}) A^{(p-r)/p}(x, ∇v0^{1/r}).
pub fn picone_gap(
    kernel: &OperatorKernel,
    v: &GridFunction,
    v0: &GridFunction,
    r: f64,
    floor: f64,
    tol: GapTol,
) -> Result<PiconeReport, PiconeError> {
    let p = kernel.exponent();
    let grid = v.grid();
    if grid != v0.grid() || grid != p.grid() {
        return Err(GridError::GridMismatch.into());
    }
    check_order(r, p.p_minus())?;
    check_nonnegative(v, "v")?;
    check_floor_interior(v0, floor, "v0")?;

    let v_root = v.map(|t| t.powf(1.0 / r))?;
    let v0_root = v0.map(|t| t.powf(1.0 / r))?;
    let ratio = v.zip_with(v0, |num, den| {
        guarded_ratio(num, den, (r - 1.0) / r, floor)
    })?;

    let gv = v_root.gradient();
    let g0 = v0_root.gradient();
    let gr = ratio.gradient();

    let n = grid.n_cells();
    let mut gaps = Vec::with_capacity(n);
    let mut rhs_scale = Vec::with_capacity(n);
    for i in 0..n {
        let x = grid.center(i);
        let pe = p.at(i);
        let lhs = kernel.grad(x, g0.values()[i]) * gr.values()[i] / pe;
        let a_v = kernel.eval(x, gv.values()[i]);
        let a_v0 = kernel.eval(x, g0.values()[i]);
        let rhs = a_v.powf(r / pe) * a_v0.powf((pe - r) / pe);
        gaps.push(rhs - lhs);
        rhs_scale.push(rhs);
    }
    Ok(PiconeReport::from_gaps(gaps, &rhs_scale, grid.h(), tol))
}

/// Per-cell gap of the p(x)-Laplacian pair inequality
/// |∇u|^p + |∇v|^p >= |∇v|^{p-2}∇v ∇(u^r/v^{r-1}) + |∇u|^{p-2}∇u ∇(v^r/u^{r-1}).
pub fn picone_plap_pair_gap(
    u: &GridFunction,
    v: &GridFunction,
    r: f64,
    p: &ExponentField,
    floor: f64,
    tol: GapTol,
) -> Result<PiconeReport, PiconeError> {
    let grid = u.grid();
    if grid != v.grid() || grid != p.grid() {
        return Err(GridError::GridMismatch.into());
    }
    check_order(r, p.p_minus())?;
    check_floor_interior(u, floor, "u")?;
    check_floor_interior(v, floor, "v")?;

    let uv = u.zip_with(v, |nu, de| guarded_ratio(nu.powf(r), de, r - 1.0, floor))?;
    let vu = v.zip_with(u, |nu, de| guarded_ratio(nu.powf(r), de, r - 1.0, floor))?;

    let gu = u.gradient();
    let gv = v.gradient();
    let guv = uv.gradient();
    let gvu = vu.gradient();

    let n = grid.n_cells();
    let mut gaps = Vec::with_capacity(n);
    let mut rhs_scale = Vec::with_capacity(n);
    for i in 0..n {
        let pe = p.at(i);
        let du = gu.values()[i];
        let dv = gv.values()[i];
        let plap = |g: f64| {
            if g == 0.0 {
                0.0
            } else {
                g.abs().powf(pe - 2.0) * g
            }
        };
        let lhs = du.abs().powf(pe) + dv.abs().powf(pe);
        let cross = plap(dv) * guv.values()[i] + plap(du) * gvu.values()[i];
        gaps.push(lhs - cross);
        rhs_scale.push(lhs);
    }
    Ok(PiconeReport::from_gaps(gaps, &rhs_scale, grid.h(), tol))
}

/// Weak symmetrized (Diaz-Saa) integral
/// I = ∫ a(x,∇w1) ∇((w1^r - w2^r)/w1^{r-1}) + a(x,∇w2) ∇((w2^r - w1^r)/w2^{r-1}) dx.
/// Symmetric in (w1, w2) by construction, bit for bit.
pub fn diaz_saa_integral(
    kernel: &OperatorKernel,
    w1: &GridFunction,
    w2: &GridFunction,
    r: f64,
    floor: f64,
) -> Result<f64, PiconeError> {
    let p = kernel.exponent();
    let grid = w1.grid();
    if grid != w2.grid() || grid != p.grid() {
        return Err(GridError::GridMismatch.into());
    }
    check_order(r, p.p_minus())?;
    if !w1.is_dirichlet_zero() {
        return Err(PiconeError::DirichletRequired("w1"));
    }
    if !w2.is_dirichlet_zero() {
        return Err(PiconeError::DirichletRequired("w2"));
    }
    check_floor_interior(w1, floor, "w1")?;
    check_floor_interior(w2, floor, "w2")?;

    let phi = w1.zip_with(w2, |a, b| {
        guarded_ratio(a.powf(r) - b.powf(r), a, r - 1.0, floor)
    })?;
    let psi = w2.zip_with(w1, |a, b| {
        guarded_ratio(a.powf(r) - b.powf(r), a, r - 1.0, floor)
    })?;

    let g1 = w1.gradient();
    let g2 = w2.gradient();
    let gphi = phi.gradient();
    let gpsi = psi.gradient();

    let h = grid.h();
    let mut acc = 0.0;
    for i in 0..grid.n_cells() {
        let x = grid.center(i);
        let term = kernel.flux(x, g1.values()[i]) * gphi.values()[i]
            + kernel.flux(x, g2.values()[i]) * gpsi.values()[i];
        acc += term * h;
    }
    Ok(acc)
}

/// Summed per-cell gap of the anisotropic Picone inequality: each coordinate
/// direction contributes its own kernel applied to its own 1D gradients.
pub fn aniso_picone_gap(
    kernel: &AnisoKernel,
    v: &[GridFunction],
    v0: &[GridFunction],
    r: f64,
    floor: f64,
    tol: GapTol,
) -> Result<PiconeReport, PiconeError> {
    if kernel.components.len() != v.len() || v.len() != v0.len() {
        return Err(PiconeError::ComponentMismatch {
            kernels: kernel.components.len(),
            fields: v.len().min(v0.len()),
        });
    }
    check_order(r, kernel.min_p_minus())?;
    let grid = v[0].grid();
    let n = grid.n_cells();
    let mut lhs_sum = vec![0.0; n];
    let mut rhs_sum = vec![0.0; n];

    for ((component, vi), v0i) in kernel.components.iter().zip(v).zip(v0) {
        let p = component.exponent();
        if vi.grid() != grid || v0i.grid() != grid || p.grid() != grid {
            return Err(GridError::GridMismatch.into());
        }
        check_nonnegative(vi, "v")?;
        check_floor_interior(v0i, floor, "v0")?;

        let v_root = vi.map(|t| t.powf(1.0 / r))?;
        let v0_root = v0i.map(|t| t.powf(1.0 / r))?;
        let ratio = vi.zip_with(v0i, |num, den| {
            guarded_ratio(num, den, (r - 1.0) / r, floor)
        })?;
        let gv = v_root.gradient();
        let g0 = v0_root.gradient();
        let gr = ratio.gradient();
        for i in 0..n {
            let x = grid.center(i);
            let pe = p.at(i);
            lhs_sum[i] += component.grad(x, g0.values()[i]) * gr.values()[i] / pe;
            let a_v = component.eval(x, gv.values()[i]);
            let a_v0 = component.eval(x, g0.values()[i]);
            rhs_sum[i] += a_v.powf(r / pe) * a_v0.powf((pe - r) / pe);
        }
    }

    let gaps: Vec<f64> = rhs_sum
        .iter()
        .zip(&lhs_sum)
        .map(|(rhs, lhs)| rhs - lhs)
        .collect();
    Ok(PiconeReport::from_gaps(gaps, &rhs_sum, grid.h(), tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::synth::Synth;
    use crate::vxspace::ExponentField;

    fn plap_kernel(grid: Grid, p_fn: impl FnMut(f64) -> f64) -> OperatorKernel {
        OperatorKernel::p_laplacian(ExponentField::from_fn(grid, p_fn).unwrap())
    }

    #[test]
    fn equality_when_v_equals_v0() {
        let grid = Grid::uniform(0.0, 1.0, 128).unwrap();
        let kernel = plap_kernel(grid, |x| 2.0 + x);
        let v0 = GridFunction::from_fn(grid, |x| x * (1.0 - x) + 0.1).unwrap();
        let report = picone_gap(&kernel, &v0, &v0, 1.0, 1e-8, GapTol::default()).unwrap();
        assert!(report.gaps.iter().all(|g| g.abs() <= 1e-12));
        assert!(report.verified());
    }

    #[test]
    fn ray_case_is_equality() {
        // v = 3 v0 with r = 1 reduces both sides to 3 A(x, ∇v0).
        let grid = Grid::uniform(0.0, 1.0, 256).unwrap();
        let kernel = plap_kernel(grid, |x| 2.0 + x);
        let v0 = GridFunction::from_fn(grid, |x| (2.0 * x).sin().abs() + 0.2).unwrap();
        let v = v0.map(|t| 3.0 * t).unwrap();
        let report = picone_gap(&kernel, &v, &v0, 1.0, 1e-8, GapTol::default()).unwrap();
        let max_abs = report.gaps.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        assert!(max_abs <= 1e-10, "max |gap| = {max_abs}");
    }

    #[test]
    fn strict_gap_on_nonconstant_ratio() {
        let grid = Grid::uniform(0.0, 1.0, 512).unwrap();
        let kernel = plap_kernel(grid, |x| 2.5 + 0.3 * (2.0 * x).sin());
        let v = GridFunction::dirichlet_from_fn(grid, |x| x * (1.0 - x)).unwrap();
        let v0 = GridFunction::from_fn(grid, |x| x * (1.0 - x) + 0.1).unwrap();
        let report = picone_gap(&kernel, &v, &v0, 2.0, 1e-8, GapTol::default()).unwrap();
        assert!(report.min_gap >= -1e-10, "min gap {}", report.min_gap);
        // Strict positivity where the ratio actually varies.
        let ratio = v
            .zip_with(&v0, |a, b| a / b)
            .unwrap();
        let g_ratio = ratio.gradient();
        for (i, g) in g_ratio.values().iter().enumerate() {
            if g.abs() > 0.1 {
                assert!(report.gaps[i] > 0.0, "cell {i}: gap {}", report.gaps[i]);
            }
        }
    }

    #[test]
    fn exact_ray_and_near_ray_perturbations() {
        // Scalar multiples are algebraically exact composites, so the gap on
        // a ray vanishes to rounding even for r > 1; tiny off-ray
        // perturbations produce rounding-scale negative gaps that the
        // default relative floor absorbs.
        let grid = Grid::uniform(0.0, 1.0, 512).unwrap();
        let p = ExponentField::from_fn(grid, |x| 2.3 + 0.4 * x).unwrap();
        let kernel = OperatorKernel::p_laplacian(p);
        let v0 = GridFunction::from_fn(grid, |x| 0.5 + 0.3 * (2.0 * x).sin()).unwrap();

        let ray = v0.map(|s| 2.0 * s).unwrap();
        let report = picone_gap(&kernel, &ray, &v0, 2.0, 1e-8, GapTol::default()).unwrap();
        let max_abs = report.gaps.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        assert!(max_abs <= 1e-12, "ray gap {max_abs}");

        for eps in [1e-5, 1e-7] {
            let v = v0
                .zip_with(
                    &GridFunction::from_fn(grid, |x| (13.0 * x).sin()).unwrap(),
                    |base, osc| base * (2.0 + eps * osc),
                )
                .unwrap();
            let report = picone_gap(&kernel, &v, &v0, 2.0, 1e-8, GapTol::default()).unwrap();
            assert!(
                report.verified(),
                "eps {eps}: min gap {} flagged {} cells",
                report.min_gap,
                report.violating_cells.len()
            );
        }
    }

    #[test]
    fn r_equal_one_is_exact_even_with_zero_trace_v0() {
        // For r = 1 the composites are v and v0 themselves, so the per-cell
        // inequality is pure convexity of the kernel with no chain-rule
        // error, including the boundary cells of a zero-trace v0.
        let grid = Grid::uniform(0.0, 1.0, 64).unwrap();
        let kernel = plap_kernel(grid, |x| 1.9 + 0.6 * x);
        let v = GridFunction::from_fn(grid, |x| 0.3 + (3.0 * x).cos().abs()).unwrap();
        let v0 = GridFunction::dirichlet_from_fn(grid, |x| x * (1.0 - x)).unwrap();
        let report = picone_gap(&kernel, &v, &v0, 1.0, 1e-8, GapTol::default()).unwrap();
        assert!(
            report.min_gap >= -1e-12,
            "min gap {} should be nonnegative",
            report.min_gap
        );
    }

    #[test]
    fn preconditions_are_enforced() {
        let grid = Grid::uniform(0.0, 1.0, 16).unwrap();
        let kernel = plap_kernel(grid, |_| 2.0);
        let ok = GridFunction::from_fn(grid, |_| 1.0).unwrap();
        let negative = GridFunction::from_fn(grid, |x| x - 0.5).unwrap();
        assert!(matches!(
            picone_gap(&kernel, &negative, &ok, 1.0, 1e-8, GapTol::default()),
            Err(PiconeError::NegativeInput { .. })
        ));
        let below = GridFunction::from_fn(grid, |_| 1e-12).unwrap();
        assert!(matches!(
            picone_gap(&kernel, &ok, &below, 1.0, 1e-8, GapTol::default()),
            Err(PiconeError::BelowFloor { .. })
        ));
        assert!(matches!(
            picone_gap(&kernel, &ok, &ok, 3.5, 1e-8, GapTol::default()),
            Err(PiconeError::HomogeneityOrder { .. })
        ));
    }

    #[test]
    fn pair_gap_reduces_to_square_for_p2_r1() {
        let grid = Grid::uniform(0.0, 1.0, 64).unwrap();
        let p = ExponentField::constant(grid, 2.0).unwrap();
        let mut synth = Synth::new(31);
        for _ in 0..100 {
            let u = synth.node_field(grid, 0.2, 1.8);
            let v = synth.node_field(grid, 0.2, 1.8);
            let report = picone_plap_pair_gap(&u, &v, 1.0, &p, 1e-8, GapTol::default()).unwrap();
            let gu = u.gradient();
            let gv = v.gradient();
            for ((gap, a), b) in report.gaps.iter().zip(gu.values()).zip(gv.values()) {
                let expected = (a - b) * (a - b);
                assert!(
                    (gap - expected).abs() <= 1e-12 * (1.0 + expected),
                    "gap {gap} vs (du-dv)^2 {expected}"
                );
            }
        }
    }

    #[test]
    fn pair_gap_equality_and_random_sweep() {
        let grid = Grid::uniform(0.0, 1.0, 128).unwrap();
        let p = ExponentField::from_fn(grid, |x| 1.8 + 0.7 * x).unwrap();
        let u = GridFunction::from_fn(grid, |x| 0.5 + x * (1.0 - x)).unwrap();
        let report = picone_plap_pair_gap(&u, &u, 1.4, &p, 1e-8, GapTol::default()).unwrap();
        assert!(report.gaps.iter().all(|g| g.abs() <= 1e-12));

        let mut synth = Synth::new(77);
        for _ in 0..500 {
            let u = synth.node_field(grid, 0.3, 2.0);
            let v = synth.node_field(grid, 0.3, 2.0);
            let r = p.p_minus();
            let report = picone_plap_pair_gap(&u, &v, r, &p, 1e-8, GapTol::default()).unwrap();
            for (i, gap) in report.gaps.iter().enumerate() {
                let scale = 1.0 + report.gaps[i].abs().max(1.0);
                assert!(*gap >= -1e-9 * scale, "cell {i}: gap {gap}");
            }
        }
    }

    #[test]
    fn diaz_saa_zero_and_ray_cases() {
        let grid = Grid::uniform(0.0, 1.0, 200).unwrap();
        let p2 = ExponentField::constant(grid, 2.0).unwrap();
        let kernel = OperatorKernel::p_laplacian(p2);
        let w2 = GridFunction::dirichlet_from_fn(grid, |x| x * (1.0 - x) + 0.0).unwrap();
        assert_eq!(
            diaz_saa_integral(&kernel, &w2, &w2, 1.5, 1e-8).unwrap(),
            0.0
        );
        // w1 = 2 w2 with p = r = 2: both integrands vanish by homogeneity.
        let w1 = w2.map(|t| 2.0 * t).unwrap();
        let i = diaz_saa_integral(&kernel, &w1, &w2, 2.0, 1e-8).unwrap();
        assert!(i.abs() <= 1e-10, "I = {i}");
    }

    #[test]
    fn diaz_saa_sign_and_symmetry() {
        let grid = Grid::uniform(0.0, 1.0, 256).unwrap();
        let p = ExponentField::from_fn(grid, |x| 2.0 + x / 2.0).unwrap();
        let kernel = OperatorKernel::p_laplacian(p);
        let w1 = GridFunction::dirichlet_from_fn(grid, |x| x * (1.0 - x)).unwrap();
        let w2 =
            GridFunction::dirichlet_from_fn(grid, |x| (std::f64::consts::PI * x).sin() / 4.0)
                .unwrap();
        let i12 = diaz_saa_integral(&kernel, &w1, &w2, 1.5, 1e-8).unwrap();
        let i21 = diaz_saa_integral(&kernel, &w2, &w1, 1.5, 1e-8).unwrap();
        assert!(i12 > 0.0, "I = {i12}");
        assert_eq!(i12.to_bits(), i21.to_bits());
    }

    #[test]
    fn diaz_saa_requires_zero_trace() {
        let grid = Grid::uniform(0.0, 1.0, 32).unwrap();
        let kernel = plap_kernel(grid, |_| 2.0);
        let free = GridFunction::from_fn(grid, |_| 1.0).unwrap();
        assert!(matches!(
            diaz_saa_integral(&kernel, &free, &free, 1.0, 1e-8),
            Err(PiconeError::DirichletRequired("w1"))
        ));
    }

    #[test]
    fn aniso_single_component_matches_scalar() {
        let grid = Grid::uniform(0.0, 1.0, 128).unwrap();
        let kernel = plap_kernel(grid, |x| 2.0 + x);
        let aniso = AnisoKernel::new(vec![kernel.clone()]);
        let v = GridFunction::from_fn(grid, |x| 0.3 + x * (1.0 - x)).unwrap();
        let v0 = GridFunction::from_fn(grid, |x| 0.5 + (x - 0.3).powi(2)).unwrap();
        let scalar = picone_gap(&kernel, &v, &v0, 1.5, 1e-8, GapTol::default()).unwrap();
        let summed = aniso_picone_gap(
            &aniso,
            std::slice::from_ref(&v),
            std::slice::from_ref(&v0),
            1.5,
            1e-8,
            GapTol::default(),
        )
        .unwrap();
        for (a, b) in scalar.gaps.iter().zip(&summed.gaps) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn aniso_two_components() {
        let grid = Grid::uniform(0.0, 1.0, 96).unwrap();
        let k1 = plap_kernel(grid, |x| 2.0 + x);
        let k2 = plap_kernel(grid, |x| 3.0 - x);
        let aniso = AnisoKernel::new(vec![k1, k2]);

        // v = v0 per component: zero gap.
        let w = GridFunction::from_fn(grid, |x| 0.4 + x).unwrap();
        let report = aniso_picone_gap(
            &aniso,
            &[w.clone(), w.clone()],
            &[w.clone(), w.clone()],
            1.5,
            1e-8,
            GapTol::default(),
        )
        .unwrap();
        assert!(report.gaps.iter().all(|g| g.abs() <= 1e-11));

        // Randomized positive pairs stay nonnegative at tolerance.
        let mut synth = Synth::new(13);
        for _ in 0..100 {
            let v = [synth.node_field(grid, 0.2, 1.5), synth.node_field(grid, 0.2, 1.5)];
            let v0 = [synth.node_field(grid, 0.2, 1.5), synth.node_field(grid, 0.2, 1.5)];
            let report = aniso_picone_gap(&aniso, &v, &v0, 1.5, 1e-8, GapTol::default()).unwrap();
            for (i, gap) in report.gaps.iter().enumerate() {
                assert!(*gap >= -1e-9 * (1.0 + gap.abs()), "cell {i}: {gap}");
            }
        }

        let mismatch =
            aniso_picone_gap(&aniso, std::slice::from_ref(&w), std::slice::from_ref(&w), 1.5, 1e-8, GapTol::default());
        assert!(matches!(
            mismatch,
            Err(PiconeError::ComponentMismatch { .. })
        ));
    }

    #[test]
    fn pair_cross_term_matches_kernel_form_lhs() {
        // For the plap kernel with r = 1 the cross term of the pair form and
        // the left member of the kernel form coincide.
        let grid = Grid::uniform(0.0, 1.0, 64).unwrap();
        let p = ExponentField::from_fn(grid, |x| 2.0 + 0.5 * x).unwrap();
        let kernel = OperatorKernel::p_laplacian(p.clone());
        let mut synth = Synth::new(4242);
        let u = synth.node_field(grid, 0.3, 1.4);
        let v = synth.node_field(grid, 0.3, 1.4);

        let gu = u.gradient();
        let gv = v.gradient();
        for i in 0..grid.n_cells() {
            let x = grid.center(i);
            let pe = p.at(i);
            // Kernel-form LHS with v0 = v, r = 1 and test pair (v, u).
            let lhs = kernel.grad(x, gv.values()[i]) * gu.values()[i] / pe;
            let cross = {
                let dv = gv.values()[i];
                if dv == 0.0 {
                    0.0
                } else {
                    dv.abs().powf(pe - 2.0) * dv * gu.values()[i]
                }
            };
            assert!((lhs - cross).abs() <= 1e-12 * (1.0 + cross.abs()));
        }
    }
}

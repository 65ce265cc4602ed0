//! Discrete energy functionals and minimization solvers for the quasilinear
//! elliptic problem families: the reaction problem -Δ_{p(x)}u + l u^{s(x)-1}
//! = h u^{q(x)-1}, the implicit-Euler step problem v^{2q-1} - λΔ_{p(x)}v =
//! h0 v^{q-1} + λf(x,v), the ε-perturbed nonhomogeneous problem, the torsion
//! problem -Δ_{p(x)}w = K, and the barrier problems used to build sub- and
//! supersolutions.
//!
//! Each family defines one discrete energy; the residual is the exact
//! gradient of that energy (same quadrature), so a converged state is a
//! discrete Euler-Lagrange solution. The minimizer is first-order descent:
//! the search direction is the negative gradient preconditioned by a fixed
//! symmetric tridiagonal metric (lumped mass plus a discrete stiffness term,
//! weighted per family), step lengths start from a Barzilai-Borwein estimate
//! in that metric and are safeguarded by Armijo backtracking (factor 1/2,
//! slope 1e-4), which keeps the energy sequence monotone. Only the
//! continuous energy gradient is ever evaluated. Potentials are extended by
//! zero for negative states, so positivity of a converged solution is an
//! emergent check, not a constraint.

use serde::Serialize;
use thiserror::Error;

use crate::grid::{CellField, Grid, GridError, GridFunction};
use crate::vxspace::ExponentField;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EllipticError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("energy became NaN at iteration {iteration}")]
    NanEnergy { iteration: usize },
    #[error("no admissible {parameter} in the search grid")]
    NoAdmissibleParameter { parameter: &'static str },
    #[error("{0}")]
    BadArguments(String),
}

fn hypothesis(msg: impl Into<String>) -> EllipticError {
    EllipticError::Hypothesis(msg.into())
}

/// Reaction term f(x, s) on the positive half-line, extended by 0 for s < 0.
/// `Constant` has a derivative kink at s = 0; the descent uses the right
/// derivative there.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceF {
    Zero,
    Constant { c: CellField },
    Power { c: CellField, gamma: f64 },
}

impl SourceF {
    pub fn is_zero(&self) -> bool {
        match self {
            SourceF::Zero => true,
            SourceF::Constant { c } | SourceF::Power { c, .. } => {
                c.values().iter().all(|&v| v == 0.0)
            }
        }
    }

    pub fn validate(&self, grid: Grid) -> Result<(), EllipticError> {
        match self {
            SourceF::Zero => Ok(()),
            SourceF::Constant { c } => {
                if c.grid() != grid {
                    return Err(GridError::GridMismatch.into());
                }
                if c.min() < 0.0 {
                    return Err(hypothesis("source coefficient c must be nonnegative"));
                }
                Ok(())
            }
            SourceF::Power { c, gamma } => {
                if c.grid() != grid {
                    return Err(GridError::GridMismatch.into());
                }
                if c.min() < 0.0 {
                    return Err(hypothesis("source coefficient c must be nonnegative"));
                }
                if !(*gamma >= 1.0) {
                    return Err(hypothesis(format!(
                        "power source needs gamma >= 1, got {gamma}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// f(x_i, s). For `Constant` the value at s = 0 is the right derivative
    /// of the potential.
    pub fn value(&self, i: usize, s: f64) -> f64 {
        match self {
            SourceF::Zero => 0.0,
            SourceF::Constant { c } => {
                if s >= 0.0 {
                    c.values()[i]
                } else {
                    0.0
                }
            }
            SourceF::Power { c, gamma } => {
                if s > 0.0 {
                    c.values()[i] * s.powf(gamma - 1.0)
                } else if s == 0.0 && *gamma == 1.0 {
                    c.values()[i]
                } else {
                    0.0
                }
            }
        }
    }

    /// Primitive F(x_i, s) = ∫_0^s f, zero for s < 0.
    pub fn potential(&self, i: usize, s: f64) -> f64 {
        match self {
            SourceF::Zero => 0.0,
            SourceF::Constant { c } => c.values()[i] * s.max(0.0),
            SourceF::Power { c, gamma } => {
                if s > 0.0 {
                    c.values()[i] * s.powf(*gamma) / gamma
                } else {
                    0.0
                }
            }
        }
    }
}

/// One of the supported elliptic problem families.
#[derive(Debug, Clone)]
pub enum Family {
    /// -Δ_{p(x)}u + l u^{s(x)-1} = h u^{q(x)-1} with q_+ < p_- < s_-.
    ReactionPQ {
        h: CellField,
        l: CellField,
        q: ExponentField,
        s: ExponentField,
    },
    /// v^{2q-1} - λ Δ_{p(x)}v = h0 v^{q-1} + λ f(x, v); one implicit Euler
    /// step of the fast diffusion scheme.
    FdeStep {
        lambda: f64,
        q: f64,
        h0: CellField,
        f: SourceF,
    },
    /// -div((|∇u|² + εu²)^{(p-2)/2}∇u) - (|∇u|² + εu²)^{(p-2)/2} εu = g(x,u).
    EpsPerturbed { eps: f64, m: f64, g: SourceF },
    /// -Δ_{p(x)}w = K.
    Torsion { k: f64 },
    /// -Δ_{p(x)}w = h_coef w^{q-1} + f_scale f(x, w) + k_src; realizes the
    /// sub- and supersolution problems of the fast diffusion scheme.
    Barrier {
        h_coef: CellField,
        q: f64,
        f: SourceF,
        f_scale: f64,
        k_src: f64,
    },
}

#[derive(Debug, Clone)]
pub struct EllipticProblem {
    grid: Grid,
    p: ExponentField,
    family: Family,
}

impl EllipticProblem {
    /// Build a problem, checking the structural hypotheses of the family.
    /// Violations name the failing condition, e.g. "q_+ < p_- violated".
    pub fn new(grid: Grid, p: ExponentField, family: Family) -> Result<Self, EllipticError> {
        if p.grid() != grid {
            return Err(GridError::GridMismatch.into());
        }
        match &family {
            Family::ReactionPQ { h, l, q, s } => {
                for field in [h, l] {
                    if field.grid() != grid {
                        return Err(GridError::GridMismatch.into());
                    }
                }
                if q.grid() != grid || s.grid() != grid {
                    return Err(GridError::GridMismatch.into());
                }
                if !(q.p_plus() < p.p_minus()) {
                    return Err(hypothesis(format!(
                        "q_+ < p_- violated (q_+ = {}, p_- = {})",
                        q.p_plus(),
                        p.p_minus()
                    )));
                }
                if !(p.p_minus() < s.p_minus()) {
                    return Err(hypothesis(format!(
                        "p_- < s_- violated (p_- = {}, s_- = {})",
                        p.p_minus(),
                        s.p_minus()
                    )));
                }
                if !(h.min() > 0.0) {
                    return Err(hypothesis("h > 0 violated"));
                }
                if !(l.min() > 0.0) {
                    return Err(hypothesis("l > 0 violated"));
                }
            }
            Family::FdeStep { lambda, q, h0, f } => {
                if h0.grid() != grid {
                    return Err(GridError::GridMismatch.into());
                }
                if !(*lambda > 0.0) {
                    return Err(hypothesis(format!("lambda > 0 violated (lambda = {lambda})")));
                }
                if !(*q > 1.0 && *q <= p.p_minus()) {
                    return Err(hypothesis(format!(
                        "q in (1, p_-] violated (q = {q}, p_- = {})",
                        p.p_minus()
                    )));
                }
                if h0.min() < 0.0 {
                    return Err(hypothesis("h0 >= 0 violated"));
                }
                f.validate(grid)?;
            }
            Family::EpsPerturbed { eps, m, g } => {
                if !(*eps > 0.0) {
                    return Err(hypothesis(format!("eps > 0 violated (eps = {eps})")));
                }
                if !(*m >= 1.0 && *m <= p.p_minus()) {
                    return Err(hypothesis(format!(
                        "m in [1, p_-] violated (m = {m}, p_- = {})",
                        p.p_minus()
                    )));
                }
                g.validate(grid)?;
            }
            Family::Torsion { k } => {
                if !(*k > 0.0) {
                    return Err(hypothesis(format!("K > 0 violated (K = {k})")));
                }
            }
            Family::Barrier {
                h_coef,
                q,
                f,
                f_scale,
                k_src,
            } => {
                if h_coef.grid() != grid {
                    return Err(GridError::GridMismatch.into());
                }
                if !(*q > 1.0 && *q <= p.p_minus()) {
                    return Err(hypothesis(format!(
                        "q in (1, p_-] violated (q = {q}, p_- = {})",
                        p.p_minus()
                    )));
                }
                if h_coef.min() < 0.0 || *f_scale < 0.0 || *k_src < 0.0 {
                    return Err(hypothesis("barrier coefficients must be nonnegative"));
                }
                f.validate(grid)?;
            }
        }
        Ok(EllipticProblem { grid, p, family })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn p(&self) -> &ExponentField {
        &self.p
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Integrand e_i(g, s) of the discrete energy at cell i, where g is the
    /// cell gradient and s the cell-collocated state.
    fn integrand(&self, i: usize, g: f64, s: f64) -> f64 {
        let pe = self.p.at(i);
        match &self.family {
            Family::ReactionPQ { h, l, q, s: se } => {
                let qe = q.at(i);
                let sv = se.at(i);
                g.abs().powf(pe) / pe + l.values()[i] * pospow(s, sv) / sv
                    - h.values()[i] * pospow(s, qe) / qe
            }
            Family::FdeStep { lambda, q, h0, f } => {
                s.abs().powf(2.0 * q) / (2.0 * q) + lambda * g.abs().powf(pe) / pe
                    - h0.values()[i] * pospow(s, *q) / q
                    - lambda * f.potential(i, s)
            }
            Family::EpsPerturbed { eps, g: src, .. } => {
                let w = g * g + eps * s * s;
                w.powf(pe / 2.0) / pe - src.potential(i, s)
            }
            Family::Torsion { k } => g.abs().powf(pe) / pe - k * s,
            Family::Barrier {
                h_coef,
                q,
                f,
                f_scale,
                k_src,
            } => {
                g.abs().powf(pe) / pe - h_coef.values()[i] * pospow(s, *q) / q
                    - f_scale * f.potential(i, s)
                    - k_src * s
            }
        }
    }

    /// (∂e/∂g, ∂e/∂s) at cell i.
    fn integrand_partials(&self, i: usize, g: f64, s: f64) -> (f64, f64) {
        let pe = self.p.at(i);
        match &self.family {
            Family::ReactionPQ { h, l, q, s: se } => {
                let qe = q.at(i);
                let sv = se.at(i);
                let de_dg = plap_flux(g, pe);
                let de_ds = l.values()[i] * pospow_deriv(s, sv) - h.values()[i] * pospow_deriv(s, qe);
                (de_dg, de_ds)
            }
            Family::FdeStep { lambda, q, h0, f } => {
                let de_dg = lambda * plap_flux(g, pe);
                let de_ds = odd_pow(s, 2.0 * q - 1.0) - h0.values()[i] * pospow_deriv(s, *q)
                    - lambda * f.value(i, s);
                (de_dg, de_ds)
            }
            Family::EpsPerturbed { eps, g: src, .. } => {
                let w = g * g + eps * s * s;
                if w == 0.0 {
                    // Limit value for p > 1; the reaction part still acts.
                    (0.0, -src.value(i, s))
                } else {
                    let t = w.powf(pe / 2.0 - 1.0);
                    (t * g, t * eps * s - src.value(i, s))
                }
            }
            Family::Torsion { k } => (plap_flux(g, pe), -k),
            Family::Barrier {
                h_coef,
                q,
                f,
                f_scale,
                k_src,
            } => {
                let de_dg = plap_flux(g, pe);
                let de_ds = -h_coef.values()[i] * pospow_deriv(s, *q) - f_scale * f.value(i, s)
                    - k_src;
                (de_dg, de_ds)
            }
        }
    }

    fn energy_raw(&self, values: &[f64]) -> f64 {
        let h = self.grid.h();
        let mut acc = 0.0;
        for i in 0..self.grid.n_cells() {
            let g = (values[i + 1] - values[i]) / h;
            let s = 0.5 * (values[i] + values[i + 1]);
            acc += h * self.integrand(i, g, s);
        }
        acc
    }

    fn residual_raw(&self, values: &[f64], out: &mut [f64]) {
        let h = self.grid.h();
        let n = self.grid.n_cells();
        // Per-cell partials, then the chain rule of the nodal couplings:
        // node j sees cell j-1 through (+1/h, 1/2) and cell j through
        // (-1/h, 1/2).
        let mut dg = vec![0.0; n];
        let mut ds = vec![0.0; n];
        for i in 0..n {
            let g = (values[i + 1] - values[i]) / h;
            let s = 0.5 * (values[i] + values[i + 1]);
            let (a, b) = self.integrand_partials(i, g, s);
            dg[i] = a;
            ds[i] = b;
        }
        out[0] = 0.0;
        out[n] = 0.0;
        for j in 1..n {
            out[j] = (dg[j - 1] - dg[j]) + 0.5 * h * (ds[j - 1] + ds[j]);
        }
    }

    /// Discrete energy of a zero-trace state.
    pub fn energy(&self, u: &GridFunction) -> Result<f64, EllipticError> {
        if u.grid() != self.grid {
            return Err(GridError::GridMismatch.into());
        }
        Ok(self.energy_raw(u.values()))
    }

    /// Gradient of the discrete energy with respect to the nodal values;
    /// zero at the boundary nodes (fixed Dirichlet data). This is the exact
    /// derivative of [`EllipticProblem::energy`], same quadrature.
    pub fn residual(&self, u: &GridFunction) -> Result<GridFunction, EllipticError> {
        if u.grid() != self.grid {
            return Err(GridError::GridMismatch.into());
        }
        let mut out = vec![0.0; self.grid.n_nodes()];
        self.residual_raw(u.values(), &mut out);
        Ok(GridFunction::dirichlet(self.grid, out)?)
    }
}

fn pospow(s: f64, e: f64) -> f64 {
    if s > 0.0 {
        s.powf(e)
    } else {
        0.0
    }
}

/// Derivative of s ↦ pospow(s, e)/e; right derivative at the kink when e = 1.
fn pospow_deriv(s: f64, e: f64) -> f64 {
    if s > 0.0 {
        s.powf(e - 1.0)
    } else if s == 0.0 && e == 1.0 {
        1.0
    } else {
        0.0
    }
}

/// |s|^{e-1} s, the odd power with exponent e >= 1.
fn odd_pow(s: f64, e: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.abs().powf(e - 1.0) * s
    }
}

fn plap_flux(g: f64, pe: f64) -> f64 {
    if g == 0.0 {
        0.0
    } else {
        g.abs().powf(pe - 2.0) * g
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Convergence threshold on the sup norm of the residual. Defaults to
    /// 1e-10 * n_cells.
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub step0: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: None,
            max_iter: 200_000,
            step0: 1.0,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolveOptions {
            tol: Some(tol),
            ..Default::default()
        }
    }

    pub fn resolved_tol(&self, n_cells: usize) -> f64 {
        self.tol.unwrap_or(1e-10 * n_cells as f64)
    }
}

/// Fixed symmetric positive definite tridiagonal metric
/// M = stiffness_scale (1/h) tridiag(-1, 2, -1) + mass_scale h I over the
/// interior nodes, factored once (Thomas algorithm) and reused every
/// iteration. Descent directions solve M d = gradient.
struct DescentMetric {
    sub: f64,
    denom: Vec<f64>,
    cprime: Vec<f64>,
}

impl DescentMetric {
    fn new(n_interior: usize, h: f64, stiffness_scale: f64, mass_scale: f64) -> DescentMetric {
        let sub = -stiffness_scale / h;
        let diag = 2.0 * stiffness_scale / h + mass_scale * h;
        let mut denom = Vec::with_capacity(n_interior);
        let mut cprime = Vec::with_capacity(n_interior);
        let mut prev_c = 0.0;
        for _ in 0..n_interior {
            let d = diag - sub * prev_c;
            prev_c = sub / d;
            denom.push(d);
            cprime.push(prev_c);
        }
        DescentMetric { sub, denom, cprime }
    }

    fn for_family(family: &Family, n_interior: usize, h: f64) -> DescentMetric {
        // The FdeStep stiffness carries the factor lambda, so the metric
        // does too; everything else is stiffness-dominated at unit scale.
        let stiffness_scale = match family {
            Family::FdeStep { lambda, .. } => *lambda,
            _ => 1.0,
        };
        DescentMetric::new(n_interior, h, stiffness_scale, 1.0)
    }

    /// Solve M out = rhs on the interior; rhs and out have node length and
    /// zero boundary entries.
    fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let m = self.denom.len();
        out[0] = 0.0;
        out[m + 1] = 0.0;
        let mut prev = 0.0;
        for i in 0..m {
            prev = (rhs[i + 1] - self.sub * prev) / self.denom[i];
            out[i + 1] = prev;
        }
        for i in (0..m.saturating_sub(1)).rev() {
            out[i + 1] -= self.cprime[i] * out[i + 2];
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub solution: GridFunction,
    pub iterations: usize,
    pub final_energy: f64,
    pub residual_sup: f64,
    pub converged: bool,
    /// Solution strictly positive at all interior nodes.
    pub positivity: bool,
    /// Both outward-normal difference quotients negative.
    pub hopf_ok: bool,
    /// For ReactionPQ: 0 <= u <= max{||h/l||_inf, 1}^{1/(s_- - q_+)}; other
    /// families carry no predicted bound.
    pub linf_bound_ok: Option<bool>,
}

/// Minimize the discrete energy from `u_init` (its boundary values are
/// pinned to 0). Monotone descent; never panics on non-convergence, which is
/// reported through `converged = false`.
pub fn minimize(
    prob: &EllipticProblem,
    u_init: &GridFunction,
    opts: &SolveOptions,
) -> Result<SolveReport, EllipticError> {
    let grid = prob.grid();
    if u_init.grid() != grid {
        return Err(GridError::GridMismatch.into());
    }
    let n = grid.n_cells();
    let h = grid.h();
    let tol = opts.resolved_tol(n);

    let mut u: Vec<f64> = u_init.values().to_vec();
    u[0] = 0.0;
    u[n] = 0.0;

    let mut energy = prob.energy_raw(&u);
    if !energy.is_finite() {
        return Err(EllipticError::NanEnergy { iteration: 0 });
    }
    let mut grad = vec![0.0; n + 1];
    prob.residual_raw(&u, &mut grad);

    let metric = DescentMetric::for_family(prob.family(), n - 1, h);
    let mut alpha = opts.step0;
    let mut dir = vec![0.0; n + 1];
    let mut trial = vec![0.0; n + 1];
    let mut grad_next = vec![0.0; n + 1];
    let mut dir_next = vec![0.0; n + 1];
    let mut iterations = 0;
    let mut converged = false;

    for iter in 0..opts.max_iter {
        iterations = iter;
        let gsup = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gsup <= tol {
            converged = true;
            break;
        }
        // Search direction -dir with M dir = grad; the directional
        // derivative of the energy along it is -<grad, dir> < 0.
        metric.solve(&grad, &mut dir);
        let gd: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if gd <= 0.0 {
            break;
        }

        // One ulp-scale of the energy: below it a decrease can no longer be
        // certified in double precision and acceptance falls back to a
        // strict decrease of the metric norm of the gradient.
        let energy_resolution = 4.0 * f64::EPSILON * (1.0 + energy.abs());
        let mut step = alpha.clamp(1e-12, 1e12);
        let mut accepted = false;
        let mut grad_ready = false;
        let mut e_trial = energy;
        for _ in 0..110 {
            for j in 0..=n {
                trial[j] = u[j] - step * dir[j];
            }
            e_trial = prob.energy_raw(&trial);
            if e_trial.is_finite() {
                let certified = 1e-4 * step * gd;
                if certified >= energy_resolution {
                    // Armijo with slope parameter 1e-4.
                    if e_trial <= energy - certified {
                        accepted = true;
                        break;
                    }
                } else {
                    prob.residual_raw(&trial, &mut grad_next);
                    metric.solve(&grad_next, &mut dir_next);
                    let gd_next: f64 =
                        grad_next.iter().zip(&dir_next).map(|(g, d)| g * d).sum();
                    if gd_next < gd && e_trial <= energy + energy_resolution {
                        accepted = true;
                        grad_ready = true;
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        if !grad_ready {
            prob.residual_raw(&trial, &mut grad_next);
        }

        // Barzilai-Borwein step in the metric: s^T M s / s^T y, using
        // s = -step dir and M dir = grad, so s^T M s = step^2 <grad, dir>.
        let mut sy = 0.0;
        for j in 0..=n {
            sy += (trial[j] - u[j]) * (grad_next[j] - grad[j]);
        }
        alpha = if sy > 0.0 {
            step * step * gd / sy
        } else {
            step * 2.0
        };

        std::mem::swap(&mut u, &mut trial);
        std::mem::swap(&mut grad, &mut grad_next);
        // In the sub-resolution regime e_trial may sit a few ulps above the
        // previous value; the recorded energy stays monotone.
        energy = energy.min(e_trial);
    }

    let residual_sup = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let solution = GridFunction::dirichlet(grid, u)?;
    let positivity = solution.values()[1..n].iter().all(|&v| v > 0.0);
    let (oa, ob) = solution.boundary_outward()?;
    let hopf_ok = oa < 0.0 && ob < 0.0;
    let linf_bound_ok = match prob.family() {
        Family::ReactionPQ { h, l, q, s } => {
            let ratio_sup = h
                .values()
                .iter()
                .zip(l.values())
                .map(|(hv, lv)| hv / lv)
                .fold(0.0f64, f64::max);
            let lambda_bound = ratio_sup.max(1.0).powf(1.0 / (s.p_minus() - q.p_plus()));
            let tol_b = 1e-9 * (1.0 + lambda_bound);
            Some(solution.min() >= -tol_b && solution.max() <= lambda_bound + tol_b)
        }
        _ => None,
    };

    Ok(SolveReport {
        solution,
        iterations,
        final_energy: energy,
        residual_sup,
        converged,
        positivity,
        hopf_ok,
        linf_bound_ok,
    })
}

/// Solve the torsion problem -Δ_{p(x)}w = K with zero boundary data.
pub fn solve_torsion(
    k: f64,
    p: &ExponentField,
    grid: Grid,
    opts: &SolveOptions,
) -> Result<SolveReport, EllipticError> {
    let prob = EllipticProblem::new(grid, p.clone(), Family::Torsion { k })?;
    minimize(&prob, &GridFunction::zeros(grid), opts)
}

/// True iff u >= v - 1e-12 at every node.
pub fn ordering_check(u: &GridFunction, v: &GridFunction) -> Result<bool, GridError> {
    if u.grid() != v.grid() {
        return Err(GridError::GridMismatch);
    }
    Ok(u.values()
        .iter()
        .zip(v.values())
        .all(|(a, b)| *a >= b - 1e-12))
}

#[derive(Debug, Clone, Serialize)]
pub struct PositivityReport {
    pub min_interior: f64,
    pub outward_at_a: f64,
    pub outward_at_b: f64,
    pub positive: bool,
    pub hopf_ok: bool,
}

/// Positivity of u on the δ-interior and the Hopf sign of the two
/// outward-normal difference quotients.
pub fn positivity_and_hopf_check(
    u: &GridFunction,
    delta_interior: f64,
) -> Result<PositivityReport, GridError> {
    let grid = u.grid();
    let mut min_interior = f64::INFINITY;
    for (i, &v) in u.values().iter().enumerate() {
        let x = grid.node(i);
        let dist = (x - grid.a()).min(grid.b() - x);
        if dist >= delta_interior && i > 0 && i < grid.n_cells() {
            min_interior = min_interior.min(v);
        }
    }
    let (outward_at_a, outward_at_b) = u.boundary_outward()?;
    Ok(PositivityReport {
        min_interior,
        outward_at_a,
        outward_at_b,
        positive: min_interior > 0.0,
        hopf_ok: outward_at_a < 0.0 && outward_at_b < 0.0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub max_pairwise_sup: f64,
    pub all_converged: bool,
    /// None when a run failed to converge (inconclusive).
    pub unique: Option<bool>,
}

/// Minimize from each initial state and compare the converged solutions;
/// the verdict threshold is a sup distance of 1e-6.
pub fn uniqueness_probe(
    prob: &EllipticProblem,
    inits: &[GridFunction],
    opts: &SolveOptions,
) -> Result<UniquenessReport, EllipticError> {
    if inits.len() < 2 {
        return Err(EllipticError::BadArguments(
            "uniqueness probe needs at least 2 initial states".into(),
        ));
    }
    let mut solutions = Vec::with_capacity(inits.len());
    let mut all_converged = true;
    for init in inits {
        let report = minimize(prob, init, opts)?;
        all_converged &= report.converged;
        solutions.push(report.solution);
    }
    let mut max_pairwise_sup: f64 = 0.0;
    for i in 0..solutions.len() {
        for j in (i + 1)..solutions.len() {
            max_pairwise_sup = max_pairwise_sup.max(solutions[i].sup_distance(&solutions[j])?);
        }
    }
    let unique = all_converged.then_some(max_pairwise_sup <= 1e-6);
    Ok(UniquenessReport {
        max_pairwise_sup,
        all_converged,
        unique,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RayScanReport {
    pub xi: Vec<f64>,
    pub min_second_difference: f64,
    pub scale: f64,
    pub holds: bool,
}

/// Sample ξ(t) = E(((1-t)v0 + t v1)^{1/m}) on n_t + 1 uniform t values and
/// report the smallest second difference; convexity of the energy along
/// m-th-root segments makes every second difference nonnegative up to
/// 1e-9 * scale.
pub fn hidden_convexity_scan(
    prob: &EllipticProblem,
    v0: &GridFunction,
    v1: &GridFunction,
    m: f64,
    n_t: usize,
) -> Result<RayScanReport, EllipticError> {
    if v0.grid() != prob.grid() || v1.grid() != prob.grid() {
        return Err(GridError::GridMismatch.into());
    }
    if !(m >= 1.0 && m <= prob.p().p_minus()) {
        return Err(hypothesis(format!(
            "m in [1, p_-] violated (m = {m}, p_- = {})",
            prob.p().p_minus()
        )));
    }
    if n_t < 2 {
        return Err(EllipticError::BadArguments("need n_t >= 2".into()));
    }
    for (name, v) in [("v0", v0), ("v1", v1)] {
        if !v.is_dirichlet_zero() {
            return Err(EllipticError::BadArguments(format!(
                "{name} must have zero trace"
            )));
        }
        if v.min() < 0.0 {
            return Err(EllipticError::BadArguments(format!(
                "{name} must be nonnegative"
            )));
        }
    }

    let mut xi = Vec::with_capacity(n_t + 1);
    for k in 0..=n_t {
        let t = k as f64 / n_t as f64;
        let state = v0.zip_with(v1, |a, b| ((1.0 - t) * a + t * b).powf(1.0 / m))?;
        xi.push(prob.energy(&state)?);
    }
    let scale = 1.0 + xi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min_second_difference = xi
        .windows(3)
        .map(|w| w[0] - 2.0 * w[1] + w[2])
        .fold(f64::INFINITY, f64::min);
    Ok(RayScanReport {
        xi,
        min_second_difference,
        scale,
        holds: min_second_difference >= -1e-9 * scale,
    })
}

/// Shared data for the sub/supersolution constructions of the fast
/// diffusion scheme.
#[derive(Debug, Clone)]
pub struct BarrierContext {
    pub grid: Grid,
    pub p: ExponentField,
    pub q: f64,
    /// Spatial floor h0(x) <= h(t, x).
    pub h0_floor: CellField,
    /// Sup bound of the forcing over the whole cylinder.
    pub h_sup: f64,
    pub f: SourceF,
    pub solver: SolveOptions,
}

#[derive(Debug, Clone)]
pub struct BarrierResult {
    pub w: GridFunction,
    /// The selected μ (subsolution) or K (supersolution).
    pub parameter: f64,
    pub report: SolveReport,
}

/// Scale a trial bump until the energy goes negative so that monotone
/// descent can never terminate in the trivial state (E(0) = 0). Families
/// whose reaction term is sublinear near zero always admit such a bump.
pub fn negative_energy_init(
    prob: &EllipticProblem,
    base_amplitude: f64,
) -> Result<GridFunction, EllipticError> {
    let grid = prob.grid();
    let a = grid.a();
    let b = grid.b();
    let bump = |amp: f64| {
        GridFunction::dirichlet_from_fn(grid, |x| {
            let s = (x - a) / (b - a);
            amp * 4.0 * s * (1.0 - s)
        })
        .expect("bump is admissible")
    };
    let mut amp = base_amplitude.max(1e-6);
    for _ in 0..60 {
        let candidate = bump(amp);
        if prob.energy(&candidate)? < 0.0 {
            return Ok(candidate);
        }
        amp *= 0.5;
    }
    // No sign change found; hand back the smallest bump and let the solver
    // report what it finds.
    Ok(bump(amp))
}

/// Solve -Δ_{p(x)}w = μ(h0 w^{q-1} + f(x, w)) for each μ in the (positive,
/// decreasing) grid and keep the largest μ whose solution is positive in the
/// interior and lies below `v0` nodewise.
pub fn build_subsolution(
    ctx: &BarrierContext,
    mu_grid: &[f64],
    v0: &GridFunction,
) -> Result<BarrierResult, EllipticError> {
    if mu_grid.is_empty() || mu_grid.windows(2).any(|w| w[0] <= w[1]) || mu_grid[0] <= 0.0 {
        return Err(EllipticError::BadArguments(
            "mu grid must be positive and strictly decreasing".into(),
        ));
    }
    if mu_grid.iter().any(|&m| m <= 0.0) {
        return Err(EllipticError::BadArguments("mu grid must be positive".into()));
    }
    for &mu in mu_grid {
        let prob = EllipticProblem::new(
            ctx.grid,
            ctx.p.clone(),
            Family::Barrier {
                h_coef: ctx.h0_floor.map(|v| mu * v),
                q: ctx.q,
                f: ctx.f.clone(),
                f_scale: mu,
                k_src: 0.0,
            },
        )?;
        let init = negative_energy_init(&prob, v0.max())?;
        let report = minimize(&prob, &init, &ctx.solver)?;
        if !report.converged {
            continue;
        }
        let below = report
            .solution
            .values()
            .iter()
            .zip(v0.values())
            .all(|(w, v)| *w <= v + 1e-12);
        if report.positivity && below {
            return Ok(BarrierResult {
                w: report.solution.clone(),
                parameter: mu,
                report,
            });
        }
    }
    Err(EllipticError::NoAdmissibleParameter { parameter: "mu" })
}

/// Solve -Δ_{p(x)}w = ||h||_inf w^{q-1} + f(x, w) + K for each K in the
/// (positive, increasing) grid and keep the smallest K whose solution
/// dominates `v0` nodewise.
pub fn build_supersolution(
    ctx: &BarrierContext,
    k_grid: &[f64],
    v0: &GridFunction,
) -> Result<BarrierResult, EllipticError> {
    if k_grid.is_empty() || k_grid.windows(2).any(|w| w[0] >= w[1]) || k_grid[0] <= 0.0 {
        return Err(EllipticError::BadArguments(
            "K grid must be positive and strictly increasing".into(),
        ));
    }
    let mut init = GridFunction::zeros(ctx.grid);
    for &k in k_grid {
        let prob = EllipticProblem::new(
            ctx.grid,
            ctx.p.clone(),
            Family::Barrier {
                h_coef: CellField::constant(ctx.grid, ctx.h_sup),
                q: ctx.q,
                f: ctx.f.clone(),
                f_scale: 1.0,
                k_src: k,
            },
        )?;
        let report = minimize(&prob, &init, &ctx.solver)?;
        if !report.converged {
            continue;
        }
        // Solutions grow with K; warm-start the next solve.
        init = report.solution.clone();
        let above = report
            .solution
            .values()
            .iter()
            .zip(v0.values())
            .all(|(w, v)| *w >= v - 1e-12);
        if report.positivity && above {
            return Ok(BarrierResult {
                w: report.solution.clone(),
                parameter: k,
                report,
            });
        }
    }
    Err(EllipticError::NoAdmissibleParameter { parameter: "K" })
}

/// Cell collocation followed by the positive power: ((u_i + u_{i+1})/2)^q_+.
pub fn cell_pow(u: &GridFunction, q: f64) -> CellField {
    u.to_cells().map(|s| pospow(s, q))
}

/// L² norm of a cell field under the midpoint rule.
pub fn l2_norm(c: &CellField) -> f64 {
    c.map(|v| v * v).integrate().max(0.0).sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct AcrReport {
    /// ||(v1^q - v2^q)^+||_{L²}
    pub lhs: f64,
    /// ||(h1 - h2)^+||_{L²}
    pub rhs: f64,
    pub holds: bool,
    pub both_converged: bool,
}

/// Contraction of the implicit Euler step with respect to its potential:
/// solve the step problem for h0 = h1 and h0 = h2 and compare
/// ||(v1^q - v2^q)^+||_{L²} against ||(h1 - h2)^+||_{L²}.
#[allow(clippy::too_many_arguments)]
pub fn fde_step_contraction_check(
    grid: Grid,
    p: &ExponentField,
    lambda: f64,
    q: f64,
    f: &SourceF,
    h1: &CellField,
    h2: &CellField,
    opts: &SolveOptions,
) -> Result<AcrReport, EllipticError> {
    let solve = |h0: &CellField| -> Result<SolveReport, EllipticError> {
        let prob = EllipticProblem::new(
            grid,
            p.clone(),
            Family::FdeStep {
                lambda,
                q,
                h0: h0.clone(),
                f: f.clone(),
            },
        )?;
        let init = negative_energy_init(&prob, 1.0)?;
        minimize(&prob, &init, opts)
    };
    let r1 = solve(h1)?;
    let r2 = solve(h2)?;
    let lhs = l2_norm(
        &cell_pow(&r1.solution, q)
            .zip_with(&cell_pow(&r2.solution, q), |a, b| (a - b).max(0.0))?,
    );
    let rhs = l2_norm(&h1.zip_with(h2, |a, b| (a - b).max(0.0))?);
    Ok(AcrReport {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-6 * (1.0 + rhs),
        both_converged: r1.converged && r2.converged,
    })
}

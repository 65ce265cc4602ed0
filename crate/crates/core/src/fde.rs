//! Implicit Euler semi-discretization of the fast diffusion problem
//! v^{q-1} ∂_t(v^q) - Δ_{p(x)}v = h(t,x) v^{q-1} + f(x,v) with positive
//! initial data and zero boundary values.
//!
//! Each time step solves the elliptic step family with λ = Δt and potential
//! Δt h^n + v_{n-1}^q, where h^n is the time average of the forcing over the
//! step. Before stepping, a subsolution and a supersolution are built from
//! the barrier problems; every accepted step must stay inside that bracket.
//! The module also verifies the L² contraction of the scheme with respect to
//! initial data and forcing, and the comparison principle for ordered data.

use serde::Serialize;
use thiserror::Error;

use crate::elliptic::{
    build_subsolution, build_supersolution, cell_pow, l2_norm, minimize, BarrierContext,
    EllipticError, EllipticProblem, Family, SolveOptions, SourceF,
};
use crate::expr::{EvalError, Expression};
use crate::grid::{CellField, Grid, GridError, GridFunction};
use crate::vxspace::ExponentField;

/// Inner quadrature points for the per-step time averages of the forcing.
const FORCING_QUADRATURE_POINTS: usize = 16;

#[derive(Debug, Error)]
pub enum FdeError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error("forcing expression failed: {0}")]
    Forcing(#[from] EvalError),
    #[error("configuration invalid: {0}")]
    Config(String),
    #[error("bracket construction failed: {0}")]
    Bracket(EllipticError),
    #[error("step {step} failed: {reason}; partial trajectory retained")]
    Step {
        step: usize,
        reason: String,
        partial: Box<FdeTrajectory>,
    },
    #[error("comparison preconditions violated: {0}")]
    Inconclusive(String),
}

/// Full configuration of a fast-diffusion run.
#[derive(Debug, Clone)]
pub struct FdeConfig {
    pub grid: Grid,
    pub p: ExponentField,
    pub t_final: f64,
    pub n_steps: usize,
    /// Diffusion power q in (1, min{N/2 + 1, p_-}] = (1, min{1.5, p_-}] in 1D.
    pub q: f64,
    pub f: SourceF,
    /// Forcing h(t, x), evaluated with both variables bound.
    pub h: Expression,
    /// Spatial floor h0(x) of the forcing: 0 <= h0 <= h(t, .) and h0 not
    /// identically zero.
    pub h0_floor: CellField,
    /// Positive interior initial datum with zero trace.
    pub v0: GridFunction,
    /// Lift the 1D cap q <= 1.5 up to q <= p_- (requires f to vanish fast
    /// enough near 0; asserted by the caller).
    pub allow_q_up_to_p_minus: bool,
    /// Waive the small-s blow-up requirement on f when the forcing is
    /// bounded below by a positive constant.
    pub forcing_bounded_below: bool,
    pub solver: SolveOptions,
}

impl FdeConfig {
    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    /// Validate every structural hypothesis; returns all violations.
    pub fn validate(&self) -> Result<(), FdeError> {
        let mut violations = Vec::new();
        if self.p.grid() != self.grid
            || self.h0_floor.grid() != self.grid
            || self.v0.grid() != self.grid
        {
            violations.push("all fields must live on the configured grid".to_string());
        }
        if !(self.t_final > 0.0) {
            violations.push(format!("T > 0 violated (T = {})", self.t_final));
        }
        if self.n_steps == 0 {
            violations.push("n_steps >= 1 violated".to_string());
        }
        let q_cap = if self.allow_q_up_to_p_minus {
            self.p.p_minus()
        } else {
            self.p.p_minus().min(1.5)
        };
        if !(self.q > 1.0 && self.q <= q_cap) {
            violations.push(format!(
                "q in (1, min{{1.5, p_-}}] violated (q = {}, cap = {q_cap})",
                self.q
            ));
        }
        if self.h0_floor.min() < 0.0 {
            violations.push("h0 >= 0 violated".to_string());
        }
        if self.h0_floor.max() <= 0.0 {
            violations.push("h0 not identically zero violated".to_string());
        }
        if !self.v0.is_dirichlet_zero() {
            violations.push("v0 must have zero trace".to_string());
        } else {
            let interior_min = self.v0.values()[1..self.grid.n_cells()]
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if interior_min <= 0.0 {
                violations.push("v0 > 0 in the interior violated".to_string());
            }
        }
        if self.f.is_zero() && !self.forcing_bounded_below {
            violations.push(
                "f not identically zero violated (set forcing_bounded_below for h >= c > 0)"
                    .to_string(),
            );
        }
        match &self.f {
            SourceF::Zero | SourceF::Constant { .. } => {
                // For a positive constant source, blow-up at 0 is automatic
                // and f/s^{q-1} is nonincreasing.
            }
            SourceF::Power { gamma, .. } => {
                if !(*gamma <= self.q) {
                    violations.push(format!(
                        "f/s^(q-1) nonincreasing violated (gamma = {gamma} > q = {})",
                        self.q
                    ));
                }
                if !(*gamma < 2.0 * self.q) && !self.forcing_bounded_below {
                    violations.push(format!(
                        "f(x,s)/s^(2q-1) -> inf violated (gamma = {gamma} >= 2q = {})",
                        2.0 * self.q
                    ));
                }
            }
        }
        if let Err(e) = self.f.validate(self.grid) {
            violations.push(e.to_string());
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(FdeError::Config(violations.join("; ")))
        }
    }
}

/// Per-step time averages h^n(x) = (1/Δt) ∫_{t_{n-1}}^{t_n} h(s, x) ds by a
/// composite midpoint rule in time.
pub fn average_forcing(
    h: &Expression,
    dt: f64,
    n_steps: usize,
    grid: Grid,
) -> Result<Vec<CellField>, FdeError> {
    average_forcing_with(h, dt, n_steps, grid, FORCING_QUADRATURE_POINTS)
}

/// Same as [`average_forcing`] with an explicit inner quadrature resolution.
pub fn average_forcing_with(
    h: &Expression,
    dt: f64,
    n_steps: usize,
    grid: Grid,
    points: usize,
) -> Result<Vec<CellField>, FdeError> {
    if !(dt > 0.0) || points == 0 {
        return Err(FdeError::Config(format!(
            "need dt > 0 and quadrature points > 0 (dt = {dt}, points = {points})"
        )));
    }
    let mut averages = Vec::with_capacity(n_steps);
    for n in 1..=n_steps {
        let t_start = (n - 1) as f64 * dt;
        let mut values = Vec::with_capacity(grid.n_cells());
        for i in 0..grid.n_cells() {
            let x = grid.center(i);
            let mut acc = 0.0;
            for k in 0..points {
                let t = t_start + (k as f64 + 0.5) * dt / points as f64;
                acc += h.eval_xt(x, t)?;
            }
            values.push(acc / points as f64);
        }
        averages.push(CellField::new(grid, values)?);
    }
    Ok(averages)
}

#[derive(Debug, Clone, Serialize)]
pub struct JensenReport {
    /// Σ_n Δt ||h^n||²_{L²}
    pub lhs: f64,
    /// ||h||²_{L²(Q_T)} on the same quadrature points.
    pub rhs: f64,
    pub holds: bool,
}

/// The averaging is an L² contraction: Σ Δt ||h^n||² <= ||h||²_{L²(Q_T)}.
/// Both sides are computed on the same space-time quadrature, where the
/// inequality is exact up to rounding.
pub fn jensen_check(
    h: &Expression,
    dt: f64,
    n_steps: usize,
    grid: Grid,
) -> Result<JensenReport, FdeError> {
    let points = FORCING_QUADRATURE_POINTS;
    let averages = average_forcing_with(h, dt, n_steps, grid, points)?;
    let mut lhs = 0.0;
    for avg in &averages {
        lhs += dt * avg.map(|v| v * v).integrate();
    }
    let mut rhs = 0.0;
    for n in 1..=n_steps {
        let t_start = (n - 1) as f64 * dt;
        for i in 0..grid.n_cells() {
            let x = grid.center(i);
            for k in 0..points {
                let t = t_start + (k as f64 + 0.5) * dt / points as f64;
                let v = h.eval_xt(x, t)?;
                rhs += v * v * grid.h() * dt / points as f64;
            }
        }
    }
    Ok(JensenReport {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12 * (1.0 + rhs),
    })
}

/// Compact record of one elliptic solve inside a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct StepSummary {
    pub iterations: usize,
    pub final_energy: f64,
    pub residual_sup: f64,
    pub converged: bool,
}

/// The Euler-step solutions v_0 ... v_{n*} with their averaged forcings,
/// bracket functions and per-step records.
#[derive(Debug, Clone)]
pub struct FdeTrajectory {
    pub grid: Grid,
    pub q: f64,
    pub dt: f64,
    pub steps: Vec<GridFunction>,
    pub h_avg: Vec<CellField>,
    pub sub: GridFunction,
    pub sup: GridFunction,
    pub step_reports: Vec<StepSummary>,
    /// Δt ||(v_n^q - v_{n-1}^q)/Δt||²_{L²} per step; their sum is the
    /// discrete time-derivative energy estimate.
    pub increments_l2: Vec<f64>,
    pub jensen: JensenReport,
    pub sub_mu: f64,
    pub sup_k: f64,
}

impl FdeTrajectory {
    pub fn n_steps(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn t_final(&self) -> f64 {
        self.dt * self.n_steps() as f64
    }

    /// Σ Δt ||(v_n^q - v_{n-1}^q)/Δt||²; recorded, no quantitative bound is
    /// asserted.
    pub fn increment_estimate(&self) -> f64 {
        self.increments_l2.iter().sum()
    }
}

/// One implicit Euler step: solve the step family with λ = Δt and potential
/// Δt h^n + v_prev^q, warm-started from v_prev.
pub fn euler_step(
    v_prev: &GridFunction,
    h_n: &CellField,
    cfg: &FdeConfig,
) -> Result<crate::elliptic::SolveReport, FdeError> {
    let dt = cfg.dt();
    let h0 = h_n
        .map(|v| dt * v)
        .zip_with(&cell_pow(v_prev, cfg.q), |a, b| a + b)?;
    let prob = EllipticProblem::new(
        cfg.grid,
        cfg.p.clone(),
        Family::FdeStep {
            lambda: dt,
            q: cfg.q,
            h0,
            f: cfg.f.clone(),
        },
    )?;
    Ok(minimize(&prob, v_prev, &cfg.solver)?)
}

const BRACKET_TOL: f64 = 1e-10;

/// Run the full scheme: averaged forcing, bracket construction, n_steps
/// converged Euler steps with the bracketing invariant checked at each one.
pub fn run_fde(cfg: &FdeConfig) -> Result<FdeTrajectory, FdeError> {
    cfg.validate()?;
    let dt = cfg.dt();
    let h_avg = average_forcing(&cfg.h, dt, cfg.n_steps, cfg.grid)?;
    let jensen = jensen_check(&cfg.h, dt, cfg.n_steps, cfg.grid)?;

    // The averaged forcing must dominate its declared floor.
    for (n, avg) in h_avg.iter().enumerate() {
        for (i, (a, floor)) in avg.values().iter().zip(cfg.h0_floor.values()).enumerate() {
            if *a < floor - 1e-9 * (1.0 + floor.abs()) {
                return Err(FdeError::Config(format!(
                    "h(t, .) >= h0 violated at step {} cell {} ({} < {})",
                    n + 1,
                    i,
                    a,
                    floor
                )));
            }
        }
    }

    let h_sup = h_avg
        .iter()
        .map(|f| f.max())
        .fold(cfg.h0_floor.max(), f64::max);
    let ctx = BarrierContext {
        grid: cfg.grid,
        p: cfg.p.clone(),
        q: cfg.q,
        h0_floor: cfg.h0_floor.clone(),
        h_sup,
        f: cfg.f.clone(),
        solver: cfg.solver,
    };
    let mu_grid: Vec<f64> = (0..=20).map(|k| 0.5f64.powi(k)).collect();
    let sub = build_subsolution(&ctx, &mu_grid, &cfg.v0).map_err(FdeError::Bracket)?;
    let k_grid: Vec<f64> = (0..=20).map(|k| 2.0f64.powi(k)).collect();
    let sup = build_supersolution(&ctx, &k_grid, &cfg.v0).map_err(FdeError::Bracket)?;

    let mut traj = FdeTrajectory {
        grid: cfg.grid,
        q: cfg.q,
        dt,
        steps: vec![cfg.v0.clone()],
        h_avg,
        sub: sub.w,
        sup: sup.w,
        step_reports: Vec::new(),
        increments_l2: Vec::new(),
        jensen,
        sub_mu: sub.parameter,
        sup_k: sup.parameter,
    };

    for n in 1..=cfg.n_steps {
        let v_prev = traj.steps.last().unwrap().clone();
        let report = match euler_step(&v_prev, &traj.h_avg[n - 1], cfg) {
            Ok(r) => r,
            Err(e) => {
                let reason = e.to_string();
                return Err(FdeError::Step {
                    step: n,
                    reason,
                    partial: Box::new(traj),
                });
            }
        };
        if !report.converged {
            return Err(FdeError::Step {
                step: n,
                reason: format!(
                    "solver stopped at residual {} without converging",
                    report.residual_sup
                ),
                partial: Box::new(traj),
            });
        }
        let v_n = report.solution.clone();
        let inside = v_n
            .values()
            .iter()
            .zip(traj.sub.values())
            .zip(traj.sup.values())
            .all(|((v, lo), hi)| *v >= lo - BRACKET_TOL && *v <= hi + BRACKET_TOL);
        if !inside {
            return Err(FdeError::Step {
                step: n,
                reason: "bracketing invariant violated".to_string(),
                partial: Box::new(traj),
            });
        }
        let increment = l2_norm(
            &cell_pow(&v_n, cfg.q)
                .zip_with(&cell_pow(&v_prev, cfg.q), |a, b| (a - b) / dt)?,
        );
        traj.increments_l2.push(dt * increment * increment);
        traj.step_reports.push(StepSummary {
            iterations: report.iterations,
            final_energy: report.final_energy,
            residual_sup: report.residual_sup,
            converged: report.converged,
        });
        traj.steps.push(v_n);
    }
    Ok(traj)
}

/// The two time interpolants at time t: the piecewise-constant step function
/// v_{Δt}(t) = v_n on [t_{n-1}, t_n), and the q-power linear interpolant
/// ṽ_{Δt}(t) = ((t - t_{n-1})/Δt)(v_n^q - v_{n-1}^q) + v_{n-1}^q, returned
/// as the power-q nodal values themselves.
#[derive(Debug, Clone)]
pub struct Interpolants {
    pub v_step: GridFunction,
    pub v_tilde_pow: GridFunction,
}

pub fn interpolants(traj: &FdeTrajectory, t: f64) -> Result<Interpolants, FdeError> {
    let t_final = traj.t_final();
    if !(0.0..=t_final).contains(&t) {
        return Err(FdeError::Config(format!(
            "t = {t} outside [0, {t_final}]"
        )));
    }
    let n_steps = traj.n_steps();
    // Interval index n with t in [t_{n-1}, t_n); the right endpoint belongs
    // to the last interval.
    let n = ((t / traj.dt).floor() as usize + 1).min(n_steps);
    let zeta = (t - (n - 1) as f64 * traj.dt) / traj.dt;
    let prev = &traj.steps[n - 1];
    let next = &traj.steps[n];
    let q = traj.q;
    let v_tilde_pow = prev.zip_with(next, |a, b| {
        let ap = a.max(0.0).powf(q);
        let bp = b.max(0.0).powf(q);
        zeta * (bp - ap) + ap
    })?;
    Ok(Interpolants {
        v_step: next.clone(),
        v_tilde_pow,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NtkStep {
    pub t: f64,
    /// ||(v1^q(t) - v2^q(t))^+||_{L²}
    pub lhs: f64,
    /// ||(u0^q - v0^q)^+||_{L²} + Σ_{k<=n} Δt ||(h1^k - h2^k)^+||_{L²}
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NtkReport {
    pub steps: Vec<NtkStep>,
    pub max_violation: f64,
    pub holds: bool,
}

/// Parabolic L² contraction at the step times: the positive-part distance of
/// the q-powers is bounded by the initial distance plus the accumulated
/// forcing distance.
pub fn contraction_check(t1: &FdeTrajectory, t2: &FdeTrajectory) -> Result<NtkReport, FdeError> {
    if t1.grid != t2.grid || t1.n_steps() != t2.n_steps() || t1.dt != t2.dt || t1.q != t2.q {
        return Err(FdeError::Config(
            "trajectories must share grid, step count, dt and q".into(),
        ));
    }
    let q = t1.q;
    let initial = l2_norm(
        &cell_pow(&t1.steps[0], q)
            .zip_with(&cell_pow(&t2.steps[0], q), |a, b| (a - b).max(0.0))?,
    );
    let mut forcing_sum = 0.0;
    let mut steps = Vec::with_capacity(t1.n_steps());
    let mut max_violation: f64 = 0.0;
    for n in 1..=t1.n_steps() {
        forcing_sum += t1.dt
            * l2_norm(&t1.h_avg[n - 1].zip_with(&t2.h_avg[n - 1], |a, b| (a - b).max(0.0))?);
        let lhs = l2_norm(
            &cell_pow(&t1.steps[n], q)
                .zip_with(&cell_pow(&t2.steps[n], q), |a, b| (a - b).max(0.0))?,
        );
        let rhs = initial + forcing_sum;
        max_violation = max_violation.max(lhs - rhs);
        steps.push(NtkStep {
            t: n as f64 * t1.dt,
            lhs,
            rhs,
        });
    }
    let scale = 1.0
        + steps
            .iter()
            .map(|s| s.rhs.abs())
            .fold(0.0f64, f64::max);
    Ok(NtkReport {
        steps,
        max_violation,
        holds: max_violation <= 1e-6 * scale,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    /// Largest nodewise excess of the smaller trajectory over the larger.
    pub max_violation: f64,
    pub holds: bool,
}

/// Comparison principle: ordered initial data and ordered forcings propagate
/// to ordered trajectories. Errs when the preconditions fail (inconclusive).
pub fn comparison_check(
    t1: &FdeTrajectory,
    t2: &FdeTrajectory,
) -> Result<ComparisonReport, FdeError> {
    if t1.grid != t2.grid || t1.n_steps() != t2.n_steps() || t1.dt != t2.dt || t1.q != t2.q {
        return Err(FdeError::Config(
            "trajectories must share grid, step count, dt and q".into(),
        ));
    }
    let ordered_init = t1.steps[0]
        .values()
        .iter()
        .zip(t2.steps[0].values())
        .all(|(a, b)| a <= b);
    if !ordered_init {
        return Err(FdeError::Inconclusive("u0 <= v0 fails".into()));
    }
    for (n, (h1, h2)) in t1.h_avg.iter().zip(&t2.h_avg).enumerate() {
        let ordered = h1
            .values()
            .iter()
            .zip(h2.values())
            .all(|(a, b)| *a <= b + 1e-12);
        if !ordered {
            return Err(FdeError::Inconclusive(format!(
                "forcing ordering fails at step {}",
                n + 1
            )));
        }
    }
    let mut max_violation: f64 = 0.0;
    for n in 1..=t1.n_steps() {
        for (a, b) in t1.steps[n].values().iter().zip(t2.steps[n].values()) {
            max_violation = max_violation.max(a - b);
        }
    }
    Ok(ComparisonReport {
        max_violation,
        holds: max_violation <= 1e-8,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base_config(n_cells: usize, n_steps: usize) -> FdeConfig {
        let grid = Grid::uniform(0.0, 1.0, n_cells).unwrap();
        FdeConfig {
            grid,
            p: ExponentField::constant(grid, 2.0).unwrap(),
            t_final: 0.5,
            n_steps,
            q: 1.4,
            f: SourceF::Zero,
            h: Expression::parse("1").unwrap(),
            h0_floor: CellField::constant(grid, 1.0),
            v0: GridFunction::dirichlet_from_fn(grid, |x| 0.5 * x * (1.0 - x)).unwrap(),
            allow_q_up_to_p_minus: false,
            forcing_bounded_below: true,
            solver: SolveOptions::with_tol(1e-10),
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = base_config(32, 4);
        assert!(cfg.validate().is_ok());

        cfg.q = 1.6; // above the 1D cap min{1.5, p_-}
        assert!(matches!(cfg.validate(), Err(FdeError::Config(_))));
        cfg.allow_q_up_to_p_minus = true;
        assert!(cfg.validate().is_ok());

        let mut cfg = base_config(32, 4);
        cfg.forcing_bounded_below = false;
        // f = 0 needs the bounded-below waiver.
        assert!(matches!(cfg.validate(), Err(FdeError::Config(_))));

        let mut cfg = base_config(32, 4);
        cfg.f = SourceF::Power {
            c: CellField::constant(cfg.grid, 1.0),
            gamma: 2.0,
        };
        // gamma > q breaks monotonicity of f/s^{q-1}.
        assert!(matches!(cfg.validate(), Err(FdeError::Config(_))));
        cfg.f = SourceF::Power {
            c: CellField::constant(cfg.grid, 1.0),
            gamma: 1.2,
        };
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn averaging_time_independent_forcing_is_exact() {
        let grid = Grid::uniform(0.0, 1.0, 16).unwrap();
        let h = Expression::parse("2 + x").unwrap();
        let avgs = average_forcing(&h, 0.25, 4, grid).unwrap();
        for avg in &avgs {
            for (i, v) in avg.values().iter().enumerate() {
                assert_relative_eq!(*v, 2.0 + grid.center(i), max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn averaging_linear_in_time_is_exact() {
        let grid = Grid::uniform(0.0, 1.0, 8).unwrap();
        let h = Expression::parse("t").unwrap();
        let avgs = average_forcing(&h, 0.25, 4, grid).unwrap();
        let expected = [0.125, 0.375, 0.625, 0.875];
        for (avg, e) in avgs.iter().zip(expected) {
            for v in avg.values() {
                assert_relative_eq!(*v, e, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn averaging_quadrature_refinement() {
        // Composite midpoint with 16 inner points has error (dt/16)^2 / 24
        // per unit curvature, so the refinement gap crosses 1e-10 once
        // dt <= ~5e-4.
        let grid = Grid::uniform(0.0, 1.0, 8).unwrap();
        let h = Expression::parse("sin(t)*x").unwrap();
        let dt = 5e-4;
        let coarse = average_forcing_with(&h, dt, 100, grid, 16).unwrap();
        let fine = average_forcing_with(&h, dt, 100, grid, 256).unwrap();
        for (a, b) in coarse.iter().zip(&fine) {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() < 1e-10, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn jensen_bound_holds() {
        let grid = Grid::uniform(0.0, 1.0, 24).unwrap();
        for src in ["1 + t*x", "exp(-t)*(1+x)", "2 + sin(6*t) * cos(3*x)"] {
            let h = Expression::parse(src).unwrap();
            let report = jensen_check(&h, 0.125, 8, grid).unwrap();
            assert!(report.holds, "{src}: lhs {} rhs {}", report.lhs, report.rhs);
        }
    }

    #[test]
    fn single_step_equals_euler_step() {
        let cfg = base_config(48, 1);
        let traj = run_fde(&cfg).unwrap();
        assert_eq!(traj.n_steps(), 1);
        let direct = euler_step(&cfg.v0, &traj.h_avg[0], &cfg).unwrap();
        assert_eq!(
            traj.steps[1].values(),
            direct.solution.values(),
            "one-step trajectory must match a direct step"
        );
    }

    #[test]
    fn step_without_forcing_decays() {
        // With h_n = 0 and f = 0 the step problem has no source beyond the
        // previous state; for a concave (discretely superharmonic) v_prev
        // the step is a pure decay, nodewise up to the solver tolerance.
        let cfg = base_config(48, 1);
        let v_prev = GridFunction::dirichlet_from_fn(cfg.grid, |x| 0.8 * x * (1.0 - x)).unwrap();
        let h_zero = CellField::constant(cfg.grid, 0.0);
        let stepped = euler_step(&v_prev, &h_zero, &cfg).unwrap();
        assert!(stepped.converged);
        let tol = 1e-8;
        for (a, b) in stepped.solution.values().iter().zip(v_prev.values()) {
            assert!(*a <= b + tol, "decay violated: {a} vs {b}");
        }
    }

    #[test]
    fn determinism_of_steps() {
        let cfg = base_config(32, 3);
        let a = run_fde(&cfg).unwrap();
        let b = run_fde(&cfg).unwrap();
        for (x, y) in a.steps.iter().zip(&b.steps) {
            assert_eq!(x.values(), y.values());
        }
    }

    #[test]
    fn bracketing_and_positivity_hold_along_the_run() {
        let cfg = base_config(48, 8);
        let traj = run_fde(&cfg).unwrap();
        for v in &traj.steps {
            for ((x, lo), hi) in v
                .values()
                .iter()
                .zip(traj.sub.values())
                .zip(traj.sup.values())
            {
                assert!(*x >= lo - 1e-10 && *x <= hi + 1e-10);
            }
            assert!(v.values()[1..cfg.grid.n_cells()].iter().all(|&s| s > 0.0));
        }
        assert!(traj.jensen.holds);
        assert!(traj.increment_estimate().is_finite());
    }

    #[test]
    fn fixed_point_is_preserved() {
        // Stationary state: -Δ_p v = h v^{q-1} with time-independent h;
        // stepping from it reproduces it.
        let cfg = base_config(48, 1);
        let stationary_prob = EllipticProblem::new(
            cfg.grid,
            cfg.p.clone(),
            Family::Barrier {
                h_coef: cfg.h0_floor.clone(),
                q: cfg.q,
                f: SourceF::Zero,
                f_scale: 1.0,
                k_src: 0.0,
            },
        )
        .unwrap();
        let init = GridFunction::dirichlet_from_fn(cfg.grid, |x| x * (1.0 - x)).unwrap();
        let v_star = minimize(&stationary_prob, &init, &SolveOptions::with_tol(1e-10))
            .unwrap()
            .solution;
        let h_n = CellField::constant(cfg.grid, 1.0);
        let stepped = euler_step(&v_star, &h_n, &cfg).unwrap();
        let dist = stepped.solution.sup_distance(&v_star).unwrap();
        let tol = cfg.solver.resolved_tol(cfg.grid.n_cells());
        assert!(dist <= 2.0 * tol, "fixed point moved by {dist}");
    }

    #[test]
    fn stationary_data_gives_constant_trajectory() {
        let mut cfg = base_config(48, 6);
        let stationary_prob = EllipticProblem::new(
            cfg.grid,
            cfg.p.clone(),
            Family::Barrier {
                h_coef: cfg.h0_floor.clone(),
                q: cfg.q,
                f: SourceF::Zero,
                f_scale: 1.0,
                k_src: 0.0,
            },
        )
        .unwrap();
        let init = GridFunction::dirichlet_from_fn(cfg.grid, |x| x * (1.0 - x)).unwrap();
        let v_star = minimize(&stationary_prob, &init, &SolveOptions::with_tol(1e-10))
            .unwrap()
            .solution;
        cfg.v0 = v_star.clone();
        let traj = run_fde(&cfg).unwrap();
        for v in &traj.steps {
            let dist = v.sup_distance(&v_star).unwrap();
            assert!(dist <= 1e-7, "drift {dist}");
        }
    }

    #[test]
    fn interpolant_values_and_sup_bound() {
        let cfg = base_config(32, 4);
        let traj = run_fde(&cfg).unwrap();

        // At step times the interpolant hits v_n^q.
        for n in [1usize, 3] {
            let t = n as f64 * traj.dt;
            let interp = interpolants(&traj, t).unwrap();
            for (a, b) in interp
                .v_tilde_pow
                .values()
                .iter()
                .zip(traj.steps[n].values())
            {
                assert_relative_eq!(*a, b.max(0.0).powf(traj.q), max_relative = 1e-12);
            }
        }
        // At the first midpoint it is the mean of the neighbor powers.
        let interp = interpolants(&traj, 0.5 * traj.dt).unwrap();
        for ((a, v0), v1) in interp
            .v_tilde_pow
            .values()
            .iter()
            .zip(traj.steps[0].values())
            .zip(traj.steps[1].values())
        {
            let expected = 0.5 * (v0.max(0.0).powf(traj.q) + v1.max(0.0).powf(traj.q));
            assert_relative_eq!(*a, expected, max_relative = 1e-12);
        }

        // sup_t ||tilde v - v_step^q||² <= max_n ||v_n^q - v_{n-1}^q||², with
        // all powers taken nodally (the interpolant's own variables) and
        // collocated afterwards.
        let nodal_pow_cells = |v: &GridFunction| {
            v.map(|s| s.max(0.0).powf(traj.q)).unwrap().to_cells()
        };
        let mut max_step_sq: f64 = 0.0;
        for n in 1..=traj.n_steps() {
            let d = l2_norm(
                &nodal_pow_cells(&traj.steps[n])
                    .zip_with(&nodal_pow_cells(&traj.steps[n - 1]), |a, b| a - b)
                    .unwrap(),
            );
            max_step_sq = max_step_sq.max(d * d);
        }
        let samples = 40;
        for k in 0..=samples {
            let t = traj.t_final() * k as f64 / samples as f64;
            let interp = interpolants(&traj, t).unwrap();
            let step_pow = nodal_pow_cells(&interp.v_step);
            let tilde_cells = interp.v_tilde_pow.to_cells();
            let d = l2_norm(&tilde_cells.zip_with(&step_pow, |a, b| a - b).unwrap());
            assert!(
                d * d <= max_step_sq + 1e-12,
                "t = {t}: {} vs {max_step_sq}",
                d * d
            );
        }

        assert!(interpolants(&traj, -0.1).is_err());
        assert!(interpolants(&traj, traj.t_final() + 0.1).is_err());
    }

    #[test]
    fn contraction_identical_and_perturbed() {
        let cfg = base_config(40, 5);
        let t1 = run_fde(&cfg).unwrap();
        let report = contraction_check(&t1, &t1).unwrap();
        assert!(report.holds);
        assert!(report.max_violation <= 0.0);

        let mut cfg2 = cfg.clone();
        cfg2.h = Expression::parse("1 + 0.1").unwrap();
        let t2 = run_fde(&cfg2).unwrap();
        let report = contraction_check(&t2, &t1).unwrap();
        assert!(report.holds, "max violation {}", report.max_violation);
    }

    #[test]
    fn comparison_of_ordered_data() {
        let mut cfg_big = base_config(40, 5);
        cfg_big.h = Expression::parse("1.2").unwrap();
        let mut cfg_small = cfg_big.clone();
        cfg_small.h = Expression::parse("1").unwrap();
        cfg_small.v0 = cfg_big.v0.map(|v| 0.5 * v).unwrap();
        let t_small = run_fde(&cfg_small).unwrap();
        let t_big = run_fde(&cfg_big).unwrap();

        // Equal data compare trivially.
        assert!(comparison_check(&t_big, &t_big).unwrap().holds);

        let report = comparison_check(&t_small, &t_big).unwrap();
        assert!(report.holds, "violation {}", report.max_violation);

        // Contraction with ordered data: the positive part vanishes.
        let ntk = contraction_check(&t_small, &t_big).unwrap();
        for s in &ntk.steps {
            assert!(s.lhs <= 1e-8, "positive part {} at t = {}", s.lhs, s.t);
        }

        // Passing the pair in the wrong order violates the precondition.
        assert!(matches!(
            comparison_check(&t_big, &t_small),
            Err(FdeError::Inconclusive(_))
        ));

        // Reversing both the data and the forcing ordering mirrors the
        // conclusion: the formerly larger run now sits below.
        let mut cfg_rev_small = cfg_big.clone();
        cfg_rev_small.h = Expression::parse("1").unwrap();
        let mut cfg_rev_big = cfg_big.clone();
        cfg_rev_big.h = Expression::parse("1.2").unwrap();
        cfg_rev_big.v0 = cfg_big.v0.map(|v| 1.5 * v).unwrap();
        let r_small = run_fde(&cfg_rev_small).unwrap();
        let r_big = run_fde(&cfg_rev_big).unwrap();
        assert!(comparison_check(&r_small, &r_big).unwrap().holds);
    }

    #[test]
    fn halving_dt_self_convergence() {
        // The scheme converges as Δt -> 0; the ratio of successive L²
        // differences at shared times is recorded (no rate is asserted, the
        // band is a harness convention).
        let mut diffs = Vec::new();
        let mut prev: Option<FdeTrajectory> = None;
        for n_steps in [4usize, 8, 16] {
            let cfg = {
                let mut c = base_config(40, n_steps);
                c.h = Expression::parse("1 + sin(3*t)*x").unwrap();
                c.h0_floor = CellField::constant(c.grid, 0.5);
                c
            };
            let traj = run_fde(&cfg).unwrap();
            if let Some(p) = &prev {
                // Compare at the coarser trajectory's final time.
                let d = l2_norm(
                    &cell_pow(p.steps.last().unwrap(), p.q)
                        .zip_with(&cell_pow(traj.steps.last().unwrap(), traj.q), |a, b| a - b)
                        .unwrap(),
                );
                diffs.push(d);
            }
            prev = Some(traj);
        }
        assert!(diffs[1] < diffs[0], "refinement must shrink differences");
        // The ratio band is reported, not asserted: no rate is available.
        println!("self-convergence ratio: {}", diffs[0] / diffs[1]);
    }
}

//! TOML configuration documents and their translation into core objects.
//!
//! Coefficients are string-valued expressions, validated up front: a config
//! is either fully usable or rejected with the complete list of violations,
//! each naming the failing hypothesis.

use serde::Deserialize;
use varexp_core::elliptic::{EllipticProblem, Family, SolveOptions, SourceF};
use varexp_core::expr::Expression;
use varexp_core::fde::FdeConfig;
use varexp_core::grid::{CellField, Grid, GridFunction};
use varexp_core::opkernel::OperatorKernel;
use varexp_core::vxspace::ExponentField;

#[derive(Debug)]
pub struct ConfigError(pub Vec<String>);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "configuration invalid:")?;
        for v in &self.0 {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Deserialize)]
pub struct DomainSection {
    pub a: f64,
    pub b: f64,
    pub n_cells: usize,
}

#[derive(Debug, Clone, Deserialize, Default)]
pub struct SolverSection {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub step0: Option<f64>,
}

impl SolverSection {
    pub fn to_options(&self) -> SolveOptions {
        let defaults = SolveOptions::default();
        SolveOptions {
            tol: self.tol,
            max_iter: self.max_iter.unwrap_or(defaults.max_iter),
            step0: self.step0.unwrap_or(defaults.step0),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct SourceSection {
    pub kind: String,
    pub c: Option<String>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PiconeConfig {
    pub domain: DomainSection,
    pub p: String,
    #[serde(default = "default_kernel")]
    pub kernel: String,
    pub v: String,
    pub v0: String,
    pub r: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default = "default_rel_floor")]
    pub rel_floor: f64,
    #[serde(default)]
    pub h2_coeff: f64,
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DiazSaaConfig {
    pub domain: DomainSection,
    pub p: String,
    #[serde(default = "default_kernel")]
    pub kernel: String,
    pub w1: String,
    pub w2: String,
    pub r: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct NormsConfig {
    pub domain: DomainSection,
    pub p: String,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Optional fixed field checked in addition to the randomized sweep.
    pub u: Option<String>,
    #[serde(default = "default_amp_lo")]
    pub amp_lo: f64,
    #[serde(default = "default_amp_hi")]
    pub amp_hi: f64,
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct EllipticConfig {
    pub domain: DomainSection,
    pub p: String,
    pub family: String,
    #[serde(default)]
    pub coefficients: toml::Table,
    pub source: Option<SourceSection>,
    #[serde(default)]
    pub solver: SolverSection,
    /// Initial state expression; by default a bump scaled to negative energy.
    pub init: Option<String>,
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct FdeFileConfig {
    pub domain: DomainSection,
    pub p: String,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub n_steps: usize,
    pub q: f64,
    pub h: String,
    pub h0: String,
    pub v0: String,
    pub source: Option<SourceSection>,
    #[serde(default)]
    pub allow_q_up_to_p_minus: bool,
    #[serde(default)]
    pub forcing_bounded_below: bool,
    #[serde(default)]
    pub solver: SolverSection,
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct KernelProbeConfig {
    pub domain: DomainSection,
    pub p: String,
    #[serde(default = "default_kernel")]
    pub kernel: String,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<String>,
}

fn default_kernel() -> String {
    "plap".into()
}

fn default_floor() -> f64 {
    1e-8
}

fn default_rel_floor() -> f64 {
    1e-9
}

fn default_trials() -> usize {
    200
}

fn default_amp_lo() -> f64 {
    1e-2
}

fn default_amp_hi() -> f64 {
    1e2
}

fn default_samples() -> usize {
    1000
}

pub fn load<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(vec![format!("cannot read {}: {e}", path.display())]))?;
    toml::from_str(&text).map_err(|e| ConfigError(vec![format!("{}: {e}", path.display())]))
}

/// Validation context collecting every violation before failing.
pub struct Check {
    violations: Vec<String>,
}

impl Check {
    pub fn new() -> Check {
        Check {
            violations: Vec::new(),
        }
    }

    pub fn fail(&mut self, msg: impl Into<String>) {
        self.violations.push(msg.into());
    }

    pub fn finish(self) -> Result<(), ConfigError> {
        if self.violations.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(self.violations))
        }
    }

    pub fn grid(&mut self, d: &DomainSection) -> Option<Grid> {
        match Grid::uniform(d.a, d.b, d.n_cells) {
            Ok(g) => Some(g),
            Err(e) => {
                self.fail(e.to_string());
                None
            }
        }
    }

    pub fn expression(&mut self, name: &str, src: &str) -> Option<Expression> {
        match Expression::parse(src) {
            Ok(e) => Some(e),
            Err(e) => {
                self.fail(format!("{name}: {e}"));
                None
            }
        }
    }

    /// Parse and sample a time-independent coefficient at cell centers.
    pub fn cell_field(&mut self, name: &str, src: &str, grid: Grid) -> Option<CellField> {
        let expr = self.expression(name, src)?;
        if expr.uses_t() {
            self.fail(format!("{name}: must not depend on t"));
            return None;
        }
        let mut failure = None;
        let values: Vec<f64> = grid
            .centers()
            .map(|x| match expr.eval_x(x) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert_with(|| format!("{name}: {e} at x = {x}"));
                    f64::NAN
                }
            })
            .collect();
        if let Some(msg) = failure {
            self.fail(msg);
            return None;
        }
        match CellField::new(grid, values) {
            Ok(f) => Some(f),
            Err(e) => {
                self.fail(format!("{name}: {e}"));
                None
            }
        }
    }

    pub fn exponent_field(&mut self, name: &str, src: &str, grid: Grid) -> Option<ExponentField> {
        let cells = self.cell_field(name, src, grid)?;
        match ExponentField::from_cells(cells) {
            Ok(p) => Some(p),
            Err(e) => {
                self.fail(format!("{name}: {e}"));
                None
            }
        }
    }

    /// Sample a nodal field (no trace constraint).
    pub fn node_field(&mut self, name: &str, src: &str, grid: Grid) -> Option<GridFunction> {
        let expr = self.expression(name, src)?;
        if expr.uses_t() {
            self.fail(format!("{name}: must not depend on t"));
            return None;
        }
        let mut failure = None;
        let values: Vec<f64> = grid
            .nodes()
            .map(|x| match expr.eval_x(x) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert_with(|| format!("{name}: {e} at x = {x}"));
                    f64::NAN
                }
            })
            .collect();
        if let Some(msg) = failure {
            self.fail(msg);
            return None;
        }
        match GridFunction::new(grid, values) {
            Ok(f) => Some(f),
            Err(e) => {
                self.fail(format!("{name}: {e}"));
                None
            }
        }
    }

    /// Sample a zero-trace field; the expression must vanish at both ends.
    pub fn dirichlet_field(&mut self, name: &str, src: &str, grid: Grid) -> Option<GridFunction> {
        let free = self.node_field(name, src, grid)?;
        let scale = 1.0 + free.max().abs().max(free.min().abs());
        let left = free.get(0);
        let right = free.get(grid.n_cells());
        if left.abs() > 1e-9 * scale || right.abs() > 1e-9 * scale {
            self.fail(format!(
                "{name}: zero trace violated (boundary values {left}, {right})"
            ));
            return None;
        }
        let mut values = free.values().to_vec();
        values[0] = 0.0;
        values[grid.n_cells()] = 0.0;
        match GridFunction::dirichlet(grid, values) {
            Ok(f) => Some(f),
            Err(e) => {
                self.fail(format!("{name}: {e}"));
                None
            }
        }
    }

    pub fn source(&mut self, section: &Option<SourceSection>, grid: Grid) -> Option<SourceF> {
        let Some(section) = section else {
            return Some(SourceF::Zero);
        };
        match section.kind.as_str() {
            "zero" => Some(SourceF::Zero),
            "constant" => {
                let c = section.c.as_deref().unwrap_or("0");
                let c = self.cell_field("source.c", c, grid)?;
                Some(SourceF::Constant { c })
            }
            "power" => {
                let c = section.c.as_deref().unwrap_or("0");
                let c = self.cell_field("source.c", c, grid)?;
                let Some(gamma) = section.gamma else {
                    self.fail("source.gamma required for kind = \"power\"");
                    return None;
                };
                Some(SourceF::Power { c, gamma })
            }
            other => {
                self.fail(format!(
                    "source.kind must be one of zero/constant/power, got {other}"
                ));
                None
            }
        }
    }

    pub fn kernel(&mut self, name: &str, p: &ExponentField) -> Option<OperatorKernel> {
        match name {
            "plap" => Some(OperatorKernel::p_laplacian(p.clone())),
            other => {
                self.fail(format!("unknown kernel {other:?} (built-ins: plap)"));
                None
            }
        }
    }

    fn coeff_f64(&mut self, table: &toml::Table, key: &str) -> Option<f64> {
        match table.get(key) {
            Some(v) => match v.as_float().or_else(|| v.as_integer().map(|i| i as f64)) {
                Some(x) => Some(x),
                None => {
                    self.fail(format!("coefficients.{key} must be a number"));
                    None
                }
            },
            None => {
                self.fail(format!("coefficients.{key} missing"));
                None
            }
        }
    }

    fn coeff_str<'t>(&mut self, table: &'t toml::Table, key: &str) -> Option<&'t str> {
        match table.get(key) {
            Some(v) => match v.as_str() {
                Some(s) => Some(s),
                None => {
                    self.fail(format!("coefficients.{key} must be an expression string"));
                    None
                }
            },
            None => {
                self.fail(format!("coefficients.{key} missing"));
                None
            }
        }
    }
}

impl Default for Check {
    fn default() -> Self {
        Check::new()
    }
}

pub struct EllipticSetup {
    pub problem: EllipticProblem,
    pub options: SolveOptions,
    pub init: Option<GridFunction>,
}

pub fn build_elliptic(cfg: &EllipticConfig) -> Result<EllipticSetup, ConfigError> {
    let mut check = Check::new();
    let grid = check.grid(&cfg.domain);
    let p = grid.and_then(|g| check.exponent_field("p", &cfg.p, g));

    let family = match (grid, &p) {
        (Some(g), Some(_)) => match cfg.family.as_str() {
            "torsion" => check
                .coeff_f64(&cfg.coefficients, "K")
                .map(|k| Family::Torsion { k }),
            "reaction-pq" => {
                let h = check
                    .coeff_str(&cfg.coefficients, "h")
                    .map(|s| s.to_owned())
                    .and_then(|s| check.cell_field("coefficients.h", &s, g));
                let l = check
                    .coeff_str(&cfg.coefficients, "l")
                    .map(|s| s.to_owned())
                    .and_then(|s| check.cell_field("coefficients.l", &s, g));
                let q = check
                    .coeff_str(&cfg.coefficients, "q")
                    .map(|s| s.to_owned())
                    .and_then(|s| check.exponent_field("coefficients.q", &s, g));
                let s = check
                    .coeff_str(&cfg.coefficients, "s")
                    .map(|v| v.to_owned())
                    .and_then(|v| check.exponent_field("coefficients.s", &v, g));
                match (h, l, q, s) {
                    (Some(h), Some(l), Some(q), Some(s)) => Some(Family::ReactionPQ { h, l, q, s }),
                    _ => None,
                }
            }
            "fde-step" => {
                let lambda = check.coeff_f64(&cfg.coefficients, "lambda");
                let q = check.coeff_f64(&cfg.coefficients, "q");
                let h0 = check
                    .coeff_str(&cfg.coefficients, "h0")
                    .map(|s| s.to_owned())
                    .and_then(|s| check.cell_field("coefficients.h0", &s, g));
                let f = check.source(&cfg.source, g);
                match (lambda, q, h0, f) {
                    (Some(lambda), Some(q), Some(h0), Some(f)) => {
                        Some(Family::FdeStep { lambda, q, h0, f })
                    }
                    _ => None,
                }
            }
            "eps-perturbed" => {
                let eps = check.coeff_f64(&cfg.coefficients, "eps");
                let m = check.coeff_f64(&cfg.coefficients, "m");
                let src = check.source(&cfg.source, g);
                match (eps, m, src) {
                    (Some(eps), Some(m), Some(gsrc)) => Some(Family::EpsPerturbed {
                        eps,
                        m,
                        g: gsrc,
                    }),
                    _ => None,
                }
            }
            other => {
                check.fail(format!(
                    "family must be one of torsion/reaction-pq/fde-step/eps-perturbed, got {other}"
                ));
                None
            }
        },
        _ => None,
    };

    let init = match (&cfg.init, grid) {
        (Some(src), Some(g)) => check.dirichlet_field("init", src, g),
        _ => None,
    };

    let problem = match (grid, p, family) {
        (Some(g), Some(p), Some(f)) => match EllipticProblem::new(g, p, f) {
            Ok(prob) => Some(prob),
            Err(e) => {
                check.fail(e.to_string());
                None
            }
        },
        _ => None,
    };

    check.finish()?;
    Ok(EllipticSetup {
        problem: problem.expect("validated"),
        options: cfg.solver.to_options(),
        init,
    })
}

pub fn build_fde(cfg: &FdeFileConfig) -> Result<FdeConfig, ConfigError> {
    let mut check = Check::new();
    let grid = check.grid(&cfg.domain);
    let p = grid.and_then(|g| check.exponent_field("p", &cfg.p, g));
    let h = check.expression("h", &cfg.h);
    let h0 = grid.and_then(|g| check.cell_field("h0", &cfg.h0, g));
    let v0 = grid.and_then(|g| check.dirichlet_field("v0", &cfg.v0, g));
    let f = grid.and_then(|g| check.source(&cfg.source, g));

    let built = match (grid, p, h, h0, v0, f) {
        (Some(grid), Some(p), Some(h), Some(h0), Some(v0), Some(f)) => {
            let config = FdeConfig {
                grid,
                p,
                t_final: cfg.t_final,
                n_steps: cfg.n_steps,
                q: cfg.q,
                f,
                h,
                h0_floor: h0,
                v0,
                allow_q_up_to_p_minus: cfg.allow_q_up_to_p_minus,
                forcing_bounded_below: cfg.forcing_bounded_below,
                solver: cfg.solver.to_options(),
            };
            if let Err(e) = config.validate() {
                check.fail(e.to_string());
                None
            } else {
                Some(config)
            }
        }
        _ => None,
    };
    check.finish()?;
    Ok(built.expect("validated"))
}

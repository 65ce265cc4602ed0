//! p(x)-homogeneous operator kernels A(x, ξ) with their ξ-gradients, the
//! r-homogenized kernel N_r = A^{r/p(x)}, anisotropic component lists, and
//! sampling probes for the structural hypotheses (positive homogeneity,
//! strict convexity, symmetry, the Euler identity and gradient consistency).
//!
//! The built-in kernel is the p(x)-Laplacian integrand A(x, ξ) = |ξ|^{p(x)}
//! with ∂_ξA = p(x)|ξ|^{p(x)-2} ξ, extended by 0 at ξ = 0 (the limit value,
//! valid since p_- > 1). Solvers only accept kernels whose gradients are
//! supplied analytically; probes exist to validate them.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::vxspace::ExponentField;

pub type XiFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KernelError {
    #[error("N_r requires r >= 1, got {0}")]
    HomogeneityOrder(f64),
}

/// An operator kernel: the integrand A(x, ξ), its ξ-derivative, and the
/// declared variable exponent of homogeneity.
#[derive(Clone)]
pub struct OperatorKernel {
    name: String,
    exponent: ExponentField,
    a: XiFn,
    da: XiFn,
}

impl std::fmt::Debug for OperatorKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorKernel")
            .field("name", &self.name)
            .field("p_minus", &self.exponent.p_minus())
            .field("p_plus", &self.exponent.p_plus())
            .finish()
    }
}

impl OperatorKernel {
    /// The built-in "plap" kernel A(x, ξ) = |ξ|^{p(x)}.
    pub fn p_laplacian(exponent: ExponentField) -> OperatorKernel {
        let pa = exponent.clone();
        let pd = exponent.clone();
        OperatorKernel {
            name: "plap".into(),
            exponent,
            a: Arc::new(move |x, xi: f64| xi.abs().powf(pa.at_x(x))),
            da: Arc::new(move |x, xi: f64| {
                if xi == 0.0 {
                    0.0
                } else {
                    let p = pd.at_x(x);
                    p * xi.abs().powf(p - 2.0) * xi
                }
            }),
        }
    }

    /// Kernel from user-supplied closures; used to probe deliberately broken
    /// or exotic kernels.
    pub fn from_fns(name: &str, exponent: ExponentField, a: XiFn, da: XiFn) -> OperatorKernel {
        OperatorKernel {
            name: name.into(),
            exponent,
            a,
            da,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn exponent(&self) -> &ExponentField {
        &self.exponent
    }

    /// A(x, ξ).
    pub fn eval(&self, x: f64, xi: f64) -> f64 {
        (self.a)(x, xi)
    }

    /// ∂_ξ A(x, ξ).
    pub fn grad(&self, x: f64, xi: f64) -> f64 {
        (self.da)(x, xi)
    }

    /// a(x, ξ) = ∂_ξ A(x, ξ) / p(x); for "plap" this is |ξ|^{p-2} ξ.
    pub fn flux(&self, x: f64, xi: f64) -> f64 {
        self.grad(x, xi) / self.exponent.at_x(x)
    }

    /// Homogenized kernel N_r(x, ξ) = A(x, ξ)^{r/p(x)}, positively
    /// r-homogeneous in ξ. Requires r >= 1.
    pub fn nr(&self, x: f64, xi: f64, r: f64) -> Result<f64, KernelError> {
        if !(r >= 1.0) {
            return Err(KernelError::HomogeneityOrder(r));
        }
        Ok(self.eval(x, xi).powf(r / self.exponent.at_x(x)))
    }
}

/// Anisotropic operator: one scalar kernel per coordinate direction, each
/// with its own exponent field.
#[derive(Debug, Clone)]
pub struct AnisoKernel {
    pub components: Vec<OperatorKernel>,
}

impl AnisoKernel {
    pub fn new(components: Vec<OperatorKernel>) -> AnisoKernel {
        AnisoKernel { components }
    }

    /// Smallest p_i^- over the components; the admissible range of r.
    pub fn min_p_minus(&self) -> f64 {
        self.components
            .iter()
            .map(|k| k.exponent().p_minus())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub kernel: String,
    pub probe: String,
    pub samples: usize,
    /// Largest normalized violation seen; the probe holds when this stays
    /// under the probe's tolerance.
    pub max_violation: f64,
    /// Smallest strict-convexity gap over off-ray sample pairs, when the
    /// probe measures one.
    pub strict_gap: Option<f64>,
    /// Empirical bound for |∂(a)/∂ξ| / |ξ|^{p(x)-2}, when estimated.
    pub lambda_estimate: Option<f64>,
    pub holds: bool,
}

fn sample_x(rng: &mut ChaCha8Rng, k: &OperatorKernel) -> f64 {
    let grid = k.exponent().grid();
    rng.gen_range(grid.a()..grid.b())
}

/// (A1): A(x, tξ) = t^{p(x)} A(x, ξ) for t >= 0, including A(x, 0) = 0.
pub fn homogeneity_probe(k: &OperatorKernel, samples: usize, seed: u64) -> ProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_violation: f64 = 0.0;
    for _ in 0..samples {
        let x = sample_x(&mut rng, k);
        let xi: f64 = rng.gen_range(-3.0..3.0);
        let t = rng.gen_range(0.0..4.0);
        let p = k.exponent().at_x(x);
        let lhs = k.eval(x, t * xi);
        let rhs = t.powf(p) * k.eval(x, xi);
        max_violation = max_violation.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
        // t = 0 edge: positive homogeneity forces A(x, 0) = 0.
        let at_zero = k.eval(x, 0.0).abs();
        max_violation = max_violation.max(at_zero / (1.0 + at_zero));
    }
    ProbeReport {
        kernel: k.name().into(),
        probe: "homogeneity".into(),
        samples,
        max_violation,
        strict_gap: None,
        lambda_estimate: None,
        holds: max_violation <= 1e-9,
    }
}

/// (A2): midpoint convexity of ξ ↦ A(x, ξ), with the strictness gap measured
/// on pairs that do not lie on a common ray (in 1D: opposite signs).
pub fn convexity_probe(k: &OperatorKernel, samples: usize, seed: u64) -> ProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_violation: f64 = 0.0;
    let mut strict_gap = f64::INFINITY;
    for _ in 0..samples {
        let x = sample_x(&mut rng, k);
        let xi1: f64 = rng.gen_range(-3.0..3.0);
        let xi2: f64 = rng.gen_range(-3.0..3.0);
        if (xi1 - xi2).abs() < 1e-6 {
            continue;
        }
        let theta = rng.gen_range(0.05..0.95);
        let mid = k.eval(x, theta * xi1 + (1.0 - theta) * xi2);
        let chord = theta * k.eval(x, xi1) + (1.0 - theta) * k.eval(x, xi2);
        let scale = 1.0 + chord.abs();
        max_violation = max_violation.max((mid - chord) / scale);
        // Off-ray pair: strict inequality expected.
        if xi1 * xi2 < 0.0 && xi1.abs() > 0.1 && xi2.abs() > 0.1 && (0.25..=0.75).contains(&theta)
        {
            strict_gap = strict_gap.min((chord - mid) / scale);
        }
    }
    let strict_gap = (strict_gap.is_finite()).then_some(strict_gap);
    ProbeReport {
        kernel: k.name().into(),
        probe: "convexity".into(),
        samples,
        max_violation,
        strict_gap,
        lambda_estimate: None,
        holds: max_violation <= 1e-9 && strict_gap.is_none_or(|g| g > 0.0),
    }
}

/// Central finite differences of A in ξ against the supplied gradient,
/// excluding a neighborhood of ξ = 0 where p < 2 makes the derivative
/// singular. Also estimates the constant Λ in |∂a/∂ξ| <= Λ |ξ|^{p(x)-2}.
pub fn grad_consistency(k: &OperatorKernel, samples: usize, seed: u64) -> ProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_violation: f64 = 0.0;
    let mut lambda: f64 = 0.0;
    for _ in 0..samples {
        let x = sample_x(&mut rng, k);
        let xi: f64 = rng.gen_range(-3.0..3.0);
        if xi.abs() < 1e-4 {
            continue;
        }
        let step = 1e-6 * (1.0 + xi.abs());
        let fd = (k.eval(x, xi + step) - k.eval(x, xi - step)) / (2.0 * step);
        let analytic = k.grad(x, xi);
        max_violation = max_violation.max((fd - analytic).abs() / (1.0 + analytic.abs()));

        let p = k.exponent().at_x(x);
        let da_dxi = (k.flux(x, xi + step) - k.flux(x, xi - step)) / (2.0 * step);
        let denom = xi.abs().powf(p - 2.0);
        if denom > 0.0 {
            lambda = lambda.max(da_dxi.abs() / denom);
        }
    }
    ProbeReport {
        kernel: k.name().into(),
        probe: "grad_consistency".into(),
        samples,
        max_violation,
        strict_gap: None,
        lambda_estimate: Some(lambda),
        holds: max_violation <= 1e-5,
    }
}

/// Euler identity a(x, ξ) ξ = A(x, ξ), a consequence of p(x)-homogeneity.
pub fn euler_identity_probe(k: &OperatorKernel, samples: usize, seed: u64) -> ProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_violation: f64 = 0.0;
    for _ in 0..samples {
        let x = sample_x(&mut rng, k);
        let xi: f64 = rng.gen_range(-3.0..3.0);
        let lhs = k.flux(x, xi) * xi;
        let rhs = k.eval(x, xi);
        max_violation = max_violation.max((lhs - rhs).abs() / (1.0 + rhs.abs()));
    }
    ProbeReport {
        kernel: k.name().into(),
        probe: "euler_identity".into(),
        samples,
        max_violation,
        strict_gap: None,
        lambda_estimate: None,
        holds: max_violation <= 1e-10,
    }
}

/// Symmetry A(x, ξ) = A(x, -ξ).
pub fn symmetry_probe(k: &OperatorKernel, samples: usize, seed: u64) -> ProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_violation: f64 = 0.0;
    for _ in 0..samples {
        let x = sample_x(&mut rng, k);
        let xi: f64 = rng.gen_range(-3.0..3.0);
        let lhs = k.eval(x, xi);
        let rhs = k.eval(x, -xi);
        max_violation = max_violation.max((lhs - rhs).abs() / (1.0 + rhs.abs()));
    }
    ProbeReport {
        kernel: k.name().into(),
        probe: "symmetry".into(),
        samples,
        max_violation,
        strict_gap: None,
        lambda_estimate: None,
        holds: max_violation <= 1e-12,
    }
}

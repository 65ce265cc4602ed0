//! Seeded generators for randomized sweeps: smooth positive fields, exponent
//! fields in a prescribed range, zero-trace bumps.
//!
//! All draws come from a ChaCha stream seeded explicitly, so every sweep is
//! reproducible from its seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{CellField, Grid, GridFunction};
use crate::vxspace::ExponentField;

pub struct Synth {
    rng: ChaCha8Rng,
}

impl Synth {
    pub fn new(seed: u64) -> Synth {
        Synth {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    pub fn uniform_usize(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.gen_range(lo..hi)
    }

    /// Low-frequency profile with values in [0, 1]: a random trig series with
    /// 1/k^2 decay, shifted and rescaled onto the unit range.
    fn profile(&mut self, modes: usize) -> impl Fn(f64, f64, f64) -> f64 {
        let coeffs: Vec<(f64, f64)> = (1..=modes)
            .map(|k| {
                let a = self.uniform(-1.0, 1.0) / (k * k) as f64;
                let phase = self.uniform(0.0, std::f64::consts::TAU);
                (a, phase)
            })
            .collect();
        // Sum of |a_k| bounds the oscillation, which normalizes into [0, 1].
        let bound: f64 = coeffs.iter().map(|(a, _)| a.abs()).sum::<f64>().max(1e-9);
        move |x, a, b| {
            let s = (x - a) / (b - a);
            let mut v = 0.0;
            for (k, (amp, phase)) in coeffs.iter().enumerate() {
                v += amp * (std::f64::consts::TAU * (k + 1) as f64 * s + phase).sin();
            }
            0.5 + 0.5 * v / bound
        }
    }

    /// Smooth cell field with values in [lo, hi].
    pub fn cell_field(&mut self, grid: Grid, lo: f64, hi: f64) -> CellField {
        let profile = self.profile(4);
        CellField::from_fn(grid, |m| lo + (hi - lo) * profile(m, grid.a(), grid.b()))
            .expect("profile is finite")
    }

    /// Exponent field with samples in [lo, hi]; requires lo > 1.
    pub fn exponent_field(&mut self, grid: Grid, lo: f64, hi: f64) -> ExponentField {
        assert!(lo > 1.0, "exponent range must stay above 1");
        let cells = self.cell_field(grid, lo, hi);
        ExponentField::from_cells(cells).expect("range keeps the exponent admissible")
    }

    /// Smooth nodal field with values in [lo, hi] (no trace constraint).
    pub fn node_field(&mut self, grid: Grid, lo: f64, hi: f64) -> GridFunction {
        let profile = self.profile(4);
        GridFunction::from_fn(grid, |x| lo + (hi - lo) * profile(x, grid.a(), grid.b()))
            .expect("profile is finite")
    }

    /// Zero-trace function, strictly positive in the interior: a parabola-like
    /// bump times a profile bounded away from zero, scaled to max amplitude.
    pub fn dirichlet_bump(&mut self, grid: Grid, amplitude: f64) -> GridFunction {
        let profile = self.profile(3);
        let a = grid.a();
        let b = grid.b();
        GridFunction::dirichlet_from_fn(grid, |x| {
            let s = (x - a) / (b - a);
            amplitude * 4.0 * s * (1.0 - s) * (0.25 + 0.75 * profile(x, a, b))
        })
        .expect("bump vanishes at the boundary")
    }
}

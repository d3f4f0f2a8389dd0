//! Horizontal convolution-by-layers: a compactly supported bump kernel
//! applied along `z` only.

use crate::error::{Error, Result};
use crate::grid::{BoundaryFunction, Grid, ScalarField};

/// Standard bump `exp(-1 / (1 - s^2))` on `|s| < 1`.
fn bump(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MollifierKernel {
    pub kappa: f64,
    pub dz: f64,
    /// `weights[m + support_halfwidth]` is the kernel at offset `m dz`.
    pub weights: Vec<f64>,
    pub support_halfwidth: usize,
}

impl MollifierKernel {
    /// Samples the dilated bump on the grid and renormalizes so that
    /// `sum(weights) * dz == 1`.
    pub fn new(kappa: f64, grid: &Grid) -> Result<Self> {
        if !(kappa > 0.0) || kappa >= grid.l / 2.0 || !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mollifier width kappa = {kappa} must lie in (0, L/2 = {})",
                grid.l / 2.0
            )));
        }
        let dz = grid.dz;
        let half = (kappa / dz + 1e-9).floor() as usize;
        let mut weights: Vec<f64> = (-(half as isize)..=half as isize)
            .map(|m| bump(m as f64 * dz / kappa))
            .collect();
        let mass: f64 = weights.iter().sum::<f64>() * dz;
        for w in &mut weights {
            *w /= mass;
        }
        Ok(MollifierKernel {
            kappa,
            dz,
            weights,
            support_halfwidth: half,
        })
    }

    pub fn weight(&self, m: isize) -> f64 {
        let idx = m + self.support_halfwidth as isize;
        if idx < 0 || idx as usize >= self.weights.len() {
            0.0
        } else {
            self.weights[idx as usize]
        }
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum::<f64>() * self.dz
    }

    /// Fourier multiplier of the discrete kernel for the harmonic `e^{ikz}`.
    pub fn multiplier(&self, k: f64) -> f64 {
        let h = self.support_halfwidth as isize;
        (-h..=h)
            .map(|m| self.weight(m) * (k * m as f64 * self.dz).cos())
            .sum::<f64>()
            * self.dz
    }

    fn convolve_row(&self, row: &[f64], out: &mut [f64]) {
        let n = row.len() as isize;
        let h = self.support_halfwidth as isize;
        for j in 0..n {
            let mut acc = 0.0;
            for m in -h..=h {
                acc += self.weights[(m + h) as usize] * row[(j - m).rem_euclid(n) as usize];
            }
            out[j as usize] = acc * self.dz;
        }
    }

    pub fn apply(&self, f: &BoundaryFunction) -> BoundaryFunction {
        let mut out = vec![0.0; f.values.len()];
        self.convolve_row(&f.values, &mut out);
        BoundaryFunction { values: out }
    }

    /// Two passes, `Lambda_kappa^2`.
    pub fn apply_twice(&self, f: &BoundaryFunction) -> BoundaryFunction {
        self.apply(&self.apply(f))
    }

    /// Row-by-row convolution in `z`; `r` is untouched.
    pub fn apply_field(&self, grid: &Grid, f: &ScalarField) -> ScalarField {
        let mut out = vec![0.0; f.values.len()];
        for (src, dst) in f.values.chunks(grid.nz).zip(out.chunks_mut(grid.nz)) {
            self.convolve_row(src, dst);
        }
        ScalarField {
            values: out,
            parity: f.parity,
        }
    }

    /// `[Lambda, h] g = Lambda(h g) - h Lambda(g)`.
    pub fn commutator(&self, h: &BoundaryFunction, g: &BoundaryFunction) -> BoundaryFunction {
        let hg = h * g;
        let lhs = self.apply(&hg);
        let lg = self.apply(g);
        &lhs - &(h * &lg)
    }
}

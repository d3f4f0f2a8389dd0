//! Boundary-value solvers on the reference cylinder.
//!
//! All three operators are assembled from one symmetric energy form
//!
//! ```text
//! a(u, u) = sum_faces  W E_11 (D_r u)^2 + W E_22 (D_z u)^2
//!         + sum_vertices 2 W E_12 (D_r u)(D_z u)
//! ```
//!
//! discretized on the cell-centered grid, with the Dirichlet data at
//! `r = R0` entering through the outermost half-cell face. The flat
//! Laplacian uses `W = 1` and a zero value at the axis (odd extension); the
//! cylindrical Laplacian uses `W = r` with zero flux through the axis; the
//! pressure operator uses `W = R^kappa` and `E^kappa`. The resulting
//! matrices are symmetric positive definite and are solved with
//! preconditioned conjugate gradients. The preconditioner is the exact
//! inverse of the separable (`E = I`) operator, applied with an FFT in `z`
//! and a tridiagonal solve per mode.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{BoundaryFunction, Grid, Parity, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EllipticKind {
    FlatLaplace,
    CylHarmonic,
    Pressure,
}

/// Matrix-free form of the symmetric stiffness matrix.
#[derive(Debug, Clone)]
pub struct StiffnessOperator {
    nr: usize,
    nz: usize,
    dr: f64,
    dz: f64,
    /// `W E_11` on radial faces `f = 0..=nr` (face `f` sits between cells
    /// `f - 1` and `f`; face `nr` is the boundary half-face).
    cr: Vec<f64>,
    /// `W E_22` on axial faces between `(i, j)` and `(i, j + 1)`.
    cz: Vec<f64>,
    /// `W E_12` on vertices `(f, j + 1/2)`, `f = 1..=nr`.
    cx: Option<Vec<f64>>,
    axis_dirichlet: bool,
    /// Cell mass `W dr dz` relating the stiffness to the pointwise operator.
    mass: Vec<f64>,
}

impl StiffnessOperator {
    pub fn flat(grid: &Grid) -> Self {
        let (nr, nz) = (grid.nr, grid.nz);
        StiffnessOperator {
            nr,
            nz,
            dr: grid.dr,
            dz: grid.dz,
            cr: vec![1.0; (nr + 1) * nz],
            cz: vec![1.0; nr * nz],
            cx: None,
            axis_dirichlet: true,
            mass: vec![grid.dr * grid.dz; nr * nz],
        }
    }

    pub fn cylindrical(grid: &Grid) -> Self {
        let (nr, nz) = (grid.nr, grid.nz);
        let mut cr = vec![0.0; (nr + 1) * nz];
        for f in 0..=nr {
            let rf = f as f64 * grid.dr;
            cr[f * nz..(f + 1) * nz].iter_mut().for_each(|c| *c = rf);
        }
        let mut cz = vec![0.0; nr * nz];
        let mut mass = vec![0.0; nr * nz];
        for i in 0..nr {
            for j in 0..nz {
                cz[i * nz + j] = grid.r(i);
                mass[i * nz + j] = grid.r(i) * grid.dr * grid.dz;
            }
        }
        StiffnessOperator {
            nr,
            nz,
            dr: grid.dr,
            dz: grid.dz,
            cr,
            cz,
            cx: None,
            axis_dirichlet: false,
            mass,
        }
    }

    pub fn pressure(grid: &Grid, c: &PressureCoefficients) -> Self {
        let (nr, nz) = (grid.nr, grid.nz);
        let wk = |i: usize, j: usize| -> (f64, f64, f64, f64) {
            let k = i * nz + j;
            (c.rk.values[k], c.e11.values[k], c.e12.values[k], c.e22.values[k])
        };
        let wb = |j: usize| -> (f64, f64, f64, f64) {
            (c.rk_trace.values[j], c.e11_trace.values[j], c.e12_trace.values[j], c.e22_trace.values[j])
        };
        let mut cr = vec![0.0; (nr + 1) * nz];
        for f in 1..=nr {
            for j in 0..nz {
                let (w0, e0, _, _) = wk(f - 1, j);
                let (w1, e1, _, _) = if f < nr { wk(f, j) } else { wb(j) };
                cr[f * nz + j] = if f < nr {
                    0.5 * (w0 * e0 + w1 * e1)
                } else {
                    w1 * e1
                };
            }
        }
        let mut cz = vec![0.0; nr * nz];
        let mut mass = vec![0.0; nr * nz];
        for i in 0..nr {
            for j in 0..nz {
                let jp = (j + 1) % nz;
                let (w0, _, _, e0) = wk(i, j);
                let (w1, _, _, e1) = wk(i, jp);
                cz[i * nz + j] = 0.5 * (w0 * e0 + w1 * e1);
                mass[i * nz + j] = w0 * grid.dr * grid.dz;
            }
        }
        let mut cx = vec![0.0; nr * nz];
        for f in 1..=nr {
            for j in 0..nz {
                let jp = (j + 1) % nz;
                let (wa, _, ea, _) = wk(f - 1, j);
                let (wc, _, ec, _) = wk(f - 1, jp);
                let ((wb_, _, eb, _), (wd, _, ed, _)) = if f < nr {
                    (wk(f, j), wk(f, jp))
                } else {
                    (wb(j), wb(jp))
                };
                cx[(f - 1) * nz + j] = 0.25 * (wa * ea + wb_ * eb + wc * ec + wd * ed);
            }
        }
        StiffnessOperator {
            nr,
            nz,
            dr: grid.dr,
            dz: grid.dz,
            cr,
            cz,
            cx: Some(cx),
            axis_dirichlet: false,
            mass,
        }
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// `A [u; g]` restricted to the unknown rows.
    pub fn apply(&self, u: &[f64], g: &[f64]) -> Vec<f64> {
        let (nr, nz, dr, dz) = (self.nr, self.nz, self.dr, self.dz);
        let mut out = vec![0.0; nr * nz];
        let at = |i: usize, j: usize| if i < nr { u[i * nz + j] } else { g[j] };

        if self.axis_dirichlet {
            for j in 0..nz {
                let k = self.cr[j] * dz / (0.5 * dr);
                out[j] += k * u[j];
            }
        }
        for f in 1..=nr {
            let h = if f < nr { dr } else { 0.5 * dr };
            for j in 0..nz {
                let k = self.cr[f * nz + j] * dz / h;
                let flux = k * (at(f, j) - at(f - 1, j));
                out[(f - 1) * nz + j] -= flux;
                if f < nr {
                    out[f * nz + j] += flux;
                }
            }
        }
        for i in 0..nr {
            for j in 0..nz {
                let jp = (j + 1) % nz;
                let k = self.cz[i * nz + j] * dr / dz;
                let flux = k * (u[i * nz + jp] - u[i * nz + j]);
                out[i * nz + j] -= flux;
                out[i * nz + jp] += flux;
            }
        }
        if let Some(cx) = &self.cx {
            for f in 1..=nr {
                let h = if f < nr { dr } else { 0.5 * dr };
                let area = h * dz;
                for j in 0..nz {
                    let c = cx[(f - 1) * nz + j];
                    if c == 0.0 {
                        continue;
                    }
                    let jp = (j + 1) % nz;
                    let a = at(f - 1, j);
                    let b = at(f, j);
                    let cc = at(f - 1, jp);
                    let d = at(f, jp);
                    let d_r = ((b - a) + (d - cc)) / (2.0 * h);
                    let d_z = ((cc - a) + (d - b)) / (2.0 * dz);
                    let s = c * area;
                    let ir = 1.0 / (2.0 * h);
                    let iz = 1.0 / (2.0 * dz);
                    out[(f - 1) * nz + j] += s * (-ir * d_z - iz * d_r);
                    out[(f - 1) * nz + jp] += s * (-ir * d_z + iz * d_r);
                    if f < nr {
                        out[f * nz + j] += s * (ir * d_z - iz * d_r);
                        out[f * nz + jp] += s * (ir * d_z + iz * d_r);
                    }
                }
            }
        }
        out
    }

    /// Pointwise operator `(1/W) div(W E grad u)` with boundary data `g`.
    pub fn apply_pointwise(&self, u: &[f64], g: &[f64]) -> Vec<f64> {
        self.apply(u, g)
            .iter()
            .zip(&self.mass)
            .map(|(a, m)| -a / m)
            .collect()
    }
}

/// Exact inverse of a separable stiffness matrix (coefficients depending on
/// `r` only, no cross term) via FFT in `z` and a tridiagonal solve per mode.
pub struct SeparablePreconditioner {
    nr: usize,
    nz: usize,
    /// Radial face couplings `k_f = W_f dz / h_f` for `f = 0..=nr`.
    kr: Vec<f64>,
    /// `W_i dr / dz` per row.
    kz: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SeparablePreconditioner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SeparablePreconditioner")
            .field("nr", &self.nr)
            .field("nz", &self.nz)
            .finish()
    }
}

impl SeparablePreconditioner {
    fn new(grid: &Grid, radial_weight: impl Fn(f64) -> f64, axis_dirichlet: bool) -> Self {
        let (nr, nz) = (grid.nr, grid.nz);
        let mut kr = vec![0.0; nr + 1];
        for (f, k) in kr.iter_mut().enumerate() {
            let rf = f as f64 * grid.dr;
            let h = if f == 0 || f == nr { 0.5 * grid.dr } else { grid.dr };
            *k = radial_weight(rf) * grid.dz / h;
        }
        if !axis_dirichlet {
            kr[0] = 0.0;
        }
        let kz = (0..nr).map(|i| radial_weight(grid.r(i)) * grid.dr / grid.dz).collect();
        let mut planner = FftPlanner::new();
        SeparablePreconditioner {
            nr,
            nz,
            kr,
            kz,
            fwd: planner.plan_fft_forward(nz),
            inv: planner.plan_fft_inverse(nz),
        }
    }

    pub fn flat(grid: &Grid) -> Self {
        Self::new(grid, |_| 1.0, true)
    }

    pub fn cylindrical(grid: &Grid) -> Self {
        Self::new(grid, |r| r, false)
    }

    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        let (nr, nz) = (self.nr, self.nz);
        let mut spec: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        for row in spec.chunks_mut(nz) {
            self.fwd.process(row);
        }
        let mut c = vec![0.0; nr];
        let mut d = vec![Complex64::new(0.0, 0.0); nr];
        for m in 0..nz {
            let lam = 2.0 - 2.0 * (2.0 * std::f64::consts::PI * m as f64 / nz as f64).cos();
            // Thomas algorithm; row i couples to i - 1 through kr[i] and to
            // i + 1 through kr[i + 1].
            for i in 0..nr {
                let diag = self.kr[i] + self.kr[i + 1] + self.kz[i] * lam;
                let lower = if i > 0 { -self.kr[i] } else { 0.0 };
                let upper = if i + 1 < nr { -self.kr[i + 1] } else { 0.0 };
                let rhs = spec[i * nz + m];
                if i == 0 {
                    c[0] = upper / diag;
                    d[0] = rhs / diag;
                } else {
                    let denom = diag - lower * c[i - 1];
                    c[i] = upper / denom;
                    d[i] = (rhs - d[i - 1] * lower) / denom;
                }
            }
            for i in (0..nr).rev() {
                let x = if i + 1 < nr { d[i] - d[i + 1] * c[i] } else { d[i] };
                d[i] = x;
                spec[i * nz + m] = x;
            }
        }
        for row in spec.chunks_mut(nz) {
            self.inv.process(row);
        }
        let scale = 1.0 / nz as f64;
        spec.iter().map(|z| z.re * scale).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients on an SPD system. Converged when
/// `||b - A x|| <= tol ||b||`.
pub fn pcg(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Option<Vec<f64>>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut x = x0.unwrap_or_else(|| vec![0.0; n]);
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut res = dot(&r, &r).sqrt() / b_norm;
    if res <= tol {
        return Ok((x, SolveStats { iterations: 0, relative_residual: res }));
    }
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverFailure {
                iterations: it,
                residual: res,
            });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        res = dot(&r, &r).sqrt() / b_norm;
        if res <= tol {
            return Ok((x, SolveStats { iterations: it, relative_residual: res }));
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::SolverFailure {
        iterations: max_iter,
        residual: res,
    })
}

/// Coefficients of the pressure operator `(1/R^k) d_i (R^k E_ij d_j q)`.
#[derive(Debug, Clone)]
pub struct PressureCoefficients {
    pub rk: ScalarField,
    pub e11: ScalarField,
    pub e12: ScalarField,
    pub e22: ScalarField,
    pub rk_trace: BoundaryFunction,
    pub e11_trace: BoundaryFunction,
    pub e12_trace: BoundaryFunction,
    pub e22_trace: BoundaryFunction,
}

impl PressureCoefficients {
    /// `E = I`, `R^k = r`: the pressure operator reduces to the cylindrical
    /// Laplacian.
    pub fn identity(grid: &Grid) -> Self {
        PressureCoefficients {
            rk: grid.r_field(),
            e11: grid.constant(1.0),
            e12: grid.zeros(Parity::Odd),
            e22: grid.constant(1.0),
            rk_trace: grid.boundary_constant(grid.r0),
            e11_trace: grid.boundary_constant(1.0),
            e12_trace: grid.boundary_constant(0.0),
            e22_trace: grid.boundary_constant(1.0),
        }
    }

    /// Builds `E = J A^T A` from a smoothed cofactor matrix.
    #[allow(clippy::too_many_arguments)]
    pub fn from_cofactor(
        grid: &Grid,
        rk: &ScalarField,
        jac: &ScalarField,
        a11: &ScalarField,
        a12: &ScalarField,
        a21: &ScalarField,
        a22: &ScalarField,
    ) -> Self {
        let n = grid.len();
        let mut e11 = grid.zeros(Parity::Even);
        let mut e12 = grid.zeros(Parity::Odd);
        let mut e22 = grid.zeros(Parity::Even);
        for k in 0..n {
            let (p, q, s, t) = (a11.values[k], a12.values[k], a21.values[k], a22.values[k]);
            let j = jac.values[k];
            e11.values[k] = j * (p * p + s * s);
            e12.values[k] = j * (p * q + s * t);
            e22.values[k] = j * (q * q + t * t);
        }
        let rk_trace = grid.boundary_trace(rk);
        let e11_trace = grid.boundary_trace(&e11);
        let e12_trace = grid.boundary_trace(&e12);
        let e22_trace = grid.boundary_trace(&e22);
        PressureCoefficients {
            rk: rk.clone(),
            e11,
            e12,
            e22,
            rk_trace,
            e11_trace,
            e12_trace,
            e22_trace,
        }
    }

    /// Symmetric positive definiteness of `E` and positivity of the weight
    /// at every node.
    pub fn check_positive(&self, grid: &Grid) -> Result<()> {
        for i in 0..grid.nr {
            for j in 0..grid.nz {
                let k = grid.idx(i, j);
                let (a, b, d) = (self.e11.values[k], self.e12.values[k], self.e22.values[k]);
                if !(a > 0.0 && d > 0.0 && a * d - b * b > 0.0 && self.rk.values[k] > 0.0) {
                    return Err(Error::NonPositiveCoefficients { i, j });
                }
            }
        }
        Ok(())
    }
}

/// Owns the grid-dependent preconditioners; all solves are reentrant.
#[derive(Debug)]
pub struct EllipticSolver {
    pub grid: Grid,
    pub tol: f64,
    flat_op: StiffnessOperator,
    cyl_op: StiffnessOperator,
    flat_pc: SeparablePreconditioner,
    cyl_pc: SeparablePreconditioner,
}

impl EllipticSolver {
    pub fn new(grid: &Grid, tol: f64) -> Self {
        EllipticSolver {
            grid: *grid,
            tol,
            flat_op: StiffnessOperator::flat(grid),
            cyl_op: StiffnessOperator::cylindrical(grid),
            flat_pc: SeparablePreconditioner::flat(grid),
            cyl_pc: SeparablePreconditioner::cylindrical(grid),
        }
    }

    fn max_iter(&self) -> usize {
        10 * self.grid.len()
    }

    fn solve_dirichlet(
        &self,
        op: &StiffnessOperator,
        pc: &SeparablePreconditioner,
        source: Option<&[f64]>,
        g: &BoundaryFunction,
    ) -> Result<(Vec<f64>, SolveStats)> {
        let n = self.grid.len();
        let zeros = vec![0.0; n];
        let lift = op.apply(&zeros, &g.values);
        let mut b: Vec<f64> = lift.iter().map(|x| -x).collect();
        if let Some(f) = source {
            for k in 0..n {
                b[k] -= op.mass[k] * f[k];
            }
        }
        let zero_g = vec![0.0; self.grid.nz];
        pcg(|u| op.apply(u, &zero_g), |r| pc.apply(r), &b, None, self.tol, self.max_iter())
    }

    /// `-(d_r^2 + d_z^2) u = 0`, `u = g` on `r = R0`, `u = 0` on the axis.
    pub fn solve_flat_laplace(&self, g: &BoundaryFunction) -> Result<(ScalarField, SolveStats)> {
        let (u, stats) = self.solve_dirichlet(&self.flat_op, &self.flat_pc, None, g)?;
        Ok((ScalarField { values: u, parity: Parity::Odd }, stats))
    }

    /// `(d_r^2 + d_r / r + d_z^2) u = 0`, `u = g` on `r = R0`, regular at the axis.
    pub fn solve_cyl_harmonic(&self, g: &BoundaryFunction) -> Result<(ScalarField, SolveStats)> {
        let (u, stats) = self.solve_dirichlet(&self.cyl_op, &self.cyl_pc, None, g)?;
        Ok((ScalarField { values: u, parity: Parity::Even }, stats))
    }

    /// Discrete flat Laplacian of `u` with boundary values `g`.
    pub fn apply_flat(&self, u: &ScalarField, g: &BoundaryFunction) -> ScalarField {
        ScalarField {
            values: self.flat_op.apply_pointwise(&u.values, &g.values),
            parity: u.parity,
        }
    }

    /// Discrete cylindrical Laplacian of `u` with boundary values `g`.
    pub fn apply_cyl(&self, u: &ScalarField, g: &BoundaryFunction) -> ScalarField {
        ScalarField {
            values: self.cyl_op.apply_pointwise(&u.values, &g.values),
            parity: u.parity,
        }
    }

    /// Discrete `(1/R^k) d_i (R^k E_ij d_j q)` with boundary values `g`.
    pub fn apply_pressure(&self, coeffs: &PressureCoefficients, q: &ScalarField, g: &BoundaryFunction) -> ScalarField {
        let op = StiffnessOperator::pressure(&self.grid, coeffs);
        ScalarField {
            values: op.apply_pointwise(&q.values, &g.values),
            parity: Parity::Even,
        }
    }

    /// Solves `(1/R^k) d_i (R^k E_ij d_j q) = source`, `q = g` on `r = R0`,
    /// by splitting `q = h + q_hat` with `h` the cylindrical-harmonic
    /// extension of `g` and `q_hat` vanishing on the boundary.
    pub fn solve_pressure_source(
        &self,
        coeffs: &PressureCoefficients,
        source: &ScalarField,
        g: &BoundaryFunction,
    ) -> Result<(ScalarField, SolveStats)> {
        coeffs.check_positive(&self.grid)?;
        let op = StiffnessOperator::pressure(&self.grid, coeffs);
        let (h, _) = self.solve_cyl_harmonic(g)?;
        let lh = op.apply_pointwise(&h.values, &g.values);
        let n = self.grid.len();
        let b: Vec<f64> = (0..n).map(|k| -op.mass[k] * (source.values[k] - lh[k])).collect();
        let zero_g = vec![0.0; self.grid.nz];
        let (qhat, stats) = pcg(
            |u| op.apply(u, &zero_g),
            |r| self.cyl_pc.apply(r),
            &b,
            None,
            self.tol,
            self.max_iter(),
        )?;
        let values = h.values.iter().zip(&qhat).map(|(a, b)| a + b).collect();
        Ok((ScalarField { values, parity: Parity::Even }, stats))
    }

    /// Pressure solve with sources `G1 + b0 . grad G2`.
    pub fn solve_pressure(
        &self,
        coeffs: &PressureCoefficients,
        g1: &ScalarField,
        g2: &ScalarField,
        b0r: &ScalarField,
        b0z: &ScalarField,
        dirichlet: &BoundaryFunction,
    ) -> Result<(ScalarField, SolveStats)> {
        let grid = &self.grid;
        let d = &(b0r * &grid.d_r(g2)) + &(b0z * &grid.d_z(g2));
        let source = g1 + &d;
        self.solve_pressure_source(coeffs, &source, dirichlet)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(nr: usize, nz: usize) -> Grid {
        Grid::new(nr, nz, 1.0, 2.0 * PI).unwrap()
    }

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn skewed_coeffs(g: &Grid) -> PressureCoefficients {
        let rk = g.field_from_fn(Parity::Odd, |r, z| r * (1.0 + 0.05 * z.cos()));
        let one = g.constant(1.0);
        let a12 = g.field_from_fn(Parity::Odd, |r, z| 0.05 * r * z.sin());
        let a21 = g.field_from_fn(Parity::Odd, |r, z| -0.04 * r * z.cos());
        let a11 = g.field_from_fn(Parity::Even, |r, _| 1.0 + 0.05 * r * r);
        PressureCoefficients::from_cofactor(g, &rk, &one, &a11, &a12, &a21, &one)
    }

    #[test]
    fn operators_are_symmetric() {
        let g = grid(12, 16);
        let n = g.len();
        let zero = vec![0.0; g.nz];
        for op in [
            StiffnessOperator::flat(&g),
            StiffnessOperator::cylindrical(&g),
            StiffnessOperator::pressure(&g, &skewed_coeffs(&g)),
        ] {
            let u = random_vec(n, 1);
            let v = random_vec(n, 2);
            let lhs = dot(&op.apply(&u, &zero), &v);
            let rhs = dot(&u, &op.apply(&v, &zero));
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
            assert!(dot(&op.apply(&u, &zero), &u) > 0.0);
        }
    }

    #[test]
    fn preconditioner_inverts_separable_operators() {
        let g = grid(10, 12);
        let zero = vec![0.0; g.nz];
        for (op, pc) in [
            (StiffnessOperator::flat(&g), SeparablePreconditioner::flat(&g)),
            (StiffnessOperator::cylindrical(&g), SeparablePreconditioner::cylindrical(&g)),
        ] {
            let u = random_vec(g.len(), 5);
            let back = pc.apply(&op.apply(&u, &zero));
            let err = u.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "{err}");
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = grid(16, 16);
        let s = EllipticSolver::new(&g, 1e-10);
        let (u, stats) = s.solve_flat_laplace(&g.boundary_constant(0.0)).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert_eq!(stats.iterations, 0);
    }

    #[test]
    fn flat_constant_data_is_linear_profile() {
        let g = grid(32, 16);
        let s = EllipticSolver::new(&g, 1e-12);
        let (u, _) = s.solve_flat_laplace(&g.boundary_constant(2.0)).unwrap();
        for i in 0..g.nr {
            let exact = 2.0 * g.r(i);
            assert!((u.values[g.idx(i, 3)] - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn cyl_constant_data_is_constant() {
        let g = grid(16, 16);
        let s = EllipticSolver::new(&g, 1e-12);
        let (u, _) = s.solve_cyl_harmonic(&g.boundary_constant(1.5)).unwrap();
        assert!(u.values.iter().all(|v| (v - 1.5).abs() < 1e-10));
    }

    #[test]
    fn maximum_principle_and_linearity() {
        let g = grid(24, 32);
        let s = EllipticSolver::new(&g, 1e-11);
        let f = g.boundary_from_fn(|z| z.sin() + 0.3 * (3.0 * z).cos());
        let h = g.boundary_from_fn(|z| 0.5 + (2.0 * z).sin());
        for solve in [EllipticSolver::solve_flat_laplace, EllipticSolver::solve_cyl_harmonic] {
            let (u, _) = solve(&s, &f).unwrap();
            let (lo, hi) = f.values.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
            let lo = lo.min(0.0);
            assert!(u.values.iter().all(|&v| v >= lo - 1e-10 && v <= hi + 1e-10));
            let (uh, _) = solve(&s, &h).unwrap();
            let comb = f.zip_map(&h, |a, b| 2.0 * a - 3.0 * b);
            let (uc, _) = solve(&s, &comb).unwrap();
            let expected = &u.scale(2.0) - &uh.scale(3.0);
            assert!((&uc - &expected).max_abs() < 1e-8);
        }
    }

    #[test]
    fn pressure_manufactured_same_stencil() {
        let g = grid(24, 24);
        let s = EllipticSolver::new(&g, 1e-12);
        for coeffs in [PressureCoefficients::identity(&g), skewed_coeffs(&g)] {
            let qstar = g.field_from_fn(Parity::Even, |r, z| (1.0 - r * r) * (2.0 * z).cos());
            let zero = g.boundary_constant(0.0);
            let rhs = s.apply_pressure(&coeffs, &qstar, &zero);
            let (q, stats) = s.solve_pressure_source(&coeffs, &rhs, &zero).unwrap();
            assert!(stats.relative_residual <= 1e-12);
            assert!((&q - &qstar).max_abs() < 1e-9);
        }
    }

    #[test]
    fn pressure_constant_data() {
        let g = grid(16, 16);
        let s = EllipticSolver::new(&g, 1e-12);
        let c = PressureCoefficients::identity(&g);
        let zero = g.zeros(Parity::Even);
        let (q, _) = s
            .solve_pressure(&c, &zero, &zero, &zero, &zero, &g.boundary_constant(0.7))
            .unwrap();
        assert!(q.values.iter().all(|v| (v - 0.7).abs() < 1e-10));
    }

    #[test]
    fn pressure_identity_matches_cyl_harmonic() {
        let g = grid(16, 32);
        let s = EllipticSolver::new(&g, 1e-12);
        let data = g.boundary_from_fn(|z| 1.0 + 0.5 * z.cos());
        let (h, _) = s.solve_cyl_harmonic(&data).unwrap();
        let zero = g.zeros(Parity::Even);
        let (q, _) = s
            .solve_pressure_source(&PressureCoefficients::identity(&g), &zero, &data)
            .unwrap();
        assert!((&h - &q).max_abs() < 1e-10);
    }

    #[test]
    fn rejects_indefinite_coefficients() {
        let g = grid(8, 8);
        let s = EllipticSolver::new(&g, 1e-10);
        let mut c = PressureCoefficients::identity(&g);
        c.e12.values[5] = 2.0;
        let zero = g.zeros(Parity::Even);
        let err = s.solve_pressure_source(&c, &zero, &g.boundary_constant(1.0));
        assert!(matches!(err, Err(Error::NonPositiveCoefficients { .. })));
    }
}

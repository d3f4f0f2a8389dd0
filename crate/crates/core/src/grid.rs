//! Reference domain `(0, R0] x T_L`, scalar fields on it and the stencils
//! every other module builds on.
//!
//! The radial grid is cell-centered (`r_i = (i + 1/2) dr`) so no node sits on
//! the axis. Behavior across the axis is encoded by a parity tag on each
//! field: an even field reflects as `f(-r) = f(r)`, an odd one as
//! `f(-r) = -f(r)`. Radial derivatives are second order, axial derivatives
//! fourth order periodic.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    /// Parity of a product.
    pub fn times(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    fn ghost_sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nr: usize,
    pub nz: usize,
    pub r0: f64,
    pub l: f64,
    pub dr: f64,
    pub dz: f64,
}

/// Values of a field at the cell centers, stored row-major with `j` (the
/// axial index) fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
    pub parity: Parity,
}

/// A function on the interface `r = R0`, sampled at `z_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFunction {
    pub values: Vec<f64>,
}

impl Grid {
    pub fn new(nr: usize, nz: usize, r0: f64, l: f64) -> Result<Self> {
        if nr < 6 {
            return Err(Error::InvalidParameter(format!("nr = {nr} (need at least 6)")));
        }
        if nz < 5 {
            return Err(Error::InvalidParameter(format!("nz = {nz} (need at least 5)")));
        }
        if !(r0 > 0.0 && r0.is_finite()) || !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidParameter(format!("R0 = {r0}, L = {l} must be positive")));
        }
        Ok(Grid {
            nr,
            nz,
            r0,
            l,
            dr: r0 / nr as f64,
            dz: l / nz as f64,
        })
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dr
    }

    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        j as f64 * self.dz
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nz + j
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nr * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight `2 pi r_i dr dz` of node `(i, j)`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        2.0 * PI * self.r(i) * self.dr * self.dz
    }

    /// Length element `2 pi R0 dz` of the boundary quadrature.
    #[inline]
    pub fn boundary_weight(&self) -> f64 {
        2.0 * PI * self.r0 * self.dz
    }

    #[inline]
    fn wrap(&self, j: isize) -> usize {
        j.rem_euclid(self.nz as isize) as usize
    }

    pub fn zeros(&self, parity: Parity) -> ScalarField {
        ScalarField {
            values: vec![0.0; self.len()],
            parity,
        }
    }

    pub fn constant(&self, c: f64) -> ScalarField {
        ScalarField {
            values: vec![c; self.len()],
            parity: Parity::Even,
        }
    }

    pub fn field_from_fn(&self, parity: Parity, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let mut values = Vec::with_capacity(self.len());
        for i in 0..self.nr {
            let r = self.r(i);
            for j in 0..self.nz {
                values.push(f(r, self.z(j)));
            }
        }
        ScalarField { values, parity }
    }

    /// The coordinate field `r` (odd).
    pub fn r_field(&self) -> ScalarField {
        self.field_from_fn(Parity::Odd, |r, _| r)
    }

    pub fn boundary_from_fn(&self, f: impl Fn(f64) -> f64) -> BoundaryFunction {
        BoundaryFunction {
            values: (0..self.nz).map(|j| f(self.z(j))).collect(),
        }
    }

    pub fn boundary_constant(&self, c: f64) -> BoundaryFunction {
        BoundaryFunction {
            values: vec![c; self.nz],
        }
    }

    /// Radial derivative: centered second order in the interior, a parity
    /// ghost cell at the axis and an extrapolated ghost row past the
    /// outermost row. The result has the opposite parity.
    pub fn d_r(&self, f: &ScalarField) -> ScalarField {
        let (nr, nz) = (self.nr, self.nz);
        let inv = 1.0 / (2.0 * self.dr);
        let v = &f.values;
        let s = f.parity.ghost_sign();
        let mut out = vec![0.0; self.len()];
        for j in 0..nz {
            out[j] = (v[nz + j] - s * v[j]) * inv;
        }
        for i in 1..nr - 1 {
            let row = i * nz;
            for j in 0..nz {
                out[row + j] = (v[row + nz + j] - v[row - nz + j]) * inv;
            }
        }
        // centered difference against a ghost row extrapolated by a quartic
        // through the outer five rows
        let last = (nr - 1) * nz;
        for j in 0..nz {
            let f = |k: usize| v[last - k * nz + j];
            out[last + j] = (5.0 * f(0) - 11.0 * f(1) + 10.0 * f(2) - 5.0 * f(3) + f(4)) * inv;
        }
        ScalarField {
            values: out,
            parity: f.parity.flip(),
        }
    }

    /// Radial derivative that uses a known boundary value `g` at `r = R0`
    /// in the outermost row instead of the one-sided interior formula.
    pub fn d_r_dirichlet(&self, f: &ScalarField, g: &BoundaryFunction) -> ScalarField {
        let mut out = self.d_r(f);
        let nz = self.nz;
        let last = (self.nr - 1) * nz;
        let v = &f.values;
        for j in 0..nz {
            // nodes at R0 - 3dr/2, R0 - dr/2, R0
            out.values[last + j] =
                (-v[last - nz + j] / 3.0 - v[last + j] + 4.0 * g.values[j] / 3.0) / self.dr;
        }
        out
    }

    fn d_z_row(&self, row: &[f64], out: &mut [f64]) {
        let n = self.nz as isize;
        let inv = 1.0 / (12.0 * self.dz);
        for j in 0..n {
            let at = |k: isize| row[self.wrap(j + k)];
            out[j as usize] = (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) * inv;
        }
    }

    /// Fourth-order periodic derivative in z.
    pub fn d_z(&self, f: &ScalarField) -> ScalarField {
        let mut out = vec![0.0; self.len()];
        for (src, dst) in f.values.chunks(self.nz).zip(out.chunks_mut(self.nz)) {
            self.d_z_row(src, dst);
        }
        ScalarField {
            values: out,
            parity: f.parity,
        }
    }

    pub fn d_z_boundary(&self, f: &BoundaryFunction) -> BoundaryFunction {
        let mut out = vec![0.0; self.nz];
        self.d_z_row(&f.values, &mut out);
        BoundaryFunction { values: out }
    }

    pub fn d_z_boundary_n(&self, f: &BoundaryFunction, n: usize) -> BoundaryFunction {
        (0..n).fold(f.clone(), |acc, _| self.d_z_boundary(&acc))
    }

    pub fn d_z_n(&self, f: &ScalarField, n: usize) -> ScalarField {
        (0..n).fold(f.clone(), |acc, _| self.d_z(&acc))
    }

    pub fn d_r_n(&self, f: &ScalarField, n: usize) -> ScalarField {
        (0..n).fold(f.clone(), |acc, _| self.d_r(&acc))
    }

    /// Unweighted-by-derivatives `L^2` norm with the axisymmetric measure.
    pub fn l2_norm(&self, f: &ScalarField) -> f64 {
        self.l2_norm_sq(&f.values).sqrt()
    }

    fn l2_norm_sq(&self, v: &[f64]) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.nr {
            let w = self.weight(i);
            let row = &v[i * self.nz..(i + 1) * self.nz];
            sum += w * row.iter().map(|x| x * x).sum::<f64>();
        }
        sum
    }

    /// Weighted inner product `2 pi sum r f g dr dz`.
    pub fn inner(&self, f: &ScalarField, g: &ScalarField) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.nr {
            let w = self.weight(i);
            for j in 0..self.nz {
                let k = self.idx(i, j);
                sum += w * f.values[k] * g.values[k];
            }
        }
        sum
    }

    /// `||f||_k`: sum over all `d_r^a d_z^b f` with `a + b <= k`.
    pub fn weighted_norm(&self, f: &ScalarField, order: usize) -> f64 {
        self.weighted_norm_sq(f, order).sqrt()
    }

    pub fn weighted_norm_sq(&self, f: &ScalarField, order: usize) -> f64 {
        let mut total = 0.0;
        let mut fz = f.clone();
        for b in 0..=order {
            let mut fr = fz.clone();
            for a in 0..=(order - b) {
                total += self.l2_norm_sq(&fr.values);
                if a < order - b {
                    fr = self.d_r(&fr);
                }
            }
            if b < order {
                fz = self.d_z(&fz);
            }
        }
        total
    }

    /// `||z + disp||_k^2` for a field whose non-periodic part is the
    /// coordinate `z` itself (the axial flow-map component).
    pub fn weighted_norm_sq_with_z(&self, disp: &ScalarField, order: usize) -> f64 {
        let mut total = 0.0;
        let mut fz = disp.clone();
        for b in 0..=order {
            let mut fr = fz.clone();
            for a in 0..=(order - b) {
                let shifted: Vec<f64> = match (a, b) {
                    (0, 0) => (0..self.len())
                        .map(|k| fr.values[k] + self.z(k % self.nz))
                        .collect(),
                    (0, 1) => fr.values.iter().map(|x| x + 1.0).collect(),
                    _ => fr.values.clone(),
                };
                total += self.l2_norm_sq(&shifted);
                if a < order - b {
                    fr = self.d_r(&fr);
                }
            }
            if b < order {
                fz = self.d_z(&fz);
            }
        }
        total
    }

    /// Value at `r = R0`, by quadratic extrapolation from the outer three rows.
    pub fn boundary_trace(&self, f: &ScalarField) -> BoundaryFunction {
        let nz = self.nz;
        let a = (self.nr - 1) * nz;
        let b = a - nz;
        let c = b - nz;
        BoundaryFunction {
            values: (0..nz)
                .map(|j| (15.0 * f.values[a + j] - 10.0 * f.values[b + j] + 3.0 * f.values[c + j]) / 8.0)
                .collect(),
        }
    }

    /// Radial derivative at `r = R0` from the outer three rows (exact for
    /// quadratics).
    pub fn boundary_normal_derivative(&self, f: &ScalarField) -> BoundaryFunction {
        let nz = self.nz;
        let a = (self.nr - 1) * nz;
        let b = a - nz;
        let c = b - nz;
        BoundaryFunction {
            values: (0..nz)
                .map(|j| (2.0 * f.values[a + j] - 3.0 * f.values[b + j] + f.values[c + j]) / self.dr)
                .collect(),
        }
    }

    /// Boundary seminorm-sum `|w|_k` with weight `2 pi R0 dz`.
    pub fn boundary_norm(&self, w: &BoundaryFunction, order: usize) -> f64 {
        let bw = self.boundary_weight();
        let mut total = 0.0;
        let mut d = w.clone();
        for k in 0..=order {
            total += bw * d.values.iter().map(|x| x * x).sum::<f64>();
            if k < order {
                d = self.d_z_boundary(&d);
            }
        }
        total.sqrt()
    }

    /// Periodic trapezoid integral over `T_L` (no `2 pi R0` factor).
    pub fn boundary_integral(&self, w: &BoundaryFunction) -> f64 {
        w.values.iter().sum::<f64>() * self.dz
    }
}

impl ScalarField {
    pub fn map(&self, parity: Parity, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            values: self.values.iter().map(|&x| f(x)).collect(),
            parity,
        }
    }

    pub fn zip_map(&self, other: &ScalarField, parity: Parity, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        debug_assert_eq!(self.values.len(), other.values.len());
        ScalarField {
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            parity,
        }
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        self.map(self.parity, |x| s * x)
    }

    /// `self + s * other`, in place.
    pub fn axpy(&mut self, s: f64, other: &ScalarField) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    pub fn div(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, self.parity.times(other.parity), |a, b| a / b)
    }

    pub fn with_parity(mut self, parity: Parity) -> ScalarField {
        self.parity = parity;
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    pub fn row(&self, grid: &Grid, i: usize) -> &[f64] {
        &self.values[i * grid.nz..(i + 1) * grid.nz]
    }
}

impl BoundaryFunction {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn zip_map(&self, other: &BoundaryFunction, f: impl Fn(f64, f64) -> f64) -> BoundaryFunction {
        BoundaryFunction {
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> BoundaryFunction {
        BoundaryFunction {
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// A field stored as an even part plus an odd part, so radial derivatives
/// use the right ghost cell for each. The axial displacement needs this
/// because its smoothing corrections are pinned to zero at the axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitField {
    pub even: ScalarField,
    pub odd: ScalarField,
}

impl SplitField {
    pub fn zeros(grid: &Grid) -> Self {
        SplitField {
            even: grid.zeros(Parity::Even),
            odd: grid.zeros(Parity::Odd),
        }
    }

    pub fn from_even(f: ScalarField) -> Self {
        let odd = ScalarField {
            values: vec![0.0; f.values.len()],
            parity: Parity::Odd,
        };
        SplitField {
            even: f.with_parity(Parity::Even),
            odd,
        }
    }

    /// Pointwise sum of both parts, tagged even.
    pub fn value(&self) -> ScalarField {
        &self.even + &self.odd
    }

    pub fn d_r(&self, grid: &Grid) -> ScalarField {
        &grid.d_r(&self.even) + &grid.d_r(&self.odd)
    }

    pub fn d_z(&self, grid: &Grid) -> ScalarField {
        &grid.d_z(&self.even) + &grid.d_z(&self.odd)
    }

    pub fn trace(&self, grid: &Grid) -> BoundaryFunction {
        grid.boundary_trace(&self.value())
    }

    pub fn add_odd(&self, f: &ScalarField) -> SplitField {
        SplitField {
            even: self.even.clone(),
            odd: &self.odd + f,
        }
    }

    /// `self + s * other`, in place.
    pub fn axpy(&mut self, s: f64, other: &SplitField) {
        self.even.axpy(s, &other.even);
        self.odd.axpy(s, &other.odd);
    }

    pub fn max_abs(&self) -> f64 {
        self.value().max_abs()
    }
}

impl<'a> Add for &'a ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, self.parity, |a, b| a + b)
    }
}

impl<'a> Sub for &'a ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, self.parity, |a, b| a - b)
    }
}

impl<'a> Mul for &'a ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, self.parity.times(rhs.parity), |a, b| a * b)
    }
}

impl<'a> Neg for &'a ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.scale(-1.0)
    }
}

impl<'a> Add for &'a BoundaryFunction {
    type Output = BoundaryFunction;
    fn add(self, rhs: Self) -> BoundaryFunction {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl<'a> Sub for &'a BoundaryFunction {
    type Output = BoundaryFunction;
    fn sub(self, rhs: Self) -> BoundaryFunction {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl<'a> Mul for &'a BoundaryFunction {
    type Output = BoundaryFunction;
    fn mul(self, rhs: Self) -> BoundaryFunction {
        self.zip_map(rhs, |a, b| a * b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nr: usize, nz: usize) -> Grid {
        Grid::new(nr, nz, 1.0, 2.0 * PI).unwrap()
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(2, 16, 1.0, 1.0).is_err());
        assert!(Grid::new(8, 16, -1.0, 1.0).is_err());
    }

    #[test]
    fn nodes_avoid_axis() {
        let g = grid(8, 8);
        assert!(g.r(0) > 0.0);
        assert_eq!(g.r(0), g.dr / 2.0);
        assert!((g.weight(3) - 2.0 * PI * g.r(3) * g.dr * g.dz).abs() < 1e-15);
    }

    #[test]
    fn d_r_constant_and_linear() {
        let g = grid(16, 8);
        let c = g.constant(3.0);
        assert!(g.d_r(&c).max_abs() < 1e-13);
        let r = g.r_field();
        let dr = g.d_r(&r);
        assert_eq!(dr.parity, Parity::Even);
        for v in &dr.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    fn d_r_error(n: usize) -> f64 {
        let g = grid(n, 32);
        let k = 1.0;
        let f = g.field_from_fn(Parity::Even, |r, z| r * r * (k * z).sin());
        let d = g.d_r(&f);
        let exact = g.field_from_fn(Parity::Odd, |r, z| 2.0 * r * (k * z).sin());
        (&d - &exact).max_abs()
    }

    #[test]
    fn d_r_second_order() {
        // r^2 sin(kz) is quadratic in r: the stencils are exact
        assert!(d_r_error(16) < 1e-12);
        let g1 = grid(16, 16);
        let g2 = grid(32, 16);
        let err = |g: &Grid| {
            let f = g.field_from_fn(Parity::Even, |r, _| (2.0 * r).cos());
            let e = g.field_from_fn(Parity::Odd, |r, _| -2.0 * (2.0 * r).sin());
            (&g.d_r(&f) - &e).max_abs()
        };
        let ratio = err(&g1) / err(&g2);
        assert!(ratio > 3.5 && ratio < 4.6, "ratio {ratio}");
    }

    #[test]
    fn d_z_fourth_order() {
        let err = |nz: usize| {
            let g = grid(8, nz);
            let f = g.field_from_fn(Parity::Even, |_, z| z.sin());
            let e = g.field_from_fn(Parity::Even, |_, z| z.cos());
            (&g.d_z(&f) - &e).max_abs()
        };
        let ratio = err(16) / err(32);
        assert!(ratio > 14.0 && ratio < 17.0, "ratio {ratio}");
        let g = grid(8, 64);
        let f = g.field_from_fn(Parity::Even, |_, z| z.sin());
        let dd = g.d_z(&g.d_z(&f));
        assert!((&dd + &f).max_abs() < 1e-5);
    }

    #[test]
    fn weighted_norm_constant() {
        let g = grid(64, 32);
        let one = g.constant(1.0);
        let expected = 2.0 * PI / 2f64.sqrt();
        assert!((g.weighted_norm(&one, 0) - expected).abs() < 1e-12);
        assert_eq!(g.weighted_norm(&g.zeros(Parity::Even), 3), 0.0);
    }

    #[test]
    fn weighted_norm_of_r_order_4() {
        let g = grid(128, 16);
        let n = g.weighted_norm(&g.r_field(), 4);
        let expected = (3.0 * PI * PI).sqrt();
        assert!((n - expected).abs() < 1e-4, "{n} vs {expected}");
    }

    #[test]
    fn boundary_trace_examples() {
        let g = grid(32, 16);
        let t = g.boundary_trace(&g.constant(2.5));
        assert!(t.values.iter().all(|v| (v - 2.5).abs() < 1e-14));
        let t = g.boundary_trace(&g.r_field());
        assert!(t.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let f = g.field_from_fn(Parity::Odd, |r, z| r * z.sin());
        let t = g.boundary_trace(&f);
        for (j, v) in t.values.iter().enumerate() {
            assert!((v - g.z(j).sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn dirichlet_derivative_exact_for_quadratics() {
        let g = grid(16, 8);
        let f = g.field_from_fn(Parity::Even, |r, _| 1.0 - r * r);
        let bc = g.boundary_constant(0.0);
        let d = g.d_r_dirichlet(&f, &bc);
        let last = g.idx(g.nr - 1, 0);
        assert!((d.values[last] + 2.0 * g.r(g.nr - 1)).abs() < 1e-12);
    }
}

//! Flow-map geometry: deformation gradient, cofactor matrix and Jacobian,
//! the smoothed map, and the frozen-in magnetic field.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elliptic::{EllipticSolver, PressureCoefficients};
use crate::error::{Error, Result};
use crate::grid::{BoundaryFunction, Grid, Parity, ScalarField, SplitField};
use crate::mollifier::MollifierKernel;

/// Below this `|J|` the map is treated as degenerate and the run halts.
pub const DEGENERATE_JACOBIAN: f64 = 0.5;
/// Half-width of the a priori window around the identity.
pub const WINDOW_HALF_WIDTH: f64 = 0.125;

/// Lagrangian position `(R, Z)` and angular deviation `Theta_hat`.
///
/// `Z` is stored as the displacement `Z - z`, which is periodic.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    pub r: ScalarField,
    pub z_disp: SplitField,
    pub theta_hat: ScalarField,
}

impl FlowMap {
    pub fn identity(grid: &Grid) -> Self {
        FlowMap {
            r: grid.r_field(),
            z_disp: SplitField::zeros(grid),
            theta_hat: grid.zeros(Parity::Even),
        }
    }

    /// `R(r, z)`, `Z(r, z) - z` and `Theta_hat(r, z)` sampled from closures.
    pub fn from_fn(
        grid: &Grid,
        r: impl Fn(f64, f64) -> f64,
        z_disp: impl Fn(f64, f64) -> f64,
        theta_hat: impl Fn(f64, f64) -> f64,
    ) -> Self {
        FlowMap {
            r: grid.field_from_fn(Parity::Odd, r),
            z_disp: SplitField::from_even(grid.field_from_fn(Parity::Even, z_disp)),
            theta_hat: grid.field_from_fn(Parity::Even, theta_hat),
        }
    }

    /// Absolute axial position `Z`.
    pub fn z_position(&self, grid: &Grid) -> ScalarField {
        let mut z = self.z_disp.value();
        for (k, v) in z.values.iter_mut().enumerate() {
            *v += grid.z(k % grid.nz);
        }
        z
    }

    pub fn is_finite(&self) -> bool {
        self.r.is_finite() && self.z_disp.value().is_finite() && self.theta_hat.is_finite()
    }
}

/// Smooth random near-identity map with the right axis behavior.
pub fn random_smooth_map(grid: &Grid, seed: u64, amplitude: f64) -> FlowMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k0 = 2.0 * std::f64::consts::PI / grid.l;
    let modes: Vec<(f64, f64, f64, f64, f64)> = (1..=3)
        .map(|k| {
            (
                k as f64 * k0,
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let r0 = grid.r0;
    let eps = amplitude;
    let modes_r = modes.clone();
    FlowMap::from_fn(
        grid,
        move |r, z| {
            let s = r / r0;
            r * (1.0 + eps * modes_r.iter().map(|(k, a, _, _, ph)| a * s * s * (k * z + ph).cos()).sum::<f64>())
        },
        move |r, z| {
            let s = r / r0;
            eps * r0
                * modes
                    .iter()
                    .map(|(k, _, b, c, ph)| (b * s * s + 0.5 * c) * (k * z + ph).sin())
                    .sum::<f64>()
        },
        |_, _| 0.0,
    )
}

type Mat2 = [[ScalarField; 2]; 2];
type BMat2 = [[BoundaryFunction; 2]; 2];

/// `F_ij = d_{a_j} zeta_i`, `A = F^{-T}`, `J = det F`, all per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub f: Mat2,
    pub a: Mat2,
    pub jac: ScalarField,
}

impl Geometry {
    /// Cofactor and Jacobian from the four gradient components
    /// `[[dR/dr, dR/dz], [dZ/dr, dZ/dz]]`.
    pub fn from_gradient(f: Mat2) -> Self {
        let n = f[0][0].values.len();
        let mut jac = vec![0.0; n];
        let mut a = [[vec![0.0; n], vec![0.0; n]], [vec![0.0; n], vec![0.0; n]]];
        for k in 0..n {
            let (f11, f12, f21, f22) = (f[0][0].values[k], f[0][1].values[k], f[1][0].values[k], f[1][1].values[k]);
            let j = f11 * f22 - f12 * f21;
            jac[k] = j;
            a[0][0][k] = f22 / j;
            a[0][1][k] = -f21 / j;
            a[1][0][k] = -f12 / j;
            a[1][1][k] = f11 / j;
        }
        let [[a11, a12], [a21, a22]] = a;
        Geometry {
            f,
            a: [
                [
                    ScalarField { values: a11, parity: Parity::Even },
                    ScalarField { values: a12, parity: Parity::Odd },
                ],
                [
                    ScalarField { values: a21, parity: Parity::Odd },
                    ScalarField { values: a22, parity: Parity::Even },
                ],
            ],
            jac: ScalarField { values: jac, parity: Parity::Even },
        }
    }

    /// Discrete gradient of `(R, Z)` followed by the algebra above.
    pub fn from_map_unchecked(grid: &Grid, r: &ScalarField, z_disp: &SplitField) -> Self {
        let f11 = grid.d_r(r).with_parity(Parity::Even);
        let f12 = grid.d_z(r).with_parity(Parity::Odd);
        let f21 = z_disp.d_r(grid).with_parity(Parity::Odd);
        let f22 = z_disp.d_z(grid).map(Parity::Even, |x| 1.0 + x);
        Self::from_gradient([[f11, f12], [f21, f22]])
    }

    pub fn from_map(grid: &Grid, map: &FlowMap) -> Result<Self> {
        let g = Self::from_map_unchecked(grid, &map.r, &map.z_disp);
        g.check_nondegenerate(grid)?;
        Ok(g)
    }

    /// Geometry sampled from an exact gradient `(r, z) -> [F11, F12, F21, F22]`.
    pub fn from_analytic(grid: &Grid, grad: impl Fn(f64, f64) -> [f64; 4]) -> Self {
        let parities = [Parity::Even, Parity::Odd, Parity::Odd, Parity::Even];
        let comp: Vec<ScalarField> = (0..4)
            .map(|c| grid.field_from_fn(parities[c], |r, z| grad(r, z)[c]))
            .collect();
        let mut it = comp.into_iter();
        let (f11, f12, f21, f22) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
        Self::from_gradient([[f11, f12], [f21, f22]])
    }

    pub fn check_nondegenerate(&self, grid: &Grid) -> Result<()> {
        for (k, j) in self.jac.values.iter().enumerate() {
            if !(j.abs() >= DEGENERATE_JACOBIAN) {
                return Err(Error::DegenerateMap(format!(
                    "|J| = {} below {} at node ({}, {})",
                    j.abs(),
                    DEGENERATE_JACOBIAN,
                    k / grid.nz,
                    k % grid.nz
                )));
            }
        }
        Ok(())
    }

    /// `max |F^T A - I|` over nodes and entries.
    pub fn transpose_product_residual(&self) -> f64 {
        let n = self.jac.values.len();
        let mut worst = 0.0_f64;
        for k in 0..n {
            for i in 0..2 {
                for j in 0..2 {
                    let s: f64 = (0..2).map(|m| self.f[m][i].values[k] * self.a[m][j].values[k]).sum();
                    let delta = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((s - delta).abs());
                }
            }
        }
        worst
    }

    /// `max |J - det F|`.
    pub fn determinant_residual(&self) -> f64 {
        (0..self.jac.values.len())
            .map(|k| {
                let det = self.f[0][0].values[k] * self.f[1][1].values[k]
                    - self.f[0][1].values[k] * self.f[1][0].values[k];
                (self.jac.values[k] - det).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `max |J - 1|` and `max |A_ij - delta_ij|`.
    pub fn window_deviation(&self) -> (f64, f64) {
        let dj = self.jac.values.iter().map(|j| (j - 1.0).abs()).fold(0.0, f64::max);
        let mut da = 0.0_f64;
        for i in 0..2 {
            for j in 0..2 {
                let delta = if i == j { 1.0 } else { 0.0 };
                da = self.a[i][j].values.iter().map(|a| (a - delta).abs()).fold(da, f64::max);
            }
        }
        (dj, da)
    }

    /// A description of the first violated window bound, if any.
    pub fn window_violation(&self) -> Option<String> {
        let (dj, da) = self.window_deviation();
        if !(dj <= WINDOW_HALF_WIDTH) {
            Some(format!("|J^k - 1| = {dj:.3e} exceeds {WINDOW_HALF_WIDTH}"))
        } else if !(da <= WINDOW_HALF_WIDTH) {
            Some(format!("|A^k - I| = {da:.3e} exceeds {WINDOW_HALF_WIDTH}"))
        } else {
            None
        }
    }

    /// `A_ij d_j f`, the i-th component of the transported gradient.
    pub fn grad_component(&self, grid: &Grid, i: usize, f: &ScalarField) -> ScalarField {
        &(&self.a[i][0] * &grid.d_r(f)) + &(&self.a[i][1] * &grid.d_z(f))
    }
}

/// Piola residual rows `d_r(J A_i1) + d_z(J A_i2)` for `i = 1, 2`.
pub fn piola_residual(grid: &Grid, geom: &Geometry) -> [ScalarField; 2] {
    let row = |i: usize| {
        let ja1 = &geom.jac * &geom.a[i][0];
        let ja2 = &geom.jac * &geom.a[i][1];
        &grid.d_r(&ja1) + &grid.d_z(&ja2)
    };
    [row(0), row(1)]
}

/// Boundary values of the smoothed geometry. `A` and `J` are formed from
/// the traces of `F`, so algebraic identities hold exactly on `Gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGeometry {
    pub f: BMat2,
    pub a: BMat2,
    pub jac: BoundaryFunction,
    pub rk: BoundaryFunction,
}

impl BoundaryGeometry {
    pub fn from_geometry(grid: &Grid, geom: &Geometry, rk: &ScalarField) -> Self {
        let t = |f: &ScalarField| grid.boundary_trace(f);
        let f = [[t(&geom.f[0][0]), t(&geom.f[0][1])], [t(&geom.f[1][0]), t(&geom.f[1][1])]];
        let nz = grid.nz;
        let mut jac = vec![0.0; nz];
        let mut a = [[vec![0.0; nz], vec![0.0; nz]], [vec![0.0; nz], vec![0.0; nz]]];
        for k in 0..nz {
            let (f11, f12, f21, f22) = (f[0][0].values[k], f[0][1].values[k], f[1][0].values[k], f[1][1].values[k]);
            let j = f11 * f22 - f12 * f21;
            jac[k] = j;
            a[0][0][k] = f22 / j;
            a[0][1][k] = -f21 / j;
            a[1][0][k] = -f12 / j;
            a[1][1][k] = f11 / j;
        }
        let [[a11, a12], [a21, a22]] = a;
        let b = |v| BoundaryFunction { values: v };
        BoundaryGeometry {
            f,
            a: [[b(a11), b(a12)], [b(a21), b(a22)]],
            jac: b(jac),
            rk: grid.boundary_trace(rk),
        }
    }
}

/// `X_R - (X_j A_j2) dR/dz - dR/dr (X_j A_j1)` on `Gamma`.
pub fn boundary_transfer_residual(bg: &BoundaryGeometry, x: [&BoundaryFunction; 2]) -> BoundaryFunction {
    let n = bg.jac.values.len();
    let values = (0..n)
        .map(|k| {
            let xa2 = x[0].values[k] * bg.a[0][1].values[k] + x[1].values[k] * bg.a[1][1].values[k];
            let xa1 = x[0].values[k] * bg.a[0][0].values[k] + x[1].values[k] * bg.a[1][0].values[k];
            x[0].values[k] - xa2 * bg.f[0][1].values[k] - bg.f[0][0].values[k] * xa1
        })
        .collect();
    BoundaryFunction { values }
}

/// Flat-harmonic extension (zero at the axis) of `Lambda^2 f - f` on `Gamma`.
pub fn mollification_defect(
    trace: &BoundaryFunction,
    kernel: &MollifierKernel,
    solver: &EllipticSolver,
) -> Result<ScalarField> {
    let data = &kernel.apply_twice(trace) - trace;
    Ok(solver.solve_flat_laplace(&data)?.0)
}

/// Adds the mollification defect extension to both components of a
/// radial/axial pair. Used for the map itself and for its time derivative.
pub fn smooth_pair(
    grid: &Grid,
    r: &ScalarField,
    z: &SplitField,
    kernel: &MollifierKernel,
    solver: &EllipticSolver,
) -> Result<(ScalarField, SplitField)> {
    let phi_r = mollification_defect(&grid.boundary_trace(r), kernel, solver)?;
    let phi_z = mollification_defect(&z.trace(grid), kernel, solver)?;
    Ok((r + &phi_r, z.add_odd(&phi_z)))
}

/// The smoothed map `zeta^k = zeta + phi^k`. `Theta_hat` is copied.
pub fn smooth_map(grid: &Grid, map: &FlowMap, kernel: &MollifierKernel, solver: &EllipticSolver) -> Result<FlowMap> {
    let (r, z_disp) = smooth_pair(grid, &map.r, &map.z_disp, kernel, solver)?;
    Ok(FlowMap {
        r,
        z_disp,
        theta_hat: map.theta_hat.clone(),
    })
}

/// Geometry of the current map and of its smoothed counterpart.
#[derive(Debug, Clone)]
pub struct GeomCache {
    pub base: Geometry,
    pub zeta_k: FlowMap,
    pub smooth: Geometry,
    pub boundary: BoundaryGeometry,
}

impl GeomCache {
    pub fn build(grid: &Grid, map: &FlowMap, kernel: &MollifierKernel, solver: &EllipticSolver) -> Result<Self> {
        let base = Geometry::from_map(grid, map)?;
        let zeta_k = smooth_map(grid, map, kernel, solver)?;
        let smooth = Geometry::from_map(grid, &zeta_k)?;
        let boundary = BoundaryGeometry::from_geometry(grid, &smooth, &zeta_k.r);
        Ok(GeomCache {
            base,
            zeta_k,
            smooth,
            boundary,
        })
    }

    /// `R^k`.
    pub fn rk(&self) -> &ScalarField {
        &self.zeta_k.r
    }

    pub fn pressure_coefficients(&self, grid: &Grid) -> PressureCoefficients {
        let a = &self.smooth.a;
        PressureCoefficients::from_cofactor(grid, self.rk(), &self.smooth.jac, &a[0][0], &a[0][1], &a[1][0], &a[1][1])
    }
}

/// Seed field `b0 = (b0^r, b0^theta, b0^z)`, fixed for all time.
#[derive(Debug, Clone, PartialEq)]
pub struct MagneticSeed {
    pub b0r: ScalarField,
    pub b0th: ScalarField,
    pub b0z: ScalarField,
}

impl MagneticSeed {
    pub fn zero(grid: &Grid) -> Self {
        MagneticSeed {
            b0r: grid.zeros(Parity::Odd),
            b0th: grid.zeros(Parity::Odd),
            b0z: grid.zeros(Parity::Even),
        }
    }

    /// `b0^r d_r f + b0^z d_z f`.
    pub fn directional(&self, grid: &Grid, f: &ScalarField) -> ScalarField {
        let out = &(&self.b0r * &grid.d_r(f)) + &(&self.b0z * &grid.d_z(f));
        out.with_parity(f.parity)
    }

    pub fn directional_split(&self, grid: &Grid, f: &SplitField) -> ScalarField {
        let out = &(&self.b0r * &f.d_r(grid)) + &(&self.b0z * &f.d_z(grid));
        out.with_parity(Parity::Even)
    }

    /// `b0 . grad Theta = D Theta_hat + b0^theta / r`.
    pub fn dot_grad_theta(&self, grid: &Grid, theta_hat: &ScalarField) -> ScalarField {
        let mut out = self.directional(grid, theta_hat);
        for i in 0..grid.nr {
            let r = grid.r(i);
            for j in 0..grid.nz {
                let k = grid.idx(i, j);
                out.values[k] += self.b0th.values[k] / r;
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.b0r.max_abs() == 0.0 && self.b0th.max_abs() == 0.0 && self.b0z.max_abs() == 0.0
    }
}

/// Frozen-in field `(b0 . grad R, R b0 . grad Theta, b0 . grad Z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenField {
    pub b_r: ScalarField,
    pub b_th: ScalarField,
    pub b_z: ScalarField,
}

pub fn reconstruct_b(grid: &Grid, seed: &MagneticSeed, map: &FlowMap) -> FrozenField {
    let b_r = seed.directional(grid, &map.r);
    let zd = seed.directional_split(grid, &map.z_disp);
    let b_z = &zd + &seed.b0z;
    let b_th = (&map.r * &seed.dot_grad_theta(grid, &map.theta_hat)).with_parity(Parity::Odd);
    FrozenField { b_r, b_th, b_z }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(nr: usize, nz: usize) -> Grid {
        Grid::new(nr, nz, 1.0, 2.0 * PI).unwrap()
    }

    #[test]
    fn identity_geometry() {
        let g = grid(16, 16);
        let geo = Geometry::from_map(&g, &FlowMap::identity(&g)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let d = if i == j { 1.0 } else { 0.0 };
                assert!(geo.f[i][j].values.iter().all(|v| (v - d).abs() < 1e-13));
                assert!(geo.a[i][j].values.iter().all(|v| (v - d).abs() < 1e-13));
            }
        }
        assert!(geo.jac.values.iter().all(|v| (v - 1.0).abs() < 1e-13));
        assert!(geo.window_violation().is_none());
    }

    #[test]
    fn affine_stretch() {
        let g = grid(16, 16);
        let map = FlowMap::from_fn(&g, |r, _| 2.0 * r, |_, _| 0.0, |_, _| 0.0);
        let geo = Geometry::from_map(&g, &map).unwrap();
        assert!(geo.jac.values.iter().all(|v| (v - 2.0).abs() < 1e-12));
        assert!(geo.a[0][0].values.iter().all(|v| (v - 0.5).abs() < 1e-12));
        assert!(geo.a[1][1].values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(geo.window_violation().is_some());
    }

    #[test]
    fn collapsed_map_is_degenerate() {
        let g = grid(8, 8);
        let map = FlowMap::from_fn(&g, |r, _| 0.3 * r, |_, _| 0.0, |_, _| 0.0);
        assert!(matches!(Geometry::from_map(&g, &map), Err(Error::DegenerateMap(_))));
    }

    fn perturbed(g: &Grid, eps: f64) -> FlowMap {
        FlowMap::from_fn(g, |r, z| r + eps * r * r * r * z.sin(), |r, z| eps * r * r * z.cos(), |_, _| 0.0)
    }

    fn exact_grad(eps: f64) -> impl Fn(f64, f64) -> [f64; 4] {
        move |r, z| {
            [
                1.0 + 3.0 * eps * r * r * z.sin(),
                eps * r * r * r * z.cos(),
                2.0 * eps * r * z.cos(),
                1.0 - eps * r * r * z.sin(),
            ]
        }
    }

    #[test]
    fn jacobian_matches_symbolic_oracle() {
        let eps = 0.1;
        let mut errs = vec![];
        for n in [16, 32, 64] {
            let g = grid(n, n);
            let geo = Geometry::from_map(&g, &perturbed(&g, eps)).unwrap();
            let exact = Geometry::from_analytic(&g, exact_grad(eps));
            let err = (&geo.jac - &exact.jac)
                .max_abs()
                .max((&geo.a[0][1] - &exact.a[0][1]).max_abs());
            errs.push(err);
        }
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    }

    #[test]
    fn exact_algebra_on_random_maps() {
        let g = grid(24, 24);
        for seed in 0..20 {
            let map = random_smooth_map(&g, seed, 0.05);
            let geo = Geometry::from_map(&g, &map).unwrap();
            assert!(geo.transpose_product_residual() < 1e-12);
            assert!(geo.determinant_residual() < 1e-12);
        }
    }

    #[test]
    fn piola_identity_and_affine() {
        let g = grid(16, 16);
        let geo = Geometry::from_map(&g, &FlowMap::identity(&g)).unwrap();
        for row in piola_residual(&g, &geo) {
            assert!(row.max_abs() < 1e-12);
        }
        let map = FlowMap::from_fn(&g, |r, _| 1.1 * r, |_, _| 0.0, |_, _| 0.0);
        let geo = Geometry::from_map(&g, &map).unwrap();
        for row in piola_residual(&g, &geo) {
            assert!(row.max_abs() < 1e-12);
        }
    }

    #[test]
    fn piola_second_order_on_sampled_gradient() {
        let mut errs = vec![];
        for n in [16, 32, 64] {
            let g = grid(n, n);
            let geo = Geometry::from_analytic(&g, exact_grad(0.1));
            let [a, b] = piola_residual(&g, &geo);
            errs.push(a.max_abs().max(b.max_abs()));
        }
        let r1 = errs[0] / errs[1];
        let r2 = errs[1] / errs[2];
        assert!((3.5..=4.5).contains(&r2), "{errs:?} {r1} {r2}");
    }

    #[test]
    fn boundary_transfer_exact() {
        let g = grid(24, 32);
        let solver = EllipticSolver::new(&g, 1e-12);
        let kernel = MollifierKernel::new(4.0 * g.dz, &g).unwrap();
        for seed in 0..10 {
            let map = random_smooth_map(&g, seed, 0.05);
            let cache = GeomCache::build(&g, &map, &kernel, &solver).unwrap();
            let x0 = g.boundary_from_fn(|z| 1.0 + 0.3 * (seed as f64 + z).sin());
            let x1 = g.boundary_from_fn(|z| (2.0 * z).cos());
            let res = boundary_transfer_residual(&cache.boundary, [&x0, &x1]);
            assert!(res.max_abs() < 1e-12, "{}", res.max_abs());
        }
    }

    #[test]
    fn smoothing_leaves_z_independent_traces() {
        let g = grid(16, 32);
        let solver = EllipticSolver::new(&g, 1e-12);
        let kernel = MollifierKernel::new(4.0 * g.dz, &g).unwrap();
        let map = FlowMap::from_fn(&g, |r, _| 1.05 * r, |r, _| 0.1 * r * r, |_, _| 0.0);
        let s = smooth_map(&g, &map, &kernel, &solver).unwrap();
        assert!((&s.r - &map.r).max_abs() < 1e-12);
        assert!((&s.z_disp.value() - &map.z_disp.value()).max_abs() < 1e-12);
    }

    #[test]
    fn smoothing_matches_separated_solution() {
        // zeta = (r, z + eps sin z): the correction solves the flat Laplace
        // problem with data eps (m^2 - 1) sin z.
        let eps = 0.05;
        let mut errs = vec![];
        for n in [16, 32, 64] {
            let g = grid(n, 64);
            let solver = EllipticSolver::new(&g, 1e-12);
            let kernel = MollifierKernel::new(8.0 * g.dz, &g).unwrap();
            let m = kernel.multiplier(1.0);
            let map = FlowMap::from_fn(&g, |r, _| r, |_, z| eps * z.sin(), |_, _| 0.0);
            let s = smooth_map(&g, &map, &kernel, &solver).unwrap();
            let phi = &s.z_disp.value() - &map.z_disp.value();
            let exact = g.field_from_fn(Parity::Odd, |r, z| eps * (m * m - 1.0) * r.sinh() / 1f64.sinh() * z.sin());
            errs.push((&phi - &exact).max_abs());
            assert!((&s.r - &map.r).max_abs() < 1e-12);
        }
        assert!(errs[0] / errs[1] > 3.0 && errs[1] / errs[2] > 3.0, "{errs:?}");
    }

    #[test]
    fn reconstruct_identity_and_shift() {
        let g = grid(16, 16);
        let seed = MagneticSeed {
            b0r: g.field_from_fn(Parity::Odd, |r, z| r * (1.0 - r * r) * z.cos()),
            b0th: g.field_from_fn(Parity::Odd, |r, _| 0.5 * r),
            b0z: g.field_from_fn(Parity::Even, |r, z| 1.0 + r * r * z.sin()),
        };
        let b = reconstruct_b(&g, &seed, &FlowMap::identity(&g));
        assert!((&b.b_r - &seed.b0r).max_abs() < 1e-12);
        assert!((&b.b_th - &seed.b0th).max_abs() < 1e-12);
        assert!((&b.b_z - &seed.b0z).max_abs() < 1e-12);
        let shifted = FlowMap::from_fn(&g, |r, _| r, |_, _| 0.3, |_, _| 0.0);
        let b = reconstruct_b(&g, &seed, &shifted);
        assert!((&b.b_z - &seed.b0z).max_abs() < 1e-12);
        assert!((&b.b_r - &seed.b0r).max_abs() < 1e-12);
    }
}

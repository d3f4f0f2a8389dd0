//! Right-hand side of the smoothed Lagrangian system, the boundary
//! correction `psi`, the pressure sources, and RK4 time stepping.

use serde::{Deserialize, Serialize};

use crate::diagnostics;
use crate::elliptic::{EllipticSolver, SolveStats};
use crate::error::{Error, Result};
use crate::grid::{BoundaryFunction, Grid, Parity, ScalarField, SplitField};
use crate::kinematics::{reconstruct_b, smooth_pair, FlowMap, FrozenField, GeomCache, Geometry, MagneticSeed};
use crate::mollifier::MollifierKernel;
use crate::vacuum::{compute_a, pressure_boundary_data, InterfaceTraces, VacuumState};

/// Prognostic state.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub map: FlowMap,
    pub vr: ScalarField,
    pub vth: ScalarField,
    pub vz: ScalarField,
    pub vac: VacuumState,
    pub t: f64,
}

impl SimState {
    pub fn at_rest(grid: &Grid, vac: VacuumState) -> Self {
        SimState {
            map: FlowMap::identity(grid),
            vr: grid.zeros(Parity::Odd),
            vth: grid.zeros(Parity::Odd),
            vz: grid.zeros(Parity::Even),
            vac,
            t: 0.0,
        }
    }

    /// `self + h * rates`, including `ln C` and the clock.
    pub fn advanced(&self, rates: &Rates, h: f64) -> SimState {
        let mut s = self.clone();
        s.map.r.axpy(h, &rates.r);
        s.map.z_disp.axpy(h, &rates.z);
        s.map.theta_hat.axpy(h, &rates.theta);
        s.vr.axpy(h, &rates.vr);
        s.vth.axpy(h, &rates.vth);
        s.vz.axpy(h, &rates.vz);
        if s.vac.c != 0.0 {
            s.vac.c *= (h * rates.ln_c).exp();
        }
        s.vac.a_coeff = rates.ln_c;
        s.t += h;
        s
    }

    pub fn max_speed(&self) -> f64 {
        self.vr.max_abs().max(self.vth.max_abs()).max(self.vz.max_abs())
    }

    pub fn is_finite(&self) -> bool {
        self.map.is_finite() && self.vr.is_finite() && self.vth.is_finite() && self.vz.is_finite() && self.vac.c.is_finite()
    }
}

/// Time derivatives of the prognostic fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    pub r: ScalarField,
    pub z: SplitField,
    pub theta: ScalarField,
    pub vr: ScalarField,
    pub vth: ScalarField,
    pub vz: ScalarField,
    pub ln_c: f64,
}

impl Rates {
    pub fn max_abs(&self) -> f64 {
        [
            self.r.max_abs(),
            self.z.max_abs(),
            self.theta.max_abs(),
            self.vr.max_abs(),
            self.vth.max_abs(),
            self.vz.max_abs(),
            self.ln_c.abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityRoute {
    /// Rayleigh-Taylor sign on the whole interface.
    RtEverywhere,
    /// Rayleigh-Taylor sign only near zeros of `b0^z`.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub cfl: f64,
    pub dt_max: f64,
    pub kappa: f64,
    pub krylov_tol: f64,
    pub window_check_every: usize,
    pub lambda: f64,
    pub delta: f64,
    /// Route whose margin the window check enforces; `None` leaves the
    /// Rayleigh-Taylor margin unchecked.
    pub route: Option<StabilityRoute>,
}

impl StepConfig {
    pub fn new(kappa: f64) -> Self {
        StepConfig {
            cfl: 0.5,
            dt_max: 0.01,
            kappa,
            krylov_tol: 1e-10,
            window_check_every: 1,
            lambda: 0.0,
            delta: 0.0,
            route: Some(StabilityRoute::RtEverywhere),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(Error::InvalidParameter(format!("cfl = {} must lie in (0, 0.5]", self.cfl)));
        }
        if !(self.dt_max > 0.0) {
            return Err(Error::InvalidParameter("dt_max must be positive".into()));
        }
        if !(self.krylov_tol > 0.0 && self.krylov_tol < 1.0) {
            return Err(Error::InvalidParameter("krylov_tol must lie in (0, 1)".into()));
        }
        if self.window_check_every == 0 {
            return Err(Error::InvalidParameter("window_check_every must be positive".into()));
        }
        Ok(())
    }
}

/// Everything computed during one right-hand-side evaluation.
#[derive(Debug, Clone)]
pub struct Stage {
    pub rates: Rates,
    pub q: ScalarField,
    pub q_boundary: BoundaryFunction,
    pub cache: GeomCache,
    pub frozen: FrozenField,
    pub psi: [ScalarField; 2],
    pub g1: ScalarField,
    pub g2: ScalarField,
    pub pressure_stats: SolveStats,
}

/// Fixed ingredients of a run: grid, seed field, kernel and solvers.
#[derive(Debug)]
pub struct Model {
    pub grid: Grid,
    pub seed: MagneticSeed,
    pub kernel: MollifierKernel,
    pub solver: EllipticSolver,
    pub cfg: StepConfig,
}

/// `P f` followed by two periodic cumulative-trapezoid primitives, with the
/// intermediate primitive re-centered so the second is periodic too.
pub fn periodic_double_primitive(grid: &Grid, f: &BoundaryFunction) -> BoundaryFunction {
    let primitive = |g: &BoundaryFunction| -> BoundaryFunction {
        let mean = g.mean();
        let n = g.values.len();
        let mut out = vec![0.0; n];
        for j in 1..n {
            out[j] = out[j - 1] + 0.5 * grid.dz * ((g.values[j - 1] - mean) + (g.values[j] - mean));
        }
        BoundaryFunction { values: out }
    };
    primitive(&primitive(f))
}

/// `J Div g = (J/R) A_ij d_j(R g_i)` for a geometry and its radius field.
pub fn j_div(grid: &Grid, geom: &Geometry, rk: &ScalarField, g: [&ScalarField; 2]) -> ScalarField {
    let a = &geom.a;
    let mut acc = grid.zeros(Parity::Even);
    for i in 0..2 {
        let w = rk * g[i];
        let dr = grid.d_r(&w);
        let dz = grid.d_z(&w);
        for k in 0..acc.values.len() {
            acc.values[k] += a[i][0].values[k] * dr.values[k] + a[i][1].values[k] * dz.values[k];
        }
    }
    for k in 0..acc.values.len() {
        acc.values[k] *= geom.jac.values[k] / rk.values[k];
    }
    acc
}

/// `J (d/dt Div) nu`: the divergence operator differentiated in time
/// through the smoothed map, applied to a frozen `nu`.
pub fn j_div_rate(
    grid: &Grid,
    cache: &GeomCache,
    nu: [&ScalarField; 2],
    rk_rate: &ScalarField,
    zk_rate: &SplitField,
) -> ScalarField {
    let n = grid.len();
    let rk = cache.rk();
    let a = &cache.smooth.a;
    let fdot = [[grid.d_r(rk_rate), grid.d_z(rk_rate)], [zk_rate.d_r(grid), zk_rate.d_z(grid)]];
    let mut out = vec![0.0; n];
    for i in 0..2 {
        let w = rk * nu[i];
        let wd = rk_rate * nu[i];
        let dw = [grid.d_r(&w), grid.d_z(&w)];
        let dwd = [grid.d_r(&wd), grid.d_z(&wd)];
        for k in 0..n {
            let r = rk.values[k];
            let rd = rk_rate.values[k];
            for j in 0..2 {
                let mut adot = 0.0;
                for l in 0..2 {
                    for m in 0..2 {
                        adot -= a[i][l].values[k] * fdot[m][l].values[k] * a[m][j].values[k];
                    }
                }
                let aij = a[i][j].values[k];
                let coef = adot / r - aij * rd / (r * r);
                out[k] += coef * dw[j].values[k] + aij / r * dwd[j].values[k];
            }
        }
    }
    for (o, jk) in out.iter_mut().zip(&cache.smooth.jac.values) {
        *o *= jk;
    }
    ScalarField { values: out, parity: Parity::Even }
}

impl Model {
    pub fn new(grid: &Grid, seed: MagneticSeed, cfg: StepConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Model {
            grid: *grid,
            seed,
            kernel: MollifierKernel::new(cfg.kappa, grid)?,
            solver: EllipticSolver::new(grid, cfg.krylov_tol),
            cfg,
        })
    }

    pub fn geometry(&self, map: &FlowMap) -> Result<GeomCache> {
        GeomCache::build(&self.grid, map, &self.kernel, &self.solver)
    }

    /// Boundary data of the correction `psi`: the double primitive of
    /// `d_z^2 zeta_j A_j2 d_z Lambda^2 nu_i - d_z^2 Lambda^2 zeta_j A_j2 d_z nu_i`.
    pub fn psi_boundary_data(&self, state: &SimState, cache: &GeomCache) -> [BoundaryFunction; 2] {
        let g = &self.grid;
        let zeta = [g.boundary_trace(&state.map.r), state.map.z_disp.trace(g)];
        let nu = [g.boundary_trace(&state.vr), g.boundary_trace(&state.vz)];
        let d2 = |f: &BoundaryFunction| g.d_z_boundary_n(f, 2);
        let d2_zeta: Vec<BoundaryFunction> = zeta.iter().map(d2).collect();
        let d2_lzeta: Vec<BoundaryFunction> = zeta.iter().map(|f| d2(&self.kernel.apply_twice(f))).collect();
        let s = [&cache.boundary.a[0][1], &cache.boundary.a[1][1]];
        let mut out = [g.boundary_constant(0.0), g.boundary_constant(0.0)];
        for i in 0..2 {
            let dz_lnu = g.d_z_boundary(&self.kernel.apply_twice(&nu[i]));
            let dz_nu = g.d_z_boundary(&nu[i]);
            let mut f = vec![0.0; g.nz];
            for j in 0..2 {
                for k in 0..g.nz {
                    f[k] += d2_zeta[j].values[k] * s[j].values[k] * dz_lnu.values[k]
                        - d2_lzeta[j].values[k] * s[j].values[k] * dz_nu.values[k];
                }
            }
            out[i] = periodic_double_primitive(g, &BoundaryFunction { values: f });
        }
        out
    }

    /// Flat-harmonic extension of the `psi` data, each component pinned to
    /// zero at the axis.
    pub fn psi_field(&self, data: &[BoundaryFunction; 2]) -> Result<[ScalarField; 2]> {
        Ok([
            self.solver.solve_flat_laplace(&data[0])?.0,
            self.solver.solve_flat_laplace(&data[1])?.0,
        ])
    }

    /// Radial body force `(v^theta)^2 / R - R (b0 . grad Theta)^2`.
    pub fn radial_forcing(&self, state: &SimState, b_dot_theta: &ScalarField) -> ScalarField {
        let r = &state.map.r;
        let n = self.grid.len();
        let values = (0..n)
            .map(|k| {
                let v = state.vth.values[k];
                let s = b_dot_theta.values[k];
                v * v / r.values[k] - r.values[k] * s * s
            })
            .collect();
        ScalarField { values, parity: Parity::Odd }
    }

    /// `(G1, G2)` with `G2 = J Div(b0 . grad zeta)` and
    /// `G1 = J (d/dt Div) nu + J Div(F, 0) + J Div(D X) - D(G2)`.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble_pressure_sources(
        &self,
        state: &SimState,
        cache: &GeomCache,
        frozen: &FrozenField,
        forcing: &ScalarField,
        rk_rate: &ScalarField,
        zk_rate: &SplitField,
    ) -> (ScalarField, ScalarField) {
        let g = &self.grid;
        let g2 = j_div(g, &cache.smooth, cache.rk(), [&frozen.b_r, &frozen.b_z]);
        let dx_r = self.seed.directional(g, &frozen.b_r);
        let dx_z = self.seed.directional(g, &frozen.b_z);
        let zero = g.zeros(Parity::Even);
        let mut g1 = j_div_rate(g, cache, [&state.vr, &state.vz], rk_rate, zk_rate);
        g1.axpy(1.0, &j_div(g, &cache.smooth, cache.rk(), [forcing, &zero]));
        g1.axpy(1.0, &j_div(g, &cache.smooth, cache.rk(), [&dx_r, &dx_z]));
        g1.axpy(-1.0, &self.seed.directional(g, &g2));
        (g1, g2)
    }

    /// One full right-hand-side evaluation.
    pub fn evaluate(&self, state: &SimState) -> Result<Stage> {
        let g = &self.grid;
        let cache = self.geometry(&state.map)?;
        let frozen = reconstruct_b(g, &self.seed, &state.map);
        let b_dot_theta = self.seed.dot_grad_theta(g, &state.map.theta_hat);

        let psi_data = self.psi_boundary_data(state, &cache);
        let psi = self.psi_field(&psi_data)?;
        let zeta_rate_r = &state.vr + &psi[0];
        let zeta_rate_z = SplitField {
            even: state.vz.clone(),
            odd: psi[1].clone(),
        };
        let (rk_rate, zk_rate) = smooth_pair(g, &zeta_rate_r, &zeta_rate_z, &self.kernel, &self.solver)?;

        let forcing = self.radial_forcing(state, &b_dot_theta);
        let (g1, g2) = self.assemble_pressure_sources(state, &cache, &frozen, &forcing, &rk_rate, &zk_rate);
        let q_boundary = pressure_boundary_data(state.vac.c, &cache.boundary.rk)?;
        let coeffs = cache.pressure_coefficients(g);
        let (q, pressure_stats) =
            self.solver
                .solve_pressure(&coeffs, &g1, &g2, &self.seed.b0r, &self.seed.b0z, &q_boundary)?;

        let dq = [g.d_r(&q), g.d_z(&q)];
        let a = &cache.smooth.a;
        let n = g.len();
        let dbr = self.seed.directional(g, &frozen.b_r);
        let dbz = self.seed.directional(g, &frozen.b_z);
        let mut vr_rate = vec![0.0; n];
        let mut vz_rate = vec![0.0; n];
        for k in 0..n {
            vr_rate[k] = -(a[0][0].values[k] * dq[0].values[k] + a[0][1].values[k] * dq[1].values[k])
                + dbr.values[k]
                + forcing.values[k];
            vz_rate[k] = -(a[1][0].values[k] * dq[0].values[k] + a[1][1].values[k] * dq[1].values[k]) + dbz.values[k];
        }
        let dbth = self.seed.directional(g, &frozen.b_th);
        let r = &state.map.r;
        let vth_rate = (0..n)
            .map(|k| {
                dbth.values[k] - state.vth.values[k] * state.vr.values[k] / r.values[k]
                    + frozen.b_r.values[k] * b_dot_theta.values[k]
            })
            .collect();
        let theta_rate = state.vth.div(r).with_parity(Parity::Even);

        let r_trace = g.boundary_trace(&state.map.r);
        let zd_trace = state.map.z_disp.trace(g);
        let vr_trace = g.boundary_trace(&state.vr);
        let vz_trace = g.boundary_trace(&state.vz);
        let ln_c = compute_a(
            g,
            InterfaceTraces {
                r: &r_trace,
                z_disp: &zd_trace,
                vr: &vr_trace,
                vz: &vz_trace,
            },
            state.vac.rs,
        )?;

        let rates = Rates {
            r: zeta_rate_r,
            z: zeta_rate_z,
            theta: theta_rate,
            vr: ScalarField { values: vr_rate, parity: Parity::Odd },
            vth: ScalarField { values: vth_rate, parity: Parity::Odd },
            vz: ScalarField { values: vz_rate, parity: Parity::Even },
            ln_c,
        };
        Ok(Stage {
            rates,
            q,
            q_boundary,
            cache,
            frozen,
            psi,
            g1,
            g2,
            pressure_stats,
        })
    }

    /// Largest step allowed by the CFL bound at this state.
    pub fn stable_dt(&self, state: &SimState) -> f64 {
        let frozen = reconstruct_b(&self.grid, &self.seed, &state.map);
        let bmax = frozen.b_r.max_abs().max(frozen.b_th.max_abs()).max(frozen.b_z.max_abs());
        let speed = 1f64.max(state.max_speed()).max(bmax);
        (self.cfg.cfl * self.grid.dr.min(self.grid.dz) / speed).min(self.cfg.dt_max)
    }

    /// First violated a priori condition at a stage, if any.
    pub fn window_violation(&self, state: &SimState, stage: &Stage) -> Option<String> {
        if let Some(reason) = stage.cache.smooth.window_violation() {
            return Some(reason);
        }
        if let Err(e) = state.vac.check_confinement(&self.grid.boundary_trace(&state.map.r)) {
            return Some(e.to_string());
        }
        let margins = diagnostics::rt_margin_pointwise(&self.grid, &stage.q, state.vac.c, stage.cache.rk());
        let scope: Vec<usize> = match self.cfg.route? {
            StabilityRoute::RtEverywhere => (0..self.grid.nz).collect(),
            StabilityRoute::Mixed => {
                let b0z = self.grid.boundary_trace(&self.seed.b0z);
                diagnostics::gamma_prime(&b0z, self.cfg.delta)
            }
        };
        let floor = 0.5 * self.cfg.lambda;
        scope
            .into_iter()
            .find(|&j| !(margins.values[j] >= floor))
            .map(|j| format!("Rayleigh-Taylor margin {:.3e} below {floor:.3e} at z-node {j}", margins.values[j]))
    }

    /// Classical RK4. Returns the stage-1 evaluation (at the start of the
    /// step) alongside the new state.
    pub fn step(&self, state: &SimState, dt: f64) -> Result<(SimState, Stage)> {
        let limit = self.stable_dt(state);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!("dt = {dt:.3e} exceeds the CFL bound {limit:.3e}")));
        }
        let s1 = self.evaluate(state)?;
        let k1 = &s1.rates;
        let k2 = self.evaluate(&state.advanced(k1, 0.5 * dt))?.rates;
        let k3 = self.evaluate(&state.advanced(&k2, 0.5 * dt))?.rates;
        let k4 = self.evaluate(&state.advanced(&k3, dt))?.rates;
        let w = dt / 6.0;
        let mut next = state.clone();
        for (k, c) in [(k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)] {
            next.map.r.axpy(w * c, &k.r);
            next.map.z_disp.axpy(w * c, &k.z);
            next.map.theta_hat.axpy(w * c, &k.theta);
            next.vr.axpy(w * c, &k.vr);
            next.vth.axpy(w * c, &k.vth);
            next.vz.axpy(w * c, &k.vz);
        }
        next.vac = state.vac.advance([k1.ln_c, k2.ln_c, k3.ln_c, k4.ln_c], dt);
        next.t = state.t + dt;
        if !next.is_finite() {
            return Err(Error::SolverFailure {
                iterations: 0,
                residual: f64::NAN,
            });
        }
        Ok((next, s1))
    }

    /// RK4 on `d zeta / dt = nu + psi` with `nu` frozen; the transport part
    /// of the system in isolation.
    pub fn transport_step(&self, map: &FlowMap, vr: &ScalarField, vz: &ScalarField, dt: f64) -> Result<FlowMap> {
        let rate = |m: &FlowMap| -> Result<(ScalarField, SplitField)> {
            let st = SimState {
                map: m.clone(),
                vr: vr.clone(),
                vth: self.grid.zeros(Parity::Odd),
                vz: vz.clone(),
                vac: VacuumState { c: 0.0, rs: f64::MAX, a_coeff: 0.0 },
                t: 0.0,
            };
            let cache = self.geometry(m)?;
            let psi = self.psi_field(&self.psi_boundary_data(&st, &cache))?;
            Ok((
                vr + &psi[0],
                SplitField {
                    even: vz.clone(),
                    odd: psi[1].clone(),
                },
            ))
        };
        let shift = |m: &FlowMap, k: &(ScalarField, SplitField), h: f64| {
            let mut out = m.clone();
            out.r.axpy(h, &k.0);
            out.z_disp.axpy(h, &k.1);
            out
        };
        let k1 = rate(map)?;
        let k2 = rate(&shift(map, &k1, 0.5 * dt))?;
        let k3 = rate(&shift(map, &k2, 0.5 * dt))?;
        let k4 = rate(&shift(map, &k3, dt))?;
        let mut out = map.clone();
        for (k, c) in [(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)] {
            out.r.axpy(dt / 6.0 * c, &k.0);
            out.z_disp.axpy(dt / 6.0 * c, &k.1);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(n, n, 1.0, 2.0 * PI).unwrap()
    }

    fn model(g: &Grid, seed: MagneticSeed) -> Model {
        Model::new(g, seed, StepConfig::new(4.0 * g.dz)).unwrap()
    }

    #[test]
    fn double_primitive_is_periodic_and_inverts() {
        let g = grid(64);
        let f = g.boundary_from_fn(|z| 0.3 + z.sin() + 0.5 * (3.0 * z).cos());
        let p = periodic_double_primitive(&g, &f);
        // second centered difference is the trapezoid-averaged P f
        let n = g.nz;
        let avg = |j: usize| 0.25 * (f.values[(j + n - 1) % n] + 2.0 * f.values[j] + f.values[(j + 1) % n]) - 0.3;
        for j in 1..n - 1 {
            let d2 = (p.values[j + 1] - 2.0 * p.values[j] + p.values[j - 1]) / (g.dz * g.dz);
            assert!((d2 - avg(j)).abs() < 1e-10, "{j} {d2}");
            assert!((d2 - (f.values[j] - 0.3)).abs() < 2e-2);
        }
        // wrap-around closes up to the same accuracy
        for j in [0, n - 1] {
            let d2 = (p.values[(j + 1) % n] - 2.0 * p.values[j] + p.values[(j + n - 1) % n]) / (g.dz * g.dz);
            assert!((d2 - (f.values[j] - 0.3)).abs() < 2e-2, "{j} {d2}");
        }
    }

    #[test]
    fn psi_vanishes_for_z_independent_traces() {
        let g = grid(16);
        let m = model(&g, MagneticSeed::zero(&g));
        let mut s = SimState::at_rest(&g, VacuumState::new(0.0, 2.0).unwrap());
        s.vr = g.field_from_fn(Parity::Odd, |r, _| 0.1 * r);
        let cache = m.geometry(&s.map).unwrap();
        let data = m.psi_boundary_data(&s, &cache);
        assert!(data[0].max_abs() < 1e-14 && data[1].max_abs() < 1e-14);
    }

    #[test]
    fn psi_vanishes_for_identity_kernel() {
        let g = grid(16);
        let mut cfg = StepConfig::new(g.dz);
        cfg.kappa = g.dz;
        let m = Model::new(&g, MagneticSeed::zero(&g), cfg).unwrap();
        let mut s = SimState::at_rest(&g, VacuumState::new(0.0, 2.0).unwrap());
        s.map = crate::kinematics::random_smooth_map(&g, 3, 0.05);
        s.vr = g.field_from_fn(Parity::Odd, |r, z| 0.1 * r * z.sin());
        s.vz = g.field_from_fn(Parity::Even, |r, z| 0.1 * r * r * z.cos());
        let cache = m.geometry(&s.map).unwrap();
        let data = m.psi_boundary_data(&s, &cache);
        assert!(data[0].max_abs() < 1e-13 && data[1].max_abs() < 1e-13);
    }

    #[test]
    fn rest_state_has_zero_rates() {
        let g = grid(16);
        let m = model(&g, MagneticSeed::zero(&g));
        let s = SimState::at_rest(&g, VacuumState::new(0.0, 2.0).unwrap());
        let stage = m.evaluate(&s).unwrap();
        assert_eq!(stage.rates.max_abs(), 0.0);
        assert_eq!(stage.q.max_abs(), 0.0);
    }

    #[test]
    fn swirl_source_closed_form() {
        // v^theta = r at the identity: J Div(F, 0) = (1/r + d_r)(r) = 2.
        let g = grid(32);
        let m = model(&g, MagneticSeed::zero(&g));
        let mut s = SimState::at_rest(&g, VacuumState::new(0.0, 2.0).unwrap());
        s.vth = g.r_field();
        let stage = m.evaluate(&s).unwrap();
        for i in 0..g.nr - 1 {
            let v = stage.g1.values[g.idx(i, 5)];
            assert!((v - 2.0).abs() < 1e-10, "{i} {v}");
        }
        assert!(stage.g2.max_abs() == 0.0);
        // the solved pressure satisfies the discrete operator identity
        let coeffs = stage.cache.pressure_coefficients(&g);
        let lq = m.solver.apply_pressure(&coeffs, &stage.q, &stage.q_boundary);
        let res = (&lq - &stage.g1).max_abs();
        assert!(res < 1e-8, "{res}");
    }

    #[test]
    fn axial_field_reduces_to_boundary_pressure() {
        let g = grid(16);
        let mut seed = MagneticSeed::zero(&g);
        seed.b0z = g.constant(0.8);
        let m = model(&g, seed);
        let s = SimState::at_rest(&g, VacuumState::new(0.6, 2.0).unwrap());
        let stage = m.evaluate(&s).unwrap();
        assert!(stage.g2.max_abs() < 1e-14);
        assert!(stage.g1.max_abs() < 1e-14);
        assert!(stage.q.values.iter().all(|&q| (q - 0.18).abs() < 1e-10));
        assert!(stage.rates.max_abs() < 1e-9);
    }

    #[test]
    fn rest_step_is_invariant() {
        let g = grid(16);
        let m = model(&g, MagneticSeed::zero(&g));
        let s = SimState::at_rest(&g, VacuumState::new(0.0, 2.0).unwrap());
        let (next, _) = m.step(&s, 0.01).unwrap();
        assert_eq!(next.map, s.map);
        assert_eq!(next.vr, s.vr);
    }

    #[test]
    fn transport_is_reversible() {
        let g = grid(32);
        let m = model(&g, MagneticSeed::zero(&g));
        let map = FlowMap::identity(&g);
        let vr = g.field_from_fn(Parity::Odd, |r, z| 0.1 * r * (1.0 - r * r) * z.sin());
        let vz = g.field_from_fn(Parity::Even, |r, z| 0.1 * (1.0 - 2.0 * r * r) * z.cos());
        let fwd = m.transport_step(&map, &vr, &vz, 0.01).unwrap();
        let back = m.transport_step(&fwd, &vr, &vz, -0.01).unwrap();
        assert!((&back.r - &map.r).max_abs() < 1e-10);
        assert!((&back.z_disp.value() - &map.z_disp.value()).max_abs() < 1e-10);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let g = grid(16);
        let m = model(&g, MagneticSeed::zero(&g));
        let s = SimState::at_rest(&g, VacuumState::new(0.0, 2.0).unwrap());
        assert!(m.step(&s, 1.0).is_err());
    }
}

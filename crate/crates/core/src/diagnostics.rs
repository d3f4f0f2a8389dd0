//! Monitored quantities: energy, residuals, stability margins, good
//! unknowns, and an independent transport check of the frozen-in field.

pub mod lemmas;

use serde::{Deserialize, Serialize};

use crate::dynamics::{j_div, Model, SimState, Stage};
use crate::grid::{BoundaryFunction, Grid, Parity, ScalarField, SplitField};
use crate::kinematics::{reconstruct_b, FrozenField, GeomCache, Geometry, MagneticSeed};
use crate::mollifier::MollifierKernel;

/// One row of the time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy: f64,
    pub div_nu: f64,
    pub div_b: f64,
    pub curl_nu: f64,
    pub rt_margin: f64,
    pub noncol_margin: f64,
    pub boundary_energy: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub window_ok: bool,
}

impl DiagnosticsRecord {
    pub fn is_finite(&self) -> bool {
        [
            self.t,
            self.energy,
            self.div_nu,
            self.div_b,
            self.curl_nu,
            self.rt_margin,
            self.noncol_margin,
            self.boundary_energy,
            self.c,
        ]
        .iter()
        .all(|x| x.is_finite())
    }
}

/// `||v||_4^2 + ||(R, Z)||_4^2 + ||b||_4^2` for the frozen-in field `b`.
pub fn energy(grid: &Grid, state: &SimState, frozen: &FrozenField) -> f64 {
    let n = |f: &ScalarField| grid.weighted_norm_sq(f, 4);
    n(&state.vr)
        + n(&state.vth)
        + n(&state.vz)
        + n(&state.map.r)
        + grid.weighted_norm_sq_with_z(&state.map.z_disp.value(), 4)
        + n(&frozen.b_r)
        + n(&frozen.b_th)
        + n(&frozen.b_z)
}

/// `-d_r(q - C^2 / (2 R_k^2))` at each interface node.
pub fn rt_margin_pointwise(grid: &Grid, q: &ScalarField, c: f64, rk: &ScalarField) -> BoundaryFunction {
    let phi = q.zip_map(rk, Parity::Even, |q, r| q - 0.5 * c * c / (r * r));
    grid.boundary_normal_derivative(&phi).map(|x| -x)
}

pub fn rt_margin(grid: &Grid, q: &ScalarField, c: f64, rk: &ScalarField) -> f64 {
    rt_margin_pointwise(grid, q, c, rk).values.into_iter().fold(f64::INFINITY, f64::min)
}

/// Interface nodes where `b0^z` vanishes or changes sign. At a sign change
/// the node with the smaller `|b0^z|` is taken.
pub fn gamma_set(b0z: &BoundaryFunction) -> Vec<usize> {
    let n = b0z.values.len();
    let mut hit = vec![false; n];
    for j in 0..n {
        let a = b0z.values[j];
        let b = b0z.values[(j + 1) % n];
        if a == 0.0 {
            hit[j] = true;
        } else if a * b < 0.0 {
            hit[if a.abs() <= b.abs() { j } else { (j + 1) % n }] = true;
        }
    }
    (0..n).filter(|&j| hit[j]).collect()
}

/// Connected dilation of `gamma` through nodes with `|b0^z| < delta`.
pub fn gamma_prime(b0z: &BoundaryFunction, delta: f64) -> Vec<usize> {
    let n = b0z.values.len();
    let mut inside = vec![false; n];
    let mut stack = gamma_set(b0z);
    for &j in &stack {
        inside[j] = true;
    }
    while let Some(j) = stack.pop() {
        for nb in [(j + 1) % n, (j + n - 1) % n] {
            if !inside[nb] && b0z.values[nb].abs() < delta {
                inside[nb] = true;
                stack.push(nb);
            }
        }
    }
    (0..n).filter(|&j| inside[j]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedReport {
    pub pass: bool,
    pub gamma: Vec<usize>,
    pub gamma_prime: Vec<usize>,
    /// `gamma'` swallowed the whole interface.
    pub gamma_prime_is_everything: bool,
    /// Worst node and the failing quantity (RT margin or `|b0^z|`).
    pub worst_node: Option<usize>,
    pub worst_value: Option<f64>,
    pub reason: Option<String>,
}

/// RT sign `>= lambda` on `gamma'` and `|b0^z| >= delta` everywhere else.
pub fn mixed_condition_check(b0z: &BoundaryFunction, margins: &BoundaryFunction, delta: f64, lambda: f64) -> MixedReport {
    let n = b0z.values.len();
    let gamma = gamma_set(b0z);
    let gp = gamma_prime(b0z, delta);
    let mut in_gp = vec![false; n];
    for &j in &gp {
        in_gp[j] = true;
    }
    let mut worst: Option<(usize, f64, &'static str)> = None;
    let mut note = |j: usize, slack: f64, what: &'static str| {
        if slack < 0.0 && worst.map_or(true, |(_, s, _)| slack < s) {
            worst = Some((j, slack, what));
        }
    };
    for j in 0..n {
        if in_gp[j] {
            note(j, margins.values[j] - lambda, "rt");
        } else {
            note(j, b0z.values[j].abs() - delta, "noncol");
        }
    }
    let (worst_node, worst_value, reason) = match worst {
        None => (None, None, None),
        Some((j, _, "rt")) => (
            Some(j),
            Some(margins.values[j]),
            Some(format!("Rayleigh-Taylor margin {:.3e} below {lambda} at z-node {j}", margins.values[j])),
        ),
        Some((j, _, _)) => (
            Some(j),
            Some(b0z.values[j].abs()),
            Some(format!("|b0^z| = {:.3e} below {delta} at z-node {j}", b0z.values[j].abs())),
        ),
    };
    MixedReport {
        pass: worst_node.is_none(),
        gamma,
        gamma_prime_is_everything: gp.len() == n,
        gamma_prime: gp,
        worst_node,
        worst_value,
        reason,
    }
}

/// Reference-frame cylindrical divergence `d_r f_r + f_r / r + d_z f_z`.
pub fn cyl_divergence(grid: &Grid, fr: &ScalarField, fz: &ScalarField) -> ScalarField {
    let mut out = &grid.d_r(fr) + &grid.d_z(fz);
    for i in 0..grid.nr {
        let r = grid.r(i);
        for j in 0..grid.nz {
            let k = grid.idx(i, j);
            out.values[k] += fr.values[k] / r;
        }
    }
    out.with_parity(Parity::Even)
}

/// `Div_A f` for a geometry and its radius.
pub fn divergence(grid: &Grid, geom: &Geometry, radius: &ScalarField, f: [&ScalarField; 2]) -> ScalarField {
    j_div(grid, geom, radius, f).zip_map(&geom.jac, Parity::Even, |a, j| a / j)
}

/// `curl_A f = d^A_Z f_r - d^A_R f_z`.
pub fn curl(grid: &Grid, geom: &Geometry, f: [&ScalarField; 2]) -> ScalarField {
    let a = geom.grad_component(grid, 1, f[0]);
    let b = geom.grad_component(grid, 0, f[1]);
    (&a - &b).with_parity(Parity::Odd)
}

/// `max |J - r/R|`: how far the map is from preserving the
/// cylindrical volume element `R dR dZ = r dr dz`.
pub fn volume_defect(grid: &Grid, geom: &Geometry, r_map: &ScalarField) -> f64 {
    let mut worst = 0f64;
    for i in 0..grid.nr {
        for j in 0..grid.nz {
            let k = grid.idx(i, j);
            worst = worst.max((geom.jac.values[k] - grid.r(i) / r_map.values[k]).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualNorms {
    pub div_nu: [f64; 2],
    pub div_b: [f64; 2],
    pub curl_nu: [f64; 2],
    pub curl_b: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub div_nu: ScalarField,
    pub div_b: ScalarField,
    pub curl_nu: ScalarField,
    pub curl_b: ScalarField,
}

impl Residuals {
    /// Weighted norms at orders 0 and 3.
    pub fn norms(&self, grid: &Grid) -> ResidualNorms {
        let n = |f: &ScalarField| [grid.weighted_norm(f, 0), grid.weighted_norm(f, 3)];
        ResidualNorms {
            div_nu: n(&self.div_nu),
            div_b: n(&self.div_b),
            curl_nu: n(&self.curl_nu),
            curl_b: n(&self.curl_b),
        }
    }
}

/// Divergence and curl of the velocity (smoothed geometry) and of the
/// frozen-in field (geometry of the map itself).
pub fn residuals(grid: &Grid, state: &SimState, cache: &GeomCache, frozen: &FrozenField) -> Residuals {
    Residuals {
        div_nu: divergence(grid, &cache.smooth, cache.rk(), [&state.vr, &state.vz]),
        div_b: divergence(grid, &cache.base, &state.map.r, [&frozen.b_r, &frozen.b_z]),
        curl_nu: curl(grid, &cache.smooth, [&state.vr, &state.vz]),
        curl_b: curl(grid, &cache.base, [&frozen.b_r, &frozen.b_z]),
    }
}

/// `d_z^4 f - d_z^4 zeta_l A_lj d_j f`.
fn good_unknown(grid: &Grid, geom: &Geometry, d4_zeta: &[ScalarField; 2], f: &ScalarField) -> ScalarField {
    let mut out = grid.d_z_n(f, 4);
    for (l, dz4) in d4_zeta.iter().enumerate() {
        let g = geom.grad_component(grid, l, f);
        for k in 0..out.values.len() {
            out.values[k] -= dz4.values[k] * g.values[k];
        }
    }
    out
}

fn d4_of_map(grid: &Grid, r: &ScalarField, z: &SplitField) -> [ScalarField; 2] {
    [grid.d_z_n(r, 4), grid.d_z_n(&z.value(), 4)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodUnknowns {
    pub v: [ScalarField; 2],
    pub q: ScalarField,
}

/// Alinhac good unknowns built from `d_z^4` of the map and the smoothed
/// cofactor matrix.
pub fn good_unknowns(grid: &Grid, state: &SimState, q: &ScalarField, cache: &GeomCache) -> GoodUnknowns {
    let d4 = d4_of_map(grid, &state.map.r, &state.map.z_disp);
    GoodUnknowns {
        v: [
            good_unknown(grid, &cache.smooth, &d4, &state.vr),
            good_unknown(grid, &cache.smooth, &d4, &state.vz),
        ],
        q: good_unknown(grid, &cache.smooth, &d4, q),
    }
}

/// `|d_z^4 Lambda zeta_i A_i1|_0` on the interface.
pub fn boundary_energy(grid: &Grid, state: &SimState, cache: &GeomCache, kernel: &MollifierKernel) -> f64 {
    let traces = [grid.boundary_trace(&state.map.r), state.map.z_disp.trace(grid)];
    let mut acc = grid.boundary_constant(0.0);
    for (i, tr) in traces.iter().enumerate() {
        let d4 = grid.d_z_boundary_n(&kernel.apply(tr), 4);
        acc = &acc + &(&d4 * &cache.boundary.a[i][0]);
    }
    grid.boundary_norm(&acc, 0)
}

/// Residual of the good-unknown commutator decomposition
/// `d^4(grad_A q) - grad_A Q - C(q)`, where, with `d = d_z`,
/// `C_i = [d^4, A_ij, d_j q] + d^4 zeta_m d^A_i(d^A_m q) - [d^3, A_il A_mj] d(F_ml) d_j q`.
/// Returns `(max residual, max |d^4 grad_A q|)` over both components,
/// using the smoothed map and its cofactor matrix throughout.
pub fn commutator_residual(grid: &Grid, q: &ScalarField, cache: &GeomCache) -> (f64, f64) {
    let geom = &cache.smooth;
    let a = &geom.a;
    let d4 = |f: &ScalarField| grid.d_z_n(f, 4);
    let d3 = |f: &ScalarField| grid.d_z_n(f, 3);
    let d4_zeta = d4_of_map(grid, &cache.zeta_k.r, &cache.zeta_k.z_disp);
    let dq = [grid.d_r(q), grid.d_z(q)];
    let big_q = good_unknown(grid, geom, &d4_zeta, q);
    let grad_a_q = [geom.grad_component(grid, 0, q), geom.grad_component(grid, 1, q)];
    let dzf = [
        [grid.d_z(&geom.f[0][0]), grid.d_z(&geom.f[0][1])],
        [grid.d_z(&geom.f[1][0]), grid.d_z(&geom.f[1][1])],
    ];
    let mut worst = 0.0_f64;
    let mut scale = 0.0_f64;
    for i in 0..2 {
        let lhs = d4(&grad_a_q[i]);
        let mut rhs = geom.grad_component(grid, i, &big_q);
        for j in 0..2 {
            // symmetric commutator [d^4, A_ij, d_j q]
            let prod = &a[i][j] * &dq[j];
            let sym = &(&d4(&prod) - &(&d4(&a[i][j]) * &dq[j])) - &(&a[i][j] * &d4(&dq[j]));
            rhs = &rhs + &sym;
            for l in 0..2 {
                for m in 0..2 {
                    let c = &a[i][l] * &a[m][j];
                    let h = &dzf[m][l];
                    let comm = &(&d3(&(&c * h)) - &(&c * &d3(h))) * &dq[j];
                    rhs = &rhs - &comm;
                }
            }
        }
        for m in 0..2 {
            let inner = geom.grad_component(grid, i, &grad_a_q[m]);
            rhs = &rhs + &(&d4_zeta[m] * &inner);
        }
        // the axial part of the map carries an odd component whose ghost
        // parity is lost in `d_z^4 Z`, so rows next to the axis are skipped
        let diff = &lhs - &rhs;
        for ir in grid.nr / 4..grid.nr {
            for jz in 0..grid.nz {
                worst = worst.max(diff.values[grid.idx(ir, jz)].abs());
            }
        }
        scale = scale.max(lhs.max_abs());
    }
    (worst, scale)
}

/// Full diagnostics record at a stage.
pub fn record(model: &Model, state: &SimState, stage: &Stage, window_ok: bool) -> DiagnosticsRecord {
    let g = &model.grid;
    let res = residuals(g, state, &stage.cache, &stage.frozen);
    let b0z = g.boundary_trace(&model.seed.b0z);
    DiagnosticsRecord {
        t: state.t,
        energy: energy(g, state, &stage.frozen),
        div_nu: g.l2_norm(&res.div_nu),
        div_b: g.l2_norm(&res.div_b),
        curl_nu: g.l2_norm(&res.curl_nu),
        rt_margin: rt_margin(g, &stage.q, state.vac.c, stage.cache.rk()),
        noncol_margin: b0z.values.iter().map(|b| b.abs()).fold(f64::INFINITY, f64::min),
        boundary_energy: boundary_energy(g, state, &stage.cache, &model.kernel),
        c: state.vac.c,
        window_ok,
    }
}

/// Integrates the frozen-in transport equations
/// `d_t b_i = (b_k A_kj d_j)(d_t zeta_i)` and
/// `d_t s = (b_k A_kj d_j)(d_t Theta_hat)` with `s = b^theta / R`,
/// from rates sampled at step endpoints. Third order (two-step
/// Adams-Moulton corrector over an Adams-Bashforth predictor), so its
/// disagreement with the reconstruction shrinks with the step size.
#[derive(Debug, Clone)]
pub struct TransportTracker {
    pub b_r: ScalarField,
    pub b_z: ScalarField,
    pub s: ScalarField,
    prev_slope: Option<[ScalarField; 3]>,
}

/// Endpoint data: geometry of the unsmoothed map and the map rates.
pub struct TransportSample<'a> {
    pub geom: &'a Geometry,
    pub r_rate: &'a ScalarField,
    pub z_rate: &'a SplitField,
    pub theta_rate: &'a ScalarField,
}

impl<'a> TransportSample<'a> {
    pub fn from_stage(stage: &'a Stage) -> Self {
        TransportSample {
            geom: &stage.cache.base,
            r_rate: &stage.rates.r,
            z_rate: &stage.rates.z,
            theta_rate: &stage.rates.theta,
        }
    }
}

impl TransportTracker {
    pub fn new(grid: &Grid, seed: &MagneticSeed) -> Self {
        let mut s = seed.b0th.clone();
        for i in 0..grid.nr {
            for j in 0..grid.nz {
                s.values[grid.idx(i, j)] /= grid.r(i);
            }
        }
        TransportTracker {
            b_r: seed.b0r.clone(),
            b_z: seed.b0z.clone(),
            s: s.with_parity(Parity::Even),
            prev_slope: None,
        }
    }

    fn slope(grid: &Grid, b: [&ScalarField; 2], sample: &TransportSample<'_>) -> [ScalarField; 3] {
        let a = &sample.geom.a;
        let n = grid.len();
        // seed direction b0_j = b_k A_kj
        let mut dir = [vec![0.0; n], vec![0.0; n]];
        for k in 0..n {
            for (j, d) in dir.iter_mut().enumerate() {
                d[k] = b[0].values[k] * a[0][j].values[k] + b[1].values[k] * a[1][j].values[k];
            }
        }
        let apply = |dr: &ScalarField, dz: &ScalarField, parity: Parity| ScalarField {
            values: (0..n).map(|k| dir[0][k] * dr.values[k] + dir[1][k] * dz.values[k]).collect(),
            parity,
        };
        [
            apply(&grid.d_r(sample.r_rate), &grid.d_z(sample.r_rate), Parity::Odd),
            apply(&sample.z_rate.d_r(grid), &sample.z_rate.d_z(grid), Parity::Even),
            apply(&grid.d_r(sample.theta_rate), &grid.d_z(sample.theta_rate), Parity::Even),
        ]
    }

    fn combine(&self, terms: &[(&[ScalarField; 3], f64)]) -> [ScalarField; 3] {
        let mut out = [self.b_r.clone(), self.b_z.clone(), self.s.clone()];
        for (slope, w) in terms {
            for c in 0..3 {
                out[c].axpy(*w, &slope[c]);
            }
        }
        out
    }

    /// Advances from the sample at `t_n` to the sample at `t_n + dt`.
    pub fn advance(&mut self, grid: &Grid, start: &TransportSample<'_>, end: &TransportSample<'_>, dt: f64) {
        let f0 = Self::slope(grid, [&self.b_r, &self.b_z], start);
        let next = match self.prev_slope.take() {
            None => {
                let pred = self.combine(&[(&f0, dt)]);
                let f1 = Self::slope(grid, [&pred[0], &pred[1]], end);
                self.combine(&[(&f1, 0.5 * dt), (&f0, 0.5 * dt)])
            }
            Some(fm) => {
                let pred = self.combine(&[(&f0, 1.5 * dt), (&fm, -0.5 * dt)]);
                let f1 = Self::slope(grid, [&pred[0], &pred[1]], end);
                self.combine(&[(&f1, 5.0 / 12.0 * dt), (&f0, 8.0 / 12.0 * dt), (&fm, -dt / 12.0)])
            }
        };
        let [b_r, b_z, s] = next;
        self.b_r = b_r;
        self.b_z = b_z;
        self.s = s;
        self.prev_slope = Some(f0);
    }

    /// Tracked field in the same form as the reconstruction.
    pub fn field(&self, r: &ScalarField) -> FrozenField {
        FrozenField {
            b_r: self.b_r.clone(),
            b_th: (r * &self.s).with_parity(Parity::Odd),
            b_z: self.b_z.clone(),
        }
    }

    /// Relative weighted `L^2` gap to the reconstruction from `(map, seed)`.
    pub fn relative_gap(&self, grid: &Grid, seed: &MagneticSeed, state: &SimState) -> f64 {
        let rec = reconstruct_b(grid, seed, &state.map);
        let tr = self.field(&state.map.r);
        let diff = grid.l2_norm(&(&rec.b_r - &tr.b_r)).powi(2)
            + grid.l2_norm(&(&rec.b_th - &tr.b_th)).powi(2)
            + grid.l2_norm(&(&rec.b_z - &tr.b_z)).powi(2);
        let size = grid.l2_norm(&rec.b_r).powi(2) + grid.l2_norm(&rec.b_th).powi(2) + grid.l2_norm(&rec.b_z).powi(2);
        (diff / size).sqrt()
    }
}

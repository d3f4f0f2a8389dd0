//! Initial data: generators, canned presets and the hypothesis report.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{cyl_divergence, mixed_condition_check, rt_margin, rt_margin_pointwise, MixedReport};
use crate::dynamics::{Model, SimState, StabilityRoute, StepConfig};
use crate::error::{Error, Result};
use crate::grid::{Grid, Parity, ScalarField};
use crate::kinematics::{FlowMap, MagneticSeed};
use crate::vacuum::VacuumState;

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub v0r: ScalarField,
    pub v0th: ScalarField,
    pub v0z: ScalarField,
    pub b0r: ScalarField,
    pub b0th: ScalarField,
    pub b0z: ScalarField,
    pub c0: f64,
    pub rs: f64,
    /// Required Rayleigh-Taylor margin.
    pub lambda: f64,
    /// Non-collinearity threshold on `|b0^z|`.
    pub delta: f64,
}

/// `v^r = -(1/r) d_z chi`, `v^z = (1/r) d_r chi`, `v^theta = swirl`.
/// `chi` must be even in `r` and `swirl` odd.
pub fn from_stream_function(grid: &Grid, chi: &ScalarField, swirl: &ScalarField) -> Result<[ScalarField; 3]> {
    if chi.parity != Parity::Even {
        return Err(Error::InvalidInput("stream function must be even in r".into()));
    }
    if swirl.parity != Parity::Odd {
        return Err(Error::InvalidInput("swirl must be odd in r".into()));
    }
    let inv_r = grid.r_field().map(Parity::Odd, |r| 1.0 / r);
    let vr = -&(&inv_r * &grid.d_z(chi));
    let vz = &inv_r * &grid.d_r(chi);
    Ok([vr, swirl.clone(), vz])
}

/// Samples `chi(r, z)` and applies [`from_stream_function`] without swirl.
fn stream_velocity(grid: &Grid, chi: impl Fn(f64, f64) -> f64) -> [ScalarField; 3] {
    let chi = grid.field_from_fn(Parity::Even, chi);
    from_stream_function(grid, &chi, &grid.zeros(Parity::Odd)).expect("parities fixed above")
}

impl InitialData {
    /// Rest state with no field.
    pub fn rest(grid: &Grid, c0: f64, rs: f64) -> Self {
        InitialData {
            v0r: grid.zeros(Parity::Odd),
            v0th: grid.zeros(Parity::Odd),
            v0z: grid.zeros(Parity::Even),
            b0r: grid.zeros(Parity::Odd),
            b0th: grid.zeros(Parity::Odd),
            b0z: grid.zeros(Parity::Even),
            c0,
            rs,
            lambda: 0.1,
            delta: 0.1,
        }
    }

    pub fn seed(&self) -> MagneticSeed {
        MagneticSeed {
            b0r: self.b0r.clone(),
            b0th: self.b0th.clone(),
            b0z: self.b0z.clone(),
        }
    }

    pub fn state(&self, grid: &Grid) -> Result<SimState> {
        Ok(SimState {
            map: FlowMap::identity(grid),
            vr: self.v0r.clone(),
            vth: self.v0th.clone(),
            vz: self.v0z.clone(),
            vac: VacuumState::new(self.c0, self.rs)?,
            t: 0.0,
        })
    }

    fn fields(&self) -> [(&'static str, &ScalarField, Parity); 6] {
        [
            ("v0r", &self.v0r, Parity::Odd),
            ("v0th", &self.v0th, Parity::Odd),
            ("v0z", &self.v0z, Parity::Even),
            ("b0r", &self.b0r, Parity::Odd),
            ("b0th", &self.b0th, Parity::Odd),
            ("b0z", &self.b0z, Parity::Even),
        ]
    }

    /// Shape, finiteness and scalar-parameter checks; failures here are
    /// malformed input rather than failed hypotheses.
    pub fn check_well_formed(&self, grid: &Grid) -> Result<()> {
        for (name, f, _) in self.fields() {
            if f.values.len() != grid.len() {
                return Err(Error::InvalidInput(format!(
                    "{name} has {} values, grid needs {}",
                    f.values.len(),
                    grid.len()
                )));
            }
            if !f.is_finite() {
                return Err(Error::InvalidInput(format!("{name} has non-finite values")));
            }
        }
        for (name, x) in [("C0", self.c0), ("RS", self.rs), ("lambda", self.lambda), ("delta", self.delta)] {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::InvalidInput(format!("{name} = {x} must be finite and nonnegative")));
            }
        }
        Ok(())
    }
}

/// Outcome of checking the existence-theorem hypotheses on initial data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub axis_ok: bool,
    pub divergence_tolerance: f64,
    /// `max |div v0|` with the reference cylindrical divergence.
    pub div_v: f64,
    pub div_b: f64,
    /// `max |b0^r|` on the interface.
    pub b0r_trace: f64,
    pub interface_tangency_ok: bool,
    pub confinement_ok: bool,
    /// Minimum interface RT margin of the initial pressure, if it solved.
    pub rt_margin: Option<f64>,
    pub rt_everywhere: bool,
    pub mixed: Option<MixedReport>,
    /// Structural hypotheses (axis, divergence, tangency, confinement).
    pub admissible: bool,
    /// First route whose hypotheses hold, RT everywhere preferred.
    pub route: Option<StabilityRoute>,
    pub v_norm4_sq: f64,
    pub b_norm4_sq: f64,
    pub failures: Vec<String>,
}

impl HypothesisReport {
    pub fn accepted(&self) -> bool {
        self.admissible && self.route.is_some()
    }
}

/// Linear extrapolation of the first two rows to `r = 0`.
fn axis_value(grid: &Grid, f: &ScalarField, j: usize) -> f64 {
    1.5 * f.values[grid.idx(0, j)] - 0.5 * f.values[grid.idx(1, j)]
}

/// `10 h^2` with `h = max(dr, dz)`.
pub fn default_divergence_tolerance(grid: &Grid) -> f64 {
    let h = grid.dr.max(grid.dz);
    10.0 * h * h
}

pub fn validate(grid: &Grid, data: &InitialData, kappa: f64) -> Result<HypothesisReport> {
    validate_with_tolerance(grid, data, kappa, default_divergence_tolerance(grid))
}

/// Checks axis conditions, divergence, interface tangency of `b0` and
/// confinement, then solves for the initial pressure and evaluates both
/// stability routes. Only malformed input is an error.
pub fn validate_with_tolerance(grid: &Grid, data: &InitialData, kappa: f64, div_tol: f64) -> Result<HypothesisReport> {
    data.check_well_formed(grid)?;
    let mut failures = Vec::new();

    let mut axis_ok = true;
    for (name, f, parity) in data.fields() {
        if f.parity != parity {
            axis_ok = false;
            failures.push(format!("{name} tagged {:?}, expected {parity:?}", f.parity));
        }
        if parity == Parity::Odd {
            // extrapolation of a smooth odd field misses zero by O(dr^3)
            let worst = (0..grid.nz).map(|j| axis_value(grid, f, j).abs()).fold(0.0, f64::max);
            if worst > 10.0 * grid.dr * grid.dr * f.max_abs() {
                axis_ok = false;
                failures.push(format!("{name} does not vanish on the axis (extrapolated {worst:.3e})"));
            }
        }
    }

    let div_v = cyl_divergence(grid, &data.v0r, &data.v0z).max_abs();
    let div_b = cyl_divergence(grid, &data.b0r, &data.b0z).max_abs();
    for (name, d) in [("v0", div_v), ("b0", div_b)] {
        if d > div_tol {
            failures.push(format!("div {name} = {d:.3e} exceeds {div_tol:.3e}"));
        }
    }
    let b0r_trace = grid.boundary_trace(&data.b0r).max_abs();
    let interface_tangency_ok = b0r_trace <= div_tol;
    if !interface_tangency_ok {
        failures.push(format!("b0^r on the interface reaches {b0r_trace:.3e}"));
    }
    let confinement_ok = data.rs > grid.r0;
    if !confinement_ok {
        failures.push(format!("RS = {} does not exceed R0 = {}", data.rs, grid.r0));
    }
    let admissible = axis_ok && div_v <= div_tol && div_b <= div_tol && interface_tangency_ok && confinement_ok;

    let mut rt = None;
    let mut mixed = None;
    if confinement_ok {
        let cfg = StepConfig {
            lambda: data.lambda,
            delta: data.delta,
            ..StepConfig::new(kappa)
        };
        let solved = Model::new(grid, data.seed(), cfg).and_then(|m| {
            let state = data.state(grid)?;
            m.evaluate(&state)
        });
        match solved {
            Ok(stage) => {
                let rk = stage.cache.rk();
                let margins = rt_margin_pointwise(grid, &stage.q, data.c0, rk);
                rt = Some(rt_margin(grid, &stage.q, data.c0, rk));
                let report = mixed_condition_check(&grid.boundary_trace(&data.b0z), &margins, data.delta, data.lambda);
                if let Some(reason) = &report.reason {
                    failures.push(format!("mixed route: {reason}"));
                }
                mixed = Some(report);
            }
            Err(e) => failures.push(format!("initial pressure solve failed: {e}")),
        }
    }
    let rt_everywhere = rt.is_some_and(|m| m >= data.lambda && data.lambda > 0.0);
    if let Some(m) = rt {
        if !rt_everywhere {
            failures.push(format!("RT margin {m:.3e} below lambda = {}", data.lambda));
        }
    }
    let route = if !admissible {
        None
    } else if rt_everywhere {
        Some(StabilityRoute::RtEverywhere)
    } else if mixed.as_ref().is_some_and(|r| r.pass) {
        Some(StabilityRoute::Mixed)
    } else {
        None
    };

    let sq = |f: &ScalarField| grid.weighted_norm_sq(f, 4);
    Ok(HypothesisReport {
        axis_ok,
        divergence_tolerance: div_tol,
        div_v,
        div_b,
        b0r_trace,
        interface_tangency_ok,
        confinement_ok,
        rt_margin: rt,
        rt_everywhere,
        mixed,
        admissible,
        route,
        v_norm4_sq: sq(&data.v0r) + sq(&data.v0th) + sq(&data.v0z),
        b_norm4_sq: sq(&data.b0r) + sq(&data.b0th) + sq(&data.b0z),
        failures,
    })
}

/// Swirl amplitude of [`Preset::SinField`].
pub const SIN_FIELD_SWIRL: f64 = 1.4;

/// Named initial data sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// No flow, no field, `C0 = 0`.
    Rest,
    /// Azimuthal field `b0^theta = r` with `C0 = 0.5`; an equilibrium with
    /// RT margin `1 - C0^2`.
    Pinch,
    /// Uniform axial field `b0^z = 1`.
    Axial,
    /// Pinch plus a poloidal field whose interface trace is `b0^z = sin z`,
    /// with swirl concentrated away from the zeros of `b0^z` that breaks the
    /// RT sign there.
    SinField,
    /// Pinch with a small poloidal field and a small divergence-free flow.
    PerturbedPinch,
    /// Rigid rotation `v^theta = r/2`, no field.
    Swirl,
    /// Pinch with `C0 = 2`, RT violated everywhere.
    LargeC,
    /// `b0^r = r`, not tangent to the interface and not divergence-free.
    RadialSeed,
    /// Axial field with `delta = 1.5 > max |b0^z|`.
    WideDelta,
    /// `v^r` that does not vanish on the axis.
    EvenRadialVelocity,
}

impl Preset {
    pub const ALL: [Preset; 10] = [
        Preset::Rest,
        Preset::Pinch,
        Preset::Axial,
        Preset::SinField,
        Preset::PerturbedPinch,
        Preset::Swirl,
        Preset::LargeC,
        Preset::RadialSeed,
        Preset::WideDelta,
        Preset::EvenRadialVelocity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Rest => "rest",
            Preset::Pinch => "pinch",
            Preset::Axial => "axial",
            Preset::SinField => "sin_field",
            Preset::PerturbedPinch => "perturbed_pinch",
            Preset::Swirl => "swirl",
            Preset::LargeC => "large_c",
            Preset::RadialSeed => "radial_seed",
            Preset::WideDelta => "wide_delta",
            Preset::EvenRadialVelocity => "even_radial_velocity",
        }
    }

    pub fn from_name(name: &str) -> Result<Preset> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown preset '{name}'")))
    }

    pub fn build(self, grid: &Grid) -> InitialData {
        let r0 = grid.r0;
        let rs = 2.0 * r0;
        let k = std::f64::consts::TAU / grid.l;
        let pinch = |c0: f64| InitialData {
            b0th: grid.r_field(),
            lambda: 0.1,
            delta: 0.3,
            ..InitialData::rest(grid, c0, rs)
        };
        // poloidal field from chi = r^2 (r^2 - R0^2) / (2 R0^2) sin kz;
        // b0^r vanishes on the interface and b0^z = sin kz there
        let poloidal = |amp: f64| stream_velocity(grid, |r, z| amp * r * r * (r * r - r0 * r0) / (2.0 * r0 * r0) * (k * z).sin());
        match self {
            Preset::Rest => InitialData::rest(grid, 0.0, rs),
            Preset::Pinch => pinch(0.5),
            Preset::Axial => InitialData {
                b0z: grid.constant(1.0),
                delta: 0.5,
                ..InitialData::rest(grid, 0.5, rs)
            },
            Preset::SinField => {
                let [br, _, bz] = poloidal(1.0);
                InitialData {
                    v0th: grid.field_from_fn(Parity::Odd, |r, z| SIN_FIELD_SWIRL * r * (k * z).sin().powi(4)),
                    b0r: br,
                    b0z: bz,
                    ..pinch(0.5)
                }
            }
            Preset::PerturbedPinch => {
                let [br, _, bz] = poloidal(0.2);
                // curl of chi = eps r^2 (R0^2 - r^2)^2 sin kz, sampled in closed
                // form so the discrete divergence sits at truncation level
                let eps = 0.02;
                let vr = grid.field_from_fn(Parity::Odd, |r, z| -eps * k * r * (r0 * r0 - r * r).powi(2) * (k * z).cos());
                let vz = grid.field_from_fn(Parity::Even, |r, z| {
                    let s = r0 * r0 - r * r;
                    eps * (2.0 * s * s - 4.0 * r * r * s) * (k * z).sin()
                });
                InitialData {
                    v0r: vr,
                    v0z: vz,
                    b0r: br,
                    b0z: bz,
                    ..pinch(0.5)
                }
            }
            Preset::Swirl => InitialData {
                v0th: grid.r_field().scale(0.5),
                ..InitialData::rest(grid, 0.0, rs)
            },
            Preset::LargeC => pinch(2.0),
            Preset::RadialSeed => InitialData {
                b0r: grid.r_field(),
                ..pinch(0.5)
            },
            Preset::WideDelta => InitialData {
                b0z: grid.constant(1.0),
                delta: 1.5,
                ..InitialData::rest(grid, 0.5, rs)
            },
            Preset::EvenRadialVelocity => InitialData {
                v0r: grid.field_from_fn(Parity::Odd, |_, z| 0.1 * (1.0 + 0.5 * (k * z).cos())),
                ..pinch(0.5)
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(nr: usize, nz: usize) -> Grid {
        Grid::new(nr, nz, 1.0, 2.0 * PI).unwrap()
    }

    fn report(p: Preset, n: usize) -> HypothesisReport {
        let g = grid(n, n);
        validate(&g, &p.build(&g), 4.0 * g.dz).unwrap()
    }

    #[test]
    fn zero_stream_function_gives_rest() {
        let g = grid(8, 16);
        let [vr, vth, vz] = from_stream_function(&g, &g.zeros(Parity::Even), &g.zeros(Parity::Odd)).unwrap();
        assert_eq!(vr.max_abs() + vth.max_abs() + vz.max_abs(), 0.0);
    }

    #[test]
    fn z_independent_stream_function_is_axial() {
        let g = grid(16, 16);
        let chi = g.field_from_fn(Parity::Even, |r, _| r * r * (1.0 - r * r));
        let [vr, _, vz] = from_stream_function(&g, &chi, &g.zeros(Parity::Odd)).unwrap();
        assert!(vr.max_abs() < 1e-14);
        // v^z = (1/r) d_r chi = 2 - 4 r^2
        for i in 1..g.nr - 1 {
            let r = g.r(i);
            assert!((vz.values[g.idx(i, 3)] - (2.0 - 4.0 * r * r)).abs() < 5.0 * g.dr * g.dr);
        }
    }

    #[test]
    fn stream_function_divergence_is_second_order() {
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| {
                let g = grid(n, n);
                let chi = g.field_from_fn(Parity::Even, |r, z| r * r * (1.0 - r * r).powi(2) * (2.0 * z).sin());
                let [vr, _, vz] = from_stream_function(&g, &chi, &g.zeros(Parity::Odd)).unwrap();
                cyl_divergence(&g, &vr, &vz).max_abs()
            })
            .collect();
        assert!(errs[2] < default_divergence_tolerance(&grid(64, 64)));
        let ratio = errs[1] / errs[2];
        assert!(ratio > 3.5, "{errs:?}");
    }

    #[test]
    fn stream_function_parity_is_checked() {
        let g = grid(8, 16);
        assert!(from_stream_function(&g, &g.zeros(Parity::Odd), &g.zeros(Parity::Odd)).is_err());
        assert!(from_stream_function(&g, &g.zeros(Parity::Even), &g.zeros(Parity::Even)).is_err());
    }

    #[test]
    fn pinch_passes_rt_everywhere() {
        let r = report(Preset::Pinch, 32);
        assert!(r.admissible, "{r:?}");
        assert_eq!(r.route, Some(StabilityRoute::RtEverywhere));
        assert!((r.rt_margin.unwrap() - 0.75).abs() < 1e-2, "{:?}", r.rt_margin);
    }

    #[test]
    fn axial_field_passes_by_noncollinearity() {
        let r = report(Preset::Axial, 32);
        assert!(!r.rt_everywhere);
        assert_eq!(r.route, Some(StabilityRoute::Mixed));
        let m = r.mixed.unwrap();
        assert!(m.gamma.is_empty() && m.gamma_prime.is_empty());
    }

    #[test]
    fn sin_field_passes_mixed_route() {
        let r = report(Preset::SinField, 32);
        assert!(r.admissible, "{r:?}");
        assert!(!r.rt_everywhere);
        assert_eq!(r.route, Some(StabilityRoute::Mixed), "{r:?}");
        let m = r.mixed.unwrap();
        assert!(m.pass && !m.gamma.is_empty(), "{m:?}");
    }

    #[test]
    fn radial_seed_fails_tangency_with_divergence_two() {
        let r = report(Preset::RadialSeed, 32);
        assert!(!r.interface_tangency_ok && !r.accepted());
        assert!((r.div_b - 2.0).abs() < 1e-12, "{}", r.div_b);
    }

    #[test]
    fn even_radial_velocity_fails_axis_check() {
        let r = report(Preset::EvenRadialVelocity, 32);
        assert!(!r.axis_ok && !r.accepted());
    }

    #[test]
    fn large_c_and_wide_delta_are_rejected() {
        for p in [Preset::LargeC, Preset::WideDelta] {
            let r = report(p, 32);
            assert!(r.admissible && r.route.is_none(), "{p:?} {r:?}");
        }
    }

    #[test]
    fn presets_round_trip_names() {
        for p in Preset::ALL {
            assert_eq!(Preset::from_name(p.name()).unwrap(), p);
        }
        assert!(Preset::from_name("nope").is_err());
    }

    #[test]
    fn validate_is_deterministic() {
        assert_eq!(report(Preset::PerturbedPinch, 16), report(Preset::PerturbedPinch, 16));
    }

    #[test]
    fn malformed_fields_are_errors() {
        let g = grid(8, 16);
        let mut d = Preset::Rest.build(&g);
        d.v0z.values[3] = f64::NAN;
        assert!(validate(&g, &d, 4.0 * g.dz).is_err());
    }
}

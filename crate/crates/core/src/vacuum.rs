//! Vacuum field amplitude `C(t)`, its growth rate and the interface
//! pressure it induces.

use crate::error::{Error, Result};
use crate::grid::{BoundaryFunction, Grid};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VacuumState {
    /// Amplitude of the vacuum field `C / r`.
    pub c: f64,
    /// Confining radius, larger than every interface radius.
    pub rs: f64,
    /// Most recent growth rate.
    pub a_coeff: f64,
}

impl VacuumState {
    pub fn new(c: f64, rs: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("C0 = {c} must be finite and nonnegative")));
        }
        if !(rs > 0.0) || !rs.is_finite() {
            return Err(Error::InvalidParameter(format!("RS = {rs} must be positive")));
        }
        Ok(VacuumState { c, rs, a_coeff: 0.0 })
    }

    /// One RK4 step of `d(ln C)/dt = A` from the four stage rates. A zero
    /// amplitude stays zero.
    pub fn advance(&self, stages: [f64; 4], dt: f64) -> VacuumState {
        let growth = dt / 6.0 * (stages[0] + 2.0 * stages[1] + 2.0 * stages[2] + stages[3]);
        let c = if self.c == 0.0 { 0.0 } else { (self.c.ln() + growth).exp() };
        VacuumState {
            c,
            rs: self.rs,
            a_coeff: stages[3],
        }
    }

    /// The confining radius must exceed `max R` on the interface.
    pub fn check_confinement(&self, r_trace: &BoundaryFunction) -> Result<()> {
        let max_r = r_trace.values.iter().cloned().fold(f64::MIN, f64::max);
        if self.rs > max_r {
            Ok(())
        } else {
            Err(Error::VacuumDegeneracy(format!(
                "RS = {} does not exceed max R = {max_r} on the interface",
                self.rs
            )))
        }
    }
}

/// Interface traces entering the growth rate.
#[derive(Debug, Clone, Copy)]
pub struct InterfaceTraces<'a> {
    pub r: &'a BoundaryFunction,
    pub z_disp: &'a BoundaryFunction,
    pub vr: &'a BoundaryFunction,
    pub vz: &'a BoundaryFunction,
}

/// `A = int (v^r dZ/dz - v^z dR/dz) dz / int (ln RS - ln R) dZ/dz dz`.
pub fn compute_a(grid: &Grid, traces: InterfaceTraces<'_>, rs: f64) -> Result<f64> {
    let dz_z = grid.d_z_boundary(traces.z_disp).map(|x| 1.0 + x);
    let dz_r = grid.d_z_boundary(traces.r);
    if traces.r.values.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::DegenerateMap("nonpositive interface radius".into()));
    }
    let num: f64 = (0..grid.nz)
        .map(|j| traces.vr.values[j] * dz_z.values[j] - traces.vz.values[j] * dz_r.values[j])
        .sum::<f64>()
        * grid.dz;
    let lnrs = rs.ln();
    let den: f64 = (0..grid.nz)
        .map(|j| (lnrs - traces.r.values[j].ln()) * dz_z.values[j])
        .sum::<f64>()
        * grid.dz;
    if !(den.abs() >= 1e-8 * grid.l) {
        return Err(Error::VacuumDegeneracy(format!("growth-rate denominator {den:.3e} too small")));
    }
    Ok(num / den)
}

/// `q = C^2 / (2 (R^k)^2)` on the interface.
pub fn pressure_boundary_data(c: f64, rk_trace: &BoundaryFunction) -> Result<BoundaryFunction> {
    if rk_trace.values.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::DegenerateMap("nonpositive smoothed interface radius".into()));
    }
    Ok(rk_trace.map(|r| 0.5 * c * c / (r * r)))
}

//! Run configuration, time-series files and field snapshots.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::diagnostics::DiagnosticsRecord;
use crate::dynamics::{SimState, StabilityRoute, StepConfig};
use crate::error::{Error, Result};
use crate::grid::{Grid, Parity, ScalarField, SplitField};
use crate::initial_data::{InitialData, Preset};
use crate::kinematics::FlowMap;
use crate::vacuum::VacuumState;

/// Overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "AXIFREE_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nr: usize,
    pub nz: usize,
    #[serde(default = "one")]
    pub r0: f64,
    #[serde(default = "two_pi")]
    pub l: f64,
}

fn one() -> f64 {
    1.0
}

fn two_pi() -> f64 {
    std::f64::consts::TAU
}

/// Values left out keep those of the initial data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub c0: Option<f64>,
    pub rs: Option<f64>,
    pub lambda: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    /// Mollifier width in multiples of `dz`.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Runs once per listed width instead of once at `kappa`.
    #[serde(default)]
    pub kappa_sweep: Vec<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_krylov_tol")]
    pub krylov_tol: f64,
    pub t_end: f64,
    #[serde(default = "one_step")]
    pub diag_every: usize,
    #[serde(default = "one_step")]
    pub window_check_every: usize,
    /// Stability route for the window check; defaults to the one the
    /// initial data qualifies for.
    #[serde(default)]
    pub route: Option<StabilityRoute>,
}

fn default_kappa() -> f64 {
    4.0
}
fn default_cfl() -> f64 {
    0.5
}
fn default_dt_max() -> f64 {
    0.01
}
fn default_krylov_tol() -> f64 {
    1e-10
}
fn one_step() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDataConfig {
    pub preset: Option<String>,
    /// Snapshot holding `v0r, v0th, v0z, b0r, b0th, b0z` and the scalars
    /// `C0, RS, lambda, delta`.
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotFormat {
    Json,
    Binary,
}

impl SnapshotFormat {
    pub fn extension(self) -> &'static str {
        match self {
            SnapshotFormat::Json => "json",
            SnapshotFormat::Binary => "bin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<SnapshotFormat>,
}

fn default_out() -> PathBuf {
    PathBuf::from("axifree-out")
}

fn default_formats() -> Vec<SnapshotFormat> {
    vec![SnapshotFormat::Json]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: default_out(),
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    pub numerics: NumericsConfig,
    pub initial_data: InitialDataConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        // relative snapshot paths are taken from the config's directory
        if let (Some(snap), Some(dir)) = (&cfg.initial_data.snapshot, path.parent()) {
            if snap.is_relative() {
                cfg.initial_data.snapshot = Some(dir.join(snap));
            }
        }
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        let n = &self.numerics;
        if !(n.t_end >= 0.0) || !n.t_end.is_finite() {
            return Err(Error::Config(format!("t_end = {} must be finite and nonnegative", n.t_end)));
        }
        if n.diag_every == 0 {
            return Err(Error::Config("diag_every must be positive".into()));
        }
        for k in self.kappas() {
            if !(k > 0.0) {
                return Err(Error::Config(format!("kappa = {k} dz must be positive")));
            }
        }
        match (&self.initial_data.preset, &self.initial_data.snapshot) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return Err(Error::Config("initial_data needs exactly one of preset or snapshot".into())),
        }
        if let Some(name) = &self.initial_data.preset {
            Preset::from_name(name).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.output.formats.is_empty() {
            return Err(Error::Config("output.formats is empty".into()));
        }
        Ok(())
    }

    /// Mollifier widths in multiples of `dz`.
    pub fn kappas(&self) -> Vec<f64> {
        if self.numerics.kappa_sweep.is_empty() {
            vec![self.numerics.kappa]
        } else {
            self.numerics.kappa_sweep.clone()
        }
    }

    pub fn build_grid(&self) -> Result<Grid> {
        Grid::new(self.grid.nr, self.grid.nz, self.grid.r0, self.grid.l)
    }

    /// Output directory with the environment override applied.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output.directory.clone(),
        }
    }

    /// Step parameters for a width of `kappa_dz` grid spacings.
    pub fn step_config(&self, grid: &Grid, data: &InitialData, kappa_dz: f64, route: Option<StabilityRoute>) -> StepConfig {
        let n = &self.numerics;
        StepConfig {
            cfl: n.cfl,
            dt_max: n.dt_max,
            kappa: kappa_dz * grid.dz,
            krylov_tol: n.krylov_tol,
            window_check_every: n.window_check_every,
            lambda: data.lambda,
            delta: data.delta,
            route,
        }
    }

    /// Initial data from the preset or snapshot, with physics overrides.
    pub fn initial_data(&self, grid: &Grid) -> Result<InitialData> {
        let mut data = if let Some(name) = &self.initial_data.preset {
            Preset::from_name(name)?.build(grid)
        } else {
            let path = self.initial_data.snapshot.as_ref().expect("checked in from_toml");
            Snapshot::read(path)?.initial_data(grid)?
        };
        let p = &self.physics;
        data.c0 = p.c0.unwrap_or(data.c0);
        data.rs = p.rs.unwrap_or(data.rs);
        data.lambda = p.lambda.unwrap_or(data.lambda);
        data.delta = p.delta.unwrap_or(data.delta);
        Ok(data)
    }
}

/// One named field in row-major `(nr, nz)` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedField {
    pub name: String,
    pub parity: Parity,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub nr: usize,
    pub nz: usize,
    pub r0: f64,
    pub l: f64,
}

impl From<&Grid> for GridMeta {
    fn from(g: &Grid) -> Self {
        GridMeta {
            nr: g.nr,
            nz: g.nz,
            r0: g.r0,
            l: g.l,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub grid: GridMeta,
    pub scalars: BTreeMap<String, f64>,
    pub fields: Vec<NamedField>,
}

const MAGIC: &[u8; 4] = b"AXFS";
const VERSION: u32 = 1;

impl Snapshot {
    pub fn new(grid: &Grid) -> Self {
        Snapshot {
            grid: grid.into(),
            scalars: BTreeMap::new(),
            fields: Vec::new(),
        }
    }

    pub fn with_field(mut self, name: &str, f: &ScalarField) -> Self {
        self.fields.push(NamedField {
            name: name.into(),
            parity: f.parity,
            shape: [self.grid.nr, self.grid.nz],
            values: f.values.clone(),
        });
        self
    }

    pub fn with_scalar(mut self, name: &str, v: f64) -> Self {
        self.scalars.insert(name.into(), v);
        self
    }

    pub fn field(&self, name: &str) -> Result<ScalarField> {
        let f = self
            .fields
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| Error::InvalidInput(format!("snapshot has no field '{name}'")))?;
        if f.values.len() != f.shape[0] * f.shape[1] || f.shape != [self.grid.nr, self.grid.nz] {
            return Err(Error::InvalidInput(format!("field '{name}' has inconsistent shape {:?}", f.shape)));
        }
        Ok(ScalarField {
            values: f.values.clone(),
            parity: f.parity,
        })
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        self.scalars
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("snapshot has no scalar '{name}'")))
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.grid != GridMeta::from(grid) {
            return Err(Error::InvalidInput(format!(
                "snapshot grid {:?} does not match the run grid {:?}",
                self.grid,
                GridMeta::from(grid)
            )));
        }
        Ok(())
    }

    pub fn from_initial_data(grid: &Grid, d: &InitialData) -> Self {
        Snapshot::new(grid)
            .with_field("v0r", &d.v0r)
            .with_field("v0th", &d.v0th)
            .with_field("v0z", &d.v0z)
            .with_field("b0r", &d.b0r)
            .with_field("b0th", &d.b0th)
            .with_field("b0z", &d.b0z)
            .with_scalar("C0", d.c0)
            .with_scalar("RS", d.rs)
            .with_scalar("lambda", d.lambda)
            .with_scalar("delta", d.delta)
    }

    pub fn initial_data(&self, grid: &Grid) -> Result<InitialData> {
        self.check_grid(grid)?;
        Ok(InitialData {
            v0r: self.field("v0r")?,
            v0th: self.field("v0th")?,
            v0z: self.field("v0z")?,
            b0r: self.field("b0r")?,
            b0th: self.field("b0th")?,
            b0z: self.field("b0z")?,
            c0: self.scalar("C0")?,
            rs: self.scalar("RS")?,
            lambda: self.scalar("lambda")?,
            delta: self.scalar("delta")?,
        })
    }

    pub fn from_state(grid: &Grid, s: &SimState) -> Self {
        Snapshot::new(grid)
            .with_field("R", &s.map.r)
            .with_field("Z_disp_even", &s.map.z_disp.even)
            .with_field("Z_disp_odd", &s.map.z_disp.odd)
            .with_field("Theta_hat", &s.map.theta_hat)
            .with_field("vr", &s.vr)
            .with_field("vth", &s.vth)
            .with_field("vz", &s.vz)
            .with_scalar("t", s.t)
            .with_scalar("C", s.vac.c)
            .with_scalar("RS", s.vac.rs)
            .with_scalar("A", s.vac.a_coeff)
    }

    pub fn state(&self, grid: &Grid) -> Result<SimState> {
        self.check_grid(grid)?;
        Ok(SimState {
            map: FlowMap {
                r: self.field("R")?,
                z_disp: SplitField {
                    even: self.field("Z_disp_even")?,
                    odd: self.field("Z_disp_odd")?,
                },
                theta_hat: self.field("Theta_hat")?,
            },
            vr: self.field("vr")?,
            vth: self.field("vth")?,
            vz: self.field("vz")?,
            vac: VacuumState {
                c: self.scalar("C")?,
                rs: self.scalar("RS")?,
                a_coeff: self.scalar("A")?,
            },
            t: self.scalar("t")?,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("snapshot JSON: {e}")))
    }

    /// Little-endian: magic, version, grid, scalars, then fields with a
    /// parity byte and their values.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.grid.nr as u64).to_le_bytes());
        out.extend_from_slice(&(self.grid.nz as u64).to_le_bytes());
        out.extend_from_slice(&self.grid.r0.to_le_bytes());
        out.extend_from_slice(&self.grid.l.to_le_bytes());
        let put_str = |out: &mut Vec<u8>, s: &str| {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        };
        out.extend_from_slice(&(self.scalars.len() as u32).to_le_bytes());
        for (k, v) in &self.scalars {
            put_str(&mut out, k);
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.fields.len() as u32).to_le_bytes());
        for f in &self.fields {
            put_str(&mut out, &f.name);
            out.push(match f.parity {
                Parity::Even => 0,
                Parity::Odd => 1,
            });
            out.extend_from_slice(&(f.shape[0] as u64).to_le_bytes());
            out.extend_from_slice(&(f.shape[1] as u64).to_le_bytes());
            for v in &f.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::InvalidInput("not a snapshot file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::InvalidInput(format!("unsupported snapshot version {version}")));
        }
        let grid = GridMeta {
            nr: r.u64()? as usize,
            nz: r.u64()? as usize,
            r0: r.f64()?,
            l: r.f64()?,
        };
        let mut scalars = BTreeMap::new();
        for _ in 0..r.u32()? {
            let k = r.string()?;
            scalars.insert(k, r.f64()?);
        }
        let mut fields = Vec::new();
        for _ in 0..r.u32()? {
            let name = r.string()?;
            let parity = match r.take(1)?[0] {
                0 => Parity::Even,
                1 => Parity::Odd,
                p => return Err(Error::InvalidInput(format!("bad parity byte {p}"))),
            };
            let shape = [r.u64()? as usize, r.u64()? as usize];
            let n = shape[0].checked_mul(shape[1]).ok_or_else(|| Error::InvalidInput("shape overflow".into()))?;
            let mut values = Vec::with_capacity(n.min(bytes.len() / 8));
            for _ in 0..n {
                values.push(r.f64()?);
            }
            fields.push(NamedField {
                name,
                parity,
                shape,
                values,
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::InvalidInput("trailing bytes after snapshot".into()));
        }
        Ok(Snapshot { grid, scalars, fields })
    }

    pub fn write(&self, path: &Path, format: SnapshotFormat) -> Result<()> {
        let mut file = fs::File::create(path)?;
        match format {
            SnapshotFormat::Json => file.write_all(self.to_json()?.as_bytes())?,
            SnapshotFormat::Binary => file.write_all(&self.to_binary())?,
        }
        Ok(())
    }

    /// Reads either format, told apart by the magic bytes.
    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.starts_with(MAGIC) {
            Snapshot::from_binary(&bytes)
        } else {
            let text = String::from_utf8(bytes).map_err(|_| Error::InvalidInput("snapshot is neither binary nor UTF-8".into()))?;
            Snapshot::from_json(&text)
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::InvalidInput("truncated snapshot".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::InvalidInput("non-UTF-8 name".into()))
    }
}

/// Writes diagnostics records as CSV with the fixed header.
pub fn write_series(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    for r in records {
        w.serialize(r).map_err(|e| Error::Io(e.into()))?;
    }
    if records.is_empty() {
        w.write_record(SERIES_HEADER).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| Error::Io(e.into()))?;
    rd.deserialize()
        .map(|r| r.map_err(|e: csv::Error| Error::InvalidInput(e.to_string())))
        .collect()
}

pub const SERIES_HEADER: [&str; 10] = [
    "t",
    "energy",
    "div_nu",
    "div_b",
    "curl_nu",
    "rt_margin",
    "noncol_margin",
    "boundary_energy",
    "C",
    "window_ok",
];

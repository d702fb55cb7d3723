//! Pipeline configuration and the file-based commands behind the CLI.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimation::{
    apriori_bound_curve, bound_csv, default_bound_range, error_report, select_rom_dimension, BoundPoint,
    ErrorReport, Reconstructor,
};
use crate::format::SnapshotSet;
use crate::materials::{AirProperties, FreezerMaterials, LiquidFractionMode, PiecewiseCubicProperty, SolidProperties};
use crate::mesh::{build_grid, hex_string, CaseGeometry, CellKind, StructuredGrid};
use crate::observation::{
    assemble_observer, build_pixel_grid, measure, ObservationMatrix, ObservationMode, PixelSensor, SensorLayout,
};
use crate::placement::{greedy_place, regular_placement};
use crate::rom::{assemble_snapshots, compute_pod, compute_pod_weighted, PODBasis};
use crate::solver::{run_case, sample_parameters, Snapshot, SolverSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { nx: 70, ny: 80 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_final: f64,
    pub stride: usize,
    #[serde(flatten)]
    pub settings: SolverSettings,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { dt: 2.0, t_final: 7200.0, stride: 36, settings: SolverSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub count: usize,
    pub seed: u64,
    /// The first `train` samples build the ROM, the rest are held out.
    pub train: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { count: 10, seed: 2024, train: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RomConfig {
    pub n_max: usize,
    pub subtract_mean: bool,
    pub area_weighted: bool,
}

impl Default for RomConfig {
    fn default() -> Self {
        RomConfig { n_max: 120, subtract_mean: false, area_weighted: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementKind {
    /// Every pixel of the pool.
    #[default]
    All,
    Greedy,
    Regular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    pub pixel_size: f64,
    pub mode: ObservationMode,
    pub exclude_food: bool,
    pub placement: PlacementKind,
    /// Sensor budget for greedy/regular placement; defaults to `ceil(1.5 n)`.
    pub count: Option<usize>,
    pub noise_sd: f64,
    pub noise_seed: u64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            pixel_size: 0.02,
            mode: ObservationMode::UnitNorm,
            exclude_food: false,
            placement: PlacementKind::All,
            count: None,
            noise_sd: 0.0,
            noise_seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RomDimension {
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for RomDimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(RomDimension::Auto);
        }
        s.parse::<usize>()
            .map(RomDimension::Fixed)
            .map_err(|_| Error::InvalidArgument(format!("ROM dimension must be `auto` or a count, got `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationConfig {
    pub n: RomDimension,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig { n: RomDimension::Auto }
    }
}

/// Material data. The food tables default to the built-in salmon fits; either
/// may be replaced by a JSON file holding `breakpoints` and `coefficients`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct MaterialsConfig {
    pub heat_capacity_file: Option<PathBuf>,
    pub conductivity_file: Option<PathBuf>,
    pub air: AirProperties,
    pub shelf: SolidProperties,
    pub liquid_fraction: LiquidFractionMode,
}

fn load_property(path: &Path) -> Result<PiecewiseCubicProperty> {
    let p: PiecewiseCubicProperty = serde_json::from_str(&fs::read_to_string(path)?)?;
    p.validate()?;
    Ok(p)
}

impl MaterialsConfig {
    pub fn build(&self) -> Result<FreezerMaterials> {
        let heat_capacity = match &self.heat_capacity_file {
            Some(p) => load_property(p)?,
            None => PiecewiseCubicProperty::salmon_heat_capacity(),
        };
        let conductivity = match &self.conductivity_file {
            Some(p) => load_property(p)?,
            None => PiecewiseCubicProperty::salmon_conductivity(),
        };
        self.air.validate()?;
        if !(self.shelf.lambda > 0.0 && self.shelf.rho_c > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid shelf properties {:?}", self.shelf)));
        }
        Ok(FreezerMaterials::new(heat_capacity, conductivity, self.air.clone(), self.shelf.clone(), self.liquid_fraction))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPoint {
    pub name: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub geometry: CaseGeometry,
    pub grid: GridConfig,
    pub solver: TimeConfig,
    pub sampling: SamplingConfig,
    pub rom: RomConfig,
    pub sensors: SensorConfig,
    pub estimation: EstimationConfig,
    pub materials: MaterialsConfig,
    /// Probe locations for local error series; empty means the three food probes.
    pub points: Vec<ControlPoint>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            geometry: CaseGeometry::paper(),
            grid: GridConfig::default(),
            solver: TimeConfig::default(),
            sampling: SamplingConfig::default(),
            rom: RomConfig::default(),
            sensors: SensorConfig::default(),
            estimation: EstimationConfig::default(),
            materials: MaterialsConfig::default(),
            points: Vec::new(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.materials.build()?;
        let s = &self.sampling;
        if s.train == 0 || s.train >= s.count {
            return Err(Error::InvalidArgument(format!(
                "need at least one training and one test run, got train = {} of count = {}",
                s.train, s.count
            )));
        }
        if self.solver.stride == 0 {
            return Err(Error::InvalidArgument("snapshot stride must be at least 1".into()));
        }
        if self.rom.n_max == 0 {
            return Err(Error::InvalidArgument("n_max must be at least 1".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash_hex(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex_string(&Sha256::digest(&json))
    }

    /// SHA-256 of the settings that determine the snapshot database (geometry,
    /// grid, solver, sampling, materials). Artifacts carry this hash so that later stages
    /// may change sensor or estimation options freely.
    pub fn data_hash_hex(&self) -> String {
        let json = serde_json::to_vec(&(&self.geometry, &self.grid, &self.solver, &self.sampling, &self.materials)).expect("config serialises");
        hex_string(&Sha256::digest(&json))
    }

    pub fn grid(&self) -> Result<StructuredGrid> {
        build_grid(&self.geometry, self.grid.nx, self.grid.ny)
    }

    /// Control points with their cells; defaults to the food centre region and two corners.
    pub fn control_points(&self, grid: &StructuredGrid) -> Result<Vec<(String, usize)>> {
        let pts = if self.points.is_empty() {
            let g = &grid.geometry;
            let (fx, fy) = g.food_anchor;
            let rel = |a: f64, b: f64| (fx + a * g.food_width, fy + b * g.food_height);
            // freezing centre and two opposite corners of the slab
            let p = [("P1", rel(0.65, 0.5)), ("P2", rel(0.025, 0.933)), ("P3", rel(0.975, 0.067))];
            p.iter().map(|(n, (x, y))| ControlPoint { name: n.to_string(), x: *x, y: *y }).collect()
        } else {
            self.points.clone()
        };
        pts.iter().map(|p| Ok((p.name.clone(), grid.locate_point(p.x, p.y)?))).collect()
    }

    pub fn sensor_pool(&self, grid: &StructuredGrid, exclude_food: bool) -> Result<Vec<PixelSensor>> {
        build_pixel_grid(grid, self.sensors.pixel_size, |k| !(exclude_food && k == CellKind::Food))
    }
}

/// JSON written next to every FRST1 run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSidecar {
    pub run: usize,
    pub split: String,
    pub params: crate::solver::ParameterSample,
    pub dt: f64,
    pub t_final: f64,
    pub stride: usize,
    pub settings: SolverSettings,
    pub grid_hash: String,
    pub config_hash: String,
    pub snapshots: usize,
}

/// Generic provenance sidecar for derived artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub kind: String,
    pub grid_hash: String,
    pub config_hash: String,
    #[serde(default)]
    pub details: serde_json::Value,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn check_grid(expected: &[u8; 32], found: &[u8; 32], what: &str) -> Result<()> {
    if expected != found {
        return Err(Error::GridMismatch(format!(
            "{what} was built for grid {} but the configured grid is {}",
            hex_string(found),
            hex_string(expected)
        )));
    }
    Ok(())
}

fn check_config(meta_path: &Path, config_hash: &str) -> Result<()> {
    if !meta_path.exists() {
        return Ok(());
    }
    let value: serde_json::Value = read_json(meta_path)?;
    if let Some(h) = value.get("config_hash").and_then(|v| v.as_str()) {
        if h != config_hash {
            return Err(Error::GridMismatch(format!(
                "{} was produced under config {h}, expected {config_hash}",
                meta_path.display()
            )));
        }
    }
    Ok(())
}

/// Simulates every sampled run (in parallel) and keeps them in memory.
pub fn simulate_runs(cfg: &PipelineConfig, grid: &StructuredGrid) -> Result<Vec<SnapshotSet>> {
    cfg.validate()?;
    let samples = sample_parameters(cfg.sampling.count, cfg.sampling.seed)?;
    let materials = cfg.materials.build()?;
    let t = &cfg.solver;
    let hash = grid.hash();
    samples
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let snaps: Vec<Snapshot> = run_case(grid, &materials, &t.settings, *p, t.dt, t.t_final, t.stride)
                .map_err(|e| {
                    log::error!("run {k} failed: {e}");
                    e
                })?;
            SnapshotSet::new(hash, grid.len(), snaps)
        })
        .collect()
}

pub fn run_file_name(k: usize) -> String {
    format!("run_{k:03}.frst")
}

/// `simulate`: one FRST1 file plus JSON sidecar per sampled parameter set.
pub fn cmd_simulate(cfg: &PipelineConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let grid = cfg.grid()?;
    fs::create_dir_all(out_dir)?;
    let runs = simulate_runs(cfg, &grid)?;
    let samples = sample_parameters(cfg.sampling.count, cfg.sampling.seed)?;
    let mut paths = Vec::new();
    for (k, (run, p)) in runs.iter().zip(&samples).enumerate() {
        let path = out_dir.join(run_file_name(k));
        run.save(&path)?;
        let side = RunSidecar {
            run: k,
            split: if k < cfg.sampling.train { "train" } else { "test" }.into(),
            params: *p,
            dt: cfg.solver.dt,
            t_final: cfg.solver.t_final,
            stride: cfg.solver.stride,
            settings: cfg.solver.settings.clone(),
            grid_hash: grid.hash_hex(),
            config_hash: cfg.data_hash_hex(),
            snapshots: run.len(),
        };
        write_json(&sidecar_path(&path), &side)?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn build_basis(cfg: &PipelineConfig, grid: &StructuredGrid, runs: &[SnapshotSet]) -> Result<PODBasis> {
    let a = assemble_snapshots(runs, cfg.rom.subtract_mean)?;
    let n_max = cfg.rom.n_max.min(a.rows()).min(a.cols());
    if cfg.rom.area_weighted {
        compute_pod_weighted(&a, n_max, &grid.cell_area)
    } else {
        compute_pod(&a, n_max)
    }
}

fn load_runs(cfg: &PipelineConfig, grid: &StructuredGrid, paths: &[PathBuf]) -> Result<Vec<SnapshotSet>> {
    let hash = grid.hash();
    let config_hash = cfg.data_hash_hex();
    paths
        .iter()
        .map(|p| {
            let set = SnapshotSet::load(p)?;
            check_grid(&hash, &set.grid_hash, &p.display().to_string())?;
            check_config(&sidecar_path(p), &config_hash)?;
            Ok(set)
        })
        .collect()
}

/// `pod`: FROM1 basis plus sidecar with the singular values.
pub fn cmd_pod(cfg: &PipelineConfig, runs: &[PathBuf], out: &Path) -> Result<PODBasis> {
    let grid = cfg.grid()?;
    let sets = load_runs(cfg, &grid, runs)?;
    let basis = build_basis(cfg, &grid, &sets)?;
    basis.save(out)?;
    let meta = ArtifactMeta {
        kind: "pod_basis".into(),
        grid_hash: grid.hash_hex(),
        config_hash: cfg.data_hash_hex(),
        details: serde_json::json!({
            "n_max": basis.n_max(),
            "sigma": basis.sigma,
            "total_energy": basis.total_energy(),
            "subtract_mean": basis.mean.is_some(),
            "runs": runs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        }),
    };
    write_json(&sidecar_path(out), &meta)?;
    Ok(basis)
}

fn load_basis(cfg: &PipelineConfig, grid: &StructuredGrid, path: &Path) -> Result<PODBasis> {
    let basis = PODBasis::load(path)?;
    check_grid(&grid.hash(), &basis.grid_hash, &path.display().to_string())?;
    check_config(&sidecar_path(path), &cfg.data_hash_hex())?;
    Ok(basis)
}

fn load_layout(cfg: &PipelineConfig, grid: &StructuredGrid, path: &Path) -> Result<(SensorLayout, ObservationMatrix)> {
    let layout: SensorLayout = read_json(path)?;
    if let Some(h) = &layout.config_hash {
        if *h != cfg.data_hash_hex() {
            return Err(Error::GridMismatch(format!("{} was produced under config {h}", path.display())));
        }
    }
    let w = layout.observer(grid)?;
    Ok((layout, w))
}

/// Bound curve over the default range and its minimiser.
pub fn bound_and_select(basis: &PODBasis, w: &ObservationMatrix) -> Result<(Vec<BoundPoint>, usize)> {
    let curve = apriori_bound_curve(basis, w, &default_bound_range(basis, w))?;
    let n = select_rom_dimension(&curve)?;
    Ok((curve, n))
}

pub fn resolve_dimension(dim: RomDimension, basis: &PODBasis, w: &ObservationMatrix) -> Result<(usize, Option<Vec<BoundPoint>>)> {
    match dim {
        RomDimension::Fixed(n) => {
            if n >= w.m() {
                return Err(Error::WellPosedness { n, m: w.m() });
            }
            Ok((n, None))
        }
        RomDimension::Auto => {
            let (curve, n) = bound_and_select(basis, w)?;
            Ok((n, Some(curve)))
        }
    }
}

/// Chosen sensors, greedy objectives when available, and the ROM dimension used.
pub type PlacedSensors = (Vec<PixelSensor>, Option<Vec<f64>>, Option<usize>);

/// Chooses the sensors configured in `cfg.sensors` from the pixel pool.
pub fn place_sensors(cfg: &PipelineConfig, grid: &StructuredGrid, basis: Option<&PODBasis>) -> Result<PlacedSensors> {
    let pool = cfg.sensor_pool(grid, cfg.sensors.exclude_food)?;
    if cfg.sensors.placement == PlacementKind::All {
        return Ok((pool, None, None));
    }
    let basis = basis.ok_or_else(|| Error::InvalidArgument("greedy and regular placement need a POD basis".into()))?;
    let w_pool = assemble_observer(&pool, grid.len(), cfg.sensors.mode)?;
    let (n, _) = resolve_dimension(cfg.estimation.n, basis, &w_pool)?;
    let m = cfg.sensors.count.unwrap_or((1.5 * n as f64).ceil() as usize);
    let placement = match cfg.sensors.placement {
        PlacementKind::Greedy => greedy_place(&basis.truncated(n)?, &w_pool, m)?,
        _ => regular_placement(&pool, m)?,
    };
    let chosen = placement.indices.iter().map(|&k| pool[k].clone()).collect();
    let objectives = (!placement.objectives.is_empty()).then_some(placement.objectives);
    Ok((chosen, objectives, Some(n)))
}

/// `sensors`: sensor layout JSON.
pub fn cmd_sensors(cfg: &PipelineConfig, rom: Option<&Path>, out: &Path) -> Result<SensorLayout> {
    let grid = cfg.grid()?;
    let basis = rom.map(|p| load_basis(cfg, &grid, p)).transpose()?;
    let (sensors, objectives, _) = place_sensors(cfg, &grid, basis.as_ref())?;
    let mut layout = SensorLayout::new(&grid, cfg.sensors.mode, &sensors);
    layout.objectives = objectives;
    layout.config_hash = Some(cfg.data_hash_hex());
    write_json(out, &layout)?;
    Ok(layout)
}

/// `bound`: e(n) as CSV plus the minimiser in a JSON sidecar.
pub fn cmd_bound(cfg: &PipelineConfig, rom: &Path, sensors: &Path, out: &Path) -> Result<usize> {
    let grid = cfg.grid()?;
    let basis = load_basis(cfg, &grid, rom)?;
    let (_, w) = load_layout(cfg, &grid, sensors)?;
    let (curve, n) = bound_and_select(&basis, &w)?;
    fs::write(out, bound_csv(&curve))?;
    let meta = ArtifactMeta {
        kind: "bound_curve".into(),
        grid_hash: grid.hash_hex(),
        config_hash: cfg.data_hash_hex(),
        details: serde_json::json!({ "n_star": n, "m": w.m(), "curve": curve }),
    };
    write_json(&sidecar_path(out), &meta)?;
    Ok(n)
}

/// `measure`: synthetic measurements `W^T T` of every snapshot of a run.
pub fn cmd_measure(cfg: &PipelineConfig, sensors: &Path, run: &Path, out: &Path) -> Result<SnapshotSet> {
    let grid = cfg.grid()?;
    let (_, w) = load_layout(cfg, &grid, sensors)?;
    let set = load_runs(cfg, &grid, &[run.to_path_buf()])?.remove(0);
    let snaps = set
        .snapshots
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let seed = cfg.sensors.noise_seed.wrapping_add(k as u64);
            Ok(Snapshot { time: s.time, params: s.params, temperature: measure(&w, &s.temperature, cfg.sensors.noise_sd, seed)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let out_set = SnapshotSet::new(grid.hash(), w.m(), snaps)?;
    out_set.save(out)?;
    let meta = ArtifactMeta {
        kind: "measurements".into(),
        grid_hash: grid.hash_hex(),
        config_hash: cfg.data_hash_hex(),
        details: serde_json::json!({ "m": w.m(), "noise_sd": cfg.sensors.noise_sd, "source": run.display().to_string() }),
    };
    write_json(&sidecar_path(out), &meta)?;
    Ok(out_set)
}

/// `reconstruct`: full fields from measurements, in FRST1 form.
pub fn cmd_reconstruct(
    cfg: &PipelineConfig,
    rom: &Path,
    sensors: &Path,
    measurements: &Path,
    n: RomDimension,
    out: &Path,
) -> Result<usize> {
    let grid = cfg.grid()?;
    let basis = load_basis(cfg, &grid, rom)?;
    let (_, w) = load_layout(cfg, &grid, sensors)?;
    let ell = SnapshotSet::load(measurements)?;
    check_grid(&grid.hash(), &ell.grid_hash, &measurements.display().to_string())?;
    check_config(&sidecar_path(measurements), &cfg.data_hash_hex())?;
    if ell.field_len != w.m() {
        return Err(Error::DimensionMismatch { what: "measurement vector", expected: w.m(), actual: ell.field_len });
    }
    let (n_used, curve) = resolve_dimension(n, &basis, &w)?;
    let rec = Reconstructor::new(&basis, &w, n_used)?;
    let mut residuals = Vec::with_capacity(ell.len());
    let snaps = ell
        .snapshots
        .iter()
        .map(|s| {
            let r = rec.reconstruct(&s.temperature)?;
            residuals.push(r.residual);
            Ok(Snapshot { time: s.time, params: s.params, temperature: r.field })
        })
        .collect::<Result<Vec<_>>>()?;
    SnapshotSet::new(grid.hash(), grid.len(), snaps)?.save(out)?;
    let meta = ArtifactMeta {
        kind: "reconstruction".into(),
        grid_hash: grid.hash_hex(),
        config_hash: cfg.data_hash_hex(),
        details: serde_json::json!({
            "n": n_used,
            "auto": matches!(n, RomDimension::Auto),
            "m": w.m(),
            "s_hat_n": rec.gramian().smallest(),
            "residuals": residuals,
            "curve": curve,
        }),
    };
    write_json(&sidecar_path(out), &meta)?;
    Ok(n_used)
}

/// `evaluate`: ErrorReport JSON plus CSV series in `out_dir`.
pub fn cmd_evaluate(cfg: &PipelineConfig, truth: &Path, recon: &Path, out_dir: &Path) -> Result<ErrorReport> {
    let grid = cfg.grid()?;
    let t = SnapshotSet::load(truth)?;
    let r = SnapshotSet::load(recon)?;
    check_grid(&grid.hash(), &t.grid_hash, &truth.display().to_string())?;
    check_grid(&grid.hash(), &r.grid_hash, &recon.display().to_string())?;
    if t.len() != r.len() || t.snapshots.iter().zip(&r.snapshots).any(|(a, b)| a.time != b.time) {
        return Err(Error::InvalidArgument("truth and reconstruction timelines differ".into()));
    }
    let times: Vec<f64> = t.snapshots.iter().map(|s| s.time).collect();
    let a: Vec<Vec<f64>> = t.snapshots.into_iter().map(|s| s.temperature).collect();
    let b: Vec<Vec<f64>> = r.snapshots.into_iter().map(|s| s.temperature).collect();
    let report = error_report(&times, &a, &b, &cfg.control_points(&grid)?)?;
    fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("report.json"), &report)?;
    fs::write(out_dir.join("l2_error.csv"), report.l2_csv())?;
    fs::write(out_dir.join("local.csv"), report.local_csv())?;
    Ok(report)
}

/// Runs the whole chain into `out_dir` and returns the evaluation of every test run.
pub fn cmd_pipeline(cfg: &PipelineConfig, out_dir: &Path) -> Result<Vec<ErrorReport>> {
    let runs = cmd_simulate(cfg, &out_dir.join("runs"))?;
    let (train, test) = runs.split_at(cfg.sampling.train);
    let rom = out_dir.join("basis.from");
    cmd_pod(cfg, train, &rom)?;
    let sensors = out_dir.join("sensors.json");
    cmd_sensors(cfg, Some(&rom), &sensors)?;
    cmd_bound(cfg, &rom, &sensors, &out_dir.join("bound.csv"))?;
    let mut reports = Vec::new();
    for (k, run) in test.iter().enumerate() {
        let tag = format!("test_{k:03}");
        let ell = out_dir.join(format!("{tag}_measurements.frst"));
        cmd_measure(cfg, &sensors, run, &ell)?;
        let rec = out_dir.join(format!("{tag}_reconstruction.frst"));
        cmd_reconstruct(cfg, &rom, &sensors, &ell, cfg.estimation.n, &rec)?;
        reports.push(cmd_evaluate(cfg, run, &rec, &out_dir.join(tag))?);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.grid = GridConfig { nx: 35, ny: 40 };
        cfg.solver.dt = 10.0;
        cfg.solver.t_final = 100.0;
        cfg.solver.stride = 2;
        cfg.sampling = SamplingConfig { count: 3, seed: 5, train: 2 };
        cfg.rom.n_max = 8;
        cfg
    }

    #[test]
    fn config_round_trip_and_hash() {
        let cfg = PipelineConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: PipelineConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash_hex(), cfg.hash_hex());
        assert_ne!(tiny().hash_hex(), cfg.hash_hex());
        let mut other = cfg.clone();
        other.sensors.placement = PlacementKind::Greedy;
        other.rom.n_max = 3;
        assert_ne!(other.hash_hex(), cfg.hash_hex());
        assert_eq!(other.data_hash_hex(), cfg.data_hash_hex());
        let partial: PipelineConfig = serde_json::from_str(r#"{"grid": {"nx": 35, "ny": 40}}"#).unwrap();
        assert_eq!(partial.solver.dt, 2.0);
    }

    #[test]
    fn property_tables_load_from_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.json");
        let flat = r#"{"breakpoints": [-25, 25], "coefficients": [[0.5, 0, 0, 0]]}"#;
        fs::write(&path, flat).unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.materials.conductivity_file = Some(path.clone());
        let m = cfg.materials.build().unwrap();
        assert_eq!(m.food_conductivity.eval(-12.0).unwrap(), 0.5);
        assert_ne!(cfg.data_hash_hex(), PipelineConfig::default().data_hash_hex());
        fs::write(&path, r#"{"breakpoints": [-5, 25], "coefficients": [[0.5, 0, 0, 0]]}"#).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn split_must_be_proper() {
        let mut cfg = PipelineConfig::default();
        cfg.sampling.train = 10;
        assert!(cfg.validate().is_err());
        cfg.sampling.train = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rom_dimension_parsing() {
        assert_eq!("auto".parse::<RomDimension>().unwrap(), RomDimension::Auto);
        assert_eq!("12".parse::<RomDimension>().unwrap(), RomDimension::Fixed(12));
        assert!("x".parse::<RomDimension>().is_err());
    }

    #[test]
    fn default_points_lie_in_food() {
        let cfg = PipelineConfig::default();
        let grid = cfg.grid().unwrap();
        for (_, k) in cfg.control_points(&grid).unwrap() {
            assert_eq!(grid.mask[k], CellKind::Food);
        }
    }

    #[test]
    fn full_chain_on_a_tiny_case() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        let reports = cmd_pipeline(&cfg, dir.path()).unwrap();
        assert_eq!(reports.len(), 1);
        for f in ["basis.from", "basis.from.json", "sensors.json", "bound.csv", "bound.csv.json", "test_000/report.json", "test_000/local.csv"] {
            assert!(dir.path().join(f).exists(), "{f} missing");
        }
        assert!(reports[0].time_averaged.is_finite());
        // truth against itself
        let run = dir.path().join("runs").join(run_file_name(2));
        let same = cmd_evaluate(&cfg, &run, &run, &dir.path().join("self")).unwrap();
        assert!(same.relative_l2.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_grid_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        let runs = cmd_simulate(&cfg, dir.path()).unwrap();
        let mut other = cfg.clone();
        other.grid = GridConfig { nx: 70, ny: 80 };
        assert!(matches!(cmd_pod(&other, &runs, &dir.path().join("b.from")), Err(Error::GridMismatch(_))));
    }
}

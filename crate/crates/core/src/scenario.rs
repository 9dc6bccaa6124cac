//! JSON scenario files, the simulate / converge / sweep drivers and their CSV
//! output.
//!
//! A scenario document looks like
//!
//! ```json
//! {
//!   "grid": { "dim": 1, "L": 20.0, "N": 2048 },
//!   "species": [
//!     { "valence": 1, "profile": { "kind": "gaussian", "amplitude": 0.28, "center": [2.0], "variance": 1.0 } },
//!     { "valence": -1, "profile": { "kind": "constant", "value": 1e-6 } }
//!   ],
//!   "kernels": {
//!     "electrostatic": { "kind": "exp_decay" },
//!     "steric": { "kind": "regularized_power", "eta": 1.0, "k": 2.0, "a": 0.1 }
//!   },
//!   "external": { "q": 1.0, "E": 0.0 },
//!   "boundary": { "kind": "no_flux" },
//!   "time": { "t_end": 23.0, "outputs": [1.0, 2.0], "safety": 1.0 },
//!   "correlated": { "enabled": false, "l_c": 1.0, "a": 0.1 }
//! }
//! ```
//!
//! The grid covers `[-L, L]^dim` with `N` cells per axis. `external`,
//! `boundary` and `correlated` may be omitted.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::diagnostics::DiagnosticsRecord;
use crate::grid::{error_norms_multi, restrict, Dim, ErrorNorms, Grid, SpeciesField, State};
use crate::kernels::KernelSpec;
use crate::model::{Correlation, ExternalPotential, ModelConfig, ModelTables};
use crate::solver::{
    run, BoundaryCondition, GaussianPulse, RunOutput, RunSettings, SolverError, StepSettings,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl ScenarioError {
    /// 1 for bad input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse(_) | Self::Validation { .. } => 1,
            Self::Io { .. } | Self::Solver(_) => 2,
        }
    }

    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ScenarioError + '_ {
    move |e| ScenarioError::Io {
        path: path.to_path_buf(),
        source: io::Error::other(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub dim: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `amplitude · exp(-|x - center|² / (2 variance))`.
    Gaussian {
        amplitude: f64,
        center: Vec<f64>,
        variance: f64,
    },
    Constant {
        value: f64,
    },
}

impl Profile {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Self::Gaussian {
                amplitude,
                center,
                variance,
            } => {
                let dx = x - center[0];
                let dy = center.get(1).map_or(0.0, |c| y - c);
                amplitude * (-(dx * dx + dy * dy) / (2.0 * variance)).exp()
            }
            Self::Constant { value } => *value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesBlock {
    pub valence: i32,
    pub profile: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelBlock {
    pub electrostatic: KernelSpec<f64>,
    pub steric: KernelSpec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalBlock {
    #[serde(default)]
    pub q: f64,
    #[serde(default, rename = "E")]
    pub field: f64,
    #[serde(default)]
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryBlock {
    #[default]
    NoFlux,
    LeftInflux {
        /// Zero-based species index.
        species: usize,
        mass: f64,
        center: f64,
        width: f64,
    },
}

fn default_safety() -> f64 {
    0.9
}

fn default_dt_cap() -> f64 {
    1e-2
}

fn default_steady_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeBlock {
    pub t_end: f64,
    #[serde(default)]
    pub outputs: Vec<f64>,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default = "default_dt_cap")]
    pub dt_cap: f64,
    #[serde(default = "default_steady_tol")]
    pub steady_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelatedBlock {
    pub enabled: bool,
    pub l_c: f64,
    pub a: f64,
}

impl Default for CorrelatedBlock {
    fn default() -> Self {
        Self {
            enabled: false,
            l_c: 1.0,
            a: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub grid: GridBlock,
    pub species: Vec<SpeciesBlock>,
    pub kernels: KernelBlock,
    #[serde(default)]
    pub external: ExternalBlock,
    #[serde(default)]
    pub boundary: BoundaryBlock,
    pub time: TimeBlock,
    #[serde(default)]
    pub correlated: CorrelatedBlock,
}

fn finite(field: String, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::invalid(field, "must be finite"))
    }
}

fn positive(field: String, v: f64) -> Result<(), ScenarioError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::invalid(
            field,
            format!("must be positive, got {v}"),
        ))
    }
}

fn nonnegative(field: String, v: f64) -> Result<(), ScenarioError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::invalid(
            field,
            format!("must be nonnegative, got {v}"),
        ))
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.to_string();
            // serde reports a missing key at its parent; name the key itself
            if let Some(rest) = msg.strip_prefix("missing field `") {
                let key = rest.split('`').next().unwrap_or_default();
                let field = if path == "." {
                    key.to_string()
                } else {
                    format!("{path}.{key}")
                };
                ScenarioError::invalid(field, "missing")
            } else if inner.is_data() {
                ScenarioError::invalid(path, msg)
            } else {
                ScenarioError::Parse(msg)
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let g = &self.grid;
        if !(1..=2).contains(&g.dim) {
            return Err(ScenarioError::invalid("grid.dim", "must be 1 or 2"));
        }
        positive("grid.L".into(), g.half_width)?;
        if g.n < 2 || !g.n.is_multiple_of(2) {
            return Err(ScenarioError::invalid(
                "grid.N",
                "must be even and at least 2",
            ));
        }
        if self.species.is_empty() {
            return Err(ScenarioError::invalid(
                "species",
                "at least one species is required",
            ));
        }
        for (i, s) in self.species.iter().enumerate() {
            let p = format!("species[{i}].profile");
            match &s.profile {
                Profile::Gaussian {
                    amplitude,
                    center,
                    variance,
                } => {
                    nonnegative(format!("{p}.amplitude"), *amplitude)?;
                    positive(format!("{p}.variance"), *variance)?;
                    if center.len() != g.dim {
                        return Err(ScenarioError::invalid(
                            format!("{p}.center"),
                            format!("needs {} coordinate(s)", g.dim),
                        ));
                    }
                    for (k, c) in center.iter().enumerate() {
                        finite(format!("{p}.center[{k}]"), *c)?;
                    }
                }
                Profile::Constant { value } => nonnegative(format!("{p}.value"), *value)?,
            }
        }
        self.kernels
            .electrostatic
            .validate()
            .map_err(|e| ScenarioError::invalid("kernels.electrostatic", e.to_string()))?;
        self.kernels
            .steric
            .validate()
            .map_err(|e| ScenarioError::invalid("kernels.steric", e.to_string()))?;
        finite("external.q".into(), self.external.q)?;
        finite("external.E".into(), self.external.field)?;
        finite("external.offset".into(), self.external.offset)?;
        if let BoundaryBlock::LeftInflux {
            species,
            mass,
            center,
            width,
        } = &self.boundary
        {
            if g.dim != 1 {
                return Err(ScenarioError::invalid(
                    "boundary",
                    "left influx needs a 1D grid",
                ));
            }
            if *species >= self.species.len() {
                return Err(ScenarioError::invalid(
                    "boundary.species",
                    format!("no species with index {species}"),
                ));
            }
            nonnegative("boundary.mass".into(), *mass)?;
            finite("boundary.center".into(), *center)?;
            positive("boundary.width".into(), *width)?;
        }
        let t = &self.time;
        nonnegative("time.t_end".into(), t.t_end)?;
        for (k, o) in t.outputs.iter().enumerate() {
            nonnegative(format!("time.outputs[{k}]"), *o)?;
        }
        if !(t.safety > 0.0 && t.safety <= 1.0) {
            return Err(ScenarioError::invalid("time.safety", "must lie in (0, 1]"));
        }
        positive("time.dt_cap".into(), t.dt_cap)?;
        nonnegative("time.steady_tol".into(), t.steady_tol)?;
        if self.correlated.enabled {
            positive("correlated.l_c".into(), self.correlated.l_c)?;
            positive("correlated.a".into(), self.correlated.a)?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid<f64>, ScenarioError> {
        let dim = Dim::from_usize(self.grid.dim)
            .map_err(|e| ScenarioError::invalid("grid.dim", e.to_string()))?;
        Grid::new(dim, self.grid.half_width, self.grid.n)
            .map_err(|e| ScenarioError::invalid("grid", e.to_string()))
    }

    /// Profiles sampled at cell centers.
    pub fn initial_state(&self) -> Result<State<f64>, ScenarioError> {
        let grid = self.grid()?;
        let species = self
            .species
            .iter()
            .map(|s| {
                let values = (0..grid.cell_count())
                    .map(|idx| {
                        let (x, y) = grid.cell_point(idx);
                        s.profile.eval(x, y)
                    })
                    .collect();
                SpeciesField::new(s.valence, values)
            })
            .collect();
        State::new(grid, species).map_err(|e| ScenarioError::invalid("species", e.to_string()))
    }

    pub fn model(&self) -> ModelConfig<f64> {
        ModelConfig {
            valences: self.species.iter().map(|s| s.valence).collect(),
            electrostatic: self.kernels.electrostatic,
            steric: self.kernels.steric,
            external: ExternalPotential {
                quadratic: self.external.q,
                field: self.external.field,
                offset: self.external.offset,
            },
            correlation: self.correlated.enabled.then_some(Correlation {
                l_c: self.correlated.l_c,
                a: self.correlated.a,
            }),
        }
    }

    pub fn boundary(&self) -> BoundaryCondition<f64> {
        match self.boundary {
            BoundaryBlock::NoFlux => BoundaryCondition::NoFlux,
            BoundaryBlock::LeftInflux {
                species,
                mass,
                center,
                width,
            } => BoundaryCondition::LeftInflux {
                species,
                pulse: GaussianPulse {
                    mass,
                    center,
                    width,
                },
            },
        }
    }

    pub fn run_settings(&self) -> RunSettings<f64> {
        RunSettings {
            output_times: self.time.outputs.clone(),
            step: StepSettings {
                safety: self.time.safety,
                dt_cap: self.time.dt_cap,
            },
            steady_tol: self.time.steady_tol,
            ..RunSettings::new(self.time.t_end)
        }
    }

    /// Copy with the number at a dotted path (`kernels.steric.eta`,
    /// `correlated.l_c`, `grid.N`, ...) replaced by `value`.
    pub fn with_param(&self, path: &str, value: f64) -> Result<Self, ScenarioError> {
        let mut doc = serde_json::to_value(self).expect("config serializes");
        let pointer = format!("/{}", path.replace('.', "/"));
        let slot = doc
            .pointer_mut(&pointer)
            .ok_or_else(|| ScenarioError::invalid(path, "no such parameter"))?;
        *slot = match slot {
            Value::Number(n) if !n.is_f64() => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(ScenarioError::invalid(
                        path,
                        "expects a nonnegative integer",
                    ));
                }
                Value::from(value as u64)
            }
            Value::Number(_) => serde_json::Number::from_f64(value)
                .map(Value::Number)
                .ok_or_else(|| ScenarioError::invalid(path, "must be finite"))?,
            _ => return Err(ScenarioError::invalid(path, "is not a number")),
        };
        let cfg: Self =
            serde_json::from_value(doc).map_err(|e| ScenarioError::invalid(path, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|e| {
        ScenarioError::invalid("config", format!("cannot read {}: {e}", path.display()))
    })?;
    ScenarioConfig::parse(&text)
}

pub fn save_config(cfg: &ScenarioConfig, path: &Path) -> Result<(), ScenarioError> {
    fs::write(path, cfg.to_json() + "\n").map_err(io_err(path))
}

/// Everything needed to run a validated config.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: ModelConfig<f64>,
    pub tables: ModelTables<f64>,
    pub initial: State<f64>,
    pub boundary: BoundaryCondition<f64>,
    pub settings: RunSettings<f64>,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self, ScenarioError> {
        config.validate()?;
        let initial = config.initial_state()?;
        let model = config.model();
        let tables = ModelTables::build(&model, &initial.grid)
            .map_err(|e| ScenarioError::invalid("kernels", e.to_string()))?;
        let boundary = config.boundary();
        let settings = config.run_settings();
        Ok(Self {
            config,
            model,
            tables,
            initial,
            boundary,
            settings,
        })
    }

    pub fn run(&self) -> Result<RunOutput<f64>, ScenarioError> {
        Ok(run(
            &self.initial,
            &self.model,
            &self.tables,
            &self.boundary,
            &self.settings,
        )?)
    }

    pub fn run_without_snapshots(&self) -> Result<RunOutput<f64>, ScenarioError> {
        let settings = RunSettings {
            keep_snapshots: false,
            ..self.settings.clone()
        };
        Ok(run(
            &self.initial,
            &self.model,
            &self.tables,
            &self.boundary,
            &settings,
        )?)
    }
}

/// Final-time figures of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub peaks: Vec<f64>,
    /// Cell-center position of each species' maximum (first coordinate in 2D).
    pub peak_positions: Vec<f64>,
    pub flatness: Vec<Option<f64>>,
    pub energy: f64,
    pub dissipation: f64,
    pub steady_at: Option<f64>,
    pub injected_mass: f64,
    pub steps: usize,
}

impl RunSummary {
    pub fn of(out: &RunOutput<f64>) -> Self {
        let last = out
            .records
            .last()
            .expect("a run records at least its start");
        let state = &out.final_state;
        RunSummary {
            peaks: state.species.iter().map(|s| s.max()).collect(),
            peak_positions: state
                .species
                .iter()
                .map(|s| state.grid.cell_point(s.argmax()).0)
                .collect(),
            flatness: last.flatness.clone(),
            energy: last.energy.total,
            dissipation: last.dissipation,
            steady_at: out.steady_at,
            injected_mass: out.injected_mass,
            steps: out.steps,
        }
    }
}

/// Round-trip scientific notation with 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), fmt_num)
}

fn numbered(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |m| format!("{prefix}_{m}"))
}

fn create_dir(dir: &Path) -> Result<(), ScenarioError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, ScenarioError> {
    csv::Writer::from_path(path).map_err(csv_err(path))
}

pub fn write_snapshot(
    path: &Path,
    state: &State<f64>,
    psi: &[Vec<f64>],
) -> Result<(), ScenarioError> {
    let m = state.species_count();
    let mut w = writer(path)?;
    let mut header: Vec<String> = match state.grid.dim() {
        Dim::One => vec!["x".into()],
        Dim::Two => vec!["x".into(), "y".into()],
    };
    header.extend(numbered("c", m));
    header.extend(numbered("psi", m));
    w.write_record(&header).map_err(csv_err(path))?;
    for idx in 0..state.grid.cell_count() {
        let (x, y) = state.grid.cell_point(idx);
        let mut row = vec![fmt_num(x)];
        if state.grid.dim() == Dim::Two {
            row.push(fmt_num(y));
        }
        row.extend(state.species.iter().map(|s| fmt_num(s.values[idx])));
        row.extend(psi.iter().map(|p| fmt_num(p[idx])));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_energy(path: &Path, records: &[DiagnosticsRecord<f64>]) -> Result<(), ScenarioError> {
    let m = records.first().map_or(0, |r| r.masses.len());
    let mut w = writer(path)?;
    let mut header: Vec<String> = ["t", "E", "F1", "F2", "F3", "F4", "D"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(numbered("mass", m));
    header.push("sigma2".into());
    header.extend(numbered("flatness", m));
    w.write_record(&header).map_err(csv_err(path))?;
    for r in records {
        let e = &r.energy;
        let mut row: Vec<String> = [
            r.t,
            e.total,
            e.entropy,
            e.electrostatic,
            e.steric,
            e.external,
            r.dissipation,
        ]
        .into_iter()
        .map(fmt_num)
        .collect();
        row.extend(r.masses.iter().copied().map(fmt_num));
        row.push(fmt_num(r.second_moment));
        row.extend(r.flatness.iter().copied().map(fmt_opt));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Runs a scenario and writes `snapshot_NNNN.csv` per output time, an index
/// `snapshots.csv` (index, t, file) and `energy.csv`.
pub fn cmd_simulate(config: &ScenarioConfig, out_dir: &Path) -> Result<RunSummary, ScenarioError> {
    let scenario = Scenario::new(config.clone())?;
    create_dir(out_dir)?;
    let out = scenario.run()?;
    let index_path = out_dir.join("snapshots.csv");
    let mut index = writer(&index_path)?;
    index
        .write_record(["index", "t", "file"])
        .map_err(csv_err(&index_path))?;
    for (i, snap) in out.snapshots.iter().enumerate() {
        let file = format!("snapshot_{i:04}.csv");
        write_snapshot(&out_dir.join(&file), &snap.state, &snap.psi)?;
        index
            .write_record([i.to_string(), fmt_num(snap.state.time), file])
            .map_err(csv_err(&index_path))?;
    }
    index.flush().map_err(io_err(&index_path))?;
    write_energy(&out_dir.join("energy.csv"), &out.records)?;
    Ok(RunSummary::of(&out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub dx: f64,
    pub errors: ErrorNorms<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slopes of `log error` against `log Δx`.
    pub slope_l_inf: f64,
    pub slope_l1: f64,
    pub slope_l2: f64,
}

/// Slope of the least-squares line through `(log x, log y)`; pairs with a
/// nonpositive entry are skipped. `NaN` with fewer than two usable points.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Grid-refinement study against a restricted reference solution; no files.
pub fn convergence_study(
    base: &ScenarioConfig,
    ns: &[usize],
    n_ref: usize,
) -> Result<ConvergenceTable, ScenarioError> {
    if !n_ref.is_power_of_two() {
        return Err(ScenarioError::invalid("ref", "must be a power of two"));
    }
    if ns.is_empty() {
        return Err(ScenarioError::invalid(
            "n",
            "at least one grid size is required",
        ));
    }
    for &n in ns {
        if !n.is_power_of_two() || n > n_ref {
            return Err(ScenarioError::invalid(
                "n",
                format!("{n} is not a power of two no larger than the reference {n_ref}"),
            ));
        }
    }
    let with_n = |n: usize| {
        let mut cfg = base.clone();
        cfg.grid.n = n;
        cfg.time.outputs.clear();
        Scenario::new(cfg)
    };
    let reference = with_n(n_ref)?.run_without_snapshots()?.final_state;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let coarse = if n == n_ref {
            reference.clone()
        } else {
            with_n(n)?.run_without_snapshots()?.final_state
        };
        let restricted: Vec<Vec<f64>> = reference
            .species
            .iter()
            .map(|s| restrict(&s.values, &reference.grid, &coarse.grid))
            .collect::<Result<_, _>>()
            .map_err(|e| ScenarioError::invalid("n", e.to_string()))?;
        let pairs: Vec<(&[f64], &[f64])> = coarse
            .species
            .iter()
            .zip(&restricted)
            .map(|(s, r)| (s.values.as_slice(), r.as_slice()))
            .collect();
        rows.push(ConvergenceRow {
            n,
            dx: coarse.grid.spacing(),
            errors: error_norms_multi(&pairs, &coarse.grid),
        });
    }
    let slope = |f: fn(&ErrorNorms<f64>) -> f64| {
        loglog_slope(
            &rows
                .iter()
                .map(|r| (r.dx, f(&r.errors)))
                .collect::<Vec<_>>(),
        )
    };
    Ok(ConvergenceTable {
        slope_l_inf: slope(|e| e.l_inf),
        slope_l1: slope(|e| e.l1),
        slope_l2: slope(|e| e.l2),
        rows,
    })
}

/// Writes `convergence.csv` (N, dx, linf, l1, l2) and `slopes.csv`.
pub fn cmd_converge(
    base: &ScenarioConfig,
    ns: &[usize],
    n_ref: usize,
    out_dir: &Path,
) -> Result<ConvergenceTable, ScenarioError> {
    let table = convergence_study(base, ns, n_ref)?;
    create_dir(out_dir)?;
    let path = out_dir.join("convergence.csv");
    let mut w = writer(&path)?;
    w.write_record(["N", "dx", "linf", "l1", "l2"])
        .map_err(csv_err(&path))?;
    for r in &table.rows {
        w.write_record([
            r.n.to_string(),
            fmt_num(r.dx),
            fmt_num(r.errors.l_inf),
            fmt_num(r.errors.l1),
            fmt_num(r.errors.l2),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    let path = out_dir.join("slopes.csv");
    let mut w = writer(&path)?;
    w.write_record(["norm", "slope"]).map_err(csv_err(&path))?;
    for (name, s) in [
        ("linf", table.slope_l_inf),
        ("l1", table.slope_l1),
        ("l2", table.slope_l2),
    ] {
        w.write_record([name.to_string(), fmt_num(s)])
            .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(table)
}

/// A base config, a dotted parameter path and the values to try.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub base: ScenarioConfig,
    pub param: String,
    pub values: Vec<f64>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.values.is_empty() {
            return Err(ScenarioError::invalid(
                "values",
                "at least one value is required",
            ));
        }
        for &v in &self.values {
            self.base.with_param(&self.param, v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub value: f64,
    pub outcome: Result<RunSummary, String>,
}

/// One run per value in `run_NNN/`, plus `summary.csv`
/// (value, peak_1..M, flatness_1..M, E, D) and `failures.csv`.
pub fn cmd_sweep(sweep: &SweepConfig, out_dir: &Path) -> Result<Vec<SweepRun>, ScenarioError> {
    sweep.validate()?;
    create_dir(out_dir)?;
    let mut runs = Vec::with_capacity(sweep.values.len());
    for (i, &value) in sweep.values.iter().enumerate() {
        let cfg = sweep.base.with_param(&sweep.param, value)?;
        let outcome =
            cmd_simulate(&cfg, &out_dir.join(format!("run_{i:03}"))).map_err(|e| e.to_string());
        runs.push(SweepRun { value, outcome });
    }
    let m = sweep.base.species.len();
    let path = out_dir.join("summary.csv");
    let mut w = writer(&path)?;
    let mut header = vec!["value".to_string()];
    header.extend(numbered("peak", m));
    header.extend(numbered("flatness", m));
    header.extend(["E".to_string(), "D".to_string()]);
    w.write_record(&header).map_err(csv_err(&path))?;
    for r in &runs {
        if let Ok(s) = &r.outcome {
            let mut row = vec![fmt_num(r.value)];
            row.extend(s.peaks.iter().copied().map(fmt_num));
            row.extend(s.flatness.iter().copied().map(fmt_opt));
            row.extend([fmt_num(s.energy), fmt_num(s.dissipation)]);
            w.write_record(&row).map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(io_err(&path))?;
    let path = out_dir.join("failures.csv");
    let mut w = writer(&path)?;
    w.write_record(["value", "error"]).map_err(csv_err(&path))?;
    for r in &runs {
        if let Err(msg) = &r.outcome {
            w.write_record([fmt_num(r.value), msg.clone()])
                .map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(io_err(&path))?;
    Ok(runs)
}

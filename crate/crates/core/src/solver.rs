//! Upwind finite-volume scheme with forward Euler stepping.
//!
//! Face layout. 1D: interior velocities have length `N-1` (face `f` sits
//! between cells `f` and `f+1`); fluxes have length `N+1` with the two
//! boundary faces at the ends. 2D: x-faces are indexed `f * N + k`, y-faces
//! `j * (N-1) + f` for velocities and `j * (N+1) + f` for fluxes.

use thiserror::Error;

use crate::diagnostics::{record, DiagnosticsRecord};
use crate::grid::{Dim, Grid, State};
use crate::model::{potential_terms, ModelConfig, ModelError, ModelTables};
use crate::num::Real;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(
        "time step violates the CFL bound: species {species}, cell {cell}, diagonal weight {weight}"
    )]
    CflViolation {
        species: usize,
        cell: usize,
        weight: f64,
    },
    #[error("state became non-finite at t = {0}")]
    NonFinite(f64),
    #[error("invalid boundary condition: {0}")]
    Boundary(String),
    #[error("invalid run settings: {0}")]
    Settings(String),
}

/// Gaussian time profile `mass / (width √(2π)) · exp(-(t - center)² / (2 width²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPulse<T> {
    pub mass: T,
    pub center: T,
    pub width: T,
}

impl<T: Real> GaussianPulse<T> {
    /// Unit-mass pulse centred at `t = 5` with unit width.
    pub fn standard() -> Self {
        Self {
            mass: T::one(),
            center: T::lit(5.0),
            width: T::one(),
        }
    }

    pub fn flux(&self, t: T) -> T {
        let s = (t - self.center) / self.width;
        self.mass / (self.width * (T::lit(2.0) * T::PI()).sqrt()) * (-s * s * T::lit(0.5)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition<T> {
    NoFlux,
    /// Prescribed inflow through the left end for one species (1D only);
    /// every other boundary flux is zero.
    LeftInflux {
        species: usize,
        pulse: GaussianPulse<T>,
    },
}

impl<T: Real> BoundaryCondition<T> {
    pub fn validate(&self, grid: &Grid<T>, species_count: usize) -> Result<(), SolverError> {
        match self {
            Self::NoFlux => Ok(()),
            Self::LeftInflux { species, pulse } => {
                if grid.dim() != Dim::One {
                    return Err(SolverError::Boundary(
                        "left influx is only defined for 1D grids".into(),
                    ));
                }
                if *species >= species_count {
                    return Err(SolverError::Boundary(format!(
                        "influx species {species} out of range (have {species_count})"
                    )));
                }
                if !(pulse.mass >= T::zero() && pulse.width > T::zero())
                    || !pulse.center.is_finite()
                {
                    return Err(SolverError::Boundary(
                        "pulse needs mass >= 0, width > 0 and a finite center".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Left boundary flux of `species` at time `t`.
    pub fn left_flux(&self, species: usize, t: T) -> T {
        match self {
            Self::LeftInflux { species: s, pulse } if *s == species => pulse.flux(t),
            _ => T::zero(),
        }
    }
}

/// Interior face velocities of one species.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceVelocities<T> {
    pub x: Vec<T>,
    /// Empty in 1D.
    pub y: Vec<T>,
}

/// `u_{j+1/2} = -(ψ_{j+1} - ψ_j)/Δx` on interior faces.
pub fn face_velocities<T: Real>(psi: &[T], grid: &Grid<T>) -> FaceVelocities<T> {
    let n = grid.n();
    let inv = T::one() / grid.spacing();
    match grid.dim() {
        Dim::One => FaceVelocities {
            x: psi.windows(2).map(|w| -(w[1] - w[0]) * inv).collect(),
            y: Vec::new(),
        },
        Dim::Two => {
            let mut x = Vec::with_capacity((n - 1) * n);
            for f in 0..n - 1 {
                for k in 0..n {
                    x.push(-(psi[(f + 1) * n + k] - psi[f * n + k]) * inv);
                }
            }
            let mut y = Vec::with_capacity(n * (n - 1));
            for j in 0..n {
                let row = &psi[j * n..(j + 1) * n];
                y.extend(row.windows(2).map(|w| -(w[1] - w[0]) * inv));
            }
            FaceVelocities { x, y }
        }
    }
}

/// `(u⁺, u⁻) = (max(u, 0), -min(u, 0))`.
pub fn upwind_split<T: Real>(u: T) -> (T, T) {
    (u.max(T::zero()), -(u.min(T::zero())))
}

/// Face fluxes of one species including boundary faces.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFluxes<T> {
    pub x: Vec<T>,
    /// Empty in 1D.
    pub y: Vec<T>,
}

fn upwind_flux<T: Real>(u: T, left: T, right: T) -> T {
    let (up, um) = upwind_split(u);
    up * left - um * right
}

/// `F_{j+1/2} = u⁺ c_j - u⁻ c_{j+1}` on every face of every species.
pub fn fluxes<T: Real>(
    state: &State<T>,
    velocities: &[FaceVelocities<T>],
    bc: &BoundaryCondition<T>,
    t: T,
) -> Vec<FaceFluxes<T>> {
    let grid = &state.grid;
    let n = grid.n();
    state
        .species
        .iter()
        .zip(velocities)
        .enumerate()
        .map(|(m, (s, v))| {
            let c = &s.values;
            match grid.dim() {
                Dim::One => {
                    let mut x = Vec::with_capacity(n + 1);
                    x.push(bc.left_flux(m, t));
                    for f in 0..n - 1 {
                        x.push(upwind_flux(v.x[f], c[f], c[f + 1]));
                    }
                    x.push(T::zero());
                    FaceFluxes { x, y: Vec::new() }
                }
                Dim::Two => {
                    let mut x = vec![T::zero(); (n + 1) * n];
                    for f in 0..n - 1 {
                        for k in 0..n {
                            x[(f + 1) * n + k] =
                                upwind_flux(v.x[f * n + k], c[f * n + k], c[(f + 1) * n + k]);
                        }
                    }
                    let mut y = vec![T::zero(); n * (n + 1)];
                    for j in 0..n {
                        for f in 0..n - 1 {
                            y[j * (n + 1) + f + 1] =
                                upwind_flux(v.y[j * (n - 1) + f], c[j * n + f], c[j * n + f + 1]);
                        }
                    }
                    FaceFluxes { x, y }
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSettings<T> {
    /// Fraction of the CFL bound actually used.
    pub safety: T,
    /// Step used when every velocity vanishes.
    pub dt_cap: T,
}

impl<T: Real> Default for StepSettings<T> {
    fn default() -> Self {
        Self {
            safety: T::lit(0.9),
            dt_cap: T::lit(1e-2),
        }
    }
}

impl<T: Real> StepSettings<T> {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.safety > T::zero() && self.safety <= T::one()) {
            return Err(SolverError::Settings("safety must lie in (0, 1]".into()));
        }
        if !(self.dt_cap > T::zero()) || !self.dt_cap.is_finite() {
            return Err(SolverError::Settings("dt_cap must be positive".into()));
        }
        Ok(())
    }
}

/// Admissible step and the speeds that determined it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflBound<T> {
    pub dt: T,
    pub u_max: T,
    pub v_max: T,
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, u| m.max(u.abs()))
}

/// 1D: `safety·Δx/(2 U_max)`; 2D: `safety·min(Δx/(4 U_max), Δy/(4 V_max))`.
pub fn cfl_dt<T: Real>(
    velocities: &[FaceVelocities<T>],
    grid: &Grid<T>,
    settings: &StepSettings<T>,
) -> CflBound<T> {
    let u_max = velocities
        .iter()
        .map(|v| max_abs(&v.x))
        .fold(T::zero(), T::max);
    let v_max = velocities
        .iter()
        .map(|v| max_abs(&v.y))
        .fold(T::zero(), T::max);
    let h = grid.spacing();
    let bound = |speed: T, factor: f64| {
        if speed > T::zero() {
            h / (T::lit(factor) * speed)
        } else {
            T::infinity()
        }
    };
    let raw = match grid.dim() {
        Dim::One => bound(u_max, 2.0),
        Dim::Two => bound(u_max, 4.0).min(bound(v_max, 4.0)),
    };
    let dt = if raw.is_finite() {
        settings.safety * raw
    } else {
        settings.dt_cap
    };
    CflBound { dt, u_max, v_max }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport<T> {
    pub dt: T,
    pub u_max: T,
    pub v_max: T,
    /// Diagonal weights that rounded slightly below zero and were floored.
    pub floor_hits: usize,
    pub injected_mass: T,
    /// True when `dt` was shortened to land on `max_dt`.
    pub clipped: bool,
}

/// One forward Euler step at the CFL-limited time step.
pub fn step_forward_euler<T: Real>(
    state: &State<T>,
    model: &ModelConfig<T>,
    tables: &ModelTables<T>,
    bc: &BoundaryCondition<T>,
    settings: &StepSettings<T>,
) -> Result<(State<T>, StepReport<T>), SolverError> {
    step_with_limit(state, model, tables, bc, settings, None)
}

/// Like [`step_forward_euler`] but never steps further than `max_dt`.
pub fn step_with_limit<T: Real>(
    state: &State<T>,
    model: &ModelConfig<T>,
    tables: &ModelTables<T>,
    bc: &BoundaryCondition<T>,
    settings: &StepSettings<T>,
    max_dt: Option<T>,
) -> Result<(State<T>, StepReport<T>), SolverError> {
    let psi = potential_terms(state, model, tables)?;
    let grid = &state.grid;
    let velocities: Vec<FaceVelocities<T>> = psi
        .varying
        .iter()
        .map(|p| face_velocities(p, grid))
        .collect();
    let cfl = cfl_dt(&velocities, grid, settings);
    let (dt, clipped) = match max_dt {
        Some(limit) if limit < cfl.dt => (limit, true),
        _ => (cfl.dt, false),
    };
    let lambda = dt / grid.spacing();
    let mut floor_hits = 0;
    let mut next = state.clone();
    next.time = state.time + dt;
    let mut injected_mass = T::zero();
    for (m, (out, v)) in next.species.iter_mut().zip(&velocities).enumerate() {
        let c = &state.species[m].values;
        let update = match grid.dim() {
            Dim::One => {
                let influx = bc.left_flux(m, state.time);
                injected_mass += dt * influx;
                update_1d(c, &v.x, lambda, lambda * influx, &mut out.values)
            }
            Dim::Two => update_2d(c, v, grid.n(), lambda, &mut out.values),
        };
        floor_hits += update.map_err(|(cell, weight)| SolverError::CflViolation {
            species: m,
            cell,
            weight: weight.to_f64_lossy(),
        })?;
    }
    if !next.is_finite() {
        return Err(SolverError::NonFinite(next.time.to_f64_lossy()));
    }
    Ok((
        next,
        StepReport {
            dt,
            u_max: cfl.u_max,
            v_max: cfl.v_max,
            floor_hits,
            injected_mass,
            clipped,
        },
    ))
}

/// Tolerance on a diagonal weight that is negative only through rounding.
fn weight_tolerance<T: Real>() -> T {
    T::epsilon() * T::lit(64.0)
}

/// Floors a diagonal weight at zero; a clearly negative weight is a CFL fault.
fn checked_weight<T: Real>(w: T, cell: usize, hits: &mut usize) -> Result<T, (usize, T)> {
    if w >= T::zero() {
        Ok(w)
    } else if w >= -weight_tolerance::<T>() {
        *hits += 1;
        Ok(T::zero())
    } else {
        Err((cell, w))
    }
}

/// Convex-combination form of `c - λ(F_{j+1/2} - F_{j-1/2})`; every term is
/// non-negative, so the result is too.
fn update_1d<T: Real>(
    c: &[T],
    u: &[T],
    lambda: T,
    left_inflow: T,
    out: &mut [T],
) -> Result<usize, (usize, T)> {
    let n = c.len();
    let mut hits = 0;
    for j in 0..n {
        // (u⁺, u⁻) on the right face j+1/2 and the left face j-1/2
        let (rp, rm) = if j + 1 < n {
            upwind_split(u[j])
        } else {
            (T::zero(), T::zero())
        };
        let (lp, lm) = if j > 0 {
            upwind_split(u[j - 1])
        } else {
            (T::zero(), T::zero())
        };
        let w = checked_weight(T::one() - lambda * (rp + lm), j, &mut hits)?;
        let mut v = w * c[j];
        if j + 1 < n {
            v += lambda * rm * c[j + 1];
        }
        if j > 0 {
            v += lambda * lp * c[j - 1];
        } else {
            v += left_inflow;
        }
        out[j] = v;
    }
    Ok(hits)
}

fn update_2d<T: Real>(
    c: &[T],
    v: &FaceVelocities<T>,
    n: usize,
    lambda: T,
    out: &mut [T],
) -> Result<usize, (usize, T)> {
    let zero = (T::zero(), T::zero());
    let mut hits = 0;
    for j in 0..n {
        for k in 0..n {
            let idx = j * n + k;
            let east = if j + 1 < n {
                upwind_split(v.x[j * n + k])
            } else {
                zero
            };
            let west = if j > 0 {
                upwind_split(v.x[(j - 1) * n + k])
            } else {
                zero
            };
            let north = if k + 1 < n {
                upwind_split(v.y[j * (n - 1) + k])
            } else {
                zero
            };
            let south = if k > 0 {
                upwind_split(v.y[j * (n - 1) + k - 1])
            } else {
                zero
            };
            let w = checked_weight(
                T::one() - lambda * (east.0 + west.1) - lambda * (north.0 + south.1),
                idx,
                &mut hits,
            )?;
            let mut val = w * c[idx];
            if j + 1 < n {
                val += lambda * east.1 * c[idx + n];
            }
            if j > 0 {
                val += lambda * west.0 * c[idx - n];
            }
            if k + 1 < n {
                val += lambda * north.1 * c[idx + 1];
            }
            if k > 0 {
                val += lambda * south.0 * c[idx - 1];
            }
            out[idx] = val;
        }
    }
    Ok(hits)
}

/// Time-loop configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings<T> {
    pub t_end: T,
    /// Times at which diagnostics and snapshots are recorded; the start and
    /// `t_end` are always included.
    pub output_times: Vec<T>,
    pub step: StepSettings<T>,
    /// Dissipation level below which two consecutive outputs count as steady.
    pub steady_tol: T,
    /// Flatness mask threshold as a fraction of each species' peak.
    pub flatness_rel_threshold: T,
    pub keep_snapshots: bool,
}

impl<T: Real> RunSettings<T> {
    pub fn new(t_end: T) -> Self {
        Self {
            t_end,
            output_times: Vec::new(),
            step: StepSettings::default(),
            steady_tol: T::lit(1e-8),
            flatness_rel_threshold: T::lit(1e-4),
            keep_snapshots: true,
        }
    }

    /// Sorted, deduplicated output times within `[start, t_end]`.
    pub fn schedule(&self, start: T) -> Vec<T> {
        let mut times: Vec<T> = self
            .output_times
            .iter()
            .copied()
            .filter(|t| *t > start && *t < self.t_end)
            .collect();
        times.push(self.t_end);
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite output times"));
        times.dedup();
        times.retain(|t| *t > start);
        let mut out = vec![start];
        out.extend(times);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub state: State<T>,
    pub psi: Vec<Vec<T>>,
}

#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub final_state: State<T>,
    pub snapshots: Vec<Snapshot<T>>,
    pub records: Vec<DiagnosticsRecord<T>>,
    pub steps: usize,
    pub injected_mass: T,
    pub floor_hits: usize,
    /// Output time at which the dissipation was below `steady_tol` for the
    /// second consecutive output.
    pub steady_at: Option<T>,
}

/// Advances `initial` to `t_end`, recording diagnostics at every output time.
pub fn run<T: Real>(
    initial: &State<T>,
    model: &ModelConfig<T>,
    tables: &ModelTables<T>,
    bc: &BoundaryCondition<T>,
    settings: &RunSettings<T>,
) -> Result<RunOutput<T>, SolverError> {
    settings.step.validate()?;
    bc.validate(&initial.grid, initial.species_count())?;
    if !(settings.t_end >= initial.time) {
        return Err(SolverError::Settings(
            "t_end precedes the initial time".into(),
        ));
    }
    if !initial.is_finite() {
        return Err(SolverError::NonFinite(initial.time.to_f64_lossy()));
    }
    let schedule = settings.schedule(initial.time);
    let mut state = initial.clone();
    let mut out = RunOutput {
        final_state: initial.clone(),
        snapshots: Vec::new(),
        records: Vec::new(),
        steps: 0,
        injected_mass: T::zero(),
        floor_hits: 0,
        steady_at: None,
    };
    let mut below_tol = 0usize;
    for (i, &target) in schedule.iter().enumerate() {
        if i > 0 {
            while state.time < target {
                let (next, report) = step_with_limit(
                    &state,
                    model,
                    tables,
                    bc,
                    &settings.step,
                    Some(target - state.time),
                )?;
                state = next;
                if report.clipped {
                    state.time = target;
                }
                out.steps += 1;
                out.injected_mass += report.injected_mass;
                out.floor_hits += report.floor_hits;
            }
        }
        let (rec, psi) = record(&state, model, tables, settings.flatness_rel_threshold)?;
        if rec.dissipation < settings.steady_tol {
            below_tol += 1;
            if below_tol >= 2 && out.steady_at.is_none() {
                out.steady_at = Some(rec.t);
            }
        } else {
            below_tol = 0;
        }
        out.records.push(rec);
        if settings.keep_snapshots {
            out.snapshots.push(Snapshot {
                state: state.clone(),
                psi,
            });
        }
    }
    out.final_state = state;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{total_mass, SpeciesField};
    use crate::kernels::KernelSpec;
    use crate::model::ExternalPotential;

    fn zero_model(m: usize) -> ModelConfig<f64> {
        ModelConfig {
            valences: (0..m).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect(),
            electrostatic: KernelSpec::Zero,
            steric: KernelSpec::Zero,
            external: ExternalPotential::default(),
            correlation: None,
        }
    }

    #[test]
    fn velocity_examples() {
        let g = Grid::one_d(4.0, 8).unwrap();
        assert!(face_velocities(&[2.5; 8], &g).x.iter().all(|u| *u == 0.0));
        let psi = g.axis_centers();
        let v = face_velocities(&psi, &g);
        assert_eq!(v.x.len(), 7);
        assert!(v.x.iter().all(|u| (*u + 1.0_f64).abs() < 1e-15));
    }

    #[test]
    fn velocities_match_difference_oracle() {
        let g = Grid::one_d(1.0, 8).unwrap();
        let psi: Vec<f64> = (0..8).map(|j| ((j * j) as f64 * 0.3).cos()).collect();
        let v = face_velocities(&psi, &g);
        for f in 0..7 {
            assert_eq!(v.x[f], -(psi[f + 1] - psi[f]) / 0.25);
        }
        let g2 = Grid::two_d(1.0, 4).unwrap();
        let psi2: Vec<f64> = (0..16).map(|i| (i as f64).sqrt()).collect();
        let v2 = face_velocities(&psi2, &g2);
        assert_eq!(v2.x.len(), 12);
        assert_eq!(v2.y.len(), 12);
        // x-face between (1,2) and (2,2)
        assert_eq!(v2.x[1 * 4 + 2], -(psi2[2 * 4 + 2] - psi2[1 * 4 + 2]) / 0.5);
        // y-face between (3,0) and (3,1)
        assert_eq!(v2.y[3 * 3], -(psi2[3 * 4 + 1] - psi2[3 * 4]) / 0.5);
    }

    #[test]
    fn split_examples() {
        assert_eq!(upwind_split(3.0), (3.0, 0.0));
        assert_eq!(upwind_split(-2.0), (0.0, 2.0));
        assert_eq!(upwind_split(0.0), (0.0, 0.0));
    }

    #[test]
    fn flux_examples() {
        let g = Grid::one_d(2.0, 4).unwrap();
        let s = State::new(g, vec![SpeciesField::new(1, vec![1.0; 4])]).unwrap();
        let zero = FaceVelocities {
            x: vec![0.0; 3],
            y: vec![],
        };
        let f = fluxes(&s, &[zero], &BoundaryCondition::NoFlux, 0.0);
        assert!(f[0].x.iter().all(|v| *v == 0.0));
        let ones = FaceVelocities {
            x: vec![1.0; 3],
            y: vec![],
        };
        let f = fluxes(&s, &[ones], &BoundaryCondition::NoFlux, 0.0);
        assert_eq!(f[0].x, vec![0.0, 1.0, 1.0, 1.0, 0.0]);
        let bc = BoundaryCondition::LeftInflux {
            species: 0,
            pulse: GaussianPulse::standard(),
        };
        let peak = bc.left_flux(0, 5.0);
        assert!((peak - 0.398_942_280_401_432_7_f64).abs() < 1e-15);
        assert_eq!(bc.left_flux(1, 5.0), 0.0);
    }

    #[test]
    fn cfl_examples() {
        let g = Grid::one_d(0.2, 4).unwrap();
        assert!((g.spacing() - 0.1_f64).abs() < 1e-16);
        let settings = StepSettings {
            safety: 1.0,
            dt_cap: 1e-2,
        };
        let v = FaceVelocities {
            x: vec![0.5, -2.0, 1.0],
            y: vec![],
        };
        let b = cfl_dt(&[v], &g, &settings);
        assert_eq!(b.u_max, 2.0);
        assert!((b.dt - 0.025_f64).abs() < 1e-15);
        let z = FaceVelocities {
            x: vec![0.0; 3],
            y: vec![],
        };
        assert_eq!(cfl_dt(&[z], &g, &settings).dt, 1e-2);
        let g2 = Grid::two_d(0.8, 4).unwrap();
        assert!((g2.spacing() - 0.4_f64).abs() < 1e-16);
        let v2 = FaceVelocities {
            x: vec![1.0; 12],
            y: vec![-2.0; 12],
        };
        let b2 = cfl_dt(&[v2], &g2, &settings);
        assert!((b2.dt - 0.05_f64).abs() < 1e-15);
        assert_eq!((b2.u_max, b2.v_max), (1.0, 2.0));
    }

    #[test]
    fn uniform_state_is_a_fixed_point() {
        let g = Grid::one_d(3.0, 16).unwrap();
        let s = State::new(
            g,
            vec![
                SpeciesField::new(1, vec![0.4; 16]),
                SpeciesField::new(-1, vec![0.7; 16]),
            ],
        )
        .unwrap();
        let m = zero_model(2);
        let t = ModelTables::build(&m, &g).unwrap();
        let (next, rep) = step_forward_euler(
            &s,
            &m,
            &t,
            &BoundaryCondition::NoFlux,
            &StepSettings::default(),
        )
        .unwrap();
        assert_eq!(rep.dt, 1e-2);
        assert_eq!(next.species, s.species);

        let out = run(
            &s,
            &m,
            &t,
            &BoundaryCondition::NoFlux,
            &RunSettings::new(1.0),
        )
        .unwrap();
        assert_eq!(out.final_state.species, s.species);
        assert_eq!(out.final_state.time, 1.0);
    }

    #[test]
    fn zero_length_run_returns_initial_state() {
        let g = Grid::one_d(3.0, 8).unwrap();
        let s = State::new(g, vec![SpeciesField::new(1, vec![1.0; 8])]).unwrap();
        let m = zero_model(1);
        let t = ModelTables::build(&m, &g).unwrap();
        let out = run(
            &s,
            &m,
            &t,
            &BoundaryCondition::NoFlux,
            &RunSettings::new(0.0),
        )
        .unwrap();
        assert_eq!(out.steps, 0);
        assert_eq!(out.snapshots.len(), 1);
        assert_eq!(out.final_state, s);
    }

    #[test]
    fn hand_computed_single_step() {
        // ψ = 1 + log c + x²/2 on four cells
        let g = Grid::one_d(2.0, 4).unwrap(); // Δx = 1, centers -1.5 -0.5 0.5 1.5
        let c = vec![0.5, 1.0, 2.0, 0.25];
        let s = State::new(g, vec![SpeciesField::new(1, c.clone())]).unwrap();
        let m = ModelConfig {
            external: ExternalPotential::confining(1.0),
            ..zero_model(1)
        };
        let t = ModelTables::build(&m, &g).unwrap();
        let settings = StepSettings {
            safety: 0.5,
            dt_cap: 1.0,
        };
        let (next, rep) =
            step_forward_euler(&s, &m, &t, &BoundaryCondition::NoFlux, &settings).unwrap();
        // independent oracle
        let x = [-1.5f64, -0.5, 0.5, 1.5];
        let psi: Vec<f64> = (0..4)
            .map(|j| 1.0 + c[j].ln() + 0.5 * x[j] * x[j])
            .collect();
        let u: Vec<f64> = (0..3).map(|f| -(psi[f + 1] - psi[f])).collect();
        let umax = u.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let dt = 0.5 / (2.0 * umax);
        let mut flux = vec![0.0; 5];
        for f in 0..3 {
            flux[f + 1] = u[f].max(0.0) * c[f] - (-u[f].min(0.0)) * c[f + 1];
        }
        assert!((rep.dt - dt).abs() < 1e-15);
        for j in 0..4 {
            let expect = c[j] - dt * (flux[j + 1] - flux[j]);
            assert!((next.species[0].values[j] - expect).abs() < 1e-14);
        }
        let m0 = total_mass(&c, &g);
        let m1 = total_mass(&next.species[0].values, &g);
        assert!((m1 - m0).abs() <= 1e-14 * m0);
    }

    #[test]
    fn unsafe_safety_factor_is_rejected() {
        let bad = StepSettings {
            safety: 1.5,
            dt_cap: 1e-2,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn influx_rejected_in_two_d() {
        let g = Grid::two_d(1.0, 4).unwrap();
        let bc = BoundaryCondition::LeftInflux {
            species: 0,
            pulse: GaussianPulse::standard(),
        };
        assert!(bc.validate(&g, 1).is_err());
        let g1 = Grid::one_d(1.0, 4).unwrap();
        assert!(bc.validate(&g1, 1).is_ok());
        assert!(bc.validate(&g1, 0).is_err());
    }

    #[test]
    fn schedule_includes_start_and_end() {
        let mut rs = RunSettings::new(2.0);
        rs.output_times = vec![1.5, 0.5, 0.5, 3.0, 0.0];
        assert_eq!(rs.schedule(0.0), vec![0.0, 0.5, 1.5, 2.0]);
        let rs = RunSettings::new(0.0);
        assert_eq!(rs.schedule(0.0), vec![0.0]);
    }

    #[test]
    fn f32_step_runs() {
        let g = Grid::<f32>::one_d(2.0, 8).unwrap();
        let c: Vec<f32> = (0..8).map(|j| 0.1 + j as f32 * 0.1).collect();
        let s = State::new(g, vec![SpeciesField::new(1, c)]).unwrap();
        let m = ModelConfig {
            valences: vec![1],
            electrostatic: KernelSpec::ExpDecay,
            steric: KernelSpec::regularized_power(1.0f32, 2.0, 0.5).unwrap(),
            external: ExternalPotential::confining(1.0),
            correlation: None,
        };
        let t = ModelTables::build(&m, &g).unwrap();
        let (next, _) = step_forward_euler(
            &s,
            &m,
            &t,
            &BoundaryCondition::NoFlux,
            &StepSettings::default(),
        )
        .unwrap();
        assert!(next.min_value() >= 0.0);
        let before = total_mass(&s.species[0].values, &g);
        let after = total_mass(&next.species[0].values, &g);
        assert!((before - after).abs() < 1e-5 * before);
    }
}

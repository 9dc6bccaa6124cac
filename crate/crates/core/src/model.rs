//! Charge and total densities, external potentials, and the discrete chemical
//! potential
//!
//! `ψ_m = 1 + log c_m + z_m Φ + W*θ + V_ext + z_m E x`
//!
//! where `Φ = K*ρ`, or the van der Waals smoothed `(1/l_c²) W_vdw*(K*ρ)` in
//! correlated mode.

use thiserror::Error;

use crate::grid::{Grid, State};
use crate::kernels::{convolve, double_convolve, KernelError, KernelSpec, KernelTable};
use crate::num::Real;

/// Floor applied inside the logarithm of the chemical potential.
pub const LOG_FLOOR: f64 = 1e-13;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("model needs at least one species")]
    NoSpecies,
    #[error("model has {model} species but the state has {state}")]
    SpeciesMismatch { model: usize, state: usize },
    #[error("species {species} has negative concentration {value} in cell {cell}")]
    NegativeConcentration {
        species: usize,
        cell: usize,
        value: f64,
    },
    #[error("external potential parameter `{0}` must be finite")]
    External(&'static str),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// `V_ext = offset + (q/2)|x|²`, plus the charged linear term `z_m E x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExternalPotential<T> {
    pub quadratic: T,
    pub field: T,
    pub offset: T,
}

impl<T: Real> Default for ExternalPotential<T> {
    fn default() -> Self {
        Self {
            quadratic: T::zero(),
            field: T::zero(),
            offset: T::zero(),
        }
    }
}

impl<T: Real> ExternalPotential<T> {
    pub fn confining(q: T) -> Self {
        Self {
            quadratic: q,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.quadratic.is_finite() {
            return Err(ModelError::External("q"));
        }
        if !self.field.is_finite() {
            return Err(ModelError::External("E"));
        }
        if !self.offset.is_finite() {
            return Err(ModelError::External("offset"));
        }
        Ok(())
    }

    /// Species-independent part at cell `idx`, without the constant offset.
    fn shape(&self, grid: &Grid<T>, idx: usize) -> T {
        self.quadratic * T::lit(0.5) * grid.radius_sq(idx)
    }

    /// Full potential energy density seen by a unit of species with `valence`.
    pub fn value(&self, grid: &Grid<T>, idx: usize, valence: i32) -> T {
        let (x, _) = grid.cell_point(idx);
        self.offset + self.shape(grid, idx) + T::from_i32_lossy(valence) * self.field * x
    }
}

/// Parameters of the correlated-potential variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation<T> {
    pub l_c: T,
    pub a: T,
}

impl<T: Real> Correlation<T> {
    pub fn smoothing_kernel(&self) -> Result<KernelSpec<T>, KernelError> {
        KernelSpec::van_der_waals(self.l_c, self.a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig<T> {
    pub valences: Vec<i32>,
    pub electrostatic: KernelSpec<T>,
    pub steric: KernelSpec<T>,
    pub external: ExternalPotential<T>,
    /// When set, the electrostatic term is the smoothed double convolution.
    pub correlation: Option<Correlation<T>>,
}

impl<T: Real> ModelConfig<T> {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.valences.is_empty() {
            return Err(ModelError::NoSpecies);
        }
        self.electrostatic.validate()?;
        self.steric.validate()?;
        self.external.validate()?;
        if let Some(c) = &self.correlation {
            c.smoothing_kernel()?;
        }
        Ok(())
    }

    pub fn max_abs_valence(&self) -> i32 {
        self.valences.iter().map(|z| z.abs()).max().unwrap_or(0)
    }

    fn check_state(&self, state: &State<T>) -> Result<(), ModelError> {
        if self.valences.len() != state.species_count() {
            return Err(ModelError::SpeciesMismatch {
                model: self.valences.len(),
                state: state.species_count(),
            });
        }
        Ok(())
    }
}

/// Kernel tables for one model on one grid.
#[derive(Debug, Clone)]
pub struct ModelTables<T: Real> {
    pub electrostatic: KernelTable<T>,
    pub steric: KernelTable<T>,
    pub smoothing: Option<KernelTable<T>>,
    l_c: Option<T>,
}

impl<T: Real> ModelTables<T> {
    pub fn build(model: &ModelConfig<T>, grid: &Grid<T>) -> Result<Self, ModelError> {
        model.validate()?;
        let smoothing = match &model.correlation {
            Some(c) => Some(KernelTable::build(&c.smoothing_kernel()?, grid)?),
            None => None,
        };
        Ok(Self {
            electrostatic: KernelTable::build(&model.electrostatic, grid)?,
            steric: KernelTable::build(&model.steric, grid)?,
            smoothing,
            l_c: model.correlation.map(|c| c.l_c),
        })
    }
}

/// `ρ_j = Σ_m z_m c_{m,j}`.
pub fn charge_density<T: Real>(state: &State<T>) -> Vec<T> {
    let mut rho = vec![T::zero(); state.grid.cell_count()];
    for s in &state.species {
        let z = T::from_i32_lossy(s.valence);
        for (r, &c) in rho.iter_mut().zip(&s.values) {
            *r += z * c;
        }
    }
    rho
}

/// `θ_j = Σ_m c_{m,j}`.
pub fn total_density<T: Real>(state: &State<T>) -> Vec<T> {
    let mut theta = vec![T::zero(); state.grid.cell_count()];
    for s in &state.species {
        for (t, &c) in theta.iter_mut().zip(&s.values) {
            *t += c;
        }
    }
    theta
}

/// Densities and the two nonlocal potentials they generate.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionFields<T> {
    pub rho: Vec<T>,
    pub theta: Vec<T>,
    /// Electric potential `Φ` (plain or correlated).
    pub electric: Vec<T>,
    /// Steric potential `W*θ`.
    pub steric: Vec<T>,
}

pub fn interaction_fields<T: Real>(
    state: &State<T>,
    tables: &ModelTables<T>,
) -> Result<InteractionFields<T>, ModelError> {
    let rho = charge_density(state);
    let theta = total_density(state);
    let electric = match (&tables.smoothing, tables.l_c) {
        (Some(smoothing), Some(l_c)) => {
            double_convolve(smoothing, &tables.electrostatic, &rho, l_c)?
        }
        _ => convolve(&tables.electrostatic, &rho)?,
    };
    let steric = convolve(&tables.steric, &theta)?;
    Ok(InteractionFields {
        rho,
        theta,
        electric,
        steric,
    })
}

/// Chemical potential split into a cell-varying part and a constant.
///
/// The constant (`1 + V_ext offset`) cancels in every difference quotient, so
/// face velocities are taken from `varying` alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ChemicalPotential<T> {
    pub varying: Vec<Vec<T>>,
    pub constant: T,
}

impl<T: Real> ChemicalPotential<T> {
    pub fn values(&self) -> Vec<Vec<T>> {
        self.varying
            .iter()
            .map(|psi| psi.iter().map(|&v| v + self.constant).collect())
            .collect()
    }
}

fn check_nonnegative<T: Real>(state: &State<T>) -> Result<(), ModelError> {
    for (m, s) in state.species.iter().enumerate() {
        if let Some((cell, &value)) = s
            .values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= T::zero()))
        {
            return Err(ModelError::NegativeConcentration {
                species: m,
                cell,
                value: value.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

/// Assembles the chemical potential from precomputed interaction fields.
pub fn potential_from_fields<T: Real>(
    state: &State<T>,
    model: &ModelConfig<T>,
    fields: &InteractionFields<T>,
) -> Result<ChemicalPotential<T>, ModelError> {
    model.check_state(state)?;
    check_nonnegative(state)?;
    let grid = &state.grid;
    let floor = T::lit(LOG_FLOOR);
    let ext = &model.external;
    let xs: Vec<T> = (0..grid.cell_count())
        .map(|i| grid.cell_point(i).0)
        .collect();
    let varying = state
        .species
        .iter()
        .map(|s| {
            let z = T::from_i32_lossy(s.valence);
            s.values
                .iter()
                .enumerate()
                .map(|(j, &c)| {
                    c.max(floor).ln()
                        + z * fields.electric[j]
                        + fields.steric[j]
                        + ext.shape(grid, j)
                        + z * ext.field * xs[j]
                })
                .collect()
        })
        .collect();
    Ok(ChemicalPotential {
        varying,
        constant: T::one() + ext.offset,
    })
}

pub fn potential_terms<T: Real>(
    state: &State<T>,
    model: &ModelConfig<T>,
    tables: &ModelTables<T>,
) -> Result<ChemicalPotential<T>, ModelError> {
    model.check_state(state)?;
    check_nonnegative(state)?;
    let fields = interaction_fields(state, tables)?;
    potential_from_fields(state, model, &fields)
}

/// Per-species discrete chemical potential `ψ_{m,j}`.
pub fn chemical_potential<T: Real>(
    state: &State<T>,
    model: &ModelConfig<T>,
    tables: &ModelTables<T>,
) -> Result<Vec<Vec<T>>, ModelError> {
    Ok(potential_terms(state, model, tables)?.values())
}

//! Structural observables of a state: discrete free energy and its parts,
//! dissipation, second moment with its growth constant, maximal density
//! function, and flatness of the chemical potential.

use thiserror::Error;

use crate::grid::{total_mass, Dim, Grid, State};
use crate::kernels::KernelSpec;
use crate::model::{
    interaction_fields, potential_from_fields, InteractionFields, ModelConfig, ModelError,
    ModelTables,
};
use crate::num::{sum_compensated, Real};
use crate::solver::{face_velocities, FaceFluxes, FaceVelocities};

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("the steric kernel is not a regularized power kernel; the second-moment constant is undefined")]
    OutsideKernelFamily,
    #[error("no cell of species {0} exceeds the flatness threshold")]
    EmptySupport(usize),
    #[error("radius must be positive")]
    Radius,
}

/// `E = F1 + F2 + F3 + F4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts<T> {
    pub total: T,
    /// Entropy `Σ h c log c`.
    pub entropy: T,
    /// Electrostatic `½ Σ h ρ Φ`.
    pub electrostatic: T,
    /// Steric `½ Σ h θ (W*θ)`.
    pub steric: T,
    /// External `Σ h V c`.
    pub external: T,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    sum_compensated(a.iter().zip(b).map(|(&x, &y)| x * y))
}

pub fn energy_from_fields<T: Real>(
    state: &State<T>,
    model: &ModelConfig<T>,
    fields: &InteractionFields<T>,
) -> EnergyParts<T> {
    let grid = &state.grid;
    let h = grid.cell_measure();
    let half = T::lit(0.5);
    let entropy = h * sum_compensated(state.species.iter().flat_map(|s| {
        s.values
            .iter()
            .map(|&c| if c > T::zero() { c * c.ln() } else { T::zero() })
    }));
    let electrostatic = half * h * dot(&fields.rho, &fields.electric);
    let steric = half * h * dot(&fields.theta, &fields.steric);
    let external = h * sum_compensated(state.species.iter().flat_map(|s| {
        s.values
            .iter()
            .enumerate()
            .map(|(j, &c)| model.external.value(grid, j, s.valence) * c)
    }));
    EnergyParts {
        total: entropy + electrostatic + steric + external,
        entropy,
        electrostatic,
        steric,
        external,
    }
}

/// Discrete free energy and its decomposition.
pub fn discrete_energy<T: Real>(
    state: &State<T>,
    model: &ModelConfig<T>,
    tables: &ModelTables<T>,
) -> Result<EnergyParts<T>, ModelError> {
    let fields = interaction_fields(state, tables)?;
    Ok(energy_from_fields(state, model, &fields))
}

/// `D = Σ_m Σ_j h u²_{j+1/2} min(c_j, c_{j+1})`; in 2D the weight is
/// `(u² + v²) min(c_jk, c_{j+1,k}, c_{j,k+1})` with absent neighbours skipped.
pub fn discrete_dissipation<T: Real>(state: &State<T>, velocities: &[FaceVelocities<T>]) -> T {
    let grid = &state.grid;
    let h = grid.cell_measure();
    let n = grid.n();
    let mut total = T::zero();
    for (s, v) in state.species.iter().zip(velocities) {
        let c = &s.values;
        let part = match grid.dim() {
            Dim::One => sum_compensated(
                v.x.iter()
                    .enumerate()
                    .map(|(f, &u)| u * u * c[f].min(c[f + 1])),
            ),
            Dim::Two => {
                let mut acc = Vec::with_capacity(n * n);
                for j in 0..n {
                    for k in 0..n {
                        let idx = j * n + k;
                        let mut low = c[idx];
                        let mut speed2 = T::zero();
                        if j + 1 < n {
                            let u = v.x[j * n + k];
                            speed2 += u * u;
                            low = low.min(c[idx + n]);
                        }
                        if k + 1 < n {
                            let w = v.y[j * (n - 1) + k];
                            speed2 += w * w;
                            low = low.min(c[idx + 1]);
                        }
                        acc.push(speed2 * low);
                    }
                }
                sum_compensated(acc)
            }
        };
        total += part;
    }
    h * total
}

/// `-dE/dt = Σ_m Σ_j ψ_j (F_{j+1/2} - F_{j-1/2})` (2D: each direction weighted
/// by the transverse spacing).
pub fn energy_rate<T: Real>(psi: &[Vec<T>], fluxes: &[FaceFluxes<T>], grid: &Grid<T>) -> T {
    let n = grid.n();
    let h = grid.spacing();
    let mut terms = Vec::new();
    for (p, f) in psi.iter().zip(fluxes) {
        match grid.dim() {
            Dim::One => {
                for j in 0..n {
                    terms.push(p[j] * (f.x[j + 1] - f.x[j]));
                }
            }
            Dim::Two => {
                for j in 0..n {
                    for k in 0..n {
                        let dx = f.x[(j + 1) * n + k] - f.x[j * n + k];
                        let dy = f.y[j * (n + 1) + k + 1] - f.y[j * (n + 1) + k];
                        terms.push(p[j * n + k] * h * (dx + dy));
                    }
                }
            }
        }
    }
    sum_compensated(terms)
}

/// `σ₂ = Σ_m h Σ_j |x_j|² c_{m,j}`.
pub fn second_moment<T: Real>(state: &State<T>) -> T {
    let grid = &state.grid;
    grid.cell_measure()
        * sum_compensated(state.species.iter().flat_map(|s| {
            s.values
                .iter()
                .enumerate()
                .map(|(j, &c)| grid.radius_sq(j) * c)
        }))
}

/// Growth rate bound for `σ₂`. `dim = 2` uses `4m + (kη + 1) z² m²`;
/// `dim ≥ 3` uses `2d m + (kη a^{-k} + (d-2) a^{2-d} z²) m²`, where `m` is the
/// total mass and `z` the largest absolute valence.
pub fn second_moment_bound_constant<T: Real>(
    model: &ModelConfig<T>,
    masses: &[T],
    dim: usize,
) -> Result<T, DiagnosticsError> {
    let (eta, k, steric_a) = match model.steric {
        KernelSpec::RegularizedPower { eta, k, a } => (eta, k, Some(a)),
        KernelSpec::Zero => (T::zero(), T::zero(), None),
        _ => return Err(DiagnosticsError::OutsideKernelFamily),
    };
    let m0: T = masses.iter().copied().sum();
    let z = T::from_i32_lossy(model.max_abs_valence());
    let z2 = z * z;
    if dim <= 2 {
        return Ok(T::lit(4.0) * m0 + (k * eta + T::one()) * z2 * m0 * m0);
    }
    let newton_a = match model.electrostatic {
        KernelSpec::RegularizedNewtonian { a, .. } => Some(a),
        _ => None,
    };
    let d = T::from_usize_lossy(dim);
    let two = T::lit(2.0);
    let steric_term = match steric_a {
        Some(a) => k * eta * a.powf(-k),
        None => T::zero(),
    };
    let a = newton_a
        .or(steric_a)
        .ok_or(DiagnosticsError::OutsideKernelFamily)?;
    let electric_term = (d - two) * a.powf(two - d) * z2;
    Ok(two * d * m0 + (steric_term + electric_term) * m0 * m0)
}

/// `M_r = max_j h Σ_{|x_i - x_j| ≤ r} c_i` per species.
pub fn maximal_density<T: Real>(state: &State<T>, r: T) -> Result<Vec<T>, DiagnosticsError> {
    if !(r > T::zero()) {
        return Err(DiagnosticsError::Radius);
    }
    let grid = &state.grid;
    let n = grid.n() as isize;
    let h = grid.spacing();
    let measure = grid.cell_measure();
    // the grid is finite, so offsets beyond n-1 never matter
    let reach = |o: isize| T::from_i32_lossy(o as i32) * h;
    Ok(state
        .species
        .iter()
        .map(|s| {
            let c = &s.values;
            match grid.dim() {
                Dim::One => {
                    let mut w = 0isize;
                    while w + 1 < n && reach(w + 1) <= r {
                        w += 1;
                    }
                    let mut prefix = vec![T::zero(); c.len() + 1];
                    for (i, &v) in c.iter().enumerate() {
                        prefix[i + 1] = prefix[i] + v;
                    }
                    (0..n)
                        .map(|j| {
                            let lo = (j - w).max(0) as usize;
                            let hi = (j + w).min(n - 1) as usize;
                            measure * (prefix[hi + 1] - prefix[lo])
                        })
                        .fold(T::zero(), T::max)
                }
                Dim::Two => {
                    let mut disc = Vec::new();
                    for ox in -(n - 1)..n {
                        for oy in -(n - 1)..n {
                            let (dx, dy) = (reach(ox), reach(oy));
                            if dx * dx + dy * dy <= r * r {
                                disc.push((ox, oy));
                            }
                        }
                    }
                    let mut best = T::zero();
                    for j in 0..n {
                        for k in 0..n {
                            let mut acc = T::zero();
                            for &(ox, oy) in &disc {
                                let (i, l) = (j + ox, k + oy);
                                if (0..n).contains(&i) && (0..n).contains(&l) {
                                    acc += c[(i * n + l) as usize];
                                }
                            }
                            best = best.max(measure * acc);
                        }
                    }
                    best
                }
            }
        })
        .collect())
}

/// Radius dependence `((2r)² + a²)^{k/4}` of the maximal density estimate;
/// the prefactor depends on the initial data and is not known explicitly.
pub fn maximal_density_bound_shape<T: Real>(r: T, a: T, k: T) -> T {
    let two_r = r + r;
    (two_r * two_r + a * a).powf(k / T::lit(4.0))
}

fn species_flatness<T: Real>(c: &[T], psi: &[T], threshold: T) -> Option<T> {
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for (&ci, &p) in c.iter().zip(psi) {
        if ci > threshold {
            lo = lo.min(p);
            hi = hi.max(p);
        }
    }
    (hi >= lo).then(|| hi - lo)
}

/// `max ψ - min ψ` over cells with concentration above `threshold`.
pub fn potential_flatness<T: Real>(
    state: &State<T>,
    psi: &[Vec<T>],
    threshold: T,
) -> Result<Vec<T>, DiagnosticsError> {
    state
        .species
        .iter()
        .zip(psi)
        .enumerate()
        .map(|(m, (s, p))| {
            species_flatness(&s.values, p, threshold).ok_or(DiagnosticsError::EmptySupport(m))
        })
        .collect()
}

/// Observables recorded at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord<T> {
    pub t: T,
    pub masses: Vec<T>,
    pub energy: EnergyParts<T>,
    pub dissipation: T,
    pub second_moment: T,
    /// Flatness with threshold `rel · peak` per species; `None` for an empty species.
    pub flatness: Vec<Option<T>>,
}

/// Computes a full record together with the chemical potential it used.
pub fn record<T: Real>(
    state: &State<T>,
    model: &ModelConfig<T>,
    tables: &ModelTables<T>,
    rel_threshold: T,
) -> Result<(DiagnosticsRecord<T>, Vec<Vec<T>>), ModelError> {
    let fields = interaction_fields(state, tables)?;
    let potential = potential_from_fields(state, model, &fields)?;
    let grid = &state.grid;
    let velocities: Vec<_> = potential
        .varying
        .iter()
        .map(|p| face_velocities(p, grid))
        .collect();
    let psi = potential.values();
    let flatness = state
        .species
        .iter()
        .zip(&psi)
        .map(|(s, p)| {
            let peak = s.max();
            if peak > T::zero() {
                species_flatness(&s.values, p, rel_threshold * peak)
            } else {
                None
            }
        })
        .collect();
    let rec = DiagnosticsRecord {
        t: state.time,
        masses: state
            .species
            .iter()
            .map(|s| total_mass(&s.values, grid))
            .collect(),
        energy: energy_from_fields(state, model, &fields),
        dissipation: discrete_dissipation(state, &velocities),
        second_moment: second_moment(state),
        flatness,
    };
    Ok((rec, psi))
}

//! Brute-force reference implementations and random generators shared by the
//! integration tests. Nothing here goes through the crate's kernel tables or
//! FFT paths.

#![allow(dead_code)]

use std::f64::consts::PI;

use ionfv::{
    Correlation, Dim, ExternalPotential, Grid, KernelSpec, ModelConfig, SpeciesField, State,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn kernel_formula(spec: &KernelSpec<f64>, r: f64) -> f64 {
    match *spec {
        KernelSpec::RegularizedNewtonian { d: 2, a } => -0.5 * (r * r + a * a).ln(),
        KernelSpec::RegularizedNewtonian { d, a } => {
            1.0 / (r * r + a * a).sqrt().powi(d as i32 - 2)
        }
        KernelSpec::RegularizedPower { eta, k, a } => eta / (r * r + a * a).sqrt().powf(k),
        KernelSpec::Log2dCoulomb { a } => -(r * r + a * a).sqrt().ln() / (2.0 * PI),
        KernelSpec::ExpDecay => (-r).exp(),
        KernelSpec::VanDerWaals { l_c, a } => l_c * (-r / l_c).exp() / (r * r + a * a).sqrt(),
        KernelSpec::Zero => 0.0,
    }
}

/// Cell centers as `(x, y)` pairs, x-major.
pub fn points(grid: &Grid<f64>) -> Vec<(f64, f64)> {
    let n = grid.n();
    let l = grid.half_width();
    let dx = 2.0 * l / n as f64;
    let c = |j: usize| -l + (j as f64 + 0.5) * dx;
    match grid.dim() {
        Dim::One => (0..n).map(|j| (c(j), 0.0)).collect(),
        Dim::Two => (0..n * n).map(|i| (c(i / n), c(i % n))).collect(),
    }
}

pub fn measure(grid: &Grid<f64>) -> f64 {
    let dx = 2.0 * grid.half_width() / grid.n() as f64;
    match grid.dim() {
        Dim::One => dx,
        Dim::Two => dx * dx,
    }
}

pub fn brute_convolve(spec: &KernelSpec<f64>, grid: &Grid<f64>, density: &[f64]) -> Vec<f64> {
    let pts = points(grid);
    let h = measure(grid);
    pts.iter()
        .map(|&(x, y)| {
            pts.iter()
                .zip(density)
                .map(|(&(u, v), &rho)| {
                    h * kernel_formula(spec, ((x - u).powi(2) + (y - v).powi(2)).sqrt()) * rho
                })
                .sum()
        })
        .collect()
}

fn electric_field(model: &ModelConfig<f64>, grid: &Grid<f64>, rho: &[f64]) -> Vec<f64> {
    match &model.correlation {
        None => brute_convolve(&model.electrostatic, grid, rho),
        Some(c) => {
            let inner = brute_convolve(&model.electrostatic, grid, rho);
            let w = KernelSpec::VanDerWaals { l_c: c.l_c, a: c.a };
            brute_convolve(&w, grid, &inner)
                .into_iter()
                .map(|v| v / (c.l_c * c.l_c))
                .collect()
        }
    }
}

pub fn brute_energy(state: &State<f64>, model: &ModelConfig<f64>) -> f64 {
    let grid = &state.grid;
    let pts = points(grid);
    let h = measure(grid);
    let cells = pts.len();
    let rho: Vec<f64> = (0..cells)
        .map(|i| {
            state
                .species
                .iter()
                .map(|s| s.valence as f64 * s.values[i])
                .sum()
        })
        .collect();
    let theta: Vec<f64> = (0..cells)
        .map(|i| state.species.iter().map(|s| s.values[i]).sum())
        .collect();
    let phi = electric_field(model, grid, &rho);
    let steric = brute_convolve(&model.steric, grid, &theta);
    let ext = &model.external;
    let mut e = 0.0;
    for s in &state.species {
        for (i, &c) in s.values.iter().enumerate() {
            let (x, y) = pts[i];
            if c > 0.0 {
                e += h * c * c.ln();
            }
            let v = ext.offset
                + 0.5 * ext.quadratic * (x * x + y * y)
                + s.valence as f64 * ext.field * x;
            e += h * v * c;
        }
    }
    for i in 0..cells {
        e += 0.5 * h * (rho[i] * phi[i] + theta[i] * steric[i]);
    }
    e
}

/// Chemical potential straight from its definition.
pub fn brute_psi(state: &State<f64>, model: &ModelConfig<f64>) -> Vec<Vec<f64>> {
    let grid = &state.grid;
    let pts = points(grid);
    let cells = pts.len();
    let rho: Vec<f64> = (0..cells)
        .map(|i| {
            state
                .species
                .iter()
                .map(|s| s.valence as f64 * s.values[i])
                .sum()
        })
        .collect();
    let theta: Vec<f64> = (0..cells)
        .map(|i| state.species.iter().map(|s| s.values[i]).sum())
        .collect();
    let phi = electric_field(model, grid, &rho);
    let steric = brute_convolve(&model.steric, grid, &theta);
    let ext = &model.external;
    state
        .species
        .iter()
        .map(|s| {
            let z = s.valence as f64;
            (0..cells)
                .map(|i| {
                    let (x, y) = pts[i];
                    1.0 + s.values[i].max(1e-13).ln()
                        + z * phi[i]
                        + steric[i]
                        + ext.offset
                        + 0.5 * ext.quadratic * (x * x + y * y)
                        + z * ext.field * x
                })
                .collect()
        })
        .collect()
}

/// Dissipation from `ψ` with plain loops over faces.
pub fn brute_dissipation(state: &State<f64>, psi: &[Vec<f64>]) -> f64 {
    let grid = &state.grid;
    let n = grid.n();
    let dx = 2.0 * grid.half_width() / n as f64;
    let h = measure(grid);
    let mut d = 0.0;
    for (s, p) in state.species.iter().zip(psi) {
        let c = &s.values;
        match grid.dim() {
            Dim::One => {
                for j in 0..n - 1 {
                    let u = -(p[j + 1] - p[j]) / dx;
                    d += h * u * u * c[j].min(c[j + 1]);
                }
            }
            Dim::Two => {
                for j in 0..n {
                    for k in 0..n {
                        let at = |a: usize, b: usize| a * n + b;
                        let mut low = c[at(j, k)];
                        let mut s2 = 0.0;
                        if j + 1 < n {
                            let u = -(p[at(j + 1, k)] - p[at(j, k)]) / dx;
                            s2 += u * u;
                            low = low.min(c[at(j + 1, k)]);
                        }
                        if k + 1 < n {
                            let v = -(p[at(j, k + 1)] - p[at(j, k)]) / dx;
                            s2 += v * v;
                            low = low.min(c[at(j, k + 1)]);
                        }
                        d += h * s2 * low;
                    }
                }
            }
        }
    }
    d
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn random_kernel(rng: &mut ChaCha8Rng, dim: Dim) -> KernelSpec<f64> {
    let a = rng.gen_range(0.05..1.0);
    match rng.gen_range(0..6) {
        0 => KernelSpec::ExpDecay,
        1 => KernelSpec::RegularizedPower {
            eta: rng.gen_range(0.0..2.0),
            k: rng.gen_range(0.5..4.0),
            a,
        },
        2 => KernelSpec::RegularizedNewtonian {
            d: if dim == Dim::Two {
                2
            } else {
                rng.gen_range(2..5)
            },
            a,
        },
        3 => KernelSpec::Log2dCoulomb { a },
        4 => KernelSpec::VanDerWaals {
            l_c: rng.gen_range(0.1..3.0),
            a,
        },
        _ => KernelSpec::Zero,
    }
}

pub fn random_steric(rng: &mut ChaCha8Rng) -> KernelSpec<f64> {
    KernelSpec::RegularizedPower {
        eta: rng.gen_range(0.0..2.0),
        k: rng.gen_range(0.5..4.0),
        a: rng.gen_range(0.05..1.0),
    }
}

pub fn random_model(
    rng: &mut ChaCha8Rng,
    dim: Dim,
    species: usize,
    correlated: bool,
) -> ModelConfig<f64> {
    let valences = (0..species)
        .map(|_| *[-2, -1, 1, 2].get(rng.gen_range(0..4)).unwrap())
        .collect();
    ModelConfig {
        valences,
        electrostatic: random_kernel(rng, dim),
        steric: random_steric(rng),
        external: ExternalPotential {
            quadratic: rng.gen_range(0.0..2.0),
            field: rng.gen_range(-3.0..3.0),
            offset: rng.gen_range(-1.0..1.0),
        },
        correlation: correlated.then(|| Correlation {
            l_c: rng.gen_range(0.1..3.0),
            a: rng.gen_range(0.05..0.5),
        }),
    }
}

/// Nonnegative state; with `sparse` about a third of the cells are exactly 0.
pub fn random_state(
    rng: &mut ChaCha8Rng,
    grid: Grid<f64>,
    valences: &[i32],
    floor: f64,
    sparse: bool,
) -> State<f64> {
    let species = valences
        .iter()
        .map(|&z| {
            let values = (0..grid.cell_count())
                .map(|_| {
                    if sparse && rng.gen_bool(0.33) {
                        0.0
                    } else {
                        floor + rng.gen_range(0.0..2.0)
                    }
                })
                .collect();
            SpeciesField::new(z, values)
        })
        .collect();
    State::new(grid, species).unwrap()
}

pub fn random_grid(rng: &mut ChaCha8Rng, dim: Dim, max_n: usize) -> Grid<f64> {
    let half_width = rng.gen_range(1.0..8.0);
    let n = 2 * rng.gen_range(1..=max_n / 2);
    Grid::new(dim, half_width, n).unwrap()
}

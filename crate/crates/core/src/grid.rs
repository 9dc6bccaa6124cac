//! Uniform cell-centred grids on the symmetric box `[-L, L]^d`, cell-average
//! fields on them, restriction between nested grids, and discrete error norms.
//!
//! 2D fields are stored row-major with the x index outermost: the cell with
//! x index `j` and y index `k` lives at `j * n + k`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{sum_compensated, Real};

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("dimension must be 1 or 2, got {0}")]
    Dimension(usize),
    #[error("cells per axis must be a positive even integer, got {0}")]
    CellCount(usize),
    #[error("half width must be positive and finite")]
    HalfWidth,
    #[error("field has {got} values but the grid has {expected} cells")]
    Length { expected: usize, got: usize },
    #[error("grids are not nested: fine N = {fine}, coarse N = {coarse}")]
    NotNested { fine: usize, coarse: usize },
}

/// Spatial dimension of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dim {
    One,
    Two,
}

impl Dim {
    pub fn from_usize(d: usize) -> Result<Self, GridError> {
        match d {
            1 => Ok(Dim::One),
            2 => Ok(Dim::Two),
            other => Err(GridError::Dimension(other)),
        }
    }

    pub fn as_usize(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }
}

/// Uniform grid with `n` cells per axis covering `[-L, L]` per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    dim: Dim,
    half_width: T,
    n: usize,
    spacing: T,
}

impl<T: Real> Grid<T> {
    pub fn new(dim: Dim, half_width: T, n: usize) -> Result<Self, GridError> {
        if n == 0 || !n.is_multiple_of(2) {
            return Err(GridError::CellCount(n));
        }
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(GridError::HalfWidth);
        }
        let spacing = (half_width + half_width) / T::from_usize_lossy(n);
        Ok(Self {
            dim,
            half_width,
            n,
            spacing,
        })
    }

    pub fn one_d(half_width: T, n: usize) -> Result<Self, GridError> {
        Self::new(Dim::One, half_width, n)
    }

    pub fn two_d(half_width: T, n: usize) -> Result<Self, GridError> {
        Self::new(Dim::Two, half_width, n)
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    /// Cells per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Δx (equal to Δy in 2D).
    pub fn spacing(&self) -> T {
        self.spacing
    }

    /// Total number of cells.
    pub fn cell_count(&self) -> usize {
        match self.dim {
            Dim::One => self.n,
            Dim::Two => self.n * self.n,
        }
    }

    /// Measure of one cell: Δx in 1D, Δx·Δy in 2D.
    pub fn cell_measure(&self) -> T {
        match self.dim {
            Dim::One => self.spacing,
            Dim::Two => self.spacing * self.spacing,
        }
    }

    /// Center of cell `j` along one axis: `-L + (j + 1/2)Δx`.
    pub fn center(&self, j: usize) -> T {
        -self.half_width + (T::from_usize_lossy(j) + T::lit(0.5)) * self.spacing
    }

    /// Cell centers along one axis.
    pub fn axis_centers(&self) -> Vec<T> {
        (0..self.n).map(|j| self.center(j)).collect()
    }

    /// Coordinates of the center of flat cell index `idx` (y is zero in 1D).
    pub fn cell_point(&self, idx: usize) -> (T, T) {
        match self.dim {
            Dim::One => (self.center(idx), T::zero()),
            Dim::Two => (self.center(idx / self.n), self.center(idx % self.n)),
        }
    }

    /// Squared distance of cell `idx` from the origin.
    pub fn radius_sq(&self, idx: usize) -> T {
        let (x, y) = self.cell_point(idx);
        x * x + y * y
    }

    pub fn check_len(&self, len: usize) -> Result<(), GridError> {
        if len == self.cell_count() {
            Ok(())
        } else {
            Err(GridError::Length {
                expected: self.cell_count(),
                got: len,
            })
        }
    }
}

/// One ionic species: valence plus cell averages.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesField<T> {
    pub valence: i32,
    pub values: Vec<T>,
}

impl<T: Real> SpeciesField<T> {
    pub fn new(valence: i32, values: Vec<T>) -> Self {
        Self { valence, values }
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Flat index of the largest value (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

/// All species at one time level; every field lives on `grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct State<T> {
    pub grid: Grid<T>,
    pub species: Vec<SpeciesField<T>>,
    pub time: T,
}

impl<T: Real> State<T> {
    pub fn new(grid: Grid<T>, species: Vec<SpeciesField<T>>) -> Result<Self, GridError> {
        for s in &species {
            grid.check_len(s.values.len())?;
        }
        Ok(Self {
            grid,
            species,
            time: T::zero(),
        })
    }

    pub fn species_count(&self) -> usize {
        self.species.len()
    }

    pub fn masses(&self) -> Vec<T> {
        self.species
            .iter()
            .map(|s| total_mass(&s.values, &self.grid))
            .collect()
    }

    pub fn min_value(&self) -> T {
        self.species
            .iter()
            .map(SpeciesField::min)
            .fold(T::infinity(), T::min)
    }

    pub fn is_finite(&self) -> bool {
        self.species
            .iter()
            .all(|s| s.values.iter().all(|v| v.is_finite()))
    }
}

/// `Δx Σ_j c_j` (2D: `Δx Δy Σ c_jk`).
pub fn total_mass<T: Real>(values: &[T], grid: &Grid<T>) -> T {
    grid.cell_measure() * sum_compensated(values.iter().copied())
}

/// Averages a fine field onto a nested coarse grid.
pub fn restrict<T: Real>(
    fine: &[T],
    fine_grid: &Grid<T>,
    coarse_grid: &Grid<T>,
) -> Result<Vec<T>, GridError> {
    fine_grid.check_len(fine.len())?;
    let not_nested = GridError::NotNested {
        fine: fine_grid.n(),
        coarse: coarse_grid.n(),
    };
    if fine_grid.dim() != coarse_grid.dim()
        || fine_grid.half_width() != coarse_grid.half_width()
        || !fine_grid.n().is_multiple_of(coarse_grid.n())
        || !(fine_grid.n() / coarse_grid.n()).is_power_of_two()
    {
        return Err(not_nested);
    }
    let ratio = fine_grid.n() / coarse_grid.n();
    Ok(match fine_grid.dim() {
        Dim::One => average_blocks(fine, ratio),
        Dim::Two => average_blocks_2d(fine, fine_grid.n(), ratio),
    })
}

/// Means of consecutive blocks of `ratio` values.
pub fn average_blocks<T: Real>(fine: &[T], ratio: usize) -> Vec<T> {
    let inv = T::one() / T::from_usize_lossy(ratio);
    fine.chunks(ratio)
        .map(|block| block.iter().copied().sum::<T>() * inv)
        .collect()
}

fn average_blocks_2d<T: Real>(fine: &[T], n_fine: usize, ratio: usize) -> Vec<T> {
    let n_coarse = n_fine / ratio;
    let inv = T::one() / T::from_usize_lossy(ratio * ratio);
    let mut out = vec![T::zero(); n_coarse * n_coarse];
    for (jc, row) in out.chunks_mut(n_coarse).enumerate() {
        for (kc, cell) in row.iter_mut().enumerate() {
            let mut acc = T::zero();
            for j in jc * ratio..(jc + 1) * ratio {
                for k in kc * ratio..(kc + 1) * ratio {
                    acc += fine[j * n_fine + k];
                }
            }
            *cell = acc * inv;
        }
    }
    out
}

/// Discrete error norms between two fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms<T> {
    pub l_inf: T,
    pub l1: T,
    pub l2: T,
}

/// `l∞ = max |a-b|`, `l_p = (Δx Σ |a-b|^p)^{1/p}`.
pub fn error_norms<T: Real>(a: &[T], b: &[T], grid: &Grid<T>) -> ErrorNorms<T> {
    error_norms_multi(&[(a, b)], grid)
}

/// Norms with the species sum taken inside each norm.
pub fn error_norms_multi<T: Real>(pairs: &[(&[T], &[T])], grid: &Grid<T>) -> ErrorNorms<T> {
    let mut l_inf = T::zero();
    let mut s1 = T::zero();
    let mut s2 = T::zero();
    for (a, b) in pairs {
        for (&x, &y) in a.iter().zip(b.iter()) {
            let d = (x - y).abs();
            l_inf = l_inf.max(d);
            s1 += d;
            s2 += d * d;
        }
    }
    let h = grid.cell_measure();
    ErrorNorms {
        l_inf,
        l1: h * s1,
        l2: (h * s2).sqrt(),
    }
}

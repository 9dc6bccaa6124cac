//! Radial interaction kernels, their offset-indexed tables on a grid, and the
//! discrete convolutions that enter the chemical potential.
//!
//! A convolution here is always the full linear sum over the box
//! `out_j = h Σ_i K(x_j - x_i) ρ_i` with `h` the cell measure. Large grids go
//! through a zero-padded FFT that reproduces the direct sum; small grids use
//! the direct sum itself.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Dim, Grid};
use crate::num::Real;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("kernel parameter `{name}` must be {requirement}, got {value}")]
    Parameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("density has {got} values but the kernel table grid has {expected} cells")]
    Length { expected: usize, got: usize },
}

/// Analytic kernel definitions. Every kernel depends on `|x|` only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec<T> {
    /// `-½ log(|x|² + a²)` for `d = 2`, `(|x|² + a²)^{-(d-2)/2}` for `d > 2`.
    RegularizedNewtonian {
        d: u32,
        a: T,
    },
    /// `η (|x|² + a²)^{-k/2}`.
    RegularizedPower {
        eta: T,
        k: T,
        a: T,
    },
    /// `-(1/2π) log √(|x|² + a²)`.
    Log2dCoulomb {
        a: T,
    },
    /// `exp(-|x|)`.
    ExpDecay,
    /// `exp(-|x|/l_c) / (√(|x|² + a²)/l_c)`.
    VanDerWaals {
        l_c: T,
        a: T,
    },
    Zero,
}

fn positive<T: Real>(name: &'static str, v: T) -> Result<(), KernelError> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(KernelError::Parameter {
            name,
            requirement: "positive and finite",
            value: v.to_f64_lossy(),
        })
    }
}

impl<T: Real> KernelSpec<T> {
    pub fn regularized_newtonian(d: u32, a: T) -> Result<Self, KernelError> {
        let spec = Self::RegularizedNewtonian { d, a };
        spec.validate()?;
        Ok(spec)
    }

    pub fn regularized_power(eta: T, k: T, a: T) -> Result<Self, KernelError> {
        let spec = Self::RegularizedPower { eta, k, a };
        spec.validate()?;
        Ok(spec)
    }

    pub fn log_2d_coulomb(a: T) -> Result<Self, KernelError> {
        let spec = Self::Log2dCoulomb { a };
        spec.validate()?;
        Ok(spec)
    }

    pub fn van_der_waals(l_c: T, a: T) -> Result<Self, KernelError> {
        let spec = Self::VanDerWaals { l_c, a };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        match *self {
            Self::RegularizedNewtonian { d, a } => {
                if d < 2 {
                    return Err(KernelError::Parameter {
                        name: "d",
                        requirement: "at least 2",
                        value: d as f64,
                    });
                }
                positive("a", a)
            }
            Self::RegularizedPower { eta, k, a } => {
                if !(eta >= T::zero()) || !eta.is_finite() {
                    return Err(KernelError::Parameter {
                        name: "eta",
                        requirement: "non-negative and finite",
                        value: eta.to_f64_lossy(),
                    });
                }
                positive("k", k)?;
                positive("a", a)
            }
            Self::Log2dCoulomb { a } => positive("a", a),
            Self::VanDerWaals { l_c, a } => {
                positive("l_c", l_c)?;
                positive("a", a)
            }
            Self::ExpDecay | Self::Zero => Ok(()),
        }
    }

    /// True when the kernel vanishes identically.
    pub fn is_zero(&self) -> bool {
        match *self {
            Self::Zero => true,
            Self::RegularizedPower { eta, .. } => eta == T::zero(),
            _ => false,
        }
    }

    /// Kernel value at distance `r = |x|`.
    pub fn eval(&self, r: T) -> T {
        let r = r.abs();
        let r2 = r * r;
        match *self {
            Self::RegularizedNewtonian { d, a } => {
                if d == 2 {
                    -T::lit(0.5) * (r2 + a * a).ln()
                } else {
                    let p = T::lit(-0.5 * (d as f64 - 2.0));
                    (r2 + a * a).powf(p)
                }
            }
            Self::RegularizedPower { eta, k, a } => {
                if eta == T::zero() {
                    T::zero()
                } else {
                    eta * (r2 + a * a).powf(-k * T::lit(0.5))
                }
            }
            Self::Log2dCoulomb { a } => {
                -(T::one() / (T::lit(2.0) * T::PI())) * (r2 + a * a).sqrt().ln()
            }
            Self::ExpDecay => (-r).exp(),
            Self::VanDerWaals { l_c, a } => (-r / l_c).exp() / ((r2 + a * a).sqrt() / l_c),
            Self::Zero => T::zero(),
        }
    }

    /// Kernel value at a 2D displacement.
    pub fn eval_2d(&self, dx: T, dy: T) -> T {
        self.eval((dx * dx + dy * dy).sqrt())
    }
}

/// How [`convolve`] evaluates the sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolutionMethod {
    Direct,
    Fft,
    /// FFT above a size threshold, direct below it.
    Auto,
}

/// Largest cells-per-axis for which `Auto` keeps the direct sum.
const AUTO_DIRECT_MAX_1D: usize = 64;
const AUTO_DIRECT_MAX_2D: usize = 16;

/// `K(x_j - x_i)` for every signed cell offset, plus an optional FFT plan.
#[derive(Clone)]
pub struct KernelTable<T: Real> {
    spec: KernelSpec<T>,
    grid: Grid<T>,
    values: Vec<T>,
    zero: bool,
    fft: Option<FftConvolver<T>>,
}

impl<T: Real> fmt::Debug for KernelTable<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelTable")
            .field("spec", &self.spec)
            .field("n", &self.grid.n())
            .field("dim", &self.grid.dim())
            .field("fft", &self.fft.is_some())
            .finish()
    }
}

impl<T: Real> KernelTable<T> {
    pub fn build(spec: &KernelSpec<T>, grid: &Grid<T>) -> Result<Self, KernelError> {
        Self::build_with(spec, grid, ConvolutionMethod::Auto)
    }

    pub fn build_with(
        spec: &KernelSpec<T>,
        grid: &Grid<T>,
        method: ConvolutionMethod,
    ) -> Result<Self, KernelError> {
        spec.validate()?;
        let n = grid.n();
        let width = 2 * n - 1;
        let h = grid.spacing();
        // signed offset first so that table[o] and table[-o] are bitwise equal
        let offset = |o: usize| T::from_i32_lossy(o as i32 - (n as i32 - 1)) * h;
        let values: Vec<T> = match grid.dim() {
            Dim::One => (0..width).map(|o| spec.eval(offset(o))).collect(),
            Dim::Two => {
                let mut v = Vec::with_capacity(width * width);
                for ox in 0..width {
                    for oy in 0..width {
                        v.push(spec.eval_2d(offset(ox), offset(oy)));
                    }
                }
                v
            }
        };
        let zero = values.iter().all(|v| *v == T::zero());
        let use_fft = !zero
            && match method {
                ConvolutionMethod::Direct => false,
                ConvolutionMethod::Fft => true,
                ConvolutionMethod::Auto => match grid.dim() {
                    Dim::One => n > AUTO_DIRECT_MAX_1D,
                    Dim::Two => n > AUTO_DIRECT_MAX_2D,
                },
            };
        let fft = use_fft.then(|| FftConvolver::new(&values, grid));
        Ok(Self {
            spec: *spec,
            grid: *grid,
            values,
            zero,
            fft,
        })
    }

    pub fn spec(&self) -> &KernelSpec<T> {
        &self.spec
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn uses_fft(&self) -> bool {
        self.fft.is_some()
    }

    /// 1D table entry at signed offset `o`, `|o| < N`.
    pub fn at(&self, o: isize) -> T {
        let n = self.grid.n() as isize;
        self.values[(o + n - 1) as usize]
    }

    /// 2D table entry at signed offsets `(ox, oy)`.
    pub fn at_2d(&self, ox: isize, oy: isize) -> T {
        let n = self.grid.n() as isize;
        let width = 2 * n - 1;
        self.values[((ox + n - 1) * width + (oy + n - 1)) as usize]
    }

    /// Raw table in offset order (`-(N-1)..=(N-1)`, x-major in 2D).
    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// `out_j = h Σ_i table[j - i] density_i` with `h` the cell measure.
pub fn convolve<T: Real>(table: &KernelTable<T>, density: &[T]) -> Result<Vec<T>, KernelError> {
    check_density(table, density)?;
    if table.zero {
        return Ok(vec![T::zero(); density.len()]);
    }
    match &table.fft {
        Some(fft) => Ok(fft.apply(density, table.grid.cell_measure())),
        None => Ok(direct(table, density)),
    }
}

/// Direct-summation convolution regardless of the table's method.
pub fn convolve_direct<T: Real>(
    table: &KernelTable<T>,
    density: &[T],
) -> Result<Vec<T>, KernelError> {
    check_density(table, density)?;
    Ok(direct(table, density))
}

/// `(1/l_c²) · smoothing * (kernel * density)`: the correlated electric potential.
pub fn double_convolve<T: Real>(
    smoothing: &KernelTable<T>,
    kernel: &KernelTable<T>,
    density: &[T],
    l_c: T,
) -> Result<Vec<T>, KernelError> {
    let inner = convolve(kernel, density)?;
    let outer = convolve(smoothing, &inner)?;
    let scale = T::one() / (l_c * l_c);
    Ok(outer.into_iter().map(|v| v * scale).collect())
}

fn check_density<T: Real>(table: &KernelTable<T>, density: &[T]) -> Result<(), KernelError> {
    let expected = table.grid.cell_count();
    if density.len() == expected {
        Ok(())
    } else {
        Err(KernelError::Length {
            expected,
            got: density.len(),
        })
    }
}

fn direct<T: Real>(table: &KernelTable<T>, density: &[T]) -> Vec<T> {
    let n = table.grid.n();
    let h = table.grid.cell_measure();
    let width = 2 * n - 1;
    let vals = &table.values;
    match table.grid.dim() {
        Dim::One => (0..n)
            .map(|j| {
                // table index of offset j - i is j - i + n - 1
                let mut acc = T::zero();
                for (i, &rho) in density.iter().enumerate() {
                    acc += vals[j + n - 1 - i] * rho;
                }
                h * acc
            })
            .collect(),
        Dim::Two => {
            let mut out = vec![T::zero(); n * n];
            for j in 0..n {
                for k in 0..n {
                    let mut acc = T::zero();
                    for i in 0..n {
                        let row = (j + n - 1 - i) * width;
                        let src = &density[i * n..(i + 1) * n];
                        for (l, &rho) in src.iter().enumerate() {
                            acc += vals[row + k + n - 1 - l] * rho;
                        }
                    }
                    out[j * n + k] = h * acc;
                }
            }
            out
        }
    }
}

/// Zero-padded circular convolution of period `2N` per axis, which equals the
/// linear sum on the `N` output cells.
#[derive(Clone)]
struct FftConvolver<T: Real> {
    dim: Dim,
    n: usize,
    period: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    kernel_hat: Vec<Complex<T>>,
}

impl<T: Real> FftConvolver<T> {
    fn new(values: &[T], grid: &Grid<T>) -> Self {
        let n = grid.n();
        let period = 2 * n;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(period);
        let inverse = planner.plan_fft_inverse(period);
        let width = 2 * n - 1;
        // offset o sits at position o mod period
        let wrap = |o: usize| (o + period - (n - 1)) % period;
        let mut buf = match grid.dim() {
            Dim::One => {
                let mut b = vec![Complex::new(T::zero(), T::zero()); period];
                for (o, &v) in values.iter().enumerate() {
                    b[wrap(o)] = Complex::new(v, T::zero());
                }
                b
            }
            Dim::Two => {
                let mut b = vec![Complex::new(T::zero(), T::zero()); period * period];
                for ox in 0..width {
                    for oy in 0..width {
                        b[wrap(ox) * period + wrap(oy)] =
                            Complex::new(values[ox * width + oy], T::zero());
                    }
                }
                b
            }
        };
        let mut conv = Self {
            dim: grid.dim(),
            n,
            period,
            forward,
            inverse,
            kernel_hat: Vec::new(),
        };
        conv.transform_forward(&mut buf);
        conv.kernel_hat = buf;
        conv
    }

    /// 1D: plain FFT. 2D: row FFTs, transpose, row FFTs (output left transposed).
    fn transform_forward(&self, buf: &mut [Complex<T>]) {
        self.forward.process(buf);
        if self.dim == Dim::Two {
            transpose_square(buf, self.period);
            self.forward.process(buf);
        }
    }

    fn transform_inverse(&self, buf: &mut [Complex<T>]) {
        self.inverse.process(buf);
        if self.dim == Dim::Two {
            transpose_square(buf, self.period);
            self.inverse.process(buf);
        }
    }

    fn apply(&self, density: &[T], h: T) -> Vec<T> {
        let p = self.period;
        let n = self.n;
        let zero = Complex::new(T::zero(), T::zero());
        let mut buf = match self.dim {
            Dim::One => {
                let mut b = vec![zero; p];
                for (slot, &v) in b.iter_mut().zip(density) {
                    *slot = Complex::new(v, T::zero());
                }
                b
            }
            Dim::Two => {
                let mut b = vec![zero; p * p];
                for j in 0..n {
                    for k in 0..n {
                        b[j * p + k] = Complex::new(density[j * n + k], T::zero());
                    }
                }
                b
            }
        };
        self.transform_forward(&mut buf);
        for (b, kh) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= *kh;
        }
        self.transform_inverse(&mut buf);
        let scale = match self.dim {
            Dim::One => h / T::from_usize_lossy(p),
            Dim::Two => h / T::from_usize_lossy(p * p),
        };
        match self.dim {
            Dim::One => buf[..n].iter().map(|c| c.re * scale).collect(),
            Dim::Two => {
                let mut out = Vec::with_capacity(n * n);
                for j in 0..n {
                    out.extend(buf[j * p..j * p + n].iter().map(|c| c.re * scale));
                }
                out
            }
        }
    }
}

fn transpose_square<T: Copy>(buf: &mut [T], p: usize) {
    for r in 0..p {
        for c in r + 1..p {
            buf.swap(r * p + c, c * p + r);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn point_values() {
        let p = KernelSpec::regularized_power(1.0, 2.0, 0.5).unwrap();
        assert!((p.eval(0.0) - 4.0_f64).abs() < 1e-15);
        let n3 = KernelSpec::regularized_newtonian(3, 0.5).unwrap();
        assert!((n3.eval(0.0) - 2.0_f64).abs() < 1e-15);
        assert_eq!(KernelSpec::<f64>::ExpDecay.eval(0.0), 1.0);
        let vdw = KernelSpec::van_der_waals(1.0, 0.1).unwrap();
        assert!((vdw.eval(0.0) - 10.0_f64).abs() < 1e-12);
        let n2 = KernelSpec::regularized_newtonian(2, 0.5).unwrap();
        assert!((n2.eval(0.0) + 0.5 * 0.25f64.ln()).abs() < 1e-15);
        let c2 = KernelSpec::log_2d_coulomb(0.1).unwrap();
        let expect = -(1.0 / (2.0 * std::f64::consts::PI)) * (1.0f64 + 0.01).sqrt().ln();
        assert!((c2.eval(1.0) - expect).abs() < 1e-15);
        assert_eq!(KernelSpec::<f64>::Zero.eval(3.0), 0.0);
    }

    #[test]
    fn van_der_waals_regularizes_only_the_denominator() {
        let vdw = KernelSpec::van_der_waals(2.0, 0.1).unwrap();
        let x = 0.7f64;
        let expect = (-x / 2.0).exp() / ((x * x + 0.01).sqrt() / 2.0);
        assert!((vdw.eval(x) - expect).abs() < 1e-14);
        assert_eq!(vdw.eval(-x), vdw.eval(x));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(KernelSpec::regularized_power(-1.0, 2.0, 0.5).is_err());
        assert!(KernelSpec::regularized_power(1.0, 0.0, 0.5).is_err());
        assert!(KernelSpec::regularized_power(1.0, 2.0, 0.0).is_err());
        assert!(KernelSpec::regularized_newtonian(1, 0.5).is_err());
        assert!(KernelSpec::van_der_waals(0.0, 0.1).is_err());
        assert!(KernelSpec::log_2d_coulomb(f64::NAN).is_err());
        assert!(KernelSpec::regularized_power(0.0, 2.0, 0.5)
            .unwrap()
            .is_zero());
        let bad = KernelSpec::RegularizedPower {
            eta: 1.0,
            k: 2.0,
            a: -1.0,
        };
        let g = Grid::one_d(1.0, 4).unwrap();
        assert!(KernelTable::build(&bad, &g).is_err());
    }

    #[test]
    fn exp_table_small() {
        // spacing 1
        let g = Grid::one_d(2.0, 4).unwrap();
        let t = KernelTable::build(&KernelSpec::ExpDecay, &g).unwrap();
        let e = std::f64::consts::E;
        assert_eq!(t.values().len(), 7);
        for o in -3isize..=3 {
            assert!((t.at(o) - (-(o.abs() as f64)).exp()).abs() < 1e-15);
        }
        assert!((t.at(-1) - 1.0 / e).abs() < 1e-15);
    }

    #[test]
    fn zero_kernel_table_and_convolution() {
        let g = Grid::one_d(1.0, 8).unwrap();
        let t = KernelTable::build(&KernelSpec::Zero, &g).unwrap();
        assert!(t.is_zero());
        assert!(t.values().iter().all(|v| *v == 0.0));
        let out = convolve(&t, &[1.0; 8]).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn point_mass_picks_out_table_column() {
        let g = Grid::one_d(4.0, 16).unwrap();
        let spec = KernelSpec::regularized_power(1.0, 2.0, 0.5).unwrap();
        let t = KernelTable::build(&spec, &g).unwrap();
        let j0 = 5;
        let mut rho = vec![0.0; 16];
        rho[j0] = 1.0 / g.spacing();
        let out = convolve(&t, &rho).unwrap();
        for (j, v) in out.iter().enumerate() {
            assert!((v - t.at(j as isize - j0 as isize) as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let g = Grid::one_d(1.0, 4).unwrap();
        let t = KernelTable::build(&KernelSpec::ExpDecay, &g).unwrap();
        assert_eq!(
            convolve(&t, &[1.0; 3]),
            Err(KernelError::Length {
                expected: 4,
                got: 3
            })
        );
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn fft_path_matches_direct_1d_and_2d() {
        let spec = KernelSpec::regularized_power(1.0, 2.0, 0.1).unwrap();
        for n in [8, 64, 128, 256] {
            let g = Grid::one_d(20.0, n).unwrap();
            let fft = KernelTable::build_with(&spec, &g, ConvolutionMethod::Fft).unwrap();
            assert!(fft.uses_fft());
            let rho: Vec<f64> = (0..n).map(|j| ((j * 7 % 13) as f64 - 6.0) / 3.0).collect();
            let a = convolve(&fft, &rho).unwrap();
            let b = convolve_direct(&fft, &rho).unwrap();
            let scale = max_abs(&b);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-12 * scale, "n={n}: {x} vs {y}");
            }
        }
        let log = KernelSpec::log_2d_coulomb(0.1).unwrap();
        for n in [4, 16, 32] {
            let g = Grid::two_d(10.0, n).unwrap();
            let fft = KernelTable::build_with(&log, &g, ConvolutionMethod::Fft).unwrap();
            let rho: Vec<f64> = (0..n * n)
                .map(|j| ((j * 5 % 11) as f64 - 5.0) / 2.0)
                .collect();
            let a = convolve(&fft, &rho).unwrap();
            let b = convolve_direct(&fft, &rho).unwrap();
            let scale = max_abs(&b);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-12 * scale, "2d n={n}: {x} vs {y}");
            }
        }
    }

    fn power_spec() -> impl Strategy<Value = KernelSpec<f64>> {
        (0.01..5.0f64, 0.1..4.0f64, 0.05..2.0f64)
            .prop_map(|(eta, k, a)| KernelSpec::regularized_power(eta, k, a).unwrap())
    }

    proptest! {
        #[test]
        fn tables_are_even(spec in power_spec(), n in 1usize..20) {
            let g = Grid::one_d(3.0, 2 * n).unwrap();
            let t = KernelTable::build(&spec, &g).unwrap();
            for o in 0..(2 * n) as isize {
                prop_assert_eq!(t.at(o), t.at(-o));
            }
            let g2 = Grid::two_d(3.0, 4).unwrap();
            let t2 = KernelTable::build(&spec, &g2).unwrap();
            for ox in -3isize..=3 {
                for oy in -3isize..=3 {
                    prop_assert_eq!(t2.at_2d(ox, oy), t2.at_2d(-ox, -oy));
                    prop_assert_eq!(t2.at_2d(ox, oy), t2.at_2d(oy, ox));
                }
            }
        }

        #[test]
        fn power_kernel_strictly_decreasing(spec in power_spec(), r in 0.0..10.0f64, dr in 1e-3..1.0f64) {
            prop_assert!(spec.eval(r + dr) < spec.eval(r));
        }

        #[test]
        fn convolution_is_linear_and_symmetric(
            spec in power_spec(),
            r1 in prop::collection::vec(-1.0..1.0f64, 16),
            r2 in prop::collection::vec(-1.0..1.0f64, 16),
            alpha in -3.0..3.0f64,
            beta in -3.0..3.0f64,
        ) {
            let g = Grid::one_d(2.0, 16).unwrap();
            let t = KernelTable::build(&spec, &g).unwrap();
            let mix: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| alpha * a + beta * b).collect();
            let lhs = convolve(&t, &mix).unwrap();
            let c1 = convolve(&t, &r1).unwrap();
            let c2 = convolve(&t, &r2).unwrap();
            let scale = 1.0 + max_abs(&lhs);
            for j in 0..16 {
                prop_assert!((lhs[j] - (alpha * c1[j] + beta * c2[j])).abs() <= 1e-12 * scale);
            }
            let dx = g.spacing();
            let a: f64 = c1.iter().zip(&r2).map(|(c, s)| dx * c * s).sum();
            let b: f64 = c2.iter().zip(&r1).map(|(c, s)| dx * c * s).sum();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs())));
        }

        #[test]
        fn positive_kernel_keeps_positive_density_positive(
            spec in power_spec(),
            rho in prop::collection::vec(0.0..1.0f64, 128),
        ) {
            let g = Grid::one_d(10.0, 128).unwrap();
            let t = KernelTable::build(&spec, &g).unwrap();
            prop_assert!(t.uses_fft());
            let out = convolve(&t, &rho).unwrap();
            // The FFT route is exact only to rounding; nonnegativity holds up to that.
            let scale = max_abs(&out);
            prop_assert!(out.iter().all(|v| *v >= -1e-13 * scale));
            let out = convolve_direct(&t, &rho).unwrap();
            prop_assert!(out.iter().all(|v| *v >= 0.0));
        }
    }
}

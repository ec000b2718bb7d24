//! Uniform, normal and exponential fills over a work grid.

use std::f64::consts::{FRAC_PI_2, TAU};

use crate::error::{Error, Result};
use crate::grid::{run_grid, run_grid_paired, Executor, KernelKind, MatrixBuffer, Shape, WorkGrid};
use crate::rng::{StreamSet, NORM};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Distribution {
    Uniform,
    /// Raw generator integers in `[1, 2147483647]`.
    UniformInt,
    /// Standard normal through paired Box-Muller lanes.
    Normal,
    Exponential {
        rate: f64,
    },
}

/// What to generate and how the work is laid out.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FillRequest {
    pub shape: Shape,
    pub distribution: Distribution,
    pub grid: WorkGrid,
    /// Stored row width; `None` means no padding.
    pub npad: Option<usize>,
}

impl FillRequest {
    pub fn new(shape: Shape, distribution: Distribution, grid: WorkGrid) -> Self {
        FillRequest { shape, distribution, grid, npad: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Fill {
    Double(MatrixBuffer<f64>),
    Integer(MatrixBuffer<u32>),
}

/// Dispatches on the request's distribution.
pub fn fill(exec: &Executor, streams: &mut StreamSet, req: &FillRequest) -> Result<Fill> {
    let FillRequest { shape, grid, npad, .. } = *req;
    Ok(match req.distribution {
        Distribution::Uniform => Fill::Double(fill_uniform(exec, streams, &grid, shape, npad)?),
        Distribution::UniformInt => Fill::Integer(fill_uniform_int(exec, streams, &grid, shape, npad)?),
        Distribution::Normal => Fill::Double(fill_normal(exec, streams, &grid, shape, npad)?),
        Distribution::Exponential { rate } => {
            Fill::Double(fill_exponential(exec, streams, &grid, shape, npad, rate)?)
        }
    })
}

/// Uniform doubles in (0, 1): generator integer times 1/2^31.
pub fn fill_uniform(
    exec: &Executor,
    streams: &mut StreamSet,
    grid: &WorkGrid,
    shape: Shape,
    npad: Option<usize>,
) -> Result<MatrixBuffer<f64>> {
    run_grid(exec, streams, grid, KernelKind::ColumnMajor, shape, npad, |s, n| {
        (0..n).map(|_| s.next_uniform()).collect()
    })
}

/// Unscaled generator integers.
pub fn fill_uniform_int(
    exec: &Executor,
    streams: &mut StreamSet,
    grid: &WorkGrid,
    shape: Shape,
    npad: Option<usize>,
) -> Result<MatrixBuffer<u32>> {
    run_grid(exec, streams, grid, KernelKind::ColumnMajor, shape, npad, |s, n| {
        (0..n).map(|_| s.next_int()).collect()
    })
}

/// Box-Muller on paired lanes.
///
/// Per iteration the even lane draws `u1` and the odd lane draws `u2`, each
/// from its own stream. The even lane writes `sqrt(-2 ln u1) cos(2π u2)` and
/// the odd lane `sqrt(-2 ln u1) cos(2π u2 - π/2)`.
pub fn fill_normal(
    exec: &Executor,
    streams: &mut StreamSet,
    grid: &WorkGrid,
    shape: Shape,
    npad: Option<usize>,
) -> Result<MatrixBuffer<f64>> {
    run_grid_paired(exec, streams, grid, shape, npad, |even, odd, n| {
        (0..n)
            .map(|_| {
                let u1 = NORM * even.next_int() as f64;
                let theta = (TAU * NORM) * odd.next_int() as f64;
                box_muller(u1, theta)
            })
            .collect()
    })
}

#[inline]
pub(crate) fn box_muller(u1: f64, theta: f64) -> (f64, f64) {
    let r = (-2.0 * u1.ln()).sqrt();
    (r * theta.cos(), r * (theta - FRAC_PI_2).cos())
}

/// Exponential with rate `rate` by inversion: `-ln(1 - u) / rate`.
pub fn fill_exponential(
    exec: &Executor,
    streams: &mut StreamSet,
    grid: &WorkGrid,
    shape: Shape,
    npad: Option<usize>,
    rate: f64,
) -> Result<MatrixBuffer<f64>> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidRate(rate));
    }
    run_grid(exec, streams, grid, KernelKind::ColumnMajor, shape, npad, |s, n| {
        (0..n).map(|_| exp_inverse(s.next_uniform(), rate)).collect()
    })
}

#[inline]
pub fn exp_inverse(u: f64, rate: f64) -> f64 {
    -(1.0 - u).ln() / rate
}

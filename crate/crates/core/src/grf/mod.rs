//! Batched simulation of Matérn Gaussian random fields by direct
//! decomposition: covariance blocks, LDLᵀ, then `U = L · D^½ · Z`.

pub mod bessel;
pub mod cholesky;
pub mod io;
pub mod matern;

pub use bessel::bessel_k;
pub use cholesky::{chol_batch, ldl_in_place, multiply_lower_diag_batch, DiagTransform};
pub use matern::{matern_cov, matern_cov_grid, GridSpec, Matern, MaternParams};

use crate::dist::fill_normal;
use crate::error::{Error, Result};
use crate::grid::{Executor, Shape, WorkGrid};
use crate::rng::StreamSet;

/// `B` square `n x n` blocks stacked by row: `B·n` rows of `n` values.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchedMatrix {
    batches: usize,
    n: usize,
    data: Vec<f64>,
}

impl BatchedMatrix {
    pub fn zeros(batches: usize, n: usize) -> Self {
        BatchedMatrix { batches, n, data: vec![0.0; batches * n * n] }
    }

    pub fn from_blocks(batches: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != batches * n * n || batches == 0 || n == 0 {
            return Err(Error::InvalidShapes(format!(
                "{} values cannot form {batches} blocks of {n}x{n}",
                data.len()
            )));
        }
        Ok(BatchedMatrix { batches, n, data })
    }

    pub fn batches(&self) -> usize {
        self.batches
    }

    /// Side of each block.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// `(B·n, n)`.
    pub fn stacked_dims(&self) -> (usize, usize) {
        (self.batches * self.n, self.n)
    }

    pub fn block(&self, b: usize) -> &[f64] {
        let len = self.n * self.n;
        &self.data[b * len..(b + 1) * len]
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        let len = self.n * self.n;
        self.data.chunks_mut(len)
    }

    pub fn get(&self, b: usize, i: usize, j: usize) -> f64 {
        self.data[b * self.n * self.n + i * self.n + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Diagonals of the `D` factors, one row per batch.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagBatch {
    batches: usize,
    n: usize,
    data: Vec<f64>,
}

impl DiagBatch {
    pub fn zeros(batches: usize, n: usize) -> Self {
        DiagBatch { batches, n, data: vec![0.0; batches * n] }
    }

    pub fn batches(&self) -> usize {
        self.batches
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, b: usize) -> &[f64] {
        &self.data[b * self.n..(b + 1) * self.n]
    }

    pub fn rows_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.data.chunks_mut(self.n)
    }
}

/// One simulated field on the grid, `ncell_y` rows of `ncell_x` values.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub batch: usize,
    pub realization: usize,
    pub nrow: usize,
    pub ncol: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct GrfSimulation {
    /// Batch-major: all realizations of parameter row 0 first.
    pub fields: Vec<Field>,
    /// `(B·n, n)` of the stacked covariance that was factored.
    pub covariance_dims: (usize, usize),
}

/// Simulates `n_realizations` fields for every parameter row.
///
/// Standard normals come from [`fill_normal`] as a `(B·n) x n_realizations`
/// matrix; batch `b` uses rows `b·n .. (b+1)·n`.
pub fn simulate_grf(
    exec: &Executor,
    params: &[MaternParams],
    grid: &GridSpec,
    n_realizations: usize,
    streams: &mut StreamSet,
    work_grid: &WorkGrid,
) -> Result<GrfSimulation> {
    if n_realizations == 0 {
        return Err(Error::InvalidArgument("at least one realization is needed".into()));
    }
    let cov = matern_cov_grid(exec, params, grid)?;
    let covariance_dims = cov.stacked_dims();
    let (l, d) = chol_batch(exec, cov)?;
    let n = grid.cells();
    let b = params.len();
    let z = fill_normal(exec, streams, work_grid, Shape::matrix(b * n, n_realizations), None)?;
    let u = multiply_lower_diag_batch(exec, &l, &d, &z, DiagTransform::Sqrt)?;
    drop(l);

    let mut fields = Vec::with_capacity(b * n_realizations);
    for batch in 0..b {
        for realization in 0..n_realizations {
            let values = (0..n).map(|i| u.get(batch * n + i, realization)).collect();
            fields.push(Field { batch, realization, nrow: grid.ncell_y, ncol: grid.ncell_x, values });
        }
    }
    Ok(GrfSimulation { fields, covariance_dims })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Creator;

    #[test]
    fn output_layout_and_variance_scaling() {
        let grid = GridSpec::new(4, 3, 1.0, (0.0, 0.0)).unwrap();
        let p1 = [
            MaternParams::new(1.5, 3.0, 1.0, 1.0, 0.0).unwrap(),
            MaternParams::new(0.8, 2.0, 2.5, 2.0, 0.3).unwrap(),
        ];
        let p4: Vec<MaternParams> =
            p1.iter().map(|p| MaternParams { variance: 4.0 * p.variance, ..*p }).collect();
        let wg = WorkGrid::new(4, 2).unwrap();
        let base = Creator::default().create_streams(8).unwrap();
        let exec = Executor::serial();
        let a = simulate_grf(&exec, &p1, &grid, 3, &mut base.clone(), &wg).unwrap();
        let b = simulate_grf(&exec, &p4, &grid, 3, &mut base.clone(), &wg).unwrap();
        assert_eq!(a.covariance_dims, (24, 12));
        assert_eq!(a.fields.len(), 6);
        let order: Vec<(usize, usize)> = a.fields.iter().map(|f| (f.batch, f.realization)).collect();
        assert_eq!(order, vec![(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]);
        for (fa, fb) in a.fields.iter().zip(&b.fields) {
            assert_eq!((fa.nrow, fa.ncol), (3, 4));
            for (x, y) in fa.values.iter().zip(&fb.values) {
                assert!((2.0 * x - y).abs() <= 1e-12 * y.abs().max(1.0));
            }
        }
    }
}

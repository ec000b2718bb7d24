//! Batched LDLᵀ factorization and the `L · f(D) · Z` product.

use super::{BatchedMatrix, DiagBatch};
use crate::error::{Error, Result};
use crate::grid::{Executor, MatrixBuffer};

// Rows factored together so each earlier row of L is read once per block.
const ROW_BLOCK: usize = 16;

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Factors one symmetric block in place: on return the strict lower
/// triangle holds L, the diagonal is 1, the upper triangle is 0, and `diag`
/// holds D. Only the lower triangle of the input is read.
pub fn ldl_in_place(a: &mut [f64], n: usize, diag: &mut [f64]) -> std::result::Result<(), (usize, f64)> {
    assert_eq!(a.len(), n * n);
    assert_eq!(diag.len(), n);
    // w[r][k] = L[i][k] * D[k] for the rows i of the current block
    let mut w = vec![0.0f64; ROW_BLOCK * n];
    let mut i0 = 0;
    while i0 < n {
        let i1 = (i0 + ROW_BLOCK).min(n);
        // Columns left of the block: every row in the block is independent.
        for j in 0..i0 {
            let (done, rest) = a.split_at_mut(i0 * n);
            let lj = &done[j * n..j * n + j];
            for i in i0..i1 {
                let wr = &mut w[(i - i0) * n..(i - i0) * n + n];
                let v = rest[(i - i0) * n + j] - dot(&wr[..j], lj);
                wr[j] = v;
                rest[(i - i0) * n + j] = v / diag[j];
            }
        }
        // Columns inside the block, row by row.
        for i in i0..i1 {
            for j in i0..i {
                let (done, rest) = a.split_at_mut(i * n);
                let lj = &done[j * n..j * n + j];
                let wr = &mut w[(i - i0) * n..(i - i0) * n + n];
                let v = rest[j] - dot(&wr[..j], lj);
                wr[j] = v;
                rest[j] = v / diag[j];
            }
            let row = &mut a[i * n..i * n + n];
            let wr = &w[(i - i0) * n..(i - i0) * n + i];
            let d = row[i] - dot(wr, &row[..i]);
            // also rejects NaN
            if d.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                return Err((i, d));
            }
            diag[i] = d;
            row[i] = 1.0;
            row[i + 1..].fill(0.0);
        }
        i0 = i1;
    }
    Ok(())
}

/// LDLᵀ of every block; batches run on the executor's pool.
pub fn chol_batch(exec: &Executor, mut s: BatchedMatrix) -> Result<(BatchedMatrix, DiagBatch)> {
    let n = s.dim();
    let mut diag = DiagBatch::zeros(s.batches(), n);
    let mut work: Vec<(&mut [f64], &mut [f64])> = s.blocks_mut().zip(diag.rows_mut()).collect();
    let results = exec.map_mut(&mut work, |_, (block, d)| ldl_in_place(block, n, d));
    drop(work);
    for (batch, r) in results.into_iter().enumerate() {
        if let Err((pivot, value)) = r {
            return Err(Error::NotPositiveDefinite { batch, pivot, value });
        }
    }
    Ok((s, diag))
}

/// How the diagonal enters the product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagTransform {
    Sqrt,
    Identity,
}

/// Computes `L_b · diag(f(D_b)) · Z_b` for every batch `b`, treating each
/// `L_b` as unit lower triangular.
///
/// `z` has either `n` rows (one block shared by all batches) or `B·n` rows
/// (batch `b` uses rows `b·n .. (b+1)·n`). The result has `B·n` rows and
/// the columns of `z`.
pub fn multiply_lower_diag_batch(
    exec: &Executor,
    l: &BatchedMatrix,
    d: &DiagBatch,
    z: &MatrixBuffer<f64>,
    transform: DiagTransform,
) -> Result<MatrixBuffer<f64>> {
    let (b, n) = (l.batches(), l.dim());
    if d.batches() != b || d.dim() != n {
        return Err(Error::InvalidShapes(format!(
            "diagonal is {}x{}, factors are {b} blocks of {n}",
            d.batches(),
            d.dim()
        )));
    }
    let shared = if z.nrow() == n {
        true
    } else if z.nrow() == b * n {
        false
    } else {
        return Err(Error::InvalidShapes(format!("Z has {} rows; expected {n} or {}", z.nrow(), b * n)));
    };
    let ncol = z.ncol();
    let blocks = exec.map(b, |batch| {
        let lb = l.block(batch);
        let scale: Vec<f64> = d
            .row(batch)
            .iter()
            .map(|&v| match transform {
                DiagTransform::Sqrt => v.sqrt(),
                DiagTransform::Identity => v,
            })
            .collect();
        let z0 = if shared { 0 } else { batch * n };
        let mut out = vec![0.0; n * ncol];
        let mut y = vec![0.0; n];
        for c in 0..ncol {
            for k in 0..n {
                y[k] = scale[k] * z.get(z0 + k, c);
            }
            for i in 0..n {
                out[i * ncol + c] = dot(&lb[i * n..i * n + i], &y[..i]) + y[i];
            }
        }
        out
    });
    MatrixBuffer::from_rows(b * n, ncol, blocks.concat())
}

//! Deterministic emulation of a two-dimensional work-item index space.
//!
//! Work item `(i, j)` with `i < n0`, `j < n1` owns one stream for the whole
//! run and the matrix cells `(r, c)` with `r ≡ i (mod n0)` and
//! `c ≡ j (mod n1)`, visited row by row. The k-th value drawn from its stream
//! lands in its k-th cell. A length-n vector is laid out one-dimensionally:
//! the work item with ordinal `o` owns indices `o, o + W, o + 2W, ...` where
//! `W = n0 * n1`.
//!
//! Results depend only on the stream states, the grid and the shape. Work
//! items run on a thread pool but each produces its values privately, and
//! values are scattered into the output in a fixed order afterwards.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{StreamSet, StreamState};

/// Global work size in dimensions 0 and 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WorkGrid {
    n0: usize,
    n1: usize,
}

impl WorkGrid {
    pub fn new(n0: usize, n1: usize) -> Result<Self> {
        if n0 == 0 || n1 == 0 {
            return Err(Error::InvalidGrid(format!("work grid {n0}x{n1} has an empty dimension")));
        }
        Ok(WorkGrid { n0, n1 })
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    /// Total number of work items.
    pub fn items(&self) -> usize {
        self.n0 * self.n1
    }
}

impl Default for WorkGrid {
    fn default() -> Self {
        WorkGrid { n0: 64, n1: 8 }
    }
}

/// How a kernel maps work item `(i, j)` to a stream ordinal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    /// `i + n0 * j`; used by the uniform, integer and exponential kernels.
    ColumnMajor,
    /// `i * n1 + j`; used by the paired normal kernel.
    RowMajor,
}

impl KernelKind {
    pub fn ordinal(self, grid: &WorkGrid, i: usize, j: usize) -> usize {
        match self {
            KernelKind::ColumnMajor => i + grid.n0 * j,
            KernelKind::RowMajor => i * grid.n1 + j,
        }
    }

    fn item(self, grid: &WorkGrid, ordinal: usize) -> (usize, usize) {
        match self {
            KernelKind::ColumnMajor => (ordinal % grid.n0, ordinal / grid.n0),
            KernelKind::RowMajor => (ordinal / grid.n1, ordinal % grid.n1),
        }
    }
}

/// Stream ordinal used by work item `(i, j)`, checked against the stream count.
pub fn stream_index(
    kind: KernelKind,
    grid: &WorkGrid,
    i: usize,
    j: usize,
    stream_count: usize,
) -> Result<usize> {
    if i >= grid.n0 || j >= grid.n1 {
        return Err(Error::InvalidArgument(format!(
            "work item ({i}, {j}) outside grid {}x{}",
            grid.n0, grid.n1
        )));
    }
    let ordinal = kind.ordinal(grid, i, j);
    if ordinal >= stream_count {
        return Err(Error::InsufficientStreams { needed: ordinal + 1, available: stream_count });
    }
    Ok(ordinal)
}

/// Logical output shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Vector(usize),
    Matrix { nrow: usize, ncol: usize },
}

impl Shape {
    pub fn matrix(nrow: usize, ncol: usize) -> Self {
        Shape::Matrix { nrow, ncol }
    }

    /// `(nrow, ncol)` of the stored buffer; a vector is a single row.
    pub fn dims(&self) -> (usize, usize) {
        match *self {
            Shape::Vector(n) => (1, n),
            Shape::Matrix { nrow, ncol } => (nrow, ncol),
        }
    }

    fn validate(&self) -> Result<()> {
        let (r, c) = self.dims();
        if r == 0 || c == 0 {
            return Err(Error::InvalidArgument(format!("shape {r}x{c} is empty")));
        }
        Ok(())
    }
}

/// Cells owned by one work item, in drawing order, as `(row, col)`.
#[derive(Clone, Debug)]
pub struct ItemCells {
    shape: Shape,
    row: usize,
    col: usize,
    col0: usize,
    row_step: usize,
    col_step: usize,
}

impl ItemCells {
    fn new(shape: Shape, grid: &WorkGrid, kind: KernelKind, ordinal: usize) -> Self {
        let (i, j) = kind.item(grid, ordinal);
        ItemCells { shape, row: i, col: j, col0: j, row_step: grid.n0, col_step: grid.n1 }
    }

    /// Number of cells, without iterating.
    pub fn len(&self) -> usize {
        let (nrow, ncol) = self.shape.dims();
        let strided = |start: usize, n: usize, step: usize| {
            if start >= n {
                0
            } else {
                (n - start).div_ceil(step)
            }
        };
        strided(self.row, nrow, self.row_step) * strided(self.col0, ncol, self.col_step)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Iterator for ItemCells {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<(usize, usize)> {
        let (nrow, ncol) = self.shape.dims();
        if self.col0 >= ncol {
            return None;
        }
        if self.col >= ncol {
            self.row += self.row_step;
            self.col = self.col0;
        }
        if self.row >= nrow {
            return None;
        }
        let cell = (self.row, self.col);
        self.col += self.col_step;
        Some(cell)
    }
}

/// Cells owned by the work item with stream ordinal `ordinal`.
pub fn item_cells(shape: Shape, grid: &WorkGrid, kind: KernelKind, ordinal: usize) -> ItemCells {
    ItemCells::new(shape, grid, kind, ordinal)
}

/// Owned cells of every work item, indexed by stream ordinal.
pub fn element_plan(grid: &WorkGrid, shape: Shape, kind: KernelKind) -> Vec<Vec<(usize, usize)>> {
    (0..grid.items()).map(|o| item_cells(shape, grid, kind, o).collect()).collect()
}

/// Row-major matrix of `nrow` rows whose first `ncol` of `npad` columns are meaningful.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixBuffer<T> {
    nrow: usize,
    ncol: usize,
    npad: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> MatrixBuffer<T> {
    pub fn new(nrow: usize, ncol: usize, npad: usize) -> Result<Self> {
        if npad < ncol {
            return Err(Error::InvalidShapes(format!("npad {npad} is smaller than ncol {ncol}")));
        }
        Ok(MatrixBuffer { nrow, ncol, npad, data: vec![T::default(); nrow * npad] })
    }

    pub fn from_rows(nrow: usize, ncol: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != nrow * ncol {
            return Err(Error::InvalidShapes(format!(
                "{} values cannot fill a {nrow}x{ncol} matrix",
                data.len()
            )));
        }
        Ok(MatrixBuffer { nrow, ncol, npad: ncol, data })
    }

    pub fn nrow(&self) -> usize {
        self.nrow
    }

    pub fn ncol(&self) -> usize {
        self.ncol
    }

    pub fn npad(&self) -> usize {
        self.npad
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        assert!(r < self.nrow && c < self.ncol, "cell ({r}, {c}) out of bounds");
        self.data[r * self.npad + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        assert!(r < self.nrow && c < self.ncol, "cell ({r}, {c}) out of bounds");
        self.data[r * self.npad + c] = v;
    }

    /// The meaningful part of row `r`.
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.npad..r * self.npad + self.ncol]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        (0..self.nrow).map(move |r| self.row(r))
    }

    /// Meaningful cells in row-major order, padding dropped.
    pub fn to_vec(&self) -> Vec<T> {
        self.rows().flat_map(|r| r.iter().copied()).collect()
    }

    /// Padded storage, `nrow * npad` values.
    pub fn raw(&self) -> &[T] {
        &self.data
    }
}

/// Runs work items serially or on a fixed-size thread pool.
pub struct Executor {
    pool: Option<rayon::ThreadPool>,
    threads: usize,
}

impl Executor {
    pub fn serial() -> Self {
        Executor { pool: None, threads: 1 }
    }

    pub fn new(threads: usize) -> Result<Self> {
        if threads == 0 {
            return Err(Error::InvalidArgument("thread count must be at least 1".into()));
        }
        if threads == 1 {
            return Ok(Self::serial());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
        Ok(Executor { pool: Some(pool), threads })
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// `f(index, &mut item)` for every item; results in item order.
    pub fn map_mut<S, R, F>(&self, items: &mut [S], f: F) -> Vec<R>
    where
        S: Send,
        R: Send,
        F: Fn(usize, &mut S) -> R + Sync + Send,
    {
        match &self.pool {
            None => items.iter_mut().enumerate().map(|(k, s)| f(k, s)).collect(),
            Some(pool) => pool.install(|| items.par_iter_mut().enumerate().map(|(k, s)| f(k, s)).collect()),
        }
    }

    /// `f(index)` for `0..n`; results in index order.
    pub fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match &self.pool {
            None => (0..n).map(f).collect(),
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
        }
    }
}

impl Default for Executor {
    fn default() -> Self {
        Self::serial()
    }
}

fn check_streams(streams: &StreamSet, grid: &WorkGrid) -> Result<()> {
    if streams.count() < grid.items() {
        return Err(Error::InsufficientStreams { needed: grid.items(), available: streams.count() });
    }
    Ok(())
}

fn resolve_npad(shape: Shape, npad: Option<usize>) -> Result<usize> {
    let (_, ncol) = shape.dims();
    match (shape, npad) {
        (_, None) => Ok(ncol),
        (Shape::Vector(_), Some(p)) if p != ncol => {
            Err(Error::InvalidShapes("padding applies to matrices only".into()))
        }
        (_, Some(p)) if p < ncol => {
            Err(Error::InvalidShapes(format!("npad {p} is smaller than ncol {ncol}")))
        }
        (_, Some(p)) => Ok(p),
    }
}

fn scatter<T: Copy + Default>(
    out: &mut MatrixBuffer<T>,
    shape: Shape,
    grid: &WorkGrid,
    kind: KernelKind,
    per_item: Vec<Vec<T>>,
) {
    for (ordinal, values) in per_item.into_iter().enumerate() {
        let cells = item_cells(shape, grid, kind, ordinal);
        debug_assert_eq!(cells.len(), values.len());
        for ((r, c), v) in cells.zip(values) {
            out.data[r * out.npad + c] = v;
        }
    }
}

/// Runs one independent task per work item.
///
/// `fill(stream, n)` must return exactly `n` values drawn from `stream`, one
/// per owned cell in drawing order. Streams beyond the grid's item count are
/// left untouched.
pub fn run_grid<T, F>(
    exec: &Executor,
    streams: &mut StreamSet,
    grid: &WorkGrid,
    kind: KernelKind,
    shape: Shape,
    npad: Option<usize>,
    fill: F,
) -> Result<MatrixBuffer<T>>
where
    T: Copy + Default + Send,
    F: Fn(&mut StreamState, usize) -> Vec<T> + Sync + Send,
{
    shape.validate()?;
    check_streams(streams, grid)?;
    let npad = resolve_npad(shape, npad)?;
    let (nrow, ncol) = shape.dims();
    let items = &mut streams.streams_mut()[..grid.items()];
    let per_item = exec.map_mut(items, |ordinal, stream| {
        let n = item_cells(shape, grid, kind, ordinal).len();
        let values = fill(stream, n);
        assert_eq!(values.len(), n, "work item {ordinal} returned the wrong number of values");
        values
    });
    let mut out = MatrixBuffer::new(nrow, ncol, npad)?;
    scatter(&mut out, shape, grid, kind, per_item);
    Ok(out)
}

/// Runs one task per pair of work items `(i, j)`, `(i, j + 1)` with `j` even.
///
/// Pairs are formed under the row-major ordinal, where they are adjacent
/// streams. Both lanes iterate as many times as the even lane owns cells;
/// `fill(even, odd, n)` returns `n` value pairs, and an odd-lane value with
/// no owned cell is discarded.
pub fn run_grid_paired<T, F>(
    exec: &Executor,
    streams: &mut StreamSet,
    grid: &WorkGrid,
    shape: Shape,
    npad: Option<usize>,
    fill: F,
) -> Result<MatrixBuffer<T>>
where
    T: Copy + Default + Send,
    F: Fn(&mut StreamState, &mut StreamState, usize) -> Vec<(T, T)> + Sync + Send,
{
    if !grid.n1.is_multiple_of(2) {
        return Err(Error::InvalidGrid(format!(
            "paired kernels need an even second dimension, got {}",
            grid.n1
        )));
    }
    shape.validate()?;
    check_streams(streams, grid)?;
    let npad = resolve_npad(shape, npad)?;
    let (nrow, ncol) = shape.dims();
    let kind = KernelKind::RowMajor;
    let items = &mut streams.streams_mut()[..grid.items()];
    let mut pairs: Vec<&mut [StreamState]> = items.chunks_mut(2).collect();
    let per_pair = exec.map_mut(&mut pairs, |p, pair| {
        let even = 2 * p;
        let n = item_cells(shape, grid, kind, even).len();
        let n_odd = item_cells(shape, grid, kind, even + 1).len();
        debug_assert!(n_odd <= n);
        let (a, b) = pair.split_at_mut(1);
        let values = fill(&mut a[0], &mut b[0], n);
        assert_eq!(values.len(), n, "work pair {p} returned the wrong number of values");
        let (first, second): (Vec<T>, Vec<T>) = values.into_iter().unzip();
        (first, second.into_iter().take(n_odd).collect::<Vec<T>>())
    });
    let per_item = per_pair.into_iter().flat_map(|(a, b)| [a, b]).collect();
    let mut out = MatrixBuffer::new(nrow, ncol, npad)?;
    scatter(&mut out, shape, grid, kind, per_item);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Creator;
    use proptest::prelude::*;

    fn grid(a: usize, b: usize) -> WorkGrid {
        WorkGrid::new(a, b).unwrap()
    }

    #[test]
    fn degenerate_grid_is_row_major() {
        let plan = element_plan(&grid(1, 1), Shape::matrix(2, 2), KernelKind::ColumnMajor);
        assert_eq!(plan, vec![vec![(0, 0), (0, 1), (1, 0), (1, 1)]]);
    }

    #[test]
    fn vector_is_one_row() {
        let plan = element_plan(&grid(2, 2), Shape::Vector(8), KernelKind::ColumnMajor);
        assert_eq!(plan[0], vec![(0, 0), (0, 2), (0, 4), (0, 6)]);
        // ordinal 2 is item (0, 1)
        assert_eq!(plan[2], vec![(0, 1), (0, 3), (0, 5), (0, 7)]);
        // items below the first grid row own nothing
        assert!(plan[1].is_empty() && plan[3].is_empty());
    }

    #[test]
    fn strided_matrix_cells() {
        let plan = element_plan(&grid(2, 2), Shape::matrix(3, 3), KernelKind::ColumnMajor);
        assert_eq!(plan[0], vec![(0, 0), (0, 2), (2, 0), (2, 2)]);
        // ordinal 1 is item (1, 0) under the column-major rule
        assert_eq!(plan[1], vec![(1, 0), (1, 2)]);
        let plan = element_plan(&grid(2, 2), Shape::matrix(3, 3), KernelKind::RowMajor);
        // ordinal 1 is item (0, 1) under the row-major rule
        assert_eq!(plan[1], vec![(0, 1), (2, 1)]);
    }

    #[test]
    fn stream_ordinals() {
        let g = grid(2, 2);
        assert_eq!(stream_index(KernelKind::ColumnMajor, &g, 1, 0, 4).unwrap(), 1);
        assert_eq!(stream_index(KernelKind::RowMajor, &g, 1, 0, 4).unwrap(), 2);
        assert_eq!(stream_index(KernelKind::ColumnMajor, &g, 0, 0, 4).unwrap(), 0);
        assert_eq!(stream_index(KernelKind::RowMajor, &g, 0, 0, 4).unwrap(), 0);
        assert!(matches!(
            stream_index(KernelKind::RowMajor, &g, 1, 1, 3),
            Err(Error::InsufficientStreams { .. })
        ));
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(matches!(WorkGrid::new(0, 4), Err(Error::InvalidGrid(_))));
    }

    fn draw_ints(s: &mut StreamState, n: usize) -> Vec<u32> {
        (0..n).map(|_| s.next_int()).collect()
    }

    #[test]
    fn advances_each_stream_by_its_cell_count() {
        let mut set = Creator::default().create_streams(6).unwrap();
        let before = set.clone();
        let g = grid(2, 2);
        run_grid(
            &Executor::serial(),
            &mut set,
            &g,
            KernelKind::ColumnMajor,
            Shape::Vector(8),
            None,
            draw_ints,
        )
        .unwrap();
        for k in [0, 2] {
            assert_eq!(set.streams()[k].current(), before.streams()[k].current().advance(4));
            assert_eq!(set.streams()[k].initial(), before.streams()[k].initial());
        }
        // items without cells and unused streams are untouched
        assert_eq!(set.streams()[1], before.streams()[1]);
        assert_eq!(set.streams()[3..], before.streams()[3..]);
    }

    #[test]
    fn insufficient_streams() {
        let mut set = Creator::default().create_streams(3).unwrap();
        let r = run_grid(
            &Executor::serial(),
            &mut set,
            &grid(2, 2),
            KernelKind::ColumnMajor,
            Shape::Vector(8),
            None,
            draw_ints,
        );
        assert!(matches!(r, Err(Error::InsufficientStreams { needed: 4, available: 3 })));
    }

    #[test]
    fn padding_is_respected() {
        let mut set = Creator::default().create_streams(4).unwrap();
        let out = run_grid(
            &Executor::serial(),
            &mut set,
            &grid(2, 2),
            KernelKind::ColumnMajor,
            Shape::matrix(3, 3),
            Some(5),
            draw_ints,
        )
        .unwrap();
        assert_eq!(out.npad(), 5);
        assert_eq!(out.raw().len(), 15);
        for r in 0..3 {
            assert_eq!(&out.raw()[r * 5 + 3..r * 5 + 5], &[0, 0]);
            assert!(out.row(r).iter().all(|&v| v >= 1));
        }
        let too_small = run_grid(
            &Executor::serial(),
            &mut set,
            &grid(2, 2),
            KernelKind::ColumnMajor,
            Shape::matrix(3, 3),
            Some(2),
            draw_ints,
        );
        assert!(matches!(too_small, Err(Error::InvalidShapes(_))));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let g = grid(5, 4);
        let shape = Shape::matrix(37, 23);
        let base = Creator::default().create_streams(24).unwrap();
        let mut reference = None;
        for threads in [1, 2, 4, 8] {
            let exec = Executor::new(threads).unwrap();
            let mut set = base.clone();
            let out = run_grid(&exec, &mut set, &g, KernelKind::ColumnMajor, shape, None, draw_ints).unwrap();
            let mut set2 = base.clone();
            let paired = run_grid_paired(&exec, &mut set2, &g, shape, None, |a, b, n| {
                (0..n).map(|_| (a.next_int(), b.next_int())).collect()
            })
            .unwrap();
            match &reference {
                None => reference = Some((out, set, paired, set2)),
                Some(r) => {
                    assert_eq!(r.0, out);
                    assert_eq!(r.1, set);
                    assert_eq!(r.2, paired);
                    assert_eq!(r.3, set2);
                }
            }
        }
    }

    #[test]
    fn paired_requires_even_width() {
        let mut set = Creator::default().create_streams(6).unwrap();
        let r =
            run_grid_paired(&Executor::serial(), &mut set, &grid(2, 3), Shape::Vector(4), None, |_, _, n| {
                vec![(0u32, 0u32); n]
            });
        assert!(matches!(r, Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn paired_odd_width_advances_both_lanes() {
        // 1x3 matrix on a 1x2 grid: lane 0 owns columns 0 and 2, lane 1 owns column 1.
        let mut set = Creator::default().create_streams(2).unwrap();
        let before = set.clone();
        run_grid_paired(&Executor::serial(), &mut set, &grid(1, 2), Shape::matrix(1, 3), None, |a, b, n| {
            (0..n).map(|_| (a.next_int(), b.next_int())).collect()
        })
        .unwrap();
        for k in 0..2 {
            assert_eq!(set.streams()[k].current(), before.streams()[k].current().advance(2));
        }
    }

    proptest! {
        #[test]
        fn plan_partitions_cells(
            n0 in 1usize..7, n1 in 1usize..7, nrow in 1usize..15, ncol in 1usize..15,
            row_major in any::<bool>(), vector in any::<bool>(),
        ) {
            let g = grid(n0, n1);
            let kind = if row_major { KernelKind::RowMajor } else { KernelKind::ColumnMajor };
            let shape = if vector { Shape::Vector(nrow * ncol) } else { Shape::matrix(nrow, ncol) };
            let (r, c) = shape.dims();
            let mut seen = vec![0u8; r * c];
            for (o, cells) in element_plan(&g, shape, kind).iter().enumerate() {
                prop_assert_eq!(cells.len(), item_cells(shape, &g, kind, o).len());
                for &(a, b) in cells {
                    seen[a * c + b] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&s| s == 1));
        }
    }
}

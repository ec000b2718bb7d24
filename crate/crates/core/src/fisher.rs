//! Monte Carlo Fisher exact test for two-way contingency tables.
//!
//! Random tables with the observed margins are drawn with Patefield's
//! sequential algorithm; the statistic is `-Σ log(n_ij!)` and the p-value
//! counts simulated tables whose statistic is at most the observed one.

use std::io::BufRead;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::grid::{Executor, WorkGrid};
use crate::rng::StreamSet;

/// Relative slack that lets simulated statistics tied with the observed one count.
pub const TIE_TOLERANCE: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    nrow: usize,
    ncol: usize,
    entries: Vec<u32>,
    row_margins: Vec<u32>,
    col_margins: Vec<u32>,
    total: u32,
}

impl ContingencyTable {
    pub fn new(rows: Vec<Vec<u32>>) -> Result<Self> {
        let nrow = rows.len();
        let ncol = rows.first().map_or(0, Vec::len);
        if nrow == 0 || ncol == 0 {
            return Err(Error::InvalidTable("table is empty".into()));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncol) {
            return Err(Error::InvalidTable(format!(
                "row {} has {} entries, expected {ncol}",
                i + 1,
                r.len()
            )));
        }
        Self::from_entries(nrow, ncol, rows.into_iter().flatten().collect())
    }

    /// Row-major entries.
    pub fn from_entries(nrow: usize, ncol: usize, entries: Vec<u32>) -> Result<Self> {
        if entries.len() != nrow * ncol || entries.is_empty() {
            return Err(Error::InvalidTable(format!(
                "{} entries cannot form a {nrow}x{ncol} table",
                entries.len()
            )));
        }
        if nrow < 2 && ncol < 2 {
            return Err(Error::InvalidTable("a 1x1 table has nothing to test".into()));
        }
        let row_margins: Vec<u64> = entries.chunks(ncol).map(|r| r.iter().map(|&v| v as u64).sum()).collect();
        let col_margins: Vec<u64> =
            (0..ncol).map(|c| (0..nrow).map(|r| entries[r * ncol + c] as u64).sum()).collect();
        let total: u64 = row_margins.iter().sum();
        if total == 0 {
            return Err(Error::InvalidTable("table total is zero".into()));
        }
        if total > i32::MAX as u64 {
            return Err(Error::InvalidTable(format!("table total {total} is too large")));
        }
        Ok(ContingencyTable {
            nrow,
            ncol,
            entries,
            row_margins: row_margins.into_iter().map(|v| v as u32).collect(),
            col_margins: col_margins.into_iter().map(|v| v as u32).collect(),
            total: total as u32,
        })
    }

    /// Parses comma-separated non-negative integers, one table row per line.
    pub fn from_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::InvalidTable(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|f| f.trim().parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidTable(format!("line {}: {e}", lineno + 1)))?;
            rows.push(row);
        }
        Self::new(rows)
    }

    pub fn nrow(&self) -> usize {
        self.nrow
    }

    pub fn ncol(&self) -> usize {
        self.ncol
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.entries[r * self.ncol + c]
    }

    pub fn row_margins(&self) -> &[u32] {
        &self.row_margins
    }

    pub fn col_margins(&self) -> &[u32] {
        &self.col_margins
    }

    pub fn total(&self) -> u32 {
        self.total
    }
}

/// `log(k!)` for `k = 0..=max`.
#[derive(Clone, Debug)]
pub struct LogFactorials(Vec<f64>);

impl LogFactorials {
    pub fn new(max: u32) -> Self {
        LogFactorials((0..=max).map(log_factorial).collect())
    }

    #[inline]
    pub fn get(&self, k: u32) -> f64 {
        self.0[k as usize]
    }

    fn at(&self, k: i64) -> f64 {
        self.0[k as usize]
    }

    /// `-Σ log(n!)` over `entries`.
    #[inline]
    pub fn statistic(&self, entries: &[u32]) -> f64 {
        -entries.iter().map(|&n| self.0[n as usize]).sum::<f64>()
    }
}

fn log_factorial(n: u32) -> f64 {
    if n < 2 {
        0.0
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// `-Σ log(n_ij!)` of a table.
pub fn logfact_sum(table: &ContingencyTable) -> f64 {
    -table.entries.iter().map(|&n| log_factorial(n)).sum::<f64>()
}

/// Draws random tables with fixed margins (Patefield's algorithm).
///
/// Entries are sampled row by row, left to right, each from its
/// hypergeometric conditional given the entries already drawn. The last
/// row and column are implied, so an `I x J` table takes exactly
/// `(I - 1)(J - 1)` uniforms.
#[derive(Clone, Debug)]
pub struct TableSampler {
    rows: Vec<i64>,
    cols: Vec<i64>,
    total: i64,
    logfact: LogFactorials,
    col_left: Vec<i64>,
}

impl TableSampler {
    pub fn new(row_margins: &[u32], col_margins: &[u32]) -> Result<Self> {
        if row_margins.is_empty() || col_margins.is_empty() {
            return Err(Error::InvalidMargins("margins must be non-empty".into()));
        }
        let rs: u64 = row_margins.iter().map(|&v| v as u64).sum();
        let cs: u64 = col_margins.iter().map(|&v| v as u64).sum();
        if rs != cs {
            return Err(Error::InvalidMargins(format!("row total {rs} differs from column total {cs}")));
        }
        if rs > i32::MAX as u64 {
            return Err(Error::InvalidMargins(format!("total {rs} is too large")));
        }
        Ok(TableSampler {
            rows: row_margins.iter().map(|&v| v as i64).collect(),
            cols: col_margins.iter().map(|&v| v as i64).collect(),
            total: rs as i64,
            logfact: LogFactorials::new(rs as u32),
            col_left: vec![0; col_margins.len()],
        })
    }

    pub fn nrow(&self) -> usize {
        self.rows.len()
    }

    pub fn ncol(&self) -> usize {
        self.cols.len()
    }

    pub fn logfact(&self) -> &LogFactorials {
        &self.logfact
    }

    /// Uniforms consumed per table.
    pub fn uniforms_per_table(&self) -> usize {
        (self.nrow() - 1) * (self.ncol() - 1)
    }

    /// Writes a random table into `out` (row-major, `nrow * ncol` cells).
    pub fn sample_into<F: FnMut() -> f64>(&mut self, mut uniform: F, out: &mut [u32]) {
        let (nr, nc) = (self.rows.len(), self.cols.len());
        assert_eq!(out.len(), nr * nc);
        self.col_left.copy_from_slice(&self.cols);
        let mut below = self.total;
        for l in 0..nr - 1 {
            let mut row_left = self.rows[l];
            // Cells not yet sampled in rows l.. and columns m..
            let mut block = below;
            below -= row_left;
            for m in 0..nc - 1 {
                let col = self.col_left[m];
                let u = uniform();
                let n = if block == 0 {
                    0
                } else {
                    hypergeometric_inverse(&self.logfact, row_left, col, block, u)
                };
                block -= col;
                out[l * nc + m] = n as u32;
                row_left -= n;
                self.col_left[m] -= n;
            }
            out[l * nc + nc - 1] = row_left as u32;
        }
        let last = (nr - 1) * nc;
        let mut rest = self.rows[nr - 1];
        for m in 0..nc - 1 {
            out[last + m] = self.col_left[m] as u32;
            rest -= self.col_left[m];
        }
        out[last + nc - 1] = rest as u32;
    }
}

/// Inverts the CDF of the number of draws from a `col`-sized class when
/// `draws` items are taken without replacement from `pool`, searching outward
/// from the mean.
fn hypergeometric_inverse(lf: &LogFactorials, draws: i64, col: i64, pool: i64, u: f64) -> i64 {
    let rest = pool - draws;
    let other = pool - col;
    let shift = rest - col;
    let lo = (-shift).max(0);
    let hi = draws.min(col);
    if lo >= hi {
        return lo;
    }
    let start = ((draws as f64 * (col as f64 / pool as f64) + 0.5) as i64).clamp(lo, hi);
    let p0 = (lf.at(draws) + lf.at(rest) + lf.at(other) + lf.at(col)
        - lf.at(pool)
        - lf.at(start)
        - lf.at(col - start)
        - lf.at(draws - start)
        - lf.at(shift + start))
    .exp();

    let mut target = u;
    loop {
        let mut sum = p0;
        if sum >= target {
            return start;
        }
        let (mut up, mut p_up, mut down, mut p_down) = (start, p0, start, p0);
        loop {
            let mut moved = false;
            if up < hi {
                p_up *= ((col - up) * (draws - up)) as f64 / ((up + 1) * (shift + up + 1)) as f64;
                up += 1;
                sum += p_up;
                if sum >= target {
                    return up;
                }
                moved = true;
            }
            if down > lo {
                p_down *= (down * (shift + down)) as f64 / ((col - down + 1) * (draws - down + 1)) as f64;
                down -= 1;
                sum += p_down;
                if sum >= target {
                    return down;
                }
                moved = true;
            }
            if !moved {
                break;
            }
        }
        // Rounding left the total mass just below u; rescale and search again.
        target = u * sum;
    }
}

/// One random table with the given margins.
pub fn rcont2<F: FnMut() -> f64>(row_margins: &[u32], col_margins: &[u32], uniform: F) -> Result<Vec<u32>> {
    let mut sampler = TableSampler::new(row_margins, col_margins)?;
    let mut out = vec![0; row_margins.len() * col_margins.len()];
    sampler.sample_into(uniform, &mut out);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FisherResult {
    /// Statistic of the observed table.
    pub threshold: f64,
    /// Replicates actually run: the request rounded up to a multiple of the item count.
    pub sim_num: u64,
    /// Replicates with statistic at most the threshold.
    pub counts: u64,
    pub p_value: f64,
    /// All simulated statistics, work item 0's replicates first.
    pub statistics: Option<Vec<f64>>,
}

/// Replicates run for a request of `n`: `ceil(n / items) * items`.
pub fn sim_num(n: u64, grid: &WorkGrid) -> u64 {
    let items = grid.items() as u64;
    n.div_ceil(items) * items
}

/// Monte Carlo Fisher test; work item `k` runs its share of replicates on stream `k`.
pub fn fisher_sim(
    exec: &Executor,
    table: &ContingencyTable,
    n: u64,
    streams: &mut StreamSet,
    grid: &WorkGrid,
    return_stats: bool,
) -> Result<FisherResult> {
    if n < 1 {
        return Err(Error::InvalidArgument("replicate count must be at least 1".into()));
    }
    if streams.count() < grid.items() {
        return Err(Error::InsufficientStreams { needed: grid.items(), available: streams.count() });
    }
    let sampler = TableSampler::new(&table.row_margins, &table.col_margins)?;
    let threshold = sampler.logfact().statistic(&table.entries);
    let cutoff = threshold + TIE_TOLERANCE * threshold.abs();
    let sim_num = sim_num(n, grid);
    let per_item = (sim_num / grid.items() as u64) as usize;
    let cells = table.entries.len();

    let items = &mut streams.streams_mut()[..grid.items()];
    let results = exec.map_mut(items, |_, stream| {
        let mut sampler = sampler.clone();
        let mut buf = vec![0u32; cells];
        let mut counts = 0u64;
        let mut stats = if return_stats { Vec::with_capacity(per_item) } else { Vec::new() };
        for _ in 0..per_item {
            sampler.sample_into(|| stream.next_uniform(), &mut buf);
            let s = sampler.logfact().statistic(&buf);
            if s <= cutoff {
                counts += 1;
            }
            if return_stats {
                stats.push(s);
            }
        }
        (counts, stats)
    });

    let counts = results.iter().map(|(c, _)| c).sum::<u64>();
    let statistics = return_stats.then(|| results.into_iter().flat_map(|(_, s)| s).collect::<Vec<f64>>());
    Ok(FisherResult {
        threshold,
        sim_num,
        counts,
        p_value: (1 + counts) as f64 / (sim_num + 1) as f64,
        statistics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Creator;

    fn table(rows: &[&[u32]]) -> ContingencyTable {
        ContingencyTable::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    // log(n!) by direct summation of logs of the factors.
    fn logfact_direct(n: u32) -> f64 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    }

    #[test]
    fn statistic_of_zero_one_tables_is_zero() {
        assert_eq!(logfact_sum(&table(&[&[0, 1], &[1, 1]])), 0.0);
    }

    #[test]
    fn statistic_small_table() {
        let t = table(&[&[2, 3], &[4, 5]]);
        let expected = -(logfact_direct(2) + logfact_direct(3) + logfact_direct(4) + logfact_direct(5));
        assert!((logfact_sum(&t) - expected).abs() < 1e-12);
        assert!((logfact_sum(&t) - (-10.450452222)).abs() < 1e-8);
        let lf = LogFactorials::new(t.total());
        assert!((lf.statistic(t.entries()) - expected).abs() < 1e-12);
    }

    #[test]
    fn log_factorial_accuracy() {
        let lf = LogFactorials::new(20_000);
        for n in [0u32, 1, 2, 10, 170, 1000, 20_000] {
            let direct = logfact_direct(n);
            let err = (lf.get(n) - direct).abs();
            assert!(err <= 1e-13 * direct.max(1.0), "n={n}: {err}");
        }
    }

    #[test]
    fn table_validation() {
        assert!(matches!(ContingencyTable::new(vec![vec![3]]), Err(Error::InvalidTable(_))));
        assert!(matches!(ContingencyTable::new(vec![vec![1, 2], vec![3]]), Err(Error::InvalidTable(_))));
        assert!(matches!(ContingencyTable::new(vec![vec![0, 0], vec![0, 0]]), Err(Error::InvalidTable(_))));
        let t = ContingencyTable::from_csv("1,2,3\n4,5,6\n".as_bytes()).unwrap();
        assert_eq!(t.row_margins(), &[6, 15]);
        assert_eq!(t.col_margins(), &[5, 7, 9]);
        assert_eq!(t.total(), 21);
        assert!(ContingencyTable::from_csv("1,2\n3,x\n".as_bytes()).is_err());
        assert!(ContingencyTable::from_csv("1,2\n3\n".as_bytes()).is_err());
    }

    #[test]
    fn single_row_is_forced() {
        let mut used = 0;
        let out = rcont2(&[10], &[3, 3, 4], || {
            used += 1;
            0.5
        })
        .unwrap();
        assert_eq!(out, vec![3, 3, 4]);
        assert_eq!(used, 0);
    }

    #[test]
    fn margin_mismatch() {
        assert!(matches!(rcont2(&[3, 4], &[3, 3], || 0.5), Err(Error::InvalidMargins(_))));
    }

    #[test]
    fn consumes_exact_uniform_count_and_keeps_margins() {
        let rows = [20, 0, 13, 7];
        let cols = [5, 0, 30, 5];
        let mut sampler = TableSampler::new(&rows, &cols).unwrap();
        let mut stream = Creator::default().create_streams(1).unwrap().into_streams()[0];
        let mut out = vec![0; 16];
        for _ in 0..2000 {
            let mut used = 0;
            sampler.sample_into(
                || {
                    used += 1;
                    stream.next_uniform()
                },
                &mut out,
            );
            assert_eq!(used, 9);
            for (r, &m) in rows.iter().enumerate() {
                assert_eq!(out[r * 4..r * 4 + 4].iter().sum::<u32>(), m);
            }
            for (c, &m) in cols.iter().enumerate() {
                assert_eq!((0..4).map(|r| out[r * 4 + c]).sum::<u32>(), m);
            }
        }
    }

    #[test]
    fn inversion_extremes() {
        let lf = LogFactorials::new(20);
        // 10 draws from 20 with 10 marked: support 0..=10
        assert_eq!(hypergeometric_inverse(&lf, 10, 10, 20, 1e-12), 5);
        let v = hypergeometric_inverse(&lf, 10, 10, 20, 1.0 - 1e-16);
        assert!((0..=10).contains(&v));
    }

    #[test]
    fn sim_num_rounding() {
        let g = WorkGrid::new(256, 64).unwrap();
        assert_eq!(sim_num(1_000_000, &g), 1_015_808);
        assert_eq!(sim_num(10_000_000, &g), 10_010_624);
        assert_eq!(sim_num(16384, &g), 16384);
    }

    #[test]
    fn one_replicate_per_item() {
        let t = table(&[&[3, 1], &[1, 3]]);
        let g = WorkGrid::new(2, 2).unwrap();
        let mut set = Creator::default().create_streams(4).unwrap();
        let before = set.clone();
        let r = fisher_sim(&Executor::serial(), &t, 4, &mut set, &g, true).unwrap();
        assert_eq!(r.sim_num, 4);
        assert_eq!(r.statistics.as_ref().unwrap().len(), 4);
        assert!((r.p_value - (1 + r.counts) as f64 / 5.0).abs() < 1e-15);
        for k in 0..4 {
            assert_eq!(set.streams()[k].current(), before.streams()[k].current().advance(1));
        }
        assert!(matches!(
            fisher_sim(&Executor::serial(), &t, 0, &mut set, &g, false),
            Err(Error::InvalidArgument(_))
        ));
    }
}

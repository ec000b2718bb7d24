use statrs::function::gamma::gamma;

use super::bessel::bessel_k;
use super::BatchedMatrix;
use crate::error::{Error, Result};
use crate::grid::Executor;

/// Parameters of a geometrically anisotropic Matérn covariance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaternParams {
    /// Smoothness κ > 0.
    pub shape: f64,
    /// Range φ > 0, in coordinate units.
    pub range: f64,
    /// Marginal variance σ² > 0.
    pub variance: f64,
    /// ω ≥ 1; 1 is isotropic.
    pub aniso_ratio: f64,
    /// θ in radians.
    pub aniso_angle: f64,
}

impl MaternParams {
    pub fn new(shape: f64, range: f64, variance: f64, aniso_ratio: f64, aniso_angle: f64) -> Result<Self> {
        let p = MaternParams { shape, range, variance, aniso_ratio, aniso_angle };
        p.validate()?;
        Ok(p)
    }

    pub fn isotropic(shape: f64, range: f64, variance: f64) -> Result<Self> {
        Self::new(shape, range, variance, 1.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("shape", self.shape)?;
        positive("range", self.range)?;
        positive("variance", self.variance)?;
        if !(self.aniso_ratio >= 1.0 && self.aniso_ratio.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "anisoRatio must be at least 1, got {}",
                self.aniso_ratio
            )));
        }
        if !self.aniso_angle.is_finite() {
            return Err(Error::InvalidParams("anisoAngleRadians must be finite".into()));
        }
        if self.shape > 100.0 {
            return Err(Error::InvalidParams(format!("shape {} is too large", self.shape)));
        }
        Ok(())
    }
}

/// Regular grid of cell centres. Cells are enumerated row by row from the
/// top (northernmost) row, left to right.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub ncell_x: usize,
    pub ncell_y: usize,
    pub cell_size: f64,
    /// Lower-left corner.
    pub origin: (f64, f64),
}

impl GridSpec {
    pub fn new(ncell_x: usize, ncell_y: usize, cell_size: f64, origin: (f64, f64)) -> Result<Self> {
        if ncell_x == 0 || ncell_y == 0 {
            return Err(Error::InvalidArgument(format!("grid {ncell_y}x{ncell_x} is empty")));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::InvalidArgument(format!("cell size {cell_size} must be positive")));
        }
        Ok(GridSpec { ncell_x, ncell_y, cell_size, origin })
    }

    pub fn cells(&self) -> usize {
        self.ncell_x * self.ncell_y
    }

    /// Centre of cell `(row, col)`; row 0 is the top row.
    pub fn centre(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin.0 + (col as f64 + 0.5) * self.cell_size,
            self.origin.1 + ((self.ncell_y - 1 - row) as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn coords(&self) -> Vec<(f64, f64)> {
        (0..self.ncell_y)
            .flat_map(|r| (0..self.ncell_x).map(move |c| (r, c)))
            .map(|(r, c)| self.centre(r, c))
            .collect()
    }
}

/// A Matérn covariance function with its constants evaluated once.
///
/// `C(h) = σ² 2^(1-κ)/Γ(κ) s^κ K_κ(s)` with `s = √(8κ) |d| / φ`, where
/// `d = diag(1, ω) R(θ) h` and `R(θ)` is the counter-clockwise rotation.
#[derive(Clone, Copy, Debug)]
pub struct Matern {
    params: MaternParams,
    prefactor: f64,
    scale: f64,
    cos: f64,
    sin: f64,
}

impl Matern {
    pub fn new(params: MaternParams) -> Result<Self> {
        params.validate()?;
        let k = params.shape;
        Ok(Matern {
            params,
            prefactor: params.variance * 2f64.powf(1.0 - k) / gamma(k),
            scale: (8.0 * k).sqrt() / params.range,
            cos: params.aniso_angle.cos(),
            sin: params.aniso_angle.sin(),
        })
    }

    pub fn params(&self) -> &MaternParams {
        &self.params
    }

    /// Length of the rotated and stretched lag.
    pub fn distance(&self, dx: f64, dy: f64) -> f64 {
        let rx = self.cos * dx - self.sin * dy;
        let ry = self.params.aniso_ratio * (self.sin * dx + self.cos * dy);
        rx.hypot(ry)
    }

    /// Covariance at lag `(dx, dy)`; exactly σ² at zero distance.
    pub fn cov(&self, dx: f64, dy: f64) -> f64 {
        self.cov_at_distance(self.distance(dx, dy))
    }

    pub fn cov_at_distance(&self, dist: f64) -> f64 {
        if dist == 0.0 {
            return self.params.variance;
        }
        let s = self.scale * dist;
        let k = bessel_k(self.params.shape, s).expect("positive order and argument");
        if k == 0.0 {
            return 0.0;
        }
        self.prefactor * s.powf(self.params.shape) * k
    }

    pub fn correlation(&self, dx: f64, dy: f64) -> f64 {
        self.cov(dx, dy) / self.params.variance
    }
}

fn check_params(params: &[MaternParams]) -> Result<Vec<Matern>> {
    if params.is_empty() {
        return Err(Error::InvalidParams("no parameter rows".into()));
    }
    params.iter().map(|p| Matern::new(*p)).collect()
}

/// One covariance block per parameter row over arbitrary points, stacked by row.
pub fn matern_cov(exec: &Executor, params: &[MaternParams], coords: &[(f64, f64)]) -> Result<BatchedMatrix> {
    let models = check_params(params)?;
    let n = coords.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no coordinates".into()));
    }
    let mut out = BatchedMatrix::zeros(models.len(), n);
    let mut blocks: Vec<&mut [f64]> = out.blocks_mut().collect();
    exec.map_mut(&mut blocks, |b, block| {
        let model = &models[b];
        for i in 0..n {
            block[i * n + i] = model.params.variance;
            for j in i + 1..n {
                let v = model.cov(coords[i].0 - coords[j].0, coords[i].1 - coords[j].1);
                block[i * n + j] = v;
            }
        }
        mirror_upper(block, n);
    });
    Ok(out)
}

/// Covariance blocks over the cells of a regular grid.
///
/// Stationarity means each distinct lag is evaluated once.
pub fn matern_cov_grid(exec: &Executor, params: &[MaternParams], grid: &GridSpec) -> Result<BatchedMatrix> {
    let models = check_params(params)?;
    let (nx, ny) = (grid.ncell_x, grid.ncell_y);
    let n = grid.cells();
    let (lx, ly) = (2 * nx - 1, 2 * ny - 1);
    let mut out = BatchedMatrix::zeros(models.len(), n);
    let mut blocks: Vec<&mut [f64]> = out.blocks_mut().collect();
    exec.map_mut(&mut blocks, |b, block| {
        let model = &models[b];
        // lags[(drow + ny - 1) * lx + dcol + nx - 1] for row offset drow, column offset dcol
        let mut lags = vec![0.0; lx * ly];
        for dr in 0..ly {
            for dc in 0..lx {
                let drow = dr as f64 - (ny - 1) as f64;
                let dcol = dc as f64 - (nx - 1) as f64;
                // rows count downwards, so a positive row offset is a negative y lag
                lags[dr * lx + dc] = model.cov(dcol * grid.cell_size, -drow * grid.cell_size);
            }
        }
        for i in 0..n {
            let (ri, ci) = (i / nx, i % nx);
            block[i * n + i] = model.params.variance;
            for j in i + 1..n {
                let (rj, cj) = (j / nx, j % nx);
                let dr = ri + ny - 1 - rj;
                let dc = ci + nx - 1 - cj;
                block[i * n + j] = lags[dr * lx + dc];
            }
        }
        mirror_upper(block, n);
    });
    Ok(out)
}

fn mirror_upper(block: &mut [f64], n: usize) {
    for i in 0..n {
        for j in 0..i {
            block[i * n + j] = block[j * n + i];
        }
    }
}

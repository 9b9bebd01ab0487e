//! Independent brute-force references for tests and acceptance checks: grid
//! normalization of energy densities, finite-difference gradients, closed-form
//! estimators, and distribution distances.
//!
//! Nothing here touches the gradient tape; every function works from plain
//! closures and slices so it stays an independent check on the rest of the
//! crate.

use crate::error::{Error, Result};

/// A normalized probability histogram over a 1-D interval.
#[derive(Clone, Debug)]
pub struct Grid1D {
    pub lo: f64,
    pub hi: f64,
    pub masses: Vec<f64>,
}

impl Grid1D {
    pub fn cells(&self) -> usize {
        self.masses.len()
    }

    pub fn cell_width(&self) -> f64 {
        (self.hi - self.lo) / self.cells() as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.cell_width()
    }

    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if x < self.lo || x >= self.hi {
            return None;
        }
        let i = ((x - self.lo) / self.cell_width()) as usize;
        Some(i.min(self.cells() - 1))
    }

    pub fn mean(&self) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .map(|(i, m)| m * self.center(i))
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.masses
            .iter()
            .enumerate()
            .map(|(i, m)| m * (self.center(i) - mu).powi(2))
            .sum()
    }

    pub fn argmax_center(&self) -> f64 {
        let (i, _) = self
            .masses
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        self.center(i)
    }
}

/// A normalized probability histogram over a 2-D box, row-major in (x, y).
#[derive(Clone, Debug)]
pub struct Grid2D {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub cells: [usize; 2],
    pub masses: Vec<f64>,
}

impl Grid2D {
    pub fn cell_widths(&self) -> [f64; 2] {
        [
            (self.hi[0] - self.lo[0]) / self.cells[0] as f64,
            (self.hi[1] - self.lo[1]) / self.cells[1] as f64,
        ]
    }

    pub fn center(&self, ix: usize, iy: usize) -> [f64; 2] {
        let w = self.cell_widths();
        [
            self.lo[0] + (ix as f64 + 0.5) * w[0],
            self.lo[1] + (iy as f64 + 0.5) * w[1],
        ]
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<usize> {
        if x < self.lo[0] || x >= self.hi[0] || y < self.lo[1] || y >= self.hi[1] {
            return None;
        }
        let w = self.cell_widths();
        let ix = (((x - self.lo[0]) / w[0]) as usize).min(self.cells[0] - 1);
        let iy = (((y - self.lo[1]) / w[1]) as usize).min(self.cells[1] - 1);
        Some(ix * self.cells[1] + iy)
    }
}

/// Default resolutions: plenty of quadrature headroom for every tolerance in
/// the test suite.
pub const DEFAULT_CELLS_1D: usize = 4096;
pub const DEFAULT_CELLS_2D: usize = 256;

const BOUNDARY_MASS_LIMIT: f64 = 1e-6;

/// Normalizes `exp(-beta * energy)` over a 1-D grid.
///
/// Errors if the boundary cells carry noticeable mass, i.e. the grid does not
/// cover the effective support.
pub fn grid_ebm_density_1d(
    energy: impl Fn(f64) -> f64,
    beta: f64,
    lo: f64,
    hi: f64,
    cells: usize,
) -> Result<Grid1D> {
    let mut grid = Grid1D {
        lo,
        hi,
        masses: vec![0.0; cells],
    };
    // Subtract the minimum energy before exponentiating so beta*E around its
    // minimum stays in range.
    let energies: Vec<f64> = (0..cells).map(|i| energy(grid.center(i))).collect();
    let emin = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for (i, e) in energies.iter().enumerate() {
        let m = (-beta * (e - emin)).exp();
        grid.masses[i] = m;
        total += m;
    }
    for m in grid.masses.iter_mut() {
        *m /= total;
    }
    let boundary = grid.masses[0] + grid.masses[cells - 1];
    if boundary >= BOUNDARY_MASS_LIMIT {
        return Err(Error::GridTooSmall {
            boundary_mass: boundary,
        });
    }
    Ok(grid)
}

/// Normalizes `exp(-beta * energy)` over a 2-D grid.
pub fn grid_ebm_density_2d(
    energy: impl Fn(f64, f64) -> f64,
    beta: f64,
    lo: [f64; 2],
    hi: [f64; 2],
    cells: [usize; 2],
) -> Result<Grid2D> {
    let mut grid = Grid2D {
        lo,
        hi,
        cells,
        masses: vec![0.0; cells[0] * cells[1]],
    };
    let mut energies = vec![0.0; cells[0] * cells[1]];
    let mut emin = f64::INFINITY;
    for ix in 0..cells[0] {
        for iy in 0..cells[1] {
            let c = grid.center(ix, iy);
            let e = energy(c[0], c[1]);
            energies[ix * cells[1] + iy] = e;
            emin = emin.min(e);
        }
    }
    let mut total = 0.0;
    for (m, e) in grid.masses.iter_mut().zip(&energies) {
        *m = (-beta * (e - emin)).exp();
        total += *m;
    }
    for m in grid.masses.iter_mut() {
        *m /= total;
    }
    let mut boundary = 0.0;
    for ix in 0..cells[0] {
        for iy in 0..cells[1] {
            if ix == 0 || iy == 0 || ix == cells[0] - 1 || iy == cells[1] - 1 {
                boundary += grid.masses[ix * cells[1] + iy];
            }
        }
    }
    if boundary >= BOUNDARY_MASS_LIMIT {
        return Err(Error::GridTooSmall {
            boundary_mass: boundary,
        });
    }
    Ok(grid)
}

/// Total-variation distance between two mass vectors of equal length.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// TV distance between an empirical sample and a 1-D grid distribution.
/// Out-of-grid samples are binned into an implicit extra cell that the grid
/// assigns zero mass, so diverged samples count fully against the distance.
pub fn empirical_tv_1d(samples: &[f64], grid: &Grid1D) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput { op: "empirical_tv" });
    }
    let mut counts = vec![0.0; grid.cells() + 1];
    for &s in samples {
        match grid.cell_of(s) {
            Some(i) => counts[i] += 1.0,
            None => counts[grid.cells()] += 1.0,
        }
    }
    let n = samples.len() as f64;
    let mut tv = 0.0;
    for i in 0..grid.cells() {
        tv += (counts[i] / n - grid.masses[i]).abs();
    }
    tv += counts[grid.cells()] / n;
    Ok(0.5 * tv)
}

/// TV distance between 2-D samples and a grid distribution.
pub fn empirical_tv_2d(samples: &[[f64; 2]], grid: &Grid2D) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput { op: "empirical_tv" });
    }
    let ncells = grid.masses.len();
    let mut counts = vec![0.0; ncells + 1];
    for s in samples {
        match grid.cell_of(s[0], s[1]) {
            Some(i) => counts[i] += 1.0,
            None => counts[ncells] += 1.0,
        }
    }
    let n = samples.len() as f64;
    let mut tv = 0.0;
    for i in 0..ncells {
        tv += (counts[i] / n - grid.masses[i]).abs();
    }
    tv += counts[ncells] / n;
    Ok(0.5 * tv)
}

/// Central-difference gradient of a scalar function.
pub fn finite_diff_grad(
    f: impl Fn(&[f64]) -> f64,
    at: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    if h <= 0.0 {
        return Err(Error::InvalidConfig(format!("finite difference step {h}")));
    }
    let mut grad = vec![0.0; at.len()];
    let mut point = at.to_vec();
    for i in 0..at.len() {
        point[i] = at[i] + h;
        let fp = f(&point);
        point[i] = at[i] - h;
        let fm = f(&point);
        point[i] = at[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite {
                op: "finite_diff_grad",
            });
        }
        grad[i] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

/// Sample mean and biased (1/n) per-axis variance: the Gaussian MLE.
pub fn gaussian_mle_closed_form(samples: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    if samples.len() < 2 {
        return Err(Error::EmptyInput {
            op: "gaussian_mle_closed_form",
        });
    }
    let dim = samples[0].len();
    let n = samples.len() as f64;
    let mut mean = vec![0.0; dim];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut var = vec![0.0; dim];
    for s in samples {
        for ((v, x), m) in var.iter_mut().zip(s).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    for v in var.iter_mut() {
        *v /= n;
    }
    Ok((mean, var))
}

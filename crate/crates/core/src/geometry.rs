//! Antenna array construction and link geometry.
//!
//! Arrays are stored as flat position lists in row-major order over the
//! `(y-index, x-index)` grid: element `k` sits at grid cell
//! `(k / cols, k % cols)`. Transmit and receive arrays use the same order,
//! which is what [`crate::channel::StructureMap`] relies on.

use alloc::vec::Vec;

use nalgebra::{DMatrix, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};

pub type Vec3 = Vector3<f64>;

const UNIT_TOL: f64 = 1e-9;

/// Grid dimensions of a planar array, `rows` along the first (y) axis and
/// `cols` along the second (x) axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
}

impl GridShape {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid cell `(row, col)` of flat element index `k`.
    pub fn cell(&self, k: usize) -> (usize, usize) {
        (k / self.cols, k % self.cols)
    }

    pub fn is_linear(&self) -> bool {
        self.rows == 1 || self.cols == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<Vec3>,
    grid: GridShape,
}

impl ArrayGeometry {
    /// Wraps explicit positions. The grid must account for every position.
    pub fn from_positions(positions: Vec<Vec3>, grid: GridShape) -> Result<Self> {
        if grid.is_empty() || positions.len() != grid.len() {
            return Err(invalid(
                "positions",
                alloc::format!(
                    "{} positions do not fill a {}x{} grid",
                    positions.len(),
                    grid.rows,
                    grid.cols
                ),
            ));
        }
        Ok(Self { positions, grid })
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn grid(&self) -> GridShape {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Same grid, every position shifted by `offset`.
    pub fn translated(&self, offset: &Vec3) -> Self {
        Self {
            positions: self.positions.iter().map(|p| p + offset).collect(),
            grid: self.grid,
        }
    }
}

fn check_unit(name: &'static str, v: &Vec3) -> Result<()> {
    if (v.norm() - 1.0).abs() > UNIT_TOL {
        return Err(invalid(name, alloc::format!("norm {} is not 1", v.norm())));
    }
    Ok(())
}

/// Uniform linear array of `n` elements spaced `spacing` apart along `axis`,
/// centred on `center`. The grid shape is `(n, 1)`.
pub fn build_ula(n: usize, spacing: f64, axis: Vec3, center: Vec3) -> Result<ArrayGeometry> {
    if n == 0 {
        return Err(invalid("n", "array needs at least one element"));
    }
    if !(spacing > 0.0) {
        return Err(invalid("spacing", "must be positive"));
    }
    check_unit("axis", &axis)?;
    let half = (n as f64 - 1.0) / 2.0;
    let positions = (0..n)
        .map(|k| center + axis * ((k as f64 - half) * spacing))
        .collect();
    ArrayGeometry::from_positions(positions, GridShape::new(n, 1))
}

/// Uniform rectangular array in the plane spanned by `axis_y` and `axis_x`,
/// row-major over `(y, x)` and centred on `center`.
pub fn build_ura(
    rows: usize,
    cols: usize,
    spacing_y: f64,
    spacing_x: f64,
    axis_y: Vec3,
    axis_x: Vec3,
    center: Vec3,
) -> Result<ArrayGeometry> {
    if rows == 0 || cols == 0 {
        return Err(invalid("grid", "both dimensions must be at least one"));
    }
    if !(spacing_y > 0.0) || !(spacing_x > 0.0) {
        return Err(invalid("spacing", "must be positive"));
    }
    check_unit("axis_y", &axis_y)?;
    check_unit("axis_x", &axis_x)?;
    if axis_y.dot(&axis_x).abs() > UNIT_TOL {
        return Err(invalid("axes", "plane axes are not orthogonal"));
    }
    let half_y = (rows as f64 - 1.0) / 2.0;
    let half_x = (cols as f64 - 1.0) / 2.0;
    let mut positions = Vec::with_capacity(rows * cols);
    for iy in 0..rows {
        for ix in 0..cols {
            positions.push(
                center
                    + axis_y * ((iy as f64 - half_y) * spacing_y)
                    + axis_x * ((ix as f64 - half_x) * spacing_x),
            );
        }
    }
    ArrayGeometry::from_positions(positions, GridShape::new(rows, cols))
}

/// Element spacing `sqrt(wavelength * distance / n)` of the orthogonal-channel
/// symmetric uniform array design, applied per array dimension.
pub fn optimal_spacing(distance: f64, wavelength: f64, n: usize) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(invalid("distance", "must be positive"));
    }
    if !(wavelength > 0.0) {
        return Err(invalid("wavelength", "must be positive"));
    }
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    Ok(libm::sqrt(wavelength * distance / n as f64))
}

/// Transmit and receive arrays plus the carrier and link parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub tx: ArrayGeometry,
    pub rx: ArrayGeometry,
    /// Broadside separation of the array centres in metres.
    pub distance: f64,
    pub wavelength: f64,
    pub symbol_rate: f64,
}

impl LinkConfig {
    pub fn new(
        tx: ArrayGeometry,
        rx: ArrayGeometry,
        distance: f64,
        wavelength: f64,
        symbol_rate: f64,
    ) -> Result<Self> {
        if !(distance > 0.0) {
            return Err(invalid("distance", "must be positive"));
        }
        if !(wavelength > 0.0) {
            return Err(invalid("wavelength", "must be positive"));
        }
        if !(symbol_rate > 0.0) {
            return Err(invalid("symbol_rate", "must be positive"));
        }
        Ok(Self {
            tx,
            rx,
            distance,
            wavelength,
            symbol_rate,
        })
    }

    /// Two identical `rows x cols` arrays facing each other along the z axis:
    /// the transmitter centred at the origin, the receiver at `(0, 0, distance)`,
    /// both spanning the y (rows) and x (cols) directions.
    pub fn symmetric(
        grid: GridShape,
        spacing_y: f64,
        spacing_x: f64,
        distance: f64,
        wavelength: f64,
        symbol_rate: f64,
    ) -> Result<Self> {
        let ay = Vec3::new(0.0, 1.0, 0.0);
        let ax = Vec3::new(1.0, 0.0, 0.0);
        let tx = build_ura(grid.rows, grid.cols, spacing_y, spacing_x, ay, ax, Vec3::zeros())?;
        let rx = build_ura(
            grid.rows,
            grid.cols,
            spacing_y,
            spacing_x,
            ay,
            ax,
            Vec3::new(0.0, 0.0, distance),
        )?;
        Self::new(tx, rx, distance, wavelength, symbol_rate)
    }

    /// [`LinkConfig::symmetric`] with each dimension spaced by
    /// [`optimal_spacing`] for its own element count.
    pub fn optimal_symmetric(
        grid: GridShape,
        distance: f64,
        wavelength: f64,
        symbol_rate: f64,
    ) -> Result<Self> {
        let dy = optimal_spacing(distance, wavelength, grid.rows)?;
        let dx = optimal_spacing(distance, wavelength, grid.cols)?;
        Self::symmetric(grid, dy, dx, distance, wavelength, symbol_rate)
    }

    pub fn with_arrays(&self, tx: ArrayGeometry, rx: ArrayGeometry) -> Self {
        Self {
            tx,
            rx,
            ..self.clone()
        }
    }

    /// Receiver and transmitter roles exchanged.
    pub fn reversed(&self) -> Self {
        self.with_arrays(self.rx.clone(), self.tx.clone())
    }
}

/// Euclidean distances, receive elements along rows and transmit elements
/// along columns.
pub fn pairwise_distances(link: &LinkConfig) -> DMatrix<f64> {
    let rx = link.rx.positions();
    let tx = link.tx.positions();
    DMatrix::from_fn(rx.len(), tx.len(), |m, n| (rx[m] - tx[n]).norm())
}

/// Adds independent zero-mean Gaussian offsets with standard deviation
/// `sigma` to every coordinate of every element.
pub fn perturb_positions<R: Rng + ?Sized>(
    geometry: &ArrayGeometry,
    sigma: f64,
    rng: &mut R,
) -> Result<ArrayGeometry> {
    if !(sigma >= 0.0) {
        return Err(invalid("sigma", "must be non-negative"));
    }
    if sigma == 0.0 {
        return Ok(geometry.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|_| invalid("sigma", "not finite"))?;
    let positions = geometry
        .positions
        .iter()
        .map(|p| {
            let dx = normal.sample(rng);
            let dy = normal.sample(rng);
            let dz = normal.sample(rng);
            p + Vec3::new(dx, dy, dz)
        })
        .collect();
    Ok(ArrayGeometry {
        positions,
        grid: geometry.grid,
    })
}

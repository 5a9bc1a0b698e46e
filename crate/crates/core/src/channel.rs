//! LOS channel coefficients, joint phase terms and the equal-entry structure
//! of symmetric array links.

use core::f64::consts::PI;

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::geometry::{pairwise_distances, GridShape, LinkConfig};
use crate::signal::OscillatorModel;

/// `M x N` unit-modulus channel, receive antennas on rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    h: DMatrix<Complex64>,
    rx_grid: GridShape,
    tx_grid: GridShape,
}

impl ChannelMatrix {
    /// Channel of a link, carrying the array grid shapes along.
    pub fn from_link(link: &LinkConfig) -> Result<Self> {
        los_channel(&pairwise_distances(link), link.wavelength)?
            .with_grids(link.rx.grid(), link.tx.grid())
    }

    pub fn with_grids(mut self, rx_grid: GridShape, tx_grid: GridShape) -> Result<Self> {
        if rx_grid.len() != self.h.nrows() || tx_grid.len() != self.h.ncols() {
            return Err(Error::ShapeMismatch {
                what: "array grids vs channel",
                expected: self.h.shape(),
                actual: (rx_grid.len(), tx_grid.len()),
            });
        }
        self.rx_grid = rx_grid;
        self.tx_grid = tx_grid;
        Ok(self)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.h
    }

    pub fn rx_grid(&self) -> GridShape {
        self.rx_grid
    }

    pub fn tx_grid(&self) -> GridShape {
        self.tx_grid
    }

    /// Structure map of a symmetric link, `None` if the grids differ.
    pub fn structure(&self) -> Option<StructureMap> {
        (self.rx_grid == self.tx_grid)
            .then(|| structure_map(self.rx_grid.rows, self.rx_grid.cols))
    }
}

fn check_wavelength(wavelength: f64) -> Result<()> {
    if !(wavelength > 0.0) || !wavelength.is_finite() {
        return Err(invalid("wavelength", "must be positive and finite"));
    }
    Ok(())
}

fn phase_term(r: f64, wavelength: f64) -> Result<Complex64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid("distances", "entries must be positive and finite"));
    }
    // reduce before scaling so long links keep their sub-wavelength phase
    let cycles = r / wavelength;
    let frac = cycles - libm::round(cycles);
    Ok(Complex64::cis(-2.0 * PI * frac))
}

/// `h_mn = exp(-j 2 pi r_mn / lambda)` with unit attenuation. Grids default
/// to linear arrays; attach real ones with [`ChannelMatrix::with_grids`].
pub fn los_channel(distances: &DMatrix<f64>, wavelength: f64) -> Result<ChannelMatrix> {
    check_wavelength(wavelength)?;
    let (rows, cols) = distances.shape();
    let mut h = DMatrix::zeros(rows, cols);
    for n in 0..cols {
        for m in 0..rows {
            h[(m, n)] = phase_term(distances[(m, n)], wavelength)?;
        }
    }
    Ok(ChannelMatrix {
        h,
        rx_grid: GridShape::new(rows, 1),
        tx_grid: GridShape::new(cols, 1),
    })
}

/// As [`los_channel`] with a separate carrier wavelength per transmitter.
pub fn los_channel_per_tx(distances: &DMatrix<f64>, wavelengths: &[f64]) -> Result<ChannelMatrix> {
    let (rows, cols) = distances.shape();
    if wavelengths.len() != cols {
        return Err(Error::ShapeMismatch {
            what: "wavelengths per transmitter",
            expected: (1, cols),
            actual: (1, wavelengths.len()),
        });
    }
    let mut h = DMatrix::zeros(rows, cols);
    for (n, &wl) in wavelengths.iter().enumerate() {
        check_wavelength(wl)?;
        for m in 0..rows {
            h[(m, n)] = phase_term(distances[(m, n)], wl)?;
        }
    }
    Ok(ChannelMatrix {
        h,
        rx_grid: GridShape::new(rows, 1),
        tx_grid: GridShape::new(cols, 1),
    })
}

/// Channel with the static oscillator phase folded into every entry.
#[derive(Debug, Clone, PartialEq)]
pub struct JointChannel {
    h: DMatrix<Complex64>,
}

impl JointChannel {
    pub fn new(h: DMatrix<Complex64>) -> Self {
        Self { h }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.h
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.h
    }
}

/// `H_phi[m, n] = H[m, n] exp(j phi_mn)`.
pub fn joint_channel(channel: &ChannelMatrix, oscillator: &OscillatorModel) -> Result<JointChannel> {
    let (rows, cols) = channel.h.shape();
    oscillator.check_shape(rows, cols)?;
    let h = match oscillator {
        OscillatorModel::Single { phase, .. } => channel.h.map(|v| v * Complex64::cis(*phase)),
        OscillatorModel::PerPair { phase, .. } => {
            DMatrix::from_fn(rows, cols, |m, n| channel.h[(m, n)] * Complex64::cis(phase[(m, n)]))
        }
    };
    Ok(JointChannel { h })
}

/// Equal-entry classes of a symmetric `rows x cols` URA link. Pair `(m, n)`
/// belongs to class `(|m_y - n_y|, |m_x - n_x|)`, numbered `dy * cols + dx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StructureMap {
    grid: GridShape,
}

pub fn structure_map(rows: usize, cols: usize) -> StructureMap {
    StructureMap {
        grid: GridShape::new(rows.max(1), cols.max(1)),
    }
}

impl StructureMap {
    pub fn grid(&self) -> GridShape {
        self.grid
    }

    /// Antennas per side, `M = N`.
    pub fn size(&self) -> usize {
        self.grid.len()
    }

    pub fn class_count(&self) -> usize {
        self.grid.len()
    }

    pub fn offsets_of(&self, m: usize, n: usize) -> (usize, usize) {
        let (my, mx) = self.grid.cell(m);
        let (ny, nx) = self.grid.cell(n);
        (my.abs_diff(ny), mx.abs_diff(nx))
    }

    pub fn class_of(&self, m: usize, n: usize) -> usize {
        let (dy, dx) = self.offsets_of(m, n);
        dy * self.grid.cols + dx
    }

    pub fn offsets(&self, class: usize) -> (usize, usize) {
        (class / self.grid.cols, class % self.grid.cols)
    }

    /// All `(m, n)` pairs of one class, column-major.
    pub fn members(&self, class: usize) -> Vec<(usize, usize)> {
        let n = self.size();
        (0..n)
            .flat_map(|col| (0..n).map(move |row| (row, col)))
            .filter(|&(m, c)| self.class_of(m, c) == class)
            .collect()
    }

    /// Matrix whose entries are the class values.
    pub fn broadcast(&self, values: &[Complex64]) -> DMatrix<Complex64> {
        let n = self.size();
        DMatrix::from_fn(n, n, |m, c| values[self.class_of(m, c)])
    }
}

/// Largest distance between two entries of the same class.
pub fn within_class_spread(h: &DMatrix<Complex64>, map: &StructureMap) -> Result<f64> {
    let n = map.size();
    if h.shape() != (n, n) {
        return Err(Error::ShapeMismatch {
            what: "channel vs structure map",
            expected: (n, n),
            actual: h.shape(),
        });
    }
    let mut spread = 0.0_f64;
    for class in 0..map.class_count() {
        let vals: Vec<Complex64> = map.members(class).iter().map(|&idx| h[idx]).collect();
        for (i, a) in vals.iter().enumerate() {
            for b in &vals[i + 1..] {
                spread = spread.max((a - b).norm());
            }
        }
    }
    Ok(spread)
}

/// Ratio of the extreme singular values, `+inf` when rank deficient.
pub fn condition_number(h: &DMatrix<Complex64>) -> f64 {
    if h.is_empty() {
        return f64::INFINITY;
    }
    let s = h.clone().svd(false, false).singular_values;
    let max = s.max();
    let min = s.min();
    let tol = max * f64::EPSILON * h.nrows().max(h.ncols()) as f64;
    if max == 0.0 || min <= tol {
        f64::INFINITY
    } else {
        max / min
    }
}

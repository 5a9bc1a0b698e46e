//! Training matrices, oscillator offsets and received pilot synthesis.
//!
//! Samples are indexed by time `p = 1..=P` in the formulas; in code row `p`
//! of a `P x _` matrix holds time index `p + 1`, so the first sample already
//! carries one step of frequency rotation.

use core::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};

use crate::channel::JointChannel;
use crate::error::{invalid, Error, Result};

/// Frequency (rad/sample) and static phase (rad) offsets between the
/// transmit and receive oscillators.
#[derive(Debug, Clone, PartialEq)]
pub enum OscillatorModel {
    /// One oscillator per terminal: every antenna pair sees the same offsets.
    Single { omega: f64, phase: f64 },
    /// One oscillator per antenna: `M x N` matrices, receive index on rows.
    PerPair {
        omega: DMatrix<f64>,
        phase: DMatrix<f64>,
    },
}

impl OscillatorModel {
    pub fn ideal() -> Self {
        OscillatorModel::Single {
            omega: 0.0,
            phase: 0.0,
        }
    }

    pub fn omega(&self, m: usize, n: usize) -> f64 {
        match self {
            OscillatorModel::Single { omega, .. } => *omega,
            OscillatorModel::PerPair { omega, .. } => omega[(m, n)],
        }
    }

    pub fn phase(&self, m: usize, n: usize) -> f64 {
        match self {
            OscillatorModel::Single { phase, .. } => *phase,
            OscillatorModel::PerPair { phase, .. } => phase[(m, n)],
        }
    }

    /// Checks a per-pair model against an `rows x cols` channel.
    pub fn check_shape(&self, rows: usize, cols: usize) -> Result<()> {
        if let OscillatorModel::PerPair { omega, phase } = self {
            for (what, mat) in [("omega offsets", omega), ("phase offsets", phase)] {
                if mat.shape() != (rows, cols) {
                    return Err(Error::ShapeMismatch {
                        what,
                        expected: (rows, cols),
                        actual: mat.shape(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffsetKind {
    Single,
    PerPair { rows: usize, cols: usize },
}

fn draw_omega<R: Rng + ?Sized>(normal: &Option<Normal<f64>>, rng: &mut R) -> f64 {
    match normal {
        None => 0.0,
        Some(n) => loop {
            let w = n.sample(rng);
            if w.abs() < PI {
                break w;
            }
        },
    }
}

/// Draws Gaussian frequency offsets with variance `omega_variance`
/// (redrawn until `|omega| < pi`) and phases uniform on `[0, 2 pi)`.
pub fn draw_offsets<R: Rng + ?Sized>(
    kind: OffsetKind,
    omega_variance: f64,
    rng: &mut R,
) -> Result<OscillatorModel> {
    if !(omega_variance >= 0.0) || !omega_variance.is_finite() {
        return Err(invalid("omega_variance", "must be finite and non-negative"));
    }
    let normal = if omega_variance > 0.0 {
        Some(Normal::new(0.0, libm::sqrt(omega_variance)).map_err(|_| invalid("omega_variance", "bad"))?)
    } else {
        None
    };
    let uniform = Uniform::new(0.0, 2.0 * PI).map_err(|_| invalid("phase", "bad range"))?;
    Ok(match kind {
        OffsetKind::Single => OscillatorModel::Single {
            omega: draw_omega(&normal, rng),
            phase: uniform.sample(rng),
        },
        OffsetKind::PerPair { rows, cols } => {
            let omega = DMatrix::from_fn(rows, cols, |_, _| draw_omega(&normal, rng));
            let phase = DMatrix::from_fn(rows, cols, |_, _| uniform.sample(rng));
            OscillatorModel::PerPair { omega, phase }
        }
    })
}

/// Noise variance of one complex sample for unit-energy pilots.
pub fn snr_to_noise_variance(snr_db: f64) -> f64 {
    libm::pow(10.0, -snr_db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingKind {
    /// Row `p` activates transmit antenna `p mod N` only.
    ShiftedIdentity,
    /// Columns are orthonormal, `X^H X = I`.
    Orthogonal,
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMatrix {
    x: DMatrix<Complex64>,
    kind: TrainingKind,
}

impl TrainingMatrix {
    pub fn general(x: DMatrix<Complex64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(invalid("training", "empty matrix"));
        }
        Ok(Self {
            x,
            kind: TrainingKind::General,
        })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.x
    }

    pub fn kind(&self) -> TrainingKind {
        self.kind
    }

    pub fn pilots(&self) -> usize {
        self.x.nrows()
    }

    pub fn transmitters(&self) -> usize {
        self.x.ncols()
    }

    /// Transmit antenna active at row `p` of a shifted-identity matrix.
    pub fn active_antenna(&self, p: usize) -> Option<usize> {
        match self.kind {
            TrainingKind::ShiftedIdentity => Some(p % self.x.ncols()),
            _ => None,
        }
    }
}

/// `P x N` training with a single one per row, in column `p mod N`.
pub fn training_shifted_identity(pilots: usize, transmitters: usize) -> Result<TrainingMatrix> {
    if pilots == 0 {
        return Err(invalid("pilots", "need at least one pilot"));
    }
    if transmitters == 0 {
        return Err(invalid("transmitters", "need at least one transmitter"));
    }
    let x = DMatrix::from_fn(pilots, transmitters, |p, n| {
        if n == p % transmitters {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok(TrainingMatrix {
        x,
        kind: TrainingKind::ShiftedIdentity,
    })
}

/// First `N` columns of the unitary `P`-point DFT matrix, so `X^H X = I_N`.
pub fn training_orthogonal(pilots: usize, transmitters: usize) -> Result<TrainingMatrix> {
    if transmitters == 0 || pilots < transmitters {
        return Err(invalid(
            "pilots",
            alloc::format!("orthogonal training needs P >= N (P={pilots}, N={transmitters})"),
        ));
    }
    let scale = 1.0 / libm::sqrt(pilots as f64);
    let x = DMatrix::from_fn(pilots, transmitters, |p, n| {
        let angle = -2.0 * PI * ((p * n) % pilots) as f64 / pilots as f64;
        Complex64::from_polar(scale, angle)
    });
    Ok(TrainingMatrix {
        x,
        kind: TrainingKind::Orthogonal,
    })
}

/// Received pilots plus the ground truth that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBlock {
    pub training: TrainingMatrix,
    /// `P x M`, column `m` is the sample vector of receive antenna `m`.
    pub received: DMatrix<Complex64>,
    pub channel: JointChannel,
    pub oscillator: OscillatorModel,
    pub noise_variance: f64,
}

/// Circular complex Gaussian sample with total variance `variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex64 {
    let s = libm::sqrt(variance / 2.0);
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Noiseless received samples, `P x M`: entry `(p, m)` is
/// `sum_n X[p, n] exp(j (p+1) omega_mn) H[m, n]`.
pub fn noiseless_rx(
    channel: &JointChannel,
    oscillator: &OscillatorModel,
    training: &TrainingMatrix,
) -> Result<DMatrix<Complex64>> {
    let h = channel.matrix();
    let x = training.matrix();
    let (rows, cols) = h.shape();
    if x.ncols() != cols {
        return Err(Error::ShapeMismatch {
            what: "training columns vs transmit antennas",
            expected: (x.nrows(), cols),
            actual: x.shape(),
        });
    }
    oscillator.check_shape(rows, cols)?;
    let pilots = x.nrows();
    Ok(DMatrix::from_fn(pilots, rows, |p, m| {
        let t = (p + 1) as f64;
        match oscillator {
            OscillatorModel::Single { omega, .. } => {
                let mut acc = Complex64::new(0.0, 0.0);
                for n in 0..cols {
                    acc += x[(p, n)] * h[(m, n)];
                }
                acc * Complex64::cis(t * omega)
            }
            OscillatorModel::PerPair { omega, .. } => (0..cols)
                .map(|n| x[(p, n)] * Complex64::cis(t * omega[(m, n)]) * h[(m, n)])
                .sum(),
        }
    }))
}

/// Synthesizes one pilot block. Static phases are expected to be folded into
/// `channel` already (see [`crate::channel::joint_channel`]); only the
/// frequency part of `oscillator` is applied here.
pub fn synthesize_rx<R: Rng + ?Sized>(
    channel: &JointChannel,
    oscillator: &OscillatorModel,
    training: &TrainingMatrix,
    noise_variance: f64,
    rng: &mut R,
) -> Result<PilotBlock> {
    if !(noise_variance >= 0.0) {
        return Err(invalid("noise_variance", "must be non-negative"));
    }
    let mut received = noiseless_rx(channel, oscillator, training)?;
    if noise_variance > 0.0 {
        for y in received.iter_mut() {
            *y += complex_gaussian(noise_variance, rng);
        }
    }
    Ok(PilotBlock {
        training: training.clone(),
        received,
        channel: channel.clone(),
        oscillator: oscillator.clone(),
        noise_variance,
    })
}

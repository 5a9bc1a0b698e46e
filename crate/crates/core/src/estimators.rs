//! Least-squares and structure-exploiting estimators for the joint channel
//! and the carrier frequency offset.
//!
//! All estimators read received samples as a `P x M` matrix (time on rows,
//! receive antenna on columns). With shifted-identity training, the sample
//! at row `p` and column `m` observes `h[m, p mod N]` rotated by
//! `exp(j (p+1) omega)`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::StructureMap;
use crate::error::{invalid, Error, Result};
use crate::signal::{TrainingKind, TrainingMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorId {
    LeastSquares,
    ToeplitzAverage,
    Consecutive,
}

impl EstimatorId {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorId::LeastSquares => "ls",
            EstimatorId::ToeplitzAverage => "toeplitz",
            EstimatorId::Consecutive => "consecutive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    /// Joint channel estimate, `M x N`.
    pub channel: DMatrix<Complex64>,
    pub omega: Option<f64>,
    pub estimator: EstimatorId,
    pub pilots: usize,
}

/// Which sample pairs feed the frequency estimate. Both divide samples that
/// observe the same structure class one time step apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FreqPairing {
    /// `y_{2m}(p+1) / y_{2m-1}(p)` over disjoint antenna pairs and all
    /// consecutive times.
    #[default]
    Antenna,
    /// `y_{m+1}(2p) / y_m(2p-1)` over disjoint time pairs and all
    /// neighbouring antennas.
    Time,
}

fn check_received(y: &DMatrix<Complex64>, map: &StructureMap) -> Result<()> {
    if y.ncols() != map.size() || y.nrows() == 0 {
        return Err(Error::ShapeMismatch {
            what: "received samples vs structure map",
            expected: (y.nrows().max(1), map.size()),
            actual: y.shape(),
        });
    }
    Ok(())
}

fn shifted_identity(training: &TrainingMatrix, map: &StructureMap) -> Result<usize> {
    if training.kind() != TrainingKind::ShiftedIdentity {
        return Err(Error::UnsupportedTraining("structured estimators need shifted-identity pilots"));
    }
    if training.transmitters() != map.size() {
        return Err(Error::ShapeMismatch {
            what: "training columns vs structure map",
            expected: (training.pilots(), map.size()),
            actual: training.matrix().shape(),
        });
    }
    Ok(training.transmitters())
}

/// Per-antenna least squares, `h_m = (X^H X)^-1 X^H y_m`.
pub fn ls_channel(training: &TrainingMatrix, y: &DMatrix<Complex64>) -> Result<EstimationResult> {
    let x = training.matrix();
    if y.nrows() != x.nrows() {
        return Err(Error::ShapeMismatch {
            what: "received rows vs pilots",
            expected: (x.nrows(), y.ncols()),
            actual: y.shape(),
        });
    }
    let gram = x.adjoint() * x;
    let chol = gram.cholesky().ok_or(Error::Singular { context: "X^H X" })?;
    let h_t = chol.solve(&(x.adjoint() * y));
    Ok(EstimationResult {
        channel: h_t.transpose(),
        omega: None,
        estimator: EstimatorId::LeastSquares,
        pilots: x.nrows(),
    })
}

/// Averages every sample that observes the same structure class and
/// broadcasts the class means. Samples must be free of frequency rotation.
pub fn toeplitz_channel_average(
    training: &TrainingMatrix,
    y: &DMatrix<Complex64>,
    map: &StructureMap,
) -> Result<EstimationResult> {
    check_received(y, map)?;
    let n = shifted_identity(training, map)?;
    let k = map.class_count();
    let mut sums = vec![Complex64::new(0.0, 0.0); k];
    let mut counts = vec![0usize; k];
    for p in 0..y.nrows() {
        let t = p % n;
        for m in 0..y.ncols() {
            let c = map.class_of(m, t);
            sums[c] += y[(p, m)];
            counts[c] += 1;
        }
    }
    let missing: Vec<(usize, usize)> = (0..k).filter(|&c| counts[c] == 0).map(|c| map.offsets(c)).collect();
    if !missing.is_empty() {
        return Err(Error::UncoveredClasses { missing });
    }
    let means: Vec<Complex64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    Ok(EstimationResult {
        channel: map.broadcast(&means),
        omega: None,
        estimator: EstimatorId::ToeplitzAverage,
        pilots: y.nrows(),
    })
}

/// Mean principal argument of `y[b] / y[a]` over the configured pairs whose
/// two samples fall into the same structure class one time step apart. Pairs
/// with a zero denominator are skipped.
pub fn freq_offset_pairwise(
    training: &TrainingMatrix,
    y: &DMatrix<Complex64>,
    map: &StructureMap,
    pairing: FreqPairing,
) -> Result<f64> {
    check_received(y, map)?;
    let n = shifted_identity(training, map)?;
    let (pilots, m_count) = y.shape();
    if pilots < 2 {
        return Err(invalid("pilots", "need at least two samples"));
    }
    // ((time, antenna) of numerator, (time, antenna) of denominator)
    let pairs: Vec<((usize, usize), (usize, usize))> = match pairing {
        FreqPairing::Antenna => {
            if m_count % 2 != 0 {
                return Err(invalid("antennas", "antenna pairing needs an even count"));
            }
            (0..m_count / 2)
                .flat_map(|m| (0..pilots - 1).map(move |p| ((p + 1, 2 * m + 1), (p, 2 * m))))
                .collect()
        }
        FreqPairing::Time => {
            if m_count < 2 {
                return Err(invalid("antennas", "time pairing needs two antennas"));
            }
            (0..pilots / 2)
                .flat_map(|p| (0..m_count - 1).map(move |m| ((2 * p + 1, m + 1), (2 * p, m))))
                .collect()
        }
    };
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut matched = 0usize;
    for ((pb, mb), (pa, ma)) in pairs {
        if map.class_of(mb, pb % n) != map.class_of(ma, pa % n) {
            continue;
        }
        matched += 1;
        let den = y[(pa, ma)];
        if den.norm_sqr() == 0.0 {
            continue;
        }
        sum += (y[(pb, mb)] / den).arg();
        used += 1;
    }
    if matched == 0 {
        return Err(invalid("pilots", "no sample pair shares a structure class"));
    }
    if used == 0 {
        return Err(Error::DegenerateSamples);
    }
    Ok(sum / used as f64)
}

/// Coherent average of the diagonal observations `y_p(p)` after removing the
/// estimated rotation.
pub fn diag_channel(y: &DMatrix<Complex64>, omega_hat: f64) -> Result<Complex64> {
    let (pilots, m_count) = y.shape();
    if pilots == 0 || pilots > m_count {
        return Err(invalid("pilots", "need 1 <= P <= M"));
    }
    let sum: Complex64 = (0..pilots)
        .map(|p| y[(p, p)] * Complex64::cis(-((p + 1) as f64) * omega_hat))
        .sum();
    Ok(sum / pilots as f64)
}

/// Removes `exp(j (p+1) omega)` from every sample of row `p`.
pub fn derotate(y: &DMatrix<Complex64>, omega: f64) -> DMatrix<Complex64> {
    DMatrix::from_fn(y.nrows(), y.ncols(), |p, m| y[(p, m)] * Complex64::cis(-((p + 1) as f64) * omega))
}

/// Frequency estimate first, then class averaging of the derotated samples.
pub fn estimate_consecutive(
    training: &TrainingMatrix,
    y: &DMatrix<Complex64>,
    map: &StructureMap,
    pairing: FreqPairing,
) -> Result<EstimationResult> {
    let omega = freq_offset_pairwise(training, y, map, pairing)?;
    let mut est = toeplitz_channel_average(training, &derotate(y, omega), map)?;
    est.omega = Some(omega);
    est.estimator = EstimatorId::Consecutive;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{joint_channel, structure_map, ChannelMatrix};
    use crate::geometry::{GridShape, LinkConfig};
    use crate::signal::{noiseless_rx, training_orthogonal, training_shifted_identity, OscillatorModel};

    fn link_channel(rows: usize, cols: usize, phase: f64) -> (DMatrix<Complex64>, StructureMap) {
        let link = LinkConfig::optimal_symmetric(GridShape::new(rows, cols), 5.0, 0.005, 1e9).unwrap();
        let h = ChannelMatrix::from_link(&link).unwrap();
        let joint = joint_channel(&h, &OscillatorModel::Single { omega: 0.0, phase }).unwrap();
        (joint.into_inner(), structure_map(rows, cols))
    }

    fn rx(h: &DMatrix<Complex64>, omega: f64, x: &TrainingMatrix) -> DMatrix<Complex64> {
        let joint = crate::channel::JointChannel::new(h.clone());
        noiseless_rx(&joint, &OscillatorModel::Single { omega, phase: 0.0 }, x).unwrap()
    }

    #[test]
    fn ls_exact_without_noise() {
        let (h, _) = link_channel(4, 1, 0.3);
        for x in [training_shifted_identity(4, 4).unwrap(), training_orthogonal(7, 4).unwrap()] {
            let est = ls_channel(&x, &rx(&h, 0.0, &x)).unwrap();
            assert!((est.channel - &h).norm() < 1e-12);
        }
        let short = training_shifted_identity(2, 4).unwrap();
        assert!(ls_channel(&short, &rx(&h, 0.0, &short)).is_err());
    }

    #[test]
    fn averaging_exact_without_noise() {
        for (rows, cols) in [(6, 1), (3, 3)] {
            let (h, map) = link_channel(rows, cols, 1.1);
            for p in 1..=map.size() {
                let x = training_shifted_identity(p, map.size()).unwrap();
                let est = toeplitz_channel_average(&x, &rx(&h, 0.0, &x), &map).unwrap();
                assert!((est.channel - &h).norm() < 1e-9, "{rows}x{cols} P={p}");
            }
        }
    }

    #[test]
    fn coverage_error_lists_classes() {
        // a single sample only reaches classes seen from transmit antenna 0
        let map = structure_map(2, 2);
        let mut x = DMatrix::zeros(1, 4);
        x[(0, 0)] = Complex64::new(1.0, 0.0);
        let x = TrainingMatrix::general(x).unwrap();
        let y = DMatrix::from_element(1, 4, Complex64::new(1.0, 0.0));
        assert!(matches!(
            toeplitz_channel_average(&x, &y, &map),
            Err(Error::UnsupportedTraining(_))
        ));
        let x = training_shifted_identity(1, 4).unwrap();
        assert!(toeplitz_channel_average(&x, &y, &map).is_ok());
    }

    #[test]
    fn frequency_exact_without_noise() {
        let (h, map) = link_channel(6, 1, 0.5);
        for pairing in [FreqPairing::Antenna, FreqPairing::Time] {
            for p in 2..=6 {
                let x = training_shifted_identity(p, 6).unwrap();
                for w in [0.0, 0.1, -2.5] {
                    let est = freq_offset_pairwise(&x, &rx(&h, w, &x), &map, pairing).unwrap();
                    assert!((est - w).abs() < 1e-12, "{pairing:?} P={p} w={w}: {est}");
                }
            }
        }
    }

    #[test]
    fn frequency_errors() {
        let (h, map) = link_channel(5, 1, 0.0);
        let x = training_shifted_identity(3, 5).unwrap();
        let y = rx(&h, 0.2, &x);
        assert!(freq_offset_pairwise(&x, &y, &map, FreqPairing::Antenna).is_err());
        assert!(freq_offset_pairwise(&x, &y, &map, FreqPairing::Time).is_ok());
        let x1 = training_shifted_identity(1, 5).unwrap();
        assert!(freq_offset_pairwise(&x1, &rx(&h, 0.2, &x1), &map, FreqPairing::Time).is_err());
        let zeros = DMatrix::zeros(3, 5);
        assert_eq!(
            freq_offset_pairwise(&x, &zeros, &map, FreqPairing::Time),
            Err(Error::DegenerateSamples)
        );
    }

    #[test]
    fn zero_denominators_are_skipped() {
        let (h, map) = link_channel(4, 1, 0.0);
        let x = training_shifted_identity(4, 4).unwrap();
        let mut y = rx(&h, 0.3, &x);
        y[(0, 0)] = Complex64::new(0.0, 0.0);
        let est = freq_offset_pairwise(&x, &y, &map, FreqPairing::Antenna).unwrap();
        assert!((est - 0.3).abs() < 1e-12);
    }

    #[test]
    fn ura_frequency_uses_matching_pairs() {
        let (h, map) = link_channel(3, 3, 0.2);
        let x = training_shifted_identity(9, 9).unwrap();
        let est = estimate_consecutive(&x, &rx(&h, 0.4, &x), &map, FreqPairing::Time).unwrap();
        assert!((est.omega.unwrap() - 0.4).abs() < 1e-12);
        assert!((est.channel - &h).norm() < 1e-9);
    }

    #[test]
    fn diagonal_readout() {
        let (h, _) = link_channel(6, 1, 0.9);
        let x = training_shifted_identity(4, 6).unwrap();
        let y = rx(&h, 0.25, &x);
        let exact = diag_channel(&y, 0.25).unwrap();
        assert!((exact - h[(0, 0)]).norm() < 1e-12);
        for delta in [0.01, 0.3] {
            let off = diag_channel(&y, 0.25 + delta).unwrap();
            assert!(off.norm() < 1.0);
        }
        let long = rx(&h, 0.0, &training_shifted_identity(7, 6).unwrap());
        assert!(diag_channel(&long, 0.0).is_err());
    }

    #[test]
    fn consecutive_exact_and_phase_equivariant() {
        let (h, map) = link_channel(6, 1, 2.0);
        let x = training_shifted_identity(4, 6).unwrap();
        let y = rx(&h, -0.7, &x);
        let est = estimate_consecutive(&x, &y, &map, FreqPairing::Antenna).unwrap();
        assert!((est.omega.unwrap() + 0.7).abs() < 1e-12);
        assert!((&est.channel - &h).norm() < 1e-9);

        let rot = Complex64::cis(1.3);
        let y2 = y.map(|v| v * rot);
        let est2 = estimate_consecutive(&x, &y2, &map, FreqPairing::Antenna).unwrap();
        assert!((est2.omega.unwrap() - est.omega.unwrap()).abs() < 1e-12);
        assert!((est2.channel - est.channel.map(|v| v * rot)).norm() < 1e-9);
    }
}

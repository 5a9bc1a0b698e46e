//! Cramér-Rao bounds for pilot-based channel and frequency offset estimation.
//!
//! All bounds are on real parameters. For an observation
//! `y = mu(theta) + n` with circular noise of total variance `sigma2` the
//! information matrix is `(2 / sigma2) Re(J^H J)`, `J` the complex Jacobian
//! of `mu` with respect to the real parameter vector.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::StructureMap;
use crate::error::{invalid, Error, Result};
use crate::signal::TrainingMatrix;

/// Relative eigenvalue floor below which an information matrix is treated as
/// singular.
const SINGULAR_TOL: f64 = 1e-13;
/// Condition number above which callers should treat a bound with suspicion.
pub const CONDITION_WARN: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct CrbReport {
    /// Bounds on `Re h_n`.
    pub channel_real: Vec<f64>,
    /// Bounds on `Im h_n`.
    pub channel_imag: Vec<f64>,
    /// Bounds on the frequency offsets, absent when they are known.
    pub omega: Option<Vec<f64>>,
    /// Full inverse information matrix.
    pub covariance: DMatrix<f64>,
    /// Information matrix the covariance was obtained from.
    pub information: DMatrix<f64>,
    /// Condition number of `information`.
    pub condition: f64,
}

impl CrbReport {
    /// Mean bound per real dimension of a complex channel coefficient.
    pub fn channel_per_real(&self) -> f64 {
        let n = self.channel_real.len() + self.channel_imag.len();
        let sum: f64 = self.channel_real.iter().chain(&self.channel_imag).sum();
        sum / n as f64
    }

    pub fn omega_mean(&self) -> Option<f64> {
        self.omega
            .as_ref()
            .filter(|w| !w.is_empty())
            .map(|w| w.iter().sum::<f64>() / w.len() as f64)
    }

    pub fn is_well_conditioned(&self) -> bool {
        self.condition <= CONDITION_WARN
    }
}

/// Information at unit noise variance.
fn information(jac: &DMatrix<Complex64>) -> DMatrix<f64> {
    let g = jac.adjoint() * jac;
    let mut f = g.map(|v| v.re * 2.0);
    // exact symmetry for the eigen-solver
    let n = f.nrows();
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (f[(i, j)] + f[(j, i)]);
            f[(i, j)] = s;
            f[(j, i)] = s;
        }
    }
    f
}

/// Inverts a symmetric positive semi-definite information matrix. A
/// numerically zero eigenvalue is reported with the parameters that carry
/// the null direction.
fn invert_information(f: &DMatrix<f64>, names: &dyn Fn(usize) -> String) -> Result<(DMatrix<f64>, f64)> {
    let eig = f.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    let (imin, min) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    if !(max > 0.0) || min <= max * SINGULAR_TOL {
        let v = eig.eigenvectors.column(imin);
        let mut idx: Vec<usize> = (0..v.len()).filter(|&i| v[i].abs() > 1e-6).collect();
        idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()));
        return Err(Error::SingularInformation {
            parameters: idx.into_iter().map(names).collect(),
        });
    }
    let inv_vals = eig.eigenvalues.map(|v| 1.0 / v);
    let q = &eig.eigenvectors;
    let mut cov = q * DMatrix::from_diagonal(&inv_vals) * q.transpose();
    let n = cov.nrows();
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = s;
            cov[(j, i)] = s;
        }
    }
    Ok((cov, max / min))
}

fn check_noise(noise_variance: f64) -> Result<()> {
    if !(noise_variance > 0.0) || !noise_variance.is_finite() {
        return Err(invalid("noise_variance", "must be positive and finite"));
    }
    Ok(())
}

fn channel_names(n: usize) -> impl Fn(usize) -> String {
    move |i| match i / n {
        0 => format!("Re h[{}]", i % n),
        1 => format!("Im h[{}]", i % n),
        _ => format!("omega[{}]", i % n),
    }
}

/// Inverts the unit-variance information and scales both matrices to
/// `noise_variance`, so bounds are exactly proportional to it.
fn bound(
    f: DMatrix<f64>,
    names: &dyn Fn(usize) -> String,
    noise_variance: f64,
    n: usize,
    with_omega: bool,
) -> Result<CrbReport> {
    let (cov, cond) = invert_information(&f, names)?;
    Ok(report(cov * noise_variance, f / noise_variance, cond, n, with_omega))
}

fn report(cov: DMatrix<f64>, f: DMatrix<f64>, condition: f64, n: usize, with_omega: bool) -> CrbReport {
    let d = cov.diagonal();
    CrbReport {
        channel_real: d.rows(0, n).iter().copied().collect(),
        channel_imag: d.rows(n, n).iter().copied().collect(),
        omega: with_omega.then(|| d.rows(2 * n, d.len() - 2 * n).iter().copied().collect()),
        covariance: cov,
        information: f,
        condition,
    }
}

/// Bound for `y = X h + n` with known frequency: `(sigma2 / 2)` times the
/// inverse of `[[Re A, -Im A], [Im A, Re A]]`, `A = X^H X`.
pub fn crb_no_offset(training: &TrainingMatrix, noise_variance: f64) -> Result<CrbReport> {
    check_noise(noise_variance)?;
    let x = training.matrix();
    let n = x.ncols();
    let mut jac = DMatrix::zeros(x.nrows(), 2 * n);
    jac.columns_mut(0, n).copy_from(x);
    jac.columns_mut(n, n).copy_from(&x.map(|v| v * Complex64::i()));
    bound(information(&jac), &channel_names(n), noise_variance, n, false)
}

/// Bound for one receive antenna with unknown per-transmitter frequency
/// offsets. Parameters are `[Re h; Im h; omega]`; the mean is
/// `mu_p = sum_n X[p, n] exp(j p omega_n) h_n` with `p = 1..=P`, so the
/// offset derivative is `j D` with `D = diag(1..P) X_omega diag(h)`.
pub fn crb_with_offset(
    training: &TrainingMatrix,
    omega: &[f64],
    h: &[Complex64],
    noise_variance: f64,
) -> Result<CrbReport> {
    check_noise(noise_variance)?;
    let x = training.matrix();
    let (pilots, n) = x.shape();
    if omega.len() != n || h.len() != n {
        return Err(Error::ShapeMismatch {
            what: "offsets and channel vs training columns",
            expected: (n, n),
            actual: (omega.len(), h.len()),
        });
    }
    if pilots < 2 {
        return Err(Error::SingularInformation {
            parameters: (0..n).map(|i| format!("omega[{i}]")).collect(),
        });
    }
    let x_omega = DMatrix::from_fn(pilots, n, |p, k| x[(p, k)] * Complex64::cis((p + 1) as f64 * omega[k]));
    let mut jac = DMatrix::zeros(pilots, 3 * n);
    for k in 0..n {
        for p in 0..pilots {
            let v = x_omega[(p, k)];
            jac[(p, k)] = v;
            jac[(p, n + k)] = v * Complex64::i();
            jac[(p, 2 * n + k)] = v * h[k] * Complex64::new(0.0, (p + 1) as f64);
        }
    }
    bound(information(&jac), &channel_names(n), noise_variance, n, true)
}

/// Divides every bound by `m`, the number of receive antennas that observe
/// the same parameters.
pub fn system_scale(report: &CrbReport, m: usize) -> Result<CrbReport> {
    if m == 0 {
        return Err(invalid("m", "must be at least one"));
    }
    let s = 1.0 / m as f64;
    Ok(CrbReport {
        channel_real: report.channel_real.iter().map(|v| v * s).collect(),
        channel_imag: report.channel_imag.iter().map(|v| v * s).collect(),
        omega: report.omega.as_ref().map(|w| w.iter().map(|v| v * s).collect()),
        covariance: &report.covariance * s,
        information: &report.information * m as f64,
        condition: report.condition,
    })
}

/// Exact bound for the whole `M x N` link with one value per structure class
/// and, if `omega` is given, a single shared frequency offset. Parameters are
/// `[Re c; Im c; omega]` for the class values `c`; every receive antenna
/// contributes its `P` samples.
pub fn structured_crb(
    map: &StructureMap,
    training: &TrainingMatrix,
    class_values: &[Complex64],
    omega: Option<f64>,
    noise_variance: f64,
) -> Result<CrbReport> {
    check_noise(noise_variance)?;
    let x = training.matrix();
    let (pilots, n) = x.shape();
    let k = map.class_count();
    if n != map.size() || class_values.len() != k {
        return Err(Error::ShapeMismatch {
            what: "training and class values vs structure map",
            expected: (map.size(), k),
            actual: (n, class_values.len()),
        });
    }
    let m_count = map.size();
    let params = 2 * k + usize::from(omega.is_some());
    let w = omega.unwrap_or(0.0);
    let mut jac = DMatrix::zeros(pilots * m_count, params);
    for m in 0..m_count {
        for p in 0..pilots {
            let row = m * pilots + p;
            let rot = Complex64::cis((p + 1) as f64 * w);
            let mut mu = Complex64::new(0.0, 0.0);
            for t in 0..n {
                let c = map.class_of(m, t);
                let v = x[(p, t)] * rot;
                jac[(row, c)] += v;
                jac[(row, k + c)] += v * Complex64::i();
                mu += v * class_values[c];
            }
            if omega.is_some() {
                jac[(row, 2 * k)] = mu * Complex64::new(0.0, (p + 1) as f64);
            }
        }
    }
    let names = move |i: usize| match i {
        i if i < k => {
            let (dy, dx) = map.offsets(i);
            format!("Re c({dy},{dx})")
        }
        i if i < 2 * k => {
            let (dy, dx) = map.offsets(i - k);
            format!("Im c({dy},{dx})")
        }
        _ => String::from("omega"),
    };
    bound(information(&jac), &names, noise_variance, k, omega.is_some())
}

//! Monte-Carlo engine: sweeps the configured grid, runs the estimators on
//! every trial and reduces squared errors into [`MseRecord`]s.
//!
//! Trial `t` of grid point `g` draws from a ChaCha8 stream keyed by the
//! master seed with stream id `(g << 32) | t`, and per-trial errors are
//! summed in trial order, so results do not depend on scheduling.

use losmimo_core::channel::{joint_channel, structure_map, ChannelMatrix, StructureMap};
use losmimo_core::crb::{crb_no_offset, crb_with_offset, structured_crb, system_scale, CONDITION_WARN};
use losmimo_core::estimators::{estimate_consecutive, ls_channel, toeplitz_channel_average, FreqPairing};
use losmimo_core::geometry::{perturb_positions, GridShape, LinkConfig};
use losmimo_core::signal::{draw_offsets, snr_to_noise_variance, synthesize_rx, training_shifted_identity, OffsetKind, TrainingMatrix};
use losmimo_core::Error as CoreError;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{EstimatorKind, ExperimentConfig, OmegaCrb, Parameter};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("at {point}: {source}")]
    Estimator {
        point: String,
        #[source]
        source: CoreError,
    },
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// One Monte-Carlo result row.
#[derive(Debug, Clone, PartialEq)]
pub struct MseRecord {
    pub experiment: String,
    pub parameter: Parameter,
    pub estimator: String,
    pub snr_db: f64,
    pub n_antennas: usize,
    pub p_pilots: usize,
    pub mse: f64,
    pub crb: f64,
    pub mc_std_error: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Mean squared error per real dimension over all entries.
pub fn channel_mse(estimate: &DMatrix<Complex64>, truth: &DMatrix<Complex64>) -> Result<f64, CoreError> {
    if estimate.shape() != truth.shape() {
        return Err(CoreError::ShapeMismatch {
            what: "channel estimate vs truth",
            expected: truth.shape(),
            actual: estimate.shape(),
        });
    }
    let n = truth.len().max(1) as f64;
    Ok(estimate.iter().zip(truth.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / (2.0 * n))
}

/// Squared difference of principal values, without re-wrapping.
pub fn omega_mse(estimate: f64, truth: f64) -> f64 {
    (estimate - truth) * (estimate - truth)
}

#[derive(Debug, Clone)]
struct Series {
    parameter: Parameter,
    estimator: EstimatorKind,
    pilots: usize,
}

struct GridPoint {
    index: usize,
    sigma_pos: f64,
    impaired_label: Option<String>,
    grid: GridShape,
    snr_db: f64,
}

impl GridPoint {
    fn describe(&self) -> String {
        format!(
            "grid point {} (N = {}x{}, SNR = {} dB, position sigma = {})",
            self.index, self.grid.rows, self.grid.cols, self.snr_db, self.sigma_pos
        )
    }
}

struct Setup<'a> {
    cfg: &'a ExperimentConfig,
    link: LinkConfig,
    channel: ChannelMatrix,
    map: StructureMap,
    training: TrainingMatrix,
    series: Vec<Series>,
    noise_variance: f64,
}

fn build_series(cfg: &ExperimentConfig, n: usize) -> Vec<Series> {
    let mut pilots: Vec<usize> = Vec::new();
    for p in &cfg.pilots {
        let p = p.resolve(n);
        if !pilots.contains(&p) {
            pilots.push(p);
        }
    }
    let mut out = Vec::new();
    for &est in &cfg.estimators {
        for &p in &pilots {
            for &parameter in &cfg.parameters {
                let produced = match (est, parameter) {
                    (EstimatorKind::Ls, Parameter::Channel) => p >= n,
                    (EstimatorKind::Toeplitz, Parameter::Channel) => true,
                    (EstimatorKind::Consecutive, _) => true,
                    (_, Parameter::Omega) => false,
                };
                if produced {
                    out.push(Series {
                        parameter,
                        estimator: est,
                        pilots: p,
                    });
                }
            }
        }
    }
    out
}

fn trial_rng(seed: u64, point: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((point as u64) << 32) | trial as u64);
    rng
}

/// Squared errors of one trial in series order, plus the per-antenna omega
/// bound at the drawn truth when that is requested.
fn run_trial(setup: &Setup, point: &GridPoint, trial: usize) -> Result<(Vec<f64>, Option<f64>), CoreError> {
    let cfg = setup.cfg;
    let mut rng = trial_rng(cfg.seed, point.index, trial);
    let osc = draw_offsets(OffsetKind::Single, cfg.omega_variance, &mut rng)?;
    let channel = if point.sigma_pos > 0.0 {
        let tx = perturb_positions(&setup.link.tx, point.sigma_pos, &mut rng)?;
        let rx = perturb_positions(&setup.link.rx, point.sigma_pos, &mut rng)?;
        ChannelMatrix::from_link(&setup.link.with_arrays(tx, rx))?
    } else {
        setup.channel.clone()
    };
    let joint = joint_channel(&channel, &osc)?;
    let block = synthesize_rx(&joint, &osc, &setup.training, setup.noise_variance, &mut rng)?;
    let truth_omega = osc.omega(0, 0);
    let n = setup.map.size();
    let pairing: FreqPairing = cfg.pairing.into();

    let mut errors = Vec::with_capacity(setup.series.len());
    let mut cache: Vec<(EstimatorKind, usize, DMatrix<Complex64>, Option<f64>)> = Vec::new();
    for s in &setup.series {
        let hit = cache.iter().position(|c| c.0 == s.estimator && c.1 == s.pilots);
        let idx = match hit {
            Some(i) => i,
            None => {
                let y = block.received.rows(0, s.pilots).into_owned();
                let x = training_shifted_identity(s.pilots, n)?;
                let est = match s.estimator {
                    EstimatorKind::Ls => ls_channel(&x, &y)?,
                    EstimatorKind::Toeplitz => toeplitz_channel_average(&x, &y, &setup.map)?,
                    EstimatorKind::Consecutive => estimate_consecutive(&x, &y, &setup.map, pairing)?,
                };
                cache.push((s.estimator, s.pilots, est.channel, est.omega));
                cache.len() - 1
            }
        };
        let (_, _, h, w) = &cache[idx];
        errors.push(match s.parameter {
            Parameter::Channel => channel_mse(h, joint.matrix())?,
            Parameter::Omega => omega_mse(w.unwrap_or(0.0), truth_omega),
        });
    }

    let per_antenna = if cfg.omega_crb == OmegaCrb::PerAntenna && setup.series.iter().any(|s| s.parameter == Parameter::Omega) {
        let x = training_shifted_identity(n, n)?;
        let h: Vec<Complex64> = joint.matrix().row(0).iter().copied().collect();
        let report = crb_with_offset(&x, &vec![truth_omega; n], &h, 1.0)?;
        system_scale(&report, n)?.omega_mean()
    } else {
        None
    };
    Ok((errors, per_antenna))
}

/// Bounds at unit noise variance for the figure curves: channel from the
/// `P = N` offset-free bound, omega from the structured link bound.
fn unit_bounds(setup: &Setup) -> Result<(f64, Option<f64>), CoreError> {
    let n = setup.map.size();
    let x = training_shifted_identity(n, n)?;
    let channel = system_scale(&crb_no_offset(&x, 1.0)?, n)?.channel_per_real();
    let wants_omega = setup.series.iter().any(|s| s.parameter == Parameter::Omega);
    let omega = if wants_omega && setup.cfg.omega_crb == OmegaCrb::Structured {
        let values: Vec<Complex64> = (0..setup.map.class_count())
            .map(|c| setup.channel.matrix()[setup.map.members(c)[0]])
            .collect();
        let report = structured_crb(&setup.map, &x, &values, Some(0.0), 1.0)?;
        if report.condition > CONDITION_WARN {
            log::warn!("omega bound for N = {n} has condition number {:.3e}", report.condition);
        }
        report.omega_mean()
    } else {
        None
    };
    Ok((channel, omega))
}

fn mean_and_error(values: impl Iterator<Item = f64>, trials: usize) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for v in values {
        sum += v;
        sum_sq += v * v;
    }
    let n = trials as f64;
    let mean = sum / n;
    if trials < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

fn grid_points(cfg: &ExperimentConfig) -> Vec<GridPoint> {
    let impaired: Vec<f64> = cfg.position_sigmas.iter().copied().filter(|s| *s > 0.0).collect();
    let mut points = Vec::new();
    for &sigma_pos in &cfg.position_sigmas {
        let impaired_label = (sigma_pos > 0.0).then(|| {
            if impaired.len() == 1 {
                "impaired".to_string()
            } else {
                format!("impaired_{sigma_pos:e}")
            }
        });
        for (ny, nx) in cfg.grids() {
            for &snr_db in &cfg.snr_db {
                points.push(GridPoint {
                    index: points.len(),
                    sigma_pos,
                    impaired_label: impaired_label.clone(),
                    grid: GridShape::new(ny, nx),
                    snr_db,
                });
            }
        }
    }
    points
}

fn run_point(cfg: &ExperimentConfig, point: &GridPoint) -> Result<Vec<MseRecord>, HarnessError> {
    let wrap = |source: CoreError| HarnessError::Estimator {
        point: point.describe(),
        source,
    };
    let n = point.grid.len();
    let link = LinkConfig::optimal_symmetric(point.grid, cfg.distance, cfg.wavelength, cfg.symbol_rate).map_err(wrap)?;
    let channel = ChannelMatrix::from_link(&link).map_err(wrap)?;
    let map = structure_map(point.grid.rows, point.grid.cols);
    let series = build_series(cfg, n);
    let max_p = series.iter().map(|s| s.pilots).max().unwrap_or(1);
    let setup = Setup {
        cfg,
        training: training_shifted_identity(max_p, n).map_err(wrap)?,
        link,
        channel,
        map,
        series,
        noise_variance: snr_to_noise_variance(point.snr_db),
    };
    let (unit_channel, unit_omega) = unit_bounds(&setup).map_err(wrap)?;

    let outcomes: Vec<(Vec<f64>, Option<f64>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(&setup, point, t))
        .collect::<Result<_, _>>()
        .map_err(wrap)?;

    let sigma2 = setup.noise_variance;
    let omega_crb = match cfg.omega_crb {
        OmegaCrb::Structured => unit_omega.map(|v| v * sigma2),
        OmegaCrb::PerAntenna => {
            let vals: Vec<f64> = outcomes.iter().filter_map(|o| o.1).collect();
            (!vals.is_empty()).then(|| sigma2 * vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    let bound = |p: Parameter| match p {
        Parameter::Channel => unit_channel * sigma2,
        Parameter::Omega => omega_crb.unwrap_or(f64::NAN),
    };

    let record = |parameter: Parameter, estimator: String, pilots: usize, mse: f64, se: f64| MseRecord {
        experiment: cfg.name.clone(),
        parameter,
        estimator,
        snr_db: point.snr_db,
        n_antennas: n,
        p_pilots: pilots,
        mse,
        crb: bound(parameter),
        mc_std_error: se,
        trials: cfg.trials,
        seed: cfg.seed,
    };

    let mut records = Vec::new();
    if point.impaired_label.is_none() {
        for parameter in [Parameter::Channel, Parameter::Omega] {
            if setup.series.iter().any(|s| s.parameter == parameter) {
                let b = bound(parameter);
                records.push(record(parameter, "crb".to_string(), n, b, 0.0));
            }
        }
    }
    for (k, s) in setup.series.iter().enumerate() {
        let (mse, se) = mean_and_error(outcomes.iter().map(|o| o.0[k]), cfg.trials);
        let mut name = s.estimator.as_str().to_string();
        if let Some(label) = &point.impaired_label {
            name = format!("{name}_{label}");
        }
        records.push(record(s.parameter, name, s.pilots, mse, se));
    }
    Ok(records)
}

/// Bound rows alone for every ideal-geometry grid point, no trials.
pub fn bound_records(cfg: &ExperimentConfig) -> Result<Vec<MseRecord>, HarnessError> {
    cfg.validate()?;
    let mut records = Vec::new();
    for point in grid_points(cfg).into_iter().filter(|p| p.sigma_pos == 0.0) {
        let wrap = |source: CoreError| HarnessError::Estimator {
            point: point.describe(),
            source,
        };
        let n = point.grid.len();
        let link = LinkConfig::optimal_symmetric(point.grid, cfg.distance, cfg.wavelength, cfg.symbol_rate).map_err(wrap)?;
        let channel = ChannelMatrix::from_link(&link).map_err(wrap)?;
        let map = structure_map(point.grid.rows, point.grid.cols);
        let series = build_series(cfg, n);
        let setup = Setup {
            cfg,
            training: training_shifted_identity(n, n).map_err(wrap)?,
            link,
            channel,
            map,
            series,
            noise_variance: snr_to_noise_variance(point.snr_db),
        };
        let (unit_channel, unit_omega) = unit_bounds(&setup).map_err(wrap)?;
        let sigma2 = setup.noise_variance;
        let mut push = |parameter: Parameter, value: f64| {
            records.push(MseRecord {
                experiment: cfg.name.clone(),
                parameter,
                estimator: "crb".to_string(),
                snr_db: point.snr_db,
                n_antennas: n,
                p_pilots: n,
                mse: value,
                crb: value,
                mc_std_error: 0.0,
                trials: 0,
                seed: cfg.seed,
            })
        };
        if cfg.parameters.contains(&Parameter::Channel) {
            push(Parameter::Channel, unit_channel * sigma2);
        }
        if let Some(w) = unit_omega {
            push(Parameter::Omega, w * sigma2);
        }
    }
    Ok(records)
}

/// Runs every grid point of `cfg` on the global thread pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MseRecord>, HarnessError> {
    cfg.validate()?;
    let mut records = Vec::new();
    for point in grid_points(cfg) {
        log::debug!("running {}", point.describe());
        records.extend(run_point(cfg, &point)?);
    }
    Ok(records)
}

/// [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<MseRecord>, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(|| run_experiment(cfg))
}

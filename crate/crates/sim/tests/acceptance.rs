//! Acceptance criteria. Every check prints one `[PASS]` or `[FAIL]` line;
//! run with `--nocapture` to see them all.

use std::sync::OnceLock;

use losmimo_core::channel::{condition_number, structure_map, within_class_spread, ChannelMatrix};
use losmimo_core::crb::{crb_no_offset, crb_with_offset, structured_crb, system_scale};
use losmimo_core::geometry::{GridShape, LinkConfig};
use losmimo_core::signal::{snr_to_noise_variance, training_orthogonal, training_shifted_identity, TrainingMatrix};
use losmimo_sim::output::csv_string;
use losmimo_sim::{run_experiment, run_experiment_with_threads, ExperimentConfig, MseRecord, Parameter};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SNR_GRID: [f64; 11] = [0.0, 3.0, 6.0, 9.0, 12.0, 15.0, 18.0, 21.0, 24.0, 27.0, 30.0];

struct Checks {
    name: &'static str,
    failed: Vec<String>,
    total: usize,
}

impl Checks {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            failed: Vec::new(),
            total: 0,
        }
    }

    fn check(&mut self, ok: bool, label: impl AsRef<str>) {
        let label = label.as_ref();
        self.total += 1;
        println!("[{}] {}: {}", if ok { "PASS" } else { "FAIL" }, self.name, label);
        if !ok {
            self.failed.push(label.to_string());
        }
    }

    fn finish(self) {
        assert!(
            self.failed.is_empty(),
            "{}: {} of {} checks failed:\n  {}",
            self.name,
            self.failed.len(),
            self.total,
            self.failed.join("\n  ")
        );
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn fig2() -> &'static [MseRecord] {
    static CELL: OnceLock<Vec<MseRecord>> = OnceLock::new();
    CELL.get_or_init(|| run_experiment(&ExperimentConfig::fig2()).expect("fig2 runs"))
}

fn fig3() -> &'static [MseRecord] {
    static CELL: OnceLock<Vec<MseRecord>> = OnceLock::new();
    CELL.get_or_init(|| run_experiment(&ExperimentConfig::fig3()).expect("fig3 runs"))
}

fn fig4() -> &'static [MseRecord] {
    static CELL: OnceLock<Vec<MseRecord>> = OnceLock::new();
    CELL.get_or_init(|| run_experiment(&ExperimentConfig::fig4()).expect("fig4 runs"))
}

fn find<'a>(records: &'a [MseRecord], parameter: Parameter, estimator: &str, snr: f64, n: usize, p: usize) -> &'a MseRecord {
    records
        .iter()
        .find(|r| r.parameter == parameter && r.estimator == estimator && r.snr_db == snr && r.n_antennas == n && r.p_pilots == p)
        .unwrap_or_else(|| panic!("no record {parameter:?} {estimator} snr={snr} N={n} P={p}"))
}

fn compare_mc(checks: &mut Checks, r: &MseRecord, target: f64, rel_tol: f64, what: &str) {
    let allowed = (rel_tol * target).max(3.0 * r.mc_std_error);
    let dev = (r.mse - target).abs();
    checks.check(
        dev <= allowed,
        format!(
            "{what} snr={} N={} P={}: mse={:.5e} target={:.5e} dev={:.1}% allowed={:.5e} (se={:.2e})",
            r.snr_db,
            r.n_antennas,
            r.p_pilots,
            r.mse,
            target,
            100.0 * dev / target,
            allowed,
            r.mc_std_error
        ),
    );
}

#[test]
fn criterion_1_offset_free_bounds() {
    let mut c = Checks::new("C1");
    let fig2_crb = [
        0.055555556, 0.027843735, 0.013954925, 0.00699403, 0.003505319, 0.001756821, 0.000880496, 0.000441293,
        0.000221171, 0.000110848, 5.56e-05,
    ];
    let fig3_crb = [
        0.083333333, 0.041765603, 0.020932387, 0.010491045, 0.005257978, 0.002635231, 0.00132, 0.000662, 0.000332,
        0.000166, 8.33e-05,
    ];
    for (m, table, label) in [(9usize, fig2_crb, "URA 3x3"), (6, fig3_crb, "ULA 6")] {
        let x = training_orthogonal(m, m).unwrap();
        for (snr, target) in SNR_GRID.iter().zip(table) {
            let sigma2 = snr_to_noise_variance(*snr);
            let bound = system_scale(&crb_no_offset(&x, sigma2).unwrap(), m).unwrap().channel_per_real();
            c.check(
                rel(bound, target) <= 5e-3,
                format!("{label} snr={snr}: bound={bound:.6e} target={target:.6e}"),
            );
        }
    }
    for (records, n, label) in [(fig2(), 9usize, "fig2 records"), (fig3(), 6, "fig3 records")] {
        for snr in SNR_GRID {
            let r = find(records, Parameter::Channel, "crb", snr, n, n);
            let want = snr_to_noise_variance(snr) / (2.0 * n as f64);
            c.check(rel(r.crb, want) <= 1e-12, format!("{label} snr={snr}: crb={:.6e}", r.crb));
        }
    }
    c.finish();
}

fn numeric_information(x: &TrainingMatrix, theta: &[f64], sigma2: f64) -> DMatrix<f64> {
    let xm = x.matrix();
    let n = xm.ncols();
    let mean = |t: &[f64]| -> Vec<Complex64> {
        (0..xm.nrows())
            .map(|p| {
                (0..n)
                    .map(|k| xm[(p, k)] * Complex64::cis((p + 1) as f64 * t[2 * n + k]) * Complex64::new(t[k], t[n + k]))
                    .sum()
            })
            .collect()
    };
    let step = 1e-6;
    let jac: Vec<Vec<Complex64>> = (0..theta.len())
        .map(|i| {
            let mut up = theta.to_vec();
            let mut down = theta.to_vec();
            up[i] += step;
            down[i] -= step;
            mean(&up).iter().zip(mean(&down)).map(|(a, b)| (a - b) / (2.0 * step)).collect()
        })
        .collect();
    DMatrix::from_fn(theta.len(), theta.len(), |i, j| {
        2.0 * jac[i].iter().zip(&jac[j]).map(|(a, b)| (a.conj() * b).re).sum::<f64>() / sigma2
    })
}

#[test]
fn criterion_2_frequency_offset_bound() {
    let mut c = Checks::new("C2");

    // finite-difference oracle, 2x2 link, P = 3
    let link = LinkConfig::optimal_symmetric(GridShape::new(2, 1), 5.0, 0.005, 1e9).unwrap();
    let h = ChannelMatrix::from_link(&link).unwrap();
    let x = training_orthogonal(3, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for m in 0..2 {
        let row: Vec<Complex64> = (0..2).map(|n| h.matrix()[(m, n)]).collect();
        let w: Vec<f64> = (0..2).map(|_| rng.random_range(-0.5..0.5)).collect();
        let report = crb_with_offset(&x, &w, &row, 0.5).unwrap();
        let theta = [row[0].re, row[1].re, row[0].im, row[1].im, w[0], w[1]];
        let numeric = numeric_information(&x, &theta, 0.5);
        let err = (&report.information - &numeric).amax() / numeric.amax();
        c.check(err <= 1e-6, format!("2x2 P=3 antenna {m}: information vs finite differences, max rel err {err:.2e}"));
    }

    // per-antenna bound with P = N shifted-identity pilots, divided by M
    let targets = [
        (6usize, 0.0, 0.042463),
        (6, 12.0, 0.0026792),
        (6, 30.0, 4.25e-05),
        (4, 20.0, 7.68e-4),
        (16, 20.0, 1.65e-5),
        (32, 20.0, 2.22e-6),
    ];
    for (n, snr, target) in targets {
        let sigma2 = snr_to_noise_variance(snr);
        let link = LinkConfig::optimal_symmetric(GridShape::new(n, 1), 5.0, 0.005, 1e9).unwrap();
        let h = ChannelMatrix::from_link(&link).unwrap();
        let row: Vec<Complex64> = h.matrix().row(0).iter().copied().collect();
        let x = training_shifted_identity(n, n).unwrap();
        let map = structure_map(n, 1);
        let classes: Vec<Complex64> = (0..n).map(|k| h.matrix()[map.members(k)[0]]).collect();
        let structured = structured_crb(&map, &x, &classes, Some(0.0), sigma2).unwrap().omega_mean().unwrap();
        for (label, omega) in [("drawn offset", 0.37), ("zero offset", 0.0)] {
            let got = crb_with_offset(&x, &vec![omega; n], &row, sigma2)
                .and_then(|r| system_scale(&r, n))
                .map(|r| r.omega_mean().unwrap());
            match got {
                Ok(v) => c.check(
                    rel(v, target) <= 0.02,
                    format!("N={n} snr={snr} ({label}): bound={v:.5e} target={target:.5e}"),
                ),
                Err(e) => c.check(
                    false,
                    format!(
                        "N={n} snr={snr} ({label}): per-antenna bound unavailable ({e}); target={target:.5e}, structured link bound={structured:.5e}"
                    ),
                ),
            }
        }
    }
    c.finish();
}

#[test]
fn criterion_3_fig2_monte_carlo() {
    let mut c = Checks::new("C3");
    let data: [(&str, usize, [f64; 3]); 5] = [
        ("ls", 9, [0.501229598, 0.031524063, 0.000499969]),
        ("toeplitz", 1, [0.49923185, 0.031415894, 0.00050243]),
        ("toeplitz", 3, [0.223603354, 0.013852421, 0.000220988]),
        ("toeplitz", 6, [0.118967064, 0.007524501, 0.000118242]),
        ("toeplitz", 9, [0.073717864, 0.004705678, 7.38e-05]),
    ];
    for (est, p, targets) in data {
        for (snr, target) in [0.0, 12.0, 30.0].into_iter().zip(targets) {
            let r = find(fig2(), Parameter::Channel, est, snr, 9, p);
            compare_mc(&mut c, r, target, 0.10, &format!("channel {est}"));
        }
    }
    c.finish();
}

#[test]
fn criterion_4_fig3_monte_carlo() {
    let mut c = Checks::new("C4");
    let omega: [(usize, [f64; 3]); 3] = [
        (2, [0.2795595, 0.006461505, 0.000200761]),
        (4, [0.140588181, 0.003212213, 0.0001]),
        (6, [0.092850049, 0.002126708, 6.61e-05]),
    ];
    let channel: [(usize, [f64; 3]); 3] = [
        (2, [0.521448868, 0.015361157, 0.000482196]),
        (4, [0.427037224, 0.014140171, 0.000445]),
        (6, [0.095466693, 0.003028409, 9.58e-05]),
    ];
    for (parameter, table) in [(Parameter::Omega, omega), (Parameter::Channel, channel)] {
        for (p, targets) in table {
            for (snr, target) in [0.0, 15.0, 30.0].into_iter().zip(targets) {
                let r = find(fig3(), parameter, "consecutive", snr, 6, p);
                compare_mc(&mut c, r, target, 0.15, parameter.as_str());
            }
        }
    }
    c.finish();
}

#[test]
fn criterion_5_fig4_monte_carlo() {
    let mut c = Checks::new("C5");
    let sizes = [4usize, 8, 12, 16, 20, 24, 28, 32];
    let full = [0.001676784, 0.000359505, 0.000153095, 8.34e-05, 5.28e-05, 3.7e-05, 2.66e-05, 2.02e-05];
    let half = [0.00332722, 0.000719261, 0.000306518, 0.000165815, 0.000105659, 7.24e-05, 5.33e-05, 4.03e-05];
    for (k, &n) in sizes.iter().enumerate() {
        compare_mc(&mut c, find(fig4(), Parameter::Omega, "consecutive", 20.0, n, n), full[k], 0.15, "omega P=N");
        compare_mc(&mut c, find(fig4(), Parameter::Omega, "consecutive", 20.0, n, n / 2), half[k], 0.15, "omega P=N/2");
    }
    let ideal = find(fig4(), Parameter::Omega, "consecutive", 20.0, 32, 32);
    let impaired = find(fig4(), Parameter::Omega, "consecutive_impaired", 20.0, 32, 32);
    c.check(
        impaired.mse >= 3.0 * ideal.mse,
        format!("impaired floor N=32: {:.4e} vs ideal {:.4e} ({:.1}x)", impaired.mse, ideal.mse, impaired.mse / ideal.mse),
    );
    for pilots in ["P=N", "P=N/2"] {
        for w in sizes.windows(2) {
            let p = |n: usize| if pilots == "P=N" { n } else { n / 2 };
            let a = find(fig4(), Parameter::Omega, "consecutive", 20.0, w[0], p(w[0]));
            let b = find(fig4(), Parameter::Omega, "consecutive", 20.0, w[1], p(w[1]));
            let slack = 2.0 * (a.mc_std_error.powi(2) + b.mc_std_error.powi(2)).sqrt();
            c.check(
                b.mse <= a.mse + slack,
                format!("{pilots} monotone in N: N={} {:.4e} -> N={} {:.4e}", w[0], a.mse, w[1], b.mse),
            );
        }
    }
    c.finish();
}

#[test]
fn criterion_6_property_suite() {
    let mut c = Checks::new("C6");

    // noiseless exactness through the full harness
    for mut cfg in [ExperimentConfig::fig2(), ExperimentConfig::fig3(), ExperimentConfig::fig4()] {
        cfg.trials = 5;
        cfg.snr_db = vec![f64::INFINITY];
        cfg.position_sigmas = vec![0.0];
        let records = run_experiment(&cfg).unwrap();
        let worst = records.iter().map(|r| r.mse).fold(0.0, f64::max);
        c.check(worst.sqrt() <= 1e-10, format!("{} noiseless: worst rms error {:.2e}", cfg.name, worst.sqrt()));
    }

    // bounds: PSD and linear in the noise variance
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_psd = 0.0f64;
    let mut worst_lin = 0.0f64;
    for n in 1..=5 {
        for extra in [1usize, 3] {
            let x = training_orthogonal(2 * n + extra, n).unwrap();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h: Vec<Complex64> = (0..n).map(|_| Complex64::cis(rng.random_range(0.0..6.28))).collect();
            for report in [crb_with_offset(&x, &w, &h, 0.7).unwrap(), crb_no_offset(&x, 0.7).unwrap()] {
                let eig = report.covariance.clone().symmetric_eigen().eigenvalues;
                worst_psd = worst_psd.max(-eig.min() / eig.max());
            }
            let a = crb_with_offset(&x, &w, &h, 0.7).unwrap().covariance;
            let b = crb_with_offset(&x, &w, &h, 2.1).unwrap().covariance;
            worst_lin = worst_lin.max((&b - &a * 3.0).amax() / b.amax());
        }
    }
    c.check(worst_psd <= 1e-10, format!("bound covariances PSD: worst relative negative eigenvalue {worst_psd:.2e}"));
    c.check(worst_lin <= 1e-10, format!("bounds linear in noise variance: worst relative deviation {worst_lin:.2e}"));

    // condition number under unit-modulus diagonal scalings
    let mut worst_cond = 0.0f64;
    for n in 2..=8 {
        let link = LinkConfig::optimal_symmetric(GridShape::new(n, 1), 5.0, 0.005, 1e9).unwrap();
        let h = ChannelMatrix::from_link(&link).unwrap();
        for _ in 0..10 {
            let dr = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| Complex64::cis(rng.random_range(0.0..6.28))));
            let dt = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| Complex64::cis(rng.random_range(0.0..6.28))));
            let base = condition_number(h.matrix());
            worst_cond = worst_cond.max(rel(condition_number(&(&dr * h.matrix() * &dt)), base));
        }
    }
    c.check(worst_cond <= 1e-10, format!("condition number invariance: worst relative change {worst_cond:.2e}"));

    // class equality on ideal geometry
    let mut worst_spread = 0.0f64;
    for (rows, cols) in [(2, 1), (6, 1), (32, 1), (1, 5), (3, 3), (2, 4), (4, 4)] {
        let link = LinkConfig::optimal_symmetric(GridShape::new(rows, cols), 5.0, 0.005, 1e9).unwrap();
        let h = ChannelMatrix::from_link(&link).unwrap();
        worst_spread = worst_spread.max(within_class_spread(h.matrix(), &h.structure().unwrap()).unwrap());
    }
    c.check(worst_spread <= 1e-9, format!("structure classes on ideal geometry: worst spread {worst_spread:.2e}"));

    // determinism across runs and thread counts
    for mut cfg in [ExperimentConfig::fig2(), ExperimentConfig::fig3(), ExperimentConfig::fig4()] {
        cfg.trials = 300;
        let reference = csv_string(&run_experiment_with_threads(&cfg, 1).unwrap());
        let same = [1usize, 2, 4, 7]
            .iter()
            .all(|&t| csv_string(&run_experiment_with_threads(&cfg, t).unwrap()) == reference);
        c.check(same, format!("{} CSV bit-identical over runs with 1, 2, 4 and 7 threads", cfg.name));
    }
    c.finish();
}

#[test]
fn criterion_7_structure_beats_least_squares() {
    let mut c = Checks::new("C7");
    for snr in SNR_GRID {
        let t = find(fig2(), Parameter::Channel, "toeplitz", snr, 9, 9);
        let ls = find(fig2(), Parameter::Channel, "ls", snr, 9, 9);
        let slack = 2.0 * t.mc_std_error.max(ls.mc_std_error);
        c.check(
            t.mse <= ls.mse + slack,
            format!("snr={snr}: toeplitz P=9 {:.4e} vs LS {:.4e}", t.mse, ls.mse),
        );
    }
    c.finish();
}

#[test]
fn invariant_bound_dominance() {
    let mut c = Checks::new("CRB dominance");
    for records in [fig2(), fig3(), fig4()] {
        for r in records.iter().filter(|r| r.estimator != "crb") {
            c.check(
                r.mse + 3.0 * r.mc_std_error >= r.crb,
                format!(
                    "{} {} {} snr={} N={} P={}: mse={:.4e} crb={:.4e}",
                    r.experiment,
                    r.parameter.as_str(),
                    r.estimator,
                    r.snr_db,
                    r.n_antennas,
                    r.p_pilots,
                    r.mse,
                    r.crb
                ),
            );
        }
    }
    c.finish();
}

#[test]
fn invariant_optimal_spacing_orthogonality() {
    let mut c = Checks::new("optimal spacing");
    for n in 2..=8 {
        let link = LinkConfig::optimal_symmetric(GridShape::new(n, 1), 5.0, 0.005, 1e9).unwrap();
        let h = ChannelMatrix::from_link(&link).unwrap();
        let g = h.matrix().adjoint() * h.matrix();
        let dev = (g - DMatrix::<Complex64>::identity(n, n) * Complex64::new(n as f64, 0.0)).norm() / n as f64;
        c.check(dev <= 1e-2, format!("N={n}: ||H^H H - N I||_F / N = {dev:.4e} (limit 1e-2)"));
    }
    let link = LinkConfig::optimal_symmetric(GridShape::new(4, 1), 5.0, 0.005, 1e9).unwrap();
    let cond = condition_number(ChannelMatrix::from_link(&link).unwrap().matrix());
    c.check(cond <= 1.0 + 1e-3, format!("N=4: condition number {cond:.6} (limit 1.001)"));
    c.finish();
}

//! Repeated-trial harness and the closed-form noise-moment predictions it is
//! checked against.
//!
//! Every trial draws one contiguous noise stream from a sub-seed derived from
//! `(root_seed, trial index)`, so results do not depend on how trials are
//! scheduled across threads. Aggregation runs in ascending trial order.

use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{derive_seed, rng_from_seed, NoiseKind, NoiseModel};
use crate::signal::{generate_sinusoid, SampleRecord, WindowPlan};
use crate::spectral::{bartlett_bin, ccp_bin, hann, theorem_excluded_bins, BinDft, BinReduction};

/// Environment variable capping the number of Monte Carlo worker threads.
pub const THREADS_ENV: &str = "CCP_THREADS";

const NOISE_STREAM: u64 = 0;

/// Thresholds used by the theorem checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Maximum |z| for mean comparisons.
    pub z_limit: f64,
    /// Relative tolerance on the second moment.
    pub second_moment_rel: f64,
    /// Allowed deviation of Var(CCP)/Var(Bartlett) from 1/2.
    pub variance_ratio_abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            z_limit: 4.0,
            second_moment_rel: 0.05,
            variance_ratio_abs: 0.075,
        }
    }
}

/// A per-bin estimator evaluated in each trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Bartlett,
    /// Hann-tapered Bartlett without taper-power compensation.
    Welch,
    Ccp(BinReduction),
}

impl Estimator {
    pub fn is_ccp(&self) -> bool {
        matches!(self, Estimator::Ccp(_))
    }

    pub fn label(&self) -> String {
        match self {
            Estimator::Bartlett => "bartlett".into(),
            Estimator::Welch => "welch".into(),
            Estimator::Ccp(BinReduction::Real) => "ccp_real".into(),
            Estimator::Ccp(BinReduction::Abs) => "ccp_abs".into(),
            Estimator::Ccp(BinReduction::ModulusOfMean) => "ccp_modulus_of_mean".into(),
            Estimator::Ccp(BinReduction::Rotated(theta)) => format!("ccp_rotated({theta})"),
        }
    }

    fn min_windows(&self) -> usize {
        if self.is_ccp() {
            2
        } else {
            1
        }
    }
}

/// Everything needed to reproduce one Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    /// Deterministic signal added to every noise realization.
    pub signal: Option<SampleRecord>,
    pub noise: NoiseModel,
    pub plan: WindowPlan,
    pub estimator: Estimator,
    pub target_bins: Vec<usize>,
    pub num_trials: usize,
    pub root_seed: u64,
    /// Attach the white-noise moment predictions to the summary. Requires
    /// `M >= 3` and excludes bins 0 and L/2.
    pub attach_predictions: bool,
}

impl TrialSpec {
    /// Pure-noise spec with predictions attached.
    pub fn noise_only(
        noise: NoiseModel,
        plan: WindowPlan,
        estimator: Estimator,
        target_bins: Vec<usize>,
        num_trials: usize,
        root_seed: u64,
    ) -> Self {
        Self {
            signal: None,
            noise,
            plan,
            estimator,
            target_bins,
            num_trials,
            root_seed,
            attach_predictions: true,
        }
    }

    pub fn with_signal(mut self, signal: SampleRecord) -> Self {
        self.signal = Some(signal);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_for(&[self.estimator])
    }

    fn validate_for(&self, estimators: &[Estimator]) -> Result<()> {
        let len = self.plan.window_len();
        let m = self.plan.num_windows();
        if self.num_trials == 0 {
            return Err(Error::invalid("num_trials", "must be at least 1"));
        }
        if self.target_bins.is_empty() {
            return Err(Error::invalid("target_bins", "need at least one bin"));
        }
        if let Some(&bin) = self.target_bins.iter().find(|&&b| b >= len) {
            return Err(Error::BinOutOfRange {
                bin,
                window_len: len,
            });
        }
        for est in estimators {
            if m < est.min_windows() {
                return Err(Error::TooFewWindows {
                    context: "the cross-correlation periodogram",
                    required: est.min_windows(),
                    found: m,
                });
            }
        }
        if self.attach_predictions && estimators.iter().any(Estimator::is_ccp) {
            if m < 3 {
                return Err(Error::TooFewWindows {
                    context: "comparison against the white-noise moment predictions",
                    required: 3,
                    found: m,
                });
            }
            let excluded = theorem_excluded_bins(len);
            if let Some(b) = self.target_bins.iter().find(|b| excluded.contains(b)) {
                return Err(Error::invalid(
                    "target_bins",
                    format!("bin {b} is outside the range the moment predictions cover (0 and L/2 excluded)"),
                ));
            }
        }
        if let Some(sig) = &self.signal {
            if sig.len() < self.plan.required_samples() {
                return Err(Error::PlanTooLarge {
                    required: self.plan.required_samples(),
                    available: sig.len(),
                });
            }
        }
        Ok(())
    }
}

/// Closed-form white-Gaussian-noise moments of the signed CCP at one bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Prediction {
    pub mean: f64,
    pub variance: f64,
    pub abs_bound: f64,
}

/// `E(P_n) = 0`, `Var(P_n) = σ⁴/(2M)`, `E|P_n| ≤ σ²/√(2M)`; valid for `M >= 3`.
pub fn predict_theorem1(sigma: f64, num_windows: usize) -> Result<Theorem1Prediction> {
    require_three(num_windows)?;
    let m2 = 2.0 * num_windows as f64;
    let var = sigma * sigma;
    Ok(Theorem1Prediction {
        mean: 0.0,
        variance: var * var / m2,
        abs_bound: var / m2.sqrt(),
    })
}

/// Upper bound on `E|P_y(f)| − |X(f)|²`: `σ√π·|X(f)| + σ²/√(2M)`.
pub fn predict_bias_bound(sigma: f64, num_windows: usize, signal_mag: f64) -> Result<f64> {
    require_three(num_windows)?;
    if signal_mag < 0.0 {
        return Err(Error::invalid("signal_mag", "must be nonnegative"));
    }
    Ok(sigma * std::f64::consts::PI.sqrt() * signal_mag
        + sigma * sigma / (2.0 * num_windows as f64).sqrt())
}

fn require_three(num_windows: usize) -> Result<()> {
    if num_windows < 3 {
        return Err(Error::TooFewWindows {
            context: "the white-noise moment predictions",
            required: 3,
            found: num_windows,
        });
    }
    Ok(())
}

/// Aggregated statistics at one target bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub bin: usize,
    pub sample_mean: f64,
    pub standard_error: f64,
    pub sample_second_moment: f64,
    pub sample_variance: f64,
    pub predicted_mean: Option<f64>,
    pub predicted_bound_abs: Option<f64>,
    pub predicted_second_moment: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub estimator: Estimator,
    pub noise: NoiseModel,
    pub num_trials: usize,
    pub num_windows: usize,
    pub window_len: usize,
    pub root_seed: u64,
    pub bins: Vec<BinSummary>,
}

/// Column order of the bound table.
pub const BOUND_TABLE_COLUMNS: [&str; 6] = [
    "windows",
    "mean",
    "se",
    "mean_bound",
    "sample_mean_sq",
    "pred_mean_sq",
];

impl MonteCarloSummary {
    pub fn bin(&self, bin: usize) -> Option<&BinSummary> {
        self.bins.iter().find(|b| b.bin == bin)
    }

    /// `windows, mean, se, mean_bound, sample_mean_sq, pred_mean_sq` for `bin`.
    pub fn bound_table_row(&self, bin: usize) -> Option<[f64; 6]> {
        let b = self.bin(bin)?;
        Some([
            self.num_windows as f64,
            b.sample_mean,
            b.standard_error,
            b.predicted_bound_abs.unwrap_or(f64::NAN),
            b.sample_second_moment,
            b.predicted_second_moment.unwrap_or(f64::NAN),
        ])
    }

    pub fn to_csv(&self) -> String {
        let mut out = BOUND_TABLE_COLUMNS.join(",");
        out.push('\n');
        for b in &self.bins {
            if let Some(row) = self.bound_table_row(b.bin) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
        }
        out
    }
}

/// Raw per-trial values, laid out `[trial][estimator][bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialValues {
    pub estimators: Vec<Estimator>,
    pub bins: Vec<usize>,
    pub num_trials: usize,
    values: Vec<f64>,
}

impl TrialValues {
    /// Values of one estimator at one bin position, in trial order.
    pub fn series(&self, estimator: usize, bin_pos: usize) -> Vec<f64> {
        let stride = self.estimators.len() * self.bins.len();
        let offset = estimator * self.bins.len() + bin_pos;
        (0..self.num_trials)
            .map(|t| self.values[t * stride + offset])
            .collect()
    }
}

fn worker_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
        {
            builder = builder.num_threads(n);
        }
        builder
            .build()
            .expect("failed to build Monte Carlo worker pool")
    })
}

struct Workspace {
    samples: Vec<f64>,
    tapered: Vec<f64>,
    plain: Vec<Complex64>,
    welch: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

/// Runs every trial of `spec` and evaluates each of `estimators` on the same
/// realizations.
pub fn trial_values(spec: &TrialSpec, estimators: &[Estimator]) -> Result<TrialValues> {
    spec.validate_for(estimators)?;
    let plan = spec.plan;
    let len = plan.window_len();
    let m = plan.num_windows();
    let nb = spec.target_bins.len();
    let n_samples = plan.required_samples();
    let projector = BinDft::new(len, &spec.target_bins)?;
    let need_welch = estimators.contains(&Estimator::Welch);
    let taper = hann(len);
    let per_trial = estimators.len() * nb;

    let run_trial = |ws: &mut Workspace, trial: usize, out: &mut [f64]| {
        let mut rng = rng_from_seed(derive_seed(spec.root_seed, NOISE_STREAM, trial as u64));
        spec.noise.fill(&mut rng, &mut ws.samples);
        if let Some(sig) = &spec.signal {
            for (y, x) in ws.samples.iter_mut().zip(sig.samples()) {
                *y += x;
            }
        }
        for w in 0..m {
            let start = plan.window_start(w);
            let window = &ws.samples[start..start + len];
            projector.project(window, &mut ws.scratch);
            for (b, v) in ws.scratch.iter().enumerate() {
                ws.plain[b * m + w] = *v;
            }
            if need_welch {
                for ((t, x), h) in ws.tapered.iter_mut().zip(window).zip(&taper) {
                    *t = x * h;
                }
                projector.project(&ws.tapered, &mut ws.scratch);
                for (b, v) in ws.scratch.iter().enumerate() {
                    ws.welch[b * m + w] = *v;
                }
            }
        }
        for (e, est) in estimators.iter().enumerate() {
            for b in 0..nb {
                let col = &ws.plain[b * m..(b + 1) * m];
                out[e * nb + b] = match est {
                    Estimator::Bartlett => bartlett_bin(col),
                    Estimator::Welch => bartlett_bin(&ws.welch[b * m..(b + 1) * m]),
                    Estimator::Ccp(r) => ccp_bin(col, *r),
                };
            }
        }
    };

    let mut values = vec![0.0; spec.num_trials * per_trial];
    let fill = |values: &mut [f64]| {
        values.par_chunks_mut(per_trial).enumerate().for_each_init(
            || Workspace {
                samples: vec![0.0; n_samples],
                tapered: vec![0.0; len],
                plain: vec![Complex64::new(0.0, 0.0); nb * m],
                welch: vec![Complex64::new(0.0, 0.0); if need_welch { nb * m } else { 0 }],
                scratch: vec![Complex64::new(0.0, 0.0); nb],
            },
            |ws, (trial, out)| run_trial(ws, trial, out),
        );
    };
    // Inside a caller's rayon pool, stay on it; otherwise use the capped pool.
    if rayon::current_thread_index().is_some() {
        fill(&mut values);
    } else {
        worker_pool().install(|| fill(&mut values));
    }

    Ok(TrialValues {
        estimators: estimators.to_vec(),
        bins: spec.target_bins.clone(),
        num_trials: spec.num_trials,
        values,
    })
}

/// Sample statistics of one series; aggregation order is the slice order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub standard_error: f64,
    pub second_moment: f64,
}

pub fn moments(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let second_moment = xs.iter().map(|x| x * x).sum::<f64>() / n;
    let variance = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Moments {
        mean,
        variance,
        standard_error: (variance / n).sqrt(),
        second_moment,
    }
}

fn summarize(spec: &TrialSpec, values: &TrialValues, est_idx: usize) -> Result<MonteCarloSummary> {
    let estimator = values.estimators[est_idx];
    let prediction = if spec.attach_predictions && estimator.is_ccp() {
        Some(predict_theorem1(spec.noise.sigma, spec.plan.num_windows())?)
    } else {
        None
    };
    let bins = values
        .bins
        .iter()
        .enumerate()
        .map(|(pos, &bin)| {
            let mo = moments(&values.series(est_idx, pos));
            BinSummary {
                bin,
                sample_mean: mo.mean,
                standard_error: mo.standard_error,
                sample_second_moment: mo.second_moment,
                sample_variance: mo.variance,
                predicted_mean: prediction.map(|p| p.mean),
                predicted_bound_abs: prediction.map(|p| p.abs_bound),
                // Mean zero, so the second moment equals the variance.
                predicted_second_moment: prediction.map(|p| p.variance),
            }
        })
        .collect();
    Ok(MonteCarloSummary {
        estimator,
        noise: spec.noise,
        num_trials: spec.num_trials,
        num_windows: spec.plan.num_windows(),
        window_len: spec.plan.window_len(),
        root_seed: spec.root_seed,
        bins,
    })
}

/// Runs `spec` with its own estimator.
pub fn run_trials(spec: &TrialSpec) -> Result<MonteCarloSummary> {
    Ok(run_estimators(spec, &[spec.estimator])?.remove(0))
}

/// Runs `spec` once and summarizes each estimator over the shared realizations.
pub fn run_estimators(
    spec: &TrialSpec,
    estimators: &[Estimator],
) -> Result<Vec<MonteCarloSummary>> {
    let values = trial_values(spec, estimators)?;
    (0..estimators.len())
        .map(|e| summarize(spec, &values, e))
        .collect()
}

/// `cos(2π·bin·t/L + phase)` scaled so that `|X(bin)|² = power`; exactly
/// L-periodic for `0 < bin < L/2`.
pub fn periodic_tone(
    bin: usize,
    window_len: usize,
    power: f64,
    phase: f64,
    num_samples: usize,
) -> Result<SampleRecord> {
    let amplitude = 2.0 * (power / window_len as f64).sqrt();
    generate_sinusoid(bin as f64, window_len as f64, amplitude, num_samples, phase)
}

/// Outcome of one mean comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinCheck {
    pub bin: usize,
    pub sample_mean: f64,
    pub expected: f64,
    pub standard_error: f64,
    /// Undefined when the standard error is zero.
    pub z: Option<f64>,
    pub pass: bool,
}

/// Compares the signed CCP sample mean with `|X(f)|²` at each target bin.
/// `true_psd[i]` is the noiseless power at `spec.target_bins[i]`.
pub fn check_unbiasedness(
    spec: &TrialSpec,
    true_psd: &[f64],
    tol: &Tolerances,
) -> Result<Vec<BinCheck>> {
    if spec.estimator != Estimator::Ccp(BinReduction::Real) {
        return Err(Error::Unsupported(
            "unbiasedness holds for the signed (real-part) CCP only".into(),
        ));
    }
    require_three(spec.plan.num_windows())?;
    if spec.plan.gap() != 0 {
        return Err(Error::invalid(
            "plan",
            "unbiasedness needs contiguous windows (gap = 0)",
        ));
    }
    if spec.num_trials < 100 {
        return Err(Error::invalid(
            "num_trials",
            "need at least 100 trials for a standard-error claim",
        ));
    }
    if true_psd.len() != spec.target_bins.len() {
        return Err(Error::LengthMismatch {
            expected: spec.target_bins.len(),
            found: true_psd.len(),
        });
    }
    let mut spec = spec.clone();
    spec.attach_predictions = false;
    let summary = run_trials(&spec)?;
    Ok(summary
        .bins
        .iter()
        .zip(true_psd)
        .map(|(b, &expected)| {
            z_check(
                b.bin,
                b.sample_mean,
                expected,
                b.standard_error,
                tol.z_limit,
            )
        })
        .collect())
}

fn z_check(bin: usize, mean: f64, expected: f64, se: f64, z_limit: f64) -> BinCheck {
    let diff = mean - expected;
    // A standard error at rounding level means every trial was identical.
    let degenerate = se <= 1e-12 * expected.abs().max(mean.abs()).max(1.0);
    let (z, pass) = if !degenerate {
        let z = diff / se;
        (Some(z), z.abs() <= z_limit)
    } else {
        (None, diff.abs() <= 1e-10 * expected.abs().max(1.0))
    };
    BinCheck {
        bin,
        sample_mean: mean,
        expected,
        standard_error: se,
        z,
        pass,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceOrdering {
    pub bin: usize,
    pub ccp_variance: f64,
    pub bartlett_variance: f64,
    pub ratio: f64,
    pub predicted_ratio: f64,
    pub pass: bool,
}

/// Sample variance of the signed CCP against Bartlett on shared pure-Gaussian
/// realizations; passes when CCP is smaller and the ratio is near 1/2.
pub fn check_variance_ordering(
    spec: &TrialSpec,
    tol: &Tolerances,
) -> Result<Vec<VarianceOrdering>> {
    if spec.signal.is_some() || !matches!(spec.noise.kind, NoiseKind::Gaussian) {
        return Err(Error::Unsupported(
            "variance ordering is stated for pure Gaussian noise".into(),
        ));
    }
    require_three(spec.plan.num_windows())?;
    if spec.num_trials < 100 {
        return Err(Error::invalid(
            "num_trials",
            "need at least 100 trials for a variance comparison",
        ));
    }
    let values = trial_values(
        spec,
        &[Estimator::Ccp(BinReduction::Real), Estimator::Bartlett],
    )?;
    Ok(spec
        .target_bins
        .iter()
        .enumerate()
        .map(|(pos, &bin)| {
            let ccp_variance = moments(&values.series(0, pos)).variance;
            let bartlett_variance = moments(&values.series(1, pos)).variance;
            let ratio = ccp_variance / bartlett_variance;
            VarianceOrdering {
                bin,
                ccp_variance,
                bartlett_variance,
                ratio,
                predicted_ratio: 0.5,
                pass: ccp_variance < bartlett_variance
                    && (ratio - 0.5).abs() <= tol.variance_ratio_abs,
            }
        })
        .collect())
}

/// Theorem-1 style verdicts for one signed-CCP summary bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseMomentCheck {
    pub bin: usize,
    pub mean_zero: BinCheck,
    pub second_moment_rel_error: f64,
    pub second_moment_pass: bool,
}

pub fn check_noise_moments(
    summary: &MonteCarloSummary,
    tol: &Tolerances,
) -> Result<Vec<NoiseMomentCheck>> {
    if summary.estimator != Estimator::Ccp(BinReduction::Real) {
        return Err(Error::Unsupported(
            "moment checks apply to the signed CCP".into(),
        ));
    }
    let pred = predict_theorem1(summary.noise.sigma, summary.num_windows)?;
    Ok(summary
        .bins
        .iter()
        .map(|b| {
            let rel = (b.sample_second_moment - pred.variance) / pred.variance;
            NoiseMomentCheck {
                bin: b.bin,
                mean_zero: z_check(
                    b.bin,
                    b.sample_mean,
                    pred.mean,
                    b.standard_error,
                    tol.z_limit,
                ),
                second_moment_rel_error: rel,
                second_moment_pass: rel.abs() <= tol.second_moment_rel,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gaussian_spec(m: usize, trials: usize, est: Estimator) -> TrialSpec {
        TrialSpec::noise_only(
            NoiseModel::gaussian(1.0).unwrap(),
            WindowPlan::new(100, m).unwrap(),
            est,
            vec![10],
            trials,
            11,
        )
    }

    #[test]
    fn theorem1_table_values() {
        let p = predict_theorem1(1.0, 3).unwrap();
        assert_eq!(p.mean, 0.0);
        assert_abs_diff_eq!(p.variance, 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.abs_bound, 0.4082, epsilon = 5e-5);
        let p = predict_theorem1(1.0, 1000).unwrap();
        assert_abs_diff_eq!(p.variance, 0.0005, epsilon = 1e-15);
        assert_abs_diff_eq!(p.abs_bound, 0.02236, epsilon = 5e-6);
        let p = predict_theorem1(2.0, 8).unwrap();
        assert_abs_diff_eq!(p.variance, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.abs_bound, 1.0, epsilon = 1e-15);
        assert!(matches!(
            predict_theorem1(1.0, 2),
            Err(Error::TooFewWindows { .. })
        ));
    }

    #[test]
    fn bias_bound_values() {
        assert_abs_diff_eq!(
            predict_bias_bound(1.0, 10, 0.0).unwrap(),
            predict_theorem1(1.0, 10).unwrap().abs_bound
        );
        assert_abs_diff_eq!(
            predict_bias_bound(1.0, 10, 1.0).unwrap(),
            1.996,
            epsilon = 5e-4
        );
        assert_eq!(predict_bias_bound(0.0, 17, 3.0).unwrap(), 0.0);
        assert!(predict_bias_bound(1.0, 2, 1.0).is_err());
        assert!(predict_bias_bound(1.0, 5, -1.0).is_err());
    }

    #[test]
    fn moments_of_known_series() {
        let m = moments(&[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(m.mean, 2.5);
        assert_abs_diff_eq!(m.variance, 5.0 / 3.0);
        assert_abs_diff_eq!(m.second_moment, 7.5);
        assert_abs_diff_eq!(m.standard_error, (5.0f64 / 12.0).sqrt());
    }

    #[test]
    fn deterministic_summary() {
        let spec = gaussian_spec(5, 300, Estimator::Ccp(BinReduction::Abs));
        assert_eq!(run_trials(&spec).unwrap(), run_trials(&spec).unwrap());
        let mut other = spec.clone();
        other.root_seed += 1;
        assert_ne!(run_trials(&spec).unwrap(), run_trials(&other).unwrap());
    }

    #[test]
    fn shared_realizations_across_estimators() {
        let spec = gaussian_spec(4, 50, Estimator::Bartlett);
        let both = run_estimators(
            &spec,
            &[Estimator::Ccp(BinReduction::Real), Estimator::Bartlett],
        )
        .unwrap();
        let bart = run_trials(&spec).unwrap();
        assert_eq!(both[1].bins, bart.bins);
    }

    #[test]
    fn abs_and_real_share_second_moment() {
        let spec = gaussian_spec(5, 200, Estimator::Bartlett);
        let s = run_estimators(
            &spec,
            &[
                Estimator::Ccp(BinReduction::Real),
                Estimator::Ccp(BinReduction::Abs),
            ],
        )
        .unwrap();
        assert_abs_diff_eq!(
            s[0].bins[0].sample_second_moment,
            s[1].bins[0].sample_second_moment,
            epsilon = 1e-15
        );
        assert!(s[1].bins[0].sample_mean >= s[0].bins[0].sample_mean.abs());
    }

    #[test]
    fn predictions_refused_below_three_windows() {
        let spec = gaussian_spec(2, 10, Estimator::Ccp(BinReduction::Real));
        assert!(matches!(
            run_trials(&spec),
            Err(Error::TooFewWindows { required: 3, .. })
        ));
        let mut plain = spec;
        plain.attach_predictions = false;
        let s = run_trials(&plain).unwrap();
        assert!(s.bins[0].predicted_bound_abs.is_none());
    }

    #[test]
    fn predictions_refuse_edge_bins() {
        let mut spec = gaussian_spec(5, 10, Estimator::Ccp(BinReduction::Real));
        spec.target_bins = vec![50];
        assert!(run_trials(&spec).is_err());
        spec.target_bins = vec![0];
        assert!(run_trials(&spec).is_err());
        spec.target_bins = vec![100];
        assert!(matches!(
            run_trials(&spec),
            Err(Error::BinOutOfRange { .. })
        ));
    }

    #[test]
    fn unbiasedness_rejects_other_reductions() {
        let spec = gaussian_spec(5, 100, Estimator::Ccp(BinReduction::Abs));
        assert!(matches!(
            check_unbiasedness(&spec, &[0.0], &Tolerances::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn noiseless_unbiasedness_is_exact() {
        let plan = WindowPlan::new(100, 10).unwrap();
        let tone = periodic_tone(10, 100, 1.0, 0.4, plan.required_samples()).unwrap();
        let spec = TrialSpec {
            signal: Some(tone),
            noise: NoiseModel::gaussian(0.0).unwrap(),
            plan,
            estimator: Estimator::Ccp(BinReduction::Real),
            target_bins: vec![10, 20],
            num_trials: 100,
            root_seed: 3,
            attach_predictions: false,
        };
        let checks = check_unbiasedness(&spec, &[1.0, 0.0], &Tolerances::default()).unwrap();
        for c in &checks {
            assert!(c.pass, "{c:?}");
            assert!(c.z.is_none());
        }
        assert_abs_diff_eq!(checks[0].sample_mean, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn variance_ordering_rejects_two_windows() {
        let spec = gaussian_spec(2, 200, Estimator::Bartlett);
        assert!(check_variance_ordering(&spec, &Tolerances::default()).is_err());
    }

    #[test]
    fn welch_estimator_runs() {
        let spec = gaussian_spec(20, 200, Estimator::Welch);
        let s = run_trials(&spec).unwrap();
        // Uncompensated Hann taper: roughly 3/8 of the variance.
        assert!(
            (s.bins[0].sample_mean - 0.375).abs() < 0.05,
            "{}",
            s.bins[0].sample_mean
        );
    }

    #[test]
    fn bound_table_csv_layout() {
        let s = run_trials(&gaussian_spec(3, 100, Estimator::Ccp(BinReduction::Abs))).unwrap();
        let csv = s.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "windows,mean,se,mean_bound,sample_mean_sq,pred_mean_sq"
        );
        let row: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|c| c.parse().unwrap())
            .collect();
        assert_eq!(row[0], 3.0);
        assert_abs_diff_eq!(row[3], 1.0 / 6f64.sqrt());
    }
}

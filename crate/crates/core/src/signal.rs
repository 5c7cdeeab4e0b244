//! Time-domain records, test-signal generation and window partitioning.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite real-valued time series, optionally tagged with its sample rate in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    samples: Vec<f64>,
    sample_rate: Option<f64>,
}

impl SampleRecord {
    pub fn new(samples: Vec<f64>, sample_rate: Option<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some((index, &value)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index, value });
        }
        if let Some(rate) = sample_rate {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::invalid(
                    "sample_rate",
                    format!("must be positive, got {rate}"),
                ));
            }
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> Option<f64> {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Pointwise sum `self + other`, e.g. signal plus noise. The sample rate of
    /// `self` wins when both are set.
    pub fn superpose(&self, other: &SampleRecord) -> Result<SampleRecord> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a + b)
            .collect();
        SampleRecord::new(samples, self.sample_rate.or(other.sample_rate))
    }

    /// Serializes to the one-value-per-line format read by [`ingest_csv`],
    /// with 17 significant digits so every value round-trips.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 25 + 32);
        if let Some(rate) = self.sample_rate {
            let _ = writeln!(out, "# sample_rate={rate}");
        }
        for v in &self.samples {
            let _ = writeln!(out, "{v:.16e}");
        }
        out
    }
}

/// Partition of a record into `num_windows` windows of `window_len` samples,
/// with `gap` samples skipped between consecutive windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    window_len: usize,
    num_windows: usize,
    gap: usize,
}

impl WindowPlan {
    pub fn new(window_len: usize, num_windows: usize) -> Result<Self> {
        Self::with_gap(window_len, num_windows, 0)
    }

    pub fn with_gap(window_len: usize, num_windows: usize, gap: usize) -> Result<Self> {
        if window_len < 2 {
            return Err(Error::invalid(
                "window_len",
                format!("need at least 2 samples per window, got {window_len}"),
            ));
        }
        if num_windows == 0 {
            return Err(Error::invalid("num_windows", "need at least one window"));
        }
        Ok(Self {
            window_len,
            num_windows,
            gap,
        })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn num_windows(&self) -> usize {
        self.num_windows
    }

    pub fn gap(&self) -> usize {
        self.gap
    }

    /// Index of the first sample of window `m`.
    pub fn window_start(&self, m: usize) -> usize {
        m * (self.window_len + self.gap)
    }

    /// `M·L + (M−1)·gap`: the number of samples the plan consumes.
    pub fn required_samples(&self) -> usize {
        self.num_windows * self.window_len + (self.num_windows - 1) * self.gap
    }
}

/// `amplitude · cos(2π·freq_hz·t/sample_rate + phase)` for `t = 0..num_samples`.
pub fn generate_sinusoid(
    freq_hz: f64,
    sample_rate: f64,
    amplitude: f64,
    num_samples: usize,
    phase: f64,
) -> Result<SampleRecord> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::invalid(
            "sample_rate",
            format!("must be positive, got {sample_rate}"),
        ));
    }
    if !(freq_hz > 0.0 && freq_hz < sample_rate / 2.0) {
        return Err(Error::invalid(
            "freq_hz",
            format!(
                "{freq_hz} Hz is not inside (0, Nyquist = {} Hz)",
                sample_rate / 2.0
            ),
        ));
    }
    if num_samples == 0 {
        return Err(Error::invalid("num_samples", "must be at least 1"));
    }
    if !amplitude.is_finite() || !phase.is_finite() {
        return Err(Error::invalid(
            "amplitude",
            "amplitude and phase must be finite",
        ));
    }
    // Reducing the cycle count modulo 1 keeps the argument small for long records.
    let samples = (0..num_samples)
        .map(|t| {
            let cycles = (freq_hz * t as f64 / sample_rate).fract();
            amplitude * (TAU * cycles + phase).cos()
        })
        .collect();
    SampleRecord::new(samples, Some(sample_rate))
}

/// Splits `record` into the windows described by `plan`. Trailing samples
/// past the last window are ignored.
pub fn partition<'a>(record: &'a SampleRecord, plan: &WindowPlan) -> Result<Vec<&'a [f64]>> {
    partition_slice(record.samples(), plan)
}

pub(crate) fn partition_slice<'a>(samples: &'a [f64], plan: &WindowPlan) -> Result<Vec<&'a [f64]>> {
    let required = plan.required_samples();
    if required > samples.len() {
        return Err(Error::PlanTooLarge {
            required,
            available: samples.len(),
        });
    }
    Ok((0..plan.num_windows)
        .map(|m| {
            let start = plan.window_start(m);
            &samples[start..start + plan.window_len]
        })
        .collect())
}

/// Parses one value per line, with an optional `# sample_rate=<value>` header.
/// Blank lines and other `#` comment lines are skipped.
pub fn ingest_csv(text: &str) -> Result<SampleRecord> {
    let mut samples = Vec::new();
    let mut sample_rate = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(value) = comment.trim().strip_prefix("sample_rate=") {
                let rate: f64 = value.trim().parse().map_err(|_| Error::Parse {
                    line: idx + 1,
                    content: raw.to_string(),
                })?;
                sample_rate = Some(rate);
            }
            continue;
        }
        let value: f64 = line.parse().map_err(|_| Error::Parse {
            line: idx + 1,
            content: raw.to_string(),
        })?;
        samples.push(value);
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    SampleRecord::new(samples, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quarter_rate_cosine() {
        let rec = generate_sinusoid(1.0, 4.0, 1.0, 4, 0.0).unwrap();
        for (got, want) in rec.samples().iter().zip([1.0, 0.0, -1.0, 0.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_hundred_hz_at_eight_hundred_is_period_four() {
        let rec = generate_sinusoid(200.0, 800.0, 1.0, 8000, 0.0).unwrap();
        let s = rec.samples();
        for (got, want) in s[..4].iter().zip([1.0, 0.0, -1.0, 0.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        for t in 4..s.len() {
            assert_abs_diff_eq!(s[t], s[t - 4], epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_amplitude_is_silent() {
        let rec = generate_sinusoid(10.0, 100.0, 0.0, 16, 0.3).unwrap();
        assert_eq!(rec.len(), 16);
        assert!(rec.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sinusoid_rejects_nyquist_and_bad_rate() {
        assert!(generate_sinusoid(400.0, 800.0, 1.0, 8, 0.0).is_err());
        assert!(generate_sinusoid(500.0, 800.0, 1.0, 8, 0.0).is_err());
        assert!(generate_sinusoid(1.0, 0.0, 1.0, 8, 0.0).is_err());
        assert!(generate_sinusoid(1.0, -8.0, 1.0, 8, 0.0).is_err());
        assert!(generate_sinusoid(1.0, 8.0, 1.0, 0, 0.0).is_err());
    }

    #[test]
    fn contiguous_partition() {
        let rec = SampleRecord::new((0..10).map(f64::from).collect(), None).unwrap();
        let plan = WindowPlan::new(5, 2).unwrap();
        let w = partition(&rec, &plan).unwrap();
        assert_eq!(w[0], &[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(w[1], &[5.0, 6.0, 7.0, 8.0, 9.0]);
    }

    #[test]
    fn gapped_partition_starts() {
        let rec = SampleRecord::new((0..12000).map(f64::from).collect(), None).unwrap();
        let plan = WindowPlan::with_gap(1000, 10, 20).unwrap();
        let w = partition(&rec, &plan).unwrap();
        for (m, win) in w.iter().enumerate() {
            assert_eq!(win[0], (1020 * m) as f64);
            assert_eq!(win.len(), 1000);
        }
    }

    #[test]
    fn long_window_partition_starts() {
        let rec = SampleRecord::new((0..12500).map(f64::from).collect(), Some(1000.0)).unwrap();
        let plan = WindowPlan::new(1250, 10).unwrap();
        let w = partition(&rec, &plan).unwrap();
        for (m, win) in w.iter().enumerate() {
            assert_eq!(win[0], (1250 * m) as f64);
        }
    }

    #[test]
    fn plan_too_large_names_counts() {
        let rec = SampleRecord::new(vec![0.0; 100], None).unwrap();
        let plan = WindowPlan::with_gap(30, 3, 10).unwrap();
        match partition(&rec, &plan) {
            Err(Error::PlanTooLarge {
                required,
                available,
            }) => {
                assert_eq!(required, 110);
                assert_eq!(available, 100);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn plan_validation() {
        assert!(WindowPlan::new(1, 4).is_err());
        assert!(WindowPlan::new(4, 0).is_err());
        assert_eq!(
            WindowPlan::with_gap(100, 10, 20)
                .unwrap()
                .required_samples(),
            1180
        );
    }

    #[test]
    fn csv_literal_parse() {
        let rec = ingest_csv("1.0\n0.0\n-1.0\n0.0\n").unwrap();
        assert_eq!(rec.samples(), &[1.0, 0.0, -1.0, 0.0]);
        assert_eq!(rec.sample_rate(), None);
    }

    #[test]
    fn csv_header() {
        let rec = ingest_csv("# sample_rate=800\n1.0\n").unwrap();
        assert_eq!(rec.sample_rate(), Some(800.0));
        assert_eq!(rec.samples(), &[1.0]);
    }

    #[test]
    fn csv_errors() {
        match ingest_csv("1.0\nabc\n") {
            Err(Error::Parse { line, content }) => {
                assert_eq!(line, 2);
                assert_eq!(content, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(ingest_csv(""), Err(Error::EmptyInput)));
        assert!(matches!(
            ingest_csv("# sample_rate=10\n"),
            Err(Error::EmptyInput)
        ));
        assert!(matches!(
            ingest_csv("nan\n"),
            Err(Error::NonFiniteSample { .. })
        ));
    }

    #[test]
    fn record_rejects_non_finite() {
        assert!(SampleRecord::new(vec![1.0, f64::INFINITY], None).is_err());
        assert!(SampleRecord::new(vec![], None).is_err());
        assert!(SampleRecord::new(vec![1.0], Some(0.0)).is_err());
    }

    #[test]
    fn aligned_sinusoid_windows_are_copies() {
        // 12.5 Hz at 100 Hz with L = 40 gives 5 whole cycles per window.
        let rec = generate_sinusoid(12.5, 100.0, 1.3, 400, 0.7).unwrap();
        let plan = WindowPlan::new(40, 10).unwrap();
        let w = partition(&rec, &plan).unwrap();
        for win in &w[1..] {
            for (a, b) in win.iter().zip(w[0]) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
            }
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn csv_round_trip(values in prop::collection::vec(-1e12f64..1e12, 1..200),
                              rate in prop::option::of(1.0f64..1e6)) {
                let rec = SampleRecord::new(values, rate).unwrap();
                let back = ingest_csv(&rec.to_csv()).unwrap();
                prop_assert_eq!(back, rec);
            }

            #[test]
            fn contiguous_partition_concatenates_to_prefix(
                len in 2usize..40, m in 1usize..10, extra in 0usize..30) {
                let n = len * m + extra;
                let rec = SampleRecord::new((0..n).map(|i| i as f64 * 0.5 - 3.0).collect(), None).unwrap();
                let plan = WindowPlan::new(len, m).unwrap();
                let joined: Vec<f64> = partition(&rec, &plan).unwrap().concat();
                prop_assert_eq!(&joined[..], &rec.samples()[..len * m]);
            }
        }
    }
}

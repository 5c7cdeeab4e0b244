//! Normalized DFT and the PSD estimators built on it.
//!
//! Every estimator is first defined per frequency bin over the column of
//! window spectra at that bin (`*_bin` functions); the whole-spectrum forms
//! just map those over bins. The Monte Carlo harness calls the per-bin forms
//! directly so it only transforms the bins it needs.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Powers at or below this are reported as [`DB_FLOOR`].
pub const DB_CLAMP_THRESHOLD: f64 = 1e-300;
pub const DB_FLOOR: f64 = -3000.0;

/// `10·log10(power)`, clamped for zero and negative powers.
pub fn to_db(power: f64) -> f64 {
    if power <= DB_CLAMP_THRESHOLD {
        DB_FLOOR
    } else {
        10.0 * power.log10()
    }
}

/// Normalized DFT values of one window, indexed by bin `0..L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn from_values(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Multiplies every bin by `factor`.
    pub fn rotated(&self, factor: Complex64) -> Spectrum {
        Spectrum {
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Table of `e^{-2πik/L}` for `k = 0..L`, so that every DFT term is looked up
/// by `(f·t) mod L` instead of re-evaluating a growing angle.
#[derive(Debug, Clone)]
pub struct Twiddles {
    table: Vec<Complex64>,
}

impl Twiddles {
    pub fn new(len: usize) -> Self {
        let table = (0..len)
            .map(|k| {
                let (s, c) = (TAU * k as f64 / len as f64).sin_cos();
                Complex64::new(c, -s)
            })
            .collect();
        Self { table }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    fn bin(&self, window: &[f64], bin: usize) -> Complex64 {
        let len = self.table.len();
        let step = bin % len;
        let mut idx = 0usize;
        let mut acc = Complex64::new(0.0, 0.0);
        for &x in window {
            acc += self.table[idx] * x;
            idx += step;
            if idx >= len {
                idx -= len;
            }
        }
        acc / (len as f64).sqrt()
    }
}

/// `X(f) = (1/√L) Σ_t x(t) e^{−2πi f t / L}` for every bin, by direct summation.
pub fn dft_normalized(window: &[f64]) -> Result<Spectrum> {
    if window.len() < 2 {
        return Err(Error::invalid(
            "window",
            format!("need at least 2 samples, got {}", window.len()),
        ));
    }
    let tw = Twiddles::new(window.len());
    Ok(dft_with(&tw, window))
}

fn dft_with(tw: &Twiddles, window: &[f64]) -> Spectrum {
    Spectrum {
        values: (0..window.len()).map(|f| tw.bin(window, f)).collect(),
    }
}

/// Transforms every window with one shared twiddle table.
pub fn dft_windows<W: AsRef<[f64]>>(windows: &[W]) -> Result<Vec<Spectrum>> {
    let len = common_len(windows.iter().map(|w| w.as_ref().len()))?;
    if len < 2 {
        return Err(Error::invalid(
            "window",
            format!("need at least 2 samples, got {len}"),
        ));
    }
    let tw = Twiddles::new(len);
    Ok(windows.iter().map(|w| dft_with(&tw, w.as_ref())).collect())
}

/// Evaluates the normalized DFT at a fixed set of bins only.
#[derive(Debug, Clone)]
pub struct BinDft {
    bins: Vec<usize>,
    twiddles: Twiddles,
}

impl BinDft {
    pub fn new(window_len: usize, bins: &[usize]) -> Result<Self> {
        if window_len < 2 {
            return Err(Error::invalid(
                "window_len",
                format!("need at least 2 samples, got {window_len}"),
            ));
        }
        if let Some(&bin) = bins.iter().find(|&&b| b >= window_len) {
            return Err(Error::BinOutOfRange { bin, window_len });
        }
        Ok(Self {
            bins: bins.to_vec(),
            twiddles: Twiddles::new(window_len),
        })
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    /// Writes `X(bins[i])` into `out[i]`.
    pub fn project(&self, window: &[f64], out: &mut [Complex64]) {
        debug_assert_eq!(window.len(), self.twiddles.len());
        for (slot, &bin) in out.iter_mut().zip(&self.bins) {
            *slot = self.twiddles.bin(window, bin);
        }
    }
}

/// Symmetric Hann taper `0.5·(1 − cos(2πt/(L−1)))`.
pub fn hann(len: usize) -> Vec<f64> {
    if len < 2 {
        return vec![1.0; len];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|t| 0.5 * (1.0 - (TAU * t as f64 / denom).cos()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bartlett,
    Welch,
    Ccp,
}

/// Per-bin phase used by [`Reduction::PhaseCorrected`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseSchedule {
    /// Same angle (radians) at every bin.
    Constant(f64),
    /// `θ_f = 2π·gap·f/L`, undoing the inter-window step of a known gap.
    Gap(usize),
    /// Explicit angle per bin.
    PerBin(Vec<f64>),
}

impl PhaseSchedule {
    pub fn angle(&self, bin: usize, window_len: usize) -> f64 {
        match self {
            PhaseSchedule::Constant(theta) => *theta,
            PhaseSchedule::Gap(gap) => {
                let k = (gap % window_len) * (bin % window_len) % window_len;
                TAU * k as f64 / window_len as f64
            }
            PhaseSchedule::PerBin(angles) => angles[bin],
        }
    }
}

/// How the averaged cross-terms `Y_m·conj(Y_{m+1})` become a real power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// Real part of the mean (signed).
    Real,
    /// Absolute value of the real part.
    Abs,
    /// Modulus of the mean, the historical cross-spectral variant.
    ModulusOfMean,
    /// Real part after rotating the mean by `e^{iθ_f}`.
    PhaseCorrected(PhaseSchedule),
}

impl Reduction {
    /// θ = π/2: the quadrature companion estimator.
    pub fn quadrature() -> Self {
        Reduction::PhaseCorrected(PhaseSchedule::Constant(std::f64::consts::FRAC_PI_2))
    }

    fn at_bin(&self, bin: usize, window_len: usize) -> BinReduction {
        match self {
            Reduction::Real => BinReduction::Real,
            Reduction::Abs => BinReduction::Abs,
            Reduction::ModulusOfMean => BinReduction::ModulusOfMean,
            Reduction::PhaseCorrected(s) => BinReduction::Rotated(s.angle(bin, window_len)),
        }
    }
}

/// [`Reduction`] resolved to a single bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinReduction {
    Real,
    Abs,
    ModulusOfMean,
    Rotated(f64),
}

/// Real-valued PSD estimate over bins `0..L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub power: Vec<f64>,
    pub method: Method,
    pub reduction: Option<Reduction>,
    pub num_windows: usize,
    pub window_len: usize,
}

impl PsdEstimate {
    pub fn power_db(&self) -> Vec<f64> {
        self.power.iter().map(|&p| to_db(p)).collect()
    }

    /// Bins the moment results do not cover: DC and, for even L, Nyquist.
    pub fn excluded_bins(&self) -> Vec<usize> {
        theorem_excluded_bins(self.window_len)
    }
}

pub fn theorem_excluded_bins(window_len: usize) -> Vec<usize> {
    if window_len.is_multiple_of(2) {
        vec![0, window_len / 2]
    } else {
        vec![0]
    }
}

fn common_len(mut lens: impl Iterator<Item = usize>) -> Result<usize> {
    let first = lens
        .next()
        .ok_or_else(|| Error::invalid("windows", "need at least one window"))?;
    for len in lens {
        if len != first {
            return Err(Error::LengthMismatch {
                expected: first,
                found: len,
            });
        }
    }
    Ok(first)
}

/// `(1/M) Σ_m |Y_m|²` over one bin's column.
pub fn bartlett_bin(column: &[Complex64]) -> f64 {
    column.iter().map(|y| y.norm_sqr()).sum::<f64>() / column.len() as f64
}

/// `(1/M) Σ_m Y_m·conj(Y_{(m+1) mod M})`, summed in ascending `m`.
pub fn mean_cross_term(column: &[Complex64]) -> Complex64 {
    let m = column.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..m {
        acc += column[i] * column[(i + 1) % m].conj();
    }
    acc / m as f64
}

/// CCP value at one bin.
pub fn ccp_bin(column: &[Complex64], reduction: BinReduction) -> f64 {
    let mean = mean_cross_term(column);
    match reduction {
        BinReduction::Real => mean.re,
        BinReduction::Abs => mean.re.abs(),
        BinReduction::ModulusOfMean => mean.norm(),
        BinReduction::Rotated(theta) => (Complex64::from_polar(1.0, theta) * mean).re,
    }
}

/// The `M` circular cross-terms `Y_m·conj(Y_{(m+1) mod M})` at `bin`; the last
/// entry is the wrap-around pair `(M−1, 0)`.
pub fn cross_terms(spectra: &[Spectrum], bin: usize) -> Result<Vec<Complex64>> {
    let len = common_len(spectra.iter().map(Spectrum::len))?;
    if bin >= len {
        return Err(Error::BinOutOfRange {
            bin,
            window_len: len,
        });
    }
    let m = spectra.len();
    Ok((0..m)
        .map(|i| spectra[i].values[bin] * spectra[(i + 1) % m].values[bin].conj())
        .collect())
}

fn column(spectra: &[Spectrum], bin: usize, buf: &mut Vec<Complex64>) {
    buf.clear();
    buf.extend(spectra.iter().map(|s| s.values[bin]));
}

/// Bartlett's averaged periodogram.
pub fn bartlett(spectra: &[Spectrum]) -> Result<PsdEstimate> {
    let len = common_len(spectra.iter().map(Spectrum::len))?;
    let mut buf = Vec::with_capacity(spectra.len());
    let power = (0..len)
        .map(|f| {
            column(spectra, f, &mut buf);
            bartlett_bin(&buf)
        })
        .collect();
    Ok(PsdEstimate {
        power,
        method: Method::Bartlett,
        reduction: None,
        num_windows: spectra.len(),
        window_len: len,
    })
}

/// Welch with a Hann taper and no overlap. The taper power is deliberately
/// not compensated, so white noise of variance σ² sits near `3σ²/8`.
pub fn welch_hann<W: AsRef<[f64]>>(windows: &[W]) -> Result<PsdEstimate> {
    let len = common_len(windows.iter().map(|w| w.as_ref().len()))?;
    if len < 2 {
        return Err(Error::invalid(
            "window",
            format!("need at least 2 samples, got {len}"),
        ));
    }
    let taper = hann(len);
    let tapered: Vec<Vec<f64>> = windows
        .iter()
        .map(|w| w.as_ref().iter().zip(&taper).map(|(x, h)| x * h).collect())
        .collect();
    let mut est = bartlett(&dft_windows(&tapered)?)?;
    est.method = Method::Welch;
    Ok(est)
}

/// Cross-correlation periodogram over circularly adjacent windows.
pub fn ccp(spectra: &[Spectrum], reduction: &Reduction) -> Result<PsdEstimate> {
    if spectra.len() < 2 {
        return Err(Error::TooFewWindows {
            context: "the cross-correlation periodogram",
            required: 2,
            found: spectra.len(),
        });
    }
    let len = common_len(spectra.iter().map(Spectrum::len))?;
    if let Reduction::PhaseCorrected(PhaseSchedule::PerBin(angles)) = reduction {
        if angles.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                found: angles.len(),
            });
        }
    }
    let mut buf = Vec::with_capacity(spectra.len());
    let power = (0..len)
        .map(|f| {
            column(spectra, f, &mut buf);
            ccp_bin(&buf, reduction.at_bin(f, len))
        })
        .collect();
    Ok(PsdEstimate {
        power,
        method: Method::Ccp,
        reduction: Some(reduction.clone()),
        num_windows: spectra.len(),
        window_len: len,
    })
}

/// `cos(2π·gap·f/L)`: the factor one adjacent cross-term picks up when every
/// window is shifted by `gap` samples relative to the previous one.
pub fn expected_gap_attenuation(freq_bin: usize, gap: usize, window_len: usize) -> f64 {
    (TAU * step_cycles(freq_bin, gap, window_len)).cos()
}

/// The same factor for the full circular estimator: `M−1` adjacent pairs each
/// contribute `cos θ`, while the wrap-around pair spans `−(M−1)` steps.
pub fn expected_circular_gap_response(
    freq_bin: usize,
    gap: usize,
    window_len: usize,
    num_windows: usize,
) -> f64 {
    let cycles = step_cycles(freq_bin, gap, window_len);
    let m = num_windows as f64;
    let wrap = ((num_windows - 1) as f64 * cycles).fract();
    ((m - 1.0) * (TAU * cycles).cos() + (TAU * wrap).cos()) / m
}

/// Phase advance per window step at `freq_bin`, in periods modulo 1.
pub fn step_cycles(freq_bin: usize, gap: usize, window_len: usize) -> f64 {
    let k = ((gap % window_len) * (freq_bin % window_len)) % window_len;
    k as f64 / window_len as f64
}

//! Seeded zero-mean noise generators with a prescribed marginal variance.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SampleRecord;

/// Generator used for every noise stream.
pub type NoiseRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Laplace,
    Uniform,
    /// First-order autoregression `n(t) = φ·n(t−1) + e(t)`.
    Ar1 {
        phi: f64,
    },
}

/// Noise process with marginal standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::invalid(
                "sigma",
                format!("must be finite and >= 0, got {sigma}"),
            ));
        }
        if let NoiseKind::Ar1 { phi } = kind {
            if !(phi.is_finite() && phi.abs() < 1.0) {
                return Err(Error::invalid("phi", format!("need |phi| < 1, got {phi}")));
            }
        }
        Ok(Self { kind, sigma })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(NoiseKind::Gaussian, sigma)
    }

    pub fn laplace(sigma: f64) -> Result<Self> {
        Self::new(NoiseKind::Laplace, sigma)
    }

    pub fn uniform(sigma: f64) -> Result<Self> {
        Self::new(NoiseKind::Uniform, sigma)
    }

    pub fn ar1(sigma: f64, phi: f64) -> Result<Self> {
        Self::new(NoiseKind::Ar1 { phi }, sigma)
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Short label used in report tables.
    pub fn label(&self) -> &'static str {
        match self.kind {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Laplace => "laplace",
            NoiseKind::Uniform => "uniform",
            NoiseKind::Ar1 { .. } => "ar1",
        }
    }

    /// True when samples are independent across time.
    pub fn is_iid(&self) -> bool {
        !matches!(self.kind, NoiseKind::Ar1 { .. })
    }

    /// Fills `out` with one contiguous realization drawn from `rng`.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let sigma = self.sigma;
        match self.kind {
            NoiseKind::Gaussian => {
                for v in out.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = sigma * z;
                }
            }
            NoiseKind::Laplace => {
                // Inverse CDF with scale b = σ/√2, so the variance 2b² is σ².
                let b = sigma / std::f64::consts::SQRT_2;
                for v in out.iter_mut() {
                    let u: f64 = rng.random::<f64>() - 0.5;
                    let mag = -b * (1.0 - 2.0 * u.abs()).ln();
                    *v = if u < 0.0 { -mag } else { mag };
                }
            }
            NoiseKind::Uniform => {
                let half_width = sigma * 3f64.sqrt();
                for v in out.iter_mut() {
                    let u: f64 = rng.random();
                    *v = half_width * (2.0 * u - 1.0);
                }
            }
            NoiseKind::Ar1 { phi } => {
                let innovation_sd = sigma * (1.0 - phi * phi).sqrt();
                let mut prev = 0.0;
                for (t, v) in out.iter_mut().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    // Start from the stationary law so every sample has variance σ².
                    prev = if t == 0 {
                        sigma * z
                    } else {
                        phi * prev + innovation_sd * z
                    };
                    *v = prev;
                }
            }
        }
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:sigma={}", self.label(), self.sigma)?;
        if let NoiseKind::Ar1 { phi } = self.kind {
            write!(f, ",phi={phi}")?;
        }
        Ok(())
    }
}

/// Parses `kind[:key=value,...]`, e.g. `ar1:sigma=1,phi=0.5` or `laplace`.
/// `sigma` defaults to 1 and `phi` is required for `ar1`.
impl FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, params) = match s.split_once(':') {
            Some((k, p)) => (k.trim(), p.trim()),
            None => (s.trim(), ""),
        };
        let mut sigma = 1.0;
        let mut phi = None;
        for pair in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                Error::invalid("noise", format!("expected key=value, got `{pair}`"))
            })?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::invalid("noise", format!("`{value}` is not a number")))?;
            match key.trim() {
                "sigma" => sigma = value,
                "phi" => phi = Some(value),
                other => {
                    return Err(Error::invalid(
                        "noise",
                        format!("unknown parameter `{other}`"),
                    ))
                }
            }
        }
        let kind = match kind {
            "gaussian" | "normal" => NoiseKind::Gaussian,
            "laplace" => NoiseKind::Laplace,
            "uniform" => NoiseKind::Uniform,
            "ar1" => NoiseKind::Ar1 {
                phi: phi.ok_or_else(|| Error::invalid("noise", "ar1 needs phi=<value>"))?,
            },
            other => {
                return Err(Error::invalid(
                    "noise",
                    format!("unknown noise kind `{other}`"),
                ))
            }
        };
        if phi.is_some() && !matches!(kind, NoiseKind::Ar1 { .. }) {
            return Err(Error::invalid("noise", "phi only applies to ar1"));
        }
        NoiseModel::new(kind, sigma)
    }
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based sub-seed for item `index` of `stream` under `root`. Pure, so
/// trials can be generated in any order or on any thread.
pub fn derive_seed(root: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(root) ^ stream.wrapping_mul(GOLDEN_GAMMA)) ^ index)
}

pub fn rng_from_seed(seed: u64) -> NoiseRng {
    NoiseRng::seed_from_u64(seed)
}

/// `n` samples of `model`, deterministic in `seed`.
pub fn sample(model: &NoiseModel, n: usize, seed: u64) -> Result<SampleRecord> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let mut out = vec![0.0; n];
    model.fill(&mut rng_from_seed(seed), &mut out);
    SampleRecord::new(out, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        for model in [
            NoiseModel::gaussian(1.0).unwrap(),
            NoiseModel::laplace(2.0).unwrap(),
            NoiseModel::uniform(0.5).unwrap(),
            NoiseModel::ar1(1.0, 0.5).unwrap(),
        ] {
            let a = sample(&model, 500, 42).unwrap();
            let b = sample(&model, 500, 42).unwrap();
            let c = sample(&model, 500, 43).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn parse_and_display() {
        let m: NoiseModel = "ar1:sigma=1,phi=0.5".parse().unwrap();
        assert_eq!(m, NoiseModel::ar1(1.0, 0.5).unwrap());
        assert_eq!(m.to_string(), "ar1:sigma=1,phi=0.5");
        let g: NoiseModel = "gaussian".parse().unwrap();
        assert_eq!(g.sigma, 1.0);
        let l: NoiseModel = "laplace:sigma=2".parse().unwrap();
        assert_eq!(l.to_string().parse::<NoiseModel>().unwrap(), l);
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "cauchy",
            "ar1",
            "ar1:phi=1.0",
            "gaussian:sigma=-1",
            "gaussian:phi=0.2",
            "uniform:width=2",
            "laplace:sigma",
            "laplace:sigma=x",
        ] {
            assert!(
                bad.parse::<NoiseModel>().is_err(),
                "{bad} should be rejected"
            );
        }
    }

    #[test]
    fn zero_sigma_is_silent() {
        let rec = sample(&NoiseModel::ar1(0.0, 0.3).unwrap(), 10, 1).unwrap();
        assert!(rec.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_support() {
        let rec = sample(&NoiseModel::uniform(1.0).unwrap(), 10_000, 9).unwrap();
        let edge = 3f64.sqrt();
        assert!(rec.samples().iter().all(|v| v.abs() <= edge));
    }

    #[test]
    fn derived_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for stream in 0..4 {
            for i in 0..1000 {
                assert!(seen.insert(derive_seed(7, stream, i)));
            }
        }
        assert_eq!(derive_seed(7, 1, 2), derive_seed(7, 1, 2));
    }
}

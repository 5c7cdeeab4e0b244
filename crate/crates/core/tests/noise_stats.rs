use ccp_core::noise::{derive_seed, sample, NoiseModel};

const N: usize = 1_000_000;

struct Stats {
    mean: f64,
    var: f64,
    excess_kurtosis: f64,
}

fn stats(xs: &[f64]) -> Stats {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for &x in xs {
        let d = (x - mean) * (x - mean);
        m2 += d;
        m4 += d * d;
    }
    let var = m2 / n;
    Stats {
        mean,
        var,
        excess_kurtosis: (m4 / n) / (var * var) - 3.0,
    }
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (sa, sb) = (stats(a), stats(b));
    let cov = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - sa.mean) * (y - sb.mean))
        .sum::<f64>()
        / a.len() as f64;
    cov / (sa.var * sb.var).sqrt()
}

fn models() -> Vec<NoiseModel> {
    vec![
        NoiseModel::gaussian(1.0).unwrap(),
        NoiseModel::laplace(1.0).unwrap(),
        NoiseModel::uniform(1.0).unwrap(),
        NoiseModel::ar1(1.0, 0.5).unwrap(),
    ]
}

#[test]
fn mean_and_variance_at_one_million() {
    for (i, model) in models().into_iter().enumerate() {
        let rec = sample(&model, N, derive_seed(1, 0, i as u64)).unwrap();
        let s = stats(rec.samples());
        // AR(1) samples are correlated, which inflates the spread of the
        // sample mean by (1+φ)/(1−φ) = 3; the allowance keeps the same
        // false-alarm rate.
        let mean_tol = if model.is_iid() {
            5.0
        } else {
            5.0 * 3f64.sqrt()
        } / (N as f64).sqrt();
        assert!(s.mean.abs() < mean_tol, "{model}: mean {}", s.mean);
        assert!((s.var - 1.0).abs() < 0.01, "{model}: variance {}", s.var);
    }
}

#[test]
fn excess_kurtosis_identifies_the_family() {
    for (model, want) in [
        (NoiseModel::gaussian(1.0).unwrap(), 0.0),
        (NoiseModel::laplace(1.0).unwrap(), 3.0),
        (NoiseModel::uniform(1.0).unwrap(), -1.2),
    ] {
        let k = stats(sample(&model, N, 77).unwrap().samples()).excess_kurtosis;
        assert!((k - want).abs() < 0.1, "{model}: excess kurtosis {k}");
    }
}

#[test]
fn ar1_lag_one_correlation() {
    let rec = sample(&NoiseModel::ar1(1.0, 0.5).unwrap(), N, 5).unwrap();
    let x = rec.samples();
    let r = correlation(&x[..N - 1], &x[1..]);
    assert!((r - 0.5).abs() < 0.01, "lag-1 correlation {r}");
}

#[test]
fn iid_blocks_are_uncorrelated() {
    let block = 10_000;
    for model in models().into_iter().filter(NoiseModel::is_iid) {
        let rec = sample(&model, 8 * block, 13).unwrap();
        let blocks: Vec<&[f64]> = rec.samples().chunks(block).collect();
        for pair in blocks.windows(2) {
            let r = correlation(pair[0], pair[1]);
            assert!(
                r.abs() < 5.0 / (block as f64).sqrt(),
                "{model}: block correlation {r}"
            );
        }
    }
}

#[test]
fn ar1_with_zero_phi_matches_gaussian_moments() {
    let a = stats(
        sample(&NoiseModel::ar1(1.0, 0.0).unwrap(), N, 21)
            .unwrap()
            .samples(),
    );
    let g = stats(
        sample(&NoiseModel::gaussian(1.0).unwrap(), N, 22)
            .unwrap()
            .samples(),
    );
    let se = (2.0 / N as f64).sqrt();
    assert!((a.mean - g.mean).abs() < 5.0 * se);
    assert!((a.var - g.var).abs() < 0.01);
    assert!((a.excess_kurtosis - g.excess_kurtosis).abs() < 0.1);
}

#[test]
fn sigma_scales_variance() {
    for sigma in [0.5, 2.0] {
        for model in [
            NoiseModel::gaussian(sigma).unwrap(),
            NoiseModel::laplace(sigma).unwrap(),
            NoiseModel::uniform(sigma).unwrap(),
            NoiseModel::ar1(sigma, -0.3).unwrap(),
        ] {
            let s = stats(sample(&model, 200_000, 3).unwrap().samples());
            assert!(
                (s.var / model.variance() - 1.0).abs() < 0.03,
                "{model}: {}",
                s.var
            );
        }
    }
}

//! Small statistics helpers used by the evaluation suites.

/// Ranks with ties assigned their average rank (1-based).
fn ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite values"));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average-rank tie handling.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    pearson(&rx, &ry)
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Kolmogorov-Smirnov statistic of a sample against Uniform(lo, hi).
pub fn ks_uniform_statistic(samples: &[f64], lo: f64, hi: f64) -> f64 {
    assert!(hi > lo && !samples.is_empty());
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
        let lo_emp = i as f64 / n;
        let hi_emp = (i + 1) as f64 / n;
        d = d.max((cdf - lo_emp).abs()).max((hi_emp - cdf).abs());
    }
    d
}

/// Asymptotic KS critical value at significance `alpha` for sample size `n`.
/// Supported alphas: 0.10, 0.05, 0.01.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    let c = if (alpha - 0.10).abs() < 1e-12 {
        1.224
    } else if (alpha - 0.05).abs() < 1e-12 {
        1.358
    } else if (alpha - 0.01).abs() < 1e-12 {
        1.628
    } else {
        panic!("unsupported alpha {alpha}");
    };
    c / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn spearman_monotone_is_one() {
        let xs: Vec<f64> = (0..20).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x + 3.0).collect();
        assert!((spearman(&xs, &ys) - 1.0).abs() < 1e-12);
        let yd: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((spearman(&xs, &yd) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_handles_ties() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [1.0, 1.0, 2.0, 2.0];
        let r = spearman(&xs, &ys);
        assert!(r > 0.8 && r <= 1.0);
    }

    #[test]
    fn ks_accepts_uniform_rejects_skewed() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let uniform: Vec<f64> = (0..500).map(|_| rng.random_range(0.5..2.5)).collect();
        let d = ks_uniform_statistic(&uniform, 0.5, 2.5);
        assert!(d < ks_critical(500, 0.01), "d = {d}");

        let skewed: Vec<f64> = uniform.iter().map(|x| 0.5 + (x - 0.5) * (x - 0.5) / 2.0).collect();
        let d = ks_uniform_statistic(&skewed, 0.5, 2.5);
        assert!(d > ks_critical(500, 0.01), "d = {d}");
    }
}

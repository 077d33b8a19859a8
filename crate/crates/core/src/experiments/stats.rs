//! Sample statistics.

use serde::Serialize;

/// Sample mean with its standard error `sd / sqrt(n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    /// Two-pass mean and unbiased variance, summed in index order. A constant
    /// sample is returned exactly, with zero error.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                std_error: f64::NAN,
                n,
            };
        }
        if xs.iter().all(|&x| x == xs[0]) {
            return Estimate {
                mean: xs[0],
                std_error: 0.0,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate { mean, std_error, n }
    }

    pub fn from_counts(xs: &[u64]) -> Self {
        let v: Vec<f64> = xs.iter().map(|&x| x as f64).collect();
        Estimate::from_samples(&v)
    }

    /// `(mean - target) / std_error`; 0 when both the gap and the error vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        z_score(self.mean - target, self.std_error)
    }
}

pub(crate) fn z_score(gap: f64, se: f64) -> f64 {
    if gap == 0.0 {
        0.0
    } else {
        gap / se
    }
}

/// Empirical generating function `mean(s^X)`.
pub fn empirical_pgf(xs: &[u64], s: f64) -> Estimate {
    let v: Vec<f64> = xs.iter().map(|&x| s.powf(x as f64)).collect();
    Estimate::from_samples(&v)
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

//! Sample mean and standard error.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Two-pass mean and standard error of the mean (unbiased variance).
pub fn mean_stderr(xs: &[f64]) -> MeanStderr {
    let n = xs.len();
    if n == 0 {
        return MeanStderr {
            mean: f64::NAN,
            stderr: f64::NAN,
            count: 0,
        };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanStderr {
            mean,
            stderr: 0.0,
            count: 1,
        };
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    MeanStderr {
        mean,
        stderr: (var / n as f64).sqrt(),
        count: n,
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

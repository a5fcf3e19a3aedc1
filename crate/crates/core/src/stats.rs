//! Compensated summation, batch-means error bars and integrated autocorrelation times.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// Neumaier-compensated sum.
pub fn neumaier_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Neumaier::default();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Neumaier) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// A stochastic estimate with its error bar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    /// Integrated autocorrelation time in samples (1 for independent draws).
    pub tau_int: f64,
    pub method: String,
}

impl Estimate {
    pub fn exact(value: f64, method: &str) -> Estimate {
        Estimate {
            mean: value,
            stderr: 0.0,
            n_samples: 1,
            tau_int: 1.0,
            method: method.to_string(),
        }
    }

    /// |mean - target| ≤ k·stderr, with a tiny absolute slack for zero-variance runs.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr + 1e-12 * target.abs().max(1.0)
    }
}

pub const DEFAULT_BATCHES: usize = 32;

/// Batch-means estimate of the mean of a correlated series.
pub fn batch_means(xs: &[f64], batches: usize, method: &str) -> Estimate {
    let n = xs.len();
    assert!(n >= 1, "batch_means needs at least one sample");
    let mean = neumaier_sum(xs.iter().copied()) / n as f64;
    let b = batches.min(n).max(1);
    let size = n / b;
    let stderr = if b < 2 || size == 0 {
        0.0
    } else {
        let used = b * size;
        let means: Vec<f64> = xs[n - used..]
            .chunks(size)
            .map(|c| neumaier_sum(c.iter().copied()) / size as f64)
            .collect();
        let m = means.iter().sum::<f64>() / b as f64;
        let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (b - 1) as f64;
        (var / b as f64).sqrt()
    };
    Estimate {
        mean,
        stderr,
        n_samples: n,
        tau_int: integrated_autocorrelation_time(xs),
        method: method.to_string(),
    }
}

/// Mean and standard error of independent samples.
pub fn iid_estimate(xs: &[f64], method: &str) -> Estimate {
    let n = xs.len();
    assert!(n >= 1);
    let mean = neumaier_sum(xs.iter().copied()) / n as f64;
    let stderr = if n < 2 {
        0.0
    } else {
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    Estimate {
        mean,
        stderr,
        n_samples: n,
        tau_int: 1.0,
        method: method.to_string(),
    }
}

/// Normalised autocorrelation function via zero-padded FFT.
pub fn autocorrelation(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n == 0 {
        return vec![];
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = xs
        .iter()
        .map(|x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(m)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let c0 = buf[0].re;
    if c0 <= 0.0 {
        let mut out = vec![0.0; n];
        out[0] = 1.0;
        return out;
    }
    buf[..n].iter().map(|c| c.re / c0).collect()
}

/// τ_int = 1 + 2Σρ(t) with Sokal's self-consistent window (c = 6).
pub fn integrated_autocorrelation_time(xs: &[f64]) -> f64 {
    let rho = autocorrelation(xs);
    let mut tau = 1.0;
    for (t, r) in rho.iter().enumerate().skip(1) {
        tau += 2.0 * r;
        if (t as f64) >= 6.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn neumaier_beats_naive() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(neumaier_sum(xs), 2.0);
    }

    #[test]
    fn iid_series_has_unit_tau() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        let tau = integrated_autocorrelation_time(&xs);
        assert!((tau - 1.0).abs() < 0.15, "tau={tau}");
        let e = batch_means(&xs, 32, "t");
        assert!((e.mean - 0.5).abs() < 4.0 * e.stderr);
    }

    #[test]
    fn ar1_tau_matches_formula() {
        // τ = (1+a)/(1-a) for an AR(1) chain
        let a = 0.8;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut x = 0.0;
        let xs: Vec<f64> = (0..200_000)
            .map(|_| {
                x = a * x + rng.random::<f64>() - 0.5;
                x
            })
            .collect();
        let tau = integrated_autocorrelation_time(&xs);
        assert!((tau - 9.0).abs() < 1.0, "tau={tau}");
    }

    #[test]
    fn constant_series() {
        let e = batch_means(&[2.0; 100], 32, "c");
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.tau_int, 1.0);
    }
}

//! Reproducible Monte Carlo over fixed batches of counter-based random streams.
//!
//! Sample `i` always belongs to batch `i / BATCH`, and batch `b` always draws from
//! ChaCha8 stream `(domain, b)` of the master seed. Batches are reduced in index
//! order, so an estimate depends only on `(seed, domain, n_samples)`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LvrError, Result};
use crate::exec::{with_workers, Execution};
use crate::C64;

pub const BATCH: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: usize,
    pub seed: u64,
    /// Worker threads; 0 uses the global pool.
    pub n_workers: usize,
}

impl McConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        McConfig { n_samples, seed, n_workers: 0 }
    }
}

/// The random stream of one batch.
pub fn batch_rng(seed: u64, domain: u32, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 40) | batch);
    rng
}

/// `n × m` complex Gaussian matrix with `E|M_ab|² = variance`.
pub fn gaussian_matrix<R: Rng>(rng: &mut R, n: usize, m: usize, variance: f64) -> DMatrix<C64> {
    let sd = (0.5 * variance).sqrt();
    DMatrix::from_fn(n, m, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * sd, im * sd)
    })
}

/// Mean with standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: C64,
    pub std_error: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy)]
struct Moments {
    n: usize,
    mean: C64,
    // Sum of |x - mean|².
    m2: f64,
}

impl Moments {
    const EMPTY: Moments = Moments { n: 0, mean: C64::new(0.0, 0.0), m2: 0.0 };

    fn push(&mut self, x: C64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += (d.conj() * (x - self.mean)).re;
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        let mean = self.mean + d * (o.n as f64 / n as f64);
        let m2 = self.m2 + o.m2 + d.norm_sqr() * (self.n as f64 * o.n as f64 / n as f64);
        Moments { n, mean, m2 }
    }
}

/// Averages `f` over `cfg.n_samples` draws.
///
/// `f` receives the batch stream and the global sample index; `domain` separates
/// estimators that should use independent randomness under one seed.
pub fn estimate<F>(cfg: &McConfig, domain: u32, exec: Execution, f: F) -> Result<McEstimate>
where
    F: Fn(&mut ChaCha8Rng, usize) -> Result<C64> + Sync + Send,
{
    if cfg.n_samples < 2 {
        return Err(LvrError::InvalidParameter("Monte Carlo needs at least 2 samples".into()));
    }
    let batches = cfg.n_samples.div_ceil(BATCH);
    let per_batch = with_workers(cfg.n_workers, || {
        exec.try_map(batches, |b| {
            let mut rng = batch_rng(cfg.seed, domain, b as u64);
            let mut m = Moments::EMPTY;
            for i in b * BATCH..((b + 1) * BATCH).min(cfg.n_samples) {
                let x = f(&mut rng, i)?;
                if !(x.re.is_finite() && x.im.is_finite()) {
                    return Err(LvrError::VarianceBlowup(format!("non-finite sample {x} at index {i}")));
                }
                m.push(x);
            }
            Ok(m)
        })
    })?;
    let total = per_batch.into_iter().fold(Moments::EMPTY, Moments::merge);
    let var = total.m2 / (total.n - 1) as f64;
    Ok(McEstimate { mean: total.mean, std_error: (var / total.n as f64).sqrt(), n: total.n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_across_schedules_and_workers() {
        let cfg = McConfig::new(5000, 11);
        let f = |rng: &mut ChaCha8Rng, _: usize| -> Result<C64> {
            let x: f64 = rng.sample(StandardNormal);
            Ok(C64::new(x * x, x))
        };
        let a = estimate(&cfg, 0, Execution::Sequential, f).unwrap();
        let b = estimate(&McConfig { n_workers: 3, ..cfg }, 0, Execution::Parallel, f).unwrap();
        assert_eq!(a.mean.re.to_bits(), b.mean.re.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        // E[x²] = 1, E[x] = 0.
        assert!((a.mean - C64::new(1.0, 0.0)).norm() < 5.0 * a.std_error);
        let c = estimate(&cfg, 1, Execution::Sequential, f).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn gaussian_matrix_variance() {
        let mut rng = batch_rng(3, 0, 0);
        let m = gaussian_matrix(&mut rng, 60, 60, 0.5);
        let mean_sq = m.iter().map(|z| z.norm_sqr()).sum::<f64>() / 3600.0;
        assert!((mean_sq - 0.5).abs() < 0.05);
    }

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<C64> = (0..100).map(|k| C64::new((k as f64).sin(), (k as f64 * 0.3).cos())).collect();
        let mut whole = Moments::EMPTY;
        xs.iter().for_each(|&x| whole.push(x));
        let (mut a, mut b) = (Moments::EMPTY, Moments::EMPTY);
        xs[..37].iter().for_each(|&x| a.push(x));
        xs[37..].iter().for_each(|&x| b.push(x));
        let merged = a.merge(b);
        assert!((merged.mean - whole.mean).norm() < 1e-14);
        assert!((merged.m2 - whole.m2).abs() < 1e-12);
    }
}

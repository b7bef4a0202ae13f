//! Timing of the bilinear kernels alone: dense Clebsch-Gordan contraction over all
//! (l1, l2, l3) <= lmax versus one product of square matrices of side 2⌈lmax/2⌉+1,
//! whose ℋ^(a) ⊗ ℋ^(a) contains every degree up to lmax.
//!
//! A full CG pass at lmax = 64 is ~5e11 multiply-adds, so the CG time is the sum of
//! per-block medians over a seeded uniform sample of at most `max_blocks` triples,
//! scaled by (number of triples) / (sample size).

use std::fmt;
use std::hint::black_box;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::so3::cg::{contract_block, real_cg_block};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Matmul,
    ClebschGordan,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Matmul => "matmul",
            Method::ClebschGordan => "cg",
        })
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub lmax_list: Vec<usize>,
    /// Timed repetitions per measurement (median taken); at least 3.
    pub reps: usize,
    pub warmups: usize,
    pub channels: usize,
    pub max_blocks: usize,
    /// Shortest timed window; tiny kernels are looped until they fill it.
    pub min_window: Duration,
    pub seed: u64,
}

impl BenchConfig {
    pub fn new(lmax_list: Vec<usize>, reps: usize) -> Self {
        Self {
            lmax_list,
            reps,
            warmups: 2,
            channels: 8,
            max_blocks: 1500,
            min_window: Duration::from_micros(20),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub lmax: usize,
    pub channels: usize,
    pub median_seconds: f64,
    /// Row belongs to the largest half of the lmax list, used for the slope.
    pub in_slope_window: bool,
}

pub const CSV_HEADER: &str = "method,l_max,channels,median_seconds,slope_window_flag";

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{:e},{}",
            self.method,
            self.lmax,
            self.channels,
            self.median_seconds,
            u8::from(self.in_slope_window)
        )
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median seconds per call of `f`, after warmups that also fix the inner loop count.
fn time_call(cfg: &BenchConfig, mut f: impl FnMut()) -> f64 {
    let mut inner = 1usize;
    for _ in 0..cfg.warmups.max(1) {
        loop {
            let t = Instant::now();
            for _ in 0..inner {
                f();
            }
            if t.elapsed() >= cfg.min_window || inner >= 1 << 24 {
                break;
            }
            inner *= 2;
        }
    }
    let samples = (0..cfg.reps)
        .map(|_| {
            let t = Instant::now();
            for _ in 0..inner {
                f();
            }
            t.elapsed().as_secs_f64() / inner as f64
        })
        .collect();
    median(samples)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Side of the square matrices covering degrees up to lmax.
pub fn matmul_side(lmax: usize) -> usize {
    2 * lmax.div_ceil(2) + 1
}

fn time_matmul(cfg: &BenchConfig, lmax: usize, rng: &mut ChaCha8Rng) -> f64 {
    let k = matmul_side(lmax);
    let a: Vec<DMatrix<f64>> = (0..cfg.channels)
        .map(|_| DMatrix::from_vec(k, k, random_vec(rng, k * k)))
        .collect();
    let b: Vec<DMatrix<f64>> = (0..cfg.channels)
        .map(|_| DMatrix::from_vec(k, k, random_vec(rng, k * k)))
        .collect();
    let mut c: Vec<DMatrix<f64>> = vec![DMatrix::zeros(k, k); cfg.channels];
    time_call(cfg, || {
        for ((ci, ai), bi) in c.iter_mut().zip(&a).zip(&b) {
            ci.gemm(1.0, ai, bi, 0.0);
        }
        black_box(&c);
    })
}

pub fn admissible_triples(lmax: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for l1 in 0..=lmax {
        for l2 in 0..=lmax {
            for l3 in l1.abs_diff(l2)..=(l1 + l2).min(lmax) {
                out.push((l1, l2, l3));
            }
        }
    }
    out
}

fn time_cg(cfg: &BenchConfig, lmax: usize, rng: &mut ChaCha8Rng) -> f64 {
    let triples = admissible_triples(lmax);
    let picked: Vec<usize> = if triples.len() <= cfg.max_blocks {
        (0..triples.len()).collect()
    } else {
        let mut s = sample(rng, triples.len(), cfg.max_blocks).into_vec();
        s.sort_unstable();
        s
    };
    let mut total = 0.0;
    for &i in &picked {
        let (l1, l2, l3) = triples[i];
        let block = real_cg_block(l1, l2, l3);
        let xs: Vec<Vec<f64>> = (0..cfg.channels)
            .map(|_| random_vec(rng, 2 * l1 + 1))
            .collect();
        let ys: Vec<Vec<f64>> = (0..cfg.channels)
            .map(|_| random_vec(rng, 2 * l2 + 1))
            .collect();
        let mut zs = vec![vec![0.0; 2 * l3 + 1]; cfg.channels];
        total += time_call(cfg, || {
            for ((x, y), z) in xs.iter().zip(&ys).zip(zs.iter_mut()) {
                contract_block(&block, x, y, z);
            }
            black_box(&zs);
        });
    }
    total * triples.len() as f64 / picked.len() as f64
}

/// One row per (method, lmax), CG rows first.
pub fn bench_bilinear(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.reps < 3 {
        return Err(Error::InvalidArgument(format!(
            "reps must be at least 3, got {}",
            cfg.reps
        )));
    }
    if cfg.lmax_list.is_empty() || cfg.channels == 0 || cfg.max_blocks == 0 {
        return Err(Error::InvalidArgument(
            "need a non-empty lmax list, channels and blocks".into(),
        ));
    }
    let mut sorted = cfg.lmax_list.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let cut = sorted[sorted.len() / 2];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    for method in [Method::ClebschGordan, Method::Matmul] {
        for &lmax in &cfg.lmax_list {
            let secs = match method {
                Method::ClebschGordan => time_cg(cfg, lmax, &mut rng),
                Method::Matmul => time_matmul(cfg, lmax, &mut rng),
            };
            rows.push(BenchRow {
                method,
                lmax,
                channels: cfg.channels,
                median_seconds: secs,
                in_slope_window: lmax >= cut,
            });
        }
    }
    Ok(rows)
}

/// Least-squares slope of log(seconds) against log(lmax).
pub fn loglog_slope(points: &[(usize, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Slope over the rows of `method` whose lmax passes `keep`.
pub fn method_slope(rows: &[BenchRow], method: Method, keep: impl Fn(usize) -> bool) -> f64 {
    let pts: Vec<(usize, f64)> = rows
        .iter()
        .filter(|r| r.method == method && keep(r.lmax))
        .map(|r| (r.lmax, r.median_seconds))
        .collect();
    loglog_slope(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(usize, f64)> = [2usize, 4, 8, 16]
            .iter()
            .map(|&l| (l, 3.0 * (l as f64).powi(5)))
            .collect();
        assert!((loglog_slope(&pts) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_run_gives_positive_times() {
        let rows = bench_bilinear(&BenchConfig::new(vec![1], 3)).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows
            .iter()
            .all(|r| r.median_seconds > 0.0 && r.median_seconds.is_finite()));
    }

    #[test]
    fn too_few_reps_rejected() {
        assert!(bench_bilinear(&BenchConfig::new(vec![1], 2)).is_err());
    }

    #[test]
    fn side_covers_lmax() {
        assert_eq!(matmul_side(8), 9);
        assert_eq!(matmul_side(9), 11);
        assert_eq!(matmul_side(64), 65);
    }
}

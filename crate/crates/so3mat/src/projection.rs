//! Random orthogonal projection of an invariant feature map down to 6k - 5
//! coordinates, and the distance-ratio check that the projection still separates a
//! pool of configurations.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::ColoredConfig;
use crate::error::{Error, Result};
use crate::features::fundamental_features;
use crate::radial::RadialSpec;

/// Original-feature distance below which two configurations count as equivalent.
pub const EQUIVALENCE_THRESHOLD: f64 = 1e-9;

type Evaluator = dyn Fn(&ColoredConfig) -> Vec<f64> + Send + Sync;

/// Rotation-invariant map from configurations to R^dim.
#[derive(Clone)]
pub struct FeatureMap {
    dim: usize,
    eval: Arc<Evaluator>,
}

impl fmt::Debug for FeatureMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeatureMap")
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl FeatureMap {
    pub fn new(
        dim: usize,
        eval: impl Fn(&ColoredConfig) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            eval: Arc::new(eval),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, config: &ColoredConfig) -> Vec<f64> {
        let v = (self.eval)(config);
        debug_assert_eq!(v.len(), self.dim);
        v
    }
}

/// ⟨F(γ,k,l), F(γ,k',l)⟩ for every color, k <= k' < count and l <= lmax.
pub fn pair_invariant_map(n_colors: usize, radial: RadialSpec, lmax: usize) -> FeatureMap {
    let nch = radial.channels();
    let dim = n_colors * nch * (nch + 1) / 2 * (lmax + 1);
    FeatureMap::new(dim, move |config| {
        let f = fundamental_features(config, lmax, &radial);
        let mut out = Vec::with_capacity(dim);
        for g in 0..n_colors {
            for k in 0..nch {
                for k2 in k..nch {
                    for l in 0..=lmax {
                        out.push(
                            f.get(g, k, l)
                                .iter()
                                .zip(f.get(g, k2, l))
                                .map(|(x, y)| x * y)
                                .sum(),
                        );
                    }
                }
            }
        }
        out
    })
}

/// Sequence of projections onto hyperplanes. Each direction is a normalized Gaussian
/// inside the subspace left by the previous ones, so the directions are orthonormal.
#[derive(Clone, Debug)]
pub struct ProjectionChain {
    seed: u64,
    directions: Vec<DVector<f64>>,
    /// Orthonormal basis (columns) of what remains.
    basis: DMatrix<f64>,
}

impl ProjectionChain {
    pub fn random(n: usize, target: usize, seed: u64) -> Result<Self> {
        if n < target {
            return Err(Error::DimensionTooSmall { n, target });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gauss =
            |len: usize| DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut directions: Vec<DVector<f64>> = Vec::with_capacity(n - target);
        while directions.len() < n - target {
            let mut d = gauss(n);
            for e in &directions {
                d -= e * e.dot(&d);
            }
            let norm = d.norm();
            if norm > 1e-8 {
                directions.push(d / norm);
            }
        }
        // complement: Gram-Schmidt of random vectors against everything kept so far
        let mut kept = directions.clone();
        let mut basis = Vec::with_capacity(target);
        while basis.len() < target {
            let mut v = gauss(n);
            for e in &kept {
                v -= e * e.dot(&v);
            }
            let norm = v.norm();
            if norm > 1e-8 {
                let v = v / norm;
                kept.push(v.clone());
                basis.push(v);
            }
        }
        let basis = if target == n {
            DMatrix::identity(n, n)
        } else {
            DMatrix::from_columns(&basis)
        };
        Ok(Self {
            seed,
            directions,
            basis,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn directions(&self) -> &[DVector<f64>] {
        &self.directions
    }

    pub fn reduced_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Coordinates of the projected vector in the remaining subspace.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self.basis.transpose() * DVector::from_column_slice(x))
            .as_slice()
            .to_vec()
    }
}

/// 6k - 5.
pub fn reduced_dimension(k: usize) -> usize {
    (6 * k).saturating_sub(5)
}

/// Composition of `map` with a seeded projection chain down to 6k - 5 coordinates.
pub fn project_features(map: &FeatureMap, k: usize, seed: u64) -> Result<FeatureMap> {
    let chain = ProjectionChain::random(map.dim(), reduced_dimension(k), seed)?;
    let inner = map.clone();
    Ok(FeatureMap::new(chain.reduced_dim(), move |c| {
        chain.apply(&inner.eval(c))
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceRatioReport {
    pub min_ratio: f64,
    /// Pool indices of the minimizing pair.
    pub pair: (usize, usize),
    pub collisions: usize,
    pub n_pairs: usize,
}

fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// min over pairs of d_reduced / d_original. A collision is a pair with reduced
/// distance below 1e-12 while the original distance exceeds 1e-6.
pub fn distance_ratio_report(
    original: &FeatureMap,
    reduced: &FeatureMap,
    configs: &[ColoredConfig],
) -> Result<DistanceRatioReport> {
    let orig: Vec<Vec<f64>> = configs.iter().map(|c| original.eval(c)).collect();
    let red: Vec<Vec<f64>> = configs.iter().map(|c| reduced.eval(c)).collect();
    let mut report = DistanceRatioReport {
        min_ratio: f64::INFINITY,
        pair: (0, 0),
        collisions: 0,
        n_pairs: 0,
    };
    for i in 0..configs.len() {
        for j in i + 1..configs.len() {
            let d0 = distance(&orig[i], &orig[j]);
            if d0 <= EQUIVALENCE_THRESHOLD {
                return Err(Error::InvalidArgument(format!(
                    "configurations {i} and {j} are equivalent under the original map"
                )));
            }
            let d1 = distance(&red[i], &red[j]);
            if d1 < 1e-12 && d0 > 1e-6 {
                report.collisions += 1;
            }
            let r = d1 / d0;
            if r < report.min_ratio {
                report.min_ratio = r;
                report.pair = (i, j);
            }
            report.n_pairs += 1;
        }
    }
    Ok(report)
}

/// Seeded monochrome configurations with Gaussian coordinates.
pub fn random_pool(seed: u64, size: usize, n_points: usize) -> Vec<ColoredConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..size)
        .map(|_| {
            let pts: Vec<[f64; 3]> = (0..n_points)
                .map(|_| {
                    [
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                    ]
                })
                .collect();
            ColoredConfig::monochrome(&pts)
        })
        .collect()
}

pub const REPORT_HEADER: &str = "seed,pool_size,N,reduced_dim,min_ratio,collisions";

pub fn report_row(
    seed: u64,
    pool_size: usize,
    n: usize,
    reduced_dim: usize,
    r: &DistanceRatioReport,
) -> String {
    format!(
        "{seed},{pool_size},{n},{reduced_dim},{:e},{}",
        r.min_ratio, r.collisions
    )
}

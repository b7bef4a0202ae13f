//! Seeded SGD fitting.
//!
//! `fit_synthetic` trains a trace chain of block matrices (matmul path) or the
//! equivalent Clebsch-Gordan network (CG path) on the degree-ten contraction target.
//! Both start from the same seeded function; all weights are trained. Labels are
//! divided by the training standard deviation and each degree of the fundamental
//! features is rescaled from training statistics so that ι(F_l) has RMS Frobenius
//! norm sqrt(2a + 1).
//!
//! `fit_forces` fits the linear readout (plus per-element energy offsets) of an
//! [`EnergyModel`] to energies and forces. The readout is trained in coordinates that
//! whiten the weighted loss over the training set, so plain SGD sees an isotropic
//! quadratic.

use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cgnet::CgNet;
use crate::config::ColoredConfig;
use crate::error::{Error, Result};
use crate::features::{fundamental_features, fundamental_features_with_grad, FundamentalFeatures};
use crate::model::{param_init, InitFactors, InvariantModel, ModelHyper};
use crate::moments::{iota_scale, BlockLayout};
use crate::radial::RadialSpec;
use crate::tensors::{Sample, SyntheticData};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeaturePath {
    Matmul,
    ClebschGordan,
}

impl fmt::Display for FeaturePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeaturePath::Matmul => "matmul",
            FeaturePath::ClebschGordan => "cg",
        })
    }
}

impl FromStr for FeaturePath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matmul" => Ok(FeaturePath::Matmul),
            "cg" => Ok(FeaturePath::ClebschGordan),
            _ => Err(Error::InvalidArgument(format!(
                "unknown path {s:?}, expected matmul or cg"
            ))),
        }
    }
}

/// Scheduled unmasking: `start` slots active at epoch 0, one more every `step` epochs
/// (never, if `step` is 0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub start: usize,
    pub step: usize,
}

impl Schedule {
    pub fn active(&self, epoch: usize) -> usize {
        match self.step {
            0 => self.start,
            s => self.start + epoch / s,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Curriculum {
    /// Radial channels.
    pub radial: Schedule,
    /// Matrix factors; invariants using more factors are masked.
    pub body: Schedule,
}

/// Tuned constant rates for the synthetic task at batch size 32.
pub const MATMUL_RATE: f64 = 1e-2;
pub const CG_RATE: f64 = 5e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Learning rates tried by `fit_synthetic`; empty means `learning_rate` alone.
    pub lr_grid: Vec<f64>,
    pub epochs: usize,
    pub seed: u64,
    pub curriculum: Option<Curriculum>,
    /// Weight of the force term; the energy term gets 1 - force_weight.
    pub force_weight: f64,
    /// Workers for per-sample gradients; sums are always taken in sample order.
    pub threads: usize,
}

impl TrainConfig {
    pub fn new(batch_size: usize, learning_rate: f64, epochs: usize, seed: u64) -> Result<Self> {
        let tc = Self {
            batch_size,
            learning_rate,
            lr_grid: Vec::new(),
            epochs,
            seed,
            curriculum: None,
            force_weight: 0.999,
            threads: 1,
        };
        tc.validate()?;
        Ok(tc)
    }

    /// Five rates: lr/4, lr/2, lr, 1.5 lr, 2 lr.
    pub fn five_point_grid(lr: f64) -> Vec<f64> {
        [0.25, 0.5, 1.0, 1.5, 2.0].iter().map(|s| s * lr).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| r.is_finite() && r > 0.0;
        if self.batch_size == 0 || self.epochs == 0 || self.threads == 0 {
            return Err(Error::InvalidArgument(
                "batch size, epochs and threads must be positive".into(),
            ));
        }
        if !rate_ok(self.learning_rate) || !self.lr_grid.iter().all(|r| rate_ok(*r)) {
            return Err(Error::InvalidArgument(
                "learning rates must be positive and finite".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.force_weight) {
            return Err(Error::InvalidArgument(format!(
                "force weight {} outside [0, 1]",
                self.force_weight
            )));
        }
        Ok(())
    }

    fn rates(&self) -> Vec<f64> {
        if self.lr_grid.is_empty() {
            vec![self.learning_rate]
        } else {
            self.lr_grid.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub test_mse: f64,
    pub seconds: f64,
}

/// Outcome of one grid point; `final_train_mse` is None when the run diverged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub learning_rate: f64,
    pub final_train_mse: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// Epoch 0 is the untrained model.
    pub records: Vec<EpochRecord>,
    pub grid: Vec<GridPoint>,
    pub learning_rate: f64,
    /// Variance of the test labels (energies for force fits).
    pub test_label_variance: f64,
    pub params: Vec<f64>,
    pub param_shape: Vec<usize>,
}

pub const REPORT_HEADER: &str = "epoch,train_mse,test_mse,seconds";

impl TrainReport {
    pub fn csv(&self) -> String {
        let mut s = String::from(REPORT_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&format!(
                "{},{:e},{:e},{:e}\n",
                r.epoch, r.train_mse, r.test_mse, r.seconds
            ));
        }
        s
    }

    /// `# shape a b c` header, then one parameter per line.
    pub fn param_dump(&self) -> String {
        let shape: Vec<String> = self.param_shape.iter().map(|n| n.to_string()).collect();
        let mut s = format!("# shape {}\n", shape.join(" "));
        for p in &self.params {
            s.push_str(&format!("{p:e}\n"));
        }
        s
    }

    /// Hash of the bit patterns of the final parameters.
    pub fn digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for p in &self.params {
            p.to_bits().hash(&mut h);
        }
        h.finish()
    }

    pub fn final_record(&self) -> EpochRecord {
        *self
            .records
            .last()
            .expect("a report holds at least the initial record")
    }

    /// Test MSE over test label variance after the last epoch.
    pub fn normalized_test_mse(&self) -> f64 {
        self.final_record().test_mse / self.test_label_variance
    }

    /// Mean seconds of the trained epochs.
    pub fn seconds_per_epoch(&self) -> f64 {
        let t: Vec<f64> = self.records.iter().skip(1).map(|r| r.seconds).collect();
        t.iter().sum::<f64>() / t.len().max(1) as f64
    }

    /// Mean train MSE over the last `window` epochs is below the mean over the first
    /// `window` trained epochs.
    pub fn moving_average_decreases(&self, window: usize) -> bool {
        let t: Vec<f64> = self.records.iter().skip(1).map(|r| r.train_mse).collect();
        if window == 0 || t.len() < window {
            return false;
        }
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        mean(&t[t.len() - window..]) < mean(&t[..window])
    }
}

fn variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
}

/// Per-sample values and gradients computed on up to `threads` workers, returned in
/// sample order.
fn per_sample<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if threads <= 1 || items.len() < 2 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

fn batch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

/// Block layout, factor count and initialization of the synthetic models.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticArch {
    pub degree: usize,
    pub factors: usize,
    /// Independent chains whose outputs are summed.
    pub chains: usize,
}

impl Default for SyntheticArch {
    fn default() -> Self {
        Self {
            degree: 5,
            factors: 5,
            chains: 1,
        }
    }
}

impl SyntheticArch {
    pub fn lmax(&self) -> usize {
        2 * self.degree
    }

    fn hyper(&self, n_colors: usize) -> Result<ModelHyper> {
        Ok(ModelHyper {
            n_colors,
            radial: RadialSpec::polynomial(1),
            layout: BlockLayout::new(vec![self.degree], 1)?,
            n_vec: 0,
            body_orders: vec![self.factors; self.chains],
            shift_by_id: false,
            traces: true,
            n_elements: 1,
        })
    }

    /// Gaussian weights with unit-scale factor matrices, zero constants, and a readout
    /// of 1/sqrt(chains) on each full product and 0 on shorter prefixes.
    pub fn init(&self, n_colors: usize, seed: u64) -> Result<InvariantModel> {
        let factors = InitFactors {
            vec: 1.0,
            mat: (1.0 / (2 * self.degree + 1) as f64).sqrt(),
            fin: 1.0,
        };
        let mut m = param_init(self.hyper(n_colors)?, seed, factors)?;
        m.mat_c.iter_mut().for_each(|c| *c = 0.0);
        let full = 1.0 / (self.chains as f64).sqrt();
        for (r, o) in m.readout.iter_mut().zip(m.hyper.invariant_orders()) {
            *r = if o == self.factors { full } else { 0.0 };
        }
        Ok(m)
    }
}

enum Net {
    Matmul(InvariantModel),
    Cg(CgNet),
}

impl Net {
    fn output(&self, f: &FundamentalFeatures) -> Result<f64> {
        match self {
            Net::Matmul(m) => Ok(m
                .invariants_from_features(f, 0)
                .iter()
                .zip(&m.readout)
                .map(|(a, b)| a * b)
                .sum()),
            Net::Cg(n) => n.output(f),
        }
    }

    fn output_with_grad(&self, f: &FundamentalFeatures) -> Result<(f64, Vec<f64>)> {
        match self {
            Net::Matmul(m) => m.output_with_param_grad(f, 0),
            Net::Cg(n) => n.output_with_param_grad(f),
        }
    }

    fn add_scaled(&mut self, alpha: f64, g: &[f64]) -> Result<()> {
        match self {
            Net::Matmul(m) => m.add_scaled(alpha, g),
            Net::Cg(n) => n.add_scaled(alpha, g),
        }
    }

    fn params(&self) -> (Vec<f64>, Vec<usize>) {
        match self {
            Net::Matmul(m) => (m.params(), m.param_shape().to_vec()),
            Net::Cg(n) => (n.params(), n.param_shape().to_vec()),
        }
    }

    /// Readout weights and how many belong to each prefix.
    /// Readout and the number of factors behind each entry.
    fn readout_mut(&mut self) -> (&mut Vec<f64>, Vec<usize>) {
        match self {
            Net::Matmul(m) => {
                let orders = m.hyper.invariant_orders();
                (&mut m.readout, orders)
            }
            Net::Cg(n) => {
                let orders = (1..=n.readout.len()).collect();
                (&mut n.readout, orders)
            }
        }
    }
}

/// Degree rescaling so that ι_{a,a,l}(F_l) has RMS Frobenius norm sqrt(2a + 1) over
/// the training features.
fn degree_scales(train: &[FundamentalFeatures], a: usize) -> Vec<f64> {
    let lmax = 2 * a;
    (0..=lmax)
        .map(|l| {
            let mut s2 = 0.0;
            let mut n = 0usize;
            for f in train {
                for g in 0..f.n_colors() {
                    s2 += f.get(g, 0, l).iter().map(|x| x * x).sum::<f64>();
                    n += 1;
                }
            }
            let rms = (s2 / n.max(1) as f64).sqrt();
            if rms == 0.0 {
                1.0
            } else {
                ((2 * a + 1) as f64).sqrt() / (iota_scale(a, a, l).abs() * rms)
            }
        })
        .collect()
}

fn mse(net: &Net, xs: &[FundamentalFeatures], ys: &[f64], threads: usize) -> Result<f64> {
    if xs.is_empty() {
        return Ok(0.0);
    }
    let outs = per_sample(xs, threads, |f| net.output(f));
    let mut s = 0.0;
    for (o, y) in outs.into_iter().zip(ys) {
        let d = o? - y;
        s += d * d;
    }
    Ok(s / xs.len() as f64)
}

struct Prepared {
    train_x: Vec<FundamentalFeatures>,
    train_y: Vec<f64>,
    test_x: Vec<FundamentalFeatures>,
    test_y: Vec<f64>,
    /// Labels were divided by this.
    label_scale: f64,
    test_label_variance: f64,
}

fn prepare(data: &SyntheticData, arch: &SyntheticArch) -> Result<Prepared> {
    let labels = |s: &[Sample]| -> Result<Vec<f64>> {
        s.iter()
            .map(|x| {
                if x.label.is_finite() {
                    Ok(x.label)
                } else {
                    Err(Error::InvalidArgument("non-finite label".into()))
                }
            })
            .collect()
    };
    let (ytr, yte) = (labels(&data.train)?, labels(&data.test)?);
    let n_colors = data
        .train
        .first()
        .or(data.test.first())
        .map_or(1, |s| s.config.n_colors());
    let radial = RadialSpec::polynomial(1);
    let feats = |s: &[Sample]| -> Result<Vec<FundamentalFeatures>> {
        s.iter()
            .map(|x| {
                if x.config.n_colors() != n_colors {
                    return Err(Error::ShapeMismatch(
                        "samples disagree on the palette".into(),
                    ));
                }
                Ok(fundamental_features(&x.config, arch.lmax(), &radial))
            })
            .collect()
    };
    let (mut train_x, mut test_x) = (feats(&data.train)?, feats(&data.test)?);
    let scales = degree_scales(&train_x, arch.degree);
    train_x
        .iter_mut()
        .chain(test_x.iter_mut())
        .for_each(|f| f.scale_degrees(&scales));
    let sd = variance(&ytr).sqrt();
    let label_scale = if sd > 0.0 { sd } else { 1.0 };
    Ok(Prepared {
        train_y: ytr.iter().map(|y| y / label_scale).collect(),
        test_y: yte.iter().map(|y| y / label_scale).collect(),
        test_label_variance: variance(&yte),
        train_x,
        test_x,
        label_scale,
    })
}

fn n_colors_of(data: &SyntheticData) -> usize {
    data.train
        .first()
        .or(data.test.first())
        .map_or(1, |s| s.config.n_colors())
}

fn build_net(
    path: FeaturePath,
    data: &SyntheticData,
    arch: &SyntheticArch,
    seed: u64,
) -> Result<Net> {
    let m = arch.init(n_colors_of(data), seed)?;
    Ok(match path {
        FeaturePath::Matmul => Net::Matmul(m),
        FeaturePath::ClebschGordan => Net::Cg(CgNet::from_matmul(&m)?),
    })
}

/// One SGD run at a fixed rate. Records are in label units.
fn run_sgd(
    mut net: Net,
    p: &Prepared,
    tc: &TrainConfig,
    lr: f64,
) -> Result<(Vec<EpochRecord>, Net)> {
    let s2 = p.label_scale * p.label_scale;
    let initial = mse(&net, &p.train_x, &p.train_y, tc.threads)?;
    let mut records = vec![EpochRecord {
        epoch: 0,
        train_mse: initial * s2,
        test_mse: mse(&net, &p.test_x, &p.test_y, tc.threads)? * s2,
        seconds: 0.0,
    }];
    let n_params = net.params().0.len();
    for epoch in 1..=tc.epochs {
        let t0 = Instant::now();
        let active = tc.curriculum.map(|c| c.body.active(epoch - 1));
        // readout of prefixes with more than `active` factors is held at zero
        let masked: Vec<usize> = match active {
            None => Vec::new(),
            Some(active) => {
                let (r, orders) = net.readout_mut();
                let n = r.len();
                (0..n)
                    .filter(|&k| orders[k] > active)
                    .map(|k| {
                        r[k] = 0.0;
                        n_params - n + k
                    })
                    .collect()
            }
        };
        let order = batch_order(tc.seed, epoch, p.train_x.len());
        for batch in order.chunks(tc.batch_size) {
            let grads = per_sample(batch, tc.threads, |&i| {
                net.output_with_grad(&p.train_x[i])
                    .map(|(o, g)| (o - p.train_y[i], g))
            });
            let mut total: Option<Vec<f64>> = None;
            for r in grads {
                let (res, g) = r?;
                let t = total.get_or_insert_with(|| vec![0.0; g.len()]);
                for (a, b) in t.iter_mut().zip(&g) {
                    *a += 2.0 * res * b;
                }
            }
            let mut g = total.expect("batches are non-empty");
            for &k in &masked {
                g[k] = 0.0;
            }
            net.add_scaled(-lr / batch.len() as f64, &g)?;
        }
        let train = mse(&net, &p.train_x, &p.train_y, tc.threads)?;
        let test = mse(&net, &p.test_x, &p.test_y, tc.threads)?;
        let seconds = t0.elapsed().as_secs_f64();
        if !train.is_finite() || train > 1e3 * initial.max(f64::MIN_POSITIVE) {
            return Err(Error::DivergenceDetected {
                epoch,
                loss: train * s2,
                initial: initial * s2,
            });
        }
        records.push(EpochRecord {
            epoch,
            train_mse: train * s2,
            test_mse: test * s2,
            seconds,
        });
    }
    Ok((records, net))
}

/// Trains with every rate of the grid and keeps the run with the lowest final train
/// MSE; diverged runs are recorded and skipped.
pub fn fit_synthetic_with(
    path: FeaturePath,
    data: &SyntheticData,
    tc: &TrainConfig,
    arch: &SyntheticArch,
) -> Result<TrainReport> {
    tc.validate()?;
    if data.train.is_empty() {
        return Err(Error::InvalidArgument("no training samples".into()));
    }
    let p = prepare(data, arch)?;
    let mut grid = Vec::new();
    let mut best: Option<(f64, Vec<EpochRecord>, Net)> = None;
    let mut last_err = None;
    for lr in tc.rates() {
        let net = build_net(path, data, arch, tc.seed)?;
        match run_sgd(net, &p, tc, lr) {
            Ok((records, net)) => {
                let fin = records.last().expect("initial record").train_mse;
                grid.push(GridPoint {
                    learning_rate: lr,
                    final_train_mse: Some(fin),
                });
                if best
                    .as_ref()
                    .is_none_or(|b| fin < b.1.last().expect("initial record").train_mse)
                {
                    best = Some((lr, records, net));
                }
            }
            Err(e @ Error::DivergenceDetected { .. }) => {
                grid.push(GridPoint {
                    learning_rate: lr,
                    final_train_mse: None,
                });
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    let Some((learning_rate, records, net)) = best else {
        return Err(last_err.expect("every grid point diverged"));
    };
    let (params, param_shape) = net.params();
    Ok(TrainReport {
        records,
        grid,
        learning_rate,
        test_label_variance: p.test_label_variance,
        params,
        param_shape,
    })
}

pub fn fit_synthetic(
    path: FeaturePath,
    data: &SyntheticData,
    tc: &TrainConfig,
) -> Result<TrainReport> {
    fit_synthetic_with(path, data, tc, &SyntheticArch::default())
}

/// How a configuration is split into the environments whose energies are summed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Environment {
    /// The whole configuration, relative to the origin, with element 0.
    Global,
    /// One environment per atom: the other atoms within `cutoff`, relative to it, with
    /// the atom's color as its element.
    AtomCentered { cutoff: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForceSample {
    pub config: ColoredConfig,
    pub energy: f64,
    pub forces: Vec<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForceData {
    pub train: Vec<ForceSample>,
    pub test: Vec<ForceSample>,
}

/// Energy = readout · Σ_environments invariants + Σ_atoms offsets[element].
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyModel {
    pub invariants: InvariantModel,
    pub environment: Environment,
    /// One per element (color).
    pub offsets: Vec<f64>,
}

/// Energy row and force rows (3 per atom, F = -∂E/∂r) of the linear design, columns
/// being the invariants followed by the per-element atom counts.
struct Design {
    energy: Vec<f64>,
    forces: Vec<Vec<f64>>,
}

impl EnergyModel {
    pub fn new(invariants: InvariantModel, environment: Environment) -> Self {
        let n = invariants.hyper.n_colors;
        Self {
            invariants,
            environment,
            offsets: vec![0.0; n],
        }
    }

    fn n_cols(&self) -> usize {
        self.invariants.readout.len() + self.offsets.len()
    }

    fn weights(&self) -> Vec<f64> {
        self.invariants
            .readout
            .iter()
            .chain(&self.offsets)
            .copied()
            .collect()
    }

    fn set_weights(&mut self, w: &[f64]) {
        let n = self.invariants.readout.len();
        self.invariants.readout.copy_from_slice(&w[..n]);
        self.offsets.copy_from_slice(&w[n..]);
    }

    /// Invariants and their gradients for one environment, with radial channels at or
    /// beyond `active_radial` masked.
    fn env_terms(
        &self,
        env: &ColoredConfig,
        element: usize,
        active_radial: Option<usize>,
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let h = &self.invariants.hyper;
        let (mut f, mut tangents) = fundamental_features_with_grad(env, h.lmax(), &h.radial)?;
        if let Some(a) = active_radial {
            f.mask_channels(a);
            tangents.iter_mut().for_each(|t| t.mask_channels(a));
        }
        if element >= h.n_elements {
            return Err(Error::InvalidArgument(format!(
                "element {element} outside 0..{}",
                h.n_elements
            )));
        }
        Ok(self
            .invariants
            .invariants_with_tangents(&f, &tangents, element))
    }

    fn design(&self, config: &ColoredConfig, active_radial: Option<usize>) -> Result<Design> {
        if config.n_colors() != self.invariants.hyper.n_colors {
            return Err(Error::ShapeMismatch(format!(
                "config has {} colors, model {}",
                config.n_colors(),
                self.invariants.hyper.n_colors
            )));
        }
        let m = self.invariants.readout.len();
        let n = config.len();
        let mut energy = vec![0.0; self.n_cols()];
        let mut forces = vec![vec![0.0; self.n_cols()]; 3 * n];
        for (c, _) in config.points() {
            energy[m + c] += 1.0;
        }
        match self.environment {
            Environment::Global => {
                let (val, grad) = self.env_terms(config, 0, active_radial)?;
                for (k, (v, g)) in val.iter().zip(&grad).enumerate() {
                    energy[k] += v;
                    for (t, d) in g.iter().enumerate() {
                        forces[t][k] -= d;
                    }
                }
            }
            Environment::AtomCentered { cutoff } => {
                let pts = config.points();
                for (i, (ci, ri)) in pts.iter().enumerate() {
                    let mut members = Vec::new();
                    let mut env = Vec::new();
                    for (j, (cj, rj)) in pts.iter().enumerate() {
                        let d = [rj[0] - ri[0], rj[1] - ri[1], rj[2] - ri[2]];
                        if j != i && (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() < cutoff {
                            members.push(j);
                            env.push((*cj, d));
                        }
                    }
                    let env = ColoredConfig::new(config.n_colors(), env)?;
                    let (val, grad) =
                        self.env_terms(&env, *ci, active_radial)
                            .map_err(|e| match e {
                                Error::NonDifferentiablePoint(k) => {
                                    Error::NonDifferentiablePoint(members[k])
                                }
                                e => e,
                            })?;
                    for (k, (v, g)) in val.iter().zip(&grad).enumerate() {
                        energy[k] += v;
                        for (e, &j) in members.iter().enumerate() {
                            for ax in 0..3 {
                                let d = g[3 * e + ax];
                                forces[3 * j + ax][k] -= d;
                                forces[3 * i + ax][k] += d;
                            }
                        }
                    }
                }
            }
        }
        Ok(Design { energy, forces })
    }

    /// Energy and per-atom forces F_i = -∂E/∂r_i.
    pub fn energy_and_forces(&self, config: &ColoredConfig) -> Result<(f64, Vec<[f64; 3]>)> {
        let d = self.design(config, None)?;
        let w = self.weights();
        let dot = |row: &[f64]| row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let forces = d
            .forces
            .chunks(3)
            .map(|c| [dot(&c[0]), dot(&c[1]), dot(&c[2])])
            .collect();
        Ok((dot(&d.energy), forces))
    }
}

/// Mean squared force component error.
pub fn force_mse(model: &EnergyModel, samples: &[ForceSample]) -> Result<f64> {
    let mut s = 0.0;
    let mut n = 0usize;
    for x in samples {
        let (_, f) = model.energy_and_forces(&x.config)?;
        for (p, t) in f.iter().zip(&x.forces) {
            for ax in 0..3 {
                s += (p[ax] - t[ax]).powi(2);
                n += 1;
            }
        }
    }
    Ok(if n == 0 { 0.0 } else { s / n as f64 })
}

/// Weighted design of one sample: rows scaled so that the loss is a plain sum of
/// squares, with targets alongside.
struct WeightedRows {
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

fn weighted_rows(
    model: &EnergyModel,
    samples: &[ForceSample],
    w_f: f64,
    active_radial: Option<usize>,
    masked_cols: &[bool],
) -> Result<Vec<WeightedRows>> {
    let n_atoms: usize = samples.iter().map(|s| s.config.len()).sum();
    let (ce, cf) = (
        (1.0 - w_f) / samples.len().max(1) as f64,
        w_f / (3 * n_atoms).max(1) as f64,
    );
    samples
        .iter()
        .map(|s| {
            if s.forces.len() != s.config.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} forces for {} atoms",
                    s.forces.len(),
                    s.config.len()
                )));
            }
            let d = model.design(&s.config, active_radial)?;
            let scale = |row: &[f64], c: f64| -> Vec<f64> {
                row.iter()
                    .zip(masked_cols)
                    .map(|(x, m)| if *m { 0.0 } else { x * c.sqrt() })
                    .collect()
            };
            let mut rows = vec![scale(&d.energy, ce)];
            let mut targets = vec![s.energy * ce.sqrt()];
            for (k, r) in d.forces.iter().enumerate() {
                rows.push(scale(r, cf));
                targets.push(s.forces[k / 3][k % 3] * cf.sqrt());
            }
            Ok(WeightedRows { rows, targets })
        })
        .collect()
}

fn weighted_loss(rows: &[WeightedRows], w: &[f64]) -> f64 {
    rows.iter()
        .flat_map(|s| s.rows.iter().zip(&s.targets))
        .map(|(r, t)| (r.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() - t).powi(2))
        .sum()
}

/// T with Tᵀ G T = I on the range of the Gram matrix G of the weighted rows.
fn whitening(rows: &[WeightedRows], n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut g = DMatrix::<f64>::zeros(n, n);
    for r in rows.iter().flat_map(|s| &s.rows) {
        let v = nalgebra::DVector::from_column_slice(r);
        g.ger(1.0, &v, &v, 1.0);
    }
    let eig = g.symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > 1e-12 * top && top > 0.0)
        .collect();
    let mut t = DMatrix::zeros(n, keep.len());
    let mut t_inv = DMatrix::zeros(keep.len(), n);
    for (c, &i) in keep.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        for r in 0..n {
            t[(r, c)] = eig.eigenvectors[(r, i)] / s;
            t_inv[(c, r)] = eig.eigenvectors[(r, i)] * s;
        }
    }
    (t, t_inv)
}

/// Fits the readout and per-element offsets of `model` by SGD on the weighted energy
/// and force loss. Records hold the weighted loss (sum of squares with weights
/// (1 - w)/N_E and w/N_F).
pub fn fit_forces(
    model: &mut EnergyModel,
    data: &ForceData,
    tc: &TrainConfig,
) -> Result<TrainReport> {
    tc.validate()?;
    if data.train.is_empty() {
        return Err(Error::InvalidArgument("no training samples".into()));
    }
    let n = model.n_cols();
    let orders = model.invariants.hyper.invariant_orders();
    let stage = |epoch: usize| -> (Option<usize>, Vec<bool>) {
        match tc.curriculum {
            None => (None, vec![false; n]),
            Some(c) => {
                let b = c.body.active(epoch);
                let mut m: Vec<bool> = orders.iter().map(|o| *o > b).collect();
                m.resize(n, false);
                (Some(c.radial.active(epoch)), m)
            }
        }
    };
    let energies: Vec<f64> = data.test.iter().map(|s| s.energy).collect();
    let mut current = stage(0);
    let build = |st: &(Option<usize>, Vec<bool>),
                 model: &EnergyModel|
     -> Result<(Vec<WeightedRows>, Vec<WeightedRows>)> {
        Ok((
            weighted_rows(model, &data.train, tc.force_weight, st.0, &st.1)?,
            weighted_rows(model, &data.test, tc.force_weight, st.0, &st.1)?,
        ))
    };
    let (mut train, mut test) = build(&current, model)?;
    let (mut t, mut t_inv) = whitening(&train, n);
    let mut w = model.weights();
    for (x, m) in w.iter_mut().zip(&current.1) {
        if *m {
            *x = 0.0;
        }
    }
    let mut phi = &t_inv * nalgebra::DVector::from_column_slice(&w);
    let initial = weighted_loss(&train, &w);
    let mut records = vec![EpochRecord {
        epoch: 0,
        train_mse: initial,
        test_mse: weighted_loss(&test, &w),
        seconds: 0.0,
    }];
    let n_batches = data.train.len().div_ceil(tc.batch_size) as f64;
    for epoch in 1..=tc.epochs {
        let t0 = Instant::now();
        let next = stage(epoch - 1);
        if next != current {
            current = next;
            (train, test) = build(&current, model)?;
            (t, t_inv) = whitening(&train, n);
            for (x, m) in w.iter_mut().zip(&current.1) {
                if *m {
                    *x = 0.0;
                }
            }
            phi = &t_inv * nalgebra::DVector::from_column_slice(&w);
        }
        // each step uses the unbiased full-gradient estimate over n_batches, so one
        // pass approximates one full-batch step on the whitened quadratic (Hessian 2 I)
        for batch in batch_order(tc.seed, epoch, train.len()).chunks(tc.batch_size) {
            let wv = &t * &phi;
            let mut g = nalgebra::DVector::<f64>::zeros(n);
            for &i in batch {
                for (r, y) in train[i].rows.iter().zip(&train[i].targets) {
                    let res: f64 = r.iter().zip(wv.iter()).map(|(a, b)| a * b).sum::<f64>() - y;
                    for (gk, rk) in g.iter_mut().zip(r) {
                        *gk += 2.0 * res * rk;
                    }
                }
            }
            let scale = train.len() as f64 / batch.len() as f64 / n_batches;
            phi -= (tc.learning_rate * scale) * (t.transpose() * g);
        }
        w = (&t * &phi).iter().copied().collect();
        let loss = weighted_loss(&train, &w);
        if !loss.is_finite() || loss > 1e3 * initial.max(f64::MIN_POSITIVE) {
            return Err(Error::DivergenceDetected {
                epoch,
                loss,
                initial,
            });
        }
        records.push(EpochRecord {
            epoch,
            train_mse: loss,
            test_mse: weighted_loss(&test, &w),
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    model.set_weights(&w);
    Ok(TrainReport {
        records,
        grid: vec![GridPoint {
            learning_rate: tc.learning_rate,
            final_train_mse: Some(weighted_loss(&train, &w)),
        }],
        learning_rate: tc.learning_rate,
        test_label_variance: variance(&energies),
        params: w,
        param_shape: vec![model.invariants.readout.len(), model.offsets.len()],
    })
}

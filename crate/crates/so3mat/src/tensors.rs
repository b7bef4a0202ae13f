//! Moment tensors Σ_{r∈S_γ} r^{⊗k} and full index contractions between them.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::ColoredConfig;
use crate::error::{Error, Result};

/// Largest moment order handled (3^10 entries).
pub const MAX_ORDER: usize = 10;

/// Dense symmetric k-way array; entry (i_1..i_k) at Σ i_j 3^{k-1-j}.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTensor {
    color: usize,
    order: usize,
    data: Vec<f64>,
}

impl MomentTensor {
    pub fn color(&self) -> usize {
        self.color
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[idx.iter().fold(0, |acc, i| 3 * acc + i)]
    }
}

pub fn moment_tensor(config: &ColoredConfig, color: usize, k: usize) -> Result<MomentTensor> {
    config.check_color(color)?;
    if k > MAX_ORDER {
        return Err(Error::InvalidArgument(format!(
            "moment order {k} exceeds {MAX_ORDER}"
        )));
    }
    let mut data = vec![0.0; 3usize.pow(k as u32)];
    let mut power = Vec::with_capacity(data.len());
    for r in config.of_color(color) {
        power.clear();
        power.push(1.0);
        for _ in 0..k {
            power = power
                .iter()
                .flat_map(|p| r.iter().map(move |x| p * x))
                .collect();
        }
        for (d, p) in data.iter_mut().zip(&power) {
            *d += p;
        }
    }
    Ok(MomentTensor {
        color,
        order: k,
        data,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Factor {
    Moment { color: usize, labels: Vec<char> },
    LeviCivita([char; 3]),
}

impl Factor {
    fn labels(&self) -> &[char] {
        match self {
            Factor::Moment { labels, .. } => labels,
            Factor::LeviCivita(l) => l,
        }
    }
}

/// A product of moment tensors and ε symbols in which every index label occurs
/// exactly twice, so the contraction is a scalar.
///
/// Text form: `T_{abc}(0) T_{ab}(1) eps_{cde} ...`, factors optionally separated by
/// whitespace, colors 0-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContractionSpec {
    factors: Vec<Factor>,
}

impl ContractionSpec {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        let mut count: HashMap<char, usize> = HashMap::new();
        for f in &factors {
            if let Factor::Moment { labels, .. } = f {
                if labels.len() > MAX_ORDER {
                    return Err(Error::MalformedSpec(format!(
                        "moment factor of order {} exceeds {MAX_ORDER}",
                        labels.len()
                    )));
                }
            }
            for c in f.labels() {
                *count.entry(*c).or_default() += 1;
            }
        }
        let mut bad: Vec<_> = count
            .iter()
            .filter(|(_, n)| **n != 2)
            .map(|(c, n)| format!("{c}×{n}"))
            .collect();
        if !bad.is_empty() {
            bad.sort();
            return Err(Error::MalformedSpec(format!(
                "labels must occur exactly twice: {}",
                bad.join(", ")
            )));
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Number of ε factors mod 2; odd specs flip sign under reflection.
    pub fn parity(&self) -> usize {
        self.factors
            .iter()
            .filter(|f| matches!(f, Factor::LeviCivita(_)))
            .count()
            % 2
    }

    fn n_labels(&self) -> usize {
        self.factors.iter().map(|f| f.labels().len()).sum::<usize>() / 2
    }

    /// T_{abcdefghij}(γ1) T_{akn}(γ2) T_{bckl}(γ3) T_{deflm}(γ4) T_{ghijmn}(γ5) with γ_i = i - 1.
    pub fn degree_ten_target() -> Self {
        "T_{abcdefghij}(0) T_{akn}(1) T_{bckl}(2) T_{deflm}(3) T_{ghijmn}(4)"
            .parse()
            .expect("valid literal")
    }
}

impl FromStr for ContractionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::MalformedSpec(format!("{msg} in {s:?}"));
        let mut factors = Vec::new();
        let mut rest = s.trim_start();
        while !rest.is_empty() {
            let eps = if let Some(r) = rest.strip_prefix("eps_{") {
                rest = r;
                true
            } else if let Some(r) = rest.strip_prefix("T_{") {
                rest = r;
                false
            } else {
                return Err(bad("expected `T_{` or `eps_{`"));
            };
            let close = rest.find('}').ok_or_else(|| bad("unclosed label list"))?;
            let labels: Vec<char> = rest[..close].chars().collect();
            if !labels.iter().all(|c| c.is_ascii_alphabetic()) {
                return Err(bad("labels must be ASCII letters"));
            }
            rest = &rest[close + 1..];
            if eps {
                let l: [char; 3] = labels.try_into().map_err(|_| bad("ε takes three labels"))?;
                factors.push(Factor::LeviCivita(l));
            } else {
                let r = rest
                    .strip_prefix('(')
                    .ok_or_else(|| bad("expected `(color)`"))?;
                let close = r.find(')').ok_or_else(|| bad("unclosed color"))?;
                let color = r[..close]
                    .trim()
                    .parse()
                    .map_err(|_| bad("color must be a non-negative integer"))?;
                rest = &r[close + 1..];
                factors.push(Factor::Moment { color, labels });
            }
            rest = rest.trim_start();
        }
        if factors.is_empty() {
            return Err(bad("no factors"));
        }
        Self::new(factors)
    }
}

impl fmt::Display for ContractionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, fac) in self.factors.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            match fac {
                Factor::Moment { color, labels } => {
                    write!(f, "T_{{{}}}({color})", labels.iter().collect::<String>())?
                }
                Factor::LeviCivita(l) => write!(f, "eps_{{{}}}", l.iter().collect::<String>())?,
            }
        }
        Ok(())
    }
}

/// Dense tensor over labelled 3-dimensional indices, row-major in `labels` order.
#[derive(Clone, Debug)]
struct Labelled {
    labels: Vec<char>,
    data: Vec<f64>,
}

fn levi_civita() -> Vec<f64> {
    let mut e = vec![0.0; 27];
    for (i, j, k, s) in [
        (0, 1, 2, 1.0),
        (1, 2, 0, 1.0),
        (2, 0, 1, 1.0),
        (0, 2, 1, -1.0),
        (2, 1, 0, -1.0),
        (1, 0, 2, -1.0),
    ] {
        e[9 * i + 3 * j + k] = s;
    }
    e
}

impl Labelled {
    /// Sums over any label repeated within this tensor.
    fn self_trace(self) -> Self {
        let Some((p, q)) = (0..self.labels.len())
            .flat_map(|p| (p + 1..self.labels.len()).map(move |q| (p, q)))
            .find(|&(p, q)| self.labels[p] == self.labels[q])
        else {
            return self;
        };
        let k = self.labels.len();
        let labels: Vec<char> = self
            .labels
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != p && *i != q)
            .map(|(_, c)| *c)
            .collect();
        let mut data = vec![0.0; 3usize.pow(k as u32 - 2)];
        let mut idx = vec![0usize; k];
        for v in &self.data {
            if idx[p] == idx[q] {
                let flat = (0..k)
                    .filter(|i| *i != p && *i != q)
                    .fold(0, |acc, i| 3 * acc + idx[i]);
                data[flat] += v;
            }
            increment(&mut idx);
        }
        Self { labels, data }.self_trace()
    }

    /// Reorders axes to `order` (a permutation of `labels`).
    fn permuted(&self, order: &[char]) -> Vec<f64> {
        if order == self.labels.as_slice() {
            return self.data.clone();
        }
        let k = self.labels.len();
        let pos: Vec<usize> = order
            .iter()
            .map(|c| {
                self.labels
                    .iter()
                    .position(|d| d == c)
                    .expect("label present")
            })
            .collect();
        let mut stride = vec![0usize; k];
        for i in 0..k {
            stride[i] = 3usize.pow((k - 1 - i) as u32);
        }
        let mut out = vec![0.0; self.data.len()];
        let mut idx = vec![0usize; k];
        for o in out.iter_mut() {
            *o = self.data[(0..k).map(|i| idx[i] * stride[pos[i]]).sum::<usize>()];
            increment(&mut idx);
        }
        out
    }

    fn contract(&self, other: &Self) -> Self {
        let shared: Vec<char> = self
            .labels
            .iter()
            .filter(|c| other.labels.contains(c))
            .copied()
            .collect();
        let free_a: Vec<char> = self
            .labels
            .iter()
            .filter(|c| !shared.contains(c))
            .copied()
            .collect();
        let free_b: Vec<char> = other
            .labels
            .iter()
            .filter(|c| !shared.contains(c))
            .copied()
            .collect();
        let a = self.permuted(&[free_a.clone(), shared.clone()].concat());
        let b = other.permuted(&[shared.clone(), free_b.clone()].concat());
        let (m, s, n) = (
            3usize.pow(free_a.len() as u32),
            3usize.pow(shared.len() as u32),
            3usize.pow(free_b.len() as u32),
        );
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let row = &a[i * s..(i + 1) * s];
            let out = &mut data[i * n..(i + 1) * n];
            for (t, av) in row.iter().enumerate() {
                if *av == 0.0 {
                    continue;
                }
                for (o, bv) in out.iter_mut().zip(&b[t * n..(t + 1) * n]) {
                    *o += av * bv;
                }
            }
        }
        Self {
            labels: [free_a, free_b].concat(),
            data,
        }
    }
}

/// Odometer increment over base-3 digits, last digit fastest.
fn increment(idx: &mut [usize]) {
    for d in idx.iter_mut().rev() {
        *d += 1;
        if *d < 3 {
            return;
        }
        *d = 0;
    }
}

fn leaves(spec: &ContractionSpec, config: &ColoredConfig) -> Result<Vec<Labelled>> {
    let mut cache: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    spec.factors
        .iter()
        .map(|f| {
            let (labels, data) = match f {
                Factor::Moment { color, labels } => {
                    let key = (*color, labels.len());
                    let data = match cache.entry(key) {
                        Entry::Occupied(e) => e.get().clone(),
                        Entry::Vacant(e) => e
                            .insert(moment_tensor(config, *color, labels.len())?.data)
                            .clone(),
                    };
                    (labels.clone(), data)
                }
                Factor::LeviCivita(l) => (l.to_vec(), levi_civita()),
            };
            Ok(Labelled { labels, data }.self_trace())
        })
        .collect()
}

/// Evaluates the contraction pairwise, always merging the pair with the smallest result.
pub fn contract(spec: &ContractionSpec, config: &ColoredConfig) -> Result<f64> {
    let mut pool = leaves(spec, config)?;
    while pool.len() > 1 {
        let mut best = (usize::MAX, usize::MAX, 0, 1);
        for i in 0..pool.len() {
            for j in i + 1..pool.len() {
                let shared = pool[i]
                    .labels
                    .iter()
                    .filter(|c| pool[j].labels.contains(c))
                    .count();
                let result = pool[i].labels.len() + pool[j].labels.len() - 2 * shared;
                // prefer small results, then pairs that actually share indices
                let key = (result, usize::from(shared == 0));
                if key < (best.0, best.1) {
                    best = (key.0, key.1, i, j);
                }
            }
        }
        let (i, j) = (best.2, best.3);
        let b = pool.swap_remove(j);
        let a = pool.swap_remove(i);
        pool.push(a.contract(&b));
    }
    Ok(pool.pop().map(|t| t.data[0]).unwrap_or(1.0))
}

/// Reference evaluator: one loop over every assignment of all labels.
pub fn contract_naive(spec: &ContractionSpec, config: &ColoredConfig) -> Result<f64> {
    let mut labels: Vec<char> = spec
        .factors
        .iter()
        .flat_map(|f| f.labels().iter().copied())
        .collect();
    labels.sort_unstable();
    labels.dedup();
    debug_assert_eq!(labels.len(), spec.n_labels());
    let mut tensors = Vec::new();
    let eps = levi_civita();
    for f in &spec.factors {
        let data = match f {
            Factor::Moment { color, labels } => moment_tensor(config, *color, labels.len())?.data,
            Factor::LeviCivita(_) => eps.clone(),
        };
        let pos: Vec<usize> = f
            .labels()
            .iter()
            .map(|c| labels.binary_search(c).expect("label present"))
            .collect();
        tensors.push((pos, data));
    }
    let mut idx = vec![0usize; labels.len()];
    let mut total = 0.0;
    for _ in 0..3usize.pow(labels.len() as u32) {
        let mut term = 1.0;
        for (pos, data) in &tensors {
            term *= data[pos.iter().fold(0, |acc, p| 3 * acc + idx[*p])];
            if term == 0.0 {
                break;
            }
        }
        total += term;
        increment(&mut idx);
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub config: ColoredConfig,
    pub label: f64,
}

impl Sample {
    /// `colors | coordinates | label`, space separated, shortest round-trip floats.
    pub fn to_line(&self) -> String {
        let colors: Vec<String> = self
            .config
            .points()
            .iter()
            .map(|(c, _)| c.to_string())
            .collect();
        let coords: Vec<String> = self
            .config
            .points()
            .iter()
            .flat_map(|(_, r)| r.iter().map(|x| x.to_string()))
            .collect();
        format!(
            "{} | {} | {}",
            colors.join(" "),
            coords.join(" "),
            self.label
        )
    }

    pub fn from_line(line: &str, n_colors: usize) -> Result<Self> {
        let bad = |m: &str| Error::InvalidArgument(format!("bad sample record ({m}): {line:?}"));
        let parts: Vec<&str> = line.split('|').collect();
        let [colors, coords, label] = parts.as_slice() else {
            return Err(bad("expected three `|`-separated fields"));
        };
        let colors: Vec<usize> = colors
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("color"))?;
        let coords: Vec<f64> = coords
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("coordinate"))?;
        if coords.len() != 3 * colors.len() {
            return Err(bad("coordinate count"));
        }
        let label = label.trim().parse().map_err(|_| bad("label"))?;
        let points = colors
            .iter()
            .enumerate()
            .map(|(i, c)| (*c, [coords[3 * i], coords[3 * i + 1], coords[3 * i + 2]]))
            .collect();
        Ok(Self {
            config: ColoredConfig::new(n_colors, points)?,
            label,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

fn unit_vector<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-12 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Uniform points on the unit sphere, `points_per_color` per color, labelled by the
/// degree-ten target over colors 0..5.
pub fn synthetic_dataset(
    seed: u64,
    n_train: usize,
    n_test: usize,
    points_per_color: usize,
    colors: usize,
) -> Result<SyntheticData> {
    if colors < 5 {
        return Err(Error::InvalidArgument(format!(
            "the target needs 5 colors, got {colors}"
        )));
    }
    let spec = ContractionSpec::degree_ten_target();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Result<Vec<Sample>> {
        (0..n)
            .map(|_| {
                let points = (0..colors)
                    .flat_map(|c| std::iter::repeat_n(c, points_per_color))
                    .map(|c| (c, unit_vector(&mut rng)))
                    .collect();
                let config = ColoredConfig::new(colors, points)?;
                let label = contract(&spec, &config)?;
                Ok(Sample { config, label })
            })
            .collect()
    };
    let train = draw(n_train)?;
    let test = draw(n_test)?;
    Ok(SyntheticData { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ColoredConfig {
        ColoredConfig::new(
            3,
            vec![
                (0, [0.3, -1.0, 0.5]),
                (0, [1.2, 0.1, -0.4]),
                (1, [0.0, 0.7, 0.9]),
                (2, [-0.6, 0.2, 0.3]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_point_second_moment() {
        let t = moment_tensor(&ColoredConfig::monochrome(&[[1.0, 0.0, 0.0]]), 0, 2).unwrap();
        assert_eq!(t.data()[0], 1.0);
        assert!(t.data()[1..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn moment_tensor_is_symmetric() {
        let t = moment_tensor(&cfg(), 0, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert_eq!(t.get(&[i, j, k]), t.get(&[k, i, j]));
                    assert_eq!(t.get(&[i, j, k]), t.get(&[j, i, k]));
                }
            }
        }
    }

    #[test]
    fn labels_must_pair_up() {
        assert!(matches!(
            "T_{ab}(0) T_{a}(1)".parse::<ContractionSpec>(),
            Err(Error::MalformedSpec(_))
        ));
        assert!(matches!(
            "T_{aaa}(0)".parse::<ContractionSpec>(),
            Err(Error::MalformedSpec(_))
        ));
        assert!(matches!(
            "Q_{a}(0)".parse::<ContractionSpec>(),
            Err(Error::MalformedSpec(_))
        ));
    }

    #[test]
    fn round_trip_text() {
        let s = ContractionSpec::degree_ten_target();
        assert_eq!(s.to_string().parse::<ContractionSpec>().unwrap(), s);
    }

    #[test]
    fn greedy_matches_naive() {
        for text in [
            "T_{aa}(0)",
            "T_{a}(0) T_{a}(1)",
            "T_{abc}(0) T_{abd}(1) T_{cd}(2)",
            "eps_{abc} T_{a}(0) T_{b}(1) T_{c}(2)",
            "T_{ab}(0) eps_{abc} T_{cd}(1) T_{d}(2)",
            "T_{abcd}(0) T_{ab}(1) T_{cd}(0)",
        ] {
            let spec: ContractionSpec = text.parse().unwrap();
            let (g, n) = (
                contract(&spec, &cfg()).unwrap(),
                contract_naive(&spec, &cfg()).unwrap(),
            );
            assert!(
                (g - n).abs() < 1e-12 * (1.0 + n.abs()),
                "{text}: {g} vs {n}"
            );
        }
    }

    #[test]
    fn sample_lines_round_trip() {
        let s = Sample {
            config: cfg(),
            label: -0.1234567890123,
        };
        assert_eq!(Sample::from_line(&s.to_line(), 3).unwrap(), s);
    }

    #[test]
    fn dataset_shape() {
        let d = synthetic_dataset(3, 2, 1, 4, 5).unwrap();
        assert_eq!((d.train.len(), d.test.len()), (2, 1));
        assert_eq!(d.train[0].config.len(), 20);
        assert_eq!(d.train[0].config.of_color(4).count(), 4);
        assert!(synthetic_dataset(3, 0, 0, 4, 5).unwrap().train.is_empty());
    }
}

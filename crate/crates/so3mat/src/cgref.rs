//! Covariants built by iterated Clebsch-Gordan products: the reference construction
//! the matrix products are checked against.

use crate::error::{Error, Result};
use crate::moments::{embedding, iota_scale};
use crate::so3::cg::{contract_block, CgTable};
use crate::so3::{cg_product, check_triangle, IrrepVec};

/// Channels over ℋ^(0) ⊕ ... ⊕ ℋ^(lmax), each stored flat at offset l².
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRow {
    lmax: usize,
    channels: Vec<Vec<f64>>,
}

impl ChannelRow {
    pub fn new(lmax: usize, channels: Vec<Vec<f64>>) -> Result<Self> {
        let w = (lmax + 1) * (lmax + 1);
        if let Some(c) = channels.iter().find(|c| c.len() != w) {
            return Err(Error::ShapeMismatch(format!(
                "channel has {} entries, expected {w}",
                c.len()
            )));
        }
        Ok(Self { lmax, channels })
    }

    pub fn zeros(lmax: usize, n_channels: usize) -> Self {
        Self {
            lmax,
            channels: vec![vec![0.0; (lmax + 1) * (lmax + 1)]; n_channels],
        }
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn part(&self, c: usize, l: usize) -> &[f64] {
        &self.channels[c][l * l..(l + 1) * (l + 1)]
    }
}

/// Per-channel path weights w[c][l1][l2][l3]; entries off the triangle are ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct PathWeights {
    lmax: usize,
    data: Vec<f64>,
}

impl PathWeights {
    pub fn constant(lmax: usize, n_channels: usize, value: f64) -> Self {
        Self {
            lmax,
            data: vec![value; n_channels * (lmax + 1).pow(3)],
        }
    }

    pub fn from_fn(
        lmax: usize,
        n_channels: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Self {
        let n = lmax + 1;
        let mut data = Vec::with_capacity(n_channels * n * n * n);
        for c in 0..n_channels {
            for l1 in 0..n {
                for l2 in 0..n {
                    for l3 in 0..n {
                        data.push(f(c, l1, l2, l3));
                    }
                }
            }
        }
        Self { lmax, data }
    }

    pub fn n_channels(&self) -> usize {
        self.data.len() / (self.lmax + 1).pow(3)
    }

    pub fn get(&self, c: usize, l1: usize, l2: usize, l3: usize) -> f64 {
        let n = self.lmax + 1;
        self.data[((c * n + l1) * n + l2) * n + l3]
    }
}

/// Channel-wise products: out[c]_{l3} = Σ_{l1,l2} w[c][l1][l2][l3] CG(row[c]_{l1}, fund[c]_{l2})_{l3}.
/// Dense blocks, so each channel costs Θ(lmax⁶).
pub fn cg_layer(
    row: &ChannelRow,
    fundamentals: &ChannelRow,
    weights: &PathWeights,
    table: &CgTable,
) -> Result<ChannelRow> {
    let lmax = row.lmax;
    if fundamentals.lmax != lmax || weights.lmax != lmax || table.lmax() < lmax {
        return Err(Error::ShapeMismatch(
            "row, fundamentals, weights and table must share lmax".into(),
        ));
    }
    let nc = row.n_channels();
    if fundamentals.n_channels() != nc || weights.n_channels() != nc {
        return Err(Error::ShapeMismatch(format!(
            "channel counts differ: row {nc}, fundamentals {}, weights {}",
            fundamentals.n_channels(),
            weights.n_channels()
        )));
    }
    let mut out = ChannelRow::zeros(lmax, nc);
    let mut buf = vec![0.0; 2 * lmax + 1];
    for c in 0..nc {
        for l1 in 0..=lmax {
            for l2 in 0..=lmax {
                for l3 in l1.abs_diff(l2)..=(l1 + l2).min(lmax) {
                    let w = weights.get(c, l1, l2, l3);
                    if w == 0.0 {
                        continue;
                    }
                    let block = table
                        .block(l1, l2, l3)
                        .expect("admissible triple within table");
                    let z = &mut buf[..2 * l3 + 1];
                    contract_block(block, row.part(c, l1), fundamentals.part(c, l2), z);
                    for (o, v) in out.channels[c][l3 * l3..(l3 + 1) * (l3 + 1)]
                        .iter_mut()
                        .zip(z.iter())
                    {
                        *o += w * v;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// One covariant of the stack with its construction path: fundamentals
/// `factors[0], factors[1], ...` coupled through intermediate `degrees`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovariantEntry {
    pub value: IrrepVec,
    pub factors: Vec<usize>,
    pub degrees: Vec<usize>,
}

/// Row d (0-based) holds every CG product of a row-(d-1) entry with a row-0 entry.
#[derive(Clone, Debug)]
pub struct CovariantStack {
    pub rows: Vec<Vec<CovariantEntry>>,
}

impl CovariantStack {
    pub fn build(
        fundamentals: &[IrrepVec],
        max_rows: usize,
        lmax: usize,
        table: &CgTable,
    ) -> Result<Self> {
        if max_rows == 0 {
            return Err(Error::EmptyChain);
        }
        let first: Vec<CovariantEntry> = fundamentals
            .iter()
            .enumerate()
            .map(|(i, f)| CovariantEntry {
                value: f.clone(),
                factors: vec![i],
                degrees: vec![f.degree()],
            })
            .collect();
        let mut rows = vec![first];
        for _ in 1..max_rows {
            let prev = rows.last().expect("at least one row");
            let mut next = Vec::new();
            for e in prev {
                for (i, f) in fundamentals.iter().enumerate() {
                    let (l1, l2) = (e.value.degree(), f.degree());
                    for l3 in l1.abs_diff(l2)..=(l1 + l2).min(lmax) {
                        let mut factors = e.factors.clone();
                        factors.push(i);
                        let mut degrees = e.degrees.clone();
                        degrees.push(l3);
                        next.push(CovariantEntry {
                            value: cg_product(&e.value, f, l3, table)?,
                            factors,
                            degrees,
                        });
                    }
                }
            }
            rows.push(next);
        }
        Ok(Self { rows })
    }

    /// Entries of row d and degree l.
    pub fn of_degree(&self, d: usize, l: usize) -> impl Iterator<Item = &CovariantEntry> {
        self.rows[d].iter().filter(move |e| e.value.degree() == l)
    }
}

/// s with ι_{a,b,l}(f)·v = s · CG(v, f)_b for v ∈ ℋ^(a), f ∈ ℋ^(l).
pub fn chain_schur_factor(a: usize, b: usize, l: usize, table: &CgTable) -> Result<f64> {
    check_triangle(a, b, l)?;
    let e = embedding(a, b, l)?;
    // unit coordinate probes; the first nonzero CG response fixes s
    let mut best = (0.0, 0.0);
    for ja in 0..2 * a + 1 {
        for jl in 0..2 * l + 1 {
            let mut v = vec![0.0; 2 * a + 1];
            v[ja] = 1.0;
            let mut f = vec![0.0; 2 * l + 1];
            f[jl] = 1.0;
            let m = e.apply(&f);
            let lhs: Vec<f64> = (0..2 * b + 1).map(|r| m[(r, ja)]).collect();
            let cg = cg_product(&IrrepVec::new(a, v)?, &IrrepVec::new(l, f)?, b, table)?;
            let n2 = cg.norm().powi(2);
            if n2 > best.1 {
                best = (
                    lhs.iter().zip(cg.coeffs()).map(|(x, y)| x * y).sum::<f64>() / n2,
                    n2,
                );
            }
        }
    }
    Ok(best.0)
}

/// s with the degree-l3 part of ι_{b,c,l2}(y)·ι_{a,b,l1}(x) equal to
/// s · ι_{a,c,l3}(CG(x, y)_{l3}).
pub fn product_schur_factor(
    a: usize,
    b: usize,
    c: usize,
    l1: usize,
    l2: usize,
    l3: usize,
    table: &CgTable,
) -> Result<f64> {
    check_triangle(a, b, l1)?;
    check_triangle(b, c, l2)?;
    check_triangle(a, c, l3)?;
    check_triangle(l1, l2, l3)?;
    let (e1, e2, e3) = (
        embedding(a, b, l1)?,
        embedding(b, c, l2)?,
        embedding(a, c, l3)?,
    );
    let norm2 = if a == 0 || c == 0 {
        1.0
    } else {
        iota_scale(a, c, l3).powi(2)
    };
    let mut best = (0.0, 0.0);
    for j1 in 0..2 * l1 + 1 {
        for j2 in 0..2 * l2 + 1 {
            let mut x = vec![0.0; 2 * l1 + 1];
            x[j1] = 1.0;
            let mut y = vec![0.0; 2 * l2 + 1];
            y[j2] = 1.0;
            let p = e2.apply(&y) * e1.apply(&x);
            let z: Vec<f64> = (0..2 * l3 + 1)
                .map(|j| {
                    let mut u = vec![0.0; 2 * l3 + 1];
                    u[j] = 1.0;
                    e3.apply(&u).dot(&p) / norm2
                })
                .collect();
            let cg = cg_product(&IrrepVec::new(l1, x)?, &IrrepVec::new(l2, y)?, l3, table)?;
            let n2 = cg.norm().powi(2);
            if n2 > best.1 {
                best = (
                    z.iter().zip(cg.coeffs()).map(|(u, v)| u * v).sum::<f64>() / n2,
                    n2,
                );
            }
        }
    }
    Ok(best.0)
}

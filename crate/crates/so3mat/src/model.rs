//! Parameterized invariant: learnable linear combinations of fundamental features
//! fill column vectors and block matrices; chains of matrix-vector products are
//! paired with a second set of vectors, and a linear readout combines the results.
//!
//! Every prefix of every chain contributes invariants. Optional block traces of the
//! prefix products add the trace invariants of the same products.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::ColoredConfig;
use crate::error::{Error, Result};
use crate::features::{fundamental_features, fundamental_features_with_grad, FundamentalFeatures};
use crate::moments::{embedding, BlockLayout};
use crate::radial::RadialSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelHyper {
    pub n_colors: usize,
    pub radial: RadialSpec,
    pub layout: BlockLayout,
    /// Columns per vector bundle; 0 disables the vector pairings.
    pub n_vec: usize,
    /// Matrix factors per chain, one entry per chain.
    pub body_orders: Vec<usize>,
    pub shift_by_id: bool,
    pub traces: bool,
    /// Distinct sets of additive constants (one per element of a central atom).
    pub n_elements: usize,
}

impl ModelHyper {
    pub fn lmax(&self) -> usize {
        2 * self.layout.max_degree()
    }

    fn n_fund(&self) -> usize {
        self.n_colors * self.radial.channels()
    }

    fn n_pieces(&self) -> usize {
        self.layout.n_pieces()
    }

    /// Degrees l = |a-b|..=a+b available to block (p, q).
    fn block_degrees(&self, p: usize, q: usize) -> std::ops::RangeInclusive<usize> {
        let (b, a) = (self.layout.piece_degree(p), self.layout.piece_degree(q));
        a.abs_diff(b)..=a + b
    }

    fn traces_per_product(&self) -> usize {
        self.layout.degrees().len() * self.layout.mult() * self.layout.mult()
    }

    /// Invariants per chain: (b+1) prefixes × pieces × n_vec² pairings, plus b trace sets.
    pub fn n_invariants(&self) -> usize {
        self.body_orders
            .iter()
            .map(|b| {
                let pairs = (b + 1) * self.n_pieces() * self.n_vec * self.n_vec;
                let tr = if self.traces {
                    b * self.traces_per_product()
                } else {
                    0
                };
                pairs + tr
            })
            .sum()
    }

    /// Number of matrix factors behind each invariant, in readout order.
    pub fn invariant_orders(&self) -> Vec<usize> {
        let pairs = self.n_pieces() * self.n_vec * self.n_vec;
        let tr = if self.traces {
            self.traces_per_product()
        } else {
            0
        };
        let mut out = Vec::with_capacity(self.n_invariants());
        for &b in &self.body_orders {
            out.extend(std::iter::repeat_n(0, pairs));
            for j in 1..=b {
                out.extend(std::iter::repeat_n(j, pairs + tr));
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.body_orders.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one chain is required".into(),
            ));
        }
        if self.n_colors == 0 || self.radial.channels() == 0 || self.n_elements == 0 {
            return Err(Error::InvalidArgument(
                "colors, radial channels and elements must be positive".into(),
            ));
        }
        if self.n_invariants() == 0 {
            return Err(Error::InvalidArgument(
                "model produces no invariants".into(),
            ));
        }
        Ok(())
    }
}

/// Weight offsets of one chain inside the flat parameter arrays.
#[derive(Clone, Debug, PartialEq)]
struct ChainIndex {
    vec_w: usize,
    mat_w: usize,
    vec_c: usize,
    mat_c: usize,
    /// Start of each factor's weights relative to `mat_w`, and per-block offsets.
    block_w: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantModel {
    pub hyper: ModelHyper,
    /// [chain][side V/U][column][piece][fundamental channel]
    pub vec_w: Vec<f64>,
    /// [chain][factor][p][q][l][fundamental channel]
    pub mat_w: Vec<f64>,
    /// [element][chain][side][column][piece], used on degree-0 pieces.
    pub vec_c: Vec<f64>,
    /// [element][chain][factor][p][q], times Id on equal-degree blocks.
    pub mat_c: Vec<f64>,
    pub readout: Vec<f64>,
    index: Vec<ChainIndex>,
    block_len: usize,
}

/// Scales of the random initialization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitFactors {
    pub vec: f64,
    pub mat: f64,
    pub fin: f64,
}

impl Default for InitFactors {
    fn default() -> Self {
        Self {
            vec: 1.0,
            mat: 0.5,
            fin: 1.0,
        }
    }
}

impl InvariantModel {
    pub fn zeros(hyper: ModelHyper) -> Result<Self> {
        hyper.validate()?;
        let (nf, np, nv) = (hyper.n_fund(), hyper.n_pieces(), hyper.n_vec);
        // weights per block (p, q), over all its degrees
        let mut block_offsets = Vec::with_capacity(np * np);
        let mut block_len = 0;
        for p in 0..np {
            for q in 0..np {
                block_offsets.push(block_len);
                block_len += hyper.block_degrees(p, q).count() * nf;
            }
        }
        let mut index = Vec::new();
        let (mut vw, mut mw, mut vc, mut mc) = (0, 0, 0, 0);
        for &b in &hyper.body_orders {
            index.push(ChainIndex {
                vec_w: vw,
                mat_w: mw,
                vec_c: vc,
                mat_c: mc,
                block_w: block_offsets.clone(),
            });
            vw += 2 * nv * np * nf;
            mw += b * block_len;
            vc += 2 * nv * np;
            mc += b * np * np;
        }
        let ne = hyper.n_elements;
        Ok(Self {
            readout: vec![0.0; hyper.n_invariants()],
            vec_w: vec![0.0; vw],
            mat_w: vec![0.0; mw],
            vec_c: vec![0.0; ne * vc],
            mat_c: vec![0.0; ne * mc],
            hyper,
            index,
            block_len,
        })
    }

    fn vec_c_len(&self) -> usize {
        self.vec_c.len() / self.hyper.n_elements
    }

    fn mat_c_len(&self) -> usize {
        self.mat_c.len() / self.hyper.n_elements
    }

    /// Learnable weights as one flat view, readout last.
    pub fn n_params(&self) -> usize {
        self.vec_w.len()
            + self.mat_w.len()
            + self.vec_c.len()
            + self.mat_c.len()
            + self.readout.len()
    }

    /// K × n_vec bundle `side` (0 = V, 1 = U) of chain `i`. Constants only enter the value.
    fn vectors(
        &self,
        i: usize,
        side: usize,
        f: &FundamentalFeatures,
        element: Option<usize>,
    ) -> DMatrix<f64> {
        let h = &self.hyper;
        let (nf, np, nv) = (h.n_fund(), h.n_pieces(), h.n_vec);
        let nch = h.radial.channels();
        let mut out = DMatrix::zeros(h.layout.side(), nv);
        let ci = &self.index[i];
        for v in 0..nv {
            for p in 0..np {
                let l = h.layout.piece_degree(p);
                let off = h.layout.piece_offset(p);
                let w = &self.vec_w[ci.vec_w + ((side * nv + v) * np + p) * nf..][..nf];
                for (ch, wc) in w.iter().enumerate() {
                    if *wc == 0.0 {
                        continue;
                    }
                    for (j, x) in f.get(ch / nch, ch % nch, l).iter().enumerate() {
                        out[(off + j, v)] += wc * x;
                    }
                }
                if let (Some(e), 0) = (element, l) {
                    out[(off, v)] +=
                        self.vec_c[e * self.vec_c_len() + ci.vec_c + (side * nv + v) * np + p];
                }
            }
        }
        out
    }

    /// Factor `j` of chain `i` (without the identity shift).
    fn matrix(
        &self,
        i: usize,
        j: usize,
        f: &FundamentalFeatures,
        element: Option<usize>,
    ) -> DMatrix<f64> {
        let h = &self.hyper;
        let (nf, np) = (h.n_fund(), h.n_pieces());
        let nch = h.radial.channels();
        let k = h.layout.side();
        let mut out = DMatrix::zeros(k, k);
        let ci = &self.index[i];
        let base = ci.mat_w + j * self.block_len;
        let mut comb = vec![0.0; 2 * h.lmax() + 1];
        for p in 0..np {
            let b = h.layout.piece_degree(p);
            for q in 0..np {
                let a = h.layout.piece_degree(q);
                let mut w_off = base + ci.block_w[p * np + q];
                for l in h.block_degrees(p, q) {
                    let w = &self.mat_w[w_off..w_off + nf];
                    w_off += nf;
                    let c = &mut comb[..2 * l + 1];
                    c.iter_mut().for_each(|x| *x = 0.0);
                    let mut any = false;
                    for (ch, wc) in w.iter().enumerate() {
                        if *wc == 0.0 {
                            continue;
                        }
                        any = true;
                        for (cj, x) in c.iter_mut().zip(f.get(ch / nch, ch % nch, l)) {
                            *cj += wc * x;
                        }
                    }
                    if any {
                        embedding(a, b, l)
                            .expect("layout degrees satisfy the triangle")
                            .add_into(
                                c,
                                1.0,
                                &mut out,
                                h.layout.piece_offset(p),
                                h.layout.piece_offset(q),
                            );
                    }
                }
                if let Some(e) = element {
                    if a == b {
                        let cst =
                            self.mat_c[e * self.mat_c_len() + ci.mat_c + (j * np + p) * np + q];
                        let (r0, c0) = (h.layout.piece_offset(p), h.layout.piece_offset(q));
                        for t in 0..2 * a + 1 {
                            out[(r0 + t, c0 + t)] += cst;
                        }
                    }
                }
            }
        }
        out
    }

    fn pairings(&self, w: &DMatrix<f64>, u: &DMatrix<f64>, out: &mut Vec<f64>) {
        let h = &self.hyper;
        for p in 0..h.n_pieces() {
            let off = h.layout.piece_offset(p);
            let n = 2 * h.layout.piece_degree(p) + 1;
            for v in 0..h.n_vec {
                for s in 0..h.n_vec {
                    out.push((0..n).map(|t| w[(off + t, v)] * u[(off + t, s)]).sum());
                }
            }
        }
    }

    fn traces(&self, m: &DMatrix<f64>, out: &mut Vec<f64>) {
        let l = &self.hyper.layout;
        for (p, q) in l.square_blocks() {
            let (r, c) = (l.piece_offset(p), l.piece_offset(q));
            out.push(
                (0..2 * l.piece_degree(p) + 1)
                    .map(|t| m[(r + t, c + t)])
                    .sum(),
            );
        }
    }

    fn check_element(&self, element: usize) -> Result<()> {
        if element >= self.hyper.n_elements {
            return Err(Error::InvalidArgument(format!(
                "element {element} outside 0..{}",
                self.hyper.n_elements
            )));
        }
        Ok(())
    }

    /// All invariants of a configuration, in readout order.
    pub fn invariants(&self, config: &ColoredConfig, element: usize) -> Result<Vec<f64>> {
        self.check_element(element)?;
        self.check_colors(config)?;
        let f = fundamental_features(config, self.hyper.lmax(), &self.hyper.radial);
        Ok(self.invariants_from_features(&f, element))
    }

    fn check_colors(&self, config: &ColoredConfig) -> Result<()> {
        if config.n_colors() != self.hyper.n_colors {
            return Err(Error::ShapeMismatch(format!(
                "config has {} colors, model {}",
                config.n_colors(),
                self.hyper.n_colors
            )));
        }
        Ok(())
    }

    pub fn invariants_from_features(&self, f: &FundamentalFeatures, element: usize) -> Vec<f64> {
        let h = &self.hyper;
        let k = h.layout.side();
        let mut out = Vec::with_capacity(h.n_invariants());
        for (i, &b) in h.body_orders.iter().enumerate() {
            let v = self.vectors(i, 0, f, Some(element));
            let u = self.vectors(i, 1, f, Some(element));
            let mut w = v.clone();
            let mut prod: Option<DMatrix<f64>> = None;
            self.pairings(&v, &u, &mut out);
            for j in 0..b {
                let mut m = self.matrix(i, j, f, Some(element));
                if h.shift_by_id {
                    m += DMatrix::<f64>::identity(k, k);
                }
                w = &m * &w;
                if h.n_vec > 0 {
                    let shifted = if h.shift_by_id { &w - &v } else { w.clone() };
                    self.pairings(&shifted, &u, &mut out);
                }
                if h.traces {
                    let p = match prod.take() {
                        None => m,
                        Some(p) => &m * p,
                    };
                    let t = if h.shift_by_id {
                        &p - DMatrix::<f64>::identity(k, k)
                    } else {
                        p.clone()
                    };
                    self.traces(&t, &mut out);
                    prod = Some(p);
                }
            }
        }
        out
    }

    /// Invariants and their derivatives: `grad[m][3 i + axis]`.
    pub fn invariants_with_grad(
        &self,
        config: &ColoredConfig,
        element: usize,
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        self.check_element(element)?;
        self.check_colors(config)?;
        let (f, tangents) =
            fundamental_features_with_grad(config, self.hyper.lmax(), &self.hyper.radial)?;
        Ok(self.invariants_with_tangents(&f, &tangents, element))
    }

    /// Forward accumulation: every intermediate carries its value and one tangent per
    /// feature tangent.
    pub fn invariants_with_tangents(
        &self,
        f: &FundamentalFeatures,
        tangents: &[FundamentalFeatures],
        element: usize,
    ) -> (Vec<f64>, Vec<Vec<f64>>) {
        let h = &self.hyper;
        let k = h.layout.side();
        let nt = tangents.len();
        let mut val = Vec::with_capacity(h.n_invariants());
        let mut grad: Vec<Vec<f64>> = Vec::with_capacity(h.n_invariants());
        let id = DMatrix::<f64>::identity(k, k);
        let push_pairs = |w: &DMatrix<f64>,
                          dw: &[DMatrix<f64>],
                          u: &DMatrix<f64>,
                          du: &[DMatrix<f64>],
                          val: &mut Vec<f64>,
                          grad: &mut Vec<Vec<f64>>| {
            let start = val.len();
            self.pairings(w, u, val);
            let n = val.len() - start;
            let mut g = vec![vec![0.0; nt]; n];
            let mut buf = Vec::with_capacity(n);
            for t in 0..nt {
                buf.clear();
                self.pairings(&dw[t], u, &mut buf);
                for (gi, x) in g.iter_mut().zip(&buf) {
                    gi[t] += x;
                }
                buf.clear();
                self.pairings(w, &du[t], &mut buf);
                for (gi, x) in g.iter_mut().zip(&buf) {
                    gi[t] += x;
                }
            }
            grad.extend(g);
        };
        for (i, &b) in h.body_orders.iter().enumerate() {
            let v = self.vectors(i, 0, f, Some(element));
            let u = self.vectors(i, 1, f, Some(element));
            let dv: Vec<DMatrix<f64>> = tangents
                .iter()
                .map(|t| self.vectors(i, 0, t, None))
                .collect();
            let du: Vec<DMatrix<f64>> = tangents
                .iter()
                .map(|t| self.vectors(i, 1, t, None))
                .collect();
            push_pairs(&v, &dv, &u, &du, &mut val, &mut grad);
            let (mut w, mut dw) = (v.clone(), dv.clone());
            let mut prod: Option<(DMatrix<f64>, Vec<DMatrix<f64>>)> = None;
            for j in 0..b {
                let mut m = self.matrix(i, j, f, Some(element));
                if h.shift_by_id {
                    m += &id;
                }
                let dm: Vec<DMatrix<f64>> = tangents
                    .iter()
                    .map(|t| self.matrix(i, j, t, None))
                    .collect();
                dw = dw
                    .iter()
                    .zip(&dm)
                    .map(|(dwt, dmt)| dmt * &w + &m * dwt)
                    .collect();
                w = &m * &w;
                if h.n_vec > 0 {
                    let (sw, sdw) = if h.shift_by_id {
                        (&w - &v, dw.iter().zip(&dv).map(|(a, b)| a - b).collect())
                    } else {
                        (w.clone(), dw.clone())
                    };
                    push_pairs(&sw, &sdw, &u, &du, &mut val, &mut grad);
                }
                if h.traces {
                    let (p, dp) = match prod.take() {
                        None => (m.clone(), dm),
                        Some((p, dp)) => {
                            let ndp = dp
                                .iter()
                                .zip(&dm)
                                .map(|(dpt, dmt)| dmt * &p + &m * dpt)
                                .collect();
                            (&m * &p, ndp)
                        }
                    };
                    let t = if h.shift_by_id { &p - &id } else { p.clone() };
                    let start = val.len();
                    self.traces(&t, &mut val);
                    let n = val.len() - start;
                    let mut g = vec![vec![0.0; nt]; n];
                    let mut buf = Vec::with_capacity(n);
                    for (ti, d) in dp.iter().enumerate() {
                        buf.clear();
                        self.traces(d, &mut buf);
                        for (gi, x) in g.iter_mut().zip(&buf) {
                            gi[ti] = *x;
                        }
                    }
                    grad.extend(g);
                    prod = Some((p, dp));
                }
            }
        }
        (val, grad)
    }
}

impl InvariantModel {
    /// All learnable parameters in the order vec_w, mat_w, vec_c, mat_c, readout.
    pub fn params(&self) -> Vec<f64> {
        [
            &self.vec_w,
            &self.mat_w,
            &self.vec_c,
            &self.mat_c,
            &self.readout,
        ]
        .iter()
        .flat_map(|v| v.iter().copied())
        .collect()
    }

    /// Lengths of the five parameter groups, in `params` order.
    pub fn param_shape(&self) -> [usize; 5] {
        [
            self.vec_w.len(),
            self.mat_w.len(),
            self.vec_c.len(),
            self.mat_c.len(),
            self.readout.len(),
        ]
    }

    /// self += alpha · g over the flat parameter vector.
    pub fn add_scaled(&mut self, alpha: f64, g: &[f64]) -> Result<()> {
        if g.len() != self.n_params() {
            return Err(Error::ShapeMismatch(format!(
                "{} gradient entries for {} parameters",
                g.len(),
                self.n_params()
            )));
        }
        let mut it = g.iter();
        for v in [
            &mut self.vec_w,
            &mut self.mat_w,
            &mut self.vec_c,
            &mut self.mat_c,
            &mut self.readout,
        ] {
            for (x, d) in v.iter_mut().zip(&mut it) {
                *x += alpha * d;
            }
        }
        Ok(())
    }

    /// Readout output and its gradient with respect to every parameter (in `params`
    /// order), by reverse accumulation through the chain products. Only trace
    /// readouts are supported (`n_vec == 0`).
    pub fn output_with_param_grad(
        &self,
        f: &FundamentalFeatures,
        element: usize,
    ) -> Result<(f64, Vec<f64>)> {
        let h = &self.hyper;
        if h.n_vec != 0 || !h.traces {
            return Err(Error::InvalidArgument(
                "parameter gradients need a trace-only model".into(),
            ));
        }
        self.check_element(element)?;
        let k = h.layout.side();
        let (nf, np) = (h.n_fund(), h.n_pieces());
        let nch = h.radial.channels();
        let id = DMatrix::<f64>::identity(k, k);
        let [_, n_mw, _, _, _] = self.param_shape();
        let mut g_mw = vec![0.0; n_mw];
        let mut g_mc = vec![0.0; self.mat_c.len()];
        let mut g_r = Vec::with_capacity(self.readout.len());
        let mut out = 0.0;
        let blocks = h.layout.square_blocks();
        let mut r_off = 0;
        for (i, &b) in h.body_orders.iter().enumerate() {
            let ci = &self.index[i];
            let ms: Vec<DMatrix<f64>> = (0..b)
                .map(|j| {
                    let m = self.matrix(i, j, f, Some(element));
                    if h.shift_by_id {
                        m + &id
                    } else {
                        m
                    }
                })
                .collect();
            let mut prods: Vec<DMatrix<f64>> = Vec::with_capacity(b);
            for (j, m) in ms.iter().enumerate() {
                let p = if j == 0 { m.clone() } else { m * &prods[j - 1] };
                let t = if h.shift_by_id { &p - &id } else { p.clone() };
                let start = g_r.len();
                self.traces(&t, &mut g_r);
                out += g_r[start..]
                    .iter()
                    .zip(&self.readout[r_off + j * blocks.len()..])
                    .map(|(a, w)| a * w)
                    .sum::<f64>();
                prods.push(p);
            }
            // seed: d out / d P_j is the readout spread over the block diagonals
            let seed = |j: usize| {
                let mut d = DMatrix::<f64>::zeros(k, k);
                for (s, &(p, q)) in blocks.iter().enumerate() {
                    let w = self.readout[r_off + j * blocks.len() + s];
                    let (r0, c0) = (h.layout.piece_offset(p), h.layout.piece_offset(q));
                    for t in 0..2 * h.layout.piece_degree(p) + 1 {
                        d[(r0 + t, c0 + t)] += w;
                    }
                }
                d
            };
            let mut g: Option<DMatrix<f64>> = None;
            let mut adj = vec![0.0; 2 * h.lmax() + 1];
            for j in (0..b).rev() {
                let gj = match g.take() {
                    None => seed(j),
                    Some(gn) => seed(j) + ms[j + 1].transpose() * gn,
                };
                let dm = if j == 0 {
                    gj.clone()
                } else {
                    &gj * prods[j - 1].transpose()
                };
                let base = ci.mat_w + j * self.block_len;
                for p in 0..np {
                    let bd = h.layout.piece_degree(p);
                    for q in 0..np {
                        let a = h.layout.piece_degree(q);
                        let (r0, c0) = (h.layout.piece_offset(p), h.layout.piece_offset(q));
                        let mut w_off = base + ci.block_w[p * np + q];
                        for l in h.block_degrees(p, q) {
                            let e =
                                embedding(a, bd, l).expect("layout degrees satisfy the triangle");
                            let adj = &mut adj[..2 * l + 1];
                            e.adjoint(&dm, r0, c0, adj);
                            for ch in 0..nf {
                                g_mw[w_off + ch] += adj
                                    .iter()
                                    .zip(f.get(ch / nch, ch % nch, l))
                                    .map(|(x, y)| x * y)
                                    .sum::<f64>();
                            }
                            w_off += nf;
                        }
                        if a == bd {
                            let idx = element * self.mat_c_len() + ci.mat_c + (j * np + p) * np + q;
                            g_mc[idx] += (0..2 * a + 1).map(|t| dm[(r0 + t, c0 + t)]).sum::<f64>();
                        }
                    }
                }
                g = Some(gj);
            }
            r_off += b * blocks.len();
        }
        let mut grad = vec![0.0; self.vec_w.len()];
        grad.extend(g_mw);
        grad.extend(std::iter::repeat_n(0.0, self.vec_c.len()));
        grad.extend(g_mc);
        grad.extend(g_r);
        Ok((out, grad))
    }
}

/// Seeded random parameters. Matrix weights are scaled by `factors.mat`, readout by
/// `factors.fin`; all weights are divided by the square root of their fan-in.
pub fn param_init(hyper: ModelHyper, seed: u64, factors: InitFactors) -> Result<InvariantModel> {
    let mut m = InvariantModel::zeros(hyper)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nf = m.hyper.n_fund() as f64;
    let np = m.hyper.n_pieces() as f64;
    let mut fill = |xs: &mut [f64], scale: f64| {
        for x in xs.iter_mut() {
            *x = scale * rng.sample::<f64, _>(StandardNormal);
        }
    };
    fill(&mut m.vec_w, factors.vec / nf.sqrt());
    fill(&mut m.mat_w, factors.mat / (nf * np).sqrt());
    fill(&mut m.vec_c, factors.vec);
    fill(&mut m.mat_c, factors.mat / np.sqrt());
    let nr = m.readout.len() as f64;
    fill(&mut m.readout, factors.fin / nr.sqrt());
    Ok(m)
}

pub fn algorithm1_forward(model: &InvariantModel, config: &ColoredConfig) -> Result<f64> {
    let inv = model.invariants(config, 0)?;
    Ok(inv.iter().zip(&model.readout).map(|(a, b)| a * b).sum())
}

/// Value and ∂f/∂r_i for every point.
pub fn algorithm1_gradient(
    model: &InvariantModel,
    config: &ColoredConfig,
) -> Result<(f64, Vec<[f64; 3]>)> {
    let (inv, grad) = model.invariants_with_grad(config, 0)?;
    let f = inv.iter().zip(&model.readout).map(|(a, b)| a * b).sum();
    let mut g = vec![[0.0; 3]; config.len()];
    for (gm, w) in grad.iter().zip(&model.readout) {
        for (t, d) in gm.iter().enumerate() {
            g[t / 3][t % 3] += w * d;
        }
    }
    Ok((f, g))
}

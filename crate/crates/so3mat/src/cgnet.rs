//! Single-channel Clebsch-Gordan network over ⊕_{l <= lmax} ℋ^(l):
//!
//! x_f = Σ_γ w[f][γ][l] F_{γ,l},  h_0 = x_0,
//! h_f = Σ_{(l1,l2,l3)} u[f][l1,l2,l3] CG(h_{f-1,l1}, x_{f,l2})_{l3},
//! output = Σ_f r[f] h_{f,0}.
//!
//! With u set to the product Schur factors this is the trace chain of a matmul model
//! with a single block degree, so both paths start from the same function.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::features::FundamentalFeatures;
use crate::model::InvariantModel;
use crate::moments::embedding;
use crate::so3::cg::{build_cg_table, real_cg_sparse};

/// Nonzero coefficients of every admissible triple, on flat (l² + j) indices.
#[derive(Debug)]
struct SparseCg {
    /// entries[ranges[t]..ranges[t + 1]] belong to triple t.
    ranges: Vec<usize>,
    entries: Vec<(u16, u16, u16, f64)>,
    triples: Vec<(usize, usize, usize)>,
}

impl SparseCg {
    fn new(lmax: usize) -> Self {
        let mut ranges = vec![0];
        let mut entries = Vec::new();
        let mut triples = Vec::new();
        for l1 in 0..=lmax {
            for l2 in 0..=lmax {
                for l3 in l1.abs_diff(l2)..=(l1 + l2).min(lmax) {
                    for (j3, j1, j2, c) in real_cg_sparse(l1, l2, l3) {
                        entries.push((
                            (l1 * l1) as u16 + j1 as u16,
                            (l2 * l2) as u16 + j2 as u16,
                            (l3 * l3) as u16 + j3 as u16,
                            c,
                        ));
                    }
                    ranges.push(entries.len());
                    triples.push((l1, l2, l3));
                }
            }
        }
        Self {
            ranges,
            entries,
            triples,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CgNet {
    n_colors: usize,
    lmax: usize,
    n_factors: usize,
    /// [factor][color][l]
    pub input_w: Vec<f64>,
    /// [factor - 1][triple]
    pub path_w: Vec<f64>,
    /// One weight per prefix, on its degree-0 component.
    pub readout: Vec<f64>,
    cg: Arc<SparseCg>,
}

impl CgNet {
    pub fn zeros(n_colors: usize, lmax: usize, n_factors: usize) -> Result<Self> {
        if n_colors == 0 || n_factors == 0 {
            return Err(Error::InvalidArgument(
                "need at least one color and one factor".into(),
            ));
        }
        let cg = Arc::new(SparseCg::new(lmax));
        Ok(Self {
            n_colors,
            lmax,
            n_factors,
            input_w: vec![0.0; n_factors * n_colors * (lmax + 1)],
            path_w: vec![0.0; (n_factors - 1) * cg.triples.len()],
            readout: vec![0.0; n_factors],
            cg,
        })
    }

    /// The network computing the same output as a single-chain trace model whose
    /// layout has one degree with multiplicity 1, one radial channel and no shift.
    pub fn from_matmul(model: &InvariantModel) -> Result<Self> {
        let h = &model.hyper;
        let degs = h.layout.degrees();
        if degs.len() != 1
            || h.layout.mult() != 1
            || h.body_orders.len() != 1
            || h.n_vec != 0
            || h.shift_by_id
            || !h.traces
            || h.radial.channels() != 1
        {
            return Err(Error::InvalidArgument(
                "model is not a single-block trace chain".into(),
            ));
        }
        if model.mat_c.iter().any(|c| *c != 0.0) {
            return Err(Error::InvalidArgument(
                "additive constants have no CG counterpart here".into(),
            ));
        }
        let a = degs[0];
        let lmax = 2 * a;
        let nf = h.body_orders[0];
        let mut net = Self::zeros(h.n_colors, lmax, nf)?;
        let nc = h.n_colors;
        let block_len = (lmax + 1) * nc;
        for f in 0..nf {
            for l in 0..=lmax {
                for g in 0..nc {
                    net.input_w[(f * nc + g) * (lmax + 1) + l] =
                        model.mat_w[f * block_len + l * nc + g];
                }
            }
        }
        let table = build_cg_table(lmax);
        let schur: Vec<f64> = net
            .cg
            .triples
            .iter()
            .map(|&(l1, l2, l3)| crate::cgref::product_schur_factor(a, a, a, l1, l2, l3, &table))
            .collect::<Result<_>>()?;
        for f in 1..nf {
            net.path_w[(f - 1) * schur.len()..f * schur.len()].copy_from_slice(&schur);
        }
        let tau: f64 = {
            let m = embedding(a, a, 0)?.apply(&[1.0]);
            m.trace()
        };
        for (r, w) in net.readout.iter_mut().zip(&model.readout) {
            *r = tau * w;
        }
        Ok(net)
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn n_triples(&self) -> usize {
        self.cg.triples.len()
    }

    pub fn n_params(&self) -> usize {
        self.input_w.len() + self.path_w.len() + self.readout.len()
    }

    /// Parameters in the order input_w, path_w, readout.
    pub fn params(&self) -> Vec<f64> {
        [&self.input_w, &self.path_w, &self.readout]
            .iter()
            .flat_map(|v| v.iter().copied())
            .collect()
    }

    pub fn param_shape(&self) -> [usize; 3] {
        [self.input_w.len(), self.path_w.len(), self.readout.len()]
    }

    pub fn add_scaled(&mut self, alpha: f64, g: &[f64]) -> Result<()> {
        if g.len() != self.n_params() {
            return Err(Error::ShapeMismatch(format!(
                "{} gradient entries for {} parameters",
                g.len(),
                self.n_params()
            )));
        }
        let mut it = g.iter();
        for v in [&mut self.input_w, &mut self.path_w, &mut self.readout] {
            for (x, d) in v.iter_mut().zip(&mut it) {
                *x += alpha * d;
            }
        }
        Ok(())
    }

    fn check(&self, f: &FundamentalFeatures) -> Result<()> {
        if f.n_colors() != self.n_colors || f.lmax() < self.lmax {
            return Err(Error::ShapeMismatch(format!(
                "features have {} colors up to degree {}, network needs {} up to {}",
                f.n_colors(),
                f.lmax(),
                self.n_colors,
                self.lmax
            )));
        }
        Ok(())
    }

    fn inputs(&self, f: &FundamentalFeatures) -> Vec<Vec<f64>> {
        let w = (self.lmax + 1) * (self.lmax + 1);
        (0..self.n_factors)
            .map(|fi| {
                let mut x = vec![0.0; w];
                for g in 0..self.n_colors {
                    for l in 0..=self.lmax {
                        let c = self.input_w[(fi * self.n_colors + g) * (self.lmax + 1) + l];
                        for (o, v) in x[l * l..(l + 1) * (l + 1)].iter_mut().zip(f.get(g, 0, l)) {
                            *o += c * v;
                        }
                    }
                }
                x
            })
            .collect()
    }

    fn layer(&self, f: usize, h: &[f64], x: &[f64]) -> Vec<f64> {
        let nt = self.cg.triples.len();
        let u = &self.path_w[(f - 1) * nt..f * nt];
        let mut out = vec![0.0; h.len()];
        for (t, ut) in u.iter().enumerate() {
            if *ut == 0.0 {
                continue;
            }
            for &(i1, i2, i3, c) in &self.cg.entries[self.cg.ranges[t]..self.cg.ranges[t + 1]] {
                out[i3 as usize] += ut * c * h[i1 as usize] * x[i2 as usize];
            }
        }
        out
    }

    pub fn output(&self, f: &FundamentalFeatures) -> Result<f64> {
        self.check(f)?;
        let xs = self.inputs(f);
        let mut h = xs[0].clone();
        let mut out = self.readout[0] * h[0];
        for fi in 1..self.n_factors {
            h = self.layer(fi, &h, &xs[fi]);
            out += self.readout[fi] * h[0];
        }
        Ok(out)
    }

    /// Output and its gradient with respect to every parameter, in `params` order.
    pub fn output_with_param_grad(&self, f: &FundamentalFeatures) -> Result<(f64, Vec<f64>)> {
        self.check(f)?;
        let xs = self.inputs(f);
        let mut hs = vec![xs[0].clone()];
        for fi in 1..self.n_factors {
            let next = self.layer(fi, &hs[fi - 1], &xs[fi]);
            hs.push(next);
        }
        let out = hs.iter().zip(&self.readout).map(|(h, r)| r * h[0]).sum();
        let nt = self.cg.triples.len();
        let mut g_u = vec![0.0; self.path_w.len()];
        let mut gxs = vec![vec![0.0; xs[0].len()]; self.n_factors];
        let mut gh = vec![0.0; xs[0].len()];
        for fi in (0..self.n_factors).rev() {
            gh[0] += self.readout[fi];
            if fi == 0 {
                for (gx, g) in gxs[0].iter_mut().zip(&gh) {
                    *gx += g;
                }
                break;
            }
            let (h, x) = (&hs[fi - 1], &xs[fi]);
            let u = &self.path_w[(fi - 1) * nt..fi * nt];
            let mut gprev = vec![0.0; h.len()];
            let gx = &mut gxs[fi];
            for (t, ut) in u.iter().enumerate() {
                let mut du = 0.0;
                for &(i1, i2, i3, c) in &self.cg.entries[self.cg.ranges[t]..self.cg.ranges[t + 1]] {
                    let (i1, i2, i3) = (i1 as usize, i2 as usize, i3 as usize);
                    let cg = c * gh[i3];
                    if cg == 0.0 {
                        continue;
                    }
                    du += cg * h[i1] * x[i2];
                    gprev[i1] += ut * cg * x[i2];
                    gx[i2] += ut * cg * h[i1];
                }
                g_u[(fi - 1) * nt + t] = du;
            }
            gh = gprev;
        }
        let mut grad = vec![0.0; self.input_w.len()];
        for (fi, gx) in gxs.iter().enumerate() {
            for g in 0..self.n_colors {
                for l in 0..=self.lmax {
                    grad[(fi * self.n_colors + g) * (self.lmax + 1) + l] = gx
                        [l * l..(l + 1) * (l + 1)]
                        .iter()
                        .zip(f.get(g, 0, l))
                        .map(|(a, b)| a * b)
                        .sum();
                }
            }
        }
        grad.extend(g_u);
        grad.extend(hs.iter().map(|h| h[0]));
        Ok((out, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ColoredConfig;
    use crate::features::fundamental_features;
    use crate::model::{param_init, InitFactors, ModelHyper};
    use crate::moments::BlockLayout;
    use crate::radial::RadialSpec;

    fn matmul_model(a: usize, factors: usize) -> InvariantModel {
        let hyper = ModelHyper {
            n_colors: 2,
            radial: RadialSpec::polynomial(1),
            layout: BlockLayout::new(vec![a], 1).unwrap(),
            n_vec: 0,
            body_orders: vec![factors],
            shift_by_id: false,
            traces: true,
            n_elements: 1,
        };
        let mut m = param_init(hyper, 11, InitFactors::default()).unwrap();
        m.mat_c.iter_mut().for_each(|c| *c = 0.0);
        m
    }

    fn features(lmax: usize) -> FundamentalFeatures {
        let c = ColoredConfig::new(
            2,
            vec![
                (0, [0.3, -0.5, 0.8]),
                (1, [-0.7, 0.2, 0.4]),
                (0, [0.1, 0.9, -0.3]),
                (1, [0.5, 0.5, 0.2]),
            ],
        )
        .unwrap();
        fundamental_features(&c, lmax, &RadialSpec::polynomial(1))
    }

    #[test]
    fn schur_initialized_net_matches_matmul_chain() {
        for a in [1, 2, 3] {
            let m = matmul_model(a, 4);
            let net = CgNet::from_matmul(&m).unwrap();
            let f = features(2 * a);
            let want: f64 = m
                .invariants_from_features(&f, 0)
                .iter()
                .zip(&m.readout)
                .map(|(x, w)| x * w)
                .sum();
            let got = net.output(&f).unwrap();
            assert!(
                (got - want).abs() < 1e-10 * (1.0 + want.abs()),
                "a = {a}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn param_grad_matches_finite_differences() {
        let m = matmul_model(2, 3);
        let net = CgNet::from_matmul(&m).unwrap();
        let f = features(4);
        let (out, g) = net.output_with_param_grad(&f).unwrap();
        assert!((out - net.output(&f).unwrap()).abs() < 1e-13);
        let h = 1e-6;
        for i in (0..net.n_params()).step_by(5) {
            let mut e = vec![0.0; net.n_params()];
            e[i] = h;
            let (mut p, mut q) = (net.clone(), net.clone());
            p.add_scaled(1.0, &e).unwrap();
            q.add_scaled(-1.0, &e).unwrap();
            let fd = (p.output(&f).unwrap() - q.output(&f).unwrap()) / (2.0 * h);
            assert!(
                (fd - g[i]).abs() <= 1e-6 * (1.0 + fd.abs()),
                "param {i}: {fd} vs {}",
                g[i]
            );
        }
    }
}

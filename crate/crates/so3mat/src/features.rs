//! Fundamental features Σ_{r∈S_γ} g_k(r) Y_l(r), one pass over the points.

use crate::config::ColoredConfig;
use crate::error::{Error, Result};
use crate::radial::{RadialKind, RadialSpec};
use crate::so3::harmonics::{harmonics_flat, harmonics_with_grad};
use crate::so3::IrrepVec;

/// Contributions of a single point: [channel][l² + j] for l <= lmax.
#[derive(Clone, Debug, PartialEq)]
pub struct PointChannels {
    width: usize,
    data: Vec<f64>,
}

impl PointChannels {
    fn zeros(channels: usize, lmax: usize) -> Self {
        let width = (lmax + 1) * (lmax + 1);
        Self {
            width,
            data: vec![0.0; channels * width],
        }
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        &self.data[k * self.width..(k + 1) * self.width]
    }

    fn channel_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.width..(k + 1) * self.width]
    }
}

fn norm(r: [f64; 3]) -> f64 {
    (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt()
}

pub fn point_channels(spec: &RadialSpec, r: [f64; 3], lmax: usize) -> PointChannels {
    let nch = spec.channels();
    let mut out = PointChannels::zeros(nch, lmax);
    match spec.kind {
        RadialKind::Polynomial => {
            let h = harmonics_flat(r, lmax);
            let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
            let mut w = 1.0;
            for k in 0..nch {
                for (o, v) in out.channel_mut(k).iter_mut().zip(&h) {
                    *o = w * v;
                }
                w *= r2;
            }
        }
        RadialKind::ExpChebyshev { .. } => {
            out.channel_mut(0)[0] = 1.0;
            let rho = norm(r);
            if rho == 0.0 {
                return out;
            }
            let h = harmonics_flat([r[0] / rho, r[1] / rho, r[2] / rho], lmax);
            for k in 1..nch {
                let g = spec.eval(k - 1, rho).0;
                for (o, v) in out.channel_mut(k).iter_mut().zip(&h) {
                    *o = g * v;
                }
            }
        }
    }
    out
}

/// Values and the three coordinate derivatives of a point's contributions.
pub fn point_channels_with_grad(
    spec: &RadialSpec,
    r: [f64; 3],
    lmax: usize,
) -> Option<(PointChannels, [PointChannels; 3])> {
    let nch = spec.channels();
    let mut val = PointChannels::zeros(nch, lmax);
    let mut grad = [
        PointChannels::zeros(nch, lmax),
        PointChannels::zeros(nch, lmax),
        PointChannels::zeros(nch, lmax),
    ];
    match spec.kind {
        RadialKind::Polynomial => {
            let h = harmonics_with_grad(r, lmax);
            let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
            for k in 0..nch {
                let w = r2.powi(k as i32);
                // ∇ r^{2k} = 2k r^{2k-2} r
                let dw = if k == 0 {
                    0.0
                } else {
                    2.0 * k as f64 * r2.powi(k as i32 - 1)
                };
                for (i, hv) in h.iter().enumerate() {
                    val.channel_mut(k)[i] = w * hv.v;
                    for ax in 0..3 {
                        grad[ax].channel_mut(k)[i] = w * hv.d[ax] + dw * r[ax] * hv.v;
                    }
                }
            }
        }
        RadialKind::ExpChebyshev { .. } => {
            let rho = norm(r);
            if rho == 0.0 {
                return None;
            }
            val.channel_mut(0)[0] = 1.0;
            let u = [r[0] / rho, r[1] / rho, r[2] / rho];
            let h = harmonics_with_grad(u, lmax);
            for k in 1..nch {
                let (g, dg) = spec.eval(k - 1, rho);
                for l in 0..=lmax {
                    for i in l * l..(l + 1) * (l + 1) {
                        let hv = h[i];
                        val.channel_mut(k)[i] = g * hv.v;
                        for ax in 0..3 {
                            // tangential part of ∇Y at the unit vector, by Euler's relation
                            let tang = (hv.d[ax] - l as f64 * hv.v * u[ax]) / rho;
                            grad[ax].channel_mut(k)[i] = dg * u[ax] * hv.v + g * tang;
                        }
                    }
                }
            }
        }
    }
    Some((val, grad))
}

/// Per-(color, channel, degree) sums, stored [color][channel][l² + j].
#[derive(Clone, Debug, PartialEq)]
pub struct FundamentalFeatures {
    n_colors: usize,
    n_channels: usize,
    lmax: usize,
    data: Vec<f64>,
}

impl FundamentalFeatures {
    pub fn zeros(n_colors: usize, n_channels: usize, lmax: usize) -> Self {
        let width = (lmax + 1) * (lmax + 1);
        Self {
            n_colors,
            n_channels,
            lmax,
            data: vec![0.0; n_colors * n_channels * width],
        }
    }

    pub fn n_colors(&self) -> usize {
        self.n_colors
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    fn width(&self) -> usize {
        (self.lmax + 1) * (self.lmax + 1)
    }

    pub fn get(&self, color: usize, channel: usize, l: usize) -> &[f64] {
        let base = (color * self.n_channels + channel) * self.width();
        &self.data[base + l * l..base + (l + 1) * (l + 1)]
    }

    pub fn irrep(&self, color: usize, channel: usize, l: usize) -> IrrepVec {
        IrrepVec::new(l, self.get(color, channel, l).to_vec()).expect("slice has length 2l+1")
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Adds `scale` times a point's contributions to color `color`.
    pub fn add_point(&mut self, color: usize, pc: &PointChannels, scale: f64) {
        let w = self.width();
        let base = color * self.n_channels * w;
        for (o, v) in self.data[base..base + self.n_channels * w]
            .iter_mut()
            .zip(&pc.data)
        {
            *o += scale * v;
        }
    }

    /// Multiplies every degree-l component by `scales[l]`.
    pub fn scale_degrees(&mut self, scales: &[f64]) {
        let w = self.width();
        for block in self.data.chunks_mut(w) {
            for (l, s) in scales.iter().enumerate().take(self.lmax + 1) {
                block[l * l..(l + 1) * (l + 1)]
                    .iter_mut()
                    .for_each(|x| *x *= s);
            }
        }
    }

    /// Zeroes every channel at or beyond `active`.
    pub fn mask_channels(&mut self, active: usize) {
        let w = self.width();
        for c in 0..self.n_colors {
            for k in active.min(self.n_channels)..self.n_channels {
                let base = (c * self.n_channels + k) * w;
                self.data[base..base + w].iter_mut().for_each(|x| *x = 0.0);
            }
        }
    }
}

pub fn fundamental_features(
    config: &ColoredConfig,
    lmax: usize,
    radial: &RadialSpec,
) -> FundamentalFeatures {
    let mut f = FundamentalFeatures::zeros(config.n_colors(), radial.channels(), lmax);
    for (c, r) in config.points() {
        f.add_point(*c, &point_channels(radial, *r, lmax), 1.0);
    }
    f
}

/// Features and their derivative with respect to each coordinate of each point,
/// ordered (point 0: x, y, z; point 1: x, y, z; ...).
pub fn fundamental_features_with_grad(
    config: &ColoredConfig,
    lmax: usize,
    radial: &RadialSpec,
) -> Result<(FundamentalFeatures, Vec<FundamentalFeatures>)> {
    let mut f = FundamentalFeatures::zeros(config.n_colors(), radial.channels(), lmax);
    let mut tangents = Vec::with_capacity(3 * config.len());
    for (i, (c, r)) in config.points().iter().enumerate() {
        let (val, grad) =
            point_channels_with_grad(radial, *r, lmax).ok_or(Error::NonDifferentiablePoint(i))?;
        f.add_point(*c, &val, 1.0);
        for g in &grad {
            let mut t = FundamentalFeatures::zeros(config.n_colors(), radial.channels(), lmax);
            t.add_point(*c, g, 1.0);
            tangents.push(t);
        }
    }
    Ok((f, tangents))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_zeros() {
        let f = fundamental_features(&ColoredConfig::empty(2), 3, &RadialSpec::polynomial(2));
        assert!(f.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn counts_per_color() {
        let cfg = ColoredConfig::new(
            2,
            vec![
                (0, [1.0, 0.0, 0.0]),
                (1, [0.0, 1.0, 0.0]),
                (1, [0.0, 0.0, 1.0]),
            ],
        )
        .unwrap();
        let f = fundamental_features(&cfg, 2, &RadialSpec::polynomial(1));
        assert_eq!(f.get(0, 0, 0), &[1.0]);
        assert_eq!(f.get(1, 0, 0), &[2.0]);
        let g = fundamental_features(&cfg, 2, &RadialSpec::exp_chebyshev(3, 5.0));
        assert_eq!(g.get(1, 0, 0), &[2.0]);
    }

    #[test]
    fn antipodal_pair_cancels_odd_degrees() {
        let cfg = ColoredConfig::monochrome(&[[0.6, 0.0, 0.8], [-0.6, 0.0, -0.8]]);
        let f = fundamental_features(&cfg, 5, &RadialSpec::polynomial(2));
        for l in [1, 3, 5] {
            assert!(f.get(0, 0, l).iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for spec in [RadialSpec::polynomial(3), RadialSpec::exp_chebyshev(4, 4.0)] {
            let r = [0.7, -0.4, 1.1];
            let (_, g) = point_channels_with_grad(&spec, r, 4).unwrap();
            let h = 1e-6;
            for ax in 0..3 {
                let (mut p, mut m) = (r, r);
                p[ax] += h;
                m[ax] -= h;
                let (vp, vm) = (point_channels(&spec, p, 4), point_channels(&spec, m, 4));
                for i in 0..vp.data.len() {
                    let fd = (vp.data[i] - vm.data[i]) / (2.0 * h);
                    assert!(
                        (fd - g[ax].data[i]).abs() < 1e-6 * (1.0 + fd.abs()),
                        "{spec:?} axis {ax} entry {i}"
                    );
                }
            }
        }
    }

    #[test]
    fn origin_is_not_differentiable_under_chebyshev() {
        let cfg = ColoredConfig::monochrome(&[[0.0, 0.0, 0.0]]);
        let r = fundamental_features_with_grad(&cfg, 2, &RadialSpec::exp_chebyshev(2, 3.0));
        assert!(matches!(r, Err(Error::NonDifferentiablePoint(0))));
    }
}

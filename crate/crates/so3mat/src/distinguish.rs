//! Invariants grouped by body order, and the smallest body order separating two
//! configurations.
//!
//! Body order d + 1 uses chains of d factors
//! M_{a_{d-1},0,a_{d-1}} ··· M_{a_1,a_2,l_2} · M_{0,a_1,a_1}
//! over every color choice and every degree sequence with degrees <= lmax.

use crate::config::ColoredConfig;
use crate::error::{Error, Result};
use crate::features::{fundamental_features, FundamentalFeatures};
use crate::moments::{embedding, iota_scale};
use crate::radial::RadialSpec;

/// An invariant value together with the bound Π σ_i ‖F_i‖ on its magnitude, used to
/// normalize differences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledInvariant {
    pub value: f64,
    pub scale: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct Walker<'a> {
    f: &'a FundamentalFeatures,
    lmax: usize,
    out: Vec<ScaledInvariant>,
}

impl Walker<'_> {
    /// Extends a chain currently at degree `a` with `left` factors still to apply.
    fn extend(&mut self, v: &[f64], a: usize, scale: f64, left: usize) {
        let nch = self.f.n_channels();
        let nc = self.f.n_colors() * nch;
        if left == 1 {
            // closing factor M_{a,0,a}: plain scalar product
            for g in 0..nc {
                let u = self.f.get(g / nch, g % nch, a);
                let value = u.iter().zip(v).map(|(x, y)| x * y).sum();
                self.out.push(ScaledInvariant {
                    value,
                    scale: scale * norm(u),
                });
            }
            return;
        }
        for b in 0..=self.lmax {
            for l in a.abs_diff(b)..=(a + b).min(self.lmax) {
                let e = embedding(a, b, l).expect("triangle holds by construction");
                let s = if a == 0 || b == 0 {
                    1.0
                } else {
                    iota_scale(a, b, l).abs()
                };
                for g in 0..nc {
                    let f = self.f.get(g / nch, g % nch, l);
                    let m = e.apply(f);
                    let w: Vec<f64> = (0..2 * b + 1)
                        .map(|r| (0..2 * a + 1).map(|c| m[(r, c)] * v[c]).sum())
                        .collect();
                    self.extend(&w, b, scale * s * norm(f), left - 1);
                }
            }
        }
    }
}

/// Every chain invariant of body order `body` (>= 2) with degrees <= lmax; body order
/// 1 is the empty product and is rejected.
pub fn body_order_invariants(
    config: &ColoredConfig,
    body: usize,
    lmax: usize,
) -> Result<Vec<ScaledInvariant>> {
    body_order_invariants_with(config, body, lmax, &RadialSpec::polynomial(1))
}

/// As [`body_order_invariants`], with every (color, radial channel) pair as a
/// fundamental feature.
pub fn body_order_invariants_with(
    config: &ColoredConfig,
    body: usize,
    lmax: usize,
    radial: &RadialSpec,
) -> Result<Vec<ScaledInvariant>> {
    if body < 2 {
        return Err(Error::InvalidArgument(
            "body order must be at least 2".into(),
        ));
    }
    let f = fundamental_features(config, lmax, radial);
    let nch = f.n_channels();
    let mut w = Walker {
        f: &f,
        lmax,
        out: Vec::new(),
    };
    let d = body - 1;
    for a in 0..=if d == 1 { 0 } else { lmax } {
        for g in 0..f.n_colors() * nch {
            let v = f.get(g / nch, g % nch, a).to_vec();
            let s = norm(&v);
            if d == 1 {
                w.out.push(ScaledInvariant {
                    value: v[0],
                    scale: s,
                });
            } else {
                w.extend(&v, a, s, d - 1);
            }
        }
    }
    Ok(w.out)
}

/// max_i |x_i - y_i| / max(scale_x, scale_y), zero where both scales vanish.
pub fn normalized_discrepancy(x: &[ScaledInvariant], y: &[ScaledInvariant]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let s = a.scale.max(b.scale);
            if s == 0.0 {
                0.0
            } else {
                (a.value - b.value).abs() / s
            }
        })
        .fold(0.0, f64::max)
}

/// Discrepancy above which two configurations count as separated.
pub const SEPARATION_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct DistinguishReport {
    /// (body order, normalized discrepancy) for body orders 2..=max_body.
    pub per_order: Vec<(usize, f64)>,
    pub separated_at: Option<usize>,
}

pub fn distinguish(
    a: &ColoredConfig,
    b: &ColoredConfig,
    max_body: usize,
    lmax: usize,
) -> Result<DistinguishReport> {
    if a.n_colors() != b.n_colors() {
        return Err(Error::ShapeMismatch(format!(
            "palettes differ: {} vs {}",
            a.n_colors(),
            b.n_colors()
        )));
    }
    let mut per_order = Vec::new();
    let mut separated_at = None;
    for body in 2..=max_body {
        let d = normalized_discrepancy(
            &body_order_invariants(a, body, lmax)?,
            &body_order_invariants(b, body, lmax)?,
        );
        if d > SEPARATION_THRESHOLD && separated_at.is_none() {
            separated_at = Some(body);
        }
        per_order.push((body, d));
    }
    Ok(DistinguishReport {
        per_order,
        separated_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_body_counts_points() {
        let c = ColoredConfig::new(
            2,
            vec![
                (0, [1.0, 0.0, 0.0]),
                (1, [0.0, 2.0, 0.0]),
                (1, [0.0, 0.0, 3.0]),
            ],
        )
        .unwrap();
        let v = body_order_invariants(&c, 2, 3).unwrap();
        assert_eq!(
            v.iter().map(|s| s.value).collect::<Vec<_>>(),
            vec![1.0, 2.0]
        );
    }

    #[test]
    fn identical_configs_agree() {
        let c = ColoredConfig::monochrome(&[[0.3, 0.4, 0.5], [-0.2, 0.9, 0.1], [0.6, -0.6, 0.2]]);
        let r = distinguish(&c, &c, 4, 3).unwrap();
        assert!(r.per_order.iter().all(|(_, d)| *d == 0.0));
        assert_eq!(r.separated_at, None);
    }
}

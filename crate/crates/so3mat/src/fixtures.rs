//! Configurations that low body orders cannot tell apart.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::config::ColoredConfig;

fn on_circle(angles: &[f64]) -> ColoredConfig {
    let pts: Vec<[f64; 3]> = angles.iter().map(|t| [t.cos(), t.sin(), 0.0]).collect();
    ColoredConfig::monochrome(&pts)
}

/// Points at {0, 1, 8, 11, 13} and {0, 10, 11, 13, 18} thirtieths of a turn: the same
/// set of pairwise differences mod 30.
pub fn circle_pair_thirtieths() -> (ColoredConfig, ColoredConfig) {
    let at = |ks: &[u32]| {
        on_circle(
            &ks.iter()
                .map(|k| 2.0 * PI * f64::from(*k) / 30.0)
                .collect::<Vec<_>>(),
        )
    };
    (at(&[0, 1, 8, 11, 13]), at(&[0, 10, 11, 13, 18]))
}

/// Angles {0, α, α + π/2, π} and {0, α, π, α - π/2}: the same set of angles.
pub fn circle_pair_alpha(alpha: f64) -> (ColoredConfig, ColoredConfig) {
    (
        on_circle(&[0.0, alpha, alpha + FRAC_PI_2, PI]),
        on_circle(&[0.0, alpha, PI, alpha - FRAC_PI_2]),
    )
}

/// Two unit points: antipodal (Σr = 0) versus orthogonal (Σr = (1, 1, 0)).
pub fn two_point_pair() -> (ColoredConfig, ColoredConfig) {
    (
        ColoredConfig::monochrome(&[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]),
        ColoredConfig::monochrome(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn angle_multiset(c: &ColoredConfig) -> Vec<i64> {
        let p = c.points();
        let mut out = Vec::new();
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                let d: f64 = (0..3).map(|k| p[i].1[k] * p[j].1[k]).sum();
                out.push((d * 1e9).round() as i64);
            }
        }
        out.sort_unstable();
        out
    }

    #[test]
    fn pairs_share_their_angles() {
        for (a, b) in [circle_pair_thirtieths(), circle_pair_alpha(0.4)] {
            assert_eq!(angle_multiset(&a), angle_multiset(&b));
        }
    }
}

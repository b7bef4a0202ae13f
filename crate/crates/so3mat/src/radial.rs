//! Radial weightings of the fundamental features.
//!
//! `Polynomial` channel k weights a point by |r|^{2k} and pairs it with the solid
//! harmonic Y_l(r). `ExpChebyshev` channel 0 counts points (degree 0 only) and
//! channel k >= 1 weights Y_l(r/|r|) by
//!
//! g_k(r) = (T_k(u(r)) - T_k(-1)) f_c(r),  u(r) = 2 ln(1 + r) / ln(1 + r_c) - 1,
//! f_c(r) = (1 + cos(π r / r_c)) / 2 for r < r_c and 0 beyond,
//!
//! so g_k(0) = 0 and g_k vanishes at and beyond the cutoff r_c.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadialKind {
    Polynomial,
    ExpChebyshev { cutoff: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialSpec {
    pub kind: RadialKind,
    pub count: usize,
}

impl RadialSpec {
    pub fn polynomial(count: usize) -> Self {
        Self {
            kind: RadialKind::Polynomial,
            count,
        }
    }

    pub fn exp_chebyshev(count: usize, cutoff: f64) -> Self {
        Self {
            kind: RadialKind::ExpChebyshev { cutoff },
            count,
        }
    }

    /// Number of fundamental channels per color.
    pub fn channels(&self) -> usize {
        match self.kind {
            RadialKind::Polynomial => self.count,
            RadialKind::ExpChebyshev { .. } => self.count + 1,
        }
    }

    /// Value and derivative of radial function k (0-based) at radius r.
    pub fn eval(&self, k: usize, r: f64) -> (f64, f64) {
        match self.kind {
            RadialKind::Polynomial => {
                if k == 0 {
                    (1.0, 0.0)
                } else {
                    let p = r.powi(2 * k as i32 - 1);
                    (p * r, 2.0 * k as f64 * p)
                }
            }
            RadialKind::ExpChebyshev { cutoff } => chebyshev_radial(k + 1, r, cutoff),
        }
    }
}

/// T_n(u) and T_n'(u).
fn chebyshev(n: usize, u: f64) -> (f64, f64) {
    let (mut t0, mut t1) = (1.0, u);
    let (mut d0, mut d1) = (0.0, 1.0);
    if n == 0 {
        return (t0, d0);
    }
    for _ in 1..n {
        let t2 = 2.0 * u * t1 - t0;
        let d2 = 2.0 * t1 + 2.0 * u * d1 - d0;
        (t0, t1, d0, d1) = (t1, t2, d1, d2);
    }
    (t1, d1)
}

/// g_n(r) and g_n'(r) for n >= 1.
pub(crate) fn chebyshev_radial(n: usize, r: f64, cutoff: f64) -> (f64, f64) {
    if r >= cutoff {
        return (0.0, 0.0);
    }
    let lc = (1.0 + cutoff).ln();
    let u = 2.0 * (1.0 + r).ln() / lc - 1.0;
    let du = 2.0 / ((1.0 + r) * lc);
    let (t, dt) = chebyshev(n, u);
    let t0 = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let w = std::f64::consts::PI / cutoff;
    let fc = 0.5 * ((w * r).cos() + 1.0);
    let dfc = -0.5 * w * (w * r).sin();
    ((t - t0) * fc, dt * du * fc + (t - t0) * dfc)
}

/// Coefficients C (one row per radius) with Σ_k C[i][k] g_k(t_j) = δ_ij, minimum norm
/// when there are more functions than radii.
pub fn radial_separation_check(radii: &[f64], radial: &RadialSpec) -> Result<DMatrix<f64>> {
    let n = radii.len();
    if n == 0 || radial.count < n {
        return Err(Error::InvalidArgument(format!(
            "need at least as many radial functions ({}) as radii ({n})",
            radial.count
        )));
    }
    if radii.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidArgument("radii must be positive".into()));
    }
    // g[(k, j)] = g_k(t_j)
    let g = DMatrix::from_fn(radial.count, n, |k, j| radial.eval(k, radii[j]).0);
    let svd = g.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    // also rejects NaN
    if smin.is_nan() || smin <= 1e-12 * smax.max(1e-300) {
        return Err(Error::SingularSystem(smin));
    }
    // C G = I  =>  C = G^+ (left inverse via pseudo-inverse of G)
    let pinv = svd
        .pseudo_inverse(1e-14 * smax)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let c = pinv;
    let resid = (&c * &g - DMatrix::<f64>::identity(n, n)).amax();
    if resid > 1e-8 {
        return Err(Error::SingularSystem(smin));
    }
    Ok(c)
}

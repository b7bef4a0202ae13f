//! Real solid harmonics Y_l: homogeneous degree-l polynomials in (x, y, z).
//!
//! The quantization axis is x. Writing (X, Y, Z) = (y, z, x), the functions are
//! C_m = N_lm Π_l^m(Z, r²) Re (X + iY)^m and S_m = N_lm Π_l^m(Z, r²) Im (X + iY)^m
//! with no Condon-Shortley phase. Components of degree l are stored in the order
//! (S_l, C_l, S_{l-1}, C_{l-1}, ..., S_1, C_1, C_0); degree 1 is the exception
//! and uses (C_0, C_1, S_1) = (x, y, z).
//!
//! Normalization: |Y_l(r)|² = |r|^{2l} / (2l-1)!!, from N²_lm = 2 (l-m)! / ((l+m)! (2l-1)!!)
//! for m > 0 and N²_l0 = 1 / (2l-1)!!. Low degrees:
//!
//! | l | components |
//! |---|------------|
//! | 0 | 1 |
//! | 1 | x, y, z |
//! | 2 | yz, (y²-z²)/2, xz, xy, (2x²-y²-z²)/(2√3) |
//! | 3 | N²_33 = 1/5400, N²_32 = 1/900, N²_31 = 1/90, N²_30 = 1/15 |
//! | 4 | N²_44 = 1/2116800, N²_43 = 1/264600, N²_42 = 1/18900, N²_41 = 1/1050, N²_40 = 1/105 |
//! | 5 | N²_5m = 2 (5-m)! / ((5+m)! 945), N²_50 = 1/945 |

use std::ops::{Add, Mul, Sub};

use super::IrrepVec;

/// Arithmetic needed by the harmonic recurrences.
pub trait Scalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> {
    fn constant(v: f64) -> Self;
    fn scale(self, c: f64) -> Self;
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn scale(self, c: f64) -> Self {
        self * c
    }
}

/// Value with its three partial derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dual3 {
    pub v: f64,
    pub d: [f64; 3],
}

impl Dual3 {
    pub fn variable(v: f64, axis: usize) -> Self {
        let mut d = [0.0; 3];
        d[axis] = 1.0;
        Self { v, d }
    }
}

impl Add for Dual3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            v: self.v + o.v,
            d: [self.d[0] + o.d[0], self.d[1] + o.d[1], self.d[2] + o.d[2]],
        }
    }
}

impl Sub for Dual3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            v: self.v - o.v,
            d: [self.d[0] - o.d[0], self.d[1] - o.d[1], self.d[2] - o.d[2]],
        }
    }
}

impl Mul for Dual3 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            d: [
                self.d[0] * o.v + self.v * o.d[0],
                self.d[1] * o.v + self.v * o.d[1],
                self.d[2] * o.v + self.v * o.d[2],
            ],
        }
    }
}

impl Scalar for Dual3 {
    fn constant(v: f64) -> Self {
        Self { v, d: [0.0; 3] }
    }
    fn scale(self, c: f64) -> Self {
        Self {
            v: self.v * c,
            d: [self.d[0] * c, self.d[1] * c, self.d[2] * c],
        }
    }
}

/// Position of C_m (m >= 0) or S_|m| (m < 0) inside the degree-l block.
pub fn slot(l: usize, m: i64) -> usize {
    let k = m.unsigned_abs() as usize;
    debug_assert!(k <= l);
    if l == 1 {
        return match m {
            0 => 0,
            1 => 1,
            _ => 2,
        };
    }
    if m == 0 {
        2 * l
    } else if m > 0 {
        2 * (l - k) + 1
    } else {
        2 * (l - k)
    }
}

/// Signed order m of each slot of the degree-l block (negative for S components).
pub fn slot_orders(l: usize) -> Vec<i64> {
    let mut out = vec![0; 2 * l + 1];
    for m in -(l as i64)..=(l as i64) {
        out[slot(l, m)] = m;
    }
    out
}

pub(crate) fn double_factorial_odd(l: usize) -> f64 {
    // (2l-1)!!
    (1..=l).fold(1.0, |acc, k| acc * (2 * k - 1) as f64)
}

fn normalization(l: usize, m: usize) -> f64 {
    let df = double_factorial_odd(l);
    if m == 0 {
        return (1.0 / df).sqrt();
    }
    // (l-m)!/(l+m)!
    let ratio = ((l - m + 1)..=(l + m)).fold(1.0, |acc, k| acc / k as f64);
    (2.0 * ratio / df).sqrt()
}

/// Flat offset of degree l in a harmonic vector: l².
pub fn offset(l: usize) -> usize {
    l * l
}

/// Evaluates degrees 0..=lmax into `out[l² .. (l+1)²]`.
pub fn solid_harmonics_into<T: Scalar>(x: T, y: T, z: T, lmax: usize, out: &mut [T]) {
    assert!(out.len() >= (lmax + 1) * (lmax + 1));
    let (fx, fy, fz) = (y, z, x);
    let r2 = x * x + y * y + z * z;
    let mut a = T::constant(1.0);
    let mut b = T::constant(0.0);
    let mut pi = vec![T::constant(0.0); lmax + 1];
    for m in 0..=lmax {
        // pi[l] = Π_l^m for l >= m
        pi[m] = T::constant(double_factorial_odd(m));
        if m < lmax {
            pi[m + 1] = (fz * pi[m]).scale((2 * m + 1) as f64);
        }
        for l in (m + 2)..=lmax {
            let t = (fz * pi[l - 1]).scale((2 * l - 1) as f64)
                - (r2 * pi[l - 2]).scale((l + m - 1) as f64);
            pi[l] = t.scale(1.0 / (l - m) as f64);
        }
        for l in m..=lmax {
            let n = normalization(l, m);
            let base = offset(l);
            if m == 0 {
                out[base + slot(l, 0)] = pi[l].scale(n);
            } else {
                let p = pi[l].scale(n);
                out[base + slot(l, m as i64)] = p * a;
                out[base + slot(l, -(m as i64))] = p * b;
            }
        }
        let na = a * fx - b * fy;
        let nb = a * fy + b * fx;
        a = na;
        b = nb;
    }
}

/// Harmonics of degrees 0..=lmax in one flat vector of length (lmax+1)².
pub fn harmonics_flat(r: [f64; 3], lmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; (lmax + 1) * (lmax + 1)];
    solid_harmonics_into(r[0], r[1], r[2], lmax, &mut out);
    out
}

/// Harmonics with gradients: values and ∂/∂(x, y, z) per component.
pub fn harmonics_with_grad(r: [f64; 3], lmax: usize) -> Vec<Dual3> {
    let mut out = vec![Dual3::default(); (lmax + 1) * (lmax + 1)];
    solid_harmonics_into(
        Dual3::variable(r[0], 0),
        Dual3::variable(r[1], 1),
        Dual3::variable(r[2], 2),
        lmax,
        &mut out,
    );
    out
}

/// Y_0(r), ..., Y_lmax(r).
pub fn spherical_harmonics(r: [f64; 3], lmax: usize) -> Vec<IrrepVec> {
    let flat = harmonics_flat(r, lmax);
    (0..=lmax)
        .map(|l| IrrepVec::new(l, flat[offset(l)..offset(l + 1)].to_vec()).expect("length 2l+1"))
        .collect()
}

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::harmonics::slot;

/// Real antisymmetric generators of rotations about x, y and z acting on degree l.
#[derive(Clone, Debug)]
pub struct GeneratorSet {
    pub l: usize,
    pub lx: DMatrix<f64>,
    pub ly: DMatrix<f64>,
    pub lz: DMatrix<f64>,
}

impl GeneratorSet {
    pub fn as_array(&self) -> [&DMatrix<f64>; 3] {
        [&self.lx, &self.ly, &self.lz]
    }

    /// Σ n_k L_k.
    pub fn along(&self, n: [f64; 3]) -> DMatrix<f64> {
        &self.lx * n[0] + &self.ly * n[1] + &self.lz * n[2]
    }
}

/// Raising coefficient: J+|m⟩ = a(l, m)|m+1⟩.
pub(crate) fn raise_coeff(l: usize, m: i64) -> f64 {
    let l = l as i64;
    ((l * (l + 1) - m * (m + 1)) as f64).max(0.0).sqrt()
}

/// Lowering coefficient: J-|m⟩ = b(l, m)|m-1⟩.
pub(crate) fn lower_coeff(l: usize, m: i64) -> f64 {
    let l = l as i64;
    ((l * (l + 1) - m * (m - 1)) as f64).max(0.0).sqrt()
}

/// Column j holds real basis vector j expanded over |m⟩ (row index m + l).
pub(crate) fn real_to_complex(l: usize) -> DMatrix<Complex64> {
    let n = 2 * l + 1;
    let mut w = DMatrix::<Complex64>::zeros(n, n);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let li = l as i64;
    w[(l, slot(l, 0))] = Complex64::new(1.0, 0.0);
    for m in 1..=li {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let (pos, neg) = ((li + m) as usize, (li - m) as usize);
        let c = slot(l, m);
        let s = slot(l, -m);
        w[(pos, c)] = Complex64::new(sign * h, 0.0);
        w[(neg, c)] = Complex64::new(h, 0.0);
        w[(pos, s)] = Complex64::new(0.0, -sign * h);
        w[(neg, s)] = Complex64::new(0.0, h);
    }
    w
}

fn angular_momentum(l: usize) -> [DMatrix<Complex64>; 3] {
    let n = 2 * l + 1;
    let li = l as i64;
    let mut jp = DMatrix::<Complex64>::zeros(n, n);
    let mut jz = DMatrix::<Complex64>::zeros(n, n);
    for m in -li..=li {
        let i = (m + li) as usize;
        jz[(i, i)] = Complex64::new(m as f64, 0.0);
        if m < li {
            jp[(i + 1, i)] = Complex64::new(raise_coeff(l, m), 0.0);
        }
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm) * Complex64::new(0.5, 0.0);
    let jy = (&jp - &jm) * Complex64::new(0.0, -0.5);
    [jx, jy, jz]
}

/// Generators in the real harmonic basis. The x axis is the quantization axis, so
/// (L_x, L_y, L_z) come from the complex (J_Z, J_X, J_Y) of the frame (y, z, x).
pub fn generators(l: usize) -> GeneratorSet {
    let w = real_to_complex(l);
    let wh = w.adjoint();
    let [jx, jy, jz] = angular_momentum(l);
    let mi = Complex64::new(0.0, -1.0);
    let real = |j: &DMatrix<Complex64>| -> DMatrix<f64> {
        let c = &wh * (j * mi) * &w;
        c.map(|z| z.re)
    };
    GeneratorSet {
        l,
        lx: real(&jz),
        ly: real(&jx),
        lz: real(&jy),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comm(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        a * b - b * a
    }

    #[test]
    fn commutators_and_casimir() {
        for l in 0..=8 {
            let g = generators(l);
            assert!((comm(&g.lx, &g.ly) - &g.lz).amax() < 1e-10, "l={l}");
            assert!((comm(&g.ly, &g.lz) - &g.lx).amax() < 1e-10, "l={l}");
            assert!((comm(&g.lz, &g.lx) - &g.ly).amax() < 1e-10, "l={l}");
            let cas = &g.lx * &g.lx + &g.ly * &g.ly + &g.lz * &g.lz;
            let want = DMatrix::<f64>::identity(2 * l + 1, 2 * l + 1) * -((l * (l + 1)) as f64);
            assert!((cas - want).amax() < 1e-10, "l={l}");
            for m in g.as_array() {
                assert!((m + m.transpose()).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn degree_one_is_the_cross_product_basis() {
        let g = generators(1);
        let lx = DMatrix::from_row_slice(3, 3, &[0., 0., 0., 0., 0., -1., 0., 1., 0.]);
        let ly = DMatrix::from_row_slice(3, 3, &[0., 0., 1., 0., 0., 0., -1., 0., 0.]);
        let lz = DMatrix::from_row_slice(3, 3, &[0., -1., 0., 1., 0., 0., 0., 0., 0.]);
        assert!((g.lx - lx).amax() < 1e-14);
        assert!((g.ly - ly).amax() < 1e-14);
        assert!((g.lz - lz).amax() < 1e-14);
    }

    #[test]
    fn transform_is_unitary() {
        for l in 0..6 {
            let w = real_to_complex(l);
            let p = w.adjoint() * &w;
            let id = DMatrix::<Complex64>::identity(2 * l + 1, 2 * l + 1);
            assert!((p - id).iter().all(|z| z.norm() < 1e-14));
        }
    }
}

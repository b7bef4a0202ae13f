//! Real-basis Clebsch-Gordan coefficients.
//!
//! Complex coefficients come from the highest-weight vector of ℋ^(l3) inside
//! ℋ^(l1)⊗ℋ^(l2) (kernel of the total raising operator on the weight-l3 space,
//! largest-m1 entry positive) followed by repeated lowering. The real block is the
//! change of basis of that map into the real harmonic basis of each factor.

use nalgebra::DMatrix;

use super::generators::{generators, lower_coeff, raise_coeff};
use super::harmonics::slot;
use super::{check_triangle, IrrepVec};
use crate::error::{Error, Result};

/// Complex coefficients ⟨l1 m1; l2 m2 | l3 m3⟩ as rows over m1, one row per m3 = l3..=-l3.
struct ComplexBlock {
    l1: usize,
    rows: Vec<Vec<f64>>,
}

fn highest_weight(l1: usize, l2: usize, l3: usize) -> Vec<f64> {
    let (i1, i2, i3) = (l1 as i64, l2 as i64, l3 as i64);
    let lo = (-i1).max(i3 - i2);
    let hi = i1.min(i3 + i2);
    let mut v = vec![0.0; 2 * l1 + 1];
    v[(lo + i1) as usize] = 1.0;
    for p in (lo + 1)..=hi {
        let prev = v[(p - 1 + i1) as usize];
        let c = -prev * raise_coeff(l1, p - 1) / raise_coeff(l2, i3 - p);
        v[(p + i1) as usize] = c;
        if c.abs() > 1e100 {
            v.iter_mut().for_each(|x| *x *= 1e-100);
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sign = if v[(hi + i1) as usize] < 0.0 {
        -1.0
    } else {
        1.0
    };
    v.iter_mut().for_each(|x| *x *= sign / norm);
    v
}

fn complex_block(l1: usize, l2: usize, l3: usize) -> ComplexBlock {
    let (i1, i2, i3) = (l1 as i64, l2 as i64, l3 as i64);
    let mut rows = Vec::with_capacity(2 * l3 + 1);
    let mut cur = highest_weight(l1, l2, l3);
    rows.push(cur.clone());
    for m in ((-i3 + 1)..=i3).rev() {
        // cur holds weight m; produce weight m - 1
        let mut next = vec![0.0; 2 * l1 + 1];
        for m1 in -i1..=i1 {
            let c = cur[(m1 + i1) as usize];
            if c == 0.0 {
                continue;
            }
            let m2 = m - m1;
            if m2.abs() > i2 {
                continue;
            }
            if m1 > -i1 {
                next[(m1 - 1 + i1) as usize] += c * lower_coeff(l1, m1);
            }
            if m2 > -i2 {
                next[(m1 + i1) as usize] += c * lower_coeff(l2, m2);
            }
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        next.iter_mut().for_each(|x| *x /= norm);
        rows.push(next.clone());
        cur = next;
    }
    ComplexBlock { l1, rows }
}

/// Nonzero entries of the real basis vectors over |m⟩: for each m, (slot, coefficient).
fn real_components(l: usize) -> Vec<Vec<(usize, num_complex::Complex64)>> {
    use num_complex::Complex64 as C;
    let li = l as i64;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    (-li..=li)
        .map(|m| {
            if m == 0 {
                return vec![(slot(l, 0), C::new(1.0, 0.0))];
            }
            let k = m.abs();
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            if m > 0 {
                vec![
                    (slot(l, k), C::new(sign * h, 0.0)),
                    (slot(l, -k), C::new(0.0, -sign * h)),
                ]
            } else {
                vec![(slot(l, k), C::new(h, 0.0)), (slot(l, -k), C::new(0.0, h))]
            }
        })
        .collect()
}

/// Emits every contribution (j3, j1, j2, value) of the real block; repeated index
/// triples must be summed. The real block is the real part of the transformed
/// complex block when l1 + l2 + l3 is even and the imaginary part otherwise.
pub fn for_each_real_cg<F: FnMut(usize, usize, usize, f64)>(
    l1: usize,
    l2: usize,
    l3: usize,
    mut emit: F,
) {
    let cb = complex_block(l1, l2, l3);
    let (i1, i2, i3) = (l1 as i64, l2 as i64, l3 as i64);
    let (w1, w2, w3) = (
        real_components(l1),
        real_components(l2),
        real_components(l3),
    );
    let take_re = (l1 + l2 + l3).is_multiple_of(2);
    for (r, row) in cb.rows.iter().enumerate() {
        let m3 = i3 - r as i64;
        for m1 in -i1..=i1 {
            let c = row[(m1 + cb.l1 as i64) as usize];
            let m2 = m3 - m1;
            if c == 0.0 || m2.abs() > i2 {
                continue;
            }
            for &(j3, a3) in &w3[(m3 + i3) as usize] {
                for &(j1, a1) in &w1[(m1 + i1) as usize] {
                    let a31 = a3.conj() * a1 * c;
                    for &(j2, a2) in &w2[(m2 + i2) as usize] {
                        let z = a31 * a2;
                        let v = if take_re { z.re } else { z.im };
                        if v != 0.0 {
                            emit(j3, j1, j2, v);
                        }
                    }
                }
            }
        }
    }
}

/// Dense real block, layout [j3][j1][j2].
pub fn real_cg_block(l1: usize, l2: usize, l3: usize) -> Vec<f64> {
    let (n1, n2, n3) = (2 * l1 + 1, 2 * l2 + 1, 2 * l3 + 1);
    let mut out = vec![0.0; n1 * n2 * n3];
    for_each_real_cg(l1, l2, l3, |j3, j1, j2, v| {
        out[(j3 * n1 + j1) * n2 + j2] += v
    });
    for x in out.iter_mut() {
        if x.abs() < 1e-15 {
            *x = 0.0;
        }
    }
    out
}

/// Nonzero entries (j3, j1, j2, value) of the real block.
pub fn real_cg_sparse(l1: usize, l2: usize, l3: usize) -> Vec<(u32, u32, u32, f64)> {
    let (n1, n2) = (2 * l1 + 1, 2 * l2 + 1);
    real_cg_block(l1, l2, l3)
        .into_iter()
        .enumerate()
        .filter(|(_, v)| *v != 0.0)
        .map(|(k, v)| {
            (
                (k / (n1 * n2)) as u32,
                ((k / n2) % n1) as u32,
                (k % n2) as u32,
                v,
            )
        })
        .collect()
}

/// Independent construction: unit-norm kernel vector of L3 T - T (L1⊗I + I⊗L2) = 0.
pub fn intertwiner_block(l1: usize, l2: usize, l3: usize) -> Vec<f64> {
    let (n1, n2, n3) = (2 * l1 + 1, 2 * l2 + 1, 2 * l3 + 1);
    let (g1, g2, g3) = (generators(l1), generators(l2), generators(l3));
    let nunk = n3 * n1 * n2;
    let idx = |j3: usize, j1: usize, j2: usize| (j3 * n1 + j1) * n2 + j2;
    let mut a = DMatrix::<f64>::zeros(3 * nunk, nunk);
    for (k, ((m1, m2), m3)) in g1
        .as_array()
        .into_iter()
        .zip(g2.as_array())
        .zip(g3.as_array())
        .enumerate()
    {
        for j3 in 0..n3 {
            for j1 in 0..n1 {
                for j2 in 0..n2 {
                    let row = k * nunk + idx(j3, j1, j2);
                    for i in 0..n3 {
                        a[(row, idx(i, j1, j2))] += m3[(j3, i)];
                    }
                    for i in 0..n1 {
                        a[(row, idx(j3, i, j2))] -= m1[(i, j1)];
                    }
                    for i in 0..n2 {
                        a[(row, idx(j3, j1, i))] -= m2[(i, j2)];
                    }
                }
            }
        }
    }
    let ata = a.transpose() * &a;
    let eig = ata.symmetric_eigen();
    let (imin, _) =
        eig.eigenvalues
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) },
            );
    eig.eigenvectors.column(imin).iter().copied().collect()
}

/// Real Clebsch-Gordan blocks for every admissible triple with degrees <= lmax.
#[derive(Clone, Debug)]
pub struct CgTable {
    lmax: usize,
    blocks: Vec<Vec<f64>>,
}

impl CgTable {
    pub fn lmax(&self) -> usize {
        self.lmax
    }

    fn index(&self, l1: usize, l2: usize, l3: usize) -> usize {
        let n = self.lmax + 1;
        (l1 * n + l2) * n + l3
    }

    /// Block [j3][j1][j2] of (l1, l2, l3), or None outside the triangle or table range.
    pub fn block(&self, l1: usize, l2: usize, l3: usize) -> Option<&[f64]> {
        if l1.max(l2).max(l3) > self.lmax || check_triangle(l1, l2, l3).is_err() {
            return None;
        }
        Some(&self.blocks[self.index(l1, l2, l3)])
    }

    /// Coefficient for component slots (j1, j2, j3); zero for inadmissible triples.
    pub fn get(&self, l1: usize, l2: usize, l3: usize, j1: usize, j2: usize, j3: usize) -> f64 {
        self.block(l1, l2, l3)
            .map_or(0.0, |b| b[(j3 * (2 * l1 + 1) + j1) * (2 * l2 + 1) + j2])
    }
}

pub fn build_cg_table(lmax: usize) -> CgTable {
    let n = lmax + 1;
    let mut blocks = vec![Vec::new(); n * n * n];
    for l1 in 0..=lmax {
        for l2 in 0..=lmax {
            for l3 in l1.abs_diff(l2)..=(l1 + l2).min(lmax) {
                blocks[(l1 * n + l2) * n + l3] = real_cg_block(l1, l2, l3);
            }
        }
    }
    CgTable { lmax, blocks }
}

/// Contracts a dense block [j3][j1][j2] with x ⊗ y.
pub fn contract_block(block: &[f64], x: &[f64], y: &[f64], out: &mut [f64]) {
    let (n1, n2) = (x.len(), y.len());
    for (j3, o) in out.iter_mut().enumerate() {
        let rows = &block[j3 * n1 * n2..(j3 + 1) * n1 * n2];
        let mut s = 0.0;
        for (j1, xv) in x.iter().enumerate() {
            if *xv == 0.0 {
                continue;
            }
            let r = &rows[j1 * n2..(j1 + 1) * n2];
            s += xv * r.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        }
        *o = s;
    }
}

pub fn cg_product(x: &IrrepVec, y: &IrrepVec, l3: usize, table: &CgTable) -> Result<IrrepVec> {
    let (l1, l2) = (x.degree(), y.degree());
    check_triangle(l1, l2, l3)?;
    let block = table.block(l1, l2, l3).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "degrees ({l1}, {l2}, {l3}) exceed table lmax {}",
            table.lmax()
        ))
    })?;
    let mut out = vec![0.0; 2 * l3 + 1];
    contract_block(block, x.coeffs(), y.coeffs(), &mut out);
    IrrepVec::new(l3, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        d / (na * nb)
    }

    #[test]
    fn rows_are_orthonormal() {
        for (l1, l2, l3) in [(1, 1, 0), (2, 3, 4), (3, 3, 6), (4, 2, 3), (5, 5, 5)] {
            let b = real_cg_block(l1, l2, l3);
            let w = (2 * l1 + 1) * (2 * l2 + 1);
            for i in 0..=2 * l3 {
                for j in 0..=2 * l3 {
                    let d: f64 = (0..w).map(|k| b[i * w + k] * b[j * w + k]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (d - want).abs() < 1e-12,
                        "({l1},{l2},{l3}) rows {i},{j}: {d}"
                    );
                }
            }
        }
    }

    #[test]
    fn matches_intertwiner_null_space() {
        for l1 in 0usize..=2 {
            for l2 in 0..=2 {
                for l3 in l1.abs_diff(l2)..=l1 + l2 {
                    let c = cosine(&real_cg_block(l1, l2, l3), &intertwiner_block(l1, l2, l3));
                    assert!((c.abs() - 1.0).abs() < 1e-10, "({l1},{l2},{l3}): {c}");
                }
            }
        }
    }

    #[test]
    fn high_degrees_stay_finite() {
        let s = real_cg_sparse(30, 30, 60);
        assert!(s.iter().all(|e| e.3.is_finite()));
        let n: f64 = s.iter().map(|e| e.3 * e.3).sum();
        assert!((n - 121.0).abs() < 1e-8);
    }
}

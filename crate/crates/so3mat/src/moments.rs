//! Embeddings ι_{a,b,l}: ℋ^(l) → Mat_{(2b+1)×(2a+1)}, matrix moments and block
//! matrices of moments.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::DMatrix;

use crate::config::ColoredConfig;
use crate::error::{Error, Result};
use crate::features::point_channels;
use crate::radial::RadialSpec;
use crate::so3::cg::real_cg_block;
use crate::so3::harmonics::double_factorial_odd;
use crate::so3::{check_triangle, IrrepVec};

/// Signed scales of the triples whose images are pinned to the reference matrices
/// ((1,1,l) for l <= 2 and (2,2,l) for l <= 4).
fn pinned_scale(a: usize, b: usize, l: usize) -> Option<f64> {
    let s = match (a, b, l) {
        (1, 1, 0) => -(3f64.sqrt()),
        (1, 1, 1) => 2f64.sqrt(),
        (1, 1, 2) => 2f64.sqrt(),
        (2, 2, 0) => 5f64.sqrt(),
        (2, 2, 1) => -(10f64.sqrt()),
        (2, 2, 2) => -(42f64.sqrt()),
        (2, 2, 3) => 600f64.sqrt(),
        (2, 2, 4) => 117600f64.sqrt(),
        _ => return None,
    };
    Some(s)
}

/// Scale σ with ι = σ U, U the orthonormal Clebsch-Gordan map. Outside the pinned
/// triples σ = sqrt((2l-1)!!), so a unit-norm point gives a unit Frobenius norm image.
pub fn iota_scale(a: usize, b: usize, l: usize) -> f64 {
    pinned_scale(a, b, l).unwrap_or_else(|| double_factorial_odd(l).sqrt())
}

/// Dense ι_{a,b,l}: component j of v maps to the (2b+1)×(2a+1) matrix `basis[j]`.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub a: usize,
    pub b: usize,
    pub l: usize,
    /// Layout [j][β][α], scale included.
    data: Vec<f64>,
}

impl Embedding {
    fn build(a: usize, b: usize, l: usize) -> Self {
        let (na, nb) = (2 * a + 1, 2 * b + 1);
        let mut data = vec![0.0; (2 * l + 1) * nb * na];
        if a == 0 {
            for j in 0..nb {
                data[j * nb + j] = 1.0;
            }
        } else if b == 0 {
            for j in 0..na {
                data[j * na + j] = 1.0;
            }
        } else {
            let s = iota_scale(a, b, l);
            for (d, t) in data.iter_mut().zip(real_cg_block(b, a, l)) {
                *d = s * t;
            }
        }
        Self { a, b, l, data }
    }

    /// Adds c · ι(v) into the (2b+1)×(2a+1) window of `out` at (row, col).
    pub fn add_into(&self, v: &[f64], c: f64, out: &mut DMatrix<f64>, row: usize, col: usize) {
        let (na, nb) = (2 * self.a + 1, 2 * self.b + 1);
        for (j, vj) in v.iter().enumerate() {
            let w = c * vj;
            if w == 0.0 {
                continue;
            }
            let basis = &self.data[j * na * nb..(j + 1) * na * nb];
            for beta in 0..nb {
                for alpha in 0..na {
                    let e = basis[beta * na + alpha];
                    if e != 0.0 {
                        out[(row + beta, col + alpha)] += w * e;
                    }
                }
            }
        }
    }

    /// Adjoint: component j of the result is ⟨basis_j, window of `m` at (row, col)⟩.
    pub fn adjoint(&self, m: &DMatrix<f64>, row: usize, col: usize, out: &mut [f64]) {
        let (na, nb) = (2 * self.a + 1, 2 * self.b + 1);
        for (j, o) in out.iter_mut().enumerate() {
            let basis = &self.data[j * na * nb..(j + 1) * na * nb];
            let mut s = 0.0;
            for beta in 0..nb {
                for alpha in 0..na {
                    let e = basis[beta * na + alpha];
                    if e != 0.0 {
                        s += e * m[(row + beta, col + alpha)];
                    }
                }
            }
            *o = s;
        }
    }

    pub fn apply(&self, v: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(2 * self.b + 1, 2 * self.a + 1);
        self.add_into(v, 1.0, &mut m, 0, 0);
        m
    }
}

type EmbeddingCache = RwLock<HashMap<(usize, usize, usize), Arc<Embedding>>>;

static EMBEDDINGS: OnceLock<EmbeddingCache> = OnceLock::new();

/// Shared, lazily built ι_{a,b,l}.
pub fn embedding(a: usize, b: usize, l: usize) -> Result<Arc<Embedding>> {
    check_triangle(a, b, l)?;
    let map = EMBEDDINGS.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(e) = map
        .read()
        .expect("embedding cache poisoned")
        .get(&(a, b, l))
    {
        return Ok(e.clone());
    }
    let e = Arc::new(Embedding::build(a, b, l));
    map.write()
        .expect("embedding cache poisoned")
        .insert((a, b, l), e.clone());
    Ok(e)
}

/// (2b+1)×(2a+1) matrix mapping ℋ^(a) to ℋ^(b).
#[derive(Clone, Debug, PartialEq)]
pub struct MomentMatrix {
    pub a: usize,
    pub b: usize,
    pub data: DMatrix<f64>,
}

pub fn iota_embed(a: usize, b: usize, l: usize, v: &IrrepVec) -> Result<MomentMatrix> {
    if v.degree() != l {
        return Err(Error::ShapeMismatch(format!(
            "vector of degree {} embedded as degree {l}",
            v.degree()
        )));
    }
    let e = embedding(a, b, l)?;
    Ok(MomentMatrix {
        a,
        b,
        data: e.apply(v.coeffs()),
    })
}

/// ι_{a,b,l} of Σ over color-γ points of the (optionally radially weighted) Y_l.
pub fn moment_matrix(
    config: &ColoredConfig,
    color: usize,
    a: usize,
    b: usize,
    l: usize,
    radial: Option<(&RadialSpec, usize)>,
) -> Result<MomentMatrix> {
    check_triangle(a, b, l)?;
    config.check_color(color)?;
    let mut sum = vec![0.0; 2 * l + 1];
    for r in config.of_color(color) {
        match radial {
            None => {
                let h = crate::so3::harmonics_flat(r, l);
                for (s, v) in sum.iter_mut().zip(&h[l * l..]) {
                    *s += v;
                }
            }
            Some((spec, k)) => {
                let ch = point_channels(spec, r, l);
                let row = ch.channel(k);
                for (s, v) in sum.iter_mut().zip(&row[l * l..(l + 1) * (l + 1)]) {
                    *s += v;
                }
            }
        }
    }
    iota_embed(a, b, l, &IrrepVec::new(l, sum)?)
}

/// Ordered product factors[n-1] ··· factors[0]; factors[0] must have a = 0.
pub fn chain_product(factors: &[MomentMatrix]) -> Result<MomentMatrix> {
    let first = factors.first().ok_or(Error::EmptyChain)?;
    if first.a != 0 {
        return Err(Error::ShapeMismatch(format!(
            "chain must start from degree 0, got {}",
            first.a
        )));
    }
    let mut acc = first.clone();
    for f in &factors[1..] {
        if f.a != acc.b {
            return Err(Error::ShapeMismatch(format!(
                "factor maps from degree {} but chain is at {}",
                f.a, acc.b
            )));
        }
        acc = MomentMatrix {
            a: 0,
            b: f.b,
            data: &f.data * &acc.data,
        };
    }
    Ok(acc)
}

/// Degree partition of a square block matrix: each degree repeated `mult` times,
/// degree-major order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    degrees: Vec<usize>,
    mult: usize,
}

impl BlockLayout {
    pub fn new(degrees: Vec<usize>, mult: usize) -> Result<Self> {
        if mult == 0 || degrees.is_empty() {
            return Err(Error::InvalidArgument(
                "layout needs at least one degree and mult >= 1".into(),
            ));
        }
        if degrees.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument(
                "layout degrees must be nondecreasing".into(),
            ));
        }
        Ok(Self { degrees, mult })
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn mult(&self) -> usize {
        self.mult
    }

    pub fn n_pieces(&self) -> usize {
        self.degrees.len() * self.mult
    }

    /// Degree of piece p.
    pub fn piece_degree(&self, p: usize) -> usize {
        self.degrees[p / self.mult]
    }

    pub fn piece_offset(&self, p: usize) -> usize {
        let d = p / self.mult;
        let before: usize = self.degrees[..d]
            .iter()
            .map(|l| self.mult * (2 * l + 1))
            .sum();
        before + (p % self.mult) * (2 * self.degrees[d] + 1)
    }

    pub fn side(&self) -> usize {
        self.mult * self.degrees.iter().map(|l| 2 * l + 1).sum::<usize>()
    }

    /// Degree of every diagonal entry, used to build the block-diagonal action.
    pub fn piece_degrees(&self) -> Vec<usize> {
        (0..self.n_pieces()).map(|p| self.piece_degree(p)).collect()
    }

    pub fn max_degree(&self) -> usize {
        *self.degrees.last().expect("non-empty layout")
    }

    /// Square sub-blocks: pairs of pieces sharing a degree, ordered by degree then copies.
    pub fn square_blocks(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for d in 0..self.degrees.len() {
            for i in 0..self.mult {
                for j in 0..self.mult {
                    out.push((d * self.mult + i, d * self.mult + j));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    pub layout: BlockLayout,
    pub data: DMatrix<f64>,
    /// Set when `data` holds a product of (Id + A_i); traces then subtract the identity.
    pub shifted: bool,
}

impl BlockMatrix {
    pub fn zeros(layout: BlockLayout) -> Self {
        let k = layout.side();
        Self {
            layout,
            data: DMatrix::zeros(k, k),
            shifted: false,
        }
    }

    pub fn mul(&self, rhs: &BlockMatrix) -> Result<BlockMatrix> {
        if self.layout != rhs.layout {
            return Err(Error::ShapeMismatch("block layouts differ".into()));
        }
        Ok(BlockMatrix {
            layout: self.layout.clone(),
            data: &self.data * &rhs.data,
            shifted: self.shifted && rhs.shifted,
        })
    }
}

/// Weights of one block matrix: `w[(p, q)][l]` is the IrrepVec to embed for row
/// piece p and column piece q at degree l (already a linear combination of
/// fundamental features).
pub type BlockCoefficients = Vec<Vec<Vec<f64>>>;

/// Σ_l ι_{a,b,l}(f_{p,q,l}) per block (row piece p of degree b, column piece q of
/// degree a), plus Id when `shift_by_id`.
pub fn assemble_block(
    layout: &BlockLayout,
    coefficients: &BlockCoefficients,
    shift_by_id: bool,
) -> Result<BlockMatrix> {
    let n = layout.n_pieces();
    if coefficients.len() != n * n {
        return Err(Error::ShapeMismatch(format!(
            "expected {} blocks, got {}",
            n * n,
            coefficients.len()
        )));
    }
    let mut m = BlockMatrix::zeros(layout.clone());
    for p in 0..n {
        let b = layout.piece_degree(p);
        for q in 0..n {
            let a = layout.piece_degree(q);
            let per_l = &coefficients[p * n + q];
            let nl = a + b - a.abs_diff(b) + 1;
            if per_l.len() != nl {
                return Err(Error::ShapeMismatch(format!(
                    "block ({p},{q}) needs {nl} degrees, got {}",
                    per_l.len()
                )));
            }
            for (i, v) in per_l.iter().enumerate() {
                let l = a.abs_diff(b) + i;
                if v.len() != 2 * l + 1 {
                    return Err(Error::ShapeMismatch(format!(
                        "block ({p},{q}) degree {l} has {} entries",
                        v.len()
                    )));
                }
                embedding(a, b, l)?.add_into(
                    v,
                    1.0,
                    &mut m.data,
                    layout.piece_offset(p),
                    layout.piece_offset(q),
                );
            }
        }
    }
    if shift_by_id {
        for i in 0..m.data.nrows() {
            m.data[(i, i)] += 1.0;
        }
        m.shifted = true;
    }
    Ok(m)
}

/// Traces of all square sub-blocks (same degree, any pair of copies), minus the
/// identity contribution on diagonal copies when the matrix is shifted.
pub fn block_traces(m: &BlockMatrix) -> Vec<f64> {
    let layout = &m.layout;
    layout
        .square_blocks()
        .into_iter()
        .map(|(p, q)| {
            let (r, c) = (layout.piece_offset(p), layout.piece_offset(q));
            let n = 2 * layout.piece_degree(p) + 1;
            let t: f64 = (0..n).map(|i| m.data[(r + i, c + i)]).sum();
            if m.shifted && p == q {
                t - n as f64
            } else {
                t
            }
        })
        .collect()
}

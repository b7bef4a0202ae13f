use nalgebra::{DMatrix, Matrix3, Rotation3, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use super::generators::generators;
use crate::error::{Error, Result};

/// Element of O(3): a proper rotation and a parity flag (-1 composes with -Id).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation {
    matrix: Matrix3<f64>,
    parity: i8,
}

impl Rotation {
    /// Accepts any orthogonal matrix; improper ones are split into parity and a proper part.
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let dev = (m.transpose() * m - Matrix3::identity()).amax();
        if !dev.is_finite() || dev > 1e-10 {
            return Err(Error::NonOrthogonalRotation(dev));
        }
        if m.determinant() > 0.0 {
            Ok(Self {
                matrix: m,
                parity: 1,
            })
        } else {
            Ok(Self {
                matrix: -m,
                parity: -1,
            })
        }
    }

    pub fn identity() -> Self {
        Self {
            matrix: Matrix3::identity(),
            parity: 1,
        }
    }

    /// Point reflection -Id.
    pub fn inversion() -> Self {
        Self {
            matrix: Matrix3::identity(),
            parity: -1,
        }
    }

    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(Vector3::from(axis));
        Self {
            matrix: *Rotation3::from_axis_angle(&axis, angle).matrix(),
            parity: 1,
        }
    }

    /// Haar-uniform proper rotation.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
        Self {
            matrix: *q.to_rotation_matrix().matrix(),
            parity: 1,
        }
    }

    pub fn with_parity(mut self, parity: i8) -> Self {
        self.parity = if parity < 0 {
            -self.parity
        } else {
            self.parity
        };
        self
    }

    pub fn proper_part(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn parity(&self) -> i8 {
        self.parity
    }

    /// parity · matrix.
    pub fn full_matrix(&self) -> Matrix3<f64> {
        self.matrix * f64::from(self.parity)
    }

    pub fn apply(&self, r: [f64; 3]) -> [f64; 3] {
        let v = self.full_matrix() * Vector3::from(r);
        [v.x, v.y, v.z]
    }

    /// self ∘ other.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            matrix: self.matrix * other.matrix,
            parity: self.parity * other.parity,
        }
    }

    /// (unit axis, angle) of the proper part.
    pub fn axis_angle(&self) -> ([f64; 3], f64) {
        let rot = Rotation3::from_matrix_unchecked(self.matrix);
        let q = UnitQuaternion::from_rotation_matrix(&rot);
        match q.axis_angle() {
            Some((axis, angle)) => ([axis.x, axis.y, axis.z], angle),
            None => ([1.0, 0.0, 0.0], 0.0),
        }
    }
}

/// ρ_l(g) = (parity)^l exp(θ Σ n_k L_k).
pub fn wigner_real(l: usize, g: &Rotation) -> DMatrix<f64> {
    let (axis, angle) = g.axis_angle();
    let rho = if angle == 0.0 {
        DMatrix::identity(2 * l + 1, 2 * l + 1)
    } else {
        (generators(l).along(axis) * angle).exp()
    };
    if g.parity < 0 && l % 2 == 1 {
        -rho
    } else {
        rho
    }
}

/// Block-diagonal action on several degrees.
pub fn wigner_block_diag(degrees: &[usize], g: &Rotation) -> DMatrix<f64> {
    let k: usize = degrees.iter().map(|l| 2 * l + 1).sum();
    let mut out = DMatrix::zeros(k, k);
    let mut at = 0;
    let mut cache: Vec<Option<DMatrix<f64>>> =
        vec![None; degrees.iter().max().map_or(0, |m| m + 1)];
    for &l in degrees {
        let rho = cache[l].get_or_insert_with(|| wigner_real(l, g));
        out.view_mut((at, at), (2 * l + 1, 2 * l + 1))
            .copy_from(rho);
        at += 2 * l + 1;
    }
    out
}

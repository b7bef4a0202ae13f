#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_point<R: Rng>(rng: &mut R) -> [f64; 3] {
    std::array::from_fn(|_| rng.random_range(-1.5..1.5))
}

/// Reference 3×3 moment matrices M_{1,1,l} of a single point.
pub fn reference_3x3(l: usize, r: [f64; 3]) -> DMatrix<f64> {
    let [x, y, z] = r;
    let v: [f64; 9] = match l {
        0 => [1., 0., 0., 0., 1., 0., 0., 0., 1.],
        1 => [0., -z, y, z, 0., -x, -y, x, 0.],
        2 => [
            (2. * x * x - y * y - z * z) / 3.,
            x * y,
            x * z,
            x * y,
            (2. * y * y - x * x - z * z) / 3.,
            y * z,
            x * z,
            y * z,
            (2. * z * z - x * x - y * y) / 3.,
        ],
        _ => panic!("no 3x3 reference for degree {l}"),
    };
    DMatrix::from_row_slice(3, 3, &v)
}

fn sym(upper: [[f64; 5]; 5], diag: [f64; 5]) -> DMatrix<f64> {
    DMatrix::from_fn(5, 5, |i, j| {
        if i == j {
            diag[i]
        } else if i < j {
            upper[i][j]
        } else {
            upper[j][i]
        }
    })
}

fn antisym(upper: [[f64; 5]; 5]) -> DMatrix<f64> {
    DMatrix::from_fn(5, 5, |i, j| {
        if i < j {
            upper[i][j]
        } else if i > j {
            -upper[j][i]
        } else {
            0.0
        }
    })
}

/// Reference 5×5 moment matrices M_{2,2,l} of a single point.
pub fn reference_5x5(l: usize, p: [f64; 3]) -> DMatrix<f64> {
    let [x, y, z] = p;
    let s3 = 3f64.sqrt();
    let r2 = x * x + y * y + z * z;
    match l {
        0 => DMatrix::identity(5, 5),
        1 => DMatrix::from_row_slice(
            5,
            5,
            &[
                0.,
                2. * x,
                z,
                -y,
                0.,
                -2. * x,
                0.,
                y,
                z,
                0.,
                -z,
                -y,
                0.,
                x,
                -s3 * y,
                y,
                -z,
                -x,
                0.,
                s3 * z,
                0.,
                0.,
                s3 * y,
                -s3 * z,
                0.,
            ],
        ),
        2 => sym(
            [
                [0., 0., 3. * x * y, 3. * x * z, -2. * s3 * y * z],
                [0., 0., -3. * x * z, 3. * x * y, s3 * (z * z - y * y)],
                [0., 0., 0., 3. * y * z, s3 * x * z],
                [0., 0., 0., 0., s3 * x * y],
                [0.; 5],
            ],
            [
                -2. * x * x + y * y + z * z,
                -2. * x * x + y * y + z * z,
                x * x - 2. * y * y + z * z,
                x * x + y * y - 2. * z * z,
                2. * x * x - y * y - z * z,
            ],
        ),
        3 => antisym([
            [
                0.,
                3. * r2 * x - 5. * x.powi(3),
                10. * z.powi(3) - 6. * r2 * z,
                6. * x * x * y - 4. * y.powi(3) + 6. * y * z * z,
                5. * s3 * (x * z * z - x * y * y),
            ],
            [
                0.,
                0.,
                -6. * x * x * y - y.powi(3) + 9. * y * z * z,
                -6. * x * x * z + 9. * y * y * z - z.powi(3),
                10. * s3 * x * y * z,
            ],
            [
                0.,
                0.,
                0.,
                10. * x.powi(3) - 6. * r2 * x,
                s3 * (r2 * y - 5. * x * x * y),
            ],
            [0., 0., 0., 0., -s3 * (r2 * z - 5. * x * x * z)],
            [0.; 5],
        ]),
        4 => sym(
            [
                [
                    0.,
                    70. * y * z * (y * y - z * z),
                    -20. * x * y * (r2 - 7. * z * z),
                    -20. * x * z * (r2 - 7. * y * y),
                    -10. * s3 * y * z * (r2 - 7. * x * x),
                ],
                [
                    0.,
                    0.,
                    10. * x * z * (2. * x * x + 9. * y * y - 5. * z * z),
                    -10. * x * y * (2. * x * x - 5. * y * y + 9. * z * z),
                    5. * s3 * (6. * x * x * (y * y - z * z) - y.powi(4) + z.powi(4)),
                ],
                [
                    0.,
                    0.,
                    0.,
                    -20. * y * z * (r2 - 7. * x * x),
                    10. * s3 * x * z * (7. * x * x - 3. * r2),
                ],
                [0., 0., 0., 0., 10. * s3 * x * y * (7. * x * x - 3. * r2)],
                [0.; 5],
            ],
            [
                4. * x.powi(4) - 12. * x * x * y * y - 12. * x * x * z * z - 16. * y.powi(4)
                    + 108. * y * y * z * z
                    - 16. * z.powi(4),
                4. * x.powi(4) - 12. * x * x * y * y - 12. * x * x * z * z + 19. * y.powi(4)
                    - 102. * y * y * z * z
                    + 19. * z.powi(4),
                -16. * x.powi(4) - 12. * x * x * y * y + 108. * x * x * z * z + 4. * y.powi(4)
                    - 12. * y * y * z * z
                    - 16. * z.powi(4),
                -16. * x.powi(4) + 108. * x * x * y * y
                    - 12. * x * x * z * z
                    - 16. * y.powi(4)
                    - 12. * y * y * z * z
                    + 4. * z.powi(4),
                24. * x.powi(4) - 72. * x * x * y * y - 72. * x * x * z * z
                    + 9. * y.powi(4)
                    + 18. * y * y * z * z
                    + 9. * z.powi(4),
            ],
        ),
        _ => panic!("no 5x5 reference for degree {l}"),
    }
}

//! Real irreducible representations of SO(3) and O(3).

pub mod cg;
pub mod generators;
pub mod harmonics;
pub mod wigner;

pub use cg::{build_cg_table, cg_product, CgTable};
pub use generators::{generators, GeneratorSet};
pub use harmonics::{harmonics_flat, harmonics_with_grad, spherical_harmonics};
pub use wigner::{wigner_real, Rotation};

use crate::error::{Error, Result};

/// Coefficients of one vector in the degree-l irrep, length 2l+1.
#[derive(Clone, Debug, PartialEq)]
pub struct IrrepVec {
    l: usize,
    coeffs: Vec<f64>,
}

impl IrrepVec {
    pub fn new(l: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != 2 * l + 1 {
            return Err(Error::ShapeMismatch(format!(
                "degree {l} needs {} coefficients, got {}",
                2 * l + 1,
                coeffs.len()
            )));
        }
        Ok(Self { l, coeffs })
    }

    pub fn zeros(l: usize) -> Self {
        Self {
            l,
            coeffs: vec![0.0; 2 * l + 1],
        }
    }

    pub fn degree(&self) -> usize {
        self.l
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }
}

pub(crate) fn check_triangle(l1: usize, l2: usize, l3: usize) -> Result<()> {
    if l3 < l1.abs_diff(l2) || l3 > l1 + l2 {
        return Err(Error::TriangleViolation(l1, l2, l3));
    }
    Ok(())
}

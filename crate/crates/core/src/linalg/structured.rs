use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    Hermitian,
    RealSymmetric,
    RealSkew,
}

#[derive(Clone, Debug)]
pub enum MatrixData {
    Complex(Array2<C64>),
    Real(Array2<f64>),
}

/// Dense square matrix projected onto its declared structure. The
/// projection distance of the raw input is kept as `violation`.
#[derive(Clone, Debug)]
pub struct StructuredMatrix {
    structure: Structure,
    data: MatrixData,
    violation: f64,
}

impl StructuredMatrix {
    pub fn new(m: Array2<C64>, structure: Structure) -> Result<Self> {
        let (r, c) = m.dim();
        if r != c {
            return Err(LabError::Dimension(format!("matrix is {r}×{c}, not square")));
        }
        // projections are done in place; localizers can fill most of memory
        let (data, projected_diff) = match structure {
            Structure::Hermitian => {
                let mut m = m;
                let mut diff = 0.0_f64;
                for i in 0..r {
                    for j in i..r {
                        let avg = 0.5 * (m[[i, j]] + m[[j, i]].conj());
                        diff = diff.max((m[[i, j]] - avg).norm()).max((m[[j, i]] - avg.conj()).norm());
                        m[[i, j]] = avg;
                        m[[j, i]] = avg.conj();
                    }
                }
                (MatrixData::Complex(m), diff)
            }
            Structure::RealSymmetric | Structure::RealSkew => {
                let sgn = if structure == Structure::RealSkew { -1.0 } else { 1.0 };
                let mut p = Array2::<f64>::zeros((r, r));
                let mut diff = 0.0_f64;
                for i in 0..r {
                    for j in i..r {
                        let avg = 0.5 * (m[[i, j]].re + sgn * m[[j, i]].re);
                        diff = diff.max((m[[i, j]] - avg).norm()).max((m[[j, i]] - sgn * avg).norm());
                        p[[i, j]] = avg;
                        p[[j, i]] = sgn * avg;
                    }
                }
                (MatrixData::Real(p), diff)
            }
        };
        Ok(Self { structure, data, violation: projected_diff })
    }

    pub fn from_real(m: Array2<f64>, structure: Structure) -> Result<Self> {
        Self::new(m.mapv(|x| C64::new(x, 0.0)), structure)
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn dim(&self) -> usize {
        match &self.data {
            MatrixData::Complex(m) => m.nrows(),
            MatrixData::Real(m) => m.nrows(),
        }
    }

    /// Max entrywise distance between the raw input and its projection.
    pub fn violation(&self) -> f64 {
        self.violation
    }

    pub fn data(&self) -> &MatrixData {
        &self.data
    }

    pub fn to_complex(&self) -> Array2<C64> {
        match &self.data {
            MatrixData::Complex(m) => m.clone(),
            MatrixData::Real(m) => m.mapv(|x| C64::new(x, 0.0)),
        }
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        if self.violation > tol {
            return Err(LabError::Structure(format!(
                "{:?} structure violated by {:.3e} (tolerance {tol:.1e})",
                self.structure, self.violation
            )));
        }
        Ok(())
    }
}

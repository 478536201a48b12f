use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Real,
    Simulated,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Real => "real",
            Provenance::Simulated => "simulated",
        }
    }
}

/// Labeled samples with per-row provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: DMatrix<f64>,
    targets: DVector<f64>,
    provenance: Vec<Provenance>,
}

impl Dataset {
    pub fn new(inputs: DMatrix<f64>, targets: DVector<f64>, provenance: Vec<Provenance>) -> Result<Self> {
        let n = inputs.nrows();
        if n == 0 {
            return Err(Error::input("dataset needs at least one row"));
        }
        if targets.len() != n || provenance.len() != n {
            return Err(Error::input(format!(
                "row count mismatch: inputs {n}, targets {}, provenance {}",
                targets.len(),
                provenance.len()
            )));
        }
        if inputs.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::input("dataset contains NaN or infinite entries"));
        }
        Ok(Self {
            inputs,
            targets,
            provenance,
        })
    }

    /// All rows share one provenance tag.
    pub fn uniform(inputs: DMatrix<f64>, targets: DVector<f64>, tag: Provenance) -> Result<Self> {
        let n = inputs.nrows();
        Self::new(inputs, targets, vec![tag; n])
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn select(&self, rows: &[usize]) -> Result<Dataset> {
        if rows.is_empty() {
            return Err(Error::input("selection is empty"));
        }
        let inputs = self.inputs.select_rows(rows);
        let targets = self.targets.select_rows(rows);
        let provenance = rows.iter().map(|&i| self.provenance[i]).collect();
        Dataset::new(inputs, targets, provenance)
    }

    /// Row-wise concatenation.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.dim() != other.dim() {
            return Err(Error::input(format!(
                "cannot stack datasets with {} and {} columns",
                self.dim(),
                other.dim()
            )));
        }
        let n = self.len() + other.len();
        let d = self.dim();
        let mut inputs = DMatrix::zeros(n, d);
        inputs.rows_mut(0, self.len()).copy_from(&self.inputs);
        inputs.rows_mut(self.len(), other.len()).copy_from(&other.inputs);
        let targets = DVector::from_iterator(n, self.targets.iter().chain(other.targets.iter()).copied());
        let mut provenance = self.provenance.clone();
        provenance.extend_from_slice(&other.provenance);
        Dataset::new(inputs, targets, provenance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatch_and_nan() {
        let x = DMatrix::zeros(3, 2);
        assert!(Dataset::new(x.clone(), DVector::zeros(2), vec![Provenance::Real; 3]).is_err());
        let mut y = DVector::zeros(3);
        y[1] = f64::NAN;
        assert!(Dataset::uniform(x.clone(), y, Provenance::Real).is_err());
        assert!(Dataset::uniform(DMatrix::zeros(0, 2), DVector::zeros(0), Provenance::Real).is_err());
    }

    #[test]
    fn concat_keeps_provenance_order() {
        let a = Dataset::uniform(DMatrix::from_element(2, 1, 1.0), DVector::from_element(2, 1.0), Provenance::Real).unwrap();
        let b = Dataset::uniform(DMatrix::from_element(1, 1, 2.0), DVector::from_element(1, 2.0), Provenance::Simulated)
            .unwrap();
        let c = a.concat(&b).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.provenance(), &[Provenance::Real, Provenance::Real, Provenance::Simulated]);
        assert_eq!(c.inputs()[(2, 0)], 2.0);
    }
}

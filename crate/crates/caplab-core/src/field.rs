//! Real-valued functions on the points of a space.

use crate::error::{Error, Result};
use crate::space::{FiniteMetricMeasureSpace, PointSet};

/// One real value per point, with optional Holder metadata carried along for
/// cutoff functions (`beta` the exponent, `kappa` the constant).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FieldVector {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

impl FieldVector {
    /// Wraps raw values, rejecting non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite field value {v}")));
        }
        Ok(FieldVector { values, beta: None, kappa: None })
    }

    pub fn zeros(n: usize) -> Self {
        FieldVector { values: vec![0.0; n], beta: None, kappa: None }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        FieldVector { values: vec![c; n], beta: None, kappa: None }
    }

    /// Indicator function of a point set.
    pub fn indicator(set: &PointSet, n: usize) -> Self {
        let mut values = vec![0.0; n];
        for i in set.iter() {
            if i < n {
                values[i] = 1.0;
            }
        }
        FieldVector { values, beta: None, kappa: None }
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> f64) -> Result<Self> {
        Self::new((0..n).map(f).collect())
    }

    pub fn with_holder(mut self, beta: f64, kappa: f64) -> Self {
        self.beta = Some(beta);
        self.kappa = Some(kappa);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Errors unless the length matches the space's point count.
    pub fn check_len(&self, space: &FiniteMetricMeasureSpace, name: &str) -> Result<()> {
        if self.values.len() != space.len() {
            return Err(Error::InvalidInput(format!(
                "field {name} has {} values for a space of {} points",
                self.values.len(),
                space.len()
            )));
        }
        Ok(())
    }

    /// Errors on any negative entry.
    pub fn check_nonnegative(&self, name: &str) -> Result<()> {
        if let Some((i, v)) = self.values.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::InvalidInput(format!("field {name} has negative entry {v} at point {i}")));
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for FieldVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(FieldVector::new(vec![0.0, f64::NAN]).is_err());
        assert!(FieldVector::new(vec![0.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn indicator_marks_members() {
        let set = PointSet::new(vec![0, 2]);
        let f = FieldVector::indicator(&set, 4);
        assert_eq!(f.values, vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn serde_roundtrip_with_metadata() {
        let f = FieldVector::new(vec![1.0, 2.0]).unwrap().with_holder(0.5, 3.0);
        let s = serde_json::to_string(&f).unwrap();
        let back: FieldVector = serde_json::from_str(&s).unwrap();
        assert_eq!(f, back);
        let plain = serde_json::to_string(&FieldVector::zeros(1)).unwrap();
        assert!(!plain.contains("beta"));
    }
}

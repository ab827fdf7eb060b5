//! Flat parameter vectors with named slices.
//!
//! Models address their parameters symbolically ("mean", "log_var",
//! "weights", ...) while the estimators and the optimizer treat the whole
//! vector as one flat `&[f64]`. A [`ParamLayout`] maps names to contiguous
//! disjoint slices covering the vector; layouts are built once per model and
//! shared via `Arc`.

use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("unknown parameter slice \"{0}\"")]
    UnknownSlice(String),
    #[error("parameter slice \"{0}\" is not scalar")]
    NotScalar(String),
    #[error("value vector has length {got}, layout expects {expected}")]
    WrongLength { expected: usize, got: usize },
}

/// Names, offsets and lengths of the slices of a parameter vector.
///
/// Slices are appended contiguously by the builder, so by construction they
/// are disjoint and cover `0..len()` exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    slices: Vec<(String, usize, usize)>,
    total: usize,
}

impl ParamLayout {
    pub fn builder() -> ParamLayoutBuilder {
        ParamLayoutBuilder { slices: Vec::new(), total: 0 }
    }

    /// Total number of scalar parameters.
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// (offset, length) of a named slice.
    pub fn slice(&self, name: &str) -> Option<(usize, usize)> {
        self.slices
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|&(_, off, len)| (off, len))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slices.iter().map(|(n, _, _)| n.as_str())
    }

    /// Iterate (name, offset, length) in declaration order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, usize, usize)> {
        self.slices.iter().map(|(n, o, l)| (n.as_str(), *o, *l))
    }
}

pub struct ParamLayoutBuilder {
    slices: Vec<(String, usize, usize)>,
    total: usize,
}

impl ParamLayoutBuilder {
    /// Append a named slice of `len` scalars. Panics on duplicate names or
    /// zero-length slices (programmer errors, caught at model definition).
    pub fn slice(mut self, name: &str, len: usize) -> Self {
        assert!(len > 0, "zero-length parameter slice \"{name}\"");
        assert!(
            self.slices.iter().all(|(n, _, _)| n != name),
            "duplicate parameter slice \"{name}\""
        );
        self.slices.push((name.to_string(), self.total, len));
        self.total += len;
        self
    }

    pub fn build(self) -> Arc<ParamLayout> {
        Arc::new(ParamLayout { slices: self.slices, total: self.total })
    }
}

/// A parameter vector tied to a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    layout: Arc<ParamLayout>,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(layout: Arc<ParamLayout>) -> Self {
        let values = vec![0.0; layout.len()];
        Self { layout, values }
    }

    pub fn from_values(layout: Arc<ParamLayout>, values: Vec<f64>) -> Result<Self, ParamError> {
        if values.len() != layout.len() {
            return Err(ParamError::WrongLength { expected: layout.len(), got: values.len() });
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, name: &str) -> Result<&[f64], ParamError> {
        let (off, len) = self
            .layout
            .slice(name)
            .ok_or_else(|| ParamError::UnknownSlice(name.to_string()))?;
        Ok(&self.values[off..off + len])
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut [f64], ParamError> {
        let (off, len) = self
            .layout
            .slice(name)
            .ok_or_else(|| ParamError::UnknownSlice(name.to_string()))?;
        Ok(&mut self.values[off..off + len])
    }

    /// Value of a length-1 slice.
    pub fn scalar(&self, name: &str) -> Result<f64, ParamError> {
        let s = self.get(name)?;
        if s.len() != 1 {
            return Err(ParamError::NotScalar(name.to_string()));
        }
        Ok(s[0])
    }

    pub fn set_scalar(&mut self, name: &str, value: f64) -> Result<(), ParamError> {
        let s = self.get_mut(name)?;
        if s.len() != 1 {
            return Err(ParamError::NotScalar(name.to_string()));
        }
        s[0] = value;
        Ok(())
    }

    /// True iff every entry is finite (no NaN/inf). A false value after an
    /// optimizer update is a detected error state, not a silent NaN source.
    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// self + scale * direction, as a new vector.
    pub fn perturbed(&self, scale: f64, direction: &[f64]) -> ParamVector {
        assert_eq!(direction.len(), self.values.len());
        let values = self
            .values
            .iter()
            .zip(direction)
            .map(|(v, d)| v + scale * d)
            .collect();
        Self { layout: Arc::clone(&self.layout), values }
    }
}

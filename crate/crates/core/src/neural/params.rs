use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// One named, row-major parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl ParamArray {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            data: alloc::vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Ordered list of named arrays. Gradients and optimizer moments use the
/// same type with identical layout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Parameters {
    arrays: Vec<ParamArray>,
}

impl Parameters {
    pub fn new(arrays: Vec<ParamArray>) -> Self {
        Self { arrays }
    }

    pub fn zeros_like(other: &Parameters) -> Self {
        Self {
            arrays: other
                .arrays
                .iter()
                .map(|a| ParamArray::zeros(a.name.clone(), &a.shape))
                .collect(),
        }
    }

    pub fn arrays(&self) -> &[ParamArray] {
        &self.arrays
    }

    pub fn arrays_mut(&mut self) -> &mut [ParamArray] {
        &mut self.arrays
    }

    pub fn get(&self, name: &str) -> Option<&ParamArray> {
        self.arrays.iter().find(|a| a.name == name)
    }

    /// Total number of scalar coordinates.
    pub fn count(&self) -> usize {
        self.arrays.iter().map(ParamArray::len).sum()
    }

    /// Coordinate `k` in declaration order.
    pub fn coord(&self, mut k: usize) -> f64 {
        for a in &self.arrays {
            if k < a.len() {
                return a.data[k];
            }
            k -= a.len();
        }
        panic!("coordinate out of range");
    }

    pub fn coord_mut(&mut self, mut k: usize) -> &mut f64 {
        for a in &mut self.arrays {
            if k < a.len() {
                return &mut a.data[k];
            }
            k -= a.len();
        }
        panic!("coordinate out of range");
    }

    /// Errors unless names and shapes agree array by array.
    pub fn check_layout(&self, other: &Parameters) -> Result<()> {
        if self.arrays.len() != other.arrays.len() {
            return Err(Error::Shape(alloc::format!(
                "expected {} parameter arrays, found {}",
                self.arrays.len(),
                other.arrays.len()
            )));
        }
        for (a, b) in self.arrays.iter().zip(&other.arrays) {
            if a.name != b.name || a.shape != b.shape || b.data.len() != b.shape.iter().product::<usize>() {
                return Err(Error::Shape(alloc::format!(
                    "parameter `{}` {:?} does not match `{}` {:?}",
                    b.name,
                    b.shape,
                    a.name,
                    a.shape
                )));
            }
        }
        Ok(())
    }

    pub fn fill(&mut self, value: f64) {
        for a in &mut self.arrays {
            a.data.iter_mut().for_each(|x| *x = value);
        }
    }

    /// `self += scale * other`; layouts must agree.
    pub fn add_scaled(&mut self, other: &Parameters, scale: f64) {
        for (a, b) in self.arrays.iter_mut().zip(&other.arrays) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += scale * y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.arrays.iter().all(|a| a.data.iter().all(|x| x.is_finite()))
    }
}

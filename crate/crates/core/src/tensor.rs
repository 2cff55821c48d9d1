//! Dense row-major `f64` tensors of rank 1 to 4.
//!
//! Images are stored as `[channels, height, width]` and batches prepend a
//! batch extent. There is no broadcasting: every elementwise combination
//! requires identical shapes.

use crate::error::{Error, Result};

pub const MAX_RANK: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.len() > MAX_RANK {
        return Err(Error::InvalidShape(format!(
            "rank must be 1..={MAX_RANK}, got {}",
            shape.len()
        )));
    }
    if shape.contains(&0) {
        return Err(Error::InvalidShape(format!("zero extent in {shape:?}")));
    }
    Ok(shape.iter().product())
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            values: vec![0.0; len],
        })
    }

    pub fn filled(shape: &[usize], value: f64) -> Result<Self> {
        let mut t = Self::zeros(shape)?;
        t.values.fill(value);
        Ok(t)
    }

    pub fn from_values(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let len = check_shape(shape)?;
        if len != values.len() {
            return Err(Error::InvalidShape(format!(
                "shape {shape:?} holds {len} values, got {}",
                values.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            values,
        })
    }

    /// Builds a tensor whose shape is already known to be valid.
    pub(crate) fn from_parts(shape: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Self { shape, values }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
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

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Row-major flat offset of `coords`.
    pub fn offset(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.shape.len()
            || coords.iter().zip(&self.shape).any(|(c, e)| c >= e)
        {
            return Err(Error::Index {
                coords: coords.to_vec(),
                shape: self.shape.clone(),
            });
        }
        Ok(coords
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (c, e)| acc * e + c))
    }

    /// Inverse of [`Tensor::offset`].
    pub fn unflatten(&self, mut offset: usize) -> Result<Vec<usize>> {
        if offset >= self.values.len() {
            return Err(Error::Index {
                coords: vec![offset],
                shape: self.shape.clone(),
            });
        }
        let mut coords = vec![0; self.shape.len()];
        for (c, e) in coords.iter_mut().zip(&self.shape).rev() {
            *c = offset % e;
            offset /= e;
        }
        Ok(coords)
    }

    pub fn at(&self, coords: &[usize]) -> Result<f64> {
        Ok(self.values[self.offset(coords)?])
    }

    pub fn set(&mut self, coords: &[usize], value: f64) -> Result<()> {
        let i = self.offset(coords)?;
        self.values[i] = value;
        Ok(())
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::from_values(shape, self.values)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Euclidean inner product of two equally shaped tensors.
    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        self.require_same_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.require_same_shape(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::from_parts(self.shape.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn require_same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    /// Splits a leading batch axis off, returning `[B, ...]` items.
    pub fn unstack(&self) -> Result<Vec<Tensor>> {
        if self.rank() < 2 {
            return Err(Error::Shape(format!(
                "cannot unstack rank-{} tensor",
                self.rank()
            )));
        }
        let item_shape = self.shape[1..].to_vec();
        let item_len: usize = item_shape.iter().product();
        Ok(self
            .values
            .chunks(item_len)
            .map(|c| Tensor::from_parts(item_shape.clone(), c.to_vec()))
            .collect())
    }

    /// Stacks equally shaped tensors along a new leading axis.
    pub fn stack(items: &[Tensor]) -> Result<Tensor> {
        let first = items.first().ok_or(Error::EmptyDataset)?;
        let mut shape = vec![items.len()];
        shape.extend_from_slice(first.shape());
        check_shape(&shape)?;
        let mut values = Vec::with_capacity(first.len() * items.len());
        for t in items {
            first.require_same_shape(t)?;
            values.extend_from_slice(&t.values);
        }
        Ok(Tensor::from_parts(shape, values))
    }

    /// Interprets a rank-3 tensor as `(channels, height, width)`.
    pub fn chw(&self) -> Result<(usize, usize, usize)> {
        match *self.shape.as_slice() {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::Shape(format!(
                "expected [C,H,W], got {:?}",
                self.shape
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zeros_has_requested_shape() {
        let t = Tensor::zeros(&[2, 2]).unwrap();
        assert_eq!(t.values(), &[0.0; 4]);
        assert_eq!(Tensor::zeros(&[1]).unwrap().values(), &[0.0]);
        let t = Tensor::zeros(&[3, 1, 4]).unwrap();
        assert_eq!(t.shape(), &[3, 1, 4]);
        assert_eq!(t.len(), 12);
        assert_eq!(t.sum(), 0.0);
    }

    #[test]
    fn zeros_rejects_bad_shapes() {
        assert!(matches!(Tensor::zeros(&[]), Err(Error::InvalidShape(_))));
        assert!(matches!(Tensor::zeros(&[2, 0]), Err(Error::InvalidShape(_))));
        assert!(matches!(
            Tensor::zeros(&[1, 1, 1, 1, 1]),
            Err(Error::InvalidShape(_))
        ));
    }

    #[test]
    fn from_values_is_row_major() {
        let t = Tensor::from_values(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.at(&[1, 0]).unwrap(), 3.0);
        assert_eq!(t.at(&[0, 1]).unwrap(), 2.0);
        let t = Tensor::from_values(&[1, 1], vec![5.0]).unwrap();
        assert_eq!(t.at(&[0, 0]).unwrap(), 5.0);
        assert!(matches!(
            Tensor::from_values(&[2, 3], vec![0.0; 5]),
            Err(Error::InvalidShape(_))
        ));
    }

    #[test]
    fn out_of_range_index_is_an_error() {
        let t = Tensor::zeros(&[4, 4]).unwrap();
        assert_eq!(t.at(&[2, 2]).unwrap(), 0.0);
        let t = Tensor::zeros(&[2, 2]).unwrap();
        assert!(matches!(t.at(&[5, 0]), Err(Error::Index { .. })));
        assert!(matches!(t.at(&[0]), Err(Error::Index { .. })));
    }

    #[test]
    fn elementwise_ops_require_identical_shapes() {
        let mut a = Tensor::zeros(&[2, 3]).unwrap();
        let b = Tensor::zeros(&[3, 2]).unwrap();
        assert!(a.add_assign(&b).is_err());
        assert!(a.dot(&b).is_err());
    }

    fn shape_strategy() -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(1usize..5, 1..=4)
    }

    proptest! {
        #[test]
        fn round_trip_through_unflatten(shape in shape_strategy(), seed in any::<u64>()) {
            let n: usize = shape.iter().product();
            let values: Vec<f64> = (0..n).map(|i| (i as f64) * 0.5 + seed as f64 * 1e-9).collect();
            let t = Tensor::from_values(&shape, values.clone()).unwrap();
            for (i, v) in values.iter().enumerate() {
                let coords = t.unflatten(i).unwrap();
                prop_assert_eq!(t.offset(&coords).unwrap(), i);
                prop_assert_eq!(t.at(&coords).unwrap(), *v);
            }
            prop_assert_eq!(t.shape(), shape.as_slice());
        }
    }
}

use std::collections::BTreeMap;

use crate::error::{shape_err, Error, Result};
use crate::linalg::DenseMatrix;

/// Shaped block of `f64`. Rank 0 holds a single scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(shape_err("Tensor::new", format!("{len} values for {shape:?}"), data.len()));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![],
            data: vec![v],
        }
    }

    pub fn vector(v: &[f64]) -> Self {
        Self {
            shape: vec![v.len()],
            data: v.to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn as_scalar(&self) -> Result<f64> {
        if self.data.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(shape_err("Tensor::as_scalar", "one value", self.data.len()))
        }
    }

    pub fn to_matrix(&self) -> Result<DenseMatrix> {
        match self.shape.as_slice() {
            &[r, c] => DenseMatrix::new(r, c, self.data.clone()),
            other => Err(shape_err("Tensor::to_matrix", "rank 2", format!("{other:?}"))),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl From<&DenseMatrix> for Tensor {
    fn from(m: &DenseMatrix) -> Self {
        Self {
            shape: vec![m.rows(), m.cols()],
            data: m.data().to_vec(),
        }
    }
}

/// Named gradients, keyed like the parameters they belong to.
pub type Gradients = BTreeMap<String, Tensor>;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Slot {
    pub name: String,
    pub value: Tensor,
    pub m: Tensor,
    pub v: Tensor,
}

/// Insertion-ordered parameter registry with Adam moment buffers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    pub(crate) slots: Vec<Slot>,
    pub(crate) step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter with zeroed moments.
    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<()> {
        if name.is_empty() || name == "step" || name.ends_with(".m") || name.ends_with(".v") {
            return Err(Error::InvalidArgument(format!("reserved parameter name `{name}`")));
        }
        if self.position(name).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate parameter `{name}`")));
        }
        let zeros = Tensor::zeros(value.shape());
        self.slots.push(Slot {
            name: name.to_owned(),
            m: zeros.clone(),
            v: zeros,
            value,
        });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.position(name)
            .map(|i| &self.slots[i].value)
            .ok_or_else(|| Error::UnknownParameter(name.to_owned()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        match self.position(name) {
            Some(i) => Ok(&mut self.slots[i].value),
            None => Err(Error::UnknownParameter(name.to_owned())),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    /// Replaces a parameter's value, keeping its moments.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let t = self.get_mut(name)?;
        if t.shape() != value.shape() {
            return Err(shape_err("ParamStore::set", format!("{:?}", t.shape()), format!("{:?}", value.shape())));
        }
        *t = value;
        Ok(())
    }

    pub fn moments(&self, name: &str) -> Result<(&Tensor, &Tensor)> {
        self.position(name)
            .map(|i| (&self.slots[i].m, &self.slots[i].v))
            .ok_or_else(|| Error::UnknownParameter(name.to_owned()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().map(|s| s.name.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.slots.iter().map(|s| (s.name.as_str(), &s.value))
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn num_scalars(&self) -> usize {
        self.slots.iter().map(|s| s.value.len()).sum()
    }

    fn position(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_and_lookup() {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::zeros(&[2, 3])).unwrap();
        s.insert("eta", Tensor::scalar(1.0)).unwrap();
        assert_eq!(s.names().collect::<Vec<_>>(), ["w", "eta"]);
        assert_eq!(s.get("eta").unwrap().as_scalar().unwrap(), 1.0);
        assert!(s.insert("w", Tensor::scalar(0.0)).is_err());
        assert!(s.insert("w.m", Tensor::scalar(0.0)).is_err());
        assert!(s.insert("step", Tensor::scalar(0.0)).is_err());
        assert!(matches!(s.get("nope"), Err(Error::UnknownParameter(_))));
        assert!(s.set("w", Tensor::zeros(&[3, 2])).is_err());
        assert_eq!(s.num_scalars(), 7);
    }

    #[test]
    fn tensor_shapes() {
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        let m = DenseMatrix::identity(2);
        assert_eq!(Tensor::from(&m).to_matrix().unwrap(), m);
        assert!(Tensor::vector(&[1.0, 2.0]).to_matrix().is_err());
        assert!(Tensor::vector(&[1.0, 2.0]).as_scalar().is_err());
    }
}

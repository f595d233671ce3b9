use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major array of `f64` with an optional gradient buffer.
///
/// Rank is limited to 1..=3 and every extent must be positive. Rank-1
/// tensors behave as `1 × n` row vectors wherever a 2-D view is needed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    #[serde(skip)]
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if shape.is_empty() || shape.len() > 3 || shape.contains(&0) || len != data.len() {
            return Err(Error::Shape {
                shape,
                len: data.len(),
            });
        }
        Ok(Tensor {
            shape,
            data,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor::new(shape.to_vec(), vec![0.0; len]).expect("zeros: invalid shape")
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let len: usize = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..len).map(&mut f).collect()).expect("from_fn: invalid shape")
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
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

    /// 2-D view of the shape. Rank-3 tensors fold their leading extents.
    pub fn dims2(&self) -> (usize, usize) {
        match self.shape.as_slice() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            [a, b, c] => (a * b, *c),
            _ => unreachable!("rank checked at construction"),
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let (_, c) = self.dims2();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let (_, c) = self.dims2();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> Option<&mut [f64]> {
        self.grad.as_deref_mut()
    }

    pub fn set_grad(&mut self, grad: Vec<f64>) -> Result<()> {
        if grad.len() != self.data.len() {
            return Err(Error::Dimension {
                op: "set_grad",
                left: self.shape.clone(),
                right: vec![grad.len()],
            });
        }
        self.grad = Some(grad);
        Ok(())
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Index of a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Named collection of learnable tensors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    /// Installs tape gradients on every parameter. Parameters the loss did
    /// not reach receive an all-zero buffer.
    pub fn set_gradients(&mut self, grads: super::Gradients) -> Result<()> {
        for (i, g) in grads.into_inner().into_iter().enumerate() {
            let t = &mut self.tensors[i];
            let g = g.unwrap_or_else(|| vec![0.0; t.len()]);
            t.set_grad(g)?;
        }
        Ok(())
    }

    pub fn clear_gradients(&mut self) {
        for t in &mut self.tensors {
            t.clear_grad();
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Rescales all gradients so their joint L2 norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_gradients(&mut self, max_norm: f64) -> f64 {
        let norm = self
            .tensors
            .iter()
            .filter_map(|t| t.grad())
            .flat_map(|g| g.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        if norm > max_norm {
            let s = max_norm / norm;
            for t in &mut self.tensors {
                if let Some(g) = t.grad_mut() {
                    g.iter_mut().for_each(|v| *v *= s);
                }
            }
        }
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::new(vec![0, 2], vec![]).is_err());
        assert!(Tensor::new(vec![1, 1, 1, 1], vec![0.0]).is_err());
        assert!(Tensor::new(vec![2, 3, 1], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn grad_buffer_matches_shape() {
        let mut t = Tensor::zeros(&[2, 3]);
        assert!(t.set_grad(vec![0.0; 5]).is_err());
        t.set_grad(vec![1.0; 6]).unwrap();
        assert_eq!(t.grad().unwrap().len(), 6);
    }

    #[test]
    fn clip_rescales_joint_norm() {
        let mut s = ParamStore::new();
        let a = s.add("a", Tensor::zeros(&[1, 2]));
        s.get_mut(a).set_grad(vec![3.0, 4.0]).unwrap();
        let before = s.clip_gradients(1.0);
        assert_eq!(before, 5.0);
        let g = s.get(a).grad().unwrap();
        assert!((g[0] - 0.6).abs() < 1e-12 && (g[1] - 0.8).abs() < 1e-12);
    }
}

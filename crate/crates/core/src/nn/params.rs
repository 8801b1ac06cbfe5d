use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<T> {
    pub name: String,
    pub tensor: Tensor<T>,
    pub gradient: Tensor<T>,
    pub trainable: bool,
}

/// Owns every parameter of one or more networks; layers refer to entries by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore<T> {
    params: Vec<Parameter<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<T>, trainable: bool) -> ParamId {
        let gradient = Tensor::zeros(tensor.shape());
        self.params.push(Parameter {
            name: name.into(),
            tensor,
            gradient,
            trainable,
        });
        ParamId(self.params.len() - 1)
    }

    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialisation.
    pub fn add_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        rng: &mut R,
    ) -> ParamId {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| T::lit(rng.gen_range(-bound..bound)))
            .collect();
        let tensor = Tensor::new(shape.to_vec(), data).expect("valid init shape");
        self.add(name, tensor, true)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].tensor
    }

    pub fn set_value(&mut self, id: ParamId, tensor: Tensor<T>) {
        let p = &mut self.params[id.0];
        assert_eq!(
            p.tensor.shape(),
            tensor.shape(),
            "parameter `{}` shape",
            p.name
        );
        p.tensor = tensor;
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.gradient
                .data_mut()
                .iter_mut()
                .for_each(|g| *g = T::zero());
        }
    }

    /// Adds gradients from a backward pass into the trainable parameters.
    pub fn accumulate(&mut self, grads: &super::Gradients<T>) {
        for (i, p) in self.params.iter_mut().enumerate() {
            if !p.trainable {
                continue;
            }
            if let Some(g) = grads.param(ParamId(i)) {
                p.gradient.add_assign(g);
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Total number of scalar values across the given parameters.
    pub fn count(&self, ids: &[ParamId]) -> usize {
        ids.iter().map(|&id| self.value(id).len()).sum()
    }
}

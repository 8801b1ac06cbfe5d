use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

/// Serializable description of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum LayerConfig {
    Dense {
        inputs: usize,
        outputs: usize,
    },
    SelfAttention1D {
        features: usize,
    },
    LayerNorm {
        features: usize,
        eps: f64,
    },
    Lstm {
        inputs: usize,
        hidden_size: usize,
        num_layers: usize,
        dropout_rate: f64,
    },
    Dropout {
        rate: f64,
    },
    /// Fixed per-feature `x * scale + shift`, fitted from data.
    Standardize {
        features: usize,
    },
    Activation {
        function: Activation,
    },
}

/// Shortens the borrow of an optional rng so it can be passed on repeatedly.
pub(crate) fn reborrow<'a>(rng: &'a mut Option<&mut dyn RngCore>) -> Option<&'a mut dyn RngCore> {
    match rng {
        Some(r) => Some(&mut **r),
        None => None,
    }
}

/// Dropout with inverted scaling. `None` for the rng means evaluation mode.
pub fn dropout<T: Scalar>(
    g: &mut Graph<'_, T>,
    x: Var,
    rate: f64,
    rng: Option<&mut dyn RngCore>,
) -> Var {
    let Some(rng) = rng else {
        return x;
    };
    if rate <= 0.0 {
        return x;
    }
    let keep = 1.0 - rate;
    let scale = T::lit(1.0 / keep);
    let shape = g.value(x).shape().to_vec();
    let mut mask = Tensor::zeros(&shape);
    for m in mask.data_mut() {
        if rng.gen::<f64>() < keep {
            *m = scale;
        }
    }
    g.const_mul(x, mask)
}

pub fn activate<T: Scalar>(g: &mut Graph<'_, T>, x: Var, f: Activation) -> Var {
    match f {
        Activation::Relu => g.relu(x),
        Activation::Tanh => g.tanh(x),
        Activation::Sigmoid => g.sigmoid(x),
        Activation::Identity => x,
    }
}

/// Affine map `x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Dense {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Self {
        let weight = store.add_uniform(format!("{name}.weight"), &[inputs, outputs], inputs, rng);
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[1, outputs]), true);
        Dense {
            inputs,
            outputs,
            weight,
            bias,
        }
    }

    /// Like [`Dense::new`] with the initial weights multiplied by `gain`.
    /// Output heads use a small gain so an untrained model starts close to
    /// uniform.
    pub fn with_gain<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        outputs: usize,
        gain: f64,
        rng: &mut R,
    ) -> Self {
        let layer = Self::new(store, name, inputs, outputs, rng);
        let scaled = store.value(layer.weight).map(|w| w * T::lit(gain));
        store.set_value(layer.weight, scaled);
        layer
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Var {
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        let xw = g.matmul(x, w);
        g.add_bias(xw, b)
    }

    pub fn params(&self) -> Vec<ParamId> {
        vec![self.weight, self.bias]
    }
}

/// Single-head attention over the feature axis with a learned residual scale
/// `gamma` that starts at zero, so a fresh module is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfAttention1D {
    pub features: usize,
    pub query: Dense,
    pub key: Dense,
    pub value: Dense,
    pub gamma: ParamId,
}

impl SelfAttention1D {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        features: usize,
        rng: &mut R,
    ) -> Self {
        let query = Dense::new(store, &format!("{name}.query"), features, features, rng);
        let key = Dense::new(store, &format!("{name}.key"), features, features, rng);
        let value = Dense::new(store, &format!("{name}.value"), features, features, rng);
        let gamma = store.add(format!("{name}.gamma"), Tensor::scalar(T::zero()), true);
        SelfAttention1D {
            features,
            query,
            key,
            value,
            gamma,
        }
    }

    /// The attention-weighted values before the residual connection.
    pub fn attend<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Var {
        let q = self.query.forward(g, x);
        let k = self.key.forward(g, x);
        let v = self.value.forward(g, x);
        g.feature_attention(q, k, v)
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Var {
        let attended = self.attend(g, x);
        let gamma = g.param(self.gamma);
        let scaled = g.scale_by(attended, gamma);
        g.add(x, scaled)
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut ids = self.query.params();
        ids.extend(self.key.params());
        ids.extend(self.value.params());
        ids.push(self.gamma);
        ids
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub features: usize,
    pub eps: f64,
    pub gain: ParamId,
    pub shift: ParamId,
}

impl LayerNorm {
    pub const DEFAULT_EPS: f64 = 1e-5;

    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, features: usize) -> Self {
        let gain = store.add(
            format!("{name}.gain"),
            Tensor::full(&[1, features], T::one()),
            true,
        );
        let shift = store.add(format!("{name}.shift"), Tensor::zeros(&[1, features]), true);
        LayerNorm {
            features,
            eps: Self::DEFAULT_EPS,
            gain,
            shift,
        }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Var {
        let gain = g.param(self.gain);
        let shift = g.param(self.shift);
        g.layer_norm(x, gain, shift, T::lit(self.eps))
    }

    pub fn params(&self) -> Vec<ParamId> {
        vec![self.gain, self.shift]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    SelfAttention1D(SelfAttention1D),
    LayerNorm(LayerNorm),
    Dropout(f64),
    Activation(Activation),
}

impl Layer {
    pub fn config(&self) -> LayerConfig {
        match self {
            Layer::Dense(d) => LayerConfig::Dense {
                inputs: d.inputs,
                outputs: d.outputs,
            },
            Layer::SelfAttention1D(a) => LayerConfig::SelfAttention1D {
                features: a.features,
            },
            Layer::LayerNorm(n) => LayerConfig::LayerNorm {
                features: n.features,
                eps: n.eps,
            },
            Layer::Dropout(rate) => LayerConfig::Dropout { rate: *rate },
            Layer::Activation(f) => LayerConfig::Activation { function: *f },
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        match self {
            Layer::Dense(d) => d.params(),
            Layer::SelfAttention1D(a) => a.params(),
            Layer::LayerNorm(n) => n.params(),
            Layer::Dropout(_) | Layer::Activation(_) => Vec::new(),
        }
    }
}

/// Feed-forward stack of layers applied in order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, layer: Layer) -> &mut Self {
        self.layers.push(layer);
        self
    }

    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        mut x: Var,
        mut rng: Option<&mut dyn RngCore>,
    ) -> Var {
        for layer in &self.layers {
            x = match layer {
                Layer::Dense(d) => d.forward(g, x),
                Layer::SelfAttention1D(a) => a.forward(g, x),
                Layer::LayerNorm(n) => n.forward(g, x),
                Layer::Activation(f) => activate(g, x, *f),
                Layer::Dropout(rate) => dropout(g, x, *rate, reborrow(&mut rng)),
            };
        }
        x
    }

    pub fn configs(&self) -> Vec<LayerConfig> {
        self.layers.iter().map(Layer::config).collect()
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(Layer::params).collect()
    }
}

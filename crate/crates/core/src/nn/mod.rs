//! A small reverse-mode differentiation engine and the layers built on it.

pub mod gradcheck;
mod graph;
mod layers;
mod lstm;
mod optim;
mod params;
mod serialize;
mod tensor;

pub use graph::{softmax, softmax_rows, Gradients, Graph, Var};
pub use layers::{
    activate, dropout, Activation, Dense, Layer, LayerConfig, LayerNorm, SelfAttention1D,
    Sequential,
};
pub use lstm::{Lstm, LstmCell, LstmOutput, LstmState};
pub use optim::{Adam, AdamConfig};
pub use params::{ParamId, ParamStore, Parameter};
pub use serialize::{ModelFile, ParamRecord, FORMAT_NAME, FORMAT_VERSION};
pub use tensor::Tensor;

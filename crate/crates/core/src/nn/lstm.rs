use rand::{Rng, RngCore};

use super::graph::{Graph, Var};
use super::layers::{dropout, reborrow, LayerConfig};
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::scalar::Scalar;

/// One recurrent layer. Gate blocks are ordered input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub inputs: usize,
    pub hidden: usize,
    pub input_weight: ParamId,
    pub hidden_weight: ParamId,
    pub bias: ParamId,
}

impl LstmCell {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let input_weight = store.add_uniform(
            format!("{name}.input_weight"),
            &[inputs, 4 * hidden],
            hidden,
            rng,
        );
        let hidden_weight = store.add_uniform(
            format!("{name}.hidden_weight"),
            &[hidden, 4 * hidden],
            hidden,
            rng,
        );
        let mut bias = Tensor::zeros(&[1, 4 * hidden]);
        bias.data_mut()[hidden..2 * hidden]
            .iter_mut()
            .for_each(|b| *b = T::one());
        let bias = store.add(format!("{name}.bias"), bias, true);
        LstmCell {
            inputs,
            hidden,
            input_weight,
            hidden_weight,
            bias,
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        vec![self.input_weight, self.hidden_weight, self.bias]
    }
}

/// Hidden and cell state of every layer, bottom first.
#[derive(Debug, Clone)]
pub struct LstmState {
    pub layers: Vec<(Var, Var)>,
}

pub struct LstmOutput {
    /// Top-layer hidden state at every step.
    pub outputs: Vec<Var>,
    pub state: LstmState,
}

/// Stacked LSTM with dropout between layers during training.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub cells: Vec<LstmCell>,
    pub dropout_rate: f64,
}

impl Lstm {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        hidden: usize,
        num_layers: usize,
        dropout_rate: f64,
        rng: &mut R,
    ) -> Self {
        assert!(
            (0.0..1.0).contains(&dropout_rate),
            "dropout rate must lie in [0, 1)"
        );
        let cells = (0..num_layers)
            .map(|l| {
                let width = if l == 0 { inputs } else { hidden };
                LstmCell::new(store, &format!("{name}.layer{l}"), width, hidden, rng)
            })
            .collect();
        Lstm {
            cells,
            dropout_rate,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.cells[0].hidden
    }

    pub fn config(&self) -> LayerConfig {
        LayerConfig::Lstm {
            inputs: self.cells[0].inputs,
            hidden_size: self.hidden_size(),
            num_layers: self.cells.len(),
            dropout_rate: self.dropout_rate,
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.cells.iter().flat_map(LstmCell::params).collect()
    }

    pub fn zero_state<T: Scalar>(&self, g: &mut Graph<'_, T>, batch: usize) -> LstmState {
        let h = self.hidden_size();
        LstmState {
            layers: self
                .cells
                .iter()
                .map(|_| {
                    (
                        g.input(Tensor::zeros(&[batch, h])),
                        g.input(Tensor::zeros(&[batch, h])),
                    )
                })
                .collect(),
        }
    }

    /// Runs the stack over `seq` (one `[batch, features]` variable per step).
    ///
    /// `mask`, when given, holds one `[batch]` vector of 0/1 flags per step; a
    /// zero keeps the previous state for that row. Passing an rng enables
    /// training-mode dropout.
    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        seq: &[Var],
        state: Option<LstmState>,
        mask: Option<&[Vec<T>]>,
        mut rng: Option<&mut dyn RngCore>,
    ) -> LstmOutput {
        assert!(!seq.is_empty(), "empty sequence");
        let batch = g.value(seq[0]).rows();
        let hidden = self.hidden_size();
        let state = state.unwrap_or_else(|| self.zero_state(g, batch));
        let masks: Option<Vec<(Tensor<T>, Tensor<T>)>> = mask.map(|m| {
            m.iter()
                .map(|step| {
                    assert_eq!(step.len(), batch, "one mask flag per row");
                    let keep: Vec<T> = step
                        .iter()
                        .flat_map(|&f| std::iter::repeat_n(f, hidden))
                        .collect();
                    let hold = keep.iter().map(|&f| T::one() - f).collect();
                    (
                        Tensor::new(vec![batch, hidden], keep).unwrap(),
                        Tensor::new(vec![batch, hidden], hold).unwrap(),
                    )
                })
                .collect()
        });

        let mut inputs = seq.to_vec();
        let mut finals = Vec::with_capacity(self.cells.len());
        for (l, cell) in self.cells.iter().enumerate() {
            let wx = g.param(cell.input_weight);
            let wh = g.param(cell.hidden_weight);
            let b = g.param(cell.bias);
            let (mut h, mut c) = state.layers[l];
            let mut outputs = Vec::with_capacity(inputs.len());
            for (t, &x) in inputs.iter().enumerate() {
                let xw = g.matmul(x, wx);
                let hw = g.matmul(h, wh);
                let z = g.add(xw, hw);
                let z = g.add_bias(z, b);
                let i = g.slice_cols(z, 0, hidden);
                let i = g.sigmoid(i);
                let f = g.slice_cols(z, hidden, hidden);
                let f = g.sigmoid(f);
                let cand = g.slice_cols(z, 2 * hidden, hidden);
                let cand = g.tanh(cand);
                let o = g.slice_cols(z, 3 * hidden, hidden);
                let o = g.sigmoid(o);
                let fc = g.mul(f, c);
                let ic = g.mul(i, cand);
                let c_new = g.add(fc, ic);
                let tc = g.tanh(c_new);
                let h_new = g.mul(o, tc);
                match &masks {
                    Some(m) => {
                        let (keep, hold) = &m[t];
                        let hk = g.const_mul(h_new, keep.clone());
                        let hh = g.const_mul(h, hold.clone());
                        h = g.add(hk, hh);
                        let ck = g.const_mul(c_new, keep.clone());
                        let ch = g.const_mul(c, hold.clone());
                        c = g.add(ck, ch);
                    }
                    None => {
                        h = h_new;
                        c = c_new;
                    }
                }
                outputs.push(h);
            }
            finals.push((h, c));
            if l + 1 < self.cells.len() {
                inputs = outputs
                    .into_iter()
                    .map(|o| dropout(g, o, self.dropout_rate, reborrow(&mut rng)))
                    .collect();
            } else {
                inputs = outputs;
            }
        }
        LstmOutput {
            outputs: inputs,
            state: LstmState { layers: finals },
        }
    }
}

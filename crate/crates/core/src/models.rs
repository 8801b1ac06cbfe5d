//! The four networks: inverse dynamics model, policy, forward-dynamics
//! generator and recurrent discriminator.

use std::fs;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::env::{EnvName, EnvSpec};
use crate::error::{Error, Result};
use crate::nn::{
    softmax, Activation, Dense, Graph, Layer, LayerConfig, LayerNorm, Lstm, ModelFile, ParamId,
    ParamStore, SelfAttention1D, Sequential, Tensor, Var,
};
use crate::scalar::Scalar;

pub const HIDDEN_UNITS: usize = 32;
pub const LSTM_LAYERS: usize = 2;
pub const LSTM_DROPOUT: f64 = 0.5;
/// Initial weight gain of classifier heads.
pub const HEAD_GAIN: f64 = 0.1;

/// Hidden width of the generator, `2 * (state_dim + 1)`.
pub fn generator_width(state_dim: usize) -> usize {
    2 * (state_dim + 1)
}

/// Per-feature standardisation held as non-trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardize {
    pub features: usize,
    pub scale: ParamId,
    pub shift: ParamId,
}

impl Standardize {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, features: usize) -> Self {
        let scale = store.add(
            format!("{name}.scale"),
            Tensor::full(&[1, features], T::one()),
            false,
        );
        let shift = store.add(
            format!("{name}.shift"),
            Tensor::zeros(&[1, features]),
            false,
        );
        Standardize {
            features,
            scale,
            shift,
        }
    }

    /// Sets `scale = 1/std`, `shift = -mean/std` from sample rows.
    /// Dimensions with (near) zero spread keep unit scale.
    pub fn fit<'a, T: Scalar>(
        &self,
        store: &mut ParamStore<T>,
        rows: impl Iterator<Item = &'a [f64]>,
    ) {
        let d = self.features;
        let mut n = 0usize;
        let mut sum = vec![0.0; d];
        let mut sq = vec![0.0; d];
        for row in rows {
            n += 1;
            for i in 0..d {
                sum[i] += row[i];
                sq[i] += row[i] * row[i];
            }
        }
        if n == 0 {
            return;
        }
        let mut scale = Vec::with_capacity(d);
        let mut shift = Vec::with_capacity(d);
        for i in 0..d {
            let mean = sum[i] / n as f64;
            let var = (sq[i] / n as f64 - mean * mean).max(0.0);
            let std = var.sqrt();
            let s = if std > 1e-8 { 1.0 / std } else { 1.0 };
            scale.push(T::lit(s));
            shift.push(T::lit(-mean * s));
        }
        store.set_value(self.scale, Tensor::row(scale));
        store.set_value(self.shift, Tensor::row(shift));
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, x: Var) -> Var {
        let store = g.store();
        let scale = store.value(self.scale).data();
        let shift = store.value(self.shift).data();
        g.affine(x, scale, shift)
    }

    /// The inverse map, `(y - shift) / scale`.
    pub fn inverse<T: Scalar>(&self, g: &mut Graph<'_, T>, y: Var) -> Var {
        let store = g.store();
        let scale: Vec<T> = store
            .value(self.scale)
            .data()
            .iter()
            .map(|&s| T::one() / s)
            .collect();
        let shift: Vec<T> = store
            .value(self.shift)
            .data()
            .iter()
            .zip(&scale)
            .map(|(&b, &inv)| -b * inv)
            .collect();
        g.affine(y, &scale, &shift)
    }

    pub fn apply<T: Scalar>(&self, store: &ParamStore<T>, x: &[f64]) -> Vec<f64> {
        let scale = store.value(self.scale).data();
        let shift = store.value(self.shift).data();
        x.iter()
            .zip(scale.iter().zip(shift))
            .map(|(&v, (&s, &b))| v * s.as_f64() + b.as_f64())
            .collect()
    }

    pub fn config(&self) -> LayerConfig {
        LayerConfig::Standardize {
            features: self.features,
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        vec![self.scale, self.shift]
    }
}

/// Stacks equal-length rows into a `[rows, cols]` tensor.
pub fn rows_tensor<T: Scalar>(rows: &[&[f64]]) -> Tensor<T> {
    let cols = rows[0].len();
    let data = rows
        .iter()
        .flat_map(|r| r.iter().map(|&v| T::lit(v)))
        .collect();
    Tensor::new(vec![rows.len(), cols], data).expect("non-empty equal-width rows")
}

fn check_width(rows: &[&[f64]], expected: usize, what: &str) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::shape(format!("{what}: empty batch")));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != expected) {
        return Err(Error::shape(format!(
            "{what}: expected width {expected}, got {}",
            r.len()
        )));
    }
    Ok(())
}

/// `Dense -> ReLU -> self-attention [-> layer norm]`, twice, then a linear head.
fn attention_mlp<T: Scalar, R: Rng + ?Sized>(
    store: &mut ParamStore<T>,
    name: &str,
    inputs: usize,
    outputs: usize,
    layer_norm: bool,
    rng: &mut R,
) -> Sequential {
    let mut net = Sequential::new();
    let mut width = inputs;
    for l in 0..2 {
        net.push(Layer::Dense(Dense::new(
            store,
            &format!("{name}.hidden{l}"),
            width,
            HIDDEN_UNITS,
            rng,
        )))
        .push(Layer::Activation(Activation::Relu))
        .push(Layer::SelfAttention1D(SelfAttention1D::new(
            store,
            &format!("{name}.attention{l}"),
            HIDDEN_UNITS,
            rng,
        )));
        if layer_norm {
            net.push(Layer::LayerNorm(LayerNorm::new(
                store,
                &format!("{name}.norm{l}"),
                HIDDEN_UNITS,
            )));
        }
        width = HIDDEN_UNITS;
    }
    net.push(Layer::Dense(Dense::with_gain(
        store,
        &format!("{name}.output"),
        width,
        outputs,
        HEAD_GAIN,
        rng,
    )));
    net
}

/// `P(a | s_t, s_{t+1})` as logits over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseDynamicsModel {
    pub state_dim: usize,
    pub action_count: usize,
    pub state_norm: Standardize,
    pub delta_norm: Standardize,
    pub net: Sequential,
}

impl InverseDynamicsModel {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        state_dim: usize,
        action_count: usize,
        rng: &mut R,
    ) -> Self {
        let state_norm = Standardize::new(store, "idm.state_norm", state_dim);
        let delta_norm = Standardize::new(store, "idm.delta_norm", state_dim);
        let net = attention_mlp(store, "idm", 2 * state_dim, action_count, true, rng);
        InverseDynamicsModel {
            state_dim,
            action_count,
            state_norm,
            delta_norm,
            net,
        }
    }

    /// Inputs are `s_t` standardised and `s_{t+1} - s_t` standardised,
    /// concatenated into `2 * state_dim` features.
    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, states: Var, next_states: Var) -> Var {
        let delta = g.sub(next_states, states);
        let s = self.state_norm.forward(g, states);
        let d = self.delta_norm.forward(g, delta);
        let x = g.concat_cols(&[s, d]);
        self.net.forward(g, x, None)
    }

    /// Logits for a batch of transitions, `[batch, action_count]`.
    pub fn logits<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        states: &[&[f64]],
        next_states: &[&[f64]],
    ) -> Result<Tensor<T>> {
        check_width(states, self.state_dim, "idm states")?;
        check_width(next_states, self.state_dim, "idm next states")?;
        if states.len() != next_states.len() {
            return Err(Error::shape(
                "idm: state and next-state batches differ in length",
            ));
        }
        let mut g = Graph::new(store);
        let s = g.input(rows_tensor(states));
        let n = g.input(rows_tensor(next_states));
        let out = self.forward(&mut g, s, n);
        Ok(g.value(out).clone())
    }

    pub fn predict<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        state: &[f64],
        next_state: &[f64],
    ) -> Result<Vec<T>> {
        Ok(self.logits(store, &[state], &[next_state])?.into_data())
    }

    pub fn trainable(&self) -> Vec<ParamId> {
        self.net.params()
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut ids = self.state_norm.params();
        ids.extend(self.delta_norm.params());
        ids.extend(self.net.params());
        ids
    }

    pub fn layers(&self) -> Vec<LayerConfig> {
        let mut l = vec![self.state_norm.config(), self.delta_norm.config()];
        l.extend(self.net.configs());
        l
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActMode {
    /// Draw from the softmax of the logits.
    Sample,
    /// Most likely action, ties to the lowest index.
    Argmax,
}

pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Picks an action from logits according to `mode`.
pub fn select_action<T: Scalar, R: Rng + ?Sized>(
    logits: &[T],
    mode: ActMode,
    rng: &mut R,
) -> usize {
    match mode {
        ActMode::Argmax => argmax(logits),
        ActMode::Sample => {
            let probs = softmax(logits);
            let u = T::lit(rng.gen::<f64>());
            let mut acc = T::zero();
            for (i, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return i;
                }
            }
            // rounding left a sliver above the last cumulative value
            probs.iter().rposition(|&p| p > T::zero()).unwrap_or(0)
        }
    }
}

/// `pi(a | s)` as logits.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyModel {
    pub state_dim: usize,
    pub action_count: usize,
    pub state_norm: Standardize,
    pub net: Sequential,
}

impl PolicyModel {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        state_dim: usize,
        action_count: usize,
        rng: &mut R,
    ) -> Self {
        let state_norm = Standardize::new(store, "policy.state_norm", state_dim);
        let net = attention_mlp(store, "policy", state_dim, action_count, false, rng);
        PolicyModel {
            state_dim,
            action_count,
            state_norm,
            net,
        }
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, states: Var) -> Var {
        let x = self.state_norm.forward(g, states);
        self.net.forward(g, x, None)
    }

    pub fn logits<T: Scalar>(&self, store: &ParamStore<T>, states: &[&[f64]]) -> Result<Tensor<T>> {
        check_width(states, self.state_dim, "policy states")?;
        let mut g = Graph::new(store);
        let s = g.input(rows_tensor(states));
        let out = self.forward(&mut g, s);
        Ok(g.value(out).clone())
    }

    pub fn act<T: Scalar, R: Rng + ?Sized>(
        &self,
        store: &ParamStore<T>,
        state: &[f64],
        mode: ActMode,
        rng: &mut R,
    ) -> Result<usize> {
        let logits = self.logits(store, &[state])?;
        Ok(select_action(logits.data(), mode, rng))
    }

    pub fn trainable(&self) -> Vec<ParamId> {
        self.net.params()
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut ids = self.state_norm.params();
        ids.extend(self.net.params());
        ids
    }

    pub fn layers(&self) -> Vec<LayerConfig> {
        let mut l = vec![self.state_norm.config()];
        l.extend(self.net.configs());
        l
    }
}

/// Forward dynamics `s_{t+1} ~ G(s_t, a)`. The action enters as a
/// distribution over actions (a one-hot vector for a concrete action), and
/// the network predicts the standardised state change.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorModel {
    pub state_dim: usize,
    pub action_count: usize,
    pub state_norm: Standardize,
    pub delta_norm: Standardize,
    pub net: Sequential,
}

pub struct GeneratorOutput {
    /// Predicted next state in raw units.
    pub next_state: Var,
    /// Predicted standardised state change.
    pub delta: Var,
}

impl GeneratorModel {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        state_dim: usize,
        action_count: usize,
        rng: &mut R,
    ) -> Self {
        let state_norm = Standardize::new(store, "generator.state_norm", state_dim);
        let delta_norm = Standardize::new(store, "generator.delta_norm", state_dim);
        let width = generator_width(state_dim);
        let mut net = Sequential::new();
        net.push(Layer::Dense(Dense::new(
            store,
            "generator.hidden0",
            state_dim + action_count,
            width,
            rng,
        )))
        .push(Layer::Activation(Activation::Relu))
        .push(Layer::Dense(Dense::new(
            store,
            "generator.hidden1",
            width,
            width,
            rng,
        )))
        .push(Layer::Activation(Activation::Relu))
        .push(Layer::Dense(Dense::new(
            store,
            "generator.output",
            width,
            state_dim,
            rng,
        )));
        GeneratorModel {
            state_dim,
            action_count,
            state_norm,
            delta_norm,
            net,
        }
    }

    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        states: Var,
        actions: Var,
    ) -> GeneratorOutput {
        let s = self.state_norm.forward(g, states);
        let x = g.concat_cols(&[s, actions]);
        let delta = self.net.forward(g, x, None);
        let change = self.delta_norm.inverse(g, delta);
        let next_state = g.add(states, change);
        GeneratorOutput { next_state, delta }
    }

    /// Standardised `s_{t+1} - s_t`, the regression target for `delta`.
    pub fn delta_target<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        states: &[&[f64]],
        next: &[&[f64]],
    ) -> Tensor<T> {
        let rows: Vec<Vec<f64>> = states
            .iter()
            .zip(next)
            .map(|(s, n)| {
                let d: Vec<f64> = s.iter().zip(n.iter()).map(|(a, b)| b - a).collect();
                self.delta_norm.apply(store, &d)
            })
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        rows_tensor(&refs)
    }

    pub fn one_hot<T: Scalar>(&self, actions: &[usize]) -> Tensor<T> {
        let mut t = Tensor::zeros(&[actions.len(), self.action_count]);
        for (r, &a) in actions.iter().enumerate() {
            t.data_mut()[r * self.action_count + a] = T::one();
        }
        t
    }

    /// Predicted next states for concrete actions.
    pub fn predict_batch<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        states: &[&[f64]],
        actions: &[usize],
    ) -> Result<Vec<Vec<f64>>> {
        check_width(states, self.state_dim, "generator states")?;
        if let Some(&a) = actions.iter().find(|&&a| a >= self.action_count) {
            return Err(Error::Usage(format!("action {a} out of range")));
        }
        let mut g = Graph::new(store);
        let s = g.input(rows_tensor(states));
        let a = g.input(self.one_hot(actions));
        let out = self.forward(&mut g, s, a);
        let v = g.value(out.next_state);
        Ok((0..v.rows())
            .map(|r| v.row_slice(r).iter().map(|x| x.as_f64()).collect())
            .collect())
    }

    pub fn next_state<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        state: &[f64],
        action: usize,
    ) -> Result<Vec<f64>> {
        Ok(self.predict_batch(store, &[state], &[action])?.remove(0))
    }

    pub fn trainable(&self) -> Vec<ParamId> {
        self.net.params()
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut ids = self.state_norm.params();
        ids.extend(self.delta_norm.params());
        ids.extend(self.net.params());
        ids
    }

    pub fn layers(&self) -> Vec<LayerConfig> {
        let mut l = vec![self.state_norm.config(), self.delta_norm.config()];
        l.extend(self.net.configs());
        l
    }
}

/// Recurrent classifier scoring whether a window of states came from the teacher.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorModel {
    pub state_dim: usize,
    pub state_norm: Standardize,
    pub lstm: Lstm,
    pub head: Dense,
}

/// A batch of equal-length state windows laid out time-major.
#[derive(Debug, Clone)]
pub struct WindowBatch<T> {
    /// One `[batch, state_dim]` tensor per step.
    pub steps: Vec<Tensor<T>>,
    /// One 0/1 flag per row per step; 0 marks padding.
    pub mask: Vec<Vec<T>>,
}

impl<T: Scalar> WindowBatch<T> {
    /// Packs windows of `(state, valid)` pairs; all windows must share one length.
    pub fn from_windows(windows: &[Vec<(&[f64], bool)>]) -> Result<Self> {
        let first = windows.first().ok_or_else(|| Error::shape("no windows"))?;
        let len = first.len();
        if len == 0 {
            return Err(Error::shape("empty window"));
        }
        if windows.iter().any(|w| w.len() != len) {
            return Err(Error::shape("windows differ in length"));
        }
        let mut steps = Vec::with_capacity(len);
        let mut mask = Vec::with_capacity(len);
        for t in 0..len {
            let rows: Vec<&[f64]> = windows.iter().map(|w| w[t].0).collect();
            steps.push(rows_tensor(&rows));
            mask.push(
                windows
                    .iter()
                    .map(|w| if w[t].1 { T::one() } else { T::zero() })
                    .collect(),
            );
        }
        Ok(WindowBatch { steps, mask })
    }

    pub fn batch(&self) -> usize {
        self.steps[0].rows()
    }
}

impl DiscriminatorModel {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        state_dim: usize,
        rng: &mut R,
    ) -> Self {
        let state_norm = Standardize::new(store, "discriminator.state_norm", state_dim);
        let lstm = Lstm::new(
            store,
            "discriminator.lstm",
            state_dim,
            HIDDEN_UNITS,
            LSTM_LAYERS,
            LSTM_DROPOUT,
            rng,
        );
        let head = Dense::with_gain(store, "discriminator.head", HIDDEN_UNITS, 1, HEAD_GAIN, rng);
        DiscriminatorModel {
            state_dim,
            state_norm,
            lstm,
            head,
        }
    }

    /// Logits `[batch, 1]` from the final top-layer hidden state. Passing an
    /// rng enables dropout.
    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<'_, T>,
        steps: &[Var],
        mask: Option<&[Vec<T>]>,
        rng: Option<&mut dyn RngCore>,
    ) -> Var {
        let normed: Vec<Var> = steps
            .iter()
            .map(|&s| self.state_norm.forward(g, s))
            .collect();
        let out = self.lstm.forward(g, &normed, None, mask, rng);
        let last = out.state.layers.last().expect("at least one layer").0;
        self.head.forward(g, last)
    }

    /// Evaluation-mode probabilities that each window is a teacher window.
    pub fn score_batch<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        batch: &WindowBatch<T>,
    ) -> Vec<f64> {
        let mut g = Graph::new(store);
        let steps: Vec<Var> = batch.steps.iter().map(|s| g.input(s.clone())).collect();
        let logits = self.forward(&mut g, &steps, Some(&batch.mask), None);
        g.value(logits)
            .data()
            .iter()
            .map(|z| 1.0 / (1.0 + (-z.as_f64()).exp()))
            .collect()
    }

    pub fn score<T: Scalar>(&self, store: &ParamStore<T>, window: &[Vec<f64>]) -> Result<f64> {
        if window.is_empty() {
            return Err(Error::Usage(
                "discriminator needs a non-empty window".into(),
            ));
        }
        let rows: Vec<&[f64]> = window.iter().map(Vec::as_slice).collect();
        check_width(&rows, self.state_dim, "discriminator window")?;
        let w: Vec<(&[f64], bool)> = rows.into_iter().map(|r| (r, true)).collect();
        let batch = WindowBatch::from_windows(&[w])?;
        Ok(self.score_batch(store, &batch)[0])
    }

    pub fn trainable(&self) -> Vec<ParamId> {
        let mut ids = self.lstm.params();
        ids.extend(self.head.params());
        ids
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut ids = self.state_norm.params();
        ids.extend(self.trainable());
        ids
    }

    pub fn layers(&self) -> Vec<LayerConfig> {
        vec![
            self.state_norm.config(),
            self.lstm.config(),
            LayerConfig::Dense {
                inputs: HIDDEN_UNITS,
                outputs: 1,
            },
            LayerConfig::Activation {
                function: Activation::Sigmoid,
            },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub env: EnvName,
    pub state_dim: usize,
    pub action_count: usize,
    pub models: Vec<String>,
}

/// All four networks sharing one parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle<T> {
    pub env: EnvName,
    pub store: ParamStore<T>,
    pub idm: InverseDynamicsModel,
    pub policy: PolicyModel,
    pub generator: GeneratorModel,
    pub discriminator: DiscriminatorModel,
}

pub const MODEL_NAMES: [&str; 4] = ["idm", "policy", "generator", "discriminator"];

impl<T: Scalar> ModelBundle<T> {
    pub fn new<R: Rng + ?Sized>(spec: &EnvSpec, rng: &mut R) -> Self {
        let mut store = ParamStore::new();
        let (d, k) = (spec.state_dim, spec.action_count);
        let idm = InverseDynamicsModel::new(&mut store, d, k, rng);
        let policy = PolicyModel::new(&mut store, d, k, rng);
        let generator = GeneratorModel::new(&mut store, d, k, rng);
        let discriminator = DiscriminatorModel::new(&mut store, d, rng);
        ModelBundle {
            env: spec.name,
            store,
            idm,
            policy,
            generator,
            discriminator,
        }
    }

    pub fn manifest(&self) -> BundleManifest {
        BundleManifest {
            env: self.env,
            state_dim: self.policy.state_dim,
            action_count: self.policy.action_count,
            models: MODEL_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn model_file(&self, name: &str) -> ModelFile {
        let (layers, ids) = match name {
            "idm" => (self.idm.layers(), self.idm.params()),
            "policy" => (self.policy.layers(), self.policy.params()),
            "generator" => (self.generator.layers(), self.generator.params()),
            _ => (self.discriminator.layers(), self.discriminator.params()),
        };
        ModelFile::capture(name, layers, &self.store, &ids)
    }

    /// Writes `manifest.json` plus one `<model>.json` per network into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        let path = dir.join("manifest.json");
        fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
        for name in MODEL_NAMES {
            self.model_file(name)
                .save(&dir.join(format!("{name}.json")))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: BundleManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let spec = manifest.env.spec();
        if spec.state_dim != manifest.state_dim || spec.action_count != manifest.action_count {
            return Err(Error::Validation(format!(
                "manifest dimensions do not match {}",
                manifest.env
            )));
        }
        // parameters are overwritten below, the init rng only fixes the layout
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut bundle = Self::new(&spec, &mut rng);
        for name in MODEL_NAMES {
            let file = ModelFile::load(&dir.join(format!("{name}.json")))?;
            let ids = match name {
                "idm" => bundle.idm.params(),
                "policy" => bundle.policy.params(),
                "generator" => bundle.generator.params(),
                _ => bundle.discriminator.params(),
            };
            file.restore(&mut bundle.store, &ids)?;
        }
        Ok(bundle)
    }
}

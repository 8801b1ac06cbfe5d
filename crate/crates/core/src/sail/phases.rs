//! The individual training phases of one epoch.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::data::{sample_windows, SampleSet, StateTrajectory, Transition, Window};
use crate::env::ActionId;
use crate::error::{Error, Result};
use crate::metrics::balanced_accuracy;
use crate::models::{
    argmax, rows_tensor, select_action, ActMode, DiscriminatorModel, GeneratorModel,
    InverseDynamicsModel, ModelBundle, PolicyModel, WindowBatch,
};
use crate::nn::{Adam, Graph, ParamStore, Var};
use crate::scalar::Scalar;

/// Rows per inference batch when scoring large transition sets.
const INFERENCE_CHUNK: usize = 4096;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic 90/10 split of the sample set by transition index.
pub fn is_holdout(index: usize) -> bool {
    splitmix64(index as u64).is_multiple_of(10)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmMetrics {
    pub loss: f64,
    pub holdout_accuracy: f64,
}

fn states_of<'a>(
    ts: impl Iterator<Item = &'a Transition>,
) -> (Vec<&'a [f64]>, Vec<&'a [f64]>, Vec<ActionId>) {
    let mut s = Vec::new();
    let mut n = Vec::new();
    let mut a = Vec::new();
    for t in ts {
        s.push(t.state.as_slice());
        n.push(t.next_state.as_slice());
        a.push(t.action);
    }
    (s, n, a)
}

fn step_loss<T: Scalar>(g: &Graph<'_, T>, loss: Var) -> f64 {
    g.value(loss).data()[0].as_f64()
}

fn check_finite(value: f64, what: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{what} became non-finite")))
    }
}

/// Cross-entropy training of the inverse dynamics model on the 90% split.
/// Reports the mean training loss and argmax accuracy on the 10% split.
pub fn train_idm<T: Scalar, R: Rng + ?Sized>(
    idm: &InverseDynamicsModel,
    store: &mut ParamStore<T>,
    opt: &mut Adam<T>,
    samples: &SampleSet,
    steps: usize,
    batch: usize,
    rng: &mut R,
) -> Result<IdmMetrics> {
    let all = samples.transitions();
    let train: Vec<usize> = (0..all.len()).filter(|&i| !is_holdout(i)).collect();
    if train.is_empty() {
        return Err(Error::Usage(
            "inverse dynamics training needs a non-empty sample set".into(),
        ));
    }
    let mut total = 0.0;
    for _ in 0..steps {
        let picks = (0..batch).map(|_| &all[train[rng.gen_range(0..train.len())]]);
        let (s, n, a) = states_of(picks);
        let grads = {
            let mut g = Graph::new(store);
            let sv = g.input(rows_tensor(&s));
            let nv = g.input(rows_tensor(&n));
            let logits = idm.forward(&mut g, sv, nv);
            let loss = g.cross_entropy(logits, &a);
            total += step_loss(&g, loss);
            g.backward(loss)
        };
        opt.apply(store, &grads);
    }
    let loss = if steps > 0 {
        total / steps as f64
    } else {
        f64::NAN
    };
    check_finite(if steps > 0 { loss } else { 0.0 }, "inverse dynamics loss")?;

    let holdout: Vec<&Transition> = (0..all.len())
        .filter(|&i| is_holdout(i))
        .map(|i| &all[i])
        .collect();
    let holdout_accuracy = if holdout.is_empty() {
        f64::NAN
    } else {
        let mut hits = 0usize;
        for chunk in holdout.chunks(INFERENCE_CHUNK) {
            let (s, n, a) = states_of(chunk.iter().copied());
            let logits = idm.logits(store, &s, &n)?;
            hits += (0..a.len())
                .filter(|&r| argmax(logits.row_slice(r)) == a[r])
                .count();
        }
        hits as f64 / holdout.len() as f64
    };
    Ok(IdmMetrics {
        loss,
        holdout_accuracy,
    })
}

/// One inferred action per consecutive state pair of each teacher
/// trajectory. Trajectories with fewer than two states get no labels.
pub fn pseudo_label<T: Scalar, R: Rng + ?Sized>(
    idm: &InverseDynamicsModel,
    store: &ParamStore<T>,
    teacher: &[StateTrajectory],
    mode: ActMode,
    rng: &mut R,
) -> Result<Vec<Vec<ActionId>>> {
    if teacher.is_empty() {
        return Err(Error::Usage(
            "pseudo-labelling needs teacher trajectories".into(),
        ));
    }
    let mut labels = Vec::with_capacity(teacher.len());
    for (i, traj) in teacher.iter().enumerate() {
        if traj.states.len() < 2 {
            log::warn!("teacher trajectory {i} has fewer than two states; skipped");
            labels.push(Vec::new());
            continue;
        }
        let mut out = Vec::with_capacity(traj.states.len() - 1);
        let pairs: Vec<usize> = (0..traj.states.len() - 1).collect();
        for chunk in pairs.chunks(INFERENCE_CHUNK) {
            let s: Vec<&[f64]> = chunk.iter().map(|&t| traj.states[t].as_slice()).collect();
            let n: Vec<&[f64]> = chunk
                .iter()
                .map(|&t| traj.states[t + 1].as_slice())
                .collect();
            let logits = idm.logits(store, &s, &n)?;
            for r in 0..chunk.len() {
                out.push(select_action(logits.row_slice(r), mode, rng));
            }
        }
        labels.push(out);
    }
    Ok(labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GeneratorLoss {
    /// Squared error on the standardised state change.
    #[default]
    #[serde(rename = "mse")]
    Mse,
    /// `-mean(sum_d y_d ln yhat_d)` with states min-max scaled into `(0, 1]`.
    #[serde(rename = "literal_ce")]
    LiteralCe,
}

/// Per-dimension min-max scaling into `[LITERAL_FLOOR, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMax {
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
}

pub const LITERAL_FLOOR: f64 = 1e-6;

impl MinMax {
    pub fn fit(states: &[StateTrajectory]) -> Option<Self> {
        let dim = states.iter().flat_map(|t| t.states.first()).next()?.len();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for s in states.iter().flat_map(|t| &t.states) {
            for d in 0..dim {
                lo[d] = lo[d].min(s[d]);
                hi[d] = hi[d].max(s[d]);
            }
        }
        let span = 1.0 - LITERAL_FLOOR;
        let scale: Vec<f64> = (0..dim)
            .map(|d| {
                let w = hi[d] - lo[d];
                span / if w > 1e-12 { w } else { 1.0 }
            })
            .collect();
        let shift = (0..dim).map(|d| LITERAL_FLOOR - lo[d] * scale[d]).collect();
        Some(MinMax { scale, shift })
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.scale.iter().zip(&self.shift))
            .map(|(&v, (&a, &b))| (v * a + b).clamp(LITERAL_FLOOR, 1.0))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct BcSettings {
    pub steps: usize,
    pub batch: usize,
    pub lambda_g: f64,
    pub generator_loss: GeneratorLoss,
    /// Required by [`GeneratorLoss::LiteralCe`].
    pub min_max: Option<MinMax>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcMetrics {
    pub policy_loss: f64,
    pub generator_loss: f64,
}

/// Generator loss of predicted next states against observed ones.
fn generator_loss<T: Scalar>(
    g: &mut Graph<'_, T>,
    generator: &GeneratorModel,
    settings: &BcSettings,
    states: Var,
    actions: Var,
    s: &[&[f64]],
    n: &[&[f64]],
) -> Result<Var> {
    let out = generator.forward(g, states, actions);
    Ok(match settings.generator_loss {
        GeneratorLoss::Mse => {
            let target = generator.delta_target(g.store(), s, n);
            g.mse(out.delta, target)
        }
        GeneratorLoss::LiteralCe => {
            let mm = settings
                .min_max
                .as_ref()
                .ok_or_else(|| Error::Config("literal generator loss needs state ranges".into()))?;
            let scale: Vec<T> = mm.scale.iter().map(|&v| T::lit(v)).collect();
            let shift: Vec<T> = mm.shift.iter().map(|&v| T::lit(v)).collect();
            let scaled = g.affine(out.next_state, &scale, &shift);
            let pred = g.clamp(scaled, T::lit(LITERAL_FLOOR), T::one());
            let logp = g.ln(pred);
            let rows: Vec<Vec<f64>> = n.iter().map(|x| mm.apply(x)).collect();
            let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            let weighted = g.const_mul(logp, rows_tensor(&refs));
            let total = g.sum(weighted);
            g.scale(total, T::lit(-1.0 / s.len() as f64))
        }
    })
}

/// Policy cross-entropy on pseudo-labels plus `lambda_g` times the
/// generator loss. The generator sees the policy's softmax, so its loss
/// also trains the policy. With `lambda_g == 0` the generator is left
/// untouched.
pub fn behavioural_cloning<T: Scalar, R: Rng + ?Sized>(
    bundle: &mut ModelBundle<T>,
    policy_opt: &mut Adam<T>,
    generator_opt: &mut Adam<T>,
    teacher: &[StateTrajectory],
    labels: &[Vec<ActionId>],
    settings: &BcSettings,
    rng: &mut R,
) -> Result<BcMetrics> {
    if labels.len() != teacher.len() {
        return Err(Error::shape(format!(
            "{} label lists for {} trajectories",
            labels.len(),
            teacher.len()
        )));
    }
    let mut pairs = Vec::new();
    for (i, (traj, ls)) in teacher.iter().zip(labels).enumerate() {
        if !ls.is_empty() && ls.len() + 1 != traj.states.len() {
            return Err(Error::shape(format!(
                "trajectory {i}: {} labels for {} states",
                ls.len(),
                traj.states.len()
            )));
        }
        pairs.extend((0..ls.len()).map(|t| (i, t)));
    }
    if pairs.is_empty() {
        return Err(Error::Usage(
            "behavioural cloning needs labelled transitions".into(),
        ));
    }
    let use_generator = settings.lambda_g > 0.0;
    let (mut ce_total, mut g_total) = (0.0, 0.0);
    for _ in 0..settings.steps {
        let picks: Vec<(usize, usize)> = (0..settings.batch)
            .map(|_| pairs[rng.gen_range(0..pairs.len())])
            .collect();
        let s: Vec<&[f64]> = picks
            .iter()
            .map(|&(i, t)| teacher[i].states[t].as_slice())
            .collect();
        let n: Vec<&[f64]> = picks
            .iter()
            .map(|&(i, t)| teacher[i].states[t + 1].as_slice())
            .collect();
        let a: Vec<ActionId> = picks.iter().map(|&(i, t)| labels[i][t]).collect();

        let grads = {
            let ModelBundle {
                store,
                policy,
                generator,
                ..
            } = &*bundle;
            let mut g = Graph::new(store);
            let sv = g.input(rows_tensor(&s));
            let logits = policy.forward(&mut g, sv);
            let ce = g.cross_entropy(logits, &a);
            ce_total += step_loss(&g, ce);
            let probs = g.softmax(logits);
            let lg = generator_loss(&mut g, generator, settings, sv, probs, &s, &n)?;
            g_total += step_loss(&g, lg);
            let loss = if use_generator {
                let weighted = g.scale(lg, T::lit(settings.lambda_g));
                g.add(ce, weighted)
            } else {
                ce
            };
            g.backward(loss)
        };
        bundle.store.zero_grad();
        bundle.store.accumulate(&grads);
        policy_opt.step(&mut bundle.store);
        if use_generator {
            generator_opt.step(&mut bundle.store);
        }
    }
    let steps = settings.steps.max(1) as f64;
    let metrics = BcMetrics {
        policy_loss: ce_total / steps,
        generator_loss: g_total / steps,
    };
    check_finite(metrics.policy_loss, "policy loss")?;
    check_finite(metrics.generator_loss, "generator loss")?;
    Ok(metrics)
}

/// Maps each state of each policy window through `G(s, softmax(pi(s)))`.
pub fn generate_windows<T: Scalar>(
    policy: &PolicyModel,
    generator: &GeneratorModel,
    store: &ParamStore<T>,
    windows: &[Window],
) -> Result<Vec<Window>> {
    let Some(first) = windows.first() else {
        return Ok(Vec::new());
    };
    let len = first.states.len();
    let mut out: Vec<Window> = windows
        .iter()
        .map(|w| Window {
            states: Vec::with_capacity(len),
            valid: w.valid.clone(),
        })
        .collect();
    let mut g = Graph::new(store);
    for t in 0..len {
        let rows: Vec<&[f64]> = windows.iter().map(|w| w.states[t].as_slice()).collect();
        let sv = g.input(rows_tensor(&rows));
        let logits = policy.forward(&mut g, sv);
        let probs = g.softmax(logits);
        let next = generator.forward(&mut g, sv, probs).next_state;
        let v = g.value(next);
        for (r, w) in out.iter_mut().enumerate() {
            w.states
                .push(v.row_slice(r).iter().map(|x| x.as_f64()).collect());
        }
    }
    Ok(out)
}

fn window_batch<T: Scalar>(windows: &[Window]) -> Result<WindowBatch<T>> {
    let pairs: Vec<Vec<(&[f64], bool)>> = windows.iter().map(Window::pairs).collect();
    WindowBatch::from_windows(&pairs)
}

fn inputs<T: Scalar>(g: &mut Graph<'_, T>, batch: &WindowBatch<T>) -> Vec<Var> {
    batch.steps.iter().map(|s| g.input(s.clone())).collect()
}

/// One discriminator update: teacher windows labelled 1, fake windows 0.
/// Returns the summed loss of both sides.
pub fn discriminator_step<T: Scalar, R: RngCore>(
    disc: &DiscriminatorModel,
    store: &mut ParamStore<T>,
    opt: &mut Adam<T>,
    real: &[Window],
    fake: &[Window],
    rng: &mut R,
) -> Result<f64> {
    let real_b = window_batch::<T>(real)?;
    let fake_b = window_batch::<T>(fake)?;
    let (loss_value, grads) = {
        let mut g = Graph::new(store);
        let rs = inputs(&mut g, &real_b);
        let fs = inputs(&mut g, &fake_b);
        let zr = disc.forward(&mut g, &rs, Some(&real_b.mask), Some(&mut *rng));
        let zf = disc.forward(&mut g, &fs, Some(&fake_b.mask), Some(&mut *rng));
        let lr = g.bce_with_logits(zr, &vec![T::one(); real.len()]);
        let lf = g.bce_with_logits(zf, &vec![T::zero(); fake.len()]);
        let loss = g.add(lr, lf);
        (step_loss(&g, loss), g.backward(loss))
    };
    opt.apply(store, &grads);
    check_finite(loss_value, "discriminator loss")?;
    Ok(loss_value)
}

/// Evaluation-mode balanced accuracy on teacher versus fake windows.
pub fn discriminator_accuracy<T: Scalar>(
    disc: &DiscriminatorModel,
    store: &ParamStore<T>,
    real: &[Window],
    fake: &[Window],
) -> Result<f64> {
    let pos = disc.score_batch(store, &window_batch::<T>(real)?);
    let neg = disc.score_batch(store, &window_batch::<T>(fake)?);
    balanced_accuracy(&pos, &neg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvSettings {
    pub steps: usize,
    pub windows_per_side: usize,
    pub window: usize,
    pub lambda_adv: f64,
}

/// Alternating updates: the discriminator learns to separate teacher
/// windows from generated policy windows, then the policy and generator
/// descend `lambda_adv * ln(1 - D(G(s, pi(s))))`.
/// Returns the mean discriminator loss.
#[allow(clippy::too_many_arguments)]
pub fn adversarial_update<T: Scalar, R: RngCore>(
    bundle: &mut ModelBundle<T>,
    disc_opt: &mut Adam<T>,
    policy_opt: &mut Adam<T>,
    generator_opt: &mut Adam<T>,
    teacher: &[StateTrajectory],
    replay: &[StateTrajectory],
    settings: &AdvSettings,
    rng: &mut R,
) -> Result<f64> {
    if replay.is_empty() {
        return Err(Error::Usage(
            "adversarial update needs a non-empty replay buffer".into(),
        ));
    }
    let (k, w) = (settings.windows_per_side, settings.window);
    let mut total = 0.0;
    for _ in 0..settings.steps {
        let real = sample_windows(teacher, k, w, rng)?;
        let policy_windows = sample_windows(replay, k, w, rng)?;
        let fake = generate_windows(
            &bundle.policy,
            &bundle.generator,
            &bundle.store,
            &policy_windows,
        )?;
        total += discriminator_step(
            &bundle.discriminator,
            &mut bundle.store,
            disc_opt,
            &real,
            &fake,
            rng,
        )?;

        if settings.lambda_adv > 0.0 {
            let batch = window_batch::<T>(&policy_windows)?;
            let grads = {
                let ModelBundle {
                    store,
                    policy,
                    generator,
                    discriminator,
                    ..
                } = &*bundle;
                let mut g = Graph::new(store);
                let mut generated = Vec::with_capacity(w);
                for step in &batch.steps {
                    let sv = g.input(step.clone());
                    let logits = policy.forward(&mut g, sv);
                    let probs = g.softmax(logits);
                    generated.push(generator.forward(&mut g, sv, probs).next_state);
                }
                let z = discriminator.forward(&mut g, &generated, Some(&batch.mask), None);
                // bce against 0 is -ln(1 - D)
                let bce = g.bce_with_logits(z, &vec![T::zero(); k]);
                let loss = g.scale(bce, T::lit(-settings.lambda_adv));
                g.backward(loss)
            };
            bundle.store.zero_grad();
            bundle.store.accumulate(&grads);
            policy_opt.step(&mut bundle.store);
            generator_opt.step(&mut bundle.store);
        }
    }
    Ok(if settings.steps > 0 {
        total / settings.steps as f64
    } else {
        f64::NAN
    })
}

/// Balanced accuracy on `n_windows` teacher windows against generated
/// windows of the given policy trajectories.
pub fn measure_discriminator<T: Scalar, R: Rng + ?Sized>(
    bundle: &ModelBundle<T>,
    teacher: &[StateTrajectory],
    policy: &[StateTrajectory],
    n_windows: usize,
    window: usize,
    rng: &mut R,
) -> Result<f64> {
    let real = sample_windows(teacher, n_windows, window, rng)?;
    let policy_windows = sample_windows(policy, n_windows, window, rng)?;
    let fake = generate_windows(
        &bundle.policy,
        &bundle.generator,
        &bundle.store,
        &policy_windows,
    )?;
    discriminator_accuracy(&bundle.discriminator, &bundle.store, &real, &fake)
}

/// Splits each episode into consecutive chunks of `window` transitions and
/// appends a chunk to the sample set when `judge` scores it at least 0.5.
/// Returns the number of appended transitions.
pub fn filter_append<F>(
    samples: &mut SampleSet,
    episodes: &[Vec<Transition>],
    window: usize,
    mut judge: F,
) -> Result<usize>
where
    F: FnMut(&[Transition]) -> Result<f64>,
{
    if window == 0 {
        return Err(Error::Usage("window length must be positive".into()));
    }
    let mut appended = 0;
    for ep in episodes {
        for chunk in ep.chunks(window) {
            if judge(chunk)? >= 0.5 {
                samples.extend(chunk.iter().cloned(), crate::data::Provenance::Policy);
                appended += chunk.len();
            }
        }
    }
    Ok(appended)
}

/// Discriminator score of the generator's reconstruction of a chunk of
/// policy transitions, using the actions actually taken.
pub fn score_generated<T: Scalar>(
    generator: &GeneratorModel,
    disc: &DiscriminatorModel,
    store: &ParamStore<T>,
    chunk: &[Transition],
) -> Result<f64> {
    let states: Vec<&[f64]> = chunk.iter().map(|t| t.state.as_slice()).collect();
    let actions: Vec<ActionId> = chunk.iter().map(|t| t.action).collect();
    let generated = generator.predict_batch(store, &states, &actions)?;
    disc.score(store, &generated)
}

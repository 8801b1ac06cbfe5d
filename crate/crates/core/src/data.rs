//! Transitions, trajectories, the replay buffer and trajectory files.

use std::collections::VecDeque;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ActionId, Env, EnvName, StateVec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: StateVec,
    pub action: ActionId,
    pub next_state: StateVec,
}

/// A recorded episode. `hidden_actions` are the ground-truth actions and
/// are only read by the labelled baseline and by diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub states: Vec<StateVec>,
    #[serde(rename = "actions", default, skip_serializing_if = "Option::is_none")]
    pub hidden_actions: Option<Vec<ActionId>>,
    #[serde(rename = "return")]
    pub episode_return: f64,
}

impl Trajectory {
    pub fn transitions(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    /// Drops the actions.
    pub fn state_only(&self) -> StateTrajectory {
        StateTrajectory {
            states: self.states.clone(),
            episode_return: self.episode_return,
        }
    }

    fn validate(&self, state_dim: usize, action_count: usize) -> std::result::Result<(), String> {
        if self.states.is_empty() {
            return Err("trajectory has no states".into());
        }
        if let Some(s) = self.states.iter().find(|s| s.len() != state_dim) {
            return Err(format!(
                "state has {} values, manifest says {state_dim}",
                s.len()
            ));
        }
        if self.states.iter().flatten().any(|v| !v.is_finite()) {
            return Err("non-finite state value".into());
        }
        if let Some(actions) = &self.hidden_actions {
            if actions.len() != self.transitions() {
                return Err(format!(
                    "{} actions for {} transitions",
                    actions.len(),
                    self.transitions()
                ));
            }
            if let Some(a) = actions.iter().find(|&&a| a >= action_count) {
                return Err(format!("action {a} out of range"));
            }
        }
        if !self.episode_return.is_finite() {
            return Err("non-finite return".into());
        }
        Ok(())
    }
}

/// A trajectory without actions. This is the only form of teacher data the
/// imitation learner accepts.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub states: Vec<StateVec>,
    pub episode_return: f64,
}

pub fn state_only(trajectories: &[Trajectory]) -> Vec<StateTrajectory> {
    trajectories.iter().map(Trajectory::state_only).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Random,
    Policy,
}

/// Labelled transitions the inverse dynamics model trains on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    transitions: Vec<Transition>,
    provenance: Vec<Provenance>,
}

impl SampleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: Transition, tag: Provenance) {
        self.transitions.push(t);
        self.provenance.push(tag);
    }

    pub fn extend(&mut self, ts: impl IntoIterator<Item = Transition>, tag: Provenance) {
        for t in ts {
            self.push(t, tag);
        }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn count(&self, tag: Provenance) -> usize {
        self.provenance.iter().filter(|&&p| p == tag).count()
    }
}

/// Bounded FIFO of policy trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    trajectories: VecDeque<StateTrajectory>,
}

pub const REPLAY_CAPACITY: usize = 500;

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config(
                "replay buffer capacity must be positive".into(),
            ));
        }
        Ok(ReplayBuffer {
            capacity,
            trajectories: VecDeque::with_capacity(capacity),
        })
    }

    pub fn push(&mut self, t: StateTrajectory) {
        if self.trajectories.len() == self.capacity {
            self.trajectories.pop_front();
        }
        self.trajectories.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &StateTrajectory> {
        self.trajectories.iter()
    }

    /// Contiguous copy, oldest first.
    pub fn to_vec(&self) -> Vec<StateTrajectory> {
        self.trajectories.iter().cloned().collect()
    }
}

/// Plays `n_episodes` with uniformly random actions.
pub fn collect_random<R: Rng + ?Sized>(
    env: &mut Env,
    n_episodes: usize,
    rng: &mut R,
) -> Result<SampleSet> {
    if n_episodes == 0 {
        return Err(Error::Usage(
            "collect_random needs at least one episode".into(),
        ));
    }
    let k = env.spec().action_count;
    let mut set = SampleSet::new();
    for _ in 0..n_episodes {
        let mut state = env.reset();
        loop {
            let action = rng.gen_range(0..k);
            let step = env.step(action)?;
            let next = step.next_state.clone();
            set.push(
                Transition {
                    state,
                    action,
                    next_state: next.clone(),
                },
                Provenance::Random,
            );
            state = next;
            if step.done {
                break;
            }
        }
    }
    Ok(set)
}

/// A fixed-length run of states; `valid[t]` is false on padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub states: Vec<StateVec>,
    pub valid: Vec<bool>,
}

impl Window {
    /// Takes `len` states starting at `start`, repeating the final state
    /// (marked invalid) past the end.
    pub fn cut(states: &[StateVec], start: usize, len: usize) -> Self {
        let last = states.len() - 1;
        let mut out = Vec::with_capacity(len);
        let mut valid = Vec::with_capacity(len);
        for t in 0..len {
            let i = start + t;
            out.push(states[i.min(last)].clone());
            valid.push(i <= last);
        }
        Window { states: out, valid }
    }

    pub fn pairs(&self) -> Vec<(&[f64], bool)> {
        self.states
            .iter()
            .map(Vec::as_slice)
            .zip(self.valid.iter().copied())
            .collect()
    }
}

/// Draws `k` windows of `len` states: a trajectory uniformly, then a start
/// offset uniformly among those that fit.
pub fn sample_windows<R: Rng + ?Sized>(
    source: &[StateTrajectory],
    k: usize,
    len: usize,
    rng: &mut R,
) -> Result<Vec<Window>> {
    if k == 0 || len == 0 {
        return Err(Error::Usage(
            "window count and length must be positive".into(),
        ));
    }
    if source.is_empty() || source.iter().any(|t| t.states.is_empty()) {
        return Err(Error::Usage(
            "cannot sample windows from an empty source".into(),
        ));
    }
    Ok((0..k)
        .map(|_| {
            let traj = &source[rng.gen_range(0..source.len())];
            let slack = traj.states.len().saturating_sub(len);
            let start = rng.gen_range(0..=slack);
            Window::cut(&traj.states, start, len)
        })
        .collect())
}

/// Sidecar metadata for a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryManifest {
    pub env: EnvName,
    pub state_dim: usize,
    pub action_count: usize,
    pub seed: u64,
    /// How the file was produced, when it came from a scripted controller.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GenerationInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationInfo {
    pub controller: String,
    pub episodes: usize,
    pub min_return: f64,
}

impl TrajectoryManifest {
    pub fn new(env: EnvName, seed: u64) -> Self {
        let spec = env.spec();
        TrajectoryManifest {
            env,
            state_dim: spec.state_dim,
            action_count: spec.action_count,
            seed,
            generator: None,
        }
    }
}

/// `teacher.jsonl` -> `teacher.manifest.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    path.with_extension("manifest.json")
}

pub fn save_trajectories(
    path: &Path,
    manifest: &TrajectoryManifest,
    trajectories: &[Trajectory],
) -> Result<()> {
    for (i, t) in trajectories.iter().enumerate() {
        t.validate(manifest.state_dim, manifest.action_count)
            .map_err(|m| Error::Validation(format!("trajectory {i}: {m}")))?;
    }
    let mpath = manifest_path(path);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&mpath, text + "\n").map_err(|e| Error::io(&mpath, e))?;

    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for t in trajectories {
        serde_json::to_writer(&mut out, t).expect("trajectory serializes");
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_manifest(path: &Path) -> Result<TrajectoryManifest> {
    let mpath = manifest_path(path);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: TrajectoryManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: mpath.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let spec = manifest.env.spec();
    if spec.state_dim != manifest.state_dim || spec.action_count != manifest.action_count {
        return Err(Error::Validation(format!(
            "{}: {} has state_dim {} and {} actions, manifest says {} and {}",
            mpath.display(),
            manifest.env,
            spec.state_dim,
            spec.action_count,
            manifest.state_dim,
            manifest.action_count
        )));
    }
    Ok(manifest)
}

/// Reads a trajectory file and its manifest, validating every line.
pub fn load_trajectories(path: &Path) -> Result<(TrajectoryManifest, Vec<Trajectory>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let manifest = load_manifest(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let t: Trajectory = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        t.validate(manifest.state_dim, manifest.action_count)
            .map_err(|m| Error::Validation(format!("{} line {}: {m}", path.display(), i + 1)))?;
        out.push(t);
    }
    Ok((manifest, out))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn traj(id: f64, len: usize) -> StateTrajectory {
        StateTrajectory {
            states: (0..len).map(|t| vec![id, t as f64]).collect(),
            episode_return: id,
        }
    }

    fn random_trajectory(rng: &mut ChaCha8Rng, dim: usize) -> Trajectory {
        let n = rng.gen_range(1..30);
        let states: Vec<StateVec> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen::<f64>() * 1e3 - 5e2).collect())
            .collect();
        let actions =
            (n > 1 && rng.gen_bool(0.5)).then(|| (0..n - 1).map(|_| rng.gen_range(0..3)).collect());
        Trajectory {
            states,
            hidden_actions: actions,
            episode_return: rng.gen::<f64>() * -200.0,
        }
    }

    #[test]
    fn random_mountain_car_episode_is_truncated() {
        let mut env = Env::new(EnvName::MountainCar, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let set = collect_random(&mut env, 1, &mut rng).unwrap();
        assert_eq!(set.len(), 200);
        assert_eq!(set.count(Provenance::Random), 200);
    }

    #[test]
    fn random_actions_are_uniform() {
        let mut env = Env::new(EnvName::MountainCar, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set = collect_random(&mut env, 50, &mut rng).unwrap();
        let n = set.len() as f64;
        let mut counts = [0.0; 3];
        for t in set.transitions() {
            counts[t.action] += 1.0;
        }
        let chi2: f64 = counts
            .iter()
            .map(|c| (c - n / 3.0).powi(2) / (n / 3.0))
            .sum();
        // 99% quantile of chi-square with 2 degrees of freedom
        assert!(chi2 < 9.21, "chi2 {chi2}");
    }

    #[test]
    fn random_transitions_replay_through_the_env() {
        for name in EnvName::ALL {
            let mut env = Env::new(name, 2);
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let set = collect_random(&mut env, 3, &mut rng).unwrap();
            let mut replay = Env::new(name, 99);
            for t in set.transitions() {
                replay.set_observation(&t.state).unwrap();
                let next = replay.step(t.action).unwrap().next_state;
                for (a, b) in next.iter().zip(&t.next_state) {
                    assert!((a - b).abs() <= 1e-9, "{name}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn full_length_window_is_the_trajectory() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = traj(1.0, 32);
        let w = sample_windows(std::slice::from_ref(&t), 1, 32, &mut rng).unwrap();
        assert_eq!(w[0].states, t.states);
        assert!(w[0].valid.iter().all(|&v| v));
    }

    #[test]
    fn short_trajectories_are_padded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = traj(1.0, 5);
        let w = &sample_windows(std::slice::from_ref(&t), 3, 8, &mut rng).unwrap()[0];
        assert_eq!(w.states.len(), 8);
        assert_eq!(&w.states[..5], &t.states[..]);
        assert!(w.states[5..].iter().all(|s| s == &t.states[4]));
        assert_eq!(w.valid, [true, true, true, true, true, false, false, false]);
    }

    #[test]
    fn window_sampling_is_uniform_over_trajectories() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let src = [traj(0.0, 50), traj(1.0, 50)];
        let w = sample_windows(&src, 10_000, 16, &mut rng).unwrap();
        assert!(w.iter().all(|w| w.states.len() == 16));
        let ones = w.iter().filter(|w| w.states[0][0] == 1.0).count() as f64 / 1e4;
        assert!((ones - 0.5).abs() <= 0.02, "{ones}");
    }

    #[test]
    fn window_sampling_rejects_bad_requests() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!(matches!(
            sample_windows(&[traj(0.0, 4)], 0, 4, &mut rng),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            sample_windows(&[], 1, 4, &mut rng),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn trajectory_file_roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let manifest = TrajectoryManifest::new(EnvName::Acrobot, 7);
        let trajs: Vec<_> = (0..10).map(|_| random_trajectory(&mut rng, 6)).collect();
        save_trajectories(&path, &manifest, &trajs).unwrap();
        let (m, back) = load_trajectories(&path).unwrap();
        assert_eq!(m, manifest);
        assert_eq!(back.len(), 10);
        for (a, b) in trajs.iter().zip(&back) {
            assert_eq!(a.hidden_actions, b.hidden_actions);
            assert_eq!(a.episode_return.to_bits(), b.episode_return.to_bits());
            for (x, y) in a.states.iter().flatten().zip(b.states.iter().flatten()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_trajectories(&dir.path().join("nope.jsonl")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let manifest = TrajectoryManifest::new(EnvName::MountainCar, 0);
        save_trajectories(&path, &manifest, &[]).unwrap();
        fs::write(
            &path,
            "{\"states\":[[0.0,0.0]],\"return\":0.0}\n{\"states\": [[0.0,\n",
        )
        .unwrap();
        match load_trajectories(&path).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn state_dimension_conflict_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let manifest = TrajectoryManifest::new(EnvName::CartPole, 0);
        save_trajectories(&path, &manifest, &[]).unwrap();
        fs::write(&path, "{\"states\":[[0.0,0.0]],\"return\":1.0}\n").unwrap();
        assert!(matches!(
            load_trajectories(&path),
            Err(Error::Validation(_))
        ));

        // manifest that disagrees with its own env
        let bad = TrajectoryManifest {
            state_dim: 3,
            ..manifest
        };
        fs::write(manifest_path(&path), serde_json::to_string(&bad).unwrap()).unwrap();
        assert!(matches!(
            load_trajectories(&path),
            Err(Error::Validation(_))
        ));
    }

    proptest! {
        #[test]
        fn replay_buffer_is_fifo(capacity in 1usize..20, extra in 0usize..20) {
            let mut rb = ReplayBuffer::new(capacity).unwrap();
            for i in 0..capacity + extra {
                rb.push(traj(i as f64, 2));
                prop_assert!(rb.len() <= capacity);
            }
            let ids: Vec<f64> = rb.iter().map(|t| t.episode_return).collect();
            let expected: Vec<f64> = (extra..capacity + extra).map(|i| i as f64).collect();
            prop_assert_eq!(ids, expected);
        }

        #[test]
        fn sample_set_append_preserves_order(n in 0usize..50) {
            let mut set = SampleSet::new();
            for i in 0..n {
                let tag = if i % 2 == 0 { Provenance::Random } else { Provenance::Policy };
                set.push(Transition { state: vec![i as f64], action: 0, next_state: vec![0.0] }, tag);
            }
            for (i, t) in set.transitions().iter().enumerate() {
                prop_assert_eq!(t.state[0], i as f64);
            }
        }
    }
}

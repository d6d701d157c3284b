use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::adam::{lr_schedule, Adam};
use super::buffer::{RolloutBuffer, Transition};
use super::checkpoint::{
    checkpoint_file_name, config_hash, latest_checkpoint, Checkpoint, CheckpointHeader, FORMAT_VERSION,
};
use super::config::TrainConfig;
use super::gaussian::sample_action;
use super::network::{PolicyNet, Real};
use super::ppo::{ppo_update, UpdateStats};
use crate::env::{EnvConfig, Observation, RacingEnv, StepResult, OBS_DIM};
use crate::error::{Error, Result};
use crate::telemetry::{write_telemetry, EvalEntry, StepRecord, TrainLogEntry, UpdateEntry};
use crate::track::{Track, TrackPoint};
use crate::vehicle::VehicleParams;

/// Everything that defines a training run.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub track: Arc<Track>,
    pub vehicle: VehicleParams,
    pub env: EnvConfig,
    pub train: TrainConfig,
}

impl RunSetup {
    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate()?;
        self.env.validate()?;
        self.train.validate()
    }

    pub fn action_dim(&self) -> usize {
        self.env.actuation_mode.action_dim()
    }

    /// SHA-256 over the full effective configuration including the track
    /// geometry.
    pub fn config_hash(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Hashed<'a> {
            train: &'a TrainConfig,
            env: &'a EnvConfig,
            vehicle: &'a VehicleParams,
            track_name: &'a str,
            track_closed: bool,
            track_points: &'a [TrackPoint],
        }
        config_hash(&Hashed {
            train: &self.train,
            env: &self.env,
            vehicle: &self.vehicle,
            track_name: self.track.name(),
            track_closed: self.track.is_closed(),
            track_points: self.track.points(),
        })
    }

    pub fn make_env(&self) -> Result<RacingEnv> {
        RacingEnv::new(self.track.clone(), self.vehicle, self.env.clone())
    }
}

/// splitmix64 of a seed and two stream indices.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z =
        seed.wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Result of one evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeReport {
    /// Termination kind name, or `truncated` when a step cap ended it.
    pub termination: String,
    pub lap_time: Option<f64>,
    pub steps: usize,
    pub distance: f64,
    pub episode_return: f64,
    pub records: Vec<StepRecord>,
}

fn termination_label(r: &StepResult) -> String {
    if r.terminated {
        r.termination_kind.as_str().to_string()
    } else {
        "truncated".to_string()
    }
}

fn obs_row<F: Real>(obs: &Observation) -> Array2<F> {
    Array2::from_shape_fn((1, OBS_DIM), |(_, c)| F::from_f64(obs.0[c]))
}

/// Runs episodes with the deterministic policy mean. `max_steps` caps each
/// episode.
pub fn evaluate<F: Real>(
    net: &PolicyNet<F>,
    env: &mut RacingEnv,
    episodes: usize,
    max_steps: usize,
    seed: u64,
) -> Result<Vec<EpisodeReport>> {
    if net.spec().action_dim != env.action_dim() {
        return Err(Error::Dimension {
            context: "policy action dimension vs environment",
            expected: env.action_dim(),
            actual: net.spec().action_dim,
        });
    }
    let agent_dt = env.config().agent_dt;
    let mut reports = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let mut obs = env.reset(derive_seed(seed, ep as u64, 0));
        let mut records = Vec::new();
        let mut ret = 0.0;
        let mut last = None;
        for _ in 0..max_steps {
            let means = net.forward_means(&obs_row::<F>(&obs).view())?;
            let action: Vec<f64> = means.row(0).iter().map(|m| m.as_f64()).collect();
            let r = env.step(&action)?;
            ret += r.reward;
            records.push(StepRecord::from_step(&r, env.state(), env.vehicle(), agent_dt));
            obs = r.observation;
            let done = r.done();
            last = Some(r);
            if done {
                break;
            }
        }
        let last = last.ok_or(Error::Empty("evaluation episode with zero steps"))?;
        let termination = if last.done() { termination_label(&last) } else { "truncated".to_string() };
        reports.push(EpisodeReport {
            termination,
            lap_time: last.info.lap_time,
            steps: last.info.timestep,
            distance: last.info.distance,
            episode_return: ret,
            records,
        });
    }
    Ok(reports)
}

struct EnvSlot {
    env: RacingEnv,
    obs: Observation,
    rng: ChaCha8Rng,
    index: u64,
    episode: u64,
    episode_return: f64,
}

struct SlotStep {
    action: Vec<f64>,
    log_prob: f64,
    result: StepResult,
}

/// Stochastic-episode statistics between two evaluations.
#[derive(Debug, Clone, Default)]
struct ExploredStats {
    episodes: usize,
    laps: usize,
    best_lap: Option<f64>,
    terminations: BTreeMap<String, usize>,
}

impl ExploredStats {
    fn add(&mut self, label: &str, lap: Option<f64>) {
        self.episodes += 1;
        *self.terminations.entry(label.to_string()).or_insert(0) += 1;
        if let Some(t) = lap {
            self.laps += 1;
            self.best_lap = Some(self.best_lap.map_or(t, |b| b.min(t)));
        }
    }
}

/// Progress notification after each update.
#[derive(Debug, Clone)]
pub struct Progress<'a> {
    pub update: &'a UpdateEntry,
    pub eval: Option<&'a EvalEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub steps: u64,
    pub updates: u64,
    pub best_eval_lap: Option<f64>,
    pub last_checkpoint: Option<PathBuf>,
}

/// Files a training run writes under its output directory.
#[derive(Debug, Clone)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunLayout { root: root.into() }
    }
    pub fn log(&self) -> PathBuf {
        self.root.join("train_log.jsonl")
    }
    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }
    pub fn best_checkpoint(&self) -> PathBuf {
        self.checkpoints().join("best.ckpt")
    }
    pub fn eval_dir(&self) -> PathBuf {
        self.root.join("eval")
    }
}

/// Number of step-numbered checkpoints kept on disk.
const KEEP_CHECKPOINTS: usize = 2;

pub struct Trainer {
    setup: RunSetup,
    layout: RunLayout,
    net: PolicyNet<f32>,
    adam: Adam<f32>,
    slots: Vec<EnvSlot>,
    eval_env: RacingEnv,
    buffer: RolloutBuffer,
    update_rng: ChaCha8Rng,
    step: u64,
    updates: u64,
    next_eval: u64,
    config_hash: String,
    explored: ExploredStats,
    best_eval_lap: Option<f64>,
    pool: Option<rayon::ThreadPool>,
    log: File,
    saved: Vec<PathBuf>,
}

impl Trainer {
    /// Fresh run writing into `out_dir`.
    pub fn new(setup: RunSetup, out_dir: &Path) -> Result<Self> {
        setup.validate()?;
        let spec = setup.train.policy_spec(setup.action_dim());
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(setup.train.seed, 0, 0));
        let net = PolicyNet::<f32>::init(spec, &mut init_rng)?;
        let adam = Adam::new(net.params().len(), setup.train.adam);
        Self::assemble(setup, out_dir, net, adam, 0, 0, false)
    }

    /// Continues from the latest checkpoint in `out_dir`.
    pub fn resume(setup: RunSetup, out_dir: &Path) -> Result<Self> {
        setup.validate()?;
        let layout = RunLayout::new(out_dir);
        let path = latest_checkpoint(&layout.checkpoints())?.ok_or_else(|| {
            Error::Checkpoint(format!("nothing to resume: no checkpoint in {}", layout.checkpoints().display()))
        })?;
        let ckpt = Checkpoint::load(&path)?;
        if ckpt.header.spec.action_dim != setup.action_dim() {
            return Err(Error::Dimension {
                context: "checkpoint action dimension vs environment",
                expected: setup.action_dim(),
                actual: ckpt.header.spec.action_dim,
            });
        }
        if ckpt.header.spec != setup.train.policy_spec(setup.action_dim()) {
            return Err(Error::Checkpoint("checkpoint network layout differs from the configured one".into()));
        }
        if ckpt.header.config_hash != setup.config_hash()? {
            log::warn!("resuming with a configuration that differs from the checkpoint's");
        }
        let adam = ckpt.optimizer.clone().unwrap_or_else(|| Adam::new(ckpt.net.params().len(), setup.train.adam));
        log::info!("resuming from {} at step {}", path.display(), ckpt.header.step);
        Self::assemble(setup, out_dir, ckpt.net, adam, ckpt.header.step, ckpt.header.updates, true)
    }

    fn assemble(
        setup: RunSetup,
        out_dir: &Path,
        net: PolicyNet<f32>,
        adam: Adam<f32>,
        step: u64,
        updates: u64,
        append: bool,
    ) -> Result<Self> {
        let layout = RunLayout::new(out_dir);
        for d in [layout.root.clone(), layout.checkpoints(), layout.eval_dir()] {
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        let log_path = layout.log();
        let log = OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(&log_path)
            .map_err(|e| Error::io(&log_path, e))?;
        let t = &setup.train;
        let mut slots = Vec::with_capacity(t.n_envs);
        for i in 0..t.n_envs as u64 {
            let mut env = setup.make_env()?;
            let obs = env.reset(derive_seed(t.seed, i + 1, step));
            slots.push(EnvSlot {
                env,
                obs,
                rng: ChaCha8Rng::seed_from_u64(derive_seed(t.seed, i + 1, step.wrapping_add(1))),
                index: i,
                episode: 0,
                episode_return: 0.0,
            });
        }
        let pool = match t.threads {
            Some(1) => None,
            Some(n) => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::param("threads", e.to_string()))?,
            ),
            None => None,
        };
        let eval_env = setup.make_env()?;
        let buffer = RolloutBuffer::new(t.n_envs, t.rollout_horizon, OBS_DIM, setup.action_dim());
        let config_hash = setup.config_hash()?;
        let next_eval = (step / t.eval_interval + 1) * t.eval_interval;
        let update_rng = ChaCha8Rng::seed_from_u64(derive_seed(t.seed, u64::MAX, step));
        let mut saved: Vec<PathBuf> = Vec::new();
        if let Some(p) = latest_checkpoint(&layout.checkpoints())? {
            saved.push(p);
        }
        Ok(Trainer {
            setup,
            layout,
            net,
            adam,
            slots,
            eval_env,
            buffer,
            update_rng,
            step,
            updates,
            next_eval,
            config_hash,
            explored: ExploredStats::default(),
            best_eval_lap: None,
            pool,
            log,
            saved,
        })
    }

    pub fn net(&self) -> &PolicyNet<f32> {
        &self.net
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn layout(&self) -> &RunLayout {
        &self.layout
    }

    fn write_log(&mut self, entry: &TrainLogEntry) -> Result<()> {
        let mut line = serde_json::to_string(entry)?;
        line.push('\n');
        let path = self.layout.log();
        self.log.write_all(line.as_bytes()).map_err(|e| Error::io(&path, e))?;
        self.log.flush().map_err(|e| Error::io(&path, e))
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            header: CheckpointHeader {
                format_version: FORMAT_VERSION,
                spec: self.net.spec().clone(),
                step: self.step,
                updates: self.updates,
                config_hash: self.config_hash.clone(),
                actuation_mode: self.setup.env.actuation_mode.as_str().to_string(),
                adam: self.adam.config,
                adam_steps: self.adam.steps,
            },
            net: self.net.clone(),
            optimizer: Some(self.adam.clone()),
        }
    }

    fn save_checkpoint(&mut self) -> Result<PathBuf> {
        let path = self.layout.checkpoints().join(checkpoint_file_name(self.step));
        self.checkpoint().save(&path)?;
        if !self.saved.contains(&path) {
            self.saved.push(path.clone());
        }
        while self.saved.len() > KEEP_CHECKPOINTS {
            let old = self.saved.remove(0);
            let _ = std::fs::remove_file(old);
        }
        Ok(path)
    }

    /// Collects one rollout of `rollout_horizon` steps per env.
    fn collect(&mut self) -> Result<(usize, f64, usize, Option<f64>)> {
        let gamma = self.setup.train.gamma;
        let n = self.slots.len();
        let log_std: Vec<f64> = self.net.log_std().iter().map(|v| *v as f64).collect();
        self.buffer.clear();
        let (mut episodes, mut return_sum, mut laps, mut best_lap) = (0usize, 0.0, 0usize, None::<f64>);
        for _ in 0..self.setup.train.rollout_horizon {
            let obs = Array2::from_shape_fn((n, OBS_DIM), |(r, c)| self.slots[r].obs.0[c] as f32);
            let out = self.net.forward(&obs.view())?;
            let means: Vec<Vec<f64>> =
                out.means.rows().into_iter().map(|r| r.iter().map(|&m| m as f64).collect()).collect();
            let step_slot = |(slot, mean): (&mut EnvSlot, &Vec<f64>)| -> Result<SlotStep> {
                let (action, log_prob) = sample_action(mean, &log_std, &mut slot.rng, false);
                let result = slot.env.step(&action)?;
                Ok(SlotStep { action, log_prob, result })
            };
            let steps: Vec<Result<SlotStep>> = match &self.pool {
                None if self.setup.train.threads == Some(1) => {
                    self.slots.iter_mut().zip(&means).map(step_slot).collect()
                }
                None => self.slots.par_iter_mut().zip(&means).map(step_slot).collect(),
                Some(pool) => pool.install(|| self.slots.par_iter_mut().zip(&means).map(step_slot).collect()),
            };
            let mut truncated = Vec::new();
            for (i, s) in steps.into_iter().enumerate() {
                let s = s?;
                let obs_before = self.slots[i].obs;
                self.buffer.push(
                    i,
                    Transition {
                        observation: obs_before.as_slice(),
                        action: &s.action,
                        log_prob: s.log_prob,
                        value: out.values[i] as f64,
                        reward: s.result.reward,
                        done: s.result.done(),
                    },
                )?;
                let slot = &mut self.slots[i];
                slot.episode_return += s.result.reward;
                if s.result.done() {
                    if s.result.truncated {
                        truncated.push((i, s.result.observation));
                    }
                    let label = termination_label(&s.result);
                    let lap = s.result.info.lap_time;
                    self.explored.add(&label, lap);
                    episodes += 1;
                    return_sum += slot.episode_return;
                    if let Some(t) = lap {
                        laps += 1;
                        best_lap = Some(best_lap.map_or(t, |b: f64| b.min(t)));
                    }
                    slot.episode += 1;
                    slot.episode_return = 0.0;
                    slot.obs = slot.env.reset(derive_seed(self.setup.train.seed, slot.index + 1, slot.episode));
                } else {
                    slot.obs = s.result.observation;
                }
            }
            if !truncated.is_empty() {
                let obs = Array2::from_shape_fn((truncated.len(), OBS_DIM), |(r, c)| truncated[r].1 .0[c] as f32);
                let values = self.net.forward(&obs.view())?.values;
                for (k, (i, _)) in truncated.iter().enumerate() {
                    self.buffer.add_to_last_reward(*i, gamma * values[k] as f64);
                }
            }
        }
        let obs = Array2::from_shape_fn((n, OBS_DIM), |(r, c)| self.slots[r].obs.0[c] as f32);
        let bootstrap: Vec<f64> = self.net.forward(&obs.view())?.values.iter().map(|v| *v as f64).collect();
        self.buffer.finalize(&bootstrap, self.setup.train.gamma, self.setup.train.gae_lambda)?;
        let mean_return = if episodes > 0 { return_sum / episodes as f64 } else { f64::NAN };
        Ok((episodes, mean_return, laps, best_lap))
    }

    fn run_eval(&mut self) -> Result<EvalEntry> {
        let t = &self.setup.train;
        let reports = evaluate(&self.net, &mut self.eval_env, t.eval_episodes, t.eval_max_steps, t.seed)?;
        let best = reports
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                let key = |r: &EpisodeReport| (r.lap_time.is_none(), r.lap_time.unwrap_or(0.0), -r.distance);
                key(a).partial_cmp(&key(b)).expect("finite lap stats")
            })
            .map(|(i, _)| i)
            .expect("at least one eval episode");
        let rep = &reports[best];
        write_telemetry(&self.layout.eval_dir().join("latest.csv"), &rep.records)?;
        if let Some(lap) = rep.lap_time {
            if self.best_eval_lap.is_none_or(|b| lap < b) {
                self.best_eval_lap = Some(lap);
                write_telemetry(&self.layout.eval_dir().join("best.csv"), &rep.records)?;
                self.checkpoint().save(&self.layout.best_checkpoint())?;
            }
        }
        let explored = std::mem::take(&mut self.explored);
        Ok(EvalEntry {
            step: self.step,
            explored_lap_time: explored.best_lap,
            explored_episodes: explored.episodes,
            explored_laps: explored.laps,
            explored_terminations: explored.terminations,
            exploited_lap_time: rep.lap_time,
            exploited_termination: rep.termination.clone(),
            exploited_distance: rep.distance,
            exploited_return: rep.episode_return,
            exploited_steps: rep.steps,
        })
    }

    /// Trains until `max_steps`, calling `progress` after every update.
    pub fn run(&mut self, mut progress: impl FnMut(Progress<'_>)) -> Result<TrainSummary> {
        let max_steps = self.setup.train.max_steps;
        let mut last_saved_step = None;
        let mut last_checkpoint = None;
        while self.step < max_steps {
            let lr =
                lr_schedule(self.step as f64 / max_steps as f64, self.setup.train.lr_start, self.setup.train.lr_end);
            let (episodes, mean_return, laps, best_lap) = self.collect()?;
            self.step += self.setup.train.rollout_size() as u64;
            let stats: UpdateStats =
                ppo_update(&mut self.net, &mut self.adam, &self.buffer, &self.setup.train, lr, &mut self.update_rng)?;
            self.updates += 1;
            let update = UpdateEntry {
                step: self.step,
                update: self.updates,
                learning_rate: lr,
                loss: stats.loss.total,
                policy_loss: stats.loss.policy,
                value_loss: stats.loss.value,
                entropy: stats.loss.entropy,
                approx_kl: stats.loss.approx_kl,
                clip_fraction: stats.loss.clip_fraction,
                grad_norm: stats.grad_norm,
                explained_variance: stats.explained_variance.is_finite().then_some(stats.explained_variance),
                episodes,
                mean_episode_return: mean_return.is_finite().then_some(mean_return),
                laps,
                best_lap_time: best_lap,
            };
            self.write_log(&TrainLogEntry::Update(update.clone()))?;
            let mut eval = None;
            if self.step >= self.next_eval {
                let e = self.run_eval()?;
                self.write_log(&TrainLogEntry::Eval(e.clone()))?;
                eval = Some(e);
                self.next_eval = (self.step / self.setup.train.eval_interval + 1) * self.setup.train.eval_interval;
                last_checkpoint = Some(self.save_checkpoint()?);
                last_saved_step = Some(self.step);
            }
            progress(Progress { update: &update, eval: eval.as_ref() });
        }
        if last_saved_step != Some(self.step) {
            last_checkpoint = Some(self.save_checkpoint()?);
        }
        Ok(TrainSummary { steps: self.step, updates: self.updates, best_eval_lap: self.best_eval_lap, last_checkpoint })
    }
}

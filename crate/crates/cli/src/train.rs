use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, Context};
use racelab_core::policy::{Progress, RunSetup, Trainer};
use racelab_core::vehicle::VehicleParams;

use crate::config::{
    create_run_dir, default_output, output_path, resolve_track, rewrite_snapshot, RunConfig, SNAPSHOT,
};
use crate::{Failure, Outcome, Stage, TrainArgs};

/// Effective configuration: file (or the run's snapshot when resuming),
/// then flags on top.
fn effective_config(args: &TrainArgs, out: &Path) -> anyhow::Result<RunConfig> {
    let snapshot = out.join(SNAPSHOT);
    let mut cfg = match (&args.config, args.resume && snapshot.exists()) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, true) => RunConfig::load(&snapshot)?,
        (None, false) => RunConfig::default(),
    };
    if let Some(t) = &args.track {
        cfg.track = t.clone();
    }
    if let Some(v) = &args.vehicle {
        cfg.vehicle = VehicleParams::load(v).with_context(|| format!("loading vehicle {}", v.display()))?;
    }
    if let Some(m) = args.mode {
        cfg.env.actuation_mode = m.into();
    }
    if let Some(n) = args.max_steps {
        cfg.train.max_steps = n;
    }
    if let Some(s) = args.seed {
        cfg.train.seed = s;
        cfg.env.seed = s;
    }
    if let Some(n) = args.n_envs {
        cfg.train.n_envs = n;
    }
    if let Some(n) = args.threads {
        cfg.train.threads = Some(n);
    }
    if let Some(n) = args.eval_interval {
        cfg.train.eval_interval = n;
    }
    if args.deterministic {
        cfg.train.threads = Some(1);
    }
    // a file path is pinned so the snapshot stays valid from any directory
    if !matches!(cfg.track.as_str(), "oval" | "paper_scale") {
        let p = PathBuf::from(&cfg.track);
        if let Ok(abs) = p.canonicalize() {
            cfg.track = abs.to_string_lossy().into_owned();
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(args: &TrainArgs) -> anyhow::Result<PathBuf> {
    if let Some(out) = &args.out {
        return Ok(output_path(out));
    }
    // the default name needs the effective track, mode and seed
    let cfg = effective_config(args, Path::new(""))?;
    let track =
        Path::new(&cfg.track).file_stem().map_or_else(|| cfg.track.clone(), |s| s.to_string_lossy().into_owned());
    Ok(default_output(&format!("{track}_{}_seed{}", cfg.env.actuation_mode.as_str(), cfg.train.seed)))
}

pub fn run(args: TrainArgs) -> Outcome {
    let out = output_dir(&args).config_err()?;
    let cfg = effective_config(&args, &out).config_err()?;
    let track = Arc::new(resolve_track(&cfg.track).config_err()?);
    let setup = RunSetup { track, vehicle: cfg.vehicle, env: cfg.env.clone(), train: cfg.train.clone() };
    setup.validate().config_err()?;
    let snapshot = cfg.to_toml().config_err()?;

    let mut trainer = if args.resume {
        if !out.exists() {
            return Err(Failure::Config(anyhow!("nothing to resume: {} does not exist", out.display())));
        }
        let trainer = Trainer::resume(setup, &out).config_err()?;
        rewrite_snapshot(&out, &snapshot).runtime_err()?;
        trainer
    } else {
        create_run_dir(&out, &snapshot).config_err()?;
        Trainer::new(setup, &out).runtime_err()?
    };

    println!(
        "training {} on {} with {} parameters, {} envs, {} steps -> {}",
        cfg.env.actuation_mode.as_str(),
        cfg.track,
        trainer.net().spec().param_count(),
        cfg.train.n_envs,
        cfg.train.max_steps,
        out.display()
    );
    let start = Instant::now();
    let start_step = trainer.step_count();
    let mut last_eval = String::from("-");
    let summary = trainer
        .run(|p: Progress<'_>| {
            if let Some(e) = p.eval {
                last_eval = match e.exploited_lap_time {
                    Some(t) => format!("{t:.2} s"),
                    None => format!("{} at {:.0} m", e.exploited_termination, e.exploited_distance),
                };
            }
            let u = p.update;
            let rate = (u.step - start_step) as f64 / start.elapsed().as_secs_f64().max(1e-9);
            let mean = u.mean_episode_return.map_or_else(|| "-".into(), |r| format!("{r:.2}"));
            println!(
                "update {:>5}  step {:>10}  {:>7.0} steps/s  mean episode reward {:>9}  last eval lap {}",
                u.update, u.step, rate, mean, last_eval
            );
        })
        .runtime_err()?;
    println!(
        "done: {} steps, {} updates, best eval lap {}, checkpoint {}",
        summary.steps,
        summary.updates,
        summary.best_eval_lap.map_or_else(|| "-".into(), |t| format!("{t:.2} s")),
        summary.last_checkpoint.as_deref().map_or_else(|| "-".into(), |p| p.display().to_string())
    );
    Ok(())
}

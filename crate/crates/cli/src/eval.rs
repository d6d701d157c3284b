use std::path::{Path, PathBuf};
use std::sync::Arc;

use racelab_core::env::{ActuationMode, RacingEnv};
use racelab_core::policy::{evaluate, Checkpoint};
use racelab_core::telemetry::{write_telemetry, EpisodeIndex, EpisodeIndexEntry};
use racelab_core::Error as CoreError;

use crate::config::{default_output, output_path, resolve_track, RunConfig, SNAPSHOT};
use crate::{EvalArgs, Failure, Outcome, Stage};

/// The snapshot of the run a checkpoint belongs to: next to it, or one level
/// up for checkpoints inside `checkpoints/`.
fn discover_config(checkpoint: &Path) -> Option<PathBuf> {
    checkpoint.ancestors().skip(1).take(2).map(|d| d.join(SNAPSHOT)).find(|p| p.exists())
}

pub fn run(args: EvalArgs) -> Outcome {
    let ckpt = Checkpoint::load(&args.checkpoint).config_err()?;
    let mut cfg = match args.config.clone().or_else(|| discover_config(&args.checkpoint)) {
        Some(path) => RunConfig::load(&path).config_err()?,
        None => RunConfig::default(),
    };
    if let Some(t) = &args.track {
        cfg.track = t.clone();
    }
    cfg.env.actuation_mode = match args.mode {
        Some(m) => m.into(),
        None => ActuationMode::parse(&ckpt.header.actuation_mode).ok_or_else(|| {
            Failure::Config(anyhow::anyhow!("checkpoint has unknown actuation mode `{}`", ckpt.header.actuation_mode))
        })?,
    };
    cfg.validate().config_err()?;
    let track = Arc::new(resolve_track(&cfg.track).config_err()?);
    let mut env = RacingEnv::new(track.clone(), cfg.vehicle, cfg.env.clone()).config_err()?;
    let max_steps = args.max_steps.unwrap_or(cfg.train.eval_max_steps);

    let reports = match evaluate(&ckpt.net, &mut env, args.episodes, max_steps, args.seed) {
        Err(e @ CoreError::Dimension { .. }) => return Err(Failure::Config(e.into())),
        other => other.runtime_err()?,
    };

    let out = match &args.out {
        Some(o) => output_path(o),
        None => {
            let stem = args.checkpoint.file_stem().map_or("checkpoint".into(), |s| s.to_string_lossy());
            default_output(&format!("eval_{stem}"))
        }
    };
    std::fs::create_dir_all(&out).runtime_err()?;
    let mut index = EpisodeIndex {
        track: track.name().to_string(),
        actuation_mode: cfg.env.actuation_mode.as_str().to_string(),
        episodes: Vec::new(),
    };
    println!(
        "{:>7}  {:<13} {:>10} {:>7} {:>11} {:>10}",
        "episode", "termination", "lap time", "steps", "distance", "return"
    );
    for (k, rep) in reports.iter().enumerate() {
        let file = format!("episode_{k:03}.csv");
        write_telemetry(&out.join(&file), &rep.records).runtime_err()?;
        let lap = rep.lap_time.map_or_else(|| "-".into(), |t| format!("{t:.2} s"));
        println!(
            "{:>7}  {:<13} {:>10} {:>7} {:>9.1} m {:>10.2}",
            k, rep.termination, lap, rep.steps, rep.distance, rep.episode_return
        );
        index.episodes.push(EpisodeIndexEntry {
            episode: k,
            file,
            termination: rep.termination.clone(),
            lap_time: rep.lap_time,
            steps: rep.steps,
            distance: rep.distance,
            episode_return: rep.episode_return,
        });
    }
    index.save(&out.join("index.json")).runtime_err()?;
    println!("telemetry written to {}", out.display());
    Ok(())
}

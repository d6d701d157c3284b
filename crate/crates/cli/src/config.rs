//! Run configuration files, track resolution and output directories.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use racelab_core::env::EnvConfig;
use racelab_core::policy::TrainConfig;
use racelab_core::track::{generate_circuit, load_track, CircuitKind, Track};
use racelab_core::vehicle::VehicleParams;
use serde::{Deserialize, Serialize};

/// Environment variable that relocates relative output paths.
pub const OUTPUT_ROOT_VAR: &str = "RACELAB_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";
/// Name of the effective-configuration snapshot inside a run directory.
pub const SNAPSHOT: &str = "config.toml";

/// Everything a training or evaluation run depends on. Missing keys take
/// their defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Track file path, or a built-in layout: `oval` or `paper_scale`.
    pub track: String,
    pub vehicle: VehicleParams,
    pub env: EnvConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            track: "oval".into(),
            vehicle: VehicleParams::default(),
            env: EnvConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).context("serializing run configuration")
    }

    /// Checks every section before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate().context("vehicle")?;
        self.env.validate().context("env")?;
        self.train.validate().context("train")?;
        Ok(())
    }
}

/// Resolves a track argument: a built-in layout name or a track file.
pub fn resolve_track(spec: &str) -> Result<Track> {
    let track = match spec {
        "oval" => generate_circuit(CircuitKind::oval_default())?,
        "paper_scale" => generate_circuit(CircuitKind::paper_scale_default())?,
        path => load_track(path).with_context(|| format!("loading track {path}"))?,
    };
    Ok(track)
}

/// Applies the output-root override to relative paths.
pub fn output_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) if path.is_relative() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}

/// Default location for generated outputs: `<root>/<name>`.
pub fn default_output(name: &str) -> PathBuf {
    let root = std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT), PathBuf::from);
    root.join(name)
}

/// Creates `dir` with the snapshot already inside it: everything is written
/// into a sibling temporary directory that is then renamed into place.
pub fn create_run_dir(dir: &Path, snapshot: &str) -> Result<()> {
    if dir.exists() {
        bail!(
            "output directory {} already exists; pass --resume to continue it or choose another --out",
            dir.display()
        );
    }
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    let name = dir.file_name().context("output directory has no name")?.to_string_lossy();
    let tmp = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp).with_context(|| format!("clearing {}", tmp.display()))?;
    }
    std::fs::create_dir(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    std::fs::write(tmp.join(SNAPSHOT), snapshot).context("writing config snapshot")?;
    std::fs::rename(&tmp, dir).with_context(|| format!("moving run directory into {}", dir.display()))
}

/// Replaces the snapshot of an existing run directory atomically.
pub fn rewrite_snapshot(dir: &Path, snapshot: &str) -> Result<()> {
    let tmp = dir.join(format!("{SNAPSHOT}.tmp"));
    std::fs::write(&tmp, snapshot).context("writing config snapshot")?;
    std::fs::rename(&tmp, dir.join(SNAPSHOT)).context("replacing config snapshot")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_reparses_to_the_same_config() {
        let mut cfg = RunConfig::default();
        cfg.env.max_episode_steps = Some(1234);
        cfg.env.reward.p_sc = 1.0 / 3.0;
        cfg.train.lr_start = 2.5e-4 / 7.0;
        cfg.train.threads = Some(1);
        cfg.track = "tracks/odd name.json".into();
        let text = cfg.to_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn partial_file_fills_defaults_and_rejects_unknown_keys() {
        let cfg: RunConfig = toml::from_str("track = \"paper_scale\"\n[train]\nn_envs = 8\n").unwrap();
        assert_eq!(cfg.train.n_envs, 8);
        assert_eq!(cfg.train.batch_size, 512);
        assert_eq!(cfg.track, "paper_scale");
        assert!(toml::from_str::<RunConfig>("[train]\nn_env = 8\n").is_err());
    }

    #[test]
    fn run_dir_is_created_with_snapshot() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("a/b");
        create_run_dir(&dir, "x = 1\n").unwrap();
        assert_eq!(std::fs::read_to_string(dir.join(SNAPSHOT)).unwrap(), "x = 1\n");
        assert!(create_run_dir(&dir, "").is_err());
        let leftovers = std::fs::read_dir(tmp.path().join("a")).unwrap().count();
        assert_eq!(leftovers, 1);
    }
}

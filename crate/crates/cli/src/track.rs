use anyhow::Context;
use racelab_core::track::{generate_circuit, parse_track, save_track, validate_points, CircuitKind, Track};

use crate::config::resolve_track;
use crate::{Failure, GenerateCommand, Outcome, Stage, TrackCommand};

pub fn run(cmd: TrackCommand) -> Outcome {
    match cmd {
        TrackCommand::Generate(g) => generate(g),
        TrackCommand::Validate { file } => validate(&file),
        TrackCommand::Info { track } => {
            let track = resolve_track(&track).config_err()?;
            print!("{}", describe(&track));
            Ok(())
        }
    }
}

fn generate(cmd: GenerateCommand) -> Outcome {
    let (kind, out) = match cmd {
        GenerateCommand::Oval { straight, radius, width, out } => (CircuitKind::Oval { straight, radius, width }, out),
        GenerateCommand::PaperScale { width, scale, out } => (CircuitKind::PaperScale { width, scale }, out),
    };
    let track = generate_circuit(kind).config_err()?;
    save_track(&track, &out).runtime_err()?;
    println!("wrote {} ({}, L = {:.2} m)", out.display(), track.name(), track.length());
    Ok(())
}

fn validate(file: &std::path::Path) -> Outcome {
    let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display())).config_err()?;
    let parsed = parse_track(&text).config_err()?;
    let problems = validate_points(&parsed.points, parsed.closed);
    if !problems.is_empty() {
        for p in &problems {
            eprintln!("  - {p}");
        }
        return Err(Failure::Config(anyhow::anyhow!("{}: {} problem(s) found", file.display(), problems.len())));
    }
    let track = Track::new(parsed.name, parsed.points, parsed.closed).config_err()?;
    println!("ok: {} ({} points, L = {:.2} m)", track.name(), track.points().len(), track.length());
    Ok(())
}

pub fn describe(track: &Track) -> String {
    let widths: Vec<f64> = track.points().iter().map(|p| 2.0 * p.half_width).collect();
    let curvature = track.curvature();
    let (k_min, k_max) =
        curvature.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &k| (lo.min(k), hi.max(k)));
    let k_abs = k_min.abs().max(k_max.abs());
    let min_radius = if k_abs > 0.0 { format!("{:.1} m", 1.0 / k_abs) } else { "inf".into() };
    format!(
        "name:          {}\n\
         closed:        {}\n\
         points:        {}\n\
         length:        {:.2} m\n\
         width:         min {:.2} / mean {:.2} / max {:.2} m\n\
         curvature:     min {:.5} / max {:.5} 1/m\n\
         tightest turn: radius {}\n",
        track.name(),
        track.is_closed(),
        track.points().len(),
        track.length(),
        widths.iter().copied().fold(f64::INFINITY, f64::min),
        widths.iter().sum::<f64>() / widths.len() as f64,
        widths.iter().copied().fold(0.0, f64::max),
        k_min,
        k_max,
        min_radius,
    )
}

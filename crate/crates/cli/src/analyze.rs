use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use racelab_core::telemetry::{
    compare_laps, detect_corners, envelope_csv, gg_envelope_binned, gg_svg, learning_curve, learning_curve_svg,
    read_telemetry, segment_csv, segment_report, segment_svg, slip_events, slip_events_csv, GgEnvelope, SlipKind,
    StepRecord, DEFAULT_CORNER_CURVATURE, DEFAULT_CORNER_LENGTH, DEFAULT_LOCK_THRESHOLD, DEFAULT_SPIN_THRESHOLD,
};

use crate::config::{default_output, output_path};
use crate::{AnalyzeArgs, Failure, Outcome, Stage};

/// Resampling step of the side-by-side lap comparison, m.
const COMPARE_SPACING: f64 = 1.0;

struct Lap {
    label: String,
    records: Vec<StepRecord>,
    envelope: GgEnvelope,
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "lap".into(), |s| s.to_string_lossy().into_owned())
}

/// Labels for two files with the same stem: the first path component from
/// the end where they differ, joined to the stem.
fn distinct_labels(a: &Path, b: &Path) -> (String, String) {
    let names = |p: &Path| -> Vec<String> {
        p.components().rev().skip(1).map(|c| c.as_os_str().to_string_lossy().into_owned()).collect()
    };
    let (na, nb) = (names(a), names(b));
    let (sa, sb) = (stem(a), stem(b));
    match na.iter().zip(&nb).find(|(x, y)| x != y) {
        Some((x, y)) => (format!("{x}_{sa}"), format!("{y}_{sb}")),
        None => (sa, format!("{sb}_b")),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Outcome {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display())).runtime_err()
}

/// Reads one lap; the warning count covers rows skipped as malformed.
fn load_lap(path: &Path, bin_deg: f64, warnings: &mut usize) -> Result<Lap, Failure> {
    let log = read_telemetry(path).with_context(|| format!("reading {}", path.display())).config_err()?;
    if log.skipped_rows > 0 {
        eprintln!("warning: {}: skipped {} malformed row(s)", path.display(), log.skipped_rows);
        *warnings += log.skipped_rows;
    }
    let envelope = gg_envelope_binned(&log.records, bin_deg)
        .with_context(|| format!("analyzing {}", path.display()))
        .config_err()?;
    Ok(Lap { label: stem(path), records: log.records, envelope })
}

fn report_lap(lap: &Lap, segments: &[(f64, f64)], dir: &Path) -> Outcome {
    let name = &lap.label;
    let env = &lap.envelope;
    write(dir, &format!("{name}_gg.svg"), &gg_svg(&[(name, &lap.records, env)]))?;
    write(dir, &format!("{name}_envelope.csv"), &envelope_csv(env).runtime_err()?)?;
    println!("{name}: {} rows", lap.records.len());
    println!(
        "  combined g peak {:.3}  pure lateral {:.3}  braking+turning {:.3}  accelerating+turning {:.3}",
        env.peak, env.peak_pure_lateral, env.peak_braking_turning, env.peak_accel_turning
    );

    let ranges = if segments.is_empty() {
        detect_corners(&lap.records, DEFAULT_CORNER_CURVATURE, DEFAULT_CORNER_LENGTH)
    } else {
        segments.to_vec()
    };
    let mut reports = Vec::new();
    for (k, &(from, to)) in ranges.iter().enumerate() {
        match segment_report(&lap.records, from, to) {
            Ok(rep) => {
                let label = format!("{name} segment {k} [{from:.0}, {to:.0}) m");
                write(dir, &format!("{name}_segment_{k}.svg"), &segment_svg(&rep, &label))?;
                println!(
                    "  segment {k} [{from:.1}, {to:.1}) m: {:?}, min speed {:.1} m/s, inside {:+.3} / outside {:+.3} torque{}",
                    rep.direction,
                    rep.min_speed,
                    rep.inside_mean_torque,
                    rep.outside_mean_torque,
                    if rep.outside_biased() { ", outside-biased" } else { "" }
                );
                reports.push((format!("segment_{k}"), rep));
            }
            Err(e) => eprintln!("warning: {name} segment [{from}, {to}): {e}"),
        }
    }
    write(dir, &format!("{name}_segments.csv"), &segment_csv(&reports).runtime_err()?)?;

    let events = slip_events(&lap.records, DEFAULT_LOCK_THRESHOLD, DEFAULT_SPIN_THRESHOLD);
    let count = |kind: SlipKind| events.iter().filter(|e| e.kind == kind).count();
    let modulated = events.iter().filter(|e| e.modulated).count();
    println!(
        "  slip events: {} lock-up, {} spin, {} with torque release and reapply",
        count(SlipKind::LockUp),
        count(SlipKind::Spin),
        modulated
    );
    write(dir, &format!("{name}_slip_events.csv"), &slip_events_csv(&events).runtime_err()?)
}

fn ratio_line(mask: &str, a: f64, b: f64, labels: (&str, &str)) -> String {
    if a > 0.0 {
        format!(
            "  {mask:<22} {}: {a:.3} g  {}: {b:.3} g  ratio {:.3} ({:+.1}%)",
            labels.0,
            labels.1,
            b / a,
            100.0 * (b / a - 1.0)
        )
    } else {
        format!("  {mask:<22} {}: {a:.3} g  {}: {b:.3} g  ratio -", labels.0, labels.1)
    }
}

fn compare(a: &Lap, b: &Lap, dir: &Path) -> Outcome {
    let cmp = compare_laps((&a.label, &a.records), (&b.label, &b.records), COMPARE_SPACING).runtime_err()?;
    write(dir, "compare.csv", &cmp.to_csv().runtime_err()?)?;
    write(dir, "compare.svg", &cmp.to_svg())?;
    write(dir, "compare_gg.svg", &gg_svg(&[(&a.label, &a.records, &a.envelope), (&b.label, &b.records, &b.envelope)]))?;
    let labels = (a.label.as_str(), b.label.as_str());
    let (ea, eb) = (&a.envelope, &b.envelope);
    println!("combined-g comparison ({} vs {}):", labels.0, labels.1);
    println!("{}", ratio_line("braking+turning", ea.peak_braking_turning, eb.peak_braking_turning, labels));
    println!("{}", ratio_line("accelerating+turning", ea.peak_accel_turning, eb.peak_accel_turning, labels));
    println!("{}", ratio_line("pure lateral", ea.peak_pure_lateral, eb.peak_pure_lateral, labels));
    println!("{}", ratio_line("overall", ea.peak, eb.peak, labels));
    Ok(())
}

fn learning(path: &Path, dir: &Path, warnings: &mut usize) -> Outcome {
    let curve = learning_curve(path).with_context(|| format!("reading {}", path.display())).config_err()?;
    if curve.skipped_lines > 0 {
        eprintln!("warning: {}: skipped {} malformed line(s)", path.display(), curve.skipped_lines);
        *warnings += curve.skipped_lines;
    }
    write(dir, "learning_curve.csv", &curve.to_csv().runtime_err()?)?;
    write(dir, "learning_curve.svg", &learning_curve_svg(&curve))?;
    let steps = |s: Option<u64>| s.map_or_else(|| "never".into(), |v| v.to_string());
    let last = curve.points.last().map_or(0, |p| p.steps);
    println!("learning curve: {} updates, {} evaluations, last step {last}", curve.updates, curve.points.len());
    println!("  first stochastic lap at step {}", steps(curve.first_explored_completion()));
    println!("  first deterministic lap at step {}", steps(curve.first_exploited_completion()));
    if let Some(best) = curve.best_exploited_until(u64::MAX) {
        println!("  best deterministic lap {best:.2} s");
    }
    Ok(())
}

pub fn run(args: AnalyzeArgs) -> Outcome {
    if args.telemetry.is_empty() && args.log.is_none() && args.compare.is_none() {
        return Err(Failure::Config(anyhow!("nothing to analyze: give telemetry files, --log or --compare")));
    }
    let dir: PathBuf = args.out.as_deref().map_or_else(|| default_output("analysis"), output_path);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display())).runtime_err()?;
    let mut warnings = 0;
    for path in &args.telemetry {
        let lap = load_lap(path, args.bin_deg, &mut warnings)?;
        report_lap(&lap, &args.segments, &dir)?;
    }
    if let Some(pair) = &args.compare {
        let mut a = load_lap(&pair[0], args.bin_deg, &mut warnings)?;
        let mut b = load_lap(&pair[1], args.bin_deg, &mut warnings)?;
        if a.label == b.label {
            // e.g. two runs' eval/best.csv: label by the differing directories
            (a.label, b.label) = distinct_labels(&pair[0], &pair[1]);
        }
        compare(&a, &b, &dir)?;
    }
    if let Some(log) = &args.log {
        learning(log, &dir, &mut warnings)?;
    }
    println!("warnings: {warnings}");
    println!("artifacts written to {}", dir.display());
    Ok(())
}

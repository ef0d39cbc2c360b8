use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use cellbench::eatm::{
    contour, rm_table, run_sweep, write_csv, write_rm_csv, SweepSpec, DEFAULT_SF,
};
use cellbench::io::{read_dataset, write_atomic, write_dataset, Dataset, DatasetLayout, IoError};
use cellbench::lineage::graph_stats;
use cellbench::matching::match_frames;
use cellbench::metrics::{score_all, Metric};
use cellbench::synthgen::{generate, SynthError};
use cellbench::trackers::{Tracker, TrackerConfig, TrackerInput};
use cellbench::transform::{interval_stats, subsample, ExperimentSpec, DEFAULT_SMOOTHING};
use cellbench::{Grid, Weights};
use serde::Serialize;
use serde_json::json;

use crate::config::{existing_dir, load, read_json, set, FileConfig};
use crate::Failure;
use crate::{
    Cli, Command, DivisionTime, EvaluateArgs, GenArgs, ReportArgs, StatsArgs, SweepArgs, TrackArgs,
    TrackerArgs, TransformArgs,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load(cli.config.as_deref())?;
    match cli.command {
        Command::Gen(a) => gen(&cfg, a),
        Command::Transform(a) => transform(&cfg, a),
        Command::Track(a) => track(&cfg, a),
        Command::Evaluate(a) => evaluate(&cfg, a),
        Command::Sweep(a) => sweep(&cfg, a),
        Command::Stats(a) => stats(&cfg, a),
        Command::Report(a) => report(a),
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(anyhow!("{e}"))
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(anyhow!("{e}"))
}

/// Operating-system failures are runtime errors; malformed content is bad input.
fn io_failure(e: IoError) -> Failure {
    fn is_os(e: &IoError) -> bool {
        match e {
            IoError::Io(_) => true,
            IoError::File { source, .. } => is_os(source),
            _ => false,
        }
    }
    if is_os(&e) {
        runtime(e)
    } else {
        invalid(e)
    }
}

fn layout(cfg: &FileConfig) -> DatasetLayout {
    cfg.layout.clone().unwrap_or_default()
}

fn load_dataset(dir: &Path, layout: &DatasetLayout) -> Result<Dataset, Failure> {
    let d = read_dataset(dir, layout).map_err(io_failure)?;
    if d.sequence.is_empty() {
        return Err(invalid(format!(
            "{}: no masks named like {}",
            dir.display(),
            layout.mask_name(0)
        )));
    }
    Ok(d)
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("output serializes");
    out.push(b'\n');
    out
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| runtime(format!("{}: {e}", parent.display())))?;
    }
    write_atomic(path, bytes).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(p) => write_file(p, bytes),
        None => std::io::stdout().lock().write_all(bytes).map_err(runtime),
    }
}

fn load_weights(cfg: &FileConfig, file: Option<&Path>) -> Result<Weights, Failure> {
    let w = match file {
        Some(p) => read_json(p)?,
        None => cfg.weights.clone().unwrap_or_default(),
    };
    w.validate().map_err(invalid)?;
    Ok(w)
}

fn tracker_config(cfg: &FileConfig, a: TrackerArgs) -> Result<TrackerConfig, Failure> {
    let mut c = match &a.tracker_config {
        Some(p) => read_json(p)?,
        None => cfg.tracker.clone().unwrap_or_default(),
    };
    set(&mut c.method, a.tracker);
    set(&mut c.gate, a.gate);
    set(&mut c.birth_cost, a.birth_cost);
    set(&mut c.death_cost, a.death_cost);
    set(&mut c.max_children, a.max_children);
    set(&mut c.overlap, a.overlap);
    if a.fixed_gate {
        c.scale_gate_with_k = false;
    }
    c.validate().map_err(invalid)?;
    Ok(c)
}

fn build_tracker(c: &TrackerConfig) -> Result<Box<dyn Tracker>, Failure> {
    c.build().map_err(invalid)
}

fn gen(cfg: &FileConfig, a: GenArgs) -> Result<(), Failure> {
    let mut p = cfg.colony.clone().unwrap_or_default();
    set(&mut p.seed, a.seed);
    set(&mut p.frames, a.frames);
    set(&mut p.width, a.width);
    set(&mut p.height, a.height);
    set(&mut p.initial_cells, a.initial_cells);
    set(
        &mut p.division_time,
        a.division_time.map(|DivisionTime(d)| d),
    );
    set(&mut p.division_jitter, a.division_jitter);
    set(&mut p.rod_length, a.rod_length);
    set(&mut p.rod_width, a.rod_width);
    set(&mut p.snap_angle_deg, a.snap_angle);
    set(&mut p.growth_rate, a.growth_rate);
    if a.no_exit {
        p.exit_at_borders = false;
    }
    let colony = generate(&p).map_err(|e| match e {
        SynthError::Params(_) => invalid(e),
        _ => runtime(e),
    })?;
    let layout = layout(cfg);
    write_dataset(&a.out, &layout, &colony.graph, &colony.sequence).map_err(io_failure)?;
    let sidecar = json!({
        "tool_version": VERSION,
        "params": p,
        "layout": layout,
        "stats": graph_stats(&colony.graph, Some(colony.sequence.len() as u32)),
        "warnings": colony.warnings,
    });
    write_file(&a.out.join("params.json"), &to_json(&sidecar))?;
    for w in &colony.warnings {
        eprintln!("warning: frame {}: {}", w.frame, w.message);
    }
    Ok(())
}

fn transform(cfg: &FileConfig, a: TransformArgs) -> Result<(), Failure> {
    let input = existing_dir(a.input.input, "input")?;
    let mut spec = cfg.experiment.unwrap_or_else(ExperimentSpec::identity);
    set(&mut spec.k, a.k);
    set(&mut spec.n_max, a.n_max);
    set(&mut spec.frame_offset, a.condition.offset);
    set(&mut spec.truncation, a.condition.truncation);
    spec.validate().map_err(invalid)?;
    let layout = layout(cfg);
    let d = load_dataset(&input, &layout)?;
    let r = subsample(&d.sequence, &d.graph, &spec).map_err(invalid)?;
    write_dataset(&a.out, &layout, &r.graph, &r.sequence).map_err(io_failure)?;
    let sidecar = json!({
        "tool_version": VERSION,
        "source": input.display().to_string(),
        "spec": spec,
        "frame_map": r.frame_map,
    });
    write_file(&a.out.join("transform.json"), &to_json(&sidecar))
}

fn track(cfg: &FileConfig, a: TrackArgs) -> Result<(), Failure> {
    let input = existing_dir(a.input.input, "input")?;
    let config = tracker_config(cfg, a.tracker)?;
    let tracker = build_tracker(&config)?;
    let k = a.k.or(cfg.experiment.map(|e| e.k)).unwrap_or(1);
    if k == 0 {
        return Err(Failure::invalid("k must be at least 1"));
    }
    let layout = layout(cfg);
    let d = load_dataset(&input, &layout)?;
    let pred = tracker
        .track(&TrackerInput {
            sequence: &d.sequence,
            ground_truth: Some(&d.graph),
            k,
        })
        .map_err(runtime)?;
    write_dataset(&a.out, &layout, &pred, &d.sequence).map_err(io_failure)?;
    let sidecar = json!({
        "tool_version": VERSION,
        "source": input.display().to_string(),
        "tracker": tracker.name(),
        "tracker_config": tracker.describe(),
        "k": k,
    });
    write_file(&a.out.join("track.json"), &to_json(&sidecar))
}

fn evaluate(cfg: &FileConfig, a: EvaluateArgs) -> Result<(), Failure> {
    let gt_dir = existing_dir(a.gt, "ground truth")?;
    let pred_dir = existing_dir(Some(a.pred), "prediction")?;
    let weights = load_weights(cfg, a.weights.as_deref())?;
    let metrics = a.metrics.unwrap_or_else(|| Metric::ALL.to_vec());
    let layout = layout(cfg);
    let gt = load_dataset(&gt_dir, &layout)?;
    let pred = load_dataset(&pred_dir, &layout)?;
    let m = match_frames(&gt.sequence, &pred.sequence).map_err(invalid)?;
    let scores: Vec<_> = score_all(&gt.graph, &pred.graph, &m, &weights, &metrics)
        .into_iter()
        .map(|s| {
            json!({
                "metric": s.metric,
                "value": s.value.as_ref().ok(),
                "error": s.value.as_ref().err().map(|e| e.to_string()),
                "breakdown": s.breakdown,
            })
        })
        .collect();
    let report = json!({
        "tool_version": VERSION,
        "gt": gt_dir.display().to_string(),
        "pred": pred_dir.display().to_string(),
        "weights": weights,
        "scores": scores,
    });
    emit(a.out.as_deref(), &to_json(&report))
}

fn sweep(cfg: &FileConfig, a: SweepArgs) -> Result<(), Failure> {
    let input = existing_dir(a.input.input, "input")?;
    let config = tracker_config(cfg, a.tracker)?;
    let tracker = build_tracker(&config)?;
    let weights = load_weights(cfg, a.weights.as_deref())?;
    let mut spec = cfg.sweep.clone().unwrap_or_default();
    set(&mut spec.sf, a.sf);
    set(&mut spec.mc, a.mc);
    set(&mut spec.metrics, a.metrics);
    set(&mut spec.thresholds, a.thresholds);
    set(&mut spec.frame_offset, a.condition.offset);
    set(&mut spec.truncation, a.condition.truncation);
    if a.threads.is_some() {
        spec.threads = a.threads;
    }
    spec.validate().map_err(invalid)?;
    let d = load_dataset(&input, &layout(cfg))?;
    let grid: Grid = run_sweep(
        tracker.as_ref(),
        &d.sequence,
        &d.graph,
        &spec,
        &weights,
        Some(input.display().to_string()),
    )
    .map_err(runtime)?;
    write_grid(&a.out, &grid)
}

fn write_grid(out: &Path, grid: &Grid) -> Result<(), Failure> {
    let mut csv = Vec::new();
    write_csv(grid, &mut csv).map_err(runtime)?;
    write_file(&out.join("grid.csv"), &csv)?;
    write_file(&out.join("grid.json"), &to_json(grid))?;
    let spec: &SweepSpec = grid.spec();
    let mut contours = Vec::new();
    for &metric in &spec.metrics {
        for &theta in &spec.thresholds {
            let cells = contour(grid, metric, theta).map_err(runtime)?;
            contours.push(json!({ "metric": metric, "theta": theta, "cells": cells }));
        }
    }
    write_file(&out.join("contour.json"), &to_json(&contours))?;
    let mut rm = Vec::new();
    write_rm_csv(&rm_table(&[grid]).map_err(runtime)?, &mut rm).map_err(runtime)?;
    write_file(&out.join("rm.csv"), &rm)
}

fn stats(cfg: &FileConfig, a: StatsArgs) -> Result<(), Failure> {
    let input = existing_dir(a.input.input, "input")?;
    let ks = a.k.unwrap_or_else(|| DEFAULT_SF.to_vec());
    if ks.is_empty() || ks.contains(&0) {
        return Err(Failure::invalid("subsampling factors must be positive"));
    }
    let smoothing = a.smoothing.or(cfg.smoothing).unwrap_or(DEFAULT_SMOOTHING);
    if !(smoothing > 0.0 && smoothing <= 1.0) {
        return Err(invalid(format!(
            "smoothing must lie in (0, 1], got {smoothing}"
        )));
    }
    let d = load_dataset(&input, &layout(cfg))?;
    let per_k = interval_stats(&d.sequence, &d.graph, &ks, smoothing).map_err(invalid)?;
    let report = json!({
        "tool_version": VERSION,
        "source": input.display().to_string(),
        "graph_stats": graph_stats(&d.graph, Some(d.sequence.len() as u32)),
        "interval_stats": per_k,
    });
    emit(a.out.as_deref(), &to_json(&report))
}

fn report(a: ReportArgs) -> Result<(), Failure> {
    let mut grids: Vec<Grid> = a
        .grids
        .iter()
        .map(|p: &PathBuf| read_json(p))
        .collect::<Result<_, _>>()?;
    if let Some(t) = a.thresholds {
        for g in &mut grids {
            g.provenance.sweep.thresholds = t.clone();
        }
    }
    let refs: Vec<&Grid> = grids.iter().collect();
    let rows = rm_table(&refs).map_err(invalid)?;
    let mut csv = Vec::new();
    write_rm_csv(&rows, &mut csv).map_err(runtime)?;
    emit(a.out.as_deref(), &csv)
}

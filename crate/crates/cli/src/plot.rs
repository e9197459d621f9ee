//! SVG report: evaluation success curves and task frequency over training.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::CliError;
use crate::metrics::{read_metrics, read_transitions, MetricsRecord, TransitionRecord, METRICS_FILE, TRANSITIONS_FILE};

const WIDTH: u32 = 900;
const CURVE_HEIGHT: u32 = 360;
const FREQ_HEIGHT: u32 = 240;
const BINS: u64 = 20;

pub struct Run {
    pub id: String,
    pub metrics: Vec<MetricsRecord>,
    pub transitions: Vec<TransitionRecord>,
}

fn load_run(id: String, dir: &Path) -> Result<Run, CliError> {
    let t = dir.join(TRANSITIONS_FILE);
    if !t.exists() {
        return Err(CliError::Invalid(format!("{} is missing", t.display())));
    }
    Ok(Run { id, metrics: read_metrics(&dir.join(METRICS_FILE))?, transitions: read_transitions(&t)? })
}

/// The run in `dir` itself, if any, followed by runs in its subdirectories,
/// each labelled by its directory name.
pub fn discover(dir: &Path) -> Result<Vec<Run>, CliError> {
    let name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    let mut runs = Vec::new();
    if dir.join(METRICS_FILE).exists() {
        runs.push(load_run(name(dir), dir)?);
    }
    let entries =
        std::fs::read_dir(dir).map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", dir.display())))?;
    let mut subdirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join(METRICS_FILE).exists())
        .collect();
    subdirs.sort();
    for d in subdirs {
        runs.push(load_run(name(&d), &d)?);
    }
    if runs.is_empty() {
        return Err(CliError::Invalid(format!("no {METRICS_FILE} under {}", dir.display())));
    }
    Ok(runs)
}

fn draw_err<E: std::error::Error + Send + Sync>(e: DrawingAreaErrorKind<E>) -> CliError {
    CliError::Failed(format!("rendering failed: {e}"))
}

/// Share of windows spent on each task within each of `BINS` equal step ranges.
pub fn task_frequency(transitions: &[TransitionRecord], total_steps: u64) -> Vec<BTreeMap<usize, f64>> {
    let width = total_steps.div_ceil(BINS).max(1);
    let mut counts = vec![BTreeMap::new(); BINS as usize];
    for t in transitions {
        let bin = ((t.step / width) as usize).min(BINS as usize - 1);
        *counts[bin].entry(t.to_task).or_insert(0usize) += 1;
    }
    counts
        .into_iter()
        .map(|c| {
            let n: usize = c.values().sum();
            c.into_iter().map(|(k, v)| (k, v as f64 / n as f64)).collect()
        })
        .collect()
}

pub fn render(runs: &[Run]) -> Result<String, CliError> {
    let height = CURVE_HEIGHT + FREQ_HEIGHT * runs.len() as u32;
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (WIDTH, height)).into_drawing_area();
        root.fill(&WHITE).map_err(draw_err)?;
        let (top, bottom) = root.split_vertically(CURVE_HEIGHT);

        let max_step = runs.iter().flat_map(|r| r.metrics.iter().map(|m| m.step)).max().unwrap_or(0).max(1) as f64;
        let mut chart = ChartBuilder::on(&top)
            .caption("evaluation success", ("sans-serif", 18))
            .margin(10)
            .x_label_area_size(35)
            .y_label_area_size(45)
            .build_cartesian_2d(0.0..max_step, 0.0..1.05)
            .map_err(draw_err)?;
        chart.configure_mesh().x_desc("step").y_desc("success rate").draw().map_err(draw_err)?;
        let mut colour = 0;
        for run in runs {
            let mut by_task: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
            for m in run.metrics.iter().filter(|m| m.event == "eval") {
                by_task.entry(m.task_id).or_default().push((m.step as f64, m.success_rate));
            }
            for (task, points) in by_task {
                let style = Palette99::pick(colour).stroke_width(2);
                colour += 1;
                chart
                    .draw_series(LineSeries::new(points, style))
                    .map_err(draw_err)?
                    .label(format!("{} task {task}", run.id))
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], style));
            }
        }
        if colour > 0 {
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .position(SeriesLabelPosition::LowerRight)
                .draw()
                .map_err(draw_err)?;
        }

        let panels = bottom.split_evenly((runs.len(), 1));
        for (run, panel) in runs.iter().zip(panels.iter()) {
            draw_frequency(run, panel)?;
        }
        root.present().map_err(draw_err)?;
    }
    Ok(svg)
}

fn draw_frequency(run: &Run, area: &DrawingArea<SVGBackend, plotters::coord::Shift>) -> Result<(), CliError> {
    let total = run.metrics.iter().map(|m| m.step).max().unwrap_or(0);
    let bins = task_frequency(&run.transitions, total);
    let tasks: BTreeSet<usize> = run.transitions.iter().map(|t| t.to_task).collect();
    let mut chart = ChartBuilder::on(area)
        .caption(format!("{}: task frequency", run.id), ("sans-serif", 16))
        .margin(10)
        .x_label_area_size(30)
        .y_label_area_size(45)
        .build_cartesian_2d(0.0..BINS as f64, 0.0..1.0)
        .map_err(draw_err)?;
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_desc("training progress (twentieths)")
        .y_desc("share")
        .draw()
        .map_err(draw_err)?;
    for &task in &tasks {
        let colour = Palette99::pick(task);
        let bars = bins.iter().enumerate().filter_map(|(i, shares)| {
            let share = *shares.get(&task)?;
            let below: f64 = shares.range(..task).map(|(_, v)| v).sum();
            let x = i as f64;
            Some(Rectangle::new([(x + 0.05, below), (x + 0.95, below + share)], colour.filled()))
        });
        chart
            .draw_series(bars)
            .map_err(draw_err)?
            .label(format!("task {task}"))
            .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], colour.filled()));
    }
    if !tasks.is_empty() {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .position(SeriesLabelPosition::UpperRight)
            .draw()
            .map_err(draw_err)?;
    }
    Ok(())
}

pub fn run(metrics_dir: &Path, out: &Path) -> Result<usize, CliError> {
    let runs = discover(metrics_dir)?;
    let svg = render(&runs)?;
    std::fs::write(out, svg)?;
    Ok(runs.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(step: u64, to: usize) -> TransitionRecord {
        TransitionRecord { step, from_task: 0, to_task: to }
    }

    #[test]
    fn frequency_bins_sum_to_one() {
        let log: Vec<_> = (0..40).map(|i| t(i * 100, (i % 3) as usize)).collect();
        let bins = task_frequency(&log, 4000);
        assert_eq!(bins.len(), BINS as usize);
        for b in &bins {
            assert!((b.values().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(bins[0].len(), 2);
    }

    #[test]
    fn empty_bins_stay_empty() {
        let bins = task_frequency(&[t(0, 1)], 0);
        assert_eq!(bins[0].get(&1), Some(&1.0));
        assert!(bins[1..].iter().all(BTreeMap::is_empty));
    }
}

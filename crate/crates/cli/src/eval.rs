use std::path::{Path, PathBuf};

use resetless::eval::EvalReport;

use crate::checkpoint::{self, CHECKPOINT_DIR};
use crate::config;
use crate::error::CliError;
use crate::metrics::append_row;

pub const EVAL_FILE: &str = "eval.csv";
pub const EVAL_HEADER: [&str; 9] = [
    "checkpoint",
    "task",
    "task_id",
    "n_episodes",
    "successes",
    "success_rate",
    "mean_return",
    "step_of_training",
    "seed",
];

pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub task: String,
    pub episodes: usize,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// The run directory a checkpoint belongs to.
fn run_dir(checkpoint: &Path) -> PathBuf {
    let parent = checkpoint.parent().unwrap_or(Path::new("."));
    if parent.file_name().is_some_and(|n| n == CHECKPOINT_DIR) {
        parent.parent().unwrap_or(Path::new(".")).to_path_buf()
    } else {
        parent.to_path_buf()
    }
}

pub fn eval_fields(args: &EvalArgs, report: &EvalReport, seed: u64) -> Vec<String> {
    vec![
        args.checkpoint.display().to_string(),
        args.task.clone(),
        report.task_id.to_string(),
        report.n_episodes.to_string(),
        report.successes.to_string(),
        report.success_rate.to_string(),
        report.mean_return.to_string(),
        report.step_of_training.to_string(),
        seed.to_string(),
    ]
}

/// Rolls out the checkpoint's policy for `task` and returns the CSV row.
pub fn run(args: &EvalArgs) -> Result<String, CliError> {
    let snap = checkpoint::load(&args.checkpoint)?;
    let resolved = config::parse(checkpoint::config_echo(&snap)?, "in checkpoint")?;
    let family = resolved.family;
    let task = family.task_id(&args.task).ok_or_else(|| {
        let names: Vec<&str> = family.tasks().iter().map(|k| k.name()).collect();
        CliError::Invalid(format!("unknown task {:?} for {family}; valid tasks: {}", args.task, names.join(", ")))
    })?;
    if args.episodes == 0 {
        return Err(CliError::Invalid("--episodes must be positive".into()));
    }
    let mut trainer = resolved.build()?;
    trainer.import_models(&snap)?;
    let slot = trainer.slot_for_task(task).ok_or_else(|| {
        let trained: Vec<&str> = trainer.slots.iter().map(|s| s.name.as_str()).collect();
        CliError::Invalid(format!(
            "{} checkpoint has no policy for {}; policies: {}",
            resolved.config.algorithm,
            args.task,
            trained.join(", ")
        ))
    })?;
    let seed = args.seed.unwrap_or(resolved.config.seed);
    trainer.seed = seed;
    let report = trainer.evaluate(slot, task, args.episodes, 0)?;

    let fields = eval_fields(args, &report, seed);
    let out = args
        .out
        .clone()
        .or_else(|| std::env::var_os("RESETLESS_OUT").map(PathBuf::from))
        .unwrap_or_else(|| run_dir(&args.checkpoint));
    std::fs::create_dir_all(&out)?;
    append_row(&out.join(EVAL_FILE), &EVAL_HEADER, &fields)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(&fields)?;
    let line = String::from_utf8(w.into_inner().map_err(|e| CliError::Failed(e.to_string()))?)
        .map_err(|e| CliError::Failed(e.to_string()))?;
    Ok(line.trim_end().to_string())
}

use std::path::{Path, PathBuf};

use resetless::envs::ManipEnv;
use resetless::orchestrator::Trainer;

use crate::checkpoint::{self, DIAGNOSTIC_FILE, FINAL_FILE, RESUME_FILE};
use crate::config::{self, Resolved};
use crate::error::CliError;
use crate::metrics::RunLog;

pub struct TrainArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub resume: bool,
}

/// Output directory precedence: `--out`, then `RESETLESS_OUT`, then the config.
pub fn out_dir(cli: Option<&Path>, resolved: &Resolved) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| std::env::var_os("RESETLESS_OUT").map(PathBuf::from))
        .unwrap_or_else(|| resolved.config.out_dir.clone())
}

pub fn run(args: &TrainArgs) -> Result<Resolved, CliError> {
    let mut resolved = config::load(&args.config)?;
    if let Some(seed) = args.seed {
        resolved.config.seed = seed;
    }
    let out = out_dir(args.out.as_deref(), &resolved);
    resolved.config.out_dir = out.clone();
    std::fs::create_dir_all(&out)?;
    let echo = resolved.echo();

    let mut trainer = resolved.build()?;
    let resume_path = out.join(RESUME_FILE);
    let mut log = if args.resume && resume_path.exists() {
        let snap = checkpoint::load(&resume_path)?;
        let mut stored = config::parse(checkpoint::config_echo(&snap)?, "in checkpoint")?;
        // Extending the budget is the one change a resumed run may make.
        stored.config.budget = resolved.config.budget;
        if stored.echo() != echo {
            return Err(CliError::Invalid(format!(
                "{} was written by a different configuration",
                resume_path.display()
            )));
        }
        trainer.import(&snap)?;
        eprintln!("resuming at step {}", trainer.total_steps);
        RunLog::resume(&out, trainer.total_steps)?
    } else {
        RunLog::create(&out)?
    };
    std::fs::write(out.join("config.json"), &echo)?;

    let c = &resolved.config;
    match train_loop(&mut trainer, &mut log, c.budget, c.checkpoint_every, &out, &echo) {
        Err(CliError::Diverged(msg)) => {
            log.flush()?;
            let path = out.join(DIAGNOSTIC_FILE);
            checkpoint::save(&path, &trainer.export(false), &echo)?;
            Err(CliError::Diverged(format!("{msg}; state saved to {}", path.display())))
        }
        other => other,
    }?;
    Ok(resolved)
}

fn train_loop(
    trainer: &mut Trainer<ManipEnv>,
    log: &mut RunLog,
    budget: u64,
    checkpoint_every: u64,
    out: &Path,
    echo: &str,
) -> Result<(), CliError> {
    while trainer.total_steps < budget {
        let window = trainer.run_window()?;
        log.transition(&window.log)?;
        log.row(&window.row)?;
        if let (Some(report), Some(row)) = (&window.eval, &window.eval_row) {
            log.row(row)?;
            eprintln!(
                "step {:>9}  task {}  eval success {:.3}  return {:.2}",
                report.step_of_training, report.task_id, report.success_rate, report.mean_return
            );
        }
        let step = trainer.total_steps;
        if checkpoint_every > 0 && step.is_multiple_of(checkpoint_every) && step < budget {
            log.flush()?;
            checkpoint::save(&checkpoint::periodic_path(out, step), &trainer.export(false), echo)?;
            checkpoint::save(&out.join(RESUME_FILE), &trainer.export(true), echo)?;
        }
    }
    log.flush()?;
    if trainer.pushes() != trainer.total_steps {
        return Err(CliError::Failed(format!(
            "buffer accounting broken: {} transitions stored for {} steps",
            trainer.pushes(),
            trainer.total_steps
        )));
    }
    checkpoint::save(&out.join(FINAL_FILE), &trainer.export(false), echo)?;
    checkpoint::save(&out.join(RESUME_FILE), &trainer.export(true), echo)?;
    Ok(())
}

//! Library side of the `covpref` command-line tool.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

use std::io::Write;

use covpref::codec::Vocab;

use args::{Cli, Command};
use error::CliError;

/// Runs one invocation, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<u8, CliError> {
    let emit = |out: &mut dyn Write, text: &str| -> Result<(), CliError> {
        out.write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            })
    };
    match cli.command {
        Command::Lint { file } => {
            let issues = commands::lint_file(&file)?;
            for line in &issues {
                emit(out, &format!("{line}\n"))?;
            }
            Ok(u8::from(!issues.is_empty()))
        }
        Command::Simulate {
            design,
            stim,
            wmax,
            t_max,
            trace,
        } => {
            let vocab = Vocab::new(wmax)
                .map_err(|_| CliError::Usage(format!("--wmax {wmax} out of range")))?;
            let design = commands::load_design(&design)?;
            emit(
                out,
                &commands::simulate(&design, &vocab, t_max, &stim, trace)?,
            )?;
            Ok(0)
        }
        Command::Curate {
            common,
            pairs_per_dut,
            teacher,
            tau1,
            tau2,
        } => {
            let mut config = common.resolve()?;
            if let Some(n) = pairs_per_dut {
                config.curation.pairs_per_dut = n;
            }
            if let Some(t) = teacher {
                config.curation.teacher = args::parse_teacher(&t);
            }
            if let Some(t) = tau1 {
                config.curation.tau1 = t;
            }
            if let Some(t) = tau2 {
                config.curation.tau2 = t;
            }
            config.validate()?;
            let stats = commands::curate(&config)?;
            emit(
                out,
                &format!(
                    "{}\n",
                    serde_json::to_string(&stats).expect("stats serialize")
                ),
            )?;
            Ok(0)
        }
        Command::Train {
            common,
            train,
            init,
            out: ckpt,
            history,
        } => {
            let mut config = common.resolve()?;
            train.apply(&mut config);
            config.validate()?;
            let h = commands::train(
                &config,
                init.as_deref(),
                ckpt.as_deref(),
                history.as_deref(),
            )?;
            if let (Some(first), Some(last)) = (h.epochs.first(), h.epochs.last()) {
                emit(
                    out,
                    &format!(
                        "{}: loss {:.6} -> {:.6} over {} epochs\n",
                        h.config.mode.as_str(),
                        first.mean_loss,
                        last.mean_loss,
                        h.epochs.len()
                    ),
                )?;
            }
            Ok(0)
        }
        Command::Eval {
            common,
            checkpoint,
            n,
            tau,
            out: path,
        } => {
            let mut config = common.resolve()?;
            if let Some(n) = n {
                config.eval.n = n;
            }
            if let Some(t) = tau {
                config.eval.tau = t;
            }
            config.validate()?;
            let reports = commands::evaluate(&config, checkpoint.as_deref())?;
            let mut json = serde_json::to_string_pretty(&reports).expect("reports serialize");
            json.push('\n');
            match path {
                Some(p) => std::fs::write(&p, json).map_err(CliError::io(&p))?,
                None => emit(out, &json)?,
            }
            Ok(0)
        }
        Command::Ablate { common, train } => {
            let mut config = common.resolve()?;
            train.apply(&mut config);
            config.validate()?;
            let table = commands::ablate(&config)?;
            emit(out, &commands::summarize(&table))?;
            Ok(0)
        }
        Command::Demo { common } => {
            let config = common.resolve()?;
            let result = commands::demo(&config)?;
            emit(
                out,
                &format!(
                    "curated {} pairs from {} attempts\n{}",
                    result.stats.kept,
                    result.stats.attempts,
                    commands::summarize(&result.table)
                ),
            )?;
            Ok(0)
        }
    }
}

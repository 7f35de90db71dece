//! Command-line interface: `fit`, `simulate` and `replicate-tables`.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use crate::data::{emit_csv, load_csv, validate, CsvSchema, OutcomeKind};
use crate::estimator::{two_step_fit, FitOptions};
use crate::model_file::ModelFile;
use crate::moments::LinkFunction;
use crate::simulate::{
    gen_logit, gen_setting1, gen_setting2, gen_setting3, run_coverage_study, LogitParams,
    Setting1Params, Setting2Params, Setting3Params, StudySetting, DEFAULT_MASTER_SEED,
};

/// Below this many replicates the published-value tolerance checks are skipped.
pub const MIN_REPS_FOR_CHECKS: usize = 200;

#[derive(Debug, Parser)]
#[command(
    name = "glgmm",
    version,
    about = "Grouped-lag GMM for longitudinal marginal models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Text => "txt",
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimSetting {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    Logit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableSetting {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a long-format CSV panel.
    Fit {
        /// CSV with one row per subject and occasion.
        #[arg(long)]
        data: PathBuf,
        /// TOML model specification.
        #[arg(long)]
        spec: PathBuf,
        /// Directory receiving coefficients.csv and fit.json.
        #[arg(long)]
        out: PathBuf,
        /// What to print on stdout.
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long, default_value = "id")]
        id_column: String,
        #[arg(long, default_value = "time")]
        time_column: String,
        #[arg(long, default_value = "y")]
        outcome_column: String,
    },
    /// Generate a synthetic panel as long-format CSV.
    Simulate {
        #[arg(long, value_enum, default_value = "1")]
        setting: SimSetting,
        #[arg(long, default_value_t = DEFAULT_MASTER_SEED)]
        seed: u64,
        #[arg(long)]
        subjects: Option<usize>,
        #[arg(long)]
        times: Option<usize>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Monte Carlo coverage studies and compare with published values.
    ReplicateTables {
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = DEFAULT_MASTER_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value = "all")]
        setting: TableSetting,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Directory receiving one report per setting.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

/// Runs a command and returns the process exit code: 0 on success, 2 when the
/// optimizer did not converge (artifacts are still written). Input errors are
/// returned as `Err` and map to exit code 1.
pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Fit {
            data,
            spec,
            out,
            format,
            id_column,
            time_column,
            outcome_column,
        } => fit(
            data,
            spec,
            out,
            *format,
            CsvSchema {
                id: id_column.clone(),
                time: time_column.clone(),
                outcome: outcome_column.clone(),
                covariates: None,
            },
        ),
        Command::Simulate {
            setting,
            seed,
            subjects,
            times,
            out,
        } => simulate(*setting, *seed, *subjects, *times, out.as_deref()).map(|_| 0),
        Command::ReplicateTables {
            reps,
            seed,
            setting,
            threads,
            out,
            format,
        } => replicate_tables(*reps, *seed, *setting, *threads, out.as_deref(), *format).map(|_| 0),
    }
}

fn fit(data: &Path, spec: &Path, out: &Path, format: Format, mut schema: CsvSchema) -> Result<i32> {
    let text = fs::read_to_string(spec).with_context(|| format!("reading {}", spec.display()))?;
    let model = ModelFile::parse(&text).with_context(|| format!("in {}", spec.display()))?;
    schema.covariates = Some(model.covariate_names());
    let file = File::open(data).with_context(|| format!("opening {}", data.display()))?;
    let ds = load_csv(BufReader::new(file), &schema)
        .with_context(|| format!("in {}", data.display()))?;
    let kind = match model.link {
        LinkFunction::Identity => OutcomeKind::Continuous,
        LinkFunction::Logit => OutcomeKind::Binary,
    };
    let violations = validate(&ds, kind);
    if let Some(first) = violations.first() {
        bail!(
            "invalid panel ({} problem(s)); first: {first}",
            violations.len()
        );
    }
    let spec = model.resolve(ds.n_times())?;
    let result = two_step_fit(&ds, &spec, &FitOptions::default())?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("coefficients.csv"), result.coefficient_csv())?;
    fs::write(out.join("fit.json"), result.to_json())?;
    let shown = match format {
        Format::Text => result.text_table(),
        Format::Json => result.to_json(),
        Format::Csv => result.coefficient_csv(),
    };
    print!("{shown}");
    if result.converged {
        Ok(0)
    } else {
        eprintln!(
            "warning: optimizer did not converge (gradient norm {:.3e})",
            result.gradient_norm
        );
        Ok(2)
    }
}

fn simulate(
    setting: SimSetting,
    seed: u64,
    subjects: Option<usize>,
    times: Option<usize>,
    out: Option<&Path>,
) -> Result<()> {
    if subjects == Some(0) || times == Some(0) {
        bail!("--subjects and --times must be positive");
    }
    let ds = match setting {
        SimSetting::One | SimSetting::Three => {
            let d = Setting1Params::default();
            let base = Setting1Params {
                n: subjects.unwrap_or(d.n),
                times: times.unwrap_or(d.times),
                seed,
                ..d
            };
            if setting == SimSetting::One {
                gen_setting1(&base)
            } else {
                gen_setting3(&Setting3Params {
                    base,
                    ..Setting3Params::default()
                })
            }
        }
        SimSetting::Two => {
            let d = Setting2Params::default();
            gen_setting2(&Setting2Params {
                n: subjects.unwrap_or(d.n),
                times: times.unwrap_or(d.times),
                seed,
                ..d
            })
        }
        SimSetting::Logit => {
            let d = LogitParams::default();
            gen_logit(&LogitParams {
                n: subjects.unwrap_or(d.n),
                times: times.unwrap_or(d.times),
                seed,
                ..d
            })
        }
    };
    match out {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            emit_csv(&ds, BufWriter::new(file))?;
        }
        None => emit_csv(&ds, io::stdout().lock())?,
    }
    Ok(())
}

fn replicate_tables(
    reps: usize,
    seed: u64,
    setting: TableSetting,
    threads: usize,
    out: Option<&Path>,
    format: Format,
) -> Result<()> {
    let settings: Vec<StudySetting> = match setting {
        TableSetting::One => vec![StudySetting::One],
        TableSetting::Two => vec![StudySetting::Two],
        TableSetting::Three => vec![StudySetting::Three],
        TableSetting::All => StudySetting::all().to_vec(),
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let check = reps >= MIN_REPS_FOR_CHECKS;
    if !check {
        eprintln!(
            "warning: {reps} replicates is below {MIN_REPS_FOR_CHECKS}; skipping tolerance checks"
        );
    }
    let stdout = io::stdout();
    let mut stdout = stdout.lock();
    for s in settings {
        let report = run_coverage_study(&s.study(reps, seed, threads))?;
        if let Some(dir) = out {
            let body = match format {
                Format::Text => report.to_text(),
                Format::Json => report.to_json(),
                Format::Csv => report.to_csv(),
            };
            let path = dir.join(format!("setting{}.{}", s.number(), format.extension()));
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        }
        writeln!(stdout, "{}", report.to_text())?;
        writeln!(stdout, "{}", s.comparison(&report))?;
        if check {
            for c in s.checks(&report) {
                writeln!(stdout, "{c}")?;
            }
            writeln!(stdout)?;
        }
    }
    Ok(())
}

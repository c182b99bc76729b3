//! `cspdc`: design, spectra, rate prediction, time-tag simulation and coincidence analysis.

mod output;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cspdc::coincidence::AnalysisConfig;
use cspdc::config::{ProjectConfig, Scenario};
use cspdc::report;
use cspdc::sim::{simulate_with, StreamMetadata, TagFormat, TagReader, TagWriter};
use cspdc::{Error, ErrorKind, Result};

use output::Sink;

#[derive(Parser)]
#[command(name = "cspdc", version, about = "Cascaded down-conversion triplet source toolkit")]
struct Cli {
    /// Project file; the bundled reference project when absent.
    #[arg(long, global = true, env = "CSPDC_CONFIG")]
    config: Option<PathBuf>,

    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Binary,
}

#[derive(Subcommand)]
enum Command {
    /// Poling periods, group indices, GVD table and parasitic matches.
    Design,
    /// Brightness spectrum of one stage.
    Spectrum {
        #[arg(long)]
        stage: Option<String>,
    },
    /// Pump-wavelength acceptance of one stage.
    Acceptance {
        #[arg(long)]
        stage: Option<String>,
    },
    /// Rate-model prediction and efficiency inferred from the measurements.
    Predict,
    /// Simulate a scenario to a tag file.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Histogram a tag file and extract the coincidence rate.
    Analyze {
        /// Binary or CSV tag file.
        tags: PathBuf,
        /// Take analysis settings from this scenario instead of the project defaults.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        start: Option<u8>,
        #[arg(long)]
        stop: Option<u8>,
        #[arg(long)]
        rebin: Option<usize>,
        #[arg(long)]
        window_bins: Option<usize>,
        /// Acquisition time in seconds, overriding the file header.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Simulate, analyze on the fly and compare with the configured truth.
    Closure {
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario name; the first scenario when absent.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seconds.
    #[arg(long)]
    duration: Option<f64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            output::report_error("usage", ErrorKind::Validation, &e.to_string());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            output::report_error(e.code(), e.kind(), &e.to_string());
            ExitCode::from(match e.kind() {
                ErrorKind::Validation => 1,
                ErrorKind::Numeric => 2,
            })
        }
    }
}

fn load(path: Option<&Path>) -> Result<ProjectConfig> {
    match path {
        Some(p) => ProjectConfig::load(p),
        None => Ok(ProjectConfig::bundled()),
    }
}

fn unsupported(command: &str, format: Format) -> Error {
    let name = format.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    Error::invalid("output format", format!("`{command}` cannot write {name}"))
}

fn run(cli: Cli) -> Result<()> {
    let project = load(cli.config.as_deref())?;
    let sink = Sink::new(cli.out.clone());
    match cli.command {
        Command::Design => {
            let d = report::design_report(&project)?;
            match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => sink.text(&output::design_csv(&d)),
                Format::Json => sink.json(&d),
                f => Err(unsupported("design", f)),
            }
        }
        Command::Spectrum { stage } => {
            let setup = match &stage {
                Some(label) => project.stage(label)?,
                None => project
                    .stages
                    .iter()
                    .find(|s| s.spectrum.is_some())
                    .ok_or_else(|| Error::invalid("spectrum", "no stage has a spectrum grid"))?,
            };
            let s = report::stage_spectrum(setup)?;
            match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => sink.text(&output::spectrum_csv(&s)?),
                Format::Json => sink.json(&output::SpectrumJson::new(&s)),
                f => Err(unsupported("spectrum", f)),
            }
        }
        Command::Acceptance { stage } => {
            let setup = match &stage {
                Some(label) => project.stage(label)?,
                None => project
                    .stages
                    .iter()
                    .find(|s| s.acceptance.is_some())
                    .ok_or_else(|| Error::invalid("acceptance", "no stage has an acceptance scan"))?,
            };
            let a = report::stage_acceptance(setup)?;
            match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => sink.text(&output::acceptance_csv(&a)?),
                Format::Json => sink.json(&output::AcceptanceJson::new(&a)),
                f => Err(unsupported("acceptance", f)),
            }
        }
        Command::Predict => {
            let p = report::predict(&project)?;
            match cli.format {
                None => {
                    output::stdout(&output::prediction_text(&p));
                    match &cli.out {
                        Some(_) => sink.json(&p),
                        None => Ok(()),
                    }
                }
                Some(Format::Json) => sink.json(&p),
                Some(f) => Err(unsupported("predict", f)),
            }
        }
        Command::Simulate { run } => {
            let s = scenario(&project, &run)?;
            let format = match cli.format.unwrap_or(Format::Binary) {
                Format::Binary => TagFormat::Binary,
                Format::Csv => TagFormat::Csv,
                f => return Err(unsupported("simulate", f)),
            };
            let path = match cli.out {
                Some(p) => p,
                None => {
                    let ext = if format == TagFormat::Binary { "tags" } else { "csv" };
                    project.output_dir.join(format!("{}-seed{}.{ext}", s.name, s.config.seed))
                }
            };
            let summary = simulate_to_file(&s, &path, format)?;
            output::stdout(&(output::to_json(&summary) + "\n"));
            Ok(())
        }
        Command::Analyze {
            tags,
            scenario,
            start,
            stop,
            rebin,
            window_bins,
            duration,
        } => {
            let mut a = match &scenario {
                Some(name) => project.scenario(name)?.analysis.clone(),
                None => project.analysis.clone(),
            };
            a.start_channel = start.unwrap_or(a.start_channel);
            a.stop_channel = stop.unwrap_or(a.stop_channel);
            a.rebin = rebin.unwrap_or(a.rebin);
            a.window_bins = window_bins.unwrap_or(a.window_bins);
            let analysis = analyze_file(&tags, &a, duration)?;
            match (cli.format, &cli.out) {
                (Some(Format::Csv), None) => sink.text(&output::histogram_csv(&analysis.hist)?),
                (None | Some(Format::Json) | Some(Format::Csv), _) => {
                    if let Some(p) = &cli.out {
                        Sink::new(Some(p.clone())).text(&output::histogram_csv(&analysis.hist)?)?;
                    }
                    output::stdout(&(output::to_json(&output::AnalysisJson::new(&analysis, cli.out.as_deref())) + "\n"));
                    Ok(())
                }
                (Some(f), _) => Err(unsupported("analyze", f)),
            }
        }
        Command::Closure { run } => {
            let s = scenario(&project, &run)?;
            let c = report::closure(&s)?;
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => sink.json(&c),
                f => Err(unsupported("closure", f)),
            }
        }
    }
}

fn scenario(project: &ProjectConfig, run: &RunArgs) -> Result<Scenario> {
    let mut s = match &run.scenario {
        Some(name) => project.scenario(name)?.clone(),
        None => project
            .scenarios
            .first()
            .cloned()
            .ok_or_else(|| Error::invalid("scenario", "the project defines no scenarios"))?,
    };
    if let Some(seed) = run.seed {
        s.config.seed = seed;
    }
    if let Some(d) = run.duration {
        s.config.duration_s = d;
    }
    s.config.validate().map_err(|e| Error::invalid(format!("scenario {}", s.name), e.to_string()))?;
    Ok(s)
}

fn simulate_to_file(s: &Scenario, path: &Path, format: TagFormat) -> Result<cspdc::sim::SimulationSummary> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let meta = StreamMetadata {
        digest: s.config.digest(),
        duration_s: s.config.duration_s,
        seed: Some(s.config.seed),
        tag_resolution_ps: s.config.tag_resolution_ps,
    };
    let mut w = TagWriter::new(BufWriter::new(file), format, &meta).map_err(|e| Error::io(path, e))?;
    let summary = simulate_with(&s.config, |batch| w.write_batch(batch).map_err(|e| Error::io(path, e)))?;
    w.finish().map_err(|e| Error::io(path, e))?;
    Ok(summary)
}

/// Stream a tag file through the histogrammer without loading it.
fn analyze_file(path: &Path, a: &AnalysisConfig, duration_s: Option<f64>) -> Result<cspdc::coincidence::Analysis> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = TagReader::new(BufReader::new(file))?;
    let mut builder = a.builder()?;
    let mut last = 0u64;
    let mut index = 0usize;
    while let Some((channel, t)) = reader.next_record()? {
        if t < last {
            return Err(Error::Unsorted { index });
        }
        last = t;
        index += 1;
        builder.push_record(channel, t);
    }
    let duration = match duration_s.or(reader.duration_s) {
        Some(d) => d,
        None => {
            log::warn!("{}: no duration recorded; using the last tag time", path.display());
            (last as f64 * 1e-12).max(1e-12)
        }
    };
    a.analyze(&builder.finish(duration)?)
}

//! Batch driver: loads trials, runs the elevation-space analyses and writes
//! CSVs, SVG plots and JSON reports.

pub mod config;
pub mod output;
pub mod pipeline;
pub mod plot;
pub mod report;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use elevspace::io::{write_trial, SeriesTable};
use elevspace::synthetic::synthetic_suite;
use elevspace::Laterality;

use crate::config::{expand_inputs, AnalysisConfig, PlotFormat, Toggles};
use crate::output::{percent_axis, write_atomic, write_trial_outputs, Outputs};
use crate::pipeline::{analyze_trial, check_prediction, load_reference, run_batch, ReferencePlane};
use crate::report::{Failure, Report};

#[derive(Debug, Parser)]
#[command(name = "elevspace", version, about = "Elevation-angle and elevation-space coordination analysis of gait trials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Default, Args)]
pub struct CommonArgs {
    /// Trial CSVs, directories of trials, or glob patterns.
    #[arg(short, long = "input", num_args = 1..)]
    pub input: Vec<String>,
    /// TOML config, or JSON (a previous report's config echo is accepted).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Plane JSON from `pca`, or a trial CSV whose mean stride defines it.
    #[arg(long = "reference-cvp")]
    pub reference_cvp: Option<PathBuf>,
    /// Override the side recorded in trial metadata.
    #[arg(long)]
    pub side: Option<Laterality>,
    #[arg(long)]
    pub grid: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(short, long)]
    pub jobs: Option<usize>,
    /// Reject unknown columns and metadata keys and enforce moment units.
    #[arg(long = "strict-units")]
    pub strict_units: bool,
    #[arg(long, value_enum)]
    pub plots: Option<PlotFormat>,
    /// Fraction trimmed from each end of the swing window.
    #[arg(long = "swing-trim")]
    pub swing_trim: Option<f64>,
    /// Odd moving-average window for elevation space moments.
    #[arg(long = "esm-smoothing")]
    pub esm_smoothing: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Elevation angles per stride.
    Transform {
        #[command(flatten)]
        common: CommonArgs,
        /// Also compute elevation space moments.
        #[arg(long)]
        esm: bool,
    },
    /// Elevation space moments per stride and their planarity.
    Esm {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Covariation planes, PC scores and plane files.
    Pca {
        #[command(flatten)]
        common: CommonArgs,
        /// Also fit planes to elevation space moments.
        #[arg(long)]
        esm: bool,
    },
    /// Shank elevation predicted from a plane, a thigh source and a foot source.
    PredictShank {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long = "thigh-source")]
        thigh_source: Option<PathBuf>,
        #[arg(long = "foot-source")]
        foot_source: Option<PathBuf>,
    },
    /// Joint-space vs elevation-space power.
    PowerCheck {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Every enabled analysis plus a consolidated report.
    Report {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Writes a deterministic synthetic trial suite.
    Synth {
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        strides: Option<usize>,
        /// Omit moment columns.
        #[arg(long = "kinematics-only")]
        kinematics_only: bool,
        /// Omit event columns so events must be detected.
        #[arg(long = "no-events")]
        no_events: bool,
    },
}

/// Config file (or defaults) overlaid with command-line flags, validated.
pub fn resolve_config(args: &CommonArgs) -> Result<AnalysisConfig> {
    let mut cfg = match &args.config {
        Some(p) => AnalysisConfig::from_file(p)?,
        None => AnalysisConfig::default(),
    };
    if !args.input.is_empty() {
        cfg.inputs = args.input.clone();
    }
    if let Some(o) = &args.out {
        cfg.out_dir = o.clone();
    }
    if let Some(r) = &args.reference_cvp {
        cfg.reference.cvp = Some(r.clone());
    }
    if args.side.is_some() {
        cfg.side = args.side;
    }
    if let Some(g) = args.grid {
        cfg.grid = g;
    }
    if let Some(j) = args.jobs {
        cfg.jobs = j;
    }
    cfg.strict_units |= args.strict_units;
    if let Some(p) = args.plots {
        cfg.plots = p;
    }
    if let Some(t) = args.swing_trim {
        cfg.tolerances.swing_trim = t;
    }
    if let Some(w) = args.esm_smoothing {
        cfg.tolerances.esm_smoothing = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn only(angles: bool, esm: bool, power_check: bool, prediction: bool) -> Toggles {
    Toggles {
        angles,
        esm,
        power_check,
        prediction,
    }
}

/// Runs the batch analysis behind every subcommand except `predict-shank`
/// and `synth`. Returns the report and its exit code.
pub fn run_batch_command(name: &str, cfg: &AnalysisConfig, toggles: &Toggles, outputs: Outputs) -> Result<Report> {
    let paths = expand_inputs(&cfg.inputs)?;
    if paths.is_empty() {
        bail!("inputs matched no trial files");
    }
    let reference = cfg
        .reference
        .cvp
        .as_deref()
        .map(|p| load_reference(p, cfg))
        .transpose()?;
    let results = run_batch(&paths, cfg, toggles, reference.as_ref())?;
    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for (path, r) in results {
        match r {
            Ok(t) => {
                for s in &t.skipped {
                    eprintln!("skip: {}: {s}", t.id);
                }
                for n in &t.notices {
                    log::info!("{}: {n}", t.id);
                }
                write_trial_outputs(&cfg.out_dir, &t, outputs, cfg.plots)?;
                trials.push(t);
            }
            Err(e) => {
                eprintln!("error: {}: {e:#}", path.display());
                failures.push(Failure {
                    path: path.display().to_string(),
                    error: format!("{e:#}"),
                });
            }
        }
    }
    let report = Report::new(name, cfg, trials, failures, reference);
    let path = cfg.out_dir.join(format!("{}_report.json", name.replace('-', "_")));
    write_atomic(&path, report.to_json().as_bytes())?;
    println!(
        "{name}: {} of {} trials analyzed, {} strides; report at {}",
        report.summary.trials_analyzed,
        report.summary.trials_total,
        report.summary.strides_analyzed,
        path.display()
    );
    Ok(report)
}

#[derive(Debug, serde::Serialize)]
struct PredictionReport<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a AnalysisConfig,
    reference: &'a ReferencePlane,
    thigh_source: String,
    foot_source: String,
    check: &'a pipeline::PredictionCheck,
}

fn predict_shank_command(cfg: &AnalysisConfig) -> Result<i32> {
    let paths = expand_inputs(&cfg.inputs)?;
    let first = paths.first().cloned();
    let pick = |p: &Option<PathBuf>, what: &str| -> Result<PathBuf> {
        p.clone()
            .or_else(|| first.clone())
            .with_context(|| format!("no {what} given and no input trial to fall back on"))
    };
    let reference_path = pick(&cfg.reference.cvp, "reference plane")?;
    let thigh_path = pick(&cfg.reference.thigh_source, "thigh source")?;
    let foot_path = cfg.reference.foot_source.clone().unwrap_or_else(|| thigh_path.clone());

    let reference = load_reference(&reference_path, cfg)?;
    let toggles = only(true, false, false, false);
    let curves = |p: &Path| -> Result<pipeline::MeanCurves> {
        analyze_trial(p, cfg, &toggles, None)?
            .mean_curves
            .with_context(|| format!("{} has no analyzable stride", p.display()))
    };
    let thigh = curves(&thigh_path)?;
    let foot = curves(&foot_path)?;
    let check = check_prediction(&reference, &thigh.thigh, &foot.foot, &foot.shank)?;

    let x = percent_axis(check.predicted.len());
    let residual: Vec<f64> = check.predicted.iter().zip(&foot.shank).map(|(p, s)| p - s).collect();
    let table = SeriesTable::new()
        .with("percent", x.clone())
        .with("thigh_deg", thigh.thigh.clone())
        .with("foot_deg", foot.foot.clone())
        .with("shank_predicted_deg", check.predicted.clone())
        .with("shank_observed_deg", foot.shank.clone())
        .with("residual_deg", residual);
    write_atomic(&cfg.out_dir.join("predict_shank.csv"), table.to_csv_string().as_bytes())?;
    if cfg.plots == PlotFormat::Svg {
        let series = [
            plot::Series { name: "predicted", x: &x, y: &check.predicted },
            plot::Series { name: "observed", x: &x, y: &foot.shank },
        ];
        let svg = plot::line_plot("shank elevation from the reference plane", "gait cycle (%)", "deg", &series);
        write_atomic(&cfg.out_dir.join("predict_shank.svg"), svg.as_bytes())?;
    }
    let report = PredictionReport {
        tool: "elevspace",
        version: env!("CARGO_PKG_VERSION"),
        command: "predict-shank",
        config: cfg,
        reference: &reference,
        thigh_source: thigh_path.display().to_string(),
        foot_source: foot_path.display().to_string(),
        check: &check,
    };
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    let path = cfg.out_dir.join("predict_shank_report.json");
    write_atomic(&path, json.as_bytes())?;
    println!(
        "predict-shank: max |residual| {:.3} deg (plane bound {:.3} deg); report at {}",
        check.max_abs_residual_deg,
        check.residual_bound_deg,
        path.display()
    );
    Ok(0)
}

fn synth_command(out: &Path, strides: Option<usize>, kinematics_only: bool, no_events: bool) -> Result<i32> {
    for mut g in synthetic_suite() {
        if let Some(n) = strides {
            g.strides = n;
        }
        g.moments &= !kinematics_only;
        g.events &= !no_events;
        let p = write_trial(out, &g.record())?;
        println!("{}", p.display());
    }
    Ok(0)
}

/// Executes a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let (name, common, toggles, outputs) = match cli.command {
        Command::Synth {
            out,
            strides,
            kinematics_only,
            no_events,
        } => return synth_command(&out, strides, kinematics_only, no_events),
        Command::PredictShank {
            common,
            thigh_source,
            foot_source,
        } => {
            let mut cfg = resolve_config(&common)?;
            if thigh_source.is_some() {
                cfg.reference.thigh_source = thigh_source;
            }
            if foot_source.is_some() {
                cfg.reference.foot_source = foot_source;
            }
            return predict_shank_command(&cfg);
        }
        Command::Transform { common, esm } => (
            "transform",
            common,
            only(true, esm, false, false),
            Outputs {
                elevation: true,
                esm,
                ..Default::default()
            },
        ),
        Command::Esm { common } => (
            "esm",
            common,
            only(false, true, false, false),
            Outputs {
                scores: true,
                esm: true,
                ..Default::default()
            },
        ),
        Command::Pca { common, esm } => (
            "pca",
            common,
            only(true, esm, false, false),
            Outputs {
                scores: true,
                esm,
                ..Default::default()
            },
        ),
        Command::PowerCheck { common } => (
            "power-check",
            common,
            only(false, false, true, false),
            Outputs {
                power: true,
                ..Default::default()
            },
        ),
        Command::Report { common } => {
            let cfg = resolve_config(&common)?;
            let t = cfg.toggles.clone();
            let outputs = Outputs {
                elevation: t.angles,
                scores: t.angles || t.esm,
                esm: t.esm,
                power: t.power_check,
            };
            let report = run_batch_command("report", &cfg, &t, outputs)?;
            return Ok(report.exit_code());
        }
    };
    let cfg = resolve_config(&common)?;
    let report = run_batch_command(name, &cfg, &toggles, outputs)?;
    Ok(report.exit_code())
}

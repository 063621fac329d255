use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use stereo_focus::metrics::{evaluate, MetricParams, MetricRow};
use stereo_focus::pipeline::run_stream;
use stereo_focus::simulate::{
    synthesize_scene, synthetic_sources, write_scene, MonoSource, NoiseSpec, SceneSpec, CLEAN_FILE,
    MIXTURE_FILE,
};
use stereo_focus::wav::{read_wav, wav_info, write_wav};
use stereo_focus::{EnhancerKind, FrameParams, Mode, PipelineConfig, Real, RunReport, StereoSignal};

/// Stereo speech enhancement that keeps each source's interaural cues.
#[derive(Parser, Debug)]
#[command(name = "stereo-focus", version, about)]
struct Cli {
    /// Pipeline config JSON; missing fields take built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enhance a stereo WAV.
    Enhance(EnhanceArgs),
    /// Write simulated two-talker scenes and a manifest.
    Simulate(SimulateArgs),
    /// Score outputs against references (IPD / ILD error).
    Evaluate(EvaluateArgs),
    /// Measure the real-time factor of every mode on synthetic input.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
struct PipelineFlags {
    #[arg(long, value_parser = parse_mode())]
    mode: Option<Mode>,
    #[arg(long, value_parser = parse_enhancer())]
    enhancer: Option<EnhancerKind>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Args, Debug)]
struct EnhanceArgs {
    input: PathBuf,
    output: PathBuf,
    #[command(flatten)]
    pipeline: PipelineFlags,
    /// Clean stereo reference (needed by the oracle enhancer).
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Run report destination; printed to stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "f64")]
    precision: Precision,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Output directory; scenes go into numbered subdirectories.
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overlap ratios, cycled across scenes.
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    overlap: Vec<f64>,
    /// Omit for a noise-free scene.
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long, default_value_t = 4.0)]
    duration: f64,
    /// Noise WAV looped under the scene instead of white noise.
    #[arg(long)]
    noise_wav: Option<PathBuf>,
    /// Source WAVs (mono or left channel) replacing the synthetic talkers.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    sources: Option<Vec<PathBuf>>,
    /// Full scene JSON; scene i uses seed + i.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value = "manifest.txt")]
    manifest: String,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Processed WAV (single-file mode).
    #[arg(long, requires = "reference", conflicts_with = "manifest")]
    output: Option<PathBuf>,
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Row label in single-file mode.
    #[arg(long, default_value = "given")]
    label: String,
    /// Scenes to enhance and score, one per line: a scene directory or
    /// `input.wav reference.wav`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Modes to run in manifest mode.
    #[arg(long, value_delimiter = ',', value_parser = parse_mode())]
    modes: Option<Vec<Mode>>,
    #[arg(long, value_parser = parse_enhancer())]
    enhancer: Option<EnhancerKind>,
    /// `.csv` or `.json`; CSV on stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 40.0)]
    threshold_db: f64,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    #[arg(long, value_parser = parse_enhancer())]
    enhancer: Option<EnhancerKind>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', value_parser = parse_mode())]
    modes: Option<Vec<Mode>>,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn parse_mode() -> impl TypedValueParser<Value = Mode> {
    PossibleValuesParser::new(Mode::ALL.map(|m| m.as_str())).map(|s| s.parse::<Mode>().expect("listed mode"))
}

fn parse_enhancer() -> impl TypedValueParser<Value = EnhancerKind> {
    let kinds = [EnhancerKind::Oracle, EnhancerKind::Specsub, EnhancerKind::Passthrough];
    PossibleValuesParser::new(kinds.map(|k| k.as_str())).map(|s| s.parse::<EnhancerKind>().expect("listed enhancer"))
}

/// Parse arguments; argument errors exit with status 2 and the usage line.
fn parse_cli() -> Cli {
    Cli::try_parse().unwrap_or_else(|e| {
        let rendered = e.render().to_string();
        if e.use_stderr() && !rendered.contains("Usage:") {
            eprint!("{rendered}");
            eprintln!("\n{}", Cli::command().render_usage());
            std::process::exit(e.exit_code());
        }
        e.exit()
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = parse_cli();
    let result = match &cli.command {
        Command::Enhance(a) => cmd_enhance(&cli, a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Evaluate(a) => cmd_evaluate(&cli, a),
        Command::Bench(a) => cmd_bench(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Defaults, then the config file, then flags. `sample_rate` sets the frame
/// parameters unless the config file fixes them.
fn resolve_config(
    file: Option<&Path>,
    mode: Option<Mode>,
    enhancer: Option<EnhancerKind>,
    sample_rate: Option<u32>,
) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::default();
    let mut frame_pinned = false;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        frame_pinned = value.get("frame").is_some();
        config = serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))?;
    }
    if let Some(m) = mode {
        config.mode = m;
    }
    if let Some(e) = enhancer {
        config.enhancer = e;
    }
    if let (Some(rate), false) = (sample_rate, frame_pinned) {
        config.frame = FrameParams::for_sample_rate(rate);
    }
    config.validate()?;
    Ok(config)
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn enhance_as<T: Real>(
    input: &Path,
    reference: Option<&Path>,
    output: &Path,
    config: &PipelineConfig,
) -> Result<RunReport> {
    let x: StereoSignal<T> = read_wav(input).with_context(|| format!("reading {}", input.display()))?;
    let r: Option<StereoSignal<T>> = reference
        .map(|p| read_wav(p).with_context(|| format!("reading reference {}", p.display())))
        .transpose()?;
    let out = run_stream(&x, r.as_ref(), config)?;
    write_wav(output, &out.aligned()).with_context(|| format!("writing {}", output.display()))?;
    Ok(out.report)
}

fn cmd_enhance(cli: &Cli, a: &EnhanceArgs) -> Result<()> {
    let info = wav_info(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    if info.channels == 1 {
        warn!("{} is mono; processing it as identical left and right channels", a.input.display());
    }
    let config = resolve_config(cli.config.as_deref(), a.pipeline.mode, a.pipeline.enhancer, Some(info.sample_rate))?;
    if config.enhancer.needs_reference() && a.reference.is_none() {
        bail!("the oracle enhancer needs --reference");
    }
    info!("enhancing {} with {} / {}", a.input.display(), config.mode, config.enhancer);
    let report = match a.precision {
        Precision::F64 => enhance_as::<f64>(&a.input, a.reference.as_deref(), &a.output, &config)?,
        Precision::F32 => enhance_as::<f32>(&a.input, a.reference.as_deref(), &a.output, &config)?,
    };
    write_json(a.report.as_deref(), &report)
}

fn read_mono_source(path: &Path) -> Result<MonoSource> {
    let s: StereoSignal<f64> = read_wav(path).with_context(|| format!("reading source {}", path.display()))?;
    Ok(MonoSource { samples: s.left, sample_rate: s.sample_rate })
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    if a.overlap.is_empty() {
        bail!("--overlap needs at least one value");
    }
    let base: Option<SceneSpec> = a
        .spec
        .as_ref()
        .map(|p| -> Result<SceneSpec> {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing scene {}", p.display()))
        })
        .transpose()?;
    let user_sources = a.sources.as_ref().map(|v| v.iter().map(|p| read_mono_source(p)).collect::<Result<Vec<_>>>()).transpose()?;
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;

    let width = a.count.max(1).to_string().len().max(3);
    let names: Vec<String> = (0..a.count)
        .into_par_iter()
        .map(|i| -> Result<String> {
            let seed = a.seed + i as u64;
            let mut spec = match &base {
                Some(s) => SceneSpec { seed, ..s.clone() },
                None => SceneSpec::random_two_talker(seed, a.overlap[i % a.overlap.len()], a.snr, a.duration),
            };
            if let Some(p) = &a.noise_wav {
                spec.noise = NoiseSpec::Wav { path: p.clone() };
            }
            let sources = match &user_sources {
                Some(s) => s[..spec.sources.len().min(s.len())].to_vec(),
                None => synthetic_sources(&spec),
            };
            let scene = synthesize_scene(&spec, &sources)?;
            let name = format!("scene_{i:0width$}");
            write_scene(&a.out_dir.join(&name), &scene)?;
            Ok(name)
        })
        .collect::<Result<_>>()?;
    let manifest = a.out_dir.join(&a.manifest);
    std::fs::write(&manifest, names.join("\n") + "\n").with_context(|| format!("writing {}", manifest.display()))?;
    info!("wrote {} scenes and {}", names.len(), manifest.display());
    Ok(())
}

/// One manifest entry: what to process and what to score against.
struct Job {
    name: String,
    input: PathBuf,
    reference: PathBuf,
}

fn read_manifest(path: &Path) -> Result<Vec<Job>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut jobs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let job = match fields.as_slice() {
            [dir] => {
                let dir = base.join(dir);
                Job { name: dir.display().to_string(), input: dir.join(MIXTURE_FILE), reference: dir.join(CLEAN_FILE) }
            }
            [input, reference] => {
                Job { name: base.join(input).display().to_string(), input: base.join(input), reference: base.join(reference) }
            }
            _ => bail!("{}:{}: expected a scene directory or `input reference`", path.display(), n + 1),
        };
        jobs.push(job);
    }
    Ok(jobs)
}

fn load_pair(output: &Path, reference: &Path) -> Result<(StereoSignal<f64>, StereoSignal<f64>)> {
    let oi = wav_info(output).with_context(|| format!("reading {}", output.display()))?;
    let ri = wav_info(reference).with_context(|| format!("reading {}", reference.display()))?;
    if oi.channels != ri.channels {
        bail!("{} has {} channels but {} has {}", output.display(), oi.channels, reference.display(), ri.channels);
    }
    if oi.sample_rate != ri.sample_rate {
        bail!("{} is {} Hz but {} is {} Hz", output.display(), oi.sample_rate, reference.display(), ri.sample_rate);
    }
    Ok((read_wav(output)?, read_wav(reference)?))
}

fn cmd_evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<()> {
    let params_for = |rate: u32| MetricParams {
        frame: FrameParams::for_sample_rate(rate),
        threshold_db: a.threshold_db,
        ..MetricParams::default()
    };
    let rows: Vec<MetricRow> = if let Some(manifest) = &a.manifest {
        let jobs = read_manifest(manifest)?;
        let modes = a.modes.clone().unwrap_or_else(|| Mode::ALL.to_vec());
        let per_job: Vec<Vec<MetricRow>> = jobs
            .par_iter()
            .map(|job| -> Result<Vec<MetricRow>> {
                let (x, r) = load_pair(&job.input, &job.reference)?;
                let params = params_for(r.sample_rate);
                modes
                    .iter()
                    .map(|mode| {
                        let config = resolve_config(cli.config.as_deref(), Some(*mode), a.enhancer, Some(x.sample_rate))?;
                        let reference = config.enhancer.needs_reference().then_some(&r);
                        let out = run_stream(&x, reference, &config).with_context(|| format!("{} / {mode}", job.name))?;
                        let rep = evaluate(&out.aligned(), &r, &params)?;
                        Ok(MetricRow {
                            file: job.name.clone(),
                            mode: mode.to_string(),
                            ipd_error: rep.ipd_error,
                            ild_error: rep.ild_error,
                            bins_evaluated: rep.bins_evaluated,
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let rows: Vec<MetricRow> = per_job.into_iter().flatten().collect();
        for mode in &modes {
            let sel: Vec<&MetricRow> = rows.iter().filter(|r| r.mode == mode.as_str()).collect();
            if !sel.is_empty() {
                let n = sel.len() as f64;
                info!(
                    "{mode}: mean ipd_error {:.4}, mean ild_error {:.3} dB over {} files",
                    sel.iter().map(|r| r.ipd_error).sum::<f64>() / n,
                    sel.iter().map(|r| r.ild_error).sum::<f64>() / n,
                    sel.len()
                );
            }
        }
        rows
    } else {
        let (Some(output), Some(reference)) = (&a.output, &a.reference) else {
            bail!("give either --manifest or both --output and --reference");
        };
        let (o, r) = load_pair(output, reference)?;
        let rep = evaluate(&o, &r, &params_for(r.sample_rate))?;
        vec![MetricRow {
            file: output.display().to_string(),
            mode: a.label.clone(),
            ipd_error: rep.ipd_error,
            ild_error: rep.ild_error,
            bins_evaluated: rep.bins_evaluated,
        }]
    };
    write_rows(a.report.as_deref(), &rows)
}

fn write_rows(path: Option<&Path>, rows: &[MetricRow]) -> Result<()> {
    let json = path.is_some_and(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")));
    if json {
        return write_json(path, &rows);
    }
    let sink: Box<dyn std::io::Write> = match path {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_bench(cli: &Cli, a: &BenchArgs) -> Result<()> {
    let spec = SceneSpec::random_two_talker(a.seed, 0.2, Some(5.0), a.duration);
    let scene = synthesize_scene(&spec, &synthetic_sources(&spec))?;
    let modes = a.modes.clone().unwrap_or_else(|| Mode::ALL.to_vec());
    let mut reports = Vec::with_capacity(modes.len());
    for mode in modes {
        let config = resolve_config(cli.config.as_deref(), Some(mode), a.enhancer, Some(spec.sample_rate))?;
        let reference = config.enhancer.needs_reference().then_some(&scene.clean_sum);
        let out = run_stream(&scene.mixture, reference, &config)?;
        info!("{mode}: rtf {:.4}", out.report.rtf);
        reports.push(out.report);
    }
    write_json(a.report.as_deref(), &reports)
}

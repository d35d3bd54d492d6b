//! Command-line interface: render pseudo-images, print prompts, execute
//! benchmark runs and ablation matrices, and re-emit reports from stored
//! artifacts.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spectrabench::bench::{
    emit_matrix, emit_run_report, rebuild_report, run_ablation, run_eval, BackendKind,
    MatrixConfig, RunConfig,
};
use spectrabench::promptkit::{build_prompt, ClassVocabulary, PromptStrategy, StrategyVariant};
use spectrabench::raster::{align_to_common_grid, load_scene, NormalizationBounds};
use spectrabench::spectral::{render_modalities, ModalityKind};

#[derive(Parser)]
#[command(
    name = "spectrabench",
    about = "Multi-spectral scenes as pseudo-images for vision-language models, with a zero-shot benchmark harness",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene's pseudo-images to PNG files.
    Render(RenderArgs),
    /// Assemble a prompt for a scene and print it (or write it to a file).
    Prompt(PromptArgs),
    /// Execute one benchmark run from a config file.
    Run(RunArgs),
    /// Execute an ablation matrix and emit the comparison table.
    Ablate(AblateArgs),
    /// Re-emit report files from a run's stored per-sample artifacts.
    Report(ReportArgs),
}

fn parse_modality(s: &str) -> Result<ModalityKind, String> {
    s.parse().map_err(|_| {
        format!(
            "unknown modality {s:?}; expected one of {}",
            ModalityKind::ALL
                .iter()
                .map(|k| k.token())
                .collect::<Vec<_>>()
                .join(", ")
        )
    })
}

#[derive(Args)]
struct SceneArgs {
    /// Scene manifest JSON.
    #[arg(long)]
    manifest: PathBuf,
    /// Modalities to render (default: all six).
    #[arg(long, value_delimiter = ',', value_parser = parse_modality)]
    modalities: Vec<ModalityKind>,
    /// Normalization: "per-scene" or "fixed:<lo>:<hi>".
    #[arg(long, default_value = "per-scene")]
    normalization: String,
    /// Common grid resolution in meters per pixel.
    #[arg(long, default_value_t = 10)]
    target_resolution: u32,
}

impl SceneArgs {
    fn bounds(&self) -> Result<NormalizationBounds, String> {
        parse_bounds(&self.normalization)
    }

    fn kinds(&self) -> Vec<ModalityKind> {
        if self.modalities.is_empty() {
            ModalityKind::ALL.to_vec()
        } else {
            self.modalities.clone()
        }
    }
}

fn parse_bounds(spec: &str) -> Result<NormalizationBounds, String> {
    if spec == "per-scene" {
        return Ok(NormalizationBounds::PerScene);
    }
    if let Some(rest) = spec.strip_prefix("fixed:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() == 2 {
            let lo: f32 = parts[0].parse().map_err(|e| format!("bad lo: {e}"))?;
            let hi: f32 = parts[1].parse().map_err(|e| format!("bad hi: {e}"))?;
            return Ok(NormalizationBounds::Fixed {
                lo,
                hi,
                per_band: Default::default(),
            });
        }
    }
    Err(format!(
        "unrecognized normalization {spec:?}; expected \"per-scene\" or \"fixed:<lo>:<hi>\""
    ))
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Output directory for `<scene_id>_<kind>.png` files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct PromptArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Vocabulary JSON file.
    #[arg(long)]
    vocabulary: PathBuf,
    /// Prompting strategy.
    #[arg(long, value_parser = ["baseline", "expansion", "cot"], default_value = "baseline")]
    strategy: String,
    /// Drop the band catalog block (the "w/o band description" ablation).
    #[arg(long)]
    no_band_catalog: bool,
    /// Drop the per-image descriptor lines.
    #[arg(long)]
    no_image_descriptors: bool,
    /// Compose class guides into the chain-of-thought prompt.
    #[arg(long)]
    with_expansion: bool,
    /// Write the prompt here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration JSON.
    #[arg(long, short)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct AblateArgs {
    /// Matrix configuration JSON ({"base": <run config>, "rows": [...]}).
    #[arg(long, short)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

/// CLI overrides for config-file keys.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    sample_limit: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Replace the backend with a replay over this fixture directory.
    #[arg(long)]
    replay_from: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', value_parser = parse_modality)]
    modalities: Vec<ModalityKind>,
}

impl Overrides {
    fn apply(&self, config: &mut RunConfig) {
        if let Some(limit) = self.sample_limit {
            config.sample_limit = Some(limit);
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(workers) = self.workers {
            config.workers = workers;
        }
        if let Some(dir) = &self.output_dir {
            config.output_dir = Some(dir.clone());
        }
        if let Some(dir) = &self.replay_from {
            config.backend.kind = BackendKind::Replay {
                fixture_dir: dir.clone(),
            };
            // Pure replay: recording or caching on top would be a no-op.
            config.backend.record_dir = None;
            config.backend.cache_dir = None;
        }
        if !self.modalities.is_empty() {
            config.modalities = self.modalities.clone();
        }
    }
}

#[derive(Args)]
struct ReportArgs {
    /// Run output directory (holding run_meta.json and samples/).
    #[arg(long)]
    from: PathBuf,
    /// Where to write the re-emitted report files (default: in place).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Render(args) => render(args),
        Command::Prompt(args) => prompt(args),
        Command::Run(args) => run(args),
        Command::Ablate(args) => ablate(args),
        Command::Report(args) => report(args),
    }
}

fn load_aligned_scene(
    args: &SceneArgs,
) -> Result<spectrabench::raster::MultiSpectralScene, String> {
    let scene = load_scene(&args.manifest).map_err(|e| e.to_string())?;
    align_to_common_grid(&scene, args.target_resolution).map_err(|e| e.to_string())
}

fn render(args: RenderArgs) -> Result<(), String> {
    let bounds = args.scene.bounds()?;
    let scene = load_aligned_scene(&args.scene)?;
    let images =
        render_modalities(&scene, &args.scene.kinds(), &bounds).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(&args.out).map_err(|e| e.to_string())?;
    for image in &images {
        let path = image
            .write_png(&args.out, &scene.scene_id)
            .map_err(|e| e.to_string())?;
        println!("{}", path.display());
    }
    Ok(())
}

fn prompt(args: PromptArgs) -> Result<(), String> {
    let bounds = args.scene.bounds()?;
    let scene = load_aligned_scene(&args.scene)?;
    let images =
        render_modalities(&scene, &args.scene.kinds(), &bounds).map_err(|e| e.to_string())?;
    let vocabulary = ClassVocabulary::from_file(&args.vocabulary).map_err(|e| e.to_string())?;
    let variant = match args.strategy.as_str() {
        "baseline" => StrategyVariant::Baseline,
        "expansion" => StrategyVariant::Expansion,
        _ => StrategyVariant::Cot,
    };
    let strategy = PromptStrategy {
        variant,
        include_band_catalog: !args.no_band_catalog,
        include_image_descriptors: !args.no_image_descriptors,
        with_expansion: args.with_expansion,
    };
    let bundle = build_prompt(images, &vocabulary, strategy).map_err(|e| e.to_string())?;
    match &args.output {
        Some(path) => std::fs::write(path, bundle.instruction_text).map_err(|e| e.to_string())?,
        None => print!("{}", bundle.instruction_text),
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<(), String> {
    let mut config = RunConfig::from_file(&args.config).map_err(|e| e.to_string())?;
    args.overrides.apply(&mut config);
    let report = run_eval(&config).map_err(|e| e.to_string())?;
    print!("{}", spectrabench::bench::report::run_text(&report));
    if let Some(dir) = &config.output_dir {
        println!("artifacts: {}", dir.display());
    } else {
        // Still give machines something to consume.
        emit_to_stdout(&report)?;
    }
    Ok(())
}

fn emit_to_stdout(report: &spectrabench::metrics::EvalReport) -> Result<(), String> {
    let json = String::from_utf8(report.to_json_bytes()).map_err(|e| e.to_string())?;
    println!("{json}");
    Ok(())
}

fn ablate(args: AblateArgs) -> Result<(), String> {
    let mut matrix = MatrixConfig::from_file(&args.config).map_err(|e| e.to_string())?;
    args.overrides.apply(&mut matrix.base);
    let rows = run_ablation(&matrix);
    print!("{}", spectrabench::bench::report::matrix_text(&rows));
    if let Some(dir) = &matrix.base.output_dir {
        emit_matrix(&rows, dir).map_err(|e| e.to_string())?;
        println!("artifacts: {}", dir.display());
    }
    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    if failures == rows.len() {
        return Err("every matrix row failed".into());
    }
    Ok(())
}

fn report(args: ReportArgs) -> Result<(), String> {
    let report = rebuild_report(&args.from).map_err(|e| e.to_string())?;
    let out = args.out.as_ref().unwrap_or(&args.from);
    emit_run_report(&report, out).map_err(|e| e.to_string())?;
    print!("{}", spectrabench::bench::report::run_text(&report));
    println!("artifacts: {}", out.display());
    Ok(())
}

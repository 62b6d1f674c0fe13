use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fieldseg::raster::RgbImage;
use fieldseg::synth::{dumbbell_scene, grid_scene, two_tone_scene, write_training_set, GridSpec};
use fieldseg::{Error, Result};
use fieldseg_cli::pipeline::{eval_command, run_ablation, run_pipeline};
use fieldseg_cli::{format_confusion, train_command, RunConfig, Stages};

#[derive(Parser)]
#[command(name = "fieldseg", version, about = "Delineate agricultural field parcels from aerial imagery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline on one image.
    Run(RunArgs),
    /// Run the PP, PP+MC, PP+LCD and PP+MC+LCD stage sets against ground truth.
    Ablate(RunArgs),
    /// Cross-validate and train the Ag / non-Ag classifier.
    Train(TrainArgs),
    /// Score detections against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic scene or training set.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    image: Option<PathBuf>,
    /// Edge-probability PNG; repeat to average several.
    #[arg(long = "edge-map")]
    edge_maps: Vec<PathBuf>,
    /// Cropland mask PNG (non-zero = cropland).
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Ground-truth GeoJSON in pixel coordinates.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Classifier model JSON.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of pp,mc,lcd,nonag.
    #[arg(long)]
    stages: Option<String>,
    /// Also write every min-cut decision to debug_cuts.json.
    #[arg(long)]
    debug_cuts: bool,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.image {
            cfg.input_image = Some(p.clone());
        }
        if !self.edge_maps.is_empty() {
            cfg.edge_maps = self.edge_maps.clone();
        }
        if let Some(p) = &self.mask {
            cfg.cropland_mask = Some(p.clone());
        }
        if let Some(p) = &self.gt {
            cfg.ground_truth = Some(p.clone());
        }
        if let Some(p) = &self.model {
            cfg.model = Some(p.clone());
        }
        if let Some(p) = &self.out {
            cfg.output_dir = p.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = &self.stages {
            cfg.stages = s.parse::<Stages>()?;
        }
        cfg.debug_cuts |= self.debug_cuts;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    /// CSV with id,label rows; crops are <id>.png next to it.
    #[arg(long)]
    manifest: PathBuf,
    /// Where to write the trained model.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// TOML configuration; only its seed and [forest] section are used.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    /// Detected parcels as GeoJSON.
    #[arg(long)]
    det: PathBuf,
    /// Image that fixes the frame size.
    #[arg(long)]
    image: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// TOML configuration; only its [eval] section is used.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Grid,
    TwoTone,
    Dumbbell,
    Training,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "grid")]
    kind: SynthKind,
    #[arg(long, default_value_t = 3)]
    rows: usize,
    #[arg(long, default_value_t = 3)]
    cols: usize,
    /// Cell pitch in pixels, boundary included.
    #[arg(long, default_value_t = 40)]
    cell: usize,
    #[arg(long, default_value_t = 2)]
    boundary: usize,
    #[arg(long, default_value_t = 6)]
    jitter: u8,
    /// Chance that an internal boundary segment is faint.
    #[arg(long, default_value_t = 0.0)]
    faint: f64,
    /// Number of non-Ag pockets.
    #[arg(long, default_value_t = 0)]
    pockets: usize,
    /// Number of crops for --kind training.
    #[arg(long, default_value_t = 400)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run(a) => {
            let cfg = a.config()?;
            let (res, outs) = run_pipeline(&cfg)?;
            let c = res.stage_counts;
            println!(
                "extracted {} | filtered {} | min-cut {} | recut {} | ag {} non-ag {}",
                c.extracted, c.after_filter, c.after_mincut, c.after_lcd, c.ag, c.non_ag
            );
            println!("parcels: {}", outs.geojson.display());
            if let Some(r) = &outs.report {
                let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(r).map_err(|e| Error::io(r, e))?)?;
                println!("metrics: {}", rep["image"]);
            }
        }
        Command::Ablate(a) => {
            let cfg = a.config()?;
            let gt = cfg
                .ground_truth
                .clone()
                .ok_or_else(|| Error::config("ablate needs --gt"))?;
            let (rows, path) = run_ablation(&cfg, &gt)?;
            println!("{:<12}{:>10}{:>10}{:>10}", "stages", "precision", "recall", "f1");
            for r in &rows {
                println!("{:<12}{:>10.4}{:>10.4}{:>10.4}", r.stages, r.precision, r.recall, r.f1);
            }
            println!("table: {}", path.display());
        }
        Command::Train(a) => {
            let cfg = match &a.config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            let seed = a.seed.unwrap_or(cfg.seed);
            let (rep, model) = train_command(&a.manifest, &a.model, a.folds, &cfg.forest, seed)?;
            print!("{}", format_confusion(&rep.total));
            println!("accuracy {:.4}  macro-F1 {:.4}", rep.accuracy, rep.macro_f1);
            if let Some(oob) = model.oob_accuracy {
                println!("final model out-of-bag accuracy {oob:.4}");
            }
            println!("model: {}", a.model.display());
        }
        Command::Eval(a) => {
            let cfg = match &a.config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            let img = RgbImage::load(&a.image)?;
            let rep = eval_command(&a.gt, &a.det, img.width(), img.height(), &cfg.eval, &a.out)?;
            let m = rep.image;
            println!(
                "precision {:.4} recall {:.4} f1 {:.4} agglomeration {:.4} fragmentation {:.4} detection rate {:.4}",
                m.precision, m.recall, m.f1, m.agglomeration, m.fragmentation, rep.detection_rate
            );
        }
        Command::Synth(a) => {
            let scene = match a.kind {
                SynthKind::Training => {
                    let m = write_training_set(&a.out, a.count, a.seed)?;
                    println!("manifest: {}", m.display());
                    return Ok(());
                }
                SynthKind::Grid => grid_scene(&GridSpec {
                    rows: a.rows,
                    cols: a.cols,
                    cell: a.cell,
                    boundary: a.boundary,
                    jitter: a.jitter,
                    faint_fraction: a.faint,
                    nonag_pockets: a.pockets,
                    seed: a.seed,
                })?,
                SynthKind::TwoTone => two_tone_scene(a.seed),
                SynthKind::Dumbbell => dumbbell_scene(a.seed),
            };
            let p = scene.write(&a.out)?;
            println!("image: {}", p.image.display());
            println!("edge map: {}", p.edge_map.display());
            if let Some(m) = &p.cropland {
                println!("cropland: {}", m.display());
            }
            println!("ground truth: {}", p.gt.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

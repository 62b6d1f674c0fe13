//! The four-stage pipeline, its outputs, ablation and evaluation.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use fieldseg::classify::{extract_features, predict, ForestModel, Label};
use fieldseg::edges::{canny, edge_orientations, binarize_edges, fuse_edge_maps, load_edge_map, local_hysteresis_params, EdgeMap};
use fieldseg::evaluate::{evaluate, EvalParams, EvalReport};
use fieldseg::extract::extract_parcels;
use fieldseg::filter::{apply_filter, Dropped};
use fieldseg::geojson::{read_fields, write_feature_collection, FeatureOut, Field};
use fieldseg::geometry::{perimeter, DirectionalDistanceField, Parcel};
use fieldseg::raster::{to_gray, BinaryMask, GrayImage, RgbImage};
use fieldseg::split::{split_localized, split_mincut_traced, CutStep};
use fieldseg::{Error, Result};

use crate::config::{RunConfig, Stages};

/// Everything read from disk for one run.
#[derive(Clone, Debug)]
pub struct Inputs {
    pub image: RgbImage,
    pub edge_maps: Vec<EdgeMap<f64>>,
    pub cropland: Option<BinaryMask>,
    pub model: Option<ForestModel>,
}

impl Inputs {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let image_path = cfg.input_image.as_ref().ok_or_else(|| Error::config("no input image given"))?;
        let image = RgbImage::load(image_path)?;
        let (w, h) = (image.width(), image.height());
        let mut edge_maps = Vec::with_capacity(cfg.edge_maps.len());
        for p in &cfg.edge_maps {
            let m: EdgeMap<f64> = load_edge_map(p)?;
            if (m.width(), m.height()) != (w, h) {
                return Err(Error::input(format!(
                    "edge map {} is {}x{}, image is {w}x{h}",
                    p.display(),
                    m.width(),
                    m.height()
                )));
            }
            edge_maps.push(m);
        }
        let cropland = match &cfg.cropland_mask {
            Some(p) => {
                let m = BinaryMask::load(p)?;
                if m.same_dims(w, h) {
                    Some(m)
                } else {
                    log::info!(
                        "resampling cropland mask {} from {}x{} to {w}x{h}",
                        p.display(),
                        m.width(),
                        m.height()
                    );
                    Some(m.resample_nearest(w, h))
                }
            }
            None => None,
        };
        let model = match (&cfg.model, cfg.stages.nonag) {
            (Some(p), true) => Some(ForestModel::load(p)?),
            _ => None,
        };
        Ok(Self {
            image,
            edge_maps,
            cropland,
            model,
        })
    }
}

/// A final parcel with its class.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledOutput {
    pub parcel: Parcel,
    pub label: Label,
    pub confidence: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StageCounts {
    pub extracted: usize,
    pub after_filter: usize,
    pub after_mincut: usize,
    pub after_lcd: usize,
    pub ag: usize,
    pub non_ag: usize,
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub parcels: Vec<LabeledOutput>,
    pub stage_counts: StageCounts,
    /// Wall time per stage in seconds, in execution order.
    pub timings: Vec<(&'static str, f64)>,
    pub dropped: Dropped,
    pub cut_trace: Vec<CutStep<f64>>,
}

/// Output of stage 1, shared between ablation rows.
#[derive(Clone, Debug)]
pub struct Extraction {
    pub edge_map: EdgeMap<f64>,
    pub gray: GrayImage,
    pub parcels: Vec<Parcel>,
    pub seconds: f64,
}

/// Fused edge maps when any are given; otherwise Canny over the whole
/// image with thresholds from its global mean intensity.
pub fn stage_extract(inputs: &Inputs, cfg: &RunConfig) -> Result<Extraction> {
    let t0 = Instant::now();
    let gray = to_gray(&inputs.image);
    let edge_map = if inputs.edge_maps.is_empty() {
        let everything = BinaryMask::full(gray.width(), gray.height());
        let h = &cfg.hysteresis;
        let hp = local_hysteresis_params(&gray, &everything, h.k_low, h.k_high, h.gaussian_sigma)?;
        log::debug!("global canny thresholds low {:.4} high {:.4}", hp.low, hp.high);
        canny(&gray, &hp)
    } else {
        fuse_edge_maps(&inputs.edge_maps)?
    };
    let parcels = extract_parcels(&edge_map, inputs.cropland.as_ref(), &cfg.extraction)?;
    Ok(Extraction {
        edge_map,
        gray,
        parcels,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

/// Stages 2 to 4 on top of a finished extraction.
pub fn run_stages(inputs: &Inputs, ex: &Extraction, cfg: &RunConfig, stages: Stages) -> Result<PipelineResult> {
    let mut timings = vec![("extract", ex.seconds)];
    let mut counts = StageCounts {
        extracted: ex.parcels.len(),
        ..Default::default()
    };
    let thresholds = cfg.thresholds()?;

    let t = Instant::now();
    let (mut parcels, dropped) = if stages.pp {
        apply_filter(ex.parcels.clone(), &thresholds)
    } else {
        (ex.parcels.clone(), Vec::new())
    };
    timings.push(("filter", t.elapsed().as_secs_f64()));
    counts.after_filter = parcels.len();

    let mut cut_trace = Vec::new();
    if stages.mc {
        let t = Instant::now();
        let c = &cfg.chamfer;
        let strong = binarize_edges(&ex.edge_map, c.threshold);
        let orient = edge_orientations(&ex.edge_map, c.orientation_sigma);
        let dcd = DirectionalDistanceField::build(&strong, &orient, c.bins)?;
        let mut next = Vec::with_capacity(parcels.len());
        for p in &parcels {
            let (pieces, trace) = split_mincut_traced(p, &ex.edge_map, &dcd, &cfg.split)?;
            next.extend(pieces);
            cut_trace.extend(trace);
        }
        parcels = next;
        timings.push(("mincut", t.elapsed().as_secs_f64()));
    }
    counts.after_mincut = parcels.len();

    if stages.lcd {
        let t = Instant::now();
        let mut next = Vec::with_capacity(parcels.len());
        for p in &parcels {
            next.extend(split_localized(p, &ex.gray, &cfg.extraction, &thresholds, &cfg.hysteresis)?);
        }
        parcels = next;
        timings.push(("lcd", t.elapsed().as_secs_f64()));
    }
    counts.after_lcd = parcels.len();

    let t = Instant::now();
    let model = match (stages.nonag, &inputs.model) {
        (true, Some(m)) => Some(m),
        (true, None) => return Err(Error::model("the nonag stage needs a loaded classifier model")),
        _ => None,
    };
    let mut out = Vec::with_capacity(parcels.len());
    for p in parcels {
        let (label, confidence) = match model {
            Some(m) => match extract_features(&p, &inputs.image) {
                Ok(f) => {
                    let pr = predict(m, &f)?;
                    (pr.label, pr.confidence)
                }
                Err(e) => {
                    log::warn!("parcel {} left unclassified: {e}", p.id);
                    (Label::Ag, 0.0)
                }
            },
            None => (Label::Ag, 0.0),
        };
        out.push(LabeledOutput {
            parcel: p,
            label,
            confidence,
        });
    }
    out.sort_by(|a, b| a.parcel.id.cmp(&b.parcel.id));
    if stages.nonag {
        timings.push(("classify", t.elapsed().as_secs_f64()));
    }
    counts.ag = out.iter().filter(|o| o.label == Label::Ag).count();
    counts.non_ag = out.len() - counts.ag;
    Ok(PipelineResult {
        parcels: out,
        stage_counts: counts,
        timings,
        dropped,
        cut_trace,
    })
}

pub fn run_in_memory(inputs: &Inputs, cfg: &RunConfig) -> Result<PipelineResult> {
    let ex = stage_extract(inputs, cfg)?;
    run_stages(inputs, &ex, cfg, cfg.stages)
}

/// Ag detections scored against Ag ground truth.
pub fn evaluate_result(
    parcels: &[LabeledOutput],
    gt: &[Field],
    width: usize,
    height: usize,
    params: &EvalParams,
) -> Result<EvalReport> {
    let gt: Vec<Parcel> = gt
        .iter()
        .filter(|f| f.label == Label::Ag)
        .map(|f| f.parcel.clone())
        .collect();
    let det: Vec<Parcel> = parcels
        .iter()
        .filter(|o| o.label == Label::Ag)
        .map(|o| o.parcel.clone())
        .collect();
    evaluate(&gt, &det, width, height, params)
}

const OVERLAY_ALPHA: f64 = 0.45;
const AG_RGB: [u8; 3] = [255, 230, 0];
const NON_AG_RGB: [u8; 3] = [150, 40, 190];

/// The image with Ag parcels tinted yellow and non-Ag ones purple.
pub fn overlay(img: &RgbImage, parcels: &[LabeledOutput]) -> RgbImage {
    let mut out = img.clone();
    for o in parcels {
        let tint = match o.label {
            Label::Ag => AG_RGB,
            Label::NonAg => NON_AG_RGB,
        };
        for (x, y) in o.parcel.pixels() {
            let px = img.get(x, y);
            let mixed = std::array::from_fn(|c| {
                ((1.0 - OVERLAY_ALPHA) * px[c] as f64 + OVERLAY_ALPHA * tint[c] as f64).round() as u8
            });
            out.set(x, y, mixed);
        }
    }
    out
}

#[derive(Serialize)]
struct AuditEntry {
    id: String,
    rule: &'static str,
    area: usize,
    perimeter: f64,
}

fn write_json<T: Serialize + ?Sized>(path: &Path, v: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(v)?;
    std::fs::write(path, s + "\n").map_err(|e| Error::io(path, e))
}

const METRICS_HEADER: [&str; 8] = [
    "name",
    "precision",
    "recall",
    "f1",
    "agglomeration",
    "fragmentation",
    "detection_rate",
    "mapped_instances",
];

fn metrics_record(name: &str, r: &EvalReport) -> Vec<String> {
    let m = &r.image;
    vec![
        name.to_string(),
        format!("{:.6}", m.precision),
        format!("{:.6}", m.recall),
        format!("{:.6}", m.f1),
        format!("{:.6}", m.agglomeration),
        format!("{:.6}", m.fragmentation),
        format!("{:.6}", r.detection_rate),
        r.per_instance.len().to_string(),
    ]
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::input(format!("cannot write {}: {e}", path.display())))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Files written by [`run_pipeline`].
#[derive(Clone, Debug, Default)]
pub struct RunOutputs {
    pub geojson: PathBuf,
    pub overlay: PathBuf,
    pub audit: PathBuf,
    pub metrics: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub debug_cuts: Option<PathBuf>,
}

/// Runs the configured stages and writes `parcels.geojson`, `overlay.png`
/// and `audit.json`; with ground truth also `report.json` and
/// `metrics.csv`; with `debug_cuts` also `debug_cuts.json`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<(PipelineResult, RunOutputs)> {
    cfg.validate()?;
    let inputs = Inputs::load(cfg)?;
    let (w, h) = (inputs.image.width(), inputs.image.height());
    let gt = match &cfg.ground_truth {
        Some(p) => Some(read_fields(p, w, h)?),
        None => None,
    };
    let result = run_in_memory(&inputs, cfg)?;
    for (stage, secs) in &result.timings {
        log::info!("{stage}: {secs:.3} s");
    }
    log::info!("stage counts: {:?}", result.stage_counts);

    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut outs = RunOutputs {
        geojson: dir.join("parcels.geojson"),
        overlay: dir.join("overlay.png"),
        audit: dir.join("audit.json"),
        ..Default::default()
    };
    let feats: Vec<FeatureOut<'_>> = result
        .parcels
        .iter()
        .map(|o| FeatureOut {
            parcel: &o.parcel,
            label: o.label,
            confidence: o.confidence,
        })
        .collect();
    write_feature_collection(&outs.geojson, &feats, cfg.geotransform.as_ref())?;
    overlay(&inputs.image, &result.parcels).save(&outs.overlay)?;
    let audit: Vec<AuditEntry> = result
        .dropped
        .iter()
        .map(|(p, v)| AuditEntry {
            id: p.id.to_string(),
            rule: v.rule_fired.as_str(),
            area: p.area(),
            perimeter: perimeter::<f64>(p),
        })
        .collect();
    write_json(&outs.audit, &audit)?;
    if let Some(gt) = &gt {
        let report = evaluate_result(&result.parcels, gt, w, h, &cfg.eval)?;
        let rp = dir.join("report.json");
        let mp = dir.join("metrics.csv");
        write_json(&rp, &report)?;
        let name = cfg
            .input_image
            .as_ref()
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        write_csv(&mp, &METRICS_HEADER, &[metrics_record(&name, &report)])?;
        outs.report = Some(rp);
        outs.metrics = Some(mp);
    }
    if cfg.debug_cuts {
        let p = dir.join("debug_cuts.json");
        write_json(&p, &result.cut_trace)?;
        outs.debug_cuts = Some(p);
    }
    Ok((result, outs))
}

/// The four stage sets of the ablation table, in row order.
pub fn ablation_rows(nonag: bool) -> [Stages; 4] {
    let s = |mc, lcd| Stages {
        pp: true,
        mc,
        lcd,
        nonag,
    };
    [s(false, false), s(true, false), s(false, true), s(true, true)]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub stages: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub detection_rate: f64,
}

fn row_name(s: Stages) -> String {
    let mut parts = vec!["PP"];
    if s.mc {
        parts.push("MC");
    }
    if s.lcd {
        parts.push("LCD");
    }
    parts.join("+")
}

/// Ablation on already loaded inputs; the nonag setting comes from `cfg`.
pub fn ablation_in_memory(inputs: &Inputs, gt: &[Field], cfg: &RunConfig) -> Result<Vec<AblationRow>> {
    let ex = stage_extract(inputs, cfg)?;
    let (w, h) = (inputs.image.width(), inputs.image.height());
    ablation_rows(cfg.stages.nonag)
        .into_iter()
        .map(|s| {
            let r = run_stages(inputs, &ex, cfg, s)?;
            let rep = evaluate_result(&r.parcels, gt, w, h, &cfg.eval)?;
            Ok(AblationRow {
                stages: row_name(s),
                precision: rep.image.precision,
                recall: rep.image.recall,
                f1: rep.image.f1,
                detection_rate: rep.detection_rate,
            })
        })
        .collect()
}

/// Runs the four ablation rows against `gt` and writes `ablation.csv`.
pub fn run_ablation(cfg: &RunConfig, gt: &Path) -> Result<(Vec<AblationRow>, PathBuf)> {
    cfg.validate()?;
    let inputs = Inputs::load(cfg)?;
    let fields = read_fields(gt, inputs.image.width(), inputs.image.height())?;
    let rows = ablation_in_memory(&inputs, &fields, cfg)?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let path = cfg.output_dir.join("ablation.csv");
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.stages.clone(),
                format!("{:.6}", r.precision),
                format!("{:.6}", r.recall),
                format!("{:.6}", r.f1),
                format!("{:.6}", r.detection_rate),
            ]
        })
        .collect();
    write_csv(&path, &["stages", "precision", "recall", "f1", "detection_rate"], &records)?;
    Ok((rows, path))
}

/// Scores a detection GeoJSON against ground truth on a `width x height`
/// frame and writes `report.json` and `metrics.csv` into `out`.
pub fn eval_command(gt: &Path, det: &Path, width: usize, height: usize, params: &EvalParams, out: &Path) -> Result<EvalReport> {
    let gt = read_fields(gt, width, height)?;
    let det: Vec<LabeledOutput> = read_fields(det, width, height)?
        .into_iter()
        .map(|f| LabeledOutput {
            parcel: f.parcel,
            label: f.label,
            confidence: 0.0,
        })
        .collect();
    let report = evaluate_result(&det, &gt, width, height, params)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_json(&out.join("report.json"), &report)?;
    let name = "eval";
    write_csv(&out.join("metrics.csv"), &METRICS_HEADER, &[metrics_record(name, &report)])?;
    Ok(report)
}

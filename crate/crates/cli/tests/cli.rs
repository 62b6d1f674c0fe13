use std::path::Path;
use std::process::{Command, Output};

use fieldseg::edges::EdgeMap;
use fieldseg::extract::extract_parcels;
use fieldseg::synth::{grid_scene, GridSpec};
use fieldseg_cli::pipeline::{run_in_memory, Inputs};
use fieldseg_cli::{RunConfig, Stages};

fn fieldseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fieldseg")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn synth_grid(dir: &Path) -> String {
    let out = path(dir, "scene");
    let o = fieldseg(&["synth", "--rows", "2", "--cols", "3", "--cell", "50", "--seed", "1", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn synth_writes_a_complete_scene() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = synth_grid(tmp.path());
    for f in ["image.png", "edges.png", "gt.geojson"] {
        assert!(Path::new(&scene).join(f).exists(), "{f} missing");
    }
    let gt: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(Path::new(&scene).join("gt.geojson")).unwrap()).unwrap();
    assert_eq!(gt["features"].as_array().unwrap().len(), 6);
}

#[test]
fn run_then_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = synth_grid(tmp.path());
    let out = path(tmp.path(), "out");
    let o = fieldseg(&[
        "run",
        "--image",
        &format!("{scene}/image.png"),
        "--edge-map",
        &format!("{scene}/edges.png"),
        "--gt",
        &format!("{scene}/gt.geojson"),
        "--out",
        &out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("extracted 6"), "{stdout}");
    for f in ["parcels.geojson", "overlay.png", "audit.json", "report.json", "metrics.csv"] {
        assert!(Path::new(&out).join(f).exists(), "{f} missing");
    }
    let csv = std::fs::read_to_string(Path::new(&out).join("metrics.csv")).unwrap();
    assert!(csv.starts_with("name,precision,recall,f1,"));

    let ev = path(tmp.path(), "eval");
    let o = fieldseg(&[
        "eval",
        "--gt",
        &format!("{scene}/gt.geojson"),
        "--det",
        &format!("{scene}/gt.geojson"),
        "--image",
        &format!("{scene}/image.png"),
        "--out",
        &ev,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("f1 1.0000"));
}

#[test]
fn train_writes_a_loadable_model() {
    let tmp = tempfile::tempdir().unwrap();
    let set = path(tmp.path(), "train");
    assert_eq!(code(&fieldseg(&["synth", "--kind", "training", "--count", "40", "--out", &set])), 0);
    let model = path(tmp.path(), "model.json");
    let o = fieldseg(&["train", "--manifest", &format!("{set}/manifest.csv"), "--model", &model, "--folds", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("accuracy"));
    fieldseg::classify::ForestModel::load(Path::new(&model)).unwrap();
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = synth_grid(tmp.path());
    let image = format!("{scene}/image.png");
    let out = path(tmp.path(), "out");

    // Configuration problems.
    assert_eq!(code(&fieldseg(&["run", "--out", &out])), 2);
    assert_eq!(code(&fieldseg(&["run", "--image", &image, "--stages", "pp,bogus", "--out", &out])), 2);
    let bad_toml = path(tmp.path(), "bad.toml");
    std::fs::write(&bad_toml, "unknown_key = 3\n").unwrap();
    assert_eq!(code(&fieldseg(&["run", "--config", &bad_toml, "--image", &image, "--out", &out])), 2);
    assert_eq!(code(&fieldseg(&["frobnicate"])), 2);

    // Input problems.
    let missing = path(tmp.path(), "nope.png");
    assert_eq!(code(&fieldseg(&["run", "--image", &missing, "--out", &out])), 3);
    let small = path(tmp.path(), "small.png");
    EdgeMap::<f64>::filled(5, 5, 0.0).unwrap().save(Path::new(&small)).unwrap();
    assert_eq!(code(&fieldseg(&["run", "--image", &image, "--edge-map", &small, "--out", &out])), 3);

    // Model problems.
    assert_eq!(code(&fieldseg(&["run", "--image", &image, "--stages", "nonag", "--out", &out])), 4);
    let model = path(tmp.path(), "model.json");
    std::fs::write(&model, "{\"not\": \"a model\"}").unwrap();
    let o = fieldseg(&["run", "--image", &image, "--model", &model, "--stages", "pp,nonag", "--out", &out]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn no_stages_returns_the_raw_components() {
    let scene = grid_scene(&GridSpec {
        rows: 3,
        cols: 3,
        faint_fraction: 0.4,
        seed: 2,
        ..GridSpec::default()
    })
    .unwrap();
    let cfg = RunConfig {
        stages: Stages::NONE,
        ..RunConfig::default()
    };
    let inputs = Inputs {
        image: scene.image.clone(),
        edge_maps: vec![scene.edge_map.clone()],
        cropland: None,
        model: None,
    };
    let res = run_in_memory(&inputs, &cfg).unwrap();
    let raw = extract_parcels(&scene.edge_map, None, &cfg.extraction).unwrap();
    assert_eq!(res.parcels.len(), raw.len());
    assert_eq!(res.stage_counts.extracted, raw.len());
    for (o, p) in res.parcels.iter().zip(&raw) {
        assert_eq!(&o.parcel, p);
    }
}

#[test]
fn config_round_trips_through_toml() {
    let mut cfg = RunConfig::default();
    cfg.stages = "pp,lcd".parse().unwrap();
    cfg.seed = 99;
    cfg.hysteresis.k_low = 0.2;
    let text = cfg.to_toml_string().unwrap();
    assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
}

#[test]
fn written_polygons_rasterise_to_the_parcel_masks() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = grid_scene(&GridSpec {
        rows: 3,
        cols: 4,
        jitter: 10,
        faint_fraction: 0.3,
        seed: 8,
        ..GridSpec::default()
    })
    .unwrap();
    let paths = scene.write(tmp.path()).unwrap();
    let cfg = RunConfig {
        input_image: Some(paths.image.clone()),
        output_dir: tmp.path().join("out"),
        ..RunConfig::default()
    };
    let (res, outs) = fieldseg_cli::pipeline::run_pipeline(&cfg).unwrap();
    let (w, h) = (scene.width(), scene.height());
    let back = fieldseg::geojson::read_fields(&outs.geojson, w, h).unwrap();
    assert_eq!(back.len(), res.parcels.len());
    for o in &res.parcels {
        let f = back.iter().find(|f| f.parcel.id == o.parcel.id).expect("parcel written");
        assert_eq!(f.parcel.to_frame_mask(w, h), o.parcel.to_frame_mask(w, h), "parcel {}", o.parcel.id);
        assert_eq!(f.label, o.label);
    }
}

//! Run configuration: one TOML document with a section per module.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use fieldseg::classify::ForestParams;
use fieldseg::evaluate::EvalParams;
use fieldseg::extract::ExtractionParams;
use fieldseg::filter::{GroundThresholds, ShapeThresholds, DEFAULT_GSD};
use fieldseg::geojson::GeoTransform;
use fieldseg::split::{LocalRecutParams, SplitParams};
use fieldseg::{Error, Result};

/// Which optional stages run. Extraction always runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stages {
    pub pp: bool,
    pub mc: bool,
    pub lcd: bool,
    pub nonag: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Self {
            pp: true,
            mc: true,
            lcd: true,
            nonag: false,
        }
    }
}

impl Stages {
    pub const NONE: Stages = Stages {
        pp: false,
        mc: false,
        lcd: false,
        nonag: false,
    };
}

/// Comma-separated stage names; `none` or an empty string enables nothing.
impl FromStr for Stages {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = Stages::NONE;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "pp" => out.pp = true,
                "mc" => out.mc = true,
                "lcd" => out.lcd = true,
                "nonag" => out.nonag = true,
                "none" => {}
                other => {
                    return Err(Error::config(format!(
                        "unknown stage {other:?} (expected pp, mc, lcd, nonag)"
                    )))
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Stages {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.pp, "PP"),
            (self.mc, "MC"),
            (self.lcd, "LCD"),
            (self.nonag, "NONAG"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join("+"))
        }
    }
}

/// Canny multipliers on the mean normalised intensity. The same values
/// serve the whole-image pass (when no edge map is given) and the
/// per-parcel recut.
pub type HysteresisConfig = LocalRecutParams<f64>;

/// Directional chamfer field built from the edge map for min-cut scoring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChamferConfig {
    /// Edge-map pixels at or above this take part.
    pub threshold: f64,
    pub bins: usize,
    /// Smoothing before the orientation estimate.
    pub orientation_sigma: f64,
}

impl Default for ChamferConfig {
    fn default() -> Self {
        Self {
            threshold: 0.25,
            bins: 16,
            orientation_sigma: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input_image: Option<PathBuf>,
    pub edge_maps: Vec<PathBuf>,
    pub cropland_mask: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub gsd_m_per_px: f64,
    pub seed: u64,
    pub debug_cuts: bool,
    /// Affine map from pixel to world coordinates for GeoJSON output.
    pub geotransform: Option<GeoTransform>,
    pub stages: Stages,
    pub extraction: ExtractionParams<f64>,
    pub filter: GroundThresholds,
    pub split: SplitParams<f64>,
    pub hysteresis: HysteresisConfig,
    pub chamfer: ChamferConfig,
    pub eval: EvalParams,
    pub forest: ForestParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input_image: None,
            edge_maps: Vec::new(),
            cropland_mask: None,
            model: None,
            ground_truth: None,
            output_dir: PathBuf::from("out"),
            gsd_m_per_px: DEFAULT_GSD,
            seed: 0,
            debug_cuts: false,
            geotransform: None,
            stages: Stages::default(),
            extraction: ExtractionParams::default(),
            filter: GroundThresholds::default(),
            split: SplitParams::default(),
            hysteresis: HysteresisConfig::default(),
            chamfer: ChamferConfig::default(),
            eval: EvalParams::default(),
            forest: ForestParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s).map_err(|e| match e {
            Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn thresholds(&self) -> Result<ShapeThresholds<f64>> {
        self.filter.to_pixels(self.gsd_m_per_px)
    }

    /// Checks everything that can be checked without touching the inputs.
    pub fn validate(&self) -> Result<()> {
        if !(self.gsd_m_per_px > 0.0 && self.gsd_m_per_px.is_finite()) {
            return Err(Error::config(format!("gsd_m_per_px must be positive, got {}", self.gsd_m_per_px)));
        }
        if self.input_image.is_none() {
            return Err(Error::config("no input image given"));
        }
        if self.stages.nonag && self.model.is_none() {
            return Err(Error::model("the nonag stage needs a classifier model (--model)"));
        }
        self.extraction.validate()?;
        self.thresholds()?;
        self.split.validate()?;
        let h = &self.hysteresis;
        if !(h.k_low > 0.0 && h.k_low < h.k_high) {
            return Err(Error::config("hysteresis multipliers must satisfy 0 < k_low < k_high"));
        }
        if !(h.gaussian_sigma > 0.0) {
            return Err(Error::config("hysteresis gaussian_sigma must be positive"));
        }
        let c = &self.chamfer;
        if !(0.0..=1.0).contains(&c.threshold) || c.bins == 0 || !(c.orientation_sigma > 0.0) {
            return Err(Error::config(
                "chamfer needs threshold in [0, 1], at least one bin and a positive sigma",
            ));
        }
        if !(0.0..=1.0).contains(&self.eval.link_min_overlap) {
            return Err(Error::config("eval.link_min_overlap must be in [0, 1]"));
        }
        Ok(())
    }
}

//! Synthetic cropland scenes and shape fixtures with known answers.
//!
//! Scenes are tiled with fields separated by thin dark boundary lines. Ag
//! fields are brownish with mild luminance jitter; non-Ag pockets are green
//! with strong per-pixel texture. Each scene carries a stand-in for an
//! external edge-probability map: 1 on strong boundaries, [`FAINT_PROB`] on
//! faint or missing ones.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classify::Label;
use crate::edges::EdgeMap;
use crate::error::{Error, Result};
use crate::geojson::{to_feature_collection, FeatureOut, Field};
use crate::geometry::{Parcel, ParcelId, Stage};
use crate::raster::{BinaryMask, RgbImage};

/// Edge probability written on faint and missing boundary pixels.
pub const FAINT_PROB: f64 = 0.3;

const BOUNDARY_RGB: [u8; 3] = [46, 40, 34];
const SURROUND_RGB: [u8; 3] = [245, 245, 240];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    /// Cell pitch in pixels, boundary included.
    pub cell: usize,
    pub boundary: usize,
    /// Largest per-pixel luminance offset inside Ag fields.
    pub jitter: u8,
    /// Chance that an internal boundary segment is drawn faint.
    pub faint_fraction: f64,
    pub nonag_pockets: usize,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            rows: 3,
            cols: 3,
            cell: 40,
            boundary: 2,
            jitter: 6,
            faint_fraction: 0.0,
            nonag_pockets: 0,
            seed: 0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::config("grid needs at least one row and one column"));
        }
        if self.boundary == 0 || self.cell <= self.boundary + 2 {
            return Err(Error::config(format!(
                "cell ({}) must exceed boundary ({}) by more than 2 px, boundary at least 1",
                self.cell, self.boundary
            )));
        }
        if !(0.0..=1.0).contains(&self.faint_fraction) {
            return Err(Error::config("faint_fraction must be in [0, 1]"));
        }
        if self.nonag_pockets > self.rows * self.cols {
            return Err(Error::config("more non-Ag pockets than cells"));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.cols * self.cell + self.boundary
    }

    pub fn height(&self) -> usize {
        self.rows * self.cell + self.boundary
    }
}

/// A rendered scene with its ground truth.
#[derive(Clone, Debug)]
pub struct Scene {
    pub image: RgbImage,
    pub edge_map: EdgeMap<f64>,
    pub cropland: Option<BinaryMask>,
    pub fields: Vec<Field>,
}

/// Where [`Scene::write`] put things.
#[derive(Clone, Debug)]
pub struct ScenePaths {
    pub image: PathBuf,
    pub edge_map: PathBuf,
    pub cropland: Option<PathBuf>,
    pub gt: PathBuf,
}

impl Scene {
    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn ag_fields(&self) -> Vec<Parcel> {
        self.fields
            .iter()
            .filter(|f| f.label == Label::Ag)
            .map(|f| f.parcel.clone())
            .collect()
    }

    pub fn gt_geojson(&self) -> serde_json::Value {
        let feats: Vec<FeatureOut<'_>> = self
            .fields
            .iter()
            .map(|f| FeatureOut {
                parcel: &f.parcel,
                label: f.label,
                confidence: 1.0,
            })
            .collect();
        to_feature_collection(&feats, None)
    }

    /// Writes `image.png`, `edges.png`, `gt.geojson` and, when present,
    /// `cropland.png` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<ScenePaths> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths = ScenePaths {
            image: dir.join("image.png"),
            edge_map: dir.join("edges.png"),
            cropland: self.cropland.as_ref().map(|_| dir.join("cropland.png")),
            gt: dir.join("gt.geojson"),
        };
        self.image.save(&paths.image)?;
        self.edge_map.save(&paths.edge_map)?;
        if let (Some(m), Some(p)) = (&self.cropland, &paths.cropland) {
            m.to_gray().save(p)?;
        }
        let s = serde_json::to_string_pretty(&self.gt_geojson())?;
        std::fs::write(&paths.gt, s + "\n").map_err(|e| Error::io(&paths.gt, e))?;
        Ok(paths)
    }
}

fn clamp_u8(v: i32) -> u8 {
    v.clamp(0, 255) as u8
}

/// Brownish colour whose luminance is close to `g`.
pub fn ag_rgb(g: u8) -> [u8; 3] {
    let g = g as i32;
    [clamp_u8(g + 20), clamp_u8(g + 4), clamp_u8(g - 36)]
}

/// Green colour with luminance close to `g`.
pub fn nonag_rgb(g: u8) -> [u8; 3] {
    let g = g as i32;
    [clamp_u8(g - 22), clamp_u8(g + 18), clamp_u8(g - 32)]
}

fn shift(rgb: [u8; 3], d: i32) -> [u8; 3] {
    rgb.map(|c| clamp_u8(c as i32 + d))
}

fn ag_pixel(rng: &mut ChaCha8Rng, base: [u8; 3], jitter: u8) -> [u8; 3] {
    if jitter == 0 {
        return base;
    }
    let j = jitter as i32;
    shift(base, rng.gen_range(-j..=j))
}

fn nonag_pixel(rng: &mut ChaCha8Rng, base: [u8; 3], amp: u8) -> [u8; 3] {
    if amp == 0 {
        return base;
    }
    let a = amp as i32;
    let common = rng.gen_range(-a..=a);
    let mut out = [0u8; 3];
    for (o, &b) in out.iter_mut().zip(&base) {
        *o = clamp_u8(b as i32 + common + rng.gen_range(-a / 4..=a / 4));
    }
    out
}

fn rect_field(x0: usize, y0: usize, w: usize, h: usize, id: u32, label: Label) -> Field {
    let parcel = Parcel::from_mask(&BinaryMask::full(w, h), (x0, y0), ParcelId::root(id), Stage::Extracted)
        .expect("rectangles are valid parcels");
    Field { parcel, label }
}

/// A `rows x cols` grid of fields. Cell `(r, c)` covers
/// `[c * cell + boundary, (c + 1) * cell)` horizontally (likewise
/// vertically); everything else is boundary. Fields are numbered row-major
/// from 1. Non-Ag pockets are textured whatever the jitter.
pub fn grid_scene(spec: &GridSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (spec.width(), spec.height());
    let (b, cell) = (spec.boundary, spec.cell);
    let n = spec.rows * spec.cols;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut nonag = vec![false; n];
    for &k in &order[..spec.nonag_pockets] {
        nonag[k] = true;
    }
    let lum: Vec<u8> = (0..n).map(|_| rng.gen_range(130..=200)).collect();
    let base: Vec<[u8; 3]> = (0..n)
        .map(|k| {
            if nonag[k] {
                nonag_rgb(rng.gen_range(85..=115))
            } else {
                ag_rgb(lum[k])
            }
        })
        .collect();
    // Faint flags for the vertical segment right of each cell and the
    // horizontal segment below it.
    let mut faint_right = vec![false; n];
    let mut faint_below = vec![false; n];
    for k in 0..n {
        let (r, c) = (k / spec.cols, k % spec.cols);
        faint_right[k] = c + 1 < spec.cols && rng.gen_bool(spec.faint_fraction);
        faint_below[k] = r + 1 < spec.rows && rng.gen_bool(spec.faint_fraction);
    }

    let mut image = RgbImage::filled(w, h, BOUNDARY_RGB)?;
    let mut prob = vec![1.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let (cx, cy) = (x / cell, y / cell);
            let (ix, iy) = (x % cell >= b, y % cell >= b);
            let faint = match (ix, iy) {
                (true, true) => {
                    let k = cy * spec.cols + cx;
                    let px = if nonag[k] {
                        nonag_pixel(&mut rng, base[k], 40)
                    } else {
                        ag_pixel(&mut rng, base[k], spec.jitter)
                    };
                    image.set(x, y, px);
                    prob[y * w + x] = 0.0;
                    continue;
                }
                // Vertical segment between (cy, cx - 1) and (cy, cx).
                (false, true) if cx > 0 && cx < spec.cols && cy < spec.rows => {
                    let k = cy * spec.cols + cx - 1;
                    faint_right[k].then_some((k, k + 1))
                }
                (true, false) if cy > 0 && cy < spec.rows && cx < spec.cols => {
                    let k = (cy - 1) * spec.cols + cx;
                    faint_below[k].then_some((k, k + spec.cols))
                }
                _ => None,
            };
            if let Some((k1, k2)) = faint {
                let mix: [u8; 3] = std::array::from_fn(|c| ((base[k1][c] as u16 + base[k2][c] as u16) / 2) as u8);
                image.set(x, y, shift(mix, -25));
                prob[y * w + x] = FAINT_PROB;
            }
        }
    }

    let fields = (0..n)
        .map(|k| {
            let (r, c) = (k / spec.cols, k % spec.cols);
            let label = if nonag[k] { Label::NonAg } else { Label::Ag };
            rect_field(c * cell + b, r * cell + b, cell - b, cell - b, k as u32 + 1, label)
        })
        .collect();
    Ok(Scene {
        image,
        edge_map: EdgeMap::new(w, h, prob)?,
        cropland: None,
        fields,
    })
}

/// A bright non-cropland surround holding a two-cell cropland block. The
/// left cell is two fields with no line between them: an Ag part at
/// luminance about 170 and a non-Ag part at about 90. The right cell is a
/// plain Ag field.
pub fn two_tone_scene(seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (320, 260);
    let (cx0, cy0, cx1, cy1) = (60, 70, 260, 190);
    let b = 2;
    let split = 142;
    let divider = 182;
    let ag = ag_rgb(166);
    let nonag = nonag_rgb(92);
    let plain = ag_rgb(150);

    let mut image = RgbImage::filled(w, h, SURROUND_RGB).expect("fixed size");
    let mut prob = vec![0.0f64; w * h];
    let cropland = BinaryMask::from_fn(w, h, |x, y| (cx0..cx1).contains(&x) && (cy0..cy1).contains(&y));
    for y in cy0..cy1 {
        for x in cx0..cx1 {
            let line = x < cx0 + b || x >= cx1 - b || y < cy0 + b || y >= cy1 - b || (divider..divider + b).contains(&x);
            let px = if line {
                prob[y * w + x] = 1.0;
                BOUNDARY_RGB
            } else if x < split {
                ag_pixel(&mut rng, ag, 6)
            } else if x < divider {
                nonag_pixel(&mut rng, nonag, 6)
            } else {
                ag_pixel(&mut rng, plain, 6)
            };
            image.set(x, y, px);
        }
    }
    let (iy, ih) = (cy0 + b, cy1 - cy0 - 2 * b);
    let fields = vec![
        rect_field(cx0 + b, iy, split - cx0 - b, ih, 1, Label::Ag),
        rect_field(split, iy, divider - split, ih, 2, Label::NonAg),
        rect_field(divider + b, iy, cx1 - b - divider - b, ih, 3, Label::Ag),
    ];
    Scene {
        image,
        edge_map: EdgeMap::new(w, h, prob).expect("fixed size"),
        cropland: Some(cropland),
        fields,
    }
}

/// An Ag field and a non-Ag pocket whose shared boundary has a gap, so
/// they extract as one dumbbell-like parcel. The gap carries
/// [`FAINT_PROB`] in the edge map.
pub fn dumbbell_scene(seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = 2;
    let (aw, pw, fh) = (90, 60, 90);
    let (w, h) = (b + aw + b + pw + b, b + fh + b);
    let sep = b + aw;
    let gap = (b + 37)..(b + 53);
    let ag = ag_rgb(160);
    let nonag = nonag_rgb(100);

    let mut image = RgbImage::filled(w, h, BOUNDARY_RGB).expect("fixed size");
    let mut prob = vec![1.0f64; w * h];
    for y in b..b + fh {
        for x in b..w - b {
            let in_sep = (sep..sep + b).contains(&x);
            if in_sep && !gap.contains(&y) {
                continue;
            }
            let px = if x < sep + b {
                ag_pixel(&mut rng, ag, 6)
            } else {
                nonag_pixel(&mut rng, nonag, 40)
            };
            image.set(x, y, px);
            prob[y * w + x] = if in_sep { FAINT_PROB } else { 0.0 };
        }
    }
    let fields = vec![
        rect_field(b, b, aw, fh, 1, Label::Ag),
        rect_field(sep + b, b, pw, fh, 2, Label::NonAg),
    ];
    Scene {
        image,
        edge_map: EdgeMap::new(w, h, prob).expect("fixed size"),
        cropland: None,
        fields,
    }
}

/// A parcel for the min-cut splitter with the edge map it should be cut
/// against and the number of pieces it should end up in.
#[derive(Clone, Debug)]
pub struct SplitFixture {
    pub name: &'static str,
    pub parcel: Parcel,
    pub edges: EdgeMap<f64>,
    pub expected_pieces: usize,
}

fn split_fixture(name: &'static str, w: usize, h: usize, lobes: &[(usize, usize, usize, usize)], necks: &[(usize, usize, usize, usize)], expected: usize) -> SplitFixture {
    let inside = |r: &(usize, usize, usize, usize), x: usize, y: usize| (r.0..r.2).contains(&x) && (r.1..r.3).contains(&y);
    let mask = BinaryMask::from_fn(w, h, |x, y| {
        lobes.iter().any(|r| inside(r, x, y)) || necks.iter().any(|r| inside(r, x, y))
    });
    let prob = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if necks.iter().any(|r| inside(r, x, y)) {
                FAINT_PROB
            } else if mask.get(x, y) {
                0.0
            } else {
                1.0
            }
        })
        .collect();
    SplitFixture {
        name,
        parcel: Parcel::from_mask(&mask, (0, 0), ParcelId::root(1), Stage::Extracted).expect("fixture is one piece"),
        edges: EdgeMap::new(w, h, prob).expect("fixture dims"),
        expected_pieces: expected,
    }
}

/// Two 60x60 lobes joined through a 16-pixel window in a 2-pixel gap.
pub fn dumbbell_fixture() -> SplitFixture {
    split_fixture("dumbbell", 130, 68, &[(4, 4, 64, 64), (66, 4, 126, 64)], &[(64, 26, 66, 42)], 2)
}

/// Three lobes in an L, joined by two windows.
pub fn three_lobe_fixture() -> SplitFixture {
    split_fixture(
        "three_lobe",
        130,
        130,
        &[(4, 4, 64, 64), (66, 4, 126, 64), (66, 66, 126, 126)],
        &[(64, 26, 66, 42), (88, 64, 104, 66)],
        3,
    )
}

/// A plain 100x60 rectangle.
pub fn convex_fixture() -> SplitFixture {
    split_fixture("convex", 108, 68, &[(4, 4, 104, 64)], &[], 1)
}

/// Shapes for the shape filter at default thresholds, each with the rule
/// expected to drop it (`None` for the keeper).
pub fn filter_fixtures() -> Vec<(&'static str, Parcel, crate::filter::Rule)> {
    use crate::filter::Rule;
    let mk = |m: BinaryMask| Parcel::from_mask(&m, (10, 10), ParcelId::root(1), Stage::Extracted).expect("fixture is one piece");
    let dot = BinaryMask::from_fn(5, 5, |x, y| (x as i32 - 2).pow(2) + (y as i32 - 2).pow(2) <= 5);
    // Two 6-pixel-thick arms meeting at the bottom.
    let v = BinaryMask::from_fn(64, 60, |x, y| {
        let (x, y) = (x as f64, y as f64);
        let left = (x - y * 0.5).abs() < 3.5;
        let right = (x - (63.0 - y * 0.5)).abs() < 3.5;
        (left || right) && y < 60.0
    });
    // Any slope would widen its hull enough to trip the convexity rule.
    let snake = BinaryMask::full(100, 2);
    let strip = BinaryMask::full(150, 12);
    let square = BinaryMask::full(60, 60);
    vec![
        ("dot", mk(dot), Rule::R1Small),
        ("v_shape", mk(v), Rule::R2Nonconvex),
        ("snake", mk(snake), Rule::R3ElongatedNoise),
        ("strip", mk(strip), Rule::R4ThinStrip),
        ("square", mk(square), Rule::None),
    ]
}

/// One training crop: an RGBA image whose opaque pixels are the field.
pub fn training_crop(label: Label, rng: &mut ChaCha8Rng) -> image::RgbaImage {
    let (w, h) = (rng.gen_range(40..=80u32), rng.gen_range(40..=80u32));
    let ellipse = rng.gen_bool(0.5);
    let ag_base = ag_rgb(rng.gen_range(130..=200));
    let ag_jitter = rng.gen_range(0..=12u8);
    let nonag_base = nonag_rgb(rng.gen_range(80..=120));
    let amp = rng.gen_range(4..=45u8);
    let (cx, cy) = (w as f64 / 2.0 - 0.5, h as f64 / 2.0 - 0.5);
    let (rx, ry) = (w as f64 / 2.0 - 1.0, h as f64 / 2.0 - 1.0);
    let mut img = image::RgbaImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
            let inside = if ellipse {
                dx * dx + dy * dy <= 1.0
            } else {
                x >= 1 && y >= 1 && x + 1 < w && y + 1 < h
            };
            let rgb = match label {
                Label::Ag => ag_pixel(rng, ag_base, ag_jitter),
                Label::NonAg => nonag_pixel(rng, nonag_base, amp),
            };
            img.put_pixel(x, y, image::Rgba([rgb[0], rgb[1], rgb[2], if inside { 255 } else { 0 }]));
        }
    }
    img
}

/// Writes `n` crops (alternating Ag and non-Ag) and `manifest.csv` into
/// `dir`; returns the manifest path.
pub fn write_training_set(dir: &Path, n: usize, seed: u64) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wtr = String::from("id,label\n");
    for k in 0..n {
        let label = if k % 2 == 0 { Label::Ag } else { Label::NonAg };
        let id = format!("crop{k:04}");
        let path = dir.join(format!("{id}.png"));
        training_crop(label, &mut rng).save(&path).map_err(|source| Error::Image {
            path: path.clone(),
            source,
        })?;
        wtr.push_str(&format!("{id},{}\n", label.as_str()));
    }
    let manifest = dir.join("manifest.csv");
    std::fs::write(&manifest, wtr).map_err(|e| Error::io(&manifest, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{verdict, ShapeThresholds};

    #[test]
    fn grid_fields_have_the_expected_area() {
        let s = grid_scene(&GridSpec::default()).unwrap();
        assert_eq!((s.width(), s.height()), (122, 122));
        assert_eq!(s.fields.len(), 9);
        for f in &s.fields {
            assert_eq!(f.parcel.area(), 38 * 38);
            assert_eq!(f.label, Label::Ag);
        }
    }

    #[test]
    fn grid_is_deterministic_and_flat_without_jitter() {
        let spec = GridSpec {
            jitter: 0,
            faint_fraction: 0.3,
            nonag_pockets: 2,
            seed: 9,
            ..Default::default()
        };
        let a = grid_scene(&spec).unwrap();
        let b = grid_scene(&spec).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.edge_map.prob(), b.edge_map.prob());
        assert_eq!(a.fields.iter().filter(|f| f.label == Label::NonAg).count(), 2);
        for f in a.fields.iter().filter(|f| f.label == Label::Ag) {
            let mut px = f.parcel.pixels().map(|(x, y)| a.image.get(x, y));
            let first = px.next().unwrap();
            assert!(px.all(|p| p == first));
        }
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            GridSpec { rows: 0, ..Default::default() },
            GridSpec { cell: 4, ..Default::default() },
            GridSpec { nonag_pockets: 10, ..Default::default() },
            GridSpec { faint_fraction: 2.0, ..Default::default() },
        ] {
            assert!(matches!(grid_scene(&spec), Err(Error::Config(_))));
        }
    }

    #[test]
    fn filter_fixtures_fire_their_rules() {
        let t = ShapeThresholds::<f64>::default();
        for (name, p, rule) in filter_fixtures() {
            assert_eq!(verdict(&p, &t).rule_fired, rule, "{name}");
        }
    }

    #[test]
    fn split_fixtures_are_single_parcels() {
        for f in [dumbbell_fixture(), three_lobe_fixture(), convex_fixture()] {
            assert!(f.parcel.area() > 3000, "{}", f.name);
        }
    }

    #[test]
    fn two_tone_luminances() {
        let s = two_tone_scene(1);
        let gray = crate::raster::to_gray(&s.image);
        let mean = |f: &Field| {
            let (n, sum) = f.parcel.pixels().fold((0u32, 0u32), |(n, s), (x, y)| (n + 1, s + gray.get(x, y) as u32));
            sum as f64 / n as f64
        };
        assert!((mean(&s.fields[0]) - 170.0).abs() < 4.0);
        assert!((mean(&s.fields[1]) - 90.0).abs() < 4.0);
    }
}

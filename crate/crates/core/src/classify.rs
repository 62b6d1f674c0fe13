//! Ag / non-Ag classification of parcels.
//!
//! Each parcel becomes a 311-value feature vector (shape, colour histogram,
//! LBP texture histogram) that a random forest of Gini trees labels.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{area, aspect_ratio, convex_hull, label_components4, perimeter, Parcel, ParcelId, Stage};
use crate::raster::{to_gray, BinaryMask, RgbImage};

pub const SHAPE_LEN: usize = 7;
pub const COLOR_BINS: usize = 16;
pub const COLOR_LEN: usize = 3 * COLOR_BINS;
pub const TEXTURE_LEN: usize = 256;
pub const FEATURE_LEN: usize = SHAPE_LEN + COLOR_LEN + TEXTURE_LEN;

/// LBP sampling offsets: 8 neighbours at radius 3, rounded to pixels, bit
/// `k` for offset `k`.
pub const LBP_OFFSETS: [(i64, i64); 8] = [(3, 0), (2, -2), (0, -3), (-2, -2), (-3, 0), (-2, 2), (0, 3), (2, 2)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Ag,
    NonAg,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::Ag => 0,
            Label::NonAg => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Label::Ag
        } else {
            Label::NonAg
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Ag => "ag",
            Label::NonAg => "non_ag",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ag" => Ok(Label::Ag),
            "non_ag" | "nonag" | "non-ag" => Ok(Label::NonAg),
            other => Err(Error::input(format!("unknown label {other:?} (expected ag or non_ag)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn shape(&self) -> &[f64] {
        &self.0[..SHAPE_LEN]
    }

    pub fn color(&self) -> &[f64] {
        &self.0[SHAPE_LEN..SHAPE_LEN + COLOR_LEN]
    }

    pub fn texture(&self) -> &[f64] {
        &self.0[SHAPE_LEN + COLOR_LEN..]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledParcel {
    pub features: FeatureVector,
    pub label: Label,
}

/// Shape, colour and texture features of a parcel.
///
/// Errors when the parcel leaves the image or has no pixel whose eight LBP
/// samples all fall inside it.
pub fn extract_features(p: &Parcel, img: &RgbImage) -> Result<FeatureVector> {
    let (x0, y0, x1, y1) = p.bbox();
    if x1 > img.width() || y1 > img.height() {
        return Err(Error::input(format!("parcel {} lies outside the image", p.id)));
    }
    let mut v = Vec::with_capacity(FEATURE_LEN);

    let per = perimeter::<f64>(p);
    let a = area(p) as f64;
    let hull = convex_hull::<f64>(p);
    v.extend_from_slice(&[per, a, hull.perimeter, hull.area, hull.area / a, a / per, aspect_ratio::<f64>(p)]);

    let mut color = [[0usize; COLOR_BINS]; 3];
    for (x, y) in p.pixels() {
        let px = img.get(x, y);
        for c in 0..3 {
            color[c][(px[c] >> 4) as usize] += 1;
        }
    }
    let n = a;
    for ch in &color {
        v.extend(ch.iter().map(|&k| k as f64 / n));
    }

    let mask = p.mask();
    let (w, h) = (mask.width(), mask.height());
    let mut crop = RgbImage::filled(w, h, [0, 0, 0])?;
    for y in 0..h {
        for x in 0..w {
            crop.set(x, y, img.get(x + x0, y + y0));
        }
    }
    let gray = to_gray(&crop);
    let mut hist = [0usize; TEXTURE_LEN];
    let mut total = 0usize;
    for (x, y) in mask.iter_set() {
        let (xi, yi) = (x as i64, y as i64);
        if !LBP_OFFSETS.iter().all(|&(dx, dy)| mask.get_i(xi + dx, yi + dy)) {
            continue;
        }
        let centre = gray.get(x, y);
        let mut code = 0usize;
        for (k, &(dx, dy)) in LBP_OFFSETS.iter().enumerate() {
            if gray.get((xi + dx) as usize, (yi + dy) as usize) >= centre {
                code |= 1 << k;
            }
        }
        hist[code] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::input(format!(
            "parcel {} is too small for texture features (no interior pixels)",
            p.id
        )));
    }
    v.extend(hist.iter().map(|&k| k as f64 / total as f64));
    Ok(FeatureVector(v))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features tried per node; `None` means `ceil(sqrt(n_features))`.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 12,
            mtry: None,
            bootstrap: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feat: usize,
        thresh: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: Label,
        votes: [usize; 2],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Follows `x <= thresh` to the left child.
    pub fn predict(&self, x: &[f64]) -> Label {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { feat, thresh, left, right } => {
                    i = if x[*feat] <= *thresh { *left } else { *right };
                }
                Node::Leaf { leaf, .. } => return *leaf,
            }
        }
    }
}

pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub version: u32,
    pub seed: u64,
    pub params: ForestParams,
    pub n_features: usize,
    pub class_labels: [Label; 2],
    /// Out-of-bag accuracy; `None` without bootstrap or with no OOB votes.
    pub oob_accuracy: Option<f64>,
    pub trees: Vec<Tree>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub confidence: f64,
}

fn majority(votes: [usize; 2]) -> Label {
    if votes[0] >= votes[1] {
        Label::Ag
    } else {
        Label::NonAg
    }
}

fn gini(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p, q) = (c[0] as f64 / n, c[1] as f64 / n);
    1.0 - p * p - q * q
}

/// Best midpoint split of `idx` on feature `f`: (weighted child impurity,
/// threshold). `None` when the feature is constant over `idx`.
fn best_split_on(xs: &[&[f64]], ys: &[Label], idx: &[usize], f: usize) -> Option<(f64, f64)> {
    let mut order: Vec<usize> = idx.to_vec();
    order.sort_by(|&a, &b| xs[a][f].total_cmp(&xs[b][f]).then(a.cmp(&b)));
    let mut total = [0usize; 2];
    for &i in &order {
        total[ys[i].index()] += 1;
    }
    let n = order.len() as f64;
    let mut left = [0usize; 2];
    let mut best: Option<(f64, f64)> = None;
    for k in 0..order.len() - 1 {
        left[ys[order[k]].index()] += 1;
        let (va, vb) = (xs[order[k]][f], xs[order[k + 1]][f]);
        if va == vb {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        let nl = (k + 1) as f64;
        let score = (nl * gini(left) + (n - nl) * gini(right)) / n;
        if best.is_none_or(|(s, _)| score < s) {
            let mut t = va + (vb - va) / 2.0;
            if t >= vb {
                t = va;
            }
            best = Some((score, t));
        }
    }
    best
}

fn grow_tree(xs: &[&[f64]], ys: &[Label], idx: Vec<usize>, params: &ForestParams, mtry: usize, rng: &mut ChaCha8Rng) -> Tree {
    let n_features = xs[0].len();
    let mut nodes: Vec<Node> = Vec::new();
    // (node slot, samples, depth)
    let mut stack = vec![(0usize, idx, 0usize)];
    nodes.push(Node::Leaf { leaf: Label::Ag, votes: [0, 0] });
    while let Some((slot, samples, depth)) = stack.pop() {
        let mut votes = [0usize; 2];
        for &i in &samples {
            votes[ys[i].index()] += 1;
        }
        let pure = votes[0] == 0 || votes[1] == 0;
        let mut chosen: Option<(usize, f64)> = None;
        if !pure && depth < params.max_depth && samples.len() >= 2 {
            let order = sample(rng, n_features, n_features).into_vec();
            let mut best: Option<(f64, usize, f64)> = None;
            for (tried, &f) in order.iter().enumerate() {
                if tried >= mtry && best.is_some() {
                    break;
                }
                if let Some((s, t)) = best_split_on(xs, ys, &samples, f) {
                    if best.is_none_or(|(bs, _, _)| s < bs) {
                        best = Some((s, f, t));
                    }
                }
            }
            chosen = best.map(|(_, f, t)| (f, t));
        }
        match chosen {
            None => nodes[slot] = Node::Leaf { leaf: majority(votes), votes },
            Some((feat, thresh)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&i| xs[i][feat] <= thresh);
                let left = nodes.len();
                nodes.push(Node::Leaf { leaf: Label::Ag, votes: [0, 0] });
                let right = nodes.len();
                nodes.push(Node::Leaf { leaf: Label::Ag, votes: [0, 0] });
                nodes[slot] = Node::Split { feat, thresh, left, right };
                stack.push((right, r, depth + 1));
                stack.push((left, l, depth + 1));
            }
        }
    }
    Tree { nodes }
}

/// Trains a random forest. Tree `t` draws from its own ChaCha stream of
/// `seed`, so results depend only on the data, parameters and seed.
pub fn train_forest(data: &[LabeledParcel], params: &ForestParams, seed: u64) -> Result<ForestModel> {
    if data.len() < 2 {
        return Err(Error::model("training needs at least 2 samples"));
    }
    let n_features = data[0].features.0.len();
    if n_features == 0 || data.iter().any(|d| d.features.0.len() != n_features) {
        return Err(Error::model("feature vectors differ in length"));
    }
    let ys: Vec<Label> = data.iter().map(|d| d.label).collect();
    if !ys.contains(&Label::Ag) || !ys.contains(&Label::NonAg) {
        return Err(Error::model("training data must contain both ag and non_ag samples"));
    }
    if params.n_trees == 0 || params.max_depth == 0 {
        return Err(Error::config("n_trees and max_depth must be at least 1"));
    }
    let mtry = params
        .mtry
        .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
        .clamp(1, n_features);
    let xs: Vec<&[f64]> = data.iter().map(|d| d.features.0.as_slice()).collect();
    let n = data.len();
    let mut oob_votes = vec![[0usize; 2]; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    for t in 0..params.n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let idx: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut in_bag = vec![false; n];
        for &i in &idx {
            in_bag[i] = true;
        }
        let tree = grow_tree(&xs, &ys, idx, params, mtry, &mut rng);
        if params.bootstrap {
            for i in (0..n).filter(|&i| !in_bag[i]) {
                oob_votes[i][tree.predict(xs[i]).index()] += 1;
            }
        }
        trees.push(tree);
    }
    let scored: Vec<(usize, &[usize; 2])> = oob_votes
        .iter()
        .enumerate()
        .filter(|(_, v)| v[0] + v[1] > 0)
        .collect();
    let oob_accuracy = (!scored.is_empty()).then(|| {
        let hits = scored.iter().filter(|(i, v)| majority(**v) == ys[*i]).count();
        hits as f64 / scored.len() as f64
    });
    Ok(ForestModel {
        version: MODEL_VERSION,
        seed,
        params: params.clone(),
        n_features,
        class_labels: [Label::Ag, Label::NonAg],
        oob_accuracy,
        trees,
    })
}

impl ForestModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string(self)?;
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::model(format!("cannot read model {}: {e}", path.display())))?;
        let m: ForestModel =
            serde_json::from_str(&s).map_err(|e| Error::model(format!("invalid model {}: {e}", path.display())))?;
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<()> {
        if self.version != MODEL_VERSION {
            return Err(Error::model(format!("unsupported model version {}", self.version)));
        }
        if self.trees.is_empty() {
            return Err(Error::model("model has no trees"));
        }
        for t in &self.trees {
            for node in &t.nodes {
                if let Node::Split { feat, left, right, .. } = node {
                    if *feat >= self.n_features || *left >= t.nodes.len() || *right >= t.nodes.len() {
                        return Err(Error::model("model node references an invalid index"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Majority vote over the trees; ties go to Ag.
pub fn predict(model: &ForestModel, f: &FeatureVector) -> Result<Prediction> {
    if f.0.len() != model.n_features {
        return Err(Error::input(format!(
            "feature vector has {} values, model expects {}",
            f.0.len(),
            model.n_features
        )));
    }
    let mut votes = [0usize; 2];
    for t in &model.trees {
        votes[t.predict(&f.0).index()] += 1;
    }
    let label = majority(votes);
    Ok(Prediction {
        label,
        confidence: votes[label.index()] as f64 / model.trees.len() as f64,
    })
}

/// Rows are actual classes, columns predicted, both in `[Ag, NonAg]` order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion(pub [[usize; 2]; 2]);

impl Confusion {
    pub fn add(&mut self, actual: Label, predicted: Label) {
        self.0[actual.index()][predicted.index()] += 1;
    }

    pub fn merge(&mut self, o: &Confusion) {
        for r in 0..2 {
            for c in 0..2 {
                self.0[r][c] += o.0[r][c];
            }
        }
    }

    pub fn total(&self) -> usize {
        self.0.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            return 0.0;
        }
        (self.0[0][0] + self.0[1][1]) as f64 / t as f64
    }

    pub fn f1(&self, class: Label) -> f64 {
        let c = class.index();
        let o = 1 - c;
        let tp = self.0[c][c] as f64;
        let fp = self.0[o][c] as f64;
        let fneg = self.0[c][o] as f64;
        let d = 2.0 * tp + fp + fneg;
        if d == 0.0 {
            0.0
        } else {
            2.0 * tp / d
        }
    }

    pub fn macro_f1(&self) -> f64 {
        (self.f1(Label::Ag) + self.f1(Label::NonAg)) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<Confusion>,
    pub total: Confusion,
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Stratified k-fold cross-validation: each class is shuffled with `seed`
/// and dealt round-robin into the folds.
pub fn cross_validate(data: &[LabeledParcel], folds: usize, params: &ForestParams, seed: u64) -> Result<CvReport> {
    if folds < 2 {
        return Err(Error::config("cross-validation needs at least 2 folds"));
    }
    if data.len() < folds {
        return Err(Error::model(format!("{} samples cannot fill {folds} folds", data.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; data.len()];
    for class in [Label::Ag, Label::NonAg] {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data[i].label == class).collect();
        for k in (1..idx.len()).rev() {
            let j = rng.gen_range(0..=k);
            idx.swap(k, j);
        }
        for (r, &i) in idx.iter().enumerate() {
            fold_of[i] = r % folds;
        }
    }
    let mut per_fold = Vec::with_capacity(folds);
    let mut total = Confusion::default();
    for f in 0..folds {
        let train: Vec<LabeledParcel> = (0..data.len()).filter(|&i| fold_of[i] != f).map(|i| data[i].clone()).collect();
        for class in [Label::Ag, Label::NonAg] {
            if !train.iter().any(|d| d.label == class) {
                return Err(Error::model(format!("class {class} is absent from training fold {f}")));
            }
        }
        let model = train_forest(&train, params, seed)?;
        let mut cm = Confusion::default();
        for i in (0..data.len()).filter(|&i| fold_of[i] == f) {
            cm.add(data[i].label, predict(&model, &data[i].features)?.label);
        }
        total.merge(&cm);
        per_fold.push(cm);
    }
    Ok(CvReport {
        folds: per_fold,
        accuracy: total.accuracy(),
        macro_f1: total.macro_f1(),
        total,
    })
}

/// Loads a crop for training: RGB from any PNG, with the parcel given by
/// alpha `>= 128` when present and the whole image otherwise. The largest
/// 4-connected piece of the alpha mask is used.
pub fn load_training_crop(path: &Path) -> Result<(RgbImage, Parcel)> {
    let dynimg = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        source: e,
    })?;
    let has_alpha = dynimg.color().has_alpha();
    let rgba = dynimg.to_rgba8();
    let (w, h) = (rgba.width() as usize, rgba.height() as usize);
    let mut data = Vec::with_capacity(w * h * 3);
    for px in rgba.pixels() {
        data.extend_from_slice(&px.0[..3]);
    }
    let img = RgbImage::new(w, h, data)?;
    let mask = if has_alpha {
        BinaryMask::from_fn(w, h, |x, y| rgba.get_pixel(x as u32, y as u32).0[3] >= 128)
    } else {
        BinaryMask::full(w, h)
    };
    let (labels, n) = label_components4(&mask);
    if n == 0 {
        return Err(Error::input(format!("{} has no parcel pixels", path.display())));
    }
    let mut sizes = vec![0usize; n as usize + 1];
    for &l in &labels {
        sizes[l as usize] += 1;
    }
    let biggest = (1..=n as usize).max_by_key(|&l| (sizes[l], std::cmp::Reverse(l))).expect("n >= 1");
    let piece = BinaryMask::from_fn(w, h, |x, y| labels[y * w + x] as usize == biggest);
    let parcel = Parcel::from_mask(&piece, (0, 0), ParcelId::root(1), Stage::Extracted)?;
    Ok((img, parcel))
}

/// Reads a training manifest: CSV with `id,label` columns; the crop for row
/// `id` is `<dir>/<id>.png` where `dir` is the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Vec<(String, LabeledParcel)>> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::input(format!("cannot read manifest {}: {e}", path.display())),
        _ => Error::Csv(e),
    })?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let (id, label) = match (row.get(0), row.get(1)) {
            (Some(i), Some(l)) => (i.trim().to_string(), l.parse::<Label>()?),
            _ => return Err(Error::input(format!("manifest row {:?} needs id and label", row))),
        };
        let (img, parcel) = load_training_crop(&dir.join(format!("{id}.png")))?;
        let features = extract_features(&parcel, &img)?;
        out.push((id, LabeledParcel { features, label }));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_parcel(n: usize, at: (usize, usize)) -> Parcel {
        Parcel::from_mask(&BinaryMask::full(n, n), at, ParcelId::root(1), Stage::Extracted).unwrap()
    }

    fn sample(x: &[f64], label: Label) -> LabeledParcel {
        LabeledParcel {
            features: FeatureVector(x.to_vec()),
            label,
        }
    }

    #[test]
    fn uniform_patch_lbp_is_all_ones() {
        let img = RgbImage::filled(30, 30, [128, 128, 128]).unwrap();
        let f = extract_features(&square_parcel(20, (5, 5)), &img).unwrap();
        assert_eq!(f.values().len(), FEATURE_LEN);
        assert_eq!(f.texture()[255], 1.0);
        assert_eq!(f.texture().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn red_parcel_colour_histogram() {
        let img = RgbImage::filled(30, 30, [255, 0, 0]).unwrap();
        let f = extract_features(&square_parcel(12, (2, 3)), &img).unwrap();
        let c = f.color();
        assert_eq!(c[15], 1.0);
        assert_eq!(c[16], 1.0);
        assert_eq!(c[32], 1.0);
        for ch in c.chunks(COLOR_BINS) {
            assert!((ch.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn too_small_for_texture() {
        let img = RgbImage::filled(10, 10, [1, 2, 3]).unwrap();
        assert!(matches!(
            extract_features(&square_parcel(6, (1, 1)), &img),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn single_class_is_rejected() {
        let d = vec![sample(&[0.0], Label::Ag), sample(&[1.0], Label::Ag)];
        assert!(matches!(
            train_forest(&d, &ForestParams::default(), 1),
            Err(Error::Model(_))
        ));
    }

    #[test]
    fn stump_finds_the_gap() {
        let mut d = Vec::new();
        for i in 0..10 {
            d.push(sample(&[i as f64], Label::Ag));
            d.push(sample(&[20.0 + i as f64], Label::NonAg));
        }
        let p = ForestParams {
            n_trees: 1,
            max_depth: 1,
            mtry: None,
            bootstrap: false,
        };
        let m = train_forest(&d, &p, 3).unwrap();
        match &m.trees[0].nodes[0] {
            Node::Split { feat, thresh, .. } => {
                assert_eq!(*feat, 0);
                assert!(*thresh >= 9.0 && *thresh < 20.0);
            }
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn ties_go_to_ag() {
        let leaf = |l| Tree {
            nodes: vec![Node::Leaf { leaf: l, votes: [1, 1] }],
        };
        let m = ForestModel {
            version: MODEL_VERSION,
            seed: 0,
            params: ForestParams::default(),
            n_features: 1,
            class_labels: [Label::Ag, Label::NonAg],
            oob_accuracy: None,
            trees: vec![leaf(Label::Ag), leaf(Label::NonAg)],
        };
        let p = predict(&m, &FeatureVector(vec![0.0])).unwrap();
        assert_eq!(p.label, Label::Ag);
        assert_eq!(p.confidence, 0.5);
        assert!(predict(&m, &FeatureVector(vec![0.0, 1.0])).is_err());
    }

    #[test]
    fn labels_parse() {
        assert_eq!("AG".parse::<Label>().unwrap(), Label::Ag);
        assert_eq!("non-ag".parse::<Label>().unwrap(), Label::NonAg);
        assert!("field".parse::<Label>().is_err());
    }

    #[test]
    fn confusion_scores() {
        let mut c = Confusion::default();
        c.add(Label::Ag, Label::Ag);
        c.add(Label::Ag, Label::NonAg);
        c.add(Label::NonAg, Label::NonAg);
        assert_eq!(c.total(), 3);
        assert!((c.accuracy() - 2.0 / 3.0).abs() < 1e-12);
        assert!((c.f1(Label::Ag) - 2.0 / 3.0).abs() < 1e-12);
        assert!((c.f1(Label::NonAg) - 2.0 / 3.0).abs() < 1e-12);
    }
}

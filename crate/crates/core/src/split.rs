//! Splitting under-segmented parcels.
//!
//! Min-cut splitting looks for high-curvature contour points, pairs each
//! with its nearest non-neighbouring contour point, and cuts along the
//! strongest admissible chord. Localized recut reruns Canny inside a parcel
//! with thresholds derived from that parcel's own mean intensity.

use serde::{Deserialize, Serialize};

use crate::edges::{canny, local_hysteresis_params, EdgeMap};
use crate::error::{Error, Result};
use crate::extract::{clean_edges, regions_to_parcels, ExtractionParams};
use crate::filter::{rule1_small, rule3_elongated_noise, ShapeThresholds};
use crate::geometry::{
    bresenham, find_neighbourhood_max, perimeter, segment_inside, turn_angle, ChainLengths,
    DirectionalDistanceField, Parcel, ParcelId, Point, Stage,
};
use crate::raster::{BinaryMask, GrayImage};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitParams<T> {
    pub curvature_window: usize,
    /// Degrees.
    pub curvature_min_angle: T,
    pub max_cut_euclid: T,
    pub min_cut_contour: T,
    pub beta: T,
    pub min_sub_contour: T,
    pub max_recursion_depth: usize,
    /// Admissible cuts weaker than this are not applied.
    pub min_strength: T,
}

impl<T: Scalar> Default for SplitParams<T> {
    fn default() -> Self {
        Self {
            curvature_window: 5,
            curvature_min_angle: T::lit(60.0),
            max_cut_euclid: T::lit(25.0),
            min_cut_contour: T::lit(80.0),
            beta: T::lit(0.5),
            min_sub_contour: T::lit(60.0),
            max_recursion_depth: 8,
            min_strength: T::lit(0.15),
        }
    }
}

impl<T: Scalar> SplitParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= T::zero() && self.beta <= T::one()) {
            return Err(Error::config("beta must be in [0, 1]"));
        }
        if !(self.max_cut_euclid > T::zero()) {
            return Err(Error::config("max_cut_euclid must be positive"));
        }
        if !(self.min_cut_contour > self.max_cut_euclid) {
            return Err(Error::config("min_cut_contour must exceed max_cut_euclid"));
        }
        if self.max_recursion_depth == 0 {
            return Err(Error::config("max_recursion_depth must be at least 1"));
        }
        if self.curvature_window == 0 {
            return Err(Error::config("curvature_window must be at least 1"));
        }
        Ok(())
    }
}

/// A chord between contour indices `i < j`.
///
/// `strength` and `admissible` are zero/false until [`score_cut`] fills them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cut<T> {
    pub i: usize,
    pub j: usize,
    pub a: Point,
    pub b: Point,
    pub euclid: T,
    pub along_contour: T,
    pub strength: T,
    pub admissible: bool,
}

/// Contour indices whose turn angle reaches the threshold and is maximal
/// within `curvature_window` indices either side.
pub fn find_cut_points<T: Scalar>(p: &Parcel, params: &SplitParams<T>) -> Vec<usize> {
    let c = p.contour();
    let w = params.curvature_window;
    if c.len() <= 2 * w {
        return Vec::new();
    }
    let angles: Vec<T> = (0..c.len()).map(|i| turn_angle(c, i, w)).collect();
    find_neighbourhood_max(&angles, w)
        .into_iter()
        .filter(|&i| angles[i] >= params.curvature_min_angle)
        .collect()
}

/// Nearest contour point to cut point `c` whose along-contour distance
/// exceeds the straight-line distance and reaches `min_cut_contour`.
/// Candidates at `max_cut_euclid` or beyond do not qualify. Ties go to the
/// smaller index.
pub fn pair_cut_point<T: Scalar>(p: &Parcel, c: usize, params: &SplitParams<T>) -> Option<Cut<T>> {
    pair_with(p, c, params, &ChainLengths::new(p.contour()))
}

fn pair_with<T: Scalar>(p: &Parcel, c: usize, params: &SplitParams<T>, chain: &ChainLengths<T>) -> Option<Cut<T>> {
    let pts = p.contour().points();
    let pc = pts[c];
    let mut best: Option<(T, usize)> = None;
    for (j, &q) in pts.iter().enumerate() {
        if j == c || q == pc {
            continue;
        }
        let e: T = pc.dist(q);
        if e >= params.max_cut_euclid {
            continue;
        }
        let d = chain.between(c, j);
        if d > e && d >= params.min_cut_contour && best.is_none_or(|(be, _)| e < be) {
            best = Some((e, j));
        }
    }
    best.map(|(euclid, j)| {
        let (i, j) = (c.min(j), c.max(j));
        Cut {
            i,
            j,
            a: pts[i],
            b: pts[j],
            euclid,
            along_contour: chain.between(i, j),
            strength: T::zero(),
            admissible: false,
        }
    })
}

/// Paired cut points with `euclid < max_cut_euclid` and
/// `along_contour > min_cut_contour`, deduplicated, ordered by `(i, j)`.
pub fn candidate_cuts<T: Scalar>(p: &Parcel, params: &SplitParams<T>) -> Vec<Cut<T>> {
    let chain = ChainLengths::new(p.contour());
    let mut cuts: Vec<Cut<T>> = find_cut_points(p, params)
        .into_iter()
        .filter_map(|c| pair_with(p, c, params, &chain))
        .filter(|k| k.euclid < params.max_cut_euclid && k.along_contour > params.min_cut_contour)
        .collect();
    cuts.sort_by_key(|k| (k.i, k.j));
    cuts.dedup_by_key(|k| (k.i, k.j));
    cuts
}

/// Mean edge probability over the chord's pixels.
pub fn edge_support<T: Scalar>(edges: &EdgeMap<T>, a: Point, b: Point) -> T {
    let line = bresenham(a, b);
    let sum = line.iter().fold(T::zero(), |acc, q| {
        let inside = q.x >= 0 && q.y >= 0 && (q.x as usize) < edges.width() && (q.y as usize) < edges.height();
        if inside {
            acc + edges.get(q.x as usize, q.y as usize)
        } else {
            acc
        }
    });
    sum / T::count(line.len())
}

/// `beta * 1 / (1 + chamfer) + (1 - beta) * edge support`.
pub fn cut_strength<T: Scalar>(
    cut: &Cut<T>,
    edges: &EdgeMap<T>,
    dcd: &DirectionalDistanceField<T>,
    params: &SplitParams<T>,
) -> Result<T> {
    let d = dcd.query(cut.a, cut.b)?;
    let c_dist = if d.is_infinite() { T::zero() } else { T::one() / (T::one() + d) };
    let c_prob = edge_support(edges, cut.a, cut.b);
    Ok(params.beta * c_dist + (T::one() - params.beta) * c_prob)
}

/// Chord inside the parcel and both halves, each closed by the chord, at
/// least `min_sub_contour` long.
pub fn admissible<T: Scalar>(p: &Parcel, cut: &Cut<T>, params: &SplitParams<T>) -> bool {
    if !segment_inside(p, cut.a, cut.b) {
        return false;
    }
    let chain = ChainLengths::<T>::new(p.contour());
    let first = chain.forward(cut.i, cut.j) + cut.euclid;
    let second = chain.forward(cut.j, cut.i) + cut.euclid;
    first >= params.min_sub_contour && second >= params.min_sub_contour
}

pub fn score_cut<T: Scalar>(
    p: &Parcel,
    mut cut: Cut<T>,
    edges: &EdgeMap<T>,
    dcd: &DirectionalDistanceField<T>,
    params: &SplitParams<T>,
) -> Result<Cut<T>> {
    cut.strength = cut_strength(&cut, edges, dcd, params)?;
    cut.admissible = admissible(p, &cut, params);
    Ok(cut)
}

/// What happened at one parcel during min-cut recursion.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutStep<T> {
    pub parcel: ParcelId,
    pub depth: usize,
    pub cut_points: Vec<Point>,
    pub candidates: Vec<Cut<T>>,
    pub chosen: Option<Cut<T>>,
}

/// Splits along a chord; returns the pieces whose contour reaches
/// `min_sub_contour`, or nothing when fewer than two such pieces remain.
fn cut_apart<T: Scalar>(p: &Parcel, cut: &Cut<T>, params: &SplitParams<T>) -> Vec<Parcel> {
    let (ox, oy) = p.origin();
    let mut m = p.mask().clone();
    for q in bresenham(cut.a, cut.b) {
        let (x, y) = (q.x as i64 - ox as i64, q.y as i64 - oy as i64);
        if m.get_i(x, y) {
            m.set(x as usize, y as usize, false);
        }
    }
    let blocked = p.mask().complement();
    let pieces = regions_to_parcels(&m, (ox, oy), &m, 1, &blocked, Stage::SplitMincut, |k| {
        p.id.child(k as u32 + 1)
    });
    let big: Vec<Parcel> = pieces
        .into_iter()
        .filter(|c| perimeter::<T>(c) >= params.min_sub_contour)
        .collect();
    if big.len() < 2 {
        return Vec::new();
    }
    big.into_iter()
        .enumerate()
        .map(|(k, mut c)| {
            c.id = p.id.child(k as u32 + 1);
            c
        })
        .collect()
}

/// Recursive min-cut splitting. Returns the leaves in depth-first order
/// together with a record of every visited parcel.
pub fn split_mincut_traced<T: Scalar>(
    p: &Parcel,
    edges: &EdgeMap<T>,
    dcd: &DirectionalDistanceField<T>,
    params: &SplitParams<T>,
) -> Result<(Vec<Parcel>, Vec<CutStep<T>>)> {
    params.validate()?;
    let mut out = Vec::new();
    let mut trace = Vec::new();
    recurse(p.clone(), 0, edges, dcd, params, &mut out, &mut trace)?;
    Ok((out, trace))
}

pub fn split_mincut<T: Scalar>(
    p: &Parcel,
    edges: &EdgeMap<T>,
    dcd: &DirectionalDistanceField<T>,
    params: &SplitParams<T>,
) -> Result<Vec<Parcel>> {
    split_mincut_traced(p, edges, dcd, params).map(|(v, _)| v)
}

fn recurse<T: Scalar>(
    p: Parcel,
    depth: usize,
    edges: &EdgeMap<T>,
    dcd: &DirectionalDistanceField<T>,
    params: &SplitParams<T>,
    out: &mut Vec<Parcel>,
    trace: &mut Vec<CutStep<T>>,
) -> Result<()> {
    if depth >= params.max_recursion_depth {
        out.push(p);
        return Ok(());
    }
    let cut_points = find_cut_points(&p, params)
        .into_iter()
        .map(|i| p.contour().points()[i])
        .collect();
    let candidates = candidate_cuts(&p, params)
        .into_iter()
        .map(|k| score_cut(&p, k, edges, dcd, params))
        .collect::<Result<Vec<_>>>()?;
    let mut ranked: Vec<&Cut<T>> = candidates
        .iter()
        .filter(|k| k.admissible && k.strength >= params.min_strength)
        .collect();
    ranked.sort_by(|x, y| {
        y.strength
            .partial_cmp(&x.strength)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then((x.i, x.j).cmp(&(y.i, y.j)))
    });
    let mut chosen = None;
    let mut children = Vec::new();
    for k in ranked {
        children = cut_apart(&p, k, params);
        if !children.is_empty() {
            chosen = Some(k.clone());
            break;
        }
    }
    trace.push(CutStep {
        parcel: p.id.clone(),
        depth,
        cut_points,
        candidates: candidates.clone(),
        chosen,
    });
    if children.is_empty() {
        out.push(p);
        return Ok(());
    }
    for c in children {
        recurse(c, depth + 1, edges, dcd, params, out, trace)?;
    }
    Ok(())
}

/// Parameters of the localized recut.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalRecutParams<T> {
    pub k_low: T,
    pub k_high: T,
    pub gaussian_sigma: T,
}

impl<T: Scalar> Default for LocalRecutParams<T> {
    fn default() -> Self {
        Self {
            k_low: T::lit(DEFAULT_K_LOW),
            k_high: T::lit(DEFAULT_K_HIGH),
            gaussian_sigma: T::lit(DEFAULT_SIGMA),
        }
    }
}

pub const DEFAULT_K_LOW: f64 = 0.26;
pub const DEFAULT_K_HIGH: f64 = 0.30;
pub const DEFAULT_SIGMA: f64 = 1.0;

/// Re-detects edges inside one parcel with thresholds scaled by the
/// parcel's mean intensity and re-extracts its regions.
///
/// Pixels outside the parcel are set to its rounded mean so the parcel
/// outline itself produces little gradient. Fragments that trip rule 1 or
/// rule 3, or whose contour is shorter than `sub_polygon_min_contour`, are
/// discarded; the parcel is replaced only if at least two fragments remain.
pub fn split_localized<T: Scalar>(
    p: &Parcel,
    img: &GrayImage,
    extraction: &ExtractionParams<T>,
    t: &ShapeThresholds<T>,
    recut: &LocalRecutParams<T>,
) -> Result<Vec<Parcel>> {
    let (x0, y0, x1, y1) = p.bbox();
    if x1 > img.width() || y1 > img.height() {
        return Err(Error::input(format!("parcel {} lies outside the image", p.id)));
    }
    let mask = p.mask();
    let (w, h) = (mask.width(), mask.height());
    let crop = img.crop(x0, y0, w, h)?;
    let (sum, n) = mask
        .iter_set()
        .fold((0u64, 0u64), |(s, n), (x, y)| (s + crop.get(x, y) as u64, n + 1));
    let fill = ((sum as f64) / (n as f64)).round() as u8;
    let mut local = crop;
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                local.set(x, y, fill);
            }
        }
    }
    let hp = local_hysteresis_params(&local, mask, recut.k_low, recut.k_high, recut.gaussian_sigma)?;
    let edges = canny(&local, &hp);
    let cl = clean_edges(&edges, Some(mask), extraction)?;
    let core = BinaryMask::from_fn(w, h, |x, y| !cl.binary.get(x, y) && !cl.barrier.get(x, y));
    let regions = cl.barrier.complement();
    let blocked = mask.complement();
    let fragments = regions_to_parcels(
        &regions,
        (x0, y0),
        &core,
        extraction.min_component_area,
        &blocked,
        Stage::SplitLcd,
        |_| p.id.clone(),
    );
    let survivors: Vec<Parcel> = fragments
        .into_iter()
        .filter(|f| !rule1_small(f, t) && !rule3_elongated_noise(f, t))
        .filter(|f| perimeter::<T>(f) >= t.sub_polygon_min_contour)
        .collect();
    if survivors.len() < 2 {
        return Ok(vec![p.clone()]);
    }
    Ok(survivors
        .into_iter()
        .enumerate()
        .map(|(k, mut f)| {
            f.id = p.id.child(k as u32 + 1);
            f
        })
        .collect())
}

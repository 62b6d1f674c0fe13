//! Polygon exchange: parcels to GeoJSON and back.
//!
//! Parcels are written as pixel-edge ("crack") polygons with integer corner
//! coordinates, so rasterising a written polygon at pixel centres gives back
//! the parcel's pixels exactly.

use std::collections::HashMap;
use std::path::Path;

use serde_json::{json, Value};

use crate::classify::Label;
use crate::error::{Error, Result};
use crate::geometry::{label_components4, Parcel, ParcelId, Stage};
use crate::raster::BinaryMask;

pub type Ring = Vec<(f64, f64)>;

/// Boundary rings of a parcel in image coordinates: the outer ring has a
/// positive shoelace sum (x right, y down), holes negative. Collinear
/// vertices are dropped; rings are not explicitly closed.
pub fn parcel_rings(p: &Parcel) -> Vec<Vec<(i64, i64)>> {
    let m = p.mask();
    let (ox, oy) = (p.origin().0 as i64, p.origin().1 as i64);
    // Directed unit edges keyed by start corner; value = (end corner, owning pixel).
    let mut out_edges: HashMap<(i64, i64), Vec<((i64, i64), (i64, i64))>> = HashMap::new();
    let mut n_edges = 0usize;
    for (x, y) in m.iter_set() {
        let (xi, yi) = (x as i64, y as i64);
        let (gx, gy) = (xi + ox, yi + oy);
        let px = (gx, gy);
        let mut add = |a: (i64, i64), b: (i64, i64)| {
            out_edges.entry(a).or_default().push((b, px));
            n_edges += 1;
        };
        if !m.get_i(xi, yi - 1) {
            add((gx, gy), (gx + 1, gy));
        }
        if !m.get_i(xi + 1, yi) {
            add((gx + 1, gy), (gx + 1, gy + 1));
        }
        if !m.get_i(xi, yi + 1) {
            add((gx + 1, gy + 1), (gx, gy + 1));
        }
        if !m.get_i(xi - 1, yi) {
            add((gx, gy + 1), (gx, gy));
        }
    }
    let mut starts: Vec<(i64, i64)> = out_edges.keys().copied().collect();
    starts.sort_by_key(|&(x, y)| (y, x));
    let mut rings = Vec::new();
    let mut used = 0usize;
    for s in starts {
        while out_edges.get(&s).is_some_and(|v| !v.is_empty()) {
            let mut ring = vec![s];
            let (mut cur, mut owner) = out_edges.get_mut(&s).expect("checked").remove(0);
            used += 1;
            while cur != s {
                ring.push(cur);
                let nexts = out_edges.get_mut(&cur).expect("boundary edges form closed loops");
                // At a diagonal pinch keep walking around the same pixel.
                let k = nexts.iter().position(|&(_, o)| o == owner).unwrap_or(0);
                let (n, o) = nexts.remove(k);
                used += 1;
                cur = n;
                owner = o;
            }
            rings.push(simplify(ring));
        }
    }
    debug_assert_eq!(used, n_edges);
    rings.sort_by_key(|r| std::cmp::Reverse(shoelace2(r)));
    rings
}

fn simplify(ring: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    let n = ring.len();
    (0..n)
        .filter(|&i| {
            let (a, b, c) = (ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]);
            (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0) != 0
        })
        .map(|i| ring[i])
        .collect()
}

fn shoelace2(r: &[(i64, i64)]) -> i64 {
    let n = r.len();
    (0..n)
        .map(|i| r[i].0 * r[(i + 1) % n].1 - r[(i + 1) % n].0 * r[i].1)
        .sum()
}

/// Pixels whose centres fall inside the rings under the even-odd rule.
pub fn rasterize(rings: &[Ring], width: usize, height: usize) -> BinaryMask {
    let mut m = BinaryMask::new(width, height);
    let mut xs: Vec<f64> = Vec::new();
    for y in 0..height {
        let yc = y as f64 + 0.5;
        xs.clear();
        for r in rings {
            let n = r.len();
            for i in 0..n {
                let (a, b) = (r[i], r[(i + 1) % n]);
                if (a.1 <= yc) != (b.1 <= yc) {
                    xs.push(a.0 + (yc - a.1) * (b.0 - a.0) / (b.1 - a.1));
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let lo = (pair[0] - 0.5).ceil().max(0.0);
            let hi = (pair[1] - 0.5).ceil().min(width as f64);
            let (lo, hi) = (lo as usize, hi.max(0.0) as usize);
            for x in lo..hi.max(lo) {
                m.set(x, y, true);
            }
        }
    }
    m
}

/// Affine pixel-to-world map `[x0, dx_col, dx_row, y0, dy_col, dy_row]`:
/// `X = x0 + c * dx_col + r * dx_row`, `Y = y0 + c * dy_col + r * dy_row`.
pub type GeoTransform = [f64; 6];

/// One output feature.
pub struct FeatureOut<'a> {
    pub parcel: &'a Parcel,
    pub label: Label,
    pub confidence: f64,
}

fn stage_str(s: Stage) -> &'static str {
    match s {
        Stage::Extracted => "extracted",
        Stage::SplitMincut => "split_mincut",
        Stage::SplitLcd => "split_lcd",
    }
}

pub fn to_feature_collection(features: &[FeatureOut<'_>], transform: Option<&GeoTransform>) -> Value {
    let map = |(x, y): (i64, i64)| -> Value {
        let (x, y) = (x as f64, y as f64);
        match transform {
            Some(t) => json!([t[0] + x * t[1] + y * t[2], t[3] + x * t[4] + y * t[5]]),
            None => json!([x, y]),
        }
    };
    let feats: Vec<Value> = features
        .iter()
        .map(|f| {
            let rings: Vec<Value> = parcel_rings(f.parcel)
                .into_iter()
                .map(|r| {
                    let mut pts: Vec<Value> = r.iter().copied().map(map).collect();
                    pts.push(map(r[0]));
                    Value::Array(pts)
                })
                .collect();
            json!({
                "type": "Feature",
                "properties": {
                    "id": f.parcel.id.to_string(),
                    "label": f.label.as_str(),
                    "confidence": f.confidence,
                    "stage": stage_str(f.parcel.stage),
                },
                "geometry": { "type": "Polygon", "coordinates": rings },
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": feats })
}

pub fn write_feature_collection(path: &Path, features: &[FeatureOut<'_>], transform: Option<&GeoTransform>) -> Result<()> {
    let v = to_feature_collection(features, transform);
    let s = serde_json::to_string_pretty(&v)?;
    std::fs::write(path, s + "\n").map_err(|e| Error::io(path, e))
}

/// A labelled field read from GeoJSON.
#[derive(Clone, Debug)]
pub struct Field {
    pub parcel: Parcel,
    pub label: Label,
}

fn parse_ring(v: &Value) -> Result<Ring> {
    let arr = v.as_array().ok_or_else(|| Error::input("polygon ring is not an array"))?;
    let mut r: Ring = arr
        .iter()
        .map(|p| match p.as_array().map(|a| a.as_slice()) {
            Some([x, y, ..]) => match (x.as_f64(), y.as_f64()) {
                (Some(x), Some(y)) => Ok((x, y)),
                _ => Err(Error::input("non-numeric polygon coordinate")),
            },
            _ => Err(Error::input("polygon coordinate must be [x, y]")),
        })
        .collect::<Result<_>>()?;
    if r.len() > 1 && r.first() == r.last() {
        r.pop();
    }
    Ok(r)
}

/// Reads polygons in pixel coordinates. Each polygon is rasterised at pixel
/// centres and its largest 4-connected piece becomes the field. Properties
/// `label` (default ag) and `id` (default: 1-based feature position) are
/// honoured; polygons that cover no pixel centre are skipped.
pub fn read_fields(path: &Path, width: usize, height: usize) -> Result<Vec<Field>> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let v: Value = serde_json::from_str(&s).map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    parse_fields(&v, width, height)
}

pub fn parse_fields(v: &Value, width: usize, height: usize) -> Result<Vec<Field>> {
    let feats = v
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::input("GeoJSON must be a FeatureCollection"))?;
    let mut out = Vec::new();
    for (k, f) in feats.iter().enumerate() {
        let props = f.get("properties");
        let label = match props.and_then(|p| p.get("label")).and_then(Value::as_str) {
            Some(s) => s.parse()?,
            None => Label::Ag,
        };
        let id = match props.and_then(|p| p.get("id")) {
            Some(Value::String(s)) => s.parse()?,
            Some(Value::Number(n)) => ParcelId::root(
                n.as_u64()
                    .and_then(|n| u32::try_from(n).ok())
                    .ok_or_else(|| Error::input("feature id must be a non-negative integer"))?,
            ),
            _ => ParcelId::root(k as u32 + 1),
        };
        let geom = f.get("geometry").ok_or_else(|| Error::input("feature without geometry"))?;
        let coords = geom.get("coordinates").ok_or_else(|| Error::input("geometry without coordinates"))?;
        let polys: Vec<&Value> = match geom.get("type").and_then(Value::as_str) {
            Some("Polygon") => vec![coords],
            Some("MultiPolygon") => coords
                .as_array()
                .ok_or_else(|| Error::input("MultiPolygon coordinates must be an array"))?
                .iter()
                .collect(),
            other => return Err(Error::input(format!("unsupported geometry type {other:?}"))),
        };
        let mut rings = Vec::new();
        for p in polys {
            for r in p.as_array().ok_or_else(|| Error::input("polygon must be an array of rings"))? {
                rings.push(parse_ring(r)?);
            }
        }
        let mask = rasterize(&rings, width, height);
        let (labels, n) = label_components4(&mask);
        if n == 0 {
            log::warn!("feature {id} covers no pixel centre; skipped");
            continue;
        }
        let mut sizes = vec![0usize; n as usize + 1];
        for &l in &labels {
            sizes[l as usize] += 1;
        }
        let best = (1..=n as usize).max_by_key(|&l| (sizes[l], std::cmp::Reverse(l))).expect("n >= 1");
        let piece = BinaryMask::from_fn(width, height, |x, y| labels[y * width + x] as usize == best);
        match Parcel::from_mask(&piece, (0, 0), id.clone(), Stage::Extracted) {
            Ok(parcel) => out.push(Field { parcel, label }),
            Err(e) => log::warn!("feature {id} skipped: {e}"),
        }
    }
    Ok(out)
}

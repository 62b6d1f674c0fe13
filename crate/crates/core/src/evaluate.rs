//! Scoring detections against ground truth.
//!
//! Ground-truth and detected parcels are linked by pixel overlap and grouped
//! into mapping instances: one-to-one, one ground-truth field split into
//! several detections, or several fields merged into one detection. Each
//! instance gets pixel precision, recall and F1 plus a `1 / (1 + log k)`
//! multiplicity score; image scores are weighted means.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Parcel, ParcelId};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Right,
    OverSegmented,
    UnderSegmented,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingInstance {
    pub gt_ids: Vec<ParcelId>,
    pub det_ids: Vec<ParcelId>,
    pub kind: InstanceKind,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl MappingInstance {
    pub fn gt_pixels(&self) -> usize {
        self.tp + self.fn_
    }
}

/// A detection left out of every mapping instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalsePositive {
    pub det_id: ParcelId,
    pub pixels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mapping {
    pub instances: Vec<MappingInstance>,
    pub unmapped_gt: Vec<ParcelId>,
    pub false_positives: Vec<FalsePositive>,
    pub total_gt: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Ten,
}

fn paint(parcels: &[Parcel], width: usize, height: usize, what: &str) -> Result<Vec<u32>> {
    let mut owner = vec![0u32; width * height];
    for (k, p) in parcels.iter().enumerate() {
        let (_, _, x1, y1) = p.bbox();
        if x1 > width || y1 > height {
            return Err(Error::input(format!(
                "{what} parcel {} extends outside the {width}x{height} frame",
                p.id
            )));
        }
        for (x, y) in p.pixels() {
            let o = &mut owner[y * width + x];
            if *o != 0 {
                return Err(Error::input(format!(
                    "{what} parcels {} and {} overlap",
                    parcels[*o as usize - 1].id,
                    p.id
                )));
            }
            *o = k as u32 + 1;
        }
    }
    Ok(owner)
}

/// Links ground truth `g` and detection `d` when they share at least
/// `link_min_overlap * min(|g|, |d|)` pixels (and at least one), then groups
/// them.
///
/// Links are visited by decreasing overlap, ties by ground-truth id and then
/// detection id. A link between two unassigned fields opens an instance; a link
/// from an assigned field brings in an unassigned partner only while the
/// instance keeps a single field on the assigned side. A field therefore
/// joins the instance where its overlap is largest, and every instance is
/// one-to-one, one-to-many or many-to-one. A detection whose only links
/// lead into a many-to-one instance stays out and is scored as a false
/// positive. Parcels within each list must be pairwise disjoint and carry
/// distinct ids.
pub fn build_mapping(
    gt: &[Parcel],
    det: &[Parcel],
    width: usize,
    height: usize,
    link_min_overlap: f64,
) -> Result<Mapping> {
    if !(0.0..=1.0).contains(&link_min_overlap) {
        return Err(Error::config("link_min_overlap must be in [0, 1]"));
    }
    let gt_owner = paint(gt, width, height, "ground-truth")?;
    let det_owner = paint(det, width, height, "detected")?;
    let mut overlap: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (g, d) in gt_owner.iter().zip(&det_owner) {
        if *g != 0 && *d != 0 {
            *overlap.entry((*g as usize - 1, *d as usize - 1)).or_default() += 1;
        }
    }
    let gt_size: Vec<usize> = gt.iter().map(Parcel::area).collect();
    let det_size: Vec<usize> = det.iter().map(Parcel::area).collect();
    let mut links: Vec<(usize, usize, usize)> = overlap
        .into_iter()
        .filter(|&((g, d), n)| n as f64 >= link_min_overlap * gt_size[g].min(det_size[d]) as f64)
        .map(|((g, d), n)| (g, d, n))
        .collect();
    links.sort_by(|a, b| {
        b.2.cmp(&a.2)
            .then_with(|| gt[a.0].id.cmp(&gt[b.0].id))
            .then_with(|| det[a.1].id.cmp(&det[b.1].id))
    });

    let mut gt_inst: Vec<Option<usize>> = vec![None; gt.len()];
    let mut det_inst: Vec<Option<usize>> = vec![None; det.len()];
    let mut groups: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for (g, d, _) in links {
        match (gt_inst[g], det_inst[d]) {
            (None, None) => {
                gt_inst[g] = Some(groups.len());
                det_inst[d] = Some(groups.len());
                groups.push((vec![g], vec![d]));
            }
            (Some(i), None) if groups[i].0.len() == 1 => {
                det_inst[d] = Some(i);
                groups[i].1.push(d);
            }
            (None, Some(i)) if groups[i].1.len() == 1 => {
                gt_inst[g] = Some(i);
                groups[i].0.push(g);
            }
            _ => {}
        }
    }

    let mut instances = Vec::with_capacity(groups.len());
    for (gs, ds) in &groups {
        let gset: BTreeSet<u32> = gs.iter().map(|&g| g as u32 + 1).collect();
        let dset: BTreeSet<u32> = ds.iter().map(|&d| d as u32 + 1).collect();
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for (g, d) in gt_owner.iter().zip(&det_owner) {
            match (gset.contains(g), dset.contains(d)) {
                (true, true) => tp += 1,
                (true, false) => fn_ += 1,
                (false, true) => fp += 1,
                _ => {}
            }
        }
        let kind = match (gs.len(), ds.len()) {
            (1, 1) => InstanceKind::Right,
            (1, _) => InstanceKind::OverSegmented,
            _ => InstanceKind::UnderSegmented,
        };
        let mut gt_ids: Vec<ParcelId> = gs.iter().map(|&g| gt[g].id.clone()).collect();
        let mut det_ids: Vec<ParcelId> = ds.iter().map(|&d| det[d].id.clone()).collect();
        gt_ids.sort();
        det_ids.sort();
        instances.push(MappingInstance {
            gt_ids,
            det_ids,
            kind,
            tp,
            fp,
            fn_,
        });
    }
    instances.sort_by(|a, b| a.gt_ids.cmp(&b.gt_ids));
    let mut unmapped_gt: Vec<ParcelId> = (0..gt.len())
        .filter(|&g| gt_inst[g].is_none())
        .map(|g| gt[g].id.clone())
        .collect();
    unmapped_gt.sort();
    let mut false_positives: Vec<FalsePositive> = (0..det.len())
        .filter(|&d| det_inst[d].is_none())
        .map(|d| FalsePositive {
            det_id: det[d].id.clone(),
            pixels: det_size[d],
        })
        .collect();
    false_positives.sort_by(|a, b| a.det_id.cmp(&b.det_id));
    Ok(Mapping {
        instances,
        unmapped_gt,
        false_positives,
        total_gt: gt.len(),
    })
}

/// Pixel precision, recall and F1 (F1 is 0 when both are 0).
pub fn instance_metrics<T: Scalar>(tp: usize, fp: usize, fn_: usize) -> Result<(T, T, T)> {
    if tp + fp + fn_ == 0 {
        return Err(Error::input("mapping instance has no pixels"));
    }
    let ratio = |a: usize, b: usize| {
        if a + b == 0 {
            T::zero()
        } else {
            T::count(a) / T::count(a + b)
        }
    };
    let p = ratio(tp, fp);
    let r = ratio(tp, fn_);
    let f = if p + r == T::zero() {
        T::zero()
    } else {
        T::lit(2.0) * p * r / (p + r)
    };
    Ok((p, r, f))
}

/// `1 / (1 + log k)` for `k` merged ground-truth fields.
pub fn agglomeration_metric<T: Scalar>(k: usize, base: LogBase) -> Result<T> {
    if k == 0 {
        return Err(Error::input("multiplicity k must be at least 1"));
    }
    let k = T::count(k);
    let l = match base {
        LogBase::Natural => k.ln(),
        LogBase::Ten => k.log10(),
    };
    Ok(T::one() / (T::one() + l))
}

/// Same formula, applied to the number of detections covering one field.
pub fn fragmentation_metric<T: Scalar>(k: usize, base: LogBase) -> Result<T> {
    agglomeration_metric(k, base)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    #[serde(flatten)]
    pub instance: MappingInstance,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub agglomeration: f64,
    pub fragmentation: f64,
}

pub fn score_instance(inst: &MappingInstance, base: LogBase) -> Result<InstanceScore> {
    let (precision, recall, f1) = instance_metrics::<f64>(inst.tp, inst.fp, inst.fn_)?;
    Ok(InstanceScore {
        instance: inst.clone(),
        precision,
        recall,
        f1,
        agglomeration: agglomeration_metric(inst.gt_ids.len(), base)?,
        fragmentation: fragmentation_metric(inst.det_ids.len(), base)?,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub agglomeration: f64,
    pub fragmentation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_instance: Vec<InstanceScore>,
    pub false_positives: Vec<FalsePositive>,
    pub unmapped_gt: Vec<ParcelId>,
    pub image: ImageMetrics,
    pub detection_rate: f64,
}

/// Weighted image scores.
///
/// Each instance weighs its ground-truth pixel count. Detections that
/// overlap no ground truth enter precision and F1 as zero-score entries
/// weighted by their own pixel count; recall and the multiplicity scores
/// ignore them.
pub fn aggregate(
    scores: Vec<InstanceScore>,
    false_positives: Vec<FalsePositive>,
    unmapped_gt: Vec<ParcelId>,
    total_gt: usize,
) -> Result<EvalReport> {
    let g: usize = scores.iter().map(|s| s.instance.gt_pixels()).sum();
    if scores.is_empty() || g == 0 {
        return Err(Error::input("no ground-truth pixels to aggregate over"));
    }
    let f: usize = false_positives.iter().map(|p| p.pixels).sum();
    let (g, f) = (g as f64, f as f64);
    let wsum = |m: fn(&InstanceScore) -> f64| -> f64 {
        scores
            .iter()
            .map(|s| s.instance.gt_pixels() as f64 * m(s))
            .sum::<f64>()
    };
    let image = ImageMetrics {
        precision: wsum(|s| s.precision) / (g + f),
        recall: wsum(|s| s.recall) / g,
        f1: wsum(|s| s.f1) / (g + f),
        agglomeration: wsum(|s| s.agglomeration) / g,
        fragmentation: wsum(|s| s.fragmentation) / g,
    };
    let mapped: usize = scores.iter().map(|s| s.instance.gt_ids.len()).sum();
    let detection_rate = if total_gt == 0 {
        0.0
    } else {
        mapped as f64 / total_gt as f64
    };
    Ok(EvalReport {
        per_instance: scores,
        false_positives,
        unmapped_gt,
        image,
        detection_rate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    pub link_min_overlap: f64,
    pub log_base: LogBase,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            link_min_overlap: 0.1,
            log_base: LogBase::Natural,
        }
    }
}

/// Maps, scores and aggregates. With no mapped instance at all every image
/// score is 0.
pub fn evaluate(gt: &[Parcel], det: &[Parcel], width: usize, height: usize, params: &EvalParams) -> Result<EvalReport> {
    let m = build_mapping(gt, det, width, height, params.link_min_overlap)?;
    let scores = m
        .instances
        .iter()
        .map(|i| score_instance(i, params.log_base))
        .collect::<Result<Vec<_>>>()?;
    if scores.is_empty() {
        return Ok(EvalReport {
            per_instance: Vec::new(),
            false_positives: m.false_positives,
            unmapped_gt: m.unmapped_gt,
            image: ImageMetrics::default(),
            detection_rate: 0.0,
        });
    }
    aggregate(scores, m.false_positives, m.unmapped_gt, m.total_gt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Stage;
    use crate::raster::BinaryMask;

    fn rect(id: u32, x: usize, y: usize, w: usize, h: usize) -> Parcel {
        Parcel::from_mask(&BinaryMask::full(w, h), (x, y), ParcelId::root(id), Stage::Extracted).unwrap()
    }

    #[test]
    fn metric_examples() {
        assert_eq!(instance_metrics::<f64>(50, 0, 0).unwrap(), (1.0, 1.0, 1.0));
        assert_eq!(instance_metrics::<f64>(30, 10, 30).unwrap(), (0.75, 0.5, 0.6));
        assert_eq!(instance_metrics::<f64>(0, 5, 5).unwrap(), (0.0, 0.0, 0.0));
        assert!(instance_metrics::<f64>(0, 0, 0).is_err());
        assert_eq!(agglomeration_metric::<f64>(1, LogBase::Natural).unwrap(), 1.0);
        let k10: f64 = agglomeration_metric(10, LogBase::Natural).unwrap();
        assert!((k10 - 1.0 / (1.0 + 10f64.ln())).abs() < 1e-12);
        assert!((k10 - 0.30279).abs() < 1e-5);
        let k2: f64 = fragmentation_metric(2, LogBase::Natural).unwrap();
        assert!((k2 - 0.5907).abs() < 1e-4);
        assert_eq!(agglomeration_metric::<f64>(10, LogBase::Ten).unwrap(), 0.5);
        assert!(agglomeration_metric::<f64>(0, LogBase::Natural).is_err());
    }

    #[test]
    fn mapping_kinds() {
        let g = vec![rect(1, 0, 0, 10, 10)];
        let m = build_mapping(&g, &g, 30, 30, 0.1).unwrap();
        assert_eq!(m.instances.len(), 1);
        assert_eq!(m.instances[0].kind, InstanceKind::Right);
        assert_eq!((m.instances[0].fp, m.instances[0].fn_), (0, 0));

        let halves = vec![rect(1, 0, 0, 5, 10), rect(2, 5, 0, 5, 10)];
        let m = build_mapping(&g, &halves, 30, 30, 0.1).unwrap();
        assert_eq!(m.instances[0].kind, InstanceKind::OverSegmented);
        assert_eq!(m.instances[0].det_ids.len(), 2);

        let two = vec![rect(1, 0, 0, 10, 10), rect(2, 10, 0, 10, 10)];
        let one = vec![rect(7, 0, 0, 20, 10)];
        let m = build_mapping(&two, &one, 30, 30, 0.1).unwrap();
        assert_eq!(m.instances[0].kind, InstanceKind::UnderSegmented);
        assert_eq!(m.instances[0].gt_ids.len(), 2);
    }

    #[test]
    fn aggregation_weights() {
        let inst = |gt: usize, f1: f64| InstanceScore {
            instance: MappingInstance {
                gt_ids: vec![ParcelId::root(1)],
                det_ids: vec![ParcelId::root(1)],
                kind: InstanceKind::Right,
                tp: gt,
                fp: 0,
                fn_: 0,
            },
            precision: f1,
            recall: f1,
            f1,
            agglomeration: 1.0,
            fragmentation: 1.0,
        };
        let r = aggregate(vec![inst(100, 0.8), inst(100, 0.6)], vec![], vec![], 2).unwrap();
        assert!((r.image.f1 - 0.7).abs() < 1e-12);
        let r = aggregate(vec![inst(300, 1.0), inst(100, 0.0)], vec![], vec![], 2).unwrap();
        assert!((r.image.f1 - 0.75).abs() < 1e-12);
        assert!(aggregate(vec![], vec![], vec![], 0).is_err());
    }

    #[test]
    fn frame_and_overlap_errors() {
        let g = vec![rect(1, 25, 25, 10, 10)];
        assert!(build_mapping(&g, &[], 30, 30, 0.1).is_err());
        let o = vec![rect(1, 0, 0, 10, 10), rect(2, 5, 5, 10, 10)];
        assert!(build_mapping(&o, &[], 30, 30, 0.1).is_err());
    }
}

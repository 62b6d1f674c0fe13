use std::collections::BTreeSet;

use fieldseg::evaluate::{evaluate, EvalParams, InstanceKind};
use fieldseg::geometry::{Parcel, ParcelId, Stage};
use fieldseg::raster::BinaryMask;
use proptest::prelude::*;

const W: usize = 96;
const H: usize = 80;

fn rect(id: u32, x: usize, y: usize, w: usize, h: usize) -> Parcel {
    Parcel::from_mask(&BinaryMask::full(w, h), (x, y), ParcelId::root(id), Stage::Extracted).unwrap()
}

/// Disjoint rectangles, at most one per cell of a `pitch` grid.
fn layout(pitch: (usize, usize)) -> impl Strategy<Value = Vec<Parcel>> {
    let cells = (W / pitch.0) * (H / pitch.1);
    proptest::collection::vec((any::<bool>(), 0usize..4, 0usize..4, 0usize..4, 0usize..4), cells).prop_map(move |spec| {
        let cols = W / pitch.0;
        spec.into_iter()
            .enumerate()
            .filter(|(_, s)| s.0)
            .map(|(i, (_, l, t, r, b))| {
                let (cx, cy) = ((i % cols) * pitch.0, (i / cols) * pitch.1);
                rect(i as u32 + 1, cx + l, cy + t, pitch.0 - l - r, pitch.1 - t - b)
            })
            .collect()
    })
}

fn pixel_counts(gt: &[&Parcel], det: &[&Parcel]) -> (usize, usize, usize) {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for y in 0..H as i64 {
        for x in 0..W as i64 {
            let g = gt.iter().any(|p| p.contains(x, y));
            let d = det.iter().any(|p| p.contains(x, y));
            match (g, d) {
                (true, true) => tp += 1,
                (true, false) => fn_ += 1,
                (false, true) => fp += 1,
                _ => {}
            }
        }
    }
    (tp, fp, fn_)
}

fn pick<'a>(ps: &'a [Parcel], ids: &[ParcelId]) -> Vec<&'a Parcel> {
    ids.iter().map(|id| ps.iter().find(|p| &p.id == id).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn instances_match_brute_force(gt in layout((24, 20)), det in layout((16, 26))) {
        prop_assume!(!gt.is_empty());
        let rep = evaluate(&gt, &det, W, H, &EvalParams::default()).unwrap();
        let mut seen_gt = BTreeSet::new();
        let mut seen_det = BTreeSet::new();
        let (mut num_p, mut num_r, mut num_f, mut g_px) = (0.0, 0.0, 0.0, 0usize);
        for s in &rep.per_instance {
            let i = &s.instance;
            let (tp, fp, fn_) = pixel_counts(&pick(&gt, &i.gt_ids), &pick(&det, &i.det_ids));
            prop_assert_eq!((i.tp, i.fp, i.fn_), (tp, fp, fn_));
            let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
            let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
            let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            prop_assert!((s.precision - p).abs() < 1e-12 && (s.recall - r).abs() < 1e-12 && (s.f1 - f).abs() < 1e-12);
            let want_kind = match (i.gt_ids.len(), i.det_ids.len()) {
                (1, 1) => InstanceKind::Right,
                (1, _) => InstanceKind::OverSegmented,
                _ => InstanceKind::UnderSegmented,
            };
            prop_assert_eq!(i.kind, want_kind);
            prop_assert!(i.gt_ids.len() == 1 || i.det_ids.len() == 1);
            for g in &i.gt_ids {
                prop_assert!(seen_gt.insert(g.clone()));
            }
            for d in &i.det_ids {
                prop_assert!(seen_det.insert(d.clone()));
            }
            let w = (tp + fn_) as f64;
            num_p += w * p;
            num_r += w * r;
            num_f += w * f;
            g_px += tp + fn_;
        }
        for fp in &rep.false_positives {
            prop_assert!(!seen_det.contains(&fp.det_id));
            let d = pick(&det, std::slice::from_ref(&fp.det_id))[0];
            prop_assert_eq!(fp.pixels, d.area());
            // Any ground truth it links to already sits in a merge.
            for g in &gt {
                let shared = d.pixels().filter(|&(x, y)| g.contains(x as i64, y as i64)).count();
                if shared > 0 && shared as f64 >= 0.1 * g.area().min(d.area()) as f64 {
                    let inst = rep.per_instance.iter().find(|s| s.instance.gt_ids.contains(&g.id));
                    prop_assert!(inst.is_some_and(|s| s.instance.gt_ids.len() > 1));
                }
            }
        }
        prop_assert_eq!(seen_det.len() + rep.false_positives.len(), det.len());
        prop_assert_eq!(seen_gt.len() + rep.unmapped_gt.len(), gt.len());
        if g_px > 0 {
            let f_px: usize = rep.false_positives.iter().map(|f| f.pixels).sum();
            let (g, f) = (g_px as f64, f_px as f64);
            prop_assert!((rep.image.precision - num_p / (g + f)).abs() < 1e-12);
            prop_assert!((rep.image.recall - num_r / g).abs() < 1e-12);
            prop_assert!((rep.image.f1 - num_f / (g + f)).abs() < 1e-12);
            prop_assert!((rep.detection_rate - seen_gt.len() as f64 / gt.len() as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn ground_truth_scores_perfectly_against_itself(gt in layout((24, 20))) {
        prop_assume!(!gt.is_empty());
        let rep = evaluate(&gt, &gt, W, H, &EvalParams::default()).unwrap();
        prop_assert_eq!(rep.image.precision, 1.0);
        prop_assert_eq!(rep.image.recall, 1.0);
        prop_assert_eq!(rep.image.f1, 1.0);
        prop_assert_eq!(rep.image.agglomeration, 1.0);
        prop_assert_eq!(rep.image.fragmentation, 1.0);
        prop_assert_eq!(rep.detection_rate, 1.0);
        prop_assert!(rep.per_instance.iter().all(|s| s.instance.kind == InstanceKind::Right));
    }

    #[test]
    fn mapped_ground_truth_pixels_are_conserved(gt in layout((24, 20)), det in layout((12, 16))) {
        prop_assume!(!gt.is_empty());
        let rep = evaluate(&gt, &det, W, H, &EvalParams::default()).unwrap();
        let mapped: usize = rep.per_instance.iter().map(|s| s.instance.tp + s.instance.fn_).sum();
        let unmapped: usize = pick(&gt, &rep.unmapped_gt).iter().map(|p| p.area()).sum();
        let total: usize = gt.iter().map(Parcel::area).sum();
        prop_assert_eq!(mapped + unmapped, total);
    }

    #[test]
    fn list_order_does_not_change_the_report(gt in layout((24, 20)), det in layout((16, 26))) {
        prop_assume!(!gt.is_empty());
        let a = evaluate(&gt, &det, W, H, &EvalParams::default()).unwrap();
        let (mut g2, mut d2) = (gt.clone(), det.clone());
        g2.reverse();
        d2.reverse();
        let b = evaluate(&g2, &d2, W, H, &EvalParams::default()).unwrap();
        prop_assert_eq!(a, b);
    }
}

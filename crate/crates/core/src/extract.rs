//! Candidate parcels from an edge map.

use serde::{Deserialize, Serialize};

use crate::edges::{binarize_edges, EdgeMap};
use crate::error::{Error, Result};
use crate::geometry::{flood4, label_components4, Parcel, ParcelId, Stage};
use crate::raster::{dilate, erode, thin, BinaryMask};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionParams<T> {
    pub binarize_threshold: T,
    pub dilate_radius: usize,
    pub erode_radius: usize,
    /// Minimum number of non-edge pixels a region needs to become a parcel.
    pub min_component_area: usize,
}

impl<T: Scalar> Default for ExtractionParams<T> {
    fn default() -> Self {
        Self {
            binarize_threshold: T::lit(0.5),
            dilate_radius: 1,
            erode_radius: 1,
            min_component_area: 20,
        }
    }
}

impl<T: Scalar> ExtractionParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.binarize_threshold >= T::zero() && self.binarize_threshold <= T::one()) {
            return Err(Error::config(format!(
                "binarize_threshold must be in [0, 1], got {}",
                self.binarize_threshold
            )));
        }
        if self.min_component_area == 0 {
            return Err(Error::config("min_component_area must be at least 1"));
        }
        Ok(())
    }
}

/// Intermediate rasters of the extraction, kept for debugging and tests.
#[derive(Clone, Debug)]
pub struct Cleanup {
    pub binary: BinaryMask,
    pub closed: BinaryMask,
    pub skeleton: BinaryMask,
    pub barrier: BinaryMask,
}

/// Binarise, close and thin an edge map; non-cropland joins the barrier.
pub fn clean_edges<T: Scalar>(
    edge_map: &EdgeMap<T>,
    cropland: Option<&BinaryMask>,
    params: &ExtractionParams<T>,
) -> Result<Cleanup> {
    params.validate()?;
    let (w, h) = (edge_map.width(), edge_map.height());
    if let Some(c) = cropland {
        if !c.same_dims(w, h) {
            return Err(Error::input(format!(
                "cropland mask is {}x{}, edge map is {w}x{h}",
                c.width(),
                c.height()
            )));
        }
    }
    let binary = binarize_edges(edge_map, params.binarize_threshold);
    let closed = erode(&dilate(&binary, params.dilate_radius), params.erode_radius);
    let skeleton = thin(&closed);
    let barrier = match cropland {
        Some(c) => skeleton.union(&c.complement())?,
        None => skeleton.clone(),
    };
    Ok(Cleanup {
        binary,
        closed,
        skeleton,
        barrier,
    })
}

/// Regions between the cleaned edge lines, one parcel each.
///
/// A region is kept when it holds at least `min_component_area` pixels that
/// were clear both in the binarised map and after closing; the thinned-away
/// halves of boundary lines still join the parcel but do not count towards
/// that size. This drops slivers between a boundary's skeleton and the frame
/// edge and yields nothing for an all-edge map. Parcels are numbered 1, 2, ...
/// in raster order of their first pixel.
pub fn extract_parcels<T: Scalar>(
    edge_map: &EdgeMap<T>,
    cropland: Option<&BinaryMask>,
    params: &ExtractionParams<T>,
) -> Result<Vec<Parcel>> {
    let cl = clean_edges(edge_map, cropland, params)?;
    let core = BinaryMask::from_fn(edge_map.width(), edge_map.height(), |x, y| {
        !cl.binary.get(x, y) && !cl.closed.get(x, y) && !cl.barrier.get(x, y)
    });
    let blocked = match cropland {
        Some(c) => c.complement(),
        None => BinaryMask::new(edge_map.width(), edge_map.height()),
    };
    let regions = cl.barrier.complement();
    let mut next = 0u32;
    Ok(regions_to_parcels(&regions, (0, 0), &core, params.min_component_area, &blocked, Stage::Extracted, |_| {
        next += 1;
        ParcelId::root(next)
    }))
}

/// Turns the 4-connected components of `regions` into parcels.
///
/// A component is kept when it covers at least `min_core` pixels of `core`.
/// Holes are filled unless they contain a `blocked` pixel or part of another
/// kept component. Components too small to trace are skipped. `id_for` gets
/// the 0-based rank of each kept component; `offset` is the image position
/// of the rasters' top-left pixel.
pub(crate) fn regions_to_parcels(
    regions: &BinaryMask,
    offset: (usize, usize),
    core: &BinaryMask,
    min_core: usize,
    blocked: &BinaryMask,
    stage: Stage,
    mut id_for: impl FnMut(usize) -> ParcelId,
) -> Vec<Parcel> {
    let (w, h) = (regions.width(), regions.height());
    let (labels, n) = label_components4(regions);
    let n = n as usize;
    let mut core_count = vec![0usize; n + 1];
    let mut bbox = vec![(usize::MAX, usize::MAX, 0usize, 0usize); n + 1];
    for (i, &l) in labels.iter().enumerate() {
        if l == 0 {
            continue;
        }
        let l = l as usize;
        let (x, y) = (i % w, i / w);
        if core.bits()[i] {
            core_count[l] += 1;
        }
        let b = &mut bbox[l];
        *b = (b.0.min(x), b.1.min(y), b.2.max(x), b.3.max(y));
    }
    let kept: Vec<bool> = (0..=n).map(|l| l > 0 && core_count[l] >= min_core).collect();

    let mut out = Vec::new();
    let mut rank = 0usize;
    for l in 1..=n {
        if !kept[l] {
            continue;
        }
        let (x0, y0, x1, y1) = bbox[l];
        // Padded local frame so the exterior flood can go all the way round.
        let (lw, lh) = (x1 - x0 + 3, y1 - y0 + 3);
        let global = |lx: usize, ly: usize| -> Option<usize> {
            let (gx, gy) = ((lx + x0).checked_sub(1)?, (ly + y0).checked_sub(1)?);
            (gx < w && gy < h).then_some(gy * w + gx)
        };
        let own = BinaryMask::from_fn(lw, lh, |lx, ly| {
            global(lx, ly).is_some_and(|g| labels[g] as usize == l)
        });
        let outside = flood4(&own.complement(), &[(0, 0)]);
        let holes = BinaryMask::from_fn(lw, lh, |lx, ly| !own.get(lx, ly) && !outside.get(lx, ly));
        let mut filled = own.clone();
        if !holes.is_empty() {
            let (hl, hn) = label_components4(&holes);
            let mut open = vec![false; hn as usize + 1];
            for (i, &k) in hl.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                if let Some(g) = global(i % lw, i / lw) {
                    let other = labels[g] as usize;
                    if blocked.bits()[g] || (other != 0 && other != l && kept[other]) {
                        open[k as usize] = true;
                    }
                }
            }
            for (i, &k) in hl.iter().enumerate() {
                if k != 0 && !open[k as usize] {
                    filled.set(i % lw, i / lw, true);
                }
            }
        }
        let local = BinaryMask::from_fn(lw - 2, lh - 2, |x, y| filled.get(x + 1, y + 1));
        match Parcel::from_mask(&local, (x0 + offset.0, y0 + offset.1), id_for(rank), stage) {
            Ok(p) => {
                out.push(p);
                rank += 1;
            }
            Err(e) => log::debug!("skipping region {l}: {e}"),
        }
    }
    out
}

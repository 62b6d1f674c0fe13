//! Shape rules that drop noise, slivers and thin strips.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{area, aspect_ratio, convex_hull, perimeter, Parcel};
use crate::scalar::Scalar;

/// Default ground sample distance, metres per pixel.
pub const DEFAULT_GSD: f64 = 1.19;

/// Rule thresholds in pixel units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeThresholds<T> {
    pub min_perimeter: T,
    pub min_area: T,
    pub convexity_max_ratio: T,
    pub convexity_area_cap: T,
    pub min_area_perimeter_ratio: T,
    pub ap_area_cap: T,
    pub min_aspect_ratio: T,
    pub sub_polygon_min_contour: T,
}

/// The same thresholds in ground units (metres, square metres).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundThresholds {
    pub min_perimeter_m: f64,
    pub min_area_m2: f64,
    pub convexity_max_ratio: f64,
    pub convexity_area_cap_m2: f64,
    pub min_area_perimeter_ratio_m: f64,
    pub ap_area_cap_m2: f64,
    pub min_aspect_ratio: f64,
    /// Already in pixels: it gates fragment contours, not ground features.
    pub sub_polygon_min_contour_px: f64,
}

impl Default for GroundThresholds {
    fn default() -> Self {
        Self {
            min_perimeter_m: 60.0,
            min_area_m2: 400.0,
            convexity_max_ratio: 1.3,
            convexity_area_cap_m2: 10_000.0,
            min_area_perimeter_ratio_m: 2.0,
            ap_area_cap_m2: 2_500.0,
            min_aspect_ratio: 0.12,
            sub_polygon_min_contour_px: 60.0,
        }
    }
}

impl GroundThresholds {
    pub fn to_pixels<T: Scalar>(&self, gsd: f64) -> Result<ShapeThresholds<T>> {
        if !(gsd > 0.0 && gsd.is_finite()) {
            return Err(Error::config(format!("gsd must be positive, got {gsd}")));
        }
        let a = gsd * gsd;
        let t = ShapeThresholds {
            min_perimeter: T::lit(self.min_perimeter_m / gsd),
            min_area: T::lit(self.min_area_m2 / a),
            convexity_max_ratio: T::lit(self.convexity_max_ratio),
            convexity_area_cap: T::lit(self.convexity_area_cap_m2 / a),
            min_area_perimeter_ratio: T::lit(self.min_area_perimeter_ratio_m / gsd),
            ap_area_cap: T::lit(self.ap_area_cap_m2 / a),
            min_aspect_ratio: T::lit(self.min_aspect_ratio),
            sub_polygon_min_contour: T::lit(self.sub_polygon_min_contour_px),
        };
        t.validate()?;
        Ok(t)
    }
}

impl<T: Scalar> Default for ShapeThresholds<T> {
    fn default() -> Self {
        GroundThresholds::default()
            .to_pixels(DEFAULT_GSD)
            .expect("default thresholds are valid")
    }
}

impl<T: Scalar> ShapeThresholds<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("min_perimeter", self.min_perimeter),
            ("min_area", self.min_area),
            ("convexity_area_cap", self.convexity_area_cap),
            ("min_area_perimeter_ratio", self.min_area_perimeter_ratio),
            ("ap_area_cap", self.ap_area_cap),
            ("sub_polygon_min_contour", self.sub_polygon_min_contour),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.convexity_max_ratio > T::one()) {
            return Err(Error::config("convexity_max_ratio must exceed 1"));
        }
        if !(self.min_aspect_ratio > T::zero() && self.min_aspect_ratio < T::one()) {
            return Err(Error::config("min_aspect_ratio must be in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    None,
    R1Small,
    R2Nonconvex,
    R3ElongatedNoise,
    R4ThinStrip,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::None => "none",
            Rule::R1Small => "r1_small",
            Rule::R2Nonconvex => "r2_nonconvex",
            Rule::R3ElongatedNoise => "r3_elongated_noise",
            Rule::R4ThinStrip => "r4_thin_strip",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub kept: bool,
    pub rule_fired: Rule,
}

/// Small in both perimeter and area.
pub fn rule1_small<T: Scalar>(p: &Parcel, t: &ShapeThresholds<T>) -> bool {
    perimeter::<T>(p) < t.min_perimeter && T::count(area(p)) < t.min_area
}

/// Far from convex, and not large enough to be left for splitting.
pub fn rule2_nonconvex<T: Scalar>(p: &Parcel, t: &ShapeThresholds<T>) -> bool {
    let a = T::count(area(p));
    convex_hull::<T>(p).area / a > t.convexity_max_ratio && a < t.convexity_area_cap
}

/// Too little area per unit of boundary, below the size guard.
pub fn rule3_elongated_noise<T: Scalar>(p: &Parcel, t: &ShapeThresholds<T>) -> bool {
    let a = T::count(area(p));
    a / perimeter::<T>(p) < t.min_area_perimeter_ratio && a < t.ap_area_cap
}

pub fn rule4_thin_strip<T: Scalar>(p: &Parcel, t: &ShapeThresholds<T>) -> bool {
    aspect_ratio::<T>(p) < t.min_aspect_ratio
}

/// First firing rule, in order 1 to 4.
pub fn verdict<T: Scalar>(p: &Parcel, t: &ShapeThresholds<T>) -> FilterVerdict {
    let rule_fired = if rule1_small(p, t) {
        Rule::R1Small
    } else if rule2_nonconvex(p, t) {
        Rule::R2Nonconvex
    } else if rule3_elongated_noise(p, t) {
        Rule::R3ElongatedNoise
    } else if rule4_thin_strip(p, t) {
        Rule::R4ThinStrip
    } else {
        Rule::None
    };
    FilterVerdict {
        kept: rule_fired == Rule::None,
        rule_fired,
    }
}

pub type Dropped = Vec<(Parcel, FilterVerdict)>;

/// Splits parcels into kept and dropped; both lists are ordered by id.
pub fn apply_filter<T: Scalar>(parcels: Vec<Parcel>, t: &ShapeThresholds<T>) -> (Vec<Parcel>, Dropped) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for p in parcels {
        let v = verdict(&p, t);
        if v.kept {
            kept.push(p);
        } else {
            dropped.push((p, v));
        }
    }
    kept.sort_by(|a, b| a.id.cmp(&b.id));
    dropped.sort_by(|a, b| a.0.id.cmp(&b.0.id));
    (kept, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ParcelId, Stage};
    use crate::raster::BinaryMask;

    fn parcel(m: BinaryMask) -> Parcel {
        Parcel::from_mask(&m, (0, 0), ParcelId::root(1), Stage::Extracted).unwrap()
    }

    fn thresholds() -> ShapeThresholds<f64> {
        ShapeThresholds {
            min_perimeter: 20.0,
            min_area: 50.0,
            convexity_max_ratio: 1.5,
            convexity_area_cap: 500.0,
            min_area_perimeter_ratio: 1.5,
            ap_area_cap: 300.0,
            min_aspect_ratio: 0.15,
            sub_polygon_min_contour: 20.0,
        }
    }

    #[test]
    fn defaults_convert_from_ground_units() {
        let t = ShapeThresholds::<f64>::default();
        assert!((t.min_perimeter - 60.0 / 1.19).abs() < 1e-12);
        assert!((t.min_area - 400.0 / (1.19 * 1.19)).abs() < 1e-9);
        assert!(t.validate().is_ok());
        assert!(GroundThresholds::default().to_pixels::<f64>(0.0).is_err());
        let mut bad = thresholds();
        bad.convexity_max_ratio = 1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rule1_is_a_conjunction() {
        let t = thresholds();
        assert!(rule1_small(&parcel(BinaryMask::full(2, 2)), &t));
        assert!(!rule1_small(&parcel(BinaryMask::full(20, 20)), &t));
        // Long 1x60 strip: area 60 is enough on its own.
        let strip = parcel(BinaryMask::full(60, 1));
        assert!(!rule1_small(&strip, &t));
        // Perimeter below threshold, area above.
        let block = parcel(BinaryMask::full(8, 8));
        let t2 = ShapeThresholds { min_perimeter: 40.0, ..t };
        assert!(perimeter::<f64>(&block) < 40.0);
        assert!(!rule1_small(&block, &t2));
    }

    #[test]
    fn rule3_and_rule4_examples() {
        let t = thresholds();
        assert!(rule3_elongated_noise(&parcel(BinaryMask::full(40, 1)), &t));
        assert!(!rule3_elongated_noise(&parcel(BinaryMask::full(20, 20)), &t));
        let big = ShapeThresholds { ap_area_cap: 30.0, ..t.clone() };
        assert!(!rule3_elongated_noise(&parcel(BinaryMask::full(40, 1)), &big));
        assert!(rule4_thin_strip(&parcel(BinaryMask::full(100, 10)), &t));
        assert!(!rule4_thin_strip(&parcel(BinaryMask::full(30, 30)), &t));
    }

    #[test]
    fn empty_and_convex_inputs() {
        let (k, d) = apply_filter(Vec::new(), &thresholds());
        assert!(k.is_empty() && d.is_empty());
        let ps: Vec<Parcel> = (0..3)
            .map(|i| {
                Parcel::from_mask(&BinaryMask::full(30 + i, 25), (0, 0), ParcelId::root(3 - i as u32), Stage::Extracted)
                    .unwrap()
            })
            .collect();
        let (k, d) = apply_filter(ps, &thresholds());
        assert_eq!(k.len(), 3);
        assert!(d.is_empty());
        assert_eq!(k[0].id, ParcelId::root(1));
    }
}

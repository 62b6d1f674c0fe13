use fieldseg::edges::{canny, gradient_magnitude, EdgeMap, HysteresisParams};
use fieldseg::extract::{clean_edges, extract_parcels, ExtractionParams};
use fieldseg::geometry::label_components4;
use fieldseg::raster::{to_gray, BinaryMask, GrayImage, RgbImage};
use proptest::prelude::*;

/// Blocky random image: coarse cells of random intensity.
fn blocky(w: usize, h: usize, cell: usize, levels: &[u8]) -> GrayImage {
    let cols = w.div_ceil(cell);
    let data = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            levels[((y / cell) * cols + x / cell) % levels.len()]
        })
        .collect();
    GrayImage::new(w, h, data).unwrap()
}

fn components8(m: &BinaryMask) -> Vec<Vec<(usize, usize)>> {
    let (w, h) = (m.width(), m.height());
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for (sx, sy) in m.iter_set() {
        if seen[sy * w + sx] {
            continue;
        }
        seen[sy * w + sx] = true;
        let mut comp = vec![(sx, sy)];
        let mut k = 0;
        while k < comp.len() {
            let (x, y) = comp[k];
            k += 1;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if m.get_i(nx, ny) && !seen[ny as usize * w + nx as usize] {
                        seen[ny as usize * w + nx as usize] = true;
                        comp.push((nx as usize, ny as usize));
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn canny_is_binary_and_every_edge_reaches_a_seed(
        levels in proptest::collection::vec(any::<u8>(), 4..40),
        cell in 3usize..12,
        low in 0.02f64..0.2,
        span in 0.0f64..0.3,
        sigma in 0.6f64..2.0,
    ) {
        let img = blocky(40, 32, cell, &levels);
        let high = (low + span).min(1.0);
        let e = canny(&img, &HysteresisParams::new(low, high, sigma).unwrap());
        prop_assert!(e.prob().iter().all(|&v| v == 0.0 || v == 1.0));
        let mag = gradient_magnitude(&img, sigma);
        let kept = BinaryMask::from_fn(40, 32, |x, y| e.get(x, y) == 1.0);
        for comp in components8(&kept) {
            prop_assert!(comp.iter().all(|&(x, y)| mag[y * 40 + x] >= low));
            prop_assert!(comp.iter().any(|&(x, y)| mag[y * 40 + x] >= high));
        }
    }

    #[test]
    fn ramps_and_steps_give_one_pixel_wide_edges(lo in 0u8..100, rise in 60u8..150, width in 1usize..12, col in 10usize..30) {
        let w = 48;
        let data: Vec<u8> = (0..w * 20)
            .map(|i| {
                let x = i % w;
                let t = (x as f64 - col as f64).clamp(0.0, width as f64) / width as f64;
                (lo as f64 + t * rise as f64).round() as u8
            })
            .collect();
        let img = GrayImage::new(w, 20, data).unwrap();
        let e = canny(&img, &HysteresisParams::new(0.01, 0.02, 1.0).unwrap());
        // Rounding ripples on a wide ramp may leave separate maxima, never adjacent ones.
        for y in 0..20 {
            for x in 1..w {
                prop_assert!(!(e.get(x - 1, y) == 1.0 && e.get(x, y) == 1.0), "row {} is two pixels wide at {}", y, x);
            }
            if width <= 2 {
                prop_assert!((0..w).filter(|&x| e.get(x, y) == 1.0).count() <= 1);
            }
        }
    }

    // 0.185 per unit of R-B difference; below 6 rounding can hide it.
    #[test]
    fn gray_is_sensitive_to_swapping_red_and_blue(r in any::<u8>(), g in any::<u8>(), b in any::<u8>()) {
        let px = |c: [u8; 3]| to_gray(&RgbImage::new(1, 1, c.to_vec()).unwrap()).get(0, 0);
        let a = px([r, g, b]);
        prop_assert_eq!(a, px([r, g, b]));
        if r == b {
            prop_assert_eq!(a, px([b, g, r]));
        } else if r.abs_diff(b) >= 6 {
            prop_assert_ne!(a, px([b, g, r]));
        }
    }

    #[test]
    fn extraction_tiles_the_frame(
        bits in proptest::collection::vec(proptest::bool::weighted(0.12), 48 * 40),
        use_crop in any::<bool>(),
        cx in 0usize..20,
        cy in 0usize..16,
    ) {
        let (w, h) = (48, 40);
        let edges = EdgeMap::new(w, h, bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()).unwrap();
        let crop = BinaryMask::from_fn(w, h, |x, y| x >= cx && y >= cy && x < cx + 26 && y < cy + 22);
        let cropland = use_crop.then_some(&crop);
        let params = ExtractionParams::<f64>::default();
        let parcels = extract_parcels(&edges, cropland, &params).unwrap();
        let cl = clean_edges(&edges, cropland, &params).unwrap();

        let mut owner = vec![0usize; w * h];
        for (k, p) in parcels.iter().enumerate() {
            for (x, y) in p.pixels() {
                prop_assert_eq!(owner[y * w + x], 0, "parcels overlap at ({}, {})", x, y);
                owner[y * w + x] = k + 1;
                if let Some(c) = cropland {
                    prop_assert!(c.get(x, y));
                }
            }
        }
        // Whatever no parcel owns is barrier or part of a region too small to keep.
        let (labels, _) = label_components4(&cl.barrier.complement());
        let small_region = |l: u32| {
            let core = (0..w * h)
                .filter(|&i| labels[i] == l && !cl.binary.bits()[i] && !cl.closed.bits()[i])
                .count();
            core < params.min_component_area
        };
        for i in 0..w * h {
            if owner[i] == 0 {
                prop_assert!(cl.barrier.bits()[i] || small_region(labels[i]));
            }
        }
    }
}

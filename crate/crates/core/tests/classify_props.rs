use fieldseg::classify::{
    cross_validate, extract_features, predict, train_forest, FeatureVector, ForestModel, ForestParams, Label,
    LabeledParcel, COLOR_LEN, FEATURE_LEN, SHAPE_LEN,
};
use fieldseg::geometry::{Parcel, ParcelId, Stage};
use fieldseg::raster::{BinaryMask, RgbImage};
use proptest::prelude::*;

fn dataset_strategy() -> impl Strategy<Value = Vec<LabeledParcel>> {
    proptest::collection::vec((any::<bool>(), proptest::collection::vec(0.0f64..1.0, 6)), 12..40).prop_map(|rows| {
        rows.into_iter()
            .map(|(ag, head)| {
                let mut v = vec![0.0; FEATURE_LEN];
                v[..6].copy_from_slice(&head);
                // One informative feature with noise from the others.
                v[0] = if ag { 0.3 + 0.4 * head[0] } else { 0.6 * head[0] };
                LabeledParcel {
                    features: FeatureVector(v),
                    label: if ag { Label::Ag } else { Label::NonAg },
                }
            })
            .collect()
    })
}

fn small_forest() -> ForestParams {
    ForestParams {
        n_trees: 9,
        max_depth: 6,
        ..ForestParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn training_is_a_pure_function_of_data_and_seed(data in dataset_strategy(), seed in any::<u64>()) {
        let a = train_forest(&data, &small_forest(), seed).unwrap();
        let b = train_forest(&data, &small_forest(), seed).unwrap();
        prop_assert_eq!(&a, &b);
        let json = serde_json::to_string(&a).unwrap();
        let back: ForestModel = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(&back, &a);
        for d in &data {
            let p = predict(&a, &d.features).unwrap();
            prop_assert_eq!(p, predict(&back, &d.features).unwrap());
            prop_assert!(p.confidence >= 0.5 && p.confidence <= 1.0);
            let votes = p.confidence * a.trees.len() as f64;
            prop_assert!((votes - votes.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn cross_validation_is_repeatable(data in dataset_strategy(), seed in any::<u64>()) {
        let a = cross_validate(&data, 3, &small_forest(), seed).unwrap();
        let b = cross_validate(&data, 3, &small_forest(), seed).unwrap();
        prop_assert_eq!(a.total, b.total);
        prop_assert_eq!(a.total.total(), data.len());
    }

    #[test]
    fn texture_ignores_a_uniform_brightness_shift(
        pix in proptest::collection::vec(0u8..200, 30 * 30),
        offset in 1u8..55,
        w in 12usize..30,
        h in 12usize..30,
    ) {
        let img = |shift: u8| {
            let data = pix.iter().flat_map(|&v| [v + shift; 3]).collect();
            RgbImage::new(30, 30, data).unwrap()
        };
        let p = Parcel::from_mask(&BinaryMask::full(w, h), (0, 0), ParcelId::root(1), Stage::Extracted).unwrap();
        let a = extract_features(&p, &img(0)).unwrap();
        let b = extract_features(&p, &img(offset)).unwrap();
        prop_assert_eq!(a.texture(), b.texture());
        prop_assert_eq!(a.shape(), b.shape());
        prop_assert_eq!(a.values().len(), SHAPE_LEN + COLOR_LEN + a.texture().len());
    }
}

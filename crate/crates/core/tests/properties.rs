//! Property tests for the algebraic invariants of the segmentation and
//! fusion stages.

use proptest::prelude::*;

use duotact_core::eval::match_contacts;
use duotact_core::fuse::allocate_forces;
use duotact_core::grid::ConductivityImage;
use duotact_core::segment::{
    binarize, morph_close, morph_open, normalize, refine_mask, BinaryMask, StructuringElement,
};

fn mask_strategy(w: usize, h: usize) -> impl Strategy<Value = BinaryMask> {
    prop::collection::vec(prop::bool::weighted(0.45), w * h)
        .prop_map(move |bits| BinaryMask::from_bits(w, h, bits).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn allocation_conserves_total_and_is_scale_invariant(
        sums in prop::collection::vec(0.0_f64..10.0, 1..6),
        total in 0.01_f64..12.0,
        scale in 0.001_f64..1000.0,
    ) {
        prop_assume!(sums.iter().sum::<f64>() > 0.0);
        let forces = allocate_forces(&sums, total).unwrap();
        let sum: f64 = forces.iter().sum();
        prop_assert!((sum - total).abs() <= 1e-12 * total);

        let scaled: Vec<f64> = sums.iter().map(|s| s * scale).collect();
        let forces2 = allocate_forces(&scaled, total).unwrap();
        for (a, b) in forces.iter().zip(&forces2) {
            prop_assert!((a - b).abs() <= 1e-9 * total);
        }

        // Monotone: a strictly larger sum never receives less force.
        for i in 0..sums.len() {
            for j in 0..sums.len() {
                if sums[i] > sums[j] {
                    prop_assert!(forces[i] >= forces[j]);
                }
            }
        }
    }

    #[test]
    fn opening_closing_properties(mask in mask_strategy(24, 24)) {
        let se = StructuringElement::disk(2).unwrap();
        let opened = morph_open(&mask, &se);
        let closed = morph_close(&mask, &se);
        prop_assert_eq!(morph_open(&opened, &se), opened.clone());
        prop_assert_eq!(morph_close(&closed, &se), closed.clone());
        prop_assert!(opened.subset_of(&mask));
        prop_assert!(mask.subset_of(&closed));
        let refined = refine_mask(&mask, &se);
        prop_assert_eq!(refine_mask(&refined, &se), refined);
    }

    #[test]
    fn normalize_lands_in_unit_interval(
        values in prop::collection::vec(-100.0_f64..100.0, 64),
    ) {
        let img = ConductivityImage::from_values(8, 8, 10.0, values).unwrap();
        let out = normalize(&img);
        if out.degenerate {
            prop_assert!(out.image.values().iter().all(|&v| v == 0.0));
        } else {
            let (lo, hi) = out.image.min_max();
            prop_assert!(lo >= 0.0 && hi <= 1.0);
            prop_assert!(lo == 0.0 && hi == 1.0);
        }
    }

    #[test]
    fn binarize_partition_is_exhaustive(
        values in prop::collection::vec(0.0_f64..1.0, 64),
        threshold in 0.0_f64..1.0,
    ) {
        let img = ConductivityImage::from_values(8, 8, 10.0, values).unwrap();
        let mask = binarize(&img, threshold);
        for (v, b) in img.values().iter().zip(mask.bits()) {
            prop_assert_eq!(*b, *v >= threshold);
        }
    }

    #[test]
    fn matching_cost_is_permutation_invariant(
        points in prop::collection::vec((-5.0_f64..5.0, -5.0_f64..5.0), 1..6),
        truth in prop::collection::vec((-5.0_f64..5.0, -5.0_f64..5.0), 1..6),
        seed in 0u64..1000,
    ) {
        let base = match_contacts(&points, &truth);
        // Any rotation of the estimate order keeps the optimal cost.
        let k = (seed as usize) % points.len();
        let mut rotated = points.clone();
        rotated.rotate_left(k);
        let other = match_contacts(&rotated, &truth);
        prop_assert!((base.total_distance - other.total_distance).abs() < 1e-9);
        prop_assert_eq!(base.pairs.len(), points.len().min(truth.len()));
    }
}

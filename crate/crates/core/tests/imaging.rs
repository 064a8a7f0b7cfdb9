mod common;

use proptest::prelude::*;
use scenepaint_core::imaging::{
    classify_unknown, combine_final, dilate, erode, interp_inpaint, misalignment_mask, morphology,
    nearest_color_fill, psnr, ssim, EdgeParams, MorphOp,
};
use scenepaint_core::raster::{BitMask, DepthMap, RgbImage};

use common::*;

#[test]
fn step_scene_misalignment_matches_the_oracle_pipeline() {
    let p = EdgeParams::default();
    let (img, depth) = step_scene(64, 48, 20, 50);
    let got = misalignment_mask(&img, &depth, &p);
    assert_eq!(got, oracle_misalignment(&img, &depth, &p));
    assert!(got.any());
    // A vertical band around the shared step; the far color edge contributes nothing.
    for y in 0..48 {
        for x in 0..64 {
            assert_eq!(*got.get(x, y), *got.get(x, 0));
        }
    }
    assert!((0..64).filter(|&x| *got.get(x, 0)).all(|x| (x as i64 - 20).abs() <= 6));
    assert!(!got.get(50, 10));
}

#[test]
fn laplacian_matches_hand_computation_with_misses() {
    let depth = DepthMap::from_fn(24, 16, |x, y| match (x, y) {
        (x, _) if x > 18 => f64::INFINITY,
        (x, y) => 1.0 + 0.1 * x as f64 + if (5..9).contains(&y) && (4..10).contains(&x) { 0.4 } else { 0.0 },
    });
    let p = EdgeParams::default();
    assert_eq!(
        scenepaint_core::imaging::laplacian_edges(&depth, &p),
        oracle_laplacian_edges(&depth, p.laplacian_threshold)
    );
}

#[test]
fn morphology_matches_set_oracle_on_random_masks() {
    let mut rng = Lcg(11);
    for i in 0..200 {
        let density = [0.02, 0.1, 0.3, 0.6, 0.9][i % 5];
        let m = random_mask(64, 64, density, &mut rng);
        let r = (i % 7) as u32;
        let d = oracle_dilate(&m, r);
        assert_eq!(dilate(&m, r), d, "dilate mask {i} r {r}");
        assert_eq!(erode(&m, r), oracle_erode(&m, r), "erode mask {i} r {r}");
        let closing = oracle_erode(&d, r);
        assert_eq!(morphology(&morphology(&m, MorphOp::Dilate, r), MorphOp::Erode, r), closing);
        assert!(m.is_subset_of(&closing));
    }
}

#[test]
fn nearest_fill_matches_brute_force_on_seed_layouts() {
    let mut rng = Lcg(5);
    for layout in 0..10 {
        let (img, unknown) = seeded_layout(48, 40, 1 + layout * 3, &mut rng);
        assert_eq!(nearest_color_fill(&img, &unknown).unwrap(), oracle_nearest_fill(&img, &unknown), "layout {layout}");
    }
    // Two seeds at opposite corners, including the tie diagonal.
    let img = RgbImage::from_fn(17, 17, |x, y| if (x, y) == (0, 0) { [255, 0, 0] } else { [0, 0, 255] });
    let mut unknown = BitMask::filled(17, 17, true);
    unknown.set(0, 0, false);
    unknown.set(16, 16, false);
    assert_eq!(nearest_color_fill(&img, &unknown).unwrap(), oracle_nearest_fill(&img, &unknown));
}

#[test]
fn telea_fills_a_strip_across_a_ramp() {
    let ramp = RgbImage::from_fn(64, 32, |x, _| [(x * 4) as u8, 100, (255 - x * 4) as u8]);
    let strip = BitMask::from_fn(64, 32, |_, y| (14..17).contains(&y));
    let mut holed = ramp.clone();
    for (x, y) in strip.coords() {
        holed.set(x, y, [0, 0, 0]);
    }
    let out = interp_inpaint(&holed, &strip).unwrap();
    let worst = strip
        .coords()
        .flat_map(|(x, y)| (0..3).map(move |c| (x, y, c)))
        .map(|(x, y, c)| (out.get(x, y)[c] as i32 - ramp.get(x, y)[c] as i32).abs())
        .max()
        .unwrap();
    assert!(worst <= 2, "max error {worst}");

    let gray = RgbImage::filled(20, 20, [77, 77, 77]);
    let hole = BitMask::from_fn(20, 20, |x, y| (6..13).contains(&x) && (6..13).contains(&y));
    assert_eq!(interp_inpaint(&gray, &hole).unwrap(), gray);
}

#[test]
fn checkerboard_unknowns_are_sparse_and_counts_match() {
    let checker = BitMask::from_fn(32, 32, |x, y| (x + y) % 2 == 0);
    let c = classify_unknown(&checker, 5, 0.4).unwrap();
    assert_eq!(c.sparse, checker);
    assert!(!c.dense.any());

    let mut rng = Lcg(9);
    let unknown = random_mask(40, 30, 0.6, &mut rng);
    let c = classify_unknown(&unknown, 7, 0.3).unwrap();
    for (x, y) in unknown.coords() {
        let (mut known, mut total) = (0, 0);
        for yy in y.saturating_sub(3)..(y + 4).min(30) {
            for xx in x.saturating_sub(3)..(x + 4).min(40) {
                total += 1;
                known += !*unknown.get(xx, yy) as usize;
            }
        }
        assert_eq!(*c.sparse.get(x, y), known as f64 >= 0.3 * total as f64, "pixel {x},{y}");
    }
    assert_eq!(c.sparse.or(&c.dense), unknown);
    assert!(!c.sparse.and(&c.dense).any());
}

#[test]
fn inverted_channel_drops_ssim() {
    let a = RgbImage::from_fn(48, 48, |x, y| {
        let v = if ((x / 6) + (y / 6)) % 2 == 0 { 40 } else { 210 };
        [v, (x * 5) as u8, (y * 5) as u8]
    });
    let b = a.map(|p| [255 - p[0], p[1], p[2]]);
    let s = ssim(&a, &b).unwrap();
    assert!(s < 0.5, "ssim {s}");
    let off = a.map(|p| [p[0].saturating_add(16), p[1].saturating_add(16), p[2].saturating_add(16)]);
    let dim = a.map(|p| [p[0].min(239), p[1].min(239), p[2].min(239)]);
    let off = dim.zip_map(&off, |d, _| [d[0] + 16, d[1] + 16, d[2] + 16]);
    let all = BitMask::filled(48, 48, true);
    assert!((psnr(&dim, &off, &all).unwrap() - 20.0 * (255.0f64 / 16.0).log10()).abs() < 1e-9);
}

fn image_strategy(w: usize, h: usize) -> impl Strategy<Value = RgbImage> {
    prop::collection::vec(any::<[u8; 3]>(), w * h).prop_map(move |v| RgbImage::from_vec(w, h, v))
}

fn mask_strategy(w: usize, h: usize) -> impl Strategy<Value = BitMask> {
    prop::collection::vec(any::<bool>(), w * h).prop_map(move |v| BitMask::from_vec(w, h, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dilation_and_erosion_are_monotone(a in mask_strategy(24, 20), b in mask_strategy(24, 20), r in 0u32..5) {
        let sub = a.and(&b);
        prop_assert!(sub.is_subset_of(&dilate(&sub, r)));
        prop_assert!(erode(&sub, r).is_subset_of(&sub));
        prop_assert!(dilate(&sub, r).is_subset_of(&dilate(&a, r)));
        prop_assert!(erode(&sub, r).is_subset_of(&erode(&a, r)));
    }

    #[test]
    fn fills_leave_known_pixels_alone(img in image_strategy(20, 16), unknown in mask_strategy(20, 16)) {
        prop_assume!(unknown.not().any());
        let near = nearest_color_fill(&img, &unknown).unwrap();
        let telea = interp_inpaint(&img, &unknown).unwrap();
        for (x, y) in unknown.not().coords() {
            prop_assert_eq!(near.get(x, y), img.get(x, y));
            prop_assert_eq!(telea.get(x, y), img.get(x, y));
        }
    }

    #[test]
    fn combine_final_partitions_the_image(unknown in mask_strategy(16, 16), pick in mask_strategy(16, 16)) {
        let sparse = unknown.and(&pick);
        let w = RgbImage::filled(16, 16, [1, 0, 0]);
        let i = RgbImage::filled(16, 16, [0, 1, 0]);
        let p = RgbImage::filled(16, 16, [0, 0, 1]);
        let out = combine_final(&w, &i, &p, &unknown, &sparse).unwrap();
        for y in 0..16 {
            for x in 0..16 {
                let expect = if !*unknown.get(x, y) { [1, 0, 0] } else if *sparse.get(x, y) { [0, 1, 0] } else { [0, 0, 1] };
                prop_assert_eq!(*out.get(x, y), expect);
            }
        }
    }

    #[test]
    fn misalignment_ignores_uniform_brightness(col in 8usize..40, shift in 1u8..30, dstep in 0.2f64..2.0) {
        let p = EdgeParams::default();
        let img = RgbImage::from_fn(48, 24, |x, y| if x < col { [40, 60, (y * 3) as u8] } else { [180, 150, (y * 3) as u8] });
        let depth = DepthMap::from_fn(48, 24, |x, _| if x < col + 2 { 2.0 } else { 2.0 + dstep });
        let bright = img.map(|c| [c[0] + shift, c[1] + shift, c[2] + shift]);
        prop_assert_eq!(misalignment_mask(&img, &depth, &p), misalignment_mask(&bright, &depth, &p));
        prop_assert_eq!(misalignment_mask(&img, &depth, &p), oracle_misalignment(&img, &depth, &p));
    }

    #[test]
    fn ssim_is_symmetric(a in image_strategy(16, 16), b in image_strategy(16, 16)) {
        prop_assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() <= 1e-12);
    }
}

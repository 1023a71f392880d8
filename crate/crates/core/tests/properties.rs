use proptest::prelude::*;
use ssc_core::control::{Controller, Schedule, StyleMode};
use ssc_core::field::decompose;
use ssc_core::latent::{foreground_energy, init_state};
use ssc_core::layout::{rasterize_mask, LayoutBox, LayoutPage, Role};
use ssc_core::render::contrast_ratio;
use ssc_core::style::inject_state;
use ssc_core::suite::standard_scene;
use ssc_core::{
    BackingLatent, ExecMode, ForegroundMask, Grid, LatentState, StyleBank, StyleDirection, TokenMatrix,
};

fn unit(v: Vec<f64>) -> Option<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (n > 1e-3).then(|| v.into_iter().map(|x| x / n).collect())
}

prop_compose! {
    fn layout_box()(w in 0.01f64..0.6, h in 0.01f64..0.6, fx in 0.0f64..1.0, fy in 0.0f64..1.0, text in any::<bool>())
        -> LayoutBox {
        LayoutBox {
            role: if text { Role::Text } else { Role::Figure },
            x: fx * (1.0 - w),
            y: fy * (1.0 - h),
            w,
            h,
            fill: [0.0; 3],
        }
    }
}

fn page(boxes: Vec<LayoutBox>) -> LayoutPage {
    LayoutPage {
        aspect: [1.0, 1.0],
        boxes,
    }
}

fn rgb() -> impl Strategy<Value = [f64; 3]> {
    [0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn init_is_deterministic(seed in any::<u64>(), page_id in 0u64..1000, lambda in 0.0f64..=1.0) {
        let grid = Grid::new(5, 4).unwrap();
        let mask = ForegroundMask::from_bits((0..20).map(|k| k % 3 == 0).collect());
        let b = BackingLatent::zeros(3);
        let a = init_state(grid, 3, seed, page_id, &mask, &b, lambda).unwrap();
        let c = init_state(grid, 3, seed, page_id, &mask, &b, lambda).unwrap();
        prop_assert_eq!(a, c);
    }

    #[test]
    fn energy_is_non_negative_and_additive(seed in any::<u64>(), split in proptest::collection::vec(any::<bool>(), 24)) {
        let grid = Grid::new(4, 6).unwrap();
        let full = ForegroundMask::from_bits(vec![true; 24]);
        let state = init_state(grid, 4, seed, 0, &ForegroundMask::empty(24), &BackingLatent::zeros(4), 0.0).unwrap();
        let b = BackingLatent(vec![0.3, -0.1, 0.0, 0.2]);
        let left = ForegroundMask::from_bits(split.clone());
        let right = ForegroundMask::from_bits(split.iter().map(|x| !x).collect());
        let (e, el, er) = (
            foreground_energy(&state, &full, &b).unwrap(),
            foreground_energy(&state, &left, &b).unwrap(),
            foreground_energy(&state, &right, &b).unwrap(),
        );
        prop_assert!(el >= 0.0 && er >= 0.0);
        prop_assert!((e - el - er).abs() <= 1e-12 * e.max(1.0));
    }

    #[test]
    fn decompose_is_idempotent(rows in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 6), 1..8),
                               raw in proptest::collection::vec(-1.0f64..1.0, 6)) {
        let Some(s) = unit(raw) else { return Ok(()) };
        let v = TokenMatrix::from_rows(&rows).unwrap();
        let (par, perp) = decompose(&v, &s).unwrap();
        let (par2, perp2) = decompose(&par, &s).unwrap();
        let (par3, _) = decompose(&perp, &s).unwrap();
        for k in 0..v.rows() {
            for j in 0..6 {
                prop_assert!((par2.row(k)[j] - par.row(k)[j]).abs() <= 1e-12);
                prop_assert!(perp2.row(k)[j].abs() <= 1e-12);
                prop_assert!(par3.row(k)[j].abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn enlarging_a_box_keeps_mask_bits(boxes in proptest::collection::vec(layout_box(), 1..5), grow in 0.0f64..0.3) {
        let grid = Grid::new(13, 9).unwrap();
        let before = rasterize_mask(&page(boxes.clone()), grid, 0.5).unwrap();
        let mut bigger = boxes;
        let b = &mut bigger[0];
        b.w = (b.w + grow).min(1.0 - b.x);
        b.h = (b.h + grow).min(1.0 - b.y);
        let after = rasterize_mask(&page(bigger), grid, 0.5).unwrap();
        for k in 0..grid.len() {
            prop_assert!(!before.bits()[k] || after.bits()[k]);
        }
    }

    #[test]
    fn mask_ignores_box_order(boxes in proptest::collection::vec(layout_box(), 0..6)) {
        let grid = Grid::new(16, 12).unwrap();
        let a = rasterize_mask(&page(boxes.clone()), grid, 0.5).unwrap();
        let mut rev = boxes;
        rev.reverse();
        prop_assert_eq!(a, rasterize_mask(&page(rev), grid, 0.5).unwrap());
    }

    #[test]
    fn refined_grid_covers_the_same_box(b in layout_box(), f in 1usize..4) {
        // each coarse cell splits into f x f fine cells; a coarse cell is set
        // iff one of its fine cells is
        let coarse = Grid::new(8, 6).unwrap();
        let fine = Grid::new(8 * f, 6 * f).unwrap();
        let p = page(vec![b]);
        let mc = rasterize_mask(&p, coarse, 0.5).unwrap();
        let mf = rasterize_mask(&p, fine, 0.5).unwrap();
        for r in 0..coarse.h {
            for c in 0..coarse.w {
                let any = (0..f).any(|i| (0..f).any(|j| mf.bits()[(r * f + i) * fine.w + c * f + j]));
                prop_assert_eq!(mc.bits()[r * coarse.w + c], any, "cell ({}, {})", r, c);
            }
        }
    }

    #[test]
    fn contrast_is_symmetric_and_bounded(a in rgb(), b in rgb()) {
        let (x, y) = (contrast_ratio(a, b), contrast_ratio(b, a));
        prop_assert_eq!(x, y);
        prop_assert!((1.0..=21.0 + 1e-12).contains(&x));
    }

    #[test]
    fn injection_commutes_with_token_permutation(seed in any::<u64>(), lambda in 0.0f64..=1.0, raw in proptest::collection::vec(-1.0f64..1.0, 3)) {
        let Some(s) = unit(raw) else { return Ok(()) };
        let grid = Grid::new(1, 6).unwrap();
        let state = init_state(grid, 3, seed, 0, &ForegroundMask::empty(6), &BackingLatent::zeros(3), 0.0).unwrap();
        let dir = StyleDirection::new("p", s, lambda).unwrap();
        let perm = [3usize, 0, 5, 1, 4, 2];
        let permute = |st: &LatentState| {
            let rows: Vec<Vec<f64>> = perm.iter().map(|&k| st.tokens.row(k).to_vec()).collect();
            LatentState::new(TokenMatrix::from_rows(&rows).unwrap(), st.grid, st.t).unwrap()
        };
        let a = permute(&inject_state(&state, &dir).unwrap());
        let b = inject_state(&permute(&state), &dir).unwrap();
        prop_assert_eq!(a.tokens, b.tokens);
    }

    #[test]
    fn bank_round_trip_keeps_unit_norms(d in 2usize..24, seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let bank = StyleBank::default_bank(d, seed, lambda).unwrap();
        let back = StyleBank::from_json(&bank.to_json().unwrap()).unwrap();
        prop_assert_eq!(&bank, &back);
        for e in back.entries() {
            let n = e.direction().iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn parallel_and_sequential_runs_agree(seed in any::<u64>(), steps in 1usize..30) {
        let grid = Grid::new(8, 6).unwrap();
        let d = 6;
        let scene = standard_scene(d, 7).unwrap();
        let mask = ForegroundMask::from_bits((0..grid.len()).map(|k| k % 4 == 1).collect());
        let b = BackingLatent::zeros(d);
        let init = init_state(grid, d, seed, 0, &mask, &b, 0.5).unwrap();
        let mut ctl = Controller::new(Schedule::new(steps, StyleMode::Velocity, 1.0).unwrap(), 0.5, d).unwrap();
        let seq = ctl.run(&scene.field, &mask, None, &init).unwrap();
        ctl.exec = ExecMode::Parallel;
        let par = ctl.run(&scene.field, &mask, None, &init).unwrap();
        prop_assert_eq!(seq, par);
    }

    #[test]
    fn relaxation_never_raises_energy(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let grid = Grid::new(6, 5).unwrap();
        let d = 4;
        let scene = standard_scene(d, 3).unwrap();
        let mask = ForegroundMask::from_bits((0..grid.len()).map(|k| k % 3 != 0).collect());
        let b = BackingLatent::zeros(d);
        let init = init_state(grid, d, seed, 1, &mask, &b, lambda).unwrap();
        let ctl = Controller::new(Schedule::new(25, StyleMode::Velocity, 1.0).unwrap(), lambda, d).unwrap();
        let (_, rec) = ctl.run(&scene.field, &mask, None, &init).unwrap();
        for e in &rec.entries {
            prop_assert!(e.energy_after <= e.energy_before);
        }
    }
}

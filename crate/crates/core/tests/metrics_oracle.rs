mod common;

use common::{mask_to_map, oracle, random_grid, random_mask, to_map};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saldissect::metrics::{assoc, nmm, nss, resize_map, spearman};
use saldissect::Error;

fn close(a: Option<f64>, b: Result<f64, Error>) -> bool {
    match (a, b) {
        (Some(x), Ok(y)) => (x - y).abs() <= 1e-6,
        (None, Err(_)) => true,
        _ => false,
    }
}

#[test]
fn metrics_match_brute_force_on_random_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..500 {
        let (h, w) = (rng.random_range(1..=32), rng.random_range(1..=32));
        let channels = rng.random_range(1..=8);
        let fix = random_mask(&mut rng, h, w, 0.1);
        let mask = random_mask(&mut rng, h, w, 0.3);
        let (fm, mm) = (mask_to_map(&fix), mask_to_map(&mask));
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..channels {
            let g = random_grid(&mut rng, h, w);
            let m = to_map(&g);
            assert!(close(oracle::nss(&g, &fix), nss(&m, &fm)), "nss case {case}");
            assert!(close(oracle::nmm(&g, &mask), nmm(&m, &mm)), "nmm case {case}");
            assert!(close(oracle::assoc(&g, &fix, &mask), assoc(&m, &fm, &mm)), "assoc case {case}");
            xs.push(g[0][0]);
            ys.push(g[h - 1][w - 1]);
        }
        if xs.len() >= 3 {
            assert!(close(oracle::spearman(&xs, &ys), spearman(&xs, &ys)), "spearman case {case}");
        }
    }
}

#[test]
fn spearman_matches_brute_force_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.random_range(3..40);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        assert!(close(oracle::spearman(&xs, &ys), spearman(&xs, &ys)));
    }
}

#[test]
fn resize_matches_pointwise_bilinear() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let (h, w) = (rng.random_range(1..12), rng.random_range(1..12));
        let g = random_grid(&mut rng, h, w);
        let out = (rng.random_range(1..30), rng.random_range(1..30));
        let expected = oracle::bilinear(&g, out);
        let got = resize_map(&to_map(&g), out);
        for (r, row) in expected.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                assert!((got.get(r, c) - v).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn nss_is_affine_invariant_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let (h, w) = (rng.random_range(2..=32), rng.random_range(2..=32));
        let m = to_map(&random_grid(&mut rng, h, w));
        let f = mask_to_map(&random_mask(&mut rng, h, w, 0.1));
        let a = rng.random_range(0.01..100.0);
        let b = rng.random_range(-100.0..100.0);
        let base = nss(&m, &f).unwrap();
        let moved = nss(&m.affine(a, b).unwrap(), &f).unwrap();
        assert!((base - moved).abs() < 1e-9, "{base} vs {moved}");
    }
}

#[test]
fn assoc_with_full_mask_is_bitwise_nss() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let (h, w) = (rng.random_range(1..=20), rng.random_range(1..=20));
        let g = random_grid(&mut rng, h, w);
        let m = to_map(&g);
        let f = mask_to_map(&random_mask(&mut rng, h, w, 0.2));
        let ones = saldissect::DenseMap::filled(h, w, 1.0);
        match (nss(&m, &f), assoc(&m, &f, &ones)) {
            (Ok(a), Ok(b)) => assert_eq!(a.to_bits(), b.to_bits()),
            (Err(_), Err(_)) => {}
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn indicator_nmm_has_closed_form() {
    for (n, k) in [(16usize, 4usize), (64, 1), (100, 25), (49, 48), (10, 3)] {
        let side = (n as f64).sqrt() as usize;
        let (h, w) = if side * side == n { (side, side) } else { (1, n) };
        let pred = saldissect::DenseMap::from_fn(h, w, |(r, c)| f64::from(r * w + c < k)).unwrap();
        let expected = (((n - k) as f64) / k as f64).sqrt();
        assert!((nmm(&pred, &pred).unwrap() - expected).abs() < 1e-9);
    }
}

proptest! {
    #[test]
    fn nss_matches_oracle(seed in any::<u64>(), h in 1usize..10, w in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_grid(&mut rng, h, w);
        let f = random_mask(&mut rng, h, w, 0.3);
        prop_assert!(close(oracle::nss(&g, &f), nss(&to_map(&g), &mask_to_map(&f))));
    }

    #[test]
    fn spearman_is_bounded_and_symmetric(xs in prop::collection::vec(-5.0f64..5.0, 3..30), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ys: Vec<f64> = xs.iter().map(|_| rng.random_range(-5.0..5.0)).collect();
        if let (Ok(a), Ok(b)) = (spearman(&xs, &ys), spearman(&ys, &xs)) {
            prop_assert!((-1.0..=1.0).contains(&a));
            prop_assert_eq!(a, b);
        }
    }
}

use std::time::Instant;

use saldissect::bms::{bms_saliency, center_prior, random_map, BmsConfig};
use saldissect::metrics::nmm;
use saldissect::stimgen::{standard_suite, PopOutKind};

#[test]
fn bms_beats_baselines_on_the_suite() {
    let start = Instant::now();
    let suite = standard_suite(0).unwrap();
    let cfg = BmsConfig::default();
    let mut bms = Vec::new();
    let mut prior = Vec::new();
    let mut random = Vec::new();
    for item in &suite {
        let mask = &item.stimulus.target_mask;
        let (h, w) = mask.dims();
        let b = bms_saliency(&item.stimulus.image, &cfg).unwrap();
        assert!(!b.degenerate, "{}", item.id);
        if item.kind == PopOutKind::Color {
            let distractor = item.spec.distractor_params.color;
            let (mut on_target, mut on_distractors) = ((0.0, 0), (0.0, 0));
            for (x, y, px) in item.stimulus.image.enumerate_pixels() {
                let v = b.map.get(y as usize, x as usize);
                if mask.get(y as usize, x as usize) > 0.0 {
                    on_target = (on_target.0 + v, on_target.1 + 1);
                } else if px.0 == distractor {
                    on_distractors = (on_distractors.0 + v, on_distractors.1 + 1);
                }
            }
            let t = on_target.0 / on_target.1 as f64;
            let d = on_distractors.0 / on_distractors.1 as f64;
            assert!(t > d, "{}: target {t} vs distractors {d}", item.id);
        }
        bms.push((item.kind, nmm(&b.map, mask).unwrap()));
        prior.push(nmm(&center_prior(h, w).unwrap(), mask).unwrap());
        let r: f64 = (0..10).map(|s| nmm(&random_map(h, w, s).unwrap(), mask).unwrap()).sum::<f64>() / 10.0;
        random.push(r);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let bms_all: Vec<f64> = bms.iter().map(|x| x.1).collect();
    for kind in PopOutKind::ALL {
        let sub: Vec<f64> = bms.iter().filter(|x| x.0 == kind).map(|x| x.1).collect();
        eprintln!("{:<12} bms {:.3}", kind.label(), mean(&sub));
    }
    eprintln!(
        "bms {:.3} prior {:.3} random {:.3} in {:?}",
        mean(&bms_all),
        mean(&prior),
        mean(&random),
        start.elapsed()
    );
    assert!(mean(&bms_all) > mean(&prior));
    assert!(mean(&bms_all) > mean(&random));
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saldissect::decoder::{loss_gradient, nss_loss, DecoderWeights};
use saldissect::{ActivationStack, DenseMap};

const H: f64 = 1e-4;

struct Fixture {
    features: ActivationStack,
    weights: DecoderWeights,
    fixations: DenseMap,
}

fn fixture(rng: &mut ChaCha8Rng) -> Fixture {
    let c = rng.random_range(1..=8);
    let native = (rng.random_range(2..=8), rng.random_range(2..=8));
    let image = (rng.random_range(2..=8), rng.random_range(2..=8));
    let channels = (0..c)
        .map(|_| DenseMap::from_fn(native.0, native.1, |_| rng.random_range(-1.0..1.0)).unwrap())
        .collect();
    let w = (0..c).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut fixations = DenseMap::from_fn(image.0, image.1, |_| f64::from(rng.random_bool(0.25))).unwrap();
    if fixations.count_nonzero() == 0 {
        fixations = DenseMap::from_fn(image.0, image.1, |p| f64::from(p == (0, 0))).unwrap();
    }
    Fixture {
        features: ActivationStack::new("g", "l", channels).unwrap(),
        weights: DecoderWeights::new(w, rng.random_range(-1.0..1.0)).unwrap(),
        fixations,
    }
}

fn loss(f: &Fixture, w: &[f64], b: f64) -> f64 {
    let weights = DecoderWeights::new(w.to_vec(), b).unwrap();
    nss_loss(&f.features, &weights, &f.fixations, f.fixations.dims()).unwrap()
}

/// Relative error with an absolute floor so components that vanish
/// analytically are compared on an absolute scale.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 100 {
        let f = fixture(&mut rng);
        let size = f.fixations.dims();
        let Ok(g) = loss_gradient(&f.features, &f.weights, &f.fixations, size) else {
            continue;
        };
        assert_eq!(g.db, 0.0);
        let w = f.weights.w().to_vec();
        for j in 0..w.len() {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[j] += H;
            down[j] -= H;
            let numeric = (loss(&f, &up, f.weights.b()) - loss(&f, &down, f.weights.b())) / (2.0 * H);
            worst = worst.max(rel_err(g.dw[j], numeric));
        }
        let db = (loss(&f, &w, f.weights.b() + H) - loss(&f, &w, f.weights.b() - H)) / (2.0 * H);
        assert!(db.abs() < 1e-8, "{db}");
        checked += 1;
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

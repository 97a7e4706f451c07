mod support;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semg_core::dnn::Network;
use semg_core::lstm::LstmParams;
use support::fd;

#[test]
fn dnn_gradient_matches_finite_differences() {
    let net = Network::<f64>::init(&[4, 6, 6, 6, 6, 3], 17).unwrap();
    let data = fd::toy_data(5, 4, 3, 18);
    for lambda in [0.0, 0.1, 1.0] {
        let c = fd::dnn(&net, &data, lambda, 1e-4);
        assert!(c.relative_error() < 1e-6, "λ={lambda}: {}", c.relative_error());
        // tiny entries carry f64 roundoff of order 1e-12 / h, so the
        // per-entry bound is looser than the norm-wise one
        assert!(c.max_elementwise_error() < 1e-5, "λ={lambda}: {}", c.max_elementwise_error());
    }
}

#[test]
fn dnn_gradient_on_wide_shallow_net() {
    let net = Network::<f64>::init(&[7, 11, 2], 3).unwrap();
    let data = fd::toy_data(9, 7, 2, 4);
    let c = fd::dnn(&net, &data, 0.05, 1e-5);
    assert!(c.relative_error() < 1e-7, "{}", c.relative_error());
}

#[test]
fn lstm_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let params = LstmParams::<f64>::random(4, 3, 0.5, &mut rng);
    let c = fd::lstm(&params, &[1, 3, 0], 1e-5);
    assert!(c.relative_error() < 1e-5, "{}", c.relative_error());
    assert!(c.max_elementwise_error() < 1e-5, "{}", c.max_elementwise_error());
}

#[test]
fn lstm_gradient_on_longer_sequence() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let params = LstmParams::<f64>::random(6, 5, 0.3, &mut rng);
    let levels = [0, 5, 2, 2, 4, 1, 3, 0, 5];
    let c = fd::lstm(&params, &levels, 1e-5);
    assert!(c.relative_error() < 1e-6, "{}", c.relative_error());
}

//! Backprop against central finite differences, plus first-order descent and
//! ascent behaviour of single SGD steps.

use neglearn::dense::{DenseAutoencoder, OptimizerConfig, OutputActivation};
use neglearn::{Matrix, Rng, Sign};

const H: f64 = 1e-5;
const REL_TOL: f64 = 1e-6;
// Below this magnitude both derivatives are treated as zero and compared
// absolutely; finite differences cannot resolve a relative error there.
const FLOOR: f64 = 1e-7;

fn random_net(rng: &mut Rng) -> (DenseAutoencoder, Matrix) {
    let n = 2 + rng.below(6);
    let h = 1 + rng.below(5);
    let b = 1 + rng.below(4);
    let output = if rng.below(2) == 0 {
        OutputActivation::Sigmoid
    } else {
        OutputActivation::Identity
    };
    let mut net = DenseAutoencoder::new(n, h, output, rng);
    for s in net.param_slices_mut() {
        for p in s.iter_mut() {
            *p = rng.uniform_range(-1.0, 1.0);
        }
    }
    let x = Matrix::from_vec(b, n, (0..b * n).map(|_| rng.uniform()).collect()).unwrap();
    (net, x)
}

#[test]
fn backprop_matches_central_differences() {
    let mut rng = Rng::new(20);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (net, x) = random_net(&mut rng);
        let grads = net.gradients(&x, Sign::Positive).unwrap();
        for (t, analytic) in grads.slices().iter().enumerate() {
            for (i, &a) in analytic.iter().enumerate() {
                let mut plus = net.clone();
                plus.param_slices_mut()[t][i] += H;
                let mut minus = net.clone();
                minus.param_slices_mut()[t][i] -= H;
                let numeric = (plus.loss(&x).unwrap() - minus.loss(&x).unwrap()) / (2.0 * H);
                let scale = a.abs().max(numeric.abs());
                let err = if scale < FLOOR {
                    (a - numeric).abs()
                } else {
                    (a - numeric).abs() / scale
                };
                worst = worst.max(err);
                assert!(
                    err <= REL_TOL,
                    "tensor {t} index {i}: analytic {a} numeric {numeric} error {err}"
                );
            }
        }
    }
    println!("worst relative error {worst:e}");
}

#[test]
fn small_sgd_steps_descend_and_ascend() {
    let mut rng = Rng::new(50);
    let cfg = OptimizerConfig::sgd(1e-3);
    for _ in 0..50 {
        let (net, x) = random_net(&mut rng);
        let before = net.loss(&x).unwrap();
        let down = net
            .sgd_step(&net.gradients(&x, Sign::Positive).unwrap(), &cfg)
            .unwrap();
        let up = net
            .sgd_step(&net.gradients(&x, Sign::Negative).unwrap(), &cfg)
            .unwrap();
        assert!(down.loss(&x).unwrap() <= before);
        assert!(up.loss(&x).unwrap() >= before);
    }
}

//! Analytic gradients against central finite differences.

use ndarray::{Array2, Axis};
use newsrank::model::{Mode, PairBatch, PreferenceNet};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PairBatch {
    let mut m = || Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal));
    PairBatch {
        low: m(),
        high: m(),
    }
}

/// A margin one unit above the widest score gap, so every pair is on the
/// linear side of the hinge while the loss stays near 1.
pub fn violating_margin(net: &PreferenceNet, batch: &PairBatch) -> f64 {
    let mut training = net.clone();
    training.set_mode(Mode::Training);
    let x = ndarray::concatenate(Axis(0), &[batch.low.view(), batch.high.view()]).unwrap();
    let s = training.forward_batch(x.view()).unwrap();
    let n = batch.len();
    (0..n).map(|i| (s[n + i] - s[i]).abs()).fold(0.0, f64::max) + 1.0
}

/// Largest relative error over all parameters for one batch.
///
/// Errors are relative to `max(|analytic|, |numeric|, 1e-6)`; the floor
/// keeps parameters with a vanishing gradient (dead units) from turning
/// rounding noise of the difference quotient into a large ratio.
pub fn worst_relative_error(net: &PreferenceNet, batch: &PairBatch, h: f64) -> (f64, String) {
    let margin = violating_margin(net, batch);
    let (_, analytic, _) = net.loss_and_gradients(batch, margin).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = analytic
        .tensors()
        .into_iter()
        .map(|t| (t.name, t.values.to_vec()))
        .collect();
    let mut probe = net.clone();
    let mut worst = (0.0, String::new());
    for (ti, (name, grads)) in analytic.iter().enumerate() {
        for (j, &g) in grads.iter().enumerate() {
            let original = probe.params().tensors()[ti].values[j];
            let set = |v: f64, p: &mut PreferenceNet| {
                p.params_mut().tensors_mut()[ti].values[j] = v;
            };
            set(original + h, &mut probe);
            let up = probe.batch_loss(batch, margin).unwrap();
            set(original - h, &mut probe);
            let down = probe.batch_loss(batch, margin).unwrap();
            set(original, &mut probe);
            let numeric = (up - down) / (2.0 * h);
            let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-6);
            if rel > worst.0 {
                worst = (
                    rel,
                    format!("{name}[{j}]: analytic {g:e}, numeric {numeric:e}"),
                );
            }
        }
    }
    worst
}

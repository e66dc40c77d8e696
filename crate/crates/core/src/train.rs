//! Minibatch SGD on binary cross-entropy for [`TwoLayerNet`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::network::TwoLayerNet;
use crate::poly::dot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Stop after this many epochs without a better validation loss, training
    /// on an 80/20 split and returning the best snapshot.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 20, batch_size: 32, learning_rate: 0.1, seed: 0, patience: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub net: TwoLayerNet,
    /// Mean training loss after each epoch.
    pub epoch_losses: Vec<f64>,
    pub validation_losses: Vec<f64>,
    /// Epoch (1-based) whose parameters were returned; 0 means untouched.
    pub best_epoch: usize,
}

/// Glorot-uniform weights, zero biases.
pub fn init_net(dim: usize, hidden: usize, seed: u64) -> Result<TwoLayerNet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a1 = (6.0 / (dim + hidden) as f64).sqrt();
    let a2 = (6.0 / (hidden + 1) as f64).sqrt();
    let w1 = (0..dim * hidden).map(|_| rng.random_range(-a1..=a1)).collect();
    let w2 = (0..hidden).map(|_| rng.random_range(-a2..=a2)).collect();
    TwoLayerNet::new(dim, w1, vec![0.0; hidden], w2, 0.0)
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `BCE(sigmoid(z), y)` computed stably from the logit.
pub fn bce_with_logits(z: f64, y: u8) -> f64 {
    let y = f64::from(y);
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

pub fn loss(net: &TwoLayerNet, data: &Dataset) -> Result<f64> {
    check_dim(net.dim(), data.dim())?;
    // Sequential so the sum is reproducible bit for bit.
    let total: f64 = (0..data.len())
        .map(|i| bce_with_logits(net.preactivation_unchecked(data.row(i)), data.labels()[i]))
        .sum();
    Ok(total / data.len() as f64)
}

/// Parameter gradient of the single-sample loss, laid out like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Gradient {
    fn zeros(net: &TwoLayerNet) -> Self {
        Self { w1: vec![0.0; net.w1.len()], b1: vec![0.0; net.hidden()], w2: vec![0.0; net.hidden()], b2: 0.0 }
    }
}

pub fn gradient(net: &TwoLayerNet, x: &[f64], y: u8) -> Result<Gradient> {
    check_dim(net.dim(), x.len())?;
    let mut g = Gradient::zeros(net);
    accumulate(net, x, y, &mut g);
    Ok(g)
}

fn accumulate(net: &TwoLayerNet, x: &[f64], y: u8, g: &mut Gradient) {
    let d = net.dim();
    let pre: Vec<f64> = (0..net.hidden()).map(|i| dot(net.row(i), x) + net.b1[i]).collect();
    let z = net.b2 + pre.iter().zip(&net.w2).map(|(p, w)| w * p.max(0.0)).sum::<f64>();
    let dz = sigmoid(z) - f64::from(y);
    g.b2 += dz;
    for (i, &p) in pre.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        g.w2[i] += dz * p;
        let dp = dz * net.w2[i];
        g.b1[i] += dp;
        for (gw, xv) in g.w1[i * d..(i + 1) * d].iter_mut().zip(x) {
            *gw += dp * xv;
        }
    }
}

pub fn train(net: &TwoLayerNet, data: &Dataset, config: &TrainConfig) -> Result<TwoLayerNet> {
    Ok(train_with_history(net, data, config)?.net)
}

pub fn train_with_history(net: &TwoLayerNet, data: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    check_dim(net.dim(), data.dim())?;
    if config.batch_size == 0 || config.learning_rate.is_nan() || config.learning_rate < 0.0 {
        return Err(Error::InvalidArgument("batch size must be positive and learning rate nonnegative".into()));
    }
    let (train_set, validation) = match config.patience {
        Some(_) => {
            let (a, b) = data.split(0.8, config.seed)?;
            (a, Some(b))
        }
        None => (data.clone(), None),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut current = net.clone();
    let mut best = (f64::INFINITY, net.clone(), 0);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut validation_losses = Vec::new();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut g = Gradient::zeros(&current);
            for &i in batch {
                accumulate(&current, train_set.row(i), train_set.labels()[i], &mut g);
            }
            step(&mut current, &g, config.learning_rate / batch.len() as f64);
        }
        let l = loss(&current, &train_set)?;
        if !l.is_finite() || current.check_finite().is_err() {
            return Err(Error::Divergence { epoch, loss: l });
        }
        epoch_losses.push(l);
        let (Some(val), Some(patience)) = (&validation, config.patience) else { continue };
        let vl = loss(&current, val)?;
        validation_losses.push(vl);
        if vl < best.0 {
            best = (vl, current.clone(), epoch);
        } else if epoch - best.2 >= patience {
            break;
        }
    }
    let (net, best_epoch) = if validation.is_some() && best.2 > 0 {
        (best.1, best.2)
    } else {
        (current, epoch_losses.len())
    };
    Ok(TrainOutcome { net, epoch_losses, validation_losses, best_epoch })
}

fn step(net: &mut TwoLayerNet, g: &Gradient, rate: f64) {
    for (w, d) in net.w1.iter_mut().zip(&g.w1) {
        *w -= rate * d;
    }
    for (w, d) in net.b1.iter_mut().zip(&g.b1) {
        *w -= rate * d;
    }
    for (w, d) in net.w2.iter_mut().zip(&g.w2) {
        *w -= rate * d;
    }
    net.b2 -= rate * g.b2;
}

/// Fraction of samples with `1[sigmoid(z) >= 0.5] == label`.
pub fn accuracy(net: &TwoLayerNet, data: &Dataset) -> Result<f64> {
    count_correct(net, data, |z| sigmoid(z) >= 0.5)
}

/// Fraction of samples with `1[z >= 0] == label`.
pub fn accuracy_by_sign(net: &TwoLayerNet, data: &Dataset) -> Result<f64> {
    count_correct(net, data, |z| z >= 0.0)
}

fn count_correct(net: &TwoLayerNet, data: &Dataset, positive: impl Fn(f64) -> bool + Sync) -> Result<f64> {
    check_dim(net.dim(), data.dim())?;
    let hits = (0..data.len())
        .into_par_iter()
        .filter(|&i| u8::from(positive(net.preactivation_unchecked(data.row(i)))) == data.labels()[i])
        .count();
    Ok(hits as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_gaussians;
    use crate::fixtures;

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let data = synth_gaussians(40, 3, 2.0, 0).unwrap();
        let net = init_net(3, 4, 1).unwrap();
        let cfg = TrainConfig { epochs: 3, learning_rate: 0.0, ..Default::default() };
        assert_eq!(train(&net, &data, &cfg).unwrap(), net);
    }

    #[test]
    fn single_sample_is_fitted() {
        let data = Dataset::new(2, vec![0.5, -0.25], vec![1]).unwrap();
        let net = init_net(2, 3, 5).unwrap();
        let cfg = TrainConfig { epochs: 2000, batch_size: 1, learning_rate: 0.5, ..Default::default() };
        let out = train_with_history(&net, &data, &cfg).unwrap();
        assert!(*out.epoch_losses.last().unwrap() < 1e-3);
    }

    #[test]
    fn separable_gaussians_are_learned() {
        let data = synth_gaussians(200, 2, 10.0, 3).unwrap();
        let net = train(&init_net(2, 4, 0).unwrap(), &data, &TrainConfig::default()).unwrap();
        assert!(accuracy(&net, &data).unwrap() >= 0.99);
    }

    #[test]
    fn indistinguishable_classes_stay_near_chance() {
        let data = synth_gaussians(2000, 2, 0.0, 3).unwrap();
        let net = train(&init_net(2, 4, 0).unwrap(), &data, &TrainConfig { epochs: 5, ..Default::default() }).unwrap();
        assert!((accuracy(&net, &data).unwrap() - 0.5).abs() <= 0.05);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let eps = 1e-6;
        for _ in 0..10 {
            let net = fixtures::random_net(&mut rng, 3, 4);
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y = rng.random_range(0..=1u8);
            let g = gradient(&net, &x, y).unwrap();
            let f = |n: &TwoLayerNet| bce_with_logits(n.preactivation(&x).unwrap(), y);
            let k = rng.random_range(0..net.w1.len());
            let mut a = net.clone();
            let mut b = net.clone();
            a.w1[k] += eps;
            b.w1[k] -= eps;
            assert_close((f(&a) - f(&b)) / (2.0 * eps), g.w1[k]);
            let mut a = net.clone();
            let mut b = net.clone();
            a.b2 += eps;
            b.b2 -= eps;
            assert_close((f(&a) - f(&b)) / (2.0 * eps), g.b2);
        }
    }

    fn assert_close(fd: f64, an: f64) {
        assert!((fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1e-6), "{fd} vs {an}");
    }

    #[test]
    fn accuracy_complements_under_label_flip() {
        let data = synth_gaussians(100, 2, 1.0, 4).unwrap();
        let net = fixtures::random_net(&mut ChaCha8Rng::seed_from_u64(2), 2, 5);
        let flipped =
            Dataset::new(2, data.features().to_vec(), data.labels().iter().map(|l| 1 - l).collect()).unwrap();
        let a = accuracy(&net, &data).unwrap();
        assert!((accuracy(&net, &flipped).unwrap() - (1.0 - a)).abs() < 1e-12);
        assert_eq!(a, accuracy_by_sign(&net, &data).unwrap());
        let constant = TwoLayerNet::new(2, vec![0.0, 0.0], vec![0.0], vec![0.0], 2.2).unwrap();
        let ones = Dataset::new(2, vec![0.0; 4], vec![1, 1]).unwrap();
        assert_eq!(accuracy(&constant, &ones).unwrap(), 1.0);
    }

    #[test]
    fn early_stopping_returns_a_snapshot() {
        let data = synth_gaussians(200, 2, 3.0, 9).unwrap();
        let cfg = TrainConfig { epochs: 50, patience: Some(3), ..Default::default() };
        let out = train_with_history(&init_net(2, 4, 0).unwrap(), &data, &cfg).unwrap();
        assert!(out.best_epoch >= 1);
        let best = out.validation_losses[out.best_epoch - 1];
        assert!(out.validation_losses.iter().all(|&v| v >= best));
    }

    #[test]
    fn divergence_is_reported() {
        let data = synth_gaussians(50, 2, 4.0, 0).unwrap();
        let cfg = TrainConfig { epochs: 5, learning_rate: 1e300, ..Default::default() };
        assert!(matches!(train(&init_net(2, 4, 0).unwrap(), &data, &cfg), Err(Error::Divergence { .. })));
    }

    #[test]
    fn training_is_deterministic() {
        let data = synth_gaussians(100, 2, 2.0, 1).unwrap();
        let net = init_net(2, 6, 3).unwrap();
        let cfg = TrainConfig::default();
        assert_eq!(train(&net, &data, &cfg).unwrap().to_json(), train(&net, &data, &cfg).unwrap().to_json());
    }
}

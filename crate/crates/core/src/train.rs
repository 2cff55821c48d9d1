//! Dataset splitting and mini-batch SGD with classical momentum.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::data::Slice;
use crate::error::{Error, Result};
use crate::net::Network;
use crate::tensor::Tensor;

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Split = 0,
    Shuffle = 1,
}

/// A xoshiro256++ generator seeded from `seed` and advanced by one
/// long-jump (2^192 steps) per stream index, so streams never overlap.
pub fn rng_stream(seed: u64, stream: Stream) -> Xoshiro256PlusPlus {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    for _ in 0..stream as usize {
        rng.long_jump();
    }
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 60,
            batch_size: 4,
            seed: 0,
        }
    }
}

impl HyperParams {
    /// `epochs == 0` is accepted and trains nothing.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Parameter(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Parameter(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

/// Shuffles `items` (Fisher–Yates, seeded) and cuts the shuffled order at
/// `round(max(f, 1-f)·n)`. The larger fraction takes the leading part, so
/// fractions `f` and `1-f` with the same seed produce swapped splits:
/// the 20 % training set is exactly the 80 % run's test set.
pub fn split_dataset<T: Clone>(items: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>)> {
    let n = items.len();
    if n < 2 {
        return Err(Error::Split(format!("need at least 2 items, got {n}")));
    }
    let f = spec.train_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::Split(format!("train fraction must be in (0, 1), got {f}")));
    }
    let major = f >= 0.5;
    let cut = (f.max(1.0 - f) * n as f64).round() as usize;
    if cut == 0 || cut >= n {
        return Err(Error::Split(format!(
            "fraction {f} of {n} items leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_stream(spec.seed, Stream::Split));
    let (head, tail) = order.split_at(cut);
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    Ok(if major {
        (pick(head), pick(tail))
    } else {
        (pick(tail), pick(head))
    })
}

/// Optimizer state: one momentum buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub velocity: Vec<Tensor>,
    pub epoch: usize,
    pub seed: u64,
}

impl TrainState {
    pub fn new(net: &Network, seed: u64) -> Self {
        Self {
            velocity: net
                .params()
                .iter()
                .map(|p| Tensor::from_parts(p.shape().to_vec(), vec![0.0; p.len()]))
                .collect(),
            epoch: 0,
            seed,
        }
    }
}

/// Classical momentum: `v ← μ·v + g`, then `p ← p − lr·v`.
pub fn sgd_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut TrainState,
    hp: &HyperParams,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.velocity.len() {
        return Err(Error::Shape(format!(
            "{} parameters, {} gradients, {} momentum buffers",
            params.len(),
            grads.len(),
            state.velocity.len()
        )));
    }
    for ((p, g), v) in params.iter().zip(grads).zip(&state.velocity) {
        p.require_same_shape(g)?;
        p.require_same_shape(v)?;
    }
    for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut state.velocity) {
        for ((pv, gv), vv) in p.values_mut().iter_mut().zip(g.values()).zip(v.values_mut()) {
            *vv = hp.momentum * *vv + gv;
            *pv -= hp.learning_rate * *vv;
        }
    }
    Ok(())
}

/// Trains for `hp.epochs` epochs, returning the network and the mean
/// training loss of each epoch.
pub fn train(net: Network, train_set: &[Slice], hp: &HyperParams) -> Result<(Network, Vec<f64>)> {
    train_with_progress(net, train_set, hp, |_, _| {})
}

pub fn train_with_progress(
    mut net: Network,
    train_set: &[Slice],
    hp: &HyperParams,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(Network, Vec<f64>)> {
    hp.validate()?;
    if hp.epochs == 0 {
        return Ok((net, Vec::new()));
    }
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut state = TrainState::new(&net, hp.seed);
    let mut shuffle = rng_stream(hp.seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = Vec::with_capacity(hp.epochs);
    for epoch in 1..=hp.epochs {
        order.shuffle(&mut shuffle);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(hp.batch_size) {
            let mut sum: Option<Vec<Tensor>> = None;
            for &i in batch {
                let slice = &train_set[i];
                let (loss, grads) = net.loss_and_gradients(&slice.image, &slice.labels)?;
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch, loss });
                }
                epoch_loss += loss;
                match &mut sum {
                    None => sum = Some(grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&grads) {
                            a.add_assign(g)?;
                        }
                    }
                }
            }
            let mut grads = sum.expect("non-empty batch");
            for g in &mut grads {
                g.scale(1.0 / batch.len() as f64);
            }
            sgd_step(&mut net.params_mut(), &grads, &mut state, hp)?;
        }
        let mean = epoch_loss / train_set.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        state.epoch = epoch;
        log.push(mean);
        on_epoch(epoch, mean);
    }
    Ok((net, log))
}

/// `epoch,mean_loss` CSV with 1-based epochs and six decimals.
pub fn loss_log_csv(log: &[f64]) -> String {
    let mut out = String::from("epoch,mean_loss\n");
    for (i, loss) in log.iter().enumerate() {
        out.push_str(&format!("{},{loss:.6}\n", i + 1));
    }
    out
}

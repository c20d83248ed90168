use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::mrl_loss;
use super::params::{BatchNorm, Linear, Params, ResidualBlock};
use super::ModelError;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Layer sizes of a [`PreferenceNet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub input_dim: usize,
    pub hidden: usize,
    pub blocks: usize,
}

impl NetShape {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden: 200,
            blocks: 1,
        }
    }

    pub fn with_hidden(self, hidden: usize) -> Self {
        Self { hidden, ..self }
    }

    pub fn with_blocks(self, blocks: usize) -> Self {
        Self { blocks, ..self }
    }
}

/// Source of batch-norm statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Normalize with statistics of the current batch.
    Training,
    /// Normalize with running statistics.
    Inference,
}

/// Running mean and (unbiased) variance of one batch-norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
}

impl RunningStats {
    fn new(width: usize) -> Self {
        Self {
            mean: Array1::zeros(width),
            var: Array1::ones(width),
        }
    }
}

/// Batch statistics observed during a training forward pass, one entry per
/// batch-norm layer in [`PreferenceNet::running_stats`] order.
#[derive(Debug, Clone)]
pub struct BatchStats(Vec<RunningStats>);

/// A pair minibatch: row `i` of `low` is the less engaging side of pair `i`.
#[derive(Debug, Clone)]
pub struct PairBatch {
    pub low: Array2<f64>,
    pub high: Array2<f64>,
}

impl PairBatch {
    pub fn len(&self) -> usize {
        self.low.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.low.nrows() == 0
    }
}

/// Feed-forward scorer: input projection, residual blocks, scalar head.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceNet {
    shape: NetShape,
    params: Params,
    running: Vec<RunningStats>,
    mode: Mode,
}

struct BnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    batch: bool,
}

struct BlockCache {
    /// ReLU output inside the block.
    hidden: Array2<f64>,
    /// ReLU output after the skip connection.
    out: Array2<f64>,
    bn1: BnCache,
    bn2: BnCache,
}

struct Cache<'a> {
    x: ArrayView2<'a, f64>,
    /// ReLU output of the input projection.
    proj: Array2<f64>,
    blocks: Vec<BlockCache>,
}

impl Cache<'_> {
    /// Input of block `i`.
    fn block_input(&self, i: usize) -> &Array2<f64> {
        if i == 0 {
            &self.proj
        } else {
            &self.blocks[i - 1].out
        }
    }

    fn last(&self) -> &Array2<f64> {
        self.block_input(self.blocks.len())
    }
}

fn relu(mut a: Array2<f64>) -> Array2<f64> {
    a.mapv_inplace(|v| v.max(0.0));
    a
}

/// Zeroes gradient entries where the ReLU output was not positive.
fn relu_mask(mut grad: Array2<f64>, out: &Array2<f64>) -> Array2<f64> {
    grad.zip_mut_with(out, |g, &o| {
        if o <= 0.0 {
            *g = 0.0;
        }
    });
    grad
}

fn affine(x: ArrayView2<f64>, layer: &Linear) -> Array2<f64> {
    x.dot(&layer.weight) + &layer.bias
}

fn bn_forward(
    mut z: Array2<f64>,
    bn: &BatchNorm,
    running: &RunningStats,
    batch: bool,
) -> (Array2<f64>, BnCache, Option<RunningStats>) {
    let (var, observed) = if batch {
        let n = z.nrows() as f64;
        let mean = z.sum_axis(Axis(0)) / n;
        z -= &mean;
        let mut sq = Array1::<f64>::zeros(z.ncols());
        for row in z.rows() {
            Zip::from(&mut sq).and(row).for_each(|s, &v| *s += v * v);
        }
        let var = sq / n;
        let unbiased = if z.nrows() > 1 {
            &var * (n / (n - 1.0))
        } else {
            var.clone()
        };
        (
            var,
            Some(RunningStats {
                mean,
                var: unbiased,
            }),
        )
    } else {
        z -= &running.mean;
        (running.var.clone(), None)
    };
    let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
    z *= &inv_std;
    let out = Zip::from(&z)
        .and_broadcast(&bn.scale)
        .and_broadcast(&bn.shift)
        .map_collect(|&x, &g, &b| x * g + b);
    (
        out,
        BnCache {
            xhat: z,
            inv_std,
            batch,
        },
        observed,
    )
}

fn bn_backward(
    mut dy: Array2<f64>,
    bn: &BatchNorm,
    cache: &BnCache,
    grad: &mut BatchNorm,
) -> Array2<f64> {
    let width = dy.ncols();
    let mut sum_dy = Array1::<f64>::zeros(width);
    let mut sum_dy_xhat = Array1::<f64>::zeros(width);
    for (d, x) in dy.rows().into_iter().zip(cache.xhat.rows()) {
        Zip::from(&mut sum_dy)
            .and(&mut sum_dy_xhat)
            .and(d)
            .and(x)
            .for_each(|s, sx, &d, &x| {
                *s += d;
                *sx += d * x;
            });
    }
    if cache.batch {
        let n = dy.nrows() as f64;
        let k = &bn.scale * &cache.inv_std / n;
        Zip::from(&mut dy)
            .and(&cache.xhat)
            .and_broadcast(&k)
            .and_broadcast(&sum_dy)
            .and_broadcast(&sum_dy_xhat)
            .for_each(|d, &x, &k, &s, &sx| *d = k * (n * *d - s - x * sx));
    } else {
        dy *= &(&bn.scale * &cache.inv_std);
    }
    grad.scale = sum_dy_xhat;
    grad.shift = sum_dy;
    dy
}

fn linear_param_grads(input: ArrayView2<f64>, dz: &Array2<f64>, grad: &mut Linear) {
    let w = input.t().dot(dz);
    grad.weight = if w.is_standard_layout() {
        w
    } else {
        w.as_standard_layout().into_owned()
    };
    grad.bias = dz.sum_axis(Axis(0));
}

fn linear_backward(
    input: ArrayView2<f64>,
    dz: &Array2<f64>,
    layer: &Linear,
    grad: &mut Linear,
) -> Array2<f64> {
    linear_param_grads(input, dz, grad);
    dz.dot(&layer.weight.t())
}

impl PreferenceNet {
    /// He-initialized weights, zero biases, identity batch-norm with
    /// running mean 0 and variance 1. Starts in inference mode.
    pub fn new<R: Rng + ?Sized>(shape: NetShape, rng: &mut R) -> Self {
        let h = shape.hidden;
        let input = Linear::he_normal(shape.input_dim, h, rng);
        let blocks = (0..shape.blocks)
            .map(|_| ResidualBlock {
                fc1: Linear::he_normal(h, h, rng),
                bn1: BatchNorm::identity(h),
                fc2: Linear::he_normal(h, h, rng),
                bn2: BatchNorm::identity(h),
            })
            .collect();
        let head = Linear::he_normal(h, 1, rng);
        Self::from_parts(
            shape,
            Params {
                input,
                blocks,
                head,
            },
            (0..2 * shape.blocks)
                .map(|_| RunningStats::new(h))
                .collect(),
        )
    }

    /// All-zero weights with identity batch-norm; useful as a template.
    pub fn zeroed(shape: NetShape) -> Self {
        let h = shape.hidden;
        let blocks = (0..shape.blocks)
            .map(|_| ResidualBlock {
                fc1: Linear::zeros(h, h),
                bn1: BatchNorm::identity(h),
                fc2: Linear::zeros(h, h),
                bn2: BatchNorm::identity(h),
            })
            .collect();
        let params = Params {
            input: Linear::zeros(shape.input_dim, h),
            blocks,
            head: Linear::zeros(h, 1),
        };
        Self::from_parts(
            shape,
            params,
            (0..2 * shape.blocks)
                .map(|_| RunningStats::new(h))
                .collect(),
        )
    }

    pub(crate) fn from_parts(shape: NetShape, params: Params, running: Vec<RunningStats>) -> Self {
        Self {
            shape,
            params,
            running,
            mode: Mode::Inference,
        }
    }

    pub fn shape(&self) -> NetShape {
        self.shape
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    /// Running statistics, ordered `blocks[0].bn1, blocks[0].bn2, ...`.
    pub fn running_stats(&self) -> &[RunningStats] {
        &self.running
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    fn check_dim(&self, found: usize) -> Result<(), ModelError> {
        if found != self.shape.input_dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.shape.input_dim,
                found,
            });
        }
        Ok(())
    }

    fn forward_cached<'a>(
        &self,
        x: ArrayView2<'a, f64>,
        batch: bool,
    ) -> (Array1<f64>, Cache<'a>, Vec<RunningStats>) {
        let proj = relu(affine(x, &self.params.input));
        let mut blocks: Vec<BlockCache> = Vec::with_capacity(self.params.blocks.len());
        let mut observed = Vec::new();
        for (i, block) in self.params.blocks.iter().enumerate() {
            let input = blocks.last().map_or(&proj, |b| &b.out);
            let z1 = affine(input.view(), &block.fc1);
            let (bn1_out, bn1, s1) = bn_forward(z1, &block.bn1, &self.running[2 * i], batch);
            let hidden = relu(bn1_out);
            let z2 = affine(hidden.view(), &block.fc2);
            let (bn2_out, bn2, s2) = bn_forward(z2, &block.bn2, &self.running[2 * i + 1], batch);
            let out = relu(bn2_out + input);
            observed.extend(s1);
            observed.extend(s2);
            blocks.push(BlockCache {
                hidden,
                out,
                bn1,
                bn2,
            });
        }
        let cache = Cache { x, proj, blocks };
        let scores = affine(cache.last().view(), &self.params.head)
            .column(0)
            .to_owned();
        (scores, cache, observed)
    }

    fn backward_cached(&self, cache: &Cache, dscores: &Array1<f64>) -> Params {
        let mut grad = self.params.zeros_like();
        let ds = dscores.view().insert_axis(Axis(1)).to_owned();
        let mut da = linear_backward(cache.last().view(), &ds, &self.params.head, &mut grad.head);
        for (i, bc) in cache.blocks.iter().enumerate().rev() {
            let block = &self.params.blocks[i];
            let g = &mut grad.blocks[i];
            let dsum = relu_mask(da, &bc.out);
            let dz2 = bn_backward(dsum.clone(), &block.bn2, &bc.bn2, &mut g.bn2);
            let dhidden = linear_backward(bc.hidden.view(), &dz2, &block.fc2, &mut g.fc2);
            let dbn1 = relu_mask(dhidden, &bc.hidden);
            let dz1 = bn_backward(dbn1, &block.bn1, &bc.bn1, &mut g.bn1);
            da = linear_backward(cache.block_input(i).view(), &dz1, &block.fc1, &mut g.fc1) + &dsum;
        }
        let dpre = relu_mask(da, &cache.proj);
        linear_param_grads(cache.x, &dpre, &mut grad.input);
        grad
    }

    /// Score of one embedding under the current mode.
    pub fn forward(&self, x: &[f64]) -> Result<f64, ModelError> {
        self.check_dim(x.len())?;
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        Ok(self.forward_batch(view)?[0])
    }

    /// Scores of a batch of embeddings (one per row) under the current mode.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array1<f64>, ModelError> {
        self.check_dim(x.ncols())?;
        if x.nrows() == 0 {
            return Ok(Array1::zeros(0));
        }
        Ok(self.forward_cached(x, self.mode == Mode::Training).0)
    }

    /// Scores using running statistics regardless of mode.
    pub fn infer_batch(&self, x: ArrayView2<f64>) -> Result<Array1<f64>, ModelError> {
        self.check_dim(x.ncols())?;
        if x.nrows() == 0 {
            return Ok(Array1::zeros(0));
        }
        Ok(self.forward_cached(x, false).0)
    }

    fn twin_inputs(&self, batch: &PairBatch) -> Result<Array2<f64>, ModelError> {
        self.check_dim(batch.low.ncols())?;
        self.check_dim(batch.high.ncols())?;
        if batch.is_empty() || batch.low.nrows() != batch.high.nrows() {
            return Err(ModelError::EmptyBatch);
        }
        Ok(
            ndarray::concatenate(Axis(0), &[batch.low.view(), batch.high.view()])
                .expect("same width"),
        )
    }

    /// Mean margin ranking loss of a pair batch with batch statistics taken
    /// over both sides jointly. Leaves the network untouched.
    pub fn batch_loss(&self, batch: &PairBatch, margin: f64) -> Result<f64, ModelError> {
        let x = self.twin_inputs(batch)?;
        let (scores, _, _) = self.forward_cached(x.view(), true);
        let n = batch.len();
        let total: f64 = (0..n)
            .map(|i| mrl_loss(scores[i], scores[n + i], margin))
            .sum();
        Ok(total / n as f64)
    }

    /// Mean batch loss, its gradient w.r.t. every parameter, and the batch
    /// statistics to fold into the running averages.
    pub fn loss_and_gradients(
        &self,
        batch: &PairBatch,
        margin: f64,
    ) -> Result<(f64, Params, BatchStats), ModelError> {
        let x = self.twin_inputs(batch)?;
        let (scores, cache, observed) = self.forward_cached(x.view(), true);
        let n = batch.len();
        let inv_n = 1.0 / n as f64;
        let mut dscores = Array1::zeros(2 * n);
        let mut total = 0.0;
        for i in 0..n {
            let loss = mrl_loss(scores[i], scores[n + i], margin);
            total += loss;
            // Hinge kink gets subgradient 0.
            if loss > 0.0 {
                dscores[i] = inv_n;
                dscores[n + i] = -inv_n;
            }
        }
        let grad = self.backward_cached(&cache, &dscores);
        Ok((total * inv_n, grad, BatchStats(observed)))
    }

    /// Inference-mode score of `x` and its gradient w.r.t. every parameter.
    pub fn score_gradient(&self, x: &[f64]) -> Result<(f64, Params), ModelError> {
        self.check_dim(x.len())?;
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        let (scores, cache, _) = self.forward_cached(view, false);
        let grad = self.backward_cached(&cache, &Array1::ones(1));
        Ok((scores[0], grad))
    }

    /// Exponential moving average update of the running statistics.
    pub fn update_running_stats(&mut self, stats: &BatchStats) {
        for (running, observed) in self.running.iter_mut().zip(&stats.0) {
            running.mean.zip_mut_with(&observed.mean, |r, &o| {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * o
            });
            running.var.zip_mut_with(&observed.var, |r, &o| {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * o
            });
        }
    }
}

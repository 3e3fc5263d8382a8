//! End-to-end models over a [`ParamStore`]: optional tile encoder, ordering
//! cost, permutation optimisation, and an MSE loss on the permuted set.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::ordering::OrderingCostParams;
use crate::permopt::{po_backward, po_forward, ComparisonStructure, InitMode, InitParams, PoConfig, PoTrace};
use crate::tasks::encoder::{encode, encode_vjp, EncoderCache, TileEncoderParams};
use crate::train::{mse_loss, xavier_with, Gradients, ParamStore, Tensor};

pub const COST_W1: &str = "cost.w1";
pub const COST_B1: &str = "cost.b1";
pub const COST_W2: &str = "cost.w2";
pub const COST_B2: &str = "cost.b2";
pub const ETA: &str = "eta";
pub const INIT_W: &str = "init.w";
pub const ENC_W: &str = "enc.w";
pub const ENC_B: &str = "enc.b";

/// Architecture and inner-loop settings; the learnable state lives in a `ParamStore`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub init: InitMode,
    pub structure: ComparisonStructure,
    pub steps: usize,
    pub sinkhorn_iters: usize,
    /// Features per raw set element (1 for numbers, pixels per tile for mosaics).
    pub input_dim: usize,
    pub hidden: usize,
    /// Width of the tile encoder; `None` feeds raw elements to the comparator.
    pub embed: Option<usize>,
    pub eta0: f64,
}

/// Typed view of the parameters.
#[derive(Clone, Debug)]
pub struct Weights {
    pub cost: OrderingCostParams,
    pub eta: f64,
    pub init: Option<InitParams>,
    pub encoder: Option<TileEncoderParams>,
}

/// Output of one forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    /// Final soft assignment, elements × positions.
    pub p: DenseMatrix,
    /// `Pᵀ x`: the set in soft position order.
    pub y: DenseMatrix,
    pub trace: PoTrace,
    encoder: Option<EncoderCache>,
}

impl ModelSpec {
    pub fn cost_dim(&self) -> usize {
        self.embed.unwrap_or(self.input_dim)
    }

    pub fn po_config(&self, eta: f64) -> PoConfig {
        PoConfig {
            steps: self.steps,
            eta,
            sinkhorn_iters: self.sinkhorn_iters,
            init: self.init,
            structure: self.structure,
        }
    }

    /// Xavier-initialised weights, zero biases, `eta = eta0`.
    pub fn init_store(&self, seed: u64) -> Result<ParamStore> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.cost_dim();
        let channels = self.structure.channels();
        let mut store = ParamStore::new();
        if let Some(e) = self.embed {
            store.insert(ENC_W, xavier_with(&[e, self.input_dim], &mut rng)?)?;
            store.insert(ENC_B, Tensor::zeros(&[e]))?;
        }
        store.insert(COST_W1, xavier_with(&[self.hidden, 2 * d], &mut rng)?)?;
        store.insert(COST_B1, Tensor::zeros(&[self.hidden]))?;
        store.insert(COST_W2, xavier_with(&[channels, self.hidden], &mut rng)?)?;
        store.insert(COST_B2, Tensor::zeros(&[channels]))?;
        store.insert(ETA, Tensor::scalar(self.eta0))?;
        if self.init == InitMode::LinearAssignment {
            store.insert(INIT_W, xavier_with(&[self.structure.positions(), d], &mut rng)?)?;
        }
        Ok(store)
    }

    /// Checks that `store` matches this architecture and unpacks it.
    pub fn weights(&self, store: &ParamStore) -> Result<Weights> {
        let matrix = |name: &str| store.get(name)?.to_matrix();
        let vector = |name: &str| Ok::<_, Error>(store.get(name)?.data().to_vec());
        let cost = OrderingCostParams::new(matrix(COST_W1)?, vector(COST_B1)?, matrix(COST_W2)?, vector(COST_B2)?)?;
        if cost.feat_dim() != self.cost_dim() || cost.channels() != self.structure.channels() {
            return Err(Error::InvalidArgument(format!(
                "checkpoint comparator expects {} features and {} channels; model needs {} and {}",
                cost.feat_dim(),
                cost.channels(),
                self.cost_dim(),
                self.structure.channels()
            )));
        }
        let eta = store.get(ETA)?.as_scalar()?;
        let init = match self.init {
            InitMode::LinearAssignment => Some(InitParams { w: matrix(INIT_W)? }),
            InitMode::Uniform => None,
        };
        let encoder = match self.embed {
            Some(_) => Some(TileEncoderParams {
                w: matrix(ENC_W)?,
                b: vector(ENC_B)?,
            }),
            None => None,
        };
        Ok(Weights { cost, eta, init, encoder })
    }

    pub fn forward(&self, weights: &Weights, x: &DenseMatrix) -> Result<Forward> {
        let (features, encoder) = match &weights.encoder {
            Some(enc) => {
                let (f, cache) = encode(enc, x)?;
                (f, Some(cache))
            }
            None => (x.clone(), None),
        };
        let config = self.po_config(weights.eta);
        let (y_features, p, trace) = po_forward(&features, &weights.cost, &config, weights.init.as_ref())?;
        let y = if encoder.is_some() { p.matmul_tn(x)? } else { y_features };
        Ok(Forward { p, y, trace, encoder })
    }

    /// MSE between the soft-permuted set and `target`, with parameter gradients.
    pub fn loss_and_grads(&self, weights: &Weights, x: &DenseMatrix, target: &DenseMatrix) -> Result<(f64, Gradients)> {
        let fwd = self.forward(weights, x)?;
        let (loss, d_y) = mse_loss(&fwd.y, target)?;
        let grads = self.backward(&fwd, x, &d_y)?;
        Ok((loss, grads))
    }

    fn backward(&self, fwd: &Forward, x: &DenseMatrix, d_y: &DenseMatrix) -> Result<Gradients> {
        let po = match &fwd.encoder {
            // Y = Pᵀ x uses raw tiles while P was computed from encoded features.
            Some(cache) => {
                let d_p = x.matmul_nt(d_y)?;
                let zero = DenseMatrix::zeros(x.rows(), self.cost_dim());
                let g = po_backward(&fwd.trace, &zero, Some(&d_p))?;
                let enc = encode_vjp(cache, &g.x)?;
                let mut grads = po_gradients(g.cost, g.eta, g.init);
                grads.insert(ENC_W.into(), Tensor::from(&enc.w));
                grads.insert(ENC_B.into(), Tensor::vector(&enc.b));
                return Ok(grads);
            }
            None => po_backward(&fwd.trace, d_y, None)?,
        };
        Ok(po_gradients(po.cost, po.eta, po.init))
    }

    /// Mean loss and mean gradients over a batch. Instances may be processed
    /// on `pool`, but the reduction always runs in instance order.
    pub fn batch_loss_and_grads(
        &self,
        store: &ParamStore,
        batch: &[(&DenseMatrix, &DenseMatrix)],
        pool: Option<&ThreadPool>,
    ) -> Result<(f64, Gradients)> {
        let weights = self.weights(store)?;
        let run = |(x, t): &(&DenseMatrix, &DenseMatrix)| self.loss_and_grads(&weights, x, t);
        let results: Vec<Result<(f64, Gradients)>> = match pool {
            Some(pool) => pool.install(|| batch.par_iter().map(run).collect()),
            None => batch.iter().map(run).collect(),
        };
        let scale = 1.0 / batch.len().max(1) as f64;
        let mut total = 0.0;
        let mut grads = Gradients::new();
        for r in results {
            let (loss, g) = r?;
            total += loss;
            accumulate(&mut grads, &g);
        }
        for t in grads.values_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= scale);
        }
        Ok((total * scale, grads))
    }
}

fn po_gradients(cost: OrderingCostParams, eta: f64, init: Option<DenseMatrix>) -> Gradients {
    let mut g = Gradients::new();
    g.insert(COST_W1.into(), Tensor::from(&cost.w1));
    g.insert(COST_B1.into(), Tensor::vector(&cost.b1));
    g.insert(COST_W2.into(), Tensor::from(&cost.w2));
    g.insert(COST_B2.into(), Tensor::vector(&cost.b2));
    g.insert(ETA.into(), Tensor::scalar(eta));
    if let Some(w) = init {
        g.insert(INIT_W.into(), Tensor::from(&w));
    }
    g
}

/// `into += from`, adding tensors missing from `into`.
pub fn accumulate(into: &mut Gradients, from: &Gradients) {
    for (name, t) in from {
        match into.get_mut(name) {
            Some(acc) => acc.data_mut().iter_mut().zip(t.data()).for_each(|(a, b)| *a += b),
            None => {
                into.insert(name.clone(), t.clone());
            }
        }
    }
}

/// Builds a pool for `threads > 1`; `None` means run on the calling thread.
pub fn thread_pool(threads: usize) -> Result<Option<ThreadPool>> {
    if threads <= 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map(Some)
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

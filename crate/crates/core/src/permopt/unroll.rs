//! The unrolled inner optimisation and its exact reverse pass.

use crate::error::{shape_err, Error, Result};
use crate::linalg::{sinkhorn, sinkhorn_vjp, DenseMatrix, SinkhornCache, DEFAULT_SINKHORN_ITERS};
use crate::ordering::{cost_matrix, cost_matrix_vjp, CostCache, OrderingCostGrads, OrderingCostParams};
use crate::permopt::cost::gradient_with_orders;
use crate::permopt::ComparisonStructure;

/// How the unnormalised assignment is initialised.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMode {
    /// `P̃⁽⁰⁾ = 0`, i.e. a uniform soft assignment.
    Uniform,
    /// `P̃⁽⁰⁾_ik = w_k · x_i` with one learned vector per position.
    LinearAssignment,
}

/// How each inner step turns the cost gradient into an update of `P̃`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InnerUpdate {
    /// The gradient with respect to the normalised `P` is applied to `P̃` directly.
    #[default]
    Direct,
    /// The gradient is pulled back through the Sinkhorn Jacobian first.
    /// Forward only; used to compare the two update rules.
    SinkhornJacobian,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoConfig {
    pub steps: usize,
    pub eta: f64,
    pub sinkhorn_iters: usize,
    pub init: InitMode,
    pub structure: ComparisonStructure,
}

impl PoConfig {
    pub fn sequence(n: usize, steps: usize, eta: f64) -> Self {
        Self {
            steps,
            eta,
            sinkhorn_iters: DEFAULT_SINKHORN_ITERS,
            init: InitMode::Uniform,
            structure: ComparisonStructure::Sequence(n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidArgument("inner step count must be >= 1".into()));
        }
        if self.sinkhorn_iters == 0 {
            return Err(Error::InvalidArgument("Sinkhorn iterations must be >= 1".into()));
        }
        if !self.eta.is_finite() {
            return Err(Error::NonFinite { op: "PoConfig.eta" });
        }
        if self.structure.positions() == 0 {
            return Err(Error::InvalidArgument("target shape has no positions".into()));
        }
        Ok(())
    }
}

/// Per-position weight vectors for linear-assignment initialisation.
#[derive(Clone, Debug, PartialEq)]
pub struct InitParams {
    /// positions × feat_dim
    pub w: DenseMatrix,
}

/// Everything the reverse pass needs from one forward run.
#[derive(Clone, Debug)]
pub struct PoTrace {
    config: PoConfig,
    update: InnerUpdate,
    x: DenseMatrix,
    cost_cache: CostCache,
    orders: Vec<DenseMatrix>,
    init_w: Option<DenseMatrix>,
    /// P̃⁽⁰⁾ ..= P̃⁽ᵀ⁾
    p_tilde: Vec<DenseMatrix>,
    /// Sinkhorn caches of P⁽⁰⁾ ..= P⁽ᵀ⁾
    normalised: Vec<SinkhornCache>,
    /// Inner gradients G⁽⁰⁾ .. G⁽ᵀ⁻¹⁾ (after any Jacobian pull-back).
    grads: Vec<DenseMatrix>,
}

impl PoTrace {
    pub fn steps(&self) -> usize {
        self.grads.len()
    }

    pub fn costs(&self) -> &[DenseMatrix] {
        self.cost_cache.costs()
    }

    pub fn unnormalised(&self, t: usize) -> &DenseMatrix {
        &self.p_tilde[t]
    }

    pub fn assignment(&self, t: usize) -> &DenseMatrix {
        self.normalised[t].output()
    }

    pub fn inner_gradient(&self, t: usize) -> &DenseMatrix {
        &self.grads[t]
    }

    pub fn config(&self) -> &PoConfig {
        &self.config
    }
}

/// Gradients produced by [`po_backward`].
#[derive(Clone, Debug)]
pub struct PoGrads {
    pub cost: OrderingCostGrads,
    pub x: DenseMatrix,
    pub eta: f64,
    pub init: Option<DenseMatrix>,
}

pub fn init_assignment(
    config: &PoConfig,
    x: &DenseMatrix,
    init_params: Option<&InitParams>,
) -> Result<DenseMatrix> {
    let n = config.structure.positions();
    if x.rows() != n {
        return Err(shape_err("init_assignment", format!("{n} set elements"), x.rows()));
    }
    match config.init {
        InitMode::Uniform => Ok(DenseMatrix::zeros(n, n)),
        InitMode::LinearAssignment => {
            let w = &init_params
                .ok_or_else(|| {
                    Error::InvalidArgument("linear-assignment init requires init parameters".into())
                })?
                .w;
            w.ensure_shape("init_assignment", n, x.cols())?;
            x.matmul_nt(w)
        }
    }
}

/// Runs the inner loop and returns `(Y, P, trace)` with `Y = Pᵀ X` the
/// position-ordered soft permutation of the rows of `x`.
pub fn po_forward(
    x: &DenseMatrix,
    cost_params: &OrderingCostParams,
    config: &PoConfig,
    init_params: Option<&InitParams>,
) -> Result<(DenseMatrix, DenseMatrix, PoTrace)> {
    po_forward_with(x, cost_params, config, init_params, InnerUpdate::Direct)
}

pub fn po_forward_with(
    x: &DenseMatrix,
    cost_params: &OrderingCostParams,
    config: &PoConfig,
    init_params: Option<&InitParams>,
    update: InnerUpdate,
) -> Result<(DenseMatrix, DenseMatrix, PoTrace)> {
    config.validate()?;
    if cost_params.channels() != config.structure.channels() {
        return Err(shape_err(
            "po_forward",
            format!("{} cost channels", config.structure.channels()),
            cost_params.channels(),
        ));
    }
    let (costs, cost_cache) = cost_matrix(cost_params, x)?;
    let orders = config.structure.order_matrices();

    let mut p_tilde = vec![init_assignment(config, x, init_params)?];
    let mut normalised = Vec::with_capacity(config.steps + 1);
    let mut grads = Vec::with_capacity(config.steps);
    for t in 0..config.steps {
        let (p, cache) = sinkhorn(&p_tilde[t], config.sinkhorn_iters)?;
        let mut g = gradient_with_orders(&costs, &p, &config.structure, &orders)?;
        if update == InnerUpdate::SinkhornJacobian {
            g = sinkhorn_vjp(&cache, &g)?;
        }
        let mut next = p_tilde[t].clone();
        next.axpy(-config.eta, &g)?;
        normalised.push(cache);
        grads.push(g);
        p_tilde.push(next);
    }
    let (p, cache) = sinkhorn(&p_tilde[config.steps], config.sinkhorn_iters)?;
    normalised.push(cache);
    let y = p.matmul_tn(x)?;

    let trace = PoTrace {
        config: config.clone(),
        update,
        x: x.clone(),
        cost_cache,
        orders,
        init_w: match config.init {
            InitMode::LinearAssignment => init_params.map(|ip| ip.w.clone()),
            InitMode::Uniform => None,
        },
        p_tilde,
        normalised,
        grads,
    };
    Ok((y, p, trace))
}

/// Reverse pass for upstream gradients on `Y` and optionally on the final `P`.
pub fn po_backward(
    trace: &PoTrace,
    d_y: &DenseMatrix,
    d_p: Option<&DenseMatrix>,
) -> Result<PoGrads> {
    if trace.update != InnerUpdate::Direct {
        return Err(Error::InvalidArgument(
            "backward is only defined for the direct inner update".into(),
        ));
    }
    let x = &trace.x;
    let n = x.rows();
    let steps = trace.steps();
    let eta = trace.config.eta;
    d_y.ensure_shape("po_backward", n, x.cols())?;

    let p_final = trace.normalised[steps].output();
    // Y = Pᵀ X
    let mut d_x = p_final.matmul(d_y)?;
    let mut d_pf = x.matmul_nt(d_y)?;
    if let Some(extra) = d_p {
        d_pf.axpy(1.0, extra)?;
    }

    let channels = trace.orders.len();
    let costs = trace.cost_cache.costs();
    let mut d_costs = vec![DenseMatrix::zeros(n, n); channels];
    let mut d_eta = 0.0;
    let mut d_tilde = sinkhorn_vjp(&trace.normalised[steps], &d_pf)?;

    for t in (0..steps).rev() {
        // P̃⁽ᵗ⁺¹⁾ = P̃⁽ᵗ⁾ - η G⁽ᵗ⁾
        d_eta -= trace.grads[t].inner(&d_tilde)?;
        let d_g = d_tilde.scale(-eta);

        // G = Σ_ch 2 C_ch P O_chᵀ
        let p = trace.normalised[t].output();
        let mut d_p_t = DenseMatrix::zeros(n, n);
        for ch in 0..channels {
            let o = &trace.orders[ch];
            let b = p.matmul_nt(o)?;
            d_costs[ch].axpy(2.0, &d_g.matmul_nt(&b)?)?;
            let ct_dg = costs[ch].matmul_tn(&d_g)?;
            d_p_t.axpy(2.0, &ct_dg.matmul(o)?)?;
        }
        d_tilde.axpy(1.0, &sinkhorn_vjp(&trace.normalised[t], &d_p_t)?)?;
    }

    let d_init = match (&trace.config.init, &trace.init_w) {
        (InitMode::LinearAssignment, Some(w)) => {
            // P̃⁽⁰⁾ = X Wᵀ
            d_x.axpy(1.0, &d_tilde.matmul(w)?)?;
            Some(d_tilde.matmul_tn(x)?)
        }
        _ => None,
    };

    let (d_cost_params, d_x_cost) = cost_matrix_vjp(&trace.cost_cache, &d_costs)?;
    d_x.axpy(1.0, &d_x_cost)?;

    Ok(PoGrads {
        cost: d_cost_params,
        x: d_x,
        eta: d_eta,
        init: d_init,
    })
}

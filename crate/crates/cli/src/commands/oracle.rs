use clap::Args;
use poperm_core::linalg::{hungarian, sinkhorn, DenseMatrix};
use poperm_core::oracle::{brute_min, build_q, hard_cost};
use poperm_core::ordering::{cost_matrix, OrderingCostParams};
use poperm_core::permopt::{po_forward, total_cost, ComparisonStructure, InitMode, PoConfig};
use poperm_core::train::xavier_with;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::print_json;
use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    /// Sequence length; ignored when a grid is given.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, requires = "grid_cols")]
    pub grid_rows: Option<usize>,
    #[arg(long, requires = "grid_rows")]
    pub grid_cols: Option<usize>,
    /// Random doubly-stochastic matrices for the quadratic-form check.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 8)]
    pub hidden: usize,
    /// Inner steps of the optimiser compared against brute force.
    #[arg(long, visible_alias = "T", default_value_t = 6)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl Default for OracleArgs {
    fn default() -> Self {
        Self {
            n: 4,
            grid_rows: None,
            grid_cols: None,
            samples: 100,
            dim: 2,
            hidden: 8,
            steps: 6,
            eta: 1.0,
            tol: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub positions: usize,
    pub channels: usize,
    pub samples: usize,
    /// Largest `|total_cost - pᵀQp|` over the samples.
    pub q_max_abs_diff: f64,
    pub q_passed: bool,
    pub uniform_cost: f64,
    pub uniform_passed: bool,
    pub brute: Option<BruteReport>,
    /// Why the brute-force comparison did not run.
    pub brute_error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BruteReport {
    pub brute_cost: f64,
    pub brute_assignment: Vec<usize>,
    pub po_cost: f64,
    pub po_assignment: Vec<usize>,
    pub po_optimal: bool,
}

pub fn run(args: OracleArgs) -> Result<(), CliError> {
    let report = check(&args)?;
    print_json(&report)?;
    if !report.q_passed || !report.uniform_passed {
        return Err(CliError::Runtime("total cost disagrees with its quadratic form".into()));
    }
    match &report.brute_error {
        None => Ok(()),
        Some(e) => Err(CliError::Runtime(format!("brute-force check skipped: {e}"))),
    }
}

pub fn structure(args: &OracleArgs) -> Result<ComparisonStructure, CliError> {
    match (args.grid_rows, args.grid_cols) {
        (Some(r), Some(c)) => Ok(ComparisonStructure::grid(r, c)?),
        _ if args.n >= 1 => Ok(ComparisonStructure::Sequence(args.n)),
        _ => Err(CliError::Usage("n must be positive".into())),
    }
}

/// Random comparator and inputs, then the quadratic-form, uniform-cost and brute-force checks.
pub fn check(args: &OracleArgs) -> Result<OracleReport, CliError> {
    let structure = structure(args)?;
    if args.dim == 0 || args.hidden == 0 {
        return Err(CliError::Usage("dim and hidden must be positive".into()));
    }
    let n = structure.positions();
    let channels = structure.channels();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let params = OrderingCostParams::new(
        xavier_with(&[args.hidden, 2 * args.dim], &mut rng)?.to_matrix()?,
        (0..args.hidden).map(|_| rng.gen_range(-0.1..0.1)).collect(),
        xavier_with(&[channels, args.hidden], &mut rng)?.to_matrix()?,
        vec![0.0; channels],
    )?;
    let x = DenseMatrix::from_fn(n, args.dim, |_, _| rng.gen_range(0.0..1.0));
    let (costs, _) = cost_matrix(&params, &x)?;

    let q = build_q(&costs, &structure)?;
    let mut q_max_abs_diff: f64 = 0.0;
    for _ in 0..args.samples {
        let logits = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-3.0..3.0));
        let (p, _) = sinkhorn(&logits, 50)?;
        let direct = total_cost(&costs, &p, &structure)?;
        q_max_abs_diff = q_max_abs_diff.max((direct - q.quadratic_form(&p)?).abs());
    }
    let uniform_cost = total_cost(&costs, &DenseMatrix::filled(n, n, 1.0 / n as f64), &structure)?;

    let brute = match brute_min(&costs, &structure) {
        Ok((best, brute_cost)) => {
            let config = PoConfig {
                steps: args.steps,
                eta: args.eta,
                sinkhorn_iters: 4,
                init: InitMode::Uniform,
                structure,
            };
            let (_, p, _) = po_forward(&x, &params, &config, None)?;
            let rounded = hungarian(&p.scale(-1.0))?;
            let po_cost = hard_cost(&costs, &structure, &rounded)?;
            Ok(BruteReport {
                brute_cost,
                brute_assignment: best.as_slice().to_vec(),
                po_cost,
                po_assignment: rounded.as_slice().to_vec(),
                po_optimal: po_cost <= brute_cost + 1e-12,
            })
        }
        Err(e) => Err(e.to_string()),
    };
    let (brute, brute_error) = match brute {
        Ok(b) => (Some(b), None),
        Err(e) => (None, Some(e)),
    };

    Ok(OracleReport {
        positions: n,
        channels,
        samples: args.samples,
        q_max_abs_diff,
        q_passed: q_max_abs_diff <= args.tol,
        uniform_cost,
        uniform_passed: uniform_cost.abs() <= 1e-12,
        brute,
        brute_error,
    })
}

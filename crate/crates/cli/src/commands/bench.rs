use std::time::Instant;

use clap::Args;
use poperm_core::linalg::DenseMatrix;
use poperm_core::ordering::OrderingCostParams;
use poperm_core::permopt::{po_backward, po_forward, PoConfig};
use poperm_core::train::xavier_with;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::print_json;
use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Comma-separated set sizes.
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    pub sizes: Vec<usize>,
    #[arg(long, visible_alias = "T", default_value_t = 6)]
    pub steps: usize,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    /// Timed repetitions per size; the fastest is reported.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub forward_ms: f64,
    pub per_step_ms: f64,
    pub backward_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub steps: usize,
    pub hidden: usize,
    pub rows: Vec<BenchRow>,
    /// Forward time at each size over the previous size.
    pub ratios: Vec<f64>,
}

pub fn run(args: BenchArgs) -> Result<(), CliError> {
    let report = bench(&args)?;
    print_json(&report)?;
    Ok(())
}

pub fn bench(args: &BenchArgs) -> Result<BenchReport, CliError> {
    if args.sizes.is_empty() || args.sizes.contains(&0) || args.steps == 0 || args.repeats == 0 {
        return Err(CliError::Usage("sizes, steps and repeats must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let params = OrderingCostParams::new(
        xavier_with(&[args.hidden, 2], &mut rng)?.to_matrix()?,
        vec![0.0; args.hidden],
        xavier_with(&[1, args.hidden], &mut rng)?.to_matrix()?,
        vec![0.0],
    )?;
    let mut rows = Vec::new();
    for &n in &args.sizes {
        let x = DenseMatrix::from_fn(n, 1, |_, _| rng.gen_range(0.0..1.0));
        let config = PoConfig::sequence(n, args.steps, 1.0);
        let d_y = DenseMatrix::filled(n, 1, 1.0 / n as f64);
        let (mut forward, mut backward) = (f64::INFINITY, f64::INFINITY);
        for _ in 0..args.repeats {
            let t = Instant::now();
            let (_, _, trace) = po_forward(&x, &params, &config, None)?;
            forward = forward.min(t.elapsed().as_secs_f64() * 1e3);
            let t = Instant::now();
            po_backward(&trace, &d_y, None)?;
            backward = backward.min(t.elapsed().as_secs_f64() * 1e3);
        }
        rows.push(BenchRow {
            n,
            forward_ms: forward,
            per_step_ms: forward / args.steps as f64,
            backward_ms: backward,
        });
    }
    let ratios = rows.windows(2).map(|w| w[1].forward_ms / w[0].forward_ms).collect();
    Ok(BenchReport {
        steps: args.steps,
        hidden: args.hidden,
        rows,
        ratios,
    })
}

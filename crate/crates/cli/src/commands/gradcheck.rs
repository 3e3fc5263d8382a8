use clap::Args;
use poperm_core::model::ModelSpec;
use poperm_core::tasks::{make_mosaic, sort_example, synthetic_image, Split, SyntheticStyle};
use poperm_core::train::{finite_diff_check, GradCheckOptions, GradCheckReport, ParamStore};
use poperm_core::DenseMatrix;
use serde::Serialize;

use crate::config::{Model, RunConfig, Task};
use crate::commands::print_json;
use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    #[arg(long, value_enum, default_value = "sort")]
    pub task: Task,
    #[arg(long, value_enum, default_value = "po-u")]
    pub model: Model,
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub grid_rows: usize,
    #[arg(long, default_value_t = 2)]
    pub grid_cols: usize,
    /// Inner gradient-descent steps.
    #[arg(long, visible_alias = "T", default_value_t = 3)]
    pub steps: usize,
    #[arg(long, default_value_t = 4)]
    pub hidden: usize,
    #[arg(long, default_value_t = 4)]
    pub embed: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub rel_tol: f64,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub fd_step: f64,
    /// Gradients below this magnitude are compared on an absolute scale.
    #[arg(long, default_value_t = 1e-6)]
    pub abs_floor: f64,
    #[arg(long, default_value_t = 200)]
    pub max_coords: usize,
    /// Set every parameter, including the step size, to zero.
    #[arg(long)]
    pub zero_params: bool,
    /// Test hook: negate the analytic gradient of this parameter.
    #[arg(long, hide = true)]
    pub wrong_sign: Option<String>,
}

impl Default for GradcheckArgs {
    fn default() -> Self {
        Self {
            task: Task::Sort,
            model: Model::PoU,
            n: 6,
            grid_rows: 2,
            grid_cols: 2,
            steps: 3,
            hidden: 4,
            embed: 4,
            seed: 0,
            rel_tol: 1e-5,
            fd_step: 1e-5,
            abs_floor: 1e-6,
            max_coords: 200,
            zero_params: false,
            wrong_sign: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamLine {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_gradient: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckOutput {
    pub passed: bool,
    pub deterministic: bool,
    pub rel_tol: f64,
    pub max_rel_error: f64,
    pub worst_param: Option<String>,
    pub worst_index: Option<usize>,
    pub params: Vec<ParamLine>,
}

impl From<(&GradCheckReport, f64)> for GradcheckOutput {
    fn from((r, rel_tol): (&GradCheckReport, f64)) -> Self {
        Self {
            passed: r.passed,
            deterministic: r.deterministic,
            rel_tol,
            max_rel_error: r.max_rel_error,
            worst_param: r.worst.as_ref().map(|(n, _)| n.clone()),
            worst_index: r.worst.as_ref().map(|&(_, i)| i),
            params: r
                .params
                .iter()
                .map(|p| ParamLine {
                    name: p.name.clone(),
                    checked: p.checked,
                    max_rel_error: p.max_rel_error,
                    max_abs_gradient: p.max_abs_analytic,
                })
                .collect(),
        }
    }
}

pub fn run(args: GradcheckArgs) -> Result<(), CliError> {
    let out = check(&args)?;
    print_json(&out)?;
    if out.passed {
        Ok(())
    } else {
        let culprit = out.worst_param.as_deref().unwrap_or("(non-deterministic loss)");
        Err(CliError::Runtime(format!(
            "gradient check failed: max relative error {:.3e} at {culprit}",
            out.max_rel_error
        )))
    }
}

/// Builds one small instance and its model and runs the finite-difference check.
pub fn check(args: &GradcheckArgs) -> Result<GradcheckOutput, CliError> {
    let mut cfg = RunConfig::defaults(args.task);
    cfg.model = args.model;
    cfg.n = args.n;
    cfg.grid_rows = args.grid_rows;
    cfg.grid_cols = args.grid_cols;
    cfg.steps = args.steps;
    cfg.hidden = args.hidden;
    cfg.embed = args.embed;
    cfg.seed = args.seed;
    cfg.validate()?;

    let (x, target) = instance(&cfg)?;
    let spec: ModelSpec = cfg.model_spec(x.cols());
    let mut store = spec.init_store(args.seed)?;
    if args.zero_params {
        zero(&mut store)?;
    }
    if let Some(name) = &args.wrong_sign {
        if !store.contains(name) {
            return Err(CliError::Usage(format!("no parameter named `{name}`")));
        }
    }
    let loss_fn = |s: &ParamStore| {
        let weights = spec.weights(s)?;
        let (loss, mut grads) = spec.loss_and_grads(&weights, &x, &target)?;
        if let Some(g) = args.wrong_sign.as_ref().and_then(|n| grads.get_mut(n)) {
            g.data_mut().iter_mut().for_each(|v| *v = -*v);
        }
        Ok((loss, grads))
    };
    let opts = GradCheckOptions {
        step: args.fd_step,
        rel_tol: args.rel_tol,
        max_coords: args.max_coords,
        seed: args.seed,
        abs_floor: args.abs_floor,
    };
    let report = finite_diff_check(loss_fn, &store, &opts)?;
    Ok(GradcheckOutput::from((&report, args.rel_tol)))
}

fn instance(cfg: &RunConfig) -> Result<(DenseMatrix, DenseMatrix), CliError> {
    match cfg.task {
        Task::Sort => {
            let e = sort_example(cfg.seed, Split::Test, 0, cfg.n, (0.0, 1.0));
            Ok((e.input, e.target))
        }
        Task::Mosaic => {
            let image = synthetic_image(cfg.seed, Split::Test, 0, SyntheticStyle::GradientBlob);
            let inst = make_mosaic(&image, cfg.grid_rows, cfg.grid_cols, cfg.seed)?;
            Ok((inst.tiles.clone(), inst.target()))
        }
    }
}

fn zero(store: &mut ParamStore) -> Result<(), CliError> {
    let names: Vec<String> = store.names().map(str::to_owned).collect();
    for name in names {
        store.get_mut(&name)?.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(())
}

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use poperm_core::model::{COST_B1, COST_B2, COST_W1, COST_W2};
use poperm_core::ordering::{pairwise_f, OrderingCostParams};
use poperm_core::train::{load_checkpoint, ParamStore};

use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub hi: f64,
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    /// Directory for `inspect_ch<c>.csv`; defaults to the checkpoint's directory.
    #[arg(long)]
    pub outdir: Option<PathBuf>,
}

/// `F(x_i, x_j)` over `points × points`, one table per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    pub points: Vec<f64>,
    pub values: Vec<Vec<Vec<f64>>>,
}

impl ComparisonTable {
    pub fn to_csv(&self, channel: usize) -> String {
        let mut s = String::from("x_i\\x_j");
        for p in &self.points {
            write!(s, ",{p}").unwrap();
        }
        s.push('\n');
        for (p, row) in self.points.iter().zip(&self.values[channel]) {
            write!(s, "{p}").unwrap();
            for v in row {
                write!(s, ",{v}").unwrap();
            }
            s.push('\n');
        }
        s
    }
}

pub fn run(args: InspectArgs) -> Result<(), CliError> {
    let store = load_checkpoint(&args.checkpoint)?;
    let table = comparison_table(&store, args.lo, args.hi, args.step)?;
    let dir = match &args.outdir {
        Some(d) => d.clone(),
        None => args.checkpoint.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    fs::create_dir_all(&dir)?;
    for c in 0..table.values.len() {
        let path = dir.join(format!("inspect_ch{c}.csv"));
        fs::write(&path, table.to_csv(c))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

/// Grid points `lo, lo + step, ...` up to `hi`.
pub fn grid_points(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0) || !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(CliError::Usage(format!("bad grid lo={lo} hi={hi} step={step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if count > 10_000 {
        return Err(CliError::Usage(format!("grid of {count} points is too large")));
    }
    // Dividing by the reciprocal keeps decimal steps exact: 3 / 10 rather than 3 * 0.1.
    let per_unit = 1.0 / step;
    Ok((0..count).map(|k| lo + k as f64 / per_unit).collect())
}

pub fn comparison_table(store: &ParamStore, lo: f64, hi: f64, step: f64) -> Result<ComparisonTable, CliError> {
    let get = |name: &str| store.get(name).map_err(|e| CliError::Usage(format!("not a model checkpoint: {e}")));
    let params = OrderingCostParams::new(
        get(COST_W1)?.to_matrix()?,
        get(COST_B1)?.data().to_vec(),
        get(COST_W2)?.to_matrix()?,
        get(COST_B2)?.data().to_vec(),
    )?;
    if params.feat_dim() != 1 {
        return Err(CliError::Usage(format!(
            "inspect needs a scalar-feature checkpoint; this one has {} features",
            params.feat_dim()
        )));
    }
    let points = grid_points(lo, hi, step)?;
    let mut values = vec![vec![vec![0.0; points.len()]; points.len()]; params.channels()];
    for (i, &a) in points.iter().enumerate() {
        for (j, &b) in points.iter().enumerate() {
            let ab = pairwise_f(&params, &[a], &[b])?;
            let ba = pairwise_f(&params, &[b], &[a])?;
            for (c, table) in values.iter_mut().enumerate() {
                table[i][j] = ab[c] - ba[c];
            }
        }
    }
    Ok(ComparisonTable { points, values })
}

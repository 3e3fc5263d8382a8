//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::train::{Gradients, ParamStore};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    pub rel_tol: f64,
    /// Coordinates checked per tensor; larger tensors are sub-sampled.
    pub max_coords: usize,
    pub seed: u64,
    /// Denominator floor of the relative error; gradients smaller than
    /// this are compared on an absolute scale.
    pub abs_floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            rel_tol: 1e-5,
            max_coords: 200,
            seed: 0,
            abs_floor: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_analytic: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub params: Vec<ParamCheck>,
    /// False when two evaluations at the same point disagreed.
    pub deterministic: bool,
    pub passed: bool,
}

/// `|a - f| / max(|a|, |f|, floor)`
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares the gradient returned by `loss_fn` with central differences of its loss.
pub fn finite_diff_check<F>(loss_fn: F, store: &ParamStore, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<(f64, Gradients)>,
{
    let (base, analytic) = loss_fn(store)?;
    let (again, _) = loss_fn(store)?;
    if base.to_bits() != again.to_bits() {
        return Ok(GradCheckReport {
            max_rel_error: f64::INFINITY,
            worst: None,
            params: Vec::new(),
            deterministic: false,
            passed: false,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut probe = store.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        params: Vec::new(),
        deterministic: true,
        passed: true,
    };
    let names: Vec<String> = store.names().map(str::to_owned).collect();
    for name in names {
        let len = store.get(&name)?.len();
        let coords: Vec<usize> = if len <= opts.max_coords {
            (0..len).collect()
        } else {
            let mut c = sample(&mut rng, len, opts.max_coords).into_vec();
            c.sort_unstable();
            c
        };
        let grad = analytic.get(&name);
        let mut check = ParamCheck {
            name: name.clone(),
            checked: coords.len(),
            max_rel_error: 0.0,
            max_abs_analytic: 0.0,
        };
        for idx in coords {
            let original = store.get(&name)?.data()[idx];
            probe.get_mut(&name)?.data_mut()[idx] = original + opts.step;
            let plus = loss_fn(&probe)?.0;
            probe.get_mut(&name)?.data_mut()[idx] = original - opts.step;
            let minus = loss_fn(&probe)?.0;
            probe.get_mut(&name)?.data_mut()[idx] = original;

            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = grad.map_or(0.0, |g| g.data()[idx]);
            let err = relative_error(a, numeric, opts.abs_floor);
            check.max_abs_analytic = check.max_abs_analytic.max(a.abs());
            if err > check.max_rel_error {
                check.max_rel_error = err;
            }
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((name.clone(), idx));
            }
        }
        report.params.push(check);
    }
    report.passed = report.max_rel_error <= opts.rel_tol;
    Ok(report)
}

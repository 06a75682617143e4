//! Two-cycle AECM fitting.
//!
//! Cycle one treats the memberships as missing and updates `π` and `μ`.
//! Cycle two treats memberships and latent factors as missing and updates
//! `D`, then `T`, then `B`. A `B` sweep that lowers the observed
//! log-likelihood below the previous iterate is reverted.

mod aitken;
mod steps;

use serde::{Deserialize, Serialize};

pub use aitken::{aitken_converged, AitkenStatus};
pub use steps::{
    argmax_assignment, column_scores, cycle1_update, e_step_responsibilities, latent_moments,
    repair_empty_clusters, update_b, update_d, update_t, ComponentMoments, LatentMoments, Responsibilities,
};

use crate::error::{Error, Result};
use crate::family::{parameter_count, validate_spec, ModelSpec, Widths};
use crate::init::InitialState;
use crate::model::{ComponentParams, DataMatrix, MixtureParams};
use crate::scalar::Scalar;
use crate::selection::bic;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitControls {
    /// Aitken tolerance on successive asymptotic log-likelihood estimates.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Components whose soft count falls below this abort the fit.
    pub min_component_count: f64,
}

impl Default for FitControls {
    fn default() -> Self {
        Self {
            epsilon: 1e-2,
            max_iter: 1000,
            min_component_count: 2.0,
        }
    }
}

impl FitControls {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iter < 3 {
            return Err(Error::Config(format!("max_iter must be at least 3, got {}", self.max_iter)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<F> {
    /// Components sorted by non-increasing mixing weight.
    pub params: MixtureParams<F>,
    /// Posteriors at the final parameters, columns in component order.
    pub responsibilities: Responsibilities<F>,
    pub row_labels: Vec<usize>,
    /// Observed-data log-likelihood after each full iteration.
    pub loglik_trace: Vec<F>,
    pub loglik: F,
    pub bic: F,
    pub n_params: usize,
    pub widths: Widths,
    pub converged: bool,
    pub iterations: usize,
    /// Number of iterations whose column sweep was rolled back.
    pub b_reverts: usize,
}

fn numerical(iteration: usize, what: &str) -> Error {
    Error::Numerical {
        iteration,
        message: format!("non-finite {what}"),
    }
}

/// Fits one `(spec, K, q)` candidate from the given starting state.
pub fn fit<F: Scalar>(
    data: &DataMatrix<F>,
    spec: ModelSpec,
    k: usize,
    q: &[usize],
    init: &InitialState<F>,
    controls: &FitControls,
) -> Result<FitResult<F>> {
    controls.validate()?;
    let (spec, widths) = validate_spec(spec, k, q, data.p())?;
    let per_comp = widths.per_component(k);
    init.check(data.n(), data.p(), &per_comp)?;

    let p = data.p();
    let mut components: Vec<ComponentParams<F>> = (0..k)
        .map(|kk| {
            let columns = if spec.b_common { init.columns[0].clone() } else { init.columns[kk].clone() };
            let t = if spec.t_fixed { vec![F::one(); per_comp[kk]] } else { init.t[kk].clone() };
            ComponentParams::new(F::one(), vec![F::zero(); p], columns, t, init.d[kk].clone())
        })
        .collect::<Result<_>>()?;
    for c in &mut components {
        c.pi = F::one() / F::from_count(k);
    }
    let mut params = MixtureParams { components, model: spec };

    let mut z = init.z0.clone();
    let mut trace: Vec<F> = Vec::new();
    let mut converged = false;
    let mut b_reverts = 0;
    let mut iterations = 0;

    for iter in 1..=controls.max_iter {
        iterations = iter;
        // Cycle 1.
        let (pi, mu) = steps::cycle1_at(data, &z, controls.min_component_count, iter)?;
        for ((c, w), m) in params.components.iter_mut().zip(pi).zip(mu) {
            c.pi = w;
            c.mu = m;
        }

        // Cycle 2.
        let (z_mid, ll_mid) = steps::evaluate(data, &params)?;
        if !ll_mid.is_finite() {
            return Err(numerical(iter, "log-likelihood"));
        }
        let moments = steps::latent_moments_at(data, &z_mid, &params, iter)?;
        let new_d = update_d(spec, &moments, &params);
        for (c, d) in params.components.iter_mut().zip(new_d) {
            c.d = d;
        }
        if !spec.t_fixed {
            let new_t = update_t(spec, &moments)?;
            for (c, t) in params.components.iter_mut().zip(new_t) {
                c.t = t;
            }
        }
        let old_b: Vec<_> = params.components.iter().map(|c| c.columns.clone()).collect();
        let new_b = update_b(spec, &moments, &params)?;
        let changed = new_b.iter().zip(&old_b).any(|(a, b)| a != b);
        for (c, b) in params.components.iter_mut().zip(new_b) {
            c.columns = b;
        }
        let (mut z_new, mut ll) = steps::evaluate(data, &params)?;
        if changed {
            if let Some(&prev) = trace.last() {
                if ll < prev {
                    for (c, b) in params.components.iter_mut().zip(old_b) {
                        c.columns = b;
                    }
                    (z_new, ll) = steps::evaluate(data, &params)?;
                    b_reverts += 1;
                }
            }
        }
        if !ll.is_finite() {
            return Err(numerical(iter, "log-likelihood"));
        }
        z = z_new;
        trace.push(ll);
        if trace.len() >= 3 && aitken_converged(&trace, F::lit(controls.epsilon)).converged {
            converged = true;
            break;
        }
    }

    sort_components(&mut params, &mut z);
    let widths = match widths {
        Widths::PerComponent(_) => Widths::PerComponent(params.widths()),
        shared => shared,
    };
    let loglik = *trace.last().expect("at least one iteration");
    let n_params = parameter_count(spec, p, k, &widths);
    let bic = bic(loglik, n_params, data.n());
    Ok(FitResult {
        row_labels: z.labels(),
        responsibilities: z,
        params,
        loglik_trace: trace,
        loglik,
        bic,
        n_params,
        widths,
        converged,
        iterations,
        b_reverts,
    })
}

/// Orders components by non-increasing `π`, breaking ties by the first mean
/// coordinate ascending, and permutes the responsibility columns to match.
fn sort_components<F: Scalar>(params: &mut MixtureParams<F>, z: &mut Responsibilities<F>) {
    let mut order: Vec<usize> = (0..params.k()).collect();
    order.sort_by(|&a, &b| {
        let (ca, cb) = (&params.components[a], &params.components[b]);
        cb.pi
            .as_f64()
            .total_cmp(&ca.pi.as_f64())
            .then(ca.mu[0].as_f64().total_cmp(&cb.mu[0].as_f64()))
    });
    if order.iter().enumerate().all(|(i, &o)| i == o) {
        return;
    }
    let old = std::mem::take(&mut params.components);
    params.components = order.iter().map(|&i| old[i].clone()).collect();
    z.permute_columns(&order);
}

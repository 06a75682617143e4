//! BIC scoring, candidate grids and the parallel search driver.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{fit, FitControls, FitResult};
use crate::error::{Error, Result};
use crate::family::{validate_spec, ModelSpec, Widths};
use crate::init::{initialize, InitOptions};
use crate::model::DataMatrix;
use crate::scalar::Scalar;

/// `2·loglik − m·ln n`; larger is better.
pub fn bic<F: Scalar>(loglik: F, m: usize, n: usize) -> F {
    F::lit(2.0) * loglik - F::from_count(m) * F::from_count(n).ln()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub spec: ModelSpec,
    pub k: usize,
    pub widths: Widths,
    pub seed: u64,
}

impl Candidate {
    /// Builds a validated candidate whose seed is split from `master_seed`.
    pub fn new(spec: ModelSpec, k: usize, q: &[usize], p: usize, master_seed: u64) -> Result<Self> {
        let (spec, widths) = validate_spec(spec, k, q, p)?;
        let mut c = Self {
            spec,
            k,
            widths,
            seed: 0,
        };
        c.seed = split_seed(master_seed, &c.encoding());
        Ok(c)
    }

    /// Canonical text form, e.g. `UUUU/K=3/q=3,3,2`.
    pub fn encoding(&self) -> String {
        format!("{}/K={}/q={}", self.spec.code(), self.k, self.widths)
    }

    fn priority_cmp(&self, other: &Self) -> Ordering {
        self.k
            .cmp(&other.k)
            .then(self.widths.total(self.k).cmp(&other.widths.total(other.k)))
            .then(self.spec.code().cmp(&other.spec.code()))
            .then(self.widths.per_component(self.k).cmp(&other.widths.per_component(other.k)))
    }
}

/// First eight bytes of `SHA-256(master_seed_le ‖ encoding)`.
pub fn split_seed(master_seed: u64, encoding: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(encoding.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

fn multisets(k: usize, values: &[usize]) -> Vec<Vec<usize>> {
    fn rec(k: usize, values: &[usize], start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..values.len() {
            cur.push(values[i]);
            rec(k, values, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, values, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Enumerates the search grid.
///
/// Models with free `B` and `T` get non-decreasing width vectors drawn from
/// `q_values`; the others get one scalar width. Combinations that fail
/// validation (e.g. `q > p`) are dropped. The list is sorted by smaller `K`,
/// smaller total width, model code and width vector, then truncated to `cap`.
pub fn enumerate_candidates(
    models: &[ModelSpec],
    k_values: &[usize],
    q_values: &[usize],
    p: usize,
    cap: Option<usize>,
    master_seed: u64,
) -> Result<Vec<Candidate>> {
    if models.is_empty() || k_values.is_empty() || q_values.is_empty() {
        return Err(Error::Config("models, K values and q values must be non-empty".into()));
    }
    let mut qs = q_values.to_vec();
    qs.sort_unstable();
    qs.dedup();
    let mut ks = k_values.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let mut ms = models.to_vec();
    ms.sort();
    ms.dedup();

    let mut out = Vec::new();
    for &spec in &ms {
        for &k in &ks {
            let vectors = if spec.requires_shared_q() || k == 1 {
                qs.iter().map(|&q| vec![q]).collect()
            } else {
                multisets(k, &qs)
            };
            for q in vectors {
                if let Ok(c) = Candidate::new(spec, k, &q, p, master_seed) {
                    out.push(c);
                }
            }
        }
    }
    out.sort_by(Candidate::priority_cmp);
    if let Some(cap) = cap {
        out.truncate(cap);
    }
    if out.is_empty() {
        return Err(Error::Config("no valid candidate in the requested grid".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchControls {
    pub fit: FitControls,
    pub init: InitOptions,
    /// Worker threads; `0` uses the global rayon pool.
    pub workers: usize,
}

impl Default for SearchControls {
    fn default() -> Self {
        Self {
            fit: FitControls::default(),
            init: InitOptions::default(),
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedFit<F> {
    pub candidate: Candidate,
    pub fit: FitResult<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailedFit {
    pub candidate: Candidate,
    pub reason: String,
}

/// Successful fits ranked by BIC, plus the candidates that failed.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport<F> {
    pub ranked: Vec<RankedFit<F>>,
    /// In candidate order.
    pub failures: Vec<FailedFit>,
}

impl<F: Scalar> SearchReport<F> {
    pub fn best(&self) -> Option<&RankedFit<F>> {
        self.ranked.first()
    }

    /// Best fit among candidates accepted by `keep`.
    pub fn best_where(&self, keep: impl Fn(&Candidate) -> bool) -> Option<&RankedFit<F>> {
        self.ranked.iter().find(|r| keep(&r.candidate))
    }
}

/// Initializes and fits one candidate from its own seed.
pub fn fit_candidate<F: Scalar>(
    data: &DataMatrix<F>,
    candidate: &Candidate,
    controls: &SearchControls,
) -> Result<FitResult<F>> {
    let init = initialize(
        data,
        candidate.spec,
        candidate.k,
        &candidate.widths,
        &controls.init,
        candidate.seed,
    )?;
    let q = candidate.widths.per_component(candidate.k);
    fit(data, candidate.spec, candidate.k, &q, &init, &controls.fit)
}

fn rank_cmp<F: Scalar>(a: &RankedFit<F>, b: &RankedFit<F>) -> Ordering {
    b.fit
        .bic
        .as_f64()
        .total_cmp(&a.fit.bic.as_f64())
        .then(a.fit.n_params.cmp(&b.fit.n_params))
        .then(a.candidate.spec.code().cmp(&b.candidate.spec.code()))
        .then(a.candidate.k.cmp(&b.candidate.k))
        .then(a.candidate.widths.cmp(&b.candidate.widths))
}

/// Fits every candidate and ranks the successes.
///
/// Each fit depends only on the data and its candidate, so the report is
/// identical for any worker count.
pub fn model_search<F: Scalar>(
    data: &DataMatrix<F>,
    candidates: &[Candidate],
    controls: &SearchControls,
) -> Result<SearchReport<F>> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidates to fit".into()));
    }
    controls.fit.validate()?;
    let run = || -> Vec<Result<FitResult<F>>> {
        candidates.par_iter().map(|c| fit_candidate(data, c, controls)).collect()
    };
    let results = if controls.workers == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(controls.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
            .install(run)
    };

    let mut ranked = Vec::new();
    let mut failures = Vec::new();
    for (candidate, result) in candidates.iter().cloned().zip(results) {
        match result {
            Ok(fit) => ranked.push(RankedFit { candidate, fit }),
            Err(e) => failures.push(FailedFit {
                candidate,
                reason: e.to_string(),
            }),
        }
    }
    if ranked.is_empty() {
        return Err(Error::SearchFailed(
            failures.into_iter().map(|f| (f.candidate.encoding(), f.reason)).collect(),
        ));
    }
    ranked.sort_by(rank_cmp);
    Ok(SearchReport { ranked, failures })
}

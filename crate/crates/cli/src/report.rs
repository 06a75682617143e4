//! The `report.json` document written by `fit`.

use bicluster::selection::{Candidate, RankedFit};
use bicluster::{Widths, SearchReport};
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Serialize)]
pub struct Report {
    pub format_version: u32,
    pub data: DataSummary,
    pub grid: Grid,
    pub best: Entry,
    pub best_params: Params,
    pub ranked: Vec<Entry>,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Serialize)]
pub struct DataSummary {
    pub n: usize,
    pub p: usize,
    pub standardized: bool,
    pub columns: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Grid {
    pub models: Vec<String>,
    pub fixed_t: bool,
    pub k_min: usize,
    pub k_max: usize,
    pub q_min: usize,
    pub q_max: usize,
    pub cap: Option<usize>,
    pub candidates: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub restarts: usize,
}

#[derive(Debug, Serialize)]
pub struct Entry {
    pub rank: usize,
    pub model: String,
    pub fixed_t: bool,
    pub k: usize,
    /// One width per component, in fitted component order.
    pub q: Vec<usize>,
    pub bic: f64,
    pub loglik: f64,
    pub n_params: usize,
    pub iterations: usize,
    pub converged: bool,
    pub b_reverts: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct Params {
    pub components: Vec<ComponentOut>,
}

#[derive(Debug, Serialize)]
pub struct ComponentOut {
    pub pi: f64,
    pub mu: Vec<f64>,
    /// 1-based column cluster of each variable.
    pub columns: Vec<usize>,
    pub t: Vec<f64>,
    pub d: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Failure {
    pub model: String,
    pub k: usize,
    pub q: Vec<usize>,
    pub reason: String,
}

fn widths_vec(c: &Candidate, w: &Widths) -> Vec<usize> {
    w.per_component(c.k)
}

fn entry(rank: usize, r: &RankedFit<f64>) -> Entry {
    Entry {
        rank,
        model: r.candidate.spec.code(),
        fixed_t: r.candidate.spec.t_fixed,
        k: r.candidate.k,
        q: widths_vec(&r.candidate, &r.fit.widths),
        bic: r.fit.bic,
        loglik: r.fit.loglik,
        n_params: r.fit.n_params,
        iterations: r.fit.iterations,
        converged: r.fit.converged,
        b_reverts: r.fit.b_reverts,
        seed: r.candidate.seed,
    }
}

pub fn build(
    cfg: &RunConfig,
    columns: Vec<String>,
    n: usize,
    candidates: usize,
    search: &SearchReport<f64>,
) -> Report {
    let best = search.best().expect("search returned at least one fit");
    Report {
        format_version: 1,
        data: DataSummary {
            n,
            p: columns.len(),
            standardized: cfg.standardize,
            columns,
        },
        grid: Grid {
            models: cfg.models.iter().map(|m| m.code()).collect(),
            fixed_t: cfg.legacy,
            k_min: cfg.k_range.0,
            k_max: cfg.k_range.1,
            q_min: cfg.q_range.0,
            q_max: cfg.q_range.1,
            cap: cfg.cap,
            candidates,
            seed: cfg.seed,
            epsilon: cfg.controls.fit.epsilon,
            max_iter: cfg.controls.fit.max_iter,
            restarts: cfg.controls.init.restarts,
        },
        best: entry(1, best),
        best_params: Params {
            components: best
                .fit
                .params
                .components
                .iter()
                .map(|c| ComponentOut {
                    pi: c.pi,
                    mu: c.mu.clone(),
                    columns: c.columns.as_slice().iter().map(|j| j + 1).collect(),
                    t: c.t.clone(),
                    d: c.d.clone(),
                })
                .collect(),
        },
        ranked: search.ranked.iter().enumerate().map(|(i, r)| entry(i + 1, r)).collect(),
        failures: search
            .failures
            .iter()
            .map(|f| Failure {
                model: f.candidate.spec.code(),
                k: f.candidate.k,
                q: f.candidate.widths.per_component(f.candidate.k),
                reason: f.reason.clone(),
            })
            .collect(),
    }
}

//! Dense reference implementations used to check the structured fast paths.
//!
//! Shared by the core integration tests and the acceptance harness.

#![allow(dead_code)]

use bicluster::engine::{latent_moments, update_b, Responsibilities};
use bicluster::family::{parameter_count, ModelSpec};
use bicluster::model::{structured_inverse, ColumnAssignment, ComponentParams, DataMatrix, MixtureParams};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_assignment(rng: &mut ChaCha8Rng, p: usize, q: usize) -> ColumnAssignment {
    let mut clusters: Vec<usize> = (0..p).map(|v| if v < q { v } else { rng.random_range(0..q) }).collect();
    for v in (1..p).rev() {
        let w = rng.random_range(0..=v);
        clusters.swap(v, w);
    }
    ColumnAssignment::new(clusters, q).unwrap()
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn dense_sigma(b: &ColumnAssignment, t: &[f64], d: &[f64]) -> DMatrix<f64> {
    let p = b.p();
    DMatrix::from_fn(p, p, |u, v| {
        let shared = if b.cluster_of(u) == b.cluster_of(v) { t[b.cluster_of(u)] } else { 0.0 };
        shared + if u == v { d[u] } else { 0.0 }
    })
}

fn loading(b: &ColumnAssignment) -> DMatrix<f64> {
    DMatrix::from_fn(b.p(), b.q(), |v, j| f64::from(u8::from(b.cluster_of(v) == j)))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

/// Structured inverse, quadratic form and log-determinant against dense
/// Cholesky and eigendecomposition on random instances with `p ≤ 50`.
pub fn inverse_oracle(instances: usize, seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    for case in 0..instances {
        let p = rng.random_range(1..=50);
        let q = rng.random_range(1..=p.min(12));
        let b = random_assignment(&mut rng, p, q);
        let t = uniform(&mut rng, 0.05, 5.0, q);
        let d = uniform(&mut rng, 0.1, 5.0, p);
        let x = uniform(&mut rng, -3.0, 3.0, p);

        let sigma = dense_sigma(&b, &t, &d);
        let chol = sigma.clone().cholesky().ok_or(format!("case {case}: dense matrix not positive definite"))?;
        let dense_x = chol.solve(&DVector::from_vec(x.clone()));
        let eig_log_det: f64 = sigma.symmetric_eigenvalues().iter().map(|l| l.ln()).sum();

        let inv = structured_inverse(&b, &t, &d).map_err(|e| e.to_string())?;
        let fast_x = inv.apply(&x);
        for v in 0..p {
            if !close(fast_x[v], dense_x[v], 1e-10) {
                return Err(format!("case {case} (p={p}, q={q}): solve entry {v}: {} vs {}", fast_x[v], dense_x[v]));
            }
        }
        let dense_quad = DVector::from_vec(x.clone()).dot(&dense_x);
        if !close(inv.quad_form(&x), dense_quad, 1e-10) {
            return Err(format!("case {case}: quadratic form {} vs {dense_quad}", inv.quad_form(&x)));
        }
        if !close(inv.log_det(), eig_log_det, 1e-10) {
            return Err(format!("case {case}: log det {} vs {eig_log_det}", inv.log_det()));
        }
    }
    Ok(())
}

/// Gaussian log-density against the dense formula.
pub fn density_oracle(instances: usize, seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    for case in 0..instances {
        let p = rng.random_range(1..=12);
        let q = rng.random_range(1..=p);
        let b = random_assignment(&mut rng, p, q);
        let t = uniform(&mut rng, 0.05, 5.0, q);
        let d = uniform(&mut rng, 0.1, 5.0, p);
        let mu = uniform(&mut rng, -2.0, 2.0, p);
        let y = uniform(&mut rng, -4.0, 4.0, p);
        let comp = ComponentParams::new(1.0, mu.clone(), b.clone(), t.clone(), d.clone()).unwrap();
        let fast = bicluster::model::log_density(&y, &comp).map_err(|e| e.to_string())?;

        let sigma = dense_sigma(&b, &t, &d);
        let r = DVector::from_vec(y.iter().zip(&mu).map(|(a, m)| a - m).collect());
        let inv = sigma.clone().try_inverse().ok_or("singular dense matrix")?;
        let dense = -0.5 * (p as f64 * (2.0 * std::f64::consts::PI).ln() + sigma.determinant().ln() + r.dot(&(&inv * &r)));
        if !close(fast, dense, 1e-10) {
            return Err(format!("case {case}: log density {fast} vs {dense}"));
        }
    }
    Ok(())
}

/// Dense posterior factor moments for one component: `(û rows, V, θ, γ)`.
pub struct DenseMoments {
    pub u_hat: Vec<DVector<f64>>,
    pub post_var: DMatrix<f64>,
    pub theta: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub n_k: f64,
    pub centered: Vec<DVector<f64>>,
}

pub fn dense_moments(data: &DataMatrix<f64>, z: &[f64], comp: &ComponentParams<f64>) -> DenseMoments {
    let (p, q) = (comp.p(), comp.q());
    let lam = loading(&comp.columns);
    let tm = DMatrix::from_diagonal(&DVector::from_vec(comp.t.clone()));
    let sigma_inv = dense_sigma(&comp.columns, &comp.t, &comp.d).try_inverse().unwrap();
    let gain = &tm * lam.transpose() * &sigma_inv;
    let post_var = &tm - &gain * &lam * &tm;
    let mut theta = DMatrix::zeros(q, q);
    let mut gamma = DMatrix::zeros(p, q);
    let mut u_hat = Vec::new();
    let mut centered = Vec::new();
    let n_k: f64 = z.iter().sum();
    for (i, y) in data.rows().enumerate() {
        let r = DVector::from_iterator(p, y.iter().zip(&comp.mu).map(|(a, m)| a - m));
        let u = &gain * &r;
        theta += z[i] * &u * u.transpose();
        gamma += z[i] * &r * u.transpose();
        u_hat.push(u);
        centered.push(r);
    }
    let theta = &post_var + theta / n_k;
    DenseMoments {
        u_hat,
        post_var,
        theta,
        gamma,
        n_k,
        centered,
    }
}

/// Expected complete-data log-likelihood terms of `N(y; μ + B u, D)` that
/// depend on the column assignment, summed over rows and components.
pub fn dense_assignment_objective(
    moments: &[DenseMoments],
    z: &[Vec<f64>],
    d: &[Vec<f64>],
    assign: &[&[usize]],
) -> f64 {
    let mut total = 0.0;
    for (k, m) in moments.iter().enumerate() {
        for (i, (r, u)) in m.centered.iter().zip(&m.u_hat).enumerate() {
            let second = &m.post_var + u * u.transpose();
            for v in 0..r.len() {
                let j = assign[k][v];
                total -= z[i][k] * (r[v] * r[v] - 2.0 * r[v] * u[j] + second[(j, j)]) / (2.0 * d[k][v]);
            }
        }
    }
    total
}

fn surjections(p: usize, q: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let total = q.pow(p as u32);
    for code in 0..total {
        let mut c = code;
        let labels: Vec<usize> = (0..p)
            .map(|_| {
                let l = c % q;
                c /= q;
                l
            })
            .collect();
        if (0..q).all(|j| labels.contains(&j)) {
            out.push(labels);
        }
    }
    out
}

fn random_instance(rng: &mut ChaCha8Rng, spec: ModelSpec, n: usize, p: usize, k: usize, q: usize) -> (DataMatrix<f64>, Vec<Vec<f64>>, MixtureParams<f64>) {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| uniform(rng, -3.0, 3.0, p)).collect();
    let data = DataMatrix::from_rows(&rows).unwrap();
    let z: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let raw = uniform(rng, 0.05, 1.0, k);
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / s).collect()
        })
        .collect();
    let shared_b = random_assignment(rng, p, q);
    let components = (0..k)
        .map(|_| {
            let b = if spec.b_common { shared_b.clone() } else { random_assignment(rng, p, q) };
            ComponentParams::new(
                1.0 / k as f64,
                uniform(rng, -1.0, 1.0, p),
                b,
                uniform(rng, 0.2, 3.0, q),
                uniform(rng, 0.2, 3.0, p),
            )
            .unwrap()
        })
        .collect();
    (data, z, MixtureParams { components, model: spec })
}

/// Column-assignment step against exhaustive search over every assignment
/// with no empty cluster (`p ≤ 6`, `q ≤ 3`).
pub fn update_b_oracle(instances: usize, seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let specs = ModelSpec::all();
    for case in 0..instances {
        let spec = specs[rng.random_range(0..specs.len())];
        let p = rng.random_range(2..=6);
        let q = rng.random_range(1..=p.min(3));
        let k = rng.random_range(1..=2);
        let (data, z, params) = random_instance(&mut rng, spec, 25, p, k, q);
        let resp = Responsibilities::from_rows(&z).unwrap();
        let mom = latent_moments(&data, &resp, &params).map_err(|e| e.to_string())?;
        let got = update_b(spec, &mom, &params).map_err(|e| e.to_string())?;

        let dense: Vec<DenseMoments> = (0..k)
            .map(|kk| {
                let zk: Vec<f64> = z.iter().map(|r| r[kk]).collect();
                dense_moments(&data, &zk, &params.components[kk])
            })
            .collect();
        let d: Vec<Vec<f64>> = params.components.iter().map(|c| c.d.clone()).collect();
        let got_slices: Vec<&[usize]> = got.iter().map(|a| a.as_slice()).collect();
        let got_value = dense_assignment_objective(&dense, &z, &d, &got_slices);

        let feasible = surjections(p, q);
        let best = if spec.b_common {
            feasible
                .iter()
                .map(|a| dense_assignment_objective(&dense, &z, &d, &vec![a.as_slice(); k]))
                .fold(f64::NEG_INFINITY, f64::max)
        } else {
            // Components separate, so maximize each one on its own.
            (0..k)
                .map(|kk| {
                    feasible
                        .iter()
                        .map(|a| {
                            dense_assignment_objective(&dense[kk..=kk], &z.iter().map(|r| vec![r[kk]]).collect::<Vec<_>>(), &d[kk..=kk], &[a.as_slice()])
                        })
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .sum()
        };
        if !close(got_value, best, 1e-9) {
            return Err(format!(
                "case {case} ({spec}, p={p}, q={q}, K={k}): step objective {got_value} vs exhaustive {best}"
            ));
        }
    }
    Ok(())
}

/// Latent moments against dense GLS formulas.
pub fn moments_oracle(instances: usize, seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    for case in 0..instances {
        let p = rng.random_range(1..=10);
        let q = rng.random_range(1..=p);
        let k = rng.random_range(1..=3);
        let (data, z, params) = random_instance(&mut rng, ModelSpec::new(false, false, false, false), 20, p, k, q);
        let resp = Responsibilities::from_rows(&z).unwrap();
        let mom = latent_moments(&data, &resp, &params).map_err(|e| e.to_string())?;
        for kk in 0..k {
            let zk: Vec<f64> = z.iter().map(|r| r[kk]).collect();
            let dense = dense_moments(&data, &zk, &params.components[kk]);
            let m = &mom.components[kk];
            if !close(m.n_k, dense.n_k, 1e-12) {
                return Err(format!("case {case}: n_k"));
            }
            for i in 0..data.n() {
                for j in 0..q {
                    if !close(m.u_hat[i * q + j], dense.u_hat[i][j], 1e-10) {
                        return Err(format!("case {case}: u_hat[{i}][{j}] {} vs {}", m.u_hat[i * q + j], dense.u_hat[i][j]));
                    }
                }
            }
            for a in 0..q {
                for b in 0..q {
                    if !close(m.theta[a][b], dense.theta[(a, b)], 1e-10) {
                        return Err(format!("case {case}: theta[{a}][{b}] {} vs {}", m.theta[a][b], dense.theta[(a, b)]));
                    }
                }
            }
            for v in 0..p {
                for j in 0..q {
                    if !close(m.gamma(v, j), dense.gamma[(v, j)], 1e-10) {
                        return Err(format!("case {case}: gamma[{v}][{j}]"));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Free-parameter counts written out row by row from the family table.
pub fn table_parameter_count(code: &str, p: usize, k: usize, q: &[usize]) -> usize {
    let sum_q: usize = q.iter().sum();
    let q1 = q[0];
    let tail = k - 1 + p * k;
    match code {
        "UUUU" => p * k + sum_q + p * k + tail,
        "UUUC" => p * k + sum_q + k + tail,
        "UUCU" => p * k + sum_q + p + tail,
        "UUCC" => p * k + sum_q + 1 + tail,
        "UCUU" => p * k + q1 + p * k + tail,
        "UCUC" => p * k + q1 + k + tail,
        "UCCU" => p * k + q1 + p + tail,
        "UCCC" => p * k + q1 + 1 + tail,
        "CUUU" => p + sum_q + p * k + tail,
        "CUUC" => p + sum_q + k + tail,
        "CUCU" => p + sum_q + p + tail,
        "CUCC" => p + sum_q + 1 + tail,
        "CCUU" => p + q1 + p * k + tail,
        "CCUC" => p + q1 + k + tail,
        "CCCU" => p + q1 + p + tail,
        "CCCC" => p + q1 + 1 + tail,
        other => panic!("unknown model {other}"),
    }
}

/// Every model at `p = 8`, `K = 3` and each valid width choice up to 4.
pub fn parameter_count_oracle() -> Result<(), String> {
    let (p, k) = (8, 3);
    for spec in ModelSpec::all() {
        let mut choices: Vec<Vec<usize>> = (1..=4).map(|q| vec![q; k]).collect();
        if !spec.requires_shared_q() {
            choices.extend([vec![1, 2, 3], vec![4, 2, 2], vec![3, 3, 2]]);
        }
        for q in choices {
            let (spec, widths) = bicluster::family::validate_spec(spec, k, &q, p).map_err(|e| e.to_string())?;
            let got = parameter_count(spec, p, k, &widths);
            let want = table_parameter_count(&spec.code(), p, k, &q);
            if got != want {
                return Err(format!("{spec} q={q:?}: {got} vs table {want}"));
            }
        }
    }
    Ok(())
}

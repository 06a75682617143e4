//! E-steps and conditional-maximization steps of the two AECM cycles.

use crate::assign::max_weight_assignment;
use crate::error::{Error, Result};
use crate::family::ModelSpec;
use crate::model::{ColumnAssignment, DataMatrix, MixtureParams, StructuredInverse};
use crate::scalar::{log_sum_exp, Scalar, VARIANCE_FLOOR};

/// Posterior membership probabilities, `n×K` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities<F> {
    z: Vec<F>,
    n: usize,
    k: usize,
}

impl<F: Scalar> Responsibilities<F> {
    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if n == 0 || k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::Dimension("responsibilities must be a non-empty n x K table".into()));
        }
        Ok(Self { z: rows.concat(), n, k })
    }

    /// One-hot rows from zero-based labels.
    pub fn from_labels(labels: &[usize], k: usize) -> Result<Self> {
        if labels.is_empty() || k == 0 {
            return Err(Error::Dimension("need at least one label and one component".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Dimension(format!("label {bad} out of range for K={k}")));
        }
        let mut z = vec![F::zero(); labels.len() * k];
        for (i, &l) in labels.iter().enumerate() {
            z[i * k + l] = F::one();
        }
        Ok(Self { z, n: labels.len(), k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.z[i * self.k..(i + 1) * self.k]
    }

    pub fn get(&self, i: usize, k: usize) -> F {
        self.z[i * self.k + k]
    }

    /// Column sums `n_k`.
    pub fn counts(&self) -> Vec<F> {
        let mut counts = vec![F::zero(); self.k];
        for row in self.z.chunks_exact(self.k) {
            for (c, &z) in counts.iter_mut().zip(row) {
                *c = *c + z;
            }
        }
        counts
    }

    /// Zero-based argmax per row, ties toward the lower index.
    pub fn labels(&self) -> Vec<usize> {
        self.z
            .chunks_exact(self.k)
            .map(|row| {
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }

    pub(crate) fn permute_columns(&mut self, order: &[usize]) {
        let mut out = vec![F::zero(); self.z.len()];
        for i in 0..self.n {
            for (new, &old) in order.iter().enumerate() {
                out[i * self.k + new] = self.z[i * self.k + old];
            }
        }
        self.z = out;
    }
}

/// Evaluates all component log-densities, returning the normalized posteriors
/// and the observed-data log-likelihood.
pub(crate) fn evaluate<F: Scalar>(
    data: &DataMatrix<F>,
    params: &MixtureParams<F>,
) -> Result<(Responsibilities<F>, F)> {
    let inverses = params.inverses()?;
    let k = params.k();
    let log_pi: Vec<F> = params.components.iter().map(|c| c.pi.ln()).collect();
    let q_max = params.widths().into_iter().max().unwrap_or(1);
    let mut u = vec![F::zero(); q_max];
    let mut centered = vec![F::zero(); data.p()];
    let mut z = vec![F::zero(); data.n() * k];
    let mut loglik = F::zero();
    for (i, y) in data.rows().enumerate() {
        let row = &mut z[i * k..(i + 1) * k];
        for (kk, (c, inv)) in params.components.iter().zip(&inverses).enumerate() {
            row[kk] = log_pi[kk] + inv.log_density_with(y, &c.mu, &mut u[..inv.q()], &mut centered);
        }
        let norm = log_sum_exp(row);
        // Shifting by the log-sum-exp keeps the largest term at exp(0) scale.
        for v in row.iter_mut() {
            *v = (*v - norm).exp();
        }
        loglik = loglik + norm;
    }
    Ok((Responsibilities { z, n: data.n(), k }, loglik))
}

/// E-step: `ẑᵢₖ ∝ πₖ fₖ(yᵢ)`.
pub fn e_step_responsibilities<F: Scalar>(
    data: &DataMatrix<F>,
    params: &MixtureParams<F>,
) -> Result<Responsibilities<F>> {
    evaluate(data, params).map(|(z, _)| z)
}

fn check_counts<F: Scalar>(counts: &[F], min_count: f64, iteration: usize) -> Result<()> {
    for (k, &nk) in counts.iter().enumerate() {
        if !(nk.as_f64() >= min_count) || nk <= F::zero() {
            return Err(Error::DegenerateComponent {
                component: k,
                iteration,
                weight: nk.as_f64(),
            });
        }
    }
    Ok(())
}

/// First-cycle CM step: `πₖ = nₖ/n` and responsibility-weighted means.
pub fn cycle1_update<F: Scalar>(
    data: &DataMatrix<F>,
    z: &Responsibilities<F>,
    min_count: f64,
) -> Result<(Vec<F>, Vec<Vec<F>>)> {
    cycle1_at(data, z, min_count, 0)
}

pub(crate) fn cycle1_at<F: Scalar>(
    data: &DataMatrix<F>,
    z: &Responsibilities<F>,
    min_count: f64,
    iteration: usize,
) -> Result<(Vec<F>, Vec<Vec<F>>)> {
    if z.n() != data.n() {
        return Err(Error::Dimension(format!("{} responsibility rows for {} observations", z.n(), data.n())));
    }
    let counts = z.counts();
    check_counts(&counts, min_count, iteration)?;
    let mut mu = vec![vec![F::zero(); data.p()]; z.k()];
    for (i, y) in data.rows().enumerate() {
        for (k, m) in mu.iter_mut().enumerate() {
            let w = z.get(i, k);
            if w == F::zero() {
                continue;
            }
            for (mv, &yv) in m.iter_mut().zip(y) {
                *mv = *mv + w * yv;
            }
        }
    }
    for (m, &nk) in mu.iter_mut().zip(&counts) {
        m.iter_mut().for_each(|v| *v = *v / nk);
    }
    let n = F::from_count(data.n());
    Ok((counts.iter().map(|&c| c / n).collect(), mu))
}

/// Conditional latent-factor moments of one component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMoments<F> {
    /// `nₖ = Σᵢ ẑᵢₖ`.
    pub n_k: F,
    /// `E(Uᵢₖ | yᵢ, zᵢₖ = 1)`, `n×qₖ` row-major.
    pub u_hat: Vec<F>,
    /// `θₖ = T − T Bᵀ Σ⁻¹ B T + Σᵢ ẑᵢₖ ûᵢₖ ûᵢₖᵀ / nₖ`, `qₖ×qₖ` rows.
    pub theta: Vec<Vec<F>>,
    /// `γ[v][j] = Σᵢ ẑᵢₖ (yᵢᵥ − μₖᵥ) ûᵢₖⱼ`, `p×qₖ` row-major.
    pub gamma: Vec<F>,
    /// Diagonal of the weighted scatter `Sₖ`.
    pub scatter_diag: Vec<F>,
}

impl<F: Scalar> ComponentMoments<F> {
    pub fn q(&self) -> usize {
        self.theta.len()
    }

    pub fn gamma(&self, v: usize, j: usize) -> F {
        self.gamma[v * self.q() + j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentMoments<F> {
    pub components: Vec<ComponentMoments<F>>,
}

impl<F: Scalar> LatentMoments<F> {
    pub fn total_weight(&self) -> F {
        self.components.iter().map(|m| m.n_k).sum()
    }

    /// `π̂ₖ = nₖ / n` from the cycle-two responsibilities.
    pub fn weights(&self) -> Vec<F> {
        let n = self.total_weight();
        self.components.iter().map(|m| m.n_k / n).collect()
    }
}

/// Second-cycle E-step for the latent factors.
pub fn latent_moments<F: Scalar>(
    data: &DataMatrix<F>,
    z: &Responsibilities<F>,
    params: &MixtureParams<F>,
) -> Result<LatentMoments<F>> {
    latent_moments_at(data, z, params, 0)
}

pub(crate) fn latent_moments_at<F: Scalar>(
    data: &DataMatrix<F>,
    z: &Responsibilities<F>,
    params: &MixtureParams<F>,
    iteration: usize,
) -> Result<LatentMoments<F>> {
    let p = data.p();
    let mut out = Vec::with_capacity(params.k());
    let mut centered = vec![F::zero(); p];
    for (k, comp) in params.components.iter().enumerate() {
        let inv: StructuredInverse<F> = comp.inverse()?;
        let q = comp.q();
        let mut n_k = F::zero();
        let mut u_hat = vec![F::zero(); data.n() * q];
        let mut uu = vec![vec![F::zero(); q]; q];
        let mut gamma = vec![F::zero(); p * q];
        let mut scatter = vec![F::zero(); p];
        for (i, y) in data.rows().enumerate() {
            for ((c, &a), &m) in centered.iter_mut().zip(y).zip(&comp.mu) {
                *c = a - m;
            }
            let u = &mut u_hat[i * q..(i + 1) * q];
            inv.quad_and_factor_mean(&centered, u);
            let w = z.get(i, k);
            if w == F::zero() {
                continue;
            }
            n_k = n_k + w;
            for j in 0..q {
                let wu = w * u[j];
                for h in 0..q {
                    uu[j][h] = uu[j][h] + wu * u[h];
                }
            }
            for (v, &r) in centered.iter().enumerate() {
                let wr = w * r;
                scatter[v] = scatter[v] + wr * r;
                for j in 0..q {
                    gamma[v * q + j] = gamma[v * q + j] + wr * u[j];
                }
            }
        }
        if !(n_k > F::zero()) {
            return Err(Error::DegenerateComponent {
                component: k,
                iteration,
                weight: n_k.as_f64(),
            });
        }
        let post_var = inv.posterior_factor_variance();
        let theta: Vec<Vec<F>> = (0..q)
            .map(|j| {
                (0..q)
                    .map(|h| {
                        let base = if j == h { post_var[j] } else { F::zero() };
                        base + uu[j][h] / n_k
                    })
                    .collect()
            })
            .collect();
        scatter.iter_mut().for_each(|s| *s = *s / n_k);
        out.push(ComponentMoments {
            n_k,
            u_hat,
            theta,
            gamma,
            scatter_diag: scatter,
        });
    }
    Ok(LatentMoments { components: out })
}

/// Unconstrained noise update `diag{Sₖ − 2 B T Bᵀ Σ⁻¹ Sₖ + B θₖ Bᵀ}` for one component.
fn raw_noise<F: Scalar>(m: &ComponentMoments<F>, cols: &ColumnAssignment) -> Vec<F> {
    let two = F::lit(2.0);
    (0..cols.p())
        .map(|v| {
            let j = cols.cluster_of(v);
            m.scatter_diag[v] - two * m.gamma(v, j) / m.n_k + m.theta[j][j]
        })
        .collect()
}

fn mean<F: Scalar>(xs: &[F]) -> F {
    xs.iter().copied().sum::<F>() / F::from_count(xs.len())
}

fn floored<F: Scalar>(xs: Vec<F>) -> Vec<F> {
    let floor = F::lit(VARIANCE_FLOOR);
    xs.into_iter().map(|x| if x > floor { x } else { floor }).collect()
}

/// CM step for the noise variances under the two `D` letters.
pub fn update_d<F: Scalar>(spec: ModelSpec, moments: &LatentMoments<F>, params: &MixtureParams<F>) -> Vec<Vec<F>> {
    let raw: Vec<Vec<F>> = moments
        .components
        .iter()
        .zip(&params.components)
        .map(|(m, c)| raw_noise(m, &c.columns))
        .collect();
    let p = params.p();
    let weights = moments.weights();
    let per_component: Vec<Vec<F>> = match (spec.d_common, spec.d_isotropic) {
        (false, false) => raw,
        (false, true) => raw.iter().map(|r| vec![mean(r); p]).collect(),
        (true, false) => {
            let mut pooled = vec![F::zero(); p];
            for (r, &w) in raw.iter().zip(&weights) {
                for (a, &b) in pooled.iter_mut().zip(r) {
                    *a = *a + w * b;
                }
            }
            vec![pooled; raw.len()]
        }
        (true, true) => {
            let d = raw.iter().zip(&weights).map(|(r, &w)| w * mean(r)).sum::<F>();
            vec![vec![d; p]; raw.len()]
        }
    };
    per_component.into_iter().map(floored).collect()
}

/// CM step for the latent-factor variances: `diag(θₖ)`, or their π-weighted
/// average when `T` is shared.
pub fn update_t<F: Scalar>(spec: ModelSpec, moments: &LatentMoments<F>) -> Result<Vec<Vec<F>>> {
    let diag: Vec<Vec<F>> = moments
        .components
        .iter()
        .map(|m| (0..m.q()).map(|j| m.theta[j][j]).collect())
        .collect();
    if !spec.t_common {
        return Ok(diag.into_iter().map(floored).collect());
    }
    let q = diag[0].len();
    if diag.iter().any(|d| d.len() != q) {
        return Err(Error::Dimension("shared T needs equal q across components".into()));
    }
    let mut pooled = vec![F::zero(); q];
    for (d, w) in diag.iter().zip(moments.weights()) {
        for (a, &b) in pooled.iter_mut().zip(d) {
            *a = *a + w * b;
        }
    }
    Ok(vec![floored(pooled); diag.len()])
}

/// Per-component `p×q` score tables for the column-assignment step.
///
/// `score(v, j) = (γᵥ[j] − ½ nₖ θₖ[j,j]) / dᵥ` is the part of the expected
/// complete-data log-likelihood that depends on variable `v` loading on factor `j`.
pub fn column_scores<F: Scalar>(moments: &LatentMoments<F>, params: &MixtureParams<F>) -> Vec<Vec<Vec<F>>> {
    let half = F::lit(0.5);
    moments
        .components
        .iter()
        .zip(&params.components)
        .map(|(m, c)| {
            (0..c.p())
                .map(|v| {
                    let inv_d = c.d[v].recip();
                    (0..m.q())
                        .map(|j| inv_d * (m.gamma(v, j) - half * m.n_k * m.theta[j][j]))
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Row-wise argmax over a `p×q` score table, ties toward the lower cluster.
pub fn argmax_assignment<F: Scalar>(scores: &[Vec<F>]) -> Vec<usize> {
    scores
        .iter()
        .map(|row| {
            let mut best = 0;
            for (j, &s) in row.iter().enumerate() {
                if s > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Makes an assignment surjective at the least total score cost.
///
/// When `clusters` is the row-wise argmax of `scores`, the result maximizes
/// the total score over all assignments that leave no cluster empty: each
/// cluster gets one representative by optimal assignment and every other
/// variable keeps its cluster.
pub fn repair_empty_clusters<F: Scalar>(
    mut clusters: Vec<usize>,
    q: usize,
    scores: &[Vec<F>],
) -> Result<ColumnAssignment> {
    let p = clusters.len();
    if p < q {
        let cluster = (0..q).find(|j| !clusters.contains(j)).unwrap_or(0);
        return Err(Error::EmptyColumnCluster { cluster, p, q });
    }
    let mut sizes = vec![0usize; q];
    for &j in &clusters {
        sizes[j] += 1;
    }
    if sizes.iter().all(|&s| s > 0) {
        return ColumnAssignment::new(clusters, q);
    }
    let gain: Vec<Vec<f64>> = (0..q)
        .map(|j| {
            (0..p)
                .map(|v| (scores[v][j] - scores[v][clusters[v]]).as_f64())
                .collect()
        })
        .collect();
    for (j, v) in max_weight_assignment(&gain).into_iter().enumerate() {
        clusters[v] = j;
    }
    ColumnAssignment::new(clusters, q)
}

/// CM step for the column assignments: one sweep of per-variable argmax,
/// summing scores over components when `B` is shared.
pub fn update_b<F: Scalar>(
    spec: ModelSpec,
    moments: &LatentMoments<F>,
    params: &MixtureParams<F>,
) -> Result<Vec<ColumnAssignment>> {
    let scores = column_scores(moments, params);
    if spec.b_common {
        let q = scores[0][0].len();
        let p = scores[0].len();
        let summed: Vec<Vec<F>> = (0..p)
            .map(|v| (0..q).map(|j| scores.iter().map(|s| s[v][j]).sum()).collect())
            .collect();
        let shared = repair_empty_clusters(argmax_assignment(&summed), q, &summed)?;
        Ok(vec![shared; scores.len()])
    } else {
        scores
            .iter()
            .map(|s| repair_empty_clusters(argmax_assignment(s), s[0].len(), s))
            .collect()
    }
}

//! Starting values: a hard row partition and per-component eigen-based
//! starts for `B`, `T` and `D`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{repair_empty_clusters, Responsibilities};
use crate::error::{Error, Result};
use crate::family::{ModelSpec, Widths};
use crate::model::{ColumnAssignment, DataMatrix};
use crate::scalar::{Scalar, VARIANCE_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionStrategy {
    Kmeans,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitOptions {
    pub strategy: PartitionStrategy,
    pub restarts: usize,
}

impl Default for InitOptions {
    fn default() -> Self {
        Self {
            strategy: PartitionStrategy::Kmeans,
            restarts: 10,
        }
    }
}

/// Everything [`crate::engine::fit`] needs to start iterating.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState<F> {
    pub z0: Responsibilities<F>,
    pub columns: Vec<ColumnAssignment>,
    pub t: Vec<Vec<F>>,
    pub d: Vec<Vec<F>>,
}

impl<F: Scalar> InitialState<F> {
    /// Warm start from converged parameters and their posteriors.
    pub fn from_fit(fit: &crate::engine::FitResult<F>) -> Self {
        let comps = &fit.params.components;
        Self {
            z0: fit.responsibilities.clone(),
            columns: comps.iter().map(|c| c.columns.clone()).collect(),
            t: comps.iter().map(|c| c.t.clone()).collect(),
            d: comps.iter().map(|c| c.d.clone()).collect(),
        }
    }

    pub(crate) fn check(&self, n: usize, p: usize, widths: &[usize]) -> Result<()> {
        let k = widths.len();
        if self.z0.n() != n || self.z0.k() != k {
            return Err(Error::Dimension(format!(
                "initial memberships are {}x{}, expected {n}x{k}",
                self.z0.n(),
                self.z0.k()
            )));
        }
        if self.columns.len() != k || self.t.len() != k || self.d.len() != k {
            return Err(Error::Dimension(format!("initial state must describe {k} components")));
        }
        for (kk, &q) in widths.iter().enumerate() {
            if self.columns[kk].q() != q || self.t[kk].len() != q {
                return Err(Error::Dimension(format!("component {kk}: initial B/T width differs from q={q}")));
            }
            if self.columns[kk].p() != p || self.d[kk].len() != p {
                return Err(Error::Dimension(format!("component {kk}: initial B/D length differs from p={p}")));
            }
        }
        Ok(())
    }
}

fn sq_dist<F: Scalar>(a: &[F], b: &[F]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = (x - y).as_f64();
            d * d
        })
        .sum()
}

/// Row indices in lexicographic order of their values.
fn canonical_order<F: Scalar>(data: &DataMatrix<F>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..data.n()).collect();
    idx.sort_by(|&a, &b| {
        data.row(a)
            .iter()
            .zip(data.row(b))
            .map(|(x, y)| x.as_f64().total_cmp(&y.as_f64()))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    idx
}

struct Clustering {
    labels: Vec<usize>,
    wcss: f64,
}

fn plus_plus_centers(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    let mut dist: Vec<f64> = points.iter().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[next].clone());
        let c = centers.last().unwrap();
        for (d, x) in dist.iter_mut().zip(points) {
            *d = d.min(sq_dist(x, c));
        }
    }
    centers
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> Clustering {
    const MAX_ROUNDS: usize = 300;
    const REL_TOL: f64 = 1e-8;
    let (n, k, p) = (points.len(), centers.len(), points[0].len());
    let mut labels = vec![0usize; n];
    let mut prev = f64::INFINITY;
    let mut wcss = f64::INFINITY;
    for _ in 0..MAX_ROUNDS {
        wcss = 0.0;
        let mut far = (0usize, -1.0f64);
        for (i, x) in points.iter().enumerate() {
            let (mut best, mut best_d) = (0, f64::INFINITY);
            for (j, c) in centers.iter().enumerate() {
                let d = sq_dist(x, c);
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            labels[i] = best;
            wcss += best_d;
            if best_d > far.1 {
                far = (i, best_d);
            }
        }
        let mut sums = vec![vec![0.0; p]; k];
        let mut counts = vec![0usize; k];
        for (x, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, &v) in sums[l].iter_mut().zip(x) {
                *s += v;
            }
        }
        // An emptied cluster takes over the point farthest from its center.
        for j in 0..k {
            if counts[j] == 0 && counts[labels[far.0]] > 1 {
                let from = labels[far.0];
                counts[from] -= 1;
                for (s, &v) in sums[from].iter_mut().zip(&points[far.0]) {
                    *s -= v;
                }
                labels[far.0] = j;
                counts[j] = 1;
                sums[j] = points[far.0].clone();
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        if wcss == 0.0 || (prev - wcss) <= REL_TOL * wcss {
            break;
        }
        prev = wcss;
    }
    Clustering { labels, wcss }
}

fn relabel_by_first_appearance(labels: &mut [usize], k: usize) {
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for l in labels.iter_mut() {
        if map[*l] == usize::MAX {
            map[*l] = next;
            next += 1;
        }
        *l = map[*l];
    }
}

/// Hard row partition with zero-based labels.
///
/// Rows are processed in lexicographic order of their values, so the
/// partition attached to each row does not depend on the input row order.
/// Restart `r` draws from stream `r` of a ChaCha generator keyed by `seed`.
pub fn init_partition<F: Scalar>(
    data: &DataMatrix<F>,
    k: usize,
    strategy: PartitionStrategy,
    restarts: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let n = data.n();
    if k == 0 || k > n {
        return Err(Error::Dimension(format!("cannot split {n} rows into {k} clusters")));
    }
    if k == 1 {
        return Ok(vec![0; n]);
    }
    let order = canonical_order(data);
    let points: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| data.row(i).iter().map(|v| v.as_f64()).collect())
        .collect();
    let mut canonical_labels = match strategy {
        PartitionStrategy::Kmeans => {
            let mut best: Option<Clustering> = None;
            for r in 0..restarts.max(1) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                let run = lloyd(&points, plus_plus_centers(&points, k, &mut rng));
                if best.as_ref().map_or(true, |b| run.wcss < b.wcss) {
                    best = Some(run);
                }
            }
            best.expect("at least one restart").labels
        }
        PartitionStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            // Seat one distinct row in each cluster so none is empty.
            let mut seats: Vec<usize> = (0..n).collect();
            for j in 0..k {
                let pick = rng.random_range(j..n);
                seats.swap(j, pick);
                labels[seats[j]] = j;
            }
            labels
        }
    };
    relabel_by_first_appearance(&mut canonical_labels, k);
    let mut labels = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        labels[i] = canonical_labels[pos];
    }
    Ok(labels)
}

/// Weighted (1/n_k) scatter of the rows assigned to one group.
pub fn group_covariance<F: Scalar>(data: &DataMatrix<F>, members: &[usize]) -> Vec<Vec<f64>> {
    let p = data.p();
    let m = members.len().max(1) as f64;
    let mut mean = vec![0.0; p];
    for &i in members {
        for (a, v) in mean.iter_mut().zip(data.row(i)) {
            *a += v.as_f64();
        }
    }
    mean.iter_mut().for_each(|a| *a /= m);
    let mut s = vec![vec![0.0; p]; p];
    for &i in members {
        let r: Vec<f64> = data.row(i).iter().zip(&mean).map(|(v, m)| v.as_f64() - m).collect();
        for u in 0..p {
            for v in u..p {
                s[u][v] += r[u] * r[v];
            }
        }
    }
    for u in 0..p {
        for v in u..p {
            s[u][v] /= m;
            s[v][u] = s[u][v];
        }
    }
    s
}

/// Starting `(B, T, D)` from the leading eigenpairs of a group covariance.
///
/// The top-`q` loadings `V[v,h]·√λₕ` are varimax-rotated, so that blocks with
/// equal eigenvalues are not mixed. Each variable joins the factor with the
/// largest absolute correlation-scaled rotated loading. `T` holds the sum of
/// squared rotated loadings per factor (the eigenvalues when no rotation is
/// needed) and `D` the diagonal residual of the rank-`q` reconstruction.
pub fn init_component<F: Scalar>(s: &[Vec<f64>], q: usize) -> Result<(ColumnAssignment, Vec<F>, Vec<F>)> {
    let p = s.len();
    if q == 0 || q > p {
        return Err(Error::Dimension(format!("q={q} not in 1..={p}")));
    }
    if s.iter().any(|r| r.len() != p) {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    if s.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Numerical {
            iteration: 0,
            message: "non-finite sample covariance".into(),
        });
    }
    let eig = SymmetricEigen::new(DMatrix::from_fn(p, p, |i, j| s[i][j]));
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = &order[..q];

    let raw = DMatrix::from_fn(p, q, |v, j| {
        let h = top[j];
        eig.eigenvectors[(v, h)] * eig.eigenvalues[h].max(0.0).sqrt()
    });
    let rotated = varimax(&raw);
    let mut d = Vec::with_capacity(p);
    let mut loadings = vec![vec![0.0; q]; p];
    for v in 0..p {
        let recon: f64 = (0..q).map(|j| raw[(v, j)].powi(2)).sum();
        let scale = if s[v][v] > 0.0 { s[v][v].sqrt().recip() } else { 0.0 };
        for j in 0..q {
            loadings[v][j] = (rotated[(v, j)] * scale).abs();
        }
        d.push((s[v][v] - recon).max(VARIANCE_FLOOR));
    }
    let t: Vec<f64> = (0..q)
        .map(|j| rotated.column(j).norm_squared().max(VARIANCE_FLOOR))
        .collect();
    let columns = repair_empty_clusters(crate::engine::argmax_assignment(&loadings), q, &loadings)?;
    Ok((
        columns,
        t.into_iter().map(F::lit).collect(),
        d.into_iter().map(F::lit).collect(),
    ))
}

/// Kaiser-normalized varimax rotation of a `p×q` loading matrix.
fn varimax(l: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, q) = l.shape();
    if q < 2 {
        return l.clone();
    }
    let norms: Vec<f64> = (0..p).map(|v| l.row(v).norm()).collect();
    let normed = DMatrix::from_fn(p, q, |v, j| if norms[v] > 0.0 { l[(v, j)] / norms[v] } else { 0.0 });
    let mut rot = DMatrix::<f64>::identity(q, q);
    let mut crit = 0.0;
    for _ in 0..500 {
        let lam = &normed * &rot;
        let col_ss: Vec<f64> = (0..q).map(|j| lam.column(j).norm_squared() / p as f64).collect();
        let target = DMatrix::from_fn(p, q, |v, j| lam[(v, j)].powi(3) - lam[(v, j)] * col_ss[j]);
        let svd = (normed.transpose() * target).svd(true, true);
        let (Some(u), Some(vt)) = (svd.u, svd.v_t) else { break };
        rot = u * vt;
        let next = svd.singular_values.sum();
        if next <= crit * (1.0 + 1e-10) {
            break;
        }
        crit = next;
    }
    let mut out = &normed * &rot;
    for v in 0..p {
        out.row_mut(v).scale_mut(norms[v]);
    }
    out
}

/// Builds a full starting state for one candidate.
///
/// Shared `B` or `T` start from the pooled within-group covariance, shared
/// `D` from its residual, and isotropic noise from the mean residual.
pub fn initialize<F: Scalar>(
    data: &DataMatrix<F>,
    spec: ModelSpec,
    k: usize,
    widths: &Widths,
    options: &InitOptions,
    seed: u64,
) -> Result<InitialState<F>> {
    let labels = init_partition(data, k, options.strategy, options.restarts, seed)?;
    initialize_from_partition(data, spec, widths, &labels, k)
}

pub fn initialize_from_partition<F: Scalar>(
    data: &DataMatrix<F>,
    spec: ModelSpec,
    widths: &Widths,
    labels: &[usize],
    k: usize,
) -> Result<InitialState<F>> {
    let p = data.p();
    let per_comp = widths.per_component(k);
    let mut groups = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    let covs: Vec<Vec<Vec<f64>>> = groups.iter().map(|g| group_covariance(data, g)).collect();
    let mut columns = Vec::with_capacity(k);
    let mut t = Vec::with_capacity(k);
    let mut d = Vec::with_capacity(k);
    for (s, &q) in covs.iter().zip(&per_comp) {
        let (b0, t0, d0) = init_component::<F>(s, q)?;
        columns.push(b0);
        t.push(t0);
        d.push(d0);
    }

    let needs_pooled = spec.b_common || spec.t_common || spec.d_common;
    if needs_pooled {
        let n = data.n() as f64;
        let mut pooled = vec![vec![0.0; p]; p];
        for (s, g) in covs.iter().zip(&groups) {
            let w = g.len() as f64 / n;
            for (pr, sr) in pooled.iter_mut().zip(s) {
                for (a, b) in pr.iter_mut().zip(sr) {
                    *a += w * b;
                }
            }
        }
        let (bp, tp, dp) = init_component::<F>(&pooled, per_comp[0])?;
        for kk in 0..k {
            if spec.b_common {
                columns[kk] = bp.clone();
            }
            if spec.t_common {
                t[kk] = tp.clone();
            }
            if spec.d_common {
                d[kk] = dp.clone();
            }
        }
    }
    if spec.d_isotropic {
        for dk in &mut d {
            let m = dk.iter().copied().sum::<F>() / F::from_count(p);
            dk.iter_mut().for_each(|x| *x = m);
        }
    }
    if spec.t_fixed {
        for tk in &mut t {
            tk.iter_mut().for_each(|x| *x = F::one());
        }
    }
    Ok(InitialState {
        z0: Responsibilities::from_labels(labels, k)?,
        columns,
        t,
        d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(n_each: usize, p: usize, seed: u64) -> (DataMatrix<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (g, centre) in [10.0, -10.0].into_iter().enumerate() {
            for _ in 0..n_each {
                rows.push(
                    (0..p)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            centre + z
                        })
                        .collect(),
                );
                truth.push(g);
            }
        }
        (DataMatrix::from_rows(&rows).unwrap(), truth)
    }

    #[test]
    fn single_cluster_partition() {
        let (data, _) = blobs(5, 2, 1);
        assert_eq!(init_partition(&data, 1, PartitionStrategy::Kmeans, 3, 0).unwrap(), vec![0; 10]);
    }

    #[test]
    fn separable_blobs_are_recovered() {
        let (data, truth) = blobs(50, 4, 7);
        let labels = init_partition(&data, 2, PartitionStrategy::Kmeans, 5, 11).unwrap();
        assert_eq!(crate::metrics::adjusted_rand_index(&labels, &truth).unwrap(), 1.0);
    }

    #[test]
    fn partition_is_deterministic() {
        let (data, _) = blobs(30, 3, 2);
        let a = init_partition(&data, 3, PartitionStrategy::Kmeans, 4, 99).unwrap();
        let b = init_partition(&data, 3, PartitionStrategy::Kmeans, 4, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn partition_ignores_row_order() {
        let (data, _) = blobs(30, 3, 5);
        let a = init_partition(&data, 3, PartitionStrategy::Kmeans, 4, 42).unwrap();
        let perm: Vec<usize> = (0..data.n()).rev().collect();
        let shuffled = data.select_rows(&perm);
        let b = init_partition(&shuffled, 3, PartitionStrategy::Kmeans, 4, 42).unwrap();
        let back: Vec<usize> = perm.iter().map(|&i| a[i]).collect();
        assert_eq!(back, b);
    }

    #[test]
    fn random_partition_fills_every_cluster() {
        let (data, _) = blobs(3, 2, 3);
        for seed in 0..20 {
            let labels = init_partition(&data, 6, PartitionStrategy::Random, 1, seed).unwrap();
            for j in 0..6 {
                assert!(labels.contains(&j));
            }
        }
    }

    #[test]
    fn too_many_clusters_is_dimension_error() {
        let (data, _) = blobs(2, 2, 3);
        assert!(matches!(
            init_partition(&data, 5, PartitionStrategy::Kmeans, 1, 0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn diagonal_covariance_start() {
        let s = vec![vec![3.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![0.0, 0.0, 1.0]];
        let (b, t, d) = init_component::<f64>(&s, 2).unwrap();
        assert!((t[0] - 3.0).abs() < 1e-12 && (t[1] - 2.0).abs() < 1e-12);
        assert_eq!(b.cluster_of(0), 0);
        assert_eq!(b.cluster_of(1), 1);
        assert_eq!(b.cluster_of(2), 0);
        assert!((d[2] - 1.0).abs() < 1e-12);
        assert!(d[0] <= 1e-6 + 1e-12 && d[1] <= 1e-6 + 1e-12);
    }

    #[test]
    fn identity_covariance_start() {
        let p = 4;
        let s: Vec<Vec<f64>> = (0..p).map(|i| (0..p).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        let (_, t, d) = init_component::<f64>(&s, 1).unwrap();
        assert!((t[0] - 1.0).abs() < 1e-12);
        let eig = SymmetricEigen::new(DMatrix::from_fn(p, p, |i, j| s[i][j]));
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        for v in 0..p {
            let expected = (1.0 - eig.eigenvectors[(v, order[0])].powi(2)).max(VARIANCE_FLOOR);
            assert!((d[v] - expected).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&d[v]));
        }
    }

    #[test]
    fn tied_eigenvalue_blocks_are_separated() {
        let truth = ColumnAssignment::new(vec![0, 0, 0, 1, 1, 1, 2, 2], 3).unwrap();
        let (b, t, _) = init_component::<f64>(&crate::simulation::study1_covariance(), 3).unwrap();
        assert_eq!(crate::metrics::column_cluster_recovery(&b, &truth).unwrap(), 1.0);
        let mut t_sorted = t.clone();
        t_sorted.sort_by(f64::total_cmp);
        assert!((t_sorted[0] - 6.5).abs() < 1e-8 && (t_sorted[2] - 8.5).abs() < 1e-8);
        for seed in 0..30 {
            let ds = crate::simulation::generate_study1::<f64>(seed);
            let mut pooled = vec![vec![0.0; 8]; 8];
            for g in 0..3 {
                let members: Vec<usize> = (0..ds.data.n()).filter(|&i| ds.true_row_labels[i] == g).collect();
                let w = members.len() as f64 / ds.data.n() as f64;
                for (pr, sr) in pooled.iter_mut().zip(group_covariance(&ds.data, &members)) {
                    for (a, b) in pr.iter_mut().zip(sr) {
                        *a += w * b;
                    }
                }
            }
            let (b, _, _) = init_component::<f64>(&pooled, 3).unwrap();
            assert_eq!(crate::metrics::column_cluster_recovery(&b, &truth).unwrap(), 1.0, "seed {seed}");
        }
    }

    #[test]
    fn full_rank_start_leaves_floor_noise() {
        let s = vec![vec![2.0, 0.5, 0.1], vec![0.5, 1.0, 0.2], vec![0.1, 0.2, 1.5]];
        let (_, _, d) = init_component::<f64>(&s, 3).unwrap();
        assert!(d.iter().all(|&x| x == VARIANCE_FLOOR));
    }

    #[test]
    fn start_rejects_non_finite() {
        let s = vec![vec![f64::NAN]];
        assert!(init_component::<f64>(&s, 1).is_err());
    }
}

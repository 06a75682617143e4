//! Domain types and the block-diagonal covariance algebra.
//!
//! A component covariance has the form `Σ = B·diag(t)·Bᵀ + diag(d)` where `B`
//! is a binary row-stochastic `p×q` matrix assigning each variable to exactly
//! one latent factor. Because `Bᵀ D⁻¹ B` is diagonal, inversion and the
//! log-determinant reduce to per-cluster scalar arithmetic and never require a
//! dense factorization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::ModelSpec;
use crate::scalar::{ln_two_pi, Scalar, VARIANCE_FLOOR};

/// `n×p` observation matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix<F> {
    values: Vec<F>,
    n: usize,
    p: usize,
    row_ids: Option<Vec<String>>,
    col_ids: Option<Vec<String>>,
}

impl<F: Scalar> DataMatrix<F> {
    pub fn new(n: usize, p: usize, values: Vec<F>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::Dimension(format!("data must be non-empty, got {n}x{p}")));
        }
        if values.len() != n * p {
            return Err(Error::Dimension(format!(
                "expected {} values for {n}x{p} data, got {}",
                n * p,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite entry at row {}, column {}",
                pos / p + 1,
                pos % p + 1
            )));
        }
        Ok(Self {
            values,
            n,
            p,
            row_ids: None,
            col_ids: None,
        })
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::Dimension(format!(
                "row {} has {} values, expected {p}",
                i + 1,
                rows[i].len()
            )));
        }
        Self::new(n, p, rows.concat())
    }

    pub fn with_row_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n {
            return Err(Error::Dimension(format!("{} row ids for {} rows", ids.len(), self.n)));
        }
        self.row_ids = Some(ids);
        Ok(self)
    }

    pub fn with_col_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.p {
            return Err(Error::Dimension(format!("{} column ids for {} columns", ids.len(), self.p)));
        }
        self.col_ids = Some(ids);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[F]> {
        self.values.chunks_exact(self.p)
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn row_ids(&self) -> Option<&[String]> {
        self.row_ids.as_deref()
    }

    pub fn col_ids(&self) -> Option<&[String]> {
        self.col_ids.as_deref()
    }

    /// Sub-matrix made of the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.p);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self {
            values,
            n: idx.len(),
            p: self.p,
            row_ids: self
                .row_ids
                .as_ref()
                .map(|ids| idx.iter().map(|&i| ids[i].clone()).collect()),
            col_ids: self.col_ids.clone(),
        }
    }
}

/// Assignment of each of the `p` variables to one of `q` column clusters.
///
/// Cluster indices are zero-based. The assignment is the index form of a
/// binary row-stochastic matrix `B` with exactly one `1` per row.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnAssignment {
    clusters: Vec<usize>,
    q: usize,
}

impl ColumnAssignment {
    /// Builds an assignment, requiring every cluster in `0..q` to be used.
    pub fn new(clusters: Vec<usize>, q: usize) -> Result<Self> {
        let a = Self::new_unchecked(clusters, q)?;
        if let Some(empty) = a.sizes().iter().position(|&s| s == 0) {
            return Err(Error::EmptyColumnCluster {
                cluster: empty,
                p: a.p(),
                q,
            });
        }
        Ok(a)
    }

    /// Builds an assignment that may leave clusters empty.
    pub fn new_unchecked(clusters: Vec<usize>, q: usize) -> Result<Self> {
        if q == 0 || clusters.is_empty() {
            return Err(Error::Dimension("assignment needs p >= 1 and q >= 1".into()));
        }
        if let Some(&bad) = clusters.iter().find(|&&j| j >= q) {
            return Err(Error::Dimension(format!("cluster index {bad} out of range for q={q}")));
        }
        Ok(Self { clusters, q })
    }

    /// All variables in a single cluster.
    pub fn single(p: usize) -> Self {
        Self {
            clusters: vec![0; p],
            q: 1,
        }
    }

    /// Builds from a dense 0/1 matrix given as rows.
    pub fn from_indicator_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let q = rows.first().map_or(0, Vec::len);
        let mut clusters = Vec::with_capacity(rows.len());
        for (v, row) in rows.iter().enumerate() {
            if row.len() != q || row.iter().filter(|&&x| x == 1).count() != 1 || row.iter().any(|&x| x > 1) {
                return Err(Error::Dimension(format!("row {v} of B is not a binary row-stochastic row")));
            }
            clusters.push(row.iter().position(|&x| x == 1).unwrap());
        }
        Self::new(clusters, q)
    }

    pub fn p(&self) -> usize {
        self.clusters.len()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn cluster_of(&self, v: usize) -> usize {
        self.clusters[v]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.clusters
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.q];
        for &j in &self.clusters {
            sizes[j] += 1;
        }
        sizes
    }

    pub fn members(&self, j: usize) -> Vec<usize> {
        (0..self.p()).filter(|&v| self.clusters[v] == j).collect()
    }

    /// Dense 0/1 matrix, row-major `p×q`.
    pub fn to_indicator(&self) -> Vec<Vec<u8>> {
        self.clusters
            .iter()
            .map(|&j| (0..self.q).map(|h| u8::from(h == j)).collect())
            .collect()
    }
}

/// Parameters of one mixture component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentParams<F> {
    pub pi: F,
    pub mu: Vec<F>,
    pub columns: ColumnAssignment,
    /// Latent-factor variances, one per column cluster.
    pub t: Vec<F>,
    /// Noise variances, one per variable (all equal for isotropic models).
    pub d: Vec<F>,
}

impl<F: Scalar> ComponentParams<F> {
    pub fn new(pi: F, mu: Vec<F>, columns: ColumnAssignment, t: Vec<F>, d: Vec<F>) -> Result<Self> {
        check_shapes(&columns, &t, &d)?;
        if mu.len() != columns.p() {
            return Err(Error::Dimension(format!("mean has length {}, expected {}", mu.len(), columns.p())));
        }
        if !(pi > F::zero() && pi <= F::one()) {
            return Err(Error::Domain(format!("mixing weight {pi} outside (0, 1]")));
        }
        let floor = F::lit(VARIANCE_FLOOR);
        Ok(Self {
            pi,
            mu,
            columns,
            t: t.into_iter().map(|x| x.max(floor)).collect(),
            d: d.into_iter().map(|x| x.max(floor)).collect(),
        })
    }

    pub fn p(&self) -> usize {
        self.mu.len()
    }

    pub fn q(&self) -> usize {
        self.t.len()
    }

    pub fn covariance(&self) -> Vec<Vec<F>> {
        assemble_covariance(&self.columns, &self.t, &self.d).expect("component shapes validated")
    }

    pub fn inverse(&self) -> Result<StructuredInverse<F>> {
        structured_inverse(&self.columns, &self.t, &self.d)
    }
}

/// A fitted or true mixture: `K` components plus the constraint family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams<F> {
    pub components: Vec<ComponentParams<F>>,
    pub model: ModelSpec,
}

impl<F: Scalar> MixtureParams<F> {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn p(&self) -> usize {
        self.components[0].p()
    }

    pub fn weights(&self) -> Vec<F> {
        self.components.iter().map(|c| c.pi).collect()
    }

    pub fn widths(&self) -> Vec<usize> {
        self.components.iter().map(ComponentParams::q).collect()
    }

    /// Observed-data log-likelihood `Σᵢ log Σₖ πₖ fₖ(yᵢ)`.
    pub fn log_likelihood(&self, data: &DataMatrix<F>) -> Result<F> {
        let inverses = self.inverses()?;
        let mut buf = vec![F::zero(); self.k()];
        let mut total = F::zero();
        for y in data.rows() {
            for (k, (c, inv)) in self.components.iter().zip(&inverses).enumerate() {
                buf[k] = c.pi.ln() + inv.log_density(y, &c.mu);
            }
            total = total + crate::scalar::log_sum_exp(&buf);
        }
        Ok(total)
    }

    pub(crate) fn inverses(&self) -> Result<Vec<StructuredInverse<F>>> {
        self.components.iter().map(ComponentParams::inverse).collect()
    }
}

fn check_shapes<F: Scalar>(b: &ColumnAssignment, t: &[F], d: &[F]) -> Result<()> {
    if t.len() != b.q() {
        return Err(Error::Dimension(format!("T has length {}, B has {} columns", t.len(), b.q())));
    }
    if d.len() != b.p() {
        return Err(Error::Dimension(format!("D has length {}, B has {} rows", d.len(), b.p())));
    }
    Ok(())
}

/// Dense `B·diag(t)·Bᵀ + diag(d)`.
pub fn assemble_covariance<F: Scalar>(b: &ColumnAssignment, t: &[F], d: &[F]) -> Result<Vec<Vec<F>>> {
    check_shapes(b, t, d)?;
    let p = b.p();
    let mut sigma = vec![vec![F::zero(); p]; p];
    for u in 0..p {
        let ju = b.cluster_of(u);
        for v in 0..p {
            if b.cluster_of(v) == ju {
                sigma[u][v] = t[ju];
            }
        }
        sigma[u][u] = sigma[u][u] + d[u];
    }
    Ok(sigma)
}

/// Woodbury form of `Σ⁻¹` for a block-diagonal component covariance.
///
/// With `sⱼ = Σ_{v∈j} 1/d_v` and `cⱼ = tⱼ/(1 + tⱼ sⱼ)`:
/// `Σ⁻¹x = x/d − (1/d) ⊙ B(c ⊙ Bᵀ(x/d))` and
/// `log|Σ| = Σ_v log d_v + Σ_j log(1 + tⱼ sⱼ)`.
#[derive(Debug, Clone)]
pub struct StructuredInverse<F> {
    clusters: Vec<usize>,
    inv_d: Vec<F>,
    /// Posterior factor variance `cⱼ`, also the diagonal of `T − T Bᵀ Σ⁻¹ B T`.
    shrink: Vec<F>,
    log_det: F,
    log_norm: F,
}

/// Builds the inverse-application handle and log-determinant.
pub fn structured_inverse<F: Scalar>(b: &ColumnAssignment, t: &[F], d: &[F]) -> Result<StructuredInverse<F>> {
    check_shapes(b, t, d)?;
    if let Some(x) = t.iter().find(|x| !(**x > F::zero()) || !x.is_finite()) {
        return Err(Error::Domain(format!("latent variance {x} must be positive")));
    }
    if let Some(x) = d.iter().find(|x| !(**x > F::zero()) || !x.is_finite()) {
        return Err(Error::Domain(format!("noise variance {x} must be positive")));
    }
    let inv_d: Vec<F> = d.iter().map(|&x| x.recip()).collect();
    let mut s = vec![F::zero(); b.q()];
    for (v, &j) in b.as_slice().iter().enumerate() {
        s[j] = s[j] + inv_d[v];
    }
    let mut log_det: F = d.iter().map(|x| x.ln()).sum();
    let mut shrink = Vec::with_capacity(b.q());
    for (&tj, &sj) in t.iter().zip(&s) {
        let g = F::one() + tj * sj;
        log_det = log_det + g.ln();
        shrink.push(tj / g);
    }
    let log_norm = -F::lit(0.5) * (F::from_count(b.p()) * ln_two_pi::<F>() + log_det);
    Ok(StructuredInverse {
        clusters: b.as_slice().to_vec(),
        inv_d,
        shrink,
        log_det,
        log_norm,
    })
}

impl<F: Scalar> StructuredInverse<F> {
    pub fn log_det(&self) -> F {
        self.log_det
    }

    pub fn p(&self) -> usize {
        self.inv_d.len()
    }

    pub fn q(&self) -> usize {
        self.shrink.len()
    }

    /// Posterior variances `cⱼ` of the latent factors given an observation.
    pub fn posterior_factor_variance(&self) -> &[F] {
        &self.shrink
    }

    /// `gⱼ = Σ_{v∈j} x_v / d_v`, written into `g`.
    fn project(&self, x: &[F], g: &mut [F]) {
        g.iter_mut().for_each(|v| *v = F::zero());
        for (v, (&xv, &j)) in x.iter().zip(&self.clusters).enumerate() {
            g[j] = g[j] + xv * self.inv_d[v];
        }
    }

    /// `Σ⁻¹ x`.
    pub fn apply(&self, x: &[F]) -> Vec<F> {
        let mut g = vec![F::zero(); self.q()];
        self.project(x, &mut g);
        x.iter()
            .zip(&self.clusters)
            .zip(&self.inv_d)
            .map(|((&xv, &j), &w)| w * (xv - self.shrink[j] * g[j]))
            .collect()
    }

    /// `xᵀ Σ⁻¹ x`.
    pub fn quad_form(&self, x: &[F]) -> F {
        let mut g = vec![F::zero(); self.q()];
        self.quad_and_factor_mean(x, &mut g)
    }

    /// Returns `xᵀΣ⁻¹x` and leaves `E[U | x] = T Bᵀ Σ⁻¹ x` in `u_hat`.
    pub(crate) fn quad_and_factor_mean(&self, x: &[F], u_hat: &mut [F]) -> F {
        self.project(x, u_hat);
        let mut quad = F::zero();
        for (&xv, &w) in x.iter().zip(&self.inv_d) {
            quad = quad + xv * xv * w;
        }
        for (g, &c) in u_hat.iter_mut().zip(&self.shrink) {
            quad = quad - c * *g * *g;
            *g = c * *g;
        }
        quad
    }

    /// Gaussian log-density of `y` with mean `mu`.
    pub fn log_density(&self, y: &[F], mu: &[F]) -> F {
        let mut g = vec![F::zero(); self.q()];
        self.log_density_with(y, mu, &mut g, &mut vec![F::zero(); y.len()])
    }

    pub(crate) fn log_density_with(&self, y: &[F], mu: &[F], u_hat: &mut [F], centered: &mut [F]) -> F {
        for ((c, &a), &m) in centered.iter_mut().zip(y).zip(mu) {
            *c = a - m;
        }
        let quad = self.quad_and_factor_mean(centered, u_hat);
        self.log_norm - F::lit(0.5) * quad
    }
}

/// Log-density of `y` under one component.
pub fn log_density<F: Scalar>(y: &[F], comp: &ComponentParams<F>) -> Result<F> {
    if y.len() != comp.p() {
        return Err(Error::Dimension(format!("observation has length {}, expected {}", y.len(), comp.p())));
    }
    Ok(comp.inverse()?.log_density(y, &comp.mu))
}

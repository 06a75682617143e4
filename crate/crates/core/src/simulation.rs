//! Seeded synthetic data from known block-diagonal mixtures.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::family::ModelSpec;
use crate::model::{ColumnAssignment, ComponentParams, DataMatrix, MixtureParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset<F> {
    pub data: DataMatrix<F>,
    /// Zero-based component of each row.
    pub true_row_labels: Vec<usize>,
    pub true_params: MixtureParams<F>,
}

fn draw<F: Scalar, R: rand::Rng>(rng: &mut R, comp: &ComponentParams<F>) -> Vec<F> {
    let u: Vec<f64> = comp
        .t
        .iter()
        .map(|t| {
            let z: f64 = StandardNormal.sample(rng);
            t.as_f64().sqrt() * z
        })
        .collect();
    comp.mu
        .iter()
        .zip(&comp.d)
        .enumerate()
        .map(|(v, (m, d))| {
            let e: f64 = StandardNormal.sample(rng);
            F::lit(m.as_f64() + u[comp.columns.cluster_of(v)] + d.as_f64().sqrt() * e)
        })
        .collect()
}

/// `count` draws of `μ + B·u + ε` with `u ~ N(0, diag T)` and `ε ~ N(0, diag D)`.
pub fn sample_component<F: Scalar>(
    count: usize,
    mu: &[F],
    b: &ColumnAssignment,
    t: &[F],
    d: &[F],
    seed: u64,
) -> Result<Vec<Vec<F>>> {
    let comp = ComponentParams::new(F::one(), mu.to_vec(), b.clone(), t.to_vec(), d.to_vec())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| draw(&mut rng, &comp)).collect())
}

/// Draws `counts[k]` rows from each component in turn, rows ordered by component.
pub fn sample_mixture<F: Scalar>(
    params: &MixtureParams<F>,
    counts: &[usize],
    seed: u64,
) -> Result<SyntheticDataset<F>> {
    if counts.len() != params.k() {
        return Err(Error::Dimension(format!("{} counts for K={}", counts.len(), params.k())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(counts.iter().sum());
    let mut labels = Vec::with_capacity(rows.capacity());
    for (k, (&count, comp)) in counts.iter().zip(&params.components).enumerate() {
        for _ in 0..count {
            rows.push(draw(&mut rng, comp));
            labels.push(k);
        }
    }
    Ok(SyntheticDataset {
        data: DataMatrix::from_rows(&rows)?,
        true_row_labels: labels,
        true_params: params.clone(),
    })
}

/// Splits a block-diagonal covariance into `(B, T, D)`.
///
/// Blocks are the connected groups of non-zero off-diagonal entries. Every
/// off-diagonal entry inside a block must equal the block's `t`, every entry
/// across blocks must be zero, and `d_v = Σ_vv − t`. Single-variable blocks
/// are rejected since `t` and `d` cannot be separated.
pub fn decompose_block_covariance(sigma: &[Vec<f64>]) -> Result<(ColumnAssignment, Vec<f64>, Vec<f64>)> {
    let p = sigma.len();
    if p == 0 || sigma.iter().any(|r| r.len() != p) {
        return Err(Error::Dimension("covariance must be square and non-empty".into()));
    }
    let mut cluster = vec![usize::MAX; p];
    let mut q = 0;
    for start in 0..p {
        if cluster[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        cluster[start] = q;
        while let Some(u) = stack.pop() {
            for v in 0..p {
                if v != u && sigma[u][v] != 0.0 && cluster[v] == usize::MAX {
                    cluster[v] = q;
                    stack.push(v);
                }
            }
        }
        q += 1;
    }
    let b = ColumnAssignment::new(cluster, q)?;
    let mut t = Vec::with_capacity(q);
    for j in 0..q {
        let members = b.members(j);
        if members.len() < 2 {
            return Err(Error::Constraint(format!("variable {} forms a single-variable block", members[0] + 1)));
        }
        t.push(sigma[members[0]][members[1]]);
    }
    for u in 0..p {
        for v in 0..p {
            if u == v {
                continue;
            }
            let want = if b.cluster_of(u) == b.cluster_of(v) { t[b.cluster_of(u)] } else { 0.0 };
            if sigma[u][v] != want || sigma[u][v] != sigma[v][u] {
                return Err(Error::Constraint(format!(
                    "entry ({}, {}) = {} is not block-expressible",
                    u + 1,
                    v + 1,
                    sigma[u][v]
                )));
            }
        }
    }
    let d: Vec<f64> = (0..p).map(|v| sigma[v][v] - t[b.cluster_of(v)]).collect();
    if d.iter().chain(&t).any(|&x| x <= 0.0) {
        return Err(Error::Constraint("block decomposition has a non-positive variance".into()));
    }
    Ok((b, t, d))
}

/// Counts per component in both simulation designs.
pub const STUDY_COUNTS: [usize; 3] = [500, 300, 200];

fn study_means() -> [Vec<f64>; 3] {
    let arith = |start: f64| (0..8).map(|i| start + i as f64).collect::<Vec<_>>();
    [arith(-5.0), arith(0.0), arith(5.0)]
}

/// Printed covariance of the three-component CCCC design.
pub fn study1_covariance() -> Vec<Vec<f64>> {
    let blocks = [0, 0, 0, 1, 1, 1, 2, 2];
    (0..8)
        .map(|u| {
            (0..8)
                .map(|v| match (u == v, blocks[u] == blocks[v]) {
                    (true, _) => 4.5,
                    (false, true) => 2.0,
                    _ => 0.0,
                })
                .collect()
        })
        .collect()
}

/// Printed covariances of the three-component UUUU design.
pub fn study2_covariances() -> [Vec<Vec<f64>>; 3] {
    [
        vec![
            vec![2.5, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.5, 3.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.5, 0.5, 4.5, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 2.0, 1.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0, 2.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0, 1.0, 2.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 3.5, 3.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 3.0, 3.9],
        ],
        vec![
            vec![4.2, 4.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![4.0, 4.4, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![4.0, 4.0, 4.8, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 4.0, 2.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 2.0, 4.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 4.0, 3.0, 3.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 3.0, 3.5, 3.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 3.0, 3.0, 4.0],
        ],
        vec![
            vec![2.1, 2.0, 2.0, 2.0, 2.0, 0.0, 0.0, 0.0],
            vec![2.0, 2.5, 2.0, 2.0, 2.0, 0.0, 0.0, 0.0],
            vec![2.0, 2.0, 3.0, 2.0, 2.0, 0.0, 0.0, 0.0],
            vec![2.0, 2.0, 2.0, 5.0, 2.0, 0.0, 0.0, 0.0],
            vec![2.0, 2.0, 2.0, 2.0, 4.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 1.0, 1.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 3.0, 1.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 2.5],
        ],
    ]
}

fn design<F: Scalar>(spec: ModelSpec, sigmas: &[Vec<Vec<f64>>; 3]) -> MixtureParams<F> {
    let total: usize = STUDY_COUNTS.iter().sum();
    let components = sigmas
        .iter()
        .zip(study_means())
        .zip(STUDY_COUNTS)
        .map(|((sigma, mu), count)| {
            let (b, t, d) = decompose_block_covariance(sigma).expect("printed design is block-expressible");
            let lit = |x: &[f64]| x.iter().map(|&v| F::lit(v)).collect::<Vec<F>>();
            ComponentParams::new(F::lit(count as f64 / total as f64), lit(&mu), b, lit(&t), lit(&d))
                .expect("printed design is a valid component")
        })
        .collect();
    MixtureParams { components, model: spec }
}

/// True parameters of the shared-covariance design.
pub fn study1_params<F: Scalar>() -> MixtureParams<F> {
    let s = study1_covariance();
    design(ModelSpec::new(true, true, true, true), &[s.clone(), s.clone(), s])
}

/// True parameters of the unconstrained design with widths `(3, 3, 2)`.
pub fn study2_params<F: Scalar>() -> MixtureParams<F> {
    design(ModelSpec::new(false, false, false, false), &study2_covariances())
}

/// `n = 1000`, `p = 8`, three components with a common covariance.
pub fn generate_study1<F: Scalar>(seed: u64) -> SyntheticDataset<F> {
    sample_mixture(&study1_params(), &STUDY_COUNTS, seed).expect("fixed design is valid")
}

/// `n = 1000`, `p = 8`, three components with unconstrained covariances.
pub fn generate_study2<F: Scalar>(seed: u64) -> SyntheticDataset<F> {
    sample_mixture(&study2_params(), &STUDY_COUNTS, seed).expect("fixed design is valid")
}

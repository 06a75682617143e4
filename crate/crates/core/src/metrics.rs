//! External agreement measures for row and column clusterings.

use std::collections::HashMap;
use std::hash::Hash;

use crate::assign::max_weight_assignment;
use crate::error::{Error, Result};
use crate::model::ColumnAssignment;

fn pairs(x: u64) -> f64 {
    (x * x.saturating_sub(1)) as f64 / 2.0
}

fn dense_labels<L: Eq + Hash + Clone>(labels: &[L]) -> (Vec<usize>, usize) {
    let mut map = HashMap::new();
    let dense = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(l.clone()).or_insert(next)
        })
        .collect();
    (dense, map.len())
}

/// Hubert–Arabie adjusted Rand index.
///
/// Two single-cluster partitions score 1.0.
pub fn adjusted_rand_index<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Eq + Hash + Clone,
    B: Eq + Hash + Clone,
{
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("partitions have lengths {} and {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Dimension("partitions must be non-empty".into()));
    }
    let (da, ra) = dense_labels(a);
    let (db, rb) = dense_labels(b);
    let mut table = vec![0u64; ra * rb];
    for (&i, &j) in da.iter().zip(&db) {
        table[i * rb + j] += 1;
    }
    let index: f64 = table.iter().map(|&c| pairs(c)).sum();
    let row_sum: f64 = (0..ra).map(|i| pairs(table[i * rb..(i + 1) * rb].iter().sum())).sum();
    let col_sum: f64 = (0..rb).map(|j| pairs((0..ra).map(|i| table[i * rb + j]).sum())).sum();
    let expected = row_sum * col_sum / pairs(a.len() as u64).max(f64::MIN_POSITIVE);
    let max = 0.5 * (row_sum + col_sum);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Fraction of variables whose column cluster agrees with the truth under
/// the best one-to-one relabeling of clusters.
pub fn column_cluster_recovery(est: &ColumnAssignment, truth: &ColumnAssignment) -> Result<f64> {
    if est.p() != truth.p() {
        return Err(Error::Dimension(format!("assignments cover {} and {} variables", est.p(), truth.p())));
    }
    let (small, large) = if est.q() <= truth.q() { (est, truth) } else { (truth, est) };
    let mut agree = vec![vec![0.0; large.q()]; small.q()];
    for (&a, &b) in small.as_slice().iter().zip(large.as_slice()) {
        agree[a][b] += 1.0;
    }
    let matched: f64 = max_weight_assignment(&agree)
        .into_iter()
        .enumerate()
        .map(|(i, j)| agree[i][j])
        .sum();
    Ok(matched / est.p() as f64)
}

/// Mean recovery over the components of a fit against a single truth.
pub fn mean_column_recovery(est: &[ColumnAssignment], truth: &ColumnAssignment) -> Result<f64> {
    if est.is_empty() {
        return Err(Error::Dimension("no column assignments supplied".into()));
    }
    let total: f64 = est
        .iter()
        .map(|e| column_cluster_recovery(e, truth))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(total / est.len() as f64)
}

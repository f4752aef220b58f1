use std::fmt::Write as _;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::walks::WalkCorpus;

/// Symmetric co-occurrence counts: every ordered pair of walk positions at
/// distance `1..=radius` adds one to `(node_i, node_j)`. Repeated visits of the
/// same node inside the context window land on the diagonal.
pub fn cooccurrence_counts(corpus: &WalkCorpus, n_nodes: usize, radius: usize) -> Result<Array2<f64>> {
    if radius < 1 {
        return Err(Error::param("context_radius", "must be >= 1"));
    }
    let mut counts = Array2::<f64>::zeros((n_nodes, n_nodes));
    for walk in &corpus.walks {
        for (i, &a) in walk.iter().enumerate() {
            if a >= n_nodes {
                return Err(Error::Dimension(format!("walk visits node {a} outside 0..{n_nodes}")));
            }
            for &b in walk.iter().skip(i + 1).take(radius) {
                if b >= n_nodes {
                    return Err(Error::Dimension(format!("walk visits node {b} outside 0..{n_nodes}")));
                }
                counts[[a, b]] += 1.0;
                counts[[b, a]] += 1.0;
            }
        }
    }
    Ok(counts)
}

/// Positive pointwise mutual information,
/// `max(0, ln(c_ij * C / (c_i * c_j)))` with row sums `c_i` and total `C`.
/// Zero counts map to zero.
pub fn ppmi(counts: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, m) = counts.dim();
    if n != m {
        return Err(Error::Dimension(format!("counts must be square, got {n}x{m}")));
    }
    for i in 0..n {
        for j in 0..n {
            let c = counts[[i, j]];
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::param("counts", format!("entry ({i},{j}) = {c} is not a finite non-negative count")));
            }
            if j > i && c != counts[[j, i]] {
                return Err(Error::param("counts", format!("not symmetric at ({i},{j})")));
            }
        }
    }
    let row: Vec<f64> = counts.rows().into_iter().map(|r| r.sum()).collect();
    let total: f64 = row.iter().sum();
    let mut out = Array2::<f64>::zeros((n, n));
    if total == 0.0 {
        return Ok(out);
    }
    for i in 0..n {
        for j in 0..n {
            let c = counts[[i, j]];
            if c > 0.0 {
                out[[i, j]] = (c * total / (row[i] * row[j])).ln().max(0.0);
            }
        }
    }
    Ok(out)
}

/// Largest eigenvalue of a symmetric matrix. Under the ridge term of the
/// factorization objective, every direction whose eigenvalue is below
/// `lambda / 2` is shrunk to zero, so this bounds what survives the fit.
pub fn top_eigenvalue(y: &Array2<f64>) -> Result<f64> {
    let (n, m) = y.dim();
    if n != m {
        return Err(Error::Dimension(format!("matrix must be square, got {n}x{m}")));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| y[[i, j]]);
    let eig = nalgebra::SymmetricEigen::new(mat);
    Ok(eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// PPMI association matrix of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct PpmiMatrix {
    pub window: usize,
    pub values: Array2<f64>,
}

impl PpmiMatrix {
    pub fn from_corpus(corpus: &WalkCorpus, n_nodes: usize, radius: usize) -> Result<Self> {
        let counts = cooccurrence_counts(corpus, n_nodes, radius)?;
        Ok(Self {
            window: corpus.window,
            values: ppmi(&counts)?,
        })
    }

    /// Appends nonzero entries as `window,i,j,value` rows.
    pub fn write_csv_rows(&self, out: &mut String) {
        for ((i, j), v) in self.values.indexed_iter() {
            if *v != 0.0 {
                let _ = writeln!(out, "{},{i},{j},{v:.12e}", self.window);
            }
        }
    }
}

pub const PPMI_HEADER: &str = "window,i,j,value";

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(walks: Vec<Vec<usize>>) -> WalkCorpus {
        WalkCorpus { window: 1, walks }
    }

    #[test]
    fn single_pair() {
        let c = cooccurrence_counts(&corpus(vec![vec![0, 1]]), 2, 5).unwrap();
        assert_eq!(c[[0, 1]], 1.0);
        assert_eq!(c[[1, 0]], 1.0);
        assert_eq!(c.sum(), 2.0);
    }

    #[test]
    fn revisits_count_on_the_diagonal() {
        let c = cooccurrence_counts(&corpus(vec![vec![0, 1, 0]]), 2, 5).unwrap();
        assert_eq!(c[[0, 1]], 2.0);
        assert_eq!(c[[1, 0]], 2.0);
        assert_eq!(c[[0, 0]], 2.0);
        assert_eq!(c[[1, 1]], 0.0);
    }

    #[test]
    fn radius_limits_context() {
        let c = cooccurrence_counts(&corpus(vec![vec![0, 1, 2, 3]]), 4, 1).unwrap();
        assert_eq!(c[[0, 2]], 0.0);
        assert_eq!(c[[2, 3]], 1.0);
        assert!(cooccurrence_counts(&corpus(vec![]), 4, 0).is_err());
    }

    #[test]
    fn empty_corpus_is_zero() {
        let c = cooccurrence_counts(&corpus(vec![]), 3, 5).unwrap();
        assert_eq!(c, Array2::<f64>::zeros((3, 3)));
        assert_eq!(ppmi(&c).unwrap(), Array2::<f64>::zeros((3, 3)));
    }

    #[test]
    fn two_disjoint_pairs() {
        let mut c = Array2::<f64>::zeros((4, 4));
        for (a, b) in [(0, 1), (2, 3)] {
            c[[a, b]] = 1.0;
            c[[b, a]] = 1.0;
        }
        let y = ppmi(&c).unwrap();
        assert!((y[[0, 1]] - 4f64.ln()).abs() < 1e-15);
        assert!((y[[2, 3]] - 1.3862943611198906).abs() < 1e-15);
        assert_eq!(y[[0, 2]], 0.0);
    }

    #[test]
    fn uniform_counts_are_independent() {
        let c = Array2::from_elem((5, 5), 3.0);
        assert!(ppmi(&c).unwrap().iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn top_eigenvalue_of_known_matrices() {
        let mut y = Array2::<f64>::zeros((3, 3));
        assert_eq!(top_eigenvalue(&y).unwrap(), 0.0);
        y[[0, 1]] = 2.0;
        y[[1, 0]] = 2.0;
        assert!((top_eigenvalue(&y).unwrap() - 2.0).abs() < 1e-12);
        let ones = Array2::from_elem((4, 4), 1.0);
        assert!((top_eigenvalue(&ones).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric_or_negative() {
        let mut c = Array2::<f64>::zeros((2, 2));
        c[[0, 1]] = 1.0;
        assert!(ppmi(&c).is_err());
        c[[1, 0]] = 1.0;
        c[[0, 0]] = -1.0;
        assert!(ppmi(&c).is_err());
    }
}

use std::fmt::Write as _;

use ndarray::{Array2, Zip};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Diagnostic, Error, Result};
use crate::rng::{substream, TAG_FIT};

/// Solver settings for [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    /// Embedding dimension d.
    pub dim: usize,
    /// Ridge weight.
    pub lambda: f64,
    /// Temporal alignment weight.
    pub tau: f64,
    /// First trial step of every backtracking line search.
    pub initial_step: f64,
    pub max_halvings: usize,
    /// Gradient steps per block visit.
    pub inner_steps: usize,
    pub max_sweeps: usize,
    /// Stop when a sweep changes the loss by less than this fraction.
    pub rel_tol: f64,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            dim: 50,
            lambda: 50.0,
            tau: 15.0,
            initial_step: 1e-2,
            max_halvings: 60,
            inner_steps: 10,
            max_sweeps: 200,
            rel_tol: 1e-6,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn diagnostics(&self, prefix: &str) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut check = |ok: bool, field: &str, msg: &str| {
            if !ok {
                out.push(Diagnostic::new(format!("{prefix}{field}"), msg));
            }
        };
        check(self.dim >= 1, "dim", "dim must be >= 1");
        check(self.lambda >= 0.0 && self.lambda.is_finite(), "lambda", "lambda must be >= 0");
        check(self.tau >= 0.0 && self.tau.is_finite(), "tau", "tau must be >= 0");
        check(self.initial_step > 0.0, "initial_step", "initial_step must be > 0");
        check(self.inner_steps >= 1, "inner_steps", "inner_steps must be >= 1");
        check(self.max_sweeps >= 1, "max_sweeps", "max_sweeps must be >= 1");
        check(self.rel_tol >= 0.0, "rel_tol", "rel_tol must be >= 0");
        out
    }
}

/// Fitted embedding sequence, one `n x d` matrix per window.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    pub embeddings: Vec<Array2<f64>>,
    pub dim: usize,
    pub lambda: f64,
    pub tau: f64,
    /// Objective before the first sweep and after each sweep.
    pub sweep_losses: Vec<f64>,
    /// Final per-window share of the objective (data + ridge + alignment to
    /// the previous window); sums to the final loss.
    pub window_losses: Vec<f64>,
    pub converged: bool,
}

fn sq_norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum()
}

fn sq_dist(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    Zip::from(a).and(b).fold(0.0, |acc, x, y| acc + (x - y) * (x - y))
}

fn data_term(y: &Array2<f64>, u: &Array2<f64>) -> f64 {
    let gram = u.dot(&u.t());
    0.5 * sq_dist(y, &gram)
}

fn check_shapes(ys: &[Array2<f64>], us: Option<&[Array2<f64>]>) -> Result<()> {
    let Some(first) = ys.first() else {
        return Err(Error::Dimension("empty matrix sequence".into()));
    };
    let n = first.nrows();
    for (t, y) in ys.iter().enumerate() {
        if y.dim() != (n, n) {
            return Err(Error::Dimension(format!("Y_{} is {:?}, expected ({n}, {n})", t + 1, y.dim())));
        }
    }
    if let Some(us) = us {
        if us.len() != ys.len() {
            return Err(Error::Dimension(format!("{} embeddings for {} windows", us.len(), ys.len())));
        }
        let d = us[0].ncols();
        for (t, u) in us.iter().enumerate() {
            if u.dim() != (n, d) {
                return Err(Error::Dimension(format!("U_{} is {:?}, expected ({n}, {d})", t + 1, u.dim())));
            }
        }
    }
    Ok(())
}

/// `sum_t 1/2 ||Y_t - U_t U_t^T||^2 + lambda/2 sum_t ||U_t||^2
///  + tau/2 sum_{t>=2} ||U_t - U_{t-1}||^2` (Frobenius norms).
pub fn objective(ys: &[Array2<f64>], us: &[Array2<f64>], lambda: f64, tau: f64) -> Result<f64> {
    check_shapes(ys, Some(us))?;
    Ok(window_terms(ys, us, lambda, tau).iter().sum())
}

fn window_terms(ys: &[Array2<f64>], us: &[Array2<f64>], lambda: f64, tau: f64) -> Vec<f64> {
    (0..ys.len())
        .map(|t| {
            let mut l = data_term(&ys[t], &us[t]) + 0.5 * lambda * sq_norm(&us[t]);
            if t > 0 {
                l += 0.5 * tau * sq_dist(&us[t], &us[t - 1]);
            }
            l
        })
        .collect()
}

/// Objective terms that involve `U_t`.
fn local_loss(ys: &[Array2<f64>], us: &[Array2<f64>], t: usize, u: &Array2<f64>, lambda: f64, tau: f64) -> f64 {
    let mut l = data_term(&ys[t], u) + 0.5 * lambda * sq_norm(u);
    if t > 0 {
        l += 0.5 * tau * sq_dist(u, &us[t - 1]);
    }
    if t + 1 < us.len() {
        l += 0.5 * tau * sq_dist(u, &us[t + 1]);
    }
    l
}

/// Gradient of the objective with respect to `U_t`:
/// `2 (U U^T - Y) U + lambda U + tau (2U - U_{t-1} - U_{t+1})`, neighbor
/// terms dropped at the ends of the sequence.
fn block_gradient(ys: &[Array2<f64>], us: &[Array2<f64>], t: usize, lambda: f64, tau: f64) -> Array2<f64> {
    let u = &us[t];
    let residual = u.dot(&u.t()) - &ys[t];
    let mut g = residual.dot(u) * 2.0;
    g.scaled_add(lambda, u);
    if t > 0 {
        g.scaled_add(tau, u);
        g.scaled_add(-tau, &us[t - 1]);
    }
    if t + 1 < us.len() {
        g.scaled_add(tau, u);
        g.scaled_add(-tau, &us[t + 1]);
    }
    g
}

/// One backtracking gradient step on `U_t`. Returns false when no trial step
/// lowered the local loss, leaving `U_t` untouched.
fn descend_block(ys: &[Array2<f64>], us: &mut [Array2<f64>], t: usize, opts: &FitOptions) -> bool {
    let current = local_loss(ys, us, t, &us[t], opts.lambda, opts.tau);
    let grad = block_gradient(ys, us, t, opts.lambda, opts.tau);
    let mut step = opts.initial_step;
    for _ in 0..=opts.max_halvings {
        let mut trial = us[t].clone();
        trial.scaled_add(-step, &grad);
        let l = local_loss(ys, us, t, &trial, opts.lambda, opts.tau);
        if l < current {
            us[t] = trial;
            return true;
        }
        step *= 0.5;
    }
    false
}

/// Fits the aligned embedding sequence by block-coordinate descent.
///
/// Every `U_t` starts from i.i.d. `N(0, 1/d)` entries. A sweep visits the
/// windows forward then backward, taking `inner_steps` line-searched gradient
/// steps on each block with the other windows held fixed. Iteration stops
/// when a sweep changes the objective by less than `rel_tol` relative, or
/// after `max_sweeps` sweeps. Every accepted step lowers the objective, so the
/// recorded sweep losses never increase.
pub fn fit(ys: &[Array2<f64>], opts: &FitOptions) -> Result<EmbeddingSequence> {
    check_shapes(ys, None)?;
    let diags = opts.diagnostics("");
    if !diags.is_empty() {
        return Err(Error::Validation(diags));
    }
    let n = ys[0].nrows();
    if opts.dim > n {
        return Err(Error::param("dim", format!("dimension {} exceeds node count {n}", opts.dim)));
    }
    let scale = 1.0 / (opts.dim as f64).sqrt();
    let mut us: Vec<Array2<f64>> = (0..ys.len())
        .map(|t| {
            let mut rng = substream(opts.seed, &[TAG_FIT, t as u64]);
            Array2::from_shape_simple_fn((n, opts.dim), || {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
        })
        .collect();

    let mut losses = vec![objective(ys, &us, opts.lambda, opts.tau)?];
    if !losses[0].is_finite() {
        return Err(Error::Divergence { sweep: 0, window: 0 });
    }
    let order: Vec<usize> = (0..ys.len()).chain((0..ys.len()).rev()).collect();
    let mut converged = false;
    for sweep in 1..=opts.max_sweeps {
        for &t in &order {
            for _ in 0..opts.inner_steps {
                if !descend_block(ys, &mut us, t, opts) {
                    break;
                }
            }
            if us[t].iter().any(|x| !x.is_finite()) {
                return Err(Error::Divergence { sweep, window: t + 1 });
            }
        }
        let prev = *losses.last().unwrap();
        let loss = objective(ys, &us, opts.lambda, opts.tau)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { sweep, window: 0 });
        }
        assert!(
            loss <= prev + 1e-12 * prev.abs(),
            "objective increased across sweep {sweep}: {prev} -> {loss}"
        );
        losses.push(loss);
        let rel = (prev - loss).abs() / prev.abs().max(f64::MIN_POSITIVE);
        log::debug!("sweep {sweep}: loss {loss:.6e} (rel change {rel:.3e})");
        if rel < opts.rel_tol {
            converged = true;
            break;
        }
    }
    let window_losses = window_terms(ys, &us, opts.lambda, opts.tau);
    Ok(EmbeddingSequence {
        embeddings: us,
        dim: opts.dim,
        lambda: opts.lambda,
        tau: opts.tau,
        sweep_losses: losses,
        window_losses,
        converged,
    })
}

impl EmbeddingSequence {
    pub fn n_windows(&self) -> usize {
        self.embeddings.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.embeddings.first().map_or(0, Array2::nrows)
    }

    pub fn final_loss(&self) -> f64 {
        *self.sweep_losses.last().unwrap_or(&f64::NAN)
    }

    pub fn loss_csv(&self) -> String {
        let mut out = String::from("sweep,loss\n");
        for (i, l) in self.sweep_losses.iter().enumerate() {
            let _ = writeln!(out, "{i},{l:.12e}");
        }
        out
    }
}

/// Writes one window's embedding with 9 significant digits.
pub fn embedding_to_csv(u: &Array2<f64>) -> String {
    let mut out = String::from("node_id");
    for c in 0..u.ncols() {
        let _ = write!(out, ",c{c}");
    }
    out.push('\n');
    for (i, row) in u.rows().into_iter().enumerate() {
        let _ = write!(out, "{i}");
        for v in row {
            let _ = write!(out, ",{v:.8e}");
        }
        out.push('\n');
    }
    out
}

pub fn embedding_from_csv(text: &str) -> Result<Array2<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Validation(vec![Diagnostic::new("row 1", "missing header")]))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"node_id") || cols[1..].iter().enumerate().any(|(i, c)| *c != format!("c{i}")) {
        return Err(Error::Validation(vec![Diagnostic::new("row 1", format!("bad embedding header `{header}`"))]));
    }
    let d = cols.len() - 1;
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let row_ok = fields.len() == d + 1 && fields[0].trim().parse::<usize>().ok() == Some(i);
        if !row_ok {
            return Err(Error::Validation(vec![Diagnostic::new(
                format!("row {}", i + 2),
                "expected node id in order followed by one value per dimension",
            )]));
        }
        for f in &fields[1..] {
            let v: f64 = f.trim().parse().map_err(|_| {
                Error::Validation(vec![Diagnostic::new(format!("row {}", i + 2), format!("bad number `{f}`"))])
            })?;
            data.push(v);
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, d), data).map_err(|e| Error::Dimension(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn random_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = substream(seed, &[99]);
        Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(&mut rng))
    }

    #[test]
    fn zero_embeddings_leave_only_data_term() {
        let ys = vec![array![[1.0, 2.0], [2.0, 0.0]], array![[0.0, 1.0], [1.0, 3.0]]];
        let us = vec![Array2::zeros((2, 1)), Array2::zeros((2, 1))];
        let l = objective(&ys, &us, 5.0, 7.0).unwrap();
        let expected = 0.5 * (1.0 + 4.0 + 4.0) + 0.5 * (1.0 + 1.0 + 9.0);
        assert!((l - expected).abs() < 1e-12);
    }

    #[test]
    fn exact_factor_has_zero_loss() {
        let u = array![[1.0], [2.0], [-1.0]];
        let y = u.dot(&u.t());
        assert_eq!(objective(&[y], &[u], 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn alignment_term_is_quadratic_in_the_perturbation() {
        let y = array![[1.0, 0.5], [0.5, 1.0]];
        let u = array![[0.3, -0.2], [0.1, 0.4]];
        let ys = vec![y.clone(), y];
        let tau = 3.0;
        let base = objective(&ys, &[u.clone(), u.clone()], 0.0, tau).unwrap();
        let base_no_align = objective(&ys, &[u.clone(), u.clone()], 0.0, 0.0).unwrap();
        assert!((base - base_no_align).abs() < 1e-15);

        let delta = array![[0.05, 0.0], [-0.02, 0.01]];
        let u2 = &u + &delta;
        let with = objective(&ys, &[u.clone(), u2.clone()], 0.0, tau).unwrap();
        let without = objective(&ys, &[u.clone(), u2], 0.0, 0.0).unwrap();
        assert!((with - without - 0.5 * tau * sq_norm(&delta)).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let ys = vec![Array2::zeros((3, 3))];
        assert!(matches!(objective(&ys, &[Array2::zeros((2, 1))], 0.0, 0.0), Err(Error::Dimension(_))));
        assert!(matches!(objective(&ys, &[], 0.0, 0.0), Err(Error::Dimension(_))));
        let opts = FitOptions { dim: 4, ..FitOptions::default() };
        assert!(fit(&ys, &opts).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let n = 5;
        let ys: Vec<Array2<f64>> = (0..3)
            .map(|t| {
                let a = random_matrix(n, 2, t);
                a.dot(&a.t())
            })
            .collect();
        let us: Vec<Array2<f64>> = (0..3).map(|t| random_matrix(n, 3, 10 + t)).collect();
        let (lambda, tau) = (0.7, 1.3);
        let t = 1;
        let g = block_gradient(&ys, &us, t, lambda, tau);
        let h = 1e-6;
        for i in 0..n {
            for k in 0..3 {
                let mut plus = us.clone();
                plus[t][[i, k]] += h;
                let mut minus = us.clone();
                minus[t][[i, k]] -= h;
                let fd = (objective(&ys, &plus, lambda, tau).unwrap() - objective(&ys, &minus, lambda, tau).unwrap())
                    / (2.0 * h);
                assert!((fd - g[[i, k]]).abs() < 1e-5 * (1.0 + fd.abs()), "{fd} vs {}", g[[i, k]]);
            }
        }
    }

    #[test]
    fn recovers_exact_low_rank_matrix() {
        let target = random_matrix(20, 4, 1) * 0.5;
        let y = target.dot(&target.t());
        let opts = FitOptions {
            dim: 4,
            lambda: 0.0,
            tau: 0.0,
            seed: 3,
            ..FitOptions::default()
        };
        let fitted = fit(std::slice::from_ref(&y), &opts).unwrap();
        let data = data_term(&y, &fitted.embeddings[0]);
        assert!(data < 1e-6 * sq_norm(&y), "data loss {data}");
        assert!(fitted.sweep_losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn window_losses_sum_to_objective() {
        let ys: Vec<Array2<f64>> = (0..3)
            .map(|t| {
                let a = random_matrix(6, 2, t);
                a.dot(&a.t())
            })
            .collect();
        let opts = FitOptions { dim: 2, lambda: 1.0, tau: 2.0, max_sweeps: 5, ..FitOptions::default() };
        let f = fit(&ys, &opts).unwrap();
        let total: f64 = f.window_losses.iter().sum();
        assert!((total - f.final_loss()).abs() < 1e-9 * f.final_loss());
        assert_eq!(f, fit(&ys, &opts).unwrap());
    }

    #[test]
    fn embedding_csv_round_trip() {
        let u = random_matrix(4, 3, 8);
        let text = embedding_to_csv(&u);
        let back = embedding_from_csv(&text).unwrap();
        for (a, b) in u.iter().zip(back.iter()) {
            assert!((a - b).abs() <= 1e-8 * a.abs());
        }
        assert_eq!(embedding_to_csv(&back), text);
        assert!(embedding_from_csv("node_id,c0\n1,0.5\n").is_err());
    }
}

//! C-SVM trained by SMO with second-order working-set selection.

use serde::{Deserialize, Serialize};

use super::{check_training_set, hexfloat};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf {
        #[serde(with = "hexfloat::scalar")]
        gamma: f64,
    },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub c: f64,
    /// RBF width; `None` means `1 / (dims * mean feature variance)`.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_iter: 100_000,
        }
    }
}

pub fn auto_gamma(x: &[Vec<f64>]) -> f64 {
    let dim = x.first().map(Vec::len).unwrap_or(1).max(1);
    let mean_var = (0..dim)
        .map(|d| {
            let col: Vec<f64> = x.iter().map(|r| r[d]).collect();
            crate::util::mean_std(&col).1.powi(2)
        })
        .sum::<f64>()
        / dim as f64;
    if mean_var > 0.0 {
        1.0 / (dim as f64 * mean_var)
    } else {
        1.0 / dim as f64
    }
}

/// Result of the dual solve `min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Maximal KKT violation `m(a) - M(a)` at exit.
    pub gap: f64,
}

/// Solves the C-SVM dual for kernel matrix `k` and labels `y` in {-1, +1}.
pub fn solve_dual(k: &[Vec<f64>], y: &[f64], c: f64, tol: f64, max_iter: usize) -> DualSolution {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * k[i][j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    let mut converged = false;

    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            if up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else {
            gap = 0.0;
            converged = true;
            break;
        };
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
            if !low {
                continue;
            }
            let v = y[t] * grad[t];
            gmax2 = gmax2.max(v);
            let diff = gmax + v;
            if diff > 0.0 {
                let mut quad = k[i][i] + k[t][t] - 2.0 * k[i][t];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -diff * diff / quad;
                if obj <= best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        gap = gmax + gmax2;
        let Some(j) = j_sel.filter(|_| gap >= tol) else {
            converged = true;
            break;
        };
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    DualSolution {
        alpha,
        rho,
        iterations,
        converged,
        gap,
    }
}

/// Dual objective `e'a - 1/2 a'Qa` (to be maximized).
pub fn dual_objective(k: &[Vec<f64>], y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[i][j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svm {
    pub kernel: Kernel,
    #[serde(with = "hexfloat::scalar")]
    pub c: f64,
    #[serde(with = "hexfloat::matrix")]
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    #[serde(with = "hexfloat::vec")]
    pub dual_coef: Vec<f64>,
    #[serde(with = "hexfloat::scalar")]
    pub bias: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl Svm {
    pub fn fit(x: &[Vec<f64>], y: &[usize], kernel: Kernel, config: &SvmConfig) -> Result<Self> {
        check_training_set(x, y)?;
        if !(config.c > 0.0) || !(config.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "svm needs C > 0 and tol > 0, got C={} tol={}",
                config.c, config.tol
            )));
        }
        if let Kernel::Rbf { gamma } = kernel {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(Error::invalid("gamma", gamma));
            }
        }
        let ys: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let k: Vec<Vec<f64>> = x
            .iter()
            .map(|a| x.iter().map(|b| kernel.eval(a, b)).collect())
            .collect();
        let sol = solve_dual(&k, &ys, config.c, config.tol, config.max_iter);
        let mut support_vectors = Vec::new();
        let mut dual_coef = Vec::new();
        for (t, &a) in sol.alpha.iter().enumerate() {
            if a > 0.0 {
                support_vectors.push(x[t].clone());
                dual_coef.push(a * ys[t]);
            }
        }
        Ok(Self {
            kernel,
            c: config.c,
            support_vectors,
            dual_coef,
            bias: -sol.rho,
            converged: sol.converged,
            iterations: sol.iterations,
        })
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, a)| a * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }

    /// Primal weight vector; only meaningful for the linear kernel.
    pub fn linear_weights(&self) -> Option<Vec<f64>> {
        if self.kernel != Kernel::Linear {
            return None;
        }
        let dim = self.support_vectors.first()?.len();
        let mut w = vec![0.0; dim];
        for (sv, a) in self.support_vectors.iter().zip(&self.dual_coef) {
            w.iter_mut().zip(sv).for_each(|(w, v)| *w += a * v);
        }
        Some(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_problem_by_hand() {
        let x = vec![vec![-1.0], vec![1.0]];
        let m = Svm::fit(&x, &[0, 1], Kernel::Linear, &SvmConfig::default()).unwrap();
        let w = m.linear_weights().unwrap();
        assert!((w[0] - 1.0).abs() < 1e-9);
        assert!(m.bias.abs() < 1e-9);
        assert!(m.converged);
    }

    #[test]
    fn xor_needs_a_nonlinear_kernel() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let y = [0, 0, 1, 1];
        let acc = |m: &Svm| {
            x.iter()
                .zip(&y)
                .filter(|(r, &l)| ((m.decision(r) > 0.0) as usize) == l)
                .count() as f64
                / 4.0
        };
        let lin = Svm::fit(&x, &y, Kernel::Linear, &SvmConfig::default()).unwrap();
        assert!(acc(&lin) <= 0.75);
        let rbf = Svm::fit(&x, &y, Kernel::Rbf { gamma: auto_gamma(&x) }, &SvmConfig::default()).unwrap();
        assert_eq!(acc(&rbf), 1.0);
    }

    #[test]
    fn dual_feasibility_and_kkt() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64 * 0.77).sin() * 2.0, (i as f64 * 0.31).cos() + (i % 2) as f64])
            .collect();
        let y: Vec<f64> = (0..30).map(|i| if i % 2 == 1 { 1.0 } else { -1.0 }).collect();
        let k: Vec<Vec<f64>> = x
            .iter()
            .map(|a| x.iter().map(|b| Kernel::Rbf { gamma: 0.5 }.eval(a, b)).collect())
            .collect();
        let sol = solve_dual(&k, &y, 1.0, 1e-3, 100_000);
        assert!(sol.converged);
        assert!(sol.gap < 1e-3);
        assert!(sol.alpha.iter().all(|a| (0.0..=1.0).contains(a)));
        let balance: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(balance.abs() < 1e-6);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64).sin(), (i as f64 * 2.1).cos()]).collect();
        let y: Vec<usize> = (0..40).map(|i| (i * 7 % 3 == 0) as usize).collect();
        let cfg = SvmConfig {
            max_iter: 2,
            ..SvmConfig::default()
        };
        let m = Svm::fit(&x, &y, Kernel::Rbf { gamma: 1.0 }, &cfg).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 2);
    }
}

//! Sparse nonlinear programming: problem contract and a primal-dual
//! interior-point solver.
//!
//! Problems have the form
//!
//! ```text
//! min f(x)   s.t.   c(x) = 0,   l ≤ x ≤ u
//! ```
//!
//! with sparse first and second derivatives supplied by the problem.

mod ipm;
pub mod sparse;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ipm::InteriorPoint;

/// A smooth equality-constrained NLP with simple bounds.
pub trait NlpProblem {
    fn num_vars(&self) -> usize;
    fn num_constraints(&self) -> usize;
    /// Lower and upper variable bounds; infinite entries are unbounded.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn objective(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], g: &mut [f64]);
    fn constraints(&self, x: &[f64], c: &mut [f64]);
    /// `(row, col)` pairs of the constraint Jacobian.
    fn jacobian_structure(&self) -> Vec<(usize, usize)>;
    fn jacobian_values(&self, x: &[f64], vals: &mut [f64]);
    /// `(row, col)` pairs with `row ≥ col` of the Lagrangian Hessian.
    /// Duplicates are summed.
    fn hessian_structure(&self) -> Vec<(usize, usize)>;
    /// Values of `∇²(σ f + Σ λ_i c_i)` in the order of `hessian_structure`.
    fn hessian_values(&self, x: &[f64], obj_factor: f64, lambda: &[f64], vals: &mut [f64]);
    /// Elimination order over the combined index space (variables
    /// `0..n`, constraints `n..n+m`) for the sparse factorization.
    fn kkt_order_hint(&self) -> Option<Vec<usize>> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Scaled optimality tolerance.
    pub tol: f64,
    /// Looser tolerance accepted after `acceptable_iter` consecutive hits.
    pub acceptable_tol: f64,
    pub acceptable_iter: usize,
    /// Admissible unscaled constraint violation at termination.
    pub constr_viol_tol: f64,
    pub max_iter: usize,
    pub mu_init: f64,
    /// Maximal gradient entry after automatic scaling.
    pub max_gradient: f64,
    pub max_soc: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            acceptable_tol: 1e-6,
            acceptable_iter: 15,
            constr_viol_tol: 1e-6,
            max_iter: 1000,
            mu_init: 0.1,
            max_gradient: 100.0,
            max_soc: 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Optimal,
    Acceptable,
    MaxIterations,
    RestorationFailed,
    Infeasible,
    NumericalError,
}

impl SolverStatus {
    pub fn is_success(self) -> bool {
        matches!(self, SolverStatus::Optimal | SolverStatus::Acceptable)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolverStatus,
    pub x: Vec<f64>,
    /// Constraint multipliers of the unscaled problem.
    pub lambda: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// `‖c(x)‖∞` of the unscaled problem.
    pub primal_infeasibility: f64,
    /// Scaled stationarity residual `‖∇f + Jᵀλ − z‖∞`.
    pub dual_infeasibility: f64,
    pub complementarity: f64,
}

/// Anything that can solve an [`NlpProblem`] from a starting point.
pub trait SolverInterface: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, problem: &dyn NlpProblem, x0: &[f64]) -> Result<SolveResult>;
}

/// Solver registered under `name`.
pub fn solver_by_name(name: &str, options: SolverOptions) -> Result<Box<dyn SolverInterface>> {
    match name {
        "ipm" | "interior-point" => Ok(Box::new(InteriorPoint::new(options))),
        other => Err(Error::Config(format!("unknown solver `{other}` (available: ipm)"))),
    }
}

/// Checks analytic derivatives against central differences. Returns the
/// largest relative deviation of the Jacobian and of the gradient.
pub fn derivative_check(problem: &dyn NlpProblem, x: &[f64], h: f64) -> (f64, f64) {
    let n = problem.num_vars();
    let m = problem.num_constraints();
    let js = problem.jacobian_structure();
    let mut jv = vec![0.0; js.len()];
    problem.jacobian_values(x, &mut jv);
    let mut dense = vec![0.0; m * n];
    for (k, &(r, c)) in js.iter().enumerate() {
        dense[r * n + c] += jv[k];
    }
    let mut g = vec![0.0; n];
    problem.gradient(x, &mut g);
    let mut worst_j = 0.0f64;
    let mut worst_g = 0.0f64;
    let mut cp = vec![0.0; m];
    let mut cm = vec![0.0; m];
    let mut xp = x.to_vec();
    for j in 0..n {
        let step = h * x[j].abs().max(1.0);
        xp[j] = x[j] + step;
        problem.constraints(&xp, &mut cp);
        let fp = problem.objective(&xp);
        xp[j] = x[j] - step;
        problem.constraints(&xp, &mut cm);
        let fm = problem.objective(&xp);
        xp[j] = x[j];
        for i in 0..m {
            let fd = (cp[i] - cm[i]) / (2.0 * step);
            let an = dense[i * n + j];
            worst_j = worst_j.max((fd - an).abs() / an.abs().max(fd.abs()).max(1.0));
        }
        let fd = (fp - fm) / (2.0 * step);
        worst_g = worst_g.max((fd - g[j]).abs() / g[j].abs().max(fd.abs()).max(1.0));
    }
    (worst_j, worst_g)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// min ‖z‖² s.t. z₀ = 1
    struct Qp;
    impl NlpProblem for Qp {
        fn num_vars(&self) -> usize {
            3
        }
        fn num_constraints(&self) -> usize {
            1
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![f64::NEG_INFINITY; 3], vec![f64::INFINITY; 3])
        }
        fn objective(&self, x: &[f64]) -> f64 {
            x.iter().map(|v| v * v).sum()
        }
        fn gradient(&self, x: &[f64], g: &mut [f64]) {
            for i in 0..3 {
                g[i] = 2.0 * x[i];
            }
        }
        fn constraints(&self, x: &[f64], c: &mut [f64]) {
            c[0] = x[0] - 1.0;
        }
        fn jacobian_structure(&self) -> Vec<(usize, usize)> {
            vec![(0, 0)]
        }
        fn jacobian_values(&self, _: &[f64], v: &mut [f64]) {
            v[0] = 1.0;
        }
        fn hessian_structure(&self) -> Vec<(usize, usize)> {
            vec![(0, 0), (1, 1), (2, 2)]
        }
        fn hessian_values(&self, _: &[f64], s: f64, _: &[f64], v: &mut [f64]) {
            v.iter_mut().for_each(|e| *e = 2.0 * s);
        }
    }

    /// Rosenbrock on a circle: min (1−a)² + 100(b−a²)² s.t. a² + b² = 1.5,
    /// with b ≤ 1.
    struct Banana;
    impl NlpProblem for Banana {
        fn num_vars(&self) -> usize {
            2
        }
        fn num_constraints(&self) -> usize {
            1
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![f64::NEG_INFINITY, f64::NEG_INFINITY], vec![f64::INFINITY, 1.0])
        }
        fn objective(&self, x: &[f64]) -> f64 {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        }
        fn gradient(&self, x: &[f64], g: &mut [f64]) {
            let r = x[1] - x[0] * x[0];
            g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * r;
            g[1] = 200.0 * r;
        }
        fn constraints(&self, x: &[f64], c: &mut [f64]) {
            c[0] = x[0] * x[0] + x[1] * x[1] - 1.5;
        }
        fn jacobian_structure(&self) -> Vec<(usize, usize)> {
            vec![(0, 0), (0, 1)]
        }
        fn jacobian_values(&self, x: &[f64], v: &mut [f64]) {
            v[0] = 2.0 * x[0];
            v[1] = 2.0 * x[1];
        }
        fn hessian_structure(&self) -> Vec<(usize, usize)> {
            vec![(0, 0), (1, 0), (1, 1)]
        }
        fn hessian_values(&self, x: &[f64], s: f64, l: &[f64], v: &mut [f64]) {
            v[0] = s * (2.0 - 400.0 * (x[1] - 3.0 * x[0] * x[0])) + 2.0 * l[0];
            v[1] = s * (-400.0 * x[0]);
            v[2] = s * 200.0 + 2.0 * l[0];
        }
    }

    #[test]
    fn trivial_qp() {
        let r = InteriorPoint::default().solve(&Qp, &[5.0, -3.0, 2.0]).unwrap();
        assert_eq!(r.status, SolverStatus::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-9);
        assert!(r.x[1].abs() < 1e-9 && r.x[2].abs() < 1e-9);
        assert!((r.lambda[0] + 2.0).abs() < 1e-7);
    }

    #[test]
    fn nonconvex_with_bound() {
        let r = InteriorPoint::default().solve(&Banana, &[-1.0, 0.0]).unwrap();
        assert!(r.status.is_success(), "{:?}", r.status);
        assert!(r.primal_infeasibility < 1e-8);
        assert!(r.x[1] <= 1.0 + 1e-9);
        let (dj, dg) = derivative_check(&Banana, &[0.3, 0.7], 1e-6);
        assert!(dj < 1e-6 && dg < 1e-6);
    }

    #[test]
    fn unknown_solver_name() {
        assert!(solver_by_name("snopt", SolverOptions::default()).is_err());
        assert_eq!(solver_by_name("ipm", SolverOptions::default()).unwrap().name(), "ipm");
    }
}

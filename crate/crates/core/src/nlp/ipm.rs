//! Primal-dual interior-point method with a filter line search.
//!
//! Newton steps on the barrier KKT conditions are computed from the
//! reduced symmetric system
//!
//! ```text
//! [ W + Σ + δw I      Jᵀ  ] [dx]     [∇φ + Jᵀ y]
//! [      J         −δc I  ] [dy] = − [    c    ]
//! ```
//!
//! factored by sparse LDLᵀ; the inertia reported by the factorization drives
//! the Hessian regularization `δw`.

use super::sparse::{sym_matvec, CscPattern, Ldl};
use super::{NlpProblem, SolveResult, SolverInterface, SolverOptions, SolverStatus};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct InteriorPoint {
    pub options: SolverOptions,
}

impl InteriorPoint {
    pub fn new(options: SolverOptions) -> Self {
        Self { options }
    }
}

impl SolverInterface for InteriorPoint {
    fn name(&self) -> &str {
        "ipm"
    }

    fn solve(&self, problem: &dyn NlpProblem, x0: &[f64]) -> Result<SolveResult> {
        Solver::new(problem, x0, &self.options)?.run()
    }
}

const STATIC_REG: f64 = 1e-8;
const KAPPA_SIGMA: f64 = 1e10;
const GAMMA_THETA: f64 = 1e-5;
const GAMMA_PHI: f64 = 1e-5;
const ETA_PHI: f64 = 1e-4;
const S_THETA: f64 = 1.1;
const S_PHI: f64 = 2.3;
const DELTA_SWITCH: f64 = 1.0;

struct Kkt {
    n: usize,
    m: usize,
    pattern: CscPattern,
    ldl: Ldl,
    /// old index → elimination position
    perm: Vec<usize>,
    hess_pos: Vec<Option<usize>>,
    jac_pos: Vec<Option<usize>>,
    diag_pos: Vec<usize>,
    base: Vec<f64>,
    reg: Vec<f64>,
}

impl Kkt {
    fn new(
        n: usize,
        m: usize,
        hess: &[(usize, usize)],
        jac: &[(usize, usize)],
        fixed: &[bool],
        order: Vec<usize>,
    ) -> Self {
        let mut perm = vec![0; n + m];
        for (new, &old) in order.iter().enumerate() {
            perm[old] = new;
        }
        let mut entries = Vec::new();
        let hess_active: Vec<bool> = hess.iter().map(|&(r, c)| !fixed[r] && !fixed[c]).collect();
        let jac_active: Vec<bool> = jac.iter().map(|&(_, c)| !fixed[c]).collect();
        for (k, &(r, c)) in hess.iter().enumerate() {
            if hess_active[k] {
                entries.push((perm[r], perm[c]));
            }
        }
        for (k, &(r, c)) in jac.iter().enumerate() {
            if jac_active[k] {
                entries.push((perm[n + r], perm[c]));
            }
        }
        let (pattern, map) = CscPattern::from_entries(n + m, &entries);
        let mut it = map.into_iter();
        let hess_pos = hess_active.iter().map(|&a| if a { it.next() } else { None }).collect();
        let jac_pos = jac_active.iter().map(|&a| if a { it.next() } else { None }).collect();
        let diag = pattern.diagonal_positions();
        let diag_pos = (0..n + m).map(|old| diag[perm[old]]).collect();
        let ldl = Ldl::analyze(&pattern);
        let nnz = pattern.nnz();
        Self {
            n,
            m,
            pattern,
            ldl,
            perm,
            hess_pos,
            jac_pos,
            diag_pos,
            base: vec![0.0; nnz],
            reg: vec![0.0; nnz],
        }
    }

    fn assemble(&mut self, hess: &[f64], jac: &[f64], var_diag: &[f64], con_diag: f64) {
        self.base.iter_mut().for_each(|v| *v = 0.0);
        for (k, pos) in self.hess_pos.iter().enumerate() {
            if let Some(p) = pos {
                self.base[*p] += hess[k];
            }
        }
        for (k, pos) in self.jac_pos.iter().enumerate() {
            if let Some(p) = pos {
                self.base[*p] += jac[k];
            }
        }
        for i in 0..self.n {
            self.base[self.diag_pos[i]] += var_diag[i];
        }
        for r in 0..self.m {
            self.base[self.diag_pos[self.n + r]] -= con_diag;
        }
        self.reg.copy_from_slice(&self.base);
        for i in 0..self.n {
            self.reg[self.diag_pos[i]] += STATIC_REG;
        }
        for r in 0..self.m {
            self.reg[self.diag_pos[self.n + r]] -= STATIC_REG;
        }
    }

    /// Factors and returns whether the inertia is `(n, m, 0)`, or `None`
    /// for a zero pivot.
    fn factor(&mut self) -> Option<bool> {
        let inertia = self.ldl.factor(&self.pattern, &self.reg, 1e-30);
        if inertia.zero > 0 {
            return None;
        }
        Some(inertia.positive == self.n && inertia.negative == self.m)
    }

    /// Solves with the factor of the regularized matrix, refining against
    /// the unregularized one. Returns the solution and the relative residual.
    fn solve(&self, rhs: &[f64]) -> (Vec<f64>, f64) {
        let nt = self.n + self.m;
        let mut b = vec![0.0; nt];
        for old in 0..nt {
            b[self.perm[old]] = rhs[old];
        }
        let bnorm = b.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        let mut x = b.clone();
        self.ldl.solve(&mut x);
        let mut r = vec![0.0; nt];
        let mut res = f64::INFINITY;
        for _ in 0..10 {
            sym_matvec(&self.pattern, &self.base, &x, &mut r);
            for i in 0..nt {
                r[i] = b[i] - r[i];
            }
            let rn = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let xn = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            res = rn / (bnorm + xn * 1e-8);
            if !res.is_finite() || rn <= 1e-14 * bnorm.max(xn) {
                break;
            }
            let prev = res;
            self.ldl.solve(&mut r);
            for i in 0..nt {
                x[i] += r[i];
            }
            if res < 1e-15 || (res > 0.5 * prev && res < 1e-10) {
                break;
            }
        }
        let mut out = vec![0.0; nt];
        for old in 0..nt {
            out[old] = x[self.perm[old]];
        }
        (out, res)
    }
}

struct Solver<'a> {
    p: &'a dyn NlpProblem,
    opt: SolverOptions,
    n: usize,
    m: usize,
    lo: Vec<f64>,
    up: Vec<f64>,
    lo_orig: Vec<f64>,
    up_orig: Vec<f64>,
    fixed: Vec<bool>,
    il: Vec<usize>,
    iu: Vec<usize>,
    obj_scale: f64,
    con_scale: Vec<f64>,
    jac_struct: Vec<(usize, usize)>,
    hess_struct: Vec<(usize, usize)>,
    kkt: Kkt,
    x: Vec<f64>,
}

struct Point {
    f: f64,
    c: Vec<f64>,
}

fn default_order(n: usize, m: usize, jac: &[(usize, usize)]) -> Vec<usize> {
    let mut count = vec![0usize; n];
    for &(_, c) in jac {
        count[c] += 1;
    }
    let mut sorted = count.clone();
    sorted.sort_unstable();
    let median = sorted.get(n / 2).copied().unwrap_or(0);
    let dense = (10 * median).max(50);
    let mut order: Vec<usize> = (0..n).filter(|&j| count[j] <= dense).collect();
    order.extend(n..n + m);
    order.extend((0..n).filter(|&j| count[j] > dense));
    order
}

impl<'a> Solver<'a> {
    fn new(p: &'a dyn NlpProblem, x0: &[f64], opt: &SolverOptions) -> Result<Self> {
        let n = p.num_vars();
        let m = p.num_constraints();
        if x0.len() != n {
            return Err(Error::Transcription(format!(
                "initial guess has {} entries, problem has {n} variables",
                x0.len()
            )));
        }
        let (lo_orig, up_orig) = p.bounds();
        if lo_orig.len() != n || up_orig.len() != n {
            return Err(Error::Transcription("bound vectors have wrong length".into()));
        }
        if let Some(j) = (0..n).find(|&j| lo_orig[j] > up_orig[j]) {
            return Err(Error::Transcription(format!(
                "variable {j} has lower bound above upper bound"
            )));
        }
        let fixed: Vec<bool> = (0..n).map(|j| lo_orig[j] == up_orig[j]).collect();
        let relax = |v: f64, s: f64| v + s * 1e-10 * v.abs().max(1.0);
        let lo: Vec<f64> = lo_orig.iter().map(|&l| relax(l, -1.0)).collect();
        let up: Vec<f64> = up_orig.iter().map(|&u| relax(u, 1.0)).collect();
        let il: Vec<usize> = (0..n).filter(|&j| !fixed[j] && lo[j].is_finite()).collect();
        let iu: Vec<usize> = (0..n).filter(|&j| !fixed[j] && up[j].is_finite()).collect();

        let mut x = x0.to_vec();
        for j in 0..n {
            if fixed[j] {
                x[j] = lo_orig[j];
                continue;
            }
            let (l, u) = (lo[j], up[j]);
            let (k1, k2) = (1e-2, 1e-2);
            if l.is_finite() && u.is_finite() {
                let pl = (k1 * l.abs().max(1.0)).min(k2 * (u - l));
                let pu = (k1 * u.abs().max(1.0)).min(k2 * (u - l));
                x[j] = x[j].max(l + pl).min(u - pu);
            } else if l.is_finite() {
                x[j] = x[j].max(l + k1 * l.abs().max(1.0));
            } else if u.is_finite() {
                x[j] = x[j].min(u - k1 * u.abs().max(1.0));
            }
        }

        let jac_struct = p.jacobian_structure();
        let hess_struct = p.hessian_structure();
        if let Some(&(r, c)) = jac_struct.iter().find(|&&(r, c)| r >= m || c >= n) {
            return Err(Error::Transcription(format!("Jacobian entry ({r}, {c}) out of range")));
        }
        if let Some(&(r, c)) = hess_struct.iter().find(|&&(r, c)| r >= n || c >= n) {
            return Err(Error::Transcription(format!("Hessian entry ({r}, {c}) out of range")));
        }

        // gradient-based scaling at the starting point
        let mut g = vec![0.0; n];
        p.gradient(&x, &mut g);
        let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let obj_scale = if gmax > opt.max_gradient {
            opt.max_gradient / gmax
        } else {
            1.0
        };
        let mut jv = vec![0.0; jac_struct.len()];
        p.jacobian_values(&x, &mut jv);
        let mut rowmax = vec![0.0f64; m];
        for (k, &(r, _)) in jac_struct.iter().enumerate() {
            rowmax[r] = rowmax[r].max(jv[k].abs());
        }
        let con_scale = rowmax
            .iter()
            .map(|&v| {
                if v > opt.max_gradient {
                    opt.max_gradient / v
                } else {
                    1.0
                }
            })
            .collect();

        let order = match p.kkt_order_hint() {
            Some(h) => {
                let mut seen = vec![false; n + m];
                if h.len() != n + m || h.iter().any(|&i| i >= n + m || std::mem::replace(&mut seen[i], true)) {
                    return Err(Error::Transcription("KKT order hint is not a permutation".into()));
                }
                h
            }
            None => default_order(n, m, &jac_struct),
        };
        let kkt = Kkt::new(n, m, &hess_struct, &jac_struct, &fixed, order);
        log::debug!(
            "ipm: {n} variables, {m} constraints, KKT nnz {}, factor nnz {}",
            kkt.pattern.nnz(),
            kkt.ldl.factor_nnz()
        );
        Ok(Self {
            p,
            opt: *opt,
            n,
            m,
            lo,
            up,
            lo_orig,
            up_orig,
            fixed,
            il,
            iu,
            obj_scale,
            con_scale,
            jac_struct,
            hess_struct,
            kkt,
            x,
        })
    }

    fn eval_point(&self, x: &[f64]) -> Point {
        let mut c = vec![0.0; self.m];
        self.p.constraints(x, &mut c);
        for (ci, s) in c.iter_mut().zip(&self.con_scale) {
            *ci *= s;
        }
        Point {
            f: self.obj_scale * self.p.objective(x),
            c,
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        self.p.gradient(x, &mut g);
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = if self.fixed[j] { 0.0 } else { *gj * self.obj_scale };
        }
        g
    }

    fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.jac_struct.len()];
        self.p.jacobian_values(x, &mut v);
        for (k, &(r, _)) in self.jac_struct.iter().enumerate() {
            v[k] *= self.con_scale[r];
        }
        v
    }

    fn jt_times(&self, jac: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (k, &(r, c)) in self.jac_struct.iter().enumerate() {
            if !self.fixed[c] {
                out[c] += jac[k] * y[r];
            }
        }
        out
    }

    fn barrier(&self, x: &[f64], f: f64, mu: f64) -> f64 {
        let mut phi = f;
        for &j in &self.il {
            phi -= mu * (x[j] - self.lo[j]).ln();
        }
        for &j in &self.iu {
            phi -= mu * (self.up[j] - x[j]).ln();
        }
        phi
    }

    fn fraction_to_boundary(&self, x: &[f64], dx: &[f64], tau: f64) -> f64 {
        let mut a = 1.0f64;
        for &j in &self.il {
            if dx[j] < 0.0 {
                a = a.min(-tau * (x[j] - self.lo[j]) / dx[j]);
            }
        }
        for &j in &self.iu {
            if dx[j] > 0.0 {
                a = a.min(tau * (self.up[j] - x[j]) / dx[j]);
            }
        }
        a
    }

    fn unscaled_violation(&self, c: &[f64]) -> f64 {
        c.iter()
            .zip(&self.con_scale)
            .fold(0.0f64, |a, (v, s)| a.max((v / s).abs()))
    }

    fn run(mut self) -> Result<SolveResult> {
        let n = self.n;
        let m = self.m;
        let nil = self.il.len();
        let niu = self.iu.len();
        let mut x = std::mem::take(&mut self.x);
        let mut y = vec![0.0; m];
        let mut zl = vec![1.0; nil];
        let mut zu = vec![1.0; niu];
        let mut mu = self.opt.mu_init;
        let mut pt = self.eval_point(&x);
        let mut g = self.gradient(&x);
        let mut jac = self.jacobian(&x);
        let theta0: f64 = pt.c.iter().map(|v| v.abs()).sum();
        let theta_max = 1e4 * theta0.max(1.0);
        let theta_min = 1e-4 * theta0.max(1.0);
        let mut filter: Vec<(f64, f64)> = Vec::new();
        let mut delta_w_last = 0.0f64;
        let mut acceptable_count = 0usize;
        let mut hess = vec![0.0; self.hess_struct.len()];
        let mut last = (f64::NAN, f64::NAN, f64::NAN);

        let finish = |this: &Self, status, x: Vec<f64>, y: &[f64], it, last: (f64, f64, f64)| {
            let mut x = x;
            for j in 0..this.n {
                x[j] = x[j].clamp(this.lo_orig[j], this.up_orig[j]);
            }
            let mut c = vec![0.0; this.m];
            this.p.constraints(&x, &mut c);
            let lambda = y
                .iter()
                .zip(&this.con_scale)
                .map(|(yi, s)| yi * s / this.obj_scale)
                .collect();
            Ok(SolveResult {
                status,
                objective: this.p.objective(&x),
                primal_infeasibility: c.iter().fold(0.0f64, |a, v| a.max(v.abs())),
                x,
                lambda,
                iterations: it,
                dual_infeasibility: last.0,
                complementarity: last.1,
            })
        };

        for iter in 0..=self.opt.max_iter {
            let sl: Vec<f64> = self.il.iter().map(|&j| x[j] - self.lo[j]).collect();
            let su: Vec<f64> = self.iu.iter().map(|&j| self.up[j] - x[j]).collect();
            let jty = self.jt_times(&jac, &y);
            let mut rd: Vec<f64> = (0..n).map(|j| g[j] + jty[j]).collect();
            for (k, &j) in self.il.iter().enumerate() {
                rd[j] -= zl[k];
            }
            for (k, &j) in self.iu.iter().enumerate() {
                rd[j] += zu[k];
            }
            for j in 0..n {
                if self.fixed[j] {
                    rd[j] = 0.0;
                }
            }
            let s_max: f64 = 100.0;
            let zsum: f64 = zl.iter().chain(&zu).map(|v| v.abs()).sum();
            let ysum: f64 = y.iter().map(|v| v.abs()).sum();
            let sd = (s_max.max((ysum + zsum) / (n + m).max(1) as f64)) / s_max;
            let sc = (s_max.max(zsum / (nil + niu).max(1) as f64)) / s_max;
            let dual = rd.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let primal = pt.c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let comp = |mu: f64| {
                sl.iter()
                    .zip(&zl)
                    .chain(su.iter().zip(&zu))
                    .fold(0.0f64, |a, (s, z)| a.max((s * z - mu).abs()))
            };
            let e0 = (dual / sd).max(primal).max(comp(0.0) / sc);
            last = (dual / sd, comp(0.0), primal);
            let viol = self.unscaled_violation(&pt.c);
            if !e0.is_finite() {
                return finish(&self, SolverStatus::NumericalError, x, &y, iter, last);
            }
            if e0 <= self.opt.tol && viol <= self.opt.constr_viol_tol {
                return finish(&self, SolverStatus::Optimal, x, &y, iter, last);
            }
            if e0 <= self.opt.acceptable_tol && viol <= self.opt.constr_viol_tol {
                acceptable_count += 1;
                if acceptable_count >= self.opt.acceptable_iter {
                    return finish(&self, SolverStatus::Acceptable, x, &y, iter, last);
                }
            } else {
                acceptable_count = 0;
            }
            if iter == self.opt.max_iter {
                break;
            }

            // barrier parameter
            loop {
                let emu = (dual / sd).max(primal).max(comp(mu) / sc);
                if emu <= 10.0 * mu && mu > self.opt.tol / 10.0 {
                    mu = (self.opt.tol / 10.0).max((0.2 * mu).min(mu.powf(1.5)));
                    filter.clear();
                } else {
                    break;
                }
            }

            // Newton system
            let ys: Vec<f64> = y.iter().zip(&self.con_scale).map(|(a, b)| a * b).collect();
            self.p.hessian_values(&x, self.obj_scale, &ys, &mut hess);
            let mut sigma = vec![0.0; n];
            let mut grad_phi = g.clone();
            for (k, &j) in self.il.iter().enumerate() {
                sigma[j] += zl[k] / sl[k];
                grad_phi[j] -= mu / sl[k];
            }
            for (k, &j) in self.iu.iter().enumerate() {
                sigma[j] += zu[k] / su[k];
                grad_phi[j] += mu / su[k];
            }
            for j in 0..n {
                if self.fixed[j] {
                    sigma[j] = 1.0;
                    grad_phi[j] = 0.0;
                }
            }
            let mut rhs = vec![0.0; n + m];
            for j in 0..n {
                rhs[j] = -(grad_phi[j] + jty[j]);
                if self.fixed[j] {
                    rhs[j] = 0.0;
                }
            }
            for r in 0..m {
                rhs[n + r] = -pt.c[r];
            }

            let mut delta_w = 0.0f64;
            let mut delta_c = 0.0f64;
            let mut attempts = 0;
            let (dir, _res) = loop {
                attempts += 1;
                if attempts > 60 || delta_w > 1e40 {
                    log::warn!("ipm: inertia correction failed at iteration {iter}");
                    return finish(&self, SolverStatus::NumericalError, x, &y, iter, last);
                }
                let diag: Vec<f64> = (0..n)
                    .map(|j| sigma[j] + if self.fixed[j] { 0.0 } else { delta_w })
                    .collect();
                self.kkt.assemble(&hess, &jac, &diag, delta_c);
                let factored = self.kkt.factor();
                log::trace!("ipm: factor δw {delta_w:.1e} δc {delta_c:.1e} -> {factored:?}");
                match factored {
                    None => {
                        if delta_c == 0.0 {
                            delta_c = 1e-8 * mu.powf(0.25);
                        } else {
                            delta_w = next_delta_w(delta_w, delta_w_last);
                        }
                        continue;
                    }
                    Some(false) => {
                        delta_w = next_delta_w(delta_w, delta_w_last);
                        continue;
                    }
                    Some(true) => {
                        let (sol, res) = self.kkt.solve(&rhs);
                        if !(res < 1e-5) || sol.iter().any(|v| !v.is_finite()) {
                            log::trace!("ipm: solve residual {res:.1e}");
                            if delta_c == 0.0 {
                                delta_c = 1e-8 * mu.powf(0.25);
                            } else {
                                delta_w = next_delta_w(delta_w, delta_w_last);
                            }
                            continue;
                        }
                        if delta_w > 0.0 {
                            delta_w_last = delta_w;
                        }
                        break (sol, res);
                    }
                }
            };
            let dx = dir[..n].to_vec();
            let dy = dir[n..].to_vec();
            let dzl: Vec<f64> = (0..nil)
                .map(|k| mu / sl[k] - zl[k] - zl[k] / sl[k] * dx[self.il[k]])
                .collect();
            let dzu: Vec<f64> = (0..niu)
                .map(|k| mu / su[k] - zu[k] + zu[k] / su[k] * dx[self.iu[k]])
                .collect();
            let tau = (1.0 - mu).max(0.99);
            let alpha_max = self.fraction_to_boundary(&x, &dx, tau);
            let mut alpha_z = 1.0f64;
            for k in 0..nil {
                if dzl[k] < 0.0 {
                    alpha_z = alpha_z.min(-tau * zl[k] / dzl[k]);
                }
            }
            for k in 0..niu {
                if dzu[k] < 0.0 {
                    alpha_z = alpha_z.min(-tau * zu[k] / dzu[k]);
                }
            }

            // filter line search
            let theta: f64 = pt.c.iter().map(|v| v.abs()).sum();
            let phi = self.barrier(&x, pt.f, mu);
            let gphi_d: f64 = grad_phi.iter().zip(&dx).map(|(a, b)| a * b).sum();
            let tiny = dx
                .iter()
                .zip(&x)
                .all(|(d, xv)| d.abs() <= 10.0 * f64::EPSILON * (1.0 + xv.abs()));
            let alpha_min = if gphi_d < 0.0 {
                0.05 * GAMMA_THETA
                    .min(GAMMA_PHI * theta / -gphi_d)
                    .min(DELTA_SWITCH * theta.powf(S_THETA) / (-gphi_d).powf(S_PHI))
            } else {
                0.05 * GAMMA_THETA
            };
            let acceptable = |theta_t: f64, phi_t: f64, alpha: f64, filter: &[(f64, f64)]| -> Option<bool> {
                if !theta_t.is_finite() || !phi_t.is_finite() || theta_t > theta_max {
                    return None;
                }
                if filter.iter().any(|&(ft, fp)| theta_t >= ft && phi_t >= fp) {
                    return None;
                }
                let switching = gphi_d < 0.0 && alpha * (-gphi_d).powf(S_PHI) > DELTA_SWITCH * theta.powf(S_THETA);
                if theta <= theta_min && switching {
                    if phi_t <= phi + ETA_PHI * alpha * gphi_d {
                        return Some(false);
                    }
                    return None;
                }
                if theta_t <= (1.0 - GAMMA_THETA) * theta || phi_t <= phi - GAMMA_PHI * theta {
                    // augment unless this was an f-type step
                    let f_type = switching && phi_t <= phi + ETA_PHI * alpha * gphi_d;
                    return Some(!f_type);
                }
                None
            };

            let mut alpha = alpha_max;
            let mut accepted: Option<(Vec<f64>, Point, bool)> = None;
            if tiny {
                let xt: Vec<f64> = (0..n).map(|j| x[j] + alpha * dx[j]).collect();
                let pt_t = self.eval_point(&xt);
                accepted = Some((xt, pt_t, false));
            }
            let mut first = true;
            while accepted.is_none() {
                if alpha < alpha_min {
                    break;
                }
                let xt: Vec<f64> = (0..n).map(|j| x[j] + alpha * dx[j]).collect();
                let pt_t = self.eval_point(&xt);
                let theta_t: f64 = pt_t.c.iter().map(|v| v.abs()).sum();
                let phi_t = self.barrier(&xt, pt_t.f, mu);
                if let Some(aug) = acceptable(theta_t, phi_t, alpha, &filter) {
                    accepted = Some((xt, pt_t, aug));
                    break;
                }
                if first && theta_t >= theta && self.opt.max_soc > 0 {
                    // second-order correction
                    let mut c_soc: Vec<f64> = (0..m).map(|r| alpha * pt.c[r] + pt_t.c[r]).collect();
                    let mut theta_old = theta_t;
                    for _ in 0..self.opt.max_soc {
                        let mut rhs_soc = rhs.clone();
                        for r in 0..m {
                            rhs_soc[n + r] = -c_soc[r];
                        }
                        let (sol, _) = self.kkt.solve(&rhs_soc);
                        let dxs = &sol[..n];
                        let a_soc = self.fraction_to_boundary(&x, dxs, tau);
                        let xs: Vec<f64> = (0..n).map(|j| x[j] + a_soc * dxs[j]).collect();
                        let pt_s = self.eval_point(&xs);
                        let theta_s: f64 = pt_s.c.iter().map(|v| v.abs()).sum();
                        let phi_s = self.barrier(&xs, pt_s.f, mu);
                        if let Some(aug) = acceptable(theta_s, phi_s, alpha, &filter) {
                            accepted = Some((xs, pt_s, aug));
                            break;
                        }
                        if theta_s > 0.99 * theta_old {
                            break;
                        }
                        theta_old = theta_s;
                        for r in 0..m {
                            c_soc[r] = a_soc * c_soc[r] + pt_s.c[r];
                        }
                    }
                }
                first = false;
                if accepted.is_none() {
                    alpha *= 0.5;
                }
            }

            match accepted {
                Some((xt, pt_t, augment)) => {
                    if augment {
                        filter.push(((1.0 - GAMMA_THETA) * theta, phi - GAMMA_PHI * theta));
                    }
                    let alpha_y = alpha;
                    x = xt;
                    pt = pt_t;
                    for r in 0..m {
                        y[r] += alpha_y * dy[r];
                    }
                    for k in 0..nil {
                        zl[k] += alpha_z * dzl[k];
                    }
                    for k in 0..niu {
                        zu[k] += alpha_z * dzu[k];
                    }
                }
                None => {
                    log::debug!("ipm: entering restoration at iteration {iter} (θ = {theta:.3e})");
                    match self.restore(&mut x, mu, &filter, phi) {
                        Some(p) => {
                            pt = p;
                            y.iter_mut().for_each(|v| *v = 0.0);
                            filter.push(((1.0 - GAMMA_THETA) * theta, phi - GAMMA_PHI * theta));
                        }
                        None => {
                            let pt_now = self.eval_point(&x);
                            let th: f64 = pt_now.c.iter().map(|v| v.abs()).sum();
                            let status = if th > 1e-4 * theta0.max(1.0) {
                                SolverStatus::Infeasible
                            } else {
                                SolverStatus::RestorationFailed
                            };
                            return finish(&self, status, x, &y, iter, last);
                        }
                    }
                }
            }
            // bound multiplier safeguard
            for (k, &j) in self.il.iter().enumerate() {
                let s = x[j] - self.lo[j];
                zl[k] = zl[k].clamp(mu / (KAPPA_SIGMA * s), KAPPA_SIGMA * mu / s);
            }
            for (k, &j) in self.iu.iter().enumerate() {
                let s = self.up[j] - x[j];
                zu[k] = zu[k].clamp(mu / (KAPPA_SIGMA * s), KAPPA_SIGMA * mu / s);
            }
            g = self.gradient(&x);
            jac = self.jacobian(&x);
            log::debug!(
                "ipm {iter:4} f {:+.8e} θ {:.2e} dual {:.2e} μ {:.1e} α {:.2e} δw {:.1e}",
                pt.f / self.obj_scale,
                primal,
                dual,
                mu,
                alpha,
                delta_w
            );
        }
        finish(&self, SolverStatus::MaxIterations, x, &y, self.opt.max_iter, last)
    }

    /// Regularized Gauss–Newton descent on `½‖c‖²` that stays inside the
    /// bounds. Returns the new point once it is acceptable to the filter.
    fn restore(&mut self, x: &mut Vec<f64>, mu: f64, filter: &[(f64, f64)], _phi: f64) -> Option<Point> {
        let n = self.n;
        let m = self.m;
        let mut pt = self.eval_point(x);
        let theta_start: f64 = pt.c.iter().map(|v| v.abs()).sum();
        let zero_h = vec![0.0; self.hess_struct.len()];
        let mut rho = 1e-4;
        for _ in 0..200 {
            let theta: f64 = pt.c.iter().map(|v| v.abs()).sum();
            let phi = self.barrier(x, pt.f, mu);
            let ok_filter = !filter.iter().any(|&(ft, fp)| theta >= ft && phi >= fp);
            if theta <= 0.9 * theta_start && ok_filter {
                return Some(pt);
            }
            let jac = self.jacobian(x);
            let mut diag = vec![rho; n];
            for &j in &self.il {
                let s = x[j] - self.lo[j];
                diag[j] += mu / (s * s);
            }
            for &j in &self.iu {
                let s = self.up[j] - x[j];
                diag[j] += mu / (s * s);
            }
            for j in 0..n {
                if self.fixed[j] {
                    diag[j] = 1.0;
                }
            }
            self.kkt.assemble(&zero_h, &jac, &diag, 1.0);
            if self.kkt.factor() != Some(true) {
                rho *= 10.0;
                if rho > 1e10 {
                    return None;
                }
                continue;
            }
            let mut rhs = vec![0.0; n + m];
            for r in 0..m {
                rhs[n + r] = -pt.c[r];
            }
            let (sol, _) = self.kkt.solve(&rhs);
            let d = &sol[..n];
            let amax = self.fraction_to_boundary(x, d, 0.99);
            let c2: f64 = pt.c.iter().map(|v| v * v).sum();
            let mut alpha = amax;
            let mut moved = false;
            while alpha > 1e-12 {
                let xt: Vec<f64> = (0..n).map(|j| x[j] + alpha * d[j]).collect();
                let pt_t = self.eval_point(&xt);
                let c2t: f64 = pt_t.c.iter().map(|v| v * v).sum();
                if c2t.is_finite() && c2t <= (1.0 - 1e-4 * alpha) * c2 {
                    *x = xt;
                    pt = pt_t;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if moved {
                rho = (rho / 3.0).max(1e-10);
            } else {
                rho *= 10.0;
                if rho > 1e10 {
                    return None;
                }
            }
        }
        None
    }
}

fn next_delta_w(current: f64, last: f64) -> f64 {
    if current == 0.0 {
        if last == 0.0 {
            1e-4
        } else {
            (last / 3.0).max(1e-20)
        }
    } else if last == 0.0 {
        current * 100.0
    } else {
        current * 8.0
    }
}

//! Levenberg-Marquardt minimisation of `0.5 * |r(p)|^2`.

use nalgebra::{DMatrix, DVector};

pub trait LeastSquares {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn residuals(&self, p: &DVector<f64>, out: &mut DVector<f64>);

    /// Jacobian of the residuals. Defaults to central differences.
    fn jacobian(&self, p: &DVector<f64>, jac: &mut DMatrix<f64>) {
        let m = self.n_residuals();
        let mut plus = DVector::zeros(m);
        let mut minus = DVector::zeros(m);
        let mut q = p.clone();
        for j in 0..p.len() {
            let h = 1e-6 * p[j].abs().max(1e-3);
            q[j] = p[j] + h;
            self.residuals(&q, &mut plus);
            q[j] = p[j] - h;
            self.residuals(&q, &mut minus);
            q[j] = p[j];
            let mut col = jac.column_mut(j);
            col.copy_from(&((&plus - &minus) / (2.0 * h)));
        }
    }

    /// Map a trial point back into the feasible set.
    fn project(&self, _p: &mut DVector<f64>) {}
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmConfig {
    pub max_iter: usize,
    pub mu_init: f64,
    pub mu_increase: f64,
    pub mu_decrease: f64,
    /// Damping ceiling; exceeding it ends the run with the best point so far.
    pub mu_max: f64,
    /// Stop when the relative cost decrease of an accepted step falls below
    /// this for `patience` consecutive steps.
    pub rel_tol: f64,
    pub patience: usize,
    pub grad_tol: f64,
    /// Scale damping by diag(J^T J) (Marquardt) instead of the identity.
    pub scaled: bool,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            mu_init: 1e-3,
            mu_increase: 10.0,
            mu_decrease: 0.1,
            mu_max: 1e10,
            rel_tol: 1e-12,
            patience: 3,
            grad_tol: 1e-14,
            scaled: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    CostStagnation,
    SmallGradient,
    DampingCeiling,
    MaxIterations,
    ZeroCost,
}

#[derive(Clone, Debug)]
pub struct LmReport {
    pub params: DVector<f64>,
    /// `0.5 * |r|^2` at `params`.
    pub cost: f64,
    pub initial_cost: f64,
    pub iterations: usize,
    pub termination: Termination,
}

impl LmReport {
    /// True when the run stopped for a reason other than exhausting its
    /// iteration or damping budget.
    pub fn converged(&self) -> bool {
        !matches!(
            self.termination,
            Termination::MaxIterations | Termination::DampingCeiling
        )
    }
}

fn half_sq(r: &DVector<f64>) -> f64 {
    0.5 * r.norm_squared()
}

pub fn minimize<P: LeastSquares>(problem: &P, p0: DVector<f64>, cfg: &LmConfig) -> LmReport {
    let n = problem.n_params();
    let m = problem.n_residuals();
    let mut p = p0;
    problem.project(&mut p);
    let mut r = DVector::zeros(m);
    problem.residuals(&p, &mut r);
    let mut cost = half_sq(&r);
    let initial_cost = cost;
    let mut jac = DMatrix::zeros(m, n);
    let mut trial_r = DVector::zeros(m);
    let mut mu = cfg.mu_init;
    let mut stagnant = 0;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        if !(cost > 0.0) {
            termination = Termination::ZeroCost;
            break;
        }
        iterations += 1;
        problem.jacobian(&p, &mut jac);
        let jtj = jac.tr_mul(&jac);
        let grad = jac.tr_mul(&r);
        if grad.amax() < cfg.grad_tol {
            termination = Termination::SmallGradient;
            break;
        }
        let diag: DVector<f64> = if cfg.scaled {
            jtj.diagonal().map(|v| v.max(1e-12))
        } else {
            DVector::from_element(n, 1.0)
        };

        let mut accepted = false;
        while mu <= cfg.mu_max {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += mu * diag[i];
            }
            let Some(chol) = a.cholesky() else {
                mu *= cfg.mu_increase;
                continue;
            };
            let step = chol.solve(&(-&grad));
            let mut trial = &p + &step;
            problem.project(&mut trial);
            problem.residuals(&trial, &mut trial_r);
            let trial_cost = half_sq(&trial_r);
            if trial_cost.is_finite() && trial_cost < cost {
                let rel = (cost - trial_cost) / cost;
                p = trial;
                std::mem::swap(&mut r, &mut trial_r);
                cost = trial_cost;
                mu = (mu * cfg.mu_decrease).max(1e-20);
                stagnant = if rel < cfg.rel_tol { stagnant + 1 } else { 0 };
                accepted = true;
                break;
            }
            mu *= cfg.mu_increase;
        }
        if !accepted {
            termination = Termination::DampingCeiling;
            break;
        }
        if stagnant >= cfg.patience {
            termination = Termination::CostStagnation;
            break;
        }
    }
    LmReport {
        params: p,
        cost,
        initial_cost,
        iterations,
        termination,
    }
}

//! Damped Newton iteration with backtracking line search, a positivity
//! safeguard on the step length, and lazy Jacobian refresh (the previous
//! factorization is reused until it stops contracting).

use crate::scheme::SchemeError;

/// Nonlinear system seen by the Newton driver.
pub trait NewtonProblem {
    fn dim(&self) -> usize;

    /// Residual at x. May fail when x leaves the admissible set (log domain);
    /// the line search treats that as a rejected step.
    fn residual(&mut self, x: &[f64], out: &mut [f64]) -> Result<(), SchemeError>;

    /// Whether a (possibly stale) factorized linearization is available.
    fn has_linearization(&self) -> bool;

    /// Factorize the Jacobian at x.
    fn refresh_linearization(&mut self, x: &[f64]) -> Result<(), SchemeError>;

    /// Solve J d = rhs with the current factorization, in place.
    fn solve_linearized(&mut self, rhs: &mut [f64]) -> Result<(), SchemeError>;

    /// Largest admissible fraction of the step d from x (e.g. a positivity
    /// fraction-to-boundary rule); 1.0 when unconstrained.
    fn max_step(&self, x: &[f64], d: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Line-search backtracking factor.
    pub backtrack: f64,
    pub min_alpha: f64,
    /// Refresh the Jacobian when the residual contraction per iteration is
    /// worse than this while iterating on a stale factorization.
    pub stale_contraction: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 50,
            backtrack: 0.5,
            min_alpha: 1e-8,
            stale_contraction: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NewtonStats {
    pub iterations: usize,
    pub residual: f64,
    pub linear_solves: usize,
    pub refreshes: usize,
}

/// Max norm; NaN anywhere poisons the result so the line search rejects it.
fn inf_norm(v: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for &x in v {
        if !x.is_finite() {
            return f64::INFINITY;
        }
        m = m.max(x.abs());
    }
    m
}

/// Solve F(x) = 0 starting from x (in place).
pub fn newton_solve<P: NewtonProblem>(problem: &mut P, x: &mut [f64], opts: &NewtonOptions) -> Result<NewtonStats, SchemeError> {
    let n = problem.dim();
    assert_eq!(x.len(), n);
    let mut stats = NewtonStats::default();
    let mut r = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut x_try = vec![0.0; n];
    let mut r_try = vec![0.0; n];

    problem.residual(x, &mut r)?;
    let mut nr = inf_norm(&r);
    // age of the factorization in iterations; usize::MAX marks "inherited
    // from a previous solve" (stale but often still good)
    let mut age: usize = usize::MAX;
    if !problem.has_linearization() {
        problem.refresh_linearization(x)?;
        stats.refreshes += 1;
        age = 0;
    }

    while nr > opts.tol {
        if stats.iterations >= 2 * opts.max_iters {
            return Err(SchemeError::NewtonDiverged { iterations: stats.iterations, residual: nr });
        }
        if stats.iterations >= opts.max_iters {
            if age > 0 {
                problem.refresh_linearization(x)?;
                stats.refreshes += 1;
                age = 0;
            } else {
                return Err(SchemeError::NewtonDiverged { iterations: stats.iterations, residual: nr });
            }
        }

        d.copy_from_slice(&r);
        for v in d.iter_mut() {
            *v = -*v;
        }
        problem.solve_linearized(&mut d)?;
        stats.linear_solves += 1;

        let alpha_cap = problem.max_step(x, &d).min(1.0);
        if alpha_cap < opts.min_alpha {
            if age > 0 {
                problem.refresh_linearization(x)?;
                stats.refreshes += 1;
                age = 0;
                continue;
            }
            return Err(SchemeError::PositivityLost { step_fraction: alpha_cap });
        }

        let mut alpha = alpha_cap;
        let mut accepted = false;
        while alpha >= opts.min_alpha {
            for k in 0..n {
                x_try[k] = x[k] + alpha * d[k];
            }
            match problem.residual(&x_try, &mut r_try) {
                Ok(()) => {
                    let nr_try = inf_norm(&r_try);
                    if nr_try <= (1.0 - 1e-4 * alpha) * nr || nr_try <= opts.tol {
                        let contraction = if nr > 0.0 { nr_try / nr } else { 0.0 };
                        x.copy_from_slice(&x_try);
                        r.copy_from_slice(&r_try);
                        nr = nr_try;
                        stats.iterations += 1;
                        accepted = true;
                        if age != 0 && contraction > opts.stale_contraction && nr > opts.tol {
                            problem.refresh_linearization(x)?;
                            stats.refreshes += 1;
                            age = 0;
                        } else {
                            age = age.saturating_add(1);
                        }
                        break;
                    }
                }
                Err(SchemeError::Physics(_)) => {} // inadmissible trial: shrink
                Err(e) => return Err(e),
            }
            alpha *= opts.backtrack;
        }
        if !accepted {
            if age > 0 {
                problem.refresh_linearization(x)?;
                stats.refreshes += 1;
                age = 0;
                continue;
            }
            return Err(SchemeError::NewtonDiverged { iterations: stats.iterations, residual: nr });
        }
    }

    stats.residual = nr;
    Ok(stats)
}

/// Dense Newton problem over closures; used for small systems and tests.
pub struct DenseProblem<R, J> {
    pub n: usize,
    pub res: R,
    pub jac: J,
    lu: Option<faer::linalg::solvers::PartialPivLu<f64>>,
    pub floor: Option<(Box<dyn Fn(usize) -> bool>, f64)>,
}

impl<R, J> DenseProblem<R, J>
where
    R: FnMut(&[f64], &mut [f64]) -> Result<(), SchemeError>,
    J: FnMut(&[f64]) -> faer::Mat<f64>,
{
    pub fn new(n: usize, res: R, jac: J) -> Self {
        Self { n, res, jac, lu: None, floor: None }
    }
}

impl<R, J> NewtonProblem for DenseProblem<R, J>
where
    R: FnMut(&[f64], &mut [f64]) -> Result<(), SchemeError>,
    J: FnMut(&[f64]) -> faer::Mat<f64>,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn residual(&mut self, x: &[f64], out: &mut [f64]) -> Result<(), SchemeError> {
        (self.res)(x, out)
    }

    fn has_linearization(&self) -> bool {
        self.lu.is_some()
    }

    fn refresh_linearization(&mut self, x: &[f64]) -> Result<(), SchemeError> {
        let m = (self.jac)(x);
        self.lu = Some(m.partial_piv_lu());
        Ok(())
    }

    fn solve_linearized(&mut self, rhs: &mut [f64]) -> Result<(), SchemeError> {
        use faer::linalg::solvers::Solve;
        let lu = self.lu.as_ref().ok_or_else(|| SchemeError::LinearSolveFailed("no factorization".into()))?;
        let m = faer::MatMut::from_column_major_slice_mut(rhs, self.n, 1);
        lu.solve_in_place(m);
        Ok(())
    }

    fn max_step(&self, x: &[f64], d: &[f64]) -> f64 {
        match &self.floor {
            None => 1.0,
            Some((mask, floor)) => {
                let mut a: f64 = 1.0;
                for k in 0..self.n {
                    if mask(k) && d[k] < 0.0 {
                        let room = x[k] - floor;
                        if room <= 0.0 {
                            return 0.0;
                        }
                        a = a.min(0.995 * room / (-d[k]));
                    }
                }
                a
            }
        }
    }
}

//! The monolithic first-order implicit time step: all ten fields of the
//! coupled system are advanced simultaneously by a damped Newton iteration
//! over the concatenated residual, with a sparse direct factorization reused
//! across iterations (and steps) while it keeps contracting.

mod assembly;
pub mod layout;
pub mod linear;
pub mod newton;

use crate::mesh::bc::BoundaryPlan;
use crate::mesh::{self, FaceField, GridSpec, MeshError, ScalarField};
use crate::physics::{PhysParams, PhysicsError};
use assembly::FullCtx;
use layout::Layout;
use linear::{NoJac, PatternSink, SparseSystem};
use newton::{newton_solve, NewtonOptions, NewtonProblem};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("Newton diverged after {iterations} iterations, residual {residual:e}")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("positivity safeguard blocked the Newton step (fraction {step_fraction:e})")]
    PositivityLost { step_fraction: f64 },
    #[error("linear solve failed: {0}")]
    LinearSolveFailed(String),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("invalid state: {0}")]
    InvalidState(String),
}

/// Full solution snapshot at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: FaceField,
    pub p: ScalarField,
    pub phi: ScalarField,
    pub c1: ScalarField,
    pub c2: ScalarField,
    pub c3: ScalarField,
    pub mu_phi: ScalarField,
    pub mu1: ScalarField,
    pub mu2: ScalarField,
    pub mu3: ScalarField,
}

impl State {
    /// Zero-velocity state with uniform fields; potentials are filled from
    /// their definitions so uniform data is scheme-consistent.
    pub fn uniform(g: &GridSpec, params: &PhysParams, phi: f64, c1: f64, c2: f64, c3: f64) -> Self {
        let gz = ScalarField::zeros(g);
        let phi_f = ScalarField::constant(g, phi);
        let c1_f = ScalarField::constant(g, c1);
        let c2_f = ScalarField::constant(g, c2);
        let c3_f = ScalarField::constant(g, c3);
        let mut s = State {
            t: 0.0,
            u: FaceField::zeros(g),
            p: gz.clone(),
            phi: phi_f,
            c1: c1_f,
            c2: c2_f,
            c3: c3_f,
            mu_phi: gz.clone(),
            mu1: gz.clone(),
            mu2: gz.clone(),
            mu3: gz,
        };
        s.refresh_potentials(g, params).expect("uniform state potentials");
        s
    }

    /// Recompute the four potentials from the current fields, treating the
    /// state as both time levels (steady evaluation of the scheme formulas).
    pub fn refresh_potentials(&mut self, g: &GridSpec, params: &PhysParams) -> Result<(), PhysicsError> {
        self.mu_phi = crate::physics::mu_phi_scheme(&self.phi, &self.phi, &self.c2, &self.c3, &self.c2, &self.c3, params, g)?;
        self.mu1 = crate::physics::mu1_scheme(&self.c1)?;
        self.mu2 = crate::physics::mu2_scheme(&self.c2, &self.phi, &self.phi, params)?;
        self.mu3 = crate::physics::mu3_scheme(&self.c3, &self.c3, &self.phi, &self.phi, params, g)?;
        Ok(())
    }

    /// State invariants: finite fields, concentrations above the positivity
    /// floor, discrete incompressibility, pressure gauge.
    pub fn validate(&self, g: &GridSpec, plan: &BoundaryPlan, cfg: &SchemeConfig) -> Result<(), SchemeError> {
        for (name, f) in [
            ("p", &self.p),
            ("phi", &self.phi),
            ("c1", &self.c1),
            ("c2", &self.c2),
            ("c3", &self.c3),
            ("mu_phi", &self.mu_phi),
            ("mu1", &self.mu1),
            ("mu2", &self.mu2),
            ("mu3", &self.mu3),
        ] {
            f.check_finite(name).map_err(SchemeError::Mesh)?;
        }
        self.u.check_finite("u").map_err(SchemeError::Mesh)?;
        for (name, f) in [("c1", &self.c1), ("c2", &self.c2), ("c3", &self.c3)] {
            let min = f.min();
            if min + 1.0 < 0.5 * cfg.c_floor {
                return Err(SchemeError::InvalidState(format!("{name} + 1 = {:e} below the positivity floor", min + 1.0)));
            }
        }
        let div = mesh::div_f2c(&self.u, g).map_err(SchemeError::Mesh)?;
        let div_inf = div.data.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if div_inf > 10.0 * cfg.lin_tol {
            return Err(SchemeError::InvalidState(format!("velocity divergence {div_inf:e} exceeds 10*lin_tol")));
        }
        let uses_gauge = !crate::mesh::bc::SIDES
            .iter()
            .any(|&s| matches!(plan.velocity[s as usize], crate::mesh::bc::SideCondition::PressureOutlet(_)));
        if uses_gauge {
            let mean = self.p.data.iter().sum::<f64>() / self.p.data.len() as f64;
            if mean.abs() > 100.0 * cfg.newton_tol {
                return Err(SchemeError::InvalidState(format!("pressure mean {mean:e} violates the gauge")));
            }
        }
        Ok(())
    }
}

/// Jacobian construction mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JacMode {
    Analytic,
    /// Dense finite-difference Jacobian; debugging fallback, desk sizes only.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_max: usize,
    /// Positivity safeguard: c_i + 1 >= c_floor along the Newton path.
    pub c_floor: f64,
    pub lin_tol: f64,
    pub lin_max: usize,
    pub jac_mode: JacMode,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            newton_tol: 1e-10,
            newton_max: 50,
            c_floor: 1e-8,
            lin_tol: 1e-9,
            lin_max: 200,
            jac_mode: JacMode::Analytic,
        }
    }
}

/// Solver telemetry for one accepted step.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepReport {
    pub newton_iters: usize,
    pub residual: f64,
    pub linear_iters: usize,
    pub factorizations: usize,
    pub wall_time_s: f64,
}

struct FullProblem<'a, 'b> {
    ctx: &'b FullCtx<'a>,
    sys: &'b mut SparseSystem,
    dense: Option<faer::linalg::solvers::PartialPivLu<f64>>,
    jac_mode: JacMode,
    c_floor: f64,
}

impl FullProblem<'_, '_> {
    fn fd_jacobian(&mut self, x: &[f64]) -> Result<(), SchemeError> {
        let n = x.len();
        if n > 6000 {
            return Err(SchemeError::LinearSolveFailed(
                "finite-difference Jacobian is a desk-size debugging mode (n <= 6000)".into(),
            ));
        }
        let mut m = faer::Mat::<f64>::zeros(n, n);
        let mut xp = x.to_vec();
        let mut rp = vec![0.0; n];
        let mut rm = vec![0.0; n];
        for col in 0..n {
            let h = 1e-7 * (1.0 + x[col].abs());
            xp[col] = x[col] + h;
            assembly::assemble(self.ctx, &xp, &mut rp, &mut NoJac)?;
            xp[col] = x[col] - h;
            assembly::assemble(self.ctx, &xp, &mut rm, &mut NoJac)?;
            xp[col] = x[col];
            for row in 0..n {
                m[(row, col)] = (rp[row] - rm[row]) / (2.0 * h);
            }
        }
        self.dense = Some(m.partial_piv_lu());
        Ok(())
    }
}

impl NewtonProblem for FullProblem<'_, '_> {
    fn dim(&self) -> usize {
        self.ctx.lay.n
    }

    fn residual(&mut self, x: &[f64], out: &mut [f64]) -> Result<(), SchemeError> {
        assembly::assemble(self.ctx, x, out, &mut NoJac)
    }

    fn has_linearization(&self) -> bool {
        match self.jac_mode {
            JacMode::Analytic => self.sys.has_factorization(),
            JacMode::FiniteDifference => self.dense.is_some(),
        }
    }

    fn refresh_linearization(&mut self, x: &[f64]) -> Result<(), SchemeError> {
        match self.jac_mode {
            JacMode::Analytic => {
                let mut res = vec![0.0; self.ctx.lay.n];
                {
                    let mut sink = self.sys.value_sink();
                    assembly::assemble(self.ctx, x, &mut res, &mut sink)?;
                }
                self.sys.factorize()
            }
            JacMode::FiniteDifference => self.fd_jacobian(x),
        }
    }

    fn solve_linearized(&mut self, rhs: &mut [f64]) -> Result<(), SchemeError> {
        match self.jac_mode {
            JacMode::Analytic => self.sys.solve_in_place(rhs),
            JacMode::FiniteDifference => {
                use faer::linalg::solvers::Solve;
                let lu = self
                    .dense
                    .as_ref()
                    .ok_or_else(|| SchemeError::LinearSolveFailed("no factorization".into()))?;
                let n = rhs.len();
                lu.solve_in_place(faer::MatMut::from_column_major_slice_mut(rhs, n, 1));
                Ok(())
            }
        }
    }

    fn max_step(&self, x: &[f64], d: &[f64]) -> f64 {
        let lay = &self.ctx.lay;
        let floor = self.c_floor - 1.0;
        let mut alpha: f64 = 1.0;
        for s in 0..3 {
            let off = lay.off_c[s];
            for k in 0..lay.nc {
                let dk = d[off + k];
                if dk < 0.0 {
                    let room = x[off + k] - floor;
                    if room <= 0.0 {
                        return 0.0;
                    }
                    alpha = alpha.min(0.995 * room / (-dk));
                }
            }
        }
        alpha
    }
}

/// Reusable time stepper: holds the frozen Jacobian sparsity pattern and the
/// most recent factorization, both shared across steps.
pub struct Stepper {
    pub g: GridSpec,
    pub params: PhysParams,
    pub cfg: SchemeConfig,
    pub plan: BoundaryPlan,
    lay: Layout,
    sys: SparseSystem,
    /// (t, packed x) of the last two accepted levels, for the linear
    /// extrapolation predictor.
    history: Option<((f64, Vec<f64>), (f64, Vec<f64>))>,
}

impl Stepper {
    pub fn new(g: &GridSpec, params: &PhysParams, cfg: &SchemeConfig, plan: &BoundaryPlan) -> Result<Self, SchemeError> {
        params.validate()?;
        plan.validate(g).map_err(SchemeError::Mesh)?;
        if !(cfg.dt > 0.0) || !(cfg.newton_tol > 0.0) || !(cfg.c_floor > 0.0 && cfg.c_floor < 1.0) {
            return Err(SchemeError::InvalidState("dt, newton_tol must be positive and 0 < c_floor << 1".into()));
        }
        let lay = Layout::new(g);
        // pattern pass on a benign uniform state
        let probe = State::uniform(g, params, 0.0, 0.0, 0.0, 0.0);
        let ctx = FullCtx::new(g, params, cfg, plan, &probe)?;
        let mut pattern = PatternSink { pairs: Vec::new() };
        let mut res = vec![0.0; lay.n];
        let x0 = {
            let mut v = vec![0.0; lay.n];
            lay.pack(&probe, &mut v);
            v
        };
        assembly::assemble(&ctx, &x0, &mut res, &mut pattern)?;
        let sys = SparseSystem::from_pattern(lay.n, &pattern.pairs)?;
        Ok(Self { g: *g, params: *params, cfg: *cfg, plan: plan.clone(), lay, sys, history: None })
    }

    pub fn unknowns(&self) -> usize {
        self.lay.n
    }

    /// Advance one time level. The old state is not modified.
    pub fn step(&mut self, old: &State) -> Result<(State, StepReport), SchemeError> {
        let start = std::time::Instant::now();
        let ctx = FullCtx::new(&self.g, &self.params, &self.cfg, &self.plan, old)?;
        let mut x = vec![0.0; self.lay.n];
        self.lay.pack(old, &mut x);

        // linear extrapolation predictor when the history matches `old`,
        // damped by the positivity fraction-to-boundary rule
        if let Some(((t_prev, x_prev), (t_last, x_last))) = &self.history {
            let tol = 1e-12 * (1.0 + old.t.abs());
            if (old.t - t_last).abs() < tol && t_last > t_prev {
                let mut alpha: f64 = (self.cfg.dt / (t_last - t_prev)).min(1.0);
                let floor = self.cfg.c_floor - 1.0;
                for s in 0..3 {
                    let off = self.lay.off_c[s];
                    for k in 0..self.lay.nc {
                        let dx = x_last[off + k] - x_prev[off + k];
                        if dx < 0.0 {
                            let room = x_last[off + k] - floor;
                            alpha = alpha.min(0.9 * room / (-dx));
                        }
                    }
                }
                if alpha > 0.0 {
                    for k in 0..self.lay.n {
                        x[k] = x_last[k] + alpha * (x_last[k] - x_prev[k]);
                    }
                }
            }
        }

        let solves0 = self.sys.solves;
        let facts0 = self.sys.factorizations;
        let stats = {
            let mut problem = FullProblem {
                ctx: &ctx,
                sys: &mut self.sys,
                dense: None,
                jac_mode: self.cfg.jac_mode,
                c_floor: self.cfg.c_floor,
            };
            let opts = NewtonOptions {
                tol: self.cfg.newton_tol,
                max_iters: self.cfg.newton_max,
                ..Default::default()
            };
            newton_solve(&mut problem, &mut x, &opts)?
        };

        let new = self.lay.unpack(&x, &self.g, old.t + self.cfg.dt);
        new.validate(&self.g, &self.plan, &self.cfg)?;
        let mut x_old = vec![0.0; self.lay.n];
        self.lay.pack(old, &mut x_old);
        self.history = Some(((old.t, x_old), (new.t, x.clone())));
        let report = StepReport {
            newton_iters: stats.iterations,
            residual: stats.residual,
            linear_iters: self.sys.solves - solves0,
            factorizations: self.sys.factorizations - facts0,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        Ok((new, report))
    }

    /// Drop the cached factorization (forces a refresh on the next step).
    pub fn invalidate_jacobian(&mut self) {
        self.sys.invalidate();
    }
}

/// One-shot step; builds and discards the solver caches.
pub fn step(
    old: &State,
    params: &PhysParams,
    cfg: &SchemeConfig,
    g: &GridSpec,
    plan: &BoundaryPlan,
) -> Result<(State, StepReport), SchemeError> {
    Stepper::new(g, params, cfg, plan)?.step(old)
}

/// Concatenated residual of the scheme at `guess` given the previous level.
pub fn residual(
    old: &State,
    guess: &State,
    params: &PhysParams,
    cfg: &SchemeConfig,
    g: &GridSpec,
    plan: &BoundaryPlan,
) -> Result<Vec<f64>, SchemeError> {
    let ctx = FullCtx::new(g, params, cfg, plan, old)?;
    let lay = Layout::new(g);
    let mut x = vec![0.0; lay.n];
    lay.pack(guess, &mut x);
    let mut res = vec![0.0; lay.n];
    assembly::assemble(&ctx, &x, &mut res, &mut NoJac)?;
    Ok(res)
}

/// Jacobian-vector product of the analytic linearization at `guess`, for
/// verification against finite differences.
pub fn jacobian_vector_product(
    old: &State,
    guess: &State,
    dir: &[f64],
    params: &PhysParams,
    cfg: &SchemeConfig,
    g: &GridSpec,
    plan: &BoundaryPlan,
) -> Result<Vec<f64>, SchemeError> {
    let ctx = FullCtx::new(g, params, cfg, plan, old)?;
    let lay = Layout::new(g);
    let mut x = vec![0.0; lay.n];
    lay.pack(guess, &mut x);
    let mut res = vec![0.0; lay.n];

    struct Jvp<'a> {
        dir: &'a [f64],
        out: Vec<f64>,
    }
    impl linear::JacSink for Jvp<'_> {
        const ACTIVE: bool = true;
        #[inline]
        fn emit(&mut self, row: usize, col: usize, val: f64) {
            self.out[row] += val * self.dir[col];
        }
    }
    let mut sink = Jvp { dir, out: vec![0.0; lay.n] };
    assembly::assemble(&ctx, &x, &mut res, &mut sink)?;
    Ok(sink.out)
}

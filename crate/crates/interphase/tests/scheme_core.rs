//! Core correctness checks for the implicit step: analytic Jacobian against
//! central finite differences, fixed points, and the homogeneous-reaction
//! oracle.

use interphase::mesh::bc::{BoundaryPlan, Profile, Side, SideCondition};
use interphase::mesh::{AxisBc, FaceField, GridSpec, ScalarField};
use interphase::physics::{PhysParams, QMode};
use interphase::scheme::{self, SchemeConfig, State, Stepper};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_scalar(g: &GridSpec, rng: &mut impl Rng, lo: f64, hi: f64) -> ScalarField {
    let mut s = ScalarField::zeros(g);
    for v in s.data.iter_mut() {
        *v = rng.gen_range(lo..hi);
    }
    s
}

fn random_state(g: &GridSpec, rng: &mut impl Rng) -> State {
    let mut u = FaceField::zeros(g);
    for v in u.fx.iter_mut().chain(u.fy.iter_mut()) {
        *v = rng.gen_range(-0.3..0.3);
    }
    u.sync_wrap(g);
    State {
        t: 0.0,
        u,
        p: random_scalar(g, rng, -0.5, 0.5),
        phi: random_scalar(g, rng, -1.1, 1.1),
        c1: random_scalar(g, rng, -0.3, 1.5),
        c2: random_scalar(g, rng, -0.3, 1.5),
        c3: random_scalar(g, rng, -0.3, 1.5),
        mu_phi: random_scalar(g, rng, -1.0, 1.0),
        mu1: random_scalar(g, rng, -1.0, 1.0),
        mu2: random_scalar(g, rng, -1.0, 1.0),
        mu3: random_scalar(g, rng, -1.0, 1.0),
    }
}

fn vessel_plan(g: &GridSpec) -> BoundaryPlan {
    let mut plan = BoundaryPlan::closed(g);
    plan.velocity[Side::Left as usize] = SideCondition::Dirichlet(Profile::Parabolic {
        lo: 0.3,
        hi: 0.7,
        scale: 25.0,
    });
    plan.velocity[Side::Right as usize] = SideCondition::PressureOutlet(0.0);
    plan.c[0][Side::Left as usize] = SideCondition::Dirichlet(Profile::Segment {
        lo: 0.3,
        hi: 0.7,
        value: 2.0,
    });
    plan
}

/// Directional derivative of the residual versus the analytic
/// Jacobian-vector product, over several boundary plans and both q laws.
#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cases: Vec<(GridSpec, BoundaryPlan, QMode)> = vec![
        {
            let g = GridSpec::new(6, 6, 1.0, 1.0, AxisBc::Periodic, AxisBc::Wall).unwrap();
            (g, BoundaryPlan::closed(&g), QMode::Constant(1.0))
        },
        {
            let g = GridSpec::new(6, 5, 1.0, 1.0, AxisBc::Wall, AxisBc::Wall).unwrap();
            (g, BoundaryPlan::closed(&g), QMode::OnePlusTwoC3)
        },
        {
            let g = GridSpec::new(6, 6, 1.0, 1.0, AxisBc::Periodic, AxisBc::Periodic).unwrap();
            (g, BoundaryPlan::closed(&g), QMode::Constant(0.5))
        },
        {
            let g = GridSpec::new(7, 6, 1.0, 1.0, AxisBc::Wall, AxisBc::Wall).unwrap();
            let plan = vessel_plan(&g);
            (g, plan, QMode::OnePlusTwoC3)
        },
    ];

    for (g, plan, q_mode) in cases {
        let params = PhysParams { q_mode, lambda0: 0.05, ..Default::default() };
        let cfg = SchemeConfig { dt: 1e-2, ..Default::default() };
        let old = random_state(&g, &mut rng);
        let guess = random_state(&g, &mut rng);

        let r0 = scheme::residual(&old, &guess, &params, &cfg, &g, &plan).unwrap();
        let n = r0.len();

        // random direction, exercised through the packed layout by probing
        // state fields via finite differences of the residual
        let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let jvp = scheme::jacobian_vector_product(&old, &guess, &dir, &params, &cfg, &g, &plan).unwrap();

        // finite differences in packed coordinates: perturb the guess state
        // through the same pack order used by residual(); replicate by
        // perturbing every field component via the public State fields.
        let h = 1e-7;
        let apply = |s: &State, sign: f64| -> State {
            let mut out = s.clone();
            let mut k = 0usize;
            let mut eat = |v: &mut f64| {
                *v += sign * h * dir[k];
                k += 1;
            };
            let per_x = g.bc_x == AxisBc::Periodic;
            let per_y = g.bc_y == AxisBc::Periodic;
            let nux = if per_x { g.nx } else { g.nx + 1 };
            let nuy = if per_y { g.ny } else { g.ny + 1 };
            for j in 0..g.ny {
                for i in 0..nux {
                    eat(out.u.x_at_mut(i, j));
                }
            }
            for j in 0..nuy {
                for i in 0..g.nx {
                    eat(out.u.y_at_mut(i, j));
                }
            }
            out.u.sync_wrap(&g);
            for f in [
                &mut out.p,
                &mut out.phi,
                &mut out.mu_phi,
                &mut out.c1,
                &mut out.mu1,
                &mut out.c2,
                &mut out.mu2,
                &mut out.c3,
                &mut out.mu3,
            ] {
                for v in f.data.iter_mut() {
                    eat(v);
                }
            }
            assert_eq!(k, n);
            out
        };
        let rp = scheme::residual(&old, &apply(&guess, 1.0), &params, &cfg, &g, &plan).unwrap();
        let rm = scheme::residual(&old, &apply(&guess, -1.0), &params, &cfg, &g, &plan).unwrap();

        // the mean-pressure gauge row carries a deliberate single-pin
        // Jacobian approximation; exempt it (closed plans only)
        let gauge_row = if plan.is_closed() {
            let nux = if g.bc_x == AxisBc::Periodic { g.nx } else { g.nx + 1 } * g.ny;
            let nuy = g.nx * if g.bc_y == AxisBc::Periodic { g.ny } else { g.ny + 1 };
            Some(nux + nuy)
        } else {
            None
        };
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for k in 0..n {
            if Some(k) == gauge_row {
                continue;
            }
            let fd = (rp[k] - rm[k]) / (2.0 * h);
            worst = worst.max((fd - jvp[k]).abs());
            scale = scale.max(jvp[k].abs());
        }
        assert!(
            worst <= 1e-5 * scale.max(1.0),
            "plan {:?}: |J v - fd| = {worst:e} vs scale {scale:e}",
            plan.velocity
        );
    }
}

/// The uniform state (u = 0, phi = 1, uniform concentrations) is a fixed
/// point of the step to machine-level accuracy.
#[test]
fn uniform_steady_state_is_fixed_point() {
    let g = GridSpec::new(8, 8, 1.0, 1.0, AxisBc::Periodic, AxisBc::Wall).unwrap();
    let params = PhysParams::default();
    let cfg = SchemeConfig { dt: 1e-2, ..Default::default() };
    let plan = BoundaryPlan::closed(&g);
    let old = State::uniform(&g, &params, 1.0, 0.4, 0.25, 0.1);
    let mut stepper = Stepper::new(&g, &params, &cfg, &plan).unwrap();
    let (new, report) = stepper.step(&old).unwrap();
    assert!(report.residual <= cfg.newton_tol);
    let du = new
        .u
        .fx
        .iter()
        .zip(old.u.fx.iter())
        .chain(new.u.fy.iter().zip(old.u.fy.iter()))
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    assert!(du <= 1e-12, "velocity moved by {du:e}");
    for (f_new, f_old) in [
        (&new.phi, &old.phi),
        (&new.c1, &old.c1),
        (&new.c2, &old.c2),
        (&new.c3, &old.c3),
        (&new.mu_phi, &old.mu_phi),
        (&new.mu1, &old.mu1),
        (&new.mu2, &old.mu2),
        (&new.mu3, &old.mu3),
    ] {
        let d = f_new
            .data
            .iter()
            .zip(f_old.data.iter())
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(d <= 1e-12, "field moved by {d:e}");
    }
}

/// Spatially uniform data on a closed grid stays uniform and follows the
/// scalar backward-Euler reaction recurrence; compare against a high-order
/// explicit integration of the homogeneous ODE at tiny steps.
#[test]
fn homogeneous_reaction_matches_ode_oracle() {
    let g = GridSpec::new(6, 6, 1.0, 1.0, AxisBc::Wall, AxisBc::Wall).unwrap();
    // gentle configuration: interface factor P((0.9)^2-1)^2 keeps the
    // reaction slow enough that backward Euler at dt=1e-3 tracks the ODE
    // within 1e-6 over 100 steps
    let params = PhysParams { lambda0: 0.05, ..Default::default() };
    let cfg = SchemeConfig { dt: 1e-3, ..Default::default() };
    let plan = BoundaryPlan::closed(&g);
    let phi0 = 0.9;
    let (c10, c20, c30) = (0.5, 0.5, 0.1);
    let mut state = State::uniform(&g, &params, phi0, c10, c20, c30);
    let mut stepper = Stepper::new(&g, &params, &cfg, &plan).unwrap();

    // homogeneous reduction: c1' = -a1 P0 A, c2' = -a2 P0 A, c3' = +a3 P0 A
    // with A = a1 ln(c1+1) + a2 (ln(c2+1)+K) - a3 (lam0 F(phi0) + ln(c3+1) + K)
    let p0 = {
        let q = phi0 * phi0 - 1.0;
        params.k_rate * q * q
    };
    let k_pen = params.m_pen * phi0 * phi0 - 0.25 * params.n_adh * (phi0 * phi0 - 1.0).powi(2);
    let f0 = 0.25 * (phi0 * phi0 - 1.0).powi(2);
    let rhs = |c: [f64; 3]| -> [f64; 3] {
        let aff = params.a1 * (c[0] + 1.0).ln() + params.a2 * ((c[1] + 1.0).ln() + k_pen)
            - params.a3 * (params.lambda0 * f0 + (c[2] + 1.0).ln() + k_pen);
        [-params.a1 * p0 * aff, -params.a2 * p0 * aff, params.a3 * p0 * aff]
    };
    // classic RK4 at 1e-6 substeps
    let mut oracle = [c10, c20, c30];
    let sub = 1000usize;
    let hdt = cfg.dt / sub as f64;
    let rk4 = |c: [f64; 3]| -> [f64; 3] {
        let k1 = rhs(c);
        let add = |a: [f64; 3], b: [f64; 3], w: f64| [a[0] + w * b[0], a[1] + w * b[1], a[2] + w * b[2]];
        let k2 = rhs(add(c, k1, 0.5 * hdt));
        let k3 = rhs(add(c, k2, 0.5 * hdt));
        let k4 = rhs(add(c, k3, hdt));
        [
            c[0] + hdt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            c[1] + hdt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            c[2] + hdt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        ]
    };

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (next, _) = stepper.step(&state).unwrap();
        for _ in 0..sub {
            oracle = rk4(oracle);
        }
        state = next;
        // fields must stay spatially uniform
        for f in [&state.c1, &state.c2, &state.c3, &state.phi] {
            let spread = f.max() - f.min();
            assert!(spread < 1e-9, "field lost uniformity: spread {spread:e}");
        }
        worst = worst
            .max((state.c1.data[0] - oracle[0]).abs())
            .max((state.c2.data[0] - oracle[1]).abs())
            .max((state.c3.data[0] - oracle[2]).abs());
    }
    assert!(worst <= 1e-6, "max deviation from the ODE oracle: {worst:e}");
    // phi must not have moved at all (uniform, zero-flux)
    assert!((state.phi.data[0] - phi0).abs() < 1e-9);
}

/// Residual at the previous level equals the steady-state operator once the
/// time terms are removed: with dt -> infinity the residual at guess = old is
/// the spatial operator applied to old.
#[test]
fn residual_at_old_guess_is_steady_operator() {
    let g = GridSpec::new(6, 6, 1.0, 1.0, AxisBc::Periodic, AxisBc::Wall).unwrap();
    let params = PhysParams::default();
    let plan = BoundaryPlan::closed(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let old = random_state(&g, &mut rng);

    let big = SchemeConfig { dt: 1e30, ..Default::default() };
    let small = SchemeConfig { dt: 1e-3, ..Default::default() };
    let r_big = scheme::residual(&old, &old, &params, &big, &g, &plan).unwrap();
    let r_small = scheme::residual(&old, &old, &params, &small, &g, &plan).unwrap();
    // time terms vanish at guess = old for both; the two residuals agree
    let mut worst = 0.0f64;
    for (a, b) in r_big.iter().zip(r_small.iter()) {
        worst = worst.max((a - b).abs());
    }
    assert!(worst < 1e-9, "time terms leaked into the steady residual: {worst:e}");
}

use interphase::mesh::bc::BoundaryPlan;
use interphase::mesh::{self, AxisBc, GridSpec, ScalarField};
use interphase::physics::PhysParams;
use interphase::scheme::{SchemeConfig, State, Stepper};
use std::time::Instant;

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    let dt: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let steps: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(10);
    let g = GridSpec::new(n, n, 1.0, 1.0, AxisBc::Periodic, AxisBc::Wall).unwrap();
    let params = PhysParams { lambda0: 0.05, ..Default::default() };
    let cfg = SchemeConfig { dt, ..Default::default() };
    let plan = BoundaryPlan::closed(&g);

    let eps = params.eps;
    let phi = ScalarField::from_fn(&g, |x, y| {
        let r = ((x - 0.5f64).powi(2) + (y - 0.5f64).powi(2)).sqrt();
        ((0.20 - r) / (2f64.sqrt() * eps)).tanh()
    });
    let mut state = State::uniform(&g, &params, 0.0, 2.0, 2.0, 0.2);
    state.phi = phi;
    state.refresh_potentials(&g, &params).unwrap();

    let t0 = Instant::now();
    let mut stepper = Stepper::new(&g, &params, &cfg, &plan).unwrap();
    println!("setup (pattern + symbolic): {:?}, n = {}", t0.elapsed(), stepper.unknowns());

    let m0 = mesh::integral(&state.c1, &g).unwrap() + mesh::integral(&state.c2, &g).unwrap() + mesh::integral(&state.c3, &g).unwrap();
    for k in 0..steps {
        let t = Instant::now();
        let (new, rep) = stepper.step(&state).unwrap();
        state = new;
        let m = mesh::integral(&state.c1, &g).unwrap() + mesh::integral(&state.c2, &g).unwrap() + mesh::integral(&state.c3, &g).unwrap();
        println!(
            "step {k}: {:?} newton={} facts={} solves={} res={:.2e} mass_drift={:.2e}",
            t.elapsed(),
            rep.newton_iters,
            rep.factorizations,
            rep.linear_iters,
            rep.residual,
            ((m - m0) / m0).abs()
        );
    }
}

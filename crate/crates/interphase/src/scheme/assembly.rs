//! Residual and Jacobian assembly for the monolithic implicit step.
//!
//! One code path serves three passes (pattern, values, residual-only) through
//! the [`JacSink`] parameter; the emission sequence depends only on grid and
//! boundary plan, never on the unknown values, so the sparsity pattern can be
//! frozen once per scenario.
//!
//! Sign convention: every equation is written as residual(x) = 0 with the
//! time-derivative term positive, e.g.
//!   Re ((u - u^n)/dt + adv) - lap u + grad p + forcing = 0.

use crate::mesh::bc::{BoundaryPlan, Side, SideCondition};
use crate::mesh::{self, AxisBc, GridSpec, ScalarField};
use crate::physics::{self, PhysParams};
use crate::scheme::layout::Layout;
use crate::scheme::linear::JacSink;
use crate::scheme::{SchemeConfig, SchemeError, State};

/// One ghost-resolved unknown reference: value = coef * x[idx] + aff.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Lin {
    pub idx: usize,
    pub coef: f64,
    pub aff: f64,
}

impl Lin {
    #[inline]
    fn val(&self, x: &[f64]) -> f64 {
        self.coef * x[self.idx] + self.aff
    }
}

/// Scalar unknown blocks addressed by the ghost resolver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ScalBlock {
    Phi,
    MuPhi,
    C(usize),
    Mu(usize),
}

/// Frozen old-level data plus geometry for one time step.
pub(crate) struct FullCtx<'a> {
    pub g: &'a GridSpec,
    pub p: &'a PhysParams,
    pub cfg: &'a SchemeConfig,
    pub plan: &'a BoundaryPlan,
    pub lay: Layout,
    pub old: &'a State,
    // cellwise old-level coefficients
    pub lam_old: ScalarField,
    pub d1_old: ScalarField,
    pub prolif_old: ScalarField,
    pub fprime_old: ScalarField,
    pub adh_old: ScalarField,
    // old phi averaged to faces (advective flux and capillary forcing weights)
    pub phibar: mesh::FaceField,
    // lambda^n averaged to faces
    pub lamf: mesh::FaceField,
}

impl<'a> FullCtx<'a> {
    pub fn new(
        g: &'a GridSpec,
        p: &'a PhysParams,
        cfg: &'a SchemeConfig,
        plan: &'a BoundaryPlan,
        old: &'a State,
    ) -> Result<Self, SchemeError> {
        let lay = Layout::new(g);
        let mut lam_old = ScalarField::zeros(g);
        let mut d1_old = ScalarField::zeros(g);
        let mut prolif_old = ScalarField::zeros(g);
        let mut fprime_old = ScalarField::zeros(g);
        let mut adh_old = ScalarField::zeros(g);
        for k in 0..g.ncells() {
            let phi = old.phi.data[k];
            let c3 = old.c3.data[k];
            lam_old.data[k] = p.lambda_of(c3);
            let q = p.q_of(c3);
            d1_old.data[k] = physics::d1_of(phi, q, p)?;
            prolif_old.data[k] = physics::proliferation(phi, p.k_rate);
            fprime_old.data[k] = physics::f_trunc(phi, p.trunc_radius).d1;
            adh_old.data[k] = p.n_adh * (old.c2.data[k] + 1.0) + p.n_adh * (old.c3.data[k] + 1.0);
        }
        let phibar = mesh::avg_c2f(&old.phi, g)?;
        let lamf = mesh::avg_c2f(&lam_old, g)?;
        Ok(Self { g, p, cfg, plan, lay, old, lam_old, d1_old, prolif_old, fprime_old, adh_old, phibar, lamf })
    }

    #[inline]
    fn side_cond_scal(&self, blk: ScalBlock, side: Side) -> &SideCondition {
        match blk {
            ScalBlock::Phi | ScalBlock::MuPhi => &self.plan.phi[side as usize],
            ScalBlock::C(s) | ScalBlock::Mu(s) => &self.plan.c[s][side as usize],
        }
    }

    #[inline]
    fn blk_off(&self, blk: ScalBlock) -> usize {
        match blk {
            ScalBlock::Phi => self.lay.off_phi,
            ScalBlock::MuPhi => self.lay.off_muphi,
            ScalBlock::C(s) => self.lay.off_c[s],
            ScalBlock::Mu(s) => self.lay.off_mu[s],
        }
    }

    /// Resolve a cell-scalar reference, folding one layer of ghosts onto the
    /// adjacent interior unknown. Dirichlet segments resolve to
    /// ghost = 2 v - interior; mu fields always mirror (their Dirichlet faces
    /// are handled by explicit flux overrides in the transport rows).
    pub(crate) fn scal(&self, blk: ScalBlock, i: isize, j: isize) -> Lin {
        let nx = self.g.nx as isize;
        let ny = self.g.ny as isize;
        let off = self.blk_off(blk);
        let (mut ii, mut jj) = (i, j);
        let mut coef = 1.0;
        let mut aff = 0.0;
        if ii < 0 || ii >= nx {
            match self.g.bc_x {
                AxisBc::Periodic => ii = ii.rem_euclid(nx),
                AxisBc::Wall => {
                    let side = if ii < 0 { Side::Left } else { Side::Right };
                    let t = (j as f64 + 0.5) * self.g.hy();
                    let inner = if ii < 0 { 0 } else { nx - 1 };
                    match self.dirichlet_value(blk, side, t) {
                        Some(v) => {
                            ii = inner;
                            coef = -1.0;
                            aff = 2.0 * v;
                        }
                        None => ii = inner, // mirror
                    }
                }
            }
        }
        if jj < 0 || jj >= ny {
            match self.g.bc_y {
                AxisBc::Periodic => jj = jj.rem_euclid(ny),
                AxisBc::Wall => {
                    let side = if jj < 0 { Side::Bottom } else { Side::Top };
                    let t = (i as f64 + 0.5) * self.g.hx();
                    let inner = if jj < 0 { 0 } else { ny - 1 };
                    match self.dirichlet_value(blk, side, t) {
                        Some(v) => {
                            jj = inner;
                            coef = -coef;
                            aff = 2.0 * v - aff;
                        }
                        None => jj = inner,
                    }
                }
            }
        }
        Lin { idx: off + self.lay.cell(ii, jj), coef, aff }
    }

    /// Dirichlet face value for a scalar block on a wall side, if any.
    fn dirichlet_value(&self, blk: ScalBlock, side: Side, t: f64) -> Option<f64> {
        match blk {
            ScalBlock::Mu(_) | ScalBlock::MuPhi => None,
            ScalBlock::Phi | ScalBlock::C(_) => match self.side_cond_scal(blk, side) {
                SideCondition::Dirichlet(p) => p.eval(t),
                _ => None,
            },
        }
    }

    /// Velocity side condition helper.
    #[inline]
    fn vel_cond(&self, side: Side) -> &SideCondition {
        &self.plan.velocity[side as usize]
    }

    fn is_outflow(&self, side: Side) -> bool {
        matches!(self.vel_cond(side), SideCondition::PressureOutlet(_))
    }

    /// New-level x-velocity unknown with ghosts resolved.
    pub(crate) fn ux(&self, i: isize, j: isize) -> Lin {
        let nx = self.g.nx as isize;
        let ny = self.g.ny as isize;
        let (mut ii, mut jj) = (i, j);
        let mut coef = 1.0;
        let aff = 0.0;
        // normal direction (x): ghosts occur only past an outflow side
        if self.g.bc_x == AxisBc::Wall {
            if ii < 0 {
                debug_assert!(self.is_outflow(Side::Left));
                ii = 0; // zero-gradient
            } else if ii > nx {
                debug_assert!(self.is_outflow(Side::Right));
                ii = nx;
            }
        }
        // tangential direction (y)
        if self.g.bc_y == AxisBc::Wall {
            if jj < 0 {
                jj = 0;
                if !self.is_outflow(Side::Bottom) {
                    coef = -coef; // reflect about the stationary wall
                }
            } else if jj >= ny {
                jj = ny - 1;
                if !self.is_outflow(Side::Top) {
                    coef = -coef;
                }
            }
        }
        Lin { idx: self.lay.ux(ii, jj), coef, aff }
    }

    pub(crate) fn uy(&self, i: isize, j: isize) -> Lin {
        let nx = self.g.nx as isize;
        let ny = self.g.ny as isize;
        let (mut ii, mut jj) = (i, j);
        let mut coef = 1.0;
        let aff = 0.0;
        if self.g.bc_y == AxisBc::Wall {
            if jj < 0 {
                debug_assert!(self.is_outflow(Side::Bottom));
                jj = 0;
            } else if jj > ny {
                debug_assert!(self.is_outflow(Side::Top));
                jj = ny;
            }
        }
        if self.g.bc_x == AxisBc::Wall {
            if ii < 0 {
                ii = 0;
                if !self.is_outflow(Side::Left) {
                    coef = -coef;
                }
            } else if ii >= nx {
                ii = nx - 1;
                if !self.is_outflow(Side::Right) {
                    coef = -coef;
                }
            }
        }
        Lin { idx: self.lay.uy(ii, jj), coef, aff }
    }

    /// Old-level x-velocity with the same ghost closures, as a number.
    fn uox(&self, i: isize, j: isize) -> f64 {
        let nx = self.g.nx as isize;
        let ny = self.g.ny as isize;
        let (mut ii, mut jj) = (i, j);
        let mut sign = 1.0;
        match self.g.bc_x {
            AxisBc::Periodic => ii = ii.rem_euclid(nx),
            AxisBc::Wall => {
                if ii < 0 {
                    ii = 0;
                } else if ii > nx {
                    ii = nx;
                }
            }
        }
        match self.g.bc_y {
            AxisBc::Periodic => jj = jj.rem_euclid(ny),
            AxisBc::Wall => {
                if jj < 0 {
                    jj = 0;
                    if !self.is_outflow(Side::Bottom) {
                        sign = -sign;
                    }
                } else if jj >= ny {
                    jj = ny - 1;
                    if !self.is_outflow(Side::Top) {
                        sign = -sign;
                    }
                }
            }
        }
        sign * self.old.u.x_at(ii as usize, jj as usize)
    }

    fn uoy(&self, i: isize, j: isize) -> f64 {
        let nx = self.g.nx as isize;
        let ny = self.g.ny as isize;
        let (mut ii, mut jj) = (i, j);
        let mut sign = 1.0;
        match self.g.bc_y {
            AxisBc::Periodic => jj = jj.rem_euclid(ny),
            AxisBc::Wall => {
                if jj < 0 {
                    jj = 0;
                } else if jj > ny {
                    jj = ny;
                }
            }
        }
        match self.g.bc_x {
            AxisBc::Periodic => ii = ii.rem_euclid(nx),
            AxisBc::Wall => {
                if ii < 0 {
                    ii = 0;
                    if !self.is_outflow(Side::Left) {
                        sign = -sign;
                    }
                } else if ii >= nx {
                    ii = nx - 1;
                    if !self.is_outflow(Side::Right) {
                        sign = -sign;
                    }
                }
            }
        }
        sign * self.old.u.y_at(ii as usize, jj as usize)
    }

    /// True when the mean-pressure gauge row is active (no pressure outlet
    /// pins the level instead).
    pub fn gauge_active(&self) -> bool {
        !crate::mesh::bc::SIDES.iter().any(|&s| self.is_outflow(s))
    }
}

/// Assemble the full residual (and optionally Jacobian entries) at guess x.
pub(crate) fn assemble<Jc: JacSink>(ctx: &FullCtx, x: &[f64], res: &mut [f64], jac: &mut Jc) -> Result<(), SchemeError> {
    let g = ctx.g;
    let lay = &ctx.lay;
    let p = ctx.p;
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    let dt = ctx.cfg.dt;
    let e2 = p.eps * p.eps;

    debug_assert_eq!(x.len(), lay.n);
    debug_assert_eq!(res.len(), lay.n);
    res.fill(0.0);

    // ---- guard the log domain before touching any ln() ----
    for s in 0..3 {
        let off = lay.off_c[s];
        for k in 0..lay.nc {
            let arg = x[off + k] + 1.0;
            if arg <= 0.0 {
                return Err(SchemeError::Physics(physics::PhysicsError::LogDomain(arg)));
            }
        }
    }

    // ================= x-momentum rows =================
    for j in 0..ny {
        for i in 0..lay.nux_cols {
            let r = lay.ux(i as isize, j as isize);
            // boundary-normal Dirichlet faces on wall axes
            if g.bc_x == AxisBc::Wall && (i == 0 || i == nx) {
                let side = if i == 0 { Side::Left } else { Side::Right };
                match ctx.vel_cond(side) {
                    SideCondition::NoSlip | SideCondition::Dirichlet(_) => {
                        let value = match ctx.vel_cond(side) {
                            SideCondition::Dirichlet(prof) => prof.eval((j as f64 + 0.5) * hy).unwrap_or(0.0),
                            _ => 0.0,
                        };
                        res[r] = x[r] - value;
                        jac.emit(r, r, 1.0);
                        continue;
                    }
                    SideCondition::PressureOutlet(_) => {} // falls through to a momentum row
                    _ => unreachable!("validated plan"),
                }
            }
            momentum_row_x(ctx, x, res, jac, r, i as isize, j as isize);
        }
    }

    // ================= y-momentum rows =================
    for j in 0..lay.nuy_rows {
        for i in 0..nx {
            let r = lay.uy(i as isize, j as isize);
            if g.bc_y == AxisBc::Wall && (j == 0 || j == ny) {
                let side = if j == 0 { Side::Bottom } else { Side::Top };
                match ctx.vel_cond(side) {
                    SideCondition::NoSlip | SideCondition::Dirichlet(_) => {
                        let value = match ctx.vel_cond(side) {
                            SideCondition::Dirichlet(prof) => prof.eval((i as f64 + 0.5) * hx).unwrap_or(0.0),
                            _ => 0.0,
                        };
                        res[r] = x[r] - value;
                        jac.emit(r, r, 1.0);
                        continue;
                    }
                    SideCondition::PressureOutlet(_) => {}
                    _ => unreachable!("validated plan"),
                }
            }
            momentum_row_y(ctx, x, res, jac, r, i as isize, j as isize);
        }
    }

    // ================= continuity / gauge rows =================
    let gauge = ctx.gauge_active();
    for j in 0..ny {
        for i in 0..nx {
            let r = lay.off_p + lay.cell(i as isize, j as isize);
            if gauge && i == 0 && j == 0 {
                // mean-pressure gauge; Jacobian approximated by a single pin
                let mut mean = 0.0;
                for k in 0..lay.nc {
                    mean += x[lay.off_p + k];
                }
                res[r] = mean / lay.nc as f64;
                jac.emit(r, lay.off_p, 1.0);
                continue;
            }
            let ul = lay.ux(i as isize, j as isize);
            let ur = lay.ux(i as isize + 1, j as isize);
            let vb = lay.uy(i as isize, j as isize);
            let vt = lay.uy(i as isize, j as isize + 1);
            res[r] = (x[ur] - x[ul]) / hx + (x[vt] - x[vb]) / hy;
            jac.emit(r, ur, 1.0 / hx);
            jac.emit(r, ul, -1.0 / hx);
            jac.emit(r, vt, 1.0 / hy);
            jac.emit(r, vb, -1.0 / hy);
        }
    }

    // ================= phase transport rows =================
    let mob = p.mobility;
    for j in 0..ny {
        for i in 0..nx {
            let (ii, jj) = (i as isize, j as isize);
            let c = lay.cell(ii, jj);
            let r = lay.off_phi + c;
            let phic = lay.off_phi + c;
            res[r] += (x[phic] - ctx.old.phi.data[c]) / dt;
            jac.emit(r, phic, 1.0 / dt);

            // div(u phi^n): four face fluxes with frozen phi^n face averages
            let faces = [
                (lay.ux(ii + 1, jj), ctx.phibar.x_canon(g, i + 1, j), 1.0 / hx),
                (lay.ux(ii, jj), ctx.phibar.x_at(i, j), -1.0 / hx),
                (lay.uy(ii, jj + 1), ctx.phibar.y_canon(g, i, j + 1), 1.0 / hy),
                (lay.uy(ii, jj), ctx.phibar.y_at(i, j), -1.0 / hy),
            ];
            for (uf, pb, w) in faces {
                res[r] += w * x[uf] * pb;
                jac.emit(r, uf, w * pb);
            }

            // - M lap(mu_phi)
            let muc = lay.off_muphi + c;
            for (di, dj, h2) in [(1isize, 0isize, hx * hx), (-1, 0, hx * hx), (0, 1, hy * hy), (0, -1, hy * hy)] {
                let nb = ctx.scal(ScalBlock::MuPhi, ii + di, jj + dj);
                res[r] -= mob * (nb.val(x) - x[muc]) / h2;
                jac.emit(r, nb.idx, -mob * nb.coef / h2);
                jac.emit(r, muc, mob / h2);
            }
        }
    }

    // ================= mu_phi definition rows =================
    for j in 0..ny {
        for i in 0..nx {
            let (ii, jj) = (i as isize, j as isize);
            let c = lay.cell(ii, jj);
            let r = lay.off_muphi + c;
            let phic = lay.off_phi + c;
            res[r] += x[r];
            jac.emit(r, r, 1.0);

            // + eps^2 div(lambda^n grad phi^{n+1})   (residual = mu - formula)
            let lamf_at = [
                (1isize, 0isize, ctx.lamf.x_canon(g, i + 1, j), hx * hx),
                (-1, 0, ctx.lamf.x_at(i, j), hx * hx),
                (0, 1, ctx.lamf.y_canon(g, i, j + 1), hy * hy),
                (0, -1, ctx.lamf.y_at(i, j), hy * hy),
            ];
            for (di, dj, lam, h2) in lamf_at {
                let nb = ctx.scal(ScalBlock::Phi, ii + di, jj + dj);
                res[r] += e2 * lam * (nb.val(x) - x[phic]) / h2;
                jac.emit(r, nb.idx, e2 * lam * nb.coef / h2);
                jac.emit(r, phic, -e2 * lam / h2);
            }

            let lam_c = ctx.lam_old.data[c];
            let phin = ctx.old.phi.data[c];
            let adh = ctx.adh_old.data[c];
            let c2c = lay.off_c[1] + c;
            let c3c = lay.off_c[2] + c;
            let pen = p.m_pen * (x[c2c] + 1.0) + p.m_pen * (x[c3c] + 1.0);

            // - lambda^n F'(phi^n)
            res[r] -= lam_c * ctx.fprime_old.data[c];
            // - lambda^n S (phi - phi^n)  and  - S (phi - phi^n) adh^n
            res[r] -= (lam_c * p.s_stab + p.s_stab * adh) * (x[phic] - phin);
            jac.emit(r, phic, -(lam_c * p.s_stab + p.s_stab * adh));
            // - 2 phi [M(c2+1) + M(c3+1)]
            res[r] -= 2.0 * x[phic] * pen;
            jac.emit(r, phic, -2.0 * pen);
            jac.emit(r, c2c, -2.0 * x[phic] * p.m_pen);
            jac.emit(r, c3c, -2.0 * x[phic] * p.m_pen);
            // + (phi^n^3 - phi^n) adh^n
            res[r] += (phin * phin * phin - phin) * adh;
        }
    }

    // ================= species transport + potential rows =================
    for s in 0..3 {
        species_rows(ctx, x, res, jac, s);
    }

    Ok(())
}

/// x-momentum residual row at face (i, j) (interior or pressure-outlet face).
fn momentum_row_x<Jc: JacSink>(ctx: &FullCtx, x: &[f64], res: &mut [f64], jac: &mut Jc, r: usize, i: isize, j: isize) {
    let g = ctx.g;
    let lay = &ctx.lay;
    let p = ctx.p;
    let (hx, hy) = (g.hx(), g.hy());
    let dt = ctx.cfg.dt;

    let uc = lay.ux(i, j);
    res[r] += p.re * (x[uc] - ctx.old.u.x_at(i as usize, j as usize)) / dt;
    jac.emit(r, uc, p.re / dt);

    // advection in flux form with the old velocity as advecting field:
    // d/dx (ubar^n ubar) + d/dy (vbar^n ubar)
    for (m, w) in [(i, p.re / hx), (i - 1, -p.re / hx)] {
        let adv_old = 0.5 * (ctx.uox(m, j) + ctx.uox(m + 1, j));
        let a = ctx.ux(m, j);
        let b = ctx.ux(m + 1, j);
        res[r] += w * adv_old * 0.5 * (a.val(x) + b.val(x));
        jac.emit(r, a.idx, w * adv_old * 0.5 * a.coef);
        jac.emit(r, b.idx, w * adv_old * 0.5 * b.coef);
    }
    for (jc, w) in [(j + 1, p.re / hy), (j, -p.re / hy)] {
        let adv_old = 0.5 * (ctx.uoy(i - 1, jc) + ctx.uoy(i, jc));
        let a = ctx.ux(i, jc - 1);
        let b = ctx.ux(i, jc);
        res[r] += w * adv_old * 0.5 * (a.val(x) + b.val(x));
        jac.emit(r, a.idx, w * adv_old * 0.5 * a.coef);
        jac.emit(r, b.idx, w * adv_old * 0.5 * b.coef);
    }

    // - lap(u)
    for (di, dj, h2) in [(1isize, 0isize, hx * hx), (-1, 0, hx * hx), (0, 1, hy * hy), (0, -1, hy * hy)] {
        let nb = ctx.ux(i + di, j + dj);
        res[r] -= (nb.val(x) - x[uc]) / h2;
        jac.emit(r, nb.idx, -nb.coef / h2);
        jac.emit(r, uc, 1.0 / h2);
    }

    // + dp/dx across the face (cells i-1 | i)
    let nx = g.nx as isize;
    if g.bc_x == AxisBc::Wall && i == 0 {
        // left outlet face: ghost pressure 2 p_out - p(0)
        let pout = match ctx.vel_cond(Side::Left) {
            SideCondition::PressureOutlet(v) => *v,
            _ => unreachable!(),
        };
        let pr = lay.off_p + lay.cell(0, j);
        res[r] += (2.0 * x[pr] - 2.0 * pout) / hx;
        jac.emit(r, pr, 2.0 / hx);
    } else if g.bc_x == AxisBc::Wall && i == nx {
        let pout = match ctx.vel_cond(Side::Right) {
            SideCondition::PressureOutlet(v) => *v,
            _ => unreachable!(),
        };
        let pl = lay.off_p + lay.cell(nx - 1, j);
        res[r] += (2.0 * pout - 2.0 * x[pl]) / hx;
        jac.emit(r, pl, -2.0 / hx);
    } else {
        let pl = lay.off_p + lay.cell(i - 1, j);
        let pr = lay.off_p + lay.cell(i, j);
        res[r] += (x[pr] - x[pl]) / hx;
        jac.emit(r, pr, 1.0 / hx);
        jac.emit(r, pl, -1.0 / hx);
    }

    // + phibar^n dmu_phi/dx + sum_s cbar_s dmu_s/dx
    let mu_l = ctx.scal(ScalBlock::MuPhi, i - 1, j);
    let mu_r = ctx.scal(ScalBlock::MuPhi, i, j);
    let pb = ctx.phibar.x_at(i as usize, j as usize);
    res[r] += pb * (mu_r.val(x) - mu_l.val(x)) / hx;
    jac.emit(r, mu_r.idx, pb * mu_r.coef / hx);
    jac.emit(r, mu_l.idx, -pb * mu_l.coef / hx);
    for s in 0..3 {
        let cl = ctx.scal(ScalBlock::C(s), i - 1, j);
        let cr = ctx.scal(ScalBlock::C(s), i, j);
        let ml = ctx.scal(ScalBlock::Mu(s), i - 1, j);
        let mr = ctx.scal(ScalBlock::Mu(s), i, j);
        let cbar = 0.5 * (cl.val(x) + cr.val(x));
        let dmu = (mr.val(x) - ml.val(x)) / hx;
        res[r] += cbar * dmu;
        jac.emit(r, mr.idx, cbar * mr.coef / hx);
        jac.emit(r, ml.idx, -cbar * ml.coef / hx);
        jac.emit(r, cl.idx, 0.5 * cl.coef * dmu);
        jac.emit(r, cr.idx, 0.5 * cr.coef * dmu);
    }
}

/// y-momentum residual row at face (i, j); mirror of the x case.
fn momentum_row_y<Jc: JacSink>(ctx: &FullCtx, x: &[f64], res: &mut [f64], jac: &mut Jc, r: usize, i: isize, j: isize) {
    let g = ctx.g;
    let lay = &ctx.lay;
    let p = ctx.p;
    let (hx, hy) = (g.hx(), g.hy());
    let dt = ctx.cfg.dt;

    let vc = lay.uy(i, j);
    res[r] += p.re * (x[vc] - ctx.old.u.y_at(i as usize, j as usize)) / dt;
    jac.emit(r, vc, p.re / dt);

    for (m, w) in [(j, p.re / hy), (j - 1, -p.re / hy)] {
        let adv_old = 0.5 * (ctx.uoy(i, m) + ctx.uoy(i, m + 1));
        let a = ctx.uy(i, m);
        let b = ctx.uy(i, m + 1);
        res[r] += w * adv_old * 0.5 * (a.val(x) + b.val(x));
        jac.emit(r, a.idx, w * adv_old * 0.5 * a.coef);
        jac.emit(r, b.idx, w * adv_old * 0.5 * b.coef);
    }
    for (ic, w) in [(i + 1, p.re / hx), (i, -p.re / hx)] {
        let adv_old = 0.5 * (ctx.uox(ic, j - 1) + ctx.uox(ic, j));
        let a = ctx.uy(ic - 1, j);
        let b = ctx.uy(ic, j);
        res[r] += w * adv_old * 0.5 * (a.val(x) + b.val(x));
        jac.emit(r, a.idx, w * adv_old * 0.5 * a.coef);
        jac.emit(r, b.idx, w * adv_old * 0.5 * b.coef);
    }

    for (di, dj, h2) in [(1isize, 0isize, hx * hx), (-1, 0, hx * hx), (0, 1, hy * hy), (0, -1, hy * hy)] {
        let nb = ctx.uy(i + di, j + dj);
        res[r] -= (nb.val(x) - x[vc]) / h2;
        jac.emit(r, nb.idx, -nb.coef / h2);
        jac.emit(r, vc, 1.0 / h2);
    }

    let ny = g.ny as isize;
    if g.bc_y == AxisBc::Wall && j == 0 {
        let pout = match ctx.vel_cond(Side::Bottom) {
            SideCondition::PressureOutlet(v) => *v,
            _ => unreachable!(),
        };
        let pt = lay.off_p + lay.cell(i, 0);
        res[r] += (2.0 * x[pt] - 2.0 * pout) / hy;
        jac.emit(r, pt, 2.0 / hy);
    } else if g.bc_y == AxisBc::Wall && j == ny {
        let pout = match ctx.vel_cond(Side::Top) {
            SideCondition::PressureOutlet(v) => *v,
            _ => unreachable!(),
        };
        let pb = lay.off_p + lay.cell(i, ny - 1);
        res[r] += (2.0 * pout - 2.0 * x[pb]) / hy;
        jac.emit(r, pb, -2.0 / hy);
    } else {
        let pb = lay.off_p + lay.cell(i, j - 1);
        let pt = lay.off_p + lay.cell(i, j);
        res[r] += (x[pt] - x[pb]) / hy;
        jac.emit(r, pt, 1.0 / hy);
        jac.emit(r, pb, -1.0 / hy);
    }

    let mu_b = ctx.scal(ScalBlock::MuPhi, i, j - 1);
    let mu_t = ctx.scal(ScalBlock::MuPhi, i, j);
    let pb = ctx.phibar.y_at(i as usize, j as usize);
    res[r] += pb * (mu_t.val(x) - mu_b.val(x)) / hy;
    jac.emit(r, mu_t.idx, pb * mu_t.coef / hy);
    jac.emit(r, mu_b.idx, -pb * mu_b.coef / hy);
    for s in 0..3 {
        let cb = ctx.scal(ScalBlock::C(s), i, j - 1);
        let ct = ctx.scal(ScalBlock::C(s), i, j);
        let mb = ctx.scal(ScalBlock::Mu(s), i, j - 1);
        let mt = ctx.scal(ScalBlock::Mu(s), i, j);
        let cbar = 0.5 * (cb.val(x) + ct.val(x));
        let dmu = (mt.val(x) - mb.val(x)) / hy;
        res[r] += cbar * dmu;
        jac.emit(r, mt.idx, cbar * mt.coef / hy);
        jac.emit(r, mb.idx, -cbar * mb.coef / hy);
        jac.emit(r, cb.idx, 0.5 * cb.coef * dmu);
        jac.emit(r, ct.idx, 0.5 * ct.coef * dmu);
    }
}

/// Transport and potential-definition rows for species s (0-based).
fn species_rows<Jc: JacSink>(ctx: &FullCtx, x: &[f64], res: &mut [f64], jac: &mut Jc, s: usize) {
    let g = ctx.g;
    let lay = &ctx.lay;
    let p = ctx.p;
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    let dt = ctx.cfg.dt;
    let e2 = p.eps * p.eps;
    let a_s = [p.a1, p.a2, p.a3][s];
    let react_sign = if s == 2 { -1.0 } else { 1.0 };
    let old_c = [&ctx.old.c1, &ctx.old.c2, &ctx.old.c3][s];

    for j in 0..ny {
        for i in 0..nx {
            let (ii, jj) = (i as isize, j as isize);
            let c = lay.cell(ii, jj);
            let r = lay.off_c[s] + c;
            let cc = lay.off_c[s] + c;
            res[r] += (x[cc] - old_c.data[c]) / dt;
            jac.emit(r, cc, 1.0 / dt);

            // advection div(u c), centered face averages, Dirichlet override
            // at scalar-Dirichlet boundary faces
            struct Face {
                uf: usize,
                w: f64,
                bval: Option<f64>,
                nb: (isize, isize),
            }
            let faces = [
                Face { uf: lay.ux(ii + 1, jj), w: 1.0 / hx, bval: ctx.bnd_cval(s, Side::Right, i, j), nb: (ii + 1, jj) },
                Face { uf: lay.ux(ii, jj), w: -1.0 / hx, bval: ctx.bnd_cval(s, Side::Left, i, j), nb: (ii - 1, jj) },
                Face { uf: lay.uy(ii, jj + 1), w: 1.0 / hy, bval: ctx.bnd_cval(s, Side::Top, i, j), nb: (ii, jj + 1) },
                Face { uf: lay.uy(ii, jj), w: -1.0 / hy, bval: ctx.bnd_cval(s, Side::Bottom, i, j), nb: (ii, jj - 1) },
            ];
            for f in &faces {
                match f.bval {
                    Some(v) => {
                        // boundary face with prescribed concentration
                        res[r] += f.w * x[f.uf] * v;
                        jac.emit(r, f.uf, f.w * v);
                    }
                    None => {
                        let na = ctx.scal(ScalBlock::C(s), f.nb.0, f.nb.1);
                        let cbar = 0.5 * (na.val(x) + x[cc]);
                        res[r] += f.w * x[f.uf] * cbar;
                        jac.emit(r, f.uf, f.w * cbar);
                        jac.emit(r, na.idx, f.w * x[f.uf] * 0.5 * na.coef);
                        jac.emit(r, cc, f.w * x[f.uf] * 0.5);
                    }
                }
            }

            // diffusion -(1/Pe) div( Dcoef (c+1) grad mu )
            let dcoef = match s {
                0 => ctx.d1_old.data[c],
                1 => p.d2,
                _ => p.d3,
            };
            let muc = lay.off_mu[s] + c;
            let ipe = 1.0 / p.pe;
            struct DFace {
                dn: (isize, isize),
                h: f64,
                kind: DKind,
            }
            enum DKind {
                Interior,
                Neumann,
                Dirichlet(f64),
            }
            let classify = |side: Side, on_boundary: bool| -> DKind {
                if !on_boundary {
                    return DKind::Interior;
                }
                match ctx.bnd_scal_kind(s, side, i, j) {
                    None => DKind::Interior, // periodic
                    Some(None) => DKind::Neumann,
                    Some(Some(v)) => DKind::Dirichlet(v),
                }
            };
            let dfaces = [
                DFace { dn: (ii + 1, jj), h: hx, kind: classify(Side::Right, g.bc_x == AxisBc::Wall && i == nx - 1) },
                DFace { dn: (ii - 1, jj), h: hx, kind: classify(Side::Left, g.bc_x == AxisBc::Wall && i == 0) },
                DFace { dn: (ii, jj + 1), h: hy, kind: classify(Side::Top, g.bc_y == AxisBc::Wall && j == ny - 1) },
                DFace { dn: (ii, jj - 1), h: hy, kind: classify(Side::Bottom, g.bc_y == AxisBc::Wall && j == 0) },
            ];
            for f in &dfaces {
                match &f.kind {
                    DKind::Neumann => {} // zero flux
                    DKind::Interior => {
                        let cn = ctx.scal(ScalBlock::C(s), f.dn.0, f.dn.1);
                        let mn = ctx.scal(ScalBlock::Mu(s), f.dn.0, f.dn.1);
                        let dn_cell = match s {
                            0 => {
                                // D1^n of the neighbor cell (mirror/wrap index)
                                ctx.d1_old.data[cn.idx - lay.off_c[0]]
                            }
                            1 => p.d2,
                            _ => p.d3,
                        };
                        let a_here = dcoef * (x[cc] + 1.0);
                        let a_there = dn_cell * (cn.val(x) + 1.0);
                        let abar = 0.5 * (a_here + a_there);
                        // every face contributes abar (mu_nb - mu_c)/h^2 to the divergence
                        let flux_div = abar * (mn.val(x) - x[muc]) / (f.h * f.h);
                        res[r] -= ipe * flux_div;
                        jac.emit(r, mn.idx, -ipe * abar * mn.coef / (f.h * f.h));
                        jac.emit(r, muc, ipe * abar / (f.h * f.h));
                        let dmu2 = (mn.val(x) - x[muc]) / (f.h * f.h);
                        jac.emit(r, cc, -ipe * 0.5 * dcoef * dmu2);
                        jac.emit(r, cn.idx, -ipe * 0.5 * dn_cell * cn.coef * dmu2);
                    }
                    DKind::Dirichlet(v) => {
                        // half-cell flux against the boundary value, with the
                        // boundary mu built from the prescribed concentration
                        let a_b = dcoef * (v + 1.0);
                        let mu_b = ctx.boundary_mu(s, *v, x, c);
                        // flux (outward through this face) = a_b * 2/h * (mu_b - mu_c) * sign
                        // divergence contribution: w * flux_x where flux follows face normal
                        let two_h2 = 2.0 / (f.h * f.h);
                        res[r] -= ipe * a_b * two_h2 * (mu_b.value - x[muc]);
                        jac.emit(r, muc, ipe * a_b * two_h2);
                        // d mu_b / d phi_c (adhesion well in mu2/mu3)
                        jac.emit(r, lay.off_phi + c, -ipe * a_b * two_h2 * mu_b.dphi);
                    }
                }
            }

            // reaction: +- a_s P(phi^n) (a1 mu1 + a2 mu2 - a3 mu3)
            let pr = ctx.prolif_old.data[c];
            let m1 = lay.off_mu[0] + c;
            let m2 = lay.off_mu[1] + c;
            let m3 = lay.off_mu[2] + c;
            let aff = p.a1 * x[m1] + p.a2 * x[m2] - p.a3 * x[m3];
            res[r] += react_sign * a_s * pr * aff;
            jac.emit(r, m1, react_sign * a_s * pr * p.a1);
            jac.emit(r, m2, react_sign * a_s * pr * p.a2);
            jac.emit(r, m3, -react_sign * a_s * pr * p.a3);

            // ---- potential definition row ----
            let rm = lay.off_mu[s] + c;
            res[rm] += x[rm] - (x[cc] + 1.0).ln();
            jac.emit(rm, rm, 1.0);
            jac.emit(rm, cc, -1.0 / (x[cc] + 1.0));
            if s >= 1 {
                let phin = ctx.old.phi.data[c];
                let phic = lay.off_phi + c;
                let w = x[phic] * x[phic] - 1.0;
                res[rm] -= p.m_pen * phin * phin;
                res[rm] += 0.25 * p.n_adh * w * w;
                jac.emit(rm, phic, p.n_adh * w * x[phic]);
            }
            if s == 2 {
                // - Lambda (F(phi) + eps^2/2 |grad phi|^2)
                let lam_q = p.lambda_quotient(x[cc], ctx.old.c3.data[c]);
                let phic = lay.off_phi + c;
                let f = physics::f_trunc(x[phic], p.trunc_radius);
                res[rm] -= lam_q * f.value;
                jac.emit(rm, phic, -lam_q * f.d1);
                for (di, dj, h) in [(1isize, 0isize, hx), (-1, 0, hx), (0, 1, hy), (0, -1, hy)] {
                    let nb = ctx.scal(ScalBlock::Phi, ii + di, jj + dj);
                    let d = (nb.val(x) - x[phic]) / h;
                    res[rm] -= lam_q * (0.5 * e2) * 0.5 * d * d;
                    let dd = lam_q * (0.5 * e2) * d / h;
                    jac.emit(rm, nb.idx, -dd * nb.coef);
                    jac.emit(rm, phic, dd);
                }
            }
        }
    }
}

/// Boundary mu value (and its phi-derivative) built from a prescribed
/// concentration at a Dirichlet scalar face.
struct BoundaryMu {
    value: f64,
    dphi: f64,
}

impl FullCtx<'_> {
    /// Dirichlet concentration at the boundary face of cell (i, j) on `side`,
    /// if that side both is a wall boundary of this cell and prescribes one.
    fn bnd_cval(&self, s: usize, side: Side, i: usize, j: usize) -> Option<f64> {
        let g = self.g;
        let on = match side {
            Side::Left => g.bc_x == AxisBc::Wall && i == 0,
            Side::Right => g.bc_x == AxisBc::Wall && i == g.nx - 1,
            Side::Bottom => g.bc_y == AxisBc::Wall && j == 0,
            Side::Top => g.bc_y == AxisBc::Wall && j == g.ny - 1,
        };
        if !on {
            return None;
        }
        let t = if side.is_x() { (j as f64 + 0.5) * g.hy() } else { (i as f64 + 0.5) * g.hx() };
        match &self.plan.c[s][side as usize] {
            SideCondition::Dirichlet(p) => p.eval(t),
            _ => None,
        }
    }

    /// Classify a wall boundary face of the diffusion stencil:
    /// None => periodic (treat as interior), Some(None) => Neumann,
    /// Some(Some(v)) => Dirichlet with value v.
    fn bnd_scal_kind(&self, s: usize, side: Side, i: usize, j: usize) -> Option<Option<f64>> {
        let axis = if side.is_x() { self.g.bc_x } else { self.g.bc_y };
        if axis == AxisBc::Periodic {
            return None;
        }
        Some(self.bnd_cval(s, side, i, j))
    }

    /// mu at a Dirichlet concentration face; phi enters through the mirror
    /// ghost so the cell value is used directly.
    fn boundary_mu(&self, s: usize, v: f64, x: &[f64], cell: usize) -> BoundaryMu {
        let p = self.p;
        let base = (v + 1.0).ln();
        if s == 0 {
            return BoundaryMu { value: base, dphi: 0.0 };
        }
        let phin = self.old.phi.data[cell];
        let phic = x[self.lay.off_phi + cell];
        let w = phic * phic - 1.0;
        // for s == 2 the interface-energy term of mu3 is dropped at the
        // boundary face; open-boundary runs make no conservation claims
        let value = base + p.m_pen * phin * phin - 0.25 * p.n_adh * w * w;
        let dphi = -p.n_adh * w * phic;
        BoundaryMu { value, dphi }
    }
}

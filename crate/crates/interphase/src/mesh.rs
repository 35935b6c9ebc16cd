//! Uniform staggered (MAC) rectangular grid and its discrete operators.
//!
//! Scalars live at cell centers, velocity components at cell faces. The
//! gradient/divergence pair is built so that the discrete integration-by-parts
//! identities hold exactly under periodic or no-flux closures; the rest of the
//! crate leans on that adjointness for the discrete mass and energy laws.

use thiserror::Error;

pub mod bc;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("field shape ({got_nx}x{got_ny}) does not match grid ({nx}x{ny})")]
    ShapeMismatch {
        nx: usize,
        ny: usize,
        got_nx: usize,
        got_ny: usize,
    },
    #[error("negative diffusion coefficient {value:e} at cell ({i},{j})")]
    NegativeCoefficient { i: usize, j: usize, value: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite value in field `{field}` at cell ({i},{j})")]
    NonFinite {
        field: &'static str,
        i: usize,
        j: usize,
    },
}

/// Boundary family of one grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisBc {
    Periodic,
    /// Solid wall: homogeneous Neumann for scalars, no-slip for velocity.
    /// Scenario-level Dirichlet overrides (inlets/outlets) refine this.
    Wall,
}

/// Uniform rectangular staggered grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub bc_x: AxisBc,
    pub bc_y: AxisBc,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, bc_x: AxisBc, bc_y: AxisBc) -> Result<Self, MeshError> {
        if nx < 4 || ny < 4 {
            return Err(MeshError::InvalidGrid(format!("need nx, ny >= 4, got {nx}x{ny}")));
        }
        if !(lx > 0.0) || !(ly > 0.0) {
            return Err(MeshError::InvalidGrid(format!("need positive extents, got {lx} x {ly}")));
        }
        Ok(Self { nx, ny, lx, ly, bc_x, bc_y })
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    #[inline]
    pub fn ncells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    /// Cell center coordinates.
    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }
}

/// Cell-centered scalar samples, row-major (j * nx + i).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub nx: usize,
    pub ny: usize,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(g: &GridSpec) -> Self {
        Self { nx: g.nx, ny: g.ny, data: vec![0.0; g.ncells()] }
    }

    pub fn constant(g: &GridSpec, v: f64) -> Self {
        Self { nx: g.nx, ny: g.ny, data: vec![v; g.ncells()] }
    }

    pub fn from_fn(g: &GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut s = Self::zeros(g);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (x, y) = g.center(i, j);
                s.data[j * g.nx + i] = f(x, y);
            }
        }
        s
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nx + i]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[j * self.nx + i]
    }

    pub fn matches(&self, g: &GridSpec) -> Result<(), MeshError> {
        if self.nx != g.nx || self.ny != g.ny {
            return Err(MeshError::ShapeMismatch { nx: g.nx, ny: g.ny, got_nx: self.nx, got_ny: self.ny });
        }
        Ok(())
    }

    pub fn check_finite(&self, name: &'static str) -> Result<(), MeshError> {
        for j in 0..self.ny {
            for i in 0..self.nx {
                if !self.at(i, j).is_finite() {
                    return Err(MeshError::NonFinite { field: name, i, j });
                }
            }
        }
        Ok(())
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Face-centered vector samples: `fx` on the (nx+1) x ny vertical faces,
/// `fy` on the nx x (ny+1) horizontal faces.
///
/// On a periodic axis the wrapped boundary entries (`fx[nx][j]`, `fy[i][ny]`)
/// mirror the owned ones; operators read the owned entry, writers keep the
/// mirror in sync.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    pub nx: usize,
    pub ny: usize,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
}

impl FaceField {
    pub fn zeros(g: &GridSpec) -> Self {
        Self {
            nx: g.nx,
            ny: g.ny,
            fx: vec![0.0; (g.nx + 1) * g.ny],
            fy: vec![0.0; g.nx * (g.ny + 1)],
        }
    }

    pub fn from_fn(g: &GridSpec, mut fx: impl FnMut(f64, f64) -> f64, mut fy: impl FnMut(f64, f64) -> f64) -> Self {
        let mut f = Self::zeros(g);
        for j in 0..g.ny {
            for i in 0..=g.nx {
                f.fx[j * (g.nx + 1) + i] = fx(i as f64 * g.hx(), (j as f64 + 0.5) * g.hy());
            }
        }
        for j in 0..=g.ny {
            for i in 0..g.nx {
                f.fy[j * g.nx + i] = fy((i as f64 + 0.5) * g.hx(), j as f64 * g.hy());
            }
        }
        f.sync_wrap(g);
        f
    }

    #[inline]
    pub fn x_at(&self, i: usize, j: usize) -> f64 {
        self.fx[j * (self.nx + 1) + i]
    }

    #[inline]
    pub fn y_at(&self, i: usize, j: usize) -> f64 {
        self.fy[j * self.nx + i]
    }

    #[inline]
    pub fn x_at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.fx[j * (self.nx + 1) + i]
    }

    #[inline]
    pub fn y_at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.fy[j * self.nx + i]
    }

    /// Canonical x-face value: on a periodic axis the face i == nx is face 0.
    #[inline]
    pub fn x_canon(&self, g: &GridSpec, i: usize, j: usize) -> f64 {
        let i = if g.bc_x == AxisBc::Periodic && i == self.nx { 0 } else { i };
        self.x_at(i, j)
    }

    #[inline]
    pub fn y_canon(&self, g: &GridSpec, i: usize, j: usize) -> f64 {
        let j = if g.bc_y == AxisBc::Periodic && j == self.ny { 0 } else { j };
        self.y_at(i, j)
    }

    /// Re-establish the periodic mirror entries from the owned ones.
    pub fn sync_wrap(&mut self, g: &GridSpec) {
        if g.bc_x == AxisBc::Periodic {
            for j in 0..self.ny {
                let v = self.x_at(0, j);
                *self.x_at_mut(self.nx, j) = v;
            }
        }
        if g.bc_y == AxisBc::Periodic {
            for i in 0..self.nx {
                let v = self.y_at(i, 0);
                *self.y_at_mut(i, self.ny) = v;
            }
        }
    }

    pub fn matches(&self, g: &GridSpec) -> Result<(), MeshError> {
        if self.nx != g.nx || self.ny != g.ny {
            return Err(MeshError::ShapeMismatch { nx: g.nx, ny: g.ny, got_nx: self.nx, got_ny: self.ny });
        }
        Ok(())
    }

    pub fn check_finite(&self, name: &'static str) -> Result<(), MeshError> {
        for (k, v) in self.fx.iter().chain(self.fy.iter()).enumerate() {
            if !v.is_finite() {
                return Err(MeshError::NonFinite { field: name, i: k, j: 0 });
            }
        }
        Ok(())
    }
}

/// Scalar ghost value next to a boundary face, by the grid-level closure:
/// mirror for walls (zero normal gradient), wrap for periodic.
#[inline]
fn wrap(i: isize, n: usize) -> usize {
    let n = n as isize;
    (((i % n) + n) % n) as usize
}

/// Arithmetic average of a cell scalar onto faces. Wall faces take the
/// adjacent cell value (mirror ghost), periodic faces wrap.
pub fn avg_c2f(s: &ScalarField, g: &GridSpec) -> Result<FaceField, MeshError> {
    s.matches(g)?;
    let mut f = FaceField::zeros(g);
    for j in 0..g.ny {
        for i in 0..=g.nx {
            let v = match g.bc_x {
                AxisBc::Periodic => 0.5 * (s.at(wrap(i as isize - 1, g.nx), j) + s.at(wrap(i as isize, g.nx), j)),
                AxisBc::Wall => {
                    if i == 0 {
                        s.at(0, j)
                    } else if i == g.nx {
                        s.at(g.nx - 1, j)
                    } else {
                        0.5 * (s.at(i - 1, j) + s.at(i, j))
                    }
                }
            };
            *f.x_at_mut(i, j) = v;
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            let v = match g.bc_y {
                AxisBc::Periodic => 0.5 * (s.at(i, wrap(j as isize - 1, g.ny)) + s.at(i, wrap(j as isize, g.ny))),
                AxisBc::Wall => {
                    if j == 0 {
                        s.at(i, 0)
                    } else if j == g.ny {
                        s.at(i, g.ny - 1)
                    } else {
                        0.5 * (s.at(i, j - 1) + s.at(i, j))
                    }
                }
            };
            *f.y_at_mut(i, j) = v;
        }
    }
    Ok(f)
}

/// Centered difference of a cell scalar across each face.
///
/// Wall faces carry zero gradient (mirror ghost); periodic faces wrap.
pub fn grad_c2f(s: &ScalarField, g: &GridSpec) -> Result<FaceField, MeshError> {
    s.matches(g)?;
    let (hx, hy) = (g.hx(), g.hy());
    let mut f = FaceField::zeros(g);
    for j in 0..g.ny {
        for i in 0..=g.nx {
            let v = match g.bc_x {
                AxisBc::Periodic => (s.at(wrap(i as isize, g.nx), j) - s.at(wrap(i as isize - 1, g.nx), j)) / hx,
                AxisBc::Wall => {
                    if i == 0 || i == g.nx {
                        0.0
                    } else {
                        (s.at(i, j) - s.at(i - 1, j)) / hx
                    }
                }
            };
            *f.x_at_mut(i, j) = v;
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            let v = match g.bc_y {
                AxisBc::Periodic => (s.at(i, wrap(j as isize, g.ny)) - s.at(i, wrap(j as isize - 1, g.ny))) / hy,
                AxisBc::Wall => {
                    if j == 0 || j == g.ny {
                        0.0
                    } else {
                        (s.at(i, j) - s.at(i, j - 1)) / hy
                    }
                }
            };
            *f.y_at_mut(i, j) = v;
        }
    }
    Ok(f)
}

/// Net outward face flux per unit cell area.
pub fn div_f2c(f: &FaceField, g: &GridSpec) -> Result<ScalarField, MeshError> {
    f.matches(g)?;
    let (hx, hy) = (g.hx(), g.hy());
    let mut s = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let dx = (f.x_canon(g, i + 1, j) - f.x_at(i, j)) / hx;
            let dy = (f.y_canon(g, i, j + 1) - f.y_at(i, j)) / hy;
            *s.at_mut(i, j) = dx + dy;
        }
    }
    Ok(s)
}

/// Variable-coefficient diffusion operator: div(a grad s) with the cell
/// coefficient averaged arithmetically onto faces. Self-adjoint and negative
/// semidefinite in the cell inner product for a >= 0.
pub fn div_coeff_grad(a: &ScalarField, s: &ScalarField, g: &GridSpec) -> Result<ScalarField, MeshError> {
    a.matches(g)?;
    s.matches(g)?;
    for j in 0..g.ny {
        for i in 0..g.nx {
            if a.at(i, j) < 0.0 {
                return Err(MeshError::NegativeCoefficient { i, j, value: a.at(i, j) });
            }
        }
    }
    let af = avg_c2f(a, g)?;
    let mut gs = grad_c2f(s, g)?;
    for (v, w) in gs.fx.iter_mut().zip(af.fx.iter()) {
        *v *= w;
    }
    for (v, w) in gs.fy.iter_mut().zip(af.fy.iter()) {
        *v *= w;
    }
    div_f2c(&gs, g)
}

/// Plain five-point Laplacian (unit coefficient).
pub fn laplacian(s: &ScalarField, g: &GridSpec) -> Result<ScalarField, MeshError> {
    div_f2c(&grad_c2f(s, g)?, g)
}

/// Divergence-form advection div(u s) with the face value of s taken as the
/// centered average.
pub fn advect_div_form(u: &FaceField, s: &ScalarField, g: &GridSpec) -> Result<ScalarField, MeshError> {
    u.matches(g)?;
    s.matches(g)?;
    let sf = avg_c2f(s, g)?;
    let mut flux = u.clone();
    for (v, w) in flux.fx.iter_mut().zip(sf.fx.iter()) {
        *v *= w;
    }
    for (v, w) in flux.fy.iter_mut().zip(sf.fy.iter()) {
        *v *= w;
    }
    div_f2c(&flux, g)
}

/// Cell-centered |grad s|^2 as the average of squared face-gradient
/// components; consistent with the discrete mixing energy.
pub fn grad_sq_center(s: &ScalarField, g: &GridSpec) -> Result<ScalarField, MeshError> {
    let gr = grad_c2f(s, g)?;
    let mut out = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let gx_l = gr.x_at(i, j);
            let gx_r = gr.x_canon(g, i + 1, j);
            let gy_b = gr.y_at(i, j);
            let gy_t = gr.y_canon(g, i, j + 1);
            *out.at_mut(i, j) = 0.5 * (gx_l * gx_l + gx_r * gx_r) + 0.5 * (gy_b * gy_b + gy_t * gy_t);
        }
    }
    Ok(out)
}

/// Cell-area-weighted inner product.
pub fn inner(s1: &ScalarField, s2: &ScalarField, g: &GridSpec) -> Result<f64, MeshError> {
    s1.matches(g)?;
    s2.matches(g)?;
    let a = g.cell_area();
    Ok(s1.data.iter().zip(s2.data.iter()).map(|(x, y)| x * y).sum::<f64>() * a)
}

/// Face-weighted inner product over owned faces (periodic mirrors excluded).
pub fn inner_face(f1: &FaceField, f2: &FaceField, g: &GridSpec) -> Result<f64, MeshError> {
    f1.matches(g)?;
    f2.matches(g)?;
    let a = g.cell_area();
    let mut acc = 0.0;
    let ix_end = if g.bc_x == AxisBc::Periodic { g.nx } else { g.nx + 1 };
    for j in 0..g.ny {
        for i in 0..ix_end {
            acc += f1.x_at(i, j) * f2.x_at(i, j);
        }
    }
    let jy_end = if g.bc_y == AxisBc::Periodic { g.ny } else { g.ny + 1 };
    for j in 0..jy_end {
        for i in 0..g.nx {
            acc += f1.y_at(i, j) * f2.y_at(i, j);
        }
    }
    Ok(acc * a)
}

/// Cell sum weighted by area: integral of the field over the domain.
pub fn integral(s: &ScalarField, g: &GridSpec) -> Result<f64, MeshError> {
    s.matches(g)?;
    Ok(s.data.iter().sum::<f64>() * g.cell_area())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(nx: usize, ny: usize, bc_x: AxisBc, bc_y: AxisBc) -> GridSpec {
        GridSpec::new(nx, ny, 1.0, 1.0, bc_x, bc_y).unwrap()
    }

    fn random_scalar(g: &GridSpec, rng: &mut impl Rng) -> ScalarField {
        let mut s = ScalarField::zeros(g);
        for v in s.data.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        s
    }

    fn random_face(g: &GridSpec, rng: &mut impl Rng) -> FaceField {
        let mut f = FaceField::zeros(g);
        for v in f.fx.iter_mut().chain(f.fy.iter_mut()) {
            *v = rng.gen_range(-1.0..1.0);
        }
        f.sync_wrap(g);
        f
    }

    /// Zero the boundary-normal faces so a face field is interior-supported.
    fn interior_supported(mut f: FaceField, g: &GridSpec) -> FaceField {
        if g.bc_x == AxisBc::Wall {
            for j in 0..g.ny {
                *f.x_at_mut(0, j) = 0.0;
                *f.x_at_mut(g.nx, j) = 0.0;
            }
        }
        if g.bc_y == AxisBc::Wall {
            for i in 0..g.nx {
                *f.y_at_mut(i, 0) = 0.0;
                *f.y_at_mut(i, g.ny) = 0.0;
            }
        }
        f
    }

    #[test]
    fn grid_rejects_degenerate() {
        assert!(GridSpec::new(2, 8, 1.0, 1.0, AxisBc::Wall, AxisBc::Wall).is_err());
        assert!(GridSpec::new(8, 8, 0.0, 1.0, AxisBc::Wall, AxisBc::Wall).is_err());
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        for bc in [AxisBc::Periodic, AxisBc::Wall] {
            let g = grid(8, 8, bc, AxisBc::Wall);
            let s = ScalarField::constant(&g, 3.25);
            let f = grad_c2f(&s, &g).unwrap();
            assert!(f.fx.iter().chain(f.fy.iter()).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn gradient_linear_exact_at_interior_faces() {
        let g = grid(8, 6, AxisBc::Wall, AxisBc::Wall);
        let s = ScalarField::from_fn(&g, |x, _| x);
        let f = grad_c2f(&s, &g).unwrap();
        for j in 0..g.ny {
            for i in 1..g.nx {
                assert!((f.x_at(i, j) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn divergence_of_constant_periodic_is_zero() {
        let g = grid(8, 8, AxisBc::Periodic, AxisBc::Periodic);
        let mut f = FaceField::zeros(&g);
        for v in f.fx.iter_mut() {
            *v = 2.0;
        }
        for v in f.fy.iter_mut() {
            *v = -1.5;
        }
        let d = div_f2c(&f, &g).unwrap();
        assert!(d.data.iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn single_face_divergence_stencil() {
        // one unit x-face between cells (2,3) and (3,3): div = -1/hx and +1/hx
        let g = grid(8, 8, AxisBc::Wall, AxisBc::Wall);
        let mut f = FaceField::zeros(&g);
        *f.x_at_mut(3, 3) = 1.0;
        let d = div_f2c(&f, &g).unwrap();
        let hx = g.hx();
        assert!((d.at(2, 3) - 1.0 / hx).abs() < 1e-13);
        assert!((d.at(3, 3) + 1.0 / hx).abs() < 1e-13);
        let total: f64 = d.data.iter().sum();
        assert!(total.abs() < 1e-13);
    }

    #[test]
    fn discrete_divergence_theorem() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (bx, by) in [
            (AxisBc::Periodic, AxisBc::Periodic),
            (AxisBc::Periodic, AxisBc::Wall),
            (AxisBc::Wall, AxisBc::Wall),
        ] {
            for n in [6usize, 8, 16] {
                let g = grid(n, n, bx, by);
                let f = interior_supported(random_face(&g, &mut rng), &g);
                let d = div_f2c(&f, &g).unwrap();
                let total = integral(&d, &g).unwrap();
                let scale: f64 = f.fx.iter().chain(f.fy.iter()).map(|v| v.abs()).sum();
                assert!(total.abs() <= 1e-13 * scale.max(1.0), "total={total:e}");
            }
        }
    }

    #[test]
    fn adjointness_grad_div() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (bx, by) in [
            (AxisBc::Periodic, AxisBc::Periodic),
            (AxisBc::Periodic, AxisBc::Wall),
            (AxisBc::Wall, AxisBc::Wall),
        ] {
            let g = grid(8, 8, bx, by);
            let s = random_scalar(&g, &mut rng);
            let f = interior_supported(random_face(&g, &mut rng), &g);
            let lhs = inner_face(&grad_c2f(&s, &g).unwrap(), &f, &g).unwrap();
            let rhs = -inner(&s, &div_f2c(&f, &g).unwrap(), &g).unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn coeff_laplacian_self_adjoint_and_nsd() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for (bx, by) in [(AxisBc::Periodic, AxisBc::Wall), (AxisBc::Wall, AxisBc::Wall)] {
            let g = grid(6, 6, bx, by);
            let mut a = random_scalar(&g, &mut rng);
            for v in a.data.iter_mut() {
                *v = v.abs() + 0.1;
            }
            let s = random_scalar(&g, &mut rng);
            let t = random_scalar(&g, &mut rng);
            let lhs = inner(&t, &div_coeff_grad(&a, &s, &g).unwrap(), &g).unwrap();
            let rhs = inner(&s, &div_coeff_grad(&a, &t, &g).unwrap(), &g).unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
            let quad = inner(&s, &div_coeff_grad(&a, &s, &g).unwrap(), &g).unwrap();
            assert!(quad <= 1e-13);
        }
    }

    #[test]
    fn unit_coefficient_is_plain_laplacian() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let g = grid(8, 8, AxisBc::Periodic, AxisBc::Wall);
        let a = ScalarField::constant(&g, 1.0);
        let s = random_scalar(&g, &mut rng);
        let l1 = div_coeff_grad(&a, &s, &g).unwrap();
        let l2 = laplacian(&s, &g).unwrap();
        for (x, y) in l1.data.iter().zip(l2.data.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn coeff_laplacian_annihilates_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let g = grid(6, 6, AxisBc::Wall, AxisBc::Wall);
        let mut a = random_scalar(&g, &mut rng);
        for v in a.data.iter_mut() {
            *v = v.abs();
        }
        let s = ScalarField::constant(&g, -0.7);
        let l = div_coeff_grad(&a, &s, &g).unwrap();
        assert!(l.data.iter().all(|&v| v.abs() < 1e-13));
    }

    #[test]
    fn coeff_laplacian_rejects_negative() {
        let g = grid(6, 6, AxisBc::Wall, AxisBc::Wall);
        let mut a = ScalarField::constant(&g, 1.0);
        *a.at_mut(2, 2) = -1e-3;
        let s = ScalarField::constant(&g, 0.0);
        assert!(matches!(
            div_coeff_grad(&a, &s, &g),
            Err(MeshError::NegativeCoefficient { i: 2, j: 2, .. })
        ));
    }

    #[test]
    fn advection_zero_velocity_and_conservation() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let g = grid(8, 8, AxisBc::Periodic, AxisBc::Wall);
        let s = random_scalar(&g, &mut rng);
        let z = FaceField::zeros(&g);
        let adv = advect_div_form(&z, &s, &g).unwrap();
        assert!(adv.data.iter().all(|&v| v == 0.0));

        // any no-penetration velocity: cell sum of the divergence form vanishes
        let u = interior_supported(random_face(&g, &mut rng), &g);
        let adv = advect_div_form(&u, &s, &g).unwrap();
        assert!(integral(&adv, &g).unwrap().abs() < 1e-12);
    }

    #[test]
    fn inner_products() {
        let g = GridSpec::new(8, 4, 2.0, 0.5, AxisBc::Periodic, AxisBc::Wall).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        assert!((inner(&one, &one, &g).unwrap() - 1.0).abs() < 1e-14); // lx*ly = 1.0
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let s = random_scalar(&g, &mut rng);
        assert!(inner(&s, &s, &g).unwrap() > 0.0);
        let z = ScalarField::zeros(&g);
        assert_eq!(inner(&z, &z, &g).unwrap(), 0.0);
    }

    #[test]
    fn grad_sq_center_matches_face_sum_identity() {
        // sum_c lambda_c |grad phi|^2_c == sum_f lambda_bar_f |grad phi|^2_f
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for (bx, by) in [(AxisBc::Periodic, AxisBc::Wall), (AxisBc::Wall, AxisBc::Wall)] {
            let g = grid(8, 8, bx, by);
            let lam = {
                let mut l = random_scalar(&g, &mut rng);
                for v in l.data.iter_mut() {
                    *v = v.abs() + 0.5;
                }
                l
            };
            let s = random_scalar(&g, &mut rng);
            let gs = grad_sq_center(&s, &g).unwrap();
            let lhs = inner(&lam, &gs, &g).unwrap();

            let lamf = avg_c2f(&lam, &g).unwrap();
            let gr = grad_c2f(&s, &g).unwrap();
            let mut weighted = gr.clone();
            for (v, w) in weighted.fx.iter_mut().zip(lamf.fx.iter()) {
                *v *= w;
            }
            for (v, w) in weighted.fy.iter_mut().zip(lamf.fy.iter()) {
                *v *= w;
            }
            let rhs = inner_face(&weighted, &gr, &g).unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        }
    }
}

//! Flat unknown-vector layout for the monolithic solve.
//!
//! Block order: ux faces, uy faces, p, phi, mu_phi, c1, mu1, c2, mu2, c3, mu3.
//! On a periodic axis only the owned faces are unknowns (the wrapped mirror
//! entry is re-synced on unpack).

use crate::mesh::{AxisBc, FaceField, GridSpec, ScalarField};
use crate::scheme::State;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub nx: usize,
    pub ny: usize,
    pub per_x: bool,
    pub per_y: bool,
    /// Owned x-face columns: nx when periodic, nx + 1 otherwise.
    pub nux_cols: usize,
    /// Owned y-face rows: ny when periodic, ny + 1 otherwise.
    pub nuy_rows: usize,
    pub n_ux: usize,
    pub n_uy: usize,
    pub nc: usize,
    pub off_ux: usize,
    pub off_uy: usize,
    pub off_p: usize,
    pub off_phi: usize,
    pub off_muphi: usize,
    pub off_c: [usize; 3],
    pub off_mu: [usize; 3],
    pub n: usize,
}

impl Layout {
    pub fn new(g: &GridSpec) -> Self {
        let per_x = g.bc_x == AxisBc::Periodic;
        let per_y = g.bc_y == AxisBc::Periodic;
        let nux_cols = if per_x { g.nx } else { g.nx + 1 };
        let nuy_rows = if per_y { g.ny } else { g.ny + 1 };
        let n_ux = nux_cols * g.ny;
        let n_uy = g.nx * nuy_rows;
        let nc = g.ncells();
        let off_ux = 0;
        let off_uy = n_ux;
        let off_p = off_uy + n_uy;
        let off_phi = off_p + nc;
        let off_muphi = off_phi + nc;
        let off_c1 = off_muphi + nc;
        let off_mu1 = off_c1 + nc;
        let off_c2 = off_mu1 + nc;
        let off_mu2 = off_c2 + nc;
        let off_c3 = off_mu2 + nc;
        let off_mu3 = off_c3 + nc;
        Layout {
            nx: g.nx,
            ny: g.ny,
            per_x,
            per_y,
            nux_cols,
            nuy_rows,
            n_ux,
            n_uy,
            nc,
            off_ux,
            off_uy,
            off_p,
            off_phi,
            off_muphi,
            off_c: [off_c1, off_c2, off_c3],
            off_mu: [off_mu1, off_mu2, off_mu3],
            n: off_mu3 + nc,
        }
    }

    /// Unknown index of the x-face (i, j), i taken modulo nx when periodic.
    #[inline]
    pub fn ux(&self, i: isize, j: isize) -> usize {
        let (i, j) = self.wrap_face_x(i, j);
        self.off_ux + j * self.nux_cols + i
    }

    /// Normalize an x-face index pair into owned range (periodic wrap only;
    /// callers resolve wall ghosts before indexing).
    #[inline]
    pub fn wrap_face_x(&self, i: isize, j: isize) -> (usize, usize) {
        let nx = self.nx as isize;
        let ny = self.ny as isize;
        let i = if self.per_x { i.rem_euclid(nx) } else { i };
        let j = if self.per_y { j.rem_euclid(ny) } else { j };
        debug_assert!(i >= 0 && (i as usize) < self.nux_cols, "ux face i={i}");
        debug_assert!(j >= 0 && (j as usize) < self.ny, "ux face j={j}");
        (i as usize, j as usize)
    }

    #[inline]
    pub fn uy(&self, i: isize, j: isize) -> usize {
        let nx = self.nx as isize;
        let ny = self.ny as isize;
        let i = if self.per_x { i.rem_euclid(nx) } else { i };
        let j = if self.per_y { j.rem_euclid(ny) } else { j };
        debug_assert!(i >= 0 && (i as usize) < self.nx, "uy face i={i}");
        debug_assert!(j >= 0 && (j as usize) < self.nuy_rows, "uy face j={j}");
        self.off_uy + (j as usize) * self.nx + i as usize
    }

    /// Cell index with periodic wrap; panics (debug) outside owned range on
    /// wall axes — wall ghosts are resolved by the assembly, not here.
    #[inline]
    pub fn cell(&self, i: isize, j: isize) -> usize {
        let nx = self.nx as isize;
        let ny = self.ny as isize;
        let i = if self.per_x { i.rem_euclid(nx) } else { i };
        let j = if self.per_y { j.rem_euclid(ny) } else { j };
        debug_assert!(i >= 0 && i < nx && j >= 0 && j < ny, "cell ({i},{j})");
        (j as usize) * self.nx + i as usize
    }

    pub fn pack(&self, s: &State, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n);
        for j in 0..self.ny {
            for i in 0..self.nux_cols {
                out[self.off_ux + j * self.nux_cols + i] = s.u.x_at(i, j);
            }
        }
        for j in 0..self.nuy_rows {
            for i in 0..self.nx {
                out[self.off_uy + j * self.nx + i] = s.u.y_at(i, j);
            }
        }
        let scalars: [(&ScalarField, usize); 9] = [
            (&s.p, self.off_p),
            (&s.phi, self.off_phi),
            (&s.mu_phi, self.off_muphi),
            (&s.c1, self.off_c[0]),
            (&s.mu1, self.off_mu[0]),
            (&s.c2, self.off_c[1]),
            (&s.mu2, self.off_mu[1]),
            (&s.c3, self.off_c[2]),
            (&s.mu3, self.off_mu[2]),
        ];
        for (f, off) in scalars {
            out[off..off + self.nc].copy_from_slice(&f.data);
        }
    }

    pub fn unpack(&self, x: &[f64], g: &GridSpec, t: f64) -> State {
        debug_assert_eq!(x.len(), self.n);
        let mut u = FaceField::zeros(g);
        for j in 0..self.ny {
            for i in 0..self.nux_cols {
                *u.x_at_mut(i, j) = x[self.off_ux + j * self.nux_cols + i];
            }
        }
        for j in 0..self.nuy_rows {
            for i in 0..self.nx {
                *u.y_at_mut(i, j) = x[self.off_uy + j * self.nx + i];
            }
        }
        u.sync_wrap(g);
        let take = |off: usize| ScalarField {
            nx: self.nx,
            ny: self.ny,
            data: x[off..off + self.nc].to_vec(),
        };
        State {
            t,
            u,
            p: take(self.off_p),
            phi: take(self.off_phi),
            mu_phi: take(self.off_muphi),
            c1: take(self.off_c[0]),
            mu1: take(self.off_mu[0]),
            c2: take(self.off_c[1]),
            mu2: take(self.off_mu[1]),
            c3: take(self.off_c[2]),
            mu3: take(self.off_mu[2]),
        }
    }
}

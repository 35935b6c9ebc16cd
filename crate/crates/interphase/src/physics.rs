//! Constitutive functions and chemical potentials of the dimensionless model,
//! in the stabilized/truncated forms consumed by the implicit scheme.

use crate::mesh::{self, GridSpec, MeshError, ScalarField};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhysicsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("permeability q = {0:e} must be positive")]
    NonPositiveQ(f64),
    #[error("log of non-positive argument: c + 1 = {0:e}")]
    LogDomain(f64),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Permeability law q = dQ/dc1 used inside the restricted diffusivity of Y1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QMode {
    /// q = q0.
    Constant(f64),
    /// q = 1 + 2 c3, tied to the local reaction product.
    OnePlusTwoC3,
}

/// Every dimensionless model constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub re: f64,
    pub pe: f64,
    pub mobility: f64,
    pub d2: f64,
    pub d3: f64,
    pub d1_plus: f64,
    pub d1_minus: f64,
    pub m_pen: f64,
    pub n_adh: f64,
    pub k_rate: f64,
    pub eps: f64,
    /// Slope of the mixing energy density lambda(c3) = 1 + lambda0 * c3.
    pub lambda0: f64,
    pub s_stab: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    /// Truncation radius of the double well (quadratic growth outside).
    pub trunc_radius: f64,
    pub q_mode: QMode,
}

impl Default for PhysParams {
    /// Baseline simulation constants: Re = Pe = 1, mobility 0.05,
    /// D2 = D3 = 1, M = N = 1, k = 1, eps = 0.04, S = 4, a = (1, 1, 2).
    fn default() -> Self {
        Self {
            re: 1.0,
            pe: 1.0,
            mobility: 0.05,
            d2: 1.0,
            d3: 1.0,
            d1_plus: 1.0,
            d1_minus: 1.0,
            m_pen: 1.0,
            n_adh: 1.0,
            k_rate: 1.0,
            eps: 0.04,
            lambda0: 0.05,
            s_stab: 4.0,
            a1: 1.0,
            a2: 1.0,
            a3: 2.0,
            trunc_radius: 1.2,
            q_mode: QMode::Constant(1.0),
        }
    }
}

impl PhysParams {
    /// Bound L on |F''| over the truncated double well.
    pub fn trunc_l(&self) -> f64 {
        3.0 * self.trunc_radius * self.trunc_radius - 1.0
    }

    pub fn lambda_of(&self, c3: f64) -> f64 {
        1.0 + self.lambda0 * c3
    }

    pub fn dlambda(&self) -> f64 {
        self.lambda0
    }

    /// Difference quotient of lambda between two c3 levels; falls back to the
    /// exact affine slope when the denominator degenerates.
    pub fn lambda_quotient(&self, c3_new: f64, c3_old: f64) -> f64 {
        let d = c3_new - c3_old;
        if d.abs() > 1e-12 {
            (self.lambda_of(c3_new) - self.lambda_of(c3_old)) / d
        } else {
            self.dlambda()
        }
    }

    pub fn q_of(&self, c3_old: f64) -> f64 {
        match self.q_mode {
            QMode::Constant(q0) => q0,
            QMode::OnePlusTwoC3 => 1.0 + 2.0 * c3_old,
        }
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        if (self.a1 + self.a2 - self.a3).abs() > 1e-12 {
            return Err(PhysicsError::InvalidParams(format!(
                "stoichiometry must satisfy a1 + a2 = a3, got {} + {} != {}",
                self.a1, self.a2, self.a3
            )));
        }
        if !(self.eps > 0.0) {
            return Err(PhysicsError::InvalidParams("eps must be positive".into()));
        }
        if self.trunc_radius < 1.0 {
            return Err(PhysicsError::InvalidParams("truncation radius must be >= 1".into()));
        }
        for (name, v) in [
            ("mobility", self.mobility),
            ("d2", self.d2),
            ("d3", self.d3),
            ("d1_plus", self.d1_plus),
            ("d1_minus", self.d1_minus),
            ("k_rate", self.k_rate),
            ("m_pen", self.m_pen),
            ("n_adh", self.n_adh),
        ] {
            if v < 0.0 {
                return Err(PhysicsError::InvalidParams(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.s_stab < 0.5 * self.trunc_l() {
            return Err(PhysicsError::InvalidParams(format!(
                "stabilization S = {} below L/2 = {}",
                self.s_stab,
                0.5 * self.trunc_l()
            )));
        }
        if let QMode::Constant(q0) = self.q_mode {
            if q0 <= 0.0 {
                return Err(PhysicsError::NonPositiveQ(q0));
            }
        }
        Ok(())
    }
}

/// Value and first two derivatives of the truncated double well at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialEval {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Truncated double well: F = (phi^2-1)^2/4 inside [-r, r], with a C^1
/// quadratic extension of constant curvature F''(+-r) outside.
pub fn f_trunc(phi: f64, r: f64) -> PotentialEval {
    debug_assert!(r >= 1.0);
    if phi.abs() <= r {
        let q = phi * phi - 1.0;
        PotentialEval {
            value: 0.25 * q * q,
            d1: phi * q,
            d2: 3.0 * phi * phi - 1.0,
        }
    } else {
        let s = phi.signum();
        let q = r * r - 1.0;
        let fr = 0.25 * q * q;
        let dfr = r * q; // F'(r), sign-adjusted below
        let l = 3.0 * r * r - 1.0;
        let d = phi.abs() - r;
        PotentialEval {
            value: fr + dfr * d + 0.5 * l * d * d,
            d1: s * (dfr + l * d),
            d2: l,
        }
    }
}

/// Interface-localized proliferation function P(phi) = k (phi^2-1)^2 on
/// [-1, 1], zero outside.
pub fn proliferation(phi: f64, k: f64) -> f64 {
    if (-1.0..=1.0).contains(&phi) {
        let q = phi * phi - 1.0;
        k * q * q
    } else {
        0.0
    }
}

/// Restricted diffusivity of Y1 across the membrane: the reciprocal sum of
/// interface and bulk resistances, with phi clamped to the physical range.
pub fn d1_of(phi: f64, q: f64, p: &PhysParams) -> Result<f64, PhysicsError> {
    if q <= 0.0 {
        return Err(PhysicsError::NonPositiveQ(q));
    }
    let ph = phi.clamp(-1.0, 1.0);
    let w = ph * ph - 1.0;
    let inv = w * w / (q * p.eps) + (1.0 - ph) / (2.0 * p.d1_minus) + (1.0 + ph) / (2.0 * p.d1_plus);
    Ok(1.0 / inv)
}

/// Phase chemical potential of the time-discrete scheme:
/// -eps^2 div(lambda^n grad phi^{n+1}) + lambda^n F'(phi^n)
/// + lambda^n S (phi^{n+1}-phi^n)
/// + 2 phi^{n+1} [M(c2^{n+1}+1) + M(c3^{n+1}+1)]
/// - ((phi^n)^3 - phi^n) [N(c2^n+1) + N(c3^n+1)]
/// + S (phi^{n+1}-phi^n) [N(c2^n+1) + N(c3^n+1)].
#[allow(clippy::too_many_arguments)]
pub fn mu_phi_scheme(
    phi_new: &ScalarField,
    phi_old: &ScalarField,
    c2_new: &ScalarField,
    c3_new: &ScalarField,
    c2_old: &ScalarField,
    c3_old: &ScalarField,
    p: &PhysParams,
    g: &GridSpec,
) -> Result<ScalarField, PhysicsError> {
    let mut lam = ScalarField::zeros(g);
    for (l, &c3) in lam.data.iter_mut().zip(c3_old.data.iter()) {
        *l = p.lambda_of(c3);
    }
    let ell = mesh::div_coeff_grad(&lam, phi_new, g)?;
    let mut out = ScalarField::zeros(g);
    let e2 = p.eps * p.eps;
    for k in 0..out.data.len() {
        let pn = phi_old.data[k];
        let pn1 = phi_new.data[k];
        let dphi = pn1 - pn;
        let pen = p.m_pen * (c2_new.data[k] + 1.0) + p.m_pen * (c3_new.data[k] + 1.0);
        let adh = p.n_adh * (c2_old.data[k] + 1.0) + p.n_adh * (c3_old.data[k] + 1.0);
        out.data[k] = -e2 * ell.data[k]
            + lam.data[k] * f_trunc(pn, p.trunc_radius).d1
            + lam.data[k] * p.s_stab * dphi
            + 2.0 * pn1 * pen
            - (pn * pn * pn - pn) * adh
            + p.s_stab * dphi * adh;
    }
    Ok(out)
}

/// mu1 = ln(c1^{n+1} + 1).
pub fn mu1_scheme(c1_new: &ScalarField) -> Result<ScalarField, PhysicsError> {
    let mut out = c1_new.clone();
    for v in out.data.iter_mut() {
        let arg = *v + 1.0;
        if arg <= 0.0 {
            return Err(PhysicsError::LogDomain(arg));
        }
        *v = arg.ln();
    }
    Ok(out)
}

/// mu2 = ln(c2^{n+1}+1) + M (phi^n)^2 - (N/4)((phi^{n+1})^2-1)^2.
pub fn mu2_scheme(
    c2_new: &ScalarField,
    phi_old: &ScalarField,
    phi_new: &ScalarField,
    p: &PhysParams,
) -> Result<ScalarField, PhysicsError> {
    let mut out = c2_new.clone();
    for k in 0..out.data.len() {
        let arg = c2_new.data[k] + 1.0;
        if arg <= 0.0 {
            return Err(PhysicsError::LogDomain(arg));
        }
        let pn = phi_old.data[k];
        let pn1 = phi_new.data[k];
        let w = pn1 * pn1 - 1.0;
        out.data[k] = arg.ln() + p.m_pen * pn * pn - 0.25 * p.n_adh * w * w;
    }
    Ok(out)
}

/// mu3 = Lambda (F(phi^{n+1}) + (eps^2/2)|grad phi^{n+1}|^2) + ln(c3^{n+1}+1)
/// + M (phi^n)^2 - (N/4)((phi^{n+1})^2-1)^2, with Lambda the lambda difference
/// quotient between the c3 levels.
pub fn mu3_scheme(
    c3_new: &ScalarField,
    c3_old: &ScalarField,
    phi_new: &ScalarField,
    phi_old: &ScalarField,
    p: &PhysParams,
    g: &GridSpec,
) -> Result<ScalarField, PhysicsError> {
    let gsq = mesh::grad_sq_center(phi_new, g)?;
    let e2h = 0.5 * p.eps * p.eps;
    let mut out = c3_new.clone();
    for k in 0..out.data.len() {
        let arg = c3_new.data[k] + 1.0;
        if arg <= 0.0 {
            return Err(PhysicsError::LogDomain(arg));
        }
        let lam_q = p.lambda_quotient(c3_new.data[k], c3_old.data[k]);
        let pn = phi_old.data[k];
        let pn1 = phi_new.data[k];
        let w = pn1 * pn1 - 1.0;
        out.data[k] = lam_q * (f_trunc(pn1, p.trunc_radius).value + e2h * gsq.data[k])
            + arg.ln()
            + p.m_pen * pn * pn
            - 0.25 * p.n_adh * w * w;
    }
    Ok(out)
}

/// Net reaction rate field P(phi^n) (a1 mu1 + a2 mu2 - a3 mu3); the species
/// equations consume it with weights -a1, -a2, +a3.
pub fn reaction_rate(
    phi_old: &ScalarField,
    mu1: &ScalarField,
    mu2: &ScalarField,
    mu3: &ScalarField,
    p: &PhysParams,
) -> ScalarField {
    let mut out = phi_old.clone();
    for k in 0..out.data.len() {
        let aff = p.a1 * mu1.data[k] + p.a2 * mu2.data[k] - p.a3 * mu3.data[k];
        out.data[k] = proliferation(phi_old.data[k], p.k_rate) * aff;
    }
    out
}

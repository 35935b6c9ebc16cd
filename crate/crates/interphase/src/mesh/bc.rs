//! Per-side boundary plans layered on top of the grid axis families.
//!
//! The grid itself only distinguishes periodic and wall axes. A
//! [`BoundaryPlan`] refines wall sides with scenario-level conditions:
//! velocity inflow profiles, pressure outlets and scalar Dirichlet segments.

use super::{AxisBc, GridSpec, MeshError};
use serde::{Deserialize, Serialize};

/// Domain side, in (left, right, bottom, top) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left = 0,
    Right = 1,
    Bottom = 2,
    Top = 3,
}

pub const SIDES: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

impl Side {
    pub fn is_x(self) -> bool {
        matches!(self, Side::Left | Side::Right)
    }
}

/// Boundary value profile along a side; the argument is the along-side
/// coordinate (y for left/right, x for bottom/top).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    Constant(f64),
    /// scale * (t - lo) * (hi - t) inside [lo, hi], zero outside.
    Parabolic { lo: f64, hi: f64, scale: f64 },
    /// Fixed value on [lo, hi]; outside the segment the side falls back to
    /// the homogeneous Neumann condition.
    Segment { lo: f64, hi: f64, value: f64 },
}

impl Profile {
    /// Dirichlet value at coordinate `t`, or None where the profile leaves
    /// the underlying Neumann condition in place.
    pub fn eval(&self, t: f64) -> Option<f64> {
        match *self {
            Profile::Constant(v) => Some(v),
            Profile::Parabolic { lo, hi, scale } => {
                if t >= lo && t <= hi {
                    Some(scale * (t - lo) * (hi - t))
                } else {
                    Some(0.0)
                }
            }
            Profile::Segment { lo, hi, value } => {
                if t >= lo && t <= hi {
                    Some(value)
                } else {
                    None
                }
            }
        }
    }
}

/// Condition of one field on one side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SideCondition {
    Periodic,
    NeumannZero,
    /// For velocity: normal component profile (tangential no-slip).
    /// For scalars: boundary-face value.
    Dirichlet(Profile),
    NoSlip,
    /// Open outlet: fixed boundary pressure, zero-gradient velocity,
    /// Neumann scalars.
    PressureOutlet(f64),
}

/// Per-side, per-field boundary conditions for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPlan {
    pub velocity: [SideCondition; 4],
    pub phi: [SideCondition; 4],
    pub c: [[SideCondition; 4]; 3],
}

impl BoundaryPlan {
    /// Closed-domain plan implied by the grid axis families alone.
    pub fn closed(g: &GridSpec) -> Self {
        let mut velocity = [SideCondition::NoSlip; 4];
        let mut scalar = [SideCondition::NeumannZero; 4];
        for side in SIDES {
            let axis = if side.is_x() { g.bc_x } else { g.bc_y };
            if axis == AxisBc::Periodic {
                velocity[side as usize] = SideCondition::Periodic;
                scalar[side as usize] = SideCondition::Periodic;
            }
        }
        Self { velocity, phi: scalar, c: [scalar, scalar, scalar] }
    }

    /// True when no side lets mass or momentum through (mass/energy law
    /// assertions only apply then).
    pub fn is_closed(&self) -> bool {
        self.velocity.iter().all(|v| matches!(v, SideCondition::Periodic | SideCondition::NoSlip))
            && self
                .c
                .iter()
                .flatten()
                .all(|s| matches!(s, SideCondition::Periodic | SideCondition::NeumannZero))
    }

    pub fn validate(&self, g: &GridSpec) -> Result<(), MeshError> {
        for side in SIDES {
            let axis = if side.is_x() { g.bc_x } else { g.bc_y };
            let fields: Vec<(&str, &SideCondition)> = vec![
                ("velocity", &self.velocity[side as usize]),
                ("phi", &self.phi[side as usize]),
                ("c1", &self.c[0][side as usize]),
                ("c2", &self.c[1][side as usize]),
                ("c3", &self.c[2][side as usize]),
            ];
            for (name, cond) in fields {
                let periodic = matches!(cond, SideCondition::Periodic);
                if (axis == AxisBc::Periodic) != periodic {
                    return Err(MeshError::InvalidGrid(format!(
                        "{name} on side {side:?} must {}be periodic to match the grid axis",
                        if axis == AxisBc::Periodic { "" } else { "not " }
                    )));
                }
            }
            match &self.velocity[side as usize] {
                SideCondition::NeumannZero => {
                    return Err(MeshError::InvalidGrid(format!(
                        "velocity on side {side:?}: Neumann-zero is not a velocity condition"
                    )));
                }
                SideCondition::Dirichlet(p) => {
                    // inflow profiles must vanish at the wall endpoints
                    let (lo, hi) = if side.is_x() { (0.0, g.ly) } else { (0.0, g.lx) };
                    for t in [lo, hi] {
                        if let Some(v) = p.eval(t) {
                            if v.abs() > 1e-12 {
                                return Err(MeshError::InvalidGrid(format!(
                                    "inflow profile on side {side:?} does not vanish at wall endpoint {t}"
                                )));
                            }
                        }
                    }
                }
                _ => {}
            }
            for (name, cond) in [
                ("phi", &self.phi[side as usize]),
                ("c1", &self.c[0][side as usize]),
                ("c2", &self.c[1][side as usize]),
                ("c3", &self.c[2][side as usize]),
            ] {
                if matches!(cond, SideCondition::NoSlip | SideCondition::PressureOutlet(_)) {
                    return Err(MeshError::InvalidGrid(format!(
                        "{name} on side {side:?}: velocity-only condition on a scalar field"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_plan_matches_axes() {
        let g = GridSpec::new(8, 8, 1.0, 1.0, AxisBc::Periodic, AxisBc::Wall).unwrap();
        let p = BoundaryPlan::closed(&g);
        p.validate(&g).unwrap();
        assert!(p.is_closed());
        assert_eq!(p.velocity[Side::Left as usize], SideCondition::Periodic);
        assert_eq!(p.velocity[Side::Top as usize], SideCondition::NoSlip);
        assert_eq!(p.c[0][Side::Bottom as usize], SideCondition::NeumannZero);
    }

    #[test]
    fn periodic_axis_rejects_dirichlet_override() {
        let g = GridSpec::new(8, 8, 1.0, 1.0, AxisBc::Periodic, AxisBc::Wall).unwrap();
        let mut p = BoundaryPlan::closed(&g);
        p.c[0][Side::Left as usize] = SideCondition::Dirichlet(Profile::Constant(2.0));
        assert!(p.validate(&g).is_err());
    }

    #[test]
    fn inflow_profile_must_vanish_at_walls() {
        let g = GridSpec::new(8, 8, 1.0, 1.0, AxisBc::Wall, AxisBc::Wall).unwrap();
        let mut p = BoundaryPlan::closed(&g);
        p.velocity[Side::Left as usize] = SideCondition::Dirichlet(Profile::Constant(1.0));
        assert!(p.validate(&g).is_err());
        p.velocity[Side::Left as usize] = SideCondition::Dirichlet(Profile::Parabolic {
            lo: 0.4,
            hi: 0.6,
            scale: 25.0,
        });
        p.validate(&g).unwrap();
        assert!(!p.is_closed());
    }

    #[test]
    fn parabolic_profile_values() {
        let p = Profile::Parabolic { lo: 0.8, hi: 1.2, scale: 25.0 };
        assert_eq!(p.eval(0.5), Some(0.0));
        let v = p.eval(1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-14); // 25 * 0.2 * 0.2
        let s = Profile::Segment { lo: 0.8, hi: 1.2, value: 2.0 };
        assert_eq!(s.eval(1.0), Some(2.0));
        assert_eq!(s.eval(0.1), None);
    }
}

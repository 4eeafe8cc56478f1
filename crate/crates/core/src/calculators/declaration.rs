use std::fmt;

use serde::{Deserialize, Serialize};

use super::CatalogError;
use crate::dynamics::{central_force, reflect, Axis, AxisLine};
use crate::vec2::Vec2;

/// Model families an observer can fit from output samples alone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    FreeMotion,
    Harmonic,
    CentralForce,
}

impl Family {
    /// Fixed order used for fitting and for parsimony tie-breaks.
    pub const ALL: [Family; 3] = [Family::FreeMotion, Family::Harmonic, Family::CentralForce];

    pub fn parameter_count(self) -> usize {
        match self {
            Family::FreeMotion => 0,
            Family::Harmonic => 1,
            Family::CentralForce => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::FreeMotion => "FreeMotion",
            Family::Harmonic => "Harmonic",
            Family::CentralForce => "CentralForce",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The physical system the manufacturer claims the calculator simulates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum DeclaredModel {
    FreeMotion,
    FreeMotionBounded {
        side: f64,
    },
    Harmonic {
        omega: f64,
    },
    CentralForce {
        k: f64,
        charge: f64,
        particle_mass: f64,
        #[serde(default)]
        center: Vec2<f64>,
    },
}

impl DeclaredModel {
    pub fn family(&self) -> Family {
        match self {
            DeclaredModel::FreeMotion | DeclaredModel::FreeMotionBounded { .. } => Family::FreeMotion,
            DeclaredModel::Harmonic { .. } => Family::Harmonic,
            DeclaredModel::CentralForce { .. } => Family::CentralForce,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DeclaredModel::FreeMotion => "FreeMotion",
            DeclaredModel::FreeMotionBounded { .. } => "FreeMotionBounded",
            DeclaredModel::Harmonic { .. } => "Harmonic",
            DeclaredModel::CentralForce { .. } => "CentralForce",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Declaration {
    pub model: DeclaredModel,
    pub declared_dof_count: usize,
    #[serde(default)]
    pub declared_constraints: Vec<AxisLine<f64>>,
    #[serde(default)]
    pub declared_output_dofs: Vec<String>,
    /// Inertial mass of the declared output body.
    #[serde(default = "one")]
    pub declared_mass: f64,
}

fn one() -> f64 {
    1.0
}

impl Declaration {
    pub fn new(model: DeclaredModel, declared_output_dofs: Vec<String>) -> Result<Self, CatalogError> {
        let declared_constraints = match &model {
            DeclaredModel::FreeMotionBounded { side } => square_walls(*side),
            _ => Vec::new(),
        };
        let declared_mass = match &model {
            DeclaredModel::CentralForce { particle_mass, .. } => *particle_mass,
            _ => 1.0,
        };
        let d = Self {
            model,
            declared_dof_count: declared_output_dofs.len(),
            declared_constraints,
            declared_output_dofs,
            declared_mass,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.declared_mass = mass;
        self
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        let bad = |m: &str| Err(CatalogError::Declaration(m.to_string()));
        if self.declared_dof_count < 1 {
            return bad("declared dof count must be >= 1");
        }
        if !(self.declared_mass > 0.0) {
            return bad("declared mass must be > 0");
        }
        match &self.model {
            DeclaredModel::FreeMotion => {}
            DeclaredModel::FreeMotionBounded { side } => {
                if !(*side > 0.0) {
                    return bad("bounded free motion needs side > 0");
                }
            }
            DeclaredModel::Harmonic { omega } => {
                if !(*omega > 0.0) {
                    return bad("harmonic omega must be > 0");
                }
            }
            DeclaredModel::CentralForce { k, charge, particle_mass, center } => {
                if !(*k > 0.0 && *charge > 0.0 && *particle_mass > 0.0) {
                    return bad("central-force k, charge and particle mass must all be > 0");
                }
                if !center.is_finite() {
                    return bad("central-force center must be finite");
                }
            }
        }
        Ok(())
    }

    /// Acceleration the declared system predicts for an output body at `pos`
    /// pushed by `applied`.
    pub fn declared_acceleration(
        &self,
        pos: Vec2<f64>,
        applied: Vec2<f64>,
        mass: f64,
    ) -> Result<Vec2<f64>, CatalogError> {
        if !(mass > 0.0) {
            return Err(CatalogError::Declaration("mass must be > 0".into()));
        }
        Ok(match &self.model {
            DeclaredModel::FreeMotion | DeclaredModel::FreeMotionBounded { .. } => applied / mass,
            DeclaredModel::Harmonic { omega } => -pos * (omega * omega) + applied / mass,
            DeclaredModel::CentralForce { k, charge, particle_mass, center } => {
                let f = central_force(*k, *charge, pos - *center)?;
                (f + applied) / *particle_mass
            }
        })
    }

    /// Velocity the declared constraints impose when a body at `pos` moving
    /// with `vel` reaches a declared wall; `None` when no wall is touched.
    pub fn declared_reflection(&self, pos: Vec2<f64>, vel: Vec2<f64>, tolerance: f64) -> Option<Vec2<f64>> {
        let mut out = vel;
        let mut touched = false;
        for wall in &self.declared_constraints {
            let d = wall.signed_distance(pos);
            if d.abs() <= tolerance {
                let inward = self.inward_normal(wall);
                if out.dot(inward) < 0.0 {
                    out = reflect(out, inward).ok()?;
                    touched = true;
                }
            }
        }
        touched.then_some(out)
    }

    fn inward_normal(&self, wall: &AxisLine<f64>) -> Vec2<f64> {
        let center = self
            .declared_constraints
            .iter()
            .filter(|w| w.axis == wall.axis)
            .map(|w| w.offset)
            .sum::<f64>()
            / self.declared_constraints.iter().filter(|w| w.axis == wall.axis).count() as f64;
        let sign = if wall.offset > center { -1.0 } else { 1.0 };
        wall.axis.unit::<f64>() * sign
    }

    /// `k a^2 / m_p` for central-force declarations.
    pub fn central_coefficient(&self) -> Option<f64> {
        match &self.model {
            DeclaredModel::CentralForce { k, charge, particle_mass, .. } => {
                Some(k * charge * charge / particle_mass)
            }
            _ => None,
        }
    }
}

/// The four walls `x = ±side/2`, `y = ±side/2`.
pub fn square_walls(side: f64) -> Vec<AxisLine<f64>> {
    let h = side / 2.0;
    vec![
        AxisLine::new(Axis::X, -h),
        AxisLine::new(Axis::X, h),
        AxisLine::new(Axis::Y, -h),
        AxisLine::new(Axis::Y, h),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    type V = Vec2<f64>;

    fn outputs() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    #[test]
    fn free_motion_is_newton() {
        let d = Declaration::new(DeclaredModel::FreeMotion, outputs()).unwrap();
        let a = d.declared_acceleration(V::new(3.0, 1.0), V::new(0.5, 0.0), 1.0).unwrap();
        assert_eq!(a, V::new(0.5, 0.0));
    }

    #[test]
    fn harmonic_restoring_acceleration() {
        let d = Declaration::new(DeclaredModel::Harmonic { omega: 2.0 }, outputs()).unwrap();
        let a = d.declared_acceleration(V::new(1.0, 0.0), V::zero(), 1.0).unwrap();
        assert_eq!(a, V::new(-4.0, 0.0));
    }

    #[test]
    fn central_force_acceleration() {
        let model = DeclaredModel::CentralForce { k: 1.0, charge: 1.0, particle_mass: 1.0, center: V::zero() };
        let d = Declaration::new(model, outputs()).unwrap();
        let a = d.declared_acceleration(V::new(2.0, 0.0), V::zero(), 1.0).unwrap();
        assert_eq!(a, V::new(-0.25, 0.0));
        assert!(d.declared_acceleration(V::zero(), V::zero(), 1.0).is_err());
        assert_eq!(d.central_coefficient(), Some(1.0));
    }

    #[test]
    fn bounded_declaration_reflects_at_walls() {
        let d = Declaration::new(DeclaredModel::FreeMotionBounded { side: 10.0 }, outputs()).unwrap();
        assert_eq!(d.declared_constraints.len(), 4);
        let v = d.declared_reflection(V::new(5.0, 0.0), V::new(1.0, 0.3), 1e-3).unwrap();
        assert_eq!(v, V::new(-1.0, 0.3));
        // moving away from the wall: nothing to do
        assert!(d.declared_reflection(V::new(5.0, 0.0), V::new(-1.0, 0.3), 1e-3).is_none());
        assert!(d.declared_reflection(V::new(0.0, 0.0), V::new(1.0, 0.3), 1e-3).is_none());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let model = DeclaredModel::CentralForce { k: 0.0, charge: 1.0, particle_mass: 1.0, center: V::zero() };
        assert!(Declaration::new(model, outputs()).is_err());
        assert!(Declaration::new(DeclaredModel::FreeMotion, vec![]).is_err());
        assert!(Declaration::new(DeclaredModel::Harmonic { omega: -1.0 }, outputs()).is_err());
    }

    #[test]
    fn json_shape_is_tagged_by_family() {
        let d = Declaration::new(DeclaredModel::Harmonic { omega: 1.0 }, outputs()).unwrap();
        let s = serde_json::to_string(&d.model).unwrap();
        assert_eq!(s, r#"{"family":"Harmonic","omega":1.0}"#);
    }
}

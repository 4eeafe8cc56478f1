use crate::dynamics::DynamicsError;
use crate::scalar::Real;
use crate::vec2::Vec2;

fn check_unit<T: Real>(normal: Vec2<T>) -> Result<(), DynamicsError> {
    let n = normal.norm();
    if !normal.is_finite() || n == T::zero() {
        return Err(DynamicsError::InvalidArgument(
            "collision normal must be a non-zero unit vector".into(),
        ));
    }
    if (n - T::one()).abs() > T::lit(1e-6) {
        return Err(DynamicsError::InvalidArgument(format!(
            "collision normal must have unit length, got |n| = {n}"
        )));
    }
    Ok(())
}

/// Specular reflection: the normal component is negated, the tangential one kept.
pub fn reflect<T: Real>(vel: Vec2<T>, wall_normal: Vec2<T>) -> Result<Vec2<T>, DynamicsError> {
    check_unit(wall_normal)?;
    let vn = vel.dot(wall_normal);
    Ok(vel - wall_normal * (T::two() * vn))
}

/// Instantaneous elastic collision of two disks along `normal`.
///
/// Only the components along the normal change; the 1D elastic result is
/// applied to them, so total momentum and kinetic energy are conserved.
pub fn collide_disks<T: Real>(
    m1: T,
    v1: Vec2<T>,
    m2: T,
    v2: Vec2<T>,
    normal: Vec2<T>,
) -> Result<(Vec2<T>, Vec2<T>), DynamicsError> {
    if !(m1 > T::zero() && m2 > T::zero()) {
        return Err(DynamicsError::InvalidArgument(format!(
            "collision masses must be positive, got {m1} and {m2}"
        )));
    }
    check_unit(normal)?;
    let u1 = v1.dot(normal);
    let u2 = v2.dot(normal);
    let total = m1 + m2;
    let u1_out = ((m1 - m2) * u1 + T::two() * m2 * u2) / total;
    let u2_out = ((m2 - m1) * u2 + T::two() * m1 * u1) / total;
    Ok((
        v1 + normal * (u1_out - u1),
        v2 + normal * (u2_out - u2),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type V = Vec2<f64>;

    #[test]
    fn reflect_examples() {
        assert_eq!(reflect(V::new(1.0, -2.0), V::new(0.0, 1.0)).unwrap(), V::new(1.0, 2.0));
        assert_eq!(reflect(V::new(3.0, 0.0), V::new(1.0, 0.0)).unwrap(), V::new(-3.0, 0.0));
    }

    #[test]
    fn reflect_rejects_degenerate_normal() {
        assert!(reflect(V::new(1.0, 0.0), V::zero()).is_err());
        assert!(reflect(V::new(1.0, 0.0), V::new(2.0, 0.0)).is_err());
    }

    #[test]
    fn equal_masses_head_on_exchange() {
        let (a, b) =
            collide_disks(1.0, V::new(1.0, 0.0), 1.0, V::new(-1.0, 0.0), V::new(1.0, 0.0)).unwrap();
        assert_eq!(a, V::new(-1.0, 0.0));
        assert_eq!(b, V::new(1.0, 0.0));
    }

    #[test]
    fn heavy_partner_acts_as_wall() {
        let v1 = V::new(0.6, -0.8);
        let n = V::new(1.0, 0.0);
        let (a, _) = collide_disks(1.0, v1, 1e9, V::zero(), n).unwrap();
        let wall = reflect(v1, n).unwrap();
        assert!((a - wall).norm() <= 1e-6 * wall.norm());
    }

    #[test]
    fn unequal_masses_match_one_dimensional_solution() {
        // 1D elastic collision solved from momentum + energy balance:
        // u1' = (m1 - m2)/(m1 + m2) u1 = -1, u2' = 2 m1/(m1 + m2) u1 = 1.
        let (a, b) =
            collide_disks(1.0, V::new(2.0, 1.0), 3.0, V::zero(), V::new(1.0, 0.0)).unwrap();
        assert_eq!(a, V::new(-1.0, 1.0));
        assert_eq!(b, V::new(1.0, 0.0));
        let p_before = V::new(2.0, 1.0);
        let p_after = a + b * 3.0;
        assert_eq!(p_before, p_after);
        let e_before = 0.5 * 5.0;
        let e_after = 0.5 * a.norm_squared() + 0.5 * 3.0 * b.norm_squared();
        assert_eq!(e_before, e_after);
    }

    #[test]
    fn collide_rejects_bad_input() {
        assert!(collide_disks(0.0, V::zero(), 1.0, V::zero(), V::new(1.0, 0.0)).is_err());
        assert!(collide_disks(1.0, V::zero(), 1.0, V::zero(), V::zero()).is_err());
    }

    proptest! {
        #[test]
        fn reflection_preserves_speed(vx in -1e3f64..1e3, vy in -1e3f64..1e3, angle in 0.0f64..6.3) {
            let v = V::new(vx, vy);
            let n = V::from_polar(1.0, angle);
            let r = reflect(v, n).unwrap();
            prop_assert!((r.norm() - v.norm()).abs() <= 4.0 * f64::EPSILON * v.norm().max(1.0));
        }

        #[test]
        fn collision_conserves_momentum_and_energy(
            m1 in 0.1f64..10.0, m2 in 0.1f64..10.0,
            v1x in -5.0f64..5.0, v1y in -5.0f64..5.0,
            v2x in -5.0f64..5.0, v2y in -5.0f64..5.0,
            angle in 0.0f64..6.3,
        ) {
            let (v1, v2) = (V::new(v1x, v1y), V::new(v2x, v2y));
            let n = V::from_polar(1.0, angle);
            let (a, b) = collide_disks(m1, v1, m2, v2, n).unwrap();
            let p0 = v1 * m1 + v2 * m2;
            let p1 = a * m1 + b * m2;
            prop_assert!((p0 - p1).norm() <= 1e-12 * (1.0 + p0.norm()));
            let e0 = m1 * v1.norm_squared() + m2 * v2.norm_squared();
            let e1 = m1 * a.norm_squared() + m2 * b.norm_squared();
            prop_assert!((e0 - e1).abs() <= 1e-12 * (1.0 + e0));
            // tangential parts untouched
            let t = n.perp();
            prop_assert!((a.dot(t) - v1.dot(t)).abs() <= 1e-12 * (1.0 + v1.norm()));
        }
    }
}

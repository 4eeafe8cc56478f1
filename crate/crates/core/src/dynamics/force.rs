use crate::dynamics::DynamicsError;
use crate::scalar::Real;
use crate::vec2::Vec2;

/// Distances below this are rejected by [`central_force`].
pub const SINGULARITY_FLOOR: f64 = 1e-9;

/// Inverse-square central force `k a^2 / r^2`, attractive toward the center.
///
/// `r_vec` points from the center of symmetry to the particle.
pub fn central_force<T: Real>(k: T, charge: T, r_vec: Vec2<T>) -> Result<Vec2<T>, DynamicsError> {
    let r = r_vec.norm();
    if !r.is_finite() || r < T::lit(SINGULARITY_FLOOR) {
        return Err(DynamicsError::Singular { distance: r.as_f64() });
    }
    let magnitude = k * charge * charge / (r * r);
    Ok(-r_vec * (magnitude / r))
}

/// Hooke force on the attached end of a spring.
pub fn spring_force<T: Real>(stiffness: T, rest_length: T, anchor: Vec2<T>, pos: Vec2<T>) -> Vec2<T> {
    let d = pos - anchor;
    let len = d.norm();
    if len == T::zero() {
        return Vec2::zero();
    }
    -d * (stiffness * (len - rest_length) / len)
}

#[cfg(test)]
mod tests {
    use super::*;

    type V = Vec2<f64>;

    #[test]
    fn inverse_square_examples() {
        assert_eq!(central_force(1.0, 1.0, V::new(2.0, 0.0)).unwrap(), V::new(-0.25, 0.0));
        assert_eq!(central_force(2.0, 1.0, V::new(0.0, 1.0)).unwrap(), V::new(0.0, -2.0));
    }

    #[test]
    fn charge_enters_squared() {
        let r = V::new(1.5, -0.7);
        let f1 = central_force(1.3, 1.0, r).unwrap().norm();
        let f2 = central_force(1.3, 2.0, r).unwrap().norm();
        assert!((f2 / f1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn singular_distance_is_an_error() {
        assert!(central_force(1.0, 1.0, V::new(1e-10, 0.0)).is_err());
        assert!(central_force(1.0, 1.0, V::zero()).is_err());
    }

    #[test]
    fn spring_pulls_back_to_rest_length() {
        let f = spring_force(2.0, 1.0, V::zero(), V::new(1.5, 0.0));
        assert_eq!(f, V::new(-1.0, 0.0));
        let f = spring_force(2.0, 1.0, V::zero(), V::new(0.0, 0.5));
        assert_eq!(f, V::new(0.0, 1.0));
    }
}

use serde::{Deserialize, Serialize};

use crate::vec2::Vec2;

/// Construction parameters shared by the catalog.
///
/// Every field has a documented default; each calculator reads only the
/// fields it needs. Reference scales: mass 1, box side 10, speeds ~1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatalogParams {
    /// Box side `l`; walls constrain disk centers to `|x|, |y| <= l/2`.
    pub side: f64,
    /// Mass of every disk (and of the rotor disk).
    pub mass: f64,
    /// Radius of the disks that can collide with each other.
    pub disk_radius: f64,
    /// Initial state of the visible disk (A, B, F, G).
    pub pos: Vec2<f64>,
    pub vel: Vec2<f64>,
    /// Initial state of the second disk (B, G).
    pub second_pos: Vec2<f64>,
    pub second_vel: Vec2<f64>,
    /// Harmonic angular frequency of the spring-mounted disk (C, D).
    pub omega: f64,
    /// Initial displacement of the spring-mounted disk along x (C, D).
    pub amplitude: f64,
    /// Height of the horizontal dividing wall (D).
    pub partition_y: f64,
    /// Initial state of the disk behind the dividing wall (D).
    pub hidden_pos: Vec2<f64>,
    pub hidden_vel: Vec2<f64>,
    /// Declared central-force constants (E, H).
    pub k: f64,
    pub charge: f64,
    pub particle_mass: f64,
    /// Distance of the light marker from the rotor pivot (E, H).
    pub orbit_radius: f64,
    pub pivot: Vec2<f64>,
    /// Rack speed, reversal half-period and track height (X).
    pub gear_speed: f64,
    pub gear_half_period: f64,
    pub gear_phase: f64,
    pub gear_track_y: f64,
    pub gear_start_x: f64,
    pub gear_wheel_rate: f64,
    /// Viscous drag; zero means frictionless.
    pub drag: f64,
}

impl Default for CatalogParams {
    fn default() -> Self {
        Self {
            side: 10.0,
            mass: 1.0,
            disk_radius: 0.5,
            pos: Vec2::new(0.0, 0.0),
            vel: Vec2::new(1.0, 0.7),
            second_pos: Vec2::new(2.5, -2.0),
            second_vel: Vec2::new(-0.6, 0.9),
            omega: 1.0,
            amplitude: 3.0,
            partition_y: 2.0,
            hidden_pos: Vec2::new(1.0, 3.5),
            hidden_vel: Vec2::new(0.8, 0.6),
            k: 1.0,
            charge: 1.0,
            particle_mass: 1.0,
            orbit_radius: 2.0,
            pivot: Vec2::new(0.0, 0.0),
            gear_speed: 1.0,
            gear_half_period: 4.0,
            gear_phase: 0.0,
            gear_track_y: 1.0,
            gear_start_x: -2.0,
            gear_wheel_rate: 0.5,
            drag: 0.0,
        }
    }
}

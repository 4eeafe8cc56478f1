//! Deterministic planar point-mass and rotor mechanics.
//!
//! Integration is velocity Verlet (kick, drift, kick) on a fixed step.
//! Wall contacts are resolved by folding the drift at the crossing time and
//! disk-disk contacts by rewinding the pair to the touching instant.

mod collision;
mod force;
mod world;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;
use crate::vec2::Vec2;

pub use collision::{collide_disks, reflect};
pub use force::{central_force, spring_force, SINGULARITY_FLOOR};
pub use world::{Contact, ContactKind, World};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("central force evaluated at distance {distance:e}, below the singularity floor")]
    Singular { distance: f64 },
    #[error("non-finite state at t = {time}: {detail}")]
    NonFinite { time: f64, detail: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn component<T: Real>(self, v: Vec2<T>) -> T {
        match self {
            Axis::X => v.x,
            Axis::Y => v.y,
        }
    }

    pub fn other(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }

    pub fn unit<T: Real>(self) -> Vec2<T> {
        match self {
            Axis::X => Vec2::new(T::one(), T::zero()),
            Axis::Y => Vec2::new(T::zero(), T::one()),
        }
    }
}

/// Axis-aligned line: `x = offset` for [`Axis::X`], `y = offset` for [`Axis::Y`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisLine<T> {
    pub axis: Axis,
    pub offset: T,
}

impl<T: Real> AxisLine<T> {
    pub fn new(axis: Axis, offset: T) -> Self {
        Self { axis, offset }
    }

    pub fn signed_distance(&self, p: Vec2<T>) -> T {
        self.axis.component(p) - self.offset
    }

    pub fn cast<U: Real>(&self) -> AxisLine<U> {
        AxisLine::new(self.axis, U::lit(self.offset.as_f64()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BodyId {
    Disk(usize),
    /// Light marker fixed on a rotor; forces act at the marker position.
    Marker(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk<T> {
    pub mass: T,
    pub radius: T,
    pub pos: Vec2<T>,
    pub vel: Vec2<T>,
}

impl<T: Real> Disk<T> {
    pub fn new(mass: T, radius: T, pos: Vec2<T>, vel: Vec2<T>) -> Self {
        Self { mass, radius, pos, vel }
    }

    pub fn kinetic_energy(&self) -> T {
        T::half() * self.mass * self.vel.norm_squared()
    }
}

/// Square box constraining disk centers to `|x - cx| <= side/2`, `|y - cy| <= side/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallBox<T> {
    pub side: T,
    pub center: Vec2<T>,
}

impl<T: Real> WallBox<T> {
    pub fn new(side: T, center: Vec2<T>) -> Self {
        Self { side, center }
    }

    pub fn bounds(&self, axis: Axis) -> (T, T) {
        let c = axis.component(self.center);
        let h = self.side * T::half();
        (c - h, c + h)
    }

    pub fn lines(&self) -> [AxisLine<T>; 4] {
        let (x0, x1) = self.bounds(Axis::X);
        let (y0, y1) = self.bounds(Axis::Y);
        [
            AxisLine::new(Axis::X, x0),
            AxisLine::new(Axis::X, x1),
            AxisLine::new(Axis::Y, y0),
            AxisLine::new(Axis::Y, y1),
        ]
    }

    pub fn contains(&self, p: Vec2<T>) -> bool {
        [Axis::X, Axis::Y].iter().all(|&a| {
            let (lo, hi) = self.bounds(a);
            let v = a.component(p);
            v >= lo && v <= hi
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spring<T> {
    pub stiffness: T,
    pub rest_length: T,
    pub anchor: Vec2<T>,
    /// Index of the disk the free end is attached to.
    pub disk: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotor<T> {
    pub moment_of_inertia: T,
    pub angle: T,
    pub angular_velocity: T,
    pub marker_radius: T,
    pub pivot: Vec2<T>,
}

impl<T: Real> Rotor<T> {
    pub fn marker(&self) -> Vec2<T> {
        self.pivot + Vec2::from_polar(self.marker_radius, self.angle)
    }

    pub fn marker_velocity(&self) -> Vec2<T> {
        Vec2::new(-self.angle.sin(), self.angle.cos()) * (self.angular_velocity * self.marker_radius)
    }

    pub fn kinetic_energy(&self) -> T {
        T::half() * self.moment_of_inertia * self.angular_velocity * self.angular_velocity
    }
}

/// Kinematic rack-and-wheels drive: a massless linear element moved at
/// constant speed whose direction flips every `half_period`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GearDrive<T> {
    pub speed: T,
    pub half_period: T,
    pub phase: T,
    pub track_y: T,
    /// Position of the linear element along the track.
    pub x: T,
    pub hidden_wheel_angles: (T, T),
    pub wheel_rate: T,
    pub hidden_spring_extensions: (T, T),
}

impl<T: Real> GearDrive<T> {
    /// +1 while the first wheel is engaged, -1 while the second is.
    pub fn direction_at(&self, t: T) -> T {
        let k = ((t + self.phase) / self.half_period).floor();
        if (k % T::two()).abs() < T::half() {
            T::one()
        } else {
            -T::one()
        }
    }

    pub fn output(&self) -> Vec2<T> {
        Vec2::new(self.x, self.track_y)
    }

    fn next_switch_after(&self, t: T) -> T {
        let k = ((t + self.phase) / self.half_period).floor();
        (k + T::one()) * self.half_period - self.phase
    }

    /// Advances the element over `[t0, t0 + dt]`, splitting at switch instants.
    /// Returns the switch times crossed.
    fn advance(&mut self, t0: T, dt: T) -> Vec<T> {
        let end = t0 + dt;
        let mut t = t0;
        let mut switches = Vec::new();
        for _ in 0..64 {
            if t >= end {
                break;
            }
            let next = self.next_switch_after(t);
            let seg_end = if next < end { next } else { end };
            if seg_end <= t {
                break;
            }
            let mid = (t + seg_end) * T::half();
            self.x = self.x + self.direction_at(mid) * self.speed * (seg_end - t);
            if next < end {
                switches.push(next);
            }
            t = seg_end;
        }
        let (a, b) = self.hidden_wheel_angles;
        self.hidden_wheel_angles = (a + self.wheel_rate * dt, b - self.wheel_rate * dt);
        switches
    }
}

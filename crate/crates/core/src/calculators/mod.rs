//! Catalog of calculators: an actual world, the agreed split of its
//! coordinates into output/input/hidden, and the manufacturer's declaration.

mod declaration;
mod params;
mod partition;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use declaration::{square_walls, Declaration, DeclaredModel, Family};
pub use params::CatalogParams;
pub use partition::DofPartition;

use crate::dynamics::{
    Axis, AxisLine, BodyId, Disk, DynamicsError, GearDrive, Rotor, Spring, WallBox, World,
};
use crate::scalar::Real;
use crate::vec2::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("invalid catalog parameter: {0}")]
    InvalidParams(String),
    #[error("invalid dof partition: {0}")]
    Partition(String),
    #[error("invalid declaration: {0}")]
    Declaration(String),
    #[error("unknown calculator id `{0}`")]
    UnknownId(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CalculatorId {
    A,
    #[serde(rename = "B_full")]
    BFull,
    #[serde(rename = "B_partial")]
    BPartial,
    C,
    D,
    E,
    F,
    G,
    H,
    X,
}

impl CalculatorId {
    pub const ALL: [CalculatorId; 10] = [
        CalculatorId::A,
        CalculatorId::BFull,
        CalculatorId::BPartial,
        CalculatorId::C,
        CalculatorId::D,
        CalculatorId::E,
        CalculatorId::F,
        CalculatorId::G,
        CalculatorId::H,
        CalculatorId::X,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CalculatorId::A => "A",
            CalculatorId::BFull => "B_full",
            CalculatorId::BPartial => "B_partial",
            CalculatorId::C => "C",
            CalculatorId::D => "D",
            CalculatorId::E => "E",
            CalculatorId::F => "F",
            CalculatorId::G => "G",
            CalculatorId::H => "H",
            CalculatorId::X => "X",
        }
    }
}

impl fmt::Display for CalculatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CalculatorId {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CalculatorId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| CatalogError::UnknownId(s.to_string()))
    }
}

/// Where a named coordinate lives inside the world.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coord {
    DiskX(usize),
    DiskY(usize),
    MarkerX(usize),
    MarkerY(usize),
    RackX,
    RackY,
    WheelAngle(usize),
    SpringExtension(usize),
}

impl Coord {
    pub fn read<T: Real>(self, world: &World<T>) -> Option<T> {
        match self {
            Coord::DiskX(i) => world.disks.get(i).map(|d| d.pos.x),
            Coord::DiskY(i) => world.disks.get(i).map(|d| d.pos.y),
            Coord::MarkerX(i) => world.rotors.get(i).map(|r| r.marker().x),
            Coord::MarkerY(i) => world.rotors.get(i).map(|r| r.marker().y),
            Coord::RackX => world.gear.as_ref().map(|g| g.x),
            Coord::RackY => world.gear.as_ref().map(|g| g.track_y),
            Coord::WheelAngle(k) => world.gear.as_ref().map(|g| {
                if k == 0 {
                    g.hidden_wheel_angles.0
                } else {
                    g.hidden_wheel_angles.1
                }
            }),
            Coord::SpringExtension(k) => world.gear.as_ref().map(|g| {
                if k == 0 {
                    g.hidden_spring_extensions.0
                } else {
                    g.hidden_spring_extensions.1
                }
            }),
        }
    }
}

/// How the calculator's own dof count relates to the declared one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimulationMode {
    /// Fewer actual dofs than declared (rotor standing in for an orbit).
    Reduced,
    /// Actual system equals the declared one and everything is output.
    Staged,
    /// More actual dofs than declared; some are hidden.
    Extended,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calculator<T> {
    pub id: CalculatorId,
    pub world: World<T>,
    pub partition: DofPartition,
    bindings: Vec<(String, Coord)>,
    pub declaration: Declaration,
    /// Independent dofs of the actual machine.
    pub total_dof_count: usize,
    controller: Option<BodyId>,
}

impl<T: Real> Calculator<T> {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        id: CalculatorId,
        world: World<T>,
        bindings: Vec<(&str, Coord)>,
        output: &[&str],
        input: &[&str],
        declaration: Declaration,
        total_dof_count: usize,
        controller: Option<BodyId>,
    ) -> Result<Self, CatalogError> {
        world.validate()?;
        let all: Vec<&str> = bindings.iter().map(|(n, _)| *n).collect();
        let partition = DofPartition::new(all, output.to_vec(), input.to_vec())?;
        let bindings: Vec<(String, Coord)> =
            bindings.into_iter().map(|(n, c)| (n.to_string(), c)).collect();
        for (name, c) in &bindings {
            if c.read(&world).is_none() {
                return Err(CatalogError::Partition(format!("coordinate `{name}` does not exist")));
            }
        }
        if input.is_empty() != controller.is_none() {
            return Err(CatalogError::Partition("input dofs and controller binding disagree".into()));
        }
        if let Some(body) = controller {
            if world.body_position(body).is_none() {
                return Err(CatalogError::Partition(format!("controller body {body:?} missing")));
            }
        }
        declaration.validate()?;
        Ok(Self { id, world, partition, bindings, declaration, total_dof_count, controller })
    }

    /// Reads a named coordinate of the actual world.
    pub fn read(&self, dof: &str) -> Option<T> {
        self.bindings
            .iter()
            .find(|(n, _)| n == dof)
            .and_then(|(_, c)| c.read(&self.world))
    }

    /// Current values of the output dofs, in partition order.
    pub fn output_values(&self) -> Vec<T> {
        self.output_values_in(&self.world)
    }

    /// Output dofs read from another state of the same machine (e.g. a
    /// clone being stepped by an observer).
    pub fn output_values_in(&self, world: &World<T>) -> Vec<T> {
        self.partition
            .output()
            .iter()
            .map(|d| {
                self.coordinate(d)
                    .and_then(|c| c.read(world))
                    .expect("output dof bound at construction")
            })
            .collect()
    }

    pub fn coordinate(&self, dof: &str) -> Option<Coord> {
        self.bindings.iter().find(|(n, _)| n == dof).map(|(_, c)| *c)
    }

    /// Body the controller pushes on, when the calculator has input dofs.
    pub fn controller(&self) -> Option<BodyId> {
        self.controller
    }

    pub fn simulation_mode(&self) -> SimulationMode {
        let declared = self.declaration.declared_dof_count;
        if self.total_dof_count < declared {
            SimulationMode::Reduced
        } else if self.total_dof_count == declared && self.partition.observes_everything() {
            SimulationMode::Staged
        } else {
            SimulationMode::Extended
        }
    }
}

fn check(cond: bool, msg: &str) -> Result<(), CatalogError> {
    if cond {
        Ok(())
    } else {
        Err(CatalogError::InvalidParams(msg.to_string()))
    }
}

fn validate_params(p: &CatalogParams) -> Result<(), CatalogError> {
    let finite = [
        p.side, p.mass, p.disk_radius, p.omega, p.amplitude, p.partition_y, p.k, p.charge,
        p.particle_mass, p.orbit_radius, p.gear_speed, p.gear_half_period, p.gear_phase,
        p.gear_track_y, p.gear_start_x, p.gear_wheel_rate, p.drag,
    ]
    .iter()
    .all(|v| v.is_finite())
        && [p.pos, p.vel, p.second_pos, p.second_vel, p.hidden_pos, p.hidden_vel, p.pivot]
            .iter()
            .all(|v| v.is_finite());
    check(finite, "all parameters must be finite")?;
    check(p.side > 0.0, "side must be > 0")?;
    check(p.mass > 0.0, "mass must be > 0")?;
    check(p.disk_radius >= 0.0, "disk_radius must be >= 0")?;
    check(p.drag >= 0.0, "drag must be >= 0")?;
    Ok(())
}

fn sq<T: Real>(p: &CatalogParams) -> WallBox<T> {
    WallBox::new(T::lit(p.side), Vec2::zero())
}

fn disk<T: Real>(p: &CatalogParams, pos: Vec2<f64>, vel: Vec2<f64>) -> Disk<T> {
    Disk::new(T::lit(p.mass), T::lit(p.disk_radius), pos.cast(), vel.cast())
}

fn xy_outputs() -> Vec<String> {
    vec!["x".into(), "y".into()]
}

fn one_disk_world<T: Real>(p: &CatalogParams) -> World<T> {
    World {
        disks: vec![disk(p, p.pos, p.vel)],
        wall_box: Some(sq(p)),
        drag: T::lit(p.drag),
        ..World::default()
    }
}

fn two_disk_world<T: Real>(p: &CatalogParams) -> World<T> {
    World {
        disks: vec![disk(p, p.pos, p.vel), disk(p, p.second_pos, p.second_vel)],
        wall_box: Some(sq(p)),
        drag: T::lit(p.drag),
        ..World::default()
    }
}

fn spring_world<T: Real>(p: &CatalogParams) -> Result<World<T>, CatalogError> {
    check(p.omega > 0.0, "omega must be > 0")?;
    check(
        p.amplitude.abs() < p.side / 2.0,
        "amplitude must keep the spring-mounted disk inside the box",
    )?;
    let h = p.side / 2.0;
    // Two identical springs from opposite walls, relaxed at the center:
    // along x their stiffnesses add, so omega^2 = 2 k_s / m.
    let stiffness = T::lit(p.omega * p.omega * p.mass / 2.0);
    let rest = T::lit(h);
    Ok(World {
        disks: vec![disk(p, Vec2::new(p.amplitude, 0.0), Vec2::zero())],
        springs: vec![
            Spring { stiffness, rest_length: rest, anchor: Vec2::from_f64(-h, 0.0), disk: 0 },
            Spring { stiffness, rest_length: rest, anchor: Vec2::from_f64(h, 0.0), disk: 0 },
        ],
        wall_box: Some(sq(p)),
        drag: T::lit(p.drag),
        ..World::default()
    })
}

/// Angular rate that makes a marker at radius `r` trace the circular orbit
/// of the declared inverse-square system: `m_p w^2 r = k a^2 / r^2`.
pub fn circular_orbit_rate(k: f64, charge: f64, particle_mass: f64, r: f64) -> f64 {
    (k * charge * charge / (particle_mass * r.powi(3))).sqrt()
}

fn rotor_world<T: Real>(p: &CatalogParams) -> Result<World<T>, CatalogError> {
    check(p.orbit_radius > 0.0, "orbit_radius must be > 0")?;
    check(
        p.k > 0.0 && p.charge > 0.0 && p.particle_mass > 0.0,
        "k, charge and particle_mass must be > 0",
    )?;
    let r = p.orbit_radius;
    Ok(World {
        rotors: vec![Rotor {
            // uniform disk whose rim carries the light
            moment_of_inertia: T::lit(0.5 * p.mass * r * r),
            angle: T::zero(),
            angular_velocity: T::lit(circular_orbit_rate(p.k, p.charge, p.particle_mass, r)),
            marker_radius: T::lit(r),
            pivot: p.pivot.cast(),
        }],
        ..World::default()
    })
}

fn central_declaration(p: &CatalogParams) -> Result<Declaration, CatalogError> {
    Declaration::new(
        DeclaredModel::CentralForce {
            k: p.k,
            charge: p.charge,
            particle_mass: p.particle_mass,
            center: p.pivot,
        },
        xy_outputs(),
    )
}

fn bounded(p: &CatalogParams, outputs: Vec<String>) -> Result<Declaration, CatalogError> {
    Ok(Declaration::new(DeclaredModel::FreeMotionBounded { side: p.side }, outputs)?.with_mass(p.mass))
}

/// Builds a catalog calculator with the given parameters.
pub fn build<T: Real>(id: CalculatorId, p: &CatalogParams) -> Result<Calculator<T>, CatalogError> {
    validate_params(p)?;
    let xy = [("x", Coord::DiskX(0)), ("y", Coord::DiskY(0))];
    let two = [
        ("x1", Coord::DiskX(0)),
        ("y1", Coord::DiskY(0)),
        ("x2", Coord::DiskX(1)),
        ("y2", Coord::DiskY(1)),
    ];
    let marker = [("x", Coord::MarkerX(0)), ("y", Coord::MarkerY(0))];
    match id {
        CalculatorId::A => Calculator::assemble(
            id,
            one_disk_world(p),
            xy.to_vec(),
            &["x", "y"],
            &[],
            bounded(p, xy_outputs())?,
            2,
            None,
        ),
        CalculatorId::F => Calculator::assemble(
            id,
            one_disk_world(p),
            xy.to_vec(),
            &["x", "y"],
            &["x", "y"],
            bounded(p, xy_outputs())?,
            2,
            Some(BodyId::Disk(0)),
        ),
        CalculatorId::BFull => Calculator::assemble(
            id,
            two_disk_world(p),
            two.to_vec(),
            &["x1", "y1", "x2", "y2"],
            &[],
            bounded(p, vec!["x1".into(), "y1".into(), "x2".into(), "y2".into()])?,
            4,
            None,
        ),
        CalculatorId::BPartial => Calculator::assemble(
            id,
            two_disk_world(p),
            two.to_vec(),
            &["x1", "y1"],
            &[],
            bounded(p, vec!["x1".into(), "y1".into()])?,
            4,
            None,
        ),
        CalculatorId::G => Calculator::assemble(
            id,
            two_disk_world(p),
            two.to_vec(),
            &["x1", "y1"],
            &["x1", "y1"],
            bounded(p, vec!["x1".into(), "y1".into()])?,
            4,
            Some(BodyId::Disk(0)),
        ),
        CalculatorId::C => Calculator::assemble(
            id,
            spring_world(p)?,
            xy.to_vec(),
            &["x", "y"],
            &[],
            Declaration::new(DeclaredModel::Harmonic { omega: p.omega }, xy_outputs())?
                .with_mass(p.mass),
            2,
            None,
        ),
        CalculatorId::D => {
            let mut world = spring_world(p)?;
            check(
                p.partition_y.abs() < p.side / 2.0,
                "partition_y must lie inside the box",
            )?;
            check(
                p.partition_y > p.disk_radius,
                "partition must clear the spring-mounted disk's track",
            )?;
            check(
                p.hidden_pos.y > p.partition_y + 2.0 * p.disk_radius,
                "hidden disk must start beyond the partition, out of reach of the visible disk",
            )?;
            world.partition = Some(AxisLine::new(Axis::Y, T::lit(p.partition_y)));
            world.disks.push(disk(p, p.hidden_pos, p.hidden_vel));
            Calculator::assemble(
                id,
                world,
                two.to_vec(),
                &["x1", "y1"],
                &[],
                Declaration::new(
                    DeclaredModel::Harmonic { omega: p.omega },
                    vec!["x1".into(), "y1".into()],
                )?
                .with_mass(p.mass),
                4,
                None,
            )
        }
        CalculatorId::E => Calculator::assemble(
            id,
            rotor_world(p)?,
            marker.to_vec(),
            &["x", "y"],
            &[],
            central_declaration(p)?,
            1,
            None,
        ),
        CalculatorId::H => Calculator::assemble(
            id,
            rotor_world(p)?,
            marker.to_vec(),
            &["x", "y"],
            &["x", "y"],
            central_declaration(p)?,
            1,
            Some(BodyId::Marker(0)),
        ),
        CalculatorId::X => {
            check(
                p.gear_speed > 0.0 && p.gear_half_period > 0.0,
                "gear_speed and gear_half_period must be > 0",
            )?;
            let world = World {
                gear: Some(GearDrive {
                    speed: T::lit(p.gear_speed),
                    half_period: T::lit(p.gear_half_period),
                    phase: T::lit(p.gear_phase),
                    track_y: T::lit(p.gear_track_y),
                    x: T::lit(p.gear_start_x),
                    hidden_wheel_angles: (T::zero(), T::zero()),
                    wheel_rate: T::lit(p.gear_wheel_rate),
                    // static sag of the two wheel suspensions
                    hidden_spring_extensions: (T::lit(0.1), T::lit(0.1)),
                }),
                ..World::default()
            };
            Calculator::assemble(
                id,
                world,
                vec![
                    ("x", Coord::RackX),
                    ("y", Coord::RackY),
                    ("wheel_a", Coord::WheelAngle(0)),
                    ("wheel_b", Coord::WheelAngle(1)),
                    ("spring_a", Coord::SpringExtension(0)),
                    ("spring_b", Coord::SpringExtension(1)),
                ],
                &["x", "y"],
                &[],
                Declaration::new(DeclaredModel::FreeMotion, xy_outputs())?,
                // the track fixes y
                5,
                None,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults(id: CalculatorId) -> Calculator<f64> {
        build(id, &CatalogParams::default()).unwrap()
    }

    #[test]
    fn a_partition_and_declaration() {
        let p = CatalogParams { vel: Vec2::new(1.0, 0.7), ..CatalogParams::default() };
        let a: Calculator<f64> = build(CalculatorId::A, &p).unwrap();
        assert_eq!(a.partition.output().len(), 2);
        assert_eq!(a.partition.input().len(), 0);
        assert_eq!(a.partition.all().len(), 2);
        assert_eq!(a.declaration.model, DeclaredModel::FreeMotionBounded { side: 10.0 });
        assert_eq!(a.declaration.declared_constraints, square_walls(10.0));
        assert_eq!(a.simulation_mode(), SimulationMode::Staged);
    }

    #[test]
    fn b_partial_hides_second_disk() {
        let b = defaults(CalculatorId::BPartial);
        assert_eq!(b.partition.output(), ["x1", "y1"]);
        assert_eq!(b.partition.all().len(), 4);
        assert_eq!(b.partition.hidden(), vec!["x2", "y2"]);
        assert!(matches!(b.declaration.model, DeclaredModel::FreeMotionBounded { .. }));
        assert_eq!(b.simulation_mode(), SimulationMode::Extended);
    }

    #[test]
    fn e_rotor_rate_matches_circular_orbit() {
        let p = CatalogParams { k: 1.0, charge: 1.0, particle_mass: 1.0, orbit_radius: 2.0, ..Default::default() };
        let e: Calculator<f64> = build(CalculatorId::E, &p).unwrap();
        let rotor = &e.world.rotors[0];
        // independent check: centripetal acceleration equals the declared pull
        let centripetal = rotor.angular_velocity.powi(2) * 2.0;
        assert!((centripetal - 0.25).abs() < 1e-15);
        assert_eq!(e.total_dof_count, 1);
        assert_eq!(e.simulation_mode(), SimulationMode::Reduced);
    }

    #[test]
    fn every_catalog_partition_is_consistent() {
        for id in CalculatorId::ALL {
            let c = defaults(id);
            let all = c.partition.all();
            assert!(c.partition.output().iter().all(|d| all.contains(d)), "{id}");
            assert!(c.partition.input().iter().all(|d| all.contains(d)), "{id}");
            let hidden = c.partition.hidden();
            assert_eq!(hidden.len() + c.partition.output().len(), all.len(), "{id}");
            assert!(hidden.iter().all(|h| !c.partition.output().contains(h)), "{id}");
            assert_eq!(c.output_values().len(), c.partition.output().len());
            assert_eq!(c.declaration.declared_dof_count, c.partition.output().len(), "{id}");
        }
    }

    #[test]
    fn controllers_only_where_inputs_exist() {
        for id in CalculatorId::ALL {
            let c = defaults(id);
            let has = matches!(id, CalculatorId::F | CalculatorId::G | CalculatorId::H);
            assert_eq!(c.controller().is_some(), has, "{id}");
            assert_eq!(!c.partition.input().is_empty(), has, "{id}");
        }
        assert_eq!(defaults(CalculatorId::H).controller(), Some(BodyId::Marker(0)));
    }

    #[test]
    fn x_declares_inertial_motion_without_walls() {
        let x = defaults(CalculatorId::X);
        assert_eq!(x.declaration.model, DeclaredModel::FreeMotion);
        assert!(x.declaration.declared_constraints.is_empty());
        assert_eq!(x.declaration.declared_dof_count, 2);
        assert_eq!(x.simulation_mode(), SimulationMode::Extended);
    }

    #[test]
    fn invalid_params_name_the_constraint() {
        let p = CatalogParams { mass: -1.0, ..Default::default() };
        let err = build::<f64>(CalculatorId::A, &p).unwrap_err();
        assert!(err.to_string().contains("mass"));
        let p = CatalogParams { pos: Vec2::new(20.0, 0.0), ..Default::default() };
        assert!(build::<f64>(CalculatorId::A, &p).unwrap_err().to_string().contains("outside"));
        let p = CatalogParams { second_pos: Vec2::new(0.2, 0.0), ..Default::default() };
        assert!(build::<f64>(CalculatorId::BFull, &p).unwrap_err().to_string().contains("overlap"));
        let p = CatalogParams { orbit_radius: 0.0, ..Default::default() };
        assert!(build::<f64>(CalculatorId::E, &p).is_err());
    }

    #[test]
    fn ids_roundtrip_through_strings() {
        for id in CalculatorId::ALL {
            assert_eq!(id.as_str().parse::<CalculatorId>().unwrap(), id);
            let json = serde_json::to_string(&id).unwrap();
            assert_eq!(json, format!("\"{}\"", id.as_str()));
        }
        assert!("Q".parse::<CalculatorId>().is_err());
    }

    #[test]
    fn runs_in_single_precision() {
        let mut a: Calculator<f32> = build(CalculatorId::A, &CatalogParams::default()).unwrap();
        for _ in 0..1000 {
            a.world.step(1e-3, &[]).unwrap();
        }
        let x = a.read("x").unwrap();
        assert!((x - 1.0).abs() < 1e-3);
    }
}

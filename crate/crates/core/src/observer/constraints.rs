use serde::{Deserialize, Serialize};

use super::events::{Event, EventList, EVENT_FIT_SAMPLES};
use super::sensor::Trajectory;
use crate::dynamics::{Axis, AxisLine};
use crate::vec2::Vec2;

/// Largest spread of event locations (in quanta) along a wall's normal.
pub const WALL_SPREAD_QUANTA: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferredWall {
    pub line: AxisLine<f64>,
    /// Events reflected by this wall.
    pub support: usize,
    pub spread: f64,
}

/// Momentum exchange between two observed bodies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairContact {
    pub time: f64,
    pub bodies: (usize, usize),
    pub distance: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintInference {
    pub walls: Vec<InferredWall>,
    pub contacts: Vec<PairContact>,
    /// Indices into the event list of events nothing observable explains.
    pub unexplained: Vec<usize>,
}

impl ConstraintInference {
    pub fn lines(&self) -> Vec<AxisLine<f64>> {
        self.walls.iter().map(|w| w.line).collect()
    }
}

/// Noise-aware tolerance for comparing line-fit velocities across an event.
fn velocity_tolerance(quantum: f64, h: f64, speed: f64) -> f64 {
    let k = (EVENT_FIT_SAMPLES + 1) as f64;
    let slope_sigma = quantum / 12f64.sqrt() * (12.0 / (k * (k * k - 1.0))).sqrt() / h;
    6.0 * slope_sigma + 0.02 + 0.02 * speed
}

/// Axes along which the event reverses the velocity while preserving the
/// other component, or `None` when the event is not a specular reflection.
fn specular_axes(e: &Event, tol: f64) -> Option<Vec<Axis>> {
    let mut reversed = Vec::new();
    for axis in [Axis::X, Axis::Y] {
        let b = axis.component(e.velocity_before);
        let a = axis.component(e.velocity_after);
        if (a + b).abs() <= tol && b.abs() > tol {
            reversed.push(axis);
        } else if (a - b).abs() > tol {
            return None;
        }
    }
    (!reversed.is_empty()).then_some(reversed)
}

fn is_pair_contact(a: &Event, b: &Event, tol: f64) -> bool {
    let (da, db) = (a.velocity_change(), b.velocity_change());
    let (na, nb) = (da.norm(), db.norm());
    if na <= tol || nb <= tol {
        return false;
    }
    let Some(n) = (b.location - a.location).normalized() else { return false };
    let antiparallel = da.dot(db) / (na * nb) < -0.98;
    let along_centers = da.dot(n).abs() / na > 0.98;
    // the first body is pushed away from the second
    antiparallel && along_centers && da.dot(n) < 0.0
}

/// Explains events by axis-aligned walls and by contacts between observed
/// bodies; whatever remains is reported as unexplained.
pub fn infer_constraints(traj: &Trajectory, events: &EventList, min_support: usize) -> ConstraintInference {
    let q = traj.quantum();
    let h = traj.sample_period();
    let ev = &events.events;
    let mut explained = vec![false; ev.len()];

    let mut contacts = Vec::new();
    for i in 0..ev.len() {
        for j in i + 1..ev.len() {
            if ev[j].time - ev[i].time > 2.0 * h {
                break;
            }
            if ev[i].body == ev[j].body || explained[i] || explained[j] {
                continue;
            }
            let tol = velocity_tolerance(q, h, ev[i].velocity_before.norm().max(ev[j].velocity_before.norm()));
            if is_pair_contact(&ev[i], &ev[j], tol) {
                explained[i] = true;
                explained[j] = true;
                contacts.push(PairContact {
                    time: 0.5 * (ev[i].time + ev[j].time),
                    bodies: (ev[i].body, ev[j].body),
                    distance: (ev[j].location - ev[i].location).norm(),
                });
            }
        }
    }

    let spec: Vec<Option<Vec<Axis>>> = ev
        .iter()
        .map(|e| specular_axes(e, velocity_tolerance(q, h, e.velocity_before.norm())))
        .collect();
    let mut walls = Vec::new();
    // per event, the axes whose reversal a wall has accounted for
    let mut covered: Vec<Vec<Axis>> = vec![Vec::new(); ev.len()];
    for axis in [Axis::X, Axis::Y] {
        let mut cands: Vec<(f64, usize)> = (0..ev.len())
            .filter(|&i| !explained[i] && spec[i].as_ref().is_some_and(|a| a.contains(&axis)))
            .map(|i| (axis.component(ev[i].location), i))
            .collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut k = 0;
        while k < cands.len() {
            let start = k;
            while k < cands.len() && cands[k].0 - cands[start].0 <= WALL_SPREAD_QUANTA * q {
                k += 1;
            }
            let cluster = &cands[start..k];
            if cluster.len() >= min_support {
                let offset = cluster.iter().map(|c| c.0).sum::<f64>() / cluster.len() as f64;
                walls.push(InferredWall {
                    line: AxisLine::new(axis, offset),
                    support: cluster.len(),
                    spread: cluster[cluster.len() - 1].0 - cluster[0].0,
                });
                for &(_, i) in cluster {
                    covered[i].push(axis);
                }
            }
        }
    }
    for i in 0..ev.len() {
        if let Some(axes) = &spec[i] {
            if !explained[i] && axes.iter().all(|a| covered[i].contains(a)) {
                explained[i] = true;
            }
        }
    }
    let unexplained = (0..ev.len()).filter(|&i| !explained[i]).collect();
    ConstraintInference { walls, contacts, unexplained }
}

/// Bounding box of all observed positions, grown by `margin`.
pub fn sampled_bounds(traj: &Trajectory, margin: f64) -> Option<(Vec2<f64>, Vec2<f64>)> {
    let paths = traj.body_positions().ok()?;
    let mut it = paths.iter().flatten();
    let first = *it.next()?;
    let (lo, hi) = it.fold((first, first), |(lo, hi), p| {
        (Vec2::new(lo.x.min(p.x), lo.y.min(p.y)), Vec2::new(hi.x.max(p.x), hi.y.max(p.y)))
    });
    Some((lo - Vec2::new(margin, margin), hi + Vec2::new(margin, margin)))
}

/// Largest distance any body moves between consecutive samples.
pub fn max_sample_travel(traj: &Trajectory) -> f64 {
    traj.body_positions()
        .map(|paths| {
            paths
                .iter()
                .flat_map(|p| p.windows(2).map(|w| (w[1] - w[0]).norm()))
                .fold(0.0, f64::max)
        })
        .unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(body: usize, t: f64, loc: (f64, f64), vb: (f64, f64), va: (f64, f64)) -> Event {
        Event {
            time: t,
            body,
            location: Vec2::new(loc.0, loc.1),
            velocity_before: Vec2::new(vb.0, vb.1),
            velocity_after: Vec2::new(va.0, va.1),
            first_sample: 0,
            last_sample: 0,
        }
    }

    fn dummy_traj() -> Trajectory {
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
        let rows = vec![vec![0.0, 0.0]; 200];
        Trajectory::new(vec!["x".into(), "y".into()], times, rows, 1e-3).unwrap()
    }

    #[test]
    fn specular_events_define_walls() {
        let events = EventList {
            events: vec![
                event(0, 1.0, (5.0, 1.0), (1.0, 0.7), (-1.0, 0.7)),
                event(0, 2.0, (3.0, 5.0005), (-1.0, 0.7), (-1.0, -0.7)),
                event(0, 3.0, (-5.0, -2.0), (-1.0, -0.7), (1.0, -0.7)),
                event(0, 4.0, (5.0004, -1.0), (1.0, -0.7), (-1.0, -0.7)),
            ],
        };
        let inf = infer_constraints(&dummy_traj(), &events, 1);
        assert!(inf.unexplained.is_empty());
        assert_eq!(inf.walls.len(), 3);
        let xw: Vec<f64> = inf.walls.iter().filter(|w| w.line.axis == Axis::X).map(|w| w.line.offset).collect();
        assert_eq!(xw.len(), 2);
        assert!((xw[1] - 5.0002).abs() < 1e-9);
        let strict = infer_constraints(&dummy_traj(), &events, 2);
        assert_eq!(strict.walls.len(), 1);
        assert_eq!(strict.unexplained.len(), 2);
    }

    #[test]
    fn oblique_kick_is_unexplained() {
        let events = EventList { events: vec![event(0, 1.0, (1.0, 1.0), (1.0, 0.0), (0.4, 0.5))] };
        let inf = infer_constraints(&dummy_traj(), &events, 1);
        assert!(inf.walls.is_empty());
        assert_eq!(inf.unexplained, vec![0]);
    }

    #[test]
    fn observed_pair_collision_is_explained() {
        // equal masses, head-on along x: velocities exchange
        let events = EventList {
            events: vec![
                event(0, 1.0, (0.0, 0.0), (1.0, 0.2), (-0.5, 0.2)),
                event(1, 1.0, (1.0, 0.0), (-0.5, -0.3), (1.0, -0.3)),
            ],
        };
        let inf = infer_constraints(&dummy_traj(), &events, 1);
        assert!(inf.unexplained.is_empty());
        assert_eq!(inf.contacts.len(), 1);
        assert!((inf.contacts[0].distance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn corner_hit_needs_both_walls() {
        let events = EventList { events: vec![event(0, 1.0, (5.0, 5.0), (1.0, 1.0), (-1.0, -1.0))] };
        let inf = infer_constraints(&dummy_traj(), &events, 1);
        assert_eq!(inf.walls.len(), 2);
        assert!(inf.unexplained.is_empty());
        assert_eq!(infer_constraints(&dummy_traj(), &events, 2).unexplained, vec![0]);
    }
}

use serde::{Deserialize, Serialize};

use super::plan::{ForceWindow, Gains, ProbeKind, ProbePlan, Region};
use super::{ProbeError, ProbeTarget};
use crate::observer::{quantize, SensorSpec, Trajectory};
use crate::vec2::Vec2;

/// Samples in the line fit the controller differentiates.
const CONTROL_SAMPLES: usize = 4;
/// Samples in the line fit that decides whether the body has stopped.
const STOP_SAMPLES: usize = 11;
/// Time given to the controller to settle on the last sweep waypoint.
const SWEEP_SETTLE: f64 = 1.0;

/// Everything a probe produced: the observed samples and the forces it
/// applied, on the same time base.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub trajectory: Trajectory,
    /// `(t_i, F_i)`: the force held over `[t_i, t_{i+1})`, one per sample.
    pub applied_force_log: Vec<(f64, Vec2<f64>)>,
    pub plan: ProbePlan,
    pub input_dofs: Vec<String>,
    /// Sample at which a stop-and-release controller let go; `None` if it
    /// never managed to stop the body.
    pub release_sample: Option<usize>,
}

impl ProbeRecord {
    pub fn forces(&self) -> Vec<Vec2<f64>> {
        self.applied_force_log.iter().map(|(_, f)| *f).collect()
    }

    /// Index, among the trajectory's bodies, of the one the controller pushes.
    pub fn input_body(&self) -> Result<usize, ProbeError> {
        let ids = self.trajectory.dof_ids();
        let bodies = self.trajectory.bodies()?;
        let [ix, iy] = self.input_dofs.as_slice() else {
            return Err(ProbeError::NotApplicable("the controller must drive exactly two dofs".into()));
        };
        bodies
            .iter()
            .position(|&(a, b)| &ids[a] == ix && &ids[b] == iy)
            .ok_or_else(|| ProbeError::NotApplicable("the controlled body is not observed".into()))
    }

    /// Path a free body of `mass` at rest would follow under the logged
    /// forces alone, for every observed body (zero for the uncontrolled
    /// ones). Subtracting it leaves the motion the forces do not explain.
    pub fn free_response(&self, mass: f64) -> Result<Vec<Vec<Vec2<f64>>>, ProbeError> {
        let n = self.trajectory.len();
        let h = self.trajectory.sample_period();
        let body = self.input_body()?;
        let nbodies = self.trajectory.bodies()?.len();
        let mut out = vec![vec![Vec2::zero(); n]; nbodies];
        let (mut r, mut u) = (Vec2::zero(), Vec2::zero());
        for i in 0..n {
            out[body][i] = r;
            let a = self.applied_force_log[i].1 / mass;
            r = r + u * h + a * (0.5 * h * h);
            u += a * h;
        }
        Ok(out)
    }
}

/// What the controller wants for the coming sample interval.
struct Decision {
    force: Vec2<f64>,
    finished: bool,
}

enum Controller {
    Open(Vec<ForceWindow>),
    Stop(StopController),
    Sweep(SweepController),
}

struct StopController {
    gains: Gains,
    v_tol: f64,
    dwell: f64,
    budget: f64,
    release_samples: usize,
    below_since: Option<usize>,
    released: Option<usize>,
}

struct SweepController {
    gains: Gains,
    /// Polyline vertices and cumulative arc length at each.
    path: Vec<Vec2<f64>>,
    arc: Vec<f64>,
    speed: f64,
}

/// Least-squares slope of the last `k` samples of `p` per unit time.
fn recent_velocity(p: &[Vec2<f64>], k: usize, h: f64) -> Vec2<f64> {
    let k = k.min(p.len());
    if k < 2 {
        return Vec2::zero();
    }
    let tail = &p[p.len() - k..];
    let mid = (k - 1) as f64 / 2.0;
    let mut num = Vec2::zero();
    let mut den = 0.0;
    for (j, q) in tail.iter().enumerate() {
        let s = j as f64 - mid;
        num += *q * s;
        den += s * s;
    }
    num / (den * h)
}

impl StopController {
    fn decide(&mut self, i: usize, p: &[Vec2<f64>], h: f64) -> Decision {
        let t = i as f64 * h;
        if let Some(r) = self.released {
            return Decision { force: Vec2::zero(), finished: i >= r + self.release_samples };
        }
        if t > self.budget {
            return Decision { force: Vec2::zero(), finished: true };
        }
        if p.len() >= STOP_SAMPLES {
            let speed = recent_velocity(p, STOP_SAMPLES, h).norm();
            if speed < self.v_tol {
                let since = *self.below_since.get_or_insert(i);
                if (i - since) as f64 * h >= self.dwell {
                    self.released = Some(i);
                    return Decision { force: Vec2::zero(), finished: false };
                }
            } else {
                self.below_since = None;
            }
        }
        let v = recent_velocity(p, CONTROL_SAMPLES, h);
        let force = (p[0] - p[p.len() - 1]) * self.gains.k_p - v * self.gains.k_d;
        Decision { force, finished: false }
    }
}

impl SweepController {
    fn new(start: Vec2<f64>, region: Region, grid: (usize, usize), margin: f64, speed: f64, gains: Gains) -> Self {
        let lo = region.lo + Vec2::new(margin, margin);
        let hi = region.hi - Vec2::new(margin, margin);
        let (nx, ny) = grid;
        let mut path = vec![start];
        for row in 0..ny {
            let y = lo.y + (hi.y - lo.y) * row as f64 / (ny - 1) as f64;
            for col in 0..nx {
                // serpentine: odd rows run backwards
                let c = if row % 2 == 0 { col } else { nx - 1 - col };
                let x = lo.x + (hi.x - lo.x) * c as f64 / (nx - 1) as f64;
                path.push(Vec2::new(x, y));
            }
        }
        let mut arc = vec![0.0];
        for w in path.windows(2) {
            arc.push(arc[arc.len() - 1] + (w[1] - w[0]).norm());
        }
        Self { gains, path, arc, speed }
    }

    fn length(&self) -> f64 {
        self.arc[self.arc.len() - 1]
    }

    /// Target position and velocity at time `t`.
    fn target(&self, t: f64) -> (Vec2<f64>, Vec2<f64>) {
        let s = self.speed * t;
        if s >= self.length() {
            return (self.path[self.path.len() - 1], Vec2::zero());
        }
        let k = self.arc.partition_point(|&a| a <= s).max(1) - 1;
        let seg = self.path[k + 1] - self.path[k];
        let len = self.arc[k + 1] - self.arc[k];
        if len <= 0.0 {
            return (self.path[k], Vec2::zero());
        }
        let dir = seg / len;
        (self.path[k] + dir * (s - self.arc[k]), dir * self.speed)
    }

    fn decide(&self, i: usize, p: &[Vec2<f64>], h: f64) -> Decision {
        let t = i as f64 * h;
        let (target, target_v) = self.target(t);
        let v = recent_velocity(p, CONTROL_SAMPLES, h);
        let force = (target - p[p.len() - 1]) * self.gains.k_p + (target_v - v) * self.gains.k_d;
        Decision { force, finished: t >= self.length() / self.speed + SWEEP_SETTLE }
    }
}

impl Controller {
    fn decide(&mut self, i: usize, p: &[Vec2<f64>], h: f64) -> Decision {
        match self {
            Controller::Open(schedule) => {
                let t = i as f64 * h;
                let force = schedule
                    .iter()
                    .find(|w| w.start <= t + 1e-9 * h && t + 1e-9 * h < w.end)
                    .map_or(Vec2::zero(), |w| w.force);
                Decision { force, finished: false }
            }
            Controller::Stop(c) => c.decide(i, p, h),
            Controller::Sweep(c) => c.decide(i, p, h),
        }
    }
}

/// Output columns of the two input dofs.
fn input_columns<M: ProbeTarget>(target: &M) -> Result<(usize, usize), ProbeError> {
    let outputs = target.output_dofs();
    let inputs = target.input_dofs();
    if inputs.is_empty() {
        return Err(ProbeError::NoController);
    }
    let [ix, iy] = inputs.as_slice() else {
        return Err(ProbeError::NotApplicable("the controller must drive exactly two dofs".into()));
    };
    let col = |d: &String| {
        outputs
            .iter()
            .position(|o| o == d)
            .ok_or_else(|| ProbeError::NotApplicable(format!("input dof `{d}` is not observed")))
    };
    Ok((col(ix)?, col(iy)?))
}

/// Drives `target` (a fresh copy of it) according to `plan`, holding each
/// force constant between samples, and records what the sensor sees.
pub fn run_probe<M: ProbeTarget>(target: &M, plan: &ProbePlan) -> Result<ProbeRecord, ProbeError> {
    plan.validate()?;
    let (cx, cy) = input_columns(target)?;
    let sensor = &plan.sensor;
    let h = sensor.sample_period;
    let start = {
        let v = target.read_outputs();
        Vec2::new(quantize(v[cx], sensor.quantum), quantize(v[cy], sensor.quantum))
    };
    let (controller, max_samples) = match &plan.kind {
        ProbeKind::ForceSchedule { schedule } => (Controller::Open(schedule.clone()), sensor.sample_count()),
        ProbeKind::StopAndRelease { controller_gains, dwell, budget, release_window, .. } => {
            let release_samples = (release_window / h).round() as usize;
            let c = StopController {
                gains: *controller_gains,
                v_tol: plan.stop_tolerance().expect("stop plan"),
                dwell: *dwell,
                budget: *budget,
                release_samples,
                below_since: None,
                released: None,
            };
            (Controller::Stop(c), (budget / h).ceil() as usize + release_samples + 2)
        }
        ProbeKind::CouplingSweep { controller_gains, sweep_grid, speed, region, margin } => {
            let region =
                region.ok_or_else(|| ProbeError::InvalidPlan("a coupling sweep needs a region to cover".into()))?;
            let c = SweepController::new(start, region, *sweep_grid, *margin, *speed, *controller_gains);
            let n = ((c.length() / speed + SWEEP_SETTLE) / h).ceil() as usize + 2;
            (Controller::Sweep(c), n)
        }
    };
    let mut rec = record(target, sensor, plan.dt, controller, max_samples, Some((cx, cy)))?;
    let release_sample = match &rec.1 {
        Controller::Stop(c) => c.released,
        _ => None,
    };
    rec.0.attach_evidence_warnings();
    Ok(ProbeRecord {
        trajectory: rec.0,
        applied_force_log: rec.2,
        plan: plan.clone(),
        input_dofs: target.input_dofs(),
        release_sample,
    })
}

/// Passive recording of any probe target: no forces at all. For catalog
/// calculators this reproduces [`crate::observer::observe`] exactly.
pub(crate) fn observe_target<M: ProbeTarget>(
    target: &M,
    sensor: &SensorSpec,
    dt: f64,
) -> Result<Trajectory, ProbeError> {
    sensor.validate()?;
    let (mut traj, _, _) = record(target, sensor, dt, Controller::Open(Vec::new()), sensor.sample_count(), None)?;
    traj.attach_evidence_warnings();
    Ok(traj)
}

type Recording = (Trajectory, Controller, Vec<(f64, Vec2<f64>)>);

fn record<M: ProbeTarget>(
    target: &M,
    sensor: &SensorSpec,
    dt: f64,
    mut controller: Controller,
    max_samples: usize,
    columns: Option<(usize, usize)>,
) -> Result<Recording, ProbeError> {
    let per_sample = sensor.steps_per_sample(dt)?;
    let h = sensor.sample_period;
    let mut machine = target.clone();
    let mut times = Vec::with_capacity(max_samples);
    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(max_samples);
    let mut seen: Vec<Vec2<f64>> = Vec::with_capacity(max_samples);
    let mut log = Vec::with_capacity(max_samples);
    for i in 0..max_samples {
        let row: Vec<f64> = machine.read_outputs().into_iter().map(|v| quantize(v, sensor.quantum)).collect();
        let decision = match columns {
            Some((cx, cy)) => {
                seen.push(Vec2::new(row[cx], row[cy]));
                controller.decide(i, &seen, h)
            }
            None => Decision { force: Vec2::zero(), finished: false },
        };
        let t = i as f64 * h;
        times.push(t);
        samples.push(row);
        let last = decision.finished || i + 1 == max_samples;
        log.push((t, if last { Vec2::zero() } else { decision.force }));
        if last {
            break;
        }
        for _ in 0..per_sample {
            machine.advance(dt, decision.force)?;
        }
    }
    let traj = Trajectory::new(target.output_dofs(), times, samples, sensor.quantum)?;
    Ok((traj, controller, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recent_velocity_is_exact_on_lines() {
        let h = 0.01;
        let p: Vec<Vec2<f64>> = (0..20).map(|i| Vec2::new(0.3 * i as f64 * h, 1.0 - 0.2 * i as f64 * h)).collect();
        let v = recent_velocity(&p, 11, h);
        assert!((v.x - 0.3).abs() < 1e-12 && (v.y + 0.2).abs() < 1e-12);
        assert_eq!(recent_velocity(&p[..1], 4, h), Vec2::zero());
    }

    #[test]
    fn sweep_path_is_a_serpentine_through_the_lattice() {
        let region = Region { lo: Vec2::new(-5.0, -5.0), hi: Vec2::new(5.0, 5.0) };
        let c = SweepController::new(Vec2::new(0.0, 0.0), region, (3, 2), 1.0, 1.0, Gains::default());
        let expect = [(0.0, 0.0), (-4.0, -4.0), (0.0, -4.0), (4.0, -4.0), (4.0, 4.0), (0.0, 4.0), (-4.0, 4.0)];
        for (p, e) in c.path.iter().zip(expect) {
            assert_eq!((p.x, p.y), e);
        }
        let len = 32f64.sqrt() + 8.0 + 8.0 + 8.0;
        assert!((c.length() - len).abs() < 1e-12);
        let (p, v) = c.target(32f64.sqrt() + 2.0);
        assert!((p.x + 2.0).abs() < 1e-12 && (p.y + 4.0).abs() < 1e-12);
        assert!((v.x - 1.0).abs() < 1e-12 && v.y == 0.0);
        assert_eq!(c.target(100.0), (Vec2::new(-4.0, 4.0), Vec2::zero()));
    }

    #[test]
    fn passive_recording_matches_the_observer() {
        use crate::calculators::{build, CalculatorId, CatalogParams};
        let sensor = SensorSpec { duration: 5.0, ..SensorSpec::default() };
        for id in [CalculatorId::A, CalculatorId::BPartial, CalculatorId::E, CalculatorId::H] {
            let c = build::<f64>(id, &CatalogParams::default()).unwrap();
            let ours = observe_target(&c, &sensor, 1e-3).unwrap();
            let theirs = crate::observer::observe(&c, &sensor, 1e-3).unwrap();
            assert_eq!(ours, theirs, "{id}");
        }
    }
}

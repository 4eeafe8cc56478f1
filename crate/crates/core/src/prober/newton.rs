use serde::{Deserialize, Serialize};

use super::{ProbeError, ProbeRecord};
use crate::calculators::Declaration;
use crate::observer::{
    detect_events_with_reference, estimate_derivatives_masking, ObserverConfig, SgWeights, WALL_SPREAD_QUANTA,
};
use crate::vec2::Vec2;

/// The Newton check tolerates this many worst-case quantization errors.
pub const NEWTON_NOISE_FACTOR: f64 = 5.0;

/// An event seen during a probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeEvent {
    pub time: f64,
    pub location: Vec2<f64>,
    pub velocity_change: Vec2<f64>,
    /// Whether a declared wall was at hand.
    pub declared_wall: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    pub times: Vec<f64>,
    /// `|a_measured - a_declared|` where checked.
    pub residual: Vec<Option<f64>>,
    pub measured: Vec<Option<Vec2<f64>>>,
    pub predicted: Vec<Option<Vec2<f64>>>,
    /// Largest residual that quantization alone could explain, times
    /// [`NEWTON_NOISE_FACTOR`].
    pub epsilon: f64,
    pub half_window: usize,
    pub samples_checked: usize,
    pub max_residual: f64,
    pub max_residual_time: Option<f64>,
    pub pass: bool,
    pub events: Vec<ProbeEvent>,
}

impl NewtonReport {
    /// Residual series in units of `epsilon`.
    pub fn normalized(&self) -> Vec<Option<f64>> {
        self.residual.iter().map(|r| r.map(|r| r / self.epsilon)).collect()
    }

    /// Mean measured and predicted acceleration over the checked samples of
    /// `[from, to)`.
    pub fn mean_over(&self, from: f64, to: f64) -> Option<(Vec2<f64>, Vec2<f64>)> {
        let mut n = 0usize;
        let (mut m, mut p) = (Vec2::zero(), Vec2::zero());
        for i in 0..self.times.len() {
            if let (true, Some(a), Some(b)) =
                (self.times[i] >= from && self.times[i] < to, self.measured[i], self.predicted[i])
            {
                m += a;
                p += b;
                n += 1;
            }
        }
        (n > 0).then(|| (m / n as f64, p / n as f64))
    }
}

/// Weights `g[m + w]`, `m = -w..w`, such that the Savitzky–Golay
/// acceleration of a path driven by accelerations `a_k`, each held over
/// `[t_k, t_{k+1})`, is `sum_m g[m + w] a_{i+m}`. They sum to one.
pub fn force_response_kernel(sg: &SgWeights) -> Vec<f64> {
    let w = sg.half_window as i64;
    (-w..w)
        .map(|m| {
            (-w..=w)
                .map(|j| {
                    let c = sg.second[(j + w) as usize];
                    // displacement of sample j (relative to the tangent line at
                    // the center) caused by unit acceleration over interval m
                    let lever = if m >= 0 && j > m {
                        (j - m) as f64 - 0.5
                    } else if m < 0 && j <= m {
                        (m - j) as f64 + 0.5
                    } else {
                        0.0
                    };
                    c * lever
                })
                .sum()
        })
        .collect()
}

/// Samples where the controlled body is within reach of a declared wall:
/// the prober knows the claim, so contacts there are expected.
fn near_declared_wall(p: &[Vec2<f64>], k: usize, declaration: &Declaration, quantum: f64) -> bool {
    let step = |a: usize, b: usize| (p[b] - p[a]).norm();
    let mut reach = 0.0f64;
    if k > 0 {
        reach = reach.max(step(k - 1, k));
    }
    if k + 1 < p.len() {
        reach = reach.max(step(k, k + 1));
    }
    let tol = reach + WALL_SPREAD_QUANTA * quantum;
    declaration.declared_constraints.iter().any(|w| w.signed_distance(p[k]).abs() <= tol)
}

/// Compares the measured acceleration of the controlled body with what the
/// declaration predicts under the logged forces. Passes iff the residual
/// stays within `epsilon` on every sample away from declared walls.
pub fn newton_residual(
    record: &ProbeRecord,
    declaration: &Declaration,
    mass: f64,
    config: &ObserverConfig,
) -> Result<NewtonReport, ProbeError> {
    if !(mass > 0.0) {
        return Err(ProbeError::InvalidPlan("mass must be > 0".into()));
    }
    config.validate()?;
    let traj = &record.trajectory;
    let body = record.input_body()?;
    let paths = traj.body_positions()?;
    let p = &paths[body];
    let q = traj.quantum();
    let t = traj.times();
    let n = traj.len();

    let wall_times: Vec<f64> =
        (0..n).filter(|&k| near_declared_wall(p, k, declaration, q)).map(|k| t[k]).collect();
    let d = estimate_derivatives_masking(traj, &wall_times, config)?;
    let sg = SgWeights::new(d.half_window);
    let kernel = force_response_kernel(&sg);
    let w = d.half_window;
    let forces = record.forces();
    let epsilon = NEWTON_NOISE_FACTOR * d.noise_peak;

    let mut residual = vec![None; n];
    let mut measured = vec![None; n];
    let mut predicted = vec![None; n];
    let mut checked = 0;
    let (mut max_residual, mut max_at) = (0.0f64, None);
    for i in (0..n).filter(|&i| d.valid[i]) {
        let pushed = kernel
            .iter()
            .enumerate()
            .fold(Vec2::zero(), |s, (k, g)| s + forces[i + k - w] * *g)
            / mass;
        let pred = declaration.declared_acceleration(p[i], Vec2::zero(), mass)? + pushed;
        let a = d.acceleration[body][i];
        let r = (a - pred).norm();
        residual[i] = Some(r);
        measured[i] = Some(a);
        predicted[i] = Some(pred);
        checked += 1;
        if r > max_residual {
            max_residual = r;
            max_at = Some(t[i]);
        }
    }

    let reference = record.free_response(mass)?;
    let events = detect_events_with_reference(traj, config.event_threshold, Some(&reference))?
        .events
        .into_iter()
        .filter(|e| e.body == body)
        .map(|e| {
            let k = ((e.time - t[0]) / traj.sample_period()).round() as usize;
            ProbeEvent {
                time: e.time,
                location: e.location,
                velocity_change: e.velocity_change(),
                declared_wall: near_declared_wall(p, k.min(n - 1), declaration, q),
            }
        })
        .collect();

    Ok(NewtonReport {
        times: t.to_vec(),
        residual,
        measured,
        predicted,
        epsilon,
        half_window: w,
        samples_checked: checked,
        max_residual,
        max_residual_time: max_at,
        pass: checked > 0 && max_residual <= epsilon,
        events,
    })
}

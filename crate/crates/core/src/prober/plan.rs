use serde::{Deserialize, Serialize};

use super::ProbeError;
use crate::observer::SensorSpec;
use crate::vec2::Vec2;

/// A constant force held on the input dofs over `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceWindow {
    pub start: f64,
    pub end: f64,
    pub force: Vec2<f64>,
}

impl ForceWindow {
    pub fn new(start: f64, end: f64, force: Vec2<f64>) -> Self {
        Self { start, end, force }
    }
}

/// Proportional and derivative gains of the controller, in force per unit
/// displacement and per unit velocity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub k_p: f64,
    pub k_d: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Self { k_p: 50.0, k_d: 20.0 }
    }
}

/// Axis-aligned rectangle, `lo` to `hi` corner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec2<f64>,
    pub hi: Vec2<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeKind {
    /// Open-loop forces.
    ForceSchedule { schedule: Vec<ForceWindow> },
    /// Brake the controlled body to rest, let go and watch it.
    StopAndRelease {
        controller_gains: Gains,
        /// Speed below which the body counts as stopped; `10 δ / T_s` when absent.
        v_tol: Option<f64>,
        /// How long the speed must stay below `v_tol` before release.
        dwell: f64,
        /// Simulated time allowed for stopping.
        budget: f64,
        /// Observation time after release.
        release_window: f64,
    },
    /// Drag the controlled body slowly along a serpentine through a lattice
    /// of waypoints covering `region`.
    CouplingSweep {
        controller_gains: Gains,
        /// Waypoints along x and y.
        sweep_grid: (usize, usize),
        speed: f64,
        /// Box to cover; normally the walls the passive observer inferred.
        region: Option<Region>,
        /// Distance kept from the region's edges.
        margin: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbePlan {
    #[serde(flatten)]
    pub kind: ProbeKind,
    pub sensor: SensorSpec,
    /// Integration step of the simulation driven by the probe.
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_dt() -> f64 {
    1e-3
}

impl ProbePlan {
    /// The battery's open-loop push: 0.5 along x for two time units, then a
    /// sideways push, on a 20-unit record.
    pub fn force_schedule_default() -> Self {
        Self::force_schedule(vec![
            ForceWindow::new(1.0, 3.0, Vec2::new(0.5, 0.0)),
            ForceWindow::new(8.0, 9.5, Vec2::new(0.0, -0.4)),
        ])
    }

    pub fn force_schedule(schedule: Vec<ForceWindow>) -> Self {
        Self {
            kind: ProbeKind::ForceSchedule { schedule },
            sensor: SensorSpec { duration: 20.0, ..SensorSpec::default() },
            dt: default_dt(),
        }
    }

    pub fn stop_and_release() -> Self {
        Self {
            kind: ProbeKind::StopAndRelease {
                controller_gains: Gains::default(),
                v_tol: None,
                dwell: 2.0,
                budget: 50.0,
                release_window: 1.0,
            },
            sensor: SensorSpec::default(),
            dt: default_dt(),
        }
    }

    pub fn coupling_sweep(region: Option<Region>) -> Self {
        Self {
            kind: ProbeKind::CouplingSweep {
                controller_gains: Gains::default(),
                sweep_grid: (8, 8),
                speed: 1.0,
                region,
                margin: 0.5,
            },
            sensor: SensorSpec::default(),
            dt: default_dt(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProbeKind::ForceSchedule { .. } => "force_schedule",
            ProbeKind::StopAndRelease { .. } => "stop_and_release",
            ProbeKind::CouplingSweep { .. } => "coupling_sweep",
        }
    }

    /// Speed tolerance of a stop-and-release plan.
    pub fn stop_tolerance(&self) -> Option<f64> {
        match &self.kind {
            ProbeKind::StopAndRelease { v_tol, .. } => {
                Some(v_tol.unwrap_or(10.0 * self.sensor.quantum / self.sensor.sample_period))
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), ProbeError> {
        let bad = |m: String| Err(ProbeError::InvalidPlan(m));
        self.sensor.validate().map_err(|e| ProbeError::InvalidPlan(e.to_string()))?;
        self.sensor.steps_per_sample(self.dt).map_err(|e| ProbeError::InvalidPlan(e.to_string()))?;
        let gains_ok = |g: &Gains| g.k_p > 0.0 && g.k_d > 0.0 && g.k_p.is_finite() && g.k_d.is_finite();
        match &self.kind {
            ProbeKind::ForceSchedule { schedule } => {
                let mut last_end = f64::NEG_INFINITY;
                for (i, w) in schedule.iter().enumerate() {
                    if !(w.start.is_finite() && w.end.is_finite() && w.start < w.end && w.force.is_finite()) {
                        return bad(format!("schedule window {i} needs finite start < end and a finite force"));
                    }
                    if w.start < last_end {
                        return bad(format!("schedule window {i} overlaps or precedes window {}", i - 1));
                    }
                    last_end = w.end;
                }
            }
            ProbeKind::StopAndRelease { controller_gains, v_tol, dwell, budget, release_window } => {
                if !gains_ok(controller_gains) {
                    return bad("controller gains must be > 0".into());
                }
                if v_tol.is_some_and(|v| !(v > 0.0)) {
                    return bad("v_tol must be > 0".into());
                }
                if !(*dwell >= 0.0 && *budget > 0.0 && *release_window > 0.0) {
                    return bad("dwell must be >= 0, budget and release window > 0".into());
                }
                let per_release = release_window / self.sensor.sample_period;
                if per_release < 5.0 {
                    return bad("release window must span at least five samples".into());
                }
            }
            ProbeKind::CouplingSweep { controller_gains, sweep_grid, speed, region, margin } => {
                if !gains_ok(controller_gains) {
                    return bad("controller gains must be > 0".into());
                }
                if sweep_grid.0 < 2 || sweep_grid.1 < 2 {
                    return bad("sweep grid needs at least 2 x 2 waypoints".into());
                }
                if !(*speed > 0.0 && *margin >= 0.0) {
                    return bad("sweep speed must be > 0 and margin >= 0".into());
                }
                if let Some(r) = region {
                    let inner = r.hi - r.lo - Vec2::new(2.0 * margin, 2.0 * margin);
                    if !(r.lo.is_finite() && r.hi.is_finite() && inner.x > 0.0 && inner.y > 0.0) {
                        return bad("sweep region must be larger than twice the margin".into());
                    }
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
    fn defaults_are_valid() {
        ProbePlan::force_schedule_default().validate().unwrap();
        ProbePlan::stop_and_release().validate().unwrap();
        ProbePlan::coupling_sweep(None).validate().unwrap();
        assert_eq!(ProbePlan::stop_and_release().stop_tolerance(), Some(1.0));
    }

    #[test]
    fn overlapping_windows_are_rejected() {
        let p = ProbePlan::force_schedule(vec![
            ForceWindow::new(0.0, 2.0, Vec2::new(1.0, 0.0)),
            ForceWindow::new(1.0, 3.0, Vec2::new(1.0, 0.0)),
        ]);
        assert!(p.validate().unwrap_err().to_string().contains("overlaps"));
        let p = ProbePlan::force_schedule(vec![ForceWindow::new(2.0, 1.0, Vec2::zero())]);
        assert!(p.validate().is_err());
    }

    #[test]
    fn gains_must_be_positive() {
        let mut p = ProbePlan::stop_and_release();
        if let ProbeKind::StopAndRelease { controller_gains, .. } = &mut p.kind {
            controller_gains.k_d = 0.0;
        }
        assert!(p.validate().is_err());
    }

    #[test]
    fn plan_json_is_tagged_by_kind() {
        let p = ProbePlan::stop_and_release();
        let json = serde_json::to_value(&p).unwrap();
        assert_eq!(json["kind"], "stop_and_release");
        assert_eq!(json["controller_gains"]["k_p"], 50.0);
        let back: ProbePlan = serde_json::from_value(json).unwrap();
        assert_eq!(back, p);
    }
}

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::newton::{newton_residual, ProbeEvent};
use super::plan::{ProbeKind, ProbePlan, Region};
use super::run::{observe_target, run_probe};
use super::stop::{stop_and_release, StopOutcome};
use super::{ProbeError, ProbeTarget};
use crate::calculators::DeclaredModel;
use crate::dynamics::Axis;
use crate::observer::{classify_with, sampled_bounds, ObserverConfig, Physicality, SensorSpec, Trajectory, Verdict};
use crate::vec2::Vec2;

/// Result of one probe: `true`, `false` or `"inconclusive"` on the wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PassState {
    Pass,
    Fail,
    Inconclusive,
}

impl Serialize for PassState {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            PassState::Pass => s.serialize_bool(true),
            PassState::Fail => s.serialize_bool(false),
            PassState::Inconclusive => s.serialize_str("inconclusive"),
        }
    }
}

impl<'de> Deserialize<'de> for PassState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Wire {
            Flag(bool),
            Word(String),
        }
        match Wire::deserialize(d)? {
            Wire::Flag(true) => Ok(PassState::Pass),
            Wire::Flag(false) => Ok(PassState::Fail),
            Wire::Word(w) if w == "inconclusive" => Ok(PassState::Inconclusive),
            Wire::Word(w) => Err(serde::de::Error::custom(format!("unknown pass state `{w}`"))),
        }
    }
}

/// The probe report written to disk and sent to clients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub probe: String,
    pub pass: PassState,
    pub max_residual: f64,
    pub predicted: f64,
    /// `null` when the probe could not measure anything.
    pub measured: Option<f64>,
    pub events: Vec<ProbeEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalsifyReport {
    pub passive: Verdict,
    /// `None` when the calculator has no input dofs.
    pub active: Option<Verdict>,
    pub probes: Vec<ProbeReport>,
}

impl FalsifyReport {
    /// The final verdict: active when probing was possible.
    pub fn verdict(&self) -> &Verdict {
        self.active.as_ref().unwrap_or(&self.passive)
    }
}

/// Box spanned by the walls the passive observer inferred, falling back to
/// the extent of the observed motion along axes without two walls.
fn sweep_region(passive: &Verdict, traj: &Trajectory) -> Option<Region> {
    let (lo, hi) = sampled_bounds(traj, 0.0)?;
    let span = |axis: Axis, lo: f64, hi: f64| {
        let offs: Vec<f64> = passive
            .constraints
            .walls
            .iter()
            .filter(|w| w.line.axis == axis)
            .map(|w| w.line.offset)
            .collect();
        let min = offs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = offs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if offs.len() >= 2 && max > min {
            (min, max)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = span(Axis::X, lo.x, hi.x);
    let (y0, y1) = span(Axis::Y, lo.y, hi.y);
    Some(Region { lo: Vec2::new(x0, y0), hi: Vec2::new(x1, y1) })
}

/// The probes the declaration calls for: a force schedule always, a
/// stop-and-release against central forces, and a coupling sweep through a
/// bounded free-motion box.
pub fn battery<M: ProbeTarget>(target: &M, passive: &Verdict, passive_traj: &Trajectory) -> Vec<ProbePlan> {
    let mut plans = vec![ProbePlan::force_schedule_default()];
    match target.declaration().model {
        DeclaredModel::CentralForce { .. } => plans.push(ProbePlan::stop_and_release()),
        DeclaredModel::FreeMotionBounded { .. } => {
            let mut sweep = ProbePlan::coupling_sweep(sweep_region(passive, passive_traj));
            if let ProbeKind::CouplingSweep { region: Some(r), margin, .. } = &mut sweep.kind {
                // small boxes get a proportionally small margin
                let inner = (r.hi - r.lo).x.min((r.hi - r.lo).y);
                *margin = margin.min(0.1 * inner);
            }
            plans.push(sweep);
        }
        _ => {}
    }
    plans
}

/// Runs one plan and judges it. A failure comes with the physicality it
/// implies: an unexplained interaction means hidden variables, a missing
/// declared pull means the declared family is wrong.
pub fn evaluate<M: ProbeTarget>(
    target: &M,
    plan: &ProbePlan,
    config: &ObserverConfig,
) -> Result<(ProbeReport, Option<Physicality>), ProbeError> {
    let decl = target.declaration();
    match plan.kind {
        ProbeKind::ForceSchedule { .. } | ProbeKind::CouplingSweep { .. } => {
            let record = run_probe(target, plan)?;
            let newton = newton_residual(&record, decl, decl.declared_mass, config)?;
            let mean = |series: &[Option<Vec2<f64>>]| {
                let v: Vec<f64> = series.iter().flatten().map(|a| a.norm()).collect();
                if v.is_empty() {
                    0.0
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            };
            let report = ProbeReport {
                probe: plan.name().to_string(),
                pass: if newton.pass { PassState::Pass } else { PassState::Fail },
                max_residual: newton.max_residual,
                predicted: mean(&newton.predicted),
                measured: Some(mean(&newton.measured)),
                events: newton.events,
            };
            let failed = (!newton.pass).then_some(Physicality::NonPhysicalHiddenVariables);
            Ok((report, failed))
        }
        ProbeKind::StopAndRelease { .. } => {
            let stop = stop_and_release(target, plan)?;
            let pass = match stop.outcome {
                StopOutcome::Consistent => PassState::Pass,
                StopOutcome::Falsified => PassState::Fail,
                StopOutcome::Inconclusive => PassState::Inconclusive,
            };
            let report = ProbeReport {
                probe: plan.name().to_string(),
                pass,
                max_residual: stop.measured.map_or(stop.predicted, |m| (m - stop.predicted).abs()),
                predicted: stop.predicted,
                measured: stop.measured,
                events: Vec::new(),
            };
            let failed = (pass == PassState::Fail).then_some(Physicality::PhysicalWithInferredConstraints);
            Ok((report, failed))
        }
    }
}

fn severity(p: Physicality) -> u8 {
    match p {
        Physicality::PhysicalAsDeclared => 0,
        Physicality::PhysicalWithInferredConstraints => 1,
        Physicality::NonPhysicalHiddenVariables => 2,
    }
}

/// Passive classification followed, when the calculator has a controller,
/// by the probe battery. Any failed probe overturns an agreeing verdict;
/// inconclusive probes only leave a diagnostic.
pub fn falsify_with<M: ProbeTarget>(
    target: &M,
    sensor: &SensorSpec,
    dt: f64,
    config: &ObserverConfig,
) -> Result<FalsifyReport, ProbeError> {
    let traj = observe_target(target, sensor, dt)?;
    let passive = classify_with(&traj, target.declaration(), config)?;
    if target.input_dofs().is_empty() {
        return Ok(FalsifyReport { passive, active: None, probes: Vec::new() });
    }
    let plans = battery(target, &passive, &traj);
    judge(target, passive, &plans, config)
}

/// Like [`falsify_with`] but with a single, caller-chosen probe. A coupling
/// sweep without a region gets the one the battery would choose.
pub fn falsify_plan<M: ProbeTarget>(
    target: &M,
    plan: &ProbePlan,
    dt: f64,
    config: &ObserverConfig,
) -> Result<FalsifyReport, ProbeError> {
    if target.input_dofs().is_empty() {
        return Err(ProbeError::NoController);
    }
    plan.validate()?;
    let traj = observe_target(target, &plan.sensor, dt)?;
    let passive = classify_with(&traj, target.declaration(), config)?;
    let mut plan = plan.clone();
    if let ProbeKind::CouplingSweep { region: region @ None, .. } = &mut plan.kind {
        *region = sweep_region(&passive, &traj);
    }
    judge(target, passive, &[plan], config)
}

fn judge<M: ProbeTarget>(
    target: &M,
    passive: Verdict,
    plans: &[ProbePlan],
    config: &ObserverConfig,
) -> Result<FalsifyReport, ProbeError> {
    let mut active = passive.clone();
    let mut probes = Vec::new();
    for plan in plans {
        let (report, failed) = evaluate(target, plan, config)?;
        match (report.pass, failed) {
            (PassState::Inconclusive, _) => {
                active.diagnostics.push(format!("{} probe was inconclusive", report.probe));
            }
            (_, Some(phys)) => {
                let reason = format!("{} probe failed: the declared system does not respond this way", report.probe);
                let worst = if severity(phys) > severity(active.physicality()) { phys } else { active.physicality() };
                active = active.downgrade(worst, reason);
            }
            _ => {}
        }
        probes.push(report);
    }
    Ok(FalsifyReport { passive, active: Some(active), probes })
}

/// [`falsify_with`] at default sensor, step and observer settings.
pub fn falsify<M: ProbeTarget>(target: &M) -> Result<Verdict, ProbeError> {
    Ok(falsify_with(target, &SensorSpec::default(), 1e-3, &ObserverConfig::default())?.verdict().clone())
}

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::constraints::{infer_constraints, max_sample_travel, sampled_bounds, ConstraintInference};
use super::derivatives::{estimate_derivatives, Derivatives};
use super::events::{detect_events, EventList};
use super::fit::{fit_with_derivatives, FitResult};
use super::sensor::Trajectory;
use super::{ObserverConfig, ObserverError};
use crate::calculators::{Declaration, DeclaredModel, Family};
use crate::dynamics::{Axis, AxisLine};
use crate::vec2::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Physicality {
    PhysicalAsDeclared,
    PhysicalWithInferredConstraints,
    NonPhysicalHiddenVariables,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Agreement {
    Agrees,
    Disagrees,
}

impl fmt::Display for Physicality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for Agreement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// How much the observer actually saw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub duration: f64,
    pub samples: usize,
    pub samples_used: usize,
    pub half_window: usize,
    pub events_seen: usize,
    pub unexplained_events: usize,
    /// Full revolutions (central force) or oscillations (harmonic) seen.
    pub cycles_observed: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    physicality: Physicality,
    agreement: Agreement,
    pub best: FitResult,
    pub fits: Vec<FitResult>,
    pub events: EventList,
    pub constraints: ConstraintInference,
    pub evidence: Evidence,
    pub diagnostics: Vec<String>,
}

impl Verdict {
    /// Panics if the pair is inconsistent: a system physical as declared
    /// always agrees, a non-physical one never does.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        physicality: Physicality,
        agreement: Agreement,
        best: FitResult,
        fits: Vec<FitResult>,
        events: EventList,
        constraints: ConstraintInference,
        evidence: Evidence,
        diagnostics: Vec<String>,
    ) -> Self {
        assert_consistent(physicality, agreement);
        Self { physicality, agreement, best, fits, events, constraints, evidence, diagnostics }
    }

    pub fn physicality(&self) -> Physicality {
        self.physicality
    }

    pub fn agreement(&self) -> Agreement {
        self.agreement
    }

    /// Overturns an agreeing verdict after a failed active check.
    pub fn downgrade(mut self, physicality: Physicality, reason: impl Into<String>) -> Self {
        assert!(physicality != Physicality::PhysicalAsDeclared, "a downgrade cannot confirm");
        self.physicality = physicality;
        self.agreement = Agreement::Disagrees;
        self.diagnostics.push(reason.into());
        self
    }

    pub fn report(&self) -> VerdictReport {
        VerdictReport {
            physicality: self.physicality,
            agreement: self.agreement,
            best_family: self.best.family,
            params: self.best.params.clone(),
            residual: self.best.normalized_residual.is_finite().then_some(self.best.normalized_residual),
            unexplained_events: self.constraints.unexplained.len(),
            inferred_walls: self.constraints.lines(),
            diagnostics: self.diagnostics.clone(),
            evidence: self.evidence.clone(),
        }
    }
}

fn assert_consistent(p: Physicality, a: Agreement) {
    assert!(
        !(p == Physicality::PhysicalAsDeclared && a == Agreement::Disagrees),
        "PhysicalAsDeclared must agree"
    );
    assert!(
        !(p == Physicality::NonPhysicalHiddenVariables && a == Agreement::Agrees),
        "NonPhysicalHiddenVariables cannot agree"
    );
}

/// The serialized verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub physicality: Physicality,
    pub agreement: Agreement,
    pub best_family: Family,
    pub params: BTreeMap<String, f64>,
    /// Normalized residual of the best family; `null` if the fit diverged.
    pub residual: Option<f64>,
    pub unexplained_events: usize,
    pub inferred_walls: Vec<AxisLine<f64>>,
    pub diagnostics: Vec<String>,
    pub evidence: Evidence,
}

pub fn classify(traj: &Trajectory, declaration: &Declaration) -> Result<Verdict, ObserverError> {
    classify_with(traj, declaration, &ObserverConfig::default())
}

/// Passive observer: events, constraints and family fits from the
/// trajectory alone, then a comparison with the declaration.
pub fn classify_with(
    traj: &Trajectory,
    declaration: &Declaration,
    config: &ObserverConfig,
) -> Result<Verdict, ObserverError> {
    config.validate()?;
    let events = detect_events(traj, config.event_threshold)?;
    let derivs = estimate_derivatives(traj, &events, config)?;
    let constraints = infer_constraints(traj, &events, config.min_wall_support);
    let walls = constraints.lines();
    let fits = Family::ALL
        .iter()
        .map(|f| fit_with_derivatives(traj, &derivs, *f, walls.clone(), config))
        .collect::<Result<Vec<_>, _>>()?;

    let mut diagnostics: Vec<String> = traj.warnings().to_vec();
    diagnostics.extend(derivs.diagnostics.iter().cloned());
    if derivs.valid_count() == 0 {
        diagnostics.push("no smooth segment long enough to fit".into());
    }
    if let Some((lo, hi)) = sampled_bounds(traj, traj.quantum() + max_sample_travel(traj)) {
        for w in &walls {
            let (a, b) = match w.axis {
                Axis::X => (lo.x, hi.x),
                Axis::Y => (lo.y, hi.y),
            };
            debug_assert!(w.offset >= a && w.offset <= b, "wall {w:?} outside sampled region");
        }
    }

    let declared = declaration.model.family();
    let declared_fit = fits.iter().find(|f| f.family == declared).expect("every family fitted");
    let physical = constraints.unexplained.is_empty() && fits.iter().any(FitResult::fits);

    let (physicality, agreement, best) = if !physical {
        if !constraints.unexplained.is_empty() {
            diagnostics.push(format!(
                "{} abrupt velocity change(s) explained by no observable wall or contact",
                constraints.unexplained.len()
            ));
        }
        if !fits.iter().any(FitResult::fits) {
            diagnostics.push("no candidate family reproduces the observed accelerations".into());
        }
        let best = fits
            .iter()
            .min_by(|a, b| a.normalized_residual.total_cmp(&b.normalized_residual))
            .expect("non-empty")
            .clone();
        (Physicality::NonPhysicalHiddenVariables, Agreement::Disagrees, best)
    } else {
        let dof_ok = declaration.declared_dof_count == traj.dof_ids().len();
        if !dof_ok {
            diagnostics.push(format!(
                "declared {} output dofs, observed {}",
                declaration.declared_dof_count,
                traj.dof_ids().len()
            ));
        }
        let scale = orbit_scale(traj, declaration);
        let params_ok = declared_fit.fits() && params_match(declared_fit, declaration, traj.quantum(), scale, config);
        let tol = config.constraint_tolerance_quanta * traj.quantum();
        let walls_ok = constraints_consistent(&walls, &declaration.declared_constraints, tol, &traj.body_positions()?);
        if !walls_ok {
            diagnostics.push("inferred walls differ from the declared constraints".into());
        }
        for d in &declaration.declared_constraints {
            if !walls.iter().any(|w| w.axis == d.axis && (w.offset - d.offset).abs() <= tol) {
                diagnostics.push(format!("declared wall {:?} = {} was never touched", d.axis, d.offset));
            }
        }
        if declared_fit.fits() && !params_ok {
            diagnostics.push("declared family fits but its parameters differ".into());
        }
        if dof_ok && params_ok && walls_ok {
            (Physicality::PhysicalAsDeclared, Agreement::Agrees, declared_fit.clone())
        } else {
            // the parsimonious alternative: fewest parameters that fit
            let best = fits.iter().find(|f| f.fits()).expect("physical implies a fit").clone();
            (Physicality::PhysicalWithInferredConstraints, Agreement::Disagrees, best)
        }
    };
    let evidence = Evidence {
        duration: traj.duration(),
        samples: traj.len(),
        samples_used: derivs.valid_count(),
        half_window: derivs.half_window,
        events_seen: events.len(),
        unexplained_events: constraints.unexplained.len(),
        cycles_observed: cycles(traj, &best, &derivs),
    };
    Ok(Verdict::new(physicality, agreement, best, fits, events, constraints, evidence, diagnostics))
}

/// Typical distance of the observed bodies from the declared center.
fn orbit_scale(traj: &Trajectory, declaration: &Declaration) -> f64 {
    let center = match &declaration.model {
        DeclaredModel::CentralForce { center, .. } => *center,
        _ => Vec2::zero(),
    };
    let Ok(paths) = traj.body_positions() else { return 0.0 };
    let (sum, n) = paths
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), p| (s + (*p - center).norm(), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn params_match(
    fit: &FitResult,
    declaration: &Declaration,
    quantum: f64,
    scale: f64,
    config: &ObserverConfig,
) -> bool {
    let rel = |fitted: Option<f64>, declared: f64| {
        fitted.is_some_and(|v| ((v - declared) / declared).abs() <= config.param_tolerance)
    };
    match &declaration.model {
        DeclaredModel::FreeMotion | DeclaredModel::FreeMotionBounded { .. } => true,
        DeclaredModel::Harmonic { omega } => rel(fit.param("omega"), *omega),
        DeclaredModel::CentralForce { center, .. } => {
            let c = declaration.central_coefficient().expect("central declaration");
            let near = fit.center().is_some_and(|z| {
                (z - *center).norm() <= (config.constraint_tolerance_quanta * quantum).max(config.param_tolerance * scale)
            });
            rel(fit.param("coefficient"), c) && near
        }
    }
}

/// Inferred and declared walls are consistent when every inferred wall has
/// a declared twin within `tol` and no sample strays beyond a declared wall.
/// Declared walls the bodies never reached are unverified, not contradicted.
pub fn constraints_consistent(
    inferred: &[AxisLine<f64>],
    declared: &[AxisLine<f64>],
    tol: f64,
    positions: &[Vec<Vec2<f64>>],
) -> bool {
    let twin = |a: &AxisLine<f64>| declared.iter().any(|b| b.axis == a.axis && (b.offset - a.offset).abs() <= tol);
    if !inferred.iter().all(twin) {
        return false;
    }
    declared.iter().all(|wall| {
        positions.iter().all(|path| {
            let Some(first) = path.first() else { return true };
            let inside = wall.signed_distance(*first).signum();
            path.iter().all(|p| inside * wall.signed_distance(*p) >= -tol)
        })
    })
}

fn cycles(traj: &Trajectory, best: &FitResult, derivs: &Derivatives) -> Option<f64> {
    let paths = traj.body_positions().ok()?;
    match best.family {
        Family::FreeMotion => None,
        Family::CentralForce => {
            let z = best.center()?;
            let swept = paths
                .iter()
                .map(|path| {
                    let mut total = 0.0;
                    for w in path.windows(2) {
                        let (a, b) = (w[0] - z, w[1] - z);
                        total += a.cross(b).atan2(a.dot(b));
                    }
                    total.abs()
                })
                .fold(0.0, f64::max);
            Some(swept / std::f64::consts::TAU)
        }
        Family::Harmonic => {
            // sign changes of the smoothed velocity, two per oscillation
            let band = 10.0 * traj.quantum() / traj.sample_period();
            let count = derivs
                .velocity
                .iter()
                .map(|vel| {
                    [Axis::X, Axis::Y]
                        .iter()
                        .map(|ax| {
                            let mut last = 0.0f64;
                            let mut flips = 0usize;
                            for (v, ok) in vel.iter().zip(&derivs.valid) {
                                let c = ax.component(*v);
                                if !*ok || c.abs() < band {
                                    continue;
                                }
                                if last != 0.0 && c.signum() != last {
                                    flips += 1;
                                }
                                last = c.signum();
                            }
                            flips
                        })
                        .max()
                        .unwrap_or(0)
                })
                .max()
                .unwrap_or(0);
            Some(count as f64 / 2.0)
        }
    }
}

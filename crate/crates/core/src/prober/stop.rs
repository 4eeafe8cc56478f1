use serde::{Deserialize, Serialize};

use super::plan::{ProbeKind, ProbePlan};
use super::run::{run_probe, ProbeRecord};
use super::{ProbeError, ProbeTarget};
use crate::calculators::DeclaredModel;
use crate::vec2::Vec2;

/// Falsified when the measured pull is below this fraction of the declared one.
pub const FALSIFY_FRACTION: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopOutcome {
    /// Released at rest, the body did not fall toward the declared center.
    Falsified,
    /// It fell as declared.
    Consistent,
    /// The controller never brought the body to rest.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopReport {
    pub outcome: StopOutcome,
    /// `k a^2 / (m_p r_stop^2)`.
    pub predicted: f64,
    /// Magnitude of the acceleration fitted to the released motion.
    pub measured: Option<f64>,
    /// One standard deviation of `measured` due to quantization.
    pub measured_noise: Option<f64>,
    pub r_stop: f64,
    pub release_time: Option<f64>,
    /// Speed over the last samples before release.
    pub stop_speed: Option<f64>,
    pub v_tol: f64,
    pub record: ProbeRecord,
}

/// Least-squares `x(s) = c0 + c1 s + c2 s^2` per component; returns the
/// second-derivative estimate and its noise factor `sqrt((A^T A)^-1_22)`.
fn fit_parabola(s: &[f64], p: &[Vec2<f64>]) -> Option<(Vec2<f64>, f64)> {
    let mut g = [[0.0; 3]; 3];
    let mut bx = [0.0; 3];
    let mut by = [0.0; 3];
    for (si, pi) in s.iter().zip(p) {
        let row = [1.0, *si, si * si];
        for a in 0..3 {
            for b in 0..3 {
                g[a][b] += row[a] * row[b];
            }
            bx[a] += row[a] * pi.x;
            by[a] += row[a] * pi.y;
        }
    }
    let inv = invert3(&g)?;
    let c2 = |b: &[f64; 3]| (0..3).map(|k| inv[2][k] * b[k]).sum::<f64>();
    Some((Vec2::new(2.0 * c2(&bx), 2.0 * c2(&by)), inv[2][2].sqrt()))
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-300 {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            // cofactor of (c, r)
            let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
            let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
            inv[r][c] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
        }
    }
    Some(inv)
}

/// Brakes the controlled body to rest, releases it and compares the pull
/// it then feels with the declared inverse-square attraction.
pub fn stop_and_release<M: ProbeTarget>(target: &M, plan: &ProbePlan) -> Result<StopReport, ProbeError> {
    let DeclaredModel::CentralForce { center, .. } = target.declaration().model else {
        return Err(ProbeError::NotApplicable("stop-and-release tests a central-force declaration".into()));
    };
    let coefficient = target.declaration().central_coefficient().expect("central declaration");
    if !matches!(plan.kind, ProbeKind::StopAndRelease { .. }) {
        return Err(ProbeError::InvalidPlan(format!("expected a stop_and_release plan, got {}", plan.name())));
    }
    let v_tol = plan.stop_tolerance().expect("stop plan");
    let record = run_probe(target, plan)?;
    let traj = &record.trajectory;
    let p = &traj.body_positions()?[record.input_body()?];
    let h = traj.sample_period();

    let Some(r) = record.release_sample else {
        let r_stop = (p[p.len() - 1] - center).norm();
        return Ok(StopReport {
            outcome: StopOutcome::Inconclusive,
            predicted: coefficient / (r_stop * r_stop),
            measured: None,
            measured_noise: None,
            r_stop,
            release_time: None,
            stop_speed: None,
            v_tol,
            record,
        });
    };
    let r_stop = (p[r] - center).norm();
    let predicted = coefficient / (r_stop * r_stop);
    let after = &p[r..];
    let s: Vec<f64> = (0..after.len()).map(|k| k as f64 * h).collect();
    let fit = fit_parabola(&s, after);
    let before = &p[r.saturating_sub(10)..=r];
    let stop_speed = if before.len() > 1 {
        Some((before[before.len() - 1] - before[0]).norm() / ((before.len() - 1) as f64 * h))
    } else {
        None
    };
    let (outcome, measured, noise) = match fit {
        Some((a, factor)) => {
            let m = a.norm();
            let noise = 2.0 * traj.quantum() / 12f64.sqrt() * factor;
            let outcome =
                if m < FALSIFY_FRACTION * predicted { StopOutcome::Falsified } else { StopOutcome::Consistent };
            (outcome, Some(m), Some(noise))
        }
        None => (StopOutcome::Inconclusive, None, None),
    };
    Ok(StopReport {
        outcome,
        predicted,
        measured,
        measured_noise: noise,
        r_stop,
        release_time: Some(traj.times()[r]),
        stop_speed,
        v_tol,
        record,
    })
}

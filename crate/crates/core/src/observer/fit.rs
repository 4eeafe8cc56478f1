use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::constraints::infer_constraints;
use super::derivatives::{estimate_derivatives, Derivatives};
use super::events::EventList;
use super::sensor::Trajectory;
use super::{ObserverConfig, ObserverError};
use crate::calculators::Family;
use crate::dynamics::AxisLine;
use crate::vec2::Vec2;

/// Best fit of one candidate family to the observed accelerations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: Family,
    pub params: BTreeMap<String, f64>,
    /// Per-component RMS of `a_measured - a_model` over unmasked samples;
    /// infinite when the parameter search failed.
    pub rms_residual: f64,
    pub per_segment_rms_residual: Vec<f64>,
    /// `rms_residual` divided by the RMS acceleration (or by the noise floor
    /// when the motion is quieter than the sensor).
    pub normalized_residual: f64,
    /// Per-component RMS acceleration noise implied by the sensor.
    pub noise_floor: f64,
    /// Residual a fitting family must stay under, in acceleration units.
    pub tolerance: f64,
    pub inferred_constraints: Vec<AxisLine<f64>>,
    pub uses_only_observed: bool,
    pub samples_used: usize,
}

impl FitResult {
    pub fn fits(&self) -> bool {
        self.rms_residual.is_finite()
            && self.samples_used > 0
            && self.rms_residual <= self.tolerance
            && self.per_segment_rms_residual.iter().all(|r| *r <= self.tolerance)
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    pub fn center(&self) -> Option<Vec2<f64>> {
        Some(Vec2::new(self.param("center_x")?, self.param("center_y")?))
    }
}

/// Fits one family, estimating derivatives and constraints on the way.
pub fn fit(
    traj: &Trajectory,
    events: &EventList,
    family: Family,
    config: &ObserverConfig,
) -> Result<FitResult, ObserverError> {
    let derivs = estimate_derivatives(traj, events, config)?;
    let walls = infer_constraints(traj, events, config.min_wall_support).lines();
    fit_with_derivatives(traj, &derivs, family, walls, config)
}

/// `(position, acceleration)` pairs of every body at every unmasked sample,
/// grouped by segment.
type SegmentData = Vec<Vec<(Vec2<f64>, Vec2<f64>)>>;

fn segment_data(traj: &Trajectory, d: &Derivatives) -> Result<SegmentData, ObserverError> {
    let paths = traj.body_positions()?;
    Ok(d.segments()
        .into_iter()
        .map(|seg| {
            seg.flat_map(|i| paths.iter().zip(&d.acceleration).map(move |(p, a)| (p[i], a[i])))
                .collect()
        })
        .collect())
}

pub fn fit_with_derivatives(
    traj: &Trajectory,
    derivs: &Derivatives,
    family: Family,
    walls: Vec<AxisLine<f64>>,
    config: &ObserverConfig,
) -> Result<FitResult, ObserverError> {
    let segments = segment_data(traj, derivs)?;
    let all: Vec<(Vec2<f64>, Vec2<f64>)> = segments.iter().flatten().copied().collect();
    let mut params = BTreeMap::new();
    let model: Box<dyn Fn(Vec2<f64>) -> Vec2<f64>> = match family {
        Family::FreeMotion => Box::new(|_| Vec2::zero()),
        Family::Harmonic => {
            let num: f64 = all.iter().map(|(p, a)| a.dot(*p)).sum();
            let den: f64 = all.iter().map(|(p, _)| p.norm_squared()).sum();
            let w2 = if den > 0.0 { (-num / den).max(0.0) } else { 0.0 };
            params.insert("omega".to_string(), w2.sqrt());
            Box::new(move |p| -p * w2)
        }
        Family::CentralForce => match fit_central(&all) {
            Some((center, c)) => {
                params.insert("coefficient".to_string(), c);
                params.insert("center_x".to_string(), center.x);
                params.insert("center_y".to_string(), center.y);
                Box::new(move |p| inverse_square(p - center) * c)
            }
            None => Box::new(|_| Vec2::new(f64::INFINITY, f64::INFINITY)),
        },
    };
    let rms = |data: &[(Vec2<f64>, Vec2<f64>)]| {
        if data.is_empty() {
            return 0.0;
        }
        let s: f64 = data.iter().map(|(p, a)| (*a - model(*p)).norm_squared()).sum();
        let r = (s / (2 * data.len()) as f64).sqrt();
        if r.is_nan() {
            f64::INFINITY
        } else {
            r
        }
    };
    let rms_residual = rms(&all);
    let per_segment_rms_residual: Vec<f64> = segments.iter().map(|s| rms(s)).collect();
    let accel_rms = derivs.acceleration_rms();
    let noise_floor = derivs.noise_rms;
    let normalized_residual = rms_residual / accel_rms.max(noise_floor).max(f64::MIN_POSITIVE);
    Ok(FitResult {
        family,
        params,
        rms_residual,
        per_segment_rms_residual,
        normalized_residual,
        noise_floor,
        tolerance: config.fit_tolerance * noise_floor,
        inferred_constraints: walls,
        uses_only_observed: true,
        samples_used: derivs.valid_count(),
    })
}

/// Unit-coefficient inverse-square attraction toward the origin of `r`.
fn inverse_square(r: Vec2<f64>) -> Vec2<f64> {
    let d = r.norm();
    -r / (d * d * d)
}

/// Optimal non-negative coefficient for a given center, and the squared
/// residual it leaves.
fn project(data: &[(Vec2<f64>, Vec2<f64>)], center: Vec2<f64>) -> Option<(f64, f64)> {
    let mut ag = 0.0;
    let mut gg = 0.0;
    for (p, a) in data {
        let r = *p - center;
        if r.norm() < crate::dynamics::SINGULARITY_FLOOR {
            return None;
        }
        let g = inverse_square(r);
        ag += a.dot(g);
        gg += g.norm_squared();
    }
    let c = (ag / gg).max(0.0);
    let sse: f64 = data.iter().map(|(p, a)| (*a - inverse_square(*p - center) * c).norm_squared()).sum();
    sse.is_finite().then_some((c, sse))
}

/// Point closest (in the least-squares sense) to every acceleration line.
fn line_intersection(data: &[(Vec2<f64>, Vec2<f64>)]) -> Option<Vec2<f64>> {
    let (mut axx, mut axy, mut ayy, mut bx, mut by) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, a) in data {
        let n2 = a.norm_squared();
        // projector onto the normal of the line through p along a, times |a|^2
        let (mxx, mxy, myy) = (n2 - a.x * a.x, -a.x * a.y, n2 - a.y * a.y);
        axx += mxx;
        axy += mxy;
        ayy += myy;
        bx += mxx * p.x + mxy * p.y;
        by += mxy * p.x + myy * p.y;
    }
    let det = axx * ayy - axy * axy;
    let trace = axx + ayy;
    if !(det > 1e-12 * trace * trace) {
        return None;
    }
    Some(Vec2::new((ayy * bx - axy * by) / det, (axx * by - axy * bx) / det))
}

/// Variable-projection fit: Levenberg–Marquardt over the center with the
/// coefficient solved in closed form at every trial point.
fn fit_central(data: &[(Vec2<f64>, Vec2<f64>)]) -> Option<(Vec2<f64>, f64)> {
    if data.len() < 3 {
        return None;
    }
    let n = data.len() as f64;
    let centroid = data.iter().fold(Vec2::zero(), |s, (p, _)| s + *p) / n;
    let scale = (data.iter().map(|(p, _)| (*p - centroid).norm_squared()).sum::<f64>() / n)
        .sqrt()
        .max(1e-6);
    let start = line_intersection(data)
        .filter(|z| z.is_finite() && (*z - centroid).norm() < 1e3 * scale)
        .unwrap_or(centroid);
    let mut z = start;
    let (mut c, mut sse) = project(data, z).or_else(|| {
        z += Vec2::new(1e-3 * scale, 0.0);
        project(data, z)
    })?;
    let residuals = |z: Vec2<f64>, c: f64| -> Vec<f64> {
        data.iter()
            .flat_map(|(p, a)| {
                let e = *a - inverse_square(*p - z) * c;
                [e.x, e.y]
            })
            .collect()
    };
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let r0 = residuals(z, c);
        let eps = 1e-6 * scale;
        let mut jac = [Vec::new(), Vec::new()];
        for (k, dz) in [Vec2::new(eps, 0.0), Vec2::new(0.0, eps)].into_iter().enumerate() {
            let (ck, _) = project(data, z + dz)?;
            let rk = residuals(z + dz, ck);
            jac[k] = rk.iter().zip(&r0).map(|(a, b)| (a - b) / eps).collect();
        }
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let (jxx, jxy, jyy) = (dot(&jac[0], &jac[0]), dot(&jac[0], &jac[1]), dot(&jac[1], &jac[1]));
        let (gx, gy) = (dot(&jac[0], &r0), dot(&jac[1], &r0));
        let mut improved = false;
        for _ in 0..30 {
            let (axx, ayy) = (jxx * (1.0 + lambda), jyy * (1.0 + lambda));
            let det = axx * ayy - jxy * jxy;
            if !(det.abs() > 0.0) {
                lambda *= 10.0;
                continue;
            }
            let step = Vec2::new(-(ayy * gx - jxy * gy) / det, -(axx * gy - jxy * gx) / det);
            let trial = z + step;
            if let Some((ct, st)) = project(data, trial) {
                if st < sse {
                    let rel = (sse - st) / sse.max(f64::MIN_POSITIVE);
                    z = trial;
                    c = ct;
                    sse = st;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    if rel < 1e-12 || step.norm() < 1e-12 * scale {
                        return Some((z, c));
                    }
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !improved {
            // no descent direction left: a (local) minimum
            return Some((z, c));
        }
    }
    None
}

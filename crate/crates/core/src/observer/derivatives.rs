use std::ops::Range;

use super::events::EventList;
use super::sensor::Trajectory;
use super::{ObserverConfig, ObserverError};
use crate::vec2::Vec2;

/// Savitzky–Golay weights of a centered quadratic fit over `2w + 1` samples.
///
/// `first[j]` and `second[j]` (index `j + w`) give, once divided by `h` and
/// `h^2`, the fitted velocity and acceleration at the window center.
#[derive(Clone, Debug, PartialEq)]
pub struct SgWeights {
    pub half_window: usize,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl SgWeights {
    pub fn new(half_window: usize) -> Self {
        assert!(half_window >= 1, "a quadratic needs at least three samples");
        let w = half_window as i64;
        let m = (w * (w + 1)) as f64 / 3.0;
        let s: f64 = (-w..=w).map(|j| ((j * j) as f64 - m).powi(2)).sum();
        let sj2: f64 = (-w..=w).map(|j| (j * j) as f64).sum();
        Self {
            half_window,
            first: (-w..=w).map(|j| j as f64 / sj2).collect(),
            second: (-w..=w).map(|j| 2.0 * ((j * j) as f64 - m) / s).collect(),
        }
    }

    /// RMS acceleration error produced by independent uniform quantization
    /// errors of width `quantum`.
    pub fn acceleration_noise_rms(&self, quantum: f64, h: f64) -> f64 {
        let norm2: f64 = self.second.iter().map(|c| c * c).sum::<f64>().sqrt();
        quantum / 12f64.sqrt() * norm2 / (h * h)
    }

    /// Worst-case acceleration error for errors bounded by `quantum / 2`.
    pub fn acceleration_noise_peak(&self, quantum: f64, h: f64) -> f64 {
        let norm1: f64 = self.second.iter().map(|c| c.abs()).sum();
        quantum / 2.0 * norm1 / (h * h)
    }

    /// Velocity and acceleration of `series` at `center`.
    pub fn apply(&self, series: &[f64], center: usize, h: f64) -> (f64, f64) {
        let w = self.half_window;
        let window = &series[center - w..=center + w];
        let v: f64 = window.iter().zip(&self.first).map(|(x, c)| x * c).sum();
        let a: f64 = window.iter().zip(&self.second).map(|(x, c)| x * c).sum();
        (v / h, a / (h * h))
    }
}

/// Smoothed velocities and accelerations of every observed body, with the
/// samples whose windows straddle an event masked out.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivatives {
    pub half_window: usize,
    /// `velocity[body][sample]`; zero where masked.
    pub velocity: Vec<Vec<Vec2<f64>>>,
    pub acceleration: Vec<Vec<Vec2<f64>>>,
    pub valid: Vec<bool>,
    /// Per-component RMS acceleration noise implied by the quantum.
    pub noise_rms: f64,
    pub noise_peak: f64,
    pub diagnostics: Vec<String>,
}

impl Derivatives {
    /// Maximal runs of valid samples.
    pub fn segments(&self) -> Vec<Range<usize>> {
        runs(&self.valid)
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Per-component RMS of the estimated acceleration over valid samples.
    pub fn acceleration_rms(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for body in &self.acceleration {
            for (a, ok) in body.iter().zip(&self.valid) {
                if *ok {
                    sum += a.norm_squared();
                    n += 2;
                }
            }
        }
        if n == 0 {
            0.0
        } else {
            (sum / n as f64).sqrt()
        }
    }
}

fn runs(mask: &[bool]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &m) in mask.iter().enumerate() {
        match (m, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..mask.len());
    }
    out
}

/// Derivatives with a fixed half-window.
pub fn estimate_derivatives_with_window(
    traj: &Trajectory,
    events: &EventList,
    half_window: usize,
    min_segment_samples: usize,
) -> Result<Derivatives, ObserverError> {
    differentiate(traj, &events.times(), half_window, min_segment_samples)
}

fn differentiate(
    traj: &Trajectory,
    mask_times: &[f64],
    half_window: usize,
    min_segment_samples: usize,
) -> Result<Derivatives, ObserverError> {
    let n = traj.len();
    if half_window < 1 || 2 * half_window + 1 > n {
        return Err(ObserverError::InsufficientEvidence { samples: n, required: 2 * half_window + 1 });
    }
    let h = traj.sample_period();
    let t = traj.times();
    let sg = SgWeights::new(half_window);
    let w = half_window;

    let mut valid = vec![false; n];
    let mut event_times = mask_times.to_vec();
    event_times.sort_by(f64::total_cmp);
    for i in w..n - w {
        let lo = t[i - w] - h;
        let hi = t[i + w] + h;
        // first event at or after `lo`
        let k = event_times.partition_point(|&e| e < lo);
        valid[i] = !(k < event_times.len() && event_times[k] <= hi);
    }
    let mut diagnostics = Vec::new();
    for seg in runs(&valid) {
        if seg.len() < min_segment_samples {
            diagnostics.push(format!(
                "segment of {} samples near t = {:.3} is too short to differentiate; skipped",
                seg.len(),
                t[seg.start]
            ));
            for v in &mut valid[seg] {
                *v = false;
            }
        }
    }

    let paths = traj.body_positions()?;
    let mut velocity = Vec::with_capacity(paths.len());
    let mut acceleration = Vec::with_capacity(paths.len());
    for path in &paths {
        let xs: Vec<f64> = path.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = path.iter().map(|p| p.y).collect();
        let mut vel = vec![Vec2::zero(); n];
        let mut acc = vec![Vec2::zero(); n];
        for i in (0..n).filter(|&i| valid[i]) {
            let (vx, ax) = sg.apply(&xs, i, h);
            let (vy, ay) = sg.apply(&ys, i, h);
            vel[i] = Vec2::new(vx, vy);
            acc[i] = Vec2::new(ax, ay);
        }
        velocity.push(vel);
        acceleration.push(acc);
    }
    let q = traj.quantum();
    Ok(Derivatives {
        half_window,
        velocity,
        acceleration,
        valid,
        noise_rms: sg.acceleration_noise_rms(q, h),
        noise_peak: sg.acceleration_noise_peak(q, h),
        diagnostics,
    })
}

/// Derivatives with an adaptively chosen window: the narrowest one whose
/// quantization noise is a small fraction of the signal seen through the
/// widest window.
pub fn estimate_derivatives(
    traj: &Trajectory,
    events: &EventList,
    config: &ObserverConfig,
) -> Result<Derivatives, ObserverError> {
    estimate_derivatives_masking(traj, &events.times(), config)
}

/// Like [`estimate_derivatives`], masking every sample whose window comes
/// within one sample of any of `mask_times`.
pub fn estimate_derivatives_masking(
    traj: &Trajectory,
    mask_times: &[f64],
    config: &ObserverConfig,
) -> Result<Derivatives, ObserverError> {
    let n = traj.len();
    let mut w_max = config.max_half_window.min((n.saturating_sub(1)) / 4).max(1);
    let coarse = loop {
        let d = differentiate(traj, mask_times, w_max, config.min_segment_samples)?;
        if d.valid_count() > 0 || w_max == 1 {
            break d;
        }
        w_max = (w_max / 2).max(1);
    };
    if coarse.valid_count() == 0 {
        return Ok(coarse);
    }
    let target = config.noise_target * coarse.acceleration_rms();
    let (q, h) = (traj.quantum(), traj.sample_period());
    let chosen = (1..=w_max)
        .find(|&w| SgWeights::new(w).acceleration_noise_rms(q, h) <= target)
        .unwrap_or(w_max);
    if chosen == w_max {
        return Ok(coarse);
    }
    let d = differentiate(traj, mask_times, chosen, config.min_segment_samples)?;
    Ok(if d.valid_count() > 0 { d } else { coarse })
}

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::sensor::Trajectory;
use super::ObserverError;
use crate::vec2::Vec2;

/// Samples used on each side of an event to fit the straight approach and
/// departure lines.
pub const EVENT_FIT_SAMPLES: usize = 10;

/// An impulsive velocity change of one observed body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub body: usize,
    pub location: Vec2<f64>,
    pub velocity_before: Vec2<f64>,
    pub velocity_after: Vec2<f64>,
    /// First and last sample index touched by the flagged gaps.
    pub first_sample: usize,
    pub last_sample: usize,
}

impl Event {
    pub fn velocity_change(&self) -> Vec2<f64> {
        self.velocity_after - self.velocity_before
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EventList {
    /// Sorted by time, then body.
    pub events: Vec<Event>,
}

impl EventList {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.time).collect()
    }

    pub fn locations(&self) -> Vec<Vec2<f64>> {
        self.events.iter().map(|e| e.location).collect()
    }
}

/// Velocity jump, per component, that flags a gap: `threshold` times three
/// standard deviations of a finite-difference velocity under quantization.
pub fn jump_threshold(threshold: f64, quantum: f64, sample_period: f64) -> f64 {
    threshold * 3.0 * quantum * 2f64.sqrt() / sample_period
}

/// Finds impulsive events in a trajectory.
pub fn detect_events(traj: &Trajectory, threshold: f64) -> Result<EventList, ObserverError> {
    detect_events_with_reference(traj, threshold, None)
}

/// Finds events after subtracting a known smooth displacement from every
/// body (`reference[body][sample]`), e.g. the response to applied forces.
pub fn detect_events_with_reference(
    traj: &Trajectory,
    threshold: f64,
    reference: Option<&[Vec<Vec2<f64>>]>,
) -> Result<EventList, ObserverError> {
    if !(threshold > 0.0) {
        return Err(ObserverError::InvalidConfig("event threshold must be > 0".into()));
    }
    let paths = traj.body_positions()?;
    if let Some(r) = reference {
        if r.len() != paths.len() || r.iter().any(|b| b.len() != traj.len()) {
            return Err(ObserverError::Malformed("reference displacement has the wrong shape".into()));
        }
    }
    let h = traj.sample_period();
    let t = traj.times();
    let limit = jump_threshold(threshold, traj.quantum(), h);
    let mut events = Vec::new();
    for (body, path) in paths.iter().enumerate() {
        let q: Vec<Vec2<f64>> = match reference {
            Some(r) => path.iter().zip(&r[body]).map(|(p, s)| *p - *s).collect(),
            None => path.clone(),
        };
        let n = q.len();
        if n < 4 {
            continue;
        }
        let v: Vec<Vec2<f64>> = q.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        let flagged: Vec<bool> = (0..v.len())
            .map(|j| {
                if j == 0 || j + 1 >= v.len() {
                    return false;
                }
                let jump = v[j + 1] - v[j - 1];
                jump.x.abs() > limit || jump.y.abs() > limit
            })
            .collect();
        let mut gap_runs = Vec::new();
        let mut j = 0;
        while j < flagged.len() {
            if flagged[j] {
                let start = j;
                while j < flagged.len() && flagged[j] {
                    j += 1;
                }
                gap_runs.push((start, j - 1));
            } else {
                j += 1;
            }
        }
        let weak = kink_runs(&q, &gap_runs, threshold, traj.quantum());
        gap_runs.extend(weak);
        gap_runs.sort_unstable();
        for (k, &(g0, g1)) in gap_runs.iter().enumerate() {
            let prev_end = if k == 0 { 0 } else { gap_runs[k - 1].1 + 1 };
            let next_start = gap_runs.get(k + 1).map_or(n - 1, |r| r.0);
            let pre_lo = g0.saturating_sub(EVENT_FIT_SAMPLES).max(prev_end);
            let post_hi = (g1 + 1 + EVENT_FIT_SAMPLES).min(next_start);
            let pre = fit_line(&q, t, pre_lo, g0);
            let post = fit_line(&q, t, g1 + 1, post_hi);
            let (t0, t1) = (t[g0], t[g1 + 1]);
            let (time, loc, vb, va) = match (pre, post) {
                (Some((a, b, ta)), Some((c, d, tc))) => {
                    // both lines re-expressed about t0
                    let a0 = a + b * (t0 - ta);
                    let c0 = c + d * (t0 - tc);
                    let dv = d - b;
                    let ts = if dv.norm_squared() > 0.0 {
                        (t0 - (c0 - a0).dot(dv) / dv.norm_squared()).clamp(t0, t1)
                    } else {
                        0.5 * (t0 + t1)
                    };
                    let loc = (a0 + b * (ts - t0) + c0 + d * (ts - t0)) * 0.5;
                    (ts, loc, b, d)
                }
                _ => {
                    let mid = (g0 + g1).div_ceil(2);
                    let vb = if g0 > 0 { v[g0 - 1] } else { v[g0] };
                    let va = v.get(g1 + 1).copied().unwrap_or(v[g1]);
                    (0.5 * (t0 + t1), q[mid], vb, va)
                }
            };
            // back to absolute motion: the reference is smooth, so its
            // slope over the same windows is added on each side
            let (loc, vb, va) = match reference {
                Some(r) => {
                    let slope = |lo, hi| fit_line(&r[body], t, lo, hi).map_or(Vec2::zero(), |f| f.1);
                    (
                        loc + interpolate(&r[body], t, time),
                        vb + slope(pre_lo, g0),
                        va + slope(g1 + 1, post_hi),
                    )
                }
                None => (loc, vb, va),
            };
            events.push(Event {
                time,
                body,
                location: loc,
                velocity_before: vb,
                velocity_after: va,
                first_sample: g0,
                last_sample: g1 + 1,
            });
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.body.cmp(&b.body)));
    Ok(EventList { events })
}

/// Kink detector scales: (half-window in samples, degree of the smooth
/// background polynomial). The narrow pass resolves nearby events; the wide
/// one reaches slow reflections, and needs a quartic background so that
/// smooth curvature does not leak into the kink estimate.
const KINK_SCALES: [(usize, usize); 2] = [(10, 2), (40, 4)];

/// Least-squares weights extracting the slope change between samples
/// `pre - 1` and `pre` from a polynomial of `degree` plus `dv max(0, s)`.
/// The result is scale-free: only its ratio to the quantization bound of
/// the same weights is used.
fn kink_weights(pre: usize, post: usize, degree: usize) -> Vec<f64> {
    let m = degree + 2;
    let scale = pre.max(post) as f64;
    let rows: Vec<Vec<f64>> = (0..pre + post)
        .map(|i| {
            let s = (i as f64 - (pre as f64 - 0.5)) / scale;
            let mut r: Vec<f64> = (0..=degree).map(|p| s.powi(p as i32)).collect();
            r.push(s.max(0.0));
            r
        })
        .collect();
    // solve (A^T A) z = e_last; the kink weights are then A z
    let mut g = vec![vec![0.0; m + 1]; m];
    for r in &rows {
        for a in 0..m {
            for b in 0..m {
                g[a][b] += r[a] * r[b];
            }
        }
    }
    g[m - 1][m] = 1.0;
    for col in 0..m {
        let piv = (col..m).max_by(|&a, &b| g[a][col].abs().total_cmp(&g[b][col].abs())).unwrap();
        g.swap(col, piv);
        for r in 0..m {
            if r != col {
                let f = g[r][col] / g[col][col];
                for c in col..=m {
                    g[r][c] -= f * g[col][c];
                }
            }
        }
    }
    let z: Vec<f64> = (0..m).map(|r| g[r][m] / g[r][r]).collect();
    rows.iter().map(|r| r.iter().zip(&z).map(|(a, b)| a * b).sum()).collect()
}

/// Weak kinks the single-gap statistic misses, found at each scale in turn.
/// Windows stop at events already found so that those never leak into the
/// estimate. Each returned run is the gap of a locally strongest kink
/// widened by one.
fn kink_runs(
    q: &[Vec2<f64>],
    strong: &[(usize, usize)],
    threshold: f64,
    quantum: f64,
) -> Vec<(usize, usize)> {
    let mut known = strong.to_vec();
    let mut found = Vec::new();
    for (k, degree) in KINK_SCALES {
        known.sort_unstable();
        let runs = kink_runs_at(q, &known, threshold, quantum, k, degree);
        known.extend(&runs);
        found.extend(runs);
    }
    found
}

fn kink_runs_at(
    q: &[Vec2<f64>],
    known: &[(usize, usize)],
    threshold: f64,
    quantum: f64,
    k: usize,
    degree: usize,
) -> Vec<(usize, usize)> {
    let n = q.len();
    let min_side = degree + 1;
    let mut cache: HashMap<(usize, usize), (Vec<f64>, f64)> = HashMap::new();
    let mut score = vec![0.0; n.saturating_sub(1)];
    for (j, sc) in score.iter_mut().enumerate() {
        // samples j and j + 1 straddle the gap
        let mut lo = j.saturating_sub(k - 1);
        let mut hi = (j + k).min(n - 1);
        let mut inside = false;
        for &(g0, g1) in known {
            if j + 1 >= g0 && j <= g1 + 1 {
                inside = true;
                break;
            }
            if g1 < j {
                lo = lo.max(g1 + 1);
            }
            if g0 > j {
                hi = hi.min(g0);
            }
        }
        let (pre, post) = (j + 1 - lo, hi - j);
        if inside || pre < min_side || post < min_side {
            continue;
        }
        let (w, peak) = cache.entry((pre, post)).or_insert_with(|| {
            let w = kink_weights(pre, post, degree);
            let peak = quantum / 2.0 * w.iter().map(|c| c.abs()).sum::<f64>();
            (w, peak)
        });
        let d = q[lo..=hi].iter().zip(w.iter()).fold(Vec2::zero(), |s, (p, c)| s + *p * *c);
        *sc = d.x.abs().max(d.y.abs()) / (threshold * *peak);
    }
    // strongest kinks first; anything within one window of an accepted
    // kink is a side lobe of it
    let mut cands: Vec<usize> = (0..score.len()).filter(|&j| score[j] > 1.0).collect();
    cands.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    let mut peaks: Vec<usize> = Vec::new();
    for j in cands {
        if peaks.iter().all(|&p| p.abs_diff(j) > 2 * k) {
            peaks.push(j);
        }
    }
    peaks.sort_unstable();
    peaks
        .into_iter()
        .map(|p| (p.saturating_sub(1), (p + 1).min(score.len() - 1)))
        .collect()
}

/// Least-squares line through samples `lo..=hi`: returns the value at the
/// mean time, the slope and that mean time.
fn fit_line(q: &[Vec2<f64>], t: &[f64], lo: usize, hi: usize) -> Option<(Vec2<f64>, Vec2<f64>, f64)> {
    if hi <= lo {
        return None;
    }
    let n = (hi - lo + 1) as f64;
    let tm = t[lo..=hi].iter().sum::<f64>() / n;
    let qm = q[lo..=hi].iter().fold(Vec2::zero(), |s, p| s + *p) / n;
    let mut stt = 0.0;
    let mut stq = Vec2::zero();
    for i in lo..=hi {
        let dt = t[i] - tm;
        stt += dt * dt;
        stq += (q[i] - qm) * dt;
    }
    Some((qm, stq / stt, tm))
}

fn interpolate(series: &[Vec2<f64>], t: &[f64], at: f64) -> Vec2<f64> {
    let h = t[1] - t[0];
    let x = ((at - t[0]) / h).clamp(0.0, (t.len() - 1) as f64);
    let i = (x.floor() as usize).min(t.len() - 2);
    let f = x - i as f64;
    series[i] * (1.0 - f) + series[i + 1] * f
}

use serde::{Deserialize, Serialize};

use super::ObserverError;
use crate::calculators::Calculator;
use crate::scalar::Real;
use crate::vec2::Vec2;

/// Minimum number of sampling periods an observation must span.
pub const MIN_SAMPLE_PERIODS: f64 = 100.0;

/// The observer's instruments: finite sampling rate and finite, non-zero
/// position resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSpec {
    pub sample_period: f64,
    pub quantum: f64,
    pub duration: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self { sample_period: 0.01, quantum: 1e-3, duration: 60.0 }
    }
}

impl SensorSpec {
    pub fn validate(&self) -> Result<(), ObserverError> {
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            return Err(ObserverError::InvalidSensor("sample period must be > 0".into()));
        }
        if !(self.quantum > 0.0 && self.quantum.is_finite()) {
            return Err(ObserverError::InvalidSensor("quantum must be > 0".into()));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(ObserverError::InvalidSensor("duration must be > 0".into()));
        }
        if self.duration < MIN_SAMPLE_PERIODS * self.sample_period * (1.0 - 1e-12) {
            return Err(ObserverError::InsufficientEvidence {
                samples: self.sample_count(),
                required: MIN_SAMPLE_PERIODS as usize + 1,
            });
        }
        Ok(())
    }

    /// Samples taken at `t = 0, T_s, 2 T_s, ..` up to and including `duration`.
    pub fn sample_count(&self) -> usize {
        (self.duration / self.sample_period + 1e-9).floor() as usize + 1
    }

    /// Integration steps per sample; `dt` must divide the sample period.
    pub fn steps_per_sample(&self, dt: f64) -> Result<usize, ObserverError> {
        if !(dt > 0.0) {
            return Err(ObserverError::InvalidSensor("simulation dt must be > 0".into()));
        }
        let ratio = self.sample_period / dt;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-6 * ratio {
            return Err(ObserverError::InvalidSensor(format!(
                "simulation dt {dt} does not divide the sample period {}",
                self.sample_period
            )));
        }
        Ok(n as usize)
    }
}

/// Rounds to the nearest multiple of `quantum`, ties away from zero.
pub fn quantize(value: f64, quantum: f64) -> f64 {
    (value / quantum).round() * quantum
}

/// Quantized, uniformly sampled output dofs: the observer's only evidence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    dof_ids: Vec<String>,
    times: Vec<f64>,
    samples: Vec<Vec<f64>>,
    sample_period: f64,
    quantum: f64,
    warnings: Vec<String>,
}

impl Trajectory {
    /// Checks the sampling invariants: constant spacing, values on the
    /// quantum grid, rows as wide as the header.
    pub fn new(
        dof_ids: Vec<String>,
        times: Vec<f64>,
        samples: Vec<Vec<f64>>,
        quantum: f64,
    ) -> Result<Self, ObserverError> {
        if !(quantum > 0.0) {
            return Err(ObserverError::InvalidSensor("quantum must be > 0".into()));
        }
        if times.len() != samples.len() {
            return Err(ObserverError::Malformed("times and samples differ in length".into()));
        }
        if times.len() < 2 {
            return Err(ObserverError::InsufficientEvidence { samples: times.len(), required: 101 });
        }
        let period = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        if !(period > 0.0) {
            return Err(ObserverError::Malformed("times must be strictly increasing".into()));
        }
        for (i, w) in times.windows(2).enumerate() {
            let gap = w[1] - w[0];
            if !(gap > 0.0) || (gap - period).abs() > 1e-6 * period {
                return Err(ObserverError::Malformed(format!(
                    "sample {} breaks the constant spacing {period}",
                    i + 1
                )));
            }
        }
        for (i, row) in samples.iter().enumerate() {
            if row.len() != dof_ids.len() {
                return Err(ObserverError::Malformed(format!(
                    "sample {i} has {} values, expected {}",
                    row.len(),
                    dof_ids.len()
                )));
            }
            for &v in row {
                let k = v / quantum;
                if !v.is_finite() || (k - k.round()).abs() > 1e-6 * k.abs().max(1.0) {
                    return Err(ObserverError::Malformed(format!(
                        "sample {i} value {v} is not a multiple of the quantum {quantum}"
                    )));
                }
            }
        }
        Ok(Self { dof_ids, times, samples, sample_period: period, quantum, warnings: Vec::new() })
    }

    pub fn dof_ids(&self) -> &[String] {
        &self.dof_ids
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn push_warning(&mut self, w: impl Into<String>) {
        self.warnings.push(w.into());
    }

    pub fn column(&self, dof: &str) -> Option<Vec<f64>> {
        let j = self.dof_ids.iter().position(|d| d == dof)?;
        Some(self.samples.iter().map(|r| r[j]).collect())
    }

    /// Pairs output columns into planar bodies: `x<s>` with `y<s>`.
    pub fn bodies(&self) -> Result<Vec<(usize, usize)>, ObserverError> {
        let mut out = Vec::new();
        let mut used = vec![false; self.dof_ids.len()];
        for (i, id) in self.dof_ids.iter().enumerate() {
            if let Some(suffix) = id.strip_prefix('x') {
                let partner = format!("y{suffix}");
                if let Some(j) = self.dof_ids.iter().position(|d| *d == partner) {
                    out.push((i, j));
                    used[i] = true;
                    used[j] = true;
                }
            }
        }
        if let Some(k) = used.iter().position(|u| !u) {
            return Err(ObserverError::Malformed(format!(
                "output dof `{}` has no planar partner",
                self.dof_ids[k]
            )));
        }
        Ok(out)
    }

    /// Positions of each body at every sample: `result[body][sample]`.
    pub fn body_positions(&self) -> Result<Vec<Vec<Vec2<f64>>>, ObserverError> {
        Ok(self
            .bodies()?
            .into_iter()
            .map(|(i, j)| self.samples.iter().map(|r| Vec2::new(r[i], r[j])).collect())
            .collect())
    }

    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    pub fn has_min_evidence(&self) -> bool {
        self.len() > MIN_SAMPLE_PERIODS as usize
    }

    pub(crate) fn attach_evidence_warnings(&mut self) {
        let Ok(bodies) = self.body_positions() else { return };
        let q = self.quantum;
        let mut extent: f64 = 0.0;
        let mut steps = Vec::new();
        for path in &bodies {
            let (mut lo, mut hi) = (path[0], path[0]);
            for p in path {
                lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
            }
            extent = extent.max((hi.x - lo.x).max(hi.y - lo.y));
            steps.extend(path.windows(2).map(|w| (w[1] - w[0]).norm()));
        }
        if q >= extent {
            self.push_warning(format!(
                "sensor quantum {q} is not smaller than the observed length scale {extent}"
            ));
        }
        if !steps.is_empty() {
            steps.sort_by(f64::total_cmp);
            let median = steps[steps.len() / 2];
            if median < 2.0 * q {
                self.push_warning(format!(
                    "low evidence: median motion per sample {median} is below two quanta"
                ));
            }
        }
    }
}

/// Passively watches a calculator: simulates with no input forces and
/// records the quantized output dofs every sample period.
pub fn observe<T: Real>(
    calculator: &Calculator<T>,
    sensor: &SensorSpec,
    dt: f64,
) -> Result<Trajectory, ObserverError> {
    sensor.validate()?;
    let per_sample = sensor.steps_per_sample(dt)?;
    let n = sensor.sample_count();
    let mut world = calculator.world.clone();
    let dt_t = T::lit(dt);
    let mut times = Vec::with_capacity(n);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            for _ in 0..per_sample {
                world.step(dt_t, &[])?;
            }
        }
        times.push(i as f64 * sensor.sample_period);
        samples.push(
            calculator
                .output_values_in(&world)
                .into_iter()
                .map(|v| quantize(v.as_f64(), sensor.quantum))
                .collect(),
        );
    }
    let mut traj = Trajectory::new(calculator.partition.output().to_vec(), times, samples, sensor.quantum)?;
    traj.attach_evidence_warnings();
    Ok(traj)
}

/// Builds a trajectory from externally recorded rows (e.g. a CSV file),
/// attaching the same evidence warnings as [`observe`].
pub fn trajectory_from_rows(
    dof_ids: Vec<String>,
    times: Vec<f64>,
    samples: Vec<Vec<f64>>,
    quantum: f64,
) -> Result<Trajectory, ObserverError> {
    let mut t = Trajectory::new(dof_ids, times, samples, quantum)?;
    if !t.has_min_evidence() {
        return Err(ObserverError::InsufficientEvidence {
            samples: t.len(),
            required: MIN_SAMPLE_PERIODS as usize + 1,
        });
    }
    t.attach_evidence_warnings();
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculators::{build, CalculatorId, CatalogParams};

    #[test]
    fn quantization_rounds_to_nearest_multiple() {
        assert!((quantize(1.2345, 0.01) - 1.23).abs() < 1e-12);
        assert!((quantize(0.005, 0.01) - 0.01).abs() < 1e-12);
        assert!((quantize(-0.005, 0.01) + 0.01).abs() < 1e-12);
        assert_eq!(quantize(2.5, 1.0), 3.0);
        assert_eq!(quantize(-2.5, 1.0), -3.0);
    }

    #[test]
    fn sample_count_includes_both_ends() {
        let s = SensorSpec { sample_period: 0.01, quantum: 1e-3, duration: 10.0 };
        assert_eq!(s.sample_count(), 1001);
        assert_eq!(s.steps_per_sample(1e-3).unwrap(), 10);
        assert!(s.steps_per_sample(3e-3).is_err());
    }

    #[test]
    fn too_short_observation_is_rejected() {
        let s = SensorSpec { sample_period: 0.01, quantum: 1e-3, duration: 0.5 };
        assert!(matches!(s.validate(), Err(ObserverError::InsufficientEvidence { .. })));
    }

    #[test]
    fn observing_a_quantizes_true_position() {
        let p = CatalogParams { pos: Vec2::new(1.2345, 0.0), vel: Vec2::new(0.0, 0.0), ..Default::default() };
        let a = build::<f64>(CalculatorId::A, &p).unwrap();
        let s = SensorSpec { sample_period: 0.01, quantum: 0.01, duration: 1.0 };
        let t = observe(&a, &s, 1e-3).unwrap();
        assert!((t.samples()[0][0] - 1.23).abs() < 1e-12);
        assert_eq!(t.len(), 101);
    }

    #[test]
    fn b_partial_shows_only_first_disk() {
        let b = build::<f64>(CalculatorId::BPartial, &CatalogParams::default()).unwrap();
        let s = SensorSpec { duration: 2.0, ..Default::default() };
        let t = observe(&b, &s, 1e-3).unwrap();
        assert_eq!(t.dof_ids(), ["x1", "y1"]);
        assert!(t.samples().iter().all(|r| r.len() == 2));
        assert_eq!(t.bodies().unwrap(), vec![(0, 1)]);
    }

    #[test]
    fn coarse_sensor_carries_warning() {
        let a = build::<f64>(CalculatorId::A, &CatalogParams::default()).unwrap();
        let s = SensorSpec { quantum: 0.1, duration: 5.0, ..Default::default() };
        let t = observe(&a, &s, 1e-3).unwrap();
        assert!(t.warnings().iter().any(|w| w.contains("low evidence")));
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let ids = vec!["x".to_string(), "y".to_string()];
        let times = vec![0.0, 0.01, 0.03];
        let rows = vec![vec![0.0, 0.0]; 3];
        assert!(Trajectory::new(ids.clone(), times, rows.clone(), 1e-3).is_err());
        let times = vec![0.0, 0.01, 0.02];
        let bad = vec![vec![0.0, 0.0], vec![0.0005, 0.0], vec![0.0, 0.0]];
        assert!(Trajectory::new(ids.clone(), times.clone(), bad, 1e-3).is_err());
        assert!(Trajectory::new(ids, times, vec![vec![0.0]; 3], 1e-3).is_err());
    }
}

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vrlab_core::calculators::CatalogParams;
use vrlab_core::observer::{ObserverConfig, SensorSpec};

use crate::CliError;

/// Everything a run depends on. Missing keys take their defaults, unknown
/// keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: CatalogParams,
    pub sensor: SensorSpec,
    /// Integration step; must divide the sample period.
    pub dt: f64,
    pub observer: ObserverConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: CatalogParams::default(),
            sensor: SensorSpec::default(),
            dt: 1e-3,
            observer: ObserverConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    /// Defaults, or the file when one is given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.sensor.validate()?;
        self.sensor.steps_per_sample(self.dt)?;
        self.observer.validate()?;
        Ok(())
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form, lower-case hex.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files_fill_in_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"sensor": {"quantum": 0.01}}"#).unwrap();
        assert_eq!(c.sensor.quantum, 0.01);
        assert_eq!(c.sensor.sample_period, 0.01);
        assert_eq!(c.params, CatalogParams::default());
        assert!(serde_json::from_str::<RunConfig>(r#"{"sensr": {}}"#).is_err());
    }

    #[test]
    fn fingerprint_tracks_every_parameter() {
        let a = RunConfig::default();
        assert_eq!(a.fingerprint(), RunConfig::default().fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
        let mut b = a.clone();
        b.params.k = 1.5;
        assert_ne!(a.fingerprint(), b.fingerprint());
        let mut c = a.clone();
        c.observer.fit_tolerance *= 2.0;
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn defaults_round_trip_through_their_printed_form() {
        let c = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&c.to_pretty_json()).unwrap();
        assert_eq!(back, c);
        c.validate().unwrap();
    }
}

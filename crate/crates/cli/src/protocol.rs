//! Messages exchanged with live-session clients, one JSON object per
//! WebSocket text message. The field-level contract is in `PROTOCOL.md`.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use vrlab_core::calculators::{CatalogParams, Declaration};
use vrlab_core::observer::{quantize, SensorSpec, VerdictReport};
use vrlab_core::prober::{ProbePlan, ProbeReport};
use vrlab_core::{Calculator64, Vec2d};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    /// Starts (or restarts) the session on a catalog calculator. Missing
    /// fields take the server's defaults.
    Init {
        calculator: String,
        #[serde(default)]
        params: Option<CatalogParams>,
        #[serde(default)]
        sensor: Option<SensorSpec>,
        #[serde(default)]
        dt: Option<f64>,
        #[serde(default)]
        speed: Option<Speed>,
    },
    /// Force on the input dofs, held until the next force message.
    Force { force: Vec2d },
    /// Runs one probe on a copy of the session's calculator.
    Probe {
        probe: String,
        #[serde(default)]
        plan: Option<ProbePlan>,
    },
}

/// Simulated time units per wall-clock second: a positive number, or
/// `"max"` to run as fast as the connection allows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Speed(pub f64);

impl Serialize for Speed {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str("max")
        }
    }
}

impl<'de> Deserialize<'de> for Speed {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Wire {
            Factor(f64),
            Word(String),
        }
        match Wire::deserialize(d)? {
            Wire::Factor(f) if f > 0.0 && f.is_finite() => Ok(Speed(f)),
            Wire::Word(w) if w == "max" => Ok(Speed(f64::INFINITY)),
            _ => Err(serde::de::Error::custom("speed must be a positive number or \"max\"")),
        }
    }
}

/// One sensor reading: `t` and the quantized output dofs, nothing else.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    #[serde(flatten)]
    pub values: BTreeMap<String, f64>,
}

impl Frame {
    /// Reads the output dofs of `calc` the way its sensor would.
    pub fn observe(calc: &Calculator64, t: f64, quantum: f64) -> Self {
        let outputs = calc.partition.output();
        let values: BTreeMap<String, f64> = outputs
            .iter()
            .cloned()
            .zip(calc.output_values().into_iter().map(|v| quantize(v, quantum)))
            .collect();
        assert!(
            values.keys().all(|k| outputs.contains(k)) && !values.contains_key("t"),
            "frames carry output dofs only"
        );
        Self { t, values }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictSource {
    /// Passive classification of the recent unforced frames.
    Live,
    /// Outcome of a probe command.
    Probe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    /// Acknowledges `init`; frames follow, the first at `t = 0`.
    Init {
        session_id: String,
        calculator: String,
        output_dofs: Vec<String>,
        input_dofs: Vec<String>,
        declaration: Declaration,
        sensor: SensorSpec,
        dt: f64,
        speed: Speed,
    },
    Frame(Frame),
    /// Acknowledges `force`: it is held from the frame at `from_t` on.
    Force { force: Vec2d, from_t: f64 },
    Verdict {
        source: VerdictSource,
        /// Time of the last frame the verdict accounts for.
        t: f64,
        verdict: VerdictReport,
        /// Probe results only.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        probe: Option<ProbeReport>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        falsified: Option<bool>,
        /// Live verdicts: the fit residual of the best family.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        residual: Option<f64>,
    },
    Error {
        message: String,
        /// The server closes the connection after a fatal error.
        fatal: bool,
    },
}

impl ServerMessage {
    pub fn error(message: impl Into<String>, fatal: bool) -> Self {
        ServerMessage::Error { message: message.into(), fatal }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

/// Parses a client message; the error text is sent back verbatim.
pub fn parse_client(text: &str) -> Result<ClientMessage, String> {
    serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use vrlab_core::calculators::{build, CalculatorId};

    #[test]
    fn frames_are_flat_objects_of_output_dofs() {
        let calc: Calculator64 = build(CalculatorId::BPartial, &CatalogParams::default()).unwrap();
        let msg = ServerMessage::Frame(Frame::observe(&calc, 0.5, 1e-3));
        let v: serde_json::Value = serde_json::from_str(&msg.to_json()).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["t", "type", "x1", "y1"]);
        assert_eq!(v["type"], "frame");
        let back: ServerMessage = serde_json::from_value(v).unwrap();
        assert_eq!(back, msg);
    }

    #[test]
    fn client_messages_parse_with_defaults() {
        let m = parse_client(r#"{"type":"init","calculator":"F"}"#).unwrap();
        assert!(matches!(m, ClientMessage::Init { ref calculator, params: None, .. } if calculator == "F"));
        let m = parse_client(r#"{"type":"force","force":{"x":0.5,"y":0}}"#).unwrap();
        assert_eq!(m, ClientMessage::Force { force: Vec2d::new(0.5, 0.0) });
        assert!(parse_client("{not json").unwrap_err().starts_with("malformed message"));
        assert!(parse_client(r#"{"type":"teleport"}"#).is_err());
        let m = parse_client(r#"{"type":"init","calculator":"A","speed":"max"}"#).unwrap();
        assert!(matches!(m, ClientMessage::Init { speed: Some(Speed(s)), .. } if s.is_infinite()));
        assert!(parse_client(r#"{"type":"init","calculator":"A","speed":0}"#).is_err());
    }

    #[test]
    fn errors_are_flat_objects() {
        let json = ServerMessage::error("no controller", false).to_json();
        assert_eq!(json, r#"{"type":"error","message":"no controller","fatal":false}"#);
    }
}

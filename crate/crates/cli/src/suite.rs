use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use vrlab_core::calculators::{build, CalculatorId};
use vrlab_core::observer::{Agreement, Physicality, VerdictReport};
use vrlab_core::prober::{falsify_with, ProbeReport};
use vrlab_core::Calculator64;

use crate::config::RunConfig;
use crate::TOOL_VERSION;

/// What the paper concludes for a calculator. `None` means the paper says
/// nothing about that part.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectation {
    pub passive_physicality: Option<Physicality>,
    pub passive_agreement: Option<Agreement>,
    pub active_agreement: Option<Agreement>,
}

pub fn expectation(id: CalculatorId) -> Expectation {
    use Agreement::*;
    use Physicality::*;
    let (pp, pa, aa) = match id {
        CalculatorId::A | CalculatorId::E => (Some(PhysicalAsDeclared), Some(Agrees), None),
        CalculatorId::BFull | CalculatorId::C | CalculatorId::D => (None, Some(Agrees), None),
        CalculatorId::BPartial => (Some(NonPhysicalHiddenVariables), Some(Disagrees), None),
        CalculatorId::F => (None, None, Some(Agrees)),
        CalculatorId::G => (None, None, Some(Disagrees)),
        CalculatorId::H => (None, Some(Agrees), Some(Disagrees)),
        CalculatorId::X => (None, Some(Disagrees), None),
    };
    Expectation { passive_physicality: pp, passive_agreement: pa, active_agreement: aa }
}

/// The active verdict of a row, `"n/a"` on the wire for calculators
/// without a controller.
#[derive(Clone, Debug, PartialEq)]
pub enum Active {
    NotApplicable,
    Verdict(Box<VerdictReport>),
}

impl Serialize for Active {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Active::NotApplicable => s.serialize_str("n/a"),
            Active::Verdict(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Active {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Wire {
            Word(String),
            Verdict(Box<VerdictReport>),
        }
        match Wire::deserialize(d)? {
            Wire::Word(w) if w == "n/a" => Ok(Active::NotApplicable),
            Wire::Word(w) => Err(serde::de::Error::custom(format!("expected \"n/a\", got `{w}`"))),
            Wire::Verdict(v) => Ok(Active::Verdict(v)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub calculator: CalculatorId,
    pub passive: Option<VerdictReport>,
    pub active: Option<Active>,
    pub probes: Vec<ProbeReport>,
    /// One line on how much was seen.
    pub evidence: String,
    pub paper: Expectation,
    pub matches_paper: bool,
    /// Set when the row crashed; the verdict fields are then empty.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub tool_version: String,
    pub config_fingerprint: String,
    pub config: RunConfig,
    pub rows: Vec<SuiteRow>,
    /// Wall-clock time of the run; the only field that differs between runs.
    pub generated_at: String,
}

impl SuiteReport {
    pub fn failed_rows(&self) -> impl Iterator<Item = &SuiteRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }

    pub fn all_match_paper(&self) -> bool {
        self.rows.iter().all(|r| r.matches_paper)
    }
}

fn matches(e: &Expectation, passive: &VerdictReport, active: &Active) -> bool {
    let passive_ok = e.passive_physicality.is_none_or(|p| p == passive.physicality)
        && e.passive_agreement.is_none_or(|a| a == passive.agreement);
    let active_ok = match (e.active_agreement, active) {
        (None, _) => true,
        (Some(a), Active::Verdict(v)) => v.agreement == a,
        (Some(_), Active::NotApplicable) => false,
    };
    passive_ok && active_ok
}

fn evidence_line(v: &VerdictReport) -> String {
    let e = &v.evidence;
    let mut s = format!(
        "{:.0} time units, {} samples ({} used), {} events ({} unexplained)",
        e.duration, e.samples, e.samples_used, e.events_seen, e.unexplained_events
    );
    if let Some(c) = e.cycles_observed {
        let _ = write!(s, ", {c:.1} cycles");
    }
    s
}

pub fn run_row(id: CalculatorId, config: &RunConfig) -> SuiteRow {
    let paper = expectation(id);
    let outcome = build::<f64>(id, &config.params)
        .map_err(|e| e.to_string())
        .and_then(|c: Calculator64| {
            falsify_with(&c, &config.sensor, config.dt, &config.observer).map_err(|e| e.to_string())
        });
    match outcome {
        Ok(report) => {
            let passive = report.passive.report();
            let active = report.active.as_ref().map_or(Active::NotApplicable, |v| Active::Verdict(Box::new(v.report())));
            SuiteRow {
                calculator: id,
                evidence: evidence_line(&passive),
                matches_paper: matches(&paper, &passive, &active),
                passive: Some(passive),
                active: Some(active),
                probes: report.probes,
                paper,
                error: None,
            }
        }
        Err(e) => SuiteRow {
            calculator: id,
            passive: None,
            active: None,
            probes: Vec::new(),
            evidence: String::new(),
            paper,
            matches_paper: false,
            error: Some(e),
        },
    }
}

/// Every catalog row, in catalog order, evaluated in parallel.
pub fn run_suite(config: &RunConfig) -> SuiteReport {
    let rows = CalculatorId::ALL.par_iter().map(|id| run_row(*id, config)).collect();
    SuiteReport {
        tool_version: TOOL_VERSION.to_string(),
        config_fingerprint: config.fingerprint(),
        config: config.clone(),
        rows,
        generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    }
}

/// Fixed-width text rendering, one line per calculator plus any warnings.
pub fn render_table(report: &SuiteReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<10} {:<44} {:<44} paper", "id", "passive", "active");
    let pair = |p: Physicality, a: Agreement| format!("{p} / {a}");
    for row in &report.rows {
        let (passive, active) = match (&row.passive, &row.active) {
            (Some(p), Some(a)) => (
                pair(p.physicality, p.agreement),
                match a {
                    Active::NotApplicable => "n/a".to_string(),
                    Active::Verdict(v) => pair(v.physicality, v.agreement),
                },
            ),
            _ => ("FAILED".to_string(), "FAILED".to_string()),
        };
        let mark = if row.matches_paper { "ok" } else { "MISMATCH" };
        let _ = writeln!(out, "{:<10} {:<44} {:<44} {}", row.calculator.as_str(), passive, active, mark);
        if let Some(e) = &row.error {
            let _ = writeln!(out, "{:<10} error: {e}", "");
        }
        if let Some(p) = &row.passive {
            for d in p.diagnostics.iter().filter(|d| d.contains("low evidence") || d.contains("quantum")) {
                let _ = writeln!(out, "{:<10} warning: {d}", "");
            }
        }
    }
    let _ = writeln!(out, "config {}  version {}", &report.config_fingerprint[..12], report.tool_version);
    out
}

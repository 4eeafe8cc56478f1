//! The `simulate`, `classify`, `probe` and `suite` subcommands. Each takes
//! its parsed flags and returns once its files are written.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use vrlab_core::calculators::{build, CalculatorId, Declaration};
use vrlab_core::observer::{classify_with, observe, SensorSpec, VerdictReport};
use vrlab_core::prober::{falsify_plan, falsify_with, PassState, ProbeError, ProbePlan, ProbeReport, ProbeTarget};
use vrlab_core::Calculator64;

use crate::config::RunConfig;
use crate::suite::{render_table, run_suite};
use crate::{trajectory_csv, CliError};

/// Flags shared by every command that simulates.
#[derive(Args, Debug, Clone, Default)]
pub struct SensorFlags {
    /// JSON run configuration; see `--print-defaults`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Observation length in simulated time units.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Sample period of the sensor.
    #[arg(long = "sensor-dt")]
    pub sensor_dt: Option<f64>,
    /// Position resolution of the sensor.
    #[arg(long)]
    pub quantum: Option<f64>,
    /// Integration step.
    #[arg(long)]
    pub dt: Option<f64>,
}

impl SensorFlags {
    /// The config file (or defaults) with the command-line overrides applied.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = RunConfig::load_or_default(self.config.as_deref())?;
        if let Some(d) = self.duration {
            c.sensor.duration = d;
        }
        if let Some(p) = self.sensor_dt {
            c.sensor.sample_period = p;
        }
        if let Some(q) = self.quantum {
            c.sensor.quantum = q;
        }
        if let Some(dt) = self.dt {
            c.dt = dt;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[arg(long)]
    pub calculator: CalculatorId,
    #[command(flatten)]
    pub sensor: SensorFlags,
    /// Trajectory CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ClassifyArgs {
    /// Trajectory CSV as written by `simulate`.
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Declaration JSON to judge the trajectory against.
    #[arg(long, conflicts_with = "calculator", required_unless_present = "calculator")]
    pub declaration: Option<PathBuf>,
    /// Use this catalog calculator's declaration instead of a file.
    #[arg(long)]
    pub calculator: Option<CalculatorId>,
    #[command(flatten)]
    pub sensor: SensorFlags,
    /// Verdict JSON; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ProbeArgs {
    #[arg(long)]
    pub calculator: CalculatorId,
    /// One probe by name (force_schedule, stop_and_release, coupling_sweep);
    /// the whole battery when absent.
    #[arg(long, conflicts_with = "plan_file")]
    pub plan: Option<String>,
    /// A full probe plan as JSON.
    #[arg(long = "plan-file")]
    pub plan_file: Option<PathBuf>,
    #[command(flatten)]
    pub sensor: SensorFlags,
    /// Probe report JSON; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Verdict JSON; defaults to `<out>.verdict.json` next to `--out`.
    #[arg(long = "verdict-out")]
    pub verdict_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SuiteArgs {
    #[command(flatten)]
    pub sensor: SensorFlags,
    /// Suite report JSON.
    #[arg(long, default_value = "suite_report.json")]
    pub out: PathBuf,
    /// Also write the text table here.
    #[arg(long = "table-out")]
    pub table_out: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

/// Writes `text` to `path`, or to standard output.
fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| CliError::io(p, e))
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let config = args.sensor.resolve()?;
    let calc: Calculator64 = build(args.calculator, &config.params)?;
    let traj = observe(&calc, &config.sensor, config.dt)?;
    for w in traj.warnings() {
        eprintln!("warning: {w}");
    }
    match &args.out {
        Some(p) => trajectory_csv::write(&traj, create(p)?),
        None => trajectory_csv::write(&traj, io::stdout().lock()),
    }
}

fn load_declaration(path: &Path) -> Result<Declaration, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let d: Declaration =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    d.validate()?;
    Ok(d)
}

pub fn classify(args: &ClassifyArgs) -> Result<VerdictReport, CliError> {
    let config = args.sensor.resolve()?;
    let declaration = match (&args.declaration, args.calculator) {
        (Some(p), _) => load_declaration(p)?,
        (None, Some(id)) => build::<f64>(id, &config.params)?.declaration,
        (None, None) => unreachable!("clap requires one of --declaration and --calculator"),
    };
    let file = File::open(&args.trajectory).map_err(|e| CliError::io(&args.trajectory, e))?;
    let traj = trajectory_csv::read(io::BufReader::new(file), config.sensor.quantum)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.trajectory.display())))?;
    let report = classify_with(&traj, &declaration, &config.observer)?.report();
    emit(args.out.as_deref(), &to_json(&report))?;
    Ok(report)
}

/// What `probe` writes: the passive and active verdicts with every probe's
/// report. `falsified` is true when any probe failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeCommandReport {
    pub calculator: CalculatorId,
    pub falsified: bool,
    pub passive: VerdictReport,
    pub active: VerdictReport,
    pub probes: Vec<ProbeReport>,
}

/// A default plan by name, sampled like `sensor` (the plan keeps its own
/// duration) and integrated with `dt`.
pub fn named_plan(name: &str, sensor: &SensorSpec, dt: f64) -> Result<ProbePlan, CliError> {
    let mut plan = match name {
        "force_schedule" => ProbePlan::force_schedule_default(),
        "stop_and_release" => ProbePlan::stop_and_release(),
        "coupling_sweep" => ProbePlan::coupling_sweep(None),
        other => {
            return Err(CliError::Input(format!(
                "unknown probe `{other}`; expected force_schedule, stop_and_release or coupling_sweep"
            )))
        }
    };
    plan.sensor.sample_period = sensor.sample_period;
    plan.sensor.quantum = sensor.quantum;
    plan.dt = dt;
    Ok(plan)
}

fn verdict_path(args: &ProbeArgs) -> Option<PathBuf> {
    args.verdict_out.clone().or_else(|| {
        let out = args.out.as_ref()?;
        let stem = out.file_stem()?.to_string_lossy();
        Some(out.with_file_name(format!("{stem}.verdict.json")))
    })
}

pub fn probe(args: &ProbeArgs) -> Result<ProbeCommandReport, CliError> {
    let config = args.sensor.resolve()?;
    let calc: Calculator64 = build(args.calculator, &config.params)?;
    if calc.input_dofs().is_empty() {
        return Err(ProbeError::NoController.into());
    }
    let plan = match (&args.plan, &args.plan_file) {
        (Some(name), _) => Some(named_plan(name, &config.sensor, config.dt)?),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            Some(serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?)
        }
        (None, None) => None,
    };
    let outcome = match &plan {
        Some(p) => falsify_plan(&calc, p, p.dt, &config.observer)?,
        None => falsify_with(&calc, &config.sensor, config.dt, &config.observer)?,
    };
    let report = ProbeCommandReport {
        calculator: args.calculator,
        falsified: outcome.probes.iter().any(|p| p.pass == PassState::Fail),
        passive: outcome.passive.report(),
        active: outcome.verdict().report(),
        probes: outcome.probes,
    };
    emit(args.out.as_deref(), &to_json(&report))?;
    if let Some(p) = verdict_path(args) {
        emit(Some(&p), &to_json(&report.active))?;
    }
    for p in &report.probes {
        let measured = p.measured.map_or("n/a".to_string(), |m| format!("{m:.4}"));
        let pass = match p.pass {
            PassState::Pass => "pass",
            PassState::Fail => "FAIL",
            PassState::Inconclusive => "inconclusive",
        };
        eprintln!("{:<18} {pass:<13} predicted {:.4}  measured {measured}", p.probe, p.predicted);
    }
    eprintln!("verdict: {} / {}", report.active.physicality, report.active.agreement);
    Ok(report)
}

/// Runs the suite and writes its files. `Err` only for I/O or
/// configuration problems; failed rows show up in the report.
pub fn suite(args: &SuiteArgs) -> Result<crate::suite::SuiteReport, CliError> {
    let config = args.sensor.resolve()?;
    let report = run_suite(&config);
    emit(Some(&args.out), &to_json(&report))?;
    let table = render_table(&report);
    if let Some(p) = &args.table_out {
        emit(Some(p), &table)?;
    }
    print!("{table}");
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_file_sits_next_to_the_report() {
        let args = ProbeArgs {
            calculator: CalculatorId::H,
            plan: None,
            plan_file: None,
            sensor: SensorFlags::default(),
            out: Some(PathBuf::from("runs/h.json")),
            verdict_out: None,
        };
        assert_eq!(verdict_path(&args), Some(PathBuf::from("runs/h.verdict.json")));
        let args = ProbeArgs { out: None, ..args };
        assert_eq!(verdict_path(&args), None);
    }

    #[test]
    fn named_plans_take_the_sensor_but_keep_their_length() {
        let sensor = SensorSpec { sample_period: 0.02, quantum: 1e-2, duration: 60.0 };
        let p = named_plan("force_schedule", &sensor, 2e-3).unwrap();
        assert_eq!(p.sensor.duration, 20.0);
        assert_eq!(p.sensor.quantum, 1e-2);
        assert_eq!(p.dt, 2e-3);
        assert!(named_plan("shake", &sensor, 1e-3).unwrap_err().to_string().contains("unknown probe"));
    }

    #[test]
    fn flags_override_the_config_file() {
        let flags = SensorFlags { quantum: Some(0.1), duration: Some(10.0), ..SensorFlags::default() };
        let c = flags.resolve().unwrap();
        assert_eq!(c.sensor.quantum, 0.1);
        assert_eq!(c.sensor.duration, 10.0);
        let bad = SensorFlags { dt: Some(3e-3), ..SensorFlags::default() };
        assert!(bad.resolve().is_err());
    }
}

//! Acceptance run: one line per criterion, non-zero exit if any fails.
//! Runs as part of `cargo test`; `cargo test --test acceptance` runs it alone.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use vrlab_core::calculators::{build, CalculatorId, CatalogParams, Family};
use vrlab_core::dynamics::ContactKind;
use vrlab_core::observer::{
    classify, detect_events, observe, Agreement, ObserverConfig, Physicality, SensorSpec, Verdict,
};
use vrlab_core::prober::{
    falsify, newton_residual, run_probe, stop_and_release, ForceWindow, ProbeKind, ProbePlan, StopOutcome,
};
use vrlab_core::{Calculator64, Vec2d};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn calc(id: CalculatorId) -> Calculator64 {
    build(id, &CatalogParams::default()).expect("catalog defaults build")
}

fn passive(id: CalculatorId) -> Verdict {
    let c = calc(id);
    let traj = observe(&c, &SensorSpec::default(), 1e-3).expect("observe");
    classify(&traj, &c.declaration).expect("classify")
}

fn active(id: CalculatorId) -> Verdict {
    falsify(&calc(id)).expect("falsify")
}

fn describe(v: &Verdict) -> String {
    format!("{} / {}", v.physicality(), v.agreement())
}

fn expect_pair(v: &Verdict, p: Option<Physicality>, a: Agreement) -> Outcome {
    let ok = v.agreement() == a && p.is_none_or(|p| v.physicality() == p);
    if ok {
        Ok(describe(v))
    } else {
        Err(format!("got {}", describe(v)))
    }
}

fn verdict_a() -> Outcome {
    expect_pair(&passive(CalculatorId::A), Some(Physicality::PhysicalAsDeclared), Agreement::Agrees)
}

fn verdict_b_full() -> Outcome {
    expect_pair(&passive(CalculatorId::BFull), None, Agreement::Agrees)
}

fn verdict_b_partial() -> Outcome {
    expect_pair(&passive(CalculatorId::BPartial), Some(Physicality::NonPhysicalHiddenVariables), Agreement::Disagrees)
}

fn verdict_c() -> Outcome {
    expect_pair(&passive(CalculatorId::C), None, Agreement::Agrees)
}

fn verdict_d() -> Outcome {
    let (c, d) = (passive(CalculatorId::C), passive(CalculatorId::D));
    expect_pair(&d, None, Agreement::Agrees)?;
    if c.report() != d.report() {
        return Err("D's report differs from C's".into());
    }
    Ok(format!("{}, identical to C", describe(&d)))
}

fn verdict_e() -> Outcome {
    let c = calc(CalculatorId::E);
    if c.total_dof_count != 1 {
        return Err(format!("E should have one actual dof, has {}", c.total_dof_count));
    }
    expect_pair(&passive(CalculatorId::E), Some(Physicality::PhysicalAsDeclared), Agreement::Agrees)
        .map(|s| format!("{s} (actual dofs: 1)"))
}

fn verdict_f() -> Outcome {
    expect_pair(&active(CalculatorId::F), None, Agreement::Agrees).map(|s| format!("active {s}"))
}

fn verdict_g() -> Outcome {
    expect_pair(&active(CalculatorId::G), None, Agreement::Disagrees).map(|s| format!("active {s}"))
}

fn verdict_h() -> Outcome {
    let p = expect_pair(&passive(CalculatorId::H), None, Agreement::Agrees).map_err(|e| format!("passive: {e}"))?;
    let a = expect_pair(&active(CalculatorId::H), None, Agreement::Disagrees).map_err(|e| format!("active: {e}"))?;
    Ok(format!("passive {p}, active {a}"))
}

fn verdict_x() -> Outcome {
    expect_pair(&passive(CalculatorId::X), None, Agreement::Disagrees)
}

fn energy_drift() -> Outcome {
    let mut w = calc(CalculatorId::A).world;
    let e0 = w.total_energy();
    let mut worst = 0.0f64;
    for k in 0..1_000_000 {
        w.step(1e-3, &[]).map_err(|e| e.to_string())?;
        if k % 1000 == 999 {
            worst = worst.max(((w.total_energy() - e0) / e0).abs());
        }
    }
    let msg = format!("max relative drift {worst:.2e} over 1e6 steps");
    if worst < 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// A coordinate reflecting between `±half` at constant speed: the unfolded
/// straight line folded back into the box.
fn folded(x0: f64, v: f64, t: f64, half: f64) -> f64 {
    let w = (x0 + v * t + half).rem_euclid(4.0 * half);
    if w <= 2.0 * half {
        w - half
    } else {
        3.0 * half - w
    }
}

fn analytic_oracle() -> Outcome {
    let p = CatalogParams::default();
    let mut w = calc(CalculatorId::A).world;
    let half = p.side / 2.0;
    let (mut worst, mut bounces) = (0.0f64, 0);
    for k in 1..=60_000 {
        bounces += w.step(1e-3, &[]).map_err(|e| e.to_string())?.len();
        let t = k as f64 * 1e-3;
        let exact = Vec2d::new(folded(p.pos.x, p.vel.x, t, half), folded(p.pos.y, p.vel.y, t, half));
        worst = worst.max((w.disks[0].pos - exact).norm());
    }
    let msg = format!("max error {worst:.2e} across {bounces} bounces");
    if worst < 1e-9 && bounces > 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn fit_recovery() -> Outcome {
    let p = CatalogParams { omega: 2.0, ..CatalogParams::default() };
    let c: Calculator64 = build(CalculatorId::C, &p).map_err(|e| e.to_string())?;
    let sensor = SensorSpec { quantum: 1e-3 * p.amplitude, ..SensorSpec::default() };
    let traj = observe(&c, &sensor, 1e-3).map_err(|e| e.to_string())?;
    let v = classify(&traj, &c.declaration).map_err(|e| e.to_string())?;
    let omega = v
        .fits
        .iter()
        .find(|f| f.family == Family::Harmonic)
        .and_then(|f| f.param("omega"))
        .ok_or("no harmonic fit")?;
    let err = (omega - 2.0).abs() / 2.0;
    let msg = format!("omega {omega:.5}, error {:.3}%", 100.0 * err);
    if err < 0.01 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn newton_check() -> Outcome {
    let plan = ProbePlan {
        kind: ProbeKind::ForceSchedule { schedule: vec![ForceWindow::new(1.0, 3.0, Vec2d::new(0.5, 0.0))] },
        sensor: SensorSpec { duration: 3.5, ..SensorSpec::default() },
        dt: 1e-3,
    };
    let c = calc(CalculatorId::F);
    let record = run_probe(&c, &plan).map_err(|e| e.to_string())?;
    let report = newton_residual(&record, &c.declaration, 1.0, &ObserverConfig::default()).map_err(|e| e.to_string())?;
    // away from the switching instants, where the derivative window straddles a jump
    let (measured, _) = report.mean_over(1.3, 2.7).ok_or("no samples inside the push")?;
    let expected = 0.5 / c.declaration.declared_mass;
    let err = (measured.x - expected).abs() / expected;
    let msg = format!("measured {:.5} vs {expected}, error {:.2}%", measured.x, 100.0 * err);
    if err < 0.02 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn h_margin() -> Outcome {
    let r = stop_and_release(&calc(CalculatorId::H), &ProbePlan::stop_and_release()).map_err(|e| e.to_string())?;
    let measured = r.measured.ok_or("never released")?;
    let ratio = r.predicted / measured;
    let msg = format!("predicted {:.4}, measured {measured:.5}, ratio {ratio:.0}x", r.predicted);
    let ok = r.outcome == StopOutcome::Falsified && (r.predicted - 0.25).abs() < 0.01 && measured < 0.0125 && ratio > 20.0;
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn event_timing() -> Outcome {
    let c = calc(CalculatorId::BPartial);
    let sensor = SensorSpec::default();
    let traj = observe(&c, &sensor, 1e-3).map_err(|e| e.to_string())?;
    let events = detect_events(&traj, ObserverConfig::default().event_threshold).map_err(|e| e.to_string())?;
    let mut world = c.world.clone();
    let mut oracle = Vec::new();
    for _ in 0..(sensor.duration / 1e-3).round() as usize {
        for contact in world.step(1e-3, &[]).map_err(|e| e.to_string())? {
            if matches!(contact.kind, ContactKind::Disks { .. }) {
                oracle.push(contact.time);
            }
        }
    }
    if oracle.is_empty() {
        return Err("no hidden collisions in the oracle run".into());
    }
    let worst = oracle
        .iter()
        .map(|t| events.times().iter().map(|e| (e - t).abs()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let msg = format!("{} hidden collisions, worst offset {worst:.4} (T_s = {})", oracle.len(), sensor.sample_period);
    if worst <= sensor.sample_period {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn suite_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str| -> Result<String, String> {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_vrlab"))
            .args(["suite", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("suite exited with {}", status.status));
        }
        std::fs::read_to_string(&out).map_err(|e| e.to_string())
    };
    let without_timestamp =
        |text: &str| text.lines().filter(|l| !l.trim_start().starts_with("\"generated_at\"")).collect::<Vec<_>>().join("\n");
    let (first, second) = (run("one.json")?, run("two.json")?);
    if without_timestamp(&first) != without_timestamp(&second) {
        return Err("reports differ beyond the timestamp".into());
    }
    let report: serde_json::Value = serde_json::from_str(&first).map_err(|e| e.to_string())?;
    let rows = report["rows"].as_array().map_or(0, Vec::len);
    if rows != CalculatorId::ALL.len() {
        return Err(format!("{rows} rows, expected one per calculator"));
    }
    Ok(format!("two runs byte-identical modulo timestamp ({rows} rows)"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 17] = [
        ("verdict table: A passive PhysicalAsDeclared/Agrees", verdict_a),
        ("verdict table: B_full passive Agrees", verdict_b_full),
        ("verdict table: B_partial passive NonPhysicalHiddenVariables/Disagrees", verdict_b_partial),
        ("verdict table: C passive Agrees", verdict_c),
        ("verdict table: D passive Agrees, identical to C", verdict_d),
        ("verdict table: E passive PhysicalAsDeclared/Agrees", verdict_e),
        ("verdict table: F active Agrees", verdict_f),
        ("verdict table: G active Disagrees", verdict_g),
        ("verdict table: H passive Agrees and active Disagrees", verdict_h),
        ("verdict table: X passive Disagrees", verdict_x),
        ("energy conservation: A, 1e6 steps, drift < 1e-6", energy_drift),
        ("oracle equivalence: A vs closed-form bounces, error < 1e-9", analytic_oracle),
        ("fit recovery: harmonic omega = 2 within 1%", fit_recovery),
        ("newton check: force 0.5 on F, acceleration within 2%", newton_check),
        ("H falsification margin: ratio > 20", h_margin),
        ("event timing: B_partial hidden collisions within T_s", event_timing),
        ("determinism: suite twice, identical modulo timestamp", suite_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Trajectory CSV: header `t,<dof>...`, one row per sample.

use std::io::{Read, Write};

use vrlab_core::observer::{trajectory_from_rows, Trajectory};

use crate::CliError;

pub fn write<W: Write>(traj: &Trajectory, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| CliError::Failed(format!("writing trajectory: {e}"));
    let mut header = vec!["t".to_string()];
    header.extend(traj.dof_ids().iter().cloned());
    w.write_record(&header).map_err(fail)?;
    for (t, row) in traj.times().iter().zip(traj.samples()) {
        let mut rec = vec![t.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec).map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::Failed(format!("writing trajectory: {e}")))?;
    Ok(())
}

/// Parses a trajectory sampled with resolution `quantum`. Errors name the
/// offending line.
pub fn read<R: Read>(input: R, quantum: f64) -> Result<Trajectory, CliError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers().map_err(|e| CliError::Input(format!("line 1: {e}")))?.clone();
    if header.get(0) != Some("t") || header.len() < 2 {
        return Err(CliError::Input("line 1: header must be `t,<dof>...`".into()));
    }
    let dofs: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Input(format!("line {line}: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut values = rec.iter().map(|f| {
            f.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                CliError::Input(format!("line {line}: `{f}` is not a finite number"))
            })
        });
        times.push(values.next().expect("csv rows are non-empty")?);
        samples.push(values.collect::<Result<Vec<_>, _>>()?);
    }
    Ok(trajectory_from_rows(dofs, times, samples, quantum)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use vrlab_core::calculators::{build, CalculatorId, CatalogParams};
    use vrlab_core::observer::{observe, SensorSpec};

    #[test]
    fn written_trajectories_read_back_identically() {
        let c = build::<f64>(CalculatorId::BPartial, &CatalogParams::default()).unwrap();
        let sensor = SensorSpec { duration: 3.0, ..SensorSpec::default() };
        let traj = observe(&c, &sensor, 1e-3).unwrap();
        let mut buf = Vec::new();
        write(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x1,y1\n"));
        assert_eq!(text.lines().count(), 302);
        let back = read(&buf[..], sensor.quantum).unwrap();
        assert_eq!(back.times(), traj.times());
        assert_eq!(back.samples(), traj.samples());
    }

    #[test]
    fn bad_cells_name_their_line() {
        let text = "t,x,y\n0,0,0\n0.01,abc,0\n";
        let err = read(text.as_bytes(), 1e-3).unwrap_err().to_string();
        assert!(err.starts_with("line 3:"), "{err}");
        let text = "t,x,y\n0,0,0\n0.01,0\n";
        let err = read(text.as_bytes(), 1e-3).unwrap_err().to_string();
        assert!(err.starts_with("line 3:"), "{err}");
    }
}

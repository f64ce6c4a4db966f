//! CSV export: comma separated, header row, LF endings, 17 significant digits.

use std::io::{self, Write};

use crate::scalar::Scalar;
use crate::sde::trajectory::{CoupledRun, Trajectory};

/// Formats a value with 17 significant digits.
pub fn fmt17<T: Scalar>(v: T) -> String {
    format!("{:.16e}", v.to_f64_lossy())
}

fn header(w: &mut impl Write, leading: &[&str], prefixes: &[&str], d: usize, trailing: &[&str]) -> io::Result<()> {
    let mut cols: Vec<String> = leading.iter().map(|s| s.to_string()).collect();
    for p in prefixes {
        cols.extend((1..=d).map(|i| format!("{p}_{i}")));
    }
    cols.extend(trailing.iter().map(|s| s.to_string()));
    writeln!(w, "{}", cols.join(","))
}

fn row<T: Scalar>(w: &mut impl Write, lead: Option<usize>, values: impl IntoIterator<Item = T>) -> io::Result<()> {
    let mut line = String::new();
    if let Some(p) = lead {
        line.push_str(&p.to_string());
        line.push(',');
    }
    let cells: Vec<String> = values.into_iter().map(fmt17).collect();
    line.push_str(&cells.join(","));
    writeln!(w, "{line}")
}

/// Columns `t, x_1..x_d`.
pub fn write_trajectory_csv<T: Scalar>(w: &mut impl Write, traj: &Trajectory<T>) -> io::Result<()> {
    header(w, &["t"], &["x"], traj.d(), &[])?;
    for k in 0..traj.len() {
        row(w, None, std::iter::once(traj.time(k)).chain(traj.state(k).iter().copied()))?;
    }
    Ok(())
}

/// Several paths stacked, with a leading `path` column: `path, t, x_1..x_d`.
pub fn write_batch_csv<T: Scalar>(w: &mut impl Write, batch: &[Trajectory<T>]) -> io::Result<()> {
    let d = batch.first().map(|t| t.d()).unwrap_or(0);
    header(w, &["path", "t"], &["x"], d, &[])?;
    for (p, traj) in batch.iter().enumerate() {
        for k in 0..traj.len() {
            row(w, Some(p), std::iter::once(traj.time(k)).chain(traj.state(k).iter().copied()))?;
        }
    }
    Ok(())
}

/// Columns `t, x_1..x_d, y_1..y_d, zeta`.
pub fn write_coupled_csv<T: Scalar>(w: &mut impl Write, run: &CoupledRun<T>) -> io::Result<()> {
    header(w, &["t"], &["x", "y"], run.d(), &["zeta"])?;
    for k in 0..run.len() {
        let values = std::iter::once(run.time(k))
            .chain(run.x().state(k).iter().copied())
            .chain(run.y().state(k).iter().copied())
            .chain(std::iter::once(run.zeta()[k]));
        row(w, None, values)?;
    }
    Ok(())
}

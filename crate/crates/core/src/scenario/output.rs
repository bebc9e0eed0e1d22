//! CSV trajectory logs and the JSON summary.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::{Mode, Scenario};
use super::run::{LogRow, RunOutput};
use crate::error::{Error, Result};

/// Environment variable that overrides the scenario's output directory.
pub const OUT_DIR_ENV: &str = "GEOCONTACT_OUT_DIR";

const BASE_COLUMNS: &str = "t,u1,v1,u2,v2,psi,du1,dv1,du2,dv2,dpsi,v_rel_x,v_rel_y";
const FORCE_COLUMNS: &str = ",f_n,f_tx,f_ty";

pub fn csv_header(mode: Mode) -> String {
    match mode {
        Mode::Dynamic => format!("{BASE_COLUMNS}{FORCE_COLUMNS}"),
        _ => BASE_COLUMNS.to_string(),
    }
}

fn push_float(line: &mut String, x: f64) {
    // 17 significant digits round-trip every f64
    let _ = write!(line, "{x:.16e}");
}

pub fn csv_line(row: &LogRow, mode: Mode) -> String {
    let s = &row.state;
    let mut values = vec![
        row.t, s.u1, s.v1, s.u2, s.v2, s.psi, s.du1, s.dv1, s.du2, s.dv2, s.dpsi, row.v_rel[0], row.v_rel[1],
    ];
    if mode == Mode::Dynamic {
        let f = row.force.unwrap_or_default();
        values.extend([f.f_n, f.f_tx, f.f_ty]);
    }
    let mut line = String::with_capacity(values.len() * 24);
    for (k, x) in values.into_iter().enumerate() {
        if k > 0 {
            line.push(',');
        }
        push_float(&mut line, x);
    }
    line
}

/// Write every `stride`-th row and always the last one.
pub fn write_csv<W: Write>(mut w: W, rows: &[LogRow], mode: Mode, stride: usize) -> std::io::Result<()> {
    writeln!(w, "{}", csv_header(mode))?;
    let stride = stride.max(1);
    for (k, row) in rows.iter().enumerate() {
        if k % stride == 0 || k + 1 == rows.len() {
            writeln!(w, "{}", csv_line(row, mode))?;
        }
    }
    w.flush()
}

/// Output directory: explicit argument, then the environment override, then
/// the scenario's own setting, then `out/<name>`.
pub fn resolve_output_dir(explicit: Option<&Path>, scenario: &Scenario) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|p| !p.is_empty()) {
        return PathBuf::from(p);
    }
    scenario
        .output
        .dir
        .clone()
        .unwrap_or_else(|| Path::new("out").join(&scenario.name))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Write `<name>_contact<i>.csv` per contact and `<name>_summary.json` into
/// `dir`, creating it if needed. Returns the written paths.
pub fn write_outputs(scenario: &Scenario, output: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for (i, rows) in output.log.contacts.iter().enumerate() {
        let path = dir.join(format!("{}_contact{i}.csv", scenario.name));
        let file = std::fs::File::create(&path).map_err(io_err(&path))?;
        write_csv(std::io::BufWriter::new(file), rows, output.log.mode, scenario.output.stride)
            .map_err(io_err(&path))?;
        written.push(path);
    }
    let path = dir.join(format!("{}_summary.json", scenario.name));
    let json = serde_json::to_string_pretty(&output.summary).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(&path, json + "\n").map_err(io_err(&path))?;
    written.push(path);
    Ok(written)
}

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::forward::{FringeConvention, Interferogram, NoiseModel, ScanPass, TraceMeta};

const HEADER: &str = "position_mm,intensity";

/// Writes a trace as CSV preceded by `# key = value` metadata lines.
/// Floats use the shortest representation that parses back to the same
/// value, so a written trace reads back bit for bit.
pub fn write_trace<W: Write>(trace: &Interferogram, mut w: W) -> std::io::Result<()> {
    let m = &trace.meta;
    writeln!(w, "# tool_version = {}", m.tool_version)?;
    if let Some(hash) = &m.config_hash {
        writeln!(w, "# config_hash = {hash}")?;
    }
    writeln!(w, "# signal_nm = {}", m.signal_nm)?;
    writeln!(w, "# idler_nm = {}", m.idler_nm)?;
    writeln!(w, "# fringe_convention = {}", m.fringe_convention.as_str())?;
    writeln!(w, "# seed = {}", m.seed)?;
    writeln!(w, "# noise = {}", m.noise.as_str())?;
    writeln!(w, "# mean_counts = {}", m.mean_counts)?;
    writeln!(w, "# pass = {}", m.pass.as_str())?;
    writeln!(w, "# origin_mm = {}", m.origin_mm)?;
    for (depth, v, order) in &m.echoes {
        writeln!(w, "# echo = {depth},{v},{order}")?;
    }
    writeln!(w, "{HEADER}")?;
    for (z, i) in trace.positions().iter().zip(trace.intensity()) {
        writeln!(w, "{z},{i}")?;
    }
    w.flush()
}

fn number<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::parse(format!("trace line {line}"), format!("{key}: {e}")))
}

/// Reads a trace written by [`write_trace`]. Only `idler_nm` is required in
/// the metadata; the rest defaults so that measured data can be imported.
pub fn read_trace<R: BufRead>(r: R) -> Result<Interferogram> {
    let mut meta = TraceMeta {
        tool_version: "unknown".to_string(),
        config_hash: None,
        signal_nm: f64::NAN,
        idler_nm: f64::NAN,
        fringe_convention: FringeConvention::Physical,
        seed: 0,
        noise: NoiseModel::None,
        mean_counts: 0.0,
        pass: ScanPass::Fine,
        origin_mm: 0.0,
        echoes: Vec::new(),
    };
    let mut positions = Vec::new();
    let mut intensity = Vec::new();
    let mut header_seen = false;
    for (index, line) in r.lines().enumerate() {
        let n = index + 1;
        let line = line.map_err(|e| Error::parse(format!("trace line {n}"), e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let Some((key, value)) = comment.split_once('=') else {
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "tool_version" => meta.tool_version = value.to_string(),
                "config_hash" => meta.config_hash = Some(value.to_string()),
                "signal_nm" => meta.signal_nm = number(key, value, n)?,
                "idler_nm" => meta.idler_nm = number(key, value, n)?,
                "fringe_convention" => meta.fringe_convention = value.parse()?,
                "seed" => meta.seed = number(key, value, n)?,
                "noise" => meta.noise = value.parse()?,
                "mean_counts" => meta.mean_counts = number(key, value, n)?,
                "pass" => meta.pass = value.parse()?,
                "origin_mm" => meta.origin_mm = number(key, value, n)?,
                "echo" => {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    let [depth, v, order] = parts[..] else {
                        return Err(Error::parse(
                            format!("trace line {n}"),
                            "echo needs depth,visibility,order",
                        ));
                    };
                    meta.echoes.push((
                        number(key, depth, n)?,
                        number(key, v, n)?,
                        number(key, order, n)?,
                    ));
                }
                _ => {}
            }
            continue;
        }
        if !header_seen {
            if line != HEADER {
                return Err(Error::parse(
                    format!("trace line {n}"),
                    format!("expected column header `{HEADER}`"),
                ));
            }
            header_seen = true;
            continue;
        }
        let (z, i) = line.split_once(',').ok_or_else(|| {
            Error::parse(format!("trace line {n}"), "expected position_mm,intensity")
        })?;
        positions.push(number("position_mm", z.trim(), n)?);
        intensity.push(number("intensity", i.trim(), n)?);
    }
    if !(meta.idler_nm > 0.0) {
        return Err(Error::parse("trace metadata", "missing or invalid idler_nm"));
    }
    Interferogram::new(positions, intensity, meta)
}

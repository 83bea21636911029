use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::imaging::{ReflectanceImage, ReflectanceMask};

/// Plain-text grid: `# ` comment lines, then `width`, `height` and
/// `pitch_um` lines, then `height` rows of `width` whitespace-separated
/// values. Missing values are written as `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub pitch_um: f64,
    pub values: Vec<f64>,
    /// Comment lines without the leading `# `.
    pub comments: Vec<String>,
}

impl Grid {
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for c in &self.comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "width {}", self.width)?;
        writeln!(w, "height {}", self.height)?;
        writeln!(w, "pitch_um {}", self.pitch_um)?;
        for row in self.values.chunks(self.width.max(1)) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        w.flush()
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut comments = Vec::new();
        let mut header: [Option<f64>; 3] = [None; 3];
        let mut values = Vec::new();
        for (index, line) in r.lines().enumerate() {
            let n = index + 1;
            let context = || format!("grid line {n}");
            let line = line.map_err(|e| Error::parse(context(), e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                comments.push(c.trim().to_string());
                continue;
            }
            let mut words = line.split_whitespace();
            let first = words.next().unwrap_or_default();
            let slot = ["width", "height", "pitch_um"].iter().position(|k| *k == first);
            if let Some(slot) = slot {
                let value = words
                    .next()
                    .ok_or_else(|| Error::parse(context(), format!("{first} needs a value")))?;
                header[slot] = Some(value.parse().map_err(|e| Error::parse(context(), e))?);
                continue;
            }
            for word in line.split_whitespace() {
                values.push(word.parse::<f64>().map_err(|e| Error::parse(context(), e))?);
            }
        }
        let [Some(width), Some(height), Some(pitch_um)] = header else {
            return Err(Error::parse("grid header", "needs width, height and pitch_um"));
        };
        let grid = Self {
            width: width as usize,
            height: height as usize,
            pitch_um,
            values,
            comments,
        };
        if grid.width as f64 != width || grid.height as f64 != height {
            return Err(Error::parse("grid header", "width and height must be integers"));
        }
        if grid.values.len() != grid.width * grid.height {
            return Err(Error::parse(
                "grid",
                format!(
                    "{} x {} grid needs {} values, found {}",
                    grid.width,
                    grid.height,
                    grid.width * grid.height,
                    grid.values.len()
                ),
            ));
        }
        Ok(grid)
    }

    /// Value of a `key = value` comment line.
    pub fn comment_value(&self, key: &str) -> Option<&str> {
        self.comments.iter().find_map(|c| {
            let (k, v) = c.split_once('=')?;
            (k.trim() == key).then(|| v.trim())
        })
    }
}

pub fn mask_to_grid(mask: &ReflectanceMask) -> Grid {
    Grid {
        width: mask.width(),
        height: mask.height(),
        pitch_um: mask.pitch_um,
        values: mask.values().to_vec(),
        comments: vec![format!("label = {}", mask.label)],
    }
}

pub fn grid_to_mask(grid: Grid) -> Result<ReflectanceMask> {
    let label = grid.comment_value("label").unwrap_or("imported").to_string();
    ReflectanceMask::new(label, grid.width, grid.height, grid.pitch_um, grid.values)
}

/// Reflectance grid of an image with its metadata as comments. `extra`
/// lines (provenance) come first.
pub fn image_to_grid(image: &ReflectanceImage, extra: &[String]) -> Grid {
    let m = &image.meta;
    let mut comments = extra.to_vec();
    comments.extend([
        format!("label = {}", m.label),
        format!("signal_nm = {}", m.signal_nm),
        format!("idler_nm = {}", m.idler_nm),
        format!("beam_fwhm_um = {}", m.beam_fwhm_um),
        format!("pipeline = {}", m.pipeline.as_str()),
        format!("base_seed = {}", m.base_seed),
        format!("reference_visibility = {}", m.reference_visibility),
        format!("calibration_visibility = {}", m.calibration_visibility),
        format!("cover = {}", m.cover_label.as_deref().unwrap_or("none")),
        format!("cover_transmission = {}", m.cover_transmission),
        format!("x0_um = {}", image.x0_um),
        format!("y0_um = {}", image.y0_um),
    ]);
    Grid {
        width: image.nx,
        height: image.ny,
        pitch_um: image.step_um,
        values: image.reflectance.clone(),
        comments,
    }
}

/// `x_um,y_um,R,sigma` rows of an image, preceded by `extra` comment lines.
pub fn write_image_csv<W: Write>(
    image: &ReflectanceImage,
    extra: &[String],
    mut w: W,
) -> std::io::Result<()> {
    for c in extra {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "x_um,y_um,R,sigma")?;
    for iy in 0..image.ny {
        for ix in 0..image.nx {
            let (x, y) = image.position_um(ix, iy);
            let i = iy * image.nx + ix;
            writeln!(w, "{x},{y},{},{}", image.reflectance[i], image.sigma[i])?;
        }
    }
    w.flush()
}

//! File formats: traces (CSV), sample stacks (TOML), reflectance grids
//! (plain text) and image tables (CSV).

mod grid;
mod trace;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};
use crate::forward::Interferogram;
use crate::imaging::ReflectanceMask;
use crate::sample::SampleStack;

pub use grid::{grid_to_mask, image_to_grid, mask_to_grid, write_image_csv, Grid};
pub use trace::{read_trace, write_trace};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn load_trace(path: &Path) -> Result<Interferogram> {
    read_trace(open(path)?)
}

pub fn save_trace(path: &Path, trace: &Interferogram) -> Result<()> {
    write_trace(trace, create(path)?).map_err(|e| Error::io(path, e))
}

pub fn parse_sample(text: &str) -> Result<SampleStack> {
    let stack: SampleStack = toml::from_str(text).map_err(|e| Error::parse("sample", e))?;
    stack.validate()?;
    Ok(stack)
}

pub fn sample_to_toml(stack: &SampleStack) -> Result<String> {
    toml::to_string(stack).map_err(|e| Error::parse("sample", e))
}

pub fn load_sample(path: &Path) -> Result<SampleStack> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sample(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
        other => other,
    })
}

pub fn load_mask(path: &Path) -> Result<ReflectanceMask> {
    let grid = Grid::read(open(path)?).map_err(|e| match e {
        Error::Parse { context, message } => {
            Error::parse(format!("{}: {context}", path.display()), message)
        }
        other => other,
    })?;
    grid_to_mask(grid)
}

pub fn save_mask(path: &Path, mask: &ReflectanceMask) -> Result<()> {
    mask_to_grid(mask)
        .write(create(path)?)
        .map_err(|e| Error::io(path, e))
}

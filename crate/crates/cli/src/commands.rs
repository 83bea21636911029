use std::path::PathBuf;

use anyhow::{Context, Result};
use log::info;
use nloct_core::imaging::{
    bar_target, raster_scan, BarTarget, BeamProfile, RasterConfig, ReflectanceMask,
};
use nloct_core::io::{image_to_grid, load_mask, load_sample, load_trace, write_image_csv, write_trace};
use nloct_core::inverse::detect_envelopes_with;
use nloct_core::pipeline::{analyze, calibrate, simulate_extending, Source};
use nloct_core::{
    Calibration, DetectConfig, Error, Interferogram, LayerReport,
    MaterialDatabase, MaterialEstimate, Measured, ScanConfig, ScanPass, SampleStack, SpectrumGrid,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{provenance, Outputs};

struct Run<'a> {
    config: &'a RunConfig,
    hash: String,
    db: &'static MaterialDatabase,
}

impl<'a> Run<'a> {
    fn new(config: &'a RunConfig) -> Self {
        Self {
            config,
            hash: config.hash(),
            db: MaterialDatabase::bundled(),
        }
    }

    fn grid(&self) -> SpectrumGrid {
        SpectrumGrid::widest(self.config.spectrum_half_span_zeros)
    }

    fn source(&self) -> Result<Source> {
        Ok(Source::new(self.config.source()?, self.grid(), 0.0, self.db)?)
    }

    fn sample(&self) -> Result<SampleStack> {
        let mut stack = match &self.config.sample.path {
            Some(path) => load_sample(path)?,
            None => SampleStack::reference_mirror(),
        };
        let cal = &self.config.calibration;
        stack.reference_reflectivity = cal.reference_reflectivity;
        stack.reference_visibility = Some(cal.reference_visibility);
        if stack.label.is_empty() {
            stack.label = "sample".to_string();
        }
        Ok(stack)
    }

    /// Synthesizes `pass` of `stack` and stamps the config hash on it.
    fn synthesize(
        &self,
        stack: &SampleStack,
        source: Source,
        scan: &ScanConfig,
        pass: ScanPass,
    ) -> Result<(Interferogram, Source)> {
        let (mut trace, source) = simulate_extending(
            stack,
            source,
            scan,
            pass,
            self.config.sample.max_echo_order,
            self.db,
        )?;
        trace.meta.config_hash = Some(self.hash.clone());
        Ok((trace, source))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneRow {
    pub probe_nm: f64,
    pub detected_nm: f64,
    pub pump_nm: f64,
    pub coherence_length_um: f64,
    pub temperature_k: f64,
    pub poling_period_um: f64,
    pub delta_k_per_m: f64,
    pub energy_residual: f64,
}

/// Signal/idler pair, coherence length and crystal settings of every
/// configured source. Writes `tune.csv`.
pub fn tune(config: &RunConfig) -> Result<Vec<TuneRow>> {
    let ctx = Run::new(config);
    if config.sources.is_empty() {
        return Err(Error::InvalidInput("config lists no source".into()).into());
    }
    let mut rows = Vec::new();
    for spdc in &config.sources {
        let source = Source::new(spdc, ctx.grid(), 0.0, ctx.db).with_context(|| {
            format!(
                "source pump {} nm, period {} um, {} K",
                spdc.pump_wavelength_nm, spdc.poling_period_um, spdc.temperature_k
            )
        })?;
        let pair = &source.solution.pair;
        rows.push(TuneRow {
            probe_nm: pair.idler_nm,
            detected_nm: pair.signal_nm,
            pump_nm: spdc.pump_wavelength_nm,
            coherence_length_um: source.coherence_length_um().unwrap_or(f64::NAN),
            temperature_k: spdc.temperature_k,
            poling_period_um: spdc.poling_period_um,
            delta_k_per_m: source.solution.delta_k,
            energy_residual: pair.energy_residual(spdc.pump_wavelength_nm),
        });
    }

    println!(
        "{:>10} {:>12} {:>8} {:>10} {:>8} {:>8}",
        "probe_nm", "detected_nm", "pump_nm", "l_coh_um", "T_K", "period"
    );
    for r in &rows {
        println!(
            "{:>10.2} {:>12.2} {:>8.1} {:>10.1} {:>8.1} {:>8.2}",
            r.probe_nm,
            r.detected_nm,
            r.pump_nm,
            r.coherence_length_um,
            r.temperature_k,
            r.poling_period_um
        );
    }

    let mut out = Outputs::new(&config.output_dir)?;
    let path = out.write("tune.csv", |w| {
        for line in provenance(&ctx.hash) {
            writeln!(w, "# {line}")?;
        }
        writeln!(
            w,
            "probe_nm,detected_nm,pump_nm,coherence_length_um,temperature_k,poling_period_um,delta_k_per_m,energy_residual"
        )?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.probe_nm,
                r.detected_nm,
                r.pump_nm,
                r.coherence_length_um,
                r.temperature_k,
                r.poling_period_um,
                r.delta_k_per_m,
                r.energy_residual
            )?;
        }
        Ok(())
    })?;
    info!("wrote {}", path.display());
    out.keep();
    Ok(rows)
}

/// Coarse and fine traces of the configured sample. Writes
/// `<label>_coarse.csv` and `<label>_fine.csv`.
pub fn simulate(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let ctx = Run::new(config);
    let stack = ctx.sample()?;
    let scan = ScanConfig {
        rng_seed: config.seed,
        ..config.scan.clone()
    };
    let mut out = Outputs::new(&config.output_dir)?;
    let mut source = ctx.source()?;
    for pass in [ScanPass::Coarse, ScanPass::Fine] {
        let (trace, extended) = ctx.synthesize(&stack, source, &scan, pass)?;
        source = extended;
        let name = format!("{}_{}.csv", stack.label, pass.as_str());
        let path = out.write(&name, |w| write_trace(&trace, w))?;
        println!(
            "{}: {} samples, {} echoes -> {}",
            pass.as_str(),
            trace.len(),
            trace.meta.echoes.len(),
            path.display()
        );
    }
    Ok(out.keep())
}

#[derive(Debug, Serialize)]
pub struct AnalysisReport {
    pub tool_version: String,
    pub config_hash: String,
    pub input_trace: String,
    pub signal_nm: f64,
    pub idler_nm: f64,
    pub calibration: Calibration,
    pub geometry: nloct_core::Geometry,
    pub detection: LayerReport,
    pub estimate: Option<MaterialEstimate>,
    pub error: Option<String>,
}

/// Detection and material estimation on a trace file, or on a trace
/// synthesized from the configured sample. Writes `<name>_report.json`.
/// The report is written even when the geometry does not match; the
/// command then fails with the mismatch.
pub fn analyze_cmd(config: &RunConfig) -> Result<AnalysisReport> {
    let ctx = Run::new(config);
    let detect = &config.analyze.detect;
    let cal_cfg = &config.calibration;

    let (trace, input, name, source) = match &config.analyze.trace {
        Some(path) => {
            let trace = load_trace(path)?;
            let name = path
                .file_stem()
                .map_or("trace".into(), |s| s.to_string_lossy().into_owned());
            (trace, path.display().to_string(), name, None)
        }
        None => {
            let stack = ctx.sample()?;
            let scan = ScanConfig {
                rng_seed: config.seed,
                ..config.scan.clone()
            };
            let (trace, source) = ctx.synthesize(&stack, ctx.source()?, &scan, ScanPass::Fine)?;
            let input = format!("synthesized:{}", stack.label);
            (trace, input, stack.label.clone(), Some(source))
        }
    };

    let reference = match (&cal_cfg.trace, source) {
        (Some(path), _) => calibrate(&load_trace(path)?, detect)
            .with_context(|| format!("calibration trace {}", path.display()))?,
        (None, Some(source)) => {
            let mirror = SampleStack::reference_mirror();
            let mirror = SampleStack {
                reference_reflectivity: cal_cfg.reference_reflectivity,
                reference_visibility: Some(cal_cfg.reference_visibility),
                ..mirror
            };
            let scan = ScanConfig {
                z_start_mm: -cal_cfg.window_mm,
                z_end_mm: cal_cfg.window_mm,
                origin_mm: 0.0,
                rng_seed: config.seed.wrapping_add(1),
                ..config.scan.clone()
            };
            let (cal_trace, _) = ctx.synthesize(&mirror, source, &scan, ScanPass::Fine)?;
            calibrate(&cal_trace, detect)?
        }
        (None, None) => Measured::new(cal_cfg.reference_visibility, cal_cfg.reference_sigma),
    };
    let calibration = Calibration::new(reference, cal_cfg.reference_reflectivity);

    let (detection, estimate, error) =
        match analyze(&trace, &calibration, &config.analyze.geometry, detect) {
            Ok((report, estimate)) => (report, Some(estimate), None),
            Err(e @ Error::GeometryMismatch(_)) => {
                let with_cal = DetectConfig {
                    calibration: Some(calibration),
                    ..detect.clone()
                };
                let report = detect_envelopes_with(&trace, &with_cal)?;
                (report, None, Some(e))
            }
            Err(e) => return Err(e.into()),
        };

    let report = AnalysisReport {
        tool_version: nloct_core::VERSION.to_string(),
        config_hash: ctx.hash.clone(),
        input_trace: input,
        signal_nm: trace.meta.signal_nm,
        idler_nm: trace.meta.idler_nm,
        calibration,
        geometry: config.analyze.geometry.clone(),
        detection,
        estimate,
        error: error.as_ref().map(|e| e.to_string()),
    };

    let mut out = Outputs::new(&config.output_dir)?;
    let path = out.write(&format!("{name}_report.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        writeln!(w)
    })?;
    out.keep();
    print_report(&report);
    println!("report -> {}", path.display());
    match error {
        Some(e) => Err(e.into()),
        None => Ok(report),
    }
}

fn print_report(report: &AnalysisReport) {
    for p in &report.detection.peaks {
        println!(
            "peak {:>10.5} mm  V = {:.4}  {:?}",
            p.position_mm,
            Measured::new(p.visibility, p.visibility_sigma),
            p.classification
        );
    }
    for w in &report.detection.warnings {
        println!("warning: {w}");
    }
    if let Some(est) = &report.estimate {
        println!("R = {:.4}", est.reflectance);
        println!("n = {:.4}", est.refractive_index);
        if let Some(b) = &est.birefringence {
            println!("n_o = {:.4}, n_e = {:.4}", b.n_o, b.n_e);
        }
        if let Some(gap) = &est.air_gap_um {
            println!("air gap = {gap:.1} um");
        } else {
            println!("thickness = {:.1} um", est.thickness_um);
        }
    }
}

/// Raster reflectance image of a mask file or a generated bar target.
/// Writes `<label>_image.grid` and `<label>_image.csv`.
pub fn image(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let ctx = Run::new(config);
    let section = &config.image;
    let mask: ReflectanceMask = match &section.mask {
        Some(path) => load_mask(path)?,
        None => bar_target(&BarTarget::new(section.bar_width_um))?,
    };
    let beam = BeamProfile::gaussian(section.beam_fwhm_um)?;
    let cover = section.cover.as_deref().map(load_sample).transpose()?;
    let source = ctx.source()?;

    let mut raster = RasterConfig::covering(&mask, section.nx, section.ny);
    raster.pipeline = section.pipeline;
    raster.base_seed = config.seed;
    raster.reference_visibility = config.calibration.reference_visibility;
    raster.scan = ScanConfig {
        z_start_mm: -section.scan_half_width_mm,
        z_end_mm: section.scan_half_width_mm,
        origin_mm: 0.0,
        ..config.scan.clone()
    };
    let source = source.covering(section.scan_half_width_mm * 2e-3 / nloct_core::SPEED_OF_LIGHT, ctx.db)?;
    let image = raster_scan(&mask, &beam, cover.as_ref(), &raster, &source)?;

    let extra = provenance(&ctx.hash);
    let mut out = Outputs::new(&config.output_dir)?;
    let grid = image_to_grid(&image, &extra);
    let grid_path = out.write(&format!("{}_image.grid", mask.label), |w| grid.write(w))?;
    let csv_path = out.write(&format!("{}_image.csv", mask.label), |w| {
        write_image_csv(&image, &extra, w)
    })?;
    let finite: Vec<f64> = image.reflectance.iter().copied().filter(|r| r.is_finite()).collect();
    let (lo, hi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    println!(
        "{} x {} pixels at {:.1} um, R in [{lo:.4}, {hi:.4}], {} missing",
        image.nx,
        image.ny,
        image.step_um,
        image.missing()
    );
    println!("image -> {}, {}", grid_path.display(), csv_path.display());
    Ok(out.keep())
}

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::Interferogram;

type Mat5 = SMatrix<f64, 5, 5>;
type Vec5 = SVector<f64, 5>;

/// Modulation below this fraction of the baseline counts as no fringes.
const DEGENERATE_AMPLITUDE: f64 = 1e-9;
/// Fewest samples per fringe window; the model has five parameters.
const MIN_SAMPLES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Half-width of the fitted window, mm. `None` uses four fringe periods.
    pub half_width_mm: Option<f64>,
    /// Relative search range of the fringe wavenumber around its nominal value.
    pub wavenumber_range: f64,
    /// Grid points of the initial wavenumber scan.
    pub scan_points: usize,
    /// Iteration cap of the golden-section refinement.
    pub max_iterations: usize,
    /// Keep the nominal wavenumber instead of refining it.
    pub fixed_wavenumber: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            half_width_mm: None,
            wavenumber_range: 0.05,
            scan_points: 41,
            max_iterations: 100,
            fixed_wavenumber: false,
        }
    }
}

/// Result of a local fringe fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    /// Fringe amplitude over baseline at the window centre.
    pub visibility: f64,
    pub sigma: f64,
    /// Fringe phase at the window centre, radians in (-pi, pi].
    pub phase: f64,
    /// Fitted fringe wavenumber, rad/mm.
    pub wavenumber: f64,
    /// Baseline intensity at the window centre.
    pub baseline: f64,
    pub rms_residual: f64,
    pub samples: usize,
    /// No measurable modulation; visibility is reported as zero.
    pub degenerate: bool,
}

/// Least-squares fringe fit with default options.
pub fn fit_fringes(trace: &Interferogram, window_center_mm: f64, idler_nm: f64) -> Result<FringeFit> {
    fit_fringes_with(trace, window_center_mm, idler_nm, &FitOptions::default())
}

/// Fits a + (p + q|u|) cos(k u) + (s + t|u|) sin(k u), u = z - centre.
///
/// This is a + b cos(k z + phi) with an amplitude allowed to change linearly
/// away from the centre on either side, which absorbs the slope of the
/// coherence envelope without biasing b at the centre. For a fixed k the
/// problem is linear; k itself is scanned over the configured range and
/// refined by golden-section search on the residual sum of squares.
/// Visibility is sqrt(p^2 + s^2) / a, its sigma follows from the parameter
/// covariance.
pub fn fit_fringes_with(
    trace: &Interferogram,
    window_center_mm: f64,
    idler_nm: f64,
    options: &FitOptions,
) -> Result<FringeFit> {
    if !(idler_nm > 0.0) {
        return Err(Error::invalid("idler wavelength must be positive"));
    }
    let k0 = trace.meta.fringe_convention.wavenumber(idler_nm) * 1e-3;
    let period = 2.0 * std::f64::consts::PI / k0;
    let half = options.half_width_mm.unwrap_or(4.0 * period);
    if half < 1.5 * period {
        return Err(Error::invalid(format!(
            "fit window half-width {half} mm spans fewer than 3 fringe periods"
        )));
    }
    let p = trace.positions();
    if window_center_mm - half < p[0] || window_center_mm + half > p[p.len() - 1] {
        return Err(Error::OutOfRange {
            quantity: "fit window centre (mm)",
            value: window_center_mm,
            min: p[0] + half,
            max: p[p.len() - 1] - half,
        });
    }
    let range = trace.window(window_center_mm, half);
    let u: Vec<f64> = p[range.clone()]
        .iter()
        .map(|z| z - window_center_mm)
        .collect();
    let y = &trace.intensity()[range];
    if u.len() < MIN_SAMPLES {
        return Err(Error::invalid(format!(
            "fit window holds {} samples, at least {MIN_SAMPLES} needed",
            u.len()
        )));
    }
    let problem = Problem { u: &u, y, half };

    let nominal = problem.solve(k0).ok_or_else(|| singular(0))?;
    if nominal.amplitude() < DEGENERATE_AMPLITUDE * nominal.coef[0].abs() {
        return Ok(FringeFit {
            visibility: 0.0,
            sigma: 0.0,
            phase: 0.0,
            wavenumber: k0,
            baseline: nominal.coef[0],
            rms_residual: (nominal.rss / u.len() as f64).sqrt(),
            samples: u.len(),
            degenerate: true,
        });
    }

    let (k, iterations) = if options.fixed_wavenumber {
        (k0, 0)
    } else {
        refine_wavenumber(&problem, k0, options)?
    };
    let sol = problem.solve(k).ok_or_else(|| singular(iterations))?;
    Ok(sol.report(k, u.len()))
}

fn singular(iterations: usize) -> Error {
    Error::FitFailure {
        iterations,
        reason: "singular normal equations".into(),
        rms_residual: f64::NAN,
    }
}

struct Problem<'a> {
    u: &'a [f64],
    y: &'a [f64],
    half: f64,
}

struct Solution {
    coef: Vec5,
    /// (X^T X)^-1
    inverse: Mat5,
    rss: f64,
    samples: usize,
}

impl Problem<'_> {
    fn row(&self, k: f64, u: f64) -> Vec5 {
        let (s, c) = (k * u).sin_cos();
        let w = u.abs() / self.half;
        Vec5::new(1.0, c, w * c, s, w * s)
    }

    fn solve(&self, k: f64) -> Option<Solution> {
        let mut xtx = Mat5::zeros();
        let mut xty = Vec5::zeros();
        for (&u, &y) in self.u.iter().zip(self.y) {
            let r = self.row(k, u);
            xtx += r * r.transpose();
            xty += r * y;
        }
        let inverse = xtx.try_inverse()?;
        let coef = inverse * xty;
        let rss = self
            .u
            .iter()
            .zip(self.y)
            .map(|(&u, &y)| {
                let e = y - self.row(k, u).dot(&coef);
                e * e
            })
            .sum();
        Some(Solution {
            coef,
            inverse,
            rss,
            samples: self.u.len(),
        })
    }

    fn rss(&self, k: f64) -> f64 {
        self.solve(k).map_or(f64::INFINITY, |s| s.rss)
    }
}

impl Solution {
    fn amplitude(&self) -> f64 {
        self.coef[1].hypot(self.coef[3])
    }

    fn report(&self, k: f64, samples: usize) -> FringeFit {
        let a = self.coef[0];
        let (p, s) = (self.coef[1], self.coef[3]);
        let amp = self.amplitude();
        let visibility = amp / a;
        let dof = (self.samples as f64 - 5.0).max(1.0);
        let s2 = self.rss / dof;
        // Gradient of V = hypot(p, s) / a with respect to (a, p, s).
        let g = [(0, -visibility / a), (1, p / (a * amp)), (3, s / (a * amp))];
        let mut var = 0.0;
        for &(i, gi) in &g {
            for &(j, gj) in &g {
                var += gi * gj * self.inverse[(i, j)];
            }
        }
        FringeFit {
            visibility,
            sigma: (s2 * var).max(0.0).sqrt(),
            phase: (-s).atan2(p),
            wavenumber: k,
            baseline: a,
            rms_residual: (self.rss / samples as f64).sqrt(),
            samples,
            degenerate: false,
        }
    }
}

/// Coarse scan over k0 (1 +- range), then golden-section search in the
/// bracket around the best grid point.
fn refine_wavenumber(problem: &Problem, k0: f64, options: &FitOptions) -> Result<(f64, usize)> {
    let n = options.scan_points.max(5);
    let lo = k0 * (1.0 - options.wavenumber_range);
    let hi = k0 * (1.0 + options.wavenumber_range);
    let dk = (hi - lo) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| problem.rss(lo + i as f64 * dk)).collect();
    let best = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if best == 0 || best == n - 1 {
        return Err(Error::FitFailure {
            iterations: n,
            reason: format!(
                "fringe wavenumber minimum at the edge of the search range [{lo:.6}, {hi:.6}] rad/mm"
            ),
            rms_residual: (grid[best] / problem.u.len() as f64).sqrt(),
        });
    }

    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo + (best - 1) as f64 * dk, lo + (best + 1) as f64 * dk);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (problem.rss(c), problem.rss(d));
    let tolerance = 1e-12 * k0;
    let mut iterations = 0;
    while b - a > tolerance {
        if iterations >= options.max_iterations {
            return Err(Error::FitFailure {
                iterations,
                reason: format!("wavenumber bracket still {:.3e} rad/mm wide", b - a),
                rms_residual: (fc.min(fd) / problem.u.len() as f64).sqrt(),
            });
        }
        iterations += 1;
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = problem.rss(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = problem.rss(d);
        }
    }
    Ok((0.5 * (a + b), n + iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{FringeConvention, NoiseModel, ScanPass, TraceMeta};

    fn trace_from(f: impl Fn(f64) -> f64, step_mm: f64, n: usize) -> Interferogram {
        let positions: Vec<f64> = (0..n).map(|i| (i as f64 - (n / 2) as f64) * step_mm).collect();
        let intensity = positions.iter().map(|&z| f(z)).collect();
        let meta = TraceMeta {
            tool_version: "test".into(),
            config_hash: None,
            signal_nm: 707.9,
            idler_nm: 2140.0,
            fringe_convention: FringeConvention::Physical,
            seed: 0,
            noise: NoiseModel::None,
            mean_counts: 1e4,
            pass: ScanPass::Fine,
            origin_mm: 0.0,
            echoes: Vec::new(),
        };
        Interferogram::new(positions, intensity, meta).unwrap()
    }

    fn k() -> f64 {
        FringeConvention::Physical.wavenumber(2140.0) * 1e-3
    }

    #[test]
    fn pure_cosine_is_exact() {
        let t = trace_from(|z| 1e4 * (1.0 + 0.33 * (k() * z + 0.4).cos()), 2.14e-3 / 20.0, 801);
        let fit = fit_fringes(&t, 0.0, 2140.0).unwrap();
        assert!((fit.visibility - 0.33).abs() < 1e-6, "{fit:?}");
        assert!((fit.phase - 0.4).abs() < 1e-6);
        assert!(!fit.degenerate);
    }

    #[test]
    fn triangle_envelope_does_not_bias_centre() {
        let w = 0.05;
        let t = trace_from(
            |z| 1e4 * (1.0 + 0.2 * (1.0 - z.abs() / w).max(0.0) * (k() * z).cos()),
            2.14e-3 / 20.0,
            2001,
        );
        let fit = fit_fringes_with(
            &t,
            0.0,
            2140.0,
            &FitOptions {
                half_width_mm: Some(0.02),
                ..FitOptions::default()
            },
        )
        .unwrap();
        assert!((fit.visibility - 0.2).abs() < 1e-6, "{fit:?}");
    }

    #[test]
    fn dc_trace_is_degenerate() {
        let t = trace_from(|_| 5000.0, 1e-4, 401);
        let fit = fit_fringes(&t, 0.0, 2140.0).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.visibility, 0.0);
    }

    #[test]
    fn narrow_or_outside_window_rejected() {
        let t = trace_from(|z| 1.0 + 0.5 * (k() * z).cos(), 1e-4, 401);
        let narrow = FitOptions {
            half_width_mm: Some(1e-4),
            ..FitOptions::default()
        };
        assert!(fit_fringes_with(&t, 0.0, 2140.0, &narrow).is_err());
        assert!(fit_fringes(&t, 0.5, 2140.0).is_err());
    }

    #[test]
    fn iteration_cap_reports_failure() {
        let t = trace_from(|z| 1e4 * (1.0 + 0.5 * (k() * z).cos()), 1e-4, 2001);
        let capped = FitOptions {
            max_iterations: 3,
            ..FitOptions::default()
        };
        let err = fit_fringes_with(&t, 0.0, 2140.0, &capped).unwrap_err();
        assert!(matches!(err, Error::FitFailure { iterations: 3, .. }), "{err}");
    }

    #[test]
    fn rescaling_leaves_visibility_unchanged() {
        let t = trace_from(|z| 1e4 * (1.0 + 0.2 * (k() * z + 1.0).cos()), 1e-4, 2001);
        let a = fit_fringes(&t, 0.0, 2140.0).unwrap();
        let b = fit_fringes(&t.scaled(37.5).unwrap(), 0.0, 2140.0).unwrap();
        assert!((a.visibility - b.visibility).abs() < 1e-12);
    }
}

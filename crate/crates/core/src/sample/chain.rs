use serde::{Deserialize, Serialize};

use super::stack::SampleStack;

/// Default pruning floor on echo visibility.
pub const DEFAULT_VISIBILITY_FLOOR: f64 = 1e-4;

/// Depths closer than this (mm) are treated as one echo.
const MERGE_TOLERANCE_MM: f64 = 1e-9;

/// One envelope contribution to the interferogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Echo {
    /// Mirror displacement of the envelope centre relative to the front
    /// surface (one-way optical path), mm.
    pub depth_mm: f64,
    /// Visibility after the reference calibration is applied.
    pub visibility: f64,
    /// Product of amplitude factors along the path, before calibration.
    pub raw_visibility: f64,
    /// Interface phase: 0 or pi from the sign of the path amplitude.
    pub phase: f64,
    /// Number of internal bounces (reflections from below).
    pub order: usize,
    /// Interfaces visited (1-based, top to bottom): alternating reflections
    /// from above and from below, starting and ending with one from above.
    pub surface_path: Vec<usize>,
}

impl Echo {
    /// Signed calibrated amplitude, `visibility * cos(phase)`.
    pub fn signed_visibility(&self) -> f64 {
        if self.phase == 0.0 {
            self.visibility
        } else {
            -self.visibility
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoList {
    /// Sorted by ascending depth.
    pub echoes: Vec<Echo>,
    /// V_ref / |r_ref| applied to every raw visibility (1 without calibration).
    pub instrument_factor: f64,
    pub max_echo_order: usize,
    pub visibility_floor: f64,
}

impl EchoList {
    pub fn empty() -> Self {
        Self {
            echoes: Vec::new(),
            instrument_factor: 1.0,
            max_echo_order: 0,
            visibility_floor: DEFAULT_VISIBILITY_FLOOR,
        }
    }

    pub fn len(&self) -> usize {
        self.echoes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.echoes.is_empty()
    }

    /// Order-0 echoes in depth order.
    pub fn surfaces(&self) -> impl Iterator<Item = &Echo> {
        self.echoes.iter().filter(|e| e.order == 0)
    }

    /// Largest echo depth, mm (0 for an empty list).
    pub fn max_depth_mm(&self) -> f64 {
        self.echoes.iter().map(|e| e.depth_mm).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainOptions {
    pub max_echo_order: usize,
    pub visibility_floor: f64,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            max_echo_order: 1,
            visibility_floor: DEFAULT_VISIBILITY_FLOOR,
        }
    }
}

/// Echo list of a stack with the default visibility floor.
pub fn visibility_chain(stack: &SampleStack, max_echo_order: usize) -> EchoList {
    visibility_chain_with(
        stack,
        ChainOptions {
            max_echo_order,
            ..ChainOptions::default()
        },
    )
}

/// Enumerates reflection paths through the stack.
///
/// A path goes down to an interface, reflects, and either leaves the stack
/// or reflects again from below off a shallower interface and goes down
/// once more. Its amplitude is the product of the signed reflections, one
/// factor (1 - r^2) per downward interface crossing (paired with the
/// matching upward crossing) and one |tau| per layer pass. Every extension
/// multiplies by factors of magnitude at most one, so a partial path below
/// the floor can be dropped together with all its extensions.
pub fn visibility_chain_with(stack: &SampleStack, options: ChainOptions) -> EchoList {
    let eta = stack.instrument_factor();
    let mut raw: Vec<Echo> = Vec::new();

    if stack.is_reference() {
        // The bare reference mirror, as seen through the calibration: metal
        // reflection from the ambient side.
        let amp = -stack.reference_reflectivity;
        raw.push(make_echo(0.0, amp, eta, 0, Vec::new()));
    } else {
        for (field_deg, weight) in stack.probe_polarization.components() {
            let walker = Walker::new(stack, field_deg, weight, eta, options);
            walker.run(&mut raw);
        }
    }

    let echoes = merge(raw, eta, options.visibility_floor);
    EchoList {
        echoes,
        instrument_factor: eta,
        max_echo_order: options.max_echo_order,
        visibility_floor: options.visibility_floor,
    }
}

fn make_echo(depth_mm: f64, amplitude: f64, eta: f64, order: usize, path: Vec<usize>) -> Echo {
    let calibrated = amplitude * eta;
    Echo {
        depth_mm,
        visibility: calibrated.abs(),
        raw_visibility: amplitude.abs(),
        phase: if calibrated < 0.0 { std::f64::consts::PI } else { 0.0 },
        order,
        surface_path: path,
    }
}

struct Walker {
    /// Signed reflection from above, index 1..=N (index 0 unused).
    r: Vec<f64>,
    /// tau per layer, index 1..=L.
    tau: Vec<f64>,
    /// Half of the round-trip optical path per layer pass, mm.
    half_path_mm: Vec<f64>,
    weight: f64,
    eta: f64,
    options: ChainOptions,
}

impl Walker {
    fn new(
        stack: &SampleStack,
        field_deg: f64,
        weight: f64,
        eta: f64,
        options: ChainOptions,
    ) -> Self {
        let media = stack.media(field_deg);
        let mut r = vec![0.0];
        r.extend(stack.interface_amplitudes(field_deg));
        let mut tau = vec![1.0];
        let mut half_path_mm = vec![0.0];
        for (j, layer) in stack.layers.iter().enumerate() {
            tau.push(layer.amplitude_transmission);
            half_path_mm.push(0.5 * media[j + 1] * layer.thickness_um * 1e-3);
        }
        Self {
            r,
            tau,
            half_path_mm,
            weight,
            eta,
            options,
        }
    }

    fn interfaces(&self) -> usize {
        self.r.len() - 1
    }

    fn below_floor(&self, amplitude: f64) -> bool {
        (amplitude * self.weight * self.eta).abs() < self.options.visibility_floor
    }

    fn run(&self, out: &mut Vec<Echo>) {
        let start = Partial {
            amplitude: self.weight,
            depth_mm: 0.0,
            path: Vec::new(),
        };
        for d in 1..=self.interfaces() {
            self.descend(&start, 0, d, out);
        }
    }

    /// Go down from just below interface `u` (0 = ambient) to interface `d`
    /// and reflect there.
    fn descend(&self, p: &Partial, u: usize, d: usize, out: &mut Vec<Echo>) {
        let mut amplitude = p.amplitude;
        let mut depth = p.depth_mm;
        for m in (u + 1)..d {
            amplitude *= 1.0 - self.r[m] * self.r[m];
        }
        for j in u.max(1)..d {
            amplitude *= self.tau[j];
            depth += self.half_path_mm[j];
        }
        amplitude *= self.r[d];
        let order = p.path.len() / 2;
        if order > 0 && self.below_floor(amplitude) {
            return;
        }
        let mut path = p.path.clone();
        path.push(d);

        // Leave the stack: pass back up through layers 1..d-1.
        let (mut exit_amp, mut exit_depth) = (amplitude, depth);
        for j in 1..d {
            exit_amp *= self.tau[j];
            exit_depth += self.half_path_mm[j];
        }
        out.push(make_echo(exit_depth, exit_amp, 1.0, order, path.clone()));

        if order >= self.options.max_echo_order {
            return;
        }
        // Or bounce off the underside of a shallower interface.
        for up in 1..d {
            let mut a = amplitude;
            let mut z = depth;
            for j in up..d {
                a *= self.tau[j];
                z += self.half_path_mm[j];
            }
            a *= -self.r[up];
            if self.below_floor(a) {
                continue;
            }
            let mut bounced = path.clone();
            bounced.push(up);
            let next = Partial {
                amplitude: a,
                depth_mm: z,
                path: bounced,
            };
            for d2 in (up + 1)..=self.interfaces() {
                self.descend(&next, up, d2, out);
            }
        }
    }
}

struct Partial {
    amplitude: f64,
    depth_mm: f64,
    path: Vec<usize>,
}

/// Sums coincident echoes (signed), applies calibration and the floor.
/// Order-0 entries are always kept.
fn merge(mut raw: Vec<Echo>, eta: f64, floor: f64) -> Vec<Echo> {
    raw.sort_by(|a, b| {
        a.depth_mm
            .total_cmp(&b.depth_mm)
            .then(a.order.cmp(&b.order))
    });
    let mut merged: Vec<(f64, Echo)> = Vec::new();
    for e in raw {
        let signed = if e.phase == 0.0 {
            e.raw_visibility
        } else {
            -e.raw_visibility
        };
        match merged.last_mut() {
            Some((sum, head)) if (e.depth_mm - head.depth_mm).abs() <= MERGE_TOLERANCE_MM => {
                *sum += signed;
            }
            _ => merged.push((signed, e)),
        }
    }
    merged
        .into_iter()
        .map(|(sum, head)| {
            let mut echo = make_echo(head.depth_mm, sum, eta, head.order, head.surface_path);
            if echo.visibility > 1.0 {
                log::warn!(
                    "calibrated visibility {} at depth {} mm exceeds 1; clamped",
                    echo.visibility,
                    echo.depth_mm
                );
                echo.visibility = 1.0;
            }
            echo
        })
        .filter(|e| e.order == 0 || e.visibility >= floor)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::{Layer, ProbePolarization};

    fn si_window() -> SampleStack {
        SampleStack::new(vec![Layer::isotropic("si", 1080.0, 3.476)])
    }

    #[test]
    fn single_surface_visibility_is_reflection() {
        let stack = SampleStack::new(vec![Layer::isotropic("glass", 1e6, 1.5)]);
        let list = visibility_chain(&stack, 0);
        let r1 = (0.5f64 / 2.5).abs();
        assert!((list.echoes[0].visibility - r1).abs() < 1e-15);
        assert_eq!(list.echoes[0].phase, std::f64::consts::PI);
    }

    #[test]
    fn silicon_window_chain() {
        let list = visibility_chain(&si_window(), 1);
        assert_eq!(list.len(), 3);
        let v: Vec<f64> = list.echoes.iter().map(|e| e.visibility).collect();
        let r = 2.476 / 4.476;
        assert!((v[0] - r).abs() < 1e-12);
        assert!((v[1] - r * (1.0 - r * r)).abs() < 1e-12);
        assert!((v[2] - v[1] * r * r).abs() < 1e-12);
        assert!((list.echoes[1].depth_mm - 3.476 * 1.080).abs() < 1e-12);
        assert!((list.echoes[2].depth_mm - 2.0 * 3.476 * 1.080).abs() < 1e-12);
        assert_eq!(list.echoes[2].order, 1);
        assert_eq!(list.echoes[2].surface_path, vec![2, 1, 2]);
    }

    #[test]
    fn reference_mirror_uses_calibration() {
        let stack = SampleStack::reference_mirror().with_reference_visibility(0.81);
        let list = visibility_chain(&stack, 3);
        assert_eq!(list.len(), 1);
        assert!((list.echoes[0].visibility - 0.81).abs() < 1e-15);
        assert_eq!(list.echoes[0].depth_mm, 0.0);
    }

    #[test]
    fn calibration_scales_and_keeps_raw() {
        let mut stack = si_window().with_reference_visibility(0.5);
        stack.reference_reflectivity = 0.9;
        let list = visibility_chain(&stack, 0);
        for e in &list.echoes {
            assert!((e.visibility - e.raw_visibility * 0.5 / 0.9).abs() < 1e-15);
        }
    }

    #[test]
    fn floor_prunes_high_orders() {
        let list = visibility_chain(&si_window(), 10);
        assert!(list.echoes.iter().all(|e| e.order == 0 || e.visibility >= 1e-4));
        assert!(list.echoes.iter().any(|e| e.order >= 3));
        for w in list.echoes.windows(2) {
            assert!(w[0].depth_mm <= w[1].depth_mm);
        }
    }

    #[test]
    fn equal_depth_paths_merge() {
        // Equal optical thicknesses make distinct bounce paths coincide.
        let stack = SampleStack::new(vec![
            Layer::isotropic("a", 500.0, 1.5),
            Layer::isotropic("b", 500.0 * 1.5 / 2.0, 2.0),
        ]);
        let list = visibility_chain(&stack, 2);
        for w in list.echoes.windows(2) {
            assert!(w[1].depth_mm - w[0].depth_mm > MERGE_TOLERANCE_MM);
        }
    }

    #[test]
    fn birefringent_components_split() {
        let mut q = Layer::isotropic("quartz", 934.0, 1.542);
        q.index_e = 1.563;
        let mut stack = SampleStack::new(vec![q]);
        stack.probe_polarization = ProbePolarization::CustomAngle(45.0);
        let list = visibility_chain(&stack, 0);
        // front surface (two equal contributions merged) plus two back faces
        assert_eq!(list.len(), 3);
        stack.probe_polarization = ProbePolarization::AlongSlow;
        let slow = visibility_chain(&stack, 0);
        assert!((slow.echoes[1].depth_mm - 1.563 * 0.934).abs() < 1e-12);
    }
}

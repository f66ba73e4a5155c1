//! Stage-3 geometry: boundary extraction, ellipse fitting, minimum
//! enclosing rectangle, caliper scaling, and the clinical conversions.

mod ellipse;
mod equations;
mod rect;

pub use ellipse::{ellipse_perimeter, fit_ellipse, sample_ellipse, EllipseParams};
pub use equations::{
    estimated_fetal_weight, gestational_age, DatingEquation, EquationTable, WeightEquation,
};
pub use rect::{convex_hull, fit_min_rect, RectParams};

use serde::{Deserialize, Serialize};

use crate::corpus::{BinaryMask, BiometryClass, GrayRaster};
use crate::error::{Error, Result};

/// Width of the left-edge band scanned for caliper tick marks.
pub const CALIPER_BAND_PX: usize = 8;

/// Brightness above which a caliper pixel counts as part of a tick.
pub const CALIPER_TICK_BRIGHTNESS: u8 = 128;

/// Boundary pixel centers sit half a pixel inside the contour of the
/// underlying region, so physical measurements expand fitted shapes by
/// half a pixel per side before scaling.
const HALF_PIXEL: f64 = 0.5;

/// Measurements in millimetres, plus the derived aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BiometrySet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hc_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ac_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bpd_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cereb_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fl_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ga_weeks: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efw_grams: Option<f64>,
}

impl BiometrySet {
    /// Merge, keeping already-present values (first measurement wins).
    pub fn merge(&mut self, other: &BiometrySet) {
        self.hc_mm = self.hc_mm.or(other.hc_mm);
        self.ac_mm = self.ac_mm.or(other.ac_mm);
        self.bpd_mm = self.bpd_mm.or(other.bpd_mm);
        self.cereb_mm = self.cereb_mm.or(other.cereb_mm);
        self.fl_mm = self.fl_mm.or(other.fl_mm);
        self.ga_weeks = self.ga_weeks.or(other.ga_weeks);
        self.efw_grams = self.efw_grams.or(other.efw_grams);
    }

    pub fn is_empty(&self) -> bool {
        self.hc_mm.is_none()
            && self.ac_mm.is_none()
            && self.bpd_mm.is_none()
            && self.cereb_mm.is_none()
            && self.fl_mm.is_none()
    }
}

/// Foreground pixels with at least one 4-neighborhood background (or
/// image-edge) neighbor, in deterministic raster order.
pub fn boundary_points(mask: &BinaryMask) -> Result<Vec<(f64, f64)>> {
    if mask.foreground_count() == 0 {
        return Err(Error::EmptyMask);
    }
    let (w, h) = (mask.width, mask.height);
    let mut points = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let edge = x == 0 || y == 0 || x == w - 1 || y == h - 1;
            let exposed = edge
                || !mask.get(x - 1, y)
                || !mask.get(x + 1, y)
                || !mask.get(x, y - 1)
                || !mask.get(x, y + 1);
            if exposed {
                points.push((x as f64, y as f64));
            }
        }
    }
    Ok(points)
}

/// Pixel-to-millimetre scale from a caliper strip: tick rows are detected
/// in the left band, grouped into marks, and the spacing is divided by the
/// median inter-tick gap.
pub fn caliper_scale(strip: &GrayRaster, tick_spacing_mm: f64) -> Result<f64> {
    if !(tick_spacing_mm.is_finite() && tick_spacing_mm > 0.0) {
        return Err(Error::InvalidValue(format!(
            "tick_spacing_mm must be positive, got {tick_spacing_mm}"
        )));
    }
    let band = strip.width.min(CALIPER_BAND_PX);
    let mut tick_rows: Vec<bool> = Vec::with_capacity(strip.height);
    for y in 0..strip.height {
        let lit = (0..band).any(|x| strip.get(x, y) > CALIPER_TICK_BRIGHTNESS);
        tick_rows.push(lit);
    }
    // group consecutive lit rows into one tick at their mean row
    let mut centers: Vec<f64> = Vec::new();
    let mut run_start: Option<usize> = None;
    for (y, lit) in tick_rows.iter().enumerate() {
        match (lit, run_start) {
            (true, None) => run_start = Some(y),
            (false, Some(s)) => {
                centers.push((s as f64 + (y - 1) as f64) / 2.0);
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        centers.push((s as f64 + (strip.height - 1) as f64) / 2.0);
    }
    if centers.len() < 2 {
        return Err(Error::InsufficientTicks);
    }
    let mut gaps: Vec<f64> = centers.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if gaps.len() % 2 == 1 {
        gaps[gaps.len() / 2]
    } else {
        (gaps[gaps.len() / 2 - 1] + gaps[gaps.len() / 2]) / 2.0
    };
    if median <= 0.0 {
        return Err(Error::InsufficientTicks);
    }
    Ok(tick_spacing_mm / median)
}

/// Measure one biometry class from a mask.
///
/// HC and AC are the perimeter of the fitted ellipse; HC additionally
/// yields BPD as the full minor axis. Cereb and FL are the long side of
/// the minimum enclosing rectangle. All lengths are scaled by the mask's
/// mm-per-pixel factor with the half-pixel boundary compensation.
pub fn measure(mask: &BinaryMask, class: BiometryClass) -> Result<BiometrySet> {
    let scale = mask.mm_per_px;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidValue(format!(
            "mm_per_px must be positive, got {scale}"
        )));
    }
    let points = boundary_points(mask)?;
    let mut out = BiometrySet::default();
    match class {
        BiometryClass::HC | BiometryClass::AC => {
            let fit = fit_ellipse(&points)?;
            let corrected = EllipseParams {
                semi_major: fit.semi_major + HALF_PIXEL,
                semi_minor: fit.semi_minor + HALF_PIXEL,
                ..fit
            };
            let perimeter_mm = ellipse_perimeter(&corrected) * scale;
            if class == BiometryClass::HC {
                out.hc_mm = Some(perimeter_mm);
                out.bpd_mm = Some(2.0 * corrected.semi_minor * scale);
            } else {
                out.ac_mm = Some(perimeter_mm);
            }
        }
        BiometryClass::FL | BiometryClass::Cereb => {
            let rect = fit_min_rect(&points);
            let length_mm = (rect.long_side + 2.0 * HALF_PIXEL) * scale;
            if class == BiometryClass::FL {
                out.fl_mm = Some(length_mm);
            } else {
                out.cereb_mm = Some(length_mm);
            }
        }
    }
    Ok(out)
}

/// Rasterize a filled ellipse: a pixel is foreground when its integer
/// center lies inside the ellipse. Shared by tests and the synthesizer.
pub fn rasterize_ellipse(
    width: usize,
    height: usize,
    e: &EllipseParams,
    mm_per_px: f64,
) -> BinaryMask {
    let (ct, st) = (e.theta.cos(), e.theta.sin());
    let mut pixels = vec![0u8; width * height];
    for y in 0..height {
        for x in 0..width {
            let dx = x as f64 - e.cx;
            let dy = y as f64 - e.cy;
            let u = dx * ct + dy * st;
            let v = -dx * st + dy * ct;
            let val = (u / e.semi_major).powi(2) + (v / e.semi_minor).powi(2);
            if val <= 1.0 {
                pixels[y * width + x] = 1;
            }
        }
    }
    BinaryMask {
        width,
        height,
        pixels,
        mm_per_px,
    }
}

/// Rasterize a rotated bar (filled rectangle of `length` x `width_px`).
pub fn rasterize_bar(
    width: usize,
    height: usize,
    center: (f64, f64),
    length: f64,
    width_px: f64,
    theta: f64,
    mm_per_px: f64,
) -> BinaryMask {
    let (cx, cy) = center;
    let (ct, st) = (theta.cos(), theta.sin());
    let mut pixels = vec![0u8; width * height];
    for y in 0..height {
        for x in 0..width {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let u = dx * ct + dy * st;
            let v = -dx * st + dy * ct;
            if u.abs() <= length / 2.0 && v.abs() <= width_px / 2.0 {
                pixels[y * width + x] = 1;
            }
        }
    }
    BinaryMask {
        width,
        height,
        pixels,
        mm_per_px,
    }
}

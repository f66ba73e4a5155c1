//! Gestational-age and fetal-weight equations as data.
//!
//! Clinical dating and weight formulas vary between guidelines, so they
//! ship as a JSON table (name, coefficients, valid domain) rather than
//! hardcoded math. The defaults are documented in `docs/formats.md`; the
//! dating polynomial is a demonstration curve and should be replaced with
//! a site-validated equation for any clinical use. The weight formula is
//! the Hadlock three-parameter regression
//! log10(EFW g) = c0 + c1*AC*FL + c2*HC + c3*AC + c4*FL with inputs in cm.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BiometrySet;
use crate::corpus::BiometryClass;
use crate::error::{Error, Result};

/// Polynomial dating equation: GA_weeks = sum_i c_i * x^i where x is the
/// input measurement in millimetres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatingEquation {
    pub name: String,
    pub input: BiometryClass,
    pub coefficients: Vec<f64>,
    pub domain_mm: [f64; 2],
}

/// Hadlock-style weight regression with per-input validity ranges.
/// Coefficient order: [intercept, ac*fl, hc, ac, fl]; inputs in cm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightEquation {
    pub name: String,
    pub coefficients: [f64; 5],
    pub hc_domain_mm: [f64; 2],
    pub ac_domain_mm: [f64; 2],
    pub fl_domain_mm: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationTable {
    pub ga: DatingEquation,
    pub efw: WeightEquation,
}

impl Default for EquationTable {
    fn default() -> Self {
        Self {
            ga: DatingEquation {
                name: "hc-dating-quadratic-demo".into(),
                input: BiometryClass::HC,
                // demonstration curve: ~15w at 100 mm, ~22w at 200 mm,
                // ~36w at 320 mm
                coefficients: vec![12.242424242424242, 0.006363636363636364, 0.00021212121212121212],
                domain_mm: [80.0, 320.0],
            },
            efw: WeightEquation {
                name: "hadlock3-hc-ac-fl".into(),
                coefficients: [1.326, -0.00326, 0.0107, 0.0438, 0.158],
                hc_domain_mm: [80.0, 400.0],
                ac_domain_mm: [80.0, 450.0],
                fl_domain_mm: [10.0, 90.0],
            },
        }
    }
}

impl EquationTable {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::MalformedManifest(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::canonical::write_canonical_json(path, self)
    }
}

fn check_domain(value: f64, domain: [f64; 2]) -> Result<f64> {
    if value < domain[0] || value > domain[1] {
        return Err(Error::OutOfValidRange {
            value,
            min: domain[0],
            max: domain[1],
        });
    }
    Ok(value)
}

fn require(value: Option<f64>, name: &str) -> Result<f64> {
    value.ok_or_else(|| Error::MissingMeasurement(name.to_string()))
}

/// Gestational age in weeks from the configured dating equation.
pub fn gestational_age(measurements: &BiometrySet, table: &EquationTable) -> Result<f64> {
    let eq = &table.ga;
    let value = match eq.input {
        BiometryClass::HC => require(measurements.hc_mm, "HC")?,
        BiometryClass::AC => require(measurements.ac_mm, "AC")?,
        BiometryClass::FL => require(measurements.fl_mm, "FL")?,
        BiometryClass::Cereb => require(measurements.cereb_mm, "Cereb")?,
    };
    let x = check_domain(value, eq.domain_mm)?;
    // Horner evaluation, highest order first
    let ga = eq
        .coefficients
        .iter()
        .rev()
        .fold(0.0f64, |acc, c| acc * x + c);
    Ok(ga)
}

/// Estimated fetal weight in grams from HC, AC and FL.
pub fn estimated_fetal_weight(measurements: &BiometrySet, table: &EquationTable) -> Result<f64> {
    let eq = &table.efw;
    let hc_mm = check_domain(require(measurements.hc_mm, "HC")?, eq.hc_domain_mm)?;
    let ac_mm = check_domain(require(measurements.ac_mm, "AC")?, eq.ac_domain_mm)?;
    let fl_mm = check_domain(require(measurements.fl_mm, "FL")?, eq.fl_domain_mm)?;
    let (hc, ac, fl) = (hc_mm / 10.0, ac_mm / 10.0, fl_mm / 10.0);
    let [c0, c1, c2, c3, c4] = eq.coefficients;
    let log10_efw = c0 + c1 * ac * fl + c2 * hc + c3 * ac + c4 * fl;
    Ok(10.0f64.powf(log10_efw))
}

//! Aggregate statistics over per-exam reports: mean, standard deviation,
//! and the Welch two-sample two-tailed t-test used to compare groups.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::detect_eval::DetectionReport;
use crate::error::{Error, Result};

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub p_value: f64,
    pub df: f64,
}

/// Welch two-sample two-tailed t-test. Sample variances use n-1; the
/// p-value comes from the Student-t CDF at Welch-Satterthwaite degrees of
/// freedom. Two identical constant groups give t = 0, p = 1; constant
/// groups with different means give an infinite statistic and p = 0.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData(
            "each group needs at least two observations".into(),
        ));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let ma = a.iter().sum::<f64>() / na;
    let mb = b.iter().sum::<f64>() / nb;
    let va = a.iter().map(|v| (v - ma) * (v - ma)).sum::<f64>() / (na - 1.0);
    let vb = b.iter().map(|v| (v - mb) * (v - mb)).sum::<f64>() / (nb - 1.0);
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        return Ok(if ma == mb {
            WelchTest {
                t: 0.0,
                p_value: 1.0,
                df: na + nb - 2.0,
            }
        } else {
            WelchTest {
                t: if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY },
                p_value: 0.0,
                df: na + nb - 2.0,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::InvalidValue(format!("t-distribution: {e}")))?;
    let p_value = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(WelchTest { t, p_value, df })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricAggregate {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// The four detection metrics of one report as named values.
pub fn report_metrics(r: &DetectionReport) -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("cosine_simi_pct".to_string(), r.cosine_simi_pct),
        ("absolute_time_err_s".to_string(), r.absolute_time_err_s),
        ("correct_time_err_s".to_string(), r.correct_time_err_s),
        ("keyframe_num_err".to_string(), r.keyframe_num_err as f64),
    ])
}

/// Mean +/- std per metric across reports.
pub fn aggregate_reports(reports: &[DetectionReport]) -> Result<BTreeMap<String, MetricAggregate>> {
    if reports.len() < 2 {
        return Err(Error::InsufficientData(
            "aggregate needs at least two reports".into(),
        ));
    }
    let mut out = BTreeMap::new();
    for key in report_metrics(&reports[0]).keys() {
        let values: Vec<f64> = reports
            .iter()
            .map(|r| report_metrics(r)[key])
            .collect();
        let (mean, std) = mean_std(&values);
        out.insert(
            key.clone(),
            MetricAggregate {
                mean,
                std,
                n: values.len(),
            },
        );
    }
    Ok(out)
}

/// Per-metric Welch t-test between two groups of reports.
pub fn compare_groups(
    group_a: &[DetectionReport],
    group_b: &[DetectionReport],
) -> Result<BTreeMap<String, WelchTest>> {
    if group_a.len() < 2 || group_b.len() < 2 {
        return Err(Error::InsufficientData(
            "each group needs at least two reports".into(),
        ));
    }
    let mut out = BTreeMap::new();
    for key in report_metrics(&group_a[0]).keys() {
        let a: Vec<f64> = group_a.iter().map(|r| report_metrics(r)[key]).collect();
        let b: Vec<f64> = group_b.iter().map(|r| report_metrics(r)[key]).collect();
        out.insert(key.clone(), welch_t_test(&a, &b)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_brute_force() {
        let values = [1.0, 2.0, 3.0, 4.0, 7.5];
        let (mean, std) = mean_std(&values);
        let m: f64 = values.iter().sum::<f64>() / 5.0;
        let v: f64 = values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 5.0;
        assert_eq!(mean, m);
        assert_eq!(std, v.sqrt());
    }

    #[test]
    fn identical_groups_give_t0_p1() {
        let g = [2.0, 2.0, 2.0];
        let r = welch_t_test(&g, &g).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn separated_constant_groups_give_tiny_p() {
        let r = welch_t_test(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]).unwrap();
        assert!(r.p_value < 0.01);
    }

    #[test]
    fn welch_matches_direct_formula() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.5, 3.5, 5.0];
        let r = welch_t_test(&a, &b).unwrap();
        // direct evaluation
        let (na, nb) = (4.0f64, 3.0f64);
        let ma = a.iter().sum::<f64>() / na;
        let mb = b.iter().sum::<f64>() / nb;
        let va = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>() / (na - 1.0);
        let vb = b.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / (nb - 1.0);
        let t = (ma - mb) / (va / na + vb / nb).sqrt();
        assert!((r.t - t).abs() < 1e-12);
        assert!(r.p_value > 0.0 && r.p_value < 1.0);
    }

    #[test]
    fn too_small_groups_rejected() {
        assert!(matches!(
            welch_t_test(&[1.0], &[1.0, 2.0]),
            Err(Error::InsufficientData(_))
        ));
    }
}

//! One-way analysis of variance.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::special::betainc;

/// Result of a one-way ANOVA F-test.
#[derive(Debug, Clone, Serialize)]
pub struct AnovaResult {
    pub f_statistic: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub ms_between: f64,
    pub ms_within: f64,
    pub p_value: f64,
}

/// CDF of the F distribution with `d1`, `d2` degrees of freedom.
pub fn f_cdf(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    betainc(d1 * x / (d1 * x + d2), d1 / 2.0, d2 / 2.0)
}

/// Survival function of the F distribution, computed without cancellation.
pub fn f_sf(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    betainc(d2 / (d1 * x + d2), d2 / 2.0, d1 / 2.0)
}

/// One-way ANOVA over two or more groups of observations.
///
/// Requires at least two values per group and nonzero pooled within-group
/// variance (otherwise the F statistic is undefined).
pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(Error::Stats("ANOVA needs at least two groups".into()));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(Error::Stats(format!(
                "ANOVA group {i} has {} values, need at least 2",
                g.len()
            )));
        }
    }
    let k = groups.len();
    let n_total: usize = groups.iter().map(Vec::len).sum();
    let grand_mean = groups.iter().flatten().sum::<f64>() / n_total as f64;

    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (mean - grand_mean).powi(2);
        ss_within += g.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    }

    let df_between = k - 1;
    let df_within = n_total - k;
    if ss_within <= 0.0 {
        return Err(Error::Stats(
            "zero within-group variance; F statistic undefined".into(),
        ));
    }
    let ms_between = ss_between / df_between as f64;
    let ms_within = ss_within / df_within as f64;
    let f_statistic = ms_between / ms_within;
    let p_value = f_sf(f_statistic, df_between as f64, df_within as f64);

    Ok(AnovaResult {
        f_statistic,
        df_between,
        df_within,
        ms_between,
        ms_within,
        p_value,
    })
}

//! Studentized range distribution and Tukey's HSD test.
//!
//! `ptukey` evaluates P(Q <= q) for the studentized range of `k` standard
//! normal means with `df` error degrees of freedom by direct double
//! numerical integration: the inner integral is the CDF of the range of
//! `k` standard normals, the outer integral averages it over the
//! scaled-chi distribution of the pooled standard deviation estimate.
//! Gauss-Legendre panels drive both integrals; the outer interval is
//! truncated where the chi density carries less than ~1e-12 mass.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::anova::one_way_anova;
use crate::stats::special::{gauss_legendre, ln_gamma, normal_cdf, normal_pdf};

/// Inner quadrature grid: the range-CDF integrand lives on `[-9, 9]`
/// (anchored at the minimum of the k normals).
const INNER_LO: f64 = -9.0;
const INNER_HI: f64 = 9.0;
const INNER_PANELS: usize = 18;
const INNER_ORDER: usize = 16;
const OUTER_PANELS: usize = 40;
const OUTER_ORDER: usize = 12;

struct PanelGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

/// Scaled Gauss-Legendre nodes over `panels` equal panels of `[lo, hi]`.
fn panel_grid(lo: f64, hi: f64, panels: usize, order: usize) -> PanelGrid {
    let (nodes, weights) = gauss_legendre(order);
    let width = (hi - lo) / panels as f64;
    let half = width / 2.0;
    let mut points = Vec::with_capacity(panels * order);
    let mut scaled = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * width;
        for (&x, &w) in nodes.iter().zip(&weights) {
            points.push(mid + half * x);
            scaled.push(w * half);
        }
    }
    PanelGrid {
        points,
        weights: scaled,
    }
}

/// CDF of the range of `k` iid standard normals, evaluated on a shared grid.
///
/// `phi` and `cap_phi` hold the normal pdf and CDF at `grid.points`, cached
/// by the caller because they do not depend on `r`.
fn range_cdf_on_grid(r: f64, k: usize, grid: &PanelGrid, phi: &[f64], cap_phi: &[f64]) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..grid.points.len() {
        let window = (normal_cdf(grid.points[i] + r) - cap_phi[i]).max(0.0);
        total += grid.weights[i] * phi[i] * window.powi(k as i32 - 1);
    }
    (k as f64 * total).clamp(0.0, 1.0)
}

/// P(Q <= q) for the studentized range with `k` groups and `df` error
/// degrees of freedom. Absolute accuracy is well inside 1e-6.
pub fn ptukey(q: f64, k: usize, df: f64) -> f64 {
    assert!(k >= 2, "studentized range needs k >= 2");
    assert!(df >= 1.0, "studentized range needs df >= 1");
    if q <= 0.0 {
        return 0.0;
    }

    let inner = panel_grid(INNER_LO, INNER_HI, INNER_PANELS, INNER_ORDER);
    let phi: Vec<f64> = inner.points.iter().map(|&u| normal_pdf(u)).collect();
    let cap_phi: Vec<f64> = inner.points.iter().map(|&u| normal_cdf(u)).collect();

    // Outer variable s is the pooled-sd factor: s = chi_df / sqrt(df), with
    // density proportional to s^(df-1) exp(-df s^2 / 2). It concentrates
    // around 1 with spread ~ 1/sqrt(2 df).
    let sd = 1.0 / (2.0 * df).sqrt();
    let (s_lo, s_hi) = if df >= 8.0 {
        ((1.0 - 12.0 * sd).max(0.0), 1.0 + 12.0 * sd)
    } else {
        (0.0, (90.0 / df).sqrt().max(2.5))
    };
    let ln_norm = 0.5 * df * df.ln() - (0.5 * df - 1.0) * 2f64.ln() - ln_gamma(0.5 * df);

    let outer = panel_grid(s_lo, s_hi, OUTER_PANELS, OUTER_ORDER);
    let mut total = 0.0;
    for (&s, &w) in outer.points.iter().zip(&outer.weights) {
        if s <= 0.0 {
            continue;
        }
        let ln_density = ln_norm + (df - 1.0) * s.ln() - 0.5 * df * s * s;
        if ln_density < -40.0 {
            continue;
        }
        total += w * ln_density.exp() * range_cdf_on_grid(q * s, k, &inner, &phi, &cap_phi);
    }
    total.clamp(0.0, 1.0)
}

/// Quantile of the studentized range: inverse of [`ptukey`] in `q`,
/// located by bisection to an absolute tolerance of 1e-6.
pub fn qtukey(p: f64, k: usize, df: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::Stats(format!(
            "quantile probability must be in (0, 1), got {p}"
        )));
    }
    let mut lo = 0.0;
    let mut hi = 4.0;
    while ptukey(hi, k, df) < p {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Stats(
                "studentized range quantile out of range".into(),
            ));
        }
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if ptukey(mid, k, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One pairwise comparison in a Tukey HSD report.
#[derive(Debug, Clone, Serialize)]
pub struct TukeyPair {
    pub pair: String,
    pub difference: f64,
    pub se: f64,
    pub critical_mean: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Tukey HSD test output: every pairwise comparison plus the shared
/// distribution parameters.
#[derive(Debug, Clone, Serialize)]
pub struct TukeyReport {
    pub alpha: f64,
    pub k: usize,
    pub df: f64,
    pub q_critical: f64,
    /// True when group sizes were unequal and the Tukey-Kramer standard
    /// error was used per pair.
    pub kramer: bool,
    pub pairs: Vec<TukeyPair>,
}

/// Tukey's HSD over named groups of observations.
///
/// Equal group sizes use SE = sqrt(MS_within / n) with df = k(n-1); unequal
/// sizes fall back to the Tukey-Kramer per-pair SE and set the `kramer`
/// flag. Significance is decided both ways (p < alpha and difference >
/// critical mean), which agree by construction.
pub fn tukey_hsd(groups: &[(String, Vec<f64>)], alpha: f64) -> Result<TukeyReport> {
    if groups.len() < 2 {
        return Err(Error::Stats("Tukey HSD needs at least two groups".into()));
    }
    for (name, g) in groups {
        if g.len() < 2 {
            return Err(Error::Stats(format!(
                "Tukey HSD group {name:?} has {} values, need at least 2",
                g.len()
            )));
        }
    }
    let values: Vec<Vec<f64>> = groups.iter().map(|(_, g)| g.clone()).collect();
    let anova = one_way_anova(&values)?;
    let k = groups.len();
    let df = anova.df_within as f64;
    let ms_within = anova.ms_within;
    let equal_n = groups.windows(2).all(|w| w[0].1.len() == w[1].1.len());
    let q_critical = qtukey(1.0 - alpha, k, df)?;

    let means: Vec<f64> = values
        .iter()
        .map(|g| g.iter().sum::<f64>() / g.len() as f64)
        .collect();

    let mut pairs = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let se = if equal_n {
                (ms_within / values[i].len() as f64).sqrt()
            } else {
                (ms_within / 2.0 * (1.0 / values[i].len() as f64 + 1.0 / values[j].len() as f64))
                    .sqrt()
            };
            let difference = (means[i] - means[j]).abs();
            let q_obs = difference / se;
            let p_value = 1.0 - ptukey(q_obs, k, df);
            let critical_mean = q_critical * se;
            pairs.push(TukeyPair {
                pair: format!("{} - {}", groups[i].0, groups[j].0),
                difference,
                se,
                critical_mean,
                p_value,
                significant: difference > critical_mean,
            });
        }
    }
    Ok(TukeyReport {
        alpha,
        k,
        df,
        q_critical,
        kramer: !equal_n,
        pairs,
    })
}

/// Tukey HSD arithmetic from published summary statistics: named pair
/// differences, a shared standard error, and the distribution parameters.
pub fn tukey_from_summary(
    diffs: &[(String, f64)],
    se: f64,
    k: usize,
    df: f64,
    alpha: f64,
) -> Result<TukeyReport> {
    if se <= 0.0 {
        return Err(Error::Stats(format!(
            "standard error must be positive, got {se}"
        )));
    }
    if k < 2 {
        return Err(Error::Stats("Tukey HSD needs at least two groups".into()));
    }
    let q_critical = qtukey(1.0 - alpha, k, df)?;
    let critical_mean = q_critical * se;
    let pairs = diffs
        .iter()
        .map(|(name, diff)| {
            let difference = diff.abs();
            let p_value = 1.0 - ptukey(difference / se, k, df);
            TukeyPair {
                pair: name.clone(),
                difference,
                se,
                critical_mean,
                p_value,
                significant: difference > critical_mean,
            }
        })
        .collect();
    Ok(TukeyReport {
        alpha,
        k,
        df,
        q_critical,
        kramer: false,
        pairs,
    })
}

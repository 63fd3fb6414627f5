//! Repeated-measures ANOVA and LSD multiple comparison.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::{Error, Result};

/// `values[subject][system]`, every cell present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialMatrix {
    values: Vec<Vec<f64>>,
}

impl TrialMatrix {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        let n = values.len();
        let a = values.first().map_or(0, Vec::len);
        if n < 2 || a < 2 {
            return Err(Error::invalid("need at least 2 subjects and 2 systems"));
        }
        if values.iter().any(|r| r.len() != a) {
            return Err(Error::invalid("every subject needs one value per system"));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("trial values must be finite"));
        }
        Ok(TrialMatrix { values })
    }

    pub fn subjects(&self) -> usize {
        self.values.len()
    }

    pub fn systems(&self) -> usize {
        self.values[0].len()
    }

    pub fn get(&self, subject: usize, system: usize) -> f64 {
        self.values[subject][system]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn system_means(&self) -> Vec<f64> {
        let n = self.subjects() as f64;
        (0..self.systems()).map(|j| self.values.iter().map(|r| r[j]).sum::<f64>() / n).collect()
    }

    pub fn subject_means(&self) -> Vec<f64> {
        let a = self.systems() as f64;
        self.values.iter().map(|r| r.iter().sum::<f64>() / a).collect()
    }

    pub fn grand_mean(&self) -> f64 {
        self.values.iter().flatten().sum::<f64>() / (self.subjects() * self.systems()) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub ss_a: f64,
    pub ss_sub: f64,
    pub ss_sxa: f64,
    pub ss_total: f64,
    pub df_a: usize,
    pub df_sub: usize,
    pub df_sxa: usize,
    pub ms_a: f64,
    pub ms_sub: f64,
    pub ms_sxa: f64,
    pub f: f64,
    pub p_value: f64,
}

/// One-factor within-subjects decomposition.
pub fn within_subjects_anova(m: &TrialMatrix) -> Result<AnovaResult> {
    let (n, a) = (m.subjects(), m.systems());
    let g = m.grand_mean();
    let sys = m.system_means();
    let sub = m.subject_means();
    let ss_a = n as f64 * sys.iter().map(|v| (v - g).powi(2)).sum::<f64>();
    let ss_sub = a as f64 * sub.iter().map(|v| (v - g).powi(2)).sum::<f64>();
    let mut ss_total = 0.0;
    let mut ss_sxa = 0.0;
    let mut scale = 0.0;
    for (i, row) in m.rows().iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            ss_total += (x - g).powi(2);
            ss_sxa += (x - sys[j] - sub[i] + g).powi(2);
            scale += x * x;
        }
    }
    if ss_sxa <= 1e-24 * scale {
        return Err(Error::DegenerateAnova);
    }
    let (df_a, df_sub) = (a - 1, n - 1);
    let df_sxa = df_a * df_sub;
    let ms_a = ss_a / df_a as f64;
    let ms_sxa = ss_sxa / df_sxa as f64;
    let f = ms_a / ms_sxa;
    Ok(AnovaResult {
        ss_a,
        ss_sub,
        ss_sxa,
        ss_total,
        df_a,
        df_sub,
        df_sxa,
        ms_a,
        ms_sub: ss_sub / df_sub as f64,
        ms_sxa,
        f,
        p_value: f_survival(f, df_a as f64, df_sxa as f64),
    })
}

fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    // P(F > f) = I_{d2 / (d2 + d1 f)}(d2/2, d1/2)
    beta_reg(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * f))
}

/// CDF of Student's t with `df` degrees of freedom.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * beta_reg(0.5 * df, 0.5, df / (df + t * t));
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Inverse of [`t_cdf`] by bisection.
pub fn t_quantile(p: f64, df: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("quantile probability must be in (0, 1)"));
    }
    if !(df > 0.0) {
        return Err(Error::invalid("degrees of freedom must be positive"));
    }
    if p < 0.5 {
        return Ok(-t_quantile(1.0 - p, df)?);
    }
    let mut hi = 1.0;
    while t_cdf(hi, df) < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Least significant difference between two system means.
pub fn lsd_threshold(ms_error: f64, n: usize, df_error: usize, alpha: f64) -> Result<f64> {
    if !(ms_error >= 0.0) {
        return Err(Error::invalid("error mean square must be non-negative"));
    }
    if n < 2 || df_error == 0 {
        return Err(Error::invalid("need n >= 2 and df > 0"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must be in (0, 1)"));
    }
    let t = t_quantile(1.0 - 0.5 * alpha, df_error as f64)?;
    Ok(t * (2.0 * ms_error / n as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsdComparison {
    pub first: usize,
    pub second: usize,
    /// `mean(first) - mean(second)`.
    pub difference: f64,
    pub threshold: f64,
    pub significant: bool,
}

pub fn pairwise_lsd(m: &TrialMatrix, alpha: f64) -> Result<Vec<LsdComparison>> {
    let anova = within_subjects_anova(m)?;
    let threshold = lsd_threshold(anova.ms_sxa, m.subjects(), anova.df_sxa, alpha)?;
    let means = m.system_means();
    let mut out = Vec::new();
    for i in 0..means.len() {
        for j in i + 1..means.len() {
            let difference = means[i] - means[j];
            out.push(LsdComparison {
                first: i,
                second: j,
                difference,
                threshold,
                significant: difference.abs() > threshold,
            });
        }
    }
    Ok(out)
}

/// Plain-text ANOVA table plus LSD comparisons.
pub struct Report<'a> {
    pub title: &'a str,
    pub systems: &'a [&'a str],
    pub anova: AnovaResult,
    pub lsd: &'a [LsdComparison],
}

/// Four decimals, or scientific notation for magnitudes that would round to zero.
fn num(x: f64) -> String {
    if x != 0.0 && x.abs() < 5e-4 {
        format!("{x:.3e}")
    } else {
        format!("{x:.4}")
    }
}

impl fmt::Display for Report<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = &self.anova;
        writeln!(f, "{}", self.title)?;
        writeln!(f, "{:<10}{:>11}{:>6}{:>11}{:>10}", "SV", "SS", "df", "MS", "F")?;
        writeln!(f, "{:<10}{:>11}{:>6}{:>11}{:>10.2}", "System", num(a.ss_a), a.df_a, num(a.ms_a), a.f)?;
        writeln!(f, "{:<10}{:>11}{:>6}{:>11}", "Subject", num(a.ss_sub), a.df_sub, num(a.ms_sub))?;
        writeln!(f, "{:<10}{:>11}{:>6}{:>11}", "SxA", num(a.ss_sxa), a.df_sxa, num(a.ms_sxa))?;
        writeln!(f, "{:<10}{:>11}{:>6}", "Total", num(a.ss_total), a.df_a + a.df_sub + a.df_sxa)?;
        writeln!(f, "p = {:.3e}", a.p_value)?;
        if let Some(c) = self.lsd.first() {
            writeln!(f, "LSD threshold {}", num(c.threshold))?;
        }
        for c in self.lsd {
            let name = |i: usize| self.systems.get(i).copied().unwrap_or("?");
            let diff = if c.difference.abs() < 5e-4 && c.difference != 0.0 {
                format!("{:+.3e}", c.difference)
            } else {
                format!("{:+.4}", c.difference)
            };
            writeln!(f, "  {} - {}: {diff}{}", name(c.first), name(c.second), if c.significant { " *" } else { "" })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_by_hand() {
        // grand 2.75; system means 2, 3.5; subject means 1.5, 4
        // SS_A = 2 * (0.75^2 * 2) = 2.25, SS_Sub = 2 * (1.25^2 * 2) = 6.25
        // SS_total = 1.75^2 + 0.75^2 + 0.25^2 + 2.25^2 = 8.75, SS_SxA = 0.25
        let m = TrialMatrix::new(vec![vec![1.0, 2.0], vec![3.0, 5.0]]).unwrap();
        let r = within_subjects_anova(&m).unwrap();
        assert!((r.ss_a - 2.25).abs() < 1e-12);
        assert!((r.ss_sub - 6.25).abs() < 1e-12);
        assert!((r.ss_total - 8.75).abs() < 1e-12);
        assert!((r.ss_sxa - 0.25).abs() < 1e-12);
        assert_eq!((r.df_a, r.df_sub, r.df_sxa), (1, 1, 1));
        assert!((r.f - 9.0).abs() < 1e-12);
    }

    #[test]
    fn constant_matrix_is_degenerate() {
        let m = TrialMatrix::new(vec![vec![0.7; 3]; 4]).unwrap();
        assert!(matches!(within_subjects_anova(&m), Err(Error::DegenerateAnova)));
    }

    #[test]
    fn shape_validation() {
        assert!(TrialMatrix::new(vec![vec![1.0, 2.0]]).is_err());
        assert!(TrialMatrix::new(vec![vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(TrialMatrix::new(vec![vec![1.0, f64::NAN], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn t_table_values() {
        // two-sided 5% critical values from standard tables
        for (df, t) in [(1.0, 12.706), (5.0, 2.571), (14.0, 2.145), (30.0, 2.042)] {
            assert!((t_quantile(0.975, df).unwrap() - t).abs() < 1e-3, "df {df}");
        }
        assert!((t_quantile(0.5, 7.0).unwrap()).abs() < 1e-12);
        assert!((t_quantile(0.025, 14.0).unwrap() + 2.1448).abs() < 1e-3);
        assert!(t_quantile(1.0, 3.0).is_err());
    }

    #[test]
    fn f_tail_matches_t_squared() {
        // F(1, v) = t(v)^2
        let t = 2.1447866879169273;
        let p = f_survival(t * t, 1.0, 14.0);
        assert!((p - 0.05).abs() < 1e-9);
    }

    #[test]
    fn lsd_limit_and_errors() {
        assert_eq!(lsd_threshold(0.0, 8, 14, 0.05).unwrap(), 0.0);
        assert!(lsd_threshold(0.01, 8, 14, 0.0).is_err());
        assert!(lsd_threshold(0.01, 1, 14, 0.05).is_err());
    }

    #[test]
    fn report_layout() {
        let m = TrialMatrix::new(vec![vec![1.0, 2.0, 2.5], vec![3.0, 5.0, 4.0], vec![2.0, 2.5, 3.5]]).unwrap();
        let anova = within_subjects_anova(&m).unwrap();
        let lsd = pairwise_lsd(&m, 0.05).unwrap();
        let text = Report { title: "t", systems: &["A", "B", "C"], anova, lsd: &lsd }.to_string();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1].split_whitespace().collect::<Vec<_>>(), ["SV", "SS", "df", "MS", "F"]);
        assert!(lines[2].starts_with("System"));
        assert_eq!(lsd.len(), 3);
    }
}

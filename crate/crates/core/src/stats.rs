//! Empirical checks of simulated samples against the closed-form laws.

use crate::error::{Error, Result};
use crate::integrators::{Observable, PathEnsemble, RecordMode};
use crate::measures::DensitySpec;

/// Smallest sample accepted by [`ks_against`].
pub const MIN_KS_SAMPLES: usize = 100;
/// Floor on the KS threshold, absorbing the time-discretization bias.
pub const KS_BIAS_ALLOWANCE: f64 = 0.03;
/// Asymptotic 5% critical value of `sqrt(n) D`.
pub const KS_CRITICAL_5PCT: f64 = 1.36;
const MAX_BINS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Samples that fell inside `[edges[0], edges[last]]`.
    pub n_total: u64,
}

impl Histogram {
    /// Freedman–Diaconis bin width `2 IQR n^{-1/3}` over the sample range.
    pub fn freedman_diaconis(samples: &[f64]) -> Result<Self> {
        let sorted = sorted_finite(samples)?;
        let n = sorted.len();
        let (lo, hi) = (sorted[0], sorted[n - 1]);
        if lo == hi {
            return Self::with_edges(samples, vec![lo - 0.5, lo + 0.5]);
        }
        let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
        let bins = if iqr > 0.0 {
            let width = 2.0 * iqr / (n as f64).cbrt();
            ((hi - lo) / width).ceil() as usize
        } else {
            // Sturges
            (n as f64).log2().ceil() as usize + 1
        }
        .clamp(1, MAX_BINS);
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        edges[bins] = hi;
        Self::with_edges(samples, edges)
    }

    /// Counts with caller-supplied edges; bins are `[e_i, e_{i+1})` except the
    /// last, which is closed.
    pub fn with_edges(samples: &[f64], edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Usage(
                "histogram edges must be strictly increasing, at least two".into(),
            ));
        }
        let nb = edges.len() - 1;
        let mut counts = vec![0u64; nb];
        let (lo, hi) = (edges[0], edges[nb]);
        for &x in samples {
            if x.is_nan() {
                return Err(Error::Domain("histogram sample is NaN".into()));
            }
            if x < lo || x > hi {
                continue;
            }
            // first edge strictly greater than x, minus one
            let k = edges.partition_point(|&e| e <= x).min(nb) - 1;
            counts[k] += 1;
        }
        let n_total = counts.iter().sum();
        Ok(Self { edges, counts, n_total })
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Bin heights normalized to unit area.
    pub fn density(&self) -> Vec<f64> {
        let n = self.n_total.max(1) as f64;
        self.edges
            .windows(2)
            .zip(&self.counts)
            .map(|(w, &c)| c as f64 / (n * (w[1] - w[0])))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GofReport {
    pub n: usize,
    pub ks_statistic: f64,
    pub ks_threshold: f64,
    /// Informational; bins merged until every expected count is at least 5.
    pub chi2_statistic: f64,
    pub chi2_dof: usize,
    pub pass: bool,
}

fn sorted_finite(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Usage("empty sample".into()));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("sample contains NaN".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = h.floor() as usize;
    if i + 1 >= n {
        return sorted[n - 1];
    }
    sorted[i] + (h - i as f64) * (sorted[i + 1] - sorted[i])
}

pub fn median(samples: &[f64]) -> Result<f64> {
    Ok(quantile_sorted(&sorted_finite(samples)?, 0.5))
}

/// `sup |F_n - F|` over the sample points, given ascending samples and the
/// model CDF at each of them.
pub fn ks_statistic(sorted: &[f64], cdf: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &f) in cdf.iter().enumerate() {
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d = d.max(above).max(below);
    }
    d
}

pub fn ks_threshold(n: usize) -> f64 {
    (KS_CRITICAL_5PCT / (n as f64).sqrt()).max(KS_BIAS_ALLOWANCE)
}

/// One-sample KS test of `samples` against `spec`, plus an informational χ².
pub fn ks_against(samples: &[f64], spec: &DensitySpec) -> Result<GofReport> {
    let sorted = sorted_finite(samples)?;
    let n = sorted.len();
    if n < MIN_KS_SAMPLES {
        return Err(Error::Usage(format!(
            "ks_against needs at least {MIN_KS_SAMPLES} samples, got {n}"
        )));
    }
    let threshold = ks_threshold(n);
    let support = spec.support();
    if sorted[0] < support.lo || sorted[n - 1] > support.hi {
        return Ok(GofReport {
            n,
            ks_statistic: 1.0,
            ks_threshold: threshold,
            chi2_statistic: f64::INFINITY,
            chi2_dof: 0,
            pass: false,
        });
    }
    let cdf = spec.cdf_sorted(&sorted)?;
    let d = ks_statistic(&sorted, &cdf);
    let (chi2_statistic, chi2_dof) = chi2(&sorted, spec)?;
    Ok(GofReport {
        n,
        ks_statistic: d,
        ks_threshold: threshold,
        chi2_statistic,
        chi2_dof,
        pass: d <= threshold,
    })
}

/// Pearson χ² on Freedman–Diaconis bins with the outer bins extended to the
/// support ends, merged until expected counts reach 5.
fn chi2(sorted: &[f64], spec: &DensitySpec) -> Result<(f64, usize)> {
    let n = sorted.len() as f64;
    let hist = Histogram::freedman_diaconis(sorted)?;
    let inner = &hist.edges[1..hist.edges.len() - 1];
    let mut cdf = Vec::with_capacity(inner.len() + 2);
    cdf.push(0.0);
    cdf.extend(spec.cdf_sorted(inner)?);
    cdf.push(1.0);

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (k, &c) in hist.counts.iter().enumerate() {
        obs += c as f64;
        exp += n * (cdf[k + 1] - cdf[k]);
        if exp >= 5.0 {
            bins.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if obs > 0.0 || exp > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => bins.push((obs, exp)),
        }
    }
    let stat = bins
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e) * (o - e) / e } else { f64::INFINITY })
        .sum();
    Ok((stat, bins.len().saturating_sub(1)))
}

/// Two-sample KS distance `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = sorted_finite(a)?;
    let b = sorted_finite(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Fraction of paths whose radial value reached `a` or below on `[0, T]`.
pub fn hitting_fraction(ensemble: &PathEnsemble, a: f64) -> Result<f64> {
    if ensemble.record != RecordMode::Full {
        return Err(Error::Usage("hitting_fraction needs a full-record ensemble".into()));
    }
    if !(a > 0.0) {
        return Err(Error::Domain(format!("hitting level must be > 0, got {a}")));
    }
    let mut hits = 0usize;
    for i in 0..ensemble.n_paths() {
        for state in ensemble.states(i) {
            if ensemble.evaluate(state, Observable::S)? <= a {
                hits += 1;
                break;
            }
        }
    }
    Ok(hits as f64 / ensemble.n_paths() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    pub empirical: f64,
    pub theoretical: f64,
    /// `(empirical - theoretical) / standard_error`.
    pub z_score: f64,
}

pub fn moment_check(samples: &[f64], spec: &DensitySpec, k: u32) -> Result<MomentCheck> {
    let theoretical = spec.moment(k)?;
    if samples.len() < 2 {
        return Err(Error::Usage("moment_check needs at least two samples".into()));
    }
    let n = samples.len() as f64;
    let powers: Vec<f64> = samples.iter().map(|x| x.powi(k as i32)).collect();
    let empirical = powers.iter().sum::<f64>() / n;
    let var = powers.iter().map(|x| (x - empirical).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let diff = empirical - theoretical;
    let z_score = if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    Ok(MomentCheck {
        empirical,
        theoretical,
        z_score,
    })
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!("{} vs {} values", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::Parameter(format!("correlation needs at least 3 pairs, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Parameter("correlation inputs must be finite".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::UndefinedCorrelation("one of the inputs has zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Two-sample Kolmogorov–Smirnov statistic: the largest gap between the
/// empirical distribution functions.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Parameter("KS statistic needs two non-empty samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
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

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Aligned histograms of two samples on shared bin edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramPair {
    pub edges: Vec<f64>,
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

/// Freedman–Diaconis bins on the pooled sample (width 2·IQR·n^(−1/3)),
/// capped at 200 bins; a zero IQR falls back to the square-root rule.
pub fn aligned_histograms(a: &[f64], b: &[f64]) -> Result<HistogramPair> {
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    if pooled.is_empty() || pooled.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("histograms need finite, non-empty samples".into()));
    }
    pooled.sort_by(f64::total_cmp);
    let (lo, hi) = (pooled[0], pooled[pooled.len() - 1]);
    let n = pooled.len() as f64;
    let bins = if hi > lo {
        let iqr = quantile(&pooled, 0.75) - quantile(&pooled, 0.25);
        let count = if iqr > 0.0 {
            ((hi - lo) / (2.0 * iqr * n.powf(-1.0 / 3.0))).ceil()
        } else {
            n.sqrt().ceil()
        };
        (count as usize).clamp(1, 200)
    } else {
        1
    };
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi.max(lo + width) } else { lo + width * i as f64 }).collect();
    let count = |xs: &[f64]| {
        let mut c = vec![0usize; bins];
        for &x in xs {
            let i = (((x - lo) / width).floor() as usize).min(bins - 1);
            c[i] += 1;
        }
        c
    };
    Ok(HistogramPair {
        edges,
        first: count(a),
        second: count(b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_extremes() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_statistic(&a, &[4.0, 5.0]).unwrap(), 1.0);
    }

    #[test]
    fn ks_with_ties_matches_hand_value() {
        // F_a at 1,2,3 = 1/3, 2/3, 1 ; F_b at 1,2,3 = 0.5, 0.5, 1
        let d = ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 3.0]).unwrap();
        assert!((d - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn histograms_count_everything() {
        let a: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let b: Vec<f64> = (0..50).map(|i| 0.5 + i as f64 / 100.0).collect();
        let h = aligned_histograms(&a, &b).unwrap();
        assert_eq!(h.first.iter().sum::<usize>(), 100);
        assert_eq!(h.second.iter().sum::<usize>(), 50);
        assert_eq!(h.edges.len(), h.first.len() + 1);
        let constant = aligned_histograms(&[2.0; 5], &[2.0; 3]).unwrap();
        assert_eq!(constant.first, vec![5]);
    }
}

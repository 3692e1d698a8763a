use crate::error::{Error, Result};
use crate::model::Trace;

/// Baseline finals below this many mV are excluded from relative errors.
pub const MIN_BASELINE_MV: f64 = 0.1;

/// Signed per-segment relative error in percent, normalized by the baseline's
/// final value: `RE_i = (ml_i − base_i) / base_l · 100`. `None` when the
/// baseline final is below [`MIN_BASELINE_MV`].
pub fn relative_error(ml: &Trace, base: &Trace) -> Result<Option<Vec<f64>>> {
    if ml.len() != base.len() || ml.is_empty() {
        return Err(Error::LengthMismatch {
            id: base.transistor_id.clone(),
            detail: format!("prediction has {} segments, baseline {}", ml.len(), base.len()),
        });
    }
    let denom = base.last();
    if denom.abs() < MIN_BASELINE_MV {
        return Ok(None);
    }
    Ok(Some(ml.dvt.iter().zip(&base.dvt).map(|(m, b)| (m - b) / denom * 100.0).collect()))
}

/// Relative error of a final value alone, in percent.
pub fn final_relative_error(pred_mv: f64, base_mv: f64) -> Option<f64> {
    (base_mv.abs() >= MIN_BASELINE_MV).then(|| (pred_mv - base_mv) / base_mv * 100.0)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReSummary {
    /// Transistors contributing.
    pub n: usize,
    /// Transistors skipped for a near-zero baseline final.
    pub excluded: usize,
    pub mean_abs_final: f64,
    pub mean_signed_final: f64,
    /// Mean |RE_i| across transistors, per segment.
    pub mean_abs_per_segment: Vec<f64>,
}

impl ReSummary {
    /// Spearman correlation between segment index and mean |RE_i|.
    pub fn growth_correlation(&self) -> Result<f64> {
        let idx: Vec<f64> = (0..self.mean_abs_per_segment.len()).map(|i| i as f64).collect();
        spearman(&idx, &self.mean_abs_per_segment)
    }
}

pub fn summarize_re<'a>(pairs: impl IntoIterator<Item = (&'a Trace, &'a Trace)>) -> Result<ReSummary> {
    let mut s = ReSummary::default();
    for (ml, base) in pairs {
        match relative_error(ml, base)? {
            None => s.excluded += 1,
            Some(re) => {
                if s.mean_abs_per_segment.is_empty() {
                    s.mean_abs_per_segment = vec![0.0; re.len()];
                } else if s.mean_abs_per_segment.len() != re.len() {
                    return Err(Error::LengthMismatch {
                        id: base.transistor_id.clone(),
                        detail: "traces of different lengths in one summary".into(),
                    });
                }
                let last = *re.last().unwrap();
                s.mean_abs_final += last.abs();
                s.mean_signed_final += last;
                for (acc, r) in s.mean_abs_per_segment.iter_mut().zip(&re) {
                    *acc += r.abs();
                }
                s.n += 1;
            }
        }
    }
    if s.n > 0 {
        let n = s.n as f64;
        s.mean_abs_final /= n;
        s.mean_signed_final /= n;
        s.mean_abs_per_segment.iter_mut().for_each(|v| *v /= n);
    }
    Ok(s)
}

/// Coefficient of determination `1 − SS_res / SS_tot`.
pub fn r2_score(pred: &[f64], base: &[f64]) -> Result<f64> {
    if pred.len() != base.len() {
        return Err(Error::invalid(format!("{} predictions for {} baselines", pred.len(), base.len())));
    }
    if base.len() < 2 {
        return Err(Error::invalid("r² needs at least two points"));
    }
    let mean = base.iter().sum::<f64>() / base.len() as f64;
    let ss_tot: f64 = base.iter().map(|b| (b - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::invalid("r² undefined for a constant baseline"));
    }
    let ss_res: f64 = pred.iter().zip(base).map(|(p, b)| (p - b).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Rank correlation with average ranks for ties; 0 when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("spearman needs two equal-length series of at least 2 points"));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (vx * vy).sqrt())
}

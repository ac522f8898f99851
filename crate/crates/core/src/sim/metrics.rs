//! Settling time, overshoot and sup-norm distance.

use crate::error::{Error, Result};

/// Default settling band: ±1 % of the reference.
pub const SETTLING_BAND: f64 = 0.01;

/// First time after which `|y − r| ≤ band` holds for every later sample.
/// `None` if the last sample is outside the band.
pub fn settling_time(t: &[f64], y: &[f64], reference: f64, band: f64) -> Option<f64> {
    match y.iter().rposition(|v| (v - reference).abs() > band) {
        None => t.first().copied(),
        Some(i) if i + 1 == y.len() => None,
        Some(i) => Some(t[i + 1]),
    }
}

/// Settling time restricted to samples at or after `from`.
pub fn settling_time_after(t: &[f64], y: &[f64], reference: f64, band: f64, from: f64) -> Option<f64> {
    let s = t.iter().position(|x| *x >= from)?;
    settling_time(&t[s..], &y[s..], reference, band)
}

/// `max |y − r|`.
pub fn overshoot(y: &[f64], reference: f64) -> f64 {
    y.iter().fold(0.0, |m, v| m.max((v - reference).abs()))
}

fn interp(t: &[f64], y: &[f64], at: f64) -> f64 {
    let i = t.partition_point(|x| *x <= at);
    if i == 0 {
        return y[0];
    }
    if i >= t.len() {
        return y[t.len() - 1];
    }
    let (t0, t1) = (t[i - 1], t[i]);
    y[i - 1] + (y[i] - y[i - 1]) * (at - t0) / (t1 - t0)
}

/// `sup |a − b|` on the coarser of the two grids over their common span;
/// the finer series is linearly interpolated.
pub fn sup_distance(ta: &[f64], a: &[f64], tb: &[f64], b: &[f64]) -> Result<f64> {
    if ta.len() != a.len() || tb.len() != b.len() || ta.len() < 2 || tb.len() < 2 {
        return Err(Error::Dimension("series need matching lengths and at least two samples".into()));
    }
    let (tc, c, tf, f) = if ta.len() <= tb.len() { (ta, a, tb, b) } else { (tb, b, ta, a) };
    let lo = ta[0].max(tb[0]);
    let hi = ta[ta.len() - 1].min(tb[tb.len() - 1]);
    Ok(tc
        .iter()
        .zip(c)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .fold(0.0, |m, (t, v)| m.max((v - interp(tf, f, *t)).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settling_examples() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(settling_time(&t, &[5.0, 2.0, 1.0, 1.0], 1.0, 0.5), Some(2.0));
        assert_eq!(settling_time(&t, &[1.0; 4], 1.0, 0.5), Some(0.0));
        assert_eq!(settling_time(&t, &[1.0, 1.0, 1.0, 3.0], 1.0, 0.5), None);
    }

    #[test]
    fn identical_series_have_zero_distance() {
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = t.iter().map(|x| x.sin()).collect();
        assert_eq!(sup_distance(&t, &y, &t, &y).unwrap(), 0.0);
    }
}

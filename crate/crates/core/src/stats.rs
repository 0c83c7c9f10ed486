//! Small descriptive-statistics helpers shared across modules.

/// Mean that is exact when every sample is equal: accumulates deviations
/// from the first sample.
pub(crate) fn shifted_mean(values: impl Iterator<Item = f64> + Clone) -> Option<f64> {
    let mut it = values.clone();
    let first = it.next()?;
    let mut n = 1usize;
    let mut acc = 0.0;
    for v in it {
        acc += v - first;
        n += 1;
    }
    Some(first + acc / n as f64)
}

/// Population mean and standard deviation (two-pass).
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let Some(mean) = shifted_mean(values.iter().copied()) else {
        return (0.0, 0.0);
    };
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}

/// Percentile of already sorted data with linear interpolation between
/// closest ranks (`rank = p/100 · (n − 1)`).
pub(crate) fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let rank = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

pub(crate) fn percentile(values: &[f64], p: f64) -> f64 {
    percentile_in_place(&mut values.to_vec(), p)
}

/// Same value as [`percentile_sorted`] on the sorted data, found by
/// selection instead of a full sort. Reorders `values`.
pub(crate) fn percentile_in_place(values: &mut [f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of empty data");
    let rank = (p / 100.0).clamp(0.0, 1.0) * (values.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    let (_, &mut a, above) = values.select_nth_unstable_by(lo, f64::total_cmp);
    if frac == 0.0 {
        return a;
    }
    let b = above.iter().copied().min_by(f64::total_cmp).unwrap_or(a);
    a + (b - a) * frac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_mean_is_exact_for_constants() {
        let v = [0.1; 7];
        assert_eq!(shifted_mean(v.iter().copied()), Some(0.1));
        assert_eq!(shifted_mean(std::iter::empty::<f64>()), None);
    }

    #[test]
    fn percentile_interpolates() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile_sorted(&s, 0.0), 1.0);
        assert_eq!(percentile_sorted(&s, 100.0), 4.0);
        assert!((percentile_sorted(&s, 50.0) - 2.5).abs() < 1e-15);
        assert!((percentile(&[4.0, 1.0, 3.0, 2.0], 25.0) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn selection_agrees_with_sorting() {
        let v: Vec<f64> = (0..1001).map(|i| ((i * 7919) % 1013) as f64 * 0.37).collect();
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        for p in [0.0, 1.0, 12.5, 50.0, 99.0, 99.9, 100.0] {
            assert_eq!(percentile(&v, p).to_bits(), percentile_sorted(&sorted, p).to_bits(), "p = {p}");
        }
    }

    #[test]
    fn mean_std_population() {
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m, 5.0);
        assert_eq!(s, 2.0);
    }
}

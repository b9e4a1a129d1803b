use super::{EegRecording, Epoch, SignalError};

fn as_samples(seconds: f64, sample_rate: f64, what: &'static str) -> Result<usize, SignalError> {
    let exact = seconds * sample_rate;
    let rounded = exact.round();
    if (exact - rounded).abs() > 1e-6 {
        return Err(SignalError::NonIntegralWindow { what, seconds, sample_rate });
    }
    Ok(rounded as usize)
}

/// Number of windows produced for `n` samples; trailing partial windows are dropped.
pub fn epoch_count(n: usize, window: usize, step: usize) -> usize {
    if n < window || step == 0 {
        0
    } else {
        (n - window) / step + 1
    }
}

/// Cuts the recording into windows of `window_s` seconds starting every
/// `window_s - overlap_s` seconds.
pub fn epoch_windows(rec: &EegRecording, window_s: f64, overlap_s: f64) -> Result<Vec<Epoch>, SignalError> {
    if !(window_s > 0.0 && overlap_s >= 0.0 && overlap_s < window_s) {
        return Err(SignalError::InvalidWindow { window_s, overlap_s });
    }
    let fs = rec.sample_rate();
    let window = as_samples(window_s, fs, "window")?;
    let step = as_samples(window_s - overlap_s, fs, "step")?;
    if window == 0 || step == 0 {
        return Err(SignalError::InvalidWindow { window_s, overlap_s });
    }
    let n = rec.n_samples();
    if n < window {
        return Err(SignalError::RecordingTooShort { needed: window, found: n });
    }
    let data = rec.data();
    Ok((0..epoch_count(n, window, step))
        .map(|i| {
            let start = i * step;
            Epoch {
                data: data.slice(ndarray::s![.., start..start + window]).to_owned(),
                sample_rate: fs,
                start_time: start as f64 / fs,
                label: None,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn rec(seconds: f64) -> EegRecording {
        let n = (seconds * 256.0) as usize;
        EegRecording::from_data(256.0, Array2::from_shape_fn((2, n), |(c, i)| (c * n + i) as f64)).unwrap()
    }

    #[test]
    fn twelve_seconds_gives_seven_epochs() {
        let epochs = epoch_windows(&rec(12.0), 2.0, 0.5).unwrap();
        let starts: Vec<f64> = epochs.iter().map(|e| e.start_time).collect();
        assert_eq!(starts, vec![0.0, 1.5, 3.0, 4.5, 6.0, 7.5, 9.0]);
        assert!(epochs.iter().all(|e| e.data.dim() == (2, 512)));
        assert_eq!(epochs[1].data[[0, 0]], 384.0);
    }

    #[test]
    fn exact_fit_gives_one_epoch() {
        assert_eq!(epoch_windows(&rec(2.0), 2.0, 0.5).unwrap().len(), 1);
    }

    #[test]
    fn invalid_windows() {
        assert!(matches!(epoch_windows(&rec(4.0), 2.0, 2.0), Err(SignalError::InvalidWindow { .. })));
        assert!(matches!(epoch_windows(&rec(1.0), 2.0, 0.5), Err(SignalError::RecordingTooShort { .. })));
        assert!(matches!(epoch_windows(&rec(4.0), 1.0 / 300.0, 0.0), Err(SignalError::NonIntegralWindow { .. })));
    }

    proptest! {
        #[test]
        fn count_matches_closed_form(n in 1usize..4000, window in 1usize..600, step_frac in 1usize..600) {
            let step = step_frac.min(window);
            prop_assume!(n >= window);
            let data = Array2::<f64>::zeros((1, n));
            let r = EegRecording::from_data(256.0, data).unwrap();
            let window_s = window as f64 / 256.0;
            let overlap_s = (window - step) as f64 / 256.0;
            let epochs = epoch_windows(&r, window_s, overlap_s).unwrap();
            let t = n as f64 / 256.0;
            let expected = ((t - window_s) / (window_s - overlap_s) + 1e-9).floor() as usize + 1;
            prop_assert_eq!(epochs.len(), expected);
        }
    }
}

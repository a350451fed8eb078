//! Classifier inputs: raw RSSI vectors and trailing-window moments.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::RssiFrame;
use crate::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// One frame's classifier input.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureVector {
    /// Superframe index of the frame the features end at.
    pub t: u64,
    pub values: Vec<f64>,
}

/// Window length for short-term moments. `L = 1` means raw RSSI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentConfig {
    window: usize,
}

impl MomentConfig {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidParameter("moment window L must be >= 1".into()));
        }
        Ok(MomentConfig { window })
    }

    pub fn window(self) -> usize {
        self.window
    }
}

/// RSSI values verbatim, one vector per frame.
pub fn raw_features(frames: &[RssiFrame]) -> Vec<FeatureVector> {
    frames
        .iter()
        .map(|f| FeatureVector { t: f.t, values: f.rssi.iter().map(|d| d.as_f64()).collect() })
        .collect()
}

/// Short-term mean and unbiased variance per node over the trailing
/// `min(L, t)` samples, laid out `[mean_0, var_0, mean_1, var_1, ...]`.
///
/// During warm-up the window shrinks to the samples seen so far; a window of
/// one sample has variance 0. Missing-link values (-100 dBm) are ordinary
/// samples. Running sums are kept in integer tenths of a dBm, so the result
/// does not drift over long traces.
pub fn moment_features(frames: &[RssiFrame], cfg: MomentConfig) -> Vec<FeatureVector> {
    let Some(first) = frames.first() else {
        return Vec::new();
    };
    let n = first.rssi.len();
    let mut window: VecDeque<&RssiFrame> = VecDeque::with_capacity(cfg.window);
    let mut sum = vec![0i64; n];
    let mut sum_sq = vec![0i64; n];
    let mut out = Vec::with_capacity(frames.len());

    for frame in frames {
        if window.len() == cfg.window {
            let old = window.pop_front().expect("window is full");
            for (k, d) in old.rssi.iter().enumerate() {
                let v = i64::from(d.tenths());
                sum[k] -= v;
                sum_sq[k] -= v * v;
            }
        }
        for (k, d) in frame.rssi.iter().enumerate() {
            let v = i64::from(d.tenths());
            sum[k] += v;
            sum_sq[k] += v * v;
        }
        window.push_back(frame);

        let len = window.len() as i64;
        let mut values = Vec::with_capacity(2 * n);
        for k in 0..n {
            let mean = sum[k] as f64 / (10 * len) as f64;
            let var = if len > 1 {
                // sum of squared deviations times len, in tenths squared
                let scatter = len * sum_sq[k] - sum[k] * sum[k];
                scatter as f64 / (100 * len * (len - 1)) as f64
            } else {
                0.0
            };
            values.push(mean);
            values.push(var);
        }
        out.push(FeatureVector { t: frame.t, values });
    }
    out
}

/// Features for a window length; `L = 1` yields raw RSSI (width N), anything
/// longer yields moments (width 2N).
pub fn extract(frames: &[RssiFrame], window: usize) -> Result<Vec<FeatureVector>> {
    let cfg = MomentConfig::new(window)?;
    Ok(if cfg.window() == 1 { raw_features(frames) } else { moment_features(frames, cfg) })
}

/// Channel coherence time in seconds, bounding the Doppler spread by the
/// maximum Doppler shift `v * f_c / c`.
pub fn coherence_time(speed: f64, carrier: f64) -> Result<f64> {
    if !(speed > 0.0) {
        return Err(Error::NonPositive { name: "speed", value: speed });
    }
    if !(carrier > 0.0) {
        return Err(Error::NonPositive { name: "carrier", value: carrier });
    }
    let doppler = speed * carrier / SPEED_OF_LIGHT;
    Ok(0.423 / doppler)
}

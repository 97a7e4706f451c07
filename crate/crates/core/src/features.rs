//! Time-domain sEMG features and per-segment feature vectors.
//!
//! Variances use the `n - 1` denominator throughout. Skewness and kurtosis take
//! the central moment as a plain `1/n` mean and divide by powers of that
//! unbiased standard deviation.

use serde::{Deserialize, Serialize};

use crate::signal::{GestureLabel, Segment, CHANNELS};
use crate::{Error, Result, Scalar};

/// Features computed on each channel, in output order. `Ar` expands to `p` columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Iav,
    Mav,
    StdDev,
    Rms,
    WaveformLength,
    Ar,
    Skewness,
    Mobility,
    Kurtosis,
}

impl FeatureKind {
    pub const ORDER: [FeatureKind; 9] = [
        FeatureKind::Iav,
        FeatureKind::Mav,
        FeatureKind::StdDev,
        FeatureKind::Rms,
        FeatureKind::WaveformLength,
        FeatureKind::Ar,
        FeatureKind::Skewness,
        FeatureKind::Mobility,
        FeatureKind::Kurtosis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Iav => "IAV",
            FeatureKind::Mav => "MAV",
            FeatureKind::StdDev => "SD",
            FeatureKind::Rms => "RMS",
            FeatureKind::WaveformLength => "WL",
            FeatureKind::Ar => "AR",
            FeatureKind::Skewness => "Skew",
            FeatureKind::Mobility => "Mobility",
            FeatureKind::Kurtosis => "Kurtosis",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub ar_order: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { ar_order: 4 }
    }
}

impl FeatureConfig {
    pub fn new(ar_order: usize) -> Result<Self> {
        if ar_order == 0 {
            return Err(Error::argument("AR order must be at least 1"));
        }
        Ok(Self { ar_order })
    }

    pub fn per_channel(&self) -> usize {
        8 + self.ar_order
    }

    /// Total feature dimension `d`.
    pub fn dimension(&self) -> usize {
        CHANNELS * self.per_channel()
    }

    /// Human-readable column names, e.g. `ch2_AR3`.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dimension());
        for ch in 1..=CHANNELS {
            for kind in FeatureKind::ORDER {
                if kind == FeatureKind::Ar {
                    names.extend((1..=self.ar_order).map(|k| format!("ch{ch}_AR{k}")));
                } else {
                    names.push(format!("ch{ch}_{}", kind.name()));
                }
            }
        }
        names
    }
}

/// Classifier input: one segment's concatenated channel features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<T = f64> {
    pub values: Vec<T>,
    pub label: GestureLabel,
    pub subject_id: u32,
    pub repetition_index: u32,
    pub synthetic: bool,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn key(&self) -> (u32, crate::Gesture, u32) {
        (self.subject_id, self.label.gesture(), self.repetition_index)
    }
}

fn require_len<T>(x: &[T], min: usize, what: &str) -> Result<()> {
    if x.len() < min {
        Err(Error::degenerate(format!(
            "{what} needs at least {min} samples, got {}",
            x.len()
        )))
    } else {
        Ok(())
    }
}

pub(crate) fn mean<T: Scalar>(x: &[T]) -> T {
    x.iter().copied().sum::<T>() / T::count(x.len())
}

pub(crate) fn unbiased_variance<T: Scalar>(x: &[T]) -> Result<T> {
    require_len(x, 2, "variance")?;
    let mu = mean(x);
    let ss: T = x.iter().map(|&v| (v - mu) * (v - mu)).sum();
    Ok(ss / T::count(x.len() - 1))
}

/// Integrated absolute value: `Σ|x_i|`.
pub fn iav<T: Scalar>(x: &[T]) -> Result<T> {
    require_len(x, 1, "IAV")?;
    Ok(x.iter().map(|v| v.abs()).sum())
}

/// Mean absolute value: `iav(x) / n`.
pub fn mav<T: Scalar>(x: &[T]) -> Result<T> {
    Ok(iav(x)? / T::count(x.len()))
}

pub fn std_dev<T: Scalar>(x: &[T]) -> Result<T> {
    Ok(unbiased_variance(x)?.sqrt())
}

pub fn rms<T: Scalar>(x: &[T]) -> Result<T> {
    require_len(x, 1, "RMS")?;
    let ss: T = x.iter().map(|&v| v * v).sum();
    Ok((ss / T::count(x.len())).sqrt())
}

/// Sum of absolute first differences.
pub fn waveform_length<T: Scalar>(x: &[T]) -> Result<T> {
    require_len(x, 2, "waveform length")?;
    Ok(x.windows(2).map(|w| (w[1] - w[0]).abs()).sum())
}

/// Result of a Levinson-Durbin solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ArFit<T> {
    /// `a_1..a_p` with prediction `x̂[n] = Σ a_k x[n-k]`.
    pub coefficients: Vec<T>,
    /// Final forward prediction-error power.
    pub prediction_error: T,
    pub reflection: Vec<T>,
}

/// Solves the Yule-Walker equations for autocorrelations `r[0..=p]`.
pub fn levinson_durbin<T: Scalar>(r: &[T], p: usize) -> Result<ArFit<T>> {
    if p == 0 {
        return Err(Error::argument("AR order must be at least 1"));
    }
    if r.len() < p + 1 {
        return Err(Error::argument(format!(
            "need {} autocorrelation lags, got {}",
            p + 1,
            r.len()
        )));
    }
    if !(r[0] > T::zero()) {
        return Err(Error::degenerate("zero signal power (r0 = 0)"));
    }
    let mut a: Vec<T> = Vec::with_capacity(p);
    let mut reflection = Vec::with_capacity(p);
    let mut err = r[0];
    for m in 1..=p {
        let acc = (1..m).fold(r[m], |acc, j| acc - a[j - 1] * r[m - j]);
        let k = acc / err;
        let prev = a.clone();
        for j in 1..m {
            a[j - 1] = prev[j - 1] - k * prev[m - j - 1];
        }
        a.push(k);
        reflection.push(k);
        err *= T::one() - k * k;
        if !(err > T::zero()) && m < p {
            return Err(Error::degenerate(
                "prediction error vanished before reaching the requested order",
            ));
        }
    }
    Ok(ArFit {
        coefficients: a,
        prediction_error: err,
        reflection,
    })
}

/// Biased autocorrelation of the mean-removed sequence, lags `0..=max_lag`.
pub fn autocorrelation<T: Scalar>(x: &[T], max_lag: usize) -> Vec<T> {
    let mu = mean(x);
    let centered: Vec<T> = x.iter().map(|&v| v - mu).collect();
    let n = T::count(x.len());
    (0..=max_lag)
        .map(|lag| {
            centered[lag..]
                .iter()
                .zip(&centered)
                .map(|(&u, &v)| u * v)
                .sum::<T>()
                / n
        })
        .collect()
}

/// Yule-Walker AR fit of order `p`.
pub fn ar_fit<T: Scalar>(x: &[T], p: usize) -> Result<ArFit<T>> {
    if p == 0 {
        return Err(Error::argument("AR order must be at least 1"));
    }
    if p >= x.len() {
        return Err(Error::argument(format!(
            "AR order {p} needs more than {p} samples, got {}",
            x.len()
        )));
    }
    levinson_durbin(&autocorrelation(x, p), p)
}

pub fn ar_coefficients<T: Scalar>(x: &[T], p: usize) -> Result<Vec<T>> {
    Ok(ar_fit(x, p)?.coefficients)
}

fn standardized_moment<T: Scalar>(x: &[T], power: i32, what: &str) -> Result<T> {
    let sd = std_dev(x)?;
    if !(sd > T::zero()) {
        return Err(Error::degenerate(format!("{what} undefined for zero deviation")));
    }
    let mu = mean(x);
    let m = x.iter().map(|&v| (v - mu).powi(power)).sum::<T>() / T::count(x.len());
    Ok(m / sd.powi(power))
}

pub fn skewness<T: Scalar>(x: &[T]) -> Result<T> {
    standardized_moment(x, 3, "skewness")
}

pub fn kurtosis<T: Scalar>(x: &[T]) -> Result<T> {
    standardized_moment(x, 4, "kurtosis")
}

/// Variance of the first difference divided by the variance of the signal.
///
/// No square root is taken.
pub fn mobility<T: Scalar>(x: &[T]) -> Result<T> {
    require_len(x, 3, "mobility")?;
    let var = unbiased_variance(x)?;
    if !(var > T::zero()) {
        return Err(Error::degenerate("mobility undefined for zero variance"));
    }
    let diff: Vec<T> = x.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(unbiased_variance(&diff)? / var)
}

fn channel_features<T: Scalar>(x: &[T], config: &FeatureConfig, out: &mut Vec<T>) -> Result<()> {
    let tag = |kind: FeatureKind| move |e: Error| match e {
        Error::DegenerateInput(m) => Error::DegenerateInput(format!("{}: {m}", kind.name())),
        Error::Argument(m) => Error::Argument(format!("{}: {m}", kind.name())),
        other => other,
    };
    out.push(iav(x).map_err(tag(FeatureKind::Iav))?);
    out.push(mav(x).map_err(tag(FeatureKind::Mav))?);
    out.push(std_dev(x).map_err(tag(FeatureKind::StdDev))?);
    out.push(rms(x).map_err(tag(FeatureKind::Rms))?);
    out.push(waveform_length(x).map_err(tag(FeatureKind::WaveformLength))?);
    // moments first so a flat channel reports its zero deviation
    let skew = skewness(x).map_err(tag(FeatureKind::Skewness))?;
    let mob = mobility(x).map_err(tag(FeatureKind::Mobility))?;
    let kurt = kurtosis(x).map_err(tag(FeatureKind::Kurtosis))?;
    out.extend(ar_coefficients(x, config.ar_order).map_err(tag(FeatureKind::Ar))?);
    out.extend([skew, mob, kurt]);
    Ok(())
}

/// Computes the feature vector of one segment, channel by channel.
pub fn extract<T: Scalar>(segment: &Segment<T>, config: &FeatureConfig) -> Result<FeatureVector<T>> {
    let mut values = Vec::with_capacity(config.dimension());
    for (c, window) in segment.channel_windows().iter().enumerate() {
        channel_features(window, config, &mut values).map_err(|e| match e {
            Error::DegenerateInput(m) => Error::DegenerateInput(format!("channel ch{}: {m}", c + 1)),
            Error::Argument(m) => Error::Argument(format!("channel ch{}: {m}", c + 1)),
            other => other,
        })?;
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::degenerate(format!("feature column {i} is not finite")));
    }
    Ok(FeatureVector {
        values,
        label: segment.label(),
        subject_id: segment.subject_id(),
        repetition_index: segment.repetition_index(),
        synthetic: false,
    })
}

/// Extracts every segment in parallel; output order follows the input.
pub fn extract_all<T: Scalar>(
    segments: &[Segment<T>],
    config: &FeatureConfig,
) -> Result<Vec<FeatureVector<T>>> {
    use rayon::prelude::*;
    segments
        .par_iter()
        .map(|s| {
            extract(s, config).map_err(|e| match e {
                Error::DegenerateInput(m) => Error::DegenerateInput(format!(
                    "subject {} {} repetition {}: {m}",
                    s.subject_id(),
                    s.label().gesture(),
                    s.repetition_index()
                )),
                other => other,
            })
        })
        .collect()
}

//! Uniform per-feature quantization grid and one-hot encoding.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::features::FeatureVector;
use crate::signal::Gesture;
use crate::{Error, Result, Scalar};

pub const DEFAULT_LEVELS: usize = 20;

/// Column-wise min/max grid with `levels` equal-width bins per feature.
///
/// A column whose range is empty uses a bin width of one: every value lands
/// in level 0 and reconstructs to `min + 0.5`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerModel<T = f64> {
    pub levels: usize,
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Scalar> QuantizerModel<T> {
    /// Fits the grid to the column extrema of `features`.
    pub fn fit(features: &[FeatureVector<T>], levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::argument("quantizer needs at least 2 levels"));
        }
        let first = features
            .first()
            .ok_or_else(|| Error::argument("cannot fit a quantizer on an empty table"))?;
        let d = first.dimension();
        let mut min = first.values.clone();
        let mut max = first.values.clone();
        for fv in &features[1..] {
            if fv.dimension() != d {
                return Err(Error::data("feature vectors have mixed dimensions"));
            }
            for j in 0..d {
                min[j] = min[j].min(fv.values[j]);
                max[j] = max[j].max(fv.values[j]);
            }
        }
        Ok(Self { levels, min, max })
    }

    pub fn dimension(&self) -> usize {
        self.min.len()
    }

    /// Bin width of column `j`.
    pub fn bin_width(&self, j: usize) -> T {
        let span = self.max[j] - self.min[j];
        if span > T::zero() {
            span / T::count(self.levels)
        } else {
            T::one()
        }
    }

    pub fn quantize(&self, value: T, feature_index: usize) -> usize {
        assert!(feature_index < self.dimension(), "feature index out of range");
        let w = self.bin_width(feature_index);
        let q = ((value - self.min[feature_index]) / w).floor();
        if !(q > T::zero()) {
            0
        } else {
            q.to_usize().unwrap_or(usize::MAX).min(self.levels - 1)
        }
    }

    /// Bin center of `level` in column `feature_index`.
    pub fn dequantize(&self, level: usize, feature_index: usize) -> Result<T> {
        if level >= self.levels {
            return Err(Error::argument(format!(
                "level {level} outside [0, {})",
                self.levels
            )));
        }
        if feature_index >= self.dimension() {
            return Err(Error::argument("feature index out of range"));
        }
        let w = self.bin_width(feature_index);
        Ok(self.min[feature_index] + (T::count(level) + T::lit(0.5)) * w)
    }

    /// One series per (subject, gesture, feature), ordered by repetition.
    pub fn to_series(&self, features: &[FeatureVector<T>]) -> Result<Vec<QuantizedSeries>> {
        if features.is_empty() {
            return Err(Error::argument("no feature vectors to convert"));
        }
        let mut groups: BTreeMap<(u32, Gesture), BTreeMap<u32, &FeatureVector<T>>> =
            BTreeMap::new();
        for fv in features {
            if fv.dimension() != self.dimension() {
                return Err(Error::data("feature dimension does not match the quantizer"));
            }
            let reps = groups.entry((fv.subject_id, fv.label.gesture())).or_default();
            if reps.insert(fv.repetition_index, fv).is_some() {
                return Err(Error::data(format!(
                    "duplicate row: subject {} {} repetition {}",
                    fv.subject_id,
                    fv.label.gesture(),
                    fv.repetition_index
                )));
            }
        }
        let mut out = Vec::with_capacity(groups.len() * self.dimension());
        for ((subject_id, gesture), reps) in groups {
            for j in 0..self.dimension() {
                out.push(QuantizedSeries {
                    feature_index: j,
                    subject_id,
                    gesture,
                    levels: reps.values().map(|fv| self.quantize(fv.values[j], j)).collect(),
                });
            }
        }
        Ok(out)
    }
}

/// Per-repetition level sequence of one feature for one (subject, gesture).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedSeries {
    pub feature_index: usize,
    pub subject_id: u32,
    pub gesture: Gesture,
    pub levels: Vec<usize>,
}

pub fn one_hot<T: Scalar>(level: usize, levels: usize) -> Result<Vec<T>> {
    if level >= levels {
        return Err(Error::argument(format!("level {level} outside [0, {levels})")));
    }
    let mut v = vec![T::zero(); levels];
    v[level] = T::one();
    Ok(v)
}

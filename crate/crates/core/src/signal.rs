//! Gesture vocabulary, raw signal containers and the seeded sEMG generator.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Number of electrode channels in every recording.
pub const CHANNELS: usize = 3;
/// Default acquisition rate.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 1100.0;
pub const DEFAULT_BIT_DEPTH: u32 = 16;
/// Duration of one gesture window in seconds.
pub const WINDOW_SECONDS: f64 = 3.0;
/// Minimum number of samples accepted for an ingested window.
pub const MIN_INGEST_LEN: usize = 8;

/// The ten signs of the vocabulary, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gesture {
    One,
    Two,
    Three,
    Four,
    Five,
    Sorry,
    Bold,
    Confident,
    Key,
    Win,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GestureType {
    Static,
    Dynamic,
}

impl GestureType {
    pub const ALL: [GestureType; 2] = [GestureType::Static, GestureType::Dynamic];

    /// Class index used by the binary routing network.
    pub fn index(self) -> usize {
        match self {
            GestureType::Static => 0,
            GestureType::Dynamic => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// The five gestures of this type, in canonical order.
    pub fn gestures(self) -> &'static [Gesture] {
        match self {
            GestureType::Static => &Gesture::ALL[..5],
            GestureType::Dynamic => &Gesture::ALL[5..],
        }
    }
}

impl Gesture {
    pub const COUNT: usize = 10;
    pub const ALL: [Gesture; 10] = [
        Gesture::One,
        Gesture::Two,
        Gesture::Three,
        Gesture::Four,
        Gesture::Five,
        Gesture::Sorry,
        Gesture::Bold,
        Gesture::Confident,
        Gesture::Key,
        Gesture::Win,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn gesture_type(self) -> GestureType {
        if self.index() < 5 {
            GestureType::Static
        } else {
            GestureType::Dynamic
        }
    }

    /// Position of this gesture inside its type's five-gesture set.
    pub fn index_within_type(self) -> usize {
        self.index() % 5
    }

    pub fn name(self) -> &'static str {
        match self {
            Gesture::One => "One",
            Gesture::Two => "Two",
            Gesture::Three => "Three",
            Gesture::Four => "Four",
            Gesture::Five => "Five",
            Gesture::Sorry => "Sorry",
            Gesture::Bold => "Bold",
            Gesture::Confident => "Confident",
            Gesture::Key => "Key",
            Gesture::Win => "Win",
        }
    }
}

impl fmt::Display for Gesture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Gesture {
    type Err = Error;

    /// Case-sensitive match on the canonical names.
    fn from_str(s: &str) -> Result<Self> {
        Gesture::ALL
            .iter()
            .copied()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::argument(format!("unknown gesture {s:?}")))
    }
}

/// A gesture together with its static/dynamic type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GestureLabel {
    gesture: Gesture,
}

impl GestureLabel {
    pub fn new(gesture: Gesture) -> Self {
        Self { gesture }
    }

    pub fn gesture(self) -> Gesture {
        self.gesture
    }

    pub fn gesture_type(self) -> GestureType {
        self.gesture.gesture_type()
    }
}

impl From<Gesture> for GestureLabel {
    fn from(gesture: Gesture) -> Self {
        Self::new(gesture)
    }
}

/// Continuous multichannel recording of one subject performing one gesture.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording<T = f64> {
    subject_id: u32,
    gesture: Gesture,
    samples: [Vec<T>; CHANNELS],
    sample_rate_hz: f64,
    bit_depth: u32,
}

impl<T: Scalar> Recording<T> {
    pub fn new(
        subject_id: u32,
        gesture: Gesture,
        samples: [Vec<T>; CHANNELS],
        sample_rate_hz: f64,
        bit_depth: u32,
    ) -> Result<Self> {
        if !(sample_rate_hz > 0.0) {
            return Err(Error::argument("sample rate must be positive"));
        }
        check_channels(&samples, 2)?;
        Ok(Self {
            subject_id,
            gesture,
            samples,
            sample_rate_hz,
            bit_depth,
        })
    }

    pub fn subject_id(&self) -> u32 {
        self.subject_id
    }

    pub fn gesture(&self) -> Gesture {
        self.gesture
    }

    pub fn channels(&self) -> &[Vec<T>; CHANNELS] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn bit_depth(&self) -> u32 {
        self.bit_depth
    }

    pub fn len(&self) -> usize {
        self.samples[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Slices consecutive fixed-length repetitions out of the recording.
    pub fn split_repetitions(&self, window_len: usize, count: usize) -> Result<Vec<Segment<T>>> {
        if window_len < 2 || window_len * count > self.len() {
            return Err(Error::argument(format!(
                "cannot cut {count} windows of {window_len} samples from {} samples",
                self.len()
            )));
        }
        (0..count)
            .map(|rep| {
                let range = rep * window_len..(rep + 1) * window_len;
                let windows = self.samples.clone().map(|ch| ch[range.clone()].to_vec());
                Segment::new(self.gesture.into(), self.subject_id, rep as u32, windows)
            })
            .collect()
    }
}

fn check_channels<T>(channels: &[Vec<T>; CHANNELS], min_len: usize) -> Result<()> {
    let n = channels[0].len();
    if channels.iter().any(|c| c.len() != n) {
        return Err(Error::argument("channels have unequal sample counts"));
    }
    if n < min_len {
        return Err(Error::argument(format!(
            "window has {n} samples, need at least {min_len}"
        )));
    }
    Ok(())
}

/// One repetition of one gesture: a window per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<T = f64> {
    label: GestureLabel,
    subject_id: u32,
    repetition_index: u32,
    channel_windows: [Vec<T>; CHANNELS],
}

impl<T: Scalar> Segment<T> {
    pub fn new(
        label: GestureLabel,
        subject_id: u32,
        repetition_index: u32,
        channel_windows: [Vec<T>; CHANNELS],
    ) -> Result<Self> {
        check_channels(&channel_windows, 2)?;
        Ok(Self {
            label,
            subject_id,
            repetition_index,
            channel_windows,
        })
    }

    pub fn label(&self) -> GestureLabel {
        self.label
    }

    pub fn subject_id(&self) -> u32 {
        self.subject_id
    }

    pub fn repetition_index(&self) -> u32 {
        self.repetition_index
    }

    pub fn channel_windows(&self) -> &[Vec<T>; CHANNELS] {
        &self.channel_windows
    }

    pub fn window_len(&self) -> usize {
        self.channel_windows[0].len()
    }

    /// Converts the sample values to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Segment<U> {
        Segment {
            label: self.label,
            subject_id: self.subject_id,
            repetition_index: self.repetition_index,
            channel_windows: self
                .channel_windows
                .clone()
                .map(|ch| ch.into_iter().map(|v| U::lit(v.as_f64())).collect()),
        }
    }

    pub(crate) fn sort_key(&self) -> (u32, Gesture, u32) {
        (self.subject_id, self.label.gesture(), self.repetition_index)
    }
}

/// Sample count and per-channel mean / unbiased variance of a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentStatistics<T> {
    pub n: usize,
    pub mean: [T; CHANNELS],
    pub variance: [T; CHANNELS],
}

pub fn segment_statistics<T: Scalar>(segment: &Segment<T>) -> Result<SegmentStatistics<T>> {
    let n = segment.window_len();
    if n < 2 {
        return Err(Error::degenerate("segment statistics need at least 2 samples"));
    }
    let mut mean = [T::zero(); CHANNELS];
    let mut variance = [T::zero(); CHANNELS];
    for (c, w) in segment.channel_windows.iter().enumerate() {
        mean[c] = crate::features::mean(w);
        variance[c] = crate::features::unbiased_variance(w)?;
    }
    Ok(SegmentStatistics { n, mean, variance })
}

/// Number of samples in one generated window at `sample_rate_hz`.
pub fn window_samples(sample_rate_hz: f64) -> usize {
    (WINDOW_SECONDS * sample_rate_hz).round() as usize
}

/// Class-level parameters of the generator for one (gesture, channel) pair.
#[derive(Debug, Clone, Copy)]
struct ChannelProfile {
    amplitude: f64,
    pole_radius: f64,
    pole_angle: f64,
}

fn channel_profile(gesture: Gesture, channel: usize) -> ChannelProfile {
    let g = gesture.index();
    ChannelProfile {
        amplitude: 0.6 + 0.08 * ((3 * g + 5 * channel) % 7) as f64,
        pole_radius: 0.55 + 0.04 * ((2 * g + 3 * channel) % 10) as f64,
        pole_angle: PI * (0.1 + 0.05 * g as f64 + 0.03 * channel as f64),
    }
}

/// Fraction of the window covered by the burst of a dynamic gesture.
fn burst_width(gesture: Gesture) -> f64 {
    0.45 + 0.1 * gesture.index_within_type() as f64
}

const STATIC_RIPPLE: f64 = 0.05;
const RIPPLE_HZ: f64 = 1.5;
const BURST_FLOOR: f64 = 0.05;
const BURN_IN: usize = 256;

/// Stationary standard deviation of `x[n] = a1 x[n-1] + a2 x[n-2] + w[n]`, unit-variance `w`.
fn ar2_stationary_std(a1: f64, a2: f64) -> f64 {
    let var = (1.0 - a2) / ((1.0 + a2) * ((1.0 - a2) * (1.0 - a2) - a1 * a1));
    var.sqrt()
}

fn envelope(gesture: Gesture, n: usize, sample_rate_hz: f64, phase: f64, shift: f64) -> Vec<f64> {
    match gesture.gesture_type() {
        GestureType::Static => (0..n)
            .map(|k| {
                let t = k as f64 / sample_rate_hz;
                1.0 + STATIC_RIPPLE * (2.0 * PI * RIPPLE_HZ * t + phase).sin()
            })
            .collect(),
        GestureType::Dynamic => {
            let width = burst_width(gesture) * n as f64;
            let start = (n as f64 - width) * (0.5 + shift);
            (0..n)
                .map(|k| {
                    let u = (k as f64 - start) / width;
                    if (0.0..=1.0).contains(&u) {
                        BURST_FLOOR + (1.0 - BURST_FLOOR) * 0.5 * (1.0 - (2.0 * PI * u).cos())
                    } else {
                        BURST_FLOOR
                    }
                })
                .collect()
        }
    }
}

fn colored_noise(rng: &mut ChaCha8Rng, n: usize, radius: f64, angle: f64) -> Vec<f64> {
    let a1 = 2.0 * radius * angle.cos();
    let a2 = -radius * radius;
    let norm = ar2_stationary_std(a1, a2);
    let (mut x1, mut x2) = (0.0, 0.0);
    let mut out = Vec::with_capacity(n);
    for k in 0..n + BURN_IN {
        let w: f64 = rng.sample(StandardNormal);
        let x = a1 * x1 + a2 * x2 + w;
        x2 = x1;
        x1 = x;
        if k >= BURN_IN {
            out.push(x / norm);
        }
    }
    out
}

/// Generates `n_subjects × 10 × reps_per_gesture` segments of synthetic sEMG.
///
/// Each (gesture, channel) pair drives unit-variance white noise through its
/// own second-order resonator and multiplies the result by an envelope:
/// sustained with a small ripple for static gestures, a Hann burst for dynamic
/// ones. Subjects differ by a global gain and a fixed pole-angle offset;
/// repetitions differ by amplitude and angle jitter. Output is a pure function
/// of the arguments.
pub fn generate_synthetic_recordings(
    n_subjects: usize,
    reps_per_gesture: usize,
    seed: u64,
) -> Result<Vec<Segment<f64>>> {
    if n_subjects == 0 || reps_per_gesture == 0 {
        return Err(Error::argument(
            "subject and repetition counts must be positive",
        ));
    }
    let n = window_samples(DEFAULT_SAMPLE_RATE_HZ);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut segments = Vec::with_capacity(n_subjects * Gesture::COUNT * reps_per_gesture);
    for subject in 0..n_subjects {
        let gain = rng.random_range(0.8..=1.2);
        let angle_jitter: Vec<[f64; CHANNELS]> = (0..Gesture::COUNT)
            .map(|_| std::array::from_fn(|_| rng.random_range(-0.03..=0.03) * PI))
            .collect();
        for gesture in Gesture::ALL {
            for rep in 0..reps_per_gesture {
                let phase = rng.random_range(0.0..2.0 * PI);
                let shift = rng.random_range(-0.1..=0.1);
                let env = envelope(gesture, n, DEFAULT_SAMPLE_RATE_HZ, phase, shift);
                let windows: [Vec<f64>; CHANNELS] = std::array::from_fn(|c| {
                    let profile = channel_profile(gesture, c);
                    let amp = gain * profile.amplitude * (1.0 + rng.random_range(-0.4..=0.4));
                    let angle = profile.pole_angle
                        + angle_jitter[gesture.index()][c]
                        + rng.random_range(-0.1..=0.1) * PI;
                    colored_noise(&mut rng, n, profile.pole_radius, angle)
                        .into_iter()
                        .zip(&env)
                        .map(|(x, e)| amp * e * x)
                        .collect()
                });
                segments.push(Segment::new(
                    gesture.into(),
                    subject as u32,
                    rep as u32,
                    windows,
                )?);
            }
        }
    }
    Ok(segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_partition_is_five_and_five() {
        let statics = Gesture::ALL
            .iter()
            .filter(|g| g.gesture_type() == GestureType::Static)
            .count();
        assert_eq!(statics, 5);
        assert_eq!(Gesture::COUNT - statics, 5);
        for t in GestureType::ALL {
            assert!(t.gestures().iter().all(|g| g.gesture_type() == t));
        }
    }

    #[test]
    fn gesture_names_parse_case_sensitively() {
        for g in Gesture::ALL {
            assert_eq!(g.name().parse::<Gesture>().unwrap(), g);
        }
        assert!("one".parse::<Gesture>().is_err());
    }

    #[test]
    fn generator_counts() {
        assert_eq!(generate_synthetic_recordings(1, 1, 42).unwrap().len(), 10);
        let segs = generate_synthetic_recordings(2, 3, 7).unwrap();
        assert_eq!(segs.len(), 60);
        assert!(segs.iter().all(|s| s.window_len() == 3300));
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_synthetic_recordings(1, 2, 9).unwrap();
        let b = generate_synthetic_recordings(1, 2, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_recordings(1, 2, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generator_rejects_zero_counts() {
        assert!(matches!(
            generate_synthetic_recordings(0, 1, 1),
            Err(Error::Argument(_))
        ));
        assert!(generate_synthetic_recordings(1, 0, 1).is_err());
    }

    #[test]
    fn stationary_std_matches_simulation() {
        let (r, th): (f64, f64) = (0.8, 0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = colored_noise(&mut rng, 200_000, r, th);
        let var = crate::features::unbiased_variance(&x).unwrap();
        assert!((var - 1.0).abs() < 0.03, "var = {var}");
    }

    #[test]
    fn statistics_examples() {
        let seg = Segment::new(
            Gesture::One.into(),
            0,
            0,
            [vec![1.0, 2.0, 3.0], vec![5.0, 5.0, 5.0], vec![0.0, 0.0, 0.0]],
        )
        .unwrap();
        let s = segment_statistics(&seg).unwrap();
        assert_eq!(s.n, 3);
        assert_eq!(s.mean, [2.0, 5.0, 0.0]);
        assert_eq!(s.variance, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn segments_need_equal_channels() {
        let r = Segment::new(Gesture::One.into(), 0, 0, [vec![1.0, 2.0], vec![1.0], vec![1.0, 2.0]]);
        assert!(r.is_err());
    }

    #[test]
    fn recording_splits_into_repetitions() {
        let ch: Vec<f64> = (0..40).map(|v| v as f64).collect();
        let rec = Recording::new(1, Gesture::Key, [ch.clone(), ch.clone(), ch], 1100.0, 16).unwrap();
        let segs = rec.split_repetitions(10, 4).unwrap();
        assert_eq!(segs.len(), 4);
        assert_eq!(segs[2].channel_windows()[0][0], 20.0);
        assert!(rec.split_repetitions(10, 5).is_err());
    }
}

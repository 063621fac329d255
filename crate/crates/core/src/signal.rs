//! Time-domain stereo buffers.

use crate::error::{check_len, Result};
use crate::scalar::Real;
use crate::stft::{analyze_signal, FrameParams, StereoSpectrum};

#[derive(Debug, Clone, PartialEq)]
pub struct StereoSignal<T> {
    pub left: Vec<T>,
    pub right: Vec<T>,
    pub sample_rate: u32,
}

impl<T: Real> StereoSignal<T> {
    pub fn new(left: Vec<T>, right: Vec<T>, sample_rate: u32) -> Result<Self> {
        check_len("stereo signal channels", left.len(), right.len())?;
        Ok(Self { left, right, sample_rate })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self { left: vec![T::zero(); len], right: vec![T::zero(); len], sample_rate }
    }

    /// Same signal on both channels.
    pub fn from_mono(mono: &[T], sample_rate: u32) -> Self {
        Self { left: mono.to_vec(), right: mono.to_vec(), sample_rate }
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn channel(&self, m: usize) -> &[T] {
        if m == 0 { &self.left } else { &self.right }
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            left: self.left.iter().map(|v| *v * factor).collect(),
            right: self.right.iter().map(|v| *v * factor).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Samples `start..start + len`, zero-padded past the end.
    pub fn slice_padded(&self, start: usize, len: usize) -> Self {
        let take = |ch: &[T]| (start..start + len).map(|i| ch.get(i).copied().unwrap_or_else(T::zero)).collect();
        Self { left: take(&self.left), right: take(&self.right), sample_rate: self.sample_rate }
    }

    /// Mean power over both channels.
    pub fn power(&self) -> T {
        if self.is_empty() {
            return T::zero();
        }
        let sum = self
            .left
            .iter()
            .chain(&self.right)
            .fold(T::zero(), |acc, v| acc + *v * *v);
        sum / T::from_usize_lossy(2 * self.len())
    }

    /// STFT of both channels with the streaming framing of
    /// [`analyze_signal`](crate::stft::analyze_signal).
    pub fn analyze(&self, params: &FrameParams) -> Result<Vec<StereoSpectrum<T>>> {
        let l = analyze_signal(&self.left, params)?;
        let r = analyze_signal(&self.right, params)?;
        l.into_iter().zip(r).map(|(a, b)| StereoSpectrum::new(a, b)).collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.left
            .iter()
            .zip(&other.left)
            .chain(self.right.iter().zip(&other.right))
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()))
    }
}

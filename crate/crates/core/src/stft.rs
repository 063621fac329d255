//! Frame-based analysis/synthesis between stereo sample streams and the
//! time-frequency domain.
//!
//! Analysis and synthesis both use a square-root periodic Hann window, so at
//! 50 % overlap the product window sums to one and overlap-add reconstructs
//! the input delayed by `window_len - hop` samples.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::scalar::Real;

/// Framing of a stream: sample rate, hop, window and transform length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameParams {
    pub sample_rate: u32,
    pub hop: usize,
    pub window_len: usize,
    pub fft_len: usize,
}

impl Default for FrameParams {
    fn default() -> Self {
        Self::for_sample_rate(16_000)
    }
}

impl FrameParams {
    /// 10 ms hop and 20 ms window at the given rate.
    pub fn for_sample_rate(sample_rate: u32) -> Self {
        let hop = (sample_rate as usize) / 100;
        Self {
            sample_rate,
            hop,
            window_len: 2 * hop,
            fft_len: 2 * hop,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if self.hop == 0 || self.window_len == 0 {
            return Err(Error::Config("hop and window length must be positive".into()));
        }
        if !self.window_len.is_multiple_of(self.hop) {
            return Err(Error::Config(format!(
                "hop {} does not divide window length {}",
                self.hop, self.window_len
            )));
        }
        if self.fft_len < self.window_len {
            return Err(Error::Config(format!(
                "fft length {} shorter than window length {}",
                self.fft_len, self.window_len
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Analysis/synthesis delay in samples.
    pub fn latency_samples(&self) -> usize {
        self.window_len - self.hop
    }

    pub fn hop_ms(&self) -> f64 {
        1000.0 * self.hop as f64 / self.sample_rate as f64
    }

    pub fn bin_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate as f64 / self.fft_len as f64
    }
}

/// One channel's spectrum for one frame (`fft_len / 2 + 1` bins).
#[derive(Debug, Clone, PartialEq)]
pub struct MonoSpectrum<T> {
    pub bins: Vec<Complex<T>>,
    pub frame_index: u64,
}

impl<T: Real> MonoSpectrum<T> {
    pub fn zeros(n_bins: usize, frame_index: u64) -> Self {
        Self {
            bins: vec![Complex::new(T::zero(), T::zero()); n_bins],
            frame_index,
        }
    }

    pub fn from_bins(bins: Vec<Complex<T>>, frame_index: u64) -> Self {
        Self { bins, frame_index }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Sum of squared magnitudes over all bins.
    pub fn energy(&self) -> T {
        self.bins.iter().fold(T::zero(), |acc, c| acc + c.norm_sqr())
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            bins: self.bins.iter().map(|c| c * factor).collect(),
            frame_index: self.frame_index,
        }
    }
}

/// Left/right spectra of the same frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoSpectrum<T> {
    pub left: MonoSpectrum<T>,
    pub right: MonoSpectrum<T>,
}

impl<T: Real> StereoSpectrum<T> {
    pub fn new(left: MonoSpectrum<T>, right: MonoSpectrum<T>) -> Result<Self> {
        check_len("stereo spectrum bins", left.len(), right.len())?;
        if left.frame_index != right.frame_index {
            return Err(Error::OutOfOrder {
                expected: left.frame_index,
                got: right.frame_index,
            });
        }
        Ok(Self { left, right })
    }

    pub fn zeros(n_bins: usize, frame_index: u64) -> Self {
        Self {
            left: MonoSpectrum::zeros(n_bins, frame_index),
            right: MonoSpectrum::zeros(n_bins, frame_index),
        }
    }

    pub fn n_bins(&self) -> usize {
        self.left.len()
    }

    pub fn frame_index(&self) -> u64 {
        self.left.frame_index
    }

    pub fn set_frame_index(&mut self, frame_index: u64) {
        self.left.frame_index = frame_index;
        self.right.frame_index = frame_index;
    }

    /// The channel pair `[x_1, x_2]` at one bin.
    #[inline]
    pub fn bin(&self, k: usize) -> [Complex<T>; 2] {
        [self.left.bins[k], self.right.bins[k]]
    }

    #[inline]
    pub fn set_bin(&mut self, k: usize, v: [Complex<T>; 2]) {
        self.left.bins[k] = v[0];
        self.right.bins[k] = v[1];
    }

    pub fn channel(&self, m: usize) -> &MonoSpectrum<T> {
        match m {
            0 => &self.left,
            _ => &self.right,
        }
    }

    pub fn channel_mut(&mut self, m: usize) -> &mut MonoSpectrum<T> {
        match m {
            0 => &mut self.left,
            _ => &mut self.right,
        }
    }

    /// Arithmetic mean of the two channels.
    pub fn downmix(&self) -> MonoSpectrum<T> {
        let half = T::lit(0.5);
        MonoSpectrum {
            bins: self
                .left
                .bins
                .iter()
                .zip(&self.right.bins)
                .map(|(l, r)| (l + r) * half)
                .collect(),
            frame_index: self.frame_index(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        check_len("stereo spectrum add", self.n_bins(), other.n_bins())?;
        for m in 0..2 {
            for (a, b) in self.channel_mut(m).bins.iter_mut().zip(&other.channel(m).bins) {
                *a += b;
            }
        }
        Ok(())
    }
}

/// Square-root periodic Hann window.
pub fn sqrt_hann<T: Real>(len: usize) -> Vec<T> {
    let n = T::from_usize_lossy(len);
    (0..len)
        .map(|i| {
            let phase = T::TAU() * T::from_usize_lossy(i) / n;
            (T::lit(0.5) - T::lit(0.5) * phase.cos()).sqrt()
        })
        .collect()
}

/// Windowed forward/inverse transform pair for one [`FrameParams`].
///
/// Holds its FFT plans and scratch space, so per-frame calls do not allocate
/// when the `_into` variants are used.
pub struct Stft<T: Real> {
    params: FrameParams,
    window: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    buf: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
    synth_scale: T,
}

impl<T: Real> Stft<T> {
    pub fn new(params: FrameParams) -> Result<Self> {
        params.validate()?;
        let window = sqrt_hann::<T>(params.window_len);
        let norm = cola_constant(&window, params.hop)?;
        let mut planner = FftPlanner::<T>::new();
        let forward = planner.plan_fft_forward(params.fft_len);
        let inverse = planner.plan_fft_inverse(params.fft_len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Self {
            params,
            window,
            forward,
            inverse,
            buf: vec![Complex::default(); params.fft_len],
            scratch: vec![Complex::default(); scratch_len],
            synth_scale: T::one() / (norm * T::from_usize_lossy(params.fft_len)),
        })
    }

    pub fn params(&self) -> &FrameParams {
        &self.params
    }

    pub fn window(&self) -> &[T] {
        &self.window
    }

    pub fn analyze(&mut self, frame: &[T], frame_index: u64) -> Result<MonoSpectrum<T>> {
        let mut out = MonoSpectrum::zeros(self.params.n_bins(), frame_index);
        self.analyze_into(frame, &mut out)?;
        Ok(out)
    }

    pub fn analyze_into(&mut self, frame: &[T], out: &mut MonoSpectrum<T>) -> Result<()> {
        check_len("analysis frame", self.params.window_len, frame.len())?;
        for (slot, (x, w)) in self.buf.iter_mut().zip(frame.iter().zip(&self.window)) {
            *slot = Complex::new(*x * *w, T::zero());
        }
        for slot in &mut self.buf[self.params.window_len..] {
            *slot = Complex::default();
        }
        self.forward
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        let n_bins = self.params.n_bins();
        out.bins.resize(n_bins, Complex::default());
        out.bins.copy_from_slice(&self.buf[..n_bins]);
        Ok(())
    }

    /// Inverse transform one spectrum and apply the (normalised) synthesis
    /// window; `out` receives `window_len` samples ready for overlap-add.
    pub fn synthesize_frame_into(&mut self, spec: &MonoSpectrum<T>, out: &mut [T]) -> Result<()> {
        let n = self.params.fft_len;
        let n_bins = self.params.n_bins();
        check_len("synthesis spectrum", n_bins, spec.len())?;
        check_len("synthesis frame", self.params.window_len, out.len())?;
        self.buf[..n_bins].copy_from_slice(&spec.bins);
        for k in n_bins..n {
            self.buf[k] = spec.bins[n - k].conj();
        }
        // a real signal has purely real DC (and Nyquist) bins
        self.buf[0].im = T::zero();
        if n.is_multiple_of(2) {
            self.buf[n / 2].im = T::zero();
        }
        self.inverse
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        for ((o, c), w) in out.iter_mut().zip(&self.buf).zip(&self.window) {
            *o = c.re * *w * self.synth_scale;
        }
        Ok(())
    }
}

/// Constant overlap-add value of `window²` at the given hop.
fn cola_constant<T: Real>(window: &[T], hop: usize) -> Result<T> {
    let sums: Vec<T> = (0..hop)
        .map(|p| {
            window
                .iter()
                .skip(p)
                .step_by(hop)
                .fold(T::zero(), |acc, w| acc + *w * *w)
        })
        .collect();
    let first = sums[0];
    let tol = T::lit(1e-6) * first.abs().max(T::epsilon());
    if first <= T::zero() || sums.iter().any(|s| (*s - first).abs() > tol) {
        return Err(Error::Config(format!(
            "window of length {} is not constant-overlap-add at hop {hop}",
            window.len()
        )));
    }
    Ok(first)
}

/// Streaming analysis: feed `hop` samples at a time, receive one spectrum.
///
/// The internal window starts zero-filled, so frame 0 holds the first hop of
/// input in its last `hop` samples.
pub struct StreamAnalyzer<T: Real> {
    stft: Stft<T>,
    history: Vec<T>,
    next_frame: u64,
}

impl<T: Real> StreamAnalyzer<T> {
    pub fn new(params: FrameParams) -> Result<Self> {
        Ok(Self {
            stft: Stft::new(params)?,
            history: vec![T::zero(); params.window_len],
            next_frame: 0,
        })
    }

    pub fn push_into(&mut self, hop_samples: &[T], out: &mut MonoSpectrum<T>) -> Result<()> {
        let hop = self.stft.params.hop;
        check_len("analysis hop", hop, hop_samples.len())?;
        self.history.copy_within(hop.., 0);
        let tail = self.history.len() - hop;
        self.history[tail..].copy_from_slice(hop_samples);
        out.frame_index = self.next_frame;
        self.next_frame += 1;
        let Self { stft, history, .. } = self;
        stft.analyze_into(history, out)
    }

    pub fn push(&mut self, hop_samples: &[T]) -> Result<MonoSpectrum<T>> {
        let mut out = MonoSpectrum::zeros(self.stft.params.n_bins(), 0);
        self.push_into(hop_samples, &mut out)?;
        Ok(out)
    }
}

/// Streaming overlap-add synthesis: one spectrum in, `hop` samples out.
pub struct OverlapAdd<T: Real> {
    stft: Stft<T>,
    acc: Vec<T>,
    frame: Vec<T>,
}

impl<T: Real> OverlapAdd<T> {
    pub fn new(params: FrameParams) -> Result<Self> {
        Ok(Self {
            stft: Stft::new(params)?,
            acc: vec![T::zero(); params.window_len],
            frame: vec![T::zero(); params.window_len],
        })
    }

    pub fn push_into(&mut self, spec: &MonoSpectrum<T>, out: &mut [T]) -> Result<()> {
        let hop = self.stft.params.hop;
        check_len("synthesis hop", hop, out.len())?;
        self.stft.synthesize_frame_into(spec, &mut self.frame)?;
        for (a, f) in self.acc.iter_mut().zip(&self.frame) {
            *a += *f;
        }
        out.copy_from_slice(&self.acc[..hop]);
        self.acc.copy_within(hop.., 0);
        let tail = self.acc.len() - hop;
        for a in &mut self.acc[tail..] {
            *a = T::zero();
        }
        Ok(())
    }
}

/// Analyse a single `window_len` frame.
pub fn analyze<T: Real>(frame: &[T], params: &FrameParams) -> Result<MonoSpectrum<T>> {
    Stft::new(*params)?.analyze(frame, 0)
}

/// Number of frames needed so the synthesised output covers the whole input
/// plus the analysis/synthesis latency.
pub fn frames_for_len(n_samples: usize, params: &FrameParams) -> usize {
    (n_samples + params.latency_samples()).div_ceil(params.hop)
}

/// Stream a whole signal through [`StreamAnalyzer`], zero-padding the tail.
pub fn analyze_signal<T: Real>(samples: &[T], params: &FrameParams) -> Result<Vec<MonoSpectrum<T>>> {
    let mut analyzer = StreamAnalyzer::new(*params)?;
    let n_frames = frames_for_len(samples.len(), params);
    let mut hop_buf = vec![T::zero(); params.hop];
    let mut out = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        fill_hop(samples, f * params.hop, &mut hop_buf);
        out.push(analyzer.push(&hop_buf)?);
    }
    Ok(out)
}

/// Overlap-add a spectrum sequence. Output sample `n` reconstructs input
/// sample `n - latency_samples()`.
pub fn synthesize<T: Real>(spectra: &[MonoSpectrum<T>], params: &FrameParams) -> Result<Vec<T>> {
    let mut ola = OverlapAdd::new(*params)?;
    let mut out = vec![T::zero(); spectra.len() * params.hop];
    for (spec, chunk) in spectra.iter().zip(out.chunks_exact_mut(params.hop)) {
        ola.push_into(spec, chunk)?;
    }
    Ok(out)
}

/// Copy `dst.len()` samples starting at `start`, zero beyond the end.
pub(crate) fn fill_hop<T: Real>(samples: &[T], start: usize, dst: &mut [T]) {
    for (i, d) in dst.iter_mut().enumerate() {
        *d = samples.get(start + i).copied().unwrap_or_else(T::zero);
    }
}

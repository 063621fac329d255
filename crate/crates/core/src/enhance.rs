//! Monaural gain estimators and the common-gain operator.
//!
//! An [`Enhancer`] consumes one mono spectrum per frame and returns band
//! gains in `[0, 1]`. Implementations here are an oracle Wiener gain (needs
//! the clean reference), a classical spectral-subtraction estimator and a
//! unit-gain passthrough. [`Delayed`] adds a fixed look-ahead so any of them
//! can stand in for a model with future context.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::erb::{band_energies_into, BandGains, ErbFilterbank};
use crate::error::{check_len, Error, Result};
use crate::scalar::Real;
use crate::stft::{MonoSpectrum, StereoSpectrum};

/// Division guard for energy ratios.
pub const ENERGY_EPS: f64 = 1e-12;

/// One frame of enhancer input.
#[derive(Debug, Clone, Copy)]
pub struct EnhancerFrame<'a, T> {
    pub noisy: &'a MonoSpectrum<T>,
    /// Clean counterpart of `noisy`, only available in simulation.
    pub reference: Option<&'a MonoSpectrum<T>>,
}

impl<'a, T> EnhancerFrame<'a, T> {
    pub fn new(noisy: &'a MonoSpectrum<T>) -> Self {
        Self { noisy, reference: None }
    }

    pub fn with_reference(noisy: &'a MonoSpectrum<T>, reference: Option<&'a MonoSpectrum<T>>) -> Self {
        Self { noisy, reference }
    }
}

/// Per-frame band-gain estimator bound to a single stream.
pub trait Enhancer<T: Real>: Send {
    fn name(&self) -> &'static str;

    /// Frames of future input needed before gains for a frame are emitted.
    fn lookahead(&self) -> usize {
        0
    }

    /// Feed frame `l`; returns the gains for frame `l - lookahead()`, or
    /// `None` while the look-ahead buffer is still filling.
    fn process(&mut self, frame: EnhancerFrame<'_, T>) -> Result<Option<BandGains<T>>>;
}

/// Built-in enhancer selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnhancerKind {
    Oracle,
    Specsub,
    Passthrough,
}

impl EnhancerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnhancerKind::Oracle => "oracle",
            EnhancerKind::Specsub => "specsub",
            EnhancerKind::Passthrough => "passthrough",
        }
    }

    pub fn needs_reference(&self) -> bool {
        matches!(self, EnhancerKind::Oracle)
    }
}

impl std::str::FromStr for EnhancerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "specsub" => Ok(Self::Specsub),
            "passthrough" => Ok(Self::Passthrough),
            other => Err(Error::Config(format!("unknown enhancer '{other}'"))),
        }
    }
}

impl std::fmt::Display for EnhancerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Spectral-subtraction tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpecSubParams {
    /// Over-subtraction factor β.
    pub oversubtraction: f64,
    pub gain_floor: f64,
    /// Recursive smoothing of band energies before minimum tracking.
    pub smoothing: f64,
    /// Minimum-statistics search window in frames (1.5 s at 10 ms).
    pub window_frames: usize,
    pub subwindows: usize,
    /// Noise estimate = bias × windowed minimum of the smoothed energy.
    pub bias: f64,
    /// Frames averaged to seed the noise estimate.
    pub init_frames: usize,
}

impl Default for SpecSubParams {
    fn default() -> Self {
        Self {
            oversubtraction: 1.5,
            gain_floor: 0.05,
            smoothing: 0.9,
            window_frames: 150,
            subwindows: 10,
            bias: 1.5,
            init_frames: 10,
        }
    }
}

/// `g[b] = clamp(E_clean[b] / max(E_noisy[b], ε), 0, 1)`.
pub fn oracle_wiener<T: Real>(
    spec: &MonoSpectrum<T>,
    clean_ref: &MonoSpectrum<T>,
    bank: &ErbFilterbank<T>,
) -> Result<BandGains<T>> {
    let mut noisy = vec![T::zero(); bank.n_bands()];
    let mut clean = vec![T::zero(); bank.n_bands()];
    oracle_gains(spec, clean_ref, bank, &mut noisy, &mut clean)
}

fn oracle_gains<T: Real>(
    spec: &MonoSpectrum<T>,
    clean_ref: &MonoSpectrum<T>,
    bank: &ErbFilterbank<T>,
    noisy: &mut [T],
    clean: &mut [T],
) -> Result<BandGains<T>> {
    if spec.frame_index != clean_ref.frame_index {
        return Err(Error::OutOfOrder {
            expected: spec.frame_index,
            got: clean_ref.frame_index,
        });
    }
    check_len("oracle: reference bins", spec.len(), clean_ref.len())?;
    band_energies_into(spec, bank, noisy)?;
    band_energies_into(clean_ref, bank, clean)?;
    let eps = T::lit(ENERGY_EPS);
    Ok(BandGains::clamped(
        clean.iter().zip(noisy.iter()).map(|(c, n)| *c / n.max(eps)).collect(),
    ))
}

/// Oracle Wiener enhancer; every frame must carry a clean reference.
pub struct OracleWiener<T: Real> {
    bank: Arc<ErbFilterbank<T>>,
    noisy: Vec<T>,
    clean: Vec<T>,
}

impl<T: Real> OracleWiener<T> {
    pub fn new(bank: Arc<ErbFilterbank<T>>) -> Self {
        let n = bank.n_bands();
        Self { bank, noisy: vec![T::zero(); n], clean: vec![T::zero(); n] }
    }
}

impl<T: Real> Enhancer<T> for OracleWiener<T> {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn process(&mut self, frame: EnhancerFrame<'_, T>) -> Result<Option<BandGains<T>>> {
        let reference = frame.reference.ok_or(Error::MissingReference)?;
        oracle_gains(frame.noisy, reference, &self.bank, &mut self.noisy, &mut self.clean).map(Some)
    }
}

/// Unit gains on every band.
pub fn passthrough_enhancer<T: Real>(bank: &ErbFilterbank<T>) -> BandGains<T> {
    BandGains::ones(bank.n_bands())
}

pub struct Passthrough {
    n_bands: usize,
}

impl Passthrough {
    pub fn new(n_bands: usize) -> Self {
        Self { n_bands }
    }
}

impl<T: Real> Enhancer<T> for Passthrough {
    fn name(&self) -> &'static str {
        "passthrough"
    }

    fn process(&mut self, _frame: EnhancerFrame<'_, T>) -> Result<Option<BandGains<T>>> {
        Ok(Some(BandGains::ones(self.n_bands)))
    }
}

/// Per-band noise energy tracked by smoothed minimum statistics.
#[derive(Debug, Clone)]
pub struct NoiseTrackerState<T> {
    noise: Vec<T>,
    smoothed: Vec<T>,
    current_min: Vec<T>,
    /// Minima of completed sub-windows, oldest first.
    past_mins: VecDeque<Vec<T>>,
    frames_in_subwindow: usize,
    frames_seen: usize,
}

impl<T: Real> NoiseTrackerState<T> {
    pub fn new(n_bands: usize) -> Self {
        Self {
            noise: vec![T::zero(); n_bands],
            smoothed: vec![T::zero(); n_bands],
            current_min: vec![T::infinity(); n_bands],
            past_mins: VecDeque::new(),
            frames_in_subwindow: 0,
            frames_seen: 0,
        }
    }

    /// Current per-band noise energy estimate.
    pub fn noise(&self) -> &[T] {
        &self.noise
    }

    pub fn frames_seen(&self) -> usize {
        self.frames_seen
    }

    fn update(&mut self, energies: &[T], p: &SpecSubParams) {
        let n = T::from_usize_lossy(self.frames_seen + 1);
        if self.frames_seen < p.init_frames.max(1) {
            // running mean seeds both the estimate and the smoother
            for ((nz, s), e) in self.noise.iter_mut().zip(&mut self.smoothed).zip(energies) {
                *nz += (*e - *nz) / n;
                *s = *nz;
            }
        } else {
            let lambda = T::lit(p.smoothing);
            for (s, e) in self.smoothed.iter_mut().zip(energies) {
                *s = lambda * *s + (T::one() - lambda) * *e;
            }
            for (m, s) in self.current_min.iter_mut().zip(&self.smoothed) {
                *m = m.min(*s);
            }
            self.frames_in_subwindow += 1;
            let sub_len = (p.window_frames / p.subwindows.max(1)).max(1);
            if self.frames_in_subwindow >= sub_len {
                let done = std::mem::replace(&mut self.current_min, vec![T::infinity(); energies.len()]);
                self.past_mins.push_back(done);
                while self.past_mins.len() >= p.subwindows.max(1) {
                    self.past_mins.pop_front();
                }
                self.frames_in_subwindow = 0;
            }
            let bias = T::lit(p.bias);
            for (b, nz) in self.noise.iter_mut().enumerate() {
                let window_min = self
                    .past_mins
                    .iter()
                    .map(|m| m[b])
                    .fold(self.current_min[b].min(self.smoothed[b]), T::min);
                *nz = bias * window_min;
            }
        }
        self.frames_seen += 1;
    }
}

/// The subtraction gain rule for one band.
#[inline]
pub fn subtraction_gain<T: Real>(energy: T, noise: T, p: &SpecSubParams) -> T {
    let floor = T::lit(p.gain_floor);
    let beta = T::lit(p.oversubtraction);
    let g = (energy - beta * noise).max(floor * energy) / energy.max(T::lit(ENERGY_EPS));
    g.max(floor).min(T::one())
}

/// Update `state` with one frame and return the subtraction gains.
pub fn spectral_subtraction<T: Real>(
    spec: &MonoSpectrum<T>,
    state: &mut NoiseTrackerState<T>,
    bank: &ErbFilterbank<T>,
    params: &SpecSubParams,
) -> Result<BandGains<T>> {
    let mut energies = vec![T::zero(); bank.n_bands()];
    band_energies_into(spec, bank, &mut energies)?;
    check_len("spectral subtraction: noise state", bank.n_bands(), state.noise.len())?;
    state.update(&energies, params);
    Ok(BandGains::clamped(
        energies
            .iter()
            .zip(&state.noise)
            .map(|(e, n)| subtraction_gain(*e, *n, params))
            .collect(),
    ))
}

pub struct SpectralSubtraction<T: Real> {
    bank: Arc<ErbFilterbank<T>>,
    state: NoiseTrackerState<T>,
    params: SpecSubParams,
}

impl<T: Real> SpectralSubtraction<T> {
    pub fn new(bank: Arc<ErbFilterbank<T>>, params: SpecSubParams) -> Self {
        let state = NoiseTrackerState::new(bank.n_bands());
        Self { bank, state, params }
    }

    pub fn state(&self) -> &NoiseTrackerState<T> {
        &self.state
    }
}

impl<T: Real> Enhancer<T> for SpectralSubtraction<T> {
    fn name(&self) -> &'static str {
        "specsub"
    }

    fn process(&mut self, frame: EnhancerFrame<'_, T>) -> Result<Option<BandGains<T>>> {
        spectral_subtraction(frame.noisy, &mut self.state, &self.bank, &self.params).map(Some)
    }
}

/// Delay line in front of an enhancer: frame `l` is handed to the inner
/// estimator once frame `l + frames` has arrived.
pub struct Delayed<T: Real> {
    inner: Box<dyn Enhancer<T>>,
    frames: usize,
    queue: VecDeque<(MonoSpectrum<T>, Option<MonoSpectrum<T>>)>,
}

impl<T: Real> Delayed<T> {
    pub fn new(inner: Box<dyn Enhancer<T>>, frames: usize) -> Self {
        Self { inner, frames, queue: VecDeque::with_capacity(frames + 1) }
    }
}

impl<T: Real> Enhancer<T> for Delayed<T> {
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    fn lookahead(&self) -> usize {
        self.frames + self.inner.lookahead()
    }

    fn process(&mut self, frame: EnhancerFrame<'_, T>) -> Result<Option<BandGains<T>>> {
        if self.frames == 0 {
            return self.inner.process(frame);
        }
        self.queue.push_back((frame.noisy.clone(), frame.reference.cloned()));
        if self.queue.len() <= self.frames {
            return Ok(None);
        }
        let (noisy, reference) = self.queue.pop_front().expect("queue longer than delay");
        self.inner.process(EnhancerFrame::with_reference(&noisy, reference.as_ref()))
    }
}

/// Instantiate a built-in enhancer with `lookahead` frames of delay.
pub fn build_enhancer<T: Real>(
    kind: EnhancerKind,
    bank: Arc<ErbFilterbank<T>>,
    specsub: SpecSubParams,
    lookahead: usize,
) -> Box<dyn Enhancer<T>> {
    let inner: Box<dyn Enhancer<T>> = match kind {
        EnhancerKind::Oracle => Box::new(OracleWiener::new(bank)),
        EnhancerKind::Specsub => Box::new(SpectralSubtraction::new(bank, specsub)),
        EnhancerKind::Passthrough => Box::new(Passthrough::new(bank.n_bands())),
    };
    if lookahead == 0 {
        inner
    } else {
        Box::new(Delayed::new(inner, lookahead))
    }
}

fn check_gains<T: Real>(bin_gains: &[T]) -> Result<()> {
    match bin_gains.iter().position(|g| !g.is_finite() || *g < T::zero()) {
        Some(bin) => Err(Error::InvalidGain { bin, value: bin_gains[bin].to_f64_lossy() }),
        None => Ok(()),
    }
}

/// Multiply one channel's bins by real gains.
pub fn apply_bin_gains<T: Real>(spec: &mut MonoSpectrum<T>, bin_gains: &[T]) -> Result<()> {
    check_len("bin gains", spec.len(), bin_gains.len())?;
    check_gains(bin_gains)?;
    for (c, g) in spec.bins.iter_mut().zip(bin_gains) {
        *c *= *g;
    }
    Ok(())
}

/// Scale both channels by the same real gain per bin, in place.
pub fn apply_common_gain_in_place<T: Real>(x: &mut StereoSpectrum<T>, bin_gains: &[T]) -> Result<()> {
    check_len("common gain bins", x.n_bins(), bin_gains.len())?;
    check_gains(bin_gains)?;
    for m in 0..2 {
        for (c, g) in x.channel_mut(m).bins.iter_mut().zip(bin_gains) {
            *c *= *g;
        }
    }
    Ok(())
}

/// Scale both channels by the same real gain per bin.
pub fn apply_common_gain<T: Real>(x: &StereoSpectrum<T>, bin_gains: &[T]) -> Result<StereoSpectrum<T>> {
    let mut out = x.clone();
    apply_common_gain_in_place(&mut out, bin_gains)?;
    Ok(out)
}

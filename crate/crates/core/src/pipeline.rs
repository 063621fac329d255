//! Per-frame orchestration of the five processing modes and the streaming
//! wrapper that turns sample hops into enhanced sample hops.
//!
//! Every mode is expressed as a set of paths. A path owns one enhancer, a
//! mono signal the enhancer listens to and a stereo target its gains are
//! applied to; the output is the sum of the gained targets.
//!
//! | mode                     | paths | enhancer input  | gain target          |
//! |--------------------------|-------|-----------------|----------------------|
//! | `discrete`               | 2     | left / right    | that channel only    |
//! | `common-single-baseline` | 1     | (l + r) / 2     | the stereo input     |
//! | `common-single-proposed` | 1     | `a₁ᴴ x`         | `(a₁ᴴ x) a₁`         |
//! | `dual-nsv`               | 2     | `a_iᴴ x` (fixed)| `(a_iᴴ x) a_i`       |
//! | `dual-proposed`          | 2     | `a_iᴴ x`        | `(a_iᴴ x) a_i`       |
//!
//! The adaptive modes feed each completed output frame back into the
//! [`SteeringTracker`]; the steering pair it produces is used from the next
//! input frame on.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::enhance::{apply_common_gain_in_place, build_enhancer, EnhancerFrame, EnhancerKind, Enhancer, SpecSubParams};
use crate::erb::{design_erb_filterbank, interpolate_gains_into, ErbFilterbank};
use crate::error::{check_len, Error, Result};
use crate::scalar::Real;
use crate::signal::StereoSignal;
use crate::spatial::{check_forgetting_factor, dsbf_into, fixed_steering_nsv, spatial_image_into, SteeringTracker, SteeringVector};
use crate::stft::{FrameParams, MonoSpectrum, OverlapAdd, StereoSpectrum, StreamAnalyzer};

/// Processing topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Independent enhancement of each channel.
    Discrete,
    /// One common gain estimated on the channel mean, applied to both channels.
    CommonSingleBaseline,
    /// One adaptive beamformed path; output is its spatial image.
    CommonSingleProposed,
    /// Two paths on the fixed sum/difference steering pair.
    DualNsv,
    /// Two paths on the tracked steering pair.
    DualProposed,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Discrete,
        Mode::CommonSingleBaseline,
        Mode::CommonSingleProposed,
        Mode::DualNsv,
        Mode::DualProposed,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Discrete => "discrete",
            Mode::CommonSingleBaseline => "common-single-baseline",
            Mode::CommonSingleProposed => "common-single-proposed",
            Mode::DualNsv => "dual-nsv",
            Mode::DualProposed => "dual-proposed",
        }
    }

    pub fn n_paths(&self) -> usize {
        match self {
            Mode::CommonSingleBaseline | Mode::CommonSingleProposed => 1,
            _ => 2,
        }
    }

    /// Whether the steering pair is learned online.
    pub fn is_adaptive(&self) -> bool {
        matches!(self, Mode::CommonSingleProposed | Mode::DualProposed)
    }

    pub fn is_beamformed(&self) -> bool {
        matches!(self, Mode::CommonSingleProposed | Mode::DualNsv | Mode::DualProposed)
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode '{s}'")))
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything needed to build a [`Pipeline`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub frame: FrameParams,
    pub n_bands: usize,
    /// Covariance forgetting factor.
    pub alpha: f64,
    pub enhancer: EnhancerKind,
    /// Enhancer look-ahead in frames (3 frames = 30 ms at the default hop).
    pub lookahead_frames: usize,
    /// Freeze the steering pair at its initial value when false.
    pub adapt_steering: bool,
    pub specsub: SpecSubParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::DualProposed,
            frame: FrameParams::default(),
            n_bands: 32,
            alpha: 0.99,
            enhancer: EnhancerKind::Specsub,
            lookahead_frames: 3,
            adapt_steering: true,
            specsub: SpecSubParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        check_forgetting_factor(self.alpha)?;
        if self.n_bands < 2 || self.n_bands > self.frame.n_bins() {
            return Err(Error::Config(format!(
                "n_bands {} must lie in 2..={}",
                self.n_bands,
                self.frame.n_bins()
            )));
        }
        Ok(())
    }

    /// Analysis/synthesis delay plus enhancer look-ahead, in samples.
    pub fn latency_samples(&self) -> usize {
        self.frame.latency_samples() + self.lookahead_frames * self.frame.hop
    }

    pub fn latency_ms(&self) -> f64 {
        1000.0 * self.latency_samples() as f64 / self.frame.sample_rate as f64
    }
}

/// A frame waiting for its enhancer gains.
struct Pending<T> {
    input: StereoSpectrum<T>,
    targets: Vec<StereoSpectrum<T>>,
    steering: Vec<SteeringVector<T>>,
}

/// One completed output frame.
#[derive(Debug, Clone)]
pub struct FrameOutput<T> {
    /// `c = Σ z_i`.
    pub output: StereoSpectrum<T>,
    /// Per-path gained targets `z_i`.
    pub paths: Vec<StereoSpectrum<T>>,
    /// Steering vectors each path used for this frame (beamformed modes only).
    pub steering: Vec<SteeringVector<T>>,
}

/// Accumulated wall time per processing stage.
#[derive(Debug, Clone, Default)]
pub struct StageTimes {
    stages: BTreeMap<&'static str, Duration>,
}

impl StageTimes {
    pub fn add(&mut self, stage: &'static str, d: Duration) {
        *self.stages.entry(stage).or_default() += d;
    }

    pub fn merge(&mut self, other: &StageTimes) {
        for (k, v) in &other.stages {
            self.add(k, *v);
        }
    }

    pub fn micros(&self) -> BTreeMap<String, u64> {
        self.stages.iter().map(|(k, v)| (k.to_string(), v.as_micros() as u64)).collect()
    }
}

/// Frame-level processor for one stream.
pub struct Pipeline<T: Real> {
    config: PipelineConfig,
    bank: Arc<ErbFilterbank<T>>,
    enhancers: Vec<Box<dyn Enhancer<T>>>,
    tracker: Option<SteeringTracker<T>>,
    fixed: (SteeringVector<T>, SteeringVector<T>),
    pending: VecDeque<Pending<T>>,
    next_frame: u64,
    enhancer_input: MonoSpectrum<T>,
    enhancer_ref: MonoSpectrum<T>,
    bin_gains: Vec<T>,
    times: StageTimes,
}

impl<T: Real> Pipeline<T> {
    /// Pipeline with the configured built-in enhancer on every path.
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let bank = Arc::new(design_erb_filterbank::<T>(
            config.n_bands,
            config.frame.n_bins(),
            config.frame.sample_rate,
        )?);
        let enhancers = (0..config.mode.n_paths())
            .map(|_| build_enhancer(config.enhancer, bank.clone(), config.specsub, config.lookahead_frames))
            .collect();
        Self::assemble(config, bank, enhancers)
    }

    /// Pipeline with caller-supplied enhancers, one per path. All of them
    /// must declare the same look-ahead.
    pub fn with_enhancers(config: PipelineConfig, enhancers: Vec<Box<dyn Enhancer<T>>>) -> Result<Self> {
        config.validate()?;
        let bank = Arc::new(design_erb_filterbank::<T>(
            config.n_bands,
            config.frame.n_bins(),
            config.frame.sample_rate,
        )?);
        Self::assemble(config, bank, enhancers)
    }

    fn assemble(
        mut config: PipelineConfig,
        bank: Arc<ErbFilterbank<T>>,
        enhancers: Vec<Box<dyn Enhancer<T>>>,
    ) -> Result<Self> {
        check_len("enhancers per path", config.mode.n_paths(), enhancers.len())?;
        let lookahead = enhancers[0].lookahead();
        if enhancers.iter().any(|e| e.lookahead() != lookahead) {
            return Err(Error::Config("all paths need enhancers with equal look-ahead".into()));
        }
        config.lookahead_frames = lookahead;
        let n_bins = config.frame.n_bins();
        let tracker = if config.mode.is_adaptive() {
            Some(SteeringTracker::new(n_bins, T::lit(config.alpha))?)
        } else {
            None
        };
        Ok(Self {
            bank,
            enhancers,
            tracker,
            fixed: fixed_steering_nsv(n_bins),
            pending: VecDeque::with_capacity(lookahead + 1),
            next_frame: 0,
            enhancer_input: MonoSpectrum::zeros(n_bins, 0),
            enhancer_ref: MonoSpectrum::zeros(n_bins, 0),
            bin_gains: vec![T::zero(); n_bins],
            times: StageTimes::default(),
            config,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &ErbFilterbank<T> {
        &self.bank
    }

    pub fn lookahead(&self) -> usize {
        self.config.lookahead_frames
    }

    pub fn tracker(&self) -> Option<&SteeringTracker<T>> {
        self.tracker.as_ref()
    }

    pub fn stage_times(&self) -> &StageTimes {
        &self.times
    }

    /// Steering pair that the next input frame will be beamformed with.
    pub fn current_steering(&self) -> (&SteeringVector<T>, &SteeringVector<T>) {
        match &self.tracker {
            Some(t) => (t.primary(), t.secondary()),
            None => (&self.fixed.0, &self.fixed.1),
        }
    }

    /// Process input frame `l`. Returns output frame `l - lookahead()` once
    /// it is complete. `reference` is the clean stereo frame, required by the
    /// oracle enhancer and ignored otherwise.
    pub fn process_frame(
        &mut self,
        x: &StereoSpectrum<T>,
        reference: Option<&StereoSpectrum<T>>,
    ) -> Result<Option<FrameOutput<T>>> {
        if x.frame_index() != self.next_frame {
            return Err(Error::OutOfOrder { expected: self.next_frame, got: x.frame_index() });
        }
        check_len("pipeline input bins", self.config.frame.n_bins(), x.n_bins())?;
        if let Some(r) = reference {
            check_len("pipeline reference bins", x.n_bins(), r.n_bins())?;
            if r.frame_index() != x.frame_index() {
                return Err(Error::OutOfOrder { expected: x.frame_index(), got: r.frame_index() });
            }
        }
        self.next_frame += 1;

        let started = Instant::now();
        let n_paths = self.config.mode.n_paths();
        let steering: Vec<SteeringVector<T>> = if self.config.mode.is_beamformed() {
            let (a1, a2) = self.current_steering();
            [a1, a2].into_iter().take(n_paths).cloned().collect()
        } else {
            Vec::new()
        };

        let mut targets = Vec::with_capacity(n_paths);
        let mut gains = Vec::with_capacity(n_paths);
        let mut beamform_time = started.elapsed();
        let mut enhance_time = Duration::ZERO;
        for p in 0..n_paths {
            let t0 = Instant::now();
            let target = self.prepare_path(p, x, reference, &steering)?;
            targets.push(target);
            let t1 = Instant::now();
            beamform_time += t1 - t0;
            let reference_frame = reference.map(|_| &self.enhancer_ref);
            let frame = EnhancerFrame::with_reference(&self.enhancer_input, reference_frame);
            gains.push(self.enhancers[p].process(frame)?);
            enhance_time += t1.elapsed();
        }
        self.times.add("beamform", beamform_time);
        self.times.add("enhance", enhance_time);

        self.pending.push_back(Pending { input: x.clone(), targets, steering });

        let ready = gains.iter().filter(|g| g.is_some()).count();
        if ready == 0 {
            return Ok(None);
        }
        if ready != n_paths {
            return Err(Error::Config("path enhancers fell out of step".into()));
        }

        let t0 = Instant::now();
        let Pending { input, mut targets, steering } =
            self.pending.pop_front().expect("a pending frame for every emitted gain set");
        let mut output = StereoSpectrum::zeros(input.n_bins(), input.frame_index());
        for (target, g) in targets.iter_mut().zip(gains) {
            let g = g.expect("checked above");
            interpolate_gains_into(&g, &self.bank, &mut self.bin_gains)?;
            apply_common_gain_in_place(target, &self.bin_gains)?;
            output.add_assign(target)?;
        }
        self.times.add("gain", t0.elapsed());

        if self.config.adapt_steering {
            if let Some(tracker) = &mut self.tracker {
                let t0 = Instant::now();
                tracker.update(&output, &input)?;
                self.times.add("tracking", t0.elapsed());
            }
        }

        Ok(Some(FrameOutput { output, paths: targets, steering }))
    }

    /// Fill the enhancer input (and reference) for path `p`; return the
    /// stereo target its gains will scale.
    fn prepare_path(
        &mut self,
        p: usize,
        x: &StereoSpectrum<T>,
        reference: Option<&StereoSpectrum<T>>,
        steering: &[SteeringVector<T>],
    ) -> Result<StereoSpectrum<T>> {
        let idx = x.frame_index();
        match self.config.mode {
            Mode::Discrete => {
                copy_mono(x.channel(p), &mut self.enhancer_input);
                if let Some(r) = reference {
                    copy_mono(r.channel(p), &mut self.enhancer_ref);
                }
                let mut target = StereoSpectrum::zeros(x.n_bins(), idx);
                copy_mono(x.channel(p), target.channel_mut(p));
                Ok(target)
            }
            Mode::CommonSingleBaseline => {
                self.enhancer_input = x.downmix();
                if let Some(r) = reference {
                    self.enhancer_ref = r.downmix();
                }
                Ok(x.clone())
            }
            Mode::CommonSingleProposed | Mode::DualNsv | Mode::DualProposed => {
                let a = &steering[p];
                dsbf_into(x, a, &mut self.enhancer_input)?;
                if let Some(r) = reference {
                    dsbf_into(r, a, &mut self.enhancer_ref)?;
                }
                let mut target = StereoSpectrum::zeros(x.n_bins(), idx);
                spatial_image_into(&self.enhancer_input, a, &mut target)?;
                Ok(target)
            }
        }
    }
}

fn copy_mono<T: Real>(src: &MonoSpectrum<T>, dst: &mut MonoSpectrum<T>) {
    dst.bins.clone_from(&src.bins);
    dst.frame_index = src.frame_index;
}

/// Summary of one [`run_stream`] call; serialised as the run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub enhancer: String,
    pub frames: u64,
    /// Processing time over audio duration.
    pub rtf: f64,
    pub latency_ms: f64,
    pub per_stage_us: BTreeMap<String, u64>,
    pub sample_rate: u32,
    pub input_samples: usize,
}

/// Hop-in, hop-out streaming wrapper around [`Pipeline`].
///
/// Output sample `n` corresponds to input sample `n - config.latency_samples()`.
pub struct StreamProcessor<T: Real> {
    pipeline: Pipeline<T>,
    analyzers: [StreamAnalyzer<T>; 2],
    ref_analyzers: [StreamAnalyzer<T>; 2],
    synth: [OverlapAdd<T>; 2],
    x: StereoSpectrum<T>,
    r: StereoSpectrum<T>,
    silence: MonoSpectrum<T>,
    frames: u64,
    times: StageTimes,
}

impl<T: Real> StreamProcessor<T> {
    pub fn new(pipeline: Pipeline<T>) -> Result<Self> {
        let fp = pipeline.config().frame;
        let n_bins = fp.n_bins();
        Ok(Self {
            analyzers: [StreamAnalyzer::new(fp)?, StreamAnalyzer::new(fp)?],
            ref_analyzers: [StreamAnalyzer::new(fp)?, StreamAnalyzer::new(fp)?],
            synth: [OverlapAdd::new(fp)?, OverlapAdd::new(fp)?],
            x: StereoSpectrum::zeros(n_bins, 0),
            r: StereoSpectrum::zeros(n_bins, 0),
            silence: MonoSpectrum::zeros(n_bins, 0),
            frames: 0,
            times: StageTimes::default(),
            pipeline,
        })
    }

    pub fn pipeline(&self) -> &Pipeline<T> {
        &self.pipeline
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    /// Stage timings including analysis and synthesis.
    pub fn stage_times(&self) -> StageTimes {
        let mut t = self.times.clone();
        t.merge(self.pipeline.stage_times());
        t
    }

    /// Push one hop per channel (and optionally the clean reference hop);
    /// write one hop per channel of output.
    pub fn push_hop(
        &mut self,
        input: [&[T]; 2],
        reference: Option<[&[T]; 2]>,
        output: [&mut [T]; 2],
    ) -> Result<Option<FrameOutput<T>>> {
        let t0 = Instant::now();
        for m in 0..2 {
            self.analyzers[m].push_into(input[m], self.x.channel_mut(m))?;
            if let Some(r) = reference {
                self.ref_analyzers[m].push_into(r[m], self.r.channel_mut(m))?;
            }
        }
        self.times.add("analysis", t0.elapsed());

        let out = self.pipeline.process_frame(&self.x, reference.map(|_| &self.r))?;

        let t0 = Instant::now();
        for (m, dst) in output.into_iter().enumerate() {
            let spec = out.as_ref().map(|o| o.output.channel(m)).unwrap_or(&self.silence);
            self.synth[m].push_into(spec, dst)?;
        }
        self.times.add("synthesis", t0.elapsed());
        self.frames += 1;
        Ok(out)
    }
}

/// Output of [`run_stream`].
#[derive(Debug, Clone)]
pub struct StreamOutput<T> {
    /// `input length + latency` samples; the first `latency` samples are the
    /// pipeline's start-up delay.
    pub signal: StereoSignal<T>,
    pub latency_samples: usize,
    pub report: RunReport,
}

impl<T: Real> StreamOutput<T> {
    /// Output with the latency removed, trimmed to the input length.
    pub fn aligned(&self) -> StereoSignal<T> {
        let n = self.signal.len() - self.latency_samples;
        self.signal.slice_padded(self.latency_samples, n)
    }
}

/// Run a whole stereo signal through a fresh pipeline.
pub fn run_stream<T: Real>(
    input: &StereoSignal<T>,
    reference: Option<&StereoSignal<T>>,
    config: &PipelineConfig,
) -> Result<StreamOutput<T>> {
    let pipeline = Pipeline::new(config.clone())?;
    run_stream_with(input, reference, pipeline)
}

/// As [`run_stream`], with a pre-built pipeline (custom enhancers).
pub fn run_stream_with<T: Real>(
    input: &StereoSignal<T>,
    reference: Option<&StereoSignal<T>>,
    pipeline: Pipeline<T>,
) -> Result<StreamOutput<T>> {
    let config = pipeline.config().clone();
    if input.sample_rate != config.frame.sample_rate {
        return Err(Error::UnsupportedAudio(format!(
            "input is {} Hz but the pipeline is configured for {} Hz (resampling is not supported)",
            input.sample_rate, config.frame.sample_rate
        )));
    }
    check_len("stereo input channels", input.left.len(), input.right.len())?;
    if let Some(r) = reference {
        check_len("reference length", input.len(), r.len())?;
    }
    if config.enhancer.needs_reference() && reference.is_none() {
        return Err(Error::MissingReference);
    }

    let hop = config.frame.hop;
    let latency = config.latency_samples();
    let n_out = input.len() + latency;
    let n_frames = n_out.div_ceil(hop);
    let mut proc = StreamProcessor::new(pipeline)?;
    let mut left = vec![T::zero(); n_frames * hop];
    let mut right = vec![T::zero(); n_frames * hop];
    let mut hop_in = [vec![T::zero(); hop], vec![T::zero(); hop]];
    let mut hop_ref = [vec![T::zero(); hop], vec![T::zero(); hop]];

    let started = Instant::now();
    for (f, (out_l, out_r)) in left.chunks_exact_mut(hop).zip(right.chunks_exact_mut(hop)).enumerate() {
        for m in 0..2 {
            crate::stft::fill_hop(input.channel(m), f * hop, &mut hop_in[m]);
            if let Some(r) = reference {
                crate::stft::fill_hop(r.channel(m), f * hop, &mut hop_ref[m]);
            }
        }
        let refs = reference.map(|_| [hop_ref[0].as_slice(), hop_ref[1].as_slice()]);
        proc.push_hop([&hop_in[0], &hop_in[1]], refs, [out_l, out_r])?;
    }
    let elapsed = started.elapsed().as_secs_f64();
    left.truncate(n_out);
    right.truncate(n_out);

    let duration = input.len().max(1) as f64 / input.sample_rate as f64;
    let report = RunReport {
        mode: config.mode,
        enhancer: config.enhancer.to_string(),
        frames: proc.frames(),
        rtf: elapsed / duration,
        latency_ms: config.latency_ms(),
        per_stage_us: proc.stage_times().micros(),
        sample_rate: input.sample_rate,
        input_samples: input.len(),
    };
    Ok(StreamOutput {
        signal: StereoSignal { left, right, sample_rate: input.sample_rate },
        latency_samples: latency,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enhance::Passthrough;
    use crate::spatial::{inner, unitarity_defect, Pair};
    use num_complex::Complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(rng: &mut ChaCha8Rng, n_bins: usize, idx: u64) -> StereoSpectrum<f64> {
        let mut ch = || {
            MonoSpectrum::from_bins(
                (0..n_bins)
                    .map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect(),
                idx,
            )
        };
        let l = ch();
        let r = ch();
        StereoSpectrum::new(l, r).unwrap()
    }

    fn config(mode: Mode, enhancer: EnhancerKind, lookahead: usize) -> PipelineConfig {
        PipelineConfig { mode, enhancer, lookahead_frames: lookahead, ..Default::default() }
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.as_str()));
        }
        assert!("dual".parse::<Mode>().is_err());
    }

    #[test]
    fn default_config_latency_is_forty_ms() {
        let c = PipelineConfig::default();
        assert_eq!(c.latency_samples(), 640);
        assert!((c.latency_ms() - 40.0).abs() < 1e-12);
        let c0 = PipelineConfig { lookahead_frames: 0, ..c };
        assert!((c0.latency_ms() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let mut c = PipelineConfig::default();
        c.alpha = 1.0;
        assert!(Pipeline::<f64>::new(c).is_err());
        let mut c = PipelineConfig::default();
        c.n_bands = 500;
        assert!(Pipeline::<f64>::new(c).is_err());
    }

    #[test]
    fn config_json_defaults() {
        let c: PipelineConfig = serde_json::from_str(r#"{"mode": "dual-nsv", "alpha": 0.95}"#).unwrap();
        assert_eq!(c.mode, Mode::DualNsv);
        assert_eq!(c.alpha, 0.95);
        assert_eq!(c.n_bands, 32);
        assert_eq!(c.frame, FrameParams::default());
    }

    #[test]
    fn passthrough_reconstructs_every_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // the single adaptive path keeps only the a₁ projection
        for mode in Mode::ALL.into_iter().filter(|m| *m != Mode::CommonSingleProposed) {
            let mut p = Pipeline::<f64>::new(config(mode, EnhancerKind::Passthrough, 0)).unwrap();
            for i in 0..50 {
                let x = random_frame(&mut rng, 161, i);
                let out = p.process_frame(&x, None).unwrap().unwrap();
                for k in 0..161 {
                    let (o, xi) = (out.output.bin(k), x.bin(k));
                    let err = (o[0] - xi[0]).norm().max((o[1] - xi[1]).norm());
                    assert!(err <= 1e-9, "{mode} bin {k}: {err}");
                }
            }
        }
    }

    #[test]
    fn lookahead_delays_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = Pipeline::<f64>::new(config(Mode::DualProposed, EnhancerKind::Passthrough, 3)).unwrap();
        let frames: Vec<_> = (0..10).map(|i| random_frame(&mut rng, 161, i)).collect();
        for (i, x) in frames.iter().enumerate() {
            let out = p.process_frame(x, None).unwrap();
            if i < 3 {
                assert!(out.is_none());
            } else {
                let out = out.unwrap();
                assert_eq!(out.output.frame_index(), i as u64 - 3);
                let src = &frames[i - 3];
                for k in 0..161 {
                    assert!((out.output.bin(k)[0] - src.bin(k)[0]).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn out_of_order_frames_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = Pipeline::<f64>::new(config(Mode::DualNsv, EnhancerKind::Passthrough, 0)).unwrap();
        p.process_frame(&random_frame(&mut rng, 161, 0), None).unwrap();
        assert!(matches!(
            p.process_frame(&random_frame(&mut rng, 161, 5), None),
            Err(Error::OutOfOrder { expected: 1, got: 5 })
        ));
    }

    #[test]
    fn oracle_needs_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = Pipeline::<f64>::new(config(Mode::DualProposed, EnhancerKind::Oracle, 0)).unwrap();
        assert!(matches!(
            p.process_frame(&random_frame(&mut rng, 161, 0), None),
            Err(Error::MissingReference)
        ));
    }

    #[test]
    fn silence_keeps_initial_steering() {
        let mut p = Pipeline::<f64>::new(config(Mode::DualProposed, EnhancerKind::Specsub, 0)).unwrap();
        for i in 0..100 {
            let out = p.process_frame(&StereoSpectrum::zeros(161, i), None).unwrap().unwrap();
            assert!(out.output.left.bins.iter().chain(&out.output.right.bins).all(|c| c.norm() == 0.0));
        }
        let (n1, n2) = fixed_steering_nsv::<f64>(161);
        let (a1, a2) = p.current_steering();
        assert_eq!((a1, a2), (&n1, &n2));
    }

    #[test]
    fn frozen_adaptive_equals_nsv() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let frozen = PipelineConfig { adapt_steering: false, ..config(Mode::DualProposed, EnhancerKind::Specsub, 2) };
        let mut a = Pipeline::<f64>::new(frozen).unwrap();
        let mut b = Pipeline::<f64>::new(config(Mode::DualNsv, EnhancerKind::Specsub, 2)).unwrap();
        for i in 0..80 {
            let x = random_frame(&mut rng, 161, i).clone();
            let oa = a.process_frame(&x, None).unwrap();
            let ob = b.process_frame(&x, None).unwrap();
            assert_eq!(oa.map(|o| o.output), ob.map(|o| o.output));
        }
    }

    #[test]
    fn per_path_ratio_follows_steering() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut p = Pipeline::<f64>::new(config(Mode::DualProposed, EnhancerKind::Specsub, 1)).unwrap();
        for i in 0..120 {
            let x = random_frame(&mut rng, 161, i);
            if let Some(out) = p.process_frame(&x, None).unwrap() {
                for (z, a) in out.paths.iter().zip(&out.steering) {
                    for k in 0..161 {
                        let [z1, z2] = z.bin(k);
                        let [a1, a2]: Pair<f64> = *a.get(k);
                        if z1.norm() > 1e-200 && a1.norm() > 1e-9 {
                            let (rz, ra) = (z2 / z1, a2 / a1);
                            assert!((rz - ra).norm() <= 1e-12 * ra.norm().max(1e-300));
                        }
                    }
                }
                assert!(out.steering.iter().all(|s| s.max_norm_error() < 1e-12));
                for k in 0..161 {
                    assert!(inner(out.steering[0].get(k), out.steering[1].get(k)).norm() < 1e-12);
                    assert!(unitarity_defect(out.steering[0].get(k), out.steering[1].get(k)) <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn custom_enhancers_must_match_lookahead() {
        let c = config(Mode::DualNsv, EnhancerKind::Passthrough, 0);
        let delayed: Box<dyn Enhancer<f64>> =
            Box::new(crate::enhance::Delayed::new(Box::new(Passthrough::new(32)), 2));
        let plain: Box<dyn Enhancer<f64>> = Box::new(Passthrough::new(32));
        assert!(Pipeline::with_enhancers(c.clone(), vec![delayed, plain]).is_err());
        let one: Box<dyn Enhancer<f64>> = Box::new(Passthrough::new(32));
        assert!(Pipeline::with_enhancers(c, vec![one]).is_err());
    }

    #[test]
    fn stream_round_trip_and_report() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 16_000;
        let sig = StereoSignal::new(
            (0..n).map(|_| rng.random_range(-0.5..0.5)).collect(),
            (0..n).map(|_| rng.random_range(-0.5..0.5)).collect(),
            16_000,
        )
        .unwrap();
        let cfg = config(Mode::DualProposed, EnhancerKind::Passthrough, 3);
        let out = run_stream(&sig, None, &cfg).unwrap();
        assert_eq!(out.signal.len(), n + 640);
        assert_eq!(out.latency_samples, 640);
        assert!(out.aligned().max_abs_diff(&sig) <= 1e-9);
        assert_eq!(out.report.frames, (n as u64 + 640).div_ceil(160));
        assert!((out.report.latency_ms - 40.0).abs() < 1e-12);
        assert!(out.report.rtf > 0.0);
        for stage in ["analysis", "beamform", "enhance", "gain", "tracking", "synthesis"] {
            assert!(out.report.per_stage_us.contains_key(stage), "{stage}");
        }
        let json = serde_json::to_value(&out.report).unwrap();
        for key in ["mode", "frames", "rtf", "latency_ms", "per_stage_us"] {
            assert!(json.get(key).is_some());
        }
        assert_eq!(json["mode"], "dual-proposed");
    }

    #[test]
    fn stream_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 8_000;
        let sig = StereoSignal::new(
            (0..n).map(|_| rng.random_range(-0.5..0.5)).collect(),
            (0..n).map(|_| rng.random_range(-0.5..0.5)).collect(),
            16_000,
        )
        .unwrap();
        let cfg = config(Mode::DualProposed, EnhancerKind::Specsub, 3);
        let a = run_stream(&sig, None, &cfg).unwrap();
        let b = run_stream(&sig, None, &cfg).unwrap();
        assert_eq!(a.signal, b.signal);
    }

    #[test]
    fn stream_rejects_rate_mismatch() {
        let sig = StereoSignal::<f64>::silence(480, 48_000);
        assert!(matches!(
            run_stream(&sig, None, &PipelineConfig::default()),
            Err(Error::UnsupportedAudio(_))
        ));
    }

    #[test]
    fn f32_pipeline_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 4_000;
        let sig = StereoSignal::new(
            (0..n).map(|_| rng.random_range(-0.5f32..0.5)).collect(),
            (0..n).map(|_| rng.random_range(-0.5f32..0.5)).collect(),
            16_000,
        )
        .unwrap();
        let out = run_stream(&sig, None, &config(Mode::DualProposed, EnhancerKind::Passthrough, 0)).unwrap();
        assert!(out.aligned().max_abs_diff(&sig) <= 1e-5);
    }
}

//! Interaural phase and level difference errors between a processed stereo
//! signal and a clean stereo reference.
//!
//! Both signals are aligned by a single integer lag found by
//! cross-correlation, transformed with the pipeline's framing, and compared
//! per time-frequency bin. A bin is evaluated when its reference energy
//! (both channels) is within `threshold_db` of the loudest bin of the same
//! frame. Errors are uniform means over evaluated bins:
//!
//! * IPD error: `|wrap(φ_ref − φ_out)| / π`, with `φ = arg(x₂ x̄₁)`;
//! * ILD error: `|20 log10 L_out − 20 log10 L_ref|` dB, with `L = |x₂| / |x₁|`.

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::scalar::Real;
use crate::signal::StereoSignal;
use crate::spatial::{hermitian_angle, SteeringVector};
use crate::stft::{FrameParams, StereoSpectrum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricParams {
    pub frame: FrameParams,
    /// Bins quieter than the frame maximum by more than this are skipped.
    pub threshold_db: f64,
    /// Largest lag (samples) searched when aligning the signals.
    pub max_lag: usize,
    /// Magnitude floor before ratios and logarithms.
    pub eps: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self { frame: FrameParams::default(), threshold_db: 40.0, max_lag: 480, eps: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Mean normalised phase error in `[0, 1]`.
    pub ipd_error: f64,
    /// Mean level-difference error in dB.
    pub ild_error: f64,
    pub bins_evaluated: usize,
    /// `out[n + lag]` was compared against `ref[n]`.
    pub lag_samples: i64,
}

/// One row of a batch evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub file: String,
    pub mode: String,
    pub ipd_error: f64,
    pub ild_error: f64,
    pub bins_evaluated: usize,
}

/// Wrap an angle into `(-π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = (phi + PI).rem_euclid(TAU) - PI;
    if w <= -PI { w + TAU } else { w }
}

fn to_f64<T: Real>(c: Complex<T>) -> Complex<f64> {
    Complex::new(c.re.to_f64_lossy(), c.im.to_f64_lossy())
}

/// Lag in `[-max_lag, max_lag]` maximising `Σ_n out[n] ref[n - lag]` over
/// the channel sums. Ties go to the smallest `|lag|`.
pub fn estimate_lag<T: Real>(out: &StereoSignal<T>, reference: &StereoSignal<T>, max_lag: usize) -> i64 {
    let mono = |s: &StereoSignal<T>| -> Vec<f64> {
        s.left.iter().zip(&s.right).map(|(l, r)| (*l + *r).to_f64_lossy()).collect()
    };
    let (a, b) = (mono(out), mono(reference));
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let n = (a.len() + b.len()).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa: Vec<Complex<f64>> = a.iter().map(|v| Complex::new(*v, 0.0)).collect();
    fa.resize(n, Complex::default());
    let mut fb: Vec<Complex<f64>> = b.iter().map(|v| Complex::new(*v, 0.0)).collect();
    fb.resize(n, Complex::default());
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    let mut corr: Vec<Complex<f64>> = fa.iter().zip(&fb).map(|(x, y)| x * y.conj()).collect();
    inv.process(&mut corr);

    let at = |lag: i64| corr[lag.rem_euclid(n as i64) as usize].re;
    let mut best = 0i64;
    let mut best_val = at(0);
    let limit = max_lag.min(n / 2 - 1) as i64;
    for mag in 1..=limit {
        for lag in [mag, -mag] {
            let v = at(lag);
            if v > best_val * (1.0 + 1e-9) + 1e-300 {
                best = lag;
                best_val = v;
            }
        }
    }
    best
}

/// Errors from already-aligned spectrum sequences (no lag search).
pub fn evaluate_spectra<T: Real>(
    out: &[StereoSpectrum<T>],
    reference: &[StereoSpectrum<T>],
    threshold_db: f64,
    eps: f64,
) -> Result<MetricReport> {
    check_len("metric frames", reference.len(), out.len())?;
    let rel = 10f64.powf(-threshold_db / 10.0);
    let mut ipd_sum = 0.0;
    let mut ild_sum = 0.0;
    let mut count = 0usize;
    for (o, r) in out.iter().zip(reference) {
        check_len("metric bins", r.n_bins(), o.n_bins())?;
        let energy: Vec<f64> = (0..r.n_bins())
            .map(|k| {
                let [a, b] = r.bin(k);
                (a.norm_sqr() + b.norm_sqr()).to_f64_lossy()
            })
            .collect();
        let peak = energy.iter().cloned().fold(0.0, f64::max);
        if peak <= 0.0 {
            continue;
        }
        for (k, e) in energy.iter().enumerate() {
            if *e < peak * rel {
                continue;
            }
            let [r1, r2] = r.bin(k).map(to_f64);
            let [o1, o2] = o.bin(k).map(to_f64);
            let phi_ref = (r2 * r1.conj()).arg();
            let phi_out = (o2 * o1.conj()).arg();
            ipd_sum += wrap_phase(phi_ref - phi_out).abs() / std::f64::consts::PI;
            let level = |c1: Complex<f64>, c2: Complex<f64>| 20.0 * (c2.norm().max(eps) / c1.norm().max(eps)).log10();
            ild_sum += (level(o1, o2) - level(r1, r2)).abs();
            count += 1;
        }
    }
    if count == 0 {
        return Ok(MetricReport { ipd_error: 0.0, ild_error: 0.0, bins_evaluated: 0, lag_samples: 0 });
    }
    Ok(MetricReport {
        ipd_error: ipd_sum / count as f64,
        ild_error: ild_sum / count as f64,
        bins_evaluated: count,
        lag_samples: 0,
    })
}

/// Align, transform and compare two stereo signals.
pub fn evaluate<T: Real>(
    out: &StereoSignal<T>,
    reference: &StereoSignal<T>,
    params: &MetricParams,
) -> Result<MetricReport> {
    if out.sample_rate != reference.sample_rate {
        return Err(Error::UnsupportedAudio(format!(
            "sample rates differ: {} vs {}",
            out.sample_rate, reference.sample_rate
        )));
    }
    let diff = out.len().abs_diff(reference.len());
    if diff > params.max_lag {
        return Err(Error::SizeMismatch {
            context: "metric signal lengths (beyond the alignment window)",
            expected: reference.len(),
            got: out.len(),
        });
    }
    let lag = estimate_lag(out, reference, params.max_lag);
    let (o_start, r_start) = if lag >= 0 { (lag as usize, 0) } else { (0, (-lag) as usize) };
    let common = (out.len().saturating_sub(o_start)).min(reference.len().saturating_sub(r_start));
    let o = out.slice_padded(o_start, common);
    let r = reference.slice_padded(r_start, common);

    let frame = FrameParams { sample_rate: out.sample_rate, ..params.frame };
    let mut report = evaluate_spectra(&o.analyze(&frame)?, &r.analyze(&frame)?, params.threshold_db, params.eps)?;
    report.lag_samples = lag;
    Ok(report)
}

pub fn ipd_error<T: Real>(out: &StereoSignal<T>, reference: &StereoSignal<T>, params: &MetricParams) -> Result<f64> {
    evaluate(out, reference, params).map(|r| r.ipd_error)
}

pub fn ild_error<T: Real>(out: &StereoSignal<T>, reference: &StereoSignal<T>, params: &MetricParams) -> Result<f64> {
    evaluate(out, reference, params).map(|r| r.ild_error)
}

/// Weighted mean Hermitian angle (degrees) between two steering vectors,
/// bin weights typically being the source's image energy. Returns `None`
/// when all weights are zero.
pub fn steering_angle_deg<T: Real>(estimate: &SteeringVector<T>, truth: &SteeringVector<f64>, weights: &[f64]) -> Result<Option<f64>> {
    check_len("steering bins", truth.len(), estimate.len())?;
    check_len("steering weights", truth.len(), weights.len())?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, w) in weights.iter().enumerate() {
        if *w <= 0.0 {
            continue;
        }
        let e = estimate.get(k).map(to_f64);
        num += w * hermitian_angle(&e, truth.get(k)).to_degrees();
        den += w;
    }
    Ok((den > 0.0).then(|| num / den))
}

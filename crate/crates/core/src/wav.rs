//! WAV input and output. Reads 16/24/32-bit PCM or 32-bit float, mono or
//! stereo; writes 32-bit float stereo.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::StereoSignal;

/// Header fields of a WAV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavInfo {
    pub channels: u16,
    pub sample_rate: u32,
    pub frames: u32,
}

pub fn wav_info(path: impl AsRef<Path>) -> Result<WavInfo> {
    let reader = WavReader::open(path.as_ref())?;
    let spec = reader.spec();
    Ok(WavInfo { channels: spec.channels, sample_rate: spec.sample_rate, frames: reader.duration() })
}

/// Read a WAV file. Mono files are duplicated onto both channels.
pub fn read_wav<T: Real>(path: impl AsRef<Path>) -> Result<StereoSignal<T>> {
    let mut reader = WavReader::open(path.as_ref())?;
    let spec = reader.spec();
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader.samples::<f32>().map(|s| s.map(f64::from)).collect::<Result<_, _>>()?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<Result<_, _>>()?
        }
        (fmt, bits) => {
            return Err(Error::UnsupportedAudio(format!("{bits}-bit {fmt:?} samples")));
        }
    };
    let to_t = |v: &f64| T::lit(*v);
    match spec.channels {
        1 => {
            let mono: Vec<T> = interleaved.iter().map(to_t).collect();
            Ok(StereoSignal::from_mono(&mono, spec.sample_rate))
        }
        2 => {
            let left = interleaved.iter().step_by(2).map(to_t).collect();
            let right = interleaved.iter().skip(1).step_by(2).map(to_t).collect();
            StereoSignal::new(left, right, spec.sample_rate)
        }
        n => Err(Error::UnsupportedAudio(format!("{n} channels (expected 1 or 2)"))),
    }
}

/// Write a 32-bit float stereo WAV.
pub fn write_wav<T: Real>(path: impl AsRef<Path>, signal: &StereoSignal<T>) -> Result<()> {
    let spec = WavSpec {
        channels: 2,
        sample_rate: signal.sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::create(path.as_ref(), spec)?;
    for (l, r) in signal.left.iter().zip(&signal.right) {
        writer.write_sample(l.to_f64_lossy() as f32)?;
        writer.write_sample(r.to_f64_lossy() as f32)?;
    }
    writer.finalize()?;
    Ok(())
}

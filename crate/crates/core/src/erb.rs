//! Triangular filterbank with band centres equally spaced on the ERB-rate
//! scale, plus the band-energy and band-gain interpolation operators that
//! go with it.

use crate::error::{check_len, Error, Result};
use crate::scalar::Real;
use crate::stft::MonoSpectrum;

/// Glasberg & Moore ERB-rate in Cams.
pub fn hz_to_erb_rate(hz: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * hz).log10()
}

pub fn erb_rate_to_hz(erb: f64) -> f64 {
    (10f64.powf(erb / 21.4) - 1.0) / 0.00437
}

/// One band's triangle, stored as its contiguous run of non-zero weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Band<T> {
    pub first_bin: usize,
    pub weights: Vec<T>,
}

impl<T> Band<T> {
    pub fn bins(&self) -> std::ops::Range<usize> {
        self.first_bin..self.first_bin + self.weights.len()
    }
}

/// Partition-of-unity triangular filterbank.
#[derive(Debug, Clone, PartialEq)]
pub struct ErbFilterbank<T> {
    n_bins: usize,
    sample_rate: u32,
    centers_hz: Vec<f64>,
    bands: Vec<Band<T>>,
}

impl<T: Real> ErbFilterbank<T> {
    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn bands(&self) -> &[Band<T>] {
        &self.bands
    }

    /// Weight of band `b` at bin `k` (zero outside the band's support).
    pub fn weight(&self, b: usize, k: usize) -> T {
        let band = &self.bands[b];
        if band.bins().contains(&k) {
            band.weights[k - band.first_bin]
        } else {
            T::zero()
        }
    }
}

/// Design a bank of `n_bands` triangles over `n_bins` one-sided bins.
///
/// Centres run from 0 Hz to Nyquist in equal ERB-rate steps; the first and
/// last triangles are halves so the weights at every bin sum to one.
pub fn design_erb_filterbank<T: Real>(
    n_bands: usize,
    n_bins: usize,
    sample_rate: u32,
) -> Result<ErbFilterbank<T>> {
    if n_bands < 2 {
        return Err(Error::Config(format!("need at least 2 bands, got {n_bands}")));
    }
    if n_bins < 2 {
        return Err(Error::Config(format!("need at least 2 bins, got {n_bins}")));
    }
    if n_bands > n_bins {
        return Err(Error::Config(format!(
            "{n_bands} bands requested for only {n_bins} bins"
        )));
    }
    if sample_rate == 0 {
        return Err(Error::Config("sample rate must be positive".into()));
    }

    let nyquist = sample_rate as f64 / 2.0;
    let top = hz_to_erb_rate(nyquist);
    let mut centers_hz: Vec<f64> = (0..n_bands)
        .map(|b| erb_rate_to_hz(top * b as f64 / (n_bands - 1) as f64))
        .collect();
    // pin the ends so the edge bins land exactly on a centre
    centers_hz[0] = 0.0;
    centers_hz[n_bands - 1] = nyquist;

    let mut dense = vec![vec![0.0f64; n_bins]; n_bands];
    let mut lower = 0;
    for k in 0..n_bins {
        let f = nyquist * k as f64 / (n_bins - 1) as f64;
        while lower + 2 < n_bands && f > centers_hz[lower + 1] {
            lower += 1;
        }
        let (lo, hi) = (centers_hz[lower], centers_hz[lower + 1]);
        let w_lo = ((hi - f) / (hi - lo)).clamp(0.0, 1.0);
        dense[lower][k] = w_lo;
        dense[lower + 1][k] = 1.0 - w_lo;
    }

    let bands = dense
        .into_iter()
        .map(|row| {
            let first = row.iter().position(|w| *w > 0.0);
            let last = row.iter().rposition(|w| *w > 0.0);
            match (first, last) {
                (Some(a), Some(z)) => Band {
                    first_bin: a,
                    weights: row[a..=z].iter().map(|w| T::lit(*w)).collect(),
                },
                _ => Band { first_bin: 0, weights: Vec::new() },
            }
        })
        .collect();

    Ok(ErbFilterbank {
        n_bins,
        sample_rate,
        centers_hz,
        bands,
    })
}

/// Per-band gains, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandGains<T> {
    gains: Vec<T>,
}

impl<T: Real> BandGains<T> {
    /// Clamp into `[0, 1]`; NaN maps to 0.
    pub fn clamped(gains: Vec<T>) -> Self {
        let gains = gains
            .into_iter()
            .map(|g| if g.is_nan() { T::zero() } else { g.max(T::zero()).min(T::one()) })
            .collect();
        Self { gains }
    }

    pub fn filled(n_bands: usize, value: T) -> Self {
        Self::clamped(vec![value; n_bands])
    }

    pub fn ones(n_bands: usize) -> Self {
        Self { gains: vec![T::one(); n_bands] }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.gains
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

/// `energy[b] = Σ_k w[b][k] |X_k|²`.
pub fn band_energies<T: Real>(spec: &MonoSpectrum<T>, bank: &ErbFilterbank<T>) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); bank.n_bands()];
    band_energies_into(spec, bank, &mut out)?;
    Ok(out)
}

pub fn band_energies_into<T: Real>(
    spec: &MonoSpectrum<T>,
    bank: &ErbFilterbank<T>,
    out: &mut [T],
) -> Result<()> {
    check_len("band energies: spectrum bins", bank.n_bins, spec.len())?;
    check_len("band energies: output", bank.n_bands(), out.len())?;
    for (e, band) in out.iter_mut().zip(&bank.bands) {
        *e = band
            .weights
            .iter()
            .zip(&spec.bins[band.bins()])
            .fold(T::zero(), |acc, (w, c)| acc + *w * c.norm_sqr());
    }
    Ok(())
}

/// `bin_gain[k] = Σ_b w[b][k] g[b]`.
pub fn interpolate_gains<T: Real>(g: &BandGains<T>, bank: &ErbFilterbank<T>) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); bank.n_bins];
    interpolate_gains_into(g, bank, &mut out)?;
    Ok(out)
}

pub fn interpolate_gains_into<T: Real>(
    g: &BandGains<T>,
    bank: &ErbFilterbank<T>,
    out: &mut [T],
) -> Result<()> {
    check_len("interpolate gains: bands", bank.n_bands(), g.len())?;
    check_len("interpolate gains: output bins", bank.n_bins, out.len())?;
    out.iter_mut().for_each(|v| *v = T::zero());
    for (gain, band) in g.gains.iter().zip(&bank.bands) {
        for (o, w) in out[band.bins()].iter_mut().zip(&band.weights) {
            *o += *w * *gain;
        }
    }
    Ok(())
}

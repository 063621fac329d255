//! Two-microphone spatial processing: delay-and-sum projection onto a
//! steering vector, spatial images, the speech-presence mask, mask-gated
//! covariance tracking and the closed-form principal eigenvector of a 2×2
//! Hermitian matrix.
//!
//! Steering vectors are unit norm per bin with the phase fixed so the first
//! component is real and non-negative (the second one when the first
//! vanishes). The projector `a aᴴ` does not depend on that phase, so the
//! convention only makes results reproducible.

use num_complex::Complex;

use crate::error::{check_len, Error, Result};
use crate::scalar::Real;
use crate::stft::{MonoSpectrum, StereoSpectrum};

/// Complex 2-vector at one bin.
pub type Pair<T> = [Complex<T>; 2];

const PHASE_REF_MIN: f64 = 1e-9;

#[inline]
fn pair_norm<T: Real>(v: &Pair<T>) -> T {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

/// `uᴴ v`.
#[inline]
pub fn inner<T: Real>(u: &Pair<T>, v: &Pair<T>) -> Complex<T> {
    u[0].conj() * v[0] + u[1].conj() * v[1]
}

/// Rotate `v` so its reference component is real and non-negative.
pub fn apply_phase_convention<T: Real>(v: Pair<T>) -> Pair<T> {
    let (r, other) = if v[0].norm() >= T::lit(PHASE_REF_MIN) { (0, 1) } else { (1, 0) };
    let mag = v[r].norm();
    if mag == T::zero() {
        return v;
    }
    let rot = v[r].conj() / mag;
    let mut out = [Complex::default(); 2];
    out[r] = Complex::new(mag, T::zero());
    out[other] = v[other] * rot;
    out
}

/// Scale to unit norm and fix the phase. Zero input stays zero.
pub fn normalize<T: Real>(v: Pair<T>) -> Pair<T> {
    let n = pair_norm(&v);
    if n == T::zero() {
        return v;
    }
    apply_phase_convention([v[0] / n, v[1] / n])
}

/// Hermitian angle `acos |uᴴv| / (‖u‖‖v‖)` in radians, in `[0, π/2]`.
pub fn hermitian_angle<T: Real>(u: &Pair<T>, v: &Pair<T>) -> T {
    let denom = pair_norm(u) * pair_norm(v);
    if denom == T::zero() {
        return T::FRAC_PI_2();
    }
    (inner(u, v).norm() / denom).min(T::one()).acos()
}

/// Per-bin unit-norm steering vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector<T> {
    bins: Vec<Pair<T>>,
}

impl<T: Real> SteeringVector<T> {
    /// Normalises every bin and applies the phase convention.
    pub fn from_bins(bins: Vec<Pair<T>>) -> Result<Self> {
        if let Some(k) = bins.iter().position(|v| pair_norm(v) == T::zero() || !pair_norm(v).is_finite()) {
            return Err(Error::Config(format!("steering vector at bin {k} is zero or non-finite")));
        }
        Ok(Self { bins: bins.into_iter().map(normalize).collect() })
    }

    pub fn uniform(n_bins: usize, v: Pair<T>) -> Result<Self> {
        Self::from_bins(vec![v; n_bins])
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    #[inline]
    pub fn get(&self, k: usize) -> &Pair<T> {
        &self.bins[k]
    }

    pub fn bins(&self) -> &[Pair<T>] {
        &self.bins
    }

    /// Largest deviation of any bin's norm from one.
    pub fn max_norm_error(&self) -> T {
        self.bins
            .iter()
            .map(|v| (pair_norm(v) - T::one()).abs())
            .fold(T::zero(), T::max)
    }
}

/// Complex 2×2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2<T>(pub [[Complex<T>; 2]; 2]);

impl<T: Real> Mat2<T> {
    pub fn zero() -> Self {
        Self([[Complex::default(); 2]; 2])
    }

    pub fn scaled_identity(s: T) -> Self {
        let mut m = Self::zero();
        m.0[0][0] = Complex::new(s, T::zero());
        m.0[1][1] = Complex::new(s, T::zero());
        m
    }

    /// `x xᴴ`.
    pub fn outer(x: &Pair<T>) -> Self {
        Self([
            [x[0] * x[0].conj(), x[0] * x[1].conj()],
            [x[1] * x[0].conj(), x[1] * x[1].conj()],
        ])
    }

    pub fn trace(&self) -> T {
        self.0[0][0].re + self.0[1][1].re
    }

    pub fn mul_vec(&self, v: &Pair<T>) -> Pair<T> {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    /// Largest entry of `|M - Mᴴ|`.
    pub fn hermitian_defect(&self) -> T {
        let m = &self.0;
        (m[0][1] - m[1][0].conj())
            .norm()
            .max(m[0][0].im.abs() * T::lit(2.0))
            .max(m[1][1].im.abs() * T::lit(2.0))
    }

    pub fn frobenius(&self) -> T {
        self.0
            .iter()
            .flatten()
            .fold(T::zero(), |acc, c| acc + c.norm_sqr())
            .sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = *self;
        for r in 0..2 {
            for c in 0..2 {
                out.0[r][c] -= other.0[r][c];
            }
        }
        out
    }
}

/// Eigen-decomposition of a 2×2 Hermitian matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianEigen<T> {
    pub lambda_max: T,
    pub lambda_min: T,
    /// Unit eigenvector of `lambda_max`, phase convention applied.
    pub principal: Pair<T>,
}

/// Closed-form eigen-decomposition of the Hermitian part of `m`.
///
/// With `m = [[a, b], [b̄, d]]` the eigenvalues are
/// `(a + d)/2 ± sqrt(((a - d)/2)² + |b|²)`; the principal eigenvector is read
/// off whichever row of `m - λI` gives the better-conditioned null vector.
pub fn eig_hermitian2<T: Real>(m: &Mat2<T>) -> HermitianEigen<T> {
    let a = m.0[0][0].re;
    let d = m.0[1][1].re;
    let b = (m.0[0][1] + m.0[1][0].conj()) * T::lit(0.5);
    let mean = (a + d) * T::lit(0.5);
    let radius = ((a - d) * T::lit(0.5)).hypot(b.norm());
    let lambda_max = mean + radius;
    let lambda_min = mean - radius;

    let from_row2 = [Complex::new(lambda_max - d, T::zero()), b.conj()];
    let from_row1 = [b, Complex::new(lambda_max - a, T::zero())];
    let v = if pair_norm(&from_row2) >= pair_norm(&from_row1) { from_row2 } else { from_row1 };
    let principal = if pair_norm(&v) == T::zero() {
        // zero matrix: any unit vector is an eigenvector
        [Complex::new(T::one(), T::zero()), Complex::default()]
    } else {
        normalize(v)
    };
    HermitianEigen { lambda_max, lambda_min, principal }
}

/// Spatial covariance per bin, initialised to `ε I`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialCovariance<T> {
    bins: Vec<Mat2<T>>,
}

impl<T: Real> SpatialCovariance<T> {
    pub fn scaled_identity(n_bins: usize, eps: T) -> Self {
        Self { bins: vec![Mat2::scaled_identity(eps); n_bins] }
    }

    pub fn from_bins(bins: Vec<Mat2<T>>) -> Self {
        Self { bins }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn get(&self, k: usize) -> &Mat2<T> {
        &self.bins[k]
    }

    pub fn bins(&self) -> &[Mat2<T>] {
        &self.bins
    }
}

/// Per-bin speech-presence weight in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeechMask<T> {
    values: Vec<T>,
}

impl<T: Real> SpeechMask<T> {
    pub fn filled(n_bins: usize, v: T) -> Self {
        Self { values: vec![v.max(T::zero()).min(T::one()); n_bins] }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Delay-and-sum beamformer output `d = aᴴ x` per bin.
pub fn dsbf<T: Real>(x: &StereoSpectrum<T>, a: &SteeringVector<T>) -> Result<MonoSpectrum<T>> {
    let mut out = MonoSpectrum::zeros(x.n_bins(), x.frame_index());
    dsbf_into(x, a, &mut out)?;
    Ok(out)
}

pub fn dsbf_into<T: Real>(
    x: &StereoSpectrum<T>,
    a: &SteeringVector<T>,
    out: &mut MonoSpectrum<T>,
) -> Result<()> {
    check_len("dsbf: steering bins", x.n_bins(), a.len())?;
    out.bins.resize(x.n_bins(), Complex::default());
    out.frame_index = x.frame_index();
    for (k, o) in out.bins.iter_mut().enumerate() {
        *o = inner(a.get(k), &x.bin(k));
    }
    Ok(())
}

/// Spatial image `y_m = d · a_m` per bin and channel.
pub fn spatial_image<T: Real>(d: &MonoSpectrum<T>, a: &SteeringVector<T>) -> Result<StereoSpectrum<T>> {
    let mut out = StereoSpectrum::zeros(d.len(), d.frame_index);
    spatial_image_into(d, a, &mut out)?;
    Ok(out)
}

pub fn spatial_image_into<T: Real>(
    d: &MonoSpectrum<T>,
    a: &SteeringVector<T>,
    out: &mut StereoSpectrum<T>,
) -> Result<()> {
    check_len("spatial image: steering bins", d.len(), a.len())?;
    check_len("spatial image: output bins", d.len(), out.n_bins())?;
    out.set_frame_index(d.frame_index);
    for (k, dk) in d.bins.iter().enumerate() {
        let v = a.get(k);
        out.set_bin(k, [*dk * v[0], *dk * v[1]]);
    }
    Ok(())
}

/// `M = min(‖c‖ / ‖x‖, 1)` per bin; zero where `‖x‖ < 1e-12`.
pub fn compute_mask<T: Real>(c: &StereoSpectrum<T>, x: &StereoSpectrum<T>) -> Result<SpeechMask<T>> {
    let mut mask = SpeechMask::filled(x.n_bins(), T::zero());
    compute_mask_into(c, x, &mut mask)?;
    Ok(mask)
}

pub fn compute_mask_into<T: Real>(
    c: &StereoSpectrum<T>,
    x: &StereoSpectrum<T>,
    mask: &mut SpeechMask<T>,
) -> Result<()> {
    check_len("mask: output vs input bins", x.n_bins(), c.n_bins())?;
    mask.values.resize(x.n_bins(), T::zero());
    let floor = T::lit(1e-12);
    for (k, m) in mask.values.iter_mut().enumerate() {
        let xn = pair_norm(&x.bin(k));
        *m = if xn < floor { T::zero() } else { (pair_norm(&c.bin(k)) / xn).min(T::one()) };
    }
    Ok(())
}

pub fn check_forgetting_factor<T: Real>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha < T::one() {
        Ok(())
    } else {
        Err(Error::Config(format!("forgetting factor {alpha} outside (0, 1)")))
    }
}

/// Mask-gated recursive covariance update, in place:
/// `γ = 1 - M (1 - α)`, `R ← γ R + (1 - γ) x xᴴ`.
pub fn update_scm<T: Real>(
    r: &mut SpatialCovariance<T>,
    x: &StereoSpectrum<T>,
    mask: &SpeechMask<T>,
    alpha: T,
) -> Result<()> {
    check_forgetting_factor(alpha)?;
    check_len("scm update: covariance bins", x.n_bins(), r.len())?;
    check_len("scm update: mask bins", x.n_bins(), mask.len())?;
    let one_minus_alpha = T::one() - alpha;
    for (k, (rk, m)) in r.bins.iter_mut().zip(&mask.values).enumerate() {
        let gamma = T::one() - *m * one_minus_alpha;
        if gamma == T::one() {
            continue;
        }
        let w = T::one() - gamma;
        let xk = x.bin(k);
        for (row, xr) in rk.0.iter_mut().zip(&xk) {
            for (e, xc) in row.iter_mut().zip(&xk) {
                *e = *e * gamma + xr * xc.conj() * w;
            }
        }
    }
    Ok(())
}

/// Principal eigenvector of one bin's covariance. Near-ties (eigenvalue gap
/// at most `1e-12 · trace`) return `previous` unchanged.
pub fn principal_eigvec_bin<T: Real>(m: &Mat2<T>, previous: &Pair<T>, bin: usize) -> Result<Pair<T>> {
    let scale = m.0.iter().flatten().fold(T::zero(), |acc, c| acc + c.norm());
    let defect = m.hermitian_defect();
    if defect > T::lit(1e-9) * scale.max(T::min_positive_value()) {
        return Err(Error::NotHermitian { bin, defect: defect.to_f64_lossy() });
    }
    let eig = eig_hermitian2(m);
    if eig.lambda_max - eig.lambda_min <= T::lit(1e-12) * m.trace() {
        return Ok(*previous);
    }
    Ok(eig.principal)
}

/// Principal eigenvector of every bin, falling back to `previous` on ties.
pub fn principal_eigvec<T: Real>(
    r: &SpatialCovariance<T>,
    previous: &SteeringVector<T>,
) -> Result<SteeringVector<T>> {
    check_len("principal eigvec: previous steering", r.len(), previous.len())?;
    let bins = r
        .bins
        .iter()
        .zip(&previous.bins)
        .enumerate()
        .map(|(k, (m, prev))| principal_eigvec_bin(m, prev, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(SteeringVector { bins })
}

/// `b = [-ā₂, ā₁]`, orthogonal to `a` with the same norm.
#[inline]
pub fn orthogonal_complement_bin<T: Real>(a: &Pair<T>) -> Pair<T> {
    apply_phase_convention([-a[1].conj(), a[0].conj()])
}

pub fn orthogonal_complement<T: Real>(a: &SteeringVector<T>) -> SteeringVector<T> {
    SteeringVector { bins: a.bins.iter().map(orthogonal_complement_bin).collect() }
}

/// The fixed pair `[1, 1]/√2`, `[1, -1]/√2` on every bin.
pub fn fixed_steering_nsv<T: Real>(n_bins: usize) -> (SteeringVector<T>, SteeringVector<T>) {
    let h = T::FRAC_1_SQRT_2();
    let z = T::zero();
    let sum = [Complex::new(h, z), Complex::new(h, z)];
    let diff = [Complex::new(h, z), Complex::new(-h, z)];
    (
        SteeringVector { bins: vec![sum; n_bins] },
        SteeringVector { bins: vec![diff; n_bins] },
    )
}

/// `‖P Pᴴ − I‖_F` for `P = [a₁ a₂]`.
pub fn unitarity_defect<T: Real>(a1: &Pair<T>, a2: &Pair<T>) -> T {
    let mut m = Mat2::outer(a1);
    let m2 = Mat2::outer(a2);
    for r in 0..2 {
        for c in 0..2 {
            m.0[r][c] += m2.0[r][c];
        }
    }
    m.sub(&Mat2::scaled_identity(T::one())).frobenius()
}

/// Online steering-vector tracker for the adaptive paths.
///
/// Holds the dominant-source covariance and the current steering pair. Until
/// a bin's covariance trace exceeds ten times its initial loading the bin keeps
/// the fixed sum/difference pair.
#[derive(Debug, Clone)]
pub struct SteeringTracker<T: Real> {
    scm: SpatialCovariance<T>,
    primary: SteeringVector<T>,
    secondary: SteeringVector<T>,
    mask: SpeechMask<T>,
    alpha: T,
    cold_start_trace: T,
}

impl<T: Real> SteeringTracker<T> {
    pub const INITIAL_LOADING: f64 = 1e-6;

    pub fn new(n_bins: usize, alpha: T) -> Result<Self> {
        check_forgetting_factor(alpha)?;
        let eps = T::lit(Self::INITIAL_LOADING);
        let (primary, secondary) = fixed_steering_nsv(n_bins);
        Ok(Self {
            scm: SpatialCovariance::scaled_identity(n_bins, eps),
            primary,
            secondary,
            mask: SpeechMask::filled(n_bins, T::zero()),
            alpha,
            cold_start_trace: T::lit(10.0) * eps,
        })
    }

    pub fn primary(&self) -> &SteeringVector<T> {
        &self.primary
    }

    pub fn secondary(&self) -> &SteeringVector<T> {
        &self.secondary
    }

    pub fn covariance(&self) -> &SpatialCovariance<T> {
        &self.scm
    }

    /// Mask used by the most recent update.
    pub fn last_mask(&self) -> &SpeechMask<T> {
        &self.mask
    }

    /// Fold one processed frame (`output` against its `input`) into the
    /// covariance and refresh both steering vectors.
    pub fn update(&mut self, output: &StereoSpectrum<T>, input: &StereoSpectrum<T>) -> Result<()> {
        compute_mask_into(output, input, &mut self.mask)?;
        update_scm(&mut self.scm, input, &self.mask, self.alpha)?;
        let (nsv1, _) = fixed_steering_nsv::<T>(1);
        for k in 0..self.scm.len() {
            let m = &self.scm.bins[k];
            let a1 = if m.trace() > self.cold_start_trace {
                principal_eigvec_bin(m, &self.primary.bins[k], k)?
            } else {
                nsv1.bins[0]
            };
            self.primary.bins[k] = a1;
            self.secondary.bins[k] = orthogonal_complement_bin(&a1);
        }
        Ok(())
    }
}

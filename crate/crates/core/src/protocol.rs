//! Physical protocol description: the Gaussian channel, the
//! prepare-and-measure to entanglement-based mapping, Eve's purification and
//! the no-post-selection baseline key rates.

use crate::error::{Error, Result};
use crate::gaussian::{Quadrature, TwoModeSymmetricCM};
use crate::keyrate::KeyRateResult;
use crate::scalar::{half, two, Scalar};

/// Reconciliation direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Error correction referenced to Alice's data.
    Direct,
    /// Error correction referenced to Bob's data.
    Reverse,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::Direct => write!(f, "dr"),
            Direction::Reverse => write!(f, "rr"),
        }
    }
}

/// Noisy Gaussian link, parameterised by transmission T in (0, 1] and
/// input-referred excess noise xi >= 0 in shot-noise units. The output
/// excess noise is T*xi, matching b = T V_A + T xi + 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianChannel<T> {
    transmission: T,
    excess_noise: T,
}

impl<T: Scalar> GaussianChannel<T> {
    pub fn new(transmission: T, excess_noise: T) -> Result<Self> {
        if !(transmission > T::zero() && transmission <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "transmission must lie in (0, 1], got {transmission}"
            )));
        }
        if excess_noise < T::zero() || !excess_noise.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "excess noise must be finite and >= 0, got {excess_noise}"
            )));
        }
        Ok(GaussianChannel {
            transmission,
            excess_noise,
        })
    }

    /// Channel from a loss figure in dB: T = 10^(-dB/10).
    pub fn from_loss_db(loss_db: T, excess_noise: T) -> Result<Self> {
        let t = T::of(10.0).powf(-loss_db / T::of(10.0));
        Self::new(t, excess_noise)
    }

    pub fn transmission(&self) -> T {
        self.transmission
    }

    pub fn excess_noise(&self) -> T {
        self.excess_noise
    }

    pub fn loss_db(&self) -> T {
        -T::of(10.0) * self.transmission.log10()
    }
}

/// Protocol-level inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams<T> {
    pub modulation_variance: T,
    pub beta: T,
    pub direction: Direction,
    /// Deterministic noise Bob adds to his data before reconciliation
    /// (baseline only). Zero by default; its optimisation is out of scope.
    pub trusted_noise: T,
}

impl<T: Scalar> ProtocolParams<T> {
    pub fn new(modulation_variance: T, beta: T, direction: Direction) -> Result<Self> {
        if !(modulation_variance > T::zero()) || !modulation_variance.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "modulation variance must be > 0, got {modulation_variance}"
            )));
        }
        if !(beta > T::zero() && beta <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in (0, 1], got {beta}"
            )));
        }
        Ok(ProtocolParams {
            modulation_variance,
            beta,
            direction,
            trusted_noise: T::zero(),
        })
    }

    pub fn with_trusted_noise(mut self, noise: T) -> Result<Self> {
        if noise < T::zero() || !noise.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "trusted noise must be finite and >= 0, got {noise}"
            )));
        }
        self.trusted_noise = noise;
        Ok(self)
    }
}

/// Variance of the EPR state Eve uses to purify the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvePurification<T> {
    pub epr_variance: T,
}

/// Covariance matrix shared by Alice and Bob after the channel:
/// a = V_A + 1, b = T V_A + T xi + 1, c = sqrt(T (V_A^2 + 2 V_A)).
pub fn channel_output_cm<T: Scalar>(
    v_a: T,
    ch: &GaussianChannel<T>,
) -> Result<TwoModeSymmetricCM<T>> {
    if !(v_a > T::zero()) || !v_a.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "modulation variance must be > 0, got {v_a}"
        )));
    }
    let t = ch.transmission();
    let xi = ch.excess_noise();
    let a = v_a + T::one();
    let b = t * v_a + t * xi + T::one();
    let c = (t * (v_a * v_a + two::<T>() * v_a)).sqrt();
    TwoModeSymmetricCM::new(a, b, c)
}

/// Bob's marginal variance V_B = T V_A + T xi + 1.
pub fn bob_variance<T: Scalar>(v_a: T, ch: &GaussianChannel<T>) -> T {
    ch.transmission() * v_a + ch.transmission() * ch.excess_noise() + T::one()
}

/// Eve's purifying EPR variance N_E = (1 - T + T xi) / (1 - T). Degenerates
/// at T = 1, where the channel needs no purification.
pub fn eve_epr_variance<T: Scalar>(ch: &GaussianChannel<T>) -> Result<EvePurification<T>> {
    let t = ch.transmission();
    if t >= T::one() {
        return Err(Error::InvalidParameter(
            "lossless channel has no finite Eve purification; treat T = 1 directly".into(),
        ));
    }
    let xi = ch.excess_noise();
    Ok(EvePurification {
        epr_variance: (T::one() - t + t * xi) / (T::one() - t),
    })
}

/// Effective EPR entanglement parameter chi = sqrt(V_A / (V_A + 2)).
pub fn chi_from_va<T: Scalar>(v_a: T) -> Result<T> {
    if v_a < T::zero() || !v_a.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "modulation variance must be >= 0, got {v_a}"
        )));
    }
    Ok((v_a / (v_a + two::<T>())).sqrt())
}

/// Inverse of [`chi_from_va`]: V_A = 2 chi^2 / (1 - chi^2).
pub fn va_from_chi<T: Scalar>(chi: T) -> Result<T> {
    if chi < T::zero() || chi >= T::one() || !chi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "entanglement parameter must lie in [0, 1), got {chi}"
        )));
    }
    Ok(two::<T>() * chi * chi / (T::one() - chi * chi))
}

/// No-post-selection key rate for the coherent-state homodyne protocol:
/// K = beta * I(a:b) - I(E:X) with I(a:b) = (1/2) log2(1 + SNR),
/// SNR = T V_A / (1 + T xi + trusted_noise), and the Holevo term from the
/// Gaussian extremality bound on the shared covariance matrix.
pub fn baseline_keyrate<T: Scalar>(
    params: &ProtocolParams<T>,
    ch: &GaussianChannel<T>,
) -> Result<KeyRateResult<T>> {
    let v_a = params.modulation_variance;
    let vn = params.trusted_noise;
    let gamma = channel_output_cm(v_a, ch)?;
    let t = ch.transmission();
    let xi = ch.excess_noise();
    let snr = t * v_a / (T::one() + t * xi + vn);
    let mi = half::<T>() * (T::one() + snr).log2();

    let cm = gamma.to_cm();
    let s_ab = cm.von_neumann_entropy()?;
    let s_cond = match params.direction {
        Direction::Direct => cm.condition_on_heterodyne(0)?.von_neumann_entropy()?,
        Direction::Reverse => {
            // Bob's trusted noise enters his measured variable only; model it
            // as a thermal contribution on his mode before the homodyne.
            let noisy = TwoModeSymmetricCM::new(gamma.a, gamma.b + vn, gamma.c)?;
            noisy
                .to_cm()
                .condition_on_homodyne(1, Quadrature::X)?
                .von_neumann_entropy()?
        }
    };
    let holevo = clamp_holevo(s_ab - s_cond)?;
    KeyRateResult::from_parts(mi, holevo, T::one(), params.beta, params.direction, None)
}

/// Holevo quantities are non-negative; absorb numerical dust and reject
/// anything genuinely negative.
pub(crate) fn clamp_holevo<T: Scalar>(raw: T) -> Result<T> {
    let slack = T::of(1e-6);
    if raw < -slack {
        return Err(Error::NumericalFailure(format!(
            "Holevo bound came out negative: {raw}"
        )));
    }
    Ok(raw.max(T::zero()))
}

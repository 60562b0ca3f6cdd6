//! The Gaussian post-selection filter, the joint measurement-outcome
//! distribution, and the numerical integration that produces post-selected
//! moments, the kept fraction and the Shannon mutual information.
//!
//! This module owns the unit map between measurement statistics and
//! covariance-matrix entries: Alice's heterodyne outcomes have variance
//! (a + 1) / 2, Bob's homodyne outcomes have variance b, and the outcome
//! correlation equals c / sqrt(2) (all in shot-noise units). Everything that
//! touches sample-level statistics imports this map instead of restating it.

use crate::error::{Error, Result};
use crate::gaussian::TwoModeSymmetricCM;
use crate::protocol::GaussianChannel;
use crate::quadrature::{integrate, QuadOptions};
use crate::scalar::{half, two, Scalar};

/// Joint distribution of Alice's heterodyne x-outcome and Bob's homodyne
/// x-outcome for modulation variance V_A over a channel (T, xi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointDistribution<T> {
    v_a: T,
    transmission: T,
    excess_noise: T,
}

impl<T: Scalar> JointDistribution<T> {
    pub fn new(v_a: T, ch: &GaussianChannel<T>) -> Result<Self> {
        if !(v_a > T::zero()) || !v_a.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "modulation variance must be > 0, got {v_a}"
            )));
        }
        Ok(JointDistribution {
            v_a,
            transmission: ch.transmission(),
            excess_noise: ch.excess_noise(),
        })
    }

    pub fn v_a(&self) -> T {
        self.v_a
    }

    /// Variance of Alice's heterodyne outcome, (V_A + 2) / 2 = (a + 1) / 2.
    pub fn alice_variance(&self) -> T {
        (self.v_a + two::<T>()) * half()
    }

    /// Variance of Bob's homodyne outcome, b = T V_A + T xi + 1.
    pub fn bob_variance(&self) -> T {
        self.transmission * (self.v_a + self.excess_noise) + T::one()
    }

    /// Conditional mean coefficient k in x_B | x_A ~ N(k x_A, .), equal to
    /// sqrt(2 T V_A / (V_A + 2)) = sqrt(2) c / (a + 1).
    pub fn conditional_coeff(&self) -> T {
        (two::<T>() * self.transmission * self.v_a / (self.v_a + two::<T>())).sqrt()
    }

    /// Conditional variance of Bob's outcome given Alice's, 1 + T xi.
    pub fn conditional_variance(&self) -> T {
        T::one() + self.transmission * self.excess_noise
    }

    /// Alice's marginal density.
    pub fn alice_marginal(&self, x_a: T) -> T {
        gauss_pdf(x_a, self.alice_variance())
    }

    /// Bob's marginal density.
    pub fn bob_marginal(&self, x_b: T) -> T {
        gauss_pdf(x_b, self.bob_variance())
    }

    /// Joint density P(x_A, x_B).
    pub fn density(&self, x_a: T, x_b: T) -> T {
        let resid = x_b - self.conditional_coeff() * x_a;
        self.alice_marginal(x_a) * gauss_pdf(resid, self.conditional_variance())
    }
}

fn gauss_pdf<T: Scalar>(x: T, variance: T) -> T {
    let norm = (two::<T>() * T::PI() * variance).sqrt();
    (-x * x / (two::<T>() * variance)).exp() / norm
}

/// Gaussian post-selection filter: re-weight Bob's outcome distribution
/// toward a Gaussian of target variance V_PS, with the re-weighting active
/// only inside the window |x| < Delta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostSelectionFilter<T> {
    v_ps: T,
    cutoff: T,
    v_b: T,
}

impl<T: Scalar> PostSelectionFilter<T> {
    pub fn new(v_ps: T, cutoff: T, v_b: T) -> Result<Self> {
        if !(v_b >= T::one() - T::of(1e-9)) || !v_b.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "pre-filter variance must be >= 1, got {v_b}"
            )));
        }
        if !(v_ps > v_b) || !v_ps.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "target variance must exceed the pre-filter variance, got V_PS = {v_ps} <= V_B = {v_b}"
            )));
        }
        if cutoff < T::zero() || !cutoff.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cutoff must be finite and >= 0, got {cutoff}"
            )));
        }
        Ok(PostSelectionFilter { v_ps, cutoff, v_b })
    }

    pub fn v_ps(&self) -> T {
        self.v_ps
    }

    pub fn cutoff(&self) -> T {
        self.cutoff
    }

    pub fn v_b(&self) -> T {
        self.v_b
    }

    /// Acceptance probability of an outcome x: the unnormalised filter
    /// bracket 1 + (w(x)/w(Delta) - 1) [|x| < Delta], which lies in (0, 1].
    /// Inside the window this is exp(((Delta^2 - x^2)/2)(1/V_PS - 1/V_B));
    /// the weight w(x) = sqrt(V_B/V_PS) exp(-(x^2/2)(1/V_PS - 1/V_B)) is the
    /// function that re-shapes N(0, V_B) into N(0, V_PS).
    pub fn acceptance(&self, x: T) -> T {
        if x.abs() >= self.cutoff {
            return T::one();
        }
        let slope = T::one() / self.v_ps - T::one() / self.v_b;
        (((self.cutoff * self.cutoff - x * x) * half()) * slope).exp()
    }
}

/// Free-function form of [`PostSelectionFilter::acceptance`].
pub fn acceptance_probability<T: Scalar>(x: T, f: &PostSelectionFilter<T>) -> T {
    f.acceptance(x)
}

/// Free-function form of [`JointDistribution::density`].
pub fn joint_density<T: Scalar>(x_a: T, x_b: T, jd: &JointDistribution<T>) -> T {
    jd.density(x_a, x_b)
}

/// Post-selected second moments, already converted to covariance-matrix
/// entries of the symmetric two-mode form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilteredMoments<T> {
    /// Fraction of the data kept, in (0, 1].
    pub keep_fraction: T,
    /// Post-selected Alice variance a = V_A^PS + 1.
    pub var_a: T,
    /// Post-selected Bob variance b.
    pub var_b: T,
    /// Post-selected correlation c.
    pub cov_ab: T,
    /// Effective modulation variance V_A^PS = var_a - 1.
    pub v_a_ps: T,
}

impl<T: Scalar> FilteredMoments<T> {
    /// The post-selected covariance matrix in symmetric form.
    pub fn gamma(&self) -> Result<TwoModeSymmetricCM<T>> {
        TwoModeSymmetricCM::new(self.var_a, self.var_b, self.cov_ab)
    }
}

/// Integration half-width: the box [-L, L]^2 with
/// L = 8 sqrt(max(V_A + 2, V_PS, V_B)) covers every involved Gaussian scale.
pub fn integration_halfwidth<T: Scalar>(jd: &JointDistribution<T>, f: &PostSelectionFilter<T>) -> T {
    let scale = (jd.v_a() + two::<T>()).max(f.v_ps()).max(f.v_b());
    T::of(8.0) * scale.sqrt()
}

fn check_filter_matches<T: Scalar>(
    jd: &JointDistribution<T>,
    f: &PostSelectionFilter<T>,
) -> Result<()> {
    let vb = jd.bob_variance();
    if (f.v_b() - vb).abs() > T::of(1e-6) * vb.max(T::one()) {
        return Err(Error::InvalidParameter(format!(
            "filter context V_B = {} does not match the channel's V_B = {vb}",
            f.v_b()
        )));
    }
    Ok(())
}

fn inner_breaks<T: Scalar>(f: &PostSelectionFilter<T>, l: T) -> Vec<T> {
    if f.cutoff() > T::zero() && f.cutoff() < l {
        vec![-f.cutoff(), f.cutoff()]
    } else {
        Vec::new()
    }
}

/// Kept fraction and post-selected second moments of
/// P_PS = P * acceptance / keep, returned as covariance-matrix entries.
/// Adaptive 2-D quadrature on [-L, L]^2 at relative tolerance `tol`.
pub fn filtered_moments<T: Scalar>(
    jd: &JointDistribution<T>,
    f: &PostSelectionFilter<T>,
    tol: T,
) -> Result<FilteredMoments<T>> {
    if !(tol > T::zero()) {
        return Err(Error::InvalidParameter("tolerance must be > 0".into()));
    }
    check_filter_matches(jd, f)?;
    let l = integration_halfwidth(jd, f);
    let breaks = inner_breaks(f, l);

    // Outer axis x_B (carries the filter kink), inner axis x_A.
    let moment = |weight: &dyn Fn(T, T) -> T, abs_tol: T| -> Result<T> {
        let inner_opts = QuadOptions::with_rel_tol(tol * T::of(0.1));
        let failure = std::cell::RefCell::new(None::<Error>);
        let result = integrate(
            |x_b: T| {
                let acc = f.acceptance(x_b);
                if acc == T::zero() {
                    return T::zero();
                }
                let inner = integrate(
                    |x_a: T| jd.density(x_a, x_b) * weight(x_a, x_b),
                    -l,
                    l,
                    &[],
                    &inner_opts,
                );
                match inner {
                    Ok(v) => acc * v,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        T::zero()
                    }
                }
            },
            -l,
            l,
            &breaks,
            &QuadOptions::with_rel_tol(tol).with_abs_tol(abs_tol),
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        result
    };

    let pure_rel = T::of(1e-300);
    let keep = moment(&|_, _| T::one(), pure_rel)?;
    if !(keep > T::of(1e-280)) {
        return Err(Error::IntegrationFailure(format!(
            "kept fraction underflowed ({keep:?}); the cutoff is too aggressive"
        )));
    }
    let keep = keep.min(T::one());
    let m_aa = moment(&|xa, _| xa * xa, pure_rel)? / keep;
    let m_bb = moment(&|_, xb| xb * xb, pure_rel)? / keep;
    // the covariance can be legitimately near zero (uncorrelated limit);
    // bound its absolute error by the variance scale instead
    let cov_abs_tol = tol * (m_aa * m_bb).sqrt() * keep;
    let m_ab = moment(&|xa, xb| xa * xb, cov_abs_tol)? / keep;

    // unit map: measurement moments -> CM entries
    let var_a = two::<T>() * m_aa - T::one();
    let var_b = m_bb;
    let cov_ab = two::<T>().sqrt() * m_ab;
    if cov_ab * cov_ab > var_a * var_b * (T::one() + T::of(1e-6)) {
        return Err(Error::NumericalFailure(
            "post-selected moments violate the covariance bound".into(),
        ));
    }
    Ok(FilteredMoments {
        keep_fraction: keep,
        var_a,
        var_b,
        cov_ab,
        v_a_ps: var_a - T::one(),
    })
}

/// Shannon mutual information of the post-selected outcome distribution,
/// I(a:b) = integral of P_PS log2(P_PS / (P_PS,A P_PS,B)) in bits. Bob's
/// post-selected marginal is P_B * acceptance / keep in closed form; Alice's
/// marginal is obtained by one-dimensional quadrature at each outer node.
pub fn shannon_mi_filtered<T: Scalar>(
    jd: &JointDistribution<T>,
    f: &PostSelectionFilter<T>,
    tol: T,
) -> Result<T> {
    if !(tol > T::zero()) {
        return Err(Error::InvalidParameter("tolerance must be > 0".into()));
    }
    check_filter_matches(jd, f)?;
    let l = integration_halfwidth(jd, f);
    let breaks = inner_breaks(f, l);
    let fine = QuadOptions {
        rel_tol: tol * T::of(0.1),
        abs_tol: T::of(1e-13),
        max_intervals: 4096,
    };

    // keep fraction and the conditional-acceptance marginals are positive and
    // smooth: pure relative control works at any magnitude
    let positive = QuadOptions::with_rel_tol(tol * T::of(0.1));
    let keep = integrate(
        |x: T| jd.bob_marginal(x) * f.acceptance(x),
        -l,
        l,
        &breaks,
        &positive,
    )?;
    if !(keep > T::of(1e-280)) {
        return Err(Error::IntegrationFailure(
            "kept fraction underflowed in the mutual-information integral".into(),
        ));
    }

    let tiny = T::of(1e-300);
    let failure = std::cell::RefCell::new(None::<Error>);
    let outer = |x_a: T| -> T {
        // Alice's unnormalised post-selected marginal density at x_a
        let k = jd.conditional_coeff();
        let vc = jd.conditional_variance();
        let q_cond = match integrate(
            |x_b: T| gauss_pdf(x_b - k * x_a, vc) * f.acceptance(x_b),
            -l,
            l,
            &breaks,
            &positive,
        ) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                return T::zero();
            }
        };
        let q_a = jd.alice_marginal(x_a) * q_cond;
        if q_a < tiny {
            return T::zero();
        }
        match integrate(
            |x_b: T| {
                let p = jd.density(x_a, x_b);
                let p_ps = p * f.acceptance(x_b) / keep;
                if p_ps < tiny {
                    return T::zero();
                }
                // acceptance cancels between P_PS and the marginals
                let ratio = p * keep / (q_a * jd.bob_marginal(x_b));
                if ratio <= T::zero() {
                    return T::zero();
                }
                p_ps * ratio.log2()
            },
            -l,
            l,
            &breaks,
            &fine,
        ) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                T::zero()
            }
        }
    };

    // mutual information is measured in bits; 1e-10 bits is far below any
    // tolerance in use and keeps the uncorrelated limit from over-refining
    let outer_opts = QuadOptions::with_rel_tol(tol).with_abs_tol(T::of(1e-10));
    let mi = integrate(outer, -l, l, &[], &outer_opts)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    // the integral is non-negative up to quadrature noise
    Ok(mi.max(T::zero()))
}

//! The equivalent entanglement-based construction behind the classical
//! filter: the virtual noiseless-linear-amplifier gain, the effective channel
//! it induces, and the Gaussian operations inside Bob's station (two-mode
//! squeezer plus EPR-ancilla beamsplitter) solved from measured covariances.

use crate::error::{Error, Result};
use crate::gaussian::{CovarianceMatrix, TwoModeSymmetricCM};
use crate::protocol::{channel_output_cm, chi_from_va, va_from_chi, GaussianChannel};
use crate::scalar::{half, two, Scalar};

/// Intensity gain of the virtual noiseless linear amplifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlaGain<T>(T);

impl<T: Scalar> NlaGain<T> {
    pub fn new(g: T) -> Result<Self> {
        if !(g >= T::one()) || !g.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "NLA gain must be finite and >= 1, got {g}"
            )));
        }
        Ok(NlaGain(g))
    }

    pub fn get(&self) -> T {
        self.0
    }
}

/// Channel parameters of the effective protocol after the virtual NLA:
/// stronger entanglement through a better channel with more excess noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveChannel<T> {
    pub chi_eff: T,
    pub t_eff: T,
    pub xi_eff: T,
    pub v_a_eff: T,
}

/// Gaussian operations inside Bob's station that, together with the NLA,
/// reproduce the post-selected covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BobStationParams<T> {
    /// Two-mode squeezer parameter, >= 1.
    pub eta: T,
    /// Beamsplitter transmission toward the EPR ancilla, in (0, 1].
    pub t_b: T,
    /// Variance of the injected EPR pair, >= 1.
    pub n_b: T,
}

/// Solve the NLA gain from the modulation variance before and after
/// post-selection: g = 1 + 2 (V* - V_A) / (T (V_A (2 + V* - xi) + V* xi)).
pub fn solve_gain<T: Scalar>(
    v_a: T,
    v_a_ps: T,
    ch: &GaussianChannel<T>,
) -> Result<NlaGain<T>> {
    if !(v_a > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "modulation variance must be > 0, got {v_a}"
        )));
    }
    let slack = T::of(1e-12) * v_a.max(T::one());
    if v_a_ps < v_a - slack {
        return Err(Error::InvalidParameter(format!(
            "post-selected modulation variance {v_a_ps} below the input {v_a} would need g < 1"
        )));
    }
    let v_star = v_a_ps.max(v_a);
    let t = ch.transmission();
    let xi = ch.excess_noise();
    let den = t * (v_a * (two::<T>() + v_star - xi) + v_star * xi);
    if !(den > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "gain denominator is non-positive ({den}); parameters outside the invertible regime"
        )));
    }
    NlaGain::new(T::one() + two::<T>() * (v_star - v_a) / den)
}

/// Effective parameters (chi, T, xi) of the protocol seen after an NLA of
/// gain g acting through the channel.
pub fn effective_params<T: Scalar>(
    v_a: T,
    ch: &GaussianChannel<T>,
    gain: &NlaGain<T>,
) -> Result<EffectiveChannel<T>> {
    let g = gain.get();
    let t = ch.transmission();
    let xi = ch.excess_noise();
    let chi = chi_from_va(v_a)?;

    let d2 = (g - T::one()) * t * xi - two::<T>();
    let d1 = (g - T::one()) * t * (xi - two::<T>()) - two::<T>();
    if d2 >= T::zero() || d1 >= T::zero() {
        return Err(Error::UnphysicalEffectiveChannel(format!(
            "gain g = {g} lies beyond the pole of the effective channel"
        )));
    }
    let chi_sq_factor = T::one() + two::<T>() * t * (T::one() - g) / d2;
    if chi_sq_factor < T::zero() {
        return Err(Error::UnphysicalEffectiveChannel(format!(
            "effective entanglement parameter is complex at g = {g}"
        )));
    }
    let chi_eff = chi_sq_factor.sqrt() * chi;
    let t_eff = T::of(4.0) * g * t / (d1 * d2);
    let xi_eff = xi - xi * t * (xi - two::<T>()) * (g - T::one()) * half();

    let tol = T::of(1e-12);
    if !(chi_eff >= T::zero() && chi_eff < T::one()) {
        return Err(Error::UnphysicalEffectiveChannel(format!(
            "effective chi = {chi_eff} outside [0, 1); gain exceeds what the channel supports"
        )));
    }
    if !(t_eff > T::zero() && t_eff <= T::one() + tol) {
        return Err(Error::UnphysicalEffectiveChannel(format!(
            "effective transmission = {t_eff} outside (0, 1]"
        )));
    }
    if xi_eff < -tol {
        return Err(Error::UnphysicalEffectiveChannel(format!(
            "effective excess noise = {xi_eff} negative"
        )));
    }
    Ok(EffectiveChannel {
        chi_eff,
        t_eff: t_eff.min(T::one()),
        xi_eff: xi_eff.max(T::zero()),
        v_a_eff: va_from_chi(chi_eff)?,
    })
}

/// Covariance matrix of the state after the virtual NLA: the channel output
/// of the effective protocol.
pub fn gamma_nla<T: Scalar>(
    v_a: T,
    ch: &GaussianChannel<T>,
    gain: &NlaGain<T>,
) -> Result<TwoModeSymmetricCM<T>> {
    let eff = effective_params(v_a, ch, gain)?;
    let eff_ch = GaussianChannel::new(eff.t_eff, eff.xi_eff)?;
    channel_output_cm(eff.v_a_eff, &eff_ch)
}

/// Largest gain for which the effective channel stays physical, found by
/// bisection on the validity boundary to absolute tolerance 1e-9.
pub fn max_gain<T: Scalar>(v_a: T, ch: &GaussianChannel<T>) -> Result<T> {
    let valid = |g: T| -> bool {
        NlaGain::new(g)
            .and_then(|gain| effective_params(v_a, ch, &gain))
            .is_ok()
    };
    if !valid(T::one()) {
        return Err(Error::InvalidParameter(
            "effective channel invalid even at unit gain".into(),
        ));
    }
    let mut lo = T::one();
    let mut hi = two::<T>();
    let cap = T::of(1e12);
    while valid(hi) {
        lo = hi;
        hi = hi * two::<T>();
        if hi > cap {
            return Ok(cap);
        }
    }
    let tol = T::of(1e-9);
    while hi - lo > tol {
        let mid = (lo + hi) * half();
        if valid(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn station_relations<T: Scalar>(
    g_nla: &TwoModeSymmetricCM<T>,
    g_ps: &TwoModeSymmetricCM<T>,
) -> Result<(T, T)> {
    if (g_ps.a - g_nla.a).abs() > T::of(1e-6) {
        return Err(Error::InvalidParameter(format!(
            "gain not matched: a_PS = {} vs a_NLA = {}",
            g_ps.a, g_nla.a
        )));
    }
    let c_floor = T::of(1e-9);
    if g_nla.c.abs() < c_floor || g_ps.c.abs() < c_floor {
        return Err(Error::InvalidParameter(
            "station solve requires non-zero correlations".into(),
        ));
    }
    let ratio = g_ps.c / g_nla.c;
    let r = ratio * ratio;
    // composing S(eta) then BS(T_B) gives
    //   b_PS = (c_PS^2/c_NLA^2)(1 + b_NLA) - [T_B (N_B + 1) - N_B]
    // so the bracket beta0 below is fixed by the measured entries.
    let beta0 = r * (T::one() + g_nla.b) - g_ps.b;
    Ok((r, beta0))
}

/// One member of the degenerate (eta, T_B, N_B) family at a chosen T_B.
pub fn station_family_member<T: Scalar>(
    g_nla: &TwoModeSymmetricCM<T>,
    g_ps: &TwoModeSymmetricCM<T>,
    t_b: T,
) -> Result<BobStationParams<T>> {
    let (r, beta0) = station_relations(g_nla, g_ps)?;
    // feasibility slack scales with the covariance entries: the inputs come
    // from quadrature with ~1e-8 relative noise
    let tol = T::of(1e-6) * (T::one() + g_nla.b.abs());
    if !(t_b > T::zero() && t_b <= T::one()) {
        return Err(Error::InvalidParameter(format!(
            "T_B must lie in (0, 1], got {t_b}"
        )));
    }
    let eta = r / t_b;
    if eta < T::one() - tol {
        return Err(Error::NoFeasibleSolution(format!(
            "requested T_B = {t_b} forces eta = {eta} < 1"
        )));
    }
    let n_b = if (T::one() - t_b).abs() < T::of(1e-12) {
        if (beta0 - T::one()).abs() > tol {
            return Err(Error::NoFeasibleSolution(
                "T_B = 1 is only consistent when the noise bracket equals 1".into(),
            ));
        }
        T::one()
    } else {
        (t_b - beta0) / (T::one() - t_b)
    };
    if n_b < T::one() - tol {
        return Err(Error::NoFeasibleSolution(format!(
            "requested T_B = {t_b} forces N_B = {n_b} < 1"
        )));
    }
    Ok(BobStationParams {
        eta: eta.max(T::one()),
        t_b,
        n_b: n_b.max(T::one()),
    })
}

/// Solve Bob's station from the covariance matrices before and after
/// post-selection. The family is degenerate; the canonical representative
/// injects the least ancilla noise: N_B = 1 at T_B = (1 + beta0)/2 whenever
/// that transmission is feasible, otherwise (beta0 <= -1, where the infimum
/// is not attained) the deterministic fallback T_B = min(R, 1)/2.
pub fn solve_bob_station<T: Scalar>(
    g_nla: &TwoModeSymmetricCM<T>,
    g_ps: &TwoModeSymmetricCM<T>,
) -> Result<BobStationParams<T>> {
    let (r, beta0) = station_relations(g_nla, g_ps)?;
    let tol = T::of(1e-6) * (T::one() + g_nla.b.abs());
    let t_hi = r.min(T::one());
    if beta0 > T::one() + tol {
        return Err(Error::NoFeasibleSolution(format!(
            "noise bracket {beta0} > 1 would need T_B > 1"
        )));
    }
    let t_b = if beta0 > -T::one() + tol {
        // minimal noise: N_B = 1 exactly
        let t_star = (T::one() + beta0.min(T::one())) * half();
        if t_star > t_hi + tol {
            return Err(Error::NoFeasibleSolution(format!(
                "minimal-noise transmission {t_star} exceeds the eta >= 1 bound {t_hi}"
            )));
        }
        t_star.min(t_hi)
    } else {
        t_hi * half()
    };
    station_family_member(g_nla, g_ps, t_b.min(T::one()).max(T::of(1e-12)))
}

/// Compose Bob's station forward: gamma_NLA (modes A, B) + vacuum D +
/// EPR(N_B) on (F, G), apply the squeezer S(eta) on (B, D) and the
/// beamsplitter BS(T_B) on the (F, B) pair, returning the full five-mode
/// state (A, B, D, F, G). Tracing D, F, G recovers the post-selected
/// two-mode state.
pub fn compose_bob_station<T: Scalar>(
    g_nla: &TwoModeSymmetricCM<T>,
    station: &BobStationParams<T>,
) -> Result<CovarianceMatrix<T>> {
    let full = g_nla
        .to_cm()
        .tensor(&CovarianceMatrix::vacuum(1))
        .tensor(&CovarianceMatrix::epr(station.n_b)?);
    full.apply_two_mode_squeezer(1, 2, station.eta)?
        .apply_beamsplitter(3, 1, station.t_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn ch(t: f64, xi: f64) -> GaussianChannel<f64> {
        GaussianChannel::new(t, xi).unwrap()
    }

    #[test]
    fn gain_is_unity_without_post_selection() {
        let g = solve_gain(2.0_f64, 2.0, &ch(0.5, 0.1)).unwrap();
        assert_abs_diff_eq!(g.get(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn gain_hand_value() {
        let g = solve_gain(1.0_f64, 2.0, &ch(0.5, 0.0)).unwrap();
        assert_abs_diff_eq!(g.get(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn gain_rejects_shrinking_modulation() {
        assert!(solve_gain(2.0_f64, 1.5, &ch(0.5, 0.1)).is_err());
    }

    #[test]
    fn effective_params_identity_at_unit_gain() {
        let (v_a, t, xi) = (3.0_f64, 0.45, 0.17);
        let eff = effective_params(v_a, &ch(t, xi), &NlaGain::new(1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(eff.t_eff, t, epsilon = 1e-12);
        assert_abs_diff_eq!(eff.xi_eff, xi, epsilon = 1e-12);
        assert_abs_diff_eq!(eff.chi_eff, chi_from_va(v_a).unwrap(), epsilon = 1e-12);
        assert_abs_diff_eq!(eff.v_a_eff, v_a, epsilon = 1e-12);
    }

    #[test]
    fn effective_transmission_hand_value() {
        let eff = effective_params(1.0_f64, &ch(0.5, 0.0), &NlaGain::new(2.0).unwrap()).unwrap();
        assert_abs_diff_eq!(eff.t_eff, 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eff.xi_eff, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn noiseless_channel_keeps_zero_noise() {
        for g in [1.0, 1.5, 2.5_f64] {
            let eff = effective_params(2.0_f64, &ch(0.4, 0.0), &NlaGain::new(g).unwrap()).unwrap();
            assert_abs_diff_eq!(eff.xi_eff, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn gain_inversion_round_trip() {
        let (v_a, t, xi) = (2.0_f64, 0.5, 0.05);
        let channel = ch(t, xi);
        for factor in [1.0, 1.5, 3.0] {
            let target = v_a * factor;
            let g = solve_gain(v_a, target, &channel).unwrap();
            let eff = effective_params(v_a, &channel, &g).unwrap();
            assert_abs_diff_eq!(eff.v_a_eff, target, epsilon = 1e-10);
        }
    }

    #[test]
    fn gamma_nla_consistency() {
        let (v_a, t, xi) = (3.0_f64, 0.6, 0.08);
        let channel = ch(t, xi);
        let unit = gamma_nla(v_a, &channel, &NlaGain::new(1.0).unwrap()).unwrap();
        let direct = channel_output_cm(v_a, &channel).unwrap();
        assert_abs_diff_eq!(unit.a, direct.a, epsilon = 1e-12);
        assert_abs_diff_eq!(unit.b, direct.b, epsilon = 1e-12);
        assert_abs_diff_eq!(unit.c, direct.c, epsilon = 1e-12);

        let target = 1.8 * v_a;
        let g = solve_gain(v_a, target, &channel).unwrap();
        let after = gamma_nla(v_a, &channel, &g).unwrap();
        assert_abs_diff_eq!(after.a, target + 1.0, epsilon = 1e-9);
    }

    #[test]
    fn effective_params_physical_up_to_max_gain() {
        let (v_a, t, xi) = (2.0_f64, 0.4, 0.1);
        let channel = ch(t, xi);
        let g_max = max_gain(v_a, &channel).unwrap();
        assert!(g_max > 1.0);
        for i in 0..20 {
            let g = 1.0 + (g_max - 1.0 - 1e-6) * i as f64 / 19.0;
            let gm = gamma_nla(v_a, &channel, &NlaGain::new(g).unwrap()).unwrap();
            assert!(gm.is_physical(), "gamma_NLA must stay physical at g = {g}");
        }
        assert!(effective_params(v_a, &channel, &NlaGain::new(g_max + 1e-3).unwrap()).is_err());
    }

    #[test]
    fn v_a_eff_monotone_in_gain() {
        let (v_a, t, xi) = (2.0_f64, 0.45, 0.06);
        let channel = ch(t, xi);
        let g_max = max_gain(v_a, &channel).unwrap();
        let mut prev = v_a;
        for i in 1..24 {
            let g = 1.0 + (g_max - 1.0 - 1e-6) * i as f64 / 24.0;
            let eff = effective_params(v_a, &channel, &NlaGain::new(g).unwrap()).unwrap();
            assert!(eff.v_a_eff > prev, "V_A_eff must grow with g");
            prev = eff.v_a_eff;
        }
    }

    #[test]
    fn station_identity_case() {
        let g = channel_output_cm(3.0_f64, &ch(0.5, 0.1)).unwrap();
        let st = solve_bob_station(&g, &g).unwrap();
        assert_abs_diff_eq!(st.t_b, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.eta, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.n_b, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn station_recovers_forward_composition() {
        let g_nla = TwoModeSymmetricCM::new(4.0_f64, 2.4, 2.2).unwrap();
        assert!(g_nla.is_physical());
        let applied = BobStationParams {
            eta: 1.2,
            t_b: 0.9,
            n_b: 1.5,
        };
        let g_ps_cm = compose_bob_station(&g_nla, &applied)
            .unwrap()
            .keep_modes(&[0, 1])
            .unwrap();
        let g_ps = TwoModeSymmetricCM::new(
            g_ps_cm.entry(0, 0),
            g_ps_cm.entry(2, 2),
            g_ps_cm.entry(0, 2),
        )
        .unwrap();
        let solved = solve_bob_station(&g_nla, &g_ps).unwrap();
        let back = compose_bob_station(&g_nla, &solved)
            .unwrap()
            .keep_modes(&[0, 1])
            .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(back.entry(i, j), g_ps_cm.entry(i, j), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn station_forward_reproduction_randomised() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for case in 0..100 {
            let v_a: f64 = rng.gen_range(0.5..20.0);
            let t: f64 = rng.gen_range(0.05..1.0);
            let xi: f64 = rng.gen_range(0.0..0.3);
            let g_nla = channel_output_cm(v_a, &ch(t, xi)).unwrap();
            let applied = BobStationParams {
                eta: rng.gen_range(1.0..2.5),
                t_b: rng.gen_range(0.2..1.0),
                n_b: rng.gen_range(1.0..4.0),
            };
            let target = compose_bob_station(&g_nla, &applied)
                .unwrap()
                .keep_modes(&[0, 1])
                .unwrap();
            let g_ps = TwoModeSymmetricCM::new(
                target.entry(0, 0),
                target.entry(2, 2),
                target.entry(0, 2),
            )
            .unwrap();
            let solved = solve_bob_station(&g_nla, &g_ps)
                .unwrap_or_else(|e| panic!("case {case}: solve failed: {e}"));
            assert!(solved.eta >= 1.0 && solved.t_b > 0.0 && solved.t_b <= 1.0 && solved.n_b >= 1.0);
            let back = compose_bob_station(&g_nla, &solved)
                .unwrap()
                .keep_modes(&[0, 1])
                .unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    assert_abs_diff_eq!(back.entry(i, j), target.entry(i, j), epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn family_members_are_distinct_but_consistent() {
        let g_nla = TwoModeSymmetricCM::new(4.0_f64, 2.4, 2.2).unwrap();
        let applied = BobStationParams {
            eta: 1.4,
            t_b: 0.75,
            n_b: 2.0,
        };
        let target = compose_bob_station(&g_nla, &applied)
            .unwrap()
            .keep_modes(&[0, 1])
            .unwrap();
        let g_ps =
            TwoModeSymmetricCM::new(target.entry(0, 0), target.entry(2, 2), target.entry(0, 2))
                .unwrap();
        let canonical = solve_bob_station(&g_nla, &g_ps).unwrap();
        // the N_B >= 1 constraint bounds T_B below by the canonical value;
        // distinct members live toward the eta >= 1 bound min(R, 1)
        let r = (g_ps.c / g_nla.c).powi(2);
        let other =
            station_family_member(&g_nla, &g_ps, 0.5 * (canonical.t_b + r.min(1.0))).unwrap();
        assert!((canonical.t_b - other.t_b).abs() > 1e-3);
        for st in [canonical, other] {
            let back = compose_bob_station(&g_nla, &st)
                .unwrap()
                .keep_modes(&[0, 1])
                .unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    assert_abs_diff_eq!(back.entry(i, j), target.entry(i, j), epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn infeasible_targets_rejected() {
        let g_nla = channel_output_cm(3.0_f64, &ch(0.5, 0.05)).unwrap();
        // more correlation than any eta >= 1, T_B <= 1 station can produce
        // while keeping b: force beta0 > 1
        let g_ps = TwoModeSymmetricCM::new(g_nla.a, g_nla.b - 0.9, g_nla.c).unwrap();
        assert!(matches!(
            solve_bob_station(&g_nla, &g_ps),
            Err(Error::NoFeasibleSolution(_))
        ));
        // mismatched gain
        let g_bad = TwoModeSymmetricCM::new(g_nla.a + 0.1, g_nla.b, g_nla.c).unwrap();
        assert!(matches!(
            solve_bob_station(&g_nla, &g_bad),
            Err(Error::InvalidParameter(_))
        ));
    }
}

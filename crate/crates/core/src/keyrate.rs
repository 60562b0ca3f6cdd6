//! Assembles Holevo bounds and final key rates for direct and reverse
//! reconciliation with post-selection, and optimises the protocol parameters
//! (V_A, Delta, V_PS) per channel point.

use crate::error::{Error, Result};
use crate::filter::{filtered_moments, shannon_mi_filtered, JointDistribution, PostSelectionFilter};
use crate::gaussian::{Quadrature, TwoModeSymmetricCM};
use crate::nla::{
    compose_bob_station, gamma_nla, solve_bob_station, solve_gain, BobStationParams,
};
use crate::optim::nelder_mead;
use crate::protocol::{
    baseline_keyrate, bob_variance, clamp_holevo, Direction, GaussianChannel, ProtocolParams,
};
use crate::scalar::{half, Scalar};

/// Integration tolerances of the quadrature pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    pub moments: T,
    pub mi: T,
}

impl<T: Scalar> Default for Tolerances<T> {
    fn default() -> Self {
        Tolerances {
            moments: T::of(1e-8),
            mi: T::of(1e-7),
        }
    }
}

/// Everything the pipeline solved on the way to a key rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics<T> {
    pub gamma_ps: TwoModeSymmetricCM<T>,
    pub gamma_nla: TwoModeSymmetricCM<T>,
    pub gain: T,
    pub station: BobStationParams<T>,
    /// Entropy of the post-selected state (first Holevo term actually used).
    pub entropy_ps: T,
    /// Entropy of the pre-station state, surfaced as a diagnostic only.
    pub entropy_nla: T,
    /// Conditional entropy after the reference party's measurement.
    pub conditional_entropy: T,
}

/// Key-rate evaluation at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateResult<T> {
    /// Post-selected Shannon mutual information, bits per use.
    pub mi_ab: T,
    /// Gaussian Holevo bound on Eve's information, bits per use.
    pub holevo: T,
    /// Fraction of the data kept by the filter.
    pub keep_fraction: T,
    /// Final rate K = keep * (beta * mi - holevo); negative means insecure.
    pub key_rate: T,
    pub direction: Direction,
    pub diagnostics: Option<Diagnostics<T>>,
}

impl<T: Scalar> KeyRateResult<T> {
    pub fn from_parts(
        mi_ab: T,
        holevo: T,
        keep_fraction: T,
        beta: T,
        direction: Direction,
        diagnostics: Option<Diagnostics<T>>,
    ) -> Result<Self> {
        if !(keep_fraction > T::zero() && keep_fraction <= T::one()) {
            return Err(Error::NumericalFailure(format!(
                "keep fraction {keep_fraction} outside (0, 1]"
            )));
        }
        if holevo < T::zero() || mi_ab < T::zero() {
            return Err(Error::NumericalFailure(
                "information quantities must be non-negative".into(),
            ));
        }
        Ok(KeyRateResult {
            mi_ab,
            holevo,
            keep_fraction,
            key_rate: keep_fraction * (beta * mi_ab - holevo),
            direction,
            diagnostics,
        })
    }

    pub fn secure(&self) -> bool {
        self.key_rate > T::zero()
    }
}

/// Holevo bound for direct reconciliation: S(gamma_PS) minus the entropy of
/// the (B, C) state conditioned on Alice's heterodyne x-outcome.
pub fn holevo_dr<T: Scalar>(gamma_ps: &TwoModeSymmetricCM<T>) -> Result<T> {
    let cm = gamma_ps.to_cm();
    let s_ps = cm.von_neumann_entropy()?;
    let cond = cm.condition_on_heterodyne(0)?;
    let s_cond = cond.von_neumann_entropy()?;
    clamp_holevo(s_ps - s_cond)
}

/// Holevo bound for reverse reconciliation: S(gamma_PS) minus the entropy of
/// the (A, D, F, G) state conditioned on Bob's homodyne x-outcome, with Bob's
/// station ancillae built from the solved (eta, T_B, N_B).
pub fn holevo_rr<T: Scalar>(
    gamma_ps: &TwoModeSymmetricCM<T>,
    station: &BobStationParams<T>,
    gamma_nla_cm: &TwoModeSymmetricCM<T>,
) -> Result<T> {
    let s_ps = gamma_ps.to_cm().von_neumann_entropy()?;
    let full = compose_bob_station(gamma_nla_cm, station)?;
    let cond = full.condition_on_homodyne(1, Quadrature::X)?;
    let s_cond = cond.von_neumann_entropy()?;
    clamp_holevo(s_ps - s_cond)
}

/// Full post-selected key-rate pipeline at one parameter point:
/// moments -> gamma_PS -> gain -> gamma_NLA -> Bob station -> Shannon MI and
/// Holevo bound -> K = keep * (beta * I - chi).
pub fn keyrate_ps<T: Scalar>(
    params: &ProtocolParams<T>,
    ch: &GaussianChannel<T>,
    f: &PostSelectionFilter<T>,
    tols: &Tolerances<T>,
) -> Result<KeyRateResult<T>> {
    if params.trusted_noise > T::zero() {
        return Err(Error::InvalidParameter(
            "the trusted-noise knob applies to the no-post-selection baseline only".into(),
        ));
    }
    let v_a = params.modulation_variance;
    let jd = JointDistribution::new(v_a, ch).map_err(|e| e.at_stage("joint_distribution"))?;
    let fm = filtered_moments(&jd, f, tols.moments).map_err(|e| e.at_stage("filtered_moments"))?;
    let gamma_ps = fm.gamma().map_err(|e| e.at_stage("filtered_moments"))?;

    // quadrature noise can leave V_A^PS a hair below V_A at Delta = 0
    let v_a_ps = fm.v_a_ps.max(v_a);
    let gain = solve_gain(v_a, v_a_ps, ch).map_err(|e| e.at_stage("solve_gain"))?;
    let g_nla = gamma_nla(v_a, ch, &gain).map_err(|e| e.at_stage("gamma_nla"))?;
    let station =
        solve_bob_station(&g_nla, &gamma_ps).map_err(|e| e.at_stage("solve_bob_station"))?;

    let mi_ab = shannon_mi_filtered(&jd, f, tols.mi).map_err(|e| e.at_stage("shannon_mi"))?;

    let s_ps = gamma_ps
        .to_cm()
        .von_neumann_entropy()
        .map_err(|e| e.at_stage("holevo"))?;
    let s_nla = g_nla
        .to_cm()
        .von_neumann_entropy()
        .map_err(|e| e.at_stage("holevo"))?;
    let s_cond = match params.direction {
        Direction::Direct => gamma_ps
            .to_cm()
            .condition_on_heterodyne(0)
            .and_then(|cm| cm.von_neumann_entropy())
            .map_err(|e| e.at_stage("holevo"))?,
        Direction::Reverse => compose_bob_station(&g_nla, &station)
            .and_then(|cm| cm.condition_on_homodyne(1, Quadrature::X))
            .and_then(|cm| cm.von_neumann_entropy())
            .map_err(|e| e.at_stage("holevo"))?,
    };
    let holevo = clamp_holevo(s_ps - s_cond).map_err(|e| e.at_stage("holevo"))?;

    KeyRateResult::from_parts(
        mi_ab,
        holevo,
        fm.keep_fraction,
        params.beta,
        params.direction,
        Some(Diagnostics {
            gamma_ps,
            gamma_nla: g_nla,
            gain: gain.get(),
            station,
            entropy_ps: s_ps,
            entropy_nla: s_nla,
            conditional_entropy: s_cond,
        }),
    )
}

/// One axis of the search space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRange<T> {
    pub lo: T,
    pub hi: T,
    pub points: usize,
}

impl<T: Scalar> GridRange<T> {
    fn validate(&self, name: &str, min_lo: T) -> Result<()> {
        if !(self.lo < self.hi) || self.points == 0 {
            return Err(Error::InvalidParameter(format!(
                "{name} range must be non-empty with lo < hi"
            )));
        }
        if self.lo < min_lo {
            return Err(Error::InvalidParameter(format!(
                "{name} range must start at or above {}",
                min_lo.to_f64_lossy()
            )));
        }
        Ok(())
    }

    /// Log-spaced grid; a range starting at zero keeps the exact zero and
    /// log-spaces the remaining points from hi/16 up.
    fn grid(&self) -> Vec<T> {
        if self.points == 1 {
            return vec![self.lo];
        }
        if self.lo > T::zero() {
            let (l0, l1) = (self.lo.ln(), self.hi.ln());
            (0..self.points)
                .map(|i| (l0 + (l1 - l0) * T::of(i as f64 / (self.points - 1) as f64)).exp())
                .collect()
        } else {
            let mut g = vec![T::zero()];
            let sub = GridRange {
                lo: self.hi / T::of(16.0),
                hi: self.hi,
                points: self.points - 1,
            };
            g.extend(sub.grid());
            g
        }
    }
}

/// Search region for the per-point optimisation. Delta is expressed in units
/// of sqrt(V_B) and V_PS as a multiple of V_B, so the region tracks the
/// channel as V_A varies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpace<T> {
    pub v_a: GridRange<T>,
    pub delta: GridRange<T>,
    pub v_ps: GridRange<T>,
    pub refine_evals: usize,
}

impl<T: Scalar> Default for SearchSpace<T> {
    fn default() -> Self {
        SearchSpace {
            v_a: GridRange {
                lo: T::of(0.5),
                hi: T::of(80.0),
                points: 6,
            },
            delta: GridRange {
                lo: T::zero(),
                hi: T::of(3.0),
                points: 5,
            },
            v_ps: GridRange {
                lo: T::of(1.05),
                hi: T::of(2.5),
                points: 5,
            },
            refine_evals: 200,
        }
    }
}

impl<T: Scalar> SearchSpace<T> {
    pub fn validate(&self) -> Result<()> {
        self.v_a.validate("V_A", T::of(1e-6))?;
        self.delta.validate("Delta", T::zero())?;
        self.v_ps.validate("V_PS", T::one() + T::of(1e-9))?;
        Ok(())
    }
}

/// Optimised evaluation: the chosen protocol point plus its key rate.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedPoint<T> {
    pub v_a: T,
    /// Cutoff in units of sqrt(V_B); the identity filter has delta = 0.
    pub delta_rel: T,
    /// Target variance as a multiple of V_B.
    pub v_ps_rel: T,
    pub result: KeyRateResult<T>,
}

fn eval_point<T: Scalar>(
    direction: Direction,
    ch: &GaussianChannel<T>,
    beta: T,
    tols: &Tolerances<T>,
    v_a: T,
    delta_rel: T,
    v_ps_rel: T,
) -> Option<OptimizedPoint<T>> {
    let params = ProtocolParams::new(v_a, beta, direction).ok()?;
    let vb = bob_variance(v_a, ch);
    let f = PostSelectionFilter::new(v_ps_rel * vb, delta_rel * vb.sqrt(), vb).ok()?;
    let result = keyrate_ps(&params, ch, &f, tols).ok()?;
    Some(OptimizedPoint {
        v_a,
        delta_rel,
        v_ps_rel,
        result,
    })
}

/// Coarse log-spaced grid over (V_A, Delta, V_PS) followed by simplex
/// refinement from the best grid point. Deterministic given the space; the
/// identity filter (Delta = 0) is always part of the grid, so the optimum is
/// never worse than the plain-protocol optimum over the same V_A grid.
pub fn optimize_keyrate<T: Scalar>(
    direction: Direction,
    ch: &GaussianChannel<T>,
    beta: T,
    space: &SearchSpace<T>,
    tols: &Tolerances<T>,
) -> Result<OptimizedPoint<T>> {
    space.validate()?;
    let v_a_grid = space.v_a.grid();
    let mut delta_grid = space.delta.grid();
    if !delta_grid.iter().any(|&d| d == T::zero()) {
        delta_grid.insert(0, T::zero());
    }
    let v_ps_grid = space.v_ps.grid();

    let mut best: Option<OptimizedPoint<T>> = None;
    for &v_a in &v_a_grid {
        for &d in &delta_grid {
            let rho_list: &[T] = if d == T::zero() {
                // identity filter: V_PS only needs to be admissible
                std::slice::from_ref(&v_ps_grid[0])
            } else {
                &v_ps_grid
            };
            for &rho in rho_list {
                if let Some(p) = eval_point(direction, ch, beta, tols, v_a, d, rho) {
                    let better = match &best {
                        None => true,
                        Some(b) => p.result.key_rate > b.result.key_rate,
                    };
                    if better {
                        best = Some(p);
                    }
                }
            }
        }
    }
    let seed = best.ok_or_else(|| {
        Error::NoFeasibleSolution("no grid point produced an evaluable key rate".into())
    })?;

    // simplex over (ln V_A, delta, ln(V_PS - 1)) from the best grid point
    let x0 = [
        seed.v_a.ln(),
        seed.delta_rel,
        (seed.v_ps_rel - T::one()).ln(),
    ];
    let step = [T::of(0.35), T::of(0.3), T::of(0.35)];
    let bounds = [
        (space.v_a.lo.ln(), space.v_a.hi.ln()),
        (space.delta.lo, space.delta.hi),
        (
            (space.v_ps.lo - T::one()).ln(),
            (space.v_ps.hi - T::one()).ln(),
        ),
    ];
    let objective = |x: &[T]| -> T {
        let v_a = x[0].exp();
        let d = x[1].max(T::zero());
        let rho = T::one() + x[2].exp();
        match eval_point(direction, ch, beta, tols, v_a, d, rho) {
            Some(p) => -p.result.key_rate,
            None => T::of(1e6),
        }
    };
    let refined = nelder_mead(
        objective,
        &x0,
        &step,
        &bounds,
        T::of(1e-4),
        space.refine_evals,
    );
    let refined_point = eval_point(
        direction,
        ch,
        beta,
        tols,
        refined.x[0].exp(),
        refined.x[1].max(T::zero()),
        T::one() + refined.x[2].exp(),
    );
    Ok(match refined_point {
        Some(p) if p.result.key_rate > seed.result.key_rate => p,
        _ => seed,
    })
}

/// Optimised no-post-selection baseline: the modulation variance is the only
/// free parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedBaseline<T> {
    pub v_a: T,
    pub result: KeyRateResult<T>,
}

pub fn optimize_baseline<T: Scalar>(
    direction: Direction,
    ch: &GaussianChannel<T>,
    beta: T,
) -> Result<OptimizedBaseline<T>> {
    let eval = |v_a: T| -> Option<KeyRateResult<T>> {
        let params = ProtocolParams::new(v_a, beta, direction).ok()?;
        baseline_keyrate(&params, ch).ok()
    };
    let (lo, hi) = (T::of(1e-3), T::of(400.0));
    let mut best: Option<(T, KeyRateResult<T>)> = None;
    let n = 25usize;
    for i in 0..n {
        let v = (lo.ln() + (hi.ln() - lo.ln()) * T::of(i as f64 / (n - 1) as f64)).exp();
        if let Some(r) = eval(v) {
            let better = match &best {
                None => true,
                Some((_, b)) => r.key_rate > b.key_rate,
            };
            if better {
                best = Some((v, r));
            }
        }
    }
    let (v_seed, r_seed) =
        best.ok_or_else(|| Error::NumericalFailure("baseline grid produced no values".into()))?;
    let refined = nelder_mead(
        |x: &[T]| match eval(x[0].exp()) {
            Some(r) => -r.key_rate,
            None => T::of(1e6),
        },
        &[v_seed.ln()],
        &[half::<T>()],
        &[(lo.ln(), hi.ln())],
        T::of(1e-7),
        120,
    );
    let v_best = refined.x[0].exp();
    Ok(match eval(v_best) {
        Some(r) if r.key_rate > r_seed.key_rate => OptimizedBaseline { v_a: v_best, result: r },
        _ => OptimizedBaseline {
            v_a: v_seed,
            result: r_seed,
        },
    })
}

//! Deterministic derivative-free minimisation: a plain Nelder-Mead simplex
//! with box clamping. Objective evaluations here are noisy-tolerance
//! quadratures, so gradient-free descent is the right tool.

use crate::scalar::{half, Scalar};

/// Result of a simplex run.
#[derive(Debug, Clone)]
pub struct SimplexResult<T> {
    pub x: Vec<T>,
    pub fx: T,
    pub evaluations: usize,
}

/// Minimise `f` starting from `x0` with initial steps `step`, clamping every
/// coordinate into `bounds`. Stops when the simplex f-spread drops below
/// `f_tol` or after `max_evals` objective evaluations. Fully deterministic.
pub fn nelder_mead<T: Scalar>(
    mut f: impl FnMut(&[T]) -> T,
    x0: &[T],
    step: &[T],
    bounds: &[(T, T)],
    f_tol: T,
    max_evals: usize,
) -> SimplexResult<T> {
    let n = x0.len();
    assert_eq!(step.len(), n);
    assert_eq!(bounds.len(), n);
    let clamp = |x: &mut Vec<T>| {
        for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
            *xi = (*xi).max(lo).min(hi);
        }
    };

    let mut evals = 0usize;
    let mut eval = |x: &[T], evals: &mut usize| -> T {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            T::of(1e300)
        }
    };

    // initial simplex: x0 plus one step along each coordinate
    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
    let mut base = x0.to_vec();
    clamp(&mut base);
    let f0 = eval(&base, &mut evals);
    simplex.push((base.clone(), f0));
    for i in 0..n {
        let mut v = base.clone();
        v[i] += step[i];
        clamp(&mut v);
        if (v[i] - base[i]).abs() < step[i].abs() * T::of(0.25) {
            v[i] = base[i] - step[i];
            clamp(&mut v);
        }
        let fv = eval(&v, &mut evals);
        simplex.push((v, fv));
    }

    let (alpha, gamma, rho, sigma) = (T::one(), T::of(2.0), half::<T>(), half::<T>());
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let spread = simplex[n].1 - simplex[0].1;
        if spread.abs() < f_tol {
            break;
        }
        // centroid of all but the worst
        let mut centroid = vec![T::zero(); n];
        for (v, _) in simplex.iter().take(n) {
            for (ci, &vi) in centroid.iter_mut().zip(v) {
                *ci += vi;
            }
        }
        for ci in centroid.iter_mut() {
            *ci /= T::of(n as f64);
        }
        let worst = simplex[n].clone();
        let mut reflect: Vec<T> = centroid
            .iter()
            .zip(&worst.0)
            .map(|(&c, &w)| c + alpha * (c - w))
            .collect();
        clamp(&mut reflect);
        let f_r = eval(&reflect, &mut evals);

        if f_r < simplex[0].1 {
            let mut expand: Vec<T> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(&c, &w)| c + gamma * (c - w))
                .collect();
            clamp(&mut expand);
            let f_e = eval(&expand, &mut evals);
            simplex[n] = if f_e < f_r { (expand, f_e) } else { (reflect, f_r) };
        } else if f_r < simplex[n - 1].1 {
            simplex[n] = (reflect, f_r);
        } else {
            let mut contract: Vec<T> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(&c, &w)| c + rho * (w - c))
                .collect();
            clamp(&mut contract);
            let f_c = eval(&contract, &mut evals);
            if f_c < worst.1 {
                simplex[n] = (contract, f_c);
            } else {
                // shrink toward the best vertex
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let mut v: Vec<T> = best
                        .iter()
                        .zip(&entry.0)
                        .map(|(&b, &x)| b + sigma * (x - b))
                        .collect();
                    clamp(&mut v);
                    let fv = eval(&v, &mut evals);
                    *entry = (v, fv);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    SimplexResult {
        x: simplex[0].0.clone(),
        fx: simplex[0].1,
        evaluations: evals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let r = nelder_mead(
            |x: &[f64]| (x[0] - 1.5).powi(2) + 2.0 * (x[1] + 0.5).powi(2),
            &[0.0, 0.0],
            &[0.5, 0.5],
            &[(-5.0, 5.0), (-5.0, 5.0)],
            1e-12,
            500,
        );
        assert!((r.x[0] - 1.5).abs() < 1e-4);
        assert!((r.x[1] + 0.5).abs() < 1e-4);
    }

    #[test]
    fn respects_bounds() {
        let r = nelder_mead(
            |x: &[f64]| (x[0] - 10.0).powi(2),
            &[0.0],
            &[1.0],
            &[(-1.0, 2.0)],
            1e-10,
            200,
        );
        assert!((r.x[0] - 2.0).abs() < 1e-6, "optimum clamps to the bound");
    }

    #[test]
    fn deterministic() {
        let run = || {
            nelder_mead(
                |x: &[f64]| x[0].sin() * (x[0] * 0.7).cos() + 0.01 * x[0] * x[0],
                &[1.0],
                &[0.8],
                &[(-8.0, 8.0)],
                1e-10,
                300,
            )
        };
        let a = run();
        let b = run();
        assert_eq!(a.x[0].to_bits(), b.x[0].to_bits());
        assert_eq!(a.fx.to_bits(), b.fx.to_bits());
    }
}

//! Adaptive Gauss-Kronrod quadrature (15-point Kronrod / 7-point Gauss pair)
//! over finite intervals, with optional interior breakpoints for integrands
//! with kinks, and an iterated two-dimensional driver on a rectangle.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::scalar::{half, Scalar};

/// 15-point Kronrod abscissae on [0, 1] (positive half, centre last).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// 7-point Gauss weights, applying to the odd-indexed Kronrod abscissae.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Options controlling the adaptive refinement. Refinement stops once the
/// accumulated error estimate satisfies `err <= max(rel_tol * |I|, abs_tol)`.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions<T> {
    /// Target relative error.
    pub rel_tol: T,
    /// Absolute error target; escape hatch for integrals that are genuinely
    /// (near-)zero, where a relative target is unreachable.
    pub abs_tol: T,
    /// Subdivision budget.
    pub max_intervals: usize,
}

impl<T: Scalar> QuadOptions<T> {
    /// Essentially pure relative control; the scale-free refinement works at
    /// any magnitude of the integral.
    pub fn with_rel_tol(rel_tol: T) -> Self {
        QuadOptions {
            rel_tol,
            abs_tol: T::of(1e-300),
            max_intervals: 4096,
        }
    }

    pub fn with_abs_tol(mut self, abs_tol: T) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

struct Segment<T> {
    a: T,
    b: T,
    integral: T,
    error: T,
    seq: usize,
}

struct HeapEntry {
    error: f64,
    seq: usize,
    slot: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error && self.seq == other.seq
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn gk15<T: Scalar, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Result<(T, T)> {
    let centre = (a + b) * half();
    let hw = (b - a) * half();
    let mut kron = T::zero();
    let mut gauss = T::zero();
    for (i, &xg) in XGK.iter().enumerate() {
        let dx = hw * T::of(xg);
        let wk = T::of(WGK[i]);
        let fsum = if i == 7 {
            f(centre)
        } else {
            f(centre - dx) + f(centre + dx)
        };
        if !fsum.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "integrand not finite near {}",
                (centre + dx).to_f64_lossy()
            )));
        }
        kron += wk * fsum;
        // Gauss-7 nodes are the odd-indexed abscissae plus the centre (i = 7)
        if i % 2 == 1 {
            gauss += T::of(WG[i / 2]) * fsum;
        }
    }
    let integral = kron * hw;
    let err = ((kron - gauss) * hw).abs();
    Ok((integral, err))
}

/// Adaptively integrate `f` over `[a, b]`. `breakpoints` inside the interval
/// become initial segment boundaries (pass the locations of kinks).
pub fn integrate<T: Scalar, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    breakpoints: &[T],
    opts: &QuadOptions<T>,
) -> Result<T> {
    if !(a < b) {
        return Err(Error::InvalidParameter(
            "integration bounds must satisfy a < b".into(),
        ));
    }
    let mut bounds: Vec<T> = vec![a];
    let mut pts: Vec<T> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    for p in pts {
        if p > *bounds.last().unwrap() {
            bounds.push(p);
        }
    }
    bounds.push(b);

    let mut segments: Vec<Segment<T>> = Vec::new();
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
    let mut seq = 0usize;
    for w in bounds.windows(2) {
        let (int, err) = gk15(&f, w[0], w[1])?;
        segments.push(Segment {
            a: w[0],
            b: w[1],
            integral: int,
            error: err,
            seq,
        });
        heap.push(HeapEntry {
            error: err.to_f64_lossy(),
            seq,
            slot: segments.len() - 1,
        });
        seq += 1;
    }

    loop {
        let total: T = segments.iter().map(|s| s.integral).sum();
        let err_total: T = segments.iter().map(|s| s.error).sum();
        let target = (opts.rel_tol * total.abs()).max(opts.abs_tol);
        if err_total <= target {
            return Ok(total);
        }
        if segments.len() >= opts.max_intervals {
            return Err(Error::IntegrationFailure(format!(
                "budget of {} intervals exhausted (error {:.3e}, target {:.3e})",
                opts.max_intervals,
                err_total.to_f64_lossy(),
                target.to_f64_lossy()
            )));
        }
        let worst = loop {
            let entry = heap.pop().ok_or_else(|| {
                Error::IntegrationFailure("refinement heap drained unexpectedly".into())
            })?;
            if segments[entry.slot].seq == entry.seq {
                break entry.slot;
            }
        };
        let Segment { a: sa, b: sb, .. } = segments[worst];
        let mid = (sa + sb) * half();
        if !(sa < mid && mid < sb) {
            return Err(Error::IntegrationFailure(
                "interval too small to bisect at requested tolerance".into(),
            ));
        }
        let (il, el) = gk15(&f, sa, mid)?;
        let (ir, er) = gk15(&f, mid, sb)?;
        segments[worst] = Segment {
            a: sa,
            b: mid,
            integral: il,
            error: el,
            seq,
        };
        heap.push(HeapEntry {
            error: el.to_f64_lossy(),
            seq,
            slot: worst,
        });
        seq += 1;
        segments.push(Segment {
            a: mid,
            b: sb,
            integral: ir,
            error: er,
            seq,
        });
        heap.push(HeapEntry {
            error: er.to_f64_lossy(),
            seq,
            slot: segments.len() - 1,
        });
        seq += 1;
    }
}

/// Iterated adaptive quadrature of `f(x, y)` over the rectangle
/// `[x0, x1] x [y0, y1]`. The outer axis is x; breakpoints may be supplied
/// on both axes. The inner integrals run at a tenth of the outer tolerance.
#[allow(clippy::too_many_arguments)]
pub fn integrate_2d<T: Scalar, F: Fn(T, T) -> T>(
    f: F,
    x_range: (T, T),
    y_range: (T, T),
    x_breaks: &[T],
    y_breaks: &[T],
    opts: &QuadOptions<T>,
) -> Result<T> {
    let inner_opts = QuadOptions {
        rel_tol: opts.rel_tol * T::of(0.1),
        abs_tol: opts.abs_tol * T::of(0.1),
        max_intervals: opts.max_intervals,
    };
    let inner_failure: RefCell<Option<Error>> = RefCell::new(None);
    let outer = |x: T| -> T {
        match integrate(|y| f(x, y), y_range.0, y_range.1, y_breaks, &inner_opts) {
            Ok(v) => v,
            Err(e) => {
                inner_failure.borrow_mut().get_or_insert(e);
                T::zero()
            }
        }
    };
    let result = integrate(outer, x_range.0, x_range.1, x_breaks, opts);
    if let Some(e) = inner_failure.into_inner() {
        return Err(e);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn opts(tol: f64) -> QuadOptions<f64> {
        QuadOptions::with_rel_tol(tol)
    }

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x: f64| x * x * x - 2.0 * x + 1.0, -1.0, 3.0, &[], &opts(1e-12)).unwrap();
        // antiderivative x^4/4 - x^2 + x
        let exact = (81.0 / 4.0 - 9.0 + 3.0) - (0.25 - 1.0 - 1.0);
        assert_abs_diff_eq!(v, exact, epsilon = 1e-10);
    }

    #[test]
    fn gaussian_mass() {
        let sigma = 1.7_f64;
        let f = move |x: f64| (-x * x / (2.0 * sigma * sigma)).exp();
        let v = integrate(f, -40.0, 40.0, &[], &opts(1e-10)).unwrap();
        assert_abs_diff_eq!(v, sigma * (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn kinked_integrand_with_breakpoints() {
        // |x| integrates to 1 on [-1, 1]
        let v = integrate(|x: f64| x.abs(), -1.0, 1.0, &[0.0], &opts(1e-12)).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_dimensional_gaussian() {
        let f = |x: f64, y: f64| (-0.5 * (x * x + y * y)).exp();
        let v = integrate_2d(f, (-10.0, 10.0), (-10.0, 10.0), &[], &[], &opts(1e-9)).unwrap();
        assert_abs_diff_eq!(v, 2.0 * std::f64::consts::PI, epsilon = 1e-7);
    }

    #[test]
    fn budget_exhaustion_reported() {
        let tight = QuadOptions {
            rel_tol: 1e-15,
            abs_tol: 1e-300,
            max_intervals: 4,
        };
        let r = integrate(
            |x: f64| (50.0 * (x - 0.31)).sin().abs(),
            -1.0,
            1.0,
            &[],
            &tight,
        );
        assert!(matches!(r, Err(Error::IntegrationFailure(_))));
    }

    #[test]
    fn non_finite_integrand_rejected() {
        let r = integrate(|x: f64| 1.0 / x, -1.0, 1.0, &[], &opts(1e-8));
        assert!(matches!(r, Err(Error::NumericalFailure(_))));
    }
}

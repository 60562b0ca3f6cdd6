//! Independent Monte Carlo validation of the quadrature pipeline:
//! sample-level simulation of the prepare-and-measure protocol with
//! rejection-sampled post-selection. Estimates kept fraction, post-selected
//! second moments (in measurement units) and a binned plug-in mutual
//! information, each with a standard error.
//!
//! Randomness: ChaCha20 (as implemented by `rand_chacha`), seeded from the
//! config, with Gaussian variates produced by Box-Muller from 53-bit
//! uniforms. The algorithm name is pinned in every serialized config so runs
//! reproduce across machines.

use std::io::Write;

use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{JointDistribution, PostSelectionFilter};
use crate::protocol::GaussianChannel;

/// Protocol point simulated by the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McParams {
    pub v_a: f64,
    pub transmission: f64,
    pub excess_noise: f64,
    /// Absolute target variance (shot-noise units).
    pub v_ps: f64,
    /// Absolute cutoff (shot-noise units).
    pub delta: f64,
}

/// Simulation configuration; a fixed seed gives a bitwise-reproducible run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub params: McParams,
}

impl McConfig {
    /// Name of the RNG algorithm backing the sample stream.
    pub fn rng_algorithm(&self) -> &'static str {
        "chacha20"
    }

    fn build(&self) -> Result<(JointDistribution<f64>, PostSelectionFilter<f64>)> {
        if self.n_samples == 0 {
            return Err(Error::InvalidParameter("n_samples must be > 0".into()));
        }
        let ch = GaussianChannel::new(self.params.transmission, self.params.excess_noise)?;
        let jd = JointDistribution::new(self.params.v_a, &ch)?;
        let f = PostSelectionFilter::new(self.params.v_ps, self.params.delta, jd.bob_variance())?;
        Ok((jd, f))
    }
}

/// Estimates with standard errors. Moments are raw measurement-unit moments
/// of the accepted samples (Alice heterodyne / Bob homodyne outcomes), not
/// covariance-matrix entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub n_samples: u64,
    pub n_accepted: u64,
    pub keep_fraction: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub cov_ab: f64,
    pub mi: f64,
    pub se_keep: f64,
    pub se_var_a: f64,
    pub se_var_b: f64,
    pub se_cov: f64,
    /// Statistical error plus a Miller-Madow style bias bound for the binned
    /// plug-in estimator.
    pub se_mi: f64,
}

/// Gaussian variates via Box-Muller on 53-bit uniforms: with u1 in (0, 1]
/// and u2 in [0, 1), r = sqrt(-2 ln u1), z = (r cos(2 pi u2), r sin(2 pi u2)).
struct BoxMuller<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: RngCore> BoxMuller<R> {
    fn new(rng: R) -> Self {
        BoxMuller { rng, spare: None }
    }

    fn uniform_open(&mut self) -> f64 {
        // (0, 1]: shift the 53-bit integer up by one
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / 9007199254740992.0)
    }

    fn uniform_half_open(&mut self) -> f64 {
        // [0, 1)
        (self.rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform_open();
        let u2 = self.uniform_half_open();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

#[derive(Default)]
struct MomentAccumulator {
    n: u64,
    s_aa: f64,
    s_bb: f64,
    s_ab: f64,
    s_a4: f64,
    s_b4: f64,
    s_ab2: f64,
}

impl MomentAccumulator {
    fn push(&mut self, xa: f64, xb: f64) {
        let (aa, bb, ab) = (xa * xa, xb * xb, xa * xb);
        self.n += 1;
        self.s_aa += aa;
        self.s_bb += bb;
        self.s_ab += ab;
        self.s_a4 += aa * aa;
        self.s_b4 += bb * bb;
        self.s_ab2 += ab * ab;
    }
}

/// Run the simulation, optionally streaming every sample to `dump`.
fn simulate_impl(cfg: &McConfig, mut dump: Option<&mut dyn Write>) -> Result<McEstimate> {
    let (jd, filter) = cfg.build()?;
    let sigma_a = jd.alice_variance().sqrt();
    let k = jd.conditional_coeff();
    let sigma_c = jd.conditional_variance().sqrt();

    let mut gen = BoxMuller::new(rand_chacha::ChaCha20Rng::seed_from_u64(cfg.seed));
    let mut acc = MomentAccumulator::default();
    let mut accepted: Vec<(f64, f64)> = Vec::new();

    for _ in 0..cfg.n_samples {
        let xa = sigma_a * gen.next_gaussian();
        let xb = k * xa + sigma_c * gen.next_gaussian();
        let keep = gen.uniform_half_open() < filter.acceptance(xb);
        if let Some(w) = dump.as_deref_mut() {
            w.write_all(&xa.to_le_bytes())
                .and_then(|_| w.write_all(&xb.to_le_bytes()))
                .and_then(|_| w.write_all(&[u8::from(keep)]))
                .map_err(|e| Error::NumericalFailure(format!("sample dump I/O: {e}")))?;
        }
        if keep {
            acc.push(xa, xb);
            accepted.push((xa, xb));
        }
    }

    if acc.n < 2 {
        return Err(Error::NumericalFailure(
            "post-selection accepted fewer than two samples".into(),
        ));
    }
    let n = acc.n as f64;
    let var_a = acc.s_aa / n;
    let var_b = acc.s_bb / n;
    let cov_ab = acc.s_ab / n;
    let se_var_a = ((acc.s_a4 / n - var_a * var_a).max(0.0) / n).sqrt();
    let se_var_b = ((acc.s_b4 / n - var_b * var_b).max(0.0) / n).sqrt();
    let se_cov = ((acc.s_ab2 / n - cov_ab * cov_ab).max(0.0) / n).sqrt();
    let p = acc.n as f64 / cfg.n_samples as f64;
    let se_keep = (p * (1.0 - p) / cfg.n_samples as f64).sqrt();

    let (mi, se_mi) = binned_mutual_information(&accepted);

    Ok(McEstimate {
        n_samples: cfg.n_samples,
        n_accepted: acc.n,
        keep_fraction: p,
        var_a,
        var_b,
        cov_ab,
        mi,
        se_keep,
        se_var_a,
        se_var_b,
        se_cov,
        se_mi,
    })
}

/// Simulate the protocol at the configured point.
pub fn simulate(cfg: &McConfig) -> Result<McEstimate> {
    simulate_impl(cfg, None)
}

/// Simulate and stream the raw samples: a `CVQKDMC1` magic, a little-endian
/// u32 JSON-header length, the JSON header (config plus RNG name and record
/// layout), then one record per sample of little-endian f64 x_A, f64 x_B and
/// an accepted-flag byte.
pub fn dump_samples(cfg: &McConfig, out: &mut dyn Write) -> Result<McEstimate> {
    let header = serde_json::json!({
        "config": cfg,
        "rng": cfg.rng_algorithm(),
        "record": "f64le x_a, f64le x_b, u8 accepted",
    });
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| Error::NumericalFailure(format!("header serialization: {e}")))?;
    let io_err = |e: std::io::Error| Error::NumericalFailure(format!("sample dump I/O: {e}"));
    out.write_all(b"CVQKDMC1").map_err(io_err)?;
    out.write_all(&(header_bytes.len() as u32).to_le_bytes())
        .map_err(io_err)?;
    out.write_all(&header_bytes).map_err(io_err)?;
    simulate_impl(cfg, Some(out))
}

/// Freedman-Diaconis bin width; falls back to a scale-based width for
/// degenerate interquartile ranges.
fn fd_width(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    let q = |f: f64| sorted[((n - 1) as f64 * f) as usize];
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 {
        iqr
    } else {
        (sorted[n - 1] - sorted[0]).max(1e-6)
    };
    2.0 * spread / (n as f64).cbrt()
}

/// Plug-in mutual information of the accepted samples on a Freedman-Diaconis
/// grid, in bits, together with a standard error that includes the
/// Miller-Madow bias bound.
fn binned_mutual_information(samples: &[(f64, f64)]) -> (f64, f64) {
    let n = samples.len();
    let mut xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let mut ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (wx, wy) = (fd_width(&xs), fd_width(&ys));
    let (x0, x1) = (xs[0], xs[n - 1]);
    let (y0, y1) = (ys[0], ys[n - 1]);
    let nx = (((x1 - x0) / wx).ceil() as usize + 1).clamp(2, 2048);
    let ny = (((y1 - y0) / wy).ceil() as usize + 1).clamp(2, 2048);

    let mut joint = vec![0u64; nx * ny];
    let mut mx = vec![0u64; nx];
    let mut my = vec![0u64; ny];
    for &(x, y) in samples {
        let ix = (((x - x0) / (x1 - x0) * nx as f64) as usize).min(nx - 1);
        let iy = (((y - y0) / (y1 - y0) * ny as f64) as usize).min(ny - 1);
        joint[ix * ny + iy] += 1;
        mx[ix] += 1;
        my[iy] += 1;
    }

    let nf = n as f64;
    let mut mi = 0.0;
    let mut second = 0.0;
    let mut occupied = 0usize;
    for ix in 0..nx {
        for iy in 0..ny {
            let c = joint[ix * ny + iy];
            if c == 0 {
                continue;
            }
            occupied += 1;
            let p = c as f64 / nf;
            let term = (p * nf * nf / (mx[ix] as f64 * my[iy] as f64)).log2();
            mi += p * term;
            second += p * term * term;
        }
    }
    let occupied_x = mx.iter().filter(|&&c| c > 0).count();
    let occupied_y = my.iter().filter(|&&c| c > 0).count();
    let stat_se = ((second - mi * mi).max(0.0) / nf).sqrt();
    let bias = (occupied.saturating_sub(occupied_x + occupied_y - 1)) as f64
        / (2.0 * nf * std::f64::consts::LN_2);
    (mi, stat_se + bias.abs())
}

/// One statistic of the quadrature-vs-Monte-Carlo comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: &'static str,
    pub analytic: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub sigmas: f64,
    pub pass: bool,
}

/// Report of a full comparison run.
#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub config: McConfig,
    pub tol_sigmas: f64,
    pub rows: Vec<CheckRow>,
}

impl CompareReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Run the sampler and the quadrature pipeline on identical parameters and
/// compare each statistic at `tol_sigmas` standard errors. Quadrature values
/// are converted to measurement units through the shared unit map.
pub fn compare(cfg: &McConfig, tol_sigmas: f64, quad_tol: f64) -> Result<CompareReport> {
    let (jd, filter) = cfg.build()?;
    let est = simulate(cfg)?;
    let fm = crate::filter::filtered_moments(&jd, &filter, quad_tol)?;
    let mi = crate::filter::shannon_mi_filtered(&jd, &filter, quad_tol)?;

    let meas_var_a = (fm.var_a + 1.0) / 2.0;
    let meas_cov = fm.cov_ab / std::f64::consts::SQRT_2;
    let row = |name: &'static str, analytic: f64, estimate: f64, se: f64| {
        let sigmas = if se > 0.0 {
            (estimate - analytic).abs() / se
        } else {
            f64::INFINITY
        };
        CheckRow {
            name,
            analytic,
            estimate,
            std_error: se,
            sigmas,
            pass: sigmas <= tol_sigmas,
        }
    };
    let rows = vec![
        row("keep_fraction", fm.keep_fraction, est.keep_fraction, est.se_keep),
        row("var_a", meas_var_a, est.var_a, est.se_var_a),
        row("var_b", fm.var_b, est.var_b, est.se_var_b),
        row("cov_ab", meas_cov, est.cov_ab, est.se_cov),
        row("mi", mi, est.mi, est.se_mi),
    ];
    Ok(CompareReport {
        config: *cfg,
        tol_sigmas,
        rows,
    })
}

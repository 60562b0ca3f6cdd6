//! Covariance-matrix representation of zero-mean Gaussian states and the
//! symplectic/entropic operations the security analysis is built on.
//!
//! Conventions, fixed once for the whole crate:
//! * quadrature ordering `(x1, p1, x2, p2, ...)`;
//! * shot-noise units, vacuum variance = 1;
//! * entropies in bits (log base 2);
//! * symplectic transforms act by congruence, `gamma -> S^T gamma S`.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::{half, Scalar};

/// Which quadrature a homodyne detector measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    X,
    P,
}

/// Symplectic eigenvalues of a state, sorted in descending order. Each value
/// is at least 1 for a physical state.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticSpectrum<T> {
    values: Vec<T>,
}

impl<T: Scalar> SymplecticSpectrum<T> {
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn min(&self) -> T {
        *self.values.last().expect("spectrum is never empty")
    }
}

/// The entropy kernel g(nu) in bits:
/// g(nu) = ((nu+1)/2) log2((nu+1)/2) - ((nu-1)/2) log2((nu-1)/2),
/// extended by continuity with g(1) = 0.
pub fn entropy_g<T: Scalar>(nu: T) -> T {
    let up = (nu + T::one()) * half();
    let dn = (nu - T::one()) * half();
    let term = |v: T| {
        if v <= T::zero() {
            T::zero()
        } else {
            v * v.log2()
        }
    };
    term(up) - term(dn)
}

/// Real symmetric 2n x 2n covariance matrix of an n-mode Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix<T> {
    mat: Mat<T>,
}

impl<T: Scalar> CovarianceMatrix<T> {
    /// n vacuum modes.
    pub fn vacuum(modes: usize) -> Self {
        CovarianceMatrix {
            mat: Mat::identity(2 * modes),
        }
    }

    /// Single thermal mode of the given quadrature variance (>= 1).
    pub fn thermal(variance: T) -> Result<Self> {
        if variance < T::one() {
            return Err(Error::InvalidParameter(format!(
                "thermal variance must be >= 1, got {variance}"
            )));
        }
        let mut mat = Mat::zeros(2);
        mat[(0, 0)] = variance;
        mat[(1, 1)] = variance;
        Ok(CovarianceMatrix { mat })
    }

    /// Two-mode squeezed vacuum of variance V: a = b = V, c = sqrt(V^2 - 1).
    pub fn epr(variance: T) -> Result<Self> {
        if variance < T::one() {
            return Err(Error::InvalidParameter(format!(
                "EPR variance must be >= 1, got {variance}"
            )));
        }
        let c = (variance * variance - T::one()).sqrt();
        TwoModeSymmetricCM::new(variance, variance, c).map(|m| m.to_cm())
    }

    /// Build from row-major entries; validates symmetry and positive diagonal.
    pub fn from_rows(modes: usize, rows: &[T]) -> Result<Self> {
        let dim = 2 * modes;
        if rows.len() != dim * dim {
            return Err(Error::InvalidParameter(format!(
                "expected {} entries for {modes} modes, got {}",
                dim * dim,
                rows.len()
            )));
        }
        let mat = Mat::from_rows(dim, rows);
        let scale = (0..dim)
            .map(|i| mat[(i, i)].abs())
            .fold(T::one(), T::max);
        if mat.max_asymmetry() > Self::symmetry_tol() * scale {
            return Err(Error::InvalidParameter(
                "covariance matrix is not symmetric".into(),
            ));
        }
        for i in 0..dim {
            if mat[(i, i)] <= T::zero() {
                return Err(Error::InvalidParameter(
                    "covariance matrix has a non-positive diagonal entry".into(),
                ));
            }
        }
        let mut mat = mat;
        mat.symmetrize();
        Ok(CovarianceMatrix { mat })
    }

    fn symmetry_tol() -> T {
        T::of(1e-12).max(T::epsilon() * T::of(64.0))
    }

    pub fn modes(&self) -> usize {
        self.mat.size() / 2
    }

    pub fn dim(&self) -> usize {
        self.mat.size()
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.mat[(i, j)]
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<T> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                out.push(self.mat[(i, j)]);
            }
        }
        out
    }

    /// Direct sum with another state (modes of `other` appended).
    pub fn tensor(&self, other: &Self) -> Self {
        let d1 = self.dim();
        let d2 = other.dim();
        let mut mat = Mat::zeros(d1 + d2);
        for i in 0..d1 {
            for j in 0..d1 {
                mat[(i, j)] = self.mat[(i, j)];
            }
        }
        for i in 0..d2 {
            for j in 0..d2 {
                mat[(d1 + i, d1 + j)] = other.mat[(i, j)];
            }
        }
        CovarianceMatrix { mat }
    }

    /// Partial trace: keep only the listed modes, in the listed order.
    pub fn keep_modes(&self, modes: &[usize]) -> Result<Self> {
        let n = self.modes();
        let mut idx = Vec::with_capacity(2 * modes.len());
        for &m in modes {
            if m >= n {
                return Err(Error::InvalidParameter(format!(
                    "mode index {m} out of range for {n} modes"
                )));
            }
            idx.push(2 * m);
            idx.push(2 * m + 1);
        }
        Ok(CovarianceMatrix {
            mat: self.mat.select(&idx),
        })
    }

    /// Relabel modes: output mode k is input mode `perm[k]`.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<Self> {
        let n = self.modes();
        if perm.len() != n {
            return Err(Error::InvalidParameter(
                "permutation length must equal the number of modes".into(),
            ));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidParameter("not a permutation".into()));
            }
            seen[p] = true;
        }
        self.keep_modes(perm)
    }

    /// Raw symplectic eigenvalues, unclamped, sorted descending. Computed
    /// through the equivalent symmetric problem
    /// eig(L^T (Omega^T gamma Omega) L) with gamma = L L^T, whose eigenvalues
    /// are the nu_k^2 in duplicate pairs the +/- eigenvalues of i Omega gamma
    /// collapse onto.
    fn raw_symplectic(&self) -> Result<Vec<T>> {
        let n = self.modes();
        let d = self.dim();
        let l = self
            .mat
            .cholesky()
            .ok_or(Error::NonPhysicalState { min_nu: 0.0 })?;
        let mut omega = Mat::zeros(d);
        for k in 0..n {
            omega[(2 * k, 2 * k + 1)] = T::one();
            omega[(2 * k + 1, 2 * k)] = -T::one();
        }
        let m = self.mat.congruence(&omega);
        let sym = m.congruence(&l);
        let ev = sym.sym_eigenvalues()?;
        let mut nus = Vec::with_capacity(n);
        for k in 0..n {
            let pair_avg = (ev[2 * k] + ev[2 * k + 1]) * half();
            nus.push(pair_avg.max(T::zero()).sqrt());
        }
        nus.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
        Ok(nus)
    }

    /// Symplectic eigenvalues: the n moduli of the eigenvalues of
    /// i*Omega*gamma, each reported once. Values in the numerical band
    /// [1 - 1e-6, 1) are clamped to 1; anything lower is rejected as
    /// non-physical.
    pub fn symplectic_eigenvalues(&self) -> Result<SymplecticSpectrum<T>> {
        let raw = self.raw_symplectic()?;
        let nonphys_tol = T::of(1e-6).max(T::epsilon() * T::of(1e3));
        let mut values = Vec::with_capacity(raw.len());
        for nu in raw {
            if nu < T::one() - nonphys_tol {
                return Err(Error::NonPhysicalState {
                    min_nu: nu.to_f64_lossy(),
                });
            }
            values.push(nu.max(T::one()));
        }
        Ok(SymplecticSpectrum { values })
    }

    /// Von Neumann entropy in bits: sum of g(nu_k).
    pub fn von_neumann_entropy(&self) -> Result<T> {
        let spec = self.symplectic_eigenvalues()?;
        Ok(spec.values().iter().copied().map(entropy_g).sum())
    }

    /// Validate the physicality invariant nu_k >= 1 - 1e-9 (tighter than the
    /// operational clamp band).
    pub fn check_physical(&self) -> Result<()> {
        let raw = self.raw_symplectic()?;
        let tol = T::of(1e-9).max(T::epsilon() * T::of(64.0));
        let min = *raw.last().expect("state has at least one mode");
        if min < T::one() - tol {
            return Err(Error::NonPhysicalState {
                min_nu: min.to_f64_lossy(),
            });
        }
        Ok(())
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        let n = self.modes();
        if i == j || i >= n || j >= n {
            return Err(Error::InvalidParameter(format!(
                "mode pair ({i}, {j}) invalid for {n} modes"
            )));
        }
        Ok(())
    }

    /// Two-mode squeezer S(eta) on the mode pair (i, j):
    /// blocks sqrt(eta) I2 on the diagonal and sqrt(eta-1) sigma_z off it.
    pub fn apply_two_mode_squeezer(&self, i: usize, j: usize, eta: T) -> Result<Self> {
        self.check_pair(i, j)?;
        if eta < T::one() || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "squeezer parameter must satisfy eta >= 1, got {eta}"
            )));
        }
        let ch = eta.sqrt();
        let sh = (eta - T::one()).sqrt();
        let mut s = Mat::identity(self.dim());
        let (xi, pi, xj, pj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
        s[(xi, xi)] = ch;
        s[(pi, pi)] = ch;
        s[(xj, xj)] = ch;
        s[(pj, pj)] = ch;
        s[(xi, xj)] = sh;
        s[(pi, pj)] = -sh;
        s[(xj, xi)] = sh;
        s[(pj, pi)] = -sh;
        let mut mat = self.mat.congruence(&s);
        mat.symmetrize();
        Ok(CovarianceMatrix { mat })
    }

    /// Beamsplitter BS(T) on the mode pair (i, j):
    /// [[sqrt(T) I2, sqrt(1-T) I2], [-sqrt(1-T) I2, sqrt(T) I2]].
    pub fn apply_beamsplitter(&self, i: usize, j: usize, t: T) -> Result<Self> {
        self.check_pair(i, j)?;
        if t <= T::zero() || t > T::one() || !t.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "beamsplitter transmission must lie in (0, 1], got {t}"
            )));
        }
        let ct = t.sqrt();
        let st = (T::one() - t).sqrt();
        let mut s = Mat::identity(self.dim());
        let (xi, pi, xj, pj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
        s[(xi, xi)] = ct;
        s[(pi, pi)] = ct;
        s[(xj, xj)] = ct;
        s[(pj, pj)] = ct;
        s[(xi, xj)] = st;
        s[(pi, pj)] = st;
        s[(xj, xi)] = -st;
        s[(pj, pi)] = -st;
        let mut mat = self.mat.congruence(&s);
        mat.symmetrize();
        Ok(CovarianceMatrix { mat })
    }

    /// Condition on an ideal homodyne measurement of one quadrature of `mode`.
    /// Schur complement with the rank-one pseudo-inverse of the measured
    /// quadrature; the measured mode is removed from the output.
    pub fn condition_on_homodyne(&self, mode: usize, quad: Quadrature) -> Result<Self> {
        let n = self.modes();
        if mode >= n {
            return Err(Error::InvalidParameter(format!(
                "mode index {mode} out of range for {n} modes"
            )));
        }
        let k = 2 * mode
            + match quad {
                Quadrature::X => 0,
                Quadrature::P => 1,
            };
        let var = self.mat[(k, k)];
        if var < T::of(1e-12) {
            return Err(Error::SingularConditioning);
        }
        let keep: Vec<usize> = (0..self.dim())
            .filter(|&r| r != 2 * mode && r != 2 * mode + 1)
            .collect();
        let mut out = self.mat.select(&keep);
        let col: Vec<T> = keep.iter().map(|&r| self.mat[(r, k)]).collect();
        for (a, &va) in col.iter().enumerate() {
            for (b, &vb) in col.iter().enumerate() {
                out[(a, b)] = out[(a, b)] - va * vb / var;
            }
        }
        out.symmetrize();
        Ok(CovarianceMatrix { mat: out })
    }

    /// Condition on a heterodyne measurement of `mode`: adjoin a vacuum mode,
    /// mix on a balanced beamsplitter and condition on x of the measured
    /// output. The unmeasured output (mode "C") stays in the state and is
    /// appended as the last mode; callers that do not want it trace it out.
    pub fn condition_on_heterodyne(&self, mode: usize) -> Result<Self> {
        let n = self.modes();
        if mode >= n {
            return Err(Error::InvalidParameter(format!(
                "mode index {mode} out of range for {n} modes"
            )));
        }
        let with_c = self.tensor(&CovarianceMatrix::vacuum(1));
        let mixed = with_c.apply_beamsplitter(mode, n, half::<T>())?;
        mixed.condition_on_homodyne(mode, Quadrature::X)
    }
}

/// The measured two-mode state in the standard symmetric block form
/// [[a I2, c sigma_z], [c sigma_z, b I2]]. Three numbers determine the whole
/// state, which is all parameter estimation gives access to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeSymmetricCM<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Scalar> TwoModeSymmetricCM<T> {
    pub fn new(a: T, b: T, c: T) -> Result<Self> {
        let tol = T::of(1e-6);
        if a < T::one() - tol || b < T::one() - tol {
            return Err(Error::InvalidParameter(format!(
                "mode variances must be >= 1, got a={a}, b={b}"
            )));
        }
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::InvalidParameter(
                "covariance entries must be finite".into(),
            ));
        }
        Ok(TwoModeSymmetricCM { a, b, c })
    }

    /// Embed into the full 4x4 covariance matrix.
    pub fn to_cm(&self) -> CovarianceMatrix<T> {
        let z = T::zero();
        let mat = Mat::from_rows(
            4,
            &[
                self.a, z, self.c, z, //
                z, self.a, z, -self.c, //
                self.c, z, self.b, z, //
                z, -self.c, z, self.b,
            ],
        );
        CovarianceMatrix { mat }
    }

    /// Symplectic eigenvalues in closed form for the symmetric two-mode block
    /// structure.
    pub fn symplectic_eigenvalues(&self) -> Result<SymplecticSpectrum<T>> {
        self.to_cm().symplectic_eigenvalues()
    }

    pub fn is_physical(&self) -> bool {
        self.to_cm().check_physical().is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    /// Independent oracle: moduli of the eigenvalues of i*Omega*gamma via a
    /// dense complex eigen-decomposition, deduplicated by +/- pairing.
    fn oracle_symplectic(cm: &CovarianceMatrix<f64>) -> Vec<f64> {
        let d = cm.dim();
        let n = cm.modes();
        let g = DMatrix::from_row_slice(d, d, &cm.to_row_major());
        let mut omega = DMatrix::zeros(d, d);
        for k in 0..n {
            omega[(2 * k, 2 * k + 1)] = 1.0;
            omega[(2 * k + 1, 2 * k)] = -1.0;
        }
        let og = omega * g;
        let eig = og.complex_eigenvalues();
        let mut moduli: Vec<f64> = eig.iter().map(|z| z.norm()).collect();
        moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
        // each nu appears as +i nu and -i nu
        (0..n).map(|k| 0.5 * (moduli[2 * k] + moduli[2 * k + 1])).collect()
    }

    #[test]
    fn vacuum_spectrum_is_unity() {
        let cm = CovarianceMatrix::<f64>::vacuum(2);
        let s = cm.symplectic_eigenvalues().unwrap();
        assert_eq!(s.values().len(), 2);
        for &v in s.values() {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn pure_tmsv_spectrum_is_unity() {
        let v = 3.0_f64;
        let cm = TwoModeSymmetricCM::new(v, v, (v * v - 1.0).sqrt()).unwrap();
        let s = cm.symplectic_eigenvalues().unwrap();
        for &nu in s.values() {
            assert_abs_diff_eq!(nu, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn generic_spectrum_matches_dense_eigen_oracle() {
        let cm = TwoModeSymmetricCM::new(3.0_f64, 2.0, 1.0).unwrap().to_cm();
        let mine = cm.symplectic_eigenvalues().unwrap();
        let oracle = oracle_symplectic(&cm);
        for (m, o) in mine.values().iter().zip(oracle.iter()) {
            assert_abs_diff_eq!(m, o, epsilon = 1e-10);
        }
    }

    #[test]
    fn nonphysical_state_rejected() {
        // legal-looking symmetric matrix that violates the uncertainty bound
        let cm = TwoModeSymmetricCM::new(1.2_f64, 1.2, 1.1).unwrap().to_cm();
        match cm.symplectic_eigenvalues() {
            Err(Error::NonPhysicalState { .. }) => {}
            other => panic!("expected NonPhysicalState, got {other:?}"),
        }
    }

    #[test]
    fn entropy_vacuum_zero_thermal_known() {
        let vac = CovarianceMatrix::<f64>::vacuum(1);
        assert_abs_diff_eq!(vac.von_neumann_entropy().unwrap(), 0.0, epsilon = 1e-12);
        // thermal nu = 3: g(3) = 2 log2 2 - 1 log2 1 = 2 bits
        let th = CovarianceMatrix::thermal(3.0_f64).unwrap();
        assert_abs_diff_eq!(th.von_neumann_entropy().unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn entropy_pure_tmsv_zero() {
        let cm = TwoModeSymmetricCM::new(5.0_f64, 5.0, 24.0_f64.sqrt())
            .unwrap()
            .to_cm();
        assert_abs_diff_eq!(cm.von_neumann_entropy().unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn entropy_kernel_monotone_and_zero_at_one() {
        assert_eq!(entropy_g(1.0_f64), 0.0);
        let mut prev = 0.0;
        for i in 1..60 {
            let nu = 1.0 + 0.25 * i as f64;
            let g = entropy_g(nu);
            assert!(g > prev, "g must increase, g({nu}) = {g} <= {prev}");
            prev = g;
        }
    }

    #[test]
    fn squeezer_identity_at_eta_one() {
        let cm = TwoModeSymmetricCM::new(2.0_f64, 1.5, 0.7).unwrap().to_cm();
        let out = cm.apply_two_mode_squeezer(0, 1, 1.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(out.entry(i, j), cm.entry(i, j), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn squeezer_on_vacua_matches_direct_product_oracle() {
        let eta = 2.0_f64;
        let out = CovarianceMatrix::vacuum(2)
            .apply_two_mode_squeezer(0, 1, eta)
            .unwrap();
        // oracle: S(2)^T I S(2) computed with an independent matrix library
        let ch = eta.sqrt();
        let sh = (eta - 1.0).sqrt();
        let s = DMatrix::from_row_slice(
            4,
            4,
            &[
                ch, 0.0, sh, 0.0, //
                0.0, ch, 0.0, -sh, //
                sh, 0.0, ch, 0.0, //
                0.0, -sh, 0.0, ch,
            ],
        );
        let expect = s.transpose() * DMatrix::<f64>::identity(4, 4) * s;
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(out.entry(i, j), expect[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn squeezer_rejects_eta_below_one() {
        let cm = CovarianceMatrix::<f64>::vacuum(2);
        assert!(matches!(
            cm.apply_two_mode_squeezer(0, 1, 0.99),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn beamsplitter_identity_and_vacuum_invariance() {
        let cm = TwoModeSymmetricCM::new(2.0_f64, 1.5, 0.7).unwrap().to_cm();
        let out = cm.apply_beamsplitter(0, 1, 1.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(out.entry(i, j), cm.entry(i, j), epsilon = 1e-14);
            }
        }
        let vac = CovarianceMatrix::<f64>::vacuum(2);
        for t in [0.1, 0.35, 0.8] {
            let out = vac.apply_beamsplitter(0, 1, t).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(out.entry(i, j), want, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn beamsplitter_thermal_vacuum_half() {
        let v = 4.0_f64;
        // the sign of the output cross-correlation tracks which input slot
        // carries the thermal state; both orders against the closed form
        let swapped = CovarianceMatrix::vacuum(1)
            .tensor(&CovarianceMatrix::thermal(v).unwrap())
            .apply_beamsplitter(0, 1, 0.5)
            .unwrap();
        assert_abs_diff_eq!(swapped.entry(0, 2), (1.0 - v) / 2.0, epsilon = 1e-12);

        let input = CovarianceMatrix::thermal(v)
            .unwrap()
            .tensor(&CovarianceMatrix::vacuum(1));
        let out = input.apply_beamsplitter(0, 1, 0.5).unwrap();
        assert_abs_diff_eq!(out.entry(0, 0), (v + 1.0) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.entry(2, 2), (v + 1.0) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.entry(0, 2), (v - 1.0) / 2.0, epsilon = 1e-12);
        // direct 4x4 product oracle
        let t: f64 = 0.5;
        let (ct, st) = (t.sqrt(), (1.0 - t).sqrt());
        let bs = DMatrix::from_row_slice(
            4,
            4,
            &[
                ct, 0.0, st, 0.0, //
                0.0, ct, 0.0, st, //
                -st, 0.0, ct, 0.0, //
                0.0, -st, 0.0, ct,
            ],
        );
        let g = DMatrix::from_row_slice(4, 4, &input.to_row_major());
        let expect = bs.transpose() * g * bs;
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(out.entry(i, j), expect[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn beamsplitter_rejects_bad_transmission() {
        let cm = CovarianceMatrix::<f64>::vacuum(2);
        assert!(cm.apply_beamsplitter(0, 1, 0.0).is_err());
        assert!(cm.apply_beamsplitter(0, 1, 1.2).is_err());
    }

    #[test]
    fn homodyne_product_state_untouched() {
        let cm = CovarianceMatrix::thermal(3.0_f64)
            .unwrap()
            .tensor(&CovarianceMatrix::thermal(2.0).unwrap());
        let out = cm.condition_on_homodyne(1, Quadrature::X).unwrap();
        assert_eq!(out.modes(), 1);
        assert_abs_diff_eq!(out.entry(0, 0), 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.entry(1, 1), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn homodyne_schur_complement_hand_value() {
        let cm = TwoModeSymmetricCM::new(3.0_f64, 2.0, 1.0).unwrap().to_cm();
        let out = cm.condition_on_homodyne(1, Quadrature::X).unwrap();
        // x: a - c^2/b = 3 - 1/2; p untouched
        assert_abs_diff_eq!(out.entry(0, 0), 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(out.entry(1, 1), 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.entry(0, 1), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn homodyne_singular_variance_rejected() {
        let rows = [1e-13, 0.0, 0.0, 1.0];
        let cm = CovarianceMatrix::<f64>::from_rows(1, &rows).unwrap();
        assert!(matches!(
            cm.condition_on_homodyne(0, Quadrature::X),
            Err(Error::SingularConditioning)
        ));
    }

    #[test]
    fn heterodyne_matches_block_construction() {
        let (a, b, c) = (3.0_f64, 1.525, 2.0_f64.sqrt());
        let cm = TwoModeSymmetricCM::new(a, b, c).unwrap().to_cm();
        let out = cm.condition_on_heterodyne(0).unwrap();
        assert_eq!(out.modes(), 2);
        // closed form of the (B, C) conditional state
        assert_abs_diff_eq!(out.entry(0, 0), b - c * c / (a + 1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(out.entry(1, 1), b, epsilon = 1e-12);
        assert_abs_diff_eq!(out.entry(2, 2), 2.0 * a / (a + 1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(out.entry(3, 3), (a + 1.0) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            out.entry(0, 2),
            2.0_f64.sqrt() * c / (a + 1.0),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(out.entry(1, 3), -c / 2.0_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn heterodyne_product_state_decouples() {
        let (a, b) = (2.5_f64, 1.8);
        let cm = CovarianceMatrix::thermal(a)
            .unwrap()
            .tensor(&CovarianceMatrix::thermal(b).unwrap());
        let out = cm.condition_on_heterodyne(0).unwrap();
        assert_abs_diff_eq!(out.entry(0, 0), b, epsilon = 1e-12);
        assert_abs_diff_eq!(out.entry(1, 1), b, epsilon = 1e-12);
        assert_abs_diff_eq!(out.entry(2, 2), 2.0 * a / (a + 1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(out.entry(3, 3), (a + 1.0) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.entry(0, 2), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.entry(1, 3), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn heterodyne_vacuum_alice_leaves_bob() {
        let cm = CovarianceMatrix::vacuum(1).tensor(&CovarianceMatrix::thermal(2.2_f64).unwrap());
        let out = cm.condition_on_heterodyne(0).unwrap();
        assert_abs_diff_eq!(out.entry(0, 0), 2.2, epsilon = 1e-12);
        assert_abs_diff_eq!(out.entry(1, 1), 2.2, epsilon = 1e-12);
    }

    #[test]
    fn pure_heterodyne_conditional_stays_pure() {
        let cm = CovarianceMatrix::<f64>::epr(3.0).unwrap();
        let cond = cm.condition_on_heterodyne(0).unwrap();
        assert!(cond.von_neumann_entropy().unwrap() < 1e-9);
    }

    #[test]
    fn entropy_additivity() {
        let g1 = CovarianceMatrix::thermal(2.3_f64).unwrap();
        let g2 = TwoModeSymmetricCM::new(3.0_f64, 2.0, 1.0).unwrap().to_cm();
        let joint = g1.tensor(&g2);
        let s = joint.von_neumann_entropy().unwrap();
        let s1 = g1.von_neumann_entropy().unwrap();
        let s2 = g2.von_neumann_entropy().unwrap();
        assert_abs_diff_eq!(s, s1 + s2, epsilon = 1e-10);
    }

    #[test]
    fn f32_smoke() {
        let cm = CovarianceMatrix::<f32>::epr(2.0).unwrap();
        let s = cm.symplectic_eigenvalues().unwrap();
        for &nu in s.values() {
            assert!((nu - 1.0).abs() < 1e-4);
        }
        let th = CovarianceMatrix::<f32>::thermal(3.0).unwrap();
        assert!((th.von_neumann_entropy().unwrap() - 2.0).abs() < 1e-5);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        /// A random physical 3-mode state built from vacua/thermals and
        /// passive+active operations; physical by construction.
        fn random_state(
            v1: f64,
            v2: f64,
            eta: f64,
            t1: f64,
            t2: f64,
        ) -> CovarianceMatrix<f64> {
            CovarianceMatrix::thermal(v1)
                .unwrap()
                .tensor(&CovarianceMatrix::thermal(v2).unwrap())
                .tensor(&CovarianceMatrix::vacuum(1))
                .apply_two_mode_squeezer(0, 2, eta)
                .unwrap()
                .apply_beamsplitter(1, 2, t1)
                .unwrap()
                .apply_beamsplitter(0, 1, t2)
                .unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn symplectic_spectrum_preserved(
                v1 in 1.0..6.0f64, v2 in 1.0..6.0f64,
                eta in 1.0..3.0f64, t1 in 0.05..1.0f64, t2 in 0.05..1.0f64,
            ) {
                let base = CovarianceMatrix::thermal(v1).unwrap()
                    .tensor(&CovarianceMatrix::thermal(v2).unwrap())
                    .tensor(&CovarianceMatrix::vacuum(1));
                let before = base.symplectic_eigenvalues().unwrap();
                let after = base
                    .apply_two_mode_squeezer(0, 2, eta).unwrap()
                    .apply_beamsplitter(1, 2, t1).unwrap()
                    .apply_beamsplitter(0, 1, t2).unwrap()
                    .symplectic_eigenvalues().unwrap();
                for (x, y) in before.values().iter().zip(after.values()) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }

            #[test]
            fn purity_of_vacuum_constructions(
                eta in 1.0..3.0f64, t1 in 0.05..1.0f64, t2 in 0.05..1.0f64,
            ) {
                let s = CovarianceMatrix::<f64>::vacuum(3)
                    .apply_two_mode_squeezer(0, 1, eta).unwrap()
                    .apply_beamsplitter(1, 2, t1).unwrap()
                    .apply_beamsplitter(0, 2, t2).unwrap()
                    .von_neumann_entropy().unwrap();
                prop_assert!(s < 1e-9);
            }

            #[test]
            fn homodyne_commutes_with_relabeling(
                v1 in 1.0..5.0f64, v2 in 1.0..5.0f64,
                eta in 1.0..2.5f64, t1 in 0.1..1.0f64, t2 in 0.1..1.0f64,
            ) {
                let cm = random_state(v1, v2, eta, t1, t2);
                // condition on mode 2, then compare against relabel-first
                let direct = cm.condition_on_homodyne(2, Quadrature::X).unwrap();
                let relabeled = cm.permute_modes(&[1, 0, 2]).unwrap()
                    .condition_on_homodyne(2, Quadrature::X).unwrap()
                    .permute_modes(&[1, 0]).unwrap();
                for i in 0..direct.dim() {
                    for j in 0..direct.dim() {
                        prop_assert!((direct.entry(i, j) - relabeled.entry(i, j)).abs() < 1e-10);
                    }
                }
            }

            #[test]
            fn produced_states_stay_physical(
                v1 in 1.0..6.0f64, v2 in 1.0..6.0f64,
                eta in 1.0..3.0f64, t1 in 0.05..1.0f64, t2 in 0.05..1.0f64,
            ) {
                let cm = random_state(v1, v2, eta, t1, t2);
                prop_assert!(cm.check_physical().is_ok());
                let cond = cm.condition_on_homodyne(0, Quadrature::P).unwrap();
                prop_assert!(cond.check_physical().is_ok());
            }
        }
    }
}

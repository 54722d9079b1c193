//! Small dense Hermitian matrix utilities.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::netmodel::{CMat, CVec};

/// Relative tolerance on ||m - m^H||_F for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Frobenius norm below which a block counts as zero.
pub const ZERO_NORM: f64 = 1e-14;
/// Eigenvalues below this fraction of the largest are dropped by the pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
}

impl Spectrum {
    pub fn max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

pub fn is_hermitian(m: &CMat) -> bool {
    if !m.is_square() {
        return false;
    }
    let skew = (m - m.adjoint()).norm();
    skew <= HERMITIAN_TOL * m.norm().max(1.0)
}

/// Cyclic complex Jacobi. Returns the spectrum and a unitary matrix whose
/// columns are the matching eigenvectors.
pub fn hermitian_eigendecompose(m: &CMat) -> Result<(Spectrum, CMat)> {
    if !is_hermitian(m) {
        return Err(Error::NotHermitian);
    }
    let n = m.nrows();
    let mut a = (m + m.adjoint()).scale(0.5);
    let mut v = CMat::identity(n, n);
    let scale = a.norm();
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-17 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                let ph = apq / r; // e^{i phi}
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G = D J with D = diag(1, e^{-i phi}) on (p, q)
                let gpp = Complex64::new(c, 0.0);
                let gpq = Complex64::new(s, 0.0);
                let gqp = -ph.conj() * s;
                let gqq = ph.conj() * c;
                for k in 0..n {
                    let (x, y) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = x * gpp + y * gqp;
                    a[(k, q)] = x * gpq + y * gqq;
                }
                for k in 0..n {
                    let (x, y) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = gpp.conj() * x + gqp.conj() * y;
                    a[(q, k)] = gpq.conj() * x + gqq.conj() * y;
                }
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                a[(p, p)].im = 0.0;
                a[(q, q)].im = 0.0;
                for k in 0..n {
                    let (x, y) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = x * gpp + y * gqp;
                    v[(k, q)] = x * gpq + y * gqq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let eigenvalues = idx.iter().map(|&i| a[(i, i)].re).collect();
    let vecs = CMat::from_fn(n, n, |r, c| v[(r, idx[c])]);
    Ok((Spectrum { eigenvalues }, vecs))
}

/// |lambda_2| / |lambda_1| with eigenvalues ordered by magnitude; 0 for 1x1.
pub fn rank_ratio(m: &CMat) -> Result<f64> {
    if !is_hermitian(m) {
        return Err(Error::NotHermitian);
    }
    if m.norm() < ZERO_NORM {
        return Err(Error::ZeroMatrix);
    }
    if m.nrows() == 1 {
        return Ok(0.0);
    }
    let (spec, _) = hermitian_eigendecompose(m)?;
    let mut mags: Vec<f64> = spec.eigenvalues.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    Ok(mags[1] / mags[0])
}

/// lambda_min(m) >= -tol * max(1, ||m||_2). Non-Hermitian input is not PSD.
pub fn psd_check(m: &CMat, tol: f64) -> bool {
    match hermitian_eigendecompose(m) {
        Ok((spec, _)) => {
            let norm = spec.max().abs().max(spec.min().abs());
            spec.min() >= -tol * norm.max(1.0)
        }
        Err(_) => false,
    }
}

pub fn pseudo_inverse(m: &CMat) -> Result<CMat> {
    let (spec, u) = hermitian_eigendecompose(m)?;
    let n = m.nrows();
    let lmax = spec.eigenvalues.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut out = CMat::zeros(n, n);
    if lmax == 0.0 {
        return Ok(out);
    }
    for (k, &lam) in spec.eigenvalues.iter().enumerate() {
        if lam.abs() > PINV_CUTOFF * lmax {
            let col = u.column(k);
            out += (col * col.adjoint()).scale(1.0 / lam);
        }
    }
    Ok(out)
}

/// sqrt(lambda_1) u_1, rotated so its first nonzero entry is real and >= 0.
pub fn leading_rank1_factor(m: &CMat) -> Result<CVec> {
    if !is_hermitian(m) {
        return Err(Error::NotHermitian);
    }
    if m.norm() < ZERO_NORM {
        return Err(Error::ZeroMatrix);
    }
    let (spec, u) = hermitian_eigendecompose(m)?;
    let mut x: CVec = u.column(0).scale(spec.max().max(0.0).sqrt());
    align_phase(&mut x);
    Ok(x)
}

/// Rotates x so its first entry of non-negligible magnitude is real positive.
pub fn align_phase(x: &mut CVec) {
    let big = x.iter().fold(0.0f64, |a, v| a.max(v.norm()));
    if let Some(first) = x.iter().find(|v| v.norm() > 1e-12 * big).copied() {
        let rot = first.conj() / first.norm();
        for v in x.iter_mut() {
            *v *= rot;
        }
    }
}

/// [[Re m, -Im m], [Im m, Re m]]
pub fn hermitian_to_real_embedding(m: &CMat) -> Result<DMatrix<f64>> {
    if !is_hermitian(m) {
        return Err(Error::NotHermitian);
    }
    let k = m.nrows();
    Ok(DMatrix::from_fn(2 * k, 2 * k, |r, c| {
        let v = m[(r % k, c % k)];
        match (r < k, c < k) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn diag(d: &[f64]) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(d.len(), d.iter().map(|x| c(*x, 0.0))))
    }

    pub(crate) fn random_hermitian(rng: &mut impl Rng, n: usize) -> CMat {
        let a = CMat::from_fn(n, n, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        (&a + a.adjoint()).scale(0.5)
    }

    fn reconstruct(spec: &Spectrum, u: &CMat) -> CMat {
        let n = u.nrows();
        let mut out = CMat::zeros(n, n);
        for (k, &l) in spec.eigenvalues.iter().enumerate() {
            let col = u.column(k);
            out += (col * col.adjoint()).scale(l);
        }
        out
    }

    #[test]
    fn identity_and_rank_one() {
        let (s, _) = hermitian_eigendecompose(&CMat::identity(2, 2)).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 1.0]);
        let u = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]).scale(0.5f64.sqrt());
        let m = &u * u.adjoint();
        let (s, _) = hermitian_eigendecompose(&m).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-15 && s.eigenvalues[1].abs() < 1e-15);
        assert!(rank_ratio(&m).unwrap() < 1e-15);
    }

    #[test]
    fn rank_ratio_cases() {
        assert_eq!(rank_ratio(&diag(&[4.0, 1.0])).unwrap(), 0.25);
        assert_eq!(rank_ratio(&CMat::identity(3, 3)).unwrap(), 1.0);
        assert_eq!(rank_ratio(&diag(&[3.0])).unwrap(), 0.0);
        assert!(matches!(
            rank_ratio(&CMat::zeros(2, 2)),
            Err(Error::ZeroMatrix)
        ));
        // magnitude ordering, not value ordering
        assert_eq!(rank_ratio(&diag(&[1.0, -4.0])).unwrap(), 0.25);
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            hermitian_eigendecompose(&m),
            Err(Error::NotHermitian)
        ));
        assert!(!psd_check(&m, 1e-9));
        assert!(hermitian_to_real_embedding(&m).is_err());
    }

    #[test]
    fn psd_cases() {
        assert!(psd_check(&CMat::identity(3, 3), 1e-9));
        assert!(!psd_check(&diag(&[1.0, -1.0]), 1e-9));
        let u = CVec::from_vec(vec![c(1.0, 0.5), c(-0.3, 0.2)]);
        let m = &u * u.adjoint() - CMat::identity(2, 2).scale(1e-14);
        assert!(psd_check(&m, 1e-9));
    }

    #[test]
    fn pseudo_inverse_cases() {
        let p = pseudo_inverse(&diag(&[2.0, 0.0])).unwrap();
        assert!((p - diag(&[0.5, 0.0])).norm() < 1e-15);
        assert_eq!(
            pseudo_inverse(&CMat::zeros(3, 3)).unwrap(),
            CMat::zeros(3, 3)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(&mut rng, 3);
        let m = &a * a.adjoint() + CMat::identity(3, 3);
        let p = pseudo_inverse(&m).unwrap();
        assert!((&m * &p - CMat::identity(3, 3)).norm() < 1e-10);
    }

    #[test]
    fn leading_factor_cases() {
        let u = CVec::from_vec(vec![c(0.0, 2.0), c(1.0, -1.0)]);
        let m = &u * u.adjoint();
        let x = leading_rank1_factor(&m).unwrap();
        assert!(x[0].im == 0.0 && x[0].re > 0.0);
        assert!((&x * x.adjoint() - &m).norm() < 1e-13);
        // u rotated by -i has a real positive first entry
        assert!((x - u * c(0.0, -1.0)).norm() < 1e-13);
        let x = leading_rank1_factor(&diag(&[4.0, 1.0])).unwrap();
        assert!((x - CVec::from_vec(vec![c(2.0, 0.0), c(0.0, 0.0)])).norm() < 1e-15);
        assert!(leading_rank1_factor(&CMat::zeros(2, 2)).is_err());
    }

    #[test]
    fn leading_factor_is_best_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_hermitian(&mut rng, 4);
            let m = &a * a.adjoint();
            let x = leading_rank1_factor(&m).unwrap();
            let (spec, _) = hermitian_eigendecompose(&m).unwrap();
            // Eckart-Young: the residual is the tail of the spectrum
            let tail: f64 = spec.eigenvalues[1..]
                .iter()
                .map(|l| l * l)
                .sum::<f64>()
                .sqrt();
            assert!(((&m - &x * x.adjoint()).norm() - tail).abs() < 1e-10 * m.norm());
        }
    }

    #[test]
    fn embedding_cases() {
        let m = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(3.0, 0.0)]);
        let e = hermitian_to_real_embedding(&m).unwrap();
        let re = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        assert_eq!(e.view((0, 0), (2, 2)), re);
        assert_eq!(e.view((2, 2), (2, 2)), re);
        assert_eq!(e.view((0, 2), (2, 2)), DMatrix::<f64>::zeros(2, 2));

        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(1.0, 0.0)]);
        let e = hermitian_to_real_embedding(&m).unwrap();
        let mut ev: Vec<f64> = e
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        for (got, want) in ev.iter().zip([2.0, 2.0, 0.0, 0.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn random_reconstruction_and_doubling() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=6 {
            for _ in 0..10 {
                let m = random_hermitian(&mut rng, n);
                let (spec, u) = hermitian_eigendecompose(&m).unwrap();
                assert!((reconstruct(&spec, &u) - &m).norm() <= 1e-10 * m.norm());
                assert!((u.adjoint() * &u - CMat::identity(n, n)).norm() < 1e-12);
                let e = hermitian_to_real_embedding(&m).unwrap();
                let mut ev: Vec<f64> = e
                    .clone()
                    .symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .copied()
                    .collect();
                ev.sort_by(|a, b| b.total_cmp(a));
                for k in 0..n {
                    assert!((ev[2 * k] - spec.eigenvalues[k]).abs() < 1e-10);
                    assert!((ev[2 * k + 1] - spec.eigenvalues[k]).abs() < 1e-10);
                }
                assert!((e.trace() - 2.0 * m.trace().re).abs() < 1e-12);
            }
        }
    }
}

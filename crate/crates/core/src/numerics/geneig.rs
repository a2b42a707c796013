//! Trace of the generalized eigenproblem `V x = lambda H x`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest condition number of the (ridged) `H` still accepted.
const MAX_CONDITION: f64 = 1e15;

/// Sum of the generalized eigenvalues of `V x = lambda (H + ridge * s * I) x`,
/// where `s` is the mean diagonal of `H`. With `ridge = 0` and `H`
/// well-conditioned this is `tr(H^-1 V)`.
pub fn generalized_eigen_trace(v: &DMatrix<f64>, h: &DMatrix<f64>, ridge: f64) -> Result<f64> {
    let d = h.nrows();
    if h.ncols() != d || v.nrows() != d || v.ncols() != d {
        return Err(Error::InvalidArgument(format!(
            "shape mismatch: V is {}x{}, H is {}x{}",
            v.nrows(),
            v.ncols(),
            h.nrows(),
            h.ncols()
        )));
    }
    if !(ridge >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ridge must be >= 0, got {ridge}"
        )));
    }
    if d == 0 {
        return Ok(0.0);
    }
    if v.iter().chain(h.iter()).any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite matrix entry".into()));
    }
    let scale = h.diagonal().mean();
    let mut hr = (h + h.transpose()) * 0.5;
    for k in 0..d {
        hr[(k, k)] += ridge * scale;
    }
    let eig = hr.clone().symmetric_eigen();
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| {
            (lo.min(e), hi.max(e.abs()))
        });
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Conditioning { condition });
    }
    let chol = hr.cholesky().ok_or(Error::Conditioning { condition })?;
    // tr(L^-1 V L^-T): the eigenvalues of a similar symmetric matrix.
    let l = chol.l();
    let vs = (v + v.transpose()) * 0.5;
    let left = l
        .solve_lower_triangular(&vs)
        .ok_or_else(|| Error::Matrix("triangular solve failed".into()))?;
    let whole = l
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| Error::Matrix("triangular solve failed".into()))?;
    Ok(whole.trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        &a * a.transpose() + DMatrix::identity(d, d) * 0.5
    }

    #[test]
    fn identity_and_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_pd(&mut rng, 5);
        assert!((generalized_eigen_trace(&h, &h, 0.0).unwrap() - 5.0).abs() < 1e-10);
        let v = &h * 2.0;
        assert!((generalized_eigen_trace(&v, &h, 0.0).unwrap() - 10.0).abs() < 1e-10);
    }

    #[test]
    fn matches_direct_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let h = random_pd(&mut rng, 4);
            let v = random_pd(&mut rng, 4);
            let oracle = (h.clone().try_inverse().unwrap() * &v).trace();
            let got = generalized_eigen_trace(&v, &h, 0.0).unwrap();
            assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
        }
    }

    #[test]
    fn congruence_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let h = random_pd(&mut rng, 4);
            let v = random_pd(&mut rng, 4);
            let j = DMatrix::from_fn(4, 4, |r, c| {
                rng.random::<f64>() - 0.5 + if r == c { 2.0 } else { 0.0 }
            });
            let a = generalized_eigen_trace(&v, &h, 0.0).unwrap();
            let b = generalized_eigen_trace(
                &(j.transpose() * &v * &j),
                &(j.transpose() * &h * &j),
                0.0,
            )
            .unwrap();
            assert!((a - b).abs() <= 1e-6 * a.abs());
        }
    }

    #[test]
    fn singular_h_rejected_without_ridge() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let v = DMatrix::identity(2, 2);
        assert!(matches!(
            generalized_eigen_trace(&v, &h, 0.0),
            Err(Error::Conditioning { .. })
        ));
        assert!(generalized_eigen_trace(&v, &h, 1e-6).is_ok());
    }
}

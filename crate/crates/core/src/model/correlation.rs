use nalgebra::DMatrix;

use super::params::ScrParameters;

/// Cross-correlation between the observed latent variables and the
/// second-order variables (signal coordinates first, then noise).
///
/// Entry `(i, k)` is `corr(y_i, ytilde_k)`. The signal block of
/// `Cov(ytilde)` includes both within- and between-component variance.
pub fn first_second_order_correlation(params: &ScrParameters) -> DMatrix<f64> {
    let p = params.n_vars();
    let q = params.n_signal();
    let g = params.n_components();
    let mut grand = nalgebra::DVector::zeros(q);
    for k in 0..g {
        grand += &params.signal_means[k] * params.weights[k];
    }
    let mut signal_cov = DMatrix::zeros(q, q);
    for k in 0..g {
        let d = &params.signal_means[k] - &grand;
        signal_cov += (params.signal_covariance(k) + &d * d.transpose()) * params.weights[k];
    }
    let mut latent_cov = DMatrix::identity(p, p);
    latent_cov.view_mut((0, 0), (q, q)).copy_from(&signal_cov);
    let mut loadings = DMatrix::zeros(p, p);
    loadings
        .view_mut((0, 0), (p, q))
        .copy_from(&params.signal_loadings);
    loadings
        .view_mut((0, q), (p, p - q))
        .copy_from(&params.noise_loadings);
    let cross = &loadings * &latent_cov;
    let observed_cov = &cross * loadings.transpose();
    DMatrix::from_fn(p, p, |i, k| {
        let v = cross[(i, k)] / (observed_cov[(i, i)] * latent_cov[(k, k)]).sqrt();
        v.clamp(-1.0, 1.0)
    })
}

//! Seeded generators for the benchmark problems.

mod declip;
mod deconv;
mod dnn;
mod lasso;
mod line_spectra;
mod rpca;
mod tv;

pub use declip::{gen_declip, Declip, DeclipParams};
pub use deconv::{gen_sparse_deconv, DeconvParams, SparseDeconv};
pub use dnn::{gen_dnn, gen_rings, Dataset, DnnClassifier, DnnParams, HIDDEN};
pub use lasso::{gen_lasso, Lasso};
pub use line_spectra::{gen_line_spectra, LineSpectra, LineSpectraParams};
pub use rpca::{gen_robust_pca, RobustPca, RpcaParams};
pub use tv::{gen_tv_denoise, piecewise_constant, TvDenoise, TvParams};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use proxkit::Signal;

pub(crate) fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// White Gaussian noise at `snr_db` relative to the mean power of `clean`.
/// Returns the noisy real signal and the noise standard deviation.
pub(crate) fn add_noise(
    clean: &Signal,
    snr_db: Option<f64>,
    rng: &mut ChaCha8Rng,
) -> (Signal, f64) {
    let Some(snr_db) = snr_db else {
        return (clean.clone(), 0.0);
    };
    let power = clean.norm2_sq() / clean.len() as f64;
    let std = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let data = clean
        .real_data()
        .expect("noise is added to real signals")
        .iter()
        .map(|v| v + std * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let noisy = Signal::real(data, clean.shape()).expect("same shape");
    (noisy, std)
}

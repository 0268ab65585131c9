//! Sparse-factor data-generating processes.

use ndarray::{Array1, Array2};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::panel::Panel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityRule {
    /// Keep `s` uniformly chosen time points.
    RandomSupport,
    /// Keep the `s` largest entries in absolute value.
    TopMagnitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    IidGaussian,
    /// `e_t = Φ e_{t-1} + ε_t` with diagonal `Φ`, entries drawn from
    /// `U(0.5, 0.9)` or `U(-0.9, -0.5)` with equal probability.
    Ar1Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadingRule {
    /// iid `U(-2, 2)` entries, each column rescaled to norm `sqrt(N)`.
    UniformRows,
    /// Left singular vectors of an iid `U(-2, 2)` matrix times
    /// `sqrt(N) diag(strengths)`.
    SvdOrthonormalScaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub n: usize,
    pub t: usize,
    pub r: usize,
    /// AR(1) coefficient of each factor.
    pub factor_ar: Vec<f64>,
    pub sparsity_rule: SparsityRule,
    pub sparsity: usize,
    pub noise_kind: NoiseKind,
    pub loading_rule: LoadingRule,
    /// Column multipliers for [`LoadingRule::SvdOrthonormalScaled`].
    pub loading_strengths: Vec<f64>,
    /// Standard deviation of the noise innovations; 0 gives a noise-free panel.
    pub noise_scale: f64,
    pub burn_in: usize,
    pub seed: u64,
}

/// `ceil(sqrt(T))`.
pub fn default_sparsity(t: usize) -> usize {
    (t as f64).sqrt().ceil() as usize
}

impl DgpConfig {
    /// One AR(0.5) factor with random support and `U(-2,2)` loadings of norm `sqrt(N)`.
    pub fn one_factor(n: usize, t: usize, noise_kind: NoiseKind, seed: u64) -> Self {
        Self {
            n,
            t,
            r: 1,
            factor_ar: vec![0.5],
            sparsity_rule: SparsityRule::RandomSupport,
            sparsity: default_sparsity(t),
            noise_kind,
            loading_rule: LoadingRule::UniformRows,
            loading_strengths: vec![1.0],
            noise_scale: 1.0,
            burn_in: 200,
            seed,
        }
    }

    /// Three factors with AR coefficients `(0.5, -0.6, 0.7)`, disjoint random
    /// supports and orthogonal loadings of strengths `sqrt(N) (3, 2, 1)`.
    pub fn three_factor(n: usize, t: usize, noise_kind: NoiseKind, seed: u64) -> Self {
        Self {
            n,
            t,
            r: 3,
            factor_ar: vec![0.5, -0.6, 0.7],
            sparsity_rule: SparsityRule::RandomSupport,
            sparsity: default_sparsity(t),
            noise_kind,
            loading_rule: LoadingRule::SvdOrthonormalScaled,
            loading_strengths: vec![3.0, 2.0, 1.0],
            noise_scale: 1.0,
            burn_in: 200,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::Config("r must be at least 1".into()));
        }
        if self.n < 2 || self.t < 2 {
            return Err(Error::Config(format!("panel must be at least 2x2, got T={} N={}", self.t, self.n)));
        }
        if self.factor_ar.len() != self.r {
            return Err(Error::Config(format!("{} AR coefficients for r={}", self.factor_ar.len(), self.r)));
        }
        if let Some(phi) = self.factor_ar.iter().find(|p| !(p.abs() < 1.0)) {
            return Err(Error::Config(format!("AR coefficient {phi} is not stationary")));
        }
        if self.sparsity == 0 || self.sparsity > self.t {
            return Err(Error::Config(format!("sparsity {} outside 1..={}", self.sparsity, self.t)));
        }
        if self.r * self.sparsity > self.t {
            return Err(Error::Config(format!(
                "{} disjoint supports of size {} do not fit in T={}",
                self.r, self.sparsity, self.t
            )));
        }
        if self.loading_rule == LoadingRule::SvdOrthonormalScaled {
            if self.loading_strengths.len() != self.r {
                return Err(Error::Config(format!(
                    "{} loading strengths for r={}",
                    self.loading_strengths.len(),
                    self.r
                )));
            }
            if self.r > self.n {
                return Err(Error::Config("orthonormal loadings need r <= N".into()));
            }
        }
        if !(self.noise_scale >= 0.0) || !self.noise_scale.is_finite() {
            return Err(Error::Config(format!("noise scale {} must be finite and nonnegative", self.noise_scale)));
        }
        Ok(())
    }
}

/// A simulated panel together with the quantities that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// `T×r` sparse factors, each column with unit sample variance.
    pub factors: Array2<f64>,
    /// `N×r`.
    pub loadings: Array2<f64>,
    /// Sorted 0-based support of each factor column.
    pub supports: Vec<Vec<usize>>,
    /// Uncentred `X = FΛ' + e`.
    pub panel: Panel,
    /// Noise AR coefficients for [`NoiseKind::Ar1Diagonal`].
    pub noise_ar: Option<Array1<f64>>,
    /// Factor columns before sparsification.
    pub dense_factors: Array2<f64>,
}

/// Draws one panel. The same config (seed included) always yields the same panel.
pub fn generate(config: &DgpConfig) -> Result<GroundTruth> {
    config.validate()?;
    let (n, t, r, s) = (config.n, config.t, config.r, config.sparsity);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let dense_factors = ar1_columns(&config.factor_ar, t, config.burn_in, &mut rng);

    let mut factors = Array2::zeros((t, r));
    let mut supports = Vec::with_capacity(r);
    let mut taken = vec![false; t];
    for k in 0..r {
        let free: Vec<usize> = (0..t).filter(|&i| !taken[i]).collect();
        let mut support: Vec<usize> = match config.sparsity_rule {
            SparsityRule::RandomSupport => {
                index::sample(&mut rng, free.len(), s).into_iter().map(|j| free[j]).collect()
            }
            SparsityRule::TopMagnitude => {
                let col = dense_factors.column(k);
                let mut order = free.clone();
                order.sort_by(|&a, &b| col[b].abs().total_cmp(&col[a].abs()).then(a.cmp(&b)));
                order.truncate(s);
                order
            }
        };
        support.sort_unstable();
        for &i in &support {
            taken[i] = true;
            factors[[i, k]] = dense_factors[[i, k]];
        }
        let sd = sample_sd(factors.column(k).iter().copied());
        if !(sd > 0.0) {
            return Err(Error::Numerical(format!("factor {k} is identically zero after sparsification")));
        }
        factors.column_mut(k).mapv_inplace(|v| v / sd);
        supports.push(support);
    }

    let loadings = match config.loading_rule {
        LoadingRule::UniformRows => {
            let mut l = Array2::from_shape_fn((n, r), |_| rng.random_range(-2.0..2.0));
            for mut col in l.columns_mut() {
                let norm = linalg::norm2(col.view());
                col.mapv_inplace(|v| v * (n as f64).sqrt() / norm);
            }
            l
        }
        LoadingRule::SvdOrthonormalScaled => {
            let m = Array2::from_shape_fn((n, r), |_| rng.random_range(-2.0..2.0));
            let mut u = linalg::left_singular_vectors(m.view());
            for (k, mut col) in u.columns_mut().into_iter().enumerate() {
                col.mapv_inplace(|v| v * (n as f64).sqrt() * config.loading_strengths[k]);
            }
            u
        }
    };

    let (noise, noise_ar) = match config.noise_kind {
        NoiseKind::IidGaussian => (Array2::from_shape_fn((t, n), |_| rng.sample::<f64, _>(StandardNormal)), None),
        NoiseKind::Ar1Diagonal => {
            let phi = Array1::from_shape_fn(n, |_| {
                if rng.random_bool(0.5) {
                    rng.random_range(0.5..0.9)
                } else {
                    rng.random_range(-0.9..-0.5)
                }
            });
            let e = ar1_columns(phi.as_slice().unwrap(), t, config.burn_in, &mut rng);
            (e, Some(phi))
        }
    };

    let values = factors.dot(&loadings.t()) + noise * config.noise_scale;
    let panel = Panel::from_values(values)?;
    Ok(GroundTruth { factors, loadings, supports, panel, noise_ar, dense_factors })
}

/// Independent AR(1) columns driven by standard normal innovations, started
/// at zero and run for `burn_in` steps before the `t` kept samples. Innovations
/// are drawn time-major.
fn ar1_columns(phi: &[f64], t: usize, burn_in: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let k = phi.len();
    let mut state = vec![0.0; k];
    let mut out = Array2::zeros((t, k));
    for step in 0..burn_in + t {
        for j in 0..k {
            let eta: f64 = rng.sample(StandardNormal);
            state[j] = phi[j] * state[j] + eta;
        }
        if step >= burn_in {
            for j in 0..k {
                out[[step - burn_in, j]] = state[j];
            }
        }
    }
    out
}

/// Sample standard deviation with the `n - 1` divisor.
pub(crate) fn sample_sd(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

//! Per-layer linear MMSE equalizer and its equivalent scalar channel.
//!
//! For layer `m` the receiver sees the cancelled signal
//! `ỹ_m = h_k x_m(k) + H_isi x_isi + Σ_{j>m} H x_j + w`, so the window
//! covariance is `S·HHᵀ + σ_w²I` with `S = Σ_{j≥m} P_j`. The filter
//! `g = P_m (S·HHᵀ + σ_w²I)⁻¹ h_k` turns the window into the scalar channel
//! `x̃ = α x_m + ζ` with `α = gᵀh_k`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::channel::ConvolutionMatrix;
use crate::error::{Error, Result};

/// A designed LMMSE filter together with the equivalent-channel parameters it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct LmmseDesign {
    filter: DVector<f64>,
    gain: f64,
    noise_variance: f64,
    sinr: f64,
    layer_index: usize,
    layer_power: f64,
}

impl LmmseDesign {
    /// Filter taps applied to `ỹ(k-L_g) ..= ỹ(k+L_g)`.
    pub fn filter(&self) -> &DVector<f64> {
        &self.filter
    }

    /// `α_m = gᵀh_k`.
    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// `σ_ζ²`: residual self-ISI, undecoded layers and filtered noise.
    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// `α² P_m / σ_ζ²`.
    pub fn sinr(&self) -> f64 {
        self.sinr
    }

    /// Zero-based layer index.
    pub fn layer_index(&self) -> usize {
        self.layer_index
    }

    pub fn layer_power(&self) -> f64 {
        self.layer_power
    }

    pub fn half_window(&self) -> usize {
        self.filter.len() / 2
    }

    pub fn equivalent_channel(&self) -> EquivalentChannel {
        EquivalentChannel {
            layer: self.layer_index + 1,
            gain: self.gain,
            noise_variance: self.noise_variance,
            layer_power: self.layer_power,
        }
    }

    /// Filters a whole block: `x̃(k) = Σ_r g_r ỹ(k - L_g + r)`, zero outside the block.
    pub fn apply(&self, signal: &[f64]) -> Vec<f64> {
        self.apply_range(signal, 0..signal.len())
    }

    /// Like [`apply`](Self::apply) but only for positions in `range`.
    pub fn apply_range(&self, signal: &[f64], range: std::ops::Range<usize>) -> Vec<f64> {
        let lg = self.half_window();
        let n = signal.len();
        let g = self.filter.as_slice();
        range
            .map(|k| {
                let lo = k.saturating_sub(lg);
                let hi = (k + lg + 1).min(n);
                let offset = lo + lg - k;
                dot(&signal[lo..hi], &g[offset..offset + (hi - lo)])
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, ra) = (a.chunks_exact(4), a.chunks_exact(4).remainder());
    let cb = b.chunks_exact(4);
    let rb = cb.remainder();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// The scalar AWGN channel a layer's decoder sees, for external code design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalentChannel {
    /// One-based layer number.
    pub layer: usize,
    pub gain: f64,
    pub noise_variance: f64,
    pub layer_power: f64,
}

impl EquivalentChannel {
    pub fn to_json(channels: &[EquivalentChannel]) -> String {
        serde_json::to_string_pretty(channels).expect("plain records serialize")
    }

    pub fn from_json(text: &str) -> std::result::Result<Vec<EquivalentChannel>, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Designs the filter for the first entry of `powers`; the remaining entries
/// are the not-yet-decoded layers treated as interference.
pub fn design_filter(
    conv: &ConvolutionMatrix,
    powers: &[f64],
    noise_variance: f64,
) -> Result<LmmseDesign> {
    design_filter_for_layer(conv, 0, powers, noise_variance, None)
}

/// Like [`design_filter`], recording `layer_index` and optionally adding
/// `ridge·I` to the covariance before factorization.
pub fn design_filter_for_layer(
    conv: &ConvolutionMatrix,
    layer_index: usize,
    powers: &[f64],
    noise_variance: f64,
    ridge: Option<f64>,
) -> Result<LmmseDesign> {
    check_inputs(powers, noise_variance)?;
    let n = conv.rows();
    let total: f64 = powers.iter().sum();
    let mut cov = conv.gram() * total;
    let diag = noise_variance + ridge.unwrap_or(0.0);
    for i in 0..n {
        cov[(i, i)] += diag;
    }
    let chol = cov.cholesky().ok_or(Error::SingularCovariance)?;
    let filter = chol.solve(&conv.center()) * powers[0];
    Ok(finish_design(conv, filter, layer_index, powers, noise_variance))
}

fn check_inputs(powers: &[f64], noise_variance: f64) -> Result<()> {
    if powers.is_empty() {
        return Err(Error::InvalidParameter {
            name: "powers",
            reason: "target layer power is required".into(),
        });
    }
    for (layer, &power) in powers.iter().enumerate() {
        if !(power.is_finite() && power >= 0.0) {
            return Err(Error::NonPositivePower { layer, power });
        }
    }
    if !(noise_variance.is_finite() && noise_variance >= 0.0) {
        return Err(Error::InvalidNoiseVariance(noise_variance));
    }
    Ok(())
}

/// Derives gain, `σ_ζ²` (three-term sum) and SINR for a given filter.
fn finish_design(
    conv: &ConvolutionMatrix,
    filter: DVector<f64>,
    layer_index: usize,
    powers: &[f64],
    noise_variance: f64,
) -> LmmseDesign {
    let p_m = powers[0];
    let others: f64 = powers[1..].iter().sum();
    let u = conv.full().tr_mul(&filter);
    let c = conv.center_index();
    let gain = u[c];
    let self_isi: f64 = u
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != c)
        .map(|(_, v)| v * v)
        .sum();
    let interference = u.norm_squared();
    let sigma_zeta2 = p_m * self_isi + others * interference + noise_variance * filter.norm_squared();
    let sinr = if gain == 0.0 {
        0.0
    } else if sigma_zeta2 > 0.0 {
        gain * gain * p_m / sigma_zeta2
    } else {
        f64::INFINITY
    };
    LmmseDesign {
        filter,
        gain,
        noise_variance: sigma_zeta2,
        sinr,
        layer_index,
        layer_power: p_m,
    }
}

/// `x̃ = gᵀ·window`.
pub fn estimate_symbol(design: &LmmseDesign, window: &[f64]) -> Result<f64> {
    if window.len() != design.filter.len() {
        return Err(Error::LengthMismatch {
            expected: design.filter.len(),
            actual: window.len(),
        });
    }
    Ok(design.filter.iter().zip(window).map(|(g, y)| g * y).sum())
}

/// `½ log₂(1 + SINR)` in bits per symbol.
pub fn gaussian_rate(sinr: f64) -> f64 {
    0.5 * sinr.ln_1p() / std::f64::consts::LN_2
}

/// Gaussian-input rate of the design's equivalent scalar channel.
pub fn analytic_layer_rate(design: &LmmseDesign) -> f64 {
    gaussian_rate(design.sinr)
}

/// Eigendecomposition of `HHᵀ` for repeated designs on the same window.
///
/// With `HHᵀ = U Λ Uᵀ` and `b = Uᵀh_k`, the gain is
/// `α = P_m Σ_i b_i² / (S λ_i + σ_w²)`, which costs `O(L_g)` per evaluation.
#[derive(Debug, Clone)]
pub struct SpectralLmmse {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    projections: DVector<f64>,
    noise_variance: f64,
}

impl SpectralLmmse {
    pub fn new(conv: &ConvolutionMatrix, noise_variance: f64) -> Result<Self> {
        if !(noise_variance.is_finite() && noise_variance > 0.0) {
            return Err(Error::ZeroNoiseVariance);
        }
        let eig = SymmetricEigen::new(conv.gram());
        let eigenvalues = eig.eigenvalues.map(|l| l.max(0.0));
        let projections = eig.eigenvectors.tr_mul(&conv.center());
        Ok(SpectralLmmse {
            eigenvalues,
            eigenvectors: eig.eigenvectors,
            projections,
            noise_variance,
        })
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// `α` for target power `p_m` against total window power `total ≥ p_m`.
    pub fn gain(&self, p_m: f64, total: f64) -> f64 {
        p_m * self
            .eigenvalues
            .iter()
            .zip(self.projections.iter())
            .map(|(l, b)| b * b / (total * l + self.noise_variance))
            .sum::<f64>()
    }

    /// `α/(1-α)`.
    pub fn sinr(&self, p_m: f64, total: f64) -> f64 {
        let a = self.gain(p_m, total);
        a / (1.0 - a)
    }

    pub fn filter(&self, p_m: f64, total: f64) -> DVector<f64> {
        let scaled = DVector::from_iterator(
            self.projections.len(),
            self.eigenvalues
                .iter()
                .zip(self.projections.iter())
                .map(|(l, b)| p_m * b / (total * l + self.noise_variance)),
        );
        &self.eigenvectors * scaled
    }
}

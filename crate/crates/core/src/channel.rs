//! FIR intersymbol-interference channel with additive white Gaussian noise.
//!
//! Signals are real-valued. A block of `N` symbols is convolved with the
//! channel taps starting from a zero state; the output has the same length
//! as the input (the convolution tail is dropped).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{Purpose, StreamKey};

/// The short two-tap test channel `{1, 1}`.
pub const H1_TAPS: [f64; 2] = [1.0, 1.0];

/// The ten-tap long test channel.
pub const H2_TAPS: [f64; 10] = [
    -0.432, -1.665, 0.125, 0.287, -1.146, 1.190, 1.189, -0.037, 0.327, 0.174,
];

/// A causal FIR channel `h(0..=L_h)` followed by AWGN of variance `noise_variance`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    taps: Vec<f64>,
    noise_variance: f64,
}

impl ChannelModel {
    pub fn new(taps: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::EmptyTaps);
        }
        if taps.iter().any(|t| !t.is_finite()) || taps.iter().all(|&t| t == 0.0) {
            return Err(Error::InvalidTaps);
        }
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(Error::InvalidNoiseVariance(noise_variance));
        }
        Ok(ChannelModel {
            taps,
            noise_variance,
        })
    }

    /// Channel with `count` standard-normal taps drawn from `seed`.
    pub fn random(count: usize, seed: u64, noise_variance: f64) -> Result<Self> {
        let mut rng = StreamKey::new(seed, Purpose::ChannelTaps, 0, 0).rng();
        let taps = (0..count).map(|_| rng.sample(StandardNormal)).collect();
        Self::new(taps, noise_variance)
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Channel order `L_h` (number of taps minus one).
    pub fn order(&self) -> usize {
        self.taps.len() - 1
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn with_noise_variance(&self, noise_variance: f64) -> Result<Self> {
        Self::new(self.taps.clone(), noise_variance)
    }

    /// Sum of squared taps.
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }

    /// `|H(e^{jω})|²`.
    pub fn power_response(&self, omega: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, &t) in self.taps.iter().enumerate() {
            let (s, c) = (omega * i as f64).sin_cos();
            re += t * c;
            im -= t * s;
        }
        re * re + im * im
    }

    /// Noiseless causal convolution truncated to `input.len()` samples.
    pub fn convolve(&self, input: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; input.len()];
        self.convolve_accumulate(input, 1.0, &mut out);
        out
    }

    /// `out[k] += scale * Σ_i h(i) input[k - i]`, zero initial state.
    pub fn convolve_accumulate(&self, input: &[f64], scale: f64, out: &mut [f64]) {
        debug_assert_eq!(input.len(), out.len());
        for (i, &t) in self.taps.iter().enumerate() {
            if t == 0.0 || i >= input.len() {
                continue;
            }
            let c = scale * t;
            for (o, &x) in out[i..].iter_mut().zip(input) {
                *o += c * x;
            }
        }
    }
}

/// `M` independent BPSK layers of `N` symbols each; row `j` holds `±√P_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredSignal {
    layer_symbols: Vec<Vec<f64>>,
    powers: Vec<f64>,
}

impl LayeredSignal {
    /// Builds a signal from explicit symbols, checking each row has magnitude `√P_j`.
    pub fn from_symbols(layer_symbols: Vec<Vec<f64>>, powers: Vec<f64>) -> Result<Self> {
        validate_powers(&powers)?;
        if layer_symbols.len() != powers.len() {
            return Err(Error::LengthMismatch {
                expected: powers.len(),
                actual: layer_symbols.len(),
            });
        }
        let n = layer_symbols[0].len();
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "block_length",
                reason: "must be at least 1".into(),
            });
        }
        for (row, &p) in layer_symbols.iter().zip(&powers) {
            if row.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
            let amp = p.sqrt();
            if row.iter().any(|&x| x.abs() != amp) {
                return Err(Error::InvalidParameter {
                    name: "layer_symbols",
                    reason: format!("symbols must be ±{amp}"),
                });
            }
        }
        Ok(LayeredSignal {
            layer_symbols,
            powers,
        })
    }

    pub fn num_layers(&self) -> usize {
        self.powers.len()
    }

    pub fn block_length(&self) -> usize {
        self.layer_symbols[0].len()
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn layer(&self, j: usize) -> &[f64] {
        &self.layer_symbols[j]
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.layer_symbols
    }

    /// Superposition `x(k) = Σ_j x_j(k)`.
    pub fn sum(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.block_length()];
        for row in &self.layer_symbols {
            for (acc, v) in x.iter_mut().zip(row) {
                *acc += v;
            }
        }
        x
    }
}

fn validate_powers(powers: &[f64]) -> Result<()> {
    if powers.is_empty() {
        return Err(Error::InvalidParameter {
            name: "powers",
            reason: "at least one layer is required".into(),
        });
    }
    for (layer, &power) in powers.iter().enumerate() {
        if !(power.is_finite() && power > 0.0) {
            return Err(Error::NonPositivePower { layer, power });
        }
    }
    Ok(())
}

/// Draws `powers.len()` equiprobable BPSK layers. Layer `j` uses the stream
/// `(seed, LayerBits, j, block)`.
pub fn generate_layers_block(
    block_length: usize,
    powers: &[f64],
    seed: u64,
    block: u32,
) -> Result<LayeredSignal> {
    validate_powers(powers)?;
    if block_length == 0 {
        return Err(Error::InvalidParameter {
            name: "block_length",
            reason: "must be at least 1".into(),
        });
    }
    let layer_symbols = powers
        .iter()
        .enumerate()
        .map(|(j, &p)| bpsk_layer(p, block_length, seed, j, block))
        .collect();
    Ok(LayeredSignal {
        layer_symbols,
        powers: powers.to_vec(),
    })
}

/// Equiprobable `±√power` symbols from stream `(seed, LayerBits, layer, block)`.
pub fn bpsk_layer(power: f64, len: usize, seed: u64, layer: usize, block: u32) -> Vec<f64> {
    let amp = power.sqrt();
    let mut rng = StreamKey::new(seed, Purpose::LayerBits, layer as u32, block).rng();
    (0..len)
        .map(|_| if rng.random::<bool>() { amp } else { -amp })
        .collect()
}

/// Adds `N(0, variance)` samples from stream `(seed, ChannelNoise, 0, block)`.
pub fn add_awgn(signal: &mut [f64], variance: f64, seed: u64, block: u32) {
    if variance == 0.0 {
        return;
    }
    let sigma = variance.sqrt();
    let mut rng = StreamKey::new(seed, Purpose::ChannelNoise, 0, block).rng();
    for v in signal {
        let w: f64 = rng.sample(StandardNormal);
        *v += sigma * w;
    }
}

pub fn generate_layers(
    num_layers: usize,
    block_length: usize,
    powers: &[f64],
    seed: u64,
) -> Result<LayeredSignal> {
    if num_layers != powers.len() {
        return Err(Error::LengthMismatch {
            expected: num_layers,
            actual: powers.len(),
        });
    }
    generate_layers_block(block_length, powers, seed, 0)
}

/// `y(k) = Σ_j Σ_i h(i) x_j(k-i) + w(k)`, noise from stream `(seed, ChannelNoise, 0, block)`.
pub fn transmit_block(
    signal: &LayeredSignal,
    channel: &ChannelModel,
    seed: u64,
    block: u32,
) -> Vec<f64> {
    let mut y = channel.convolve(&signal.sum());
    add_awgn(&mut y, channel.noise_variance(), seed, block);
    y
}

pub fn transmit(signal: &LayeredSignal, channel: &ChannelModel, seed: u64) -> Vec<f64> {
    transmit_block(signal, channel, seed, 0)
}

/// The `(2L_g+1) × (2L_g+L_h+1)` Toeplitz matrix mapping the input window
/// `x(k-L_g-L_h) ..= x(k+L_g)` to the output window `y(k-L_g) ..= y(k+L_g)`.
///
/// Partitioned column-wise as `[left | center | right]` with widths
/// `L_g+L_h`, `1` and `L_g`; `center` multiplies `x(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionMatrix {
    full: DMatrix<f64>,
    half_window: usize,
    channel_order: usize,
}

impl ConvolutionMatrix {
    pub fn full(&self) -> &DMatrix<f64> {
        &self.full
    }

    pub fn half_window(&self) -> usize {
        self.half_window
    }

    pub fn channel_order(&self) -> usize {
        self.channel_order
    }

    /// Filter length `2L_g+1`.
    pub fn rows(&self) -> usize {
        self.full.nrows()
    }

    /// Zero-based column index of `x(k)`.
    pub fn center_index(&self) -> usize {
        self.half_window + self.channel_order
    }

    pub fn left(&self) -> DMatrix<f64> {
        self.full.columns(0, self.center_index()).into_owned()
    }

    pub fn center(&self) -> DVector<f64> {
        self.full.column(self.center_index()).into_owned()
    }

    pub fn right(&self) -> DMatrix<f64> {
        self.full
            .columns(self.center_index() + 1, self.half_window)
            .into_owned()
    }

    /// `[left | right]`: every column except the one multiplying `x(k)`.
    pub fn isi(&self) -> DMatrix<f64> {
        self.full.clone().remove_column(self.center_index())
    }

    /// `H Hᵀ`.
    pub fn gram(&self) -> DMatrix<f64> {
        &self.full * self.full.transpose()
    }
}

pub fn build_convolution_matrix(
    channel: &ChannelModel,
    half_window: usize,
) -> Result<ConvolutionMatrix> {
    let taps = channel.taps();
    if taps.is_empty() {
        return Err(Error::EmptyTaps);
    }
    let order = taps.len() - 1;
    let rows = 2 * half_window + 1;
    let cols = 2 * half_window + order + 1;
    let full = DMatrix::from_fn(rows, cols, |i, c| {
        // full[i][c] = h(i - c + L_h) inside the band
        let d = i as isize - c as isize + order as isize;
        if (0..=order as isize).contains(&d) {
            taps[d as usize]
        } else {
            0.0
        }
    });
    Ok(ConvolutionMatrix {
        full,
        half_window,
        channel_order: order,
    })
}

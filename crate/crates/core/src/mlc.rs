//! Multilevel transmitter, multistage receiver and Monte Carlo achievable rates.
//!
//! Stage `m` subtracts the channel-filtered feedback of layers `< m`, runs
//! the layer's LMMSE filter over the cancelled signal, converts each
//! estimate into a posteriori probabilities and slices a hard decision.
//! The achievable rate of the stage is estimated from the log-probability
//! assigned to the transmitted symbol:
//!
//! `R_m = 1 - mean(-log₂ P(x_m(k) | x̃_m(k)))`.
//!
//! Statistics only use interior symbols: `L_g + L_h` guard symbols are
//! dropped at each block edge so every window lies inside the block.

use std::f64::consts::LN_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::channel::{
    add_awgn, bpsk_layer, build_convolution_matrix, generate_layers_block, transmit_block,
    ChannelModel, LayeredSignal,
};
use crate::error::{Error, Result};
use crate::lmmse::{design_filter_for_layer, LmmseDesign};

/// Default number of interior symbols per Monte Carlo estimate.
pub const DEFAULT_SAMPLES: usize = 100_000;

/// What the receiver subtracts for already-processed layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackMode {
    /// The transmitted symbols (correct prior decoding).
    #[default]
    Genie,
    /// Uncoded symbol-by-symbol hard decisions.
    HardDecision,
}

impl std::str::FromStr for FeedbackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "genie" => Ok(FeedbackMode::Genie),
            "hard-decision" | "hard" => Ok(FeedbackMode::HardDecision),
            other => Err(Error::InvalidParameter {
                name: "feedback_mode",
                reason: format!("unknown mode `{other}` (expected genie or hard-decision)"),
            }),
        }
    }
}

/// Interior/guard split of a simulated block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub guard: usize,
    pub interior: usize,
}

impl BlockLayout {
    pub fn new(half_window: usize, channel_order: usize, interior: usize) -> Self {
        BlockLayout {
            guard: half_window + channel_order,
            interior,
        }
    }

    pub fn block_length(&self) -> usize {
        self.interior + 2 * self.guard
    }

    pub fn interior_range(&self) -> std::ops::Range<usize> {
        self.guard..self.guard + self.interior
    }
}

/// Per-layer rate estimate with the equivalent-channel parameters behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerRate {
    /// One-based layer number.
    pub layer: usize,
    pub rate_bits: f64,
    pub stderr: f64,
    pub alpha: f64,
    pub sigma_zeta2: f64,
    pub sinr: f64,
}

/// Achievable rates of all layers and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateProfile {
    pub layers: Vec<LayerRate>,
    pub total: f64,
    pub samples: usize,
    pub seed: u64,
}

pub const RATE_PROFILE_CSV_HEADER: &str = "layer,rate_bits,stderr,alpha,sigma_zeta2,sinr";

impl RateProfile {
    pub fn new(layers: Vec<LayerRate>, samples: usize, seed: u64) -> Self {
        let total = layers.iter().map(|l| l.rate_bits).sum();
        RateProfile {
            layers,
            total,
            samples,
            seed,
        }
    }

    pub fn per_layer(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.rate_bits).collect()
    }

    /// Standard error of the total, treating layers as independent.
    pub fn total_stderr(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.stderr * l.stderr)
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain records serialize")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(RATE_PROFILE_CSV_HEADER);
        out.push('\n');
        for l in &self.layers {
            writeln!(
                out,
                "{},{:.12e},{:.6e},{:.12e},{:.12e},{:.12e}",
                l.layer, l.rate_bits, l.stderr, l.alpha, l.sigma_zeta2, l.sinr
            )
            .unwrap();
        }
        out
    }
}

/// `ỹ_m(k) = y(k) - Σ_{j<m} Σ_i h(i) x̂_j(k-i)`.
pub fn cancel_layers(
    received: &[f64],
    channel: &ChannelModel,
    prior_decisions: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let mut out = received.to_vec();
    for d in prior_decisions {
        if d.len() != received.len() {
            return Err(Error::LengthMismatch {
                expected: received.len(),
                actual: d.len(),
            });
        }
        channel.convolve_accumulate(d, -1.0, &mut out);
    }
    Ok(out)
}

/// Log-likelihood ratio `ln P(x̃|+√P)/P(x̃|-√P) = 2α√P x̃ / σ_ζ²`.
pub fn llr(design: &LmmseDesign, estimate: f64) -> Result<f64> {
    let var = design.noise_variance();
    if var <= 0.0 {
        return Err(Error::ZeroNoiseVariance);
    }
    Ok(2.0 * design.gain() * design.layer_power().sqrt() * estimate / var)
}

/// A posteriori probabilities `(P(+√P_m | x̃), P(-√P_m | x̃))`.
pub fn app(design: &LmmseDesign, estimate: f64) -> Result<(f64, f64)> {
    Ok(app_from_llr(llr(design, estimate)?))
}

fn app_from_llr(l: f64) -> (f64, f64) {
    // The smaller probability is the logistic of -|L|; the larger is its complement.
    let small = 1.0 / (1.0 + l.abs().exp());
    if l >= 0.0 {
        (1.0 - small, small)
    } else {
        (small, 1.0 - small)
    }
}

/// `-log₂ P(x | x̃)` for a symbol with sign `sign` (±1), from the LLR.
fn symbol_log_score(sign: f64, l: f64) -> f64 {
    let t = -sign * l;
    (t.max(0.0) + (-t.abs()).exp().ln_1p()) / LN_2
}

struct ScoreStats {
    rate: f64,
    stderr: f64,
}

fn score_stats(scores: impl Iterator<Item = f64>) -> ScoreStats {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for s in scores {
        n += 1;
        let delta = s - mean;
        mean += delta / n as f64;
        m2 += delta * (s - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    ScoreStats {
        rate: (1.0 - mean).clamp(0.0, 1.0),
        stderr: (var / n as f64).sqrt(),
    }
}

fn layer_rate(design: &LmmseDesign, estimates: &[f64], truth: &[f64]) -> Result<LayerRate> {
    let stats = if design.gain() == 0.0 {
        ScoreStats {
            rate: 0.0,
            stderr: 0.0,
        }
    } else {
        let var = design.noise_variance();
        if var <= 0.0 {
            return Err(Error::ZeroNoiseVariance);
        }
        let c = 2.0 * design.gain() * design.layer_power().sqrt() / var;
        score_stats(
            estimates
                .iter()
                .zip(truth)
                .map(|(&e, &x)| symbol_log_score(x.signum(), c * e)),
        )
    };
    Ok(LayerRate {
        layer: design.layer_index() + 1,
        rate_bits: stats.rate,
        stderr: stats.stderr,
        alpha: design.gain(),
        sigma_zeta2: design.noise_variance(),
        sinr: design.sinr(),
    })
}

fn check_layer_powers(powers: &[f64]) -> Result<()> {
    if powers.is_empty() {
        return Err(Error::InvalidParameter {
            name: "powers",
            reason: "at least one layer is required".into(),
        });
    }
    for (layer, &power) in powers.iter().enumerate() {
        if !(power.is_finite() && power >= 0.0) {
            return Err(Error::NonPositivePower { layer, power });
        }
    }
    Ok(())
}

/// Monte Carlo rate of layer `layer_index` with layers below it perfectly
/// cancelled and layers above it treated as interference.
///
/// Layer `j` draws its bits from stream `(seed, LayerBits, j, 0)` and the
/// noise comes from `(seed, ChannelNoise, 0, 0)`, so repeated calls with the
/// same seed reuse the same random numbers whatever the powers.
pub fn monte_carlo_layer_rate(
    channel: &ChannelModel,
    powers: &[f64],
    layer_index: usize,
    half_window: usize,
    samples: usize,
    seed: u64,
) -> Result<LayerRate> {
    check_layer_powers(powers)?;
    if layer_index >= powers.len() {
        return Err(Error::InvalidParameter {
            name: "layer_index",
            reason: format!("{layer_index} out of range for {} layers", powers.len()),
        });
    }
    if samples == 0 {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: "must be at least 1".into(),
        });
    }
    let conv = build_convolution_matrix(channel, half_window)?;
    let design = design_filter_for_layer(
        &conv,
        layer_index,
        &powers[layer_index..],
        channel.noise_variance(),
        None,
    )?;
    if powers[layer_index] == 0.0 {
        return layer_rate(&design, &[], &[]);
    }
    let layout = BlockLayout::new(half_window, channel.order(), samples);
    let len = layout.block_length();
    let mut transmitted = vec![0.0; len];
    let mut target = Vec::new();
    for (j, &p) in powers.iter().enumerate().skip(layer_index) {
        if p == 0.0 {
            continue;
        }
        let row = bpsk_layer(p, len, seed, j, 0);
        for (acc, v) in transmitted.iter_mut().zip(&row) {
            *acc += v;
        }
        if j == layer_index {
            target = row;
        }
    }
    let mut received = channel.convolve(&transmitted);
    add_awgn(&mut received, channel.noise_variance(), seed, 0);
    let range = layout.interior_range();
    let estimates = design.apply_range(&received, range.clone());
    layer_rate(&design, &estimates, &target[range])
}

/// Snapshot of one receiver stage, handed to observers of [`MultistageReceiver::run_with`].
#[derive(Debug, Clone, Copy)]
pub struct StageState<'a> {
    pub layer_index: usize,
    /// `ỹ_m` over the whole block.
    pub cancelled_signal: &'a [f64],
    pub design: &'a LmmseDesign,
    /// Hard decisions `±√P_m` over the whole block.
    pub decisions: &'a [f64],
    pub feedback_mode: FeedbackMode,
}

/// Result of a multistage run.
#[derive(Debug, Clone, PartialEq)]
pub struct MultistageOutcome {
    /// Hard decisions per layer over the whole block.
    pub decisions: Vec<Vec<f64>>,
    pub profile: RateProfile,
    /// Interior symbol errors per layer.
    pub symbol_errors: Vec<usize>,
}

/// Successive LMMSE equalization with layer-by-layer cancellation.
#[derive(Debug, Clone)]
pub struct MultistageReceiver {
    channel: ChannelModel,
    powers: Vec<f64>,
    half_window: usize,
    feedback_mode: FeedbackMode,
}

impl MultistageReceiver {
    pub fn new(
        channel: ChannelModel,
        powers: Vec<f64>,
        half_window: usize,
        feedback_mode: FeedbackMode,
    ) -> Result<Self> {
        check_layer_powers(&powers)?;
        Ok(MultistageReceiver {
            channel,
            powers,
            half_window,
            feedback_mode,
        })
    }

    pub fn layout(&self, block_length: usize) -> Result<BlockLayout> {
        let guard = self.half_window + self.channel.order();
        if block_length <= 2 * guard {
            return Err(Error::InvalidParameter {
                name: "block_length",
                reason: format!("{block_length} leaves no interior symbols after {guard} guard symbols per edge"),
            });
        }
        Ok(BlockLayout::new(
            self.half_window,
            self.channel.order(),
            block_length - 2 * guard,
        ))
    }

    /// Runs every stage, returning per-layer rates and interior symbol-error counts.
    ///
    /// `truth` supplies genie feedback and the reference for rates and errors.
    pub fn run_with<F>(
        &self,
        received: &[f64],
        truth: &LayeredSignal,
        seed: u64,
        mut observe: F,
    ) -> Result<(RateProfile, Vec<usize>)>
    where
        F: FnMut(StageState<'_>),
    {
        if truth.powers() != self.powers.as_slice() {
            return Err(Error::InvalidParameter {
                name: "truth",
                reason: "transmitted layer powers differ from the receiver allocation".into(),
            });
        }
        if truth.block_length() != received.len() {
            return Err(Error::LengthMismatch {
                expected: received.len(),
                actual: truth.block_length(),
            });
        }
        let layout = self.layout(received.len())?;
        let conv = build_convolution_matrix(&self.channel, self.half_window)?;
        let noise = self.channel.noise_variance();
        let interior = layout.interior_range();

        let mut cancelled = received.to_vec();
        let mut layers = Vec::with_capacity(self.powers.len());
        let mut errors = Vec::with_capacity(self.powers.len());
        for m in 0..self.powers.len() {
            let design = design_filter_for_layer(&conv, m, &self.powers[m..], noise, None)?;
            let estimates = design.apply(&cancelled);
            let amp = self.powers[m].sqrt();
            let decisions: Vec<f64> = estimates
                .iter()
                .map(|&e| if e >= 0.0 { amp } else { -amp })
                .collect();
            let sent = truth.layer(m);
            layers.push(layer_rate(
                &design,
                &estimates[interior.clone()],
                &sent[interior.clone()],
            )?);
            errors.push(
                decisions[interior.clone()]
                    .iter()
                    .zip(&sent[interior.clone()])
                    .filter(|(d, s)| d != s)
                    .count(),
            );
            observe(StageState {
                layer_index: m,
                cancelled_signal: &cancelled,
                design: &design,
                decisions: &decisions,
                feedback_mode: self.feedback_mode,
            });
            let feedback = match self.feedback_mode {
                FeedbackMode::Genie => sent,
                FeedbackMode::HardDecision => decisions.as_slice(),
            };
            self.channel.convolve_accumulate(feedback, -1.0, &mut cancelled);
        }
        Ok((RateProfile::new(layers, layout.interior, seed), errors))
    }

    pub fn run(&self, received: &[f64], truth: &LayeredSignal, seed: u64) -> Result<MultistageOutcome> {
        let mut decisions = Vec::with_capacity(self.powers.len());
        let (profile, symbol_errors) =
            self.run_with(received, truth, seed, |s| decisions.push(s.decisions.to_vec()))?;
        Ok(MultistageOutcome {
            decisions,
            profile,
            symbol_errors,
        })
    }
}

pub fn run_multistage(
    received: &[f64],
    truth: &LayeredSignal,
    channel: &ChannelModel,
    powers: &[f64],
    half_window: usize,
    feedback_mode: FeedbackMode,
    seed: u64,
) -> Result<MultistageOutcome> {
    MultistageReceiver::new(channel.clone(), powers.to_vec(), half_window, feedback_mode)?
        .run(received, truth, seed)
}

/// Generates `samples` interior symbols per layer (plus guards), transmits
/// them and runs the receiver without keeping decisions.
pub fn simulate_rates(
    channel: &ChannelModel,
    powers: &[f64],
    half_window: usize,
    samples: usize,
    feedback_mode: FeedbackMode,
    seed: u64,
) -> Result<(RateProfile, Vec<usize>)> {
    let receiver =
        MultistageReceiver::new(channel.clone(), powers.to_vec(), half_window, feedback_mode)?;
    let layout = BlockLayout::new(half_window, channel.order(), samples);
    let signal = generate_layers_block(layout.block_length(), powers, seed, 0)?;
    let received = transmit_block(&signal, channel, seed, 0);
    receiver.run_with(&received, &signal, seed, |_| {})
}

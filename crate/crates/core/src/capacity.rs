//! Spectral-integral rates of the ISI channel under Gaussian inputs, and the
//! LMMSE-filtered versus unfiltered rate ratio at decreasing input SINR.

use std::f64::consts::{LN_2, PI};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::channel::{build_convolution_matrix, ChannelModel, ConvolutionMatrix};
use crate::error::{Error, Result};
use crate::lmmse::{analytic_layer_rate, design_filter};

/// Absolute tolerance of the adaptive quadrature, in bits.
pub const QUADRATURE_TOLERANCE: f64 = 1e-9;

const INITIAL_PANELS: usize = 16;
const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let width = (b - a) / INITIAL_PANELS as f64;
    let panel_tol = tol / INITIAL_PANELS as f64;
    (0..INITIAL_PANELS)
        .map(|i| {
            let lo = a + i as f64 * width;
            let hi = if i + 1 == INITIAL_PANELS { b } else { lo + width };
            let mid = 0.5 * (lo + hi);
            let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
            let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
            simpson_step(f, lo, hi, flo, fmid, fhi, whole, panel_tol, MAX_DEPTH)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `(1/2π) ∫ ½ log₂(1 + σ_x²|H|² / (σ_z²|H|² + σ_w²)) dω`.
///
/// The integrand is even in `ω`, so only `[0, π]` is integrated.
fn spectral_rate(channel: &ChannelModel, signal: f64, interference: f64) -> f64 {
    let noise = channel.noise_variance();
    let integrand = |w: f64| {
        let g = channel.power_response(w);
        0.5 * (signal * g / (interference * g + noise)).ln_1p() / LN_2
    };
    // Small rates need a tolerance relative to their own size.
    let scale = {
        let n = 64;
        (0..n)
            .map(|i| integrand((i as f64 + 0.5) * PI / n as f64))
            .sum::<f64>()
            / n as f64
    };
    let tol = QUADRATURE_TOLERANCE.min(1e-10 * scale).max(f64::MIN_POSITIVE);
    adaptive_simpson(&integrand, 0.0, PI, tol * PI) / PI
}

/// Capacity of the ISI channel with i.i.d. Gaussian input of power `input_power`, bits/symbol.
pub fn isi_gaussian_capacity(channel: &ChannelModel, input_power: f64) -> Result<f64> {
    if channel.noise_variance() == 0.0 {
        return Err(Error::ZeroNoiseVariance);
    }
    if !(input_power.is_finite() && input_power >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "input_power",
            reason: format!("must be finite and non-negative, got {input_power}"),
        });
    }
    Ok(spectral_rate(channel, input_power, 0.0))
}

/// Gaussian-input rate when Gaussian interference of variance `interference`
/// passes through the same channel as the signal.
pub fn isi_rate_with_interference(
    channel: &ChannelModel,
    signal: f64,
    interference: f64,
) -> Result<f64> {
    if !(signal >= 0.0 && interference >= 0.0 && signal.is_finite() && interference.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "variances",
            reason: "signal and interference variances must be finite and non-negative".into(),
        });
    }
    if channel.noise_variance() + interference == 0.0 {
        return Err(Error::ZeroNoiseVariance);
    }
    if interference > 0.0 && channel.noise_variance() == 0.0 {
        // σ_x²/σ_z² wherever |H| ≠ 0; finite-tap responses vanish only at isolated points.
        return Ok(0.5 * (signal / interference).ln_1p() / LN_2);
    }
    Ok(spectral_rate(channel, signal, interference))
}

/// Gaussian rate of the LMMSE equivalent channel when the filter is designed
/// for signal power `signal` against interference `interference` through `H`.
pub fn lmmse_filtered_rate(
    conv: &ConvolutionMatrix,
    noise_variance: f64,
    signal: f64,
    interference: f64,
) -> Result<f64> {
    let design = design_filter(conv, &[signal, interference], noise_variance)?;
    Ok(analytic_layer_rate(&design))
}

/// Sweep of the filtered/unfiltered rate ratio over input SINR.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Config {
    pub channel: ChannelModel,
    pub half_window: usize,
    /// `σ_x²/(σ_z²+σ_w²)` in dB, strictly decreasing.
    pub sinr_grid_db: Vec<f64>,
    /// `σ_z²/σ_w²` settings.
    pub interference_ratios: Vec<f64>,
}

impl Theorem1Config {
    pub fn validate(&self) -> Result<()> {
        if self.sinr_grid_db.is_empty() {
            return Err(Error::InvalidParameter {
                name: "sinr_grid_db",
                reason: "grid is empty".into(),
            });
        }
        if self.sinr_grid_db.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Less)) {
            return Err(Error::InvalidParameter {
                name: "sinr_grid_db",
                reason: "grid must be strictly decreasing".into(),
            });
        }
        if self.interference_ratios.is_empty()
            || self
                .interference_ratios
                .iter()
                .any(|r| !(r.is_finite() && *r >= 0.0))
        {
            return Err(Error::InvalidParameter {
                name: "interference_ratios",
                reason: "need at least one finite non-negative ratio".into(),
            });
        }
        if self.channel.noise_variance() <= 0.0 {
            return Err(Error::ZeroNoiseVariance);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioPoint {
    pub input_sinr_db: f64,
    pub sigma_z_over_w: f64,
    pub lmmse_rate: f64,
    pub isi_rate: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RatioCurve {
    pub points: Vec<RatioPoint>,
}

pub const RATIO_CSV_HEADER: &str = "input_sinr_db,sigma_z_over_w,lmmse_rate_bits,isi_rate_bits,ratio";

impl RatioCurve {
    /// Points of one `σ_z²/σ_w²` setting, in grid order.
    pub fn setting(&self, sigma_z_over_w: f64) -> impl Iterator<Item = &RatioPoint> {
        self.points
            .iter()
            .filter(move |p| p.sigma_z_over_w == sigma_z_over_w)
    }

    /// CSV body (header row plus one line per point).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(RATIO_CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            writeln!(
                out,
                "{},{},{:.12e},{:.12e},{:.12}",
                p.input_sinr_db, p.sigma_z_over_w, p.lmmse_rate, p.isi_rate, p.ratio
            )
            .unwrap();
        }
        out
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn theorem1_curve(config: &Theorem1Config) -> Result<RatioCurve> {
    config.validate()?;
    let conv = build_convolution_matrix(&config.channel, config.half_window)?;
    let noise = config.channel.noise_variance();
    let jobs: Vec<(f64, f64)> = config
        .interference_ratios
        .iter()
        .flat_map(|&r| config.sinr_grid_db.iter().map(move |&db| (r, db)))
        .collect();
    let points = jobs
        .par_iter()
        .map(|&(ratio_zw, db)| {
            let interference = ratio_zw * noise;
            let signal = db_to_linear(db) * (interference + noise);
            let lmmse_rate = lmmse_filtered_rate(&conv, noise, signal, interference)?;
            let isi_rate = isi_rate_with_interference(&config.channel, signal, interference)?;
            Ok(RatioPoint {
                input_sinr_db: db,
                sigma_z_over_w: ratio_zw,
                lmmse_rate,
                isi_rate,
                ratio: if isi_rate > 0.0 { lmmse_rate / isi_rate } else { 1.0 },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioCurve { points })
}

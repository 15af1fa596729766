//! Power allocation across layers.
//!
//! Three schemes split a total power `P` over `M` layers (layer 1 is
//! decoded first):
//!
//! * equal power: `P_j = P/M`;
//! * equal distance: `P_j = 4 P_{j+1}`, so the superposition is a uniform `2^M`-ASK;
//! * equal rate: every layer reaches the same achievable rate `R_const`.
//!
//! Equal rate is found by nested bisection. For a candidate `R_const` the
//! powers are solved from the last layer back to the first, each layer
//! seeing the already-fixed later layers as interference; the outer loop
//! adjusts `R_const` until the powers add up to `P`.

use serde::{Deserialize, Serialize};

use crate::channel::{build_convolution_matrix, ChannelModel};
use crate::error::{Error, Result};
use crate::lmmse::{gaussian_rate, SpectralLmmse};
use crate::mlc::monte_carlo_layer_rate;

pub const DEFAULT_RATE_TOLERANCE: f64 = 1e-3;
pub const MAX_BISECTION_ITERATIONS: usize = 200;
const SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    EqualPower,
    EqualDistance,
    EqualRate,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::EqualPower, Scheme::EqualDistance, Scheme::EqualRate];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::EqualPower => "equal-power",
            Scheme::EqualDistance => "equal-distance",
            Scheme::EqualRate => "equal-rate",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "scheme",
                reason: format!("unknown scheme `{s}` (expected equal-power, equal-distance or equal-rate)"),
            })
    }
}

/// Per-layer powers `P_1..P_M`, layer 1 decoded first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AllocationRecord", into = "AllocationRecord")]
pub struct PowerAllocation {
    scheme: Scheme,
    powers: Vec<f64>,
    total: f64,
    target_rate: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AllocationRecord {
    scheme: Scheme,
    #[serde(rename = "M")]
    layers: usize,
    total_power: f64,
    target_rate: Option<f64>,
    powers: Vec<f64>,
}

impl From<PowerAllocation> for AllocationRecord {
    fn from(a: PowerAllocation) -> Self {
        AllocationRecord {
            scheme: a.scheme,
            layers: a.powers.len(),
            total_power: a.total,
            target_rate: a.target_rate,
            powers: a.powers,
        }
    }
}

impl TryFrom<AllocationRecord> for PowerAllocation {
    type Error = Error;

    fn try_from(r: AllocationRecord) -> Result<Self> {
        if r.layers != r.powers.len() {
            return Err(Error::LengthMismatch {
                expected: r.layers,
                actual: r.powers.len(),
            });
        }
        PowerAllocation::new(r.scheme, r.powers, r.total_power, r.target_rate)
    }
}

impl PowerAllocation {
    /// Checks positivity and that the powers add up to `total` (relative 1e-9).
    pub fn new(scheme: Scheme, powers: Vec<f64>, total: f64, target_rate: Option<f64>) -> Result<Self> {
        check_budget(powers.len(), total)?;
        for (layer, &power) in powers.iter().enumerate() {
            if !(power.is_finite() && power > 0.0) {
                return Err(Error::NonPositivePower { layer, power });
            }
        }
        let sum: f64 = powers.iter().sum();
        if (sum - total).abs() > 1e-9 * total {
            return Err(Error::InvalidParameter {
                name: "powers",
                reason: format!("powers sum to {sum}, expected {total}"),
            });
        }
        if let Some(r) = target_rate {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "target_rate",
                    reason: format!("must be finite and non-negative, got {r}"),
                });
            }
        }
        Ok(PowerAllocation {
            scheme,
            powers,
            total,
            target_rate,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn num_layers(&self) -> usize {
        self.powers.len()
    }

    /// `R_const` for equal-rate allocations.
    pub fn target_rate(&self) -> Option<f64> {
        self.target_rate
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain records serialize")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn check_budget(layers: usize, total: f64) -> Result<()> {
    if layers == 0 {
        return Err(Error::InvalidParameter {
            name: "M",
            reason: "at least one layer is required".into(),
        });
    }
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Infeasible(format!("total power must be positive, got {total}")));
    }
    Ok(())
}

pub fn equal_power(layers: usize, total: f64) -> Result<PowerAllocation> {
    check_budget(layers, total)?;
    let powers = vec![total / layers as f64; layers];
    PowerAllocation::new(Scheme::EqualPower, powers, total, None)
}

pub fn equal_distance(layers: usize, total: f64) -> Result<PowerAllocation> {
    check_budget(layers, total)?;
    // P_M = P·3/(4^M - 1); build from the last layer upwards.
    let mut powers = vec![0.0; layers];
    let mut p = 1.0;
    for slot in powers.iter_mut().rev() {
        *slot = p;
        p *= 4.0;
    }
    let unnormalized: f64 = powers.iter().sum();
    for slot in &mut powers {
        *slot *= total / unnormalized;
    }
    PowerAllocation::new(Scheme::EqualDistance, powers, total, None)
}

/// Achievable rate of a layer given its power and the powers of the layers
/// still undecoded when it is decoded.
pub trait RateEvaluator {
    /// `powers[0]` is the target layer, the rest are interfering layers.
    fn layer_rate(&self, powers: &[f64]) -> Result<f64>;
}

/// Gaussian-input rate `½log₂(1+SINR)` of the LMMSE equivalent channel.
#[derive(Debug, Clone)]
pub struct AnalyticEvaluator {
    spectral: SpectralLmmse,
}

impl AnalyticEvaluator {
    pub fn new(channel: &ChannelModel, half_window: usize) -> Result<Self> {
        let conv = build_convolution_matrix(channel, half_window)?;
        Ok(AnalyticEvaluator {
            spectral: SpectralLmmse::new(&conv, channel.noise_variance())?,
        })
    }
}

impl RateEvaluator for AnalyticEvaluator {
    fn layer_rate(&self, powers: &[f64]) -> Result<f64> {
        let total: f64 = powers.iter().sum();
        Ok(gaussian_rate(self.spectral.sinr(powers[0], total)))
    }
}

/// Monte Carlo rate with a fixed seed, so every call sees the same bits and noise.
#[derive(Debug, Clone)]
pub struct MonteCarloEvaluator {
    pub channel: ChannelModel,
    pub half_window: usize,
    pub samples: usize,
    pub seed: u64,
}

impl RateEvaluator for MonteCarloEvaluator {
    fn layer_rate(&self, powers: &[f64]) -> Result<f64> {
        Ok(monte_carlo_layer_rate(
            &self.channel,
            powers,
            0,
            self.half_window,
            self.samples,
            self.seed,
        )?
        .rate_bits)
    }
}

enum Solve {
    Powers(Vec<f64>),
    /// The candidate rate needs more than the budget.
    OverBudget,
}

/// Solves `P_M..P_1` for a candidate common rate.
fn powers_for_rate<E: RateEvaluator + ?Sized>(
    layers: usize,
    total: f64,
    rate: f64,
    evaluator: &E,
    tolerance: f64,
) -> Result<Solve> {
    let mut powers = vec![0.0; layers];
    let mut used = 0.0;
    let mut trial = Vec::with_capacity(layers);
    for m in (0..layers).rev() {
        let rate_at = |p: f64, trial: &mut Vec<f64>| {
            trial.clear();
            trial.push(p);
            trial.extend_from_slice(&powers[m + 1..]);
            evaluator.layer_rate(trial)
        };
        let budget = total - used;
        if budget <= 0.0 || rate_at(budget, &mut trial)? < rate {
            return Ok(Solve::OverBudget);
        }
        let (mut lo, mut hi) = (0.0, budget);
        let mut iterations = 0;
        while hi - lo > 1e-14 * total {
            if iterations == MAX_BISECTION_ITERATIONS {
                return Err(Error::NonConvergence {
                    what: "layer power bisection",
                    iterations,
                });
            }
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            if rate_at(mid, &mut trial)? < rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let achieved = rate_at(hi, &mut trial)?;
        if (achieved - rate).abs() > tolerance {
            return Err(Error::NonConvergence {
                what: "layer power bisection",
                iterations,
            });
        }
        powers[m] = hi;
        used += hi;
    }
    Ok(Solve::Powers(powers))
}

/// Equal-rate allocation by nested bisection.
///
/// `R_const` is bracketed by `(0, R_max)`, where `R_max` is the rate of a
/// single layer holding the whole budget; with BPSK rates this is at most 1.
pub fn equal_rate<E: RateEvaluator + ?Sized>(
    layers: usize,
    total: f64,
    evaluator: &E,
    tolerance: f64,
) -> Result<PowerAllocation> {
    check_budget(layers, total)?;
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tolerance",
            reason: format!("must be positive, got {tolerance}"),
        });
    }
    let rate_max = evaluator.layer_rate(&[total])?;
    if layers == 1 {
        return PowerAllocation::new(Scheme::EqualRate, vec![total], total, Some(rate_max));
    }
    let (mut lo, mut hi) = (0.0, rate_max);
    for _ in 0..MAX_BISECTION_ITERATIONS {
        let rate = 0.5 * (lo + hi);
        match powers_for_rate(layers, total, rate, evaluator, tolerance)? {
            Solve::OverBudget => hi = rate,
            Solve::Powers(mut powers) => {
                let sum: f64 = powers.iter().sum();
                if (sum - total).abs() <= SUM_TOLERANCE * total {
                    let scale = total / sum;
                    powers.iter_mut().for_each(|p| *p *= scale);
                    let residual = total - powers.iter().sum::<f64>();
                    powers[0] += residual;
                    return PowerAllocation::new(Scheme::EqualRate, powers, total, Some(rate));
                }
                if sum < total {
                    lo = rate;
                } else {
                    hi = rate;
                }
            }
        }
    }
    Err(Error::NonConvergence {
        what: "common rate bisection",
        iterations: MAX_BISECTION_ITERATIONS,
    })
}

/// Builds an allocation of any scheme; equal rate uses the analytic evaluator.
pub fn allocate(
    scheme: Scheme,
    layers: usize,
    total: f64,
    channel: &ChannelModel,
    half_window: usize,
) -> Result<PowerAllocation> {
    match scheme {
        Scheme::EqualPower => equal_power(layers, total),
        Scheme::EqualDistance => equal_distance(layers, total),
        Scheme::EqualRate => {
            let evaluator = AnalyticEvaluator::new(channel, half_window)?;
            equal_rate(layers, total, &evaluator, DEFAULT_RATE_TOLERANCE)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::H1_TAPS;
    use proptest::prelude::*;

    fn flat(noise: f64) -> ChannelModel {
        ChannelModel::new(vec![1.0], noise).unwrap()
    }

    #[test]
    fn equal_power_examples() {
        assert_eq!(equal_power(4, 2.0).unwrap().powers(), &[0.5; 4]);
        assert_eq!(equal_power(1, 7.0).unwrap().powers(), &[7.0]);
        for m in [10, 20, 50, 100] {
            let a = equal_power(m, 10.0).unwrap();
            assert_eq!(a.num_layers(), m);
        }
        assert!(equal_power(0, 1.0).is_err());
        assert!(equal_power(2, 0.0).is_err());
    }

    #[test]
    fn equal_distance_examples() {
        let a = equal_distance(2, 5.0).unwrap();
        assert!((a.powers()[0] - 4.0).abs() < 1e-12 && (a.powers()[1] - 1.0).abs() < 1e-12);
        let a = equal_distance(3, 21.0).unwrap();
        for (p, e) in a.powers().iter().zip([16.0, 4.0, 1.0]) {
            assert!((p - e).abs() < 1e-12);
        }
        assert_eq!(equal_distance(1, 3.0).unwrap().powers(), &[3.0]);
    }

    fn constellation(powers: &[f64]) -> Vec<f64> {
        let m = powers.len();
        let mut points: Vec<f64> = (0..1u32 << m)
            .map(|bits| {
                powers
                    .iter()
                    .enumerate()
                    .map(|(j, p)| if bits >> j & 1 == 1 { p.sqrt() } else { -p.sqrt() })
                    .sum()
            })
            .collect();
        points.sort_by(f64::total_cmp);
        points
    }

    #[test]
    fn equal_distance_gives_uniform_ask() {
        let pts = constellation(equal_distance(3, 21.0).unwrap().powers());
        assert_eq!(pts, vec![-7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0]);
    }

    #[test]
    fn equal_rate_single_layer() {
        let ev = AnalyticEvaluator::new(&flat(1.0), 0).unwrap();
        let a = equal_rate(1, 3.0, &ev, 1e-3).unwrap();
        assert_eq!(a.powers(), &[3.0]);
        assert!((a.target_rate().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_rate_flat_two_layers() {
        // P₂ = P₁/(P₂+1), P₁+P₂ = 3  ⇒  P₂² + 2P₂ - 3 = 0  ⇒  (2, 1)
        let ev = AnalyticEvaluator::new(&flat(1.0), 0).unwrap();
        let a = equal_rate(2, 3.0, &ev, 1e-3).unwrap();
        assert!((a.powers()[0] - 2.0).abs() < 1e-3, "{:?}", a.powers());
        assert!((a.powers()[1] - 1.0).abs() < 1e-3);
        assert!((a.target_rate().unwrap() - 0.5).abs() < 1e-3);
        assert_eq!(a.scheme(), Scheme::EqualRate);
    }

    #[test]
    fn equal_rate_flat_matches_recursion() {
        let noise = 1.0;
        let ev = AnalyticEvaluator::new(&flat(noise), 0).unwrap();
        let a = equal_rate(6, 20.0, &ev, 1e-3).unwrap();
        let p = a.powers();
        let sinrs: Vec<f64> = (0..p.len())
            .map(|m| p[m] / (noise + p[m + 1..].iter().sum::<f64>()))
            .collect();
        let rates: Vec<f64> = sinrs.iter().map(|&s| gaussian_rate(s)).collect();
        let target = a.target_rate().unwrap();
        for r in &rates {
            assert!((r - target).abs() <= 1e-3, "{rates:?} vs {target}");
        }
    }

    #[test]
    fn equal_rate_on_isi_channel_spread() {
        let ch = ChannelModel::new(H1_TAPS.to_vec(), 1.0).unwrap();
        let ev = AnalyticEvaluator::new(&ch, 20).unwrap();
        let a = equal_rate(8, 10.0, &ev, 1e-3).unwrap();
        let p = a.powers();
        let rates: Vec<f64> = (0..8).map(|m| ev.layer_rate(&p[m..]).unwrap()).collect();
        let spread = rates.iter().cloned().fold(f64::MIN, f64::max)
            - rates.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread <= 2e-3, "{rates:?}");
    }

    #[test]
    fn equal_rate_with_monte_carlo_evaluator() {
        let ev = MonteCarloEvaluator {
            channel: ChannelModel::new(H1_TAPS.to_vec(), 1.0).unwrap(),
            half_window: 3,
            samples: 4000,
            seed: 17,
        };
        let a = equal_rate(2, 4.0, &ev, 1e-3).unwrap();
        let p = a.powers();
        let r0 = ev.layer_rate(p).unwrap();
        let r1 = ev.layer_rate(&p[1..]).unwrap();
        assert!((r0 - r1).abs() <= 2e-3, "{r0} {r1}");
    }

    #[test]
    fn rejects_bad_requests() {
        let ev = AnalyticEvaluator::new(&flat(1.0), 0).unwrap();
        assert!(matches!(equal_rate(2, -1.0, &ev, 1e-3), Err(Error::Infeasible(_))));
        assert!(equal_rate(2, 1.0, &ev, 0.0).is_err());
        assert!(AnalyticEvaluator::new(&flat(0.0), 0).is_err());
    }

    #[test]
    fn json_wire_format() {
        let a = equal_distance(2, 5.0).unwrap();
        let text = a.to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["scheme"], "equal-distance");
        assert_eq!(v["M"], 2);
        assert_eq!(v["total_power"], 5.0);
        assert!(v["target_rate"].is_null());
        assert_eq!(v["powers"].as_array().unwrap().len(), 2);
        assert_eq!(PowerAllocation::from_json(&text).unwrap(), a);

        let bad = r#"{"scheme":"equal-power","M":3,"total_power":1.0,"target_rate":null,"powers":[0.5,0.5]}"#;
        assert!(PowerAllocation::from_json(bad).is_err());
        let bad = r#"{"scheme":"equal-power","M":2,"total_power":2.0,"target_rate":null,"powers":[0.5,0.5]}"#;
        assert!(PowerAllocation::from_json(bad).is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("water-filling".parse::<Scheme>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn schemes_conserve_total(m in 1usize..12, total in 0.01f64..1000.0) {
            let ch = ChannelModel::new(H1_TAPS.to_vec(), 1.0).unwrap();
            for scheme in Scheme::ALL {
                let a = allocate(scheme, m, total, &ch, 2).unwrap();
                let sum: f64 = a.powers().iter().sum();
                prop_assert!((sum - total).abs() <= 1e-9 * total, "{scheme}: {sum} vs {total}");
                prop_assert!(a.powers().iter().all(|&p| p > 0.0));
            }
        }

        #[test]
        fn equal_distance_gaps_are_equal(m in 1usize..9, total in 0.1f64..100.0) {
            let pts = constellation(equal_distance(m, total).unwrap().powers());
            let gap = pts[1] - pts[0];
            for w in pts.windows(2) {
                prop_assert!(((w[1] - w[0]) - gap).abs() <= 1e-9 * gap);
            }
        }
    }
}

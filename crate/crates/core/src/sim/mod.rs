//! Monte Carlo simulation of quantize-map-forward relaying on tiny layered
//! networks.
//!
//! The source sends one of `2^⌈RT⌉` Gaussian codewords. Each relay quantizes
//! its received block with a uniform scalar quantizer, hashes the cell
//! sequence to an index and transmits that codeword from its own Gaussian
//! codebook. The destination tries every message together with every likely
//! chain of relay outputs, keeps the chains whose predicted block is within
//! the typicality radius of what it received, and declares the most likely
//! survivor.
//!
//! Codebooks depend on `seed` only; trial noise comes from a separate
//! stream per `(seed, trial)`, so results do not depend on the thread count.

mod chain;
pub mod codebook;

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::cutset::quantizer_params;
use crate::error::{Error, Result};
use crate::network::{NodeId, RelayNetwork};
use chain::{ChainTable, Plan};
use codebook::trial_rng;

pub use chain::MAX_TABLE_LEAVES;

pub const MAX_BLOCK_LEN: usize = 16;
pub const MAX_MESSAGE_BITS: u32 = 20;
/// Slack on the per-symbol list-size exponent.
pub const CENSUS_EPSILON: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Symbols per block.
    pub block_len: usize,
    /// Bits per channel use.
    pub rate: f64,
    pub trials: u64,
    pub seed: u64,
    /// Cells per dimension of every relay quantizer.
    pub quantizer_levels: u32,
    /// Multiplier on the unit noise standard deviation.
    pub noise_scale: f64,
    /// Quantizer step in noise standard deviations. The default √12 makes
    /// the quantization error variance equal the noise variance.
    pub step_sigmas: f64,
    /// Probability mass of relay outputs the decoder enumerates per message.
    pub coverage: f64,
    /// Cap on enumerated outputs per relay layer and message.
    pub max_chains: usize,
}

impl SimConfig {
    pub fn new(block_len: usize, rate: f64) -> Self {
        SimConfig {
            block_len,
            rate,
            trials: 200,
            seed: 0,
            quantizer_levels: 256,
            noise_scale: 1.0,
            step_sigmas: 12f64.sqrt(),
            coverage: 0.999,
            max_chains: 1 << 15,
        }
    }

    /// `⌈R·T⌉`, the number of message bits per block.
    pub fn message_bits(&self) -> u32 {
        ((self.rate * self.block_len as f64) - 1e-9).ceil().max(0.0) as u32
    }

    pub fn num_messages(&self) -> u64 {
        1u64 << self.message_bits().min(63)
    }

    pub fn validate(&self) -> Result<u32> {
        if self.block_len == 0 {
            return Err(Error::validation("block_len", "must be at least 1"));
        }
        if self.block_len > MAX_BLOCK_LEN {
            return Err(Error::Capacity {
                what: "block length".into(),
                required: self.block_len as u128,
                limit: MAX_BLOCK_LEN as u128,
            });
        }
        if !(self.rate >= 0.0) || !self.rate.is_finite() {
            return Err(Error::validation("rate", format!("must be finite and non-negative, got {}", self.rate)));
        }
        let bits = self.message_bits();
        if bits > MAX_MESSAGE_BITS {
            return Err(Error::Capacity {
                what: "message bits per block".into(),
                required: bits.into(),
                limit: MAX_MESSAGE_BITS.into(),
            });
        }
        if self.quantizer_levels < 2 {
            return Err(Error::validation("quantizer_levels", "need at least 2 levels"));
        }
        if !(self.noise_scale > 0.0) || !self.noise_scale.is_finite() {
            return Err(Error::validation("noise_scale", "must be positive and finite"));
        }
        if !(self.step_sigmas > 0.0) || !self.step_sigmas.is_finite() {
            return Err(Error::validation("step_sigmas", "must be positive and finite"));
        }
        if !(self.coverage > 0.0 && self.coverage <= 1.0) {
            return Err(Error::validation("coverage", "must lie in (0, 1]"));
        }
        if self.max_chains == 0 {
            return Err(Error::validation("max_chains", "must be at least 1"));
        }
        Ok(bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub truth: u64,
    /// `None` when no chain passes the typicality test.
    pub decoded: Option<u64>,
}

impl TrialOutcome {
    pub fn is_error(&self) -> bool {
        self.decoded != Some(self.truth)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub trials: u64,
    pub errors: u64,
    pub error_rate: f64,
    /// Trials in which no message survived the typicality test.
    pub erasures: u64,
    #[serde(rename = "T")]
    pub block_len: usize,
    pub rate_bits: f64,
    pub message_bits: u32,
    pub seed: u64,
    /// (message, relay chain) pairs searched per block.
    pub chains: usize,
    /// Smallest relay-output probability mass enumerated for any message.
    pub min_coverage: f64,
    #[serde(skip)]
    pub wall_time: f64,
}

/// Encoder and decoder for one `(network, config)` pair. Building it draws
/// the codebooks and the decoder's chain table.
pub struct Simulator {
    plan: Plan,
    table: ChainTable,
    cfg: SimConfig,
}

impl Simulator {
    pub fn new(net: &RelayNetwork<f64>, cfg: &SimConfig) -> Result<Simulator> {
        let bits = cfg.validate()?;
        let plan = Plan::new(net, cfg, bits)?;
        let table = ChainTable::build(&plan)?;
        Ok(Simulator { plan, table, cfg: cfg.clone() })
    }

    /// One block with noise and message drawn from `trial_seed`'s stream.
    pub fn run_trial(&self, trial_seed: u64) -> TrialOutcome {
        let mut rng = trial_rng(self.cfg.seed, trial_seed);
        let tx = self.plan.transmit(&mut rng, None);
        TrialOutcome { truth: tx.message, decoded: self.table.decode(&self.plan, &tx.received) }
    }

    pub fn chains(&self) -> usize {
        self.table.len()
    }

    pub fn min_coverage(&self) -> f64 {
        self.table.min_coverage
    }
}

/// Runs a single trial. Builds the full decoder, so prefer [`Simulator`]
/// when running many.
pub fn run_trial(net: &RelayNetwork<f64>, cfg: &SimConfig, trial_seed: u64) -> Result<TrialOutcome> {
    Ok(Simulator::new(net, cfg)?.run_trial(trial_seed))
}

/// Error rate over `cfg.trials` blocks, trial `i` using stream `i`.
pub fn estimate_error_rate(net: &RelayNetwork<f64>, cfg: &SimConfig) -> Result<SimResult> {
    let start = Instant::now();
    if cfg.trials == 0 {
        return Err(Error::validation("trials", "an experiment needs at least one trial"));
    }
    let sim = Simulator::new(net, cfg)?;
    let outcomes: Vec<TrialOutcome> = (0..cfg.trials).into_par_iter().map(|i| sim.run_trial(i)).collect();
    let errors = outcomes.iter().filter(|o| o.is_error()).count() as u64;
    let erasures = outcomes.iter().filter(|o| o.decoded.is_none()).count() as u64;
    Ok(SimResult {
        trials: cfg.trials,
        errors,
        error_rate: errors as f64 / cfg.trials as f64,
        erasures,
        block_len: cfg.block_len,
        rate_bits: cfg.rate,
        message_bits: cfg.message_bits(),
        seed: cfg.seed,
        chains: sim.chains(),
        min_coverage: sim.min_coverage(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// List-size statistics at one relay for a fixed message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeCensus {
    pub node: String,
    pub sigma2_y: f64,
    pub draws: u64,
    /// Distinct quantized blocks seen over the draws.
    pub distinct: u64,
    /// `log₂(distinct) / T`.
    pub empirical_exponent: f64,
    /// Exact conditional entropy of the quantizer output per symbol, given
    /// the relay's noiseless input, averaged over the draws.
    pub entropy_exponent: f64,
    /// `u·log₂(1 + α)` for this relay's received power.
    pub reference_exponent: f64,
    /// `1 + ε`.
    pub bound_exponent: f64,
    /// `distinct ≤ 2^{T(1+ε)}`.
    pub bound_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusReport {
    #[serde(rename = "T")]
    pub block_len: usize,
    pub seed: u64,
    pub message: u64,
    pub nodes: Vec<NodeCensus>,
}

impl CensusReport {
    /// Whether every relay satisfies the list-size bound.
    pub fn holds(&self) -> bool {
        self.nodes.iter().all(|n| n.bound_ok)
    }
}

/// Counts distinct quantizer outputs at each relay over `cfg.trials` noise
/// draws with the message fixed to 0.
pub fn list_size_census(net: &RelayNetwork<f64>, cfg: &SimConfig) -> Result<CensusReport> {
    if cfg.trials == 0 {
        return Err(Error::validation("trials", "a census needs at least one draw"));
    }
    let bits = cfg.validate()?;
    let plan = Plan::new(net, cfg, bits)?;
    let t_len = cfg.block_len;
    let stages: Vec<_> = plan.layers.iter().flatten().cloned().collect();
    let draws: Vec<Vec<(Vec<u32>, f64)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(cfg.seed, i);
            let tx = plan.transmit(&mut rng, Some(0));
            tx.relays
                .into_iter()
                .zip(&stages)
                .map(|((_, cells, means), stage)| {
                    let h: f64 = means
                        .iter()
                        .map(|&m| {
                            stage
                                .quantizer
                                .cell_probabilities(m, plan.sigma, 0.0)
                                .iter()
                                .filter(|c| c.1 > 0.0)
                                .map(|c| -c.1 * c.1.log2())
                                .sum::<f64>()
                        })
                        .sum();
                    (cells, h / t_len as f64)
                })
                .collect()
        })
        .collect();
    let u = net.field_factor();
    let mut nodes = Vec::new();
    for (k, stage) in stages.iter().enumerate() {
        let distinct: HashSet<&Vec<u32>> = draws.iter().map(|d| &d[k].0).collect();
        let entropy = draws.iter().map(|d| d[k].1).sum::<f64>() / cfg.trials as f64;
        let distinct = distinct.len() as u64;
        let reference = quantizer_params(stage.sigma2_y.max(1.0))?.rate(u);
        let bound_exponent = 1.0 + CENSUS_EPSILON;
        nodes.push(NodeCensus {
            node: net.name(NodeId(stage.node)).to_string(),
            sigma2_y: stage.sigma2_y,
            draws: cfg.trials,
            distinct,
            empirical_exponent: (distinct as f64).log2() / t_len as f64,
            entropy_exponent: entropy,
            reference_exponent: reference,
            bound_exponent,
            bound_ok: (distinct as f64).log2() <= t_len as f64 * bound_exponent,
        });
    }
    Ok(CensusReport { block_len: t_len, seed: cfg.seed, message: 0, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::upper_bound;
    use crate::generate::{diamond, line};

    fn cfg(t: usize, r: f64, trials: u64) -> SimConfig {
        SimConfig { trials, seed: 11, ..SimConfig::new(t, r) }
    }

    #[test]
    fn budgets_are_enforced() {
        let net = line(&[100.0, 100.0]).unwrap();
        assert!(matches!(estimate_error_rate(&net, &cfg(8, 1.0, 0)), Err(Error::Validation { .. })));
        assert!(matches!(cfg(17, 0.5, 1).validate(), Err(Error::Capacity { .. })));
        assert!(matches!(cfg(8, 2.6, 1).validate(), Err(Error::Capacity { .. })));
        assert_eq!(cfg(8, 2.5, 1).validate().unwrap(), 20);
        assert_eq!(cfg(8, 1.0, 1).message_bits(), 8);
        assert_eq!(cfg(3, 0.5, 1).message_bits(), 2);
        let complex = line(&[1.0]).unwrap().with_field(crate::Field::Complex).unwrap();
        assert!(matches!(estimate_error_rate(&complex, &cfg(4, 1.0, 1)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn noiseless_line_decodes_exactly() {
        let net = line(&[100.0, 100.0]).unwrap();
        let c = SimConfig { noise_scale: 1e-6, ..cfg(8, 1.0, 50) };
        let sim = Simulator::new(&net, &c).unwrap();
        for trial in 0..50 {
            let o = sim.run_trial(trial);
            assert_eq!(o.decoded, Some(o.truth), "trial {trial}");
        }
    }

    #[test]
    fn trial_seeds_share_codebooks_but_not_noise() {
        let net = line(&[100.0, 100.0]).unwrap();
        let c = cfg(4, 1.0, 1);
        let plan = Plan::new(&net, &c, c.validate().unwrap()).unwrap();
        let a = plan.transmit(&mut trial_rng(c.seed, 1), Some(3));
        let b = plan.transmit(&mut trial_rng(c.seed, 2), Some(3));
        assert_ne!(a.received, b.received);
        // same message and same relay output → same relay codeword
        let again = plan.transmit(&mut trial_rng(c.seed, 1), Some(3));
        assert_eq!(a.received, again.received);
        assert_eq!(a.relays[0].2, b.relays[0].2);
    }

    #[test]
    fn direct_link_and_diamond_run() {
        let net = line(&[100.0]).unwrap();
        let r = estimate_error_rate(&net, &cfg(4, 1.0, 100)).unwrap();
        assert!(r.error_rate < 0.1, "{r:?}");
        let d = diamond(2.0).unwrap();
        let r = estimate_error_rate(&d, &cfg(2, 1.0, 100)).unwrap();
        assert!(r.error_rate < 0.2, "{r:?}");
    }

    #[test]
    fn results_are_deterministic() {
        let net = line(&[100.0, 100.0]).unwrap();
        let c = cfg(4, 1.5, 64);
        let mut a = estimate_error_rate(&net, &c).unwrap();
        let mut b = estimate_error_rate(&net, &c).unwrap();
        a.wall_time = 0.0;
        b.wall_time = 0.0;
        assert_eq!(a, b);
    }

    #[test]
    fn rate_above_the_cut_fails() {
        let net = line(&[100.0, 100.0]).unwrap();
        let upper = upper_bound(&net).unwrap();
        let r = estimate_error_rate(&net, &cfg(2, upper + 2.0, 200)).unwrap();
        assert!(r.error_rate > 0.5, "{r:?}");
    }

    #[test]
    fn census_noiseless_is_one_and_bound_holds() {
        let net = line(&[100.0, 100.0]).unwrap();
        let quiet = list_size_census(&net, &SimConfig { noise_scale: 1e-6, ..cfg(8, 1.0, 500) }).unwrap();
        assert_eq!(quiet.nodes[0].distinct, 1);
        let noisy = list_size_census(&net, &cfg(8, 1.0, 2000)).unwrap();
        assert!(noisy.holds(), "{noisy:?}");
        let n = &noisy.nodes[0];
        assert!(n.distinct > 1 && n.entropy_exponent < n.bound_exponent);
        assert!(n.reference_exponent <= 0.5 && n.bound_exponent == 1.25);
    }
}

//! Block cascade through a layered network and the exhaustive chain decoder.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::codebook::{codeword, map_index, ScalarQuantizer};
use super::SimConfig;
use crate::error::{Error, Result};
use crate::network::{Field, NodeId, RelayNetwork};

/// Upper limit on stored (message, chain) pairs.
pub const MAX_TABLE_LEAVES: usize = 1 << 23;
/// Cells below this probability are never proposed for a coordinate.
const CELL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) struct RelayStage {
    pub node: usize,
    pub quantizer: ScalarQuantizer,
    pub sigma2_y: f64,
    pub inputs: Vec<(usize, f64)>,
}

/// Per-node processing order for a layered network of at most four nodes.
#[derive(Debug, Clone)]
pub(crate) struct Plan {
    pub block_len: usize,
    pub sigma: f64,
    pub seed: u64,
    pub messages: u64,
    pub source: usize,
    pub nodes: usize,
    pub layers: Vec<Vec<RelayStage>>,
    pub dest_inputs: Vec<(usize, f64)>,
    pub coverage: f64,
    pub max_chains: usize,
}

/// What the destination and the relays saw in one block.
pub(crate) struct Transmission {
    pub message: u64,
    pub received: Vec<f64>,
    /// Quantized block and noiseless mean at every relay, in plan order.
    pub relays: Vec<(usize, Vec<u32>, Vec<f64>)>,
}

fn mean_of(inputs: &[(usize, f64)], xs: &[Option<Vec<f64>>], t: usize) -> f64 {
    inputs.iter().map(|&(u, g)| g * xs[u].as_ref().expect("upstream codeword")[t]).sum()
}

impl Plan {
    pub fn new(net: &RelayNetwork<f64>, cfg: &SimConfig, message_bits: u32) -> Result<Plan> {
        if net.field() != Field::Real {
            return Err(Error::Unsupported("the simulator handles real-field networks only".into()));
        }
        if net.len() > 4 {
            return Err(Error::Unsupported(format!("the simulator handles at most 4 nodes, got {}", net.len())));
        }
        let layering = net.layering()?;
        let d = net.destination();
        if layering.layers[layering.num_layers] != crate::NodeSet::singleton(d) {
            return Err(Error::validation("network", "the destination must be alone in the last layer"));
        }
        let sigma = cfg.noise_scale;
        let inputs = |v: NodeId| -> Vec<(usize, f64)> { net.in_neighbors(v).map(|(u, g)| (u.0, g.re)).collect() };
        let mut layers = Vec::new();
        for l in 1..layering.num_layers {
            let mut stage = Vec::new();
            for v in layering.layers[l].iter() {
                let ins = inputs(v);
                let sigma2_y = ins.iter().map(|&(_, g)| g * g).sum::<f64>() + sigma * sigma;
                let span = 8.0 * sigma2_y.sqrt();
                let step = (cfg.step_sigmas * sigma).max(span / f64::from(cfg.quantizer_levels));
                stage.push(RelayStage {
                    node: v.0,
                    quantizer: ScalarQuantizer { step, levels: cfg.quantizer_levels },
                    sigma2_y,
                    inputs: ins,
                });
            }
            layers.push(stage);
        }
        Ok(Plan {
            block_len: cfg.block_len,
            sigma,
            seed: cfg.seed,
            messages: 1u64 << message_bits,
            source: net.source().0,
            nodes: net.len(),
            layers,
            dest_inputs: inputs(d),
            coverage: cfg.coverage,
            max_chains: cfg.max_chains,
        })
    }

    fn relay_codeword(&self, node: usize, cells: &[u32]) -> (u64, Vec<f64>) {
        let index = map_index(self.seed, node, cells);
        (index, codeword(self.seed, node, index, self.block_len))
    }

    /// Sends `message` (or a uniformly drawn one) through the cascade.
    pub fn transmit(&self, rng: &mut ChaCha8Rng, message: Option<u64>) -> Transmission {
        let t_len = self.block_len;
        let message = message.unwrap_or_else(|| rng.gen_range(0..self.messages));
        let mut xs: Vec<Option<Vec<f64>>> = vec![None; self.nodes];
        xs[self.source] = Some(codeword(self.seed, self.source, message, t_len));
        let mut relays = Vec::new();
        let noise = |rng: &mut ChaCha8Rng| -> f64 {
            let z: f64 = StandardNormal.sample(rng);
            self.sigma * z
        };
        for stage in &self.layers {
            let mut produced = Vec::new();
            for r in stage {
                let means: Vec<f64> = (0..t_len).map(|t| mean_of(&r.inputs, &xs, t)).collect();
                let cells: Vec<u32> = means.iter().map(|&m| r.quantizer.index(m + noise(rng))).collect();
                let (_, x) = self.relay_codeword(r.node, &cells);
                produced.push((r.node, x));
                relays.push((r.node, cells, means));
            }
            for (node, x) in produced {
                xs[node] = Some(x);
            }
        }
        let received = (0..t_len).map(|t| mean_of(&self.dest_inputs, &xs, t) + noise(rng)).collect();
        Transmission { message, received, relays }
    }

    /// Acceptance radius² for the destination residual.
    pub fn threshold(&self) -> f64 {
        let t = self.block_len as f64;
        (1.0 + 3.0 * (2.0 / t).sqrt()) * t * self.sigma * self.sigma
    }
}

/// One candidate explanation of the destination block: a message together
/// with a quantizer output at every relay.
#[derive(Debug, Clone, Copy)]
struct Leaf {
    key: [f64; 2],
    log_prob: f64,
    message: u32,
    words: [u64; 2],
}

/// Every plausible (message, relay chain) pair, sorted by the first
/// coordinate of the destination mean for band lookup.
pub(crate) struct ChainTable {
    leaves: Vec<Leaf>,
    pub min_coverage: f64,
}

#[derive(PartialEq)]
struct Node {
    log_prob: f64,
    idx: Vec<u16>,
    last: usize,
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.log_prob.total_cmp(&other.log_prob).then_with(|| other.idx.cmp(&self.idx))
    }
}

/// Most likely index vectors of a product distribution, in non-increasing
/// probability, until `coverage` mass or `max` vectors are reached.
fn k_best(lists: &[Vec<(u32, f64)>], coverage: f64, max: usize) -> (Vec<(Vec<u32>, f64)>, f64) {
    let logs: Vec<Vec<f64>> = lists.iter().map(|l| l.iter().map(|c| c.1.ln()).collect()).collect();
    let start: f64 = logs.iter().map(|l| l[0]).sum();
    let mut heap = BinaryHeap::from([Node { log_prob: start, idx: vec![0; lists.len()], last: 0 }]);
    let (mut out, mut mass) = (Vec::new(), 0.0);
    while let Some(Node { log_prob, idx, last }) = heap.pop() {
        mass += log_prob.exp();
        out.push((idx.iter().zip(lists).map(|(&i, l)| l[i as usize].0).collect(), log_prob));
        if mass >= coverage || out.len() >= max {
            break;
        }
        for j in last..lists.len() {
            let i = idx[j] as usize;
            if i + 1 < lists[j].len() {
                let mut next = idx.clone();
                next[j] += 1;
                heap.push(Node { log_prob: log_prob - logs[j][i] + logs[j][i + 1], idx: next, last: j });
            }
        }
    }
    (out, mass)
}

impl ChainTable {
    pub fn build(plan: &Plan) -> Result<ChainTable> {
        let per_message = (MAX_TABLE_LEAVES as u64 / plan.messages).max(1) as usize;
        let parts: Vec<Result<(Vec<Leaf>, f64)>> = (0..plan.messages)
            .into_par_iter()
            .map(|w| {
                let mut xs: Vec<Option<Vec<f64>>> = vec![None; plan.nodes];
                let mut words = vec![0u64; plan.nodes];
                xs[plan.source] = Some(codeword(plan.seed, plan.source, w, plan.block_len));
                words[plan.source] = w;
                let mut out = Vec::new();
                let mut coverage = 1.0f64;
                expand(plan, 0, &mut xs, &mut words, 0.0, w as u32, &mut out, &mut coverage, per_message)?;
                Ok((out, coverage))
            })
            .collect();
        let mut leaves = Vec::new();
        let mut min_coverage = 1.0f64;
        for part in parts {
            let (p, c) = part?;
            leaves.extend(p);
            min_coverage = min_coverage.min(c);
        }
        leaves.sort_by(|a, b| a.key[0].total_cmp(&b.key[0]));
        Ok(ChainTable { leaves, min_coverage })
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    /// Maximum-likelihood message among chains whose destination residual
    /// passes the typicality threshold; `None` if no chain survives.
    pub fn decode(&self, plan: &Plan, received: &[f64]) -> Option<u64> {
        let r2 = plan.threshold();
        let r = r2.sqrt();
        let y = [received[0], received.get(1).copied().unwrap_or(0.0)];
        let start = self.leaves.partition_point(|l| l.key[0] < y[0] - r);
        let two_sigma2 = 2.0 * plan.sigma * plan.sigma;
        let mut best: Option<(f64, u64)> = None;
        for leaf in self.leaves[start..].iter().take_while(|l| l.key[0] <= y[0] + r) {
            if (leaf.key[1] - y[1]).abs() > r {
                continue;
            }
            let words: Vec<Vec<f64>> = plan
                .dest_inputs
                .iter()
                .zip(leaf.words)
                .map(|(&(u, _), idx)| codeword(plan.seed, u, idx, plan.block_len))
                .collect();
            let res2: f64 = received
                .iter()
                .enumerate()
                .map(|(t, &yt)| {
                    let m: f64 = plan.dest_inputs.iter().zip(&words).map(|(&(_, g), x)| g * x[t]).sum();
                    (yt - m) * (yt - m)
                })
                .sum();
            if res2 > r2 {
                continue;
            }
            let score = leaf.log_prob - res2 / two_sigma2;
            if best.map_or(true, |(s, m)| score > s || (score == s && u64::from(leaf.message) < m)) {
                best = Some((score, u64::from(leaf.message)));
            }
        }
        best.map(|b| b.1)
    }
}

#[allow(clippy::too_many_arguments)]
fn expand(
    plan: &Plan,
    layer: usize,
    xs: &mut Vec<Option<Vec<f64>>>,
    words: &mut Vec<u64>,
    log_prob: f64,
    message: u32,
    out: &mut Vec<Leaf>,
    coverage: &mut f64,
    cap: usize,
) -> Result<()> {
    let t_len = plan.block_len;
    if layer == plan.layers.len() {
        let mean = |t: usize| mean_of(&plan.dest_inputs, xs, t);
        let mut leaf_words = [0u64; 2];
        for (slot, &(u, _)) in leaf_words.iter_mut().zip(&plan.dest_inputs) {
            *slot = words[u];
        }
        out.push(Leaf {
            key: [mean(0), if t_len > 1 { mean(1) } else { 0.0 }],
            log_prob,
            message,
            words: leaf_words,
        });
        if out.len() > cap {
            return Err(Error::Capacity {
                what: "decoder chain table".into(),
                required: (out.len() as u128) * u128::from(plan.messages),
                limit: MAX_TABLE_LEAVES as u128,
            });
        }
        return Ok(());
    }
    let stage = &plan.layers[layer];
    let mut lists = Vec::with_capacity(stage.len() * t_len);
    for r in stage {
        for t in 0..t_len {
            lists.push(r.quantizer.cell_probabilities(mean_of(&r.inputs, xs, t), plan.sigma, CELL_FLOOR));
        }
    }
    let (chains, mass) = k_best(&lists, plan.coverage, plan.max_chains);
    *coverage = coverage.min(mass);
    for (cells, lp) in chains {
        for (k, r) in stage.iter().enumerate() {
            let (index, x) = plan.relay_codeword(r.node, &cells[k * t_len..(k + 1) * t_len]);
            words[r.node] = index;
            xs[r.node] = Some(x);
        }
        expand(plan, layer + 1, xs, words, log_prob + lp, message, out, coverage, cap)?;
    }
    for r in stage {
        xs[r.node] = None;
    }
    Ok(())
}

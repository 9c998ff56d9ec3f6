//! Network templates and seeded random generators.

use rand::Rng;

use crate::error::{Error, Result};
use crate::network::{Field, NodeSet, RelayNetwork};
use crate::scalar::{Cplx, Real};

/// Two-relay diamond `S → {A1, A2} → D` with gains
/// `S→A1 = a⁵`, `S→A2 = a²`, `A1→D = a³`, `A2→D = a⁵` over the real field.
pub fn diamond<T: Real>(a: T) -> Result<RelayNetwork<T>> {
    if !(a > T::zero()) || !a.is_finite() {
        return Err(Error::Domain(format!("diamond parameter must be positive and finite, got {a}")));
    }
    let g = |k: i32| Cplx::new(a.powi(k), T::zero());
    RelayNetwork::new(
        ["S", "A1", "A2", "D"].map(String::from).to_vec(),
        0,
        3,
        Field::Real,
        [(0, 1, g(5)), (0, 2, g(2)), (1, 3, g(3)), (2, 3, g(5))],
    )
}

/// Chain `S → R1 → … → D` with the given hop gains, real field.
pub fn line<T: Real>(gains: &[T]) -> Result<RelayNetwork<T>> {
    if gains.is_empty() {
        return Err(Error::validation("gains", "a line needs at least one hop"));
    }
    let n = gains.len() + 1;
    let mut names = vec!["S".to_string()];
    names.extend((1..n - 1).map(|i| format!("R{i}")));
    names.push("D".into());
    let edges = gains.iter().enumerate().map(|(i, &g)| (i, i + 1, Cplx::new(g, T::zero())));
    RelayNetwork::new(names, 0, n - 1, Field::Real, edges)
}

/// Parameters for [`random_network`].
#[derive(Debug, Clone)]
pub struct RandomNetworkSpec {
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub edge_prob: f64,
    pub field: Field,
    /// Gain magnitudes are log-uniform in `±gain_db` decibels of power.
    pub gain_db: f64,
}

impl Default for RandomNetworkSpec {
    fn default() -> Self {
        RandomNetworkSpec { min_nodes: 2, max_nodes: 6, edge_prob: 0.5, field: Field::Complex, gain_db: 60.0 }
    }
}

fn node_names(n: usize) -> Vec<String> {
    let mut names = vec!["S".to_string()];
    names.extend((1..n - 1).map(|i| format!("R{i}")));
    names.push("D".into());
    names
}

fn random_gain(rng: &mut impl Rng, field: Field, gain_db: f64) -> Cplx<f64> {
    let db = if gain_db > 0.0 { rng.gen_range(-gain_db..=gain_db) } else { 0.0 };
    let mag = 10f64.powf(db / 20.0);
    match field {
        Field::Real => Cplx::new(if rng.gen_bool(0.5) { mag } else { -mag }, 0.0),
        Field::Complex => Cplx::from_polar(mag, rng.gen_range(0.0..std::f64::consts::TAU)),
    }
}

/// Random directed network, possibly with cycles, in which every node lies on
/// a source-destination path. Node 0 is `S` and the last node is `D`.
pub fn random_network(rng: &mut impl Rng, spec: &RandomNetworkSpec) -> RelayNetwork<f64> {
    let n = rng.gen_range(spec.min_nodes.max(2)..=spec.max_nodes.max(spec.min_nodes.max(2)));
    let (s, d) = (0, n - 1);
    let mut adj = vec![vec![false; n]; n];
    for (i, row) in adj.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            if i != j && j != s && i != d {
                *cell = rng.gen_bool(spec.edge_prob);
            }
        }
    }
    let reach_from = |adj: &[Vec<bool>], start: usize, forward: bool| -> Vec<bool> {
        let mut seen = vec![false; n];
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for w in 0..n {
                let e = if forward { adj[v][w] } else { adj[w][v] };
                if e && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    };
    // connect unreachable relays from something reachable
    for v in 1..n {
        let fwd = reach_from(&adj, s, true);
        if !fwd[v] {
            let sources: Vec<usize> = (0..n).filter(|&u| fwd[u] && u != d).collect();
            let u = sources[rng.gen_range(0..sources.len())];
            adj[u][v] = true;
        }
    }
    // and give every node a way out to the destination
    for v in 0..n - 1 {
        let bwd = reach_from(&adj, d, false);
        if !bwd[v] {
            let sinks: Vec<usize> = (1..n).filter(|&w| bwd[w] && w != v).collect();
            let w = sinks[rng.gen_range(0..sinks.len())];
            adj[v][w] = true;
        }
    }
    let mut edges = Vec::new();
    for (i, row) in adj.iter().enumerate() {
        for (j, &e) in row.iter().enumerate() {
            if e {
                edges.push((i, j, random_gain(rng, spec.field, spec.gain_db)));
            }
        }
    }
    RelayNetwork::new(node_names(n), s, d, spec.field, edges).expect("generator builds valid networks")
}

/// Random layered network with `num_layers` hops and up to `max_width`
/// relays per intermediate layer, capped at `max_nodes` nodes overall.
pub fn random_layered_network(
    rng: &mut impl Rng,
    num_layers: usize,
    max_width: usize,
    max_nodes: usize,
    field: Field,
    gain_db: f64,
) -> RelayNetwork<f64> {
    assert!(num_layers >= 1 && max_width >= 1);
    assert!(max_nodes >= num_layers + 1, "too few nodes for {num_layers} layers");
    let mut widths = vec![1usize];
    let mut budget = max_nodes - (num_layers + 1);
    for _ in 1..num_layers {
        let extra = rng.gen_range(0..max_width).min(budget);
        budget -= extra;
        widths.push(1 + extra);
    }
    widths.push(1);
    let mut layer_nodes: Vec<Vec<usize>> = Vec::new();
    let mut next = 0;
    for &w in &widths {
        layer_nodes.push((next..next + w).collect());
        next += w;
    }
    let n = next;
    let mut pairs = Vec::new();
    for l in 0..num_layers {
        let (prev, cur) = (&layer_nodes[l], &layer_nodes[l + 1]);
        let mut has_out = vec![false; prev.len()];
        let mut has_in = vec![false; cur.len()];
        for (a, &u) in prev.iter().enumerate() {
            for (b, &v) in cur.iter().enumerate() {
                if rng.gen_bool(0.6) {
                    pairs.push((u, v));
                    has_out[a] = true;
                    has_in[b] = true;
                }
            }
        }
        for (b, &v) in cur.iter().enumerate() {
            if !has_in[b] {
                let a = rng.gen_range(0..prev.len());
                pairs.push((prev[a], v));
                has_out[a] = true;
            }
        }
        for (a, &u) in prev.iter().enumerate() {
            if !has_out[a] {
                pairs.push((u, cur[rng.gen_range(0..cur.len())]));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let edges: Vec<_> = pairs.into_iter().map(|(u, v)| (u, v, random_gain(rng, field, gain_db))).collect();
    RelayNetwork::new(node_names(n), 0, n - 1, field, edges).expect("generator builds valid networks")
}

/// Random subset of `pool`, each member kept with probability `p`.
pub fn random_subset(rng: &mut impl Rng, pool: NodeSet, p: f64) -> NodeSet {
    pool.iter().filter(|_| rng.gen_bool(p)).collect::<NodeSet>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NodeId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diamond_gains() {
        let net = diamond(2.0).unwrap();
        assert_eq!(net.names(), ["S", "A1", "A2", "D"]);
        assert_eq!(net.gain(NodeId(0), NodeId(1)).unwrap().re, 32.0);
        assert_eq!(net.gain(NodeId(0), NodeId(2)).unwrap().re, 4.0);
        assert_eq!(net.gain(NodeId(1), NodeId(3)).unwrap().re, 8.0);
        assert_eq!(net.gain(NodeId(2), NodeId(3)).unwrap().re, 32.0);
        assert!(diamond(0.0).is_err());
        assert!(diamond(f64::NAN).is_err());
    }

    #[test]
    fn line_shape() {
        let net = line(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(net.names(), ["S", "R1", "R2", "D"]);
        assert_eq!(net.layering().unwrap().num_layers, 3);
        assert!(line::<f64>(&[]).is_err());
    }

    #[test]
    fn random_networks_are_valid_and_reproducible() {
        let spec = RandomNetworkSpec { max_nodes: 7, ..Default::default() };
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let mut b = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let x = random_network(&mut a, &spec);
            let y = random_network(&mut b, &spec);
            assert_eq!(x, y);
            assert!(x.len() >= 2 && x.len() <= 7);
        }
    }

    #[test]
    fn random_layered_networks_are_layered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let layers = rng.gen_range(1..=4);
            let net = random_layered_network(&mut rng, layers, 3, 6, Field::Real, 30.0);
            assert!(net.len() <= 6);
            assert_eq!(net.layering().unwrap().num_layers, layers);
        }
    }
}

//! Time expansion of arbitrary networks into K-stage layered networks, the
//! trellis min-cut check, and the entropy loop inequality.

use itertools::Itertools;
use rayon::prelude::*;

use crate::cutset::min_cut_analysis;
use crate::error::{Error, Result};
use crate::linalg::{gaussian_cond_entropy, mi_gaussian_iid};
use crate::network::{Cut, LayerDecomposition, NodeId, NodeSet, RelayNetwork, MAX_NODES};
use crate::scalar::{Cplx, Real};

/// Largest number of unfolded cut sequences [`verify_trellis_lemma`] will
/// enumerate.
pub const TRELLIS_BUDGET: u128 = 10_000_000;

/// Edge of an unfolded network between consecutive stages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnfoldedEdge<T: Real> {
    pub from: NodeId,
    pub to: NodeId,
    /// `None` for the lossless memory links `S[i]→S[i+1]` and `D[i]→D[i+1]`.
    pub gain: Option<Cplx<T>>,
}

/// `K` copies of a network where stage `i` transmits into stage `i+1`.
/// Node `v` of stage `i` (1-based) has index `(i-1)·|V| + v`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedNetwork<T: Real> {
    base: RelayNetwork<T>,
    stages: usize,
    edges: Vec<UnfoldedEdge<T>>,
    layering: LayerDecomposition,
}

pub fn unfold<T: Real>(net: &RelayNetwork<T>, stages: usize) -> Result<UnfoldedNetwork<T>> {
    if stages < 2 {
        return Err(Error::Domain(format!("time expansion needs at least 2 stages, got {stages}")));
    }
    let n = net.len();
    if n * stages > MAX_NODES {
        return Err(Error::Capacity {
            what: "unfolded node count".into(),
            required: (n * stages) as u128,
            limit: MAX_NODES as u128,
        });
    }
    let id = |stage: usize, v: NodeId| NodeId((stage - 1) * n + v.0);
    let mut edges = Vec::new();
    for i in 1..stages {
        for (a, b, g) in net.edges() {
            edges.push(UnfoldedEdge { from: id(i, a), to: id(i + 1, b), gain: Some(g) });
        }
        for v in [net.source(), net.destination()] {
            edges.push(UnfoldedEdge { from: id(i, v), to: id(i + 1, v), gain: None });
        }
    }
    // every edge joins consecutive stages, so stage k is layer k - 1
    let layering = LayerDecomposition {
        depth: (0..n * stages).map(|i| i / n).collect(),
        layers: (1..=stages).map(|k| net.nodes().map(|v| id(k, v)).collect()).collect(),
        num_layers: stages - 1,
    };
    Ok(UnfoldedNetwork { base: net.clone(), stages, edges, layering })
}

impl<T: Real> UnfoldedNetwork<T> {
    pub fn base(&self) -> &RelayNetwork<T> {
        &self.base
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn node_count(&self) -> usize {
        self.stages * self.base.len()
    }

    /// `V[i]` naming, stage 1-based.
    pub fn name(&self, node: NodeId) -> String {
        let n = self.base.len();
        format!("{}[{}]", self.base.name(NodeId(node.0 % n)), node.0 / n + 1)
    }

    pub fn edges(&self) -> &[UnfoldedEdge<T>] {
        &self.edges
    }

    pub fn crossing_edges(&self) -> impl Iterator<Item = &UnfoldedEdge<T>> {
        self.edges.iter().filter(|e| e.gain.is_some())
    }

    pub fn memory_edges(&self) -> impl Iterator<Item = &UnfoldedEdge<T>> {
        self.edges.iter().filter(|e| e.gain.is_none())
    }

    /// Stage `k` forms layer `k − 1`; the destination `D[K]` sits at depth
    /// `K − 1`. Nodes that cannot reach `D[K]` are still assigned their stage.
    pub fn layering(&self) -> &LayerDecomposition {
        &self.layering
    }
}

/// Per-stage source-side sets `U_1, …, U_K` of an unfolded cut.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UnfoldedCut {
    sets: Vec<NodeSet>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutShape {
    Steady,
    Wiggling,
}

impl UnfoldedCut {
    /// Requires `S ∈ U_1` and `D ∉ U_K`. Other placements of `S` and `D` are
    /// allowed but cross a memory link.
    pub fn new<T: Real>(net: &RelayNetwork<T>, sets: Vec<NodeSet>) -> Result<Self> {
        if sets.len() < 2 {
            return Err(Error::validation("stages", "an unfolded cut needs at least 2 stages"));
        }
        let all = net.all_nodes();
        if sets.iter().any(|s| !s.is_subset(all)) {
            return Err(Error::validation("stages", "stage set contains nodes outside the network"));
        }
        if !sets[0].contains(net.source()) {
            return Err(Error::validation("stages", "first stage must contain the source"));
        }
        if sets[sets.len() - 1].contains(net.destination()) {
            return Err(Error::validation("stages", "last stage must not contain the destination"));
        }
        Ok(UnfoldedCut { sets })
    }

    /// The same cut Ω repeated in every stage.
    pub fn steady(cut: &Cut, stages: usize) -> Self {
        UnfoldedCut { sets: vec![cut.omega(); stages] }
    }

    pub fn sets(&self) -> &[NodeSet] {
        &self.sets
    }

    pub fn stages(&self) -> usize {
        self.sets.len()
    }

    fn crosses_memory<T: Real>(&self, net: &RelayNetwork<T>) -> bool {
        self.sets.iter().any(|s| !s.contains(net.source()) || s.contains(net.destination()))
    }
}

pub fn classify_cut(cut: &UnfoldedCut) -> CutShape {
    if cut.sets.iter().all_equal() {
        CutShape::Steady
    } else {
        CutShape::Wiggling
    }
}

/// `Σ_{i=1}^{K−1} I(Y_{V∖U_{i+1}}; X_{U_i} | X_{V∖U_i})`, or `+∞` when a
/// lossless memory link is cut.
pub fn unfolded_cut_value<T: Real>(unet: &UnfoldedNetwork<T>, cut: &UnfoldedCut) -> Result<T> {
    if cut.stages() != unet.stages {
        return Err(Error::validation(
            "stages",
            format!("cut has {} stages, network has {}", cut.stages(), unet.stages),
        ));
    }
    let net = &unet.base;
    if cut.crosses_memory(net) {
        return Ok(T::infinity());
    }
    Ok(cut.sets.windows(2).map(|w| stage_mi(net, w[0], w[1])).sum())
}

fn stage_mi<T: Real>(net: &RelayNetwork<T>, tx: NodeSet, next: NodeSet) -> T {
    let h = net.crossing_matrix(tx, next.complement(net.len())).matrix;
    mi_gaussian_iid(&h, T::one(), net.field_factor())
}

/// Transition table `T[a][b]` between original cuts `a` (stage `i`) and `b`
/// (stage `i+1`), indexed by relay bitmask.
fn transition_table<T: Real>(net: &RelayNetwork<T>, cuts: &[Cut]) -> Vec<Vec<T>> {
    cuts.par_iter().map(|a| cuts.iter().map(|b| stage_mi(net, a.omega(), b.omega())).collect()).collect()
}

/// Smallest unfolded cut value over all cut sequences that avoid the memory
/// links, found by dynamic programming over stages.
pub fn unfolded_min_cut<T: Real>(net: &RelayNetwork<T>, stages: usize) -> Result<T> {
    if stages < 2 {
        return Err(Error::Domain(format!("time expansion needs at least 2 stages, got {stages}")));
    }
    let cuts = net.enumerate_cuts()?;
    let table = transition_table(net, &cuts);
    let mut best = vec![T::zero(); cuts.len()];
    for _ in 1..stages {
        best = (0..cuts.len())
            .map(|b| (0..cuts.len()).map(|a| best[a] + table[a][b]).fold(T::infinity(), T::min))
            .collect();
    }
    Ok(best.into_iter().fold(T::infinity(), T::min))
}

/// QMF rate of the `K`-stage unfolding, in bits per `K`-stage block:
/// `max(0, unfolded min-cut − 3u·K|V|)`.
pub fn qmf_achievable_unfolded<T: Real>(net: &RelayNetwork<T>, stages: usize) -> Result<T> {
    let kappa = T::lit(3.0) * net.field_factor() * T::lit((stages * net.len()) as f64);
    Ok((unfolded_min_cut(net, stages)? - kappa).max(T::zero()))
}

/// One unfolded cut sequence that fell below the trellis bound.
#[derive(Debug, Clone, PartialEq)]
pub struct TrellisViolation<T: Real> {
    /// Relay bitmask of `U_i` per stage.
    pub sequence: Vec<u64>,
    pub value: T,
    pub bound: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrellisReport<T: Real> {
    pub stages: usize,
    /// Number of original cuts, `2^{|V|−2}`.
    pub num_cuts: usize,
    /// `K − L + 1`
    pub factor: i64,
    pub min_original: T,
    pub min_unfolded: T,
    pub checked: u64,
    pub violation_count: u64,
    /// First violations in enumeration order, at most [`MAX_LISTED`].
    pub violations: Vec<TrellisViolation<T>>,
    /// Smallest `value − bound` over all sequences.
    pub margin: T,
    /// `K − L + 1 ≤ 0`: the bound is nonpositive and holds trivially.
    pub vacuous: bool,
}

pub const MAX_LISTED: usize = 32;

/// Exhaustively checks `(K − L + 1)·min_Ω I ≤ value` over all `L^K` unfolded
/// cut sequences that avoid the memory links, with `L = 2^{|V|−2}`.
pub fn verify_trellis_lemma<T: Real>(net: &RelayNetwork<T>, stages: usize) -> Result<TrellisReport<T>> {
    if stages < 2 {
        return Err(Error::Domain(format!("time expansion needs at least 2 stages, got {stages}")));
    }
    let cuts = net.enumerate_cuts()?;
    let l = cuts.len();
    let total = (l as u128).checked_pow(stages as u32).unwrap_or(u128::MAX);
    if total > TRELLIS_BUDGET {
        return Err(Error::Capacity { what: "unfolded cut sequences".into(), required: total, limit: TRELLIS_BUDGET });
    }
    let min_original = min_cut_analysis(net)?.min_iid();
    let factor = stages as i64 - l as i64 + 1;
    let bound = T::lit(factor as f64) * min_original;
    let tol = T::tol(1e-9) * bound.abs().max(T::one());
    let table = transition_table(net, &cuts);

    let partials: Vec<Partial<T>> = (0..l)
        .into_par_iter()
        .map(|first| {
            let mut acc = Partial::new();
            let mut seq = vec![first];
            walk(&table, stages, &mut seq, T::zero(), bound, tol, &mut acc);
            acc
        })
        .collect();

    let mut report = TrellisReport {
        stages,
        num_cuts: l,
        factor,
        min_original,
        min_unfolded: T::infinity(),
        checked: 0,
        violation_count: 0,
        violations: Vec::new(),
        margin: T::infinity(),
        vacuous: factor <= 0,
    };
    for p in partials {
        report.checked += p.checked;
        report.violation_count += p.violation_count;
        report.min_unfolded = report.min_unfolded.min(p.min_value);
        report.margin = report.margin.min(p.min_value - bound);
        for (sequence, value) in p.violations {
            if report.violations.len() < MAX_LISTED {
                let sequence = sequence.iter().map(|&i| cuts[i].relay_mask(net)).collect();
                report.violations.push(TrellisViolation { sequence, value, bound });
            }
        }
    }
    Ok(report)
}

struct Partial<T: Real> {
    checked: u64,
    violation_count: u64,
    violations: Vec<(Vec<usize>, T)>,
    min_value: T,
}

impl<T: Real> Partial<T> {
    fn new() -> Self {
        Partial { checked: 0, violation_count: 0, violations: Vec::new(), min_value: T::infinity() }
    }
}

fn walk<T: Real>(table: &[Vec<T>], stages: usize, seq: &mut Vec<usize>, sum: T, bound: T, tol: T, acc: &mut Partial<T>) {
    if seq.len() == stages {
        acc.checked += 1;
        acc.min_value = acc.min_value.min(sum);
        if sum < bound - tol {
            acc.violation_count += 1;
            if acc.violations.len() < MAX_LISTED {
                acc.violations.push((seq.clone(), sum));
            }
        }
        return;
    }
    let last = seq[seq.len() - 1];
    for next in 0..table.len() {
        seq.push(next);
        walk(table, stages, seq, sum + table[last][next], bound, tol, acc);
        seq.pop();
    }
}

/// Subsets `V_1, …, V_l` of `V ∖ {S}`, each containing `D`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetSequence {
    sets: Vec<NodeSet>,
}

impl SubsetSequence {
    pub fn new<T: Real>(net: &RelayNetwork<T>, sets: Vec<NodeSet>) -> Result<Self> {
        if sets.len() < 2 {
            return Err(Error::validation("sets", format!("need at least 2 subsets, got {}", sets.len())));
        }
        for (i, s) in sets.iter().enumerate() {
            if !s.is_subset(net.all_nodes()) {
                return Err(Error::validation("sets", format!("subset {} has nodes outside the network", i + 1)));
            }
            if !s.contains(net.destination()) {
                return Err(Error::validation("sets", format!("subset {} must contain the destination", i + 1)));
            }
            if s.contains(net.source()) {
                return Err(Error::validation("sets", format!("subset {} must not contain the source", i + 1)));
            }
        }
        Ok(SubsetSequence { sets })
    }

    pub fn sets(&self) -> &[NodeSet] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

/// `Ṽ_k`: nodes lying in at least `k` of the sets, as the union over all
/// `k`-subsets of indices of their intersections.
pub fn tilde_sets(seq: &SubsetSequence, k: usize) -> Result<NodeSet> {
    if k == 0 || k > seq.len() {
        return Err(Error::Index { index: k, max: seq.len() });
    }
    Ok((0..seq.len())
        .combinations(k)
        .map(|idx| idx.iter().fold(NodeSet::from_bits(u64::MAX), |acc, &i| acc.intersection(seq.sets[i])))
        .fold(NodeSet::EMPTY, NodeSet::union))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopReport<T: Real> {
    /// `Σ_i h(Y_{V_{i+1}} | X_{V_i})`, indices cyclic.
    pub lhs: T,
    /// `Σ_k h(Y_{Ṽ_k} | X_{Ṽ_k})`
    pub rhs: T,
    pub margin: T,
}

pub fn verify_loop_lemma<T: Real>(net: &RelayNetwork<T>, seq: &SubsetSequence) -> LoopReport<T> {
    let l = seq.len();
    let lhs = (0..l).map(|i| gaussian_cond_entropy(net, seq.sets[(i + 1) % l], seq.sets[i])).sum::<T>();
    let rhs = (1..=l)
        .map(|k| {
            let t = tilde_sets(seq, k).expect("k within 1..=l");
            gaussian_cond_entropy(net, t, t)
        })
        .sum::<T>();
    LoopReport { lhs, rhs, margin: lhs - rhs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutset::cut_report;
    use crate::generate::{diamond, line, random_network, random_subset, RandomNetworkSpec};
    use crate::network::Field;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(bits: u64) -> NodeSet {
        NodeSet::from_bits(bits)
    }

    #[test]
    fn unfold_counts() {
        let net = diamond(2.0).unwrap();
        let u = unfold(&net, 3).unwrap();
        assert_eq!(u.node_count(), 12);
        assert_eq!(u.crossing_edges().count(), 8);
        assert_eq!(u.memory_edges().count(), 4);
        assert_eq!(u.layering().num_layers, 2);
        assert_eq!(u.name(NodeId(5)), "A1[2]");

        let two = unfold(&line(&[1.0]).unwrap(), 2).unwrap();
        assert_eq!(two.node_count(), 4);
        assert_eq!(two.crossing_edges().count(), 1);
        let e = two.crossing_edges().next().unwrap();
        assert_eq!((two.name(e.from), two.name(e.to)), ("S[1]".to_string(), "D[2]".to_string()));
        assert!(unfold(&net, 1).is_err());
    }

    #[test]
    fn unfolding_layers_a_network_with_unequal_paths() {
        let net = RelayNetwork::new(
            ["S", "A", "B", "D"].map(String::from).to_vec(),
            0,
            3,
            Field::Real,
            [(0, 1, Cplx::new(2.0, 0.0)), (1, 2, Cplx::new(2.0, 0.0)), (2, 3, Cplx::new(2.0, 0.0)), (0, 3, Cplx::new(1.0, 0.0))],
        )
        .unwrap();
        assert!(net.layering().is_err());
        let u = unfold(&net, 4).unwrap();
        let lay = u.layering();
        assert_eq!(lay.num_layers, 3);
        for e in u.edges() {
            assert_eq!(lay.depth[e.to.0], lay.depth[e.from.0] + 1);
        }
    }

    #[test]
    fn classification() {
        let net = diamond(2.0).unwrap();
        let steady = UnfoldedCut::new(&net, vec![set(0b0011); 4]).unwrap();
        assert_eq!(classify_cut(&steady), CutShape::Steady);
        let wig = UnfoldedCut::new(&net, vec![set(0b0001), set(0b0011), set(0b0001), set(0b0001)]).unwrap();
        assert_eq!(classify_cut(&wig), CutShape::Wiggling);
        assert_eq!(classify_cut(&UnfoldedCut::new(&net, vec![set(1); 2]).unwrap()), CutShape::Steady);
        assert!(UnfoldedCut::new(&net, vec![set(0b0010), set(0b0001)]).is_err());
        assert!(UnfoldedCut::new(&net, vec![set(0b0001), set(0b1001)]).is_err());
    }

    #[test]
    fn steady_and_wiggling_values() {
        let net = diamond(2.0).unwrap();
        let u = unfold(&net, 3).unwrap();
        let s = Cut::new(&net, set(1)).unwrap();
        let v = unfolded_cut_value(&u, &UnfoldedCut::steady(&s, 3)).unwrap();
        assert_eq!(v, 2.0 * cut_report(&net, &s).mi_iid);

        let crossing = UnfoldedCut::new(&net, vec![set(0b0001), set(0b0000), set(0b0001)]).unwrap();
        assert_eq!(unfolded_cut_value(&u, &crossing).unwrap(), f64::INFINITY);
        let into_d = UnfoldedCut::new(&net, vec![set(0b1001), set(0b0001), set(0b0001)]).unwrap();
        assert_eq!(unfolded_cut_value(&u, &into_d).unwrap(), f64::INFINITY);

        // {S} → {S,A1}: tx S, rx {A2, D}; {S,A1} → {S}: tx {S,A1}, rx {A1,A2,D}
        let wig = UnfoldedCut::new(&net, vec![set(0b0001), set(0b0011), set(0b0001)]).unwrap();
        let first = 0.5 * 17f64.log2();
        let second = 0.5 * (1041f64.log2() + 65f64.log2());
        assert_relative_eq!(unfolded_cut_value(&u, &wig).unwrap(), first + second, max_relative = 1e-12);
    }

    #[test]
    fn trellis_diamond_small() {
        let net = diamond(2.0).unwrap();
        let r = verify_trellis_lemma(&net, 3).unwrap();
        assert!(r.vacuous);
        assert_eq!(r.checked, 64);
        assert_eq!(r.violation_count, 0);
        let r = verify_trellis_lemma(&net, 5).unwrap();
        assert_eq!(r.factor, 2);
        assert_eq!(r.checked, 1024);
        assert_eq!(r.violation_count, 0, "{:?}", r.violations);
        assert!(r.margin >= 0.0);
    }

    #[test]
    fn trellis_factor_is_too_strong_without_relays() {
        // one cut, K stages, K − 1 transitions: the factor K − L + 1 = K
        // overshoots the K − 1 copies of the cut that are actually present
        let net = line(&[3.0]).unwrap();
        let r = verify_trellis_lemma(&net, 4).unwrap();
        assert_eq!(r.factor, 4);
        assert_eq!(r.checked, 1);
        assert_eq!(r.violation_count, 1);
        assert_relative_eq!(r.min_unfolded, 3.0 * r.min_original, max_relative = 1e-14);
    }

    #[test]
    fn trellis_budget() {
        let net = line(&[1.0; 9]).unwrap();
        assert!(matches!(verify_trellis_lemma(&net, 3), Err(Error::Capacity { .. })));
    }

    #[test]
    fn dp_min_matches_enumeration() {
        let net = diamond(3.0).unwrap();
        for k in 2..=5 {
            let r = verify_trellis_lemma(&net, k).unwrap();
            assert_relative_eq!(unfolded_min_cut(&net, k).unwrap(), r.min_unfolded, max_relative = 1e-12);
        }
    }

    #[test]
    fn unfolded_rate_never_beats_general_rate() {
        use crate::cutset::qmf_achievable_general;
        let net = diamond(f64::powi(2.0, 8)).unwrap();
        let g = qmf_achievable_general(&net).unwrap();
        for k in 2..=6 {
            let unf = qmf_achievable_unfolded(&net, k).unwrap();
            assert!(g >= unf / k as f64 - 1e-9);
        }
    }

    #[test]
    fn tilde_examples() {
        let net = diamond(2.0).unwrap();
        let d = set(0b1000);
        let same = SubsetSequence::new(&net, vec![d, d]).unwrap();
        assert_eq!(tilde_sets(&same, 1).unwrap(), d);
        assert_eq!(tilde_sets(&same, 2).unwrap(), d);
        let seq = SubsetSequence::new(&net, vec![set(0b1010), set(0b1100)]).unwrap();
        assert_eq!(tilde_sets(&seq, 1).unwrap(), set(0b1110));
        assert_eq!(tilde_sets(&seq, 2).unwrap(), d);
        assert!(matches!(tilde_sets(&seq, 3), Err(Error::Index { index: 3, max: 2 })));
        assert!(matches!(tilde_sets(&seq, 0), Err(Error::Index { .. })));
        assert!(SubsetSequence::new(&net, vec![d]).is_err());
        assert!(SubsetSequence::new(&net, vec![d, set(0b0010)]).is_err());
        assert!(SubsetSequence::new(&net, vec![d, set(0b1001)]).is_err());
    }

    #[test]
    fn loop_lemma_examples() {
        let net = diamond(2.0f64).unwrap();
        let seq = SubsetSequence::new(&net, vec![set(0b1010), set(0b1010)]).unwrap();
        let r = verify_loop_lemma(&net, &seq);
        assert!(r.margin.abs() <= 1e-12 * r.lhs.abs().max(1.0));
        let seq = SubsetSequence::new(&net, vec![set(0b1010), set(0b1100)]).unwrap();
        assert!(verify_loop_lemma(&net, &seq).margin >= 0.0);
    }

    #[test]
    fn loop_lemma_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..300 {
            let field = if rng.gen_bool(0.5) { Field::Real } else { Field::Complex };
            let net = random_network(&mut rng, &RandomNetworkSpec { field, ..Default::default() });
            let relays: NodeSet = net.relays().into_iter().collect();
            let l = rng.gen_range(2..=4);
            let sets = (0..l).map(|_| random_subset(&mut rng, relays, 0.5).with(net.destination())).collect();
            let seq = SubsetSequence::new(&net, sets).unwrap();
            let r = verify_loop_lemma(&net, &seq);
            assert!(r.margin >= -1e-9 * r.lhs.abs().max(1.0), "margin {}", r.margin);
            for v in net.nodes() {
                let a = seq.sets().iter().filter(|s| s.contains(v)).count();
                let b = (1..=l).filter(|&k| tilde_sets(&seq, k).unwrap().contains(v)).count();
                assert_eq!(a, b);
            }
        }
    }
}

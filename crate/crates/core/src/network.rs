//! Relay network representation: nodes, complex channel gains, cuts and
//! layering.
//!
//! Every node transmits with unit average power and sees unit-variance
//! additive Gaussian noise. Those normalizations are a convention of the
//! model; gains are stored exactly as given.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::GainMatrix;
use crate::scalar::{Cplx, Real};

/// Largest number of nodes a network may have (node sets are 64-bit masks).
pub const MAX_NODES: usize = 64;

/// Default ceiling on the number of relays for exhaustive cut enumeration.
pub const DEFAULT_MAX_CUT_RELAYS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Set of nodes stored as a bitmask over node indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeSet(u64);

impl NodeSet {
    pub const EMPTY: NodeSet = NodeSet(0);

    pub fn from_bits(bits: u64) -> Self {
        NodeSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(node: NodeId) -> Self {
        NodeSet(1 << node.0)
    }

    /// All nodes `0..n`.
    pub fn full(n: usize) -> Self {
        if n >= 64 {
            NodeSet(u64::MAX)
        } else {
            NodeSet((1u64 << n) - 1)
        }
    }

    pub fn contains(self, node: NodeId) -> bool {
        node.0 < 64 && self.0 & (1 << node.0) != 0
    }

    pub fn insert(&mut self, node: NodeId) {
        self.0 |= 1 << node.0;
    }

    pub fn remove(&mut self, node: NodeId) {
        self.0 &= !(1 << node.0);
    }

    pub fn with(mut self, node: NodeId) -> Self {
        self.insert(node);
        self
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 | other.0)
    }

    pub fn intersection(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 & other.0)
    }

    pub fn difference(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 & !other.0)
    }

    /// Complement with respect to the node universe `0..n`.
    pub fn complement(self, n: usize) -> NodeSet {
        NodeSet::full(n).difference(self)
    }

    pub fn is_subset(self, other: NodeSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Members in ascending index order.
    pub fn iter(self) -> impl Iterator<Item = NodeId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(NodeId(i))
        })
    }
}

impl FromIterator<NodeId> for NodeSet {
    fn from_iter<I: IntoIterator<Item = NodeId>>(iter: I) -> Self {
        let mut s = NodeSet::EMPTY;
        for n in iter {
            s.insert(n);
        }
        s
    }
}

/// Whether channel gains and signals are complex or real valued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Complex,
    Real,
}

impl Field {
    /// Rate scaling factor: 1 for complex channels, 1/2 for real ones.
    pub fn factor<T: Real>(self) -> T {
        match self {
            Field::Complex => T::one(),
            Field::Real => T::lit(0.5),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Field::Complex => "complex",
            Field::Real => "real",
        }
    }
}

/// Directed Gaussian relay network with a single source and destination.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayNetwork<T: Real> {
    names: Vec<String>,
    source: NodeId,
    destination: NodeId,
    field: Field,
    edges: BTreeMap<(NodeId, NodeId), Cplx<T>>,
}

impl<T: Real> RelayNetwork<T> {
    /// Builds and validates a network. Edges are `(from, to, gain)` by node
    /// index.
    pub fn new(
        names: Vec<String>,
        source: usize,
        destination: usize,
        field: Field,
        edges: impl IntoIterator<Item = (usize, usize, Cplx<T>)>,
    ) -> Result<Self> {
        let n = names.len();
        if n < 2 {
            return Err(Error::validation("nodes", "a network needs at least a source and a destination"));
        }
        if n > MAX_NODES {
            return Err(Error::validation("nodes", format!("{n} nodes exceed the limit of {MAX_NODES}")));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::validation("nodes", format!("duplicate node name `{a}`")));
            }
        }
        if source >= n {
            return Err(Error::validation("source", format!("index {source} out of range")));
        }
        if destination >= n {
            return Err(Error::validation("destination", format!("index {destination} out of range")));
        }
        if source == destination {
            return Err(Error::validation("destination", "source and destination must differ"));
        }
        let mut map = BTreeMap::new();
        for (from, to, gain) in edges {
            if from >= n || to >= n {
                return Err(Error::validation("edges", format!("edge {from}->{to} references an unknown node")));
            }
            let label = format!("{}->{}", names[from], names[to]);
            if from == to {
                return Err(Error::validation("edges", format!("self-loop {label}")));
            }
            if !gain.re.is_finite() || !gain.im.is_finite() {
                return Err(Error::validation("edges", format!("gain of {label} is not finite")));
            }
            if field == Field::Real && gain.im != T::zero() {
                return Err(Error::validation(
                    "edges",
                    format!("gain of {label} has a nonzero imaginary part in a real-field network"),
                ));
            }
            if map.insert((NodeId(from), NodeId(to)), gain).is_some() {
                return Err(Error::validation("edges", format!("duplicate edge {label}")));
            }
        }
        let net = RelayNetwork { names, source: NodeId(source), destination: NodeId(destination), field, edges: map };
        net.check_on_path()?;
        Ok(net)
    }

    fn check_on_path(&self) -> Result<()> {
        let on_path = self.on_path_nodes();
        let missing: Vec<&str> = (0..self.len())
            .filter(|&i| !on_path.contains(NodeId(i)))
            .map(|i| self.names[i].as_str())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::validation(
                "nodes",
                format!("not on any source-destination path: {}", missing.join(", ")),
            ))
        }
    }

    /// Nodes reachable from the source that can also reach the destination.
    fn on_path_nodes(&self) -> NodeSet {
        let fwd = reach(self.len(), self.source, self.edges.keys().map(|&(a, b)| (a, b)));
        let bwd = reach(self.len(), self.destination, self.edges.keys().map(|&(a, b)| (b, a)));
        fwd.intersection(bwd)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.names.len()).map(NodeId)
    }

    pub fn all_nodes(&self) -> NodeSet {
        NodeSet::full(self.len())
    }

    pub fn name(&self, node: NodeId) -> &str {
        &self.names[node.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.names.iter().position(|n| n == name).map(NodeId)
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn destination(&self) -> NodeId {
        self.destination
    }

    pub fn field(&self) -> Field {
        self.field
    }

    /// Rate scaling factor of the network's field.
    pub fn field_factor(&self) -> T {
        self.field.factor()
    }

    /// Relays (every node other than source and destination), ascending.
    pub fn relays(&self) -> Vec<NodeId> {
        self.nodes().filter(|&v| v != self.source && v != self.destination).collect()
    }

    pub fn gain(&self, from: NodeId, to: NodeId) -> Option<Cplx<T>> {
        self.edges.get(&(from, to)).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, Cplx<T>)> + '_ {
        self.edges.iter().map(|(&(a, b), &g)| (a, b, g))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Nodes with an edge into `node`.
    pub fn in_neighbors(&self, node: NodeId) -> impl Iterator<Item = (NodeId, Cplx<T>)> + '_ {
        self.edges.iter().filter(move |((_, b), _)| *b == node).map(|(&(a, _), &g)| (a, g))
    }

    /// Same network with a different field. Switching to the real field
    /// requires every gain to be real.
    pub fn with_field(&self, field: Field) -> Result<Self> {
        RelayNetwork::new(
            self.names.clone(),
            self.source.0,
            self.destination.0,
            field,
            self.edges().map(|(a, b, g)| (a.0, b.0, g)),
        )
    }

    /// Every edge reversed and source/destination swapped.
    pub fn reversed(&self) -> Self {
        RelayNetwork {
            names: self.names.clone(),
            source: self.destination,
            destination: self.source,
            field: self.field,
            edges: self.edges.iter().map(|(&(a, b), &g)| ((b, a), g)).collect(),
        }
    }

    /// Applies `f` to every gain, keeping the topology.
    pub fn map_gains(&self, mut f: impl FnMut(NodeId, NodeId, Cplx<T>) -> Cplx<T>) -> Result<Self> {
        RelayNetwork::new(
            self.names.clone(),
            self.source.0,
            self.destination.0,
            self.field,
            self.edges().map(|(a, b, g)| (a.0, b.0, f(a, b, g))).collect::<Vec<_>>(),
        )
    }

    /// Converts the gains to another scalar type.
    pub fn cast<U: Real>(&self) -> RelayNetwork<U> {
        RelayNetwork {
            names: self.names.clone(),
            source: self.source,
            destination: self.destination,
            field: self.field,
            edges: self
                .edges
                .iter()
                .map(|(&k, g)| (k, Cplx::new(U::lit(g.re.to_f64_lossy()), U::lit(g.im.to_f64_lossy()))))
                .collect(),
        }
    }

    /// Transfer matrix from the transmitters in `tx` to the receivers in
    /// `rx`. Receivers without an incoming edge from `tx` are left out of
    /// the matrix and listed in `zero_rows`.
    pub fn crossing_matrix(&self, tx: NodeSet, rx: NodeSet) -> CrossingMatrix<T> {
        let cols: Vec<NodeId> = tx.iter().collect();
        let mut rows = Vec::new();
        let mut zero_rows = Vec::new();
        for r in rx.iter() {
            if cols.iter().any(|&c| self.edges.contains_key(&(c, r))) {
                rows.push(r);
            } else {
                zero_rows.push(r);
            }
        }
        let matrix = GainMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            self.gain(cols[j], rows[i]).unwrap_or_else(|| Cplx::new(T::zero(), T::zero()))
        });
        CrossingMatrix { matrix, rows, cols, zero_rows }
    }

    /// Transfer matrix across a cut: transmitters in Ω, receivers in Ω^c.
    /// Signals sent from Ω^c are conditioned on and therefore excluded.
    pub fn cut_crossing_matrix(&self, cut: &Cut) -> CrossingMatrix<T> {
        self.crossing_matrix(cut.omega, cut.complement(self))
    }

    /// Dense `|V| x |V|` matrix with entry `(to, from) = h_{from,to}`.
    pub fn dense_gains(&self) -> GainMatrix<T> {
        let n = self.len();
        GainMatrix::from_fn(n, n, |i, j| self.gain(NodeId(j), NodeId(i)).unwrap_or_else(|| Cplx::new(T::zero(), T::zero())))
    }

    // ---- description format -------------------------------------------

    pub fn from_description(desc: &NetworkDescription) -> Result<Self> {
        let index = |name: &str, field: &str| -> Result<usize> {
            desc.nodes
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::validation(field, format!("unknown node `{name}`")))
        };
        let source = index(&desc.source, "source")?;
        let destination = index(&desc.destination, "destination")?;
        let mut edges = Vec::with_capacity(desc.edges.len());
        for (k, e) in desc.edges.iter().enumerate() {
            let from = index(&e.from, &format!("edges[{k}].from"))?;
            let to = index(&e.to, &format!("edges[{k}].to"))?;
            edges.push((from, to, Cplx::new(T::lit(e.gain[0]), T::lit(e.gain[1]))));
        }
        RelayNetwork::new(desc.nodes.clone(), source, destination, desc.field, edges)
    }

    pub fn to_description(&self) -> NetworkDescription {
        NetworkDescription {
            field: self.field,
            nodes: self.names.clone(),
            source: self.names[self.source.0].clone(),
            destination: self.names[self.destination.0].clone(),
            edges: self
                .edges()
                .map(|(a, b, g)| EdgeDescription {
                    from: self.names[a.0].clone(),
                    to: self.names[b.0].clone(),
                    gain: [g.re.to_f64_lossy(), g.im.to_f64_lossy()],
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_description()).expect("description serializes")
    }

    // ---- cuts -----------------------------------------------------------

    /// All source-destination cuts, ordered by the ascending bitmask of
    /// relay membership.
    pub fn enumerate_cuts(&self) -> Result<Vec<Cut>> {
        self.enumerate_cuts_with_limit(DEFAULT_MAX_CUT_RELAYS)
    }

    pub fn enumerate_cuts_with_limit(&self, max_relays: usize) -> Result<Vec<Cut>> {
        Ok(self.cuts(max_relays)?.collect())
    }

    /// Lazily enumerates cuts; see [`RelayNetwork::enumerate_cuts`].
    pub fn cuts(&self, max_relays: usize) -> Result<impl Iterator<Item = Cut> + '_> {
        let relays = self.relays();
        if relays.len() > max_relays {
            return Err(Error::Capacity {
                what: "cut enumeration".into(),
                required: 1u128 << relays.len(),
                limit: 1u128 << max_relays,
            });
        }
        let base = NodeSet::singleton(self.source);
        Ok((0..1u64 << relays.len()).map(move |mask| Cut { omega: relay_mask_to_set(base, &relays, mask) }))
    }

    // ---- layering -------------------------------------------------------

    /// Layer decomposition if all source-destination paths have the same
    /// length and every edge joins adjacent layers.
    pub fn layering(&self) -> Result<LayerDecomposition, NotLayered> {
        let edges: Vec<(usize, usize)> = self.edges.keys().map(|&(a, b)| (a.0, b.0)).collect();
        layer_nodes(self.len(), self.source.0, self.destination.0, &edges)
    }

    /// For each layer `l = 1..=l_D`, the pair (Ω ∩ layer `l-1`, Ω^c ∩ layer `l`).
    pub fn layer_cut_decomposition(&self, cut: &Cut) -> Result<Vec<(NodeSet, NodeSet)>> {
        let layers = self.layering()?;
        let omega = cut.omega;
        let comp = cut.complement(self);
        Ok((1..=layers.num_layers)
            .map(|l| (layers.layers[l - 1].intersection(omega), layers.layers[l].intersection(comp)))
            .collect())
    }
}

fn relay_mask_to_set(base: NodeSet, relays: &[NodeId], mask: u64) -> NodeSet {
    let mut s = base;
    for (k, &r) in relays.iter().enumerate() {
        if mask >> k & 1 == 1 {
            s.insert(r);
        }
    }
    s
}

fn reach(n: usize, start: NodeId, edges: impl Iterator<Item = (NodeId, NodeId)>) -> NodeSet {
    let mut adj = vec![Vec::new(); n];
    for (a, b) in edges {
        adj[a.0].push(b);
    }
    let mut seen = NodeSet::singleton(start);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v.0] {
            if !seen.contains(w) {
                seen.insert(w);
                queue.push_back(w);
            }
        }
    }
    seen
}

/// Network description file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDescription {
    pub field: Field,
    pub nodes: Vec<String>,
    pub source: String,
    pub destination: String,
    pub edges: Vec<EdgeDescription>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDescription {
    pub from: String,
    pub to: String,
    /// `[re, im]`
    pub gain: [f64; 2],
}

/// Parses and validates a network description.
pub fn parse_network<T: Real>(text: &str) -> Result<RelayNetwork<T>> {
    let desc: NetworkDescription = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    RelayNetwork::from_description(&desc)
}

/// A source-destination partition: Ω holds the source, Ω^c the destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cut {
    omega: NodeSet,
}

impl Cut {
    pub fn new<T: Real>(net: &RelayNetwork<T>, omega: NodeSet) -> Result<Self> {
        if !omega.is_subset(net.all_nodes()) {
            return Err(Error::validation("omega", "contains nodes outside the network"));
        }
        if !omega.contains(net.source()) {
            return Err(Error::validation("omega", "must contain the source"));
        }
        if omega.contains(net.destination()) {
            return Err(Error::validation("omega", "must not contain the destination"));
        }
        Ok(Cut { omega })
    }

    pub fn omega(&self) -> NodeSet {
        self.omega
    }

    pub fn complement<T: Real>(&self, net: &RelayNetwork<T>) -> NodeSet {
        self.omega.complement(net.len())
    }

    /// Bitmask over the relays in ascending order (the enumeration index).
    pub fn relay_mask<T: Real>(&self, net: &RelayNetwork<T>) -> u64 {
        net.relays()
            .iter()
            .enumerate()
            .filter(|(_, &r)| self.omega.contains(r))
            .fold(0, |m, (k, _)| m | 1 << k)
    }

    pub fn names<'a, T: Real>(&self, net: &'a RelayNetwork<T>) -> Vec<&'a str> {
        self.omega.iter().map(|v| net.name(v)).collect()
    }
}

/// Crossing matrix together with the node order of its rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingMatrix<T: Real> {
    pub matrix: GainMatrix<T>,
    pub rows: Vec<NodeId>,
    pub cols: Vec<NodeId>,
    /// Receivers with no incoming edge from the transmitters.
    pub zero_rows: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerDecomposition {
    /// Distance from the source, indexed by node.
    pub depth: Vec<usize>,
    /// `layers[l]` holds the nodes at distance `l`.
    pub layers: Vec<NodeSet>,
    /// Depth of the destination.
    pub num_layers: usize,
}

/// Witness that a network is not layered: two source-destination walks of
/// different lengths through the offending edge.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("network is not layered: edge {}->{} joins depths {} and {}; walks of length {} and {}",
    .edge.0, .edge.1, .depths.0, .depths.1, .shorter.len() - 1, .longer.len() - 1)]
pub struct NotLayered {
    pub edge: (NodeId, NodeId),
    pub depths: (usize, usize),
    pub shorter: Vec<NodeId>,
    pub longer: Vec<NodeId>,
}

/// Breadth-first layering of a graph on `0..n`. All nodes are assumed to lie
/// on a source-destination path.
pub(crate) fn layer_nodes(
    n: usize,
    source: usize,
    destination: usize,
    edges: &[(usize, usize)],
) -> Result<LayerDecomposition, NotLayered> {
    let mut out = vec![Vec::new(); n];
    let mut inc = vec![Vec::new(); n];
    for &(a, b) in edges {
        out[a].push(b);
        inc[b].push(a);
    }
    let (depth, parent) = bfs(n, source, &out);
    let (_, towards_dest) = bfs(n, destination, &inc);
    for &(a, b) in edges {
        let (da, db) = (depth[a], depth[b]);
        if da == usize::MAX || db == usize::MAX || db == da + 1 {
            continue;
        }
        let head = |v: usize| -> Vec<NodeId> {
            let mut p = vec![NodeId(v)];
            let mut cur = v;
            while let Some(prev) = parent[cur] {
                p.push(NodeId(prev));
                cur = prev;
            }
            p.reverse();
            p
        };
        let tail = |v: usize| -> Vec<NodeId> {
            let mut p = Vec::new();
            let mut cur = v;
            while let Some(next) = towards_dest[cur] {
                p.push(NodeId(next));
                cur = next;
            }
            p
        };
        let mut shorter = head(b);
        shorter.extend(tail(b));
        let mut longer = head(a);
        longer.push(NodeId(b));
        longer.extend(tail(b));
        return Err(NotLayered { edge: (NodeId(a), NodeId(b)), depths: (da, db), shorter, longer });
    }
    let num_layers = depth[destination];
    let mut layers = vec![NodeSet::EMPTY; num_layers + 1];
    for (v, &d) in depth.iter().enumerate() {
        if d <= num_layers {
            layers[d].insert(NodeId(v));
        }
    }
    Ok(LayerDecomposition { depth, layers, num_layers })
}

fn bfs(n: usize, start: usize, adj: &[Vec<usize>]) -> (Vec<usize>, Vec<Option<usize>>) {
    let mut depth = vec![usize::MAX; n];
    let mut parent = vec![None; n];
    depth[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if depth[w] == usize::MAX {
                depth[w] = depth[v] + 1;
                parent[w] = Some(v);
                queue.push_back(w);
            }
        }
    }
    (depth, parent)
}

//! Temporal graphs: `T` undirected snapshots over a shared node set.

mod io;

pub use io::{
    ingest_contact_stream, load_labels, load_temporal_edgelist, parse_labels,
    parse_temporal_edgelist, save_labels, save_temporal_edgelist, write_labels,
    write_temporal_edgelist,
};

use crate::error::{Error, Result};

/// One undirected, unweighted snapshot without self-loops.
///
/// Edges are kept as sorted pairs `(i, j)` with `i < j`, alongside a CSR
/// adjacency whose neighbor lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Snapshot {
    /// Builds a snapshot on `n` nodes. Self-loops are dropped, pairs are
    /// reordered and duplicates collapsed.
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut edges = Vec::new();
        for (i, j) in pairs {
            if i >= n || j >= n {
                return Err(Error::Bounds(format!("edge ({i}, {j}) with n = {n}")));
            }
            if i != j {
                edges.push((i.min(j), i.max(j)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self::from_sorted_edges(n, edges))
    }

    /// `edges` must be sorted, deduplicated, with `i < j < n`.
    pub(crate) fn from_sorted_edges(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut deg = vec![0usize; n];
        for &(i, j) in &edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &deg {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; 2 * edges.len()];
        // Visiting edges in sorted order fills each list in increasing order
        // for the `j` side; the `i` side needs a sort afterwards.
        for &(i, j) in &edges {
            neighbors[fill[i]] = j;
            fill[i] += 1;
            neighbors[fill[j]] = i;
            fill[j] += 1;
        }
        for v in 0..n {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Self {
            edges,
            offsets,
            neighbors,
        }
    }

    pub fn empty(n: usize) -> Self {
        Self::from_sorted_edges(n, Vec::new())
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n() && j < self.n() && self.neighbors(i).binary_search(&j).is_ok()
    }

    /// Fraction of nodes in the largest connected component.
    pub fn largest_component_fraction(&self) -> f64 {
        let n = self.n();
        if n == 0 {
            return 0.0;
        }
        let mut comp = vec![usize::MAX; n];
        let mut stack = Vec::new();
        let mut best = 0;
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = s;
            stack.push(s);
            let mut size = 0;
            while let Some(u) = stack.pop() {
                size += 1;
                for &v in self.neighbors(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = s;
                        stack.push(v);
                    }
                }
            }
            best = best.max(size);
        }
        best as f64 / n as f64
    }
}

/// A dynamical graph: `T >= 1` snapshots on `n` shared nodes.
///
/// Nodes absent at some time are simply isolated in that snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalGraph {
    n: usize,
    snapshots: Vec<Snapshot>,
}

impl TemporalGraph {
    pub fn new(n: usize, snapshots: Vec<Snapshot>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::Config("a temporal graph needs T >= 1".into()));
        }
        if let Some(s) = snapshots.iter().find(|s| s.n() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s.n(),
            });
        }
        Ok(Self { n, snapshots })
    }

    /// Builds from per-snapshot edge lists, normalizing each as in
    /// [`Snapshot::from_pairs`].
    pub fn from_edges(n: usize, per_time: Vec<Vec<(usize, usize)>>) -> Result<Self> {
        let snaps = per_time
            .into_iter()
            .map(|e| Snapshot::from_pairs(n, e))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, snaps)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of snapshots `T`.
    pub fn num_snapshots(&self) -> usize {
        self.snapshots.len()
    }

    pub fn snapshot(&self, t: usize) -> &Snapshot {
        &self.snapshots[t]
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    /// Total number of spatial edges over all snapshots.
    pub fn num_spatial_edges(&self) -> usize {
        self.snapshots.iter().map(Snapshot::num_edges).sum()
    }

    pub fn degree_sequence(&self) -> DegreeTable {
        let (n, t_count) = (self.n, self.num_snapshots());
        let mut data = Vec::with_capacity(n * t_count);
        for s in &self.snapshots {
            data.extend((0..n).map(|i| s.degree(i)));
        }
        DegreeTable { n, t_count, data }
    }

    /// Keeps only snapshots `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        Self::new(self.n, self.snapshots[range].to_vec())
    }

    pub fn supra_view(&self) -> SupraGraphView<'_> {
        SupraGraphView { graph: self }
    }
}

/// Degrees `d_i^(t)`, stored time-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeTable {
    n: usize,
    t_count: usize,
    data: Vec<usize>,
}

impl DegreeTable {
    pub fn get(&self, i: usize, t: usize) -> usize {
        self.data[t * self.n + i]
    }

    /// Degrees of all nodes at time `t`.
    pub fn column(&self, t: usize) -> &[usize] {
        &self.data[t * self.n..(t + 1) * self.n]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_snapshots(&self) -> usize {
        self.t_count
    }

    /// All degrees in supra-node order `t * n + i`.
    pub fn as_slice(&self) -> &[usize] {
        &self.data
    }
}

/// Kind of an edge of the supra-graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Spatial,
    Temporal,
}

/// The union graph over all `(node, time)` copies: spatial edges inside each
/// snapshot plus temporal edges joining `i` at `t` with `i` at `t + 1`.
///
/// Supra-node `i` at time `t` has index `t * n + i`.
#[derive(Debug, Clone, Copy)]
pub struct SupraGraphView<'a> {
    graph: &'a TemporalGraph,
}

impl<'a> SupraGraphView<'a> {
    pub fn num_nodes(&self) -> usize {
        self.graph.n * self.graph.num_snapshots()
    }

    pub fn spatial_edge_count(&self) -> usize {
        self.graph.num_spatial_edges()
    }

    pub fn temporal_edge_count(&self) -> usize {
        self.graph.n * (self.graph.num_snapshots() - 1)
    }

    /// Neighbors of supra-node `u` with the kind of the joining edge, in
    /// increasing index order.
    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = (usize, EdgeKind)> + 'a {
        let n = self.graph.n;
        let t_count = self.graph.num_snapshots();
        let (t, i) = (u / n, u % n);
        let back = (t > 0).then(|| (u - n, EdgeKind::Temporal));
        let fwd = (t + 1 < t_count).then(|| (u + n, EdgeKind::Temporal));
        let spatial = self
            .graph
            .snapshot(t)
            .neighbors(i)
            .iter()
            .map(move |&j| (t * n + j, EdgeKind::Spatial));
        back.into_iter().chain(spatial).chain(fwd)
    }

    /// Every undirected supra-edge once, as `(u, v, kind)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, EdgeKind)> + 'a {
        let n = self.graph.n;
        let t_count = self.graph.num_snapshots();
        let spatial = self
            .graph
            .snapshots
            .iter()
            .enumerate()
            .flat_map(move |(t, s)| {
                s.edges()
                    .iter()
                    .map(move |&(i, j)| (t * n + i, t * n + j, EdgeKind::Spatial))
            });
        let temporal = (0..n * t_count.saturating_sub(1)).map(move |u| (u, u + n, EdgeKind::Temporal));
        spatial.chain(temporal)
    }
}

/// Class labels for every `(node, time)`, stored time-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    n: usize,
    t_count: usize,
    k: usize,
    data: Vec<usize>,
}

impl LabelMatrix {
    /// `data[t * n + i]` is the label of node `i` at time `t`.
    pub fn new(n: usize, t_count: usize, k: usize, data: Vec<usize>) -> Result<Self> {
        if data.len() != n * t_count {
            return Err(Error::DimensionMismatch {
                expected: n * t_count,
                got: data.len(),
            });
        }
        if let Some(&bad) = data.iter().find(|&&l| l >= k) {
            return Err(Error::Bounds(format!("label {bad} with k = {k}")));
        }
        Ok(Self { n, t_count, k, data })
    }

    /// Same label matrix for every time from a single column.
    pub fn repeated(column: &[usize], t_count: usize, k: usize) -> Result<Self> {
        let data = column.repeat(t_count);
        Self::new(column.len(), t_count, k, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_snapshots(&self) -> usize {
        self.t_count
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, t: usize) -> usize {
        self.data[t * self.n + i]
    }

    pub fn column(&self, t: usize) -> &[usize] {
        &self.data[t * self.n..(t + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.data
    }

    pub fn matches(&self, g: &TemporalGraph) -> bool {
        self.n == g.n() && self.t_count == g.num_snapshots()
    }
}

//! Directed graphs for the oscillator network.
//!
//! Edges are stored sorted by `(src, dst)` in compressed adjacency form, so an
//! edge id doubles as the lexicographic rank of its endpoint pair. The
//! simulator relies on that when ordering simultaneous pulse arrivals.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("self-loop on node {node}")]
    SelfLoop { node: usize },
    #[error("duplicate edge {src} -> {dst}")]
    DuplicateEdge { src: usize, dst: usize },
    #[error("node id {node} out of range for n = {n}")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("edge {src} -> {dst} has non-positive weight {weight}")]
    InvalidWeight { src: usize, dst: usize, weight: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(src: usize, dst: usize) -> Self {
        Edge { src, dst, weight: 1.0 }
    }

    pub fn weighted(src: usize, dst: usize, weight: f64) -> Self {
        Edge { src, dst, weight }
    }
}

/// Immutable directed graph with successor and predecessor adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    succ_offsets: Vec<usize>,
    pred_offsets: Vec<usize>,
    preds: Vec<usize>,
    positions: Option<Vec<Vec<f64>>>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicate pairs, out-of-range
    /// ids and non-positive weights. Edge order in the input is irrelevant.
    pub fn from_edges(n: usize, mut edges: Vec<Edge>) -> Result<Self, GraphError> {
        for e in &edges {
            for node in [e.src, e.dst] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { node, n });
                }
            }
            if e.src == e.dst {
                return Err(GraphError::SelfLoop { node: e.src });
            }
            if !(e.weight > 0.0) || !e.weight.is_finite() {
                return Err(GraphError::InvalidWeight {
                    src: e.src,
                    dst: e.dst,
                    weight: e.weight,
                });
            }
        }
        edges.sort_by_key(|e| (e.src, e.dst));
        if let Some(w) = edges
            .windows(2)
            .find(|w| (w[0].src, w[0].dst) == (w[1].src, w[1].dst))
        {
            return Err(GraphError::DuplicateEdge {
                src: w[0].src,
                dst: w[0].dst,
            });
        }

        let mut succ_offsets = vec![0usize; n + 1];
        let mut indeg = vec![0usize; n];
        for e in &edges {
            succ_offsets[e.src + 1] += 1;
            indeg[e.dst] += 1;
        }
        for i in 0..n {
            succ_offsets[i + 1] += succ_offsets[i];
        }
        let mut pred_offsets = vec![0usize; n + 1];
        for i in 0..n {
            pred_offsets[i + 1] = pred_offsets[i] + indeg[i];
        }
        let mut fill = pred_offsets.clone();
        let mut preds = vec![0usize; edges.len()];
        // edges are sorted by src, so each predecessor list comes out sorted
        for e in &edges {
            preds[fill[e.dst]] = e.src;
            fill[e.dst] += 1;
        }

        Ok(Graph {
            n,
            edges,
            succ_offsets,
            pred_offsets,
            preds,
            positions: None,
        })
    }

    /// Empty graph on `n` nodes.
    pub fn isolated(n: usize) -> Self {
        Graph::from_edges(n, Vec::new()).expect("edgeless graph is valid")
    }

    /// Complete digraph on `n` nodes.
    pub fn complete(n: usize) -> Self {
        let edges = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| Edge::new(i, j)))
            .collect();
        Graph::from_edges(n, edges).expect("complete graph is valid")
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// All edges, sorted by `(src, dst)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    /// Edge-id range of the out-edges of `node`.
    pub fn out_edge_ids(&self, node: usize) -> std::ops::Range<usize> {
        self.succ_offsets[node]..self.succ_offsets[node + 1]
    }

    /// Id of the edge `src -> dst`, if present.
    pub fn edge_id(&self, src: usize, dst: usize) -> Option<usize> {
        if src >= self.n {
            return None;
        }
        let range = self.out_edge_ids(src);
        let start = range.start;
        self.edges[range]
            .binary_search_by_key(&dst, |e| e.dst)
            .ok()
            .map(|i| start + i)
    }

    pub fn successors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges[self.out_edge_ids(node)].iter().map(|e| e.dst)
    }

    pub fn predecessors(&self, node: usize) -> &[usize] {
        &self.preds[self.pred_offsets[node]..self.pred_offsets[node + 1]]
    }

    pub fn indegree(&self, node: usize) -> usize {
        self.pred_offsets[node + 1] - self.pred_offsets[node]
    }

    pub fn indegrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.indegree(i)).collect()
    }

    pub fn is_weighted(&self) -> bool {
        self.edges.iter().any(|e| e.weight != 1.0)
    }

    /// Node positions when the graph came from a geometric generator.
    pub fn positions(&self) -> Option<&[Vec<f64>]> {
        self.positions.as_deref()
    }

    /// Serializes to the edge-list CSV format read by [`parse_edge_list`].
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# n={}", self.n).unwrap();
        for e in &self.edges {
            if e.weight == 1.0 {
                writeln!(out, "{},{}", e.src, e.dst).unwrap();
            } else {
                writeln!(out, "{},{},{}", e.src, e.dst, e.weight).unwrap();
            }
        }
        out
    }
}

/// Erdős–Rényi digraph: every ordered pair `(i, j)`, `i != j`, is an edge
/// independently with probability `p_hat`.
pub fn generate_er(n: usize, p_hat: f64, seed: u64) -> Result<Graph, GraphError> {
    if n == 0 {
        return Err(GraphError::InvalidSpec("n must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(GraphError::InvalidProbability(p_hat));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(p_hat) {
                edges.push(Edge::new(i, j));
            }
        }
    }
    Graph::from_edges(n, edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RggSpec {
    pub n: usize,
    pub dim: usize,
    pub radius: f64,
    /// Add both directions for every close pair. When false, each close pair
    /// gets a single edge with a random orientation.
    pub symmetric: bool,
}

impl RggSpec {
    pub fn new(n: usize, dim: usize, radius: f64) -> Self {
        RggSpec {
            n,
            dim,
            radius,
            symmetric: true,
        }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if self.n == 0 {
            return Err(GraphError::InvalidSpec("n must be at least 1".into()));
        }
        if self.dim == 0 {
            return Err(GraphError::InvalidSpec("dim must be at least 1".into()));
        }
        // radii past the torus diameter sqrt(dim)/2 just give a complete graph
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(GraphError::InvalidSpec(format!("radius {} must be > 0", self.radius)));
        }
        Ok(())
    }
}

/// Distance on the unit torus: per-axis `min(|d|, 1 - |d|)`, Euclidean norm.
pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).abs().rem_euclid(1.0);
            let d = d.min(1.0 - d);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Random geometric graph on the unit torus of dimension `spec.dim`.
pub fn generate_rgg(spec: &RggSpec, seed: u64) -> Result<Graph, GraphError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<Vec<f64>> = (0..spec.n)
        .map(|_| (0..spec.dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut edges = Vec::new();
    for i in 0..spec.n {
        for j in (i + 1)..spec.n {
            if torus_distance(&positions[i], &positions[j]) <= spec.radius {
                if spec.symmetric {
                    edges.push(Edge::new(i, j));
                    edges.push(Edge::new(j, i));
                } else if rng.random_bool(0.5) {
                    edges.push(Edge::new(i, j));
                } else {
                    edges.push(Edge::new(j, i));
                }
            }
        }
    }
    let mut g = Graph::from_edges(spec.n, edges)?;
    g.positions = Some(positions);
    Ok(g)
}

/// Reproducibility sidecar for a sampled geometric graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RggMetadata {
    pub n: usize,
    pub dim: usize,
    pub r: f64,
    pub seed: u64,
    pub positions: Vec<Vec<f64>>,
}

impl RggMetadata {
    pub fn new(spec: &RggSpec, seed: u64, g: &Graph) -> Option<Self> {
        Some(RggMetadata {
            n: spec.n,
            dim: spec.dim,
            r: spec.radius,
            seed,
            positions: g.positions()?.to_vec(),
        })
    }
}

/// Parses `src,dst[,weight]` rows with an optional leading `# n=<count>`.
pub fn parse_edge_list(text: &str) -> Result<Graph, GraphError> {
    let mut declared_n = None;
    let mut edges = Vec::new();
    let mut seen_content = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if !seen_content {
                if let Some(v) = comment.trim().strip_prefix("n=") {
                    let n = v.trim().parse::<usize>().map_err(|_| GraphError::Parse {
                        line: line_no,
                        msg: format!("bad node count {v:?}"),
                    })?;
                    declared_n = Some(n);
                }
            }
            seen_content = true;
            continue;
        }
        seen_content = true;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(GraphError::Parse {
                line: line_no,
                msg: format!("expected src,dst[,weight], got {line:?}"),
            });
        }
        let id = |s: &str| {
            s.parse::<usize>().map_err(|_| GraphError::Parse {
                line: line_no,
                msg: format!("bad node id {s:?}"),
            })
        };
        let src = id(fields[0])?;
        let dst = id(fields[1])?;
        let weight = match fields.get(2) {
            Some(w) => w.parse::<f64>().map_err(|_| GraphError::Parse {
                line: line_no,
                msg: format!("bad weight {w:?}"),
            })?,
            None => 1.0,
        };
        if src == dst {
            return Err(GraphError::Parse {
                line: line_no,
                msg: format!("self-loop on node {src}"),
            });
        }
        edges.push(Edge::weighted(src, dst, weight));
    }
    let inferred = edges.iter().map(|e| e.src.max(e.dst) + 1).max().unwrap_or(0);
    let n = match declared_n {
        Some(n) if n < inferred => {
            return Err(GraphError::NodeOutOfRange {
                node: inferred - 1,
                n,
            })
        }
        Some(n) => n,
        None => inferred,
    };
    if n == 0 {
        return Err(GraphError::Parse {
            line: 0,
            msg: "edge list declares no nodes".into(),
        });
    }
    Graph::from_edges(n, edges)
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph, GraphError> {
    let text = std::fs::read_to_string(path)?;
    parse_edge_list(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StructureReport {
    pub strongly_connected: bool,
    pub aperiodic: bool,
    /// gcd of all directed cycle lengths; `None` for acyclic graphs.
    pub period: Option<u64>,
    pub scc_count: usize,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Strong connectivity via SCC decomposition and the cycle-length gcd via
/// BFS level differences inside each strongly connected component.
pub fn validate_structure(g: &Graph) -> StructureReport {
    let n = g.node_count();
    let mut pg: DiGraph<(), ()> = DiGraph::with_capacity(n, g.edge_count());
    for _ in 0..n {
        pg.add_node(());
    }
    for e in g.edges() {
        pg.add_edge(NodeIndex::new(e.src), NodeIndex::new(e.dst), ());
    }
    let sccs = tarjan_scc(&pg);

    let mut component = vec![usize::MAX; n];
    for (c, members) in sccs.iter().enumerate() {
        for v in members {
            component[v.index()] = c;
        }
    }

    let mut period = 0u64;
    let mut level = vec![u64::MAX; n];
    for members in &sccs {
        let root = members[0].index();
        let c = component[root];
        level[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for v in g.successors(u) {
                if component[v] != c {
                    continue;
                }
                if level[v] == u64::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for u in members.iter().map(|v| v.index()) {
            for v in g.successors(u) {
                if component[v] == c {
                    let diff = (level[u] + 1).abs_diff(level[v]);
                    period = gcd(period, diff);
                }
            }
        }
    }
    // diff is zero only along BFS tree edges; a component with a cycle always
    // contributes a nonzero difference
    let has_cycle = sccs.iter().any(|m| m.len() > 1);
    let period = has_cycle.then_some(period);

    StructureReport {
        strongly_connected: n > 0 && sccs.len() == 1,
        aperiodic: period == Some(1),
        period,
        scc_count: sccs.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize) -> Vec<Edge> {
        (0..n).map(|i| Edge::new(i, (i + 1) % n)).collect()
    }

    #[test]
    fn er_extremes() {
        let g = generate_er(3, 1.0, 11).unwrap();
        assert_eq!(g.edge_count(), 6);
        assert_eq!(generate_er(100, 0.0, 11).unwrap().edge_count(), 0);
        assert!(matches!(
            generate_er(5, 1.5, 0),
            Err(GraphError::InvalidProbability(_))
        ));
    }

    #[test]
    fn er_edge_count_near_binomial_mean() {
        let g = generate_er(1000, 0.01, 7).unwrap();
        // 1000 * 999 ordered pairs
        let mean = 999_000.0 * 0.01;
        let sigma = (999_000.0f64 * 0.01 * 0.99).sqrt();
        assert!((g.edge_count() as f64 - mean).abs() <= 5.0 * sigma);
    }

    #[test]
    fn er_is_seed_deterministic() {
        assert_eq!(generate_er(50, 0.2, 3).unwrap(), generate_er(50, 0.2, 3).unwrap());
    }

    #[test]
    fn rgg_small_cases_are_complete() {
        let g = generate_rgg(&RggSpec::new(2, 2, 0.71), 5).unwrap();
        assert_eq!(g.edge_count(), 2);
        let g = generate_rgg(&RggSpec::new(50, 1, 0.5), 5).unwrap();
        assert_eq!(g.edge_count(), 50 * 49);
    }

    #[test]
    fn rgg_mean_degree() {
        let g = generate_rgg(&RggSpec::new(400, 2, 0.178), 1).unwrap();
        let mean = g.edge_count() as f64 / 400.0;
        let expected = 400.0 * std::f64::consts::PI * 0.178 * 0.178;
        // per-node degree is Binomial(399, pi r^2); the mean over 400 nodes has
        // sigma about sqrt(expected / 400) * sqrt(2) allowing for pair sharing
        let sigma = (expected / 400.0).sqrt() * 2f64.sqrt();
        assert!((mean - expected).abs() <= 5.0 * sigma, "{mean} vs {expected}");
    }

    #[test]
    fn rgg_rejects_bad_spec() {
        assert!(generate_rgg(&RggSpec::new(10, 2, 0.0), 0).is_err());
        assert!(generate_rgg(&RggSpec::new(10, 0, 0.1), 0).is_err());
        assert!(generate_rgg(&RggSpec::new(10, 1, f64::NAN), 0).is_err());
    }

    #[test]
    fn rgg_is_symmetric_and_retains_positions() {
        let g = generate_rgg(&RggSpec::new(60, 2, 0.2), 9).unwrap();
        for e in g.edges() {
            assert!(g.successors(e.dst).any(|x| x == e.src));
        }
        let meta = RggMetadata::new(&RggSpec::new(60, 2, 0.2), 9, &g).unwrap();
        assert_eq!(meta.positions.len(), 60);
        let json = serde_json::to_string(&meta).unwrap();
        assert!(json.starts_with("{\"n\":60,\"dim\":2,\"r\":0.2,\"seed\":9,\"positions\":[["));
    }

    #[test]
    fn rgg_one_directional_variant() {
        let mut spec = RggSpec::new(60, 2, 0.2);
        let sym = generate_rgg(&spec, 9).unwrap();
        spec.symmetric = false;
        let asym = generate_rgg(&spec, 9).unwrap();
        assert_eq!(asym.edge_count() * 2, sym.edge_count());
    }

    #[test]
    fn torus_distance_wraps() {
        assert!((torus_distance(&[0.95], &[0.05]) - 0.1).abs() < 1e-12);
        let d = torus_distance(&[0.0, 0.0], &[0.5, 0.5]);
        assert!((d - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn parse_examples() {
        let g = parse_edge_list("0,1\n1,0").unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (2, 2));
        assert!(g.edges().iter().all(|e| e.weight == 1.0));

        let g = parse_edge_list("0,1,0.5\n1,2\n2,0").unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (3, 3));
        assert_eq!(g.edges()[0].weight, 0.5);
        assert!(g.is_weighted());

        let err = parse_edge_list("0,0").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        assert!(err.to_string().contains("self-loop"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_edge_list("0,1\n1,x\n").unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 2, .. }));
        let err = parse_edge_list("0,1\n0,1\n").unwrap_err();
        assert!(matches!(err, GraphError::DuplicateEdge { src: 0, dst: 1 }));
        let err = parse_edge_list("0,1,-2\n").unwrap_err();
        assert!(matches!(err, GraphError::InvalidWeight { .. }));
    }

    #[test]
    fn header_declares_isolated_nodes() {
        let g = parse_edge_list("# n=5\n0,1\n").unwrap();
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.indegree(4), 0);
        assert!(parse_edge_list("# n=1\n0,1\n").is_err());
    }

    #[test]
    fn degrees_match_predecessors() {
        let g = generate_er(40, 0.15, 2).unwrap();
        let total: usize = g.indegrees().iter().sum();
        assert_eq!(total, g.edge_count());
        for i in 0..40 {
            assert_eq!(g.indegree(i), g.predecessors(i).len());
            for &p in g.predecessors(i) {
                assert!(g.successors(p).any(|x| x == i));
            }
        }
    }

    #[test]
    fn structure_examples() {
        let g = Graph::from_edges(3, cycle(3)).unwrap();
        let r = validate_structure(&g);
        assert!(r.strongly_connected);
        assert!(!r.aperiodic);
        assert_eq!(r.period, Some(3));

        let mut e = cycle(3);
        e.push(Edge::new(1, 0));
        let r = validate_structure(&Graph::from_edges(3, e).unwrap());
        assert!(r.strongly_connected && r.aperiodic);

        let r = validate_structure(&Graph::isolated(2));
        assert!(!r.strongly_connected);
        assert_eq!(r.period, None);

        let r = validate_structure(&Graph::complete(2));
        assert_eq!(r.period, Some(2));
    }
}

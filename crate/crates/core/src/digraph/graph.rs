use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Directed communication topology. An edge `from -> to` means agent `from`
/// can send to agent `to`. Every node is its own in- and out-neighbor; those
/// self-loops are implicit and never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    out: Vec<BTreeSet<usize>>,
}

impl Digraph {
    /// Builds a digraph from `(from, to)` pairs. Explicit self-loops and
    /// repeated edges are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut out = vec![BTreeSet::new(); n];
        for (from, to) in edges {
            if from >= n || to >= n {
                return Err(Error::NodeOutOfRange { from, to, n });
            }
            if from == to {
                return Err(Error::ExplicitSelfLoop(from));
            }
            if !out[from].insert(to) {
                return Err(Error::DuplicateEdge { from, to });
            }
        }
        Ok(Self { n, out })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of stored (non-self-loop) edges.
    pub fn edge_count(&self) -> usize {
        self.out.iter().map(BTreeSet::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(from, tos)| tos.iter().map(move |&to| (from, to)))
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        from == to || self.out.get(from).is_some_and(|s| s.contains(&to))
    }

    /// Out-neighborhood of `j`, including `j` itself.
    pub fn out_neighbors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(j).chain(self.out[j].iter().copied())
    }

    /// |N_out(j)|, self included.
    pub fn out_degree(&self, j: usize) -> usize {
        self.out[j].len() + 1
    }

    /// In-neighborhood of `i`, including `i` itself.
    pub fn in_neighbors(&self, i: usize) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.n).filter(|&j| self.has_edge(j, i)).collect();
        v.sort_unstable();
        v
    }

    pub fn is_strongly_connected(&self) -> bool {
        is_strongly_connected(self)
    }

    /// True when every edge of `self` is also an edge of `other`.
    pub fn is_subgraph_of(&self, other: &Digraph) -> bool {
        self.n == other.n && self.edges().all(|(f, t)| other.has_edge(f, t))
    }

    /// Directed ring `0 -> 1 -> ... -> n-1 -> 0`.
    pub fn cycle(n: usize) -> Result<Self> {
        if n == 1 {
            return Self::new(1, []);
        }
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    /// Every ordered pair connected.
    pub fn complete(n: usize) -> Result<Self> {
        Self::new(
            n,
            (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))),
        )
    }

    /// Random strongly-connected digraph: a random Hamiltonian cycle plus
    /// `extra_edges` further edges drawn uniformly from the remaining pairs.
    pub fn random_strongly_connected(n: usize, extra_edges: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_cycle(n, &mut rng)?;
        let mut pool = base.non_edges();
        pool.shuffle(&mut rng);
        pool.truncate(extra_edges);
        base.with_edges(pool)
    }

    /// Nested chain `G_0 ⊂ G_1 ⊂ ...` where `G_i` has `edge_counts[i]` edges.
    /// The first graph is a random Hamiltonian cycle padded with random edges;
    /// each later graph adds edges to its predecessor. Counts must be
    /// nondecreasing, at least `n` and at most `n(n-1)`.
    pub fn nested_chain(n: usize, edge_counts: &[usize], seed: u64) -> Result<Vec<Self>> {
        if n < 2 {
            return Err(Error::InvalidParameter("nested chain needs n >= 2".into()));
        }
        let max = n * (n - 1);
        if edge_counts.windows(2).any(|w| w[0] > w[1])
            || edge_counts.iter().any(|&c| c < n || c > max)
        {
            return Err(Error::InvalidParameter(format!(
                "edge counts must be nondecreasing within [{n}, {max}]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_cycle(n, &mut rng)?;
        let mut pool = base.non_edges();
        pool.shuffle(&mut rng);
        let mut chain = Vec::with_capacity(edge_counts.len());
        for &count in edge_counts {
            let take = count - n;
            chain.push(base.with_edges(pool[..take].iter().copied())?);
        }
        Ok(chain)
    }

    /// Ten-node strongly-connected topology standing in for the reference
    /// network used in the experiments.
    pub fn fig1() -> Self {
        Self::new(10, FIG1_EDGES.iter().copied()).expect("fig1 edge list is valid")
    }

    /// Returns a copy with the given edges added; edges already present are skipped.
    pub fn with_edges(&self, extra: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = self.clone();
        for (from, to) in extra {
            if from >= self.n || to >= self.n {
                return Err(Error::NodeOutOfRange { from, to, n: self.n });
            }
            if from != to {
                g.out[from].insert(to);
            }
        }
        Ok(g)
    }

    fn non_edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| (0..self.n).map(move |j| (i, j)))
            .filter(|&(i, j)| !self.has_edge(i, j))
            .collect()
    }

    /// Parses the plain-text graph format: first non-comment line is `n`,
    /// every following line is `from to`. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut n = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |reason: &str| Error::GraphParse {
                line: line_no,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match n {
                None => {
                    if fields.len() != 1 {
                        return Err(bad("expected node count"));
                    }
                    n = Some(fields[0].parse::<usize>().map_err(|_| bad("bad node count"))?);
                }
                Some(n) => {
                    if fields.len() != 2 {
                        return Err(bad("expected `from to`"));
                    }
                    let from: usize = fields[0].parse().map_err(|_| bad("bad source node"))?;
                    let to: usize = fields[1].parse().map_err(|_| bad("bad target node"))?;
                    if from >= n || to >= n {
                        return Err(bad(&format!("edge {from}->{to} references a node outside 0..{n}")));
                    }
                    edges.push((from, to));
                }
            }
        }
        let n = n.ok_or(Error::GraphParse {
            line: 0,
            reason: "missing node count".into(),
        })?;
        Self::new(n, edges)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for (from, to) in self.edges() {
            let _ = writeln!(s, "{from} {to}");
        }
        s
    }
}

fn random_cycle(n: usize, rng: &mut impl Rng) -> Result<Digraph> {
    if n == 1 {
        return Digraph::new(1, []);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    Digraph::new(n, (0..n).map(|i| (order[i], order[(i + 1) % n])))
}

/// Two breadth-first searches from node 0, one along edges and one against them.
pub fn is_strongly_connected(g: &Digraph) -> bool {
    let n = g.node_count();
    let mut reverse = vec![Vec::new(); n];
    for (from, to) in g.edges() {
        reverse[to].push(from);
    }
    let forward = |v: usize| g.out[v].iter().copied().collect::<Vec<_>>();
    let backward = |v: usize| reverse[v].clone();
    reaches_all(n, forward) && reaches_all(n, backward)
}

fn reaches_all(n: usize, next: impl Fn(usize) -> Vec<usize>) -> bool {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for u in next(v) {
            if !seen[u] {
                seen[u] = true;
                count += 1;
                queue.push_back(u);
            }
        }
    }
    count == n
}

// 10 nodes, 19 directed edges. With uniform weights this gives
// tau ≈ 1.25, eps ≈ 1.10, y ≈ 1.95, y_- ≈ 2.19.
const FIG1_EDGES: &[(usize, usize)] = &[
    (0, 2),
    (0, 3),
    (0, 5),
    (1, 3),
    (1, 7),
    (1, 8),
    (2, 8),
    (3, 0),
    (3, 5),
    (3, 9),
    (4, 3),
    (5, 1),
    (5, 3),
    (5, 4),
    (6, 1),
    (6, 5),
    (7, 0),
    (8, 5),
    (9, 6),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_cycle_is_strongly_connected() {
        let g = Digraph::new(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        assert!(g.is_strongly_connected());
    }

    #[test]
    fn one_way_edge_is_not() {
        let g = Digraph::new(2, [(0, 1)]).unwrap();
        assert!(!g.is_strongly_connected());
    }

    #[test]
    fn single_node_is_strongly_connected() {
        assert!(Digraph::new(1, []).unwrap().is_strongly_connected());
    }

    #[test]
    fn fig1_is_strongly_connected() {
        assert!(Digraph::fig1().is_strongly_connected());
    }

    #[test]
    fn rejects_self_loops_and_duplicates() {
        assert_eq!(
            Digraph::new(2, [(1, 1)]).unwrap_err(),
            Error::ExplicitSelfLoop(1)
        );
        assert_eq!(
            Digraph::new(2, [(0, 1), (0, 1)]).unwrap_err(),
            Error::DuplicateEdge { from: 0, to: 1 }
        );
        assert!(matches!(
            Digraph::new(2, [(0, 2)]),
            Err(Error::NodeOutOfRange { .. })
        ));
        assert_eq!(Digraph::new(0, []).unwrap_err(), Error::EmptyGraph);
    }

    #[test]
    fn neighborhoods_include_self() {
        let g = Digraph::new(3, [(0, 1), (0, 2)]).unwrap();
        assert_eq!(g.out_neighbors(0).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(g.out_degree(0), 3);
        assert_eq!(g.out_degree(1), 1);
        assert_eq!(g.in_neighbors(2), vec![0, 2]);
    }

    #[test]
    fn parse_round_trips() {
        let text = "# header\n4\n0 1 # first\n1 2\n2 3\n3 0\n\n1 3\n";
        let g = Digraph::parse(text).unwrap();
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.edge_count(), 5);
        assert_eq!(Digraph::parse(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let err = Digraph::parse("3\n0 1\n0 x\n").unwrap_err();
        assert!(matches!(err, Error::GraphParse { line: 3, .. }));
        assert!(matches!(
            Digraph::parse("# only comments\n"),
            Err(Error::GraphParse { .. })
        ));
        assert_eq!(Digraph::parse("2\n1 1\n").unwrap_err(), Error::ExplicitSelfLoop(1));
    }

    #[test]
    fn random_graphs_are_strongly_connected() {
        for seed in 0..20 {
            let g = Digraph::random_strongly_connected(8, 5, seed).unwrap();
            assert!(g.is_strongly_connected());
            assert_eq!(g.edge_count(), 13);
        }
        assert_eq!(
            Digraph::random_strongly_connected(6, 4, 3).unwrap(),
            Digraph::random_strongly_connected(6, 4, 3).unwrap()
        );
    }

    #[test]
    fn nested_chain_is_nested() {
        let chain = Digraph::nested_chain(10, &[12, 20, 90], 5).unwrap();
        assert_eq!(chain.len(), 3);
        assert!(chain[0].is_subgraph_of(&chain[1]));
        assert!(chain[1].is_subgraph_of(&chain[2]));
        assert_eq!(chain[2], Digraph::complete(10).unwrap());
        assert!(chain.iter().all(Digraph::is_strongly_connected));
        assert!(Digraph::nested_chain(10, &[20, 12], 5).is_err());
    }
}

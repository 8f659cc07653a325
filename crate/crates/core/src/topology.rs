//! Communication graph between the leader (node 0) and the followers (nodes 1..=N).
//!
//! An edge `(j, i)` means follower `i` receives the state of node `j`; the set of
//! such `j` is the neighbor set of `i`. The leader never listens to anyone, so edges
//! into node 0 are rejected.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::check::ConditionReport;

/// Smallest eigenvalue of `H` that is still accepted as positive definite.
pub const PD_TOLERANCE: f64 = 1e-9;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub weight: f64,
}

impl Edge {
    pub fn new(from: NodeId, to: NodeId, weight: f64) -> Self {
        Self { from, to, weight }
    }

    pub fn unit(from: NodeId, to: NodeId) -> Self {
        Self::new(from, to, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("graph needs at least 2 nodes (leader plus one follower), got {0}")]
    TooFewNodes(usize),
    #[error("edge ({from}, {to}) is a self-loop")]
    SelfLoop { from: NodeId, to: NodeId },
    #[error("edge ({from}, {to}) references a node outside 0..{node_count}")]
    OutOfRange {
        from: NodeId,
        to: NodeId,
        node_count: usize,
    },
    #[error("edge ({from}, {to}) has non-positive or non-finite weight {weight}")]
    BadWeight { from: NodeId, to: NodeId, weight: f64 },
    #[error("edge ({from}, {to}) appears more than once")]
    Duplicate { from: NodeId, to: NodeId },
    #[error("edge ({from}, {to}) points into the leader, which has no inputs")]
    IntoLeader { from: NodeId, to: NodeId },
}

/// Validated weighted digraph over nodes `0..node_count`, node 0 being the leader.
#[derive(Debug, Clone, PartialEq)]
pub struct Digraph {
    node_count: usize,
    edges: Vec<Edge>,
    // in_neighbors[i] = [(j, weight)] for every edge (j, i), in insertion order
    in_neighbors: Vec<Vec<(NodeId, f64)>>,
}

impl Digraph {
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self, TopologyError> {
        if node_count < 2 {
            return Err(TopologyError::TooFewNodes(node_count));
        }
        let mut in_neighbors = vec![Vec::new(); node_count];
        let mut seen = vec![vec![false; node_count]; node_count];
        let mut kept = Vec::new();
        for e in edges {
            let Edge { from, to, weight } = e;
            if from >= node_count || to >= node_count {
                return Err(TopologyError::OutOfRange { from, to, node_count });
            }
            if from == to {
                return Err(TopologyError::SelfLoop { from, to });
            }
            if to == 0 {
                return Err(TopologyError::IntoLeader { from, to });
            }
            if !(weight.is_finite() && weight > 0.0) {
                return Err(TopologyError::BadWeight { from, to, weight });
            }
            if seen[from][to] {
                return Err(TopologyError::Duplicate { from, to });
            }
            seen[from][to] = true;
            in_neighbors[to].push((from, weight));
            kept.push(e);
        }
        Ok(Self {
            node_count,
            edges: kept,
            in_neighbors,
        })
    }

    /// Leader feeds follower 1 only; followers form an undirected unit-weight path
    /// `1 - 2 - ... - N`.
    pub fn rooted_chain(followers: usize) -> Result<Self, TopologyError> {
        Self::rooted_path(followers, &[1])
    }

    /// Undirected unit-weight path `1 - 2 - ... - N` with the leader feeding every
    /// follower listed in `roots`.
    pub fn rooted_path(followers: usize, roots: &[NodeId]) -> Result<Self, TopologyError> {
        let mut edges: Vec<Edge> = roots.iter().map(|&r| Edge::unit(0, r)).collect();
        for i in 1..followers {
            edges.push(Edge::unit(i, i + 1));
            edges.push(Edge::unit(i + 1, i));
        }
        Self::new(followers + 1, edges)
    }

    /// Six-follower network used by the reference scenario: the leader feeds
    /// followers 1 and 4, and the followers form the undirected path 1 - ... - 6.
    pub fn reference_network() -> Self {
        Self::rooted_path(6, &[1, 4]).expect("reference network is valid")
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn follower_count(&self) -> usize {
        self.node_count - 1
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Weighted in-neighbors of node `i`.
    pub fn neighbors(&self, i: NodeId) -> &[(NodeId, f64)] {
        &self.in_neighbors[i]
    }

    fn weight(&self, from: NodeId, to: NodeId) -> Option<f64> {
        self.in_neighbors[to].iter().find(|(j, _)| *j == from).map(|&(_, w)| w)
    }

    /// Every follower must be reachable from the leader along directed edges, and the
    /// follower-only subgraph must be undirected with symmetric weights.
    pub fn check_leader_connectivity(&self) -> ConditionReport {
        let mut out: Vec<Vec<NodeId>> = vec![Vec::new(); self.node_count];
        for e in &self.edges {
            out[e.from].push(e.to);
        }
        let mut reached = vec![false; self.node_count];
        reached[0] = true;
        let mut queue = VecDeque::from([0]);
        while let Some(u) = queue.pop_front() {
            for &w in &out[u] {
                if !reached[w] {
                    reached[w] = true;
                    queue.push_back(w);
                }
            }
        }
        if let Some(i) = (1..self.node_count).find(|&i| !reached[i]) {
            return ConditionReport::fail(format!(
                "no spanning tree rooted at the leader: follower {i} is unreachable from node 0"
            ));
        }
        for e in self.edges.iter().filter(|e| e.from != 0) {
            match self.weight(e.to, e.from) {
                None => {
                    return ConditionReport::fail(format!(
                        "follower subgraph is not undirected: edge ({}, {}) has no reverse edge",
                        e.from, e.to
                    ))
                }
                Some(w) if w != e.weight => {
                    return ConditionReport::fail(format!(
                        "follower subgraph is not undirected: edge ({}, {}) has weight {} but its reverse has {}",
                        e.from, e.to, e.weight, w
                    ))
                }
                Some(_) => {}
            }
        }
        ConditionReport::pass()
    }

    /// Laplacian `D - A` (in-degree convention) and its follower block `H`.
    pub fn coupling_matrices(&self) -> CouplingMatrices {
        let n = self.node_count;
        let mut laplacian = DMatrix::zeros(n, n);
        for (i, nbrs) in self.in_neighbors.iter().enumerate() {
            for &(j, w) in nbrs {
                laplacian[(i, j)] -= w;
                laplacian[(i, i)] += w;
            }
        }
        let h = laplacian.view((1, 1), (n - 1, n - 1)).into_owned();
        CouplingMatrices { laplacian, h }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrices {
    pub laplacian: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

impl CouplingMatrices {
    pub fn h_asymmetry(&self) -> f64 {
        (&self.h - self.h.transpose()).amax()
    }

    /// Smallest eigenvalue of the symmetric part of `H`.
    pub fn h_min_eigenvalue(&self) -> f64 {
        let sym = (&self.h + self.h.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }

    pub fn h_is_positive_definite(&self) -> bool {
        self.h_asymmetry() <= 1e-12 && self.h_min_eigenvalue() > PD_TOLERANCE
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chain3() -> Digraph {
        Digraph::new(3, [Edge::unit(0, 1), Edge::unit(1, 2), Edge::unit(2, 1)]).unwrap()
    }

    #[test]
    fn neighbor_sets_follow_incoming_edges() {
        let g = chain3();
        let n1: Vec<_> = g.neighbors(1).iter().map(|&(j, _)| j).collect();
        let n2: Vec<_> = g.neighbors(2).iter().map(|&(j, _)| j).collect();
        assert_eq!(n1, vec![0, 2]);
        assert_eq!(n2, vec![1]);
        assert!(g.neighbors(0).is_empty());
    }

    #[test]
    fn rejects_malformed_edges() {
        assert_eq!(
            Digraph::new(3, [Edge::unit(1, 1)]),
            Err(TopologyError::SelfLoop { from: 1, to: 1 })
        );
        assert_eq!(
            Digraph::new(3, [Edge::unit(0, 7)]),
            Err(TopologyError::OutOfRange {
                from: 0,
                to: 7,
                node_count: 3
            })
        );
        assert!(matches!(
            Digraph::new(3, [Edge::new(0, 1, 0.0)]),
            Err(TopologyError::BadWeight { from: 0, to: 1, .. })
        ));
        assert!(matches!(
            Digraph::new(3, [Edge::new(0, 1, f64::NAN)]),
            Err(TopologyError::BadWeight { .. })
        ));
        assert_eq!(
            Digraph::new(3, [Edge::unit(0, 1), Edge::new(0, 1, 2.0)]),
            Err(TopologyError::Duplicate { from: 0, to: 1 })
        );
        assert_eq!(
            Digraph::new(3, [Edge::unit(1, 0)]),
            Err(TopologyError::IntoLeader { from: 1, to: 0 })
        );
        assert_eq!(Digraph::new(1, []), Err(TopologyError::TooFewNodes(1)));
    }

    #[test]
    fn connectivity_check() {
        assert!(chain3().check_leader_connectivity().satisfied);

        let orphan = Digraph::new(3, [Edge::unit(1, 2), Edge::unit(2, 1)]).unwrap();
        let r = orphan.check_leader_connectivity();
        assert!(!r.satisfied);
        assert!(r.diagnostic.unwrap().contains("unreachable"));

        let one_way = Digraph::new(3, [Edge::unit(0, 1), Edge::unit(1, 2)]).unwrap();
        let r = one_way.check_leader_connectivity();
        assert!(!r.satisfied);
        assert!(r.diagnostic.unwrap().contains("not undirected"));

        let lopsided = Digraph::new(3, [Edge::unit(0, 1), Edge::new(1, 2, 1.0), Edge::new(2, 1, 2.0)]).unwrap();
        assert!(!lopsided.check_leader_connectivity().satisfied);
    }

    #[test]
    fn chain_laplacian_and_h() {
        let cm = chain3().coupling_matrices();
        let expected = DMatrix::from_row_slice(3, 3, &[0., 0., 0., -1., 2., -1., 0., -1., 1.]);
        assert_eq!(cm.laplacian, expected);
        assert_eq!(cm.h, DMatrix::from_row_slice(2, 2, &[2., -1., -1., 1.]));

        let mut eig: Vec<f64> = cm.h.clone().symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        let s5 = 5f64.sqrt();
        assert!((eig[0] - (3.0 - s5) / 2.0).abs() < 1e-12);
        assert!((eig[1] - (3.0 + s5) / 2.0).abs() < 1e-12);
        assert!(cm.h_is_positive_definite());
    }

    #[test]
    fn edgeless_graph() {
        let g = Digraph::new(3, []).unwrap();
        let cm = g.coupling_matrices();
        assert_eq!(cm.laplacian, DMatrix::zeros(3, 3));
        assert_eq!(cm.h, DMatrix::zeros(2, 2));
        assert!(!g.check_leader_connectivity().satisfied);
        assert!(!cm.h_is_positive_definite());
    }

    #[test]
    fn reference_network_is_admissible() {
        let g = Digraph::reference_network();
        assert_eq!(g.follower_count(), 6);
        assert!(g.check_leader_connectivity().satisfied);
        assert!(g.coupling_matrices().h_is_positive_definite());
    }

    /// Random spanning tree rooted at the leader, extra symmetric follower links and
    /// extra leader links, all with random positive weights.
    pub(crate) fn admissible_graph() -> impl Strategy<Value = Digraph> {
        (2usize..12)
            .prop_flat_map(|n| {
                (
                    Just(n),
                    proptest::collection::vec((0.0f64..1.0, 0.1f64..3.0), n),
                    proptest::collection::vec((1..=n, 1..=n, 0.1f64..3.0), 0..n),
                    proptest::collection::vec((1..=n, 0.1f64..3.0), 0..3),
                )
            })
            .prop_map(|(n, parents, extra, leader_extra)| {
                let mut w = vec![vec![0.0; n + 1]; n + 1];
                for (i, &(u, wt)) in parents.iter().enumerate() {
                    let child = i + 1;
                    let parent = ((u * child as f64) as usize).min(child - 1);
                    if parent == 0 {
                        w[0][child] = wt;
                    } else {
                        w[parent][child] = wt;
                        w[child][parent] = wt;
                    }
                }
                for (a, b, wt) in extra {
                    if a != b {
                        w[a][b] = wt;
                        w[b][a] = wt;
                    }
                }
                for (b, wt) in leader_extra {
                    w[0][b] = wt;
                }
                let edges = (0..=n)
                    .flat_map(|a| (0..=n).map(move |b| (a, b)))
                    .filter(|&(a, b)| w[a][b] > 0.0)
                    .map(|(a, b)| Edge::new(a, b, w[a][b]))
                    .collect::<Vec<_>>();
                Digraph::new(n + 1, edges).unwrap()
            })
    }

    proptest! {
        #[test]
        fn admissible_graphs_have_symmetric_pd_h(g in admissible_graph()) {
            prop_assert!(g.check_leader_connectivity().satisfied);
            let cm = g.coupling_matrices();
            prop_assert!(cm.h_asymmetry() <= 1e-12);
            prop_assert!(cm.h_min_eigenvalue() > 0.0);
        }

        #[test]
        fn laplacian_rows_sum_to_zero(
            n in 2usize..10,
            raw in proptest::collection::vec((0usize..10, 1usize..10, 0.01f64..5.0), 0..30),
        ) {
            let mut seen = std::collections::HashSet::new();
            let edges: Vec<_> = raw
                .into_iter()
                .filter(|&(a, b, _)| a < n && b < n && a != b && seen.insert((a, b)))
                .map(|(a, b, w)| Edge::new(a, b, w))
                .collect();
            let g = Digraph::new(n, edges).unwrap();
            let l = g.coupling_matrices().laplacian;
            for r in 0..n {
                prop_assert!(l.row(r).sum().abs() <= 1e-12);
            }
        }
    }
}

//! Rooted tree data model with marginal and bivariate probability storage.
//!
//! Nodes carry arbitrary external integer ids; internally they are re-indexed
//! densely as `0..n`. Children are kept in a fixed order (ascending external
//! id unless an explicit ordering is supplied) because the downstream dynamic
//! programs index sub-trees by "first `s` children".

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for probability range and Fréchet checks.
pub const PROB_TOL: f64 = 1e-12;

/// Errors produced while building or validating a [`TreeModel`].
#[derive(Debug, Clone, Error, PartialEq)]
pub enum TreeError {
    #[error("duplicate node id {0}")]
    DuplicateNode(i64),
    #[error("unknown node id {0} referenced by an edge or the root")]
    UnknownNode(i64),
    #[error("duplicate edge between {0} and {1}")]
    DuplicateEdge(i64, i64),
    #[error("cycle detected: {0}")]
    CycleDetected(String),
    #[error("graph is not connected: {unreached} of {total} nodes unreachable from the root")]
    Disconnected { unreached: usize, total: usize },
    #[error("probability out of range at {what}: {value}")]
    ProbabilityOutOfRange { what: String, value: f64 },
    #[error(
        "Fréchet violation on edge ({parent},{child}): p11={p11} outside \
         [max(0, {pi}+{pj}-1), min({pi},{pj})] = [{lo}, {hi}]"
    )]
    FrechetViolation {
        parent: i64,
        child: i64,
        p11: f64,
        pi: f64,
        pj: f64,
        lo: f64,
        hi: f64,
    },
    #[error("invalid child ordering for node {node}: {detail}")]
    InvalidOrdering { node: i64, detail: String },
    #[error("empty node list")]
    Empty,
}

/// The four cell probabilities of one edge's bivariate table.
///
/// All four cells are stored explicitly so that complementing a model is a
/// pure permutation of fields rather than re-derived floating-point
/// arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeBivariate {
    /// P(c_i = 1, c_j = 1)
    pub p11: f64,
    /// P(c_i = 1, c_j = 0)
    pub p10: f64,
    /// P(c_i = 0, c_j = 1)
    pub p01: f64,
    /// P(c_i = 0, c_j = 0)
    pub p00: f64,
}

impl EdgeBivariate {
    /// Builds the table from marginals `pi`, `pj` and joint `p11`, clamping
    /// cells that are negative within [`PROB_TOL`] to zero.
    fn from_marginals(pi: f64, pj: f64, p11: f64) -> Self {
        let clamp = |v: f64| {
            if v < 0.0 {
                0.0
            } else if v > 1.0 {
                1.0
            } else {
                v
            }
        };
        EdgeBivariate {
            p11: clamp(p11),
            p10: clamp(pi - p11),
            p01: clamp(pj - p11),
            p00: clamp(1.0 - pi - pj + p11),
        }
    }

    /// Table for the complemented pair `(1 - c_i, 1 - c_j)`.
    pub fn complement(&self) -> Self {
        EdgeBivariate {
            p11: self.p00,
            p10: self.p01,
            p01: self.p10,
            p00: self.p11,
        }
    }

    /// Cell `P(c_i = yi, c_j = yj)`.
    pub fn cell(&self, yi: bool, yj: bool) -> f64 {
        match (yi, yj) {
            (true, true) => self.p11,
            (true, false) => self.p10,
            (false, true) => self.p01,
            (false, false) => self.p00,
        }
    }
}

/// One directed edge of the tree, from `parent` to `child` (internal ids).
#[derive(Debug, Clone, Copy)]
pub struct Edge {
    pub parent: usize,
    pub child: usize,
    pub table: EdgeBivariate,
}

/// Sub-tree node counts `N(i,s)` for every node `i` and `s` in `0..=d_i`,
/// where `T(i,s)` is the sub-tree rooted at `i` restricted to its first `s`
/// child sub-trees.
#[derive(Debug, Clone)]
pub struct SubtreeIndex {
    counts: Vec<Vec<usize>>,
}

impl SubtreeIndex {
    fn build(children: &[Vec<usize>], postorder: &[usize]) -> Self {
        let mut counts = vec![Vec::new(); children.len()];
        for &i in postorder {
            let mut row = Vec::with_capacity(children[i].len() + 1);
            let mut acc = 1usize;
            row.push(acc);
            for &c in &children[i] {
                acc += counts[c].last().copied().unwrap_or(1);
                row.push(acc);
            }
            counts[i] = row;
        }
        SubtreeIndex { counts }
    }

    /// `N(i,s)`: number of vertices in `T(i,s)`.
    pub fn count(&self, i: usize, s: usize) -> usize {
        self.counts[i][s]
    }

    /// Out-degree of node `i`.
    pub fn out_degree(&self, i: usize) -> usize {
        self.counts[i].len() - 1
    }

    /// Number of vertices in the full sub-tree rooted at `i`.
    pub fn subtree_size(&self, i: usize) -> usize {
        *self.counts[i].last().unwrap()
    }
}

/// A validated rooted tree with probability data, immutable after
/// construction.
#[derive(Debug, Clone)]
pub struct TreeModel {
    ext_ids: Vec<i64>,
    internal: BTreeMap<i64, usize>,
    root: usize,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    /// [P(c_i = 1), P(c_i = 0)] per node.
    p: Vec<[f64; 2]>,
    edges: Vec<Edge>,
    /// Edge index by child internal id (root slot unused).
    edge_of_child: Vec<Option<usize>>,
    subtree: SubtreeIndex,
    postorder: Vec<usize>,
}

impl TreeModel {
    pub fn n(&self) -> usize {
        self.ext_ids.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn external_id(&self, i: usize) -> i64 {
        self.ext_ids[i]
    }

    pub fn internal_of(&self, ext: i64) -> Option<usize> {
        self.internal.get(&ext).copied()
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    /// Ordered children of `i`; the `s`-th child `i(s)` is `children(i)[s-1]`.
    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.children[i].len()
    }

    /// Marginal `P(c_i = 1)`.
    pub fn p(&self, i: usize) -> f64 {
        self.p[i][0]
    }

    /// Marginal `P(c_i = y)`.
    pub fn p_value(&self, i: usize, y: bool) -> f64 {
        if y {
            self.p[i][0]
        } else {
            self.p[i][1]
        }
    }

    /// Edges in canonical order (ascending child internal id).
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// The edge whose child endpoint is `child`, if any.
    pub fn edge_to(&self, child: usize) -> Option<&Edge> {
        self.edge_of_child[child].map(|e| &self.edges[e])
    }

    /// Joint probability for the unordered pair `{i, j}`, resolving either
    /// orientation to the stored parent->child record.
    pub fn p11_between(&self, i: usize, j: usize) -> Option<f64> {
        let by_child = |c: usize, q: usize| {
            self.edge_of_child[c]
                .map(|e| &self.edges[e])
                .filter(|edge| edge.parent == q)
                .map(|edge| edge.table.p11)
        };
        by_child(i, j).or_else(|| by_child(j, i))
    }

    pub fn subtree(&self) -> &SubtreeIndex {
        &self.subtree
    }

    /// Nodes visited children-before-parent.
    pub fn postorder(&self) -> &[usize] {
        &self.postorder
    }

    /// `V(i,s)`: vertex set of `T(i,s)`, as sorted internal ids.
    pub fn vertices(&self, i: usize, s: usize) -> Vec<usize> {
        let mut out = vec![i];
        let mut stack: Vec<usize> = self.children[i][..s].to_vec();
        while let Some(v) = stack.pop() {
            out.push(v);
            stack.extend_from_slice(&self.children[v]);
        }
        out.sort_unstable();
        out
    }

    /// Model for the complemented variables `1 - c_i`: same topology,
    /// `q_i = P(c_i = 0)` and `q_ij = P(c_i = 0, c_j = 0)`.
    ///
    /// Involutive by construction: all fields are permuted, none recomputed.
    pub fn complement(&self) -> TreeModel {
        let mut out = self.clone();
        for p in &mut out.p {
            p.swap(0, 1);
        }
        for e in &mut out.edges {
            e.table = e.table.complement();
        }
        out
    }

    /// Per-edge Fréchet slack report; `ok` iff all slacks are nonnegative
    /// within [`PROB_TOL`].
    pub fn validate_marginals(&self) -> ConsistencyReport {
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut ok = true;
        for e in &self.edges {
            let pi = self.p(e.parent);
            let pj = self.p(e.child);
            let lower_slack = e.table.p11 - (pi + pj - 1.0).max(0.0);
            let upper_slack = pi.min(pj) - e.table.p11;
            if lower_slack < -PROB_TOL || upper_slack < -PROB_TOL {
                ok = false;
            }
            edges.push(EdgeSlack {
                parent: self.ext_ids[e.parent],
                child: self.ext_ids[e.child],
                lower_slack,
                upper_slack,
            });
        }
        ConsistencyReport { ok, edges }
    }

    /// Serializes to the canonical JSON document.
    pub fn to_json(&self) -> TreeJson {
        let mut order = BTreeMap::new();
        for i in 0..self.n() {
            if self.children[i].len() > 1 {
                let default: Vec<i64> = {
                    let mut c: Vec<i64> =
                        self.children[i].iter().map(|&c| self.ext_ids[c]).collect();
                    c.sort_unstable();
                    c
                };
                let actual: Vec<i64> = self.children[i].iter().map(|&c| self.ext_ids[c]).collect();
                if actual != default {
                    order.insert(self.ext_ids[i].to_string(), actual);
                }
            }
        }
        TreeJson {
            root: self.ext_ids[self.root],
            nodes: (0..self.n())
                .map(|i| NodeJson {
                    id: self.ext_ids[i],
                    p: self.p(i),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeJson {
                    parent: self.ext_ids[e.parent],
                    child: self.ext_ids[e.child],
                    p11: e.table.p11,
                })
                .collect(),
            ordering: if order.is_empty() { None } else { Some(order) },
        }
    }
}

/// Report produced by [`TreeModel::validate_marginals`].
#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    pub ok: bool,
    pub edges: Vec<EdgeSlack>,
}

/// Distances of one edge's joint probability from its Fréchet limits.
#[derive(Debug, Clone)]
pub struct EdgeSlack {
    pub parent: i64,
    pub child: i64,
    /// `p11 - max(0, pi + pj - 1)`
    pub lower_slack: f64,
    /// `min(pi, pj) - p11`
    pub upper_slack: f64,
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "status: {}", if self.ok { "ok" } else { "violated" })?;
        for e in &self.edges {
            writeln!(
                f,
                "edge ({},{}): lower slack {:.6e}, upper slack {:.6e}{}",
                e.parent,
                e.child,
                e.lower_slack,
                e.upper_slack,
                if e.lower_slack < -PROB_TOL || e.upper_slack < -PROB_TOL {
                    "  <- violated"
                } else {
                    ""
                }
            )?;
        }
        Ok(())
    }
}

fn check_probability(what: &str, v: f64) -> Result<f64, TreeError> {
    if !v.is_finite() || v < -PROB_TOL || v > 1.0 + PROB_TOL {
        return Err(TreeError::ProbabilityOutOfRange {
            what: what.to_string(),
            value: v,
        });
    }
    Ok(v.clamp(0.0, 1.0))
}

/// Builds a validated [`TreeModel`].
///
/// `nodes` are `(id, p)` pairs, `edges` are `(parent, child, p11)` triples and
/// `ordering` optionally overrides the default ascending-id child order.
pub fn build_tree(
    nodes: &[(i64, f64)],
    edges: &[(i64, i64, f64)],
    root: i64,
    ordering: Option<&BTreeMap<i64, Vec<i64>>>,
) -> Result<TreeModel, TreeError> {
    if nodes.is_empty() {
        return Err(TreeError::Empty);
    }
    let mut ext_ids: Vec<i64> = nodes.iter().map(|&(id, _)| id).collect();
    ext_ids.sort_unstable();
    for w in ext_ids.windows(2) {
        if w[0] == w[1] {
            return Err(TreeError::DuplicateNode(w[0]));
        }
    }
    let internal: BTreeMap<i64, usize> =
        ext_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let n = ext_ids.len();

    let mut p = vec![[0.0f64; 2]; n];
    for &(id, prob) in nodes {
        let v = check_probability(&format!("node {id}"), prob)?;
        p[internal[&id]] = [v, 1.0 - v];
    }

    let root_internal = *internal.get(&root).ok_or(TreeError::UnknownNode(root))?;

    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut raw_children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut edge_recs: Vec<(usize, usize, f64)> = Vec::with_capacity(edges.len());
    for &(pe, ce, p11) in edges {
        let pi = *internal.get(&pe).ok_or(TreeError::UnknownNode(pe))?;
        let ci = *internal.get(&ce).ok_or(TreeError::UnknownNode(ce))?;
        if pi == ci {
            return Err(TreeError::CycleDetected(format!("self-loop at node {pe}")));
        }
        if raw_children[pi].contains(&ci) || raw_children[ci].contains(&pi) {
            return Err(TreeError::DuplicateEdge(pe, ce));
        }
        if ci == root_internal {
            return Err(TreeError::CycleDetected(format!(
                "root {root} appears as the child of {pe}"
            )));
        }
        if parent[ci].is_some() {
            return Err(TreeError::CycleDetected(format!(
                "node {ce} has more than one parent"
            )));
        }
        let p11 = check_probability(&format!("edge ({pe},{ce})"), p11)?;
        parent[ci] = Some(pi);
        raw_children[pi].push(ci);
        edge_recs.push((pi, ci, p11));
    }

    // Reachability from the root over parent->child arcs.
    let mut seen = vec![false; n];
    let mut stack = vec![root_internal];
    seen[root_internal] = true;
    let mut reached = 0usize;
    while let Some(v) = stack.pop() {
        reached += 1;
        for &c in &raw_children[v] {
            if seen[c] {
                return Err(TreeError::CycleDetected(format!(
                    "node {} revisited during traversal",
                    ext_ids[c]
                )));
            }
            seen[c] = true;
            stack.push(c);
        }
    }
    if reached != n {
        return Err(TreeError::Disconnected {
            unreached: n - reached,
            total: n,
        });
    }

    // Child ordering: ascending external id unless overridden.
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let mut cs = raw_children[i].clone();
        cs.sort_unstable_by_key(|&c| ext_ids[c]);
        if let Some(map) = ordering {
            if let Some(want) = map.get(&ext_ids[i]) {
                let mut got: Vec<usize> = Vec::with_capacity(want.len());
                for &w in want {
                    let wi = *internal.get(&w).ok_or(TreeError::UnknownNode(w))?;
                    got.push(wi);
                }
                let mut sorted = got.clone();
                sorted.sort_unstable();
                let mut expect = cs.clone();
                expect.sort_unstable();
                if sorted != expect {
                    return Err(TreeError::InvalidOrdering {
                        node: ext_ids[i],
                        detail: "ordering is not a permutation of the node's children".into(),
                    });
                }
                cs = got;
            }
        }
        children[i] = cs;
    }

    // Fréchet validation and bivariate tables.
    let mut edge_list: Vec<Edge> = Vec::with_capacity(edge_recs.len());
    for &(pi, ci, p11) in &edge_recs {
        let a = p[pi][0];
        let b = p[ci][0];
        let lo = (a + b - 1.0).max(0.0);
        let hi = a.min(b);
        if p11 < lo - PROB_TOL || p11 > hi + PROB_TOL {
            return Err(TreeError::FrechetViolation {
                parent: ext_ids[pi],
                child: ext_ids[ci],
                p11,
                pi: a,
                pj: b,
                lo,
                hi,
            });
        }
        edge_list.push(Edge {
            parent: pi,
            child: ci,
            table: EdgeBivariate::from_marginals(a, b, p11),
        });
    }
    edge_list.sort_by_key(|e| e.child);
    let mut edge_of_child: Vec<Option<usize>> = vec![None; n];
    for (idx, e) in edge_list.iter().enumerate() {
        edge_of_child[e.child] = Some(idx);
    }

    let postorder = {
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![root_internal];
        while let Some(v) = stack.pop() {
            order.push(v);
            for &c in &children[v] {
                stack.push(c);
            }
        }
        order.reverse();
        order
    };
    let subtree = SubtreeIndex::build(&children, &postorder);

    Ok(TreeModel {
        ext_ids,
        internal,
        root: root_internal,
        parent,
        children,
        p,
        edges: edge_list,
        edge_of_child,
        subtree,
        postorder,
    })
}

/// Tree structure without probability data, used where the probabilities are
/// supplied separately (threshold grids, experiment generators).
#[derive(Debug, Clone)]
pub struct TreeTopology {
    pub root: i64,
    pub nodes: Vec<i64>,
    pub edges: Vec<(i64, i64)>,
    pub ordering: Option<BTreeMap<i64, Vec<i64>>>,
}

impl TreeTopology {
    pub fn from_model(t: &TreeModel) -> Self {
        TreeTopology {
            root: t.external_id(t.root()),
            nodes: (0..t.n()).map(|i| t.external_id(i)).collect(),
            edges: t
                .edges()
                .iter()
                .map(|e| (t.external_id(e.parent), t.external_id(e.child)))
                .collect(),
            ordering: None,
        }
    }

    /// Path `1 - 2 - ... - n` rooted at 1.
    pub fn series(n: usize) -> Self {
        TreeTopology {
            root: 1,
            nodes: (1..=n as i64).collect(),
            edges: (1..n as i64).map(|i| (i, i + 1)).collect(),
            ordering: None,
        }
    }
}

/// Topology JSON: `{ "root": 1, "nodes": [1,2], "edges": [{"parent":1,"child":2}] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyJson {
    pub root: i64,
    pub nodes: Vec<i64>,
    pub edges: Vec<TopologyEdgeJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ordering: Option<BTreeMap<String, Vec<i64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyEdgeJson {
    pub parent: i64,
    pub child: i64,
}

pub fn topology_from_json_str(s: &str) -> Result<TreeTopology, TreeJsonError> {
    let doc: TopologyJson = serde_json::from_str(s)?;
    Ok(TreeTopology {
        root: doc.root,
        nodes: doc.nodes,
        edges: doc.edges.iter().map(|e| (e.parent, e.child)).collect(),
        ordering: doc.ordering.map(|m| {
            m.iter()
                .filter_map(|(k, v)| k.parse::<i64>().ok().map(|id| (id, v.clone())))
                .collect()
        }),
    })
}

// ---------------------------------------------------------------------------
// JSON interchange format
// ---------------------------------------------------------------------------

/// Canonical JSON document for a tree model. Unknown fields are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeJson {
    pub root: i64,
    pub nodes: Vec<NodeJson>,
    pub edges: Vec<EdgeJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ordering: Option<BTreeMap<String, Vec<i64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeJson {
    pub id: i64,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeJson {
    pub parent: i64,
    pub child: i64,
    pub p11: f64,
}

impl TreeJson {
    pub fn build(&self) -> Result<TreeModel, TreeError> {
        let nodes: Vec<(i64, f64)> = self.nodes.iter().map(|nd| (nd.id, nd.p)).collect();
        let edges: Vec<(i64, i64, f64)> = self
            .edges
            .iter()
            .map(|e| (e.parent, e.child, e.p11))
            .collect();
        let ordering = self.ordering.as_ref().map(|m| {
            m.iter()
                .filter_map(|(k, v)| k.parse::<i64>().ok().map(|id| (id, v.clone())))
                .collect::<BTreeMap<i64, Vec<i64>>>()
        });
        build_tree(&nodes, &edges, self.root, ordering.as_ref())
    }
}

/// Parses the canonical JSON tree format into a validated model.
pub fn from_json_str(s: &str) -> Result<TreeModel, TreeJsonError> {
    let doc: TreeJson = serde_json::from_str(s)?;
    Ok(doc.build()?)
}

#[derive(Debug, Error)]
pub enum TreeJsonError {
    #[error("json parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_nodes(n: usize, p: f64) -> Vec<(i64, f64)> {
        (1..=n as i64).map(|i| (i, p)).collect()
    }

    /// The seven-node tree with edges away from root 1 used across the
    /// sub-tree indexing tests.
    fn seven_node_tree() -> TreeModel {
        let nodes = uniform_nodes(7, 0.2);
        let edges: Vec<(i64, i64, f64)> = [(1, 2), (2, 5), (2, 6), (3, 7), (1, 3), (1, 4)]
            .iter()
            .map(|&(a, b)| (a, b, 0.1))
            .collect();
        build_tree(&nodes, &edges, 1, None).unwrap()
    }

    #[test]
    fn out_degrees_on_seven_node_tree() {
        let t = seven_node_tree();
        let d: Vec<usize> = (1..=7)
            .map(|id| t.out_degree(t.internal_of(id).unwrap()))
            .collect();
        assert_eq!(d, vec![3, 2, 1, 0, 0, 0, 0]);
    }

    #[test]
    fn subtree_counts_on_seven_node_tree() {
        let t = seven_node_tree();
        let root = t.internal_of(1).unwrap();
        assert_eq!(t.subtree().count(root, 2), 6);
        let v: Vec<i64> = t
            .vertices(root, 2)
            .into_iter()
            .map(|i| t.external_id(i))
            .collect();
        assert_eq!(v, vec![1, 2, 3, 5, 6, 7]);
        assert_eq!(t.subtree().count(root, 3), 7);
        // N(i,0) = 1 everywhere.
        for i in 0..t.n() {
            assert_eq!(t.subtree().count(i, 0), 1);
        }
    }

    #[test]
    fn single_node_tree() {
        let t = build_tree(&[(5, 0.3)], &[], 5, None).unwrap();
        assert_eq!(t.n(), 1);
        assert_eq!(t.p(0), 0.3);
        assert_eq!(t.complement().p(0), 0.7);
    }

    #[test]
    fn rejects_upper_frechet_violation() {
        let err = build_tree(&[(1, 0.5), (2, 0.5)], &[(1, 2, 0.6)], 1, None).unwrap_err();
        assert!(matches!(err, TreeError::FrechetViolation { .. }));
    }

    #[test]
    fn rejects_lower_frechet_violation() {
        let err = build_tree(&[(1, 0.9), (2, 0.9)], &[(1, 2, 0.7)], 1, None).unwrap_err();
        match err {
            TreeError::FrechetViolation { lo, .. } => assert!((lo - 0.8).abs() < 1e-12),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn chow_liu_model_is_consistent() {
        let t = build_tree(
            &[(1, 0.55), (2, 0.55), (3, 0.55), (4, 0.5)],
            &[(1, 2, 0.4), (1, 4, 0.3), (2, 3, 0.45)],
            1,
            None,
        )
        .unwrap();
        let report = t.validate_marginals();
        assert!(report.ok);
        assert_eq!(report.edges.len(), 3);
    }

    #[test]
    fn rejects_second_parent_and_cycles() {
        let nodes = uniform_nodes(3, 0.4);
        // 3 gets two parents.
        let err = build_tree(&nodes, &[(1, 3, 0.2), (2, 3, 0.2), (1, 2, 0.2)], 1, None);
        assert!(matches!(err, Err(TreeError::CycleDetected(_))));
        // Directed cycle back into the root.
        let err = build_tree(&nodes, &[(1, 2, 0.2), (2, 3, 0.2), (3, 1, 0.2)], 1, None);
        assert!(matches!(err, Err(TreeError::CycleDetected(_))));
        // Missing edge leaves node 3 unreachable.
        let err = build_tree(&nodes, &[(1, 2, 0.2)], 1, None);
        assert!(matches!(err, Err(TreeError::Disconnected { .. })));
        // Same pair twice, either orientation.
        let err = build_tree(&nodes, &[(1, 2, 0.2), (2, 1, 0.2), (1, 3, 0.2)], 1, None);
        assert!(matches!(err, Err(TreeError::DuplicateEdge(..))));
    }

    #[test]
    fn complement_values() {
        let t = build_tree(&[(1, 0.55), (2, 0.55)], &[(1, 2, 0.4)], 1, None).unwrap();
        let c = t.complement();
        assert!((c.p(0) - 0.45).abs() < 1e-12);
        assert!((c.p(1) - 0.45).abs() < 1e-12);
        assert!((c.edges()[0].table.p11 - 0.3).abs() < 1e-12);
    }

    #[test]
    fn edge_lookup_is_symmetric() {
        let t = build_tree(&[(1, 0.5), (2, 0.5)], &[(1, 2, 0.25)], 1, None).unwrap();
        let i = t.internal_of(1).unwrap();
        let j = t.internal_of(2).unwrap();
        assert_eq!(t.p11_between(i, j), Some(0.25));
        assert_eq!(t.p11_between(j, i), Some(0.25));
        assert_eq!(t.p11_between(i, i), None);
    }

    #[test]
    fn explicit_ordering_override() {
        let nodes = uniform_nodes(4, 0.3);
        let edges = vec![(1, 2, 0.1), (1, 3, 0.1), (1, 4, 0.1)];
        let mut ord = BTreeMap::new();
        ord.insert(1i64, vec![4i64, 2, 3]);
        let t = build_tree(&nodes, &edges, 1, Some(&ord)).unwrap();
        let got: Vec<i64> = t
            .children(t.internal_of(1).unwrap())
            .iter()
            .map(|&c| t.external_id(c))
            .collect();
        assert_eq!(got, vec![4, 2, 3]);

        ord.insert(1i64, vec![4i64, 2]);
        let err = build_tree(&nodes, &edges, 1, Some(&ord)).unwrap_err();
        assert!(matches!(err, TreeError::InvalidOrdering { .. }));
    }

    #[test]
    fn json_round_trip_and_unknown_field_rejection() {
        let src = r#"{
            "root": 1,
            "nodes": [{"id":1,"p":0.55},{"id":2,"p":0.55},{"id":3,"p":0.55},{"id":4,"p":0.5}],
            "edges": [{"parent":1,"child":2,"p11":0.4},{"parent":1,"child":4,"p11":0.3},
                      {"parent":2,"child":3,"p11":0.45}]
        }"#;
        let t = from_json_str(src).unwrap();
        assert_eq!(t.n(), 4);
        let again = from_json_str(&serde_json::to_string(&t.to_json()).unwrap()).unwrap();
        assert_eq!(again.n(), 4);
        assert_eq!(again.p(0), t.p(0));

        let bad = src.replace("\"root\": 1,", "\"root\": 1, \"extra\": 3,");
        assert!(matches!(from_json_str(&bad), Err(TreeJsonError::Parse(_))));
    }

    #[test]
    fn probability_out_of_range() {
        let err = build_tree(&[(1, 1.2)], &[], 1, None).unwrap_err();
        assert!(matches!(err, TreeError::ProbabilityOutOfRange { .. }));
        let err = build_tree(&[(1, f64::NAN)], &[], 1, None).unwrap_err();
        assert!(matches!(err, TreeError::ProbabilityOutOfRange { .. }));
    }
}

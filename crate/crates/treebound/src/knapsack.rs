//! Cardinality-constrained quadratic knapsack on trees.
//!
//! Minimizes `sum_i alpha_i c_i + sum_(i,j) beta_ij c_i c_j` over binary `c`
//! with `sum c_i >= k`, where the quadratic terms live on the edges of a
//! rooted tree. Two views of the same recursion are provided:
//!
//! * [`solve_qkp`] — a direct numeric min-plus dynamic program with argmin
//!   backtracking, used when the costs are known numbers;
//! * [`emit_knapsack_block`] — the same recursion emitted as linear
//!   inequalities over symbolic states `x_{i,s,y,t}`, for embedding into a
//!   larger LP where the costs are themselves decision variables.
//!
//! States are indexed by `(i, s, y, t)`: node `i`, its first `s` child
//! sub-trees, the value `y` of `c_i`, and `t` nodes selected in `T(i,s)`.
//! Admissible `t` is `[y, N(i,s)-1+y]`; inadmissible states are never
//! materialized.

use thiserror::Error;

use crate::lp::{LPProblem, Relation, VarId, FREE};
use crate::tree::TreeModel;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KnapsackError {
    #[error("cardinality threshold {k} exceeds the node count {n}")]
    InfeasibleCardinality { k: usize, n: usize },
}

/// A numeric knapsack instance over a tree's topology.
///
/// `alpha` is indexed by internal node id, `beta` by the tree's canonical
/// edge order (see [`TreeModel::edges`]).
#[derive(Debug, Clone)]
pub struct KnapsackInstance<'a> {
    pub tree: &'a TreeModel,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub k: usize,
}

/// The four `(c_i, c_{i(s)})` combinations of the split recursions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitCase {
    /// case 1: `c_i = 0, c_{i(s)} = 0`
    ZeroZero,
    /// case 2: `c_i = 0, c_{i(s)} = 1`
    ZeroOne,
    /// case 3: `c_i = 1, c_{i(s)} = 0`
    OneZero,
    /// case 4: `c_i = 1, c_{i(s)} = 1`
    OneOne,
}

impl SplitCase {
    pub const ALL: [SplitCase; 4] = [
        SplitCase::ZeroZero,
        SplitCase::ZeroOne,
        SplitCase::OneZero,
        SplitCase::OneOne,
    ];

    pub fn parent_selected(self) -> bool {
        matches!(self, SplitCase::OneZero | SplitCase::OneOne)
    }

    pub fn child_selected(self) -> bool {
        matches!(self, SplitCase::ZeroOne | SplitCase::OneOne)
    }
}

/// Range of nodes `a` selectable from the `s`-th child sub-tree when `t`
/// nodes are selected from `T(i,s)` in total, for the given case.
///
/// An empty range (`a_min > a_max`) is legal and means the case contributes
/// no transition at this `t`. The `-1` adjustments apply to the sub-tree node
/// counts: a sub-tree whose root is unselected holds at most `N - 1` selected
/// nodes.
pub fn admissible_ranges(
    tree: &TreeModel,
    i: usize,
    s: usize,
    t: usize,
    case: SplitCase,
) -> Option<(usize, usize)> {
    debug_assert!(s >= 2 && s <= tree.out_degree(i));
    let n1 = tree.subtree().count(i, s - 1) as i64;
    let child = tree.children(i)[s - 1];
    let n2 = tree.subtree().subtree_size(child) as i64;
    let t = t as i64;
    let (a_min, a_max) = match case {
        SplitCase::ZeroZero => ((t - (n1 - 1)).max(0), (n2 - 1).min(t)),
        SplitCase::ZeroOne => ((t - (n1 - 1)).max(1), n2.min(t)),
        SplitCase::OneZero => ((t - n1).max(0), (n2 - 1).min(t - 1)),
        SplitCase::OneOne => ((t - n1).max(1), n2.min(t - 1)),
    };
    if a_min > a_max {
        None
    } else {
        Some((a_min as usize, a_max as usize))
    }
}

/// Dense layout of the admissible `(i, s, y, t)` states.
#[derive(Debug, Clone)]
pub struct StateLayout {
    /// offset[i][s]: base of the `(i, s)` block; block holds `2 * N(i,s)`
    /// states, `y = 0` first.
    offset: Vec<Vec<usize>>,
    counts: Vec<Vec<usize>>,
    len: usize,
}

impl StateLayout {
    pub fn new(tree: &TreeModel) -> Self {
        let n = tree.n();
        let mut offset = vec![Vec::new(); n];
        let mut counts = vec![Vec::new(); n];
        let mut next = 0usize;
        for i in 0..n {
            let d = tree.out_degree(i);
            for s in 0..=d {
                let cnt = tree.subtree().count(i, s);
                offset[i].push(next);
                counts[i].push(cnt);
                next += 2 * cnt;
            }
        }
        StateLayout {
            offset,
            counts,
            len: next,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Flat index of `x_{i,s,y,t}`, or `None` when `t` is inadmissible.
    pub fn index(&self, i: usize, s: usize, y: bool, t: usize) -> Option<usize> {
        let cnt = self.counts[i][s];
        let (lo, hi) = if y { (1, cnt) } else { (0, cnt - 1) };
        if t < lo || t > hi {
            return None;
        }
        let base = self.offset[i][s];
        Some(if y { base + cnt + (t - 1) } else { base + t })
    }

    /// Admissible `t` interval `[y, N(i,s)-1+y]`.
    pub fn t_range(&self, i: usize, s: usize, y: bool) -> (usize, usize) {
        let cnt = self.counts[i][s];
        if y {
            (1, cnt)
        } else {
            (0, cnt - 1)
        }
    }

    /// All states in layout order.
    pub fn states(&self) -> impl Iterator<Item = (usize, usize, bool, usize)> + '_ {
        (0..self.offset.len()).flat_map(move |i| {
            (0..self.offset[i].len()).flat_map(move |s| {
                [false, true].into_iter().flat_map(move |y| {
                    let (lo, hi) = self.t_range(i, s, y);
                    (lo..=hi).map(move |t| (i, s, y, t))
                })
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Choice {
    Leaf,
    FirstChild { child_y: bool },
    Split { child_y: bool, a: usize },
    None,
}

/// Bottom-up fill of the state values and argmin transitions; independent of
/// the cardinality threshold, which only enters at the root aggregation.
fn fill_tables(inst: &KnapsackInstance) -> (StateLayout, Vec<f64>, Vec<Choice>) {
    let tree = inst.tree;
    let n = tree.n();
    debug_assert_eq!(inst.alpha.len(), n);
    debug_assert_eq!(inst.beta.len(), tree.edges().len());
    let mut beta_by_child = vec![0.0f64; n];
    for (idx, e) in tree.edges().iter().enumerate() {
        beta_by_child[e.child] = inst.beta[idx];
    }
    let beta_of = |child: usize| beta_by_child[child];

    let layout = StateLayout::new(tree);
    let mut val = vec![f64::INFINITY; layout.len()];
    let mut choice = vec![Choice::None; layout.len()];

    for &i in tree.postorder() {
        let d = tree.out_degree(i);
        // s = 0: the node alone.
        let i00 = layout.index(i, 0, false, 0).unwrap();
        val[i00] = 0.0;
        choice[i00] = Choice::Leaf;
        let i11 = layout.index(i, 0, true, 1).unwrap();
        val[i11] = inst.alpha[i];
        choice[i11] = Choice::Leaf;

        for s in 1..=d {
            let child = tree.children(i)[s - 1];
            let dc = tree.out_degree(child);
            let beta = beta_of(child);
            for y in [false, true] {
                let (lo, hi) = layout.t_range(i, s, y);
                for t in lo..=hi {
                    let dst = layout.index(i, s, y, t).unwrap();
                    let mut best = f64::INFINITY;
                    let mut best_choice = Choice::None;
                    if s == 1 {
                        // Combine the node with its first child's sub-tree.
                        let tc = t - usize::from(y);
                        for cy in [false, true] {
                            if let Some(src) = layout.index(child, dc, cy, tc) {
                                let mut cand = val[src];
                                if y {
                                    cand += inst.alpha[i];
                                    if cy {
                                        cand += beta;
                                    }
                                }
                                if cand < best {
                                    best = cand;
                                    best_choice = Choice::FirstChild { child_y: cy };
                                }
                            }
                        }
                    } else {
                        for case in SplitCase::ALL {
                            if case.parent_selected() != y {
                                continue;
                            }
                            let Some((a_min, a_max)) = admissible_ranges(tree, i, s, t, case)
                            else {
                                continue;
                            };
                            let cy = case.child_selected();
                            for a in a_min..=a_max {
                                let left = layout.index(i, s - 1, y, t - a);
                                let right = layout.index(child, dc, cy, a);
                                let (Some(l), Some(r)) = (left, right) else {
                                    continue;
                                };
                                let mut cand = val[l] + val[r];
                                if y && cy {
                                    cand += beta;
                                }
                                if cand < best {
                                    best = cand;
                                    best_choice = Choice::Split { child_y: cy, a };
                                }
                            }
                        }
                    }
                    val[dst] = best;
                    choice[dst] = best_choice;
                }
            }
        }
    }
    (layout, val, choice)
}

/// The numeric DP table, with `+inf` for inadmissible states.
#[derive(Debug, Clone)]
pub struct DpTable {
    layout: StateLayout,
    values: Vec<f64>,
    ext_ids: Vec<i64>,
}

impl DpTable {
    pub fn compute(inst: &KnapsackInstance) -> DpTable {
        let (layout, values, _) = fill_tables(inst);
        DpTable {
            layout,
            values,
            ext_ids: (0..inst.tree.n())
                .map(|i| inst.tree.external_id(i))
                .collect(),
        }
    }

    /// `x_{i,s,y,t}` by internal node id; inadmissible states are `+inf`.
    pub fn value(&self, i: usize, s: usize, y: bool, t: usize) -> f64 {
        self.layout
            .index(i, s, y, t)
            .map_or(f64::INFINITY, |ix| self.values[ix])
    }

    /// Debug dump, one `i,s,y,t,value` line per admissible state, with nodes
    /// reported by external id.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,s,y,t,value\n");
        for (i, s, y, t) in self.layout.states() {
            let v = self.values[self.layout.index(i, s, y, t).unwrap()];
            out.push_str(&format!(
                "{},{s},{},{t},{v}\n",
                self.ext_ids[i],
                u8::from(y)
            ));
        }
        out
    }
}

/// Exact minimum and one argmin selection, by min-plus DP over the tree with
/// backtracking. Selection is reported per internal node id.
pub fn solve_qkp(inst: &KnapsackInstance) -> Result<(f64, Vec<bool>), KnapsackError> {
    let tree = inst.tree;
    let n = tree.n();
    if inst.k > n {
        return Err(KnapsackError::InfeasibleCardinality { k: inst.k, n });
    }
    let (layout, val, choice) = fill_tables(inst);

    // Root aggregation over t >= k.
    let root = tree.root();
    let d = tree.out_degree(root);
    let mut best = f64::INFINITY;
    let mut best_state: Option<(bool, usize)> = None;
    for y in [false, true] {
        let (lo, hi) = layout.t_range(root, d, y);
        for t in inst.k.max(lo)..=hi {
            let idx = layout.index(root, d, y, t).unwrap();
            if val[idx] < best {
                best = val[idx];
                best_state = Some((y, t));
            }
        }
    }
    let (y0, t0) = best_state.expect("k <= n leaves at least one admissible root state");

    // Backtrack one argmin selection.
    let mut selection = vec![false; n];
    let mut stack = vec![(root, d, y0, t0)];
    while let Some((i, s, y, t)) = stack.pop() {
        let idx = layout.index(i, s, y, t).unwrap();
        match choice[idx] {
            Choice::Leaf => selection[i] = y,
            Choice::FirstChild { child_y } => {
                selection[i] = y;
                let child = tree.children(i)[0];
                stack.push((child, tree.out_degree(child), child_y, t - usize::from(y)));
            }
            Choice::Split { child_y, a } => {
                let child = tree.children(i)[s - 1];
                stack.push((i, s - 1, y, t - a));
                stack.push((child, tree.out_degree(child), child_y, a));
            }
            Choice::None => unreachable!("admissible state without a transition"),
        }
    }
    Ok((best, selection))
}

/// How the root states are linked to the objective variable(s).
#[derive(Debug, Clone, Copy)]
pub enum LinkSpec {
    /// One `z` with rows `x_{root,d,y,t} - z >= 0` for `t in [k, ..]`.
    Threshold { k: usize },
    /// One `z_t` per cardinality `t in [0, n]`, each linked to the root
    /// states of that exact cardinality.
    PerCardinality,
}

/// Root-link variables created by [`emit_knapsack_block`].
#[derive(Debug, Clone)]
pub enum RootLink {
    Threshold { k: usize, z: VarId },
    PerCardinality { z: Vec<VarId> },
}

/// The symbolic knapsack constraint block inside a larger LP.
#[derive(Debug, Clone)]
pub struct KnapsackBlock {
    pub layout: StateLayout,
    pub x: Vec<VarId>,
    pub link: RootLink,
}

/// Emits the knapsack recursion as LP rows over fresh free variables
/// `x_{i,s,y,t}`, coupled to the caller's `alpha` / `beta` variables:
///
/// * base equalities `x_{i,s,0,0} = 0` and `x_{i,s,1,1} - alpha_i = 0` for
///   every node and every `s in [0, d_i]`;
/// * first-child inequalities for `s = 1`;
/// * split inequalities for `s >= 2` over the nonempty admissible ranges;
/// * root-link rows per `link`.
pub fn emit_knapsack_block(
    lp: &mut LPProblem,
    tree: &TreeModel,
    alpha: &[VarId],
    beta: &[VarId],
    link: LinkSpec,
) -> KnapsackBlock {
    let n = tree.n();
    debug_assert_eq!(alpha.len(), n);
    debug_assert_eq!(beta.len(), tree.edges().len());
    let layout = StateLayout::new(tree);
    let x: Vec<VarId> = (0..layout.len()).map(|_| lp.add_var(0.0, FREE)).collect();
    let mut beta_by_child = vec![None; n];
    for (idx, e) in tree.edges().iter().enumerate() {
        beta_by_child[e.child] = Some(beta[idx]);
    }
    let beta_of = |child: usize| beta_by_child[child].unwrap();
    let xi = |i: usize, s: usize, y: bool, t: usize| layout.index(i, s, y, t).map(|ix| x[ix]);

    // Base equalities for every (i, s).
    for i in 0..n {
        for s in 0..=tree.out_degree(i) {
            lp.add_row(Relation::Eq, 0.0, &[(xi(i, s, false, 0).unwrap(), 1.0)]);
            lp.add_row(
                Relation::Eq,
                0.0,
                &[(xi(i, s, true, 1).unwrap(), 1.0), (alpha[i], -1.0)],
            );
        }
    }

    // Recursion inequalities, upper-bounding each state by its transitions.
    for i in 0..n {
        let d = tree.out_degree(i);
        if d == 0 {
            continue;
        }
        {
            // s = 1 rows against the first child.
            let j = tree.children(i)[0];
            let dj = tree.out_degree(j);
            let m1 = tree.subtree().count(i, 1);
            let bj = beta_of(j);
            for t in 0..=m1.saturating_sub(2) {
                if let (Some(a), Some(b)) = (xi(j, dj, false, t), xi(i, 1, false, t)) {
                    lp.add_row(Relation::Ge, 0.0, &[(a, 1.0), (b, -1.0)]);
                }
            }
            for t in 1..=m1 - 1 {
                if let (Some(a), Some(b)) = (xi(j, dj, true, t), xi(i, 1, false, t)) {
                    lp.add_row(Relation::Ge, 0.0, &[(a, 1.0), (b, -1.0)]);
                }
            }
            for t in 1..=m1 - 1 {
                if let (Some(a), Some(b)) = (xi(j, dj, false, t - 1), xi(i, 1, true, t)) {
                    lp.add_row(Relation::Ge, 0.0, &[(a, 1.0), (b, -1.0), (alpha[i], 1.0)]);
                }
            }
            for t in 2..=m1 {
                if let (Some(a), Some(b)) = (xi(j, dj, true, t - 1), xi(i, 1, true, t)) {
                    lp.add_row(
                        Relation::Ge,
                        0.0,
                        &[(a, 1.0), (b, -1.0), (alpha[i], 1.0), (bj, 1.0)],
                    );
                }
            }
        }
        for s in 2..=d {
            let j = tree.children(i)[s - 1];
            let dj = tree.out_degree(j);
            let ms = tree.subtree().count(i, s);
            let bj = beta_of(j);
            for case in SplitCase::ALL {
                let y = case.parent_selected();
                let cy = case.child_selected();
                let (t_lo, t_hi) = match case {
                    SplitCase::ZeroZero => (0, ms - 2),
                    SplitCase::ZeroOne | SplitCase::OneZero => (1, ms - 1),
                    SplitCase::OneOne => (2, ms),
                };
                for t in t_lo..=t_hi {
                    let Some((a_min, a_max)) = admissible_ranges(tree, i, s, t, case) else {
                        continue;
                    };
                    for a in a_min..=a_max {
                        let (Some(left), Some(right), Some(dst)) =
                            (xi(i, s - 1, y, t - a), xi(j, dj, cy, a), xi(i, s, y, t))
                        else {
                            continue;
                        };
                        let mut coeffs = vec![(left, 1.0), (right, 1.0), (dst, -1.0)];
                        if y && cy {
                            coeffs.push((bj, 1.0));
                        }
                        lp.add_row(Relation::Ge, 0.0, &coeffs);
                    }
                }
            }
        }
    }

    // Root-link rows.
    let root = tree.root();
    let d = tree.out_degree(root);
    let link = match link {
        LinkSpec::Threshold { k } => {
            let z = lp.add_var(0.0, FREE);
            for y in [false, true] {
                let (lo, hi) = layout.t_range(root, d, y);
                for t in k.max(lo)..=hi {
                    let xv = xi(root, d, y, t).unwrap();
                    lp.add_row(Relation::Ge, 0.0, &[(xv, 1.0), (z, -1.0)]);
                }
            }
            RootLink::Threshold { k, z }
        }
        LinkSpec::PerCardinality => {
            let z: Vec<VarId> = (0..=n).map(|_| lp.add_var(0.0, FREE)).collect();
            for y in [false, true] {
                let (lo, hi) = layout.t_range(root, d, y);
                for t in lo..=hi {
                    let xv = xi(root, d, y, t).unwrap();
                    lp.add_row(Relation::Ge, 0.0, &[(xv, 1.0), (z[t], -1.0)]);
                }
            }
            RootLink::PerCardinality { z }
        }
    };

    KnapsackBlock { layout, x, link }
}

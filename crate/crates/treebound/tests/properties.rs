//! Cross-module property tests: structural invariants on random trees,
//! membership of the conditionally independent distribution in the bound
//! band, and reductions against the exponential oracle.

use proptest::prelude::*;

use treebound::bounds::{
    lower_bound, partition_bound, poisson_binomial_tail, upper_bound, weighted_bound, Direction,
};
use treebound::ci::ci_tail;
use treebound::gen::{derived_seed, random_tree_model, BivariateGen, SplitMix64};
use treebound::oracle::{oracle_bound, GeneralMarginalModel, OracleObjective};
use treebound::tree::{build_tree, TreeError};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    /// N(i,s) = N(i,s-1) + N(i(s), d_{i(s)}) on random trees up to n = 30,
    /// with N(i,0) = 1 and N(root, d_root) = n.
    #[test]
    fn subtree_count_recurrence(seed in 0u64..1_000_000, n in 1usize..=30) {
        let mut rng = SplitMix64::new(seed);
        let t = random_tree_model(n, (0.0, 1.0), BivariateGen::FrechetUniform, &mut rng);
        let idx = t.subtree();
        for i in 0..t.n() {
            prop_assert_eq!(idx.count(i, 0), 1);
            for s in 1..=t.out_degree(i) {
                let child = t.children(i)[s - 1];
                prop_assert_eq!(
                    idx.count(i, s),
                    idx.count(i, s - 1) + idx.subtree_size(child)
                );
                prop_assert_eq!(t.vertices(i, s).len(), idx.count(i, s));
            }
        }
        prop_assert_eq!(idx.subtree_size(t.root()), n);
    }

    /// complement . complement is the identity, bit for bit.
    #[test]
    fn complement_is_field_exact_involution(seed in 0u64..1_000_000, n in 1usize..=20) {
        let mut rng = SplitMix64::new(seed);
        let t = random_tree_model(n, (0.0, 1.0), BivariateGen::FrechetUniform, &mut rng);
        let back = t.complement().complement();
        for i in 0..t.n() {
            prop_assert_eq!(t.p(i).to_bits(), back.p(i).to_bits());
            prop_assert_eq!(t.p_value(i, false).to_bits(), back.p_value(i, false).to_bits());
        }
        for (a, b) in t.edges().iter().zip(back.edges()) {
            prop_assert_eq!(a.parent, b.parent);
            prop_assert_eq!(a.child, b.child);
            prop_assert_eq!(a.table.p11.to_bits(), b.table.p11.to_bits());
            prop_assert_eq!(a.table.p10.to_bits(), b.table.p10.to_bits());
            prop_assert_eq!(a.table.p01.to_bits(), b.table.p01.to_bits());
            prop_assert_eq!(a.table.p00.to_bits(), b.table.p00.to_bits());
        }
    }

    /// Mutating a valid tree — second parent, lost connectivity, broken
    /// Fréchet interval — is always rejected.
    #[test]
    fn mutations_are_rejected(seed in 0u64..100_000, n in 3usize..=12) {
        let mut rng = SplitMix64::new(seed);
        let t = random_tree_model(n, (0.05, 0.95), BivariateGen::FrechetUniform, &mut rng);
        let nodes: Vec<(i64, f64)> = (0..t.n())
            .map(|i| (t.external_id(i), t.p(i)))
            .collect();
        let edges: Vec<(i64, i64, f64)> = t
            .edges()
            .iter()
            .map(|e| (t.external_id(e.parent), t.external_id(e.child), e.table.p11))
            .collect();
        let root = t.external_id(t.root());

        // Second parent for some non-root node.
        let victim = edges[rng.next_below(edges.len() as u64) as usize].1;
        let other = (1..=n as i64)
            .find(|&c| c != victim && !edges.iter().any(|&(a, b, _)| (a, b) == (c, victim)))
            .unwrap();
        let mut plus = edges.clone();
        plus.push((other, victim, 0.0));
        prop_assert!(build_tree(&nodes, &plus, root, None).is_err());

        // Dropping an edge disconnects.
        let mut minus = edges.clone();
        minus.remove(rng.next_below(minus.len() as u64) as usize);
        let disconnected = matches!(
            build_tree(&nodes, &minus, root, None),
            Err(TreeError::Disconnected { .. })
        );
        prop_assert!(disconnected);

        // Pushing a joint above min(pi, pj) violates the Fréchet interval
        // while staying a legal probability (marginals are capped at 0.95).
        let mut broken = edges.clone();
        let pos = rng.next_below(broken.len() as u64) as usize;
        let edge = &t.edges()[pos];
        let hi = t.p(edge.parent).min(t.p(edge.child));
        broken[pos].2 = hi + 0.9 * (1.0 - hi);
        let rejected = matches!(
            build_tree(&nodes, &broken, root, None),
            Err(TreeError::FrechetViolation { .. })
        );
        prop_assert!(rejected);
    }

    /// The conditionally independent distribution is a member of the
    /// feasible set, so its tail sits inside [L(k), U(k)].
    #[test]
    fn ci_tail_is_inside_the_band(seed in 0u64..50_000, n in 2usize..=9) {
        let mut rng = SplitMix64::new(seed);
        let t = random_tree_model(n, (0.0, 1.0), BivariateGen::FrechetUniform, &mut rng);
        for k in 0..=n {
            let ci = ci_tail(&t, k).unwrap();
            let u = upper_bound(&t, k).unwrap().value;
            let l = lower_bound(&t, k).unwrap().value;
            prop_assert!(l - 1e-7 <= ci && ci <= u + 1e-7,
                "k={} l={} ci={} u={}", k, l, ci, u);
        }
    }
}

/// Partitioned instances match the weighted exponential oracle: the
/// independent block enters as Poisson-binomial tail weights.
#[test]
fn partition_bound_matches_weighted_oracle() {
    for r in 0..8u64 {
        let mut rng = SplitMix64::new(derived_seed(0xAB, r));
        let a_probs: Vec<f64> = (0..2).map(|_| rng.next_f64()).collect();
        let t_b = random_tree_model(6, (0.0, 1.0), BivariateGen::FrechetUniform, &mut rng);
        let k = 4usize;
        let w: Vec<f64> = (0..=t_b.n())
            .map(|s| poisson_binomial_tail(&a_probs, k as i64 - s as i64))
            .collect();
        let gm = GeneralMarginalModel::from_tree(&t_b);
        for direction in [Direction::Upper, Direction::Lower] {
            let pb = partition_bound(&a_probs, &t_b, k, direction).unwrap().value;
            let ob = oracle_bound(
                &gm,
                &OracleObjective::Weights {
                    w: w.clone(),
                    direction,
                },
            )
            .unwrap()
            .value;
            assert!(
                (pb - ob).abs() < 1e-6,
                "run {r} {direction:?}: partition {pb} vs oracle {ob}"
            );
        }
    }
}

/// Weighted bounds bracket the value attained by any feasible distribution;
/// spot-check with the conditionally independent one.
#[test]
fn weighted_bounds_bracket_ci_value() {
    for r in 0..6u64 {
        let mut rng = SplitMix64::new(derived_seed(0xBEEF, r));
        let n = 3 + (r as usize % 6);
        let t = random_tree_model(n, (0.0, 1.0), BivariateGen::FrechetUniform, &mut rng);
        let w: Vec<f64> = (0..=n).map(|_| rng.next_f64() * 3.0).collect();
        let pmf = treebound::ci::ci_pmf(&t).unwrap();
        let ci_value: f64 = w.iter().zip(&pmf).map(|(a, b)| a * b).sum();
        let hi = weighted_bound(&t, &w, Direction::Upper).unwrap().value;
        let lo = weighted_bound(&t, &w, Direction::Lower).unwrap().value;
        assert!(
            lo - 1e-7 <= ci_value && ci_value <= hi + 1e-7,
            "run {r}: lo {lo} ci {ci_value} hi {hi}"
        );
    }
}

/// Two independent routes to the lower bound agree: complementation
/// (`1 - U'(n-k+1)` on the complemented model) and the weighted LP with an
/// indicator weight vector minimized via the flipped-weight transform.
#[test]
fn lower_bound_routes_agree() {
    for r in 0..10u64 {
        let mut rng = SplitMix64::new(derived_seed(0x10E6, r));
        let n = 2 + (r as usize % 8);
        let t = random_tree_model(n, (0.0, 1.0), BivariateGen::FrechetUniform, &mut rng);
        for k in 1..=n {
            let via_complement = lower_bound(&t, k).unwrap().value;
            let w: Vec<f64> = (0..=n).map(|s| if s >= k { 1.0 } else { 0.0 }).collect();
            let via_weights = weighted_bound(&t, &w, Direction::Lower).unwrap().value;
            assert!(
                (via_complement - via_weights).abs() < 1e-7,
                "run {r} k={k}: complement {via_complement} vs weights {via_weights}"
            );
        }
    }
}

/// Degenerate marginals (p = 0 and p = 1 nodes) flow through every bound.
#[test]
fn degenerate_marginals_bounds() {
    let t = build_tree(
        &[(1, 0.0), (2, 0.5), (3, 1.0)],
        &[(1, 2, 0.0), (2, 3, 0.5)],
        1,
        None,
    )
    .unwrap();
    // c3 is certain, c1 never fires: S = 1 + Bernoulli(1/2).
    assert!((upper_bound(&t, 1).unwrap().value - 1.0).abs() < 1e-7);
    assert!((lower_bound(&t, 1).unwrap().value - 1.0).abs() < 1e-7);
    assert!((upper_bound(&t, 2).unwrap().value - 0.5).abs() < 1e-7);
    assert!((lower_bound(&t, 2).unwrap().value - 0.5).abs() < 1e-7);
    assert!(upper_bound(&t, 3).unwrap().value.abs() < 1e-7);
}

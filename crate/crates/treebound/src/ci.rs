//! Tail probability under the conditionally independent tree distribution.
//!
//! The unique distribution that factorizes as the root marginal times
//! child-given-parent conditionals is a member of the feasible set, so its
//! tail probability always lies between the lower and upper bounds. It is
//! computed by a sum-product dynamic program over the same `(i, s, y, t)`
//! states as the knapsack recursion: `w_{i,s,y,t} = P(sum over T(i,s) = t,
//! c_i = y)`.

use thiserror::Error;

use crate::knapsack::StateLayout;
use crate::tree::{TreeModel, PROB_TOL};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CiError {
    #[error(
        "degenerate conditioning on edge ({parent},{child}): joint cell {cell} has \
         zero-probability conditioning state"
    )]
    DegenerateConditioning { parent: i64, child: i64, cell: f64 },
}

/// The joint-probability DP table.
#[derive(Debug, Clone)]
pub struct CiTable {
    layout: StateLayout,
    w: Vec<f64>,
}

impl CiTable {
    /// `w_{i,s,y,t}`, or 0 for inadmissible `t`.
    pub fn value(&self, i: usize, s: usize, y: bool, t: usize) -> f64 {
        self.layout.index(i, s, y, t).map_or(0.0, |ix| self.w[ix])
    }

    pub fn build(tree: &TreeModel) -> Result<CiTable, CiError> {
        let layout = StateLayout::new(tree);
        let mut w = vec![0.0f64; layout.len()];

        // factor = cell / divisor with the zero-mass convention.
        let factor = |cell: f64, divisor: f64, parent: usize, child: usize| {
            if divisor == 0.0 {
                if cell > PROB_TOL {
                    Err(CiError::DegenerateConditioning {
                        parent: tree.external_id(parent),
                        child: tree.external_id(child),
                        cell,
                    })
                } else {
                    Ok(None)
                }
            } else {
                Ok(Some(cell / divisor))
            }
        };

        for &i in tree.postorder() {
            let d = tree.out_degree(i);
            w[layout.index(i, 0, false, 0).unwrap()] = tree.p_value(i, false);
            w[layout.index(i, 0, true, 1).unwrap()] = tree.p_value(i, true);

            for s in 1..=d {
                let j = tree.children(i)[s - 1];
                let dj = tree.out_degree(j);
                let table = tree.edge_to(j).unwrap().table;
                for y in [false, true] {
                    for cy in [false, true] {
                        let cell = table.cell(y, cy);
                        let divisor = if s == 1 {
                            tree.p_value(j, cy)
                        } else {
                            tree.p_value(i, y) * tree.p_value(j, cy)
                        };
                        let Some(f) = factor(cell, divisor, i, j)? else {
                            continue;
                        };
                        if f == 0.0 {
                            continue;
                        }
                        let (a_lo, a_hi) = layout.t_range(j, dj, cy);
                        if s == 1 {
                            // T(i,1) = {i} + first child's sub-tree.
                            for a in a_lo..=a_hi {
                                let src = layout.index(j, dj, cy, a).unwrap();
                                let t = a + usize::from(y);
                                if let Some(dst) = layout.index(i, 1, y, t) {
                                    w[dst] += w[src] * f;
                                }
                            }
                        } else {
                            let (t_lo, t_hi) = layout.t_range(i, s - 1, y);
                            for t1 in t_lo..=t_hi {
                                let left = w[layout.index(i, s - 1, y, t1).unwrap()];
                                if left == 0.0 {
                                    continue;
                                }
                                for a in a_lo..=a_hi {
                                    let right = w[layout.index(j, dj, cy, a).unwrap()];
                                    if right == 0.0 {
                                        continue;
                                    }
                                    let dst = layout.index(i, s, y, t1 + a).unwrap();
                                    w[dst] += left * right * f;
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(CiTable { layout, w })
    }
}

/// Probability mass of `S = sum c_i` under the conditionally independent
/// distribution, length `n + 1`.
pub fn ci_pmf(tree: &TreeModel) -> Result<Vec<f64>, CiError> {
    let table = CiTable::build(tree)?;
    let root = tree.root();
    let d = tree.out_degree(root);
    Ok((0..=tree.n())
        .map(|t| table.value(root, d, false, t) + table.value(root, d, true, t))
        .collect())
}

/// `P(S >= k)` under the conditionally independent distribution.
pub fn ci_tail(tree: &TreeModel, k: usize) -> Result<f64, CiError> {
    if k == 0 {
        return Ok(1.0);
    }
    if k > tree.n() {
        return Ok(0.0);
    }
    let pmf = ci_pmf(tree)?;
    Ok(pmf[k..].iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{chow_liu_trees, random_tree_model, BivariateGen, SplitMix64};
    use crate::oracle::ci_enumerate;
    use crate::orderstats::CopulaKind;
    use crate::tree::build_tree;

    #[test]
    fn chow_liu_golden_tails() {
        let trees = chow_liu_trees();
        let cases = [(0usize, 1usize, 0.8704), (1, 4, 0.1488), (2, 2, 0.6663)];
        for (ti, k, expect) in cases {
            let got = ci_tail(&trees[ti].1, k).unwrap();
            assert!(
                (got - expect).abs() < 5e-5,
                "{} k={k}: {got} vs {expect}",
                trees[ti].0
            );
        }
    }

    #[test]
    fn single_node() {
        let t = build_tree(&[(1, 0.3)], &[], 1, None).unwrap();
        assert!((ci_tail(&t, 1).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(ci_tail(&t, 0).unwrap(), 1.0);
        assert_eq!(ci_tail(&t, 2).unwrap(), 0.0);
    }

    #[test]
    fn independent_pair_pmf() {
        let t = build_tree(&[(1, 0.5), (2, 0.5)], &[(1, 2, 0.25)], 1, None).unwrap();
        let pmf = ci_pmf(&t).unwrap();
        for (got, want) in pmf.iter().zip([0.25, 0.5, 0.25]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_enumeration_and_sums_to_one() {
        let mut rng = SplitMix64::new(2024);
        for round in 0..60 {
            let n = 2 + round % 9;
            let t = random_tree_model(n, (0.0, 1.0), BivariateGen::FrechetUniform, &mut rng);
            let pmf = ci_pmf(&t).unwrap();
            let total: f64 = pmf.iter().sum();
            assert!((total - 1.0).abs() < 1e-10, "pmf total {total}");
            for k in 0..=n {
                let a = ci_tail(&t, k).unwrap();
                let b = ci_enumerate(&t, k).unwrap();
                assert!((a - b).abs() < 1e-12, "n={n} k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn subtree_tables_are_distributions() {
        let mut rng = SplitMix64::new(7);
        let t = random_tree_model(10, (0.0, 1.0), BivariateGen::FrechetUniform, &mut rng);
        let table = CiTable::build(&t).unwrap();
        for i in 0..t.n() {
            for s in 0..=t.out_degree(i) {
                let n_is = t.subtree().count(i, s);
                let mut total = 0.0;
                for y in [false, true] {
                    for tt in 0..=n_is {
                        total += table.value(i, s, y, tt);
                    }
                }
                assert!((total - 1.0).abs() < 1e-10, "node {i} s={s}: {total}");
            }
        }
    }

    #[test]
    fn independence_copula_reduces_to_poisson_binomial() {
        let mut rng = SplitMix64::new(555);
        for _ in 0..10 {
            let t = random_tree_model(
                8,
                (0.0, 1.0),
                BivariateGen::Copula(CopulaKind::Independence),
                &mut rng,
            );
            let ps: Vec<f64> = (0..t.n()).map(|i| t.p(i)).collect();
            let pb = crate::bounds::poisson_binomial_pmf(&ps);
            let pmf = ci_pmf(&t).unwrap();
            for (a, b) in pmf.iter().zip(&pb) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_marginals_use_limit_convention() {
        // p = 0 and p = 1 nodes with consistent edge tables.
        let t = build_tree(
            &[(1, 0.0), (2, 0.5), (3, 1.0)],
            &[(1, 2, 0.0), (2, 3, 0.5)],
            1,
            None,
        )
        .unwrap();
        // c1 = 0 surely, c3 = 1 surely, c2 ~ Bernoulli(1/2).
        assert!((ci_tail(&t, 1).unwrap() - 1.0).abs() < 1e-12);
        assert!((ci_tail(&t, 2).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(ci_tail(&t, 3).unwrap(), 0.0);
    }
}

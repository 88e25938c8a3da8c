//! Greedy budget sparsification for general base topologies.
//!
//! Solve the unconstrained weight problem, then repeatedly freeze (set to
//! exactly zero) the link of minimum absolute weight among those incident to
//! an over-budget node, re-solving after each removal. Stops when every node
//! fits the budget, or reports failure when every eligible removal would
//! disconnect the remaining candidate graph.
//!
//! Deciding whether a feasible design exists at all is NP-hard in general
//! (it contains degree-constrained connected spanning subgraph), so this
//! heuristic is deliberately incomplete: failure does not prove
//! infeasibility.

use std::sync::Arc;

use serde::Serialize;

use crate::cost::{feasible, CostModel};
use crate::solver::{solve_min_rho_warm, SolverConfig};
use crate::spectral::MixingDesign;
use crate::topology::{ActiveSet, Link, Topology};
use crate::{Result, ACTIVATION_THRESHOLD};

/// Why the greedy loop gave up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GreedyFailure {
    /// Every eligible removal would disconnect the remaining candidate
    /// graph (checked exhaustively at the failing step).
    Disconnection,
    /// Some node exceeds the budget but no activated link is left to remove
    /// (for instance its computation cost alone is above the budget).
    BudgetUnreachable,
}

/// One frozen link, with the weight magnitude that made it the cheapest
/// removal at its step.
#[derive(Clone, Debug, Serialize)]
pub struct RemovalRecord {
    pub link_index: usize,
    pub link: Link,
    pub weight_magnitude: f64,
}

/// Outcome of [`greedy_sparsify`]: the final design and per-node costs on
/// success, the failure reason otherwise, and the removal history either
/// way (the history is replayable for audit).
#[derive(Clone, Debug)]
pub struct GreedyOutcome {
    pub design: Option<MixingDesign>,
    pub removals: Vec<RemovalRecord>,
    pub failure: Option<GreedyFailure>,
    /// Node costs of the last design considered (the final design on
    /// success).
    pub node_costs: Vec<f64>,
    /// Number of weight solves performed.
    pub solves: usize,
}

impl GreedyOutcome {
    pub fn is_success(&self) -> bool {
        self.failure.is_none() && self.design.is_some()
    }
}

/// Run the greedy loop under per-node budget `budget` (Wh per iteration).
pub fn greedy_sparsify(
    topology: &Arc<Topology>,
    cost: &CostModel,
    budget: f64,
    solver_cfg: &SolverConfig,
) -> Result<GreedyOutcome> {
    let n_links = topology.link_count();
    let mut removals: Vec<RemovalRecord> = Vec::new();
    let mut frozen: Vec<usize> = Vec::new();
    let mut is_frozen = vec![false; n_links];
    let mut solves = 0usize;

    // If computation alone busts a budget, no removal can ever help.
    if cost.comp().iter().any(|&c| c > budget + crate::cost::BUDGET_SLACK) {
        return Ok(GreedyOutcome {
            design: None,
            removals,
            failure: Some(GreedyFailure::BudgetUnreachable),
            node_costs: cost.comp().to_vec(),
            solves,
        });
    }

    let mut warm: Option<Vec<f64>> = None;
    loop {
        let solved = solve_min_rho_warm(topology, &frozen, warm.as_deref(), solver_cfg)?;
        solves += 1;
        let alpha = solved.alpha;
        let costs = cost.node_costs(topology, &alpha)?;

        if feasible(&costs, budget) {
            let design = MixingDesign::new(topology.clone(), alpha)?;
            return Ok(GreedyOutcome {
                design: Some(design),
                removals,
                failure: None,
                node_costs: costs,
                solves,
            });
        }

        // Candidates: activated, not frozen, incident to an over-budget
        // node; cheapest weight first, ties to the smaller link index.
        let over: Vec<bool> = costs
            .iter()
            .map(|&c| c > budget + crate::cost::BUDGET_SLACK)
            .collect();
        let mut candidates: Vec<(f64, usize)> = topology
            .links()
            .iter()
            .enumerate()
            .filter(|(e, link)| {
                !is_frozen[*e]
                    && alpha[*e].abs() > ACTIVATION_THRESHOLD
                    && (over[link.u] || over[link.v])
            })
            .map(|(e, _)| (alpha[e].abs(), e))
            .collect();
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        if candidates.is_empty() {
            return Ok(GreedyOutcome {
                design: None,
                removals,
                failure: Some(GreedyFailure::BudgetUnreachable),
                node_costs: costs,
                solves,
            });
        }

        // Take the cheapest candidate whose removal keeps the remaining
        // candidate graph (all non-frozen links) connected. Connectivity is
        // tested on the candidate graph, not the activation support, because
        // the re-solve may revive any link that is merely small.
        let mut chosen: Option<(f64, usize)> = None;
        for &(mag, e) in &candidates {
            let mut remaining = ActiveSet::from_mask(
                is_frozen.iter().map(|&fr| !fr).collect(),
            );
            remaining.set(e, false);
            if topology.is_connected(&remaining)? {
                chosen = Some((mag, e));
                break;
            }
        }

        match chosen {
            Some((mag, e)) => {
                is_frozen[e] = true;
                frozen.push(e);
                removals.push(RemovalRecord {
                    link_index: e,
                    link: topology.links()[e],
                    weight_magnitude: mag,
                });
                let mut next = alpha;
                next[e] = 0.0;
                warm = Some(next);
            }
            None => {
                // Every eligible removal disconnects.
                return Ok(GreedyOutcome {
                    design: None,
                    removals,
                    failure: Some(GreedyFailure::Disconnection),
                    node_costs: costs,
                    solves,
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::max_node_cost;
    use crate::topology::Topology;

    fn unit_cost(t: &Topology) -> CostModel {
        CostModel::uniform(t, 0.0, 1.0).unwrap()
    }

    #[test]
    fn star_fails_by_disconnection() {
        // A star needs all spokes to stay connected; with budget 2 the
        // center is over budget and every removal disconnects.
        let t = Arc::new(Topology::star(4, 0.0, 1.0).unwrap());
        let cost = unit_cost(&t);
        let out = greedy_sparsify(&t, &cost, 2.0, &SolverConfig::default()).unwrap();
        assert!(!out.is_success());
        assert_eq!(out.failure, Some(GreedyFailure::Disconnection));
        assert!(out.removals.is_empty());
    }

    #[test]
    fn k3_already_feasible() {
        let t = Arc::new(Topology::complete(3, 0.0, 1.0).unwrap());
        let cost = unit_cost(&t);
        let out = greedy_sparsify(&t, &cost, 2.0, &SolverConfig::default()).unwrap();
        assert!(out.is_success());
        assert!(out.removals.is_empty());
        let design = out.design.unwrap();
        assert_eq!(design.active_set().count_active(), 3);
        assert!(design.rho() < 1e-8);
    }

    #[test]
    fn k4_sparsifies_to_max_degree_two() {
        let t = Arc::new(Topology::complete(4, 0.0, 1.0).unwrap());
        let cost = unit_cost(&t);
        let out = greedy_sparsify(&t, &cost, 2.0, &SolverConfig::default()).unwrap();
        assert!(out.is_success(), "{:?}", out.failure);
        let design = out.design.unwrap();
        let active = design.active_set();
        let deg = t.node_degrees(&active).unwrap();
        assert!(deg.iter().all(|&d| d <= 2), "{deg:?}");
        assert!(t.is_connected(&active).unwrap());
        assert!(max_node_cost(&out.node_costs) <= 2.0 + 1e-9);
        assert!(design.rho() < 1.0);
    }

    #[test]
    fn budget_below_comp_is_unreachable() {
        let t = Arc::new(Topology::complete(3, 1.0, 1.0).unwrap());
        let cost = CostModel::from_topology(&t);
        let out = greedy_sparsify(&t, &cost, 0.5, &SolverConfig::default()).unwrap();
        assert_eq!(out.failure, Some(GreedyFailure::BudgetUnreachable));
        assert_eq!(out.solves, 0);
    }

    #[test]
    fn removal_history_is_ordered_by_eligible_minimum() {
        let t = Arc::new(Topology::random_geometric(10, 0.6, 0.0, 1.0, 13).unwrap());
        assert!(t.is_connected(&ActiveSet::all(t.link_count())).unwrap());
        let cost = unit_cost(&t);
        let out = greedy_sparsify(&t, &cost, 3.0, &SolverConfig::default()).unwrap();
        if out.is_success() {
            let design = out.design.as_ref().unwrap();
            let costs = cost.node_costs(&t, design.alpha()).unwrap();
            assert!(feasible(&costs, 3.0));
            assert!(t.is_connected(&design.active_set()).unwrap());
        }
        // Frozen links stay frozen: the final design must have exactly zero
        // weight on every removed link.
        if let Some(d) = &out.design {
            for r in &out.removals {
                assert_eq!(d.alpha()[r.link_index], 0.0);
            }
        }
    }

    #[test]
    fn rho_is_nondecreasing_along_removals() {
        let t = Arc::new(Topology::complete(5, 0.0, 1.0).unwrap());
        let cost = unit_cost(&t);
        let out = greedy_sparsify(&t, &cost, 2.0, &SolverConfig::default()).unwrap();
        assert!(out.is_success());
        // Replay the removal prefix and confirm the optimum never improves.
        let mut last = 0.0f64;
        for k in 0..=out.removals.len() {
            let frozen: Vec<usize> = out.removals[..k].iter().map(|r| r.link_index).collect();
            let solved =
                crate::solver::solve_min_rho(&t, &frozen, &SolverConfig::default()).unwrap();
            assert!(
                solved.rho_tilde >= last - 1e-3,
                "step {k}: {} < {}",
                solved.rho_tilde,
                last
            );
            last = solved.rho_tilde;
        }
    }
}

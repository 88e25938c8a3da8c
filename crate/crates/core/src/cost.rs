//! Per-node energy model and budget feasibility.
//!
//! A node pays its computation cost every iteration plus, for each incident
//! link whose weight is activated, that link's per-endpoint communication
//! cost. Activation uses the shared [`crate::ACTIVATION_THRESHOLD`].

use crate::spectral::MixingDistribution;
use crate::topology::{ActiveSet, LinkCost, Topology};
use crate::{Error, Result};

/// Slack used when comparing node costs against a budget, so a node sitting
/// exactly at the budget counts as feasible.
pub const BUDGET_SLACK: f64 = 1e-12;

/// Energy constants overlaid on a topology: per-node computation cost and
/// per-link per-endpoint communication cost, both in Wh per iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct CostModel {
    comp: Vec<f64>,
    comm: Vec<LinkCost>,
}

impl CostModel {
    pub fn new(comp: Vec<f64>, comm: Vec<LinkCost>) -> Result<Self> {
        if comp.iter().any(|&c| c < 0.0)
            || comm.iter().any(|c| c.paid_by_u < 0.0 || c.paid_by_v < 0.0)
        {
            return Err(Error::Config("negative cost".into()));
        }
        Ok(CostModel { comp, comm })
    }

    /// Take the costs the topology was parsed with.
    pub fn from_topology(t: &Topology) -> Self {
        CostModel {
            comp: t.comp_cost().to_vec(),
            comm: t.comm_cost().to_vec(),
        }
    }

    /// Uniform constants for every node and link of `t`.
    pub fn uniform(t: &Topology, comp: f64, comm: f64) -> Result<Self> {
        CostModel::new(
            vec![comp; t.node_count()],
            vec![LinkCost::symmetric(comm); t.link_count()],
        )
    }

    pub fn comp(&self) -> &[f64] {
        &self.comp
    }

    pub fn comm(&self) -> &[LinkCost] {
        &self.comm
    }

    fn check(&self, t: &Topology) -> Result<()> {
        if self.comp.len() != t.node_count() || self.comm.len() != t.link_count() {
            return Err(Error::Dimension(format!(
                "cost model sized for {} nodes / {} links, topology has {} / {}",
                self.comp.len(),
                self.comm.len(),
                t.node_count(),
                t.link_count()
            )));
        }
        Ok(())
    }

    /// Per-iteration energy of every node under the activation pattern of
    /// `alpha`: computation cost plus the communication cost of each
    /// activated incident link.
    pub fn node_costs(&self, t: &Topology, alpha: &[f64]) -> Result<Vec<f64>> {
        if alpha.len() != t.link_count() {
            return Err(Error::Dimension(format!(
                "{} weights for {} links",
                alpha.len(),
                t.link_count()
            )));
        }
        self.node_costs_active(t, &ActiveSet::from_weights(alpha))
    }

    /// Same as [`CostModel::node_costs`] but from an explicit activation set.
    pub fn node_costs_active(&self, t: &Topology, active: &ActiveSet) -> Result<Vec<f64>> {
        self.check(t)?;
        if active.len() != t.link_count() {
            return Err(Error::Dimension(format!(
                "{} mask entries for {} links",
                active.len(),
                t.link_count()
            )));
        }
        let mut costs = self.comp.clone();
        for ((link, cost), on) in t.links().iter().zip(&self.comm).zip(active.iter()) {
            if on {
                costs[link.u] += cost.paid_by_u;
                costs[link.v] += cost.paid_by_v;
            }
        }
        Ok(costs)
    }

    /// Expected per-node energy of a randomized design: the
    /// probability-weighted sum of per-design costs.
    pub fn expected_node_costs(&self, dist: &MixingDistribution) -> Result<Vec<f64>> {
        let m = dist.node_count();
        let mut acc = vec![0.0; m];
        for (design, p) in dist.entries() {
            let costs = self.node_costs(design.topology(), design.alpha())?;
            for (a, c) in acc.iter_mut().zip(&costs) {
                *a += p * c;
            }
        }
        Ok(acc)
    }
}

/// Largest per-node cost.
pub fn max_node_cost(costs: &[f64]) -> f64 {
    costs.iter().copied().fold(0.0, f64::max)
}

/// Sum over nodes.
pub fn total_cost(costs: &[f64]) -> f64 {
    costs.iter().sum()
}

/// Every node within the budget (up to [`BUDGET_SLACK`]).
pub fn feasible(costs: &[f64], budget: f64) -> bool {
    costs.iter().all(|&c| c <= budget + BUDGET_SLACK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Topology;

    #[test]
    fn three_active_links_at_reference_constants() {
        let t = Topology::star(4, 0.0, 0.0).unwrap();
        let cost = CostModel::uniform(&t, 0.0003342, 0.0138).unwrap();
        let costs = cost.node_costs(&t, &[0.2, 0.2, 0.2]).unwrap();
        assert!((costs[0] - 0.0417342).abs() < 1e-12);
        assert!((costs[1] - 0.0141342).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_pay_computation_only() {
        let t = Topology::complete(3, 0.5, 1.0).unwrap();
        let cost = CostModel::from_topology(&t);
        let costs = cost.node_costs(&t, &[0.0; 3]).unwrap();
        assert_eq!(costs, vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn star_center_pays_per_spoke() {
        let t = Topology::star(5, 0.25, 1.0).unwrap();
        let cost = CostModel::from_topology(&t);
        let costs = cost.node_costs(&t, &[1.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(costs[0], 3.25);
        assert_eq!(costs[4], 0.25);
    }

    #[test]
    fn feasibility_boundary() {
        assert!(feasible(&[1.0, 2.0, 3.0], 3.0));
        assert!(!feasible(&[1.0, 2.0, 3.0001], 3.0));
        assert!(feasible(&[], 0.0));
    }

    #[test]
    fn monotone_in_activation_support() {
        let t = Topology::complete(4, 0.1, 1.0).unwrap();
        let cost = CostModel::from_topology(&t);
        let small = cost.node_costs(&t, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let big = cost.node_costs(&t, &[1.0, 1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        for (s, b) in small.iter().zip(&big) {
            assert!(b >= s);
        }
    }

    #[test]
    fn total_energy_decomposes_per_link() {
        let t = Topology::parse("0 1 0.5 0.25\n1 2 1.0").unwrap();
        let cost = CostModel::from_topology(&t);
        let costs = cost.node_costs(&t, &[1.0, 1.0]).unwrap();
        // Each endpoint pays its own share: 0.5 + 0.25 + 1.0 + 1.0.
        assert!((total_cost(&costs) - 2.75).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_link_cost_orientation() {
        // Written as "2 1": the canonical link is (1,2) and the costs swap.
        let t = Topology::parse("0 1\n2 1 0.7 0.3").unwrap();
        let cost = CostModel::from_topology(&t);
        let costs = cost.node_costs(&t, &[0.0, 1.0]).unwrap();
        assert!((costs[1] - 0.3).abs() < 1e-12);
        assert!((costs[2] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn expected_costs_weight_by_probability() {
        use crate::spectral::{MixingDesign, MixingDistribution};
        use std::sync::Arc;
        let t = Arc::new(Topology::complete(3, 0.0, 1.0).unwrap());
        let cost = CostModel::from_topology(&t);
        let all = MixingDesign::new(t.clone(), vec![0.2; 3]).unwrap();
        let none = MixingDesign::new(t.clone(), vec![0.0; 3]).unwrap();
        let dist = MixingDistribution::new(vec![(all, 0.25), (none, 0.75)]).unwrap();
        let expected = cost.expected_node_costs(&dist).unwrap();
        for c in expected {
            assert!((c - 0.5).abs() < 1e-12); // 0.25 * 2 links * 1 Wh
        }
    }
}

//! Expander-based designs for a complete base topology: draw random
//! d-regular graphs until one passes the Ramanujan spectral test, then weight
//! every link `1/d`. The resulting design satisfies
//! `rho <= 4(d-1)/d^2` with degree exactly `d` at every node, so it meets any
//! budget that affords `d` links per node.

use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cost::CostModel;
use crate::spectral::{eigenvalues_symmetric, laplacian, MixingDesign};
use crate::topology::{ActiveSet, Topology};
use crate::{Error, Result};

/// Parameters for drawing random d-regular graphs.
#[derive(Clone, Copy, Debug)]
pub struct RegularGraphSpec {
    pub node_count: usize,
    pub degree: usize,
    pub rng_seed: u64,
    /// Cap on configuration-model restarts and on Ramanujan redraws. The
    /// restart count grows roughly like `exp((d-1)/2 + (d-1)^2/4)`, so raise
    /// this well above the default for `d >= 5`.
    pub max_attempts: usize,
}

impl RegularGraphSpec {
    pub fn new(node_count: usize, degree: usize, rng_seed: u64) -> Result<Self> {
        if degree < 2 || degree >= node_count {
            return Err(Error::Config(format!(
                "degree must satisfy 2 <= d < m, got d = {degree}, m = {node_count}"
            )));
        }
        if node_count * degree % 2 != 0 {
            return Err(Error::Config(format!(
                "m * d must be even, got m = {node_count}, d = {degree}"
            )));
        }
        Ok(RegularGraphSpec {
            node_count,
            degree,
            rng_seed,
            max_attempts: 1000,
        })
    }

    pub fn with_max_attempts(mut self, max_attempts: usize) -> Self {
        self.max_attempts = max_attempts;
        self
    }
}

/// Draw a uniform-ish simple d-regular graph via the configuration model:
/// shuffle the stub multiset, pair consecutive stubs, and restart from
/// scratch whenever a self-loop or duplicate edge shows up.
pub fn random_regular(spec: &RegularGraphSpec) -> Result<Topology> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    random_regular_with_rng(spec, &mut rng)
}

fn random_regular_with_rng(spec: &RegularGraphSpec, rng: &mut ChaCha8Rng) -> Result<Topology> {
    let m = spec.node_count;
    let d = spec.degree;
    let mut stubs: Vec<usize> = (0..m).flat_map(|i| std::iter::repeat(i).take(d)).collect();
    for _ in 0..spec.max_attempts {
        stubs.shuffle(rng);
        let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(m * d / 2);
        let mut ok = true;
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            if a == b || !seen.insert((a.min(b), a.max(b))) {
                ok = false;
                break;
            }
        }
        if ok {
            let links: Vec<(usize, usize)> = seen.into_iter().collect();
            let n = links.len();
            let t = Topology::new(
                m,
                links,
                vec![crate::topology::LinkCost::symmetric(0.0); n],
                vec![0.0; m],
            )?;
            return Ok(t);
        }
    }
    Err(Error::AttemptsExhausted {
        attempts: spec.max_attempts,
        what: format!("drawing a simple {d}-regular graph on {m} nodes"),
    })
}

/// Spectral test: every Laplacian eigenvalue from the second-smallest up
/// must lie in `[d - 2 sqrt(d-1), d + 2 sqrt(d-1)]` (closed, with 1e-9
/// slack). Requires a regular input. For `d >= 3` a disconnected graph has
/// `lambda_2 = 0` below the lower bound and fails; for `d = 2` the lower
/// bound is 0 and the test is vacuous.
pub fn is_ramanujan(t: &Topology) -> Result<bool> {
    let degrees = t.node_degrees(&ActiveSet::all(t.link_count()))?;
    let d = degrees[0];
    for (node, &got) in degrees.iter().enumerate() {
        if got != d {
            return Err(Error::NotRegular {
                node,
                got,
                expected: d,
            });
        }
    }
    let l = laplacian(t, &vec![1.0; t.link_count()])?;
    let eig = eigenvalues_symmetric(&l)?;
    let radius = 2.0 * ((d as f64) - 1.0).sqrt();
    let lo = d as f64 - radius - 1e-9;
    let hi = d as f64 + radius + 1e-9;
    Ok(eig.iter().skip(1).all(|&x| x >= lo && x <= hi))
}

/// Draw d-regular graphs until one passes [`is_ramanujan`], then emit the
/// design with weight `1/d` on its links over a complete base topology.
/// The returned design has `rho <= 4(d-1)/d^2` (vacuous at `d = 2`).
pub fn ramanujan_mixing(spec: &RegularGraphSpec) -> Result<MixingDesign> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let m = spec.node_count;
    let d = spec.degree;
    for _ in 0..spec.max_attempts {
        let h = random_regular_with_rng(spec, &mut rng)?;
        if !is_ramanujan(&h)? {
            continue;
        }
        let base = Arc::new(Topology::complete(m, 0.0, 0.0)?);
        let w = 1.0 / d as f64;
        let mut alpha = vec![0.0f64; base.link_count()];
        for link in h.links() {
            let idx = base
                .link_index(link.u, link.v)
                .expect("complete base contains every pair");
            alpha[idx] = w;
        }
        return MixingDesign::new(base, alpha);
    }
    Err(Error::AttemptsExhausted {
        attempts: spec.max_attempts,
        what: format!("finding a Ramanujan {d}-regular graph on {m} nodes"),
    })
}

/// The largest per-node degree every node can afford:
/// `d = min_i floor((budget - comp_i) / comm_i)`, where `comm_i` is node
/// `i`'s uniform per-neighbor cost. Requires every node's incident links to
/// cost it the same amount (the special case this construction assumes) and
/// `budget >= comp_i` for all `i`. The result is capped at `m - 1`.
pub fn degree_budget(t: &Topology, cost: &CostModel, budget: f64) -> Result<usize> {
    let m = t.node_count();
    if cost.comp().len() != m || cost.comm().len() != t.link_count() {
        return Err(Error::Dimension(
            "cost model does not match topology".into(),
        ));
    }
    let mut d = m - 1;
    for node in 0..m {
        let comp = cost.comp()[node];
        if budget < comp {
            return Err(Error::BudgetTooSmall {
                budget,
                comp,
                node,
            });
        }
        let mut per_neighbor: Option<f64> = None;
        for e in t.incident_links(node) {
            let c = cost.comm()[e].paid_by(&t.links()[e], node);
            match per_neighbor {
                None => per_neighbor = Some(c),
                Some(prev) if (prev - c).abs() > 1e-12 => {
                    return Err(Error::Config(format!(
                        "node {node} has non-uniform link costs ({prev} vs {c}); the degree-budget formula needs c^b_ij = c^b_i"
                    )));
                }
                _ => {}
            }
        }
        let node_d = match per_neighbor {
            Some(c) if c > 0.0 => ((budget - comp) / c).floor() as usize,
            // Free (or absent) links never bind the budget.
            _ => m - 1,
        };
        d = d.min(node_d);
    }
    Ok(d)
}

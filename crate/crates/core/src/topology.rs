//! Base topologies: node sets, candidate links with per-endpoint energy
//! costs, and the incidence/degree/connectivity primitives everything else
//! is built on.
//!
//! Topologies are immutable after construction and cheap to share behind an
//! `Arc`, so independent design runs can work off the same base graph.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, ACTIVATION_THRESHOLD};

/// An undirected candidate link in canonical `u < v` orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Link {
    pub u: usize,
    pub v: usize,
}

impl Link {
    /// Canonicalize an endpoint pair. Self-loops are rejected.
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(Error::Config(format!("self-loop at node {a}")));
        }
        Ok(Link {
            u: a.min(b),
            v: a.max(b),
        })
    }

    /// Whether `node` is one of the two endpoints.
    pub fn touches(&self, node: usize) -> bool {
        self.u == node || self.v == node
    }
}

/// Per-link communication cost, one value per endpoint: `paid_by_u` is what
/// node `u` pays per iteration while the link is activated, `paid_by_v` what
/// node `v` pays. Symmetric links carry the same value twice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkCost {
    pub paid_by_u: f64,
    pub paid_by_v: f64,
}

impl LinkCost {
    pub fn symmetric(c: f64) -> Self {
        LinkCost {
            paid_by_u: c,
            paid_by_v: c,
        }
    }

    /// Cost paid by `node`, which must be an endpoint of `link`.
    pub fn paid_by(&self, link: &Link, node: usize) -> f64 {
        if node == link.u {
            self.paid_by_u
        } else {
            self.paid_by_v
        }
    }
}

/// Defaults applied while parsing an edge-list document: links without an
/// explicit communication cost get `comm`, nodes without an explicit
/// computation cost get `comp`. In-document `#comm_cost` / `#comp_cost`
/// headers take precedence over these.
#[derive(Clone, Copy, Debug)]
pub struct ParseDefaults {
    pub comm: f64,
    pub comp: f64,
}

impl Default for ParseDefaults {
    fn default() -> Self {
        ParseDefaults {
            comm: 0.0138,
            comp: 0.0,
        }
    }
}

/// An immutable base topology: `m` nodes, a canonical sorted list of
/// candidate links, per-link communication costs and per-node computation
/// costs (all in Wh per iteration).
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    node_count: usize,
    links: Vec<Link>,
    comm_cost: Vec<LinkCost>,
    comp_cost: Vec<f64>,
}

impl Topology {
    /// Build a topology from raw parts. Links are canonicalized and sorted;
    /// duplicates, self-loops, negative costs and `m < 2` are rejected.
    pub fn new(
        node_count: usize,
        links: Vec<(usize, usize)>,
        comm_cost: Vec<LinkCost>,
        comp_cost: Vec<f64>,
    ) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::Config(format!(
                "need at least 2 nodes, got {node_count}"
            )));
        }
        if links.len() != comm_cost.len() {
            return Err(Error::Dimension(format!(
                "{} links but {} comm costs",
                links.len(),
                comm_cost.len()
            )));
        }
        if comp_cost.len() != node_count {
            return Err(Error::Dimension(format!(
                "{} nodes but {} comp costs",
                node_count,
                comp_cost.len()
            )));
        }
        let mut canon: Vec<(Link, LinkCost)> = Vec::with_capacity(links.len());
        for (&(a, b), &cost) in links.iter().zip(&comm_cost) {
            let link = Link::new(a, b)?;
            if link.v >= node_count {
                return Err(Error::Config(format!(
                    "link ({a}, {b}) references node {} outside 0..{node_count}",
                    link.v
                )));
            }
            // The cost orientation follows the canonical link orientation.
            let cost = if a <= b {
                cost
            } else {
                LinkCost {
                    paid_by_u: cost.paid_by_v,
                    paid_by_v: cost.paid_by_u,
                }
            };
            canon.push((link, cost));
        }
        canon.sort_by_key(|(l, _)| *l);
        for w in canon.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Config(format!(
                    "duplicate link ({}, {})",
                    w[0].0.u, w[0].0.v
                )));
            }
        }
        for (_, c) in &canon {
            if c.paid_by_u < 0.0 || c.paid_by_v < 0.0 {
                return Err(Error::Config("negative communication cost".into()));
            }
        }
        if comp_cost.iter().any(|&c| c < 0.0) {
            return Err(Error::Config("negative computation cost".into()));
        }
        let (links, comm_cost) = canon.into_iter().unzip();
        Ok(Topology {
            node_count,
            links,
            comm_cost,
            comp_cost,
        })
    }

    /// Same link set for every node pair: the complete graph `K_m` with
    /// uniform costs.
    pub fn complete(m: usize, comp: f64, comm: f64) -> Result<Self> {
        let mut links = Vec::new();
        for u in 0..m {
            for v in (u + 1)..m {
                links.push((u, v));
            }
        }
        let n = links.len();
        Topology::new(m, links, vec![LinkCost::symmetric(comm); n], vec![comp; m])
    }

    /// Path `0 - 1 - ... - m-1` with uniform costs.
    pub fn path(m: usize, comp: f64, comm: f64) -> Result<Self> {
        let links: Vec<_> = (0..m.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        let n = links.len();
        Topology::new(m, links, vec![LinkCost::symmetric(comm); n], vec![comp; m])
    }

    /// Star with node 0 at the center.
    pub fn star(m: usize, comp: f64, comm: f64) -> Result<Self> {
        let links: Vec<_> = (1..m).map(|v| (0, v)).collect();
        let n = links.len();
        Topology::new(m, links, vec![LinkCost::symmetric(comm); n], vec![comp; m])
    }

    /// Cycle on `m` nodes.
    pub fn cycle(m: usize, comp: f64, comm: f64) -> Result<Self> {
        let links: Vec<_> = (0..m).map(|i| (i, (i + 1) % m)).collect();
        let n = links.len();
        Topology::new(m, links, vec![LinkCost::symmetric(comm); n], vec![comp; m])
    }

    /// Random geometric graph: `m` points uniform in the unit square, linked
    /// when within `radius`. Deterministic in `seed`. May be disconnected;
    /// callers that need connectivity should check [`Topology::is_connected`]
    /// and retry with another seed or a larger radius.
    pub fn random_geometric(m: usize, radius: f64, comp: f64, comm: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<(f64, f64)> = (0..m)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let mut links = Vec::new();
        let r2 = radius * radius;
        for u in 0..m {
            for v in (u + 1)..m {
                let dx = points[u].0 - points[v].0;
                let dy = points[u].1 - points[v].1;
                if dx * dx + dy * dy <= r2 {
                    links.push((u, v));
                }
            }
        }
        let n = links.len();
        Topology::new(m, links, vec![LinkCost::symmetric(comm); n], vec![comp; m])
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn comm_cost(&self) -> &[LinkCost] {
        &self.comm_cost
    }

    pub fn comp_cost(&self) -> &[f64] {
        &self.comp_cost
    }

    /// Index of the canonical link between `a` and `b`, if it is a candidate.
    pub fn link_index(&self, a: usize, b: usize) -> Option<usize> {
        let link = Link::new(a, b).ok()?;
        self.links.binary_search(&link).ok()
    }

    /// Indices of links incident to `node`.
    pub fn incident_links(&self, node: usize) -> Vec<usize> {
        self.links
            .iter()
            .enumerate()
            .filter(|(_, l)| l.touches(node))
            .map(|(i, _)| i)
            .collect()
    }

    /// Oriented incidence matrix `B` (`m x |E|`): column `j` has `+1` at the
    /// canonical source `u` of link `j` and `-1` at its target `v`. The
    /// orientation is immaterial to `B diag(alpha) B^T`.
    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.node_count, self.links.len());
        for (j, link) in self.links.iter().enumerate() {
            b[(link.u, j)] = 1.0;
            b[(link.v, j)] = -1.0;
        }
        b
    }

    /// Number of active incident links per node.
    pub fn node_degrees(&self, active: &ActiveSet) -> Result<Vec<usize>> {
        self.check_mask(active)?;
        let mut deg = vec![0usize; self.node_count];
        for (link, on) in self.links.iter().zip(active.mask.iter()) {
            if *on {
                deg[link.u] += 1;
                deg[link.v] += 1;
            }
        }
        Ok(deg)
    }

    /// Whether the subgraph of active links spans all nodes in a single
    /// component. Union-find on the discrete support; a weight tolerance
    /// plays no role here.
    pub fn is_connected(&self, active: &ActiveSet) -> Result<bool> {
        self.check_mask(active)?;
        let mut uf = UnionFind::new(self.node_count);
        for (link, on) in self.links.iter().zip(active.mask.iter()) {
            if *on {
                uf.union(link.u, link.v);
            }
        }
        Ok(uf.component_count() == 1)
    }

    fn check_mask(&self, active: &ActiveSet) -> Result<()> {
        if active.len() != self.links.len() {
            return Err(Error::Dimension(format!(
                "active mask has {} entries for {} links",
                active.len(),
                self.links.len()
            )));
        }
        Ok(())
    }

    /// Parse an edge-list document with default costs for anything the
    /// document leaves out. See [`Topology::parse`] for the format.
    pub fn parse_with(text: &str, defaults: &ParseDefaults) -> Result<Self> {
        let mut doc_comm: Option<f64> = None;
        let mut doc_comp: Option<f64> = None;
        let mut node_comp: BTreeMap<usize, f64> = BTreeMap::new();
        let mut raw_links: Vec<(usize, usize, Option<f64>, Option<f64>)> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: lineno, msg };
            if let Some(rest) = line.strip_prefix('#') {
                let mut toks = rest.split_whitespace();
                match toks.next() {
                    Some("comm_cost") => {
                        let v: f64 = toks
                            .next()
                            .ok_or_else(|| err("#comm_cost needs a value".into()))?
                            .parse()
                            .map_err(|e| err(format!("bad #comm_cost value: {e}")))?;
                        doc_comm = Some(v);
                    }
                    Some("comp_cost") => {
                        let v: f64 = toks
                            .next()
                            .ok_or_else(|| err("#comp_cost needs a value".into()))?
                            .parse()
                            .map_err(|e| err(format!("bad #comp_cost value: {e}")))?;
                        doc_comp = Some(v);
                    }
                    Some("node") => {
                        let i: usize = toks
                            .next()
                            .ok_or_else(|| err("#node needs an index".into()))?
                            .parse()
                            .map_err(|e| err(format!("bad #node index: {e}")))?;
                        let v: f64 = toks
                            .next()
                            .ok_or_else(|| err("#node needs a cost".into()))?
                            .parse()
                            .map_err(|e| err(format!("bad #node cost: {e}")))?;
                        node_comp.insert(i, v);
                    }
                    _ => {} // plain comment
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < 2 || fields.len() > 4 {
                return Err(err(format!(
                    "expected 'u v [c_b [c_b_reverse]]', got {} fields",
                    fields.len()
                )));
            }
            let u: usize = fields[0]
                .parse()
                .map_err(|e| err(format!("bad node id '{}': {e}", fields[0])))?;
            let v: usize = fields[1]
                .parse()
                .map_err(|e| err(format!("bad node id '{}': {e}", fields[1])))?;
            if u == v {
                return Err(err(format!("self-loop at node {u}")));
            }
            let c1 = match fields.get(2) {
                Some(s) => Some(
                    s.parse::<f64>()
                        .map_err(|e| err(format!("bad cost '{s}': {e}")))?,
                ),
                None => None,
            };
            let c2 = match fields.get(3) {
                Some(s) => Some(
                    s.parse::<f64>()
                        .map_err(|e| err(format!("bad cost '{s}': {e}")))?,
                ),
                None => None,
            };
            raw_links.push((u, v, c1, c2));
        }

        let comm_default = doc_comm.unwrap_or(defaults.comm);
        let comp_default = doc_comp.unwrap_or(defaults.comp);

        let mut max_id = 0usize;
        let mut seen: Vec<bool> = Vec::new();
        let mark = |i: usize, seen: &mut Vec<bool>| {
            if i >= seen.len() {
                seen.resize(i + 1, false);
            }
            seen[i] = true;
        };
        for &(u, v, _, _) in &raw_links {
            mark(u, &mut seen);
            mark(v, &mut seen);
            max_id = max_id.max(u).max(v);
        }
        for (&i, _) in &node_comp {
            mark(i, &mut seen);
            max_id = max_id.max(i);
        }
        if seen.len() < 2 {
            return Err(Error::Config("fewer than 2 nodes".into()));
        }
        if let Some(hole) = seen.iter().position(|&s| !s) {
            return Err(Error::Config(format!(
                "node ids are not dense: node {hole} never appears (ids are 0-based and must be contiguous)"
            )));
        }
        let node_count = max_id + 1;

        let links: Vec<(usize, usize)> = raw_links.iter().map(|&(u, v, _, _)| (u, v)).collect();
        let comm: Vec<LinkCost> = raw_links
            .iter()
            .map(|&(_, _, c1, c2)| {
                let forward = c1.unwrap_or(comm_default);
                LinkCost {
                    paid_by_u: forward,
                    paid_by_v: c2.unwrap_or(forward),
                }
            })
            .collect();
        let comp: Vec<f64> = (0..node_count)
            .map(|i| node_comp.get(&i).copied().unwrap_or(comp_default))
            .collect();
        Topology::new(node_count, links, comm, comp)
    }

    /// Parse an edge-list document.
    ///
    /// Format (UTF-8, one record per line):
    /// - `u v` / `u v c_b` / `u v c_b_uv c_b_vu` — a candidate link with
    ///   optional per-endpoint communication costs in Wh,
    /// - `#comm_cost <wh>` — document-level default for links without a cost,
    /// - `#comp_cost <wh>` — document-level per-node computation cost,
    /// - `#node <i> <wh>` — computation cost override for one node,
    /// - any other `#` line is a comment.
    ///
    /// Node ids must be dense 0-based integers; sparse ids are rejected
    /// rather than remapped. Missing communication costs default to
    /// 0.0138 Wh and missing computation costs to 0 Wh.
    pub fn parse(text: &str) -> Result<Self> {
        Topology::parse_with(text, &ParseDefaults::default())
    }

    /// Serialize back to the edge-list format in canonical sorted link order.
    /// Every node gets an explicit `#node` line so isolated nodes and
    /// per-node costs survive a round trip.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# {} nodes, {} links",
            self.node_count,
            self.links.len()
        );
        for (i, c) in self.comp_cost.iter().enumerate() {
            let _ = writeln!(out, "#node {i} {c}");
        }
        for (link, cost) in self.links.iter().zip(&self.comm_cost) {
            if cost.paid_by_u == cost.paid_by_v {
                let _ = writeln!(out, "{} {} {}", link.u, link.v, cost.paid_by_u);
            } else {
                let _ = writeln!(
                    out,
                    "{} {} {} {}",
                    link.u, link.v, cost.paid_by_u, cost.paid_by_v
                );
            }
        }
        out
    }

    /// Convenience for sharing across design runs.
    pub fn into_shared(self) -> Arc<Topology> {
        Arc::new(self)
    }
}

/// Boolean activation mask over the candidate links of a topology.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActiveSet {
    mask: Vec<bool>,
}

impl ActiveSet {
    pub fn all(n: usize) -> Self {
        ActiveSet {
            mask: vec![true; n],
        }
    }

    pub fn none(n: usize) -> Self {
        ActiveSet {
            mask: vec![false; n],
        }
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        ActiveSet { mask }
    }

    /// Activation pattern of a weight vector: a link is on iff its weight
    /// magnitude exceeds [`ACTIVATION_THRESHOLD`].
    pub fn from_weights(alpha: &[f64]) -> Self {
        ActiveSet {
            mask: alpha.iter().map(|a| a.abs() > ACTIVATION_THRESHOLD).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn set(&mut self, i: usize, on: bool) {
        self.mask[i] = on;
    }

    pub fn count_active(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.mask.iter().copied()
    }
}

/// Union-find with path halving and union by size.
struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    components: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
            components: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.components -= 1;
    }

    fn component_count(&self) -> usize {
        self.components
    }
}

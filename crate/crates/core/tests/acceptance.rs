//! Acceptance suite: one test per release criterion, each printing a
//! `PASS` line with the measured numbers (run with `--nocapture` to see
//! them). Tolerances are pinned in the assertions, not configurable.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use mixmat::bilevel::{iterations_to_epsilon, ConvergenceModel};
use mixmat::cost::{feasible, max_node_cost, CostModel};
use mixmat::dpsgd::{consensus_contraction_factors, make_quadratic_task, run_dpsgd, SimConfig};
use mixmat::ramanujan::{ramanujan_mixing, RegularGraphSpec};
use mixmat::solver::{brute_force_min_rho, solve_min_rho, solve_min_rho_warm, SolverConfig};
use mixmat::sparsifier::{greedy_sparsify, GreedyFailure, GreedyOutcome};
use mixmat::spectral::{validate_rho_bounds, MixingDesign, MixingDistribution};
use mixmat::topology::{ActiveSet, LinkCost, Topology};
use mixmat::ACTIVATION_THRESHOLD;

fn shared(t: Topology) -> Arc<Topology> {
    Arc::new(t)
}

/// First `count` seeds whose 33-node geometric graph is connected.
fn connected_rgg33(radius: f64, count: usize) -> Vec<(u64, Arc<Topology>)> {
    let mut out = Vec::new();
    let mut seed = 0u64;
    while out.len() < count {
        let t = Topology::random_geometric(33, radius, 0.0, 1.0, seed).unwrap();
        if t.is_connected(&ActiveSet::all(t.link_count())).unwrap() {
            out.push((seed, shared(t)));
        }
        seed += 1;
    }
    out
}

// Criterion 1: every emitted expander design obeys rho <= 4(d-1)/d^2 with
// exact degree d at every node, across m in {20, 50, 100}, d in {3..6},
// 20 seeds each.
#[test]
fn acceptance_1_ramanujan_guarantee() {
    let start = Instant::now();
    let cases: Vec<(usize, usize, u64)> = [20usize, 50, 100]
        .iter()
        .flat_map(|&m| (3usize..=6).map(move |d| (m, d)))
        .flat_map(|(m, d)| (0u64..20).map(move |s| (m, d, s)))
        .collect();
    let checked: usize = cases
        .par_iter()
        .map(|&(m, d, seed)| {
            let spec = RegularGraphSpec::new(m, d, seed)
                .unwrap()
                .with_max_attempts(1_000_000);
            let design = ramanujan_mixing(&spec)
                .unwrap_or_else(|e| panic!("m={m} d={d} seed={seed}: {e}"));
            let bound = 4.0 * (d as f64 - 1.0) / (d as f64 * d as f64);
            assert!(
                design.rho() <= bound + 1e-9,
                "m={m} d={d} seed={seed}: rho {} > bound {bound}",
                design.rho()
            );
            let degrees = design
                .topology()
                .node_degrees(&design.active_set())
                .unwrap();
            assert!(
                degrees.iter().all(|&deg| deg == d),
                "m={m} d={d} seed={seed}: degrees {degrees:?}"
            );
            1
        })
        .sum();
    assert_eq!(checked, 240);
    println!(
        "acceptance 1 (Ramanujan guarantee): PASS — 240 designs within bound, {:.1} s",
        start.elapsed().as_secs_f64()
    );
}

/// Apply a random node relabeling to an edge template.
fn relabel(m: usize, edges: &[(usize, usize)], rng: &mut ChaCha8Rng) -> Topology {
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(rng);
    let links: Vec<(usize, usize)> = edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
    let n = links.len();
    Topology::new(m, links, vec![LinkCost::symmetric(1.0); n], vec![0.0; m]).unwrap()
}

// Criterion 2: the subgradient solver reaches the known optima (P3 = 0.5,
// K_m ~ 0) and stays within 1e-2 of the grid-search oracle on 20 random
// connected graphs with at most 4 free links.
#[test]
fn acceptance_2_solver_optimality() {
    let start = Instant::now();
    let cfg = SolverConfig::default();

    let p3 = Topology::path(3, 0.0, 1.0).unwrap();
    let solved = solve_min_rho(&p3, &[], &cfg).unwrap();
    assert!(
        (solved.rho_tilde - 0.5).abs() <= 1e-3,
        "P3: {}",
        solved.rho_tilde
    );

    for m in 2..=10 {
        let t = Topology::complete(m, 0.0, 1.0).unwrap();
        let solved = solve_min_rho(&t, &[], &cfg).unwrap();
        assert!(solved.rho_tilde <= 1e-4, "K{m}: {}", solved.rho_tilde);
    }

    // 20 random connected graphs: templates relabeled by a seeded RNG, with
    // grid resolution chosen per free-link count.
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let path3: &[(usize, usize)] = &[(0, 1), (1, 2)];
    let path4: &[(usize, usize)] = &[(0, 1), (1, 2), (2, 3)];
    let star4: &[(usize, usize)] = &[(0, 1), (0, 2), (0, 3)];
    let tri: &[(usize, usize)] = &[(0, 1), (1, 2), (0, 2)];
    let cyc4: &[(usize, usize)] = &[(0, 1), (1, 2), (2, 3), (0, 3)];
    let paw: &[(usize, usize)] = &[(0, 1), (1, 2), (0, 2), (2, 3)];
    let mut cases: Vec<(Topology, f64)> = Vec::new();
    for _ in 0..6 {
        cases.push((relabel(3, path3, &mut rng), 1e-3));
    }
    for _ in 0..3 {
        cases.push((relabel(4, path4, &mut rng), 5e-3));
    }
    for _ in 0..3 {
        cases.push((relabel(4, star4, &mut rng), 5e-3));
    }
    for _ in 0..2 {
        cases.push((relabel(3, tri, &mut rng), 5e-3));
    }
    for _ in 0..3 {
        cases.push((relabel(4, cyc4, &mut rng), 1e-2));
    }
    for _ in 0..3 {
        cases.push((relabel(4, paw, &mut rng), 1e-2));
    }
    assert_eq!(cases.len(), 20);

    let worst: f64 = cases
        .par_iter()
        .map(|(t, res)| {
            let solved = solve_min_rho(t, &[], &cfg).unwrap();
            let oracle = brute_force_min_rho(t, &[], *res).unwrap();
            let gap = (solved.rho_tilde - oracle.rho_tilde).abs();
            assert!(
                gap <= 1e-2,
                "links={:?}: solver {} vs oracle {} (res {res})",
                t.links(),
                solved.rho_tilde,
                oracle.rho_tilde
            );
            gap
        })
        .reduce(|| 0.0, f64::max);

    println!(
        "acceptance 2 (solver optimality): PASS — worst solver/oracle gap {:.2e}, {:.1} s",
        worst,
        start.elapsed().as_secs_f64()
    );
}

// Criterion 3: the spectral bounds behind rho hold on 10 random designs and
// 3 two-point distributions: Jensen direction, 1e4 random-X contraction
// ratios below rho, and the eigenvector-aligned X attaining rho (p = 1-rho).
#[test]
fn acceptance_3_lemma_suite() {
    let start = Instant::now();
    let trials = 10_000;
    let mut reports = Vec::new();

    for k in 0..10u64 {
        let m = 4 + (k as usize % 5);
        let t = shared(Topology::random_geometric(m, 0.9, 0.0, 1.0, 100 + k).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(200 + k);
        let alpha: Vec<f64> = (0..t.link_count())
            .map(|_| rng.random_range(-0.2..0.6))
            .collect();
        let design = MixingDesign::new(t, alpha).unwrap();
        let dist = MixingDistribution::deterministic(design);
        reports.push(validate_rho_bounds(&dist, trials, 300 + k).unwrap());
    }

    // Two-point distributions: perfect-vs-idle on K3, a closed-form m=2
    // mixture, and two random designs on a 6-node graph.
    let k3 = shared(Topology::complete(3, 0.0, 1.0).unwrap());
    let pair1 = MixingDistribution::new(vec![
        (MixingDesign::new(k3.clone(), vec![1.0 / 3.0; 3]).unwrap(), 0.5),
        (MixingDesign::new(k3.clone(), vec![0.0; 3]).unwrap(), 0.5),
    ])
    .unwrap();
    let k2 = shared(Topology::complete(2, 0.0, 1.0).unwrap());
    let pair2 = MixingDistribution::new(vec![
        (MixingDesign::new(k2.clone(), vec![0.5]).unwrap(), 0.5),
        (MixingDesign::new(k2.clone(), vec![0.0]).unwrap(), 0.5),
    ])
    .unwrap();
    let g6 = shared(Topology::random_geometric(6, 0.8, 0.0, 1.0, 77).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    let a1: Vec<f64> = (0..g6.link_count())
        .map(|_| rng.random_range(0.0..0.5))
        .collect();
    let a2: Vec<f64> = (0..g6.link_count())
        .map(|_| rng.random_range(-0.1..0.4))
        .collect();
    let pair3 = MixingDistribution::new(vec![
        (MixingDesign::new(g6.clone(), a1).unwrap(), 0.25),
        (MixingDesign::new(g6, a2).unwrap(), 0.75),
    ])
    .unwrap();
    for (i, dist) in [pair1, pair2, pair3].iter().enumerate() {
        reports.push(validate_rho_bounds(dist, trials, 400 + i as u64).unwrap());
    }

    for (i, r) in reports.iter().enumerate() {
        assert!(r.jensen_ok, "case {i}: Jensen direction failed: {r:?}");
        assert!(
            r.ratio_ok,
            "case {i}: a sampled ratio exceeded rho: {r:?}"
        );
        assert!(
            r.attained_ok,
            "case {i}: aligned X missed rho: {r:?}"
        );
    }
    println!(
        "acceptance 3 (rho bound suite): PASS — 13 distributions x {trials} trials, {:.1} s",
        start.elapsed().as_secs_f64()
    );
}

/// Re-derive every greedy choice from scratch and check it against the
/// recorded history: each removed link must be the cheapest activated link
/// incident to an over-budget node whose removal keeps the candidate graph
/// connected, given the same warm-started solve sequence.
fn replay_history(
    t: &Arc<Topology>,
    cost: &CostModel,
    budget: f64,
    cfg: &SolverConfig,
    outcome: &GreedyOutcome,
) {
    let mut frozen: Vec<usize> = Vec::new();
    let mut warm: Option<Vec<f64>> = None;
    for record in &outcome.removals {
        let solved = solve_min_rho_warm(t, &frozen, warm.as_deref(), cfg).unwrap();
        let costs = cost.node_costs(t, &solved.alpha).unwrap();
        assert!(!feasible(&costs, budget));
        let mut candidates: Vec<(f64, usize)> = t
            .links()
            .iter()
            .enumerate()
            .filter(|(e, link)| {
                !frozen.contains(e)
                    && solved.alpha[*e].abs() > ACTIVATION_THRESHOLD
                    && (costs[link.u] > budget + 1e-12 || costs[link.v] > budget + 1e-12)
            })
            .map(|(e, _)| (solved.alpha[e].abs(), e))
            .collect();
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let expected = candidates
            .iter()
            .find(|&&(_, e)| {
                let mut mask: Vec<bool> = (0..t.link_count())
                    .map(|i| !frozen.contains(&i))
                    .collect();
                mask[e] = false;
                t.is_connected(&ActiveSet::from_mask(mask)).unwrap()
            })
            .expect("replay found no removable link where history has one");
        assert_eq!(
            expected.1, record.link_index,
            "replayed choice disagrees with history"
        );
        assert!((expected.0 - record.weight_magnitude).abs() < 1e-12);
        let mut next = solved.alpha;
        next[record.link_index] = 0.0;
        warm = Some(next);
        frozen.push(record.link_index);
    }
}

// Criterion 4: greedy failure and success semantics. The star must fail by
// disconnection at budget 2, K4 must sparsify to a connected max-degree-2
// design, and every success on 20 random 33-node geometric graphs must pass
// independent feasibility, connectivity and rho checks with a replayable
// removal history.
#[test]
fn acceptance_4_greedy_semantics() {
    let start = Instant::now();
    let cfg = SolverConfig::default();

    let star = shared(Topology::star(4, 0.0, 1.0).unwrap());
    let out = greedy_sparsify(&star, &CostModel::from_topology(&star), 2.0, &cfg).unwrap();
    assert_eq!(out.failure, Some(GreedyFailure::Disconnection));

    let k4 = shared(Topology::complete(4, 0.0, 1.0).unwrap());
    let out = greedy_sparsify(&k4, &CostModel::from_topology(&k4), 2.0, &cfg).unwrap();
    assert!(out.is_success());
    let design = out.design.as_ref().unwrap();
    let active = design.active_set();
    assert!(k4.is_connected(&active).unwrap());
    assert!(k4
        .node_degrees(&active)
        .unwrap()
        .iter()
        .all(|&d| d <= 2));
    replay_history(&k4, &CostModel::from_topology(&k4), 2.0, &cfg, &out);

    // The ranking solves only need enough accuracy to order link weights.
    let fast_cfg = SolverConfig {
        tolerance: 1e-5,
        ..Default::default()
    };
    let graphs = connected_rgg33(0.35, 20);
    let results: Vec<(u64, usize, bool)> = graphs
        .par_iter()
        .map(|(seed, t)| {
            let cost = CostModel::uniform(t, 0.0, 1.0).unwrap();
            let maxdeg = *t
                .node_degrees(&ActiveSet::all(t.link_count()))
                .unwrap()
                .iter()
                .max()
                .unwrap();
            let budget = (maxdeg as f64 / 2.0).max(3.0);
            let out = greedy_sparsify(t, &cost, budget, &fast_cfg).unwrap();
            if out.is_success() {
                let design = out.design.as_ref().unwrap();
                let costs = cost.node_costs(t, design.alpha()).unwrap();
                assert!(feasible(&costs, budget), "seed {seed}: budget recheck");
                assert!(
                    t.is_connected(&design.active_set()).unwrap(),
                    "seed {seed}: connectivity recheck"
                );
                assert!(
                    design.rho() < 1.0,
                    "seed {seed}: rho {} not below 1",
                    design.rho()
                );
                replay_history(t, &cost, budget, &fast_cfg, &out);
            }
            (*seed, out.removals.len(), out.is_success())
        })
        .collect();
    let successes = results.iter().filter(|(_, _, ok)| *ok).count();
    assert!(
        successes >= 10,
        "expected the half-degree budget to be mostly satisfiable, got {successes}/20"
    );
    println!(
        "acceptance 4 (greedy semantics): PASS — star fails, K4 succeeds, {successes}/20 geometric graphs succeed with replayed histories, {:.1} s",
        start.elapsed().as_secs_f64()
    );
}

// Criterion 5: simulator fidelity — (a) W = J full batch matches the
// centralized gradient-descent oracle to 1e-8, (b) consensus contracts at
// rate <= rho + 0.05 under pure mixing, (c) the averaged iterate follows
// the exact recursion to 1e-10, (d) analytic gradients match central finite
// differences to 1e-5 relative.
#[test]
fn acceptance_5_simulator_fidelity() {
    let start = Instant::now();

    // (a) perfect averaging reproduces centralized GD on F.
    let m = 10;
    let task = make_quadratic_task(m, 5, 16, 0.8, 0.0, 51).unwrap();
    let km = shared(Topology::complete(m, 0.0, 1.0).unwrap());
    let j_design = MixingDesign::new(km.clone(), vec![1.0 / m as f64; km.link_count()]).unwrap();
    let dist = MixingDistribution::deterministic(j_design);
    let cost = CostModel::uniform(&km, 0.0, 1.0).unwrap();
    let eta = 0.8 / task.smoothness();
    let trace = run_dpsgd(
        &task,
        &dist,
        &cost,
        &SimConfig {
            eta,
            iterations: 120,
            batch: usize::MAX,
            seed: 0,
            record_every: 1,
        },
    )
    .unwrap();
    let mut x = DVector::<f64>::zeros(5);
    let mut worst_a = 0.0f64;
    for k in 0..120 {
        worst_a = worst_a.max((trace.loss[k] - task.global_loss(&x)).abs());
        let g = task.global_grad(&x);
        x -= eta * g;
    }
    assert!(worst_a <= 1e-8, "oracle deviation {worst_a}");

    // (b) pure mixing contracts consensus at rate rho.
    let mut contraction_cases: Vec<(String, MixingDistribution)> = Vec::new();
    let c8 = shared(Topology::cycle(8, 0.0, 1.0).unwrap());
    contraction_cases.push((
        "C8 uniform".into(),
        MixingDistribution::deterministic(MixingDesign::new(c8, vec![0.35; 8]).unwrap()),
    ));
    let rgg = connected_rgg33(0.35, 1).remove(0).1;
    let solved = solve_min_rho(&rgg, &[], &SolverConfig::default()).unwrap();
    contraction_cases.push((
        "solved RGG33".into(),
        MixingDistribution::deterministic(MixingDesign::new(rgg, solved.alpha).unwrap()),
    ));
    let k4 = shared(Topology::complete(4, 0.0, 1.0).unwrap());
    contraction_cases.push((
        "random pair on K4".into(),
        MixingDistribution::new(vec![
            (MixingDesign::new(k4.clone(), vec![0.25; 6]).unwrap(), 0.5),
            (
                MixingDesign::new(k4, vec![0.4, 0.1, 0.0, 0.1, 0.3, 0.2]).unwrap(),
                0.5,
            ),
        ])
        .unwrap(),
    ));
    for (name, dist) in &contraction_cases {
        let rho = mixmat::spectral::rho_randomized(dist);
        let mut sum = 0.0;
        let mut count = 0usize;
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
            let x0 = DMatrix::from_fn(dist.node_count(), 3, |_, _| rng.random_range(-1.0..1.0));
            let factors = consensus_contraction_factors(&x0, dist, 100, seed).unwrap();
            sum += factors.iter().sum::<f64>();
            count += factors.len();
        }
        let mean = sum / count as f64;
        assert!(
            mean <= rho + 0.05,
            "{name}: mean contraction {mean} vs rho {rho}"
        );
    }

    // (c) the averaged iterate follows xbar <- xbar - eta * mean(g).
    let task_c = make_quadratic_task(6, 4, 12, 1.0, 0.1, 7).unwrap();
    let c6 = shared(Topology::cycle(6, 0.0, 1.0).unwrap());
    let design = MixingDesign::new(c6.clone(), vec![0.3; 6]).unwrap();
    let trace_c = run_dpsgd(
        &task_c,
        &MixingDistribution::deterministic(design),
        &CostModel::uniform(&c6, 0.0, 1.0).unwrap(),
        &SimConfig {
            eta: 0.1,
            iterations: 300,
            batch: 4,
            seed: 9,
            record_every: 1,
        },
    )
    .unwrap();
    let worst_c = trace_c.xbar_drift.iter().copied().fold(0.0, f64::max);
    assert!(worst_c <= 1e-10, "recursion drift {worst_c}");

    // (d) minibatch gradients against central finite differences.
    let task_d = make_quadratic_task(4, 6, 10, 0.5, 0.05, 13).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst_d = 0.0f64;
    for node in 0..4 {
        let x = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
        let rows: Vec<usize> = (0..10).filter(|_| rng.random::<bool>()).collect();
        let rows = if rows.is_empty() { vec![0] } else { rows };
        let g = task_d.minibatch_grad(node, &x, &rows);
        let h = 1e-6;
        for c in 0..6 {
            let mut hi = x.clone();
            hi[c] += h;
            let mut lo = x.clone();
            lo[c] -= h;
            let batch_loss = |p: &DVector<f64>| -> f64 {
                rows.iter()
                    .map(|&r| {
                        let a = task_d.data_row(node, r);
                        let resid = a.dot(p) - task_d.target_at(node, r);
                        resid * resid / 2.0
                    })
                    .sum::<f64>()
                    / rows.len() as f64
            };
            let fd = (batch_loss(&hi) - batch_loss(&lo)) / (2.0 * h);
            let rel = (fd - g[c]).abs() / g[c].abs().max(1.0);
            worst_d = worst_d.max(rel);
        }
    }
    assert!(worst_d <= 1e-5, "finite-difference mismatch {worst_d}");

    println!(
        "acceptance 5 (simulator fidelity): PASS — oracle dev {:.1e}, drift {:.1e}, fd err {:.1e}, {:.1} s",
        worst_a,
        worst_c,
        worst_d,
        start.elapsed().as_secs_f64()
    );
}

// Criterion 6: the iteration-count model reproduces the hand-computed
// values at the default constants and is strictly increasing in rho.
#[test]
fn acceptance_6_iteration_model() {
    let cm = ConvergenceModel::default();
    let k0 = iterations_to_epsilon(&cm, 0.0).unwrap();
    assert!((k0 - 83.25).abs() <= 0.01, "K(0) = {k0}");
    let k5 = iterations_to_epsilon(&cm, 0.5).unwrap();
    assert!((k5 - 138.0).abs() <= 0.1, "K(0.5) = {k5}");
    let mut prev = f64::NEG_INFINITY;
    for i in 0..100 {
        let rho = 0.99 * i as f64 / 99.0;
        let k = iterations_to_epsilon(&cm, rho).unwrap();
        assert!(k > prev, "not strictly increasing at rho = {rho}");
        prev = k;
    }
    assert!(iterations_to_epsilon(&cm, 1.0).is_none());
    println!(
        "acceptance 6 (iteration model): PASS — K(0) = {k0:.4}, K(0.5) = {k5:.4}, monotone over 100 samples"
    );
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values[values.len() / 2]
}

// Criterion 7: desk-scale end-to-end comparison on a 33-node geometric
// topology with the reference energy constants. Greedy designs at 25% and
// 55% of the full-activation max node cost must reach the vanilla run's
// final running-average gradient level (within 5% relative) while spending
// strictly less maximum per-node energy, median over 5 task seeds. The
// measured savings are reported, not asserted against any external figure.
#[test]
fn acceptance_7_end_to_end_budgeted_training() {
    let start = Instant::now();
    let comp = 0.0003342;
    let comm = 0.0138;

    let (topo_seed, _) = connected_rgg33(0.35, 1).remove(0);
    let base = shared(
        Topology::random_geometric(33, 0.35, comp, comm, topo_seed).unwrap(),
    );
    let cost = CostModel::from_topology(&base);
    let maxdeg = *base
        .node_degrees(&ActiveSet::all(base.link_count()))
        .unwrap()
        .iter()
        .max()
        .unwrap();
    let full_cost = comp + maxdeg as f64 * comm;

    // Vanilla: every link active with identical safe weights.
    let vanilla = MixingDesign::new(
        base.clone(),
        vec![1.0 / (maxdeg + 1) as f64; base.link_count()],
    )
    .unwrap();

    let fast_cfg = SolverConfig {
        tolerance: 1e-5,
        ..Default::default()
    };
    let mut designs = Vec::new();
    for pct in [0.25, 0.55] {
        let budget = pct * full_cost;
        let out = greedy_sparsify(&base, &cost, budget, &fast_cfg).unwrap();
        let design = out
            .design
            .unwrap_or_else(|| panic!("greedy failed at {pct}: {:?}", out.failure));
        let costs = cost.node_costs(&base, design.alpha()).unwrap();
        assert!(feasible(&costs, budget));
        designs.push((pct, design));
    }

    let k_vanilla = 400usize;
    let k_greedy = 2000usize;
    let seeds: Vec<u64> = (0..5).collect();
    let mut summaries = Vec::new();
    for (pct, design) in &designs {
        let results: Vec<(f64, f64)> = seeds
            .par_iter()
            .map(|&seed| {
                let task = make_quadratic_task(33, 20, 64, 1.0, 0.0, seed).unwrap();
                let eta = 0.4 / task.smoothness();
                let run = |d: &MixingDesign, iters: usize| {
                    run_dpsgd(
                        &task,
                        &MixingDistribution::deterministic(d.clone()),
                        &cost,
                        &SimConfig {
                            eta,
                            iterations: iters,
                            batch: usize::MAX,
                            seed,
                            record_every: 1,
                        },
                    )
                    .unwrap()
                };
                let trace_v = run(&vanilla, k_vanilla);
                let level = trace_v.running_avg_grad_sq[k_vanilla - 1];
                let energy_v = trace_v.max_cum_energy[k_vanilla - 1];

                let trace_g = run(design, k_greedy);
                let reach = trace_g
                    .running_avg_grad_sq
                    .iter()
                    .position(|&v| v <= 1.05 * level)
                    .unwrap_or_else(|| {
                        panic!(
                            "budget {pct}, seed {seed}: never reached {level:.3e} (best {:.3e})",
                            trace_g.running_avg_grad_sq[k_greedy - 1]
                        )
                    });
                let energy_g = trace_g.max_cum_energy[reach];
                (reach as f64 + 1.0, 1.0 - energy_g / energy_v)
            })
            .collect();
        let mut reaches: Vec<f64> = results.iter().map(|r| r.0).collect();
        let mut savings: Vec<f64> = results.iter().map(|r| r.1).collect();
        let med_reach = median(&mut reaches);
        let med_saving = median(&mut savings);
        assert!(
            med_saving > 0.0,
            "budget {pct}: median max-node energy saving {med_saving} not positive"
        );
        summaries.push((*pct, med_reach, med_saving, design.rho()));
    }
    for (pct, reach, saving, rho) in &summaries {
        println!(
            "  budget {:.0}% of full activation: rho = {rho:.4}, reaches vanilla level at median iteration {reach:.0} (vanilla ran {k_vanilla}), median max-node energy saving {:.1}%",
            pct * 100.0,
            saving * 100.0
        );
    }
    println!(
        "acceptance 7 (end-to-end budgeted training): PASS — {:.1} s",
        start.elapsed().as_secs_f64()
    );
}

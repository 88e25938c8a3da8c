//! Deterministic bulk-synchronous simulator of decentralized parallel SGD
//! on synthetic least-squares tasks, with per-node energy accounting.
//!
//! Every iteration samples a mixing matrix i.i.d. from the given
//! distribution, lets each node take a minibatch gradient step, and mixes:
//! `x_i <- sum_j W_ij (x_j - eta g_j)`. Least squares is the task family
//! because the smoothness constant and the global optimum are available in
//! closed form, so convergence claims can be checked exactly at desk scale.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cost::CostModel;
use crate::spectral::MixingDistribution;
use crate::{split_seed, Error, Result};

const SEED_TAG_TASK: u64 = 1;
const SEED_TAG_MIXING: u64 = 2;
const SEED_TAG_BATCH: u64 = 3;

/// Per-node least-squares objectives `F_i(x) = ||A_i x - b_i||^2 / (2 n_i)`
/// with a closed-form global optimum.
#[derive(Clone, Debug)]
pub struct QuadraticTask {
    data: Vec<DMatrix<f64>>,
    targets: Vec<DVector<f64>>,
    dim: usize,
    /// `A_i^T A_i / n_i`, cached for exact full gradients.
    gram: Vec<DMatrix<f64>>,
    /// `A_i^T b_i / n_i`.
    moment: Vec<DVector<f64>>,
    x_star: DVector<f64>,
}

impl QuadraticTask {
    pub fn from_parts(data: Vec<DMatrix<f64>>, targets: Vec<DVector<f64>>) -> Result<Self> {
        if data.is_empty() || data.len() != targets.len() {
            return Err(Error::Dimension(format!(
                "{} data matrices for {} target vectors",
                data.len(),
                targets.len()
            )));
        }
        let dim = data[0].ncols();
        for (a, b) in data.iter().zip(&targets) {
            if a.ncols() != dim || a.nrows() == 0 || a.nrows() != b.len() {
                return Err(Error::Dimension(
                    "every node needs A_i of shape (n_i, dim) with matching b_i".into(),
                ));
            }
        }
        let gram: Vec<DMatrix<f64>> = data
            .iter()
            .map(|a| a.transpose() * a / a.nrows() as f64)
            .collect();
        let moment: Vec<DVector<f64>> = data
            .iter()
            .zip(&targets)
            .map(|(a, b)| a.transpose() * b / a.nrows() as f64)
            .collect();
        let mut normal = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        for (g, mo) in gram.iter().zip(&moment) {
            normal += g;
            rhs += mo;
        }
        let x_star = normal
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Config("normal equations are singular".into()))?;
        Ok(QuadraticTask {
            data,
            targets,
            dim,
            gram,
            moment,
            x_star,
        })
    }

    pub fn node_count(&self) -> usize {
        self.data.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples_at(&self, node: usize) -> usize {
        self.data[node].nrows()
    }

    /// One data row of node `node`, as a column vector.
    pub fn data_row(&self, node: usize, row: usize) -> DVector<f64> {
        self.data[node].row(row).transpose()
    }

    pub fn target_at(&self, node: usize, row: usize) -> f64 {
        self.targets[node][row]
    }

    /// The minimizer of the global objective, from the stacked normal
    /// equations.
    pub fn optimum(&self) -> &DVector<f64> {
        &self.x_star
    }

    pub fn local_loss(&self, node: usize, x: &DVector<f64>) -> f64 {
        let r = &self.data[node] * x - &self.targets[node];
        r.norm_squared() / (2.0 * self.data[node].nrows() as f64)
    }

    pub fn global_loss(&self, x: &DVector<f64>) -> f64 {
        let m = self.node_count() as f64;
        (0..self.node_count())
            .map(|i| self.local_loss(i, x))
            .sum::<f64>()
            / m
    }

    pub fn local_grad(&self, node: usize, x: &DVector<f64>) -> DVector<f64> {
        &self.gram[node] * x - &self.moment[node]
    }

    pub fn global_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim);
        for i in 0..self.node_count() {
            g += self.local_grad(i, x);
        }
        g / self.node_count() as f64
    }

    /// Unbiased stochastic gradient from an explicit row subset.
    pub fn minibatch_grad(&self, node: usize, x: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
        let a = &self.data[node];
        let b = &self.targets[node];
        let mut g = DVector::zeros(self.dim);
        for &r in rows {
            let residual = a.row(r).transpose().dot(x) - b[r];
            for c in 0..self.dim {
                g[c] += a[(r, c)] * residual;
            }
        }
        g / rows.len() as f64
    }

    /// Largest `lambda_max(A_i^T A_i / n_i)`: the smoothness constant of the
    /// worst node (and an upper bound for the global objective).
    pub fn smoothness(&self) -> f64 {
        self.gram
            .iter()
            .map(|g| {
                let eig = crate::spectral::eigenvalues_symmetric(g).expect("gram is symmetric");
                eig[eig.len() - 1]
            })
            .fold(0.0, f64::max)
    }
}

/// Build a synthetic heterogeneous task: `A_i` standard normal, targets
/// `b_i = A_i (x_base + heterogeneity * delta_i) + noise_std * xi` with a
/// fixed per-node offset `delta_i`. With zero heterogeneity and zero noise,
/// every local optimum coincides and the global minimum value is 0.
pub fn make_quadratic_task(
    node_count: usize,
    dim: usize,
    samples_per_node: usize,
    heterogeneity: f64,
    noise_std: f64,
    seed: u64,
) -> Result<QuadraticTask> {
    if node_count == 0 || dim == 0 || samples_per_node == 0 {
        return Err(Error::Config(
            "node_count, dim and samples_per_node must be positive".into(),
        ));
    }
    let mut base_rng = ChaCha8Rng::seed_from_u64(split_seed(seed, SEED_TAG_TASK, 0, 0));
    let x_base: DVector<f64> = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut base_rng));
    let mut data = Vec::with_capacity(node_count);
    let mut targets = Vec::with_capacity(node_count);
    for i in 0..node_count {
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, SEED_TAG_TASK, 1 + i as u64, 0));
        let a = DMatrix::from_fn(samples_per_node, dim, |_, _| StandardNormal.sample(&mut rng));
        let delta: DVector<f64> = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
        let local_opt = &x_base + heterogeneity * delta;
        let mut b: DVector<f64> = &a * local_opt;
        if noise_std > 0.0 {
            for x in b.iter_mut() {
                let n: f64 = StandardNormal.sample(&mut rng);
                *x += noise_std * n;
            }
        }
        data.push(a);
        targets.push(b);
    }
    QuadraticTask::from_parts(data, targets)
}

/// Simulation parameters. `eta` may be zero, which reduces the run to pure
/// consensus dynamics.
#[derive(Clone, Copy, Debug)]
pub struct SimConfig {
    pub eta: f64,
    pub iterations: usize,
    /// Minibatch size per node per iteration, clamped to the node's sample
    /// count (sampling is without replacement).
    pub batch: usize,
    pub seed: u64,
    /// CSV thinning stride; the in-memory trace is always dense.
    pub record_every: usize,
}

/// Dense per-iteration record of a run. Row `k` holds the metrics of the
/// averaged iterate at the start of iteration `k` and the cumulative energy
/// after iteration `k` has been paid for.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingTrace {
    pub loss: Vec<f64>,
    pub grad_sq: Vec<f64>,
    pub running_avg_grad_sq: Vec<f64>,
    pub consensus: Vec<f64>,
    pub max_cum_energy: Vec<f64>,
    pub total_cum_energy: Vec<f64>,
    /// Per-iteration deviation of the averaged iterate from the exact
    /// recursion `xbar <- xbar - eta * mean(g_i)`.
    pub xbar_drift: Vec<f64>,
    /// Which design the i.i.d. mixing draw picked each iteration.
    pub sampled_design: Vec<usize>,
    /// Final cumulative energy per node.
    pub node_energy: Vec<f64>,
    pub record_every: usize,
}

impl TrainingTrace {
    pub fn iterations(&self) -> usize {
        self.loss.len()
    }

    /// First iteration count `K` at which the running average of the
    /// squared gradient norm drops to `epsilon`, if any.
    pub fn iterations_to_target(&self, epsilon: f64) -> Option<usize> {
        self.running_avg_grad_sq
            .iter()
            .position(|&v| v <= epsilon)
            .map(|idx| idx + 1)
    }

    /// CSV view, thinned to every `record_every`-th iteration plus the last.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "iter,loss,grad_sq,running_avg_grad_sq,consensus,max_cum_energy_wh,total_cum_energy_wh\n",
        );
        let n = self.iterations();
        for k in 0..n {
            if k % self.record_every != 0 && k != n - 1 {
                continue;
            }
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                k + 1,
                self.loss[k],
                self.grad_sq[k],
                self.running_avg_grad_sq[k],
                self.consensus[k],
                self.max_cum_energy[k],
                self.total_cum_energy[k],
            ));
        }
        out
    }
}

/// First `K` at which the running average of `||grad F(xbar)||^2` is at
/// most `epsilon`.
pub fn iterations_to_target(trace: &TrainingTrace, epsilon: f64) -> Option<usize> {
    trace.iterations_to_target(epsilon)
}

/// Run bulk-synchronous decentralized SGD from the all-zero initialization.
///
/// Per iteration: sample `W` i.i.d. from `mixing`, compute one minibatch
/// gradient per node at its current iterate, apply
/// `X <- W (X - eta G)`, and charge every node its computation cost plus
/// the communication cost of its activated links in the sampled design.
/// Aborts with a diagnostic if the loss exceeds 1e12.
pub fn run_dpsgd(
    task: &QuadraticTask,
    mixing: &MixingDistribution,
    cost: &CostModel,
    cfg: &SimConfig,
) -> Result<TrainingTrace> {
    let m = task.node_count();
    if mixing.node_count() != m {
        return Err(Error::Dimension(format!(
            "mixing distribution over {} nodes, task has {m}",
            mixing.node_count()
        )));
    }
    if cfg.eta < 0.0 {
        return Err(Error::Config("learning rate must be nonnegative".into()));
    }
    if cfg.iterations == 0 || cfg.batch == 0 || cfg.record_every == 0 {
        return Err(Error::Config(
            "iterations, batch and record_every must be positive".into(),
        ));
    }
    let dim = task.dim();

    // Mixing matrices and per-iteration node costs, one per support design.
    let designs: Vec<(DMatrix<f64>, Vec<f64>)> = mixing
        .entries()
        .iter()
        .map(|(design, _)| {
            let w = design.mixing_matrix();
            let c = cost.node_costs(design.topology(), design.alpha())?;
            Ok((w, c))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut w_rng = ChaCha8Rng::seed_from_u64(split_seed(cfg.seed, SEED_TAG_MIXING, 0, 0));
    let mut x = DMatrix::<f64>::zeros(m, dim);
    let mut g = DMatrix::<f64>::zeros(m, dim);
    let mut energy = vec![0.0f64; m];

    let k_max = cfg.iterations;
    let mut trace = TrainingTrace {
        loss: Vec::with_capacity(k_max),
        grad_sq: Vec::with_capacity(k_max),
        running_avg_grad_sq: Vec::with_capacity(k_max),
        consensus: Vec::with_capacity(k_max),
        max_cum_energy: Vec::with_capacity(k_max),
        total_cum_energy: Vec::with_capacity(k_max),
        xbar_drift: Vec::with_capacity(k_max),
        sampled_design: Vec::with_capacity(k_max),
        node_energy: Vec::new(),
        record_every: cfg.record_every,
    };
    let mut grad_sq_sum = 0.0f64;

    for k in 1..=k_max {
        let xbar = column_mean(&x);
        let loss = task.global_loss(&xbar);
        if loss > 1e12 {
            return Err(Error::Diverged { iter: k, loss });
        }
        let grad = task.global_grad(&xbar);
        let grad_sq = grad.norm_squared();
        grad_sq_sum += grad_sq;
        let consensus = consensus_distance(&x, &xbar);

        let idx = mixing.sample_index(&mut w_rng);
        let (w, node_cost) = &designs[idx];
        for (e, c) in energy.iter_mut().zip(node_cost) {
            *e += c;
        }

        // Minibatch gradients, one independent stream per (node, iteration).
        for i in 0..m {
            let n_i = task.samples_at(i);
            let xi = x.row(i).transpose();
            let gi = if cfg.batch >= n_i {
                task.local_grad(i, &xi)
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(split_seed(
                    cfg.seed,
                    SEED_TAG_BATCH,
                    i as u64,
                    k as u64,
                ));
                let rows = rand::seq::index::sample(&mut rng, n_i, cfg.batch).into_vec();
                task.minibatch_grad(i, &xi, &rows)
            };
            for c in 0..dim {
                g[(i, c)] = gi[c];
            }
        }

        let update = &x - cfg.eta * &g;
        x = w * update;

        // Row sums of W are 1, so the average must follow the centralized
        // recursion exactly (up to roundoff); record the deviation.
        let gbar = column_mean(&g);
        let predicted = &xbar - cfg.eta * gbar;
        let drift = (column_mean(&x) - predicted).norm();

        trace.loss.push(loss);
        trace.grad_sq.push(grad_sq);
        trace.running_avg_grad_sq.push(grad_sq_sum / k as f64);
        trace.consensus.push(consensus);
        trace.max_cum_energy.push(crate::cost::max_node_cost(&energy));
        trace.total_cum_energy.push(energy.iter().sum());
        trace.xbar_drift.push(drift);
        trace.sampled_design.push(idx);
    }
    trace.node_energy = energy;
    Ok(trace)
}

/// Pure consensus dynamics `X <- W X` from an explicit start: the per-step
/// squared-consensus contraction factors, for validating that mixing
/// contracts disagreement at rate `rho`. Stops early once the consensus
/// distance underflows.
pub fn consensus_contraction_factors(
    x0: &DMatrix<f64>,
    mixing: &MixingDistribution,
    iterations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let m = mixing.node_count();
    if x0.nrows() != m {
        return Err(Error::Dimension(format!(
            "state has {} rows for {m} nodes",
            x0.nrows()
        )));
    }
    let ws: Vec<DMatrix<f64>> = mixing
        .entries()
        .iter()
        .map(|(d, _)| d.mixing_matrix())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, SEED_TAG_MIXING, 0, 0));
    let mut x = x0.clone();
    let mut factors = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let xbar = column_mean(&x);
        let before = consensus_distance(&x, &xbar);
        if before < 1e-24 {
            break;
        }
        let idx = mixing.sample_index(&mut rng);
        x = &ws[idx] * x;
        let xbar_after = column_mean(&x);
        let after = consensus_distance(&x, &xbar_after);
        factors.push(after / before);
    }
    Ok(factors)
}

fn column_mean(x: &DMatrix<f64>) -> DVector<f64> {
    let m = x.nrows() as f64;
    let mut mean = DVector::zeros(x.ncols());
    for i in 0..x.nrows() {
        for c in 0..x.ncols() {
            mean[c] += x[(i, c)];
        }
    }
    mean / m
}

/// `(1/m) sum_i ||x_i - xbar||^2`.
fn consensus_distance(x: &DMatrix<f64>, xbar: &DVector<f64>) -> f64 {
    let m = x.nrows();
    let mut acc = 0.0;
    for i in 0..m {
        for c in 0..x.ncols() {
            let d = x[(i, c)] - xbar[c];
            acc += d * d;
        }
    }
    acc / m as f64
}

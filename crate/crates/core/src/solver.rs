//! Minimization of `rho_tilde(alpha) = ||I - L(alpha) - J||` over link
//! weights, with support for links frozen at exactly zero.
//!
//! The objective is convex (a norm of an affine map of `alpha`) and has a
//! cheap exact subgradient: with `v` a unit eigenvector of `I - L - J` at the
//! eigenvalue of largest magnitude `mu`, the subgradient on link `(u, v)` is
//! `-sign(mu) * (v_u - v_v)^2`. We run subgradient descent with a
//! Polyak-style step against a running best target, annealing the target gap
//! as progress stalls. A grid-search oracle over `[0, 1]^free` backs the
//! solver in tests; it evaluates the spectrum through its own reduced-space
//! Jacobi kernel rather than the solver's eigensolver.

use rayon::prelude::*;

use crate::spectral::{eig_symmetric, laplacian, rho_from_weights};
use crate::topology::Topology;
use crate::{Error, Result};

/// Free links above this count make the grid oracle intractable.
pub const MAX_GRID_LINKS: usize = 4;

/// Step-size rule for the subgradient iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule {
    /// Polyak step toward `best - gap`, halving the gap when a window of
    /// iterations fails to improve the best value.
    PolyakAnneal,
    /// Fixed step length divided by the subgradient norm.
    Constant(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop once the best value improves by less than this over a
    /// 200-iteration window (and the Polyak gap has annealed down to it).
    pub tolerance: f64,
    pub step_rule: StepRule,
    /// Seed for the optional jitter applied to the uniform initialization.
    /// Zero (the default) means the exact deterministic start.
    pub rng_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 5000,
            tolerance: 1e-7,
            step_rule: StepRule::PolyakAnneal,
            rng_seed: 0,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if let StepRule::Constant(s) = self.step_rule {
            if !(s > 0.0) {
                return Err(Error::Config("constant step must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Result of a solve: the weight vector, the achieved objective
/// `rho_tilde = ||I - L - J||` (recomputed from the weights on exit, not
/// trusted from the iteration), and how the run ended.
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub alpha: Vec<f64>,
    pub rho_tilde: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `||I - L(alpha) - J||`, the square root of the deterministic `rho`.
pub fn rho_tilde_from_weights(topology: &Topology, alpha: &[f64]) -> Result<f64> {
    Ok(rho_from_weights(topology, alpha)?.sqrt())
}

/// Minimize `rho_tilde` over the non-frozen links, starting from the
/// default uniform initialization.
pub fn solve_min_rho(
    topology: &Topology,
    frozen: &[usize],
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    solve_min_rho_warm(topology, frozen, None, cfg)
}

/// Same as [`solve_min_rho`] but optionally warm-started from a previous
/// weight vector (frozen entries are zeroed before use). The greedy
/// sparsifier leans on this to keep re-solves cheap.
pub fn solve_min_rho_warm(
    topology: &Topology,
    frozen: &[usize],
    warm_start: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    cfg.validate()?;
    let n_links = topology.link_count();
    let mut is_frozen = vec![false; n_links];
    for &e in frozen {
        if e >= n_links {
            return Err(Error::Dimension(format!(
                "frozen link index {e} out of range for {n_links} links"
            )));
        }
        is_frozen[e] = true;
    }
    let free: Vec<usize> = (0..n_links).filter(|&e| !is_frozen[e]).collect();

    let mut alpha = match warm_start {
        Some(init) => {
            if init.len() != n_links {
                return Err(Error::Dimension(format!(
                    "warm start has {} weights for {} links",
                    init.len(),
                    n_links
                )));
            }
            let mut a = init.to_vec();
            for &e in frozen {
                a[e] = 0.0;
            }
            a
        }
        None => uniform_start(topology, &is_frozen, cfg.rng_seed),
    };

    if free.is_empty() {
        let rho_tilde = rho_tilde_from_weights(topology, &alpha)?;
        return Ok(SolveResult {
            alpha,
            rho_tilde,
            iterations: 0,
            converged: true,
        });
    }

    let warm = warm_start.is_some();
    let links = topology.links();
    let stop_window = 200usize;
    let anneal_window = 50usize;

    let (f0, _, _) = objective(topology, &alpha)?;
    let mut best = alpha.clone();
    let mut f_best = f0;
    // A warm start is expected to sit near the optimum already, so begin
    // with a small target gap instead of a fraction of the current value.
    let mut gap = if warm {
        (0.25 * f0).min(0.02).max(cfg.tolerance)
    } else {
        (0.25 * f0).max(10.0 * cfg.tolerance)
    };
    let mut stop_anchor = f_best;
    let mut anneal_anchor = f_best;
    let mut iterations = 0usize;
    let mut converged = false;
    let mut grad = vec![0.0f64; n_links];

    for it in 1..=cfg.max_iterations {
        iterations = it;
        let (f, v, sign) = objective(topology, &alpha)?;
        if f < f_best {
            f_best = f;
            best.copy_from_slice(&alpha);
        }
        if f_best <= cfg.tolerance {
            // The objective is nonnegative; nothing left to gain.
            converged = true;
            break;
        }

        let mut grad_norm_sq = 0.0;
        let mut grad_max = 0.0f64;
        for &e in &free {
            let link = links[e];
            let d = v[link.u] - v[link.v];
            let g = -sign * d * d;
            grad[e] = g;
            grad_norm_sq += g * g;
            grad_max = grad_max.max(g.abs());
        }
        if grad_norm_sq < 1e-18 {
            // Zero subgradient: alpha is optimal for the restricted problem
            // (this is how a disconnected free support terminates).
            converged = true;
            break;
        }

        let step = match cfg.step_rule {
            StepRule::PolyakAnneal => {
                let target = f_best - gap;
                let s = (f - target) / grad_norm_sq;
                // Trust region: never move a coordinate by more than 0.5.
                s.min(0.5 / grad_max)
            }
            StepRule::Constant(len) => len / grad_norm_sq.sqrt(),
        };
        for &e in &free {
            alpha[e] -= step * grad[e];
        }

        if it % anneal_window == 0 {
            if anneal_anchor - f_best < 0.25 * gap {
                gap = (gap * 0.5).max(cfg.tolerance);
            }
            anneal_anchor = f_best;
        }
        if it % stop_window == 0 {
            if stop_anchor - f_best < cfg.tolerance && gap <= cfg.tolerance {
                converged = true;
                break;
            }
            stop_anchor = f_best;
        }
    }

    let rho_tilde = rho_tilde_from_weights(topology, &best)?;
    Ok(SolveResult {
        alpha: best,
        rho_tilde,
        iterations,
        converged,
    })
}

/// Uniform `1/(max degree + 1)` on non-frozen links: diagonally dominant,
/// so `rho_tilde < 1` whenever the free support is connected.
fn uniform_start(topology: &Topology, is_frozen: &[bool], rng_seed: u64) -> Vec<f64> {
    let mut deg = vec![0usize; topology.node_count()];
    for (e, link) in topology.links().iter().enumerate() {
        if !is_frozen[e] {
            deg[link.u] += 1;
            deg[link.v] += 1;
        }
    }
    let max_deg = deg.iter().copied().max().unwrap_or(0);
    let w = 1.0 / (max_deg + 1) as f64;
    let mut alpha: Vec<f64> = is_frozen
        .iter()
        .map(|&fr| if fr { 0.0 } else { w })
        .collect();
    if rng_seed != 0 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(rng_seed);
        for (a, &fr) in alpha.iter_mut().zip(is_frozen) {
            if !fr {
                *a += rng.random_range(-1e-6..1e-6);
            }
        }
    }
    alpha
}

/// Objective value, extremal eigenvector, and the sign of its eigenvalue.
fn objective(topology: &Topology, alpha: &[f64]) -> Result<(f64, nalgebra::DVector<f64>, f64)> {
    let m = topology.node_count();
    let mut mat = laplacian(topology, alpha)?;
    mat.neg_mut();
    let shift = 1.0 - 1.0 / m as f64;
    for i in 0..m {
        mat[(i, i)] += shift;
    }
    for i in 0..m {
        for j in 0..m {
            if i != j {
                mat[(i, j)] -= 1.0 / m as f64;
            }
        }
    }
    let (values, vectors) = eig_symmetric(&mat)?;
    let (lo, hi) = (values[0], values[m - 1]);
    if -lo > hi {
        Ok((-lo, vectors.column(0).into_owned(), -1.0))
    } else {
        Ok((hi, vectors.column(m - 1).into_owned(), 1.0))
    }
}

/// Exhaustive grid search of `rho_tilde` over `[0, 1]` per free link at the
/// given resolution. Intended as an independent optimality oracle for
/// [`solve_min_rho`] on small instances; rejects more than
/// [`MAX_GRID_LINKS`] free links.
pub fn brute_force_min_rho(
    topology: &Topology,
    frozen: &[usize],
    resolution: f64,
) -> Result<SolveResult> {
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::Config(format!(
            "grid resolution must be in (0, 1], got {resolution}"
        )));
    }
    let n_links = topology.link_count();
    let mut is_frozen = vec![false; n_links];
    for &e in frozen {
        if e >= n_links {
            return Err(Error::Dimension(format!(
                "frozen link index {e} out of range for {n_links} links"
            )));
        }
        is_frozen[e] = true;
    }
    let free: Vec<usize> = (0..n_links).filter(|&e| !is_frozen[e]).collect();
    if free.len() > MAX_GRID_LINKS {
        return Err(Error::TooManyFreeLinks {
            free: free.len(),
            max: MAX_GRID_LINKS,
        });
    }

    let mut alpha = vec![0.0f64; n_links];
    if free.is_empty() {
        let rho_tilde = rho_tilde_from_weights(topology, &alpha)?;
        return Ok(SolveResult {
            alpha,
            rho_tilde,
            iterations: 1,
            converged: true,
        });
    }

    let kernel = ReducedKernel::new(topology, &free);
    let steps = (1.0 / resolution).round() as usize;
    let points = steps + 1;
    let d = free.len();

    // Parallel over the first axis; fold in axis order so ties resolve to the
    // lexicographically smallest grid index no matter the thread count.
    let per_first: Vec<(f64, [usize; 4])> = (0..points)
        .into_par_iter()
        .map(|i0| kernel.scan_axis(i0, d, points, resolution))
        .collect();

    let (mut best_f, mut best_idx) = (f64::INFINITY, [0usize; 4]);
    for (f, idx) in per_first {
        if f < best_f {
            best_f = f;
            best_idx = idx;
        }
    }
    for (k, &e) in free.iter().enumerate() {
        alpha[e] = best_idx[k] as f64 * resolution;
    }
    let evaluations = points.pow(d as u32);
    let rho_tilde = rho_tilde_from_weights(topology, &alpha)?;
    debug_assert!((rho_tilde - best_f).abs() < 1e-8);
    Ok(SolveResult {
        alpha,
        rho_tilde: best_f,
        iterations: evaluations,
        converged: true,
    })
}

/// Evaluates `||I - L(alpha) - J||` through the spectrum of `L` restricted
/// to the complement of the all-ones direction, itself compressed onto the
/// span of the free links' incidence vectors (dimension at most
/// [`MAX_GRID_LINKS`]). Eigenvalues come from closed forms up to order 3 and
/// a tiny cyclic Jacobi at order 4, independent of the nalgebra path used by
/// the solver.
struct ReducedKernel {
    /// Symmetric outer products `q_e q_e^T` of the free links' projected
    /// incidence vectors, in an orthonormal basis of their span, stored with
    /// stride 4.
    outer: Vec<[f64; 16]>,
    /// Dimension of that span.
    rank: usize,
    /// Zero eigenvalues of L outside the span (but inside the complement of
    /// the ones direction) contribute |1 - 0| = 1 to the norm.
    has_defect: bool,
}

impl ReducedKernel {
    fn new(topology: &Topology, free: &[usize]) -> Self {
        let m = topology.node_count();
        // Householder reflector mapping e_1 to the normalized ones vector;
        // its columns 1..m form an orthonormal basis of the complement.
        let s = 1.0 / (m as f64).sqrt();
        let mut u: Vec<f64> = vec![0.0; m];
        u[0] = 1.0 - s;
        for x in u.iter_mut().skip(1) {
            *x = -s;
        }
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in u.iter_mut() {
            *x /= norm;
        }

        // q_e = P^T b_e for each free link e.
        let mut qs: Vec<Vec<f64>> = Vec::with_capacity(free.len());
        for &e in free {
            let link = topology.links()[e];
            let mut b = vec![0.0f64; m];
            b[link.u] = 1.0;
            b[link.v] = -1.0;
            let ub: f64 = u.iter().zip(&b).map(|(x, y)| x * y).sum();
            let q: Vec<f64> = (1..m).map(|j| b[j] - 2.0 * u[j] * ub).collect();
            qs.push(q);
        }

        // Gram-Schmidt the q_e into an orthonormal basis of their span and
        // record each q_e's coordinates in it.
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut coords: Vec<[f64; 4]> = Vec::with_capacity(qs.len());
        for q in &qs {
            let mut c = [0.0f64; 4];
            let mut residual = q.clone();
            for (k, b) in basis.iter().enumerate() {
                let dot: f64 = residual.iter().zip(b).map(|(x, y)| x * y).sum();
                c[k] = q.iter().zip(b).map(|(x, y)| x * y).sum();
                for (r, bb) in residual.iter_mut().zip(b) {
                    *r -= dot * bb;
                }
            }
            let rnorm = residual.iter().map(|x| x * x).sum::<f64>().sqrt();
            if rnorm > 1e-10 && basis.len() < 4 {
                let k = basis.len();
                c[k] = rnorm;
                basis.push(residual.iter().map(|x| x / rnorm).collect());
            }
            coords.push(c);
        }
        let rank = basis.len();
        let outer = coords
            .iter()
            .map(|c| {
                let mut o = [0.0f64; 16];
                for i in 0..rank {
                    for j in 0..rank {
                        o[i * 4 + j] = c[i] * c[j];
                    }
                }
                o
            })
            .collect();
        ReducedKernel {
            outer,
            rank,
            has_defect: rank < m - 1,
        }
    }

    fn eval(&self, weights: &[f64]) -> f64 {
        let mut k = [0.0f64; 16];
        for (o, &w) in self.outer.iter().zip(weights) {
            axpy16(&mut k, w, o);
        }
        self.norm_from(&mut k)
    }

    fn norm_from(&self, k: &mut [f64; 16]) -> f64 {
        let s = self.rank;
        if s == 0 {
            return 1.0;
        }
        let eig = match s {
            1 => [k[0], 0.0, 0.0, 0.0],
            2 => eig_sym2(k),
            3 => eig_sym3(k),
            _ => jacobi_eigenvalues(k, s),
        };
        let mut f: f64 = if self.has_defect { 1.0 } else { 0.0 };
        for &mu in eig.iter().take(s) {
            f = f.max((1.0 - mu).abs());
        }
        f
    }

    /// Best value over the sub-grid with the first coordinate pinned to
    /// `i0`, accumulating the weighted outer products one axis at a time so
    /// the innermost evaluation touches a single rank-one update.
    fn scan_axis(&self, i0: usize, d: usize, points: usize, res: f64) -> (f64, [usize; 4]) {
        let mut best = (f64::INFINITY, [0usize; 4]);
        let mut consider = |f: f64, idx: [usize; 4]| {
            if f < best.0 {
                best = (f, idx);
            }
        };
        let mut k0 = [0.0f64; 16];
        axpy16(&mut k0, i0 as f64 * res, &self.outer[0]);
        if d == 1 {
            let mut k = k0;
            consider(self.norm_from(&mut k), [i0, 0, 0, 0]);
            return best;
        }
        for i1 in 0..points {
            let mut k1 = k0;
            axpy16(&mut k1, i1 as f64 * res, &self.outer[1]);
            if d == 2 {
                let mut k = k1;
                consider(self.norm_from(&mut k), [i0, i1, 0, 0]);
                continue;
            }
            for i2 in 0..points {
                let mut k2 = k1;
                axpy16(&mut k2, i2 as f64 * res, &self.outer[2]);
                if d == 3 {
                    let mut k = k2;
                    consider(self.norm_from(&mut k), [i0, i1, i2, 0]);
                    continue;
                }
                for i3 in 0..points {
                    let mut k = k2;
                    axpy16(&mut k, i3 as f64 * res, &self.outer[3]);
                    consider(self.norm_from(&mut k), [i0, i1, i2, i3]);
                }
            }
        }
        best
    }
}

#[inline(always)]
fn axpy16(dst: &mut [f64; 16], w: f64, src: &[f64; 16]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += w * s;
    }
}

/// Closed-form eigenvalues of a symmetric 2x2 (stride-4 storage).
#[inline(always)]
fn eig_sym2(k: &[f64; 16]) -> [f64; 4] {
    let (a, b, c) = (k[0], k[1], k[5]);
    let mid = 0.5 * (a + c);
    let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    [mid - r, mid + r, 0.0, 0.0]
}

/// Closed-form eigenvalues of a symmetric 3x3 (stride-4 storage) via the
/// trigonometric solution of the characteristic cubic.
#[inline(always)]
fn eig_sym3(k: &[f64; 16]) -> [f64; 4] {
    let (a00, a01, a02) = (k[0], k[1], k[2]);
    let (a11, a12, a22) = (k[5], k[6], k[10]);
    let p1 = a01 * a01 + a02 * a02 + a12 * a12;
    if p1 < 1e-30 {
        return [a00, a11, a22, 0.0];
    }
    let q = (a00 + a11 + a22) / 3.0;
    let (d0, d1, d2) = (a00 - q, a11 - q, a22 - q);
    let p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    // det(B) / 2 for B = (A - qI) / p.
    let det_b = d0 * (d1 * d2 - a12 * a12) - a01 * (a01 * d2 - a12 * a02)
        + a02 * (a01 * a12 - d1 * a02);
    let r = (det_b / (2.0 * p * p * p)).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    let e2 = 3.0 * q - e1 - e3;
    [e1, e2, e3, 0.0]
}

/// Eigenvalues of a symmetric matrix of order `s <= 4` stored with stride 4.
fn jacobi_eigenvalues(a: &mut [f64; 16], s: usize) -> [f64; 4] {
    if s == 1 {
        return [a[0], 0.0, 0.0, 0.0];
    }
    for _ in 0..64 {
        let mut off = 0.0f64;
        for p in 0..s {
            for q in (p + 1)..s {
                off = off.max(a[p * 4 + q].abs());
            }
        }
        if off < 1e-13 {
            break;
        }
        for p in 0..s {
            for q in (p + 1)..s {
                let apq = a[p * 4 + q];
                if apq.abs() < 1e-15 {
                    continue;
                }
                let app = a[p * 4 + p];
                let aqq = a[q * 4 + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;
                for k in 0..s {
                    if k != p && k != q {
                        let akp = a[k * 4 + p];
                        let akq = a[k * 4 + q];
                        a[k * 4 + p] = c * akp - sn * akq;
                        a[p * 4 + k] = a[k * 4 + p];
                        a[k * 4 + q] = sn * akp + c * akq;
                        a[q * 4 + k] = a[k * 4 + q];
                    }
                }
                a[p * 4 + p] = c * c * app - 2.0 * sn * c * apq + sn * sn * aqq;
                a[q * 4 + q] = sn * sn * app + 2.0 * sn * c * apq + c * c * aqq;
                a[p * 4 + q] = 0.0;
                a[q * 4 + p] = 0.0;
            }
        }
    }
    [a[0], a[5], a[10], a[15]]
}

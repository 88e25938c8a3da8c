//! Laplacian assembly, symmetric eigendecomposition, and the convergence
//! parameter `rho` for deterministic and randomized mixing designs.
//!
//! For a deterministic design, `rho = ||W^T W - J|| = ||W - J||^2
//! = max((1 - l2)^2, (1 - lm)^2)` where `l2` and `lm` are the second-smallest
//! and largest eigenvalues of the weighted Laplacian. For a randomized design
//! it is `||E[W^T W] - J||`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::topology::{ActiveSet, Topology};
use crate::{Error, Result};

/// Symmetry tolerance accepted by [`eig_symmetric`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Full spectrum of a symmetric matrix, eigenvalues ascending, eigenvectors
/// as the corresponding columns. Rejects input whose asymmetry exceeds
/// [`SYMMETRY_TOLERANCE`].
pub fn eig_symmetric(a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_symmetric(a)?;
    let sym = (a + a.transpose()) * 0.5;
    let decomp = sym.symmetric_eigen();
    let n = decomp.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| decomp.eigenvalues[i].total_cmp(&decomp.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| decomp.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &decomp.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Eigenvalues only, ascending.
pub fn eigenvalues_symmetric(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_symmetric(a)?;
    let sym = (a + a.transpose()) * 0.5;
    let mut vals: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|x, y| x.total_cmp(y));
    Ok(DVector::from_vec(vals))
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "expected square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOLERANCE {
        return Err(Error::Asymmetric(worst));
    }
    Ok(())
}

/// Weighted Laplacian `B diag(alpha) B^T`, assembled directly so the row
/// sums vanish by construction, then symmetrized to kill roundoff.
pub fn laplacian(topology: &Topology, alpha: &[f64]) -> Result<DMatrix<f64>> {
    if alpha.len() != topology.link_count() {
        return Err(Error::Dimension(format!(
            "{} weights for {} links",
            alpha.len(),
            topology.link_count()
        )));
    }
    let m = topology.node_count();
    let mut l = DMatrix::zeros(m, m);
    for (link, &a) in topology.links().iter().zip(alpha) {
        l[(link.u, link.u)] += a;
        l[(link.v, link.v)] += a;
        l[(link.u, link.v)] -= a;
        l[(link.v, link.u)] -= a;
    }
    let lt = l.transpose();
    Ok((l + lt) * 0.5)
}

/// The rank-one averaging matrix `J = (1/m) 1 1^T`.
pub fn averaging_matrix(m: usize) -> DMatrix<f64> {
    DMatrix::from_element(m, m, 1.0 / m as f64)
}

/// Mixing matrix `W = I - L(alpha)`.
pub fn mixing_matrix(topology: &Topology, alpha: &[f64]) -> Result<DMatrix<f64>> {
    let mut w = laplacian(topology, alpha)?;
    w.neg_mut();
    for i in 0..topology.node_count() {
        w[(i, i)] += 1.0;
    }
    Ok(w)
}

/// `max((1 - l2)^2, (1 - lm)^2)` over the Laplacian spectrum of `alpha`:
/// the exact deterministic `rho`, equal to `||I - L - J||^2`.
pub fn rho_from_weights(topology: &Topology, alpha: &[f64]) -> Result<f64> {
    let l = laplacian(topology, alpha)?;
    let eig = eigenvalues_symmetric(&l)?;
    let m = eig.len();
    let l2 = eig[1];
    let lm = eig[m - 1];
    Ok(((1.0 - l2).powi(2)).max((1.0 - lm).powi(2)))
}

/// A deterministic mixing design: link weights over a topology's candidate
/// links, with the spectral score computed once at construction.
#[derive(Clone, Debug)]
pub struct MixingDesign {
    topology: Arc<Topology>,
    alpha: Vec<f64>,
    rho: f64,
}

impl MixingDesign {
    pub fn new(topology: Arc<Topology>, alpha: Vec<f64>) -> Result<Self> {
        let rho = rho_from_weights(&topology, &alpha)?;
        Ok(MixingDesign {
            topology,
            alpha,
            rho,
        })
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// The deterministic convergence parameter `||W - J||^2`.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        laplacian(&self.topology, &self.alpha).expect("validated at construction")
    }

    pub fn mixing_matrix(&self) -> DMatrix<f64> {
        mixing_matrix(&self.topology, &self.alpha).expect("validated at construction")
    }

    /// Which candidate links this design activates.
    pub fn active_set(&self) -> ActiveSet {
        ActiveSet::from_weights(&self.alpha)
    }

    /// Worst deviation of a row sum of `W` from 1.
    pub fn row_sum_max_err(&self) -> f64 {
        let w = self.mixing_matrix();
        (0..w.nrows())
            .map(|i| (w.row(i).sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let links: Vec<serde_json::Value> = self
            .topology
            .links()
            .iter()
            .zip(&self.alpha)
            .map(|(l, a)| serde_json::json!({"u": l.u, "v": l.v, "alpha": a}))
            .collect();
        serde_json::json!({
            "m": self.topology.node_count(),
            "links": links,
            "rho": self.rho,
            "row_sum_max_err": self.row_sum_max_err(),
        })
    }

    /// Rebuild a design from its JSON form. Costs are not part of the design
    /// schema; the reconstructed topology carries zero costs and callers
    /// overlay a [`crate::cost::CostModel`] as needed.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let parsed: DesignJson = serde_json::from_value(value.clone())
            .map_err(|e| Error::Config(format!("bad design JSON: {e}")))?;
        let links: Vec<(usize, usize)> = parsed.links.iter().map(|l| (l.u, l.v)).collect();
        let alpha: Vec<f64> = parsed.links.iter().map(|l| l.alpha).collect();
        let n = links.len();
        let topology = Topology::new(
            parsed.m,
            links,
            vec![crate::topology::LinkCost::symmetric(0.0); n],
            vec![0.0; parsed.m],
        )?;
        MixingDesign::new(Arc::new(topology), alpha)
    }
}

#[derive(Deserialize, Serialize)]
struct DesignJson {
    m: usize,
    links: Vec<DesignLinkJson>,
}

#[derive(Deserialize, Serialize)]
struct DesignLinkJson {
    u: usize,
    v: usize,
    alpha: f64,
}

/// A finite distribution over mixing designs, all on the same node count.
#[derive(Clone, Debug)]
pub struct MixingDistribution {
    entries: Vec<(MixingDesign, f64)>,
}

impl MixingDistribution {
    pub fn new(entries: Vec<(MixingDesign, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Distribution("no designs".into()));
        }
        let m = entries[0].0.topology().node_count();
        if entries.iter().any(|(d, _)| d.topology().node_count() != m) {
            return Err(Error::Distribution(
                "designs disagree on node count".into(),
            ));
        }
        if entries.iter().any(|(_, p)| *p < 0.0 || !p.is_finite()) {
            return Err(Error::Distribution("negative probability".into()));
        }
        let total: f64 = entries.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Distribution(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(MixingDistribution { entries })
    }

    /// Point mass on a single design.
    pub fn deterministic(design: MixingDesign) -> Self {
        MixingDistribution {
            entries: vec![(design, 1.0)],
        }
    }

    pub fn entries(&self) -> &[(MixingDesign, f64)] {
        &self.entries
    }

    pub fn node_count(&self) -> usize {
        self.entries[0].0.topology().node_count()
    }

    pub fn is_deterministic(&self) -> bool {
        self.entries.len() == 1
    }

    /// `E[W^T W]` over the distribution. `W` is symmetric, so this is the
    /// probability-weighted sum of `W^2`.
    pub fn expected_gram(&self) -> DMatrix<f64> {
        let m = self.node_count();
        let mut acc = DMatrix::zeros(m, m);
        for (design, p) in &self.entries {
            let w = design.mixing_matrix();
            acc += &w * &w * *p;
        }
        acc
    }

    /// `rho = ||E[W^T W] - J||`.
    pub fn rho(&self) -> f64 {
        let s = self.expected_gram() - averaging_matrix(self.node_count());
        let eig = eigenvalues_symmetric(&s).expect("gram matrix is symmetric");
        eig[0].abs().max(eig[eig.len() - 1].abs())
    }

    /// Sample a design index with the given RNG.
    pub fn sample_index<R: rand::Rng>(&self, rng: &mut R) -> usize {
        if self.entries.len() == 1 {
            return 0;
        }
        let x: f64 = rng.random();
        let mut acc = 0.0;
        for (i, (_, p)) in self.entries.iter().enumerate() {
            acc += p;
            if x < acc {
                return i;
            }
        }
        self.entries.len() - 1
    }
}

/// `rho` of a deterministic design (`||W - J||^2`).
pub fn rho_deterministic(design: &MixingDesign) -> f64 {
    design.rho()
}

/// `rho` of a randomized design (`||E[W^T W] - J||`).
pub fn rho_randomized(dist: &MixingDistribution) -> f64 {
    dist.rho()
}

/// Outcome of [`validate_rho_bounds`]: one pass/fail per sub-check plus the
/// measured quantities.
#[derive(Clone, Debug, Serialize)]
pub struct RhoValidationReport {
    /// `||E[W^T W] - J||`.
    pub rho: f64,
    /// `E[||I - L - J||^2]`, the relaxed objective.
    pub expected_sq_norm: f64,
    /// `rho <= expected_sq_norm + 1e-9`.
    pub jensen_ok: bool,
    /// Largest sampled ratio `E||X(W-J)||_F^2 / ||X(I-J)||_F^2`.
    pub worst_ratio: f64,
    /// Every sampled ratio stayed within `rho + 1e-8`.
    pub ratio_ok: bool,
    /// Ratio attained by the X aligned with the top eigenvector.
    pub attained_ratio: f64,
    /// `|attained_ratio - rho| <= 1e-6` (realizes `p = 1 - rho`).
    pub attained_ok: bool,
    pub trials: usize,
}

impl RhoValidationReport {
    pub fn passed(&self) -> bool {
        self.jensen_ok && self.ratio_ok && self.attained_ok
    }
}

/// Check the two bounds that make `rho` the right convergence parameter:
/// the Jensen direction `rho <= E[||I - L - J||^2]`, and the contraction
/// ratio `E||X(W-J)||_F^2 / ||X(I-J)||_F^2 <= rho` for `trials` random
/// matrices `X`, with equality attained by an `X` built from the top
/// eigenvector of `E[W^T W] - J`.
///
/// The ratio is computed in closed form per sampled `X` as
/// `tr(X (E[W^T W] - J) X^T) / tr(X (I - J) X^T)`, valid because
/// `(W-J)(W-J)^T = W^T W - J` when `W J = J W = J`.
pub fn validate_rho_bounds(
    dist: &MixingDistribution,
    trials: usize,
    rng_seed: u64,
) -> Result<RhoValidationReport> {
    if trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let m = dist.node_count();
    let gram = dist.expected_gram();
    let s = &gram - averaging_matrix(m);
    let rho = {
        let eig = eigenvalues_symmetric(&s)?;
        eig[0].abs().max(eig[eig.len() - 1].abs())
    };

    let expected_sq_norm: f64 = dist
        .entries()
        .iter()
        .map(|(design, p)| p * design.rho())
        .sum();
    let jensen_ok = rho <= expected_sq_norm + 1e-9;

    // Projector onto the complement of the all-ones direction.
    let mut proj = DMatrix::identity(m, m);
    proj -= averaging_matrix(m);

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let rows = 4;
    let mut worst_ratio = 0.0f64;
    let mut done = 0;
    while done < trials {
        let x = DMatrix::from_fn(rows, m, |_, _| StandardNormal.sample(&mut rng));
        let denom = (&x * &proj * x.transpose()).trace();
        if denom < 1e-12 {
            // Rows fell into the all-ones direction; both traces vanish.
            continue;
        }
        let num = (&x * &s * x.transpose()).trace();
        worst_ratio = worst_ratio.max(num / denom);
        done += 1;
    }
    let ratio_ok = worst_ratio <= rho + 1e-8;

    // Align X with the top eigenvector of S; this realizes the ratio rho
    // exactly (p = 1 - rho). For rho = 0 the matrix S vanishes and every
    // ratio is 0.
    let attained_ratio = if rho < 1e-12 {
        0.0
    } else {
        let (values, vectors) = eig_symmetric(&s)?;
        let n = values.len();
        let top = if values[n - 1].abs() >= values[0].abs() {
            vectors.column(n - 1).into_owned()
        } else {
            vectors.column(0).into_owned()
        };
        let x = DMatrix::from_fn(1, m, |_, j| top[j]);
        let denom = (&x * &proj * x.transpose()).trace();
        let num = (&x * &s * x.transpose()).trace();
        num / denom
    };
    let attained_ok = (attained_ratio - rho).abs() <= 1e-6;

    Ok(RhoValidationReport {
        rho,
        expected_sq_norm,
        jensen_ok,
        worst_ratio,
        ratio_ok,
        attained_ratio,
        attained_ok,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Topology;
    use proptest::prelude::*;

    fn shared(t: Topology) -> Arc<Topology> {
        Arc::new(t)
    }

    fn design(t: &Arc<Topology>, alpha: &[f64]) -> MixingDesign {
        MixingDesign::new(t.clone(), alpha.to_vec()).unwrap()
    }

    #[test]
    fn eig_identity() {
        let eig = eigenvalues_symmetric(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(eig.as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn eig_path_laplacian() {
        // Characteristic polynomial x(x-1)(x-3).
        let t = Topology::path(3, 0.0, 1.0).unwrap();
        let l = laplacian(&t, &[1.0, 1.0]).unwrap();
        let eig = eigenvalues_symmetric(&l).unwrap();
        assert!((eig[0] - 0.0).abs() < 1e-12);
        assert!((eig[1] - 1.0).abs() < 1e-12);
        assert!((eig[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eig_diagonal() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 2.0]));
        let eig = eigenvalues_symmetric(&d).unwrap();
        assert_eq!(eig.as_slice(), &[2.0, 5.0]);
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(eig_symmetric(&a), Err(Error::Asymmetric(_))));
    }

    #[test]
    fn eigenvectors_are_orthonormal() {
        let t = Topology::random_geometric(6, 0.8, 0.0, 1.0, 3).unwrap();
        let alpha: Vec<f64> = (0..t.link_count()).map(|i| 0.1 + 0.01 * i as f64).collect();
        let l = laplacian(&t, &alpha).unwrap();
        let (_, vectors) = eig_symmetric(&l).unwrap();
        let gram = vectors.transpose() * &vectors;
        let id = DMatrix::identity(6, 6);
        assert!((gram - id).abs().max() < 1e-8);
    }

    #[test]
    fn laplacian_p3_scaled_spectrum() {
        let t = Topology::path(3, 0.0, 1.0).unwrap();
        let l = laplacian(&t, &[1.0 / 3.0, 1.0 / 3.0]).unwrap();
        let eig = eigenvalues_symmetric(&l).unwrap();
        assert!((eig[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((eig[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn laplacian_k3_uniform_is_i_minus_j() {
        let t = Topology::complete(3, 0.0, 1.0).unwrap();
        let l = laplacian(&t, &[1.0 / 3.0; 3]).unwrap();
        let expected = DMatrix::identity(3, 3) - averaging_matrix(3);
        assert!((l - expected).abs().max() < 1e-14);
    }

    #[test]
    fn laplacian_zero_weights() {
        let t = Topology::path(4, 0.0, 1.0).unwrap();
        let l = laplacian(&t, &[0.0; 3]).unwrap();
        assert_eq!(l.abs().max(), 0.0);
    }

    #[test]
    fn laplacian_rejects_length_mismatch() {
        let t = Topology::path(3, 0.0, 1.0).unwrap();
        assert!(laplacian(&t, &[1.0]).is_err());
    }

    #[test]
    fn rho_k3_uniform_is_zero() {
        let t = shared(Topology::complete(3, 0.0, 1.0).unwrap());
        let d = design(&t, &[1.0 / 3.0; 3]);
        assert!(d.rho() < 1e-14);
    }

    #[test]
    fn rho_identity_mixing_is_one() {
        let t = shared(Topology::path(3, 0.0, 1.0).unwrap());
        let d = design(&t, &[0.0, 0.0]);
        assert!((d.rho() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rho_p3_third_weights() {
        let t = shared(Topology::path(3, 0.0, 1.0).unwrap());
        let d = design(&t, &[1.0 / 3.0, 1.0 / 3.0]);
        assert!((d.rho() - 4.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn rho_randomized_matches_closed_form_mixture() {
        // m = 2: mixture of J and I gives ||(I+J)/2 - J|| = 1/2.
        let t = shared(Topology::complete(2, 0.0, 1.0).unwrap());
        let j_design = design(&t, &[0.5]); // W = J on two nodes
        let i_design = design(&t, &[0.0]); // W = I
        assert!(j_design.rho() < 1e-14);
        let dist =
            MixingDistribution::new(vec![(j_design, 0.5), (i_design, 0.5)]).unwrap();
        assert!((dist.rho() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rho_randomized_point_masses() {
        let t = shared(Topology::complete(3, 0.0, 1.0).unwrap());
        let j = MixingDistribution::deterministic(design(&t, &[1.0 / 3.0; 3]));
        assert!(j.rho() < 1e-12);
        let i = MixingDistribution::deterministic(design(&t, &[0.0; 3]));
        assert!((i.rho() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distribution_rejects_bad_probs() {
        let t = shared(Topology::complete(3, 0.0, 1.0).unwrap());
        let d = design(&t, &[0.1; 3]);
        assert!(MixingDistribution::new(vec![(d.clone(), 0.4), (d.clone(), 0.4)]).is_err());
        assert!(MixingDistribution::new(vec![(d, -1.0)]).is_err());
    }

    #[test]
    fn row_sums_of_w_are_one() {
        let t = shared(Topology::random_geometric(7, 0.7, 0.0, 1.0, 11).unwrap());
        let alpha: Vec<f64> = (0..t.link_count())
            .map(|i| 0.2 - 0.03 * (i % 5) as f64)
            .collect();
        let d = design(&t, &alpha);
        assert!(d.row_sum_max_err() < 1e-12);
        let w = d.mixing_matrix();
        assert!((&w - w.transpose()).abs().max() < 1e-14);
    }

    #[test]
    fn design_json_round_trip() {
        let t = shared(Topology::path(3, 0.0, 1.0).unwrap());
        let d = design(&t, &[0.5, 0.25]);
        let json = d.to_json();
        let back = MixingDesign::from_json(&json).unwrap();
        assert_eq!(back.alpha(), d.alpha());
        assert!((back.rho() - d.rho()).abs() < 1e-15);
    }

    #[test]
    fn validate_point_mass_on_j() {
        let t = shared(Topology::complete(3, 0.0, 1.0).unwrap());
        let dist = MixingDistribution::deterministic(design(&t, &[1.0 / 3.0; 3]));
        let report = validate_rho_bounds(&dist, 200, 1).unwrap();
        assert!(report.passed());
        assert!(report.rho < 1e-12);
        assert!(report.worst_ratio.abs() < 1e-12);
    }

    #[test]
    fn validate_point_mass_on_identity() {
        let t = shared(Topology::complete(3, 0.0, 1.0).unwrap());
        let dist = MixingDistribution::deterministic(design(&t, &[0.0; 3]));
        let report = validate_rho_bounds(&dist, 200, 2).unwrap();
        assert!(report.passed());
        assert!((report.rho - 1.0).abs() < 1e-12);
        assert!((report.attained_ratio - 1.0).abs() < 1e-6);
    }

    #[test]
    fn validate_two_point_mixture() {
        let t = shared(Topology::complete(2, 0.0, 1.0).unwrap());
        let dist = MixingDistribution::new(vec![
            (design(&t, &[0.5]), 0.5),
            (design(&t, &[0.0]), 0.5),
        ])
        .unwrap();
        let report = validate_rho_bounds(&dist, 10_000, 3).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!((report.rho - 0.5).abs() < 1e-12);
        assert!(report.worst_ratio <= 0.5 + 1e-8);
        assert!((report.attained_ratio - 0.5).abs() < 1e-6);
    }

    proptest! {
        // ||W^T W - J|| = ||W - J||^2 ties the two rho routes together.
        #[test]
        fn deterministic_and_randomized_rho_agree(seed in 0u64..150) {
            let t = shared(Topology::random_geometric(6, 0.8, 0.0, 1.0, seed).unwrap());
            let alpha: Vec<f64> = (0..t.link_count())
                .map(|i| 0.25 - 0.04 * (i % 7) as f64)
                .collect();
            let d = design(&t, &alpha);
            let det = d.rho();
            let rand = MixingDistribution::deterministic(d).rho();
            prop_assert!((det - rand).abs() < 1e-10);
        }

        // rho is nonnegative and the Jensen bound always holds.
        #[test]
        fn jensen_direction_holds(seed in 0u64..60) {
            let t = shared(Topology::random_geometric(5, 0.9, 0.0, 1.0, seed).unwrap());
            if t.link_count() == 0 { return Ok(()); }
            let a1: Vec<f64> = (0..t.link_count()).map(|i| 0.3 - 0.05 * (i % 3) as f64).collect();
            let a2: Vec<f64> = (0..t.link_count()).map(|i| 0.1 + 0.07 * (i % 4) as f64).collect();
            let dist = MixingDistribution::new(vec![
                (design(&t, &a1), 0.25),
                (design(&t, &a2), 0.75),
            ]).unwrap();
            let report = validate_rho_bounds(&dist, 50, seed).unwrap();
            prop_assert!(report.rho >= 0.0);
            prop_assert!(report.jensen_ok);
            prop_assert!(report.ratio_ok);
            prop_assert!(report.attained_ok);
        }
    }
}

//! Bayesian estimation of qudit populations from classified shot counts.
//!
//! With assignment matrix `M` and counts `N_j`, the posterior over the
//! population simplex is proportional to `prod_j ((M p)_j)^{N_j}`; several
//! readout frequencies multiply their factors. For `M = I` this is the
//! Dirichlet distribution with parameters `N_j + 1`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{gaussian_density, GaussianCloud};
use crate::readout::PhaseAmplitude;
use crate::{Error, Result};

/// Tolerance for "on the simplex" checks of caller-supplied vectors.
const SIMPLEX_TOL: f64 = 1e-9;

/// Condition numbers above this are treated as singular.
const MAX_CONDITION: f64 = 1e12;

/// Largest dimension handled by exhaustive active-set enumeration.
const MAX_ENUMERATION_DIM: usize = 12;

/// Largest dimension accepted by [`posterior_sd`].
pub const MAX_SD_DIM: usize = 6;

/// Fraction of the sample count below which the effective sample size
/// triggers a warning.
pub const ESS_WARNING_FRACTION: f64 = 0.05;

/// One readout frequency: its assignment matrix and the counts recorded there.
#[derive(Debug, Clone, PartialEq)]
pub struct CountBlock {
    pub m: DMatrix<f64>,
    pub counts: Vec<f64>,
}

/// Posterior over populations given one or more count blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationPosterior {
    pub blocks: Vec<CountBlock>,
    /// 2-norm condition number of each block's matrix.
    pub condition: Vec<f64>,
}

impl PopulationPosterior {
    /// Single-frequency posterior.
    pub fn new(m: DMatrix<f64>, counts: Vec<f64>) -> Result<Self> {
        Self::product(vec![CountBlock { m, counts }])
    }

    /// Product posterior over several readout frequencies.
    pub fn product(blocks: Vec<CountBlock>) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::InvalidInput(
                "posterior needs at least one count block".into(),
            ));
        };
        let d = first.m.nrows();
        let mut condition = Vec::with_capacity(blocks.len());
        for (k, b) in blocks.iter().enumerate() {
            if b.m.nrows() != d || b.m.ncols() != d || b.counts.len() != d {
                return Err(Error::InvalidInput(format!(
                    "block {k}: expected a {d}x{d} matrix and {d} counts"
                )));
            }
            if b.counts.iter().any(|n| !(*n >= 0.0 && n.is_finite())) {
                return Err(Error::InvalidInput(format!(
                    "block {k}: counts must be non-negative"
                )));
            }
            check_column_stochastic(&b.m).map_err(|e| match e {
                Error::InvalidInput(msg) => Error::InvalidInput(format!("block {k}: {msg}")),
                other => other,
            })?;
            condition.push(condition_number(&b.m));
        }
        Ok(Self { blocks, condition })
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].m.nrows()
    }

    /// Counts per class summed over all blocks.
    pub fn total_counts(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.dim()];
        for b in &self.blocks {
            for (t, n) in total.iter_mut().zip(&b.counts) {
                *t += n;
            }
        }
        total
    }

    /// Unnormalised log density, see [`log_density`].
    pub fn log_density(&self, p: &[f64]) -> Result<f64> {
        log_density(self, p)
    }
}

fn check_column_stochastic(m: &DMatrix<f64>) -> Result<()> {
    if m.iter()
        .any(|x| !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(x))
    {
        return Err(Error::InvalidInput(
            "assignment matrix entries must lie in [0, 1]".into(),
        ));
    }
    for (j, col) in m.column_iter().enumerate() {
        if (col.sum() - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidInput(format!(
                "assignment matrix column {j} sums to {}",
                col.sum()
            )));
        }
    }
    Ok(())
}

/// Ratio of largest to smallest singular value; infinite for singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = m.singular_values();
    let max = s.max();
    let min = s.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn check_simplex(p: &[f64], d: usize) -> Result<()> {
    if p.len() != d {
        return Err(Error::InvalidInput(format!(
            "expected {d} populations, got {}",
            p.len()
        )));
    }
    if p.iter().any(|x| !(*x >= -SIMPLEX_TOL)) || (p.iter().sum::<f64>() - 1.0).abs() > SIMPLEX_TOL
    {
        return Err(Error::Domain(format!(
            "{p:?} is not on the probability simplex"
        )));
    }
    Ok(())
}

/// `sum_k sum_j n_{k,j} log((M_k p)_j)`, without the normalising constant.
pub fn log_density(post: &PopulationPosterior, p: &[f64]) -> Result<f64> {
    check_simplex(p, post.dim())?;
    let pv = DVector::from_column_slice(p);
    let mut total = 0.0;
    for b in &post.blocks {
        let mp = &b.m * &pv;
        for (j, (q, n)) in mp.iter().zip(&b.counts).enumerate() {
            if !(*q > 0.0) {
                return Err(Error::Domain(format!("(M p)_{j} = {q} is not positive")));
            }
            if *n > 0.0 {
                total += n * q.ln();
            }
        }
    }
    Ok(total)
}

/// Log of the Dirichlet normaliser `Gamma(N + d) / prod_j Gamma(N_j + 1)`,
/// which turns [`log_density`] with `M = I` into a normalised density.
pub fn dirichlet_log_normalizer(counts: &[f64]) -> f64 {
    let n: f64 = counts.iter().sum();
    libm::lgamma(n + counts.len() as f64)
        - counts.iter().map(|c| libm::lgamma(c + 1.0)).sum::<f64>()
}

/// Closed-form mean and variance of `p_j` under `M = I`.
pub fn dirichlet_moments(counts: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let total: f64 = counts.iter().sum::<f64>() + counts.len() as f64;
    let mean: Vec<f64> = counts.iter().map(|c| (c + 1.0) / total).collect();
    let var = mean.iter().map(|m| m * (1.0 - m) / (total + 1.0)).collect();
    (mean, var)
}

/// Result of inverting the assignment matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub p: Vec<f64>,
    pub inside_simplex: bool,
    /// Components with `p_j < 0`.
    pub negative: Vec<usize>,
    pub condition: f64,
}

/// `M^{-1} N / N`. The result is returned even when it leaves the simplex.
pub fn posterior_mode(m: &DMatrix<f64>, counts: &[f64]) -> Result<ModeReport> {
    let d = m.nrows();
    if m.ncols() != d || counts.len() != d {
        return Err(Error::InvalidInput(format!(
            "expected a {d}x{d} matrix and {d} counts"
        )));
    }
    let n: f64 = counts.iter().sum();
    if !(n > 0.0) {
        return Err(Error::InvalidInput("no counts".into()));
    }
    let condition = condition_number(m);
    if !(condition < MAX_CONDITION) {
        return Err(Error::SingularMatrix(format!(
            "assignment matrix has condition number {condition:e}"
        )));
    }
    let freq = DVector::from_iterator(d, counts.iter().map(|c| c / n));
    let p = m
        .clone()
        .lu()
        .solve(&freq)
        .ok_or_else(|| Error::SingularMatrix("LU factorisation failed".into()))?;
    let p: Vec<f64> = p.iter().copied().collect();
    let negative: Vec<usize> = (0..d).filter(|&j| p[j] < 0.0).collect();
    Ok(ModeReport {
        inside_simplex: negative.is_empty(),
        negative,
        p,
        condition,
    })
}

/// `argmin_{p in simplex} |N/N - M p|^2`. When the unconstrained mode lies
/// in the simplex it is returned unchanged.
pub fn mitigate_least_squares(m: &DMatrix<f64>, counts: &[f64]) -> Result<Vec<f64>> {
    let d = m.nrows();
    if m.ncols() != d || counts.len() != d {
        return Err(Error::InvalidInput(format!(
            "expected a {d}x{d} matrix and {d} counts"
        )));
    }
    let n: f64 = counts.iter().sum();
    if !(n > 0.0) {
        return Err(Error::InvalidInput("no counts".into()));
    }
    if let Ok(mode) = posterior_mode(m, counts) {
        if mode.inside_simplex {
            return Ok(mode.p);
        }
    }
    let freq = DVector::from_iterator(d, counts.iter().map(|c| c / n));
    let p = if d <= MAX_ENUMERATION_DIM {
        simplex_ls_enumerate(m, &freq)
    } else {
        simplex_ls_projected_gradient(m, &freq)
    };
    Ok(p.iter().copied().collect())
}

fn ls_objective(m: &DMatrix<f64>, y: &DVector<f64>, p: &DVector<f64>) -> f64 {
    (y - m * p).norm_squared()
}

/// Solves the equality-constrained problem on every support and keeps the
/// best non-negative solution. Exact for small `d`.
fn simplex_ls_enumerate(m: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let d = m.nrows();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 1u32..(1 << d) {
        let support: Vec<usize> = (0..d).filter(|j| mask & (1 << j) != 0).collect();
        let s = support.len();
        let ms = m.select_columns(&support);
        // KKT system [2 Ms^T Ms, 1; 1^T, 0] [q; lambda] = [2 Ms^T y; 1]
        let mut kkt = DMatrix::zeros(s + 1, s + 1);
        kkt.view_mut((0, 0), (s, s))
            .copy_from(&(2.0 * ms.transpose() * &ms));
        let mut rhs = DVector::zeros(s + 1);
        rhs.rows_mut(0, s).copy_from(&(2.0 * ms.transpose() * y));
        for i in 0..s {
            kkt[(i, s)] = 1.0;
            kkt[(s, i)] = 1.0;
        }
        rhs[s] = 1.0;
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        if sol.rows(0, s).iter().any(|q| *q < -1e-14 || !q.is_finite()) {
            continue;
        }
        let mut p = DVector::zeros(d);
        for (k, &j) in support.iter().enumerate() {
            p[j] = sol[k].max(0.0);
        }
        let total = p.sum();
        p /= total;
        let f = ls_objective(m, y, &p);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, p));
        }
    }
    // every single-vertex support is feasible, so some candidate exists
    best.map(|(_, p)| p)
        .expect("vertex supports are always feasible")
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, x) in u.iter().enumerate() {
        cumulative += x;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

fn simplex_ls_projected_gradient(m: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let d = m.nrows();
    let mtm = m.transpose() * m;
    let mty = m.transpose() * y;
    let lipschitz = 2.0 * mtm.norm().max(f64::MIN_POSITIVE);
    let mut p = DVector::from_element(d, 1.0 / d as f64);
    for _ in 0..100_000 {
        let grad = 2.0 * (&mtm * &p - &mty);
        let step: Vec<f64> = (&p - grad / lipschitz).iter().copied().collect();
        let next = DVector::from_vec(project_to_simplex(&step));
        let moved = (&next - &p).amax();
        p = next;
        if moved < 1e-15 {
            break;
        }
    }
    p
}

/// Output of [`posterior_sd`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdReport {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Monte Carlo standard error of each variance estimate.
    pub variance_se: Vec<f64>,
    pub sd: Vec<f64>,
    /// Mean of `sd` over components.
    pub mean_sd: f64,
    pub ess: f64,
    pub samples: usize,
    /// Set when `ess < 0.05 * samples`.
    pub ess_warning: bool,
}

/// Dirichlet proposal, optionally mixed with the uniform distribution.
#[derive(Debug, Clone)]
struct Proposal {
    alpha: Vec<f64>,
    uniform_weight: f64,
}

impl Proposal {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let use_uniform =
            self.uniform_weight > 0.0 && rand::Rng::random::<f64>(rng) < self.uniform_weight;
        let draws: Vec<f64> = if use_uniform {
            (0..self.alpha.len())
                .map(|_| gamma_draw(1.0, rng))
                .collect()
        } else {
            self.alpha.iter().map(|&a| gamma_draw(a, rng)).collect()
        };
        let total: f64 = draws.iter().sum();
        draws.into_iter().map(|g| g / total).collect()
    }

    fn log_pdf(&self, p: &[f64]) -> f64 {
        let dir = dirichlet_log_pdf(&self.alpha, p);
        if self.uniform_weight == 0.0 {
            return dir;
        }
        let uniform = libm::lgamma(p.len() as f64);
        let a = (1.0 - self.uniform_weight).ln() + dir;
        let b = self.uniform_weight.ln() + uniform;
        let hi = a.max(b);
        hi + ((a - hi).exp() + (b - hi).exp()).ln()
    }
}

fn gamma_draw(shape: f64, rng: &mut ChaCha8Rng) -> f64 {
    Gamma::new(shape, 1.0).expect("positive shape").sample(rng)
}

fn dirichlet_log_pdf(alpha: &[f64], p: &[f64]) -> f64 {
    let a0: f64 = alpha.iter().sum();
    let mut v = libm::lgamma(a0);
    for (a, x) in alpha.iter().zip(p) {
        v += (a - 1.0) * x.ln() - libm::lgamma(*a);
    }
    v
}

/// Weighted moments of a sample set.
struct WeightedMoments {
    mean: Vec<f64>,
    variance: Vec<f64>,
    variance_se: Vec<f64>,
    ess: f64,
}

fn weighted_moments(samples: &[Vec<f64>], log_w: &[f64]) -> Option<WeightedMoments> {
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return None;
    }
    let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|x| x * x).sum();
    let d = samples[0].len();
    let mut mean = vec![0.0; d];
    for (x, wi) in samples.iter().zip(&w) {
        for j in 0..d {
            mean[j] += wi * x[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= sw);
    let mut variance = vec![0.0; d];
    for (x, wi) in samples.iter().zip(&w) {
        for j in 0..d {
            variance[j] += wi * (x[j] - mean[j]).powi(2);
        }
    }
    variance.iter_mut().for_each(|v| *v /= sw);
    let mut spread = vec![0.0; d];
    for (x, wi) in samples.iter().zip(&w) {
        for j in 0..d {
            spread[j] += (wi * ((x[j] - mean[j]).powi(2) - variance[j])).powi(2);
        }
    }
    let variance_se = spread.iter().map(|s| s.sqrt() / sw).collect();
    Some(WeightedMoments {
        mean,
        variance,
        variance_se,
        ess: sw * sw / sw2,
    })
}

/// Dirichlet matching the given mean and average relative variance.
fn moment_matched_alpha(mean: &[f64], variance: &[f64]) -> Option<Vec<f64>> {
    // Var[p_j] = m_j (1 - m_j) / (a0 + 1)
    let estimates: Vec<f64> = mean
        .iter()
        .zip(variance)
        .filter(|(m, v)| **m > 0.0 && **v > 0.0)
        .map(|(m, v)| m * (1.0 - m) / v - 1.0)
        .collect();
    if estimates.is_empty() {
        return None;
    }
    let a0 = estimates.iter().sum::<f64>() / estimates.len() as f64;
    if !(a0 > 0.0 && a0.is_finite()) {
        return None;
    }
    Some(mean.iter().map(|m| (m * a0).max(1e-3)).collect())
}

/// Posterior mean and standard deviation of every `p_j` by self-normalised
/// importance sampling.
///
/// The first proposal is `Dirichlet(N_j + 1)` with `N_j` the counts summed over
/// blocks, which is exact for identity matrices. If it captures less than
/// half the samples as effective size, the proposal is refitted to the
/// weighted moments (mixed with 10% uniform for heavy tails) and sampling is
/// repeated, at most three times. `ess_warning` is set (and logged) when the
/// final effective sample size is below 5% of `samples`.
pub fn posterior_sd(post: &PopulationPosterior, samples: usize, seed: u64) -> Result<SdReport> {
    let d = post.dim();
    if d > MAX_SD_DIM {
        return Err(Error::InvalidInput(format!(
            "posterior_sd supports up to {MAX_SD_DIM} states, got {d}"
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut proposal = Proposal {
        alpha: post.total_counts().iter().map(|n| n + 1.0).collect(),
        uniform_weight: 0.0,
    };
    let mut best: Option<WeightedMoments> = None;
    for round in 0..4 {
        let points: Vec<Vec<f64>> = (0..samples).map(|_| proposal.sample(&mut rng)).collect();
        let log_w: Vec<f64> = points
            .par_iter()
            .map(|p| match log_density(post, p) {
                Ok(l) => l - proposal.log_pdf(p),
                Err(_) => f64::NEG_INFINITY,
            })
            .collect();
        let Some(moments) = weighted_moments(&points, &log_w) else {
            continue;
        };
        let good = moments.ess >= 0.5 * samples as f64;
        let improved = best.as_ref().is_none_or(|b| moments.ess > b.ess);
        let refit = moment_matched_alpha(&moments.mean, &moments.variance);
        if improved {
            best = Some(moments);
        }
        if good || round == 3 {
            break;
        }
        match refit {
            Some(alpha) => {
                proposal = Proposal {
                    alpha,
                    uniform_weight: 0.1,
                }
            }
            None => break,
        }
    }
    let m = best.ok_or_else(|| {
        Error::Convergence("every importance sample has zero posterior weight".into())
    })?;
    let sd: Vec<f64> = m.variance.iter().map(|v| v.sqrt()).collect();
    let ess_warning = m.ess < ESS_WARNING_FRACTION * samples as f64;
    if ess_warning {
        log::warn!(
            "effective sample size {:.1} is below {:.0}% of {samples} samples",
            m.ess,
            100.0 * ESS_WARNING_FRACTION
        );
    }
    Ok(SdReport {
        mean_sd: sd.iter().sum::<f64>() / d as f64,
        sd,
        mean: m.mean,
        variance: m.variance,
        variance_se: m.variance_se,
        ess: m.ess,
        samples,
        ess_warning,
    })
}

/// Regular lattice `p = k / r` with `sum k = r` on the simplex of `d <= 3`
/// states. Functions on the grid are integrated with the weights of the
/// piecewise-linear interpolant over the lattice triangulation (trapezoid
/// rule for `d = 2`), which is exact for linear functions.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexGrid {
    pub d: usize,
    pub resolution: usize,
    pub points: Vec<Vec<f64>>,
    /// Quadrature weight of each point, summing to one.
    pub weights: Vec<f64>,
    /// Weights of the half-resolution lattice (points whose indices are all
    /// even), zero elsewhere. Used for the resolution check.
    coarse_weights: Vec<f64>,
}

/// Largest simplex dimension handled on a grid.
pub const MAX_GRID_DIM: usize = 3;

/// Relative normaliser mismatch between the grid and its half-resolution
/// subgrid that counts as under-resolved.
pub const GRID_DRIFT_TOL: f64 = 1e-3;

/// Unnormalised vertex weight: the number of lattice cells (segments or
/// triangles) touching a point with `zeros` vanishing indices.
fn vertex_weight(d: usize, zeros: usize) -> f64 {
    match (d, zeros) {
        (2, 0) => 2.0,
        (2, _) => 1.0,
        (_, 0) => 6.0,
        (_, 1) => 3.0,
        _ => 1.0,
    }
}

fn normalised(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

impl SimplexGrid {
    pub fn new(d: usize, resolution: usize) -> Result<Self> {
        if !(2..=MAX_GRID_DIM).contains(&d) {
            return Err(Error::InvalidInput(format!(
                "grid posteriors support 2 to {MAX_GRID_DIM} states, got {d}"
            )));
        }
        if resolution < 2 || resolution % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "grid resolution must be even and at least 2, got {resolution}"
            )));
        }
        let r = resolution;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut coarse = Vec::new();
        let mut push = |k: &[usize]| {
            points.push(k.iter().map(|&x| x as f64 / r as f64).collect());
            let zeros = k.iter().filter(|&&x| x == 0).count();
            weights.push(vertex_weight(d, zeros));
            coarse.push(if k.iter().all(|x| x % 2 == 0) {
                vertex_weight(d, zeros)
            } else {
                0.0
            });
        };
        if d == 2 {
            for k in 0..=r {
                push(&[k, r - k]);
            }
        } else {
            for k0 in 0..=r {
                for k1 in 0..=r - k0 {
                    push(&[k0, k1, r - k0 - k1]);
                }
            }
        }
        Ok(Self {
            d,
            resolution,
            points,
            weights: normalised(weights),
            coarse_weights: normalised(coarse),
        })
    }

    /// Uniform prior density (one everywhere on the normalised simplex).
    pub fn uniform_prior(&self) -> Vec<f64> {
        vec![1.0; self.points.len()]
    }

    /// Grid point with the largest density; ties go to the first point.
    pub fn mode(&self, density: &[f64]) -> &[f64] {
        let mut best = 0;
        for (i, m) in density.iter().enumerate() {
            if *m > density[best] {
                best = i;
            }
        }
        &self.points[best]
    }

    /// Posterior mean of `p` under `density`.
    pub fn mean(&self, density: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for ((p, w), f) in self.points.iter().zip(&self.weights).zip(density) {
            for j in 0..self.d {
                m[j] += w * f * p[j];
            }
        }
        m
    }
}

/// Single-shot Bayesian update on the grid: multiplies the prior density by
/// `P(z | p) = sum_j p_j G(z; A_j, sigma_j)` and renormalises. Fails with
/// [`Error::Resolution`] when the normaliser computed on the half-resolution
/// lattice differs by more than [`GRID_DRIFT_TOL`] relative.
pub fn sequential_update(
    grid: &SimplexGrid,
    prior: &[f64],
    z: PhaseAmplitude,
    clouds: &[GaussianCloud],
) -> Result<Vec<f64>> {
    if clouds.len() != grid.d || prior.len() != grid.points.len() {
        return Err(Error::InvalidInput(format!(
            "grid of {} states and {} points, got {} clouds and {} prior values",
            grid.d,
            grid.points.len(),
            clouds.len(),
            prior.len()
        )));
    }
    let g: Vec<f64> = clouds.iter().map(|c| gaussian_density(z, c)).collect();
    let scale = g.iter().copied().fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::Resolution(format!(
            "shot at {z} has zero likelihood under every cloud"
        )));
    }
    let post: Vec<f64> = grid
        .points
        .iter()
        .zip(prior)
        .map(|(p, f)| {
            f * p
                .iter()
                .zip(&g)
                .map(|(pj, gj)| pj * gj / scale)
                .sum::<f64>()
        })
        .collect();
    let integral = |w: &[f64], f: &[f64]| w.iter().zip(f).map(|(a, b)| a * b).sum::<f64>();
    let full = integral(&grid.weights, &post) / integral(&grid.weights, prior);
    let coarse = integral(&grid.coarse_weights, &post) / integral(&grid.coarse_weights, prior);
    if !(full > 0.0) {
        return Err(Error::Resolution(
            "posterior mass vanished on the grid".into(),
        ));
    }
    let drift = (coarse - full).abs() / full;
    if drift > GRID_DRIFT_TOL {
        return Err(Error::Resolution(format!(
            "normaliser differs by {drift:.2e} between resolution {} and {}",
            grid.resolution,
            grid.resolution / 2
        )));
    }
    let norm = integral(&grid.weights, &post);
    Ok(post.into_iter().map(|x| x / norm).collect())
}

/// Folds [`sequential_update`] over `shots` starting from the uniform prior.
pub fn sequential_posterior(
    grid: &SimplexGrid,
    shots: &[PhaseAmplitude],
    clouds: &[GaussianCloud],
) -> Result<Vec<f64>> {
    shots.iter().try_fold(grid.uniform_prior(), |prior, &z| {
        sequential_update(grid, &prior, z, clouds)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_onto_simplex() {
        assert_eq!(project_to_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
        let p = project_to_simplex(&[1.5, 0.0, -0.2]);
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] == 0.0 && p[2] == 0.0);
        let q = project_to_simplex(&[0.5, 0.5, 0.5]);
        assert!(q.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn projected_gradient_agrees_with_enumeration() {
        let m = DMatrix::from_row_slice(3, 3, &[0.8, 0.1, 0.1, 0.15, 0.7, 0.2, 0.05, 0.2, 0.7]);
        let y = DVector::from_vec(vec![0.9, 0.1, 0.0]);
        let a = simplex_ls_enumerate(&m, &y);
        let b = simplex_ls_projected_gradient(&m, &y);
        assert!((a - b).amax() < 1e-9);
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(SimplexGrid::new(2, 10).unwrap().points.len(), 11);
        assert_eq!(SimplexGrid::new(3, 10).unwrap().points.len(), 66);
        assert!(SimplexGrid::new(4, 10).is_err());
        assert!(SimplexGrid::new(3, 9).is_err());
    }

    #[test]
    fn moment_matching_recovers_dirichlet() {
        let (mean, var) = dirichlet_moments(&[4.0, 1.0, 0.0]);
        let alpha = moment_matched_alpha(&mean, &var).unwrap();
        for (a, b) in alpha.iter().zip([5.0, 2.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

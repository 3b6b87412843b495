//! Phase-space discrimination of qudit states.
//!
//! Each prepared state `|j>` produces an isotropic Gaussian cloud of
//! integrated signals around its steady-state amplitude. A shot is labelled
//! by the nearest centre (minimum distance estimator). The assignment matrix
//! `M[(i, j)]` is the probability of labelling a shot `i` when `j` was
//! prepared; columns sum to one.
//!
//! When all centres share one circle and one width, every decision region is
//! a wedge with its apex at the circle centre and the Gaussian mass of a
//! wedge has a closed form in terms of Owen's T function.

mod owen;

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use owen::{owen_t, owen_t_general};

use crate::readout::PhaseAmplitude;
use crate::special::erf;
use crate::{Error, Result};

/// Minimum samples per column for Monte Carlo assignment matrices.
pub const MIN_MC_SAMPLES: usize = 10_000;

/// Default Monte Carlo samples per column.
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

/// Isotropic 2-D Gaussian around a steady-state amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianCloud {
    pub center: PhaseAmplitude,
    pub sigma: f64,
}

impl GaussianCloud {
    pub fn new(center: PhaseAmplitude, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "cloud width must be positive, got {sigma}"
            )));
        }
        Ok(Self { center, sigma })
    }

    /// Draws one point from the cloud.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PhaseAmplitude {
        let u: f64 = rng.sample(StandardNormal);
        let v: f64 = rng.sample(StandardNormal);
        self.center + Complex64::new(u, v) * self.sigma
    }
}

/// Clouds of common width `sigma` around `centers`.
pub fn clouds_with_sigma(centers: &[PhaseAmplitude], sigma: f64) -> Result<Vec<GaussianCloud>> {
    centers
        .iter()
        .map(|&c| GaussianCloud::new(c, sigma))
        .collect()
}

pub fn gaussian_density(z: PhaseAmplitude, cloud: &GaussianCloud) -> f64 {
    let s2 = cloud.sigma * cloud.sigma;
    (-(z - cloud.center).norm_sqr() / (2.0 * s2)).exp() / (2.0 * PI * s2)
}

/// Index of the nearest centre; ties go to the lowest index.
pub fn classify_mde(z: PhaseAmplitude, centers: &[PhaseAmplitude]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = (z - c).norm_sqr();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Index of the most likely cloud; ties go to the lowest index.
pub fn classify_mle(z: PhaseAmplitude, clouds: &[GaussianCloud]) -> usize {
    let mut best = 0;
    let mut best_l = f64::NEG_INFINITY;
    for (i, c) in clouds.iter().enumerate() {
        let s2 = c.sigma * c.sigma;
        let l = -(2.0 * PI * s2).ln() - (z - c.center).norm_sqr() / (2.0 * s2);
        if l > best_l {
            best = i;
            best_l = l;
        }
    }
    best
}

/// How an assignment matrix was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mc,
    Owen,
    Empirical,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::Owen => "owen",
            Method::Empirical => "empirical",
        }
    }
}

/// Column-stochastic misclassification matrix, `m[(classified, prepared)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMatrix {
    pub m: DMatrix<f64>,
    pub method: Method,
}

impl AssignmentMatrix {
    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn identity(d: usize) -> Self {
        Self {
            m: DMatrix::identity(d, d),
            method: Method::Owen,
        }
    }

    /// Largest deviation of a column sum from one.
    pub fn column_sum_error(&self) -> f64 {
        self.m
            .column_iter()
            .map(|c| (c.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn error_measures(&self) -> ErrorMeasures {
        error_measures(&self.m)
    }
}

/// Per-state misclassification probabilities and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMeasures {
    pub per_state: Vec<f64>,
    pub mean: f64,
}

pub fn error_measures(m: &DMatrix<f64>) -> ErrorMeasures {
    let per_state: Vec<f64> = (0..m.nrows()).map(|j| 1.0 - m[(j, j)]).collect();
    let mean = per_state.iter().sum::<f64>() / per_state.len().max(1) as f64;
    ErrorMeasures { per_state, mean }
}

/// Monte Carlo assignment matrix with MDE labelling. Column `j` draws from
/// its own ChaCha stream `j` of `seed`, so results do not depend on thread
/// scheduling.
pub fn assignment_matrix_mc(
    clouds: &[GaussianCloud],
    n_samples: usize,
    seed: u64,
) -> Result<AssignmentMatrix> {
    if clouds.is_empty() {
        return Err(Error::InvalidInput("no clouds".into()));
    }
    if n_samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "{n_samples} samples per column, need at least {MIN_MC_SAMPLES}"
        )));
    }
    let d = clouds.len();
    let centers: Vec<PhaseAmplitude> = clouds.iter().map(|c| c.center).collect();
    let columns: Vec<Vec<u64>> = (0..d)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let mut counts = vec![0u64; d];
            for _ in 0..n_samples {
                counts[classify_mde(clouds[j].sample(&mut rng), &centers)] += 1;
            }
            counts
        })
        .collect();
    let n = n_samples as f64;
    Ok(AssignmentMatrix {
        m: DMatrix::from_fn(d, d, |i, j| columns[j][i] as f64 / n),
        method: Method::Mc,
    })
}

/// Assignment matrix from labelled shots: `counts[j][i]` shots prepared in
/// `j` were classified as `i`.
pub fn assignment_matrix_empirical(counts: &[Vec<u64>]) -> Result<AssignmentMatrix> {
    let d = counts.len();
    if d == 0 || counts.iter().any(|c| c.len() != d) {
        return Err(Error::InvalidInput(
            "counts must form a square table".into(),
        ));
    }
    let totals: Vec<u64> = counts.iter().map(|c| c.iter().sum()).collect();
    if let Some(j) = totals.iter().position(|&t| t == 0) {
        return Err(Error::InvalidInput(format!(
            "no shots for prepared state {j}"
        )));
    }
    Ok(AssignmentMatrix {
        m: DMatrix::from_fn(d, d, |i, j| counts[j][i] as f64 / totals[j] as f64),
        method: Method::Empirical,
    })
}

/// Relative tolerance for the common-circle and common-width checks.
const CIRCLE_TOL: f64 = 1e-8;

/// Closed-form assignment matrix for clouds of equal width whose centres lie
/// on one circle. The circle is fitted from the centres.
pub fn assignment_matrix_owen(clouds: &[GaussianCloud]) -> Result<AssignmentMatrix> {
    let centers: Vec<PhaseAmplitude> = clouds.iter().map(|c| c.center).collect();
    let circle = fit_circle(&centers)?;
    assignment_matrix_owen_with_center(clouds, circle)
}

/// As [`assignment_matrix_owen`] with a known circle centre.
pub fn assignment_matrix_owen_with_center(
    clouds: &[GaussianCloud],
    center: PhaseAmplitude,
) -> Result<AssignmentMatrix> {
    let d = clouds.len();
    if d == 0 {
        return Err(Error::InvalidInput("no clouds".into()));
    }
    let sigma = clouds[0].sigma;
    if clouds
        .iter()
        .any(|c| (c.sigma - sigma).abs() > CIRCLE_TOL * sigma)
    {
        return Err(Error::Geometry("clouds do not share one width".into()));
    }
    if d == 1 {
        return Ok(AssignmentMatrix {
            m: DMatrix::identity(1, 1),
            method: Method::Owen,
        });
    }
    let radii: Vec<f64> = clouds.iter().map(|c| (c.center - center).norm()).collect();
    let radius = radii.iter().sum::<f64>() / d as f64;
    if !(radius > 0.0)
        || radii
            .iter()
            .any(|r| (r - radius).abs() > CIRCLE_TOL * radius)
    {
        return Err(Error::Geometry(format!(
            "centres are not on a common circle about {center}"
        )));
    }

    let wedges = decision_wedges(clouds, center)?;
    let mut m = DMatrix::zeros(d, d);
    for wedge in &wedges {
        for (j, cloud) in clouds.iter().enumerate() {
            m[(wedge.state, j)] += wedge_mass(wedge, center, cloud.center, sigma);
        }
    }
    Ok(AssignmentMatrix {
        m,
        method: Method::Owen,
    })
}

/// Piece of a decision region: the angular sector `[start, start + opening]`
/// (counter-clockwise, apex at the circle centre) assigned to `state`.
#[derive(Debug, Clone, Copy)]
struct Wedge {
    state: usize,
    start: f64,
    opening: f64,
}

/// Splits the plane into MDE regions. For centres on a circle, the
/// bisector of two angular neighbours passes through the circle centre, so
/// each region is the sector between the two neighbouring bisectors. Sectors
/// wider than a right angle are cut into equal pieces so that every piece
/// has a finite, non-negative bisector slope.
fn decision_wedges(clouds: &[GaussianCloud], center: PhaseAmplitude) -> Result<Vec<Wedge>> {
    let d = clouds.len();
    let mut order: Vec<(usize, f64)> = clouds
        .iter()
        .enumerate()
        .map(|(i, c)| (i, (c.center - center).arg().rem_euclid(TAU)))
        .collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1));
    let gap = |k: usize| -> f64 {
        let (from, to) = (order[k].1, order[(k + 1) % d].1);
        (to - from).rem_euclid(TAU)
    };
    for k in 0..d {
        if gap(k) < 1e-12 {
            return Err(Error::Geometry(format!(
                "states {} and {} coincide",
                order[k].0,
                order[(k + 1) % d].0
            )));
        }
    }
    let mut wedges = Vec::with_capacity(2 * d);
    for k in 0..d {
        let before = gap((k + d - 1) % d);
        let after = gap(k);
        let start = order[k].1 - 0.5 * before;
        let opening = 0.5 * (before + after);
        let pieces = (opening / FRAC_PI_2 - 1e-12).ceil().max(1.0) as usize;
        let step = opening / pieces as f64;
        for p in 0..pieces {
            wedges.push(Wedge {
                state: order[k].0,
                start: start + p as f64 * step,
                opening: step,
            });
        }
    }
    Ok(wedges)
}

/// Gaussian mass of `wedge` for a cloud centred at `mean`.
///
/// The configuration is rotated about the circle centre so that the
/// counter-clockwise edge of the sector points straight down. The sector then reads
/// `{x <= x_c, y <= y_c + a (x - x_c)}` with `a = cot(opening)`, the slope of
/// the other bisector, and its mass is
/// `1/4 (1 - erf((x - x_c)/(sqrt2 sigma))) + T((x - x_c)/sigma, -a, (y_c - y + a (x - x_c))/sigma)`.
fn wedge_mass(wedge: &Wedge, center: PhaseAmplitude, mean: PhaseAmplitude, sigma: f64) -> f64 {
    let end = wedge.start + wedge.opening;
    let rotation = Complex64::from_polar(1.0, 1.5 * PI - end);
    let rotated = center + (mean - center) * rotation;
    let (dx, dy) = (rotated.re - center.re, rotated.im - center.im);
    let slope = 1.0 / wedge.opening.tan();
    let h = dx / sigma;
    0.25 * (1.0 - erf(h * FRAC_1_SQRT_2)) + owen_t_general(h, -slope, (slope * dx - dy) / sigma)
}

/// Circle through the centres: midpoint for two states, otherwise the
/// circumcircle of the best-conditioned triple. Membership of the remaining
/// centres is checked by the caller.
pub fn fit_circle(centers: &[PhaseAmplitude]) -> Result<PhaseAmplitude> {
    match centers.len() {
        0 => Err(Error::InvalidInput("no centres".into())),
        1 => Ok(centers[0]),
        2 => Ok(0.5 * (centers[0] + centers[1])),
        n => {
            let mut best: Option<(f64, (usize, usize, usize))> = None;
            for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        let (a, b, c) = (centers[i], centers[j], centers[k]);
                        let area = ((b - a).conj() * (c - a)).im.abs();
                        if best.is_none_or(|(best_area, _)| area > best_area) {
                            best = Some((area, (i, j, k)));
                        }
                    }
                }
            }
            let (area, (i, j, k)) = best.expect("at least one triple");
            if !(area > 0.0) {
                return Err(Error::Geometry("centres are collinear".into()));
            }
            Ok(circumcenter(centers[i], centers[j], centers[k]))
        }
    }
}

fn circumcenter(a: PhaseAmplitude, b: PhaseAmplitude, c: PhaseAmplitude) -> PhaseAmplitude {
    let (b, c) = (b - a, c - a);
    let det = 2.0 * (b.re * c.im - b.im * c.re);
    let (nb, nc) = (b.norm_sqr(), c.norm_sqr());
    a + Complex64::new((c.im * nb - b.im * nc) / det, (b.re * nc - c.re * nb) / det)
}

/// Bisector slope `-(x_i - x_{i-1}) / (y_i - y_{i-1})` of two centres.
pub fn bisector_slope(a: PhaseAmplitude, b: PhaseAmplitude) -> f64 {
    -(a.re - b.re) / (a.im - b.im)
}

/// Picks the closed form when its preconditions hold and falls back to
/// Monte Carlo otherwise.
pub fn assignment_matrix_auto(
    clouds: &[GaussianCloud],
    circle: Option<PhaseAmplitude>,
    n_samples: usize,
    seed: u64,
) -> Result<AssignmentMatrix> {
    let closed = match circle {
        Some(c) => assignment_matrix_owen_with_center(clouds, c),
        None => assignment_matrix_owen(clouds),
    };
    match closed {
        Ok(m) => Ok(m),
        Err(Error::Geometry(_)) => assignment_matrix_mc(clouds, n_samples, seed),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> PhaseAmplitude {
        Complex64::new(re, im)
    }

    #[test]
    fn density_peak_and_e_fold() {
        let cloud = GaussianCloud::new(c(1.0, -2.0), 0.5).unwrap();
        let peak = 1.0 / (2.0 * PI * 0.25);
        assert!((gaussian_density(c(1.0, -2.0), &cloud) - peak).abs() < 1e-15);
        let z = c(1.0 + 0.5 * 2f64.sqrt(), -2.0);
        assert!((gaussian_density(z, &cloud) - peak * (-1f64).exp()).abs() < 1e-14);
        assert!(GaussianCloud::new(c(0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn mde_basics() {
        let centers = [c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 3.0)];
        assert_eq!(classify_mde(c(0.0, 3.0), &centers), 2);
        assert_eq!(classify_mde(c(0.0, 0.0), &centers), 0);
    }

    #[test]
    fn mle_single_cloud_and_width_pull() {
        let one = [GaussianCloud::new(c(0.0, 0.0), 1.0).unwrap()];
        assert_eq!(classify_mle(c(5.0, 5.0), &one), 0);
        let wide = GaussianCloud::new(c(0.0, 0.0), 3.0).unwrap();
        let narrow = GaussianCloud::new(c(4.0, 0.0), 0.5).unwrap();
        // midpoint belongs to the wide cloud under MLE, a tie under MDE
        assert_eq!(classify_mle(c(2.0, 0.0), &[wide, narrow]), 0);
        assert_eq!(classify_mle(c(2.5, 0.0), &[wide, narrow]), 0);
        assert_eq!(classify_mle(c(4.2, 0.0), &[wide, narrow]), 1);
    }

    #[test]
    fn single_cloud_matrices() {
        let one = [GaussianCloud::new(c(0.3, 0.1), 1.0).unwrap()];
        assert_eq!(
            assignment_matrix_mc(&one, 10_000, 1).unwrap().m[(0, 0)],
            1.0
        );
        assert_eq!(assignment_matrix_owen(&one).unwrap().m[(0, 0)], 1.0);
    }

    #[test]
    fn mc_requires_enough_samples() {
        let one = [GaussianCloud::new(c(0.3, 0.1), 1.0).unwrap()];
        assert!(assignment_matrix_mc(&one, 10, 1).is_err());
    }

    #[test]
    fn error_measure_limits() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(error_measures(&id).per_state, vec![0.0; 3]);
        let uniform = DMatrix::from_element(4, 4, 0.25);
        let e = error_measures(&uniform);
        assert!(e.per_state.iter().all(|x| (x - 0.75).abs() < 1e-15));
        assert!((e.mean - 0.75).abs() < 1e-15);
    }

    #[test]
    fn empirical_counts() {
        let m = assignment_matrix_empirical(&[vec![9, 1], vec![2, 8]]).unwrap();
        assert_eq!(m.m[(0, 0)], 0.9);
        assert_eq!(m.m[(0, 1)], 0.2);
        assert_eq!(m.method, Method::Empirical);
        assert!(assignment_matrix_empirical(&[vec![0, 0], vec![2, 8]]).is_err());
    }

    #[test]
    fn owen_geometry_errors() {
        let off_circle =
            clouds_with_sigma(&[c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -2.0)], 0.3)
                .unwrap();
        assert!(matches!(
            assignment_matrix_owen(&off_circle),
            Err(Error::Geometry(_))
        ));
        let mixed = [
            GaussianCloud::new(c(1.0, 0.0), 0.3).unwrap(),
            GaussianCloud::new(c(-1.0, 0.0), 0.4).unwrap(),
        ];
        assert!(matches!(
            assignment_matrix_owen(&mixed),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn circumcenter_of_right_triangle() {
        let cc = circumcenter(c(0.0, 0.0), c(2.0, 0.0), c(0.0, 2.0));
        assert!((cc - c(1.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn two_states_split_the_plane_in_half() {
        let clouds = clouds_with_sigma(&[c(-1.0, 0.0), c(1.0, 0.0)], 1.0).unwrap();
        let m = assignment_matrix_owen(&clouds).unwrap();
        let expected = 0.5 * (1.0 - erf(2.0 / (2.0 * 2f64.sqrt())));
        assert!((m.m[(1, 0)] - expected).abs() < 1e-14, "{}", m.m);
        assert!((m.m[(0, 1)] - expected).abs() < 1e-14);
        assert!(m.column_sum_error() < 1e-13);
    }

    #[test]
    fn slope_from_points_matches_opening() {
        // states at angles 0 and 100 degrees about the origin; after rotating
        // the bisector of (A_i, A_{i+1}) vertical, the other bisector has
        // slope cot(opening)
        let opening = 1.1_f64;
        let a_prev = Complex64::from_polar(1.0, -0.4);
        let a_i = Complex64::from_polar(1.0, -0.4 + 2.0 * opening);
        // bisector direction of the pair sits at -0.4 + opening; rotate it to 3pi/2 - opening
        let rot = Complex64::from_polar(1.0, 1.5 * PI - opening - (-0.4 + opening));
        let s = bisector_slope(a_i * rot, a_prev * rot);
        assert!((s - 1.0 / opening.tan()).abs() < 1e-12, "{s}");
    }
}

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use qudit_readout::assignment::{classify_mde, clouds_with_sigma};
use qudit_readout::inference::{
    dirichlet_log_normalizer, dirichlet_moments, log_density, mitigate_least_squares,
    posterior_mode, posterior_sd, sequential_posterior, sequential_update, CountBlock,
    PopulationPosterior, SimplexGrid,
};
use qudit_readout::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn m2() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9])
}

fn m3() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[0.85, 0.1, 0.02, 0.12, 0.8, 0.13, 0.03, 0.1, 0.85])
}

fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn objective(m: &DMatrix<f64>, counts: &[f64], p: &[f64]) -> f64 {
    let n: f64 = counts.iter().sum();
    (0..m.nrows())
        .map(|i| {
            let mp: f64 = (0..m.ncols()).map(|j| m[(i, j)] * p[j]).sum();
            (counts[i] / n - mp).powi(2)
        })
        .sum()
}

#[test]
fn two_state_identity_density() {
    let post = PopulationPosterior::new(DMatrix::identity(2, 2), vec![1.0, 1.0]).unwrap();
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 1..1000 {
        let p0 = k as f64 / 1000.0;
        let l = log_density(&post, &[p0, 1.0 - p0]).unwrap();
        assert!((l - (p0 * (1.0 - p0)).ln()).abs() < 1e-12);
        if l > best.1 {
            best = (p0, l);
        }
    }
    assert!((best.0 - 0.5).abs() < 1e-12);
}

#[test]
fn identity_matrix_gives_normalised_dirichlet() {
    let counts = [3u64, 0, 5, 2];
    let n: u64 = counts.iter().sum();
    let fc: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let post = PopulationPosterior::new(DMatrix::identity(4, 4), fc.clone()).unwrap();
    // Gamma(N + d) / prod Gamma(N_j + 1) with integer arguments
    let log_norm = ln_factorial(n + 3) - counts.iter().map(|&c| ln_factorial(c)).sum::<f64>();
    assert!((dirichlet_log_normalizer(&fc) - log_norm).abs() < 1e-10);
    let p = [0.2, 0.1, 0.45, 0.25];
    let pdf: f64 = log_norm
        + counts
            .iter()
            .zip(p)
            .map(|(&c, x)| c as f64 * f64::ln(x))
            .sum::<f64>();
    let ours = log_density(&post, &p).unwrap() + dirichlet_log_normalizer(&fc);
    assert!((ours - pdf).abs() < 1e-10);
}

#[test]
fn density_errors() {
    let post = PopulationPosterior::new(DMatrix::identity(2, 2), vec![1.0, 1.0]).unwrap();
    assert!(matches!(
        log_density(&post, &[1.0, 0.0]),
        Err(Error::Domain(_))
    ));
    assert!(matches!(
        log_density(&post, &[0.7, 0.7]),
        Err(Error::Domain(_))
    ));
    let bad = DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.2, 0.9]);
    assert!(PopulationPosterior::new(bad, vec![1.0, 1.0]).is_err());
}

#[test]
fn two_identical_blocks_equal_doubled_counts() {
    let counts = vec![40.0, 35.0, 25.0];
    let doubled: Vec<f64> = counts.iter().map(|c| 2.0 * c).collect();
    let block = CountBlock { m: m3(), counts };
    let product = PopulationPosterior::product(vec![block.clone(), block]).unwrap();
    let single = PopulationPosterior::new(m3(), doubled).unwrap();
    for p in [[0.3, 0.3, 0.4], [0.5, 0.2, 0.3], [0.1, 0.8, 0.1]] {
        let a = log_density(&product, &p).unwrap();
        let b = log_density(&single, &p).unwrap();
        assert!((a - b).abs() < 1e-10 * b.abs());
    }
    let sa = posterior_sd(&product, 20_000, 4).unwrap();
    let sb = posterior_sd(&single, 20_000, 4).unwrap();
    for (a, b) in sa.sd.iter().zip(&sb.sd) {
        assert!((a - b).abs() < 1e-3 * b, "{a} vs {b}");
    }
}

#[test]
fn density_invariant_under_relabelling() {
    let counts = vec![30.0, 50.0, 20.0];
    let perm = [2, 0, 1];
    let m = m3();
    let pm = DMatrix::from_fn(3, 3, |i, j| m[(perm[i], perm[j])]);
    let pc: Vec<f64> = perm.iter().map(|&k| counts[k]).collect();
    let a = PopulationPosterior::new(m, counts).unwrap();
    let b = PopulationPosterior::new(pm, pc).unwrap();
    let p = [0.25, 0.6, 0.15];
    let pp: Vec<f64> = perm.iter().map(|&k| p[k]).collect();
    assert!((log_density(&a, &p).unwrap() - log_density(&b, &pp).unwrap()).abs() < 1e-10);
}

#[test]
fn mode_examples() {
    let id = posterior_mode(&DMatrix::identity(3, 3), &[6.0, 3.0, 1.0]).unwrap();
    assert_eq!(id.p, vec![0.6, 0.3, 0.1]);
    let inside = posterior_mode(&m2(), &[0.9, 0.1]).unwrap();
    assert!((inside.p[0] - 1.0).abs() < 1e-15 && inside.p[1].abs() < 1e-15);
    let outside = posterior_mode(&m2(), &[1.0, 0.0]).unwrap();
    assert!((outside.p[0] - 1.125).abs() < 1e-14 && (outside.p[1] + 0.125).abs() < 1e-14);
    assert!(!outside.inside_simplex);
    assert_eq!(outside.negative, vec![1]);
    let singular = DMatrix::from_element(2, 2, 0.5);
    assert!(matches!(
        posterior_mode(&singular, &[1.0, 1.0]),
        Err(Error::SingularMatrix(_))
    ));
}

#[test]
fn mitigation_examples() {
    assert_eq!(
        mitigate_least_squares(&m2(), &[1.0, 0.0]).unwrap(),
        vec![1.0, 0.0]
    );
    // 1-D scan oracle on the two-state simplex
    let counts = [1.0, 0.0];
    let best = (0..=100_000)
        .map(|k| k as f64 / 100_000.0)
        .min_by(|a, b| {
            objective(&m2(), &counts, &[*a, 1.0 - a]).total_cmp(&objective(
                &m2(),
                &counts,
                &[*b, 1.0 - b],
            ))
        })
        .unwrap();
    assert_eq!(best, 1.0);
    let interior = [70.0, 20.0, 10.0];
    assert_eq!(
        mitigate_least_squares(&m3(), &interior).unwrap(),
        posterior_mode(&m3(), &interior).unwrap().p
    );
    let id = mitigate_least_squares(&DMatrix::identity(3, 3), &[5.0, 3.0, 2.0]).unwrap();
    assert_eq!(id, vec![0.5, 0.3, 0.2]);
}

#[test]
fn mitigation_matches_grid_scan() {
    let counts = [95.0, 0.0, 5.0];
    let p = mitigate_least_squares(&m3(), &counts).unwrap();
    let r = 400;
    let mut best = f64::INFINITY;
    for a in 0..=r {
        for b in 0..=r - a {
            let q = [
                a as f64 / r as f64,
                b as f64 / r as f64,
                (r - a - b) as f64 / r as f64,
            ];
            best = best.min(objective(&m3(), &counts, &q));
        }
    }
    let ours = objective(&m3(), &counts, &p);
    assert!(ours <= best + 1e-12, "{ours} vs grid {best}");
}

#[test]
fn identity_sd_matches_dirichlet_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..10 {
        let d = 2 + case % 3;
        let counts: Vec<f64> = (0..d).map(|_| rng.random_range(0..200) as f64).collect();
        let post = PopulationPosterior::new(DMatrix::identity(d, d), counts.clone()).unwrap();
        let report = posterior_sd(&post, 40_000, case as u64).unwrap();
        let (_, var) = dirichlet_moments(&counts);
        assert!((report.ess - 40_000.0).abs() < 1e-6);
        assert!(!report.ess_warning);
        for j in 0..d {
            // about 30 comparisons; 4 SE keeps the family-wise false-alarm
            // rate near 0.2%
            let tol = 4.0 * report.variance_se[j];
            assert!(
                (report.variance[j] - var[j]).abs() <= tol,
                "case {case} j {j}: {} vs {} (tol {tol:e}) counts {counts:?}",
                report.variance[j],
                var[j]
            );
        }
    }
}

#[test]
fn sd_scales_as_inverse_sqrt_counts() {
    let share = [0.4, 0.3, 0.2, 0.1];
    let sd = |n: f64| {
        let counts: Vec<f64> = share.iter().map(|s| s * n).collect();
        let post = PopulationPosterior::new(DMatrix::identity(4, 4), counts).unwrap();
        posterior_sd(&post, 40_000, 1).unwrap()
    };
    let (a, b) = (sd(1000.0), sd(4000.0));
    for j in 0..4 {
        let asymptotic = (share[j] * (1.0 - share[j]) / 1000.0).sqrt();
        assert!((a.sd[j] - asymptotic).abs() < 0.05 * asymptotic);
        assert!((a.sd[j] / b.sd[j] - 2.0).abs() < 0.1);
    }
}

#[test]
fn non_identity_posterior_has_useful_sample_size() {
    let post = PopulationPosterior::new(m3(), vec![300.0, 250.0, 450.0]).unwrap();
    let r = posterior_sd(&post, 20_000, 9).unwrap();
    assert!(r.ess > 0.3 * 20_000.0, "ess {}", r.ess);
    let mode = posterior_mode(&m3(), &[300.0, 250.0, 450.0]).unwrap();
    for j in 0..3 {
        assert!((r.mean[j] - mode.p[j]).abs() < 3.0 * r.sd[j]);
    }
}

#[test]
fn sd_is_deterministic() {
    let post = PopulationPosterior::new(m3(), vec![30.0, 25.0, 45.0]).unwrap();
    assert_eq!(
        posterior_sd(&post, 5000, 3).unwrap(),
        posterior_sd(&post, 5000, 3).unwrap()
    );
}

#[test]
fn sequential_grid_updates() {
    let centers = [
        Complex64::new(0.0, 0.0),
        Complex64::new(10.0, 0.0),
        Complex64::new(0.0, 10.0),
    ];
    let clouds = clouds_with_sigma(&centers, 0.5).unwrap();
    let grid = SimplexGrid::new(3, 40).unwrap();
    assert_eq!(
        sequential_posterior(&grid, &[], &clouds).unwrap(),
        grid.uniform_prior()
    );
    let one = sequential_update(&grid, &grid.uniform_prior(), centers[0], &clouds).unwrap();
    let mean_p0 = grid.mean(&one)[0];
    assert!(mean_p0 > 0.4, "{mean_p0}");
    assert!(SimplexGrid::new(4, 40).is_err());
}

#[test]
fn sequential_grid_agrees_with_counting() {
    let centers = [
        Complex64::new(0.0, 0.0),
        Complex64::new(6.0, 0.0),
        Complex64::new(0.0, 6.0),
    ];
    let clouds = clouds_with_sigma(&centers, 0.4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let truth = [0.5, 0.3, 0.2];
    let shots: Vec<Complex64> = (0..30)
        .map(|_| {
            let u: f64 = rng.random();
            let j = if u < truth[0] {
                0
            } else if u < truth[0] + truth[1] {
                1
            } else {
                2
            };
            clouds[j].sample(&mut rng)
        })
        .collect();
    let grid = SimplexGrid::new(3, 240).unwrap();
    let density = sequential_posterior(&grid, &shots, &clouds).unwrap();
    let mut counts = [0.0; 3];
    for z in &shots {
        counts[classify_mde(*z, &centers)] += 1.0;
    }
    let mode = grid.mode(&density);
    for j in 0..3 {
        assert!(
            (mode[j] - counts[j] / 30.0).abs() <= 1.0 / 240.0 + 1e-12,
            "{mode:?} {counts:?}"
        );
    }
}

#[test]
fn coarse_grid_is_reported() {
    let centers = [Complex64::new(0.0, 0.0), Complex64::new(8.0, 0.0)];
    let clouds = clouds_with_sigma(&centers, 0.5).unwrap();
    let grid = SimplexGrid::new(2, 4).unwrap();
    let shots: Vec<Complex64> = (0..400).map(|k| centers[k % 2]).collect();
    assert!(matches!(
        sequential_posterior(&grid, &shots, &clouds),
        Err(Error::Resolution(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mode_inverts_exact_counts(a in 0.01f64..1.0, b in 0.01f64..1.0, c in 0.01f64..1.0, n in 10.0f64..1e5) {
        let s = a + b + c;
        let p = [a / s, b / s, c / s];
        let m = m3();
        let counts: Vec<f64> = (0..3).map(|i| n * (0..3).map(|j| m[(i, j)] * p[j]).sum::<f64>()).collect();
        let mode = posterior_mode(&m, &counts).unwrap();
        for j in 0..3 {
            prop_assert!((mode.p[j] - p[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn mitigation_stays_on_simplex(n0 in 0u32..100, n1 in 0u32..100, n2 in 0u32..100) {
        prop_assume!(n0 + n1 + n2 > 0);
        let counts = [n0 as f64, n1 as f64, n2 as f64];
        let p = mitigate_least_squares(&m3(), &counts).unwrap();
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mode = posterior_mode(&m3(), &counts).unwrap();
        let clamped: Vec<f64> = mode.p.iter().map(|x| x.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        let clamped: Vec<f64> = clamped.iter().map(|x| x / total).collect();
        prop_assert!(objective(&m3(), &counts, &p) <= objective(&m3(), &counts, &clamped) + 1e-15);
    }
}

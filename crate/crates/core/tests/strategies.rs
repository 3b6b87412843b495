use std::f64::consts::PI;

use num_complex::Complex64;
use qudit_readout::assignment::{clouds_with_sigma, Method};
use qudit_readout::inference::dirichlet_moments;
use qudit_readout::presets;
use qudit_readout::readout::{midpoint_frequency, Frame};
use qudit_readout::strategies::{
    classify_counts, compare, compare_on, multi_frequency_strategy, shot_allocation,
    simulate_shots, single_frequency_strategy, sweep_pairs, sweep_ratio, sweep_ratio_relative,
    xi_curve, StrategyScenario, XiCurve,
};

fn mhz(x: f64) -> f64 {
    2.0 * PI * 1e6 * x
}

fn reference(shots: usize, seed: u64) -> StrategyScenario {
    let model = presets::dispersive_model(4).unwrap();
    let mut sc =
        StrategyScenario::new(model.chi, presets::readout(), presets::sigma(), shots, seed);
    sc.readout.omega_m = midpoint_frequency(sc.readout.omega_r, sc.chi[0], sc.chi[1]);
    sc.sd_samples = 10_000;
    sc
}

fn distinct(v: &[f64]) -> usize {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

#[test]
fn pure_state_with_narrow_clouds() {
    let centers = [
        Complex64::new(0.0, 0.0),
        Complex64::new(3.0, 0.0),
        Complex64::new(0.0, 3.0),
        Complex64::new(3.0, 3.0),
    ];
    let clouds = clouds_with_sigma(&centers, 1e-9).unwrap();
    let shots = simulate_shots(&[1.0, 0.0, 0.0, 0.0], &clouds, 500, 1).unwrap();
    assert!(shots
        .iter()
        .all(|s| s.state == 0 && (s.z - centers[0]).norm() < 1e-6));
    assert_eq!(classify_counts(&shots, &clouds), vec![500.0, 0.0, 0.0, 0.0]);
}

#[test]
fn shot_frequencies_follow_populations() {
    let centers = [
        Complex64::new(0.0, 0.0),
        Complex64::new(3.0, 0.0),
        Complex64::new(0.0, 3.0),
    ];
    let clouds = clouds_with_sigma(&centers, 0.5).unwrap();
    let p = [0.5, 0.3, 0.2];
    let n = 20_000;
    for (perm, seed) in [([0, 1, 2], 3), ([2, 0, 1], 4)] {
        let pp: Vec<f64> = perm.iter().map(|&k| p[k]).collect();
        let shots = simulate_shots(&pp, &clouds, n, seed).unwrap();
        for (j, &pj) in pp.iter().enumerate() {
            let f = shots.iter().filter(|s| s.state == j).count() as f64 / n as f64;
            assert!(
                (f - pj).abs() <= 3.0 * (pj * (1.0 - pj) / n as f64).sqrt(),
                "state {j}: {f}"
            );
        }
    }
    let a = simulate_shots(&p, &clouds, 100, 9).unwrap();
    assert_eq!(a, simulate_shots(&p, &clouds, 100, 9).unwrap());
}

#[test]
fn drive_frame_minima_are_distinct() {
    let sc = reference(1000, 1);
    let grid = sc.default_grid();
    assert_eq!(grid.len(), 401);
    let drive = xi_curve(&sc, &grid, Frame::Drive).unwrap();
    assert!(drive.method.iter().all(|m| *m == Method::Owen));
    let drive_minima: Vec<f64> = (0..4)
        .map(|j| drive.omega_d[drive.argmin_state(j)])
        .collect();
    assert!(distinct(&drive_minima) >= 3, "{drive_minima:?}");
    let w01 = midpoint_frequency(sc.readout.omega_r, sc.chi[0], sc.chi[1]);
    let at01 = xi_curve(&sc, &[w01], Frame::Drive).unwrap().xi[0];
    assert!(drive.xi[drive.argmin_mean()] < at01);

    let modulation = xi_curve(&sc, &grid, Frame::Modulation).unwrap();
    let mod_minima: Vec<f64> = (0..4)
        .map(|j| modulation.omega_d[modulation.argmin_state(j)])
        .collect();
    let spread = |v: &[f64]| {
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - v.iter().copied().fold(f64::INFINITY, f64::min)
    };
    assert!(
        spread(&mod_minima) < spread(&drive_minima),
        "{mod_minima:?} vs {drive_minima:?}"
    );
    // both frames agree where the kernel rotates with the drive
    let same = xi_curve(&sc, &[w01], Frame::Modulation).unwrap().xi[0];
    assert!((same - at01).abs() < 1e-12);
}

#[test]
fn narrow_clouds_give_vanishing_error_in_band() {
    let mut sc = reference(1000, 1);
    sc.sigma = 1e-3;
    let lo = sc.readout.omega_r + sc.chi[3];
    let hi = sc.readout.omega_r + sc.chi[0];
    let band: Vec<f64> = (0..21).map(|k| lo + (hi - lo) * k as f64 / 20.0).collect();
    let curve = xi_curve(&sc, &band, Frame::Drive).unwrap();
    assert!(curve.xi.iter().all(|x| *x < 1e-9), "{:?}", curve.xi);
}

#[test]
fn xi_curve_permutes_with_labels() {
    let sc = reference(1000, 1);
    let perm = [3, 1, 0, 2];
    let mut permuted = sc.clone();
    permuted.chi = perm.iter().map(|&k| sc.chi[k]).collect();
    let grid = sc.default_grid();
    let grid = &grid[..41];
    let a = xi_curve(&sc, grid, Frame::Drive).unwrap();
    let b = xi_curve(&permuted, grid, Frame::Drive).unwrap();
    for k in 0..grid.len() {
        for j in 0..4 {
            assert!((b.xi_per_state[k][j] - a.xi_per_state[k][perm[j]]).abs() < 1e-12);
        }
        assert!((a.xi[k] - b.xi[k]).abs() < 1e-12);
    }
}

#[test]
fn well_separated_single_strategy_matches_dirichlet() {
    let mut sc = reference(1000, 5);
    sc.sigma = 0.02 * sc.readout.drive / sc.readout.kappa;
    let curve = xi_curve(&sc, &sc.default_grid(), Frame::Drive).unwrap();
    let single = single_frequency_strategy(&sc, &curve).unwrap();
    assert_eq!(single.allocation, vec![1000]);
    let (_, var) = dirichlet_moments(&single.counts[0]);
    for j in 0..4 {
        let sd = var[j].sqrt();
        assert!(
            (single.sd.sd[j] - sd).abs() < 0.03 * sd,
            "{} vs {sd}",
            single.sd.sd[j]
        );
    }
}

#[test]
fn multi_strategy_splits_shots() {
    let sc = reference(1000, 5);
    let curve = xi_curve(&sc, &sc.default_grid(), Frame::Drive).unwrap();
    let multi = multi_frequency_strategy(&sc, &curve).unwrap();
    assert_eq!(multi.allocation, vec![250; 4]);
    assert_eq!(
        multi
            .counts
            .iter()
            .map(|c| c.iter().sum::<f64>())
            .sum::<f64>(),
        1000.0
    );
    assert_eq!(shot_allocation(1001, 4), vec![250, 250, 250, 251]);
    let expected: Vec<f64> = (0..4)
        .map(|j| curve.omega_d[curve.argmin_state(j)])
        .collect();
    assert_eq!(multi.frequencies, expected);
}

#[test]
fn degenerate_minima_reduce_to_single_frequency() {
    let sc = reference(1000, 6);
    let w = sc.readout.omega_r + 0.5 * (sc.chi[1] + sc.chi[2]);
    let curve = xi_curve(&sc, &[w], Frame::Drive).unwrap();
    let mut single = Vec::new();
    let mut multi = Vec::new();
    for seed in 0..6 {
        let mut s = sc.clone();
        s.seed = 100 + seed;
        let r = compare_on(&s, &curve).unwrap();
        assert_eq!(r.multi.frequencies, vec![w; 4]);
        single.push(r.sd_single);
        multi.push(r.sd_multi);
    }
    let a = single.iter().sum::<f64>() / 6.0;
    let b = multi.iter().sum::<f64>() / 6.0;
    assert!((a - b).abs() < 0.05 * a, "{a} vs {b}");
}

#[test]
fn overlapping_regime_favours_multi_frequency() {
    let mut sc = reference(1000, 7);
    sc.readout.kappa = mhz(1.0);
    sc.sigma = 0.5 * sc.readout.drive / sc.readout.kappa;
    let r = compare(&sc).unwrap();
    assert!(
        r.sd_multi < r.sd_single,
        "{} vs {}",
        r.sd_multi,
        r.sd_single
    );
}

#[test]
fn reports_are_deterministic() {
    let sc = reference(400, 11);
    assert_eq!(compare(&sc).unwrap(), compare(&sc).unwrap());
}

#[test]
fn more_shots_shrink_uncertainty() {
    let mut sc = reference(1000, 13);
    sc.sigma = 0.03 * sc.readout.drive / sc.readout.kappa;
    let curve: XiCurve = xi_curve(&sc, &sc.default_grid(), Frame::Drive).unwrap();
    let a = compare_on(&sc, &curve).unwrap();
    sc.shots = 4000;
    let b = compare_on(&sc, &curve).unwrap();
    for (x, y) in [(a.sd_single, b.sd_single), (a.sd_multi, b.sd_multi)] {
        assert!((x / y - 2.0).abs() < 0.4, "{x} / {y}");
    }
}

#[test]
fn sweep_layout_and_limits() {
    let mut sc = reference(1000, 17);
    sc.sd_samples = 5000;
    sc.grid_points = 101;
    let kappas = [mhz(2.0), mhz(5.0)];
    let omega = sc.readout.drive;
    let sigmas = [0.01 * omega / mhz(5.0), 2.0 * omega / mhz(5.0)];
    let points = sweep_ratio(&kappas, &sigmas, &sc, 2).unwrap();
    assert_eq!(points.len(), 4);
    assert_eq!((points[1].kappa, points[1].sigma), (kappas[0], sigmas[1]));
    assert_eq!((points[2].kappa, points[2].sigma), (kappas[1], sigmas[0]));
    for p in &points {
        assert_eq!(p.flagged, p.sd_single > 0.1 && p.sd_multi > 0.1);
        assert!((p.ratio - p.sd_multi / p.sd_single).abs() < 1e-15);
    }
    // tiny sigma: both equal the unit-matrix Dirichlet SD (~sqrt(p(1-p)/N))
    let unit = (0.25f64 * 0.75 / 1000.0).sqrt();
    assert!((points[2].sd_single - unit).abs() < 0.05 * unit);
    assert!((points[2].sd_multi - unit).abs() < 0.05 * unit);
    assert!(points[3].flagged, "{:?}", points[3]);
    assert_eq!(points, sweep_ratio(&kappas, &sigmas, &sc, 2).unwrap());
}

#[test]
fn relative_sweep_scales_sigma_per_kappa() {
    let mut sc = reference(200, 5);
    sc.sd_samples = 2000;
    sc.grid_points = 51;
    let kappas = [mhz(2.0), mhz(4.0)];
    let points = sweep_ratio_relative(&kappas, &[0.2], &sc, 1).unwrap();
    let omega = sc.readout.drive;
    let pairs = [
        (kappas[0], 0.2 * omega / kappas[0]),
        (kappas[1], 0.2 * omega / kappas[1]),
    ];
    assert_eq!(points, sweep_pairs(&pairs, &sc, 1).unwrap());
    assert!((points[1].sigma - 0.5 * points[0].sigma).abs() < 1e-12);
}

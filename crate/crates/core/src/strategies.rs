//! Finite-shot comparison of single- and multi-frequency readout.
//!
//! The single-frequency strategy spends all `N` shots at the drive frequency
//! minimising the mean misclassification `xi`. The multi-frequency strategy
//! spends `N/d` shots at each frequency minimising one `xi_j` and combines
//! the blocks in a product posterior. Both are scored by the posterior
//! standard deviation of the populations.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{
    assignment_matrix_mc, assignment_matrix_owen_with_center, classify_mde, clouds_with_sigma,
    error_measures, AssignmentMatrix, GaussianCloud, Method, DEFAULT_MC_SAMPLES,
};
use crate::inference::{posterior_sd, CountBlock, PopulationPosterior, SdReport};
use crate::readout::{
    frequency_grid, kernel_factor, steady_amp, Frame, PhaseAmplitude, ReadoutConfig,
};
use crate::{Error, Result};

/// Default number of drive frequencies in a scan.
pub const DEFAULT_GRID_POINTS: usize = 401;

/// Default importance samples per posterior.
pub const DEFAULT_SD_SAMPLES: usize = 20_000;

/// Default number of seeds averaged per sweep point.
pub const DEFAULT_SEEDS: usize = 8;

/// Both averaged standard deviations above this flag a sweep point.
pub const FLAG_THRESHOLD: f64 = 0.1;

/// Inputs of one strategy comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyScenario {
    /// Dispersive shifts `chi_j`, rad/s. Their count is the number of states.
    pub chi: Vec<f64>,
    /// Resonator and drive template; `omega_d` is set per grid point and
    /// `omega_m` is the fixed kernel frequency of the modulation frame.
    pub readout: ReadoutConfig,
    /// Common cloud width.
    pub sigma: f64,
    /// Total shots `N`.
    pub shots: usize,
    pub populations: Vec<f64>,
    pub seed: u64,
    pub frame: Frame,
    pub grid_points: usize,
    /// Samples per column when the closed-form matrix is unavailable.
    pub mc_samples: usize,
    /// Importance samples per posterior standard deviation.
    pub sd_samples: usize,
}

impl StrategyScenario {
    /// Equal superposition, drive frame and default grid and sample sizes.
    pub fn new(chi: Vec<f64>, readout: ReadoutConfig, sigma: f64, shots: usize, seed: u64) -> Self {
        let d = chi.len();
        Self {
            chi,
            readout,
            sigma,
            shots,
            populations: vec![1.0 / d as f64; d],
            seed,
            frame: Frame::Drive,
            grid_points: DEFAULT_GRID_POINTS,
            mc_samples: DEFAULT_MC_SAMPLES,
            sd_samples: DEFAULT_SD_SAMPLES,
        }
    }

    pub fn dim(&self) -> usize {
        self.chi.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least two states, got {d}"
            )));
        }
        self.readout.validate()?;
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.shots < d {
            return Err(Error::InvalidInput(format!(
                "{} shots cannot cover {d} states",
                self.shots
            )));
        }
        if self.populations.len() != d
            || self.populations.iter().any(|p| !(*p >= 0.0))
            || (self.populations.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidInput(format!(
                "populations {:?} are not a distribution over {d} states",
                self.populations
            )));
        }
        if self.grid_points == 0 {
            return Err(Error::InvalidInput("frequency grid is empty".into()));
        }
        Ok(())
    }

    /// `omega_r + [min chi - 3 kappa, max chi + 3 kappa]` with `grid_points`
    /// points.
    pub fn default_grid(&self) -> Vec<f64> {
        let lo = self.chi.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.chi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let k = self.readout.kappa;
        frequency_grid(
            self.readout.omega_r + lo - 3.0 * k,
            self.readout.omega_r + hi + 3.0 * k,
            self.grid_points,
        )
    }

    /// Readout configuration driven at `omega_d` in the scenario's frame.
    pub fn config_at(&self, omega_d: f64) -> ReadoutConfig {
        let cfg = self.readout.at_drive(omega_d);
        match self.frame {
            Frame::Drive => cfg.drive_frame(),
            Frame::Modulation => cfg,
        }
    }

    /// Signal clouds for drive frequency `omega_d`.
    pub fn clouds_at(&self, omega_d: f64) -> Result<Vec<GaussianCloud>> {
        let cfg = self.config_at(omega_d);
        let centers: Vec<PhaseAmplitude> = self
            .chi
            .iter()
            .map(|&c| steady_amp(&cfg, c, self.frame))
            .collect();
        clouds_with_sigma(&centers, self.sigma)
    }

    /// Centre of the circle the clouds lie on at `omega_d`.
    pub fn circle_center_at(&self, omega_d: f64) -> PhaseAmplitude {
        let cfg = self.config_at(omega_d);
        match self.frame {
            Frame::Drive => cfg.circle_center(),
            Frame::Modulation if cfg.omega_m == cfg.omega_d => cfg.circle_center(),
            Frame::Modulation => kernel_factor(&cfg) * cfg.circle_center(),
        }
    }

    /// Assignment matrix at `omega_d`: closed form when the clouds are
    /// distinct points on the circle, Monte Carlo otherwise.
    pub fn assignment_at(&self, omega_d: f64, stream: u64) -> Result<AssignmentMatrix> {
        let clouds = self.clouds_at(omega_d)?;
        match assignment_matrix_owen_with_center(&clouds, self.circle_center_at(omega_d)) {
            Ok(m) => Ok(m),
            Err(Error::Geometry(_)) => assignment_matrix_mc(
                &clouds,
                self.mc_samples,
                derive_seed(self.seed, &[2, stream]),
            ),
            Err(e) => Err(e),
        }
    }
}

/// Mixes a master seed with task coordinates (SplitMix64 finaliser per
/// coordinate), so every task owns an independent, reproducible stream.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    coords.iter().fold(mix(master), |acc, &c| mix(acc ^ mix(c)))
}

/// One simulated measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shot {
    /// Prepared state.
    pub state: usize,
    pub z: PhaseAmplitude,
}

/// Draws `n` shots: a state from `populations`, then a point from its cloud.
pub fn simulate_shots(
    populations: &[f64],
    clouds: &[GaussianCloud],
    n: usize,
    seed: u64,
) -> Result<Vec<Shot>> {
    if populations.len() != clouds.len() || clouds.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} populations for {} clouds",
            populations.len(),
            clouds.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: f64 = populations.iter().sum();
    let last = populations.iter().rposition(|p| *p > 0.0).unwrap_or(0);
    Ok((0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut state = last;
            for (j, p) in populations.iter().enumerate() {
                acc += p;
                if u < acc {
                    state = j;
                    break;
                }
            }
            Shot {
                state,
                z: clouds[state].sample(&mut rng),
            }
        })
        .collect())
}

/// Class counts of shots labelled by minimum distance.
pub fn classify_counts(shots: &[Shot], clouds: &[GaussianCloud]) -> Vec<f64> {
    let centers: Vec<PhaseAmplitude> = clouds.iter().map(|c| c.center).collect();
    let mut counts = vec![0.0; clouds.len()];
    for s in shots {
        counts[classify_mde(s.z, &centers)] += 1.0;
    }
    counts
}

/// Misclassification curves over a drive-frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiCurve {
    pub omega_d: Vec<f64>,
    /// `xi_per_state[k][j]` is `xi_j` at `omega_d[k]`.
    pub xi_per_state: Vec<Vec<f64>>,
    pub xi: Vec<f64>,
    pub method: Vec<Method>,
    pub frame: Frame,
}

impl XiCurve {
    /// Grid index minimising `xi`; ties go to the lowest frequency.
    pub fn argmin_mean(&self) -> usize {
        argmin(&self.xi)
    }

    /// Grid index minimising `xi_j`; ties go to the lowest frequency.
    pub fn argmin_state(&self, j: usize) -> usize {
        let column: Vec<f64> = self.xi_per_state.iter().map(|x| x[j]).collect();
        argmin(&column)
    }
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// Evaluates `xi_j(omega_d)` and `xi(omega_d)` on `grid` in `frame`.
pub fn xi_curve(scenario: &StrategyScenario, grid: &[f64], frame: Frame) -> Result<XiCurve> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("frequency grid is empty".into()));
    }
    let mut sc = scenario.clone();
    sc.frame = frame;
    let rows = grid
        .par_iter()
        .enumerate()
        .map(|(k, &w)| sc.assignment_at(w, k as u64))
        .collect::<Result<Vec<_>>>()?;
    let mut xi_per_state = Vec::with_capacity(grid.len());
    let mut xi = Vec::with_capacity(grid.len());
    let mut method = Vec::with_capacity(grid.len());
    for m in rows {
        let e = error_measures(&m.m);
        xi_per_state.push(e.per_state);
        xi.push(e.mean);
        method.push(m.method);
    }
    Ok(XiCurve {
        omega_d: grid.to_vec(),
        xi_per_state,
        xi,
        method,
        frame,
    })
}

/// Outcome of one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyOutcome {
    /// Drive frequency of each shot block.
    pub frequencies: Vec<f64>,
    /// Shots spent at each frequency.
    pub allocation: Vec<usize>,
    /// Class counts per block.
    pub counts: Vec<Vec<f64>>,
    pub sd: SdReport,
}

/// Both strategies for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub single: StrategyOutcome,
    pub multi: StrategyOutcome,
    /// Averaged `SD[p_j]` of the single-frequency strategy.
    pub sd_single: f64,
    /// Averaged `SD[p_j]` of the multi-frequency strategy.
    pub sd_multi: f64,
    /// `sd_multi / sd_single`.
    pub ratio: f64,
}

/// Shot split of the multi-frequency strategy: `N/d` each, remainder to the
/// last frequency.
pub fn shot_allocation(shots: usize, d: usize) -> Vec<usize> {
    let mut a = vec![shots / d; d];
    a[d - 1] += shots % d;
    a
}

/// Simulates blocks of shots at the given frequencies and returns the
/// posterior summary. `tag` separates the random streams of the strategies.
fn run_blocks(
    scenario: &StrategyScenario,
    frequencies: &[f64],
    allocation: &[usize],
    tag: u64,
) -> Result<StrategyOutcome> {
    let mut blocks = Vec::with_capacity(frequencies.len());
    let mut counts = Vec::with_capacity(frequencies.len());
    for (k, (&w, &n)) in frequencies.iter().zip(allocation).enumerate() {
        let clouds = scenario.clouds_at(w)?;
        let m = scenario.assignment_at(w, k as u64)?;
        let shots = simulate_shots(
            &scenario.populations,
            &clouds,
            n,
            derive_seed(scenario.seed, &[tag, k as u64]),
        )?;
        let c = classify_counts(&shots, &clouds);
        counts.push(c.clone());
        blocks.push(CountBlock { m: m.m, counts: c });
    }
    let post = PopulationPosterior::product(blocks)?;
    let sd = posterior_sd(
        &post,
        scenario.sd_samples,
        derive_seed(scenario.seed, &[tag, 1 << 32]),
    )?;
    Ok(StrategyOutcome {
        frequencies: frequencies.to_vec(),
        allocation: allocation.to_vec(),
        counts,
        sd,
    })
}

/// All shots at the frequency minimising `xi`.
pub fn single_frequency_strategy(
    scenario: &StrategyScenario,
    curve: &XiCurve,
) -> Result<StrategyOutcome> {
    scenario.validate()?;
    let w = curve.omega_d[curve.argmin_mean()];
    run_blocks(scenario, &[w], &[scenario.shots], 0)
}

/// `N/d` shots at each frequency minimising one `xi_j`.
pub fn multi_frequency_strategy(
    scenario: &StrategyScenario,
    curve: &XiCurve,
) -> Result<StrategyOutcome> {
    scenario.validate()?;
    let d = scenario.dim();
    let freqs: Vec<f64> = (0..d)
        .map(|j| curve.omega_d[curve.argmin_state(j)])
        .collect();
    run_blocks(scenario, &freqs, &shot_allocation(scenario.shots, d), 1)
}

/// Runs both strategies on the scenario's default grid.
pub fn compare(scenario: &StrategyScenario) -> Result<StrategyReport> {
    scenario.validate()?;
    let curve = xi_curve(scenario, &scenario.default_grid(), scenario.frame)?;
    compare_on(scenario, &curve)
}

/// Runs both strategies using a precomputed curve.
pub fn compare_on(scenario: &StrategyScenario, curve: &XiCurve) -> Result<StrategyReport> {
    let single = single_frequency_strategy(scenario, curve)?;
    let multi = multi_frequency_strategy(scenario, curve)?;
    let (sd_single, sd_multi) = (single.sd.mean_sd, multi.sd.mean_sd);
    Ok(StrategyReport {
        single,
        multi,
        sd_single,
        sd_multi,
        ratio: sd_multi / sd_single,
    })
}

/// One point of a `kappa x sigma` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub kappa: f64,
    pub sigma: f64,
    /// Seed-averaged `SD_s`.
    pub sd_single: f64,
    /// Seed-averaged `SD_m`.
    pub sd_multi: f64,
    pub ratio: f64,
    /// Both averaged SDs exceed [`FLAG_THRESHOLD`].
    pub flagged: bool,
}

/// Compares both strategies on every `(kappa, sigma)` pair, averaging the
/// standard deviations over `seeds` independent runs. Output order follows
/// the grids, kappa outer. See [`sweep_pairs`] for the seeding.
pub fn sweep_ratio(
    kappas: &[f64],
    sigmas: &[f64],
    template: &StrategyScenario,
    seeds: usize,
) -> Result<Vec<SweepPoint>> {
    if kappas.is_empty() || sigmas.is_empty() {
        return Err(Error::InvalidInput("sweep grids must be nonempty".into()));
    }
    let pairs: Vec<(f64, f64)> = kappas
        .iter()
        .flat_map(|&k| sigmas.iter().map(move |&s| (k, s)))
        .collect();
    sweep_pairs(&pairs, template, seeds)
}

/// Like [`sweep_ratio`] with the cloud width given as `sigma kappa / Omega`,
/// i.e. relative to the circle diameter at each `kappa`.
pub fn sweep_ratio_relative(
    kappas: &[f64],
    widths: &[f64],
    template: &StrategyScenario,
    seeds: usize,
) -> Result<Vec<SweepPoint>> {
    if kappas.is_empty() || widths.is_empty() {
        return Err(Error::InvalidInput("sweep grids must be nonempty".into()));
    }
    let drive = template.readout.drive;
    let pairs: Vec<(f64, f64)> = kappas
        .iter()
        .flat_map(|&k| widths.iter().map(move |&w| (k, w * drive / k)))
        .collect();
    sweep_pairs(&pairs, template, seeds)
}

/// Strategy comparison at explicit `(kappa, sigma)` pairs. Seed `s` at pair
/// index `g` uses the stream derived from `(template.seed, g, s)`, so the
/// output does not depend on scheduling.
pub fn sweep_pairs(
    pairs: &[(f64, f64)],
    template: &StrategyScenario,
    seeds: usize,
) -> Result<Vec<SweepPoint>> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("sweep grids must be nonempty".into()));
    }
    if seeds == 0 {
        return Err(Error::InvalidInput("need at least one seed".into()));
    }
    let points: Vec<(usize, f64, f64)> = pairs
        .iter()
        .enumerate()
        .map(|(g, &(k, s))| (g, k, s))
        .collect();
    points
        .par_iter()
        .map(|&(g, kappa, sigma)| {
            let mut base = template.clone();
            base.readout.kappa = kappa;
            base.sigma = sigma;
            base.validate()?;
            let curve = xi_curve(&base, &base.default_grid(), base.frame)?;
            let runs = (0..seeds)
                .into_par_iter()
                .map(|s| {
                    let mut sc = base.clone();
                    sc.seed = derive_seed(template.seed, &[g as u64, s as u64]);
                    compare_on(&sc, &curve)
                })
                .collect::<Result<Vec<_>>>()?;
            let n = seeds as f64;
            let sd_single = runs.iter().map(|r| r.sd_single).sum::<f64>() / n;
            let sd_multi = runs.iter().map(|r| r.sd_multi).sum::<f64>() / n;
            Ok(SweepPoint {
                kappa,
                sigma,
                sd_single,
                sd_multi,
                ratio: sd_multi / sd_single,
                flagged: sd_single > FLAG_THRESHOLD && sd_multi > FLAG_THRESHOLD,
            })
        })
        .collect()
}

/// Assignment matrices at each frequency of an outcome, for reporting.
pub fn outcome_matrices(
    scenario: &StrategyScenario,
    outcome: &StrategyOutcome,
) -> Result<Vec<DMatrix<f64>>> {
    outcome
        .frequencies
        .iter()
        .enumerate()
        .map(|(k, &w)| scenario.assignment_at(w, k as u64).map(|m| m.m))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocation_gives_remainder_to_last() {
        assert_eq!(shot_allocation(1000, 4), vec![250; 4]);
        assert_eq!(shot_allocation(10, 3), vec![3, 3, 4]);
    }

    #[test]
    fn argmin_prefers_first() {
        assert_eq!(argmin(&[3.0, 1.0, 1.0, 2.0]), 1);
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(1, &[0, 0]);
        assert_ne!(a, derive_seed(1, &[0, 1]));
        assert_ne!(a, derive_seed(1, &[1, 0]));
        assert_ne!(a, derive_seed(2, &[0, 0]));
        assert_eq!(a, derive_seed(1, &[0, 0]));
    }
}

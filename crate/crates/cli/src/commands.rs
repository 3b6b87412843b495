//! One function per subcommand, each turning a config into output tables.

use std::path::Path;

use anyhow::{bail, Context};
use nalgebra::DMatrix;
use num_complex::Complex64;
use qudit_readout::assignment::{
    assignment_matrix_auto, assignment_matrix_mc, assignment_matrix_owen,
    assignment_matrix_owen_with_center, clouds_with_sigma, Method, DEFAULT_MC_SAMPLES,
};
use qudit_readout::inference::{posterior_mode, posterior_sd, CountBlock, PopulationPosterior};
use qudit_readout::readout::{steady_amp, Frame};
use qudit_readout::spectrum::{eigenenergies, levels_at};
use qudit_readout::strategies::{sweep_pairs, xi_curve, StrategyScenario, DEFAULT_SD_SAMPLES};
use qudit_readout::units::{ghz_to_rad, rad_to_ghz};

use crate::catalog::device_catalog;
use crate::config::{ConfigError, MethodChoice, RunConfig};
use crate::emit::{Cell, Table};

fn need_seed(seed: Option<u64>) -> Result<u64, ConfigError> {
    seed.ok_or_else(|| ConfigError::validation("seed", "stochastic run needs --seed or [run] seed"))
}

pub fn spectrum(cfg: &RunConfig) -> anyhow::Result<Vec<Table>> {
    let t = cfg.transmon()?;
    let mut levels = Table::new("levels", &["n_g", "level_index", "energy_GHz"]);
    for &n_g in &t.n_g {
        let e = levels_at(&t.params.with_n_g(n_g), t.levels)?;
        for (k, &x) in e.iter().enumerate() {
            levels.push(vec![n_g.into(), k.into(), rad_to_ghz(x).into()]);
        }
    }
    let s = eigenenergies(&t.params, t.levels)?;
    let mut derived = Table::new(
        "transitions",
        &[
            "i",
            "j",
            "omega_ij_GHz",
            "delta_omega_ij_GHz",
            "alpha_GHz",
            "epsilon_GHz",
        ],
    );
    for j in 1..t.levels {
        let i = j - 1;
        let alpha = if j + 1 < t.levels {
            Some(rad_to_ghz(s.anharmonicity(j)?))
        } else {
            None
        };
        derived.push(vec![
            i.into(),
            j.into(),
            rad_to_ghz(s.transition_frequency(i, j)?).into(),
            rad_to_ghz(s.frequency_difference(i, j)?).into(),
            alpha.into(),
            rad_to_ghz(s.charge_dispersion(j)?).into(),
        ]);
    }
    Ok(vec![levels, derived])
}

pub fn shifts(cfg: &RunConfig) -> anyhow::Result<Vec<Table>> {
    let model = cfg.dispersive()?;
    let qudit_drive = cfg.raw.coupling.qudit_drive.map(ghz_to_rad);
    let mut table = Table::new(
        "shifts",
        &["j", "chi_pair_GHz", "chi_GHz", "omega_tilde_GHz", "f_j"],
    );
    for j in 0..model.chi.len() {
        let f = qudit_drive.and_then(|w| model.two_photon_factor(w, j).ok());
        table.push(vec![
            j.into(),
            rad_to_ghz(model.chi_pair[j]).into(),
            rad_to_ghz(model.chi[j]).into(),
            rad_to_ghz(model.omega_tilde[j]).into(),
            f.into(),
        ]);
    }
    Ok(vec![table])
}

pub fn readout_sweep(cfg: &RunConfig, seed: Option<u64>) -> anyhow::Result<Vec<Table>> {
    let model = cfg.dispersive()?;
    let readout = cfg.readout()?;
    readout.validate()?;
    let grid = cfg.sweep_grid()?;
    let frames = [Frame::Drive, Frame::Modulation];
    let mut traj = Table::new(
        "trajectories",
        &["omega_d_GHz", "state_j", "re", "im", "frame"],
    );
    for frame in frames {
        for &w in &grid {
            let mut at = readout.at_drive(w);
            if frame == Frame::Drive {
                at = at.drive_frame();
            }
            for (j, &chi) in model.chi.iter().enumerate() {
                let a = steady_amp(&at, chi, frame);
                traj.push(vec![
                    rad_to_ghz(w).into(),
                    j.into(),
                    a.re.into(),
                    a.im.into(),
                    frame.label().into(),
                ]);
            }
        }
    }
    let mut tables = vec![traj];
    if let Some(sigma) = cfg.sigma()? {
        let d = model.chi.len();
        let mut columns: Vec<String> = vec!["omega_d_GHz".into(), "frame".into()];
        columns.extend((0..d).map(|j| format!("xi_{j}")));
        columns.push("xi".into());
        columns.push("method".into());
        let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
        let mut xi = Table::new("xi", &refs);
        let mut sc = StrategyScenario::new(model.chi.clone(), readout, sigma, 1, seed.unwrap_or(0));
        if let Some(n) = cfg.raw.assignment.samples {
            sc.mc_samples = n;
        }
        for frame in frames {
            sc.frame = frame;
            let curve = xi_curve(&sc, &grid, frame)?;
            for (k, &w) in curve.omega_d.iter().enumerate() {
                let mut row: Vec<Cell> = vec![rad_to_ghz(w).into(), frame.label().into()];
                row.extend(curve.xi_per_state[k].iter().map(|&x| Cell::from(x)));
                row.push(curve.xi[k].into());
                row.push(curve.method[k].label().into());
                xi.push(row);
            }
        }
        tables.push(xi);
    }
    Ok(tables)
}

fn read_numeric_rows(path: &Path) -> anyhow::Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{} row {}: not a number", path.display(), k + 1))?;
        rows.push(row);
    }
    Ok(rows)
}

fn read_centers(path: &Path) -> anyhow::Result<Vec<Complex64>> {
    let rows = read_numeric_rows(path)?;
    rows.iter()
        .enumerate()
        .map(|(k, r)| match r.as_slice() {
            [re, im] => Ok(Complex64::new(*re, *im)),
            _ => bail!("{} row {}: expected re,im", path.display(), k + 1),
        })
        .collect()
}

fn read_matrix(path: &Path) -> anyhow::Result<DMatrix<f64>> {
    let rows = read_numeric_rows(path)?;
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        bail!(
            "{}: assignment matrix must be square and nonempty",
            path.display()
        );
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

pub fn assignment(cfg: &RunConfig, seed: Option<u64>) -> anyhow::Result<Vec<Table>> {
    let sigma = cfg.sigma()?.ok_or_else(|| {
        ConfigError::validation("sigma", "[assignment] needs sigma or sigma_over_diameter")
    })?;
    let method = cfg.method()?;
    let samples = cfg.raw.assignment.samples.unwrap_or(DEFAULT_MC_SAMPLES);
    let seed = if method.is_stochastic() {
        Some(need_seed(seed)?)
    } else {
        seed
    };
    let (clouds, circle) = match &cfg.raw.assignment.centers {
        Some(p) => (
            clouds_with_sigma(&read_centers(&cfg.path(p))?, sigma)?,
            None,
        ),
        None => {
            let model = cfg.dispersive()?;
            let readout = cfg.readout()?;
            let mut sc = StrategyScenario::new(model.chi, readout, sigma, 1, 0);
            sc.frame = cfg.assignment_frame()?;
            (
                sc.clouds_at(readout.omega_d)?,
                Some(sc.circle_center_at(readout.omega_d)),
            )
        }
    };
    let m = match (method, circle) {
        (MethodChoice::Fixed(Method::Owen), Some(c)) => {
            assignment_matrix_owen_with_center(&clouds, c)?
        }
        (MethodChoice::Fixed(Method::Owen), None) => assignment_matrix_owen(&clouds)?,
        (MethodChoice::Fixed(_), _) => assignment_matrix_mc(&clouds, samples, need_seed(seed)?)?,
        (MethodChoice::Auto, c) => assignment_matrix_auto(&clouds, c, samples, need_seed(seed)?)?,
    };
    let d = m.dim();
    let mut columns = vec!["classified".to_string()];
    columns.extend((0..d).map(|j| format!("prepared_{j}")));
    let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut matrix = Table::new("assignment", &refs);
    for i in 0..d {
        let mut row = vec![Cell::from(i)];
        row.extend((0..d).map(|j| Cell::from(m.m[(i, j)])));
        matrix.push(row);
    }
    let errors = m.error_measures();
    let mut xi = Table::new("xi", &["state", "xi", "method"]);
    for (j, &x) in errors.per_state.iter().enumerate() {
        xi.push(vec![
            j.to_string().into(),
            x.into(),
            m.method.label().into(),
        ]);
    }
    xi.push(vec![
        "mean".into(),
        errors.mean.into(),
        m.method.label().into(),
    ]);
    Ok(vec![matrix, xi])
}

pub fn infer(cfg: &RunConfig, seed: Option<u64>) -> anyhow::Result<Vec<Table>> {
    let seed = need_seed(seed)?;
    let sec = &cfg.raw.infer;
    let matrices = match &sec.matrices {
        Some(m) if !m.is_empty() => m,
        _ => return Err(ConfigError::validation("matrices", "missing from [infer]").into()),
    };
    let counts_path = sec
        .counts
        .as_ref()
        .ok_or_else(|| ConfigError::validation("counts", "missing from [infer]"))?;
    let counts = read_numeric_rows(&cfg.path(counts_path))?;
    if counts.len() != matrices.len() {
        return Err(ConfigError::validation(
            "counts",
            format!(
                "{} count rows for {} matrices",
                counts.len(),
                matrices.len()
            ),
        )
        .into());
    }
    let mut blocks = Vec::new();
    for (p, n) in matrices.iter().zip(&counts) {
        blocks.push(CountBlock {
            m: read_matrix(&cfg.path(p))?,
            counts: n.clone(),
        });
    }
    let mut modes = Table::new(
        "mode",
        &[
            "block",
            "state",
            "mode",
            "mitigated",
            "inside_simplex",
            "condition",
        ],
    );
    for (b, block) in blocks.iter().enumerate() {
        let report = posterior_mode(&block.m, &block.counts)?;
        let mitigated = qudit_readout::inference::mitigate_least_squares(&block.m, &block.counts)?;
        for j in 0..report.p.len() {
            modes.push(vec![
                b.into(),
                j.into(),
                report.p[j].into(),
                mitigated[j].into(),
                report.inside_simplex.into(),
                report.condition.into(),
            ]);
        }
    }
    let post = PopulationPosterior::product(blocks)?;
    let sd = posterior_sd(&post, sec.samples.unwrap_or(DEFAULT_SD_SAMPLES), seed)?;
    let mut posterior = Table::new(
        "posterior",
        &["state", "mean", "sd", "variance", "variance_se"],
    );
    for j in 0..sd.mean.len() {
        posterior.push(vec![
            j.into(),
            sd.mean[j].into(),
            sd.sd[j].into(),
            sd.variance[j].into(),
            sd.variance_se[j].into(),
        ]);
    }
    let mut summary = Table::new("summary", &["mean_sd", "ess", "samples", "ess_warning"]);
    summary.push(vec![
        sd.mean_sd.into(),
        sd.ess.into(),
        sd.samples.into(),
        sd.ess_warning.into(),
    ]);
    Ok(vec![modes, posterior, summary])
}

pub fn strategy_compare(cfg: &RunConfig, seed: Option<u64>) -> anyhow::Result<Vec<Table>> {
    let seed = need_seed(seed)?;
    let (template, pairs, seeds) = cfg.strategy(seed)?;
    let points = sweep_pairs(&pairs, &template, seeds)?;
    let mut table = Table::new(
        "ratio",
        &[
            "kappa_GHz",
            "sigma",
            "sd_single",
            "sd_multi",
            "ratio",
            "flagged",
        ],
    );
    for p in points {
        table.push(vec![
            rad_to_ghz(p.kappa).into(),
            p.sigma.into(),
            p.sd_single.into(),
            p.sd_multi.into(),
            p.ratio.into(),
            p.flagged.into(),
        ]);
    }
    Ok(vec![table])
}

pub fn catalog(path: &Path) -> anyhow::Result<Vec<Table>> {
    Ok(device_catalog(path)?.tables())
}

//! Second-order dispersive shifts of a qudit coupled to a readout resonator,
//! dressed qudit frequencies, and the two-photon drive factor used to
//! calibrate `|j> <-> |j+2>` pulses.
//!
//! Sign convention: `chi_{j,j+1} = g_{j,j+1}^2 / (omega_{j+1} - omega_j - omega_r)`
//! and `chi_j = chi_{j-1,j} - chi_{j,j+1}` with `chi_{-1,0} = 0`. The
//! resonator frequency seen with the qudit in `|j>` is `omega_r + chi_j`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pole guard for perturbative denominators, relative to a reference frequency.
const POLE_GUARD: f64 = 1e-6;

/// Jaynes-Cummings coupling in the `g sqrt(j+1)` approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    /// Base coupling `g`, rad/s.
    pub g: f64,
    /// Bare resonator frequency, rad/s.
    pub omega_r: f64,
}

impl CouplingSpec {
    pub fn new(g: f64, omega_r: f64) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "coupling g must be positive, got {g}"
            )));
        }
        if !(omega_r > 0.0 && omega_r.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "resonator frequency must be positive, got {omega_r}"
            )));
        }
        Ok(Self { g, omega_r })
    }

    /// `g_{j,j+1} = g sqrt(j+1)`.
    pub fn coupling(&self, j: usize) -> f64 {
        coupling(self.g, j)
    }
}

pub fn coupling(g: f64, j: usize) -> f64 {
    g * ((j + 1) as f64).sqrt()
}

/// `chi_{j,j+1}` from bare qudit energies.
pub fn chi_pair(energies: &[f64], c: &CouplingSpec, j: usize) -> Result<f64> {
    if j + 1 >= energies.len() {
        return Err(Error::Index(format!(
            "chi_{{{j},{}}} needs {} energies, got {}",
            j + 1,
            j + 2,
            energies.len()
        )));
    }
    let detuning = energies[j + 1] - energies[j] - c.omega_r;
    if detuning.abs() < POLE_GUARD * c.omega_r.abs() {
        return Err(Error::Resonance(format!(
            "transition {j}->{} is resonant with the resonator (detuning {detuning:e})",
            j + 1
        )));
    }
    let gj = c.coupling(j);
    Ok(gj * gj / detuning)
}

/// `chi_j = chi_{j-1,j} - chi_{j,j+1}`. Pairs missing from `chi_pairs` (beyond
/// its end, or `j - 1 < 0`) count as zero, which models a truncated ladder.
pub fn chi_total(chi_pairs: &[f64], j: usize) -> f64 {
    let below = if j == 0 {
        0.0
    } else {
        chi_pairs.get(j - 1).copied().unwrap_or(0.0)
    };
    let above = chi_pairs.get(j).copied().unwrap_or(0.0);
    below - above
}

/// Dispersive shifts and dressed frequencies for the lowest `d` levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersiveModel {
    /// `chi_{j,j+1}` for `j = 0..d`.
    pub chi_pair: Vec<f64>,
    /// `chi_j` for `j = 0..d`.
    pub chi: Vec<f64>,
    /// Dressed qudit energies `omega_j + chi_{j-1,j}`.
    pub omega_tilde: Vec<f64>,
    /// Dressed resonator frequencies `omega_r + chi_j`.
    pub omega_tilde_r: Vec<f64>,
}

impl DispersiveModel {
    /// Builds the model for `d` levels. `energies` must hold at least `d + 1`
    /// bare levels since `chi_{d-1}` involves the `d-1 -> d` transition.
    pub fn new(energies: &[f64], c: &CouplingSpec, d: usize) -> Result<Self> {
        if d == 0 || energies.len() < d + 1 {
            return Err(Error::Index(format!(
                "{d} dressed levels need {} bare energies, got {}",
                d + 1,
                energies.len()
            )));
        }
        let chi_pair = (0..d)
            .map(|j| chi_pair(energies, c, j))
            .collect::<Result<Vec<_>>>()?;
        let chi = (0..d).map(|j| chi_total(&chi_pair, j)).collect();
        let omega_tilde = (0..d)
            .map(|j| energies[j] + if j == 0 { 0.0 } else { chi_pair[j - 1] })
            .collect();
        let omega_tilde_r = (0..d)
            .map(|j| c.omega_r + chi_total(&chi_pair, j))
            .collect();
        Ok(Self {
            chi_pair,
            chi,
            omega_tilde,
            omega_tilde_r,
        })
    }

    /// Model with prescribed resonator shifts only, for readout studies that
    /// do not start from a qudit spectrum.
    pub fn from_chi(chi: Vec<f64>, omega_r: f64) -> Self {
        let d = chi.len();
        // chi_{j,j+1} = -(chi_0 + ... + chi_j) by telescoping
        let chi_pair = chi
            .iter()
            .scan(0.0, |acc, c| {
                *acc += c;
                Some(-*acc)
            })
            .collect();
        Self {
            chi_pair,
            omega_tilde: vec![f64::NAN; d],
            omega_tilde_r: chi.iter().map(|c| omega_r + c).collect(),
            chi,
        }
    }

    pub fn levels(&self) -> usize {
        self.chi.len()
    }

    /// Dressed transition frequency per photon, `(w~_j - w~_i) / (j - i)`.
    pub fn dressed_transition(&self, i: usize, j: usize) -> Result<f64> {
        dressed_transition(&self.omega_tilde, i, j)
    }

    pub fn two_photon_factor(&self, omega_d: f64, j: usize) -> Result<f64> {
        two_photon_factor(&self.omega_tilde, omega_d, j)
    }
}

pub fn dressed_transition(omega_tilde: &[f64], i: usize, j: usize) -> Result<f64> {
    if i >= j || j >= omega_tilde.len() {
        return Err(Error::Index(format!(
            "need 0 <= i < j < {}, got ({i}, {j})",
            omega_tilde.len()
        )));
    }
    Ok((omega_tilde[j] - omega_tilde[i]) / (j - i) as f64)
}

/// Effective coupling factor `f_j` of the second-order `|j> <-> |j+2>` drive
/// at drive frequency `omega_d`.
pub fn two_photon_factor(omega_tilde: &[f64], omega_d: f64, j: usize) -> Result<f64> {
    if j + 2 >= omega_tilde.len() {
        return Err(Error::Index(format!(
            "f_{j} needs {} dressed levels, got {}",
            j + 3,
            omega_tilde.len()
        )));
    }
    let (w0, w1, w2) = (omega_tilde[j], omega_tilde[j + 1], omega_tilde[j + 2]);
    let lower = w1 - w0 - omega_d;
    let upper = w2 - w1 - omega_d;
    let reference = (w1 - w0).abs().max((w2 - w1).abs());
    if lower.abs() < POLE_GUARD * reference || upper.abs() < POLE_GUARD * reference {
        return Err(Error::Resonance(format!(
            "drive at {omega_d} is resonant with a single-photon transition next to level {j}"
        )));
    }
    let weight = (((j + 1) * (j + 2)) as f64).sqrt();
    Ok(weight * (w2 - 2.0 * w1 + w0) / (upper * lower))
}

/// Rotation angle of a resonant `|j> <-> |j+1>` pulse.
pub fn rabi_angle_first(t: f64, omega_q: f64, j: usize) -> f64 {
    t * omega_q * ((j + 1) as f64).sqrt()
}

/// Rotation angle of a two-photon `|j> <-> |j+2>` pulse.
pub fn rabi_angle_second(t: f64, omega_q: f64, f_j: f64) -> f64 {
    t * omega_q * omega_q * f_j / 4.0
}

/// Qudit drive settings for state-preparation pulses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    /// Drive amplitude, rad/s.
    pub omega_q: f64,
    /// Drive frequency, rad/s.
    pub omega_d: f64,
    /// Pulse duration of `|0> <-> |1>`, s.
    pub t01: f64,
    /// Pulse durations of the two-photon pulses `|j> <-> |j+2>`, s.
    pub t_two_photon: Vec<f64>,
    pub phi: f64,
}

impl CalibrationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t01 > 0.0) || self.t_two_photon.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidInput(
                "pulse durations must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Initial pi-pulse amplitudes `(|j>-|j+1>, |j>-|j+2>)` derived from the
/// calibrated qubit pi amplitude `omega01_pi` of duration `t01`.
pub fn pi_amplitudes(
    omega01_pi: f64,
    t01: f64,
    t_two_photon: f64,
    f_j: f64,
    j: usize,
) -> Result<(f64, f64)> {
    let first = omega01_pi / ((j + 1) as f64).sqrt();
    let radicand = omega01_pi * t01 / (f_j * t_two_photon);
    if !(radicand > 0.0) || !radicand.is_finite() {
        return Err(Error::Domain(format!(
            "two-photon pi amplitude needs f_j * t > 0 (f_j = {f_j}, t = {t_two_photon}); \
             place the drive between the two single-photon poles"
        )));
    }
    Ok((first, 2.0 * radicand.sqrt()))
}

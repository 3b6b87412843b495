//! Mean-field resonator response to a coherent readout drive.
//!
//! With the qudit in `|j>` the resonator is a damped, driven oscillator at
//! `omega_r + chi_j`. Its steady state in the frame of the drive lies on a
//! circle of diameter `Omega / kappa` centred at `A_c = -i e^{i phi} Omega / (2 kappa)`.
//! Integrating the signal with a kernel rotating at `omega_m != omega_d`
//! multiplies that amplitude by a phase and a sinc envelope.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::special::sinc;
use crate::{Error, Result};

/// Complex phase-space amplitude (dimensionless quadratures).
pub type PhaseAmplitude = Complex64;

/// Below this `kappa * T` the steady-state formulas carry a visible transient.
pub const SHORT_INTEGRATION_KAPPA_T: f64 = 5.0;

/// Resonator and readout-drive parameters. Frequencies in rad/s, `duration` in s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutConfig {
    pub omega_r: f64,
    pub kappa: f64,
    /// Drive amplitude `Omega`.
    pub drive: f64,
    pub phi: f64,
    pub duration: f64,
    pub omega_d: f64,
    /// Kernel (modulation) frequency.
    pub omega_m: f64,
}

impl ReadoutConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::InvalidInput(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        if !(self.drive >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "drive amplitude must be non-negative, got {}",
                self.drive
            )));
        }
        if !(self.duration > 0.0) {
            return Err(Error::InvalidInput(format!(
                "measurement duration must be positive, got {}",
                self.duration
            )));
        }
        Ok(())
    }

    /// Same configuration driven at `omega_d`.
    pub fn at_drive(mut self, omega_d: f64) -> Self {
        self.omega_d = omega_d;
        self
    }

    /// Same configuration with the kernel locked to the drive.
    pub fn drive_frame(mut self) -> Self {
        self.omega_m = self.omega_d;
        self
    }

    pub fn kappa_t(&self) -> f64 {
        self.kappa * self.duration
    }

    /// True when `kappa T` is below [`SHORT_INTEGRATION_KAPPA_T`].
    pub fn transient_dominated(&self) -> bool {
        self.kappa_t() < SHORT_INTEGRATION_KAPPA_T
    }

    /// Centre of the steady-state circle.
    pub fn circle_center(&self) -> PhaseAmplitude {
        -Complex64::i() * Complex64::from_polar(1.0, self.phi) * (self.drive / (2.0 * self.kappa))
    }

    /// Diameter `Omega / kappa` of the steady-state circle.
    pub fn circle_diameter(&self) -> f64 {
        self.drive / self.kappa
    }
}

/// Which integration kernel a signal is referred to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Kernel rotating with the drive, `omega_m = omega_d`.
    Drive,
    /// Kernel rotating at the fixed `omega_m` of the configuration.
    Modulation,
}

impl Frame {
    pub fn label(&self) -> &'static str {
        match self {
            Frame::Drive => "drive",
            Frame::Modulation => "modulation",
        }
    }
}

/// Steady-state amplitude in the frame of the drive.
pub fn steady_amp_drive_frame(cfg: &ReadoutConfig, chi: f64) -> PhaseAmplitude {
    let denom = Complex64::new(cfg.omega_r + chi - cfg.omega_d, -cfg.kappa / 2.0);
    -(cfg.drive / 2.0) * Complex64::from_polar(1.0, cfg.phi) / denom
}

/// Kernel factor `e^{i (omega_m - omega_d) T/2} sinc((omega_d - omega_m) T/2)`.
pub fn kernel_factor(cfg: &ReadoutConfig) -> Complex64 {
    let half = (cfg.omega_m - cfg.omega_d) * cfg.duration / 2.0;
    Complex64::from_polar(sinc(-half), half)
}

/// Long-time amplitude integrated in the kernel frame `omega_m`. Logs a
/// warning when `kappa T` is too short for the steady state to dominate.
pub fn steady_amp_general_frame(cfg: &ReadoutConfig, chi: f64) -> PhaseAmplitude {
    if cfg.transient_dominated() {
        log::warn!(
            "kappa*T = {:.3} below {SHORT_INTEGRATION_KAPPA_T}; steady-state amplitude is inaccurate",
            cfg.kappa_t()
        );
    }
    if cfg.omega_m == cfg.omega_d {
        return steady_amp_drive_frame(cfg, chi);
    }
    kernel_factor(cfg) * steady_amp_drive_frame(cfg, chi)
}

/// Amplitude in the requested frame.
pub fn steady_amp(cfg: &ReadoutConfig, chi: f64, frame: Frame) -> PhaseAmplitude {
    match frame {
        Frame::Drive => steady_amp_drive_frame(cfg, chi),
        Frame::Modulation => steady_amp_general_frame(cfg, chi),
    }
}

/// `|A_i - A_j|` in the drive frame.
pub fn pair_distance(cfg: &ReadoutConfig, chi_i: f64, chi_j: f64) -> f64 {
    (steady_amp_drive_frame(cfg, chi_i) - steady_amp_drive_frame(cfg, chi_j)).norm()
}

/// Drive frequencies maximising the distance between two states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OptimalDrive {
    /// `kappa > |chi_i - chi_j|`: one maximum at the midpoint frequency.
    Single { omega_d: f64, distance: f64 },
    /// `kappa <= |chi_i - chi_j|`: two maxima where the states sit on opposite
    /// sides of the circle.
    Split {
        lower: f64,
        upper: f64,
        distance: f64,
    },
}

impl OptimalDrive {
    pub fn distance(&self) -> f64 {
        match *self {
            OptimalDrive::Single { distance, .. } | OptimalDrive::Split { distance, .. } => {
                distance
            }
        }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        match *self {
            OptimalDrive::Single { omega_d, .. } => vec![omega_d],
            OptimalDrive::Split { lower, upper, .. } => vec![lower, upper],
        }
    }
}

/// Midpoint frequency `omega_r + (chi_i + chi_j)/2`.
pub fn midpoint_frequency(omega_r: f64, chi_i: f64, chi_j: f64) -> f64 {
    omega_r + 0.5 * (chi_i + chi_j)
}

pub fn optimal_frequencies(cfg: &ReadoutConfig, chi_i: f64, chi_j: f64) -> Result<OptimalDrive> {
    let delta = chi_i - chi_j;
    if delta == 0.0 {
        return Err(Error::Degenerate(format!(
            "states share the dispersive shift {chi_i}"
        )));
    }
    let center = midpoint_frequency(cfg.omega_r, chi_i, chi_j);
    let kappa = cfg.kappa;
    if kappa > delta.abs() {
        Ok(OptimalDrive::Single {
            omega_d: center,
            distance: 2.0 * cfg.drive * delta.abs() / (delta * delta + kappa * kappa),
        })
    } else {
        let half_split = 0.5 * (delta * delta - kappa * kappa).sqrt();
        Ok(OptimalDrive::Split {
            lower: center - half_split,
            upper: center + half_split,
            distance: cfg.drive / kappa,
        })
    }
}

/// Output of [`integrate_mean_field`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldTrace {
    /// Drive-frame amplitude reached at `t = T`, times the kernel factor of the
    /// configuration. This is the quantity the steady-state formulas predict.
    pub settled: PhaseAmplitude,
    /// Drive-frame amplitude at `t = T`.
    pub final_drive_frame: PhaseAmplitude,
    /// `(1/T) * integral_0^T e^{i omega_m t} A(t) dt`, transient included.
    pub kernel_average: PhaseAmplitude,
}

/// Minimum number of RK4 steps accepted by [`integrate_mean_field`].
pub const MIN_STEPS: usize = 1000;

/// Integrates the mean-field equation
/// `dA/dt = -i(omega_r + chi) A - i (Omega/2) e^{-i omega_d t + i phi} - (kappa/2) A`
/// from `A(0) = 0` with fixed-step RK4 on the drive-frame variable
/// `B = A e^{i omega_d t}`, together with the kernel integral.
pub fn integrate_mean_field(cfg: &ReadoutConfig, chi: f64, steps: usize) -> Result<MeanFieldTrace> {
    cfg.validate()?;
    if steps < MIN_STEPS {
        return Err(Error::Step(format!(
            "{steps} steps, need at least {MIN_STEPS}"
        )));
    }
    let h = cfg.duration / steps as f64;
    let rate = Complex64::new(cfg.kappa / 2.0, cfg.omega_r + chi - cfg.omega_d);
    let beat = cfg.omega_m - cfg.omega_d;
    // RK4 keeps |1 + z + z^2/2 + z^3/6 + z^4/24| < 1 and resolves the phase
    // only for |z| well inside its stability region.
    let stiffness = (rate.norm() * h).max(beat.abs() * h);
    if stiffness > 0.5 {
        return Err(Error::Step(format!(
            "step {h:e} s too coarse: |lambda| h = {stiffness:.3} exceeds 0.5"
        )));
    }
    let source = -Complex64::i() * (cfg.drive / 2.0) * Complex64::from_polar(1.0, cfg.phi);
    let deriv = |t: f64, b: Complex64| -> (Complex64, Complex64) {
        let db = -rate * b + source;
        let di = Complex64::from_polar(1.0, beat * t) * b;
        (db, di)
    };
    let mut b = Complex64::new(0.0, 0.0);
    let mut integral = Complex64::new(0.0, 0.0);
    for n in 0..steps {
        let t = n as f64 * h;
        let (k1b, k1i) = deriv(t, b);
        let (k2b, k2i) = deriv(t + h / 2.0, b + k1b * (h / 2.0));
        let (k3b, k3i) = deriv(t + h / 2.0, b + k2b * (h / 2.0));
        let (k4b, k4i) = deriv(t + h, b + k3b * h);
        b += (k1b + 2.0 * k2b + 2.0 * k3b + k4b) * (h / 6.0);
        integral += (k1i + 2.0 * k2i + 2.0 * k3i + k4i) * (h / 6.0);
    }
    let factor = if cfg.omega_m == cfg.omega_d {
        Complex64::new(1.0, 0.0)
    } else {
        kernel_factor(cfg)
    };
    Ok(MeanFieldTrace {
        settled: factor * b,
        final_drive_frame: b,
        kernel_average: integral / cfg.duration,
    })
}

/// Closed form of the kernel average including the transient from `A(0) = 0`,
/// for cross-checking [`integrate_mean_field`].
pub fn kernel_average_closed_form(cfg: &ReadoutConfig, chi: f64) -> PhaseAmplitude {
    let ss = steady_amp_drive_frame(cfg, chi);
    let lambda = Complex64::new(cfg.kappa / 2.0, cfg.omega_r + chi - cfg.omega_d);
    let beat = Complex64::new(0.0, cfg.omega_m - cfg.omega_d);
    let t = cfg.duration;
    // (1/T) int_0^T e^{beat t} ss (1 - e^{-lambda t}) dt
    let steady = if beat.im == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        ((beat * t).exp() - 1.0) / (beat * t)
    };
    let decay = ((beat - lambda) * t).exp() - 1.0;
    ss * (steady - decay / ((beat - lambda) * t))
}

/// Uniform grid of `points` drive frequencies on `[lo, hi]`.
pub fn frequency_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        n => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

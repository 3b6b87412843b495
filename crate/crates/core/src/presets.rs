//! Reference ququart device used for examples, defaults and regression tests.
//!
//! The transmon sits at `E_J/E_C = 45.6` with `E_C/2pi = 292.08 MHz`, which
//! gives `omega_01/2pi = 5.2687 GHz` and `alpha_1/2pi = -0.338 GHz`. The
//! resonator is at 7.2475 GHz, coupled with `g/2pi = 100 MHz` and read out
//! with `Omega/2pi = 100 MHz`, `kappa/2pi = 5 MHz` for `T = 0.35 us`.

use crate::dispersive::{CouplingSpec, DispersiveModel};
use crate::readout::ReadoutConfig;
use crate::spectrum::{eigenenergies, TransmonParams};
use crate::units::{ghz_to_rad, mhz_to_rad, us_to_s};
use crate::Result;

pub const EJ_OVER_EC: f64 = 45.6;
pub const EC_MHZ: f64 = 292.08;
pub const OMEGA_R_GHZ: f64 = 7.2475;
pub const G_MHZ: f64 = 100.0;
pub const DRIVE_MHZ: f64 = 100.0;
pub const KAPPA_MHZ: f64 = 5.0;
pub const DURATION_US: f64 = 0.35;
/// Cloud width in units of the circle diameter `Omega / kappa`.
pub const SIGMA_OVER_DIAMETER: f64 = 0.13;

pub fn transmon() -> TransmonParams {
    TransmonParams::new(EJ_OVER_EC).with_ec(mhz_to_rad(EC_MHZ))
}

pub fn coupling() -> CouplingSpec {
    CouplingSpec {
        g: mhz_to_rad(G_MHZ),
        omega_r: ghz_to_rad(OMEGA_R_GHZ),
    }
}

/// Dispersive model of the lowest `d` levels.
pub fn dispersive_model(d: usize) -> Result<DispersiveModel> {
    let spectrum = eigenenergies(&transmon(), d + 1)?;
    DispersiveModel::new(spectrum.bare_energies(), &coupling(), d)
}

/// Readout configuration with drive and kernel both at the bare resonator
/// frequency; callers retune with [`ReadoutConfig::at_drive`].
pub fn readout() -> ReadoutConfig {
    let omega_r = ghz_to_rad(OMEGA_R_GHZ);
    ReadoutConfig {
        omega_r,
        kappa: mhz_to_rad(KAPPA_MHZ),
        drive: mhz_to_rad(DRIVE_MHZ),
        phi: 0.0,
        duration: us_to_s(DURATION_US),
        omega_d: omega_r,
        omega_m: omega_r,
    }
}

/// `sigma = 0.13 Omega / kappa`.
pub fn sigma() -> f64 {
    let cfg = readout();
    SIGMA_OVER_DIAMETER * cfg.drive / cfg.kappa
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::rad_to_ghz;

    #[test]
    fn reference_shifts() {
        let m = dispersive_model(4).unwrap();
        let mhz: Vec<f64> = m.chi.iter().map(|c| rad_to_ghz(*c) * 1e3).collect();
        // distinct shifts are what makes four-state readout possible
        for i in 0..4 {
            for j in i + 1..4 {
                assert!((mhz[i] - mhz[j]).abs() > 0.5, "{mhz:?}");
            }
        }
        assert!((readout().kappa_t() - 10.996).abs() < 1e-2);
    }
}

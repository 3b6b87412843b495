//! Conversions between ordinary frequencies in GHz (as found in device
//! tables and on figure axes) and angular frequencies in rad/s.

use std::f64::consts::TAU;

/// `f` in GHz to angular frequency in rad/s.
#[inline]
pub fn ghz_to_rad(f: f64) -> f64 {
    f * 1e9 * TAU
}

/// Angular frequency in rad/s to GHz.
#[inline]
pub fn rad_to_ghz(w: f64) -> f64 {
    w / (1e9 * TAU)
}

/// `f` in MHz to rad/s.
#[inline]
pub fn mhz_to_rad(f: f64) -> f64 {
    f * 1e6 * TAU
}

/// Microseconds to seconds.
#[inline]
pub fn us_to_s(t: f64) -> f64 {
    t * 1e-6
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let w = ghz_to_rad(7.2463);
        assert!((rad_to_ghz(w) - 7.2463).abs() < 1e-15);
        assert!((mhz_to_rad(100.0) - ghz_to_rad(0.1)).abs() < 1e-3);
    }
}

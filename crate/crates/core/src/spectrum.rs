//! Transmon levels from the charge-basis Hamiltonian.
//!
//! The Hamiltonian `4 E_C (n - n_g)^2 |n><n| - E_J/2 (|n><n+1| + h.c.)` is real
//! symmetric tridiagonal in the charge basis `n = -n_cut..=n_cut`. Its lowest
//! eigenvalues are found by Sturm-sequence bisection, which resolves each
//! level to a few ulps of the matrix scale and needs no dense storage.
//!
//! A [`Spectrum`] always carries the two offset-charge configurations
//! `n_g = 0` and `n_g = 1/2`; averaged transition frequencies, frequency
//! differences, anharmonicities and charge dispersions are derived from both.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default charge-basis truncation.
pub const DEFAULT_N_CUT: usize = 15;

/// Relative level change tolerated when the truncation is enlarged.
const CONVERGENCE_TOL: f64 = 1e-10;

/// Inputs of the charge-basis transmon Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonParams {
    pub ej_over_ec: f64,
    /// Charging energy in rad/s. `None` selects dimensionless units (`E_C = 1`).
    pub ec: Option<f64>,
    pub n_g: f64,
    pub n_cut: usize,
}

impl TransmonParams {
    pub fn new(ej_over_ec: f64) -> Self {
        Self {
            ej_over_ec,
            ec: None,
            n_g: 0.0,
            n_cut: DEFAULT_N_CUT,
        }
    }

    pub fn with_ec(mut self, ec: f64) -> Self {
        self.ec = Some(ec);
        self
    }

    pub fn with_n_g(mut self, n_g: f64) -> Self {
        self.n_g = n_g;
        self
    }

    pub fn with_n_cut(mut self, n_cut: usize) -> Self {
        self.n_cut = n_cut;
        self
    }

    /// Energy scale `E_C`; 1 in dimensionless mode.
    pub fn energy_scale(&self) -> f64 {
        self.ec.unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ej_over_ec > 0.0 && self.ej_over_ec.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "ej_over_ec must be positive, got {}",
                self.ej_over_ec
            )));
        }
        if let Some(ec) = self.ec {
            if !(ec > 0.0 && ec.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "ec must be positive, got {ec}"
                )));
            }
        }
        if self.n_cut < 10 {
            return Err(Error::InvalidInput(format!(
                "n_cut must be at least 10, got {}",
                self.n_cut
            )));
        }
        if !(-1.0..=1.0).contains(&self.n_g) {
            return Err(Error::InvalidInput(format!(
                "n_g must lie in [-1, 1], got {}",
                self.n_g
            )));
        }
        Ok(())
    }
}

/// Real symmetric tridiagonal matrix stored as diagonal and off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

impl Tridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Number of eigenvalues strictly below `x` (Sturm count).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.diag.len() {
            let e2 = if i == 0 {
                0.0
            } else {
                self.offdiag[i - 1] * self.offdiag[i - 1]
            };
            q = if i == 0 {
                self.diag[0] - x
            } else {
                self.diag[i] - x - e2 / q
            };
            if q == 0.0 {
                q = -f64::EPSILON * (self.diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.offdiag[i - 1].abs();
            }
            if i + 1 < n {
                r += self.offdiag[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * scale {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// The `d` smallest eigenvalues in ascending order.
    pub fn lowest(&self, d: usize) -> Vec<f64> {
        (0..d.min(self.dim())).map(|k| self.eigenvalue(k)).collect()
    }
}

/// Charge-basis Hamiltonian in the energy unit of `p` (rad/s, or `E_C` in
/// dimensionless mode). Row `k` corresponds to charge `n = k - n_cut`.
pub fn charge_hamiltonian(p: &TransmonParams) -> Tridiagonal {
    let ec = p.energy_scale();
    let ej = p.ej_over_ec * ec;
    let n_cut = p.n_cut as i64;
    let diag = (-n_cut..=n_cut)
        .map(|n| {
            let q = n as f64 - p.n_g;
            4.0 * ec * q * q
        })
        .collect();
    let offdiag = vec![-0.5 * ej; 2 * p.n_cut];
    Tridiagonal { diag, offdiag }
}

/// Lowest `d` unshifted eigenvalues at the offset charge in `p`, checked
/// against a truncation enlarged by 5.
pub fn raw_levels(p: &TransmonParams, d: usize) -> Result<Vec<f64>> {
    if d == 0 || d > p.n_cut {
        return Err(Error::InvalidInput(format!(
            "level count {d} must be in 1..={}",
            p.n_cut
        )));
    }
    let levels = charge_hamiltonian(p).lowest(d);
    let wider = charge_hamiltonian(&p.with_n_cut(p.n_cut + 5)).lowest(d);
    let scale = 4.0 * p.energy_scale();
    for (k, (a, b)) in levels.iter().zip(&wider).enumerate() {
        let rel = (a - b).abs() / a.abs().max(scale);
        if rel > CONVERGENCE_TOL {
            return Err(Error::Convergence(format!(
                "level {k} moved by relative {rel:.3e} when n_cut grew from {} to {}",
                p.n_cut,
                p.n_cut + 5
            )));
        }
    }
    Ok(levels)
}

/// Levels at `n_g = 0` and `n_g = 1/2`, both shifted by the same constant so
/// that the ground state at `n_g = 0` sits at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub levels_ng0: Vec<f64>,
    pub levels_nghalf: Vec<f64>,
    pub d: usize,
}

/// Computes `d` levels at both offset-charge configurations. The `n_g`
/// field of `p` is not used here; see [`levels_at`] for arbitrary `n_g`.
pub fn eigenenergies(p: &TransmonParams, d: usize) -> Result<Spectrum> {
    p.validate()?;
    let zero = raw_levels(&p.with_n_g(0.0), d)?;
    let half = raw_levels(&p.with_n_g(0.5), d)?;
    let shift = zero[0];
    let mut levels_ng0: Vec<f64> = zero.iter().map(|e| e - shift).collect();
    levels_ng0[0] = 0.0;
    let levels_nghalf = half.iter().map(|e| e - shift).collect();
    Ok(Spectrum {
        levels_ng0,
        levels_nghalf,
        d,
    })
}

/// Levels at the offset charge stored in `p`, shifted by `E_0(0)` of the
/// same parameter set.
pub fn levels_at(p: &TransmonParams, d: usize) -> Result<Vec<f64>> {
    p.validate()?;
    let reference = raw_levels(&p.with_n_g(0.0), 1)?[0];
    Ok(raw_levels(p, d)?
        .into_iter()
        .map(|e| e - reference)
        .collect())
}

impl Spectrum {
    /// Spectrum with identical levels at both offset charges.
    pub fn from_levels(levels: Vec<f64>) -> Self {
        let d = levels.len();
        Self {
            levels_nghalf: levels.clone(),
            levels_ng0: levels,
            d,
        }
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        if i >= j || j >= self.d {
            return Err(Error::Index(format!(
                "need 0 <= i < j < {}, got ({i}, {j})",
                self.d
            )));
        }
        Ok(())
    }

    fn check_level(&self, j: usize) -> Result<()> {
        if j >= self.d {
            return Err(Error::Index(format!("level {j} not in 0..{}", self.d)));
        }
        Ok(())
    }

    /// Charge-averaged transition frequency per photon between `i` and `j`.
    pub fn transition_frequency(&self, i: usize, j: usize) -> Result<f64> {
        self.check_pair(i, j)?;
        let (a, b) = (&self.levels_ng0, &self.levels_nghalf);
        Ok((a[j] + b[j] - a[i] - b[i]) / (2.0 * (j - i) as f64))
    }

    /// Difference of the `i -> j` transition between `n_g = 0` and `1/2`.
    pub fn frequency_difference(&self, i: usize, j: usize) -> Result<f64> {
        self.check_pair(i, j)?;
        let (a, b) = (&self.levels_ng0, &self.levels_nghalf);
        Ok((a[j] - a[i] - b[j] + b[i]) / (j - i) as f64)
    }

    /// `alpha_j = omega_{j,j+1} - omega_{j-1,j}` for `1 <= j < d - 1`.
    pub fn anharmonicity(&self, j: usize) -> Result<f64> {
        if j == 0 {
            return Err(Error::Index("anharmonicity needs j >= 1".into()));
        }
        Ok(self.transition_frequency(j, j + 1)? - self.transition_frequency(j - 1, j)?)
    }

    /// `epsilon_j = E_j(0) - E_j(1/2)`, sign retained.
    pub fn charge_dispersion(&self, j: usize) -> Result<f64> {
        self.check_level(j)?;
        Ok(self.levels_ng0[j] - self.levels_nghalf[j])
    }

    /// Bare qudit energies used downstream (the `n_g = 0` configuration).
    pub fn bare_energies(&self) -> &[f64] {
        &self.levels_ng0
    }
}

/// Free-function forms mirroring the [`Spectrum`] methods.
pub fn transition_frequency(s: &Spectrum, i: usize, j: usize) -> Result<f64> {
    s.transition_frequency(i, j)
}

pub fn frequency_difference(s: &Spectrum, i: usize, j: usize) -> Result<f64> {
    s.frequency_difference(i, j)
}

pub fn anharmonicity(s: &Spectrum, j: usize) -> Result<f64> {
    s.anharmonicity(j)
}

pub fn charge_dispersion(s: &Spectrum, j: usize) -> Result<f64> {
    s.charge_dispersion(j)
}

/// `(omega_01, alpha_1)` in units of `E_C` for a given `E_J/E_C`.
pub fn qubit_parameters(ej_over_ec: f64) -> Result<(f64, f64)> {
    let s = eigenenergies(&TransmonParams::new(ej_over_ec), 3)?;
    Ok((s.transition_frequency(0, 1)?, s.anharmonicity(1)?))
}

/// Result of [`fit_ej_ec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedTransmon {
    pub ej_over_ec: f64,
    /// Charging energy in the unit of the inputs.
    pub ec: f64,
}

impl FittedTransmon {
    pub fn params(&self) -> TransmonParams {
        TransmonParams::new(self.ej_over_ec).with_ec(self.ec)
    }
}

const FIT_BRACKET: (f64, f64) = (10.0, 400.0);

/// Finds `E_J/E_C` and `E_C` that reproduce a qubit frequency and
/// anharmonicity. The ratio `alpha_1 / omega_01` is monotone in `E_J/E_C`,
/// so plain bisection on it is enough.
pub fn fit_ej_ec(omega01: f64, alpha1: f64) -> Result<FittedTransmon> {
    if !(omega01 > 0.0) || !(alpha1 < 0.0) || alpha1.abs() >= omega01 {
        return Err(Error::NoRoot(format!(
            "need omega01 > 0 and -omega01 < alpha1 < 0, got ({omega01}, {alpha1})"
        )));
    }
    let target = alpha1 / omega01;
    let ratio = |x: f64| -> Result<f64> {
        let (w, a) = qubit_parameters(x)?;
        Ok(a / w)
    };
    let (mut lo, mut hi) = FIT_BRACKET;
    let (r_lo, r_hi) = (ratio(lo)?, ratio(hi)?);
    if !((r_lo - target) * (r_hi - target) <= 0.0) {
        return Err(Error::NoRoot(format!(
            "alpha1/omega01 = {target:.6} outside [{r_lo:.6}, {r_hi:.6}] spanned by E_J/E_C in [{lo}, {hi}]"
        )));
    }
    let increasing = r_hi > r_lo;
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        let above = ratio(mid)? > target;
        if above == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let ej_over_ec = 0.5 * (lo + hi);
    let (w, _) = qubit_parameters(ej_over_ec)?;
    Ok(FittedTransmon {
        ej_over_ec,
        ec: omega01 / w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_josephson_energy_gives_charge_states() {
        let h = charge_hamiltonian(&TransmonParams {
            ej_over_ec: 0.0,
            ec: None,
            n_g: 0.0,
            n_cut: 1,
        });
        assert_eq!(h.diag, vec![4.0, 0.0, 4.0]);
        assert_eq!(h.offdiag, vec![0.0, 0.0]);
        let levels = h.lowest(3);
        assert!((levels[0]).abs() < 1e-14);
        assert!((levels[1] - 4.0).abs() < 1e-14);
        assert!((levels[2] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn offdiagonal_is_half_ej() {
        let h = charge_hamiltonian(&TransmonParams::new(1.0).with_n_cut(1));
        assert_eq!(h.offdiag, vec![-0.5, -0.5]);
    }

    #[test]
    fn decoupled_ladder_with_larger_cut() {
        let p = TransmonParams {
            ej_over_ec: 0.0,
            ec: None,
            n_g: 0.0,
            n_cut: 10,
        };
        let levels = charge_hamiltonian(&p).lowest(5);
        let expect = [0.0, 4.0, 4.0, 16.0, 16.0];
        for (a, b) in levels.iter().zip(expect) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn validation() {
        assert!(TransmonParams::new(-1.0).validate().is_err());
        assert!(TransmonParams::new(10.0).with_n_cut(9).validate().is_err());
        assert!(TransmonParams::new(10.0).with_n_g(1.5).validate().is_err());
        assert!(TransmonParams::new(10.0).validate().is_ok());
        assert!(eigenenergies(&TransmonParams::new(45.6), 16).is_err());
    }

    #[test]
    fn shift_convention() {
        let s = eigenenergies(&TransmonParams::new(45.6), 5).unwrap();
        assert_eq!(s.levels_ng0[0], 0.0);
        assert_eq!(s.levels_nghalf.len(), 5);
        for w in s.levels_ng0.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn harmonic_ladder_identities() {
        let s = Spectrum::from_levels(vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(s.transition_frequency(0, 2).unwrap(), 1.0);
        assert_eq!(s.anharmonicity(1).unwrap(), 0.0);
        assert_eq!(s.anharmonicity(2).unwrap(), 0.0);
        assert_eq!(s.frequency_difference(0, 3).unwrap(), 0.0);
        assert_eq!(s.charge_dispersion(2).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_configurations_reduce_to_plain_gap() {
        let s = Spectrum::from_levels(vec![0.0, 5.0, 9.0]);
        assert_eq!(s.transition_frequency(0, 2).unwrap(), 4.5);
        assert_eq!(s.transition_frequency(1, 2).unwrap(), 4.0);
    }

    #[test]
    fn index_errors() {
        let s = Spectrum::from_levels(vec![0.0, 1.0, 2.0]);
        assert!(matches!(s.transition_frequency(1, 1), Err(Error::Index(_))));
        assert!(matches!(s.transition_frequency(0, 3), Err(Error::Index(_))));
        assert!(matches!(s.anharmonicity(0), Err(Error::Index(_))));
        assert!(matches!(s.anharmonicity(2), Err(Error::Index(_))));
        assert!(matches!(s.charge_dispersion(3), Err(Error::Index(_))));
    }

    #[test]
    fn fit_rejects_non_negative_anharmonicity() {
        assert!(matches!(fit_ej_ec(5.0, 0.0), Err(Error::NoRoot(_))));
        assert!(matches!(fit_ej_ec(5.0, 0.3), Err(Error::NoRoot(_))));
        assert!(matches!(fit_ej_ec(5.0, -6.0), Err(Error::NoRoot(_))));
        // Cooper-pair-box-like ratio is outside the bracket
        assert!(matches!(fit_ej_ec(5.0, -4.0), Err(Error::NoRoot(_))));
    }
}

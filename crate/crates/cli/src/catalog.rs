//! Device tables: one transmon-plus-resonator per CSV row.
//!
//! Required columns are `name, omega01, alpha1, omega_r, kappa` (GHz); the
//! optional `g, drive` (GHz), `duration` (us) and `sigma` may be absent or blank.

use std::path::Path;

use qudit_readout::spectrum::{eigenenergies, fit_ej_ec};
use qudit_readout::units::{ghz_to_rad, rad_to_ghz};
use serde::Deserialize;

use crate::emit::{Cell, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceRecord {
    pub name: String,
    pub omega01: f64,
    pub alpha1: f64,
    pub omega_r: f64,
    pub kappa: f64,
    pub g: Option<f64>,
    pub drive: Option<f64>,
    pub duration: Option<f64>,
    pub sigma: Option<f64>,
}

/// A device with its fitted transmon parameters. Frequencies in GHz.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub record: DeviceRecord,
    pub ej_over_ec: f64,
    pub ec: f64,
    /// Charge dispersion of level 3, `E_3(0) - E_3(1/2)`.
    pub epsilon3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    /// 1-based data row, not counting the header.
    pub row: usize,
    pub name: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    pub entries: Vec<CatalogEntry>,
    pub errors: Vec<RowError>,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    omega01: Option<f64>,
    #[serde(default)]
    alpha1: Option<f64>,
    #[serde(default)]
    omega_r: Option<f64>,
    #[serde(default)]
    kappa: Option<f64>,
    #[serde(default)]
    g: Option<f64>,
    #[serde(default)]
    drive: Option<f64>,
    #[serde(default)]
    duration: Option<f64>,
    #[serde(default)]
    sigma: Option<f64>,
}

impl RawRecord {
    fn validate(self) -> Result<DeviceRecord, String> {
        let name = self.name.filter(|n| !n.is_empty()).ok_or("missing name")?;
        let need = |v: Option<f64>, field: &str| v.ok_or(format!("missing {field}"));
        let omega01 = need(self.omega01, "omega01")?;
        let alpha1 = need(self.alpha1, "alpha1")?;
        let omega_r = need(self.omega_r, "omega_r")?;
        let kappa = need(self.kappa, "kappa")?;
        for (v, field) in [(omega01, "omega01"), (omega_r, "omega_r"), (kappa, "kappa")] {
            if !(v > 0.0) {
                return Err(format!("{field} must be positive, got {v}"));
            }
        }
        if !(alpha1 < 0.0) {
            return Err(format!("alpha1 must be negative, got {alpha1}"));
        }
        for (v, field) in [
            (self.g, "g"),
            (self.drive, "drive"),
            (self.duration, "duration"),
            (self.sigma, "sigma"),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(format!("{field} must be positive, got {v}"));
                }
            }
        }
        Ok(DeviceRecord {
            name,
            omega01,
            alpha1,
            omega_r,
            kappa,
            g: self.g,
            drive: self.drive,
            duration: self.duration,
            sigma: self.sigma,
        })
    }
}

/// Fits `E_J/E_C` and `E_C` to a record and evaluates `epsilon_3`.
pub fn derive_entry(record: DeviceRecord) -> Result<CatalogEntry, String> {
    let fit = fit_ej_ec(ghz_to_rad(record.omega01), ghz_to_rad(record.alpha1))
        .map_err(|e| e.to_string())?;
    let spectrum = eigenenergies(&fit.params(), 4).map_err(|e| e.to_string())?;
    let epsilon3 = spectrum.charge_dispersion(3).map_err(|e| e.to_string())?;
    Ok(CatalogEntry {
        record,
        ej_over_ec: fit.ej_over_ec,
        ec: rad_to_ghz(fit.ec),
        epsilon3: rad_to_ghz(epsilon3),
    })
}

/// Reads a device table, collecting per-row failures instead of stopping.
/// Entries come back sorted by `|epsilon_3|`, smallest first.
pub fn device_catalog(path: &Path) -> anyhow::Result<Catalog> {
    let text = std::fs::read_to_string(path)?;
    Ok(catalog_from_str(&text))
}

pub fn catalog_from_str(text: &str) -> Catalog {
    let mut catalog = Catalog::default();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    for (k, row) in reader.deserialize::<RawRecord>().enumerate() {
        let row_no = k + 1;
        let raw = match row {
            Ok(r) => r,
            Err(e) => {
                catalog.errors.push(RowError {
                    row: row_no,
                    name: None,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let name = raw.name.clone();
        match raw.validate().and_then(derive_entry) {
            Ok(entry) => catalog.entries.push(entry),
            Err(message) => {
                log::warn!("device row {row_no}: {message}");
                catalog.errors.push(RowError {
                    row: row_no,
                    name,
                    message,
                });
            }
        }
    }
    catalog.entries.sort_by(|a, b| {
        a.epsilon3
            .abs()
            .total_cmp(&b.epsilon3.abs())
            .then_with(|| a.record.name.cmp(&b.record.name))
    });
    catalog
}

impl Catalog {
    pub fn tables(&self) -> Vec<Table> {
        let mut devices = Table::new(
            "catalog",
            &[
                "name",
                "omega01_GHz",
                "alpha1_GHz",
                "omega_r_GHz",
                "kappa_GHz",
                "ej_over_ec",
                "ec_GHz",
                "epsilon3_GHz",
            ],
        );
        for e in &self.entries {
            let r = &e.record;
            devices.push(vec![
                r.name.clone().into(),
                r.omega01.into(),
                r.alpha1.into(),
                r.omega_r.into(),
                r.kappa.into(),
                e.ej_over_ec.into(),
                e.ec.into(),
                e.epsilon3.into(),
            ]);
        }
        let mut errors = Table::new("catalog_errors", &["row", "name", "error"]);
        for e in &self.errors {
            errors.push(vec![
                e.row.into(),
                e.name.clone().map_or(Cell::Empty, Cell::Text),
                e.message.clone().into(),
            ]);
        }
        vec![devices, errors]
    }
}

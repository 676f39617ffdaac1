//! Discrete motor + gearbox options selectable through the `motor_label`
//! design variable.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of motor/gearbox combinations the design space indexes.
pub const CATALOG_SIZE: usize = 18;

/// CSV header expected by [`load_catalog`] and written by [`write_catalog`].
pub const CATALOG_HEADER: [&str; 13] = [
    "label",
    "part_name",
    "diameter_mm",
    "R_a",
    "L_a",
    "k_t",
    "c",
    "J_m",
    "J_gb",
    "R",
    "mass_kg",
    "V_max",
    "i_max",
];

/// One motor + gearbox combination.
///
/// Electrical and inertial values are referred to the motor shaft; the
/// gearbox enters only through `gear_ratio` and `j_gearbox`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorSpec {
    pub label: u32,
    pub part_name: String,
    pub diameter_mm: f64,
    /// Terminal resistance (ohm).
    #[serde(rename = "R_a")]
    pub resistance: f64,
    /// Terminal inductance (H).
    #[serde(rename = "L_a")]
    pub inductance: f64,
    /// Torque constant (N m / A). The back-EMF constant is numerically equal.
    #[serde(rename = "k_t")]
    pub torque_constant: f64,
    /// Viscous shaft damping (N m s / rad).
    #[serde(rename = "c")]
    pub damping: f64,
    #[serde(rename = "J_m")]
    pub j_rotor: f64,
    /// Gearbox inertia reflected to the motor shaft.
    #[serde(rename = "J_gb")]
    pub j_gearbox: f64,
    #[serde(rename = "R")]
    pub gear_ratio: f64,
    /// Motor plus gearbox mass.
    pub mass_kg: f64,
    #[serde(rename = "V_max")]
    pub v_max: f64,
    #[serde(rename = "i_max")]
    pub i_max: f64,
}

impl MotorSpec {
    /// Back-EMF constant, identical to the torque constant in SI units.
    pub fn back_emf_constant(&self) -> f64 {
        self.torque_constant
    }

    /// Total shaft inertia `J_m + J_gb`.
    pub fn total_inertia(&self) -> f64 {
        self.j_rotor + self.j_gearbox
    }

    fn validate(&self, row: usize) -> Result<()> {
        let positive = [
            ("diameter_mm", self.diameter_mm),
            ("R_a", self.resistance),
            ("L_a", self.inductance),
            ("k_t", self.torque_constant),
            ("c", self.damping),
            ("J_m", self.j_rotor),
            ("J_gb", self.j_gearbox),
            ("mass_kg", self.mass_kg),
            ("V_max", self.v_max),
            ("i_max", self.i_max),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Catalog {
                    row,
                    field,
                    reason: format!("must be finite and strictly positive, got {value}"),
                });
            }
        }
        if !(self.gear_ratio.is_finite() && self.gear_ratio >= 1.0) {
            return Err(Error::Catalog {
                row,
                field: "R",
                reason: format!("gear ratio must be >= 1, got {}", self.gear_ratio),
            });
        }
        if self.label == 0 || self.label as usize > CATALOG_SIZE {
            return Err(Error::Catalog {
                row,
                field: "label",
                reason: format!("label {} outside 1..={CATALOG_SIZE}", self.label),
            });
        }
        Ok(())
    }
}

/// Immutable, label-indexed motor catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    entries: Vec<MotorSpec>,
}

impl Catalog {
    /// Validates and indexes a set of entries. Labels must cover `1..=18`
    /// exactly once.
    pub fn new(mut entries: Vec<MotorSpec>) -> Result<Self> {
        for (i, entry) in entries.iter().enumerate() {
            entry.validate(i + 1)?;
        }
        entries.sort_by_key(|e| e.label);
        for pair in entries.windows(2) {
            if pair[0].label == pair[1].label {
                return Err(Error::Catalog {
                    row: 0,
                    field: "label",
                    reason: format!("duplicate label {}", pair[0].label),
                });
            }
        }
        if entries.len() != CATALOG_SIZE {
            let missing: Vec<u32> = (1..=CATALOG_SIZE as u32)
                .filter(|l| !entries.iter().any(|e| e.label == *l))
                .collect();
            return Err(Error::Catalog {
                row: 0,
                field: "label",
                reason: format!(
                    "expected {CATALOG_SIZE} entries, found {}; missing labels {missing:?}",
                    entries.len()
                ),
            });
        }
        Ok(Self { entries })
    }

    /// The catalog shipped with the crate (`data/motors.csv`).
    pub fn builtin() -> Self {
        Self::from_csv_reader(BUILTIN_CSV.as_bytes()).expect("bundled motor catalog is valid")
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().ne(CATALOG_HEADER.iter().copied()) {
            return Err(Error::Catalog {
                row: 0,
                field: "header",
                reason: format!(
                    "expected `{}`, got `{}`",
                    CATALOG_HEADER.join(","),
                    header.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut entries = Vec::new();
        for (i, record) in rdr.deserialize::<MotorSpec>().enumerate() {
            let entry = record.map_err(|e| Error::Catalog {
                row: i + 1,
                field: "record",
                reason: e.to_string(),
            })?;
            entries.push(entry);
        }
        Self::new(entries)
    }

    pub fn lookup(&self, label: u32) -> Result<&MotorSpec> {
        if label == 0 || label as usize > self.entries.len() {
            return Err(Error::LabelOutOfRange(label));
        }
        Ok(&self.entries[label as usize - 1])
    }

    pub fn entries(&self) -> &[MotorSpec] {
        &self.entries
    }

    pub fn to_csv_writer<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for entry in &self.entries {
            wtr.serialize(entry)?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

const BUILTIN_CSV: &str = include_str!("../data/motors.csv");

/// Reads and validates a catalog CSV file.
pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Catalog::from_csv_reader(file)
}

/// Writes a catalog to `path` in the format read by [`load_catalog`].
pub fn write_catalog(catalog: &Catalog, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    catalog.to_csv_writer(file)
}

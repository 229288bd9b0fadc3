//! Location, loading and merging of the optimized basis table.

use std::path::{Path, PathBuf};

use cvmbqc_core::gates::{basis_for, cz_plan, dbsl_swap_plan, qrl_cz_plan, BasisTable, GateId, GatePlan};
use cvmbqc_core::lattice::{db_to_r, Lattice};

use crate::error::{CliError, Result};

pub const CACHE_ENV: &str = "CVMBQC_CACHE_DIR";
pub const CACHE_FILE: &str = "basis_table.json";

/// Table shipped with the crate, used when no cache directory is set.
const BUNDLED: &str = include_str!("../data/basis_table.json");

/// Where a table came from, for error messages.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Bundled,
    File(PathBuf),
}

impl Source {
    fn path(&self) -> PathBuf {
        match self {
            Source::Bundled => PathBuf::from("<bundled>"),
            Source::File(p) => p.clone(),
        }
    }
}

/// The table file selected by the environment, if any.
pub fn cache_path() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(|d| PathBuf::from(d).join(CACHE_FILE))
}

pub fn bundled() -> Result<BasisTable> {
    parse(BUNDLED, &Source::Bundled)
}

/// Loads the table named by the environment, else the bundled one.
///
/// A set directory without a table file is treated as an empty table, so
/// every lookup reports a cache miss rather than silently using the
/// bundled bases.
pub fn load() -> Result<(BasisTable, Source)> {
    match cache_path() {
        Some(p) if p.exists() => Ok((load_file(&p)?, Source::File(p))),
        Some(p) => Ok((BasisTable::new(), Source::File(p))),
        None => Ok((bundled()?, Source::Bundled)),
    }
}

pub fn load_file(path: &Path) -> Result<BasisTable> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text, &Source::File(path.to_path_buf()))
}

fn parse(text: &str, source: &Source) -> Result<BasisTable> {
    let table: BasisTable = serde_json::from_str(text)
        .map_err(|e| CliError::BadCache { path: source.path(), reason: e.to_string() })?;
    if table.version != BasisTable::VERSION {
        return Err(CliError::BadCache {
            path: source.path(),
            reason: format!("version {} (expected {})", table.version, BasisTable::VERSION),
        });
    }
    for row in &table.rows {
        if row.angles.iter().any(|a| !a.is_finite()) || !row.squeezing_db.is_finite() {
            return Err(CliError::BadCache {
                path: source.path(),
                reason: format!("non-finite entry for {} at {} dB", row.lattice, row.squeezing_db),
            });
        }
    }
    Ok(table)
}

/// Writes `table` as pretty JSON, creating parent directories.
pub fn save(table: &BasisTable, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(table)
        .map_err(|e| CliError::Json { context: "basis table".into(), source: e })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Plan for any gate at `db`. Controlled-Z plans outside the quad-rail
/// lattice come from the table; a missing entry is a cache miss.
pub fn plan_for(
    table: &BasisTable,
    lattice: Lattice,
    gate: GateId,
    db: f64,
    parity: u8,
    variable_theta_c: bool,
) -> Result<GatePlan> {
    let r = db_to_r(db);
    match (lattice, gate) {
        (Lattice::Qrl, GateId::Ffcz) => Ok(qrl_cz_plan(r)?),
        (_, GateId::Ffcz) => {
            let row = table
                .lookup(lattice, variable_theta_c, db)
                .ok_or(CliError::CacheMiss { lattice, db, variable_theta_c })?;
            // evaluate at the requested r so rows and plans agree exactly
            Ok(cz_plan(lattice, r, parity, &row.angles, variable_theta_c)?)
        }
        (Lattice::Dbsl, GateId::Swap) => Ok(dbsl_swap_plan(r)?),
        _ => Ok(basis_for(lattice, gate, r, parity)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table_parses() {
        let t = bundled().unwrap();
        assert_eq!(t.version, BasisTable::VERSION);
    }

    #[test]
    fn round_trip_and_rejects() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join(CACHE_FILE);
        let table = bundled().unwrap();
        save(&table, &path).unwrap();
        assert_eq!(load_file(&path).unwrap(), table);
        std::fs::write(&path, "{\"version\": 99, \"rows\": []}").unwrap();
        assert!(matches!(load_file(&path), Err(CliError::BadCache { .. })));
        std::fs::write(&path, "not json").unwrap();
        assert_eq!(load_file(&path).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn every_row_serves_both_parities() {
        // DBSL rows come in two solution families with different odd-parity flips
        let table = bundled().unwrap();
        for row in &table.rows {
            for parity in [0, 1] {
                let plan = plan_for(&table, row.lattice, GateId::Ffcz, row.squeezing_db, parity, row.variable_theta_c)
                    .unwrap();
                let res = plan.residual().unwrap();
                assert!(res < cvmbqc_core::gates::PLAN_TOL, "{} at {} dB: {res}", plan.label(), row.squeezing_db);
            }
        }
    }

    #[test]
    fn miss_names_the_command() {
        let err = plan_for(&BasisTable::new(), Lattice::Mbsl, GateId::Ffcz, 12.5, 0, false).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("cvmbqc optimize --lattice MBSL --db 12.5"), "{err}");
        // closed-form gates need no table
        assert!(plan_for(&BasisTable::new(), Lattice::Qrl, GateId::Ffcz, 12.5, 0, false).is_ok());
        assert!(plan_for(&BasisTable::new(), Lattice::Bsl, GateId::P1, 12.5, 1, false).is_ok());
    }
}

//! Grids bundled with the crate.

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::gridfile::{parse_grid, read_grid};

pub const THREEBUS: &str = include_str!("../data/threebus.grid");
pub const IEEE34: &str = include_str!("../data/ieee34.grid");
pub const CIGRE_MV: &str = include_str!("../data/cigre_mv.grid");

/// Three 1 km cables with fixed injections at buses 1-2 and storage at bus 3.
pub fn threebus() -> RadialGrid {
    parse_grid(THREEBUS).expect("bundled threebus.grid parses")
}

/// IEEE 34-node feeder, balanced positive-sequence equivalent.
pub fn ieee34() -> RadialGrid {
    parse_grid(IEEE34).expect("bundled ieee34.grid parses")
}

/// Feeder 1 of the CIGRE European MV benchmark.
pub fn cigre_mv() -> RadialGrid {
    parse_grid(CIGRE_MV).expect("bundled cigre_mv.grid parses")
}

/// Bundled grid by name: `threebus`, `ieee34` or `cigre_mv`.
pub fn by_name(name: &str) -> Option<RadialGrid> {
    match name {
        "threebus" => Some(threebus()),
        "ieee34" => Some(ieee34()),
        "cigre_mv" | "cigre" => Some(cigre_mv()),
        _ => None,
    }
}

/// A grid file when `arg` names an existing path, a bundled grid otherwise.
pub fn load(arg: &str) -> Result<RadialGrid> {
    if std::path::Path::new(arg).exists() {
        return read_grid(arg);
    }
    by_name(arg).ok_or_else(|| Error::InvalidInput(format!("no grid file or bundled grid named `{arg}`")))
}

pub fn all() -> Vec<RadialGrid> {
    vec![threebus(), ieee34(), cigre_mv()]
}

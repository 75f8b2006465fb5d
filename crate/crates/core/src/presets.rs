use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::termlib::LibraryConfig;

/// Model and pruning defaults for the four reference data sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Sdse,
    Adse,
    Emps,
    Whs,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Sdse, Preset::Adse, Preset::Emps, Preset::Whs];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Sdse => "sdse",
            Preset::Adse => "adse",
            Preset::Emps => "emps",
            Preset::Whs => "whs",
        }
    }

    /// Lags 4/4 (7/7 for WHS), cubic.
    pub fn library_config(&self) -> LibraryConfig {
        let lags = match self {
            Preset::Whs => 7,
            _ => 4,
        };
        LibraryConfig {
            n_y: lags,
            n_u: lags,
            degree: 3,
        }
    }

    pub fn n_terms(&self) -> usize {
        10
    }

    /// Atom count that worked best when selecting 100 samples.
    pub fn atoms(&self) -> usize {
        match self {
            Preset::Sdse => 15,
            Preset::Adse => 20,
            Preset::Emps => 25,
            Preset::Whs => 5,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown preset {s:?}")))
    }
}

//! Level-to-knots maps `m(i)`.

use serde::{Deserialize, Serialize};

use crate::{Result, SgError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelMap {
    Linear,
    TwoStep,
    Doubling,
    Tripling,
    Gk,
}

const GK_COUNTS: [usize; 6] = [0, 1, 3, 9, 19, 35];

impl LevelMap {
    pub fn name(self) -> &'static str {
        match self {
            LevelMap::Linear => "linear",
            LevelMap::TwoStep => "two_step",
            LevelMap::Doubling => "doubling",
            LevelMap::Tripling => "tripling",
            LevelMap::Gk => "gk",
        }
    }

    /// Number of knots at `level`; `m(0) = 0`.
    pub fn apply(self, level: u32) -> Result<usize> {
        if level == 0 {
            return Ok(0);
        }
        let too_big = || SgError::UnsupportedLevel { map: self.name(), level };
        let i = level as usize;
        match self {
            LevelMap::Linear => Ok(i),
            LevelMap::TwoStep => Ok(2 * (i - 1) + 1),
            LevelMap::Doubling => {
                if i == 1 {
                    Ok(1)
                } else {
                    1usize.checked_shl(level - 1).filter(|&p| p < usize::MAX / 2).map(|p| p + 1).ok_or_else(too_big)
                }
            }
            LevelMap::Tripling => 3usize.checked_pow(level - 1).ok_or_else(too_big),
            LevelMap::Gk => GK_COUNTS.get(i).copied().ok_or_else(too_big),
        }
    }
}

impl std::str::FromStr for LevelMap {
    type Err = SgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "linear" | "lin" => Ok(LevelMap::Linear),
            "two_step" | "2step" | "2_step" => Ok(LevelMap::TwoStep),
            "doubling" => Ok(LevelMap::Doubling),
            "tripling" => Ok(LevelMap::Tripling),
            "gk" | "genz_keister" => Ok(LevelMap::Gk),
            other => Err(SgError::Config(format!("unknown level map '{other}'"))),
        }
    }
}

/// `m(level)` for the given map.
pub fn apply_level_map(map: LevelMap, level: u32) -> Result<usize> {
    map.apply(level)
}

//! MacKinnon (2010) response surfaces: cv(T) = b0 + b1/T + b2/T^2 + b3/T^3.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SignificanceLevel {
    #[serde(rename = "1%")]
    One,
    #[serde(rename = "5%")]
    Five,
    #[serde(rename = "10%")]
    Ten,
}

impl SignificanceLevel {
    pub const ALL: [SignificanceLevel; 3] = [Self::One, Self::Five, Self::Ten];

    pub fn fraction(self) -> f64 {
        match self {
            Self::One => 0.01,
            Self::Five => 0.05,
            Self::Ten => 0.10,
        }
    }

    fn index(self) -> usize {
        match self {
            Self::One => 0,
            Self::Five => 1,
            Self::Ten => 2,
        }
    }
}

impl fmt::Display for SignificanceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::One => "1%",
            Self::Five => "5%",
            Self::Ten => "10%",
        })
    }
}

impl std::str::FromStr for SignificanceLevel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "1%" | "0.01" => Ok(Self::One),
            "5%" | "0.05" => Ok(Self::Five),
            "10%" | "0.1" | "0.10" => Ok(Self::Ten),
            other => Err(format!("unsupported significance level {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalTable {
    /// Single series, no deterministic terms.
    AdfNone,
    /// Single series with constant.
    AdfConstant,
    /// Single series with constant and linear trend.
    AdfConstantTrend,
    /// Residuals of a two-variable cointegrating regression with constant.
    EngleGranger2,
}

const ADF_NC: [[f64; 4]; 3] = [
    [-2.56574, -2.2358, -3.627, 0.0],
    [-1.94100, -0.2686, -3.365, 31.223],
    [-1.61682, 0.2656, -2.714, 25.364],
];
const ADF_C: [[f64; 4]; 3] = [
    [-3.43035, -6.5393, -16.786, -79.433],
    [-2.86154, -2.8903, -4.234, -40.040],
    [-2.56677, -1.5384, -2.809, 0.0],
];
const ADF_CT: [[f64; 4]; 3] = [
    [-3.95877, -9.0531, -28.428, -134.155],
    [-3.41049, -4.3904, -9.036, -45.374],
    [-3.12705, -2.5856, -3.925, -22.380],
];
const EG2_C: [[f64; 4]; 3] = [
    [-3.89644, -10.9519, -33.527, 0.0],
    [-3.33613, -6.1101, -6.823, 0.0],
    [-3.04445, -4.2412, -2.720, 0.0],
];

/// Critical value at sample size `t` (observations in the test regression).
pub fn critical_value(table: CriticalTable, level: SignificanceLevel, t: usize) -> f64 {
    let b = match table {
        CriticalTable::AdfNone => &ADF_NC,
        CriticalTable::AdfConstant => &ADF_C,
        CriticalTable::AdfConstantTrend => &ADF_CT,
        CriticalTable::EngleGranger2 => &EG2_C,
    }[level.index()];
    let inv = 1.0 / t as f64;
    b[0] + inv * (b[1] + inv * (b[2] + inv * b[3]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asymptotic_values() {
        let big = 100_000_000;
        assert!((critical_value(CriticalTable::AdfConstant, SignificanceLevel::Five, big) + 2.86154).abs() < 1e-6);
        assert!((critical_value(CriticalTable::EngleGranger2, SignificanceLevel::Five, big) + 3.33613).abs() < 1e-6);
    }

    #[test]
    fn levels_are_ordered() {
        for table in [
            CriticalTable::AdfNone,
            CriticalTable::AdfConstant,
            CriticalTable::AdfConstantTrend,
            CriticalTable::EngleGranger2,
        ] {
            for t in [50, 200, 2000] {
                let one = critical_value(table, SignificanceLevel::One, t);
                let five = critical_value(table, SignificanceLevel::Five, t);
                let ten = critical_value(table, SignificanceLevel::Ten, t);
                assert!(one < five && five < ten);
            }
        }
    }

    #[test]
    fn level_parsing() {
        assert_eq!("5%".parse::<SignificanceLevel>().unwrap(), SignificanceLevel::Five);
        assert_eq!("0.1".parse::<SignificanceLevel>().unwrap(), SignificanceLevel::Ten);
        assert!("2%".parse::<SignificanceLevel>().is_err());
    }
}

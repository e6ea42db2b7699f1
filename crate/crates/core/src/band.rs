//! Conventional EEG bands mapped onto the 2 Hz feature grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Delta,
    Theta,
    Alpha,
    Beta,
}

impl Band {
    pub const ALL: [Band; 4] = [Band::Delta, Band::Theta, Band::Alpha, Band::Beta];

    /// Retained bins (1-based, bin k = 2k Hz) assigned to the band by
    /// nearest-bin mapping of the band edges.
    pub fn bins(self) -> std::ops::RangeInclusive<usize> {
        match self {
            Band::Delta => 1..=1,
            Band::Theta => 2..=3,
            Band::Alpha => 4..=6,
            Band::Beta => 7..=25,
        }
    }

    /// Continuous frequency range in Hz used when synthesizing band power.
    pub fn frequency_range(self) -> (f64, f64) {
        match self {
            Band::Delta => (1.0, 3.0),
            Band::Theta => (3.5, 7.5),
            Band::Alpha => (7.5, 13.0),
            Band::Beta => (14.0, 50.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Band::Delta => "delta",
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::Beta => "beta",
        }
    }

    /// Band that owns feature bin `bin`.
    pub fn of_bin(bin: usize) -> Option<Band> {
        Band::ALL.into_iter().find(|b| b.bins().contains(&bin))
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Band {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "delta" => Ok(Band::Delta),
            "theta" => Ok(Band::Theta),
            "alpha" => Ok(Band::Alpha),
            "beta" => Ok(Band::Beta),
            other => Err(format!("unknown band '{other}'")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bands_partition_the_grid() {
        let total: usize = Band::ALL.iter().map(|b| b.bins().count()).sum();
        assert_eq!(total, crate::dsp::N_BINS);
        for bin in 1..=crate::dsp::N_BINS {
            let owners = Band::ALL.iter().filter(|b| b.bins().contains(&bin)).count();
            assert_eq!(owners, 1, "bin {bin}");
        }
        assert_eq!(Band::of_bin(0), None);
        assert_eq!(Band::of_bin(5), Some(Band::Alpha));
    }

    #[test]
    fn parses_names() {
        assert_eq!("Alpha".parse::<Band>(), Ok(Band::Alpha));
        assert!("gamma".parse::<Band>().is_err());
    }
}

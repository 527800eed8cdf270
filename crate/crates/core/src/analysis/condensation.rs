use serde::{Deserialize, Serialize};

use super::entropy::EntropyMap;
use crate::error::{Error, Result};

/// Gas threshold on `S / S_max`.
pub const CONDENSATION_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CondensationFlag {
    /// Crossed the threshold inside the swept range.
    Crossed,
    /// Already below the threshold at the highest temperature.
    AboveRange,
    /// Never dropped below the threshold; `T_c` set to the lowest temperature.
    NeverCrossed,
}

impl CondensationFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Crossed => "crossed",
            Self::AboveRange => "above_range",
            Self::NeverCrossed => "never_crossed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condensation {
    pub t_c: f64,
    pub flag: CondensationFlag,
}

/// First downward crossing of `threshold` from the high-temperature side,
/// linearly interpolated. `temperatures` must be strictly descending.
pub fn condensation_temperature(temperatures: &[f64], s: &[f64], threshold: f64) -> Result<Condensation> {
    if temperatures.len() < 2 || temperatures.len() != s.len() {
        return Err(Error::InsufficientData(format!(
            "need at least 2 temperatures with matching entropies, got {} and {}",
            temperatures.len(),
            s.len()
        )));
    }
    if temperatures.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter {
            name: "temperatures",
            reason: "must be strictly descending".into(),
        });
    }
    if s[0] < threshold {
        return Ok(Condensation {
            t_c: temperatures[0],
            flag: CondensationFlag::AboveRange,
        });
    }
    for i in 1..s.len() {
        if s[i] < threshold {
            let (t0, t1) = (temperatures[i - 1], temperatures[i]);
            let f = (threshold - s[i - 1]) / (s[i] - s[i - 1]);
            return Ok(Condensation {
                t_c: t0 + f * (t1 - t0),
                flag: CondensationFlag::Crossed,
            });
        }
    }
    Ok(Condensation {
        t_c: *temperatures.last().expect("non-empty"),
        flag: CondensationFlag::NeverCrossed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensationMap {
    pub sites: Vec<Condensation>,
    /// Largest `T_c` over sites, used to normalize.
    pub t_c_max: f64,
    pub threshold: f64,
}

impl CondensationMap {
    pub fn from_entropy(map: &EntropyMap, threshold: f64) -> Result<Self> {
        let sites = (0..map.n_sites())
            .map(|e| condensation_temperature(&map.temperatures, &map.site_series(e), threshold))
            .collect::<Result<Vec<_>>>()?;
        let t_c_max = sites.iter().map(|c| c.t_c).fold(0.0, f64::max);
        Ok(Self {
            sites,
            t_c_max,
            threshold,
        })
    }

    pub fn normalized(&self) -> Vec<f64> {
        self.sites
            .iter()
            .map(|c| if self.t_c_max > 0.0 { c.t_c / self.t_c_max } else { 0.0 })
            .collect()
    }

    /// Sites whose `T_c` is in the top `fraction` (at least one site).
    pub fn top_sites(&self, fraction: f64) -> Vec<usize> {
        let k = ((self.sites.len() as f64 * fraction).ceil() as usize).clamp(1, self.sites.len());
        let mut idx: Vec<usize> = (0..self.sites.len()).collect();
        idx.sort_by(|&a, &b| self.sites[b].t_c.total_cmp(&self.sites[a].t_c).then(a.cmp(&b)));
        idx.truncate(k);
        idx
    }
}

/// Classification cuts on `S / S_max`.
pub const S_LOW: f64 = 0.15;
pub const S_HIGH: f64 = CONDENSATION_THRESHOLD;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteState {
    Unconstrained,
    InPlay,
    Condensed,
}

pub fn classify_site(s: f64, mean_density: f64) -> SiteState {
    if s < S_LOW {
        SiteState::Condensed
    } else if s > S_HIGH && (mean_density - 0.5).abs() < 0.1 {
        SiteState::Unconstrained
    } else {
        SiteState::InPlay
    }
}

pub fn classify_sites(s: &[f64], mean_density: &[f64]) -> Result<Vec<SiteState>> {
    if s.len() != mean_density.len() {
        return Err(Error::MeshMismatch {
            expected: s.len(),
            actual: mean_density.len(),
        });
    }
    Ok(s.iter().zip(mean_density).map(|(&a, &b)| classify_site(a, b)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolated_crossing() {
        let c = condensation_temperature(&[6.0, 5.0], &[0.9, 0.8], 0.85).unwrap();
        assert!((c.t_c - 5.5).abs() < 1e-12);
        assert_eq!(c.flag, CondensationFlag::Crossed);
    }

    #[test]
    fn never_crossing_is_flagged() {
        let c = condensation_temperature(&[3.0, 2.0, 1.0], &[0.99, 0.9, 0.95], 0.85).unwrap();
        assert_eq!(c.t_c, 1.0);
        assert_eq!(c.flag, CondensationFlag::NeverCrossed);
    }

    #[test]
    fn first_crossing_wins_over_noise() {
        let c = condensation_temperature(&[4.0, 3.0, 2.0, 1.0], &[0.9, 0.8, 0.9, 0.1], 0.85).unwrap();
        assert!((c.t_c - 3.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_ascending() {
        assert!(condensation_temperature(&[1.0, 2.0], &[0.9, 0.8], 0.85).is_err());
        assert!(condensation_temperature(&[1.0], &[0.9], 0.85).is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(classify_site(0.01, 1.0), SiteState::Condensed);
        assert_eq!(classify_site(0.99, 0.5), SiteState::Unconstrained);
        assert_eq!(classify_site(0.5, 0.8), SiteState::InPlay);
        assert_eq!(classify_site(0.95, 0.9), SiteState::InPlay);
    }
}

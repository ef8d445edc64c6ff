use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Central,
    Outlying,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Central => "central",
            Label::Outlying => "outlying",
        }
    }
}

/// Central region of the MS plot, in percent of the observed value ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyBands {
    pub mo_band: (f64, f64),
    pub vo_cap: f64,
}

impl Default for ClassifyBands {
    fn default() -> Self {
        ClassifyBands { mo_band: (25.0, 75.0), vo_cap: 75.0 }
    }
}

impl ClassifyBands {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.mo_band;
        let ok = (0.0..=100.0).contains(&lo) && (0.0..=100.0).contains(&hi) && lo <= hi;
        if !ok || !(0.0..=100.0).contains(&self.vo_cap) {
            return Err(Error::Config(format!(
                "classification bands must be percentages with lo <= hi, got mo_band={:?} vo_cap={}",
                self.mo_band, self.vo_cap
            )));
        }
        Ok(())
    }
}

/// Label each `(mo, vo)` pair.
///
/// Central iff MO lies inside the band and VO is strictly below the cap. A
/// zero VO range passes every point; a zero MO range collapses the band onto
/// the common value.
pub fn classify(points: &[(f64, f64)], bands: &ClassifyBands) -> Vec<Label> {
    if points.len() <= 1 {
        return vec![Label::Central; points.len()];
    }
    let (mo_min, mo_max, vo_min, vo_max) = points.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(mo, vo)| (a.min(mo), b.max(mo), c.min(vo), d.max(vo)),
    );
    let mo_range = mo_max - mo_min;
    let vo_range = vo_max - vo_min;
    let lo = mo_min + bands.mo_band.0 / 100.0 * mo_range;
    let hi = mo_min + bands.mo_band.1 / 100.0 * mo_range;
    let cap = vo_min + bands.vo_cap / 100.0 * vo_range;
    points
        .iter()
        .map(|&(mo, vo)| {
            let mo_ok = mo >= lo && mo <= hi;
            let vo_ok = vo_range == 0.0 || vo < cap;
            if mo_ok && vo_ok {
                Label::Central
            } else {
                Label::Outlying
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    #[test]
    fn band_and_cap() {
        let pts = [(-1.0, 0.0), (0.0, 0.0), (1.0, 0.0), (0.0, 10.0)];
        let got = classify(&pts, &ClassifyBands::default());
        assert_eq!(got, vec![Outlying, Central, Outlying, Outlying]);
    }

    #[test]
    fn degenerate_ranges() {
        assert_eq!(classify(&[(3.0, 1.0)], &ClassifyBands::default()), vec![Central]);
        assert_eq!(classify(&[(2.0, 1.0); 4], &ClassifyBands::default()), vec![Central; 4]);
        assert!(classify(&[], &ClassifyBands::default()).is_empty());
    }

    #[test]
    fn adjustable_band() {
        let pts = [(-1.0, 0.0), (0.0, 0.0), (1.0, 0.0)];
        let wide = ClassifyBands { mo_band: (0.0, 100.0), vo_cap: 75.0 };
        assert_eq!(classify(&pts, &wide), vec![Central; 3]);
        assert!(ClassifyBands { mo_band: (80.0, 20.0), vo_cap: 75.0 }.validate().is_err());
    }
}

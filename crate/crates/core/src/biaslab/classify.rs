//! Map a regression slope to a behavioural-bias label.

use serde::{Deserialize, Serialize};

use super::regression::{Conditioning, RqvRegressionReport};
use crate::impulse::Horizon;
use crate::quotegrid::Side;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasLabel {
    DispositionEffect,
    HouseMoneyOrSelfAttribution,
    RationalOrSymmetric,
    Inconclusive,
}

impl BiasLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            BiasLabel::DispositionEffect => "disposition_effect",
            BiasLabel::HouseMoneyOrSelfAttribution => "house_money_or_self_attribution",
            BiasLabel::RationalOrSymmetric => "rational_or_symmetric",
            BiasLabel::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub significance: f64,
    /// Mean RQV at or above which a flat slope reads as fast, symmetric adjustment.
    pub fast_adjustment_floor: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { significance: 0.05, fast_adjustment_floor: 0.97 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasVerdict {
    pub conditioning: Conditioning,
    pub side: Side,
    pub horizon: Horizon,
    pub slope: f64,
    pub standard_error: f64,
    pub p_value: f64,
    pub mean_rqv: f64,
    pub n_obs: usize,
    pub label: BiasLabel,
}

pub fn label_for(slope: f64, p_value: f64, mean_rqv: f64, cfg: &ClassifierConfig) -> BiasLabel {
    if p_value < cfg.significance && slope < 0.0 {
        BiasLabel::DispositionEffect
    } else if p_value < cfg.significance && slope > 0.0 {
        BiasLabel::HouseMoneyOrSelfAttribution
    } else if p_value >= cfg.significance && mean_rqv >= cfg.fast_adjustment_floor {
        BiasLabel::RationalOrSymmetric
    } else {
        BiasLabel::Inconclusive
    }
}

pub fn classify_bias(report: &RqvRegressionReport, cfg: &ClassifierConfig) -> BiasVerdict {
    BiasVerdict {
        conditioning: report.conditioning,
        side: report.side,
        horizon: report.horizon,
        slope: report.slope.coefficient,
        standard_error: report.slope.std_error,
        p_value: report.slope.p_value,
        mean_rqv: report.mean_rqv,
        n_obs: report.n_obs,
        label: label_for(report.slope.coefficient, report.slope.p_value, report.mean_rqv, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_cases() {
        let c = ClassifierConfig::default();
        assert_eq!(label_for(-0.0332, 0.001, 0.93, &c), BiasLabel::DispositionEffect);
        assert_eq!(label_for(0.0, 0.9, 0.99, &c), BiasLabel::RationalOrSymmetric);
        assert_eq!(label_for(0.05, 0.01, 0.95, &c), BiasLabel::HouseMoneyOrSelfAttribution);
        assert_eq!(label_for(0.01, 0.4, 0.93, &c), BiasLabel::Inconclusive);
        // A zero slope can never be significant in practice; it falls to the floor test.
        assert_eq!(label_for(0.0, 0.01, 0.99, &c), BiasLabel::Inconclusive);
    }

    proptest! {
        #[test]
        fn flipping_a_significant_slope_swaps_labels(slope in 1e-6f64..1.0, p in 0.0f64..0.0499, m in 0.5f64..1.2) {
            let c = ClassifierConfig::default();
            prop_assert_eq!(label_for(slope, p, m, &c), BiasLabel::HouseMoneyOrSelfAttribution);
            prop_assert_eq!(label_for(-slope, p, m, &c), BiasLabel::DispositionEffect);
        }

        #[test]
        fn exactly_one_label(slope in -1.0f64..1.0, p in 0.0f64..1.0, m in 0.5f64..1.2) {
            let c = ClassifierConfig::default();
            let l = label_for(slope, p, m, &c);
            let checks = [
                l == BiasLabel::DispositionEffect && slope < 0.0 && p < 0.05,
                l == BiasLabel::HouseMoneyOrSelfAttribution && slope > 0.0 && p < 0.05,
                l == BiasLabel::RationalOrSymmetric && p >= 0.05 && m >= 0.97,
                l == BiasLabel::Inconclusive,
            ];
            prop_assert_eq!(checks.iter().filter(|&&x| x).count(), 1);
        }
    }
}

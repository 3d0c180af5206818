//! Engle-Granger two-step cointegration: η_t = P_A,t − β₁·P_B,t − β₀.

use std::collections::BTreeMap;

use serde::Serialize;

use super::adf::{adf_test, adf_with_table, AdfResult, Deterministic, LagSpec};
use super::critical::{CriticalTable, SignificanceLevel};
use super::ols::{ols, Design, SeMode};
use super::EstimationError;

pub const MIN_COINT_OBS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EgOptions {
    /// Skip the unit-root check on the level series.
    pub force: bool,
    pub lags: LagSpec,
}

impl Default for EgOptions {
    fn default() -> Self {
        Self { force: false, lags: LagSpec::Auto }
    }
}

impl EgOptions {
    pub fn forced() -> Self {
        Self { force: true, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CointegrationFit {
    pub beta0: f64,
    pub beta1: f64,
    pub beta0_se: f64,
    pub beta1_se: f64,
    #[serde(skip)]
    pub residuals: Vec<f64>,
    pub residual_adf: Option<AdfResult>,
    pub cointegrated: BTreeMap<SignificanceLevel, bool>,
    pub degenerate: Option<String>,
    pub level_adf: Option<[AdfResult; 2]>,
    pub n_obs: usize,
}

impl CointegrationFit {
    pub fn is_cointegrated(&self, level: SignificanceLevel) -> bool {
        self.cointegrated.get(&level).copied().unwrap_or(false)
    }

    pub fn residual_at(&self, pa: f64, pb: f64) -> f64 {
        pa - self.beta1 * pb - self.beta0
    }
}

pub fn engle_granger(
    pa: &[f64],
    pb: &[f64],
    opts: &EgOptions,
) -> Result<CointegrationFit, EstimationError> {
    if pa.len() != pb.len() {
        return Err(EstimationError::LengthMismatch(format!(
            "local {} vs global {}",
            pa.len(),
            pb.len()
        )));
    }
    let n = pa.len();
    if n < MIN_COINT_OBS {
        return Err(EstimationError::InsufficientData { needed: MIN_COINT_OBS, got: n });
    }
    let level_adf = if opts.force {
        None
    } else {
        let a = adf_test(pa, LagSpec::Auto, Deterministic::Constant)?;
        let b = adf_test(pb, LagSpec::Auto, Deterministic::Constant)?;
        for (leg, r) in [("local", &a), ("global", &b)] {
            if r.rejects(SignificanceLevel::Ten) {
                return Err(EstimationError::NotIntegrated {
                    leg: leg.into(),
                    statistic: r.statistic,
                });
            }
        }
        Some([a, b])
    };

    let mut d = Design::with_intercept(n);
    d.push("global_level", pb.to_vec());
    let (beta0, beta1, beta0_se, beta1_se) = match ols(pa, &d, SeMode::Classical) {
        Ok(f) => (
            f.coefficients[0],
            f.coefficients[1],
            f.standard_errors[0],
            f.standard_errors[1],
        ),
        // A constant local leg has nothing to explain; anything else propagates.
        Err(EstimationError::ZeroVarianceRegressand) => {
            return Err(EstimationError::Degenerate("constant local series".into()))
        }
        Err(e) => return Err(e),
    };
    let residuals: Vec<f64> = pa
        .iter()
        .zip(pb)
        .map(|(a, b)| a - beta1 * b - beta0)
        .collect();

    let scale = pa.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let resid_max = residuals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut cointegrated = BTreeMap::new();
    if resid_max <= 1e-9 * scale {
        for level in SignificanceLevel::ALL {
            cointegrated.insert(level, false);
        }
        return Ok(CointegrationFit {
            beta0,
            beta1,
            beta0_se,
            beta1_se,
            residuals,
            residual_adf: None,
            cointegrated,
            degenerate: Some("zero-variance residual".into()),
            level_adf,
            n_obs: n,
        });
    }
    let adf = adf_with_table(
        &residuals,
        opts.lags,
        Deterministic::Constant,
        CriticalTable::EngleGranger2,
    )?;
    for level in SignificanceLevel::ALL {
        cointegrated.insert(level, adf.rejects(level));
    }
    Ok(CointegrationFit {
        beta0,
        beta1,
        beta0_se,
        beta1_se,
        residuals,
        residual_adf: Some(adf),
        cointegrated,
        degenerate: None,
        level_adf,
        n_obs: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn ar1_pair(seed: u64, n: usize, b1: f64, b0: f64, phi: f64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let step = Normal::new(0.0, 50.0).unwrap();
        let shock = Normal::new(0.0, 20.0).unwrap();
        let mut g = 30_000.0;
        let mut eta = 0.0;
        let mut pa = Vec::with_capacity(n);
        let mut pb = Vec::with_capacity(n);
        for _ in 0..n {
            g += step.sample(&mut rng);
            eta = phi * eta + shock.sample(&mut rng);
            pb.push(g);
            pa.push(b0 + b1 * g + eta);
        }
        (pa, pb)
    }

    #[test]
    fn identical_series_are_degenerate() {
        let (_, pb) = ar1_pair(1, 200, 1.0, 0.0, 0.0);
        let f = engle_granger(&pb, &pb, &EgOptions::default()).unwrap();
        assert!((f.beta1 - 1.0).abs() < 1e-12);
        assert!(f.beta0.abs() < 1e-6);
        assert!(f.degenerate.is_some());
        assert!(f.residual_adf.is_none());
        assert!(!f.is_cointegrated(SignificanceLevel::Ten));
    }

    #[test]
    fn recovers_planted_relation() {
        let (pa, pb) = ar1_pair(5, 2000, 1.03, 600.0, 0.9);
        let f = engle_granger(&pa, &pb, &EgOptions::default()).unwrap();
        assert!((f.beta1 - 1.03).abs() < 0.01);
        assert!(f.is_cointegrated(SignificanceLevel::Five));
        for ((a, b), e) in pa.iter().zip(&pb).zip(&f.residuals) {
            assert!((a - f.beta1 * b - f.beta0 - e).abs() <= 1e-9 * a.abs());
        }
    }

    #[test]
    fn constant_global_is_collinear() {
        let (pa, _) = ar1_pair(2, 100, 1.0, 0.0, 0.5);
        let err = engle_granger(&pa, &[5.0; 100], &EgOptions::forced()).unwrap_err();
        assert!(matches!(err, EstimationError::Collinear { .. }), "{err:?}");
    }

    #[test]
    fn short_and_mismatched_inputs() {
        assert!(matches!(
            engle_granger(&[1.0; 10], &[1.0; 10], &EgOptions::default()),
            Err(EstimationError::InsufficientData { .. })
        ));
        assert!(matches!(
            engle_granger(&[1.0; 60], &[1.0; 59], &EgOptions::default()),
            Err(EstimationError::LengthMismatch(_))
        ));
    }

    #[test]
    fn stationary_levels_fail_precheck_unless_forced() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let nrm = Normal::new(0.0, 1.0).unwrap();
        let pb: Vec<f64> = (0..300).map(|_| 100.0 + nrm.sample(&mut rng)).collect();
        let pa: Vec<f64> = pb.iter().map(|v| v + nrm.sample(&mut rng)).collect();
        assert!(matches!(
            engle_granger(&pa, &pb, &EgOptions::default()),
            Err(EstimationError::NotIntegrated { .. })
        ));
        assert!(engle_granger(&pa, &pb, &EgOptions::forced()).is_ok());
    }

    #[test]
    fn scaling_global_rescales_slope() {
        let (pa, pb) = ar1_pair(8, 500, 1.02, 100.0, 0.8);
        let f = engle_granger(&pa, &pb, &EgOptions::default()).unwrap();
        for c in [0.001, 0.5, 33.0, 1e4] {
            let scaled: Vec<f64> = pb.iter().map(|v| v * c).collect();
            let g = engle_granger(&pa, &scaled, &EgOptions::default()).unwrap();
            assert!((g.beta1 * c - f.beta1).abs() <= 1e-9 * f.beta1.abs());
            let amp = pa.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in f.residuals.iter().zip(&g.residuals) {
                assert!((a - b).abs() <= 1e-9 * amp);
            }
        }
    }
}

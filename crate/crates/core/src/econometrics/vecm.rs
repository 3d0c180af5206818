//! Bivariate VECM, one OLS equation per leg:
//! ΔP_t = c + α·η_{t−1} + Σ_k a_k ΔP_A,t−k + Σ_k b_k ΔP_B,t−k + ε_t.

use serde::{Deserialize, Serialize};

use super::coint::CointegrationFit;
use super::ols::{ols, Design, OlsFit, SeMode};
use super::EstimationError;
use crate::quotegrid::{AlignedPair, Side};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn t_stat(&self) -> f64 {
        self.value / self.std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquationFit {
    pub constant: Estimate,
    pub alpha: Estimate,
    /// Coefficients on lagged local differences, lag 1 first.
    pub local_lags: Vec<Estimate>,
    /// Coefficients on lagged global differences, lag 1 first.
    pub global_lags: Vec<Estimate>,
    pub residual_variance: f64,
    pub r_squared: f64,
    pub n_obs: usize,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl EquationFit {
    fn from_ols(fit: OlsFit, p: usize) -> Self {
        let est = |j: usize| Estimate {
            value: fit.coefficients[j],
            std_error: fit.standard_errors[j],
        };
        Self {
            constant: est(0),
            alpha: est(1),
            local_lags: (0..p).map(|k| est(2 + k)).collect(),
            global_lags: (0..p).map(|k| est(2 + p + k)).collect(),
            residual_variance: fit.sigma2(),
            r_squared: fit.r_squared,
            n_obs: fit.n_obs,
            residuals: fit.residuals,
        }
    }

    /// Coefficients in regressor order: constant, alpha, local lags, global lags.
    pub fn coefficient_vector(&self) -> Vec<Estimate> {
        let mut v = vec![self.constant, self.alpha];
        v.extend(&self.local_lags);
        v.extend(&self.global_lags);
        v
    }

    pub fn point(&self) -> EquationCoefficients {
        EquationCoefficients {
            constant: self.constant.value,
            alpha: self.alpha.value,
            local_lags: self.local_lags.iter().map(|e| e.value).collect(),
            global_lags: self.global_lags.iter().map(|e| e.value).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VecmFit {
    pub lag_order: usize,
    pub side: Option<Side>,
    pub local: EquationFit,
    pub global: EquationFit,
    pub coint: CointegrationFit,
    pub se_mode: SeMode,
    /// In-sample mean of the global leg, the default impulse base.
    pub global_mean: f64,
}

impl VecmFit {
    pub fn system(&self) -> VecmSystem {
        VecmSystem {
            beta0: self.coint.beta0,
            beta1: self.coint.beta1,
            local: self.local.point(),
            global: self.global.point(),
        }
    }
}

/// Point coefficients of one equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationCoefficients {
    pub constant: f64,
    pub alpha: f64,
    pub local_lags: Vec<f64>,
    pub global_lags: Vec<f64>,
}

impl EquationCoefficients {
    pub fn zeros(p: usize) -> Self {
        Self {
            constant: 0.0,
            alpha: 0.0,
            local_lags: vec![0.0; p],
            global_lags: vec![0.0; p],
        }
    }

    /// Expected difference given η_{t−1} and lagged differences (lag 1 first).
    pub fn predict(&self, eta_prev: f64, local_diffs: &[f64], global_diffs: &[f64], with_constant: bool) -> f64 {
        let mut v = self.alpha * eta_prev;
        if with_constant {
            v += self.constant;
        }
        for (c, d) in self.local_lags.iter().zip(local_diffs) {
            v += c * d;
        }
        for (c, d) in self.global_lags.iter().zip(global_diffs) {
            v += c * d;
        }
        v
    }

    fn named(&self, eq: &str) -> Vec<(String, f64)> {
        let mut v = vec![
            (format!("{eq}.constant"), self.constant),
            (format!("{eq}.alpha"), self.alpha),
        ];
        for (k, c) in self.local_lags.iter().enumerate() {
            v.push((format!("{eq}.local_lag{}", k + 1), *c));
        }
        for (k, c) in self.global_lags.iter().enumerate() {
            v.push((format!("{eq}.global_lag{}", k + 1), *c));
        }
        v
    }
}

/// A fully specified VECM, either estimated or written by hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VecmSystem {
    pub beta0: f64,
    pub beta1: f64,
    pub local: EquationCoefficients,
    pub global: EquationCoefficients,
}

impl VecmSystem {
    pub fn lag_order(&self) -> usize {
        self.local.local_lags.len()
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        let p = self.lag_order();
        let ok = [&self.local, &self.global]
            .iter()
            .all(|e| e.local_lags.len() == p && e.global_lags.len() == p);
        if !ok {
            return Err(EstimationError::InvalidArgument(
                "lag vectors must share one length".into(),
            ));
        }
        let all = self.named_coefficients();
        if !(self.beta0.is_finite() && self.beta1.is_finite()) || all.iter().any(|(_, v)| !v.is_finite()) {
            return Err(EstimationError::NonFinite);
        }
        Ok(())
    }

    /// Every coefficient with a dotted name, local equation first.
    pub fn named_coefficients(&self) -> Vec<(String, f64)> {
        let mut v = self.local.named("local");
        v.extend(self.global.named("global"));
        v
    }
}

/// Estimate the VECM for one side of a contiguous aligned pair.
pub fn estimate_vecm(
    pair: &AlignedPair,
    side: Side,
    p: usize,
    coint: &CointegrationFit,
    se_mode: SeMode,
) -> Result<VecmFit, EstimationError> {
    let gaps = pair.contiguous_segments().len().saturating_sub(1);
    if gaps > 0 {
        return Err(EstimationError::GapInWindow(gaps));
    }
    let mut fit = estimate_vecm_levels(
        &pair.local_quotes(side),
        &pair.global_quotes(side),
        p,
        coint,
        se_mode,
    )?;
    fit.side = Some(side);
    Ok(fit)
}

/// Estimate the VECM on raw level series sharing one gap-free grid.
pub fn estimate_vecm_levels(
    pa: &[f64],
    pb: &[f64],
    p: usize,
    coint: &CointegrationFit,
    se_mode: SeMode,
) -> Result<VecmFit, EstimationError> {
    if p == 0 {
        return Err(EstimationError::InvalidArgument("lag order must be at least 1".into()));
    }
    let (da, db, design) = vecm_design(pa, pb, p, coint, p)?;
    let local = ols(&da, &design, se_mode)?;
    let global = ols(&db, &design, se_mode)?;
    Ok(VecmFit {
        lag_order: p,
        side: None,
        local: EquationFit::from_ols(local, p),
        global: EquationFit::from_ols(global, p),
        coint: coint.clone(),
        se_mode,
        global_mean: pb.iter().sum::<f64>() / pb.len() as f64,
    })
}

/// Regressands and shared design using rows t = start+1 .. n−1.
fn vecm_design(
    pa: &[f64],
    pb: &[f64],
    p: usize,
    coint: &CointegrationFit,
    start: usize,
) -> Result<(Vec<f64>, Vec<f64>, Design), EstimationError> {
    let n = pa.len();
    if pb.len() != n || coint.residuals.len() != n {
        return Err(EstimationError::LengthMismatch(format!(
            "local {}, global {}, residuals {}",
            n,
            pb.len(),
            coint.residuals.len()
        )));
    }
    if n <= 2 * p + 20 {
        return Err(EstimationError::InsufficientData { needed: 2 * p + 21, got: n });
    }
    let rows = (start + 1)..n;
    let da: Vec<f64> = rows.clone().map(|t| pa[t] - pa[t - 1]).collect();
    let db: Vec<f64> = rows.clone().map(|t| pb[t] - pb[t - 1]).collect();
    let mut d = Design::with_intercept(da.len());
    d.push("ec_lag1", rows.clone().map(|t| coint.residuals[t - 1]).collect());
    for k in 1..=p {
        d.push(
            format!("local_diff_lag{k}"),
            rows.clone().map(|t| pa[t - k] - pa[t - k - 1]).collect(),
        );
    }
    for k in 1..=p {
        d.push(
            format!("global_diff_lag{k}"),
            rows.clone().map(|t| pb[t - k] - pb[t - k - 1]).collect(),
        );
    }
    Ok((da, db, d))
}

/// Lag order in `1..=max_p` minimizing the system BIC on a common sample.
pub fn select_lag_order_bic(
    pa: &[f64],
    pb: &[f64],
    coint: &CointegrationFit,
    max_p: usize,
) -> Result<usize, EstimationError> {
    if max_p == 0 {
        return Err(EstimationError::InvalidArgument("max lag order must be at least 1".into()));
    }
    let mut best: Option<(f64, usize)> = None;
    for p in 1..=max_p {
        let (da, db, d) = vecm_design(pa, pb, p, coint, max_p)?;
        let a = ols(&da, &d, SeMode::Classical)?;
        let b = ols(&db, &d, SeMode::Classical)?;
        let m = da.len() as f64;
        let s11 = a.residuals.iter().map(|e| e * e).sum::<f64>() / m;
        let s22 = b.residuals.iter().map(|e| e * e).sum::<f64>() / m;
        let s12 = a.residuals.iter().zip(&b.residuals).map(|(x, y)| x * y).sum::<f64>() / m;
        let det = s11 * s22 - s12 * s12;
        let bic = m * det.ln() + 2.0 * d.n_cols() as f64 * m.ln();
        if best.is_none_or(|(v, _)| bic < v) {
            best = Some((bic, p));
        }
    }
    Ok(best.expect("nonempty range").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econometrics::{engle_granger, EgOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Simulate the system directly from its difference equations.
    fn simulate(sys: &VecmSystem, n: usize, seed: u64, sa: f64, sb: f64) -> (Vec<f64>, Vec<f64>) {
        let p = sys.lag_order();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ea = Normal::new(0.0, sa).unwrap();
        let eb = Normal::new(0.0, sb).unwrap();
        let mut pa = vec![sys.beta0 + sys.beta1 * 10_000.0; p + 1];
        let mut pb = vec![10_000.0; p + 1];
        while pa.len() < n {
            let t = pa.len();
            let eta = pa[t - 1] - sys.beta1 * pb[t - 1] - sys.beta0;
            let la: Vec<f64> = (1..=p).map(|k| pa[t - k] - pa[t - k - 1]).collect();
            let lb: Vec<f64> = (1..=p).map(|k| pb[t - k] - pb[t - k - 1]).collect();
            let a = pa[t - 1] + sys.local.predict(eta, &la, &lb, true) + ea.sample(&mut rng);
            let b = pb[t - 1] + sys.global.predict(eta, &la, &lb, true) + eb.sample(&mut rng);
            pa.push(a);
            pb.push(b);
        }
        (pa, pb)
    }

    fn truth() -> VecmSystem {
        VecmSystem {
            beta0: 0.0,
            beta1: 1.02,
            local: EquationCoefficients {
                constant: 0.0,
                alpha: -0.05,
                local_lags: vec![-0.2, -0.1, 0.05],
                global_lags: vec![0.3, 0.1, 0.05],
            },
            global: EquationCoefficients::zeros(3),
        }
    }

    #[test]
    fn layout_has_two_plus_two_p_coefficients() {
        let sys = truth();
        let (pa, pb) = simulate(&sys, 2000, 4, 10.0, 20.0);
        let coint = engle_granger(&pa, &pb, &EgOptions::forced()).unwrap();
        let fit = estimate_vecm_levels(&pa, &pb, 3, &coint, SeMode::Classical).unwrap();
        assert_eq!(fit.local.coefficient_vector().len(), 8);
        assert_eq!(fit.global.coefficient_vector().len(), 8);
        assert_eq!(fit.local.n_obs, 2000 - 4);
        let m = fit.local.residuals.iter().sum::<f64>() / fit.local.n_obs as f64;
        assert!(m.abs() < 1e-8 * fit.local.residual_variance.sqrt());
        assert!((fit.local.alpha.value + 0.05).abs() < 4.0 * fit.local.alpha.std_error);
        assert_eq!(fit.system().named_coefficients().len(), 16);
    }

    #[test]
    fn equilibrium_without_noise_has_no_variation() {
        let pa = vec![100.0; 60];
        let pb = vec![100.0; 60];
        let coint = CointegrationFit {
            beta0: 0.0,
            beta1: 1.0,
            beta0_se: 0.0,
            beta1_se: 0.0,
            residuals: vec![0.0; 60],
            residual_adf: None,
            cointegrated: Default::default(),
            degenerate: Some("zero-variance residual".into()),
            level_adf: None,
            n_obs: 60,
        };
        assert!(matches!(
            estimate_vecm_levels(&pa, &pb, 3, &coint, SeMode::Classical),
            Err(EstimationError::ZeroVarianceRegressand)
        ));
    }

    #[test]
    fn too_short_is_rejected() {
        let (pa, pb) = simulate(&truth(), 100, 1, 10.0, 20.0);
        let mut coint = engle_granger(&pa, &pb, &EgOptions::forced()).unwrap();
        assert!(matches!(
            estimate_vecm_levels(&pa[..26], &pb[..26], 3, &coint, SeMode::Classical),
            Err(EstimationError::LengthMismatch(_))
        ));
        coint.residuals.truncate(26);
        assert!(matches!(
            estimate_vecm_levels(&pa[..26], &pb[..26], 3, &coint, SeMode::Classical),
            Err(EstimationError::InsufficientData { needed: 27, got: 26 })
        ));
    }

    #[test]
    fn bic_picks_a_small_order_for_true_p1() {
        let mut sys = truth();
        sys.local.local_lags = vec![-0.3];
        sys.local.global_lags = vec![0.4];
        sys.global = EquationCoefficients::zeros(1);
        let (pa, pb) = simulate(&sys, 4000, 12, 10.0, 20.0);
        let coint = engle_granger(&pa, &pb, &EgOptions::forced()).unwrap();
        let p = select_lag_order_bic(&pa, &pb, &coint, 6).unwrap();
        assert!(p <= 2, "picked {p}");
    }

    #[test]
    fn system_validation() {
        let mut sys = truth();
        assert!(sys.validate().is_ok());
        sys.global.local_lags.pop();
        assert!(sys.validate().is_err());
    }
}

//! Least squares through a Householder QR of the column-equilibrated design.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::EstimationError;

/// Pivot tolerance on the equilibrated R diagonal.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// Largest accepted condition number of the equilibrated design.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeMode {
    #[default]
    Classical,
    Hc1,
}

/// Named regressor columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Design {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Design {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_intercept(n: usize) -> Self {
        let mut d = Self::new();
        d.push("constant", vec![1.0; n]);
        d
    }

    pub fn push(&mut self, name: impl Into<String>, column: Vec<f64>) -> &mut Self {
        self.names.push(name.into());
        self.columns.push(column);
        self
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn n_obs(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn without(&self, j: usize) -> Design {
        let mut d = self.clone();
        d.names.remove(j);
        d.columns.remove(j);
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
    pub r_squared: f64,
    pub n_obs: usize,
    pub dof: usize,
    pub ssr: f64,
    pub se_mode: SeMode,
}

impl OlsFit {
    pub fn sigma2(&self) -> f64 {
        self.ssr / self.dof as f64
    }

    pub fn t_stats(&self) -> Vec<f64> {
        self.coefficients
            .iter()
            .zip(&self.standard_errors)
            .map(|(b, s)| b / s)
            .collect()
    }

    /// Two-sided p-values from Student's t with `dof` degrees of freedom.
    pub fn p_values(&self) -> Vec<f64> {
        self.t_stats()
            .into_iter()
            .map(|t| two_sided_p(t, self.dof as f64))
            .collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// (coefficient, standard error) for a named regressor.
    pub fn coef(&self, name: &str) -> Option<(f64, f64)> {
        self.index_of(name)
            .map(|j| (self.coefficients[j], self.standard_errors[j]))
    }
}

/// One row of a coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub name: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

impl OlsFit {
    pub fn row(&self, name: &str) -> Option<CoefficientRow> {
        let j = self.index_of(name)?;
        let t = self.coefficients[j] / self.standard_errors[j];
        Some(CoefficientRow {
            name: name.to_string(),
            coefficient: self.coefficients[j],
            std_error: self.standard_errors[j],
            t_stat: t,
            p_value: two_sided_p(t, self.dof as f64),
        })
    }

    pub fn rows(&self) -> Vec<CoefficientRow> {
        self.names.iter().filter_map(|n| self.row(n)).collect()
    }
}

pub fn two_sided_p(t: f64, dof: f64) -> f64 {
    if !t.is_finite() {
        return if t.is_nan() { f64::NAN } else { 0.0 };
    }
    let dist = StudentsT::new(0.0, 1.0, dof).expect("positive dof");
    2.0 * dist.cdf(-t.abs())
}

/// Ordinary least squares of `y` on the columns of `x`.
pub fn ols(y: &[f64], x: &Design, se_mode: SeMode) -> Result<OlsFit, EstimationError> {
    let n = y.len();
    let k = x.n_cols();
    if k == 0 || x.columns.iter().any(|c| c.len() != n) {
        return Err(EstimationError::LengthMismatch(format!(
            "{} observations vs design of {} rows",
            n,
            x.n_obs()
        )));
    }
    if n <= k {
        return Err(EstimationError::InsufficientData {
            needed: k + 1,
            got: n,
        });
    }
    if y.iter().chain(x.columns.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(EstimationError::NonFinite);
    }
    let (ymin, ymax) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if ymax == ymin {
        return Err(EstimationError::ZeroVarianceRegressand);
    }

    // Equilibrate columns to unit norm.
    let mut scale = vec![0.0; k];
    let mut a: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (j, col) in x.columns.iter().enumerate() {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(EstimationError::Collinear {
                column: x.names[j].clone(),
                with: vec![],
            });
        }
        scale[j] = norm;
        a.push(col.iter().map(|v| v / norm).collect());
    }

    let mut qty = y.to_vec();
    householder_qr(&mut a, &mut qty);
    let r = |i: usize, j: usize| a[j][i];

    for j in 0..k {
        if r(j, j).abs() < RANK_TOLERANCE {
            return Err(EstimationError::Collinear {
                column: x.names[j].clone(),
                with: collinear_partners(&a, j, &x.names),
            });
        }
    }

    let rmat = DMatrix::from_fn(k, k, |i, j| if i <= j { r(i, j) } else { 0.0 });
    let sv = rmat.clone().svd(false, true);
    let (smax, smin) = sv
        .singular_values
        .iter()
        .fold((0.0f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
    let condition = smax / smin;
    if condition > MAX_CONDITION {
        let v_t = sv.v_t.expect("requested");
        let (imin, _) = sv
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let columns = (0..k)
            .filter(|&j| v_t[(imin, j)].abs() > 0.1)
            .map(|j| x.names[j].clone())
            .collect();
        return Err(EstimationError::IllConditioned { condition, columns });
    }

    // Back-substitution R b = Q'y, then undo the equilibration.
    let mut b_scaled = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = ((i + 1)..k).map(|j| r(i, j) * b_scaled[j]).sum();
        b_scaled[i] = (qty[i] - s) / r(i, i);
    }
    let coefficients: Vec<f64> = b_scaled.iter().zip(&scale).map(|(b, s)| b / s).collect();

    let residuals: Vec<f64> = (0..n)
        .map(|i| y[i] - (0..k).map(|j| x.columns[j][i] * coefficients[j]).sum::<f64>())
        .collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let dof = n - k;

    // (A'A)^-1 = R^-1 R^-T on the equilibrated scale.
    let rinv = upper_inverse(&a, k);
    let mut ata_inv = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let v: f64 = (j..k).map(|m| rinv[i][m] * rinv[j][m]).sum();
            ata_inv[i][j] = v;
            ata_inv[j][i] = v;
        }
    }

    let variances: Vec<f64> = match se_mode {
        SeMode::Classical => {
            let s2 = ssr / dof as f64;
            (0..k).map(|j| s2 * ata_inv[j][j]).collect()
        }
        SeMode::Hc1 => {
            let mut meat = vec![vec![0.0; k]; k];
            for (i, e) in residuals.iter().enumerate() {
                let e2 = e * e;
                for p in 0..k {
                    let xp = x.columns[p][i] / scale[p];
                    for q in p..k {
                        meat[p][q] += e2 * xp * x.columns[q][i] / scale[q];
                    }
                }
            }
            for p in 0..k {
                for q in 0..p {
                    meat[p][q] = meat[q][p];
                }
            }
            let adj = n as f64 / dof as f64;
            (0..k)
                .map(|j| {
                    let row: Vec<f64> = (0..k)
                        .map(|q| (0..k).map(|p| ata_inv[j][p] * meat[p][q]).sum())
                        .collect();
                    adj * (0..k).map(|q| row[q] * ata_inv[q][j]).sum::<f64>()
                })
                .collect()
        }
    };
    let standard_errors = variances
        .iter()
        .zip(&scale)
        .map(|(v, s)| v.max(0.0).sqrt() / s)
        .collect();

    Ok(OlsFit {
        names: x.names.clone(),
        coefficients,
        standard_errors,
        residuals,
        r_squared: 1.0 - ssr / sst,
        n_obs: n,
        dof,
        ssr,
        se_mode,
    })
}

/// In-place Householder QR of column-major `a` (n x k); `rhs` becomes Q'rhs.
/// On return the upper triangle of `a` holds R.
fn householder_qr(a: &mut [Vec<f64>], rhs: &mut [f64]) {
    let k = a.len();
    let n = rhs.len();
    for j in 0..k {
        let norm = a[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let reflect = |col: &mut [f64]| {
            let dot: f64 = v.iter().zip(&col[j..]).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, vi) in col[j..].iter_mut().zip(&v) {
                *c -= f * vi;
            }
        };
        for col in a.iter_mut().skip(j + 1) {
            reflect(col);
        }
        reflect(rhs);
        a[j][j] = alpha;
        for i in (j + 1)..n {
            a[j][i] = 0.0;
        }
    }
}

fn upper_inverse(a: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let r = |i: usize, j: usize| a[j][i];
    let mut inv = vec![vec![0.0; k]; k];
    for c in 0..k {
        inv[c][c] = 1.0 / r(c, c);
        for i in (0..c).rev() {
            let s: f64 = ((i + 1)..=c).map(|m| r(i, m) * inv[m][c]).sum();
            inv[i][c] = -s / r(i, i);
        }
    }
    inv
}

/// Earlier columns that column `j` is (nearly) a combination of.
fn collinear_partners(a: &[Vec<f64>], j: usize, names: &[String]) -> Vec<String> {
    let r = |i: usize, c: usize| a[c][i];
    let mut coef = vec![0.0; j];
    for i in (0..j).rev() {
        if r(i, i).abs() < RANK_TOLERANCE {
            continue;
        }
        let s: f64 = ((i + 1)..j).map(|m| r(i, m) * coef[m]).sum();
        coef[i] = (r(i, j) - s) / r(i, i);
    }
    let biggest = coef.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    coef.iter()
        .enumerate()
        .filter(|(_, c)| biggest > 0.0 && c.abs() > 1e-6 * biggest)
        .map(|(i, _)| names[i].clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn exact_fit_through_origin() {
        let mut d = Design::new();
        d.push("x", vec![1.0, 2.0, 3.0]);
        let f = ols(&[1.0, 2.0, 3.0], &d, SeMode::Classical).unwrap();
        assert!((f.coefficients[0] - 1.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
        assert!(f.residuals.iter().all(|e| e.abs() < 1e-14));
    }

    #[test]
    fn intercept_only_gives_mean() {
        let y = [3.0, 5.0, 10.0, 2.0];
        let f = ols(&y, &Design::with_intercept(4), SeMode::Classical).unwrap();
        assert!((f.coefficients[0] - 5.0).abs() < 1e-12);
        assert!(f.r_squared.abs() < 1e-12);
    }

    #[test]
    fn errors_name_collinear_columns() {
        let mut d = Design::with_intercept(6);
        d.push("a", vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        d.push("b", vec![2.0, 4.0, 6.0, 8.0, 10.0, 12.0]);
        let y = [1.0, 3.0, 2.0, 5.0, 4.0, 6.0];
        match ols(&y, &d, SeMode::Classical) {
            Err(EstimationError::Collinear { column, with }) => {
                assert_eq!(column, "b");
                assert_eq!(with, vec!["a".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
        let mut short = Design::with_intercept(2);
        short.push("a", vec![1.0, 2.0]);
        assert!(matches!(
            ols(&[1.0, 2.0], &short, SeMode::Classical),
            Err(EstimationError::InsufficientData { .. })
        ));
        assert!(matches!(
            ols(&[1.0; 6], &Design::with_intercept(6), SeMode::Classical),
            Err(EstimationError::ZeroVarianceRegressand)
        ));
    }

    #[test]
    fn near_collinear_trips_condition_guard() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..50).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 1e-13 * (v * 7.0).sin()).collect();
        let mut d = Design::with_intercept(50);
        d.push("a", a);
        d.push("b", b);
        let y: Vec<f64> = (0..50).map(|i| i as f64).collect();
        match ols(&y, &d, SeMode::Classical) {
            Err(EstimationError::IllConditioned { columns, .. })
            | Err(EstimationError::Collinear { with: columns, .. }) => {
                assert!(columns.contains(&"a".to_string()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hc1_matches_sandwich_on_small_case() {
        // y = 1 + 2x with heteroskedastic noise; compare to a direct sandwich.
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [3.1, 4.8, 7.3, 8.6, 11.9, 12.2];
        let mut d = Design::with_intercept(6);
        d.push("x", x.to_vec());
        let f = ols(&y, &d, SeMode::Hc1).unwrap();
        let n = 6.0;
        let sx: f64 = x.iter().sum();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let det = n * sxx - sx * sx;
        let inv = [[sxx / det, -sx / det], [-sx / det, n / det]];
        let mut meat = [[0.0; 2]; 2];
        for (xi, e) in x.iter().zip(&f.residuals) {
            let row = [1.0, *xi];
            for p in 0..2 {
                for q in 0..2 {
                    meat[p][q] += e * e * row[p] * row[q];
                }
            }
        }
        for j in 0..2 {
            let mut v = 0.0;
            for p in 0..2 {
                for q in 0..2 {
                    v += inv[j][p] * meat[p][q] * inv[q][j];
                }
            }
            let se = (v * n / (n - 2.0)).sqrt();
            assert!((se - f.standard_errors[j]).abs() < 1e-10 * se);
        }
    }

    #[test]
    fn p_value_of_zero_t_is_one() {
        assert!((two_sided_p(0.0, 10.0) - 1.0).abs() < 1e-12);
        assert!(two_sided_p(10.0, 100.0) < 1e-10);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn system(seed: u64, n: usize, k: usize) -> (Vec<f64>, Design) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut d = Design::with_intercept(n);
            for j in 0..k {
                d.push(
                    format!("x{j}"),
                    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
                );
            }
            let y = (0..n)
                .map(|i| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    (1..=k).map(|j| d.column(j)[i] * j as f64).sum::<f64>() + e
                })
                .collect();
            (y, d)
        }

        proptest! {
            #[test]
            fn residuals_orthogonal_and_r2_bounded(seed in 0u64..10_000, n in 20usize..80, k in 1usize..5) {
                let (y, d) = system(seed, n, k);
                let f = ols(&y, &d, SeMode::Classical).unwrap();
                prop_assert!((0.0..=1.0).contains(&f.r_squared));
                let ysd = (y.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
                for j in 0..d.n_cols() {
                    let c = d.column(j);
                    let csd = (c.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
                    let ip: f64 = c.iter().zip(&f.residuals).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                    prop_assert!((ip / (csd * ysd)).abs() < 1e-8);
                }
                let mean_e = f.residuals.iter().sum::<f64>() / n as f64;
                prop_assert!(mean_e.abs() / ysd < 1e-8);
            }

            #[test]
            fn dropping_a_regressor_never_raises_r2(seed in 0u64..10_000, n in 20usize..80, k in 2usize..5, drop in 1usize..5) {
                let (y, d) = system(seed, n, k);
                let drop = 1 + (drop - 1) % k;
                let full = ols(&y, &d, SeMode::Classical).unwrap();
                let reduced = ols(&y, &d.without(drop), SeMode::Classical).unwrap();
                prop_assert!(reduced.r_squared <= full.r_squared + 1e-12);
            }
        }
    }
}

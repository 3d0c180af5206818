//! Monte-Carlo check of the embedded response-surface critical values.

use quotelag_core::econometrics::{
    adf_test, critical_value, engle_granger, CriticalTable, Deterministic, EgOptions, LagSpec, SignificanceLevel,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

const N: usize = 500;
const REPS: u64 = 6000;

fn walk(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut s = 0.0;
    (0..N)
        .map(|_| {
            let e: f64 = StandardNormal.sample(rng);
            s += e;
            s
        })
        .collect()
}

fn quantile(mut v: Vec<f64>, q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    v[((v.len() as f64) * q) as usize]
}

fn check(table: CriticalTable, stats: Vec<f64>, t: usize) {
    for level in SignificanceLevel::ALL {
        let empirical = quantile(stats.clone(), level.fraction());
        let embedded = critical_value(table, level, t);
        assert!(
            (empirical - embedded).abs() < 0.07,
            "{table:?} {level}: simulated {empirical:.4} vs embedded {embedded:.4}"
        );
    }
}

#[test]
fn adf_tables_match_simulation() {
    for (det, table, seed) in [
        (Deterministic::None, CriticalTable::AdfNone, 1u64),
        (Deterministic::Constant, CriticalTable::AdfConstant, 2),
        (Deterministic::ConstantTrend, CriticalTable::AdfConstantTrend, 3),
    ] {
        let stats: Vec<f64> = (0..REPS)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed * 1_000_000 + r);
                adf_test(&walk(&mut rng), LagSpec::Fixed(0), det).unwrap().statistic
            })
            .collect();
        check(table, stats, N - 1);
    }
}

#[test]
fn engle_granger_table_matches_simulation() {
    let opts = EgOptions { force: true, lags: LagSpec::Fixed(0) };
    let stats: Vec<f64> = (0..REPS)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(9_000_000 + r);
            let a = walk(&mut rng);
            let b = walk(&mut rng);
            engle_granger(&a, &b, &opts).unwrap().residual_adf.unwrap().statistic
        })
        .collect();
    check(CriticalTable::EngleGranger2, stats, N - 1);
}

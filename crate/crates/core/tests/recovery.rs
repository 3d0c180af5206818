use quotelag_core::econometrics::{engle_granger, estimate_vecm, EgOptions, SeMode, SignificanceLevel};
use quotelag_core::microstructure::{rogers_satchell, window_volatility};
use quotelag_core::quotegrid::Side;
use quotelag_core::synth::{gen_cointegrated_pair, gen_gbm_bars, GbmSpec, SynthSpec};

#[test]
fn vecm_recovers_synthetic_truth() {
    let mut hits = 0;
    for seed in 0..100 {
        let spec = SynthSpec { seed, ..SynthSpec::default() };
        let ds = gen_cointegrated_pair(&spec).unwrap();
        let pa = ds.pair.local_quotes(Side::Bid);
        let pb = ds.pair.global_quotes(Side::Bid);
        // A 10% level check rejects one true walk in ten; skip it here.
        let coint = engle_granger(&pa, &pb, &EgOptions::forced()).unwrap();
        assert!(coint.is_cointegrated(SignificanceLevel::Five));
        let fit = estimate_vecm(&ds.pair, Side::Bid, 3, &coint, SeMode::Classical).unwrap();
        if (coint.beta1 - 1.02).abs() < 0.02 && (fit.local.alpha.value + 0.05).abs() < 0.02 {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn absent_cross_lags_are_not_found() {
    let mut quiet = 0;
    let total = 20;
    for seed in 100..100 + total {
        let mut spec = SynthSpec { seed, n_bars: 3000, ..SynthSpec::default() };
        spec.local.global_lags = vec![0.0; 3];
        let ds = gen_cointegrated_pair(&spec).unwrap();
        let pa = ds.pair.local_quotes(Side::Offer);
        let pb = ds.pair.global_quotes(Side::Offer);
        let coint = engle_granger(&pa, &pb, &EgOptions::forced()).unwrap();
        let fit = estimate_vecm(&ds.pair, Side::Offer, 3, &coint, SeMode::Classical).unwrap();
        if fit.local.global_lags.iter().all(|d| d.t_stat().abs() < 3.0) {
            quiet += 1;
        }
    }
    assert!(quiet >= 19, "{quiet}/{total}");
}

#[test]
fn planted_relation_with_ar1_error() {
    // β₁ = 1.03, β₀ = 600 and an AR(0.9) gap, built from the generator.
    let mut spec = SynthSpec { seed: 5, n_bars: 2000, beta1: 1.03, beta0: 600.0, ..SynthSpec::default() };
    spec.local.alpha = -0.1;
    spec.local.local_lags = vec![0.0; 3];
    spec.local.global_lags = vec![1.03, 0.0, 0.0];
    let ds = gen_cointegrated_pair(&spec).unwrap();
    let coint = engle_granger(&ds.local_mid, &ds.global_mid, &EgOptions::forced()).unwrap();
    assert!((coint.beta1 - 1.03).abs() < 0.01);
    assert!(coint.is_cointegrated(SignificanceLevel::Five));
}

#[test]
fn rogers_satchell_tracks_gbm_variance() {
    let spec = GbmSpec { seed: 3, n_bars: 10_000, ..GbmSpec::default() };
    let bars = gen_gbm_bars(&spec).unwrap();
    let mean = bars.iter().map(|b| rogers_satchell(b).unwrap()).sum::<f64>() / bars.len() as f64;
    let truth = spec.sigma_per_bar * spec.sigma_per_bar;
    assert!((mean / truth - 1.0).abs() < 0.10, "{mean} vs {truth}");
}

#[test]
fn weekly_volatility_tracks_gbm() {
    let mut within = 0;
    for seed in 0..100 {
        let spec = GbmSpec { seed, n_bars: 336, substeps: 100, ..GbmSpec::default() };
        let bars = gen_gbm_bars(&spec).unwrap();
        let vol = window_volatility(&bars).unwrap();
        let truth = spec.sigma_per_bar * (336f64).sqrt();
        if (vol / truth - 1.0).abs() < 0.15 {
            within += 1;
        }
    }
    assert!(within >= 95, "{within}/100");
}

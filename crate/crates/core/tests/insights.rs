use fedfps::insights::{
    build_report, country_mean_floors, floors_from_pairs, macro_fit, ols_with_intercept, studentized_range_quantile,
    tukey_hsd, InsightsConfig,
};
use fedfps::pipeline::{prep, PrepConfig};
use fedfps::special::{f_cdf, t_cdf, t_two_sided_p};
use fedfps::synthgen::{generate, GeneratorConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Normal, StandardNormal};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

#[test]
fn f_and_t_match_statrs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let d1 = rng.random_range(1.0..30.0);
        let d2 = rng.random_range(1.0..60.0);
        let x = rng.random_range(0.01..8.0);
        let want = FisherSnedecor::new(d1, d2).unwrap().cdf(x);
        assert!((f_cdf(x, d1, d2) - want).abs() < 1e-9, "F({d1},{d2}) at {x}");
        let nu = rng.random_range(1.0..50.0);
        let t = rng.random_range(-6.0..6.0);
        let want = StudentsT::new(0.0, 1.0, nu).unwrap().cdf(t);
        assert!((t_cdf(t, nu) - want).abs() < 1e-9, "t({nu}) at {t}");
    }
}

#[test]
fn critical_value_matches_simulation() {
    let (k, df) = (3usize, 10.0f64);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let chi = ChiSquared::new(df).unwrap();
    let mut qs: Vec<f64> = (0..200_000)
        .map(|_| {
            let z: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
            let range = z.iter().cloned().fold(f64::MIN, f64::max) - z.iter().cloned().fold(f64::MAX, f64::min);
            range / (chi.sample(&mut rng) / df).sqrt()
        })
        .collect();
    qs.sort_by(f64::total_cmp);
    let simulated = qs[(0.95 * qs.len() as f64) as usize];
    let q = studentized_range_quantile(0.95, k, df).unwrap();
    assert!((q - 3.88).abs() < 0.02 && (q - simulated).abs() < 0.03, "{q} vs {simulated}");
}

#[test]
fn outlying_group_is_singled_out() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let group = |mean: f64, rng: &mut ChaCha8Rng| (0..15).map(|_| mean + noise.sample(rng)).collect::<Vec<f64>>();
    let groups = vec![group(10.0, &mut rng), group(10.0, &mut rng), group(14.0, &mut rng)];
    let r = tukey_hsd(&groups, 0.05).unwrap();
    let flags: Vec<(usize, usize, bool)> = r.pairs.iter().map(|p| (p.group_a, p.group_b, p.reject)).collect();
    assert_eq!(flags, vec![(0, 1, false), (0, 2, true), (1, 2, true)]);
    for p in &r.pairs {
        assert!((0.0..=1.0).contains(&p.p_adj));
        assert!(p.lower <= p.diff && p.diff <= p.upper);
    }
}

#[test]
fn ols_p_values_follow_t() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random_range(0.0..10.0), rng.random_range(-1.0..1.0)]).collect();
    let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0] + rng.random_range(-2.0..2.0)).collect();
    let r = ols_with_intercept(&["a", "b"], &x, &y).unwrap();
    for i in 0..3 {
        assert!((r.p[i] - t_two_sided_p(r.t[i], 37.0)).abs() < 1e-15);
        assert!(r.lower[i] <= r.coef[i] && r.coef[i] <= r.upper[i]);
    }
    assert!(r.p[0] < 1e-10);
    assert_eq!(r.names, ["a", "b", "intercept"]);
}

#[test]
fn macro_signs_on_noisy_synthetic_data() {
    for seed in 0..3 {
        let cfg = GeneratorConfig { seed, n_players: 3000, macro_weight: 1.0, ..GeneratorConfig::default() };
        let data = generate(&cfg).unwrap();
        let prepared = prep(data.sessions, &data.players, &data.games, &PrepConfig::default()).unwrap();
        let obs = floors_from_pairs(&prepared.pairs).unwrap();
        let fit = macro_fit(&data.countries, &country_mean_floors(&obs, &data.players)).unwrap();
        assert!(fit.coef_of("log10_gdp").unwrap() > 0.0, "seed {seed}: {:?}", fit.coef);
        assert!(fit.coef_of("gini").unwrap() < 0.0, "seed {seed}: {:?}", fit.coef);
    }
}

#[test]
fn report_tables_on_generated_data() {
    let data = generate(&GeneratorConfig { seed: 8, n_players: 300, n_games: 20, ..GeneratorConfig::default() }).unwrap();
    let prepared = prep(data.sessions, &data.players, &data.games, &PrepConfig::default()).unwrap();
    let obs = floors_from_pairs(&prepared.pairs).unwrap();
    let r = build_report(&obs, &data.players, &data.games, &data.countries, &InsightsConfig::default()).unwrap();
    let gpu = r.anova.iter().find(|a| a.feature == "graphics_card_class").unwrap();
    assert!(gpu.p < 1e-6 && !gpu.tag_expanded);
    assert!(r.anova.iter().any(|a| a.feature == "genres" && a.tag_expanded));
    assert!(r.anova.iter().all(|a| (0.0..=1.0).contains(&a.eta2) && (0.0..=1.0).contains(&a.p)));
    assert_eq!(r.hardware_ols.len(), 5);
    assert_eq!(r.macro_ols.iter().map(|o| o.feature.as_str()).collect::<Vec<_>>(), ["log10_gdp", "gini", "intercept"]);
    assert!(r.tukey.iter().all(|t| t.lower <= t.diff && t.diff <= t.upper));
}

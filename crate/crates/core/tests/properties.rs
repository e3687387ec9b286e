use aimh::data_io::{inflation_from_monthly, synthesize_cpi_levels};
use aimh::diagnostics::{relative_inefficiency, EfficiencyReport};
use aimh::sampler::History;
use aimh::targets::{
    semiparam_synthetic, toy_mixture_15d, toy_mixture_1d, tvp_synthetic, SemiparamModel, TauPrior, TvpAr1Model,
    DEFAULT_KNOTS,
};
use aimh::TargetModel;
use nalgebra::DVector;
use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest, ProptestConfig};

fn targets() -> Vec<Box<dyn TargetModel>> {
    let tvp = tvp_synthetic(60, 1.0, 0.0, 0.002, 0.5, 0.6, 4).unwrap();
    let (y, linear, flexible) = semiparam_synthetic(80, 4);
    let names = vec!["x1".to_string(), "x2".to_string()];
    vec![
        Box::new(toy_mixture_1d()),
        Box::new(toy_mixture_15d()),
        Box::new(TvpAr1Model::new(tvp.y).unwrap()),
        Box::new(SemiparamModel::new(y, &linear, &flexible, &names, TauPrior::InverseGamma, DEFAULT_KNOTS).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn targets_are_pure_and_never_nan(raw in prop::collection::vec(-40.0f64..40.0, 15)) {
        for t in targets() {
            let theta = DVector::from_column_slice(&raw[..t.dimension()]);
            let a = t.log_density(&theta);
            let b = t.log_density(&theta);
            prop_assert!(!a.is_nan());
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn efficiency_against_itself_is_exactly_one(
        iacts in prop::collection::vec(0.5f64..500.0, 1..20),
        cost in 1e-9f64..1.0,
    ) {
        let names = (0..iacts.len()).map(|i| format!("p{i}")).collect();
        let r = EfficiencyReport { sampler: "a".into(), parameter_names: names, iact: iacts, runtime_per_iteration: cost };
        let rel = relative_inefficiency(&r, &r).unwrap();
        prop_assert_eq!(rel.mean, 1.0);
        prop_assert!(rel.per_parameter.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn history_stays_capped_and_stride_only_grows(cap in 2usize..64, n in 0usize..2000) {
        let mut h = History::new(cap);
        let mut last_stride = h.stride();
        for i in 0..n {
            h.push(&DVector::from_element(1, i as f64));
            prop_assert!(h.len() <= cap);
            prop_assert!(h.stride() >= last_stride);
            last_stride = h.stride();
        }
    }

    #[test]
    fn cpi_round_trip_recovers_inflation(
        path in prop::collection::vec(-20.0f64..30.0, 2..80),
        year in 1950i32..2020,
        quarter in 1u32..=4,
        base in 10.0f64..500.0,
    ) {
        let levels = synthesize_cpi_levels(&path, (year, quarter), base);
        let got = inflation_from_monthly(&levels).unwrap();
        prop_assert_eq!(got.inflation.len(), path.len());
        for (a, b) in got.inflation.iter().zip(&path) {
            prop_assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
        }
        prop_assert_eq!(got.quarters[0], (year, quarter));
    }

    #[test]
    fn marginal_likelihood_paths_agree(
        n in 20usize..200,
        seed in 0u64..1000,
        ln_s2 in -3.0f64..1.5,
        ln_t1 in -8.0f64..2.0,
        ln_t2 in -8.0f64..2.0,
    ) {
        let (y, linear, flexible) = semiparam_synthetic(n, seed);
        let names = vec!["x1".to_string(), "x2".to_string()];
        let m = SemiparamModel::new(y, &linear, &flexible, &names, TauPrior::LogNormal, DEFAULT_KNOTS).unwrap();
        let tau = [ln_t1.exp(), ln_t2.exp()];
        let a = m.marginal_loglik(ln_s2.exp(), &tau).unwrap();
        let b = m.marginal_loglik_dense(ln_s2.exp(), &tau).unwrap();
        prop_assert!((a - b).abs() <= 1e-8, "{} vs {}", a, b);
    }
}

use gmeasure::blockvar::{
    block_sup, bound_log, bound_sqrt, delta_bar, delta_bar_prefixes, h_block, make_blocks, rho_block,
    BlockStrategy, BlockStructure, BlockVariationPair,
};
use gmeasure::measures::{adjoint_power, block_marginal, CylinderMeasure, DepthCap};
use gmeasure::metrics::{hellinger_integral, total_variation, wasserstein_ultra};
use gmeasure::renewal::{build_spec, mechanical_frequency, renewal_exact};
use gmeasure::symbolic::{variation, Decay, VariationSequence};
use gmeasure::{Alphabet, GFunction};
use proptest::prelude::*;

fn pair_strategy() -> impl Strategy<Value = BlockVariationPair> {
    prop::collection::vec((1usize..=10, 1e-3f64..3.0), 1..=8).prop_map(|v| {
        let (b, r): (Vec<usize>, Vec<f64>) = v.into_iter().unzip();
        BlockVariationPair::new(BlockStructure::new(b).unwrap(), r).unwrap()
    })
}

fn binary_table() -> impl Strategy<Value = GFunction> {
    (0usize..=2)
        .prop_flat_map(|m| (Just(m), prop::collection::vec(0.02f64..0.98, 1 << m)))
        .prop_map(|(m, p)| {
            let columns = p.iter().map(|&x| vec![x, 1.0 - x]).collect();
            GFunction::table(Alphabet::new(2).unwrap(), m, columns).unwrap()
        })
}

fn measure(depth: usize) -> impl Strategy<Value = CylinderMeasure> {
    prop::collection::vec(0.0f64..1.0, 1 << depth).prop_map(move |w| {
        let total: f64 = w.iter().sum::<f64>() + 1e-9;
        let masses: Vec<f64> = w.iter().map(|x| (x + 1e-9 / w.len() as f64) / total).collect();
        CylinderMeasure::new(Alphabet::new(2).unwrap(), depth, masses).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn lowering_the_last_rate_never_raises_the_ceiling(pair in pair_strategy(), factor in 0.0f64..1.0) {
        let p = delta_bar_prefixes(&pair);
        prop_assert!((p[0] - (1.0 - (-pair.rates()[0]).exp() + 1.0 / pair.blocks().lengths()[0] as f64)).abs() < 1e-12);
        prop_assert!((p[p.len() - 1] - delta_bar(&pair)).abs() < 1e-15);
        let mut rates = pair.rates().to_vec();
        *rates.last_mut().unwrap() *= factor;
        let lowered = BlockVariationPair::new(pair.blocks().clone(), rates).unwrap();
        prop_assert!(delta_bar(&lowered) <= delta_bar(&pair) + 1e-12);
    }

    #[test]
    fn renewal_limit_is_delta_bar(pair in pair_strategy()) {
        let spec = build_spec(&pair);
        let mass: f64 = spec.p.iter().map(|(_, p)| p).sum();
        prop_assert!((mass - 1.0).abs() < 1e-12);
        prop_assert!((spec.limit() - delta_bar(&pair)).abs() < 1e-12);
        let sol = renewal_exact(&spec, 4 * pair.blocks().total()).unwrap();
        prop_assert!(sol.values.iter().all(|&a| a >= 0.0));
        prop_assert!(mechanical_frequency(&pair) <= delta_bar(&pair) + 1e-12);
    }

    #[test]
    fn inflation_adds_s_per_symbol(pair in pair_strategy(), s in 0.0f64..0.5) {
        let inflated = pair.inflated(s).unwrap();
        for ((r, r2), &b) in pair.rates().iter().zip(inflated.rates()).zip(pair.blocks().lengths()) {
            prop_assert!((r2 - r - s * b as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn tv_hellinger_bounds(g in binary_table(), x in prop::collection::vec(0usize..2, 2), y in prop::collection::vec(0usize..2, 2), b in 1usize..=3) {
        let eta = block_marginal(&g, &x, b).unwrap();
        let other = block_marginal(&g, &y, b).unwrap();
        let tv = total_variation(&eta, &other).unwrap();
        let h = hellinger_integral(&eta, &other).unwrap();
        prop_assert!((0.0..=2.0 + 1e-12).contains(&tv));
        prop_assert!(tv <= 2.0 * (1.0 - h * h).max(0.0).sqrt() + 1e-12);
        // the other side of the classical comparison
        prop_assert!(1.0 - h <= tv / 2.0 + 1e-12);
    }

    #[test]
    fn rho_bound_chain(g in binary_table(), big_b in 0usize..3, b in 1usize..=3) {
        let r = rho_block(&g, big_b, b).unwrap();
        prop_assert!(r.exact >= 0.0);
        prop_assert!(r.exact <= r.bound_log + 1e-12);
        prop_assert!(r.bound_log <= r.bound_sqrt + 1e-12);
        prop_assert!((bound_log(r.h) - r.bound_log).abs() < 1e-15);
        prop_assert!((bound_sqrt(r.h) - r.bound_sqrt).abs() < 1e-15);
        prop_assert!(r.exact <= r.bound_w + 1e-12 || r.w_caveat);
    }

    #[test]
    fn h_block_monotone_in_start(g in binary_table(), b in 1usize..=2) {
        for big_b in 0..3 {
            prop_assert!(h_block(&g, big_b + 1, b).unwrap() <= h_block(&g, big_b, b).unwrap() + 1e-12);
        }
        let sup = block_sup(&g, 0, b).unwrap();
        prop_assert!(sup.attained);
    }

    #[test]
    fn variation_never_increases(g in binary_table()) {
        for n in 0..4 {
            prop_assert!(variation(&g, n + 1).value <= variation(&g, n).value + 1e-15);
        }
        prop_assert_eq!(variation(&g, 3).value, 0.0);
    }

    #[test]
    fn wasserstein_is_a_metric(a in measure(3), b in measure(3), c in measure(3)) {
        let ab = wasserstein_ultra(&a, &b).unwrap();
        let bc = wasserstein_ultra(&b, &c).unwrap();
        let ac = wasserstein_ultra(&a, &c).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - wasserstein_ultra(&b, &a).unwrap()).abs() < 1e-15);
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert_eq!(wasserstein_ultra(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn transfer_operator_keeps_mass(g in binary_table(), nu in measure(2), n in 1usize..5) {
        let out = adjoint_power(&g, &nu, n, DepthCap(8)).unwrap();
        prop_assert!((out.total() - 1.0).abs() < 1e-12);
        prop_assert!(out.masses().iter().all(|&m| m >= 0.0));
    }

    #[test]
    fn geometric_blocks_grow(c in 1.5f64..3.0, levels in 1usize..15) {
        let blocks = make_blocks(&BlockStrategy::Geometric { c }, None, levels, None).unwrap();
        for (l, &b) in blocks.lengths().iter().enumerate() {
            prop_assert!(b as f64 >= c.powi(l as i32).floor());
        }
    }

    #[test]
    fn decay_sequences_are_monotone(scale in 0.01f64..2.0, exponent in 0.1f64..2.0) {
        let v = VariationSequence::from_decay(Decay::Power { scale, exponent }, 64).unwrap();
        prop_assert!(v.values().windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn lowering_an_inner_rate_can_raise_the_ceiling() {
    let b = BlockStructure::new(vec![3, 1, 3, 1, 1]).unwrap();
    let high = BlockVariationPair::new(b.clone(), vec![0.001, 0.001, 2.2348381305765765, 0.001, 0.001]).unwrap();
    let low = BlockVariationPair::new(b, vec![0.001, 0.0005, 2.2348381305765765, 0.001, 0.001]).unwrap();
    assert!((delta_bar(&high) - 0.510349547141735).abs() < 1e-12);
    assert!((delta_bar(&low) - 0.5103522454147631).abs() < 1e-12);
    assert!(delta_bar(&low) > delta_bar(&high));
}

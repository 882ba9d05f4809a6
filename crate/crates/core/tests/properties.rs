use proptest::prelude::*;
use qtomo::group::{multiplier_value, ConvolutionSemigroup, DiscreteMeasure, GroupContext};
use qtomo::ops::{random_density, validate_density};
use qtomo::semigroup::{twirl, TwirlMethod};
use qtomo::weyl::{fw_transform, Representation};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn random_densities_validate(d in 1usize..=64, seed in any::<u64>()) {
        let rho = random_density(d, seed).unwrap();
        prop_assert!(validate_density(rho.operator(), 1e-10).passed());
    }

    #[test]
    fn multiplier_is_a_cocycle(d in prop::sample::select(vec![3usize, 5, 7, 9, 11]), g in any::<[i64; 6]>()) {
        let ctx = GroupContext::finite(d).unwrap();
        let e = |a: i64, b: i64| ctx.element(a, b).unwrap();
        let (x, y, z) = (e(g[0], g[1]), e(g[2], g[3]), e(g[4], g[5]));
        let xy = ctx.compose(&x, &y).unwrap();
        let yz = ctx.compose(&y, &z).unwrap();
        let lhs = multiplier_value(&ctx, &x, &y).unwrap() * multiplier_value(&ctx, &xy, &z).unwrap();
        let rhs = multiplier_value(&ctx, &x, &yz).unwrap() * multiplier_value(&ctx, &y, &z).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn tomogram_inner_product_obeys_cauchy_schwarz(d in prop::sample::select(vec![3usize, 5, 7]), s1 in any::<u64>(), s2 in any::<u64>()) {
        let rep = Representation::discrete_weyl(d).unwrap();
        let f = fw_transform(&rep, random_density(d, s1).unwrap().operator()).unwrap();
        let g = fw_transform(&rep, random_density(d, s2).unwrap().operator()).unwrap();
        prop_assert!(f.inner(&g).unwrap().norm() <= f.norm() * g.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn twirl_output_is_a_state(seed in any::<u64>(), t in 0.0f64..3.0, rate in 0.1f64..4.0) {
        let rep = Representation::discrete_weyl(5).unwrap();
        let ctx = rep.context();
        let base = DiscreteMeasure::new(vec![ctx.element(1, 2).unwrap(), ctx.element(3, 0).unwrap()], vec![0.6, 0.4]).unwrap();
        let sg = ConvolutionSemigroup::compound_poisson(&ctx, base, rate).unwrap();
        let out = twirl(&rep, &random_density(5, seed).unwrap(), &sg.at(t).unwrap(), TwirlMethod::Exact).unwrap();
        prop_assert!(validate_density(&out.state, 1e-10).passed());
    }
}

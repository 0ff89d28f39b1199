mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relaxcb::oracle::{best_fixed_policy_cost, erm_over_costs, ErmOracle, ErmQuery, ExhaustiveOracle, SpikeOverride};
use relaxcb::types::{Context, CostVector, EstimatedCost, HallucinationStep, Noise, PolicyClass, Sign};

use common::{argmin, policy_costs};

struct Case {
    class: Arc<PolicyClass>,
    gamma: f64,
    past: Vec<(Context, EstimatedCost)>,
    current: Option<(Context, Option<usize>)>,
    future: Vec<HallucinationStep>,
}

fn random_case(seed: u64, size: usize, x: usize, k: usize, n_past: usize, n_future: usize) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let class = Arc::new(PolicyClass::random(size, x, k, seed ^ 0x5eed).unwrap());
    let gamma = [0.25, 0.5, 1.0][rng.random_range(0..3)];
    let ctx = |rng: &mut ChaCha8Rng| Context::new(rng.random_range(0..x), x).unwrap();
    let past = (0..n_past)
        .map(|_| {
            let c = ctx(&mut rng);
            let e = if rng.random::<bool>() { EstimatedCost::spike(rng.random_range(0..k), k, gamma).unwrap() } else { EstimatedCost::Zero };
            (c, e)
        })
        .collect();
    let current = if rng.random::<bool>() {
        let c = ctx(&mut rng);
        Some((c, rng.random::<bool>().then(|| rng.random_range(0..k))))
    } else {
        None
    };
    let future = (0..n_future)
        .map(|_| {
            let c = ctx(&mut rng);
            let noise = if rng.random::<bool>() {
                Noise::OneHot { arm: rng.random_range(0..k), sign: if rng.random() { Sign::Plus } else { Sign::Minus } }
            } else {
                Noise::Dense((0..k).map(|_| if rng.random() { Sign::Plus } else { Sign::Minus }).collect())
            };
            let z = if rng.random::<bool>() { k as f64 / gamma } else { 0.0 };
            HallucinationStep::new(c, noise, z, k, gamma).unwrap()
        })
        .collect();
    Case { class, gamma, past, current, future }
}

fn query(case: &Case) -> ErmQuery<'_> {
    let k = case.class.num_actions();
    let q = ErmQuery::new(&case.past, &case.future);
    match case.current {
        Some((x, spike)) => q.with_current(x, spike.map(|action| SpikeOverride { action, value: k as f64 / case.gamma })),
        None => q,
    }
}

fn reference(case: &Case) -> Vec<f64> {
    let k = case.class.num_actions() as f64;
    let current = case.current.and_then(|(x, s)| s.map(|a| (x, a, k / case.gamma)));
    policy_costs(&case.class, &case.past, current, &case.future)
}

#[test]
fn spec_sized_random_query_matches_resummation() {
    for seed in 0..20 {
        let case = random_case(seed, 20, 4, 3, 6, 6);
        let (value, idx) = argmin(&reference(&case));
        let answer = ExhaustiveOracle::new(case.class.clone()).value_of_erm(&query(&case)).unwrap();
        assert_eq!(answer.value, value);
        assert_eq!(answer.argmin_policy, idx);
    }
}

#[test]
fn benchmark_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let class = PolicyClass::random(50, 5, 3, 1).unwrap();
    let contexts: Vec<Context> = (0..100).map(|_| Context::new(rng.random_range(0..5), 5).unwrap()).collect();
    let costs: Vec<CostVector> = (0..100).map(|_| CostVector::new((0..3).map(|_| rng.random()).collect(), 3).unwrap()).collect();
    let mut totals = vec![0.0; 50];
    for (p, total) in class.policies().iter().zip(totals.iter_mut()) {
        for t in 0..100 {
            *total += costs[t].as_slice()[p.table()[contexts[t].id()]];
        }
    }
    let (value, idx) = argmin(&totals);
    let answer = best_fixed_policy_cost(&contexts, &costs, &class).unwrap();
    assert!((answer.value - value).abs() < 1e-9);
    assert_eq!(answer.argmin_policy, idx);
    assert!(best_fixed_policy_cost(&contexts[..99], &costs, &class).is_err());
}

#[test]
fn empty_class_is_a_configuration_error() {
    assert!(matches!(PolicyClass::new(vec![], 2), Err(relaxcb::Error::Config(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn value_is_min_over_policies(seed in any::<u64>(), size in 1usize..25, x in 1usize..5, k in 1usize..5,
                                  n_past in 0usize..10, n_future in 0usize..10) {
        let case = random_case(seed, size, x, k, n_past, n_future);
        let costs = reference(&case);
        let answer = ExhaustiveOracle::new(case.class.clone()).value_of_erm(&query(&case)).unwrap();
        let (value, idx) = argmin(&costs);
        prop_assert!((answer.value - value).abs() < 1e-9);
        prop_assert_eq!(answer.argmin_policy, idx);
        // The answer is the argmin policy's own cost.
        prop_assert!((costs[answer.argmin_policy] - answer.value).abs() < 1e-9);
        // Never above any individual policy: ten sampled ones.
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        for _ in 0..10 {
            let i = rng.random_range(0..size);
            prop_assert!(answer.value <= costs[i] + 1e-9);
        }
    }

    #[test]
    fn caching_never_changes_answers(seed in any::<u64>(), size in 1usize..12, k in 2usize..4) {
        // A learner-like query stream: a growing past, K+1 queries per round
        // sharing one rollout, and an occasional unrelated query.
        let case = random_case(seed, size, 3, k, 12, 12);
        let mut cached = ExhaustiveOracle::new(case.class.clone());
        let mut fresh = ExhaustiveOracle::uncached(case.class.clone());
        for t in 0..case.past.len() {
            let future = &case.future[t.min(case.future.len())..];
            for spike in std::iter::once(None).chain((0..k).map(Some)) {
                let q = ErmQuery::new(&case.past[..t], future).with_current(
                    case.past[t].0,
                    spike.map(|action| SpikeOverride { action, value: k as f64 / case.gamma }),
                );
                prop_assert_eq!(cached.value_of_erm(&q).unwrap(), fresh.value_of_erm(&q).unwrap());
            }
            if t % 4 == 3 {
                let q = ErmQuery::new(&case.past[t / 2..t], &case.future[..1]);
                prop_assert_eq!(cached.value_of_erm(&q).unwrap(), fresh.value_of_erm(&q).unwrap());
            }
        }
        prop_assert_eq!(cached.calls(), fresh.calls());
    }

    #[test]
    fn translation_equivariance(seed in any::<u64>(), size in 1usize..15, k in 1usize..4, at in 0usize..3) {
        let case = random_case(seed, size, 3, k, 5, 5);
        let mut oracle = ExhaustiveOracle::uncached(case.class.clone());
        let base = oracle.value_of_erm(&query(&case)).unwrap().value;
        // One spike per action at the same context adds K/gamma to every policy.
        let mut shifted = case.past.clone();
        let x = Context::new(at, 3).unwrap();
        for a in 0..k {
            shifted.push((x, EstimatedCost::spike(a, k, case.gamma).unwrap()));
        }
        let moved = Case { past: shifted, future: case.future.clone(), ..case };
        let value = oracle.value_of_erm(&query(&moved)).unwrap().value;
        prop_assert!((value - base - k as f64 / moved.gamma).abs() < 1e-9);
    }

    #[test]
    fn constant_row_shifts_real_valued_erm(seed in any::<u64>(), shift in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let class = PolicyClass::random(8, 3, 3, seed).unwrap();
        let rows: Vec<(Context, Vec<f64>)> =
            (0..6).map(|_| (Context::new(rng.random_range(0..3), 3).unwrap(), (0..3).map(|_| rng.random()).collect())).collect();
        let mut borrowed: Vec<(Context, &[f64])> = rows.iter().map(|(x, c)| (*x, c.as_slice())).collect();
        let base = erm_over_costs(&class, &borrowed).unwrap();
        let constant = vec![shift; 3];
        borrowed.push((Context::new(0, 3).unwrap(), &constant));
        let moved = erm_over_costs(&class, &borrowed).unwrap();
        prop_assert!((moved.value - base.value - shift).abs() < 1e-12);
        prop_assert_eq!(moved.argmin_policy, base.argmin_policy);
    }
}

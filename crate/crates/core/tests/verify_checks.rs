use std::sync::Arc;

use relaxcb::envs::{builtin_adversaries, AdversarySpec, ContextDistribution, NoiseLaw};
use relaxcb::learner::{run_episode, EnvSpec, LearnerSpec};
use relaxcb::oracle::{ErmOracle, ExhaustiveOracle};
use relaxcb::rng::{stream, Stream};
use relaxcb::types::{ActionDistribution, Context, CostVector, EstimatedCost, PolicyClass, Rollout};
use relaxcb::verify::{
    check_admissibility_step, check_admissibility_step_with, check_final_condition, check_rademacher_bound, check_regret_bound,
    estimate_rel, exact_rel, rademacher_bound, regret_bound, relax_distributions, step_objective, Instance, Mode,
};
use relaxcb::Error;

fn tiny(tables: Vec<Vec<usize>>, horizon: usize) -> Instance {
    let class = Arc::new(PolicyClass::from_tables(tables, 2).unwrap());
    Instance::new(class, ContextDistribution::uniform(2).unwrap(), horizon, 0.5).unwrap()
}

#[test]
fn exact_admissibility_along_learner_histories() {
    for horizon in 2..=3 {
        let inst = tiny(vec![vec![0, 1], vec![1, 0], vec![0, 0], vec![1, 1]], horizon);
        for (name, adv) in builtin_adversaries(2, 2) {
            let env = EnvSpec { contexts: inst.contexts.clone(), adversary: adv };
            let ep = run_episode(&LearnerSpec::Relax { gamma: Some(0.5) }, &env, inst.class.clone(), horizon, 7).unwrap();
            let hist: Vec<(Context, EstimatedCost)> = ep.records.iter().map(|r| (r.context, r.estimate)).collect();
            for t in 1..=horizon {
                let mut rng = stream(1, Stream::Verifier);
                let rep = check_admissibility_step(&inst, &hist[..t - 1], Mode::Exact, 0, 0, &mut rng).unwrap();
                println!("{name} T={horizon} {} lhs={} rhs={} pass={}", rep.check, rep.lhs, rep.rhs, rep.pass);
                assert!(rep.pass, "{rep:?}");
            }
        }
    }
}

#[test]
fn monte_carlo_admissibility_two_policies() {
    let inst = tiny(vec![vec![0, 1], vec![1, 0]], 2);
    let mut rng = stream(11, Stream::Verifier);
    let rep = check_admissibility_step(&inst, &[], Mode::MonteCarlo, 20_000, 20_000, &mut rng).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert!(rep.se > 0.0);
    let exact = check_admissibility_step(&inst, &[], Mode::Exact, 0, 0, &mut rng).unwrap();
    assert!((exact.lhs - rep.lhs).abs() < 4.0 * rep.se + 1e-9, "{exact:?} vs {rep:?}");
}

#[test]
fn final_step_on_a_single_policy_class_is_exact() {
    let inst = tiny(vec![vec![0, 1]], 3);
    let contexts = vec![Context::new(0, 2).unwrap(), Context::new(1, 2).unwrap(), Context::new(0, 2).unwrap()];
    let costs: Vec<CostVector> =
        [[0.3, 0.9], [0.6, 0.1], [1.0, 0.0]].iter().map(|c| CostVector::new(c.to_vec(), 2).unwrap()).collect();
    let qs = relax_distributions(&inst, &contexts, &costs, 3).unwrap();
    let mut rng = stream(2, Stream::Verifier);
    let rep = check_final_condition(&inst, &contexts, &costs, &qs, Mode::Auto, 0, &mut rng).unwrap();
    // A single policy makes Rel(I_T) linear in the estimates: equality.
    assert!((rep.lhs - rep.rhs).abs() < 1e-12, "{rep:?}");
    assert!(rep.pass && rep.se == 0.0);
    let mc = check_final_condition(&inst, &contexts, &costs, &qs, Mode::MonteCarlo, 10_000, &mut rng).unwrap();
    assert!(mc.pass && mc.se > 0.0, "{mc:?}");
}

fn x(id: usize) -> Context {
    Context::new(id, 2).unwrap()
}

#[test]
fn estimate_rel_agrees_with_exact_enumeration() {
    // Empty history, gamma = 0.5, one future step, K = 2, every table.
    let class = Arc::new(PolicyClass::exhaustive(2, 2).unwrap());
    let inst = Instance::new(class.clone(), ContextDistribution::uniform(2).unwrap(), 1, 0.5).unwrap();
    let mut oracle = ExhaustiveOracle::new(class);
    let exact = exact_rel(&[], 0, &inst, &mut oracle).unwrap();
    // By hand: value 0.5 = gamma (T - t) unless the step is live (prob 0.5)
    // with a minus sign (prob 0.5); then the rich class picks up -2 * 4.
    assert!((exact - (0.5 + 0.25 * 8.0)).abs() < 1e-12);
    let mut rng = stream(3, Stream::Verifier);
    let mc = estimate_rel(&[], 0, &inst, &mut oracle, 20_000, &mut rng).unwrap();
    assert!((mc.mean - exact).abs() <= 3.0 * mc.se, "{mc:?} vs {exact}");

    // Doubling the sample count halves SE^2, within noise.
    let inst3 = Instance::new(inst.class.clone(), inst.contexts.clone(), 3, 0.5).unwrap();
    let small = estimate_rel(&[], 0, &inst3, &mut oracle, 20_000, &mut rng).unwrap();
    let large = estimate_rel(&[], 0, &inst3, &mut oracle, 40_000, &mut rng).unwrap();
    let ratio = small.se.powi(2) / large.se.powi(2);
    assert!((ratio - 2.0).abs() < 0.2, "{ratio}");

    // t = T: no rollout, no variance.
    let hist = vec![(x(0), EstimatedCost::spike(1, 2, 0.5).unwrap())];
    let last = estimate_rel(&hist, 1, &inst, &mut oracle, 5, &mut rng).unwrap();
    assert!(last.is_exact());
    assert_eq!(last.mean, 0.0);
    assert!(estimate_rel(&hist, 1, &inst, &mut oracle, 0, &mut rng).is_err());
}

#[test]
fn single_policy_last_step_is_exact_with_nonnegative_margin() {
    let inst = tiny(vec![vec![1, 0]], 2);
    let hist = vec![(x(1), EstimatedCost::spike(0, 2, 0.5).unwrap())];
    let mut rng = stream(0, Stream::Verifier);
    let rep = check_admissibility_step(&inst, &hist, Mode::Auto, 0, 0, &mut rng).unwrap();
    assert_eq!(rep.se, 0.0);
    assert!(rep.pass && rep.margin() >= 0.0, "{rep:?}");
}

#[test]
fn broken_strategy_is_rejected_by_the_floor() {
    let inst = tiny(vec![vec![0, 1], vec![1, 0]], 2);
    let mut point_mass =
        |_: &[(Context, EstimatedCost)], _: &Rollout, _: Context, _: &mut dyn ErmOracle| ActionDistribution::point_mass(0, 2);
    let mut rng = stream(0, Stream::Verifier);
    for mode in [Mode::Exact, Mode::MonteCarlo] {
        let err = check_admissibility_step_with(&inst, &[], &mut point_mass, mode, 10, 10, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Contract(_)), "{err}");
    }
}

#[test]
fn oversized_instances_are_refused() {
    let class = Arc::new(PolicyClass::random(9, 2, 2, 0).unwrap());
    let inst = Instance::new(class, ContextDistribution::uniform(2).unwrap(), 2, 0.5).unwrap();
    let mut rng = stream(0, Stream::Verifier);
    let err = check_admissibility_step(&inst, &[], Mode::Auto, 1, 1, &mut rng).unwrap_err();
    assert!(err.to_string().contains("too large"));
}

#[test]
fn step_objective_is_affine_in_costs() {
    let inst = tiny(vec![vec![0, 1], vec![1, 0], vec![1, 1]], 3);
    let hist = vec![(x(0), EstimatedCost::spike(1, 2, 0.5).unwrap())];
    let c = CostVector::new(vec![0.9, 0.2], 2).unwrap();
    let d = CostVector::new(vec![0.1, 0.7], 2).unwrap();
    for (i, alpha) in [0.0, 0.3, 0.75].into_iter().enumerate() {
        let mix = CostVector::new(vec![alpha * 0.9 + (1.0 - alpha) * 0.1, alpha * 0.2 + (1.0 - alpha) * 0.7], 2).unwrap();
        let at = |costs: &CostVector, mode: Mode| {
            let mut rng = stream(i as u64, Stream::Verifier);
            step_objective(&inst, &hist, x(1), costs, mode, 4_000, 20_000, &mut rng).unwrap()
        };
        // Exact evaluation is affine to rounding.
        let (e_c, e_d, e_m) = (at(&c, Mode::Exact), at(&d, Mode::Exact), at(&mix, Mode::Exact));
        assert!((e_m.mean - (alpha * e_c.mean + (1.0 - alpha) * e_d.mean)).abs() < 1e-9);
        // Independent Monte-Carlo estimates match the interpolation within 3 sigma.
        let (m_c, m_d, m_m) = (at(&c, Mode::MonteCarlo), at(&d, Mode::MonteCarlo), at(&mix, Mode::MonteCarlo));
        let interp = alpha * m_c.mean + (1.0 - alpha) * m_d.mean;
        let se = (m_m.se.powi(2) + (alpha * m_c.se).powi(2) + ((1.0 - alpha) * m_d.se).powi(2)).sqrt();
        assert!((m_m.mean - interp).abs() <= 3.0 * se, "alpha {alpha}: {} vs {interp} (se {se})", m_m.mean);
    }
}

#[test]
fn final_step_examples() {
    let inst = tiny(vec![vec![0, 1], vec![1, 0], vec![0, 0]], 3);
    let contexts = vec![x(0), x(1), x(1)];
    let zeros = vec![CostVector::constant(0.0, 2).unwrap(); 3];
    let qs = relax_distributions(&inst, &contexts, &zeros, 1).unwrap();
    let mut rng = stream(4, Stream::Verifier);
    let rep = check_final_condition(&inst, &contexts, &zeros, &qs, Mode::Auto, 0, &mut rng).unwrap();
    assert_eq!((rep.lhs, rep.rhs), (0.0, 0.0));
    assert!(rep.pass);

    // Random tiny instance, Monte-Carlo with 10^4 samples.
    let mut crng = stream(5, Stream::Adversary);
    use rand::Rng;
    let costs: Vec<CostVector> = (0..3).map(|_| CostVector::new(vec![crng.random(), crng.random()], 2).unwrap()).collect();
    let qs = relax_distributions(&inst, &contexts, &costs, 2).unwrap();
    let mc = check_final_condition(&inst, &contexts, &costs, &qs, Mode::MonteCarlo, 10_000, &mut rng).unwrap();
    assert!(mc.pass, "{mc:?}");
    let exact = check_final_condition(&inst, &contexts, &costs, &qs, Mode::Exact, 0, &mut rng).unwrap();
    assert!(exact.pass && (exact.lhs - mc.lhs).abs() <= 4.0 * mc.se, "{exact:?} vs {mc:?}");
}

#[test]
fn rademacher_examples() {
    let contexts = ContextDistribution::uniform(3).unwrap();
    let class = PolicyClass::random(4, 3, 2, 6).unwrap();
    let rep = check_rademacher_bound(&class, &contexts, 64, 1.0, 10_000, 1).unwrap();
    assert!(rep.pass && rep.lhs > 0.0, "{rep:?}");
    assert!((rep.rhs - 2.0 * (2.0 * 64.0 * 4f64.ln()).sqrt()).abs() < 1e-12);

    let single = PolicyClass::random(1, 3, 2, 6).unwrap();
    let rep = check_rademacher_bound(&single, &contexts, 64, 0.5, 10_000, 2).unwrap();
    assert!(rep.lhs.abs() <= 3.0 * rep.se, "{rep:?}");
    assert!(rep.pass);

    let err = check_rademacher_bound(&class, &contexts, 64, 0.01, 100, 1).unwrap_err();
    assert!(matches!(&err, Error::Config(m) if m.contains("hypothesis")), "{err}");

    // Thread count never changes the pooled result.
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = check_rademacher_bound(&class, &contexts, 64, 0.6, 2_500, 9).unwrap();
    let b = pool.install(|| check_rademacher_bound(&class, &contexts, 64, 0.6, 2_500, 9).unwrap());
    assert_eq!(a, b);
}

#[test]
fn regret_examples() {
    let class = Arc::new(PolicyClass::random(4, 2, 2, 3).unwrap());
    let contexts = ContextDistribution::uniform(2).unwrap();
    let identical = vec![(
        "identical".to_string(),
        AdversarySpec::Stochastic { means: vec![vec![0.5, 0.5]; 2], noise: NoiseLaw::CommonBernoulli },
    )];
    let reps = check_regret_bound(class.clone(), &contexts, 200, 0.4, &identical, 5, 1).unwrap();
    assert_eq!(reps[0].lhs, 0.0);
    assert!(reps[0].pass);

    let reps = check_regret_bound(class.clone(), &contexts, 100, 1.0, &builtin_adversaries(2, 2), 4, 2).unwrap();
    for r in &reps {
        assert!(r.rhs >= 100.0 && r.pass, "{r:?}");
    }
    assert!(matches!(check_regret_bound(class, &contexts, 100, 0.001, &identical, 4, 1), Err(Error::Config(_))));
    assert!(regret_bound(2048, 2, 4, 0.3) > rademacher_bound(2048, 2, 4, 0.3));
}

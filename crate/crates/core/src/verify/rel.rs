use rand::Rng;

use crate::error::{input_err, Result};
use crate::oracle::ErmOracle;
use crate::relaxation::{draw_future, relaxation_random_value, Hallucination};
use crate::stats::RunningStats;
use crate::types::{spike_height, Context, EstimatedCost, HallucinationStep, Noise, Rollout, Sign};

use super::{Estimate, Instance};

/// Atoms of the law of one hallucinated step: a single "scale zero" atom
/// (context, arm and sign are irrelevant there) plus one atom per
/// `(x, arm, sign)` with `D(x) > 0` at scale `K/gamma`.
fn step_atoms(instance: &Instance) -> Vec<(HallucinationStep, f64)> {
    let k = instance.num_actions();
    let gamma = instance.gamma;
    let mut atoms = Vec::new();
    if gamma < 1.0 {
        let null = HallucinationStep::from_parts(Context::unchecked(0), Noise::OneHot { arm: 0, sign: Sign::Plus }, 0.0);
        atoms.push((null, 1.0 - gamma));
    }
    let height = spike_height(k, gamma);
    for (x, px) in instance.contexts.probs().iter().enumerate() {
        if *px == 0.0 {
            continue;
        }
        for arm in 0..k {
            for sign in [Sign::Minus, Sign::Plus] {
                let step = HallucinationStep::from_parts(Context::unchecked(x), Noise::OneHot { arm, sign }, height);
                atoms.push((step, gamma * px / (2 * k) as f64));
            }
        }
    }
    atoms
}

/// Number of atoms in the law of a rollout drawn at round `t`, if it fits in `u64`.
pub fn future_atom_count(instance: &Instance, t: usize) -> Option<u64> {
    let per_step = step_atoms(instance).len() as u64;
    per_step.checked_pow(instance.horizon.saturating_sub(t) as u32)
}

/// Calls `visit(rollout, probability)` for every atom of the law of `rho_t`.
pub fn enumerate_futures(
    instance: &Instance,
    t: usize,
    visit: &mut dyn FnMut(&Rollout, f64) -> Result<()>,
) -> Result<()> {
    if t > instance.horizon {
        return Err(input_err!("round {t} beyond horizon {}", instance.horizon));
    }
    let atoms = step_atoms(instance);
    let len = instance.horizon - t;
    let mut index = vec![0usize; len];
    loop {
        let mut prob = 1.0;
        let steps: Vec<HallucinationStep> = index
            .iter()
            .map(|i| {
                prob *= atoms[*i].1;
                atoms[*i].0.clone()
            })
            .collect();
        visit(&Rollout::new(t, instance.horizon, steps)?, prob)?;
        // Odometer increment; done once every digit wraps.
        let mut pos = 0;
        loop {
            if pos == len {
                return Ok(());
            }
            index[pos] += 1;
            if index[pos] < atoms.len() {
                break;
            }
            index[pos] = 0;
            pos += 1;
        }
    }
}

/// `Rel(I_{1..t})` by enumerating every rollout atom.
pub fn exact_rel(
    history: &[(Context, EstimatedCost)],
    t: usize,
    instance: &Instance,
    oracle: &mut dyn ErmOracle,
) -> Result<f64> {
    let mut total = 0.0;
    enumerate_futures(instance, t, &mut |rollout, prob| {
        total += prob * relaxation_random_value(history, rollout, t, instance.horizon, instance.gamma, oracle)?;
        Ok(())
    })?;
    Ok(total)
}

/// Monte-Carlo mean and standard error of `R(history, rho_t)` over
/// `n_samples` independent rollouts. At `t = T` there is nothing to sample
/// and the exact value is returned.
pub fn estimate_rel<R: Rng + ?Sized>(
    history: &[(Context, EstimatedCost)],
    t: usize,
    instance: &Instance,
    oracle: &mut dyn ErmOracle,
    n_samples: u64,
    rng: &mut R,
) -> Result<Estimate> {
    if n_samples == 0 {
        return Err(input_err!("estimate_rel needs at least one sample"));
    }
    if t == instance.horizon {
        let v = relaxation_random_value(history, &Rollout::empty(t), t, t, instance.gamma, oracle)?;
        return Ok(Estimate::exact(v));
    }
    let mut stats = RunningStats::new();
    for _ in 0..n_samples {
        let rollout = draw_future(
            Hallucination::OneHot,
            t,
            instance.horizon,
            instance.num_actions(),
            instance.gamma,
            &instance.contexts,
            rng,
        )?;
        stats.push(relaxation_random_value(history, &rollout, t, instance.horizon, instance.gamma, oracle)?);
    }
    Ok(Estimate { mean: stats.mean(), se: stats.std_error(), n: stats.count() })
}

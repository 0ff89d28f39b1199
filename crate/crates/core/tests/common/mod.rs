//! Test-side reference computations, written without the library's caches.
#![allow(dead_code)]

use relaxcb::types::{Context, EstimatedCost, HallucinationStep, Noise, PolicyClass};

/// `EstimatedCost` evaluated at an action, from its raw fields.
pub fn est_at(c: &EstimatedCost, a: usize) -> f64 {
    match c {
        EstimatedCost::Zero => 0.0,
        EstimatedCost::Spike { action, value } => {
            if *action == a {
                *value
            } else {
                0.0
            }
        }
    }
}

/// `2 z eps(a)` from the raw noise fields.
pub fn hallucination_at(step: &HallucinationStep, a: usize) -> f64 {
    let eps = match step.noise() {
        Noise::OneHot { arm, sign } => {
            if *arm == a {
                sign.value()
            } else {
                0.0
            }
        }
        Noise::Dense(signs) => signs[a].value(),
    };
    2.0 * step.z() * eps
}

/// Per-policy query cost, recomputed from scratch.
pub fn policy_costs(
    class: &PolicyClass,
    past: &[(Context, EstimatedCost)],
    current: Option<(Context, usize, f64)>,
    future: &[HallucinationStep],
) -> Vec<f64> {
    class
        .policies()
        .iter()
        .map(|p| {
            let table = p.table();
            let mut total = 0.0;
            for (x, c) in past {
                total += est_at(c, table[x.id()]);
            }
            if let Some((x, a, v)) = current {
                if table[x.id()] == a {
                    total += v;
                }
            }
            for s in future {
                total += hallucination_at(s, table[s.context().id()]);
            }
            total
        })
        .collect()
}

/// Minimum with lowest-index tie-break.
pub fn argmin(values: &[f64]) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (i, v) in values.iter().enumerate() {
        if *v < best.0 {
            best = (*v, i);
        }
    }
    best
}

/// Water-filling straight from its pseudocode.
pub fn reference_water_fill(eta: &[f64]) -> Vec<f64> {
    let k = eta.len();
    let mut m = 1.0;
    let mut q = vec![0.0; k];
    for i in 0..k {
        let cap = if eta[i] > 0.0 { eta[i] } else { 0.0 };
        q[i] = if cap < m { cap } else { m };
        m -= q[i];
    }
    if m > 0.0 {
        for p in q.iter_mut() {
            *p += m / k as f64;
        }
    }
    q
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

//! Random models, chains, tables and cash flows shared by the property tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fmt::Write as _;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use multistate_core::cashflow::CashflowMatrix;
use multistate_core::lifetable::TransitionSequence;
use multistate_core::model::{StateId, StateModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random digraph without self-loops; `dag` keeps edges going to higher ids.
pub fn random_digraph(rng: &mut impl Rng, n_states: usize, density: f64, dag: bool) -> StateModel {
    let mut model = StateModel::new(n_states);
    for i in 1..=n_states {
        for j in 1..=n_states {
            if i != j && (!dag || j > i) && rng.random_bool(density) {
                model.transitions.insert((i, j));
            }
        }
    }
    model
}

/// Random row-stochastic sequence with at most `width` nonzeros per row.
pub fn random_chain(
    rng: &mut impl Rng,
    n_states: usize,
    n: usize,
    width: usize,
) -> TransitionSequence {
    let matrices = (0..n)
        .map(|_| {
            let mut q = Array2::<f64>::zeros((n_states, n_states));
            for i in 0..n_states {
                let k = rng.random_range(1..=width.min(n_states));
                let cols = sample(rng, n_states, k);
                let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
                let total: f64 = weights.iter().sum();
                for (c, w) in cols.iter().zip(&weights) {
                    q[[i, c]] = w / total;
                }
            }
            q
        })
        .collect();
    TransitionSequence::from_matrices(matrices).expect("rows are stochastic")
}

/// Random probability vector.
pub fn random_distribution(rng: &mut impl Rng, n_states: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n_states).map(|_| rng.random_range(0.0..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// Random signed cash flows, about half the cells zero.
pub fn random_cashflow(
    rng: &mut impl Rng,
    n: usize,
    n_states: usize,
    signed: bool,
) -> CashflowMatrix {
    let lo = if signed { -2.0 } else { 0.0 };
    let c = Array2::from_shape_fn((n + 1, n_states), |_| {
        if rng.random_bool(0.5) {
            rng.random_range(lo..2.0)
        } else {
            0.0
        }
    });
    CashflowMatrix::from_array(c).unwrap()
}

/// Forward model in which state 1 reaches every other state, with some
/// single-exit states flagged reflex.
pub fn random_insurance_model(rng: &mut impl Rng, n_states: usize) -> StateModel {
    let mut model = StateModel::new(n_states);
    for j in 2..=n_states {
        let i = rng.random_range(1..j);
        model.transitions.insert((i, j));
        for extra in 1..j {
            if extra != i && rng.random_bool(0.25) {
                model.transitions.insert((extra, j));
            }
        }
    }
    let candidates: Vec<StateId> = (2..=n_states)
        .filter(|&s| model.out_degree(s) == 1)
        .collect();
    for s in candidates {
        if rng.random_bool(0.5) {
            model.reflex.insert(s);
        }
    }
    model
}

/// Table states: transient and not reflex.
pub fn tabulated(model: &StateModel) -> Vec<StateId> {
    model
        .states()
        .filter(|&s| !model.is_absorbing(s) && !model.reflex.contains(&s))
        .collect()
}

/// Closed cohort started with `radix` lives in state 1, tabulated as CSV,
/// together with the number of lives in each state at each time.
pub fn closed_cohort(
    rng: &mut impl Rng,
    model: &StateModel,
    n: usize,
    radix: f64,
) -> (String, Array2<f64>) {
    let n_states = model.n_states;
    let mut lives = Array2::<f64>::zeros((n + 1, n_states));
    lives[[0, 0]] = radix;
    let listed = tabulated(model);
    let flows: Vec<(StateId, StateId)> = model
        .transitions
        .iter()
        .copied()
        .filter(|(i, _)| listed.contains(i))
        .collect();
    let mut rows = Vec::new();
    for k in 0..=n {
        let mut d = vec![0.0; flows.len()];
        for &i in &listed {
            let out: Vec<usize> = (0..flows.len()).filter(|&f| flows[f].0 == i).collect();
            let mut budget = rng.random_range(0.0..0.9);
            for &f in &out {
                let share = rng.random_range(0.0..=budget);
                budget -= share;
                d[f] = lives[[k, i - 1]] * share;
            }
        }
        if k < n {
            for s in 1..=n_states {
                let here = lives[[k, s - 1]];
                if model.is_absorbing(s) {
                    lives[[k + 1, s - 1]] += here;
                } else if model.reflex.contains(&s) {
                    let next = model.successors(s).next().unwrap();
                    lives[[k + 1, next - 1]] += here;
                } else {
                    let leaving: f64 = (0..flows.len())
                        .filter(|&f| flows[f].0 == s)
                        .map(|f| d[f])
                        .sum();
                    lives[[k + 1, s - 1]] += here - leaving;
                }
            }
            for (f, &(_, j)) in flows.iter().enumerate() {
                lives[[k + 1, j - 1]] += d[f];
            }
        }
        rows.push(d);
    }
    let mut csv = String::from("k");
    for &i in &listed {
        write!(csv, ",l_{i}").unwrap();
    }
    for (i, j) in &flows {
        write!(csv, ",d_{i}_{j}").unwrap();
    }
    csv.push('\n');
    for (k, d) in rows.iter().enumerate() {
        write!(csv, "{k}").unwrap();
        for &i in &listed {
            write!(csv, ",{:?}", lives[[k, i - 1]]).unwrap();
        }
        for x in d {
            write!(csv, ",{x:?}").unwrap();
        }
        csv.push('\n');
    }
    (csv, lives)
}

pub fn all_states(model: &StateModel) -> BTreeSet<StateId> {
    model.states().collect()
}

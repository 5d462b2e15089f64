//! Independent checks of the matrix formulas: exact enumeration of every
//! path of a small chain, and seeded Monte Carlo simulation of the chain.
//!
//! Each simulated path draws from its own ChaCha stream selected by the path
//! index, so an ensemble depends only on `(master_seed, n_paths)` and not on
//! how the work is split across threads.

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cashflow::CashflowMatrix;
use crate::error::{Error, Result};
use crate::lifetable::TransitionSequence;
use crate::model::{ArrivalOffsets, StateId};
use crate::valuation::DiscountVector;

pub const ENUMERATION_MAX_STATES: usize = 8;
pub const ENUMERATION_MAX_PERIODS: usize = 12;

/// Expected present value of `c` summed over every positive-probability path:
/// `sum_paths P(path) * sum_k m_k C[k][X(k)]`.
pub fn enumerate_pv(
    seq: &TransitionSequence,
    initial: &[f64],
    c: &CashflowMatrix,
    m: &DiscountVector,
) -> Result<f64> {
    let (n_states, n) = (seq.n_states(), seq.n());
    if n_states > ENUMERATION_MAX_STATES || n > ENUMERATION_MAX_PERIODS {
        return Err(Error::EnumerationTooLarge {
            states: n_states,
            periods: n,
            max_states: ENUMERATION_MAX_STATES,
            max_periods: ENUMERATION_MAX_PERIODS,
        });
    }
    check_shapes(n, n_states, initial.len(), c, m)?;

    struct Walk<'a> {
        seq: &'a TransitionSequence,
        c: &'a CashflowMatrix,
        m: &'a DiscountVector,
        total: f64,
    }

    impl Walk<'_> {
        fn step(&mut self, k: usize, state: usize, prob: f64, pv: f64) {
            let pv = pv + self.m.get(k) * self.c.as_array()[[k, state]];
            if k == self.seq.n() {
                self.total += prob * pv;
                return;
            }
            let q = self.seq.q(k);
            for next in 0..q.ncols() {
                let p = q[[state, next]];
                if p > 0.0 {
                    self.step(k + 1, next, prob * p, pv);
                }
            }
        }
    }

    let mut walk = Walk {
        seq,
        c,
        m,
        total: 0.0,
    };
    for (state, &p) in initial.iter().enumerate() {
        if p > 0.0 {
            walk.step(0, state, p, 0.0);
        }
    }
    Ok(walk.total)
}

fn check_shapes(
    n: usize,
    n_states: usize,
    initial_len: usize,
    c: &CashflowMatrix,
    m: &DiscountVector,
) -> Result<()> {
    if initial_len != n_states || c.n() != n || c.n_states() != n_states || m.n() != n {
        return Err(Error::Shape(format!(
            "chain has {n_states} states over {n} periods; initial has {initial_len} entries, \
             C is {}x{}, M has {}",
            c.n() + 1,
            c.n_states(),
            m.n() + 1
        )));
    }
    Ok(())
}

/// Simulated state sequences `X(0..=n)`, stored with 0-based state indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathEnsemble {
    pub n_paths: usize,
    pub master_seed: u64,
    n: usize,
    n_states: usize,
    states: Vec<u16>,
}

impl PathEnsemble {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// 0-based state indices of path `i`.
    pub fn path(&self, i: usize) -> &[u16] {
        &self.states[i * (self.n + 1)..(i + 1) * (self.n + 1)]
    }

    /// State id (1-based) of path `i` at time `k`.
    pub fn state(&self, i: usize, k: usize) -> StateId {
        self.path(i)[k] as StateId + 1
    }

    fn paths(&self) -> impl IndexedParallelIterator<Item = &[u16]> {
        self.states.par_chunks(self.n + 1)
    }

    /// Share of paths in each state at each time, `(n+1) x N`.
    pub fn frequencies(&self) -> Array2<f64> {
        let mut counts = Array2::<f64>::zeros((self.n + 1, self.n_states));
        for path in self.states.chunks(self.n + 1) {
            for (k, &s) in path.iter().enumerate() {
                counts[[k, s as usize]] += 1.0;
            }
        }
        counts / self.n_paths as f64
    }
}

/// Cumulative transition probabilities per time and state, nonzero entries only.
struct Sampler {
    rows: Vec<Vec<Vec<(u16, f64)>>>,
    initial: Vec<(u16, f64)>,
}

fn cumulative(probs: impl Iterator<Item = f64>) -> Vec<(u16, f64)> {
    let mut acc = 0.0;
    probs
        .enumerate()
        .filter(|(_, p)| *p > 0.0)
        .map(|(j, p)| {
            acc += p;
            (j as u16, acc)
        })
        .collect()
}

fn draw(cdf: &[(u16, f64)], u: f64) -> u16 {
    cdf.iter()
        .find(|(_, c)| u < *c)
        .or(cdf.last())
        .map(|(j, _)| *j)
        .expect("every row has positive mass")
}

impl Sampler {
    fn new(seq: &TransitionSequence, initial: &[f64]) -> Self {
        let rows = seq
            .iter()
            .map(|q| {
                q.rows()
                    .into_iter()
                    .map(|row| cumulative(row.iter().copied()))
                    .collect()
            })
            .collect();
        Sampler {
            rows,
            initial: cumulative(initial.iter().copied()),
        }
    }

    fn fill(&self, seed: u64, index: usize, out: &mut [u16]) {
        let mut rng = path_rng(seed, index);
        let mut state = draw(&self.initial, rng.random());
        out[0] = state;
        for (k, slot) in out.iter_mut().enumerate().skip(1) {
            state = draw(&self.rows[k - 1][state as usize], rng.random());
            *slot = state;
        }
    }
}

/// The random stream of path `index`: the master seed picks the key and the
/// path index picks the stream.
pub fn path_rng(master_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    rng
}

fn validate_simulation(seq: &TransitionSequence, initial: &[f64], n_paths: usize) -> Result<()> {
    if n_paths == 0 {
        return Err(Error::InvalidParameter {
            name: "n_paths",
            value: 0.0,
            constraint: "must be at least 1",
        });
    }
    if initial.len() != seq.n_states() || seq.n_states() > u16::MAX as usize {
        return Err(Error::Shape(format!(
            "initial distribution has {} entries for {} states",
            initial.len(),
            seq.n_states()
        )));
    }
    Ok(())
}

/// Simulate `n_paths` paths on the rayon pool.
pub fn simulate(
    seq: &TransitionSequence,
    initial: &[f64],
    n_paths: usize,
    master_seed: u64,
) -> Result<PathEnsemble> {
    validate_simulation(seq, initial, n_paths)?;
    let sampler = Sampler::new(seq, initial);
    let stride = seq.n() + 1;
    let mut states = vec![0u16; n_paths * stride];
    states
        .par_chunks_mut(stride)
        .enumerate()
        .for_each(|(i, out)| sampler.fill(master_seed, i, out));
    Ok(PathEnsemble {
        n_paths,
        master_seed,
        n: seq.n(),
        n_states: seq.n_states(),
        states,
    })
}

/// Single-threaded [`simulate`]; produces the identical ensemble.
pub fn simulate_serial(
    seq: &TransitionSequence,
    initial: &[f64],
    n_paths: usize,
    master_seed: u64,
) -> Result<PathEnsemble> {
    validate_simulation(seq, initial, n_paths)?;
    let sampler = Sampler::new(seq, initial);
    let stride = seq.n() + 1;
    let mut states = vec![0u16; n_paths * stride];
    for (i, out) in states.chunks_mut(stride).enumerate() {
        sampler.fill(master_seed, i, out);
    }
    Ok(PathEnsemble {
        n_paths,
        master_seed,
        n: seq.n(),
        n_states: seq.n_states(),
        states,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

/// Neumaier-compensated sum in iteration order.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if f64::abs(sum) >= f64::abs(v) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn mean_and_error(values: &[f64]) -> McEstimate {
    let n = values.len();
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    let std_error = if n > 1 {
        let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
        (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
    } else {
        0.0
    };
    McEstimate {
        mean,
        std_error,
        n_paths: n,
    }
}

fn check_ensemble(ensemble: &PathEnsemble, c: &CashflowMatrix, m: &DiscountVector) -> Result<()> {
    if c.n() != ensemble.n || c.n_states() != ensemble.n_states || m.n() != ensemble.n {
        return Err(Error::Shape(format!(
            "ensemble covers {} states over {} periods; C is {}x{}, M has {}",
            ensemble.n_states,
            ensemble.n,
            c.n() + 1,
            c.n_states(),
            m.n() + 1
        )));
    }
    Ok(())
}

fn path_pv(path: &[u16], c: &CashflowMatrix, m: &DiscountVector) -> f64 {
    let c = c.as_array();
    path.iter()
        .enumerate()
        .map(|(k, &s)| m.get(k) * c[[k, s as usize]])
        .sum()
}

/// Mean and standard error of the per-path discounted cash sums.
pub fn mc_pv(
    ensemble: &PathEnsemble,
    c: &CashflowMatrix,
    m: &DiscountVector,
) -> Result<McEstimate> {
    check_ensemble(ensemble, c, m)?;
    let values: Vec<f64> = ensemble.paths().map(|p| path_pv(p, c, m)).collect();
    Ok(mean_and_error(&values))
}

/// Ratio estimate of the period premium: mean discounted benefits over mean
/// discounted premium-paying occupancy, with a delta-method standard error.
pub fn mc_premium(
    ensemble: &PathEnsemble,
    c_in: &CashflowMatrix,
    pay_states: &BTreeSet<StateId>,
    offsets: &ArrivalOffsets,
    term: usize,
    m: &DiscountVector,
) -> Result<McEstimate> {
    check_ensemble(ensemble, c_in, m)?;
    if term == 0 || term > ensemble.n {
        return Err(Error::OutOfRange(format!(
            "premium term m={term} outside 1..={}",
            ensemble.n
        )));
    }
    let pays = |s: u16, k: usize| {
        let id = s as StateId + 1;
        pay_states.contains(&id) && offsets.get(id).is_some_and(|d| k >= d) && k < term
    };
    let pairs: Vec<(f64, f64)> = ensemble
        .paths()
        .map(|path| {
            let annuity: f64 = path
                .iter()
                .enumerate()
                .filter(|&(k, &s)| pays(s, k))
                .map(|(k, _)| m.get(k))
                .sum();
            (path_pv(path, c_in, m), annuity)
        })
        .collect();
    let n = pairs.len();
    let num = compensated_sum(pairs.iter().map(|p| p.0)) / n as f64;
    let den = compensated_sum(pairs.iter().map(|p| p.1)) / n as f64;
    if den == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    let ratio = num / den;
    let std_error = if n > 1 {
        let ss = compensated_sum(pairs.iter().map(|(x, y)| {
            let r = x - ratio * y;
            r * r
        }));
        (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt() / den
    } else {
        0.0
    };
    Ok(McEstimate {
        mean: ratio,
        std_error,
        n_paths: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{shortest_arrival, StateModel};
    use ndarray::array;

    fn chain() -> TransitionSequence {
        let q = array![[0.9, 0.1, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]];
        TransitionSequence::from_matrices(vec![q.clone(), q]).unwrap()
    }

    fn unit_in_state_two() -> CashflowMatrix {
        CashflowMatrix::from_array(array![[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0]])
            .unwrap()
    }

    const INIT: [f64; 3] = [1.0, 0.0, 0.0];

    #[test]
    fn enumeration_of_three_paths() {
        let flat = DiscountVector::constant(1.0, 2).unwrap();
        let pv = enumerate_pv(&chain(), &INIT, &unit_in_state_two(), &flat).unwrap();
        assert!((pv - 0.19).abs() < 1e-15);
        let zero = CashflowMatrix::zeros(2, 3);
        assert_eq!(enumerate_pv(&chain(), &INIT, &zero, &flat).unwrap(), 0.0);
    }

    #[test]
    fn deterministic_chain_has_one_path() {
        let q = array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]];
        let seq = TransitionSequence::from_matrices(vec![q.clone(), q]).unwrap();
        let c =
            CashflowMatrix::from_array(array![[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 4.0]])
                .unwrap();
        let m = DiscountVector::constant(0.5, 2).unwrap();
        assert_eq!(enumerate_pv(&seq, &INIT, &c, &m).unwrap(), 1.0 + 1.0 + 1.0);
        let ens = simulate(&seq, &INIT, 100, 3).unwrap();
        let est = mc_pv(&ens, &c, &m).unwrap();
        assert_eq!((est.mean, est.std_error), (3.0, 0.0));
        let delta = shortest_arrival(&StateModel::with_transitions(3, &[(1, 2), (2, 3)])).unwrap();
        let p = mc_premium(&ens, &c, &BTreeSet::from([1, 2]), &delta, 2, &m).unwrap();
        assert_eq!(p.mean, 3.0 / 1.5);
        assert_eq!(p.std_error, 0.0);
    }

    #[test]
    fn enumeration_guard() {
        let q = Array2::<f64>::eye(9);
        let seq = TransitionSequence::from_matrices(vec![q]).unwrap();
        let c = CashflowMatrix::zeros(1, 9);
        let m = DiscountVector::constant(1.0, 1).unwrap();
        let mut init = vec![0.0; 9];
        init[0] = 1.0;
        assert!(matches!(
            enumerate_pv(&seq, &init, &c, &m),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn absorbing_start_gives_constant_paths() {
        let ens = simulate(&chain(), &[0.0, 0.0, 1.0], 50, 11).unwrap();
        assert!((0..50).all(|i| ens.path(i).iter().all(|&s| s == 2)));
    }

    #[test]
    fn same_seed_same_ensemble() {
        let a = simulate(&chain(), &INIT, 1000, 42).unwrap();
        let b = simulate(&chain(), &INIT, 1000, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, simulate_serial(&chain(), &INIT, 1000, 42).unwrap());
        let c = simulate(&chain(), &INIT, 1000, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn simulated_paths_follow_allowed_transitions() {
        let seq = chain();
        let ens = simulate(&seq, &INIT, 2000, 5).unwrap();
        for i in 0..ens.n_paths {
            assert_eq!(ens.state(i, 0), 1);
            for k in 0..ens.n() {
                assert!(seq.prob(k, ens.state(i, k), ens.state(i, k + 1)) > 0.0);
            }
        }
    }

    #[test]
    fn constant_payout_is_exact() {
        let ens = simulate(&chain(), &INIT, 10_000, 9).unwrap();
        let c = CashflowMatrix::from_array(Array2::ones((3, 3))).unwrap();
        let m = DiscountVector::constant(1.0, 2).unwrap();
        let est = mc_pv(&ens, &c, &m).unwrap();
        assert_eq!(est.mean, 3.0);
        assert_eq!(est.std_error, 0.0);
        let zero = mc_pv(&ens, &CashflowMatrix::zeros(2, 3), &m).unwrap();
        assert_eq!((zero.mean, zero.std_error), (0.0, 0.0));
    }

    #[test]
    fn zero_paths_rejected() {
        assert!(simulate(&chain(), &INIT, 0, 1).is_err());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let values = [1e16, 1.0, -1e16];
        assert_eq!(compensated_sum(values), 1.0);
    }
}

//! Discount vectors and expected present values: net single premium,
//! annuity-due values per state, and net period premiums payable in one or
//! several states.
//!
//! Annuity intervals are half-open: `annuity_due(.., k1, k2)` covers payment
//! times `k1..k2`, so a premium term `m` is the interval `[delta, m)`.

use std::collections::BTreeSet;
use std::path::Path;

use crate::cashflow::{self, CashflowMatrix};
use crate::error::{Error, Result};
use crate::lifetable::DistributionMatrix;
use crate::model::{ArrivalOffsets, StateId};

/// Expected discount factors `m_k = E(exp(-Y(k)))`, `k = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountVector {
    m: Vec<f64>,
}

impl DiscountVector {
    pub fn new(m: Vec<f64>) -> Result<Self> {
        let first = *m
            .first()
            .ok_or_else(|| Error::Shape("empty discount vector".into()))?;
        if (first - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "m_0",
                value: first,
                constraint: "the time-0 discount factor must be 1",
            });
        }
        if let Some(&bad) = m.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::InvalidParameter {
                name: "m_k",
                value: bad,
                constraint: "discount factors must be positive and finite",
            });
        }
        Ok(DiscountVector { m })
    }

    /// `(1, v, v^2, ..., v^n)` for a per-period discount factor `v` in `(0, 1]`.
    pub fn constant(v: f64, n: usize) -> Result<Self> {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "v",
                value: v,
                constraint: "must lie in (0, 1]",
            });
        }
        Ok(DiscountVector {
            m: (0..=n).map(|k| v.powi(k as i32)).collect(),
        })
    }

    /// Constant interest rate `r`, i.e. `v = 1 / (1 + r)`.
    pub fn from_rate(r: f64, n: usize) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "rate",
                value: r,
                constraint: "must be finite and nonnegative",
            });
        }
        DiscountVector::constant(1.0 / (1.0 + r), n)
    }

    pub fn n(&self) -> usize {
        self.m.len() - 1
    }

    pub fn get(&self, k: usize) -> f64 {
        self.m[k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.m
    }
}

/// Parse `n+1` discount factors separated by commas or whitespace.
pub fn parse_discount(text: &str, origin: &str, n: usize) -> Result<DiscountVector> {
    let mut m = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        for w in line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|w| !w.is_empty())
        {
            m.push(w.parse::<f64>().map_err(|_| {
                Error::parse(origin, idx + 1, format!("invalid discount factor '{w}'"))
            })?);
        }
    }
    if m.len() != n + 1 {
        return Err(Error::Shape(format!(
            "{origin}: expected {} discount factors, found {}",
            n + 1,
            m.len()
        )));
    }
    DiscountVector::new(m)
}

pub fn load_discount(path: impl AsRef<Path>, n: usize) -> Result<DiscountVector> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_discount(&text, &path.display().to_string(), n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PremiumKind {
    Single,
    Period,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PremiumResult {
    pub value: f64,
    pub kind: PremiumKind,
    pub pay_states: BTreeSet<StateId>,
    /// Premium-paying term; zero for a single premium.
    pub m: usize,
    /// Expected present value of the benefits.
    pub numerator: f64,
    /// Sum of the annuity values over the effective pay set; 1 for a single
    /// premium.
    pub denominator: f64,
}

fn check_shapes(c: &CashflowMatrix, d: &DistributionMatrix, m: &DiscountVector) -> Result<()> {
    if c.as_array().dim() != d.as_array().dim() || m.n() != d.n() {
        return Err(Error::Shape(format!(
            "C is {:?}, D is {:?}, M has {} entries",
            c.as_array().dim(),
            d.as_array().dim(),
            m.n() + 1
        )));
    }
    Ok(())
}

/// `M^T Diag(C D^T) S = sum_k m_k sum_j C[k][j] D[k][j]`.
pub fn expected_pv(c: &CashflowMatrix, d: &DistributionMatrix, m: &DiscountVector) -> Result<f64> {
    check_shapes(c, d, m)?;
    let (c, d) = (c.as_array(), d.as_array());
    let mut total = 0.0;
    for k in 0..c.nrows() {
        let diag: f64 = c.row(k).iter().zip(d.row(k)).map(|(x, p)| x * p).sum();
        total += m.get(k) * diag;
    }
    Ok(total)
}

pub fn net_single_premium(
    c_in: &CashflowMatrix,
    d: &DistributionMatrix,
    m: &DiscountVector,
) -> Result<PremiumResult> {
    check_benefits(c_in)?;
    let value = expected_pv(c_in, d, m)?;
    Ok(PremiumResult {
        value,
        kind: PremiumKind::Single,
        pay_states: BTreeSet::new(),
        m: 0,
        numerator: value,
        denominator: 1.0,
    })
}

fn check_benefits(c_in: &CashflowMatrix) -> Result<()> {
    if let Some(((k, j), &value)) = c_in.as_array().indexed_iter().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeBenefit {
            k,
            state: j + 1,
            value,
        });
    }
    Ok(())
}

fn check_interval(d: &DistributionMatrix, i: StateId, k1: usize, k2: usize) -> Result<()> {
    if i == 0 || i > d.n_states() || k1 > k2 || k2 > d.n() + 1 {
        return Err(Error::OutOfRange(format!(
            "annuity for state {i} over [{k1}, {k2}) with N={} and n={}",
            d.n_states(),
            d.n()
        )));
    }
    Ok(())
}

/// Value at time 0 of a unit annuity-due paid at times `k1..k2` while the
/// process is in state `i`: `sum_{t=k1}^{k2-1} m_t P*_i(t)`.
pub fn annuity_due(
    d: &DistributionMatrix,
    m: &DiscountVector,
    i: StateId,
    k1: usize,
    k2: usize,
) -> Result<f64> {
    check_interval(d, i, k1, k2)?;
    if m.n() != d.n() {
        return Err(Error::Shape("M and D have different horizons".into()));
    }
    let d = d.as_array();
    let mut total = 0.0;
    for t in k1..k2 {
        total += m.get(t) * d[[t, i - 1]];
    }
    Ok(total)
}

/// Same value as [`annuity_due`] evaluated as the contraction
/// `M^T (sum_t I_{t+1} I_{t+1}^T) D J_i`: the time mask is applied to `M`
/// and the masked row vector is multiplied through `D`.
pub fn annuity_due_matrix(
    d: &DistributionMatrix,
    m: &DiscountVector,
    i: StateId,
    k1: usize,
    k2: usize,
) -> Result<f64> {
    check_interval(d, i, k1, k2)?;
    if m.n() != d.n() {
        return Err(Error::Shape("M and D have different horizons".into()));
    }
    let mask: Vec<f64> = (0..=d.n())
        .map(|t| if (k1..k2).contains(&t) { 1.0 } else { 0.0 })
        .collect();
    Ok(masked_contraction(d, m, &mask, i))
}

/// `(M^T Diag(mask)) D J_i`, summed over all times in order.
fn masked_contraction(d: &DistributionMatrix, m: &DiscountVector, mask: &[f64], i: StateId) -> f64 {
    let d = d.as_array();
    let weights: Vec<f64> = m
        .as_slice()
        .iter()
        .zip(mask)
        .map(|(mk, w)| mk * w)
        .collect();
    let mut total = 0.0;
    for (t, w) in weights.iter().enumerate() {
        total += w * d[[t, i - 1]];
    }
    total
}

/// Level premium paid in advance at times `0..m` while the insured is in
/// state 1. The denominator is formed with the masked identity
/// `I - sum_{k>m} I_k I_k^T` and equals `annuity_due(D, M, 1, 0, m)`.
pub fn period_premium_initial(
    c_in: &CashflowMatrix,
    d: &DistributionMatrix,
    m: &DiscountVector,
    term: usize,
) -> Result<PremiumResult> {
    if term == 0 || term > d.n() {
        return Err(Error::OutOfRange(format!(
            "premium term m={term} outside 1..={}",
            d.n()
        )));
    }
    let single = net_single_premium(c_in, d, m)?;
    let mask: Vec<f64> = (0..=d.n())
        .map(|t| if t < term { 1.0 } else { 0.0 })
        .collect();
    let denominator = masked_contraction(d, m, &mask, 1);
    if denominator == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(PremiumResult {
        value: single.value / denominator,
        kind: PremiumKind::Period,
        pay_states: BTreeSet::from([1]),
        m: term,
        numerator: single.value,
        denominator,
    })
}

/// Net period premium payable in advance at times `k < m` whenever the
/// process is in one of `pay_states`:
///
/// `p = M^T Diag(C_in D^T) S / sum_{i in pay, delta(i) < m} a_i(delta(i), m)`.
///
/// Pay states that cannot be reached before `m` contribute nothing.
pub fn period_premium(
    c_in: &CashflowMatrix,
    d: &DistributionMatrix,
    m: &DiscountVector,
    pay_states: &BTreeSet<StateId>,
    offsets: &ArrivalOffsets,
    term: usize,
) -> Result<PremiumResult> {
    if term == 0 || term > d.n() {
        return Err(Error::OutOfRange(format!(
            "premium term m={term} outside 1..={}",
            d.n()
        )));
    }
    let single = net_single_premium(c_in, d, m)?;
    let mut denominator = 0.0;
    let mut any = false;
    for &i in pay_states {
        let Some(start) = offsets.get(i).filter(|&s| s < term) else {
            continue;
        };
        any = true;
        denominator += annuity_due(d, m, i, start, term)?;
    }
    if !any {
        return Err(Error::EmptyPaySet { m: term });
    }
    if denominator == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(PremiumResult {
        value: single.value / denominator,
        kind: PremiumKind::Period,
        pay_states: pay_states.clone(),
        m: term,
        numerator: single.value,
        denominator,
    })
}

/// `E(L)` for the total loss with benefits `c_in` and premiums `c_out`.
/// Zero exactly when the premiums are net.
pub fn equivalence_residual(
    c_in: &CashflowMatrix,
    c_out: &CashflowMatrix,
    d: &DistributionMatrix,
    m: &DiscountVector,
) -> Result<f64> {
    expected_pv(&c_in.add(c_out)?, d, m)
}

/// Residual of a computed period premium against its own outflow matrix.
pub fn premium_residual(
    c_in: &CashflowMatrix,
    premium: &PremiumResult,
    offsets: &ArrivalOffsets,
    d: &DistributionMatrix,
    m: &DiscountVector,
) -> Result<f64> {
    let c_out = match premium.kind {
        PremiumKind::Period => cashflow::premium_outflow(
            premium.value,
            &premium.pay_states,
            offsets,
            premium.m,
            d.n(),
            d.n_states(),
        )?,
        PremiumKind::Single => {
            let mut spec = cashflow::CashflowSpec::default();
            spec.push(1, 0, 0, -premium.value);
            cashflow::build(&spec, d.n(), d.n_states())?
        }
    };
    equivalence_residual(c_in, &c_out, d, m)
}

//! Cash-flow matrices attached to the states of an extended model.
//!
//! Entry `[k][j]` is the amount paid at time `k` when the process is in
//! state `j`. Benefits are positive (inflows to the total loss), premiums
//! negative.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{ArrivalOffsets, Attachment, StateId};

/// Number of states in the extended dread-disease layout the builders target.
pub const DREAD_DISEASE_STATES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct CashflowMatrix {
    c: Array2<f64>,
}

impl CashflowMatrix {
    pub fn zeros(n: usize, n_states: usize) -> Self {
        CashflowMatrix {
            c: Array2::zeros((n + 1, n_states)),
        }
    }

    pub fn from_array(c: Array2<f64>) -> Result<Self> {
        if c.nrows() == 0 {
            return Err(Error::Shape("cash-flow matrix has no rows".into()));
        }
        if let Some(v) = c.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "cash flow",
                value: *v,
                constraint: "entries must be finite",
            });
        }
        Ok(CashflowMatrix { c })
    }

    pub fn n(&self) -> usize {
        self.c.nrows() - 1
    }

    pub fn n_states(&self) -> usize {
        self.c.ncols()
    }

    /// Amount at time `k` in state `j` (1-based).
    pub fn get(&self, k: usize, j: StateId) -> f64 {
        self.c[[k, j - 1]]
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.c
    }

    pub fn add(&self, other: &CashflowMatrix) -> Result<CashflowMatrix> {
        if self.c.dim() != other.c.dim() {
            return Err(Error::Shape(format!(
                "cannot add {:?} and {:?} cash-flow matrices",
                self.c.dim(),
                other.c.dim()
            )));
        }
        Ok(CashflowMatrix {
            c: &self.c + &other.c,
        })
    }

    pub fn scale(&self, factor: f64) -> CashflowMatrix {
        CashflowMatrix {
            c: &self.c * factor,
        }
    }

    /// Comma-separated rows, one per time, with a `k,s1..sN` header.
    pub fn to_csv(&self, precision: usize) -> String {
        let mut out = String::from("k");
        for j in 1..=self.n_states() {
            out.push_str(&format!(",s{j}"));
        }
        out.push('\n');
        for (k, row) in self.c.rows().into_iter().enumerate() {
            out.push_str(&k.to_string());
            for v in row {
                out.push_str(&format!(",{v:.precision$}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowEntry {
    pub state: StateId,
    pub from: usize,
    pub to: usize,
    pub amount: f64,
}

/// Additive cash-flow description: each entry pays `amount` in `state` at
/// every time in `from..=to`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CashflowSpec {
    pub entries: Vec<FlowEntry>,
}

impl CashflowSpec {
    pub fn push(&mut self, state: StateId, from: usize, to: usize, amount: f64) {
        self.entries.push(FlowEntry {
            state,
            from,
            to,
            amount,
        });
    }

    /// Benefits carried by states of an extended model, paid on arrival, so
    /// from time 1 onwards.
    pub fn from_attachments(attachments: &[Attachment], n: usize) -> Self {
        let mut spec = CashflowSpec::default();
        for a in attachments {
            match a.benefit.schedule {
                None => spec.push(a.state, 1, n, a.benefit.amount),
                Some(_) => {
                    for k in 1..=n {
                        spec.push(a.state, k, k, a.benefit.at(k));
                    }
                }
            }
        }
        spec
    }
}

/// Parse `flow <state> <k1> <k2> <amount>` lines; `#` starts a comment.
pub fn parse_cashflow_spec(text: &str, origin: &str) -> Result<CashflowSpec> {
    let mut spec = CashflowSpec::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::parse(origin, idx + 1, msg);
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["flow", state, k1, k2, amount] => {
                let int = |w: &str| {
                    w.parse::<usize>()
                        .map_err(|_| err(format!("invalid integer '{w}'")))
                };
                let amount: f64 = amount
                    .parse()
                    .map_err(|_| err(format!("invalid amount '{amount}'")))?;
                spec.push(int(state)?, int(k1)?, int(k2)?, amount);
            }
            _ => {
                return Err(err(format!(
                    "expected 'flow <state> <k1> <k2> <amount>', got '{line}'"
                )))
            }
        }
    }
    Ok(spec)
}

pub fn load_cashflow_spec(path: impl AsRef<Path>) -> Result<CashflowSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cashflow_spec(&text, &path.display().to_string())
}

pub fn build(spec: &CashflowSpec, n: usize, n_states: usize) -> Result<CashflowMatrix> {
    let mut c = Array2::<f64>::zeros((n + 1, n_states));
    for e in &spec.entries {
        if e.state == 0 || e.state > n_states {
            return Err(Error::OutOfRange(format!(
                "flow state {} outside 1..={n_states}",
                e.state
            )));
        }
        if e.from > e.to || e.to > n {
            return Err(Error::OutOfRange(format!(
                "flow times {}..={} outside 0..={n}",
                e.from, e.to
            )));
        }
        if !e.amount.is_finite() {
            return Err(Error::InvalidParameter {
                name: "flow amount",
                value: e.amount,
                constraint: "must be finite",
            });
        }
        for k in e.from..=e.to {
            c[[k, e.state - 1]] += e.amount;
        }
    }
    Ok(CashflowMatrix { c })
}

/// Temporary life cover of 1 with a fraction `lambda` paid on terminal-stage
/// diagnosis (state 3) and the rest, `1 - lambda`, on death from the
/// terminal stages (state 9). Death from states 1 and 2 pays 1 (state 7).
pub fn accelerated_life(lambda: f64, n: usize) -> Result<CashflowMatrix> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            constraint: "must lie in [0, 1]",
        });
    }
    let mut c = CashflowMatrix::zeros(n, DREAD_DISEASE_STATES);
    for k in 1..=n {
        c.c[[k, 2]] = lambda;
        c.c[[k, 6]] = 1.0;
        if k >= 2 {
            c.c[[k, 8]] = 1.0 - lambda;
        }
    }
    Ok(c)
}

/// Under full acceleration the cover ends at terminal-stage diagnosis, so no
/// premium is defined for pay sets that include the terminal stages.
pub fn accelerated_premium_defined(lambda: f64, pay_states: &BTreeSet<StateId>) -> bool {
    lambda < 1.0 || !pay_states.iter().any(|s| (3..=6).contains(s))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdParams {
    /// Additional lump sum on terminal-stage diagnosis.
    pub additional: f64,
    /// Annuity paid in each terminal stage.
    pub annuity: f64,
    pub death: f64,
    pub endowment: f64,
}

impl Default for DdParams {
    fn default() -> Self {
        DdParams {
            additional: 1.0,
            annuity: 0.25,
            death: 1.0,
            endowment: 1.0,
        }
    }
}

/// Dread-disease benefit added to an `n`-year life insurance:
/// case 1 a lump sum on diagnosis, case 2 an annuity over the terminal
/// stages, case 3 case 1 plus a pure endowment at `n`.
pub fn dd_case(case: u32, params: DdParams, n: usize) -> Result<CashflowMatrix> {
    let mut c = CashflowMatrix::zeros(n, DREAD_DISEASE_STATES);
    match case {
        1 | 3 => {
            for k in 1..=n {
                c.c[[k, 2]] = params.additional;
            }
        }
        2 => {
            for stage in 3..=6 {
                for k in (stage - 2)..=n {
                    c.c[[k, stage - 1]] = params.annuity;
                }
            }
        }
        other => return Err(Error::UnknownCase(other)),
    }
    for k in 1..=n {
        c.c[[k, 6]] = params.death;
        if k >= 2 {
            c.c[[k, 8]] = params.death;
        }
    }
    if case == 3 {
        for j in 0..6 {
            c.c[[n, j]] += params.endowment;
        }
    }
    Ok(c)
}

/// Split into inflows (nonnegative part) and outflows (nonpositive part).
/// The two parts add back to the input exactly.
pub fn split(c: &CashflowMatrix) -> (CashflowMatrix, CashflowMatrix) {
    let c_in = c.c.mapv(|v| if v >= 0.0 { v } else { 0.0 });
    let c_out = c.c.mapv(|v| if v <= 0.0 { v } else { 0.0 });
    (CashflowMatrix { c: c_in }, CashflowMatrix { c: c_out })
}

/// Premium `p` collected in advance at times `delta(i)..m-1` in every pay
/// state `i` that can be reached before `m`, recorded as an outflow.
pub fn premium_outflow(
    p: f64,
    pay_states: &BTreeSet<StateId>,
    offsets: &ArrivalOffsets,
    m: usize,
    n: usize,
    n_states: usize,
) -> Result<CashflowMatrix> {
    if m > n {
        return Err(Error::OutOfRange(format!(
            "premium term m={m} exceeds n={n}"
        )));
    }
    let mut c = CashflowMatrix::zeros(n, n_states);
    let mut any = false;
    for &i in pay_states {
        if i == 0 || i > n_states {
            return Err(Error::OutOfRange(format!(
                "pay state {i} outside 1..={n_states}"
            )));
        }
        let Some(start) = offsets.get(i).filter(|&d| d < m) else {
            continue;
        };
        any = true;
        for k in start..m {
            c.c[[k, i - 1]] = -p;
        }
    }
    if !any {
        return Err(Error::EmptyPaySet { m });
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::shortest_arrival;

    fn column(c: &CashflowMatrix, j: StateId) -> Vec<f64> {
        (0..=c.n()).map(|k| c.get(k, j)).collect()
    }

    #[test]
    fn build_single_entry() {
        let mut spec = CashflowSpec::default();
        spec.push(2, 1, 2, 1.0);
        let c = build(&spec, 2, 3).unwrap();
        assert_eq!(column(&c, 2), vec![0.0, 1.0, 1.0]);
        assert_eq!(column(&c, 1), vec![0.0; 3]);
    }

    #[test]
    fn empty_spec_builds_zero_matrix() {
        let c = build(&CashflowSpec::default(), 4, 5).unwrap();
        assert!(c.as_array().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn overlapping_entries_add() {
        let mut spec = CashflowSpec::default();
        spec.push(3, 1, 1, 0.25);
        spec.push(3, 1, 2, 0.25);
        let c = build(&spec, 2, 3).unwrap();
        assert_eq!(c.get(1, 3), 0.5);
        assert_eq!(c.get(2, 3), 0.25);
    }

    #[test]
    fn build_rejects_out_of_range() {
        let mut spec = CashflowSpec::default();
        spec.push(4, 0, 1, 1.0);
        assert!(build(&spec, 2, 3).is_err());
        let mut spec = CashflowSpec::default();
        spec.push(1, 0, 3, 1.0);
        assert!(build(&spec, 2, 3).is_err());
        let mut spec = CashflowSpec::default();
        spec.push(1, 2, 1, 1.0);
        assert!(build(&spec, 2, 3).is_err());
    }

    #[test]
    fn spec_file_format() {
        let spec =
            parse_cashflow_spec("# benefits\nflow 3 1 2 0.5\n\nflow 7 1 2 1\n", "f").unwrap();
        assert_eq!(spec.entries.len(), 2);
        assert_eq!(
            spec.entries[0],
            FlowEntry {
                state: 3,
                from: 1,
                to: 2,
                amount: 0.5
            }
        );
        let err = parse_cashflow_spec("flow 3 1\n", "f").unwrap_err();
        assert!(err.to_string().starts_with("f:1:"));
    }

    #[test]
    fn accelerated_half() {
        let c = accelerated_life(0.5, 25).unwrap();
        assert_eq!(c.n(), 25);
        for k in 0..=25 {
            let row: Vec<f64> = (1..=10).map(|j| c.get(k, j)).collect();
            let expected = match k {
                0 => vec![0.0; 10],
                1 => vec![0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
                _ => vec![0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 1.0, 0.0, 0.5, 0.0],
            };
            assert_eq!(row, expected, "row {k}");
        }
    }

    #[test]
    fn accelerated_limits() {
        let c0 = accelerated_life(0.0, 5).unwrap();
        assert!(column(&c0, 3).iter().all(|&v| v == 0.0));
        let c1 = accelerated_life(1.0, 5).unwrap();
        assert!(column(&c1, 9).iter().all(|&v| v == 0.0));
        assert_eq!(column(&c1, 3), vec![0.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert!(accelerated_life(1.5, 5).is_err());
        assert!(accelerated_life(-0.1, 5).is_err());
    }

    #[test]
    fn case_one_rows() {
        let c = dd_case(1, DdParams::default(), 25).unwrap();
        let row = |k: usize| (1..=10).map(|j| c.get(k, j)).collect::<Vec<_>>();
        assert_eq!(row(0), vec![0.0; 10]);
        assert_eq!(
            row(1),
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            row(25),
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn case_two_staggered_annuity() {
        let c = dd_case(2, DdParams::default(), 25).unwrap();
        let row = |k: usize| (1..=10).map(|j| c.get(k, j)).collect::<Vec<_>>();
        assert_eq!(
            row(1),
            vec![0.0, 0.0, 0.25, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            row(2),
            vec![0.0, 0.0, 0.25, 0.25, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0]
        );
        assert_eq!(
            row(3),
            vec![0.0, 0.0, 0.25, 0.25, 0.25, 0.0, 1.0, 0.0, 1.0, 0.0]
        );
        assert_eq!(
            row(4),
            vec![0.0, 0.0, 0.25, 0.25, 0.25, 0.25, 1.0, 0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn case_three_last_row() {
        let c = dd_case(3, DdParams::default(), 25).unwrap();
        let last: Vec<f64> = (1..=10).map(|j| c.get(25, j)).collect();
        assert_eq!(last, vec![1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
        assert!(matches!(
            dd_case(4, DdParams::default(), 25),
            Err(Error::UnknownCase(4))
        ));
    }

    #[test]
    fn split_keeps_signs_apart() {
        let c = CashflowMatrix::from_array(ndarray::array![[1.0, -0.5]]).unwrap();
        let (c_in, c_out) = split(&c);
        assert_eq!(c_in.as_array(), &ndarray::array![[1.0, 0.0]]);
        assert_eq!(c_out.as_array(), &ndarray::array![[0.0, -0.5]]);
        let (_, out) = split(&accelerated_life(0.3, 4).unwrap());
        assert!(out.as_array().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn premium_outflow_initial_state() {
        let model = crate::model::StateModel::with_transitions(2, &[(1, 2)]);
        let delta = shortest_arrival(&model).unwrap();
        let c = premium_outflow(2.0, &BTreeSet::from([1]), &delta, 3, 4, 2).unwrap();
        assert_eq!(column(&c, 1), vec![-2.0, -2.0, -2.0, 0.0, 0.0]);
        assert_eq!(column(&c, 2), vec![0.0; 5]);
    }

    #[test]
    fn premium_outflow_uses_arrival_offsets() {
        let model = fixtures::dread_disease_model();
        let delta = shortest_arrival(&model).unwrap();
        let pay: BTreeSet<_> = (1..=6).collect();
        let c = premium_outflow(1.0, &pay, &delta, 25, 25, 10).unwrap();
        for (state, start) in [(1, 0), (2, 1), (3, 1), (4, 2), (5, 3), (6, 4)] {
            for k in 0..=25 {
                let expected = if (start..25).contains(&k) { -1.0 } else { 0.0 };
                assert_eq!(c.get(k, state), expected, "state {state}, k {k}");
            }
        }
    }

    #[test]
    fn premium_outflow_needs_reachable_pay_state() {
        let model = fixtures::dread_disease_model();
        let delta = shortest_arrival(&model).unwrap();
        let err = premium_outflow(1.0, &BTreeSet::from([6]), &delta, 3, 25, 10).unwrap_err();
        assert!(matches!(err, Error::EmptyPaySet { m: 3 }));
    }

    #[test]
    fn degenerate_full_acceleration() {
        assert!(accelerated_premium_defined(1.0, &BTreeSet::from([1, 2])));
        assert!(!accelerated_premium_defined(1.0, &(1..=6).collect()));
        assert!(accelerated_premium_defined(0.75, &(1..=6).collect()));
    }
}

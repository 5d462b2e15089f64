//! Multiple increment-decrement tables and the Markov chain they define.
//!
//! A table lists, for each age offset `k = 0..=n`, the occupancy `l_i` of
//! every transient state that is not reflex and the decrements `d_i_j` out of
//! it. Reflex occupancies are inferred from their inflows, transition
//! matrices are formed as decrement/occupancy quotients and the distribution
//! matrix stacks the state-occupancy vectors `P(0)..P(n)`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::model::{StateId, StateModel};

pub const STOCHASTIC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct IncrementDecrementTable {
    pub entry_age: u32,
    n_rows: usize,
    occupancy: BTreeMap<StateId, Vec<f64>>,
    decrements: BTreeMap<(StateId, StateId), Vec<f64>>,
}

impl IncrementDecrementTable {
    /// Build a table from columns, checking counts and the decrement bound.
    pub fn new(
        entry_age: u32,
        occupancy: BTreeMap<StateId, Vec<f64>>,
        decrements: BTreeMap<(StateId, StateId), Vec<f64>>,
    ) -> Result<Self> {
        let n_rows = occupancy
            .values()
            .chain(decrements.values())
            .map(Vec::len)
            .next()
            .unwrap_or(0);
        if n_rows == 0 {
            return Err(Error::Shape("table has no rows".into()));
        }
        for (name, col) in occupancy.iter().map(|(i, c)| (format!("l_{i}"), c)).chain(
            decrements
                .iter()
                .map(|((i, j), c)| (format!("d_{i}_{j}"), c)),
        ) {
            if col.len() != n_rows {
                return Err(Error::Shape(format!(
                    "column {name} has {} rows, expected {n_rows}",
                    col.len()
                )));
            }
            for (k, &v) in col.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteCount { k, column: name });
                }
                if v < 0.0 {
                    return Err(Error::NegativeCount { k, column: name });
                }
            }
        }
        let table = IncrementDecrementTable {
            entry_age,
            n_rows,
            occupancy,
            decrements,
        };
        table.check_decrement_bound()?;
        Ok(table)
    }

    fn check_decrement_bound(&self) -> Result<()> {
        for (&state, l) in &self.occupancy {
            for (k, &occupancy) in l.iter().enumerate() {
                let decrements: f64 = self
                    .decrements
                    .range((state, 0)..(state + 1, 0))
                    .map(|(_, c)| c[k])
                    .sum();
                if decrements > occupancy * (1.0 + STOCHASTIC_TOLERANCE) {
                    return Err(Error::DecrementExceedsOccupancy {
                        k,
                        state,
                        decrements,
                        occupancy,
                    });
                }
            }
        }
        Ok(())
    }

    /// Horizon `n`; the table has rows `k = 0..=n`.
    pub fn n(&self) -> usize {
        self.n_rows - 1
    }

    pub fn occupancy(&self, state: StateId) -> Option<&[f64]> {
        self.occupancy.get(&state).map(Vec::as_slice)
    }

    pub fn decrement(&self, from: StateId, to: StateId) -> Option<&[f64]> {
        self.decrements.get(&(from, to)).map(Vec::as_slice)
    }

    pub fn occupied_states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.occupancy.keys().copied()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.occupancy
            .keys()
            .map(|i| format!("l_{i}"))
            .chain(self.decrements.keys().map(|(i, j)| format!("d_{i}_{j}")))
            .collect()
    }
}

/// States whose occupancy is tabulated: transient and not reflex.
fn table_states(model: &StateModel) -> impl Iterator<Item = StateId> + '_ {
    model
        .states()
        .filter(|&s| !model.is_absorbing(s) && !model.reflex.contains(&s))
}

/// A transitional state with one exit sends its whole occupancy through it,
/// so its decrement column may be omitted.
fn exit_implied(model: &StateModel, state: StateId) -> bool {
    model.transitional.contains(&state) && model.out_degree(state) == 1
}

enum Column {
    Occupancy(StateId),
    Decrement(StateId, StateId),
}

fn parse_header(name: &str) -> Option<Column> {
    let parts: Vec<&str> = name.split('_').collect();
    match parts.as_slice() {
        ["l", i] => i.parse().ok().map(Column::Occupancy),
        ["d", i, j] => Some(Column::Decrement(i.parse().ok()?, j.parse().ok()?)),
        _ => None,
    }
}

/// Parse a life table in CSV form against `model`.
///
/// The header is `k,l_<i>...,d_<i>_<j>...`; rows run `k = 0..=n` in order.
/// A comment line `# entry_age <x>` sets the entry age (default 0).
pub fn parse_table(
    text: &str,
    origin: &str,
    model: &StateModel,
) -> Result<IncrementDecrementTable> {
    let mut entry_age = 0;
    for (idx, line) in text.lines().enumerate() {
        if let Some(rest) = line.trim().strip_prefix('#') {
            let mut words = rest.split_whitespace();
            if words.next() == Some("entry_age") {
                let w = words.next().unwrap_or("");
                entry_age = w.parse().map_err(|_| {
                    Error::parse(origin, idx + 1, format!("invalid entry age '{w}'"))
                })?;
            }
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let csv_err = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line() as usize);
        Error::parse(origin, line, e.to_string())
    };
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.get(0) != Some("k") {
        return Err(Error::parse(origin, 1, "first column must be 'k'"));
    }

    let required: BTreeSet<String> = table_states(model)
        .flat_map(|i| {
            std::iter::once(format!("l_{i}")).chain(
                model
                    .successors(i)
                    .filter(move |_| !exit_implied(model, i))
                    .map(move |j| format!("d_{i}_{j}")),
            )
        })
        .collect();
    let allowed = |col: &Column| match *col {
        Column::Occupancy(i) => table_states(model).any(|s| s == i),
        Column::Decrement(i, j) => {
            model.transitions.contains(&(i, j)) && table_states(model).any(|s| s == i)
        }
    };

    let mut columns = Vec::new();
    let mut seen = BTreeSet::new();
    for name in headers.iter().skip(1) {
        let col = parse_header(name)
            .filter(allowed)
            .ok_or_else(|| Error::UnexpectedColumn {
                column: name.to_string(),
            })?;
        if !seen.insert(name.to_string()) {
            return Err(Error::parse(origin, 1, format!("duplicate column {name}")));
        }
        columns.push(col);
    }
    if let Some(missing) = required.iter().find(|c| !seen.contains(*c)) {
        return Err(Error::MissingColumn {
            column: missing.clone(),
        });
    }

    let mut values: Vec<Vec<f64>> = vec![Vec::new(); columns.len()];
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let err = |msg: String| Error::parse(origin, line, msg);
        let k_field = record.get(0).unwrap_or("");
        if k_field.parse::<usize>().ok() != Some(k) {
            return Err(err(format!("expected k={k}, found '{k_field}'")));
        }
        for (c, field) in record.iter().skip(1).enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                err(format!(
                    "invalid number '{field}' in column {}",
                    &headers[c + 1]
                ))
            })?;
            values[c].push(v);
        }
    }

    let mut occupancy = BTreeMap::new();
    let mut decrements = BTreeMap::new();
    for (col, vals) in columns.into_iter().zip(values) {
        match col {
            Column::Occupancy(i) => {
                occupancy.insert(i, vals);
            }
            Column::Decrement(i, j) => {
                decrements.insert((i, j), vals);
            }
        }
    }
    IncrementDecrementTable::new(entry_age, occupancy, decrements)
}

pub fn load_table(path: impl AsRef<Path>, model: &StateModel) -> Result<IncrementDecrementTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text, &path.display().to_string(), model)
}

/// Complete a table with the columns its model determines on its own:
/// implied exits of single-exit transitional states (`d = l`), and for each
/// reflex state `r` with successor `s`, `l_r(k) = sum_i d_i_r(k-1)` (zero at
/// `k = 0`) and `d_r_s(k) = l_r(k)`.
pub fn infer_reflex_columns(
    table: &IncrementDecrementTable,
    model: &StateModel,
) -> Result<IncrementDecrementTable> {
    let rows = table.n_rows;
    let mut out = table.clone();
    for state in table_states(model).filter(|&s| exit_implied(model, s)) {
        let succ = model.successors(state).next().expect("one exit");
        if !out.decrements.contains_key(&(state, succ)) {
            let l = out
                .occupancy
                .get(&state)
                .cloned()
                .unwrap_or_else(|| vec![0.0; rows]);
            out.decrements.insert((state, succ), l);
        }
    }

    let mut pending: BTreeSet<StateId> = model.reflex.clone();
    while !pending.is_empty() {
        let ready: Vec<StateId> = pending
            .iter()
            .copied()
            .filter(|&r| model.predecessors(r).all(|p| !pending.contains(&p)))
            .collect();
        if ready.is_empty() {
            return Err(Error::ReflexCycle(pending.into_iter().collect()));
        }
        for r in ready {
            pending.remove(&r);
            let inbound: Vec<StateId> = model.predecessors(r).collect();
            if inbound.is_empty() {
                return Err(Error::ReflexWithoutInflow { state: r });
            }
            let mut l = vec![0.0; rows];
            for k in 1..rows {
                l[k] = inbound
                    .iter()
                    .map(|&i| out.decrements.get(&(i, r)).map_or(0.0, |d| d[k - 1]))
                    .sum();
            }
            if let Some(s) = model.successors(r).next() {
                out.decrements.insert((r, s), l.clone());
            }
            out.occupancy.insert(r, l);
        }
    }
    Ok(out)
}

/// Row-stochastic matrices `Q(0)..Q(n-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSequence {
    matrices: Vec<Array2<f64>>,
}

impl TransitionSequence {
    /// Wrap prebuilt matrices after checking they are square, of equal size,
    /// row-stochastic and have entries in `[0, 1]`.
    pub fn from_matrices(matrices: Vec<Array2<f64>>) -> Result<Self> {
        let size = matrices.first().map_or(0, |q| q.nrows());
        for (k, q) in matrices.iter().enumerate() {
            if q.nrows() != size || q.ncols() != size {
                return Err(Error::Shape(format!("Q({k}) is not {size}x{size}")));
            }
            for (i, row) in q.rows().into_iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    if !(-STOCHASTIC_TOLERANCE..=1.0 + STOCHASTIC_TOLERANCE).contains(&v) {
                        return Err(Error::ProbabilityOutOfRange {
                            k,
                            from: i + 1,
                            to: j + 1,
                            value: v,
                        });
                    }
                }
                let sum: f64 = row.sum();
                if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                    return Err(Error::Shape(format!(
                        "row {} of Q({k}) sums to {sum}",
                        i + 1
                    )));
                }
            }
        }
        Ok(TransitionSequence { matrices })
    }

    pub fn n(&self) -> usize {
        self.matrices.len()
    }

    pub fn n_states(&self) -> usize {
        self.matrices.first().map_or(0, |q| q.nrows())
    }

    pub fn q(&self, k: usize) -> &Array2<f64> {
        &self.matrices[k]
    }

    /// `q*_ij(k)` with 1-based state ids.
    pub fn prob(&self, k: usize, from: StateId, to: StateId) -> f64 {
        self.matrices[k][[from - 1, to - 1]]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Array2<f64>> {
        self.matrices.iter()
    }
}

/// Build `Q(k)` for `k = 0..n-1` from a table over the extended model.
///
/// Off-diagonal entries are `d_i_j(k) / l_i(k)` and the diagonal is the
/// retained share `(l_i(k) - sum_j d_i_j(k)) / l_i(k)`, which is zero for
/// transitional states. Reflex rows send everything to the successor,
/// absorbing rows and rows of unoccupied states are identity rows.
pub fn transition_sequence(
    table: &IncrementDecrementTable,
    model: &StateModel,
) -> Result<TransitionSequence> {
    let n_states = model.n_states;
    let mut matrices = Vec::with_capacity(table.n());
    for k in 0..table.n() {
        let mut q = Array2::<f64>::zeros((n_states, n_states));
        for i in model.states() {
            if model.is_absorbing(i) {
                q[[i - 1, i - 1]] = 1.0;
                continue;
            }
            if model.reflex.contains(&i) {
                let s = model.successors(i).next().expect("reflex has one exit");
                q[[i - 1, s - 1]] = 1.0;
                continue;
            }
            let l = table.occupancy(i).ok_or_else(|| Error::MissingColumn {
                column: format!("l_{i}"),
            })?[k];
            if l == 0.0 {
                q[[i - 1, i - 1]] = 1.0;
                continue;
            }
            let mut leaving = 0.0;
            for j in model.successors(i) {
                let d = match table.decrement(i, j) {
                    Some(col) => col[k],
                    None if exit_implied(model, i) => l,
                    None => {
                        return Err(Error::MissingColumn {
                            column: format!("d_{i}_{j}"),
                        })
                    }
                };
                let p = d / l;
                check_probability(k, i, j, p)?;
                q[[i - 1, j - 1]] = p;
                leaving += d;
            }
            let mut stay = (l - leaving) / l;
            if model.transitional.contains(&i) {
                if stay.abs() > STOCHASTIC_TOLERANCE {
                    return Err(Error::TransitionalRetains {
                        k,
                        state: i,
                        retained: stay,
                    });
                }
                stay = 0.0;
            }
            check_probability(k, i, i, stay)?;
            q[[i - 1, i - 1]] = stay.max(0.0);
        }
        matrices.push(q);
    }
    Ok(TransitionSequence { matrices })
}

fn check_probability(k: usize, from: StateId, to: StateId, value: f64) -> Result<()> {
    if (-STOCHASTIC_TOLERANCE..=1.0 + STOCHASTIC_TOLERANCE).contains(&value) {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange { k, from, to, value })
    }
}

/// A row where the closed-form diagonal `(l_i(k+1) - sum_j d_i_j(k)) / l_i(k)`
/// differs from the diagonal actually used.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalDiscrepancy {
    pub k: usize,
    pub state: StateId,
    pub next_occupancy_form: f64,
    pub used: f64,
}

/// Compare both diagonal forms; a discrepancy above `1e-9` means the state
/// receives entrants or the table is inconsistent.
pub fn diagonal_discrepancies(
    table: &IncrementDecrementTable,
    seq: &TransitionSequence,
    model: &StateModel,
) -> Vec<DiagonalDiscrepancy> {
    let mut out = Vec::new();
    for k in 0..seq.n() {
        for i in table_states(model) {
            let Some(l) = table.occupancy(i) else {
                continue;
            };
            if l[k] == 0.0 {
                continue;
            }
            let leaving: f64 = model
                .successors(i)
                .map(|j| {
                    table
                        .decrement(i, j)
                        .map_or(if exit_implied(model, i) { l[k] } else { 0.0 }, |d| d[k])
                })
                .sum();
            let next_occupancy_form = (l[k + 1] - leaving) / l[k];
            let used = seq.prob(k, i, i);
            if (next_occupancy_form - used).abs() > 1e-9 {
                out.push(DiagonalDiscrepancy {
                    k,
                    state: i,
                    next_occupancy_form,
                    used,
                });
            }
        }
    }
    out
}

/// Unit vector at the model's initial state.
pub fn initial_distribution(model: &StateModel) -> Vec<f64> {
    let mut p = vec![0.0; model.n_states];
    if let Some(slot) = p.get_mut(model.initial_state.wrapping_sub(1)) {
        *slot = 1.0;
    }
    p
}

/// `(n+1) x N` matrix whose row `t` is `P(t)^T = P(0)^T Q(0)...Q(t-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionMatrix {
    d: Array2<f64>,
}

impl DistributionMatrix {
    pub fn n(&self) -> usize {
        self.d.nrows() - 1
    }

    pub fn n_states(&self) -> usize {
        self.d.ncols()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.d
    }

    /// `P*_j(t)` with 1-based `j`.
    pub fn state_prob(&self, t: usize, j: StateId) -> Result<f64> {
        if t > self.n() || j == 0 || j > self.n_states() {
            return Err(Error::OutOfRange(format!(
                "(t={t}, j={j}) outside 0..={} x 1..={}",
                self.n(),
                self.n_states()
            )));
        }
        Ok(self.d[[t, j - 1]])
    }
}

pub fn distribution_matrix(
    seq: &TransitionSequence,
    initial: &[f64],
) -> Result<DistributionMatrix> {
    let n_states = seq.n_states();
    if initial.len() != n_states {
        return Err(Error::Shape(format!(
            "initial distribution has {} entries, expected {n_states}",
            initial.len()
        )));
    }
    if initial.iter().any(|&p| !(0.0..=1.0).contains(&p))
        || (initial.iter().sum::<f64>() - 1.0).abs() > STOCHASTIC_TOLERANCE
    {
        return Err(Error::Shape(
            "initial distribution is not a probability vector".into(),
        ));
    }
    let mut d = Array2::<f64>::zeros((seq.n() + 1, n_states));
    let mut row = Array1::from(initial.to_vec());
    d.row_mut(0).assign(&row);
    for (k, q) in seq.iter().enumerate() {
        row = row.dot(q);
        d.row_mut(k + 1).assign(&row);
    }
    Ok(DistributionMatrix { d })
}

/// `P*_j(t)`; the indicator contraction `I_{t+1}^T D J_j`.
pub fn state_prob(d: &DistributionMatrix, t: usize, j: StateId) -> Result<f64> {
    d.state_prob(t, j)
}

//! Multiple state models: the directed graph of insured-risk states, its
//! validation and classification, the lump-sum extension that moves every
//! transition benefit onto an inserted plus-state, and shortest arrival
//! offsets from the initial state.
//!
//! State ids are 1-based everywhere in this module's public surface.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

pub type StateId = usize;

/// A multiple state model `(S, T)` together with the state flags needed to
/// build its transition matrices.
///
/// `reflex` states are left after exactly one period through their single
/// exit. `transitional` states are also left after exactly one period but may
/// have several exits; their exit split comes from the life table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateModel {
    pub n_states: usize,
    pub labels: BTreeMap<StateId, String>,
    pub transitions: BTreeSet<(StateId, StateId)>,
    pub reflex: BTreeSet<StateId>,
    pub transitional: BTreeSet<StateId>,
    pub initial_state: StateId,
}

impl StateModel {
    pub fn new(n_states: usize) -> Self {
        StateModel {
            n_states,
            labels: BTreeMap::new(),
            transitions: BTreeSet::new(),
            reflex: BTreeSet::new(),
            transitional: BTreeSet::new(),
            initial_state: 1,
        }
    }

    pub fn with_transitions(n_states: usize, transitions: &[(StateId, StateId)]) -> Self {
        let mut model = StateModel::new(n_states);
        model.transitions.extend(transitions.iter().copied());
        model
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        1..=self.n_states
    }

    pub fn successors(&self, state: StateId) -> impl Iterator<Item = StateId> + '_ {
        self.transitions
            .range((state, 0)..(state + 1, 0))
            .map(|&(_, to)| to)
    }

    pub fn predecessors(&self, state: StateId) -> impl Iterator<Item = StateId> + '_ {
        self.transitions
            .iter()
            .filter(move |&&(_, to)| to == state)
            .map(|&(from, _)| from)
    }

    pub fn out_degree(&self, state: StateId) -> usize {
        self.successors(state).count()
    }

    pub fn is_absorbing(&self, state: StateId) -> bool {
        self.out_degree(state) == 0
    }

    /// True when occupancy of `state` never lasts more than one period.
    pub fn leaves_after_one_period(&self, state: StateId) -> bool {
        self.reflex.contains(&state) || self.transitional.contains(&state)
    }

    pub fn label(&self, state: StateId) -> Option<&str> {
        self.labels.get(&state).map(String::as_str)
    }

    pub fn classify(&self) -> Result<StateClass> {
        classify_states(self, &self.reflex)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    NoStates,
    SelfTransition(StateId),
    TransitionOutOfRange {
        from: StateId,
        to: StateId,
        n_states: usize,
    },
    InitialOutOfRange {
        state: StateId,
        n_states: usize,
    },
    FlagOutOfRange {
        flag: &'static str,
        state: StateId,
        n_states: usize,
    },
    ConflictingFlags(StateId),
    TransitionalWithoutExit(StateId),
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NoStates => write!(f, "model has no states"),
            Diagnostic::SelfTransition(s) => write!(f, "self-transition at state {s}"),
            Diagnostic::TransitionOutOfRange { from, to, n_states } => write!(
                f,
                "state id out of range in transition ({from},{to}) with N={n_states}"
            ),
            Diagnostic::InitialOutOfRange { state, n_states } => write!(
                f,
                "state id out of range: initial state {state} with N={n_states}"
            ),
            Diagnostic::FlagOutOfRange {
                flag,
                state,
                n_states,
            } => write!(
                f,
                "state id out of range: {flag} state {state} with N={n_states}"
            ),
            Diagnostic::ConflictingFlags(s) => {
                write!(f, "state {s} is flagged both reflex and transitional")
            }
            Diagnostic::TransitionalWithoutExit(s) => {
                write!(f, "transitional state {s} has no outgoing transitions")
            }
        }
    }
}

/// Check the structural invariants of a model. An empty list means the model
/// is valid.
pub fn validate_model(model: &StateModel) -> Vec<Diagnostic> {
    let n = model.n_states;
    let in_range = |s: StateId| (1..=n).contains(&s);
    let mut out = Vec::new();
    if n == 0 {
        out.push(Diagnostic::NoStates);
    }
    for &(from, to) in &model.transitions {
        if from == to {
            out.push(Diagnostic::SelfTransition(from));
        }
        if !in_range(from) || !in_range(to) {
            out.push(Diagnostic::TransitionOutOfRange {
                from,
                to,
                n_states: n,
            });
        }
    }
    if !in_range(model.initial_state) {
        out.push(Diagnostic::InitialOutOfRange {
            state: model.initial_state,
            n_states: n,
        });
    }
    for (flag, set) in [
        ("reflex", &model.reflex),
        ("transitional", &model.transitional),
    ] {
        for &s in set {
            if !in_range(s) {
                out.push(Diagnostic::FlagOutOfRange {
                    flag,
                    state: s,
                    n_states: n,
                });
            }
        }
    }
    for &s in model.reflex.intersection(&model.transitional) {
        out.push(Diagnostic::ConflictingFlags(s));
    }
    for &s in &model.transitional {
        if in_range(s) && model.is_absorbing(s) {
            out.push(Diagnostic::TransitionalWithoutExit(s));
        }
    }
    out
}

fn ensure_valid(model: &StateModel) -> Result<()> {
    let diagnostics = validate_model(model);
    if diagnostics.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidModel(diagnostics))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    Transient,
    Absorbing,
    Reflex,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateClass {
    kinds: Vec<StateKind>,
}

impl StateClass {
    pub fn kind(&self, state: StateId) -> StateKind {
        self.kinds[state - 1]
    }

    pub fn states_of(&self, kind: StateKind) -> BTreeSet<StateId> {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, &k)| k == kind)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// Absorbing and transient are read off the out-degree; reflex comes from
/// `reflex_flags` and must have exactly one exit.
pub fn classify_states(model: &StateModel, reflex_flags: &BTreeSet<StateId>) -> Result<StateClass> {
    ensure_valid(model)?;
    let mut kinds = Vec::with_capacity(model.n_states);
    for s in model.states() {
        let out_degree = model.out_degree(s);
        let kind = if reflex_flags.contains(&s) {
            if out_degree != 1 {
                return Err(Error::ReflexOutDegree {
                    state: s,
                    out_degree,
                });
            }
            StateKind::Reflex
        } else if out_degree == 0 {
            StateKind::Absorbing
        } else {
            StateKind::Transient
        };
        kinds.push(kind);
    }
    if let Some(&s) = reflex_flags.iter().find(|&&s| s == 0 || s > model.n_states) {
        return Err(Error::InvalidModel(vec![Diagnostic::FlagOutOfRange {
            flag: "reflex",
            state: s,
            n_states: model.n_states,
        }]));
    }
    Ok(StateClass { kinds })
}

/// A benefit amount, optionally scaled per period by `schedule[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Benefit {
    pub amount: f64,
    pub schedule: Option<Vec<f64>>,
}

impl Benefit {
    pub fn constant(amount: f64) -> Self {
        Benefit {
            amount,
            schedule: None,
        }
    }

    pub fn at(&self, k: usize) -> f64 {
        match &self.schedule {
            Some(s) => self.amount * s.get(k).copied().unwrap_or(0.0),
            None => self.amount,
        }
    }

    /// Two benefits belong to the same amount class when they pay the same
    /// amount at every time.
    fn same_class(&self, other: &Benefit) -> bool {
        let bits = |b: &Benefit| {
            (
                b.amount.to_bits(),
                b.schedule
                    .as_ref()
                    .map(|s| s.iter().map(|x| x.to_bits()).collect::<Vec<_>>()),
            )
        };
        bits(self) == bits(other)
    }

    fn is_finite(&self) -> bool {
        self.amount.is_finite()
            && self
                .schedule
                .as_ref()
                .is_none_or(|s| s.iter().all(|x| x.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LumpSum {
    pub from: StateId,
    pub to: StateId,
    pub benefit: Benefit,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LumpSumMap {
    pub entries: Vec<LumpSum>,
}

impl LumpSumMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, from: StateId, to: StateId, amount: f64) {
        self.entries.push(LumpSum {
            from,
            to,
            benefit: Benefit::constant(amount),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A benefit carried by a state of the extended model, paid at every time
/// the process occupies it.
#[derive(Debug, Clone, PartialEq)]
pub struct Attachment {
    pub state: StateId,
    pub benefit: Benefit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlusOrigin {
    /// Extended id of the base state the plus-state feeds into.
    pub target: StateId,
    pub benefit: Benefit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedStateModel {
    pub model: StateModel,
    pub plus_state_origin: BTreeMap<StateId, PlusOrigin>,
    /// `renumbering[b - 1]` is the extended id of base state `b`.
    pub renumbering: Vec<StateId>,
}

impl ExtendedStateModel {
    /// Wrap a model whose cash flows are already state-attached.
    pub fn identity(model: StateModel) -> Self {
        let renumbering = model.states().collect();
        ExtendedStateModel {
            model,
            plus_state_origin: BTreeMap::new(),
            renumbering,
        }
    }

    pub fn extended_id(&self, base: StateId) -> Option<StateId> {
        base.checked_sub(1)
            .and_then(|i| self.renumbering.get(i))
            .copied()
    }
}

impl std::ops::Deref for ExtendedStateModel {
    type Target = StateModel;

    fn deref(&self) -> &StateModel {
        &self.model
    }
}

/// Rewrite transition-attached lump sums as state-attached benefits.
///
/// Transitions into a target that is left after one period (reflex or
/// transitional) keep the target: the benefit is attached to it in place,
/// which requires every inbound transition to carry the same amount class.
/// Every other target `j` gets one plus-state `j+` per amount class; the
/// lump-sum transitions are redirected to it and `j+ -> j` is added. Plus-states
/// are numbered immediately before their target.
pub fn extend_model(
    model: &StateModel,
    lump_sums: &LumpSumMap,
) -> Result<(ExtendedStateModel, Vec<Attachment>)> {
    ensure_valid(model)?;
    let mut by_transition: BTreeMap<(StateId, StateId), &Benefit> = BTreeMap::new();
    for ls in &lump_sums.entries {
        if !model.transitions.contains(&(ls.from, ls.to)) {
            return Err(Error::UnknownLumpSumTransition {
                from: ls.from,
                to: ls.to,
            });
        }
        if !ls.benefit.is_finite() {
            return Err(Error::InvalidParameter {
                name: "lump sum",
                value: ls.benefit.amount,
                constraint: "amounts must be finite",
            });
        }
        if by_transition
            .insert((ls.from, ls.to), &ls.benefit)
            .is_some()
        {
            return Err(Error::DuplicateLumpSum {
                from: ls.from,
                to: ls.to,
            });
        }
    }

    let mut in_place: BTreeMap<StateId, Benefit> = BTreeMap::new();
    // classes[target] = amount classes in order of the lowest source state
    let mut classes: BTreeMap<StateId, Vec<Benefit>> = BTreeMap::new();
    for (&(from, to), &benefit) in &by_transition {
        if model.leaves_after_one_period(to) {
            if to == model.initial_state {
                return Err(Error::AmbiguousLumpSum {
                    state: to,
                    reason: "the state is also the initial state".into(),
                });
            }
            match in_place.get(&to) {
                Some(existing) if !existing.same_class(benefit) => {
                    return Err(Error::AmbiguousLumpSum {
                        state: to,
                        reason: format!("transition ({from},{to}) carries a different amount"),
                    });
                }
                Some(_) => {}
                None => {
                    in_place.insert(to, benefit.clone());
                }
            }
        } else {
            let list = classes.entry(to).or_default();
            if !list.iter().any(|b| b.same_class(benefit)) {
                list.push(benefit.clone());
            }
        }
    }
    for &state in in_place.keys() {
        if let Some(from) = model
            .predecessors(state)
            .find(|&from| !by_transition.contains_key(&(from, state)))
        {
            return Err(Error::AmbiguousLumpSum {
                state,
                reason: format!("transition ({from},{state}) carries no lump sum"),
            });
        }
    }

    let mut renumbering = Vec::with_capacity(model.n_states);
    let mut plus_ids: BTreeMap<StateId, Vec<StateId>> = BTreeMap::new();
    let mut next = 1;
    for base in model.states() {
        if let Some(list) = classes.get(&base) {
            let ids = (next..next + list.len()).collect();
            next += list.len();
            plus_ids.insert(base, ids);
        }
        renumbering.push(next);
        next += 1;
    }
    let n_ext = next - 1;
    let ren = |b: StateId| renumbering[b - 1];

    let mut ext = StateModel::new(n_ext);
    ext.initial_state = ren(model.initial_state);
    ext.reflex = model.reflex.iter().map(|&s| ren(s)).collect();
    ext.transitional = model.transitional.iter().map(|&s| ren(s)).collect();
    for (&s, label) in &model.labels {
        ext.labels.insert(ren(s), label.clone());
    }

    let mut plus_state_origin = BTreeMap::new();
    let mut attachments = Vec::new();
    for (&target, list) in &classes {
        for (benefit, &plus) in list.iter().zip(&plus_ids[&target]) {
            ext.transitions.insert((plus, ren(target)));
            ext.reflex.insert(plus);
            let base_label = model
                .label(target)
                .map(str::to_owned)
                .unwrap_or_else(|| target.to_string());
            ext.labels.insert(plus, format!("{base_label}+"));
            plus_state_origin.insert(
                plus,
                PlusOrigin {
                    target: ren(target),
                    benefit: benefit.clone(),
                },
            );
            attachments.push(Attachment {
                state: plus,
                benefit: benefit.clone(),
            });
        }
    }
    for (&state, benefit) in &in_place {
        attachments.push(Attachment {
            state: ren(state),
            benefit: benefit.clone(),
        });
    }
    attachments.sort_by_key(|a| a.state);

    for &(from, to) in &model.transitions {
        let dest = match by_transition.get(&(from, to)) {
            Some(benefit) if !model.leaves_after_one_period(to) => {
                let idx = classes[&to]
                    .iter()
                    .position(|b| b.same_class(benefit))
                    .expect("amount class registered above");
                plus_ids[&to][idx]
            }
            _ => ren(to),
        };
        ext.transitions.insert((ren(from), dest));
    }

    Ok((
        ExtendedStateModel {
            model: ext,
            plus_state_origin,
            renumbering,
        },
        attachments,
    ))
}

/// Minimum number of transitions from the initial state to each state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrivalOffsets {
    delta: Vec<Option<usize>>,
}

impl ArrivalOffsets {
    pub fn from_vec(delta: Vec<Option<usize>>) -> Self {
        ArrivalOffsets { delta }
    }

    /// `None` means the state is unreachable from the initial state.
    pub fn get(&self, state: StateId) -> Option<usize> {
        self.delta.get(state.wrapping_sub(1)).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    /// True when a premium could first be collected in `state` before time `m`.
    pub fn reachable_before(&self, state: StateId, m: usize) -> bool {
        self.get(state).is_some_and(|d| d < m)
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateId, Option<usize>)> + '_ {
        self.delta.iter().enumerate().map(|(i, &d)| (i + 1, d))
    }
}

/// All transitions have unit length, so a breadth-first search gives the
/// same offsets as Dijkstra's algorithm.
pub fn shortest_arrival(model: &StateModel) -> Result<ArrivalOffsets> {
    ensure_valid(model)?;
    let mut delta = vec![None; model.n_states];
    let mut queue = VecDeque::new();
    delta[model.initial_state - 1] = Some(0);
    queue.push_back(model.initial_state);
    while let Some(state) = queue.pop_front() {
        let next = delta[state - 1].map(|d| d + 1);
        for succ in model.successors(state) {
            if delta[succ - 1].is_none() {
                delta[succ - 1] = next;
                queue.push_back(succ);
            }
        }
    }
    Ok(ArrivalOffsets { delta })
}

/// Parse the line-oriented model format. Returns the model and any lump sums
/// it declares.
pub fn parse_model(text: &str, origin: &str) -> Result<(StateModel, LumpSumMap)> {
    let mut model: Option<StateModel> = None;
    let mut lump_sums = LumpSumMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::parse(origin, line_no, msg);
        let mut words = line.split_whitespace();
        let keyword = words.next().unwrap_or_default();
        let id = |w: Option<&str>, what: &str| -> Result<StateId> {
            let w = w.ok_or_else(|| err(format!("missing {what}")))?;
            w.parse::<StateId>()
                .map_err(|_| err(format!("invalid {what} '{w}'")))
        };
        if keyword == "states" {
            if model.is_some() {
                return Err(err("duplicate 'states' line".into()));
            }
            let n = id(words.next(), "state count")?;
            model = Some(StateModel::new(n));
            continue;
        }
        let m = model
            .as_mut()
            .ok_or_else(|| err(format!("'{keyword}' before 'states'")))?;
        match keyword {
            "label" => {
                let s = id(words.next(), "state id")?;
                let text = words.collect::<Vec<_>>().join(" ");
                if text.is_empty() {
                    return Err(err("missing label text".into()));
                }
                m.labels.insert(s, text);
            }
            "reflex" | "transitional" => {
                let set = if keyword == "reflex" {
                    &mut m.reflex
                } else {
                    &mut m.transitional
                };
                let mut any = false;
                for w in words {
                    set.insert(id(Some(w), "state id")?);
                    any = true;
                }
                if !any {
                    return Err(err(format!("'{keyword}' needs at least one state id")));
                }
            }
            "transition" => {
                let from = id(words.next(), "source state")?;
                let to = id(words.next(), "target state")?;
                m.transitions.insert((from, to));
            }
            "lumpsum" => {
                let from = id(words.next(), "source state")?;
                let to = id(words.next(), "target state")?;
                let w = words.next().ok_or_else(|| err("missing amount".into()))?;
                let amount: f64 = w
                    .parse()
                    .map_err(|_| err(format!("invalid amount '{w}'")))?;
                lump_sums.insert(from, to, amount);
            }
            "initial" => {
                m.initial_state = id(words.next(), "state id")?;
            }
            other => return Err(err(format!("unknown keyword '{other}'"))),
        }
        if let Some(extra) = line.split_whitespace().nth(expected_words(keyword)) {
            if !matches!(keyword, "label" | "reflex" | "transitional") {
                return Err(err(format!("unexpected '{extra}'")));
            }
        }
    }
    let model = model.ok_or_else(|| Error::parse(origin, 0, "missing 'states' line"))?;
    Ok((model, lump_sums))
}

fn expected_words(keyword: &str) -> usize {
    match keyword {
        "transition" => 3,
        "lumpsum" => 4,
        _ => 2,
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(StateModel, LumpSumMap)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, &path.display().to_string())
}

/// Render a model in the text format read by [`parse_model`].
pub fn format_model(model: &StateModel) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "states {}", model.n_states);
    for (s, label) in &model.labels {
        let _ = writeln!(out, "label {s} {label}");
    }
    let join = |set: &BTreeSet<StateId>| {
        set.iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(" ")
    };
    if !model.reflex.is_empty() {
        let _ = writeln!(out, "reflex {}", join(&model.reflex));
    }
    if !model.transitional.is_empty() {
        let _ = writeln!(out, "transitional {}", join(&model.transitional));
    }
    for (i, j) in &model.transitions {
        let _ = writeln!(out, "transition {i} {j}");
    }
    let _ = writeln!(out, "initial {}", model.initial_state);
    out
}

//! Worked valuations on the bundled dread-disease model and SYNTHETIC tables:
//! a 40-year-old, a 25-year term, premiums payable for the whole term and a
//! constant 1% interest rate.

use std::collections::BTreeSet;

use crate::cashflow::{
    accelerated_life, accelerated_premium_defined, dd_case, CashflowMatrix, DdParams,
};
use crate::error::Result;
use crate::fixtures::{self, Sex};
use crate::lifetable::{distribution_matrix, initial_distribution, transition_sequence};
use crate::lifetable::{DistributionMatrix, TransitionSequence};
use crate::model::{shortest_arrival, ArrivalOffsets, StateId, StateModel};
use crate::valuation::{net_single_premium, period_premium, DiscountVector};

pub const DEMO_RATE: f64 = 0.01;
pub const LAMBDA_GRID: [f64; 5] = [0.001, 0.25, 0.5, 0.75, 1.0];
pub const PAY_SETS: [&[StateId]; 3] = [&[1], &[1, 2], &[1, 2, 3, 4, 5, 6]];

/// Everything a valuation on the bundled model needs for one sex.
#[derive(Debug, Clone)]
pub struct Setting {
    pub sex: Sex,
    pub model: StateModel,
    pub offsets: ArrivalOffsets,
    pub seq: TransitionSequence,
    pub initial: Vec<f64>,
    pub d: DistributionMatrix,
    pub discount: DiscountVector,
}

impl Setting {
    pub fn synthetic(sex: Sex, rate: f64) -> Result<Self> {
        let model = fixtures::dread_disease_model();
        let table = fixtures::synthetic_table(sex);
        let seq = transition_sequence(&table, &model)?;
        let initial = initial_distribution(&model);
        let d = distribution_matrix(&seq, &initial)?;
        let discount = DiscountVector::from_rate(rate, seq.n())?;
        let offsets = shortest_arrival(&model)?;
        Ok(Setting {
            sex,
            model,
            offsets,
            seq,
            initial,
            d,
            discount,
        })
    }

    pub fn n(&self) -> usize {
        self.seq.n()
    }
}

pub fn pay_set(states: &[StateId]) -> BTreeSet<StateId> {
    states.iter().copied().collect()
}

/// Single premium and the period premium for each of [`PAY_SETS`];
/// `None` where the premium is not defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Premiums {
    pub single: f64,
    pub period: [Option<f64>; 3],
}

pub fn premiums(
    setting: &Setting,
    c_in: &CashflowMatrix,
    defined: impl Fn(&BTreeSet<StateId>) -> bool,
) -> Result<Premiums> {
    let single = net_single_premium(c_in, &setting.d, &setting.discount)?.value;
    let mut period = [None; 3];
    for (slot, states) in period.iter_mut().zip(PAY_SETS) {
        let pay = pay_set(states);
        if defined(&pay) {
            let p = period_premium(
                c_in,
                &setting.d,
                &setting.discount,
                &pay,
                &setting.offsets,
                setting.n(),
            )?;
            *slot = Some(p.value);
        }
    }
    Ok(Premiums { single, period })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Accel,
    Case1,
    Case2,
    Case3,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Accel => "accel",
            Scenario::Case1 => "case1",
            Scenario::Case2 => "case2",
            Scenario::Case3 => "case3",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoRow {
    pub label: String,
    pub female: Premiums,
    pub male: Premiums,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoReport {
    pub scenario: Scenario,
    /// Name of the row parameter: `lambda` or `case`.
    pub row_key: &'static str,
    pub rows: Vec<DemoRow>,
}

/// The contracts behind each demo row, as `(label, C_in, lambda)`.
pub fn contracts(
    scenario: Scenario,
    n: usize,
) -> Result<Vec<(String, CashflowMatrix, Option<f64>)>> {
    match scenario {
        Scenario::Accel => LAMBDA_GRID
            .iter()
            .map(|&l| Ok((format!("{l}"), accelerated_life(l, n)?, Some(l))))
            .collect(),
        Scenario::Case1 | Scenario::Case2 | Scenario::Case3 => {
            let id = match scenario {
                Scenario::Case1 => 1,
                Scenario::Case2 => 2,
                _ => 3,
            };
            Ok(vec![(
                format!("case {id}"),
                dd_case(id, DdParams::default(), n)?,
                None,
            )])
        }
    }
}

pub fn demo(scenario: Scenario) -> Result<DemoReport> {
    let female = Setting::synthetic(Sex::Female, DEMO_RATE)?;
    let male = Setting::synthetic(Sex::Male, DEMO_RATE)?;
    let mut rows = Vec::new();
    for (label, c_in, lambda) in contracts(scenario, female.n())? {
        let defined =
            |pay: &BTreeSet<StateId>| lambda.is_none_or(|l| accelerated_premium_defined(l, pay));
        rows.push(DemoRow {
            label,
            female: premiums(&female, &c_in, defined)?,
            male: premiums(&male, &c_in, defined)?,
        });
    }
    Ok(DemoReport {
        scenario,
        row_key: if scenario == Scenario::Accel {
            "lambda"
        } else {
            "case"
        },
        rows,
    })
}

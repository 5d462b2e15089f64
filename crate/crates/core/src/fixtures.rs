//! Bundled dread-disease models and SYNTHETIC life tables.
//!
//! The tables are generated from smooth made-up rates, not from any registry.
//! They have the dread-disease column layout and describe a closed cohort of
//! 100000 healthy lives started at age 20, tabulated from age 40 to 65, so
//! every transient state is occupied at every tabulated age.

use std::fmt::Write as _;

use crate::lifetable::{parse_table, IncrementDecrementTable};
use crate::model::{parse_model, LumpSumMap, StateModel};

pub const DREAD_DISEASE_MODEL: &str = include_str!("../fixtures/dread_disease.model");
pub const DREAD_DISEASE_BASE_MODEL: &str = include_str!("../fixtures/dread_disease_base.model");
pub const SYNTHETIC_FEMALE_CSV: &str = include_str!("../fixtures/synthetic_female.csv");
pub const SYNTHETIC_MALE_CSV: &str = include_str!("../fixtures/synthetic_male.csv");

pub const SYNTHETIC_ENTRY_AGE: u32 = 40;
pub const SYNTHETIC_PERIODS: usize = 25;
const COHORT_START_AGE: u32 = 20;
const RADIX: i64 = 100_000 * SCALE;
/// Counts are kept in ten-thousandths so the printed table closes exactly.
const SCALE: i64 = 10_000;

/// The ten-state extended model with reflex plus-states 7 and 9.
pub fn dread_disease_model() -> StateModel {
    parse_model(DREAD_DISEASE_MODEL, "dread_disease.model")
        .expect("bundled model parses")
        .0
}

/// The eight-state model with benefits on transitions.
pub fn dread_disease_base_model() -> (StateModel, LumpSumMap) {
    parse_model(DREAD_DISEASE_BASE_MODEL, "dread_disease_base.model").expect("bundled model parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    pub fn name(self) -> &'static str {
        match self {
            Sex::Female => "female",
            Sex::Male => "male",
        }
    }
}

pub fn synthetic_csv(sex: Sex) -> &'static str {
    match sex {
        Sex::Female => SYNTHETIC_FEMALE_CSV,
        Sex::Male => SYNTHETIC_MALE_CSV,
    }
}

/// The bundled synthetic table, parsed against [`dread_disease_model`].
pub fn synthetic_table(sex: Sex) -> IncrementDecrementTable {
    let origin = format!("synthetic_{}.csv", sex.name());
    parse_table(synthetic_csv(sex), &origin, &dread_disease_model()).expect("bundled table parses")
}

struct Rates {
    mortality_base: f64,
    incidence_base: f64,
    metastasis: f64,
    progression: [f64; 3],
}

impl Rates {
    fn of(sex: Sex) -> Self {
        match sex {
            Sex::Female => Rates {
                mortality_base: 0.0004,
                incidence_base: 0.00005,
                metastasis: 0.12,
                progression: [0.55, 0.50, 0.45],
            },
            Sex::Male => Rates {
                mortality_base: 0.0007,
                incidence_base: 0.0001,
                metastasis: 0.15,
                progression: [0.50, 0.45, 0.40],
            },
        }
    }

    fn mortality(&self, age: u32) -> f64 {
        self.mortality_base * (0.085 * f64::from(age - COHORT_START_AGE)).exp()
    }

    fn incidence(&self, age: u32) -> f64 {
        self.incidence_base * (0.08 * f64::from(age - COHORT_START_AGE)).exp()
    }
}

/// One year of the cohort: occupancy of states 1..=6 and the decrements.
#[derive(Clone, Copy, Default)]
struct Year {
    l: [i64; 6],
    d12: i64,
    d13: i64,
    d17: i64,
    d23: i64,
    d27: i64,
    // exits of the stages 3, 4, 5 to the next stage and to death
    next: [i64; 3],
    die: [i64; 3],
}

fn share(rate: f64, l: i64) -> i64 {
    (rate * l as f64).round() as i64
}

fn year(rates: &Rates, age: u32, l: [i64; 6]) -> Year {
    let q = rates.mortality(age);
    let inc = rates.incidence(age);
    let mut y = Year {
        l,
        d12: share(inc, l[0]),
        d13: share(0.3 * inc, l[0]),
        d17: share(q, l[0]),
        d23: share(rates.metastasis, l[1]),
        d27: share(1.3 * q, l[1]),
        ..Year::default()
    };
    for s in 0..3 {
        y.next[s] = share(rates.progression[s], l[s + 2]);
        y.die[s] = l[s + 2] - y.next[s];
    }
    y
}

fn successor(y: &Year) -> [i64; 6] {
    [
        y.l[0] - y.d12 - y.d13 - y.d17,
        y.l[1] + y.d12 - y.d23 - y.d27,
        y.d13 + y.d23,
        y.next[0],
        y.next[1],
        y.next[2],
    ]
}

fn fixed(units: i64) -> String {
    format!("{}.{:04}", units / SCALE, units % SCALE)
}

/// Generate the synthetic table text; the bundled CSVs are its output.
pub fn synthetic_table_csv(sex: Sex) -> String {
    let rates = Rates::of(sex);
    let mut l = [RADIX, 0, 0, 0, 0, 0];
    for age in COHORT_START_AGE..SYNTHETIC_ENTRY_AGE {
        l = successor(&year(&rates, age, l));
    }

    let mut out = String::new();
    writeln!(
        out,
        "# SYNTHETIC {} dread-disease life table, not registry data",
        sex.name()
    )
    .unwrap();
    writeln!(
        out,
        "# closed cohort of 100000 healthy lives at age {COHORT_START_AGE}"
    )
    .unwrap();
    writeln!(out, "# entry_age {SYNTHETIC_ENTRY_AGE}").unwrap();
    out.push_str("k,l_1,l_2,l_3,l_4,l_5,l_6,d_1_2,d_1_3,d_1_7,d_2_3,d_2_7,d_3_4,d_3_9,d_4_5,d_4_9,d_5_6,d_5_9\n");
    for k in 0..=SYNTHETIC_PERIODS {
        let y = year(&rates, SYNTHETIC_ENTRY_AGE + k as u32, l);
        let decrements = [
            y.d12, y.d13, y.d17, y.d23, y.d27, y.next[0], y.die[0], y.next[1], y.die[1], y.next[2],
            y.die[2],
        ];
        write!(out, "{k}").unwrap();
        for &c in y.l.iter().chain(&decrements) {
            write!(out, ",{}", fixed(c)).unwrap();
        }
        out.push('\n');
        l = successor(&y);
    }
    out
}

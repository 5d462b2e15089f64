use std::fmt::Write as _;

use ndarray::Array2;

use multistate_core::demo::{DemoReport, PAY_SETS};
use multistate_core::valuation::{PremiumKind, PremiumResult};

use crate::args::Format;

const DASH: &str = "—";

/// Collects the report; tables are buffered so plain output can align them.
pub struct Out {
    precision: usize,
    format: Format,
    text: String,
    table: Vec<Vec<String>>,
}

impl Out {
    pub fn new(precision: usize, format: Format) -> Self {
        Out {
            precision,
            format,
            text: String::new(),
            table: Vec::new(),
        }
    }

    pub fn num(&self, v: f64) -> String {
        format!("{v:.*}", self.precision)
    }

    fn flush(&mut self) {
        let rows = std::mem::take(&mut self.table);
        if rows.is_empty() {
            return;
        }
        match self.format {
            Format::Csv => {
                for r in rows {
                    self.text.push_str(&r.join(","));
                    self.text.push('\n');
                }
            }
            Format::Plain => {
                let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
                let widths: Vec<usize> = (0..cols)
                    .map(|c| {
                        rows.iter()
                            .filter_map(|r| r.get(c))
                            .map(|s| s.chars().count())
                            .max()
                            .unwrap_or(0)
                    })
                    .collect();
                let numeric = |c: usize| {
                    rows.iter()
                        .skip(1)
                        .filter_map(|r| r.get(c))
                        .all(|s| s.parse::<f64>().is_ok() || s == DASH)
                };
                let right: Vec<bool> = (0..cols).map(numeric).collect();
                for r in rows {
                    let mut line = String::new();
                    for (c, cell) in r.iter().enumerate() {
                        if c > 0 {
                            line.push_str("  ");
                        }
                        let pad = widths[c] - cell.chars().count();
                        if !right[c] {
                            line.push_str(cell);
                            line.push_str(&" ".repeat(pad));
                        } else {
                            line.push_str(&" ".repeat(pad));
                            line.push_str(cell);
                        }
                    }
                    self.text.push_str(line.trim_end());
                    self.text.push('\n');
                }
            }
        }
    }

    pub fn header(&mut self, cols: &[&str]) {
        self.flush();
        self.table
            .push(cols.iter().map(|s| s.to_string()).collect());
    }

    pub fn row(&mut self, cells: &[String]) {
        self.table.push(cells.to_vec());
    }

    pub fn line(&mut self, s: &str) {
        self.flush();
        self.text.push_str(s);
        self.text.push('\n');
    }

    pub fn note(&mut self, s: &str) {
        self.line(&format!("# {s}"));
    }

    fn pair(&mut self, key: &str, value: String) {
        self.flush();
        match self.format {
            Format::Csv => writeln!(self.text, "{key},{value}").unwrap(),
            Format::Plain => writeln!(self.text, "{key:<18}{value}").unwrap(),
        }
    }

    pub fn value(&mut self, key: &str, v: f64) {
        let s = self.num(v);
        self.pair(key, s);
    }

    pub fn count(&mut self, key: &str, v: u64) {
        self.pair(key, v.to_string());
    }

    pub fn sci(&mut self, key: &str, v: f64) {
        self.pair(key, format!("{v:.*e}", self.precision));
    }

    pub fn matrix(&mut self, prefix: &str, a: &Array2<f64>) {
        let mut head = vec!["k".to_string()];
        head.extend((1..=a.ncols()).map(|j| format!("{prefix}_{j}")));
        self.flush();
        self.table.push(head);
        for (k, r) in a.rows().into_iter().enumerate() {
            let mut cells = vec![k.to_string()];
            cells.extend(r.iter().map(|&v| self.num(v)));
            self.table.push(cells);
        }
    }

    pub fn premium(&mut self, p: &PremiumResult) {
        match p.kind {
            PremiumKind::Single => self.value("single premium", p.value),
            PremiumKind::Period => {
                self.value("period premium", p.value);
                self.value("numerator", p.numerator);
                self.value("denominator", p.denominator);
                let states: Vec<String> = p.pay_states.iter().map(ToString::to_string).collect();
                self.pair("pay states", states.join(" "));
                self.count("term", p.m as u64);
            }
        }
    }

    pub fn demo(&mut self, report: &DemoReport) {
        self.note(
            "SYNTHETIC life tables: the values show structure only, not registry-based premiums",
        );
        self.note("entry age 40, n = 25, premiums payable for m = 25 periods, interest 1%");
        let mut head = vec![report.row_key.to_string()];
        let mut names = vec!["pi".to_string()];
        names.extend(PAY_SETS.iter().map(|s| {
            let ids: Vec<String> = s.iter().map(ToString::to_string).collect();
            format!("p{{{}}}", ids.join(","))
        }));
        for name in &names {
            head.push(format!("{name} woman"));
            head.push(format!("{name} man"));
        }
        self.flush();
        self.table.push(head);
        for row in &report.rows {
            let mut cells = vec![row.label.clone()];
            cells.push(self.num(row.female.single));
            cells.push(self.num(row.male.single));
            for i in 0..PAY_SETS.len() {
                for p in [row.female.period[i], row.male.period[i]] {
                    cells.push(p.map_or(DASH.to_string(), |v| self.num(v)));
                }
            }
            self.table.push(cells);
        }
    }

    pub fn finish(mut self) -> String {
        self.flush();
        self.text
    }
}

mod args;
mod output;

use std::collections::BTreeSet;
use std::process::ExitCode;

use clap::Parser;

use multistate_core::cashflow::{self, CashflowMatrix, DdParams, DREAD_DISEASE_STATES};
use multistate_core::demo::{self, Scenario};
use multistate_core::error::Error;
use multistate_core::fixtures::{self, Sex};
use multistate_core::lifetable::{self, DistributionMatrix, TransitionSequence};
use multistate_core::model::{self, ArrivalOffsets, StateKind, StateModel};
use multistate_core::oracle;
use multistate_core::valuation::{self, DiscountVector, PremiumResult};

use args::{CashflowCommand, ChainArgs, Cli, Command, ContractArgs, DiscountArgs, PremiumArgs};
use args::{ScenarioArg, SexArg, TableCommand};
use output::Out;

#[derive(Debug)]
enum Failure {
    Core(Error),
    /// Input that parses but cannot be used as asked.
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = Out::new(cli.precision, cli.format);
    match run(&cli, &mut out) {
        Ok(()) => {
            print!("{}", out.finish());
            ExitCode::SUCCESS
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli, out: &mut Out) -> Outcome {
    match &cli.command {
        Command::Validate { model } => validate(model, out),
        Command::Extend { model, output, n } => extend(model, output, *n, out),
        Command::Delta { model } => {
            let (model, _) = model::load_model(model)?;
            let delta = model::shortest_arrival(&model)?;
            out.header(&["state", "delta"]);
            for (s, d) in delta.iter() {
                out.row(&[s.to_string(), d.map_or("inf".into(), |d| d.to_string())]);
            }
            Ok(())
        }
        Command::Table(TableCommand::Check { chain }) => table_check(chain, out),
        Command::Dist { chain, initial } => {
            let c = Chain::load(chain)?;
            let init = match initial {
                None => lifetable::initial_distribution(&c.model),
                Some(s) if (1..=c.model.n_states).contains(s) => {
                    let mut p = vec![0.0; c.model.n_states];
                    p[s - 1] = 1.0;
                    p
                }
                Some(s) => {
                    return Err(Failure::Invalid(format!(
                        "initial state {s} is not in the model"
                    )))
                }
            };
            let d = lifetable::distribution_matrix(&c.seq, &init)?;
            out.matrix("p", d.as_array());
            Ok(())
        }
        Command::Cashflow(cmd) => {
            let c = match cmd {
                CashflowCommand::Accel { lambda, n } => cashflow::accelerated_life(*lambda, *n)?,
                CashflowCommand::Case { id, n } => cashflow::dd_case(*id, DdParams::default(), *n)?,
                CashflowCommand::File { spec, n, states } => {
                    cashflow::build(&cashflow::load_cashflow_spec(spec)?, *n, *states)?
                }
            };
            out.matrix("c", c.as_array());
            Ok(())
        }
        Command::Premium {
            chain,
            discount,
            contract,
            mode,
        } => {
            let v = Valuation::load(chain, discount, contract)?;
            let result = v.premium(mode)?;
            out.premium(&result);
            let residual = valuation::premium_residual(&v.c_in, &result, &v.offsets, &v.d, &v.m)?;
            out.sci("residual", residual);
            Ok(())
        }
        Command::Annuity {
            chain,
            discount,
            state,
            from,
            to,
        } => {
            let c = Chain::load(chain)?;
            let d = c.distribution()?;
            let m = discount_vector(discount, c.seq.n())?;
            out.value(
                "annuity",
                valuation::annuity_due(&d, &m, *state, *from, *to)?,
            );
            Ok(())
        }
        Command::Check {
            chain,
            discount,
            contract,
            mode,
            premium,
        } => {
            let v = Valuation::load(chain, discount, contract)?;
            let mut net = v.premium(mode)?;
            out.value("net premium", net.value);
            net.value = *premium;
            out.value("tested premium", *premium);
            let residual = valuation::premium_residual(&v.c_in, &net, &v.offsets, &v.d, &v.m)?;
            out.sci("residual", residual);
            Ok(())
        }
        Command::Simulate {
            chain,
            discount,
            contract,
            mode,
            paths,
        } => simulate(chain, discount, contract, mode, *paths, cli.seed, out),
        Command::Demo { scenario } => {
            let scenario = match scenario {
                ScenarioArg::Accel => Scenario::Accel,
                ScenarioArg::Case1 => Scenario::Case1,
                ScenarioArg::Case2 => Scenario::Case2,
                ScenarioArg::Case3 => Scenario::Case3,
            };
            out.demo(&demo::demo(scenario)?);
            Ok(())
        }
    }
}

fn validate(path: &std::path::Path, out: &mut Out) -> Outcome {
    let (model, lumps) = model::load_model(path)?;
    let diagnostics = model::validate_model(&model);
    if !diagnostics.is_empty() {
        for d in &diagnostics {
            eprintln!("{}: {d}", path.display());
        }
        return Err(Failure::Invalid(format!(
            "{} problem(s) in model",
            diagnostics.len()
        )));
    }
    let classes = model.classify()?;
    out.header(&["state", "class", "label"]);
    for s in model.states() {
        let kind = match classes.kind(s) {
            StateKind::Transient if model.transitional.contains(&s) => "transitional",
            StateKind::Transient => "transient",
            StateKind::Absorbing => "absorbing",
            StateKind::Reflex => "reflex",
        };
        out.row(&[
            s.to_string(),
            kind.into(),
            model.label(s).unwrap_or("").into(),
        ]);
    }
    if !lumps.is_empty() {
        out.note(&format!(
            "{} lump sum(s); run `extend` before valuation",
            lumps.entries.len()
        ));
    }
    Ok(())
}

fn extend(
    path: &std::path::Path,
    output: &std::path::Path,
    n: Option<usize>,
    out: &mut Out,
) -> Outcome {
    let (base, lumps) = model::load_model(path)?;
    let (extended, attachments) = model::extend_model(&base, &lumps)?;
    std::fs::write(output, model::format_model(&extended.model)).map_err(|e| Error::Io {
        path: output.to_path_buf(),
        source: e,
    })?;
    match n {
        Some(n) => {
            for f in cashflow::CashflowSpec::from_attachments(&attachments, n).entries {
                out.line(&format!(
                    "flow {} {} {} {}",
                    f.state, f.from, f.to, f.amount
                ));
            }
        }
        None => {
            out.header(&["state", "benefit"]);
            for a in &attachments {
                out.row(&[a.state.to_string(), a.benefit.amount.to_string()]);
            }
        }
    }
    Ok(())
}

fn table_check(chain: &ChainArgs, out: &mut Out) -> Outcome {
    let c = Chain::load(chain)?;
    let worst = c
        .seq
        .iter()
        .flat_map(|q| {
            q.rows()
                .into_iter()
                .map(|r| (r.sum() - 1.0).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    out.count("periods", c.seq.n() as u64);
    out.count("entry age", u64::from(c.entry_age));
    out.sci("max row-sum error", worst);
    let found = lifetable::diagonal_discrepancies(&c.table, &c.seq, &c.model);
    let states: BTreeSet<_> = found.iter().map(|d| d.state).collect();
    if !states.is_empty() {
        out.note(&format!(
            "(l(k+1) - sum d(k)) / l(k) differs from the diagonal used in {} row(s), states {:?}",
            found.len(),
            states
        ));
    }
    Ok(())
}

fn simulate(
    chain: &ChainArgs,
    discount: &DiscountArgs,
    contract: &ContractArgs,
    mode: &PremiumArgs,
    paths: usize,
    seed: u64,
    out: &mut Out,
) -> Outcome {
    let v = Valuation::load(chain, discount, contract)?;
    let ensemble = oracle::simulate(&v.chain.seq, &v.initial, paths, seed)?;
    let (exact, estimate) = if mode.period {
        let p = v.premium(mode)?;
        let mc = oracle::mc_premium(&ensemble, &v.c_in, &p.pay_states, &v.offsets, p.m, &v.m)?;
        (p.value, mc)
    } else {
        let pv = valuation::expected_pv(&v.c_in, &v.d, &v.m)?;
        (pv, oracle::mc_pv(&ensemble, &v.c_in, &v.m)?)
    };
    out.value("matrix", exact);
    out.value("monte carlo", estimate.mean);
    out.value("std error", estimate.std_error);
    if estimate.std_error > 0.0 {
        out.value("z", (estimate.mean - exact) / estimate.std_error);
    }
    out.count("paths", paths as u64);
    out.count("seed", seed);
    Ok(())
}

struct Chain {
    model: StateModel,
    table: lifetable::IncrementDecrementTable,
    seq: TransitionSequence,
    entry_age: u32,
}

impl Chain {
    fn load(args: &ChainArgs) -> Result<Self, Failure> {
        let model = match &args.model {
            Some(path) => {
                let (model, lumps) = model::load_model(path)?;
                if !lumps.is_empty() {
                    return Err(Failure::Invalid(format!(
                        "{} carries lump sums; run `extend` first and value the extended model",
                        path.display()
                    )));
                }
                model
            }
            None => fixtures::dread_disease_model(),
        };
        let table = match &args.table {
            Some(path) => lifetable::load_table(path, &model)?,
            None => fixtures::synthetic_table(match args.sex {
                SexArg::Female => Sex::Female,
                SexArg::Male => Sex::Male,
            }),
        };
        let seq = lifetable::transition_sequence(&table, &model)?;
        Ok(Chain {
            entry_age: table.entry_age,
            model,
            table,
            seq,
        })
    }

    fn distribution(&self) -> Result<DistributionMatrix, Failure> {
        let init = lifetable::initial_distribution(&self.model);
        Ok(lifetable::distribution_matrix(&self.seq, &init)?)
    }
}

fn discount_vector(args: &DiscountArgs, n: usize) -> Result<DiscountVector, Failure> {
    Ok(match (&args.rate, &args.discount_file) {
        (Some(r), _) => DiscountVector::from_rate(*r, n)?,
        (None, Some(path)) => valuation::load_discount(path, n)?,
        (None, None) => unreachable!("clap requires a discount source"),
    })
}

/// A chain, its discount vector and the benefit side of one contract.
struct Valuation {
    chain: Chain,
    initial: Vec<f64>,
    d: DistributionMatrix,
    m: DiscountVector,
    offsets: ArrivalOffsets,
    c_in: CashflowMatrix,
}

impl Valuation {
    fn load(
        chain: &ChainArgs,
        discount: &DiscountArgs,
        contract: &ContractArgs,
    ) -> Result<Self, Failure> {
        let chain = Chain::load(chain)?;
        let n = chain.seq.n();
        let n_states = chain.model.n_states;
        let builtin = contract.lambda.is_some() || contract.case.is_some();
        if builtin && n_states != DREAD_DISEASE_STATES {
            return Err(Failure::Invalid(format!(
                "built-in contracts use the {DREAD_DISEASE_STATES}-state dread-disease layout; model has {n_states} states"
            )));
        }
        let c = match (contract.lambda, contract.case, &contract.cashflow) {
            (Some(l), _, _) => cashflow::accelerated_life(l, n)?,
            (None, Some(id), _) => cashflow::dd_case(id, DdParams::default(), n)?,
            (None, None, Some(path)) => {
                cashflow::build(&cashflow::load_cashflow_spec(path)?, n, n_states)?
            }
            (None, None, None) => unreachable!("clap requires a contract source"),
        };
        let (c_in, c_out) = cashflow::split(&c);
        if c_out.as_array().iter().any(|&v| v != 0.0) {
            eprintln!("note: negative flows in the contract are ignored; premiums are computed");
        }
        let initial = lifetable::initial_distribution(&chain.model);
        let d = lifetable::distribution_matrix(&chain.seq, &initial)?;
        let m = discount_vector(discount, n)?;
        let offsets = model::shortest_arrival(&chain.model)?;
        Ok(Valuation {
            chain,
            initial,
            d,
            m,
            offsets,
            c_in,
        })
    }

    fn premium(&self, mode: &PremiumArgs) -> Result<PremiumResult, Failure> {
        if !mode.period {
            return Ok(valuation::net_single_premium(&self.c_in, &self.d, &self.m)?);
        }
        let (Some(term), Some(pay)) = (mode.m, &mode.pay_states) else {
            unreachable!("clap requires --m and --pay-states with --period");
        };
        let pay: BTreeSet<_> = pay.iter().copied().collect();
        if let Some(bad) = pay
            .iter()
            .find(|&&s| s == 0 || s > self.chain.model.n_states)
        {
            return Err(Failure::Invalid(format!(
                "pay state {bad} is not in the model"
            )));
        }
        Ok(valuation::period_premium(
            &self.c_in,
            &self.d,
            &self.m,
            &pay,
            &self.offsets,
            term,
        )?)
    }
}

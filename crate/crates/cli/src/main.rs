use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{Duration, NaiveDateTime};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use heatflow::config::SystemSpec;
use heatflow::evaluate::{eev, vss, Policy, SolveSetup};
use heatflow::model::{build_model, PlanningMode};
use heatflow::network::{FlowNetwork, NetworkOptions};
use heatflow::parallel::{with_jobs, Parallelism};
use heatflow::rolling::{roll_horizon, DataSource, RollConfig, StoreSource};
use heatflow::scenario::{block_bootstrap, history_weeks, sample_triangular, BootstrapConfig, ScenarioSet};
use heatflow::schedule::{metrics, schedule_rows, solve, Metrics, Schedule};
use heatflow::series::{fixed6, format_timestamp, parse_timestamp, write_values, Bundle, SeriesStore};
use heatflow::solver::{lp_string, mps_string, MilpStatus};
use heatflow::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "heatflow", version, about = "Stochastic production planning for district heating systems")]
struct Cli {
    /// Worker threads for scenario and sample evaluation.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Time limit per MILP solve in seconds.
    #[arg(long, global = true)]
    time_limit: Option<f64>,
    /// Relative optimality gap.
    #[arg(long, global = true)]
    gap: Option<f64>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Inputs {
    /// System config (TOML).
    config: PathBuf,
    /// First period, e.g. 2021-01-25T00:00:00. Defaults to the config's data start.
    #[arg(long)]
    start: Option<String>,
}

#[derive(Args, Debug)]
struct Horizon {
    /// Planning horizon in hours.
    #[arg(long)]
    horizon: Option<usize>,
    /// First-stage periods.
    #[arg(long)]
    first_stage: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a config and its data files.
    Validate {
        config: PathBuf,
    },
    /// Operational plan over the weighted-history scenarios.
    Plan {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        horizon: Horizon,
        /// Plan on the probability-weighted mean scenario only.
        #[arg(long)]
        expected: bool,
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
    },
    /// Day-ahead bid curves.
    Bid {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        horizon: Horizon,
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
    },
    /// Receding-horizon simulation settled on realized data.
    Roll {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        step: Option<usize>,
        #[arg(long, default_value_t = 14)]
        days: usize,
        #[arg(long, value_enum, default_value_t = Mode::Operational)]
        mode: Mode,
        /// Plan on the probability-weighted mean scenario.
        #[arg(long)]
        expected: bool,
        /// Plan on the realized data.
        #[arg(long, conflicts_with = "expected")]
        perfect_foresight: bool,
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
    },
    /// Deterministic plan over a long horizon of realized data.
    EvaluateLong {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = 28)]
        days: usize,
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
    },
    /// Draw synthetic weeks of the uncertain series.
    Sample {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Days per sample.
        #[arg(long, default_value_t = 7)]
        days: usize,
        /// Historical weeks for the triangular method.
        #[arg(long, default_value_t = 3)]
        weeks: usize,
        /// Days of history for the bootstrap method.
        #[arg(long, default_value_t = 28)]
        history_days: usize,
        /// Block length in hours for the bootstrap method.
        #[arg(long, default_value_t = 4)]
        block_hours: usize,
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
    },
    /// Write the planning model in MPS or LP format.
    Export {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        horizon: Horizon,
        #[arg(long, value_enum, default_value_t = Format::Mps)]
        format: Format,
        #[arg(long, value_enum, default_value_t = Mode::Operational)]
        mode: Mode,
        /// Output file.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Expected-value and stochastic solutions side by side, with the VSS.
    Metrics {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        horizon: Horizon,
        /// Row label, defaults to the system name.
        #[arg(long)]
        case: Option<String>,
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    Deterministic,
    Operational,
    Bidding,
}

impl From<Mode> for PlanningMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Deterministic => PlanningMode::Deterministic,
            Mode::Operational => PlanningMode::Operational,
            Mode::Bidding => PlanningMode::Bidding,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Method {
    Triangular,
    Bootstrap,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Format {
    Mps,
    Lp,
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_USAGE: u8 = 64;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Validation(_) => EXIT_VALIDATION,
        Error::NoSolution { .. } | Error::BidCurve(_) => EXIT_SOLVER,
        Error::Io { .. } | Error::Csv { .. } | Error::Data(_) => EXIT_IO,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match with_jobs(cli.jobs, || run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Loads and validates a config; warnings go to the log.
fn load(path: &Path) -> Result<SystemSpec> {
    let spec = SystemSpec::load(path)?;
    let report = spec.validate();
    for w in &report.warnings {
        log::warn!("{w}");
    }
    report.into_result()?;
    Ok(spec)
}

fn start_of(spec: &SystemSpec, inputs: &Inputs) -> Result<NaiveDateTime> {
    let text = inputs
        .start
        .as_deref()
        .or(spec.data.start.as_deref())
        .ok_or_else(|| Error::Config("no start given and the config has no data.start".into()))?;
    parse_timestamp(text).ok_or_else(|| Error::Config(format!("cannot parse start '{text}'")))
}

fn setup(cli: &Cli, spec: &SystemSpec, mode: PlanningMode) -> SolveSetup {
    let mut s = SolveSetup::new(spec, mode);
    if let Some(g) = cli.gap {
        s.params.gap_tol = g;
    }
    if let Some(t) = cli.time_limit {
        s.params.time_limit = Some(std::time::Duration::from_secs_f64(t));
    }
    s.par = parallelism(cli);
    s
}

fn parallelism(cli: &Cli) -> Parallelism {
    if cli.jobs == Some(1) { Parallelism::Sequential } else { Parallelism::Parallel }
}

fn net_options(spec: &SystemSpec, h: &Horizon) -> Result<NetworkOptions> {
    let horizon = h.horizon.unwrap_or(spec.defaults.horizon);
    let first_stage = h.first_stage.unwrap_or(spec.defaults.first_stage).min(horizon);
    if horizon == 0 {
        return Err(Error::Config("horizon must be positive".into()));
    }
    Ok(NetworkOptions::new(spec, horizon, first_stage))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

struct Table {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl Table {
    fn create(path: PathBuf, header: &[&str]) -> Result<Table> {
        if let Some(dir) = path.parent() {
            create_dir(dir)?;
        }
        let writer = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        let mut t = Table { path, writer };
        t.row(header.iter().map(|s| s.to_string()))?;
        Ok(t)
    }

    fn row(&mut self, fields: impl IntoIterator<Item = String>) -> Result<()> {
        let fields: Vec<String> = fields.into_iter().collect();
        self.writer.write_record(&fields).map_err(|e| csv_error(&self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Csv { path: path.to_path_buf(), message: e.to_string() }
}

fn num(v: f64) -> String {
    fixed6(v)
}

const METRIC_COLUMNS: [&str; 10] = [
    "objective",
    "heat_MWh",
    "heat_produced_MWh",
    "res_heat_MWh",
    "el_net_MWh",
    "market_income",
    "imbalance_MWh",
    "missing_heat_MWh",
    "cost_per_MWh",
    "res_share_pct",
];

fn metric_fields(m: &Metrics) -> Vec<String> {
    [
        m.objective,
        m.heat_delivered,
        m.heat_produced,
        m.res_heat,
        m.el_net,
        m.market_income,
        m.imbalance,
        m.missing_heat,
        m.cost_per_mwh,
        100.0 * m.res_share,
    ]
    .into_iter()
    .map(num)
    .collect()
}

fn write_metrics(path: PathBuf, m: &Metrics) -> Result<()> {
    let mut t = Table::create(path, &METRIC_COLUMNS)?;
    t.row(metric_fields(m))?;
    t.finish()
}

fn write_schedule(path: PathBuf, net: &FlowNetwork, sched: &Schedule, start: NaiveDateTime) -> Result<()> {
    let mut t = Table::create(path, &["scenario", "timestamp", "kind", "from", "to", "energy", "value"])?;
    for w in 0..net.num_scenarios() {
        for r in schedule_rows(net, sched, start, w, net.horizon) {
            t.row([w.to_string(), format_timestamp(r.timestamp), r.kind.into(), r.from, r.to, r.energy, num(r.value)])?;
        }
    }
    t.finish()
}

fn write_policy(path: PathBuf, policy: &Policy, start: NaiveDateTime) -> Result<()> {
    let ts = |t: usize| format_timestamp(start + Duration::hours(t as i64));
    match policy {
        Policy::Operational { statuses, flows } => {
            let mut t = Table::create(path, &["timestamp", "kind", "from", "to", "energy", "value"])?;
            for (unit, p, on) in statuses {
                t.row([ts(*p), "status".into(), unit.clone(), String::new(), String::new(), (*on as u8).to_string()])?;
            }
            for (from, to, energy, p, v) in flows {
                t.row([ts(*p), "flow".into(), from.clone(), to.clone(), energy.clone(), num(*v)])?;
            }
            t.finish()
        }
        Policy::Bidding { curves } => {
            let mut t = Table::create(path, &["market", "timestamp", "side", "price", "quantity"])?;
            for c in curves {
                let side = match c.side {
                    heatflow::config::MarketSide::Selling => "selling",
                    heatflow::config::MarketSide::Buying => "buying",
                };
                for &(price, q) in &c.steps {
                    t.row([c.market.clone(), ts(c.period), side.into(), num(price), num(q)])?;
                }
            }
            t.finish()
        }
    }
}

fn planning_set(spec: &SystemSpec, store: &SeriesStore, start: NaiveDateTime, len: usize) -> Result<ScenarioSet> {
    StoreSource::new(spec, store).planning(start, len)
}

fn report_status(sched: &Schedule) {
    if sched.status != MilpStatus::Optimal {
        log::warn!("solver stopped with status {} and gap {:.3e}", sched.status.as_str(), sched.gap);
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Validate { config } => {
            let spec = load(config)?;
            // data files must exist and parse as well
            let store = SeriesStore::load(&spec)?;
            for name in spec.referenced_series() {
                store.get(&name)?;
            }
            println!("{}: ok ({} vertices, {} connections, {} markets)", config.display(), spec.vertices.len(), spec.connections.len(), spec.markets.len());
            Ok(())
        }
        Command::Plan { inputs, horizon, expected, out } => {
            let spec = load(&inputs.config)?;
            let start = start_of(&spec, inputs)?;
            let store = SeriesStore::load(&spec)?;
            let opts = net_options(&spec, horizon)?;
            let mut set = planning_set(&spec, &store, start, opts.horizon)?;
            if *expected {
                set = set.expected();
            }
            let setup = setup(cli, &spec, PlanningMode::Operational);
            let net = FlowNetwork::build(&spec, &set, &opts)?;
            let (_, sched) = solve(&net, &setup.model, None, &setup.params)?;
            report_status(&sched);
            let policy = Policy::from_schedule(&net, &sched, PlanningMode::Operational, opts.first_stage)?;
            create_dir(out)?;
            write_schedule(out.join("schedule.csv"), &net, &sched, start)?;
            write_policy(out.join("first_stage.csv"), &policy, start)?;
            write_metrics(out.join("metrics.csv"), &metrics(&net, &sched))?;
            println!("expected cost {:.2} over {} scenarios, gap {:.2e}", sched.objective, net.num_scenarios(), sched.gap);
            Ok(())
        }
        Command::Bid { inputs, horizon, out } => {
            let spec = load(&inputs.config)?;
            let start = start_of(&spec, inputs)?;
            let store = SeriesStore::load(&spec)?;
            let opts = net_options(&spec, horizon)?;
            let set = planning_set(&spec, &store, start, opts.horizon)?;
            let setup = setup(cli, &spec, PlanningMode::Bidding);
            let net = FlowNetwork::build(&spec, &set, &opts)?;
            let (_, sched) = solve(&net, &setup.model, None, &setup.params)?;
            report_status(&sched);
            let policy = Policy::from_schedule(&net, &sched, PlanningMode::Bidding, opts.first_stage)?;
            create_dir(out)?;
            write_policy(out.join("curves.csv"), &policy, start)?;
            write_schedule(out.join("schedule.csv"), &net, &sched, start)?;
            write_metrics(out.join("metrics.csv"), &metrics(&net, &sched))?;
            println!("expected cost {:.2} over {} scenarios, gap {:.2e}", sched.objective, net.num_scenarios(), sched.gap);
            Ok(())
        }
        Command::Roll { inputs, window, step, days, mode, expected, perfect_foresight, out } => {
            let spec = load(&inputs.config)?;
            let start = start_of(&spec, inputs)?;
            let store = SeriesStore::load(&spec)?;
            let mode = PlanningMode::from(*mode);
            let cfg = RollConfig {
                window: window.unwrap_or(spec.defaults.window),
                step: step.unwrap_or(spec.defaults.step),
                total: days * 24,
                mode,
                expected: *expected,
                perfect_foresight: *perfect_foresight,
            };
            let setup = setup(cli, &spec, mode);
            let source = StoreSource::new(&spec, &store);
            let outcome = roll_horizon(&spec, &source, start, &cfg, &setup)?;
            create_dir(out)?;
            outcome.write_trace(out)?;
            println!("{} iterations, realized cost {:.2}", outcome.iterations.len(), outcome.realized_total());
            Ok(())
        }
        Command::EvaluateLong { inputs, days, out } => {
            let spec = load(&inputs.config)?;
            let start = start_of(&spec, inputs)?;
            let store = SeriesStore::load(&spec)?;
            let len = days * 24;
            let realized = StoreSource::new(&spec, &store).realized(start, len)?;
            let setup = setup(cli, &spec, PlanningMode::Deterministic);
            let net = FlowNetwork::build(&spec, &realized, &NetworkOptions::new(&spec, len, len))?;
            let (_, sched) = solve(&net, &setup.model, None, &setup.params)?;
            report_status(&sched);
            create_dir(out)?;
            write_schedule(out.join("schedule.csv"), &net, &sched, start)?;
            let m = metrics(&net, &sched);
            write_metrics(out.join("metrics.csv"), &m)?;
            println!("cost {:.2}, heat {:.1} MWh, {:.2} per MWh, gap {:.2e}", m.objective, m.heat_delivered, m.cost_per_mwh, sched.gap);
            Ok(())
        }
        Command::Sample { inputs, method, count, seed, days, weeks, history_days, block_hours, out } => {
            let spec = load(&inputs.config)?;
            let start = start_of(&spec, inputs)?;
            let store = SeriesStore::load(&spec)?;
            let keys: Vec<String> = spec.uncertainty.price.iter().chain(&spec.uncertainty.heat_flow).cloned().collect();
            if keys.is_empty() {
                return Err(Error::Config("the config lists no uncertain series".into()));
            }
            let count = count.unwrap_or(spec.defaults.samples);
            let seed = seed.unwrap_or(spec.defaults.seed);
            let len = days * 24;
            let (name, samples): (&str, Vec<Bundle>) = match method {
                Method::Triangular => {
                    let hist = history_weeks(&store, &keys, start, len, *weeks)?;
                    let nonneg = spec.uncertainty.heat_flow.iter().cloned().collect();
                    ("triangular", sample_triangular(&hist, &keys, &nonneg, count, seed, parallelism(cli))?)
                }
                Method::Bootstrap => {
                    let hist_start = start - Duration::days(*history_days as i64);
                    let hist = store.bundle(&keys, hist_start, history_days * 24)?;
                    let cfg = BootstrapConfig { block_hours: *block_hours, days: *days, count, seed };
                    ("bootstrap", block_bootstrap(&hist, hist_start, start, &cfg, parallelism(cli))?)
                }
            };
            for (i, sample) in samples.iter().enumerate() {
                for (key, values) in sample {
                    write_values(&out.join("samples").join(name).join(i.to_string()).join(format!("{key}.csv")), start, values)?;
                }
            }
            println!("{} {name} samples of {} series", samples.len(), keys.len());
            Ok(())
        }
        Command::Export { inputs, horizon, format, mode, out } => {
            let spec = load(&inputs.config)?;
            let start = start_of(&spec, inputs)?;
            let store = SeriesStore::load(&spec)?;
            let opts = net_options(&spec, horizon)?;
            let set = planning_set(&spec, &store, start, opts.horizon)?;
            let net = FlowNetwork::build(&spec, &set, &opts)?;
            let model = build_model(&net, &setup(cli, &spec, PlanningMode::from(*mode)).model, None)?;
            let text = match format {
                Format::Mps => mps_string(&model.problem),
                Format::Lp => lp_string(&model.problem),
            };
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                create_dir(dir)?;
            }
            fs::write(out, text).map_err(|e| Error::io(out, e))?;
            println!(
                "{} variables ({} integer), {} rows written to {}",
                model.problem.num_vars(),
                model.problem.num_integer(),
                model.problem.num_constraints(),
                out.display()
            );
            Ok(())
        }
        Command::Metrics { inputs, horizon, case, out } => {
            let spec = load(&inputs.config)?;
            let start = start_of(&spec, inputs)?;
            let store = SeriesStore::load(&spec)?;
            let opts = net_options(&spec, horizon)?;
            let set = planning_set(&spec, &store, start, opts.horizon)?;
            let setup = setup(cli, &spec, PlanningMode::Operational);
            let net = FlowNetwork::build(&spec, &set, &opts)?;
            let (_, rp) = solve(&net, &setup.model, None, &setup.params)?;
            report_status(&rp);
            let sto = metrics(&net, &rp);
            let ev = eev(&spec, &set, &opts, &setup)?;
            let (v, pct) = vss(rp.objective, ev.eev);
            create_dir(out)?;
            let mut t = Table::create(
                out.join("vss.csv"),
                &["case", "exp_obj", "exp_heat_MWh", "exp_cost_per_MWh", "sto_obj", "sto_heat_MWh", "sto_cost_per_MWh", "vss", "vss_pct"],
            )?;
            let label = case.clone().unwrap_or_else(|| spec.name.clone());
            t.row(
                std::iter::once(label).chain(
                    [ev.eev, ev.metrics.heat_delivered, ev.metrics.cost_per_mwh, rp.objective, sto.heat_delivered, sto.cost_per_mwh, v, pct]
                        .into_iter()
                        .map(num),
                ),
            )?;
            t.finish()?;
            write_metrics(out.join("metrics.csv"), &sto)?;
            println!("EEV {:.2}, RP {:.2}, VSS {:.2} ({:.2}%)", ev.eev, rp.objective, v, pct);
            Ok(())
        }
    }
}

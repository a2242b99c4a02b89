use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use heatflow::solver::{parse_mps, solve_milp, MilpStatus, SolveParams};

const TOY: &str = r#"
name = "toy"
energy_types = ["NG", "H", "EL"]

[defaults]
horizon = 12
first_stage = 6
gap = 1e-6

[data]
dir = "data"
start = "2021-01-25T00:00:00"
series = { price = "price.csv", heat = "heat.csv" }

[uncertainty]
price = ["price"]
heat_flow = ["heat"]

[[vertices]]
id = "gas"
kind = "source"
energy = "NG"
cost_out.NG = 20.0

[[vertices]]
id = "chp"
commitment = true
first_stage = true
start_cost = 30.0
min_up = 2
inflow.NG = { upper = 15.0 }
outflow.H = { lower = 2.0, upper = 6.0 }
outflow.EL = { upper = 6.0 }
conversion = [{ from = "NG", to = "H", factor = 0.4 }, { from = "NG", to = "EL", factor = 0.4 }]

[[vertices]]
id = "boiler"
inflow.NG = { upper = 10.0 }
outflow.H = { upper = 9.0 }
cost_out.H = 2.0
conversion = [{ from = "NG", to = "H", factor = 0.9 }]

[[vertices]]
id = "tank"
kind = "storage"
energy = "H"
capacity = 6.0
loss = 0.01
max_flow = 5.0
initial_level = 1.0
target_level = 1.0

[[vertices]]
id = "town"
kind = "demand"
energy = "H"
inflow.H = { lower = { series = "heat" }, upper = { series = "heat" } }

[[markets]]
id = "da"
side = "selling"
energy = "EL"
price = { series = "price" }

[[connections]]
from = "gas"
to = "chp"
energy = "NG"

[[connections]]
from = "gas"
to = "boiler"
energy = "NG"

[[connections]]
from = "chp"
to = "town"
energy = "H"

[[connections]]
from = "chp"
to = "tank"
energy = "H"

[[connections]]
from = "boiler"
to = "town"
energy = "H"

[[connections]]
from = "tank"
to = "town"
energy = "H"

[[connections]]
from = "chp"
to = "da"
energy = "EL"
"#;

fn heatflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatflow")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_series(path: &Path, values: impl Iterator<Item = f64>) {
    let mut text = String::from("timestamp,value\n");
    let start = chrono::NaiveDate::from_ymd_opt(2021, 1, 4).unwrap().and_hms_opt(0, 0, 0).unwrap();
    for (i, v) in values.enumerate() {
        let t = start + chrono::Duration::hours(i as i64);
        text.push_str(&format!("{},{v:.3}\n", t.format("%Y-%m-%dT%H:%M:%S")));
    }
    fs::write(path, text).unwrap();
}

/// Toy system with six weeks of data starting three weeks before the plan.
fn toy_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fs::create_dir(&data).unwrap();
    let hours = 42 * 24;
    write_series(
        &data.join("price.csv"),
        (0..hours).map(|t| 30.0 + 25.0 * ((t % 24) as f64 / 24.0 * std::f64::consts::TAU).sin() + ((t * 7919) % 13) as f64),
    );
    write_series(
        &data.join("heat.csv"),
        (0..hours).map(|t| 5.0 + 2.0 * ((t % 24) as f64 / 24.0 * std::f64::consts::TAU).cos() + ((t * 104729) % 7) as f64 * 0.3),
    );
    fs::write(dir.path().join("toy.toml"), TOY).unwrap();
    dir
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn shipped_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["middelfart", "bronderslev", "hillerod"] {
        let out = heatflow(&["validate", path_str(&root.join(format!("{name}.toml")))]);
        assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn exit_codes() {
    let dir = toy_dir();
    let cfg = dir.path().join("toy.toml");
    assert_eq!(code(&heatflow(&["validate", path_str(&cfg)])), 0);
    assert_eq!(code(&heatflow(&["--help"])), 0);
    assert_eq!(code(&heatflow(&["plan", "--no-such-flag", path_str(&cfg)])), 64);
    assert_eq!(code(&heatflow(&["frobnicate"])), 64);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, TOY.replace("factor = 0.9", "factor = -0.9")).unwrap();
    assert_eq!(code(&heatflow(&["validate", path_str(&bad)])), 1);
    let broken = dir.path().join("broken.toml");
    fs::write(&broken, "energy_types = [").unwrap();
    assert_eq!(code(&heatflow(&["validate", path_str(&broken)])), 1);

    fs::remove_file(dir.path().join("data/heat.csv")).unwrap();
    assert_eq!(code(&heatflow(&["validate", path_str(&cfg)])), 3);
    assert_eq!(code(&heatflow(&["validate", path_str(&dir.path().join("missing.toml"))])), 3);
}

#[test]
fn plan_writes_schedule_and_metrics() {
    let dir = toy_dir();
    let out = dir.path().join("out");
    let res = heatflow(&["plan", path_str(&dir.path().join("toy.toml")), "-o", path_str(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert!(lines.next().unwrap().starts_with("objective,heat_MWh"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!(row[1] > 0.0);
    assert!(!metrics.contains("-0.000000"));
    let schedule = fs::read_to_string(out.join("schedule.csv")).unwrap();
    assert!(schedule.lines().count() > 12);
    assert!(out.join("first_stage.csv").exists());
}

#[test]
fn roll_writes_one_summary_row_per_iteration() {
    let dir = toy_dir();
    let out = dir.path().join("out");
    let cfg = dir.path().join("toy.toml");
    let res = heatflow(&["roll", path_str(&cfg), "--window", "24", "--step", "12", "--days", "2", "-o", path_str(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    for (i, r) in rows.iter().enumerate() {
        assert!(r.starts_with(&format!("{i},")));
        assert!(out.join(format!("iteration_{i}/schedule.csv")).exists());
    }
}

#[test]
fn sample_is_reproducible_and_seed_dependent() {
    let dir = toy_dir();
    let cfg = dir.path().join("toy.toml");
    let run = |name: &str, seed: &str, method: &str| {
        let out = dir.path().join(name);
        let res = heatflow(&[
            "sample",
            path_str(&cfg),
            "--method",
            method,
            "--count",
            "3",
            "--seed",
            seed,
            "--days",
            "2",
            "--history-days",
            "14",
            "-o",
            path_str(&out),
        ]);
        assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
        files(&out)
    };
    for method in ["triangular", "bootstrap"] {
        let a = run(&format!("{method}_a"), "7", method);
        let b = run(&format!("{method}_b"), "7", method);
        let c = run(&format!("{method}_c"), "8", method);
        assert_eq!(a.len(), 6, "{method}: two series times three samples");
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = toy_dir();
    let cfg = dir.path().join("toy.toml");
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}"));
        for args in [
            vec!["plan", path_str(&cfg), "-o"],
            vec!["bid", path_str(&cfg), "-o"],
            vec!["metrics", path_str(&cfg), "-o"],
        ] {
            let mut args = args;
            args.push(path_str(&out));
            let res = heatflow(&args);
            assert_eq!(code(&res), 0, "{args:?}: {}", String::from_utf8_lossy(&res.stderr));
        }
        outputs.push(files(&out));
    }
    assert!(!outputs[0].is_empty());
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn exported_mps_solves_to_plan_objective() {
    let dir = toy_dir();
    let cfg = dir.path().join("toy.toml");
    let mps = dir.path().join("model.mps");
    let res = heatflow(&["export", path_str(&cfg), "--format", "mps", "-o", path_str(&mps)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let problem = parse_mps(&fs::read_to_string(&mps).unwrap()).unwrap();
    let outcome = solve_milp(&problem, &SolveParams { gap_tol: 0.0, ..SolveParams::default() });
    assert_eq!(outcome.status, MilpStatus::Optimal);

    let out = dir.path().join("out");
    let res = heatflow(&["--gap", "0", "plan", path_str(&cfg), "-o", path_str(&out)]);
    assert_eq!(code(&res), 0);
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let planned: f64 = metrics.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((planned - outcome.objective).abs() <= 1e-6 * (1.0 + planned.abs()), "{planned} vs {}", outcome.objective);

    let lp = dir.path().join("model.lp");
    let res = heatflow(&["export", path_str(&cfg), "--format", "lp", "-o", path_str(&lp)]);
    assert_eq!(code(&res), 0);
    let text = fs::read_to_string(&lp).unwrap();
    assert!(text.contains("Minimize") || text.contains("minimize"));
}

#[test]
fn one_job_matches_the_pool() {
    let dir = toy_dir();
    let cfg = dir.path().join("toy.toml");
    let mut outputs = Vec::new();
    for (name, jobs) in [("one", "1"), ("pool", "4")] {
        let out = dir.path().join(name);
        for cmd in ["metrics", "sample"] {
            let mut args = vec!["--jobs", jobs, cmd, path_str(&cfg), "-o", path_str(&out)];
            if cmd == "sample" {
                args.extend(["--method", "triangular", "--count", "5", "--days", "2"]);
            }
            let res = heatflow(&args);
            assert_eq!(code(&res), 0, "{args:?}: {}", String::from_utf8_lossy(&res.stderr));
        }
        outputs.push(files(&out));
    }
    assert_eq!(outputs[0], outputs[1]);
}

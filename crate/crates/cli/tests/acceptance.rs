//! Acceptance suite at desk scale. Criteria run sequentially so their
//! wall-clock limits are meaningful; each prints one line.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use spdelab_core::config::{PhiFamily, ScenarioConfig};
use spdelab_core::experiments::{coupling_check, run_harnack, run_shift, strong_order_study, InequalityOutcome};
use spdelab_core::harnack::HarnackKind;
use spdelab_core::nonexplosion::run_bihari;
use spdelab_core::zvonkin::{run_zvonkin, CONSTANT_TOL};
use spdelab_core::{build_model, Error, Scenario, SegmentView};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ScenarioConfig {
    let text = std::fs::read_to_string(configs().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    toml::from_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

struct Runner {
    failures: usize,
}

impl Runner {
    fn run(&mut self, id: u32, title: &str, limit: Duration, f: impl FnOnce() -> Verdict) {
        let start = Instant::now();
        let v = f();
        self.report(id, title, limit, start.elapsed(), v);
    }

    fn report(&mut self, id: u32, title: &str, limit: Duration, elapsed: Duration, v: Verdict) {
        let in_time = elapsed <= limit;
        let pass = v.pass && in_time;
        if !pass {
            self.failures += 1;
        }
        println!(
            "criterion {id:>2} {}: {title} [{:.1} s of {} s{}] {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over time" },
            v.detail
        );
    }
}

fn assumption_gate() -> Verdict {
    let cfg = load("default.toml");
    let ops = match build_model(&cfg) {
        Ok(ops) => ops,
        Err(e) => return verdict(false, format!("default model rejected: {e}")),
    };
    let labels: Vec<&str> = ops.report.checks.iter().map(|c| c.label).collect();
    let covered = ["(a1)", "(A2)(i)", "(A2)(ii)", "(A2)(iii)", "(A5)"]
        .iter()
        .all(|l| labels.contains(l));
    let mut ok = ops.report.all_pass && covered;
    let mut detail = format!("default all-pass {}", ops.report.all_pass);
    for (file, expected) in [
        ("broken_singular_q.toml", "(A2)(i)"),
        ("broken_b_zero_row.toml", "(A2)(ii)"),
        ("broken_a5.toml", "(A5)"),
    ] {
        let got = match build_model(&load(file)) {
            Err(Error::AssumptionViolation { condition, .. }) => condition.label().to_string(),
            Err(e) => format!("other error: {e}"),
            Ok(_) => "accepted".to_string(),
        };
        ok &= got == expected;
        detail += &format!(", {file} -> {got}");
    }
    verdict(ok, detail)
}

fn coupling_targets(sc: &Scenario, cfg: &ScenarioConfig) -> Verdict {
    let mut cc = cfg.experiment.coupling.clone();
    cc.draws = 20;
    cc.h_magnitudes.clear();
    match coupling_check(sc, &cc, cfg.simulation.seed) {
        Ok(out) => {
            let worst_h = out.draws.iter().map(|d| d.harnack_residual).fold(0.0, f64::max);
            let worst_s = out.draws.iter().map(|d| d.shift_residual).fold(0.0, f64::max);
            verdict(
                out.draws.len() == 20 && worst_h < 1e-8 && worst_s < 1e-8,
                format!(
                    "{} draws, worst |Γ(T)| {worst_h:.2e}, worst shift residual {worst_s:.2e}",
                    out.draws.len()
                ),
            )
        }
        Err(e) => verdict(false, e.to_string()),
    }
}

fn normalization(sc: &Scenario, cfg: &ScenarioConfig) -> Verdict {
    let mut cc = cfg.experiment.coupling.clone();
    cc.draws = 0;
    cc.h_magnitudes = vec![0.1, 0.5, 1.0];
    cc.n_paths = 10_000;
    match coupling_check(sc, &cc, cfg.simulation.seed) {
        Ok(out) => {
            let rows: Vec<String> = out
                .normalization
                .iter()
                .map(|r| {
                    format!(
                        "|h|={} E R={:.4}±{:.4}",
                        r.shift_norm, r.mean_r.mean, r.mean_r.std_error
                    )
                })
                .collect();
            let ok = out.normalization.len() == 3
                && out
                    .normalization
                    .iter()
                    .all(|r| (r.mean_r.mean - 1.0).abs() <= 4.0 * r.mean_r.std_error);
            verdict(ok, rows.join(", "))
        }
        Err(e) => verdict(false, e.to_string()),
    }
}

fn transfer(h: &InequalityOutcome, s: &InequalityOutcome) -> Verdict {
    let count = |o: &InequalityOutcome| o.transfer.rows.iter().filter(|r| r.agree).count();
    let total = h.transfer.rows.len() + s.transfer.rows.len();
    let functionals: std::collections::BTreeSet<&str> = h.transfer.rows.iter().map(|r| r.functional.as_str()).collect();
    let ok = h.transfer.pass && s.transfer.pass && functionals.len() == 5 && h.transfer.z == 3.0 && s.transfer.z == 3.0;
    verdict(
        ok,
        format!(
            "{} of {total} rows agree at 3 SE ({} functionals)",
            count(h) + count(s),
            functionals.len()
        ),
    )
}

fn slacks(rows: &[&spdelab_core::harnack::InequalityReport]) -> String {
    rows.iter()
        .map(|r| format!("{:.3}", r.slack))
        .collect::<Vec<_>>()
        .join("/")
}

fn harnack_rows(out: &InequalityOutcome, log: HarnackKind, power: HarnackKind) -> Verdict {
    let log_rows = out.rows(log, None);
    let p2_rows = out.rows(power, Some(2.0));
    let ok = !log_rows.is_empty()
        && !p2_rows.is_empty()
        && log_rows
            .iter()
            .chain(&p2_rows)
            .all(|r| r.pass && r.z == 3.0 && r.sharp_bound.is_finite())
        && out.monotone_log
        && out.monotone_power;
    verdict(
        ok,
        format!(
            "log slack {}, p=2 slack {}, monotone {}/{}, C={:.3}",
            slacks(&log_rows),
            slacks(&p2_rows),
            out.monotone_log,
            out.monotone_power,
            out.calibration.c
        ),
    )
}

fn strong_order(sc: &Scenario, cfg: &ScenarioConfig) -> Verdict {
    let sim = &cfg.experiment.simulate;
    let dts = [1e-1, 1e-2, 1e-3, 1e-4];
    match strong_order_study(
        &sc.ops,
        sc.xi0.lag(0),
        &dts,
        sim.order_paths,
        sim.order_horizon,
        cfg.simulation.seed,
    ) {
        Ok(out) => verdict(
            (0.7..=1.3).contains(&out.slope),
            format!("slope {:.3} over dt 1e-1..1e-4", out.slope),
        ),
        Err(e) => verdict(false, e.to_string()),
    }
}

fn zvonkin() -> Verdict {
    match run_zvonkin(&load("zvonkin.toml")) {
        Ok(out) => {
            let rows = &out.decay.rows;
            let lambdas: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
            let non_increasing = rows.windows(2).all(|w| {
                w[1].sup_norm <= w[0].sup_norm && w[1].grad_norm <= w[0].grad_norm && w[1].mixed_norm <= w[0].mixed_norm
            });
            let ok = out.constant.error < CONSTANT_TOL && lambdas == [1.0, 10.0, 100.0] && non_increasing;
            let sup: Vec<String> = rows.iter().map(|r| format!("{:.2e}", r.sup_norm)).collect();
            verdict(
                ok,
                format!(
                    "closed-form error {:.1e}, sup norms {}",
                    out.constant.error,
                    sup.join("/")
                ),
            )
        }
        Err(e) => verdict(false, e.to_string()),
    }
}

fn bihari(sc: &Scenario) -> Verdict {
    match run_bihari(sc) {
        Ok(out) => {
            let affine = matches!(out.growth.phi, PhiFamily::Affine { .. });
            let ok = affine && out.paths.len() == 100 && out.passed == 100 && out.falsified_failures >= 1;
            verdict(
                ok,
                format!(
                    "{}/{} paths bounded, control fails on {}",
                    out.passed,
                    out.paths.len(),
                    out.falsified_failures
                ),
            )
        }
        Err(e) => verdict(false, e.to_string()),
    }
}

const REDUCED: &str = r#"
[experiment.coupling]
n_paths = 400
[experiment.harnack]
n_paths = 400
[experiment.shift]
n_paths = 400
[experiment.bihari]
n_paths = 20
"#;

fn csv_bodies(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            let body: String = text
                .lines()
                .filter(|l| !l.starts_with('#'))
                .map(|l| format!("{l}\n"))
                .collect();
            (p.file_name().unwrap().to_string_lossy().into_owned(), body)
        })
        .collect()
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let with = |base: &str| {
        let mut text = std::fs::read_to_string(configs().join(base)).unwrap();
        text.push_str(REDUCED);
        let path = tmp.path().join(format!("reduced_{base}"));
        std::fs::write(&path, text).unwrap();
        path
    };
    let default = with("default.toml");
    let shift = with("shift.toml");
    let zv = configs().join("zvonkin.toml");
    let runs: [(&str, &Path); 7] = [
        ("validate", &default),
        ("simulate", &default),
        ("coupling-check", &default),
        ("harnack", &default),
        ("shift-harnack", &shift),
        ("zvonkin", &zv),
        ("bihari", &default),
    ];
    let mut mismatched = Vec::new();
    let mut files = 0;
    for (cmd, cfg) in runs {
        let mut outs = Vec::new();
        for threads in [1, 4] {
            let out = tmp.path().join(format!("{cmd}-{threads}"));
            let status = Command::new(env!("CARGO_BIN_EXE_spdelab"))
                .args([cmd, "--config"])
                .arg(cfg)
                .arg("--out")
                .arg(&out)
                .args(["--threads", &threads.to_string(), "--seed", "7"])
                .output()
                .expect("spawn spdelab");
            outs.push((status.status.code(), csv_bodies(&out)));
        }
        files += outs[0].1.len();
        if outs[0] != outs[1] || outs[0].1.is_empty() {
            mismatched.push(cmd);
        }
    }
    verdict(
        mismatched.is_empty(),
        if mismatched.is_empty() {
            format!("{files} CSV bodies identical across --threads 1 and 4")
        } else {
            format!("differences in {}", mismatched.join(", "))
        },
    )
}

fn main() {
    // libtest flags such as `--list` are passed through by cargo.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut runner = Runner { failures: 0 };
    let secs = Duration::from_secs;

    runner.run(1, "assumption gate", secs(1), assumption_gate);

    let cfg = load("default.toml");
    let sc = Scenario::build(&cfg).expect("default scenario");
    runner.run(2, "coupling hits its target", secs(5), || coupling_targets(&sc, &cfg));
    runner.run(3, "Girsanov normalization", secs(120), || normalization(&sc, &cfg));

    let hc = &cfg.experiment.harnack;
    let start = Instant::now();
    let harnack = run_harnack(&sc, hc, 10_000, cfg.simulation.seed);
    let harnack_time = start.elapsed();

    let shift_cfg = load("shift.toml");
    let shift_sc = Scenario::build(&shift_cfg).expect("undelayed scenario");
    let start = Instant::now();
    let shift = run_shift(
        &shift_sc,
        &shift_cfg.experiment.shift,
        10_000,
        shift_cfg.simulation.seed,
    );
    let shift_time = start.elapsed();

    let failed = |e: &Error| verdict(false, e.to_string());
    let v4 = match (&harnack, &shift) {
        (Ok(h), Ok(s)) => transfer(h, s),
        (Err(e), _) | (_, Err(e)) => failed(e),
    };
    runner.report(4, "law transfer", secs(300), harnack_time + shift_time, v4);
    let v5 = match &harnack {
        Ok(h) => harnack_rows(h, HarnackKind::Log, HarnackKind::Power),
        Err(e) => failed(e),
    };
    runner.report(5, "log and power Harnack", secs(600), harnack_time, v5);
    let v6 = match &shift {
        Ok(s) => harnack_rows(s, HarnackKind::ShiftLog, HarnackKind::ShiftPower),
        Err(e) => failed(e),
    };
    runner.report(6, "shift Harnack", secs(300), shift_time, v6);

    runner.run(7, "strong order of the scheme", secs(120), || strong_order(&sc, &cfg));
    runner.run(8, "backward equation solver", secs(300), zvonkin);
    runner.run(9, "Bihari bound", secs(120), || bihari(&sc));
    runner.run(10, "determinism across thread counts", secs(600), determinism);

    println!("acceptance: {} of 10 criteria passed", 10 - runner.failures);
    if runner.failures > 0 {
        std::process::exit(1);
    }
}

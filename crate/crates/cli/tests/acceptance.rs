//! Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on
//! any failure. Runtime limits are checked alongside the numeric targets.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use chrono::Datelike;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scengen_core::bnet::bic_score;
use scengen_core::config::RunConfig;
use scengen_core::fixture::{generate, Fixture, FixtureOptions};
use scengen_core::marginal::{fit_kde, Support};
use scengen_core::pipeline::{fit_model, horizon, simulate_monthly, Inputs};
use scengen_core::{
    build_report, disaggregate, fisher_z_pair, fit_disagg, forward, full_count, inverse, learn_structure,
    parameter_count, Dag, Marginals, ProfileLibrary, Units,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: u32, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let in_time = limit.is_none_or(|l| took < l);
    let pass = out.pass && in_time;
    let budget = limit.map_or(String::new(), |l| format!(" / {:.0} s", l.as_secs_f64()));
    println!(
        "{} [{id}] {name}: {} ({:.2} s{budget})",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64()
    );
    pass
}

fn fixture(n_stations: usize, hourly: bool) -> Fixture {
    generate(&FixtureOptions {
        n_stations,
        years: 30,
        hourly,
        ..FixtureOptions::default()
    })
    .unwrap()
}

fn marginals(fx: &Fixture) -> Marginals {
    fx.monthly
        .stations()
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let support = match s.units() {
                Units::CapacityFactor => Support::interval(0.0, 1.0),
                Units::Volume => Support::lower(0.0),
            };
            (s.id.clone(), fit_kde(&fx.monthly.observed(j), support).unwrap())
        })
        .collect()
}

fn config(max_parents: usize) -> RunConfig {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("run.json");
    std::fs::write(&p, r#"{"paths": {"data": "d", "metadata": "m", "output_dir": "o"}}"#).unwrap();
    let mut c = RunConfig::load(&p).unwrap().config;
    c.model.max_parents = max_parents;
    c
}

fn inputs(fx: &Fixture) -> Inputs {
    Inputs {
        stations: fx.stations.clone(),
        monthly: fx.monthly.clone(),
        hourly: fx.hourly.clone(),
    }
}

/// Asymptotic Kolmogorov tail probability with the Stephens correction.
fn ks_uniform_p(u: &mut [f64]) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let d = u
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1.0f64).powi(k - 1) * (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

fn round_trip() -> Outcome {
    let fx = fixture(8, false);
    let ms = marginals(&fx);
    let z = forward(&fx.monthly, &ms).unwrap();
    let back = inverse(&z, &ms).unwrap();
    let mut worst: f64 = 0.0;
    for j in 0..fx.monthly.n_stations() {
        let x = fx.monthly.observed(j);
        let range = x.iter().cloned().fold(f64::MIN, f64::max) - x.iter().cloned().fold(f64::MAX, f64::min);
        for t in 0..fx.monthly.n_times() {
            let e = (back.get(t, j) - fx.monthly.get(t, j)).abs() / range;
            worst = worst.max(e);
        }
    }
    Outcome {
        pass: worst <= 1e-6,
        detail: format!("max error {worst:.2e} × range"),
    }
}

fn pit_uniformity() -> Outcome {
    let fx = fixture(8, false);
    let ms = marginals(&fx);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut min_p: f64 = 1.0;
    for m in ms.values() {
        let mut u: Vec<f64> = (0..5000).map(|_| m.cdf(m.sample(&mut rng))).collect();
        min_p = min_p.min(ks_uniform_p(&mut u));
    }
    Outcome {
        pass: min_p > 0.05,
        detail: format!("smallest KS p-value {min_p:.3} over {} stations", ms.len()),
    }
}

fn copula_recovery() -> Outcome {
    let fx = fixture(8, false);
    let cfg = config(6);
    let archive = fit_model(&inputs(&fx), &cfg).unwrap();
    let h = horizon(&cfg, &archive).unwrap();
    let synth = simulate_monthly(&archive, 500, &h, None, cfg.simulation.seed).unwrap();
    let r = build_report(&fx.monthly, &synth, 0.10, 0.90).unwrap();
    Outcome {
        pass: r.pass_fraction >= 0.90 && r.mean_abs_corr_diff <= 0.1,
        detail: format!(
            "pass fraction {:.3} ({}/{}), mean |Δr| {:.4}, hydro-hydro pass fraction {}",
            r.pass_fraction, r.passed_pairs, r.tested_pairs, r.mean_abs_corr_diff,
            r.hydro_hydro_pass_fraction.map_or("n/a".into(), |f| format!("{f:.3}"))
        ),
    }
}

fn structure_recovery() -> Outcome {
    let z = common::chain_panel(6, 2000, 0.9, 7);
    let cols: Vec<Vec<f64>> = (0..6).map(|j| z.column(j)).collect();
    let learned = learn_structure(&z, 6, 5, 42).unwrap();
    let parents = |d: &Dag| (0..d.len()).map(|i| d.parents(i).to_vec()).collect::<Vec<_>>();
    let nodes = (1..=6).map(|i| format!("X{i}")).collect();
    let truth = Dag::new(nodes, vec![false; 6], (0..6).map(|i| if i == 0 { vec![] } else { vec![i - 1] }).collect(), 6)
        .unwrap();
    let learned_skel = common::skeleton(&parents(&learned));
    let skeleton_ok = learned_skel == common::skeleton(&parents(&truth));
    let mut triples_ok = true;
    for a in 0..4 {
        let sub = cols[a..a + 3].to_vec();
        let best = common::all_dags(3)
            .into_iter()
            .max_by(|p, q| common::oracle_bic(&sub, p).total_cmp(&common::oracle_bic(&sub, q)))
            .unwrap();
        let induced: Vec<(usize, usize)> = learned_skel
            .iter()
            .filter(|&&(i, j)| i >= a && j < a + 3)
            .map(|&(i, j)| (i - a, j - a))
            .collect();
        triples_ok &= induced == common::skeleton(&best);
    }
    let got = bic_score(&z, &learned).unwrap();
    let want = bic_score(&z, &truth).unwrap();
    Outcome {
        pass: skeleton_ok && triples_ok && got >= want - 1e-6,
        detail: format!(
            "skeleton {}, 3-node oracle {}, BIC {got:.3} vs true {want:.3}",
            if skeleton_ok { "matches" } else { "differs" },
            if triples_ok { "agrees" } else { "disagrees" }
        ),
    }
}

fn parameter_reduction() -> Outcome {
    let small = fit_model(&inputs(&fixture(8, false)), &config(3)).unwrap();
    let large = fit_model(&inputs(&fixture(50, false)), &config(6)).unwrap();
    let (ps, pl) = (parameter_count(&small.network), parameter_count(&large.network));
    Outcome {
        pass: ps <= 32 && ps < full_count(8) && pl <= 350,
        detail: format!(
            "8 stations: {ps} vs {}, 50 stations: {pl} vs {} ({:.1}%)",
            full_count(8),
            full_count(50),
            100.0 * pl as f64 / full_count(50) as f64
        ),
    }
}

fn disagg_mean_preservation() -> Outcome {
    let hist = common::disagg_history(1990, 30, 11);
    let means = common::monthly_means(&hist);
    let model = fit_disagg(&hist, 0.95).unwrap();
    let lib = ProfileLibrary::from_panel(&hist, &model.station_ids()).unwrap();
    let targets = common::disagg_targets(&model.stations, 100, 2020, 12, 5);
    let out = disaggregate(&targets, &model, &lib).unwrap();
    let oracles: Vec<common::PcaOracle> = (1..=12).map(|m| common::PcaOracle::new(&means, m, 0.95)).collect();
    let n = targets.n_stations();
    let mismatches = out
        .provenance
        .iter()
        .filter(|p| {
            let t = targets.index.iter().position(|x| *x == p.month).unwrap();
            let x = &targets.scenario(p.scenario)[t * n..(t + 1) * n];
            oracles[p.month.month() as usize - 1].nearest_year(x) != p.selected_year
        })
        .count();
    let clipped = out.clipping.iter().filter(|c| c.clipped_hours > 0).count();
    let h = &out.hourly;
    let mut worst: f64 = 0.0;
    for s in 0..targets.scenario_count {
        let mut row = 0;
        for (t, ts) in targets.index.iter().enumerate() {
            let hours = h.index[row..].iter().take_while(|x| x.month() == ts.month()).count();
            for j in 0..n {
                let mean = (row..row + hours).map(|r| h.get(s, r, j)).sum::<f64>() / hours as f64;
                let target = targets.get(s, t, j);
                worst = worst.max((mean - target).abs() / target);
            }
            row += hours;
        }
    }
    Outcome {
        pass: mismatches == 0 && clipped == 0 && worst <= 1e-9,
        detail: format!(
            "max relative mean error {worst:.2e}, {mismatches}/{} selections differ from brute force",
            out.provenance.len()
        ),
    }
}

fn fisher_oracle() -> Outcome {
    let text = include_str!("../../core/tests/data/fisher_oracle.csv");
    let mut worst_t: f64 = 0.0;
    let mut worst_p: f64 = 0.0;
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let got = fisher_z_pair(
            f[0].parse().unwrap(),
            f[1].parse().unwrap(),
            f[2].parse().unwrap(),
            f[3].parse().unwrap(),
        )
        .unwrap();
        let t: f64 = f[4].parse().unwrap();
        let p: f64 = f[5].parse().unwrap();
        worst_t = worst_t.max((got.statistic - t).abs() / t.abs().max(1.0));
        worst_p = worst_p.max((got.p_value - p).abs());
        rows += 1;
    }
    Outcome {
        pass: rows == 1000 && worst_t <= 1e-12 && worst_p <= 1e-12,
        detail: format!("{rows} tuples, statistic error {worst_t:.1e}, p-value error {worst_p:.1e}"),
    }
}

fn scengen(args: &[&str], cwd: &Path, threads: Option<&str>) -> bool {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_scengen"));
    cmd.args(args).current_dir(cwd).stdout(Stdio::null());
    match threads {
        Some(t) => cmd.env("SCENGEN_THREADS", t),
        None => cmd.env_remove("SCENGEN_THREADS"),
    };
    cmd.status().map(|s| s.success()).unwrap_or(false)
}

fn fit_and_simulate(dir: &Path, threads: Option<&str>) -> bool {
    scengen(&["make-fixture", "--out", ".", "--stations", "8", "--years", "30"], dir, threads)
        && scengen(&["fit", "--config", "run.json"], dir, threads)
        && scengen(&["simulate", "--config", "run.json", "--model", "out/model.json"], dir, threads)
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    if !(fit_and_simulate(a.path(), Some("1")) && fit_and_simulate(b.path(), None)) {
        return Outcome {
            pass: false,
            detail: "command failed".into(),
        };
    }
    let mut files: Vec<String> = std::fs::read_dir(a.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    let differing: Vec<&String> = files
        .iter()
        .filter(|f| std::fs::read(a.path().join("out").join(f)).ok() != std::fs::read(b.path().join("out").join(f)).ok())
        .collect();
    Outcome {
        pass: differing.is_empty() && files.len() >= 6,
        detail: if differing.is_empty() {
            format!("{} output files identical across 1 thread and all cores", files.len())
        } else {
            format!("differing: {differing:?}")
        },
    }
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = scengen(&["make-fixture", "--out", ".", "--stations", "10", "--years", "30"], d, None)
        && scengen(&["fit", "--config", "run.json"], d, None)
        && scengen(&["simulate", "--config", "run.json", "--model", "out/model.json"], d, None);
    let hourly_rows = std::fs::read_to_string(d.join("out/scenarios_hourly.csv")).map_or(0, |s| s.lines().count() - 1);
    let monthly_rows = std::fs::read_to_string(d.join("out/scenarios_monthly.csv")).map_or(0, |s| s.lines().count() - 1);
    Outcome {
        pass: ok && monthly_rows == 100 * 12 * 10 && hourly_rows > 0,
        detail: format!("{monthly_rows} monthly rows, {hourly_rows} hourly rows"),
    }
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        check(1, "round-trip fidelity", Some(s(1)), round_trip),
        check(2, "PIT uniformity", Some(s(5)), pit_uniformity),
        check(3, "copula recovery", Some(s(30)), copula_recovery),
        check(4, "structure recovery", Some(s(10)), structure_recovery),
        check(5, "parameter reduction", Some(s(60)), parameter_reduction),
        check(6, "disaggregation mean preservation", Some(s(10)), disagg_mean_preservation),
        check(7, "Fisher oracle", None, fisher_oracle),
        check(8, "determinism", None, determinism),
        check(9, "end-to-end desk run", Some(s(60)), end_to_end),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

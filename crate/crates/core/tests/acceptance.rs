//! Acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report prints in order.
//! The process exits non-zero when any criterion fails.
//!
//! Set `DEFERMATCH_ACCEPT_TASKS` and `DEFERMATCH_ACCEPT_RECORDS` to a recorded
//! study dataset to also run the data-dependent part of the complementarity
//! check.

mod common;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::time::Instant;

use rand::Rng;

use defermatch::bandit::{empirical_regret, run_ucb1, BernoulliBandit};
use defermatch::experiment::{
    analyze_dataset, emit_results, run_experiment, run_experiment_with, ExperimentConfig, HumanSource,
};
use defermatch::human::{
    complete_matching, greedy_human, load_records, load_tasks, CompletionStrategy, SimulatedHuman,
};
use defermatch::matching::ResourceSet;
use defermatch::rng::stream;
use defermatch::scoregen::{
    beta_quantile, confidence_score, sample_instance, BetaParamTable, GeneratorConfig, DEFAULT_BETA_TABLE,
};
use defermatch::{
    brute_force_matching, residual, solve_imperfect_matching, Error, MatchInstance, Matching, ScoreMatrix, Scores,
};
use statrs::distribution::{Beta, ContinuousCDF};

const SEED: u64 = 20_240_601;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn solver_correctness() -> Verdict {
    let start = Instant::now();
    let mut rng = stream(SEED, &[1]);
    let (mut instances, mut cases, mut worst, mut bad) = (0, 0, 0.0f64, Vec::new());
    while instances < 600 {
        let n = rng.random_range(1..=6);
        let k = rng.random_range(1..=3);
        let caps: Vec<u32> = (0..k).map(|_| rng.random_range(0..=2)).collect();
        let w: Vec<f64> = (0..n * k).map(|_| rng.random::<f64>()).collect();
        let inst = MatchInstance::new(
            ResourceSet::with_capacities(caps).unwrap(),
            ScoreMatrix::new(n, k, w).unwrap(),
            None,
        )
        .unwrap();
        instances += 1;
        for b in 0..=n {
            cases += 1;
            let fast = solve_imperfect_matching(&inst, Scores::Confidence, b);
            let slow = brute_force_matching(&inst, Scores::Confidence, b);
            match (fast, slow) {
                (Ok(f), Ok(s)) => {
                    worst = worst.max((f.objective - s.objective).abs());
                    if f.len() != n.saturating_sub(b) || (f.objective - s.objective).abs() > 1e-9 {
                        bad.push(format!("instance {instances} b={b}"));
                    }
                }
                (Err(Error::Infeasible { .. }), Err(Error::Infeasible { .. })) => {}
                (f, s) => bad.push(format!("instance {instances} b={b}: {:?} vs {:?}", f.err(), s.err())),
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        bad.is_empty() && secs < 60.0,
        format!(
            "{instances} instances, {cases} (instance, b) cases, max |diff| {worst:.1e}, {} mismatches, {secs:.2} s",
            bad.len()
        ),
    )
}

fn quantile_numerics() -> (Verdict, Vec<String>) {
    let mut rng = stream(SEED, &[2]);
    let (mut worst, mut over, mut best_double) = (0.0f64, 0, 0);
    for _ in 0..10_000 {
        let a = rng.random_range(0.1..=25.0);
        let b = rng.random_range(0.1..=25.0);
        let d = loop {
            let d: f64 = rng.random();
            if d > 0.0 {
                break d;
            }
        };
        let q = beta_quantile(a, b, d).unwrap();
        let cdf = Beta::new(a, b).unwrap();
        let err = (cdf.cdf(q) - d).abs();
        worst = worst.max(err);
        if err > 1e-8 {
            over += 1;
            if (cdf.cdf(q.next_down()) - d).abs() > err && (cdf.cdf(q.next_up()) - d).abs() > err {
                best_double += 1;
            }
        }
    }
    let mut closed = 0.0f64;
    for i in 1..1000 {
        let d = i as f64 / 1000.0;
        let exact = 1.0 - (1.0 - d).powf(0.1);
        closed = closed.max((beta_quantile(1.0, 10.0, d).unwrap() - exact).abs());
    }
    let notes = if over > 0 {
        vec![format!(
            "{over} draws exceed 1e-8; in {best_double} of them both neighbouring doubles of Q are further from d"
        )]
    } else {
        Vec::new()
    };
    (
        verdict(
            worst <= 1e-8 && closed <= 1e-10,
            format!("max |CDF(Q) - d| {worst:.2e} over 10^4 draws, Beta(1,10) max error {closed:.2e}"),
        ),
        notes,
    )
}

fn generator_fidelity() -> Verdict {
    let table = BetaParamTable::default();
    let mut exact = 0;
    for (x, row) in DEFAULT_BETA_TABLE.iter().enumerate() {
        for (r, &(a, b)) in row.iter().enumerate() {
            if confidence_score(&table, x, r).unwrap() == a / (a + b) {
                exact += 1;
            }
        }
    }
    let examples = confidence_score(&table, 0, 0).unwrap() == 0.2 / 0.5
        && confidence_score(&table, 2, 0).unwrap() == 1.0 / 11.0;

    let gen = GeneratorConfig::default();
    let (k, rounds) = (gen.capacities.len(), 100_000 / gen.n);
    let mut counts = [0usize; 3];
    let mut p_sum = vec![[0.0f64; 10]; 3];
    for t in 0..rounds {
        let (inst, patients) = sample_instance(&gen, &mut stream(SEED, &[3, t as u64])).unwrap();
        let p = inst.success_prob().unwrap();
        for (i, info) in patients.iter().enumerate() {
            counts[info.x] += 1;
            for (r, acc) in p_sum[info.x].iter_mut().take(k).enumerate() {
                *acc += p.get(i, r);
            }
        }
    }
    let total = (rounds * gen.n) as f64;
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
    let freq_err = freq
        .iter()
        .zip([0.20, 0.45, 0.35])
        .map(|(f, want)| (f - want).abs())
        .fold(0.0, f64::max);
    let mut mean_err = 0.0f64;
    for (x, sums) in p_sum.iter().enumerate() {
        for (r, s) in sums.iter().take(k).enumerate() {
            let m = s / counts[x] as f64;
            mean_err = mean_err.max((m - confidence_score(&table, x, r).unwrap()).abs());
        }
    }
    verdict(
        exact == 30 && examples && freq_err <= 0.01 && mean_err <= 0.01,
        format!(
            "{exact}/30 table means exact, feature freq {:.4}/{:.4}/{:.4} (max err {freq_err:.4}), max |E[p] - f| {mean_err:.4}",
            freq[0], freq[1], freq[2]
        ),
    )
}

/// Mean best-arm fraction and mean final regret over `runs` runs.
fn ucb_runs(horizon: u64, runs: u64) -> (f64, f64) {
    let mut env = BernoulliBandit::from_means(&[0.5, 0.6, 0.7, 0.8, 0.9]).unwrap();
    let arms = env.arms();
    let means: BTreeMap<usize, f64> = env.means().clone();
    let (mut frac, mut regret) = (0.0, 0.0);
    for run in 0..runs {
        let out = run_ucb1(&mut env, &arms, horizon, 1.0, &mut stream(SEED, &[4, horizon, run])).unwrap();
        frac += out.state.pulls(4).unwrap() as f64 / horizon as f64;
        regret += *empirical_regret(&out.logs, &means).unwrap().last().unwrap();
    }
    (frac / runs as f64, regret / runs as f64)
}

fn ucb1_behavior() -> Verdict {
    let t = 5000.0f64;
    let (frac, regret) = ucb_runs(5000, 50);
    let (_, regret_short) = ucb_runs(500, 50);
    let bound = 8.0 * (5.0 * t * t.ln()).sqrt();
    let (per_long, per_short) = (regret / t, regret_short / 500.0);
    verdict(
        frac > 0.8 && regret <= bound && per_long < per_short,
        format!(
            "best-arm fraction {frac:.4} (need > 0.8), R(5000) {regret:.1} <= {bound:.1}, R/T {per_short:.4} at 500 -> {per_long:.4} at 5000"
        ),
    )
}

fn complementarity() -> (Verdict, Vec<String>) {
    let cfg = ExperimentConfig {
        seed: SEED,
        ..ExperimentConfig::desk()
    };
    let out = run_experiment_with(&cfg, &HumanSource::Simulated(SimulatedHuman::Greedy)).unwrap();
    let s = &out.summary;
    let alg = s.baseline_algorithm;
    let human = s.baseline_human.unwrap();
    let se = ((alg.half_width() / 1.96).powi(2) + (human.half_width() / 1.96).powi(2)).sqrt();
    let z = (human.mean - alg.mean) / se;
    let below: Vec<usize> = s
        .arms
        .iter()
        .filter(|a| a.ci_high < alg.ci_low)
        .map(|a| a.arm)
        .collect();
    let lowest = s.arms.iter().map(|a| a.mean).fold(f64::INFINITY, f64::min);
    let main = verdict(
        z > 1.96 && below.is_empty(),
        format!(
            "b=n {:.3} vs b=0 {:.3} (z = {z:.1}), lowest arm mean {lowest:.3}, arms below b=0 CI: {below:?}, best arm {}",
            human.mean,
            alg.mean,
            s.best_arm().unwrap()
        ),
    );

    let mut notes = Vec::new();
    let (tasks, records) = common::synthetic_dataset(800, 40, SEED);
    let a = analyze_dataset(&tasks, &records, None).unwrap();
    notes.push(format!(
        "tier sizes on 800 synthetic participants: {:?} (want (320, 160, 320)) {}",
        a.tier_sizes,
        if a.tier_sizes == (320, 160, 320) { "ok" } else { "MISMATCH" }
    ));
    match (std::env::var("DEFERMATCH_ACCEPT_TASKS"), std::env::var("DEFERMATCH_ACCEPT_RECORDS")) {
        (Ok(t), Ok(r)) => {
            let tasks = load_tasks(File::open(t).unwrap()).unwrap();
            let records = load_records(BufReader::new(File::open(r).unwrap())).unwrap();
            let a = analyze_dataset(&tasks, &records, None).unwrap();
            let best = a.best_b().unwrap();
            let ok = (16..=20).contains(&best) && a.tier_sizes == (320, 160, 320);
            notes.push(format!(
                "recorded dataset: argmax b = {best}, tiers {:?} {}",
                a.tier_sizes,
                if ok { "ok" } else { "MISMATCH" }
            ));
            return (verdict(main.pass && ok, main.detail), notes);
        }
        _ => notes.push(
            "recorded dataset check NOT RUN (set DEFERMATCH_ACCEPT_TASKS and DEFERMATCH_ACCEPT_RECORDS)".into(),
        ),
    }
    (verdict(main.pass && a.tier_sizes == (320, 160, 320), main.detail), notes)
}

fn partial_assignments() -> Verdict {
    let gen = GeneratorConfig::default();
    let (mut violations, mut singles, mut single_bad) = (0, 0, 0);
    for t in 0..1000u64 {
        let (inst, _) = sample_instance(&gen, &mut stream(SEED, &[5, t])).unwrap();
        let b = 5 + (t as usize % 16);
        let alg = solve_imperfect_matching(&inst, Scores::Confidence, b).unwrap();
        let res = residual(&inst, &alg).unwrap();
        let p = inst.success_prob().unwrap();
        let full = greedy_human(&res, p);
        let keep = (t as usize * 7) % (b + 1);
        let partial = Matching::from_pairs(full.pairs[..keep].to_vec(), p);
        let mut rng = stream(SEED, &[5, t, 1]);
        let leave = complete_matching(&partial, &res, CompletionStrategy::LeaveUnassigned, p, &mut rng).unwrap();
        let fill = complete_matching(&partial, &res, CompletionStrategy::RandomFill, p, &mut rng).unwrap();
        if fill.objective < leave.objective {
            violations += 1;
        }
        // One patient left: force it into the last open slot.
        let left = res.after(&partial).unwrap();
        if left.unmatched.len() == 1 && left.remaining.iter().filter(|&&c| c > 0).count() == 1 {
            singles += 1;
            let again = complete_matching(&partial, &res, CompletionStrategy::RandomFill, p, &mut stream(t, &[9])).unwrap();
            if leave != fill || fill != again || leave.len() != b {
                single_bad += 1;
            }
        }
    }
    verdict(
        violations == 0 && singles > 0 && single_bad == 0,
        format!("1000 partial matchings, {violations} with fill < leave; {singles} single-leftover cases, {single_bad} nondeterministic"),
    )
}

fn determinism() -> Verdict {
    let cfg = ExperimentConfig {
        horizon: 200,
        realizations: 4,
        seed: SEED,
        ..ExperimentConfig::desk()
    };
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = run_experiment(&cfg).unwrap();
        let path = dir.path().join(run);
        emit_results(&out, &cfg, &path).unwrap();
        outputs.push(
            ["arms.csv", "baselines.csv", "logs.jsonl"]
                .map(|f| std::fs::read(path.join(f)).unwrap()),
        );
    }
    let same = outputs[0] == outputs[1];
    verdict(
        same,
        format!(
            "two runs of seed {SEED}: arms.csv, baselines.csv, logs.jsonl {}",
            if same { "byte-identical" } else { "differ" }
        ),
    )
}

fn main() {
    let mut failed = Vec::new();
    let mut report = |name: &str, v: Verdict, notes: &[String]| {
        println!("[{}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        for n in notes {
            println!("       {n}");
        }
        if !v.pass {
            failed.push(name.to_string());
        }
    };
    report("solver correctness", solver_correctness(), &[]);
    let (v, notes) = quantile_numerics();
    report("quantile numerics", v, &notes);
    report("generator fidelity", generator_fidelity(), &[]);
    report("UCB1 behavior", ucb1_behavior(), &[]);
    let (v, notes) = complementarity();
    report("complementarity at desk scale", v, &notes);
    report("partial-assignment handling", partial_assignments(), &[]);
    report("determinism", determinism(), &[]);
    if !failed.is_empty() {
        println!("\n{} criteria failed: {}", failed.len(), failed.join(", "));
        std::process::exit(1);
    }
    println!("\nall criteria passed");
}

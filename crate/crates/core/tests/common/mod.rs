#![allow(dead_code)]

use defermatch::human::{truncated_human, Assignment, HumanDecisionRecord, SimulatedHuman, TaskStore};
use defermatch::rng::stream;
use defermatch::scoregen::GeneratorConfig;
use defermatch::session::{generate_task_pool, make_plan};
use defermatch::{residual, solve_imperfect_matching, Scores};
use rand::Rng;

/// Synthetic study data: every participant solves the eight tasks of their
/// plan with a noisy greedy policy of participant-specific skill and, with
/// some probability per task, runs out of time before finishing.
pub fn synthetic_dataset(participants: usize, pool_size: usize, seed: u64) -> (TaskStore, Vec<HumanDecisionRecord>) {
    let pool = generate_task_pool(&GeneratorConfig::default(), pool_size, seed).unwrap();
    let mut records = Vec::new();
    for k in 0..participants {
        let pid = format!("p{k:04}");
        let plan = make_plan(&pid, &pool, seed).unwrap();
        let mut rng = stream(seed, &[k as u64, 99]);
        let sigma = [0.0, 0.05, 0.2, 0.6][rng.random_range(0..4)];
        let sloppy = rng.random::<f64>() * 0.3;
        let human = SimulatedHuman::NoisyGreedy { sigma };
        for task in &plan.tasks {
            let inst = pool.get(&task.task_id).unwrap();
            let p = inst.success_prob().unwrap();
            let alg = solve_imperfect_matching(inst, Scores::Confidence, task.b).unwrap();
            let res = residual(inst, &alg).unwrap();
            let full = human.decide(&res, p, &mut rng);
            let keep = if rng.random::<f64>() < sloppy {
                rng.random_range(0..task.b)
            } else {
                task.b
            };
            let m = truncated_human(&full, keep, p);
            records.push(HumanDecisionRecord {
                participant_id: pid.clone(),
                task_id: task.task_id.clone(),
                b: task.b,
                assignments: m
                    .pairs
                    .iter()
                    .enumerate()
                    .map(|(j, &(i, r))| Assignment {
                        individual: i,
                        resource: r,
                        elapsed_ms: 5000 * (j as u64 + 1),
                    })
                    .collect(),
                completed: keep == task.b,
            });
        }
    }
    (pool, records)
}

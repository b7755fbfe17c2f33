//! Acceptance suite. Runs every exit criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.

use std::time::{Duration, Instant};

use mcpa_core::simulation::{evaluate_slot, run_experiment, Algorithm, ExperimentConfig, ProfileKind};
use mcpa_core::{
    build_reduced, dynamic_map, exhaustive_search, is_feasible, partition_active, round_by_sorting, static_mapping,
    total_input_power, MappingInstance, MappingMatrix, MidpointRule, PowerModelParams, RelaxedSolution,
    SolverOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn preset(name: &str) -> PowerModelParams {
    PowerModelParams::preset(name).unwrap()
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

/// C1: static 121.1 W and optimum 108.1 W on the four-carrier example.
fn motivating_example() -> Outcome {
    let params = preset("exp1");
    let inst = MappingInstance::new(vec![20.0, 0.0, 20.0, 0.0], 2, 2).unwrap();
    let st = total_input_power(&inst, &static_mapping(&inst), &params).unwrap();
    let oracle = exhaustive_search(&inst, &params, false).unwrap();
    let dy = total_input_power(&inst, &dynamic_map(&inst, &params, &SolverOptions::default()).unwrap(), &params)
        .unwrap();
    outcome(
        within(st, 121.1, 0.2) && within(oracle.best_cost, 108.1, 0.2) && dy == oracle.best_cost,
        format!("static={st:.3} exhaustive={:.3} dynamic={dy:.3}", oracle.best_cost),
    )
}

/// Fourth-order central differences; the grid passes close to the zero of
/// f'', so second-order stencils are not accurate enough there.
fn fd1(f: &impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

fn fd2(f: &impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h)) / (12.0 * h * h)
}

/// C2: analytic derivatives against finite differences on 100-point grids.
fn derivative_oracle() -> Outcome {
    let (mut worst1, mut worst2) = (0.0f64, 0.0f64);
    for name in ["exp1", "exp2", "exp3"] {
        let p = preset(name);
        let f = |x: f64| p.input_power(x).unwrap();
        for k in 1..=100 {
            let x = p.p_th + (p.p_max - p.p_th) * k as f64 / 101.0;
            let (a1, n1) = (p.d_input_power(x).unwrap(), fd1(&f, x, 1e-2));
            let (a2, n2) = (p.d2_input_power(x).unwrap(), fd2(&f, x, 1e-2));
            worst1 = worst1.max(((a1 - n1) / n1).abs());
            worst2 = worst2.max(((a2 - n2) / n2).abs());
        }
    }
    outcome(
        worst1 < 1e-6 && worst2 < 1e-5,
        format!("max rel err f'={worst1:.2e} (<1e-6) f''={worst2:.2e} (<1e-5)"),
    )
}

/// C3: pruned and unpruned exhaustive search agree on 500 instances.
fn oracle_equivalence() -> Outcome {
    let params = preset("exp1");
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let mut mismatches = 0;
    for _ in 0..500 {
        let powers = (0..6)
            .map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { 20.0 * (1.0 - rng.random::<f64>()) })
            .collect();
        let inst = MappingInstance::new(powers, 3, 2).unwrap();
        let raw = exhaustive_search(&inst, &params, false).unwrap();
        let pruned = exhaustive_search(&inst, &params, true).unwrap();
        if raw.best_cost != pruned.best_cost {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches}/500 cost mismatches"))
}

fn exp1_config() -> ExperimentConfig {
    ExperimentConfig::reference("exp1", preset("exp1"), 6, 3, 2)
}

/// C4: average and peak exhaustive-vs-static saving for the first experiment.
fn exp1_saving(m: &mcpa_core::AggregateMetrics) -> Outcome {
    let avg = m.average_saving(Algorithm::Exhaustive).unwrap();
    let at_half: Vec<f64> = ProfileKind::ALL
        .iter()
        .map(|&k| m.cell(k, 0.5, Algorithm::Exhaustive).unwrap().saving_vs_static.unwrap())
        .collect();
    let peak = at_half.iter().sum::<f64>() / at_half.len() as f64;
    outcome(
        within(avg, 0.026, 0.008) && peak >= 0.02,
        format!("average saving {:.2}% (2.6 +/- 0.8), p=0.5 saving {:.2}% (>= 2.0)", avg * 100.0, peak * 100.0),
    )
}

/// C5: dynamic mapping recovers >= 90% of the optimal gain in >= 80% of cells.
fn exp1_fraction_of_gain(m: &mcpa_core::AggregateMetrics) -> Outcome {
    let fractions: Vec<Option<f64>> = m.cells_for(Algorithm::Dynamic).map(|c| c.fraction_of_optimal_gain).collect();
    let good = fractions.iter().filter(|f| f.is_some_and(|f| f >= 0.9)).count();
    let share = good as f64 / fractions.len() as f64;
    let mean = fractions.iter().flatten().sum::<f64>() / fractions.iter().flatten().count() as f64;
    outcome(
        share >= 0.8,
        format!(
            "{good}/{} cells at >= 90% of optimal gain ({:.0}%, need >= 80%); mean fraction {:.1}%",
            fractions.len(),
            share * 100.0,
            mean * 100.0
        ),
    )
}

/// C6: nine carriers on three PAs of capacity three.
fn exp2_saving() -> Outcome {
    let mut cfg = ExperimentConfig::reference("exp2", preset("exp2"), 9, 3, 3);
    cfg.algorithms = vec![Algorithm::Static, Algorithm::Exhaustive];
    let m = run_experiment(&cfg).unwrap();
    let avg = m.average_saving(Algorithm::Exhaustive).unwrap();
    outcome(
        within(avg, 0.037, 0.010),
        format!("average exhaustive saving {:.2}% (3.7 +/- 1.0)", avg * 100.0),
    )
}

/// C7: dynamic saving with the third parameter column.
fn exp3_saving() -> Outcome {
    let m = run_experiment(&ExperimentConfig::reference("exp3", preset("exp3"), 6, 3, 2)).unwrap();
    let dy = m.average_saving(Algorithm::Dynamic).unwrap();
    let ex = m.average_saving(Algorithm::Exhaustive).unwrap();
    outcome(
        within(dy, 0.025, 0.010),
        format!("average dynamic saving {:.2}% (2.5 +/- 1.0); exhaustive {:.2}%", dy * 100.0, ex * 100.0),
    )
}

/// C8: feasibility, per-slot oracle dominance, invariances, rounding
/// idempotence and CSV determinism.
fn property_suite() -> Outcome {
    let params = preset("exp1");
    let opts = SolverOptions::default();
    let mut failures = Vec::new();

    let mut cfg = exp1_config();
    cfg.slots = 300;
    for &kind in &ProfileKind::ALL {
        for &p in &cfg.p_grid {
            let spec = cfg.profile(kind, p);
            for s in 0..cfg.slots as u64 {
                let c = evaluate_slot(&cfg, &spec, s).unwrap();
                let (st, dy, ex) = (
                    c.get(Algorithm::Static).unwrap(),
                    c.get(Algorithm::Dynamic).unwrap(),
                    c.get(Algorithm::Exhaustive).unwrap(),
                );
                if ex > dy || ex > st {
                    failures.push(format!("oracle dominance {kind} p={p} slot {s}"));
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xC8);
    for t in 0..300 {
        let powers: Vec<f64> = (0..6)
            .map(|_| if rng.random::<f64>() < 0.4 { 0.0 } else { 20.0 * (1.0 - rng.random::<f64>()) })
            .collect();
        let inst = MappingInstance::new(powers.clone(), 4, 2).unwrap();
        let maps = [
            static_mapping(&inst),
            dynamic_map(&inst, &params, &opts).unwrap(),
            exhaustive_search(&inst, &params, true).unwrap().best_mapping,
        ];
        for m in &maps {
            let ok = is_feasible(&inst, m).unwrap().is_feasible()
                && m.loads(inst.powers()).iter().all(|&l| l <= params.p_max);
            if !ok {
                failures.push(format!("infeasible output on instance {t}"));
            }
        }
        let dyn_map = &maps[1];
        let cost = total_input_power(&inst, dyn_map, &params).unwrap();
        let a = dyn_map.assignment().unwrap();

        let relabelled: Vec<usize> = a.iter().map(|&j| 3 - j).collect();
        let r = MappingMatrix::from_assignment(&relabelled, 4).unwrap();
        if total_input_power(&inst, &r, &params).unwrap() != cost {
            failures.push(format!("PA permutation changed cost on instance {t}"));
        }

        let mut shuffled = a.clone();
        let mut counts = [0usize; 4];
        a.iter().for_each(|&j| counts[j] += 1);
        for i in 0..6 {
            if powers[i] == 0.0 {
                if let Some(j) = (0..4).rev().find(|&j| counts[j] < 2) {
                    counts[shuffled[i]] -= 1;
                    counts[j] += 1;
                    shuffled[i] = j;
                }
            }
        }
        let sh = MappingMatrix::from_assignment(&shuffled, 4).unwrap();
        if total_input_power(&inst, &sh, &params).unwrap() != cost {
            failures.push(format!("inactive reshuffle changed cost on instance {t}"));
        }

        if powers.iter().any(|&p| p > 0.0) {
            let reduced = build_reduced(&inst, &partition_active(&inst), &params, MidpointRule::Literal).unwrap();
            let (n, m) = (reduced.n_ac(), reduced.n_as);
            let cols: Vec<usize> = (0..n).map(|i| i / 2).collect();
            let mut values = vec![0.0; n * m];
            cols.iter().enumerate().for_each(|(i, &j)| values[i * m + j] = 1.0);
            let relaxed = RelaxedSolution {
                values,
                n_rows: n,
                n_cols: m,
                objective: 0.0,
                iterations: 0,
                converged: true,
            };
            if round_by_sorting(&reduced, &relaxed).assignment().unwrap() != cols {
                failures.push(format!("rounding not idempotent on instance {t}"));
            }
        }
    }

    let mut small = exp1_config();
    small.slots = 200;
    let csv_a = run_experiment(&small).unwrap().to_csv();
    let csv_b = run_experiment(&small).unwrap().to_csv();
    if csv_a != csv_b {
        failures.push("CSV differs between identical runs".into());
    }

    let n = failures.len();
    let mut detail = format!("{n} violations");
    if let Some(first) = failures.first() {
        detail.push_str(&format!(" (first: {first})"));
    }
    outcome(n == 0, detail)
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    o.detail.push_str(&format!("; {:.2}s (limit {}s)", took.as_secs_f64(), limit.as_secs_f64()));
    o.pass &= took <= limit;
    o
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("C1 motivating example", timed(Duration::from_secs(1), motivating_example)));
    results.push(("C2 derivative oracle", timed(Duration::from_secs(1), derivative_oracle)));
    results.push(("C3 oracle equivalence", timed(Duration::from_secs(30), oracle_equivalence)));

    let start = Instant::now();
    let exp1 = run_experiment(&exp1_config()).unwrap();
    let exp1_time = start.elapsed();
    let mut c4 = exp1_saving(&exp1);
    c4.detail.push_str(&format!("; {:.2}s (limit 300s)", exp1_time.as_secs_f64()));
    c4.pass &= exp1_time <= Duration::from_secs(300);
    results.push(("C4 experiment 1 saving", c4));
    results.push(("C5 fraction of optimal gain", exp1_fraction_of_gain(&exp1)));

    results.push(("C6 experiment 2 saving", timed(Duration::from_secs(300), exp2_saving)));
    results.push(("C7 experiment 3 saving", timed(Duration::from_secs(300), exp3_saving)));
    results.push(("C8 property suite", timed(Duration::from_secs(300), property_suite)));

    let mut failed = 0;
    for (name, o) in &results {
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

//! Acceptance suite. Runs without the libtest harness so that the one-line
//! verdict per criterion is always visible; exits non-zero if any fails.

use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use aoi_tandem::analytic::{expected_transmission_time, processing_waits, PaoiModel, ServiceTimes};
use aoi_tandem::config::{scaling, table2};
use aoi_tandem::experiment::{optimize_study, validation_rows, ValidationRow};
use aoi_tandem::model::mean_snr;
use aoi_tandem::optimizer::{
    binding_set, gap_search, tangent_generators, ConeKind, ConstraintSystem, GapOptions,
};
use aoi_tandem::simulator::{run_model, transmission_time_from_draw, SimConfig, TandemModel};
use aoi_tandem::RateVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

// Tolerances, pinned.
const C1_ANALYTIC_REL: f64 = 1e-10;
const C1_SIM_REL: f64 = 0.02;
const C2_SAMPLES: usize = 10_000_000;
const C2_SIGMAS: f64 = 3.0;
const C3_REL_GAP: f64 = 0.10;
const C3_RATIO: f64 = 5.0;
const C3_PACKETS: usize = 100_000;
const C4_PACKETS: usize = 100_000;
const C4_HEAVY_POINTS: usize = 3;
const C5_INSTANCES: usize = 1_000;
const C5_POLARITY: f64 = 1e-10;
const C6_GRID: usize = 10_000;
const C6_REL: f64 = 0.01;
const C7_SEEDS: u64 = 20;
const C7_BANDS: [(usize, f64, f64); 2] = [(6, 45.0, 180.0), (10, 70.0, 280.0)];
const C8_MIN_IMPROVEMENT: f64 = 30.0;
const PPT_K: [f64; 4] = [1.1, 1.3, 1.5, 2.0];
const PHI_MIN: f64 = 1e-5;

struct Outcome {
    pass: bool,
    detail: String,
    csv: String,
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn c1_md1() -> Outcome {
    let times = ServiceTimes { processing: vec![1.0], transmission: vec![0.0] };
    let analytic = processing_waits(&times, &[0.5]).unwrap()[0];
    let model = TandemModel { processing: vec![1.0], transmission: None };
    let sim = SimConfig { seed: 1, packets_per_sensor: 1_000_000, warmup_packets: 1_000 };
    let stats = run_model(&model, &RateVector::new(vec![0.5]), sim).unwrap();
    let s = &stats.sensors[0];
    let paoi = 1.0 / 0.5 + 1.0 + 0.5;
    let pass = rel(analytic, 0.5) <= C1_ANALYTIC_REL
        && rel(s.mean_processing_wait, 0.5) <= C1_SIM_REL
        && rel(s.mean_paoi, paoi) <= C1_SIM_REL;
    Outcome {
        pass,
        detail: format!(
            "analytic wait {analytic}, simulated wait {:.4}, simulated PAoI {:.4} (oracle {paoi})",
            s.mean_processing_wait, s.mean_paoi
        ),
        csv: format!(
            "analytic_wait,sim_wait,sim_paoi,samples\n{analytic},{},{},{}\n",
            s.mean_processing_wait, s.mean_paoi, s.samples
        ),
    }
}

fn c2_fading_mean() -> Outcome {
    let cfg = table2(5e6, 0.1).unwrap();
    let ch = cfg.channel();
    let snr = mean_snr(&ch);
    let mut csv = String::from("class,quadrature,monte_carlo,stderr,z\n");
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    for (j, s) in cfg.sensors().iter().enumerate() {
        let xi = ch.xi(s.processed_size_bits);
        let q = expected_transmission_time(xi, snr).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1_000 + j as u64);
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..C2_SAMPLES {
            let t = transmission_time_from_draw(xi, snr, rng.random());
            sum += t;
            sum2 += t * t;
        }
        let n = C2_SAMPLES as f64;
        let mean = sum / n;
        let se = ((sum2 / n - mean * mean) / n).sqrt();
        let z = (mean - q) / se;
        worst = worst.max(z.abs());
        writeln!(csv, "{},{q},{mean},{se},{z}", j + 1).unwrap();
        if j == 0 {
            write!(detail, "E[Z^T] = {q:.4} s (reference value 0.384 s under a different noise reading)").unwrap();
        }
    }
    Outcome {
        pass: worst <= C2_SIGMAS,
        detail: format!("{detail}; worst |z| = {worst:.2} (limit {C2_SIGMAS})"),
        csv,
    }
}

fn rows_csv(rows: &[ValidationRow]) -> String {
    aoi_tandem::experiment::validation_csv(rows).unwrap()
}

fn lambda_grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n).map(|i| (start * (last - i as f64) + stop * i as f64) / last).collect()
}

fn c3_validation() -> Outcome {
    let cfg = table2(5e6, 0.1).unwrap();
    let grid = lambda_grid(0.02, 0.12, 6);
    let rows = validation_rows(&cfg, &grid, &[1], C3_PACKETS).unwrap();
    let mut worst = (0.0f64, 0.0, 0);
    for r in &rows {
        let g = r.relative_gap().abs();
        if g > worst.0 {
            worst = (g, r.lambda_b, r.sensor);
        }
    }
    let mut ordered = true;
    for point in rows.chunks(3) {
        for w in point.windows(2) {
            ordered &= w[0].analytic < w[1].analytic && w[0].simulated < w[1].simulated;
        }
    }
    let top = &rows[rows.len() - 3..];
    let ratio_analytic = top[2].analytic / top[0].analytic;
    let ratio_sim = top[2].simulated / top[0].simulated;
    let feasible = rows.iter().all(|r| r.feasible && !r.saturated);
    let pass = feasible
        && worst.0 < C3_REL_GAP
        && ordered
        && ratio_analytic >= C3_RATIO
        && ratio_sim >= C3_RATIO;
    Outcome {
        pass,
        detail: format!(
            "worst |gap| {:.1}% at lambda_b={} sensor {} (limit {:.0}%); ordered={ordered}; \
             A3/A1 at lambda_b={}: analytic {ratio_analytic:.2}, simulated {ratio_sim:.2} (need {C3_RATIO})",
            100.0 * worst.0,
            worst.1,
            worst.2,
            100.0 * C3_REL_GAP,
            top[0].lambda_b
        ),
        csv: rows_csv(&rows),
    }
}

fn c4_bias() -> Outcome {
    let cfg = table2(25e6, 0.1).unwrap();
    let grid = lambda_grid(0.02, 0.18, 9);
    let rows = validation_rows(&cfg, &grid, &[1], C4_PACKETS).unwrap();
    let feasible: Vec<&ValidationRow> = rows.iter().filter(|r| r.feasible).collect();
    let heavy = &feasible[feasible.len() - 3 * C4_HEAVY_POINTS..];
    let violations = heavy.iter().filter(|r| r.analytic < r.simulated).count();
    let min_gap = heavy.iter().map(|r| r.relative_gap()).fold(f64::INFINITY, f64::min);
    Outcome {
        pass: violations == 0,
        detail: format!(
            "{} sensor-points at lambda_b >= {}: analytic below simulated in {violations}; smallest gap {:+.1}%",
            heavy.len(),
            heavy[0].lambda_b,
            100.0 * min_gap
        ),
        csv: rows_csv(&rows),
    }
}

fn c5_cones() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut csv = String::from("instance,j,epsilon,n_binding,n_generators\n");
    let (mut polarity_fail, mut feasibility_fail, mut normal_fail) = (0, 0, 0);
    let mut nonempty_binding = 0;
    for i in 0..C5_INSTANCES {
        let j = rng.random_range(2..=10);
        let p: Vec<f64> = (0..j).map(|_| rng.random_range(0.05..3.0)).collect();
        let t: Vec<f64> = (0..j).map(|_| rng.random_range(0.05..3.0)).collect();
        let cs = ConstraintSystem::new(&p, &t).unwrap();
        let w: Vec<f64> = (0..j).map(|_| rng.random_range(1e-3..1.0)).collect();
        let load = |z: &[f64]| w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
        let scale = rng.random_range(0.01..0.999) / load(&p).max(load(&t));
        let point: Vec<f64> = w.iter().map(|x| x * scale).collect();
        let eps = 10f64.powf(rng.random_range(-4.0..0.0));
        assert!(cs.is_strictly_feasible(&point));
        let binding = binding_set(&cs, &point, eps);
        nonempty_binding += usize::from(!binding.is_empty());
        let cone = tangent_generators(&cs, &binding).unwrap();
        for s in &cone.tangent_generators {
            let ns = s.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dots: Vec<f64> = cone
                .normal_generators
                .iter()
                .map(|z| {
                    let nz = z.iter().map(|x| x * x).sum::<f64>().sqrt();
                    s.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() / (ns * nz)
                })
                .collect();
            polarity_fail += usize::from(dots.iter().any(|&d| d > C5_POLARITY));
            normal_fail += usize::from(!dots.is_empty() && dots.iter().all(|&d| d > C5_POLARITY));
            let trial: Vec<f64> = point.iter().zip(s).map(|(x, d)| x + eps / ns * d).collect();
            feasibility_fail += usize::from(!cs.is_strictly_feasible(&trial));
        }
        writeln!(csv, "{i},{j},{eps},{},{}", binding.len(), cone.tangent_generators.len()).unwrap();
    }

    // constructed corners: the normal cone is all of R^J exactly when no
    // tangent direction survives
    let mut split_ok = true;
    for j in 2..=10 {
        let p: Vec<f64> = (1..=j).map(|i| 0.5 + 0.1 * i as f64).collect();
        let t: Vec<f64> = (1..=j).map(|i| 1.0 / i as f64).collect();
        let cs = ConstraintSystem::new(&p, &t).unwrap();
        let rows = cs.rows().len();
        let all: Vec<usize> = (0..rows).collect();
        let lower: Vec<usize> = (2..rows).collect();
        let whole = tangent_generators(&cs, &all).unwrap();
        let orthant = tangent_generators(&cs, &lower).unwrap();
        let faces = tangent_generators(&cs, &[0, 1]).unwrap();
        let free = tangent_generators(&cs, &[]).unwrap();
        split_ok &= whole.kind == ConeKind::Trivial && whole.tangent_generators.is_empty();
        split_ok &= orthant.kind == ConeKind::Proper && !orthant.tangent_generators.is_empty();
        split_ok &= faces.kind == ConeKind::Proper && !faces.tangent_generators.is_empty();
        split_ok &= free.kind == ConeKind::Whole && free.tangent_generators.len() == 2 * j;
        writeln!(csv, "corner,{j},0,{rows},{}", whole.tangent_generators.len()).unwrap();
    }
    Outcome {
        pass: polarity_fail == 0 && feasibility_fail == 0 && normal_fail == 0 && split_ok,
        detail: format!(
            "{C5_INSTANCES} instances ({nonempty_binding} with binding rows): polarity violations {polarity_fail}, \
             infeasible trial steps {feasibility_fail}, normal-cone directions {normal_fail}; corner case split ok={split_ok}"
        ),
        csv,
    }
}

fn grid_min_1d(model: &PaoiModel, upper: f64) -> (f64, f64) {
    (1..=C6_GRID)
        .map(|i| {
            let l = upper * i as f64 / (C6_GRID + 1) as f64;
            (model.max_paoi(&[l]), l)
        })
        .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a })
}

fn grid_min_2d(model: &PaoiModel, upper: [f64; 2]) -> f64 {
    (1..=C6_GRID)
        .into_par_iter()
        .map(|i| {
            let l1 = upper[0] * i as f64 / (C6_GRID + 1) as f64;
            (1..=C6_GRID)
                .map(|k| model.max_paoi(&[l1, upper[1] * k as f64 / (C6_GRID + 1) as f64]))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

fn c6_grid_oracle() -> Outcome {
    let mut csv = String::from("j,seed,gap_objective,grid_objective,relative_excess\n");
    let mut worst: f64 = 0.0;
    let (mut runs, mut within) = (0, 0);
    let mut notes = Vec::new();
    for j in [1usize, 2] {
        let cfg = scaling(j, 4e6, 5e6, 0.01).unwrap();
        let model = PaoiModel::new(&cfg).unwrap();
        let times = model.service_times().clone();
        let cs = ConstraintSystem::from_service_times(&times).unwrap();
        let upper: Vec<f64> = times
            .processing
            .iter()
            .zip(&times.transmission)
            .map(|(p, t)| (1.0 / p).min(1.0 / t))
            .collect();
        let (grid_best, grid_arg) = if j == 1 {
            grid_min_1d(&model, upper[0])
        } else {
            (grid_min_2d(&model, [upper[0], upper[1]]), f64::NAN)
        };
        for seed in 1..=5u64 {
            let opts = GapOptions { seed, phi_min: PHI_MIN, ..GapOptions::default() };
            let out = gap_search(&cs, |r| model.max_paoi(r), &opts).unwrap();
            let excess = (out.objective - grid_best) / grid_best;
            worst = worst.max(excess);
            runs += 1;
            within += usize::from(excess <= C6_REL);
            writeln!(csv, "{j},{seed},{},{grid_best},{excess}", out.objective).unwrap();
            if j == 1 && seed == 1 {
                let spacing = upper[0] / (C6_GRID + 1) as f64;
                notes.push(format!(
                    "J=1 lambda gap {:.5} vs grid {grid_arg:.5} ({:.1} grid steps)",
                    out.point.as_slice()[0],
                    (out.point.as_slice()[0] - grid_arg).abs() / spacing
                ));
            }
        }
    }
    Outcome {
        pass: worst <= C6_REL,
        detail: format!(
            "{within}/{runs} runs within limit, worst GAP excess over grid minimum {:+.3}% (limit {:.0}%); {}",
            100.0 * worst,
            100.0 * C6_REL,
            notes.join("; ")
        ),
        csv,
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn c7_convergence() -> Outcome {
    let mut csv = String::from("j,seed,iterations,final_step,objective,monotone\n");
    let mut pass = true;
    let mut parts = Vec::new();
    for (j, lo, hi) in C7_BANDS {
        let cfg = scaling(j, 4e6, 5e6, 0.01).unwrap();
        let seeds: Vec<u64> = (1..=C7_SEEDS).collect();
        let base = GapOptions { phi_min: PHI_MIN, ..GapOptions::default() };
        let report = optimize_study(&cfg, &seeds, &[], &base).unwrap();
        let mut iters = Vec::new();
        let mut all_terminated = true;
        let mut all_monotone = true;
        for (seed, r) in seeds.iter().zip(&report.runs) {
            let monotone = r.trace.is_monotone();
            all_monotone &= monotone;
            all_terminated &= r.final_step < PHI_MIN && !r.hit_iteration_cap;
            iters.push(r.trace.iterations() as f64);
            writeln!(csv, "{j},{seed},{},{},{},{monotone}", r.trace.iterations(), r.final_step, r.objective)
                .unwrap();
        }
        let med = median(iters);
        let ok = med >= lo && med <= hi && all_terminated && all_monotone;
        pass &= ok;
        parts.push(format!(
            "J={j}: median {med} iterations (band [{lo}, {hi}]), terminated={all_terminated}, monotone={all_monotone}"
        ));
    }
    Outcome { pass, detail: parts.join("; "), csv }
}

fn c8_vs_ppt() -> Outcome {
    let cfg = scaling(10, 4e6, 5e6, 0.01).unwrap();
    let seeds: Vec<u64> = (1..=20).collect();
    let base = GapOptions { phi_min: PHI_MIN, ..GapOptions::default() };
    let report = optimize_study(&cfg, &seeds, &PPT_K, &base).unwrap();
    let improvement = report.improvement_percent();
    let per_k: Vec<String> = report
        .ppt
        .iter()
        .map(|p| format!("K={} {:.2} s ({:+.1}%)", p.k, p.objective, 100.0 * (p.objective - report.gap_mean()) / p.objective))
        .collect();
    let mut csv = report.summary_csv().unwrap();
    csv.push_str(&report.ppt_csv().unwrap());
    csv.push_str(&report.gap_runs_csv().unwrap());
    Outcome {
        pass: improvement >= C8_MIN_IMPROVEMENT,
        detail: format!(
            "GAP mean {:.2} s vs best PPT {:.2} s: {improvement:.1}% (need {C8_MIN_IMPROVEMENT}%); per K: {}",
            report.gap_mean(),
            report.best_ppt(),
            per_k.join(", ")
        ),
        csv,
    }
}

type Criterion = (u8, &'static str, Duration, fn() -> Outcome);

fn criteria() -> Vec<Criterion> {
    vec![
        (1, "M/D/1 oracle", Duration::from_secs(30), c1_md1),
        (2, "fading mean vs Monte Carlo", Duration::from_secs(60), c2_fading_mean),
        (3, "validation sweep at 5 Mbit/s", Duration::from_secs(600), c3_validation),
        (4, "analytic bias at 25 Mbit/s", Duration::from_secs(600), c4_bias),
        (5, "cone machinery", Duration::from_secs(60), c5_cones),
        (6, "GAP vs grid oracle", Duration::from_secs(300), c6_grid_oracle),
        (7, "GAP convergence scale", Duration::from_secs(600), c7_convergence),
        (8, "GAP vs PPT", Duration::from_secs(600), c8_vs_ppt),
    ]
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    // `cargo test` forwards libtest flags; a listing request must not run the suite
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let mut all = true;
    let mut artifacts = Vec::new();
    for (id, name, limit, run) in criteria() {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let pass = out.pass && elapsed <= limit;
        all &= pass;
        println!(
            "criterion {id} [{}] {name}: {} ({:.1}s, limit {}s)",
            verdict(pass),
            out.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
        artifacts.push(out.csv);
    }

    let start = Instant::now();
    let mismatched: Vec<u8> = criteria()
        .into_iter()
        .zip(&artifacts)
        .filter(|((_, _, _, run), first)| run().csv != **first)
        .map(|((id, ..), _)| id)
        .collect();
    let pass = mismatched.is_empty();
    all &= pass;
    println!(
        "criterion 9 [{}] determinism: reran criteria 1-8, CSV outputs {} ({:.1}s)",
        verdict(pass),
        if pass { "bit-identical".to_string() } else { format!("differ for {mismatched:?}") },
        start.elapsed().as_secs_f64()
    );

    if all {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}

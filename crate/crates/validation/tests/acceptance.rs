//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use eve_core::eve::{
    apply_operator, eve_step, extract_lambda_theta, extract_policy, q_step,
    recover_right_eigenvector, reward_from_uv, run_ppi, solve_fixed_point, solve_fixed_point_from,
    EveConfig, PotentialVector,
};
use eve_core::num::span;
use eve_core::spectral::{birkhoff_coefficient, hilbert_metric, tilted_operator};
use eve_core::{build_gridworld, index_of_primitivity, sa_operator, GridSpec, Policy, TabularMDP};
use eve_harness::summary::{crossing_time, settling_time, CROSSING_FRACTION, SETTLING_BAND};
use eve_oracle::{
    dense_dominant_eigs, max_entropy_occupancy, policy_distribution, policy_grid_search,
    power_stationary,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, n: usize, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!(
            "criterion {n} ({name}): {} {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
}

fn cliffworld() -> TabularMDP {
    build_gridworld(&GridSpec::cliffworld()).unwrap()
}

fn random_policy(rng: &mut ChaCha8Rng, s: usize, a: usize) -> Policy {
    Policy::from_weights(
        s,
        a,
        (0..s * a).map(|_| rng.random_range(0.2..1.0)).collect(),
    )
    .unwrap()
}

/// Random deterministic MDP whose state-action chain under the uniform policy is primitive.
fn random_primitive_mdp(rng: &mut ChaCha8Rng, max_s: usize, max_a: usize) -> TabularMDP {
    loop {
        let s = rng.random_range(1..=max_s);
        let a = rng.random_range(1..=max_a);
        let next = (0..s * a).map(|_| rng.random_range(0..s)).collect();
        let mdp = TabularMDP::new(s, a, next, 0).unwrap();
        let op = sa_operator(&mdp, &Policy::uniform(s, a)).unwrap();
        if index_of_primitivity(op.matrix()).is_ok() {
            return mdp;
        }
    }
}

fn positive(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| rng.random_range(-3.0f64..3.0).exp())
        .collect()
}

fn contraction_constant(beta: f64, tau: f64) -> f64 {
    (2.0 * tau + tau * tau * (beta - 1.0)) / (1.0 + beta)
}

fn criterion_1(r: &mut Report) {
    let mdp = cliffworld();
    let t = Instant::now();
    let out = run_ppi(
        &mdp,
        &Policy::uniform(mdp.n_states(), 4),
        &EveConfig::default(),
    )
    .unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    let h = out.trace.records.last().unwrap().entropy_stationary;
    let star = max_entropy_occupancy(&mdp, 1e-12).unwrap().entropy_star;
    let bound = (mdp.n_pairs() as f64).ln();
    let pass = (h - star).abs() <= 1e-2 && star <= bound && elapsed < 60.0 && out.converged;
    r.line(
        1,
        "near-maximal entropy",
        pass,
        format!("H_eve={h:.10} H*={star:.10} ln|S||A|={bound:.10} time={elapsed:.2}s"),
    );
}

fn config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/cliffworld.json")
}

fn compare(out: &Path, jobs: &str) -> Vec<u8> {
    let code = eve_harness::cli::run([
        "eve".as_ref(),
        "compare".as_ref(),
        "--quiet".as_ref(),
        "--config".as_ref(),
        config_path().as_os_str(),
        "--out".as_ref(),
        out.as_os_str(),
        "--jobs".as_ref(),
        std::ffi::OsStr::new(jobs),
    ]);
    assert_eq!(code, 0);
    std::fs::read(out.join("results.csv")).unwrap()
}

/// Mean entropy curves per method, held at the last value past a run's end.
fn mean_curves(csv: &str) -> Vec<(String, Vec<f64>)> {
    let mut runs: Vec<(String, u64, Vec<f64>)> = Vec::new();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (m, seed, h) = (
            f[0].to_string(),
            f[1].parse().unwrap(),
            f[3].parse().unwrap(),
        );
        match runs.last_mut() {
            Some((lm, ls, v)) if *lm == m && *ls == seed => v.push(h),
            _ => runs.push((m, seed, vec![h])),
        }
    }
    let mut methods: Vec<String> = Vec::new();
    for (m, _, _) in &runs {
        if !methods.contains(m) {
            methods.push(m.clone());
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let series: Vec<&Vec<f64>> = runs.iter().filter(|r| r.0 == m).map(|r| &r.2).collect();
            let len = series.iter().map(|s| s.len()).max().unwrap();
            let mean = (0..len)
                .map(|k| {
                    series.iter().map(|s| s[k.min(s.len() - 1)]).sum::<f64>() / series.len() as f64
                })
                .collect();
            (m, mean)
        })
        .collect()
}

fn criterion_2(r: &mut Report, csv: &str) {
    let curves = mean_curves(csv);
    let (eve, rest) = curves.split_first().unwrap();
    assert_eq!(eve.0, "eve");
    let eve_final = *eve.1.last().unwrap();
    let eve_settle = settling_time(&eve.1, SETTLING_BAND).unwrap();
    let eve_cross = crossing_time(&eve.1, CROSSING_FRACTION).unwrap();
    let mut pass = true;
    let mut detail = format!("eve final={eve_final:.6} settle={eve_settle} cross95={eve_cross};");
    for (m, c) in rest {
        let f = *c.last().unwrap();
        let settle = settling_time(c, SETTLING_BAND).unwrap();
        let cross = crossing_time(c, CROSSING_FRACTION).unwrap();
        pass &= eve_final >= f && eve_settle < settle;
        detail.push_str(&format!(
            " {m} final={f:.6} settle={settle} cross95={cross};"
        ));
    }
    r.line(
        2,
        "EVE dominates baselines (settling within 5% of final)",
        pass,
        detail,
    );
}

fn criterion_3_4(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut samples = 0usize;
    let mut unique_worst = 0.0f64;
    let mut rate_fail = 0usize;
    let mut rate_checked = 0usize;
    let mut worst_rate = (0.0, 0.0);
    let mut ratio_ge_one = 0usize;
    for _ in 0..60 {
        let mdp = random_primitive_mdp(&mut rng, 6, 3);
        let pi0 = random_policy(&mut rng, mdp.n_states(), mdp.n_actions());
        let op = sa_operator(&mdp, &pi0).unwrap();
        let m = index_of_primitivity(op.matrix()).unwrap();
        let pm = op.matrix().pow(m);
        let tau = birkhoff_coefficient(&pm).unwrap();
        let n = op.dim();
        for beta in [1.0, 2.0, 5.0] {
            let c = contraction_constant(beta, tau);
            for _ in 0..20 {
                let x = positive(&mut rng, n);
                let y = positive(&mut rng, n);
                let d0 = hilbert_metric(&x, &y).unwrap();
                if d0 < 1e-12 {
                    continue;
                }
                let tx = apply_operator(&pm, &x, beta).unwrap();
                let ty = apply_operator(&pm, &y, beta).unwrap();
                let ratio = hilbert_metric(&tx, &ty).unwrap() / d0;
                worst_gap = worst_gap.max(ratio - c);
                samples += 1;
            }

            let (reference, diag) = solve_fixed_point(&op, beta, 1e-13, 200_000).unwrap();
            for _ in 0..10 {
                let u0 = PotentialVector::new(positive(&mut rng, n)).unwrap();
                let (u, _) = solve_fixed_point_from(&op, u0, beta, 1e-13, 200_000, false).unwrap();
                unique_worst =
                    unique_worst.max(hilbert_metric(u.values(), reference.values()).unwrap());
            }
            if let Some(rate) = diag.tail_ratio(10) {
                rate_checked += 1;
                let limit = c.powf(1.0 / m as f64) + 0.05;
                if rate >= 1.0 {
                    ratio_ge_one += 1;
                }
                if rate > limit || rate >= 1.0 {
                    rate_fail += 1;
                    if rate - limit > worst_rate.0 - worst_rate.1 {
                        worst_rate = (rate, limit);
                    }
                }
            }
        }
    }
    r.line(
        3,
        "contraction bound",
        worst_gap <= 1e-9,
        format!("60 MDPs x 3 betas, {samples} pairs, max(ratio - C) = {worst_gap:.3e}"),
    );
    r.line(
        4,
        "uniqueness and linear rate",
        unique_worst <= 1e-8 && rate_fail == 0,
        format!(
            "max d_H across starts = {unique_worst:.3e}; tail ratio above C^(1/m)+0.05 in {rate_fail}/{rate_checked} solves \
             (ratio >= 1 in {ratio_ge_one}), worst {:.4} vs limit {:.4}",
            worst_rate.0, worst_rate.1
        ),
    );
}

fn criterion_5(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut hom, mut mono, mut pos) = (0.0f64, 0usize, 0usize);
    let samples = 1200;
    for _ in 0..samples {
        let mdp = random_primitive_mdp(&mut rng, 6, 3);
        let pi0 = random_policy(&mut rng, mdp.n_states(), mdp.n_actions());
        let op = sa_operator(&mdp, &pi0).unwrap();
        let n = op.dim();
        let beta = rng.random_range(1.0..8.0);
        let u = positive(&mut rng, n);
        let tu = apply_operator(op.matrix(), &u, beta).unwrap();

        let c = rng.random_range(-4.0f64..4.0).exp();
        let cu: Vec<f64> = u.iter().map(|x| c * x).collect();
        let tcu = apply_operator(op.matrix(), &cu, beta).unwrap();
        for (a, b) in tcu.iter().zip(&tu) {
            hom = hom.max((a - c * b).abs() / (c * b));
        }

        let bigger: Vec<f64> = u.iter().map(|x| x * rng.random_range(1.0..3.0)).collect();
        let tb = apply_operator(op.matrix(), &bigger, beta).unwrap();
        if tb.iter().zip(&tu).any(|(a, b)| *a < b * (1.0 - 1e-12)) {
            mono += 1;
        }
        if tu.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            pos += 1;
        }
    }
    r.line(
        5,
        "operator algebra",
        hom <= 1e-12 && mono == 0 && pos == 0,
        format!(
            "{samples} samples: homogeneity rel err {hom:.3e}, monotonicity violations {mono}, positivity violations {pos}"
        ),
    );
}

fn criterion_6(r: &mut Report) {
    let mdp = cliffworld();
    let out = run_ppi(
        &mdp,
        &Policy::uniform(mdp.n_states(), 4),
        &EveConfig::default(),
    )
    .unwrap();
    let op = sa_operator(&mdp, &out.policy).unwrap();
    let d = power_stationary(op.matrix(), 1e-15, 10_000_000).unwrap();
    let uv: Vec<f64> = out
        .potential
        .values()
        .iter()
        .zip(&out.right)
        .map(|(a, b)| a * b)
        .collect();
    let gap: f64 = uv.iter().zip(&d).map(|(a, b)| (a - b).abs()).sum();
    r.line(
        6,
        "u∘v is the stationary distribution",
        gap <= 1e-6,
        format!("L1 gap {gap:.3e}"),
    );
}

fn criterion_7(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut traces = 0;
    let cliff = cliffworld();
    for seed in 0..5 {
        let u0 = eve_harness::run::initial_potential(cliff.n_pairs(), seed);
        let mut recs = Vec::new();
        eve_core::eve::run_ppi_observed(
            &cliff,
            &Policy::uniform(cliff.n_states(), 4),
            &EveConfig::default(),
            Some(u0),
            |e| {
                if let eve_core::eve::PpiEvent::Iteration(rec) = e {
                    recs.push(rec.entropy_rate);
                }
            },
        )
        .unwrap();
        worst = worst.max(recs.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max));
        traces += 1;
    }
    for _ in 0..40 {
        let mdp = random_primitive_mdp(&mut rng, 6, 3);
        let pi0 = random_policy(&mut rng, mdp.n_states(), mdp.n_actions());
        let out = run_ppi(&mdp, &pi0, &EveConfig::default()).unwrap();
        let h: Vec<f64> = out.trace.records.iter().map(|x| x.entropy_rate).collect();
        worst = worst.max(h.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max));
        traces += 1;
    }
    r.line(
        7,
        "PPI entropy-rate monotonicity",
        worst <= 1e-9,
        format!("{traces} traces, largest decrease {worst:.3e}"),
    );
}

fn criterion_8(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut lam_err, mut theta_err) = (0.0f64, 0.0f64);
    let mut instances = 0;
    while instances < 50 {
        let mdp = random_primitive_mdp(&mut rng, 3, 3);
        if mdp.n_states() != 3 {
            continue;
        }
        let pi0 = random_policy(&mut rng, 3, mdp.n_actions());
        let op = sa_operator(&mdp, &pi0).unwrap();
        let beta = [1.0, 2.0, 5.0][instances % 3];
        let (u, _) = solve_fixed_point(&op, beta, 1e-14, 500_000).unwrap();
        let v = recover_right_eigenvector(&u, &op, beta).unwrap();
        let reward = reward_from_uv(&u, &v).unwrap();
        let lt = extract_lambda_theta(&u, &v, &op, beta).unwrap();
        let tilted = tilted_operator(&op, &reward, beta).unwrap();
        let dense = dense_dominant_eigs(tilted.matrix()).unwrap();
        lam_err = lam_err.max((lt.lambda - dense.eigenvalue).abs() / dense.eigenvalue);

        // θ* = E_d[r − β⁻¹ ln(π*/π₀)] under the stationary distribution of π*.
        let pi = extract_policy(&u, &pi0).unwrap();
        let d = policy_distribution(&mdp, &pi).unwrap();
        let mut theta = 0.0;
        for (k, &p) in d.iter().enumerate() {
            if p > 0.0 {
                let kl = (pi.as_slice()[k] / pi0.as_slice()[k]).ln();
                theta += p * (reward.values()[k] - kl / beta);
            }
        }
        theta_err = theta_err.max((theta - dense.eigenvalue.ln() / beta).abs());
        instances += 1;
    }
    r.line(
        8,
        "spectral identities",
        lam_err <= 1e-8 && theta_err <= 1e-6,
        format!("{instances} instances: max rel lambda err {lam_err:.3e}, max theta err {theta_err:.3e}"),
    );
}

fn criterion_9(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mdp = random_primitive_mdp(&mut rng, 6, 3);
        let pi0 = random_policy(&mut rng, mdp.n_states(), mdp.n_actions());
        let op = sa_operator(&mdp, &pi0).unwrap();
        let u = positive(&mut rng, op.dim());
        let q: Vec<f64> = u.iter().map(|x| x.ln()).collect();
        let lq = q_step(&q, &op).unwrap();
        let t = eve_step(&PotentialVector::new(u).unwrap(), &op, 1.0).unwrap();
        let diff: Vec<f64> = lq.iter().zip(t.values()).map(|(a, b)| a - b.ln()).collect();
        worst = worst.max(span(&diff));
    }
    r.line(
        9,
        "log/multiplicative equivalence",
        worst <= 1e-10,
        format!("100 instances, max span discrepancy {worst:.3e}"),
    );
}

fn criterion_10(r: &mut Report) {
    let mut worst = 0.0f64;
    let mut count = 0;
    let t = Instant::now();
    for s in 1..=3usize {
        for a in 1..=2usize {
            let pairs = s * a;
            for code in 0..s.pow(pairs as u32) {
                let mut c = code;
                let next: Vec<usize> = (0..pairs)
                    .map(|_| {
                        let x = c % s;
                        c /= s;
                        x
                    })
                    .collect();
                let mdp = TabularMDP::new(s, a, next, 0).unwrap();
                let op = sa_operator(&mdp, &Policy::uniform(s, a)).unwrap();
                if index_of_primitivity(op.matrix()).is_err() {
                    continue;
                }
                let star = max_entropy_occupancy(&mdp, 1e-12).unwrap().entropy_star;
                let grid = policy_grid_search(&mdp).unwrap().entropy;
                worst = worst.max((star - grid).abs());
                count += 1;
            }
        }
    }
    r.line(
        10,
        "oracle vs grid search",
        worst <= 1e-3,
        format!(
            "{count} primitive instances, max |H* - H_grid| = {worst:.3e} ({:.1}s)",
            t.elapsed().as_secs_f64()
        ),
    );
}

fn main() {
    let mut r = Report { failed: 0 };
    criterion_1(&mut r);

    let dir = tempfile::tempdir().unwrap();
    let first = compare(&dir.path().join("a"), "1");
    let second = compare(&dir.path().join("b"), "4");
    criterion_2(&mut r, std::str::from_utf8(&first).unwrap());

    criterion_3_4(&mut r);
    criterion_5(&mut r);
    criterion_6(&mut r);
    criterion_7(&mut r);
    criterion_8(&mut r);
    criterion_9(&mut r);
    criterion_10(&mut r);
    r.line(
        11,
        "determinism",
        first == second,
        format!(
            "two compare runs (1 and 4 workers), {} bytes each",
            first.len()
        ),
    );

    if r.failed > 0 {
        println!("{} criteria failed", r.failed);
        std::process::exit(1);
    }
    println!("all criteria passed");
}

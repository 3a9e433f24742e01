//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::time::Instant;

use common::{policy_zoo, uniform_dataset, AffineInstance, ZOO_QUAD};
use flambe_core::env::{
    make_hypothesis_class, make_smooth_lowrank_mdp, smoothness_certificate, EnvConfig,
};
use flambe_core::flambe::hyper::{
    smoothing_width, theoretical_hyperparams, trajectory_slope, HyperMode, HyperRequest,
};
use flambe_core::flambe::{
    evaluation_policies, model_eval_gap, run_flambe, sparse_reward_family, HyperParams,
};
use flambe_core::mdp::{value_exact, value_mc, GridPolicy, Policy};
use flambe_core::oracles::mle_fit;
use flambe_core::planner::{elliptical_plan, greedy_policy, iteration_bound, PlannerConfig};
use flambe_core::smoothness::{
    bump_loglog_slope, discrete_is_sides, expectation_shift_check, policy_gap_check,
    run_uniform_bound_battery, uniform_bound_battery, uniform_bound_check, GridFunction,
    SmoothnessProfile, TestFunction,
};
use flambe_core::{ActionGrid, Result};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn profile(m: usize, alpha_e: f64, l_e: f64) -> SmoothnessProfile {
    SmoothnessProfile {
        m,
        alpha_e,
        l_e,
        alpha_t: 1.0,
        l_t: 1.0,
        alpha_r: 1.0,
        l_r: 1.0,
    }
}

fn formula_reproduction() -> Result<Outcome> {
    let eps: Vec<f64> = (3..=8).map(|e| 2f64.powi(-e)).collect();
    let mut worst: f64 = 0.0;
    let mut slopes = vec![];
    for tau in [0.5, 1.0, 2.0] {
        let req = HyperRequest {
            eps: eps[0],
            delta: 0.1,
            d: 2,
            horizon: 3,
            m: 1,
            n_phi: 5,
            n_psi: 5,
            profile: profile(1, 1.0 / tau, 1.0),
            mode: HyperMode::RestrictedPolicy { k: 4.0 },
            c_u: 1.0,
            frozen_logs: None,
        };
        let slope = trajectory_slope(&req, &eps)?;
        worst = worst.max((slope - (10.0 + 8.0 * tau)).abs());
        slopes.push(format!("τ={tau}: {slope:.4}"));
    }
    let mut k_exact = true;
    for (m, h, l, e, alpha_t) in [(1, 2, 1.0, 0.5, 1.0), (2, 3, 2.0, 0.1, 0.5), (3, 5, 0.5, 0.25, 0.75)] {
        let prof = SmoothnessProfile {
            alpha_t,
            l_t: l,
            l_r: l,
            alpha_r: 1.0,
            ..profile(m, 1.0, 1.0)
        };
        let hp = theoretical_hyperparams(&HyperRequest {
            eps: e,
            delta: 0.1,
            d: 2,
            horizon: h,
            m,
            n_phi: 3,
            n_psi: 3,
            profile: prof,
            mode: HyperMode::UnrestrictedPolicy,
            c_u: 1.0,
            frozen_logs: None,
        })?;
        let sigma = m as f64 / alpha_t;
        let expect = (8.0 * (m as f64).sqrt() * h as f64 * l / e).powf(sigma);
        k_exact &= hp.k == expect && hp.k == smoothing_width(m, h, l, e, sigma);
    }
    outcome(
        worst <= 0.2 && k_exact,
        format!("slopes [{}], max |slope − (10+8τ)| = {worst:.2e}; K formula exact: {k_exact}", slopes.join(", ")),
    )
}

fn planner_termination() -> Result<Outcome> {
    let ds = [1usize, 2, 3];
    let betas = [0.25, 0.5, 1.0];
    let mut failures = vec![];
    let mut worst_ratio: f64 = 0.0;
    for seed in 0..20u64 {
        let d = ds[seed as usize % 3];
        let beta = betas[(seed as usize / 3) % 3];
        let env = make_smooth_lowrank_mdp(&EnvConfig::new(4, d, 1, 3, 100 + seed))?;
        let cfg = PlannerConfig {
            seed,
            ..PlannerConfig::new(beta, 32)
        };
        let plan = elliptical_plan(&env, seed as usize % 3, &cfg)?;
        let bound = iteration_bound(d, beta);
        worst_ratio = worst_ratio.max(plan.spot_check.max_objective / beta);
        if plan.iterations > bound
            || plan.spot_check.probes != 32
            || plan.spot_check.max_objective > beta
        {
            failures.push(format!(
                "seed {seed}: {} iters (bound {bound}), probe max {:.4} vs β {beta}",
                plan.iterations, plan.spot_check.max_objective
            ));
        }
    }
    outcome(
        failures.is_empty(),
        format!("20 runs, worst probe objective / β = {worst_ratio:.3} {}", failures.join("; ")),
    )
}

fn uniform_bound_verifier() -> Result<Outcome> {
    let mut rows = vec![];
    for m in [1, 2] {
        for alpha in [0.5, 1.0] {
            rows.extend(run_uniform_bound_battery(m, alpha, 1.0)?);
        }
    }
    let c_cal = rows.iter().map(|r| r.required_c).fold(0.0, f64::max);
    let mut all_hold = true;
    let mut worst_slope: f64 = 0.0;
    let mut scale_ok = true;
    for m in [1, 2] {
        for alpha in [0.5, 1.0] {
            all_hold &= run_uniform_bound_battery(m, alpha, c_cal)?
                .iter()
                .all(|r| r.report.holds);
            let slope = bump_loglog_slope(m, alpha)?;
            worst_slope = worst_slope.max((slope - alpha / (m as f64 + alpha)).abs());
            let grid = ActionGrid::new(m, if m == 1 { 1024 } else { 128 })?;
            for (_, tf) in uniform_bound_battery(alpha) {
                let f = GridFunction::sample(grid, |a| tf.eval(a));
                let l = tf.declared_norm(m, alpha);
                let base = uniform_bound_check(&f, alpha, l, c_cal)?.holds;
                for s in [1e-3, 1.0, 1e3] {
                    scale_ok &= uniform_bound_check(&f.scaled(s), alpha, l * s, c_cal)?.holds == base;
                }
            }
        }
    }
    outcome(
        c_cal <= 3.0 && all_hold && worst_slope <= 0.02 && scale_ok,
        format!(
            "calibrated c = {c_cal:.4}, all rows hold: {all_hold}, worst slope error {worst_slope:.4}, scale invariance: {scale_ok}"
        ),
    )
}

fn policy_gap() -> Result<Outcome> {
    let mut violations = vec![];
    let mut monotone = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let m = 1 + seed as usize % 2;
        let cfg = EnvConfig::new(3, 2, m, 3, 200 + seed);
        let env = make_smooth_lowrank_mdp(&cfg)?;
        let class = make_hypothesis_class(&env, &cfg)?;
        let cert_grid = ActionGrid::new(m, if m == 1 { 256 } else { 32 })?;
        let cert = smoothness_certificate(&class, &env, &cert_grid, 1.0)?;
        let prof = SmoothnessProfile {
            alpha_t: 1.0,
            l_t: cert.l_t,
            ..profile(m, 1.0, cert.l_e_norm)
        };
        let reward = sparse_reward_family(&env, 1, seed)?.remove(0);
        let base = Policy::Deterministic(greedy_policy(&env, &reward, &ActionGrid::new(m, 16)?)?.policy);
        let quad = if m == 1 { 128 } else { 32 };
        let mut gaps = vec![];
        for k in [4.0, 16.0, 64.0] {
            let chk = policy_gap_check(&env, &base, k, &reward, &prof, quad)?;
            worst = worst.max(chk.gap / (chk.bound + chk.tolerance));
            if !chk.holds {
                violations.push(format!("seed {seed} K {k}: gap {:.4} > {:.4}", chk.gap, chk.bound + chk.tolerance));
            }
            gaps.push(chk.gap);
        }
        if gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12) {
            monotone += 1;
        }
    }
    let mut shifts = 0;
    let mut shift_fail = vec![];
    let mut rng = flambe_core::rng::root(0x1E99A);
    for m in [1usize, 2] {
        for alpha in [0.5, 1.0] {
            let quad = if m == 1 { 256 } else { 32 };
            let mut fns: Vec<(String, f64, Box<dyn Fn(&[f64]) -> f64>)> = uniform_bound_battery(alpha)
                .into_iter()
                .map(|(name, tf)| {
                    let l = tf.declared_norm(m, alpha);
                    let tf2: TestFunction = tf.clone();
                    (name, l, Box::new(move |a: &[f64]| tf2.eval(a)) as Box<dyn Fn(&[f64]) -> f64>)
                })
                .collect();
            for i in 0..3 {
                let c: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
                fns.push((
                    format!("cone_{i}"),
                    1.0,
                    Box::new(move |a: &[f64]| flambe_core::grid::dist2(a, &c).powf(alpha)),
                ));
            }
            let mut rules = vec![Policy::UniformRandom.action_rule(0, 0, m, 16)?];
            rules.push(vec![(1.0, vec![0.0; m])]);
            rules.push(vec![(1.0, vec![1.0; m])]);
            for _ in 0..3 {
                rules.push(vec![(1.0, (0..m).map(|_| rng.random::<f64>()).collect())]);
                let gp = GridPolicy::random(1, 1, m, 4, 4.0, &mut rng)?;
                rules.push(Policy::GridMixture(gp).action_rule(0, 0, m, 8)?);
            }
            for (name, l, f) in &fns {
                for rule in &rules {
                    for k in [4.0, 16.0, 64.0] {
                        let chk = expectation_shift_check(rule, k, f, alpha, *l, quad)?;
                        shifts += 1;
                        if !chk.holds {
                            shift_fail.push(format!("{name} m={m} α={alpha} K={k}: {:.4} > {:.4}", chk.shift, chk.bound + chk.tolerance));
                        }
                    }
                }
            }
        }
    }
    outcome(
        violations.is_empty() && shift_fail.is_empty() && monotone >= 18,
        format!(
            "60 gap checks, worst gap/bound {worst:.3}, nonincreasing in K on {monotone}/20; {shifts} one-step checks, {} failed {}{}",
            shift_fail.len(),
            violations.join("; "),
            shift_fail.join("; ")
        ),
    )
}

fn error_functional_smoothness() -> Result<Outcome> {
    let mut failures = vec![];
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let (cfg, g) = if seed % 2 == 0 {
            (EnvConfig::small(300 + seed), 256)
        } else {
            (
                EnvConfig {
                    n_phi_decoys: 3,
                    n_psi_decoys: 3,
                    decoy_scale: 0.4,
                    ..EnvConfig::new(4, 3, 2, 2, 300 + seed)
                },
                24,
            )
        };
        let env = make_smooth_lowrank_mdp(&cfg)?;
        let class = make_hypothesis_class(&env, &cfg)?;
        let cert = smoothness_certificate(&class, &env, &ActionGrid::new(cfg.m, g)?, 1.0)?;
        let bound = 2.0 * cfg.d as f64 * cert.l_phi;
        if bound > 0.0 {
            worst = worst.max(cert.l_e / bound);
        }
        if cert.l_e > bound {
            failures.push(format!("seed {seed}: {:.4} > {bound:.4}", cert.l_e));
        }
    }
    outcome(failures.is_empty(), format!("20 classes, worst L_E / (2·d·L_Φ) = {worst:.3} {}", failures.join("; ")))
}

fn discrete_importance_sampling() -> Result<Outcome> {
    let mut rng = flambe_core::rng::root(0xD15C);
    let mut violations = 0;
    let mut pairs = 0;
    for g in [4usize, 8] {
        for _ in 0..25 {
            let n = rng.random_range(1..=5);
            let pol = GridPolicy::random(1, n, 1, g, g as f64, &mut rng)?;
            let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            let dist: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let f: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..g).map(|_| rng.random::<f64>() * rng.random_range(0.0..10.0)).collect())
                .collect();
            let cells: Vec<Vec<f64>> = (0..n).map(|s| pol.cell_probs(0, s).to_vec()).collect();
            let (lhs, rhs) = discrete_is_sides(&dist, &cells, &f);
            pairs += 1;
            if lhs > rhs {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("{pairs} pairs, {violations} violations"))
}

fn mle_consistency() -> Result<Outcome> {
    let mut used = vec![];
    let mut correct = 0;
    let mut seed = 0u64;
    while used.len() < 20 {
        let cfg = EnvConfig {
            decoy_decay: 1.0,
            ..EnvConfig::small(seed)
        };
        seed += 1;
        let env = make_smooth_lowrank_mdp(&cfg)?;
        let class = make_hypothesis_class(&env, &cfg)?;
        if class.min_separation() <= 0.05 {
            continue;
        }
        used.push(cfg.seed);
        let fits = mle_fit(&uniform_dataset(&env, 2000, cfg.seed), &class)?;
        if fits
            .iter()
            .enumerate()
            .all(|(h, f)| f.phi_idx == class.true_phi[h] && f.psi_idx == class.true_psi[h])
        {
            correct += 1;
        }
    }
    outcome(correct >= 18, format!("true pair at every step in {correct}/20 (seeds {used:?})"))
}

fn end_to_end() -> Result<Outcome> {
    let prof = profile(1, 1.0, 1.0);
    let mut improved = 0;
    let mut gap_ok = 0;
    let mut worst_gap: f64 = 0.0;
    for seed in 0..20u64 {
        let cfg = EnvConfig::small(seed);
        let env = make_smooth_lowrank_mdp(&cfg)?;
        let class = make_hypothesis_class(&env, &cfg)?;
        let hp = HyperParams::practical(500, 5, 0.5, 4.0, &prof, 3);
        let out = run_flambe(&env, &class, &hp, &PlannerConfig::new(0.5, 32), seed)?;
        let err = &out.diagnostics.model_error;
        if err[err.len() - 1] < err[0] {
            improved += 1;
        }
        let rewards = sparse_reward_family(&env, 10, seed)?;
        let policies = evaluation_policies(&env, 6, 4.0, 32, 6, 16.0, seed)?;
        let gap = model_eval_gap(&env, &out.model.model, &rewards, &policies, 64)?;
        worst_gap = worst_gap.max(gap.max_gap);
        if gap.max_gap <= 0.1 {
            gap_ok += 1;
        }
    }
    outcome(
        improved >= 16 && gap_ok >= 16,
        format!("error improved in {improved}/20, gap ≤ 0.1 in {gap_ok}/20 (worst {worst_gap:.4})"),
    )
}

fn exactness() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for seed in 0..24 {
        for m in [1, 2] {
            let inst = AffineInstance::random(seed, m, 2);
            let (model, reward) = (inst.model(), inst.reward());
            for pol in policy_zoo(seed, m, 2) {
                let exact = value_exact(&model, &pol, &reward, ZOO_QUAD)?;
                worst = worst.max((exact - inst.brute_force_value(&pol)).abs());
                cases += 1;
            }
        }
    }
    let env = make_smooth_lowrank_mdp(&EnvConfig::small(7))?;
    let mut policies = evaluation_policies(&env, 3, 4.0, 32, 3, 16.0, 7)?;
    policies.push(Policy::UniformRandom);
    let rewards = sparse_reward_family(&env, 3, 7)?;
    let mut mc_fail = 0;
    let mut worst_z: f64 = 0.0;
    for (i, pol) in policies.iter().enumerate() {
        for (j, r) in rewards.iter().enumerate() {
            let exact = value_exact(&env, pol, r, 128)?;
            let (est, se) = value_mc(&env, pol, r, 10_000, (i * 31 + j) as u64)?;
            let z = (est - exact).abs() / se;
            worst_z = worst_z.max(z);
            if z > 4.0 {
                mc_fail += 1;
            }
        }
    }
    outcome(
        worst <= 1e-9 && mc_fail == 0,
        format!(
            "{cases} enumeration cases, max error {worst:.1e}; {} Monte Carlo comparisons, worst |z| = {worst_z:.2}",
            policies.len() * rewards.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 9] = [
        ("hyperparameter formula reproduction", formula_reproduction),
        ("planner termination and post-halt objective", planner_termination),
        ("sup-versus-mean verifier", uniform_bound_verifier),
        ("policy smoothing gap", policy_gap),
        ("error functional smoothness", error_functional_smoothness),
        ("discrete importance sampling", discrete_importance_sampling),
        ("MLE consistency", mle_consistency),
        ("end-to-end FLAMBE", end_to_end),
        ("exact value oracles", exactness),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {}: {name} [{:.1}s] {detail}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

//! Subcommand bodies. Each one resolves its inputs, calls into the core
//! crate and writes CSV/JSON outputs next to the resolved config.

use std::path::{Path, PathBuf};

use clap::Args;

use flambe_core::env::{
    make_hypothesis_class, make_smooth_lowrank_mdp, smoothness_certificate, HypothesisClass,
    SmoothnessCertificate,
};
use flambe_core::flambe::hyper::{theoretical_hyperparams, HyperMode, HyperRequest};
use flambe_core::flambe::{
    evaluation_policies, model_eval_gap, run_flambe as flambe_loop, sparse_reward_family, EvalGap,
    FlambeOutput, HyperParams, ModelEstimate,
};
use flambe_core::io;
use flambe_core::mdp::{value_exact, value_mc, LowRankMdp, Policy};
use flambe_core::planner::{greedy_policy, PlannerConfig};
use flambe_core::smoothness::{
    bump_loglog_slope, expectation_shift_check, policy_gap_check, run_uniform_bound_battery,
    uniform_bound_battery, GridFunction, SmoothnessProfile, TestFunction,
};
use flambe_core::ActionGrid;

use crate::config::{ExperimentConfig, HyperSection};
use crate::output::OutputDir;
use crate::{CliError, Overrides};

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn output(cfg: &ExperimentConfig, default: &str) -> Result<OutputDir, CliError> {
    let dir = cfg.output.dir.clone().unwrap_or_else(|| default.to_string());
    OutputDir::create(Path::new(&dir), cfg, cfg.seeds.base)
}

fn build(cfg: &ExperimentConfig) -> Result<(LowRankMdp, HypothesisClass), CliError> {
    let env = make_smooth_lowrank_mdp(&cfg.env)?;
    let class = make_hypothesis_class(&env, &cfg.env)?;
    Ok((env, class))
}

fn certificate_grid(m: usize) -> Result<ActionGrid, CliError> {
    let g = match m {
        1 => 256,
        2 => 32,
        _ => 16,
    };
    Ok(ActionGrid::new(m, g)?)
}

fn write_certificate(out: &OutputDir, cert: &SmoothnessCertificate) -> Result<(), CliError> {
    out.table(
        "certificate.csv",
        &[
            "alpha", "grid_g", "l_phi", "l_t", "l_e", "l_e_norm", "l_hellinger", "u_measured",
            "l_e_bound", "l_e_bound_holds",
        ],
        &[vec![
            fmt(cert.alpha),
            cert.grid_g.to_string(),
            fmt(cert.l_phi),
            fmt(cert.l_t),
            fmt(cert.l_e),
            fmt(cert.l_e_norm),
            fmt(cert.l_hellinger),
            fmt(cert.u_measured),
            fmt(cert.l_e_bound),
            cert.l_e_bound_holds.to_string(),
        ]],
    )
}

pub fn gen_env(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = output(cfg, "gen-env")?;
    let (env, class) = build(cfg)?;
    io::save(&out.file("env.json"), &env)?;
    io::save(&out.file("class.json"), &class)?;
    let cert = smoothness_certificate(&class, &env, &certificate_grid(env.m)?, cfg.env.alpha)?;
    write_certificate(&out, &cert)?;
    let rows: Vec<Vec<String>> = class
        .separation
        .iter()
        .enumerate()
        .map(|(h, s)| vec![h.to_string(), fmt(*s)])
        .collect();
    out.table("separation.csv", &["h", "min_separation"], &rows)?;
    println!(
        "wrote {} (|Φ| = {}, |Ψ| = {}, min separation {:.4}, L_E = {:.4} ≤ {:.4})",
        out.path.display(),
        class.phi.len(),
        class.psi.len(),
        class.min_separation(),
        cert.l_e,
        cert.l_e_bound
    );
    if !cert.l_e_bound_holds {
        return Err(CliError::Invariant(format!(
            "error-functional constant {} exceeds 2·d·L_Φ = {}",
            cert.l_e, cert.l_e_bound
        )));
    }
    Ok(())
}

fn hyper_params(cfg: &ExperimentConfig, class: &HypothesisClass) -> Result<(HyperParams, PlannerConfig), CliError> {
    let profile = cfg.profile.with_m(cfg.env.m);
    match &cfg.hyper {
        HyperSection::Practical { n, j_max, k } => Ok((
            HyperParams::practical(*n, *j_max, cfg.planner.beta, *k, &profile, cfg.env.horizon),
            cfg.planner,
        )),
        HyperSection::Theoretical {
            eps,
            delta,
            c_u,
            policy,
        } => {
            let hp = theoretical_hyperparams(&HyperRequest {
                eps: *eps,
                delta: *delta,
                d: cfg.env.d,
                horizon: cfg.env.horizon,
                m: cfg.env.m,
                n_phi: class.phi.len(),
                n_psi: class.psi.len(),
                profile,
                mode: *policy,
                c_u: *c_u,
                frozen_logs: None,
            })?;
            let planner = PlannerConfig {
                beta: hp.beta_prime,
                ..cfg.planner
            };
            Ok((hp, planner))
        }
    }
}

struct Repetition {
    env_seed: u64,
    seed: u64,
    env: LowRankMdp,
    class: HypothesisClass,
    run: FlambeOutput,
    gap: EvalGap,
}

fn repetition(cfg: &ExperimentConfig, r: usize) -> Result<Repetition, CliError> {
    let mut rep_cfg = cfg.clone();
    rep_cfg.env.seed = cfg.env.seed + r as u64;
    let seed = cfg.seeds.base + r as u64;
    let (env, class) = build(&rep_cfg)?;
    let (hp, planner) = hyper_params(&rep_cfg, &class)?;
    let run = flambe_loop(&env, &class, &hp, &planner, seed)?;
    let e = &cfg.eval;
    let rewards = sparse_reward_family(&env, e.n_rewards, seed)?;
    let policies = evaluation_policies(
        &env,
        e.n_grid_policies,
        e.max_density,
        e.policy_grid,
        e.n_smoothed,
        e.smoothing_k,
        seed,
    )?;
    let gap = model_eval_gap(&env, &run.model.model, &rewards, &policies, e.quad_g)?;
    Ok(Repetition {
        env_seed: rep_cfg.env.seed,
        seed,
        env,
        class,
        run,
        gap,
    })
}

pub fn run_flambe(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = output(cfg, "run-flambe")?;
    // repetitions run in parallel; results are merged in seed order
    let results: Vec<Result<Repetition, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.seeds.repetitions)
            .map(|r| scope.spawn(move || repetition(cfg, r)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Invariant("repetition panicked".into()))))
            .collect()
    });
    let mut summary = vec![];
    let mut curve = vec![];
    for (r, res) in results.into_iter().enumerate() {
        let rep = res?;
        let dir = out.subdir(&format!("rep_{r:03}"))?;
        io::save(&dir.file("env.json"), &rep.env)?;
        io::save(&dir.file("class.json"), &rep.class)?;
        io::save(&dir.file("model.json"), &rep.run.model)?;
        io::save(&dir.file("exploration.json"), &rep.run.exploration)?;
        rep.run.diagnostics.write_csv(dir.csv("diagnostics.csv")?)?;
        rep.run.dataset.write_csv(dir.csv("dataset.csv")?)?;
        rep.gap.write_csv(dir.csv("eval_gap.csv")?)?;
        if !rep.run.diagnostics.warnings.is_empty() {
            dir.write_text("warnings.txt", &(rep.run.diagnostics.warnings.join("\n") + "\n"))?;
        }
        let err = &rep.run.diagnostics.model_error;
        for (j, e) in err.iter().enumerate() {
            curve.push(vec![(j + 1).to_string(), fmt(*e), format!("seed_{}", rep.seed)]);
        }
        summary.push(vec![
            r.to_string(),
            rep.env_seed.to_string(),
            rep.seed.to_string(),
            fmt(err[0]),
            fmt(err[err.len() - 1]),
            fmt(rep.gap.max_gap),
            rep.run.diagnostics.warnings.len().to_string(),
        ]);
        println!(
            "rep {r}: probe TV {:.4} → {:.4}, max eval gap {:.4}",
            err[0],
            err[err.len() - 1],
            rep.gap.max_gap
        );
    }
    let header = ["rep", "env_seed", "seed", "first_error", "final_error", "max_gap", "warnings"];
    out.table("summary.csv", &header, &summary)?;
    out.table("error_curve.csv", &["x", "y", "series"], &curve)?;
    if cfg.output.json {
        out.json("summary.json", &rows_as_json(&header, &summary))?;
    }
    println!("wrote {}", out.path.display());
    Ok(())
}

fn rows_as_json(header: &[&str], rows: &[Vec<String>]) -> serde_json::Value {
    serde_json::Value::Array(
        rows.iter()
            .map(|r| {
                serde_json::Value::Object(
                    header
                        .iter()
                        .zip(r)
                        .map(|(k, v)| {
                            let val = v
                                .parse::<f64>()
                                .ok()
                                .and_then(serde_json::Number::from_f64)
                                .map(serde_json::Value::Number)
                                .unwrap_or_else(|| serde_json::Value::String(v.clone()));
                            (k.to_string(), val)
                        })
                        .collect(),
                )
            })
            .collect(),
    )
}

fn load_input<T: io::Document>(path: &Path) -> Result<T, CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!("{} does not exist", path.display())));
    }
    io::load(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn eval_model(cfg: &ExperimentConfig, model_path: &PathBuf, env_path: &PathBuf) -> Result<(), CliError> {
    let out = output(cfg, "eval-model")?;
    let env: LowRankMdp = load_input(env_path)?;
    let model = match io::load::<ModelEstimate>(model_path) {
        Ok(est) => est.model,
        Err(_) => load_input::<LowRankMdp>(model_path)?,
    };
    let e = &cfg.eval;
    let seed = cfg.seeds.base;
    let rewards = sparse_reward_family(&env, e.n_rewards, seed)?;
    let policies = evaluation_policies(
        &env,
        e.n_grid_policies,
        e.max_density,
        e.policy_grid,
        e.n_smoothed,
        e.smoothing_k,
        seed,
    )?;
    let gap = model_eval_gap(&env, &model, &rewards, &policies, e.quad_g)?;
    gap.write_csv(out.csv("eval_gap.csv")?)?;
    if cfg.output.json {
        out.json("eval_gap.json", &gap)?;
    }
    println!(
        "max |V(model) − V(env)| = {:.6} over {} rewards × {} policies; wrote {}",
        gap.max_gap,
        rewards.len(),
        policies.len(),
        out.path.display()
    );
    Ok(())
}

pub fn verify_bounds(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = output(cfg, "verify-bounds")?;
    let mut failures = vec![];

    let mut battery = vec![];
    for m in [1, 2] {
        for alpha in [0.5, 1.0] {
            battery.extend(run_uniform_bound_battery(m, alpha, 1.0)?);
        }
    }
    let c_cal = battery.iter().map(|r| r.required_c).fold(0.0, f64::max);
    let mut rows = vec![];
    for m in [1, 2] {
        for alpha in [0.5, 1.0] {
            for r in run_uniform_bound_battery(m, alpha, c_cal)? {
                if !r.report.holds {
                    failures.push(format!("sup-vs-mean bound fails for {} (m={m}, α={alpha})", r.name));
                }
                rows.push(vec![
                    r.name,
                    m.to_string(),
                    fmt(alpha),
                    fmt(r.l),
                    fmt(r.estimated_norm),
                    fmt(r.report.sup),
                    fmt(r.report.mean),
                    fmt(c_cal),
                    fmt(r.report.bound),
                    fmt(r.report.tolerance),
                    fmt(r.required_c),
                    r.report.holds.to_string(),
                ]);
            }
        }
    }
    out.table(
        "uniform_bound.csv",
        &[
            "function", "m", "alpha", "l", "estimated_norm", "sup", "mean", "c_cal", "bound",
            "tolerance", "required_c", "holds",
        ],
        &rows,
    )?;

    let mut slopes = vec![];
    let mut points = vec![];
    for m in [1, 2] {
        for alpha in [0.5, 1.0] {
            let slope = bump_loglog_slope(m, alpha)?;
            let expected = alpha / (m as f64 + alpha);
            let holds = (slope - expected).abs() <= 0.02;
            if !holds {
                failures.push(format!("bump slope {slope} vs {expected} (m={m}, α={alpha})"));
            }
            slopes.push(vec![m.to_string(), fmt(alpha), fmt(slope), fmt(expected), holds.to_string()]);
            let grid = flambe_core::smoothness::battery_grid(m)?;
            for e in 2..=6 {
                let tf = TestFunction::Bump {
                    height: 1.0,
                    radius: 2f64.powi(-e),
                    alpha,
                };
                let f = GridFunction::sample(grid, |a| tf.eval(a));
                points.push(vec![fmt(f.mean().ln()), fmt(f.sup().ln()), format!("m{m}_alpha{alpha}")]);
            }
        }
    }
    out.table("bump_slope.csv", &["m", "alpha", "slope", "expected", "holds"], &slopes)?;
    out.table("bump_loglog.csv", &["x", "y", "series"], &points)?;

    let m = cfg.env.m;
    let mut shifts = vec![];
    let quad = if m == 1 { 256 } else { 32 };
    let rules = vec![
        ("uniform", Policy::UniformRandom.action_rule(0, 0, m, 16)?),
        ("corner", vec![(1.0, vec![0.0; m])]),
        ("centre", vec![(1.0, vec![0.5; m])]),
    ];
    for alpha in [0.5, 1.0] {
        for (name, tf) in uniform_bound_battery(alpha) {
            let l = tf.declared_norm(m, alpha);
            for (rule_name, rule) in &rules {
                for k in [4.0, 16.0, 64.0] {
                    let chk = expectation_shift_check(rule, k, |a| tf.eval(a), alpha, l, quad)?;
                    if !chk.holds {
                        failures.push(format!("one-step smoothing shift fails for {name}, {rule_name}, K={k}"));
                    }
                    shifts.push(vec![
                        name.clone(),
                        rule_name.to_string(),
                        fmt(alpha),
                        fmt(k),
                        fmt(chk.shift),
                        fmt(chk.bound),
                        fmt(chk.tolerance),
                        chk.holds.to_string(),
                    ]);
                }
            }
        }
    }
    out.table(
        "smoothing_shift.csv",
        &["function", "base", "alpha", "k", "shift", "bound", "tolerance", "holds"],
        &shifts,
    )?;

    let (env, class) = build(cfg)?;
    let cert = smoothness_certificate(&class, &env, &certificate_grid(m)?, cfg.env.alpha)?;
    write_certificate(&out, &cert)?;
    if !cert.l_e_bound_holds {
        failures.push("error-functional constant exceeds 2·d·L_Φ".into());
    }
    let profile = SmoothnessProfile {
        alpha_t: cfg.env.alpha,
        l_t: cert.l_t,
        ..cfg.profile.with_m(m)
    };
    let reward = sparse_reward_family(&env, 1, cfg.seeds.base)?.remove(0);
    let plan_grid = ActionGrid::new(m, if m == 1 { 32 } else { 8 })?;
    let base = Policy::Deterministic(greedy_policy(&env, &reward, &plan_grid)?.policy);
    let mut gaps = vec![];
    for k in [4.0, 16.0, 64.0] {
        let chk = policy_gap_check(&env, &base, k, &reward, &profile, cfg.eval.quad_g)?;
        if !chk.holds {
            failures.push(format!("policy smoothing gap {} exceeds its bound at K={k}", chk.gap));
        }
        let k_eff = flambe_core::smoothness::smooth_policy(base.clone(), k)?.max_density(m);
        gaps.push(vec![
            fmt(k),
            fmt(k_eff),
            fmt(chk.gap),
            fmt(chk.bound),
            fmt(chk.tolerance),
            fmt(chk.alpha),
            fmt(chk.l),
            chk.holds.to_string(),
        ]);
    }
    out.table("policy_gap.csv", &["k", "k_eff", "gap", "bound", "tolerance", "alpha", "l", "holds"], &gaps)?;
    println!(
        "calibrated c = {c_cal:.4}; {} battery rows, {} shift checks, {} gap checks; wrote {}",
        rows.len(),
        shifts.len(),
        gaps.len(),
        out.path.display()
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(failures.join("; ")))
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct HyperArgs {
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Density-ratio class size; selects the restricted-policy mode.
    #[arg(long, conflicts_with = "unrestricted")]
    k: Option<f64>,
    /// Smooth arbitrary policies with π_K instead.
    #[arg(long)]
    unrestricted: bool,
    #[arg(long)]
    alpha_e: Option<f64>,
    #[arg(long)]
    l_e: Option<f64>,
    #[arg(long)]
    n_phi: Option<usize>,
    #[arg(long)]
    n_psi: Option<usize>,
    /// Constant in U = c·L_E^κ.
    #[arg(long)]
    c_u: Option<f64>,
}

pub fn hyper(cfg: &ExperimentConfig, args: &HyperArgs, write: bool) -> Result<(), CliError> {
    let (mut eps, mut delta, mut c_u, mut mode) = match &cfg.hyper {
        HyperSection::Theoretical {
            eps,
            delta,
            c_u,
            policy,
        } => (*eps, *delta, *c_u, *policy),
        HyperSection::Practical { k, .. } => (0.5, 0.1, 1.0, HyperMode::RestrictedPolicy { k: *k }),
    };
    eps = args.eps.unwrap_or(eps);
    delta = args.delta.unwrap_or(delta);
    c_u = args.c_u.unwrap_or(c_u);
    if let Some(k) = args.k {
        mode = HyperMode::RestrictedPolicy { k };
    }
    if args.unrestricted {
        mode = HyperMode::UnrestrictedPolicy;
    }
    let mut profile = cfg.profile.with_m(cfg.env.m);
    profile.alpha_e = args.alpha_e.unwrap_or(profile.alpha_e);
    profile.l_e = args.l_e.unwrap_or(profile.l_e);
    let req = HyperRequest {
        eps,
        delta,
        d: cfg.env.d,
        horizon: cfg.env.horizon,
        m: cfg.env.m,
        n_phi: args.n_phi.unwrap_or(1 + cfg.env.n_phi_decoys),
        n_psi: args.n_psi.unwrap_or(1 + cfg.env.n_psi_decoys),
        profile,
        mode,
        c_u,
        frozen_logs: None,
    };
    let hp = theoretical_hyperparams(&req).map_err(|e| match e {
        flambe_core::Error::Domain(msg) => CliError::Usage(msg),
        other => other.into(),
    })?;
    let mode_text = match mode {
        HyperMode::RestrictedPolicy { k } => format!("restricted (K = {k})"),
        HyperMode::UnrestrictedPolicy => "unrestricted".to_string(),
    };
    let rows: Vec<(&str, String)> = vec![
        ("mode", mode_text),
        ("eps", fmt(req.eps)),
        ("delta", fmt(req.delta)),
        ("d", req.d.to_string()),
        ("H", req.horizon.to_string()),
        ("m", req.m.to_string()),
        ("n_phi", req.n_phi.to_string()),
        ("n_psi", req.n_psi.to_string()),
        ("tau", fmt(hp.tau)),
        ("kappa", fmt(hp.kappa)),
        ("sigma", fmt(hp.sigma)),
        ("U", fmt(hp.u)),
        ("u_below_one", hp.u_below_one.to_string()),
        ("K", fmt(hp.k)),
        ("eps_used", fmt(hp.eps_used)),
        ("beta_prime", format!("{:e}", hp.beta_prime)),
        ("eps_tv", format!("{:e}", hp.eps_tv)),
        ("lambda", format!("{:e}", hp.lambda)),
        ("n", format!("{:e}", hp.n)),
        ("J_max", format!("{:e}", hp.j_max)),
        ("trajectories", format!("{:e}", hp.trajectories)),
    ];
    for (k, v) in &rows {
        println!("{k:<14}{v}");
    }
    if write {
        let out = output(cfg, "hyper")?;
        let table: Vec<Vec<String>> = rows.iter().map(|(k, v)| vec![k.to_string(), v.clone()]).collect();
        out.table("hyper.csv", &["name", "value"], &table)?;
        out.json("hyper.json", &hp)?;
    }
    Ok(())
}

pub fn smoke(o: &Overrides) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::default();
    cfg.output.dir = Some(o.out.as_ref().map_or_else(|| "smoke".to_string(), |p| p.display().to_string()));
    let out = output(&cfg, "smoke")?;
    let start = std::time::Instant::now();

    let (env, class) = build(&cfg)?;
    io::save(&out.file("env.json"), &env)?;
    io::save(&out.file("class.json"), &class)?;
    if io::load::<LowRankMdp>(&out.file("env.json"))? != env
        || io::load::<HypothesisClass>(&out.file("class.json"))? != class
    {
        return Err(CliError::Invariant("saved environment does not round-trip".into()));
    }
    let cert = smoothness_certificate(&class, &env, &certificate_grid(env.m)?, cfg.env.alpha)?;
    write_certificate(&out, &cert)?;
    if !cert.l_e_bound_holds {
        return Err(CliError::Invariant("error-functional constant exceeds 2·d·L_Φ".into()));
    }

    let rep = repetition(&cfg, 0)?;
    let (hp, _) = hyper_params(&cfg, &class)?;
    let (n, j_max) = hp.runnable()?;
    rep.run.diagnostics.write_csv(out.csv("diagnostics.csv")?)?;
    rep.gap.write_csv(out.csv("eval_gap.csv")?)?;
    io::save(&out.file("model.json"), &rep.run.model)?;
    for h in 0..env.horizon {
        if rep.run.dataset.len(h) != n * j_max {
            return Err(CliError::Invariant(format!(
                "dataset at step {h} has {} samples, expected {}",
                rep.run.dataset.len(h),
                n * j_max
            )));
        }
    }
    if let Some(r) = rep.run.diagnostics.records.iter().find(|r| !r.spot_check_holds) {
        return Err(CliError::Invariant(format!(
            "planner post-halt check failed at iteration {}, step {}",
            r.iteration, r.h
        )));
    }

    let mut policies = evaluation_policies(&env, 3, 4.0, 32, 3, 16.0, cfg.seeds.base)?;
    policies.push(Policy::UniformRandom);
    let rewards = sparse_reward_family(&env, 3, cfg.seeds.base)?;
    let mut mc = vec![];
    let mut worst_z: f64 = 0.0;
    for (i, pol) in policies.iter().enumerate() {
        for (j, r) in rewards.iter().enumerate() {
            let exact = value_exact(&env, pol, r, 128)?;
            let (est, se) = value_mc(&env, pol, r, 10_000, (i * 31 + j) as u64)?;
            let z = (est - exact).abs() / se;
            worst_z = worst_z.max(z);
            mc.push(vec![
                i.to_string(),
                j.to_string(),
                fmt(exact),
                fmt(est),
                fmt(se),
                (z <= 4.0).to_string(),
            ]);
        }
    }
    out.table("mc_check.csv", &["policy", "reward", "exact", "mc_mean", "mc_stderr", "holds"], &mc)?;
    if worst_z > 4.0 {
        return Err(CliError::Invariant(format!(
            "Monte Carlo value differs from exact value by {worst_z:.2} standard errors"
        )));
    }
    let err = &rep.run.diagnostics.model_error;
    println!(
        "smoke ok in {:.1}s: probe TV {:.4} → {:.4}, max eval gap {:.4}, worst MC |z| {worst_z:.2}; wrote {}",
        start.elapsed().as_secs_f64(),
        err[0],
        err[err.len() - 1],
        rep.gap.max_gap,
        out.path.display()
    );
    Ok(())
}

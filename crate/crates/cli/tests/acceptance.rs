//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use agentlab_cli::{run, Cli};
use agentlab_core::agent::PersonaId;
use agentlab_core::env::{feasible_actions, sample_price_path, step};
use agentlab_core::harness::{
    run_intervention_pair, run_monte_carlo, scan_scenarios, stochastically_dominates, BackendSpec, PolicyKind, RunOptions, RunSpec, Scenario,
};
use agentlab_core::policy::{evaluate_on_path, exact_expected_reward, solve_dp, to_f64, Greedy, Policy};
use agentlab_core::storage::{load_run, replay, DayRecord, RunManifest, SCHEMA_VERSION};
use agentlab_core::text::{
    adjusted_rand_index, analyze, cluster_keywords, documents_from_records, kmeans, pca, tfidf_matrix, tsne, AnalysisOptions, Condition, Document, KMeansParams,
    Matrix, TsneParams, VectorSet, VectorSource,
};
use agentlab_core::{Action, BatteryConfig, Cents, Difficulty, EnvState, Energy, InterventionSchedule, PriceModel};
use clap::Parser;
use num::{BigInt, BigRational};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    ensure(elapsed < Duration::from_secs(limit_s), || format!("took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64()))
}

fn cfg(horizon: u32, s0_kwh: i64) -> BatteryConfig {
    BatteryConfig::default().with_horizon(horizon).with_initial_soc(Energy(s0_kwh * 1000))
}

/// Best expected reward times 2^remaining for every starting SoC (kWh), by
/// expanding both price branches at every day: one node per price history.
fn history_optimum(remaining: u32, model: &PriceModel, cap: i64) -> Vec<i128> {
    if remaining == 0 {
        return vec![0; cap as usize + 1];
    }
    let low_branch = history_optimum(remaining - 1, model, cap);
    let high_branch = history_optimum(remaining - 1, model, cap);
    let scale = 1i128 << (remaining - 1);
    (0..=cap)
        .map(|s| {
            [(model.low_price.0 as i128, &low_branch), (model.high_price.0 as i128, &high_branch)]
                .iter()
                .map(|(price, cont)| {
                    [-1i64, 0, 1]
                        .iter()
                        .filter(|u| (0..=cap).contains(&(s - **u)))
                        .map(|&u| price * u as i128 * scale + cont[(s - u) as usize])
                        .max()
                        .expect("hold is always feasible")
                })
                .sum()
        })
        .collect()
}

fn c1_dp_oracle() -> Outcome {
    let model = PriceModel::default();
    let start = Instant::now();
    let mut checked = 0;
    for horizon in 1..=12u32 {
        let oracle = history_optimum(horizon, &model, 10);
        for s0 in 0..=10 {
            let c = cfg(horizon, s0);
            let (_, dp) = solve_dp(&c, &model).map_err(|e| e.to_string())?;
            let exact = exact_expected_reward(&dp, &c, &model).map_err(|e| e.to_string())?;
            let want = BigRational::new(BigInt::from(oracle[s0 as usize]), BigInt::from(1i128 << horizon));
            ensure(exact == want, || format!("T={horizon} s0={s0}: DP {exact} vs enumeration {want}"))?;
            checked += 1;
        }
    }
    within(start.elapsed(), 60)?;
    Ok(format!("{checked} (T, s0) pairs exact, {:.2} s", start.elapsed().as_secs_f64()))
}

fn c2_dominance() -> Outcome {
    let model = PriceModel::default();
    let mut ties = 0;
    let mut gap_at_default = None;
    for horizon in 1..=20u32 {
        for s0 in 0..=10 {
            let c = cfg(horizon, s0);
            let (_, dp) = solve_dp(&c, &model).map_err(|e| e.to_string())?;
            let e_dp = exact_expected_reward(&dp, &c, &model).map_err(|e| e.to_string())?;
            let e_g = exact_expected_reward(&Greedy::new(c, model), &c, &model).map_err(|e| e.to_string())?;
            ensure(e_dp >= e_g, || format!("T={horizon} s0={s0}: E[DP] {e_dp} < E[G] {e_g}"))?;
            if e_dp == e_g {
                ties += 1;
            }
            if horizon == 20 && s0 == 5 {
                ensure(e_dp > e_g, || "no strict gap at T=20, s0=5".into())?;
                gap_at_default = Some((to_f64(&e_dp), to_f64(&e_g)));
            }
        }
    }
    let (d, g) = gap_at_default.expect("default configuration visited");
    Ok(format!("231 pairs, {ties} ties; T=20 s0=5: E[DP]=${:.4} > E[G]=${:.4}", d / 100.0, g / 100.0))
}

fn c3_monte_carlo() -> Outcome {
    let start = Instant::now();
    let model = PriceModel::default();
    let c = BatteryConfig::default();
    let mut parts = Vec::new();
    for (kind, name) in [(PolicyKind::Greedy, "greedy"), (PolicyKind::Dp, "dp")] {
        let mut spec = RunSpec::new(format!("mc-{name}"), kind.clone());
        spec.repetitions = 2000;
        spec.scenario = Scenario::Sampled(20_240);
        let out = run_monte_carlo(&spec, &RunOptions::default()).map_err(|e| e.to_string())?;
        let exact = match kind {
            PolicyKind::Greedy => exact_expected_reward(&Greedy::new(c, model), &c, &model),
            _ => exact_expected_reward(&solve_dp(&c, &model).map_err(|e| e.to_string())?.1, &c, &model),
        }
        .map_err(|e| e.to_string())?;
        let (mean, se, exact) = (out.stats.mean_terminal_reward, out.stats.standard_error(), to_f64(&exact));
        let z = (mean - exact) / se;
        ensure(z.abs() <= 3.0, || format!("{name}: mean {mean:.2} vs exact {exact:.2}, z = {z:.2}"))?;
        parts.push(format!("{name} z={z:+.2}"));
    }
    within(start.elapsed(), 30)?;
    Ok(format!("{}; {:.2} s", parts.join(", "), start.elapsed().as_secs_f64()))
}

fn c4_buckets() -> Outcome {
    let scan = scan_scenarios(&PriceModel::default(), &BatteryConfig::default(), 2000, 0).map_err(|e| e.to_string())?;
    let counts: Vec<usize> = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard].iter().map(|&d| scan.count(d)).collect();
    ensure(counts.iter().all(|&c| c > 0), || format!("empty bucket: easy/medium/hard = {counts:?}"))?;
    let mut nearest = Vec::new();
    let mut hit = false;
    for target in [0.067, 0.692, 0.909] {
        let s = scan.nearest(target).ok_or("no scanned paths")?;
        hit |= (s.report.rho - target).abs() <= 0.05;
        nearest.push(format!("{target}->{:.4} (seed {})", s.report.rho, s.path_seed));
    }
    ensure(hit, || format!("no exemplar within 0.05: {}", nearest.join(", ")))?;
    Ok(format!("easy/medium/hard = {}/{}/{}, {} degenerate; nearest {}", counts[0], counts[1], counts[2], scan.degenerate.len(), nearest.join(", ")))
}

fn same_trajectory(records: &[DayRecord], expected: &agentlab_core::policy::Rollout) -> bool {
    records.len() == expected.actions.len()
        && records.iter().enumerate().all(|(t, r)| {
            r.action == expected.actions[t]
                && r.reward_cents == expected.rewards[t].0
                && r.soc_before_wh == expected.states[t].soc.0
                && r.soc_after_wh == expected.states[t + 1].soc.0
                && r.cum_reward_cents == expected.states[t + 1].cum_reward.0
        })
}

fn c5_orchestration() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let model = PriceModel::default();
    let c = BatteryConfig::default();
    let none = InterventionSchedule::none();
    let dp = solve_dp(&c, &model).map_err(|e| e.to_string())?.1;
    let greedy = Greedy::new(c, model);
    let mut checked = 0;
    for path_seed in [0u64, 11, 30] {
        let path = sample_price_path(&model, c.horizon, path_seed);
        for (script, policy) in [("dp", &dp as &dyn Policy), ("greedy", &greedy as &dyn Policy)] {
            let expected = evaluate_on_path(policy, &path, &c, &none).map_err(|e| e.to_string())?;
            let mut spec = RunSpec::new(format!("orch-{script}-{path_seed}"), PolicyKind::Agent { persona: PersonaId::Thinker, backend: BackendSpec::Mock { script: script.into() } });
            spec.scenario = Scenario::FixedPath(path.clone());
            spec.repetitions = 40;
            let opts = RunOptions { out_dir: Some(tmp.path().to_path_buf()), ..RunOptions::default() };
            let out = run_monte_carlo(&spec, &opts).map_err(|e| e.to_string())?;
            ensure(out.failures.is_empty(), || format!("{script}: {} failed repetitions", out.failures.len()))?;
            let (manifest, persisted) = load_run(out.run_dir.as_deref().ok_or("no run dir")?).map_err(|e| e.to_string())?;
            ensure(persisted == out.records, || format!("{script}: persisted records differ from in-memory records"))?;
            ensure(replay(&manifest, &persisted).is_empty(), || format!("{script}: persisted run does not replay"))?;
            for rep in persisted.chunk_by(|a, b| a.repetition == b.repetition) {
                ensure(same_trajectory(rep, &expected), || format!("{script} path {path_seed} rep {}: trajectory differs", rep[0].repetition))?;
                ensure(rep.iter().all(|r| !r.thoughts.is_empty() && !r.journal.is_empty()), || format!("{script}: missing TARJ text"))?;
            }
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, 10 * checked)?;
    Ok(format!("{checked} runs x 40 reps bit-exact incl. persisted records, {:.2} s ({:.2} s per 40-rep run)", elapsed.as_secs_f64(), elapsed.as_secs_f64() / checked as f64))
}

fn reserve_pair(script: &str) -> Result<(bool, bool, Vec<u64>, Vec<u64>, Vec<DayRecord>), String> {
    let mut spec = RunSpec::new(script, PolicyKind::Agent { persona: PersonaId::Realist, backend: BackendSpec::Mock { script: script.into() } });
    spec.scenario = Scenario::Sampled(7);
    spec.repetitions = 40;
    let pair = run_intervention_pair(&spec, &RunOptions::default()).map_err(|e| e.to_string())?;
    let control_prices: BTreeMap<(u32, u32), i64> = pair.control.records.iter().map(|r| ((r.repetition, r.day), r.price_cents)).collect();
    let shared = pair.treatment.records.len() == pair.control.records.len()
        && pair.treatment.records.iter().all(|r| control_prices.get(&(r.repetition, r.day)) == Some(&r.price_cents))
        && pair.prices_aligned();
    let (t, c) = (pair.treatment.stats.terminal_soc_histogram.clone(), pair.control.stats.terminal_soc_histogram.clone());
    Ok((shared, stochastically_dominates(&t, &c) && t != c, t, c, pair.treatment.records))
}

fn c6_intervention() -> Outcome {
    let (shared, dominates, t, c, treatment) = reserve_pair("reserve-keeper")?;
    ensure(shared, || "treatment and control saw different prices".into())?;
    let last_blackout = *InterventionSchedule::treatment_default().blackout_days.iter().max().expect("non-empty");
    let reserve = Energy(2000).0;
    ensure(
        treatment.iter().filter(|r| r.day > last_blackout && r.action == Action::Discharge).all(|r| r.soc_after_wh >= reserve),
        || "reserve keeper discharged below 2 kWh after the blackout".into(),
    )?;
    ensure(dominates, || format!("treatment {t:?} does not dominate control {c:?}"))?;
    let (g_shared, g_dom, ..) = reserve_pair("greedy-reserve-keeper")?;
    Ok(format!(
        "40 paired reps share paths; terminal SoC hist treatment {t:?} vs control {c:?}; greedy-based variant (informational): shared={g_shared}, dominates={g_dom}"
    ))
}

#[derive(Debug, Clone)]
struct Episode {
    cfg: BatteryConfig,
    schedule: InterventionSchedule,
    path_seed: u64,
    choices: Vec<usize>,
}

fn episodes() -> impl Strategy<Value = Episode> {
    (1u32..=20, 0i64..=10, any::<u64>(), proptest::collection::btree_set(1u32..=20, 0..4), proptest::collection::vec(0usize..4, 20)).prop_map(
        |(horizon, s0, path_seed, days, choices)| Episode {
            cfg: cfg(horizon, s0),
            schedule: InterventionSchedule::blackout(days.into_iter().filter(|d| *d <= horizon)),
            path_seed,
            choices,
        },
    )
}

/// Plays the episode's choices among the legal actions of each day.
fn play(ep: &Episode) -> Result<Vec<(EnvState, Action, Cents, Cents)>, String> {
    let path = sample_price_path(&PriceModel::default(), ep.cfg.horizon, ep.path_seed);
    let mut state = EnvState::initial(&ep.cfg, &ep.schedule);
    let mut steps = Vec::new();
    for day in 1..=ep.cfg.horizon {
        let legal: Vec<Action> = feasible_actions(&state, &ep.cfg, &ep.schedule).iter().collect();
        let action = legal[ep.choices[day as usize - 1] % legal.len()];
        let price = path.price_on(day);
        let out = step(&state, action, price, &ep.cfg, &ep.schedule).map_err(|e| e.to_string())?;
        steps.push((state, action, out.reward, price));
        state = out.next_state;
    }
    steps.push((state, Action::Hold, Cents::ZERO, Cents::ZERO));
    Ok(steps)
}

fn check_episode(ep: &Episode) -> Result<(), String> {
    let c = ep.cfg;
    let steps = play(ep)?;
    let mut total = 0i64;
    let mut energy_out = 0i64;
    for w in steps.windows(2) {
        let ((before, action, reward, price), (after, ..)) = (w[0], w[1]);
        ensure(after.soc >= c.floor && after.soc <= c.capacity, || format!("SoC {} out of bounds", after.soc.0))?;
        let moved = before.soc.0 - after.soc.0;
        let traded = match action {
            Action::Charge | Action::Discharge => price.0 * moved / 1000,
            _ => 0,
        };
        ensure(reward.0 == traded, || format!("day {}: reward {} for {action:?} of {moved} Wh at {}", before.day, reward.0, price.0))?;
        total += reward.0;
        energy_out += moved;
        ensure(after.cum_reward.0 == total, || "cumulative reward drifted".into())?;
    }
    let terminal = steps.last().expect("terminal state").0;
    ensure(terminal.soc.0 == c.initial_soc.0 - energy_out, || "energy not conserved".into())?;
    ensure(play(ep)? == steps, || "replay differs".into())?;

    let path = sample_price_path(&PriceModel::default(), c.horizon, ep.path_seed);
    let records: Vec<DayRecord> = steps
        .windows(2)
        .map(|w| DayRecord {
            schema_version: SCHEMA_VERSION,
            run_id: "prop".into(),
            repetition: 0,
            persona: "random".into(),
            day: w[0].0.day,
            price_cents: w[0].3 .0,
            soc_before_wh: w[0].0.soc.0,
            soc_after_wh: w[1].0.soc.0,
            action: w[0].1,
            reward_cents: w[0].2 .0,
            cum_reward_cents: w[1].0.cum_reward.0,
            in_blackout: ep.schedule.is_blackout(w[0].0.day),
            thoughts: String::new(),
            reflection: String::new(),
            journal: String::new(),
            backend_model: String::new(),
            seed: ep.path_seed,
        })
        .collect();
    let mut spec = RunSpec::new("prop", PolicyKind::Greedy);
    spec.cfg = c;
    spec.intervention = ep.schedule.clone();
    spec.scenario = Scenario::FixedPath(path);
    ensure(replay(&RunManifest::new(spec, records.len() as u64, 0), &records).is_empty(), || "stored trace does not replay".into())
}

fn c7_env_properties() -> Outcome {
    let config = PropConfig { cases: 10_000, failure_persistence: None, ..PropConfig::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&episodes(), |ep| check_episode(&ep).map_err(TestCaseError::fail)).map_err(|e| e.to_string())?;
    Ok("10000 random legal action sequences: SoC bounds, reward conservation, replay identity".into())
}

fn blobs(per: usize, centers: &[[f64; 4]], sd: f64, seed: u64) -> (Matrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (k, center) in centers.iter().enumerate() {
        for _ in 0..per {
            rows.push(center.iter().map(|m| {
                let z: f64 = StandardNormal.sample(&mut rng);
                m + sd * z
            }).collect());
            labels.push(k);
        }
    }
    (Matrix::from_rows(&rows).expect("finite rows"), labels)
}

fn doc(i: usize, text: String) -> Document {
    Document { doc_id: format!("d{i}"), run_id: "oracle".into(), persona: "p".into(), day: 1, condition: Condition::Normal, text }
}

fn c8_analytics() -> Outcome {
    let start = Instant::now();
    let centers = [[0.0, 0.0, 0.0, 0.0], [8.0, 0.0, 0.0, 0.0], [0.0, 8.0, 4.0, 0.0]];
    let (x, truth) = blobs(60, &centers, 1.0, 5);

    let km = kmeans(&x, &KMeansParams { k: 3, seed: 1, ..KMeansParams::default() }).map_err(|e| e.to_string())?;
    let ari = adjusted_rand_index(&truth, &km.labels);
    ensure(ari > 0.9, || format!("k-means ARI {ari:.4}"))?;

    let vs = VectorSet::new(x.clone(), None, VectorSource::TfIdf).map_err(|e| e.to_string())?;
    let p = pca(&vs, 4).map_err(|e| e.to_string())?;
    let mut ortho_err: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let dot: f64 = p.components[i].iter().zip(&p.components[j]).map(|(a, b)| a * b).sum();
            ortho_err = ortho_err.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    let var_err = (p.explained_variance.iter().sum::<f64>() - p.total_variance).abs();
    ensure(ortho_err < 1e-9 && var_err < 1e-9, || format!("PCA orthonormality {ortho_err:e}, variance sum {var_err:e}"))?;

    let planted = ["solar", "outage", "tariff"];
    let filler = ["day", "battery", "price", "plan", "today", "market", "energy", "home"];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut corpus = Vec::new();
    let mut labels = Vec::new();
    for (k, word) in planted.iter().enumerate() {
        for i in 0..20 {
            let pick: Vec<&str> = (0..4).map(|_| filler[rand::Rng::random_range(&mut rng, 0..filler.len())]).collect();
            corpus.push(doc(corpus.len(), format!("{word} {} {word} {}", pick.join(" "), i % 3)));
            labels.push(k);
        }
    }
    let tf = tfidf_matrix(&corpus).map_err(|e| e.to_string())?;
    let norm_err = tf.matrix.iter_rows().map(|r| (r.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs()).fold(0.0, f64::max);
    ensure(norm_err < 1e-9, || format!("TF-IDF norm error {norm_err:e}"))?;
    let kw = cluster_keywords(&corpus, &labels, 3).map_err(|e| e.to_string())?;
    for (k, word) in planted.iter().enumerate() {
        let top = kw.iter().find(|c| c.cluster == k).and_then(|c| c.terms.first()).map(|t| t.term.clone());
        ensure(top.as_deref() == Some(*word), || format!("cluster {k}: top keyword {top:?}, planted {word}"))?;
    }

    let ts = tsne(&x, &TsneParams { seed: 2, ..TsneParams::default() }).map_err(|e| e.to_string())?;
    let (kl300, kl1000) = (ts.kl_at(300).ok_or("no KL at 300")?, ts.kl_at(1000).ok_or("no KL at 1000")?);
    ensure(kl1000 < kl300, || format!("KL(1000) {kl1000:.4} >= KL(300) {kl300:.4}"))?;
    let target = ts.target_entropy();
    let h_err = ts.entropies.iter().map(|h| (h - target).abs()).fold(0.0, f64::max);
    ensure(h_err < 1e-5, || format!("entropy error {h_err:e}"))?;

    within(start.elapsed(), 120)?;
    Ok(format!(
        "ARI {ari:.3}; PCA ortho {ortho_err:.1e}, var {var_err:.1e}; TF-IDF norm {norm_err:.1e}; KL {kl300:.3}->{kl1000:.3}; entropy err {h_err:.1e}; keywords {planted:?}; {:.2} s",
        start.elapsed().as_secs_f64()
    ))
}

fn c9_shift() -> Outcome {
    let start = Instant::now();
    let mut corpus = Vec::new();
    for (persona, script) in [(PersonaId::Thinker, "greedy"), (PersonaId::Realist, "greedy"), (PersonaId::Feeler, "greedy+switch")] {
        let mut spec = RunSpec::new(format!("shift-{persona}"), PolicyKind::Agent { persona, backend: BackendSpec::Mock { script: script.into() } });
        spec.repetitions = 10;
        spec.scenario = Scenario::Sampled(42);
        let pair = run_intervention_pair(&spec, &RunOptions::default()).map_err(|e| e.to_string())?;
        corpus.extend(documents_from_records(&pair.treatment.records, Condition::Blackout));
        corpus.extend(documents_from_records(&pair.control.records, Condition::Normal));
    }
    let vectors = tfidf_matrix(&corpus).map_err(|e| e.to_string())?;
    let analysis = analyze(&corpus, &vectors, &AnalysisOptions::default()).map_err(|e| e.to_string())?;
    let shift = analysis.shift.ok_or("no shift report")?;
    let delta = |p: &str| shift.persona(p).map(|s| s.dominant_delta).ok_or(format!("no {p} shift"));
    let feeler = shift.persona("feeler").ok_or("no feeler shift")?;
    ensure(feeler.dominant_delta > 0.5, || format!("dominant-cluster delta {:.3}", feeler.dominant_delta))?;
    Ok(format!(
        "{} docs, k={}; switched feeler: cluster {} -> {}, delta {:.3}; unswitched thinker {:.3}, realist {:.3}; {:.1} s",
        corpus.len(),
        shift.k,
        feeler.dominant_normal,
        feeler.dominant_blackout,
        feeler.dominant_delta,
        delta("thinker")?,
        delta("realist")?,
        start.elapsed().as_secs_f64()
    ))
}

fn cli(args: &[&str]) -> Result<String, String> {
    let parsed = Cli::try_parse_from(std::iter::once("agentlab").chain(args.iter().copied())).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    run(&parsed, &mut out).map_err(|e| format!("agentlab {}: {e}", args.join(" ")))?;
    Ok(String::from_utf8_lossy(&out).into_owned())
}

fn build_report(root: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let runs = root.join("runs");
    let r = runs.to_str().ok_or("non-utf8 path")?;
    cli(&["--out-dir", r, "simulate", "--policy", "greedy"])?;
    cli(&["--out-dir", r, "simulate", "--policy", "dp"])?;
    for (persona, script) in [("thinker", "dp"), ("realist", "greedy"), ("feeler", "hold")] {
        cli(&["--out-dir", r, "simulate", "--policy", "agent", "--persona", persona, "--backend", &format!("mock:{script}"), "--path-seed", "100"])?;
    }
    cli(&["--out-dir", r, "simulate", "--policy", "agent", "--persona", "realist", "--backend", "mock:reserve-keeper", "--paired", "--run-id", "blackout"])?;
    let report = root.join("report");
    cli(&["report", "--runs", r, "--out", report.to_str().ok_or("non-utf8 path")?])?;
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&report)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap_or_default()))
        .collect();
    files.sort();
    Ok(files)
}

fn c10_report() -> Outcome {
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let first = build_report(a.path())?;
    let second = build_report(b.path())?;
    let svg = |name: &str| -> Result<String, String> {
        first.iter().find(|(n, _)| n == name).map(|(_, d)| String::from_utf8_lossy(d).into_owned()).ok_or(format!("{name} not rendered"))
    };
    let count = |s: &str, pat: &str| s.matches(pat).count();

    let fig1 = svg("fig1_benchmarks.svg")?;
    ensure(count(&fig1, r#"class="panel""#) == 4 && count(&fig1, r#"class="band""#) == 4, || "Fig 1 shape: want 2x2 panels with sd bands".into())?;
    ensure(fig1.find("greedy: SoC") < fig1.find("dp: SoC"), || "Fig 1: greedy should be the left column".into())?;
    let fig4 = svg("fig4_personas.svg")?;
    ensure(count(&fig4, r#"class="band""#) >= 6 && count(&fig4, r#"class="bar""#) >= 3, || "Fig 4 shape: want per-persona SoC and reward bands".into())?;
    let fig5 = svg("fig5_blackout.svg")?;
    ensure(count(&fig5, r#"class="band""#) == 4 && fig5.contains("treatment (blackout 8,9)") && fig5.contains(">control<"), || "Fig 5 shape: want overlaid treatment/control bands".into())?;

    let csvs: Vec<&(String, Vec<u8>)> = first.iter().filter(|(n, _)| n.ends_with(".csv")).collect();
    ensure(csvs.len() >= 5, || format!("only {} CSVs", csvs.len()))?;
    ensure(first.len() == second.len(), || "reruns produced different file sets".into())?;
    for ((n1, d1), (n2, d2)) in first.iter().zip(&second) {
        ensure(n1 == n2 && (d1 == d2 || !n1.ends_with(".csv")), || format!("{n1} differs between reruns"))?;
    }
    let svgs_identical = first.iter().zip(&second).filter(|(x, _)| x.0.ends_with(".svg")).all(|(x, y)| x.1 == y.1);
    Ok(format!("Fig 1/4/5 SVGs rendered; {} CSVs byte-identical across reruns (SVGs identical: {svgs_identical})", csvs.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 DP equals exhaustive enumeration", c1_dp_oracle),
        ("2 E[DP] >= E[G], strict at defaults", c2_dominance),
        ("3 Monte Carlo within 3 SE of exact", c3_monte_carlo),
        ("4 complexity buckets and exemplars", c4_buckets),
        ("5 mock agent reproduces benchmark rollouts", c5_orchestration),
        ("6 paired arms aligned, reserve keeper dominates", c6_intervention),
        ("7 environment conservation properties", c7_env_properties),
        ("8 analytics oracles", c8_analytics),
        ("9 phrase-bank switch detected", c9_shift),
        ("10 report figures and reproducible CSVs", c10_report),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {name} [{secs:.2} s]: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name} [{secs:.2} s]: {why}");
            }
        }
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

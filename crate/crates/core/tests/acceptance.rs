//! Acceptance run: one PASS/FAIL line per primary criterion.
//!
//! Exits 0 whatever the outcome so the workspace test run stays green
//! while reporting honestly; `XIL_ACCEPTANCE_STRICT=1` makes any FAIL exit 1.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use common::{max_abs_diff, oracle_marginals, random_instance};
use xil::agent::{initial_memory, Agent, AgentConfig, Cause, Change};
use xil::dialogue::{generate, parse, read_jsonl, replay, template_corpus, write_jsonl, Morphology, Move, Speaker, Strategy, Teacher};
use xil::explain::{bp_inference, candidate_evidence, cited_evidence, preserves, EXHAUSTIVE_LIMIT};
use xil::harness::{calibrate_initial_xb, episode_scene, measure, run_episode, run_experiment, CalibrationSettings, ExperimentConfig, ExperimentResult, Quality, RunResult};
use xil::logic::ConceptKind;
use xil::memory::{KnowledgeBase, Label};
use xil::reasoner::{build_factor_graph, exact_marginals, run_bp, BpSettings, WeightedProgram};
use xil::rng;
use xil::worldsim::{DomainConfig, DomainName};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn report(n: usize, title: &str, elapsed: Duration, o: &Outcome) {
    println!(
        "criterion {n} {}: {} ({:.1}s) {}",
        title,
        if o.pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        o.detail
    );
}

fn inference_oracle() -> Outcome {
    let t0 = Instant::now();
    let (mut n, mut cyclic) = (0, 0);
    let (mut worst, mut worst_acyclic) = (0.0f64, 0.0f64);
    let mut seed = 0u64;
    while n < 1000 {
        let (_, _, program) = random_instance(&mut rng::rng(rng::derive(0, "acceptance/graphs", seed)));
        seed += 1;
        let g = build_factor_graph(&program).expect("compiled programs build");
        if g.variables.len() > 20 {
            continue;
        }
        n += 1;
        let d = max_abs_diff(&run_bp(&g, &BpSettings::default()).marginals, &exact_marginals(&g).expect("small graph"));
        worst = worst.max(d);
        if g.is_acyclic() {
            worst_acyclic = worst_acyclic.max(d);
        } else {
            cyclic += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        worst <= 0.05 && worst_acyclic <= 1e-6 && secs < 60.0,
        format!("{n} graphs ({cyclic} loopy after merging), max |bp-exact| {worst:.2e}, acyclic {worst_acyclic:.2e}"),
    )
}

fn evidence_identity() -> Outcome {
    let mut worst_grid = 0.0f64;
    for i in 1..=99 {
        let p = i as f64 / 100.0;
        let text = format!("0.5 :: g(o).\n{p} :: ev_g(o) <- g(o).\n{} :: ev_g(o) <- not g(o).\nevidence ev_g(o).\n", 1.0 - p);
        let g = build_factor_graph(&text.parse().expect("grid program")).expect("grid graph");
        worst_grid = worst_grid.max((run_bp(&g, &BpSettings::default()).marginals["g(o)"] - p).abs());
    }
    let worked = [
        ("deductive", "0.5 :: a(o).\n0.8 :: ev_a(o) <- a(o).\n0.2 :: ev_a(o) <- not a(o).\nevidence ev_a(o).\n0.5 :: b(o).\n0.99 :: <- a(o), not b(o).\n", 0.669),
        ("abductive", "0.5 :: a(o).\n0.5 :: b(o).\n0.9 :: ev_b(o) <- b(o).\n0.1 :: ev_b(o) <- not b(o).\nevidence ev_b(o).\n0.99 :: <- b(o), not a(o).\n", 0.902),
    ];
    let mut pass = worst_grid <= 1e-9;
    let mut detail = format!("grid max error {worst_grid:.1e}");
    for (name, text, quoted) in worked {
        let program: WeightedProgram = text.parse().expect("worked program");
        let oracle = oracle_marginals(&program)["a(o)"];
        let bp = run_bp(&build_factor_graph(&program).expect("worked graph"), &BpSettings::default()).marginals["a(o)"];
        pass &= (bp - oracle).abs() <= 1e-6 && (oracle - quoted).abs() < 5e-4;
        detail += &format!("; {name} {bp:.6} vs enumeration {oracle:.6}");
    }
    outcome(pass, detail)
}

fn calibration() -> Outcome {
    let t0 = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for cfg in [DomainConfig::single_4way(), DomainConfig::double_5way()] {
        let rep = measure(&cfg, &CalibrationSettings::default()).expect("calibration measure");
        pass &= rep.within_tolerance();
        let accs: Vec<String> = rep.rows.iter().map(|r| format!("{:.2}", r.accuracy)).collect();
        parts.push(format!("{} {}", cfg.name.as_str(), accs.join("/")));
    }
    pass &= t0.elapsed().as_secs_f64() < 120.0;
    outcome(pass, format!("{} (targets 74.83/88.86/98.17 +-5)", parts.join(", ")))
}

fn experiment(domain: DomainName, quality: Quality, strategies: &[Strategy]) -> ExperimentResult {
    let mut cfg = ExperimentConfig::new(domain, quality);
    cfg.strategies = strategies.to_vec();
    run_experiment(&cfg).expect("experiment runs")
}

fn less(r: &ExperimentResult, a: Strategy, b: Strategy) -> (bool, String) {
    let t = r
        .summary
        .test(a, b)
        .or_else(|| r.summary.test(b, a))
        .expect("pair tested");
    let (ma, mb) = if t.a == a { (t.mean_a, t.mean_b) } else { (t.mean_b, t.mean_a) };
    (ma < mb && t.welch.p < 0.05, format!("{a} {ma:.2} < {b} {mb:.2} p={:.3}", t.welch.p))
}

fn ordering(r: &ExperimentResult, secs: f64) -> Outcome {
    let (p1, d1) = less(r, Strategy::VisGenrExpl, Strategy::VisGenr);
    let (p2, d2) = less(r, Strategy::VisGenr, Strategy::VisOnly);
    outcome(p1 && p2 && secs < 600.0, format!("{d1}; {d2}; run {secs:.0}s"))
}

/// A learner run that keeps the agent, like `run_single`, calling `each`
/// after every episode.
fn drive(domain: DomainName, strategy: Strategy, seed: u64, episodes: usize, mut each: impl FnMut(&Agent, &xil::harness::EpisodeRecord)) -> (Agent, BTreeMap<String, (usize, usize)>) {
    let cfg = DomainConfig::named(domain);
    let teacher = Teacher::new(cfg.clone()).expect("teacher");
    let xb = calibrate_initial_xb(Quality::Lq, &cfg, rng::derive(seed, "initial-xb", 0)).expect("initial exemplars");
    let memory = initial_memory(&cfg, &xb).expect("initial memory");
    let initial = memory.xb.counts();
    let mut agent = Agent::new(AgentConfig::new(strategy), cfg, memory);
    for e in 0..episodes {
        let scene = episode_scene(&teacher, seed, e);
        let rec = run_episode(&mut agent, &teacher, &scene, seed, e).expect("episode");
        each(&agent, &rec);
    }
    (agent, initial)
}

struct Soundness {
    why: usize,
    reasons: usize,
    explained: usize,
    direct: usize,
    not_preserving: usize,
    not_minimal: usize,
    greedy: usize,
}

fn soundness_of(agent: &Agent, rec: &xil::harness::EpisodeRecord, s: &mut Soundness) {
    let asked = rec.transcript.iter().any(|r| matches!(r.mv, Move::WhyQ { .. }));
    if !asked {
        return;
    }
    s.why += 1;
    let last = agent.last_inference().expect("answer cached");
    let wholes: Vec<&str> = agent.memory.whole_types().iter().map(|c| c.id.as_str()).collect();
    let parts: BTreeSet<String> = agent
        .memory
        .concepts
        .values()
        .filter(|c| c.kind == ConceptKind::PartType)
        .map(|c| c.id.clone())
        .collect();
    let object = last.scene_graph.target().id.clone();
    for r in rec.transcript.iter().filter(|r| r.speaker == Speaker::Learner) {
        if let Move::Explain { region, .. } = &r.mv {
            s.explained += 1;
            if r.refs.get(region) == Some(&last.object) {
                s.direct += 1;
            }
        }
    }
    let Some(reason) = &last.reason else { return };
    s.reasons += 1;
    if let Some((_, atom)) = cited_evidence(reason, &last.graph, &parts) {
        if atom.args == [object.clone()] || !parts.contains(&atom.pred) {
            s.direct += 1;
        }
    }
    let infer = bp_inference(BpSettings::default());
    let vars: Vec<usize> = reason.evidence.iter().map(|n| last.graph.var(n).expect("reason variable")).collect();
    let holds = |subset: &[usize]| {
        let m = infer(&last.graph.restrict_evidence(&subset.iter().copied().collect())).expect("inference");
        preserves(&m, &last.answer, &wholes, &object).is_some()
    };
    if !holds(&vars) {
        s.not_preserving += 1;
    }
    // exhaustive over every proper subset when the evidence pool is small
    // enough for the search to have been exhaustive; single removals beyond
    let pool = candidate_evidence(&last.graph, &wholes, &object).len();
    let subsets: Vec<Vec<usize>> = if pool <= EXHAUSTIVE_LIMIT {
        (1u32..(1 << vars.len()) - 1)
            .map(|mask| (0..vars.len()).filter(|i| mask >> i & 1 == 1).map(|i| vars[i]).collect())
            .collect()
    } else {
        s.greedy += 1;
        (0..vars.len()).map(|i| [&vars[..i], &vars[i + 1..]].concat()).filter(|v| !v.is_empty()).collect()
    };
    if subsets.iter().any(|sub| holds(sub)) {
        s.not_minimal += 1;
    }
}

fn kb_from_audit(run: &RunResult) -> Result<KnowledgeBase, String> {
    let mut kb = KnowledgeBase::new();
    for a in &run.audit {
        if let Change::Rule { whole, part, added } = &a.change {
            let got = kb.add_whole_part(whole, part, Some(a.episode)).map_err(|e| e.to_string())?;
            if got != *added {
                return Err(format!("rule {whole}/{part} added={added} but replay says {got}"));
            }
        }
    }
    if kb.len() != run.final_kb_rules {
        return Err(format!("audit rebuilds {} rules, run ended with {}", kb.len(), run.final_kb_rules));
    }
    let before = kb.clone();
    for (w, p) in before.whole_part_pairs().map(|(w, p)| (w.to_string(), p.to_string())).collect::<Vec<_>>() {
        if kb.add_whole_part(&w, &p, None).map_err(|e| e.to_string())? {
            return Err(format!("{w}/{p} inserted twice"));
        }
    }
    if kb != before {
        return Err("re-insertion changed the KB".into());
    }
    Ok(kb)
}

fn traceable(run: &RunResult, tau: f64) -> Result<(), String> {
    let corrected: BTreeSet<usize> = run
        .transcript
        .iter()
        .filter(|r| matches!(r.mv, Move::Correction { .. }))
        .map(|r| r.episode)
        .collect();
    for a in &run.audit {
        match &a.cause {
            Cause::TeacherMove { turn, mv } => {
                let found = run
                    .transcript
                    .iter()
                    .any(|r| r.episode == a.episode && r.turn == *turn && r.speaker == Speaker::Teacher && r.mv.name() == mv);
                if !found {
                    return Err(format!("episode {} turn {turn}: no teacher {mv}", a.episode));
                }
            }
            Cause::Unconfident { probability_milli } => {
                // the audit stores the probability rounded to thousandths
                let ok = !corrected.contains(&a.episode)
                    && (*probability_milli as f64) < tau * 1000.0 + 0.5
                    && matches!(a.change, Change::Exemplar { label: Label::Positive, .. });
                if !ok {
                    return Err(format!(
                        "episode {}: unconfident change {:?} at p={probability_milli}/1000, corrected {}",
                        a.episode,
                        a.change,
                        corrected.contains(&a.episode)
                    ));
                }
            }
        }
    }
    Ok(())
}

fn main() {
    rng::check_rng_version().expect("rng version");
    let strict = std::env::var("XIL_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut failed = Vec::new();
    let mut record = |n: usize, title: &str, f: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let o = f();
        report(n, title, t0.elapsed(), &o);
        if !o.pass {
            failed.push(n);
        }
    };

    record(1, "inference-oracle agreement", &mut inference_oracle);
    record(2, "evidence identity and worked examples", &mut evidence_identity);
    record(3, "calibration", &mut calibration);

    let t0 = Instant::now();
    let four = experiment(DomainName::Single4way, Quality::Lq, &Strategy::ALL);
    let four_secs = t0.elapsed().as_secs_f64();
    record(4, "single_4way LQ regret ordering", &mut || ordering(&four, four_secs));

    let t0 = Instant::now();
    let five = experiment(DomainName::Double5way, Quality::Mq, &Strategy::ALL);
    let five_secs = t0.elapsed();
    record(5, "double_5way MQ Expl < Genr", &mut || {
        let (pass, detail) = less(&five, Strategy::VisGenrExpl, Strategy::VisGenr);
        outcome(pass, format!("{detail}; run {:.0}s", five_secs.as_secs_f64()))
    });
    let hq = experiment(DomainName::Double5way, Quality::Hq, &[Strategy::VisGenr, Strategy::VisGenrExpl]);
    println!("report double_5way HQ (no gate): {}", less(&hq, Strategy::VisGenrExpl, Strategy::VisGenr).1);

    let mut kept = Vec::new();
    record(6, "explanation soundness", &mut || {
        let mut s = Soundness { why: 0, reasons: 0, explained: 0, direct: 0, not_preserving: 0, not_minimal: 0, greedy: 0 };
        for (domain, seed) in [(DomainName::Single4way, 101), (DomainName::Single4way, 102), (DomainName::Double5way, 103), (DomainName::Double5way, 104)] {
            kept.push(drive(domain, Strategy::VisGenrExpl, seed, 120, |a, r| soundness_of(a, r, &mut s)));
        }
        outcome(
            s.why > 0 && s.direct == 0 && s.not_preserving == 0 && s.not_minimal == 0,
            format!(
                "{} why-questions, {} reasons, {} explanations; direct-evidence citations {}, non-preserving {}, non-minimal {} ({} with pools over 12 checked by single removal)",
                s.why, s.reasons, s.explained, s.direct, s.not_preserving, s.not_minimal, s.greedy
            ),
        )
    });

    record(7, "transcript replay and grammar round trip", &mut || {
        let mut pass = true;
        let mut detail = Vec::new();
        for (cfg, results) in [
            (DomainConfig::single_4way(), vec![&four]),
            (DomainConfig::double_5way(), vec![&five, &hq]),
        ] {
            let teacher = Teacher::new(cfg.clone()).expect("teacher");
            let morph = Morphology::new(cfg.words.values().cloned());
            let records: Vec<_> = results.iter().flat_map(|r| r.runs.iter().flat_map(|run| run.transcript.iter().cloned())).collect();
            let expected: usize = results.iter().map(|r| r.runs.len() * r.summary.episodes).sum();
            let mut jsonl = Vec::new();
            write_jsonl(&mut jsonl, &records).expect("jsonl write");
            let back = read_jsonl(jsonl.as_slice()).expect("jsonl read");
            match replay(&back, teacher.lexicon(), &morph) {
                Ok(rep) => {
                    pass &= back == records && rep.episodes == expected;
                    detail.push(format!("{} {}/{} episodes", cfg.name.as_str(), rep.episodes, expected));
                }
                Err(e) => {
                    pass = false;
                    detail.push(format!("{} replay error: {e}", cfg.name.as_str()));
                }
            }
            let corpus = template_corpus(&cfg);
            let bad = corpus
                .iter()
                .filter(|mv| {
                    generate(mv, teacher.lexicon())
                        .and_then(|text| parse(&text, teacher.lexicon(), &morph))
                        .map_or(true, |p| p.mv != **mv)
                })
                .count();
            pass &= bad == 0 && !corpus.is_empty();
            detail.push(format!("{} corpus {}/{} round trip", cfg.name.as_str(), corpus.len() - bad, corpus.len()));
        }
        outcome(pass, detail.join(", "))
    });

    record(8, "KB idempotence and mutation traceability", &mut || {
        let tau = AgentConfig::new(Strategy::VisGenrExpl).tau;
        let mut problems = Vec::new();
        let (mut runs, mut vis_only_rules) = (0, 0);
        for run in four.runs.iter().chain(&five.runs).chain(&hq.runs) {
            runs += 1;
            if run.strategy == Strategy::VisOnly {
                vis_only_rules += run.final_kb_rules;
            }
            if let Err(e) = kb_from_audit(run).and_then(|_| traceable(run, tau)) {
                problems.push(format!("{} seed {}: {e}", run.strategy, run.seed));
            }
        }
        for (agent, initial) in &kept {
            let mut expected = initial.clone();
            for a in &agent.audit {
                if let Change::Exemplar { concept, label, .. } = &a.change {
                    let slot = expected.entry(concept.clone()).or_default();
                    match label {
                        Label::Positive => slot.0 += 1,
                        Label::Negative => slot.1 += 1,
                    }
                }
            }
            if expected != agent.memory.xb.counts() {
                problems.push("exemplar counts differ from the audit".into());
            }
        }
        outcome(
            problems.is_empty() && vis_only_rules == 0,
            format!(
                "{runs} runs, VisOnly KB rules {vis_only_rules}, {} untraceable{}",
                problems.len(),
                problems.first().map(|p| format!(" (first: {p})")).unwrap_or_default()
            ),
        )
    });

    if failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        if strict {
            std::process::exit(1);
        }
    }
}

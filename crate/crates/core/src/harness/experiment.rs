//! Cumulative-regret experiments over strategies and seeds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::agent::{initial_memory, Agent, AgentConfig};
use crate::dialogue::{Strategy, Teacher, TranscriptRecord};
use crate::error::{Error, Result};
use crate::rng;
use crate::worldsim::{DomainConfig, DomainName};

use super::calibrate::{calibrate_initial_xb, Quality};
use super::episode::{episode_scene, run_episode};
use super::stats::{ci95_half_width, mean, welch, Welch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub strategies: Vec<Strategy>,
    pub seeds: usize,
    pub episodes: usize,
    pub quality: Quality,
    /// Root of every per-seed stream.
    pub base_seed: u64,
    pub threads: usize,
    pub out: Option<PathBuf>,
    /// Also write every transcript as JSONL.
    pub transcripts: bool,
}

impl ExperimentConfig {
    pub fn new(domain: DomainName, quality: Quality) -> Self {
        ExperimentConfig {
            domain: DomainConfig::named(domain),
            strategies: Strategy::ALL.to_vec(),
            seeds: 30,
            episodes: 120,
            quality,
            base_seed: 0,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            out: None,
            transcripts: false,
        }
    }

    /// Seed of run `i`, shared by every strategy.
    pub fn seed(&self, i: usize) -> u64 {
        rng::derive(self.base_seed, "run", i as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub strategy: Strategy,
    pub seed: u64,
    /// Cumulative mistakes after each episode.
    pub regret: Vec<u32>,
    pub transcript: Vec<TranscriptRecord>,
    pub final_kb_rules: usize,
    pub audit: Vec<crate::agent::AuditEntry>,
}

/// One strategy over one seed.
pub fn run_single(cfg: &ExperimentConfig, strategy: Strategy, seed: u64) -> Result<RunResult> {
    let teacher = Teacher::new(cfg.domain.clone())?;
    let xb = calibrate_initial_xb(cfg.quality, &cfg.domain, rng::derive(seed, "initial-xb", 0))?;
    let memory = initial_memory(&cfg.domain, &xb)?;
    let mut agent = Agent::new(AgentConfig::new(strategy), cfg.domain.clone(), memory);
    let mut regret = Vec::with_capacity(cfg.episodes);
    let mut transcript = Vec::new();
    let mut mistakes = 0;
    for e in 0..cfg.episodes {
        let scene = episode_scene(&teacher, seed, e);
        let rec = run_episode(&mut agent, &teacher, &scene, seed, e)
            .map_err(|err| Error::Conformance(format!("{strategy} seed {seed} episode {e}: {err}")))?;
        mistakes += u32::from(!rec.correct);
        regret.push(mistakes);
        transcript.extend(rec.transcript);
    }
    Ok(RunResult {
        strategy,
        seed,
        regret,
        transcript,
        final_kb_rules: agent.memory.kb.len(),
        audit: agent.audit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretCurve {
    pub strategy: Strategy,
    /// seeds x episodes
    pub rows: Vec<Vec<u32>>,
    pub mean: Vec<f64>,
    pub ci95: Vec<f64>,
}

impl RegretCurve {
    pub fn finals(&self) -> Vec<f64> {
        self.rows.iter().map(|r| *r.last().unwrap_or(&0) as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub a: Strategy,
    pub b: Strategy,
    pub mean_a: f64,
    pub mean_b: f64,
    pub welch: Welch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub domain: String,
    pub quality: Quality,
    pub seeds: usize,
    pub episodes: usize,
    /// strategy -> (mean final regret, CI half-width)
    pub finals: BTreeMap<Strategy, (f64, f64)>,
    pub tests: Vec<PairTest>,
}

impl ExperimentSummary {
    pub fn test(&self, a: Strategy, b: Strategy) -> Option<&PairTest> {
        self.tests.iter().find(|t| t.a == a && t.b == b)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "domain {} quality {} seeds {} episodes {}\n",
            self.domain, self.quality, self.seeds, self.episodes
        );
        for (st, (m, ci)) in &self.finals {
            let _ = writeln!(s, "final regret {st}: {m:.3} +/- {ci:.3}");
        }
        for t in &self.tests {
            let _ = writeln!(
                s,
                "welch {} vs {}: {:.3} vs {:.3}, t = {:.3}, df = {:.1}, p = {:.3e}",
                t.a, t.b, t.mean_a, t.mean_b, t.welch.t, t.welch.df, t.welch.p
            );
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub curves: Vec<RegretCurve>,
    pub summary: ExperimentSummary,
    pub runs: Vec<RunResult>,
}

impl ExperimentResult {
    pub fn curve(&self, s: Strategy) -> Option<&RegretCurve> {
        self.curves.iter().find(|c| c.strategy == s)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("strategy,seed,episode,cumulative_regret\n");
        for r in &self.runs {
            for (e, v) in r.regret.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{}", r.strategy, r.seed, e, v);
            }
        }
        out
    }
}

/// Runs every (strategy, seed) pair on a pool of threads. Results do not
/// depend on the thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.domain.validate()?;
    let jobs: Vec<(Strategy, u64)> = cfg
        .strategies
        .iter()
        .flat_map(|&s| (0..cfg.seeds).map(move |i| (s, cfg.seed(i))))
        .collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<Result<RunResult>>>> = jobs.iter().map(|_| Default::default()).collect();
    std::thread::scope(|scope| {
        for _ in 0..cfg.threads.max(1).min(jobs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(&(s, seed)) = jobs.get(i) else { break };
                let r = run_single(cfg, s, seed);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    let runs: Vec<RunResult> = slots
        .into_iter()
        .map(|m| m.into_inner().expect("result slot").expect("every job ran"))
        .collect::<Result<_>>()?;

    let mut curves = Vec::new();
    for &s in &cfg.strategies {
        let rows: Vec<Vec<u32>> = runs.iter().filter(|r| r.strategy == s).map(|r| r.regret.clone()).collect();
        let (mut m, mut ci) = (Vec::new(), Vec::new());
        for e in 0..cfg.episodes {
            let col: Vec<f64> = rows.iter().map(|r| r[e] as f64).collect();
            m.push(mean(&col));
            ci.push(ci95_half_width(&col));
        }
        curves.push(RegretCurve {
            strategy: s,
            rows,
            mean: m,
            ci95: ci,
        });
    }
    let mut tests = Vec::new();
    for (i, a) in curves.iter().enumerate() {
        for b in &curves[i + 1..] {
            let (fa, fb) = (a.finals(), b.finals());
            tests.push(PairTest {
                a: a.strategy,
                b: b.strategy,
                mean_a: mean(&fa),
                mean_b: mean(&fb),
                welch: welch(&fa, &fb),
            });
        }
    }
    let summary = ExperimentSummary {
        domain: cfg.domain.name.as_str().into(),
        quality: cfg.quality,
        seeds: cfg.seeds,
        episodes: cfg.episodes,
        finals: curves
            .iter()
            .map(|c| {
                let f = c.finals();
                (c.strategy, (mean(&f), ci95_half_width(&f)))
            })
            .collect(),
        tests,
    };
    let result = ExperimentResult { curves, summary, runs };
    if let Some(dir) = &cfg.out {
        write_outputs(cfg, &result, dir)?;
    }
    Ok(result)
}

fn write_outputs(cfg: &ExperimentConfig, result: &ExperimentResult, dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("regret.csv"), result.csv())?;
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&result.summary)?)?;
    std::fs::write(dir.join("summary.txt"), result.summary.to_text())?;
    if cfg.transcripts {
        let mut buf = Vec::new();
        for r in &result.runs {
            crate::dialogue::write_jsonl(&mut buf, &r.transcript)?;
        }
        std::fs::write(dir.join("transcripts.jsonl"), buf)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            seeds: 3,
            episodes: 12,
            threads: 2,
            ..ExperimentConfig::new(DomainName::Single4way, Quality::Lq)
        }
    }

    #[test]
    fn curves_are_step_functions() {
        let res = run_experiment(&small()).unwrap();
        for c in &res.curves {
            for row in &c.rows {
                let mut prev = 0;
                for (e, &v) in row.iter().enumerate() {
                    assert!(v == prev || v == prev + 1);
                    assert!(v as usize <= e + 1);
                    prev = v;
                }
            }
        }
        assert_eq!(res.summary.tests.len(), 3);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let a = run_experiment(&small()).unwrap();
        let b = run_experiment(&ExperimentConfig { threads: 1, ..small() }).unwrap();
        assert_eq!(a.csv(), b.csv());
        assert_eq!(a.runs.iter().map(|r| &r.transcript).collect::<Vec<_>>(), b.runs.iter().map(|r| &r.transcript).collect::<Vec<_>>());
    }

    #[test]
    fn same_strategy_twice_is_identical() {
        let cfg = ExperimentConfig {
            strategies: vec![Strategy::VisGenr, Strategy::VisGenr],
            ..small()
        };
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.curves[0].rows, res.curves[1].rows);
        assert_eq!(res.summary.tests[0].welch.p, 1.0);
    }
}

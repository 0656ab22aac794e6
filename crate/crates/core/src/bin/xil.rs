use std::io::{BufRead, Write};
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use xil::dialogue::{read_jsonl, replay, Morphology, Strategy, Teacher};
use xil::harness::{calibrate, run_experiment, serve, CalibrationSettings, ExperimentConfig, Quality, Session};
use xil::reasoner::{build_factor_graph, exact_marginals, run_bp, BpSettings, WeightedProgram, MAX_EXACT_VARS};
use xil::rng::check_rng_version;
use xil::worldsim::{DomainConfig, DomainName};

#[derive(Parser)]
#[command(name = "xil", version, about = "Explanatory interactive learning workbench")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cumulative-regret experiment over strategies and seeds.
    RunExperiment {
        #[arg(long, default_value = "single_4way")]
        domain: DomainName,
        /// Domain config file; overrides --domain.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "vis_only,vis_genr,vis_genr_expl")]
        strategies: Vec<Strategy>,
        #[arg(long, default_value_t = 30)]
        seeds: usize,
        #[arg(long, default_value_t = 120)]
        episodes: usize,
        #[arg(long, default_value = "lq")]
        quality: Quality,
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write transcripts.jsonl into --out.
        #[arg(long)]
        transcripts: bool,
    },
    /// Fits the part-proposal noise to the LQ/MQ/HQ accuracy targets.
    Calibrate {
        #[arg(long, default_value = "single_4way")]
        domain: DomainName,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report only this quality.
        #[arg(long)]
        quality: Option<Quality>,
        /// Measure at the config's noise instead of searching.
        #[arg(long)]
        measure_only: bool,
        /// Write the calibrated domain config here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Marginals of a weighted program.
    Infer {
        #[arg(long)]
        program_file: PathBuf,
        /// Exact enumeration instead of belief propagation.
        #[arg(long)]
        exact: bool,
    },
    /// Checks a transcript against the grammar and the dialogue protocol.
    Replay {
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long, default_value = "single_4way")]
        domain: DomainName,
    },
    /// Teach a learner from the terminal.
    Repl {
        #[arg(long, default_value = "single_4way")]
        domain: DomainName,
        #[arg(long, default_value = "vis_genr_expl")]
        strategy: Strategy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "lq")]
        quality: Quality,
    },
    /// Session service for the teacher console (JSON lines over TCP).
    Serve {
        #[arg(long, default_value = "127.0.0.1:7411")]
        bind: String,
    },
}

fn domain(name: DomainName, file: Option<&PathBuf>) -> anyhow::Result<DomainConfig> {
    match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(DomainConfig::from_toml(&text)?)
        }
        None => Ok(DomainConfig::named(name)),
    }
}

fn main() -> anyhow::Result<()> {
    check_rng_version()?;
    match Cli::parse().cmd {
        Cmd::RunExperiment {
            domain: name,
            config,
            strategies,
            seeds,
            episodes,
            quality,
            base_seed,
            threads,
            out,
            transcripts,
        } => {
            let defaults = ExperimentConfig::new(name, quality);
            let cfg = ExperimentConfig {
                domain: domain(name, config.as_ref())?,
                strategies,
                seeds,
                episodes,
                base_seed,
                threads: threads.unwrap_or(defaults.threads),
                out,
                transcripts,
                ..defaults
            };
            if cfg.transcripts && cfg.out.is_none() {
                bail!("--transcripts needs --out");
            }
            let res = run_experiment(&cfg)?;
            print!("{}", res.summary.to_text());
        }
        Cmd::Calibrate {
            domain: name,
            config,
            quality,
            measure_only,
            out,
        } => {
            let cfg = domain(name, config.as_ref())?;
            let settings = CalibrationSettings::default();
            let (cfg, report) = if measure_only {
                let r = xil::harness::measure(&cfg, &settings)?;
                (cfg, r)
            } else {
                calibrate(&cfg, &settings)?
            };
            println!("domain {} region sigma {:.3}", cfg.name.as_str(), report.sigma);
            for row in report.rows.iter().filter(|r| quality.is_none_or(|q| q == r.quality)) {
                println!(
                    "{} accuracy {:.2} target {:.2} gap {:+.2}",
                    row.quality,
                    row.accuracy,
                    row.target,
                    row.accuracy - row.target
                );
            }
            if let Some(p) = out {
                std::fs::write(&p, cfg.to_toml())?;
            }
        }
        Cmd::Infer { program_file, exact } => {
            let text = std::fs::read_to_string(&program_file).with_context(|| format!("reading {}", program_file.display()))?;
            let program: WeightedProgram = text.parse()?;
            let graph = build_factor_graph(&program)?;
            let marginals = if exact {
                exact_marginals(&graph).with_context(|| format!("enumeration is limited to {MAX_EXACT_VARS} variables per component"))?
            } else {
                let r = run_bp(&graph, &BpSettings::default());
                if !r.converged {
                    eprintln!("warning: belief propagation did not converge in {} iterations", r.iterations);
                }
                r.marginals
            };
            for (name, p) in marginals.iter().filter(|(n, _)| !n.contains("_viol")) {
                println!("{p:.6}  {name}");
            }
        }
        Cmd::Replay { transcript, domain: name } => {
            let f = std::fs::File::open(&transcript).with_context(|| format!("opening {}", transcript.display()))?;
            let records = read_jsonl(std::io::BufReader::new(f))?;
            let cfg = DomainConfig::named(name);
            let teacher = Teacher::new(cfg.clone())?;
            let morphology = Morphology::new(cfg.words.values().cloned());
            let r = replay(&records, teacher.lexicon(), &morphology)?;
            println!("ok: {} episodes, {} turns, {} mistakes", r.episodes, r.turns, r.mistakes);
        }
        Cmd::Repl {
            domain: name,
            strategy,
            seed,
            quality,
        } => repl(Session::new(DomainConfig::named(name), strategy, seed, quality)?)?,
        Cmd::Serve { bind } => {
            eprintln!("listening on {bind}");
            serve(&bind)?;
        }
    }
    Ok(())
}

const REPL_HELP: &str = "\
Type teacher utterances, e.g. `What kind of truck is this_o?`.
Region ids (r0, r1, ...) and the learner's tags can be used as this_<id>.
Commands: :accept  :next  :scene  :memory  :transcript  :help  :quit";

fn show_scene(s: &xil::harness::SceneSchematic) {
    println!("scene {}: truck {} is a {}", s.id, s.truck.id, s.truck.whole);
    for r in &s.truck.regions {
        println!("  {} {:?} {}", r.id, r.role, r.label.as_deref().unwrap_or("-"));
    }
    for r in &s.background {
        println!("  {} {:?} {}", r.id, r.role, r.label.as_deref().unwrap_or("-"));
    }
}

fn repl(mut session: Session) -> anyhow::Result<()> {
    println!("{REPL_HELP}");
    let mut scene = session.start()?;
    show_scene(&scene);
    let stdin = std::io::stdin();
    let mut out = std::io::stdout();
    loop {
        write!(out, "[{:?}] {} > ", session.state.phase, session.legal_moves().join("|"))?;
        out.flush()?;
        let mut line = String::new();
        if stdin.lock().read_line(&mut line)? == 0 {
            break;
        }
        let line = line.trim();
        let result: anyhow::Result<()> = match line {
            "" => Ok(()),
            ":quit" | ":q" => break,
            ":help" => {
                println!("{REPL_HELP}");
                Ok(())
            }
            ":scene" => {
                show_scene(&scene);
                Ok(())
            }
            ":memory" => serde_json::to_string_pretty(&session.memory()).map(|m| println!("{m}")).map_err(Into::into),
            ":transcript" => {
                for r in &session.transcript {
                    println!("{:?}: {}", r.speaker, r.surface);
                }
                Ok(())
            }
            ":accept" => session.accept().map_err(Into::into),
            ":next" => session.start().map(|s| {
                scene = s;
                show_scene(&scene);
            }).map_err(Into::into),
            text => session.say(text, None).map(|reply| {
                if let Some(u) = reply {
                    println!("learner: {}", u.surface);
                }
            }).map_err(Into::into),
        };
        if let Err(e) = result {
            println!("error: {e}");
        }
    }
    Ok(())
}

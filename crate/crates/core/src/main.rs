use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use urllc_admission::agent::Agent;
use urllc_admission::harness::export::{load_events, save_events, save_scatter, save_summary, summarize, RunSummary};
use urllc_admission::harness::regret::cumulative_regret;
use urllc_admission::harness::{evaluate, train_agent, Config, EventCounts, EventRow, Policy, Simulator};
use urllc_admission::seed::{derive_seed, tag};

#[derive(Parser)]
#[command(name = "urllc-admit", version, about = "URLLC admission control: simulator, agent and evaluation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config with [cell], [traffic], [agent] and [run] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of retained admission events.
    #[arg(long)]
    events: Option<usize>,
    /// Use the 99.9% target with 30000-TTI rollouts.
    #[arg(long)]
    paper_scale: bool,
    /// Roll out every arm to log regret and QoS fulfillment.
    #[arg(long)]
    oracle: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train the agent and write its checkpoint and event log.
    Train(Common),
    /// Compare a trained agent with both baselines on fresh events.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Agent checkpoint written by `train`.
        #[arg(long, default_value = "out/agent.ckpt")]
        agent: PathBuf,
    },
    /// Run one baseline policy on fresh events.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = ["random", "no-admission"])]
        policy: String,
    },
    /// Cumulative regret per policy from an event log.
    Regret {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Utilization versus QoS fulfillment points from an event log.
    ExportScatter {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn load_config(c: &Common) -> Result<Config> {
    let mut config = match &c.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if c.paper_scale {
        config = config.paper_scale();
    }
    if let Some(seed) = c.seed {
        config.run.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn write_outputs(out: &Path, mode: &str, config: &Config, counts: EventCounts, rows: &[EventRow]) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    save_events(&out.join("events.csv"), rows)?;
    save_scatter(&out.join("scatter.csv"), rows)?;
    let summary = RunSummary {
        mode: mode.to_string(),
        config_hash: format!("{:016x}", config.hash()),
        seed: config.run.seed,
        generated_events: counts.generated,
        filtered_events: counts.filtered + counts.excluded,
        retained_events: counts.retained,
        policies: summarize(rows),
    };
    save_summary(&out.join("summary.json"), &summary)?;
    for (policy, s) in &summary.policies {
        eprintln!(
            "{policy:>12}: events {} reliability {:.3} reward {:.3} dropping {:.3} utilization {:.3}{}",
            s.events,
            s.mean_cell_reliability,
            s.mean_reward,
            s.mean_dropping_rate,
            s.mean_utilization,
            s.mean_qos_fulfillment.map(|q| format!(" qos {q:.3}")).unwrap_or_default()
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(c) => {
            let config = load_config(&c)?;
            let events = c.events.unwrap_or(config.run.train_events);
            let sim = Simulator::new(config.clone())?;
            let out = train_agent(&sim, events, c.oracle)?;
            write_outputs(&c.out, "train", &config, out.counts, &out.rows)?;
            let path = c.out.join("agent.ckpt");
            let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            out.agent.save(BufWriter::new(file))?;
        }
        Command::Evaluate { common: c, agent } => {
            let config = load_config(&c)?;
            let events = c.events.unwrap_or(config.run.eval_events);
            let sim = Simulator::new(config.clone())?;
            let file = File::open(&agent).with_context(|| format!("opening {}", agent.display()))?;
            let scaler = config.feature_scaler(&sim.mcs);
            let agent = Agent::load(
                std::io::BufReader::new(file),
                config.agent.clone(),
                scaler,
                derive_seed(config.run.seed, &[tag::AGENT]),
            )?;
            let mut policies = vec![Policy::Proposed, Policy::NoAdmission, Policy::Random];
            if c.oracle {
                policies.push(Policy::Oracle);
            }
            let out = evaluate(&sim, Some(&agent), &policies, events, c.oracle)?;
            write_outputs(&c.out, "evaluate", &config, out.counts, &out.rows)?;
        }
        Command::Baseline { common: c, policy } => {
            let config = load_config(&c)?;
            let events = c.events.unwrap_or(config.run.eval_events);
            let sim = Simulator::new(config.clone())?;
            let policy: Policy = policy.parse().map_err(anyhow::Error::msg)?;
            let out = evaluate(&sim, None, &[policy], events, c.oracle)?;
            write_outputs(&c.out, "baseline", &config, out.counts, &out.rows)?;
        }
        Command::Regret { input, out } => {
            let rows = load_events(&input)?;
            if rows.iter().any(|r| r.regret.is_none()) {
                bail!("{} has no regret column; rerun with --oracle", input.display());
            }
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let path = out.join("regret.csv");
            let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
            w.write_record(["policy", "step", "cumulative_regret"])?;
            let summary = summarize(&rows);
            for policy in summary.keys() {
                let per: Vec<f64> =
                    rows.iter().filter(|r| r.policy.as_str() == policy).filter_map(|r| r.regret).collect();
                for (i, c) in cumulative_regret(&per).iter().enumerate() {
                    w.write_record([policy.clone(), (i + 1).to_string(), c.to_string()])?;
                }
            }
            w.flush()?;
            for (policy, s) in &summary {
                println!(
                    "{policy:>12}: cumulative {:.3} final-third slope {:.4} linear R^2 {:.4}",
                    s.cumulative_regret.unwrap_or(0.0),
                    s.final_third_regret_slope.unwrap_or(f64::NAN),
                    s.regret_linear_r2.unwrap_or(f64::NAN)
                );
            }
        }
        Command::ExportScatter { input, out } => {
            let rows = load_events(&input)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            save_scatter(&out.join("scatter.csv"), &rows)?;
        }
    }
    Ok(())
}

//! Command-line front end: file formats, run configuration, and the
//! `synth`, `fit`, `icl`, `eval`, and `report` commands.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod provider;
pub mod report;
pub mod table;

use narrative_core::trainer::BandwidthRule;

use cli::{Cli, Command};
use config::RunConfig;
use error::Result;

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

/// Loads the configuration, applies flag overrides, and validates the result.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed.map(Some));
    match &cli.command {
        Command::Synth(a) => {
            set(&mut cfg.synth.docs, a.docs);
            set(&mut cfg.synth.questions, a.questions);
            set(&mut cfg.synth.answers, a.answers);
            set(&mut cfg.synth.narratives, a.narratives);
            set(&mut cfg.synth.alpha, a.alpha);
            set(&mut cfg.synth.beta, a.beta);
            set(&mut cfg.embedding.dim, a.embed_dim);
            set(&mut cfg.embedding.noise, a.embed_noise);
        }
        Command::Fit(a) => {
            set(&mut cfg.train.steps, a.steps);
            set(&mut cfg.train.narratives, a.narratives);
            set(&mut cfg.train.topics, a.topics);
            set(&mut cfg.train.lr_g, a.lr_g);
            set(&mut cfg.train.lr_omega, a.lr_omega);
            set(
                &mut cfg.train.kernel,
                a.bandwidth_scale
                    .map(|scale| BandwidthRule::Median { scale }),
            );
        }
        Command::Icl(a) => {
            set(&mut cfg.few_shot.context_size, a.context_size.map(Some));
            set(&mut cfg.few_shot.select, a.select);
            set(&mut cfg.icl.layers, a.layers);
            set(&mut cfg.icl.outer_steps, a.steps);
        }
        Command::Eval(a) => set(&mut cfg.eval.bins, a.bins),
        Command::Report(_) => {}
    }
    cfg.finalize()
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Synth(a) => commands::synth(&cfg, a),
        Command::Fit(a) => commands::fit(&cfg, a),
        Command::Icl(a) => commands::icl(&cfg, a),
        Command::Eval(a) => commands::eval(&cfg, a),
        Command::Report(a) => report::report(a),
    }
}

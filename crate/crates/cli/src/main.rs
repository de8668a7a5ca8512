use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use reactmine::models::ModelKind;
use reactmine_cli::commands::{self, *};
use reactmine_cli::server;

#[derive(Debug, Parser)]
#[command(name = "reactmine", version, about = "Predict the mix of reactions a post will receive")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize a raw corpus into JSON lines.
    Ingest(IngestArgs),
    /// Threshold curve and reaction statistics of a corpus.
    Stats(StatsArgs),
    /// Expand the lexicon and train the fallback emotion classifier.
    TrainFallback(TrainFallbackArgs),
    /// Train the convolutional network.
    TrainCnn(TrainNetworkArgs),
    /// Train the recurrent network.
    TrainRnn(TrainNetworkArgs),
    /// Fit the regression that combines network outputs and emotions.
    FitEnsemble(FitEnsembleArgs),
    /// Compare networks and regression variants on the test split.
    Evaluate(EvaluateArgs),
    /// Predict reactions for one post.
    Predict(PredictArgs),
    /// Run the HTTP inference service.
    Serve(ServeArgs),
}

#[derive(Debug, clap::Args)]
struct ServeArgs {
    #[arg(long, env = "REACTMINE_ARTIFACTS", default_value = "artifacts")]
    artifacts: PathBuf,
    #[arg(long, env = "REACTMINE_ADDR", default_value = "127.0.0.1:8080")]
    addr: String,
    /// Allowed browser origin; `*` allows any.
    #[arg(long, env = "REACTMINE_CORS_ORIGIN")]
    cors_origin: Option<String>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Ingest(a) => commands::ingest(&a),
        Command::Stats(a) => commands::stats(&a),
        Command::TrainFallback(a) => commands::train_fallback(&a),
        Command::TrainCnn(a) => commands::train_network(ModelKind::Cnn, &a),
        Command::TrainRnn(a) => commands::train_network(ModelKind::Lstm, &a),
        Command::FitEnsemble(a) => commands::fit_ensemble_cmd(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Serve(a) => {
            let state = server::AppState::load(&a.artifacts);
            let app = server::router(state, server::cors_layer(a.cors_origin.as_deref())?);
            tokio::runtime::Runtime::new()?.block_on(server::serve(app, &a.addr))
        }
    }
}

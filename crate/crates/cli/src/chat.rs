use std::io::{BufRead, Write};
use std::sync::Arc;

use anyhow::Result;
use openpda_core::dialog::{Engine, ReplyKind};
use openpda_core::dispatch::{encode, DryRunDispatcher};
use openpda_core::embedding::EmbeddingStore;
use openpda_core::fixtures;
use openpda_core::registry::{Registry, SharedRegistry};

use crate::ChatArgs;

/// Reads one utterance per line from stdin until EOF.
pub async fn run(args: ChatArgs) -> Result<()> {
    let config = args.engine.engine_config()?;
    args.engine.check_paths()?;
    let registry = match &args.engine.apps_dir {
        Some(dir) => Registry::open(dir)?,
        None => fixtures::registry(),
    };
    let store = match &args.engine.embeddings {
        Some(path) => EmbeddingStore::load(path)?,
        None => fixtures::toy_embeddings(),
    };
    let mut engine = Engine::new(SharedRegistry::new(registry), Arc::new(store), config)?;
    if args.dry_run {
        engine = engine.with_dispatcher(Arc::new(DryRunDispatcher));
    }

    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout();
    write!(stdout, "> ")?;
    stdout.flush()?;
    for line in stdin.lock().lines() {
        let line = line?;
        if !line.trim().is_empty() {
            match engine.handle_message("terminal", &line).await {
                Ok(reply) => {
                    println!("{}", reply.text);
                    if let (ReplyKind::Result, Some(command), false) = (reply.kind, &reply.dispatched, args.dry_run) {
                        println!("  sent: {}", String::from_utf8_lossy(&encode(command)));
                    }
                }
                Err(e) => println!("({e})"),
            }
        }
        write!(stdout, "> ")?;
        stdout.flush()?;
    }
    println!();
    Ok(())
}

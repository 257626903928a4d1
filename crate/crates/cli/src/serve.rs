use std::io::Write;
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use anyhow::{Context, Result};
use credmatch_core::wire::{run_server_session, ServerSessionConfig, SessionError};
use credmatch_core::ServerPolicy;
use log::{info, warn};
use rand::rngs::OsRng;

/// Accepts connections forever, one thread per session.
pub fn serve(listen: &str, policy: ServerPolicy, config: ServerSessionConfig) -> Result<()> {
    let listener = TcpListener::bind(listen).with_context(|| format!("binding {listen}"))?;
    let addr = listener.local_addr()?;
    println!("listening on {addr}");
    std::io::stdout().flush()?;

    let shared = Arc::new((policy, config));
    for conn in listener.incoming() {
        let stream = match conn {
            Ok(s) => s,
            Err(e) => {
                warn!("accept failed: {e}");
                continue;
            }
        };
        let shared = Arc::clone(&shared);
        thread::spawn(move || handle(stream, &shared.0, &shared.1));
    }
    Ok(())
}

// Logs peer, s and outcome only. The server learns nothing else.
fn handle(mut stream: TcpStream, policy: &ServerPolicy, config: &ServerSessionConfig) {
    let peer = stream
        .peer_addr()
        .map(|a| a.to_string())
        .unwrap_or_else(|_| "unknown".into());
    match run_server_session(&mut stream, policy, config, &mut OsRng) {
        Ok(outcome) => info!("peer={peer} s={} outcome=ok", outcome.s),
        Err(SessionError::PeerAborted(reason)) => {
            info!("peer={peer} s=- outcome=peer-abort({reason})")
        }
        Err(e) => {
            let reason = e.abort_reason().map(|r| r.to_string()).unwrap_or_default();
            info!("peer={peer} s=- outcome=abort({reason})")
        }
    }
}

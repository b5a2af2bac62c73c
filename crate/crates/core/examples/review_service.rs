//! Start the review service on a corrupted household graph.
//!
//!     cargo run --release --example review_service -- [state-dir] [port]
//!
//! Open http://127.0.0.1:8080/ for the review page (built from review-ui/),
//! or talk to the JSON API directly, e.g. `curl localhost:8080/inferences`.

use std::net::SocketAddr;
use std::path::PathBuf;

use kgrecon::feedback::SuspectConfig;
use kgrecon::service::{serve, AppState, ServiceConfig, Store};
use kgrecon::synth::{household, HouseholdConfig};

#[tokio::main]
async fn main() -> kgrecon::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "review-state".into()));
    let port: u16 = args.next().and_then(|p| p.parse().ok()).unwrap_or(8080);

    if !Store::exists(&dir) {
        println!("preparing {} (corrupt, train, explain)...", dir.display());
        let cfg = ServiceConfig {
            suspects: SuspectConfig { max_explanations: 10, ..Default::default() },
            ..Default::default()
        };
        let clean = household(&HouseholdConfig::default());
        let target = dir.clone();
        tokio::task::spawn_blocking(move || Store::prepare(&target, &clean, 0.3, 0, cfg))
            .await
            .expect("prepare task")?;
    }
    let ui = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../review-ui");
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    println!("listening on http://{addr}/");
    serve(AppState::open(&dir)?, addr, ui.is_dir().then_some(ui)).await
}

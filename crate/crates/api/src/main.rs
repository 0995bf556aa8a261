use std::net::SocketAddr;

use axum::http::HeaderValue;
use clap::Parser;
use soc_api::{router_with, ApiConfig};

#[derive(Parser)]
#[command(name = "soc-planner-api", version, about = "Serve the survey planner over HTTP")]
struct Args {
    #[arg(long, default_value = "127.0.0.1")]
    bind: std::net::IpAddr,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Origin allowed to call the service from a browser; repeatable.
    #[arg(long)]
    cors_origin: Vec<HeaderValue>,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let app = router_with(&ApiConfig {
        cors_origins: args.cors_origin,
    });
    let addr = SocketAddr::new(args.bind, args.port);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

use std::net::SocketAddr;

#[tokio::main]
async fn main() {
    let port = match segpower_service::port_from_env() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {addr}: {e}");
            std::process::exit(1);
        }
    };
    eprintln!("segpower-serve listening on http://{addr}");
    if let Err(e) = axum::serve(listener, segpower_service::app()).await {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

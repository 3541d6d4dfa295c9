use std::io::Write;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;

use dynflow_cli::{cmd_identify, cmd_rank, cmd_simulate, Cli, CliError, CliResult, Command, ServeArgs};
use dynflow_service::{router, serve, SessionStore};

fn cmd_serve(args: &ServeArgs) -> CliResult {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_target(false)
        .init();
    if let Some(dir) = &args.static_dir {
        if !dir.is_dir() {
            return Err(CliError::Io(format!(
                "--static: {} is not a directory",
                dir.display()
            )));
        }
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Io(format!("cannot bind {addr}: {e}")))?;
        tracing::info!("listening on http://{}", listener.local_addr()?);
        let app = router(Arc::new(SessionStore::default()), args.static_dir.clone());
        serve(listener, app).await?;
        Ok(())
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match &cli.command {
        Command::Rank(a) => cmd_rank(a, &mut out),
        Command::Simulate(a) => cmd_simulate(a, &mut out),
        Command::Identify(a) => cmd_identify(a, &mut out),
        Command::Serve(a) => cmd_serve(a),
    };
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

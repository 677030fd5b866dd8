use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use subfock::cli::{exit, parse_descriptor, parse_method, run, Command, OptionsDescriptor, Overrides};

#[derive(Parser)]
#[command(name = "subfock", version, about = "Truncated subproduct-system Fock space computations")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the system and the representation.
    Validate(Common),
    /// Purity, defect, Poisson kernel and curvature.
    Analyze(Common),
    /// Factor an invariant subspace and compare wandering subspaces.
    Factor(Common),
}

#[derive(Args)]
struct Common {
    /// Problem descriptor (JSON).
    file: PathBuf,
    /// Curvature methods: direct, closed, poisson, complement.
    #[arg(long, value_delimiter = ',')]
    method: Vec<String>,
    /// Use the induced shift S ⊗ I_r; r is inferred from the subspace.
    #[arg(long)]
    shift: bool,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "kmax")]
    k_max: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::INPUT } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let (command, common) = match cli.command {
        Cmd::Validate(c) => (Command::Validate, c),
        Cmd::Analyze(c) => (Command::Analyze, c),
        Cmd::Factor(c) => (Command::Factor, c),
    };
    let mut methods = Vec::new();
    for name in &common.method {
        match parse_method(name) {
            Some(m) => methods.push(m),
            None => {
                eprintln!("subfock: unknown curvature method `{name}`");
                return ExitCode::from(exit::INPUT as u8);
            }
        }
    }
    let text = match std::fs::read_to_string(&common.file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("subfock: cannot read {}: {e}", common.file.display());
            return ExitCode::from(exit::INPUT as u8);
        }
    };
    let desc = match parse_descriptor(&text) {
        Ok(d) => d,
        Err(msg) => {
            eprintln!("subfock: {msg}");
            return ExitCode::from(exit::INPUT as u8);
        }
    };
    let overrides = Overrides {
        methods,
        shift: common.shift,
        options: OptionsDescriptor { tol: common.tol, k_max: common.k_max, window: common.window, eps: common.eps },
    };
    let outcome = run(command, &desc, &overrides);
    if let Some(err) = &outcome.report.error {
        eprintln!("subfock: {}: {}", err.kind, err.message);
    }
    match serde_json::to_string_pretty(&outcome.report) {
        // A closed pipe (e.g. `| head`) is not an error worth a panic.
        Ok(json) => {
            let _ = writeln!(std::io::stdout(), "{json}");
        }
        Err(e) => {
            eprintln!("subfock: cannot serialize report: {e}");
            return ExitCode::from(exit::NUMERICAL as u8);
        }
    }
    ExitCode::from(outcome.exit_code as u8)
}

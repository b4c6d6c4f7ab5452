use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mmigm::cli;
use mmigm::config::RunConfig;

#[derive(Parser)]
#[command(name = "mmigm", version, about = "Isogeometric Poisson solver with harmonic-map moving meshes")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Compare the final lattice max-norm errors of two runs.
    CompareLinf { a: PathBuf, b: PathBuf },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = match args.command {
        Command::Run { config, out, quiet } => RunConfig::load(&config).and_then(|cfg| {
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let (summary, art) = cli::run(&cfg, &dir, quiet)?;
            if !quiet {
                match summary.initial {
                    Some(i) => println!(
                        "dofs {}  L2 {:.4e} -> {:.4e}  Linf {:.4e} -> {:.4e}  ({} iterations)",
                        summary.dofs, i.l2, summary.final_.l2, i.linf, summary.final_.linf, summary.iterations
                    ),
                    None => println!("dofs {}  L2 {:.4e}  H1 {:.4e}", summary.dofs, summary.final_.l2, summary.final_.h1),
                }
                println!("wrote {}", art.summary.display());
            }
            Ok(())
        }),
        Command::CompareLinf { a, b } => cli::compare_linf(&a, &b).map(|(ea, eb, ratio)| {
            println!("Linf a = {ea:.6e}");
            println!("Linf b = {eb:.6e}");
            println!("ratio a/b = {ratio:.6e}");
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

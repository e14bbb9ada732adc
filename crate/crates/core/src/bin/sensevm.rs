use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sensevm::asm::{assemble, assemble_program, disassemble};
use sensevm::image::{load_program, Program, MAGIC};
use sensevm::runner::run;
use sensevm::sim::{load_scenario, Scenario};
use sensevm::RunConfig;

#[derive(Parser)]
#[command(name = "sensevm", version, about = "Run, assemble and disassemble SenseVM bytecode")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a program image (or assembly source) against a scenario.
    Run {
        program: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 1024)]
        heap_bytes: usize,
        #[arg(long, default_value_t = 1024)]
        stack_bytes: usize,
        #[arg(long, default_value_t = 4)]
        contexts: usize,
        #[arg(long, default_value_t = 100)]
        channels: usize,
        #[arg(long, default_value_t = 16)]
        drivers: usize,
        /// Bridge message queue capacity.
        #[arg(long, default_value_t = 16)]
        queue_cap: usize,
        #[arg(long)]
        max_steps: Option<u64>,
        /// Virtual milliseconds charged per instruction.
        #[arg(long, default_value_t = 0)]
        instruction_cost: u64,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Print run statistics.
        #[arg(long)]
        stats: bool,
    },
    /// Assemble source into an image.
    Asm {
        source: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print an image as assembly.
    Disasm { image: PathBuf },
}

struct Fail(String);

impl<E: std::fmt::Display> From<E> for Fail {
    fn from(e: E) -> Self {
        Fail(e.to_string())
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Fail> {
    fs::read(path).map_err(|e| Fail(format!("{}: {e}", path.display())))
}

fn load_any(path: &Path) -> Result<Program, Fail> {
    let bytes = read(path)?;
    if bytes.starts_with(MAGIC) {
        return Ok(load_program(&bytes)?);
    }
    let text = String::from_utf8(bytes).map_err(|_| Fail(format!("{}: neither an image nor text", path.display())))?;
    Ok(assemble_program(&text)?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match exec(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(msg)) => {
            eprintln!("sensevm: {msg}");
            ExitCode::from(1)
        }
    }
}

fn exec(cli: Cli) -> Result<u8, Fail> {
    match cli.cmd {
        Cmd::Asm { source, output } => {
            let text = String::from_utf8(read(&source)?)?;
            fs::write(&output, assemble(&text)?).map_err(|e| Fail(format!("{}: {e}", output.display())))?;
            Ok(0)
        }
        Cmd::Disasm { image } => {
            print!("{}", disassemble(&read(&image)?)?);
            Ok(0)
        }
        Cmd::Run {
            program,
            scenario,
            heap_bytes,
            stack_bytes,
            contexts,
            channels,
            drivers,
            queue_cap,
            max_steps,
            instruction_cost,
            trace,
            stats,
        } => {
            let program = load_any(&program)?;
            let scenario = match scenario {
                Some(p) => {
                    load_scenario(&String::from_utf8(read(&p)?)?).map_err(|e| Fail(format!("{}: {e}", p.display())))?
                }
                None => Scenario::default(),
            };
            let config = RunConfig {
                heap_bytes,
                stack_bytes_per_context: stack_bytes,
                contexts,
                channels,
                drivers,
                bridge_queue_capacity: queue_cap,
                max_steps,
                instruction_cost_ms: instruction_cost,
                ..RunConfig::default()
            };
            config.validate()?;
            let report = run(&program, &scenario, &config);
            if let Some(path) = trace {
                fs::write(&path, report.trace.render()).map_err(|e| Fail(format!("{}: {e}", path.display())))?;
            }
            let code = report.exit_code();
            if stats || code != 0 {
                print!("{}", report.summary());
            } else {
                println!("{}", report.config.report(report.stats.channels_in_use));
                println!("outcome: {}", report.outcome);
            }
            Ok(code as u8)
        }
    }
}

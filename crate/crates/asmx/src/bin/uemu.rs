//! `uemu [--max-steps N] <elf> [args...]`: run a static ARMv5 or RV64IM
//! binary. The process exits with the guest's status or dies by its signal.

use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

#[derive(Parser)]
#[command(name = "uemu", version, about = "User-mode emulator for static ARMv5 and RV64IM binaries")]
struct Args {
    /// Raise SIGXCPU after this many guest instructions.
    #[arg(long)]
    max_steps: Option<u64>,
    elf: PathBuf,
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    args: Vec<String>,
}

fn main() {
    let a = Args::parse();
    let bytes = match std::fs::read(&a.elf) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("uemu: {}: {e}", a.elf.display());
            std::process::exit(1);
        }
    };
    let mut argv = vec![a.elf.display().to_string()];
    argv.extend(a.args);
    let opts = asmx_uemu::Options { max_steps: a.max_steps, argv };
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let exit = match asmx_uemu::run_elf(&bytes, &opts, &mut out, &mut err) {
        Ok(e) => e,
        Err(e) => {
            let _ = writeln!(err, "uemu: {}: {e}", a.elf.display());
            std::process::exit(1);
        }
    };
    let _ = out.flush();
    drop(out);
    drop(err);
    asmx_uemu::terminate_like(&exit);
}

//! A small user-mode emulator for static ARMv5 (A32) and RV64IM Linux ELF
//! binaries.
//!
//! It runs the freestanding test programs the harness links: integer code,
//! a handful of Linux syscalls (`exit`, `write`, `brk`, `getpid`, `kill`)
//! and nothing else. Faults are reported the way qemu-user reports them, so
//! log-based failure classification works the same with either emulator.

mod arm;
pub mod mem;
mod riscv;

use std::fmt;
use std::io::Write;

use goblin::elf::{header, program_header, Elf};

use mem::{Fault, Memory};

pub const STACK_TOP: u64 = 0xbf00_0000;
pub const STACK_SIZE: u64 = 8 << 20;
/// Process id the guest sees for itself.
pub const GUEST_PID: u64 = 4242;

pub const SIGILL: i32 = 4;
pub const SIGTRAP: i32 = 5;
pub const SIGBUS: i32 = 7;
pub const SIGFPE: i32 = 8;
pub const SIGSEGV: i32 = 11;
pub const SIGXCPU: i32 = 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Exit {
    Code(i32),
    Signal { signo: i32, reason: String },
}

#[derive(Debug)]
pub enum LoadError {
    Parse(String),
    UnsupportedMachine(u16),
    WrongClass { machine: u16 },
    NotExecutable,
    BadSegment(u64),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Parse(e) => write!(f, "not a valid ELF file: {e}"),
            LoadError::UnsupportedMachine(m) => write!(f, "unsupported ELF machine {m} (only ARM and RISC-V)"),
            LoadError::WrongClass { machine } => write!(f, "unexpected ELF class for machine {machine}"),
            LoadError::NotExecutable => f.write_str("ELF file is not a static executable"),
            LoadError::BadSegment(v) => write!(f, "loadable segment at 0x{v:x} lies outside the file"),
        }
    }
}

impl std::error::Error for LoadError {}

#[derive(Debug, Clone, Default)]
pub struct Options {
    /// Stop with SIGXCPU after this many instructions.
    pub max_steps: Option<u64>,
    /// Guest argv, including argv[0].
    pub argv: Vec<String>,
}

/// Short name (`SIGSEGV`) for a Linux signal number.
pub fn signal_abbrev(signo: i32) -> Option<&'static str> {
    SIGNALS.get(signo as usize).and_then(|s| s.map(|(a, _)| a))
}

/// strsignal-style description (`Segmentation fault`).
pub fn signal_description(signo: i32) -> &'static str {
    SIGNALS.get(signo as usize).and_then(|s| s.map(|(_, d)| d)).unwrap_or("Unknown signal")
}

type SigEntry = Option<(&'static str, &'static str)>;

const SIGNALS: [SigEntry; 32] = [
    None,
    Some(("SIGHUP", "Hangup")),
    Some(("SIGINT", "Interrupt")),
    Some(("SIGQUIT", "Quit")),
    Some(("SIGILL", "Illegal instruction")),
    Some(("SIGTRAP", "Trace/breakpoint trap")),
    Some(("SIGABRT", "Aborted")),
    Some(("SIGBUS", "Bus error")),
    Some(("SIGFPE", "Floating point exception")),
    Some(("SIGKILL", "Killed")),
    Some(("SIGUSR1", "User defined signal 1")),
    Some(("SIGSEGV", "Segmentation fault")),
    Some(("SIGUSR2", "User defined signal 2")),
    Some(("SIGPIPE", "Broken pipe")),
    Some(("SIGALRM", "Alarm clock")),
    Some(("SIGTERM", "Terminated")),
    Some(("SIGSTKFLT", "Stack fault")),
    Some(("SIGCHLD", "Child exited")),
    Some(("SIGCONT", "Continued")),
    Some(("SIGSTOP", "Stopped (signal)")),
    Some(("SIGTSTP", "Stopped")),
    Some(("SIGTTIN", "Stopped (tty input)")),
    Some(("SIGTTOU", "Stopped (tty output)")),
    Some(("SIGURG", "Urgent I/O condition")),
    Some(("SIGXCPU", "CPU time limit exceeded")),
    Some(("SIGXFSZ", "File size limit exceeded")),
    Some(("SIGVTALRM", "Virtual timer expired")),
    Some(("SIGPROF", "Profiling timer expired")),
    Some(("SIGWINCH", "Window changed")),
    Some(("SIGIO", "I/O possible")),
    Some(("SIGPWR", "Power failure")),
    Some(("SIGSYS", "Bad system call")),
];

pub(crate) fn segv(fault: Fault, pc: u64) -> Exit {
    let kind = if fault.write { "write" } else { "read" };
    Exit::Signal { signo: SIGSEGV, reason: format!("Invalid address 0x{:08x} ({kind}, pc=0x{pc:08x})", fault.addr) }
}

pub(crate) fn sigill(insn: u32, pc: u64) -> Exit {
    Exit::Signal { signo: SIGILL, reason: format!("Undefined instruction 0x{insn:08x} at pc=0x{pc:08x}") }
}

/// Architecture-neutral syscall ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Sys {
    Exit,
    Read,
    Write,
    GetPid,
    GetTid,
    Kill,
    TgKill,
    Brk,
    Unknown(u64),
}

const ENOSYS: i64 = -38;
const EBADF: i64 = -9;
const EFAULT: i64 = -14;
const ESRCH: i64 = -3;

pub(crate) struct Kernel<'a> {
    brk: u64,
    brk_base: u64,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Kernel<'_> {
    pub(crate) fn syscall(&mut self, sys: Sys, a: [u64; 4], mem: &mut Memory) -> Result<i64, Exit> {
        match sys {
            Sys::Exit => Err(Exit::Code((a[0] & 0xff) as i32)),
            Sys::Read => Ok(0),
            Sys::Write => {
                let len = a[2].min(1 << 20) as usize;
                let mut buf = vec![0u8; len];
                if mem.read(a[1], &mut buf).is_err() {
                    return Ok(EFAULT);
                }
                let sink: &mut dyn Write = match a[0] {
                    1 => &mut *self.out,
                    2 => &mut *self.err,
                    _ => return Ok(EBADF),
                };
                let _ = sink.write_all(&buf);
                Ok(len as i64)
            }
            Sys::GetPid | Sys::GetTid => Ok(GUEST_PID as i64),
            Sys::Kill | Sys::TgKill => {
                let (pid, sig) = if sys == Sys::Kill { (a[0], a[1]) } else { (a[0], a[2]) };
                let pid = pid as i32 as i64;
                if pid != GUEST_PID as i64 && pid != 0 && pid != -1 {
                    return Ok(ESRCH);
                }
                let sig = sig as i32;
                if sig == 0 {
                    return Ok(0);
                }
                Err(Exit::Signal { signo: sig, reason: format!("guest raised {}", signal_abbrev(sig).unwrap_or("signal")) })
            }
            Sys::Brk => {
                let want = a[0];
                if want > self.brk && want < self.brk_base + (256 << 20) {
                    mem.map(self.brk, want - self.brk, mem::R | mem::W);
                    self.brk = want;
                }
                Ok(self.brk as i64)
            }
            Sys::Unknown(_) => Ok(ENOSYS),
        }
    }
}

enum Machine {
    Arm,
    Riscv64,
}

struct Loaded {
    machine: Machine,
    entry: u64,
    sp: u64,
    brk: u64,
}

fn load(bytes: &[u8], argv: &[String], mem: &mut Memory) -> Result<Loaded, LoadError> {
    let elf = Elf::parse(bytes).map_err(|e| LoadError::Parse(e.to_string()))?;
    let machine = match elf.header.e_machine {
        header::EM_ARM if !elf.is_64 => Machine::Arm,
        header::EM_RISCV if elf.is_64 => Machine::Riscv64,
        m @ (header::EM_ARM | header::EM_RISCV) => return Err(LoadError::WrongClass { machine: m }),
        m => return Err(LoadError::UnsupportedMachine(m)),
    };
    if elf.header.e_type != header::ET_EXEC {
        return Err(LoadError::NotExecutable);
    }
    let mut end = 0u64;
    for ph in elf.program_headers.iter().filter(|p| p.p_type == program_header::PT_LOAD) {
        let mut perms = 0;
        if ph.p_flags & program_header::PF_R != 0 {
            perms |= mem::R;
        }
        if ph.p_flags & program_header::PF_W != 0 {
            perms |= mem::W;
        }
        if ph.p_flags & program_header::PF_X != 0 {
            perms |= mem::X | mem::R;
        }
        mem.map(ph.p_vaddr, ph.p_memsz, perms);
        let file = bytes
            .get(ph.p_offset as usize..(ph.p_offset + ph.p_filesz) as usize)
            .ok_or(LoadError::BadSegment(ph.p_vaddr))?;
        mem.poke(ph.p_vaddr, file).map_err(|_| LoadError::BadSegment(ph.p_vaddr))?;
        end = end.max(ph.p_vaddr + ph.p_memsz);
    }
    let word: u64 = if elf.is_64 { 8 } else { 4 };
    mem.map(STACK_TOP - STACK_SIZE, STACK_SIZE, mem::R | mem::W);

    // argv strings at the top, then argc/argv/envp/auxv below
    let mut cursor = STACK_TOP;
    let mut ptrs = Vec::new();
    for a in argv {
        cursor -= a.len() as u64 + 1;
        let mut s = a.as_bytes().to_vec();
        s.push(0);
        mem.poke(cursor, &s).expect("stack mapped");
        ptrs.push(cursor);
    }
    let slots = 1 + ptrs.len() + 1 + 1 + 4;
    let mut sp = (cursor - slots as u64 * word) & !15;
    let base = sp;
    let mut put = |v: u64, mem: &mut Memory| {
        let bytes = if word == 8 { v.to_le_bytes().to_vec() } else { (v as u32).to_le_bytes().to_vec() };
        mem.poke(sp, &bytes).expect("stack mapped");
        sp += word;
    };
    put(ptrs.len() as u64, mem);
    for p in &ptrs {
        put(*p, mem);
    }
    put(0, mem); // argv terminator
    put(0, mem); // empty envp
    put(6, mem); // AT_PAGESZ
    put(mem::PAGE, mem);
    put(0, mem); // AT_NULL
    put(0, mem);
    let brk = (end + mem::PAGE - 1) & !(mem::PAGE - 1);
    Ok(Loaded { machine, entry: elf.entry, sp: base, brk })
}

/// Loads and runs an ELF image, sending guest stdout/stderr to the given writers.
pub fn run_elf(bytes: &[u8], opts: &Options, out: &mut dyn Write, err: &mut dyn Write) -> Result<Exit, LoadError> {
    let mut mem = Memory::new();
    let argv = if opts.argv.is_empty() { vec![String::from("a.out")] } else { opts.argv.clone() };
    let loaded = load(bytes, &argv, &mut mem)?;
    let mut kernel = Kernel { brk: loaded.brk, brk_base: loaded.brk, out, err };
    let exit = match loaded.machine {
        Machine::Arm => arm::run(&mut mem, &mut kernel, loaded.entry as u32, loaded.sp as u32, opts.max_steps),
        Machine::Riscv64 => riscv::run(&mut mem, &mut kernel, loaded.entry, loaded.sp, opts.max_steps),
    };
    let _ = kernel.out.flush();
    let _ = kernel.err.flush();
    Ok(exit)
}

/// Ends the host process the way the guest ended: same exit code, or the
/// same signal after a qemu-style report on stderr.
pub fn terminate_like(exit: &Exit) -> ! {
    let _ = std::io::stdout().flush();
    match exit {
        Exit::Code(c) => std::process::exit(*c),
        Exit::Signal { signo, reason } => {
            let mut e = std::io::stderr();
            let _ = writeln!(e, "uemu: {reason}");
            let _ = writeln!(e, "uemu: uncaught target signal {signo} ({})", signal_description(*signo));
            let _ = e.flush();
            // SAFETY: plain libc calls on our own process; no memory is shared.
            unsafe {
                let no_core = libc::rlimit { rlim_cur: 0, rlim_max: 0 };
                libc::setrlimit(libc::RLIMIT_CORE, &no_core);
                libc::signal(*signo, libc::SIG_DFL);
                let mut set: libc::sigset_t = std::mem::zeroed();
                libc::sigemptyset(&mut set);
                libc::sigaddset(&mut set, *signo);
                libc::sigprocmask(libc::SIG_UNBLOCK, &set, std::ptr::null_mut());
                libc::raise(*signo);
            }
            std::process::exit(128 + signo)
        }
    }
}

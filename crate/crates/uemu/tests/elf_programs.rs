//! Builds small freestanding programs with clang + ld.lld and runs them.
//! Skips (with a note) when no cross-capable clang is installed.

use std::path::{Path, PathBuf};
use std::process::Command;

use asmx_uemu::{run_elf, Exit, Options, SIGFPE, SIGILL, SIGSEGV, SIGXCPU};

#[derive(Clone, Copy)]
enum Target {
    Arm,
    Riscv,
}

fn runtime() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../asmx/runtime")
}

fn build(target: Target, c_src: &str) -> Option<Vec<u8>> {
    let dir = std::env::temp_dir().join(format!("uemu-test-{}-{:x}", std::process::id(), fnv(c_src)));
    std::fs::create_dir_all(&dir).ok()?;
    let src = dir.join("prog.c");
    std::fs::write(&src, c_src).ok()?;
    let out = dir.join(match target {
        Target::Arm => "prog.arm",
        Target::Riscv => "prog.rv",
    });
    let rt = runtime();
    let mut cmd = Command::new("clang");
    match target {
        Target::Arm => cmd.args(["--target=armv5te-linux-gnueabi"]).arg(rt.join("armv5/start.s")),
        Target::Riscv => cmd
            .args(["--target=riscv64-linux-gnu", "-march=rv64im", "-mabi=lp64", "-mno-relax"])
            .arg(rt.join("riscv64/start.s")),
    };
    cmd.args(["-O0", "-ffreestanding", "-fno-builtin", "-nostdlib", "-static", "-fuse-ld=lld"])
        .arg(format!("-I{}", rt.display()))
        .arg(rt.join("rt.c"))
        .arg(&src)
        .arg("-o")
        .arg(&out);
    match cmd.output() {
        Ok(o) if o.status.success() => std::fs::read(&out).ok(),
        Ok(o) => panic!("clang failed: {}", String::from_utf8_lossy(&o.stderr)),
        Err(_) => {
            eprintln!("clang not available; skipping");
            None
        }
    }
}

fn fnv(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

fn run(target: Target, src: &str) -> Option<(Exit, String)> {
    let elf = build(target, src)?;
    let mut out = Vec::new();
    let mut err = Vec::new();
    let opts = Options { max_steps: Some(50_000_000), argv: vec![] };
    let exit = run_elf(&elf, &opts, &mut out, &mut err).expect("loads");
    Some((exit, String::from_utf8(out).unwrap()))
}

const ARITH: &str = r#"
#include "asmx_test.h"
static long fib(int n) { return n < 2 ? n : fib(n - 1) + fib(n - 2); }
static unsigned isqrt(unsigned x) { unsigned r = 0; while ((r + 1) * (r + 1) <= x) r++; return r; }
int main(void) {
    int failed = 0;
    volatile int a = -17, b = 5;
    volatile unsigned ua = 4000000000u, ub = 7;
    int arr[8] = {5, 3, 9, 1, 7, 2, 8, 6};
    for (int i = 0; i < 8; i++)
        for (int j = i + 1; j < 8; j++)
            if (arr[j] < arr[i]) { int t = arr[i]; arr[i] = arr[j]; arr[j] = t; }
    CHECK(failed, fib(15) == 610);
    CHECK(failed, a / b == -3 && a % b == -2);
    CHECK(failed, ua / ub == 571428571u && ua % ub == 3u);
    CHECK(failed, isqrt(1000000) == 1000);
    CHECK(failed, arr[0] == 1 && arr[7] == 9);
    CHECK(failed, (a >> 1) == -9 && ((unsigned)a >> 28) == 15u);
    CHECK(failed, (long long)a * 3000000000ll == -51000000000ll);
    CHECK(failed, (short)(a * 4096) == -4096);
    signed char c = (signed char)200;
    CHECK(failed, c == -56);
    asmx_put_long(a * 1000);
    asmx_puts("\n");
    return failed;
}
"#;

#[test]
fn arithmetic_program_passes_on_both_isas() {
    for t in [Target::Arm, Target::Riscv] {
        let Some((exit, out)) = run(t, ARITH) else { return };
        assert_eq!(exit, Exit::Code(0), "stdout: {out}");
        assert_eq!(out, "-17000\n");
    }
}

#[test]
fn failed_checks_become_the_exit_code() {
    let src = "#include \"asmx_test.h\"\nint main(void){int f=0; CHECK(f, 1==2); CHECK(f, 2==3); return f;}";
    for t in [Target::Arm, Target::Riscv] {
        let Some((exit, out)) = run(t, src) else { return };
        assert_eq!(exit, Exit::Code(2));
        assert!(out.contains("check failed: 1==2"));
    }
}

#[test]
fn wild_store_is_a_segfault() {
    let src = "int main(void){ *(volatile int *)0x10 = 1; return 0; }";
    for t in [Target::Arm, Target::Riscv] {
        let Some((exit, _)) = run(t, src) else { return };
        match exit {
            Exit::Signal { signo, reason } => {
                assert_eq!(signo, SIGSEGV);
                assert!(reason.starts_with("Invalid address 0x00000010 (write"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn division_by_zero_raises_sigfpe_on_arm() {
    let src = "#include \"asmx_test.h\"\nint main(void){ volatile int z = 0; return 10 / z; }";
    let Some((exit, _)) = run(Target::Arm, src) else { return };
    assert!(matches!(exit, Exit::Signal { signo: SIGFPE, .. }), "{exit:?}");
    // RISC-V defines x/0 = -1 without trapping
    let Some((exit, _)) = run(Target::Riscv, src) else { return };
    assert_eq!(exit, Exit::Code(255));
}

#[test]
fn infinite_loop_exhausts_budget() {
    let src = "int main(void){ for(;;){} }";
    for t in [Target::Arm, Target::Riscv] {
        let Some(elf) = build(t, src) else { return };
        let opts = Options { max_steps: Some(10_000), argv: vec![] };
        let exit = run_elf(&elf, &opts, &mut Vec::new(), &mut Vec::new()).unwrap();
        assert!(matches!(exit, Exit::Signal { signo: SIGXCPU, .. }));
    }
}

#[test]
fn jumping_into_data_is_rejected() {
    // a non-executable target faults on fetch
    let src = "static int data[4]; int main(void){ ((void(*)(void))data)(); return 0; }";
    for t in [Target::Arm, Target::Riscv] {
        let Some((exit, _)) = run(t, src) else { return };
        assert!(matches!(exit, Exit::Signal { signo: SIGSEGV, .. }), "{exit:?}");
    }
}

#[test]
fn undefined_instruction_is_sigill() {
    let src = "int main(void){ __asm__ volatile(\".word 0xe7f000f0\"); return 0; }";
    let Some((exit, _)) = run(Target::Arm, src) else { return };
    assert!(matches!(exit, Exit::Signal { signo: SIGILL, .. }), "{exit:?}");
}

#[test]
fn rejects_foreign_machines() {
    let err = run_elf(b"not an elf", &Options::default(), &mut Vec::new(), &mut Vec::new());
    assert!(err.is_err());
}

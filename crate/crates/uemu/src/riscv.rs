//! RV64IM interpreter. No compressed instructions, no floating point.

use crate::mem::{Fault, Memory};
use crate::{segv, sigill, Exit, Kernel, Sys, SIGBUS, SIGTRAP, SIGXCPU};

enum Trap {
    Fault(Fault),
    Undefined,
    Exit(Exit),
}

impl From<Fault> for Trap {
    fn from(f: Fault) -> Self {
        Trap::Fault(f)
    }
}

struct Cpu {
    x: [u64; 32],
    pc: u64,
}

fn sext(v: u32, bits: u32) -> i64 {
    let shift = 64 - bits;
    ((v as u64) << shift) as i64 >> shift
}

fn imm_i(i: u32) -> i64 {
    (i as i32 >> 20) as i64
}

fn imm_s(i: u32) -> i64 {
    sext(((i >> 25) << 5) | ((i >> 7) & 0x1f), 12)
}

fn imm_b(i: u32) -> i64 {
    let v = ((i >> 31) & 1) << 12 | ((i >> 7) & 1) << 11 | ((i >> 25) & 0x3f) << 5 | ((i >> 8) & 0xf) << 1;
    sext(v, 13)
}

fn imm_j(i: u32) -> i64 {
    let v = ((i >> 31) & 1) << 20 | ((i >> 12) & 0xff) << 12 | ((i >> 20) & 1) << 11 | ((i >> 21) & 0x3ff) << 1;
    sext(v, 21)
}

fn div(a: i64, b: i64) -> i64 {
    if b == 0 {
        -1
    } else {
        a.wrapping_div(b)
    }
}

fn rem(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        a.wrapping_rem(b)
    }
}

fn divu(a: u64, b: u64) -> u64 {
    a.checked_div(b).unwrap_or(u64::MAX)
}

fn remu(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        a % b
    }
}

pub(crate) fn run(mem: &mut Memory, k: &mut Kernel<'_>, entry: u64, sp: u64, max_steps: Option<u64>) -> Exit {
    let mut cpu = Cpu { x: [0; 32], pc: entry };
    cpu.x[2] = sp;
    let mut steps = 0u64;
    loop {
        if let Some(max) = max_steps {
            if steps >= max {
                return Exit::Signal { signo: SIGXCPU, reason: format!("instruction budget of {max} exhausted") };
            }
        }
        steps += 1;
        let pc = cpu.pc;
        if pc & 3 != 0 {
            return Exit::Signal { signo: SIGBUS, reason: format!("Misaligned instruction fetch at pc=0x{pc:08x}") };
        }
        let insn = match mem.fetch32(pc) {
            Ok(i) => i,
            Err(f) => return segv(f, pc),
        };
        cpu.pc = pc.wrapping_add(4);
        let r = cpu.exec(insn, pc, mem, k);
        cpu.x[0] = 0;
        match r {
            Ok(()) => {}
            Err(Trap::Fault(f)) => return segv(f, pc),
            Err(Trap::Undefined) => return sigill(insn, pc),
            Err(Trap::Exit(e)) => return e,
        }
    }
}

impl Cpu {
    fn exec(&mut self, i: u32, pc: u64, mem: &mut Memory, k: &mut Kernel<'_>) -> Result<(), Trap> {
        if i & 3 != 3 {
            // compressed encodings are outside RV64IM as built here
            return Err(Trap::Undefined);
        }
        let rd = ((i >> 7) & 0x1f) as usize;
        let rs1 = self.x[((i >> 15) & 0x1f) as usize];
        let rs2 = self.x[((i >> 20) & 0x1f) as usize];
        let f3 = (i >> 12) & 7;
        let f7 = i >> 25;
        match i & 0x7f {
            0x37 => self.x[rd] = sext(i & 0xffff_f000, 32) as u64,
            0x17 => self.x[rd] = pc.wrapping_add(sext(i & 0xffff_f000, 32) as u64),
            0x6f => {
                self.x[rd] = pc.wrapping_add(4);
                self.pc = pc.wrapping_add(imm_j(i) as u64);
            }
            0x67 if f3 == 0 => {
                let target = rs1.wrapping_add(imm_i(i) as u64) & !1;
                self.x[rd] = pc.wrapping_add(4);
                self.pc = target;
            }
            0x63 => {
                let taken = match f3 {
                    0 => rs1 == rs2,
                    1 => rs1 != rs2,
                    4 => (rs1 as i64) < rs2 as i64,
                    5 => rs1 as i64 >= rs2 as i64,
                    6 => rs1 < rs2,
                    7 => rs1 >= rs2,
                    _ => return Err(Trap::Undefined),
                };
                if taken {
                    self.pc = pc.wrapping_add(imm_b(i) as u64);
                }
            }
            0x03 => {
                let a = rs1.wrapping_add(imm_i(i) as u64);
                self.x[rd] = match f3 {
                    0 => mem.read_u8(a)? as i8 as i64 as u64,
                    1 => mem.read_u16(a)? as i16 as i64 as u64,
                    2 => mem.read_u32(a)? as i32 as i64 as u64,
                    3 => mem.read_u64(a)?,
                    4 => mem.read_u8(a)? as u64,
                    5 => mem.read_u16(a)? as u64,
                    6 => mem.read_u32(a)? as u64,
                    _ => return Err(Trap::Undefined),
                };
            }
            0x23 => {
                let a = rs1.wrapping_add(imm_s(i) as u64);
                match f3 {
                    0 => mem.write_u8(a, rs2 as u8)?,
                    1 => mem.write_u16(a, rs2 as u16)?,
                    2 => mem.write_u32(a, rs2 as u32)?,
                    3 => mem.write_u64(a, rs2)?,
                    _ => return Err(Trap::Undefined),
                }
            }
            0x13 => {
                let imm = imm_i(i) as u64;
                let sh = (i >> 20) & 0x3f;
                self.x[rd] = match f3 {
                    0 => rs1.wrapping_add(imm),
                    2 => ((rs1 as i64) < imm as i64) as u64,
                    3 => (rs1 < imm) as u64,
                    4 => rs1 ^ imm,
                    6 => rs1 | imm,
                    7 => rs1 & imm,
                    1 if i >> 26 == 0 => rs1 << sh,
                    5 if i >> 26 == 0 => rs1 >> sh,
                    5 if i >> 26 == 0x10 => ((rs1 as i64) >> sh) as u64,
                    _ => return Err(Trap::Undefined),
                };
            }
            0x1b => {
                let sh = (i >> 20) & 0x1f;
                let w = rs1 as u32;
                let v = match (f3, f7) {
                    (0, _) => w.wrapping_add(imm_i(i) as u32),
                    (1, 0) => w << sh,
                    (5, 0) => w >> sh,
                    (5, 0x20) => ((w as i32) >> sh) as u32,
                    _ => return Err(Trap::Undefined),
                };
                self.x[rd] = v as i32 as i64 as u64;
            }
            0x33 => {
                self.x[rd] = match (f7, f3) {
                    (0, 0) => rs1.wrapping_add(rs2),
                    (0x20, 0) => rs1.wrapping_sub(rs2),
                    (0, 1) => rs1 << (rs2 & 63),
                    (0, 2) => ((rs1 as i64) < rs2 as i64) as u64,
                    (0, 3) => (rs1 < rs2) as u64,
                    (0, 4) => rs1 ^ rs2,
                    (0, 5) => rs1 >> (rs2 & 63),
                    (0x20, 5) => ((rs1 as i64) >> (rs2 & 63)) as u64,
                    (0, 6) => rs1 | rs2,
                    (0, 7) => rs1 & rs2,
                    (1, 0) => rs1.wrapping_mul(rs2),
                    (1, 1) => ((rs1 as i64 as i128 * rs2 as i64 as i128) >> 64) as u64,
                    (1, 2) => ((rs1 as i64 as i128 * rs2 as u128 as i128) >> 64) as u64,
                    (1, 3) => ((rs1 as u128 * rs2 as u128) >> 64) as u64,
                    (1, 4) => div(rs1 as i64, rs2 as i64) as u64,
                    (1, 5) => divu(rs1, rs2),
                    (1, 6) => rem(rs1 as i64, rs2 as i64) as u64,
                    (1, 7) => remu(rs1, rs2),
                    _ => return Err(Trap::Undefined),
                };
            }
            0x3b => {
                let (a, b) = (rs1 as u32, rs2 as u32);
                let v: u32 = match (f7, f3) {
                    (0, 0) => a.wrapping_add(b),
                    (0x20, 0) => a.wrapping_sub(b),
                    (0, 1) => a << (b & 31),
                    (0, 5) => a >> (b & 31),
                    (0x20, 5) => ((a as i32) >> (b & 31)) as u32,
                    (1, 0) => a.wrapping_mul(b),
                    (1, 4) => {
                        if b == 0 {
                            u32::MAX
                        } else {
                            (a as i32).wrapping_div(b as i32) as u32
                        }
                    }
                    (1, 5) => a.checked_div(b).unwrap_or(u32::MAX),
                    (1, 6) => {
                        if b == 0 {
                            a
                        } else {
                            (a as i32).wrapping_rem(b as i32) as u32
                        }
                    }
                    (1, 7) => {
                        if b == 0 {
                            a
                        } else {
                            a % b
                        }
                    }
                    _ => return Err(Trap::Undefined),
                };
                self.x[rd] = v as i32 as i64 as u64;
            }
            0x0f => {} // fence
            0x73 => match i {
                0x0000_0073 => self.ecall(mem, k)?,
                0x0010_0073 => {
                    return Err(Trap::Exit(Exit::Signal { signo: SIGTRAP, reason: format!("ebreak at pc=0x{pc:08x}") }))
                }
                _ => return Err(Trap::Undefined),
            },
            _ => return Err(Trap::Undefined),
        }
        Ok(())
    }

    fn ecall(&mut self, mem: &mut Memory, k: &mut Kernel<'_>) -> Result<(), Trap> {
        let sys = match self.x[17] {
            93 | 94 => Sys::Exit,
            63 => Sys::Read,
            64 => Sys::Write,
            172 => Sys::GetPid,
            178 => Sys::GetTid,
            129 => Sys::Kill,
            131 => Sys::TgKill,
            214 => Sys::Brk,
            n => Sys::Unknown(n),
        };
        let args = [self.x[10], self.x[11], self.x[12], self.x[13]];
        match k.syscall(sys, args, mem) {
            Ok(r) => {
                self.x[10] = r as u64;
                Ok(())
            }
            Err(e) => Err(Trap::Exit(e)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn immediates() {
        // addi x1, x0, -1
        assert_eq!(imm_i(0xfff0_0093), -1);
        // beq x0, x0, -4
        assert_eq!(imm_b(0xfe00_0ee3), -4);
        // jal x0, 8
        assert_eq!(imm_j(0x0080_006f), 8);
        // sd x1, -8(x2)
        assert_eq!(imm_s(0xfe11_3c23), -8);
    }

    #[test]
    fn division_by_zero_follows_the_isa() {
        assert_eq!(div(7, 0), -1);
        assert_eq!(rem(7, 0), 7);
        assert_eq!(divu(7, 0), u64::MAX);
        assert_eq!(div(i64::MIN, -1), i64::MIN);
        assert_eq!(rem(i64::MIN, -1), 0);
    }
}

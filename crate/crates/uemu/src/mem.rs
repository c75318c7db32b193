//! Sparse paged guest memory with per-page permissions.

use std::collections::HashMap;

pub const PAGE: u64 = 4096;

pub const R: u8 = 1;
pub const W: u8 = 2;
pub const X: u8 = 4;

/// A failed access; `addr` is the first faulting byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fault {
    pub addr: u64,
    pub write: bool,
}

struct Page {
    perms: u8,
    data: Box<[u8; PAGE as usize]>,
}

#[derive(Default)]
pub struct Memory {
    pages: HashMap<u64, Page>,
}

impl Memory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Maps zeroed pages covering `[addr, addr + len)`, widening permissions of pages already mapped.
    pub fn map(&mut self, addr: u64, len: u64, perms: u8) {
        if len == 0 {
            return;
        }
        let first = addr / PAGE;
        let last = (addr + len - 1) / PAGE;
        for p in first..=last {
            self.pages
                .entry(p)
                .and_modify(|pg| pg.perms |= perms)
                .or_insert_with(|| Page { perms, data: Box::new([0; PAGE as usize]) });
        }
    }

    pub fn is_mapped(&self, addr: u64) -> bool {
        self.pages.contains_key(&(addr / PAGE))
    }

    /// Copies bytes in, ignoring permissions (loader use).
    pub fn poke(&mut self, addr: u64, bytes: &[u8]) -> Result<(), Fault> {
        for (i, b) in bytes.iter().enumerate() {
            let a = addr + i as u64;
            let page = self.pages.get_mut(&(a / PAGE)).ok_or(Fault { addr: a, write: true })?;
            page.data[(a % PAGE) as usize] = *b;
        }
        Ok(())
    }

    fn byte(&self, a: u64, need: u8) -> Result<u8, Fault> {
        match self.pages.get(&(a / PAGE)) {
            Some(p) if p.perms & need != 0 => Ok(p.data[(a % PAGE) as usize]),
            _ => Err(Fault { addr: a, write: false }),
        }
    }

    pub fn read(&self, addr: u64, buf: &mut [u8]) -> Result<(), Fault> {
        let off = (addr % PAGE) as usize;
        if off + buf.len() <= PAGE as usize {
            match self.pages.get(&(addr / PAGE)) {
                Some(p) if p.perms & R != 0 => {
                    buf.copy_from_slice(&p.data[off..off + buf.len()]);
                    return Ok(());
                }
                _ => return Err(Fault { addr, write: false }),
            }
        }
        for (i, b) in buf.iter_mut().enumerate() {
            *b = self.byte(addr + i as u64, R)?;
        }
        Ok(())
    }

    pub fn write(&mut self, addr: u64, bytes: &[u8]) -> Result<(), Fault> {
        for i in 0..bytes.len() {
            let a = addr + i as u64;
            match self.pages.get(&(a / PAGE)) {
                Some(p) if p.perms & W != 0 => {}
                _ => return Err(Fault { addr: a, write: true }),
            }
        }
        for (i, b) in bytes.iter().enumerate() {
            let a = addr + i as u64;
            self.pages.get_mut(&(a / PAGE)).expect("checked").data[(a % PAGE) as usize] = *b;
        }
        Ok(())
    }

    pub fn fetch32(&self, addr: u64) -> Result<u32, Fault> {
        let off = (addr % PAGE) as usize;
        match self.pages.get(&(addr / PAGE)) {
            Some(p) if p.perms & X != 0 && off + 4 <= PAGE as usize => {
                Ok(u32::from_le_bytes(p.data[off..off + 4].try_into().expect("4 bytes")))
            }
            _ => {
                let mut b = [0u8; 4];
                for (i, x) in b.iter_mut().enumerate() {
                    *x = self.byte(addr + i as u64, X)?;
                }
                Ok(u32::from_le_bytes(b))
            }
        }
    }

    pub fn read_u8(&self, a: u64) -> Result<u8, Fault> {
        let mut b = [0u8; 1];
        self.read(a, &mut b)?;
        Ok(b[0])
    }

    pub fn read_u16(&self, a: u64) -> Result<u16, Fault> {
        let mut b = [0u8; 2];
        self.read(a, &mut b)?;
        Ok(u16::from_le_bytes(b))
    }

    pub fn read_u32(&self, a: u64) -> Result<u32, Fault> {
        let mut b = [0u8; 4];
        self.read(a, &mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn read_u64(&self, a: u64) -> Result<u64, Fault> {
        let mut b = [0u8; 8];
        self.read(a, &mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn write_u8(&mut self, a: u64, v: u8) -> Result<(), Fault> {
        self.write(a, &[v])
    }

    pub fn write_u16(&mut self, a: u64, v: u16) -> Result<(), Fault> {
        self.write(a, &v.to_le_bytes())
    }

    pub fn write_u32(&mut self, a: u64, v: u32) -> Result<(), Fault> {
        self.write(a, &v.to_le_bytes())
    }

    pub fn write_u64(&mut self, a: u64, v: u64) -> Result<(), Fault> {
        self.write(a, &v.to_le_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permissions_are_enforced() {
        let mut m = Memory::new();
        m.map(0x1000, 16, R);
        assert_eq!(m.read_u32(0x1000), Ok(0));
        assert_eq!(m.write_u32(0x1000, 1), Err(Fault { addr: 0x1000, write: true }));
        assert_eq!(m.fetch32(0x1000), Err(Fault { addr: 0x1000, write: false }));
        assert_eq!(m.read_u8(0), Err(Fault { addr: 0, write: false }));
    }

    #[test]
    fn cross_page_access() {
        let mut m = Memory::new();
        m.map(0x1000, 2 * PAGE, R | W);
        m.write_u64(0x1ffc, 0x1122_3344_5566_7788).unwrap();
        assert_eq!(m.read_u64(0x1ffc).unwrap(), 0x1122_3344_5566_7788);
        assert_eq!(m.read_u32(0x2000).unwrap(), 0x1122_3344);
        assert!(m.write_u32(0x2ffe, 0).is_err());
    }
}

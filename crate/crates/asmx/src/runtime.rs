//! The freestanding runtime linked into every emulated test binary: process
//! entry stubs per ISA, a tiny libc subset and the test-driver header.

use std::io;
use std::path::Path;

/// Directory name, relative to a work dir, that `{runtime}` expands to.
pub const DIR: &str = "rt";

const FILES: [(&str, &str); 5] = [
    ("asmx_test.h", include_str!("../runtime/asmx_test.h")),
    ("rt.c", include_str!("../runtime/rt.c")),
    ("armv5/start.s", include_str!("../runtime/armv5/start.s")),
    ("armv8/start.s", include_str!("../runtime/armv8/start.s")),
    ("riscv64/start.s", include_str!("../runtime/riscv64/start.s")),
];

/// Writes the runtime tree under `work/rt`.
pub fn materialize(work: &Path) -> io::Result<()> {
    let root = work.join(DIR);
    for (rel, body) in FILES {
        let p = root.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(p, body)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    #[test]
    fn writes_every_file() {
        let d = tempfile::tempdir().unwrap();
        super::materialize(d.path()).unwrap();
        assert!(d.path().join("rt/armv5/start.s").is_file());
        assert!(d.path().join("rt/asmx_test.h").is_file());
    }
}

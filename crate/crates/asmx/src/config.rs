//! Toolchain configuration: per-ISA command templates, optimization level,
//! timeouts and the remote prompt preamble, loaded from a TOML file.
//!
//! Templates are argument vectors. Placeholders `{input}`, `{output}`,
//! `{opt}`, `{runtime}`, `{test}` and `{root}` are substituted per call;
//! `{root}` comes from the ISA's `root` key, overridden by the environment
//! variable `ASMX_ROOT_<ISA>` (for example `ASMX_ROOT_ARMV5`).

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use asmx_core::IsaName;
use serde::{Deserialize, Serialize};

pub const DEFAULT_OPT_LEVEL: &str = "-O0";
pub const DEFAULT_TIMEOUT_COMPILE: f64 = 30.0;
pub const DEFAULT_TIMEOUT_RUN: f64 = 10.0;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), reason: reason.into() }
}

/// The toolchain steps a command template can serve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Compile,
    Assemble,
    Link,
    Emulate,
}

impl Stage {
    pub fn key(self) -> &'static str {
        match self {
            Stage::Compile => "compile",
            Stage::Assemble => "assemble",
            Stage::Link => "link",
            Stage::Emulate => "emulate",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsaTools {
    pub compile: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assemble: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emulate: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<String>,
}

impl IsaTools {
    pub fn template(&self, stage: Stage) -> Option<&[String]> {
        match stage {
            Stage::Compile => Some(&self.compile),
            Stage::Assemble => self.assemble.as_deref(),
            Stage::Link => self.link.as_deref(),
            Stage::Emulate => self.emulate.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prompt {
    pub version: String,
    /// `{target}` is replaced by the target ISA name.
    pub preamble: String,
}

impl Default for Prompt {
    fn default() -> Self {
        Prompt {
            version: "asmx-prompt-1".into(),
            preamble: "Translate the following x86-64 assembly (AT&T syntax, gcc -O0) into equivalent {target} \
                       assembly. Reply with assembly only."
                .into(),
        }
    }
}

impl Prompt {
    pub fn compose(&self, target: IsaName, source: &str) -> String {
        format!("{}\n{}", self.preamble.replace("{target}", target.as_str()), source)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolchainConfig {
    #[serde(default = "default_opt")]
    pub opt_level: String,
    /// Seconds.
    #[serde(default = "default_timeout_compile")]
    pub timeout_compile: f64,
    /// Seconds.
    #[serde(default = "default_timeout_run")]
    pub timeout_run: f64,
    #[serde(default)]
    pub prompt: Prompt,
    pub isa: BTreeMap<IsaName, IsaTools>,
}

fn default_opt() -> String {
    DEFAULT_OPT_LEVEL.into()
}

fn default_timeout_compile() -> f64 {
    DEFAULT_TIMEOUT_COMPILE
}

fn default_timeout_run() -> f64 {
    DEFAULT_TIMEOUT_RUN
}

pub fn load_config(path: &Path) -> Result<ToolchainConfig, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), source: e })?;
    ToolchainConfig::parse(&text)
}

/// Substitutions for one template expansion.
#[derive(Debug, Default, Clone)]
pub struct Vars<'a> {
    pub input: Option<&'a str>,
    pub output: Option<&'a str>,
    pub runtime: Option<&'a str>,
    pub test: Option<&'a str>,
}

impl ToolchainConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        if text.trim().is_empty() {
            return Err(ConfigError::Parse("empty file".into()));
        }
        let cfg: ToolchainConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.timeout_compile > 0.0 && self.timeout_compile.is_finite()) {
            return Err(invalid("timeout_compile", "must be a positive number of seconds"));
        }
        if !(self.timeout_run > 0.0 && self.timeout_run.is_finite()) {
            return Err(invalid("timeout_run", "must be a positive number of seconds"));
        }
        if self.opt_level.trim().is_empty() {
            return Err(invalid("opt_level", "must not be empty"));
        }
        if self.isa.is_empty() {
            return Err(invalid("isa", "no ISA entries"));
        }
        for (name, tools) in &self.isa {
            for stage in [Stage::Compile, Stage::Assemble, Stage::Link, Stage::Emulate] {
                if tools.template(stage).is_some_and(|t| t.is_empty()) {
                    return Err(invalid(format!("isa.{name}.{}", stage.key()), "empty command"));
                }
            }
        }
        Ok(())
    }

    /// Checks that `isa` has every template `stages` needs, naming the first gap.
    pub fn require(&self, isa: IsaName, stages: &[Stage]) -> Result<&IsaTools, ConfigError> {
        let tools = self.isa.get(&isa).ok_or_else(|| invalid(format!("isa.{isa}"), "missing ISA entry"))?;
        for s in stages {
            if tools.template(*s).is_none() {
                return Err(invalid(format!("isa.{isa}.{}", s.key()), "missing command template"));
            }
        }
        Ok(tools)
    }

    pub fn compile_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_compile)
    }

    pub fn run_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_run)
    }

    /// Expands a stage template into an argument vector.
    pub fn command(&self, isa: IsaName, stage: Stage, vars: &Vars<'_>) -> Result<Vec<String>, ConfigError> {
        let tools = self.require(isa, &[stage])?;
        let template = tools.template(stage).expect("required above");
        let root = std::env::var(format!("ASMX_ROOT_{}", isa.as_str())).ok().or_else(|| tools.root.clone());
        let mut out = Vec::with_capacity(template.len());
        for arg in template {
            let mut s = arg.clone();
            let subs: [(&str, Option<&str>); 6] = [
                ("{input}", vars.input),
                ("{output}", vars.output),
                ("{runtime}", vars.runtime),
                ("{test}", vars.test),
                ("{root}", root.as_deref()),
                ("{opt}", Some(self.opt_level.as_str())),
            ];
            for (key, val) in subs {
                if s.contains(key) {
                    let v = val.ok_or_else(|| {
                        invalid(format!("isa.{isa}.{}", stage.key()), format!("placeholder {key} has no value here"))
                    })?;
                    s = s.replace(key, v);
                }
            }
            out.push(s);
        }
        Ok(out)
    }

    /// Clang + ld.lld cross toolchain with the bundled emulator, gcc for x86.
    pub fn clang_default(emulator: &str) -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let freestanding = ["-ffreestanding", "-fno-builtin", "-fno-asynchronous-unwind-tables"];
        let mut isa = BTreeMap::new();
        isa.insert(
            IsaName::X86_64,
            IsaTools {
                compile: s(&[
                    "gcc",
                    "{opt}",
                    "-S",
                    "-fno-asynchronous-unwind-tables",
                    "-fcf-protection=none",
                    "-fno-pie",
                    "-I{runtime}",
                    "{input}",
                    "-o",
                    "{output}",
                ]),
                ..IsaTools::default()
            },
        );
        let cross = |triple: &[&str], start: &str| {
            let mut compile = s(&["clang"]);
            compile.extend(s(triple));
            compile.extend(s(&["{opt}", "-S"]));
            compile.extend(s(&freestanding));
            compile.extend(s(&["-I{runtime}", "{input}", "-o", "{output}"]));
            let mut assemble = s(&["clang"]);
            assemble.extend(s(triple));
            assemble.extend(s(&["-c", "{input}", "-o", "{output}"]));
            let mut link = s(&["clang"]);
            link.extend(s(triple));
            link.extend(s(&["{opt}"]));
            link.extend(s(&freestanding));
            link.extend(s(&["-nostdlib", "-static", "-fuse-ld=lld", "-I{runtime}"]));
            link.push(format!("{{runtime}}/{start}"));
            link.extend(s(&["{runtime}/rt.c", "{test}", "{input}", "-o", "{output}"]));
            IsaTools {
                compile,
                assemble: Some(assemble),
                link: Some(link),
                emulate: Some(vec![emulator.to_string(), "{input}".into()]),
                root: None,
            }
        };
        isa.insert(IsaName::Armv5, cross(&["--target=armv5te-linux-gnueabi"], "armv5/start.s"));
        isa.insert(
            IsaName::Riscv64,
            cross(&["--target=riscv64-linux-gnu", "-march=rv64im", "-mabi=lp64", "-mno-relax"], "riscv64/start.s"),
        );
        let mut a64 = cross(&["--target=aarch64-linux-gnu"], "armv8/start.s");
        // the bundled emulator has no AArch64 front end
        a64.emulate = Some(s(&["qemu-aarch64", "{input}"]));
        isa.insert(IsaName::Armv8, a64);
        ToolchainConfig {
            opt_level: DEFAULT_OPT_LEVEL.into(),
            timeout_compile: DEFAULT_TIMEOUT_COMPILE,
            timeout_run: DEFAULT_TIMEOUT_RUN,
            prompt: Prompt::default(),
            isa,
        }
    }

    /// Stable hash of the serialized config, for run records.
    pub fn fingerprint(&self) -> String {
        format!("{:016x}", crate::fnv1a(self.to_toml().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[isa.X86_64]
compile = ["gcc", "{opt}", "-S", "{input}", "-o", "{output}"]

[isa.ARMV5]
compile = ["arm-linux-gnueabi-gcc", "{opt}", "-S", "{input}", "-o", "{output}"]
assemble = ["arm-linux-gnueabi-as", "{input}", "-o", "{output}"]
link = ["arm-linux-gnueabi-gcc", "-static", "{test}", "{input}", "-o", "{output}"]
emulate = ["qemu-arm", "{input}"]
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ToolchainConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.opt_level, "-O0");
        assert_eq!(cfg.timeout_compile, 30.0);
        assert_eq!(cfg.timeout_run, 10.0);
        assert_eq!(cfg.isa.len(), 2);
        assert!(cfg.require(IsaName::Armv5, &[Stage::Compile, Stage::Emulate]).is_ok());
    }

    #[test]
    fn zero_run_timeout_is_rejected_by_name() {
        let text = format!("timeout_run = 0\n{MINIMAL}");
        match ToolchainConfig::parse(&text) {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "timeout_run"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file_is_a_parse_failure() {
        assert!(matches!(ToolchainConfig::parse(""), Err(ConfigError::Parse(_))));
        assert!(matches!(ToolchainConfig::parse("isa = 3"), Err(ConfigError::Parse(_))));
        assert!(matches!(ToolchainConfig::parse("opt_level = \"-O0\""), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn missing_stage_names_the_field() {
        let cfg = ToolchainConfig::parse(MINIMAL).unwrap();
        match cfg.require(IsaName::X86_64, &[Stage::Emulate]) {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "isa.X86_64.emulate"),
            other => panic!("{other:?}"),
        }
        match cfg.require(IsaName::Riscv64, &[Stage::Compile]) {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "isa.RISCV64"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trips() {
        for cfg in [ToolchainConfig::parse(MINIMAL).unwrap(), ToolchainConfig::clang_default("/opt/uemu")] {
            assert_eq!(ToolchainConfig::parse(&cfg.to_toml()).unwrap(), cfg);
        }
    }

    #[test]
    fn placeholders_expand() {
        let cfg = ToolchainConfig::parse(MINIMAL).unwrap();
        let v = Vars { input: Some("a.c"), output: Some("a.s"), ..Vars::default() };
        let cmd = cfg.command(IsaName::X86_64, Stage::Compile, &v).unwrap();
        assert_eq!(cmd, ["gcc", "-O0", "-S", "a.c", "-o", "a.s"]);
        // {test} has no value for a compile call
        assert!(cfg.command(IsaName::Armv5, Stage::Link, &v).is_err());
    }

    #[test]
    fn root_comes_from_environment() {
        let text = "[isa.RISCV64]\ncompile = [\"{root}/bin/cc\", \"{input}\"]\nroot = \"/usr\"\n";
        let cfg = ToolchainConfig::parse(text).unwrap();
        let v = Vars { input: Some("x.c"), ..Vars::default() };
        assert_eq!(cfg.command(IsaName::Riscv64, Stage::Compile, &v).unwrap()[0], "/usr/bin/cc");
        std::env::set_var("ASMX_ROOT_RISCV64", "/opt/rv");
        assert_eq!(cfg.command(IsaName::Riscv64, Stage::Compile, &v).unwrap()[0], "/opt/rv/bin/cc");
        std::env::remove_var("ASMX_ROOT_RISCV64");
    }
}

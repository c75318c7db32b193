//! Labeled failure fixtures: each candidate is assembled, linked against its
//! test, emulated, and the failure classified with the shipped rules.

mod common;

use asmx::core::asmtext::parse_assembly;
use asmx::core::classify::{classify_error, ClassifierRules};
use asmx::core::eval::ErrorClass;
use asmx::core::IsaName;
use asmx::functional::run_candidate;

struct Fixture {
    name: String,
    isa: IsaName,
    class: ErrorClass,
    outcome: String,
}

fn load() -> Vec<Fixture> {
    let dir = common::fixtures().join("classifier");
    let mut out = Vec::new();
    for e in std::fs::read_dir(&dir).unwrap() {
        let p = e.unwrap().path();
        let expect = std::fs::read_to_string(p.join("expect")).unwrap();
        let first = expect.lines().next().unwrap();
        let fields: Vec<&str> = first.split_whitespace().collect();
        let [isa, class, outcome] = fields[..] else { panic!("{}: bad expect line {first:?}", p.display()) };
        let class = ErrorClass::ALL.into_iter().find(|c| c.to_string() == class).unwrap();
        out.push(Fixture {
            name: p.file_name().unwrap().to_string_lossy().into(),
            isa: isa.parse().unwrap(),
            class,
            outcome: outcome.into(),
        });
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    out
}

#[test]
fn four_fixtures_per_class() {
    let fx = load();
    for class in ErrorClass::ALL {
        assert!(fx.iter().filter(|f| f.class == class).count() >= 4, "{class}");
    }
}

#[test]
fn fixtures_classify_as_labeled() {
    assert_eq!(ClassifierRules::builtin().version, "1");
    let cfg = common::config();
    let dir = common::fixtures().join("classifier");
    let mut wrong = Vec::new();
    for f in load() {
        let text = std::fs::read_to_string(dir.join(&f.name).join("candidate.s")).unwrap();
        let run = run_candidate(&text, f.isa, &dir.join(&f.name).join("test.c"), &cfg).unwrap();
        assert_eq!(run.outcome.label(), f.outcome, "{}:\n{}", f.name, run.logs);
        let unit = parse_assembly(&text, &f.isa.isa(), &f.name);
        let got = classify_error(&run.outcome, &run.logs, &unit);
        if got != f.class {
            wrong.push(format!("{}: want {}, got {} ({})\n{}", f.name, f.class, got, run.outcome.label(), run.logs));
        }
    }
    assert!(wrong.is_empty(), "{}", wrong.join("\n"));
}

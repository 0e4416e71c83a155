//! Generated CUDA for the corpus, compared byte for byte with `corpus/golden`.
//! Set `IRGL_BLESS=1` to rewrite the golden files.

use std::fs;
use std::path::{Path, PathBuf};

use irgl::codegen::{compile, EmitOptions};
use irgl::frontend::parse_source;
use irgl::plan::PlanConfig;
use irgl::sema::SemaOptions;

const PROGRAMS: &[&str] = &["bfs", "sssp", "boruvka", "dmr", "retry", "dynamic_pipe"];

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

fn emit(name: &str, outline: bool) -> String {
    let path = corpus().join(format!("{name}.irgl"));
    let text = fs::read_to_string(&path).unwrap();
    let m = parse_source(&text, &format!("{name}.irgl")).unwrap();
    let config = PlanConfig { outline, ..PlanConfig::default() };
    let options = EmitOptions { outline, runtime_inline: false };
    compile(&m, &SemaOptions::default(), &config, options).unwrap_or_else(|d| panic!("{name}: {d:?}")).cuda
}

fn check(golden: &str, actual: &str) {
    let path = corpus().join("golden").join(golden);
    if std::env::var_os("IRGL_BLESS").is_some() {
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}; run with IRGL_BLESS=1", path.display()));
    if expected != actual {
        let line = expected.lines().zip(actual.lines()).position(|(a, b)| a != b);
        panic!("{golden} differs from the generated code (first differing line: {line:?})");
    }
}

#[test]
fn corpus_matches_golden_files() {
    for name in PROGRAMS {
        check(&format!("{name}.cu"), &emit(name, false));
    }
}

#[test]
fn outlined_dmr_matches_its_golden_file() {
    check("dmr_outlined.cu", &emit("dmr", true));
}

#[test]
fn emission_is_deterministic() {
    for name in PROGRAMS {
        assert_eq!(emit(name, false), emit(name, false), "{name}");
    }
}

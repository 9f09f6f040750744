use std::fs;
use std::path::{Path, PathBuf};

use quadwalk::io::{parse_list, parse_pair, parse_pair_f64, parse_steps_json, RunConfig};

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn step_set_seeds() {
    for (path, text) in seeds("step_set_json") {
        let ok = parse_steps_json(&text).is_ok();
        let expect_ok = !path.ends_with("empty.json");
        assert_eq!(ok, expect_ok, "{}", path.display());
    }
}

#[test]
fn config_seeds_parse() {
    for (path, text) in seeds("run_config_toml") {
        RunConfig::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn list_seeds_parse_somewhere() {
    for (path, text) in seeds("cli_lists") {
        let any = parse_pair(&text).is_ok() || parse_pair_f64(&text).is_ok() || parse_list(&text).is_ok();
        assert!(any, "{}", path.display());
    }
}

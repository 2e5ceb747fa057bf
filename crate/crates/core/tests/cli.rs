use std::io::Write;

use wcd::cli::{run, EXIT_CLEAN, EXIT_ERROR, EXIT_FOUND};

fn wcd(args: &[&str]) -> i32 {
    run(std::iter::once("wcd").chain(args.iter().copied()))
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(wcd(&["frobnicate"]), EXIT_ERROR);
    assert_eq!(wcd(&["scan"]), EXIT_ERROR);
    assert_eq!(wcd(&["scan", "--seeds", "/nonexistent/seeds.txt"]), EXIT_ERROR);
    assert_eq!(wcd(&["oracle", "--techniques", "bogus"]), EXIT_ERROR);
    assert_eq!(wcd(&["--help"]), EXIT_CLEAN);
}

#[test]
fn empty_seed_pool_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    let seeds = dir.path().join("seeds.txt");
    std::fs::write(&seeds, "# nothing yet\n").unwrap();
    assert_eq!(wcd(&["scan", "--seeds", seeds.to_str().unwrap()]), EXIT_CLEAN);
}

#[test]
fn report_exit_status_follows_findings() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean.jsonl");
    std::fs::write(&clean, "\n").unwrap();
    assert_eq!(wcd(&["report", clean.to_str().unwrap()]), EXIT_CLEAN);

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "not json\n").unwrap();
    assert_eq!(wcd(&["report", bad.to_str().unwrap()]), EXIT_ERROR);

    let found = dir.path().join("found.jsonl");
    let mut f = std::fs::File::create(&found).unwrap();
    writeln!(
        f,
        r#"{{"page":"http://www.a.test/account","domain":"www.a.test","technique":"path_parameter","attack_url":"http://www.a.test/account/x.css","victim_status":200,"attacker_status":200,"unauth_status":302,"markers_leaked":["email"],"secrets":[],"responses_identical":true,"unauth_exploitable":false,"vulnerable":true}}"#
    )
    .unwrap();
    drop(f);
    assert_eq!(wcd(&["report", found.to_str().unwrap(), "--format", "records", "--redact"]), EXIT_FOUND);
}

#[test]
fn selfcheck_and_oracle_on_a_small_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    std::fs::write(
        &scenario,
        r#"
[[site]]
name = "one"
origin = ["truncate_at_newline"]
profile = "cloudflare_default"

[[site]]
name = "two"
profile = "fastly_default"
protected_no_store = true
"#,
    )
    .unwrap();
    let s = scenario.to_str().unwrap();
    assert_eq!(wcd(&["oracle", "--scenario", s]), EXIT_CLEAN);
    assert_eq!(wcd(&["oracle", "--scenario", s, "--json", "--delay", "7200"]), EXIT_CLEAN);
    assert_eq!(wcd(&["selfcheck", "--scenario", s, "--in-process", "--techniques", "nl,pp"]), EXIT_CLEAN);
    assert_eq!(wcd(&["selfcheck", "--scenario", s, "--techniques", "nl", "--delay", "7200"]), EXIT_CLEAN);
}

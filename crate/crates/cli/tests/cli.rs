use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data")
        .join(name)
}

fn navigator(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_navigator"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn templates_in(dir: &Path) -> PathBuf {
    let out = dir.join("templates.jsonl");
    let o = navigator(
        &["templatize", data("group_corpus.jsonl").to_str().unwrap(), "--out", out.to_str().unwrap()],
        dir,
    );
    assert!(o.status.success(), "{o:?}");
    out
}

#[test]
fn templatize_merges_alpha_variants() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("pairs.jsonl");
    fs::write(
        &corpus,
        concat!(
            "{\"state\":\"a b : G\\n⊢ a * b = b * a\",\"tactic\":\"rw [mul_comm a b]\"}\n",
            "{\"state\":\"x y : G\\n⊢ x * y = y * x\",\"tactic\":\"rw [mul_comm x y]\"}\n",
        ),
    )
    .unwrap();
    let o = navigator(&["templatize", "pairs.jsonl", "--out", "t.jsonl"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("templates: 1"));
    assert_eq!(
        fs::read_to_string(dir.path().join("t.jsonl")).unwrap(),
        "{\"template\":\"rw [mul_comm {var0} {var1}]\",\"var_arity\":2,\"hyp_arity\":0,\"frequency\":2}\n"
    );
}

#[test]
fn templatize_empty_and_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    let o = navigator(&["templatize", "empty.jsonl", "--out", "t.jsonl"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("templates: 0"));
    assert_eq!(fs::read_to_string(dir.path().join("t.jsonl")).unwrap(), "");

    let mut lines = String::new();
    for i in 0..10 {
        if i == 4 {
            lines.push_str("{\"state\": oops\n");
        } else {
            lines.push_str(&format!(
                "{{\"state\":\"a : G\\n⊢ a * 1 = a\",\"tactic\":\"rw [mul_one] -- {i}\"}}\n"
            ));
        }
    }
    fs::write(dir.path().join("ten.jsonl"), lines).unwrap();
    let o = navigator(&["templatize", "ten.jsonl", "--out", "t2.jsonl"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("pairs: 9"), "{out}");
    assert!(out.contains("warnings: 1"), "{out}");
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = data("fixtures.txt");
    let o = navigator(
        &[
            "bench", "--theorems", fixtures.to_str().unwrap(), "--templates", "x.jsonl",
            "--engine", "builtin", "--engine-cmd", "python3 engine.py",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("conflicts"));

    assert_eq!(navigator(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(navigator(&["explore", "--theorems"], dir.path()).status.code(), Some(1));
    assert_eq!(navigator(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn missing_index_fails_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = data("fixtures.txt");
    let o = navigator(
        &["explore", "--theorems", fixtures.to_str().unwrap(), "--index", "missing.bin", "--out", "graphs"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("graphs").exists());
}

#[test]
fn explore_extract_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let t = templates_in(d);
    let o = navigator(&["build-index", "--templates", t.to_str().unwrap(), "--out", "idx.bin"], d);
    assert!(o.status.success());
    let fixtures = data("fixtures.txt");
    let o = navigator(
        &[
            "explore", "--theorems", fixtures.to_str().unwrap(), "--index", "idx.bin",
            "--out", "graphs", "--workers", "2", "--max-transitions", "500",
        ],
        d,
    );
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("avg states per theorem:"));
    let mut graphs: Vec<String> = fs::read_dir(d.join("graphs"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    graphs.sort();
    assert_eq!(
        graphs,
        ["mul_inv_rev.graph.jsonl", "mul_one.graph.jsonl", "my_mul_comm_assoc.graph.jsonl"]
    );

    let o = navigator(&["extract", "graphs", "--out", "ds.jsonl"], d);
    assert!(o.status.success());
    let ds = fs::read_to_string(d.join("ds.jsonl")).unwrap();
    assert!(ds.contains("\"state\":\"a b c : ℝ\\n⊢ b * a * c = b * (a * c)\""));
    let o = navigator(&["extract", "graphs", "--out", "zero.jsonl", "--max-depth", "0"], d);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(d.join("zero.jsonl")).unwrap(), "");

    let o = navigator(
        &["bench", "--theorems", fixtures.to_str().unwrap(), "--index", "idx.bin", "--out", "bench.jsonl"],
        d,
    );
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "3/3");
    assert_eq!(fs::read_to_string(d.join("bench.jsonl")).unwrap().lines().count(), 3);
}

#[test]
fn prove_prints_a_proof_block() {
    let dir = tempfile::tempdir().unwrap();
    let t = templates_in(dir.path());
    let o = navigator(
        &[
            "prove",
            "--theorem", "theorem my_mul_comm_assoc (a b c : ℝ) : a * b * c = b * (a * c)",
            "--templates", t.to_str().unwrap(),
            "--budget-seconds", "120", "--tries-per-state", "10",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{o:?}");
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(
        lines.next(),
        Some("theorem my_mul_comm_assoc (a b c : ℝ) : a * b * c = b * (a * c) := by")
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn corrupt_graph_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("graphs");
    fs::create_dir(&g).unwrap();
    fs::write(g.join("bad.graph.jsonl"), "not a graph\n").unwrap();
    fs::write(
        g.join("ok.graph.jsonl"),
        "{\"node\":0,\"state\":\"a : G\\n⊢ a * 1 = a\",\"idx\":0}\n{\"src\":0,\"tactic\":\"rw [mul_one]\",\"dst\":\"PF\"}\n",
    )
    .unwrap();
    let o = navigator(&["extract", "graphs", "--out", "ds.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let ds = fs::read_to_string(dir.path().join("ds.jsonl")).unwrap();
    assert_eq!(ds.lines().count(), 1);
    assert!(ds.starts_with("{\"id\":\"ok_0000\""));
}

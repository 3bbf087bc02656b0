use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qmaxent::model::init_model;
use qmaxent::{Checkpoint, Embedding, HardwareGraph};

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("data")
}

fn qmaxent(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmaxent")).current_dir(dir).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().skip(1).filter(|l| !l.trim().is_empty()).count()
}

fn write_pair(dir: &Path) {
    fs::write(dir.join("pair.txt"), "dataset v1 n=2 split=train\n1 1\n-1 -1\n1 -1\n").unwrap();
}

#[test]
fn gen_data_bas_7x6_splits_in_halves() {
    let dir = tempfile::tempdir().unwrap();
    let out = qmaxent(dir.path(), &["gen-data", "bas", "--rows", "7", "--cols", "6", "--seed", "1", "--out-dir", "."]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(data_rows(&dir.path().join("bas_train.txt")), 96);
    assert_eq!(data_rows(&dir.path().join("bas_test.txt")), 96);
    assert!(dir.path().join("manifest.txt").exists());
}

#[test]
fn gen_data_bas_1x1_has_four_pictures() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&qmaxent(dir.path(), &["gen-data", "bas", "--rows", "1", "--cols", "1", "--out-dir", "."])), 0);
    let total = data_rows(&dir.path().join("bas_train.txt")) + data_rows(&dir.path().join("bas_test.txt"));
    assert_eq!(total, 4);
}

#[test]
fn gen_data_sk_writes_instance_and_sample_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gen-data", "sk", "--n", "6", "--zeta", "2", "--samples", "20", "--instances", "3", "--out-dir", "sk"];
    assert_eq!(code(&qmaxent(dir.path(), &args)), 0);
    for i in 0..3 {
        assert!(dir.path().join(format!("sk/sk_{i:02}.inst")).exists());
        assert_eq!(data_rows(&dir.path().join(format!("sk/sk_{i:02}.txt"))), 20);
    }
}

#[test]
fn embed_builds_small_and_full_cliques() {
    let dir = tempfile::tempdir().unwrap();
    let small = qmaxent(dir.path(), &["embed", "--chimera", "1,1,4", "--n-logical", "4", "--out", "k4.emb"]);
    assert_eq!(code(&small), 0, "{}", String::from_utf8_lossy(&small.stderr));
    let big = qmaxent(dir.path(), &["embed", "--chimera", "12,12,4", "--n-logical", "48", "--out", "k48.emb"]);
    assert_eq!(code(&big), 0);
    let stats = fs::read_to_string(dir.path().join("k48.emb.stats")).unwrap();
    assert!(stats.lines().nth(1).unwrap().starts_with("48\t"));
}

#[test]
fn embed_too_many_variables_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&qmaxent(dir.path(), &["embed", "--chimera", "1,1,4", "--n-logical", "5", "--out", "x.emb"])), 2);
}

#[test]
fn embed_load_reports_table_row() {
    let dir = tempfile::tempdir().unwrap();
    let d = data_dir();
    let out = qmaxent(
        dir.path(),
        &[
            "embed",
            "--hardware",
            d.join("c12_1097.hw").to_str().unwrap(),
            "--load",
            d.join("k15.emb").to_str().unwrap(),
            "--stats",
            "k15.stats",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stats = fs::read_to_string(dir.path().join("k15.stats")).unwrap();
    assert_eq!(stats.lines().nth(1).unwrap(), "15\t76\t5\t6\t7%\t120\t252");
}

#[test]
fn malformed_chimera_flag_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    let out = qmaxent(dir.path(), &["train", "--data", "pair.txt", "--chimera", "a,b", "--clique", "--checkpoint", "c"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn zero_iterations_checkpoint_is_the_initial_model() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    let out = qmaxent(dir.path(), &["train", "--data", "pair.txt", "--iters", "0", "--seed", "9", "--checkpoint", "m.ckpt"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let ckpt = Checkpoint::load(&dir.path().join("m.ckpt")).unwrap();
    let expected = init_model(&HardwareGraph::complete(2), &Embedding::identity(2), 9).unwrap();
    assert_eq!(ckpt.model, expected);
    assert_eq!(ckpt.iteration, 0);
}

fn manifest_value(dir: &Path, key: &str) -> String {
    let text = fs::read_to_string(dir.join("m.ckpt.manifest")).unwrap();
    let prefix = format!("config {key} = ");
    text.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap().to_string()
}

#[test]
fn flags_override_config_file_which_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    fs::write(dir.path().join("run.conf"), "# hyperparameters\nlr = 0.5\nmomentum = 0.25\n").unwrap();
    let base = ["train", "--data", "pair.txt", "--iters", "1", "--sampler", "exact", "--checkpoint", "m.ckpt"];

    assert_eq!(code(&qmaxent(dir.path(), &base)), 0);
    assert_eq!(manifest_value(dir.path(), "lr"), "0.0025");
    assert_eq!(manifest_value(dir.path(), "momentum"), "0.5");

    let mut with_file = base.to_vec();
    with_file.extend(["--config", "run.conf"]);
    assert_eq!(code(&qmaxent(dir.path(), &with_file)), 0);
    assert_eq!(manifest_value(dir.path(), "lr"), "0.5");

    with_file.extend(["--lr", "0.1"]);
    assert_eq!(code(&qmaxent(dir.path(), &with_file)), 0);
    assert_eq!(manifest_value(dir.path(), "lr"), "0.1");
    assert_eq!(manifest_value(dir.path(), "momentum"), "0.25");
}

#[test]
fn shipped_default_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    let conf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.conf");
    let out = qmaxent(
        dir.path(),
        &["train", "--config", conf.to_str().unwrap(), "--data", "pair.txt", "--iters", "1", "--t-max", "50", "--checkpoint", "m.ckpt"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(manifest_value(dir.path(), "neg-samples"), "96");
    assert_eq!(manifest_value(dir.path(), "l2"), "0.00001");
}

#[test]
fn training_leaves_inputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    let before = fs::read(dir.path().join("pair.txt")).unwrap();
    assert_eq!(code(&qmaxent(dir.path(), &["train", "--data", "pair.txt", "--iters", "3", "--t-max", "50", "--checkpoint", "m.ckpt"])), 0);
    assert_eq!(fs::read(dir.path().join("pair.txt")).unwrap(), before);
    let log = fs::read_to_string(dir.path().join("m.ckpt.log")).unwrap();
    assert_eq!(log.lines().filter(|l| !l.starts_with('#')).count(), 3);
}

#[test]
fn output_may_not_overwrite_an_input() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    let out = qmaxent(dir.path(), &["train", "--data", "pair.txt", "--iters", "1", "--checkpoint", "pair.txt"]);
    assert_ne!(code(&out), 0);
}

#[test]
fn sample_renders_a_six_by_six_grid() {
    let dir = tempfile::tempdir().unwrap();
    let gen = ["gen-data", "bas", "--rows", "4", "--cols", "4", "--out-dir", "."];
    assert_eq!(code(&qmaxent(dir.path(), &gen)), 0);
    let train = ["train", "--data", "bas_train.txt", "--iters", "2", "--t-max", "100", "--checkpoint", "m.ckpt"];
    assert_eq!(code(&qmaxent(dir.path(), &train)), 0);
    let sample = [
        "sample", "--checkpoint", "m.ckpt", "-n", "36", "--t-max", "100", "--shape", "4x4", "--render", "grid.pbm", "--out", "s.txt",
    ];
    let out = qmaxent(dir.path(), &sample);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let pbm = fs::read_to_string(dir.path().join("grid.pbm")).unwrap();
    let mut tokens = pbm.split_whitespace();
    assert_eq!(tokens.next(), Some("P1"));
    let side = 6 * 4 + 5;
    assert_eq!(tokens.next(), Some(side.to_string().as_str()));
    assert_eq!(tokens.next(), Some(side.to_string().as_str()));
    assert_eq!(data_rows(&dir.path().join("s.txt")), 36);
}

#[test]
fn rerun_detects_changed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    let train = ["train", "--data", "pair.txt", "--iters", "2", "--t-max", "50", "--checkpoint", "m.ckpt"];
    assert_eq!(code(&qmaxent(dir.path(), &train)), 0);
    assert_eq!(code(&qmaxent(dir.path(), &["rerun", "--manifest", "m.ckpt.manifest"])), 0);
    fs::write(dir.path().join("pair.txt"), "dataset v1 n=2 split=train\n1 1\n").unwrap();
    assert_ne!(code(&qmaxent(dir.path(), &["rerun", "--manifest", "m.ckpt.manifest"])), 0);
}

#[test]
fn clique_training_writes_a_usable_embedding() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&qmaxent(dir.path(), &["gen-data", "bas", "--rows", "2", "--cols", "2", "--out-dir", "."])), 0);
    let train = [
        "train", "--data", "bas_train.txt", "--chimera", "1,1,4", "--clique", "--iters", "2", "--t-max", "100",
        "--checkpoint", "m.ckpt",
    ];
    assert_eq!(code(&qmaxent(dir.path(), &train)), 0);
    let sample = ["sample", "--checkpoint", "m.ckpt", "--embedding", "m.ckpt.emb", "-n", "4", "--t-max", "100", "--out", "s.txt"];
    assert_eq!(code(&qmaxent(dir.path(), &sample)), 0);
    let missing = ["sample", "--checkpoint", "m.ckpt", "-n", "4", "--out", "t.txt"];
    assert_eq!(code(&qmaxent(dir.path(), &missing)), 2);
}

use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsch-cluster"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn witness_sweep_reports_eight_slots() {
    let o = cli(&["witness", "far_children", "--variant", "no-acks", "--sweep"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("witness 8 slots, 4 slotframes, 5760 ms"));
}

#[test]
fn bound_at_height_eight() {
    let o = cli(&["bound", "--h", "8"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("slots 1608"));
    let csv = cli(&["bound", "--h", "1,3,8", "--format", "csv"]);
    let rows: Vec<String> = stdout(&csv).lines().map(str::to_string).collect();
    assert_eq!(rows[0], "h,nodes,slots,slotframes,milliseconds,ratio");
    assert!(rows[1].starts_with("1,3,7,4,5760,"));
    assert!(rows[2].starts_with("3,15,35,18,25920,"));
    assert!(rows[3].starts_with("8,511,1608,804,1157760,"));
}

#[test]
fn exit_codes() {
    assert_eq!(cli(&["verify", "narrow_bridge"]).status.code(), Some(1));
    assert_eq!(cli(&["verify", "ack_collision", "--channels", "1,3"]).status.code(), Some(0));
    assert_eq!(cli(&["verify", "ack_collision", "--depth", "2", "--channels", "1,3"]).status.code(), Some(3));
    assert_eq!(cli(&["verify", "no_such_scenario"]).status.code(), Some(2));
    assert_eq!(cli(&["verify", "ack_collision", "--channels", "1,7"]).status.code(), Some(2));
    assert_eq!(cli(&["bound", "--h", "0"]).status.code(), Some(2));
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn verify_prints_the_lasso() {
    let out = stdout(&cli(&["verify", "associate_collision"]));
    assert!(out.contains("verdict fails (AssociateCollision)"));
    assert!(out.contains("cycle ("));
    assert!(out.contains("| air x2 - - |"));
}

#[test]
fn scenario_files_load_from_disk() {
    let dir = std::env::temp_dir().join(format!("tsch_cluster_cli_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("pair.toml");
    std::fs::write(&path, "name = \"pair\"\n[topology]\nnodes = 2\nclose = [[1, 2]]\n[initial]\nchannels = [2]\n").unwrap();
    let o = cli(&["witness", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("scenario pair: 2 nodes"));

    std::fs::write(&path, "name = \"bad\"\n[topology]\nnodes = 2\nclose = [[1, 5]]\n").unwrap();
    let o = cli(&["verify", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn traces_replay_and_tampering_is_caught() {
    let dir = std::env::temp_dir().join(format!("tsch_cluster_trace_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("w.trace");
    let p = path.to_str().unwrap();
    assert_eq!(cli(&["witness", "far_children", "--trace", p]).status.code(), Some(0));
    let o = cli(&["replay", "far_children", p]);
    assert_eq!(stdout(&o), "replay ok: 8 slots match, network formed\n");

    let text = std::fs::read_to_string(&path).unwrap().replacen("BEACON(0)", "BEACON(2)", 1);
    std::fs::write(&path, text).unwrap();
    let o = cli(&["replay", "far_children", p]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("replay mismatch: slot 0"));

    assert_eq!(cli(&["simulate", "binary_tree_h3", "--seeds", "4", "--trace", p]).status.code(), Some(0));
    assert_eq!(cli(&["replay", "binary_tree_h3", p]).status.code(), Some(0));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn repeated_runs_are_byte_identical() {
    let commands: [&[&str]; 5] = [
        &["verify", "narrow_bridge"],
        &["verify", "far_children", "--sweep", "--format", "csv"],
        &["witness", "far_children", "--sweep"],
        &["simulate", "binary_tree_h3", "--seeds", "1,2,3"],
        &["simulate", "binary_tree_h3", "--seeds", "1,2,3", "--format", "csv"],
    ];
    for args in commands {
        let a = cli(args);
        let b = cli(args);
        assert!(!a.stdout.is_empty(), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(a.status.code(), b.status.code());
    }
}

#[test]
fn scenarios_lists_every_builtin() {
    let out = stdout(&cli(&["scenarios"]));
    for name in ["ack_collision", "associate_collision", "narrow_bridge", "far_children", "binary_tree_h3"] {
        assert!(out.contains(name));
    }
}

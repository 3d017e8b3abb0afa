use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use tsch_cluster_ffi::*;

fn builtin(name: &str) -> *mut TcScenario {
    let name = CString::new(name).unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { tc_scenario_builtin(name.as_ptr(), &mut sc) }, TcStatus::Ok);
    assert!(!sc.is_null());
    sc
}

fn last_error() -> String {
    let p = tc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn verify(sc: *const TcScenario) -> TcVerifyResult {
    let mut out = TcVerifyResult {
        verdict: TcVerdict::Inconclusive,
        failure_class: TcFailureClass::None,
        states: 0,
        witness_slots: 0,
    };
    assert_eq!(unsafe { tc_verify(sc, 0, &mut out) }, TcStatus::Ok);
    out
}

#[test]
fn failure_classes_through_the_c_abi() {
    for (name, class) in [
        ("ack_collision", TcFailureClass::AckCollision),
        ("associate_collision", TcFailureClass::AssociateCollision),
        ("narrow_bridge", TcFailureClass::NarrowBridge),
    ] {
        let sc = builtin(name);
        let v = verify(sc);
        assert_eq!((v.verdict, v.failure_class), (TcVerdict::Fails, class), "{name}");
        unsafe { tc_scenario_free(sc) };
    }
}

#[test]
fn overrides_change_the_verdict() {
    let sc = builtin("ack_collision");
    let chans = [1u32, 3];
    assert_eq!(unsafe { tc_scenario_set_channels(sc, chans.as_ptr(), chans.len()) }, TcStatus::Ok);
    let v = verify(sc);
    assert_eq!(v.verdict, TcVerdict::Holds);
    assert!(v.witness_slots > 0);

    assert_eq!(unsafe { tc_scenario_set_variant(sc, TcVariant::NoAcks) }, TcStatus::Ok);
    assert_eq!(verify(sc).verdict, TcVerdict::Holds);

    let bad = [1u32, 9];
    assert_eq!(unsafe { tc_scenario_set_channels(sc, bad.as_ptr(), bad.len()) }, TcStatus::InvalidInput);
    assert!(last_error().contains("channel 9"));
    unsafe { tc_scenario_free(sc) };
}

#[test]
fn parse_errors_and_null_arguments() {
    let text = CString::new("name = \"x\"\n[topology]\nnodes = 2\nclose = [[1, 2]]\nrange = [[1, 2]]\n").unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { tc_scenario_parse(text.as_ptr(), &mut sc) }, TcStatus::InvalidInput);
    assert!(sc.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { tc_scenario_builtin(ptr::null(), &mut sc) }, TcStatus::NullPointer);
    assert_eq!(unsafe { tc_verify(ptr::null(), 0, ptr::null_mut()) }, TcStatus::NullPointer);
    let mut slots = 0;
    assert_eq!(unsafe { tc_lower_bound_slots(0, &mut slots) }, TcStatus::InvalidInput);
    assert_eq!(unsafe { tc_lower_bound_slots(64, &mut slots) }, TcStatus::Overflow);
    assert_eq!(unsafe { tc_lower_bound_slots(3, &mut slots) }, TcStatus::Ok);
    assert_eq!(slots, 35);

    let ok = CString::new("name = \"y\"\n[topology]\nnodes = 1\n").unwrap();
    assert_eq!(unsafe { tc_scenario_parse(ok.as_ptr(), &mut sc) }, TcStatus::Ok);
    assert!(tc_last_error().is_null());
    assert_eq!(unsafe { tc_scenario_node_count(sc) }, 1);
    unsafe { tc_scenario_free(sc) };
    unsafe { tc_scenario_free(ptr::null_mut()) };
}

#[test]
fn seeded_runs_are_reproducible() {
    let sc = builtin("binary_tree_h3");
    let trace = |seed| {
        let mut run = ptr::null_mut();
        assert_eq!(unsafe { tc_simulate(sc, seed, 5000, &mut run) }, TcStatus::Ok);
        assert!(unsafe { tc_run_formed(run) });
        assert!(unsafe { tc_run_slots(run) } >= 35);
        let mut text = ptr::null_mut();
        assert_eq!(unsafe { tc_run_trace(run, &mut text) }, TcStatus::Ok);
        let s = unsafe { CStr::from_ptr(text) }.to_string_lossy().into_owned();
        unsafe {
            tc_string_free(text);
            tc_run_free(run);
        }
        s
    };
    assert_eq!(trace(11), trace(11));
    assert_ne!(trace(11), trace(12));
    unsafe { tc_scenario_free(sc) };
}

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_static_library() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libtsch_cluster_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let out = std::env::temp_dir().join(format!("tsch_cluster_smoke_{}", std::process::id()));
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout), "ok\n");
}

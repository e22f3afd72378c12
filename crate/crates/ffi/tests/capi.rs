use std::ffi::{c_char, CStr, CString};
use std::process::Command;
use std::ptr;

use pcl_sim_ffi::*;

const CONFIG: &str = r#"
seed = 3

[universe]
num_prompts = 200

[strategy]
kind = "uniform"
m = 8
n = 4

[budget]
max_steps = 5
"#;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        let n = pcl_last_error_message(buf.as_mut_ptr(), buf.len());
        assert!(n < buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn run_and_read_back() {
    let cfg = CString::new(CONFIG).unwrap();
    let mut trace = ptr::null_mut();
    unsafe {
        assert_eq!(pcl_run_from_toml(cfg.as_ptr(), &mut trace), PclStatus::Ok);
        assert!(!trace.is_null());
        let mut len = 0usize;
        assert_eq!(pcl_trace_len(trace, &mut len), PclStatus::Ok);
        assert_eq!(len, 5);
        let mut rec = PclRecord::default();
        for i in 0..len {
            assert_eq!(pcl_trace_record(trace, i, &mut rec), PclStatus::Ok);
            assert_eq!(rec.step, i as u64);
            // uniform has no value model
            assert!(rec.value_ev.is_nan());
            assert!((0.0..=1.0).contains(&rec.train_reward_post_filter));
        }
        assert_eq!(pcl_trace_record(trace, len, &mut rec), PclStatus::OutOfRange);
        assert!(last_error().contains("record 5"));

        let (mut s, mut gen, mut waste) = (0.0, 0u64, 0u64);
        assert_eq!(pcl_trace_summary(trace, &mut s, &mut gen, &mut waste), PclStatus::Ok);
        assert_eq!(gen, 5 * 8 * 4);
        assert_eq!(waste, 0);
        assert!(s > 0.0 && s < 1.0);
        let mut starved = -1;
        assert_eq!(pcl_trace_starved(trace, &mut starved), PclStatus::Ok);
        assert_eq!(starved, 0);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        assert_eq!(pcl_trace_write_csv(trace, cpath.as_ptr()), PclStatus::Ok);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("step,cumulative_sim_time_s"));

        pcl_trace_free(trace);
        pcl_trace_free(ptr::null_mut());
    }
}

#[test]
fn bad_config_reports_error() {
    let cfg = CString::new("seed = 1\n[strategy]\nkind = \"uniform\"\nm = 8\nn = 4\n").unwrap();
    let mut trace = ptr::null_mut();
    let status = unsafe { pcl_run_from_toml(cfg.as_ptr(), &mut trace) };
    assert_eq!(status, PclStatus::Config);
    assert!(trace.is_null());
    assert!(!last_error().is_empty());

    let junk = CString::new("not toml [[").unwrap();
    assert_eq!(unsafe { pcl_run_from_toml(junk.as_ptr(), &mut trace) }, PclStatus::Config);
}

#[test]
fn null_pointers_are_rejected() {
    unsafe {
        let mut trace = ptr::null_mut();
        assert_eq!(pcl_run_from_toml(ptr::null(), &mut trace), PclStatus::NullPointer);
        let mut len = 0usize;
        assert_eq!(pcl_trace_len(ptr::null(), &mut len), PclStatus::NullPointer);
        assert_eq!(pcl_expected_sq_advantage(0.5, ptr::null_mut()), PclStatus::NullPointer);
        // a null buffer still reports the needed length
        assert!(pcl_last_error_message(ptr::null_mut(), 0) > 0);
    }
}

#[test]
fn pure_helpers() {
    unsafe {
        let mut t = 0.0;
        let lens = [100u32, 300, 200];
        assert_eq!(pcl_generation_time(lens.as_ptr(), 3, 10.0, 2, &mut t), PclStatus::Ok);
        // max(300/10, 600/(2*10))
        assert!((t - 30.0).abs() < 1e-12);
        assert_eq!(pcl_generation_time(lens.as_ptr(), 0, 10.0, 2, &mut t), PclStatus::InvalidArgument);
        assert_eq!(pcl_generation_time(lens.as_ptr(), 3, -1.0, 2, &mut t), PclStatus::Config);

        let truth = [0.1, 0.4, 0.9, 0.6];
        let mut ev = 0.0;
        assert_eq!(pcl_explained_variance(truth.as_ptr(), truth.as_ptr(), 4, &mut ev), PclStatus::Ok);
        assert_eq!(ev, 1.0);
        let flat = [0.5; 4];
        assert_eq!(pcl_explained_variance(flat.as_ptr(), truth.as_ptr(), 4, &mut ev), PclStatus::UndefinedMetric);

        let mut a = 0.0;
        assert_eq!(pcl_expected_sq_advantage(0.3, &mut a), PclStatus::Ok);
        assert!((a - 0.21).abs() < 1e-15);
        assert_eq!(pcl_expected_sq_advantage(1.5, &mut a), PclStatus::InvalidArgument);

        let scores = [0.9, 0.45, 0.1, 0.55, 0.5];
        let mut out = [usize::MAX; 3];
        assert_eq!(pcl_greedy_downsample(scores.as_ptr(), 5, 0.5, 3, out.as_mut_ptr()), PclStatus::Ok);
        let mut picked = out.to_vec();
        picked.sort();
        assert_eq!(picked, vec![1, 3, 4]);
        assert_eq!(pcl_greedy_downsample(scores.as_ptr(), 5, 0.5, 6, out.as_mut_ptr()), PclStatus::Config);
    }
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(pcl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"pcl_sim.h\"\nint main(void) { PclRecord r; (void)r; return PCL_STATUS_OK; }\n",
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc);
        }
    }
    Err(())
}

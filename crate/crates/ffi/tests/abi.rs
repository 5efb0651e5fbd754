use std::ffi::{CStr, CString};
use std::ptr;

use defermatch_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(dm_last_error()) }.to_string_lossy().into_owned()
}

fn example() -> *mut DmInstance {
    let caps = [1u32, 1];
    let f = [0.9, 0.1, 0.6, 0.5, 0.2, 0.7];
    let mut inst = ptr::null_mut();
    let s = unsafe { dm_instance_new(3, 2, caps.as_ptr(), f.as_ptr(), f.as_ptr(), &mut inst) };
    assert_eq!(s, DmStatus::Ok);
    inst
}

#[test]
fn solve_and_read_back() {
    let inst = example();
    let (mut n, mut k) = (0, 0);
    assert_eq!(unsafe { dm_instance_dims(inst, &mut n, &mut k) }, DmStatus::Ok);
    assert_eq!((n, k), (3, 2));
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { dm_solve(inst, DmScores::Confidence, 1, &mut m) }, DmStatus::Ok);
    assert_eq!(unsafe { dm_matching_len(m) }, 2);
    assert!((unsafe { dm_matching_objective(m) } - 1.6).abs() < 1e-12);
    let mut pairs = Vec::new();
    for idx in 0..2 {
        let (mut i, mut r) = (0, 0);
        assert_eq!(unsafe { dm_matching_pair(m, idx, &mut i, &mut r) }, DmStatus::Ok);
        pairs.push((i, r));
    }
    assert_eq!(pairs, vec![(0, 0), (2, 1)]);
    let (mut i, mut r) = (0, 0);
    assert_eq!(unsafe { dm_matching_pair(m, 2, &mut i, &mut r) }, DmStatus::OutOfRange);
    let mut u = 0.0;
    assert_eq!(unsafe { dm_matching_utility(m, inst, &mut u) }, DmStatus::Ok);
    assert!((u - 1.6).abs() < 1e-12);

    let mut bf = ptr::null_mut();
    assert_eq!(unsafe { dm_brute_force(inst, DmScores::Confidence, 1, &mut bf) }, DmStatus::Ok);
    assert_eq!(unsafe { dm_matching_objective(bf) }, unsafe { dm_matching_objective(m) });
    unsafe {
        dm_matching_free(bf);
        dm_matching_free(m);
        dm_instance_free(inst);
    }
}

#[test]
fn errors_set_status_and_message() {
    let caps = [1u32];
    let f = [0.5, 0.5];
    let mut inst = ptr::null_mut();
    assert_eq!(
        unsafe { dm_instance_new(2, 1, caps.as_ptr(), f.as_ptr(), ptr::null(), &mut inst) },
        DmStatus::Ok
    );
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { dm_solve(inst, DmScores::Confidence, 0, &mut m) }, DmStatus::Infeasible);
    assert!(m.is_null());
    assert!(last_error().contains("infeasible"));
    assert_eq!(unsafe { dm_solve(inst, DmScores::SuccessProb, 1, &mut m) }, DmStatus::InvalidArgument);
    assert_eq!(unsafe { dm_solve(ptr::null(), DmScores::Confidence, 0, &mut m) }, DmStatus::NullPointer);
    assert_eq!(unsafe { dm_solve(inst, DmScores::Confidence, 0, ptr::null_mut()) }, DmStatus::NullPointer);

    let bad = [1.5, 0.5];
    let mut other = ptr::null_mut();
    assert_eq!(
        unsafe { dm_instance_new(2, 1, caps.as_ptr(), bad.as_ptr(), ptr::null(), &mut other) },
        DmStatus::InvalidArgument
    );
    assert!(last_error().contains("outside [0, 1]"));

    let mut q = 0.0;
    assert_eq!(unsafe { dm_beta_quantile(1.0, 10.0, 0.5, &mut q) }, DmStatus::Ok);
    assert!(last_error().is_empty());
    assert!((q - (1.0 - 0.5f64.powf(0.1))).abs() < 1e-10);
    assert_eq!(unsafe { dm_beta_quantile(-1.0, 1.0, 0.5, &mut q) }, DmStatus::Domain);
    unsafe { dm_instance_free(inst) };
}

#[test]
fn json_instances() {
    let json = CString::new(
        r#"{"n":2,"resources":["a","b"],"capacities":[1,1],"confidence":[[0.4,0.5],[0.6,0.1]]}"#,
    )
    .unwrap();
    let mut inst = ptr::null_mut();
    assert_eq!(unsafe { dm_instance_from_json(json.as_ptr(), &mut inst) }, DmStatus::Ok);
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { dm_solve(inst, DmScores::Confidence, 0, &mut m) }, DmStatus::Ok);
    assert!((unsafe { dm_matching_objective(m) } - 1.1).abs() < 1e-12);
    let garbage = CString::new("{not json").unwrap();
    let mut other = ptr::null_mut();
    assert_eq!(unsafe { dm_instance_from_json(garbage.as_ptr(), &mut other) }, DmStatus::Parse);
    unsafe {
        dm_matching_free(m);
        dm_instance_free(inst);
    }
}

#[test]
fn bandit_handle() {
    let arms = [5usize, 6, 7];
    let mut b = ptr::null_mut();
    assert_eq!(unsafe { dm_bandit_new(arms.as_ptr(), 3, 100, 1.0, &mut b) }, DmStatus::Ok);
    for &expect in &arms {
        let mut arm = 0;
        assert_eq!(unsafe { dm_bandit_select(b, &mut arm) }, DmStatus::Ok);
        assert_eq!(arm, expect);
        assert_eq!(unsafe { dm_bandit_update(b, arm, if arm == 6 { 1.0 } else { 0.0 }) }, DmStatus::Ok);
    }
    let mut arm = 0;
    unsafe { dm_bandit_select(b, &mut arm) };
    assert_eq!(arm, 6);
    let (mut pulls, mut mean) = (0u64, 0.0);
    assert_eq!(unsafe { dm_bandit_arm_stats(b, 6, &mut pulls, &mut mean) }, DmStatus::Ok);
    assert_eq!((pulls, mean), (1, 1.0));
    assert_eq!(unsafe { dm_bandit_update(b, 9, 1.0) }, DmStatus::UnknownArm);
    unsafe { dm_bandit_free(b) };
}

#[test]
fn free_accepts_null() {
    unsafe {
        dm_instance_free(ptr::null_mut());
        dm_matching_free(ptr::null_mut());
        dm_bandit_free(ptr::null_mut());
    }
    assert_eq!(unsafe { dm_matching_len(ptr::null()) }, 0);
    let v = unsafe { CStr::from_ptr(dm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

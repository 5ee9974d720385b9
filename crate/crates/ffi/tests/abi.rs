use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use prescriptor::bench::{build_inventory_instance, InventoryParams};
use prescriptor::weights::{TrainingSet, WeightSpec};
use prescriptor_ffi::*;

fn instance_json(spec: WeightSpec) -> CString {
    let x = vec![
        vec![vec![0.0], vec![1.0]],
        vec![vec![1.0], vec![0.5]],
        vec![vec![2.0], vec![-1.0]],
    ];
    let y = vec![
        vec![vec![40.0], vec![55.0]],
        vec![vec![60.0], vec![35.0]],
        vec![vec![45.0], vec![70.0]],
    ];
    let training = TrainingSet::new(x, y).unwrap();
    let inst =
        build_inventory_instance(&InventoryParams::default(), &training, spec, vec![0.5]).unwrap();
    CString::new(inst.to_json().unwrap()).unwrap()
}

fn load(spec: WeightSpec) -> *mut PrescriptorInstance {
    let json = instance_json(spec);
    let mut h = ptr::null_mut();
    let st = unsafe { prescriptor_instance_from_json(json.as_ptr(), 7, &mut h) };
    assert_eq!(st, PrescriptorStatus::Ok);
    h
}

fn last_error() -> String {
    let p = prescriptor_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn exact_and_sddp_agree() {
    let h = load(WeightSpec::Knn { k: Some(2) });
    unsafe {
        assert_eq!(prescriptor_instance_horizon(h), 2);
        assert_eq!(prescriptor_instance_samples(h), 3);

        let mut exact = ptr::null_mut();
        assert_eq!(
            prescriptor_solve_exact(h, &mut exact),
            PrescriptorStatus::Ok
        );
        let mut sddp = ptr::null_mut();
        let cfg =
            CString::new(r#"{"forward_samples": 5, "gap_tol": 0.0, "max_iter": 30}"#).unwrap();
        assert_eq!(
            prescriptor_solve_sddp(h, cfg.as_ptr(), &mut sddp),
            PrescriptorStatus::Ok
        );

        let a = prescriptor_solution_objective(exact);
        let b = prescriptor_solution_objective(sddp);
        assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()), "{a} vs {b}");
        let (mut lo, mut hi) = (0.0, 0.0);
        assert_eq!(
            prescriptor_solution_bounds(sddp, &mut lo, &mut hi),
            PrescriptorStatus::Ok
        );
        assert_eq!(lo, b);
        assert!(hi.is_finite() && prescriptor_solution_iterations(sddp) > 0);

        let mut len = 0;
        assert_eq!(
            prescriptor_solution_first_stage(exact, ptr::null_mut(), 0, &mut len),
            PrescriptorStatus::BufferTooSmall
        );
        assert_eq!(len, 5);
        let mut buf = vec![0.0; len];
        assert_eq!(
            prescriptor_solution_first_stage(exact, buf.as_mut_ptr(), buf.len(), &mut len),
            PrescriptorStatus::Ok
        );
        assert!(buf.iter().all(|v| v.is_finite()));

        prescriptor_solution_free(exact);
        prescriptor_solution_free(sddp);
        prescriptor_instance_free(h);
    }
}

#[test]
fn weights_form_a_distribution() {
    let h = load(WeightSpec::Knn { k: Some(2) });
    let x = [0.9];
    let mut w = [0.0; 3];
    let mut len = 0;
    unsafe {
        assert_eq!(
            prescriptor_weights(h, 1, x.as_ptr(), 1, w.as_mut_ptr(), 3, &mut len),
            PrescriptorStatus::Ok
        );
        assert_eq!(len, 3);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(w, [0.5, 0.5, 0.0]);
        assert_eq!(
            prescriptor_weights(h, 9, x.as_ptr(), 1, w.as_mut_ptr(), 3, &mut len),
            PrescriptorStatus::InvalidInput
        );
        prescriptor_instance_free(h);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let bad = CString::new("{not json").unwrap();
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(
            prescriptor_instance_from_json(bad.as_ptr(), 0, &mut h),
            PrescriptorStatus::InvalidInput
        );
        assert!(h.is_null());
        assert!(last_error().contains("json"));
        assert_eq!(
            prescriptor_instance_from_json(ptr::null(), 0, &mut h),
            PrescriptorStatus::NullPointer
        );
        assert!(last_error().contains("null"));
        let mut out = ptr::null_mut();
        assert_eq!(
            prescriptor_solve_exact(ptr::null(), &mut out),
            PrescriptorStatus::NullPointer
        );
        assert!(prescriptor_solution_objective(ptr::null()).is_nan());
        prescriptor_instance_free(ptr::null_mut());
        prescriptor_solution_free(ptr::null_mut());
    }
}

#[test]
fn bad_solver_config_is_rejected() {
    let h = load(WeightSpec::Saa);
    let cfg = CString::new(r#"{"forward_samples": 1}"#).unwrap();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(
            prescriptor_solve_sddp(h, cfg.as_ptr(), &mut out),
            PrescriptorStatus::InvalidInput
        );
        assert!(out.is_null());
        prescriptor_instance_free(h);
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(prescriptor_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export_and_parses_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/prescriptor.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in [
        "prescriptor_version",
        "prescriptor_last_error",
        "prescriptor_instance_from_json",
        "prescriptor_instance_free",
        "prescriptor_weights",
        "prescriptor_solve_exact",
        "prescriptor_solve_sddp",
        "prescriptor_solution_first_stage",
        "PRESCRIPTOR_STATUS_BUFFER_TOO_SMALL",
    ] {
        assert!(text.contains(f), "{f} missing from header");
    }
    match Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", "-std=c99"])
        .arg(&header)
        .status()
    {
        Ok(st) => assert!(st.success(), "header does not compile as C99"),
        Err(_) => eprintln!("no C compiler; skipped syntax check"),
    }
}

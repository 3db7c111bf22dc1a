use std::ffi::{CStr, CString};
use std::ptr;

use stochheat_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sh_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn kernel_and_spectral_round_trip() {
    unsafe {
        let mut k = ptr::null_mut();
        let spec = CString::new("simple1").unwrap();
        assert_eq!(sh_kernel_new(spec.as_ptr(), &mut k), ShStatus::Ok);
        let (mut dim, mut radius) = (0usize, 0u64);
        assert_eq!(sh_kernel_shape(k, &mut dim, &mut radius), ShStatus::Ok);
        assert_eq!((dim, radius), (1, 1));
        let mut q = 0.0;
        assert_eq!(sh_kernel_overlap(k, 2, &mut q), ShStatus::Ok);
        assert_eq!(q, 0.375);

        let mut s = ptr::null_mut();
        assert_eq!(sh_spectral_new(k, &mut s), ShStatus::Ok);
        let mut u = 0.0;
        assert_eq!(sh_spectral_upsilon(s, 2.0, ShUpsilonMethod::Series, &mut u), ShStatus::Ok);
        assert!((u - 0.5f64.sqrt()).abs() < 1e-12);
        let mut inv = 0.0;
        assert_eq!(sh_spectral_upsilon_inverse(s, 1.0, &mut inv), ShStatus::Ok);
        assert!((inv - 0.5 * (1.0 + 5f64.sqrt())).abs() < 1e-9);
        assert_eq!(sh_spectral_upsilon(s, 0.5, ShUpsilonMethod::Quadrature, &mut u), ShStatus::InvalidArgument);
        assert!(last_error().contains("lambda"));
        sh_spectral_free(s);
        sh_kernel_free(k);
    }
}

#[test]
fn json_kernel_specs_and_errors() {
    unsafe {
        let mut k = ptr::null_mut();
        let spec = CString::new(r#"{"kind": "custom", "dim": 1, "table": [[[-2], 0.5], [[2], 0.5]]}"#).unwrap();
        assert_eq!(sh_kernel_new(spec.as_ptr(), &mut k), ShStatus::Ok);
        let (mut dim, mut radius) = (0usize, 0u64);
        sh_kernel_shape(k, &mut dim, &mut radius);
        assert_eq!(radius, 2);
        sh_kernel_free(k);

        let bad = CString::new("lazy1:1.5").unwrap();
        assert_eq!(sh_kernel_new(bad.as_ptr(), &mut k), ShStatus::InvalidArgument);
        assert!(k.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(sh_kernel_new(ptr::null(), &mut k), ShStatus::NullPointer);
        assert_eq!(sh_kernel_new(bad.as_ptr(), ptr::null_mut()), ShStatus::NullPointer);
        let mut c = 0.0;
        assert_eq!(sh_burkholder_constant(2.0, &mut c), ShStatus::Ok);
        assert_eq!(c, 1.0);
        assert!(last_error().is_empty());
        sh_kernel_free(ptr::null_mut());
    }
}

#[test]
fn problem_evolution_and_moments() {
    unsafe {
        let cfg = CString::new(r#"{"kernel": {"kind": "simple", "dim": 1}, "sigma": {"kind": "linear", "nu": 1.0}, "seed": 9}"#).unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(sh_problem_new(cfg.as_ptr(), &mut p), ShStatus::Ok);

        let mut t = ptr::null_mut();
        assert_eq!(sh_evolve(p, 5, 0, &mut t), ShStatus::Ok);
        let mut len = 0;
        sh_trajectory_len(t, &mut len);
        assert_eq!(len, 6);
        let mut v = 0.0;
        assert_eq!(sh_trajectory_value(t, 0, [0i64].as_ptr(), 1, &mut v), ShStatus::Ok);
        assert_eq!(v, 1.0);
        assert_eq!(sh_trajectory_value(t, 9, [0i64].as_ptr(), 1, &mut v), ShStatus::InvalidArgument);
        assert_eq!(sh_trajectory_value(t, 1, [0i64, 0].as_ptr(), 2, &mut v), ShStatus::InvalidArgument);
        let mut m = 0.0;
        assert_eq!(sh_trajectory_sup_norm(t, 1, &mut m), ShStatus::Ok);
        assert!(m > 0.0);
        sh_trajectory_free(t);

        let mut sup = [0.0; 3];
        assert_eq!(sh_exact_second_moment_sup(p, sup.as_mut_ptr(), 3), ShStatus::Ok);
        assert_eq!(sup[0], 1.0);
        assert_eq!(sup[1], 1.0);

        let mut need = 0;
        assert_eq!(sh_problem_config(p, ptr::null_mut(), 0, &mut need), ShStatus::BufferTooSmall);
        let mut buf = vec![0u8; need];
        assert_eq!(sh_problem_config(p, buf.as_mut_ptr().cast(), need, &mut need), ShStatus::Ok);
        let text = CStr::from_bytes_with_nul(&buf).unwrap().to_str().unwrap();
        assert!(text.contains("\"seed\": 9"));
        sh_problem_free(p);

        let bad = CString::new(r#"{"sigma": {"kind": "affine", "nu": 1.0, "c": 1.0}}"#).unwrap();
        assert_eq!(sh_problem_new(bad.as_ptr(), &mut p), ShStatus::InvalidArgument);
        assert!(last_error().contains("domain"));
        let mut d = ptr::null_mut();
        assert_eq!(sh_problem_new(ptr::null(), &mut d), ShStatus::Ok);
        sh_problem_free(d);
    }
}

use std::ffi::{CStr, CString};
use std::ptr;

use shapelab_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(shapelab_last_error()) }.to_string_lossy().into_owned()
}

fn mesh(domain: &str, h: f64) -> *mut ShapelabMesh {
    let spec = CString::new(domain).unwrap();
    let mut m = ptr::null_mut();
    let st = unsafe { shapelab_mesh_build(spec.as_ptr(), h, &mut m) };
    assert_eq!(st, ShapelabStatus::Ok, "{}", last_error());
    m
}

#[test]
fn disk_round_trip_through_handles() {
    let m = mesh(r#"{"kind": "planar", "rho0": 1.0}"#, 0.08);
    unsafe {
        let (mut nv, mut nt) = (0usize, 0usize);
        assert_eq!(shapelab_mesh_counts(m, &mut nv, &mut nt, ptr::null_mut()), ShapelabStatus::Ok);
        assert!(nv > 100 && nt > nv);
        let mut area = 0.0;
        assert_eq!(shapelab_mesh_volume(m, &mut area), ShapelabStatus::Ok);
        assert!((area - std::f64::consts::PI).abs() < 1e-2);

        let mut s = ptr::null_mut();
        assert_eq!(shapelab_solve(m, ptr::null(), &mut s), ShapelabStatus::Ok, "{}", last_error());
        let (mut mu2, mut mult) = (0.0, 0usize);
        assert_eq!(shapelab_spectrum_mu2(s, &mut mu2, &mut mult), ShapelabStatus::Ok);
        let mut exact = 0.0;
        assert_eq!(shapelab_mu2_ball(2, &mut exact), ShapelabStatus::Ok);
        assert!((mu2 - exact).abs() / exact < 5e-3, "{mu2} vs {exact}");
        assert_eq!(mult, 2);

        // Size query, then a short buffer, then the real copy.
        let mut len = 0usize;
        assert_eq!(shapelab_spectrum_mode(s, 0, ptr::null_mut(), &mut len), ShapelabStatus::Ok);
        let mut short = vec![0.0; len - 1];
        let mut cap = short.len();
        assert_eq!(shapelab_spectrum_mode(s, 0, short.as_mut_ptr(), &mut cap), ShapelabStatus::BufferTooSmall);
        assert_eq!(cap, len);
        let mut v = vec![0.0; len];
        assert_eq!(shapelab_spectrum_mode(s, 1, v.as_mut_ptr(), &mut cap), ShapelabStatus::Ok);
        assert!(v.iter().any(|x| *x != 0.0));
        assert_eq!(shapelab_spectrum_mode(s, 2, v.as_mut_ptr(), &mut cap), ShapelabStatus::Config);

        // Dilation by V = x: μ₂ scales like t⁻², so the derivative is −2μ₂.
        let field = CString::new(r#"{"kind": "dilation"}"#).unwrap();
        let mut d = 0.0;
        assert_eq!(shapelab_shape_derivative(m, s, field.as_ptr(), &mut d), ShapelabStatus::Ok, "{}", last_error());
        assert!((d + 2.0 * mu2).abs() < 2e-2 * mu2, "{d}");

        let (mut bound, mut ok) = (0.0, false);
        assert_eq!(shapelab_weinberger_bound(m, 1.0, mu2, 1e-2, &mut bound, &mut ok), ShapelabStatus::Ok, "{}", last_error());
        assert!(ok && (bound - exact).abs() < 1e-2 * exact);

        let mut json_len = 0usize;
        assert_eq!(shapelab_mesh_to_json(m, ptr::null_mut(), &mut json_len), ShapelabStatus::Ok);
        let mut buf = vec![0u8; json_len];
        assert_eq!(shapelab_mesh_to_json(m, buf.as_mut_ptr().cast(), &mut json_len), ShapelabStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(shapelab_mesh_from_json(buf.as_ptr().cast(), &mut back), ShapelabStatus::Ok, "{}", last_error());
        let mut nv2 = 0usize;
        shapelab_mesh_counts(back, &mut nv2, ptr::null_mut(), ptr::null_mut());
        assert_eq!(nv2, nv);

        shapelab_mesh_free(back);
        shapelab_spectrum_free(s);
        shapelab_mesh_free(m);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(shapelab_mesh_build(ptr::null(), 0.1, &mut m), ShapelabStatus::NullPointer);
        assert!(last_error().contains("domain_json"));

        let bad = CString::new(r#"{"kind": "planar", "rho0": 1.0, "wobble": 2}"#).unwrap();
        assert_eq!(shapelab_mesh_build(bad.as_ptr(), 0.1, &mut m), ShapelabStatus::Config);
        assert!(last_error().contains("wobble"), "{}", last_error());
        assert!(m.is_null());

        let mut x = 0.0;
        assert_eq!(shapelab_mu2_ball(0, &mut x), ShapelabStatus::Config);
        assert!(!last_error().is_empty());
        assert_eq!(shapelab_mu2_ball(1, &mut x), ShapelabStatus::Ok);
        assert!(last_error().is_empty());
        assert!((x - 0.25 * std::f64::consts::PI.powi(2)).abs() < 1e-12);

        assert_eq!(shapelab_cylinder_mu2(2.0, 2.0 * std::f64::consts::PI, &mut x), ShapelabStatus::Ok);
        assert!((x - std::f64::consts::PI.powi(2) / 16.0).abs() < 1e-12);

        // Freeing null is a no-op.
        shapelab_mesh_free(ptr::null_mut());
        shapelab_spectrum_free(ptr::null_mut());
        assert!(!CStr::from_ptr(shapelab_version()).to_bytes().is_empty());
    }
}

#[test]
fn weinberger_volume_mismatch_is_a_precondition_failure() {
    let m = mesh(r#"{"kind": "straight_cylinder", "r": 1.0, "L": 6.283185307179586}"#, 0.15);
    let (mut bound, mut ok) = (0.0, false);
    let st = unsafe { shapelab_weinberger_bound(m, 2.0, 1.0, 1e-4, &mut bound, &mut ok) };
    assert_eq!(st, ShapelabStatus::Precondition);
    unsafe { shapelab_mesh_free(m) };
}

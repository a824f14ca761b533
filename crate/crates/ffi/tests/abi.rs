use std::ffi::{c_char, c_int, CStr, CString};
use std::ptr;

use idfield::bench::{ExperimentConfig, Method, MethodSetup};
use idfield::simulate::{sample_field, seeded_rng, DEFAULT_MAX_CELLS};
use idfield_ffi::*;

const SMALL: &str = r#"{"window": [30, 30], "grid_points": 256, "u_points": 513}"#;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { idf_last_error(buf.as_mut_ptr(), buf.len()) };
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
    assert_eq!(s.len(), n.min(511));
    s
}

fn config(json: &str) -> *mut IdfConfig {
    let text = CString::new(json).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { idf_config_from_json(text.as_ptr(), &mut cfg) }, IdfStatus::Ok);
    cfg
}

#[test]
fn simulate_and_estimate_round_trip() {
    let cfg = config(SMALL);
    let mut sample = ptr::null_mut();
    assert_eq!(unsafe { idf_simulate(cfg, 7, 2, &mut sample) }, IdfStatus::Ok);
    let mut len = 0usize;
    assert_eq!(unsafe { idf_sample_len(sample, &mut len) }, IdfStatus::Ok);
    assert_eq!(len, 900);
    let mut vals = vec![0.0; len];
    assert_eq!(unsafe { idf_sample_values(sample, vals.as_mut_ptr(), len) }, IdfStatus::Ok);

    // same stream through the Rust API
    let rcfg = ExperimentConfig::from_json(SMALL).unwrap();
    let direct = sample_field(
        &rcfg.kernel_model().unwrap(),
        &rcfg.jump_law.build().unwrap(),
        &rcfg.window,
        rcfg.mesh,
        &mut seeded_rng(7, 2),
        DEFAULT_MAX_CELLS,
    )
    .unwrap();
    assert_eq!(direct.values(), &vals[..]);

    for m in ["plugin", "fourier", "onb"] {
        let method = CString::new(m).unwrap();
        let mut est = ptr::null_mut();
        assert_eq!(unsafe { idf_estimate(cfg, method.as_ptr(), sample, &mut est) }, IdfStatus::Ok, "{}", last_error());
        let mut n = 0usize;
        assert_eq!(unsafe { idf_estimate_len(est, &mut n) }, IdfStatus::Ok);
        assert_eq!(n, 256);
        let (mut x, mut g, mut t) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        assert_eq!(unsafe { idf_estimate_copy(est, x.as_mut_ptr(), g.as_mut_ptr(), t.as_mut_ptr(), n) }, IdfStatus::Ok);
        let mut mse = 0.0;
        assert_eq!(unsafe { idf_estimate_mse(est, &mut mse) }, IdfStatus::Ok);

        let setup = MethodSetup::new(&rcfg, Method::parse(m).unwrap()).unwrap();
        let want = setup.estimate(&direct).unwrap();
        assert_eq!(want.values(), &g[..]);
        assert_eq!(setup.g0_true.values(), &t[..]);
        assert_eq!(want.grid().nodes(), x);
        assert_eq!(setup.mse(&want).unwrap(), mse);
        assert_eq!(unsafe { idf_estimate_copy(est, ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), n) }, IdfStatus::Ok);
        assert_eq!(
            unsafe { idf_estimate_copy(est, x.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), n - 1) },
            IdfStatus::InvalidArgument
        );
        unsafe { idf_estimate_free(est) };
    }
    unsafe {
        idf_sample_free(sample);
        idf_config_free(cfg);
    }
}

#[test]
fn caller_owned_sample() {
    let cfg = config(SMALL);
    let dims = [30usize, 30];
    let vals: Vec<f64> = (0..900).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect();
    let mut sample = ptr::null_mut();
    assert_eq!(unsafe { idf_sample_from_values(dims.as_ptr(), 2, vals.as_ptr(), 1, &mut sample) }, IdfStatus::Ok);
    let mut back = vec![0.0; 900];
    assert_eq!(unsafe { idf_sample_values(sample, back.as_mut_ptr(), 900) }, IdfStatus::Ok);
    assert_eq!(back, vals);
    assert_eq!(unsafe { idf_sample_values(sample, back.as_mut_ptr(), 899) }, IdfStatus::InvalidArgument);
    let method = CString::new("fourier").unwrap();
    let mut est = ptr::null_mut();
    assert_eq!(unsafe { idf_estimate(cfg, method.as_ptr(), sample, &mut est) }, IdfStatus::Ok);
    unsafe {
        idf_estimate_free(est);
        idf_sample_free(sample);
        idf_config_free(cfg);
    }
}

#[test]
fn error_codes_and_messages() {
    let bad = CString::new(r#"{"colour": 1}"#).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { idf_config_from_json(bad.as_ptr(), &mut cfg) }, IdfStatus::Config);
    assert!(cfg.is_null());
    assert!(last_error().contains("colour"));

    // truncation keeps the terminator and reports the full length
    let mut tiny = [0 as c_char; 4];
    let full = unsafe { idf_last_error(tiny.as_mut_ptr(), tiny.len()) };
    assert!(full > 3);
    assert_eq!(tiny[3], 0);
    assert_eq!(unsafe { idf_last_error(ptr::null_mut(), 0) }, full);

    assert_eq!(unsafe { idf_config_from_json(ptr::null(), &mut cfg) }, IdfStatus::InvalidArgument);
    assert_eq!(unsafe { idf_config_default(ptr::null_mut()) }, IdfStatus::InvalidArgument);

    let cfg = config(SMALL);
    let mut sample = ptr::null_mut();
    assert_eq!(unsafe { idf_simulate(cfg, 1, 0, &mut sample) }, IdfStatus::Ok);
    assert!(last_error().is_empty());
    let method = CString::new("spline").unwrap();
    let mut est = ptr::null_mut();
    assert_eq!(unsafe { idf_estimate(cfg, method.as_ptr(), sample, &mut est) }, IdfStatus::Config);
    assert_eq!(unsafe { idf_estimate(cfg, method.as_ptr(), ptr::null(), &mut est) }, IdfStatus::InvalidArgument);

    let pinned = config(r#"{"window": [30, 30], "pivot": 0.2}"#);
    let onb = CString::new("onb").unwrap();
    assert_eq!(unsafe { idf_estimate(pinned, onb.as_ptr(), sample, &mut est) }, IdfStatus::Numeric);
    assert!(last_error().contains("not maximal"), "{}", last_error());

    let dims = [3usize, 3];
    let vals = [0.0; 9];
    let mut s2 = ptr::null_mut();
    assert_eq!(unsafe { idf_sample_from_values(dims.as_ptr(), 2, vals.as_ptr(), 0, &mut s2) }, IdfStatus::Numeric);
    unsafe {
        idf_sample_free(sample);
        idf_config_free(cfg);
        idf_config_free(pinned);
        idf_config_free(ptr::null_mut());
        idf_sample_free(ptr::null_mut());
        idf_estimate_free(ptr::null_mut());
    }
}

#[test]
fn contraction_through_abi() {
    let c = [1.3, 0.2, 0.1, 0.1];
    let (mut e, mut ok): (f64, c_int) = (0.0, 0);
    assert_eq!(unsafe { idf_contraction_factor(c.as_ptr(), ptr::null(), 4, 1.0, 1, &mut e, &mut ok) }, IdfStatus::Ok);
    let oracle: f64 = [0.2f64, 0.1, 0.1].iter().map(|f| (f / 1.3).sqrt()).sum();
    assert!((e - oracle).abs() < 1e-14);
    assert_eq!(ok, 1);
    let odd = [1.0, -1.0];
    assert_eq!(unsafe { idf_contraction_factor(odd.as_ptr(), ptr::null(), 2, 1.0, 1, &mut e, &mut ok) }, IdfStatus::Ok);
    assert_eq!(ok, 0);
    assert_eq!(
        unsafe { idf_contraction_factor(c.as_ptr(), ptr::null(), 4, 0.5, 1, &mut e, &mut ok) },
        IdfStatus::Numeric
    );
    assert_eq!(
        unsafe { idf_contraction_factor(ptr::null(), ptr::null(), 4, 1.0, 1, &mut e, &mut ok) },
        IdfStatus::InvalidArgument
    );
    let v = unsafe { CStr::from_ptr(idf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use starris_ffi::*;

const SMALL: &str = "N = 6\nU_A = 1\nU_B = 1\nM = 2\n[solver]\nmax_bcd_iters = 20\nstarts = 2\n";

fn last_error() -> String {
    let p = starris_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn small_config() -> *mut StarrisConfig {
    let text = CString::new(SMALL).unwrap();
    let mut cfg = ptr::null_mut();
    let st = unsafe { starris_config_from_toml(text.as_ptr(), StarrisPreset::Desk, &mut cfg) };
    assert_eq!(st, StarrisStatus::Ok);
    cfg
}

#[test]
fn solve_round_trip() {
    let cfg = small_config();
    let mut dims = [0usize; 4];
    assert_eq!(unsafe { starris_config_dims(cfg, dims.as_mut_ptr()) }, StarrisStatus::Ok);
    assert_eq!(dims, [2, 6, 2, 8]);

    let mut rep = ptr::null_mut();
    assert_eq!(unsafe { starris_solve(cfg, StarrisScheme::Proposed, 3, &mut rep) }, StarrisStatus::Ok);
    assert!(starris_last_error().is_null());

    let mut rate = f64::NAN;
    let mut iters = 0usize;
    unsafe {
        assert_eq!(starris_report_sum_rate(rep, &mut rate), StarrisStatus::Ok);
        assert_eq!(starris_report_iterations(rep, &mut iters), StarrisStatus::Ok);
    }
    assert!(rate.is_finite() && rate > 0.0);

    let mut len = 0usize;
    unsafe {
        assert_eq!(starris_report_trace(rep, ptr::null_mut(), 0, &mut len), StarrisStatus::Ok);
    }
    assert_eq!(len, iters);
    let mut trace = vec![0.0; len];
    unsafe {
        assert_eq!(starris_report_trace(rep, trace.as_mut_ptr(), len, &mut len), StarrisStatus::Ok);
    }
    assert_eq!(*trace.last().unwrap(), rate);
    assert!(trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));

    let mut power = [0.0; 2];
    unsafe {
        assert_eq!(starris_report_power(rep, power.as_mut_ptr(), 2, &mut len), StarrisStatus::Ok);
    }
    assert_eq!(len, 2);
    assert!(power.iter().all(|&p| p > 0.0 && p <= 0.1 + 1e-15));

    unsafe {
        starris_report_free(rep);
        starris_config_free(cfg);
    }
}

#[test]
fn same_seed_same_answer() {
    let cfg = small_config();
    let solve = || {
        let mut rep = ptr::null_mut();
        let mut rate = 0.0;
        unsafe {
            assert_eq!(starris_solve(cfg, StarrisScheme::Fstar, 1, &mut rep), StarrisStatus::Ok);
            starris_report_sum_rate(rep, &mut rate);
            starris_report_free(rep);
        }
        rate
    };
    assert_eq!(solve().to_bits(), solve().to_bits());
    unsafe { starris_config_free(cfg) };
}

#[test]
fn short_buffer_is_rejected() {
    let cfg = small_config();
    let mut rep = ptr::null_mut();
    let mut buf = [0.0; 1];
    let mut len = 0;
    unsafe {
        starris_solve(cfg, StarrisScheme::RabmRsv, 0, &mut rep);
        assert_eq!(starris_report_power(rep, buf.as_mut_ptr(), 1, &mut len), StarrisStatus::InvalidArgument);
        assert_eq!(len, 2);
        starris_report_free(rep);
        starris_config_free(cfg);
    }
    assert!(last_error().contains("2 needed"));
}

#[test]
fn error_codes() {
    let mut cfg = ptr::null_mut();
    let bad = CString::new("N = 2\nQ = 1\n").unwrap();
    assert_eq!(
        unsafe { starris_config_from_toml(bad.as_ptr(), StarrisPreset::Paper, &mut cfg) },
        StarrisStatus::ConfigInvalid
    );
    assert!(cfg.is_null());
    assert!(last_error().contains("Q >= 2"));

    let garbage = CString::new("N = [").unwrap();
    assert_eq!(
        unsafe { starris_config_from_toml(garbage.as_ptr(), StarrisPreset::Paper, &mut cfg) },
        StarrisStatus::ConfigParse
    );
    assert!(last_error().contains("line 1"));

    let bytes = [0xffu8, 0];
    assert_eq!(
        unsafe { starris_config_from_toml(bytes.as_ptr().cast(), StarrisPreset::Paper, &mut cfg) },
        StarrisStatus::InvalidUtf8
    );

    assert_eq!(
        unsafe { starris_config_from_toml(ptr::null(), StarrisPreset::Paper, &mut cfg) },
        StarrisStatus::NullPointer
    );
    let mut rate = 0.0;
    assert_eq!(unsafe { starris_report_sum_rate(ptr::null(), &mut rate) }, StarrisStatus::NullPointer);
    assert_eq!(unsafe { starris_config_set_seed(ptr::null_mut(), 1) }, StarrisStatus::NullPointer);
    // freeing NULL is a no-op
    unsafe {
        starris_config_free(ptr::null_mut());
        starris_report_free(ptr::null_mut());
    }
}

#[test]
fn preset_handles() {
    let mut cfg = ptr::null_mut();
    let mut dims = [0usize; 4];
    unsafe {
        assert_eq!(starris_config_new(StarrisPreset::Paper, &mut cfg), StarrisStatus::Ok);
        assert_eq!(starris_config_set_seed(cfg, 42), StarrisStatus::Ok);
        starris_config_dims(cfg, dims.as_mut_ptr());
        starris_config_free(cfg);
    }
    assert_eq!(dims, [4, 64, 8, 8]);
    let v = unsafe { CStr::from_ptr(starris_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/starris.h");
    let text = std::fs::read_to_string(&header).expect("build script writes the header");
    for sym in [
        "starris_config_new",
        "starris_config_from_toml",
        "starris_config_free",
        "starris_solve",
        "starris_report_trace",
        "starris_last_error",
        "typedef struct StarrisReport StarrisReport;",
        "STARRIS_STATUS_NULL_POINTER = 1",
    ] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
    for (lang, std) in [("c", "-std=c99"), ("c++", "-std=c++11")] {
        let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", std, "-x", lang]).arg(&header).output()
        else {
            eprintln!("no C compiler found; skipping syntax check");
            return;
        };
        assert!(out.status.success(), "{lang}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

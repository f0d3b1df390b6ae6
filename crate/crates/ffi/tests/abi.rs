use std::ffi::{CStr, CString};
use std::ptr;

use stalign_ffi::*;

const DB: &str = r#"{"num_clips":2,"entities":["M"],"values":["up","right"],
"schema":[{"name":"climb","arity":2,"kind":"evolving"},{"name":"walk","arity":2,"kind":"evolving"}],
"facts":[{"prob":0.9,"pred":"climb","time":1,"args":["M","up"]},
         {"prob":0.8,"pred":"walk","time":2,"args":["M","right"]}]}"#;

fn last_error() -> String {
    let p = sa_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

struct Handles {
    db: *mut SaDb,
    spec: *mut SaSpec,
}

impl Handles {
    fn new(spec: &str) -> Self {
        let json = CString::new(DB).unwrap();
        let text = CString::new(spec).unwrap();
        let mut db = ptr::null_mut();
        let mut sp = ptr::null_mut();
        unsafe {
            assert_eq!(sa_db_from_json(json.as_ptr(), &mut db), SaStatus::Ok);
            assert_eq!(sa_spec_parse(text.as_ptr(), db, &mut sp), SaStatus::Ok);
        }
        Handles { db, spec: sp }
    }
}

impl Drop for Handles {
    fn drop(&mut self) {
        unsafe {
            sa_spec_free(self.spec);
            sa_db_free(self.db);
        }
    }
}

#[test]
fn score_and_gradient_of_the_until_fixture() {
    let h = Handles::new("climb(M,_) U walk(M,right)");
    unsafe {
        assert_eq!(sa_db_num_facts(h.db), 2);
        let mut a = ptr::null_mut();
        assert_eq!(sa_align(h.db, h.spec, 5, SaMode::Suffix as i32, &mut a), SaStatus::Ok);
        // both facts must hold: 0.9 * 0.8, with partials 0.8 and 0.9
        assert!((sa_alignment_score(a) - 0.72).abs() < 1e-12);
        let mut g = [0.0; 2];
        assert_eq!(sa_alignment_grad(a, g.as_mut_ptr(), 2), SaStatus::Ok);
        assert!((g[0] - 0.8).abs() < 1e-12 && (g[1] - 0.9).abs() < 1e-12);
        let mut small = [0.0; 1];
        assert_eq!(sa_alignment_grad(a, small.as_mut_ptr(), 1), SaStatus::BufferTooSmall);
        sa_alignment_free(a);

        let mut exact = 0.0;
        assert_eq!(sa_oracle_exact(h.db, h.spec, SaMode::Suffix as i32, &mut exact), SaStatus::Ok);
        assert!((exact - 0.72).abs() < 1e-12);
    }
}

#[test]
fn parse_errors_are_reported() {
    let json = CString::new(DB).unwrap();
    let bad = CString::new("climb(M,_) U U").unwrap();
    unsafe {
        let mut db = ptr::null_mut();
        assert_eq!(sa_db_from_json(json.as_ptr(), &mut db), SaStatus::Ok);
        let mut sp = ptr::null_mut();
        assert_eq!(sa_spec_parse(bad.as_ptr(), db, &mut sp), SaStatus::Parse);
        assert!(sp.is_null());
        assert!(last_error().contains("syntax error"));

        let junk = CString::new("{").unwrap();
        let mut db2 = ptr::null_mut();
        assert_eq!(sa_db_from_json(junk.as_ptr(), &mut db2), SaStatus::Parse);
        assert!(db2.is_null());
        sa_db_free(db);
    }
}

#[test]
fn null_and_invalid_arguments() {
    let h = Handles::new("climb(M,up)");
    unsafe {
        let mut out = 0.0;
        assert_eq!(sa_oracle_exact(ptr::null(), h.spec, 0, &mut out), SaStatus::NullPointer);
        assert_eq!(sa_oracle_exact(h.db, h.spec, 7, &mut out), SaStatus::InvalidArgument);
        assert!(last_error().contains("mode"));
        assert_eq!(sa_db_from_json(ptr::null(), &mut ptr::null_mut()), SaStatus::NullPointer);
        assert!(sa_alignment_score(ptr::null()).is_nan());
        assert_eq!(sa_db_num_facts(ptr::null()), 0);
        sa_db_free(ptr::null_mut());
        sa_spec_free(ptr::null_mut());
        sa_alignment_free(ptr::null_mut());

        let bytes = [0xffu8, 0];
        let mut sp = ptr::null_mut();
        assert_eq!(sa_spec_parse(bytes.as_ptr().cast(), h.db, &mut sp), SaStatus::InvalidUtf8);
    }
}

#[test]
fn check_bool_needs_a_deterministic_database() {
    let h = Handles::new("climb(M,up)");
    unsafe {
        let mut b = false;
        assert_eq!(sa_check_bool(h.db, h.spec, SaMode::Suffix as i32, &mut b), SaStatus::Eval);
        assert!(last_error().contains("deterministic"));
    }
}

#[test]
fn interval_mode_rejects_next() {
    let h = Handles::new("X climb(M,up)");
    unsafe {
        let mut a = ptr::null_mut();
        assert_eq!(sa_align(h.db, h.spec, 0, SaMode::Interval as i32, &mut a), SaStatus::Eval);
        assert!(a.is_null());
    }
}

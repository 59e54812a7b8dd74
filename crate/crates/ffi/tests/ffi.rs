use std::ffi::{CStr, CString};
use std::ptr;

use qgraph_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(qg_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn interval_round_trip() {
    let from = [0usize];
    let to = [1usize];
    let lengths = [std::f64::consts::PI];
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(qg_graph_new(2, from.as_ptr(), to.as_ptr(), lengths.as_ptr(), 1, &mut g), QgStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(qg_spectrum_solve(g, 20.0, true, &mut s), QgStatus::Ok);
        let mut n = 0;
        assert_eq!(qg_spectrum_len(s, &mut n), QgStatus::Ok);
        assert_eq!(n, 20);
        let mut ev = vec![0.0; n];
        assert_eq!(qg_spectrum_eigenvalues(s, ev.as_mut_ptr(), n), QgStatus::Ok);
        for (i, l) in ev.iter().enumerate() {
            assert!((l - (i + 1) as f64).abs() < 1e-10);
        }
        let mut ratio = 0.0;
        assert_eq!(qg_spectrum_weyl_ratio(g, s, &mut ratio), QgStatus::Ok);
        assert!((ratio - 1.0).abs() < 1e-12);
        qg_spectrum_free(s);
        qg_graph_free(g);
    }
}

#[test]
fn star_levels_and_operator() {
    let lengths = [1.0; 3];
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(qg_graph_star(lengths.as_ptr(), 3, &mut g), QgStatus::Ok);
        let mut b = 0;
        assert_eq!(qg_graph_bond_count(g, &mut b), QgStatus::Ok);
        assert_eq!(b, 3);

        let mut phases = [0.0; 6];
        assert_eq!(qg_graph_eigenphases(g, 0.4, phases.as_mut_ptr(), 6), QgStatus::Ok);
        assert!(phases.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(qg_graph_eigenphases(g, 0.4, phases.as_mut_ptr(), 5), QgStatus::BufferTooSmall);
        assert!(last_error().contains("need 6"));

        let (mut re, mut im) = ([0.0; 36], [0.0; 36]);
        assert_eq!(qg_graph_evolution_operator(g, 0.0, re.as_mut_ptr(), im.as_mut_ptr(), 36), QgStatus::Ok);
        // S₀ entry for reflection back into the same bond at the centre
        assert!(im.iter().all(|&x| x == 0.0));
        assert!(re.iter().any(|&x| (x + 1.0 / 3.0).abs() < 1e-15));

        let mut s = ptr::null_mut();
        assert_eq!(qg_spectrum_solve(g, 5.0, false, &mut s), QgStatus::Ok);
        let mut k = 0;
        assert_eq!(qg_spectrum_level_count(s, &mut k), QgStatus::Ok);
        let mut l = vec![0.0; k];
        let mut m = vec![0usize; k];
        assert_eq!(qg_spectrum_levels(s, l.as_mut_ptr(), m.as_mut_ptr(), k), QgStatus::Ok);
        let half = std::f64::consts::FRAC_PI_2;
        assert!((l[0] - half).abs() < 1e-9 && m[0] == 2);
        qg_spectrum_free(s);
        qg_graph_free(g);
    }
}

#[test]
fn spec_files_and_errors() {
    let path = CString::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/graphs/star3.toml")).unwrap();
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(qg_graph_from_spec(path.as_ptr(), &mut g), QgStatus::Ok);
        assert!(last_error().is_empty());
        let mut s = ptr::null_mut();
        assert_eq!(qg_spectrum_solve(g, -1.0, false, &mut s), QgStatus::InvalidArgument);
        assert!(s.is_null());
        assert_eq!(qg_graph_bond_count(ptr::null(), ptr::null_mut()), QgStatus::NullPointer);
        qg_graph_free(g);
        qg_graph_free(ptr::null_mut());

        let missing = CString::new("/nonexistent/graph.toml").unwrap();
        let mut h = ptr::null_mut();
        assert_ne!(qg_graph_from_spec(missing.as_ptr(), &mut h), QgStatus::Ok);
        assert!(h.is_null());
    }
}

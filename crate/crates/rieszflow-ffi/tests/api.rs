use std::ffi::CStr;
use std::process::Command;
use std::ptr;

use rieszflow_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(rf_last_error()) }
        .to_string_lossy()
        .into_owned()
}

struct Setup {
    params: *mut RfParams,
    grid: *mut RfGrid,
    op: *mut RfOperator,
}

impl Setup {
    fn new(m: f64) -> Self {
        let mut params = ptr::null_mut();
        let mut grid = ptr::null_mut();
        let mut op = ptr::null_mut();
        unsafe {
            assert_eq!(
                rf_params_new(1, 0.4, 2.0, m, 1.0, 1.0, &mut params),
                RfStatus::Ok
            );
            assert_eq!(rf_grid_new(1, 256, 3.0, &mut grid), RfStatus::Ok);
            assert_eq!(
                rf_operator_build(grid, 0.2, ptr::null(), &mut op),
                RfStatus::Ok
            );
        }
        Setup { params, grid, op }
    }
}

impl Drop for Setup {
    fn drop(&mut self) {
        unsafe {
            rf_operator_free(self.op);
            rf_grid_free(self.grid);
            rf_params_free(self.params);
        }
    }
}

#[test]
fn invalid_parameters_report_the_constraint() {
    let mut params = ptr::null_mut();
    let code = unsafe { rf_params_new(1, 0.6, 2.0, 3.0, 1.0, 1.0, &mut params) };
    assert_eq!(code, RfStatus::Parameter);
    assert!(params.is_null());
    assert!(last_error().contains("s*p must be < N"), "{}", last_error());
}

#[test]
fn null_handles_are_rejected() {
    let mut e = RfExponents::default();
    assert_eq!(
        unsafe { rf_params_exponents(ptr::null(), &mut e) },
        RfStatus::NullPointer
    );
    assert!(last_error().contains("params"));
    assert_eq!(unsafe { rf_grid_len(ptr::null()) }, 0);
    unsafe { rf_density_free(ptr::null_mut()) };
}

#[test]
fn exponents_match_closed_forms() {
    let s = Setup::new(3.0);
    let mut e = RfExponents::default();
    assert_eq!(
        unsafe { rf_params_exponents(s.params, &mut e) },
        RfStatus::Ok
    );
    assert_eq!(e.p_conj, 2.0);
    assert!((e.m_c - 1.2).abs() < 1e-15);
    assert!((e.p_star - 2.0 / 0.2).abs() < 1e-12);
    assert_eq!(last_error(), "");
}

#[test]
fn density_round_trip_and_buffer_protocol() {
    let s = Setup::new(3.0);
    let mut d = ptr::null_mut();
    unsafe {
        assert_eq!(
            rf_density_profile(s.grid, RfProfile::Bump, 1.0, 2.0, &mut d),
            RfStatus::Ok
        );
        let mut mass = 0.0;
        assert_eq!(rf_density_mass(d, &mut mass), RfStatus::Ok);
        assert!((mass - 2.0).abs() < 1e-12);
        let mut len = 0;
        assert_eq!(
            rf_density_values(d, ptr::null_mut(), 0, &mut len),
            RfStatus::BufferTooSmall
        );
        assert_eq!(len, rf_grid_len(s.grid));
        let mut buf = vec![0.0; len];
        assert_eq!(
            rf_density_values(d, buf.as_mut_ptr(), len, &mut len),
            RfStatus::Ok
        );
        let mut copy = ptr::null_mut();
        assert_eq!(
            rf_density_new(s.grid, buf.as_ptr(), len, &mut copy),
            RfStatus::Ok
        );
        let (mut a, mut b) = (RfEnergy::default(), RfEnergy::default());
        assert_eq!(rf_free_energy(s.params, s.op, d, &mut a), RfStatus::Ok);
        assert_eq!(rf_free_energy(s.params, s.op, copy, &mut b), RfStatus::Ok);
        assert_eq!(a.free_energy, b.free_energy);
        assert!(a.lambda_star > 0.0);
        buf[3] = -1.0;
        let mut bad = ptr::null_mut();
        assert_eq!(
            rf_density_new(s.grid, buf.as_ptr(), len, &mut bad),
            RfStatus::Domain
        );
        assert!(bad.is_null());
        rf_density_free(copy);
        rf_density_free(d);
    }
}

#[test]
fn steady_solve_and_relaxation() {
    let s = Setup::new(3.0);
    unsafe {
        let mut rep = ptr::null_mut();
        assert_eq!(
            rf_steady_solve(s.params, s.op, ptr::null(), &mut rep),
            RfStatus::Ok
        );
        let mut sum = std::mem::zeroed::<RfSteadySummary>();
        assert_eq!(rf_steady_summary(rep, &mut sum), RfStatus::Ok);
        assert!(sum.converged && sum.monotone && !sum.edge_supported);
        assert_eq!(sum.stationarity, RfStationarity::Minimizer);
        assert!(sum.el_residual < 1e-6);

        let mut need = 0;
        assert_eq!(
            rf_steady_json(rep, ptr::null_mut(), 0, &mut need),
            RfStatus::BufferTooSmall
        );
        let mut text = vec![0u8; need];
        assert_eq!(
            rf_steady_json(rep, text.as_mut_ptr().cast(), need, &mut need),
            RfStatus::Ok
        );
        let json: serde_json::Value =
            serde_json::from_str(CStr::from_bytes_with_nul(&text).unwrap().to_str().unwrap())
                .unwrap();
        assert_eq!(json["converged"], true);

        let mut rho = ptr::null_mut();
        assert_eq!(rf_steady_density(rep, &mut rho), RfStatus::Ok);
        let mut cfg = rf_evolve_config_default();
        cfg.t_end = 0.02;
        let mut run = std::mem::zeroed::<RfRunSummary>();
        let mut fin = ptr::null_mut();
        assert_eq!(
            rf_evolve(s.params, s.op, rho, &cfg, ptr::null(), &mut run, &mut fin),
            RfStatus::Ok
        );
        assert_eq!(run.status, RfRunStatus::Completed);
        assert!(run.mass_drift < 1e-10 && run.energy_violations == 0);
        assert!(!fin.is_null());

        cfg.fixed_dt = 1.0;
        assert_eq!(
            rf_evolve(
                s.params,
                s.op,
                rho,
                &cfg,
                ptr::null(),
                &mut run,
                ptr::null_mut()
            ),
            RfStatus::Stability
        );
        rf_density_free(fin);
        rf_density_free(rho);
        rf_steady_free(rep);
    }
}

#[test]
fn regime_errors_and_critical_mass() {
    let s = Setup::new(1.2);
    unsafe {
        let mut rep = ptr::null_mut();
        assert_eq!(
            rf_steady_solve(s.params, s.op, ptr::null(), &mut rep),
            RfStatus::Regime
        );
        let (mut mc, mut h) = (0.0, 0.0);
        assert_eq!(
            rf_critical_mass(s.params, s.op, ptr::null(), &mut mc, &mut h),
            RfStatus::Ok
        );
        let mut e = RfExponents::default();
        rf_params_exponents(s.params, &mut e);
        // M_c = (p*/(χ H*))^{N/(s p′)}
        let want = (e.p_star / h).powf(1.0 / (0.4 * e.p_conj));
        assert!((mc / want - 1.0).abs() < 1e-12);
        let mut bad = rf_solver_config_default();
        bad.tau = 3.0;
        assert_eq!(
            rf_hls_extremal(s.params, s.op, &bad, &mut rep),
            RfStatus::Parameter
        );
    }
}

#[test]
fn operator_cache_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = std::ffi::CString::new(tmp.path().to_str().unwrap()).unwrap();
    let s = Setup::new(3.0);
    unsafe {
        for _ in 0..2 {
            let mut op = ptr::null_mut();
            assert_eq!(
                rf_operator_build(s.grid, 0.2, dir.as_ptr(), &mut op),
                RfStatus::Ok
            );
            rf_operator_free(op);
        }
    }
    assert!(std::fs::read_dir(tmp.path()).unwrap().count() >= 2);
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let root = env!("CARGO_MANIFEST_DIR");
    let header = format!("{root}/include/rieszflow.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in [
        "rf_params_new",
        "rf_steady_solve",
        "rf_evolve",
        "rf_last_error",
        "RF_STATUS_PANIC",
    ] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"rieszflow.h\"\nint main(void) {\n  RfParams *p = 0;\n  RfStatus st = rf_params_new(1, 0.4, 2.0, 3.0, 1.0, 1.0, &p);\n  rf_params_free(p);\n  return st == RF_STATUS_OK ? 0 : 1;\n}\n",
    )
    .unwrap();
    for (cc, std) in [("cc", "-std=c99"), ("c++", "-std=c++11")] {
        let mut cmd = Command::new(cc);
        if cc == "c++" {
            cmd.args(["-x", "c++"]);
        }
        match cmd
            .args([
                std,
                "-Wall",
                "-Werror",
                "-fsyntax-only",
                "-I",
                &format!("{root}/include"),
            ])
            .arg(&src)
            .output()
        {
            Ok(o) => assert!(
                o.status.success(),
                "{cc}: {}",
                String::from_utf8_lossy(&o.stderr)
            ),
            Err(e) => eprintln!("skipping {cc}: {e}"),
        }
    }
}

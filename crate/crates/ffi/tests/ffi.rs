use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use frost::estimation::Reconstructor;
use frost::observation::SensorLayout;
use frost::pipeline::{GridConfig, PipelineConfig, SamplingConfig};
use frost::rom::PODBasis;
use frost_ffi::*;

fn tiny() -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.grid = GridConfig { nx: 35, ny: 40 };
    cfg.solver.dt = 10.0;
    cfg.solver.t_final = 100.0;
    cfg.solver.stride = 2;
    cfg.sampling = SamplingConfig { count: 3, seed: 5, train: 2 };
    cfg.rom.n_max = 8;
    cfg
}

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        frost_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn pipeline_then_reconstruct_through_the_c_abi() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, serde_json::to_string(&tiny()).unwrap()).unwrap();
    let out = dir.path().join("out");
    let mut errs = [0.0f64; 4];
    let mut count = 0usize;
    let st = unsafe { frost_run_pipeline(cstr(&cfg_path).as_ptr(), cstr(&out).as_ptr(), errs.as_mut_ptr(), 4, &mut count) };
    assert_eq!(st, FrostStatus::Ok, "{}", last_error());
    assert_eq!(count, 1);
    assert!(errs[0].is_finite());

    unsafe {
        let mut grid = ptr::null_mut();
        assert_eq!(frost_grid_new(35, 40, &mut grid), FrostStatus::Ok);
        assert_eq!(frost_grid_cell_count(grid), 1400);

        let mut basis = ptr::null_mut();
        assert_eq!(frost_basis_load(cstr(&out.join("basis.from")).as_ptr(), &mut basis), FrostStatus::Ok);
        assert_eq!(frost_basis_field_len(basis), 1400);
        let modes = frost_basis_mode_count(basis);
        assert_eq!(modes, 8);
        let mut sigma = vec![0.0; modes];
        assert_eq!(frost_basis_singular_values(basis, sigma.as_mut_ptr(), modes), FrostStatus::Ok);
        assert!(sigma.windows(2).all(|p| p[0] >= p[1]));
        assert_eq!(frost_basis_singular_values(basis, sigma.as_mut_ptr(), modes + 1), FrostStatus::BufferTooSmall);

        let mut sensors = ptr::null_mut();
        let sensors_path = out.join("sensors.json");
        assert_eq!(frost_sensors_load(grid, cstr(&sensors_path).as_ptr(), &mut sensors), FrostStatus::Ok);
        let m = frost_sensors_count(sensors);
        assert_eq!(m, 360);

        let n = 4;
        let mut rec = ptr::null_mut();
        assert_eq!(frost_reconstructor_new(basis, sensors, n, &mut rec), FrostStatus::Ok);
        assert!(frost_reconstructor_smallest_singular_value(rec) > 0.0);

        let truth: Vec<f64> = (0..1400).map(|k| -10.0 + (k as f64 * 0.01).sin()).collect();
        let mut ell = vec![0.0; m];
        assert_eq!(frost_sensors_measure(sensors, truth.as_ptr(), truth.len(), ell.as_mut_ptr(), m), FrostStatus::Ok);
        let mut field = vec![0.0; 1400];
        assert_eq!(frost_reconstruct(rec, ell.as_ptr(), m, field.as_mut_ptr(), field.len()), FrostStatus::Ok);

        // same answer as the Rust API
        let b = PODBasis::load(&out.join("basis.from")).unwrap();
        let g = tiny().grid().unwrap();
        let w = SensorLayout::load(&sensors_path).unwrap().observer(&g).unwrap();
        let expected = Reconstructor::new(&b, &w, n).unwrap().reconstruct(&ell).unwrap().field;
        assert!(field.iter().zip(&expected).all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0)));

        let mut e = 0.0;
        assert_eq!(frost_relative_l2_error(truth.as_ptr(), field.as_ptr(), 1400, &mut e), FrostStatus::Ok);
        assert!(e.is_finite() && e >= 0.0);

        assert_eq!(frost_reconstruct(rec, ell.as_ptr(), m, field.as_mut_ptr(), 10), FrostStatus::BufferTooSmall);
        assert_eq!(frost_reconstruct(rec, ell.as_ptr(), m - 1, field.as_mut_ptr(), 1400), FrostStatus::DimensionMismatch);

        frost_reconstructor_free(rec);
        frost_sensors_free(sensors);
        frost_basis_free(basis);
        frost_grid_free(grid);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut grid = ptr::null_mut();
        assert_eq!(frost_grid_new(3, 3, &mut grid), FrostStatus::Geometry);
        assert!(grid.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(frost_grid_new(35, 40, ptr::null_mut()), FrostStatus::NullPointer);

        let mut basis = ptr::null_mut();
        let missing = CString::new("/nonexistent/basis.from").unwrap();
        assert_eq!(frost_basis_load(missing.as_ptr(), &mut basis), FrostStatus::Io);
        assert!(last_error().contains("I/O"));
        assert_eq!(frost_basis_load(ptr::null(), &mut basis), FrostStatus::NullPointer);

        let zero = [0.0, 0.0];
        let mut e = 0.0;
        assert_eq!(frost_relative_l2_error(zero.as_ptr(), zero.as_ptr(), 2, &mut e), FrostStatus::Undefined);

        let truth = [3.0, 4.0];
        let est = [3.0, 0.0];
        assert_eq!(frost_relative_l2_error(truth.as_ptr(), est.as_ptr(), 2, &mut e), FrostStatus::Ok);
        assert!((e - 80.0).abs() < 1e-12);
        assert_eq!(last_error(), "");

        // null handles are tolerated by the query and free functions
        assert_eq!(frost_grid_cell_count(ptr::null()), 0);
        assert!(frost_reconstructor_smallest_singular_value(ptr::null()).is_nan());
        frost_grid_free(ptr::null_mut());
        frost_basis_free(ptr::null_mut());
        frost_sensors_free(ptr::null_mut());
        frost_reconstructor_free(ptr::null_mut());

        let v = CStr::from_ptr(frost_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn error_message_is_truncated_to_the_buffer() {
    unsafe {
        let mut grid = ptr::null_mut();
        frost_grid_new(1, 1, &mut grid);
        let full = frost_last_error_message(ptr::null_mut(), 0);
        assert!(full > 8);
        let mut buf = [1 as c_char; 8];
        assert_eq!(frost_last_error_message(buf.as_mut_ptr(), 8), full);
        assert_eq!(buf[7], 0);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_bytes().len(), 7);
    }
}

#[test]
fn header_compiles_as_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("frost.h").exists());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("check.c");
    std::fs::write(
        &src,
        "#include \"frost.h\"\nint main(void) { FrostGrid *g = 0; return frost_grid_new(70, 80, &g) == FROST_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let status = match Command::new("cc").arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg("-I").arg(&include).arg(&src).status() {
        Ok(s) => s,
        // no C compiler on this machine
        Err(_) => return,
    };
    assert!(status.success());
}

use std::ffi::CStr;
use std::ptr;

use timebin_ffi::*;

fn last_error() -> String {
    let p = tb_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn bell_pair_round_trip() {
    unsafe {
        let mut scenario = ptr::null_mut();
        assert_eq!(tb_scenario_default_pair(&mut scenario), TbStatus::Ok);
        assert_eq!(tb_scenario_set_steps_per_bin(scenario, 200), TbStatus::Ok);

        let mut state = ptr::null_mut();
        assert_eq!(tb_reconstruct_pair(scenario, &mut state), TbStatus::Ok);

        let mut rho = [0.0; 32];
        assert_eq!(tb_pair_state_rho(state, rho.as_mut_ptr(), rho.len()), TbStatus::Ok);
        // ρ_EE,EE and Re ρ_EE,LL of the Bell state
        assert!((rho[0] - 0.5).abs() < 1e-3);
        assert!((rho[6] - 0.5).abs() < 1e-3);

        let (mut c, mut approx, mut peak) = (0.0, 0.0, 0.0);
        assert_eq!(tb_pair_concurrence(state, &mut c), TbStatus::Ok);
        assert_eq!(tb_pair_concurrence_approx(state, &mut approx), TbStatus::Ok);
        assert_eq!(tb_pair_center_peak(state, std::f64::consts::PI, 0.0, &mut peak), TbStatus::Ok);
        assert!(c > 0.99 && (approx - c).abs() < 1e-3, "{c} {approx}");
        assert!(peak.abs() < 1e-2, "{peak}");

        tb_pair_state_free(state);
        tb_scenario_free(scenario);
    }
}

#[test]
fn single_photon_round_trip() {
    unsafe {
        let mut scenario = ptr::null_mut();
        assert_eq!(tb_scenario_default_single(&mut scenario), TbStatus::Ok);
        assert_eq!(tb_scenario_set_steps_per_bin(scenario, 200), TbStatus::Ok);
        let mut state = ptr::null_mut();
        assert_eq!(tb_reconstruct_single(scenario, &mut state), TbStatus::Ok);
        let mut rho = [0.0; 8];
        assert_eq!(tb_single_state_rho(state, rho.as_mut_ptr(), rho.len()), TbStatus::Ok);
        assert!((rho[2].hypot(rho[3]) - 0.5).abs() < 1e-3);
        let mut v = 0.0;
        assert_eq!(tb_single_visibility(scenario, &mut v), TbStatus::Ok);
        assert!((v - 1.0).abs() < 1e-3, "{v}");
        tb_single_state_free(state);
        tb_scenario_free(scenario);
    }
}

#[test]
fn invalid_input_is_reported() {
    unsafe {
        let mut out = 0.0;
        assert_eq!(tb_pair_concurrence(ptr::null(), &mut out), TbStatus::NullPointer);
        assert!(last_error().contains("state"));

        let mut scenario = ptr::null_mut();
        let toml = c"[source]\nkind = \"wavepacket\"\nt_bin = -2.0\namplitudes = [[1.0, 0.0], [0.0, 0.0]]\n";
        assert_eq!(tb_scenario_from_toml(toml.as_ptr(), &mut scenario), TbStatus::Config);
        assert!(scenario.is_null());
        assert!(last_error().contains("t_bin"));

        assert_eq!(tb_scenario_default_single(&mut scenario), TbStatus::Ok);
        assert_eq!(tb_scenario_set_steps_per_bin(scenario, 0), TbStatus::InvalidArgument);
        assert_eq!(tb_scenario_set_steps_per_bin(scenario, 50), TbStatus::Ok);
        let mut state = ptr::null_mut();
        assert_eq!(tb_reconstruct_single(scenario, &mut state), TbStatus::Ok);
        let mut small = [0.0; 4];
        assert_eq!(tb_single_state_rho(state, small.as_mut_ptr(), small.len()), TbStatus::InvalidArgument);
        tb_single_state_free(state);
        tb_scenario_free(scenario);

        tb_scenario_free(ptr::null_mut());
        tb_pair_state_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/timebin.h")).unwrap();
    let source = include_str!("../src/lib.rs");
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .filter_map(|rest| rest.split('(').next())
        .collect();
    assert!(exports.len() >= 15, "{exports:?}");
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    for item in ["typedef struct TbScenario TbScenario", "TB_STATUS_PANIC = 7"] {
        assert!(header.contains(item), "{item}");
    }
}

use std::ffi::{CStr, CString};
use std::ptr;

use anchorsdr::mimo::{noise_var_for_snr_db, transmit_codeword, BitIndexMap};
use anchorsdr_ffi::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn last_error() -> String {
    unsafe { CStr::from_ptr(asdr_last_error()) }.to_string_lossy().into_owned()
}

fn small_code() -> *mut AsdrCode {
    let mut code = ptr::null_mut();
    assert_eq!(unsafe { asdr_code_new_regular(32, 16, 3, 5, &mut code) }, AsdrStatus::Ok);
    code
}

#[test]
fn encode_check_and_decode() {
    let code = small_code();
    let (n, k) = unsafe { (asdr_code_n(code), asdr_code_k(code)) };
    assert_eq!((n, k), (32, 16));
    let info: Vec<u8> = (0..k).map(|i| (i % 3 == 0) as u8).collect();
    let mut cw = vec![0u8; n];
    unsafe {
        assert_eq!(asdr_code_encode(code, info.as_ptr(), k, cw.as_mut_ptr(), n), AsdrStatus::Ok);
        let mut ok = false;
        assert_eq!(asdr_code_check_parity(code, cw.as_ptr(), n, &mut ok), AsdrStatus::Ok);
        assert!(ok);

        let llr: Vec<f64> = cw.iter().map(|&b| if b == 0 { 4.0 } else { -4.0 }).collect();
        let mut hard = vec![9u8; n];
        let mut parity = false;
        assert_eq!(
            asdr_spa_decode(code, llr.as_ptr(), n, 20, hard.as_mut_ptr(), &mut parity),
            AsdrStatus::Ok
        );
        assert_eq!(hard, cw);
        assert!(parity);
        asdr_code_free(code);
    }
}

#[test]
fn turbo_decodes_clean_frame() {
    let code = small_code();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = unsafe { asdr_code_n(code) };
    let info = vec![1u8; unsafe { asdr_code_k(code) }];
    let mut cw = vec![0u8; n];
    unsafe { asdr_code_encode(code, info.as_ptr(), info.len(), cw.as_mut_ptr(), n) };
    let map = BitIndexMap::for_codeword(2, n).unwrap();
    let nv = noise_var_for_snr_db(2, 30.0);
    let obs = transmit_codeword(&cw, &map, 2, nv, &mut rng).unwrap();
    let mut h = Vec::new();
    let mut y = Vec::new();
    for o in &obs {
        for r in 0..o.channel.nrows() {
            h.extend(o.channel.row(r).iter());
        }
        y.extend(o.received.iter());
    }
    for mode in [AsdrTurboMode::Multi, AsdrTurboMode::Single, AsdrTurboMode::FullList] {
        let mut decoded = vec![9u8; n];
        let mut its = 0usize;
        let status = unsafe {
            asdr_turbo_decode(code, 2, 2, mode, h.as_ptr(), y.as_ptr(), nv, decoded.as_mut_ptr(), &mut its)
        };
        assert_eq!(status, AsdrStatus::Ok, "{}", last_error());
        assert_eq!(decoded, cw);
        assert!(its >= 1);
    }
    unsafe { asdr_code_free(code) };
}

#[test]
fn errors_are_reported() {
    unsafe {
        assert_eq!(
            asdr_code_encode(ptr::null(), ptr::null(), 0, ptr::null_mut(), 0),
            AsdrStatus::NullPointer
        );
        assert!(last_error().contains("code"));

        let code = small_code();
        let info = [0u8; 3];
        let mut cw = [0u8; 32];
        assert_eq!(
            asdr_code_encode(code, info.as_ptr(), 3, cw.as_mut_ptr(), 32),
            AsdrStatus::InvalidArgument
        );
        assert!(!last_error().is_empty());
        assert_eq!(asdr_code_n(ptr::null()), 0);
        asdr_code_free(code);
        asdr_code_free(ptr::null_mut());

        let mut out = ptr::null_mut();
        assert_eq!(asdr_code_new_regular(30, 16, 3, 1, &mut out), AsdrStatus::Config);

        let path = CString::new("/definitely/missing.alist").unwrap();
        assert_eq!(asdr_code_from_alist(path.as_ptr(), &mut out), AsdrStatus::Io);

        let bad = CString::new("snr_db = []\nreceiver = \"joint-ml-sdr\"").unwrap();
        let mut exp = ptr::null_mut();
        assert_eq!(asdr_experiment_from_toml(bad.as_ptr(), &mut exp), AsdrStatus::Config);
        assert!(exp.is_null());
        assert!(last_error().contains("snr_db"));
    }
}

#[test]
fn ber_from_toml() {
    let text = CString::new(
        "seed = 3\nnt = 2\nnr = 2\nsnr_db = [40.0]\nreceiver = \"joint-ml-sdr\"\n\
         [code]\nn = 32\nchecks = 16\n[trials]\nmax_codewords = 5\n",
    )
    .unwrap();
    unsafe {
        let mut exp = ptr::null_mut();
        assert_eq!(asdr_experiment_from_toml(text.as_ptr(), &mut exp), AsdrStatus::Ok, "{}", last_error());
        let mut res = ptr::null_mut();
        assert_eq!(asdr_experiment_run_ber(exp, &mut res), AsdrStatus::Ok, "{}", last_error());
        assert_eq!(asdr_ber_result_len(res), 1);
        let mut rec = AsdrBerRecord::default();
        assert_eq!(asdr_ber_result_get(res, 0, &mut rec), AsdrStatus::Ok);
        assert_eq!((rec.codewords, rec.bits, rec.bit_errors, rec.iteration), (5, 160, 0, 1));
        assert_eq!(asdr_ber_result_get(res, 1, &mut rec), AsdrStatus::InvalidArgument);
        asdr_ber_result_free(res);
        asdr_experiment_free(exp);
    }
}

#[test]
fn header_is_valid_c() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/anchorsdr.h")).unwrap();
    for name in ["asdr_code_new_regular", "asdr_turbo_decode", "asdr_last_error", "typedef struct AsdrCode"] {
        assert!(header.contains(name), "{name} missing from header");
    }
    let compiler = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let Ok(status) = std::process::Command::new(&compiler)
        .args(["-fsyntax-only", "-x", "c", "-std=c99"])
        .arg(dir.join("include/anchorsdr.h"))
        .status()
    else {
        eprintln!("no C compiler available, syntax check skipped");
        return;
    };
    assert!(status.success());
}

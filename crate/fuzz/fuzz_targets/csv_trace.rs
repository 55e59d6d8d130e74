#![no_main]
use cpwmask::fitting::parse_csv_trace;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(trace) = parse_csv_trace(text, "fuzz") else { return };
    let mut out = Vec::new();
    trace.write_csv(&mut out).unwrap();
    let again = parse_csv_trace(std::str::from_utf8(&out).unwrap(), "fuzz").unwrap();
    assert_eq!(again.frequencies_ghz, trace.frequencies_ghz);
    assert_eq!(again.s21, trace.s21);
});

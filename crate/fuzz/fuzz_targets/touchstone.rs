#![no_main]
use cpwmask::fitting::parse_touchstone;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(trace) = parse_touchstone(text, "fuzz") {
            assert!(trace.frequencies_ghz.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(trace.frequencies_ghz.len(), trace.s21.len());
        }
    }
});

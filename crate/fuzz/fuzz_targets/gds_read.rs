#![no_main]
use cpwmask::layout::gdsii::{read_library, write_library};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(lib) = read_library(data) {
        // anything we accept must survive our own writer
        if let Ok(bytes) = write_library(&lib) {
            assert_eq!(read_library(&bytes).unwrap(), lib);
        }
    }
});

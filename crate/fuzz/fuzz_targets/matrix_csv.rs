#![no_main]
use ctrlplace::io::{matrix_to_csv, parse_matrix_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = parse_matrix_csv(text) {
        // anything accepted must survive a write/read round trip unchanged
        let again = parse_matrix_csv(&matrix_to_csv(&m)).expect("re-parse of written matrix");
        assert_eq!(m, again);
    }
});

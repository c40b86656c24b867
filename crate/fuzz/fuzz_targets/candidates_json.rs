#![no_main]
use ctrlplace::io::parse_candidates_json;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // first byte picks the state dimension
    let Some((&n, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    if let Ok(set) = parse_candidates_json(text, usize::from(n % 16)) {
        for c in set.columns() {
            assert_eq!(c.len(), usize::from(n % 16));
        }
    }
});

#![no_main]
use ctrlplace::{Horizon, RunConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_json(text) {
        let _ = cfg.tolerances();
    }
    let _ = text.parse::<Horizon>();
});

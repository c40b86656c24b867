#![no_main]
use ctrlplace::systems::{OscillatorNetworkConfig, RandomSystemConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = RandomSystemConfig::from_json(text);
    let _ = OscillatorNetworkConfig::from_json(text);
});
